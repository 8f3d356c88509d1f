//! Bijections between bounded parameter intervals and the real line.

use super::optimize::Bound;

/// Per-coordinate map `ω ↔ θ` used to optimize bounded parameters without
/// constraints: log for half-bounded intervals, logit for finite ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoordinateMap {
    Identity,
    LogAbove(f64),
    LogBelow(f64),
    Logit(f64, f64),
}

impl CoordinateMap {
    pub fn for_bound(bound: &Bound) -> Self {
        match (bound.lower.is_finite(), bound.upper.is_finite()) {
            (false, false) => CoordinateMap::Identity,
            (true, false) => CoordinateMap::LogAbove(bound.lower),
            (false, true) => CoordinateMap::LogBelow(bound.upper),
            (true, true) => CoordinateMap::Logit(bound.lower, bound.upper),
        }
    }

    /// `θ` for a point strictly inside the interval.
    pub fn to_free(&self, w: f64) -> f64 {
        match *self {
            CoordinateMap::Identity => w,
            CoordinateMap::LogAbove(lo) => (w - lo).ln(),
            CoordinateMap::LogBelow(hi) => (hi - w).ln(),
            CoordinateMap::Logit(lo, hi) => {
                let u = (w - lo) / (hi - lo);
                (u / (1.0 - u)).ln()
            }
        }
    }

    pub fn from_free(&self, t: f64) -> f64 {
        match *self {
            CoordinateMap::Identity => t,
            CoordinateMap::LogAbove(lo) => lo + t.exp(),
            CoordinateMap::LogBelow(hi) => hi - t.exp(),
            CoordinateMap::Logit(lo, hi) => lo + (hi - lo) / (1.0 + (-t).exp()),
        }
    }

    /// `dω/dθ` at `θ`.
    pub fn jacobian(&self, t: f64) -> f64 {
        match *self {
            CoordinateMap::Identity => 1.0,
            CoordinateMap::LogAbove(_) => t.exp(),
            CoordinateMap::LogBelow(_) => -t.exp(),
            CoordinateMap::Logit(lo, hi) => {
                let e = (-t.abs()).exp();
                (hi - lo) * e / (1.0 + e).powi(2)
            }
        }
    }
}

/// Coordinate maps for a whole parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Reparameterization {
    maps: Vec<CoordinateMap>,
}

impl Reparameterization {
    pub fn new(bounds: &[Bound]) -> Self {
        Self { maps: bounds.iter().map(CoordinateMap::for_bound).collect() }
    }

    pub fn identity(dim: usize) -> Self {
        Self { maps: vec![CoordinateMap::Identity; dim] }
    }

    pub fn maps(&self) -> &[CoordinateMap] {
        &self.maps
    }

    pub fn to_free(&self, w: &[f64]) -> Vec<f64> {
        self.maps.iter().zip(w).map(|(m, &v)| m.to_free(v)).collect()
    }

    pub fn from_free(&self, t: &[f64]) -> Vec<f64> {
        self.maps.iter().zip(t).map(|(m, &v)| m.from_free(v)).collect()
    }
}
