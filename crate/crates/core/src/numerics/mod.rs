//! Numerical building blocks shared by every other module.

pub mod diff;
pub mod linalg;
pub mod optimize;
pub mod roots;
pub mod special;
pub mod transform;

pub use diff::{numeric_gradient, numeric_hessian, GRADIENT_STEP, HESSIAN_STEP};
pub use optimize::{maximize, nelder_mead_maximize, Algorithm, Bound, Maximum, OptimizerSettings};
pub use roots::{find_root, find_root_with, RootBracket, RootSettings};
pub use special::{
    chisq_cdf, chisq_quantile, erfc, gamma_p, gamma_q, ln_gamma_q, ln_std_normal_cdf, log_gamma,
    std_normal_cdf, std_normal_pdf, std_normal_quantile,
};
pub use transform::{CoordinateMap, Reparameterization};
