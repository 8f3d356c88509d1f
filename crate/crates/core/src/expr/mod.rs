//! Scalar interest functions written as arithmetic expressions over
//! parameter names.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | name | func '(' expr ')' | '(' expr ')'
//! func    := sqrt | log | ln | exp
//! ```

mod parser;

use std::fmt;

use thiserror::Error;

use crate::model::ParameterSpace;
use crate::numerics::numeric_gradient;

/// Byte range in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sqrt,
    Log,
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Const(f64),
    Param { name: String, index: usize },
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

/// Expression tree node. Equality ignores spans.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Expr {
    fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        let span = Span { start: lhs.span.start, end: rhs.span.end };
        Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier '{name}' at position {position}; valid parameters: {}", valid.join(", "))]
    UnknownIdentifier { name: String, position: usize, valid: Vec<String> },
    #[error("unknown built-in interest function '{0}' (available: diff, ratio, auc, kl, gamma_sd)")]
    UnknownBuiltin(String),
    #[error("evaluation error at {}..{}: {message}", span.start, span.end)]
    Eval { span: Span, message: String },
    #[error("expected {expected} parameter values, got {got}")]
    Arity { expected: usize, got: usize },
}

impl ExprError {
    /// Errors caused by the expression text rather than its evaluation.
    pub fn is_usage(&self) -> bool {
        !matches!(self, ExprError::Eval { .. } | ExprError::Arity { .. })
    }
}

fn eval_error(span: Span, message: impl Into<String>) -> ExprError {
    ExprError::Eval { span, message: message.into() }
}

fn checked(v: f64, span: Span) -> Result<f64, ExprError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(eval_error(span, "non-finite result"))
    }
}

impl Expr {
    pub fn eval(&self, params: &[f64]) -> Result<f64, ExprError> {
        let span = self.span;
        match &self.kind {
            ExprKind::Const(c) => Ok(*c),
            ExprKind::Param { index, .. } => Ok(params[*index]),
            ExprKind::Unary(op, a) => {
                let a = a.eval(params)?;
                match op {
                    UnaryOp::Neg => Ok(-a),
                    UnaryOp::Sqrt if a < 0.0 => Err(eval_error(span, format!("sqrt of negative value {a}"))),
                    UnaryOp::Sqrt => Ok(a.sqrt()),
                    UnaryOp::Log if a <= 0.0 => Err(eval_error(span, format!("log of non-positive value {a}"))),
                    UnaryOp::Log => Ok(a.ln()),
                    UnaryOp::Exp => checked(a.exp(), span),
                }
            }
            ExprKind::Binary(op, a, b) => {
                let a = a.eval(params)?;
                let b = b.eval(params)?;
                match op {
                    BinaryOp::Add => checked(a + b, span),
                    BinaryOp::Sub => checked(a - b, span),
                    BinaryOp::Mul => checked(a * b, span),
                    BinaryOp::Div if b == 0.0 => Err(eval_error(span, "division by zero")),
                    BinaryOp::Div => checked(a / b, span),
                    BinaryOp::Pow => checked(a.powf(b), span),
                }
            }
        }
    }

    /// Value and gradient by forward-mode differentiation.
    pub fn eval_with_gradient(&self, params: &[f64]) -> Result<(f64, Vec<f64>), ExprError> {
        let span = self.span;
        let d = params.len();
        match &self.kind {
            ExprKind::Const(c) => Ok((*c, vec![0.0; d])),
            ExprKind::Param { index, .. } => {
                let mut g = vec![0.0; d];
                g[*index] = 1.0;
                Ok((params[*index], g))
            }
            ExprKind::Unary(op, a) => {
                let (_, ga) = a.eval_with_gradient(params)?;
                let v = self.eval(params)?;
                let av = a.eval(params)?;
                let scale = match op {
                    UnaryOp::Neg => -1.0,
                    UnaryOp::Sqrt if av == 0.0 => return Err(eval_error(span, "sqrt is not differentiable at 0")),
                    UnaryOp::Sqrt => 0.5 / v,
                    UnaryOp::Log => 1.0 / av,
                    UnaryOp::Exp => v,
                };
                Ok((v, ga.into_iter().map(|g| scale * g).collect()))
            }
            ExprKind::Binary(op, a, b) => {
                let (av, ga) = a.eval_with_gradient(params)?;
                let (bv, gb) = b.eval_with_gradient(params)?;
                let v = self.eval(params)?;
                let g = match op {
                    BinaryOp::Add => ga.iter().zip(&gb).map(|(x, y)| x + y).collect(),
                    BinaryOp::Sub => ga.iter().zip(&gb).map(|(x, y)| x - y).collect(),
                    BinaryOp::Mul => ga.iter().zip(&gb).map(|(x, y)| x * bv + av * y).collect(),
                    BinaryOp::Div => ga.iter().zip(&gb).map(|(x, y)| (x * bv - av * y) / (bv * bv)).collect(),
                    BinaryOp::Pow => {
                        let log_term = if gb.iter().any(|&y| y != 0.0) {
                            if av <= 0.0 {
                                return Err(eval_error(span, "variable exponent requires a positive base"));
                            }
                            av.ln()
                        } else {
                            0.0
                        };
                        let da = if bv == 0.0 { 0.0 } else { bv * av.powf(bv - 1.0) };
                        ga.iter().zip(&gb).map(|(x, y)| da * x + v * log_term * y).collect()
                    }
                };
                Ok((v, checked_vec(g, span)?))
            }
        }
    }

    /// Parameter index when the expression is a bare parameter reference.
    pub fn as_parameter(&self) -> Option<usize> {
        match self.kind {
            ExprKind::Param { index, .. } => Some(index),
            _ => None,
        }
    }
}

fn checked_vec(g: Vec<f64>, span: Span) -> Result<Vec<f64>, ExprError> {
    if g.iter().all(|v| v.is_finite()) {
        Ok(g)
    } else {
        Err(eval_error(span, "non-finite derivative"))
    }
}

impl fmt::Display for UnaryOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Log => "log",
            UnaryOp::Exp => "exp",
        })
    }
}

impl fmt::Display for BinaryOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        })
    }
}

/// Fully parenthesized; reparses to a structurally identical tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Const(c) if *c < 0.0 => write!(f, "(-{})", -c),
            ExprKind::Const(c) => write!(f, "{c}"),
            ExprKind::Param { name, .. } => f.write_str(name),
            ExprKind::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            ExprKind::Unary(op, a) => write!(f, "{op}({a})"),
            ExprKind::Binary(op, a, b) => write!(f, "({a} {op} {b})"),
        }
    }
}

/// Names of the built-in interest functions with their definitions.
pub const BUILTINS: [(&str, &str); 5] = [
    ("diff", "m1 - m2"),
    ("ratio", "m1 / m2"),
    ("auc", "m1 / (m1 + m2)"),
    ("kl", "2 - m2/m1 - m1/m2"),
    ("gamma_sd", "mean / sqrt(shape)"),
];

pub fn builtin_source(name: &str) -> Result<&'static str, ExprError> {
    BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .ok_or_else(|| ExprError::UnknownBuiltin(name.to_string()))
}

/// Scalar function of the parameter vector used as an inferential target.
pub trait InterestFn: Send + Sync {
    fn value(&self, params: &[f64]) -> Result<f64, ExprError>;
    fn gradient(&self, params: &[f64]) -> Result<Vec<f64>, ExprError>;
    /// `Some(i)` when the function is the `i`-th coordinate.
    fn coordinate(&self) -> Option<usize> {
        None
    }
    fn label(&self) -> String;
}

/// A parsed interest expression bound to a parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct InterestFunction {
    source: String,
    ast: Expr,
    dim: usize,
}

impl InterestFunction {
    pub fn parse(source: &str, space: &ParameterSpace) -> Result<Self, ExprError> {
        let ast = parser::parse(source, space.names())?;
        Ok(Self { source: source.to_string(), ast, dim: space.dim() })
    }

    pub fn builtin(name: &str, space: &ParameterSpace) -> Result<Self, ExprError> {
        let source = builtin_source(name)?;
        let ast = parser::parse(source, space.names())?;
        Ok(Self { source: name.to_string(), ast, dim: space.dim() })
    }

    /// Built-in name if one matches, otherwise parsed as an expression.
    pub fn from_spec(text: &str, space: &ParameterSpace) -> Result<Self, ExprError> {
        let trimmed = text.trim();
        if builtin_source(trimmed).is_ok() && space.index_of(trimmed).is_none() {
            Self::builtin(trimmed, space)
        } else {
            Self::parse(trimmed, space)
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    fn arity(&self, params: &[f64]) -> Result<(), ExprError> {
        if params.len() == self.dim {
            Ok(())
        } else {
            Err(ExprError::Arity { expected: self.dim, got: params.len() })
        }
    }

    pub fn eval(&self, params: &[f64]) -> Result<f64, ExprError> {
        self.arity(params)?;
        self.ast.eval(params)
    }

    /// Central-difference gradient with relative step `1e-6`.
    pub fn numeric_gradient(&self, params: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.arity(params)?;
        numeric_gradient(|w| self.ast.eval(w).unwrap_or(f64::NAN), params, 1e-6)
            .map_err(|e| eval_error(self.ast.span, e.to_string()))
    }

    /// Exact gradient by forward-mode differentiation.
    pub fn analytic_gradient(&self, params: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.arity(params)?;
        Ok(self.ast.eval_with_gradient(params)?.1)
    }
}

impl fmt::Display for InterestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl InterestFn for InterestFunction {
    fn value(&self, params: &[f64]) -> Result<f64, ExprError> {
        self.eval(params)
    }

    fn gradient(&self, params: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.analytic_gradient(params)
    }

    fn coordinate(&self) -> Option<usize> {
        self.ast.as_parameter()
    }

    fn label(&self) -> String {
        self.source.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Bound;

    fn two() -> ParameterSpace {
        ParameterSpace::new([("m1", Bound::POSITIVE), ("m2", Bound::POSITIVE)]).unwrap()
    }

    const EST: [f64; 2] = [39.889, 8.667];

    #[test]
    fn auc_expression() {
        let g = InterestFunction::parse("m1/(m1+m2)", &two()).unwrap();
        assert!((g.eval(&EST).unwrap() - 0.8215).abs() < 5e-5);
    }

    #[test]
    fn identity_is_coordinate() {
        let g = InterestFunction::parse("m1", &two()).unwrap();
        assert_eq!(g.coordinate(), Some(0));
        assert_eq!(g.eval(&EST).unwrap(), 39.889);
        assert_eq!(InterestFunction::parse("(m2)", &two()).unwrap().coordinate(), Some(1));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match InterestFunction::parse("m1/(m3", &two()) {
            Err(ExprError::UnknownIdentifier { name, position, valid }) => {
                assert_eq!(name, "m3");
                assert_eq!(position, 4);
                assert_eq!(valid, vec!["m1".to_string(), "m2".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
        match InterestFunction::parse("m1/(m2", &two()) {
            Err(ExprError::Syntax { position, .. }) => assert_eq!(position, 6),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(InterestFunction::parse("   ", &two()), Err(ExprError::Empty));
        assert!(matches!(InterestFunction::parse("m1 m2", &two()), Err(ExprError::Syntax { position: 3, .. })));
        assert!(matches!(InterestFunction::parse("m1 + ", &two()), Err(ExprError::Syntax { .. })));
        assert!(matches!(InterestFunction::parse("foo(m1)", &two()), Err(ExprError::Syntax { .. })));
    }

    #[test]
    fn builtin_values() {
        let s = two();
        let e = |src: &str| InterestFunction::parse(src, &s).unwrap().eval(&EST).unwrap();
        assert!((e("m1-m2") - 31.222).abs() < 1e-9);
        assert!((e("2 - m2/m1 - m1/m2") + 2.820).abs() < 5e-4);
        let b = |n: &str| InterestFunction::builtin(n, &s).unwrap().eval(&EST).unwrap();
        assert!((b("auc") - 0.822).abs() < 5e-4);
        // exact estimates here; the rounded ones drift past the third decimal
        let exact = [359.0 / 9.0, 182.0 / 21.0];
        let ratio = InterestFunction::builtin("ratio", &s).unwrap().eval(&exact).unwrap();
        assert!((ratio - 4.603).abs() < 5e-4);
        let gs = ParameterSpace::new([("shape", Bound::POSITIVE), ("mean", Bound::POSITIVE)]).unwrap();
        let sd = InterestFunction::builtin("gamma_sd", &gs).unwrap().eval(&[1.642, 8.667]).unwrap();
        assert!((sd - 6.764).abs() < 5e-4);
        assert!(matches!(InterestFunction::builtin("nope", &s), Err(ExprError::UnknownBuiltin(_))));
    }

    #[test]
    fn gradients() {
        let g = InterestFunction::parse("m1/m2", &two()).unwrap();
        let a = g.analytic_gradient(&[4.0, 2.0]).unwrap();
        let n = g.numeric_gradient(&[4.0, 2.0]).unwrap();
        for (x, y) in a.iter().zip(&n) {
            assert!((x - y).abs() < 1e-6);
        }
        assert!((a[0] - 0.5).abs() < 1e-12 && (a[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn precedence_and_associativity() {
        let s = ParameterSpace::new([("x", Bound::REAL)]).unwrap();
        let e = |src: &str| InterestFunction::parse(src, &s).unwrap().eval(&[3.0]).unwrap();
        assert_eq!(e("-x^2"), -9.0);
        assert_eq!(e("2^3^2"), 512.0);
        assert_eq!(e("2^-1"), 0.5);
        assert_eq!(e("10 - 4 - 3"), 3.0);
        assert_eq!(e("24 / 4 / 3"), 2.0);
        assert_eq!(e("1 + 2 * x"), 7.0);
        assert_eq!(e("-x * 2"), -6.0);
        assert!((e("exp(log(x))") - 3.0).abs() < 1e-15);
        assert_eq!(e("ln(1)"), 0.0);
        assert_eq!(e("1.5e1 + 2E-1"), 15.2);
    }

    #[test]
    fn evaluation_errors() {
        let s = ParameterSpace::new([("x", Bound::REAL)]).unwrap();
        let g = |src: &str| InterestFunction::parse(src, &s).unwrap();
        assert!(matches!(g("1/x").eval(&[0.0]), Err(ExprError::Eval { .. })));
        assert!(matches!(g("log(x)").eval(&[-1.0]), Err(ExprError::Eval { span: Span { start: 0, end: 6 }, .. })));
        assert!(matches!(g("sqrt(x)").eval(&[-1.0]), Err(ExprError::Eval { .. })));
        assert!(matches!(g("x").eval(&[1.0, 2.0]), Err(ExprError::Arity { .. })));
    }
}
