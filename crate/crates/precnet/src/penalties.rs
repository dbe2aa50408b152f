//! Penalty functions for the penalized likelihood: lasso, SCAD and the
//! adaptive lasso, plus the local linear approximation that turns a concave
//! penalty into per-element weights for the weighted-L1 solver.

use crate::error::{Error, Result};
use crate::glasso::WeightMatrix;
use crate::linalg::SymMatrix;

/// Recommended SCAD shape parameter.
pub const DEFAULT_SCAD_A: f64 = 3.7;
/// Default exponent for adaptive-lasso weights.
pub const DEFAULT_ADAPTIVE_GAMMA: f64 = 0.5;

/// A fully specified penalty.
#[derive(Debug, Clone)]
pub enum Penalty {
    Lasso {
        lambda: f64,
    },
    Scad {
        lambda: f64,
        a: f64,
    },
    /// Weighted lasso with weights `1 / |init_ij|^gamma`. When `init` is
    /// `None` the estimator resolves it from its initial-value policy.
    AdaptiveLasso {
        lambda: f64,
        gamma: f64,
        init: Option<SymMatrix>,
    },
}

/// Penalty family with hyperparameters but no regularization level; used by
/// tuning code that sweeps lambda.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyKind {
    Lasso,
    Scad { a: f64 },
    AdaptiveLasso { gamma: f64 },
}

impl PenaltyKind {
    pub fn at_lambda(&self, lambda: f64) -> Penalty {
        match *self {
            PenaltyKind::Lasso => Penalty::Lasso { lambda },
            PenaltyKind::Scad { a } => Penalty::Scad { lambda, a },
            PenaltyKind::AdaptiveLasso { gamma } => Penalty::AdaptiveLasso {
                lambda,
                gamma,
                init: None,
            },
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PenaltyKind::Lasso => "lasso",
            PenaltyKind::Scad { .. } => "scad",
            PenaltyKind::AdaptiveLasso { .. } => "adaptive_lasso",
        }
    }
}

impl std::fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl Penalty {
    pub fn lasso(lambda: f64) -> Self {
        Penalty::Lasso { lambda }
    }

    /// SCAD with the recommended shape `a = 3.7`.
    pub fn scad(lambda: f64) -> Self {
        Penalty::Scad {
            lambda,
            a: DEFAULT_SCAD_A,
        }
    }

    pub fn scad_with(lambda: f64, a: f64) -> Self {
        Penalty::Scad { lambda, a }
    }

    /// Adaptive lasso with `gamma = 0.5` and an initial estimate resolved by
    /// the estimator.
    pub fn adaptive(lambda: f64) -> Self {
        Penalty::AdaptiveLasso {
            lambda,
            gamma: DEFAULT_ADAPTIVE_GAMMA,
            init: None,
        }
    }

    pub fn adaptive_with(lambda: f64, gamma: f64, init: Option<SymMatrix>) -> Self {
        Penalty::AdaptiveLasso {
            lambda,
            gamma,
            init,
        }
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            Penalty::Lasso { lambda }
            | Penalty::Scad { lambda, .. }
            | Penalty::AdaptiveLasso { lambda, .. } => lambda,
        }
    }

    pub fn kind(&self) -> PenaltyKind {
        match *self {
            Penalty::Lasso { .. } => PenaltyKind::Lasso,
            Penalty::Scad { a, .. } => PenaltyKind::Scad { a },
            Penalty::AdaptiveLasso { gamma, .. } => PenaltyKind::AdaptiveLasso { gamma },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lambda = self.lambda();
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be a finite nonnegative number, got {lambda}"
            )));
        }
        match self {
            Penalty::Lasso { .. } => {}
            Penalty::Scad { a, .. } => {
                if !(*a > 2.0) {
                    return Err(Error::InvalidParameter(format!(
                        "SCAD shape parameter must exceed 2, got {a}"
                    )));
                }
            }
            Penalty::AdaptiveLasso { gamma, .. } => {
                if !(*gamma > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "adaptive-lasso exponent must be positive, got {gamma}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn validate_scad_args(x: f64, lambda: f64, a: f64) -> Result<()> {
    if !(a > 2.0) {
        return Err(Error::InvalidParameter(format!(
            "SCAD shape parameter must exceed 2, got {a}"
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda must be a finite nonnegative number, got {lambda}"
        )));
    }
    if !(x >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "SCAD argument must be nonnegative, got {x}"
        )));
    }
    Ok(())
}

/// First derivative of the SCAD penalty on `[0, inf)`: equal to `lambda` up
/// to `lambda`, decaying linearly to zero at `a * lambda`, zero beyond.
pub fn scad_derivative(x: f64, lambda: f64, a: f64) -> Result<f64> {
    validate_scad_args(x, lambda, a)?;
    if x <= lambda {
        Ok(lambda)
    } else {
        Ok((a * lambda - x).max(0.0) / (a - 1.0))
    }
}

/// SCAD penalty value: the quadratic spline whose derivative is
/// [`scad_derivative`], with value 0 at the origin. Linear up to `lambda`,
/// quadratic between the knots, constant `(a + 1) lambda^2 / 2` beyond
/// `a * lambda`.
pub fn scad_value(x: f64, lambda: f64, a: f64) -> Result<f64> {
    validate_scad_args(x, lambda, a)?;
    if x <= lambda {
        Ok(lambda * x)
    } else if x <= a * lambda {
        Ok((2.0 * a * lambda * x - x * x - lambda * lambda) / (2.0 * (a - 1.0)))
    } else {
        Ok((a + 1.0) * lambda * lambda / 2.0)
    }
}

/// Adaptive-lasso weights `lambda / |init_ij|^gamma`. Zero initial entries map
/// to the infinite sentinel, so the estimate absorbs every zero of the
/// initial value.
pub fn adaptive_weights(init: &SymMatrix, gamma: f64, lambda: f64) -> Result<WeightMatrix> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "adaptive-lasso exponent must be positive, got {gamma}"
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda must be a finite nonnegative number, got {lambda}"
        )));
    }
    WeightMatrix::from_fn(init.dim(), |i, j| {
        let base = init.get(i, j).abs();
        if base == 0.0 {
            f64::INFINITY
        } else {
            lambda / base.powf(gamma)
        }
    })
}

/// Local linear approximation weights: each element is penalized at the
/// derivative of the penalty taken at the current estimate's magnitude, so a
/// concave penalty becomes a weighted-L1 subproblem. For the lasso the weight
/// is constant `lambda` regardless of the current value.
pub fn lla_weights(current: &SymMatrix, penalty: &Penalty) -> Result<WeightMatrix> {
    penalty.validate()?;
    match *penalty {
        Penalty::Lasso { lambda } => WeightMatrix::constant(current.dim(), lambda),
        Penalty::Scad { lambda, a } => WeightMatrix::from_fn(current.dim(), |i, j| {
            scad_derivative(current.get(i, j).abs(), lambda, a).expect("validated parameters")
        }),
        Penalty::AdaptiveLasso { .. } => Err(Error::InvalidParameter(
            "the adaptive lasso has its own weight construction; use adaptive_weights".into(),
        )),
    }
}
