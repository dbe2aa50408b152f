//! The estimation pipeline: resolve an initial value, build penalty weights,
//! run the weighted solver (one local-linear-approximation step by default,
//! optionally iterated to a fixed point), evaluate the penalized objective and
//! threshold the estimate into a sparsity pattern.

use crate::error::{Error, Result};
use crate::glasso::{solve_weighted_glasso, GlassoSolution, SolverOptions, WeightMatrix};
use crate::linalg::{trace_product, SpdMatrix, SymMatrix};
use crate::penalties::{adaptive_weights, lla_weights, scad_value, Penalty};

/// How many reweighting steps to take for a concave penalty.
#[derive(Debug, Clone)]
pub enum LlaMode {
    /// A single weighted solve from the initial value.
    OneStep,
    /// Reweight and re-solve until the estimate stops moving.
    IterateUntil { max_iters: usize, tol: f64 },
}

/// Where the initial estimate for SCAD weights or adaptive-lasso weights
/// comes from.
#[derive(Debug, Clone)]
pub enum InitPolicy {
    /// Inverse sample covariance when `p < n` (falling back to the lasso
    /// estimate if the covariance is degenerate), lasso estimate at the same
    /// lambda otherwise.
    Auto,
    /// Always the lasso estimate at the lambda currently being fitted.
    LassoEstimate,
    Explicit(SymMatrix),
}

#[derive(Debug, Clone)]
pub struct EstimatorOptions {
    pub mode: LlaMode,
    pub init_policy: InitPolicy,
    /// Entries below this magnitude are reported as zero in the sparsity
    /// pattern; the matrix itself is never thresholded.
    pub sparsity_threshold: f64,
    pub solver: SolverOptions,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            mode: LlaMode::OneStep,
            init_policy: InitPolicy::Auto,
            sparsity_threshold: 1e-3,
            solver: SolverOptions::default(),
        }
    }
}

/// Symmetric boolean mask with a structurally true diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityPattern {
    dim: usize,
    /// Packed lower triangle like [`SymMatrix`].
    data: Vec<bool>,
}

impl SparsityPattern {
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in 0..=i {
                data.push(if i == j { true } else { f(i, j) });
            }
        }
        SparsityPattern { dim, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        self.data[hi * (hi + 1) / 2 + lo]
    }

    /// Number of true off-diagonal cells counted as ordered pairs.
    pub fn count_offdiag_nonzero(&self) -> usize {
        let mut count = 0;
        for i in 0..self.dim {
            for j in 0..i {
                if self.get(i, j) {
                    count += 2;
                }
            }
        }
        count
    }

    /// Number of true cells counted as ordered pairs, diagonal included.
    pub fn count_nonzero(&self) -> usize {
        self.count_offdiag_nonzero() + self.dim
    }
}

/// Threshold an estimate into a sparsity mask: `|omega_ij| >= tau`, with the
/// diagonal always reported nonzero.
pub fn threshold_sparsify(omega: &SymMatrix, tau: f64) -> SparsityPattern {
    SparsityPattern::from_fn(omega.dim(), |i, j| omega.get(i, j).abs() >= tau)
}

/// A fitted precision matrix with its reporting artifacts.
#[derive(Debug, Clone)]
pub struct PrecisionEstimate {
    pub omega: SpdMatrix,
    pub pattern: SparsityPattern,
    /// Penalized objective after each reweighting step.
    pub objective_trace: Vec<f64>,
    /// The penalty actually applied, with any resolved initial value filled in.
    pub penalty: Penalty,
    pub lambda_used: f64,
    pub sweeps_used: usize,
    pub converged: bool,
}

/// Penalized log-likelihood `log det(Omega) - tr(S Omega) - sum_ij p(|omega_ij|)`,
/// with the double sum running over every pair including the diagonal.
pub fn penalized_objective(omega: &SpdMatrix, s: &SymMatrix, penalty: &Penalty) -> Result<f64> {
    penalized_objective_impl(omega, s, penalty, true)
}

fn penalized_objective_impl(
    omega: &SpdMatrix,
    s: &SymMatrix,
    penalty: &Penalty,
    penalize_diagonal: bool,
) -> Result<f64> {
    penalty.validate()?;
    let p = omega.dim();
    if s.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: s.dim(),
        });
    }
    let fit = omega.log_det() - trace_product(s, omega.sym())?;

    let term = |i: usize, j: usize| -> Result<f64> {
        let x = omega.get(i, j).abs();
        match penalty {
            Penalty::Lasso { lambda } => Ok(lambda * x),
            Penalty::Scad { lambda, a } => scad_value(x, *lambda, *a),
            Penalty::AdaptiveLasso {
                lambda,
                gamma,
                init,
            } => {
                let init = init.as_ref().ok_or_else(|| {
                    Error::InvalidParameter(
                        "adaptive penalty needs an initial estimate to be evaluated".into(),
                    )
                })?;
                if init.dim() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        found: init.dim(),
                    });
                }
                let base = init.get(i, j).abs();
                if base == 0.0 {
                    // Hard-zero entry: no cost while the estimate is zero,
                    // infinitely costly otherwise.
                    Ok(if x == 0.0 { 0.0 } else { f64::INFINITY })
                } else {
                    Ok(lambda / base.powf(*gamma) * x)
                }
            }
        }
    };

    let mut pen = 0.0;
    for i in 0..p {
        if penalize_diagonal {
            pen += term(i, i)?;
        }
        for j in 0..i {
            pen += 2.0 * term(i, j)?;
        }
    }
    Ok(fit - pen)
}

/// Fits a precision matrix to the sample covariance `s` of `n` observations
/// under the given penalty.
pub fn estimate(
    s: &SymMatrix,
    n: usize,
    penalty: &Penalty,
    opts: &EstimatorOptions,
) -> Result<PrecisionEstimate> {
    penalty.validate()?;
    if !(opts.sparsity_threshold >= 0.0) {
        return Err(Error::InvalidParameter(
            "sparsity threshold must be nonnegative".into(),
        ));
    }
    let p = s.dim();
    let lambda = penalty.lambda();

    let (solution, objective_trace, resolved) = match penalty {
        Penalty::Lasso { lambda } => {
            let lam = WeightMatrix::constant(p, *lambda)?;
            let sol = solve_weighted_glasso(s, &lam, &opts.solver)?;
            let q =
                penalized_objective_impl(&sol.omega, s, penalty, opts.solver.penalize_diagonal)?;
            (sol, vec![q], penalty.clone())
        }
        Penalty::Scad { .. } => {
            let init = resolve_init(s, n, lambda, opts)?;
            match opts.mode {
                LlaMode::OneStep => {
                    let lam = lla_weights(&init, penalty)?;
                    let sol = solve_weighted_glasso(s, &lam, &opts.solver)?;
                    let q = penalized_objective_impl(
                        &sol.omega,
                        s,
                        penalty,
                        opts.solver.penalize_diagonal,
                    )?;
                    (sol, vec![q], penalty.clone())
                }
                LlaMode::IterateUntil { max_iters, tol } => {
                    if max_iters == 0 {
                        return Err(Error::InvalidParameter(
                            "max_iters must be at least 1".into(),
                        ));
                    }
                    let mut current = init;
                    let mut trace = Vec::new();
                    let mut last: Option<GlassoSolution> = None;
                    for _ in 0..max_iters {
                        let lam = lla_weights(&current, penalty)?;
                        let sol = solve_weighted_glasso(s, &lam, &opts.solver)?;
                        let q = penalized_objective_impl(
                            &sol.omega,
                            s,
                            penalty,
                            opts.solver.penalize_diagonal,
                        )?;
                        if let Some(prev) = trace.last().copied() {
                            debug_assert!(
                                q >= prev - 1e-8,
                                "penalized objective decreased across a reweighting step: \
                                 {prev} -> {q}"
                            );
                        }
                        trace.push(q);
                        let moved = sol.omega.sym().max_abs_diff(&current);
                        current = sol.omega.sym().clone();
                        last = Some(sol);
                        if moved <= tol {
                            break;
                        }
                    }
                    (
                        last.expect("at least one iteration"),
                        trace,
                        penalty.clone(),
                    )
                }
            }
        }
        Penalty::AdaptiveLasso {
            lambda,
            gamma,
            init,
        } => {
            let init = match init {
                Some(m) => {
                    if m.dim() != p {
                        return Err(Error::DimensionMismatch {
                            expected: p,
                            found: m.dim(),
                        });
                    }
                    m.clone()
                }
                None => resolve_init(s, n, *lambda, opts)?,
            };
            let lam = adaptive_weights(&init, *gamma, *lambda)?;
            let sol = solve_weighted_glasso(s, &lam, &opts.solver)?;
            let resolved = Penalty::AdaptiveLasso {
                lambda: *lambda,
                gamma: *gamma,
                init: Some(init),
            };
            let q =
                penalized_objective_impl(&sol.omega, s, &resolved, opts.solver.penalize_diagonal)?;
            (sol, vec![q], resolved)
        }
    };

    let pattern = threshold_sparsify(solution.omega.sym(), opts.sparsity_threshold);
    Ok(PrecisionEstimate {
        pattern,
        objective_trace,
        penalty: resolved,
        lambda_used: lambda,
        sweeps_used: solution.sweeps_used,
        converged: solution.converged,
        omega: solution.omega,
    })
}

/// Initial estimate for reweighting: the explicit matrix if one was given,
/// otherwise the inverse sample covariance when well-posed and the lasso
/// estimate at the same lambda when not.
fn resolve_init(
    s: &SymMatrix,
    n: usize,
    lambda: f64,
    opts: &EstimatorOptions,
) -> Result<SymMatrix> {
    match &opts.init_policy {
        InitPolicy::Explicit(m) => {
            if m.dim() != s.dim() {
                return Err(Error::DimensionMismatch {
                    expected: s.dim(),
                    found: m.dim(),
                });
            }
            Ok(m.clone())
        }
        InitPolicy::Auto => {
            if s.dim() < n {
                if let Ok(chol) = s.cholesky() {
                    return Ok(chol.inverse());
                }
            }
            lasso_init(s, lambda, opts)
        }
        InitPolicy::LassoEstimate => lasso_init(s, lambda, opts),
    }
}

fn lasso_init(s: &SymMatrix, lambda: f64, opts: &EstimatorOptions) -> Result<SymMatrix> {
    let lam = WeightMatrix::constant(s.dim(), lambda)?;
    let sol = solve_weighted_glasso(s, &lam, &opts.solver)?;
    Ok(sol.omega.into_sym())
}
