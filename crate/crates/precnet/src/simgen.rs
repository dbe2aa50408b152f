//! Seeded generators for known precision structures, the Gaussian sampler
//! and the replication harness that benchmarks the penalties against a fixed
//! truth.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{
    estimate, threshold_sparsify, EstimatorOptions, InitPolicy, SparsityPattern,
};
use crate::evaluation::{
    entropy_loss, quadratic_loss, relative_frequency_matrix, select_lambda_with_options,
    sparsity_errors, CvConfig,
};
use crate::linalg::{DataMatrix, SpdMatrix, SymMatrix};
use crate::penalties::PenaltyKind;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic random stream with child-stream support.
///
/// Backed by ChaCha8 keyed through a SplitMix64 hash of the seed, so the same
/// seed yields the same byte stream on every platform. Child streams hash the
/// parent seed with the child index and are independent for practical
/// purposes, which lets replications run in any schedule without sharing
/// state.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream derived from this stream's seed and `index`;
    /// drawing from the parent does not affect children.
    pub fn child(&self, index: u64) -> Self {
        RngStream::new(splitmix64(self.seed ^ splitmix64(index)))
    }

    /// Stable 64-bit value derived from the seed and a tag, handy for seeding
    /// nested deterministic machinery such as fold assignment.
    pub fn derive_seed(&self, tag: u64) -> u64 {
        splitmix64(self.seed ^ splitmix64(tag ^ 0xD1B5_4A32_D192_ED03))
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.gen::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        xs.shuffle(&mut self.rng);
    }
}

/// Precision matrix of a process whose covariance decays exponentially in
/// randomly spaced positions; such a covariance is Markov, so the inverse is
/// tridiagonal up to numerical noise.
pub fn gen_ar1_precision(p: usize, a: f64, rng: &mut RngStream) -> Result<SpdMatrix> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 variables, got {p}"
        )));
    }
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "decay rate must be positive, got {a}"
        )));
    }
    let mut positions = vec![0.0_f64; p];
    for i in 1..p {
        positions[i] = positions[i - 1] + rng.uniform(0.5, 1.0);
    }
    let sigma = SymMatrix::from_fn(p, |i, j| (-a * (positions[i] - positions[j]).abs()).exp());
    Ok(SpdMatrix::try_new(sigma)?.inverse())
}

/// Precision matrix over a k-nearest-neighbor graph of p random points in the
/// unit square. Edge values are drawn uniformly from `[-1, -0.5] U [0.5, 1]`,
/// each diagonal entry is set to twice the absolute row sum, and the matrix
/// is symmetrically rescaled to unit diagonal; diagonal dominance makes it
/// positive definite.
///
/// Draw order (relevant for reproducing a stream): the x and y coordinate per
/// point in point order, then magnitude and sign per edge with edges sorted
/// lexicographically.
pub fn gen_knn_precision(p: usize, k: usize, rng: &mut RngStream) -> Result<SpdMatrix> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 variables, got {p}"
        )));
    }
    if k == 0 || k >= p {
        return Err(Error::InvalidParameter(format!(
            "neighbor count must satisfy 1 <= k < p, got k = {k}"
        )));
    }

    // Resample the whole point set on an exact collision.
    let mut points = Vec::with_capacity(p);
    let mut tries = 0;
    loop {
        points.clear();
        for _ in 0..p {
            let x = rng.uniform(0.0, 1.0);
            let y = rng.uniform(0.0, 1.0);
            points.push((x, y));
        }
        let mut distinct = true;
        'outer: for i in 0..p {
            for j in 0..i {
                if points[i] == points[j] {
                    distinct = false;
                    break 'outer;
                }
            }
        }
        if distinct {
            break;
        }
        tries += 1;
        if tries >= 100 {
            return Err(Error::DegenerateGeometry);
        }
    }

    let dist2 = |i: usize, j: usize| {
        let dx = points[i].0 - points[j].0;
        let dy = points[i].1 - points[j].1;
        dx * dx + dy * dy
    };

    // Union-symmetrized edge set: an edge exists when either endpoint lists
    // the other among its k nearest, ties broken by index.
    let mut edges = std::collections::BTreeSet::new();
    for i in 0..p {
        let mut order: Vec<usize> = (0..p).filter(|&j| j != i).collect();
        order.sort_by(|&x, &y| {
            dist2(i, x)
                .partial_cmp(&dist2(i, y))
                .expect("distances are finite")
                .then(x.cmp(&y))
        });
        for &j in order.iter().take(k) {
            edges.insert((i.min(j), i.max(j)));
        }
    }

    let mut raw = SymMatrix::zeros(p);
    for &(i, j) in &edges {
        let magnitude = rng.uniform(0.5, 1.0);
        let negative = rng.uniform(0.0, 1.0) < 0.5;
        raw.set(i, j, if negative { -magnitude } else { magnitude });
    }
    for i in 0..p {
        let row_sum: f64 = (0..p)
            .filter(|&j| j != i)
            .map(|j| raw.get(i, j).abs())
            .sum();
        raw.set(i, i, 2.0 * row_sum);
    }
    let scaled = SymMatrix::from_fn(p, |i, j| {
        raw.get(i, j) / (raw.get(i, i) * raw.get(j, j)).sqrt()
    });
    SpdMatrix::try_new(scaled)
}

/// Deterministic Toeplitz precision matrix `omega_ij = exp(-2 |i - j|)`; no
/// entry is exactly zero but distant ones are far below any threshold.
pub fn gen_exp_decay_precision(p: usize) -> Result<SpdMatrix> {
    if p == 0 {
        return Err(Error::InvalidParameter("need at least 1 variable".into()));
    }
    SpdMatrix::try_new(SymMatrix::from_fn(p, |i, j| {
        (-2.0 * (i as f64 - j as f64).abs()).exp()
    }))
}

/// Draws `n` i.i.d. rows from the centered Gaussian whose precision matrix is
/// `omega`, via `x = L^{-T} z` with `omega = L L'` and standard normal `z`.
pub fn sample_gaussian(n: usize, omega: &SpdMatrix, rng: &mut RngStream) -> Result<DataMatrix> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let p = omega.dim();
    let mut data = Vec::with_capacity(n * p);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        for zi in &mut z {
            *zi = rng.standard_normal();
        }
        data.extend_from_slice(&omega.cholesky().solve_transposed(&z));
    }
    DataMatrix::new(n, p, data)
}

/// Family of true precision structures for experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrecisionFamily {
    /// Exponentially decaying covariance at random positions; tridiagonal inverse.
    Ar1 { a: f64 },
    /// k-nearest-neighbor graph on random points in the unit square.
    Knn { k: usize },
    /// Toeplitz `exp(-2 |i - j|)`, never exactly sparse.
    ExpDecay,
}

/// Lambda grid specification for cross-validation inside experiments.
///
/// When p exceeds the training size the likelihood degenerates as lambda
/// shrinks and fits near the bottom of a deep grid become very slow; a
/// smaller `ratio` (10..20) is the practical choice there.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// Log-spaced descending grid from the smallest lambda that zeroes every
    /// off-diagonal (the largest absolute off-diagonal of S) down by `ratio`.
    Auto {
        points: usize,
        ratio: f64,
    },
    Explicit(Vec<f64>),
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Auto {
            points: 20,
            ratio: 100.0,
        }
    }
}

impl GridSpec {
    pub fn resolve(&self, s: &SymMatrix) -> Result<Vec<f64>> {
        match self {
            GridSpec::Explicit(grid) => {
                if grid.is_empty() {
                    return Err(Error::EmptyInput);
                }
                Ok(grid.clone())
            }
            GridSpec::Auto { points, ratio } => {
                if *points == 0 {
                    return Err(Error::InvalidParameter(
                        "grid needs at least one point".into(),
                    ));
                }
                if !(*ratio > 1.0) {
                    return Err(Error::InvalidParameter("grid ratio must exceed 1".into()));
                }
                let mut top = s.max_abs_offdiag();
                if top <= 0.0 {
                    top = 1.0;
                }
                if *points == 1 {
                    return Ok(vec![top]);
                }
                let step = (points - 1) as f64;
                Ok((0..*points)
                    .map(|t| top * ratio.powf(-(t as f64) / step))
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub family: PrecisionFamily,
    pub p: usize,
    pub n: usize,
    pub reps: usize,
    pub penalties: Vec<PenaltyKind>,
    pub cv_folds: usize,
    pub grid: GridSpec,
    pub seed: u64,
    /// Sparsity threshold applied to estimates and to the truth when the
    /// truth has no exact zeros.
    pub threshold: f64,
    /// Initial-value policy for the reweighted penalties; explicit matrices
    /// make no sense here because every fold fit sees different data.
    pub init_policy: InitPolicy,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::InvalidParameter("p must be at least 2".into()));
        }
        if self.n < 2 {
            return Err(Error::InvalidParameter("n must be at least 2".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidParameter("reps must be at least 1".into()));
        }
        if self.penalties.is_empty() {
            return Err(Error::EmptyInput);
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidParameter(
                "cross-validation needs at least 2 folds".into(),
            ));
        }
        if !(self.threshold >= 0.0) {
            return Err(Error::InvalidParameter(
                "threshold must be nonnegative".into(),
            ));
        }
        if matches!(self.init_policy, InitPolicy::Explicit(_)) {
            return Err(Error::InvalidParameter(
                "experiments resolve initial values per fit; explicit matrices are not supported"
                    .into(),
            ));
        }
        match self.family {
            PrecisionFamily::Ar1 { a } if !(a > 0.0) => Err(Error::InvalidParameter(
                "decay rate must be positive".into(),
            )),
            PrecisionFamily::Knn { k } if k == 0 || k >= self.p => Err(Error::InvalidParameter(
                "neighbor count must satisfy 1 <= k < p".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Mean and standard error over replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStat {
    pub mean: f64,
    pub se: f64,
}

fn summarize(values: &[f64]) -> SummaryStat {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let se = if values.len() < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    SummaryStat { mean, se }
}

/// Aggregates for one penalty across replications.
#[derive(Debug, Clone)]
pub struct PenaltyReport {
    pub penalty: PenaltyKind,
    pub loss1: SummaryStat,
    pub loss2: SummaryStat,
    pub zero1: SummaryStat,
    pub zero2: SummaryStat,
    pub perc1: SummaryStat,
    pub perc2: SummaryStat,
    /// Nonzero cells of the thresholded estimate, diagonal included.
    pub nonzero: SummaryStat,
    /// Selected regularization level.
    pub lambda: SummaryStat,
    pub freq: SymMatrix,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub p: usize,
    pub n: usize,
    pub reps: usize,
    /// True zero cells (off-diagonal) of the thresholded truth.
    pub true_zeros: usize,
    /// True nonzero cells of the thresholded truth, diagonal included.
    pub true_nonzeros: usize,
    pub rows: Vec<PenaltyReport>,
}

struct RepMetrics {
    loss1: f64,
    loss2: f64,
    zero1: f64,
    zero2: f64,
    perc1: f64,
    perc2: f64,
    nonzero: f64,
    lambda: f64,
    pattern: SparsityPattern,
}

/// Runs the full benchmark: fix one true precision matrix from the family,
/// then per replication sample data, tune each penalty by cross-validation,
/// fit, threshold and score against the truth. Replications use disjoint
/// child streams and are reduced in replication order, so the report does not
/// depend on the parallel schedule.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let root = RngStream::new(cfg.seed);
    let mut truth_rng = root.child(0);
    let truth = match cfg.family {
        PrecisionFamily::Ar1 { a } => gen_ar1_precision(cfg.p, a, &mut truth_rng)?,
        PrecisionFamily::Knn { k } => gen_knn_precision(cfg.p, k, &mut truth_rng)?,
        PrecisionFamily::ExpDecay => gen_exp_decay_precision(cfg.p)?,
    };
    let truth_pattern = threshold_sparsify(truth.sym(), cfg.threshold);

    let per_rep: Result<Vec<Vec<RepMetrics>>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = root.child(rep as u64 + 1);
            let data = sample_gaussian(cfg.n, &truth, &mut rng)?;
            let s = data.sample_covariance();
            let grid = cfg.grid.resolve(&s)?;
            let fold_seed = rng.derive_seed(0xF01D);
            cfg.penalties
                .iter()
                .map(|kind| {
                    let cv = CvConfig::new(cfg.cv_folds, grid.clone(), fold_seed)?;
                    let opts = EstimatorOptions {
                        sparsity_threshold: cfg.threshold,
                        init_policy: cfg.init_policy.clone(),
                        ..EstimatorOptions::default()
                    };
                    let (lambda, _) = select_lambda_with_options(&data, kind, &cv, &opts)?;
                    let est = estimate(&s, cfg.n, &kind.at_lambda(lambda), &opts)?;
                    let errs = sparsity_errors(&truth_pattern, &est.pattern)?;
                    Ok(RepMetrics {
                        loss1: entropy_loss(&truth, &est.omega)?,
                        loss2: quadratic_loss(&truth, &est.omega)?,
                        zero1: errs.zero1 as f64,
                        zero2: errs.zero2 as f64,
                        perc1: errs.perc1,
                        perc2: errs.perc2,
                        nonzero: est.pattern.count_nonzero() as f64,
                        lambda,
                        pattern: est.pattern,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect();
    let per_rep = per_rep?;

    let mut rows = Vec::with_capacity(cfg.penalties.len());
    for (idx, kind) in cfg.penalties.iter().enumerate() {
        let column: Vec<&RepMetrics> = per_rep.iter().map(|rep| &rep[idx]).collect();
        let collect = |f: fn(&RepMetrics) -> f64| column.iter().map(|m| f(m)).collect::<Vec<_>>();
        let patterns: Vec<SparsityPattern> = column.iter().map(|m| m.pattern.clone()).collect();
        rows.push(PenaltyReport {
            penalty: *kind,
            loss1: summarize(&collect(|m| m.loss1)),
            loss2: summarize(&collect(|m| m.loss2)),
            zero1: summarize(&collect(|m| m.zero1)),
            zero2: summarize(&collect(|m| m.zero2)),
            perc1: summarize(&collect(|m| m.perc1)),
            perc2: summarize(&collect(|m| m.perc2)),
            nonzero: summarize(&collect(|m| m.nonzero)),
            lambda: summarize(&collect(|m| m.lambda)),
            freq: relative_frequency_matrix(&patterns)?,
        });
    }

    let true_nonzeros = truth_pattern.count_nonzero();
    let true_zeros = cfg.p * cfg.p - true_nonzeros;
    Ok(ExperimentReport {
        p: cfg.p,
        n: cfg.n,
        reps: cfg.reps,
        true_zeros,
        true_nonzeros,
        rows,
    })
}
