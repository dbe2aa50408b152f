//! Downstream uses of an estimated precision matrix: conditional Gaussian
//! forecasting of late coordinates from early ones, and penalized linear
//! discriminant analysis with t-test feature screening.

use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimatorOptions};
use crate::linalg::{DataMatrix, SpdMatrix, SymMatrix};
use crate::penalties::Penalty;
use crate::simgen::RngStream;

/// Gaussian model used for conditional forecasting: the first `split`
/// coordinates are observed, the rest are predicted.
#[derive(Debug, Clone)]
pub struct ForecastModel {
    pub mean: Vec<f64>,
    pub omega: SpdMatrix,
    pub split: usize,
}

impl ForecastModel {
    pub fn new(mean: Vec<f64>, omega: SpdMatrix, split: usize) -> Result<Self> {
        let p = omega.dim();
        if mean.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: mean.len(),
            });
        }
        if split == 0 || split >= p {
            return Err(Error::InvalidParameter(format!(
                "split must satisfy 1 <= split < {p}, got {split}"
            )));
        }
        Ok(ForecastModel { mean, omega, split })
    }
}

/// Elementwise `sqrt(N + 1/4)`, the variance stabilization transform for
/// count data.
pub fn variance_stabilize(counts: &DataMatrix) -> Result<DataMatrix> {
    for i in 0..counts.n() {
        for j in 0..counts.p() {
            if counts.get(i, j) < 0.0 {
                return Err(Error::NegativeCount { row: i, col: j });
            }
        }
    }
    let data = counts
        .rows()
        .flat_map(|row| row.iter().map(|&v| (v + 0.25).sqrt()))
        .collect();
    DataMatrix::new(counts.n(), counts.p(), data)
}

/// Best mean squared error forecast of the late block given the early block:
/// invert the precision matrix, partition the covariance, and apply
/// `mu_2 + S_21 S_11^{-1} (y_1 - mu_1)`.
pub fn conditional_forecast(model: &ForecastModel, early: &[f64]) -> Result<Vec<f64>> {
    let q = model.split;
    let p = model.omega.dim();
    if early.len() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            found: early.len(),
        });
    }
    let sigma = model.omega.inverse();
    let sigma11 = SymMatrix::from_fn(q, |i, j| sigma.get(i, j));
    let chol11 = sigma11.cholesky()?;
    let centered: Vec<f64> = (0..q).map(|i| early[i] - model.mean[i]).collect();
    let weights = chol11.solve(&centered);
    let mut out = Vec::with_capacity(p - q);
    for t in q..p {
        let mut acc = model.mean[t];
        for (j, w) in weights.iter().enumerate() {
            acc += sigma.get(t, j) * w;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Pooled-variance two-sample t statistics per feature, returning the `m`
/// feature indices with the largest absolute statistic (smallest p-values),
/// ties broken toward the lower index.
pub fn two_sample_t_select(x: &DataMatrix, labels: &[usize], m: usize) -> Result<Vec<usize>> {
    let (class0, class1) = split_classes(x.n(), labels)?;
    if class0.len() < 2 || class1.len() < 2 {
        return Err(Error::DegenerateClass(
            "each class needs at least 2 samples for a t-test".into(),
        ));
    }
    if m > x.p() {
        return Err(Error::InvalidParameter(format!(
            "cannot select {m} of {} features",
            x.p()
        )));
    }
    let (n0, n1) = (class0.len() as f64, class1.len() as f64);
    let df = n0 + n1 - 2.0;
    let scale = (1.0 / n0 + 1.0 / n1).sqrt();

    let mut scored: Vec<(f64, usize)> = (0..x.p())
        .map(|j| {
            let mean =
                |rows: &[usize]| rows.iter().map(|&i| x.get(i, j)).sum::<f64>() / rows.len() as f64;
            let (m0, m1) = (mean(&class0), mean(&class1));
            let ss = |rows: &[usize], mu: f64| {
                rows.iter()
                    .map(|&i| (x.get(i, j) - mu) * (x.get(i, j) - mu))
                    .sum::<f64>()
            };
            let pooled_var = (ss(&class0, m0) + ss(&class1, m1)) / df;
            let diff = m0 - m1;
            let score = if pooled_var == 0.0 {
                if diff == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (diff / (pooled_var.sqrt() * scale)).abs()
            };
            (score, j)
        })
        .collect();
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("scores are ordered")
            .then(a.1.cmp(&b.1))
    });
    Ok(scored.into_iter().take(m).map(|(_, j)| j).collect())
}

/// Linear discriminant model with a penalized precision estimate standing in
/// for the inverse pooled covariance.
#[derive(Debug, Clone)]
pub struct LdaModel {
    pub means: [Vec<f64>; 2],
    pub priors: [f64; 2],
    pub omega: SpdMatrix,
}

/// Fits class means, priors, and the penalized precision of the pooled
/// within-class covariance (each class centered at its own mean, residuals
/// stacked, 1/n normalization).
pub fn lda_train(
    x: &DataMatrix,
    labels: &[usize],
    penalty: &Penalty,
    opts: &EstimatorOptions,
) -> Result<LdaModel> {
    let (class0, class1) = split_classes(x.n(), labels)?;
    let p = x.p();
    let n = x.n() as f64;

    let class_mean = |rows: &[usize]| -> Vec<f64> {
        let mut mu = vec![0.0; p];
        for &i in rows {
            for (m, v) in mu.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        for m in &mut mu {
            *m /= rows.len() as f64;
        }
        mu
    };
    let mu0 = class_mean(&class0);
    let mu1 = class_mean(&class1);

    let mut residuals = Vec::with_capacity(x.n() * p);
    for (i, &label) in labels.iter().enumerate() {
        let mu = if label == 0 { &mu0 } else { &mu1 };
        for (v, m) in x.row(i).iter().zip(mu) {
            residuals.push(v - m);
        }
    }
    let pooled = DataMatrix::new(x.n(), p, residuals)?.sample_covariance();
    let est = estimate(&pooled, x.n(), penalty, opts)?;

    Ok(LdaModel {
        means: [mu0, mu1],
        priors: [class0.len() as f64 / n, class1.len() as f64 / n],
        omega: est.omega,
    })
}

/// Discriminant scores `x' W mu_k - mu_k' W mu_k / 2 + log pi_k` and the
/// arg-max class; ties go to class 0.
pub fn lda_classify(model: &LdaModel, x: &[f64]) -> (usize, [f64; 2]) {
    let score = |k: usize| {
        let omega_mu = model.omega.mul_vec(&model.means[k]);
        let xt: f64 = x.iter().zip(&omega_mu).map(|(a, b)| a * b).sum();
        let mt: f64 = model.means[k]
            .iter()
            .zip(&omega_mu)
            .map(|(a, b)| a * b)
            .sum();
        xt - 0.5 * mt + model.priors[k].ln()
    };
    let scores = [score(0), score(1)];
    let class = if scores[0] >= scores[1] { 0 } else { 1 };
    (class, scores)
}

/// Column standard deviations of a training set (1/(n-1) normalization) and
/// the data divided by them. The same divisors are meant to be applied to any
/// test data.
pub fn standardize_columns(x: &DataMatrix) -> Result<(DataMatrix, Vec<f64>)> {
    if x.n() < 2 {
        return Err(Error::InvalidParameter(
            "standardization needs at least 2 rows".into(),
        ));
    }
    let means = x.column_means();
    let mut sds = vec![0.0; x.p()];
    for row in x.rows() {
        for (j, v) in row.iter().enumerate() {
            sds[j] += (v - means[j]) * (v - means[j]);
        }
    }
    for (j, sd) in sds.iter_mut().enumerate() {
        *sd = (*sd / (x.n() as f64 - 1.0)).sqrt();
        if *sd == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "column {j} is constant and cannot be standardized"
            )));
        }
    }
    let scaled = apply_standardization(x, &sds)?;
    Ok((scaled, sds))
}

/// Divides every column by the given divisor (training standard deviations).
pub fn apply_standardization(x: &DataMatrix, divisors: &[f64]) -> Result<DataMatrix> {
    if divisors.len() != x.p() {
        return Err(Error::DimensionMismatch {
            expected: x.p(),
            found: divisors.len(),
        });
    }
    let data = x
        .rows()
        .flat_map(|row| row.iter().zip(divisors).map(|(v, d)| v / d))
        .collect();
    DataMatrix::new(x.n(), x.p(), data)
}

/// Seeded stratified train/test split: draws the requested number of test
/// samples from each class, returning sorted (train, test) row indices.
pub fn stratified_split(
    labels: &[usize],
    test_per_class: [usize; 2],
    rng: &mut RngStream,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let (class0, class1) = split_classes(labels.len(), labels)?;
    let classes = [class0, class1];
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (rows, &take) in classes.iter().zip(&test_per_class) {
        if take >= rows.len() {
            return Err(Error::DegenerateClass(format!(
                "cannot hold out {take} of {} samples",
                rows.len()
            )));
        }
        let mut shuffled = rows.clone();
        rng.shuffle(&mut shuffled);
        test.extend_from_slice(&shuffled[..take]);
        train.extend_from_slice(&shuffled[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Splits row indices by binary label, validating the labeling.
fn split_classes(n: usize, labels: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    let mut class0 = Vec::new();
    let mut class1 = Vec::new();
    for (i, &label) in labels.iter().enumerate() {
        match label {
            0 => class0.push(i),
            1 => class1.push(i),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "labels must be 0 or 1, got {other} at row {i}"
                )))
            }
        }
    }
    if class0.is_empty() || class1.is_empty() {
        return Err(Error::DegenerateClass(
            "both classes must be present".into(),
        ));
    }
    Ok((class0, class1))
}
