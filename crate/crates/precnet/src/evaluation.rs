//! Tuning and scoring: K-fold cross-validation over a lambda grid, entropy
//! and quadratic losses between precision matrices, sparsity error counts,
//! relative-frequency matrices over replications, confusion-matrix metrics
//! and the average absolute forecast error.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimatorOptions, SparsityPattern};
use crate::linalg::{trace_product, DataMatrix, SpdMatrix, SymMatrix};
use crate::penalties::PenaltyKind;
use crate::simgen::RngStream;

/// Cross-validation settings.
#[derive(Debug, Clone)]
pub struct CvConfig {
    pub folds: usize,
    /// Candidate lambda values; ties in the score resolve to the largest.
    pub grid: Vec<f64>,
    /// Seed for the fold assignment shuffle.
    pub seed: u64,
}

impl CvConfig {
    pub fn new(folds: usize, grid: Vec<f64>, seed: u64) -> Result<Self> {
        if folds < 2 {
            return Err(Error::InvalidParameter(format!(
                "cross-validation needs at least 2 folds, got {folds}"
            )));
        }
        if grid.is_empty() {
            return Err(Error::EmptyInput);
        }
        for &l in &grid {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "lambda grid entries must be finite and nonnegative, got {l}"
                )));
            }
        }
        Ok(CvConfig { folds, grid, seed })
    }
}

/// Seeded shuffle of `0..n` into `folds` near-equal blocks; the first
/// `n % folds` folds get one extra sample. Returns the fold id per sample.
pub fn assign_folds(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!(
            "cross-validation needs at least 2 folds, got {folds}"
        )));
    }
    if n < folds {
        return Err(Error::DegenerateFold);
    }
    let mut order: Vec<usize> = (0..n).collect();
    RngStream::new(seed).shuffle(&mut order);
    let base = n / folds;
    let extra = n % folds;
    let mut fold_of = vec![0; n];
    let mut pos = 0;
    for fold in 0..folds {
        let size = base + usize::from(fold < extra);
        for &i in &order[pos..pos + size] {
            fold_of[i] = fold;
        }
        pos += size;
    }
    Ok(fold_of)
}

/// Predictive log-likelihood score summed over folds: each held-out block
/// contributes `n_k log det(Omega_fit) - sum_i x_i' Omega_fit x_i`, where the
/// fit uses only the complement of the block. Larger is better.
pub fn cv_score(
    x: &DataMatrix,
    lambda: f64,
    kind: &PenaltyKind,
    folds: usize,
    seed: u64,
) -> Result<f64> {
    cv_score_with_options(x, lambda, kind, folds, seed, &EstimatorOptions::default())
}

/// [`cv_score`] with explicit estimator options, e.g. a different initial
/// value policy for the reweighted penalties.
pub fn cv_score_with_options(
    x: &DataMatrix,
    lambda: f64,
    kind: &PenaltyKind,
    folds: usize,
    seed: u64,
    opts: &EstimatorOptions,
) -> Result<f64> {
    let fold_of = assign_folds(x.n(), folds, seed)?;
    let terms: Result<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|fold| {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (i, &f) in fold_of.iter().enumerate() {
                if f == fold {
                    test.push(i);
                } else {
                    train.push(i);
                }
            }
            if test.is_empty() || train.is_empty() {
                return Err(Error::DegenerateFold);
            }
            let train_data = x.select_rows(&train);
            let s = train_data.sample_covariance();
            let est = estimate(&s, train.len(), &kind.at_lambda(lambda), opts)?;
            let log_det = est.omega.log_det();
            let mut quad = 0.0;
            for &i in &test {
                quad += est.omega.quadratic_form(x.row(i));
            }
            Ok(test.len() as f64 * log_det - quad)
        })
        .collect();
    Ok(terms?.into_iter().sum())
}

/// Grid search for the lambda maximizing [`cv_score`]. Returns the winner and
/// the full `(lambda, score)` table in grid order; score ties break toward
/// the larger lambda.
pub fn select_lambda(
    x: &DataMatrix,
    kind: &PenaltyKind,
    cfg: &CvConfig,
) -> Result<(f64, Vec<(f64, f64)>)> {
    select_lambda_with_options(x, kind, cfg, &EstimatorOptions::default())
}

/// [`select_lambda`] with explicit estimator options.
pub fn select_lambda_with_options(
    x: &DataMatrix,
    kind: &PenaltyKind,
    cfg: &CvConfig,
    opts: &EstimatorOptions,
) -> Result<(f64, Vec<(f64, f64)>)> {
    if cfg.grid.is_empty() {
        return Err(Error::EmptyInput);
    }
    let scores: Result<Vec<f64>> = cfg
        .grid
        .par_iter()
        .map(|&lambda| cv_score_with_options(x, lambda, kind, cfg.folds, cfg.seed, opts))
        .collect();
    let scores = scores?;
    let table: Vec<(f64, f64)> = cfg.grid.iter().copied().zip(scores).collect();
    let mut best = table[0];
    for &(lambda, score) in &table[1..] {
        if score > best.1 || (score == best.1 && lambda > best.0) {
            best = (lambda, score);
        }
    }
    Ok((best.0, table))
}

/// Entropy (Kullback-Leibler type) loss
/// `tr(T^{-1} E) - log det(T^{-1} E) - p`; zero exactly when the estimate
/// matches the reference.
pub fn entropy_loss(truth: &SpdMatrix, est: &SpdMatrix) -> Result<f64> {
    let p = truth.dim();
    if est.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: est.dim(),
        });
    }
    let sigma = truth.inverse();
    let tr = trace_product(sigma.sym(), est.sym())?;
    Ok(tr - (est.log_det() - truth.log_det()) - p as f64)
}

/// Quadratic loss `tr((T^{-1} E - I)^2)`.
pub fn quadratic_loss(truth: &SpdMatrix, est: &SpdMatrix) -> Result<f64> {
    let p = truth.dim();
    if est.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: est.dim(),
        });
    }
    let sigma = truth.inverse();
    // Dense D = T^{-1} E - I, then tr(D^2) = sum_ij D_ij D_ji.
    let mut d = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            let mut acc = 0.0;
            for k in 0..p {
                acc += sigma.get(i, k) * est.get(k, j);
            }
            d[i * p + j] = acc - if i == j { 1.0 } else { 0.0 };
        }
    }
    let mut loss = 0.0;
    for i in 0..p {
        for j in 0..p {
            loss += d[i * p + j] * d[j * p + i];
        }
    }
    Ok(loss)
}

/// Errors of a recovered sparsity pattern against the true one, counted over
/// ordered off-diagonal cells.
///
/// `zero1` counts true zeros estimated nonzero and is normalized by the
/// number of true zeros; `zero2` counts true nonzeros estimated zero and is
/// normalized by the number of true nonzeros including the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityErrors {
    pub zero1: usize,
    pub zero2: usize,
    /// True zero cells (all off-diagonal).
    pub n1: usize,
    /// True nonzero cells, diagonal included.
    pub n2: usize,
    pub perc1: f64,
    pub perc2: f64,
}

pub fn sparsity_errors(truth: &SparsityPattern, est: &SparsityPattern) -> Result<SparsityErrors> {
    let p = truth.dim();
    if est.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: est.dim(),
        });
    }
    let mut zero1 = 0;
    let mut zero2 = 0;
    let mut n1 = 0;
    let mut n2 = p; // diagonal cells are nonzero on both sides
    for i in 0..p {
        for j in 0..i {
            let (t, e) = (truth.get(i, j), est.get(i, j));
            if t {
                n2 += 2;
                if !e {
                    zero2 += 2;
                }
            } else {
                n1 += 2;
                if e {
                    zero1 += 2;
                }
            }
        }
    }
    let perc1 = if n1 == 0 {
        0.0
    } else {
        100.0 * zero1 as f64 / n1 as f64
    };
    let perc2 = 100.0 * zero2 as f64 / n2 as f64;
    Ok(SparsityErrors {
        zero1,
        zero2,
        n1,
        n2,
        perc1,
        perc2,
    })
}

/// Entrywise fraction of patterns where the cell is nonzero.
pub fn relative_frequency_matrix(patterns: &[SparsityPattern]) -> Result<SymMatrix> {
    let first = patterns.first().ok_or(Error::EmptyInput)?;
    let p = first.dim();
    for pat in patterns {
        if pat.dim() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: pat.dim(),
            });
        }
    }
    let count = patterns.len() as f64;
    Ok(SymMatrix::from_fn(p, |i, j| {
        patterns.iter().filter(|pat| pat.get(i, j)).count() as f64 / count
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_pos: usize,
    pub true_neg: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

impl ConfusionCounts {
    /// Tallies predictions against actual labels; `true` is the positive class.
    pub fn from_labels(predicted: &[bool], actual: &[bool]) -> Result<Self> {
        if predicted.len() != actual.len() {
            return Err(Error::DimensionMismatch {
                expected: actual.len(),
                found: predicted.len(),
            });
        }
        let mut c = ConfusionCounts {
            true_pos: 0,
            true_neg: 0,
            false_pos: 0,
            false_neg: 0,
        };
        for (&pred, &act) in predicted.iter().zip(actual) {
            match (pred, act) {
                (true, true) => c.true_pos += 1,
                (false, false) => c.true_neg += 1,
                (true, false) => c.false_pos += 1,
                (false, true) => c.false_neg += 1,
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationMetrics {
    pub specificity: f64,
    pub sensitivity: f64,
    pub mcc: f64,
}

/// Specificity `TN/(TN+FP)`, sensitivity `TP/(TP+FN)` and the Matthews
/// correlation coefficient. MCC is 0 by convention when any factor of its
/// denominator vanishes; empty specificity/sensitivity denominators also
/// yield 0.
pub fn classification_metrics(c: &ConfusionCounts) -> ClassificationMetrics {
    let (tp, tn, fp, fne) = (
        c.true_pos as f64,
        c.true_neg as f64,
        c.false_pos as f64,
        c.false_neg as f64,
    );
    let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
    let specificity = ratio(tn, tn + fp);
    let sensitivity = ratio(tp, tp + fne);
    let denom = (tp + fp) * (tp + fne) * (tn + fp) * (tn + fne);
    let mcc = if denom == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fne) / denom.sqrt()
    };
    ClassificationMetrics {
        specificity,
        sensitivity,
        mcc,
    }
}

/// Per-coordinate mean absolute deviation between predicted and actual rows.
pub fn aafe(predicted: &[Vec<f64>], actual: &[Vec<f64>]) -> Result<Vec<f64>> {
    if predicted.is_empty() {
        return Err(Error::EmptyInput);
    }
    if predicted.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            found: predicted.len(),
        });
    }
    let width = predicted[0].len();
    for row in predicted.iter().chain(actual) {
        if row.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                found: row.len(),
            });
        }
    }
    let mut out = vec![0.0; width];
    for (pred, act) in predicted.iter().zip(actual) {
        for t in 0..width {
            out[t] += (pred[t] - act[t]).abs();
        }
    }
    let days = predicted.len() as f64;
    for v in &mut out {
        *v /= days;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::threshold_sparsify;

    #[test]
    fn entropy_loss_is_zero_at_the_truth() {
        let m =
            SpdMatrix::try_new(SymMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.5]]).unwrap())
                .unwrap();
        assert!(entropy_loss(&m, &m).unwrap().abs() < 1e-12);
    }

    #[test]
    fn entropy_loss_of_doubled_identity() {
        let truth = SpdMatrix::identity(2);
        let est = SpdMatrix::try_new(SymMatrix::from_diagonal(&[2.0, 2.0])).unwrap();
        let expect = 2.0 * (1.0 - 2.0_f64.ln());
        assert!((entropy_loss(&truth, &est).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn entropy_loss_scalar_case() {
        let truth = SpdMatrix::try_new(SymMatrix::from_diagonal(&[2.0])).unwrap();
        let est = SpdMatrix::try_new(SymMatrix::from_diagonal(&[1.0])).unwrap();
        let expect = 0.5 - 0.5_f64.ln() - 1.0;
        assert!((entropy_loss(&truth, &est).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn quadratic_loss_is_zero_at_the_truth() {
        let m =
            SpdMatrix::try_new(SymMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.5]]).unwrap())
                .unwrap();
        assert!(quadratic_loss(&m, &m).unwrap().abs() < 1e-12);
    }

    #[test]
    fn quadratic_loss_of_doubled_identity_is_p() {
        let truth = SpdMatrix::identity(2);
        let est = SpdMatrix::try_new(SymMatrix::from_diagonal(&[2.0, 2.0])).unwrap();
        assert!((quadratic_loss(&truth, &est).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sparsity_errors_of_identical_patterns_vanish() {
        let m = SymMatrix::from_rows(&[
            vec![1.0, 0.5, 0.0],
            vec![0.5, 1.0, 0.2],
            vec![0.0, 0.2, 1.0],
        ])
        .unwrap();
        let pat = threshold_sparsify(&m, 1e-3);
        let errs = sparsity_errors(&pat, &pat).unwrap();
        assert_eq!((errs.zero1, errs.zero2), (0, 0));
        assert_eq!((errs.perc1, errs.perc2), (0.0, 0.0));
    }

    #[test]
    fn sparsity_errors_hand_count() {
        // Truth: zeros at (0,2)/(2,0); nonzeros elsewhere off the diagonal.
        let truth = SparsityPattern::from_fn(3, |i, j| !matches!((i, j), (2, 0) | (0, 2)));
        // Estimate: nonzero at (0,2), zero at (0,1).
        let est = SparsityPattern::from_fn(3, |i, j| !matches!((i, j), (1, 0) | (0, 1)));
        let errs = sparsity_errors(&truth, &est).unwrap();
        assert_eq!(errs.zero1, 2);
        assert_eq!(errs.zero2, 2);
        assert_eq!(errs.n1, 2);
        assert_eq!(errs.n2, 4 + 3);
    }

    #[test]
    fn frequency_matrix_of_identical_patterns_is_indicator() {
        let pat = SparsityPattern::from_fn(3, |i, j| i + j != 2);
        let freq = relative_frequency_matrix(&[pat.clone(), pat.clone()]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if pat.get(i, j) { 1.0 } else { 0.0 };
                assert_eq!(freq.get(i, j), expect);
            }
        }
    }

    #[test]
    fn frequency_matrix_averages_disagreements() {
        let a = SparsityPattern::from_fn(6, |_, _| true);
        let b = SparsityPattern::from_fn(6, |i, j| !matches!((i, j), (5, 2) | (2, 5)));
        let freq = relative_frequency_matrix(&[a, b]).unwrap();
        assert_eq!(freq.get(2, 5), 0.5);
        assert_eq!(freq.get(1, 2), 1.0);
        for i in 0..6 {
            assert_eq!(freq.get(i, i), 1.0);
        }
    }

    #[test]
    fn frequency_matrix_rejects_empty_input() {
        assert!(matches!(
            relative_frequency_matrix(&[]),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn perfect_classifier_metrics() {
        let c = ConfusionCounts {
            true_pos: 7,
            true_neg: 11,
            false_pos: 0,
            false_neg: 0,
        };
        let m = classification_metrics(&c);
        assert_eq!((m.specificity, m.sensitivity, m.mcc), (1.0, 1.0, 1.0));
    }

    #[test]
    fn classification_metrics_hand_values() {
        let c = ConfusionCounts {
            true_pos: 3,
            true_neg: 16,
            false_pos: 0,
            false_neg: 2,
        };
        let m = classification_metrics(&c);
        assert!((m.sensitivity - 0.6).abs() < 1e-15);
        assert!((m.specificity - 1.0).abs() < 1e-15);
        let expect = 48.0 / (3.0_f64 * 5.0 * 16.0 * 18.0).sqrt();
        assert!((m.mcc - expect).abs() < 1e-12);
        assert!((m.mcc - 0.7303).abs() < 1e-4);
    }

    #[test]
    fn degenerate_single_class_mcc_is_zero() {
        let c = ConfusionCounts {
            true_pos: 5,
            true_neg: 0,
            false_pos: 0,
            false_neg: 0,
        };
        assert_eq!(classification_metrics(&c).mcc, 0.0);
    }

    #[test]
    fn aafe_of_exact_predictions_is_zero() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let out = aafe(&rows, &rows).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn aafe_hand_mean_and_day_order_invariance() {
        let pred = vec![vec![1.0], vec![5.0]];
        let act = vec![vec![0.0], vec![2.0]];
        let out = aafe(&pred, &act).unwrap();
        assert_eq!(out, vec![2.0]);
        let swapped = aafe(
            &[pred[1].clone(), pred[0].clone()],
            &[act[1].clone(), act[0].clone()],
        )
        .unwrap();
        assert_eq!(out, swapped);
    }

    #[test]
    fn fold_assignment_is_balanced_and_deterministic() {
        let folds = assign_folds(10, 3, 42).unwrap();
        let counts = (0..3)
            .map(|f| folds.iter().filter(|&&x| x == f).count())
            .collect::<Vec<_>>();
        assert_eq!(counts, vec![4, 3, 3]);
        assert_eq!(folds, assign_folds(10, 3, 42).unwrap());
        assert_ne!(folds, assign_folds(10, 3, 43).unwrap());
    }

    #[test]
    fn too_few_samples_for_folds_is_degenerate() {
        assert!(matches!(assign_folds(2, 3, 1), Err(Error::DegenerateFold)));
    }
}
