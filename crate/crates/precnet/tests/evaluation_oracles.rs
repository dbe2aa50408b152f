//! Scoring and tuning checked against hand-written loops: the
//! cross-validation score formula, grid-search selection, the quadratic
//! loss, and fuzzed bounds on the Matthews coefficient.

mod common;

use common::{ar1_sample_cov, gauss_jordan_inverse, jacobi_eigenvalues, random_spd, sym_to_rows};
use precnet::estimator::{estimate, EstimatorOptions};
use precnet::evaluation::{
    assign_folds, classification_metrics, cv_score, entropy_loss, quadratic_loss, select_lambda,
    ConfusionCounts, CvConfig,
};
use precnet::linalg::{DataMatrix, SpdMatrix};
use precnet::penalties::PenaltyKind;
use precnet::simgen::{gen_ar1_precision, sample_gaussian, RngStream};
use proptest::prelude::*;

/// The displayed score assembled term by term: per fold, fit on the
/// complement, then add `n_k log det - sum of quadratic forms` with the log
/// determinant recomputed through the eigenvalue oracle.
fn cv_score_loop_oracle(
    x: &DataMatrix,
    lambda: f64,
    kind: &PenaltyKind,
    folds: usize,
    seed: u64,
) -> Vec<f64> {
    let fold_of = assign_folds(x.n(), folds, seed).unwrap();
    let mut terms = Vec::new();
    for fold in 0..folds {
        let train: Vec<usize> = (0..x.n()).filter(|i| fold_of[*i] != fold).collect();
        let test: Vec<usize> = (0..x.n()).filter(|i| fold_of[*i] == fold).collect();
        let s = x.select_rows(&train).sample_covariance();
        let est = estimate(
            &s,
            train.len(),
            &kind.at_lambda(lambda),
            &EstimatorOptions::default(),
        )
        .unwrap();
        let log_det: f64 = jacobi_eigenvalues(sym_to_rows(est.omega.sym()))
            .iter()
            .map(|&l| l.ln())
            .sum();
        let mut term = test.len() as f64 * log_det;
        for &i in &test {
            let row = x.row(i);
            let mut quad = 0.0;
            for a in 0..x.p() {
                for b in 0..x.p() {
                    quad += row[a] * est.omega.get(a, b) * row[b];
                }
            }
            term -= quad;
        }
        terms.push(term);
    }
    terms
}

#[test]
fn cv_score_matches_loop_oracle() {
    let mut rng = RngStream::new(900);
    let truth = gen_ar1_precision(2, 1.0, &mut rng).unwrap();
    let x = sample_gaussian(12, &truth, &mut rng).unwrap();
    let score = cv_score(&x, 0.1, &PenaltyKind::Lasso, 3, 42).unwrap();
    let terms = cv_score_loop_oracle(&x, 0.1, &PenaltyKind::Lasso, 3, 42);
    let oracle: f64 = terms.iter().sum();
    assert!(
        (score - oracle).abs() < 1e-8,
        "library {score} vs oracle {oracle}"
    );
    // The sum decomposes over folds: any order of summation agrees.
    let reversed: f64 = terms.iter().rev().sum();
    assert!((oracle - reversed).abs() < 1e-10);
}

#[test]
fn equal_lambdas_give_equal_scores_and_dedup_invariant_argmax() {
    let mut rng = RngStream::new(901);
    let truth = gen_ar1_precision(4, 1.0, &mut rng).unwrap();
    let x = sample_gaussian(24, &truth, &mut rng).unwrap();

    let a = cv_score(&x, 0.2, &PenaltyKind::Lasso, 3, 7).unwrap();
    let b = cv_score(&x, 0.2, &PenaltyKind::Lasso, 3, 7).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());

    let dup = CvConfig::new(3, vec![0.05, 0.2, 0.2, 0.5, 0.05], 7).unwrap();
    let dedup = CvConfig::new(3, vec![0.05, 0.2, 0.5], 7).unwrap();
    let (l_dup, _) = select_lambda(&x, &PenaltyKind::Lasso, &dup).unwrap();
    let (l_dedup, _) = select_lambda(&x, &PenaltyKind::Lasso, &dedup).unwrap();
    assert_eq!(l_dup, l_dedup);
}

#[test]
fn grid_search_returns_the_argmax_of_independent_scores() {
    let mut rng = RngStream::new(902);
    let truth = gen_ar1_precision(30, 1.0, &mut rng).unwrap();
    let x = sample_gaussian(120, &truth, &mut rng).unwrap();
    let grid = vec![0.01, 0.1, 1.0];
    let cfg = CvConfig::new(6, grid.clone(), 17).unwrap();
    let (best, table) = select_lambda(&x, &PenaltyKind::Lasso, &cfg).unwrap();

    let mut expect = (f64::NEG_INFINITY, 0.0);
    for &lambda in &grid {
        let score = cv_score(&x, lambda, &PenaltyKind::Lasso, 6, 17).unwrap();
        if score > expect.0 || (score == expect.0 && lambda > expect.1) {
            expect = (score, lambda);
        }
    }
    assert_eq!(best, expect.1);
    assert_eq!(table.len(), 3);
}

#[test]
fn single_point_grid_returns_that_point() {
    let mut rng = RngStream::new(903);
    let truth = gen_ar1_precision(3, 1.0, &mut rng).unwrap();
    let x = sample_gaussian(15, &truth, &mut rng).unwrap();
    let cfg = CvConfig::new(3, vec![0.33], 1).unwrap();
    let (best, _) = select_lambda(&x, &PenaltyKind::Scad { a: 3.7 }, &cfg).unwrap();
    assert_eq!(best, 0.33);
}

#[test]
fn quadratic_loss_matches_matrix_algebra_oracle() {
    let truth = SpdMatrix::try_new(random_spd(3, 904)).unwrap();
    let est = SpdMatrix::try_new(random_spd(3, 905)).unwrap();
    let loss = quadratic_loss(&truth, &est).unwrap();

    let inv = gauss_jordan_inverse(&sym_to_rows(truth.sym()));
    let p = 3;
    let mut d = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            let mut acc = 0.0;
            for k in 0..p {
                acc += inv[i][k] * est.get(k, j);
            }
            d[i][j] = acc - if i == j { 1.0 } else { 0.0 };
        }
    }
    let mut oracle = 0.0;
    for i in 0..p {
        for j in 0..p {
            oracle += d[i][j] * d[j][i];
        }
    }
    assert!(
        (loss - oracle).abs() < 1e-10,
        "library {loss} vs oracle {oracle}"
    );
}

#[test]
fn losses_vanish_exactly_at_the_truth_and_detect_perturbations() {
    for seed in [906u64, 907] {
        let truth = SpdMatrix::try_new(random_spd(5, seed)).unwrap();
        assert!(entropy_loss(&truth, &truth).unwrap().abs() < 1e-12);
        assert!(quadratic_loss(&truth, &truth).unwrap().abs() < 1e-12);

        let mut bumped = truth.sym().clone();
        bumped.set(0, 1, bumped.get(0, 1) + 0.05);
        let bumped = SpdMatrix::try_new(bumped).unwrap();
        assert!(entropy_loss(&truth, &bumped).unwrap() > 1e-6);
        assert!(quadratic_loss(&truth, &bumped).unwrap() > 1e-6);
    }
}

#[test]
fn fold_seed_changes_partition_but_keeps_sizes() {
    let a = assign_folds(20, 6, 1).unwrap();
    let b = assign_folds(20, 6, 2).unwrap();
    assert_ne!(a, b);
    for fold in 0..6 {
        let size = a.iter().filter(|&&f| f == fold).count();
        assert!(size == 3 || size == 4);
    }
}

proptest! {
    #[test]
    fn mcc_stays_in_unit_interval(
        tp in 0usize..500,
        tn in 0usize..500,
        fp in 0usize..500,
        fne in 0usize..500,
    ) {
        let m = classification_metrics(&ConfusionCounts {
            true_pos: tp,
            true_neg: tn,
            false_pos: fp,
            false_neg: fne,
        });
        prop_assert!((-1.0..=1.0).contains(&m.mcc));
        prop_assert!((0.0..=1.0).contains(&m.specificity));
        prop_assert!((0.0..=1.0).contains(&m.sensitivity));
    }
}

#[test]
fn example_instance_kkt_is_certified_through_the_estimator() {
    // End-to-end: estimator output on a tridiagonal-truth instance satisfies
    // the stationarity conditions of its weighted subproblem.
    let s = ar1_sample_cov(30, 120, 908);
    let est = estimate(
        &s,
        120,
        &precnet::penalties::Penalty::lasso(0.1),
        &EstimatorOptions::default(),
    )
    .unwrap();
    let lam = precnet::glasso::WeightMatrix::constant(30, 0.1).unwrap();
    let sol = precnet::glasso::solve_weighted_glasso(
        &s,
        &lam,
        &precnet::glasso::SolverOptions::default(),
    )
    .unwrap();
    assert!(est.omega.sym().max_abs_diff(sol.omega.sym()) < 1e-12);
}
