//! Forecasting and classification checked against algebraic identities and
//! independent block computations.

mod common;

use common::{gauss_jordan_inverse, random_spd, sym_to_rows};
use precnet::applications::{
    conditional_forecast, lda_classify, lda_train, standardize_columns, two_sample_t_select,
    variance_stabilize, ForecastModel, LdaModel,
};
use precnet::estimator::{threshold_sparsify, EstimatorOptions};
use precnet::linalg::{DataMatrix, SpdMatrix, SymMatrix};
use precnet::penalties::Penalty;
use precnet::simgen::{sample_gaussian, RngStream};

#[test]
fn forecast_is_exact_under_the_true_model() {
    // With the true mean and precision plugged in, the forecast must equal
    // the analytic conditional mean for every draw, computed independently
    // from the covariance blocks by Gauss-Jordan elimination.
    let (p, q) = (6, 3);
    let omega = SpdMatrix::try_new(random_spd(p, 1100)).unwrap();
    let mean: Vec<f64> = (0..p).map(|i| (i as f64) * 0.3 - 1.0).collect();
    let model = ForecastModel::new(mean.clone(), omega.clone(), q).unwrap();

    let sigma = gauss_jordan_inverse(&sym_to_rows(omega.sym()));
    let sig11: Vec<Vec<f64>> = (0..q).map(|i| sigma[i][..q].to_vec()).collect();
    let sig11_inv = gauss_jordan_inverse(&sig11);

    let mut rng = RngStream::new(1101);
    let draws = sample_gaussian(200, &omega, &mut rng).unwrap();
    for row in draws.rows() {
        let early = &row[..q];
        let pred = conditional_forecast(&model, early).unwrap();
        // mu_2 + S_21 S_11^{-1} (y_1 - mu_1), assembled by hand.
        for t in 0..p - q {
            let mut acc = mean[q + t];
            for a in 0..q {
                for b in 0..q {
                    acc += sigma[q + t][a] * sig11_inv[a][b] * (early[b] - mean[b]);
                }
            }
            assert!(
                (pred[t] - acc).abs() < 1e-8,
                "prediction {} vs analytic {acc}",
                pred[t]
            );
        }
    }
}

#[test]
fn covariance_and_precision_routes_agree() {
    // The production path partitions the covariance; the Schur-complement
    // identity predicts through the precision blocks directly.
    let (p, q) = (6, 2);
    let omega = SpdMatrix::try_new(random_spd(p, 1102)).unwrap();
    let mean = vec![0.5; p];
    let model = ForecastModel::new(mean.clone(), omega.clone(), q).unwrap();

    let omega22: Vec<Vec<f64>> = (q..p)
        .map(|i| (q..p).map(|j| omega.get(i, j)).collect())
        .collect();
    let omega22_inv = gauss_jordan_inverse(&omega22);

    let y1 = [1.7, -0.4];
    let pred = conditional_forecast(&model, &y1).unwrap();
    for t in 0..p - q {
        // mu_2 - W22^{-1} W21 (y1 - mu_1)
        let mut acc = mean[q + t];
        for a in 0..p - q {
            for b in 0..q {
                acc -= omega22_inv[t][a] * omega.get(q + a, b) * (y1[b] - mean[b]);
            }
        }
        assert!(
            (pred[t] - acc).abs() < 1e-8,
            "routes disagree at {t}: {} vs {acc}",
            pred[t]
        );
    }
}

#[test]
fn forecast_reads_only_the_early_block() {
    let omega = SpdMatrix::try_new(random_spd(5, 1103)).unwrap();
    let model = ForecastModel::new(vec![0.0; 5], omega, 2).unwrap();
    let early = [0.3, -1.2];
    let a = conditional_forecast(&model, &early).unwrap();
    let b = conditional_forecast(&model, &early).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 3);
}

#[test]
fn t_selection_is_invariant_to_post_standardization_rescaling() {
    let mut rng = RngStream::new(1104);
    let rows: Vec<Vec<f64>> = (0..30)
        .map(|i| {
            let class_shift = if i < 15 { 0.0 } else { 1.0 };
            (0..8)
                .map(|j| rng.standard_normal() + class_shift * (j as f64 - 3.0) * 0.4)
                .collect()
        })
        .collect();
    let labels: Vec<usize> = (0..30).map(|i| usize::from(i >= 15)).collect();
    let x = DataMatrix::from_rows(&rows).unwrap();
    let (standardized, _) = standardize_columns(&x).unwrap();

    let baseline = two_sample_t_select(&standardized, &labels, 5).unwrap();
    let scales: Vec<f64> = (0..8).map(|j| 0.1 + 3.0 * j as f64).collect();
    let rescaled_rows: Vec<Vec<f64>> = standardized
        .rows()
        .map(|row| row.iter().zip(&scales).map(|(v, s)| v * s).collect())
        .collect();
    let rescaled = DataMatrix::from_rows(&rescaled_rows).unwrap();
    assert_eq!(
        baseline,
        two_sample_t_select(&rescaled, &labels, 5).unwrap()
    );
}

#[test]
fn penalized_lda_precision_is_sparser_than_the_inverse() {
    let mut rng = RngStream::new(1105);
    let p = 10;
    let omega_true = precnet::simgen::gen_ar1_precision(p, 1.0, &mut rng).unwrap();
    let base = sample_gaussian(60, &omega_true, &mut rng).unwrap();
    let mut rows: Vec<Vec<f64>> = base.rows().map(|r| r.to_vec()).collect();
    let labels: Vec<usize> = (0..60).map(|i| usize::from(i % 2 == 1)).collect();
    for (row, &label) in rows.iter_mut().zip(&labels) {
        if label == 1 {
            row[0] += 2.0;
        }
    }
    let x = DataMatrix::from_rows(&rows).unwrap();

    let model = lda_train(
        &x,
        &labels,
        &Penalty::lasso(0.2),
        &EstimatorOptions::default(),
    )
    .unwrap();
    assert!(model.omega.sym().cholesky().is_ok());

    // Pooled covariance and its direct inverse for comparison.
    let mut residuals = rows.clone();
    let mut means = [vec![0.0; p], vec![0.0; p]];
    let mut counts = [0usize; 2];
    for (row, &label) in rows.iter().zip(&labels) {
        counts[label] += 1;
        for (m, v) in means[label].iter_mut().zip(row) {
            *m += v;
        }
    }
    for k in 0..2 {
        for m in &mut means[k] {
            *m /= counts[k] as f64;
        }
    }
    for (row, &label) in residuals.iter_mut().zip(&labels) {
        for (v, m) in row.iter_mut().zip(&means[label]) {
            *v -= m;
        }
    }
    let pooled = DataMatrix::from_rows(&residuals)
        .unwrap()
        .sample_covariance();
    let unpenalized = SpdMatrix::try_new(pooled).unwrap().inverse();

    let zeros = |m: &SymMatrix| {
        let pat = threshold_sparsify(m, 1e-3);
        m.dim() * m.dim() - pat.count_nonzero()
    };
    assert!(
        zeros(model.omega.sym()) > zeros(unpenalized.sym()),
        "penalized: {} zeros, unpenalized: {} zeros",
        zeros(model.omega.sym()),
        zeros(unpenalized.sym())
    );
}

#[test]
fn classification_is_invariant_to_a_common_prior_rescaling() {
    let omega = SpdMatrix::try_new(random_spd(4, 1106)).unwrap();
    let means = [vec![0.4, -0.3, 0.1, 0.9], vec![-0.2, 0.5, -0.6, 0.0]];
    let model = LdaModel {
        means: means.clone(),
        priors: [0.3, 0.7],
        omega: omega.clone(),
    };
    // Multiplying both priors by the same factor shifts both scores by the
    // same constant, so decisions are unchanged.
    let scaled = LdaModel {
        means,
        priors: [0.6, 1.4],
        omega,
    };
    let mut rng = RngStream::new(1107);
    for _ in 0..50 {
        let x: Vec<f64> = (0..4).map(|_| rng.uniform(-2.0, 2.0)).collect();
        assert_eq!(lda_classify(&model, &x).0, lda_classify(&scaled, &x).0);
    }
}

#[test]
fn variance_stabilization_matches_the_elementwise_oracle() {
    let mut rng = RngStream::new(1108);
    let rows: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..5).map(|_| rng.uniform(0.0, 40.0).floor()).collect())
        .collect();
    let counts = DataMatrix::from_rows(&rows).unwrap();
    let out = variance_stabilize(&counts).unwrap();
    for i in 0..4 {
        for j in 0..5 {
            assert_eq!(out.get(i, j), (rows[i][j] + 0.25).sqrt());
        }
    }
}
