//! The four subcommands: estimate, simulate, forecast, classify.

use std::path::Path;

use serde_json::json;

use precnet::applications::{
    apply_standardization, conditional_forecast, lda_classify, lda_train, standardize_columns,
    two_sample_t_select, ForecastModel,
};
use precnet::estimator::{estimate, EstimatorOptions, InitPolicy, PrecisionEstimate};
use precnet::evaluation::{
    aafe, classification_metrics, select_lambda_with_options, ConfusionCounts, CvConfig,
};
use precnet::linalg::{DataMatrix, SpdMatrix, SymMatrix};
use precnet::penalties::PenaltyKind;
use precnet::simgen::{ExperimentReport, GridSpec};

use crate::fmt::{
    column_names, csv_from_pattern, csv_from_rows, csv_from_sym, dot_graph, fmt_f64, out_path,
    read_csv, write_text, CsvTable,
};
use crate::{
    lib_err, ClassifyArgs, CliError, EstimateArgs, ForecastArgs, InitArg, PenaltyArg, SimulateArgs,
};

fn data_matrix(table: &CsvTable, path: &Path) -> Result<DataMatrix, CliError> {
    DataMatrix::from_rows(&table.rows).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: 1,
        col: 1,
        msg: e.to_string(),
    })
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn parse_grid_arg(grid: &Option<String>) -> Result<Option<Vec<f64>>, CliError> {
    let Some(text) = grid else { return Ok(None) };
    let mut values = Vec::new();
    for item in text.split(',').map(str::trim) {
        let v: f64 = item
            .parse()
            .map_err(|_| CliError::Usage(format!("--grid: not a number: {item:?}")))?;
        if !(v >= 0.0) || !v.is_finite() {
            return Err(CliError::Usage(format!(
                "--grid values must be finite and nonnegative, got {v}"
            )));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::Usage("--grid list is empty".into()));
    }
    Ok(Some(values))
}

struct LambdaChoice {
    lambda: f64,
    cv_table: Option<Vec<(f64, f64)>>,
}

fn estimator_options(threshold: f64, penalize_diagonal: bool, init: InitArg) -> EstimatorOptions {
    let mut opts = EstimatorOptions {
        sparsity_threshold: threshold,
        init_policy: match init {
            InitArg::Auto => InitPolicy::Auto,
            InitArg::Lasso => InitPolicy::LassoEstimate,
        },
        ..EstimatorOptions::default()
    };
    opts.solver.penalize_diagonal = penalize_diagonal;
    opts
}

/// Fixed `--lambda`, or cross-validation on `data` over the grid.
fn choose_lambda(
    lambda: Option<f64>,
    cv: Option<usize>,
    grid: &Option<String>,
    kind: &PenaltyKind,
    data: &DataMatrix,
    seed: u64,
    opts: &EstimatorOptions,
) -> Result<LambdaChoice, CliError> {
    match (lambda, cv) {
        (Some(l), None) => {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(CliError::Usage(format!(
                    "--lambda must be finite and nonnegative, got {l}"
                )));
            }
            Ok(LambdaChoice {
                lambda: l,
                cv_table: None,
            })
        }
        (None, Some(folds)) => {
            let grid = match parse_grid_arg(grid)? {
                Some(g) => g,
                None => GridSpec::default()
                    .resolve(&data.sample_covariance())
                    .map_err(lib_err)?,
            };
            let cfg = CvConfig::new(folds, grid, seed).map_err(lib_err)?;
            let (best, table) =
                select_lambda_with_options(data, kind, &cfg, opts).map_err(lib_err)?;
            Ok(LambdaChoice {
                lambda: best,
                cv_table: Some(table),
            })
        }
        (None, None) => Err(CliError::Usage(
            "one of --lambda or --cv is required".into(),
        )),
        (Some(_), Some(_)) => Err(CliError::Usage(
            "--lambda and --cv are mutually exclusive".into(),
        )),
    }
}

fn fit(
    s: &SymMatrix,
    n: usize,
    kind: &PenaltyKind,
    lambda: f64,
    opts: &EstimatorOptions,
) -> Result<PrecisionEstimate, CliError> {
    estimate(s, n, &kind.at_lambda(lambda), opts).map_err(lib_err)
}

pub fn cmd_estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let table = read_csv(&args.input)?;
    let data = data_matrix(&table, &args.input)?;
    let kind = args.penalty.kind(args.scad_a, args.gamma);
    let opts = estimator_options(args.threshold, !args.no_diagonal_penalty, args.init);
    let choice = choose_lambda(
        args.lambda,
        args.cv,
        &args.grid,
        &kind,
        &data,
        args.seed,
        &opts,
    )?;

    let s = data.sample_covariance();
    let est = fit(&s, data.n(), &kind, choice.lambda, &opts)?;

    let names = column_names(&table.header, data.p());
    let summary = json!({
        "command": "estimate",
        "penalty": kind.label(),
        "lambda": est.lambda_used,
        "objective": est.objective_trace.last().copied(),
        "sweeps": est.sweeps_used,
        "converged": est.converged,
        "n": data.n(),
        "p": data.p(),
        "threshold": args.threshold,
        "nonzero": est.pattern.count_nonzero(),
        "cv": choice.cv_table.as_ref().map(|table| {
            json!({
                "folds": args.cv,
                "scores": table
                    .iter()
                    .map(|(l, s)| json!({"lambda": l, "score": s}))
                    .collect::<Vec<_>>(),
            })
        }),
    });

    ensure_out_dir(&args.out_dir)?;
    write_text(
        &out_path(&args.out_dir, "omega.csv"),
        &csv_from_sym(est.omega.sym()),
    )?;
    write_text(
        &out_path(&args.out_dir, "pattern.csv"),
        &csv_from_pattern(&est.pattern),
    )?;
    write_text(
        &out_path(&args.out_dir, "edges.dot"),
        &dot_graph(&names, est.omega.sym(), &est.pattern),
    )?;
    write_text(
        &out_path(&args.out_dir, "summary.json"),
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&summary).expect("serializable")
        ),
    )?;
    Ok(())
}

fn report_json(report: &ExperimentReport) -> serde_json::Value {
    json!({
        "p": report.p,
        "n": report.n,
        "reps": report.reps,
        "true_zeros": report.true_zeros,
        "true_nonzeros": report.true_nonzeros,
        "penalties": report.rows.iter().map(|row| {
            json!({
                "penalty": row.penalty.label(),
                "loss1": {"mean": row.loss1.mean, "se": row.loss1.se},
                "loss2": {"mean": row.loss2.mean, "se": row.loss2.se},
                "zero1": {"mean": row.zero1.mean, "se": row.zero1.se},
                "zero2": {"mean": row.zero2.mean, "se": row.zero2.se},
                "perc1": {"mean": row.perc1.mean, "se": row.perc1.se},
                "perc2": {"mean": row.perc2.mean, "se": row.perc2.se},
                "nonzero": {"mean": row.nonzero.mean, "se": row.nonzero.se},
                "lambda": {"mean": row.lambda.mean, "se": row.lambda.se},
            })
        }).collect::<Vec<_>>(),
    })
}

fn report_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(
        "penalty,loss1_mean,loss1_se,loss2_mean,loss2_se,zero1_mean,zero1_se,\
         zero2_mean,zero2_se,perc1_mean,perc1_se,perc2_mean,perc2_se,nonzero_mean,nonzero_se\n",
    );
    for row in &report.rows {
        let stats = [
            row.loss1,
            row.loss2,
            row.zero1,
            row.zero2,
            row.perc1,
            row.perc2,
            row.nonzero,
        ];
        out.push_str(row.penalty.label());
        for s in stats {
            out.push_str(&format!(",{},{}", fmt_f64(s.mean), fmt_f64(s.se)));
        }
        out.push('\n');
    }
    out
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let cfg = crate::config::load_experiment_config(&args.config)?;
    let report = precnet::simgen::run_experiment(&cfg).map_err(lib_err)?;

    ensure_out_dir(&args.out_dir)?;
    write_text(
        &out_path(&args.out_dir, "report.json"),
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&report_json(&report)).expect("serializable")
        ),
    )?;
    write_text(&out_path(&args.out_dir, "report.csv"), &report_csv(&report))?;
    for row in &report.rows {
        write_text(
            &out_path(&args.out_dir, &format!("freq_{}.csv", row.penalty.label())),
            &csv_from_sym(&row.freq),
        )?;
    }
    Ok(())
}

pub fn cmd_forecast(args: &ForecastArgs) -> Result<(), CliError> {
    let train_table = read_csv(&args.train)?;
    let test_table = read_csv(&args.test)?;
    let train = data_matrix(&train_table, &args.train)?;
    let test = data_matrix(&test_table, &args.test)?;
    let p = train.p();
    if test.p() != p {
        return Err(CliError::Usage(format!(
            "train has {p} columns but test has {}",
            test.p()
        )));
    }
    if args.split == 0 || args.split >= p {
        return Err(CliError::Usage(format!(
            "--split must satisfy 1 <= split < {p}, got {}",
            args.split
        )));
    }

    let mean = train.column_means();
    let omega = match &args.omega {
        Some(path) => {
            let table = read_csv(path)?;
            let sym = SymMatrix::from_rows(&table.rows).map_err(|e| CliError::Parse {
                path: path.clone(),
                line: 1,
                col: 1,
                msg: e.to_string(),
            })?;
            if sym.dim() != p {
                return Err(CliError::Usage(format!(
                    "--omega matrix is {}x{} but data has {p} columns",
                    sym.dim(),
                    sym.dim()
                )));
            }
            SpdMatrix::try_new(sym).map_err(lib_err)?
        }
        None => {
            let kind = args.penalty.kind(args.scad_a, args.gamma);
            let opts = estimator_options(args.threshold, true, args.init);
            let choice = choose_lambda(
                args.lambda,
                args.cv,
                &args.grid,
                &kind,
                &train,
                args.seed,
                &opts,
            )?;
            let s = train.sample_covariance();
            fit(&s, train.n(), &kind, choice.lambda, &opts)?.omega
        }
    };

    let model = ForecastModel::new(mean, omega, args.split).map_err(lib_err)?;
    let mut predictions = Vec::with_capacity(test.n());
    let mut actual = Vec::with_capacity(test.n());
    for row in test.rows() {
        predictions.push(conditional_forecast(&model, &row[..args.split]).map_err(lib_err)?);
        actual.push(row[args.split..].to_vec());
    }
    let errors = aafe(&predictions, &actual).map_err(lib_err)?;

    ensure_out_dir(&args.out_dir)?;
    write_text(
        &out_path(&args.out_dir, "predictions.csv"),
        &csv_from_rows(&predictions),
    )?;
    let mut aafe_csv = String::from("t,aafe\n");
    for (offset, err) in errors.iter().enumerate() {
        aafe_csv.push_str(&format!("{},{}\n", args.split + offset + 1, fmt_f64(*err)));
    }
    write_text(&out_path(&args.out_dir, "aafe.csv"), &aafe_csv)?;
    Ok(())
}

fn read_labels(path: &Path, expected: usize) -> Result<Vec<usize>, CliError> {
    let table = read_csv(path)?;
    let mut labels = Vec::with_capacity(table.rows.len());
    for (i, row) in table.rows.iter().enumerate() {
        if row.len() != 1 {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                col: 2,
                msg: "labels file must have exactly one column".into(),
            });
        }
        let v = row[0];
        if v == 0.0 {
            labels.push(0);
        } else if v == 1.0 {
            labels.push(1);
        } else {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                col: 1,
                msg: format!("labels must be 0 or 1, got {v}"),
            });
        }
    }
    if labels.len() != expected {
        return Err(CliError::Usage(format!(
            "expected {expected} labels, found {}",
            labels.len()
        )));
    }
    Ok(labels)
}

pub fn cmd_classify(args: &ClassifyArgs) -> Result<(), CliError> {
    let train_table = read_csv(&args.train)?;
    let train = data_matrix(&train_table, &args.train)?;
    let labels = read_labels(&args.labels, train.n())?;
    let test_table = read_csv(&args.test)?;
    let test = data_matrix(&test_table, &args.test)?;
    if test.p() != train.p() {
        return Err(CliError::Usage(format!(
            "train has {} columns but test has {}",
            train.p(),
            test.p()
        )));
    }

    let mut select = args.select;
    if select > train.p() {
        eprintln!(
            "warning: --select {} exceeds the {} available features; using all of them",
            select,
            train.p()
        );
        select = train.p();
    }
    if select == 0 {
        return Err(CliError::Usage("--select must be at least 1".into()));
    }

    // Screen features on the training data, standardize by training spread,
    // then fit the penalized discriminant model.
    let picked = two_sample_t_select(&train, &labels, select).map_err(lib_err)?;
    let train_sel = train.select_columns(&picked);
    let test_sel = test.select_columns(&picked);
    let (train_std, divisors) = standardize_columns(&train_sel).map_err(lib_err)?;
    let test_std = apply_standardization(&test_sel, &divisors).map_err(lib_err)?;

    let kind = args.penalty.kind(args.scad_a, args.gamma);
    let opts = estimator_options(args.threshold, true, args.init);
    // Lambda tuning sees class-centered residuals, which play the role of
    // centered Gaussian draws with the pooled covariance.
    let residuals = class_residuals(&train_std, &labels)?;
    let choice = choose_lambda(
        args.lambda,
        args.cv,
        &args.grid,
        &kind,
        &residuals,
        args.seed,
        &opts,
    )?;
    let model =
        lda_train(&train_std, &labels, &kind.at_lambda(choice.lambda), &opts).map_err(lib_err)?;

    let predicted: Vec<usize> = test_std
        .rows()
        .map(|row| lda_classify(&model, row).0)
        .collect();

    ensure_out_dir(&args.out_dir)?;
    let mut labels_csv = String::new();
    for &label in &predicted {
        labels_csv.push_str(&format!("{label}\n"));
    }
    write_text(&out_path(&args.out_dir, "labels.csv"), &labels_csv)?;

    let metrics = match &args.test_labels {
        Some(path) => {
            let actual = read_labels(path, test.n())?;
            let predicted_pos: Vec<bool> = predicted.iter().map(|&l| l == 1).collect();
            let actual_pos: Vec<bool> = actual.iter().map(|&l| l == 1).collect();
            let counts =
                ConfusionCounts::from_labels(&predicted_pos, &actual_pos).map_err(lib_err)?;
            let m = classification_metrics(&counts);
            Some(json!({
                "specificity": m.specificity,
                "sensitivity": m.sensitivity,
                "mcc": m.mcc,
                "true_pos": counts.true_pos,
                "true_neg": counts.true_neg,
                "false_pos": counts.false_pos,
                "false_neg": counts.false_neg,
            }))
        }
        None => None,
    };
    let summary = json!({
        "command": "classify",
        "penalty": kind.label(),
        "lambda": choice.lambda,
        "selected_features": picked,
        "nonzero": model.omega.dim() * model.omega.dim()
            - count_zeros(&model.omega, args.threshold),
        "metrics": metrics,
    });
    write_text(
        &out_path(&args.out_dir, "metrics.json"),
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&summary).expect("serializable")
        ),
    )?;
    Ok(())
}

fn count_zeros(omega: &SpdMatrix, threshold: f64) -> usize {
    let p = omega.dim();
    let mut zeros = 0;
    for i in 0..p {
        for j in 0..p {
            if omega.get(i, j).abs() < threshold {
                zeros += 1;
            }
        }
    }
    zeros
}

/// Rows centered at their own class mean; approximately centered draws with
/// the pooled within-class covariance.
fn class_residuals(x: &DataMatrix, labels: &[usize]) -> Result<DataMatrix, CliError> {
    let p = x.p();
    let mut sums = [vec![0.0; p], vec![0.0; p]];
    let mut counts = [0usize; 2];
    for (i, &label) in labels.iter().enumerate() {
        counts[label] += 1;
        for (acc, v) in sums[label].iter_mut().zip(x.row(i)) {
            *acc += v;
        }
    }
    for k in 0..2 {
        if counts[k] == 0 {
            return Err(lib_err(precnet::Error::DegenerateClass(
                "both classes must be present".into(),
            )));
        }
        for v in &mut sums[k] {
            *v /= counts[k] as f64;
        }
    }
    let mut data = Vec::with_capacity(x.n() * p);
    for (i, &label) in labels.iter().enumerate() {
        for (v, m) in x.row(i).iter().zip(&sums[label]) {
            data.push(v - m);
        }
    }
    DataMatrix::new(x.n(), p, data).map_err(lib_err)
}

impl PenaltyArg {
    pub fn kind(&self, scad_a: f64, gamma: f64) -> PenaltyKind {
        match self {
            PenaltyArg::Lasso => PenaltyKind::Lasso,
            PenaltyArg::Alasso => PenaltyKind::AdaptiveLasso { gamma },
            PenaltyArg::Scad => PenaltyKind::Scad { a: scad_a },
        }
    }
}
