//! Simulation config files: a flat `key = value` format with `#` comments.
//! Unknown or duplicate keys are rejected.
//!
//! ```text
//! family = ar1            # ar1 | knn | exp_decay
//! a = 1.0                 # ar1 decay rate
//! k = 2                   # knn neighbor count
//! p = 30
//! n = 120
//! reps = 20
//! penalties = lasso, alasso, scad
//! scad_a = 3.7
//! gamma = 0.5
//! cv_folds = 6
//! grid = auto             # or a comma list of lambda values
//! grid_points = 20
//! grid_ratio = 100
//! seed = 17
//! threshold = 1e-3
//! init = auto             # auto | lasso (initial value for reweighting)
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use precnet::estimator::InitPolicy;
use precnet::penalties::PenaltyKind;
use precnet::simgen::{ExperimentConfig, GridSpec, PrecisionFamily};

use crate::CliError;

pub fn load_experiment_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_experiment_config(&text, path)
}

pub fn parse_experiment_config(text: &str, path: &Path) -> Result<ExperimentConfig, CliError> {
    let fail = |msg: String| CliError::Config {
        path: path.to_path_buf(),
        msg,
    };

    const KNOWN_KEYS: &[&str] = &[
        "family",
        "a",
        "k",
        "p",
        "n",
        "reps",
        "penalties",
        "scad_a",
        "gamma",
        "cv_folds",
        "grid",
        "grid_points",
        "grid_ratio",
        "seed",
        "threshold",
        "init",
    ];

    let mut values: BTreeMap<String, String> = BTreeMap::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(fail(format!("line {}: expected key = value", line_no + 1)));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(fail(format!("line {}: unknown key {key:?}", line_no + 1)));
        }
        if values.insert(key.clone(), value).is_some() {
            return Err(fail(format!("line {}: duplicate key {key:?}", line_no + 1)));
        }
    }

    let get = |key: &str| values.get(key).map(String::as_str);
    let require = |key: &str| get(key).ok_or_else(|| fail(format!("missing required key {key:?}")));
    let parse_num = |key: &str, value: &str| -> Result<f64, CliError> {
        value
            .parse::<f64>()
            .map_err(|_| fail(format!("key {key:?}: not a number: {value:?}")))
    };
    let parse_usize = |key: &str, value: &str| -> Result<usize, CliError> {
        value
            .parse::<usize>()
            .map_err(|_| fail(format!("key {key:?}: not a nonnegative integer: {value:?}")))
    };

    let p = parse_usize("p", require("p")?)?;
    let n = parse_usize("n", require("n")?)?;
    let reps = parse_usize("reps", require("reps")?)?;
    if reps == 0 {
        return Err(fail("reps must be at least 1".into()));
    }

    let family = match require("family")? {
        "ar1" => {
            let a = match get("a") {
                Some(v) => parse_num("a", v)?,
                None => 1.0,
            };
            PrecisionFamily::Ar1 { a }
        }
        "knn" => {
            let k = match get("k") {
                Some(v) => parse_usize("k", v)?,
                None => 2,
            };
            PrecisionFamily::Knn { k }
        }
        "exp_decay" => PrecisionFamily::ExpDecay,
        other => return Err(fail(format!("unknown family {other:?}"))),
    };

    let scad_a = match get("scad_a") {
        Some(v) => parse_num("scad_a", v)?,
        None => precnet::penalties::DEFAULT_SCAD_A,
    };
    let gamma = match get("gamma") {
        Some(v) => parse_num("gamma", v)?,
        None => precnet::penalties::DEFAULT_ADAPTIVE_GAMMA,
    };
    let penalties = match get("penalties") {
        None => vec![
            PenaltyKind::Lasso,
            PenaltyKind::AdaptiveLasso { gamma },
            PenaltyKind::Scad { a: scad_a },
        ],
        Some(list) => {
            let mut kinds = Vec::new();
            for name in list.split(',').map(str::trim) {
                let kind = match name {
                    "lasso" => PenaltyKind::Lasso,
                    "alasso" | "adaptive_lasso" => PenaltyKind::AdaptiveLasso { gamma },
                    "scad" => PenaltyKind::Scad { a: scad_a },
                    other => return Err(fail(format!("unknown penalty {other:?}"))),
                };
                if kinds.contains(&kind) {
                    return Err(fail(format!("duplicate penalty {name:?}")));
                }
                kinds.push(kind);
            }
            if kinds.is_empty() {
                return Err(fail("penalties list is empty".into()));
            }
            kinds
        }
    };

    let grid_points = match get("grid_points") {
        Some(v) => parse_usize("grid_points", v)?,
        None => 20,
    };
    let grid_ratio = match get("grid_ratio") {
        Some(v) => parse_num("grid_ratio", v)?,
        None => 100.0,
    };
    let grid = match get("grid") {
        None => GridSpec::Auto {
            points: grid_points,
            ratio: grid_ratio,
        },
        Some("auto") => GridSpec::Auto {
            points: grid_points,
            ratio: grid_ratio,
        },
        Some(list) => {
            let mut grid = Vec::new();
            for item in list.split(',').map(str::trim) {
                let v = parse_num("grid", item)?;
                if !(v >= 0.0) {
                    return Err(fail(format!("grid values must be nonnegative, got {v}")));
                }
                grid.push(v);
            }
            GridSpec::Explicit(grid)
        }
    };

    let cfg = ExperimentConfig {
        family,
        p,
        n,
        reps,
        penalties,
        cv_folds: match get("cv_folds") {
            Some(v) => parse_usize("cv_folds", v)?,
            None => 6,
        },
        grid,
        seed: match get("seed") {
            Some(v) => v
                .parse::<u64>()
                .map_err(|_| fail(format!("key \"seed\": not an integer: {v:?}")))?,
            None => 0,
        },
        threshold: match get("threshold") {
            Some(v) => parse_num("threshold", v)?,
            None => 1e-3,
        },
        init_policy: match get("init") {
            None | Some("auto") => InitPolicy::Auto,
            Some("lasso") => InitPolicy::LassoEstimate,
            Some(other) => return Err(fail(format!("unknown init policy {other:?}"))),
        },
    };
    cfg.validate().map_err(|e| fail(e.to_string()))?;
    Ok(cfg)
}
