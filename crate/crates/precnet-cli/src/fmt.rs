//! CSV, DOT and number formatting shared by the subcommands.
//!
//! Numbers are written with 17 significant digits so files round-trip
//! bit-exactly through the reader.

use std::path::{Path, PathBuf};

use precnet::estimator::SparsityPattern;
use precnet::linalg::SymMatrix;

use crate::CliError;

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Parsed CSV: an optional header (detected when the first row has any
/// non-numeric field) and the numeric rows.
#[derive(Debug)]
pub struct CsvTable {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_csv(path: &Path) -> Result<CsvTable, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text, path)
}

pub fn parse_csv(text: &str, path: &Path) -> Result<CsvTable, CliError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;

    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if rows.is_empty() && header.is_none() {
            // Header detection: a first row with any non-numeric field.
            if fields.iter().any(|f| f.parse::<f64>().is_err()) {
                header = Some(fields.iter().map(|f| f.to_string()).collect());
                continue;
            }
        }
        if let Some(w) = width {
            if fields.len() != w {
                return Err(CliError::Parse {
                    path: path.to_path_buf(),
                    line: line_no + 1,
                    col: 1,
                    msg: format!("expected {w} fields, found {}", fields.len()),
                });
            }
        } else {
            if let Some(h) = &header {
                if fields.len() != h.len() {
                    return Err(CliError::Parse {
                        path: path.to_path_buf(),
                        line: line_no + 1,
                        col: 1,
                        msg: format!("expected {} fields, found {}", h.len(), fields.len()),
                    });
                }
            }
            width = Some(fields.len());
        }
        let mut row = Vec::with_capacity(fields.len());
        for (col, field) in fields.iter().enumerate() {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(CliError::Parse {
                        path: path.to_path_buf(),
                        line: line_no + 1,
                        col: col + 1,
                        msg: format!("not a finite number: {field:?}"),
                    })
                }
            }
        }
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            col: 1,
            msg: "no data rows".into(),
        });
    }
    Ok(CsvTable { header, rows })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn csv_from_rows(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn csv_from_sym(m: &SymMatrix) -> String {
    let p = m.dim();
    let rows: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| m.get(i, j)).collect())
        .collect();
    csv_from_rows(&rows)
}

pub fn csv_from_pattern(pattern: &SparsityPattern) -> String {
    let p = pattern.dim();
    let mut out = String::new();
    for i in 0..p {
        let line: Vec<&str> = (0..p)
            .map(|j| if pattern.get(i, j) { "1" } else { "0" })
            .collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Undirected graph with one edge per off-diagonal nonzero of the pattern;
/// edge weights carry the precision values.
pub fn dot_graph(names: &[String], omega: &SymMatrix, pattern: &SparsityPattern) -> String {
    let p = omega.dim();
    let quoted = |i: usize| format!("\"{}\"", names[i].replace('"', "\\\""));
    let mut out = String::from("graph precision {\n");
    for i in 0..p {
        out.push_str(&format!("  {};\n", quoted(i)));
    }
    for i in 0..p {
        for j in (i + 1)..p {
            if pattern.get(i, j) {
                out.push_str(&format!(
                    "  {} -- {} [weight={}];\n",
                    quoted(i),
                    quoted(j),
                    fmt_f64(omega.get(i, j))
                ));
            }
        }
    }
    out.push_str("}\n");
    out
}

/// Column names from the header, or `v1..vp`.
pub fn column_names(header: &Option<Vec<String>>, p: usize) -> Vec<String> {
    match header {
        Some(names) if names.len() == p => names.clone(),
        _ => (1..=p).map(|i| format!("v{i}")).collect(),
    }
}

pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_detected_and_rows_parse() {
        let table = parse_csv("a,b\n1,2\n3,4\n", Path::new("t.csv")).unwrap();
        assert_eq!(table.header, Some(vec!["a".into(), "b".into()]));
        assert_eq!(table.rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn headerless_numeric_input_parses() {
        let table = parse_csv("1.5,-2\n0,3e-2\n", Path::new("t.csv")).unwrap();
        assert!(table.header.is_none());
        assert_eq!(table.rows.len(), 2);
    }

    #[test]
    fn bad_field_reports_line_and_column() {
        let err = parse_csv("1,2\n3,oops\n", Path::new("t.csv")).unwrap_err();
        match err {
            CliError::Parse { line, col, .. } => {
                assert_eq!((line, col), (2, 2));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        assert!(parse_csv("", Path::new("t.csv")).is_err());
        assert!(parse_csv("\n\n", Path::new("t.csv")).is_err());
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(parse_csv("1,2\n3\n", Path::new("t.csv")).is_err());
    }

    #[test]
    fn formatted_floats_round_trip_exactly() {
        for &v in &[
            0.0,
            1.0,
            -1.5,
            std::f64::consts::PI,
            1e-300,
            -3.123456789012345e17,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{v} -> {s}");
        }
    }
}
