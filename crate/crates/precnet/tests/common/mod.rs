//! Independent oracles shared by the integration tests. Everything here
//! recomputes quantities by a different route than the library: eigenvalues
//! by Jacobi rotations, inverses by Gauss-Jordan elimination, penalized
//! maxima by coordinate-wise golden-section search or proximal gradient
//! ascent. Oracles stay deliberately naive.

#![allow(dead_code)]

use precnet::glasso::WeightMatrix;
use precnet::linalg::{trace_product, SymMatrix};
use precnet::simgen::RngStream;

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let p = a.len();
    for _sweep in 0..200 {
        let mut off = 0.0;
        for i in 0..p {
            for j in 0..i {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() < 1e-13 {
            break;
        }
        for q in 1..p {
            for r in 0..q {
                if a[q][r] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[r][r]) / (2.0 * a[q][r]);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..p {
                    let akr = a[k][r];
                    let akq = a[k][q];
                    a[k][r] = c * akr - s * akq;
                    a[k][q] = s * akr + c * akq;
                }
                for k in 0..p {
                    let ark = a[r][k];
                    let aqk = a[q][k];
                    a[r][k] = c * ark - s * aqk;
                    a[q][k] = s * ark + c * aqk;
                }
            }
        }
    }
    (0..p).map(|i| a[i][i]).collect()
}

/// Dense inverse by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = a.len();
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..p).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..p {
        let pivot_row = (col..p)
            .max_by(|&i, &j| aug[i][col].abs().partial_cmp(&aug[j][col].abs()).unwrap())
            .unwrap();
        aug.swap(col, pivot_row);
        let pivot = aug[col][col];
        assert!(pivot.abs() > 1e-300, "singular matrix in oracle inverse");
        for v in &mut aug[col] {
            *v /= pivot;
        }
        for row in 0..p {
            if row != col {
                let factor = aug[row][col];
                if factor != 0.0 {
                    for k in 0..2 * p {
                        aug[row][k] -= factor * aug[col][k];
                    }
                }
            }
        }
    }
    aug.into_iter().map(|row| row[p..].to_vec()).collect()
}

pub fn sym_to_rows(m: &SymMatrix) -> Vec<Vec<f64>> {
    (0..m.dim())
        .map(|i| (0..m.dim()).map(|j| m.get(i, j)).collect())
        .collect()
}

/// Penalized objective used by the oracles, −inf outside the SPD cone.
pub fn penalized_objective_oracle(
    omega: &SymMatrix,
    s: &SymMatrix,
    lam: &WeightMatrix,
    penalize_diagonal: bool,
) -> f64 {
    let Ok(chol) = omega.cholesky() else {
        return f64::NEG_INFINITY;
    };
    let mut pen = 0.0;
    for i in 0..omega.dim() {
        if penalize_diagonal {
            pen += lam.get(i, i) * omega.get(i, i).abs();
        }
        for j in 0..i {
            let o = omega.get(i, j).abs();
            if o != 0.0 {
                pen += 2.0 * lam.get(i, j) * o;
            }
        }
    }
    chol.log_det() - trace_product(s, omega).unwrap() - pen
}

/// Golden-section maximization of a quasiconcave function on `[lo, hi]`.
fn golden_max(mut lo: f64, mut hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..64 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Direct maximization of the weighted penalized likelihood over the free
/// entries of a small symmetric matrix: cyclic coordinate ascent, each
/// coordinate solved by golden-section search over an adaptive bracket. The
/// smooth part is strictly concave and the penalty separable, so the search
/// reaches the global maximum.
pub fn brute_force_glasso(s: &SymMatrix, lam: &WeightMatrix, penalize_diagonal: bool) -> SymMatrix {
    let p = s.dim();
    assert!(p <= 4, "direct maximization oracle is for tiny instances");
    let mut x = SymMatrix::from_fn(p, |i, j| {
        if i == j {
            1.0 / (s.get(i, i)
                + if penalize_diagonal {
                    lam.get(i, i)
                } else {
                    0.0
                })
        } else {
            0.0
        }
    });
    let coords: Vec<(usize, usize)> = (0..p).flat_map(|i| (0..=i).map(move |j| (i, j))).collect();
    let f = |m: &SymMatrix| penalized_objective_oracle(m, s, lam, penalize_diagonal);
    for _pass in 0..2000 {
        let mut moved = 0.0f64;
        for &(i, j) in &coords {
            if lam.get(i, j) == f64::INFINITY {
                continue;
            }
            let current = x.get(i, j);
            let mut scratch = x.clone();
            let mut eval = |t: f64| {
                scratch.set(i, j, t);
                f(&scratch)
            };
            // Expand the bracket until the endpoints stop improving.
            let mut delta = 0.5;
            while eval(current + delta).max(eval(current - delta)) > eval(current) && delta < 64.0 {
                delta *= 2.0;
            }
            let best = golden_max(current - delta, current + delta, &mut eval);
            // Snap to the kink when it is at least as good.
            let best = if i != j && eval(0.0) >= eval(best) {
                0.0
            } else {
                best
            };
            x.set(i, j, best);
            moved = moved.max((best - current).abs());
        }
        if moved < 1e-9 {
            break;
        }
    }
    x
}

/// Independent weighted solver: proximal gradient ascent with backtracking,
/// using the Gauss-Jordan inverse for the gradient of the smooth part.
pub fn proximal_ascent_glasso(
    s: &SymMatrix,
    lam: &WeightMatrix,
    penalize_diagonal: bool,
    tol: f64,
) -> SymMatrix {
    let p = s.dim();
    let mut x = SymMatrix::from_fn(p, |i, j| {
        if i == j {
            1.0 / (s.get(i, i)
                + if penalize_diagonal {
                    lam.get(i, i)
                } else {
                    0.0
                })
        } else {
            0.0
        }
    });
    let f = |m: &SymMatrix| penalized_objective_oracle(m, s, lam, penalize_diagonal);
    let soft = |v: f64, t: f64| {
        if t == f64::INFINITY {
            0.0
        } else if v > t {
            v - t
        } else if v < -t {
            v + t
        } else {
            0.0
        }
    };
    let mut step = 1.0;
    for _iter in 0..200_000 {
        let inv = gauss_jordan_inverse(&sym_to_rows(&x));
        let grad = SymMatrix::from_fn(p, |i, j| 0.5 * (inv[i][j] + inv[j][i]) - s.get(i, j));
        let fx = f(&x);
        let mut eta = step;
        let mut accepted = None;
        for _ in 0..200 {
            let candidate = SymMatrix::from_fn(p, |i, j| {
                let raw = x.get(i, j) + eta * grad.get(i, j);
                if i == j {
                    if penalize_diagonal {
                        soft(raw, eta * lam.get(i, i))
                    } else {
                        raw
                    }
                } else {
                    soft(raw, eta * lam.get(i, j))
                }
            });
            if f(&candidate) > fx - 1e-14 {
                accepted = Some(candidate);
                break;
            }
            eta *= 0.5;
        }
        let candidate = accepted.expect("backtracking found an ascent step");
        let moved = candidate.max_abs_diff(&x);
        x = candidate;
        step = (eta * 2.0).min(1.0);
        if moved < tol {
            break;
        }
    }
    x
}

/// Sample covariance from an Example-4.1-style instance: a tridiagonal truth
/// at the given seed and `n` Gaussian draws from it.
pub fn ar1_sample_cov(p: usize, n: usize, seed: u64) -> SymMatrix {
    let mut rng = RngStream::new(seed);
    let truth = precnet::simgen::gen_ar1_precision(p, 1.0, &mut rng).unwrap();
    precnet::simgen::sample_gaussian(n, &truth, &mut rng)
        .unwrap()
        .sample_covariance()
}

/// Random SPD matrix `B B' / p + I` with standard normal `B`.
pub fn random_spd(p: usize, seed: u64) -> SymMatrix {
    let mut rng = RngStream::new(seed);
    let b: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..p).map(|_| rng.standard_normal()).collect())
        .collect();
    SymMatrix::from_fn(p, |i, j| {
        let dot: f64 = (0..p).map(|k| b[i][k] * b[j][k]).sum();
        dot / p as f64 + if i == j { 1.0 } else { 0.0 }
    })
}
