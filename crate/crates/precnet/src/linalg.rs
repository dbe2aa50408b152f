//! Dense symmetric linear algebra: packed symmetric storage, Cholesky
//! factorization, log-determinants, SPD inversion, trace products and the
//! sample covariance.
//!
//! Everything here is plain `f64` and sized for the dense regime (p up to a
//! few hundred). Matrices are immutable values once built and safe to share
//! across threads.

use crate::error::{Error, Result};

/// Relative pivot tolerance for Cholesky: a pivot must exceed
/// `PIVOT_RTOL * max(diagonal)` to count as positive.
const PIVOT_RTOL: f64 = 1e-12;

/// Dense symmetric matrix with packed lower-triangular storage.
///
/// A single cell backs both `(i, j)` and `(j, i)`, so symmetry is structural
/// rather than a runtime property to maintain.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    /// Lower triangle, row by row: `data[i*(i+1)/2 + j]` holds entry `(i, j)` for `j <= i`.
    data: Vec<f64>,
}

#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    debug_assert!(j <= i);
    i * (i + 1) / 2 + j
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        SymMatrix {
            dim,
            data: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = SymMatrix::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds a matrix by evaluating `f(i, j)` once per unordered pair, with `i >= j`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds from full square rows, validating shape, symmetry and finiteness.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::EmptyInput);
        }
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
        }
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                let v = rows[i][j];
                let vt = rows[j][i];
                if !v.is_finite() || !vt.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "non-finite entry at ({i}, {j})"
                    )));
                }
                if (v - vt).abs() > 1e-12 * (1.0 + v.abs().max(vt.abs())) {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i >= j {
            self.data[packed_index(i, j)]
        } else {
            self.data[packed_index(j, i)]
        }
    }

    /// Sets both `(i, j)` and `(j, i)` (they share storage).
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(v.is_finite(), "matrix entries must be finite");
        if i >= j {
            self.data[packed_index(i, j)] = v;
        } else {
            self.data[packed_index(j, i)] = v;
        }
    }

    /// Full row-major `dim * dim` copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let p = self.dim;
        let mut out = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..=i {
                let v = self.data[packed_index(i, j)];
                out[i * p + j] = v;
                out[j * p + i] = v;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Mean of `|entry|` over the off-diagonal cells (0 when `dim == 1`).
    pub fn mean_abs_offdiag(&self) -> f64 {
        if self.dim < 2 {
            return 0.0;
        }
        let mut sum = 0.0;
        for i in 0..self.dim {
            for j in 0..i {
                sum += self.data[packed_index(i, j)].abs();
            }
        }
        sum / (self.dim * (self.dim - 1) / 2) as f64
    }

    pub fn max_abs_offdiag(&self) -> f64 {
        let mut m = 0.0_f64;
        for i in 0..self.dim {
            for j in 0..i {
                m = m.max(self.data[packed_index(i, j)].abs());
            }
        }
        m
    }

    /// Largest absolute entrywise difference, for convergence and test checks.
    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Matrix-vector product `self * v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim, "dimension mismatch");
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            let mut acc = 0.0;
            for j in 0..self.dim {
                acc += self.get(i, j) * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Quadratic form `v' * self * v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.dim, "dimension mismatch");
        let mut acc = 0.0;
        for i in 0..self.dim {
            let d = self.data[packed_index(i, i)];
            acc += d * v[i] * v[i];
            for j in 0..i {
                acc += 2.0 * self.data[packed_index(i, j)] * v[i] * v[j];
            }
        }
        acc
    }

    /// Cholesky factorization `self = L L'`.
    ///
    /// Fails with [`Error::NotPositiveDefinite`] when a pivot drops below the
    /// relative tolerance, which distinguishes rank deficiency from roundoff.
    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        let p = self.dim;
        let mut max_diag = f64::MIN_POSITIVE;
        for i in 0..p {
            max_diag = max_diag.max(self.data[packed_index(i, i)]);
        }
        let pivot_floor = PIVOT_RTOL * max_diag;

        let mut lower = vec![0.0; p * (p + 1) / 2];
        for i in 0..p {
            for j in 0..=i {
                let mut sum = self.data[packed_index(i, j)];
                for k in 0..j {
                    sum -= lower[packed_index(i, k)] * lower[packed_index(j, k)];
                }
                if i == j {
                    if !(sum > pivot_floor) {
                        return Err(Error::NotPositiveDefinite { pivot: i });
                    }
                    lower[packed_index(i, i)] = sum.sqrt();
                } else {
                    lower[packed_index(i, j)] = sum / lower[packed_index(j, j)];
                }
            }
        }
        Ok(CholeskyFactor { dim: p, lower })
    }
}

/// Lower-triangular Cholesky factor with positive diagonal.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    dim: usize,
    /// Packed lower triangle of `L`.
    lower: Vec<f64>,
}

impl CholeskyFactor {
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry of `L`; zero above the diagonal.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.lower[packed_index(i, j)]
        }
    }

    /// `log det M = 2 * sum(log L_ii)` for the factored matrix.
    pub fn log_det(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.lower[packed_index(i, i)].ln())
            .sum::<f64>()
            * 2.0
    }

    /// Solves `M x = b` by forward then backward substitution.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.dim, "dimension mismatch");
        let mut y = b.to_vec();
        self.solve_in_place(&mut y);
        y
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let p = self.dim;
        // L y = b
        for i in 0..p {
            let mut acc = b[i];
            for k in 0..i {
                acc -= self.lower[packed_index(i, k)] * b[k];
            }
            b[i] = acc / self.lower[packed_index(i, i)];
        }
        // L' x = y
        for i in (0..p).rev() {
            let mut acc = b[i];
            for k in (i + 1)..p {
                acc -= self.lower[packed_index(k, i)] * b[k];
            }
            b[i] = acc / self.lower[packed_index(i, i)];
        }
    }

    /// Solves `L' x = z` only (backward substitution). Used to turn standard
    /// normal draws into draws with precision `L L'`.
    pub fn solve_transposed(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.dim, "dimension mismatch");
        let p = self.dim;
        let mut x = z.to_vec();
        for i in (0..p).rev() {
            let mut acc = x[i];
            for k in (i + 1)..p {
                acc -= self.lower[packed_index(k, i)] * x[k];
            }
            x[i] = acc / self.lower[packed_index(i, i)];
        }
        x
    }

    /// Inverse of the factored matrix, via `M^{-1} = L^{-T} L^{-1}`.
    pub fn inverse(&self) -> SymMatrix {
        let p = self.dim;
        // Columns of L^{-1} by forward substitution; inv is lower triangular.
        let mut linv = vec![0.0; p * (p + 1) / 2];
        for j in 0..p {
            linv[packed_index(j, j)] = 1.0 / self.lower[packed_index(j, j)];
            for i in (j + 1)..p {
                let mut acc = 0.0;
                for k in j..i {
                    acc -= self.lower[packed_index(i, k)] * linv[packed_index(k, j)];
                }
                linv[packed_index(i, j)] = acc / self.lower[packed_index(i, i)];
            }
        }
        let mut out = SymMatrix::zeros(p);
        for i in 0..p {
            for j in 0..=i {
                let mut acc = 0.0;
                for k in i..p {
                    acc += linv[packed_index(k, i)] * linv[packed_index(k, j)];
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    /// Recomposes `L L'`, mainly for round-trip checks.
    pub fn reconstruct(&self) -> SymMatrix {
        let p = self.dim;
        SymMatrix::from_fn(p, |i, j| {
            let mut acc = 0.0;
            for k in 0..=j.min(i) {
                acc += self.lower[packed_index(i, k)] * self.lower[packed_index(j, k)];
            }
            acc
        })
    }
}

/// Symmetric positive-definite matrix.
///
/// The certificate of definiteness is a successful Cholesky factorization at
/// construction; the factor is kept alongside the entries, so log-determinants
/// and solves are available without refactoring.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    sym: SymMatrix,
    chol: CholeskyFactor,
}

impl SpdMatrix {
    /// Certifies `sym` by factoring it.
    pub fn try_new(sym: SymMatrix) -> Result<Self> {
        let chol = sym.cholesky()?;
        Ok(SpdMatrix { sym, chol })
    }

    pub fn identity(dim: usize) -> Self {
        SpdMatrix::try_new(SymMatrix::identity(dim)).expect("identity is positive definite")
    }

    #[inline]
    pub fn sym(&self) -> &SymMatrix {
        &self.sym
    }

    pub fn into_sym(self) -> SymMatrix {
        self.sym
    }

    #[inline]
    pub fn cholesky(&self) -> &CholeskyFactor {
        &self.chol
    }

    pub fn log_det(&self) -> f64 {
        self.chol.log_det()
    }

    /// SPD inverse via the stored factor.
    pub fn inverse(&self) -> SpdMatrix {
        let inv = self.chol.inverse();
        SpdMatrix::try_new(inv).expect("inverse of an SPD matrix is SPD")
    }
}

impl std::ops::Deref for SpdMatrix {
    type Target = SymMatrix;
    fn deref(&self) -> &SymMatrix {
        &self.sym
    }
}

/// `tr(a b) = sum_ij a_ij * b_ij`, valid because both arguments are symmetric.
pub fn trace_product(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let mut acc = 0.0;
    for i in 0..a.dim() {
        acc += a.get(i, i) * b.get(i, i);
        for j in 0..i {
            acc += 2.0 * a.get(i, j) * b.get(i, j);
        }
    }
    Ok(acc)
}

/// Data matrix of `n` observation rows over `p` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    /// Row-major `n * p` storage.
    data: Vec<f64>,
}

impl DataMatrix {
    pub fn new(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::EmptyInput);
        }
        if data.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: data.len(),
            });
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite entry at row {}, column {}",
                bad / p,
                bad % p
            )));
        }
        Ok(DataMatrix { n, p, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        let p = rows[0].len();
        for row in rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: row.len(),
                });
            }
        }
        DataMatrix::new(rows.len(), p, rows.concat())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.p + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.p)
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.p];
        for row in self.rows() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= self.n as f64;
        }
        means
    }

    pub fn select_rows(&self, indices: &[usize]) -> DataMatrix {
        assert!(!indices.is_empty(), "row selection must be nonempty");
        let mut data = Vec::with_capacity(indices.len() * self.p);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        DataMatrix {
            n: indices.len(),
            p: self.p,
            data,
        }
    }

    pub fn select_columns(&self, indices: &[usize]) -> DataMatrix {
        assert!(!indices.is_empty(), "column selection must be nonempty");
        let mut data = Vec::with_capacity(self.n * indices.len());
        for row in self.rows() {
            for &j in indices {
                data.push(row[j]);
            }
        }
        DataMatrix {
            n: self.n,
            p: indices.len(),
            data,
        }
    }

    /// Sample covariance with the 1/n convention (not 1/(n-1)), so the
    /// Gaussian log-likelihood takes its compact trace form.
    pub fn sample_covariance(&self) -> SymMatrix {
        let means = self.column_means();
        let n = self.n as f64;
        let mut cov = SymMatrix::zeros(self.p);
        for row in self.rows() {
            for j in 0..self.p {
                let dj = row[j] - means[j];
                for k in 0..=j {
                    let v = cov.get(j, k) + dj * (row[k] - means[k]);
                    cov.set(j, k, v);
                }
            }
        }
        for j in 0..self.p {
            for k in 0..=j {
                let v = cov.get(j, k) / n;
                cov.set(j, k, v);
            }
        }
        cov
    }
}
