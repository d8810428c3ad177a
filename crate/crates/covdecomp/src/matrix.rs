//! Dense symmetric-matrix foundation: Cholesky factorization, inversion,
//! norms, and spectral radius.
//!
//! Everything here assumes desk-scale dimensions (a few hundred at most),
//! so matrices are stored dense and factorizations are exact O(p^3) loops.
//! Values are immutable after construction and safe to share across threads.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Cholesky pivot cutoff: a pivot at or below this value counts as a
/// positive-definiteness failure.
pub const PD_PIVOT_TOL: f64 = 1e-12;

/// Symmetry tolerance applied when loading a matrix from CSV.
pub const CSV_SYMMETRY_TOL: f64 = 1e-9;

/// Iteration cap for the power iteration behind [`SymmetricMatrix::spectral_radius`].
pub const POWER_ITERATION_CAP: usize = 10_000;

/// Dense real symmetric matrix, stored row-major with both triangles filled.
///
/// Symmetry is enforced on construction: every constructor either fills both
/// triangles from one value or validates that the provided data is symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    /// Zero matrix of dimension `dim`.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * m.dim + i] = v;
        }
        m
    }

    /// Build from full rows, requiring an exactly symmetric square layout.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidInput(
                "matrix must have at least one row".into(),
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::InvalidInput(format!(
                        "entries ({i},{j}) and ({j},{i}) differ: {} vs {}",
                        rows[i][j], rows[j][i]
                    )));
                }
            }
        }
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Set entry (i, j) and its mirror (j, i).
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.dim + j] = value;
        self.data[j * self.dim + i] = value;
    }

    /// Matrix-vector product.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let mut y = vec![0.0; self.dim];
        for i in 0..self.dim {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        y
    }

    /// Sum of `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch(self.dim, other.dim));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            dim: self.dim,
            data,
        })
    }

    /// Lower-triangular Cholesky factor `L` with `self = L * L^T`.
    ///
    /// Fails with [`Error::NotPositiveDefinite`] when a pivot falls at or
    /// below [`PD_PIVOT_TOL`].
    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        let n = self.dim;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= PD_PIVOT_TOL {
                        return Err(Error::NotPositiveDefinite);
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(CholeskyFactor { dim: n, l })
    }

    /// Inverse of a positive definite matrix via its Cholesky factor.
    pub fn inverse_spd(&self) -> Result<SymmetricMatrix> {
        Ok(self.cholesky()?.inverse())
    }

    /// Maximum absolute off-diagonal entry; zero for a 1x1 matrix.
    pub fn elementwise_linf_off(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i != j {
                    best = best.max(self.get(i, j).abs());
                }
            }
        }
        best
    }

    /// Maximum absolute entry, diagonal included.
    pub fn elementwise_linf(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Operator infinity norm: maximum absolute row sum.
    pub fn linf_operator_norm(&self) -> f64 {
        (0..self.dim)
            .map(|i| {
                self.data[i * self.dim..(i + 1) * self.dim]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Largest absolute eigenvalue, estimated by power iteration from the
    /// normalized all-ones vector.
    ///
    /// The estimate is the norm-growth ratio, which converges even when the
    /// extreme eigenvalues come in a +/- pair. Returns
    /// [`Error::NoConvergence`] if successive estimates still move by more
    /// than `tol * (1 + estimate)` after [`POWER_ITERATION_CAP`] iterations.
    pub fn spectral_radius(&self, tol: f64) -> Result<f64> {
        let n = self.dim;
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut prev = f64::INFINITY;
        for _ in 0..POWER_ITERATION_CAP {
            let w = self.matvec(&v);
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Ok(0.0);
            }
            if (norm - prev).abs() <= tol * (1.0 + norm) {
                return Ok(norm);
            }
            prev = norm;
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / norm;
            }
        }
        Err(Error::NoConvergence(POWER_ITERATION_CAP))
    }

    /// Write as plain CSV: one row per line, no header.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for i in 0..self.dim {
            for j in 0..self.dim {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", self.get(i, j));
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Load from plain CSV, validating squareness and symmetry.
    ///
    /// Asymmetric input (beyond [`CSV_SYMMETRY_TOL`]) is an error, not
    /// silently symmetrized.
    pub fn load_csv(path: &Path) -> Result<SymmetricMatrix> {
        let text = std::fs::read_to_string(path)?;
        let perr = |message: String| Error::Parse {
            path: path.display().to_string(),
            message,
        };
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|f| f.trim().parse::<f64>()).collect();
            match row {
                Ok(r) => rows.push(r),
                Err(e) => return Err(perr(format!("line {}: {e}", lineno + 1))),
            }
        }
        let dim = rows.len();
        if dim == 0 {
            return Err(perr("empty matrix file".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(perr(format!(
                    "row {} has {} fields, expected {dim} (matrix must be square)",
                    i + 1,
                    row.len()
                )));
            }
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (rows[i][j] - rows[j][i]).abs() > CSV_SYMMETRY_TOL {
                    return Err(perr(format!(
                        "asymmetric entries at ({},{}): {} vs {}",
                        i + 1,
                        j + 1,
                        rows[i][j],
                        rows[j][i]
                    )));
                }
            }
        }
        // Within tolerance: mirror the upper triangle so the stored matrix is
        // exactly symmetric.
        let mut m = SymmetricMatrix::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = rows[i][i];
            for j in (i + 1)..dim {
                m.set(i, j, rows[i][j]);
            }
        }
        Ok(m)
    }
}

/// Lower-triangular Cholesky factor of a positive definite matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    dim: usize,
    l: Vec<f64>,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry of the lower-triangular factor (zero above the diagonal).
    pub fn lower(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.l[i * self.dim + j]
        }
    }

    /// Solve `A x = b` where `A = L L^T`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        assert_eq!(b.len(), n);
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        x
    }

    /// Inverse of the factored matrix, symmetrized to remove solve round-off.
    pub fn inverse(&self) -> SymmetricMatrix {
        let n = self.dim;
        let mut cols = Vec::with_capacity(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            cols.push(self.solve(&e));
            e[j] = 0.0;
        }
        let mut inv = SymmetricMatrix::zeros(n);
        for i in 0..n {
            inv.data[i * n + i] = cols[i][i];
            for j in (i + 1)..n {
                inv.set(i, j, 0.5 * (cols[j][i] + cols[i][j]));
            }
        }
        inv
    }

    /// Log-determinant of the factored matrix: twice the sum of log pivots.
    pub fn logdet(&self) -> f64 {
        let n = self.dim;
        2.0 * (0..n).map(|i| self.l[i * n + i].ln()).sum::<f64>()
    }

    /// Apply the lower factor: `L z`.
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        let n = self.dim;
        assert_eq!(z.len(), n);
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[i] = (0..=i).map(|k| self.l[i * n + k] * z[k]).sum();
        }
        x
    }

    /// Reconstruct `L L^T`.
    pub fn reconstruct(&self) -> SymmetricMatrix {
        let n = self.dim;
        let mut m = SymmetricMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = (0..=j).map(|k| self.l[i * n + k] * self.l[j * n + k]).sum();
                m.set(i, j, v);
            }
        }
        m
    }
}

/// Plain dense rectangular matrix, used for Hessian submatrices.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// Operator infinity norm (max absolute row sum); zero for empty shapes.
    pub fn linf_operator_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}
