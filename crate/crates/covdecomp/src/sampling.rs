//! Gaussian sampling from a ground-truth covariance and the sample
//! covariance matrix.
//!
//! Samples are zero-mean: `x = L z` with `L` the Cholesky factor of the
//! covariance and `z` standard normal. The sample covariance is the
//! uncentered second-moment estimator `(1/n) sum_k x_k x_k^T` (divisor `n`,
//! no mean subtraction); a centered variant exists for experimentation only.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;
use crate::rng::RngStream;

/// A batch of `n` samples of dimension `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

impl SampleSet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("sample set must be nonempty".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimMismatch(row.len(), dim));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            n: rows.len(),
            dim,
            data,
        })
    }

    /// CSV persistence: one sample per line.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for k in 0..self.n {
            let row = self.sample(k);
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
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
            rows.push(row.map_err(|e| perr(format!("line {}: {e}", lineno + 1)))?);
        }
        if rows.is_empty() {
            return Err(perr("empty sample file".into()));
        }
        let dim = rows[0].len();
        Self::from_rows(dim, &rows)
    }
}

/// Draw `n` i.i.d. zero-mean Gaussian samples with the given covariance.
pub fn sample_gaussian(
    sigma: &SymmetricMatrix,
    n: usize,
    rng: &mut RngStream,
) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    let chol = sigma.cholesky()?;
    let p = sigma.dim();
    let mut data = Vec::with_capacity(n * p);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        for zi in z.iter_mut() {
            *zi = rng.normal();
        }
        data.extend_from_slice(&chol.mul_lower(&z));
    }
    Ok(SampleSet { n, dim: p, data })
}

/// Uncentered sample covariance `(1/n) sum_k x_k x_k^T`.
pub fn sample_covariance(samples: &SampleSet) -> SymmetricMatrix {
    let p = samples.dim;
    let mut acc = vec![0.0; p * p];
    for k in 0..samples.n {
        let x = samples.sample(k);
        for i in 0..p {
            let xi = x[i];
            for j in i..p {
                acc[i * p + j] += xi * x[j];
            }
        }
    }
    let inv_n = 1.0 / samples.n as f64;
    let mut m = SymmetricMatrix::zeros(p);
    for i in 0..p {
        for j in i..p {
            m.set(i, j, acc[i * p + j] * inv_n);
        }
    }
    m
}

/// Centered variant (subtracts the sample mean, still divisor `n`).
/// Experimentation only; the estimator above is the one under test.
pub fn sample_covariance_centered(samples: &SampleSet) -> SymmetricMatrix {
    let p = samples.dim;
    let mut mean = vec![0.0; p];
    for k in 0..samples.n {
        for (mi, xi) in mean.iter_mut().zip(samples.sample(k)) {
            *mi += xi;
        }
    }
    for mi in mean.iter_mut() {
        *mi /= samples.n as f64;
    }
    let mut acc = vec![0.0; p * p];
    for k in 0..samples.n {
        let x = samples.sample(k);
        for i in 0..p {
            let xi = x[i] - mean[i];
            for j in i..p {
                acc[i * p + j] += xi * (x[j] - mean[j]);
            }
        }
    }
    let inv_n = 1.0 / samples.n as f64;
    let mut m = SymmetricMatrix::zeros(p);
    for i in 0..p {
        for j in i..p {
            m.set(i, j, acc[i * p + j] * inv_n);
        }
    }
    m
}
