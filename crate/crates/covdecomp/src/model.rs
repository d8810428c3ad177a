//! Domain types for the composite model and support-set combinatorics.
//!
//! A ground-truth model is a triple `(J_M, Sigma_R, Sigma)` with
//! `Sigma = J_M^{-1} + Sigma_R`: a Gaussian Markov component given by a
//! positive definite precision matrix, plus a sparse residual covariance with
//! zero diagonal whose support sits inside the Markov edge set.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;

/// Set of unordered node pairs (edges) over `dim` nodes, stored with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet {
    dim: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl SupportSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            edges: BTreeSet::new(),
        }
    }

    pub fn from_edges(dim: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut s = Self::new(dim);
        for (i, j) in edges {
            s.insert(i, j)?;
        }
        Ok(s)
    }

    /// Insert an edge, normalizing to `i < j`. Diagonal pairs are rejected.
    pub fn insert(&mut self, i: usize, j: usize) -> Result<()> {
        if i == j || i >= self.dim || j >= self.dim {
            return Err(Error::IndexOutOfRange(i, j, self.dim));
        }
        self.edges.insert((i.min(j), i.max(j)));
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    /// Edges in canonical `(i, j)` order with `i < j`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    /// Maximum number of edges incident on any single node.
    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0usize; self.dim];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }

    /// Edge-list CSV: one `i,j` line per edge, 1-based, `i < j`.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "{},{}", i + 1, j + 1);
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load_csv(path: &Path, dim: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let perr = |message: String| Error::Parse {
            path: path.display().to_string(),
            message,
        };
        let mut s = Self::new(dim);
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let parse = |f: Option<&str>| -> std::result::Result<usize, String> {
                f.ok_or_else(|| "missing field".to_string())?
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| e.to_string())
            };
            let i = parse(fields.next()).map_err(|e| perr(format!("line {}: {e}", lineno + 1)))?;
            let j = parse(fields.next()).map_err(|e| perr(format!("line {}: {e}", lineno + 1)))?;
            if i == 0 || j == 0 {
                return Err(perr(format!("line {}: indices are 1-based", lineno + 1)));
            }
            s.insert(i - 1, j - 1)?;
        }
        Ok(s)
    }
}

/// Scale-aware default cutoff for deciding that an estimated entry is nonzero.
pub fn default_support_threshold(m: &SymmetricMatrix) -> f64 {
    1e-6 * (1.0 + m.elementwise_linf())
}

/// Off-diagonal support of `m`: pairs `(i, j)`, `i < j`, with
/// `|m(i,j)| > threshold`.
pub fn support_off(m: &SymmetricMatrix, threshold: f64) -> SupportSet {
    let mut s = SupportSet::new(m.dim());
    for i in 0..m.dim() {
        for j in (i + 1)..m.dim() {
            if m.get(i, j).abs() > threshold {
                s.edges.insert((i, j));
            }
        }
    }
    s
}

/// Partition of all ordered node pairs into the residual support `S_R`, the
/// rest of the Markov support `S`, and the Markov complement `S_M^c`.
///
/// Ordered pairs are stored sorted lexicographically; this is the row/column
/// ordering used for Hessian submatrices. `S_M` is the Markov edge set plus
/// every diagonal pair, and `S = S_M \ S_R`.
#[derive(Debug, Clone)]
pub struct SupportPartition {
    dim: usize,
    s_m: Vec<(usize, usize)>,
    s_r: Vec<(usize, usize)>,
    s: Vec<(usize, usize)>,
    s_m_complement: Vec<(usize, usize)>,
}

impl SupportPartition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Markov support as ordered pairs, diagonal included.
    pub fn s_m(&self) -> &[(usize, usize)] {
        &self.s_m
    }

    /// Residual support as ordered pairs.
    pub fn s_r(&self) -> &[(usize, usize)] {
        &self.s_r
    }

    /// Markov-only support `S = S_M \ S_R` as ordered pairs.
    pub fn s(&self) -> &[(usize, usize)] {
        &self.s
    }

    /// Complement of the Markov support as ordered pairs.
    pub fn s_m_complement(&self) -> &[(usize, usize)] {
        &self.s_m_complement
    }

    /// Residual support as unordered edges.
    pub fn s_r_edges(&self) -> SupportSet {
        let mut s = SupportSet::new(self.dim);
        for &(i, j) in &self.s_r {
            if i < j {
                s.edges.insert((i, j));
            }
        }
        s
    }
}

/// Build the `{S_R, S, S_M^c}` partition from the supports of `j_m` and
/// `sigma_r` at the given threshold.
///
/// Fails with [`Error::SupportViolation`] when a residual edge lies outside
/// the Markov support.
pub fn build_partition(
    j_m: &SymmetricMatrix,
    sigma_r: &SymmetricMatrix,
    threshold: f64,
) -> Result<SupportPartition> {
    if j_m.dim() != sigma_r.dim() {
        return Err(Error::DimMismatch(j_m.dim(), sigma_r.dim()));
    }
    let p = j_m.dim();
    let markov = support_off(j_m, threshold);
    let residual = support_off(sigma_r, threshold);
    for (i, j) in residual.iter() {
        if !markov.contains(i, j) {
            return Err(Error::SupportViolation(i, j));
        }
    }
    let mut s_m = Vec::new();
    let mut s_r = Vec::new();
    let mut s = Vec::new();
    let mut s_m_complement = Vec::new();
    for i in 0..p {
        for j in 0..p {
            if i == j {
                s_m.push((i, j));
                s.push((i, j));
            } else if markov.contains(i, j) {
                s_m.push((i, j));
                if residual.contains(i, j) {
                    s_r.push((i, j));
                } else {
                    s.push((i, j));
                }
            } else {
                s_m_complement.push((i, j));
            }
        }
    }
    Ok(SupportPartition {
        dim: p,
        s_m,
        s_r,
        s,
        s_m_complement,
    })
}

/// Ground-truth composite model: precision component, residual covariance,
/// their composition, and the box level `lambda_star = ||J_M||_inf,off`.
#[derive(Debug, Clone)]
pub struct GroundTruthModel {
    pub j_m: SymmetricMatrix,
    pub sigma_r: SymmetricMatrix,
    pub sigma: SymmetricMatrix,
    pub lambda_star: f64,
    /// Optional node means; only inference uses them (as `h = J mu`).
    pub mean: Option<Vec<f64>>,
}

/// Compose a model from its parts, validating positive definiteness of the
/// precision and of the resulting covariance.
pub fn compose(j_m: &SymmetricMatrix, sigma_r: &SymmetricMatrix) -> Result<GroundTruthModel> {
    if j_m.dim() != sigma_r.dim() {
        return Err(Error::DimMismatch(j_m.dim(), sigma_r.dim()));
    }
    for i in 0..sigma_r.dim() {
        if sigma_r.get(i, i) != 0.0 {
            return Err(Error::InvalidInput(format!(
                "residual covariance has nonzero diagonal at {i}"
            )));
        }
    }
    let sigma_m = j_m.inverse_spd()?;
    let sigma = sigma_m.add(sigma_r)?;
    if sigma.cholesky().is_err() {
        return Err(Error::CompositeNotPD);
    }
    Ok(GroundTruthModel {
        j_m: j_m.clone(),
        sigma_r: sigma_r.clone(),
        sigma,
        lambda_star: j_m.elementwise_linf_off(),
        mean: None,
    })
}

impl GroundTruthModel {
    pub fn dim(&self) -> usize {
        self.j_m.dim()
    }

    /// Persist as a directory of matrix CSVs plus a key=value metadata file.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        self.save_dir_with_metadata(dir, &[])
    }

    /// Like [`save_dir`](Self::save_dir) with extra metadata key=value pairs
    /// (generator parameters, seed).
    pub fn save_dir_with_metadata(&self, dir: &Path, extra: &[(String, String)]) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.j_m.save_csv(&dir.join("j_m.csv"))?;
        self.sigma_r.save_csv(&dir.join("sigma_r.csv"))?;
        self.sigma.save_csv(&dir.join("sigma.csv"))?;
        if let Some(mean) = &self.mean {
            let mut out = String::new();
            for v in mean {
                let _ = writeln!(out, "{v}");
            }
            std::fs::write(dir.join("mean.csv"), out)?;
        }
        let mut meta = String::new();
        let _ = writeln!(meta, "p={}", self.dim());
        let _ = writeln!(meta, "lambda_star={}", self.lambda_star);
        for (k, v) in extra {
            let _ = writeln!(meta, "{k}={v}");
        }
        std::fs::write(dir.join("metadata.txt"), meta)?;
        Ok(())
    }

    /// Load a model directory, validating the composition identity.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let j_m = SymmetricMatrix::load_csv(&dir.join("j_m.csv"))?;
        let sigma_r = SymmetricMatrix::load_csv(&dir.join("sigma_r.csv"))?;
        let sigma = SymmetricMatrix::load_csv(&dir.join("sigma.csv"))?;
        if j_m.dim() != sigma_r.dim() || j_m.dim() != sigma.dim() {
            return Err(Error::DimMismatch(j_m.dim(), sigma.dim()));
        }
        let mean_path = dir.join("mean.csv");
        let mean = if mean_path.exists() {
            let text = std::fs::read_to_string(&mean_path)?;
            let vals: std::result::Result<Vec<f64>, _> = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| l.trim().parse::<f64>())
                .collect();
            let vals = vals.map_err(|e| Error::Parse {
                path: mean_path.display().to_string(),
                message: e.to_string(),
            })?;
            if vals.len() != j_m.dim() {
                return Err(Error::Parse {
                    path: mean_path.display().to_string(),
                    message: format!("expected {} values, got {}", j_m.dim(), vals.len()),
                });
            }
            Some(vals)
        } else {
            None
        };
        // Composition must hold: sigma = j_m^{-1} + sigma_r.
        let sigma_m = j_m.inverse_spd()?;
        for i in 0..j_m.dim() {
            for j in 0..j_m.dim() {
                let expect = sigma_m.get(i, j) + sigma_r.get(i, j);
                if (sigma.get(i, j) - expect).abs() > 1e-9 {
                    return Err(Error::Parse {
                        path: dir.display().to_string(),
                        message: format!(
                            "sigma.csv is not j_m^-1 + sigma_r at ({i},{j}): {} vs {expect}",
                            sigma.get(i, j)
                        ),
                    });
                }
            }
        }
        let lambda_star = j_m.elementwise_linf_off();
        Ok(GroundTruthModel {
            j_m,
            sigma_r,
            sigma,
            lambda_star,
            mean,
        })
    }
}

/// Read a key=value metadata file into pairs, preserving order.
pub fn load_metadata(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => pairs.push((k.trim().to_string(), v.trim().to_string())),
            None => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    message: format!("expected key=value, got {line:?}"),
                })
            }
        }
    }
    Ok(pairs)
}

/// Solver output: estimated precision component, its inverse, the recovered
/// residual covariance, and convergence diagnostics.
#[derive(Debug, Clone)]
pub struct DecompositionEstimate {
    pub j_m_hat: SymmetricMatrix,
    pub sigma_m_hat: SymmetricMatrix,
    pub sigma_r_hat: SymmetricMatrix,
    pub iterations: usize,
    pub final_objective: f64,
    /// Largest of the KKT residuals at the returned iterate.
    pub kkt_residual: f64,
}
