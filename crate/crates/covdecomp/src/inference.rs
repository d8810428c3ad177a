//! Gaussian loopy belief propagation on information-form models, with
//! walk-summability diagnostics.
//!
//! Messages are pairwise and carry scalar (precision, potential) parameters.
//! The schedule is synchronous flooding: every directed message is updated
//! from the previous iteration's messages, then node beliefs are formed and
//! compared against the exact moments to build per-iteration error traces.
//! Walk-summability is the spectral-radius test on the absolute partial
//! correlation matrix; below one, the mean estimates converge.

use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;

/// Message magnitude beyond which the run is declared divergent.
pub const DIVERGENCE_MAGNITUDE: f64 = 1e12;

/// Information-form Gaussian model: precision matrix and potential vector.
#[derive(Debug, Clone)]
pub struct InfoModel {
    pub j: SymmetricMatrix,
    pub h: Vec<f64>,
}

impl InfoModel {
    pub fn new(j: SymmetricMatrix, h: Vec<f64>) -> Result<Self> {
        if h.len() != j.dim() {
            return Err(Error::DimMismatch(h.len(), j.dim()));
        }
        Ok(Self { j, h })
    }

    /// Build from a precision matrix and a mean vector, via `h = J mu`.
    pub fn from_mean(j: SymmetricMatrix, mean: &[f64]) -> Result<Self> {
        if mean.len() != j.dim() {
            return Err(Error::DimMismatch(mean.len(), j.dim()));
        }
        let h = j.matvec(mean);
        Ok(Self { j, h })
    }

    pub fn dim(&self) -> usize {
        self.j.dim()
    }
}

/// Per-iteration error trace of a belief propagation run.
#[derive(Debug, Clone)]
pub struct LbpTrace {
    pub iterations: usize,
    /// Average absolute node-mean error against the exact moments.
    pub mean_error: Vec<f64>,
    /// Average absolute node-variance error against the exact moments.
    pub variance_error: Vec<f64>,
    pub converged: bool,
    /// Spectral radius of the absolute partial correlation matrix.
    pub rho_bar: f64,
}

/// Entrywise absolute partial correlations `|J_ij| / sqrt(J_ii J_jj)` with a
/// zero diagonal.
pub fn partial_correlation_abs(j: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let p = j.dim();
    for i in 0..p {
        if j.get(i, i) <= 0.0 {
            return Err(Error::InvalidInput(format!("non-positive diagonal at {i}")));
        }
    }
    let mut r = SymmetricMatrix::zeros(p);
    for i in 0..p {
        for k in (i + 1)..p {
            r.set(i, k, j.get(i, k).abs() / (j.get(i, i) * j.get(k, k)).sqrt());
        }
    }
    Ok(r)
}

/// Walk-summability test: spectral radius of the absolute partial
/// correlation matrix, and whether it lies below one.
pub fn walk_summable(j: &SymmetricMatrix) -> Result<(bool, f64)> {
    let rho = partial_correlation_abs(j)?.spectral_radius(1e-9)?;
    Ok((rho < 1.0, rho))
}

/// Exact marginal means and variances: `mu = J^{-1} h`, variances from the
/// diagonal of `J^{-1}`.
pub fn exact_moments(model: &InfoModel) -> Result<(Vec<f64>, Vec<f64>)> {
    let chol = model.j.cholesky()?;
    let means = chol.solve(&model.h);
    let inv = chol.inverse();
    let variances = (0..model.dim()).map(|i| inv.get(i, i)).collect();
    Ok((means, variances))
}

/// Synchronous-flooding Gaussian belief propagation.
///
/// Messages start at zero. The run converges when the largest message
/// parameter change drops below `tol`; it diverges (reported as
/// `converged = false`, trace truncated) when any belief precision turns
/// non-positive or any parameter exceeds [`DIVERGENCE_MAGNITUDE`] or stops
/// being finite.
pub fn gabp_run(model: &InfoModel, max_iterations: usize, tol: f64) -> Result<LbpTrace> {
    gabp_run_damped(model, max_iterations, tol, 0.0)
}

/// [`gabp_run`] with message damping (`new = (1-d) computed + d old`);
/// exploration only, zero damping is the reference schedule.
pub fn gabp_run_damped(
    model: &InfoModel,
    max_iterations: usize,
    tol: f64,
    damping: f64,
) -> Result<LbpTrace> {
    if !(0.0..1.0).contains(&damping) {
        return Err(Error::InvalidInput("damping must lie in [0, 1)".into()));
    }
    let p = model.dim();
    let (exact_means, exact_vars) = exact_moments(model)?;
    let rho_bar = partial_correlation_abs(&model.j)?.spectral_radius(1e-9)?;

    // Directed edges over the nonzero off-diagonal support.
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for i in 0..p {
        for k in (i + 1)..p {
            if model.j.get(i, k) != 0.0 {
                edges.push((i, k));
                edges.push((k, i));
            }
        }
    }
    let ne = edges.len();
    let index: std::collections::HashMap<(usize, usize), usize> =
        edges.iter().enumerate().map(|(e, &d)| (d, e)).collect();
    let mut reverse = vec![0usize; ne];
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); p];
    for (e, &(u, v)) in edges.iter().enumerate() {
        incoming[v].push(e);
        reverse[e] = index[&(v, u)];
    }

    let mut dj = vec![0.0_f64; ne];
    let mut dh = vec![0.0_f64; ne];
    let mut mean_error = Vec::new();
    let mut variance_error = Vec::new();
    let mut converged = false;

    for _iter in 0..max_iterations {
        // Node totals under the current messages.
        let mut tot_j: Vec<f64> = (0..p).map(|i| model.j.get(i, i)).collect();
        let mut tot_h: Vec<f64> = model.h.clone();
        for v in 0..p {
            for &e in &incoming[v] {
                tot_j[v] += dj[e];
                tot_h[v] += dh[e];
            }
        }

        // Flooding update: condition on the sender's belief minus the
        // reverse message, marginalize through the edge weight.
        let mut new_dj = vec![0.0_f64; ne];
        let mut new_dh = vec![0.0_f64; ne];
        let mut max_change = 0.0_f64;
        let mut broken = false;
        for (e, &(u, v)) in edges.iter().enumerate() {
            let j_cond = tot_j[u] - dj[reverse[e]];
            let h_cond = tot_h[u] - dh[reverse[e]];
            let w = model.j.get(u, v);
            let nj = -w * w / j_cond;
            let nh = -w * h_cond / j_cond;
            if !nj.is_finite()
                || !nh.is_finite()
                || nj.abs() > DIVERGENCE_MAGNITUDE
                || nh.abs() > DIVERGENCE_MAGNITUDE
            {
                broken = true;
                break;
            }
            let nj = (1.0 - damping) * nj + damping * dj[e];
            let nh = (1.0 - damping) * nh + damping * dh[e];
            max_change = max_change.max((nj - dj[e]).abs()).max((nh - dh[e]).abs());
            new_dj[e] = nj;
            new_dh[e] = nh;
        }
        if broken {
            break;
        }
        dj = new_dj;
        dh = new_dh;

        // Beliefs under the fresh messages.
        let mut belief_ok = true;
        let mut mean_err = 0.0;
        let mut var_err = 0.0;
        for v in 0..p {
            let mut bj = model.j.get(v, v);
            let mut bh = model.h[v];
            for &e in &incoming[v] {
                bj += dj[e];
                bh += dh[e];
            }
            if bj <= 0.0 || !bj.is_finite() || !bh.is_finite() {
                belief_ok = false;
                break;
            }
            mean_err += (bh / bj - exact_means[v]).abs();
            var_err += (1.0 / bj - exact_vars[v]).abs();
        }
        if !belief_ok {
            break;
        }
        mean_error.push(mean_err / p as f64);
        variance_error.push(var_err / p as f64);

        if max_change < tol {
            converged = true;
            break;
        }
    }

    Ok(LbpTrace {
        iterations: mean_error.len(),
        mean_error,
        variance_error,
        converged,
        rho_bar,
    })
}

/// Run belief propagation on a Markov component and on the composite model
/// with identical settings, for side-by-side error traces.
pub fn lbp_compare(
    model_markov: &InfoModel,
    model_composite: &InfoModel,
    iterations: usize,
    tol: f64,
) -> Result<(LbpTrace, LbpTrace)> {
    if model_markov.dim() != model_composite.dim() {
        return Err(Error::DimMismatch(
            model_markov.dim(),
            model_composite.dim(),
        ));
    }
    let markov = gabp_run(model_markov, iterations, tol)?;
    let composite = gabp_run(model_composite, iterations, tol)?;
    Ok((markov, composite))
}
