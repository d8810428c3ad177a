//! Synthetic ground-truth generation: grid Markov graph, random sign edge
//! weights, uniform diagonal weighting chosen for positive definiteness, and
//! opposite-sign residual edges on a random fraction of the Markov edges.

use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;
use crate::model::{compose, support_off, GroundTruthModel, SupportSet};
use crate::rng::RngStream;

/// Generation retry budget when the composed covariance fails positive
/// definiteness.
pub const COMPOSE_RETRY_BUDGET: usize = 100;

/// Default seed used by the CLI and the experiment harness. Chosen so the
/// default 8x8 model lands in the regime where the Markov component is
/// walk-summable while the composite precision matrix is not.
pub const DEFAULT_SEED: u64 = 3;

/// Configuration for [`gen_model`].
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub rows: usize,
    pub cols: usize,
    /// Magnitude of every Markov edge weight (sign is random).
    pub edge_weight_magnitude: f64,
    /// Fraction of Markov edges that receive a residual entry.
    pub residual_fraction: f64,
    /// Magnitude of every residual entry (sign opposes the Markov entry).
    pub residual_magnitude: f64,
    /// Minimum-eigenvalue target for the generated precision matrix.
    pub pd_margin: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            rows: 8,
            cols: 8,
            edge_weight_magnitude: 0.5,
            residual_fraction: 0.2,
            residual_magnitude: 0.2,
            pd_margin: 0.25,
            seed: DEFAULT_SEED,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.rows * self.cols < 1 {
            return Err(Error::InvalidInput(
                "grid must have at least one node".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.residual_fraction) {
            return Err(Error::InvalidInput(
                "residual_fraction must lie in [0, 1]".into(),
            ));
        }
        if self.edge_weight_magnitude <= 0.0
            || self.residual_magnitude <= 0.0
            || self.pd_margin <= 0.0
        {
            return Err(Error::InvalidInput(
                "magnitudes and pd_margin must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Four-nearest-neighbor grid on `rows x cols` nodes. Node `(r, c)` maps to
/// index `r * cols + c`; edges connect horizontal and vertical neighbors.
pub fn grid_graph(rows: usize, cols: usize) -> SupportSet {
    let mut s = SupportSet::new(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let idx = r * cols + c;
            if c + 1 < cols {
                s.insert(idx, idx + 1).expect("grid edge in range");
            }
            if r + 1 < rows {
                s.insert(idx, idx + cols).expect("grid edge in range");
            }
        }
    }
    s
}

/// Smallest shift `t` (to within bisection accuracy plus a small safety bump)
/// such that `off + t I` passes the Cholesky positive-definiteness test;
/// equals `|lambda_min(off)|` since a symmetric zero-diagonal matrix has
/// `lambda_min <= 0`.
fn min_shift_for_pd(off: &SymmetricMatrix) -> f64 {
    let passes = |t: f64| -> bool {
        let mut shifted = off.clone();
        for i in 0..off.dim() {
            shifted.set(i, i, off.get(i, i) + t);
        }
        shifted.cholesky().is_ok()
    };
    let mut lo = 0.0;
    let mut hi = off.linf_operator_norm() + 1.0;
    debug_assert!(passes(hi));
    for _ in 0..100 {
        if hi - lo <= 1e-13 * (1.0 + hi) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if passes(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Random sign-weighted precision matrix on the given support.
///
/// Every supported off-diagonal entry is `+magnitude` or `-magnitude` with
/// equal probability; every diagonal entry equals the single value
/// `|lambda_min(O)| + pd_margin` where `O` is the off-diagonal part, so the
/// minimum eigenvalue lands at `pd_margin`. Verified by a Cholesky test of
/// `result - pd_margin * I`.
pub fn gen_markov(
    support: &SupportSet,
    magnitude: f64,
    pd_margin: f64,
    rng: &mut RngStream,
) -> SymmetricMatrix {
    assert!(magnitude > 0.0 && pd_margin > 0.0);
    let p = support.dim();
    let mut off = SymmetricMatrix::zeros(p);
    for (i, j) in support.iter() {
        off.set(i, j, rng.sign() * magnitude);
    }
    let base_shift = min_shift_for_pd(&off);
    for bump in [1e-9, 1e-8, 1e-7, 1e-6] {
        let c = base_shift + bump * (1.0 + base_shift) + pd_margin;
        let mut j_m = off.clone();
        let mut check = off.clone();
        for i in 0..p {
            j_m.set(i, i, c);
            check.set(i, i, c - pd_margin);
        }
        if check.cholesky().is_ok() {
            return j_m;
        }
    }
    unreachable!("diagonal shift search is monotone; a bump in range must pass");
}

/// Residual covariance on a random fraction of the Markov edges.
///
/// Selects `round(fraction * |E_M|)` edges uniformly without replacement;
/// each selected entry gets magnitude `magnitude` with sign opposite to the
/// overlapping Markov entry. Diagonal is zero.
pub fn gen_residual(
    j_m: &SymmetricMatrix,
    fraction: f64,
    magnitude: f64,
    rng: &mut RngStream,
) -> SymmetricMatrix {
    assert!((0.0..=1.0).contains(&fraction) && magnitude > 0.0);
    let edges: Vec<(usize, usize)> = support_off(j_m, 0.0).iter().collect();
    let count = (fraction * edges.len() as f64).round() as usize;
    let mut pool = edges;
    rng.shuffle_prefix(&mut pool, count);
    let mut sigma_r = SymmetricMatrix::zeros(j_m.dim());
    for &(i, j) in &pool[..count] {
        sigma_r.set(i, j, -j_m.get(i, j).signum() * magnitude);
    }
    sigma_r
}

/// Full generation pipeline: grid graph, Markov weights, residual edges,
/// composition. Residual placement is re-drawn (fresh edge selection, same
/// stream) up to [`COMPOSE_RETRY_BUDGET`] times if the composite covariance
/// fails positive definiteness. Deterministic given the seed.
pub fn gen_model(config: &SynthConfig) -> Result<GroundTruthModel> {
    config.validate()?;
    let mut rng = RngStream::from_seed(config.seed);
    let support = grid_graph(config.rows, config.cols);
    let j_m = gen_markov(
        &support,
        config.edge_weight_magnitude,
        config.pd_margin,
        &mut rng,
    );
    let mut composed = None;
    for _ in 0..COMPOSE_RETRY_BUDGET {
        let sigma_r = gen_residual(
            &j_m,
            config.residual_fraction,
            config.residual_magnitude,
            &mut rng,
        );
        match compose(&j_m, &sigma_r) {
            Ok(m) => {
                composed = Some(m);
                break;
            }
            Err(Error::CompositeNotPD) => continue,
            Err(e) => return Err(e),
        }
    }
    let mut model = composed.ok_or(Error::GenerationFailed(COMPOSE_RETRY_BUDGET))?;
    model.mean = Some((0..model.dim()).map(|_| rng.uniform()).collect());
    Ok(model)
}

/// Metadata pairs describing a generation run, for the model directory.
pub fn metadata_pairs(config: &SynthConfig) -> Vec<(String, String)> {
    vec![
        ("seed".into(), config.seed.to_string()),
        ("rows".into(), config.rows.to_string()),
        ("cols".into(), config.cols.to_string()),
        (
            "edge_weight_magnitude".into(),
            config.edge_weight_magnitude.to_string(),
        ),
        (
            "residual_fraction".into(),
            config.residual_fraction.to_string(),
        ),
        (
            "residual_magnitude".into(),
            config.residual_magnitude.to_string(),
        ),
        ("pd_margin".into(), config.pd_margin.to_string()),
    ]
}
