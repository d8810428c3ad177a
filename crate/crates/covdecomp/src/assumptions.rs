//! Identifiability and sample-consistency condition checks.
//!
//! The exact-statistics conditions: positive definite precision component,
//! residual entries confined to the maximal-magnitude precision entries,
//! zero residual diagonal, and opposite signs on overlapping entries. The
//! sample conditions bound submatrices of the log-det Hessian
//! `Gamma = Sigma_M (x) Sigma_M` (a p^2 x p^2 matrix indexed by ordered node
//! pairs, never materialized in full) over the `{S_R, S, S_M^c}` partition:
//! mutual incoherence, a cross-block contraction bound, and covariance
//! control.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, SymmetricMatrix};
use crate::model::{build_partition, support_off, GroundTruthModel, SupportPartition};

/// Conditioning guard for the `Gamma_SS` block: a pivot-ratio estimate above
/// this bound is treated as singular.
pub const GAMMA_CONDITION_BOUND: f64 = 1e12;

/// Upper search bound for the covariance-control parameter `m`.
pub const M_SEARCH_CAP: u64 = 1_000_000;

/// Box level of a precision matrix: its maximum absolute off-diagonal entry.
pub fn lambda_star(j_m: &SymmetricMatrix) -> f64 {
    j_m.elementwise_linf_off()
}

/// Results of the exact-statistics checks.
#[derive(Debug, Clone)]
pub struct ExactChecks {
    /// Precision component is positive definite.
    pub a0_pd: bool,
    /// Box level `||J_M||_inf,off`.
    pub a1_lambda_star: f64,
    /// Headline support condition: zero residual diagonal and every residual
    /// entry sitting on a maximal-magnitude precision entry.
    pub a2_support_ok: bool,
    pub a2_zero_diag: bool,
    /// Every nonzero residual entry sits where `|J_M| = lambda_star`.
    pub a2_residual_on_max: bool,
    /// Converse coverage, reported for diagnosis only: every off-diagonal
    /// with `|J_M| = lambda_star` carries a nonzero residual. Models whose
    /// edge weights share a single magnitude fail this direction by design
    /// whenever only a fraction of edges carry residuals.
    pub a2_max_covered: bool,
    /// Signs of overlapping residual and precision entries oppose.
    pub a3_signs_ok: bool,
}

/// Exact-statistics checks on a `(J_M, Sigma_R)` pair. Magnitude equality
/// against the box level uses the relative tolerance `tol`.
pub fn check_exact(
    j_m: &SymmetricMatrix,
    sigma_r: &SymmetricMatrix,
    tol: f64,
) -> Result<ExactChecks> {
    if j_m.dim() != sigma_r.dim() {
        return Err(Error::DimMismatch(j_m.dim(), sigma_r.dim()));
    }
    let p = j_m.dim();
    let lam = lambda_star(j_m);
    let at_max = |v: f64| (v.abs() - lam).abs() <= tol * (1.0 + lam);

    let a0_pd = j_m.cholesky().is_ok();
    let mut a2_zero_diag = true;
    let mut a2_residual_on_max = true;
    let mut a2_max_covered = true;
    let mut a3_signs_ok = true;
    for i in 0..p {
        if sigma_r.get(i, i) != 0.0 {
            a2_zero_diag = false;
        }
        for j in 0..p {
            if i == j {
                continue;
            }
            let r = sigma_r.get(i, j);
            let jv = j_m.get(i, j);
            if r != 0.0 && !at_max(jv) {
                a2_residual_on_max = false;
            }
            if lam > 0.0 && at_max(jv) && r == 0.0 {
                a2_max_covered = false;
            }
            if r.signum() * jv.signum() > 0.0 && r != 0.0 && jv != 0.0 {
                a3_signs_ok = false;
            }
        }
    }
    Ok(ExactChecks {
        a0_pd,
        a1_lambda_star: lam,
        a2_support_ok: a2_zero_diag && a2_residual_on_max,
        a2_zero_diag,
        a2_residual_on_max,
        a2_max_covered,
        a3_signs_ok,
    })
}

fn check_pair(pair: (usize, usize), p: usize) -> Result<()> {
    if pair.0 >= p || pair.1 >= p {
        return Err(Error::IndexOutOfRange(pair.0, pair.1, p));
    }
    Ok(())
}

/// Submatrix of the Hessian `Gamma = Sigma_M (x) Sigma_M` restricted to the
/// given ordered-pair index sets: entry `((i,j),(k,l)) = Sigma_M(i,k) *
/// Sigma_M(j,l)`. Row/column order follows the order of the provided slices
/// (sorted lexicographically when they come from a partition).
pub fn hessian_submatrix(
    sigma_m: &SymmetricMatrix,
    rows: &[(usize, usize)],
    cols: &[(usize, usize)],
) -> Result<DenseMatrix> {
    let p = sigma_m.dim();
    for &pair in rows.iter().chain(cols) {
        check_pair(pair, p)?;
    }
    let mut m = DenseMatrix::zeros(rows.len(), cols.len());
    for (r, &(i, j)) in rows.iter().enumerate() {
        for (c, &(k, l)) in cols.iter().enumerate() {
            m.set(r, c, sigma_m.get(i, k) * sigma_m.get(j, l));
        }
    }
    Ok(m)
}

/// Incoherence and covariance-control quantities.
#[derive(Debug, Clone)]
pub struct IncoherenceChecks {
    /// `max(||G_cs G_ss^-1 G_sr - G_cr||_inf, ||G_cs G_ss^-1||_inf)` where
    /// blocks of `Gamma` are indexed by `c = S_M^c`, `s = S`, `r = S_R`.
    pub a4_incoherence_lhs: f64,
    /// Largest incoherence level `alpha` in (0, 1] that the bound admits, if
    /// any.
    pub a4_alpha: Option<f64>,
    /// `||G_ss^-1 G_sr||_inf`; must be below 1/4.
    pub a4_k_ssr: f64,
    /// `||G_ss||_inf`.
    pub a5_k_ss: f64,
    /// Smallest integer `m > 4` satisfying the covariance-control bound at
    /// `a4_alpha`, searched up to [`M_SEARCH_CAP`].
    pub a5_m_feasible: Option<u64>,
    /// Operator infinity norm of the Markov covariance.
    pub k_m: f64,
}

impl IncoherenceChecks {
    pub fn a4_pass(&self) -> bool {
        self.a4_alpha.is_some() && self.a4_k_ssr < 0.25
    }

    pub fn a5_pass(&self) -> bool {
        self.a5_m_feasible.is_some()
    }
}

/// Solve `G_ss X = B` column-by-column through a Cholesky factor of the
/// `Gamma_SS` block, guarding against ill-conditioning via the pivot ratio.
fn solve_gamma_ss(gamma_ss: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let n = gamma_ss.rows();
    let mut sym = SymmetricMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            // Gamma inherits symmetry; average to scrub representation noise.
            sym.set(i, j, 0.5 * (gamma_ss.get(i, j) + gamma_ss.get(j, i)));
        }
    }
    let chol = sym.cholesky().map_err(|_| Error::SingularGamma)?;
    let mut min_piv = f64::INFINITY;
    let mut max_piv = 0.0_f64;
    for i in 0..n {
        let piv = chol.lower(i, i) * chol.lower(i, i);
        min_piv = min_piv.min(piv);
        max_piv = max_piv.max(piv);
    }
    if max_piv / min_piv > GAMMA_CONDITION_BOUND {
        return Err(Error::SingularGamma);
    }
    let mut x = DenseMatrix::zeros(n, b.cols());
    let mut col = vec![0.0; n];
    for c in 0..b.cols() {
        for i in 0..n {
            col[i] = b.get(i, c);
        }
        let sol = chol.solve(&col);
        for i in 0..n {
            x.set(i, c, sol[i]);
        }
    }
    Ok(x)
}

fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.cols(), b.rows());
    let mut out = DenseMatrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for k in 0..a.cols() {
            let aik = a.get(i, k);
            if aik == 0.0 {
                continue;
            }
            for j in 0..b.cols() {
                out.set(i, j, out.get(i, j) + aik * b.get(k, j));
            }
        }
    }
    out
}

fn transpose(a: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(a.cols(), a.rows(), |i, j| a.get(j, i))
}

/// Compute the incoherence quantities for a Markov covariance and a support
/// partition. Empty `S_M^c` or `S_R` blocks contribute zero norms.
pub fn incoherence(
    sigma_m: &SymmetricMatrix,
    partition: &SupportPartition,
) -> Result<IncoherenceChecks> {
    let s = partition.s();
    let s_r = partition.s_r();
    let s_c = partition.s_m_complement();
    if s.is_empty() {
        return Err(Error::InvalidInput(
            "partition block S must be nonempty".into(),
        ));
    }

    let gamma_ss = hessian_submatrix(sigma_m, s, s)?;
    let a5_k_ss = gamma_ss.linf_operator_norm();
    let k_m = sigma_m.linf_operator_norm();

    // K_SSR = ||G_ss^-1 G_sr||_inf
    let a4_k_ssr = if s_r.is_empty() {
        0.0
    } else {
        let gamma_sr = hessian_submatrix(sigma_m, s, s_r)?;
        solve_gamma_ss(&gamma_ss, &gamma_sr)?.linf_operator_norm()
    };

    // lhs2 = ||G_cs G_ss^-1||_inf, computed as ||(G_ss^-1 G_sc)^T||_inf.
    // lhs1 = ||G_cs G_ss^-1 G_sr - G_cr||_inf.
    let (lhs1, lhs2) = if s_c.is_empty() {
        (0.0, 0.0)
    } else {
        let gamma_sc = hessian_submatrix(sigma_m, s, s_c)?;
        let x = solve_gamma_ss(&gamma_ss, &gamma_sc)?; // G_ss^-1 G_sc
        let y = transpose(&x); // G_cs G_ss^-1
        let lhs2 = y.linf_operator_norm();
        let lhs1 = if s_r.is_empty() {
            0.0
        } else {
            let gamma_sr = hessian_submatrix(sigma_m, s, s_r)?;
            let gamma_cr = hessian_submatrix(sigma_m, s_c, s_r)?;
            let prod = matmul(&y, &gamma_sr);
            let diff = DenseMatrix::from_fn(prod.rows(), prod.cols(), |i, j| {
                prod.get(i, j) - gamma_cr.get(i, j)
            });
            diff.linf_operator_norm()
        };
        (lhs1, lhs2)
    };

    let a4_incoherence_lhs = lhs1.max(lhs2);
    let a4_alpha = if a4_incoherence_lhs < 1.0 {
        Some(1.0 - a4_incoherence_lhs)
    } else {
        None
    };

    let a5_m_feasible = a4_alpha.and_then(|alpha| {
        (5..=M_SEARCH_CAP).find(|&m| {
            let m = m as f64;
            let denom = 4.0 * (m - (m - 1.0) * alpha);
            denom > 0.0 && a5_k_ss <= (m - 4.0) * alpha / denom
        })
    });

    Ok(IncoherenceChecks {
        a4_incoherence_lhs,
        a4_alpha,
        a4_k_ssr,
        a5_k_ss,
        a5_m_feasible,
        k_m,
    })
}

/// Combined report over all conditions for a ground-truth model.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub dim: usize,
    pub a0_pd: bool,
    pub a1_lambda_star: f64,
    pub a2_support_ok: bool,
    pub a2_zero_diag: bool,
    pub a2_residual_on_max: bool,
    pub a2_max_covered: bool,
    pub a3_signs_ok: bool,
    pub a4_incoherence_lhs: f64,
    pub a4_alpha: Option<f64>,
    pub a4_k_ssr: f64,
    pub a5_k_ss: f64,
    pub a5_m_feasible: Option<u64>,
    pub k_m: f64,
    /// Maximum Markov node degree.
    pub degree: usize,
    /// Smallest absolute precision entry over the Markov edge set (zero when
    /// there are no edges).
    pub j_min: f64,
    /// Smallest absolute residual entry over the residual support (zero when
    /// empty).
    pub sigma_r_min: f64,
}

impl AssumptionReport {
    pub fn a4_pass(&self) -> bool {
        self.a4_alpha.is_some() && self.a4_k_ssr < 0.25
    }

    pub fn a5_pass(&self) -> bool {
        self.a5_m_feasible.is_some()
    }

    /// All exact-statistics conditions hold.
    pub fn exact_pass(&self) -> bool {
        self.a0_pd && self.a2_support_ok && self.a3_signs_ok
    }

    /// Human-readable key=value rendering with a PASS/FAIL summary.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let opt = |v: &Option<f64>| v.map_or("none".to_string(), |x| x.to_string());
        let _ = writeln!(out, "p={}", self.dim);
        let _ = writeln!(out, "a0_pd={}", self.a0_pd);
        let _ = writeln!(out, "a1_lambda_star={}", self.a1_lambda_star);
        let _ = writeln!(out, "a2_support_ok={}", self.a2_support_ok);
        let _ = writeln!(out, "a2_zero_diag={}", self.a2_zero_diag);
        let _ = writeln!(out, "a2_residual_on_max={}", self.a2_residual_on_max);
        let _ = writeln!(out, "a2_max_covered={}", self.a2_max_covered);
        let _ = writeln!(out, "a3_signs_ok={}", self.a3_signs_ok);
        let _ = writeln!(out, "a4_incoherence_lhs={}", self.a4_incoherence_lhs);
        let _ = writeln!(out, "a4_alpha={}", opt(&self.a4_alpha));
        let _ = writeln!(out, "a4_k_ssr={}", self.a4_k_ssr);
        let _ = writeln!(out, "a5_k_ss={}", self.a5_k_ss);
        let _ = writeln!(
            out,
            "a5_m_feasible={}",
            self.a5_m_feasible
                .map_or("none".to_string(), |m| m.to_string())
        );
        let _ = writeln!(out, "k_m={}", self.k_m);
        let _ = writeln!(out, "degree={}", self.degree);
        let _ = writeln!(out, "j_min={}", self.j_min);
        let _ = writeln!(out, "sigma_r_min={}", self.sigma_r_min);
        let pf = |b: bool| if b { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "check_a0={}", pf(self.a0_pd));
        let _ = writeln!(out, "check_a2={}", pf(self.a2_support_ok));
        let _ = writeln!(out, "check_a3={}", pf(self.a3_signs_ok));
        let _ = writeln!(out, "check_a4={}", pf(self.a4_pass()));
        let _ = writeln!(out, "check_a5={}", pf(self.a5_pass()));
        let _ = writeln!(out, "exact_conditions={}", pf(self.exact_pass()));
        out
    }
}

/// Run every check against a ground-truth model. Supports are taken from the
/// exact zero patterns (threshold zero).
pub fn check_all(model: &GroundTruthModel, tol: f64) -> Result<AssumptionReport> {
    let exact = check_exact(&model.j_m, &model.sigma_r, tol)?;
    let sigma_m = model.j_m.inverse_spd()?;
    let partition = build_partition(&model.j_m, &model.sigma_r, 0.0)?;
    let inc = incoherence(&sigma_m, &partition)?;

    let markov_edges = support_off(&model.j_m, 0.0);
    let degree = markov_edges.max_degree();
    let j_min = markov_edges
        .iter()
        .map(|(i, j)| model.j_m.get(i, j).abs())
        .fold(f64::INFINITY, f64::min);
    let j_min = if j_min.is_finite() { j_min } else { 0.0 };
    let res_edges = support_off(&model.sigma_r, 0.0);
    let sigma_r_min = res_edges
        .iter()
        .map(|(i, j)| model.sigma_r.get(i, j).abs())
        .fold(f64::INFINITY, f64::min);
    let sigma_r_min = if sigma_r_min.is_finite() {
        sigma_r_min
    } else {
        0.0
    };

    Ok(AssumptionReport {
        dim: model.dim(),
        a0_pd: exact.a0_pd,
        a1_lambda_star: exact.a1_lambda_star,
        a2_support_ok: exact.a2_support_ok,
        a2_zero_diag: exact.a2_zero_diag,
        a2_residual_on_max: exact.a2_residual_on_max,
        a2_max_covered: exact.a2_max_covered,
        a3_signs_ok: exact.a3_signs_ok,
        a4_incoherence_lhs: inc.a4_incoherence_lhs,
        a4_alpha: inc.a4_alpha,
        a4_k_ssr: inc.a4_k_ssr,
        a5_k_ss: inc.a5_k_ss,
        a5_m_feasible: inc.a5_m_feasible,
        k_m: inc.k_m,
        degree,
        j_min,
        sigma_r_min,
    })
}
