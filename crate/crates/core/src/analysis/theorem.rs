//! Rank/kernel checks of the generator `A` and the convergence hypotheses
//! H1-H4 of the switched model.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::blocks::{ones_kron_identity, SystemMatrices};
use super::linalg::{compare_spans, kernel_basis, numeric_rank, spectral_norm, SpanComparison};
use super::spectrum::{
    eigen_semisimple, eigenvalues_with_centroids, predicted_spectrum_a, predicted_spectrum_b, ser_complex_vec, CLUSTER_TOL,
};
use crate::error::{Error, Result};
use crate::swarm::CoeffSample;

/// Which rank formula applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankCase {
    /// `mu = kappa = 0`: rank `nq`.
    NoCoupling,
    /// `kappa != 0`: rank `2nq`.
    LeaderCoupled,
    /// `mu != 0, kappa = 0`: rank `n(q + rank L)`.
    GraphOnly,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankLemmaVerdict {
    /// `None` when a coefficient sits within the tolerance of zero without
    /// being zero, so the case cannot be decided.
    pub case: Option<RankCase>,
    pub expected_rank: Option<usize>,
    pub rank: usize,
    pub kernel_dim: usize,
    pub rank_ok: Option<bool>,
    /// `ker(A)` against `ker(A + h Ac)`.
    pub kernel_equality: SpanComparison,
    /// For `kappa != 0`: `ker(A)` against `span{(1⊗e_i, 0, e_i)}`.
    pub consensus_kernel: Option<SpanComparison>,
}

impl RankLemmaVerdict {
    pub fn indeterminate(&self) -> bool {
        self.case.is_none()
    }

    pub fn holds(&self, span_tol: f64) -> bool {
        self.rank_ok == Some(true)
            && self.kernel_equality.same_span(span_tol)
            && self.consensus_kernel.map_or(true, |c| c.same_span(span_tol))
    }
}

fn classify(c: &CoeffSample, tol: f64) -> Option<RankCase> {
    let ambiguous = |v: f64| v != 0.0 && v.abs() <= tol;
    if ambiguous(c.kappa) {
        return None;
    }
    if c.kappa != 0.0 {
        return Some(RankCase::LeaderCoupled);
    }
    if ambiguous(c.mu) {
        return None;
    }
    Some(if c.mu == 0.0 {
        RankCase::NoCoupling
    } else {
        RankCase::GraphOnly
    })
}

/// Orthonormal basis of `span{(1⊗e_i, 0, e_i)}`.
pub fn consensus_kernel(n: usize, q: usize) -> DMatrix<f64> {
    let nq = n * q;
    let mut k = DMatrix::zeros(2 * nq + n, n);
    k.view_mut((0, 0), (nq, n)).copy_from(&ones_kron_identity(q, n));
    k.view_mut((2 * nq, 0), (n, n)).fill_with_identity();
    k / ((q + 1) as f64).sqrt()
}

/// Checks the rank formula of `A` and the kernel equality with `A + h Ac`.
/// `coeff_tol` decides when a coefficient counts as zero.
pub fn check_rank_lemma(sm: &SystemMatrices, coeff_tol: f64) -> RankLemmaVerdict {
    let (n, q) = (sm.n, sm.q);
    let case = classify(&sm.coeffs, coeff_tol);
    let rank = numeric_rank(&sm.a, None);
    let expected_rank = case.map(|c| match c {
        RankCase::NoCoupling => n * q,
        RankCase::LeaderCoupled => 2 * n * q,
        RankCase::GraphOnly => n * (q + numeric_rank(&sm.laplacian, None)),
    });
    let ker_a = kernel_basis(&sm.a, None);
    let ker_af = kernel_basis(&sm.a_family(), None);
    RankLemmaVerdict {
        case,
        expected_rank,
        rank,
        kernel_dim: ker_a.ncols(),
        rank_ok: expected_rank.map(|e| e == rank),
        kernel_equality: compare_spans(&ker_a, &ker_af),
        consensus_kernel: (case == Some(RankCase::LeaderCoupled))
            .then(|| compare_spans(&ker_a, &consensus_kernel(n, q))),
    }
}

/// Bound `-(l + conj l)/|l|^2` for one candidate eigenvalue.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HBound {
    pub re: f64,
    pub im: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremVerdict {
    pub h: f64,
    pub h1: bool,
    pub h2: bool,
    pub h3: bool,
    pub h4: bool,
    pub pass: bool,
    pub bounds_a: Vec<HBound>,
    pub bounds_b: Vec<HBound>,
    /// Smallest bound over both families.
    pub h_dagger: Option<f64>,
    /// Candidates with nonnegative real part.
    #[serde(serialize_with = "ser_complex_vec")]
    pub offenders: Vec<Complex64>,
    /// `[||I + h A + h^2 Ac||, ||I + B + h^2 Ac||]`.
    pub norms: [f64; 2],
    /// Kernel comparisons behind H4, smoothing family then reset family.
    pub h4_spans: [SpanComparison; 2],
    pub zero_semisimple: bool,
}

struct FamilyBounds {
    ok: bool,
    bounds: Vec<HBound>,
    offenders: Vec<Complex64>,
}

/// Candidates that are realized as eigenvalues of `m`; unrealized members of
/// the candidate set place no constraint on the iteration.
fn family_bounds(m: &DMatrix<f64>, candidates: &[Complex64], h: f64, tol: f64) -> FamilyBounds {
    let (eigs, centroids) = eigenvalues_with_centroids(m);
    let mut out = FamilyBounds {
        ok: true,
        bounds: Vec::new(),
        offenders: Vec::new(),
    };
    for &c in candidates {
        if c.norm() <= tol || !eigs.iter().chain(&centroids).any(|e| (e - c).norm() <= CLUSTER_TOL) {
            continue;
        }
        if c.re >= -tol {
            out.ok = false;
            out.offenders.push(c);
            continue;
        }
        let bound = -2.0 * c.re / c.norm_sqr();
        if !(h < bound) {
            out.ok = false;
        }
        out.bounds.push(HBound {
            re: c.re,
            im: c.im,
            bound,
        });
    }
    out
}

fn kernel_condition(m: &DMatrix<f64>) -> SpanComparison {
    let mt = m.transpose();
    let gram = &mt * m;
    let left = &gram + &mt + m;
    let right = &gram + m * m;
    compare_spans(&kernel_basis(&left, None), &kernel_basis(&right, None))
}

/// Evaluates H1-H4 at the step size carried in `coeffs`.
pub fn check_theorem_hypotheses(
    coeffs: CoeffSample,
    l: &DMatrix<f64>,
    n: usize,
    leader: usize,
    tol: f64,
) -> Result<TheoremVerdict> {
    let sm = SystemMatrices::assemble(coeffs, l, n, leader)?;
    let h = coeffs.h;
    let af = sm.a_family();
    let bf = sm.b_family();
    let fa = family_bounds(&af, &predicted_spectrum_a(&coeffs, l), h, tol);
    let fb = family_bounds(&bf, &predicted_spectrum_b(&coeffs, l), h, tol);

    let id = DMatrix::identity(sm.side(), sm.side());
    let norms = [spectral_norm(&(&id + &af * h)), spectral_norm(&(&id + &bf))];
    let h3 = norms.iter().all(|&s| s <= 1.0 + tol);

    let h4_spans = [kernel_condition(&(&af * h)), kernel_condition(&bf)];
    let h4 = h4_spans.iter().all(|s| s.same_span(tol.max(1e-9)));

    let h_dagger = fa
        .bounds
        .iter()
        .chain(&fb.bounds)
        .map(|b| b.bound)
        .reduce(f64::min);
    let zero_semisimple = eigen_semisimple(&af, Complex64::new(0.0, 0.0), CLUSTER_TOL).unwrap_or(false);
    let (h1, h2) = (fa.ok, fb.ok);
    Ok(TheoremVerdict {
        h,
        h1,
        h2,
        h3,
        h4,
        pass: h1 && h2 && h3 && h4,
        bounds_a: fa.bounds,
        bounds_b: fb.bounds,
        h_dagger,
        offenders: fa.offenders.into_iter().chain(fb.offenders).collect(),
        norms,
        h4_spans,
        zero_semisimple,
    })
}

/// First step size in `(0, h_max]` at which H1 fails, bracketed to `1e-10`.
/// `None` when H1 holds on the whole scanned range.
pub fn h1_limit(
    coeffs: CoeffSample,
    l: &DMatrix<f64>,
    n: usize,
    leader: usize,
    h_max: f64,
    tol: f64,
) -> Result<Option<f64>> {
    if !(h_max > 0.0 && h_max.is_finite()) {
        return Err(Error::invalid("h_max must be positive and finite"));
    }
    let holds = |h: f64| -> Result<bool> {
        let sm = SystemMatrices::assemble(CoeffSample { h, ..coeffs }, l, n, leader)?;
        let c = CoeffSample { h, ..coeffs };
        Ok(family_bounds(&sm.a_family(), &predicted_spectrum_a(&c, l), h, tol).ok)
    };
    const GRID: usize = 256;
    let mut lo = 0.0;
    for k in 1..=GRID {
        let h = h_max * k as f64 / GRID as f64;
        if holds(h)? {
            lo = h;
            continue;
        }
        let mut hi = h;
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if holds(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Ok(Some(hi));
    }
    Ok(None)
}
