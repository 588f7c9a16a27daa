//! Eigenvalue-level checks: candidate spectra, containment, semisimplicity,
//! semistability and paracontraction.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::linalg::{self, compare_spans, kernel_basis, numeric_rank, SpanComparison};
use crate::error::{Error, Result};
use crate::swarm::CoeffSample;

/// Default radius used to group eigenvalues that should coincide.
pub const CLUSTER_TOL: f64 = 1e-8;

/// Radius, relative to `max(1, ||M||_F)`, within which computed eigenvalues
/// are treated as one cluster split apart by rounding.
pub const SPLIT_RADIUS: f64 = 1e-4;

/// Relative rank tolerance for the multiplicity ranks.
pub const MULTIPLICITY_RANK_TOL: f64 = 1e-12;

/// Each eigenvalue replaced by the mean of its single-linkage cluster.
pub fn cluster_centroids(eigs: &[Complex64], radius: f64) -> Vec<Complex64> {
    let m = eigs.len();
    let mut parent: Vec<usize> = (0..m).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..m {
        for j in i + 1..m {
            if (eigs[i] - eigs[j]).norm() <= radius {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut sum = vec![Complex64::new(0.0, 0.0); m];
    let mut count = vec![0usize; m];
    for i in 0..m {
        let r = root(&mut parent, i);
        sum[r] += eigs[i];
        count[r] += 1;
    }
    (0..m)
        .map(|i| {
            let r = root(&mut parent, i);
            sum[r] / count[r] as f64
        })
        .collect()
}

/// Computed eigenvalues of `m` followed by the centroids of their split clusters.
pub(crate) fn eigenvalues_with_centroids(m: &DMatrix<f64>) -> (Vec<Complex64>, Vec<Complex64>) {
    let eigs = eigenvalues(m);
    let centroids = cluster_centroids(&eigs, SPLIT_RADIUS * m.norm().max(1.0));
    (eigs, centroids)
}

pub use super::linalg::eigenvalues;

/// Both roots of `z^2 + b z + c = 0` over the complex numbers.
pub fn quadratic_roots(b: Complex64, c: Complex64) -> [Complex64; 2] {
    let disc = (b * b - c * 4.0).sqrt();
    // Pick the numerically stable pairing.
    let sign = if (b.conj() * disc).re >= 0.0 { 1.0 } else { -1.0 };
    let big = -(b + disc * sign) / 2.0;
    if big.norm() == 0.0 {
        return [Complex64::new(0.0, 0.0); 2];
    }
    [big, c / big]
}

/// Roots of a monic real polynomial `z^d + c[0] z^{d-1} + ... + c[d-1]` via
/// the companion matrix, polished with two Newton steps each.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let d = coeffs.len();
    if d == 0 {
        return Vec::new();
    }
    let mut companion = DMatrix::zeros(d, d);
    for (k, c) in coeffs.iter().enumerate() {
        companion[(0, k)] = -c;
    }
    for i in 1..d {
        companion[(i, i - 1)] = 1.0;
    }
    let eval = |z: Complex64| -> (Complex64, Complex64) {
        let mut p = Complex64::new(1.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in coeffs {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    };
    eigenvalues(&companion)
        .into_iter()
        .map(|mut z| {
            for _ in 0..2 {
                let (p, dp) = eval(z);
                if dp.norm() > 0.0 {
                    let step = p / dp;
                    if step.is_finite() {
                        z -= step;
                    }
                }
            }
            z
        })
        .collect()
}

/// Coefficients of the cubic candidate polynomial of the reset branch:
/// `z^3 + (1 + h^2 k) z^2 + (2 h^2 k - h k) z + h^2 k`.
pub fn reset_cubic(h: f64, kappa: f64) -> [f64; 3] {
    let h2k = h * h * kappa;
    [1.0 + h2k, 2.0 * h2k - h * kappa, h2k]
}

fn nonzero_laplacian_eigs(l: &DMatrix<f64>) -> Vec<Complex64> {
    let scale = l.norm().max(1.0);
    let (eigs, centroids) = eigenvalues_with_centroids(l);
    let mut out: Vec<Complex64> = eigs.into_iter().filter(|s| s.norm() > 1e-9 * scale).collect();
    for c in centroids {
        if c.norm() > 1e-9 * scale && !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

/// Candidate spectrum of `A + h Ac`: `{0, -k, l1,2, l5,6}` plus, for each
/// nonzero Laplacian eigenvalue `s`, the roots of
/// `z^2 + (k h + s(eta + mu h)) z + (k + s mu) = 0`.
pub fn predicted_spectrum_a(c: &CoeffSample, l: &DMatrix<f64>) -> Vec<Complex64> {
    let (k, h, mu, eta) = (c.kappa, c.h, c.mu, c.eta);
    let mut out = vec![Complex64::new(0.0, 0.0), Complex64::new(-k, 0.0)];
    out.extend(quadratic_roots(Complex64::new(k * (1.0 + h), 0.0), Complex64::new(k, 0.0)));
    out.extend(quadratic_roots(Complex64::new(k * h, 0.0), Complex64::new(k, 0.0)));
    for s in nonzero_laplacian_eigs(l) {
        out.extend(quadratic_roots(s * (eta + mu * h) + k * h, s * mu + k));
    }
    out
}

/// Candidate spectrum of `B + h^2 Ac`: `{0, -1}`, the roots of
/// `z^2 + h^2 k z + h^2 k`, the graph-coupled roots of
/// `z^2 + (k h^2 + s(eta h + mu h^2)) z + (k h^2 + s mu h^2) = 0`, and the
/// roots of [`reset_cubic`].
pub fn predicted_spectrum_b(c: &CoeffSample, l: &DMatrix<f64>) -> Vec<Complex64> {
    let (k, h, mu, eta) = (c.kappa, c.h, c.mu, c.eta);
    let h2k = h * h * k;
    let mut out = vec![Complex64::new(0.0, 0.0), Complex64::new(-1.0, 0.0)];
    out.extend(quadratic_roots(Complex64::new(h2k, 0.0), Complex64::new(h2k, 0.0)));
    for s in nonzero_laplacian_eigs(l) {
        out.extend(quadratic_roots(
            s * (eta * h + mu * h * h) + h2k,
            s * (mu * h * h) + h2k,
        ));
    }
    out.extend(polynomial_roots(&reset_cubic(h, k)));
    out
}

/// Outcome of a containment check.
#[derive(Debug, Clone, Serialize)]
pub struct Containment {
    pub contained: bool,
    /// Largest distance from a computed eigenvalue to its nearest candidate.
    pub max_distance: f64,
    /// Computed eigenvalues farther than `tol` from every candidate.
    #[serde(serialize_with = "ser_complex_vec")]
    pub offenders: Vec<Complex64>,
}

/// Checks that every eigenvalue of `m` is within `tol` of some candidate.
/// An eigenvalue also counts as matched when the centroid of its split
/// cluster is.
pub fn verify_spectrum_containment(m: &DMatrix<f64>, predicted: &[Complex64], tol: f64) -> Result<Containment> {
    if predicted.is_empty() {
        return Err(Error::invalid("predicted spectrum is empty"));
    }
    let nearest = |z: Complex64| {
        predicted
            .iter()
            .map(|c| (z - c).norm())
            .fold(f64::INFINITY, f64::min)
    };
    let mut max_distance: f64 = 0.0;
    let mut offenders = Vec::new();
    let (eigs, centroids) = eigenvalues_with_centroids(m);
    for (z, c) in eigs.into_iter().zip(centroids) {
        let d = nearest(z).min(nearest(c));
        max_distance = max_distance.max(d);
        if d > tol {
            offenders.push(z);
        }
    }
    Ok(Containment {
        contained: offenders.is_empty(),
        max_distance,
        offenders,
    })
}

fn shifted(m: &DMatrix<f64>, lambda: Complex64) -> DMatrix<Complex64> {
    let mut s = m.map(|x| Complex64::new(x, 0.0));
    for i in 0..m.nrows() {
        s[(i, i)] -= lambda;
    }
    s
}

/// Multiplicities of one eigenvalue.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Multiplicity {
    /// `dim ker(M - l I)`.
    pub geometric: usize,
    /// `dim ker((M - l I)^2)`; equals `geometric` exactly when `l` is semisimple.
    pub index_two_nullity: usize,
    /// Eigenvalues found within the cluster tolerance. Defective eigenvalues
    /// split by roughly `sqrt(eps)` in floating point, so this is an estimate.
    pub cluster_count: usize,
}

impl Multiplicity {
    pub fn semisimple(&self) -> bool {
        self.geometric == self.index_two_nullity
    }
}

pub fn multiplicity(m: &DMatrix<f64>, lambda: Complex64, cluster_tol: f64) -> Result<Multiplicity> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid("matrix must be square"));
    }
    let s = shifted(m, lambda);
    let rank_tol = Some(MULTIPLICITY_RANK_TOL);
    let geometric = m.ncols() - numeric_rank(&s, rank_tol);
    if geometric == 0 {
        return Err(Error::invalid(format!("{lambda} is not an eigenvalue")));
    }
    let s2 = &s * &s;
    let index_two_nullity = m.ncols() - numeric_rank(&s2, rank_tol);
    let cluster_count = eigenvalues(m)
        .iter()
        .filter(|z| (*z - lambda).norm() <= cluster_tol)
        .count();
    Ok(Multiplicity {
        geometric,
        index_two_nullity,
        cluster_count,
    })
}

/// True iff `lambda` is a semisimple eigenvalue of `m`.
pub fn eigen_semisimple(m: &DMatrix<f64>, lambda: Complex64, tol: f64) -> Result<bool> {
    multiplicity(m, lambda, tol).map(|mu| mu.semisimple())
}

/// Spectrum inside the closed unit disk, only `1` on the circle, and `1`
/// semisimple when present.
pub fn is_discrete_semistable(m: &DMatrix<f64>, tol: f64) -> bool {
    let eigs = eigenvalues(m);
    let one = Complex64::new(1.0, 0.0);
    let mut touches_one = false;
    for z in &eigs {
        let r = z.norm();
        if r > 1.0 + tol {
            return false;
        }
        if r >= 1.0 - tol {
            if (z - one).norm() > tol {
                return false;
            }
            touches_one = true;
        }
    }
    if touches_one {
        return eigen_semisimple(m, one, tol).unwrap_or(false);
    }
    true
}

/// Breakdown of the paracontraction test.
#[derive(Debug, Clone, Serialize)]
pub struct ParacontractionReport {
    pub semistable: bool,
    pub identity: bool,
    pub norm: f64,
    /// `[rank(W'W - I), rank((W-I)'(W-I) + (W-I)^2), rank[W'W - I, (W-I)'(W-I) + (W'-I)^2]]`.
    pub ranks: [usize; 3],
    pub paracontracting: bool,
}

pub fn paracontraction_report(w: &DMatrix<f64>, tol: f64) -> ParacontractionReport {
    let q = w.nrows();
    let id = DMatrix::identity(q, q);
    let semistable = is_discrete_semistable(w, tol);
    let identity = (w - &id).amax() <= tol;
    let norm = linalg::spectral_norm(w);
    let wm = w - &id;
    let gram = w.transpose() * w - &id;
    let sym = wm.transpose() * &wm + &wm * &wm;
    let sym_t = wm.transpose() * &wm + wm.transpose() * wm.transpose();
    let mut joined = DMatrix::zeros(q, 2 * q);
    joined.view_mut((0, 0), (q, q)).copy_from(&gram);
    joined.view_mut((0, q), (q, q)).copy_from(&sym_t);
    let rank_tol = Some(tol.max(f64::EPSILON));
    let ranks = [
        numeric_rank(&gram, rank_tol),
        numeric_rank(&sym, rank_tol),
        numeric_rank(&joined, rank_tol),
    ];
    let paracontracting = semistable
        && !identity
        && norm <= 1.0 + tol
        && ranks[0] == ranks[1]
        && ranks[1] == ranks[2];
    ParacontractionReport {
        semistable,
        identity,
        norm,
        ranks,
        paracontracting,
    }
}

/// Nontrivially semistable, norm at most one, and the three-way rank equality.
pub fn is_paracontracting(w: &DMatrix<f64>, tol: f64) -> bool {
    paracontraction_report(w, tol).paracontracting
}

/// Compares `∩_k ker(C (I - A_k))` with `ker(I - A_ref)` over a finite family.
pub fn semiobservable_family_check(
    family: &[DMatrix<f64>],
    c: &DMatrix<f64>,
    a_ref: &DMatrix<f64>,
    tol: f64,
) -> Result<(bool, SpanComparison)> {
    let side = a_ref.nrows();
    if a_ref.ncols() != side || c.ncols() != side {
        return Err(Error::invalid("dimension mismatch in semiobservability check"));
    }
    if family.iter().any(|a| a.shape() != (side, side)) {
        return Err(Error::invalid("family members must match the reference size"));
    }
    let id = DMatrix::identity(side, side);
    let rows = c.nrows() * family.len();
    let mut stacked = DMatrix::zeros(rows, side);
    for (k, a) in family.iter().enumerate() {
        stacked
            .view_mut((k * c.nrows(), 0), (c.nrows(), side))
            .copy_from(&(c * (&id - a)));
    }
    let left = kernel_basis(&stacked, None);
    let right = kernel_basis(&(&id - a_ref), None);
    let cmp = compare_spans(&left, &right);
    Ok((cmp.same_span(tol), cmp))
}

/// Eigen/kernel summary of one matrix.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub side: usize,
    #[serde(serialize_with = "ser_complex_vec")]
    pub eigenvalues: Vec<Complex64>,
    pub rank: usize,
    pub kernel_dim: usize,
    /// Orthonormal kernel basis, one vector per entry.
    pub kernel_basis: Vec<Vec<f64>>,
    pub zero_multiplicity: Option<Multiplicity>,
    pub zero_semisimple: Option<bool>,
    pub rank_tol: f64,
    pub cluster_tol: f64,
}

pub fn spectral_report(m: &DMatrix<f64>, cluster_tol: f64) -> SpectralReport {
    let rank = numeric_rank(m, None);
    let kernel = kernel_basis(m, None);
    let zero = multiplicity(m, Complex64::new(0.0, 0.0), cluster_tol).ok();
    SpectralReport {
        side: m.nrows(),
        eigenvalues: eigenvalues(m),
        rank,
        kernel_dim: kernel.ncols(),
        kernel_basis: kernel
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect(),
        zero_multiplicity: zero,
        zero_semisimple: zero.map(|z| z.semisimple()),
        rank_tol: linalg::DEFAULT_RANK_TOL,
        cluster_tol,
    }
}

pub(crate) fn ser_complex_vec<S: serde::Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

/// Real-valued helper: rotation by `theta`.
pub fn rotation(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::blocks::SystemMatrices;
    use crate::graph::{build_graph, laplacian, GraphKind};

    fn c(mu: f64, eta: f64, kappa: f64, h: f64) -> CoeffSample {
        CoeffSample { eta, mu, kappa, h }
    }

    fn k(q: usize) -> DMatrix<f64> {
        laplacian(&build_graph(GraphKind::Complete, q, 0).unwrap())
    }

    fn dvec(v: &[f64]) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_column_slice(v)
    }

    const ZERO: Complex64 = Complex64::new(0.0, 0.0);

    #[test]
    fn semisimple_examples() {
        let d = DMatrix::from_diagonal(&dvec(&[0.0, 0.0, 1.0]));
        assert!(eigen_semisimple(&d, ZERO, CLUSTER_TOL).unwrap());
        let jordan = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(!eigen_semisimple(&jordan, ZERO, CLUSTER_TOL).unwrap());
        let sm = SystemMatrices::assemble(c(0.3, 0.2, 0.4, 0.1), &k(2), 1, 0).unwrap();
        assert!(eigen_semisimple(&sm.a_family(), ZERO, CLUSTER_TOL).unwrap());
        let not_eig = eigen_semisimple(&DMatrix::identity(2, 2), ZERO, CLUSTER_TOL);
        assert!(matches!(not_eig, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn double_root_at_unit_kappa_and_h() {
        let p = predicted_spectrum_a(&c(0.0, 0.0, 1.0, 1.0), &k(2));
        // l1,2 solve z^2 + 2z + 1 = 0.
        assert!((p[2] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        assert!((p[3] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn reset_cubic_real_root() {
        let roots = polynomial_roots(&reset_cubic(1.0, 1.0));
        let real: Vec<_> = roots.iter().filter(|z| z.im.abs() < 1e-12).collect();
        assert_eq!(real.len(), 1);
        // Bisection on z^3 + 2z^2 + z + 1 over [-2, -1].
        let f = |z: f64| z * z * z + 2.0 * z * z + z + 1.0;
        let (mut lo, mut hi) = (-2.0f64, -1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((real[0].re - lo).abs() < 1e-12);
        assert!((real[0].re + 1.7549).abs() < 1e-4);
    }

    #[test]
    fn zero_kappa_candidates() {
        let l = k(3);
        let p = predicted_spectrum_a(&c(0.4, 0.3, 0.0, 0.5), &l);
        // Fixed part collapses to zero.
        assert!(p[..6].iter().all(|z| z.norm() < 1e-15));
        // Graph branch with s = 3: z^2 + 3(0.3 + 0.2) z + 1.2 = 0.
        let want = quadratic_roots(Complex64::new(1.5, 0.0), Complex64::new(1.2, 0.0));
        for w in want {
            assert!(p.iter().any(|z| (z - w).norm() < 1e-12));
        }
    }

    #[test]
    fn containment_on_k3_and_negative_control() {
        let l = k(3);
        let coeffs = c(0.37, 0.81, 0.52, 0.66);
        let sm = SystemMatrices::assemble(coeffs, &l, 1, 0).unwrap();
        let pa = predicted_spectrum_a(&coeffs, &l);
        assert!(verify_spectrum_containment(&sm.a_family(), &pa, 1e-8).unwrap().contained);
        let shifted = sm.a_family() + DMatrix::identity(sm.side(), sm.side()) * 0.5;
        assert!(!verify_spectrum_containment(&shifted, &pa, 1e-8).unwrap().contained);
        assert!(verify_spectrum_containment(&shifted, &[], 1e-8).is_err());
    }

    #[test]
    fn reset_family_has_consensus_eigenvalue_outside_candidates() {
        // The consensus direction of B + h^2 Ac has eigenvalue -h^2 kappa.
        let l = k(3);
        let coeffs = c(0.37, 0.81, 0.52, 0.66);
        let sm = SystemMatrices::assemble(coeffs, &l, 1, 0).unwrap();
        let target = Complex64::new(-0.66 * 0.66 * 0.52, 0.0);
        assert!(eigenvalues(&sm.b_family()).iter().any(|z| (z - target).norm() < 1e-10));
        let pb = predicted_spectrum_b(&coeffs, &l);
        let r = verify_spectrum_containment(&sm.b_family(), &pb, 1e-8).unwrap();
        assert!(!r.contained);
        assert!(r.offenders.iter().all(|z| (z - target).norm() < 1e-8));
    }

    #[test]
    fn semistability_examples() {
        assert!(is_discrete_semistable(&DMatrix::identity(3, 3), 1e-9));
        assert!(is_discrete_semistable(&DMatrix::from_diagonal(&dvec(&[1.0, 0.5])), 1e-9));
        assert!(!is_discrete_semistable(&rotation(std::f64::consts::FRAC_PI_2), 1e-9));
        let jordan_one = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(!is_discrete_semistable(&jordan_one, 1e-9));
    }

    #[test]
    fn paracontraction_examples() {
        assert!(is_paracontracting(&DMatrix::from_diagonal(&dvec(&[1.0, 0.5])), 1e-9));
        assert!(!is_paracontracting(&rotation(std::f64::consts::FRAC_PI_2), 1e-9));
        assert!(!is_paracontracting(&DMatrix::identity(3, 3), 1e-9));
        // Semistable but expanding in some direction.
        let shear = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.9, 0.5]);
        assert!(is_discrete_semistable(&shear, 1e-9));
        assert!(!is_paracontracting(&shear, 1e-9));
    }

    #[test]
    fn semiobservability_examples() {
        let id3 = DMatrix::<f64>::identity(3, 3);
        let a_ref = DMatrix::from_diagonal(&dvec(&[1.0, 0.5, 0.0]));
        let (ok, _) = semiobservable_family_check(std::slice::from_ref(&a_ref), &id3, &a_ref, 1e-9).unwrap();
        assert!(ok);
        let (ok, _) = semiobservable_family_check(std::slice::from_ref(&id3), &id3, &a_ref, 1e-9).unwrap();
        assert!(!ok);
        // Two commuting projectors: fixed spaces span{e1,e2} and span{e1,e3};
        // their intersection span{e1} equals the fixed space of a_ref.
        let p1 = DMatrix::from_diagonal(&dvec(&[1.0, 1.0, 0.0]));
        let p2 = DMatrix::from_diagonal(&dvec(&[1.0, 0.0, 1.0]));
        let (ok, cmp) = semiobservable_family_check(&[p1, p2], &id3, &a_ref, 1e-9).unwrap();
        assert!(ok, "{cmp:?}");
        assert!(semiobservable_family_check(&[], &DMatrix::identity(2, 2), &a_ref, 1e-9).is_err());
    }

    #[test]
    fn report_invariant() {
        let sm = SystemMatrices::assemble(c(0.3, 0.2, 0.5, 0.1), &k(2), 1, 0).unwrap();
        let r = spectral_report(&sm.a_family(), CLUSTER_TOL);
        assert_eq!(r.rank + r.kernel_dim, r.side);
        assert_eq!(r.zero_semisimple, Some(true));
        assert_eq!(r.eigenvalues.len(), 5);
    }
}
