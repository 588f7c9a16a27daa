//! Block matrices of the switched linear model of the MCO iteration.
//!
//! The stacked state is `Z = [x_1; ...; x_q; v_1; ...; v_q; p]` with side
//! `2nq + n`. Leader indices are 0-based throughout the crate.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::swarm::CoeffSample;

/// Row sums of an admissible Laplacian must be within this of zero.
pub const LAPLACIAN_ROW_TOL: f64 = 1e-9;

fn check_leader(leader: usize, q: usize) -> Result<()> {
    if q < 2 {
        return Err(Error::invalid("block matrices need q >= 2"));
    }
    if leader >= q {
        return Err(Error::invalid(format!(
            "leader index {leader} out of range for q = {q} (0-based)"
        )));
    }
    Ok(())
}

/// `E^[j]`: `n x nq` selector whose `j`-th block column is `I_n`.
pub fn build_e(leader: usize, n: usize, q: usize) -> Result<DMatrix<f64>> {
    check_leader(leader, q)?;
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let mut e = DMatrix::zeros(n, n * q);
    e.view_mut((0, leader * n), (n, n))
        .fill_with_identity();
    Ok(e)
}

/// `W^[j] = (1_q ⊗ I_n) E^[j]`.
pub fn build_w(leader: usize, n: usize, q: usize) -> Result<DMatrix<f64>> {
    let e = build_e(leader, n, q)?;
    Ok(ones_kron_identity(q, n) * e)
}

/// `1_{q x 1} ⊗ I_n`.
pub fn ones_kron_identity(q: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_element(q, 1, 1.0).kronecker(&DMatrix::identity(n, n))
}

fn validate_laplacian(l: &DMatrix<f64>) -> Result<()> {
    if l.nrows() != l.ncols() {
        return Err(Error::invalid("Laplacian must be square"));
    }
    for (i, row) in l.row_iter().enumerate() {
        let s: f64 = row.iter().sum();
        if s.abs() > LAPLACIAN_ROW_TOL {
            return Err(Error::invalid(format!(
                "matrix is not a Laplacian: row {i} sums to {s:e}"
            )));
        }
    }
    Ok(())
}

fn validate_coeffs(c: &CoeffSample) -> Result<()> {
    let all = [c.eta, c.mu, c.kappa, c.h];
    if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("coefficients must be finite and non-negative"));
    }
    Ok(())
}

/// Pieces shared by `A`, `Ac` and `B`: the consensus row block
/// `[-mu L⊗I - kappa I, -eta L⊗I, kappa 1⊗I]`.
fn consensus_row(c: &CoeffSample, l: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let q = l.nrows();
    let nq = n * q;
    let lk = l.kronecker(&DMatrix::identity(n, n));
    let mut row = DMatrix::zeros(nq, 2 * nq + n);
    row.view_mut((0, 0), (nq, nq))
        .copy_from(&(&lk * -c.mu - DMatrix::identity(nq, nq) * c.kappa));
    row.view_mut((0, nq), (nq, nq)).copy_from(&(&lk * -c.eta));
    row.view_mut((0, 2 * nq), (nq, n))
        .copy_from(&(ones_kron_identity(q, n) * c.kappa));
    row
}

/// `A^[j]`: the smoothing-branch generator.
pub fn build_a(leader: usize, c: &CoeffSample, l: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    validate_laplacian(l)?;
    validate_coeffs(c)?;
    let q = l.nrows();
    let e = build_e(leader, n, q)?;
    let nq = n * q;
    let side = 2 * nq + n;
    let mut a = DMatrix::zeros(side, side);
    a.view_mut((0, nq), (nq, nq)).fill_with_identity();
    a.view_mut((nq, 0), (nq, side))
        .copy_from(&consensus_row(c, l, n));
    a.view_mut((2 * nq, 0), (n, nq)).copy_from(&(e * c.kappa));
    a.view_mut((2 * nq, 2 * nq), (n, n))
        .copy_from(&(DMatrix::identity(n, n) * -c.kappa));
    Ok(a)
}

/// `Ac`: only the first block row is nonzero and it equals the consensus row.
pub fn build_ac(c: &CoeffSample, l: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    validate_laplacian(l)?;
    validate_coeffs(c)?;
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let nq = n * l.nrows();
    let side = 2 * nq + n;
    let mut ac = DMatrix::zeros(side, side);
    ac.view_mut((0, 0), (nq, side))
        .copy_from(&consensus_row(c, l, n));
    Ok(ac)
}

/// `B^[j]`: the reset-branch generator, with `h`-scaled consensus row and a
/// bottom row `[E, 0, -I]` that copies the leader into `p`.
pub fn build_b(leader: usize, c: &CoeffSample, l: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    validate_laplacian(l)?;
    validate_coeffs(c)?;
    let q = l.nrows();
    let e = build_e(leader, n, q)?;
    let nq = n * q;
    let side = 2 * nq + n;
    let mut b = DMatrix::zeros(side, side);
    b.view_mut((0, nq), (nq, nq))
        .copy_from(&(DMatrix::identity(nq, nq) * c.h));
    b.view_mut((nq, 0), (nq, side))
        .copy_from(&(consensus_row(c, l, n) * c.h));
    b.view_mut((2 * nq, 0), (n, nq)).copy_from(&e);
    b.view_mut((2 * nq, 2 * nq), (n, n))
        .copy_from(&(-DMatrix::identity(n, n)));
    Ok(b)
}

/// Which update the switched model applies at a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `p` is not dominated by the leader: `p <- p + h kappa (x_j - p)`.
    Smoothing,
    /// `p` is dominated: `p <- x_j`.
    Reset,
}

/// All matrices of one switching mode.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub n: usize,
    pub q: usize,
    pub leader: usize,
    pub coeffs: CoeffSample,
    pub laplacian: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub ac: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub w: DMatrix<f64>,
}

impl SystemMatrices {
    pub fn assemble(coeffs: CoeffSample, l: &DMatrix<f64>, n: usize, leader: usize) -> Result<Self> {
        let q = l.nrows();
        Ok(Self {
            n,
            q,
            leader,
            coeffs,
            laplacian: l.clone(),
            a: build_a(leader, &coeffs, l, n)?,
            ac: build_ac(&coeffs, l, n)?,
            b: build_b(leader, &coeffs, l, n)?,
            e: build_e(leader, n, q)?,
            w: build_w(leader, n, q)?,
        })
    }

    pub fn side(&self) -> usize {
        2 * self.n * self.q + self.n
    }

    /// `A + h Ac`.
    pub fn a_family(&self) -> DMatrix<f64> {
        &self.a + &self.ac * self.coeffs.h
    }

    /// `B + h^2 Ac`.
    pub fn b_family(&self) -> DMatrix<f64> {
        &self.b + &self.ac * (self.coeffs.h * self.coeffs.h)
    }

    /// Iteration matrix of a branch: `I + h(A + h Ac)` or `I + B + h^2 Ac`.
    pub fn update_matrix(&self, branch: Branch) -> DMatrix<f64> {
        let id = DMatrix::identity(self.side(), self.side());
        match branch {
            Branch::Smoothing => id + self.a_family() * self.coeffs.h,
            Branch::Reset => id + self.b_family(),
        }
    }
}

/// Stacks positions, velocities (each `q` vectors of length `n`) and `p`.
pub fn stack_state(x: &[Vec<f64>], v: &[Vec<f64>], p: &[f64]) -> nalgebra::DVector<f64> {
    let data: Vec<f64> = x
        .iter()
        .chain(v.iter())
        .flat_map(|r| r.iter().copied())
        .chain(p.iter().copied())
        .collect();
    nalgebra::DVector::from_vec(data)
}

/// Inverse of [`stack_state`].
pub fn unstack_state(z: &nalgebra::DVector<f64>, n: usize, q: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
    let s = z.as_slice();
    let x = (0..q).map(|i| s[i * n..(i + 1) * n].to_vec()).collect();
    let v = (0..q)
        .map(|i| s[(q + i) * n..(q + i + 1) * n].to_vec())
        .collect();
    let p = s[2 * q * n..].to_vec();
    (x, v, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::linalg::numeric_rank;
    use crate::graph::{build_graph, laplacian, GraphKind};

    fn coeffs(mu: f64, eta: f64, kappa: f64, h: f64) -> CoeffSample {
        CoeffSample { eta, mu, kappa, h }
    }

    fn k(q: usize) -> DMatrix<f64> {
        laplacian(&build_graph(GraphKind::Complete, q, 0).unwrap())
    }

    #[test]
    fn selector_and_w_small_case() {
        assert_eq!(build_e(0, 1, 2).unwrap(), DMatrix::from_row_slice(1, 2, &[1., 0.]));
        assert_eq!(
            build_w(0, 1, 2).unwrap(),
            DMatrix::from_row_slice(2, 2, &[1., 0., 1., 0.])
        );
        let w = build_w(1, 1, 2).unwrap();
        let out = w * nalgebra::DVector::from_vec(vec![3.0, 5.0]);
        assert_eq!(out.as_slice(), &[5.0, 5.0]);
        assert!(build_e(2, 1, 2).is_err());
    }

    #[test]
    fn w_properties_over_small_grid() {
        for q in 2..=4 {
            for n in 1..=2 {
                for j in 0..q {
                    let w = build_w(j, n, q).unwrap();
                    let nq = n * q;
                    assert!((&w * &w - &w).norm() < 1e-12);
                    let wi = &w - DMatrix::identity(nq, nq);
                    assert_eq!(numeric_rank(&wi, None), nq - n);
                    let e = build_e(j, n, q).unwrap();
                    assert!((e * ones_kron_identity(q, n) - DMatrix::identity(n, n)).norm() < 1e-12);
                    for i in 0..n {
                        let mut ei = DMatrix::zeros(n, 1);
                        ei[i] = 1.0;
                        let v = DMatrix::from_element(q, 1, 1.0).kronecker(&ei);
                        assert!((&w * &v - &v).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn sizes_and_zero_pattern() {
        let a = build_a(0, &coeffs(0.0, 0.0, 0.0, 1.0), &k(2), 1).unwrap();
        assert_eq!(a.shape(), (5, 5));
        let mut expected = DMatrix::zeros(5, 5);
        expected[(0, 2)] = 1.0;
        expected[(1, 3)] = 1.0;
        assert_eq!(a, expected);
    }

    #[test]
    fn bottom_row_for_unit_kappa() {
        let a = build_a(0, &coeffs(0.3, 0.2, 1.0, 1.0), &k(2), 1).unwrap();
        let bottom: Vec<f64> = a.row(4).iter().copied().collect();
        assert_eq!(bottom, vec![1.0, 0.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn ac_has_only_first_block_row() {
        let c = coeffs(0.3, 0.2, 0.5, 0.7);
        let a = build_a(0, &c, &k(3), 2).unwrap();
        let ac = build_ac(&c, &k(3), 2).unwrap();
        let nq = 6;
        assert_eq!(ac.rows(0, nq), a.rows(nq, nq));
        assert!(ac.rows(nq, nq + 2).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn b_blocks() {
        let c = coeffs(0.3, 0.2, 0.5, 0.7);
        let a = build_a(1, &c, &k(3), 1).unwrap();
        let b = build_b(1, &c, &k(3), 1).unwrap();
        assert_eq!(b.rows(3, 3), a.rows(3, 3) * 0.7);
        let bottom: Vec<f64> = b.row(6).iter().copied().collect();
        assert_eq!(bottom, vec![0., 1., 0., 0., 0., 0., -1.]);
    }

    #[test]
    fn rejects_non_laplacian() {
        let bad = DMatrix::from_row_slice(2, 2, &[1., 0., 0., 1.]);
        assert!(matches!(
            build_a(0, &coeffs(0.1, 0.1, 0.1, 1.0), &bad, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn stacking_roundtrip() {
        let x = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let v = vec![vec![5.0, 6.0], vec![7.0, 8.0]];
        let p = vec![9.0, 10.0];
        let z = stack_state(&x, &v, &p);
        assert_eq!(z.len(), 10);
        assert_eq!(unstack_state(&z, 2, 2), (x, v, p));
    }
}
