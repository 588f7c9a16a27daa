//! Simulation of the switched linear iteration `Z[k+1] = P_k Z[k]`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use super::blocks::{unstack_state, Branch, SystemMatrices};
use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::swarm::CoeffSample;

/// One switching mode: coefficients, topology, leader and branch.
#[derive(Debug, Clone)]
pub struct SwitchMode {
    pub coeffs: CoeffSample,
    pub laplacian: DMatrix<f64>,
    pub leader: usize,
    pub branch: Branch,
}

impl SwitchMode {
    pub fn update_matrix(&self, n: usize) -> Result<DMatrix<f64>> {
        let sm = SystemMatrices::assemble(self.coeffs, &self.laplacian, n, self.leader)?;
        Ok(sm.update_matrix(self.branch))
    }
}

#[derive(Debug, Clone)]
pub enum SwitchSchedule {
    /// Modes applied in order, repeating.
    Cyclic(Vec<SwitchMode>),
    /// A uniformly random mode per step, keyed by `(seed, k)`.
    Random { modes: Vec<SwitchMode>, seed: u64 },
    /// `recurring` every `period` steps, random `others` in between.
    Recurring {
        recurring: SwitchMode,
        others: Vec<SwitchMode>,
        period: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwitchedStatus {
    Converged,
    MaxIters,
    Diverged,
}

#[derive(Debug, Clone, Serialize)]
pub struct SwitchedOutcome {
    pub status: SwitchedStatus,
    pub iterations: usize,
    pub limit: Vec<f64>,
    /// Largest distance between two agent positions, per coordinate.
    pub x_spread: f64,
    /// Euclidean norm of all velocities.
    pub v_norm: f64,
    /// `max_i |x_i - p|`.
    pub p_gap: f64,
    /// `||Z||` after every step.
    pub norms: Vec<f64>,
}

impl SwitchedOutcome {
    /// Positions agree, velocities vanish and `p` sits on the agents.
    pub fn in_consensus_kernel(&self, tol: f64) -> bool {
        self.x_spread < tol && self.v_norm < tol && self.p_gap < tol
    }
}

pub const DIVERGENCE_NORM: f64 = 1e12;

fn consensus_measures(z: &DVector<f64>, n: usize, q: usize) -> (f64, f64, f64) {
    let (x, v, p) = unstack_state(z, n, q);
    let mut spread: f64 = 0.0;
    let mut gap: f64 = 0.0;
    for d in 0..n {
        let (lo, hi) = x
            .iter()
            .map(|xi| xi[d])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), c| (a.min(c), b.max(c)));
        spread = spread.max(hi - lo);
        for xi in &x {
            gap = gap.max((xi[d] - p[d]).abs());
        }
    }
    let v_norm = v.iter().flatten().map(|a| a * a).sum::<f64>().sqrt();
    (spread, v_norm, gap)
}

/// Iterates until `||Z[k+1] - Z[k]|| < tol`, `max_iters`, or `||Z|| > 1e12`.
pub fn simulate_switched(
    schedule: &SwitchSchedule,
    n: usize,
    z0: &DVector<f64>,
    max_iters: usize,
    tol: f64,
) -> Result<SwitchedOutcome> {
    let build = |modes: &[SwitchMode]| -> Result<Vec<DMatrix<f64>>> {
        if modes.is_empty() {
            return Err(Error::invalid("switching schedule has no modes"));
        }
        modes.iter().map(|m| m.update_matrix(n)).collect()
    };
    let (mats, recurring): (Vec<DMatrix<f64>>, Option<DMatrix<f64>>) = match schedule {
        SwitchSchedule::Cyclic(m) | SwitchSchedule::Random { modes: m, .. } => (build(m)?, None),
        SwitchSchedule::Recurring {
            recurring,
            others,
            period,
            ..
        } => {
            if *period == 0 {
                return Err(Error::invalid("recurrence period must be positive"));
            }
            (build(others)?, Some(recurring.update_matrix(n)?))
        }
    };
    let side = mats[0].nrows();
    if mats.iter().any(|m| m.nrows() != side) || recurring.as_ref().is_some_and(|m| m.nrows() != side) {
        return Err(Error::invalid("switching modes must share q and n"));
    }
    if z0.len() != side {
        return Err(Error::invalid(format!(
            "initial state has length {}, expected {side}",
            z0.len()
        )));
    }
    let q = (side - n) / (2 * n);

    let pick = |k: usize| -> &DMatrix<f64> {
        match schedule {
            SwitchSchedule::Cyclic(_) => &mats[k % mats.len()],
            SwitchSchedule::Random { seed, .. } => {
                let mut r = rng::stream(*seed, Domain::Analysis, k as u64, 0);
                &mats[r.gen_range(0..mats.len())]
            }
            SwitchSchedule::Recurring { period, seed, .. } => {
                if k % period == 0 {
                    recurring.as_ref().expect("recurring matrix built")
                } else {
                    let mut r = rng::stream(*seed, Domain::Analysis, k as u64, 1);
                    &mats[r.gen_range(0..mats.len())]
                }
            }
        }
    };

    let mut z = z0.clone();
    let mut norms = Vec::new();
    let mut status = SwitchedStatus::MaxIters;
    let mut iterations = 0;
    for k in 0..max_iters {
        let next = pick(k) * &z;
        let step = (&next - &z).norm();
        z = next;
        iterations = k + 1;
        let norm = z.norm();
        norms.push(norm);
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            status = SwitchedStatus::Diverged;
            break;
        }
        if step < tol {
            status = SwitchedStatus::Converged;
            break;
        }
    }
    let (x_spread, v_norm, p_gap) = consensus_measures(&z, n, q);
    Ok(SwitchedOutcome {
        status,
        iterations,
        limit: z.iter().copied().collect(),
        x_spread,
        v_norm,
        p_gap,
        norms,
    })
}

/// All `(tuple, leader, branch)` modes over a finite coefficient set.
pub fn modes_from_omega(omega: &[CoeffSample], laplacian: &DMatrix<f64>) -> Vec<SwitchMode> {
    let q = laplacian.nrows();
    let mut modes = Vec::new();
    for &coeffs in omega {
        for leader in 0..q {
            for branch in [Branch::Smoothing, Branch::Reset] {
                modes.push(SwitchMode {
                    coeffs,
                    laplacian: laplacian.clone(),
                    leader,
                    branch,
                });
            }
        }
    }
    modes
}
