#![allow(dead_code)]

use mco_core::graph::{laplacian, Digraph};
use mco_core::rng::{self, Domain};
use mco_core::swarm::CoeffSample;
use nalgebra::DMatrix;
use rand::Rng;

/// Directed cycle `0 -> 1 -> ... -> 0` plus the extra edges flagged in `extra`
/// (row-major over `q x q`, diagonal ignored).
pub fn strongly_connected(q: usize, extra: &[bool]) -> Digraph {
    let mut edges: Vec<(usize, usize)> = (0..q).map(|i| (i, (i + 1) % q)).collect();
    for i in 0..q {
        for j in 0..q {
            if i != j && extra.get(i * q + j).copied().unwrap_or(false) {
                edges.push((i, j));
            }
        }
    }
    Digraph::from_edges(q, true, &edges).unwrap()
}

/// Random strongly connected digraph drawn from a keyed stream.
pub fn random_digraph(q: usize, seed: u64, trial: u64) -> Digraph {
    let mut r = rng::stream(seed, Domain::Analysis, trial, 1000);
    let extra: Vec<bool> = (0..q * q).map(|_| r.gen::<f64>() < 0.4).collect();
    strongly_connected(q, &extra)
}

pub fn random_laplacian(q: usize, seed: u64, trial: u64) -> DMatrix<f64> {
    laplacian(&random_digraph(q, seed, trial))
}

pub fn coeffs(mu: f64, eta: f64, kappa: f64, h: f64) -> CoeffSample {
    CoeffSample { eta, mu, kappa, h }
}

/// Uniform on `(0, 1]`.
pub fn unit<R: Rng>(r: &mut R) -> f64 {
    1.0 - r.gen::<f64>()
}
