//! Node-fixed communication graphs and their Laplacian machinery.
//!
//! An edge `i -> j` (`a[i][j] = 1`) means agent `j` is a neighbor of agent `i`,
//! so agent `i` reads `j`'s state. Degrees are row sums and the Laplacian is
//! `L = D - A`, hence `(L x)_i = sum_j a_ij (x_i - x_j)`.

use std::borrow::Cow;
use std::collections::VecDeque;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::rng::{self, Domain};

/// Directed (or undirected) graph over a fixed node set with 0/1 adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    q: usize,
    adjacency: Vec<bool>,
    directed: bool,
}

/// Generators for [`build_graph`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphKind {
    Complete,
    /// Undirected cycle `0 - 1 - ... - (q-1) - 0`.
    Ring,
    /// Undirected star centered on node 0.
    Star,
    ErdosRenyi { p: f64, directed: bool },
}

impl Digraph {
    /// Graph with no edges.
    pub fn empty(q: usize, directed: bool) -> Result<Self> {
        if q == 0 {
            return Err(Error::invalid("graph needs at least one node"));
        }
        Ok(Self {
            q,
            adjacency: vec![false; q * q],
            directed,
        })
    }

    /// Builds a graph from an edge list with 0-based node indices. For
    /// undirected graphs each listed pair is inserted in both directions.
    pub fn from_edges(q: usize, directed: bool, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(q, directed)?;
        for &(i, j) in edges {
            if i >= q || j >= q {
                return Err(Error::invalid(format!(
                    "edge ({i}, {j}) out of range for q = {q}"
                )));
            }
            if i == j {
                return Err(Error::invalid(format!("self-loop at node {i}")));
            }
            g.set(i, j);
            if !directed {
                g.set(j, i);
            }
        }
        Ok(g)
    }

    /// Builds a graph from 0/1 adjacency rows. The undirected flag is set when
    /// the matrix is symmetric.
    pub fn from_adjacency(rows: &[Vec<u8>]) -> Result<Self> {
        let q = rows.len();
        let mut g = Self::empty(q, true)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != q {
                return Err(Error::invalid("adjacency matrix must be square"));
            }
            for (j, &a) in row.iter().enumerate() {
                match a {
                    0 => {}
                    1 if i == j => return Err(Error::invalid(format!("self-loop at node {i}"))),
                    1 => g.set(i, j),
                    other => {
                        return Err(Error::invalid(format!(
                            "adjacency entries must be 0 or 1, got {other}"
                        )))
                    }
                }
            }
        }
        g.directed = !g.is_symmetric();
        Ok(g)
    }

    fn set(&mut self, i: usize, j: usize) {
        self.adjacency[i * self.q + j] = true;
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// `a_ij`.
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.q + j]
    }

    /// Neighbors of `i` in ascending order.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.adjacency[i * self.q..(i + 1) * self.q];
        row.iter().enumerate().filter(|(_, &a)| a).map(|(j, _)| j)
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).count()
    }

    /// Edge list, each undirected pair reported once with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.q {
            for j in self.neighbors(i) {
                if self.directed || i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.q, self.q, |i, j| if self.has_edge(i, j) { 1.0 } else { 0.0 })
    }

    fn is_symmetric(&self) -> bool {
        (0..self.q).all(|i| (0..i).all(|j| self.has_edge(i, j) == self.has_edge(j, i)))
    }

    /// Integer Laplacian, exact.
    pub fn laplacian_int(&self) -> Vec<i64> {
        let q = self.q;
        let mut l = vec![0i64; q * q];
        for i in 0..q {
            for j in self.neighbors(i) {
                l[i * q + j] -= 1;
                l[i * q + i] += 1;
            }
        }
        l
    }

    /// Permutes node labels: node `i` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.q {
            return Err(Error::invalid("permutation length differs from q"));
        }
        let mut g = Self::empty(self.q, self.directed)?;
        for i in 0..self.q {
            for j in self.neighbors(i) {
                g.set(perm[i], perm[j]);
            }
        }
        Ok(g)
    }
}

/// Generates a graph. The seed only matters for random kinds.
pub fn build_graph(kind: GraphKind, q: usize, seed: u64) -> Result<Digraph> {
    if q == 0 {
        return Err(Error::invalid("q must be at least 1"));
    }
    match kind {
        GraphKind::Complete => {
            let edges: Vec<_> = (0..q)
                .flat_map(|i| (0..q).filter(move |&j| j != i).map(move |j| (i, j)))
                .collect();
            Digraph::from_edges(q, false, &edges)
        }
        GraphKind::Ring => {
            let edges: Vec<_> = if q < 2 {
                Vec::new()
            } else {
                (0..q).map(|i| (i, (i + 1) % q)).collect()
            };
            Digraph::from_edges(q, false, &edges)
        }
        GraphKind::Star => {
            let edges: Vec<_> = (1..q).map(|i| (0, i)).collect();
            Digraph::from_edges(q, false, &edges)
        }
        GraphKind::ErdosRenyi { p, directed } => {
            let mut rng = rng::stream(seed, Domain::Graph, q as u64, 0);
            erdos_renyi(q, p, directed, &mut rng)
        }
    }
}

fn erdos_renyi<R: Rng>(q: usize, p: f64, directed: bool, rng: &mut R) -> Result<Digraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("edge probability {p} outside [0, 1]")));
    }
    let mut g = Digraph::empty(q, directed)?;
    for i in 0..q {
        for j in 0..q {
            if i == j || (!directed && j < i) {
                continue;
            }
            if rng.gen::<f64>() < p {
                g.set(i, j);
                if !directed {
                    g.set(j, i);
                }
            }
        }
    }
    Ok(g)
}

/// Diagonal matrix of out-degrees.
pub fn degree_matrix(g: &Digraph) -> DMatrix<f64> {
    let q = g.q();
    DMatrix::from_fn(q, q, |i, j| if i == j { g.degree(i) as f64 } else { 0.0 })
}

/// `L = D - A`, built in integer arithmetic so rows sum to exactly zero.
pub fn laplacian(g: &Digraph) -> DMatrix<f64> {
    let q = g.q();
    let l = g.laplacian_int();
    DMatrix::from_fn(q, q, |i, j| l[i * q + j] as f64)
}

fn reaches_all(g: &Digraph, reverse: bool) -> bool {
    let q = g.q();
    let mut seen = vec![false; q];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for v in 0..q {
            let edge = if reverse { g.has_edge(v, u) } else { g.has_edge(u, v) };
            if edge && !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// True iff every node reaches every other node.
pub fn is_strongly_connected(g: &Digraph) -> bool {
    reaches_all(g, false) && reaches_all(g, true)
}

/// Checks that every eigenvalue of `l` with modulus above `tol` has
/// `|arg| <= pi/2 - pi/q + tol`. Eigenvalues at the origin are exempt.
pub fn check_laplacian_argument_bound(l: &DMatrix<f64>, q: usize, tol: f64) -> Result<bool> {
    if q < 2 {
        return Err(Error::invalid("argument bound needs q >= 2"));
    }
    if l.nrows() != q || l.ncols() != q {
        return Err(Error::invalid("Laplacian shape does not match q"));
    }
    let bound = std::f64::consts::FRAC_PI_2 - std::f64::consts::PI / q as f64;
    let eigs = crate::analysis::linalg::eigenvalues(l);
    Ok(eigs
        .iter()
        .filter(|z| z.norm() > tol)
        .all(|z| z.arg().abs() <= bound + tol && z.re >= -tol))
}

/// Time-varying topology over a fixed node set.
#[derive(Debug, Clone, PartialEq)]
pub enum TopologySchedule {
    Static(Digraph),
    Periodic(Vec<Digraph>),
    /// A fresh Erdős–Rényi graph per time step, keyed by `(seed, t)`.
    SeededRandom {
        q: usize,
        p: f64,
        directed: bool,
        seed: u64,
    },
}

impl TopologySchedule {
    pub fn q(&self) -> Option<usize> {
        match self {
            TopologySchedule::Static(g) => Some(g.q()),
            TopologySchedule::Periodic(list) => list.first().map(Digraph::q),
            TopologySchedule::SeededRandom { q, .. } => Some(*q),
        }
    }

    /// Rejects empty lists and lists mixing node counts.
    pub fn validate(&self) -> Result<()> {
        match self {
            TopologySchedule::Static(_) => Ok(()),
            TopologySchedule::Periodic(list) => {
                let first = list
                    .first()
                    .ok_or_else(|| Error::invalid("periodic topology list is empty"))?;
                if list.iter().any(|g| g.q() != first.q()) {
                    return Err(Error::invalid("periodic topology mixes node counts"));
                }
                Ok(())
            }
            TopologySchedule::SeededRandom { q, p, .. } => {
                if *q == 0 {
                    return Err(Error::invalid("q must be at least 1"));
                }
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::invalid(format!("edge probability {p} outside [0, 1]")));
                }
                Ok(())
            }
        }
    }
}

/// Graph in force at step `t`.
pub fn topology_at(s: &TopologySchedule, t: u64) -> Result<Cow<'_, Digraph>> {
    match s {
        TopologySchedule::Static(g) => Ok(Cow::Borrowed(g)),
        TopologySchedule::Periodic(list) => {
            if list.is_empty() {
                return Err(Error::invalid("periodic topology list is empty"));
            }
            let idx = (t % list.len() as u64) as usize;
            Ok(Cow::Borrowed(&list[idx]))
        }
        TopologySchedule::SeededRandom {
            q,
            p,
            directed,
            seed,
        } => {
            let mut rng = rng::stream(*seed, Domain::Topology, t, *q as u64);
            erdos_renyi(*q, *p, *directed, &mut rng).map(Cow::Owned)
        }
    }
}

/// On-disk graph format: `{"q": 3, "directed": false, "edges": [[0, 1], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFile {
    pub q: usize,
    pub directed: bool,
    pub edges: Vec<[usize; 2]>,
}

impl From<&Digraph> for GraphFile {
    fn from(g: &Digraph) -> Self {
        GraphFile {
            q: g.q(),
            directed: g.is_directed(),
            edges: g.edges().into_iter().map(|(i, j)| [i, j]).collect(),
        }
    }
}

impl TryFrom<GraphFile> for Digraph {
    type Error = Error;

    fn try_from(f: GraphFile) -> Result<Self> {
        let edges: Vec<_> = f.edges.iter().map(|e| (e[0], e[1])).collect();
        Digraph::from_edges(f.q, f.directed, &edges)
    }
}

impl Digraph {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&GraphFile::from(self)).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: GraphFile =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("graph JSON: {e}")))?;
        f.try_into()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::parse(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_json().as_bytes())
    }
}
