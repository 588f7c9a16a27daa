//! Flat key-value run configuration (TOML) and topology specifications.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_graph, Digraph, GraphKind, TopologySchedule};
use crate::io;
use crate::objectives::{get_objective, ObjectiveSpec};
use crate::swarm::{Algorithm, CoeffDistribution, CoeffMode, SwarmParams};

/// Every key is optional; unset keys fall back to defaults.
///
/// ```toml
/// algorithm = "mco"
/// objective = "sphere"
/// n = 30
/// q = 30
/// topology = "complete"
/// seed = 7
/// iters = 1000
/// h = 1.0
/// coeff_mode = "shared"
/// omega = [0.25, 0.5]
/// clamp_velocity = false
/// clamp_position = false
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Option<Algorithm>,
    pub objective: Option<String>,
    pub n: Option<usize>,
    pub q: Option<usize>,
    pub topology: Option<String>,
    pub topology_file: Option<PathBuf>,
    pub seed: Option<u64>,
    pub iters: Option<u64>,
    pub h: Option<f64>,
    pub coeff_mode: Option<CoeffMode>,
    pub omega: Option<Vec<f64>>,
    pub clamp_velocity: Option<bool>,
    pub clamp_position: Option<bool>,
    pub raw_alg1_sign: Option<bool>,
    pub stagnation_window: Option<u64>,
    pub stagnation_tol: Option<f64>,
    pub workers: Option<usize>,
    pub eval_cost_us: Option<u64>,
    pub runs: Option<usize>,
    pub seeds_from: Option<u64>,
    pub output: Option<String>,
    pub format: Option<String>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse(origin, e.message()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&io::read_to_string(path)?, path)?;
        // Relative topology files are resolved next to the config file.
        if let (Some(f), Some(dir)) = (&cfg.topology_file, path.parent()) {
            if f.is_relative() {
                cfg.topology_file = Some(dir.join(f));
            }
        }
        Ok(cfg)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merged(&self, over: &RunConfig) -> RunConfig {
        let mut out = self.clone();
        overlay!(
            out, over, algorithm, objective, n, q, topology, topology_file, seed, iters, h, coeff_mode,
            omega, clamp_velocity, clamp_position, raw_alg1_sign, stagnation_window, stagnation_tol,
            workers, eval_cost_us, runs, seeds_from, output, format
        );
        out
    }

    pub fn swarm_params(&self) -> Result<SwarmParams> {
        let d = SwarmParams::default();
        let p = SwarmParams {
            algorithm: self.algorithm.unwrap_or(d.algorithm),
            q: self.q.unwrap_or(d.q),
            n: self.n.unwrap_or(d.n),
            h: self.h.unwrap_or(d.h),
            coefficients: match &self.omega {
                Some(set) => CoeffDistribution::Finite(set.clone()),
                None => CoeffDistribution::Uniform,
            },
            coeff_mode: self.coeff_mode.unwrap_or(d.coeff_mode),
            max_iters: self.iters.unwrap_or(d.max_iters),
            stagnation_window: self.stagnation_window.unwrap_or(d.stagnation_window),
            stagnation_tol: self.stagnation_tol.unwrap_or(d.stagnation_tol),
            clamp_velocity: self.clamp_velocity.unwrap_or(false),
            clamp_position: self.clamp_position.unwrap_or(false),
            velocity_bounds: None,
            raw_alg1_sign: self.raw_alg1_sign.unwrap_or(false),
            pso: d.pso,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn objective_spec(&self) -> Result<ObjectiveSpec> {
        let name = self.objective.as_deref().unwrap_or("sphere");
        let obj = get_objective(name, self.n.unwrap_or(30))?;
        Ok(obj.with_eval_cost(Duration::from_micros(self.eval_cost_us.unwrap_or(0))))
    }

    pub fn schedule(&self) -> Result<TopologySchedule> {
        let q = self.q.unwrap_or(30);
        if let Some(path) = &self.topology_file {
            let g = Digraph::load(path)?;
            if g.q() != q {
                return Err(Error::invalid(format!(
                    "{}: graph has {} nodes but q = {q}",
                    path.display(),
                    g.q()
                )));
            }
            return Ok(TopologySchedule::Static(g));
        }
        parse_topology(self.topology.as_deref().unwrap_or("complete"), q, self.seed.unwrap_or(0))
    }
}

/// Parses `complete`, `ring`, `star`, `erdos-renyi:P`, `erdos-renyi-directed:P`
/// (one fixed random graph) or `random:P` / `random-directed:P` (a fresh
/// graph every iteration).
pub fn parse_topology(spec: &str, q: usize, seed: u64) -> Result<TopologySchedule> {
    let (kind, arg) = match spec.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (spec, None),
    };
    let prob = || -> Result<f64> {
        let a = arg.ok_or_else(|| Error::invalid(format!("topology '{kind}' needs ':P'")))?;
        a.parse::<f64>()
            .map_err(|_| Error::invalid(format!("bad edge probability '{a}'")))
    };
    let fixed = |k: GraphKind| build_graph(k, q, seed).map(TopologySchedule::Static);
    let schedule = match kind {
        "complete" => fixed(GraphKind::Complete)?,
        "ring" => fixed(GraphKind::Ring)?,
        "star" => fixed(GraphKind::Star)?,
        "erdos-renyi" => fixed(GraphKind::ErdosRenyi {
            p: prob()?,
            directed: false,
        })?,
        "erdos-renyi-directed" => fixed(GraphKind::ErdosRenyi {
            p: prob()?,
            directed: true,
        })?,
        "random" | "random-directed" => TopologySchedule::SeededRandom {
            q,
            p: prob()?,
            directed: kind == "random-directed",
            seed,
        },
        other => return Err(Error::invalid(format!("unknown topology '{other}'"))),
    };
    schedule.validate()?;
    Ok(schedule)
}
