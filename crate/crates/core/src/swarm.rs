//! MCO iteration, PSO baseline and the run loop.
//!
//! Per-agent updates read a frozen snapshot of the swarm and are computed in
//! parallel on the current rayon pool. Best tracking is a sequential pass in
//! ascending agent order. All random draws come from counter-keyed streams, so
//! a run is bit-identical for any worker count.

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{topology_at, Digraph, TopologySchedule};
use crate::objectives::ObjectiveSpec;
use crate::rng::{self, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    #[default]
    Mco,
    Pso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoeffMode {
    /// One `(eta, mu, kappa)` per iteration, shared by all agents.
    #[default]
    Shared,
    PerAgent,
}

/// Distribution of each of `eta`, `mu`, `kappa`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoeffDistribution {
    #[default]
    Uniform,
    /// Each coefficient is drawn independently and uniformly from the set.
    Finite(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsoParams {
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            w: 0.7298,
            c1: 1.49618,
            c2: 1.49618,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwarmParams {
    pub algorithm: Algorithm,
    pub q: usize,
    pub n: usize,
    pub h: f64,
    pub coefficients: CoeffDistribution,
    pub coeff_mode: CoeffMode,
    pub max_iters: u64,
    pub stagnation_window: u64,
    pub stagnation_tol: f64,
    pub clamp_velocity: bool,
    pub clamp_position: bool,
    /// Initial velocity box; defaults to the position box.
    pub velocity_bounds: Option<(f64, f64)>,
    /// Apply `+L` to the consensus terms instead of `-L`.
    pub raw_alg1_sign: bool,
    pub pso: PsoParams,
}

impl Default for SwarmParams {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Mco,
            q: 30,
            n: 30,
            h: 1.0,
            coefficients: CoeffDistribution::Uniform,
            coeff_mode: CoeffMode::Shared,
            max_iters: 1000,
            stagnation_window: 100,
            stagnation_tol: 1e-12,
            clamp_velocity: false,
            clamp_position: false,
            velocity_bounds: None,
            raw_alg1_sign: false,
            pso: PsoParams::default(),
        }
    }
}

impl SwarmParams {
    pub fn validate(&self) -> Result<()> {
        if self.q < 2 {
            return Err(Error::invalid("q must be at least 2"));
        }
        if self.n < 1 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::invalid("h must be positive and finite"));
        }
        if self.stagnation_window < 1 {
            return Err(Error::invalid("stagnation window must be at least 1"));
        }
        if !(self.stagnation_tol.is_finite() && self.stagnation_tol >= 0.0) {
            return Err(Error::invalid("stagnation tolerance must be finite and >= 0"));
        }
        if let CoeffDistribution::Finite(set) = &self.coefficients {
            if set.is_empty() {
                return Err(Error::invalid("finite coefficient set is empty"));
            }
            if set.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(Error::invalid("finite coefficient set must lie in [0, 1]"));
            }
        }
        if let Some((lo, hi)) = self.velocity_bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid("velocity bounds must be finite with lo < hi"));
            }
        }
        let p = &self.pso;
        if [p.w, p.c1, p.c2].iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("PSO parameters must be finite"));
        }
        Ok(())
    }
}

/// One iteration's random coefficients plus the step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoeffSample {
    pub eta: f64,
    pub mu: f64,
    pub kappa: f64,
    pub h: f64,
}

/// Coefficients in force for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    Shared(CoeffSample),
    PerAgent(Vec<CoeffSample>),
}

impl Coefficients {
    pub fn for_agent(&self, i: usize) -> &CoeffSample {
        match self {
            Coefficients::Shared(c) => c,
            Coefficients::PerAgent(v) => &v[i],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmState {
    /// Completed iterations.
    pub t: u64,
    pub seed: u64,
    pub x: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// `f(x_i)` at the current positions.
    pub x_val: Vec<f64>,
    pub pbest: Vec<Vec<f64>>,
    pub pbest_val: Vec<f64>,
    pub best: Vec<f64>,
    pub best_val: f64,
}

impl SwarmState {
    pub fn q(&self) -> usize {
        self.x.len()
    }
}

/// Objective value used inside the optimizer: diverged points rank last.
fn fitness(obj: &ObjectiveSpec, x: &[f64]) -> f64 {
    if x.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let f = obj.evaluate_unchecked(x);
    if f.is_nan() {
        f64::INFINITY
    } else {
        f
    }
}

fn velocity_box(params: &SwarmParams, obj: &ObjectiveSpec, j: usize) -> (f64, f64) {
    params
        .velocity_bounds
        .unwrap_or((obj.lower[j], obj.upper[j]))
}

fn check_dims(params: &SwarmParams, obj: &ObjectiveSpec) -> Result<()> {
    params.validate()?;
    if obj.n != params.n {
        return Err(Error::invalid(format!(
            "objective dimension {} does not match n = {}",
            obj.n, params.n
        )));
    }
    Ok(())
}

pub fn init_swarm(params: &SwarmParams, obj: &ObjectiveSpec, seed: u64) -> Result<SwarmState> {
    check_dims(params, obj)?;
    let n = params.n;
    let agents: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..params.q)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, Domain::Init, i as u64, 0);
            let x: Vec<f64> = (0..n)
                .map(|j| uniform(&mut r, obj.lower[j], obj.upper[j]))
                .collect();
            let v: Vec<f64> = (0..n)
                .map(|j| {
                    let (lo, hi) = velocity_box(params, obj, j);
                    uniform(&mut r, lo, hi)
                })
                .collect();
            let f = fitness(obj, &x);
            (x, v, f)
        })
        .collect();
    let mut state = SwarmState {
        t: 0,
        seed,
        x: Vec::with_capacity(params.q),
        v: Vec::with_capacity(params.q),
        x_val: Vec::with_capacity(params.q),
        pbest: Vec::new(),
        pbest_val: Vec::new(),
        best: agents[0].0.clone(),
        best_val: agents[0].2,
    };
    for (x, v, f) in agents {
        if f < state.best_val {
            state.best = x.clone();
            state.best_val = f;
        }
        state.x.push(x);
        state.v.push(v);
        state.x_val.push(f);
    }
    state.pbest = state.x.clone();
    state.pbest_val = state.x_val.clone();
    Ok(state)
}

fn uniform<R: Rng>(r: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * r.gen::<f64>()
}

fn draw_coeff<R: Rng>(r: &mut R, dist: &CoeffDistribution) -> f64 {
    match dist {
        CoeffDistribution::Uniform => r.gen::<f64>(),
        CoeffDistribution::Finite(set) => set[r.gen_range(0..set.len())],
    }
}

fn draw_sample(seed: u64, t: u64, slot: u64, params: &SwarmParams) -> CoeffSample {
    let mut r = rng::stream(seed, Domain::Coefficients, t, slot);
    let eta = draw_coeff(&mut r, &params.coefficients);
    let mu = draw_coeff(&mut r, &params.coefficients);
    let kappa = draw_coeff(&mut r, &params.coefficients);
    CoeffSample {
        eta,
        mu,
        kappa,
        h: params.h,
    }
}

const SHARED_SLOT: u64 = u64::MAX;

/// Shared coefficient sample for the next iteration of `state`.
pub fn sample_coeffs(state: &SwarmState, params: &SwarmParams) -> CoeffSample {
    draw_sample(state.seed, state.t, SHARED_SLOT, params)
}

/// Coefficients for the next iteration under the configured sharing mode.
pub fn iteration_coeffs(state: &SwarmState, params: &SwarmParams) -> Coefficients {
    match params.coeff_mode {
        CoeffMode::Shared => Coefficients::Shared(sample_coeffs(state, params)),
        CoeffMode::PerAgent => Coefficients::PerAgent(
            (0..state.q())
                .map(|i| draw_sample(state.seed, state.t, i as u64, params))
                .collect(),
        ),
    }
}

fn clamp_agent(x: &mut [f64], v: &mut [f64], params: &SwarmParams, obj: &ObjectiveSpec) {
    for j in 0..x.len() {
        if params.clamp_velocity {
            let (lo, hi) = velocity_box(params, obj, j);
            v[j] = v[j].clamp(lo, hi);
        }
        if params.clamp_position {
            x[j] = x[j].clamp(obj.lower[j], obj.upper[j]);
        }
    }
}

/// Velocity and position update of every agent from a frozen snapshot.
pub fn mco_step(
    state: &SwarmState,
    coeffs: &Coefficients,
    g: &Digraph,
    obj: &ObjectiveSpec,
    params: &SwarmParams,
) -> Result<SwarmState> {
    let q = state.q();
    if g.q() != q {
        return Err(Error::invalid(format!(
            "graph has {} nodes but the swarm has {q} agents",
            g.q()
        )));
    }
    if let Coefficients::PerAgent(v) = coeffs {
        if v.len() != q {
            return Err(Error::invalid("one coefficient sample per agent required"));
        }
    }
    let sign = if params.raw_alg1_sign { -1.0 } else { 1.0 };
    let (xs, vs, p) = (&state.x, &state.v, &state.best);
    let updated: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..q)
        .into_par_iter()
        .map(|i| {
            let c = coeffs.for_agent(i);
            let (xi, vi) = (&xs[i], &vs[i]);
            let mut v_new = vi.clone();
            for d in 0..xi.len() {
                let mut dv = 0.0;
                let mut dx = 0.0;
                for j in g.neighbors(i) {
                    dv += vs[j][d] - vi[d];
                    dx += xs[j][d] - xi[d];
                }
                let accel = sign * (c.eta * dv + c.mu * dx) + c.kappa * (p[d] - xi[d]);
                v_new[d] = vi[d] + c.h * accel;
            }
            let mut x_new: Vec<f64> = xi.iter().zip(&v_new).map(|(x, v)| x + c.h * v).collect();
            clamp_agent(&mut x_new, &mut v_new, params, obj);
            let f = fitness(obj, &x_new);
            (x_new, v_new, f)
        })
        .collect();
    Ok(assemble_step(state, updated))
}

fn assemble_step(state: &SwarmState, updated: Vec<(Vec<f64>, Vec<f64>, f64)>) -> SwarmState {
    let mut next = state.clone();
    for (i, (x, v, f)) in updated.into_iter().enumerate() {
        next.x[i] = x;
        next.v[i] = v;
        next.x_val[i] = f;
    }
    next.t += 1;
    next
}

/// Personal/network best update of the MCO listing, ascending agent order.
pub fn update_bests(state: &SwarmState, coeffs: &Coefficients, obj: &ObjectiveSpec) -> SwarmState {
    let mut s = state.clone();
    for i in 0..s.q() {
        if s.x_val[i] < s.pbest_val[i] {
            s.pbest[i] = s.x[i].clone();
            s.pbest_val[i] = s.x_val[i];
            let kappa = coeffs.for_agent(i).kappa;
            for (pd, pid) in s.best.iter_mut().zip(&s.pbest[i]) {
                *pd += kappa * (pid - *pd);
            }
            s.best_val = fitness(obj, &s.best);
            if s.pbest_val[i] < s.best_val {
                s.best = s.pbest[i].clone();
                s.best_val = s.pbest_val[i];
            }
        }
    }
    s
}

/// Standard global-best PSO step followed by plain best overwrite.
pub fn pso_step(state: &SwarmState, obj: &ObjectiveSpec, params: &SwarmParams) -> SwarmState {
    let PsoParams { w, c1, c2 } = params.pso;
    let p = &state.best;
    let updated: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..state.q())
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(state.seed, Domain::Pso, state.t, i as u64);
            let (xi, vi, pi) = (&state.x[i], &state.v[i], &state.pbest[i]);
            let mut v_new: Vec<f64> = (0..xi.len())
                .map(|d| {
                    let r1: f64 = r.gen();
                    let r2: f64 = r.gen();
                    w * vi[d] + c1 * r1 * (pi[d] - xi[d]) + c2 * r2 * (p[d] - xi[d])
                })
                .collect();
            let mut x_new: Vec<f64> = xi.iter().zip(&v_new).map(|(x, v)| x + v).collect();
            clamp_agent(&mut x_new, &mut v_new, params, obj);
            let f = fitness(obj, &x_new);
            (x_new, v_new, f)
        })
        .collect();
    let mut s = assemble_step(state, updated);
    for i in 0..s.q() {
        if s.x_val[i] < s.pbest_val[i] {
            s.pbest[i] = s.x[i].clone();
            s.pbest_val[i] = s.x_val[i];
            if s.pbest_val[i] < s.best_val {
                s.best = s.pbest[i].clone();
                s.best_val = s.pbest_val[i];
            }
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxIters,
    Stagnation,
}

/// Result of one optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub objective: String,
    pub seed: u64,
    pub iterations: u64,
    pub stop_reason: StopReason,
    pub best_value: f64,
    pub best_position: Vec<f64>,
    /// Running minimum of the network best value, starting with the initial swarm.
    pub trace: Vec<f64>,
    pub topology: String,
    pub params: SwarmParams,
    /// Kept out of serialized records so they stay reproducible byte for byte.
    #[serde(skip)]
    pub duration: Duration,
}

impl RunRecord {
    /// `iter,best_value` rows.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,best_value\n");
        for (k, v) in self.trace.iter().enumerate() {
            out.push_str(&format!("{k},{v:e}\n"));
        }
        out
    }
}

pub fn describe_schedule(s: &TopologySchedule) -> String {
    match s {
        TopologySchedule::Static(g) => format!(
            "static(q={}, edges={}, directed={})",
            g.q(),
            g.edges().len(),
            g.is_directed()
        ),
        TopologySchedule::Periodic(list) => format!("periodic(len={})", list.len()),
        TopologySchedule::SeededRandom {
            q,
            p,
            directed,
            seed,
        } => format!("seeded-random(q={q}, p={p}, directed={directed}, seed={seed})"),
    }
}

fn stagnated(trace: &[f64], window: u64, tol: f64) -> bool {
    let w = window as usize;
    if trace.len() <= w {
        return false;
    }
    let now = trace[trace.len() - 1];
    let then = trace[trace.len() - 1 - w];
    if !now.is_finite() || !then.is_finite() {
        return false;
    }
    (now - then).abs() <= tol * now.abs().max(1.0)
}

/// Runs on the current rayon pool.
pub fn run(
    params: &SwarmParams,
    obj: &ObjectiveSpec,
    schedule: &TopologySchedule,
    seed: u64,
) -> Result<RunRecord> {
    let started = Instant::now();
    check_dims(params, obj)?;
    if params.algorithm == Algorithm::Mco {
        schedule.validate()?;
        if schedule.q() != Some(params.q) {
            return Err(Error::invalid(format!(
                "topology has {:?} nodes but q = {}",
                schedule.q(),
                params.q
            )));
        }
    }
    let mut state = init_swarm(params, obj, seed)?;
    let mut best_val = state.best_val;
    let mut best_pos = state.best.clone();
    let mut trace = vec![best_val];
    let mut stop_reason = StopReason::MaxIters;
    while state.t < params.max_iters {
        state = match params.algorithm {
            Algorithm::Mco => {
                let g = topology_at(schedule, state.t)?;
                let coeffs = iteration_coeffs(&state, params);
                let moved = mco_step(&state, &coeffs, &g, obj, params)?;
                update_bests(&moved, &coeffs, obj)
            }
            Algorithm::Pso => pso_step(&state, obj, params),
        };
        if state.best_val < best_val {
            best_val = state.best_val;
            best_pos = state.best.clone();
        }
        trace.push(best_val);
        if stagnated(&trace, params.stagnation_window, params.stagnation_tol) {
            stop_reason = StopReason::Stagnation;
            break;
        }
    }
    Ok(RunRecord {
        algorithm: params.algorithm,
        objective: obj.name.clone(),
        seed,
        iterations: state.t,
        stop_reason,
        best_value: best_val,
        best_position: best_pos,
        trace,
        topology: describe_schedule(schedule),
        params: params.clone(),
        duration: started.elapsed(),
    })
}

pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::invalid("worker count must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))
}

/// Runs on a dedicated pool of `workers` threads.
pub fn run_with_workers(
    params: &SwarmParams,
    obj: &ObjectiveSpec,
    schedule: &TopologySchedule,
    seed: u64,
    workers: usize,
) -> Result<RunRecord> {
    worker_pool(workers)?.install(|| run(params, obj, schedule, seed))
}
