//! Benchmark objectives and the generic objective interface.

use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};

pub type ObjectiveFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A function to minimize together with its search box.
#[derive(Clone)]
pub struct ObjectiveSpec {
    pub name: String,
    pub n: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    optimum: Option<(f64, Vec<f64>)>,
    /// Busy-wait added to every evaluation.
    pub eval_cost: Duration,
    func: ObjectiveFn,
}

impl fmt::Debug for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveSpec")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("optimum", &self.optimum)
            .field("eval_cost", &self.eval_cost)
            .finish_non_exhaustive()
    }
}

impl ObjectiveSpec {
    /// User-supplied objective over the box `[lower, upper]`.
    pub fn custom(
        name: impl Into<String>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        func: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::invalid("bounds must be nonempty and of equal length"));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u))
        {
            return Err(Error::invalid("bounds must be finite with lower < upper"));
        }
        Ok(Self {
            name: name.into(),
            n: lower.len(),
            lower,
            upper,
            optimum: None,
            eval_cost: Duration::ZERO,
            func: Arc::new(func),
        })
    }

    /// Attaches a known optimum, checking that it evaluates to `value`.
    pub fn with_optimum(mut self, value: f64, x: Vec<f64>) -> Result<Self> {
        let got = self.evaluate(&x)?;
        if (got - value).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "optimum mismatch: f(x*) = {got}, claimed {value}"
            )));
        }
        self.optimum = Some((value, x));
        Ok(self)
    }

    pub fn with_eval_cost(mut self, cost: Duration) -> Self {
        self.eval_cost = cost;
        self
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::invalid(format!(
                "{}: expected {} coordinates, got {}",
                self.name,
                self.n,
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("{}: non-finite input", self.name)));
        }
        Ok(self.evaluate_unchecked(x))
    }

    /// Evaluation without argument checks. Callers guarantee the length.
    pub fn evaluate_unchecked(&self, x: &[f64]) -> f64 {
        let value = (self.func)(x);
        spin(self.eval_cost);
        value
    }
}

fn spin(cost: Duration) {
    if cost.is_zero() {
        return;
    }
    let start = Instant::now();
    while start.elapsed() < cost {
        std::hint::spin_loop();
    }
}

pub fn known_minimum(obj: &ObjectiveSpec) -> Option<(f64, Vec<f64>)> {
    obj.optimum.clone()
}

/// One registry row.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegistryEntry {
    pub name: &'static str,
    pub default_n: usize,
    pub bound: f64,
    pub min_n: usize,
    pub f_star: Option<f64>,
}

pub const REGISTRY: &[RegistryEntry] = &[
    entry("sphere", 30.0, 1, Some(0.0)),
    entry("rosenbrock", 30.0, 2, Some(0.0)),
    entry("rastrigin", 30.0, 1, Some(0.0)),
    entry("griewank", 600.0, 1, Some(0.0)),
    entry("ackley", 32.768, 1, Some(0.0)),
    entry("dejong-f4", 20.0, 1, Some(0.0)),
    entry("zakharov", 10.0, 1, Some(0.0)),
    entry("levy-paper", 10.0, 2, None),
    entry("levy-standard", 10.0, 2, Some(0.0)),
];

const fn entry(name: &'static str, bound: f64, min_n: usize, f_star: Option<f64>) -> RegistryEntry {
    RegistryEntry {
        name,
        default_n: 30,
        bound,
        min_n,
        f_star,
    }
}

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
            .sum::<f64>()
}

pub fn griewank(x: &[f64]) -> f64 {
    let s: f64 = x.iter().map(|v| v * v).sum::<f64>() / 4000.0;
    let p: f64 = x
        .iter()
        .enumerate()
        .map(|(j, v)| (v / ((j + 1) as f64).sqrt()).cos())
        .product();
    s - p + 1.0
}

pub fn ackley(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let s2 = x.iter().map(|v| v * v).sum::<f64>() / n;
    let sc = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
    -20.0 * (-0.2 * s2.sqrt()).exp() - sc.exp() + 20.0 + E
}

pub fn dejong_f4(x: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(j, v)| (j + 1) as f64 * v.powi(4))
        .sum()
}

pub fn zakharov(x: &[f64]) -> f64 {
    let s1: f64 = x.iter().map(|v| v * v).sum();
    let s2: f64 = x
        .iter()
        .enumerate()
        .map(|(j, v)| 0.5 * (j + 1) as f64 * v)
        .sum();
    s1 + s2.powi(2) + s2.powi(4)
}

fn levy_terms(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    let head = (PI * x[0]).sin().powi(2)
        + (x[n - 1] - 1.0).powi(2) * (1.0 + (2.0 * PI * x[n - 1]).sin().powi(2));
    let sum = x[..n - 1]
        .iter()
        .map(|v| (v - 1.0).powi(2) * (1.0 + 10.0 * (PI * v + 1.0).sin().powi(2)))
        .sum();
    (head, sum)
}

/// Verbatim form with a minus in front of the sum; unbounded below.
pub fn levy_paper(x: &[f64]) -> f64 {
    let (head, sum) = levy_terms(x);
    head - sum
}

pub fn levy_standard(x: &[f64]) -> f64 {
    let (head, sum) = levy_terms(x);
    head + sum
}

/// Looks up a registry objective of dimension `n`.
pub fn get_objective(name: &str, n: usize) -> Result<ObjectiveSpec> {
    let e = REGISTRY
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::NotFound(format!("unknown objective '{name}'")))?;
    if n < e.min_n {
        return Err(Error::invalid(format!(
            "{name} needs n >= {}, got {n}",
            e.min_n
        )));
    }
    let func: fn(&[f64]) -> f64 = match name {
        "sphere" => sphere,
        "rosenbrock" => rosenbrock,
        "rastrigin" => rastrigin,
        "griewank" => griewank,
        "ackley" => ackley,
        "dejong-f4" => dejong_f4,
        "zakharov" => zakharov,
        "levy-paper" => levy_paper,
        "levy-standard" => levy_standard,
        _ => unreachable!("registry and dispatch disagree"),
    };
    let spec = ObjectiveSpec::custom(name, vec![-e.bound; n], vec![e.bound; n], func)?;
    let optimizer = match name {
        "rosenbrock" | "levy-standard" => Some(vec![1.0; n]),
        "levy-paper" => None,
        _ => Some(vec![0.0; n]),
    };
    match optimizer {
        Some(x) => spec.with_optimum(0.0, x),
        None => Ok(spec),
    }
}
