//! Multi-seed statistics, serial/parallel timing and worker sweeps.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TopologySchedule;
use crate::io;
use crate::objectives::ObjectiveSpec;
use crate::swarm::{self, Algorithm, RunRecord, SwarmParams};

/// Everything needed to repeat a run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub params: SwarmParams,
    pub objective: ObjectiveSpec,
    pub schedule: TopologySchedule,
}

impl Experiment {
    pub fn run(&self, seed: u64) -> Result<RunRecord> {
        swarm::run(&self.params, &self.objective, &self.schedule, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub objective: String,
    pub algorithm: Algorithm,
    pub runs: usize,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub average: f64,
    pub seeds: Vec<u64>,
    pub best_values: Vec<f64>,
    pub config: SwarmParams,
}

/// The CSV-visible part of a [`StatsSummary`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub objective: String,
    pub algorithm: Algorithm,
    pub runs: usize,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub average: f64,
}

impl StatsSummary {
    pub fn from_values(
        objective: &str,
        algorithm: Algorithm,
        seeds: Vec<u64>,
        best_values: Vec<f64>,
        config: SwarmParams,
    ) -> Result<Self> {
        if best_values.is_empty() || seeds.len() != best_values.len() {
            return Err(Error::invalid("need one best value per seed and at least one seed"));
        }
        let mut sorted = best_values.clone();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len();
        let median = if m % 2 == 1 {
            sorted[m / 2]
        } else {
            0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
        };
        let average = sorted.iter().sum::<f64>() / m as f64;
        Ok(Self {
            objective: objective.to_string(),
            algorithm,
            runs: m,
            min: sorted[0],
            max: sorted[m - 1],
            // Summation rounding can push the mean of equal values a hair
            // outside [min, max].
            average: average.clamp(sorted[0], sorted[m - 1]),
            median,
            seeds,
            best_values,
            config,
        })
    }

    pub fn row(&self) -> StatsRow {
        StatsRow {
            objective: self.objective.clone(),
            algorithm: self.algorithm,
            runs: self.runs,
            min: self.min,
            max: self.max,
            median: self.median,
            average: self.average,
        }
    }
}

/// Runs every seed on a pool of `workers` threads and aggregates final bests.
pub fn run_trials(exp: &Experiment, seeds: &[u64], workers: usize) -> Result<StatsSummary> {
    if seeds.is_empty() {
        return Err(Error::invalid("at least one seed is required"));
    }
    let pool = swarm::worker_pool(workers)?;
    let records: Vec<RunRecord> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| exp.run(s))
            .collect::<Result<Vec<_>>>()
    })?;
    StatsSummary::from_values(
        &exp.objective.name,
        exp.params.algorithm,
        seeds.to_vec(),
        records.iter().map(|r| r.best_value).collect(),
        exp.params.clone(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub workers: usize,
    pub eval_cost_us: u64,
    /// Seconds on one worker.
    pub t_seri: f64,
    /// Seconds on `workers` workers.
    pub t_para: f64,
    pub saved_percent: f64,
    pub speedup: f64,
    pub best_value: Option<f64>,
    /// Serial and parallel runs produced identical records.
    pub deterministic: bool,
}

impl TimingReport {
    pub fn from_times(t_seri: f64, t_para: f64, workers: usize, eval_cost_us: u64) -> Result<Self> {
        if !(t_seri > 0.0 && t_para > 0.0 && t_seri.is_finite() && t_para.is_finite()) {
            return Err(Error::invalid("timings must be positive and finite"));
        }
        Ok(Self {
            workers,
            eval_cost_us,
            t_seri,
            t_para,
            saved_percent: (t_seri - t_para) / t_seri * 100.0,
            speedup: t_seri / t_para,
            best_value: None,
            deterministic: true,
        })
    }

    /// Recomputes the derived fields from the raw times.
    pub fn validate(&self) -> Result<()> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
        let speedup = self.t_seri / self.t_para;
        let saved = (self.t_seri - self.t_para) / self.t_seri * 100.0;
        if !close(speedup, self.speedup) {
            return Err(Error::invalid(format!(
                "stored speedup {} disagrees with t_seri/t_para = {speedup}",
                self.speedup
            )));
        }
        if !(close(saved, self.saved_percent) || (saved - self.saved_percent).abs() <= 1e-10) {
            return Err(Error::invalid(format!(
                "stored saved% {} disagrees with recomputed {saved}",
                self.saved_percent
            )));
        }
        Ok(())
    }
}

fn timed_run(exp: &Experiment, seed: u64, workers: usize) -> Result<(RunRecord, f64)> {
    let pool = swarm::worker_pool(workers)?;
    let start = Instant::now();
    let rec = pool.install(|| exp.run(seed))?;
    Ok((rec, start.elapsed().as_secs_f64()))
}

fn same_result(a: &RunRecord, b: &RunRecord) -> bool {
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    bits(&a.trace) == bits(&b.trace) && bits(&a.best_position) == bits(&b.best_position)
}

fn eval_cost_us(exp: &Experiment) -> u64 {
    exp.objective.eval_cost.as_micros() as u64
}

/// Runs the same seeded workload on one worker and on `workers` workers.
pub fn timing_compare(exp: &Experiment, seed: u64, workers: usize) -> Result<TimingReport> {
    let (serial, t_seri) = timed_run(exp, seed, 1)?;
    let (parallel, t_para) = timed_run(exp, seed, workers)?;
    let mut report = TimingReport::from_times(t_seri, t_para, workers, eval_cost_us(exp))?;
    report.best_value = Some(parallel.best_value);
    report.deterministic = same_result(&serial, &parallel);
    Ok(report)
}

/// One report per worker count against a single serial baseline.
pub fn scalability_sweep(exp: &Experiment, seed: u64, worker_list: &[usize]) -> Result<Vec<TimingReport>> {
    if worker_list.is_empty() {
        return Err(Error::invalid("worker list is empty"));
    }
    let (serial, t_seri) = timed_run(exp, seed, 1)?;
    worker_list
        .iter()
        .map(|&w| {
            let (rec, t_para) = if w == 1 {
                (serial.clone(), t_seri)
            } else {
                timed_run(exp, seed, w)?
            };
            let mut r = TimingReport::from_times(t_seri, t_para, w, eval_cost_us(exp))?;
            r.best_value = Some(rec.best_value);
            r.deterministic = same_result(&serial, &rec);
            Ok(r)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::invalid(format!("unknown format '{other}' (csv or json)"))),
        }
    }
}

fn csv_of<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::invalid(format!("csv: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::invalid(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn stats_csv(summaries: &[StatsSummary]) -> Result<String> {
    csv_of(summaries.iter().map(StatsSummary::row))
}

pub fn timing_csv(reports: &[TimingReport]) -> Result<String> {
    csv_of(reports)
}

fn rows_from_csv<T: DeserializeOwned>(text: &str, origin: &Path) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::parse(origin, e))
}

pub fn stats_from_csv(text: &str) -> Result<Vec<StatsRow>> {
    rows_from_csv(text, Path::new("<csv>"))
}

pub fn timing_from_csv(text: &str) -> Result<Vec<TimingReport>> {
    rows_from_csv(text, Path::new("<csv>"))
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("values serialize");
    s.push('\n');
    s
}

/// Writes `summaries` as CSV rows or a JSON array, atomically.
pub fn export_stats(summaries: &[StatsSummary], format: Format, path: &Path) -> Result<()> {
    let text = match format {
        Format::Csv => stats_csv(summaries)?,
        Format::Json => to_json(summaries),
    };
    io::write_atomic(path, text.as_bytes())
}

pub fn export_timing(reports: &[TimingReport], format: Format, path: &Path) -> Result<()> {
    let text = match format {
        Format::Csv => timing_csv(reports)?,
        Format::Json => to_json(reports),
    };
    io::write_atomic(path, text.as_bytes())
}

pub fn import_stats_json(path: &Path) -> Result<Vec<StatsSummary>> {
    let text = io::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

pub fn import_stats_csv(path: &Path) -> Result<Vec<StatsRow>> {
    rows_from_csv(&io::read_to_string(path)?, path)
}

pub fn import_timing_json(path: &Path) -> Result<Vec<TimingReport>> {
    let text = io::read_to_string(path)?;
    let reports: Vec<TimingReport> = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
    for r in &reports {
        r.validate().map_err(|e| Error::parse(path, e))?;
    }
    Ok(reports)
}

pub fn import_timing_csv(path: &Path) -> Result<Vec<TimingReport>> {
    let reports: Vec<TimingReport> = rows_from_csv(&io::read_to_string(path)?, path)?;
    for r in &reports {
        r.validate().map_err(|e| Error::parse(path, e))?;
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, GraphKind};
    use crate::objectives::get_objective;
    use proptest::prelude::*;

    fn small(n: usize, q: usize, iters: u64) -> Experiment {
        Experiment {
            params: SwarmParams {
                q,
                n,
                max_iters: iters,
                ..SwarmParams::default()
            },
            objective: get_objective("sphere", n).unwrap(),
            schedule: TopologySchedule::Static(build_graph(GraphKind::Complete, q, 0).unwrap()),
        }
    }

    #[test]
    fn single_seed_collapses() {
        let s = run_trials(&small(2, 4, 20), &[3], 1).unwrap();
        assert_eq!(s.runs, 1);
        assert!(s.min == s.max && s.max == s.median && s.median == s.average);
    }

    #[test]
    fn ordering_and_worker_independence() {
        let exp = small(2, 5, 40);
        let a = run_trials(&exp, &[1, 2, 3], 1).unwrap();
        let b = run_trials(&exp, &[1, 2, 3], 4).unwrap();
        assert!(a.min <= a.median && a.median <= a.max);
        assert!(a.min <= a.average && a.average <= a.max);
        assert_eq!(a, b);
        assert!(run_trials(&exp, &[], 1).is_err());
    }

    #[test]
    fn even_median_is_midpoint() {
        let s = StatsSummary::from_values("x", Algorithm::Mco, vec![1, 2, 3, 4], vec![4.0, 1.0, 3.0, 2.0], SwarmParams::default())
            .unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.average, 2.5);
    }

    #[test]
    fn timing_formula() {
        let r = TimingReport::from_times(10.0, 5.0, 4, 0).unwrap();
        assert_eq!(r.saved_percent, 50.0);
        assert_eq!(r.speedup, 2.0);
        r.validate().unwrap();
        let mut bad = r.clone();
        bad.speedup = 3.0;
        assert!(bad.validate().is_err());
        assert!(TimingReport::from_times(0.0, 1.0, 1, 0).is_err());
    }

    #[test]
    fn timing_and_sweep_are_deterministic() {
        let exp = small(2, 6, 30);
        let r = timing_compare(&exp, 5, 2).unwrap();
        assert!(r.deterministic);
        r.validate().unwrap();
        let sweep = scalability_sweep(&exp, 5, &[1, 2, 4, 8]).unwrap();
        assert_eq!(sweep.len(), 4);
        assert_eq!(sweep[0].speedup, 1.0);
        assert!(sweep.iter().all(|s| s.deterministic && s.best_value == sweep[0].best_value));
        let again = scalability_sweep(&exp, 5, &[1]).unwrap();
        assert_eq!(again[0].best_value, sweep[0].best_value);
        assert!(scalability_sweep(&exp, 5, &[]).is_err());
    }

    #[test]
    fn csv_headers() {
        let s = run_trials(&small(2, 4, 5), &[1, 2], 1).unwrap();
        let text = stats_csv(&[s]).unwrap();
        assert!(text.starts_with("objective,algorithm,runs,min,max,median,average\n"));
        let t = timing_csv(&[TimingReport::from_times(2.0, 1.0, 2, 200).unwrap()]).unwrap();
        assert!(t.starts_with("workers,eval_cost_us,t_seri,t_para,saved_percent,speedup,best_value,deterministic\n"));
    }

    #[test]
    fn export_roundtrips_and_errors() {
        let dir = std::env::temp_dir().join(format!("mco-exp-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let s = run_trials(&small(2, 4, 10), &[1, 2, 3], 1).unwrap();
        let json = dir.join("s.json");
        export_stats(std::slice::from_ref(&s), Format::Json, &json).unwrap();
        assert_eq!(import_stats_json(&json).unwrap(), vec![s.clone()]);
        let csv = dir.join("s.csv");
        export_stats(std::slice::from_ref(&s), Format::Csv, &csv).unwrap();
        assert_eq!(import_stats_csv(&csv).unwrap(), vec![s.row()]);

        let t = TimingReport::from_times(1.0 / 3.0, 0.1, 4, 200).unwrap();
        let tj = dir.join("t.json");
        export_timing(std::slice::from_ref(&t), Format::Json, &tj).unwrap();
        let text = std::fs::read_to_string(&tj).unwrap();
        for field in ["t_seri", "t_para", "saved_percent", "speedup", "workers", "eval_cost_us"] {
            assert!(text.contains(field));
        }
        let back = import_timing_json(&tj).unwrap();
        assert_eq!(back[0].t_seri.to_bits(), t.t_seri.to_bits());
        let tc = dir.join("t.csv");
        export_timing(std::slice::from_ref(&t), Format::Csv, &tc).unwrap();
        assert_eq!(import_timing_csv(&tc).unwrap()[0].speedup.to_bits(), t.speedup.to_bits());

        let err = export_stats(&[s], Format::Csv, Path::new("/no-such-dir-mco/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/no-such-dir-mco/x.csv"));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    proptest! {
        #[test]
        fn csv_roundtrip_is_exact(values in proptest::collection::vec(-1e300f64..1e300, 1..8)) {
            let seeds: Vec<u64> = (0..values.len() as u64).collect();
            let s = StatsSummary::from_values("sphere", Algorithm::Pso, seeds, values, SwarmParams::default()).unwrap();
            let back = stats_from_csv(&stats_csv(std::slice::from_ref(&s)).unwrap()).unwrap();
            prop_assert_eq!(back, vec![s.row()]);
        }

        #[test]
        fn timing_invariants(a in 1e-6f64..1e3, b in 1e-6f64..1e3) {
            let r = TimingReport::from_times(a, b, 2, 0).unwrap();
            prop_assert!(r.validate().is_ok());
            let back = timing_from_csv(&timing_csv(std::slice::from_ref(&r)).unwrap()).unwrap();
            prop_assert_eq!(back[0].t_seri.to_bits(), a.to_bits());
            prop_assert_eq!(back[0].speedup.to_bits(), r.speedup.to_bits());
        }
    }
}
