//! Trajectory ensembles: averaged collapse curves, outcome histograms and the
//! measurement-strength sweep.
//!
//! Trajectory `i` always uses seed `base_seed + i`. Trajectories run on the
//! rayon pool and are reduced in index order, so results do not depend on
//! scheduling.

use std::collections::BTreeMap;
use std::io::Write;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::QuantumState;
use crate::sme::{simulate_trajectory_with, SmeParams, TrajectoryOptions};

/// Final total-number variance below which a trajectory counts as collapsed.
pub const COLLAPSE_THRESHOLD: f64 = 0.1;

/// Largest tolerated fraction of blown-up trajectories.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    /// Ensemble mean of each trajectory's total-number variance.
    pub mean_var_n: Vec<f64>,
    pub stderr_var_n: Vec<f64>,
    /// Ensemble mean of each trajectory's total `⟨n̂⟩`.
    pub mean_n: Vec<f64>,
    pub stderr_mean_n: Vec<f64>,
    /// Mean and standard error of the variance after the last step.
    pub final_mean_var: f64,
    pub final_stderr_var: f64,
    /// Counts of `round(final ⟨n̂⟩)` over collapsed trajectories.
    pub outcome_histogram: BTreeMap<i64, usize>,
    /// Trajectories that finished (blown-up ones excluded).
    pub n_traj: usize,
    pub n_failed: usize,
    pub n_collapsed: usize,
    pub base_seed: u64,
    pub params: SmeParams,
}

impl EnsembleStats {
    /// Columns `t, mean_var_n, stderr_var_n, mean_n, stderr_mean_n`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "mean_var_n", "stderr_var_n", "mean_n", "stderr_mean_n"]).map_err(csv_err)?;
        for i in 0..self.times.len() {
            let row = [self.times[i], self.mean_var_n[i], self.stderr_var_n[i], self.mean_n[i], self.stderr_mean_n[i]];
            w.write_record(row.iter().map(|x| format!("{x:.12e}"))).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::invalid("csv", e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KSweepResult {
    pub k_values: Vec<f64>,
    /// Mean total-number variance at `t`.
    pub mean_var_at_t: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Measurement time, `2π/μ`.
    pub t: f64,
    pub n_traj: Vec<usize>,
    pub base_seed: u64,
}

impl KSweepResult {
    /// Index of the smallest mean variance.
    pub fn argmin(&self) -> usize {
        self.mean_var_at_t
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Columns `k, mean_var, stderr, n_traj`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "mean_var", "stderr", "n_traj"]).map_err(csv_err)?;
        for i in 0..self.k_values.len() {
            w.write_record([
                format!("{:.12e}", self.k_values[i]),
                format!("{:.12e}", self.mean_var_at_t[i]),
                format!("{:.12e}", self.stderr[i]),
                self.n_traj[i].to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::invalid("csv", e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::invalid("csv", e.to_string())
}

/// What one trajectory contributes to the ensemble.
struct Summary {
    var: Vec<f64>,
    mean: Vec<f64>,
    final_var: f64,
    final_mean: f64,
}

/// Running mean and standard error, accumulated in a fixed order.
#[derive(Default)]
struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let var = ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

pub fn run_ensemble(initial: &QuantumState, p: &SmeParams, n_traj: usize, base_seed: u64) -> Result<EnsembleStats> {
    run_ensemble_with(initial, p, n_traj, base_seed, TrajectoryOptions::default())
}

pub fn run_ensemble_with(
    initial: &QuantumState,
    p: &SmeParams,
    n_traj: usize,
    base_seed: u64,
    opts: TrajectoryOptions,
) -> Result<EnsembleStats> {
    if n_traj == 0 {
        return Err(Error::invalid("n_traj", "must be at least 1"));
    }
    p.validate()?;
    let outcomes: Vec<Result<Summary>> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let params = SmeParams { seed: base_seed.wrapping_add(i as u64), ..p.clone() };
            let traj = simulate_trajectory_with(initial, &params, opts)?;
            Ok(Summary {
                mean: traj.mean_total(),
                var: traj.var_total,
                final_var: traj.final_var_total,
                final_mean: traj.final_mean_n.iter().sum(),
            })
        })
        .collect();

    let mut finished = Vec::with_capacity(n_traj);
    let mut n_failed = 0;
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(s) => finished.push(s),
            Err(e @ Error::NumericalBlowup { .. }) => {
                warn!("trajectory {} (seed {}) failed: {e}", i, base_seed.wrapping_add(i as u64));
                n_failed += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if n_failed as f64 > MAX_FAILURE_FRACTION * n_traj as f64 || finished.is_empty() {
        return Err(Error::EnsembleFailure { failed: n_failed, total: n_traj });
    }

    let n_samples = p.n_samples();
    let mut var_moments: Vec<Moments> = (0..n_samples).map(|_| Moments::default()).collect();
    let mut mean_moments: Vec<Moments> = (0..n_samples).map(|_| Moments::default()).collect();
    let mut final_var = Moments::default();
    let mut histogram = BTreeMap::new();
    let mut n_collapsed = 0;
    for s in &finished {
        for t in 0..n_samples {
            var_moments[t].push(s.var[t]);
            mean_moments[t].push(s.mean[t]);
        }
        final_var.push(s.final_var);
        if s.final_var < COLLAPSE_THRESHOLD {
            *histogram.entry(s.final_mean.round() as i64).or_insert(0) += 1;
            n_collapsed += 1;
        }
    }

    Ok(EnsembleStats {
        times: (0..n_samples).map(|i| (i * p.record_stride) as f64 * p.dt).collect(),
        mean_var_n: var_moments.iter().map(|m| m.mean().max(0.0)).collect(),
        stderr_var_n: var_moments.iter().map(Moments::stderr).collect(),
        mean_n: mean_moments.iter().map(Moments::mean).collect(),
        stderr_mean_n: mean_moments.iter().map(Moments::stderr).collect(),
        final_mean_var: final_var.mean().max(0.0),
        final_stderr_var: final_var.stderr(),
        outcome_histogram: histogram,
        n_traj: finished.len(),
        n_failed,
        n_collapsed,
        base_seed,
        params: p.clone(),
    })
}

/// Mean variance after measuring for `T = 2π/μ` at each `k`.
///
/// Every point reuses the same seeds, so neighbouring points share noise
/// realizations.
pub fn k_sweep(
    initial: &QuantumState,
    template: &SmeParams,
    k_values: &[f64],
    n_traj: usize,
    base_seed: u64,
) -> Result<KSweepResult> {
    if k_values.is_empty() {
        return Err(Error::invalid("k_values", "must not be empty"));
    }
    if let Some(bad) = k_values.iter().find(|k| !(k.is_finite() && **k >= 0.0)) {
        return Err(Error::invalid("k_values", format!("entries must be non-negative, got {bad}")));
    }
    if k_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("k_values", "must be strictly increasing"));
    }
    let t = 2.0 * std::f64::consts::PI / template.mu;
    let mut out = KSweepResult {
        k_values: k_values.to_vec(),
        mean_var_at_t: Vec::with_capacity(k_values.len()),
        stderr: Vec::with_capacity(k_values.len()),
        t,
        n_traj: Vec::with_capacity(k_values.len()),
        base_seed,
    };
    for &k in k_values {
        let p = SmeParams { k, t_final: t, ..template.clone() };
        let stats = run_ensemble(initial, &p, n_traj, base_seed)?;
        out.mean_var_at_t.push(stats.final_mean_var);
        out.stderr.push(stats.final_stderr_var);
        out.n_traj.push(stats.n_traj);
    }
    Ok(out)
}

/// `count` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}
