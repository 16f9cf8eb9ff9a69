//! Experiment execution and artifact output.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use qnd_core::ensemble::{k_sweep, log_grid, run_ensemble, EnsembleStats, KSweepResult};
use qnd_core::fockspace::{QuantumState, StateVector};
use qnd_core::noise::stream_rng;
use qnd_core::phaseprep::{
    noon_input, optimize_phase_prep_with, phase_error_of_spec, prepare_noon, prepare_phase,
    reoptimize_weights_all_conventions, ConventionFit, OptimizationResult, OptimizeOptions,
};
use qnd_core::projection::{outcome_distribution, project_joint, sample_outcome, JointOutcome};
use qnd_core::sme::{probe_with, simulate_trajectory, SmeParams};
use qnd_core::states::cat_superposition;
use qnd_core::wigner::{linspace, marginal_check, wigner_function};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::config::{Experiment, Format, RunConfig, StateSpec};
use crate::error::CliError;
use crate::plot::{emit_plot, Labels, PlotData, PlotKind};

pub const MANIFEST_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "qndsim";

/// Files written by one run, removed again if the run fails.
struct Artifacts {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn open(dir: &Path) -> Result<Self, CliError> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), created_dir, written: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: Vec<u8>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        // record first so a failed write is still cleaned up
        self.written.push((name.to_owned(), Vec::new()));
        fs::write(&path, &bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.written.last_mut().expect("pushed").1 = bytes;
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, bytes)
    }

    fn remove_all(&self) {
        for (name, _) in &self.written {
            let _ = fs::remove_file(self.dir.join(name));
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArtifactRecord {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub artifacts: Vec<ArtifactRecord>,
    pub summary: Value,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Default output directory for an experiment.
pub fn default_output_dir(experiment: Experiment) -> PathBuf {
    PathBuf::from("out").join(experiment.to_string())
}

/// Validates `cfg`, runs `experiment`, and writes its artifacts plus
/// `manifest.json`. Anything written is removed again on failure.
pub fn run(experiment: Experiment, mut cfg: RunConfig, out: Option<PathBuf>) -> Result<RunOutcome, CliError> {
    cfg.validate(experiment)?;
    cfg.experiment = Some(experiment);
    let dir = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| default_output_dir(experiment));
    // the manifest records what determines the results, not where they went
    cfg.output_dir = None;

    let mut art = Artifacts::open(&dir)?;
    match execute(experiment, &cfg, &mut art) {
        Ok((summary, inputs)) => {
            let artifacts: Vec<ArtifactRecord> = art
                .written
                .iter()
                .map(|(f, b)| ArtifactRecord { file: f.clone(), bytes: b.len(), sha256: sha256_hex(b) })
                .collect();
            let manifest = json!({
                "manifest_version": MANIFEST_VERSION,
                "tool": TOOL_NAME,
                "version": env!("CARGO_PKG_VERSION"),
                "experiment": experiment,
                "config": cfg,
                "time_unit_seconds": time_unit_seconds(&cfg),
                "inputs": inputs,
                "summary": summary,
                "artifacts": artifacts,
            });
            if let Err(e) = art.json("manifest.json", &manifest) {
                art.remove_all();
                return Err(e);
            }
            Ok(RunOutcome { dir, artifacts, summary })
        }
        Err(e) => {
            art.remove_all();
            Err(e)
        }
    }
}

type Executed = (Value, Vec<ArtifactRecord>);

fn execute(experiment: Experiment, cfg: &RunConfig, art: &mut Artifacts) -> Result<Executed, CliError> {
    match experiment {
        Experiment::Collapse => collapse(cfg, art),
        Experiment::Ksweep => ksweep(cfg, art),
        Experiment::Noon => noon(cfg, art),
        Experiment::Phase => phase(cfg, art),
        Experiment::Optimize => optimize(cfg, art),
        Experiment::Wigner => wigner(cfg, art),
        Experiment::Project => project(cfg, art),
    }
}

fn plot(art: &mut Artifacts, cfg: &RunConfig, name: &str, data: PlotData<'_>, kind: PlotKind, labels: Labels<'_>) -> Result<(), CliError> {
    if !cfg.wants(Format::Png) {
        return Ok(());
    }
    let bytes = emit_plot(&data, kind, &labels).map_err(|e| CliError::Numerical(e.to_string()))?;
    art.write(name, bytes)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> qnd_core::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Per-oscillator states and the joint SME input `|+z⟩ ⊗ ψ_1 ⊗ …`.
fn sme_initial(specs: &[StateSpec], params: &SmeParams, section: &str) -> Result<(QuantumState, Vec<Vec<C64>>), CliError> {
    let mut modes = Vec::with_capacity(specs.len());
    for (i, (s, &d)) in specs.iter().zip(&params.dims).enumerate() {
        let amps = s.amplitudes(Some(d))?;
        if amps.len() != d {
            return Err(CliError::Validation(vec![format!(
                "{section}.initial[{i}].dim: state has {} levels but params.dims[{i}] = {d}",
                amps.len()
            )]));
        }
        modes.push(amps);
    }
    let vectors: Vec<StateVector> = modes.iter().map(|m| StateVector::single_mode(m.clone())).collect::<Result<_, _>>()?;
    let refs: Vec<&StateVector> = vectors.iter().collect();
    Ok((probe_with(&refs), modes))
}

/// Distribution of the total phonon number of a product state.
fn total_number_distribution(modes: &[Vec<C64>]) -> Vec<f64> {
    let mut dist = vec![1.0];
    for m in modes {
        let p: Vec<f64> = m.iter().map(|c| c.norm_sqr()).collect();
        let mut next = vec![0.0; dist.len() + p.len() - 1];
        for (i, a) in dist.iter().enumerate() {
            for (j, b) in p.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        dist = next;
    }
    dist
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramReport {
    pub counts: BTreeMap<i64, usize>,
    pub expected_probability: BTreeMap<i64, f64>,
    pub n_collapsed: usize,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    /// `None` when the test is undefined (fewer than two populated levels).
    pub p_value: Option<f64>,
}

/// Pearson chi-square of collapsed outcomes against the initial populations.
pub fn histogram_test(counts: &BTreeMap<i64, usize>, expected: &[f64]) -> HistogramReport {
    let total: usize = counts.values().sum();
    let support: Vec<usize> = (0..expected.len()).filter(|&n| expected[n] > 1e-12).collect();
    let mut chi = 0.0;
    let mut impossible = false;
    for (&n, &c) in counts {
        let inside = n >= 0 && (n as usize) < expected.len() && expected[n as usize] > 1e-12;
        if !inside && c > 0 {
            impossible = true;
        }
    }
    for &n in &support {
        let e = expected[n] * total as f64;
        let o = *counts.get(&(n as i64)).unwrap_or(&0) as f64;
        chi += (o - e).powi(2) / e;
    }
    let dof = support.len().saturating_sub(1);
    let p_value = if impossible {
        Some(0.0)
    } else if dof == 0 || total == 0 {
        None
    } else {
        ChiSquared::new(dof as f64).ok().map(|d| d.sf(chi))
    };
    HistogramReport {
        counts: counts.clone(),
        expected_probability: support.iter().map(|&n| (n as i64, expected[n])).collect(),
        n_collapsed: total,
        chi_square: chi,
        degrees_of_freedom: dof,
        p_value,
    }
}

/// First sample time at which the mean variance drops below `fraction` of its start.
fn decay_time(stats: &EnsembleStats, fraction: f64) -> Option<f64> {
    let v0 = *stats.mean_var_n.first()?;
    stats.times.iter().zip(&stats.mean_var_n).find(|(_, v)| **v < fraction * v0).map(|(t, _)| *t)
}

/// One dimensionless time unit in seconds: `params.mu` is μ in those units
/// and `mu_hz` is μ in s⁻¹.
pub fn time_unit_seconds(cfg: &RunConfig) -> f64 {
    cfg.params.mu / cfg.mu_hz
}

fn seconds(cfg: &RunConfig, t: f64) -> f64 {
    t * time_unit_seconds(cfg)
}

fn collapse(cfg: &RunConfig, art: &mut Artifacts) -> Result<Executed, CliError> {
    let s = &cfg.collapse;
    let params = &cfg.params;
    let (initial, modes) = sme_initial(&s.initial, params, "collapse")?;
    let stats = run_ensemble(&initial, params, s.n_traj, cfg.seed)?;
    let hist = histogram_test(&stats.outcome_histogram, &total_number_distribution(&modes));

    if cfg.wants(Format::Csv) {
        art.write("variance_curve.csv", csv_bytes(|b| stats.write_csv(b))?)?;
        if s.example_trajectory {
            let traj = simulate_trajectory(&initial, params)?;
            art.write("trajectory.csv", csv_bytes(|b| traj.write_csv(b))?)?;
        }
    }
    if cfg.wants(Format::Json) {
        art.json("ensemble.json", &stats)?;
        art.json("histogram.json", &hist)?;
    }
    let title = format!(
        "mean Var(n) vs t; k={} mu={} omega_J={} n_traj={} dt={} seed={}",
        params.k, params.mu, params.omega_j, stats.n_traj, params.dt, cfg.seed
    );
    plot(
        art,
        cfg,
        "fig1a.png",
        PlotData::Series { x: &stats.times, y: &stats.mean_var_n, err: Some(&stats.stderr_var_n) },
        PlotKind::VarianceCurve,
        Labels { title: &title, x: "t (units of 1/mu)", y: "ensemble mean Var(n)" },
    )?;

    let t90 = decay_time(&stats, 0.1);
    let summary = json!({
        "initial_var": stats.mean_var_n.first(),
        "final_mean_var": stats.final_mean_var,
        "final_stderr_var": stats.final_stderr_var,
        "n_traj": stats.n_traj,
        "n_failed": stats.n_failed,
        "n_collapsed": stats.n_collapsed,
        "chi_square_p_value": hist.p_value,
        "time_to_10_percent": t90,
        "time_to_10_percent_seconds": t90.map(|t| seconds(cfg, t)),
    });
    Ok((summary, Vec::new()))
}

fn ksweep(cfg: &RunConfig, art: &mut Artifacts) -> Result<Executed, CliError> {
    let s = &cfg.ksweep;
    let (initial, _) = sme_initial(&s.initial, &cfg.params, "ksweep")?;
    let ks = log_grid(s.k_min, s.k_max, s.points);
    let res: KSweepResult = k_sweep(&initial, &cfg.params, &ks, s.n_traj, cfg.seed)?;
    if cfg.wants(Format::Csv) {
        art.write("ksweep.csv", csv_bytes(|b| res.write_csv(b))?)?;
    }
    if cfg.wants(Format::Json) {
        art.json("ksweep.json", &res)?;
    }
    let title = format!("mean Var(n) at T={:.4} vs k; mu={} n_traj={} seed={}", res.t, cfg.params.mu, s.n_traj, cfg.seed);
    plot(
        art,
        cfg,
        "fig1b.png",
        PlotData::Series { x: &res.k_values, y: &res.mean_var_at_t, err: Some(&res.stderr) },
        PlotKind::Ksweep,
        Labels { title: &title, x: "k/mu (log scale)", y: "ensemble mean Var(n) at T" },
    )?;
    let best = res.argmin();
    let summary = json!({
        "k_best": res.k_values[best],
        "mean_var_best": res.mean_var_at_t[best],
        "T": res.t,
        "T_seconds": seconds(cfg, res.t),
    });
    Ok((summary, Vec::new()))
}

fn write_outcome(cfg: &RunConfig, art: &mut Artifacts, outcome: &JointOutcome, title: &str) -> Result<(), CliError> {
    if cfg.wants(Format::Json) {
        art.json("outcome.json", outcome)?;
    }
    let dist = outcome.state.distribution();
    plot(
        art,
        cfg,
        "fig2b.png",
        PlotData::Bars { values: &dist },
        PlotKind::NumberDistribution,
        Labels { title, x: "n (number in first oscillator)", y: "|q_n|^2" },
    )
}

fn write_distribution(art: &mut Artifacts, cfg: &RunConfig, p: &[f64]) -> Result<(), CliError> {
    if !cfg.wants(Format::Csv) {
        return Ok(());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(["N", "probability"]).map_err(err)?;
    for (n, v) in p.iter().enumerate() {
        w.write_record([n.to_string(), format!("{v:.12e}")]).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    art.write("distribution.csv", bytes)
}

fn noon(cfg: &RunConfig, art: &mut Artifacts) -> Result<Executed, CliError> {
    let s = &cfg.noon;
    let alpha = s.alpha.value();
    let prep = prepare_noon(alpha, s.total, s.squeeze)?;
    let spec = noon_input(alpha, s.squeeze);
    let n = s.total as f64;
    let dim = spec.default_dim().max((n + 6.0 * n.sqrt() + 10.0).ceil() as usize);
    let c = cat_superposition(&spec, dim)?.to_vec();
    let dist = outcome_distribution(&c, &c)?;
    write_distribution(art, cfg, &dist)?;
    if cfg.wants(Format::Json) {
        art.json("noon.json", &json!({
            "N": s.total,
            "alpha": [alpha.re, alpha.im],
            "squeeze": s.squeeze,
            "fidelity": prep.fidelity,
            "probability": prep.probability,
        }))?;
    }
    let title = format!("virtual-oscillator distribution, noon preparation; alpha={} N={}", alpha.re, s.total);
    write_outcome(cfg, art, &prep.outcome, &title)?;
    let summary = json!({ "fidelity": prep.fidelity, "probability": prep.probability });
    Ok((summary, Vec::new()))
}

fn phase(cfg: &RunConfig, art: &mut Artifacts) -> Result<Executed, CliError> {
    let s = &cfg.phase;
    let prep = prepare_phase(&s.spec, s.total)?;
    let (exact_f, exact_theta) = phase_error_of_spec(&s.spec, s.total);
    if cfg.wants(Format::Json) {
        art.json("phase.json", &json!({
            "N": s.total,
            "spec": s.spec,
            "error_f": prep.error_f,
            "theta": prep.theta,
            "probability": prep.probability,
            "error_f_untruncated": exact_f,
            "theta_untruncated": exact_theta,
        }))?;
    }
    let title = format!("virtual-oscillator distribution, phase preparation; N={} f={:.3e}", s.total, prep.error_f);
    write_outcome(cfg, art, &prep.outcome, &title)?;
    let summary = json!({ "error_f": prep.error_f, "theta": prep.theta, "probability": prep.probability });
    Ok((summary, Vec::new()))
}

#[derive(Serialize)]
struct OptimizeReport<'a> {
    result: &'a OptimizationResult,
    refit: Option<&'a [ConventionFit]>,
}

fn optimize(cfg: &RunConfig, art: &mut Artifacts) -> Result<Executed, CliError> {
    let s = &cfg.optimize;
    let opts = OptimizeOptions {
        restarts: s.restarts,
        seed: cfg.seed,
        squeeze: s.squeeze,
        ordering: s.ordering,
        nelder_mead: s.nelder_mead,
        extra_starts: Vec::new(),
    };
    let result = optimize_phase_prep_with(s.n_components, s.total, &opts)?;
    let refit = match &s.refit {
        Some(r) => Some(reoptimize_weights_all_conventions(&r.alphas, r.squeeze, s.total)?),
        None => None,
    };
    if cfg.wants(Format::Json) {
        art.json("optimize.json", &OptimizeReport { result: &result, refit: refit.as_deref() })?;
    }
    let prep = prepare_phase(&result.spec, s.total)?;
    let title = format!(
        "optimized phase preparation; components={} N={} f={:.3e}",
        s.n_components, s.total, result.error_f
    );
    write_outcome(cfg, art, &prep.outcome, &title)?;
    let best_refit = refit
        .as_ref()
        .and_then(|r| r.iter().map(|c| c.fit.error_f).min_by(|a, b| a.total_cmp(b)));
    let summary = json!({
        "error_f": result.error_f,
        "success_probability": result.success_probability,
        "converged": result.converged,
        "best_refit_error_f": best_refit,
    });
    Ok((summary, Vec::new()))
}

fn wigner(cfg: &RunConfig, art: &mut Artifacts) -> Result<Executed, CliError> {
    let s = &cfg.wigner;
    let mut inputs = Vec::new();
    let (q, label) = match &s.outcome {
        Some(path) => {
            let bytes = fs::read(path).map_err(|e| CliError::Validation(vec![format!("wigner.outcome: {}: {e}", path.display())]))?;
            let outcome: JointOutcome = serde_json::from_slice(&bytes)
                .map_err(|e| CliError::Validation(vec![format!("wigner.outcome: {}: {e}", path.display())]))?;
            inputs.push(ArtifactRecord { file: path.display().to_string(), bytes: bytes.len(), sha256: sha256_hex(&bytes) });
            (outcome.q().to_vec(), format!("stored outcome N={}", outcome.total))
        }
        None => {
            let spec = s.state.as_ref().expect("validated");
            (spec.amplitudes(None)?, format!("{:?}", spec.kind))
        }
    };
    let xs = linspace(s.x_min, s.x_max, s.points);
    let ps = linspace(s.p_min, s.p_max, s.points);
    let grid = wigner_function(&q, &xs, &ps)?;
    let marginals = match marginal_check(&grid, &q) {
        Ok((ex, ep)) => json!({ "max_error_x": ex, "max_error_p": ep }),
        Err(e) => json!({ "skipped": e.to_string() }),
    };
    if cfg.wants(Format::Csv) {
        art.write("wigner.csv", csv_bytes(|b| grid.write_csv(b))?)?;
    }
    let report = json!({
        "integral": grid.integral(),
        "max_abs": grid.max_abs(),
        "bound": 1.0 / PI,
        "edge_occupancy": grid.edge_occupancy,
        "marginals": marginals,
    });
    if cfg.wants(Format::Json) {
        art.json("wigner.json", &report)?;
    }
    let title = format!("Wigner function of the virtual oscillator ({label})");
    let values = |i: usize, j: usize| grid.values[(i, j)];
    plot(
        art,
        cfg,
        "fig2a.png",
        PlotData::Grid { x_axis: &xs, y_axis: &ps, values: &values },
        PlotKind::WignerHeatmap,
        Labels { title: &title, x: "x", y: "p" },
    )?;
    Ok((report, inputs))
}

fn project(cfg: &RunConfig, art: &mut Artifacts) -> Result<Executed, CliError> {
    let s = &cfg.project;
    let c = s.c.amplitudes(None)?;
    let d = s.d.amplitudes(None)?;
    let dist = outcome_distribution(&c, &d)?;
    let outcome = match s.total {
        Some(n) => project_joint(&c, &d, n)?,
        None => sample_outcome(&c, &d, &mut stream_rng(cfg.seed, 0))?,
    };
    write_distribution(art, cfg, &dist)?;
    let title = format!("virtual-oscillator distribution after projection; N={}", outcome.total);
    write_outcome(cfg, art, &outcome, &title)?;
    let summary = json!({ "N": outcome.total, "probability": outcome.probability });
    Ok((summary, Vec::new()))
}
