//! Continuous σz measurement of a two-level probe coupled through
//! `μ σx ⊗ n̂` to one or two truncated oscillators.
//!
//! Units: every frequency is in units of μ and every time in units of 1/μ.
//!
//! The conditional state obeys the normalized Itô equation
//!
//! ```text
//! dρ = −i[H,ρ]dt − k[σz,[σz,ρ]]dt + √(2k)(σzρ + ρσz − 2⟨σz⟩ρ)dW
//! dr = ⟨σz⟩dt + dW
//! ```
//!
//! [`sme_step`] applies this literally, one Euler–Maruyama step on a dense
//! matrix. [`simulate_trajectory`] integrates the same equation with a
//! positivity-preserving first-order scheme instead: a diagonal measurement
//! operator `M = [1 − k dt + ηk(dY² − dt)] + √(2ηk) dY σz` with
//! `dY = dW + 2√(2ηk)⟨σz⟩dt`, an unmeasured dephasing term of weight
//! `2(1−η)k dt`, the exact unitary `exp(−iH dt)`, and trace renormalization.
//! Expanding to first order in `dt` recovers the equation above.
//!
//! Because `H` commutes with the total phonon number, it is block diagonal:
//! one 2×2 qubit block per oscillator basis state. The integrator exploits
//! this, so a pure state costs O(dim) per step and a mixed state O(dim²).

use std::io::Write;

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParamIssue, Result};
use crate::fockspace::{
    hermitian_eigenvalues, number_op, pauli_ops, tensor_all, DensityMatrix, OperatorMatrix, QuantumState, StateVector,
};
use crate::noise::gaussian_increments;

/// Largest `|λ/Δ|` treated as dispersive without a warning.
pub const DISPERSIVE_LIMIT: f64 = 0.1;

/// Entries above this magnitude abort a trajectory.
const BLOWUP_LIMIT: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmeParams {
    #[serde(rename = "omega_R")]
    pub omega_r: f64,
    #[serde(rename = "omega_C")]
    pub omega_c: f64,
    #[serde(rename = "omega_J")]
    pub omega_j: f64,
    pub mu: f64,
    /// Measurement strength.
    pub k: f64,
    pub n_modes: usize,
    /// Truncation of each oscillator.
    pub dims: Vec<usize>,
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
    /// Store every `record_stride`-th step.
    pub record_stride: usize,
    /// Detector efficiency.
    pub eta: f64,
}

impl Default for SmeParams {
    fn default() -> Self {
        Self {
            omega_r: 0.0,
            omega_c: 0.0,
            omega_j: 0.0,
            mu: 1.0,
            k: 1.0,
            n_modes: 1,
            dims: vec![10],
            dt: 1e-3,
            t_final: 20.0,
            seed: 0,
            record_stride: 10,
            eta: 1.0,
        }
    }
}

impl SmeParams {
    /// Largest total phonon number representable in the truncation.
    pub fn max_total_phonons(&self) -> usize {
        self.dims.iter().map(|d| d.saturating_sub(1)).sum()
    }

    /// Largest admissible step, `0.01 / max(1, k, |ω_J|, max_n·μ)`.
    pub fn stability_limit(&self) -> f64 {
        let scale = [1.0, self.k, self.omega_j.abs(), self.max_total_phonons() as f64 * self.mu.abs()]
            .into_iter()
            .fold(0.0, f64::max);
        0.01 / scale
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt * (1.0 + 1e-12)).floor() as usize
    }

    pub fn n_samples(&self) -> usize {
        self.n_steps() / self.record_stride + 1
    }

    /// Subsystem dims of the full state: qubit first, then the oscillators.
    pub fn full_dims(&self) -> Vec<usize> {
        std::iter::once(2).chain(self.dims.iter().copied()).collect()
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        let mut bad = |field: &str, reason: String| issues.push(ParamIssue::new(field, reason));
        for (name, v) in [
            ("omega_R", self.omega_r),
            ("omega_C", self.omega_c),
            ("omega_J", self.omega_j),
            ("mu", self.mu),
            ("k", self.k),
            ("dt", self.dt),
            ("t_final", self.t_final),
            ("eta", self.eta),
        ] {
            if !v.is_finite() {
                bad(name, format!("must be finite, got {v}"));
            }
        }
        if !(self.dt > 0.0) {
            bad("dt", format!("must be positive, got {}", self.dt));
        }
        if !(self.t_final >= self.dt) {
            bad("t_final", format!("must be at least dt, got {}", self.t_final));
        }
        if !(self.k >= 0.0) {
            bad("k", format!("must be non-negative, got {}", self.k));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            bad("eta", format!("must lie in (0, 1], got {}", self.eta));
        }
        if self.n_modes != 1 && self.n_modes != 2 {
            bad("n_modes", format!("must be 1 or 2, got {}", self.n_modes));
        }
        if self.dims.len() != self.n_modes {
            bad("dims", format!("expected {} entries, got {}", self.n_modes, self.dims.len()));
        }
        if self.dims.contains(&0) {
            bad("dims", "every truncation must be at least 1".into());
        }
        if self.record_stride == 0 {
            bad("record_stride", "must be positive".into());
        }
        let limit = self.stability_limit();
        if self.dt > 0.0 && self.dt > limit * (1.0 + 1e-12) {
            bad("dt", format!("{} exceeds the stability limit {limit:.3e}", self.dt));
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameters(issues))
        }
    }
}

/// `|λ/Δ|`, small in the dispersive regime.
pub fn dispersive_ratio(lambda: f64, delta: f64) -> f64 {
    (lambda / delta).abs()
}

/// Dispersive coupling `μ = λ²/Δ`; warns when `|λ/Δ|` exceeds [`DISPERSIVE_LIMIT`].
pub fn derive_mu(lambda: f64, delta: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::DivisionByZero("detuning delta is zero"));
    }
    let ratio = dispersive_ratio(lambda, delta);
    if ratio > DISPERSIVE_LIMIT {
        warn!("|lambda/delta| = {ratio} exceeds {DISPERSIVE_LIMIT}; dispersive coupling may be inaccurate");
    }
    Ok(lambda * lambda / delta)
}

/// Total phonon number `Σ_i n̂_i` on the oscillators alone.
fn total_number(dims: &[usize]) -> Result<OperatorMatrix> {
    let mut total: Option<OperatorMatrix> = None;
    for i in 0..dims.len() {
        let factors: Vec<OperatorMatrix> = dims
            .iter()
            .enumerate()
            .map(|(j, &d)| if i == j { number_op(d) } else { OperatorMatrix::identity(d) })
            .collect::<Result<_>>()?;
        let refs: Vec<&OperatorMatrix> = factors.iter().collect();
        let term = tensor_all(&refs);
        total = Some(match total {
            None => term,
            Some(t) => &t + &term,
        });
    }
    total.ok_or_else(|| Error::invalid("dims", "no oscillator"))
}

/// `H = ω_R n̂ + ω_C σz + ω_J σx + μ σx ⊗ n̂` with `n̂` the total phonon number,
/// as a dense operator on qubit ⊗ oscillators.
pub fn build_hamiltonian(p: &SmeParams) -> Result<OperatorMatrix> {
    p.validate()?;
    let n = total_number(&p.dims)?;
    let id_modes = OperatorMatrix::identity(n.dim())?;
    let id_q = OperatorMatrix::identity(2)?;
    let (sx, sz) = pauli_ops();
    let mut h = tensor_all(&[&id_q, &n]).scale_real(p.omega_r);
    h = &h + &tensor_all(&[&sz, &id_modes]).scale_real(p.omega_c);
    h = &h + &tensor_all(&[&sx, &id_modes]).scale_real(p.omega_j);
    h = &h + &tensor_all(&[&sx, &n]).scale_real(p.mu);
    OperatorMatrix::new(p.full_dims(), h.into_entries())
}

/// `σz ⊗ I` as a ±1 diagonal for a state whose first subsystem is the qubit.
fn sigma_z_diag(dims: &[usize]) -> Result<Vec<f64>> {
    if dims.first() != Some(&2) {
        return Err(Error::invalid("dims", "first subsystem must be the qubit"));
    }
    let m: usize = dims[1..].iter().product();
    Ok((0..2 * m).map(|i| if i < m { 1.0 } else { -1.0 }).collect())
}

/// Unnormalized Euler–Maruyama update `ρ + dρ` and the record increment `dr`.
pub fn sme_increment(rho: &DensityMatrix, h: &OperatorMatrix, k: f64, dt: f64, dw: f64) -> Result<(DMatrix<C64>, f64)> {
    if h.dim() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: h.dim() });
    }
    let z = sigma_z_diag(rho.dims())?;
    let r = rho.entries();
    let n = r.nrows();
    let ez: f64 = (0..n).map(|i| z[i] * r[(i, i)].re).sum();
    let comm = h.entries() * r - r * h.entries();
    let s = (2.0 * k).sqrt();
    let mut next = r - comm * C64::new(0.0, dt);
    for i in 0..n {
        for j in 0..n {
            // [σz,[σz,ρ]]_ij = (z_i − z_j)² ρ_ij ; (σzρ + ρσz − 2⟨σz⟩ρ)_ij = (z_i + z_j − 2⟨σz⟩) ρ_ij
            let zz = z[i] - z[j];
            let decay = k * zz * zz * dt;
            let kick = s * (z[i] + z[j] - 2.0 * ez) * dw;
            next[(i, j)] += r[(i, j)] * (kick - decay);
        }
    }
    Ok((next, ez * dt + dw))
}

/// One Euler–Maruyama step of the measurement equation followed by trace
/// renormalization. Returns the new state and `dr = ⟨σz⟩dt + dW` evaluated
/// on the incoming state.
pub fn sme_step(rho: &DensityMatrix, h: &OperatorMatrix, k: f64, dt: f64, dw: f64) -> Result<(DensityMatrix, f64)> {
    let (next, dr) = sme_increment(rho, h, k, dt, dw)?;
    let tr = next.trace().re;
    if let Some(detail) = blowup(next.iter(), tr) {
        return Err(Error::NumericalBlowup { t: dt, dt, detail });
    }
    Ok((DensityMatrix::from_raw(rho.dims().to_vec(), next / C64::new(tr, 0.0)), dr))
}

fn blowup<'a>(mut entries: impl Iterator<Item = &'a C64>, trace: f64) -> Option<String> {
    if let Some(z) = entries.find(|z| !(z.re.is_finite() && z.im.is_finite()) || z.norm() > BLOWUP_LIMIT) {
        return Some(format!("state entry {z} is non-finite or exceeds {BLOWUP_LIMIT:e}"));
    }
    if !(trace > 0.0 && trace < BLOWUP_LIMIT) {
        return Some(format!("trace {trace} out of range"));
    }
    None
}

/// How [`simulate_trajectory_with`] stores the conditional state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// State vector for pure input with η = 1, density matrix otherwise.
    #[default]
    Auto,
    Pure,
    Density,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrajectoryOptions {
    pub representation: Representation,
    /// Record the smallest eigenvalue of ρ at every sample (density form only).
    pub track_min_eigenvalue: bool,
}

#[derive(Clone, Debug)]
pub struct TrajectoryResult {
    pub times: Vec<f64>,
    /// Record increment accumulated since the previous sample (0 at t = 0).
    pub record: Vec<f64>,
    /// `⟨n̂_i⟩` per oscillator.
    pub mean_n: Vec<Vec<f64>>,
    /// `Var(n̂_i)` per oscillator.
    pub var_n: Vec<Vec<f64>>,
    /// Variance of the total phonon number.
    pub var_total: Vec<f64>,
    pub sigma_z: Vec<f64>,
    pub purity: Vec<f64>,
    pub min_eigenvalue: Option<Vec<f64>>,
    /// `⟨n̂_i⟩` after the last step, whether or not it was recorded.
    pub final_mean_n: Vec<f64>,
    /// Total-number variance after the last step.
    pub final_var_total: f64,
    pub final_state: QuantumState,
    pub seed: u64,
}

impl TrajectoryResult {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Total phonon number `Σ_i ⟨n̂_i⟩` at each sample.
    pub fn mean_total(&self) -> Vec<f64> {
        (0..self.len()).map(|s| self.mean_n.iter().map(|m| m[s]).sum()).collect()
    }

    /// Columns `t, r_increment, mean_n[, mean_n_b], var_n[, var_n_b], sigma_z`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let two = self.mean_n.len() == 2;
        let mut header = vec!["t", "r_increment", "mean_n"];
        if two {
            header.push("mean_n_b");
        }
        header.push("var_n");
        if two {
            header.push("var_n_b");
        }
        header.push("sigma_z");
        w.write_record(&header).map_err(csv_err)?;
        for s in 0..self.len() {
            let mut row = vec![self.times[s], self.record[s]];
            row.extend(self.mean_n.iter().map(|m| m[s]));
            row.extend(self.var_n.iter().map(|v| v[s]));
            row.push(self.sigma_z[s]);
            w.write_record(row.iter().map(|x| format!("{x:.12e}"))).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::invalid("csv", e.to_string()))?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::invalid("csv", e.to_string())
}

/// Per-block data shared by the state-vector and density-matrix integrators.
struct BlockModel {
    /// Number of oscillator basis states.
    m: usize,
    dims: Vec<usize>,
    /// Phonon number of each mode for every oscillator basis state.
    mode_n: Vec<Vec<f64>>,
    /// Total phonon number of every oscillator basis state.
    total_n: Vec<usize>,
    /// `exp(−i h_n dt)` for each total phonon number, row-major 2×2.
    unitaries: Vec<[C64; 4]>,
    k: f64,
    eta: f64,
    dt: f64,
}

impl BlockModel {
    fn new(p: &SmeParams, dt: f64) -> Self {
        let m: usize = p.dims.iter().product();
        let mut mode_n = vec![vec![0.0; m]; p.dims.len()];
        let mut total_n = vec![0; m];
        for idx in 0..m {
            let mut rem = idx;
            for (mode, &d) in p.dims.iter().enumerate().rev() {
                let n = rem % d;
                rem /= d;
                mode_n[mode][idx] = n as f64;
                total_n[idx] += n;
            }
        }
        let unitaries = (0..=p.max_total_phonons()).map(|n| block_unitary(p, n as f64, dt)).collect();
        Self { m, dims: p.dims.clone(), mode_n, total_n, unitaries, k: p.k, eta: p.eta, dt }
    }

    /// Diagonal measurement factors `(g₊, g₋)` and the dephasing weight.
    fn kraus(&self, ez: f64, dw: f64) -> (f64, f64, f64) {
        let (k, eta, dt) = (self.k, self.eta, self.dt);
        let c = (2.0 * eta * k).sqrt();
        let dy = dw + 2.0 * c * ez * dt;
        let a0 = 1.0 - k * dt + eta * k * (dy * dy - dt);
        let b = c * dy;
        (a0 + b, a0 - b, 2.0 * (1.0 - eta) * k * dt)
    }

    fn observe(&self, pops: &[f64]) -> Observation {
        let m = self.m;
        let ez: f64 = (0..m).map(|i| pops[i] - pops[m + i]).sum();
        let osc: Vec<f64> = (0..m).map(|i| pops[i] + pops[m + i]).collect();
        let moments = |values: &dyn Fn(usize) -> f64| {
            let mean: f64 = (0..m).map(|i| osc[i] * values(i)).sum();
            let sq: f64 = (0..m).map(|i| osc[i] * values(i).powi(2)).sum();
            (mean, sq - mean * mean)
        };
        let mut mean = Vec::with_capacity(self.dims.len());
        let mut var = Vec::with_capacity(self.dims.len());
        for mode in &self.mode_n {
            let (a, b) = moments(&|i| mode[i]);
            mean.push(a);
            var.push(b);
        }
        let (_, var_total) = moments(&|i| self.total_n[i] as f64);
        Observation { ez, mean, var, var_total }
    }
}

struct Observation {
    ez: f64,
    mean: Vec<f64>,
    var: Vec<f64>,
    var_total: f64,
}

/// `exp(−i dt [ω_R n + ω_C σz + (ω_J + μn) σx])` in closed form.
fn block_unitary(p: &SmeParams, n: f64, dt: f64) -> [C64; 4] {
    let vx = p.omega_j + p.mu * n;
    let vz = p.omega_c;
    let r = vx.hypot(vz);
    let global = C64::from_polar(1.0, -p.omega_r * n * dt);
    let (c, s) = ((r * dt).cos(), (r * dt).sin());
    let (nx, nz) = if r > 0.0 { (vx / r, vz / r) } else { (0.0, 0.0) };
    let i = C64::new(0.0, 1.0);
    let one = C64::new(1.0, 0.0);
    [
        global * (one * c - i * (s * nz)),
        global * (-i * (s * nx)),
        global * (-i * (s * nx)),
        global * (one * c + i * (s * nz)),
    ]
}

enum Conditional {
    Pure(DVector<C64>),
    Mixed(DMatrix<C64>),
}

impl Conditional {
    fn populations(&self) -> Vec<f64> {
        match self {
            Conditional::Pure(v) => v.iter().map(|z| z.norm_sqr()).collect(),
            Conditional::Mixed(r) => (0..r.nrows()).map(|i| r[(i, i)].re).collect(),
        }
    }

    fn purity(&self) -> f64 {
        match self {
            Conditional::Pure(_) => 1.0,
            Conditional::Mixed(r) => r.iter().map(|z| z.norm_sqr()).sum(),
        }
    }

    /// Measurement, unitary, renormalization. Returns an error description on blow-up.
    fn step(&mut self, model: &BlockModel, ez: f64, dw: f64) -> std::result::Result<(), String> {
        let m = model.m;
        let (gp, gm, gamma) = model.kraus(ez, dw);
        match self {
            Conditional::Pure(v) => {
                for i in 0..m {
                    let u = &model.unitaries[model.total_n[i]];
                    let x = v[i] * gp;
                    let y = v[m + i] * gm;
                    v[i] = u[0] * x + u[1] * y;
                    v[m + i] = u[2] * x + u[3] * y;
                }
                let norm = v.norm();
                if let Some(d) = blowup(v.iter(), norm * norm) {
                    return Err(d);
                }
                v.unscale_mut(norm);
            }
            Conditional::Mixed(r) => {
                let d = 2 * m;
                let g = [gp, gm];
                for j in 0..d {
                    let (qj, zj) = if j < m { (0, 1.0) } else { (1, -1.0) };
                    for i in 0..d {
                        let (qi, zi) = if i < m { (0, 1.0) } else { (1, -1.0) };
                        r[(i, j)] *= g[qi] * g[qj] + gamma * zi * zj;
                    }
                }
                // ρ ← U ρ
                for j in 0..d {
                    for i in 0..m {
                        let u = &model.unitaries[model.total_n[i]];
                        let (x, y) = (r[(i, j)], r[(m + i, j)]);
                        r[(i, j)] = u[0] * x + u[1] * y;
                        r[(m + i, j)] = u[2] * x + u[3] * y;
                    }
                }
                // ρ ← ρ U†
                for jb in 0..m {
                    let u = &model.unitaries[model.total_n[jb]];
                    let (c0, c1, c2, c3) = (u[0].conj(), u[1].conj(), u[2].conj(), u[3].conj());
                    for i in 0..d {
                        let (x, y) = (r[(i, jb)], r[(i, m + jb)]);
                        r[(i, jb)] = x * c0 + y * c1;
                        r[(i, m + jb)] = x * c2 + y * c3;
                    }
                }
                let tr = r.trace().re;
                if let Some(desc) = blowup(r.iter(), tr) {
                    return Err(desc);
                }
                r.unscale_mut(tr);
            }
        }
        Ok(())
    }
}

/// Integrates one trajectory with Gaussian increments drawn from `p.seed`.
pub fn simulate_trajectory(initial: &QuantumState, p: &SmeParams) -> Result<TrajectoryResult> {
    simulate_trajectory_with(initial, p, TrajectoryOptions::default())
}

pub fn simulate_trajectory_with(initial: &QuantumState, p: &SmeParams, opts: TrajectoryOptions) -> Result<TrajectoryResult> {
    p.validate()?;
    let increments = gaussian_increments(p.seed, p.dt, p.n_steps());
    simulate_with_increments(initial, p, &increments, opts)
}

/// Integrates with caller-supplied Wiener increments (one per step of size
/// `p.dt`), e.g. a refined [`crate::noise::WienerPath`].
pub fn simulate_with_increments(
    initial: &QuantumState,
    p: &SmeParams,
    increments: &[f64],
    opts: TrajectoryOptions,
) -> Result<TrajectoryResult> {
    p.validate()?;
    let expected = p.full_dims();
    if initial.dims() != expected.as_slice() {
        let found: usize = initial.dim();
        return Err(Error::DimensionMismatch { expected: expected.iter().product(), found });
    }
    let n_steps = p.n_steps();
    if increments.len() != n_steps {
        return Err(Error::DimensionMismatch { expected: n_steps, found: increments.len() });
    }
    let use_pure = match (opts.representation, initial) {
        (Representation::Density, _) => false,
        (Representation::Auto, QuantumState::Pure(_)) => p.eta == 1.0,
        (Representation::Auto, QuantumState::Mixed(_)) => false,
        (Representation::Pure, QuantumState::Pure(_)) if p.eta == 1.0 => true,
        (Representation::Pure, _) => {
            return Err(Error::invalid("representation", "state-vector form needs a pure initial state and eta = 1"))
        }
    };
    let mut state = match initial {
        QuantumState::Pure(s) if use_pure => Conditional::Pure(s.amplitudes().clone()),
        other => Conditional::Mixed(other.to_density().entries().clone()),
    };
    let track_eig = opts.track_min_eigenvalue && !use_pure;

    let model = BlockModel::new(p, p.dt);
    let n_samples = n_steps / p.record_stride + 1;
    let n_modes = p.dims.len();
    let mut out = TrajectoryResult {
        times: Vec::with_capacity(n_samples),
        record: Vec::with_capacity(n_samples),
        mean_n: vec![Vec::with_capacity(n_samples); n_modes],
        var_n: vec![Vec::with_capacity(n_samples); n_modes],
        var_total: Vec::with_capacity(n_samples),
        sigma_z: Vec::with_capacity(n_samples),
        purity: Vec::with_capacity(n_samples),
        min_eigenvalue: track_eig.then(|| Vec::with_capacity(n_samples)),
        final_mean_n: Vec::new(),
        final_var_total: 0.0,
        final_state: initial.clone(),
        seed: p.seed,
    };

    let mut record_acc = 0.0;
    let mut obs = model.observe(&state.populations());
    let push = |out: &mut TrajectoryResult, step: usize, obs: &Observation, state: &Conditional, r: f64| {
        out.times.push(step as f64 * p.dt);
        out.record.push(r);
        for mode in 0..n_modes {
            out.mean_n[mode].push(obs.mean[mode]);
            out.var_n[mode].push(obs.var[mode]);
        }
        out.var_total.push(obs.var_total);
        out.sigma_z.push(obs.ez);
        out.purity.push(state.purity());
        if let (Some(v), Conditional::Mixed(r)) = (out.min_eigenvalue.as_mut(), state) {
            v.push(hermitian_eigenvalues(r)[0]);
        }
    };
    push(&mut out, 0, &obs, &state, 0.0);

    for (step, &dw) in increments.iter().enumerate() {
        record_acc += obs.ez * p.dt + dw;
        if let Err(detail) = state.step(&model, obs.ez, dw) {
            return Err(Error::NumericalBlowup { t: (step + 1) as f64 * p.dt, dt: p.dt, detail });
        }
        obs = model.observe(&state.populations());
        if (step + 1) % p.record_stride == 0 {
            push(&mut out, step + 1, &obs, &state, record_acc);
            record_acc = 0.0;
        }
    }

    out.final_mean_n = obs.mean;
    out.final_var_total = obs.var_total;
    let dims = p.full_dims();
    out.final_state = match state {
        Conditional::Pure(v) => QuantumState::Pure(StateVector::new(dims, v)?),
        Conditional::Mixed(r) => QuantumState::Mixed(DensityMatrix::from_raw(dims, r)),
    };
    Ok(out)
}

/// `|+z⟩ ⊗ ψ_1 ⊗ …`, the usual starting point of a trajectory.
pub fn probe_with(modes: &[&StateVector]) -> QuantumState {
    let mut s = StateVector::plus_z();
    for m in modes {
        s = s.tensor(m);
    }
    QuantumState::Pure(s)
}
