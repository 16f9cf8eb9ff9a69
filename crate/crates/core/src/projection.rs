//! Projective measurement of the total phonon number of two oscillators.
//!
//! For a product input `Σ c_n|n⟩ ⊗ Σ d_m|m⟩`, outcome `N` leaves
//! `Σ_n c_n d_{N−n} |n⟩|N−n⟩`. The states `|n⟩_N = |n⟩|N−n⟩`, n = 0..N, span a
//! virtual oscillator indexed by the number difference.

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::StateVector;

/// Outcomes below this probability are treated as unreachable.
pub const MIN_PROBABILITY: f64 = 1e-300;

const INPUT_NORM_TOL: f64 = 1e-10;

/// Normalized amplitudes over `|n⟩_N`, n = 0..N.
#[derive(Clone, Debug, PartialEq)]
pub struct VirtualOscillatorState {
    q: Vec<C64>,
}

impl VirtualOscillatorState {
    /// Normalizes `q`; `q.len() = N + 1`.
    pub fn new(q: Vec<C64>) -> Result<Self> {
        let norm = q.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if q.is_empty() || !(norm > 1e-300) || !norm.is_finite() {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { q: q.into_iter().map(|z| z / norm).collect() })
    }

    /// Total phonon number N.
    pub fn total(&self) -> usize {
        self.q.len() - 1
    }

    pub fn q(&self) -> &[C64] {
        &self.q
    }

    pub fn into_q(self) -> Vec<C64> {
        self.q
    }

    /// `|q_n|²`.
    pub fn distribution(&self) -> Vec<f64> {
        self.q.iter().map(|z| z.norm_sqr()).collect()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.q.len() != other.q.len() {
            return Err(Error::DimensionMismatch { expected: self.q.len(), found: other.q.len() });
        }
        Ok(self.q.iter().zip(&other.q).map(|(a, b)| a.conj() * b).sum())
    }

    /// `q_n ↦ e^{inφ} q_n`.
    pub fn rotate(&self, phi: f64) -> Self {
        Self { q: self.q.iter().enumerate().map(|(n, z)| z * C64::from_polar(1.0, n as f64 * phi)).collect() }
    }

    /// The amplitudes as a single-mode state vector.
    pub fn as_single_mode(&self) -> StateVector {
        StateVector::single_mode(self.q.clone()).expect("normalized by construction")
    }
}

/// Result of one total-number measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "OutcomeJson", try_from = "OutcomeJson")]
pub struct JointOutcome {
    pub total: usize,
    pub probability: f64,
    pub state: VirtualOscillatorState,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutcomeJson {
    #[serde(rename = "N")]
    n: usize,
    probability: f64,
    q_re: Vec<f64>,
    q_im: Vec<f64>,
}

impl From<JointOutcome> for OutcomeJson {
    fn from(o: JointOutcome) -> Self {
        Self {
            n: o.total,
            probability: o.probability,
            q_re: o.state.q.iter().map(|z| z.re).collect(),
            q_im: o.state.q.iter().map(|z| z.im).collect(),
        }
    }
}

impl TryFrom<OutcomeJson> for JointOutcome {
    type Error = Error;

    fn try_from(j: OutcomeJson) -> Result<Self> {
        if j.q_re.len() != j.n + 1 || j.q_im.len() != j.n + 1 {
            return Err(Error::DimensionMismatch { expected: j.n + 1, found: j.q_re.len().min(j.q_im.len()) });
        }
        if !(0.0..=1.0).contains(&j.probability) {
            return Err(Error::invalid("probability", "must lie in [0, 1]"));
        }
        let q = j.q_re.iter().zip(&j.q_im).map(|(&r, &i)| C64::new(r, i)).collect();
        Ok(Self { total: j.n, probability: j.probability, state: VirtualOscillatorState::new(q)? })
    }
}

impl JointOutcome {
    pub fn q(&self) -> &[C64] {
        self.state.q()
    }
}

fn check_normalized(amps: &[C64]) -> Result<()> {
    let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if amps.is_empty() || (norm - 1.0).abs() > INPUT_NORM_TOL {
        return Err(Error::NotNormalized { norm });
    }
    Ok(())
}

/// `P(N) = Σ_n |c_n d_{N−n}|²` for N = 0..len(c)+len(d)−2.
pub fn outcome_distribution(c: &[C64], d: &[C64]) -> Result<Vec<f64>> {
    check_normalized(c)?;
    check_normalized(d)?;
    let pc: Vec<f64> = c.iter().map(|z| z.norm_sqr()).collect();
    let pd: Vec<f64> = d.iter().map(|z| z.norm_sqr()).collect();
    let mut out = vec![0.0; pc.len() + pd.len() - 1];
    for (n, a) in pc.iter().enumerate() {
        for (m, b) in pd.iter().enumerate() {
            out[n + m] += a * b;
        }
    }
    Ok(out)
}

/// Unnormalized `c_n d_{N−n}` for n = 0..N.
fn joint_products(c: &[C64], d: &[C64], total: usize) -> Vec<C64> {
    let zero = C64::new(0.0, 0.0);
    (0..=total)
        .map(|n| {
            let a = c.get(n).copied().unwrap_or(zero);
            let b = if total - n < d.len() { d[total - n] } else { zero };
            a * b
        })
        .collect()
}

/// Projects `c ⊗ d` onto total phonon number `total`.
pub fn project_joint(c: &[C64], d: &[C64], total: usize) -> Result<JointOutcome> {
    check_normalized(c)?;
    check_normalized(d)?;
    let max = c.len() + d.len() - 2;
    if total > max {
        return Err(Error::TruncationTooSmall(format!("outcome N = {total} exceeds the largest representable {max}")));
    }
    let raw = joint_products(c, d, total);
    let probability: f64 = raw.iter().map(|z| z.norm_sqr()).sum();
    if probability < MIN_PROBABILITY {
        return Err(Error::ImpossibleOutcome { n: total, probability });
    }
    Ok(JointOutcome { total, probability, state: VirtualOscillatorState::new(raw)? })
}

/// Draws N from [`outcome_distribution`] and returns the projected state.
pub fn sample_outcome<R: Rng + ?Sized>(c: &[C64], d: &[C64], rng: &mut R) -> Result<JointOutcome> {
    let dist = outcome_distribution(c, d)?;
    let index = WeightedIndex::new(&dist).map_err(|e| Error::invalid("distribution", e.to_string()))?;
    project_joint(c, d, index.sample(rng))
}

/// Embeds `Σ q_n |n⟩|N−n⟩` into a two-mode space with dims `[da, db]`.
pub fn virtual_to_joint(v: &VirtualOscillatorState, dims: [usize; 2]) -> Result<StateVector> {
    let total = v.total();
    if dims[0] <= total || dims[1] <= total {
        return Err(Error::TruncationTooSmall(format!("dims {dims:?} cannot hold N = {total} in each mode")));
    }
    let mut amps = DVector::zeros(dims[0] * dims[1]);
    for (n, q) in v.q().iter().enumerate() {
        amps[n * dims[1] + (total - n)] = *q;
    }
    StateVector::from_normalized(dims.to_vec(), amps)
}

/// Restricts a two-mode state to the `total` sector and renormalizes.
pub fn extract_virtual(state: &StateVector, total: usize) -> Result<VirtualOscillatorState> {
    let dims = state.dims();
    if dims.len() != 2 {
        return Err(Error::invalid("state", "expected a two-mode state"));
    }
    let zero = C64::new(0.0, 0.0);
    let q = (0..=total)
        .map(|n| {
            let m = total - n;
            if n < dims[0] && m < dims[1] {
                state.amplitude(n * dims[1] + m)
            } else {
                zero
            }
        })
        .collect::<Vec<_>>();
    let weight: f64 = q.iter().map(|z| z.norm_sqr()).sum();
    if weight < MIN_PROBABILITY {
        return Err(Error::ImpossibleOutcome { n: total, probability: weight });
    }
    VirtualOscillatorState::new(q)
}
