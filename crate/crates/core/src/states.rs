//! Single-mode state factories: Fock superpositions, coherent and squeezed
//! coherent states, superpositions of squeezed coherent states, and Kerr
//! evolution under `(a†a)²`.
//!
//! Squeezing convention: `S(s) = exp[(s/2)(a² − a†²)]` with real `s`. The
//! default component is `D(α)S(s)|0⟩`; flipping the sign of `s` or the
//! operator order gives the other conventions, both selectable through
//! [`SqueezeOrdering`].

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{annihilation_op, truncation_adequate, StateVector};

/// Operator order used to build a squeezed coherent component.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SqueezeOrdering {
    /// `D(α)S(s)|0⟩`
    #[default]
    DisplaceSqueeze,
    /// `S(s)D(α)|0⟩`
    SqueezeDisplace,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatComponent {
    pub weight: C64,
    pub alpha: C64,
    #[serde(default)]
    pub squeeze: f64,
}

impl CatComponent {
    pub fn new(weight: C64, alpha: C64, squeeze: f64) -> Self {
        Self { weight, alpha, squeeze }
    }

    pub fn real(weight: f64, alpha: f64, squeeze: f64) -> Self {
        Self::new(C64::new(weight, 0.0), C64::new(alpha, 0.0), squeeze)
    }
}

/// Superposition `Σ_i w_i |α_i, s_i⟩` of squeezed coherent states sharing one
/// truncation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatSpec {
    pub components: Vec<CatComponent>,
    #[serde(default)]
    pub ordering: SqueezeOrdering,
}

impl CatSpec {
    pub fn new(components: Vec<CatComponent>) -> Self {
        Self { components, ordering: SqueezeOrdering::default() }
    }

    pub fn with_ordering(mut self, ordering: SqueezeOrdering) -> Self {
        self.ordering = ordering;
        self
    }

    /// Real positive amplitudes with one shared squeezing, as used for
    /// phase-state preparation.
    pub fn shared_squeeze(weights: &[f64], alphas: &[f64], squeeze: f64) -> Self {
        assert_eq!(weights.len(), alphas.len());
        Self::new(weights.iter().zip(alphas).map(|(&w, &a)| CatComponent::real(w, a, squeeze)).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::DegenerateSpec("cat spec needs at least one component".into()));
        }
        for (i, c) in self.components.iter().enumerate() {
            if !(c.weight.re.is_finite() && c.weight.im.is_finite() && c.alpha.re.is_finite() && c.alpha.im.is_finite() && c.squeeze.is_finite()) {
                return Err(Error::invalid(format!("components[{i}]"), "non-finite value"));
            }
        }
        Ok(())
    }

    /// `true` when every component carries the same squeezing.
    pub fn has_shared_squeeze(&self) -> bool {
        self.components.windows(2).all(|w| w[0].squeeze == w[1].squeeze)
    }

    pub fn max_alpha(&self) -> f64 {
        self.components.iter().map(|c| c.alpha.norm()).fold(0.0, f64::max)
    }

    /// Truncation that comfortably holds every component.
    pub fn default_dim(&self) -> usize {
        let s = self.components.iter().map(|c| c.squeeze.abs()).fold(0.0, f64::max);
        let a = self.max_alpha() * s.exp();
        crate::fockspace::default_truncation(a) + (8.0 * s.sinh().powi(2)).ceil() as usize
    }

    /// Same state written in the displace-then-squeeze ordering, using
    /// `S(s)D(α) = D(α cosh s − α* sinh s)S(s)`.
    pub fn to_displace_squeeze(&self) -> CatSpec {
        match self.ordering {
            SqueezeOrdering::DisplaceSqueeze => self.clone(),
            SqueezeOrdering::SqueezeDisplace => CatSpec {
                components: self
                    .components
                    .iter()
                    .map(|c| {
                        let (ch, sh) = (c.squeeze.cosh(), c.squeeze.sinh());
                        CatComponent { alpha: c.alpha * ch - c.alpha.conj() * sh, ..*c }
                    })
                    .collect(),
                ordering: SqueezeOrdering::DisplaceSqueeze,
            },
        }
    }

    /// Same state written in `ordering`.
    pub fn to_ordering(&self, ordering: SqueezeOrdering) -> CatSpec {
        match (self.ordering, ordering) {
            (a, b) if a == b => self.clone(),
            (_, SqueezeOrdering::DisplaceSqueeze) => self.to_displace_squeeze(),
            (_, SqueezeOrdering::SqueezeDisplace) => CatSpec {
                components: self
                    .components
                    .iter()
                    .map(|c| {
                        let (ch, sh) = (c.squeeze.cosh(), c.squeeze.sinh());
                        CatComponent { alpha: c.alpha * ch + c.alpha.conj() * sh, ..*c }
                    })
                    .collect(),
                ordering: SqueezeOrdering::SqueezeDisplace,
            },
        }
    }

    /// Spec of the (unnormalized) state `r^{a†a}|ψ⟩`.
    ///
    /// Every component stays a displaced squeezed vacuum: in the Gaussian form
    /// `exp(A a†²/2 + B a†)|0⟩` the map sends `A ↦ r²A`, `B ↦ rB`. Weights pick
    /// up the ratio of prefactors. Returns `None` when `|r² tanh s| ≥ 1`.
    pub fn rescale_number(&self, r: f64) -> Option<CatSpec> {
        let base = self.to_displace_squeeze();
        let mut components = Vec::with_capacity(base.components.len());
        for c in &base.components {
            let t = c.squeeze.tanh();
            let t_new = r * r * t;
            if t_new.abs() >= 1.0 {
                return None;
            }
            let beta = (c.alpha + c.alpha.conj() * t) * r;
            let alpha_new = C64::new(beta.re / (1.0 + t_new), beta.im / (1.0 - t_new));
            let s_new = t_new.atanh();
            let weight = c.weight * gaussian_prefactor(c.alpha, c.squeeze) / gaussian_prefactor(alpha_new, s_new);
            components.push(CatComponent { weight, alpha: alpha_new, squeeze: s_new });
        }
        Some(CatSpec { components, ordering: SqueezeOrdering::DisplaceSqueeze })
    }
}

/// `(cosh s)^{-1/2} exp(−|α|²/2 − tanh(s) α*²/2)`, the vacuum amplitude of `D(α)S(s)|0⟩`.
fn gaussian_prefactor(alpha: C64, s: f64) -> C64 {
    let t = s.tanh();
    let expo = -alpha.norm_sqr() / 2.0 - alpha.conj() * alpha.conj() * (t / 2.0);
    expo.exp() / s.cosh().sqrt()
}

pub fn fock_state(n: usize, dim: usize) -> Result<StateVector> {
    if n >= dim {
        return Err(Error::InvalidDimension { dim, reason: "Fock index must be below the truncation" });
    }
    StateVector::basis(vec![dim], n)
}

/// Equal-amplitude superposition of `|0⟩ … |n_levels−1⟩`.
pub fn uniform_fock_superposition(n_levels: usize, dim: usize) -> Result<StateVector> {
    if n_levels == 0 {
        return Err(Error::InvalidDimension { dim: n_levels, reason: "need at least one level" });
    }
    if dim < n_levels {
        return Err(Error::InvalidDimension { dim, reason: "truncation below the number of levels" });
    }
    let amp = C64::new(1.0 / (n_levels as f64).sqrt(), 0.0);
    let amps = DVector::from_fn(dim, |n, _| if n < n_levels { amp } else { C64::new(0.0, 0.0) });
    StateVector::new(vec![dim], amps)
}

fn warn_truncation(alpha_abs: f64, dim: usize) {
    if !truncation_adequate(alpha_abs, dim) {
        warn!("truncation dim {dim} is small for |alpha| = {alpha_abs:.3}; tail probability may exceed 1e-10");
    }
}

/// Coherent state by the amplitude recurrence `c_{n+1} = c_n α/√(n+1)`,
/// renormalized over the truncated space.
pub fn coherent_state(alpha: C64, dim: usize) -> Result<StateVector> {
    if dim == 0 {
        return Err(Error::InvalidDimension { dim, reason: "need dim >= 1" });
    }
    warn_truncation(alpha.norm(), dim);
    StateVector::single_mode(coherent_amplitudes(alpha, dim))
}

/// Exact (not renormalized) coherent amplitudes `e^{−|α|²/2} αⁿ/√n!`.
pub fn coherent_amplitudes(alpha: C64, len: usize) -> Vec<C64> {
    let mut amps = Vec::with_capacity(len);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..len {
        amps.push(c);
        c = c * alpha / ((n + 1) as f64).sqrt();
    }
    amps
}

/// Exact Fock amplitudes `⟨n|D(α)S(s)|0⟩` (or `S(s)D(α)`), n < len.
///
/// Uses the Gaussian generating function `exp(A x²/2 + B x)` with
/// `A = −tanh s`, `B = α + α* tanh s`, whose Taylor coefficients obey
/// `h_{n+1} = B h_n + n A h_{n−1}`.
pub fn gaussian_amplitudes(alpha: C64, s: f64, ordering: SqueezeOrdering, len: usize) -> Vec<C64> {
    let alpha = match ordering {
        SqueezeOrdering::DisplaceSqueeze => alpha,
        SqueezeOrdering::SqueezeDisplace => alpha * s.cosh() - alpha.conj() * s.sinh(),
    };
    let t = s.tanh();
    let a = -t;
    let b = alpha + alpha.conj() * t;
    let k = gaussian_prefactor(alpha, s);
    let mut out = Vec::with_capacity(len);
    // g_n = h_n / √n!
    let mut prev = C64::new(0.0, 0.0);
    let mut cur = C64::new(1.0, 0.0);
    for n in 0..len {
        out.push(k * cur);
        let next = (b * cur + prev * (a * (n as f64).sqrt())) / ((n + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    out
}

/// Exact (unnormalized) amplitudes of `Σ w_i |α_i, s_i⟩`, n < len.
pub fn cat_amplitudes(spec: &CatSpec, len: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); len];
    for c in &spec.components {
        for (o, g) in out.iter_mut().zip(gaussian_amplitudes(c.alpha, c.squeeze, spec.ordering, len)) {
            *o += c.weight * g;
        }
    }
    out
}

/// Extra levels used when exponentiating truncated generators, so that edge
/// artifacts stay far above the kept levels.
fn padding(alpha_abs: f64, s: f64) -> usize {
    (6.0 * alpha_abs + 12.0 * s.abs().sinh().powi(2)).ceil() as usize + 40
}

fn ladder(dim: usize) -> (DMatrix<C64>, DMatrix<C64>) {
    let a = annihilation_op(dim).expect("dim >= 2").into_entries();
    let ad = a.adjoint();
    (a, ad)
}

/// `exp(α a† − α* a)` on a `dim`-level truncation.
pub fn displacement_matrix(alpha: C64, dim: usize) -> DMatrix<C64> {
    let (a, ad) = ladder(dim);
    (&ad * alpha - &a * alpha.conj()).exp()
}

/// `exp[(s/2)(a² − a†²)]` on a `dim`-level truncation.
pub fn squeeze_matrix(s: f64, dim: usize) -> DMatrix<C64> {
    let (a, ad) = ladder(dim);
    ((&a * &a - &ad * &ad) * C64::new(s / 2.0, 0.0)).exp()
}

/// Unnormalized `D(α)S(s)|0⟩` (or the reverse order) from matrix exponentials
/// of the truncated generators, cut to `dim` levels.
fn squeezed_component(alpha: C64, s: f64, ordering: SqueezeOrdering, dim: usize) -> DVector<C64> {
    let padded = dim + padding(alpha.norm(), s);
    let d = displacement_matrix(alpha, padded);
    let sq = squeeze_matrix(s, padded);
    let op = match ordering {
        SqueezeOrdering::DisplaceSqueeze => d * sq,
        SqueezeOrdering::SqueezeDisplace => sq * d,
    };
    DVector::from_fn(dim, |n, _| op[(n, 0)])
}

/// `D(α)S(s)|0⟩`, renormalized over `dim` levels.
pub fn squeezed_coherent_state(alpha: C64, s: f64, dim: usize) -> Result<StateVector> {
    squeezed_coherent_state_ordered(alpha, s, SqueezeOrdering::DisplaceSqueeze, dim)
}

pub fn squeezed_coherent_state_ordered(alpha: C64, s: f64, ordering: SqueezeOrdering, dim: usize) -> Result<StateVector> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim, reason: "need dim >= 2" });
    }
    if s.abs() > 1.0 {
        warn!("squeezing |s| = {} exceeds 1; check truncation", s.abs());
    }
    warn_truncation(alpha.norm() * s.abs().exp(), dim);
    StateVector::new(vec![dim], squeezed_component(alpha, s, ordering, dim))
}

/// Normalized `Σ_i w_i D(α_i)S(s_i)|0⟩` on `dim` levels.
pub fn cat_superposition(spec: &CatSpec, dim: usize) -> Result<StateVector> {
    spec.validate()?;
    if dim < 2 {
        return Err(Error::InvalidDimension { dim, reason: "need dim >= 2" });
    }
    let mut total = DVector::zeros(dim);
    let mut weight_scale = 0.0;
    for c in &spec.components {
        total += squeezed_component(c.alpha, c.squeeze, spec.ordering, dim) * c.weight;
        weight_scale += c.weight.norm();
    }
    let norm = total.norm();
    if norm <= 1e-12 * weight_scale.max(1e-300) {
        return Err(Error::DegenerateSpec(format!("components cancel (norm {norm:e})")));
    }
    StateVector::new(vec![dim], total)
}

/// Evolution under `(a†a)²`: `c_n ↦ e^{−iθn²} c_n`.
pub fn kerr_evolve(state: &StateVector, theta: f64) -> Result<StateVector> {
    if state.dims().len() != 1 {
        return Err(Error::invalid("state", "Kerr evolution acts on a single mode"));
    }
    let amps = DVector::from_fn(state.dim(), |n, _| {
        let n2 = (n * n) as f64;
        state.amplitude(n) * C64::from_polar(1.0, -theta * n2)
    });
    StateVector::from_normalized(state.dims().to_vec(), amps)
}
