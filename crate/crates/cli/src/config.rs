//! Run configuration: one versioned JSON schema shared by all experiments.
//!
//! Every section has defaults, so a config only needs the keys it changes.
//! Unknown keys anywhere in the document are collected and reported together.

use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use qnd_core::phaseprep::{phase_target, SqueezeMode};
use qnd_core::optim::NelderMeadOptions;
use qnd_core::sme::SmeParams;
use qnd_core::states::{self, CatComponent, CatSpec, SqueezeOrdering};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Collapse,
    Ksweep,
    Noon,
    Phase,
    Optimize,
    Wigner,
    Project,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        f.write_str(&s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Png,
}

/// A complex number written either as a real scalar or as `[re, im]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexValue {
    pub fn value(self) -> C64 {
        match self {
            ComplexValue::Real(r) => C64::new(r, 0.0),
            ComplexValue::Pair([r, i]) => C64::new(r, i),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Fock,
    UniformFock,
    Coherent,
    Squeezed,
    Cat,
    Amplitudes,
    NoonTarget,
    PhaseTarget,
}

/// Single-mode state. Which fields are required depends on `kind`:
///
/// | kind | fields |
/// |---|---|
/// | `fock` | `n`, `dim` |
/// | `uniform_fock` | `levels`, `dim` |
/// | `coherent` | `alpha`, `dim` |
/// | `squeezed` | `alpha`, `squeeze`, `ordering`, `dim` |
/// | `cat` | `spec`, `dim` |
/// | `amplitudes` | `amplitudes` (list of `[re, im]` or reals) |
/// | `noon_target`, `phase_target` | `N` (`theta` for the phase target) |
///
/// `dim` falls back to the truncation implied by the context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub kind: StateKind,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub levels: Option<usize>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub alpha: Option<ComplexValue>,
    #[serde(default)]
    pub squeeze: Option<f64>,
    #[serde(default)]
    pub ordering: Option<SqueezeOrdering>,
    #[serde(default)]
    pub spec: Option<CatSpec>,
    #[serde(default)]
    pub amplitudes: Option<Vec<ComplexValue>>,
    #[serde(default, rename = "N")]
    pub total: Option<usize>,
    #[serde(default)]
    pub theta: Option<f64>,
}

impl StateSpec {
    pub fn of_kind(kind: StateKind) -> Self {
        Self {
            kind,
            n: None,
            levels: None,
            dim: None,
            alpha: None,
            squeeze: None,
            ordering: None,
            spec: None,
            amplitudes: None,
            total: None,
            theta: None,
        }
    }

    pub fn uniform_fock(levels: usize) -> Self {
        Self { levels: Some(levels), ..Self::of_kind(StateKind::UniformFock) }
    }

    fn skeleton() -> Self {
        Self {
            kind: StateKind::Fock,
            n: Some(0),
            levels: Some(1),
            dim: Some(1),
            alpha: Some(ComplexValue::Real(0.0)),
            squeeze: Some(0.0),
            ordering: Some(SqueezeOrdering::default()),
            spec: Some(CatSpec::new(vec![CatComponent::real(1.0, 0.0, 0.0)])),
            amplitudes: Some(vec![ComplexValue::Real(1.0)]),
            total: Some(0),
            theta: Some(0.0),
        }
    }

    /// Checks the fields `kind` needs, reporting them under `path`.
    pub fn check(&self, path: &str, issues: &mut Vec<String>) {
        let mut need = |present: bool, field: &str| {
            if !present {
                issues.push(format!("{path}.{field}: required for kind {:?}", self.kind));
            }
        };
        match self.kind {
            StateKind::Fock => need(self.n.is_some(), "n"),
            StateKind::UniformFock => need(self.levels.is_some(), "levels"),
            StateKind::Coherent => need(self.alpha.is_some(), "alpha"),
            StateKind::Squeezed => {
                need(self.alpha.is_some(), "alpha");
                need(self.squeeze.is_some(), "squeeze");
            }
            StateKind::Cat => need(self.spec.is_some(), "spec"),
            StateKind::Amplitudes => need(self.amplitudes.as_ref().is_some_and(|a| !a.is_empty()), "amplitudes"),
            StateKind::NoonTarget | StateKind::PhaseTarget => need(self.total.is_some(), "N"),
        }
        if self.dim == Some(0) {
            issues.push(format!("{path}.dim: must be at least 1"));
        }
        if let Some(spec) = &self.spec {
            if let Err(e) = spec.validate() {
                issues.push(format!("{path}.spec: {e}"));
            }
        }
    }

    /// Amplitudes in a truncation of `dim` (or the spec's own `dim`).
    pub fn amplitudes(&self, default_dim: Option<usize>) -> Result<Vec<C64>, CliError> {
        let dim = self.dim.or(default_dim);
        let need_dim = |fallback: usize| dim.unwrap_or(fallback);
        let v = match self.kind {
            StateKind::Fock => {
                let n = self.n.unwrap_or(0);
                states::fock_state(n, need_dim(n + 1))?.to_vec()
            }
            StateKind::UniformFock => {
                let l = self.levels.unwrap_or(1);
                states::uniform_fock_superposition(l, need_dim(l))?.to_vec()
            }
            StateKind::Coherent => {
                let a = self.alpha.map(ComplexValue::value).unwrap_or_default();
                states::coherent_state(a, need_dim(qnd_core::fockspace::default_truncation(a.norm())))?.to_vec()
            }
            StateKind::Squeezed => {
                let a = self.alpha.map(ComplexValue::value).unwrap_or_default();
                let s = self.squeeze.unwrap_or(0.0);
                let ordering = self.ordering.unwrap_or_default();
                let spec = CatSpec::new(vec![CatComponent::new(C64::new(1.0, 0.0), a, s)]).with_ordering(ordering);
                states::squeezed_coherent_state_ordered(a, s, ordering, need_dim(spec.default_dim()))?.to_vec()
            }
            StateKind::Cat => {
                let spec = self.spec.as_ref().expect("checked");
                states::cat_superposition(spec, need_dim(spec.default_dim()))?.to_vec()
            }
            StateKind::Amplitudes => {
                let raw: Vec<C64> = self.amplitudes.as_ref().expect("checked").iter().map(|c| c.value()).collect();
                let norm = raw.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(CliError::Validation(vec!["amplitudes: all zero".into()]));
                }
                let mut v: Vec<C64> = raw.iter().map(|c| c / norm).collect();
                if let Some(d) = dim {
                    if d < v.len() {
                        return Err(CliError::Validation(vec![format!("dim: {d} is shorter than the amplitude list")]));
                    }
                    v.resize(d, C64::new(0.0, 0.0));
                }
                v
            }
            StateKind::NoonTarget => qnd_core::phaseprep::noon_target(self.total.expect("checked"))?.into_q(),
            StateKind::PhaseTarget => phase_target(self.total.expect("checked"), self.theta.unwrap_or(0.0))?.into_q(),
        };
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollapseSection {
    /// One state per oscillator.
    pub initial: Vec<StateSpec>,
    pub n_traj: usize,
    /// Also write the first trajectory in full.
    pub example_trajectory: bool,
}

impl Default for CollapseSection {
    fn default() -> Self {
        Self { initial: vec![StateSpec::uniform_fock(10)], n_traj: 1000, example_trajectory: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KSweepSection {
    pub initial: Vec<StateSpec>,
    pub k_min: f64,
    pub k_max: f64,
    pub points: usize,
    pub n_traj: usize,
}

impl Default for KSweepSection {
    fn default() -> Self {
        Self { initial: vec![StateSpec::uniform_fock(10)], k_min: 0.125, k_max: 8.0, points: 7, n_traj: 300 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoonSection {
    pub alpha: ComplexValue,
    #[serde(rename = "N")]
    pub total: usize,
    pub squeeze: Option<f64>,
}

impl Default for NoonSection {
    fn default() -> Self {
        Self { alpha: ComplexValue::Real(6.0), total: 20, squeeze: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseSection {
    pub spec: CatSpec,
    #[serde(rename = "N")]
    pub total: usize,
}

impl Default for PhaseSection {
    fn default() -> Self {
        Self { spec: CatSpec::shared_squeeze(&[1.0, 5.0], &[1.162, 3.277], -0.097), total: 10 }
    }
}

/// Fixed amplitudes and squeezing whose weights are re-fitted under every
/// squeezing convention.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefitSection {
    pub alphas: Vec<f64>,
    pub squeeze: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeSection {
    pub n_components: usize,
    #[serde(rename = "N")]
    pub total: usize,
    pub restarts: usize,
    pub squeeze: SqueezeMode,
    pub ordering: SqueezeOrdering,
    pub nelder_mead: NelderMeadOptions,
    pub refit: Option<RefitSection>,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        Self {
            n_components: 2,
            total: 10,
            restarts: 16,
            squeeze: SqueezeMode::Shared,
            ordering: SqueezeOrdering::default(),
            nelder_mead: NelderMeadOptions::default(),
            refit: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WignerSection {
    /// Path to a stored outcome (`outcome.json` of noon/phase/project).
    pub outcome: Option<PathBuf>,
    /// Used when `outcome` is absent.
    pub state: Option<StateSpec>,
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub points: usize,
}

impl Default for WignerSection {
    fn default() -> Self {
        Self {
            outcome: None,
            state: Some(StateSpec { total: Some(20), ..StateSpec::of_kind(StateKind::NoonTarget) }),
            x_min: -9.0,
            x_max: 9.0,
            p_min: -9.0,
            p_max: 9.0,
            points: 201,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectSection {
    pub c: StateSpec,
    pub d: StateSpec,
    /// Outcome to project on; sampled from the run seed when absent.
    #[serde(rename = "N")]
    pub total: Option<usize>,
}

impl Default for ProjectSection {
    fn default() -> Self {
        let coh = StateSpec { alpha: Some(ComplexValue::Real(2.0)), dim: Some(30), ..StateSpec::of_kind(StateKind::Coherent) };
        Self { c: coh.clone(), d: coh, total: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub experiment: Option<Experiment>,
    /// Base seed; overrides `params.seed`.
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub formats: Vec<Format>,
    /// Physical value of μ in s⁻¹, used to report times in seconds.
    pub mu_hz: f64,
    pub params: SmeParams,
    pub collapse: CollapseSection,
    pub ksweep: KSweepSection,
    pub noon: NoonSection,
    pub phase: PhaseSection,
    pub optimize: OptimizeSection,
    pub wigner: WignerSection,
    pub project: ProjectSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: None,
            seed: 0,
            output_dir: None,
            formats: vec![Format::Csv, Format::Json, Format::Png],
            mu_hz: 1e6,
            params: SmeParams::default(),
            collapse: CollapseSection::default(),
            ksweep: KSweepSection::default(),
            noon: NoonSection::default(),
            phase: PhaseSection::default(),
            optimize: OptimizeSection::default(),
            wigner: WignerSection::default(),
            project: ProjectSection::default(),
        }
    }
}

impl RunConfig {
    /// Every key the schema accepts, with optional parts filled in.
    fn skeleton() -> Value {
        let mut c = RunConfig {
            experiment: Some(Experiment::Collapse),
            output_dir: Some(PathBuf::new()),
            ..Default::default()
        };
        c.collapse.initial = vec![StateSpec::skeleton()];
        c.ksweep.initial = vec![StateSpec::skeleton()];
        c.noon.squeeze = Some(0.0);
        c.optimize.refit = Some(RefitSection { alphas: vec![1.0], squeeze: 0.0 });
        c.wigner.outcome = Some(PathBuf::new());
        c.wigner.state = Some(StateSpec::skeleton());
        c.project.c = StateSpec::skeleton();
        c.project.d = StateSpec::skeleton();
        c.project.total = Some(0);
        serde_json::to_value(c).expect("config serializes")
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    /// Semantic checks that need the whole config, reported by field path.
    pub fn validate(&self, experiment: Experiment) -> Result<(), CliError> {
        let mut issues = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            issues.push(format!("schema_version: expected {SCHEMA_VERSION}, found {}", self.schema_version));
        }
        if let Some(e) = self.experiment {
            if e != experiment {
                issues.push(format!("experiment: config names {e} but {experiment} was requested"));
            }
        }
        if !(self.mu_hz.is_finite() && self.mu_hz > 0.0) {
            issues.push("mu_hz: must be positive".into());
        }
        let params_issues = |p: &SmeParams, issues: &mut Vec<String>| {
            if let Err(qnd_core::Error::InvalidParameters(list)) = p.validate() {
                issues.extend(list.iter().map(|i| format!("params.{i}")));
            }
        };
        let modes_match = |initial: &[StateSpec], section: &str, issues: &mut Vec<String>| {
            if initial.len() != self.params.n_modes {
                issues.push(format!(
                    "{section}.initial: {} states given for {} oscillators",
                    initial.len(),
                    self.params.n_modes
                ));
            }
            for (i, s) in initial.iter().enumerate() {
                s.check(&format!("{section}.initial[{i}]"), issues);
            }
        };
        match experiment {
            Experiment::Collapse => {
                params_issues(&self.params, &mut issues);
                modes_match(&self.collapse.initial, "collapse", &mut issues);
                if self.collapse.n_traj == 0 {
                    issues.push("collapse.n_traj: must be at least 1".into());
                }
            }
            Experiment::Ksweep => {
                let s = &self.ksweep;
                let mut p = self.params.clone();
                p.k = s.k_max.max(0.0);
                p.t_final = 2.0 * std::f64::consts::PI / p.mu;
                params_issues(&p, &mut issues);
                modes_match(&s.initial, "ksweep", &mut issues);
                if !(s.k_min > 0.0 && s.k_max >= s.k_min && s.k_max.is_finite()) {
                    issues.push("ksweep.k_min: need 0 < k_min <= k_max".into());
                }
                if s.points == 0 {
                    issues.push("ksweep.points: must be at least 1".into());
                }
                if s.n_traj == 0 {
                    issues.push("ksweep.n_traj: must be at least 1".into());
                }
            }
            Experiment::Noon => {
                if self.noon.alpha.value().norm() == 0.0 {
                    issues.push("noon.alpha: must be nonzero".into());
                }
                if self.noon.total == 0 {
                    issues.push("noon.N: must be at least 1".into());
                }
            }
            Experiment::Phase => {
                if let Err(e) = self.phase.spec.validate() {
                    issues.push(format!("phase.spec: {e}"));
                }
                if self.phase.total == 0 {
                    issues.push("phase.N: must be at least 1".into());
                }
            }
            Experiment::Optimize => {
                let o = &self.optimize;
                if o.n_components == 0 {
                    issues.push("optimize.n_components: must be at least 1".into());
                }
                if o.total == 0 {
                    issues.push("optimize.N: must be at least 1".into());
                }
                if o.restarts == 0 {
                    issues.push("optimize.restarts: must be at least 1".into());
                }
                if let Some(r) = &o.refit {
                    if r.alphas.is_empty() {
                        issues.push("optimize.refit.alphas: must not be empty".into());
                    }
                }
            }
            Experiment::Wigner => {
                let w = &self.wigner;
                match (&w.outcome, &w.state) {
                    (None, None) => issues.push("wigner.state: either wigner.outcome or wigner.state is required".into()),
                    (None, Some(s)) => s.check("wigner.state", &mut issues),
                    _ => {}
                }
                if !(w.x_max > w.x_min) {
                    issues.push("wigner.x_max: must exceed x_min".into());
                }
                if !(w.p_max > w.p_min) {
                    issues.push("wigner.p_max: must exceed p_min".into());
                }
                if w.points < 2 {
                    issues.push("wigner.points: must be at least 2".into());
                }
            }
            Experiment::Project => {
                self.project.c.check("project.c", &mut issues);
                self.project.d.check("project.d", &mut issues);
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(issues))
        }
    }
}

/// Collects dotted paths of keys in `input` that the schema does not know.
fn unknown_keys(input: &Value, schema: &Value, path: &str, out: &mut Vec<String>) {
    match (input, schema) {
        (Value::Object(i), Value::Object(s)) => {
            for (k, v) in i {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match s.get(k) {
                    Some(sv) => unknown_keys(v, sv, &p, out),
                    None => out.push(p),
                }
            }
        }
        (Value::Array(i), Value::Array(s)) if !s.is_empty() => {
            for (n, v) in i.iter().enumerate() {
                unknown_keys(v, &s[0], &format!("{path}[{n}]"), out);
            }
        }
        _ => {}
    }
}

/// Sets a dotted path to `raw`, parsed as JSON when possible and as a string
/// otherwise. Intermediate objects are created as needed.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Validation(vec![format!("--set {assignment}: expected key=value")]))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(CliError::Validation(vec![format!("--set {key}: empty path segment")]));
        }
        if !node.is_object() {
            return Err(CliError::Validation(vec![format!("--set {key}: {} is not an object", parts[..i].join("."))]));
        }
        let map = node.as_object_mut().expect("checked");
        if i + 1 == parts.len() {
            map.insert((*part).to_owned(), value);
            return Ok(());
        }
        node = map.entry((*part).to_owned()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// A stored `manifest.json` can stand in for a config; its `config` entry is used.
fn unwrap_manifest(doc: Value) -> Value {
    match doc {
        Value::Object(mut m) if m.contains_key("manifest_version") => m.remove("config").unwrap_or(Value::Null),
        other => other,
    }
}

/// Parses a config document (plus overrides) into a typed config.
pub fn parse(doc: Value, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut doc = unwrap_manifest(doc);
    if doc.is_null() {
        doc = Value::Object(Default::default());
    }
    if !doc.is_object() {
        return Err(CliError::Validation(vec!["config: top level must be a JSON object".into()]));
    }
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let mut unknown = Vec::new();
    unknown_keys(&doc, &RunConfig::skeleton(), "", &mut unknown);
    if !unknown.is_empty() {
        return Err(CliError::Validation(unknown.into_iter().map(|k| format!("{k}: unknown key")).collect()));
    }
    let mut cfg: RunConfig =
        serde_json::from_value(doc).map_err(|e| CliError::Validation(vec![format!("config: {e}")]))?;
    cfg.params.seed = cfg.seed;
    Ok(cfg)
}

pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let doc = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Validation(vec![format!("config: cannot read {}: {e}", p.display())]))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(vec![format!("config: {} is not valid JSON: {e}", p.display())]))?
        }
        None => Value::Null,
    };
    parse(doc, overrides)
}
