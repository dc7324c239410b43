//! TOML scene configs and `key=value` overrides.
//!
//! Complex numbers are `[re, im]` pairs and matrices are arrays of rows.
//! Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::amplitude::{validate_density, CMatrix, Tensor4};
use crate::error::{Error, Result};
use crate::hbt::{extended_source, ScanSpec};
use crate::polarization::{PolMatrix, ProjectorFamily};
use crate::procedures::{DecayChannel, MixedAmplitudes, ThreeLevelAtom, DEFAULT_SWEEP_STEPS};
use crate::scene::{Detector, Emitter, OpticalScene, PropagatorModel, Species, Vec3};

pub type Complex = [f64; 2];
pub type ComplexMatrix = Vec<Vec<Complex>>;

const DENSITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub sources: SourcesConfig,
    #[serde(default)]
    pub detectors: DetectorsConfig,
    pub run: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default = "default_wavelength")]
    pub wavelength: f64,
    #[serde(default)]
    pub emitters: Vec<Vec3>,
    #[serde(default)]
    pub detectors: Vec<Vec3>,
    #[serde(default)]
    pub model: ModelName,
    /// Uniform line of emitters, used in place of `emitters`.
    pub extended: Option<ExtendedConfig>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            wavelength: default_wavelength(),
            emitters: Vec::new(),
            detectors: Vec::new(),
            model: ModelName::default(),
            extended: None,
        }
    }
}

fn default_wavelength() -> f64 {
    5e-7
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    #[default]
    Spherical,
    PurePhase,
}

impl From<ModelName> for PropagatorModel {
    fn from(m: ModelName) -> Self {
        match m {
            ModelName::Spherical => PropagatorModel::Spherical,
            ModelName::PurePhase => PropagatorModel::PurePhase,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendedConfig {
    pub center: Vec3,
    pub axis: Vec3,
    pub width: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourcesConfig {
    /// One per emitter; photons when absent.
    #[serde(default)]
    pub species: Vec<Species>,
    /// One density matrix per emitter.
    pub polarization: Option<Vec<ComplexMatrix>>,
    /// One pure polarization state per emitter, as an alternative to `polarization`.
    pub states: Option<Vec<[Complex; 2]>>,
    #[serde(default)]
    pub phase_noise: bool,
    pub emission_phases: Option<Vec<f64>>,
    /// Joint 4x4 emitter density matrix, rows `(a1, b1)` and columns `(a2, b2)`.
    pub entangled: Option<ComplexMatrix>,
    pub decay: Option<DecayConfig>,
    pub atom: Option<AtomConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub dd: Complex,
    pub ee: Complex,
    /// Propagator to the detector registering the `DD` branch.
    #[serde(default = "unit")]
    pub d1a: Complex,
    /// Propagator to the detector registering the `EE` branch.
    #[serde(default = "unit")]
    pub s1b: Complex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub alpha: Complex,
    pub beta: Complex,
    #[serde(default = "unit")]
    pub coupling_02: Complex,
    #[serde(default = "unit")]
    pub coupling_12: Complex,
}

fn unit() -> Complex {
    [1.0, 0.0]
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorsConfig {
    /// One projector per detector.
    pub projectors: Option<Vec<ComplexMatrix>>,
    /// Joint 4x4 detector tensor.
    pub system: Option<ComplexMatrix>,
    /// Species each detector accepts; all when absent.
    pub accepts: Option<Vec<Vec<Species>>>,
    pub procedure: Option<ProcedureName>,
    /// Explicit amplitudes for procedure mode; otherwise taken from the scene.
    pub amplitudes: Option<AmplitudesConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcedureName {
    Procedure1,
    Procedure2,
    SpatialSwap,
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudesConfig {
    pub s1a: Complex,
    pub d2b: Complex,
    pub d2a: Complex,
    pub s1b: Complex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Rate,
    Scan,
    Fit,
    Witness,
    Procedure,
    Variant,
}

impl Mode {
    pub const ALL: [Mode; 6] = [Mode::Rate, Mode::Scan, Mode::Fit, Mode::Witness, Mode::Procedure, Mode::Variant];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Rate => "rate",
            Mode::Scan => "scan",
            Mode::Fit => "fit",
            Mode::Witness => "witness",
            Mode::Procedure => "procedure",
            Mode::Variant => "variant",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantName {
    Wavelength,
    Decay,
    MachZehnder,
    SwapOperator,
    LinkedPolarization,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModelName {
    HbtTwoPoint,
    HbtExtended,
    DecayPhase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_axis")]
    pub axis: Vec3,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub steps: Option<usize>,
    /// Gaussian noise on synthetic data, as a fraction of the peak.
    #[serde(default)]
    pub noise: f64,
    /// Phase-noise realizations in rate mode.
    #[serde(default)]
    pub realizations: usize,
    pub model: Option<FitModelName>,
    /// Generating parameters for synthetic fit data.
    pub truth: Option<Vec<f64>>,
    #[serde(default = "unit_amplitude")]
    pub amplitude: f64,
    /// Source distance for the fit models; mean emitter height when absent.
    pub distance: Option<f64>,
    pub count: Option<usize>,
    /// CSV of `control,rate` rows, relative to the config file.
    pub observations: Option<PathBuf>,
    pub bounds: Option<Vec<[f64; 2]>>,
    pub starts: Option<usize>,
    pub threshold: Option<f64>,
    pub variant: Option<VariantName>,
    #[serde(default = "default_sweep_steps")]
    pub sweep_steps: usize,
    pub family: Option<ProjectorFamily>,
}

fn default_axis() -> Vec3 {
    [1.0, 0.0, 0.0]
}

fn unit_amplitude() -> f64 {
    1.0
}

fn default_sweep_steps() -> usize {
    DEFAULT_SWEEP_STEPS
}

/// Errors raised while reading a config, split by exit status.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Invalid(#[from] Error),
}

impl ConfigError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ConfigError::Io { .. } => 1,
            ConfigError::Parse(_) => 2,
            ConfigError::Invalid(_) => 3,
        }
    }
}

/// One-based line and column of a byte offset.
pub fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, col)
}

fn parse_error(origin: &str, text: &str, e: &toml::de::Error) -> ConfigError {
    let msg = e.message().trim_end();
    match e.span() {
        Some(span) => {
            let (line, col) = line_col(text, span.start);
            ConfigError::Parse(format!("{origin}:{line}:{col}: {msg}"))
        }
        None => ConfigError::Parse(format!("{origin}: {msg}")),
    }
}

/// Parse the value side of an override as TOML, falling back to a bare string.
fn override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Apply `a.b.c=value` to a TOML table, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> std::result::Result<(), ConfigError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::Parse(format!("override `{spec}`: expected key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Parse(format!("override `{spec}`: empty key segment")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Parse(format!("override `{spec}`: `{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), override_value(raw.trim()));
    Ok(())
}

/// Parse config text and apply overrides. Syntax and schema errors carry
/// line/column positions in the original document.
pub fn parse_config(text: &str, origin: &str, overrides: &[String]) -> std::result::Result<SceneConfig, ConfigError> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| parse_error(origin, text, &e))?;
    if overrides.is_empty() {
        return toml::from_str(text).map_err(|e| parse_error(origin, text, &e));
    }
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    // re-serialize so schema errors still point at a line
    let merged = toml::to_string(&table).map_err(|e| ConfigError::Parse(format!("{origin}: {e}")))?;
    toml::from_str(&merged).map_err(|e| parse_error(&format!("{origin} (with overrides)"), &merged, &e))
}

/// Read, parse and validate a config file.
pub fn load(path: &Path, overrides: &[String]) -> std::result::Result<(SceneConfig, Vec<u8>), ConfigError> {
    let bytes = std::fs::read(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    let text = std::str::from_utf8(&bytes).map_err(|e| ConfigError::Parse(format!("{}: not UTF-8: {e}", path.display())))?;
    let config = parse_config(text, &path.display().to_string(), overrides)?;
    config.validate()?;
    Ok((config, bytes))
}

pub fn complex(z: Complex) -> C64 {
    C64::new(z[0], z[1])
}

pub fn matrix(rows: &ComplexMatrix, what: &str) -> Result<CMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Shape(format!("{what}: expected a square matrix of [re, im] pairs")));
    }
    CMatrix::from_rows(n, n, rows.iter().flatten().map(|&z| complex(z)).collect())
}

fn pol_matrix(rows: &ComplexMatrix, what: &str) -> Result<PolMatrix> {
    let m = matrix(rows, what)?;
    if m.shape() != (2, 2) {
        return Err(Error::Shape(format!("{what}: expected 2x2, got {:?}", m.shape())));
    }
    PolMatrix::new(m)
}

impl SceneConfig {
    /// Every check that can run without executing the mode.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if !(g.wavelength > 0.0) {
            return Err(Error::validation("geometry.wavelength", vec!["positivity".into()]));
        }
        self.source_polarizations()?;
        self.detector_projectors()?;
        self.emitter_tensor()?;
        self.detector_tensor()?;
        self.decay_channel()?;
        self.atom()?;
        let r = &self.run;
        if !(r.noise >= 0.0) || !r.noise.is_finite() {
            return Err(Error::validation("run.noise", vec!["nonnegativity".into()]));
        }
        if let Some(t) = r.threshold {
            if !(t > 0.0) {
                return Err(Error::validation("run.threshold", vec!["positivity".into()]));
            }
        }
        if let Some(bounds) = &r.bounds {
            let bad: Vec<String> = bounds
                .iter()
                .enumerate()
                .filter(|(_, b)| !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1]))
                .map(|(i, _)| format!("bounds[{i}] ordering"))
                .collect();
            if !bad.is_empty() {
                return Err(Error::validation("run.bounds", bad));
            }
        }
        match r.mode {
            Mode::Rate | Mode::Scan | Mode::Witness => {
                self.scene()?;
            }
            Mode::Fit => {
                if r.model.is_none() {
                    return Err(Error::validation("run", vec!["model required in fit mode".into()]));
                }
                if r.truth.is_none() && r.observations.is_none() {
                    return Err(Error::validation("run", vec!["truth or observations required in fit mode".into()]));
                }
            }
            Mode::Variant => {
                if r.variant.is_none() {
                    return Err(Error::validation("run", vec!["variant required in variant mode".into()]));
                }
            }
            Mode::Procedure => {}
        }
        if matches!(r.mode, Mode::Scan | Mode::Witness) {
            self.scan_spec()?.baselines()?;
        }
        Ok(())
    }

    pub fn source_polarizations(&self) -> Result<Option<Vec<PolMatrix>>> {
        let s = &self.sources;
        if s.polarization.is_some() && s.states.is_some() {
            return Err(Error::validation("sources", vec!["polarization and states are exclusive".into()]));
        }
        if let Some(list) = &s.polarization {
            return list
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let what = format!("sources.polarization[{i}]");
                    let p = pol_matrix(m, &what)?;
                    p.check_density(&what)?;
                    Ok(p)
                })
                .collect::<Result<Vec<_>>>()
                .map(Some);
        }
        if let Some(list) = &s.states {
            return list
                .iter()
                .enumerate()
                .map(|(i, k)| {
                    let ket = [complex(k[0]), complex(k[1])];
                    let n = ket[0].norm_sqr() + ket[1].norm_sqr();
                    if (n - 1.0).abs() > DENSITY_TOL {
                        return Err(Error::validation(format!("sources.states[{i}]"), vec![format!("normalization (norm^2 = {n})")]));
                    }
                    Ok(PolMatrix::pure(ket))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some);
        }
        Ok(None)
    }

    pub fn detector_projectors(&self) -> Result<Option<Vec<PolMatrix>>> {
        self.detectors
            .projectors
            .as_ref()
            .map(|list| {
                list.iter()
                    .enumerate()
                    .map(|(i, m)| {
                        let what = format!("detectors.projectors[{i}]");
                        let p = pol_matrix(m, &what)?;
                        p.check_projector(&what)?;
                        Ok(p)
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn emitter_tensor(&self) -> Result<Option<Tensor4>> {
        let Some(rows) = &self.sources.entangled else { return Ok(None) };
        let m = matrix(rows, "sources.entangled")?;
        if m.shape() != (4, 4) {
            return Err(Error::Shape(format!("sources.entangled: expected 4x4, got {:?}", m.shape())));
        }
        let report = validate_density(&m, DENSITY_TOL)?;
        let failures = report.failures(DENSITY_TOL);
        if !failures.is_empty() {
            return Err(Error::validation("sources.entangled", failures));
        }
        Tensor4::from_joint_matrix(&m, 2, 2).map(Some)
    }

    pub fn detector_tensor(&self) -> Result<Option<Tensor4>> {
        let Some(rows) = &self.detectors.system else { return Ok(None) };
        let m = matrix(rows, "detectors.system")?;
        if m.shape() != (4, 4) {
            return Err(Error::Shape(format!("detectors.system: expected 4x4, got {:?}", m.shape())));
        }
        let deficit = m.hermiticity_deficit();
        if deficit > 1e-12 {
            return Err(Error::validation("detectors.system", vec![format!("hermiticity (deficit {deficit:e})")]));
        }
        Tensor4::from_joint_matrix(&m, 2, 2).map(Some)
    }

    pub fn decay_channel(&self) -> Result<Option<DecayChannel>> {
        self.sources
            .decay
            .as_ref()
            .map(|d| DecayChannel::new(complex(d.dd), complex(d.ee)))
            .transpose()
    }

    pub fn atom(&self) -> Result<Option<ThreeLevelAtom>> {
        self.sources
            .atom
            .as_ref()
            .map(|a| ThreeLevelAtom::new(complex(a.alpha), complex(a.beta), complex(a.coupling_02), complex(a.coupling_12)))
            .transpose()
    }

    pub fn mixed_amplitudes(&self) -> Option<MixedAmplitudes> {
        self.detectors
            .amplitudes
            .as_ref()
            .map(|a| MixedAmplitudes::new(complex(a.s1a), complex(a.d2b), complex(a.d2a), complex(a.s1b)))
    }

    fn emitters(&self) -> Result<Vec<Emitter>> {
        let g = &self.geometry;
        let mut emitters = match &g.extended {
            Some(e) => {
                if !g.emitters.is_empty() {
                    return Err(Error::validation("geometry", vec!["emitters and extended are exclusive".into()]));
                }
                extended_source(e.center, e.axis, e.width, e.count, g.wavelength)?
            }
            None => g.emitters.iter().map(|&p| Emitter::photon(p, g.wavelength)).collect(),
        };
        let s = &self.sources;
        if !s.species.is_empty() {
            if s.species.len() != emitters.len() {
                return Err(Error::Scene(format!("{} species for {} emitters", s.species.len(), emitters.len())));
            }
            for (e, &sp) in emitters.iter_mut().zip(&s.species) {
                e.species = sp;
            }
        }
        if let Some(pols) = self.source_polarizations()? {
            if pols.len() != emitters.len() {
                return Err(Error::Scene(format!("{} polarizations for {} emitters", pols.len(), emitters.len())));
            }
            for (e, p) in emitters.iter_mut().zip(pols) {
                e.polarization = Some(p);
            }
        }
        Ok(emitters)
    }

    fn detector_list(&self) -> Result<Vec<Detector>> {
        let mut detectors: Vec<Detector> = self.geometry.detectors.iter().map(|&p| Detector::at(p)).collect();
        if let Some(projectors) = self.detector_projectors()? {
            if projectors.len() != detectors.len() {
                return Err(Error::Scene(format!("{} projectors for {} detectors", projectors.len(), detectors.len())));
            }
            for (d, p) in detectors.iter_mut().zip(projectors) {
                d.projector = Some(p);
            }
        }
        if let Some(accepts) = &self.detectors.accepts {
            if accepts.len() != detectors.len() {
                return Err(Error::Scene(format!("{} accept lists for {} detectors", accepts.len(), detectors.len())));
            }
            for (d, a) in detectors.iter_mut().zip(accepts) {
                d.accepts = a.clone();
            }
        }
        Ok(detectors)
    }

    /// The optical scene described by `geometry`, `sources` and `detectors`.
    pub fn scene(&self) -> Result<OpticalScene> {
        let mut scene = OpticalScene::new(self.emitters()?, self.detector_list()?)?
            .with_model(self.geometry.model.into())
            .with_phase_noise(self.sources.phase_noise)
            .with_seed(self.run.seed);
        if let Some(phases) = &self.sources.emission_phases {
            scene = scene.with_emission_phases(phases)?;
        }
        Ok(scene)
    }

    pub fn scan_spec(&self) -> Result<ScanSpec> {
        let r = &self.run;
        let missing: Vec<String> = [("from", r.from.is_none()), ("to", r.to.is_none()), ("steps", r.steps.is_none())]
            .iter()
            .filter(|(_, m)| *m)
            .map(|(n, _)| format!("{n} required"))
            .collect();
        if !missing.is_empty() {
            return Err(Error::validation("run", missing));
        }
        Ok(ScanSpec { axis: r.axis, from: r.from.unwrap_or(0.0), to: r.to.unwrap_or(0.0), steps: r.steps.unwrap_or(0) })
    }
}
