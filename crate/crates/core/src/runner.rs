//! Mode dispatch and output files for a parsed config.
//!
//! A run writes `record.json` plus, for modes that produce curves, one CSV.
//! Floats in CSV use 17 significant digits and JSON uses shortest round-trip
//! text, so identical inputs give identical bytes.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::amplitude::{matmul, tensor_product, CMatrix, Tensor4};
use crate::config::{self, complex, ConfigError, FitModelName, Mode, ProcedureName, SceneConfig, VariantName};
use crate::entanglement::{general_coefficients, GeneralRateInput, general_curve, witness_factorization, WitnessProblem, WitnessVerdict, DEFAULT_WITNESS_THRESHOLD};
use crate::error::{Error, Result};
use crate::estimation::{fit_model, FitOptions, FitResult, ForwardModel, ParamSpec, DEFAULT_STARTS};
use crate::hbt::{pairwise_rate, phase_noise_envelope, scan_with, PhaseNoiseStats, Propagators, RateResult};
use crate::polarization::{linked_polarization_map, scene_pol_rate, PolMatrix};
use crate::procedures::{
    decay_interference_rate, decay_phase_from_sweep, mz_no_recombine_rate, phase_sweep, procedure1_pair, procedure1_rate,
    procedure2_rate, spatial_swap_rate, swap_operator, wavelength_interference_rate, MixedAmplitudes,
};
use crate::scene::OpticalScene;

pub const RECORD_FILE: &str = "record.json";
pub const SCAN_HEADER: [&str; 4] = ["baseline", "total", "direct", "crossed"];

/// Env var capping the engine thread pool.
pub const THREADS_ENV: &str = "E2I2_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub artifact: String,
    pub version: String,
    /// SHA-256 of the config bytes followed by each override.
    pub config_digest: String,
    pub mode: Mode,
    pub seed: u64,
    pub outputs: Outputs,
    /// Files written next to the record.
    pub files: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Outputs {
    Rate(RateOutput),
    Scan(ScanOutput),
    Fit(FitOutput),
    Witness(WitnessOutput),
    Procedure(ProcedureOutput),
    Variant(VariantOutput),
}

/// Which rate formula a scene selects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formula {
    /// Scalar rate summed over emitter pairs.
    Scalar,
    Polarized,
    General,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateOutput {
    pub formula: Formula,
    pub direct: f64,
    pub crossed: f64,
    pub total: f64,
    pub crossed_over_direct: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visibility: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_noise: Option<PhaseNoiseStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOutput {
    pub formula: Formula,
    pub steps: usize,
    pub visibility: f64,
    pub max_coherence: f64,
    pub fringe_spacing: Option<f64>,
    pub max_total: f64,
    pub min_total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub model: String,
    pub result: FitResult,
    /// Residual RMS over the RMS of the observations.
    pub relative_rms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<f64>>,
    /// `|fitted / truth - 1|` per parameter, when the truth is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_errors: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessOutput {
    pub threshold: f64,
    pub points: usize,
    pub verdict: WitnessVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcedureOutput {
    pub selected: ProcedureName,
    pub rate: f64,
    pub procedure1: f64,
    pub procedure2: f64,
    pub spatial_swap: f64,
    pub symmetric: f64,
    pub antisymmetric: f64,
    pub amplitudes: [C64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum VariantOutput {
    Wavelength { rate: f64, sweep_visibility: f64 },
    Decay { rate: f64, injected_phase: f64, recovered_phase: f64, phase_error: f64, sweep_visibility: f64 },
    MachZehnder { rate: f64, sweep_visibility: f64, peak_phase: Option<f64> },
    SwapOperator { matrix: Vec<Vec<C64>>, unitarity_deviation: f64, involution_deviation: f64 },
    LinkedPolarization { members: usize, cross_polarization: C64, max_entry: (usize, usize, C64) },
}

/// A CSV produced by a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn to_csv(&self) -> std::result::Result<Vec<u8>, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| format_float(*x)))?;
        }
        w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
    }
}

/// Decimal text with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Size the global rayon pool from the environment. Only the first call has an effect.
pub fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

pub fn config_digest(bytes: &[u8], overrides: &[String]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    for o in overrides {
        h.update([0u8]);
        h.update(o.as_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub overrides: Vec<String>,
    /// Record wall time; makes the record non-reproducible.
    pub timing: bool,
}

/// Load, execute and write a run. The error carries the exit status.
pub fn run(config_path: &Path, out_dir: &Path, options: &RunOptions) -> std::result::Result<RunRecord, ConfigError> {
    let start = Instant::now();
    let (config, bytes) = config::load(config_path, &options.overrides)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let digest = config_digest(&bytes, &options.overrides);
    let (mut record, tables) = execute(&config, base, digest)?;
    if options.timing {
        record.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    write_outputs(out_dir, &record, &tables)?;
    Ok(record)
}

fn io_error(path: &Path, source: std::io::Error) -> ConfigError {
    ConfigError::Io { path: path.display().to_string(), source }
}

pub fn write_outputs(out_dir: &Path, record: &RunRecord, tables: &[Table]) -> std::result::Result<(), ConfigError> {
    std::fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    for t in tables {
        let path = out_dir.join(&t.name);
        let bytes = t.to_csv().map_err(|e| io_error(&path, std::io::Error::other(e)))?;
        std::fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
    }
    let path = out_dir.join(RECORD_FILE);
    let mut json = serde_json::to_vec_pretty(record).map_err(|e| io_error(&path, std::io::Error::other(e)))?;
    json.push(b'\n');
    std::fs::write(&path, json).map_err(|e| io_error(&path, e))
}

/// Run a validated config without touching the filesystem, except for an
/// observations CSV resolved against `base`.
pub fn execute(config: &SceneConfig, base: &Path, digest: String) -> Result<(RunRecord, Vec<Table>)> {
    let (outputs, tables) = match config.run.mode {
        Mode::Rate => (Outputs::Rate(rate_mode(config)?), Vec::new()),
        Mode::Scan => {
            let (o, t) = scan_mode(config)?;
            (Outputs::Scan(o), vec![t])
        }
        Mode::Fit => {
            let (o, t) = fit_mode(config, base)?;
            (Outputs::Fit(o), vec![t])
        }
        Mode::Witness => {
            let (o, t) = witness_mode(config)?;
            (Outputs::Witness(o), vec![t])
        }
        Mode::Procedure => (Outputs::Procedure(procedure_mode(config)?), Vec::new()),
        Mode::Variant => {
            let (o, t) = variant_mode(config)?;
            (Outputs::Variant(o), t.into_iter().collect())
        }
    };
    let record = RunRecord {
        artifact: "e2i2".into(),
        version: crate::VERSION.into(),
        config_digest: digest,
        mode: config.run.mode,
        seed: config.run.seed,
        outputs,
        files: tables.iter().map(|t| t.name.clone()).collect(),
        wall_time_s: None,
    };
    Ok((record, tables))
}

fn formula(config: &SceneConfig) -> Formula {
    if config.sources.entangled.is_some() || config.detectors.system.is_some() {
        Formula::General
    } else if config.sources.polarization.is_some() || config.sources.states.is_some() || config.detectors.projectors.is_some() {
        Formula::Polarized
    } else {
        Formula::Scalar
    }
}

/// Detector and emitter tensors for the general formula. Missing pieces fall
/// back to products of the per-party matrices.
fn tensors(config: &SceneConfig) -> Result<(Tensor4, Tensor4)> {
    let detector = match config.detector_tensor()? {
        Some(t) => t,
        None => match config.detector_projectors()? {
            Some(p) if p.len() == 2 => tensor_product(p[0].matrix(), p[1].matrix())?,
            _ => Tensor4::identity(2, 2)?,
        },
    };
    let emitter = match config.emitter_tensor()? {
        Some(t) => t,
        None => match config.source_polarizations()? {
            Some(p) if p.len() == 2 => tensor_product(p[0].matrix(), p[1].matrix())?,
            _ => {
                let u = PolMatrix::unpolarized();
                tensor_product(u.matrix(), u.matrix())?
            }
        },
    };
    Ok((detector, emitter))
}

fn general_rate_at(scene: &OpticalScene, detector: &Tensor4, emitter: &Tensor4) -> Result<RateResult> {
    let k = general_coefficients(detector, emitter)?;
    let p = Propagators::from_scene(scene)?;
    let x = p.interference();
    let direct = k.first * p.first_process() + k.second * p.second_process();
    let crossed = k.crossed * x + k.crossed_conj * x.conj();
    Ok(RateResult::new(direct.re, crossed.re))
}

/// Rate of a scene with its detectors at a given placement.
pub type RateFn = Box<dyn Fn(&OpticalScene) -> Result<RateResult> + Sync>;

/// The rate formula a config selects, as a function of scene placement.
pub fn rate_fn(config: &SceneConfig) -> Result<(Formula, RateFn)> {
    let f = formula(config);
    let g: RateFn = match f {
        Formula::Scalar => Box::new(pairwise_rate),
        Formula::Polarized => Box::new(|s: &OpticalScene| scene_pol_rate(s).map(|r| r.rate())),
        Formula::General => {
            let (detector, emitter) = tensors(config)?;
            let one = C64::new(1.0, 0.0);
            GeneralRateInput { detector: detector.clone(), emitter: emitter.clone(), propagators: Propagators::new(one, one, one, one) }
                .validate()?;
            Box::new(move |s: &OpticalScene| general_rate_at(s, &detector, &emitter))
        }
    };
    Ok((f, g))
}

fn rate_mode(config: &SceneConfig) -> Result<RateOutput> {
    let scene = config.scene()?;
    let (formula, f) = rate_fn(config)?;
    let r = f(&scene)?;
    let visibility = match formula {
        Formula::Polarized => Some(scene_pol_rate(&scene)?.visibility),
        _ => None,
    };
    let phase_noise = if scene.phase_noise() && config.run.realizations > 0 {
        Some(phase_noise_envelope(&scene, config.run.realizations)?)
    } else {
        None
    };
    Ok(RateOutput {
        formula,
        direct: r.direct,
        crossed: r.crossed,
        total: r.total,
        crossed_over_direct: if r.direct != 0.0 { r.crossed / r.direct } else { 0.0 },
        visibility,
        phase_noise,
    })
}

fn scan_mode(config: &SceneConfig) -> Result<(ScanOutput, Table)> {
    let scene = config.scene()?;
    let spec = config.scan_spec()?;
    let (formula, f) = rate_fn(config)?;
    let curve = scan_with(&scene, &spec, f)?;
    let mut table = Table::new("scan.csv", &SCAN_HEADER);
    for k in 0..curve.baselines.len() {
        table.rows.push(vec![curve.baselines[k], curve.totals[k], curve.direct[k], curve.crossed[k]]);
    }
    let output = ScanOutput {
        formula,
        steps: curve.baselines.len(),
        visibility: curve.visibility,
        max_coherence: curve.max_coherence,
        fringe_spacing: curve.fringe_spacing,
        max_total: curve.totals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min_total: curve.totals.iter().copied().fold(f64::INFINITY, f64::min),
    };
    Ok((output, table))
}

fn forward_model(config: &SceneConfig, name: FitModelName) -> Result<ForwardModel> {
    let g = &config.geometry;
    let r = &config.run;
    let distance = || {
        r.distance.unwrap_or_else(|| {
            if let Some(e) = &g.extended {
                e.center[2].abs()
            } else if g.emitters.is_empty() {
                1.0
            } else {
                g.emitters.iter().map(|p| p[2].abs()).sum::<f64>() / g.emitters.len() as f64
            }
        })
    };
    Ok(match name {
        FitModelName::HbtTwoPoint => ForwardModel::HbtTwoPoint { wavelength: g.wavelength, distance: distance(), model: g.model.into() },
        FitModelName::HbtExtended => ForwardModel::HbtExtended {
            wavelength: g.wavelength,
            distance: distance(),
            count: r.count.or(g.extended.as_ref().map(|e| e.count)).unwrap_or(16),
        },
        FitModelName::DecayPhase => {
            let d = config
                .sources
                .decay
                .as_ref()
                .ok_or_else(|| Error::validation("sources", vec!["decay required by the decay-phase model".into()]))?;
            ForwardModel::DecayPhase {
                modulus_dd: complex(d.dd).norm(),
                modulus_ee: complex(d.ee).norm(),
                d1a: complex(d.d1a),
                s1b: complex(d.s1b),
            }
        }
    })
}

fn read_observations(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    reader
        .records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
            let field = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("{} row {}: expected two numbers", path.display(), i + 1)))
            };
            Ok((field(0)?, field(1)?))
        })
        .collect()
}

fn fit_controls(config: &SceneConfig, name: FitModelName) -> Result<Vec<f64>> {
    let r = &config.run;
    match (name, r.from, r.to, r.steps) {
        (FitModelName::DecayPhase, None, None, None) => {
            Ok((0..r.sweep_steps).map(|k| TAU * k as f64 / r.sweep_steps as f64).collect())
        }
        _ => config.scan_spec()?.baselines(),
    }
}

fn fit_mode(config: &SceneConfig, base: &Path) -> Result<(FitOutput, Table)> {
    let r = &config.run;
    let name = r.model.ok_or_else(|| Error::validation("run", vec!["model required in fit mode".into()]))?;
    let model = forward_model(config, name)?;
    let defaults = model.default_params();
    let bounds: Vec<ParamSpec> = match &r.bounds {
        Some(b) => {
            if b.len() != defaults.len() {
                return Err(Error::validation("run.bounds", vec![format!("{} bounds for {} parameters", b.len(), defaults.len())]));
            }
            defaults.iter().zip(b).map(|(d, b)| ParamSpec::new(&d.name, b[0], b[1])).collect()
        }
        None => defaults,
    };
    let observations = match (&r.observations, &r.truth) {
        (Some(path), _) => {
            let path: PathBuf = if path.is_absolute() { path.clone() } else { base.join(path) };
            read_observations(&path)?
        }
        (None, Some(truth)) => {
            if truth.len() != bounds.len() {
                return Err(Error::validation("run.truth", vec![format!("{} values for {} parameters", truth.len(), bounds.len())]));
            }
            model.simulate(truth, r.amplitude, &fit_controls(config, name)?, r.noise, r.seed)?
        }
        (None, None) => return Err(Error::validation("run", vec!["truth or observations required in fit mode".into()])),
    };
    let options = FitOptions { starts: r.starts.unwrap_or(DEFAULT_STARTS), ..FitOptions::default() };
    let detail = fit_model(&model, &observations, &bounds, &options, r.seed)?;
    let controls: Vec<f64> = observations.iter().map(|o| o.0).collect();
    let amplitude = detail.result.parameters.get("amplitude").copied().unwrap_or(1.0);
    let fitted = model.evaluate(&detail.raw, &controls)?;
    let mut table = Table::new("fit.csv", &["control", "observed", "fitted"]);
    for (o, y) in observations.iter().zip(&fitted) {
        table.rows.push(vec![o.0, o.1, amplitude * y]);
    }
    let relative_errors = r.truth.as_ref().filter(|_| r.observations.is_none()).map(|t| {
        t.iter()
            .zip(&detail.raw)
            .map(|(t, f)| if *t != 0.0 { (f / t - 1.0).abs() } else { (f - t).abs() })
            .collect()
    });
    let output = FitOutput {
        model: model.name().to_string(),
        result: detail.result,
        relative_rms: detail.relative_rms,
        truth: r.truth.clone().filter(|_| r.observations.is_none()),
        relative_errors,
    };
    Ok((output, table))
}

fn witness_mode(config: &SceneConfig) -> Result<(WitnessOutput, Table)> {
    let r = &config.run;
    let scene = config.scene()?;
    let scan = config.scan_spec()?;
    let (detector, emitter) = tensors(config)?;
    let curve = general_curve(&scene, &scan, &detector, &emitter)?;
    let peak = curve.iter().fold(0.0_f64, |m, c| m.max(c.1.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let totals: Vec<f64> = curve
        .iter()
        .map(|&(_, y)| if r.noise > 0.0 { y + r.noise * peak * normal.sample(&mut rng) } else { y })
        .collect();
    let threshold = r.threshold.unwrap_or(DEFAULT_WITNESS_THRESHOLD);
    let problem = WitnessProblem {
        scene,
        scan,
        totals: totals.clone(),
        detector,
        marginals: None,
        threshold,
        true_emitter: Some(emitter),
        starts: r.starts.unwrap_or(DEFAULT_STARTS),
    };
    let verdict = witness_factorization(&problem, r.seed)?;
    let mut table = Table::new("witness.csv", &["baseline", "total"]);
    for (c, t) in curve.iter().zip(&totals) {
        table.rows.push(vec![c.0, *t]);
    }
    Ok((WitnessOutput { threshold, points: totals.len(), verdict }, table))
}

/// Scene-derived amplitudes: emitter 0 reaches the detectors through `S`,
/// emitter 1 through `D`.
fn scene_amplitudes(config: &SceneConfig) -> Result<MixedAmplitudes> {
    let scene = config.scene()?;
    if scene.emitters().len() != 2 || scene.detectors().len() != 2 {
        return Err(Error::Scene("procedure amplitudes need 2 emitters and 2 detectors".into()));
    }
    let p = |i, j| scene.propagator(i, j).map(|p| p.value);
    Ok(MixedAmplitudes::new(p(0, 0)?, p(1, 1)?, p(1, 0)?, p(0, 1)?))
}

fn procedure_mode(config: &SceneConfig) -> Result<ProcedureOutput> {
    let a = match config.mixed_amplitudes() {
        Some(a) => a,
        None => scene_amplitudes(config)?,
    };
    let (symmetric, antisymmetric) = procedure1_pair(&a);
    let procedure1 = procedure1_rate(&a);
    let procedure2 = procedure2_rate(&a);
    let spatial_swap = spatial_swap_rate(&a);
    let selected = config.detectors.procedure.unwrap_or(ProcedureName::All);
    let rate = match selected {
        ProcedureName::Procedure1 | ProcedureName::All => procedure1,
        ProcedureName::Procedure2 => procedure2,
        ProcedureName::SpatialSwap => spatial_swap,
    };
    Ok(ProcedureOutput {
        selected,
        rate,
        procedure1,
        procedure2,
        spatial_swap,
        symmetric,
        antisymmetric,
        amplitudes: [a.s1a, a.d2b, a.d2a, a.s1b],
    })
}

fn sweep_table(phases: &[f64], rates: &[f64]) -> Table {
    let mut t = Table::new("sweep.csv", &["phase", "rate"]);
    t.rows = phases.iter().zip(rates).map(|(p, r)| vec![*p, *r]).collect();
    t
}

/// Two amplitudes from emitter `i0`/`i1` to detector `j0`/`j1`, or unit
/// amplitudes when the config has no geometry.
fn path_pair(config: &SceneConfig, first: (usize, usize), second: (usize, usize)) -> Result<(C64, C64)> {
    if config.geometry.emitters.is_empty() && config.geometry.extended.is_none() {
        return Ok((C64::new(1.0, 0.0), C64::new(1.0, 0.0)));
    }
    let scene = config.scene()?;
    Ok((scene.propagator(first.0, first.1)?.value, scene.propagator(second.0, second.1)?.value))
}

fn max_identity_deviation(m: &CMatrix) -> Result<f64> {
    Ok(m.sub(&CMatrix::identity(m.rows())?)?.max_abs())
}

fn variant_mode(config: &SceneConfig) -> Result<(VariantOutput, Option<Table>)> {
    let variant = config
        .run
        .variant
        .ok_or_else(|| Error::validation("run", vec!["variant required in variant mode".into()]))?;
    let steps = config.run.sweep_steps;
    Ok(match variant {
        VariantName::Wavelength => {
            let atom = config
                .atom()?
                .ok_or_else(|| Error::validation("sources", vec!["atom required by the wavelength variant".into()]))?;
            let (p1, p2) = path_pair(config, (0, 0), (1, 0))?;
            let sweep = phase_sweep(steps, |t| wavelength_interference_rate(&atom, p1, p2 * C64::from_polar(1.0, t)))?;
            let rate = wavelength_interference_rate(&atom, p1, p2);
            (VariantOutput::Wavelength { rate, sweep_visibility: sweep.visibility }, Some(sweep_table(&sweep.phases, &sweep.rates)))
        }
        VariantName::Decay => {
            let channel = config
                .decay_channel()?
                .ok_or_else(|| Error::validation("sources", vec!["decay required by the decay variant".into()]))?;
            let d = config.sources.decay.as_ref().expect("decay present");
            let (d1a, s1b) = (complex(d.d1a), complex(d.s1b));
            let rate = decay_interference_rate(&channel, d1a, s1b);
            let (sweep, recovered) = decay_phase_from_sweep(&channel, d1a, s1b, steps)?;
            let injected = channel.relative_phase();
            let err = crate::procedures::wrap_phase(recovered - injected).abs();
            (
                VariantOutput::Decay {
                    rate,
                    injected_phase: injected,
                    recovered_phase: recovered,
                    phase_error: err,
                    sweep_visibility: sweep.visibility,
                },
                Some(sweep_table(&sweep.phases, &sweep.rates)),
            )
        }
        VariantName::MachZehnder => {
            let (d1a, d1b) = path_pair(config, (0, 0), (0, 1))?;
            let rate = mz_no_recombine_rate(d1a, d1b);
            let sweep = phase_sweep(steps, |t| mz_no_recombine_rate(d1a, d1b * C64::from_polar(1.0, t)))?;
            (
                VariantOutput::MachZehnder { rate, sweep_visibility: sweep.visibility, peak_phase: sweep.peak_phase },
                Some(sweep_table(&sweep.phases, &sweep.rates)),
            )
        }
        VariantName::SwapOperator => {
            let s = swap_operator();
            let unitarity = max_identity_deviation(&matmul(&s.adjoint(), &s)?)?;
            let involution = max_identity_deviation(&matmul(&s, &s)?)?;
            let matrix = (0..s.rows()).map(|i| (0..s.cols()).map(|j| s[(i, j)]).collect()).collect();
            (VariantOutput::SwapOperator { matrix, unitarity_deviation: unitarity, involution_deviation: involution }, None)
        }
        VariantName::LinkedPolarization => {
            let pols = config
                .source_polarizations()?
                .filter(|p| p.len() == 2)
                .ok_or_else(|| Error::validation("sources", vec!["two polarizations required by the linked-polarization variant".into()]))?;
            let family = config.run.family.unwrap_or_default();
            let map = linked_polarization_map(&pols[0], &pols[1], &family)?;
            let mut table = Table::new("linked.csv", &["theta_a", "phi_a", "theta_b", "phi_b", "re", "im"]);
            for (i, a) in map.projectors.iter().enumerate() {
                for (j, b) in map.projectors.iter().enumerate() {
                    let v = map.values[i][j];
                    table.rows.push(vec![a.theta, a.phi, b.theta, b.phi, v.re, v.im]);
                }
            }
            (
                VariantOutput::LinkedPolarization {
                    members: map.projectors.len(),
                    cross_polarization: map.cross_polarization,
                    max_entry: map.max_entry(),
                },
                Some(table),
            )
        }
    })
}

/// Outcome of `validate`: the config parsed and passed every check.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub mode: Mode,
    pub emitters: usize,
    pub detectors: usize,
    pub checks: Vec<String>,
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "config ok: mode {}, {} emitters, {} detectors", self.mode.as_str(), self.emitters, self.detectors)?;
        for c in &self.checks {
            writeln!(f, "  ok  {c}")?;
        }
        Ok(())
    }
}

/// Parse and check a config without running it.
pub fn validate(config_path: &Path, overrides: &[String]) -> std::result::Result<ValidationReport, ConfigError> {
    let (config, _) = config::load(config_path, overrides)?;
    let mut checks = vec!["schema".to_string()];
    if config.sources.polarization.is_some() || config.sources.states.is_some() {
        checks.push("source polarizations: hermiticity, positivity, trace".into());
    }
    if config.detectors.projectors.is_some() {
        checks.push("detector projectors: hermiticity, idempotency, rank".into());
    }
    if config.sources.entangled.is_some() {
        checks.push("emitter tensor: hermiticity, positivity, trace".into());
    }
    if config.detectors.system.is_some() {
        checks.push("detector tensor: hermiticity".into());
    }
    if config.sources.decay.is_some() {
        checks.push("decay channel: branching".into());
    }
    if config.sources.atom.is_some() {
        checks.push("atom: normalization".into());
    }
    let (emitters, detectors) = match config.scene() {
        Ok(s) => {
            checks.push("scene geometry".into());
            (s.emitters().len(), s.detectors().len())
        }
        Err(_) => (0, 0),
    };
    Ok(ValidationReport { mode: config.run.mode, emitters, detectors, checks })
}
