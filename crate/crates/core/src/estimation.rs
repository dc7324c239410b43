//! Recovering source parameters from rate curves.
//!
//! Each forward model predicts a curve shape up to an overall scale, since
//! rates are unnormalized. The scale is eliminated in closed form at every
//! evaluation (it enters linearly) and reported as the `amplitude` parameter;
//! the remaining parameters are fitted by a box-bounded Levenberg-Marquardt
//! iteration with a central-difference Jacobian, restarted from a
//! seed-shifted Halton sequence.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude::Tensor4;
use crate::entanglement::{general_coefficients, product_emitter, witness_params};
use crate::error::{Error, Result};
use crate::hbt::{extended_source, hbt_rate, pairwise_rate, place_detectors, Propagators};
use crate::procedures::{decay_interference_rate, DecayChannel};
use crate::scene::{Detector, Emitter, OpticalScene, PropagatorModel, Vec3};

pub const DEFAULT_STARTS: usize = 16;
/// Relative step of the central-difference Jacobian.
const JACOBIAN_STEP: f64 = 1e-6;
/// Convergence threshold on the range-scaled projected gradient.
pub const GRADIENT_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl ParamSpec {
    pub fn new(name: &str, lo: f64, hi: f64) -> Self {
        Self { name: name.to_string(), lo, hi }
    }

    fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Clone, Debug)]
pub enum ForwardModel {
    /// Two point sources at `(+-d/2, 0, L)` along x; the control is the
    /// detector baseline along x at `z = 0`. Parameter: `separation_ratio = d / L`.
    HbtTwoPoint { wavelength: f64, distance: f64, model: PropagatorModel },
    /// Uniform line of `count` incoherent emitters of width `w` at distance `L`.
    /// Parameter: `width_ratio = w / L`.
    HbtExtended { wavelength: f64, distance: f64, count: usize },
    /// Decay interference against a phase plate on `S1B`; the control is the
    /// plate phase. Branching moduli are known. Parameter: `relative_phase`.
    DecayPhase { modulus_dd: f64, modulus_ee: f64, d1a: C64, s1b: C64 },
    /// Product emitter tensor behind a fixed detector tensor; the control is
    /// the detector baseline along `axis`. Parameters: six Bloch angles.
    FactorizedWitness { scene: OpticalScene, axis: Vec3, detector: Tensor4 },
}

impl ForwardModel {
    pub fn name(&self) -> &'static str {
        match self {
            ForwardModel::HbtTwoPoint { .. } => "hbt-two-point",
            ForwardModel::HbtExtended { .. } => "hbt-extended",
            ForwardModel::DecayPhase { .. } => "decay-phase",
            ForwardModel::FactorizedWitness { .. } => "factorized-witness",
        }
    }

    pub fn default_params(&self) -> Vec<ParamSpec> {
        use std::f64::consts::PI;
        match self {
            ForwardModel::HbtTwoPoint { .. } => vec![ParamSpec::new("separation_ratio", 1e-4, 1e-2)],
            ForwardModel::HbtExtended { .. } => vec![ParamSpec::new("width_ratio", 1e-4, 1e-2)],
            ForwardModel::DecayPhase { .. } => vec![ParamSpec::new("relative_phase", -PI, PI)],
            ForwardModel::FactorizedWitness { .. } => witness_params(),
        }
    }

    /// Unit-scale prediction at each control value.
    pub fn evaluate(&self, params: &[f64], controls: &[f64]) -> Result<Vec<f64>> {
        match self {
            ForwardModel::HbtTwoPoint { wavelength, distance, model } => {
                let d = params[0] * distance;
                let base = OpticalScene::new(
                    vec![
                        Emitter::photon([-d / 2.0, 0.0, *distance], *wavelength),
                        Emitter::photon([d / 2.0, 0.0, *distance], *wavelength),
                    ],
                    vec![Detector::at([-1.0, 0.0, 0.0]), Detector::at([1.0, 0.0, 0.0])],
                )?
                .with_model(*model);
                controls
                    .iter()
                    .map(|&b| Ok(hbt_rate(&place_detectors(&base, &[1.0, 0.0, 0.0], b)?)?.total))
                    .collect()
            }
            ForwardModel::HbtExtended { wavelength, distance, count } => {
                let w = params[0] * distance;
                let emitters = extended_source([0.0, 0.0, *distance], [1.0, 0.0, 0.0], w, *count, *wavelength)?;
                let base = OpticalScene::new(emitters, vec![Detector::at([-1.0, 0.0, 0.0]), Detector::at([1.0, 0.0, 0.0])])?;
                controls
                    .iter()
                    .map(|&b| Ok(pairwise_rate(&place_detectors(&base, &[1.0, 0.0, 0.0], b)?)?.total))
                    .collect()
            }
            ForwardModel::DecayPhase { modulus_dd, modulus_ee, d1a, s1b } => {
                let channel = DecayChannel {
                    amplitude_dd: C64::new(*modulus_dd, 0.0),
                    amplitude_ee: C64::from_polar(*modulus_ee, params[0]),
                };
                Ok(controls
                    .iter()
                    .map(|&t| decay_interference_rate(&channel, *d1a, s1b * C64::from_polar(1.0, t)))
                    .collect())
            }
            ForwardModel::FactorizedWitness { scene, axis, detector } => {
                let k = general_coefficients(detector, &product_emitter(params))?;
                let n = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
                let axis = axis.map(|x| x / n);
                controls
                    .iter()
                    .map(|&b| {
                        let p = Propagators::from_scene(&place_detectors(scene, &axis, b)?)?;
                        let x = p.interference();
                        let t = k.first * p.first_process()
                            + k.second * p.second_process()
                            + k.crossed * x
                            + k.crossed_conj * x.conj();
                        Ok(t.re)
                    })
                    .collect()
            }
        }
    }

    /// Synthetic observations: `amplitude * model + N(0, (noise * peak)^2)`.
    pub fn simulate(&self, params: &[f64], amplitude: f64, controls: &[f64], noise: f64, seed: u64) -> Result<Vec<(f64, f64)>> {
        let clean = self.evaluate(params, controls)?;
        let peak = clean.iter().fold(0.0_f64, |m, y| m.max(y.abs())) * amplitude.abs();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        Ok(controls
            .iter()
            .zip(clean)
            .map(|(&x, y)| {
                let eps = if noise > 0.0 { noise * peak * normal.sample(&mut rng) } else { 0.0 };
                (x, amplitude * y + eps)
            })
            .collect())
    }
}

#[derive(Clone, Debug)]
pub struct FitProblem {
    pub observations: Vec<(f64, f64)>,
    pub model: ForwardModel,
    pub parameter_bounds: Vec<ParamSpec>,
    pub noise_sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: BTreeMap<String, f64>,
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub starts: usize,
    pub max_iterations: usize,
    /// Replaces the first start point when given.
    pub initial: Option<Vec<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { starts: DEFAULT_STARTS, max_iterations: 300, initial: None }
    }
}

/// Fit outcome plus the raw parameter vector and the scale-free residual.
#[derive(Clone, Debug)]
pub struct FitDetail {
    pub result: FitResult,
    pub raw: Vec<f64>,
    /// `residual_rms / rms(observations)`.
    pub relative_rms: f64,
}

pub fn fit(problem: &FitProblem, seed: u64) -> Result<FitResult> {
    fit_with(problem, &FitOptions::default(), seed)
}

pub fn fit_with(problem: &FitProblem, options: &FitOptions, seed: u64) -> Result<FitResult> {
    if !(problem.noise_sigma >= 0.0) {
        return Err(Error::InvalidArgument("noise_sigma must be nonnegative".into()));
    }
    Ok(fit_model(&problem.model, &problem.observations, &problem.parameter_bounds, options, seed)?.result)
}

struct Objective<'a> {
    model: &'a ForwardModel,
    controls: Vec<f64>,
    /// Observations divided by their RMS.
    targets: Vec<f64>,
}

impl Objective<'_> {
    /// Residuals after eliminating the scale, and the scale itself.
    fn residuals(&self, p: &[f64]) -> Result<(Vec<f64>, f64)> {
        let m = self.model.evaluate(p, &self.controls)?;
        let mm: f64 = m.iter().map(|x| x * x).sum();
        let my: f64 = m.iter().zip(&self.targets).map(|(a, b)| a * b).sum();
        let scale = if mm > 0.0 { my / mm } else { 0.0 };
        let r = self.targets.iter().zip(&m).map(|(y, x)| y - scale * x).collect();
        Ok((r, scale))
    }

    fn cost(&self, p: &[f64]) -> Result<f64> {
        Ok(self.residuals(p)?.0.iter().map(|x| x * x).sum())
    }
}

struct StartOutcome {
    params: Vec<f64>,
    cost: f64,
    iterations: usize,
    converged: bool,
}

fn solve_spd(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    // Gaussian elimination with partial pivoting; systems here are <= 8x8.
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn jacobian(obj: &Objective, p: &[f64], bounds: &[ParamSpec]) -> Result<Vec<Vec<f64>>> {
    let mut cols = Vec::with_capacity(p.len());
    for j in 0..p.len() {
        let h = JACOBIAN_STEP * p[j].abs().max(bounds[j].width());
        let mut up = p.to_vec();
        let mut dn = p.to_vec();
        up[j] += h;
        dn[j] -= h;
        let (ru, _) = obj.residuals(&up)?;
        let (rd, _) = obj.residuals(&dn)?;
        cols.push(ru.iter().zip(&rd).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>());
    }
    Ok(cols)
}

/// Projected gradient of the cost, each component scaled by its parameter range.
fn scaled_gradient(grad: &[f64], p: &[f64], bounds: &[ParamSpec], n_obs: usize) -> f64 {
    grad.iter()
        .zip(p)
        .zip(bounds)
        .map(|((&g, &x), b)| {
            // descent direction is -g
            let blocked = (x <= b.lo && g > 0.0) || (x >= b.hi && g < 0.0);
            if blocked {
                0.0
            } else {
                (g * b.width()).abs() / n_obs as f64
            }
        })
        .fold(0.0, f64::max)
}

fn levenberg_marquardt(obj: &Objective, start: Vec<f64>, bounds: &[ParamSpec], max_iterations: usize) -> Result<StartOutcome> {
    let n_obs = obj.targets.len();
    let mut p: Vec<f64> = start.iter().zip(bounds).map(|(x, b)| b.clamp(*x)).collect();
    let (mut r, _) = obj.residuals(&p)?;
    let mut cost: f64 = r.iter().map(|x| x * x).sum();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iterations {
        iterations += 1;
        let cols = jacobian(obj, &p, bounds)?;
        let k = p.len();
        let jtj: Vec<Vec<f64>> = (0..k)
            .map(|a| (0..k).map(|b| cols[a].iter().zip(&cols[b]).map(|(x, y)| x * y).sum()).collect())
            .collect();
        // gradient of 0.5 * |r|^2
        let grad: Vec<f64> = cols.iter().map(|c| c.iter().zip(&r).map(|(x, y)| x * y).sum()).collect();
        if scaled_gradient(&grad, &p, bounds, n_obs) <= GRADIENT_TOL || cost <= 1e-28 * n_obs as f64 {
            converged = true;
            break;
        }
        let diag_floor = jtj.iter().enumerate().map(|(i, row)| row[i]).fold(0.0, f64::max) * 1e-12;
        let mut improved = false;
        let mut stalled = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..k {
                a[i][i] += lambda * a[i][i].max(diag_floor).max(1e-300);
            }
            let step = solve_spd(a, grad.iter().map(|g| -g).collect());
            if let Some(step) = step {
                let trial: Vec<f64> = p.iter().zip(&step).zip(bounds).map(|((x, s), b)| b.clamp(x + s)).collect();
                let (rt, _) = obj.residuals(&trial)?;
                let ct: f64 = rt.iter().map(|x| x * x).sum();
                if ct < cost {
                    let rel = (cost - ct) / cost.max(1e-300);
                    p = trial;
                    r = rt;
                    cost = ct;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    stalled = rel < 1e-15;
                    break;
                }
            }
            lambda *= 4.0;
        }
        if !improved || stalled {
            // No useful downhill step remains; judge by the gradient.
            let cols = jacobian(obj, &p, bounds)?;
            let grad: Vec<f64> = cols.iter().map(|c| c.iter().zip(&r).map(|(x, y)| x * y).sum()).collect();
            converged = scaled_gradient(&grad, &p, bounds, n_obs) <= GRADIENT_TOL;
            break;
        }
    }
    Ok(StartOutcome { params: p, cost, iterations, converged })
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut out = 0.0;
    while i > 0 {
        f /= base as f64;
        out += f * (i % base) as f64;
        i /= base;
    }
    out
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Start point `index` of the seed-shifted Halton sequence over the box.
pub fn start_point(index: usize, seed: u64, bounds: &[ParamSpec]) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    bounds
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let shift: f64 = rng.gen();
            let u = (radical_inverse(index as u64 + 1, PRIMES[j % PRIMES.len()]) + shift).fract();
            b.lo + u * b.width()
        })
        .collect()
}

pub fn fit_model(
    model: &ForwardModel,
    observations: &[(f64, f64)],
    bounds: &[ParamSpec],
    options: &FitOptions,
    seed: u64,
) -> Result<FitDetail> {
    let expected = model.default_params().len();
    if bounds.len() != expected {
        return Err(Error::InvalidArgument(format!(
            "{} model takes {expected} parameters, got bounds for {}",
            model.name(),
            bounds.len()
        )));
    }
    for b in bounds {
        if !(b.lo.is_finite() && b.hi.is_finite() && b.lo < b.hi) {
            return Err(Error::InvalidArgument(format!("parameter {}: bounds must be finite with lo < hi", b.name)));
        }
    }
    // free parameters plus the scale, plus one
    if observations.len() < bounds.len() + 2 {
        return Err(Error::InvalidArgument(format!(
            "{} observations cannot constrain {} parameters and a scale",
            observations.len(),
            bounds.len()
        )));
    }
    if options.starts == 0 {
        return Err(Error::InvalidArgument("need at least one start".into()));
    }
    let n = observations.len() as f64;
    let rms = (observations.iter().map(|(_, y)| y * y).sum::<f64>() / n).sqrt();
    if !(rms > 0.0) || !rms.is_finite() {
        return Err(Error::InvalidArgument("observations are all zero or non-finite".into()));
    }
    let obj = Objective {
        model,
        controls: observations.iter().map(|(x, _)| *x).collect(),
        targets: observations.iter().map(|(_, y)| y / rms).collect(),
    };

    let outcomes = (0..options.starts)
        .into_par_iter()
        .map(|i| {
            let start = match (&options.initial, i) {
                (Some(p), 0) => p.clone(),
                _ => start_point(i, seed, bounds),
            };
            levenberg_marquardt(&obj, start, bounds, options.max_iterations)
        })
        .collect::<Result<Vec<_>>>()?;
    let best = outcomes
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.cost.total_cmp(&b.cost).then(i.cmp(j)))
        .map(|(_, o)| o)
        .expect("at least one start");

    let (_, scale) = obj.residuals(&best.params)?;
    debug_assert!(obj.cost(&best.params)? == best.cost);
    let relative_rms = (best.cost / n).sqrt();
    let mut parameters: BTreeMap<String, f64> =
        bounds.iter().zip(&best.params).map(|(b, v)| (b.name.clone(), *v)).collect();
    parameters.insert("amplitude".into(), scale * rms);
    Ok(FitDetail {
        result: FitResult { parameters, residual_rms: relative_rms * rms, iterations: best.iterations, converged: best.converged },
        raw: best.params,
        relative_rms,
    })
}
