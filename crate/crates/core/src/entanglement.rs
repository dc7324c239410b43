//! Generalized rates for entangled detector and emitter tensors.
//!
//! Let `P` be the detector tensor (party A = detector A) and `R` the emitter
//! tensor (party A = emitter 1), both as joint operators, and let `X` swap the
//! two parties. Then
//!
//! ```text
//! direct  = Tr(P R)   |D1A|^2 |D2B|^2 + Tr(P X R X) |D2A|^2 |D1B|^2
//! crossed = Tr(P R X) D1A D2B D2A* D1B* + Tr(P X R) D1A* D2B* D2A D1B
//! ```
//!
//! In index form `Tr(P R X) = P^{a1 b1}_{a2 b2} R^{a2 b2}_{b1 a1}`. For product
//! tensors this reduces to `Tr(PA pi1 PB pi2)`, which pins the index placement.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::amplitude::{contract, min_hermitian_eigenvalue, operator_schmidt, tensor_product, SchmidtReport, Tensor4, RANK_TOL};
use crate::error::{Error, Result};
use crate::estimation::{self, FitOptions, ForwardModel, ParamSpec};
use crate::hbt::{place_detectors, Propagators, ScanSpec};
use crate::polarization::PolMatrix;
use crate::scene::OpticalScene;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-9;
/// Imaginary residue allowed on a term that must be real.
const REALITY_TOL: f64 = 1e-12;

/// Default relative-RMS threshold below which a curve counts as factorizable.
pub const DEFAULT_WITNESS_THRESHOLD: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralRateInput {
    pub detector: Tensor4,
    pub emitter: Tensor4,
    pub propagators: Propagators,
}

impl GeneralRateInput {
    pub fn new(detector: Tensor4, emitter: Tensor4, propagators: Propagators) -> Result<Self> {
        let input = Self { detector, emitter, propagators };
        input.validate()?;
        Ok(input)
    }

    pub fn validate(&self) -> Result<()> {
        let (p, r) = (&self.detector, &self.emitter);
        if (p.dim_a(), p.dim_b()) != (r.dim_a(), r.dim_b()) {
            return Err(Error::DimensionMismatch {
                op: "general rate",
                left: (p.dim_a(), p.dim_b()),
                right: (r.dim_a(), r.dim_b()),
            });
        }
        if p.dim_a() != p.dim_b() {
            return Err(Error::Shape(format!(
                "crossed assignments need equal party dimensions, got ({}, {})",
                p.dim_a(),
                p.dim_b()
            )));
        }
        let mut failures = Vec::new();
        let dp = p.hermiticity_deficit();
        if dp > HERMITIAN_TOL {
            failures.push(format!("detector tensor hermiticity (deficit {dp:e})"));
        }
        let dr = r.hermiticity_deficit();
        if dr > HERMITIAN_TOL {
            failures.push(format!("emitter tensor hermiticity (deficit {dr:e})"));
        }
        let min = min_hermitian_eigenvalue(&r.joint_matrix())?;
        if min < -TRACE_TOL {
            failures.push(format!("emitter tensor positivity (min eigenvalue {min:e})"));
        }
        let tr = r.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            failures.push(format!("emitter tensor trace (Tr = {tr})"));
        }
        if failures.is_empty() {
            Ok(())
        } else {
            Err(Error::validation("general rate input", failures))
        }
    }
}

/// The four contractions weighting each propagator product.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralCoefficients {
    /// `Tr(P R)`.
    pub first: C64,
    /// `Tr(P X R X)`.
    pub second: C64,
    /// `Tr(P R X)`, weighting `D1A D2B D2A* D1B*`.
    pub crossed: C64,
    /// `Tr(P X R)`, weighting the conjugate product.
    pub crossed_conj: C64,
}

/// `R X`, i.e. `(R X)^{a2 b2}_{a1 b1} = R^{a2 b2}_{b1 a1}`.
fn right_swap(r: &Tensor4) -> Tensor4 {
    let d = r.dim_a();
    let mut out = Tensor4::zeros(d, d).expect("positive dims");
    for a2 in 0..d {
        for b2 in 0..d {
            for a1 in 0..d {
                for b1 in 0..d {
                    out.set(a2, b2, a1, b1, r.get(a2, b2, b1, a1));
                }
            }
        }
    }
    out
}

/// `X R`, i.e. `(X R)^{a2 b2}_{a1 b1} = R^{b2 a2}_{a1 b1}`.
fn left_swap(r: &Tensor4) -> Tensor4 {
    let d = r.dim_a();
    let mut out = Tensor4::zeros(d, d).expect("positive dims");
    for a2 in 0..d {
        for b2 in 0..d {
            for a1 in 0..d {
                for b1 in 0..d {
                    out.set(a2, b2, a1, b1, r.get(b2, a2, a1, b1));
                }
            }
        }
    }
    out
}

pub fn general_coefficients(detector: &Tensor4, emitter: &Tensor4) -> Result<GeneralCoefficients> {
    Ok(GeneralCoefficients {
        first: contract(detector, emitter)?,
        second: contract(detector, &emitter.swap_parties())?,
        crossed: contract(detector, &right_swap(emitter))?,
        crossed_conj: contract(detector, &left_swap(emitter))?,
    })
}

fn real_part(z: C64, what: &str) -> Result<f64> {
    if z.im.abs() > REALITY_TOL * z.re.abs().max(1.0) {
        return Err(Error::InvalidArgument(format!("{what} has imaginary residue {:e}", z.im)));
    }
    Ok(z.re)
}

pub fn general_direct(input: &GeneralRateInput) -> Result<f64> {
    input.validate()?;
    let k = general_coefficients(&input.detector, &input.emitter)?;
    let p = &input.propagators;
    real_part(k.first * p.first_process() + k.second * p.second_process(), "direct term")
}

pub fn general_crossed(input: &GeneralRateInput) -> Result<f64> {
    input.validate()?;
    let k = general_coefficients(&input.detector, &input.emitter)?;
    let x = input.propagators.interference();
    real_part(k.crossed * x + k.crossed_conj * x.conj(), "crossed term")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralRateResult {
    pub direct: f64,
    pub crossed: f64,
    pub total: f64,
    pub coefficients: GeneralCoefficients,
}

pub fn general_rate(input: &GeneralRateInput) -> Result<GeneralRateResult> {
    input.validate()?;
    let k = general_coefficients(&input.detector, &input.emitter)?;
    let p = &input.propagators;
    let x = p.interference();
    let direct = real_part(k.first * p.first_process() + k.second * p.second_process(), "direct term")?;
    let crossed = real_part(k.crossed * x + k.crossed_conj * x.conj(), "crossed term")?;
    Ok(GeneralRateResult { direct, crossed, total: direct + crossed, coefficients: k })
}

/// Singlet `(|HV> - |VH>) / sqrt 2` as an emitter tensor.
pub fn bell_singlet() -> Tensor4 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = C64::new(0.0, 0.0);
    Tensor4::from_pure_state(&[z, C64::new(s, 0.0), C64::new(-s, 0.0), z], 2, 2).expect("4-vector")
}

/// Totals over a baseline scan for fixed tensors.
pub fn general_curve(scene: &OpticalScene, spec: &ScanSpec, detector: &Tensor4, emitter: &Tensor4) -> Result<Vec<(f64, f64)>> {
    let k = general_coefficients(detector, emitter)?;
    let axis = unit(spec.axis)?;
    spec.baselines()?
        .into_iter()
        .map(|b| {
            let p = Propagators::from_scene(&place_detectors(scene, &axis, b)?)?;
            let x = p.interference();
            let total = k.first * p.first_process() + k.second * p.second_process() + k.crossed * x + k.crossed_conj * x.conj();
            Ok((b, total.re))
        })
        .collect()
}

fn unit(v: [f64; 3]) -> Result<[f64; 3]> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 0.0) {
        return Err(Error::InvalidArgument("scan axis has zero length".into()));
    }
    Ok(v.map(|x| x / n))
}

/// Bloch vector `sin(u) (sin t cos p, sin t sin p, cos t)`; norm at most one.
pub fn bloch_from_angles(u: f64, t: f64, p: f64) -> [f64; 3] {
    let s = u.sin();
    [s * t.sin() * p.cos(), s * t.sin() * p.sin(), s * t.cos()]
}

/// Inverse of [`bloch_from_angles`] for a Bloch vector of norm at most one.
pub fn angles_from_bloch(r: [f64; 3]) -> [f64; 3] {
    let n = r.iter().map(|x| x * x).sum::<f64>().sqrt().min(1.0);
    let t = if n > 0.0 { (r[2] / n).clamp(-1.0, 1.0).acos() } else { 0.0 };
    [n.asin(), t, r[1].atan2(r[0])]
}

/// Bloch vector of a 2x2 density matrix.
pub fn bloch_of(m: &PolMatrix) -> [f64; 3] {
    let a = m.matrix();
    [2.0 * a[(1, 0)].re, 2.0 * a[(1, 0)].im, (a[(0, 0)] - a[(1, 1)]).re]
}

#[derive(Clone, Debug)]
pub struct WitnessProblem {
    pub scene: OpticalScene,
    pub scan: ScanSpec,
    /// Observed totals, one per scan baseline.
    pub totals: Vec<f64>,
    pub detector: Tensor4,
    /// Candidate marginals used to seed the first start.
    pub marginals: Option<(PolMatrix, PolMatrix)>,
    pub threshold: f64,
    /// Generating emitter tensor, when known.
    pub true_emitter: Option<Tensor4>,
    pub starts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessVerdict {
    /// Operator-Schmidt report of the generating tensor, when it was supplied.
    pub schmidt_report: Option<SchmidtReport>,
    pub factorizable: bool,
    /// Relative RMS residual of the best product-state fit.
    pub fit_residual: f64,
    pub best_marginals: [[f64; 3]; 2],
    pub fit_converged: bool,
}

/// Fit the best product emitter tensor to a rate curve and decide whether the
/// curve is consistent with unentangled emitters.
pub fn witness_factorization(problem: &WitnessProblem, seed: u64) -> Result<WitnessVerdict> {
    if !(problem.threshold > 0.0) {
        return Err(Error::InvalidArgument("witness threshold must be positive".into()));
    }
    let baselines = problem.scan.baselines()?;
    if baselines.len() != problem.totals.len() {
        return Err(Error::InvalidArgument(format!(
            "{} totals for {} baselines",
            problem.totals.len(),
            baselines.len()
        )));
    }
    // six Bloch angles plus the overall scale
    if problem.totals.len() < 8 {
        return Err(Error::InvalidArgument(format!(
            "witness needs at least 8 curve points, got {}",
            problem.totals.len()
        )));
    }
    let model = ForwardModel::FactorizedWitness {
        scene: problem.scene.clone(),
        axis: problem.scan.axis,
        detector: problem.detector.clone(),
    };
    let observations: Vec<(f64, f64)> = baselines.into_iter().zip(problem.totals.iter().copied()).collect();
    let mut options = FitOptions { starts: problem.starts.max(1), ..FitOptions::default() };
    if let Some((p1, p2)) = &problem.marginals {
        let a = angles_from_bloch(bloch_of(p1));
        let b = angles_from_bloch(bloch_of(p2));
        options.initial = Some(vec![a[0], a[1], a[2], b[0], b[1], b[2]]);
    }
    let fit = estimation::fit_model(&model, &observations, &model.default_params(), &options, seed)?;
    let p = &fit.raw;
    let schmidt_report = problem
        .true_emitter
        .as_ref()
        .map(|t| operator_schmidt(t, RANK_TOL))
        .transpose()?;
    Ok(WitnessVerdict {
        schmidt_report,
        factorizable: fit.relative_rms <= problem.threshold,
        fit_residual: fit.relative_rms,
        best_marginals: [bloch_from_angles(p[0], p[1], p[2]), bloch_from_angles(p[3], p[4], p[5])],
        fit_converged: fit.result.converged,
    })
}

/// Bounds for the six Bloch angles of the product-state model.
pub fn witness_params() -> Vec<ParamSpec> {
    use std::f64::consts::{FRAC_PI_2, PI};
    let names = ["u1", "theta1", "phi1", "u2", "theta2", "phi2"];
    let bounds = [(0.0, FRAC_PI_2), (0.0, PI), (-PI, PI)];
    names
        .iter()
        .enumerate()
        .map(|(i, n)| ParamSpec::new(n, bounds[i % 3].0, bounds[i % 3].1))
        .collect()
}

/// Product emitter tensor from six Bloch angles.
pub fn product_emitter(p: &[f64]) -> Tensor4 {
    let a = PolMatrix::from_bloch(bloch_from_angles(p[0], p[1], p[2]));
    let b = PolMatrix::from_bloch(bloch_from_angles(p[3], p[4], p[5]));
    tensor_product(a.matrix(), b.matrix()).expect("2x2 inputs")
}

/// Random valid product emitter tensor, for experiments.
pub fn random_product_emitter(rng: &mut ChaCha8Rng) -> (PolMatrix, PolMatrix) {
    use rand::Rng;
    let mut draw = || {
        let v: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        let r = rng.gen::<f64>().cbrt();
        PolMatrix::from_bloch(v.map(|x| x / n * r))
    };
    (draw(), draw())
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
