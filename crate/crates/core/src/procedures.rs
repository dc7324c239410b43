//! Detector final-state machinery.
//!
//! Each rate here is computed by building the joint detector (and atom) state
//! term by term, applying whatever local maps or swaps the arrangement calls
//! for, and projecting on the selected final state. All projection
//! normalizations are kept: Procedure 1 and the spatial swap give
//! `|S1A D2B + D2A S1B|^2 / 2`, Procedure 2 gives a quarter of it.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude::{c, CMatrix};
use crate::error::{Error, Result};
use crate::fringe;

const NORM_TOL: f64 = 1e-12;

/// Basis labels of the idealized detector, position, and atom registers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DetectorLabel {
    /// Registered a fermion.
    F,
    /// Registered a boson.
    B,
    /// Ready to absorb a fermion.
    FermionAccepting,
    /// Ready to absorb a boson.
    BosonAccepting,
    C,
    D,
    E,
    /// The `F` of the rotated basis at detector B (distinct from the fermion label).
    FPrime,
    NotFired,
    Fired,
    Atom0,
    Atom1,
    Atom2,
    /// Detector located at site A.
    PosA,
    /// Detector located at site B.
    PosB,
    RegisteredDD,
    RegisteredEE,
    AcceptingDD,
    AcceptingEE,
}

use DetectorLabel as L;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorState {
    pub label: DetectorLabel,
    pub amplitude: C64,
}

/// Superposition of product basis states, one label per register.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JointAmplitudeState {
    terms: BTreeMap<Vec<DetectorLabel>, C64>,
}

impl JointAmplitudeState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms<I: IntoIterator<Item = (Vec<DetectorLabel>, C64)>>(terms: I) -> Self {
        let mut s = Self::new();
        for (labels, amp) in terms {
            s.add(labels, amp);
        }
        s
    }

    pub fn add(&mut self, labels: Vec<DetectorLabel>, amplitude: C64) {
        *self.terms.entry(labels).or_insert(C64::new(0.0, 0.0)) += amplitude;
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[DetectorLabel], C64)> {
        self.terms.iter().map(|(k, v)| (k.as_slice(), *v))
    }

    pub fn amplitude(&self, labels: &[DetectorLabel]) -> C64 {
        self.terms.get(labels).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|z| z.norm_sqr()).sum()
    }

    /// `<bra|self>`.
    pub fn overlap(&self, bra: &Self) -> C64 {
        bra.terms.iter().map(|(k, b)| b.conj() * self.amplitude(k)).sum()
    }

    /// Apply a linear map to one register, given by its action on basis labels.
    pub fn map_site<F>(&self, site: usize, f: F) -> Self
    where
        F: Fn(DetectorLabel) -> Vec<(DetectorLabel, C64)>,
    {
        let mut out = Self::new();
        for (labels, amp) in &self.terms {
            for (new, w) in f(labels[site]) {
                let mut next = labels.clone();
                next[site] = new;
                out.add(next, amp * w);
            }
        }
        out
    }

    /// Apply a matrix to a pair of registers; `basis` lists the label pairs
    /// that index its rows and columns. Pairs outside `basis` are left alone.
    pub fn map_pair(&self, sites: (usize, usize), basis: &[(DetectorLabel, DetectorLabel)], m: &CMatrix) -> Result<Self> {
        if m.shape() != (basis.len(), basis.len()) {
            return Err(Error::Shape(format!("{} basis pairs for a {:?} operator", basis.len(), m.shape())));
        }
        let mut out = Self::new();
        for (labels, amp) in &self.terms {
            let pair = (labels[sites.0], labels[sites.1]);
            match basis.iter().position(|&b| b == pair) {
                Some(col) => {
                    for (row, &(x, y)) in basis.iter().enumerate() {
                        let w = m[(row, col)];
                        if w != C64::new(0.0, 0.0) {
                            let mut next = labels.clone();
                            next[sites.0] = x;
                            next[sites.1] = y;
                            out.add(next, amp * w);
                        }
                    }
                }
                None => out.add(labels.clone(), *amp),
            }
        }
        Ok(out)
    }

    /// Keep only the terms with `label` at `site` (unnormalized projection).
    pub fn project(&self, site: usize, label: DetectorLabel) -> Self {
        Self { terms: self.terms.iter().filter(|(k, _)| k[site] == label).map(|(k, v)| (k.clone(), *v)).collect() }
    }
}

fn r(x: f64) -> C64 {
    c(x, 0.0)
}

/// Amplitudes entering the boson/fermion arrangement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedAmplitudes {
    pub s1a: C64,
    pub d2b: C64,
    pub d2a: C64,
    pub s1b: C64,
}

impl MixedAmplitudes {
    pub fn new(s1a: C64, d2b: C64, d2a: C64, s1b: C64) -> Self {
        Self { s1a, d2b, d2a, s1b }
    }

    /// `S1A D2B |FB> + D2A S1B |BF>`.
    pub fn registered_state(&self) -> JointAmplitudeState {
        JointAmplitudeState::from_terms([
            (vec![L::F, L::B], self.s1a * self.d2b),
            (vec![L::B, L::F], self.d2a * self.s1b),
        ])
    }
}

fn bell_fb(sign: f64) -> JointAmplitudeState {
    JointAmplitudeState::from_terms([
        (vec![L::F, L::B], r(FRAC_1_SQRT_2)),
        (vec![L::B, L::F], r(sign * FRAC_1_SQRT_2)),
    ])
}

/// Project on the entangled detector state `(|FB> + |BF>) / sqrt 2`.
pub fn procedure1_rate(a: &MixedAmplitudes) -> f64 {
    a.registered_state().overlap(&bell_fb(1.0)).norm_sqr()
}

/// Rates on the symmetric and antisymmetric entangled states.
pub fn procedure1_pair(a: &MixedAmplitudes) -> (f64, f64) {
    let s = a.registered_state();
    (s.overlap(&bell_fb(1.0)).norm_sqr(), s.overlap(&bell_fb(-1.0)).norm_sqr())
}

/// Rotate each detector separately into the `C/D` and `E/F'` bases and
/// project on `|C><C| (x) |E><E|`.
pub fn procedure2_rate(a: &MixedAmplitudes) -> f64 {
    let h = FRAC_1_SQRT_2;
    let rotated = a
        .registered_state()
        .map_site(0, |l| match l {
            L::F => vec![(L::C, r(h)), (L::D, r(h))],
            L::B => vec![(L::C, r(h)), (L::D, r(-h))],
            other => vec![(other, r(1.0))],
        })
        .map_site(1, |l| match l {
            L::F => vec![(L::E, r(h)), (L::FPrime, r(h))],
            L::B => vec![(L::E, r(h)), (L::FPrime, r(-h))],
            other => vec![(other, r(1.0))],
        });
    rotated.amplitude(&[L::C, L::E]).norm_sqr()
}

/// Position basis `{|AA>, |AB>, |BA>, |BB>}` for the swap operator.
pub const POSITION_BASIS: [(DetectorLabel, DetectorLabel); 4] =
    [(L::PosA, L::PosA), (L::PosA, L::PosB), (L::PosB, L::PosA), (L::PosB, L::PosB)];

/// Unitary that puts two detectors into an equal superposition of their
/// original and swapped positions:
///
/// ```text
/// S = (|AB> + |BA>) <AB| / sqrt2 + (|AB> - |BA>) <BA| / sqrt2 + |AA><AA| + |BB><BB|
/// ```
#[rustfmt::skip]
pub fn swap_operator() -> CMatrix {
    let h = FRAC_1_SQRT_2;
    let z = r(0.0);
    CMatrix::from_rows(
        4,
        4,
        vec![
            r(1.0), z, z, z,
            z, r(h), r(h), z,
            z, r(h), r(-h), z,
            z, z, z, r(1.0),
        ],
    )
    .expect("4x4")
}

/// Registered boson/fermion state with position registers:
/// `S1A D2B |F>|A> (x) |B>|B> + D2A S1B |F>|B> (x) |B>|A>`.
fn positioned_state(a: &MixedAmplitudes) -> JointAmplitudeState {
    JointAmplitudeState::from_terms([
        (vec![L::F, L::PosA, L::B, L::PosB], a.s1a * a.d2b),
        (vec![L::F, L::PosB, L::B, L::PosA], a.d2a * a.s1b),
    ])
}

/// Apply the swap operator to the position registers and project on `target`
/// (a `[internal, position, internal, position]` label tuple).
pub fn spatial_swap_rate_onto(a: &MixedAmplitudes, target: [DetectorLabel; 4]) -> Result<f64> {
    let swapped = positioned_state(a).map_pair((1, 3), &POSITION_BASIS, &swap_operator())?;
    Ok(swapped.amplitude(&target).norm_sqr())
}

/// Spatial-superposition rate projected on `|F>|A> (x) |B>|B>`.
pub fn spatial_swap_rate(a: &MixedAmplitudes) -> f64 {
    spatial_swap_rate_onto(a, [L::F, L::PosA, L::B, L::PosB]).expect("fixed 4x4 basis")
}

/// Atom in `alpha |0> + beta |1>` whose two levels both feed level `|2>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreeLevelAtom {
    pub alpha: C64,
    pub beta: C64,
    pub coupling_02: C64,
    pub coupling_12: C64,
}

impl ThreeLevelAtom {
    pub fn new(alpha: C64, beta: C64, coupling_02: C64, coupling_12: C64) -> Result<Self> {
        let n = alpha.norm_sqr() + beta.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::validation("three-level atom", vec![format!("normalization (|alpha|^2 + |beta|^2 = {n})")]));
        }
        Ok(Self { alpha, beta, coupling_02, coupling_12 })
    }
}

/// Rate for populating `|2>` when photon 1 drives `0 -> 2` and photon 2 drives `1 -> 2`.
pub fn wavelength_interference_rate(atom: &ThreeLevelAtom, photon_1: C64, photon_2: C64) -> f64 {
    let initial = JointAmplitudeState::from_terms([(vec![L::Atom0], atom.alpha), (vec![L::Atom1], atom.beta)]);
    let excited = initial.map_site(0, |l| match l {
        L::Atom0 => vec![(L::Atom2, atom.coupling_02 * photon_1)],
        L::Atom1 => vec![(L::Atom2, atom.coupling_12 * photon_2)],
        other => vec![(other, r(1.0))],
    });
    excited.amplitude(&[L::Atom2]).norm_sqr()
}

/// Amplitudes for `C -> DD` and `C -> EE`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayChannel {
    pub amplitude_dd: C64,
    pub amplitude_ee: C64,
}

impl DecayChannel {
    pub fn new(amplitude_dd: C64, amplitude_ee: C64) -> Result<Self> {
        let n = amplitude_dd.norm_sqr() + amplitude_ee.norm_sqr();
        if n > 1.0 + NORM_TOL {
            return Err(Error::validation("decay channel", vec![format!("branching (|M_DD|^2 + |M_EE|^2 = {n} > 1)")]));
        }
        Ok(Self { amplitude_dd, amplitude_ee })
    }

    /// Phase of `M_EE / M_DD`.
    pub fn relative_phase(&self) -> f64 {
        (self.amplitude_ee / self.amplitude_dd).arg()
    }
}

/// Project `M_DD D1A |DD, EE-ready> + M_EE S1B |DD-ready, EE>` on the
/// symmetric combination of the two registered configurations.
pub fn decay_interference_rate(channel: &DecayChannel, d1a: C64, s1b: C64) -> f64 {
    let state = JointAmplitudeState::from_terms([
        (vec![L::RegisteredDD, L::AcceptingEE], channel.amplitude_dd * d1a),
        (vec![L::AcceptingDD, L::RegisteredEE], channel.amplitude_ee * s1b),
    ]);
    let target = JointAmplitudeState::from_terms([
        (vec![L::RegisteredDD, L::AcceptingEE], r(FRAC_1_SQRT_2)),
        (vec![L::AcceptingDD, L::RegisteredEE], r(FRAC_1_SQRT_2)),
    ]);
    state.overlap(&target).norm_sqr()
}

/// Mach-Zehnder rate read out by local projections on two atom/detector
/// pairs, with each atom prepared in `(|0> + |1>) / sqrt 2`.
///
/// Registers are `[atom A, atom B, detector A', detector B']`.
pub fn mz_no_recombine_rate(d1a: C64, d1b: C64) -> f64 {
    let h = r(FRAC_1_SQRT_2);
    let state = JointAmplitudeState::from_terms([
        (vec![L::Atom1, L::Atom0, L::NotFired, L::NotFired], d1a * h),
        (vec![L::Atom1, L::Atom1, L::NotFired, L::NotFired], d1a * h),
        (vec![L::Atom0, L::Atom1, L::NotFired, L::NotFired], d1b * h),
        (vec![L::Atom1, L::Atom1, L::NotFired, L::NotFired], d1b * h),
    ]);
    state
        .project(0, L::Atom1)
        .project(2, L::NotFired)
        .project(1, L::Atom1)
        .project(3, L::NotFired)
        .norm_sqr()
}

/// A rate sampled over one full turn of a phase plate.
///
/// Two-amplitude interference is `A + B cos(theta - theta0)` in the plate
/// phase, so visibility `B / A` and peak `theta0` come from the first
/// harmonic of the samples and do not depend on where the grid falls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSweep {
    pub phases: Vec<f64>,
    pub rates: Vec<f64>,
    /// `(max - min) / (max + min)` of the underlying sinusoid.
    pub visibility: f64,
    /// Location of the fringe maximum, wrapped to `(-pi, pi]`; none for a flat sweep.
    pub peak_phase: Option<f64>,
    /// `(max - min) / (max + min)` of the samples themselves.
    pub sampled_contrast: f64,
    /// Largest deviation of a sample from the fitted sinusoid.
    pub harmonic_residual: f64,
}

pub const DEFAULT_SWEEP_STEPS: usize = 256;

/// Evaluate `rate(theta)` on `steps` points covering `[0, 2 pi)`.
pub fn phase_sweep<F>(steps: usize, rate: F) -> Result<PhaseSweep>
where
    F: Fn(f64) -> f64 + Sync,
{
    if steps < 3 {
        return Err(Error::InvalidArgument(format!("phase sweep needs at least 3 steps, got {steps}")));
    }
    let phases: Vec<f64> = (0..steps).map(|k| TAU * k as f64 / steps as f64).collect();
    let rates: Vec<f64> = phases.par_iter().map(|&t| rate(t)).collect();
    let h = fringe::first_harmonic(&rates).expect("at least 3 samples");
    let visibility = if h.mean > 0.0 { (h.amplitude / h.mean).min(1.0) } else { 0.0 };
    let peak_phase = (h.amplitude > 0.0).then(|| wrap_phase(h.peak));
    Ok(PhaseSweep {
        visibility,
        peak_phase,
        sampled_contrast: fringe::contrast(&rates),
        harmonic_residual: h.residual,
        phases,
        rates,
    })
}

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Sweep a phase plate on `S1B` and locate the fringe maximum. The relative
/// decay phase `arg(M_EE / M_DD)` is minus the peak, corrected for the
/// geometric phases of the two propagators.
pub fn decay_phase_from_sweep(channel: &DecayChannel, d1a: C64, s1b: C64, steps: usize) -> Result<(PhaseSweep, f64)> {
    let sweep = phase_sweep(steps, |t| decay_interference_rate(channel, d1a, s1b * C64::from_polar(1.0, t)))?;
    let peak = sweep
        .peak_phase
        .ok_or_else(|| Error::InvalidArgument("sweep has no maximum".into()))?;
    let phase = wrap_phase(-peak - (s1b / d1a).arg());
    Ok((sweep, phase))
}
