//! Emitters, detectors, and single-particle propagation amplitudes.
//!
//! Propagators are scalar spherical waves `exp(i k r + i phi) / r` with
//! `k = 2 pi / lambda`; the emission phase `phi` only enters when the scene
//! has phase noise switched on. All arrivals are treated as simultaneous.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarization::PolMatrix;

pub type Vec3 = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Species {
    Photon,
    Boson,
    Fermion,
    /// A source of particles `C` that decay into `DD` or `EE`.
    DecayingC,
}

impl Species {
    pub const ALL: [Species; 4] = [Species::Photon, Species::Boson, Species::Fermion, Species::DecayingC];

    pub fn is_bosonic(self) -> bool {
        matches!(self, Species::Photon | Species::Boson)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Emitter {
    pub position: Vec3,
    pub species: Species,
    /// Per-realization emission phase in radians.
    pub emission_phase: f64,
    pub polarization: Option<PolMatrix>,
    /// Wavelength in meters.
    pub wavelength: f64,
}

impl Emitter {
    pub fn photon(position: Vec3, wavelength: f64) -> Self {
        Self { position, species: Species::Photon, emission_phase: 0.0, polarization: None, wavelength }
    }

    pub fn with_species(mut self, species: Species) -> Self {
        self.species = species;
        self
    }

    pub fn with_polarization(mut self, pol: PolMatrix) -> Self {
        self.polarization = Some(pol);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    pub position: Vec3,
    pub accepts: Vec<Species>,
    pub projector: Option<PolMatrix>,
}

impl Detector {
    /// Detector accepting every species, with no polarization filter.
    pub fn at(position: Vec3) -> Self {
        Self { position, accepts: Species::ALL.to_vec(), projector: None }
    }

    pub fn accepting(mut self, accepts: &[Species]) -> Self {
        self.accepts = accepts.to_vec();
        self
    }
}

/// Whether a propagator belongs to the boson-like (`D`) or fermion-like (`S`) channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    D,
    S,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Propagator {
    pub value: C64,
    pub channel: Channel,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropagatorModel {
    /// `exp(i k r) / r`.
    #[default]
    Spherical,
    /// `exp(i k r)`: unit modulus, same phase.
    PurePhase,
}

pub fn distance(a: &Vec3, b: &Vec3) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Amplitude for `src`'s particle to reach `det`.
pub fn propagator(
    src: &Emitter,
    det: &Detector,
    model: PropagatorModel,
    include_emission_phase: bool,
) -> Result<Propagator> {
    if !det.accepts.contains(&src.species) {
        return Err(Error::Scene(format!("detector does not accept species {:?}", src.species)));
    }
    let r = distance(&src.position, &det.position);
    if !(r > 0.0) {
        return Err(Error::Scene(format!(
            "emitter and detector coincide at {:?}",
            src.position
        )));
    }
    let mut phase = TAU / src.wavelength * r;
    if include_emission_phase {
        phase += src.emission_phase;
    }
    let modulus = match model {
        PropagatorModel::Spherical => 1.0 / r,
        PropagatorModel::PurePhase => 1.0,
    };
    let channel = if src.species == Species::Fermion { Channel::S } else { Channel::D };
    Ok(Propagator { value: C64::from_polar(modulus, phase), channel })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpticalScene {
    emitters: Vec<Emitter>,
    detectors: Vec<Detector>,
    rng_seed: u64,
    phase_noise: bool,
    model: PropagatorModel,
}

impl OpticalScene {
    pub fn new(emitters: Vec<Emitter>, detectors: Vec<Detector>) -> Result<Self> {
        let scene = Self { emitters, detectors, rng_seed: 0, phase_noise: false, model: PropagatorModel::Spherical };
        scene.validate()?;
        Ok(scene)
    }

    fn validate(&self) -> Result<()> {
        if self.emitters.is_empty() || self.detectors.is_empty() {
            return Err(Error::Scene("a scene needs at least one emitter and one detector".into()));
        }
        for (i, e) in self.emitters.iter().enumerate() {
            if !(e.wavelength > 0.0) || !e.wavelength.is_finite() {
                return Err(Error::Scene(format!("emitter {i}: wavelength must be positive, got {}", e.wavelength)));
            }
            if e.position.iter().any(|x| !x.is_finite()) || !e.emission_phase.is_finite() {
                return Err(Error::Scene(format!("emitter {i}: non-finite position or phase")));
            }
            if let Some(p) = &e.polarization {
                p.check_density(&format!("emitter {i} polarization"))?;
            }
            for (j, d) in self.detectors.iter().enumerate() {
                if distance(&e.position, &d.position) == 0.0 {
                    return Err(Error::Scene(format!("emitter {i} and detector {j} share position {:?}", e.position)));
                }
            }
        }
        for (j, d) in self.detectors.iter().enumerate() {
            if d.position.iter().any(|x| !x.is_finite()) {
                return Err(Error::Scene(format!("detector {j}: non-finite position")));
            }
            if let Some(p) = &d.projector {
                p.check_projector(&format!("detector {j} projector"))?;
            }
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn with_phase_noise(mut self, on: bool) -> Self {
        self.phase_noise = on;
        self
    }

    pub fn with_model(mut self, model: PropagatorModel) -> Self {
        self.model = model;
        self
    }

    pub fn emitters(&self) -> &[Emitter] {
        &self.emitters
    }

    pub fn detectors(&self) -> &[Detector] {
        &self.detectors
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn phase_noise(&self) -> bool {
        self.phase_noise
    }

    pub fn model(&self) -> PropagatorModel {
        self.model
    }

    /// Propagator from emitter `i` to detector `j`.
    pub fn propagator(&self, i: usize, j: usize) -> Result<Propagator> {
        let e = self.emitters.get(i).ok_or_else(|| Error::Scene(format!("no emitter {i}")))?;
        let d = self.detectors.get(j).ok_or_else(|| Error::Scene(format!("no detector {j}")))?;
        propagator(e, d, self.model, self.phase_noise)
    }

    pub fn with_emission_phases(&self, phases: &[f64]) -> Result<Self> {
        if phases.len() != self.emitters.len() {
            return Err(Error::InvalidArgument(format!(
                "{} phases for {} emitters",
                phases.len(),
                self.emitters.len()
            )));
        }
        let mut out = self.clone();
        for (e, &p) in out.emitters.iter_mut().zip(phases) {
            e.emission_phase = p;
        }
        Ok(out)
    }

    pub fn with_detector_positions(&self, positions: &[Vec3]) -> Result<Self> {
        if positions.len() != self.detectors.len() {
            return Err(Error::InvalidArgument(format!(
                "{} positions for {} detectors",
                positions.len(),
                self.detectors.len()
            )));
        }
        let mut out = self.clone();
        for (d, p) in out.detectors.iter_mut().zip(positions) {
            d.position = *p;
        }
        out.validate()?;
        Ok(out)
    }

    /// Sub-scene holding only the listed emitters.
    pub fn select_emitters(&self, indices: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        out.emitters = indices
            .iter()
            .map(|&i| self.emitters.get(i).cloned().ok_or_else(|| Error::Scene(format!("no emitter {i}"))))
            .collect::<Result<_>>()?;
        out.validate()?;
        Ok(out)
    }
}

/// One emission phase per emitter, uniform on `[0, 2 pi)`.
///
/// The generator is ChaCha8 seeded from the scene's `rng_seed`, so the same
/// seed always yields the same phases.
pub fn draw_phases(scene: &OpticalScene) -> Result<Vec<f64>> {
    Ok(draw_phase_realizations(scene, 1)?.remove(0))
}

/// `n` successive phase vectors from the scene's seeded stream.
pub fn draw_phase_realizations(scene: &OpticalScene, n: usize) -> Result<Vec<Vec<f64>>> {
    if !scene.phase_noise {
        return Err(Error::InvalidArgument("phase draws require phase_noise = true".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(scene.rng_seed);
    Ok((0..n)
        .map(|_| scene.emitters.iter().map(|_| rng.gen::<f64>() * TAU).collect())
        .collect())
}
