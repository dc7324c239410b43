//! Scalar two-source, two-detector coincidence rates and baseline scans.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fringe;
use crate::scene::{draw_phase_realizations, Emitter, OpticalScene, Vec3};

/// Unnormalized coincidence rate split into its process and interference parts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub direct: f64,
    pub crossed: f64,
    pub total: f64,
}

impl RateResult {
    pub fn new(direct: f64, crossed: f64) -> Self {
        Self { direct, crossed, total: direct + crossed }
    }

    /// Fringe contrast available at this geometry, `|crossed| / direct`.
    pub fn coherence(&self) -> f64 {
        if self.direct == 0.0 {
            0.0
        } else {
            self.crossed.abs() / self.direct
        }
    }
}

impl std::ops::Add for RateResult {
    type Output = RateResult;
    fn add(self, rhs: RateResult) -> RateResult {
        RateResult::new(self.direct + rhs.direct, self.crossed + rhs.crossed)
    }
}

/// The four propagators of a two-source, two-detector arrangement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Propagators {
    pub d1a: C64,
    pub d2b: C64,
    pub d2a: C64,
    pub d1b: C64,
}

impl Propagators {
    pub fn new(d1a: C64, d2b: C64, d2a: C64, d1b: C64) -> Self {
        Self { d1a, d2b, d2a, d1b }
    }

    pub fn from_scene(scene: &OpticalScene) -> Result<Self> {
        two_by_two(scene)?;
        Ok(Self {
            d1a: scene.propagator(0, 0)?.value,
            d2b: scene.propagator(1, 1)?.value,
            d2a: scene.propagator(1, 0)?.value,
            d1b: scene.propagator(0, 1)?.value,
        })
    }

    /// `D1A D2B D2A* D1B*`.
    pub fn interference(&self) -> C64 {
        self.d1a * self.d2b * self.d2a.conj() * self.d1b.conj()
    }

    /// `|D1A|^2 |D2B|^2`.
    pub fn first_process(&self) -> f64 {
        self.d1a.norm_sqr() * self.d2b.norm_sqr()
    }

    /// `|D2A|^2 |D1B|^2`.
    pub fn second_process(&self) -> f64 {
        self.d2a.norm_sqr() * self.d1b.norm_sqr()
    }

    /// Relabel detectors A <-> B.
    pub fn swap_detectors(&self) -> Self {
        Self { d1a: self.d1b, d2b: self.d2a, d2a: self.d2b, d1b: self.d1a }
    }

    /// Relabel emitters 1 <-> 2.
    pub fn swap_emitters(&self) -> Self {
        Self { d1a: self.d2a, d2b: self.d1b, d2a: self.d1a, d1b: self.d2b }
    }
}

pub(crate) fn two_by_two(scene: &OpticalScene) -> Result<()> {
    let (ne, nd) = (scene.emitters().len(), scene.detectors().len());
    if ne != 2 || nd != 2 {
        return Err(Error::Scene(format!(
            "two-source rate needs exactly 2 emitters and 2 detectors, got {ne} and {nd}"
        )));
    }
    Ok(())
}

pub fn rate_from_propagators(p: &Propagators) -> RateResult {
    RateResult::new(p.first_process() + p.second_process(), 2.0 * p.interference().re)
}

pub fn hbt_rate(scene: &OpticalScene) -> Result<RateResult> {
    two_by_two(scene)?;
    let e = scene.emitters();
    if let Some(bad) = e.iter().find(|e| !e.species.is_bosonic()) {
        return Err(Error::Scene(format!("scalar rate needs photon or boson emitters, got {:?}", bad.species)));
    }
    match (&e[0].polarization, &e[1].polarization) {
        (None, None) => {}
        (Some(a), Some(b)) if a.matrix().sub(b.matrix())?.max_abs() <= 1e-12 => {}
        _ => {
            return Err(Error::Scene(
                "scalar rate needs identical (or absent) polarizations; use the polarization engine".into(),
            ))
        }
    }
    Ok(rate_from_propagators(&Propagators::from_scene(scene)?))
}

/// Incoherent sum of two-source rates over every emitter pair of a two-detector scene.
pub fn pairwise_rate(scene: &OpticalScene) -> Result<RateResult> {
    if scene.detectors().len() != 2 || scene.emitters().len() < 2 {
        return Err(Error::Scene("pairwise rate needs 2 detectors and at least 2 emitters".into()));
    }
    if scene.emitters().len() == 2 {
        return hbt_rate(scene);
    }
    let n = scene.emitters().len();
    let to_a: Vec<C64> = (0..n).map(|i| scene.propagator(i, 0).map(|p| p.value)).collect::<Result<_>>()?;
    let to_b: Vec<C64> = (0..n).map(|i| scene.propagator(i, 1).map(|p| p.value)).collect::<Result<_>>()?;
    let mut sum = RateResult::default();
    for i in 0..n {
        for j in (i + 1)..n {
            sum = sum + rate_from_propagators(&Propagators::new(to_a[i], to_b[j], to_a[j], to_b[i]));
        }
    }
    Ok(sum)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseNoiseStats {
    pub realizations: usize,
    pub mean_total: f64,
    /// `max - min` of the total over all realizations.
    pub max_deviation: f64,
    pub totals: Vec<f64>,
}

/// Evaluate the rate under `n` independent draws of emitter phases.
pub fn phase_noise_envelope(scene: &OpticalScene, n: usize) -> Result<PhaseNoiseStats> {
    if n < 1 {
        return Err(Error::InvalidArgument("need at least one realization".into()));
    }
    two_by_two(scene)?;
    let totals = draw_phase_realizations(scene, n)?
        .iter()
        .map(|phases| hbt_rate(&scene.with_emission_phases(phases)?).map(|r| r.total))
        .collect::<Result<Vec<_>>>()?;
    let mean_total = totals.iter().sum::<f64>() / n as f64;
    let max = totals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = totals.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PhaseNoiseStats { realizations: n, mean_total, max_deviation: max - min, totals })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityCurve {
    pub baselines: Vec<f64>,
    pub totals: Vec<f64>,
    pub direct: Vec<f64>,
    pub crossed: Vec<f64>,
    /// `(max - min) / (max + min)` of the sampled totals.
    pub visibility: f64,
    /// Largest `|crossed| / direct` over the samples.
    pub max_coherence: f64,
    /// Mean distance between adjacent refined maxima of the totals.
    pub fringe_spacing: Option<f64>,
}

impl VisibilityCurve {
    pub fn from_samples(baselines: Vec<f64>, rates: &[RateResult]) -> Self {
        let totals: Vec<f64> = rates.iter().map(|r| r.total).collect();
        let peaks = fringe::refined_maxima(&baselines, &totals);
        let fringe_spacing = if peaks.len() >= 2 {
            Some((peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64)
        } else {
            None
        };
        Self {
            visibility: fringe::contrast(&totals),
            max_coherence: rates.iter().map(RateResult::coherence).fold(0.0, f64::max),
            direct: rates.iter().map(|r| r.direct).collect(),
            crossed: rates.iter().map(|r| r.crossed).collect(),
            totals,
            baselines,
            fringe_spacing,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub axis: Vec3,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl ScanSpec {
    pub fn baselines(&self) -> Result<Vec<f64>> {
        if self.steps < 2 {
            return Err(Error::InvalidArgument(format!("scan needs at least 2 steps, got {}", self.steps)));
        }
        if !(self.from < self.to) {
            return Err(Error::InvalidArgument(format!("scan range must satisfy from < to, got [{}, {}]", self.from, self.to)));
        }
        let h = (self.to - self.from) / (self.steps - 1) as f64;
        Ok((0..self.steps).map(|k| self.from + h * k as f64).collect())
    }

    fn unit_axis(&self) -> Result<Vec3> {
        let n = self.axis.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidArgument("scan axis has zero length".into()));
        }
        Ok(self.axis.map(|x| x / n))
    }
}

/// Scene with its two detectors placed symmetrically about their midpoint, `baseline` apart.
pub fn place_detectors(scene: &OpticalScene, axis: &Vec3, baseline: f64) -> Result<OpticalScene> {
    let d = scene.detectors();
    if d.len() != 2 {
        return Err(Error::Scene(format!("baseline placement needs 2 detectors, got {}", d.len())));
    }
    let mid: Vec3 = std::array::from_fn(|k| 0.5 * (d[0].position[k] + d[1].position[k]));
    let a: Vec3 = std::array::from_fn(|k| mid[k] - 0.5 * baseline * axis[k]);
    let b: Vec3 = std::array::from_fn(|k| mid[k] + 0.5 * baseline * axis[k]);
    scene.with_detector_positions(&[a, b])
}

/// Scan any rate function over detector baseline.
pub fn scan_with<F>(scene: &OpticalScene, spec: &ScanSpec, rate: F) -> Result<VisibilityCurve>
where
    F: Fn(&OpticalScene) -> Result<RateResult> + Sync,
{
    let axis = spec.unit_axis()?;
    let baselines = spec.baselines()?;
    let rates = baselines
        .par_iter()
        .map(|&b| rate(&place_detectors(scene, &axis, b)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(VisibilityCurve::from_samples(baselines, &rates))
}

/// Scan the (pairwise-summed) scalar rate over detector baseline.
pub fn scan_baseline(scene: &OpticalScene, spec: &ScanSpec) -> Result<VisibilityCurve> {
    scan_with(scene, spec, pairwise_rate)
}

/// `count` point emitters spread uniformly over `width` along `axis`, centred on `center`.
pub fn extended_source(center: Vec3, axis: Vec3, width: f64, count: usize, wavelength: f64) -> Result<Vec<Emitter>> {
    if count < 2 {
        return Err(Error::InvalidArgument("an extended source needs at least 2 emitters".into()));
    }
    let n = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 0.0) {
        return Err(Error::InvalidArgument("extended-source axis has zero length".into()));
    }
    Ok((0..count)
        .map(|k| {
            let s = -0.5 * width + width * k as f64 / (count - 1) as f64;
            Emitter::photon(std::array::from_fn(|i| center[i] + s * axis[i] / n), wavelength)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Detector, PropagatorModel};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn coincident_sources_double_the_direct_rate() {
        let (a, b) = (c(0.3, -0.4), c(1.2, 0.7));
        let r = rate_from_propagators(&Propagators::new(a, b, a, b));
        let expected = 4.0 * a.norm_sqr() * b.norm_sqr();
        assert!((r.total - expected).abs() < 1e-14);
        assert!((r.total - 2.0 * r.direct).abs() < 1e-14);
    }

    #[test]
    fn fully_destructive() {
        let p = Propagators::new(c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(-1.0, 0.0));
        assert!((p.d1a * p.d2b + p.d2a * p.d1b).norm() < 1e-15);
        assert!(rate_from_propagators(&p).total.abs() < 1e-15);
    }

    fn two_point(d: f64, l: f64, b: f64, wavelength: f64) -> OpticalScene {
        OpticalScene::new(
            vec![Emitter::photon([-d / 2.0, 0.0, l], wavelength), Emitter::photon([d / 2.0, 0.0, l], wavelength)],
            vec![Detector::at([-b / 2.0, 0.0, 0.0]), Detector::at([b / 2.0, 0.0, 0.0])],
        )
        .unwrap()
    }

    #[test]
    fn wrong_counts_rejected() {
        let s = OpticalScene::new(
            vec![Emitter::photon([0.0, 0.0, 1.0], 1.0); 3],
            vec![Detector::at([0.0; 3]), Detector::at([1.0, 0.0, 0.0])],
        )
        .unwrap();
        assert!(hbt_rate(&s).is_err());
        assert!(phase_noise_envelope(&s.with_phase_noise(true), 4).is_err());
    }

    #[test]
    fn single_realization_mean_is_the_sample() {
        let s = two_point(1e-3, 1.0, 2e-4, 5e-7).with_phase_noise(true).with_seed(5);
        let st = phase_noise_envelope(&s, 1).unwrap();
        assert_eq!(st.mean_total, st.totals[0]);
        assert!(phase_noise_envelope(&s, 0).is_err());
    }

    #[test]
    fn geometric_phase_matches_direct_evaluation() {
        let (d, l, b, lambda) = (2e-3, 10.0, 3e-3, 6e-7);
        let s = two_point(d, l, b, lambda);
        let r = hbt_rate(&s).unwrap();
        let k = std::f64::consts::TAU / lambda;
        let dist = |x: f64, y: f64| ((x - y).powi(2) + l * l).sqrt();
        let amp = |x: f64, y: f64| C64::from_polar(1.0 / dist(x, y), k * dist(x, y));
        let (x1, x2, xa, xb) = (-d / 2.0, d / 2.0, -b / 2.0, b / 2.0);
        let total = (amp(x1, xa) * amp(x2, xb) + amp(x2, xa) * amp(x1, xb)).norm_sqr();
        assert!((r.total - total).abs() <= 1e-12 * total);
        // small-angle: crossed/direct ~ cos(k d b / L)
        let ratio = r.crossed / r.direct;
        assert!((ratio - (k * d * b / l).cos()).abs() < 1e-3, "{ratio}");
    }

    #[test]
    fn coincident_sources_keep_full_coherence_across_a_scan() {
        let s = OpticalScene::new(
            vec![Emitter::photon([0.0, 0.0, 1.0], 5e-7), Emitter::photon([0.0, 0.0, 1.0], 5e-7)],
            vec![Detector::at([-1e-4, 0.0, 0.0]), Detector::at([1e-4, 0.0, 0.0])],
        )
        .unwrap();
        let spec = ScanSpec { axis: [1.0, 0.0, 0.0], from: 1e-5, to: 5e-3, steps: 200 };
        let curve = scan_baseline(&s, &spec).unwrap();
        assert!(curve.crossed.iter().zip(&curve.direct).all(|(c, d)| (c - d).abs() <= 1e-12 * d));
        assert!((curve.max_coherence - 1.0).abs() < 1e-12);
        assert_eq!(curve.fringe_spacing, None);
    }

    #[test]
    fn pure_phase_two_point_visibility_is_one() {
        let s = two_point(1e-3, 1.0, 1e-4, 5e-7).with_model(PropagatorModel::PurePhase);
        // crossed = 2 cos(2 pi b / 0.5mm); grid hits b = 0.25 mm exactly at k = 25
        let spec = ScanSpec { axis: [1.0, 0.0, 0.0], from: 0.0, to: 1e-3, steps: 101 };
        let curve = scan_baseline(&s, &spec).unwrap();
        assert!((curve.visibility - 1.0).abs() < 1e-9, "{}", curve.visibility);
    }

    #[test]
    fn degenerate_axis_rejected() {
        let s = two_point(1e-3, 1.0, 1e-4, 5e-7);
        let spec = ScanSpec { axis: [0.0; 3], from: 0.0, to: 1.0, steps: 4 };
        assert!(scan_baseline(&s, &spec).is_err());
        let spec = ScanSpec { axis: [1.0, 0.0, 0.0], from: 1.0, to: 0.0, steps: 4 };
        assert!(scan_baseline(&s, &spec).is_err());
        let spec = ScanSpec { axis: [1.0, 0.0, 0.0], from: 0.0, to: 1.0, steps: 1 };
        assert!(scan_baseline(&s, &spec).is_err());
    }

    #[test]
    fn pairwise_rate_of_two_is_hbt() {
        let s = two_point(1e-3, 1.0, 1e-4, 5e-7);
        assert_eq!(pairwise_rate(&s).unwrap(), hbt_rate(&s).unwrap());
    }
}
