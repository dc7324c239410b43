//! Polarization-resolved coincidence rates.
//!
//! With source density matrices `pi1`, `pi2` and detector projectors `PA`, `PB`
//! the two processes contribute
//!
//! ```text
//! direct  = Tr(PA pi1) Tr(PB pi2) |D1A|^2 |D2B|^2 + Tr(PA pi2) Tr(PB pi1) |D2A|^2 |D1B|^2
//! crossed = Tr(PA pi1 PB pi2) D1A D2B D2A* D1B* + c.c.
//! ```
//!
//! The family of crossed traces over projector choices is the linked
//! polarization; at `PA = PB = 1` it is the cross-polarization `Tr(pi1 pi2)`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude::{self, c, trace_of_product, CMatrix, IDENTITY_TOL};
use crate::error::{Error, Result};
use crate::hbt::{two_by_two, Propagators, RateResult};
use crate::scene::OpticalScene;

/// Tolerance on the norm of pure polarization vectors.
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// A 2x2 polarization matrix: a source density matrix or a detector projector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolMatrix(CMatrix);

impl PolMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.shape() != (2, 2) {
            return Err(Error::Shape(format!("polarization matrix must be 2x2, got {:?}", m.shape())));
        }
        Ok(Self(m))
    }

    pub fn from_2x2(m: [[C64; 2]; 2]) -> Self {
        Self(CMatrix::from_2x2(m))
    }

    pub fn identity() -> Self {
        Self(CMatrix::identity(2).expect("2x2"))
    }

    /// `I / 2`.
    pub fn unpolarized() -> Self {
        Self(CMatrix::identity(2).expect("2x2").scale(c(0.5, 0.0)))
    }

    pub fn pure(ket: [C64; 2]) -> Self {
        Self(amplitude::projector(&ket))
    }

    pub fn horizontal() -> Self {
        Self::pure(amplitude::ket_h())
    }

    pub fn vertical() -> Self {
        Self::pure(amplitude::ket_v())
    }

    /// Linear polarization at angle `chi` from horizontal.
    pub fn linear(chi: f64) -> Self {
        Self::pure([c(chi.cos(), 0.0), c(chi.sin(), 0.0)])
    }

    /// `|psi><psi|` with `|psi> = (cos(theta/2), e^{i phi} sin(theta/2))`.
    pub fn poincare(theta: f64, phi: f64) -> Self {
        Self::pure([c((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi)])
    }

    /// Density matrix `(I + r . sigma) / 2` for a Bloch vector `r`.
    pub fn from_bloch(r: [f64; 3]) -> Self {
        Self::from_2x2([
            [c(0.5 * (1.0 + r[2]), 0.0), c(0.5 * r[0], -0.5 * r[1])],
            [c(0.5 * r[0], 0.5 * r[1]), c(0.5 * (1.0 - r[2]), 0.0)],
        ])
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn check_density(&self, what: &str) -> Result<()> {
        let report = amplitude::validate_density(&self.0, IDENTITY_TOL)?;
        if report.passed {
            Ok(())
        } else {
            Err(Error::validation(what, report.failures(IDENTITY_TOL)))
        }
    }

    pub fn check_projector(&self, what: &str) -> Result<()> {
        let report = amplitude::validate_projector(&self.0, IDENTITY_TOL)?;
        if report.passed {
            Ok(())
        } else {
            Err(Error::validation(what, report.failures(IDENTITY_TOL, 2)))
        }
    }
}

/// The traces that weight each term of the polarized rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolCoefficients {
    /// `Tr(PA pi1)`.
    pub a1: f64,
    /// `Tr(PB pi2)`.
    pub b2: f64,
    /// `Tr(PA pi2)`.
    pub a2: f64,
    /// `Tr(PB pi1)`.
    pub b1: f64,
    /// `Tr(PA pi1 PB pi2)`, weighting `D1A D2B D2A* D1B*`.
    pub crossed: C64,
    /// `Tr(PA pi2 PB pi1)`, weighting the conjugate product.
    pub crossed_conj: C64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolRateResult {
    pub direct: f64,
    pub crossed: f64,
    pub total: f64,
    pub coefficients: PolCoefficients,
    /// `2 |Tr(PA pi1 PB pi2) D1A D2B D2A* D1B*| / direct`: the fringe
    /// contrast reached when the relative geometric phase is swept.
    pub visibility: f64,
}

impl PolRateResult {
    pub fn rate(&self) -> RateResult {
        RateResult { direct: self.direct, crossed: self.crossed, total: self.total }
    }
}

pub fn coefficients(pi1: &PolMatrix, pi2: &PolMatrix, pa: &PolMatrix, pb: &PolMatrix) -> Result<PolCoefficients> {
    let tr = |x: &PolMatrix, y: &PolMatrix| trace_of_product(&[x.matrix(), y.matrix()]);
    let (a1, b2, a2, b1) = (tr(pa, pi1)?, tr(pb, pi2)?, tr(pa, pi2)?, tr(pb, pi1)?);
    for (name, t) in [("Tr(PA pi1)", a1), ("Tr(PB pi2)", b2), ("Tr(PA pi2)", a2), ("Tr(PB pi1)", b1)] {
        debug_assert!(t.im.abs() <= 1e-12 && t.re >= -1e-12, "{name} = {t}");
    }
    let crossed = trace_of_product(&[pa.matrix(), pi1.matrix(), pb.matrix(), pi2.matrix()])?;
    let crossed_conj = trace_of_product(&[pa.matrix(), pi2.matrix(), pb.matrix(), pi1.matrix()])?;
    Ok(PolCoefficients { a1: a1.re, b2: b2.re, a2: a2.re, b1: b1.re, crossed, crossed_conj })
}

fn validate_inputs(pi1: &PolMatrix, pi2: &PolMatrix, pa: &PolMatrix, pb: &PolMatrix) -> Result<()> {
    pi1.check_density("pi1")?;
    pi2.check_density("pi2")?;
    pa.check_projector("projector A")?;
    pb.check_projector("projector B")
}

/// Polarized rate for explicit propagators; inputs are validated.
pub fn pol_rate_from_propagators(
    p: &Propagators,
    pi1: &PolMatrix,
    pi2: &PolMatrix,
    pa: &PolMatrix,
    pb: &PolMatrix,
) -> Result<PolRateResult> {
    validate_inputs(pi1, pi2, pa, pb)?;
    Ok(assemble(p, coefficients(pi1, pi2, pa, pb)?))
}

fn assemble(p: &Propagators, k: PolCoefficients) -> PolRateResult {
    let direct = k.a1 * k.b2 * p.first_process() + k.a2 * k.b1 * p.second_process();
    let x = p.interference();
    let crossed = (k.crossed * x + k.crossed_conj * x.conj()).re;
    let visibility = if direct > 0.0 { 2.0 * (k.crossed * x).norm() / direct } else { 0.0 };
    PolRateResult { direct, crossed, total: direct + crossed, coefficients: k, visibility }
}

pub fn pol_rate(
    scene: &OpticalScene,
    pi1: &PolMatrix,
    pi2: &PolMatrix,
    pa: &PolMatrix,
    pb: &PolMatrix,
) -> Result<PolRateResult> {
    two_by_two(scene)?;
    pol_rate_from_propagators(&Propagators::from_scene(scene)?, pi1, pi2, pa, pb)
}

/// Polarized rate using the scene's own emitter polarizations and detector
/// projectors. A missing polarization counts as unpolarized, a missing
/// projector as the identity.
pub fn scene_pol_rate(scene: &OpticalScene) -> Result<PolRateResult> {
    two_by_two(scene)?;
    let e = scene.emitters();
    let d = scene.detectors();
    let pol = |m: &Option<PolMatrix>, default: PolMatrix| m.clone().unwrap_or(default);
    pol_rate(
        scene,
        &pol(&e[0].polarization, PolMatrix::unpolarized()),
        &pol(&e[1].polarization, PolMatrix::unpolarized()),
        &pol(&d[0].projector, PolMatrix::identity()),
        &pol(&d[1].projector, PolMatrix::identity()),
    )
}

fn check_unit(v: &[C64; 2], what: &str) -> Result<()> {
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    if (n - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::validation(what, vec![format!("normalization (|v| = {n})")]));
    }
    Ok(())
}

/// Rate for pure polarization states `(alpha, beta)` and `(gamma, delta)`.
pub fn pure_pol_rate(
    scene: &OpticalScene,
    first: [C64; 2],
    second: [C64; 2],
    pa: &PolMatrix,
    pb: &PolMatrix,
) -> Result<PolRateResult> {
    check_unit(&first, "first polarization vector")?;
    check_unit(&second, "second polarization vector")?;
    pol_rate(scene, &PolMatrix::pure(first), &PolMatrix::pure(second), pa, pb)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProjectorFamily {
    /// `theta` on `n_theta` points spanning `[0, pi]`, `phi` on `n_phi` points over `[0, 2 pi)`.
    Poincare { n_theta: usize, n_phi: usize },
    /// Linear polarizers at angles `k pi / n`, `k = 0..n`.
    Linear { n: usize },
}

impl Default for ProjectorFamily {
    fn default() -> Self {
        ProjectorFamily::Poincare { n_theta: 17, n_phi: 17 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectorLabel {
    /// Polar angle on the Poincare sphere.
    pub theta: f64,
    pub phi: f64,
}

impl ProjectorFamily {
    pub fn members(&self) -> Result<Vec<(ProjectorLabel, PolMatrix)>> {
        let labels: Vec<ProjectorLabel> = match *self {
            ProjectorFamily::Poincare { n_theta, n_phi } => {
                if n_theta == 0 || n_phi == 0 {
                    return Err(Error::InvalidArgument("empty projector grid".into()));
                }
                let dt = if n_theta > 1 { PI / (n_theta - 1) as f64 } else { 0.0 };
                (0..n_theta)
                    .flat_map(|i| {
                        (0..n_phi).map(move |j| ProjectorLabel { theta: dt * i as f64, phi: TAU * j as f64 / n_phi as f64 })
                    })
                    .collect()
            }
            ProjectorFamily::Linear { n } => {
                if n == 0 {
                    return Err(Error::InvalidArgument("empty projector grid".into()));
                }
                (0..n).map(|k| ProjectorLabel { theta: TAU * k as f64 / n as f64, phi: 0.0 }).collect()
            }
        };
        Ok(labels.into_iter().map(|l| (l, PolMatrix::poincare(l.theta, l.phi))).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkedPolarizationMap {
    pub projectors: Vec<ProjectorLabel>,
    /// `values[i][j] = Tr(P_i pi1 P_j pi2)` with `P_i` at detector A, `P_j` at B.
    pub values: Vec<Vec<C64>>,
    /// Cross-polarization `Tr(pi1 pi2)`, the `PA = PB = 1` entry.
    pub cross_polarization: C64,
}

impl LinkedPolarizationMap {
    /// Position and value of the entry with the largest modulus.
    pub fn max_entry(&self) -> (usize, usize, C64) {
        let mut best = (0, 0, C64::new(0.0, 0.0));
        for (i, row) in self.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if v.norm() > best.2.norm() {
                    best = (i, j, *v);
                }
            }
        }
        best
    }
}

pub fn linked_polarization_map(pi1: &PolMatrix, pi2: &PolMatrix, family: &ProjectorFamily) -> Result<LinkedPolarizationMap> {
    pi1.check_density("pi1")?;
    pi2.check_density("pi2")?;
    let members = family.members()?;
    let values = members
        .par_iter()
        .map(|(_, pa)| {
            members
                .iter()
                .map(|(_, pb)| trace_of_product(&[pa.matrix(), pi1.matrix(), pb.matrix(), pi2.matrix()]))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let cross_polarization = trace_of_product(&[pi1.matrix(), pi2.matrix()])?;
    Ok(LinkedPolarizationMap {
        projectors: members.into_iter().map(|(l, _)| l).collect(),
        values,
        cross_polarization,
    })
}
