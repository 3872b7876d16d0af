//! Drift and noise coefficients of the five models.
//!
//! Every drift has the node-wise form `u × G(u)`; the time integrators rely
//! on that structure. Itô corrections are provided for the Itô-mode scheme
//! only; the rotation scheme never adds them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{NoiseIntensity, SphereField};
use crate::grid::Grid1D;
use crate::vec3::{self, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Deterministic Schrödinger map equation.
    Sme,
    /// LLG with damping `ν` and noise `√ν h u × ∘dW`.
    LlgFlucDiss,
    /// LLG with damping `ν` and noise `(√ν h + 1) u × ∘dW`.
    LlgModified,
    /// Schrödinger map with space-constant noise `u × ∘dW`.
    Ssme,
    /// `dy = y × ∘dW`, no spatial coupling.
    SphericalBm,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Sme => "sme",
            ModelKind::LlgFlucDiss => "llg_fluc_diss",
            ModelKind::LlgModified => "llg_modified",
            ModelKind::Ssme => "ssme",
            ModelKind::SphericalBm => "spherical_bm",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub nu: f64,
    pub h: NoiseIntensity,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, nu: f64, h: NoiseIntensity) -> Result<Self> {
        if !(0.0..=1.0).contains(&nu) {
            return Err(Error::Config(format!("viscosity nu must lie in [0, 1], got {nu}")));
        }
        Ok(Self { kind, nu, h })
    }

    pub fn grid(&self) -> &Grid1D {
        self.h.grid()
    }

    /// Coefficient of the damping term `−ν u × (u × ∂²u)`.
    pub fn damping(&self) -> f64 {
        match self.kind {
            ModelKind::LlgFlucDiss | ModelKind::LlgModified => self.nu,
            _ => 0.0,
        }
    }

    pub fn has_exchange(&self) -> bool {
        self.kind != ModelKind::SphericalBm
    }
}

/// `u × ∂²u`
pub fn drift_sme(u: &SphereField) -> Vec<Vec3> {
    let lap = u.grid().d2_neumann(u.values()).expect("field on its own grid");
    u.values().iter().zip(&lap).map(|(a, b)| vec3::cross(*a, *b)).collect()
}

/// Full deterministic drift (without Itô correction).
pub fn drift_model(u: &SphereField, spec: &ModelSpec) -> Result<Vec<Vec3>> {
    spec.grid().check_len(u.values().len(), "field")?;
    if !spec.has_exchange() {
        return Ok(vec![vec3::ZERO; u.values().len()]);
    }
    let nu = spec.damping();
    let lap = u.grid().d2_neumann(u.values())?;
    Ok(u.values()
        .iter()
        .zip(&lap)
        .map(|(a, l)| {
            let prec = vec3::cross(*a, *l);
            if nu == 0.0 {
                prec
            } else {
                vec3::axpy(prec, -nu, vec3::cross(*a, prec))
            }
        })
        .collect())
}

/// Writes `G(m) = ∂²m − ν m × ∂²m` so that the drift is `m × G(m)`.
/// `lap` is scratch space of the same length as `m`.
#[inline]
pub(crate) fn drift_generator_into(grid: &Grid1D, nu: f64, m: &[Vec3], lap: &mut [Vec3], out: &mut [Vec3]) {
    grid.d2_into(m, lap);
    if nu == 0.0 {
        out.copy_from_slice(lap);
    } else {
        for ((o, l), mi) in out.iter_mut().zip(lap.iter()).zip(m) {
            *o = vec3::axpy(*l, -nu, vec3::cross(*mi, *l));
        }
    }
}

/// Node-wise multiplicative noise coefficient `g(x)`.
pub fn noise_coefficient(spec: &ModelSpec) -> Vec<f64> {
    let h = spec.h.values();
    let s = spec.nu.sqrt();
    match spec.kind {
        ModelKind::Sme => vec![0.0; h.len()],
        ModelKind::LlgFlucDiss => h.iter().map(|v| s * v).collect(),
        ModelKind::LlgModified => h.iter().map(|v| s * v + 1.0).collect(),
        ModelKind::Ssme | ModelKind::SphericalBm => vec![1.0; h.len()],
    }
}

/// Itô–Stratonovich correction `−g² u` for rotation noise with coefficient `g`.
pub fn ito_correction(u: &SphereField, spec: &ModelSpec) -> Result<Vec<Vec3>> {
    spec.grid().check_len(u.values().len(), "field")?;
    let g = noise_coefficient(spec);
    Ok(u.values().iter().zip(&g).map(|(v, gi)| vec3::scale(*v, -gi * gi)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_initial, InitialCondition};
    use std::f64::consts::PI;

    fn setup(n: usize) -> (Grid1D, SphereField, NoiseIntensity) {
        let g = Grid1D::new(2.0 * PI, n).unwrap();
        let u = make_initial(&InitialCondition::GreatCircleProfile { amplitude: 0.5 }, g).unwrap();
        let h = NoiseIntensity::cosine(g, 0.1, 1).unwrap();
        (g, u, h)
    }

    #[test]
    fn nu_outside_unit_interval_is_rejected() {
        let (_, _, h) = setup(9);
        assert!(ModelSpec::new(ModelKind::LlgFlucDiss, 1.5, h.clone()).is_err());
        assert!(ModelSpec::new(ModelKind::LlgFlucDiss, -0.1, h).is_err());
    }

    #[test]
    fn sme_drift_is_tangent_and_averages_to_zero() {
        let (g, u, _) = setup(129);
        let d = drift_sme(&u);
        for (di, ui) in d.iter().zip(u.values()) {
            assert!(vec3::dot(*di, *ui).abs() <= 1e-14);
        }
        assert!(vec3::norm(g.space_average(&d).unwrap()) < 1e-12);

        let c = make_initial(&InitialCondition::Constant { q: vec3::E3 }, g).unwrap();
        assert!(drift_sme(&c).iter().all(|v| *v == vec3::ZERO));
    }

    #[test]
    fn zero_viscosity_reduces_to_sme() {
        let (_, u, h) = setup(65);
        let spec = ModelSpec::new(ModelKind::LlgFlucDiss, 0.0, h.clone()).unwrap();
        assert_eq!(drift_model(&u, &spec).unwrap(), drift_sme(&u));
        let sme = ModelSpec::new(ModelKind::Sme, 0.0, h).unwrap();
        assert_eq!(drift_model(&u, &sme).unwrap(), drift_sme(&u));
        assert_eq!(noise_coefficient(&spec), noise_coefficient(&sme));
    }

    #[test]
    fn damped_drift_is_orthogonal_to_u() {
        let (_, u, h) = setup(65);
        let spec = ModelSpec::new(ModelKind::LlgFlucDiss, 0.7, h).unwrap();
        for (d, v) in drift_model(&u, &spec).unwrap().iter().zip(u.values()) {
            assert!(vec3::dot(*d, *v).abs() <= 1e-13 * vec3::norm(*d).max(1e-300));
        }
    }

    #[test]
    fn damping_matches_harmonic_map_form() {
        // at ν = 1 the damping part is −u×(u×∂²u) = ∂²u + u|∂u|² + O(dx²)
        let mut prev = f64::INFINITY;
        for n in [65, 129, 257] {
            let (g, u, h) = setup(n);
            let full = drift_model(&u, &ModelSpec::new(ModelKind::LlgFlucDiss, 1.0, h).unwrap()).unwrap();
            let prec = drift_sme(&u);
            let d1 = g.d1_neumann(u.values()).unwrap();
            let d2 = g.d2_neumann(u.values()).unwrap();
            let err = (1..n - 1)
                .map(|i| {
                    let damping = vec3::sub(full[i], prec[i]);
                    let expected = vec3::axpy(d2[i], vec3::norm_sq(d1[i]), u.values()[i]);
                    vec3::max_abs_diff(damping, expected)
                })
                .fold(0.0, f64::max);
            assert!(err < prev / 3.0, "n {n} err {err}");
            prev = err;
        }
    }

    #[test]
    fn constant_field_has_no_drift() {
        let (g, _, h) = setup(17);
        let c = make_initial(&InitialCondition::Constant { q: vec3::E2 }, g).unwrap();
        for kind in [ModelKind::Sme, ModelKind::LlgFlucDiss, ModelKind::LlgModified, ModelKind::Ssme] {
            let spec = ModelSpec::new(kind, 0.4, h.clone()).unwrap();
            assert!(drift_model(&c, &spec).unwrap().iter().all(|v| vec3::norm(*v) == 0.0));
        }
    }

    #[test]
    fn noise_coefficients() {
        let (g, _, h) = setup(33);
        let fd0 = ModelSpec::new(ModelKind::LlgFlucDiss, 0.0, h.clone()).unwrap();
        assert!(noise_coefficient(&fd0).iter().all(|v| *v == 0.0));
        let m0 = ModelSpec::new(ModelKind::LlgModified, 0.0, h.clone()).unwrap();
        assert!(noise_coefficient(&m0).iter().all(|v| *v == 1.0));
        let fd1 = ModelSpec::new(ModelKind::LlgFlucDiss, 1.0, h.clone()).unwrap();
        for (gi, x) in noise_coefficient(&fd1).iter().zip(g.nodes()) {
            assert!((gi - 0.1 * x.cos()).abs() < 1e-15);
        }
        let sbm = ModelSpec::new(ModelKind::SphericalBm, 0.0, h).unwrap();
        assert!(noise_coefficient(&sbm).iter().all(|v| *v == 1.0));
    }

    #[test]
    fn ito_correction_cases() {
        let g = Grid1D::new(1.0, 5).unwrap();
        let u = make_initial(&InitialCondition::Constant { q: vec3::E1 }, g).unwrap();
        let one = NoiseIntensity::constant(g, 1.0);
        let spec = ModelSpec::new(ModelKind::LlgFlucDiss, 1.0, one.clone()).unwrap();
        assert!(ito_correction(&u, &spec).unwrap().iter().all(|v| *v == [-1.0, 0.0, 0.0]));
        let sme = ModelSpec::new(ModelKind::Sme, 0.0, one.clone()).unwrap();
        assert!(ito_correction(&u, &sme).unwrap().iter().all(|v| vec3::norm(*v) == 0.0));
        let m0 = ModelSpec::new(ModelKind::LlgModified, 0.0, NoiseIntensity::constant(g, 0.3)).unwrap();
        assert!(ito_correction(&u, &m0).unwrap().iter().all(|v| *v == [-1.0, 0.0, 0.0]));
    }

    #[test]
    fn ito_correction_is_antiparallel() {
        let (_, u, h) = setup(33);
        let spec = ModelSpec::new(ModelKind::LlgModified, 0.3, h).unwrap();
        let g = noise_coefficient(&spec);
        let c = ito_correction(&u, &spec).unwrap();
        for i in 0..c.len() {
            assert_eq!(vec3::axpy(c[i], g[i] * g[i], u.values()[i]), vec3::ZERO);
        }
    }
}
