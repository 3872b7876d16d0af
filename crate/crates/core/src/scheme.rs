//! Sphere-preserving time integration.
//!
//! `StrangRotation` splits each step into half a drift step, an exact
//! node-wise rotation for the Stratonovich noise, and another half drift
//! step. The drift substep is the implicit midpoint rule, solved by fixed
//! point; each iterate is applied as a Cayley rotation so node norms are
//! preserved even before the iteration has converged.
//!
//! `EulerItoProjected` is an Itô Euler–Maruyama step followed by projection
//! onto the sphere, kept only as an independent weak cross-check.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, ModelSpec};
use crate::error::{Error, Result};
use crate::field::{project_sphere, SphereField};
use crate::grid::Grid1D;
use crate::rng::{derive_substream, Substream, SubstreamPosition};
use crate::vec3::{self, Vec3};

const ROTATION_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    StrangRotation,
    EulerItoProjected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub dt: f64,
    pub kind: SchemeKind,
    #[serde(default = "default_fp_tol")]
    pub fp_tol: f64,
    #[serde(default = "default_fp_max_iter")]
    pub fp_max_iter: usize,
}

fn default_fp_tol() -> f64 {
    1e-12
}

fn default_fp_max_iter() -> usize {
    50
}

impl SchemeConfig {
    pub fn new(dt: f64, kind: SchemeKind) -> Result<Self> {
        let cfg = Self { dt, kind, fp_tol: default_fp_tol(), fp_max_iter: default_fp_max_iter() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn strang(dt: f64) -> Result<Self> {
        Self::new(dt, SchemeKind::StrangRotation)
    }

    /// `0.2 dx²`, the stiffness heuristic for the exchange term.
    pub fn default_dt(grid: &Grid1D) -> f64 {
        0.2 * grid.dx() * grid.dx()
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.dt.is_finite() && self.dt > 0.0) {
            problems.push(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.fp_tol > 0.0 && self.fp_tol < 1e-6) {
            problems.push(format!("fp_tol must lie in (0, 1e-6), got {}", self.fp_tol));
        }
        if self.fp_max_iter == 0 {
            problems.push("fp_max_iter must be at least 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// Rodrigues rotation of `v` by the rotation vector `omega`.
#[inline]
pub fn rotate(v: Vec3, omega: Vec3) -> Vec3 {
    let angle = vec3::norm(omega);
    if angle < ROTATION_FLOOR {
        return v;
    }
    let k = vec3::scale(omega, 1.0 / angle);
    let (s, c) = angle.sin_cos();
    let kxv = vec3::cross(k, v);
    let kdv = vec3::dot(k, v);
    [
        v[0] * c + kxv[0] * s + k[0] * kdv * (1.0 - c),
        v[1] * c + kxv[1] * s + k[1] * kdv * (1.0 - c),
        v[2] * c + kxv[2] * s + k[2] * kdv * (1.0 - c),
    ]
}

/// Node-wise rotation `u_i ↦ R(omega_i) u_i`.
pub fn rotation_step(u: &SphereField, omega: &[Vec3]) -> Result<SphereField> {
    u.grid().check_len(omega.len(), "rotation field")?;
    let values = u.values().iter().zip(omega).map(|(v, w)| rotate(*v, *w)).collect();
    Ok(SphereField::from_unit_unchecked(*u.grid(), values))
}

/// Solves `u' − u = (u + u') × a` for `u'`; this is the orthogonal Cayley
/// map, so `|u'| = |u|`.
#[inline(always)]
fn cayley(u: Vec3, a: Vec3) -> Vec3 {
    let b = vec3::scale(a, -1.0);
    let bxu = vec3::cross(b, u);
    let bxbxu = vec3::cross(b, bxu);
    let f = 2.0 / (1.0 + vec3::norm_sq(b));
    [u[0] + f * (bxu[0] + bxbxu[0]), u[1] + f * (bxu[1] + bxbxu[1]), u[2] + f * (bxu[2] + bxbxu[2])]
}

#[inline(always)]
fn midpoint_node(u: Vec3, lap: Vec3, m: Vec3, nu: f64, half: f64) -> Vec3 {
    let g = if nu == 0.0 { lap } else { vec3::axpy(lap, -nu, vec3::cross(m, lap)) };
    cayley(u, vec3::scale(g, half))
}

/// One fixed-point update `trial_i = Cayley(u_i, (dt_eff/2)·G(mid)_i)` with
/// the mirrored Laplacian inlined; returns `max |trial − prev|`.
fn midpoint_sweep(u: &[Vec3], mid: &[Vec3], prev: &[Vec3], trial: &mut [Vec3], nu: f64, half: f64, c: f64) -> f64 {
    let n = u.len();
    let mut inc = 0.0f64;
    let ends = [(0, 1), (n - 1, n - 2)];
    for (i, j) in ends {
        let lap = vec3::scale(vec3::sub(mid[j], mid[i]), 2.0 * c);
        trial[i] = midpoint_node(u[i], lap, mid[i], nu, half);
        inc = inc.max(vec3::max_abs_diff(trial[i], prev[i]));
    }
    for (((w, ui), t), p) in mid.windows(3).zip(&u[1..n - 1]).zip(&mut trial[1..n - 1]).zip(&prev[1..n - 1]) {
        let (a, b, d) = (w[0], w[1], w[2]);
        let lap = [(d[0] - 2.0 * b[0] + a[0]) * c, (d[1] - 2.0 * b[1] + a[1]) * c, (d[2] - 2.0 * b[2] + a[2]) * c];
        *t = midpoint_node(*ui, lap, b, nu, half);
        inc = inc.max(vec3::max_abs_diff(*t, *p));
    }
    inc
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    mid: Vec<Vec3>,
    lap: Vec<Vec3>,
    generator: Vec<Vec3>,
    next: Vec<Vec3>,
    trial: Vec<Vec3>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        let z = vec![vec3::ZERO; n];
        Self { mid: z.clone(), lap: z.clone(), generator: z.clone(), next: z.clone(), trial: z }
    }
}

/// One stochastic trajectory: time, field, random substream and scratch.
#[derive(Debug, Clone)]
pub struct TrajectoryState {
    t: f64,
    /// `t = origin + steps·dt` after every full step.
    origin: f64,
    steps: u64,
    u: SphereField,
    rng: Substream,
    spec: ModelSpec,
    scheme: SchemeConfig,
    g: Vec<f64>,
    max_fp_iterations: usize,
    projections: u64,
    scratch: Scratch,
}

impl TrajectoryState {
    pub fn new(u: SphereField, spec: ModelSpec, scheme: SchemeConfig, rng: Substream) -> Result<Self> {
        scheme.validate()?;
        if u.grid() != spec.grid() {
            return Err(Error::Config("initial field and noise intensity live on different grids".into()));
        }
        let g = dynamics::noise_coefficient(&spec);
        let n = u.values().len();
        Ok(Self {
            t: 0.0,
            origin: 0.0,
            steps: 0,
            u,
            rng,
            spec,
            scheme,
            g,
            max_fp_iterations: 0,
            projections: 0,
            scratch: Scratch::new(n),
        })
    }

    /// Starts trajectory `index` of an ensemble keyed by `master_seed`.
    pub fn seeded(u: SphereField, spec: ModelSpec, scheme: SchemeConfig, master_seed: u64, index: u64) -> Result<Self> {
        Self::new(u, spec, scheme, derive_substream(master_seed, index))
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn field(&self) -> &SphereField {
        &self.u
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn scheme(&self) -> &SchemeConfig {
        &self.scheme
    }

    pub fn trajectory_index(&self) -> u64 {
        self.rng.index()
    }

    /// Largest number of fixed-point iterations any midpoint solve needed.
    pub fn max_fp_iterations(&self) -> usize {
        self.max_fp_iterations
    }

    /// Number of renormalizations onto the sphere since construction.
    pub fn projections(&self) -> u64 {
        self.projections
    }

    /// Rotates every node by `−g(x_i) ΔW`, the exact flow of
    /// `du = g u × ∘dW` over the substep.
    pub fn noise_substep(&mut self, dw: Vec3) {
        let dw_norm = vec3::norm(dw);
        if dw_norm < ROTATION_FLOOR {
            return;
        }
        let axis = vec3::scale(dw, -1.0 / dw_norm);
        for (v, gi) in self.u.values_mut().iter_mut().zip(&self.g) {
            let angle = gi * dw_norm;
            if angle.abs() < ROTATION_FLOOR {
                continue;
            }
            let (s, c) = angle.sin_cos();
            let kxv = vec3::cross(axis, *v);
            let kdv = vec3::dot(axis, *v) * (1.0 - c);
            *v = [
                v[0] * c + kxv[0] * s + axis[0] * kdv,
                v[1] * c + kxv[1] * s + axis[1] * kdv,
                v[2] * c + kxv[2] * s + axis[2] * kdv,
            ];
        }
    }

    /// Implicit midpoint step `u' = u + dt_eff m × G(m)`, `m = (u + u')/2`.
    pub fn drift_substep_midpoint(&mut self, dt_eff: f64) -> Result<()> {
        if !self.spec.has_exchange() || dt_eff == 0.0 {
            return Ok(());
        }
        let grid = *self.u.grid();
        let nu = self.spec.damping();
        let half = 0.5 * dt_eff;
        let Scratch { mid, lap, generator, next, trial } = &mut self.scratch;
        let u = self.u.values_mut();

        dynamics::drift_generator_into(&grid, nu, u, lap, generator);
        for ((nx, ui), gi) in next.iter_mut().zip(u.iter()).zip(generator.iter()) {
            *nx = cayley(*ui, vec3::scale(*gi, half));
        }
        let c = 1.0 / (grid.dx() * grid.dx());
        let mut increment = f64::INFINITY;
        for iteration in 1..=self.scheme.fp_max_iter {
            for ((m, a), b) in mid.iter_mut().zip(u.iter()).zip(next.iter()) {
                *m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])];
            }
            increment = midpoint_sweep(u, mid, next, trial, nu, half, c);
            std::mem::swap(next, trial);
            if increment <= self.scheme.fp_tol {
                u.copy_from_slice(next);
                self.max_fp_iterations = self.max_fp_iterations.max(iteration);
                return Ok(());
            }
        }
        Err(Error::StepSize { iterations: self.scheme.fp_max_iter, increment })
    }

    fn euler_ito_step(&mut self, dt: f64, dw: Vec3) -> Result<()> {
        let drift = dynamics::drift_model(&self.u, &self.spec)?;
        let raw: Vec<Vec3> = self
            .u
            .values()
            .iter()
            .zip(&drift)
            .zip(&self.g)
            .map(|((v, d), gi)| {
                let ito = vec3::scale(*v, -gi * gi);
                let det = vec3::axpy(*v, dt, vec3::add(*d, ito));
                vec3::axpy(det, *gi, vec3::cross(*v, dw))
            })
            .collect();
        self.u = project_sphere(*self.u.grid(), &raw)?;
        self.projections += 1;
        Ok(())
    }

    fn advance(&mut self, dt: f64) -> Result<()> {
        let dw = self.rng.brownian_increment(dt);
        match self.scheme.kind {
            SchemeKind::StrangRotation => {
                self.drift_substep_midpoint(0.5 * dt)?;
                self.noise_substep(dw);
                self.drift_substep_midpoint(0.5 * dt)?;
            }
            SchemeKind::EulerItoProjected => self.euler_ito_step(dt, dw)?,
        }
        self.steps += 1;
        Ok(())
    }

    /// One full step of size `dt`.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.scheme.dt;
        self.advance(dt)?;
        self.t = self.origin + self.steps as f64 * dt;
        Ok(())
    }

    /// Steps until `t_end` (the last step may be shorter), calling
    /// `observer` after every `sample_stride`-th step counted from the
    /// start of the trajectory.
    pub fn integrate<F>(&mut self, t_end: f64, sample_stride: u64, mut observer: F) -> Result<()>
    where
        F: FnMut(&TrajectoryState) -> std::result::Result<(), String>,
    {
        if t_end < self.t {
            return Err(Error::InvalidInput(format!("t_end {t_end} precedes current time {}", self.t)));
        }
        if sample_stride == 0 {
            return Err(Error::Config("sample_stride must be at least 1".into()));
        }
        let dt = self.scheme.dt;
        let last_full = ((t_end - self.origin) / dt + 1e-9).floor() as u64;
        while self.steps < last_full {
            self.advance(dt).map_err(|e| self.fail(e))?;
            self.t = self.origin + self.steps as f64 * dt;
            self.notify(sample_stride, &mut observer)?;
        }
        let rest = t_end - self.t;
        if rest > 1e-9 * dt {
            self.advance(rest).map_err(|e| self.fail(e))?;
            self.t = t_end;
            self.origin = t_end - self.steps as f64 * dt;
            self.notify(sample_stride, &mut observer)?;
        }
        Ok(())
    }

    fn fail(&self, e: Error) -> Error {
        Error::Trajectory { trajectory: self.rng.index(), t: self.t, source: Box::new(e) }
    }

    fn notify<F>(&self, stride: u64, observer: &mut F) -> Result<()>
    where
        F: FnMut(&TrajectoryState) -> std::result::Result<(), String>,
    {
        if self.steps.is_multiple_of(stride) {
            observer(self).map_err(|message| Error::Observer { t: self.t, message })?;
        }
        Ok(())
    }

    pub fn checkpoint(&self, config_digest: &str) -> Checkpoint {
        Checkpoint {
            version: Checkpoint::VERSION,
            config_digest: config_digest.to_string(),
            t_bits: self.t.to_bits(),
            origin_bits: self.origin.to_bits(),
            steps: self.steps,
            values_bits: self.u.values().iter().map(|v| [v[0].to_bits(), v[1].to_bits(), v[2].to_bits()]).collect(),
            rng: self.rng.position(),
        }
    }

    /// Rebuilds a state from a checkpoint; `spec` and `scheme` must be the
    /// ones the digest was computed from.
    pub fn resume(cp: &Checkpoint, spec: ModelSpec, scheme: SchemeConfig, config_digest: &str) -> Result<Self> {
        if cp.version != Checkpoint::VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {}", cp.version)));
        }
        if cp.config_digest != config_digest {
            return Err(Error::Checkpoint(format!(
                "config digest mismatch: checkpoint {} vs current {config_digest}",
                cp.config_digest
            )));
        }
        let values: Vec<Vec3> =
            cp.values_bits.iter().map(|b| [f64::from_bits(b[0]), f64::from_bits(b[1]), f64::from_bits(b[2])]).collect();
        let u = SphereField::new(*spec.grid(), values)?;
        let mut state = Self::new(u, spec, scheme, Substream::from_position(cp.rng))?;
        state.t = f64::from_bits(cp.t_bits);
        state.origin = f64::from_bits(cp.origin_bits);
        state.steps = cp.steps;
        Ok(state)
    }
}

/// Versioned, bit-exact snapshot of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_digest: String,
    pub t_bits: u64,
    pub origin_bits: u64,
    pub steps: u64,
    pub values_bits: Vec<[u64; 3]>,
    pub rng: SubstreamPosition,
}

impl Checkpoint {
    pub const VERSION: u32 = 1;

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ModelKind;
    use crate::field::{make_initial, InitialCondition, NoiseIntensity};
    use std::f64::consts::PI;

    fn sme_state(n: usize, dt: f64) -> TrajectoryState {
        let g = Grid1D::new(2.0 * PI, n).unwrap();
        let u = make_initial(&InitialCondition::GreatCircleProfile { amplitude: 0.5 }, g).unwrap();
        let spec = ModelSpec::new(ModelKind::Sme, 0.0, NoiseIntensity::constant(g, 0.0)).unwrap();
        TrajectoryState::seeded(u, spec, SchemeConfig::strang(dt).unwrap(), 1, 0).unwrap()
    }

    #[test]
    fn rotation_basics() {
        let g = Grid1D::new(1.0, 3).unwrap();
        let u = SphereField::new(g, vec![vec3::E2; 3]).unwrap();
        assert_eq!(rotation_step(&u, &[vec3::ZERO; 3]).unwrap(), u);
        let r = rotation_step(&u, &[[PI, 0.0, 0.0]; 3]).unwrap();
        for v in r.values() {
            assert!(vec3::max_abs_diff(*v, [0.0, -1.0, 0.0]) < 1e-14);
        }
        // quarter turn about e3 takes e1 to e2 (right-handed)
        assert!(vec3::max_abs_diff(rotate(vec3::E1, [0.0, 0.0, PI / 2.0]), vec3::E2) < 1e-15);
    }

    #[test]
    fn random_rotations_are_isometries() {
        let g = Grid1D::new(1.0, 50).unwrap();
        let mut s = derive_substream(3, 3);
        let raw: Vec<Vec3> = (0..50).map(|_| s.brownian_increment(1.0)).collect();
        let u = project_sphere(g, &raw).unwrap();
        let omega: Vec<Vec3> = (0..50).map(|_| s.brownian_increment(4.0)).collect();
        let r = rotation_step(&u, &omega).unwrap();
        assert!(r.max_norm_deviation() <= 1e-14);
    }

    #[test]
    fn cayley_solves_midpoint_relation() {
        let u = vec3::scale([0.3, -0.5, 0.8], 1.0 / vec3::norm([0.3, -0.5, 0.8]));
        let a = [0.2, 0.7, -0.4];
        let up = cayley(u, a);
        let rhs = vec3::cross(vec3::add(u, up), a);
        assert!(vec3::max_abs_diff(vec3::sub(up, u), rhs) < 1e-15);
        assert!((vec3::norm(up) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_noise_leaves_state_unchanged() {
        let mut s = sme_state(33, 1e-3);
        let before = s.field().clone();
        s.noise_substep([0.3, 0.1, -0.2]);
        assert_eq!(s.field(), &before);
    }

    #[test]
    fn global_rotation_preserves_gradient_and_average() {
        let g = Grid1D::new(2.0 * PI, 65).unwrap();
        let u = make_initial(&InitialCondition::GreatCircleProfile { amplitude: 0.5 }, g).unwrap();
        let spec = ModelSpec::new(ModelKind::Ssme, 0.0, NoiseIntensity::constant(g, 0.0)).unwrap();
        let mut s = TrajectoryState::seeded(u, spec, SchemeConfig::strang(1e-3).unwrap(), 9, 0).unwrap();
        let e0 = g.dirichlet_energy(s.field().values()).unwrap();
        let a0 = vec3::norm(g.space_average(s.field().values()).unwrap());
        s.noise_substep([0.4, -1.1, 0.25]);
        let e1 = g.dirichlet_energy(s.field().values()).unwrap();
        let a1 = vec3::norm(g.space_average(s.field().values()).unwrap());
        assert!((e1 - e0).abs() <= 1e-13 * e0);
        assert!((a1 - a0).abs() <= 1e-13 * a0);
    }

    #[test]
    fn midpoint_on_constant_field() {
        let g = Grid1D::new(1.0, 9).unwrap();
        let u = make_initial(&InitialCondition::Constant { q: vec3::E3 }, g).unwrap();
        let spec = ModelSpec::new(ModelKind::LlgFlucDiss, 0.5, NoiseIntensity::constant(g, 0.0)).unwrap();
        let mut s = TrajectoryState::seeded(u.clone(), spec, SchemeConfig::strang(1e-3).unwrap(), 0, 0).unwrap();
        s.drift_substep_midpoint(1e-3).unwrap();
        assert_eq!(s.field(), &u);
    }

    #[test]
    fn midpoint_preserves_norms_and_solves_midpoint_equation() {
        let mut s = sme_state(65, 1e-4);
        let u0 = s.field().values().to_vec();
        s.drift_substep_midpoint(1e-4).unwrap();
        assert!(s.field().max_norm_deviation() <= 1e-12);
        let g = *s.field().grid();
        let u1 = s.field().values();
        let mid: Vec<Vec3> = u0.iter().zip(u1).map(|(a, b)| vec3::scale(vec3::add(*a, *b), 0.5)).collect();
        let lap = g.d2_neumann(&mid).unwrap();
        for i in 0..mid.len() {
            let rhs = vec3::scale(vec3::cross(mid[i], lap[i]), 1e-4);
            assert!(vec3::max_abs_diff(vec3::sub(u1[i], u0[i]), rhs) < 1e-13);
        }
    }

    #[test]
    fn midpoint_reports_non_convergence() {
        let g = Grid1D::new(1.0, 33).unwrap();
        let u = make_initial(&InitialCondition::GreatCircleProfile { amplitude: 1.0 }, g).unwrap();
        let spec = ModelSpec::new(ModelKind::Sme, 0.0, NoiseIntensity::constant(g, 0.0)).unwrap();
        let mut cfg = SchemeConfig::strang(1.0).unwrap();
        cfg.fp_max_iter = 5;
        let mut s = TrajectoryState::seeded(u, spec, cfg, 0, 0).unwrap();
        assert!(matches!(s.drift_substep_midpoint(1.0), Err(Error::StepSize { .. })));
    }

    fn terminal(dt: f64, t_end: f64) -> Vec<Vec3> {
        let mut s = sme_state(33, dt);
        s.integrate(t_end, u64::MAX, |_| Ok(())).unwrap();
        s.field().values().to_vec()
    }

    fn sup_diff(a: &[Vec3], b: &[Vec3]) -> f64 {
        a.iter().zip(b).map(|(x, y)| vec3::max_abs_diff(*x, *y)).fold(0.0, f64::max)
    }

    #[test]
    fn midpoint_is_second_order_in_time() {
        let t_end = 0.2;
        let reference = terminal(2.5e-4, t_end);
        let e1 = sup_diff(&terminal(4e-3, t_end), &reference);
        let e2 = sup_diff(&terminal(2e-3, t_end), &reference);
        let e3 = sup_diff(&terminal(1e-3, t_end), &reference);
        for (a, b) in [(e1, e2), (e2, e3)] {
            let order = (a / b).log2();
            assert!((1.8..=2.2).contains(&order), "order {order}");
        }
    }

    #[test]
    fn strang_reduces_to_pure_rotation_for_spherical_bm() {
        let g = Grid1D::new(1.0, 3).unwrap();
        let u = make_initial(&InitialCondition::Constant { q: vec3::E3 }, g).unwrap();
        let spec = ModelSpec::new(ModelKind::SphericalBm, 0.0, NoiseIntensity::constant(g, 1.0)).unwrap();
        let mut s = TrajectoryState::seeded(u.clone(), spec, SchemeConfig::strang(0.01).unwrap(), 4, 2).unwrap();
        let mut rng = derive_substream(4, 2);
        let dw = rng.brownian_increment(0.01);
        s.step().unwrap();
        let expected = rotation_step(&u, &[vec3::scale(dw, -1.0); 3]).unwrap();
        for (a, b) in s.field().values().iter().zip(expected.values()) {
            assert!(vec3::max_abs_diff(*a, *b) < 1e-15);
        }
    }

    #[test]
    fn integrate_edge_cases() {
        let mut s = sme_state(17, 1e-2);
        let before = s.field().clone();
        s.integrate(0.0, 1, |_| Ok(())).unwrap();
        assert_eq!(s.field(), &before);
        assert!(s.integrate(-1.0, 1, |_| Ok(())).is_err());

        // partial last step lands exactly on t_end
        s.integrate(0.035, 1, |_| Ok(())).unwrap();
        assert_eq!(s.t(), 0.035);
        assert_eq!(s.steps(), 4);

        let err = s.integrate(0.1, 2, |st| if st.t() > 0.06 { Err("stop".into()) } else { Ok(()) });
        assert!(matches!(err, Err(Error::Observer { .. })));
    }

    #[test]
    fn identical_seeds_give_identical_streams() {
        let run = || {
            let g = Grid1D::new(2.0 * PI, 33).unwrap();
            let u = make_initial(&InitialCondition::Constant { q: vec3::E3 }, g).unwrap();
            let spec = ModelSpec::new(ModelKind::LlgFlucDiss, 0.5, NoiseIntensity::cosine(g, 0.1, 1).unwrap()).unwrap();
            let mut s = TrajectoryState::seeded(u, spec, SchemeConfig::strang(1e-3).unwrap(), 77, 5).unwrap();
            let mut out = Vec::new();
            s.integrate(0.2, 10, |st| {
                out.push(st.field().values().to_vec());
                Ok(())
            })
            .unwrap();
            out
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn checkpoint_resume_is_bit_exact() {
        let g = Grid1D::new(2.0 * PI, 33).unwrap();
        let u = make_initial(&InitialCondition::Constant { q: vec3::E3 }, g).unwrap();
        let spec = ModelSpec::new(ModelKind::LlgFlucDiss, 0.5, NoiseIntensity::cosine(g, 0.1, 1).unwrap()).unwrap();
        let cfg = SchemeConfig::strang(1e-3).unwrap();

        let mut full = TrajectoryState::seeded(u.clone(), spec.clone(), cfg, 12, 3).unwrap();
        full.integrate(0.2, u64::MAX, |_| Ok(())).unwrap();

        let mut first = TrajectoryState::seeded(u, spec.clone(), cfg, 12, 3).unwrap();
        first.integrate(0.1, u64::MAX, |_| Ok(())).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cp.json");
        first.checkpoint("abc").save(&path).unwrap();
        let cp = Checkpoint::load(&path).unwrap();
        assert!(TrajectoryState::resume(&cp, spec.clone(), cfg, "other").is_err());
        let mut resumed = TrajectoryState::resume(&cp, spec, cfg, "abc").unwrap();
        resumed.integrate(0.2, u64::MAX, |_| Ok(())).unwrap();
        assert_eq!(resumed.field(), full.field());
        assert_eq!(resumed.steps(), full.steps());
    }

    #[test]
    fn scheme_config_validation() {
        assert!(SchemeConfig::strang(0.0).is_err());
        let mut c = SchemeConfig::strang(1e-3).unwrap();
        c.fp_tol = 1e-3;
        assert!(c.validate().is_err());
        let g = Grid1D::new(1.0, 11).unwrap();
        assert!((SchemeConfig::default_dt(&g) - 0.2 * 0.01).abs() < 1e-15);
    }

    #[test]
    fn only_the_euler_scheme_projects() {
        let g = Grid1D::new(2.0 * PI, 16).unwrap();
        let u = make_initial(&InitialCondition::GreatCircleProfile { amplitude: 0.5 }, g).unwrap();
        let spec = ModelSpec::new(ModelKind::LlgFlucDiss, 0.5, NoiseIntensity::cosine(g, 0.1, 1).unwrap()).unwrap();
        for (kind, expected) in [(SchemeKind::StrangRotation, 0), (SchemeKind::EulerItoProjected, 20)] {
            let mut s =
                TrajectoryState::seeded(u.clone(), spec.clone(), SchemeConfig::new(1e-3, kind).unwrap(), 1, 0).unwrap();
            for _ in 0..20 {
                s.step().unwrap();
            }
            assert_eq!(s.projections(), expected);
        }
    }
}
