//! Run configuration: a TOML file validated in full before any compute.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{ModelKind, ModelSpec};
use crate::error::{Error, Result};
use crate::field::{make_initial, InitialCondition, NoiseIntensity, SphereField};
use crate::grid::Grid1D;
use crate::scheme::{SchemeConfig, SchemeKind};
use crate::stats::checks::Tolerance;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseConfig {
    Constant {
        c: f64,
    },
    Cosine {
        alpha: f64,
        k: u32,
    },
    /// Two-column CSV `x,h` on the grid nodes; relative paths resolve
    /// against the config file.
    Tabulated {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default)]
    pub nu: f64,
    pub noise: NoiseConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub length: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_burn_in: f64,
    pub t_total: f64,
    /// Steps between recorded samples.
    pub sample_stride: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_trajectories: usize,
    pub master_seed: u64,
    /// Batches per trajectory for batch means; chosen automatically when
    /// absent.
    #[serde(default)]
    pub batches_per_trajectory: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub nu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    /// Record field and curve snapshots of trajectory 0 every this many
    /// samples; 0 disables snapshots.
    #[serde(default)]
    pub snapshot_stride: usize,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_out_dir(), snapshot_stride: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    MomentIdentity,
    BalanceIdentity,
    EnergyIdentity,
    Inequalities,
    PositiveGradient,
    Conservation,
    Bound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    #[serde(default = "default_checks")]
    pub enabled: Vec<CheckKind>,
    #[serde(default = "default_sigmas")]
    pub sigmas: f64,
    #[serde(default = "default_disc_c")]
    pub disc_c: f64,
    /// `[s, t]` window of the energy identity.
    #[serde(default = "default_energy_window")]
    pub energy_window: [f64; 2],
    #[serde(default = "default_gradient_floor")]
    pub gradient_floor: f64,
    /// Relative drift allowed by the conservation check.
    #[serde(default = "default_conservation_tol")]
    pub conservation_tol: f64,
    /// Poincaré constant used by the bound calculator.
    #[serde(default = "default_c_p")]
    pub c_p: f64,
}

fn default_checks() -> Vec<CheckKind> {
    vec![
        CheckKind::MomentIdentity,
        CheckKind::BalanceIdentity,
        CheckKind::EnergyIdentity,
        CheckKind::Inequalities,
        CheckKind::PositiveGradient,
        CheckKind::Bound,
    ]
}
fn default_sigmas() -> f64 {
    3.0
}
fn default_disc_c() -> f64 {
    10.0
}
fn default_energy_window() -> [f64; 2] {
    [0.0, 1.0]
}
fn default_gradient_floor() -> f64 {
    1e-8
}
fn default_conservation_tol() -> f64 {
    1e-6
}
fn default_c_p() -> f64 {
    1.0
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self {
            enabled: default_checks(),
            sigmas: default_sigmas(),
            disc_c: default_disc_c(),
            energy_window: default_energy_window(),
            gradient_floor: default_gradient_floor(),
            conservation_tol: default_conservation_tol(),
            c_p: default_c_p(),
        }
    }
}

impl ChecksConfig {
    pub fn tolerance(&self) -> Tolerance {
        Tolerance { sigmas: self.sigmas, disc_c: self.disc_c, ..Tolerance::default() }
    }

    pub fn is_enabled(&self, kind: CheckKind) -> bool {
        self.enabled.contains(&kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub initial: InitialCondition,
    pub scheme: SchemeConfig,
    pub time: TimeConfig,
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    /// Directory that relative paths resolve against; not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Every violated constraint, joined into one error.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let m = &self.model;
        if !(0.0..=1.0).contains(&m.nu) {
            bad.push(format!("model.nu must lie in [0, 1], got {}", m.nu));
        }
        match &m.noise {
            NoiseConfig::Constant { c } if !c.is_finite() => bad.push("model.noise.c must be finite".into()),
            NoiseConfig::Cosine { alpha, k } => {
                if !alpha.is_finite() {
                    bad.push("model.noise.alpha must be finite".into());
                }
                if *k == 0 {
                    bad.push("model.noise.k must be at least 1".into());
                } else {
                    let expected = 2.0 * std::f64::consts::PI * *k as f64;
                    if (self.grid.length - expected).abs() > 1e-9 * expected {
                        bad.push(format!("grid.length must equal 2πk = {expected} for cosine noise"));
                    }
                }
            }
            _ => {}
        }
        if !(self.grid.length > 0.0 && self.grid.length.is_finite()) {
            bad.push(format!("grid.length must be positive, got {}", self.grid.length));
        }
        if self.grid.n < 3 {
            bad.push(format!("grid.n must be at least 3, got {}", self.grid.n));
        }
        if let Err(e) = self.scheme.validate() {
            bad.push(format!("scheme: {e}"));
        }
        let t = &self.time;
        if !(t.t_burn_in >= 0.0) {
            bad.push(format!("time.t_burn_in must be >= 0, got {}", t.t_burn_in));
        }
        if !(t.t_total > t.t_burn_in) {
            bad.push(format!("time.t_total ({}) must exceed time.t_burn_in ({})", t.t_total, t.t_burn_in));
        }
        if t.sample_stride == 0 {
            bad.push("time.sample_stride must be at least 1".into());
        }
        if self.ensemble.n_trajectories == 0 {
            bad.push("ensemble.n_trajectories must be at least 1".into());
        }
        if self.ensemble.batches_per_trajectory == Some(0) {
            bad.push("ensemble.batches_per_trajectory must be at least 1".into());
        }
        if let Some(sweep) = &self.sweep {
            if sweep.nu.is_empty() {
                bad.push("sweep.nu must not be empty".into());
            }
            if sweep.nu.windows(2).any(|w| !(w[1] < w[0])) {
                bad.push(format!("sweep.nu must be strictly decreasing, got {:?}", sweep.nu));
            }
            if sweep.nu.iter().any(|v| !(0.0..=1.0).contains(v)) {
                bad.push("sweep.nu values must lie in [0, 1]".into());
            }
        }
        let c = &self.checks;
        if !(c.sigmas > 0.0) || !(c.disc_c >= 0.0) {
            bad.push("checks.sigmas must be positive and checks.disc_c nonnegative".into());
        }
        if !(c.energy_window[1] > c.energy_window[0] && c.energy_window[0] >= 0.0) {
            bad.push(format!("checks.energy_window must satisfy 0 <= s < t, got {:?}", c.energy_window));
        } else if c.is_enabled(CheckKind::EnergyIdentity) && c.energy_window[1] > t.t_total {
            bad.push(format!("checks.energy_window ends after time.t_total ({})", t.t_total));
        }
        if !(c.c_p > 0.0) {
            bad.push(format!("checks.c_p must be positive, got {}", c.c_p));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    /// SHA-256 over the canonical JSON form of the configuration, with the
    /// output directory left out.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.outputs.dir = PathBuf::new();
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        let hash = Sha256::digest(&json);
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.grid.length, self.grid.n)
    }

    pub fn noise(&self, grid: Grid1D) -> Result<NoiseIntensity> {
        match &self.model.noise {
            NoiseConfig::Constant { c } => Ok(NoiseIntensity::constant(grid, *c)),
            NoiseConfig::Cosine { alpha, k } => NoiseIntensity::cosine(grid, *alpha, *k),
            NoiseConfig::Tabulated { path } => {
                let p = if path.is_absolute() { path.clone() } else { self.base_dir.join(path) };
                let file = std::fs::File::open(&p)
                    .map_err(|e| Error::Config(format!("cannot open noise table {}: {e}", p.display())))?;
                NoiseIntensity::from_csv(grid, file)
            }
        }
    }

    /// Model, initial field and scheme for viscosity `nu`.
    pub fn build(&self, nu: f64) -> Result<(ModelSpec, SphereField, SchemeConfig)> {
        let grid = self.grid()?;
        let spec = ModelSpec::new(self.model.kind, nu, self.noise(grid)?)?;
        let u0 = make_initial(&self.initial, grid)?;
        Ok((spec, u0, self.scheme))
    }

    /// Viscosities to run: the sweep list, or the single model value.
    pub fn nus(&self) -> Vec<f64> {
        match &self.sweep {
            Some(s) => s.nu.clone(),
            None => vec![self.model.nu],
        }
    }

    /// The stationary reference configuration: `h = 0.1 cos x` on `[0, 2π]`,
    /// `N = 64`, `dt = 2·10⁻⁴`, burn-in 10, horizon 40, 256 trajectories.
    pub fn reference(nu: f64) -> Self {
        RunConfig {
            model: ModelConfig { kind: ModelKind::LlgFlucDiss, nu, noise: NoiseConfig::Cosine { alpha: 0.1, k: 1 } },
            grid: GridConfig { length: 2.0 * std::f64::consts::PI, n: 64 },
            initial: InitialCondition::Constant { q: [0.0, 0.0, 1.0] },
            scheme: SchemeConfig { dt: 2e-4, kind: SchemeKind::StrangRotation, fp_tol: 1e-12, fp_max_iter: 50 },
            time: TimeConfig { t_burn_in: 10.0, t_total: 40.0, sample_stride: 250 },
            ensemble: EnsembleConfig { n_trajectories: 256, master_seed: 20240601, batches_per_trajectory: None },
            sweep: None,
            outputs: OutputConfig::default(),
            checks: ChecksConfig::default(),
            base_dir: PathBuf::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
[model]
kind = "llg_fluc_diss"
nu = 0.5
noise = { family = "cosine", alpha = 0.1, k = 1 }

[grid]
length = 6.283185307179586
n = 64

[initial]
kind = "constant"
q = [0.0, 0.0, 1.0]

[scheme]
dt = 2e-4
kind = "strang_rotation"

[time]
t_burn_in = 10.0
t_total = 40.0
sample_stride = 250

[ensemble]
n_trajectories = 256
master_seed = 20240601

[sweep]
nu = [0.5, 0.25, 0.125]
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = RunConfig::from_toml_str(EXAMPLE).unwrap();
        assert_eq!(cfg.nus(), vec![0.5, 0.25, 0.125]);
        assert_eq!(cfg.scheme.fp_tol, 1e-12);
        assert_eq!(cfg.checks, ChecksConfig::default());
        let again = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.digest(), cfg.digest());
        let mut reference = RunConfig::reference(0.5);
        reference.sweep = cfg.sweep.clone();
        assert_eq!(reference, cfg);
    }

    #[test]
    fn digest_changes_with_content() {
        let a = RunConfig::reference(0.5);
        let mut b = a.clone();
        b.ensemble.master_seed += 1;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
        let mut c = a.clone();
        c.outputs.dir = PathBuf::from("elsewhere");
        assert_eq!(a.digest(), c.digest());
    }

    #[test]
    fn every_violation_is_listed() {
        let text = EXAMPLE
            .replace("t_burn_in = 10.0", "t_burn_in = 50.0")
            .replace("n_trajectories = 256", "n_trajectories = 0")
            .replace("nu = [0.5, 0.25, 0.125]", "nu = [0.25, 0.5]");
        let msg = RunConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(msg.contains("t_total"), "{msg}");
        assert!(msg.contains("n_trajectories"), "{msg}");
        assert!(msg.contains("strictly decreasing"), "{msg}");
    }

    #[test]
    fn empty_sweep_and_unknown_fields_are_rejected() {
        let text = EXAMPLE.replace("nu = [0.5, 0.25, 0.125]", "nu = []");
        assert!(RunConfig::from_toml_str(&text).unwrap_err().to_string().contains("must not be empty"));
        let text = EXAMPLE.replace("n = 64", "n = 64\nspacing = 0.1");
        assert!(RunConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn cosine_needs_matching_length() {
        let text = EXAMPLE.replace("length = 6.283185307179586", "length = 5.0");
        assert!(RunConfig::from_toml_str(&text).unwrap_err().to_string().contains("2πk"));
    }

    #[test]
    fn builds_model() {
        let cfg = RunConfig::reference(0.25);
        let (spec, u0, scheme) = cfg.build(0.25).unwrap();
        assert_eq!(spec.nu, 0.25);
        assert_eq!(u0.values().len(), 64);
        assert_eq!(scheme.dt, 2e-4);
        assert!((spec.h.moments().grad_l2_sq - 0.01 * std::f64::consts::PI).abs() < 1e-12);
    }
}
