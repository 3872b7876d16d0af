//! Ensemble orchestration and run artifacts.
//!
//! Trajectories are the unit of parallelism. Results are collected in
//! trajectory order and every reduction runs sequentially afterwards, so no
//! emitted number depends on the number of worker threads.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bound::{self, BoundInput, BoundReport};
use crate::config::{CheckKind, RunConfig, CODE_VERSION};
use crate::dynamics::{ModelKind, ModelSpec};
use crate::error::{Error, Result};
use crate::field::{NoiseFamily, NoiseIntensity, SphereField};
use crate::scheme::{SchemeConfig, TrajectoryState};
use crate::stats::checks::{self, CheckReport, Verdict};
use crate::stats::estimate::{stationary_estimate, time_series_stats, EnsembleStats};
use crate::stats::observables::{observe, ObservableRecord, OBSERVABLE_NAMES};
use crate::transforms;
use crate::vec3;

/// Everything one trajectory hands back to the orchestrator.
#[derive(Debug, Clone)]
pub struct TrajectoryOutput {
    pub records: Vec<ObservableRecord>,
    pub max_norm_deviation: f64,
    pub max_fp_iterations: usize,
    pub snapshots: Vec<(f64, SphereField)>,
}

/// Integrates one trajectory to `t_end`, observing at `t = 0` and after
/// every `stride` steps. Every `snapshot_every`-th sample also stores the
/// field (0 disables snapshots).
#[allow(clippy::too_many_arguments)]
pub fn simulate_trajectory(
    spec: &ModelSpec,
    u0: &SphereField,
    scheme: SchemeConfig,
    master_seed: u64,
    index: u64,
    t_end: f64,
    stride: u64,
    snapshot_every: usize,
) -> Result<TrajectoryOutput> {
    let mut state = TrajectoryState::seeded(u0.clone(), spec.clone(), scheme, master_seed, index)?;
    let h = spec.h.clone();
    let mut records = vec![observe(u0, &h, 0.0)?];
    let mut snapshots = Vec::new();
    if snapshot_every > 0 {
        snapshots.push((0.0, u0.clone()));
    }
    let mut max_dev = u0.max_norm_deviation();
    state.integrate(t_end, stride, |s| {
        let rec = observe(s.field(), &h, s.t()).map_err(|e| e.to_string())?;
        records.push(rec);
        max_dev = max_dev.max(s.field().max_norm_deviation());
        if snapshot_every > 0 && (records.len() - 1) % snapshot_every == 0 {
            snapshots.push((s.t(), s.field().clone()));
        }
        Ok(())
    })?;
    let last = state.field();
    if records.last().map(|r| r.t) != Some(state.t()) {
        records.push(observe(last, &h, state.t())?);
    }
    max_dev = max_dev.max(last.max_norm_deviation());
    Ok(TrajectoryOutput {
        records,
        max_norm_deviation: max_dev,
        max_fp_iterations: state.max_fp_iterations(),
        snapshots,
    })
}

#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub nu: f64,
    pub spec: ModelSpec,
    pub records: Vec<Vec<ObservableRecord>>,
    pub max_norm_deviation: f64,
    pub max_fp_iterations: usize,
    /// Snapshots of trajectory 0, if requested.
    pub snapshots: Vec<(f64, SphereField)>,
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Runs all trajectories of `cfg` at viscosity `nu`.
pub fn run_ensemble(cfg: &RunConfig, nu: f64, threads: Option<usize>) -> Result<EnsembleRun> {
    cfg.validate()?;
    let (spec, u0, scheme) = cfg.build(nu)?;
    let m = cfg.ensemble.n_trajectories;
    let seed = cfg.ensemble.master_seed;
    let (t_end, stride, snap) = (cfg.time.t_total, cfg.time.sample_stride, cfg.outputs.snapshot_stride);
    log::info!("running {m} trajectories of {} at nu = {nu} to t = {t_end}", spec.kind.name());
    let outputs: Vec<TrajectoryOutput> = pool(threads)?.install(|| {
        (0..m)
            .into_par_iter()
            .map(|i| {
                simulate_trajectory(&spec, &u0, scheme, seed, i as u64, t_end, stride, if i == 0 { snap } else { 0 })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let max_norm_deviation = outputs.iter().map(|o| o.max_norm_deviation).fold(0.0, f64::max);
    let max_fp_iterations = outputs.iter().map(|o| o.max_fp_iterations).max().unwrap_or(0);
    let mut outputs = outputs.into_iter();
    let first = outputs.next().ok_or_else(|| Error::Config("no trajectories".into()))?;
    let snapshots = first.snapshots;
    let mut records = vec![first.records];
    records.extend(outputs.map(|o| o.records));
    Ok(EnsembleRun { nu, spec, records, max_norm_deviation, max_fp_iterations, snapshots })
}

fn relative_change(a: f64, b: f64) -> f64 {
    if a.abs() > 1e-12 {
        (b - a).abs() / a.abs()
    } else {
        (b - a).abs()
    }
}

/// Largest relative change between the first and last record of any
/// trajectory, over the quantities the model conserves.
pub fn conservation_drift(kind: ModelKind, records: &[Vec<ObservableRecord>]) -> f64 {
    records
        .iter()
        .filter_map(|r| Some((r.first()?, r.last()?)))
        .map(|(a, b)| {
            let mut d = relative_change(a.grad_l2_sq, b.grad_l2_sq);
            if kind == ModelKind::Ssme {
                d = d.max(relative_change(vec3::norm(a.avg), vec3::norm(b.avg)));
            } else {
                for k in 0..3 {
                    d = d.max(relative_change(a.avg[k], b.avg[k]));
                }
            }
            d
        })
        .fold(0.0, f64::max)
}

fn conserves(spec: &ModelSpec) -> bool {
    match spec.kind {
        ModelKind::Sme | ModelKind::Ssme => true,
        ModelKind::LlgFlucDiss | ModelKind::LlgModified => spec.nu == 0.0 && spec.h.is_space_constant(),
        ModelKind::SphericalBm => false,
    }
}

/// `λ*` from the measured moments of `h`, the cosine form where it applies,
/// and the empirical non-triviality fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub general: BoundReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cosine_lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published_value: Option<f64>,
}

pub fn bound_summary(h: &NoiseIntensity, c_p: f64, min_gradients: &[f64], floor: f64) -> Result<BoundSummary> {
    let input = BoundInput::new(h.moments(), c_p, h.grid().length())?;
    let lambda = bound::lower_bound_general(&input);
    let general = bound::cross_validate_bound(min_gradients, lambda, floor);
    let (cosine_lambda, published_value) = match h.family() {
        NoiseFamily::Cosine { alpha, k } if alpha != 0.0 => {
            let l = bound::lower_bound_cosine(alpha, k)?;
            (Some(l), (alpha == 0.1).then_some(bound::PUBLISHED_COSINE_BOUND))
        }
        _ => (None, None),
    };
    if let (Some(l), Some(p)) = (cosine_lambda, published_value) {
        log::warn!("computed cosine bound {l:.6} differs from the published {p} by {:.4}", p - l);
    }
    Ok(BoundSummary { general, cosine_lambda, published_value })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub code_version: String,
    pub config_digest: String,
    pub run_id: String,
    pub model: String,
    pub nu: f64,
    pub trajectories: usize,
    pub checks: Vec<CheckReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundSummary>,
    pub max_norm_deviation: f64,
    pub max_fp_iterations: usize,
    /// Stationary estimates as `(name, mean, stderr)`.
    #[serde(default)]
    pub stationary: Vec<(String, f64, f64)>,
}

impl RunReport {
    pub fn failed(&self, strict: bool) -> bool {
        self.checks.iter().any(|c| c.verdict.is_failure(strict))
    }
}

/// Exit status as a pure function of the verdicts: 0 when nothing failed
/// (inconclusive counts as failed only in strict mode), 1 otherwise.
pub fn exit_status(reports: &[RunReport], strict: bool) -> i32 {
    i32::from(reports.iter().any(|r| r.failed(strict)))
}

pub fn run_id(digest: &str, nu: f64) -> String {
    format!("{}-nu{nu}", &digest[..12])
}

fn stationary_stats(cfg: &RunConfig, run: &EnsembleRun) -> Result<EnsembleStats> {
    stationary_estimate(&run.records, cfg.time.t_burn_in, 1, cfg.ensemble.batches_per_trajectory)
}

/// Evaluates every enabled check that applies to the model.
pub fn evaluate(cfg: &RunConfig, run: &EnsembleRun) -> Result<RunReport> {
    let digest = cfg.digest();
    let spec = &run.spec;
    let h = &spec.h;
    let tol = cfg.checks.tolerance();
    let c = &cfg.checks;
    let mut reports = vec![CheckReport {
        check_name: "sphere_constraint".into(),
        target: 0.0,
        estimate: run.max_norm_deviation,
        stderr: 0.0,
        allowance: 1e-12,
        verdict: if run.max_norm_deviation <= 1e-12 { Verdict::Pass } else { Verdict::Fail },
        note: Some("max over nodes, samples and trajectories of ||u| - 1|".into()),
    }];

    let stochastic_llg = spec.kind == ModelKind::LlgFlucDiss && spec.nu > 0.0;
    let stationary = if stochastic_llg {
        match stationary_stats(cfg, run) {
            Ok(s) => Some(s),
            Err(e) => {
                log::warn!("no stationary estimate: {e}");
                for (kind, name) in
                    [(CheckKind::MomentIdentity, "moment_identity"), (CheckKind::BalanceIdentity, "balance_identity")]
                {
                    if c.is_enabled(kind) {
                        reports.push(CheckReport {
                            check_name: name.into(),
                            target: f64::NAN,
                            estimate: f64::NAN,
                            stderr: f64::NAN,
                            allowance: tol.allowance(h.grid().dx()),
                            verdict: Verdict::Inconclusive,
                            note: Some(e.to_string()),
                        });
                    }
                }
                None
            }
        }
    } else {
        None
    };
    if let Some(stats) = &stationary {
        if c.is_enabled(CheckKind::MomentIdentity) {
            reports.push(checks::check_moment_identity(stats, h, spec.nu, &tol));
        }
        if c.is_enabled(CheckKind::BalanceIdentity) {
            reports.push(checks::check_balance_identity(stats, h, &tol));
        }
        if c.is_enabled(CheckKind::Inequalities) {
            reports.extend(checks::check_inequalities(stats, h, &tol));
        }
    }
    if spec.kind == ModelKind::LlgFlucDiss && c.is_enabled(CheckKind::EnergyIdentity) {
        let [s, t] = c.energy_window;
        match checks::check_energy_identity(&run.records, s, t, spec.nu, h, &tol) {
            Ok(r) => reports.push(r),
            Err(e) => reports.push(CheckReport {
                check_name: "energy_identity".into(),
                target: 0.0,
                estimate: f64::NAN,
                stderr: f64::NAN,
                allowance: tol.allowance(h.grid().dx()),
                verdict: Verdict::Inconclusive,
                note: Some(e.to_string()),
            }),
        }
    }
    if stochastic_llg && c.is_enabled(CheckKind::PositiveGradient) {
        if let Some(r) = checks::check_positive_gradient(&run.records, h, cfg.time.t_burn_in, c.gradient_floor) {
            reports.push(r);
        }
    }
    if conserves(spec) && c.is_enabled(CheckKind::Conservation) {
        let drift = conservation_drift(spec.kind, &run.records);
        reports.push(CheckReport {
            check_name: "conservation".into(),
            target: 0.0,
            estimate: drift,
            stderr: 0.0,
            allowance: c.conservation_tol,
            verdict: if drift <= c.conservation_tol { Verdict::Pass } else { Verdict::Fail },
            note: Some("largest relative drift of the conserved functionals".into()),
        });
    }
    let bound = if stochastic_llg && c.is_enabled(CheckKind::Bound) {
        let mins = checks::min_gradients(&run.records, cfg.time.t_burn_in);
        Some(bound_summary(h, c.c_p, &mins, c.gradient_floor)?)
    } else {
        None
    };
    let stationary = stationary
        .map(|s| OBSERVABLE_NAMES.iter().map(|n| (n.to_string(), s.obs(n).mean(), s.obs(n).stderr())).collect())
        .unwrap_or_default();
    Ok(RunReport {
        code_version: CODE_VERSION.into(),
        config_digest: digest.clone(),
        run_id: run_id(&digest, run.nu),
        model: spec.kind.name().into(),
        nu: run.nu,
        trajectories: run.records.len(),
        checks: reports,
        bound,
        max_norm_deviation: run.max_norm_deviation,
        max_fp_iterations: run.max_fp_iterations,
        stationary,
    })
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

fn stats_header() -> Vec<String> {
    let mut h = vec!["run_id".to_string(), "nu".into(), "t".into()];
    for n in OBSERVABLE_NAMES {
        h.push(format!("{n}_mean"));
        h.push(format!("{n}_stderr"));
        h.push(format!("{n}_count"));
    }
    h
}

fn stats_row(run_id: &str, nu: f64, t: f64, s: &EnsembleStats) -> Vec<String> {
    let mut row = vec![run_id.to_string(), fmt(nu), fmt(t)];
    for i in 0..OBSERVABLE_NAMES.len() {
        let a = s.by_index(i);
        row.push(fmt(a.mean()));
        row.push(fmt(a.stderr()));
        row.push(a.count().to_string());
    }
    row
}

/// Cross-sectional statistics table, one row per sampling time, preceded
/// by a comment line with the code version and config digest.
pub fn write_stats_csv<W: Write>(mut out: W, digest: &str, run: &EnsembleRun) -> Result<()> {
    writeln!(out, "# smflow {CODE_VERSION} config {digest}")?;
    let id = run_id(digest, run.nu);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(stats_header())?;
    for (t, s) in time_series_stats(&run.records)? {
        w.write_record(stats_row(&id, run.nu, t, &s))?;
    }
    w.flush()?;
    Ok(())
}

/// Pooled post-burn-in estimates, one row.
pub fn write_stationary_csv<W: Write>(mut out: W, cfg: &RunConfig, run: &EnsembleRun) -> Result<()> {
    let digest = cfg.digest();
    writeln!(out, "# smflow {CODE_VERSION} config {digest} burn_in {}", cfg.time.t_burn_in)?;
    let stats = stationary_stats(cfg, run)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(stats_header())?;
    w.write_record(stats_row(&run_id(&digest, run.nu), run.nu, cfg.time.t_total, &stats))?;
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(value)?)?;
    Ok(())
}

fn write_snapshots(dir: &Path, digest: &str, snapshots: &[(f64, SphereField)]) -> Result<()> {
    if snapshots.is_empty() {
        return Ok(());
    }
    let mut f = fs::File::create(dir.join("fields.csv"))?;
    writeln!(f, "# smflow {CODE_VERSION} config {digest}")?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(["t", "x", "u_1", "u_2", "u_3"])?;
    for (t, u) in snapshots {
        for (i, v) in u.values().iter().enumerate() {
            w.write_record([fmt(*t), fmt(u.grid().x(i)), fmt(v[0]), fmt(v[1]), fmt(v[2])])?;
        }
    }
    w.flush()?;
    let curves: Vec<_> = snapshots.iter().map(|(t, u)| (*t, transforms::bcf_transform(u))).collect();
    let mut f = fs::File::create(dir.join("curves.csv"))?;
    writeln!(f, "# smflow {CODE_VERSION} config {digest}")?;
    transforms::write_curves_csv(f, &curves)?;
    Ok(())
}

/// Runs one ensemble and writes `stats.csv`, `stationary.csv` (when a
/// stationary estimate exists), `verdicts.json` and optional snapshots.
pub fn run_to_dir(cfg: &RunConfig, nu: f64, threads: Option<usize>, dir: &Path) -> Result<RunReport> {
    fs::create_dir_all(dir)?;
    let digest = cfg.digest();
    let run = run_ensemble(cfg, nu, threads)?;
    write_stats_csv(fs::File::create(dir.join("stats.csv"))?, &digest, &run)?;
    let report = evaluate(cfg, &run)?;
    if !report.stationary.is_empty() {
        write_stationary_csv(fs::File::create(dir.join("stationary.csv"))?, cfg, &run)?;
    }
    write_snapshots(dir, &digest, &run.snapshots)?;
    write_json(&dir.join("verdicts.json"), &report)?;
    Ok(report)
}

/// One row of the sweep summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub nu: f64,
    pub cross_lap_mean: f64,
    pub cross_lap_stderr: f64,
    pub grad_mean: f64,
    pub grad_stderr: f64,
    pub lap_mean: f64,
    pub lap_stderr: f64,
    pub verdicts: String,
    pub trend_flag: String,
}

/// Factor by which a stationary moment may grow between consecutive
/// viscosities (beyond three joint standard errors) before it is flagged as
/// inconsistent with bounds uniform in `ν`.
pub const TREND_GROWTH_FACTOR: f64 = 2.0;

fn lookup(report: &RunReport, name: &str) -> (f64, f64) {
    report.stationary.iter().find(|(n, _, _)| n == name).map_or((f64::NAN, f64::NAN), |(_, m, s)| (*m, *s))
}

pub fn sweep_rows(reports: &[RunReport]) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = Vec::with_capacity(reports.len());
    for (j, r) in reports.iter().enumerate() {
        let (cm, cs) = lookup(r, "cross_lap_l2_sq");
        let (gm, gs) = lookup(r, "grad_l2_sq");
        let (lm, ls) = lookup(r, "lap_l2_sq");
        let verdicts = r
            .checks
            .iter()
            .map(|c| format!("{}={}", c.check_name, serde_json::to_value(c.verdict).unwrap().as_str().unwrap_or("?")))
            .collect::<Vec<_>>()
            .join(";");
        let mut flags = Vec::new();
        if j > 0 {
            let p = &rows[j - 1];
            for (name, (m0, s0), (m1, s1)) in [
                ("grad_l2_sq", (p.grad_mean, p.grad_stderr), (gm, gs)),
                ("lap_l2_sq", (p.lap_mean, p.lap_stderr), (lm, ls)),
            ] {
                let joint = (s0 * s0 + s1 * s1).sqrt();
                if m1 > TREND_GROWTH_FACTOR * m0 + 3.0 * joint {
                    flags.push(format!("growth:{name}"));
                }
            }
        }
        rows.push(SweepRow {
            nu: r.nu,
            cross_lap_mean: cm,
            cross_lap_stderr: cs,
            grad_mean: gm,
            grad_stderr: gs,
            lap_mean: lm,
            lap_stderr: ls,
            verdicts,
            trend_flag: if flags.is_empty() { "ok".into() } else { flags.join(";") },
        });
    }
    rows
}

/// Runs every viscosity of the sweep into `dir/nu_<ν>/` and writes
/// `summary.csv` and `sweep.json`.
pub fn sweep_to_dir(cfg: &RunConfig, threads: Option<usize>, dir: &Path) -> Result<Vec<RunReport>> {
    if cfg.sweep.is_none() {
        return Err(Error::Config("sweep requires a [sweep] table with a nu list".into()));
    }
    fs::create_dir_all(dir)?;
    let mut reports = Vec::new();
    for nu in cfg.nus() {
        let sub: PathBuf = dir.join(format!("nu_{nu}"));
        reports.push(run_to_dir(cfg, nu, threads, &sub)?);
    }
    let rows = sweep_rows(&reports);
    let mut f = fs::File::create(dir.join("summary.csv"))?;
    writeln!(f, "# smflow {CODE_VERSION} config {}", cfg.digest())?;
    let mut w = csv::Writer::from_writer(f);
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    write_json(&dir.join("sweep.json"), &reports)?;
    Ok(reports)
}
