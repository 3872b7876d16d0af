use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use smflow::bound::{self, BoundInput};
use smflow::config::{RunConfig, CODE_VERSION};
use smflow::field::h_moments;
use smflow::runner::{self, RunReport};
use smflow::stats::checks::CheckReport;
use smflow::transforms;
use smflow::verify::{self, Suite};
use smflow::Result;

#[derive(Parser)]
#[command(name = "smflow", version, about = "Stochastic LLG and Schrödinger map simulations with statistical checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores. Never changes any output number.
    #[arg(long)]
    threads: Option<usize>,
    /// Treat inconclusive verdicts as failures.
    #[arg(long)]
    strict: bool,
    /// Output directory; overrides the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one ensemble and evaluate the enabled checks.
    Run(Common),
    /// Run every viscosity of the sweep list.
    Sweep(Common),
    /// Run a named verification suite.
    Verify {
        /// identities, conservation, stationary, sbm, bound or transforms
        suite: Suite,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the lower bound on the probability of non-trivial dynamics.
    Bound {
        /// Amplitude of the cosine noise intensity; ignored with --config.
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        /// Wavenumber of the cosine noise intensity.
        #[arg(long, default_value_t = 1)]
        k: u32,
        /// Poincaré constant.
        #[arg(long, default_value_t = 1.0)]
        c_p: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Integrate trajectory 0 and write its curve and Hashimoto transforms.
    Transform(Common),
}

fn load(common: &Common, required: bool) -> Result<Option<RunConfig>> {
    let Some(path) = &common.config else {
        if required {
            return Err(smflow::Error::Config("--config is required for this subcommand".into()));
        }
        return Ok(None);
    };
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.ensemble.master_seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.outputs.dir = out.clone();
    }
    Ok(Some(cfg))
}

fn print_checks(checks: &[CheckReport], strict: bool) {
    for c in checks {
        let mark = if c.verdict.is_failure(strict) { "FAIL" } else { "ok  " };
        println!(
            "{mark} {:<34} {:<12} target {:>12.6e} estimate {:>12.6e} stderr {:>10.3e} allowance {:>10.3e}",
            c.check_name,
            format!("{:?}", c.verdict),
            c.target,
            c.estimate,
            c.stderr,
            c.allowance
        );
        if let Some(note) = &c.note {
            println!("     {note}");
        }
    }
}

fn print_report(r: &RunReport, strict: bool) {
    println!("run {} model {} nu {} trajectories {}", r.run_id, r.model, r.nu, r.trajectories);
    println!("max |u|-1 {:.3e}, max fixed-point iterations {}", r.max_norm_deviation, r.max_fp_iterations);
    for (name, m, s) in &r.stationary {
        println!("  {name:<20} {m:>14.6e} ± {s:.3e}");
    }
    print_checks(&r.checks, strict);
    if let Some(b) = &r.bound {
        println!(
            "bound lambda* {:.6}, empirical fraction {:.4}: {}",
            b.general.lambda_star, b.general.empirical_fraction, b.general.note
        );
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn exit_for(failed: bool) -> ExitCode {
    ExitCode::from(u8::from(failed))
}

fn cmd_bound(alpha: f64, k: u32, c_p: f64, common: &Common) -> Result<ExitCode> {
    let input = match load(common, false)? {
        Some(cfg) => {
            let grid = cfg.grid()?;
            BoundInput::new(h_moments(&cfg.noise(grid)?), c_p, grid.length())?
        }
        None => {
            let mut input = BoundInput::cosine_normalized(alpha, k)?;
            input.c_p = c_p;
            input
        }
    };
    let m = &input.h_stats;
    let c = input.coefficients();
    let lambda = bound::lower_bound_general(&input);
    println!("<h> = {:.10}", m.mean);
    println!("<h^2> = {:.10}", m.mean_sq);
    println!("<|h|> = {:.10}", m.mean_abs);
    println!("sup|h| = {:.10}", m.sup);
    println!("|dh|^2 = {:.10}", m.grad_l2_sq);
    println!("C_p = {}, |D| = {:.10}", input.c_p, input.domain_len);
    println!("A = {:.10}, B = {:.10}, R = {:.10}", c.a, c.b, c.r);
    println!("lambda* = {lambda:.10}");
    println!("bisection = {:.10}", bound::solve_bisection(&c));
    if common.config.is_none() {
        if let Some(gap) = bound::published_gap(alpha) {
            println!("published value {} vs computed {lambda:.4}: gap {gap:.4}", bound::PUBLISHED_COSINE_BOUND);
        }
    }
    if let Some(out) = &common.out {
        let value = serde_json::json!({
            "code_version": CODE_VERSION,
            "moments": m,
            "c_p": input.c_p,
            "domain_len": input.domain_len,
            "a": c.a, "b": c.b, "r": c.r,
            "lambda_star": lambda,
        });
        write_json(&out.join("bound.json"), &value)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_transform(common: &Common) -> Result<ExitCode> {
    let cfg = load(common, true)?.expect("required");
    let (spec, u0, scheme) = cfg.build(cfg.model.nu)?;
    let every = cfg.outputs.snapshot_stride.max(1);
    let traj = runner::simulate_trajectory(
        &spec,
        &u0,
        scheme,
        cfg.ensemble.master_seed,
        0,
        cfg.time.t_total,
        cfg.time.sample_stride,
        every,
    )?;
    let dir = &cfg.outputs.dir;
    fs::create_dir_all(dir)?;
    let curves: Vec<_> = traj.snapshots.iter().map(|(t, u)| (*t, transforms::bcf_transform(u))).collect();
    transforms::write_curves_csv(fs::File::create(dir.join("curves.csv"))?, &curves)?;
    let (t_last, u_last) = traj.snapshots.last().expect("at least the initial snapshot");
    let h = transforms::hashimoto(u_last, transforms::DEFAULT_TORSION_EPS);
    transforms::write_hashimoto_csv(fs::File::create(dir.join("hashimoto.csv"))?, &h)?;
    let arc = curves.iter().map(|(_, c)| transforms::arclength_residual(c)).fold(0.0, f64::max);
    println!("snapshots {}, max arclength residual {arc:.3e}", curves.len());
    println!("hashimoto at t = {t_last}: {} defined segment(s)", h.segments());
    if curves.len() >= 2 {
        let r = transforms::bcf_residual(&curves)?;
        println!("binormal-flow residual {:.3e} (without translation {:.3e})", r.shifted, r.raw);
    }
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(common) => {
            let cfg = load(&common, true)?.expect("required");
            let report = runner::run_to_dir(&cfg, cfg.model.nu, common.threads, &cfg.outputs.dir)?;
            print_report(&report, common.strict);
            Ok(exit_for(report.failed(common.strict)))
        }
        Command::Sweep(common) => {
            let cfg = load(&common, true)?.expect("required");
            let reports = runner::sweep_to_dir(&cfg, common.threads, &cfg.outputs.dir)?;
            for r in &reports {
                print_report(r, common.strict);
            }
            for row in runner::sweep_rows(&reports) {
                println!("nu {:<8} trend {}", row.nu, row.trend_flag);
            }
            Ok(ExitCode::from(runner::exit_status(&reports, common.strict) as u8))
        }
        Command::Verify { suite, common } => {
            let cfg = load(&common, false)?;
            let checks = verify::run_suite(suite, cfg.as_ref(), common.threads)?;
            print_checks(&checks, common.strict);
            if let Some(out) = &common.out {
                write_json(&out.join("verdicts.json"), &checks)?;
            }
            Ok(exit_for(checks.iter().any(|c| c.verdict.is_failure(common.strict))))
        }
        Command::Bound { alpha, k, c_p, common } => cmd_bound(alpha, k, c_p, &common),
        Command::Transform(common) => cmd_transform(&common),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
