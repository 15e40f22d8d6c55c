//! Subcommand definitions and execution. Each command resolves its
//! parameters (flags over config file over defaults), validates them, echoes
//! the resolved config plus its hash into the run directory, runs the
//! experiment, and writes CSV/JSON reports whose bytes depend only on the
//! resolved config and seed.

use crate::common::{
    config_hash, resolve, run_dir, seed_from, threads_from, CliError, CommonArgs, FileCfg,
};
use clap::{Args, Subcommand, ValueEnum};
use erw_core::couplings::{
    run_asym_coupling, run_dominance_coupling, run_shifted_coupling, CouplingMode,
};
use erw_core::estimators::{
    default_horizon_cap, estimate_theta, fit_tail, mc_escape_times, representation_equivalence,
    verify_markov_kolmogorov_bounds, DEFAULT_FIT_WINDOW,
};
use erw_core::exact::{
    asym_ruin_probability, exact_expected_escape_with_cap, exact_survival, exact_survival_until,
    DEFAULT_TAIL_EPS,
};
use erw_core::limit::{default_t_max, estimate_theta_limit};
use erw_core::report;
use erw_core::rng::{StreamKey, StreamPurpose};
use erw_core::walks::step_abs_erw;
use serde::Serialize;
use std::path::Path;

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Exact survival curve and expected escape time from the absorbing DP.
    Exact(ExactArgs),
    /// Monte Carlo escape-time summary (optionally with a survival curve).
    McEscape(McEscapeArgs),
    /// Run coupled walk replicates and verify the pathwise inequalities.
    Couple(CoupleArgs),
    /// Fit the exponential tail slope of an exact survival curve.
    Tailfit(TailfitArgs),
    /// Normalized escape-time means E[tau_N]/N^2 over a barrier grid.
    Theta(ThetaArgs),
    /// Hitting-time estimate from the limiting Gaussian process.
    Limit(LimitArgs),
    /// Two-sample KS equivalence check of the three ERW representations.
    UrnCheck(UrnCheckArgs),
    /// Empirical Markov/Kolmogorov escape-time bound checks for the SRW.
    BoundsCheck(BoundsCheckArgs),
    /// Re-run a single replicate by stream key and dump its full trace.
    Replay(ReplayArgs),
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Exact(a) => cmd_exact(a),
        Command::McEscape(a) => cmd_mc_escape(a),
        Command::Couple(a) => cmd_couple(a),
        Command::Tailfit(a) => cmd_tailfit(a),
        Command::Theta(a) => cmd_theta(a),
        Command::Limit(a) => cmd_limit(a),
        Command::UrnCheck(a) => cmd_urn_check(a),
        Command::BoundsCheck(a) => cmd_bounds_check(a),
        Command::Replay(a) => cmd_replay(a),
    }
}

fn write_config<T: Serialize>(dir: &Path, resolved: &T, hash: &str) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Echo<'a, T> {
        config_hash: &'a str,
        #[serde(flatten)]
        config: &'a T,
    }
    report::write_json(
        &dir.join("config.json"),
        &Echo {
            config_hash: hash,
            config: resolved,
        },
    )
    .map_err(|e| CliError::Other(e.into()))
}

fn core_usage(err: erw_core::Error) -> CliError {
    CliError::from_core(err, None, "")
}

// ---------------------------------------------------------------------------
// exact

#[derive(Args, Debug)]
pub struct ExactArgs {
    /// Memory parameter in (0,1).
    #[arg(long)]
    p: Option<f64>,
    /// Barrier.
    #[arg(long = "N")]
    n: Option<u64>,
    /// Last time on the survival grid.
    #[arg(long)]
    tmax: Option<u64>,
    /// Truncation threshold for the expectation tail sum.
    #[arg(long)]
    tail_eps: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Serialize)]
struct ExactConfig {
    command: &'static str,
    p: f64,
    #[serde(rename = "N")]
    n: u64,
    tmax: u64,
    tail_eps: f64,
}

fn cmd_exact(args: ExactArgs) -> Result<(), CliError> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let cfg = ExactConfig {
        command: "exact",
        p: resolve(args.p, &file, "p", None)?,
        n: resolve(args.n, &file, "N", None)?,
        tmax: resolve(args.tmax, &file, "tmax", None)?,
        tail_eps: resolve(args.tail_eps, &file, "tail_eps", Some(DEFAULT_TAIL_EPS))?,
    };
    let hash = config_hash(&cfg);
    let dir = run_dir(&args.common, "exact")?;
    write_config(&dir, &cfg, &hash)?;

    let curve = exact_survival(cfg.n, cfg.p, cfg.tmax).map_err(core_usage)?;
    report::write_survival_csv(&dir.join("survival.csv"), &curve)
        .map_err(|e| CliError::Other(e.into()))?;
    let expectation =
        exact_expected_escape_with_cap(cfg.n, cfg.p, cfg.tail_eps, default_horizon_cap(cfg.n))
            .map_err(core_usage)?;
    report::write_json(&dir.join("expectation.json"), &expectation)
        .map_err(|e| CliError::Other(e.into()))?;
    println!(
        "exact: N = {}, p = {}, E[tau] = {} (truncation bound {:.3e}), reports in {}",
        cfg.n,
        cfg.p,
        expectation.expectation,
        expectation.truncation_bound,
        dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// mc-escape

#[derive(Args, Debug)]
pub struct McEscapeArgs {
    #[arg(long)]
    p: Option<f64>,
    #[arg(long = "N")]
    n: Option<u64>,
    #[arg(long)]
    replicates: Option<u64>,
    /// Steps after which a replicate is censored (default 10^4 N^2).
    #[arg(long)]
    horizon_cap: Option<u64>,
    /// Also emit survival.csv on the integer grid 0..=curve-tmax.
    #[arg(long)]
    curve_tmax: Option<u64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Serialize)]
struct McEscapeConfig {
    command: &'static str,
    p: f64,
    #[serde(rename = "N")]
    n: u64,
    replicates: u64,
    horizon_cap: u64,
    seed: u64,
}

fn cmd_mc_escape(args: McEscapeArgs) -> Result<(), CliError> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let n = resolve(args.n, &file, "N", None)?;
    let cfg = McEscapeConfig {
        command: "mc-escape",
        p: resolve(args.p, &file, "p", None)?,
        n,
        replicates: resolve(args.replicates, &file, "replicates", None)?,
        horizon_cap: resolve(
            args.horizon_cap,
            &file,
            "horizon_cap",
            Some(default_horizon_cap(n)),
        )?,
        seed: seed_from(&args.common, &file)?,
    };
    let threads = threads_from(&args.common, &file)?;
    let hash = config_hash(&cfg);
    let dir = run_dir(&args.common, "mc-escape")?;
    write_config(&dir, &cfg, &hash)?;

    let summary = mc_escape_times(
        cfg.p,
        cfg.n,
        cfg.replicates,
        cfg.seed,
        0,
        cfg.horizon_cap,
        threads,
    )
    .map_err(core_usage)?;
    report::write_json(&dir.join("escape.json"), &summary)
        .map_err(|e| CliError::Other(e.into()))?;
    let curve_tmax: u64 = resolve(args.curve_tmax, &file, "curve_tmax", Some(0))?;
    if curve_tmax > 0 {
        let grid: Vec<u64> = (0..=curve_tmax).collect();
        let curve = summary.survival_curve(&grid).map_err(core_usage)?;
        report::write_survival_csv(&dir.join("survival.csv"), &curve)
            .map_err(|e| CliError::Other(e.into()))?;
    }
    println!(
        "mc-escape: N = {}, p = {}, mean = {} +- {} (99% CI), censored = {}, reports in {}",
        cfg.n,
        cfg.p,
        summary.mean,
        summary.mean_ci_halfwidth,
        summary.censored,
        dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// couple

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Dominance,
    Shifted,
    Asymmetric,
}

impl From<ModeArg> for CouplingMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Dominance => CouplingMode::Dominance,
            ModeArg::Shifted => CouplingMode::Shifted,
            ModeArg::Asymmetric => CouplingMode::Asymmetric,
        }
    }
}

#[derive(Args, Debug)]
pub struct CoupleArgs {
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    p: Option<f64>,
    /// Coupled steps per replicate (dominance/shifted).
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    replicates: Option<u64>,
    /// Barrier scale (shifted and asymmetric modes).
    #[arg(long = "N")]
    n: Option<u64>,
    /// Shift multiplier: the companion starts at the ERW position at d*N^2.
    #[arg(long)]
    d: Option<u64>,
    /// Barrier multiple at which the asymmetric coupling activates.
    #[arg(long = "A")]
    a: Option<u64>,
    /// Time-scale constant: activation waits until c*N^2.
    #[arg(long)]
    c: Option<f64>,
    /// Step cap per phase of the asymmetric coupling.
    #[arg(long)]
    max_steps: Option<u64>,
    /// Dump a k,erw,companion,distance CSV per replicate.
    #[arg(long)]
    trace: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Serialize)]
struct CoupleConfig {
    command: &'static str,
    mode: CouplingMode,
    p: f64,
    horizon: u64,
    replicates: u64,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<u64>,
    #[serde(rename = "A", skip_serializing_if = "Option::is_none")]
    a: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_steps: Option<u64>,
    seed: u64,
}

#[derive(Serialize)]
struct DominanceReport {
    mode: CouplingMode,
    p: f64,
    horizon: u64,
    replicates: u64,
    seed: u64,
    violations: u64,
    mean_distance: f64,
    max_distance: u64,
}

#[derive(Serialize)]
struct ShiftedReport {
    mode: CouplingMode,
    p: f64,
    #[serde(rename = "N")]
    n: u64,
    d: u64,
    horizon: u64,
    replicates: u64,
    seed: u64,
    violations: u64,
    window_steps: u64,
    mean_window_hits: f64,
    frac_window_hits_above_half_barrier: f64,
    mean_distance: f64,
}

#[derive(Serialize)]
struct AsymReport {
    mode: CouplingMode,
    p: f64,
    #[serde(rename = "A")]
    a: u64,
    #[serde(rename = "N")]
    n: u64,
    c: f64,
    replicates: u64,
    seed: u64,
    violations: u64,
    activated: u64,
    unresolved: u64,
    companion_up_probability: f64,
    erw_ruin_rate: f64,
    companion_ruin_rate: f64,
    formula_ruin_probability: f64,
}

fn cmd_couple(args: CoupleArgs) -> Result<(), CliError> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let mode: ModeArg = match args.mode {
        Some(m) => m,
        None => match file.get::<String>("mode")?.as_deref() {
            Some("dominance") => ModeArg::Dominance,
            Some("shifted") => ModeArg::Shifted,
            Some("asymmetric") => ModeArg::Asymmetric,
            Some(other) => return Err(CliError::Usage(format!("unknown mode '{other}'"))),
            None => return Err(CliError::Usage("missing required parameter 'mode'".into())),
        },
    };
    let p = resolve(args.p, &file, "p", None)?;
    let replicates = resolve(args.replicates, &file, "replicates", None)?;
    let seed = seed_from(&args.common, &file)?;
    let threads = threads_from(&args.common, &file)?;
    let n = match mode {
        ModeArg::Dominance => None,
        _ => Some(resolve(args.n, &file, "N", None)?),
    };
    let horizon = match mode {
        ModeArg::Asymmetric => 0,
        _ => resolve(args.horizon, &file, "horizon", None)?,
    };
    let cfg = CoupleConfig {
        command: "couple",
        mode: mode.into(),
        p,
        horizon,
        replicates,
        n,
        d: match mode {
            ModeArg::Shifted => Some(resolve(args.d, &file, "d", None)?),
            _ => None,
        },
        a: match mode {
            ModeArg::Asymmetric => Some(resolve(args.a, &file, "A", None)?),
            _ => None,
        },
        c: match mode {
            ModeArg::Asymmetric => Some(resolve(args.c, &file, "c", None)?),
            _ => None,
        },
        max_steps: match mode {
            ModeArg::Asymmetric => Some(resolve(
                args.max_steps,
                &file,
                "max_steps",
                Some(50_000_000),
            )?),
            _ => None,
        },
        seed,
    };
    let hash = config_hash(&cfg);
    let dir = run_dir(&args.common, "couple")?;
    write_config(&dir, &cfg, &hash)?;

    let key = |r: u64| StreamKey::new(seed, r, StreamPurpose::WalkDriver);
    let record = args.trace;
    let dump_trace =
        |r: u64, trace: &Option<erw_core::couplings::CoupledTrace>| -> Result<(), CliError> {
            if let Some(t) = trace {
                report::write_trace_csv(&dir.join(format!("trace-{r}.csv")), t)
                    .map_err(|e| CliError::Other(e.into()))?;
            }
            Ok(())
        };

    match mode {
        ModeArg::Dominance => {
            let results = erw_core::exec::map_replicates(replicates, threads, |r| {
                let mut stream = key(r).derive();
                run_dominance_coupling(p, horizon, &mut stream, record)
            });
            let mut distances = Vec::with_capacity(results.len());
            for (r, res) in results.into_iter().enumerate() {
                let out = res.map_err(|e| CliError::from_core(e, Some(key(r as u64)), &hash))?;
                dump_trace(r as u64, &out.trace)?;
                distances.push(out.final_distance);
            }
            let mean_distance =
                distances.iter().map(|&d| d as f64).sum::<f64>() / replicates as f64;
            let rep = DominanceReport {
                mode: cfg.mode,
                p,
                horizon,
                replicates,
                seed,
                violations: 0,
                mean_distance,
                max_distance: distances.iter().copied().max().unwrap_or(0),
            };
            report::write_json(&dir.join("couple.json"), &rep)
                .map_err(|e| CliError::Other(e.into()))?;
            println!(
                "couple dominance: p = {p}, {replicates} x {horizon} steps, 0 violations, \
                 mean distance = {mean_distance}, reports in {}",
                dir.display()
            );
        }
        ModeArg::Shifted => {
            let n = n.unwrap();
            let d = cfg.d.unwrap();
            let results = erw_core::exec::map_replicates(replicates, threads, |r| {
                let mut stream = key(r).derive();
                run_shifted_coupling(p, n, d, horizon, &mut stream, record)
            });
            let mut hits = Vec::with_capacity(results.len());
            let mut distances = Vec::with_capacity(results.len());
            let mut window_steps = 0;
            for (r, res) in results.into_iter().enumerate() {
                let out = res.map_err(|e| CliError::from_core(e, Some(key(r as u64)), &hash))?;
                dump_trace(r as u64, &out.trace)?;
                hits.push(out.window_hits);
                distances.push(out.final_distance);
                window_steps = out.window_steps;
            }
            let mean_window_hits = hits.iter().map(|&h| h as f64).sum::<f64>() / replicates as f64;
            let above = hits.iter().filter(|&&h| h as f64 > n as f64 / 2.0).count();
            let rep = ShiftedReport {
                mode: cfg.mode,
                p,
                n,
                d,
                horizon,
                replicates,
                seed,
                violations: 0,
                window_steps,
                mean_window_hits,
                frac_window_hits_above_half_barrier: above as f64 / replicates as f64,
                mean_distance: distances.iter().map(|&x| x as f64).sum::<f64>() / replicates as f64,
            };
            report::write_json(&dir.join("couple.json"), &rep)
                .map_err(|e| CliError::Other(e.into()))?;
            println!(
                "couple shifted: p = {p}, N = {n}, d = {d}, 0 violations, \
                 mean window hits = {mean_window_hits}, reports in {}",
                dir.display()
            );
        }
        ModeArg::Asymmetric => {
            let n = n.unwrap();
            let (a, c, max_steps) = (cfg.a.unwrap(), cfg.c.unwrap(), cfg.max_steps.unwrap());
            let results = erw_core::exec::map_replicates(replicates, threads, |r| {
                let mut stream = key(r).derive();
                run_asym_coupling(p, a, n, c, max_steps, &mut stream, record)
            });
            let mut activated = 0u64;
            let mut unresolved = 0u64;
            let mut erw_zero = 0u64;
            let mut comp_zero = 0u64;
            let mut resolved = 0u64;
            let mut p_n = f64::NAN;
            for (r, res) in results.into_iter().enumerate() {
                let out = res.map_err(|e| CliError::from_core(e, Some(key(r as u64)), &hash))?;
                dump_trace(r as u64, &out.trace)?;
                p_n = out.companion_up_probability;
                if out.activated_at.is_some() {
                    activated += 1;
                    if out.resolved {
                        resolved += 1;
                        erw_zero += out.erw_hit_zero as u64;
                        comp_zero += out.companion_hit_zero as u64;
                    } else {
                        unresolved += 1;
                    }
                }
            }
            let formula = asym_ruin_probability(a, n, p_n).map_err(core_usage)?;
            let rep = AsymReport {
                mode: cfg.mode,
                p,
                a,
                n,
                c,
                replicates,
                seed,
                violations: 0,
                activated,
                unresolved,
                companion_up_probability: p_n,
                erw_ruin_rate: erw_zero as f64 / resolved.max(1) as f64,
                companion_ruin_rate: comp_zero as f64 / resolved.max(1) as f64,
                formula_ruin_probability: formula,
            };
            report::write_json(&dir.join("couple.json"), &rep)
                .map_err(|e| CliError::Other(e.into()))?;
            println!(
                "couple asymmetric: p = {p}, A = {a}, N = {n}, c = {c}, activated {activated}/{replicates}, \
                 0 violations, reports in {}",
                dir.display()
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// tailfit

#[derive(Args, Debug)]
pub struct TailfitArgs {
    #[arg(long)]
    p: Option<f64>,
    #[arg(long = "N")]
    n: Option<u64>,
    /// Survival grid length; extends automatically below the window when omitted.
    #[arg(long)]
    tmax: Option<u64>,
    /// Fit window: survival values in [window-lo, window-hi].
    #[arg(long)]
    window_lo: Option<f64>,
    #[arg(long)]
    window_hi: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Serialize)]
struct TailfitConfig {
    command: &'static str,
    p: f64,
    #[serde(rename = "N")]
    n: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    tmax: Option<u64>,
    window_lo: f64,
    window_hi: f64,
}

fn cmd_tailfit(args: TailfitArgs) -> Result<(), CliError> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let cfg = TailfitConfig {
        command: "tailfit",
        p: resolve(args.p, &file, "p", None)?,
        n: resolve(args.n, &file, "N", None)?,
        tmax: args.tmax.or(file.get("tmax")?),
        window_lo: resolve(
            args.window_lo,
            &file,
            "window_lo",
            Some(DEFAULT_FIT_WINDOW.0),
        )?,
        window_hi: resolve(
            args.window_hi,
            &file,
            "window_hi",
            Some(DEFAULT_FIT_WINDOW.1),
        )?,
    };
    let hash = config_hash(&cfg);
    let dir = run_dir(&args.common, "tailfit")?;
    write_config(&dir, &cfg, &hash)?;

    let curve = match cfg.tmax {
        Some(t) => exact_survival(cfg.n, cfg.p, t).map_err(core_usage)?,
        None => exact_survival_until(
            cfg.n,
            cfg.p,
            cfg.window_lo / 10.0,
            default_horizon_cap(cfg.n),
        )
        .map_err(core_usage)?,
    };
    let fit = fit_tail(&curve, (cfg.window_lo, cfg.window_hi)).map_err(core_usage)?;
    report::write_survival_csv(&dir.join("survival.csv"), &curve)
        .map_err(|e| CliError::Other(e.into()))?;
    report::write_json(&dir.join("tailfit.json"), &fit).map_err(|e| CliError::Other(e.into()))?;
    println!(
        "tailfit: N = {}, p = {}, slope = {} (r^2 = {}), reports in {}",
        cfg.n,
        cfg.p,
        fit.slope,
        fit.r_squared,
        dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// theta

#[derive(Args, Debug)]
pub struct ThetaArgs {
    #[arg(long)]
    p: Option<f64>,
    /// Ascending barrier grid, e.g. --N 10,20,40.
    #[arg(long = "N", value_delimiter = ',')]
    n: Option<Vec<u64>>,
    #[arg(long)]
    replicates: Option<u64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Serialize)]
struct ThetaConfig {
    command: &'static str,
    p: f64,
    #[serde(rename = "N")]
    n_grid: Vec<u64>,
    replicates: u64,
    seed: u64,
}

#[derive(Serialize)]
struct ThetaReport {
    #[serde(flatten)]
    config: ThetaConfig,
    points: Vec<erw_core::estimators::ThetaPoint>,
    /// Largest-N normalized mean; no extrapolation.
    theta_hat: f64,
}

fn cmd_theta(args: ThetaArgs) -> Result<(), CliError> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let cfg = ThetaConfig {
        command: "theta",
        p: resolve(args.p, &file, "p", None)?,
        n_grid: resolve(args.n, &file, "N", None)?,
        replicates: resolve(args.replicates, &file, "replicates", None)?,
        seed: seed_from(&args.common, &file)?,
    };
    let threads = threads_from(&args.common, &file)?;
    let hash = config_hash(&cfg);
    let dir = run_dir(&args.common, "theta")?;
    write_config(&dir, &cfg, &hash)?;

    let points = estimate_theta(cfg.p, &cfg.n_grid, cfg.replicates, cfg.seed, threads)
        .map_err(core_usage)?;
    let theta_hat = points
        .last()
        .map(|pt| pt.normalized_mean)
        .unwrap_or(f64::NAN);
    for pt in &points {
        println!(
            "theta: N = {}, E[tau]/N^2 = {} +- {} (99% CI)",
            pt.n_barrier, pt.normalized_mean, pt.ci_halfwidth
        );
    }
    let rep = ThetaReport {
        config: cfg,
        points,
        theta_hat,
    };
    report::write_json(&dir.join("theta.json"), &rep).map_err(|e| CliError::Other(e.into()))?;
    println!(
        "theta: estimate = {theta_hat}, reports in {}",
        dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// limit

#[derive(Args, Debug)]
pub struct LimitArgs {
    #[arg(long)]
    p: Option<f64>,
    /// Grid spacing.
    #[arg(long)]
    h: Option<f64>,
    /// Sampling horizon (default scales with 3 - 4p).
    #[arg(long = "T")]
    t_max: Option<f64>,
    #[arg(long)]
    replicates: Option<u64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Serialize)]
struct LimitConfig {
    command: &'static str,
    p: f64,
    h: f64,
    #[serde(rename = "T")]
    t_max: f64,
    replicates: u64,
    seed: u64,
}

fn cmd_limit(args: LimitArgs) -> Result<(), CliError> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let p = resolve(args.p, &file, "p", None)?;
    if !(p > 0.0 && p < 0.75) {
        return Err(CliError::Usage(format!(
            "limit process requires 0 < p < 3/4, got {p}"
        )));
    }
    let cfg = LimitConfig {
        command: "limit",
        p,
        h: resolve(args.h, &file, "h", Some(1e-3))?,
        t_max: resolve(args.t_max, &file, "T", Some(default_t_max(p)))?,
        replicates: resolve(args.replicates, &file, "replicates", None)?,
        seed: seed_from(&args.common, &file)?,
    };
    let threads = threads_from(&args.common, &file)?;
    let hash = config_hash(&cfg);
    let dir = run_dir(&args.common, "limit")?;
    write_config(&dir, &cfg, &hash)?;

    let report_out =
        estimate_theta_limit(cfg.p, cfg.h, cfg.t_max, cfg.replicates, cfg.seed, threads)
            .map_err(core_usage)?;
    report::write_json(&dir.join("limit.json"), &report_out)
        .map_err(|e| CliError::Other(e.into()))?;
    println!(
        "limit: p = {}, theta_hat = {} +- {} (99% CI), censored fraction = {}, reports in {}",
        cfg.p,
        report_out.theta_hat,
        report_out.ci,
        report_out.censored_fraction,
        dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// urn-check

#[derive(Args, Debug)]
pub struct UrnCheckArgs {
    #[arg(long)]
    p: Option<f64>,
    /// Walk length at which |Z| samples are compared.
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    replicates: Option<u64>,
    /// KS significance level.
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Serialize)]
struct UrnCheckConfig {
    command: &'static str,
    p: f64,
    horizon: u64,
    replicates: u64,
    alpha: f64,
    seed: u64,
}

fn cmd_urn_check(args: UrnCheckArgs) -> Result<(), CliError> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let cfg = UrnCheckConfig {
        command: "urn-check",
        p: resolve(args.p, &file, "p", None)?,
        horizon: resolve(args.horizon, &file, "horizon", Some(10_000))?,
        replicates: resolve(args.replicates, &file, "replicates", Some(10_000))?,
        alpha: resolve(args.alpha, &file, "alpha", Some(0.01))?,
        seed: seed_from(&args.common, &file)?,
    };
    let threads = threads_from(&args.common, &file)?;
    let hash = config_hash(&cfg);
    let dir = run_dir(&args.common, "urn-check")?;
    write_config(&dir, &cfg, &hash)?;

    let rep = representation_equivalence(
        cfg.p,
        cfg.horizon,
        cfg.replicates,
        cfg.alpha,
        cfg.seed,
        threads,
    )
    .map_err(core_usage)?;
    report::write_json(&dir.join("representations.json"), &rep)
        .map_err(|e| CliError::Other(e.into()))?;
    for pair in &rep.pairs {
        println!(
            "urn-check: {:?} vs {:?}: KS = {} (critical {}), {}",
            pair.a,
            pair.b,
            pair.statistic,
            pair.critical,
            if pair.pass { "pass" } else { "FAIL" }
        );
    }
    println!("urn-check: reports in {}", dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// bounds-check

#[derive(Args, Debug)]
pub struct BoundsCheckArgs {
    #[arg(long = "N")]
    n: Option<u64>,
    /// Scale constants: entries > 1 check the Markov upper bound, entries in
    /// (0,1) the Kolmogorov lower bound. E.g. --c 3,0.5.
    #[arg(long, value_delimiter = ',')]
    c: Option<Vec<f64>>,
    #[arg(long)]
    replicates: Option<u64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Serialize)]
struct BoundsCheckConfig {
    command: &'static str,
    #[serde(rename = "N")]
    n: u64,
    c: Vec<f64>,
    replicates: u64,
    seed: u64,
}

fn cmd_bounds_check(args: BoundsCheckArgs) -> Result<(), CliError> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let cfg = BoundsCheckConfig {
        command: "bounds-check",
        n: resolve(args.n, &file, "N", None)?,
        c: resolve(args.c, &file, "c", None)?,
        replicates: resolve(args.replicates, &file, "replicates", Some(100_000))?,
        seed: seed_from(&args.common, &file)?,
    };
    let threads = threads_from(&args.common, &file)?;
    let hash = config_hash(&cfg);
    let dir = run_dir(&args.common, "bounds-check")?;
    write_config(&dir, &cfg, &hash)?;

    let rep = verify_markov_kolmogorov_bounds(cfg.n, &cfg.c, cfg.replicates, cfg.seed, threads)
        .map_err(core_usage)?;
    report::write_json(&dir.join("bounds.json"), &rep).map_err(|e| CliError::Other(e.into()))?;
    for check in &rep.checks {
        println!(
            "bounds-check: c = {}, {:?}: empirical = {}, bound = {}, {}",
            check.c,
            check.kind,
            check.empirical,
            check.bound,
            if check.satisfied { "pass" } else { "FAIL" }
        );
    }
    println!("bounds-check: reports in {}", dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// replay

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ReplayWhat {
    /// One mc-escape replicate: dumps k,position until absorption.
    Escape,
    Dominance,
    Shifted,
    Asymmetric,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    #[arg(long, value_enum)]
    what: Option<ReplayWhat>,
    /// Absolute replicate index from the failure report's stream key.
    #[arg(long)]
    replicate: Option<u64>,
    /// Config hash from the original run; replay refuses to run on mismatch.
    #[arg(long)]
    expect_config_hash: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long = "N")]
    n: Option<u64>,
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    horizon_cap: Option<u64>,
    #[arg(long)]
    d: Option<u64>,
    #[arg(long = "A")]
    a: Option<u64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    max_steps: Option<u64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Serialize)]
struct ReplayReport {
    command: &'static str,
    what: String,
    stream_key: StreamKey,
    config_hash: String,
    outcome: String,
}

fn cmd_replay(args: ReplayArgs) -> Result<(), CliError> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let what = args
        .what
        .ok_or_else(|| CliError::Usage("missing required parameter 'what'".into()))?;
    let replicate = resolve(args.replicate, &file, "replicate", None)?;
    let seed = seed_from(&args.common, &file)?;
    let p = resolve(args.p, &file, "p", None)?;

    // Recompute the original experiment's config hash so a mismatched replay
    // (wrong p, wrong N, ...) is rejected before any work.
    let (original_hash, what_name): (String, &'static str) = match what {
        ReplayWhat::Escape => {
            let n = resolve(args.n, &file, "N", None)?;
            let cfg = McEscapeConfig {
                command: "mc-escape",
                p,
                n,
                replicates: resolve(args.replicates, &file, "replicates", None)?,
                horizon_cap: resolve(
                    args.horizon_cap,
                    &file,
                    "horizon_cap",
                    Some(default_horizon_cap(n)),
                )?,
                seed,
            };
            (config_hash(&cfg), "escape")
        }
        ReplayWhat::Dominance | ReplayWhat::Shifted | ReplayWhat::Asymmetric => {
            let (mode, name) = match what {
                ReplayWhat::Dominance => (CouplingMode::Dominance, "dominance"),
                ReplayWhat::Shifted => (CouplingMode::Shifted, "shifted"),
                _ => (CouplingMode::Asymmetric, "asymmetric"),
            };
            let cfg = CoupleConfig {
                command: "couple",
                mode,
                p,
                horizon: match mode {
                    CouplingMode::Asymmetric => 0,
                    _ => resolve(args.horizon, &file, "horizon", None)?,
                },
                replicates: resolve(args.replicates, &file, "replicates", None)?,
                n: match mode {
                    CouplingMode::Dominance => None,
                    _ => Some(resolve(args.n, &file, "N", None)?),
                },
                d: match mode {
                    CouplingMode::Shifted => Some(resolve(args.d, &file, "d", None)?),
                    _ => None,
                },
                a: match mode {
                    CouplingMode::Asymmetric => Some(resolve(args.a, &file, "A", None)?),
                    _ => None,
                },
                c: match mode {
                    CouplingMode::Asymmetric => Some(resolve(args.c, &file, "c", None)?),
                    _ => None,
                },
                max_steps: match mode {
                    CouplingMode::Asymmetric => Some(resolve(
                        args.max_steps,
                        &file,
                        "max_steps",
                        Some(50_000_000),
                    )?),
                    _ => None,
                },
                seed,
            };
            (config_hash(&cfg), name)
        }
    };
    if let Some(expected) = &args.expect_config_hash {
        if expected != &original_hash {
            return Err(CliError::Usage(format!(
                "config hash mismatch: replayed config hashes to {original_hash}, \
                 failure report says {expected}; check p/N/replicates/seed"
            )));
        }
    }

    let stream_key = StreamKey::new(seed, replicate, StreamPurpose::WalkDriver);
    let dir = run_dir(&args.common, "replay")?;
    let mut stream = stream_key.derive();
    let outcome = match what {
        ReplayWhat::Escape => {
            let n = resolve(args.n, &file, "N", None)?;
            let cap = resolve(
                args.horizon_cap,
                &file,
                "horizon_cap",
                Some(default_horizon_cap(n)),
            )?;
            let mut positions = vec![0i64];
            let mut state = 0i64;
            let mut hit = None;
            for k in 1..=cap {
                state = step_abs_erw(state, k - 1, stream.next_uniform(), p);
                positions.push(state);
                if state == n as i64 {
                    hit = Some(k);
                    break;
                }
            }
            let traj = erw_core::walks::Trajectory {
                positions,
                params: erw_core::walks::WalkParams {
                    p,
                    representation: erw_core::walks::Representation::Kernel,
                },
            };
            report::write_trajectory_csv(&dir.join("trace.csv"), &traj)
                .map_err(|e| CliError::Other(e.into()))?;
            match hit {
                Some(k) => format!("absorbed at t = {k}"),
                None => "censored at horizon cap".to_string(),
            }
        }
        ReplayWhat::Dominance => {
            let horizon = resolve(args.horizon, &file, "horizon", None)?;
            let out = run_dominance_coupling(p, horizon, &mut stream, true)
                .map_err(|e| CliError::from_core(e, Some(stream_key), &original_hash))?;
            report::write_trace_csv(&dir.join("trace.csv"), out.trace.as_ref().unwrap())
                .map_err(|e| CliError::Other(e.into()))?;
            format!("ok, final distance = {}", out.final_distance)
        }
        ReplayWhat::Shifted => {
            let horizon = resolve(args.horizon, &file, "horizon", None)?;
            let n = resolve(args.n, &file, "N", None)?;
            let d = resolve(args.d, &file, "d", None)?;
            let out = run_shifted_coupling(p, n, d, horizon, &mut stream, true)
                .map_err(|e| CliError::from_core(e, Some(stream_key), &original_hash))?;
            report::write_trace_csv(&dir.join("trace.csv"), out.trace.as_ref().unwrap())
                .map_err(|e| CliError::Other(e.into()))?;
            format!(
                "ok, final distance = {}, window hits = {}",
                out.final_distance, out.window_hits
            )
        }
        ReplayWhat::Asymmetric => {
            let n = resolve(args.n, &file, "N", None)?;
            let a = resolve(args.a, &file, "A", None)?;
            let c = resolve(args.c, &file, "c", None)?;
            let max_steps = resolve(args.max_steps, &file, "max_steps", Some(50_000_000))?;
            let out = run_asym_coupling(p, a, n, c, max_steps, &mut stream, true)
                .map_err(|e| CliError::from_core(e, Some(stream_key), &original_hash))?;
            match out.trace.as_ref() {
                Some(t) => {
                    report::write_trace_csv(&dir.join("trace.csv"), t)
                        .map_err(|e| CliError::Other(e.into()))?;
                    format!(
                        "activated at t = {}, erw ruin = {}, companion ruin = {}",
                        out.activated_at.unwrap(),
                        out.erw_hit_zero,
                        out.companion_hit_zero
                    )
                }
                None => "never activated within the step cap".to_string(),
            }
        }
    };
    let rep = ReplayReport {
        command: "replay",
        what: what_name.to_string(),
        stream_key,
        config_hash: original_hash,
        outcome: outcome.clone(),
    };
    report::write_json(&dir.join("replay.json"), &rep).map_err(|e| CliError::Other(e.into()))?;
    println!(
        "replay {what_name} replicate {replicate}: {outcome}, trace in {}",
        dir.display()
    );
    Ok(())
}
