//! Command line for simulating paths, running the two Brownian-component
//! tests, Monte Carlo experiments and empirical report sweeps.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 degenerate statistic or cutoff.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use chrono::{NaiveDate, NaiveTime};
use clap::{Args, Parser, Subcommand, ValueEnum};

use bmtest::error::Error;
use bmtest::hypothesis::{
    test_brownian_null, test_no_brownian_null, validate_rate_conditions, BrownianNullConfig,
    NoBrownianNullConfig, RateCheck, TestKind,
};
use bmtest::ingest::{
    load_ticks, previous_tick_sample, read_path_csv, write_path_csv, write_ticks_csv,
    LoadOptions, SessionSpec,
};
use bmtest::mc::{
    run_limit_curves, run_rejection_experiment, run_standardized_histograms, write_curves_csv,
    write_manifest, write_rejection_csv, write_standardized_csv, ExperimentConfig, Profile,
    TestSpec,
};
use bmtest::report::{run_empirical_report, write_report_csv, write_report_json, ReportConfig};
use bmtest::simlab::{
    apply_additive_noise, calibrate_theta_qv_share, calibrate_theta_tail, simulate_path,
    PathRecipe, SVJumpModel, ShareCalibration, StableDriver,
};
use bmtest::variation::TruncationSpec;
use bmtest::SampledPath;

#[derive(Parser)]
#[command(name = "bmtest", version, about = "Brownian-component tests for high-frequency paths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a path from the stochastic volatility + stable jump model.
    Simulate(SimulateArgs),
    /// Test the null "a Brownian component is present".
    TestBm(TestBmArgs),
    /// Test the null "no Brownian component is present".
    TestNobm(TestNobmArgs),
    /// Run a Monte Carlo experiment over a simulated ensemble.
    Mc(McArgs),
    /// Sweep the statistics across sampling intervals on real or simulated data.
    Report(ReportArgs),
    /// Check the cutoff-rate conditions for a test.
    Validate(ValidateArgs),
}

#[derive(Args, Clone)]
struct DgpArgs {
    /// Disable the Brownian component (pure jump model).
    #[arg(long)]
    no_brownian: bool,
    /// Stability index of the jump driver; omit for no jump component.
    #[arg(long)]
    stable_beta: Option<f64>,
    /// Jump scale; exclusive with --tail-prob / --qv-share.
    #[arg(long)]
    theta: Option<f64>,
    /// Calibrate the jump scale to this exceedance probability at four
    /// long-run standard deviations of the continuous part.
    #[arg(long)]
    tail_prob: Option<f64>,
    /// Calibrate the jump scale to this expected share of quadratic
    /// variation attributable to jumps.
    #[arg(long)]
    qv_share: Option<f64>,
    /// Constant drift per year on the jump leg.
    #[arg(long, default_value_t = 0.0)]
    drift: f64,
    /// Long-run variance (annualized).
    #[arg(long, default_value_t = 0.0625)]
    eta: f64,
    /// Mean-reversion speed per year.
    #[arg(long, default_value_t = 5.0)]
    xi: f64,
    /// Volatility of variance (annualized).
    #[arg(long, default_value_t = 0.5)]
    phi: f64,
    /// Correlation between return and variance shocks.
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    rho: f64,
    /// Variance-jump rate per trading day.
    #[arg(long, default_value_t = 2.0 / 252.0)]
    vol_jump_intensity: f64,
    /// Initial variance; defaults to the long-run level.
    #[arg(long)]
    v0: Option<f64>,
    /// Initial log price.
    #[arg(long, default_value_t = 1.0)]
    x0: f64,
}

impl DgpArgs {
    fn recipe(&self, horizon_days: u32, step_seconds: f64, seed: u64) -> Result<PathRecipe, Error> {
        let sv = SVJumpModel {
            eta: self.eta,
            xi: self.xi,
            phi: self.phi,
            rho: self.rho,
            vol_jump_intensity: self.vol_jump_intensity,
            v0: self.v0.unwrap_or(self.eta),
            x0: self.x0,
            ..SVJumpModel::default()
        };
        let stable = match self.stable_beta {
            None => None,
            Some(beta) => {
                let picked = [self.theta.is_some(), self.tail_prob.is_some(), self.qv_share.is_some()]
                    .iter()
                    .filter(|b| **b)
                    .count();
                if picked != 1 {
                    return Err(Error::Config(
                        "choose exactly one of --theta, --tail-prob, --qv-share".to_string(),
                    ));
                }
                let theta = if let Some(t) = self.theta {
                    t
                } else if let Some(p) = self.tail_prob {
                    calibrate_theta_tail(p, self.eta, step_seconds, beta)?
                } else {
                    calibrate_theta_qv_share(
                        self.qv_share.unwrap(),
                        &sv,
                        beta,
                        horizon_days.min(2),
                        step_seconds,
                        ShareCalibration::default(),
                    )?
                };
                Some(StableDriver {
                    beta,
                    theta,
                    drift: self.drift,
                })
            }
        };
        Ok(PathRecipe {
            include_brownian: !self.no_brownian,
            sv: (!self.no_brownian).then_some(sv),
            stable,
            horizon_days,
            step_seconds,
            seed,
        })
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    dgp: DgpArgs,
    #[arg(long, default_value_t = 21)]
    days: u32,
    #[arg(long, default_value_t = 5.0)]
    step_seconds: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Additive Gaussian observation noise applied after simulation.
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Write the path in the grid_index,log_price,day_id format.
    #[arg(long)]
    out_path: Option<PathBuf>,
    /// Write a synthetic tick file for the ingestion pipeline.
    #[arg(long)]
    out_ticks: Option<PathBuf>,
    /// Calendar date of the first day in the tick export.
    #[arg(long, default_value = "2006-01-02")]
    start_date: String,
    /// Write the ground-truth record as JSON.
    #[arg(long)]
    out_truth: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Path file in the grid_index,log_price,day_id format.
    #[arg(long, conflicts_with = "ticks")]
    path_csv: Option<PathBuf>,
    /// Tick file with header timestamp,price[,condition].
    #[arg(long)]
    ticks: Option<PathBuf>,
    /// Grid step in seconds (native step of --path-csv, or the sampling
    /// step applied to --ticks).
    #[arg(long, default_value_t = 5.0)]
    step_seconds: f64,
    /// Session open for tick sampling (HH:MM or HH:MM:SS).
    #[arg(long, default_value = "09:30")]
    session_open: String,
    /// Session close for tick sampling.
    #[arg(long, default_value = "16:00")]
    session_close: String,
    /// Comma-separated condition codes to keep (empty string allowed).
    #[arg(long)]
    allow: Option<String>,
    /// Sort out-of-order ticks instead of failing.
    #[arg(long)]
    sort: bool,
}

impl InputArgs {
    fn load(&self) -> Result<SampledPath, Error> {
        match (&self.path_csv, &self.ticks) {
            (Some(p), None) => read_path_csv(p, self.step_seconds),
            (None, Some(t)) => {
                let options = LoadOptions {
                    condition_allowlist: self.allow.as_ref().map(|a| {
                        a.split(',').map(|s| s.trim().to_string()).collect::<BTreeSet<_>>()
                    }),
                    sort: self.sort,
                };
                let series = load_ticks(t, &options)?;
                if series.dropped_by_condition > 0 {
                    eprintln!(
                        "dropped {} ticks outside the condition allowlist",
                        series.dropped_by_condition
                    );
                }
                let session = SessionSpec::new(
                    parse_time(&self.session_open)?,
                    parse_time(&self.session_close)?,
                    Vec::new(),
                )?;
                let (path, report) = previous_tick_sample(&series, self.step_seconds, &session)?;
                if !report.skipped_days.is_empty() {
                    eprintln!("skipped empty days: {}", report.skipped_days.join(", "));
                }
                if !report.backfilled_days.is_empty() {
                    eprintln!(
                        "back-filled opening prices on: {}",
                        report.backfilled_days.join(", ")
                    );
                }
                Ok(path)
            }
            _ => Err(Error::Config(
                "provide exactly one of --path-csv or --ticks".to_string(),
            )),
        }
    }
}

#[derive(Args, Clone)]
struct TruncationArgs {
    /// Cutoff as a multiple of the estimated per-step volatility.
    #[arg(long)]
    alpha: Option<f64>,
    /// Pre-estimation cutoff exponent for --alpha.
    #[arg(long, default_value_t = 0.45)]
    varpi: f64,
    /// Cutoff as the (1-q)-quantile of absolute increments.
    #[arg(long)]
    percentile: Option<f64>,
    /// Fixed cutoff in log-price units.
    #[arg(long)]
    cutoff: Option<f64>,
}

impl TruncationArgs {
    fn spec(&self) -> Result<TruncationSpec, Error> {
        match (self.alpha, self.percentile, self.cutoff) {
            (Some(a), None, None) => Ok(TruncationSpec::VolMultiple {
                alpha: a,
                varpi: self.varpi,
            }),
            (None, Some(q), None) => Ok(TruncationSpec::Percentile { q }),
            (None, None, Some(u)) => Ok(TruncationSpec::Absolute { u }),
            _ => Err(Error::Config(
                "choose exactly one of --alpha, --percentile, --cutoff".to_string(),
            )),
        }
    }
}

#[derive(Args)]
struct TestBmArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    truncation: TruncationArgs,
    #[arg(long, default_value_t = 1.5)]
    p: f64,
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Assumed bound on the jump activity index for the rate check.
    #[arg(long)]
    beta0: Option<f64>,
    /// Cutoff exponent assumed by the rate check.
    #[arg(long)]
    check_varpi: Option<f64>,
    /// Run even when the rate check fails.
    #[arg(long)]
    override_rate_check: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TestNobmArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    truncation: TruncationArgs,
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[arg(long)]
    beta0: Option<f64>,
    #[arg(long)]
    check_varpi: Option<f64>,
    #[arg(long)]
    override_rate_check: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum WhichTest {
    Bm,
    Nobm,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ProfileArg {
    Quick,
    Paper,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    dgp: DgpArgs,
    #[arg(long, value_enum)]
    test: WhichTest,
    #[arg(long, value_enum, default_value_t = ProfileArg::Quick)]
    profile: ProfileArg,
    /// Override the profile's ensemble size.
    #[arg(long)]
    n_paths: Option<usize>,
    /// Override the profile's horizon.
    #[arg(long)]
    days: Option<u32>,
    #[arg(long, default_value_t = 5.0)]
    step_seconds: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Powers p (test bm) or ratios gamma (test nobm), comma separated.
    #[arg(long, default_value = "1.5", allow_hyphen_values = false)]
    exponents: String,
    #[arg(long, default_value_t = 2)]
    k: u32,
    /// Volatility-multiple cutoffs to sweep, comma separated.
    #[arg(long)]
    alpha_grid: Option<String>,
    #[arg(long, default_value_t = 0.45)]
    varpi: f64,
    /// Percentile cutoffs to sweep, comma separated.
    #[arg(long)]
    percentile_grid: Option<String>,
    /// Absolute cutoffs to sweep, comma separated.
    #[arg(long)]
    cutoff_grid: Option<String>,
    #[arg(long, default_value = "0.05,0.10")]
    levels: String,
    /// Activity index for overlay lines in curve output.
    #[arg(long)]
    beta_overlay: Option<f64>,
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Also write ensemble-mean curves.
    #[arg(long)]
    curves: bool,
    /// Also write standardized-statistic summaries.
    #[arg(long)]
    standardized: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    truncation: TruncationArgs,
    /// Sampling intervals in seconds, comma separated.
    #[arg(long, default_value = "5,30,60,300,600,1800")]
    steps: String,
    #[arg(long, default_value = "1.25,1.5,1.75")]
    powers: String,
    #[arg(long, default_value_t = 2)]
    k: u32,
    /// Also evaluate the dual-cutoff statistic at this ratio.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    /// Activity index for the pure-jump reference lines.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, value_enum)]
    test: WhichTest,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    beta0: f64,
    #[arg(long)]
    varpi: f64,
}

fn parse_time(s: &str) -> Result<NaiveTime, Error> {
    NaiveTime::parse_from_str(s, "%H:%M:%S")
        .or_else(|_| NaiveTime::parse_from_str(s, "%H:%M"))
        .map_err(|_| Error::Config(format!("bad time of day '{s}'")))
}

fn parse_grid(s: &str, what: &str) -> Result<Vec<f64>, Error> {
    let vals: Result<Vec<f64>, _> = s.split(',').map(|x| x.trim().parse::<f64>()).collect();
    vals.map_err(|_| Error::Config(format!("bad {what} grid '{s}'")))
}

fn rate_check(beta0: Option<f64>, varpi: Option<f64>) -> Result<Option<RateCheck>, Error> {
    match (beta0, varpi) {
        (None, None) => Ok(None),
        (Some(b), Some(w)) => Ok(Some(RateCheck { beta0: b, varpi: w })),
        _ => Err(Error::Config(
            "--beta0 and --check-varpi must be given together".to_string(),
        )),
    }
}

fn write_or_print(doc: &serde_json::Value, out: Option<&Path>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(doc).map_err(|e| Error::Data(e.to_string()))? + "\n";
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(args) => {
            let recipe = args.dgp.recipe(args.days, args.step_seconds, args.seed)?;
            let (mut path, truth) = simulate_path(&recipe)?;
            if let Some(sd) = args.noise_sd {
                path = apply_additive_noise(&path, sd, args.seed ^ 0x4E015E);
            }
            if args.out_path.is_none() && args.out_ticks.is_none() {
                return Err(Error::Config(
                    "give --out-path and/or --out-ticks".to_string(),
                ));
            }
            if let Some(p) = &args.out_path {
                write_path_csv(&path, p)?;
            }
            if let Some(t) = &args.out_ticks {
                let date = NaiveDate::parse_from_str(&args.start_date, "%Y-%m-%d")
                    .map_err(|_| Error::Config(format!("bad --start-date {}", args.start_date)))?;
                write_ticks_csv(&path, t, date, &SessionSpec::regular(Vec::new()))?;
            }
            if let Some(f) = &args.out_truth {
                let doc = serde_json::json!({
                    "schema_version": 1,
                    "recipe": recipe,
                    "truth": truth,
                });
                write_or_print(&doc, Some(f))?;
            }
            eprintln!(
                "simulated {} days at {}s: {} ({} observations)",
                args.days,
                args.step_seconds,
                truth.label,
                path.observations().len()
            );
            Ok(())
        }
        Command::TestBm(args) => {
            let cfg = BrownianNullConfig {
                p: args.p,
                k: args.k,
                truncation: args.truncation.spec()?,
                level: args.level,
                rate_check: rate_check(args.beta0, args.check_varpi)?,
                override_rate_check: args.override_rate_check,
            };
            cfg.validate()?;
            let path = args.input.load()?;
            let result = test_brownian_null(&path, &cfg)?;
            let doc = serde_json::json!({
                "schema_version": 1,
                "test": "brownian_null",
                "config": cfg,
                "statistic": result.statistic,
                "variance": result.variance,
                "null_limit": result.null_limit,
                "critical_value": result.critical_value,
                "z_score": result.z_score,
                "reject": result.reject,
                "diagnostics": result.diagnostics,
            });
            write_or_print(&doc, args.out.as_deref())
        }
        Command::TestNobm(args) => {
            let cfg = NoBrownianNullConfig {
                gamma: args.gamma,
                truncation: args.truncation.spec()?,
                level: args.level,
                rate_check: rate_check(args.beta0, args.check_varpi)?,
                override_rate_check: args.override_rate_check,
            };
            cfg.validate()?;
            let path = args.input.load()?;
            let result = test_no_brownian_null(&path, &cfg)?;
            let doc = serde_json::json!({
                "schema_version": 1,
                "test": "no_brownian_null",
                "config": cfg,
                "statistic": result.statistic,
                "variance": result.variance,
                "null_limit": result.null_limit,
                "critical_value": result.critical_value,
                "z_score": result.z_score,
                "reject": result.reject,
                "diagnostics": result.diagnostics,
            });
            write_or_print(&doc, args.out.as_deref())
        }
        Command::Mc(args) => {
            let started = Instant::now();
            let profile = match args.profile {
                ProfileArg::Quick => Profile::Quick,
                ProfileArg::Paper => Profile::Paper,
            };
            let (days, n_paths) = profile.defaults();
            let days = args.days.unwrap_or(days);
            let n_paths = args.n_paths.unwrap_or(n_paths);
            let recipe = args.dgp.recipe(days, args.step_seconds, args.seed)?;
            let mut truncations = Vec::new();
            if let Some(g) = &args.alpha_grid {
                for a in parse_grid(g, "alpha")? {
                    truncations.push(TruncationSpec::VolMultiple {
                        alpha: a,
                        varpi: args.varpi,
                    });
                }
            }
            if let Some(g) = &args.percentile_grid {
                for q in parse_grid(g, "percentile")? {
                    truncations.push(TruncationSpec::Percentile { q });
                }
            }
            if let Some(g) = &args.cutoff_grid {
                for u in parse_grid(g, "cutoff")? {
                    truncations.push(TruncationSpec::Absolute { u });
                }
            }
            if truncations.is_empty() {
                return Err(Error::Config(
                    "give at least one of --alpha-grid, --percentile-grid, --cutoff-grid"
                        .to_string(),
                ));
            }
            let cfg = ExperimentConfig {
                recipe,
                test: match args.test {
                    WhichTest::Bm => TestSpec::Brownian { k: args.k },
                    WhichTest::Nobm => TestSpec::NoBrownian,
                },
                n_paths,
                exponents: parse_grid(&args.exponents, "exponent")?,
                truncations,
                levels: parse_grid(&args.levels, "level")?,
                beta_overlay: args.beta_overlay,
                noise_sd: args.noise_sd,
            };
            std::fs::create_dir_all(&args.out)?;
            let table = run_rejection_experiment(&cfg)?;
            write_rejection_csv(&table, &args.out.join("rejections.csv"))?;
            if args.curves {
                let rows = run_limit_curves(&cfg)?;
                write_curves_csv(&rows, &args.out.join("curves.csv"))?;
            }
            if args.standardized {
                let rows = run_standardized_histograms(&cfg)?;
                write_standardized_csv(&rows, &args.out.join("standardized.csv"))?;
            }
            write_manifest(&cfg, "mc", started, &args.out.join("manifest.json"))?;
            eprintln!(
                "wrote {} rejection rows to {}",
                table.rows.len(),
                args.out.display()
            );
            Ok(())
        }
        Command::Report(args) => {
            let cfg = ReportConfig {
                steps_seconds: parse_grid(&args.steps, "step")?,
                powers: parse_grid(&args.powers, "power")?,
                k: args.k,
                gamma: args.gamma,
                truncation: args.truncation.spec()?,
                confidence: args.confidence,
                beta_overlay: args.beta,
            };
            cfg.validate()?;
            let path = args.input.load()?;
            let rows = run_empirical_report(&path, &cfg)?;
            std::fs::create_dir_all(&args.out)?;
            write_report_csv(&rows, &args.out.join("report.csv"))?;
            write_report_json(&rows, &cfg, &args.out.join("report.json"))?;
            eprintln!("wrote {} report rows to {}", rows.len(), args.out.display());
            Ok(())
        }
        Command::Validate(args) => {
            let kind = match args.test {
                WhichTest::Bm => TestKind::BrownianNull,
                WhichTest::Nobm => TestKind::NoBrownianNull,
            };
            let report = validate_rate_conditions(kind, args.p, args.beta0, args.varpi)?;
            let doc = serde_json::json!({
                "schema_version": 1,
                "pass": report.pass,
                "explanation": report.explanation,
                "admissible_varpi": report.admissible_varpi,
            });
            write_or_print(&doc, None)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
