//! Monte Carlo experiment harness: rejection-rate tables, limit curves and
//! standardized-statistic summaries over simulated ensembles.
//!
//! Paths are simulated with per-path seeds derived from the master seed,
//! so results are byte-identical regardless of how many worker threads run
//! the ensemble.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hypothesis::{evaluate_frequency_point, evaluate_truncation_point, PointEval};
use crate::simlab::{apply_additive_noise, derive_seed, simulate_path, PathRecipe};
use crate::specialfn::{normal_cdf, normal_quantile};
use crate::variation::TruncationSpec;

/// Which statistic an experiment sweeps.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum TestSpec {
    /// Dual-frequency test (null: Brownian present) at frequency ratio `k`.
    Brownian { k: u32 },
    /// Dual-cutoff test (null: no Brownian).
    NoBrownian,
}

/// Scale presets: `Quick` for CI-sized runs, `Paper` for table-scale runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Quick,
    Paper,
}

impl Profile {
    /// (horizon in days, ensemble size)
    pub fn defaults(self) -> (u32, usize) {
        match self {
            Profile::Quick => (5, 300),
            Profile::Paper => (21, 1000),
        }
    }
}

/// One Monte Carlo experiment: a recipe template, a test, and sweep grids.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExperimentConfig {
    /// Template recipe; its `seed` acts as the master seed and per-path
    /// seeds are derived from it.
    pub recipe: PathRecipe,
    pub test: TestSpec,
    pub n_paths: usize,
    /// Powers `p` (test 1) or cutoff ratios `γ` (test 2) to sweep.
    pub exponents: Vec<f64>,
    pub truncations: Vec<TruncationSpec>,
    /// Nominal levels for rejection tables.
    pub levels: Vec<f64>,
    /// Activity index used for the jump-regime overlay lines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_overlay: Option<f64>,
    /// Additive observation noise applied after simulation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sd: Option<f64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.recipe.validate()?;
        if self.n_paths == 0 {
            return Err(Error::Config("experiment needs at least one path".to_string()));
        }
        if self.exponents.is_empty() || self.truncations.is_empty() {
            return Err(Error::Config("sweep grids must be non-empty".to_string()));
        }
        for t in &self.truncations {
            t.validate()?;
        }
        for &l in &self.levels {
            if !(l > 0.0 && l < 1.0) {
                return Err(Error::Config(format!("level {l} outside (0,1)")));
            }
        }
        Ok(())
    }

    fn grid(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &e in &self.exponents {
            for t in &self.truncations {
                out.push(GridPoint {
                    exponent: e,
                    truncation: t.clone(),
                });
            }
        }
        out
    }

    fn null_limit(&self, exponent: f64) -> f64 {
        match self.test {
            TestSpec::Brownian { k } => (k as f64).powf(1.0 - exponent / 2.0),
            TestSpec::NoBrownian => exponent * exponent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GridPoint {
    /// Power `p` (test 1) or cutoff ratio `γ` (test 2).
    pub exponent: f64,
    pub truncation: TruncationSpec,
}

impl GridPoint {
    pub fn label(&self) -> String {
        format!("{}|{}", self.exponent, self.truncation.describe())
    }
}

/// Per-path, per-grid-point evaluations for one ensemble.
pub struct EnsembleEvaluations {
    pub grid: Vec<GridPoint>,
    /// `evals[point][path]`, ordered by path index.
    pub evals: Vec<Vec<std::result::Result<PointEval, String>>>,
    pub n_paths: usize,
}

/// Simulate the ensemble and evaluate every grid point on every path.
/// This is the shared engine behind the three experiment runners.
pub fn evaluate_ensemble(cfg: &ExperimentConfig) -> Result<EnsembleEvaluations> {
    cfg.validate()?;
    let grid = cfg.grid();
    let master = cfg.recipe.seed;
    let per_path: Vec<Vec<std::result::Result<PointEval, String>>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut recipe = cfg.recipe.clone();
            recipe.seed = derive_seed(master, i as u64);
            let (mut path, _truth) = match simulate_path(&recipe) {
                Ok(x) => x,
                Err(e) => return vec![Err(e.to_string()); grid.len()],
            };
            if let Some(sd) = cfg.noise_sd {
                path = apply_additive_noise(&path, sd, derive_seed(master ^ 0x4E015E, i as u64));
            }
            grid.iter()
                .map(|pt| {
                    let r = match cfg.test {
                        TestSpec::Brownian { k } => {
                            evaluate_frequency_point(&path, pt.exponent, k, &pt.truncation)
                        }
                        TestSpec::NoBrownian => {
                            evaluate_truncation_point(&path, pt.exponent, &pt.truncation)
                        }
                    };
                    r.map_err(|e| e.to_string())
                })
                .collect()
        })
        .collect();
    // transpose to per-grid-point vectors ordered by path index
    let mut evals = vec![Vec::with_capacity(cfg.n_paths); grid.len()];
    for path_evals in per_path {
        for (g, e) in path_evals.into_iter().enumerate() {
            evals[g].push(e);
        }
    }
    Ok(EnsembleEvaluations {
        grid,
        evals,
        n_paths: cfg.n_paths,
    })
}

// ---------------------------------------------------------------------------
// Rejection tables
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RejectionRow {
    pub exponent: f64,
    pub truncation: String,
    pub level: f64,
    pub n_paths: usize,
    pub n_valid: usize,
    pub n_degenerate: usize,
    pub n_reject: usize,
    /// Rejection rate among valid paths; absent where the CLT does not
    /// standardize the statistic (e.g. p outside (1,2)).
    pub rate: Option<f64>,
    /// Binomial standard error `sqrt(rate(1-rate)/n_valid)`; zero for a
    /// single path by the same formula.
    pub std_error: Option<f64>,
    /// Set when more than 10% of paths were degenerate at this point.
    pub warning: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RejectionTable {
    pub rows: Vec<RejectionRow>,
}

/// Simulate under the recipe and tabulate rejection rates per grid point
/// and nominal level. Degenerate paths are counted separately, never as
/// rejections.
pub fn run_rejection_experiment(cfg: &ExperimentConfig) -> Result<RejectionTable> {
    if cfg.levels.is_empty() {
        return Err(Error::Config("rejection experiment needs levels".to_string()));
    }
    let ens = evaluate_ensemble(cfg)?;
    let mut rows = Vec::new();
    for (g, pt) in ens.grid.iter().enumerate() {
        let evals = &ens.evals[g];
        let n_degenerate = evals.iter().filter(|e| e.is_err()).count();
        let n_valid = ens.n_paths - n_degenerate;
        let warning = n_degenerate * 10 > ens.n_paths;
        for &level in &cfg.levels {
            let z = normal_quantile(level)?;
            let limit = cfg.null_limit(pt.exponent);
            let mut n_reject = 0usize;
            let mut decidable = n_valid > 0;
            for e in evals.iter().flatten() {
                match e.variance {
                    Some(v) if v > 0.0 => {
                        if e.statistic < limit - z * v.sqrt() {
                            n_reject += 1;
                        }
                    }
                    _ => {
                        decidable = false;
                    }
                }
            }
            let (rate, std_error) = if decidable {
                let r = n_reject as f64 / n_valid as f64;
                (Some(r), Some((r * (1.0 - r) / n_valid as f64).sqrt()))
            } else {
                (None, None)
            };
            rows.push(RejectionRow {
                exponent: pt.exponent,
                truncation: pt.truncation.describe(),
                level,
                n_paths: ens.n_paths,
                n_valid,
                n_degenerate,
                n_reject,
                rate,
                std_error,
                warning,
            });
        }
    }
    Ok(RejectionTable { rows })
}

// ---------------------------------------------------------------------------
// Limit curves
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CurveRow {
    pub exponent: f64,
    pub truncation: String,
    pub n_valid: usize,
    pub n_degenerate: usize,
    pub mean: f64,
    pub std_dev: f64,
    /// Named theoretical reference values for this grid point.
    pub theory: Vec<(String, f64)>,
}

/// Ensemble mean and spread of the raw statistic per grid point, with the
/// applicable theoretical limits attached.
pub fn run_limit_curves(cfg: &ExperimentConfig) -> Result<Vec<CurveRow>> {
    let ens = evaluate_ensemble(cfg)?;
    let mut rows = Vec::new();
    for (g, pt) in ens.grid.iter().enumerate() {
        let stats: Vec<f64> = ens.evals[g]
            .iter()
            .flatten()
            .map(|e| e.statistic)
            .collect();
        let n_valid = stats.len();
        let n_degenerate = ens.n_paths - n_valid;
        let (mean, std_dev) = mean_std(&stats);
        let mut theory = Vec::new();
        match cfg.test {
            TestSpec::Brownian { k } => {
                let kf = k as f64;
                let p = pt.exponent;
                theory.push(("brownian".to_string(), kf.powf(1.0 - p / 2.0)));
                theory.push(("jump_dominated".to_string(), 1.0));
                theory.push(("drift_dominated".to_string(), kf.powf(1.0 - p)));
                if let Some(beta) = cfg.beta_overlay {
                    theory.push(("jump_below_activity".to_string(), kf.powf(1.0 - p / beta)));
                }
                theory.push(("additive_noise".to_string(), kf));
                theory.push(("rounding_noise".to_string(), kf.sqrt()));
            }
            TestSpec::NoBrownian => {
                let gamma = pt.exponent;
                theory.push(("no_brownian".to_string(), gamma * gamma));
                if let Some(beta) = cfg.beta_overlay {
                    theory.push(("brownian".to_string(), gamma.powf(beta)));
                }
            }
        }
        rows.push(CurveRow {
            exponent: pt.exponent,
            truncation: pt.truncation.describe(),
            n_valid,
            n_degenerate,
            mean,
            std_dev,
            theory,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Standardized statistics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct NormalitySummary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    /// Kolmogorov–Smirnov distance to the standard normal CDF.
    pub ks_distance: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StandardizedRow {
    pub exponent: f64,
    pub truncation: String,
    pub n_degenerate: usize,
    pub summary: NormalitySummary,
    /// The standardized sample itself, ordered by path index.
    pub samples: Vec<f64>,
}

/// Ensemble of `(statistic - null limit)/√variance` per grid point, with
/// moment and distance summaries against the standard normal.
pub fn run_standardized_histograms(cfg: &ExperimentConfig) -> Result<Vec<StandardizedRow>> {
    let ens = evaluate_ensemble(cfg)?;
    let mut rows = Vec::new();
    for (g, pt) in ens.grid.iter().enumerate() {
        let limit = cfg.null_limit(pt.exponent);
        let mut samples = Vec::new();
        let mut n_degenerate = 0usize;
        for e in &ens.evals[g] {
            match e {
                Ok(ev) => match ev.variance {
                    Some(v) if v > 0.0 => samples.push((ev.statistic - limit) / v.sqrt()),
                    _ => {
                        return Err(Error::Config(format!(
                            "grid point {} has no standardization (CLT range)",
                            pt.label()
                        )))
                    }
                },
                Err(_) => n_degenerate += 1,
            }
        }
        let summary = normality_summary(&samples);
        rows.push(StandardizedRow {
            exponent: pt.exponent,
            truncation: pt.truncation.describe(),
            n_degenerate,
            summary,
            samples,
        });
    }
    Ok(rows)
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Moment and KS summary of a sample against the standard normal.
pub fn normality_summary(samples: &[f64]) -> NormalitySummary {
    let n = samples.len();
    let (mean, sd) = mean_std(samples);
    let variance = sd * sd;
    let skewness = if n >= 3 && sd > 0.0 {
        let nf = n as f64;
        let m3 = samples.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / nf;
        let m2 = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
        m3 / m2.powf(1.5)
    } else {
        0.0
    };
    NormalitySummary {
        n,
        mean,
        variance,
        skewness,
        ks_distance: ks_distance_normal(samples),
    }
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and
/// the standard normal CDF.
pub fn ks_distance_normal(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = normal_cdf(x);
        let hi = (i as f64 + 1.0) / n - cdf;
        let lo = cdf - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    d
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

const SCHEMA_VERSION: u32 = 1;

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

/// Write the rejection table as CSV (one row per grid point and level).
pub fn write_rejection_csv(table: &RejectionTable, path: &Path) -> Result<()> {
    let mut out = String::from(
        "exponent,truncation,level,n_paths,n_valid,n_degenerate,n_reject,rate,std_error,warning\n",
    );
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.exponent,
            r.truncation,
            r.level,
            r.n_paths,
            r.n_valid,
            r.n_degenerate,
            r.n_reject,
            fmt_opt(r.rate),
            fmt_opt(r.std_error),
            r.warning
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Write limit-curve rows as CSV; theory overlays are flattened into
/// `name=value` pairs separated by semicolons.
pub fn write_curves_csv(rows: &[CurveRow], path: &Path) -> Result<()> {
    let mut out =
        String::from("exponent,truncation,n_valid,n_degenerate,mean,std_dev,theory\n");
    for r in rows {
        let theory = r
            .theory
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.exponent, r.truncation, r.n_valid, r.n_degenerate, r.mean, r.std_dev, theory
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Write standardized summaries as CSV (samples go to a sidecar if wanted).
pub fn write_standardized_csv(rows: &[StandardizedRow], path: &Path) -> Result<()> {
    let mut out = String::from(
        "exponent,truncation,n,n_degenerate,mean,variance,skewness,ks_distance\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.exponent,
            r.truncation,
            r.summary.n,
            r.n_degenerate,
            r.summary.mean,
            r.summary.variance,
            r.summary.skewness,
            r.summary.ks_distance
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Config echo, seed, package version and wall time. The wall-time field
/// varies run to run; the data CSVs are the byte-reproducible artifacts.
pub fn write_manifest(
    cfg: &ExperimentConfig,
    kind: &str,
    started: Instant,
    path: &Path,
) -> Result<()> {
    let manifest = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "config": cfg,
        "master_seed": cfg.recipe.seed,
        "package_version": env!("CARGO_PKG_VERSION"),
        "wall_time_secs": started.elapsed().as_secs_f64(),
    });
    std::fs::write(path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Data(format!("JSON serialization failed: {e}"))
    }
}
