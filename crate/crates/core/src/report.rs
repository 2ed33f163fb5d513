//! Empirical report generation: statistic sweeps across sampling intervals
//! with confidence intervals and reference lines.
//!
//! Mirrors the empirical procedure: per-day cutoffs, per-day variations
//! added up over the whole sample, and a grid of sampling intervals from
//! seconds to half-hours. Reference lines cover the Brownian limit, the
//! pure-jump limit at a user-supplied activity index, and the two noise
//! regimes (additive noise pushes the dual-frequency ratio to `k`,
//! rounding to `√k`).

use std::path::Path;

use crate::error::{Error, Result};
use crate::hypothesis::{evaluate_frequency_point, evaluate_truncation_point};
use crate::path::SampledPath;
use crate::specialfn::normal_quantile;
use crate::variation::TruncationSpec;

/// Sweep configuration for the empirical report.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReportConfig {
    /// Sampling intervals to evaluate, in seconds; each must be an integer
    /// multiple of the input path's native step.
    pub steps_seconds: Vec<f64>,
    /// Powers for the dual-frequency statistic.
    pub powers: Vec<f64>,
    pub k: u32,
    /// Optional cutoff ratio: adds dual-cutoff rows per sampling interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub truncation: TruncationSpec,
    /// Two-sided confidence level for the intervals (e.g. 0.95).
    pub confidence: f64,
    /// Activity index for the pure-jump reference lines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_overlay: Option<f64>,
}

impl ReportConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_seconds.is_empty() {
            return Err(Error::Config("report needs sampling intervals".to_string()));
        }
        if self.powers.is_empty() && self.gamma.is_none() {
            return Err(Error::Config(
                "report needs powers or a cutoff ratio".to_string(),
            ));
        }
        if self.k < 2 {
            return Err(Error::Config(format!("k must be at least 2, got {}", self.k)));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Config(format!(
                "confidence must lie in (0,1), got {}",
                self.confidence
            )));
        }
        self.truncation.validate()
    }
}

/// One grid point of the report.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ReportRow {
    pub step_seconds: f64,
    /// "frequency_ratio" or "cutoff_ratio".
    pub statistic_kind: String,
    /// Power `p` or cutoff ratio `γ`.
    pub exponent: f64,
    pub statistic: Option<f64>,
    pub variance: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub reference: Vec<(String, f64)>,
    /// Degenerate-statistic message when the point could not be evaluated.
    pub error: Option<String>,
}

/// Coarsen a path by keeping every `stride`-th observation within each day
/// (the grid starts at each day's first observation; a trailing partial
/// block is dropped).
pub fn resample_path(path: &SampledPath, stride: usize) -> Result<SampledPath> {
    if stride == 0 {
        return Err(Error::Config("stride must be at least 1".to_string()));
    }
    if stride == 1 {
        return Ok(path.clone());
    }
    let obs = path.observations();
    let mut observations = Vec::new();
    let mut day_offsets = Vec::new();
    for d in 0..path.n_days() {
        let (lo, hi) = path.day_range(d);
        let day_start = observations.len();
        let mut i = lo;
        while i < hi {
            observations.push(obs[i]);
            i += stride;
        }
        if observations.len() > day_start {
            day_offsets.push(day_start);
        }
    }
    SampledPath::new(
        path.step_seconds() * stride as f64,
        observations,
        day_offsets,
    )
}

/// Run the statistic sweep on a path whose native step is the finest grid.
pub fn run_empirical_report(path: &SampledPath, cfg: &ReportConfig) -> Result<Vec<ReportRow>> {
    cfg.validate()?;
    let native = path.step_seconds();
    let z = normal_quantile((1.0 - cfg.confidence) / 2.0)?;
    let mut rows = Vec::new();
    for &step in &cfg.steps_seconds {
        let ratio = step / native;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
            return Err(Error::Config(format!(
                "sampling interval {step}s is not an integer multiple of the native {native}s"
            )));
        }
        let resampled = resample_path(path, ratio.round() as usize)?;
        for &p in &cfg.powers {
            let mut reference = vec![
                (
                    "brownian".to_string(),
                    (cfg.k as f64).powf(1.0 - p / 2.0),
                ),
                ("additive_noise".to_string(), cfg.k as f64),
                ("rounding_noise".to_string(), (cfg.k as f64).sqrt()),
            ];
            match cfg.beta_overlay {
                Some(beta) if p <= beta => reference.insert(
                    1,
                    (
                        "jump_below_activity".to_string(),
                        (cfg.k as f64).powf(1.0 - p / beta),
                    ),
                ),
                _ => reference.insert(1, ("jump_dominated".to_string(), 1.0)),
            }
            let row = match evaluate_frequency_point(&resampled, p, cfg.k, &cfg.truncation) {
                Ok(ev) => {
                    let (lo, hi) = match ev.variance {
                        Some(v) => {
                            let half = z * v.sqrt();
                            (Some(ev.statistic - half), Some(ev.statistic + half))
                        }
                        None => (None, None),
                    };
                    ReportRow {
                        step_seconds: step,
                        statistic_kind: "frequency_ratio".to_string(),
                        exponent: p,
                        statistic: Some(ev.statistic),
                        variance: ev.variance,
                        ci_low: lo,
                        ci_high: hi,
                        reference,
                        error: None,
                    }
                }
                Err(e @ (Error::DegenerateStatistic(_) | Error::DegenerateCutoff { .. })) => {
                    ReportRow {
                        step_seconds: step,
                        statistic_kind: "frequency_ratio".to_string(),
                        exponent: p,
                        statistic: None,
                        variance: None,
                        ci_low: None,
                        ci_high: None,
                        reference,
                        error: Some(format!("at step={step}s p={p}: {e}")),
                    }
                }
                Err(e) => return Err(e),
            };
            rows.push(row);
        }
        if let Some(gamma) = cfg.gamma {
            let mut reference = vec![("no_brownian".to_string(), gamma * gamma)];
            if let Some(beta) = cfg.beta_overlay {
                reference.push(("brownian".to_string(), gamma.powf(beta)));
            }
            let row = match evaluate_truncation_point(&resampled, gamma, &cfg.truncation) {
                Ok(ev) => {
                    let v = ev.variance.unwrap_or(f64::NAN);
                    let half = z * v.sqrt();
                    ReportRow {
                        step_seconds: step,
                        statistic_kind: "cutoff_ratio".to_string(),
                        exponent: gamma,
                        statistic: Some(ev.statistic),
                        variance: ev.variance,
                        ci_low: Some(ev.statistic - half),
                        ci_high: Some(ev.statistic + half),
                        reference,
                        error: None,
                    }
                }
                Err(e @ (Error::DegenerateStatistic(_) | Error::DegenerateCutoff { .. })) => {
                    ReportRow {
                        step_seconds: step,
                        statistic_kind: "cutoff_ratio".to_string(),
                        exponent: gamma,
                        statistic: None,
                        variance: None,
                        ci_low: None,
                        ci_high: None,
                        reference,
                        error: Some(format!("at step={step}s gamma={gamma}: {e}")),
                    }
                }
                Err(e) => return Err(e),
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

/// Write report rows as CSV.
pub fn write_report_csv(rows: &[ReportRow], out: &Path) -> Result<()> {
    let mut s = String::from(
        "step_seconds,statistic_kind,exponent,statistic,variance,ci_low,ci_high,reference,error\n",
    );
    for r in rows {
        let reference = r
            .reference
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.step_seconds,
            r.statistic_kind,
            r.exponent,
            fmt_opt(r.statistic),
            fmt_opt(r.variance),
            fmt_opt(r.ci_low),
            fmt_opt(r.ci_high),
            reference,
            r.error.clone().unwrap_or_default()
        ));
    }
    std::fs::write(out, s)?;
    Ok(())
}

/// Write report rows as JSON with a schema version.
pub fn write_report_json(rows: &[ReportRow], cfg: &ReportConfig, out: &Path) -> Result<()> {
    let doc = serde_json::json!({
        "schema_version": 1,
        "config": cfg,
        "rows": rows,
    });
    std::fs::write(out, serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(())
}
