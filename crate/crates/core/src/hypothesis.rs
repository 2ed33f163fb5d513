//! The two hypothesis tests on a sampled path.
//!
//! Test 1 (null: a Brownian component is present) compares truncated power
//! variations at two sampling frequencies; under the null the ratio tends
//! to `k^{1-p/2}`, and to 1 under an infinitely active pure-jump
//! alternative. Test 2 (null: no Brownian component) compares truncated
//! quadratic variations and exceedance counts at two cutoff levels; the
//! ratio tends to `γ²` under the null and to `γ^β` when a Brownian
//! component dominates. Both are standardized by plug-in variances built
//! from the same variations, so no model parameters are estimated.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::path::SampledPath;
use crate::specialfn::{normal_quantile, variance_factor};
use crate::variation::{
    exceedance_count_with_cutoffs, increments, resolve_cutoff, scale_cutoffs,
    truncated_power_variation_with_cutoffs, SpanCutoff, TruncationSpec,
};

/// Which event a simulated path realizes, by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct HypothesisLabel {
    /// Continuous martingale part active on the window.
    pub brownian_active: bool,
    /// Infinitely many small jumps on the window.
    pub infinite_activity: bool,
}

impl std::fmt::Display for HypothesisLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let w = if self.brownian_active {
            "brownian"
        } else {
            "no-brownian"
        };
        if self.infinite_activity {
            write!(f, "{w}+infinite-activity-jumps")
        } else {
            write!(f, "{w}")
        }
    }
}

/// An assumed bound `beta0` on the jump activity index together with the
/// cutoff exponent `varpi` actually used, for validating the rate window.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RateCheck {
    pub beta0: f64,
    pub varpi: f64,
}

/// Which of the two tests a rate-condition query refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TestKind {
    /// Null: Brownian component present.
    BrownianNull,
    /// Null: Brownian component absent.
    NoBrownianNull,
}

/// Outcome of a rate-condition validation. Failing is a value, not an error.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RateConditionReport {
    pub pass: bool,
    pub explanation: String,
    /// Admissible open interval for `varpi`, when one exists.
    pub admissible_varpi: Option<(f64, f64)>,
}

/// Check the cutoff-rate window linking the power `p`, the activity bound
/// `beta0` and the cutoff exponent `varpi`.
///
/// Test 1 requires `p ∈ (2·beta0, 2)` and
/// `(p-1)/(2p-2·beta0) < varpi < (p-1)/p`; test 2 requires
/// `0 < varpi < (2-beta0)/(3·beta0)`.
pub fn validate_rate_conditions(
    kind: TestKind,
    p: Option<f64>,
    beta0: f64,
    varpi: f64,
) -> Result<RateConditionReport> {
    match kind {
        TestKind::BrownianNull => {
            if !(beta0 > 0.0 && beta0 < 1.0) {
                return Err(Error::Config(format!(
                    "test 1 rate check requires beta0 in (0,1), got {beta0}"
                )));
            }
            let p = p.ok_or_else(|| {
                Error::Config("test 1 rate check requires the power p".to_string())
            })?;
            if p <= 2.0 * beta0 || p >= 2.0 {
                return Ok(RateConditionReport {
                    pass: false,
                    explanation: format!(
                        "p must lie in (2*beta0, 2) = ({}, 2); got p = {p}",
                        2.0 * beta0
                    ),
                    admissible_varpi: None,
                });
            }
            let lo = (p - 1.0) / (2.0 * p - 2.0 * beta0);
            let hi = (p - 1.0) / p;
            if varpi > lo && varpi < hi {
                Ok(RateConditionReport {
                    pass: true,
                    explanation: format!("varpi = {varpi} lies in ({lo}, {hi})"),
                    admissible_varpi: Some((lo, hi)),
                })
            } else {
                Ok(RateConditionReport {
                    pass: false,
                    explanation: format!("varpi = {varpi} outside the admissible ({lo}, {hi})"),
                    admissible_varpi: Some((lo, hi)),
                })
            }
        }
        TestKind::NoBrownianNull => {
            if !(1.0..2.0).contains(&beta0) {
                return Err(Error::Config(format!(
                    "test 2 rate check requires beta0 in [1,2), got {beta0}"
                )));
            }
            let hi = (2.0 - beta0) / (3.0 * beta0);
            if varpi > 0.0 && varpi < hi {
                Ok(RateConditionReport {
                    pass: true,
                    explanation: format!("varpi = {varpi} lies in (0, {hi})"),
                    admissible_varpi: Some((0.0, hi)),
                })
            } else {
                Ok(RateConditionReport {
                    pass: false,
                    explanation: format!("varpi = {varpi} outside the admissible (0, {hi})"),
                    admissible_varpi: Some((0.0, hi)),
                })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Test 1: null hypothesis "Brownian component present"
// ---------------------------------------------------------------------------

/// Configuration for the dual-frequency test (null: Brownian present).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BrownianNullConfig {
    /// Power of the variations, in (1, 2).
    pub p: f64,
    /// Frequency ratio, at least 2.
    pub k: u32,
    pub truncation: TruncationSpec,
    /// Nominal asymptotic level of the test.
    pub level: f64,
    /// Optional rate-window validation; when present and failing, the test
    /// refuses to run unless `override_rate_check` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_check: Option<RateCheck>,
    #[serde(default)]
    pub override_rate_check: bool,
}

impl BrownianNullConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p < 2.0) {
            return Err(Error::Config(format!(
                "test 1 needs p in (1,2), got {}",
                self.p
            )));
        }
        if self.k < 2 {
            return Err(Error::Config(format!("test 1 needs k >= 2, got {}", self.k)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!(
                "level must lie in (0,1), got {}",
                self.level
            )));
        }
        self.truncation.validate()
    }
}

/// Outcome of test 1, self-auditing: the decision is recomputable from the
/// stored statistic, variance and level.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BrownianNullResult {
    pub statistic: f64,
    pub variance: f64,
    /// Limit under the null, `k^{1-p/2}`.
    pub null_limit: f64,
    pub critical_value: f64,
    pub z_score: f64,
    pub reject: bool,
    pub diagnostics: BrownianNullDiagnostics,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BrownianNullDiagnostics {
    /// B(p, u, Δ) summed across days.
    pub b_p_fine: f64,
    /// B(p, u, kΔ) summed across days.
    pub b_p_coarse: f64,
    /// B(2p, u, Δ) entering the variance.
    pub b_2p_fine: f64,
    pub cutoffs: Vec<SpanCutoff>,
    pub n_fine: u64,
    pub n_coarse: u64,
    /// Increments excluded by the cutoff at the base frequency.
    pub excluded_fine: u64,
}

impl BrownianNullDiagnostics {
    pub fn as_map(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("b_p_fine".into(), self.b_p_fine);
        m.insert("b_p_coarse".into(), self.b_p_coarse);
        m.insert("b_2p_fine".into(), self.b_2p_fine);
        m.insert("n_fine".into(), self.n_fine as f64);
        m.insert("n_coarse".into(), self.n_coarse as f64);
        m.insert("excluded_fine".into(), self.excluded_fine as f64);
        for (i, c) in self.cutoffs.iter().enumerate() {
            m.insert(format!("u_{i}"), c.u);
        }
        m
    }
}

/// Dual-frequency ratio `B(p,u,Δ)_T / B(p,u,kΔ)_T` with a single cutoff.
pub fn frequency_ratio(path: &SampledPath, p: f64, k: u32, u: f64) -> Result<f64> {
    let cutoffs = vec![whole_path_cutoff(path, u)];
    Ok(frequency_ratio_parts(path, p, k, &cutoffs)?.0)
}

/// Plug-in variance of the dual-frequency ratio at a single cutoff:
/// `N(p,k) · B(2p,u,Δ)_T / B(p,u,Δ)_T²`.
pub fn frequency_ratio_variance(path: &SampledPath, p: f64, k: u32, u: f64) -> Result<f64> {
    let cutoffs = vec![whole_path_cutoff(path, u)];
    let (_, _, parts) = frequency_ratio_parts(path, p, k, &cutoffs)?;
    Ok(parts)
}

fn whole_path_cutoff(path: &SampledPath, u: f64) -> SpanCutoff {
    SpanCutoff {
        day_start: 0,
        day_end: path.n_days(),
        u,
    }
}

/// Statistic, its building blocks and the plug-in variance with per-day
/// cutoffs. Returns `(statistic, (b_p_fine, b_p_coarse, b_2p_fine), variance)`.
fn frequency_ratio_parts(
    path: &SampledPath,
    p: f64,
    k: u32,
    cutoffs: &[SpanCutoff],
) -> Result<(f64, (f64, f64, f64), f64)> {
    let fine = increments(path, 1)?;
    let coarse = increments(path, k as usize)?;
    let b_p_fine = truncated_power_variation_with_cutoffs(&fine, p, cutoffs);
    let b_p_coarse = truncated_power_variation_with_cutoffs(&coarse, p, cutoffs);
    let b_2p_fine = truncated_power_variation_with_cutoffs(&fine, 2.0 * p, cutoffs);
    if b_p_coarse <= 0.0 {
        return Err(Error::DegenerateStatistic(
            "B(p,u,kΔ) is zero: every coarse increment exceeds the cutoff".to_string(),
        ));
    }
    if b_p_fine <= 0.0 {
        return Err(Error::DegenerateStatistic(
            "B(p,u,Δ) is zero: every base increment exceeds the cutoff".to_string(),
        ));
    }
    let statistic = b_p_fine / b_p_coarse;
    let variance = variance_factor(p, k)? * b_2p_fine / (b_p_fine * b_p_fine);
    Ok((statistic, (b_p_fine, b_p_coarse, b_2p_fine), variance))
}

/// A statistic evaluated at one sweep grid point. The plug-in variance is
/// only defined where the CLT applies (`p` in (1,2) for test 1), so sweeps
/// outside that range report the statistic alone.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PointEval {
    pub statistic: f64,
    pub variance: Option<f64>,
}

/// Evaluate the dual-frequency statistic for a sweep grid point, resolving
/// the truncation spec (per day for a volatility multiple).
pub fn evaluate_frequency_point(
    path: &SampledPath,
    p: f64,
    k: u32,
    truncation: &TruncationSpec,
) -> Result<PointEval> {
    if !(p > 0.0) {
        return Err(Error::Config(format!("power must be positive, got {p}")));
    }
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    let per_day = matches!(truncation, TruncationSpec::VolMultiple { .. });
    let cutoffs = resolve_cutoff(path, truncation, per_day)?;
    let (statistic, _, variance) = frequency_ratio_parts(path, p, k, &cutoffs)?;
    Ok(PointEval {
        statistic,
        variance: (p > 1.0 && p < 2.0).then_some(variance),
    })
}

/// Evaluate the dual-cutoff statistic for a sweep grid point.
pub fn evaluate_truncation_point(
    path: &SampledPath,
    gamma: f64,
    truncation: &TruncationSpec,
) -> Result<PointEval> {
    if !(gamma > 1.0) {
        return Err(Error::Config(format!("gamma must exceed 1, got {gamma}")));
    }
    let per_day = matches!(truncation, TruncationSpec::VolMultiple { .. });
    let cutoffs = resolve_cutoff(path, truncation, per_day)?;
    let parts = dual_cutoff_parts(path, gamma, &cutoffs)?;
    let statistic = dual_cutoff_statistic(&parts)?;
    let variance = dual_cutoff_variance(gamma, &parts)?;
    Ok(PointEval {
        statistic,
        variance: Some(variance),
    })
}

/// Run test 1 (null: Brownian component present) on a path.
///
/// With a `VolMultiple` truncation the cutoff is resolved separately for
/// each day and the variations are summed across days before the ratio is
/// formed; other truncation modes use a single whole-path cutoff.
pub fn test_brownian_null(
    path: &SampledPath,
    cfg: &BrownianNullConfig,
) -> Result<BrownianNullResult> {
    cfg.validate()?;
    if let Some(rc) = cfg.rate_check {
        let report = validate_rate_conditions(TestKind::BrownianNull, Some(cfg.p), rc.beta0, rc.varpi)?;
        if !report.pass && !cfg.override_rate_check {
            return Err(Error::Config(format!(
                "rate conditions fail ({}); set the override flag to run anyway",
                report.explanation
            )));
        }
    }
    let per_day = matches!(cfg.truncation, TruncationSpec::VolMultiple { .. });
    let cutoffs = resolve_cutoff(path, &cfg.truncation, per_day)?;
    let (statistic, (b_p_fine, b_p_coarse, b_2p_fine), variance) =
        frequency_ratio_parts(path, cfg.p, cfg.k, &cutoffs)?;
    let fine = increments(path, 1)?;
    let coarse = increments(path, cfg.k as usize)?;
    let excluded_fine = exceedance_count_with_cutoffs(&fine, &cutoffs);
    let null_limit = (cfg.k as f64).powf(1.0 - cfg.p / 2.0);
    let z_a = normal_quantile(cfg.level)?;
    let critical_value = null_limit - z_a * variance.sqrt();
    let z_score = (statistic - null_limit) / variance.sqrt();
    Ok(BrownianNullResult {
        statistic,
        variance,
        null_limit,
        critical_value,
        z_score,
        reject: statistic < critical_value,
        diagnostics: BrownianNullDiagnostics {
            b_p_fine,
            b_p_coarse,
            b_2p_fine,
            cutoffs,
            n_fine: fine.len() as u64,
            n_coarse: coarse.len() as u64,
            excluded_fine,
        },
    })
}

// ---------------------------------------------------------------------------
// Test 2: null hypothesis "no Brownian component"
// ---------------------------------------------------------------------------

/// Configuration for the dual-cutoff test (null: Brownian absent).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoBrownianNullConfig {
    /// Ratio between the two truncation levels, above 1.
    pub gamma: f64,
    pub truncation: TruncationSpec,
    pub level: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_check: Option<RateCheck>,
    #[serde(default)]
    pub override_rate_check: bool,
}

impl NoBrownianNullConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0) {
            return Err(Error::Config(format!(
                "test 2 needs gamma > 1, got {}",
                self.gamma
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!(
                "level must lie in (0,1), got {}",
                self.level
            )));
        }
        self.truncation.validate()
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct NoBrownianNullResult {
    pub statistic: f64,
    pub variance: f64,
    /// Limit under the null, `γ²`.
    pub null_limit: f64,
    pub critical_value: f64,
    pub z_score: f64,
    pub reject: bool,
    pub diagnostics: NoBrownianNullDiagnostics,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct NoBrownianNullDiagnostics {
    pub b2_u: f64,
    pub b2_gamma_u: f64,
    pub b4_u: f64,
    pub b4_gamma_u: f64,
    pub count_above_u: u64,
    pub count_above_gamma_u: u64,
    pub cutoffs: Vec<SpanCutoff>,
    pub n_increments: u64,
}

impl NoBrownianNullDiagnostics {
    pub fn as_map(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("b2_u".into(), self.b2_u);
        m.insert("b2_gamma_u".into(), self.b2_gamma_u);
        m.insert("b4_u".into(), self.b4_u);
        m.insert("b4_gamma_u".into(), self.b4_gamma_u);
        m.insert("count_above_u".into(), self.count_above_u as f64);
        m.insert("count_above_gamma_u".into(), self.count_above_gamma_u as f64);
        m.insert("n_increments".into(), self.n_increments as f64);
        for (i, c) in self.cutoffs.iter().enumerate() {
            m.insert(format!("u_{i}"), c.u);
        }
        m
    }
}

struct DualCutoffParts {
    b2_u: f64,
    b2_gu: f64,
    b4_u: f64,
    b4_gu: f64,
    count_u: u64,
    count_gu: u64,
    n: u64,
}

fn dual_cutoff_parts(path: &SampledPath, gamma: f64, cutoffs: &[SpanCutoff]) -> Result<DualCutoffParts> {
    let fine = increments(path, 1)?;
    let gamma_cutoffs = scale_cutoffs(cutoffs, gamma);
    Ok(DualCutoffParts {
        b2_u: truncated_power_variation_with_cutoffs(&fine, 2.0, cutoffs),
        b2_gu: truncated_power_variation_with_cutoffs(&fine, 2.0, &gamma_cutoffs),
        b4_u: truncated_power_variation_with_cutoffs(&fine, 4.0, cutoffs),
        b4_gu: truncated_power_variation_with_cutoffs(&fine, 4.0, &gamma_cutoffs),
        count_u: exceedance_count_with_cutoffs(&fine, cutoffs),
        count_gu: exceedance_count_with_cutoffs(&fine, &gamma_cutoffs),
        n: fine.len() as u64,
    })
}

fn dual_cutoff_statistic(parts: &DualCutoffParts) -> Result<f64> {
    if parts.b2_u <= 0.0 {
        return Err(Error::DegenerateStatistic(
            "B(2,u,Δ) is zero: no increment at or below the cutoff".to_string(),
        ));
    }
    if parts.count_gu == 0 {
        return Err(Error::DegenerateStatistic(
            "U(γu,Δ) is zero: no increment above the upper cutoff".to_string(),
        ));
    }
    Ok((parts.b2_gu * parts.count_u as f64) / (parts.b2_u * parts.count_gu as f64))
}

fn dual_cutoff_variance(gamma: f64, parts: &DualCutoffParts) -> Result<f64> {
    if parts.count_u == 0 {
        return Err(Error::DegenerateStatistic(
            "U(u,Δ) is zero: no increment above the lower cutoff".to_string(),
        ));
    }
    if parts.count_gu == 0 {
        return Err(Error::DegenerateStatistic(
            "U(γu,Δ) is zero: no increment above the upper cutoff".to_string(),
        ));
    }
    if parts.b2_u <= 0.0 || parts.b2_gu <= 0.0 {
        return Err(Error::DegenerateStatistic(
            "truncated quadratic variation is zero".to_string(),
        ));
    }
    let g2 = gamma * gamma;
    let v = g2 * g2
        * (parts.b4_u / (parts.b2_u * parts.b2_u)
            + 1.0 / parts.count_u as f64
            + (1.0 - 2.0 / g2)
                * (parts.b4_gu / (parts.b2_gu * parts.b2_gu) + 1.0 / parts.count_gu as f64));
    Ok(v)
}

/// Dual-cutoff ratio `B(2,γu,Δ)_T · U(u,Δ)_T / (B(2,u,Δ)_T · U(γu,Δ)_T)`.
pub fn truncation_ratio(path: &SampledPath, gamma: f64, u: f64) -> Result<f64> {
    if !(gamma > 1.0) {
        return Err(Error::Config(format!("gamma must exceed 1, got {gamma}")));
    }
    let cutoffs = vec![whole_path_cutoff(path, u)];
    dual_cutoff_statistic(&dual_cutoff_parts(path, gamma, &cutoffs)?)
}

/// Plug-in variance of the dual-cutoff ratio.
pub fn truncation_ratio_variance(path: &SampledPath, gamma: f64, u: f64) -> Result<f64> {
    if !(gamma > 1.0) {
        return Err(Error::Config(format!("gamma must exceed 1, got {gamma}")));
    }
    let cutoffs = vec![whole_path_cutoff(path, u)];
    dual_cutoff_variance(gamma, &dual_cutoff_parts(path, gamma, &cutoffs)?)
}

/// Run test 2 (null: no Brownian component) on a path.
pub fn test_no_brownian_null(
    path: &SampledPath,
    cfg: &NoBrownianNullConfig,
) -> Result<NoBrownianNullResult> {
    cfg.validate()?;
    if let Some(rc) = cfg.rate_check {
        let report = validate_rate_conditions(TestKind::NoBrownianNull, None, rc.beta0, rc.varpi)?;
        if !report.pass && !cfg.override_rate_check {
            return Err(Error::Config(format!(
                "rate conditions fail ({}); set the override flag to run anyway",
                report.explanation
            )));
        }
    }
    let per_day = matches!(cfg.truncation, TruncationSpec::VolMultiple { .. });
    let cutoffs = resolve_cutoff(path, &cfg.truncation, per_day)?;
    let parts = dual_cutoff_parts(path, cfg.gamma, &cutoffs)?;
    let statistic = dual_cutoff_statistic(&parts)?;
    let variance = dual_cutoff_variance(cfg.gamma, &parts)?;
    let null_limit = cfg.gamma * cfg.gamma;
    let z_a = normal_quantile(cfg.level)?;
    let critical_value = null_limit - z_a * variance.sqrt();
    let z_score = (statistic - null_limit) / variance.sqrt();
    Ok(NoBrownianNullResult {
        statistic,
        variance,
        null_limit,
        critical_value,
        z_score,
        reject: statistic < critical_value,
        diagnostics: NoBrownianNullDiagnostics {
            b2_u: parts.b2_u,
            b2_gamma_u: parts.b2_gu,
            b4_u: parts.b4_u,
            b4_gamma_u: parts.b4_gu,
            count_above_u: parts.count_u,
            count_above_gamma_u: parts.count_gu,
            cutoffs,
            n_increments: parts.n,
        },
    })
}
