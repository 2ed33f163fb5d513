//! Ground-truth path generation: Brownian + stochastic volatility with
//! variance jumps and leverage, plus a symmetric stable jump driver.
//!
//! Model parameters are annualized; the simulation clock is the trading
//! day (6.5 hours) with 252 days per year. The variance follows a
//! square-root diffusion discretized by full-truncation Euler on an
//! internal substep grid, and the stable increments are drawn exactly at
//! the observation step, so the observation grid itself carries no
//! discretization error from the jump component.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hypothesis::HypothesisLabel;
use crate::path::{SampledPath, DAYS_PER_YEAR, SECONDS_PER_DAY};

/// Internal Euler substeps per observation step for the variance process.
pub const CIR_SUBSTEPS: usize = 5;

/// Deterministic per-path seed from a master seed and a path index
/// (splitmix64 finalizer), so parallel and serial runs agree.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One draw of a symmetric stable variable with the given stability index
/// and scale (Chambers–Mallows–Stuck construction; exact `tan` branch for
/// index 1).
pub fn sample_stable_increment(beta: f64, scale: f64, rng: &mut impl Rng) -> f64 {
    debug_assert!(beta > 0.0 && beta < 2.0);
    debug_assert!(scale > 0.0);
    let v = std::f64::consts::PI * (rng.gen::<f64>() - 0.5);
    if (beta - 1.0).abs() < 1e-12 {
        return scale * v.tan();
    }
    let mut w: f64 = rng.gen();
    while w <= 0.0 {
        w = rng.gen();
    }
    let w = -w.ln(); // Exp(1)
    let x = (beta * v).sin() / v.cos().powf(1.0 / beta)
        * (((1.0 - beta) * v).cos() / w).powf((1.0 - beta) / beta);
    scale * x
}

/// Parameters of the stochastic volatility model: mean-reverting square-root
/// variance with leverage and compound-Poisson variance jumps.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SVJumpModel {
    /// Long-run variance (annualized); the default corresponds to a 25%
    /// long-run volatility.
    pub eta: f64,
    /// Mean-reversion speed per year.
    pub xi: f64,
    /// Volatility of variance (annualized).
    pub phi: f64,
    /// Correlation between return and variance shocks.
    pub rho: f64,
    /// Variance-jump rate per trading day.
    pub vol_jump_intensity: f64,
    /// Variance jumps are uniform on ±this fraction of `eta`.
    pub vol_jump_rel_bound: f64,
    /// Initial variance (annualized).
    pub v0: f64,
    /// Initial log price.
    pub x0: f64,
}

impl Default for SVJumpModel {
    fn default() -> Self {
        SVJumpModel {
            eta: 0.0625,
            xi: 5.0,
            phi: 0.5,
            rho: -0.5,
            vol_jump_intensity: 2.0 / DAYS_PER_YEAR,
            vol_jump_rel_bound: 0.30,
            v0: 0.0625,
            x0: 1.0,
        }
    }
}

impl SVJumpModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !(self.xi > 0.0) || !(self.phi >= 0.0) {
            return Err(Error::Config(
                "variance model needs eta > 0, xi > 0, phi >= 0".to_string(),
            ));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::Config(format!(
                "leverage correlation must lie in [-1,1], got {}",
                self.rho
            )));
        }
        if self.vol_jump_intensity < 0.0 || self.vol_jump_rel_bound < 0.0 {
            return Err(Error::Config(
                "variance jump intensity and bound must be nonnegative".to_string(),
            ));
        }
        if !(self.v0 >= 0.0) {
            return Err(Error::Config("initial variance must be nonnegative".to_string()));
        }
        Ok(())
    }
}

/// A symmetric stable jump driver scaled into the price equation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StableDriver {
    /// Stability index in (0, 2).
    pub beta: f64,
    /// Scale multiplier on the driver.
    pub theta: f64,
    /// Constant drift per year (default 0).
    #[serde(default)]
    pub drift: f64,
}

impl StableDriver {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 2.0) {
            return Err(Error::Config(format!(
                "stability index must lie in (0,2), got {}",
                self.beta
            )));
        }
        if !(self.theta >= 0.0) {
            return Err(Error::Config(format!(
                "stable scale must be nonnegative, got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

/// Everything needed to simulate one path.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PathRecipe {
    pub include_brownian: bool,
    pub sv: Option<SVJumpModel>,
    pub stable: Option<StableDriver>,
    pub horizon_days: u32,
    pub step_seconds: f64,
    pub seed: u64,
}

impl PathRecipe {
    pub fn validate(&self) -> Result<()> {
        if self.include_brownian && self.sv.is_none() {
            return Err(Error::Config(
                "a Brownian component needs a volatility model".to_string(),
            ));
        }
        if !self.include_brownian && self.stable.is_none() {
            return Err(Error::Config(
                "recipe enables no component at all".to_string(),
            ));
        }
        if self.horizon_days == 0 {
            return Err(Error::Config("horizon must be at least one day".to_string()));
        }
        if !(self.step_seconds > 0.0) || self.step_seconds > SECONDS_PER_DAY {
            return Err(Error::Config(format!(
                "step must lie in (0, {SECONDS_PER_DAY}] seconds, got {}",
                self.step_seconds
            )));
        }
        if let Some(sv) = &self.sv {
            sv.validate()?;
        }
        if let Some(st) = &self.stable {
            st.validate()?;
        }
        Ok(())
    }

    pub fn steps_per_day(&self) -> usize {
        (SECONDS_PER_DAY / self.step_seconds).floor() as usize
    }
}

/// What actually went into a simulated path.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GroundTruth {
    pub label: HypothesisLabel,
    /// Integrated variance of the continuous part over the horizon.
    pub integrated_variance: f64,
    /// Sum of squared jump-component increments at the observation step.
    pub jump_qv: f64,
    /// Aggregate small-jump intensity over the horizon
    /// (`T · θ^β · (2/π) Γ(β) sin(πβ/2)` for the stable driver).
    pub jump_intensity_aggregate: f64,
    /// Smallest variance value fed to the square root (must be >= 0).
    pub min_variance_input: f64,
    /// Realized correlation between return and variance shocks.
    pub realized_leverage_corr: Option<f64>,
    pub seed: u64,
}

/// Ground-truth aggregate jump intensity of the scaled stable driver over
/// `t_years`: the tail of its jump measure satisfies
/// `lim x^β · ν(|y| > x) = θ^β (2/π) Γ(β) sin(πβ/2)`.
pub fn stable_intensity_aggregate(beta: f64, theta: f64, t_years: f64) -> f64 {
    let c = 2.0 / std::f64::consts::PI
        * crate::specialfn::gamma_fn(beta).unwrap_or(f64::NAN)
        * (std::f64::consts::PI * beta / 2.0).sin();
    t_years * theta.powf(beta) * c
}

/// Simulate one path on the observation grid.
///
/// Each trading day carries `steps_per_day` increments; a new day starts at
/// the previous day's last value (the simulated clock has no overnight
/// gap), so the day-segmented increment count matches the grid exactly.
pub fn simulate_path(recipe: &PathRecipe) -> Result<(SampledPath, GroundTruth)> {
    recipe.validate()?;
    let steps_per_day = recipe.steps_per_day();
    if steps_per_day == 0 {
        return Err(Error::Config("step exceeds the trading session".to_string()));
    }
    let n_days = recipe.horizon_days as usize;
    let step_years = recipe.step_seconds / (SECONDS_PER_DAY * DAYS_PER_YEAR);
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);

    let mut observations = Vec::with_capacity(n_days * (steps_per_day + 1));
    let mut day_offsets = Vec::with_capacity(n_days);

    let sv = recipe.sv.clone().unwrap_or_default();
    let mut x = if recipe.sv.is_some() { sv.x0 } else { 0.0 };
    let mut v = sv.v0;
    let h = step_years / CIR_SUBSTEPS as f64;
    let sqrt_h = h.sqrt();
    let rho = sv.rho;
    let rho_perp = (1.0 - rho * rho).sqrt();
    let jump_prob_per_substep = sv.vol_jump_intensity / SECONDS_PER_DAY * recipe.step_seconds
        / CIR_SUBSTEPS as f64;

    let mut integrated_variance = 0.0;
    let mut jump_qv = 0.0;
    let mut min_variance_input = f64::INFINITY;
    let mut lev_sum = 0.0;
    let mut lev_count = 0u64;

    for _day in 0..n_days {
        day_offsets.push(observations.len());
        observations.push(x);
        for _ in 0..steps_per_day {
            if recipe.include_brownian {
                for _ in 0..CIR_SUBSTEPS {
                    let v_plus = v.max(0.0);
                    min_variance_input = min_variance_input.min(v_plus);
                    let sigma = v_plus.sqrt();
                    let z_b: f64 = StandardNormal.sample(&mut rng);
                    let z_perp: f64 = StandardNormal.sample(&mut rng);
                    let z_w = rho * z_b + rho_perp * z_perp;
                    x += sigma * sqrt_h * z_w;
                    integrated_variance += v_plus * h;
                    lev_sum += z_w * z_b;
                    lev_count += 1;
                    v += sv.xi * (sv.eta - v_plus) * h + sv.phi * sigma * sqrt_h * z_b;
                    if sv.vol_jump_intensity > 0.0 && rng.gen::<f64>() < jump_prob_per_substep {
                        let jump = (rng.gen::<f64>() * 2.0 - 1.0) * sv.vol_jump_rel_bound * sv.eta;
                        v = (v + jump).max(0.0);
                    }
                }
            }
            if let Some(stable) = &recipe.stable {
                let mut dj = 0.0;
                if stable.theta > 0.0 {
                    let scale = stable.theta * step_years.powf(1.0 / stable.beta);
                    dj = sample_stable_increment(stable.beta, scale, &mut rng);
                }
                jump_qv += dj * dj;
                x += dj + stable.drift * step_years;
            }
            observations.push(x);
        }
    }

    let label = HypothesisLabel {
        brownian_active: recipe.include_brownian,
        infinite_activity: recipe
            .stable
            .as_ref()
            .map(|s| s.theta > 0.0)
            .unwrap_or(false),
    };
    let t_years = n_days as f64 * steps_per_day as f64 * step_years;
    let jump_intensity_aggregate = recipe
        .stable
        .as_ref()
        .map(|s| stable_intensity_aggregate(s.beta, s.theta, t_years))
        .unwrap_or(0.0);
    let path = SampledPath::new(recipe.step_seconds, observations, day_offsets)?
        .with_metadata("label", &label.to_string())
        .with_metadata("seed", &recipe.seed.to_string());
    let truth = GroundTruth {
        label,
        integrated_variance,
        jump_qv,
        jump_intensity_aggregate,
        min_variance_input: if min_variance_input.is_finite() {
            min_variance_input
        } else {
            0.0
        },
        realized_leverage_corr: (lev_count > 0).then(|| lev_sum / lev_count as f64),
        seed: recipe.seed,
    };
    Ok((path, truth))
}

/// Overlay i.i.d. Gaussian observation noise of the given standard
/// deviation on a path (the additive-noise regime of the sampling sweep).
pub fn apply_additive_noise(path: &SampledPath, noise_sd: f64, seed: u64) -> SampledPath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noisy = path.clone();
    noisy.map_observations(|_, x| {
        let z: f64 = StandardNormal.sample(&mut rng);
        x + noise_sd * z
    });
    noisy
}

// ---------------------------------------------------------------------------
// Scale calibration for the stable driver
// ---------------------------------------------------------------------------

/// Quantile of |standard symmetric stable| at probability `1 - p_tail`,
/// exact for index 1, otherwise from a seeded high-resolution sample table.
fn stable_abs_upper_quantile(beta: f64, p_tail: f64) -> Result<f64> {
    if (beta - 1.0).abs() < 1e-12 {
        // |Cauchy| has CDF (2/π) arctan(x)
        return Ok((std::f64::consts::FRAC_PI_2 * (1.0 - p_tail)).tan());
    }
    const TABLE_SIZE: usize = 2_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5741_B1E5_u64 ^ beta.to_bits());
    let mut draws: Vec<f64> = (0..TABLE_SIZE)
        .map(|_| sample_stable_increment(beta, 1.0, &mut rng).abs())
        .collect();
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = (((1.0 - p_tail) * TABLE_SIZE as f64).floor() as usize).min(TABLE_SIZE - 1);
    let q = draws[idx];
    if !(q > 0.0) {
        return Err(Error::Numerics(format!(
            "degenerate stable quantile at tail probability {p_tail}"
        )));
    }
    Ok(q)
}

/// Calibrate the stable scale so a scaled increment over one observation
/// step exceeds `4 √eta √Δ` (four long-run standard deviations of the
/// continuous part) with probability `target_p`.
pub fn calibrate_theta_tail(
    target_p: f64,
    eta: f64,
    step_seconds: f64,
    beta: f64,
) -> Result<f64> {
    if !(target_p > 0.0 && target_p < 1.0) {
        return Err(Error::Config(format!(
            "tail probability must lie in (0,1), got {target_p}"
        )));
    }
    if !(eta > 0.0) || !(step_seconds > 0.0) {
        return Err(Error::Config("eta and step must be positive".to_string()));
    }
    if !(beta > 0.0 && beta < 2.0) {
        return Err(Error::Config(format!(
            "stability index must lie in (0,2), got {beta}"
        )));
    }
    let step_years = step_seconds / (SECONDS_PER_DAY * DAYS_PER_YEAR);
    let threshold = 4.0 * eta.sqrt() * step_years.sqrt();
    let q = stable_abs_upper_quantile(beta, target_p)?;
    let theta = threshold / (step_years.powf(1.0 / beta) * q);
    if !theta.is_finite() || theta <= 0.0 {
        return Err(Error::Numerics(format!(
            "tail calibration produced theta = {theta}"
        )));
    }
    Ok(theta)
}

/// Options for the simulation-based share calibration.
#[derive(Debug, Clone, Copy)]
pub struct ShareCalibration {
    pub n_paths: usize,
    pub master_seed: u64,
}

impl Default for ShareCalibration {
    fn default() -> Self {
        ShareCalibration {
            n_paths: 200,
            master_seed: 0xCA11_B007,
        }
    }
}

/// Calibrate the stable scale so the expected share of observation-scale
/// quadratic variation attributable to jumps equals `target_share`.
///
/// The jump increments scale linearly in theta, so the calibration paths
/// are simulated once at unit scale and the share curve
/// `mean_i[θ²Jᵢ/(θ²Jᵢ + Cᵢ)]` is solved by bisection on log-theta.
pub fn calibrate_theta_qv_share(
    target_share: f64,
    model: &SVJumpModel,
    beta: f64,
    horizon_days: u32,
    step_seconds: f64,
    options: ShareCalibration,
) -> Result<f64> {
    if !(target_share > 0.0 && target_share < 1.0) {
        return Err(Error::Config(format!(
            "target share must lie in (0,1), got {target_share}"
        )));
    }
    if options.n_paths == 0 {
        return Err(Error::Config("share calibration needs paths".to_string()));
    }
    let mut pairs = Vec::with_capacity(options.n_paths);
    for i in 0..options.n_paths {
        let recipe = PathRecipe {
            include_brownian: true,
            sv: Some(model.clone()),
            stable: Some(StableDriver {
                beta,
                theta: 1.0,
                drift: 0.0,
            }),
            horizon_days,
            step_seconds,
            seed: derive_seed(options.master_seed, i as u64),
        };
        let (path, truth) = simulate_path(&recipe)?;
        // continuous QV at the observation scale (exact increments of the
        // continuous part are not kept; realized total minus jump part)
        let mut cont_qv = 0.0;
        let obs = path.observations();
        for d in 0..path.n_days() {
            let (s, e) = path.day_range(d);
            for j in s + 1..e {
                let dx = obs[j] - obs[j - 1];
                cont_qv += dx * dx;
            }
        }
        // total here includes jumps at unit scale; isolate the continuous
        // part using the stored jump component
        let cont_only = (cont_qv - truth.jump_qv).max(0.0);
        pairs.push((cont_only, truth.jump_qv));
    }
    let mean_share = |theta: f64| -> f64 {
        let t2 = theta * theta;
        pairs
            .iter()
            .map(|&(c, j)| t2 * j / (t2 * j + c))
            .sum::<f64>()
            / pairs.len() as f64
    };
    let (mut lo, mut hi) = (1e-12f64, 1e12f64);
    if mean_share(lo) > target_share || mean_share(hi) < target_share {
        return Err(Error::Numerics(
            "share calibration target is not bracketed".to_string(),
        ));
    }
    for _ in 0..200 {
        let mid = (lo.ln() + hi.ln()).mul_add(0.5, 0.0).exp();
        if mean_share(mid) < target_share {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-12 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cauchy_only_recipe(seed: u64) -> PathRecipe {
        PathRecipe {
            include_brownian: false,
            sv: None,
            stable: Some(StableDriver {
                beta: 1.0,
                theta: 1e-3,
                drift: 0.0,
            }),
            horizon_days: 1,
            step_seconds: 5.0,
            seed,
        }
    }

    #[test]
    fn determinism_same_seed_same_path() {
        let recipe = PathRecipe {
            include_brownian: true,
            sv: Some(SVJumpModel::default()),
            stable: Some(StableDriver {
                beta: 1.0,
                theta: 1e-2,
                drift: 0.0,
            }),
            horizon_days: 2,
            step_seconds: 30.0,
            seed: 99,
        };
        let (a, ta) = simulate_path(&recipe).unwrap();
        let (b, tb) = simulate_path(&recipe).unwrap();
        assert_eq!(a.observations(), b.observations());
        assert_eq!(ta.integrated_variance, tb.integrated_variance);
        assert_eq!(ta.jump_qv, tb.jump_qv);
    }

    #[test]
    fn labels_match_construction() {
        let (_, truth) = simulate_path(&cauchy_only_recipe(1)).unwrap();
        assert!(!truth.label.brownian_active);
        assert!(truth.label.infinite_activity);
        assert_eq!(truth.integrated_variance, 0.0);
        assert!(truth.jump_qv > 0.0);

        let recipe = PathRecipe {
            include_brownian: true,
            sv: Some(SVJumpModel::default()),
            stable: None,
            horizon_days: 1,
            step_seconds: 30.0,
            seed: 5,
        };
        let (_, truth) = simulate_path(&recipe).unwrap();
        assert!(truth.label.brownian_active);
        assert!(!truth.label.infinite_activity);
        assert!(truth.min_variance_input >= 0.0);
    }

    #[test]
    fn day_segmentation_has_full_increment_count() {
        let recipe = cauchy_only_recipe(3);
        let (path, _) = simulate_path(&recipe).unwrap();
        assert_eq!(path.n_days(), 1);
        assert_eq!(path.day_increment_count(0), 4680);
        let recipe = PathRecipe {
            horizon_days: 3,
            ..cauchy_only_recipe(3)
        };
        let (path, _) = simulate_path(&recipe).unwrap();
        assert_eq!(path.n_days(), 3);
        for d in 0..3 {
            assert_eq!(path.day_increment_count(d), 4680);
        }
        // day starts where the previous day ended: no overnight move
        let obs = path.observations();
        let (s1, _) = path.day_range(1);
        assert_eq!(obs[s1], obs[s1 - 1]);
    }

    #[test]
    fn invalid_recipes_are_rejected() {
        let recipe = PathRecipe {
            include_brownian: false,
            sv: None,
            stable: None,
            horizon_days: 1,
            step_seconds: 5.0,
            seed: 0,
        };
        assert!(simulate_path(&recipe).is_err());
        let recipe = PathRecipe {
            include_brownian: true,
            sv: None,
            stable: None,
            horizon_days: 1,
            step_seconds: 5.0,
            seed: 0,
        };
        assert!(simulate_path(&recipe).is_err());
    }

    #[test]
    fn realized_variance_tracks_integrated_variance() {
        // pure Brownian with stochastic volatility: realized variance over
        // the grid approximates the stored integral
        let mut rel_err_sum = 0.0;
        let n_paths = 200;
        for i in 0..n_paths {
            let recipe = PathRecipe {
                include_brownian: true,
                sv: Some(SVJumpModel::default()),
                stable: None,
                horizon_days: 5,
                step_seconds: 5.0,
                seed: derive_seed(0xBEEF, i),
            };
            let (path, truth) = simulate_path(&recipe).unwrap();
            let obs = path.observations();
            let mut rv = 0.0;
            for d in 0..path.n_days() {
                let (s, e) = path.day_range(d);
                for j in s + 1..e {
                    let dx = obs[j] - obs[j - 1];
                    rv += dx * dx;
                }
            }
            rel_err_sum += rv / truth.integrated_variance - 1.0;
        }
        let mean_rel_err = rel_err_sum / n_paths as f64;
        assert!(
            mean_rel_err.abs() < 0.01,
            "mean relative RV error = {mean_rel_err}"
        );
    }

    #[test]
    fn cauchy_draws_have_unit_quartiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mut draws: Vec<f64> = (0..n)
            .map(|_| sample_stable_increment(1.0, 1.0, &mut rng))
            .collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = draws[n / 2];
        let q1 = draws[n / 4];
        let q3 = draws[3 * n / 4];
        // quartiles of a unit Cauchy sit at ±1
        assert!(med.abs() < 0.01, "median = {med}");
        assert!((q3 - q1 - 2.0).abs() < 0.02, "IQR = {}", q3 - q1);
    }

    #[test]
    fn stable_tail_index_matches_theory() {
        // P(|X| > x) · x^β approaches (2/π) Γ(β) sin(πβ/2) · scale^β;
        // check the ratio of exceedance counts at two tail levels.
        for &beta in &[1.0f64, 1.5] {
            let mut rng = ChaCha8Rng::seed_from_u64(12);
            let n = 1_000_000usize;
            let draws: Vec<f64> = (0..n)
                .map(|_| sample_stable_increment(beta, 1.0, &mut rng).abs())
                .collect();
            let x1 = 30.0;
            let x2 = 90.0;
            let n1 = draws.iter().filter(|&&d| d > x1).count() as f64;
            let n2 = draws.iter().filter(|&&d| d > x2).count() as f64;
            let want = (x2 / x1).powf(beta);
            let got = n1 / n2;
            assert!(
                (got / want - 1.0).abs() < 0.10,
                "beta={beta}: tail count ratio {got}, want {want}"
            );
            // absolute tail constant
            let c_beta = 2.0 / std::f64::consts::PI
                * crate::specialfn::gamma_fn(beta).unwrap()
                * (std::f64::consts::PI * beta / 2.0).sin();
            let emp = n1 / n as f64 * x1.powf(beta);
            assert!(
                (emp / c_beta - 1.0).abs() < 0.10,
                "beta={beta}: tail constant {emp}, want {c_beta}"
            );
        }
    }

    #[test]
    fn near_gaussian_index_behaves_like_a_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 200_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_stable_increment(1.999, 1.0, &mut rng))
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        // the index-2 limit is N(0, 2); nearly all mass within ±6
        let within = draws.iter().filter(|d| d.abs() < 6.0).count() as f64 / n as f64;
        assert!(mean.abs() < 0.05, "mean = {mean}");
        assert!(within > 0.995, "within ±6: {within}");
    }

    #[test]
    fn leverage_correlation_is_reproduced() {
        let recipe = PathRecipe {
            include_brownian: true,
            sv: Some(SVJumpModel::default()),
            stable: None,
            horizon_days: 10,
            step_seconds: 5.0,
            seed: 21,
        };
        let (_, truth) = simulate_path(&recipe).unwrap();
        let corr = truth.realized_leverage_corr.unwrap();
        assert!((corr - (-0.5)).abs() < 0.02, "realized corr = {corr}");
    }

    #[test]
    fn tail_calibration_roundtrip_cauchy() {
        let eta = 0.0625;
        let step = 5.0;
        for &p in &[0.001, 0.01, 0.05, 0.2] {
            let theta = calibrate_theta_tail(p, eta, step, 1.0).unwrap();
            // closed-form tail of the calibrated Cauchy increment
            let step_years = step / (SECONDS_PER_DAY * DAYS_PER_YEAR);
            let c = 4.0 * eta.sqrt() * step_years.sqrt();
            let back = 1.0
                - 2.0 / std::f64::consts::PI * (c / (theta * step_years)).atan();
            assert!(
                (back - p).abs() < 1e-10,
                "roundtrip at p={p}: got {back}"
            );
        }
        // monotone: smaller tail probability, smaller theta
        let t1 = calibrate_theta_tail(0.001, eta, step, 1.0).unwrap();
        let t2 = calibrate_theta_tail(0.01, eta, step, 1.0).unwrap();
        assert!(t1 < t2);
    }

    #[test]
    fn tail_calibration_empirical_exceedance() {
        let eta = 0.0625;
        let step = 5.0;
        let target = 0.01;
        let theta = calibrate_theta_tail(target, eta, step, 1.0).unwrap();
        let step_years = step / (SECONDS_PER_DAY * DAYS_PER_YEAR);
        let threshold = 4.0 * eta.sqrt() * step_years.sqrt();
        let scale = theta * step_years;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 1_000_000usize;
        let hits = (0..n)
            .filter(|_| sample_stable_increment(1.0, scale, &mut rng).abs() >= threshold)
            .count() as f64;
        let rate = hits / n as f64;
        let se = (target * (1.0 - target) / n as f64).sqrt();
        assert!(
            (rate - target).abs() < 3.0 * se,
            "empirical exceedance {rate} vs target {target} (se {se})"
        );
    }

    #[test]
    fn noise_overlay_is_deterministic_and_additive() {
        let (path, _) = simulate_path(&cauchy_only_recipe(77)).unwrap();
        let a = apply_additive_noise(&path, 1e-3, 4);
        let b = apply_additive_noise(&path, 1e-3, 4);
        assert_eq!(a.observations(), b.observations());
        let diff: f64 = a
            .observations()
            .iter()
            .zip(path.observations())
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            / path.observations().len() as f64;
        assert!(diff > 1e-4 && diff < 5e-3, "mean |noise| = {diff}");
    }
}
