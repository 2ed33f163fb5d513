//! Numerical constants used by the CLT standardizations.
//!
//! The limiting variances involve the absolute Gaussian moments
//! `m_p = E|Z|^p`, the paired moment `m_{k,p} = E(|Z|^p |Z + √(k-1) Z'|^p)`
//! for independent standard normals, and the variance factor `N(p,k)`
//! assembled from them. `m_{k,p}` is defined by deterministic quadrature of
//! the expectation itself; a seeded Monte Carlo oracle and a closed form in
//! terms of ₂F₁ serve as independent cross-checks.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::variation::abs_pow;

const SQRT_PI: f64 = 1.772_453_850_905_516;
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

// ---------------------------------------------------------------------------
// Gamma function (Lanczos approximation, g = 7, GSL coefficient set)
// ---------------------------------------------------------------------------

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)] // published digits kept verbatim
const LANCZOS_COEFFS: [f64; 9] = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
];

/// Gamma function on the positive real axis.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma_fn requires x > 0, got {x}")));
    }
    if x < 0.5 {
        // reflection keeps the Lanczos sum in its accurate range
        return Ok(std::f64::consts::PI
            / ((std::f64::consts::PI * x).sin() * gamma_fn(1.0 - x)?));
    }
    let z = x - 1.0;
    let mut sum = LANCZOS_COEFFS[0];
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    let w = z + LANCZOS_G + 0.5;
    Ok(SQRT_2PI * w.powf(z + 0.5) * (-w).exp() * sum)
}

// ---------------------------------------------------------------------------
// Normal distribution: pdf, cdf, survival, quantile
// ---------------------------------------------------------------------------

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// erf by its Taylor series; accurate for |z| <= 2.
fn erf_series(z: f64) -> f64 {
    let mut term = z;
    let mut sum = z;
    let z2 = z * z;
    for n in 1..200 {
        let nf = n as f64;
        term *= -z2 / nf;
        let contrib = term / (2.0 * nf + 1.0);
        sum += contrib;
        if contrib.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum * 2.0 / SQRT_PI
}

/// Scaled complementary error function `S(z) = √π · e^{z²} · erfc(z)` via its
/// continued fraction; converges for z ≳ 2.
fn erfc_scaled_cf(z: f64) -> f64 {
    // S(z) = 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))
    let tiny = 1e-300;
    let mut f = z;
    let mut c = z;
    let mut d = 0.0;
    for n in 1..500 {
        let a = n as f64 / 2.0;
        d = z + a * d;
        if d == 0.0 {
            d = tiny;
        }
        c = z + a / c;
        if c == 0.0 {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    1.0 / f
}

/// Upper tail probability `P(Z > x)` for a standard normal.
pub fn normal_sf(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - normal_sf(-x);
    }
    let z = x / std::f64::consts::SQRT_2;
    if z <= 2.0 {
        0.5 * (1.0 - erf_series(z))
    } else {
        0.5 * (-z * z).exp() * erfc_scaled_cf(z) / SQRT_PI
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    normal_sf(-x)
}

/// `ln P(Z > x)` for x ≥ 0, stable deep into the tail.
fn ln_normal_sf(x: f64) -> f64 {
    if x <= 2.9 {
        normal_sf(x).ln()
    } else {
        let z = x / std::f64::consts::SQRT_2;
        -0.5 * x * x + erfc_scaled_cf(z).ln() - (2.0 * SQRT_PI).ln()
    }
}

/// Upper-tail standard normal quantile: returns `z_a` with `P(Z > z_a) = a`.
pub fn normal_quantile(a: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Domain(format!(
            "normal_quantile requires a in (0,1), got {a}"
        )));
    }
    if a == 0.5 {
        return Ok(0.0);
    }
    let q = a.min(1.0 - a);
    // Rational initial guess (|error| < 4.5e-4), then Newton.
    let t = (-2.0 * q.ln()).sqrt();
    let mut x = t
        - (2.515517 + t * (0.802853 + t * 0.010328))
            / (1.0 + t * (1.432788 + t * (0.189269 + t * 0.001308)));
    if q >= 0.02 {
        for _ in 0..6 {
            x += (normal_sf(x) - q) / normal_pdf(x);
        }
    } else {
        // Newton in log space avoids underflow of both tail and density.
        let ln_q = q.ln();
        for _ in 0..8 {
            let s = erfc_scaled_cf(x / std::f64::consts::SQRT_2);
            x += (ln_normal_sf(x) - ln_q) * s / std::f64::consts::SQRT_2;
        }
    }
    Ok(if a < 0.5 { x } else { -x })
}

// ---------------------------------------------------------------------------
// Gauss hypergeometric function on (-1, 0]
// ---------------------------------------------------------------------------

/// ₂F₁(a, b; c; x) for x ∈ [-1, 0], evaluated through the Pfaff map
/// `y = x/(x-1) ∈ [0, 1/2]` where the defining series converges geometrically.
pub fn gauss_2f1(a: f64, b: f64, c: f64, x: f64) -> Result<f64> {
    if c <= 0.0 && (c - c.round()).abs() < 1e-12 {
        return Err(Error::Domain(format!(
            "gauss_2f1 undefined for nonpositive integer c = {c}"
        )));
    }
    if !(-1.0..=0.0).contains(&x) {
        return Err(Error::Domain(format!(
            "gauss_2f1 implemented for x in [-1, 0], got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let y = x / (x - 1.0);
    let b2 = c - b;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut small_streak = 0;
    for n in 0..500 {
        let nf = n as f64;
        term *= (a + nf) * (b2 + nf) / ((c + nf) * (nf + 1.0)) * y;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) {
            small_streak += 1;
            if small_streak >= 2 {
                return Ok((1.0 - x).powf(-a) * sum);
            }
        } else {
            small_streak = 0;
        }
    }
    Err(Error::Numerics(format!(
        "gauss_2f1 series did not converge for a={a}, b={b}, c={c}, x={x}"
    )))
}

// ---------------------------------------------------------------------------
// Moments and the variance factor
// ---------------------------------------------------------------------------

/// Composite Simpson rule on `[a, b]` with an even number of intervals.
pub(crate) fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n >= 2 && n.is_multiple_of(2), "simpson needs an even interval count");
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

/// Kummer's function `M(-p/2, 1/2, -t)` for `t >= 0`, through the transform
/// `M(a, b, -t) = e^{-t} M(b-a, b, t)` whose series has positive terms.
fn kummer_neg(p: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    let alpha = 0.5 + p / 2.0;
    let beta = 0.5f64;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for n in 0..2000 {
        let nf = n as f64;
        term *= (alpha + nf) * t / ((beta + nf) * (nf + 1.0));
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    (-t).exp() * sum
}

/// Absolute moment `m_p = E|Z|^p` of a standard normal,
/// `m_p = 2^{p/2} Γ((p+1)/2) / √π`.
pub fn gaussian_abs_moment(p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Domain(format!(
            "moment order must be positive, got {p}"
        )));
    }
    Ok(2.0f64.powf(p / 2.0) * gamma_fn((p + 1.0) / 2.0)? / SQRT_PI)
}

/// Absolute moment of a shifted standard normal, `E|mu + Z|^p`.
/// Conditioning identity: equals `m_p · M(-p/2, 1/2, -mu²/2)`.
pub fn shifted_abs_moment(mu: f64, p: f64) -> Result<f64> {
    Ok(gaussian_abs_moment(p)? * kummer_neg(p, 0.5 * mu * mu))
}

/// Paired moment `m_{k,p} = E(|Z|^p · |Z + √(k-1) Z'|^p)` for independent
/// standard normals, by deterministic quadrature of the defining
/// expectation: conditioning on `Z` reduces the inner expectation to a
/// shifted absolute moment, and the substitution `z = v²` removes the
/// `z^p` cusp from the outer integral so the rule converges at full rate.
pub fn gaussian_pair_moment(k: u32, p: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::Domain(format!(
            "pair moment requires k >= 2, got {k}"
        )));
    }
    if !(p > 0.0) {
        return Err(Error::Domain(format!(
            "moment order must be positive, got {p}"
        )));
    }
    let c = ((k - 1) as f64).sqrt();
    let m_p = gaussian_abs_moment(p)?;
    let two_c2 = 2.0 * c * c;
    // m_kp = 2 ∫_0^∞ z^p E|z + cZ'|^p φ(z) dz  (the inner factor is even in z)
    //      = 4 c^p m_p ∫_0^∞ v^{2p+1} M(-p/2, 1/2, -v⁴/(2c²)) φ(v²) dv
    let integrand = |v: f64| {
        if v == 0.0 {
            return 0.0;
        }
        let z = v * v;
        let z2 = z * z;
        abs_pow(v, 2.0 * p + 1.0) * kummer_neg(p, z2 / two_c2) * (-0.5 * z2).exp()
    };
    // φ(v²) is below 1e-22 beyond v = 3.3
    let integral = simpson(integrand, 0.0, 3.3, 4000) / SQRT_2PI;
    Ok(4.0 * c.powf(p) * m_p * integral)
}

/// Closed form for the paired moment in terms of ₂F₁; used as an
/// independent algebraic route in tests.
pub fn gaussian_pair_moment_closed_form(k: u32, p: f64) -> Result<f64> {
    let g = gamma_fn((p + 1.0) / 2.0)?;
    let f = gauss_2f1(-p / 2.0, (p + 1.0) / 2.0, 0.5, -1.0 / (k as f64 - 1.0))?;
    Ok(2.0f64.powf(p) / std::f64::consts::PI
        * ((k - 1) as f64).powf(p / 2.0)
        * g
        * g
        * f)
}

/// Variance factor of the dual-frequency ratio statistic:
/// `N(p,k) = (k^{2-p}(1+k)·m_{2p} + k^{2-p}(k-1)·m_p² - 2k^{3-3p/2}·m_{k,p}) / m_{2p}`.
pub fn variance_factor(p: f64, k: u32) -> Result<f64> {
    let c = moment_constants(p, k)?;
    Ok(c.n_pk)
}

/// The bundle of moment constants entering the variance factor.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MomentConstants {
    pub p: f64,
    pub k: u32,
    pub m_p: f64,
    pub m_2p: f64,
    pub m_kp: f64,
    pub n_pk: f64,
}

fn moment_cache() -> &'static RwLock<HashMap<(u64, u32), MomentConstants>> {
    static CACHE: OnceLock<RwLock<HashMap<(u64, u32), MomentConstants>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Compute (and memoize) the moment constants for `(p, k)`.
pub fn moment_constants(p: f64, k: u32) -> Result<MomentConstants> {
    let key = (p.to_bits(), k);
    if let Some(c) = moment_cache().read().unwrap().get(&key) {
        return Ok(*c);
    }
    let kf = k as f64;
    let m_p = gaussian_abs_moment(p)?;
    let m_2p = gaussian_abs_moment(2.0 * p)?;
    let m_kp = gaussian_pair_moment(k, p)?;
    let n_pk = (kf.powf(2.0 - p) * (1.0 + kf) * m_2p + kf.powf(2.0 - p) * (kf - 1.0) * m_p * m_p
        - 2.0 * kf.powf(3.0 - 1.5 * p) * m_kp)
        / m_2p;
    let c = MomentConstants {
        p,
        k,
        m_p,
        m_2p,
        m_kp,
        n_pk,
    };
    moment_cache().write().unwrap().insert(key, c);
    Ok(c)
}

/// Seeded Monte Carlo estimate of the paired moment, with its standard
/// error. Deterministic given the seed.
pub fn pair_moment_mc_oracle(k: u32, p: f64, n_draws: u64, seed: u64) -> (f64, f64) {
    assert!(n_draws >= 10_000, "oracle needs at least 1e4 draws");
    assert!(k >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root_km1 = ((k - 1) as f64).sqrt();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_draws {
        let z: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let v = abs_pow(z, p) * abs_pow(z + root_km1 * z2, p);
        sum += v;
        sum_sq += v * v;
    }
    let n = n_draws as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt())
}
