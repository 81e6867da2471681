//! Closed-form bounds on complementary coverage, horizons, and risk.
//!
//! Everything here is advisory: solvers trust the computed grids, and
//! these formulas only size default horizons and cross-check tests. All
//! logarithms are natural; base changes would rescale every bound.

use crate::error::{Error, Result};
use crate::midpoint::HalfWidth;
use crate::special::log_gamma;

fn check_shape(a: f64) -> Result<()> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::domain(format!("Beta shape must be positive and finite, got {a}")));
    }
    Ok(())
}

/// Split of a Beta shape a into an integer part and a fractional
/// remainder in (0, 1]: n_a + delta_a = a, with delta_a = 1 at integers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaFractionalParts {
    pub n_a: u32,
    pub delta_a: f64,
}

impl BetaFractionalParts {
    pub fn from_shape(a: f64) -> Result<Self> {
        check_shape(a)?;
        if a >= u32::MAX as f64 {
            return Err(Error::domain(format!("Beta shape {a} too large to split")));
        }
        let (n_a, delta_a) = if a.fract() == 0.0 { (a as u32 - 1, 1.0) } else { (a.floor() as u32, a.fract()) };
        Ok(BetaFractionalParts { n_a, delta_a })
    }
}

/// Exponential upper bound on the complementary coverage at time t under
/// a symmetric Beta(a, a) prior: 2 exp(-2 h^2 (t + 2a + 1)). Valid at
/// every s; vacuous (above 1) for small t.
pub fn chernoff_upper(t: u32, a: f64, h: HalfWidth) -> Result<f64> {
    check_shape(a)?;
    let hv = h.value();
    Ok(2.0 * (-2.0 * hv * hv * (t as f64 + 2.0 * a + 1.0)).exp())
}

/// Incomplete-Beta lower bound on the complementary coverage at time
/// t >= 1 under Beta(a, a):
///
///   2 (1/4 - h^2)^delta (1/2 - h)^(t + 2n) / ((t + 2n + 2 delta) Gamma(delta))
///
/// with (n, delta) the integer/fractional split of a. Decays linearly in
/// log with slope ln(1/2 - h).
pub fn incbeta_lower(t: u32, a: f64, h: HalfWidth) -> Result<f64> {
    if t == 0 {
        return Err(Error::domain("coverage lower bound needs t >= 1"));
    }
    let parts = BetaFractionalParts::from_shape(a)?;
    let (n, d) = (parts.n_a as f64, parts.delta_a);
    let hv = h.value();
    let ln_val = std::f64::consts::LN_2 + d * (0.25 - hv * hv).ln() + (t as f64 + 2.0 * n) * (0.5 - hv).ln()
        - (t as f64 + 2.0 * n + 2.0 * d).ln()
        - log_gamma(d)?;
    Ok(ln_val.exp())
}

/// Largest posterior variance over the integer lattice, with its
/// attainable envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaBound {
    /// max over integer 0 <= s <= t of the Beta(p+s, q+t-s) variance.
    pub exact_max: f64,
    /// 1 / (4 (t + p + q + 1)); equals exact_max when (t+q-p)/2 lands on
    /// an integer s in range.
    pub envelope: f64,
}

/// Maximal posterior variance at time t under a Beta(p, q) prior.
pub fn chebyshev_sigma_bound(t: u32, a_p: f64, a_q: f64) -> Result<SigmaBound> {
    check_shape(a_p)?;
    check_shape(a_q)?;
    let m = t as f64 + a_p + a_q;
    let var_at = |s: f64| (a_p + s) * (t as f64 - s + a_q) / (m * m * (m + 1.0));
    // concave quadratic in s, vertex at (t + q - p) / 2
    let vertex = 0.5 * (t as f64 + a_q - a_p);
    let mut exact_max = var_at(0.0).max(var_at(t as f64));
    for s in [vertex.floor(), vertex.ceil()] {
        if (0.0..=t as f64).contains(&s) {
            exact_max = exact_max.max(var_at(s));
        }
    }
    Ok(SigmaBound { exact_max, envelope: 1.0 / (4.0 * (m + 1.0)) })
}

/// Crude Chebyshev-based horizon: the optimal stopping time never
/// exceeds ceil(max(0, 1/(4 h^2 c) - 2a - 1)) under Beta(a, a).
pub fn crude_horizon_bound(c: f64, a: f64, h: HalfWidth) -> Result<u64> {
    check_shape(a)?;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::domain(format!("cost must be positive, got {c}")));
    }
    let hv = h.value();
    let raw = 1.0 / (4.0 * hv * hv * c) - 2.0 * a - 1.0;
    Ok(raw.max(0.0).ceil() as u64)
}

/// Horizon beyond which stopping is forced: the smallest N with the
/// exponential coverage bound below c, ceil(max(0, (|ln c| + ln 2) /
/// (2 h^2) - 2a - 1)). Requires 0 < c <= 1.
pub fn log_horizon(c: f64, a: f64, h: HalfWidth) -> Result<u64> {
    check_shape(a)?;
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::domain(format!("cost must lie in (0, 1], got {c}")));
    }
    let hv = h.value();
    let raw = (c.ln().abs() + std::f64::consts::LN_2) / (2.0 * hv * hv) - 2.0 * a - 1.0;
    Ok(raw.max(0.0).ceil() as u64)
}

/// Lower limit on where stopping can start:
///
///   floor(max(0, (|ln c| - ln((N+2n+delta)^2 Gamma(delta))
///                 + ln(8 (1/4 - h^2)^delta)) / |ln(1/2 - h)| - 2n))
///
/// under Beta(a, a) with horizon N from [`log_horizon`]. The bound is
/// meaningful only when c <= C_0 / (N + 1), i.e. when even spreading the
/// initial coverage over the whole horizon beats stopping at once;
/// callers should check that condition before relying on the result.
pub fn log_lower_limit(c: f64, a: f64, h: HalfWidth, n_horizon: u64) -> Result<u64> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::domain(format!("cost must be positive, got {c}")));
    }
    let parts = BetaFractionalParts::from_shape(a)?;
    let (n, d) = (parts.n_a as f64, parts.delta_a);
    let hv = h.value();
    let num = c.ln().abs() - (2.0 * (n_horizon as f64 + 2.0 * n + d).ln() + log_gamma(d)?)
        + (8.0f64).ln()
        + d * (0.25 - hv * hv).ln();
    let raw = num / (0.5 - hv).ln().abs() - 2.0 * n;
    Ok(raw.max(0.0).floor() as u64)
}

/// Chebyshev bound on the Bayes miss probability of the posterior-mean
/// interval after t >= 1 observations: 1 / (4 h^2 t).
pub fn bayes_risk_bound(t: u32, h: HalfWidth) -> Result<f64> {
    if t == 0 {
        return Err(Error::domain("risk bound needs t >= 1"));
    }
    let hv = h.value();
    Ok(1.0 / (4.0 * hv * hv * t as f64))
}

// ---------------------------------------------------------------------------
