//! Priors on the success probability and their lattice posteriors.
//!
//! After t trials with s successes the posterior density is proportional
//! to theta^s (1-theta)^(t-s) pi(theta). A Beta(p, q) prior stays Beta
//! with shapes (p + s, q + t - s); a tabulated prior (piecewise-linear
//! density on [0, 1]) is handled by composite Gauss-Legendre quadrature
//! with log-space weights, since the likelihood factor underflows long
//! before the lattice horizon is reached.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{reg_inc_beta, BetaParams};

// ---------------------------------------------------------------------------
// prior specification
// ---------------------------------------------------------------------------

/// Wire form: {"kind": "beta", "p": .., "q": ..} or
/// {"kind": "tabulated", "nodes": [[theta, density], ..]}.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum PriorWire {
    Beta { p: f64, q: f64 },
    Tabulated { nodes: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Beta(BetaParams),
    Tabulated { nodes: Vec<(f64, f64)> },
}

/// Validated prior on theta; immutable once constructed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PriorWire", into = "PriorWire")]
pub struct PriorSpec(Repr);

impl TryFrom<PriorWire> for PriorSpec {
    type Error = Error;
    fn try_from(w: PriorWire) -> Result<Self> {
        match w {
            PriorWire::Beta { p, q } => PriorSpec::beta(p, q),
            PriorWire::Tabulated { nodes } => PriorSpec::tabulated(nodes),
        }
    }
}

impl From<PriorSpec> for PriorWire {
    fn from(p: PriorSpec) -> Self {
        match p.0 {
            Repr::Beta(b) => PriorWire::Beta { p: b.p(), q: b.q() },
            Repr::Tabulated { nodes } => PriorWire::Tabulated { nodes },
        }
    }
}

impl PriorSpec {
    /// Beta(p, q) prior, shapes strictly positive.
    pub fn beta(p: f64, q: f64) -> Result<Self> {
        Ok(PriorSpec(Repr::Beta(BetaParams::new(p, q)?)))
    }

    /// Symmetric Beta(a, a) prior.
    pub fn symmetric_beta(a: f64) -> Result<Self> {
        Self::beta(a, a)
    }

    /// Piecewise-linear density through (theta, density) nodes.
    ///
    /// Nodes must start at theta = 0, end at theta = 1, be strictly
    /// increasing in theta with nonnegative finite densities, and the
    /// interpolant must integrate to 1 within 1e-8 (trapezoid rule is the
    /// exact integral of the interpolant).
    pub fn tabulated(nodes: Vec<(f64, f64)>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::domain("tabulated prior needs at least two nodes"));
        }
        if nodes[0].0 != 0.0 || nodes[nodes.len() - 1].0 != 1.0 {
            return Err(Error::domain("tabulated prior must span [0, 1]"));
        }
        let mut integral = 0.0;
        for w in nodes.windows(2) {
            let ((x0, d0), (x1, d1)) = (w[0], w[1]);
            if !(x1 > x0) {
                return Err(Error::domain("tabulated abscissae must be strictly increasing"));
            }
            if !(d0.is_finite() && d1.is_finite() && d0 >= 0.0 && d1 >= 0.0) {
                return Err(Error::domain("tabulated densities must be finite and nonnegative"));
            }
            integral += 0.5 * (d0 + d1) * (x1 - x0);
        }
        if (integral - 1.0).abs() > 1e-8 {
            return Err(Error::domain(format!(
                "tabulated density integrates to {integral}, expected 1 within 1e-8"
            )));
        }
        Ok(PriorSpec(Repr::Tabulated { nodes }))
    }

    /// Shape parameters when the prior is Beta.
    pub fn beta_params(&self) -> Option<BetaParams> {
        match &self.0 {
            Repr::Beta(b) => Some(*b),
            Repr::Tabulated { .. } => None,
        }
    }

    /// Prior density at theta (piecewise-linear interpolation for
    /// tabulated priors).
    pub fn density(&self, theta: f64) -> f64 {
        self.log_density(theta).exp()
    }

    /// Natural log of the prior density; -inf where the density vanishes.
    pub fn log_density(&self, theta: f64) -> f64 {
        if !(0.0..=1.0).contains(&theta) {
            return f64::NEG_INFINITY;
        }
        match &self.0 {
            Repr::Beta(b) => {
                let ln_b = ln_beta(b.p(), b.q());
                (b.p() - 1.0) * theta.ln() + (b.q() - 1.0) * f64::ln_1p(-theta) - ln_b
            }
            Repr::Tabulated { nodes } => interp(nodes, theta).ln(),
        }
    }
}

fn ln_beta(p: f64, q: f64) -> f64 {
    use crate::special::log_gamma;
    log_gamma(p).unwrap() + log_gamma(q).unwrap() - log_gamma(p + q).unwrap()
}

/// Piecewise-linear interpolation on sorted nodes.
fn interp(nodes: &[(f64, f64)], x: f64) -> f64 {
    let idx = nodes.partition_point(|&(t, _)| t <= x);
    if idx == 0 {
        return nodes[0].1;
    }
    if idx == nodes.len() {
        return nodes[nodes.len() - 1].1;
    }
    let (x0, d0) = nodes[idx - 1];
    let (x1, d1) = nodes[idx];
    d0 + (d1 - d0) * (x - x0) / (x1 - x0)
}

// ---------------------------------------------------------------------------
// posterior state
// ---------------------------------------------------------------------------

/// Lattice cell (t trials, s successes) paired with a prior.
#[derive(Debug, Clone, Copy)]
pub struct PosteriorState<'a> {
    t: u32,
    s: u32,
    prior: &'a PriorSpec,
}

impl<'a> PosteriorState<'a> {
    pub fn new(prior: &'a PriorSpec, t: u32, s: u32) -> Result<Self> {
        if s > t {
            return Err(Error::domain(format!("successes s = {s} exceed trials t = {t}")));
        }
        Ok(PosteriorState { t, s, prior })
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    pub fn prior(&self) -> &'a PriorSpec {
        self.prior
    }
}

/// Posterior shape parameters (p + s, q + t - s); Beta priors only.
pub fn posterior_params(state: &PosteriorState<'_>) -> Result<BetaParams> {
    let b = state.prior.beta_params().ok_or(Error::UnsupportedPrior {
        op: "posterior_params",
        why: "closed-form posterior shapes exist only for Beta priors".into(),
    })?;
    BetaParams::new(b.p() + state.s as f64, b.q() + (state.t - state.s) as f64)
}

/// Posterior cdf P(theta <= x | t, s) at x in [0, 1].
pub fn posterior_cdf(state: &PosteriorState<'_>, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("posterior_cdf requires x in [0, 1], got {x}")));
    }
    match &state.prior.0 {
        Repr::Beta(_) => reg_inc_beta(x, posterior_params(state)?),
        Repr::Tabulated { nodes } => {
            let num = log_weighted_integral(nodes, state.t, state.s, 0.0, x, 0)?;
            let den = log_weighted_integral(nodes, state.t, state.s, 0.0, 1.0, 0)?;
            ratio_of_logs(num, den)
        }
    }
}

/// Predictive probability that the next trial succeeds, i.e. the
/// posterior mean of theta.
pub fn predictive_success(state: &PosteriorState<'_>) -> Result<f64> {
    match &state.prior.0 {
        Repr::Beta(b) => {
            Ok((state.s as f64 + b.p()) / (state.t as f64 + b.p() + b.q()))
        }
        Repr::Tabulated { nodes } => {
            let num = log_weighted_integral(nodes, state.t, state.s, 0.0, 1.0, 1)?;
            let den = log_weighted_integral(nodes, state.t, state.s, 0.0, 1.0, 0)?;
            ratio_of_logs(num, den)
        }
    }
}

/// Posterior probability of the two tails outside [lo, hi]; evaluated
/// tail-by-tail so tiny complements keep relative accuracy.
pub(crate) fn posterior_outside(state: &PosteriorState<'_>, lo: f64, hi: f64) -> Result<f64> {
    debug_assert!((0.0..=1.0).contains(&lo) && lo <= hi && hi <= 1.0);
    match &state.prior.0 {
        Repr::Beta(_) => {
            let params = posterior_params(state)?;
            let lower = if lo > 0.0 { reg_inc_beta(lo, params)? } else { 0.0 };
            let upper = if hi < 1.0 {
                let flipped = BetaParams::new(params.q(), params.p())?;
                reg_inc_beta(1.0 - hi, flipped)?
            } else {
                0.0
            };
            Ok(lower + upper)
        }
        Repr::Tabulated { nodes } => {
            let den = log_weighted_integral(nodes, state.t, state.s, 0.0, 1.0, 0)?;
            let mut outside = 0.0;
            if lo > 0.0 {
                outside += ratio_of_logs(log_weighted_integral(nodes, state.t, state.s, 0.0, lo, 0)?, den)?;
            }
            if hi < 1.0 {
                outside += ratio_of_logs(log_weighted_integral(nodes, state.t, state.s, hi, 1.0, 0)?, den)?;
            }
            Ok(outside)
        }
    }
}

// ---------------------------------------------------------------------------
// quadrature for tabulated priors
// ---------------------------------------------------------------------------

const GL_NODES: usize = 64;
const GL_PANELS: usize = 32;

/// Gauss-Legendre nodes and weights on [-1, 1], computed once by Newton
/// iteration on the Legendre recurrence.
fn gl_rule() -> &'static ([f64; GL_NODES], [f64; GL_NODES]) {
    static RULE: OnceLock<([f64; GL_NODES], [f64; GL_NODES])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_NODES;
        let mut x = [0.0; GL_NODES];
        let mut w = [0.0; GL_NODES];
        for i in 0..n.div_ceil(2) {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
                }
                pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() < 1e-15 {
                    break;
                }
            }
            x[i] = -z;
            x[n - 1 - i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
            w[n - 1 - i] = w[i];
        }
        (x, w)
    })
}

/// log of integral over [a, b] of theta^(s+extra) (1-theta)^(t-s) pi(theta),
/// by composite Gauss-Legendre with a running max so only ratios are
/// exponentiated. Returns (max_log, sum of w * exp(log - max_log)).
fn log_weighted_integral(
    nodes: &[(f64, f64)],
    t: u32,
    s: u32,
    a: f64,
    b: f64,
    extra: u32,
) -> Result<(f64, f64)> {
    debug_assert!(a <= b);
    if a == b {
        return Ok((f64::NEG_INFINITY, 0.0));
    }
    let (gx, gw) = gl_rule();
    let sp = (s + extra) as f64;
    let fp = (t - s) as f64;
    let log_term = |theta: f64| -> f64 {
        let ln_pi = interp(nodes, theta).ln();
        if ln_pi == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let lt = if sp > 0.0 { sp * theta.ln() } else { 0.0 };
        let lf = if fp > 0.0 { fp * f64::ln_1p(-theta) } else { 0.0 };
        lt + lf + ln_pi
    };
    // first pass: peak of the log integrand over all panel nodes
    let width = (b - a) / GL_PANELS as f64;
    let mut peak = f64::NEG_INFINITY;
    let mut logs = Vec::with_capacity(GL_PANELS * GL_NODES);
    let mut weights = Vec::with_capacity(GL_PANELS * GL_NODES);
    for panel in 0..GL_PANELS {
        let lo = a + width * panel as f64;
        let mid = lo + 0.5 * width;
        let half = 0.5 * width;
        for k in 0..GL_NODES {
            let theta = mid + half * gx[k];
            let l = log_term(theta);
            peak = peak.max(l);
            logs.push(l);
            weights.push(half * gw[k]);
        }
    }
    if peak == f64::NEG_INFINITY {
        // density is identically zero on [a, b]
        return Ok((f64::NEG_INFINITY, 0.0));
    }
    let mut sum = 0.0;
    for (l, w) in logs.iter().zip(&weights) {
        sum += w * (l - peak).exp();
    }
    if !sum.is_finite() {
        return Err(Error::Quadrature(format!("non-finite quadrature sum over [{a}, {b}]")));
    }
    Ok((peak, sum))
}

/// num / den where each side is (max_log, scaled_sum).
fn ratio_of_logs(num: (f64, f64), den: (f64, f64)) -> Result<f64> {
    let (ln_n, sn) = num;
    let (ln_d, sd) = den;
    if sd <= 0.0 || ln_d == f64::NEG_INFINITY {
        return Err(Error::Quadrature("posterior normalizer vanished".into()));
    }
    if sn == 0.0 || ln_n == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let r = (ln_n - ln_d).exp() * (sn / sd);
    if !r.is_finite() {
        return Err(Error::Quadrature("posterior ratio overflowed".into()));
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
