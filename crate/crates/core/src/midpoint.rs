//! Coverage-optimal interval mid-points on the success lattice.
//!
//! For a cell (t, s) the reported interval is [mid - h, mid + h] cropped
//! to [0, 1], and the best mid minimizes the posterior probability of the
//! two tails outside the interval. Interior optima satisfy a first-order
//! condition equating the posterior weight at the two interval edges:
//!
//!   (mid+h)^s (1-mid-h)^(t-s) pi(mid+h) = (mid-h)^s (1-mid+h)^(t-s) pi(mid-h)
//!
//! which for a Beta(p, q) prior collapses to
//!
//!   ((mid-h)/(mid+h))^(s+p-1) = ((1-h-mid)/(1+h-mid))^(t-s+q-1).
//!
//! Candidates are the interior roots of that equation plus the clamp
//! points h and 1 - h; the minimizer over candidates wins, ties resolving
//! to the smaller mid-point.

use crate::error::{Error, Result};
use crate::grid::TriGrid;
use crate::prior::{posterior_outside, PosteriorState, PriorSpec};
use crate::special::{find_root, maximize_unimodal, Bracket};

/// Interval half-width, strictly inside (0, 1/2).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HalfWidth(f64);

impl HalfWidth {
    pub fn new(h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0 && h < 0.5) {
            return Err(Error::domain(format!("half-width must lie strictly in (0, 1/2), got {h}")));
        }
        Ok(HalfWidth(h))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Optimal mid-point and its complementary coverage at one lattice cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MidpointCell {
    /// Reporting mid-point, always in [h, 1 - h].
    pub estimate: f64,
    /// Posterior probability that theta falls outside
    /// [estimate - h, estimate + h].
    pub comp_coverage: f64,
}

/// Complementary coverage of the interval centered at `mid`: the
/// posterior probability outside [mid - h, mid + h] cropped to [0, 1].
pub fn coverage_given_midpoint(state: &PosteriorState<'_>, mid: f64, h: HalfWidth) -> Result<f64> {
    if !(0.0..=1.0).contains(&mid) {
        return Err(Error::domain(format!("mid-point must lie in [0, 1], got {mid}")));
    }
    let lo = (mid - h.value()).max(0.0);
    let hi = (mid + h.value()).min(1.0);
    posterior_outside(state, lo, hi)
}

/// Exponent-weighted log term, with the conventions 0 * ln 0 = 0 and
/// negative-exponent blowups mapping to +inf.
#[inline]
fn pow_term(coef: f64, base: f64) -> f64 {
    if coef == 0.0 {
        0.0
    } else {
        coef * base.max(0.0).ln()
    }
}

/// Log-weights of the two interval edges at mid = u. The residual is
/// sign(minus - plus) after exponentiation.
fn edge_logs(state: &PosteriorState<'_>, u: f64, h: f64) -> (f64, f64) {
    let (t, s) = (state.t() as f64, state.s() as f64);
    match state.prior().beta_params() {
        Some(b) => {
            // prior absorbed into the exponents
            let a_lo = s + b.p() - 1.0;
            let a_hi = t - s + b.q() - 1.0;
            let minus = pow_term(a_lo, u - h) + pow_term(a_hi, 1.0 + h - u);
            let plus = pow_term(a_lo, u + h) + pow_term(a_hi, 1.0 - h - u);
            (minus, plus)
        }
        None => {
            let prior = state.prior();
            let minus = pow_term(s, u - h) + pow_term(t - s, 1.0 + h - u) + prior.log_density((u - h).max(0.0));
            let plus = pow_term(s, u + h) + pow_term(t - s, 1.0 - h - u) + prior.log_density((u + h).min(1.0));
            (minus, plus)
        }
    }
}

/// First-order-condition residual at mid = `mid`.
///
/// Zero exactly at interior stationary points of the coverage; the sign
/// structure is exact. To survive exponents of order 1e4 the two terms
/// are rescaled by the larger log before exponentiation, so magnitudes
/// are normalized to [-1, 1] rather than matching the raw difference.
pub fn root_equation_residual(state: &PosteriorState<'_>, mid: f64, h: HalfWidth) -> f64 {
    let (minus, plus) = edge_logs(state, mid, h.value());
    if minus == f64::INFINITY && plus == f64::INFINITY {
        return 0.0;
    }
    if minus == f64::INFINITY {
        return 1.0;
    }
    if plus == f64::INFINITY {
        return -1.0;
    }
    let m = minus.max(plus);
    if m == f64::NEG_INFINITY {
        return 0.0;
    }
    (minus - m).exp() - (plus - m).exp()
}

const RESIDUAL_SCAN_NODES: usize = 512;
const ROOT_TOL: f64 = 1e-12;
const CANDIDATE_MERGE_TOL: f64 = 1e-6;

/// Outcome of the interior search.
struct InteriorScan {
    roots: Vec<f64>,
    /// Residual vanished at every scan node: the coverage is flat in mid.
    flat: bool,
}

/// Interior candidates: roots of the first-order condition in (h, 1-h).
fn interior_candidates(state: &PosteriorState<'_>, h: HalfWidth) -> Result<InteriorScan> {
    let hv = h.value();
    let (lo, hi) = (hv, 1.0 - hv);
    let mut out = Vec::new();

    // Beta priors with same-signed exponents make the log-difference
    // strictly monotone in mid, so a single bisection replaces the scan.
    if let Some(b) = state.prior().beta_params() {
        let a_lo = state.s() as f64 + b.p() - 1.0;
        let a_hi = (state.t() - state.s()) as f64 + b.q() - 1.0;
        let monotone = (a_lo >= 0.0 && a_hi >= 0.0 && a_lo + a_hi > 0.0)
            || (a_lo <= 0.0 && a_hi <= 0.0 && a_lo + a_hi < 0.0);
        if monotone {
            let r_lo = root_equation_residual(state, lo, h);
            let r_hi = root_equation_residual(state, hi, h);
            if r_lo * r_hi < 0.0 {
                // root on the smooth log-difference, same zero set
                let d = |u: f64| {
                    let (minus, plus) = edge_logs(state, u, hv);
                    minus - plus
                };
                let root = find_root(d, &Bracket::new(lo, hi, ROOT_TOL)?)?;
                out.push(root);
            }
            return Ok(InteriorScan { roots: out, flat: false });
        }
    }

    // general scan: bracket every sign change, remember exact-zero runs
    let step = (hi - lo) / (RESIDUAL_SCAN_NODES - 1) as f64;
    let node = |i: usize| if i == RESIDUAL_SCAN_NODES - 1 { hi } else { lo + step * i as f64 };
    let vals: Vec<f64> = (0..RESIDUAL_SCAN_NODES).map(|i| root_equation_residual(state, node(i), h)).collect();
    if vals.iter().all(|v| *v == 0.0) {
        return Ok(InteriorScan { roots: out, flat: true });
    }
    let mut zero_run_start: Option<usize> = None;
    for i in 0..RESIDUAL_SCAN_NODES {
        if vals[i] == 0.0 {
            zero_run_start.get_or_insert(i);
        } else if let Some(start) = zero_run_start.take() {
            out.push(node((start + i - 1) / 2));
        }
        if i + 1 < RESIDUAL_SCAN_NODES && vals[i] * vals[i + 1] < 0.0 {
            let root = find_root(
                |u| root_equation_residual(state, u, h),
                &Bracket::new(node(i), node(i + 1), ROOT_TOL)?,
            )?;
            out.push(root);
        }
    }
    if let Some(start) = zero_run_start {
        out.push(node((start + RESIDUAL_SCAN_NODES - 1) / 2));
    }

    // Wiggly tabulated densities can defeat a 512-node scan, so also feed
    // the direct coverage minimizer as a candidate. Skip it when it merely
    // re-finds a root: the golden-section abscissa carries flat-top noise
    // that would displace the exact root by ~1e-7.
    if state.prior().beta_params().is_none() {
        let (cand, _) = maximize_unimodal(
            |mid| -coverage_given_midpoint(state, mid, h).unwrap_or(f64::INFINITY),
            &Bracket::new(lo, hi, ROOT_TOL)?,
        );
        let near_known = out
            .iter()
            .chain([lo, hi].iter())
            .any(|c| (c - cand).abs() < CANDIDATE_MERGE_TOL);
        if !near_known {
            out.push(cand);
        }
    }
    Ok(InteriorScan { roots: out, flat: false })
}

/// Coverage-optimal mid-point for one cell.
///
/// Minimizes the complementary coverage over the interior roots plus the
/// clamp points h and 1 - h; ties resolve to the smaller mid-point. For
/// the flat posterior (uniform prior at t = 0) every mid-point ties and
/// the center 1/2 is returned.
pub fn optimal_midpoint(state: &PosteriorState<'_>, h: HalfWidth) -> Result<MidpointCell> {
    let hv = h.value();
    let scan = interior_candidates(state, h)?;
    if scan.flat {
        // flat coverage: every mid-point ties, take the center
        let comp = coverage_given_midpoint(state, 0.5, h)?;
        return Ok(MidpointCell { estimate: 0.5, comp_coverage: comp });
    }
    let mut candidates = vec![hv];
    candidates.extend(scan.roots);
    candidates.push(1.0 - hv);
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("candidates are finite"));

    let mut best: Option<MidpointCell> = None;
    for mid in candidates {
        let comp = coverage_given_midpoint(state, mid, h)?;
        let better = match &best {
            None => true,
            Some(b) => comp < b.comp_coverage,
        };
        if better {
            best = Some(MidpointCell { estimate: mid, comp_coverage: comp });
        }
    }
    Ok(best.expect("at least the clamp candidates exist"))
}

/// Optimal mid-point and complementary coverage for every cell with
/// t <= horizon. Rows are filled in parallel; the fill is pure per cell.
pub fn coverage_grid(prior: &PriorSpec, h: HalfWidth, horizon: u32) -> Result<TriGrid<MidpointCell>> {
    TriGrid::build_par(horizon, |t, s| {
        let state = PosteriorState::new(prior, t, s).expect("s <= t by construction");
        optimal_midpoint(&state, h)
    })
    .transpose()
}

// ---------------------------------------------------------------------------
