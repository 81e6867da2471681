//! Exact performance evaluation of lattice stopping schemes.
//!
//! Any scheme driven by (t, S_t) — the optimal policy or a competitor —
//! admits exact evaluation by backward recursions over the lattice: the
//! expected sample count and miss probability conditioned on theta, and
//! their Bayes counterparts under the design prior. A seeded Monte Carlo
//! simulator provides an independent (noisy) oracle for the same
//! quantities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TriGrid;
use crate::midpoint::HalfWidth;
use crate::policy::{Region, StoppingPolicy};
use crate::prior::{predictive_success, PosteriorState, PriorSpec};

/// A stopping scheme whose decisions depend only on (t, S_t).
pub trait LatticeScheme {
    /// Forced-stop horizon; the sampling set at `horizon` must be empty.
    fn horizon(&self) -> u32;
    /// Sampling set at time t, 0 <= t <= horizon.
    fn region(&self, t: u32) -> Region;
    /// Point estimate reported when stopping at (t, s).
    fn estimate(&self, t: u32, s: u32) -> f64;
    /// Posterior miss probability C_t(s) of the interval at (t, s).
    fn comp_coverage(&self, t: u32, s: u32) -> f64;
}

/// Concrete scheme storage for competitors and file round-trips.
#[derive(Debug, Clone)]
pub struct SchemeOnLattice {
    regions: Vec<Region>,
    estimates: TriGrid<f64>,
    comp_coverage: TriGrid<f64>,
}

impl SchemeOnLattice {
    pub fn new(regions: Vec<Region>, estimates: TriGrid<f64>, comp_coverage: TriGrid<f64>) -> Result<Self> {
        let horizon = estimates.horizon();
        if comp_coverage.horizon() != horizon {
            return Err(Error::domain("estimate and coverage grids disagree on horizon"));
        }
        if regions.len() != horizon as usize + 1 {
            return Err(Error::domain(format!(
                "need {} region rows for horizon {horizon}, got {}",
                horizon + 1,
                regions.len()
            )));
        }
        if regions[horizon as usize] != Region::Stop {
            return Err(Error::domain("sampling set at the horizon must be empty"));
        }
        for (t, region) in regions.iter().enumerate() {
            if let Region::Sample { lo, hi } = region {
                if lo > hi || *hi > t as u32 {
                    return Err(Error::domain(format!("malformed sampling interval [{lo}, {hi}] at t = {t}")));
                }
            }
        }
        Ok(SchemeOnLattice { regions, estimates, comp_coverage })
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn estimates(&self) -> &TriGrid<f64> {
        &self.estimates
    }

    pub fn comp_coverages(&self) -> &TriGrid<f64> {
        &self.comp_coverage
    }
}

impl LatticeScheme for SchemeOnLattice {
    fn horizon(&self) -> u32 {
        self.estimates.horizon()
    }

    fn region(&self, t: u32) -> Region {
        self.regions[t as usize]
    }

    fn estimate(&self, t: u32, s: u32) -> f64 {
        *self.estimates.get(t, s)
    }

    fn comp_coverage(&self, t: u32, s: u32) -> f64 {
        *self.comp_coverage.get(t, s)
    }
}

impl LatticeScheme for StoppingPolicy {
    fn horizon(&self) -> u32 {
        StoppingPolicy::horizon(self)
    }

    fn region(&self, t: u32) -> Region {
        self.grid().regions()[t as usize]
    }

    fn estimate(&self, t: u32, s: u32) -> f64 {
        self.tables().cells().get(t, s).estimate
    }

    fn comp_coverage(&self, t: u32, s: u32) -> f64 {
        self.tables().cells().get(t, s).comp_coverage
    }
}

/// Expected number of observations under a fixed success probability.
/// Returns 0 when the scheme stops before sampling at all.
pub fn expected_samples_given_theta(scheme: &impl LatticeScheme, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let n = scheme.horizon();
    if !scheme.region(0).contains(0) {
        return Ok(0.0);
    }
    // u[s] holds the expected count-to-come at (t+1, s), valid when that
    // cell still samples
    let mut u = vec![0.0f64; n as usize + 2];
    for t in (0..n).rev() {
        let next = scheme.region(t + 1);
        for s in 0..=t {
            let s = s as usize;
            let up = if next.contains(s as u32 + 1) { u[s + 1] } else { 0.0 };
            let down = if next.contains(s as u32) { u[s] } else { 0.0 };
            u[s] = 1.0 + theta * up + (1.0 - theta) * down;
        }
    }
    Ok(u[0])
}

/// Expected number of observations with theta integrated out under the
/// prior: the same recursion with the predictive success probability in
/// place of theta.
pub fn expected_samples_bayes(scheme: &impl LatticeScheme, prior: &PriorSpec) -> Result<f64> {
    let n = scheme.horizon();
    let g = predictive_grid(prior, n.saturating_sub(1))?;
    expected_samples_bayes_with_g(scheme, &g)
}

/// [`expected_samples_bayes`] against a caller-supplied predictive grid,
/// so repeated evaluations under one prior share a single grid build.
pub fn expected_samples_bayes_with_g(scheme: &impl LatticeScheme, g: &TriGrid<f64>) -> Result<f64> {
    let n = scheme.horizon();
    if g.horizon() + 1 < n {
        return Err(Error::domain("predictive grid is shorter than the scheme horizon"));
    }
    if !scheme.region(0).contains(0) {
        return Ok(0.0);
    }
    let mut u = vec![0.0f64; n as usize + 2];
    for t in (0..n).rev() {
        let next = scheme.region(t + 1);
        for s in 0..=t {
            let gs = *g.get(t, s);
            let s = s as usize;
            let up = if next.contains(s as u32 + 1) { u[s + 1] } else { 0.0 };
            let down = if next.contains(s as u32) { u[s] } else { 0.0 };
            u[s] = 1.0 + gs * up + (1.0 - gs) * down;
        }
    }
    Ok(u[0])
}

/// Absolute slack in the miss indicator |estimate - theta| > h.
/// Exact ties occur in real configurations (a clamped estimate 1 - h
/// against theta = 1 sits at distance exactly h) and must count as
/// covered, but the subtraction misrepresents them by a few ulps.
pub const MISS_BOUNDARY_TOL: f64 = 1e-12;

/// Probability that the reported interval misses a fixed theta:
/// P(|estimate_T - theta| > h | theta), with strict inequality.
pub fn miss_prob_given_theta(scheme: &impl LatticeScheme, theta: f64, h: HalfWidth) -> Result<f64> {
    check_theta(theta)?;
    let n = scheme.horizon();
    let miss =
        |t: u32, s: u32| if (scheme.estimate(t, s) - theta).abs() > h.value() + MISS_BOUNDARY_TOL { 1.0 } else { 0.0 };
    let mut w: Vec<f64> = (0..=n).map(|s| miss(n, s)).collect();
    for t in (0..n).rev() {
        let region = scheme.region(t);
        for s in 0..=t {
            w[s as usize] = if region.contains(s) {
                theta * w[s as usize + 1] + (1.0 - theta) * w[s as usize]
            } else {
                miss(t, s)
            };
        }
    }
    Ok(w[0])
}

/// Bayes miss probability P(|estimate_T - theta| > h): the miss
/// recursion with the stored posterior coverage in place of the
/// indicator and the predictive probability in place of theta.
pub fn miss_prob_bayes(scheme: &impl LatticeScheme, prior: &PriorSpec) -> Result<f64> {
    let n = scheme.horizon();
    let g = predictive_grid(prior, n.saturating_sub(1))?;
    miss_prob_bayes_with_g(scheme, &g)
}

/// [`miss_prob_bayes`] against a caller-supplied predictive grid, so
/// repeated evaluations under one prior share a single grid build.
pub fn miss_prob_bayes_with_g(scheme: &impl LatticeScheme, g: &TriGrid<f64>) -> Result<f64> {
    let n = scheme.horizon();
    if g.horizon() + 1 < n {
        return Err(Error::domain("predictive grid is shorter than the scheme horizon"));
    }
    let mut w: Vec<f64> = (0..=n).map(|s| scheme.comp_coverage(n, s)).collect();
    for t in (0..n).rev() {
        let region = scheme.region(t);
        for s in 0..=t {
            w[s as usize] = if region.contains(s) {
                let gs = *g.get(t, s);
                gs * w[s as usize + 1] + (1.0 - gs) * w[s as usize]
            } else {
                scheme.comp_coverage(t, s)
            };
        }
    }
    Ok(w[0])
}

/// First-index argmax of the conditional miss probability over a grid.
pub fn worst_case_miss(
    scheme: &(impl LatticeScheme + Sync),
    h: HalfWidth,
    theta_grid: &[f64],
) -> Result<(f64, f64)> {
    if theta_grid.is_empty() {
        return Err(Error::domain("worst-case search needs a nonempty theta grid"));
    }
    let misses: Vec<f64> = theta_grid
        .par_iter()
        .map(|&theta| miss_prob_given_theta(scheme, theta, h))
        .collect::<Result<_>>()?;
    let mut best = (theta_grid[0], misses[0]);
    for (&theta, &m) in theta_grid.iter().zip(&misses).skip(1) {
        if m > best.1 {
            best = (theta, m);
        }
    }
    Ok(best)
}

/// 1001 equispaced points on [0, 1] including both endpoints.
pub fn default_theta_grid() -> Vec<f64> {
    (0..=1000).map(|i| i as f64 / 1000.0).collect()
}

/// Exact per-theta curves plus Bayes scalars for one scheme.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub theta_grid: Vec<f64>,
    pub expected_n_given_theta: Vec<f64>,
    pub miss_given_theta: Vec<f64>,
    pub expected_n: f64,
    pub miss_bayes: f64,
}

/// Evaluate a scheme exactly on a theta grid and under the prior.
pub fn performance_report(
    scheme: &(impl LatticeScheme + Sync),
    prior: &PriorSpec,
    h: HalfWidth,
    theta_grid: &[f64],
) -> Result<PerformanceReport> {
    let expected_n_given_theta: Vec<f64> = theta_grid
        .par_iter()
        .map(|&theta| expected_samples_given_theta(scheme, theta))
        .collect::<Result<_>>()?;
    let miss_given_theta: Vec<f64> = theta_grid
        .par_iter()
        .map(|&theta| miss_prob_given_theta(scheme, theta, h))
        .collect::<Result<_>>()?;
    Ok(PerformanceReport {
        theta_grid: theta_grid.to_vec(),
        expected_n_given_theta,
        miss_given_theta,
        expected_n: expected_samples_bayes(scheme, prior)?,
        miss_bayes: miss_prob_bayes(scheme, prior)?,
    })
}

/// Monte Carlo estimates with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub mean_t: f64,
    pub se_t: f64,
    pub miss_rate: f64,
    pub se_miss: f64,
}

/// Simulate the scheme at a fixed theta.
///
/// Deterministic for a fixed seed independent of thread count: every
/// replication r draws from ChaCha8 seeded with `seed` on stream r, so
/// the partitioning across workers cannot change the sample.
pub fn simulate(
    scheme: &(impl LatticeScheme + Sync),
    theta: f64,
    h: HalfWidth,
    replications: u32,
    seed: u64,
) -> Result<SimulationSummary> {
    check_theta(theta)?;
    if replications == 0 {
        return Err(Error::domain("need at least one replication"));
    }
    let (sum_t, sum_t2, miss_count) = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let (mut t, mut s) = (0u32, 0u32);
            while scheme.region(t).contains(s) {
                if rng.random::<f64>() < theta {
                    s += 1;
                }
                t += 1;
            }
            let missed = (scheme.estimate(t, s) - theta).abs() > h.value() + MISS_BOUNDARY_TOL;
            (t as f64, (t as f64) * (t as f64), missed as u32 as f64)
        })
        .reduce(|| (0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let r = replications as f64;
    let mean_t = sum_t / r;
    let var_t = if replications > 1 { ((sum_t2 - sum_t * sum_t / r) / (r - 1.0)).max(0.0) } else { 0.0 };
    let miss_rate = miss_count / r;
    Ok(SimulationSummary {
        mean_t,
        se_t: (var_t / r).sqrt(),
        miss_rate,
        se_miss: (miss_rate * (1.0 - miss_rate) / r).sqrt(),
    })
}

/// Marginal pmf of S_t on the full lattice, sampling never stopped:
/// row t sums to 1 for every t.
pub fn lattice_marginal_pmf(prior: &PriorSpec, horizon: u32) -> Result<TriGrid<f64>> {
    let g = predictive_grid(prior, horizon)?;
    let mut pmf = TriGrid::build(horizon, |_, _| 0.0f64);
    *pmf.get_mut(0, 0) = 1.0;
    for t in 0..horizon {
        for s in 0..=t {
            let mass = *pmf.get(t, s);
            if mass == 0.0 {
                continue;
            }
            let gs = *g.get(t, s);
            *pmf.get_mut(t + 1, s + 1) += mass * gs;
            *pmf.get_mut(t + 1, s) += mass * (1.0 - gs);
        }
    }
    Ok(pmf)
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::domain(format!("theta must lie in [0, 1], got {theta}")));
    }
    Ok(())
}

fn predictive_grid(prior: &PriorSpec, horizon: u32) -> Result<TriGrid<f64>> {
    TriGrid::build_par(horizon, |t, s| {
        let state = PosteriorState::new(prior, t, s).expect("s <= t by construction");
        predictive_success(&state)
    })
    .transpose()
}

// ---------------------------------------------------------------------------
