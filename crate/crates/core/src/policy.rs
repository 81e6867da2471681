//! Finite-horizon optimal stopping by backward induction.
//!
//! The running cost charges c per observation plus, on stopping, the
//! complementary coverage of the reported interval. With V_N(s) equal to
//! the terminal complementary coverage, the recursion
//!
//!   Vtilde_t(s) = g V_{t+1}(s+1) + (1 - g) V_{t+1}(s)
//!   V_t(s)      = min(C_t(s), c + Vtilde_t(s))
//!
//! yields the optimal cost-to-go, and sampling is optimal exactly where
//! C_t(s) > c + Vtilde_t(s); ties stop. Per-row sampling sets are stored
//! as integer intervals in s; at large costs a few rows can split into
//! two disconnected sampling lobes, in which case the solver refuses to
//! continue rather than truncating, and [`solve_summary`] serves the
//! quantities that remain well-defined.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TriGrid;
use crate::midpoint::{coverage_grid, HalfWidth, MidpointCell};
use crate::prior::{predictive_success, PosteriorState, PriorSpec};

/// Lagrange multiplier: cost charged per observation.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CostPerSample(f64);

impl CostPerSample {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::domain(format!("cost per sample must be finite and nonnegative, got {c}")));
        }
        Ok(CostPerSample(c))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Per-row sampling set: either empty or an inclusive interval in s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Region {
    /// No s continues at this t.
    Stop,
    /// Observation t + 1 is taken iff lo <= s <= hi.
    Sample { lo: u32, hi: u32 },
}

impl Region {
    pub fn contains(&self, s: u32) -> bool {
        match self {
            Region::Stop => false,
            Region::Sample { lo, hi } => (*lo..=*hi).contains(&s),
        }
    }
}

/// Row classification in threshold form: the sampling set as the open
/// integer interval (r_lo, r_hi) between the two stopping branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Thresholds {
    AllSampling,
    AllStopping,
    /// Sampling at r_lo < s < r_hi; r_lo = -1 or r_hi = t + 1 when the
    /// corresponding stopping branch is absent.
    Window { r_lo: i64, r_hi: i64 },
}

/// Action at a lattice cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    Continue,
    Stop { estimate: f64, interval_lo: f64, interval_hi: f64 },
}

/// Cost-independent per-cell tables: optimal mid-points with their
/// complementary coverage, and the predictive success probabilities.
/// Building these dominates the solve time, so calibration reuses one
/// instance across every cost it tries.
#[derive(Debug, Clone)]
pub struct LatticeTables {
    prior: PriorSpec,
    h: HalfWidth,
    horizon: u32,
    cells: TriGrid<MidpointCell>,
    g: TriGrid<f64>,
}

impl LatticeTables {
    pub fn build(prior: &PriorSpec, h: HalfWidth, horizon: u32) -> Result<Self> {
        let cells = coverage_grid(prior, h, horizon)?;
        let g = TriGrid::build_par(horizon, |t, s| {
            let state = PosteriorState::new(prior, t, s).expect("s <= t by construction");
            predictive_success(&state)
        })
        .transpose()?;
        Ok(LatticeTables { prior: prior.clone(), h, horizon, cells, g })
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn half_width(&self) -> HalfWidth {
        self.h
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn cells(&self) -> &TriGrid<MidpointCell> {
        &self.cells
    }

    /// Success probability of observation t + 1 given (t, s).
    pub fn g(&self) -> &TriGrid<f64> {
        &self.g
    }
}

/// Solved value grids and sampling regions.
#[derive(Debug, Clone)]
pub struct PolicyGrid {
    values: TriGrid<f64>,
    /// c + Vtilde is compared against stopping; row at t = horizon is
    /// +inf since no further observation exists.
    continue_values: TriGrid<f64>,
    regions: Vec<Region>,
}

impl PolicyGrid {
    pub fn values(&self) -> &TriGrid<f64> {
        &self.values
    }

    pub fn continue_values(&self) -> &TriGrid<f64> {
        &self.continue_values
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn horizon(&self) -> u32 {
        self.values.horizon()
    }
}

/// First t at which the sampling set stops being {0..t}, and first t at
/// which it is empty.
pub fn extract_limits(grid: &PolicyGrid) -> (u32, u32) {
    let horizon = grid.horizon();
    let mut t_lo = horizon;
    for t in 0..=horizon {
        let full = matches!(grid.regions[t as usize], Region::Sample { lo: 0, hi } if hi == t);
        if !full {
            t_lo = t;
            break;
        }
    }
    let t_up = grid
        .regions
        .iter()
        .position(|r| matches!(r, Region::Stop))
        .map(|t| t as u32)
        .unwrap_or(horizon);
    (t_lo, t_up)
}

/// Optimal stopping policy for one (prior, h, c, horizon).
#[derive(Debug, Clone)]
pub struct StoppingPolicy {
    tables: Arc<LatticeTables>,
    cost: CostPerSample,
    grid: PolicyGrid,
    t_lo: u32,
    t_up: u32,
}

/// Solve from scratch, building the per-cell tables first.
pub fn backward_solve(
    prior: &PriorSpec,
    h: HalfWidth,
    cost: CostPerSample,
    horizon: u32,
) -> Result<StoppingPolicy> {
    let tables = Arc::new(LatticeTables::build(prior, h, horizon)?);
    backward_solve_with_tables(tables, cost)
}

/// Solve against prebuilt tables. Cheap relative to the table build, so
/// sweeping many costs over one table set is the intended use.
pub fn backward_solve_with_tables(tables: Arc<LatticeTables>, cost: CostPerSample) -> Result<StoppingPolicy> {
    let n = tables.horizon;
    let c = cost.value();
    let mut values = TriGrid::build(n, |_, _| 0.0f64);
    let mut continue_values = TriGrid::build(n, |_, _| f64::INFINITY);
    let mut regions = vec![Region::Stop; n as usize + 1];

    for s in 0..=n {
        *values.get_mut(n, s) = tables.cells.get(n, s).comp_coverage;
    }
    for t in (0..n).rev() {
        let mut first_sample: Option<u32> = None;
        let mut last_sample: Option<u32> = None;
        for s in 0..=t {
            let g = *tables.g.get(t, s);
            let vtilde = g * values.get(t + 1, s + 1) + (1.0 - g) * values.get(t + 1, s);
            let go_on = c + vtilde;
            let comp = tables.cells.get(t, s).comp_coverage;
            *continue_values.get_mut(t, s) = go_on;
            if comp > go_on {
                *values.get_mut(t, s) = go_on;
                if first_sample.is_none() {
                    first_sample = Some(s);
                } else if last_sample != Some(s - 1) {
                    return Err(Error::NonIntervalRegion { t });
                }
                last_sample = Some(s);
            } else {
                *values.get_mut(t, s) = comp;
            }
        }
        regions[t as usize] = match (first_sample, last_sample) {
            (Some(lo), Some(hi)) => Region::Sample { lo, hi },
            _ => Region::Stop,
        };
    }

    let grid = PolicyGrid { values, continue_values, regions };
    let (t_lo, t_up) = extract_limits(&grid);
    Ok(StoppingPolicy { tables, cost, grid, t_lo, t_up })
}

/// Scalar summary of the optimal rule at one cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    /// Root value V_0: the optimal c E[T] + miss.
    pub value: f64,
    /// Expected observation count under the prior.
    pub expected_samples: f64,
    /// Bayes miss probability.
    pub miss: f64,
    /// First time index at which stopping is possible.
    pub t_lo: u32,
    /// First time index at which stopping is certain.
    pub t_up: u32,
}

/// Run the cell-wise optimal rule and report its summary without
/// materializing per-row regions. At large costs the rule can produce
/// two disconnected sampling lobes on a few rows, which the
/// interval-typed [`backward_solve`] refuses to represent; the summary
/// quantities stay well-defined regardless, so cost sweeps use this
/// sweep. Satisfies value = c * expected_samples + miss exactly.
pub fn solve_summary(tables: &LatticeTables, cost: CostPerSample) -> PolicySummary {
    let n = tables.horizon;
    let c = cost.value();
    // v, e, w hold next-row values at indices >= s while scanning s
    // upward, as in the evaluation recursions
    let mut v = vec![0.0f64; n as usize + 2];
    let mut e = vec![0.0f64; n as usize + 2];
    let mut w = vec![0.0f64; n as usize + 2];
    for s in 0..=n {
        let comp = tables.cells.get(n, s).comp_coverage;
        v[s as usize] = comp;
        w[s as usize] = comp;
    }
    let mut all_sampling = vec![false; n as usize + 1];
    let mut all_stopping = vec![false; n as usize + 1];
    all_stopping[n as usize] = true;
    for t in (0..n).rev() {
        let mut any_stop = false;
        let mut any_sample = false;
        for s in 0..=t {
            let s = s as usize;
            let g = *tables.g.get(t, s as u32);
            let go_on = c + g * v[s + 1] + (1.0 - g) * v[s];
            let comp = tables.cells.get(t, s as u32).comp_coverage;
            if comp > go_on {
                any_sample = true;
                v[s] = go_on;
                e[s] = 1.0 + g * e[s + 1] + (1.0 - g) * e[s];
                w[s] = g * w[s + 1] + (1.0 - g) * w[s];
            } else {
                any_stop = true;
                v[s] = comp;
                e[s] = 0.0;
                w[s] = comp;
            }
        }
        all_sampling[t as usize] = !any_stop;
        all_stopping[t as usize] = !any_sample;
    }
    let t_lo = all_sampling.iter().take_while(|&&full| full).count() as u32;
    let t_up = all_stopping.iter().position(|&empty| empty).expect("horizon row always stops") as u32;
    PolicySummary { value: v[0], expected_samples: e[0], miss: w[0], t_lo, t_up }
}

impl StoppingPolicy {
    pub fn prior(&self) -> &PriorSpec {
        self.tables.prior()
    }

    pub fn half_width(&self) -> HalfWidth {
        self.tables.half_width()
    }

    pub fn cost(&self) -> CostPerSample {
        self.cost
    }

    pub fn horizon(&self) -> u32 {
        self.tables.horizon()
    }

    pub fn tables(&self) -> &Arc<LatticeTables> {
        &self.tables
    }

    pub fn grid(&self) -> &PolicyGrid {
        &self.grid
    }

    pub fn cell(&self, t: u32, s: u32) -> Result<&MidpointCell> {
        self.tables.cells().try_get(t, s)
    }

    /// Length of the all-sampling prefix: stopping is impossible at t < t_lo.
    pub fn t_lo(&self) -> u32 {
        self.t_lo
    }

    /// First t whose sampling set is empty: stopping is certain by t_up.
    pub fn t_up(&self) -> u32 {
        self.t_up
    }

    /// Row classification in stopping-threshold form.
    pub fn thresholds(&self, t: u32) -> Result<Thresholds> {
        if t > self.horizon() {
            return Err(Error::OutOfLattice { t, s: 0, horizon: self.horizon() });
        }
        Ok(match self.grid.regions[t as usize] {
            Region::Stop => Thresholds::AllStopping,
            Region::Sample { lo: 0, hi } if hi == t => Thresholds::AllSampling,
            Region::Sample { lo, hi } => Thresholds::Window { r_lo: lo as i64 - 1, r_hi: hi as i64 + 1 },
        })
    }

    /// Action at (t, s): continue, or stop with the reported interval
    /// [mid - h, mid + h] cropped to [0, 1].
    pub fn decide(&self, t: u32, s: u32) -> Result<Decision> {
        let cell = self.cell(t, s)?;
        if self.grid.regions[t as usize].contains(s) {
            return Ok(Decision::Continue);
        }
        let h = self.half_width().value();
        Ok(Decision::Stop {
            estimate: cell.estimate,
            interval_lo: (cell.estimate - h).max(0.0),
            interval_hi: (cell.estimate + h).min(1.0),
        })
    }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn hw(h: f64) -> HalfWidth {
        HalfWidth::new(h).unwrap()
    }

    fn cost(c: f64) -> CostPerSample {
        CostPerSample::new(c).unwrap()
    }

    fn uniform() -> PriorSpec {
        PriorSpec::beta(1.0, 1.0).unwrap()
    }

    #[test]
    fn cost_validation() {
        assert!(CostPerSample::new(-0.1).is_err());
        assert!(CostPerSample::new(f64::NAN).is_err());
        assert!(CostPerSample::new(0.0).is_ok());
        assert!(CostPerSample::new(2.0).is_ok());
    }

    #[test]
    fn unit_cost_stops_immediately() {
        for prior in [uniform(), PriorSpec::beta(2.0, 5.0).unwrap()] {
            let policy = backward_solve(&prior, hw(0.05), cost(1.0), 5).unwrap();
            assert_eq!(policy.grid().regions()[0], Region::Stop);
            assert_eq!((policy.t_lo(), policy.t_up()), (0, 0));
        }
    }

    #[test]
    fn zero_cost_samples_to_horizon() {
        let n = 30;
        let policy = backward_solve(&uniform(), hw(0.05), cost(0.0), n).unwrap();
        for t in 0..n {
            assert_eq!(policy.grid().regions()[t as usize], Region::Sample { lo: 0, hi: t }, "row {t}");
        }
        assert_eq!(policy.grid().regions()[n as usize], Region::Stop);
        assert_eq!((policy.t_lo(), policy.t_up()), (n, n));
    }

    #[test]
    fn values_satisfy_cellwise_bellman_identity() {
        let policy = backward_solve(&uniform(), hw(0.1), cost(0.01), 40).unwrap();
        let grid = policy.grid();
        let c = policy.cost().value();
        for t in 0..=40u32 {
            for s in 0..=t {
                let v = *grid.values().get(t, s);
                let comp = policy.cell(t, s).unwrap().comp_coverage;
                if t < 40 {
                    let cv = *grid.continue_values().get(t, s);
                    assert!((v - comp.min(cv)).abs() < 1e-15);
                    assert!((cv - c) >= 0.0);
                } else {
                    assert_eq!(v, comp);
                    assert_eq!(*grid.continue_values().get(t, s), f64::INFINITY);
                }
                assert!(v <= comp + 1e-15);
                assert!((0.0..=1.0 + c * 40.0).contains(&v));
            }
        }
    }

    #[test]
    fn value_and_region_monotone_in_cost() {
        let tables = Arc::new(LatticeTables::build(&uniform(), hw(0.1), 80).unwrap());
        let costs = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2];
        let policies: Vec<_> = costs
            .iter()
            .map(|&c| backward_solve_with_tables(tables.clone(), cost(c)).unwrap())
            .collect();
        for w in policies.windows(2) {
            let (small, large) = (&w[0], &w[1]);
            for t in 0..=80u32 {
                for s in 0..=t {
                    assert!(
                        small.grid().values().get(t, s) <= large.grid().values().get(t, s),
                        "value monotonicity failed at t={t} s={s}"
                    );
                    // higher cost never samples where lower cost stopped
                    if large.grid().regions()[t as usize].contains(s) {
                        assert!(small.grid().regions()[t as usize].contains(s));
                    }
                }
            }
            assert!(small.t_up() >= large.t_up());
        }
    }

    #[test]
    fn value_bounded_by_remaining_cost_at_sufficient_horizon() {
        // horizon chosen so the terminal tail coverage is below c, which
        // makes V_t <= c (N + 1 - t) hold cell-wise
        let c = 0.01;
        let n = 70;
        let policy = backward_solve(&uniform(), hw(0.2), cost(c), n).unwrap();
        for t in 0..=n {
            for s in 0..=t {
                let v = *policy.grid().values().get(t, s);
                assert!(v <= c * (n + 1 - t) as f64 + 1e-15, "t={t} s={s} v={v}");
            }
        }
    }

    #[test]
    fn horizon_insensitivity_once_stopping_is_certain() {
        let h = hw(0.3);
        let c = cost(0.05);
        let a = backward_solve(&uniform(), h, c, 30).unwrap();
        let b = backward_solve(&uniform(), h, c, 50).unwrap();
        assert_eq!(a.t_lo(), b.t_lo());
        assert_eq!(a.t_up(), b.t_up());
        assert!(a.t_up() < 30);
        for t in 0..=a.t_up() {
            assert_eq!(a.grid().regions()[t as usize], b.grid().regions()[t as usize], "row {t}");
        }
        let va = *a.grid().values().get(0, 0);
        let vb = *b.grid().values().get(0, 0);
        assert!((va - vb).abs() < 1e-14);
    }

    #[test]
    fn symmetric_prior_gives_symmetric_regions() {
        for prior in [uniform(), PriorSpec::beta(2.0, 2.0).unwrap()] {
            let policy = backward_solve(&prior, hw(0.1), cost(0.002), 120).unwrap();
            let mut windows = 0;
            for t in 0..=120u32 {
                match policy.thresholds(t).unwrap() {
                    Thresholds::Window { r_lo, r_hi } => {
                        assert_eq!(r_lo + r_hi, t as i64, "thresholds asymmetric at t={t}");
                        windows += 1;
                    }
                    Thresholds::AllSampling => assert!(t < policy.t_up()),
                    Thresholds::AllStopping => assert!(t >= policy.t_lo()),
                }
            }
            assert!(windows > 0, "expected some partial rows");
        }
    }

    #[test]
    fn empirical_limits_match_published_case() {
        // a = 1, h = 0.05, c = 1e-4: the all-sampling prefix ends near 59
        // and stopping is certain near 561
        let policy = backward_solve(&uniform(), hw(0.05), cost(1e-4), 620).unwrap();
        assert!((58..=60).contains(&policy.t_lo()), "t_lo = {}", policy.t_lo());
        assert!((560..=562).contains(&policy.t_up()), "t_up = {}", policy.t_up());
    }

    #[test]
    fn decide_reports_cropped_intervals() {
        let policy = backward_solve(&uniform(), hw(0.05), cost(0.05), 12).unwrap();
        assert!(matches!(policy.decide(12, 6).unwrap(), Decision::Stop { .. }));
        assert!(matches!(policy.decide(13, 0), Err(Error::OutOfLattice { .. })));
        assert!(matches!(policy.decide(3, 4), Err(Error::OutOfLattice { .. })));
        for t in 0..=12u32 {
            for s in 0..=t {
                if let Decision::Stop { estimate, interval_lo, interval_hi } = policy.decide(t, s).unwrap() {
                    assert!(interval_lo >= 0.0 && interval_hi <= 1.0);
                    assert!((interval_hi - interval_lo) <= 0.1 + 1e-15);
                    assert!(estimate >= 0.05 - 1e-12 && estimate <= 0.95 + 1e-12);
                    assert!((estimate - interval_lo - 0.05).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn region_serde_wire_format() {
        let r = Region::Sample { lo: 2, hi: 7 };
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(json, r#"{"kind":"sample","lo":2,"hi":7}"#);
        assert_eq!(serde_json::from_str::<Region>(&json).unwrap(), r);
        let stop: Region = serde_json::from_str(r#"{"kind":"stop"}"#).unwrap();
        assert_eq!(stop, Region::Stop);
    }

    #[test]
    fn summary_matches_interval_solver_on_well_behaved_costs() {
        let prior = PriorSpec::symmetric_beta(1.0).unwrap();
        let h = HalfWidth::new(0.1).unwrap();
        let tables = Arc::new(LatticeTables::build(&prior, h, 80).unwrap());
        for c in [1.0, 1e-3, 1e-4] {
            let cost = CostPerSample::new(c).unwrap();
            let policy = backward_solve_with_tables(Arc::clone(&tables), cost).unwrap();
            let summary = solve_summary(&tables, cost);
            assert_eq!(summary.t_lo, policy.t_lo());
            assert_eq!(summary.t_up, policy.t_up());
            assert!((summary.value - policy.grid().values().get(0, 0)).abs() < 1e-15);
            let e = crate::performance::expected_samples_bayes(&policy, &prior).unwrap();
            let w = crate::performance::miss_prob_bayes(&policy, &prior).unwrap();
            assert!((summary.expected_samples - e).abs() < 1e-10, "E[T] {} vs {e}", summary.expected_samples);
            assert!((summary.miss - w).abs() < 1e-12);
        }
    }

    #[test]
    fn summary_handles_disconnected_sampling_lobes() {
        // this cost splits a few rows into two sampling lobes, so the
        // interval solver refuses while the summary stays exact
        let prior = PriorSpec::symmetric_beta(1.0).unwrap();
        let h = HalfWidth::new(0.05).unwrap();
        let tables = Arc::new(LatticeTables::build(&prior, h, 100).unwrap());
        let cost = CostPerSample::new(1e-2).unwrap();
        let refused = backward_solve_with_tables(Arc::clone(&tables), cost);
        assert!(matches!(refused, Err(Error::NonIntervalRegion { .. })));
        let summary = solve_summary(&tables, cost);
        assert!(
            (summary.value - (1e-2 * summary.expected_samples + summary.miss)).abs() < 1e-12,
            "cost identity broken: {summary:?}"
        );
        assert!(summary.t_lo as f64 <= summary.expected_samples);
        assert!(summary.expected_samples <= summary.t_up as f64);
        assert!(summary.t_lo > 0 && summary.t_up < 100);
    }

    #[test]
    fn tiny_instances_beat_exhaustive_enumeration() {
        // all interval-structured schemes on a 4-step lattice; the DP value
        // must match the cheapest of them exactly
        fn intervals(t: u32) -> Vec<Region> {
            let mut out = vec![Region::Stop];
            for lo in 0..=t {
                for hi in lo..=t {
                    out.push(Region::Sample { lo, hi });
                }
            }
            out
        }
        let n = 4u32;
        for (a, c) in [(1.0, 0.02), (1.0, 0.08), (2.0, 0.05)] {
            let prior = PriorSpec::symmetric_beta(a).unwrap();
            let h = hw(0.2);
            let policy = backward_solve(&prior, h, cost(c), n).unwrap();
            let tables = policy.tables();

            let mut best = f64::INFINITY;
            let choices: Vec<Vec<Region>> = (0..n).map(intervals).collect();
            let mut idx = vec![0usize; n as usize];
            loop {
                let regions: Vec<Region> = idx
                    .iter()
                    .enumerate()
                    .map(|(t, &i)| choices[t][i])
                    .chain([Region::Stop])
                    .collect();
                // forward pass: expected cost of this scheme
                let mut pmf = vec![1.0f64];
                let mut total = 0.0;
                for t in 0..=n {
                    let mut next = vec![0.0f64; t as usize + 2];
                    for s in 0..=t {
                        let mass = pmf[s as usize];
                        if mass == 0.0 {
                            continue;
                        }
                        if regions[t as usize].contains(s) {
                            total += c * mass;
                            let g = *tables.g().get(t, s);
                            next[s as usize + 1] += mass * g;
                            next[s as usize] += mass * (1.0 - g);
                        } else {
                            total += mass * tables.cells().get(t, s).comp_coverage;
                        }
                    }
                    pmf = next;
                }
                best = best.min(total);
                // odometer over scheme choices
                let mut k = 0;
                loop {
                    idx[k] += 1;
                    if idx[k] < choices[k].len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                    if k == n as usize {
                        break;
                    }
                }
                if k == n as usize {
                    break;
                }
            }
            let v0 = *policy.grid().values().get(0, 0);
            assert!(
                (v0 - best).abs() < 1e-12,
                "DP value {v0} vs exhaustive best {best} at a={a} c={c}"
            );
        }
    }
}
