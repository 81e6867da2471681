//! Artifact types and parsing helpers behind the `seqci` binary: the
//! on-disk policy format, the stepper's session state, and the small
//! grid-specification grammars shared by several subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use seqci::{HalfWidth, LatticeScheme, PriorSpec, Region, SchemeOnLattice, StoppingPolicy, TriGrid};

/// Bumped whenever the on-disk policy layout changes incompatibly.
pub const SCHEMA_VERSION: u32 = 1;

/// Where a policy file came from: enough to audit and to guard resumed
/// stepper sessions against a swapped policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    /// RFC 3339 UTC; the only field allowed to differ between two runs
    /// on identical inputs.
    pub timestamp: String,
    /// SHA-256 over the canonical input description.
    pub input_hash: String,
    /// The horizon the solver actually ran at; the stored grids are
    /// truncated to the first all-stop row, which may be much shallower.
    pub solve_horizon: u32,
}

/// A solved stopping policy, persisted as human-diffable JSON.
///
/// Grids are truncated at `t_up` (the first row where every state
/// stops): rows beyond it are unreachable, so the stored horizon equals
/// `t_up` while `provenance.solve_horizon` records the solver's depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub schema_version: u32,
    pub prior: PriorSpec,
    pub h: f64,
    pub c: f64,
    pub horizon: u32,
    pub regions: Vec<Region>,
    /// Row t holds the t + 1 interval mid-points for s = 0..=t.
    pub estimates: Vec<Vec<f64>>,
    /// Row t holds the posterior probability that the interval at
    /// (t, s) misses, for s = 0..=t.
    pub comp_coverage: Vec<Vec<f64>>,
    pub t_lo: u32,
    pub t_up: u32,
    pub provenance: Provenance,
}

/// SHA-256 hex digest of the canonical description of a solve input.
pub fn input_hash(prior: &PriorSpec, h: f64, c: f64, horizon: u32) -> String {
    let prior_json = serde_json::to_string(prior).expect("prior serializes");
    let canonical = format!("prior={prior_json};h={h};c={c};horizon={horizon}");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn rows_of<F: Fn(u32, u32) -> f64>(t_up: u32, f: F) -> Vec<Vec<f64>> {
    (0..=t_up).map(|t| (0..=t).map(|s| f(t, s)).collect()).collect()
}

/// Length of the leading run of rows whose sampling region is all of
/// {0, ..., t}.
fn full_prefix_len(regions: &[Region]) -> u32 {
    regions
        .iter()
        .enumerate()
        .take_while(|(t, r)| **r == Region::Sample { lo: 0, hi: *t as u32 })
        .count() as u32
}

impl PolicyFile {
    /// Package a solved policy for persistence, truncating at its upper
    /// stopping limit.
    pub fn from_policy(
        policy: &StoppingPolicy,
        prior: &PriorSpec,
        h: HalfWidth,
        c: f64,
        solve_horizon: u32,
        timestamp: String,
    ) -> Self {
        let t_up = policy.t_up();
        let mut regions = policy.grid().regions()[..=t_up as usize].to_vec();
        // the row at t_up is all-stop by definition of the upper limit
        regions[t_up as usize] = Region::Stop;
        PolicyFile {
            schema_version: SCHEMA_VERSION,
            prior: prior.clone(),
            h: h.value(),
            c,
            horizon: t_up,
            regions,
            estimates: rows_of(t_up, |t, s| policy.estimate(t, s)),
            comp_coverage: rows_of(t_up, |t, s| policy.comp_coverage(t, s)),
            t_lo: policy.t_lo(),
            t_up,
            provenance: Provenance {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                timestamp,
                input_hash: input_hash(prior, h.value(), c, solve_horizon),
                solve_horizon,
            },
        }
    }

    /// Reconstruct the evaluable scheme from the stored grids.
    pub fn to_scheme(&self) -> Result<SchemeOnLattice> {
        let estimates = TriGrid::from_rows(self.estimates.clone()).context("estimate rows")?;
        let comp = TriGrid::from_rows(self.comp_coverage.clone()).context("coverage rows")?;
        SchemeOnLattice::new(self.regions.clone(), estimates, comp).context("stored policy is inconsistent")
    }

    /// The half-width, revalidated.
    pub fn half_width(&self) -> Result<HalfWidth> {
        HalfWidth::new(self.h).context("stored half-width is invalid")
    }

    fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!(
                "policy file has schema version {}, this tool reads version {SCHEMA_VERSION}",
                self.schema_version
            );
        }
        self.half_width()?;
        if self.c <= 0.0 || !self.c.is_finite() {
            bail!("stored cost {} must be positive and finite", self.c);
        }
        if self.t_up != self.horizon {
            bail!("stored horizon {} must equal the upper limit {}", self.horizon, self.t_up);
        }
        let scheme = self.to_scheme()?;
        if scheme.horizon() != self.horizon {
            bail!("grids disagree with the stored horizon");
        }
        let prefix = full_prefix_len(&self.regions);
        if prefix != self.t_lo {
            bail!("stored lower limit {} disagrees with the regions (prefix {prefix})", self.t_lo);
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_string_pretty(self).context("serializing policy")?;
        json.push('\n');
        fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: PolicyFile =
            serde_json::from_str(&raw).with_context(|| format!("parsing {}", path.display()))?;
        file.validate()?;
        Ok(file)
    }
}

/// Persisted position of an interactive stepping session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    /// Must match the policy file's `provenance.input_hash`; a resumed
    /// session refuses to run against a different policy.
    pub policy_hash: String,
    pub t: u32,
    pub s: u32,
    pub transcript: Vec<u8>,
}

impl SessionState {
    pub fn fresh(policy_hash: String) -> Self {
        SessionState { policy_hash, t: 0, s: 0, transcript: Vec::new() }
    }

    pub fn record(&mut self, bit: u8) {
        debug_assert!(bit <= 1);
        self.transcript.push(bit);
        self.t += 1;
        self.s += u32::from(bit);
    }

    fn validate(&self, policy: &PolicyFile) -> Result<()> {
        if self.policy_hash != policy.provenance.input_hash {
            bail!("session state belongs to a different policy (input hash mismatch)");
        }
        if self.transcript.iter().any(|&b| b > 1) {
            bail!("session transcript contains a non-bit entry");
        }
        if self.t as usize != self.transcript.len() {
            bail!("session time {} disagrees with transcript length {}", self.t, self.transcript.len());
        }
        let sum: u32 = self.transcript.iter().map(|&b| u32::from(b)).sum();
        if self.s != sum {
            bail!("session success count {} disagrees with transcript sum {sum}", self.s);
        }
        if self.t > policy.horizon {
            bail!("session time {} exceeds the policy horizon {}", self.t, policy.horizon);
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_string_pretty(self).context("serializing session state")?;
        json.push('\n');
        fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path, policy: &PolicyFile) -> Result<Self> {
        let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let state: SessionState =
            serde_json::from_str(&raw).with_context(|| format!("parsing {}", path.display()))?;
        state.validate(policy)?;
        Ok(state)
    }
}

/// Parse a theta-grid specification: either `lo:hi:n` for n equally
/// spaced points (inclusive), or a comma-separated list. All values must
/// lie in [0, 1].
pub fn parse_theta_grid(spec: &str) -> Result<Vec<f64>> {
    let grid = if spec.contains(':') {
        let (lo, hi, n) = parse_range(spec)?;
        if lo < 0.0 || hi > 1.0 {
            bail!("theta grid [{lo}, {hi}] escapes [0, 1]");
        }
        linspace(lo, hi, n)
    } else {
        let values = parse_list(spec)?;
        if values.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            bail!("theta values must lie in [0, 1]");
        }
        values
    };
    if grid.is_empty() {
        bail!("theta grid is empty");
    }
    Ok(grid)
}

/// Parse a cost-grid specification: either `lo:hi:n` for n
/// geometrically spaced points (inclusive; costs span decades), or a
/// comma-separated list. All values must be positive.
pub fn parse_cost_grid(spec: &str) -> Result<Vec<f64>> {
    let grid = if spec.contains(':') {
        let (lo, hi, n) = parse_range(spec)?;
        if lo <= 0.0 {
            bail!("cost grid must be positive, got lower end {lo}");
        }
        geomspace(lo, hi, n)
    } else {
        parse_list(spec)?
    };
    if grid.is_empty() {
        bail!("cost grid is empty");
    }
    if grid.iter().any(|&c| c <= 0.0 || !c.is_finite()) {
        bail!("costs must be positive and finite");
    }
    Ok(grid)
}

fn parse_range(spec: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        bail!("range specification must be lo:hi:n, got {spec:?}");
    }
    let lo: f64 = parts[0].trim().parse().with_context(|| format!("range lower end {:?}", parts[0]))?;
    let hi: f64 = parts[1].trim().parse().with_context(|| format!("range upper end {:?}", parts[1]))?;
    let n: usize = parts[2].trim().parse().with_context(|| format!("range point count {:?}", parts[2]))?;
    if !lo.is_finite() || !hi.is_finite() || lo > hi {
        bail!("range [{lo}, {hi}] is not ordered and finite");
    }
    if n == 0 {
        bail!("range needs at least one point");
    }
    if n == 1 && lo != hi {
        bail!("a one-point range needs lo == hi");
    }
    Ok((lo, hi, n))
}

fn parse_list(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(str::trim)
        .filter(|part| !part.is_empty())
        .map(|part| part.parse::<f64>().with_context(|| format!("value {part:?}")))
        .collect()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    (0..n).map(|i| (ln_lo + (ln_hi - ln_lo) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Resolve an output path: relative paths land in `$SEQCI_OUT_DIR` when
/// that variable is set, otherwise in the working directory.
pub fn resolve_out_path(path: &Path) -> PathBuf {
    if path.is_absolute() || path.components().count() > 1 {
        return path.to_path_buf();
    }
    match std::env::var_os("SEQCI_OUT_DIR") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}
