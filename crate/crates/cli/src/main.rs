//! `seqci`: design, calibrate, persist, and run sequential fixed-width
//! interval procedures for a Bernoulli proportion.
//!
//! Command dispatch is single-threaded; heavy numeric work parallelizes
//! inside the library. Bulk numeric output is CSV (or JSON with
//! `--format json`), policies and calibration reports are JSON. All
//! output is locale-independent with LF line endings.

use std::fs;
use std::io::{self, BufRead};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::SystemTime;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use seqci::{
    backward_solve, backward_solve_with_tables, calibrate_c_with_tables, calibrate_scalar,
    conditional_scheme, default_theta_grid, expected_samples_bayes, expected_samples_given_theta,
    frey_scheme, fss_smallest_n, miss_prob_bayes, miss_prob_given_theta, simulate, solve_summary,
    worst_case_miss, CalibrationMode, CostPerSample, Error as CoreError, FreyConfig, HalfWidth,
    LatticeScheme, LatticeTables, PriorSpec, Region, SchemeOnLattice, TriGrid,
};
use seqci_cli::{parse_cost_grid, parse_theta_grid, resolve_out_path, PolicyFile, SessionState};

/// Deepest lattice the tool will size on its own; beyond this the user
/// must own the cost by passing --horizon.
const MAX_DEFAULT_HORIZON: u64 = 20_000;

/// Cost floor used to size default calibration lattices: deep enough
/// for any target the floor cost can undershoot.
const CALIBRATION_FLOOR_BAYES: f64 = 1e-6;
const CALIBRATION_FLOOR_WORST: f64 = 1e-4;

#[derive(Parser)]
#[command(
    name = "seqci",
    version,
    about = "Sequential fixed-width confidence intervals for a Bernoulli proportion",
    long_about = "Solve cost-optimal sequential stopping policies for fixed-width interval \
                  estimation of a Bernoulli proportion, calibrate them to a target miss level, \
                  evaluate and simulate saved policies, compare against fixed-sample-size, \
                  conditional, and Frey (2010) rules, and run observations interactively."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the optimal stopping policy for a per-sample cost; writes a
    /// policy JSON file and prints the region table as CSV
    Solve(SolveArgs),
    /// Tune the per-sample cost to a target miss level (Bayes or
    /// worst-case) and print the result as JSON
    Calibrate(CalibrateArgs),
    /// Evaluate a saved policy over a theta grid: expected sample size
    /// and coverage per theta
    Evaluate(EvaluateArgs),
    /// Compare the optimal rule against fixed-sample-size, conditional,
    /// and Frey (2010) rules at matched operating points
    Compare(CompareArgs),
    /// Monte Carlo replication of a saved policy at fixed theta,
    /// seed-deterministic
    Simulate(SimulateArgs),
    /// Closed-form horizon and coverage bounds; with --c-grid, an exact
    /// summary series over a cost grid
    Bounds(BoundsArgs),
    /// Read 0/1 observations from stdin and print a stop/continue
    /// verdict after each one
    Step(StepArgs),
}

#[derive(Args)]
struct PriorArgs {
    /// Symmetric Beta(a, a) prior shape (default 1: uniform)
    #[arg(long = "prior-a", conflicts_with_all = ["prior_p", "prior_q"])]
    prior_a: Option<f64>,
    /// Beta(p, q) prior, first shape (use with --prior-q)
    #[arg(long = "prior-p", requires = "prior_q")]
    prior_p: Option<f64>,
    /// Beta(p, q) prior, second shape (use with --prior-p)
    #[arg(long = "prior-q", requires = "prior_p")]
    prior_q: Option<f64>,
}

impl PriorArgs {
    fn to_prior(&self) -> Result<PriorSpec> {
        let prior = match (self.prior_a, self.prior_p, self.prior_q) {
            (Some(a), None, None) => PriorSpec::symmetric_beta(a),
            (None, Some(p), Some(q)) => PriorSpec::beta(p, q),
            (None, None, None) => PriorSpec::symmetric_beta(1.0),
            _ => unreachable!("clap enforces the prior flag combinations"),
        };
        prior.context("invalid prior")
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Copy, Clone, ValueEnum)]
enum Mode {
    /// Average miss probability under the analysis prior
    Bayes,
    /// Maximum miss probability over a fine theta grid
    WorstCase,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    prior: PriorArgs,
    /// Interval half-width (the reported interval has width 2h)
    #[arg(long)]
    h: f64,
    /// Per-sample cost in miss-probability units
    #[arg(long)]
    c: f64,
    /// Lattice depth; defaults to the closed-form horizon bound for
    /// (c, prior, h) when that is at most 20000
    #[arg(long)]
    horizon: Option<u32>,
    /// Policy JSON path (bare file names land in $SEQCI_OUT_DIR if set)
    #[arg(long, default_value = "policy.json")]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    prior: PriorArgs,
    /// Interval half-width
    #[arg(long)]
    h: f64,
    /// Target miss probability
    #[arg(long)]
    alpha: f64,
    /// What the target constrains
    #[arg(long, value_enum, default_value = "bayes")]
    mode: Mode,
    /// Lattice depth; defaults to a closed-form bound when at most 20000
    #[arg(long)]
    horizon: Option<u32>,
    /// Also write the JSON report here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Policy JSON produced by `seqci solve`
    #[arg(long)]
    policy: PathBuf,
    /// `lo:hi:n` for n equally spaced points, or a comma list; default
    /// 0:1:1001
    #[arg(long = "theta-grid")]
    theta_grid: Option<String>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
    /// Write here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    prior: PriorArgs,
    /// Interval half-width
    #[arg(long)]
    h: f64,
    /// Comma list of target miss levels; one row per scheme per level
    #[arg(long, conflicts_with = "c")]
    alpha: Option<String>,
    /// Comma list or lo:hi:n geometric grid of per-sample costs; rows
    /// for the optimal rule only
    #[arg(long)]
    c: Option<String>,
    /// Lattice depth; defaults to a closed-form bound when at most 20000
    #[arg(long)]
    horizon: Option<u32>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Policy JSON produced by `seqci solve`
    #[arg(long)]
    policy: PathBuf,
    /// Theta values to simulate at: comma list or lo:hi:n
    #[arg(long = "theta-grid", default_value = "0.5")]
    theta_grid: String,
    /// Replications per theta
    #[arg(long, default_value_t = 10_000)]
    reps: u32,
    /// RNG seed; identical seeds reproduce identical output
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    prior: PriorArgs,
    /// Interval half-width
    #[arg(long)]
    h: f64,
    /// Per-sample cost for the single-point bounds table
    #[arg(long, conflicts_with = "c_grid")]
    c: Option<f64>,
    /// Cost grid (comma list or lo:hi:n geometric) for an exact
    /// t_lo / E[T] / t_up series
    #[arg(long = "c-grid")]
    c_grid: Option<String>,
    /// Lattice depth for the series; defaults to a closed-form bound
    #[arg(long)]
    horizon: Option<u32>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StepArgs {
    /// Policy JSON produced by `seqci solve`
    #[arg(long)]
    policy: PathBuf,
    /// Persist the session here after every observation and resume from
    /// it when it exists
    #[arg(long)]
    state: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Solve(args) => cmd_solve(args)?,
        Command::Calibrate(args) => cmd_calibrate(args)?,
        Command::Evaluate(args) => cmd_evaluate(args)?,
        Command::Compare(args) => cmd_compare(args)?,
        Command::Simulate(args) => cmd_simulate(args)?,
        Command::Bounds(args) => cmd_bounds(args)?,
        Command::Step(args) => return cmd_step(args),
    }
    Ok(ExitCode::SUCCESS)
}

/// Pick a lattice depth: the user's explicit choice, or the closed-form
/// horizon bound at `floor_c` when that is affordable.
fn default_horizon(prior: &PriorSpec, h: HalfWidth, floor_c: f64, explicit: Option<u32>) -> Result<u32> {
    if let Some(n) = explicit {
        return Ok(n);
    }
    let Some(params) = prior.beta_params() else {
        bail!("no closed-form horizon bound for this prior; pass --horizon explicitly");
    };
    // the bound shrinks as the shape grows, so the smaller shape is the
    // conservative choice for asymmetric priors
    let a = params.p().min(params.q());
    let n = seqci::log_horizon(floor_c, a, h).context("sizing the lattice")?;
    if n > MAX_DEFAULT_HORIZON {
        bail!(
            "the horizon bound for these inputs is {n} rows; that is a heavy solve, \
             so pass --horizon explicitly to confirm the depth"
        );
    }
    Ok(n as u32)
}

fn timestamp_now() -> String {
    humantime::format_rfc3339_seconds(SystemTime::now()).to_string()
}

/// Write `text` to `--out` (resolved against $SEQCI_OUT_DIR) or stdout.
fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let path = resolve_out_path(path);
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

/// Render rows as CSV (header + one line per row) or a pretty JSON array.
fn render_rows<T: Serialize>(
    rows: &[T],
    header: &str,
    line: impl Fn(&T) -> String,
    format: OutputFormat,
) -> Result<String> {
    Ok(match format {
        OutputFormat::Csv => {
            let mut text = String::from(header);
            text.push('\n');
            for row in rows {
                text.push_str(&line(row));
                text.push('\n');
            }
            text
        }
        OutputFormat::Json => {
            let mut text = serde_json::to_string_pretty(rows)?;
            text.push('\n');
            text
        }
    })
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let prior = args.prior.to_prior()?;
    let h = HalfWidth::new(args.h).context("invalid half-width")?;
    let cost = CostPerSample::new(args.c).context("invalid cost")?;
    let horizon = default_horizon(&prior, h, args.c, args.horizon)?;

    let policy = backward_solve(&prior, h, cost, horizon).context("solving the policy")?;
    let file = PolicyFile::from_policy(&policy, &prior, h, args.c, horizon, timestamp_now());

    let out = resolve_out_path(&args.out);
    file.save(&out)?;
    eprintln!(
        "wrote {} (t_lo={}, t_up={}, solved at horizon {horizon})",
        out.display(),
        file.t_lo,
        file.t_up
    );

    let mut csv = String::from("t,r_lo,r_hi,marker\n");
    for (t, region) in file.regions.iter().enumerate() {
        match region {
            Region::Sample { lo, hi } => csv.push_str(&format!("{t},{lo},{hi},sample\n")),
            Region::Stop => csv.push_str(&format!("{t},,,stop\n")),
        }
    }
    print!("{csv}");
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<()> {
    let prior = args.prior.to_prior()?;
    let h = HalfWidth::new(args.h).context("invalid half-width")?;
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        bail!("--alpha must lie strictly between 0 and 1, got {}", args.alpha);
    }

    let report = match args.mode {
        Mode::Bayes => {
            let horizon = default_horizon(&prior, h, CALIBRATION_FLOOR_BAYES, args.horizon)?;
            let tables = Arc::new(LatticeTables::build(&prior, h, horizon).context("building the lattice")?);
            let result = calibrate_c_with_tables(tables, args.alpha).context("calibrating")?;
            serde_json::json!({
                "mode": "bayes",
                "alpha": args.alpha,
                "h": args.h,
                "prior": prior,
                "horizon": horizon,
                "c_star": result.c_star,
                "randomization_p": result.randomization_p,
                "achieved_miss": result.achieved_miss,
                "expected_samples": result.expected_samples,
                "t_lo": result.policy_lo.t_lo(),
                "t_up": result.policy_lo.t_up(),
            })
        }
        Mode::WorstCase => {
            let horizon = default_horizon(&prior, h, CALIBRATION_FLOOR_WORST, args.horizon)?;
            let tables = Arc::new(LatticeTables::build(&prior, h, horizon).context("building the lattice")?);
            let estimates = TriGrid::build(horizon, |t, s| tables.cells().get(t, s).estimate);
            let comp = TriGrid::build(horizon, |t, s| tables.cells().get(t, s).comp_coverage);
            let family = |c: f64| -> seqci::Result<SchemeOnLattice> {
                // costs whose optimal sampling rows split into two lobes
                // cannot be represented; probe points are arbitrary, so
                // nudge off them and keep bisecting
                const NUDGE: [f64; 7] = [1.0, 1.03, 1.0 / 1.03, 1.09, 1.0 / 1.09, 1.27, 1.0 / 1.27];
                let mut refused = None;
                for factor in NUDGE {
                    match backward_solve_with_tables(Arc::clone(&tables), CostPerSample::new(c * factor)?) {
                        Ok(policy) => {
                            return SchemeOnLattice::new(
                                policy.grid().regions().to_vec(),
                                estimates.clone(),
                                comp.clone(),
                            )
                        }
                        Err(err @ CoreError::NonIntervalRegion { .. }) => refused = Some(err),
                        Err(err) => return Err(err),
                    }
                }
                Err(refused.expect("loop ran"))
            };
            let result =
                calibrate_scalar(family, &prior, h, args.alpha, CalibrationMode::WorstCase, 1e-9, 1.0)
                    .context("calibrating")?;
            let scheme = family(result.parameter).context("rebuilding the calibrated policy")?;
            let (peak_theta, peak_miss) = worst_case_miss(&scheme, h, &default_theta_grid())?;
            serde_json::json!({
                "mode": "worst-case",
                "alpha": args.alpha,
                "h": args.h,
                "prior": prior,
                "horizon": horizon,
                "c_star": result.parameter,
                "achieved_miss": peak_miss,
                "peak_theta": peak_theta,
                "expected_samples_bayes": expected_samples_bayes(&scheme, &prior)?,
            })
        }
    };

    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    print!("{text}");
    if let Some(out) = &args.out {
        emit(&text, Some(out))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalRow {
    theta: f64,
    expected_n: f64,
    coverage: f64,
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let file = PolicyFile::load(&args.policy)?;
    let scheme = file.to_scheme()?;
    let h = file.half_width()?;
    let grid = match &args.theta_grid {
        Some(spec) => parse_theta_grid(spec)?,
        None => default_theta_grid(),
    };

    let rows = grid
        .iter()
        .map(|&theta| {
            Ok(EvalRow {
                theta,
                expected_n: expected_samples_given_theta(&scheme, theta)?,
                coverage: 1.0 - miss_prob_given_theta(&scheme, theta, h)?,
            })
        })
        .collect::<seqci::Result<Vec<_>>>()?;

    let text = render_rows(
        &rows,
        "theta,expected_n,coverage",
        |r| format!("{},{},{}", r.theta, r.expected_n, r.coverage),
        args.format,
    )?;
    emit(&text, args.out.as_deref())
}

#[derive(Serialize)]
struct CompareRow {
    scheme: &'static str,
    operating_point: f64,
    coverage: f64,
    expected_n: f64,
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let prior = args.prior.to_prior()?;
    let h = HalfWidth::new(args.h).context("invalid half-width")?;
    let mut rows = Vec::new();

    match (&args.alpha, &args.c) {
        (Some(alpha_spec), None) => {
            let alphas = parse_theta_grid(alpha_spec).context("parsing --alpha")?;
            if alphas.iter().any(|&a| a <= 0.0 || a >= 1.0) {
                bail!("miss levels must lie strictly between 0 and 1");
            }
            let horizon = default_horizon(&prior, h, CALIBRATION_FLOOR_BAYES, args.horizon)?;
            let tables = Arc::new(LatticeTables::build(&prior, h, horizon).context("building the lattice")?);
            for &alpha in &alphas {
                let optimal = calibrate_c_with_tables(Arc::clone(&tables), alpha)
                    .with_context(|| format!("calibrating the optimal rule at {alpha}"))?;
                rows.push(CompareRow {
                    scheme: "optimal",
                    operating_point: alpha,
                    coverage: 1.0 - optimal.achieved_miss,
                    expected_n: optimal.expected_samples,
                });

                let (n, fss_miss) = fss_smallest_n(&prior, h, alpha)
                    .with_context(|| format!("sizing the fixed-sample rule at {alpha}"))?;
                rows.push(CompareRow {
                    scheme: "fss",
                    operating_point: alpha,
                    coverage: 1.0 - fss_miss,
                    expected_n: n as f64,
                });

                let tuned = calibrate_scalar(
                    |beta| conditional_scheme(&prior, h, beta),
                    &prior,
                    h,
                    alpha,
                    CalibrationMode::Bayes,
                    alpha / 2.0,
                    0.5,
                )
                .with_context(|| format!("tuning the conditional rule at {alpha}"))?;
                let cond = conditional_scheme(&prior, h, tuned.parameter)?;
                rows.push(CompareRow {
                    scheme: "conditional",
                    operating_point: alpha,
                    coverage: 1.0 - miss_prob_bayes(&cond, &prior)?,
                    expected_n: expected_samples_bayes(&cond, &prior)?,
                });

                match FreyConfig::from_table(args.h, 1.0 - alpha) {
                    Ok(config) => {
                        let frey = frey_scheme(&config, &prior)?;
                        rows.push(CompareRow {
                            scheme: "frey",
                            operating_point: alpha,
                            coverage: 1.0 - miss_prob_bayes(&frey, &prior)?,
                            expected_n: expected_samples_bayes(&frey, &prior)?,
                        });
                    }
                    Err(_) => eprintln!(
                        "note: Frey (2010) published no tuning for h={}, confidence {}; skipping that row",
                        args.h,
                        1.0 - alpha
                    ),
                }
            }
        }
        (None, Some(c_spec)) => {
            let costs = parse_cost_grid(c_spec).context("parsing --c")?;
            let floor = costs.iter().cloned().fold(f64::INFINITY, f64::min);
            let horizon = default_horizon(&prior, h, floor, args.horizon)?;
            let tables = LatticeTables::build(&prior, h, horizon).context("building the lattice")?;
            for &c in &costs {
                let summary = solve_summary(&tables, CostPerSample::new(c)?);
                rows.push(CompareRow {
                    scheme: "optimal",
                    operating_point: c,
                    coverage: 1.0 - summary.miss,
                    expected_n: summary.expected_samples,
                });
            }
        }
        _ => bail!("pass exactly one of --alpha or --c"),
    }

    let text = render_rows(
        &rows,
        "scheme,operating_point,coverage,expected_n",
        |r| format!("{},{},{},{}", r.scheme, r.operating_point, r.coverage, r.expected_n),
        args.format,
    )?;
    emit(&text, args.out.as_deref())
}

#[derive(Serialize)]
struct SimRow {
    theta: f64,
    replications: u32,
    seed: u64,
    mean_t: f64,
    se_t: f64,
    miss_rate: f64,
    se_miss: f64,
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let file = PolicyFile::load(&args.policy)?;
    let scheme = file.to_scheme()?;
    let h = file.half_width()?;
    if args.reps == 0 {
        bail!("--reps must be positive");
    }
    let grid = parse_theta_grid(&args.theta_grid)?;

    let rows = grid
        .iter()
        .map(|&theta| {
            let summary = simulate(&scheme, theta, h, args.reps, args.seed)?;
            Ok(SimRow {
                theta,
                replications: args.reps,
                seed: args.seed,
                mean_t: summary.mean_t,
                se_t: summary.se_t,
                miss_rate: summary.miss_rate,
                se_miss: summary.se_miss,
            })
        })
        .collect::<seqci::Result<Vec<_>>>()?;

    let text = render_rows(
        &rows,
        "theta,replications,seed,mean_t,se_t,miss_rate,se_miss",
        |r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.theta, r.replications, r.seed, r.mean_t, r.se_t, r.miss_rate, r.se_miss
            )
        },
        args.format,
    )?;
    emit(&text, args.out.as_deref())
}

#[derive(Serialize)]
struct BoundRow {
    quantity: &'static str,
    value: f64,
}

#[derive(Serialize)]
struct SeriesRow {
    c: f64,
    t_lo: u32,
    expected_samples: f64,
    t_up: u32,
    value: f64,
    miss: f64,
}

fn cmd_bounds(args: BoundsArgs) -> Result<()> {
    let prior = args.prior.to_prior()?;
    let h = HalfWidth::new(args.h).context("invalid half-width")?;

    match (args.c, &args.c_grid) {
        (Some(c), None) => {
            let Some(params) = prior.beta_params() else {
                bail!("closed-form bounds need a Beta prior");
            };
            if (params.p() - params.q()).abs() > 1e-12 {
                bail!("closed-form bounds need a symmetric prior; got Beta({}, {})", params.p(), params.q());
            }
            let a = params.p();
            CostPerSample::new(c).context("invalid cost")?;
            let crude = seqci::crude_horizon_bound(c, a, h)?;
            let log_n = seqci::log_horizon(c, a, h)?;
            let lower = seqci::log_lower_limit(c, a, h, log_n)?;
            let mut rows = vec![
                BoundRow { quantity: "crude_horizon_bound", value: crude as f64 },
                BoundRow { quantity: "log_horizon", value: log_n as f64 },
                BoundRow { quantity: "log_lower_limit", value: lower as f64 },
            ];
            if let Ok(t) = u32::try_from(log_n) {
                rows.push(BoundRow {
                    quantity: "chernoff_upper_at_log_horizon",
                    value: seqci::chernoff_upper(t, a, h)?,
                });
                if t >= 1 {
                    rows.push(BoundRow {
                        quantity: "incbeta_lower_at_log_horizon",
                        value: seqci::incbeta_lower(t, a, h)?,
                    });
                }
            }
            let text = render_rows(
                &rows,
                "quantity,value",
                |r| format!("{},{}", r.quantity, r.value),
                args.format,
            )?;
            emit(&text, args.out.as_deref())
        }
        (None, Some(spec)) => {
            let costs = parse_cost_grid(spec).context("parsing --c-grid")?;
            let floor = costs.iter().cloned().fold(f64::INFINITY, f64::min);
            let horizon = default_horizon(&prior, h, floor, args.horizon)?;
            let tables = LatticeTables::build(&prior, h, horizon).context("building the lattice")?;
            let rows: Vec<SeriesRow> = costs
                .iter()
                .map(|&c| {
                    let s = solve_summary(&tables, CostPerSample::new(c)?);
                    Ok(SeriesRow {
                        c,
                        t_lo: s.t_lo,
                        expected_samples: s.expected_samples,
                        t_up: s.t_up,
                        value: s.value,
                        miss: s.miss,
                    })
                })
                .collect::<Result<_>>()?;
            let text = render_rows(
                &rows,
                "c,t_lo,expected_samples,t_up,value,miss",
                |r| format!("{},{},{},{},{},{}", r.c, r.t_lo, r.expected_samples, r.t_up, r.value, r.miss),
                args.format,
            )?;
            emit(&text, args.out.as_deref())
        }
        _ => bail!("pass exactly one of --c or --c-grid"),
    }
}

fn cmd_step(args: StepArgs) -> Result<ExitCode> {
    let file = PolicyFile::load(&args.policy)?;
    let scheme = file.to_scheme()?;
    let h = file.half_width()?.value();

    let state_path = args.state.as_deref().map(resolve_out_path);
    let mut state = match &state_path {
        Some(path) if path.exists() => SessionState::load(path, &file)?,
        _ => SessionState::fresh(file.provenance.input_hash.clone()),
    };

    let verdict = |t: u32, s: u32| -> (bool, String) {
        let stopped = t >= scheme.horizon() || !scheme.region(t).contains(s);
        let estimate = scheme.estimate(t, s);
        let (lo, hi) = ((estimate - h).max(0.0), (estimate + h).min(1.0));
        let word = if stopped { "STOP" } else { "CONTINUE" };
        (stopped, format!("{word} t={t} s={s} estimate={estimate:.6} interval=[{lo:.6},{hi:.6}]"))
    };

    let (mut stopped, line) = verdict(state.t, state.s);
    println!("{line}");

    for input in io::stdin().lock().lines() {
        let input = input.context("reading stdin")?;
        let token = input.trim();
        if token.is_empty() {
            continue;
        }
        if stopped {
            eprintln!("error: the procedure has stopped; it accepts no further observations");
            return Ok(ExitCode::from(2));
        }
        let bit = match token {
            "0" => 0u8,
            "1" => 1u8,
            _ => {
                eprintln!("error: expected 0 or 1, got {token:?}");
                continue;
            }
        };
        state.record(bit);
        if let Some(path) = &state_path {
            state.save(path)?;
        }
        let (now_stopped, line) = verdict(state.t, state.s);
        println!("{line}");
        stopped = now_stopped;
    }
    Ok(ExitCode::SUCCESS)
}
