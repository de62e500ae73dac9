//! Command implementations behind the `mfthermo` binary.
//!
//! Exit codes: 0 when every check passes, 1 for usage or configuration
//! errors, 2 for numeric or verification failures.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use mfthermo::estimation::{simulate_estimation, EstimationConfig};
use mfthermo::grid::{log_space, validate};
use mfthermo::io::{fmt_f64, parse_model, write_csv_preamble, write_csv_row};
use mfthermo::oscillator::OscillatorFamily;
use mfthermo::thermo::FDR_TOL;
use mfthermo::verify::{partition_sweep, theorem1_sweep};
use mfthermo::{Error, MeanForce, OscillatorModel, StateFamily, ThermoScalars};

#[derive(Debug, Parser)]
#[command(name = "mfthermo", version, about = "Strong-coupling thermometry toolkit")]
pub struct Cli {
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads, 0 = one per core. Never changes the output.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Randomized QFI bound and variance-partition sweeps.
    Verify(VerifyArgs),
    /// Mean-force thermodynamics of a model file over a temperature grid.
    MeanForce(MeanForceArgs),
    /// Figure sweeps of the damped oscillator.
    OscillatorSweep(OscillatorSweepArgs),
    /// Monte-Carlo temperature estimation against the Cramér-Rao bound.
    Estimate(EstimateArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Inclusive dimension range, `lo..hi`.
    #[arg(long, default_value = "2..8")]
    pub dims: String,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 0.1)]
    pub tmin: f64,
    #[arg(long, default_value_t = 10.0)]
    pub tmax: f64,
    #[arg(long, default_value_t = 32)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct MeanForceArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Explicit temperatures; overrides the log grid.
    #[arg(long, value_delimiter = ',')]
    pub temps: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct OscillatorSweepArgs {
    #[arg(long, default_value_t = 1.0)]
    pub mass: f64,
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1.0")]
    pub gamma_list: Vec<f64>,
    #[arg(long, default_value_t = 50.0)]
    pub cutoff: f64,
    #[arg(long, default_value_t = 0.05)]
    pub tmin: f64,
    #[arg(long, default_value_t = 10.0)]
    pub tmax: f64,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub figure: u8,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Composite model file; the estimated parameter is its temperature.
    #[arg(long, conflicts_with = "oscillator")]
    pub model: Option<PathBuf>,
    /// Use the damped oscillator instead of a model file.
    #[arg(long)]
    pub oscillator: bool,
    #[arg(long, default_value_t = 1.0)]
    pub mass: f64,
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    #[arg(long, default_value_t = 50.0)]
    pub cutoff: f64,
    #[arg(long)]
    pub t_true: f64,
    #[arg(long, default_value_t = 10_000)]
    pub n_samples: usize,
    #[arg(long, default_value_t = 200)]
    pub n_trials: usize,
    /// MLE search interval `lo,hi` (default `[T/10, 10T]`).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub bracket: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Pass = 0,
    Usage = 1,
    Failure = 2,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Usage(_) => ExitStatus::Usage,
            CliError::Failure(_) => ExitStatus::Failure,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Failure(m) => write!(f, "failure: {m}"),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Model-shape problems are configuration errors, everything else numeric.
fn classify(err: Error) -> CliError {
    match err {
        Error::Model(_) | Error::Json(_) => CliError::Usage(err.to_string()),
        other => CliError::Failure(other.to_string()),
    }
}

/// What a command produced: the payload, stderr diagnostics and the verdict.
#[derive(Debug)]
pub struct Outcome {
    pub body: String,
    pub warnings: Vec<String>,
    pub status: ExitStatus,
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| usage(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Verify(a) => cmd_verify(a, cli.seed),
        Command::MeanForce(a) => cmd_mean_force(a, cli.seed),
        Command::OscillatorSweep(a) => cmd_oscillator_sweep(a, cli.seed),
        Command::Estimate(a) => cmd_estimate(a, cli.seed),
    })
}

pub fn parse_dims(text: &str) -> Result<(usize, usize), CliError> {
    let bad = || usage(format!("--dims expects lo..hi within 2..8, got {text:?}"));
    let (lo, hi) = text.split_once("..").ok_or_else(bad)?;
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().parse().map_err(|_| bad())?;
    if lo < 2 || hi > 8 || lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

pub fn cmd_verify(args: &VerifyArgs, seed: u64) -> Result<Outcome, CliError> {
    if args.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let dims = parse_dims(&args.dims)?;
    let bound = theorem1_sweep(args.trials, dims, seed).map_err(classify)?;
    let partition = partition_sweep(args.trials, dims, seed).map_err(classify)?;
    let violations = bound.violations + partition.violations;
    let report = json!({
        "trials": args.trials,
        "dims": [dims.0, dims.1],
        "seed": seed,
        "violations": violations,
        "theorem1": bound,
        "partition": partition,
    });
    let mut warnings = Vec::new();
    for s in [&bound, &partition] {
        if s.violations > 0 {
            warnings.push(format!(
                "{}: {} violations, worst trial {} (dim {}, seed {})",
                s.name, s.violations, s.worst_trial, s.worst_dim, s.seed
            ));
        }
    }
    Ok(Outcome {
        body: serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        warnings,
        status: if violations == 0 { ExitStatus::Pass } else { ExitStatus::Failure },
    })
}

fn temperature_grid(grid: &GridArgs, temps: Option<&Vec<f64>>) -> Result<Vec<f64>, CliError> {
    let ts = match temps {
        Some(ts) => ts.clone(),
        None => log_space(grid.tmin, grid.tmax, grid.points).map_err(|e| usage(e.to_string()))?,
    };
    validate(&ts).map_err(|e| usage(e.to_string()))?;
    Ok(ts)
}

pub fn cmd_mean_force(args: &MeanForceArgs, seed: u64) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(&args.model)
        .map_err(|e| usage(format!("cannot read {}: {e}", args.model.display())))?;
    let model = parse_model(&text).map_err(|e| usage(format!("{}: {e}", args.model.display())))?;
    let grid = temperature_grid(&args.grid, args.temps.as_ref())?;
    let params = json!({
        "command": "mean-force",
        "model": args.model.display().to_string(),
        "dimS": model.dim_s,
        "dimR": model.dim_r,
        "temperatures": grid.iter().map(|t| fmt_f64(*t)).collect::<Vec<_>>(),
        "seed": seed,
    });
    let engine = MeanForce::new(model).map_err(classify)?;

    let mut out = Vec::new();
    write_csv_preamble(&mut out, &params, &ThermoScalars::CSV_COLUMNS).expect("write to memory");
    let mut warnings = Vec::new();
    for point in engine.temperature_sweep(&grid) {
        let row = match point.result {
            Ok(report) => {
                let failed = report.scalars.verify(FDR_TOL);
                if !failed.is_empty() {
                    warnings.push(format!("row {} (T = {}): {}", point.index, point.temperature, failed.join("; ")));
                }
                report.scalars.csv_values().to_vec()
            }
            Err(e) => {
                warnings.push(format!("row {} (T = {}) failed: {e}", point.index, point.temperature));
                let mut row = vec![f64::NAN; ThermoScalars::CSV_COLUMNS.len()];
                row[0] = point.temperature;
                row
            }
        };
        write_csv_row(&mut out, &row).expect("write to memory");
    }
    Ok(Outcome {
        body: String::from_utf8(out).expect("ascii"),
        status: if warnings.is_empty() { ExitStatus::Pass } else { ExitStatus::Failure },
        warnings,
    })
}

pub const FIG1_COLUMNS: [&str; 3] = ["T", "gamma", "sqrtQ_over_omega"];
pub const FIG2_COLUMNS: [&str; 5] = ["T", "gamma", "snr_opt", "snr_bound", "gap_rel"];
/// Relative tolerance for `snr_bound ≥ T²F(T)` in figure 2 rows.
pub const BOUND_TOL: f64 = 1e-8;
/// Largest fraction of skipped rows before the sweep fails.
pub const MAX_SKIPPED: f64 = 0.1;

pub fn cmd_oscillator_sweep(args: &OscillatorSweepArgs, seed: u64) -> Result<Outcome, CliError> {
    if args.gamma_list.is_empty() {
        return Err(usage("--gamma-list is empty"));
    }
    let models = args
        .gamma_list
        .iter()
        .map(|&g| OscillatorModel::new(args.mass, args.omega, g, args.cutoff))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| usage(e.to_string()))?;
    let grid = log_space(args.tmin, args.tmax, args.points).map_err(|e| usage(e.to_string()))?;
    validate(&grid).map_err(|e| usage(e.to_string()))?;

    let mut warnings: Vec<String> = models.iter().flat_map(|m| m.warnings()).collect();
    warnings.dedup();
    let params = json!({
        "command": "oscillator-sweep",
        "figure": args.figure,
        "mass": args.mass,
        "omega": args.omega,
        "gamma_list": args.gamma_list,
        "cutoff": args.cutoff,
        "tmin": args.tmin,
        "tmax": args.tmax,
        "points": args.points,
        "seed": seed,
    });
    let columns: &[&str] = if args.figure == 1 { &FIG1_COLUMNS } else { &FIG2_COLUMNS };

    let jobs: Vec<(usize, f64)> = (0..models.len())
        .flat_map(|m| grid.iter().map(move |&t| (m, t)))
        .collect();
    let reports: Vec<_> = jobs.par_iter().map(|&(m, t)| models[m].report(t)).collect();

    let mut out = Vec::new();
    write_csv_preamble(&mut out, &params, columns).expect("write to memory");
    let mut skipped = 0usize;
    let mut violations = 0usize;
    for (&(m, t), report) in jobs.iter().zip(reports) {
        let model = &models[m];
        let report = match report {
            Ok(r) => r,
            Err(e) => {
                skipped += 1;
                warnings.push(format!("skipped T = {t}, gamma = {}: {e}", model.gamma));
                continue;
            }
        };
        let row = if args.figure == 1 {
            let r = report.fig1_row(model);
            vec![r.t, r.gamma, r.sqrt_q_over_omega]
        } else {
            let r = report.fig2_row(model);
            if r.gap_rel.is_nan() || r.gap_rel < -BOUND_TOL {
                violations += 1;
                warnings.push(format!("bound violated at T = {t}, gamma = {}: gap_rel {:e}", model.gamma, r.gap_rel));
            }
            vec![r.t, r.gamma, r.snr_opt, r.snr_bound, r.gap_rel]
        };
        write_csv_row(&mut out, &row).expect("write to memory");
    }
    let too_many = skipped as f64 > MAX_SKIPPED * jobs.len() as f64;
    if too_many {
        warnings.push(format!("{skipped} of {} rows skipped", jobs.len()));
    }
    Ok(Outcome {
        body: String::from_utf8(out).expect("ascii"),
        warnings,
        status: if too_many || violations > 0 { ExitStatus::Failure } else { ExitStatus::Pass },
    })
}

/// Below this many samples per trial the statistical band is not enforced.
pub const BAND_MIN_SAMPLES: usize = 10_000;
pub const RATIO_BAND: (f64, f64) = (0.85, 1.25);

pub fn cmd_estimate(args: &EstimateArgs, seed: u64) -> Result<Outcome, CliError> {
    if args.t_true.is_nan() || args.t_true <= 0.0 || !args.t_true.is_finite() {
        return Err(usage(format!("--t-true must be positive, got {}", args.t_true)));
    }
    if args.n_samples == 0 || args.n_trials == 0 {
        return Err(usage("--n-samples and --n-trials must be at least 1"));
    }
    let config = EstimationConfig {
        bracket: match &args.bracket {
            Some(b) if b.len() == 2 && 0.0 < b[0] && b[0] < args.t_true && args.t_true < b[1] => Some((b[0], b[1])),
            Some(b) => return Err(usage(format!("--bracket must be lo,hi with 0 < lo < t-true < hi, got {b:?}"))),
            None => None,
        },
        ..EstimationConfig::default()
    };
    let (family, source): (Box<dyn StateFamily>, serde_json::Value) = match (&args.model, args.oscillator) {
        (Some(path), false) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            let model = parse_model(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let engine = MeanForce::new(model).map_err(classify)?;
            (Box::new(engine), json!({"model": path.display().to_string()}))
        }
        (None, true) => {
            let model = OscillatorModel::new(args.mass, args.omega, args.gamma, args.cutoff)
                .map_err(|e| usage(e.to_string()))?;
            let fam = OscillatorFamily::around(model, args.t_true).map_err(classify)?;
            (Box::new(fam), json!({"oscillator": model}))
        }
        _ => return Err(usage("exactly one of --model or --oscillator is required")),
    };

    let stats = simulate_estimation(family.as_ref(), args.t_true, args.n_samples, args.n_trials, seed, &config)
        .map_err(classify)?;
    let ratio = stats.crb_ratio();
    let crb = 1.0 / (args.n_samples as f64 * stats.qfi_at_true);
    let band_checked = args.n_samples >= BAND_MIN_SAMPLES && args.n_trials > 1;
    let in_band = ratio >= RATIO_BAND.0 && ratio <= RATIO_BAND.1;

    let mut warnings = Vec::new();
    let status = if args.n_trials == 1 {
        warnings.push("a single trial has no sample variance; no verdict is possible".into());
        ExitStatus::Failure
    } else if band_checked && !in_band {
        warnings.push(format!("ratio {ratio} outside [{}, {}]", RATIO_BAND.0, RATIO_BAND.1));
        ExitStatus::Failure
    } else {
        ExitStatus::Pass
    };
    let report = json!({
        "family": source,
        "t_true": args.t_true,
        "n_samples": args.n_samples,
        "n_trials": args.n_trials,
        "seed": seed,
        "mean_estimate": stats.mean_estimate,
        "empirical_var": if stats.variance.is_finite() { json!(stats.variance) } else { json!(null) },
        "crb": crb,
        "ratio": if ratio.is_finite() { json!(ratio) } else { json!(null) },
        "qfi": stats.qfi_at_true,
        "classical_fisher": stats.classical_fisher,
        "band": [RATIO_BAND.0, RATIO_BAND.1],
        "band_checked": band_checked,
    });
    Ok(Outcome {
        body: serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        warnings,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_parse() {
        assert_eq!(parse_dims("2..8").unwrap(), (2, 8));
        assert_eq!(parse_dims(" 3 .. 3").unwrap(), (3, 3));
        for bad in ["1..4", "2..9", "5..3", "4", "a..b"] {
            assert!(matches!(parse_dims(bad), Err(CliError::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn errors_are_classified() {
        assert_eq!(classify(Error::Model("x".into())).status(), ExitStatus::Usage);
        assert_eq!(classify(Error::ZeroInformation("x".into())).status(), ExitStatus::Failure);
    }

    #[test]
    fn thread_count_does_not_change_verify_output() {
        let run_with = |threads| {
            let cli = Cli::try_parse_from(["mfthermo", "--threads", threads, "verify", "--trials", "30"]).unwrap();
            run(&cli).unwrap().body
        };
        assert_eq!(run_with("1"), run_with("3"));
    }
}
