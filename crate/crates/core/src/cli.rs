//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 a failed
//! reproduction check.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analytic::{metric_bounds, point_estimate};
use crate::cohort::make_cohort;
use crate::error::{Error, Result};
use crate::experiments::{
    oracle_for_rates, run_sweep, summarize_extremes, RefGrid, SweepRecord, SweepSpec,
    DEFAULT_N_TOTAL, DEFAULT_SEED, ORACLE_MAX_COHORT,
};
use crate::montecarlo::{run_trials, TrialConfig, DEFAULT_TRIALS};
use crate::report::{emit_forest, emit_heatmap, emit_table, TableFormat};
use crate::reproduce;
use crate::types::{Fraction, Metric, MetricBounds, OperatingPoint};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

/// Environment variable capping the worker count (0 or unset = automatic).
pub const THREADS_ENV: &str = "REFNOISE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "refnoise",
    version,
    about = "Bias of model sensitivity/specificity measured against a noisy reference labeler"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Point estimate, best case, worst case and error range for one configuration.
    Bounds(BoundsArgs),
    /// Run a parameter sweep and write tables (and optionally plots).
    Sweep(SweepArgs),
    /// Run the reproduction checks and print discrepancy notes.
    Reproduce(ReproduceArgs),
    /// Enumerate every agreement table of a small cohort.
    Oracle(ConfigArgs),
}

/// Rates accept fractions (0.95) or percents (95); values above 1 are percents.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// Cohort size.
    #[arg(long = "n", default_value_t = DEFAULT_N_TOTAL)]
    n: u64,
    #[arg(long, value_parser = parse_rate)]
    prevalence: f64,
    #[arg(long = "model-se", value_parser = parse_rate)]
    model_se: f64,
    #[arg(long = "model-sp", value_parser = parse_rate)]
    model_sp: f64,
    #[arg(long = "ref-se", value_parser = parse_rate)]
    ref_se: f64,
    #[arg(long = "ref-sp", value_parser = parse_rate)]
    ref_sp: f64,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Also run this many Monte Carlo trials.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Key/value config file; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Write heatmaps and forest plots.
    #[arg(long)]
    plots: bool,
    #[arg(long = "n")]
    n: Option<u64>,
    /// Repeat for several prevalences.
    #[arg(long, value_parser = parse_rate)]
    prevalence: Vec<f64>,
    /// Model operating point as "se,sp"; repeat for several models.
    #[arg(long)]
    model: Vec<String>,
    #[arg(long = "grid-lo", value_parser = parse_rate)]
    grid_lo: Option<f64>,
    #[arg(long = "grid-hi", value_parser = parse_rate)]
    grid_hi: Option<f64>,
    #[arg(long = "grid-step", value_parser = parse_rate)]
    grid_step: Option<f64>,
    /// Monte Carlo trials per cell; implies Monte Carlo.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Enable Monte Carlo with the configured or default trial count.
    #[arg(long)]
    mc: bool,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    /// Seed for the Monte Carlo and randomized checks.
    #[arg(long, default_value_t = reproduce::DEFAULT_SEED)]
    seed: u64,
}

/// Parses a rate; values above 1, or with a trailing `%`, are percentages.
pub fn parse_rate(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim();
    let (num, percent) = match t.strip_suffix('%') {
        Some(n) => (n.trim(), true),
        None => (t, false),
    };
    let v: f64 = num.parse().map_err(|e| format!("'{s}' is not a number: {e}"))?;
    let v = if percent || v > 1.0 { v / 100.0 } else { v };
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("'{s}' is not a rate in [0, 1] or [0, 100]%"))
    }
}

fn parse_point(s: &str) -> std::result::Result<OperatingPoint, String> {
    let (se, sp) = s
        .split_once([',', '/'])
        .ok_or_else(|| format!("'{s}' is not an operating point, expected se,sp"))?;
    OperatingPoint::new(parse_rate(se)?, parse_rate(sp)?).map_err(|e| e.to_string())
}

/// Parses a flat key/value sweep config. Repeated `prevalence` and `model`
/// keys form lists; blank lines and `#` comments are ignored.
pub fn parse_sweep_config(text: &str) -> Result<SweepSpec> {
    let mut spec = SweepSpec {
        n_total: DEFAULT_N_TOTAL,
        prevalences: Vec::new(),
        model_points: Vec::new(),
        reference_grid: RefGrid::standard(),
        n_trials: DEFAULT_TRIALS,
        seed: DEFAULT_SEED,
        include_mc: false,
    };
    let (mut lo, mut hi, mut step) = (0.90, 1.00, 0.01);
    let mut grid_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let cfg_err = |message: String| Error::Config { line, message };
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| cfg_err(format!("expected key = value, got '{content}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let rate = |v: &str| parse_rate(v).map_err(|e| cfg_err(format!("{key}: {e}")));
        let int = |v: &str| {
            v.parse::<u64>()
                .map_err(|e| cfg_err(format!("{key}: '{v}' is not a whole number: {e}")))
        };
        match key {
            "n" | "n_total" => spec.n_total = int(value)?,
            "prevalence" => spec
                .prevalences
                .push(Fraction::named("prevalence", rate(value)?)?),
            "model" => spec
                .model_points
                .push(parse_point(value).map_err(|e| cfg_err(format!("model: {e}")))?),
            "ref_lo" => (lo, grid_line) = (rate(value)?, line),
            "ref_hi" => (hi, grid_line) = (rate(value)?, line),
            "ref_step" => (step, grid_line) = (rate(value)?, line),
            "trials" => {
                spec.n_trials = int(value)?;
                spec.include_mc = true;
            }
            "seed" => spec.seed = int(value)?,
            "mc" => {
                spec.include_mc = match value {
                    "true" | "yes" | "on" | "1" => true,
                    "false" | "no" | "off" | "0" => false,
                    other => return Err(cfg_err(format!("mc: '{other}' is not a boolean"))),
                }
            }
            other => return Err(cfg_err(format!("unknown key '{other}'"))),
        }
    }
    spec.reference_grid = RefGrid::new(lo, hi, step).map_err(|e| Error::Config {
        line: grid_line,
        message: format!("reference grid: {e}"),
    })?;
    Ok(spec)
}

fn sweep_spec(args: &SweepArgs) -> Result<SweepSpec> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::Invalid(format!("cannot read config {}: {e}", path.display()))
            })?;
            parse_sweep_config(&text)?
        }
        None => parse_sweep_config("")?,
    };
    if let Some(n) = args.n {
        spec.n_total = n;
    }
    if !args.prevalence.is_empty() {
        spec.prevalences = args
            .prevalence
            .iter()
            .map(|&p| Fraction::named("prevalence", p))
            .collect::<Result<_>>()?;
    }
    if !args.model.is_empty() {
        spec.model_points = args
            .model
            .iter()
            .map(|m| parse_point(m).map_err(Error::Invalid))
            .collect::<Result<_>>()?;
    }
    if args.grid_lo.is_some() || args.grid_hi.is_some() || args.grid_step.is_some() {
        let g = spec.reference_grid;
        spec.reference_grid = RefGrid::new(
            args.grid_lo.unwrap_or(g.lo().value()),
            args.grid_hi.unwrap_or(g.hi().value()),
            args.grid_step.unwrap_or(g.step().value()),
        )?;
    }
    if let Some(t) = args.trials {
        spec.n_trials = t;
        spec.include_mc = true;
    }
    if args.mc {
        spec.include_mc = true;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    spec.validate()?;
    Ok(spec)
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn na(v: Option<Fraction>) -> String {
    v.map_or_else(|| "NA".to_string(), |f| format!("{:.4}", f.value()))
}

fn fmt_bounds(b: Option<&MetricBounds>) -> (String, String, String) {
    match b {
        Some(b) => (
            format!("{:.4}", b.best().value()),
            format!("{:.4}", b.worst().value()),
            format!("{:.4}", b.range().value()),
        ),
        None => ("NA".into(), "NA".into(), "NA".into()),
    }
}

fn cmd_bounds(args: &BoundsArgs, out: &mut dyn Write) -> Result<()> {
    let c = &args.config;
    let cohort = make_cohort(c.n, Fraction::named("prevalence", c.prevalence)?)?;
    let model = OperatingPoint::new(c.model_se, c.model_sp)?;
    let reference = OperatingPoint::new(c.ref_se, c.ref_sp)?;
    let point = point_estimate(&cohort, &model, &reference);
    let bounds = metric_bounds(&cohort, &model, &reference);
    writeln!(
        out,
        "cohort {} (n = {}), model {model}, reference {reference}",
        cohort,
        cohort.n_total()
    )?;
    writeln!(out, "{:<12} {:>8} {:>8} {:>8} {:>8}", "metric", "point", "best", "worst", "range")?;
    for (metric, b) in [
        (Metric::Sensitivity, bounds.sensitivity),
        (Metric::Specificity, bounds.specificity),
    ] {
        let (best, worst, range) = fmt_bounds(b.as_ref());
        writeln!(
            out,
            "{:<12} {:>8} {:>8} {:>8} {:>8}",
            metric.name(),
            na(point.get(metric)),
            best,
            worst,
            range
        )?;
    }
    if let Some(trials) = args.trials {
        let s = run_trials(&TrialConfig::new(cohort, model, reference, trials, args.seed)?);
        writeln!(out, "monte carlo: {trials} trials, seed {}", args.seed)?;
        for metric in Metric::BOTH {
            match s.get(metric) {
                Some(m) => writeln!(
                    out,
                    "{:<12} min {:.4} max {:.4} mean {:.4} sd {:.4} q2.5 {:.4} q97.5 {:.4} ({} defined)",
                    metric.name(),
                    m.min,
                    m.max,
                    m.mean,
                    m.std_dev,
                    m.q025,
                    m.q975,
                    s.defined(metric)
                )?,
                None => writeln!(out, "{:<12} NA", metric.name())?,
            }
        }
    }
    Ok(())
}

fn tag(x: f64) -> String {
    let p = x * 100.0;
    if (p - p.round()).abs() < 1e-9 {
        format!("{:.0}", p.round())
    } else {
        format!("{p:.2}").replace('.', "_")
    }
}

fn group_stem(r: &SweepRecord) -> String {
    format!(
        "p{}_model{}-{}",
        tag(r.prevalence.value()),
        tag(r.model.sensitivity.value()),
        tag(r.model.specificity.value())
    )
}

fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    let spec = sweep_spec(args)?;
    fs::create_dir_all(&args.out).map_err(|e| {
        Error::Invalid(format!("cannot create output directory {}: {e}", args.out.display()))
    })?;
    let records = run_sweep(&spec)?;
    let format = match args.format {
        FormatArg::Csv => TableFormat::Csv,
        FormatArg::Jsonl => TableFormat::JsonLines,
    };
    let table_path = args.out.join(format!("records.{}", format.extension()));
    write_atomic(&table_path, &emit_table(&records, format)?)?;

    let mut files = 1;
    if args.plots {
        let mut start = 0;
        while start < records.len() {
            let first = &records[start];
            let end = records[start..]
                .iter()
                .position(|r| r.prevalence != first.prevalence || r.model != first.model)
                .map_or(records.len(), |k| start + k);
            let group = &records[start..end];
            let stem = group_stem(first);
            for metric in Metric::BOTH {
                let svg = emit_heatmap(group, metric)?;
                write_atomic(&args.out.join(format!("heatmap_{stem}_{}.svg", metric.name())), svg.as_bytes())?;
                files += 1;
            }
            write_atomic(&args.out.join(format!("forest_{stem}.svg")), emit_forest(group)?.as_bytes())?;
            files += 1;
            start = end;
        }
    }

    write!(out, "{} records, {files} files in {}", records.len(), args.out.display())?;
    for g in summarize_extremes(&records)? {
        write!(out, "; p={} model {}:", tag(g.prevalence.value()), g.model)?;
        for metric in Metric::BOTH {
            if let Some(m) = g.get(metric) {
                write!(
                    out,
                    " max {} range {:.4} at ref {}",
                    metric.name(),
                    m.max_range,
                    m.argmax
                )?;
            }
        }
    }
    writeln!(out)?;
    Ok(())
}

fn cmd_oracle(args: &ConfigArgs, out: &mut dyn Write) -> Result<()> {
    if args.n > ORACLE_MAX_COHORT {
        return Err(Error::CohortTooLarge {
            n: args.n,
            limit: ORACLE_MAX_COHORT,
        });
    }
    let cohort = make_cohort(args.n, Fraction::named("prevalence", args.prevalence)?)?;
    let model = OperatingPoint::new(args.model_se, args.model_sp)?;
    let reference = OperatingPoint::new(args.ref_se, args.ref_sp)?;
    let o = oracle_for_rates(&cohort, &model, &reference)?;
    let bounds = metric_bounds(&cohort, &model, &reference);
    writeln!(out, "cohort {cohort}, model {model}, reference {reference}: {} tables", o.tables)?;
    for (metric, b) in [
        (Metric::Sensitivity, bounds.sensitivity),
        (Metric::Specificity, bounds.specificity),
    ] {
        match (o.get(metric), b) {
            (Some((lo, hi)), Some(b)) => writeln!(
                out,
                "{:<12} enumerated min {:.6} max {:.6} | closed form worst {:.6} best {:.6} | worst {} best {}",
                metric.name(),
                lo,
                hi,
                b.worst().value(),
                b.best().value(),
                if lo == b.worst().value() { "match" } else { "MISMATCH" },
                if hi == b.best().value() { "match" } else { "MISMATCH" },
            )?,
            (None, None) => writeln!(out, "{:<12} NA (no reference cases in the denominator)", metric.name())?,
            _ => writeln!(out, "{:<12} MISMATCH in definedness", metric.name())?,
        }
    }
    Ok(())
}

fn cmd_reproduce(args: &ReproduceArgs, out: &mut dyn Write) -> Result<bool> {
    let checks = reproduce::run_checks(args.seed);
    for c in &checks {
        writeln!(out, "{c}")?;
    }
    writeln!(out, "notes (informational, not checked):")?;
    for n in reproduce::discrepancy_notes() {
        writeln!(out, "  - {n}")?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    writeln!(out, "{} of {} checks passed", checks.len() - failed, checks.len())?;
    Ok(failed == 0)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    let result = match &cli.command {
        Command::Bounds(a) => cmd_bounds(a, out).map(|_| EXIT_OK),
        Command::Sweep(a) => cmd_sweep(a, out).map(|_| EXIT_OK),
        Command::Oracle(a) => cmd_oracle(a, out).map(|_| EXIT_OK),
        Command::Reproduce(a) => {
            cmd_reproduce(a, out).map(|ok| if ok { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

/// Worker cap from the environment, if set to a positive number.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}
