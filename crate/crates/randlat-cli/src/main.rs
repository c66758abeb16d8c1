//! `randlat` — sample random lattices, count points, verify the moment
//! identities and hole-probability bounds from the library.
//!
//! Every subcommand reads an optional JSON config (`--config`), applies
//! command-line overrides on top (flags win), and is deterministic in the
//! seed. Exit codes: 0 when all checks pass, 1 when a check fails or is
//! cut off by its time budget, 2 for usage or configuration errors.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use randlat_cli::config::{self, SampleConfig, SpectraConfig, SweepConfig, VerifyConfig};
use randlat_cli::experiments::{
    render_check_csv, render_sweep_csv, run_count, run_spectra, run_sweep, run_verify,
    sample_dump, sweep_reference, CheckRow,
};
use randlat_cli::svg;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "randlat",
    version,
    about = "Random unimodular and affine lattices: sampling, exact point counts, \
             and statistical verification of mean/variance identities, hole-probability \
             bounds, and the flat-torus spectrum bound."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the verification suite and report one pass/fail row per check.
    Verify(VerifyArgs),
    /// Estimate hole probabilities across a grid of region volumes.
    Sweep(SweepArgs),
    /// Check the spectrum-gap bound for a radial set of frequencies.
    Spectra(SpectraArgs),
    /// Draw lattices and print them as JSON lines.
    Sample(SampleArgs),
    /// Count lattice points of a given basis inside a region.
    Count(CountArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// JSON config file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated phase names to run (default: all).
    #[arg(long, value_delimiter = ',')]
    phases: Option<Vec<String>>,
    #[arg(long)]
    d2_trials: Option<u64>,
    #[arg(long)]
    d3_trials: Option<u64>,
    #[arg(long)]
    variance_trials: Option<u64>,
    #[arg(long)]
    ks_trials: Option<u64>,
    #[arg(long)]
    oracle_instances: Option<u64>,
    #[arg(long)]
    bootstrap_b: Option<usize>,
    /// Sampler for the d = 2 checks (exact2, siegel, hecke).
    #[arg(long)]
    d2_sampler: Option<String>,
    /// Sampler for the d = 3 checks (siegel, hecke).
    #[arg(long)]
    d3_sampler: Option<String>,
    #[arg(long)]
    hecke_prime: Option<u64>,
    /// Per-check time budget in seconds; overrunning marks the check
    /// skipped (a failure).
    #[arg(long)]
    budget_secs: Option<u64>,
    /// Write the full results CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    d: Option<usize>,
    /// affine | regular
    #[arg(long)]
    setting: Option<String>,
    /// exact2 | siegel | hecke
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    hecke_prime: Option<u64>,
    /// ball | thinbox | annulus
    #[arg(long)]
    family: Option<String>,
    /// Comma-separated ascending volume grid.
    #[arg(long, value_delimiter = ',')]
    volumes: Option<Vec<f64>>,
    /// Aspect ratio (thinbox) or inner/outer radius ratio (annulus).
    #[arg(long)]
    shape_param: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write an SVG plot of normalized hole probability vs volume.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct SpectraArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    hecke_prime: Option<u64>,
    /// Radial set as JSON intervals, e.g. '[[0.1,3.0]]'.
    #[arg(long)]
    radial: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    hecke_prime: Option<u64>,
    /// Draw affine lattices (include a translation offset).
    #[arg(long)]
    affine: bool,
    /// Number of samples to draw.
    #[arg(long)]
    count: Option<u64>,
    /// Write the JSON lines here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CountArgs {
    /// File holding the basis, one basis vector per row (JSON array of
    /// arrays, or whitespace-separated numbers one vector per line).
    #[arg(long)]
    basis: PathBuf,
    /// Affine offset as a JSON array, e.g. '[0.5,0.5]'.
    #[arg(long)]
    offset: Option<String>,
    /// Region as JSON, e.g. '{"type":"ball","center":[0,0],"radius":1.5}'.
    #[arg(long)]
    region: String,
    /// Include the matched points in the output.
    #[arg(long)]
    list_points: bool,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<u8> {
    match Cli::parse().cmd {
        Cmd::Verify(args) => cmd_verify(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::Spectra(args) => cmd_spectra(args),
        Cmd::Sample(args) => cmd_sample(args),
        Cmd::Count(args) => cmd_count(args),
    }
}

/// Print one line to stdout. Returns false when the consumer hung up
/// (e.g. `randlat sample | head`): a closed pipe is a normal end of the
/// conversation, so callers just stop printing — file outputs and exit
/// codes are unaffected.
fn emit(line: &str) -> Result<bool> {
    use std::io::Write;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match writeln!(out, "{}", line) {
        Ok(()) => Ok(true),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(false),
        Err(e) => Err(e).context("writing to stdout"),
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<u8> {
    let mut cfg: VerifyConfig = config::load(args.config.as_deref())?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.phases {
        cfg.phases = Some(v);
    }
    if let Some(v) = args.d2_trials {
        cfg.d2_trials = v;
    }
    if let Some(v) = args.d3_trials {
        cfg.d3_trials = v;
    }
    if let Some(v) = args.variance_trials {
        cfg.variance_trials = v;
    }
    if let Some(v) = args.ks_trials {
        cfg.ks_trials = v;
    }
    if let Some(v) = args.oracle_instances {
        cfg.oracle_instances = v;
    }
    if let Some(v) = args.bootstrap_b {
        cfg.bootstrap_b = v;
    }
    if let Some(v) = args.d2_sampler {
        cfg.d2_sampler = v;
    }
    if let Some(v) = args.d3_sampler {
        cfg.d3_sampler = v;
    }
    if let Some(v) = args.hecke_prime {
        cfg.hecke_prime = v;
    }
    if let Some(v) = args.budget_secs {
        cfg.check_budget_secs = v;
    }
    cfg.validate()?;

    let outcome = run_verify(&cfg)?;
    for row in &outcome.rows {
        if !emit(&describe_row(row))? {
            break;
        }
    }
    let failed = outcome.rows.iter().filter(|r| !r.satisfied).count();
    emit(&format!(
        "{} checks, {} satisfied, {} failed",
        outcome.rows.len(),
        outcome.rows.len() - failed,
        failed
    ))?;
    if let Some(path) = args.out {
        fs::write(&path, render_check_csv(&outcome.rows)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(outcome.exit_code() as u8)
}

fn describe_row(row: &CheckRow) -> String {
    let mark = if row.satisfied { "PASS" } else { "FAIL" };
    if row.estimate.is_nan() {
        return format!("[{}] {}: skipped (time budget exceeded)", mark, row.experiment_id);
    }
    format!(
        "[{}] {}: {} = {:.6} (se {:.2e}), target {:.6}",
        mark, row.experiment_id, row.statistic, row.estimate, row.std_error,
        row.theory_value_or_bound
    )
}

fn cmd_sweep(args: SweepArgs) -> Result<u8> {
    let mut cfg: SweepConfig = config::load(args.config.as_deref())?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.d {
        cfg.d = v;
    }
    if let Some(v) = args.setting {
        cfg.setting = v;
    }
    if let Some(v) = args.sampler {
        cfg.sampler = v;
    }
    if let Some(v) = args.hecke_prime {
        cfg.hecke_prime = v;
    }
    if let Some(v) = args.family {
        cfg.family = v;
    }
    if let Some(v) = args.volumes {
        cfg.volumes = v;
    }
    if let Some(v) = args.shape_param {
        cfg.shape_param = v;
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    cfg.validate()?;

    let rows = run_sweep(&cfg)?;
    for row in &rows {
        let line = format!(
            "{} d={} {} V={:<8} p_hat={:.6} se={:.2e} normalized={:.4}",
            row.family, row.d, row.setting, row.volume, row.p_hat, row.se, row.normalized
        );
        if !emit(&line)? {
            break;
        }
    }
    if let Some(path) = args.out {
        fs::write(&path, render_sweep_csv(&rows)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = args.plot {
        let points: Vec<(f64, f64)> =
            rows.iter().map(|r| (r.volume, r.normalized)).collect();
        let reference = sweep_reference(&cfg);
        let title = format!(
            "{} holes, {} family, d = {}",
            cfg.setting, cfg.family, cfg.d
        );
        let image = svg::line_plot(
            &points,
            Some(reference),
            "region volume",
            "normalized hole probability",
            &title,
        );
        fs::write(&path, image).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(0)
}

fn cmd_spectra(args: SpectraArgs) -> Result<u8> {
    let mut cfg: SpectraConfig = config::load(args.config.as_deref())?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.d {
        cfg.d = v;
    }
    if let Some(v) = args.sampler {
        cfg.sampler = v;
    }
    if let Some(v) = args.hecke_prime {
        cfg.hecke_prime = v;
    }
    if let Some(text) = args.radial {
        cfg.radial = serde_json::from_str(&text)
            .context("parsing --radial (expected JSON like [[0.1,3.0]])")?;
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    cfg.validate()?;

    let outcome = run_spectra(&cfg)?;
    for row in &outcome.rows {
        if !emit(&describe_row(row))? {
            break;
        }
    }
    if let Some(path) = args.out {
        fs::write(&path, render_check_csv(&outcome.rows)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(outcome.exit_code() as u8)
}

fn cmd_sample(args: SampleArgs) -> Result<u8> {
    let mut cfg: SampleConfig = config::load(args.config.as_deref())?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.d {
        cfg.d = v;
    }
    if let Some(v) = args.sampler {
        cfg.sampler = v;
    }
    if let Some(v) = args.hecke_prime {
        cfg.hecke_prime = v;
    }
    if args.affine {
        cfg.affine = true;
    }
    if let Some(v) = args.count {
        cfg.count = v;
    }
    cfg.validate()?;

    let lines = sample_dump(&cfg)?;
    match args.out {
        Some(path) => {
            fs::write(&path, lines.join("\n") + "\n")
                .with_context(|| format!("writing {}", path.display()))?;
        }
        None => {
            for line in &lines {
                if !emit(line)? {
                    break;
                }
            }
        }
    }
    Ok(0)
}

fn cmd_count(args: CountArgs) -> Result<u8> {
    let basis_text = fs::read_to_string(&args.basis)
        .with_context(|| format!("reading basis file {}", args.basis.display()))?;
    let out = run_count(
        &basis_text,
        args.offset.as_deref(),
        &args.region,
        args.list_points,
    )?;
    emit(&out.to_string())?;
    Ok(0)
}
