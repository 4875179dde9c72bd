//! Flag definitions. Long, kebab-case flags only.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "cascade-branch",
    version,
    about = "Viral-campaign analysis over generation-indexed branching processes",
    long_about = "Ingests transmission event logs (CSV: sender_id,recipient_id,timestamp; empty \
                  sender marks a seed), computes per-generation epidemic parameters, fits a \
                  global branching model from generation prefixes to predict total reach, \
                  analyses the time-by-generation structure, and simulates synthetic campaigns.\n\
                  The environment variable CASCADE_BRANCH_THREADS caps internal concurrency."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Per-generation counts, p/lambda/ETP parameters and a campaign summary.
    Stats(StatsArgs),
    /// Fit the branching model to generation prefixes and report reach errors.
    Fit(FitArgs),
    /// Period-by-generation matrix, cumulative curves, generation creation
    /// times and stabilization.
    Temporal(TemporalArgs),
    /// Generate a synthetic campaign event log.
    Simulate(SimulateArgs),
    /// Run stats, fit and temporal together into one directory with a
    /// checksum manifest.
    Report(ReportArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, Default)]
pub enum OrphanArg {
    /// Skip records whose sender was never infected; report them.
    #[default]
    Reject,
    /// Promote unknown senders to generation-1 seeds.
    AsSeeds,
}

#[derive(ValueEnum, Clone, Copy, Debug, Default)]
pub enum TimestampArg {
    /// Detect from the first data row.
    #[default]
    Auto,
    /// Integer epoch seconds.
    Epoch,
    /// RFC 3339 date-times.
    Rfc3339,
}

/// Flags shared by every command that ingests an event log.
#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Event CSV path.
    pub events: Option<PathBuf>,
    /// Orphan handling (records whose sender has no recorded infection).
    #[arg(long, value_enum, default_value_t = OrphanArg::Reject)]
    pub orphans: OrphanArg,
    /// Timestamp convention of the `timestamp` column.
    #[arg(long, value_enum, default_value_t = TimestampArg::Auto)]
    pub timestamp_format: TimestampArg,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[command(flatten)]
    pub ingest: IngestArgs,
    /// Read a `generation,infected,cumulative,decisions,sent` CSV instead
    /// of an event log.
    #[arg(long, value_name = "PATH", conflicts_with = "events")]
    pub from_series: Option<PathBuf>,
    /// Criticality tolerance: |ETP - 1| <= tol classifies as critical.
    #[arg(long, default_value_t = 0.0)]
    pub tol: f64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub output: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct SearchArgs {
    /// Flat key=value file with any of the search keys
    /// (r0_min, r0_max, r0_steps, n_min, n_max, n_steps, log_n,
    /// refine_rounds, refine_shrink); flags override the file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Lower bound of the r0 grid.
    #[arg(long)]
    pub r0_min: Option<f64>,
    /// Upper bound of the r0 grid.
    #[arg(long)]
    pub r0_max: Option<f64>,
    /// Number of r0 grid points.
    #[arg(long)]
    pub r0_steps: Option<usize>,
    /// Lower bound of the N grid (default: observed prefix cumulative).
    #[arg(long)]
    pub n_min: Option<f64>,
    /// Upper bound of the N grid.
    #[arg(long)]
    pub n_max: Option<f64>,
    /// Number of N grid points.
    #[arg(long)]
    pub n_steps: Option<usize>,
    /// Space the N grid linearly instead of logarithmically.
    #[arg(long)]
    pub linear_n: bool,
    /// Local refinement rounds after the coarse grid.
    #[arg(long)]
    pub refine_rounds: Option<usize>,
    /// Range shrink factor per refinement round, in (0, 1).
    #[arg(long)]
    pub refine_shrink: Option<f64>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub ingest: IngestArgs,
    /// Read a generation series CSV instead of an event log.
    #[arg(long, value_name = "PATH", conflicts_with = "events")]
    pub from_series: Option<PathBuf>,
    /// Fit a single prefix length instead of sweeping k = 1..=G.
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Also render an SVG chart of the reach-error curve.
    #[arg(long)]
    pub svg: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct TemporalArgs {
    #[command(flatten)]
    pub ingest: IngestArgs,
    /// Read a period-matrix CSV instead of an event log (generation
    /// creation times are then unavailable).
    #[arg(long, value_name = "PATH", conflicts_with = "events")]
    pub from_matrix: Option<PathBuf>,
    /// Period length: plain seconds or a value with a d/h/m/s suffix
    /// (e.g. 1d, 12h, 90m).
    #[arg(long, default_value = "1d")]
    pub period: String,
    /// Quiet periods required after a generation's last activity before it
    /// counts as stable.
    #[arg(long, default_value_t = 3)]
    pub window: usize,
    /// Generations for cumulative curves: comma-separated list or `all`.
    #[arg(long, default_value = "all")]
    pub generations: String,
    /// Also render SVG charts (cumulative curves, generation creation).
    #[arg(long)]
    pub svg: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Forwarding probability per infected member.
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    /// Mean contact attempts per forwarding member.
    #[arg(long, default_value_t = 2.0)]
    pub lambda: f64,
    /// Population size.
    #[arg(long, default_value_t = 1000)]
    pub n: u64,
    /// Number of generation-1 seeds.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Mean transmission delay in seconds.
    #[arg(long, default_value_t = 3600.0)]
    pub mean_delay: f64,
    /// Members of this generation no longer forward.
    #[arg(long, default_value_t = 100)]
    pub max_generations: u32,
    /// Seed for the ChaCha12 stream; fixed seed, identical output.
    #[arg(long, default_value_t = 42)]
    pub rng_seed: u64,
    /// Destination event CSV path.
    pub output_file: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(flatten)]
    pub ingest: IngestArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Period length for the temporal section.
    #[arg(long, default_value = "1d")]
    pub period: String,
    /// Stabilization window.
    #[arg(long, default_value_t = 3)]
    pub window: usize,
    /// Criticality tolerance.
    #[arg(long, default_value_t = 0.0)]
    pub tol: f64,
    /// Also render SVG charts.
    #[arg(long)]
    pub svg: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub output: PathBuf,
}
