//! `latticebolt`: cavity runs, throughput sweeps, memory-access
//! microbenchmarks and iteration-time spectra.

mod commands;
mod manifest;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "latticebolt", version, about = "D3Q19 lattice Boltzmann solver and bandwidth harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lid-driven cavity run; writes centreline profiles.
    Cavity(CavityArgs),
    /// MLUPS sweep over domains, strategies, orderings and worker counts.
    Bench(BenchArgs),
    /// Aligned versus offset-by-one copy bandwidth.
    Membench(MembenchArgs),
    /// Spectrum of an iteration-time series.
    Spectrum(SpectrumArgs),
}

/// Shared by every subcommand.
#[derive(Args)]
struct Common {
    /// Flat `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for every file written.
    #[arg(long, default_value = "latticebolt-out")]
    out: PathBuf,
}

#[derive(Args)]
pub struct CavityArgs {
    #[command(flatten)]
    common: Common,
    /// Reynolds number.
    #[arg(long)]
    re: Option<f64>,
    /// Nodes per edge, walls included.
    #[arg(long)]
    size: Option<usize>,
    /// Lid speed in lattice units; tau follows from Re.
    #[arg(long, conflicts_with = "tau")]
    lid_speed: Option<f64>,
    /// Relaxation time; the lid speed follows from Re.
    #[arg(long)]
    tau: Option<f64>,
    /// pull, push or conventional.
    #[arg(long)]
    ordering: Option<String>,
    /// direct, tile[W] or lane[W].
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    tile_width: Option<usize>,
    #[arg(long)]
    lane_width: Option<usize>,
    /// soa or aos.
    #[arg(long)]
    layout: Option<String>,
    /// Step cap.
    #[arg(long)]
    iters: Option<usize>,
    /// single or double.
    #[arg(long)]
    precision: Option<String>,
    /// Steady-state tolerance relative to the lid speed, or `none`.
    #[arg(long)]
    tolerance: Option<String>,
    /// Keep density and velocity per node and write them out.
    #[arg(long)]
    store_macros: bool,
    /// Poison the destination buffer every step and fail on missed slots.
    #[arg(long)]
    poison_check: bool,
    #[arg(long)]
    workers: Option<usize>,
    /// Reference profile CSV (coordinate, normalized velocity).
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Profile the reference describes: ux (u_x along z) or uz (u_z along x).
    #[arg(long)]
    reference_profile: Option<String>,
}

#[derive(Args)]
pub struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated cube edges.
    #[arg(long)]
    sizes: Option<String>,
    /// Comma-separated strategies.
    #[arg(long)]
    strategies: Option<String>,
    /// Comma-separated orderings.
    #[arg(long)]
    orderings: Option<String>,
    /// Comma-separated worker counts.
    #[arg(long)]
    workers: Option<String>,
    /// Measured iterations per point, at least 10.
    #[arg(long)]
    iters: Option<usize>,
    /// Untimed iterations before measuring.
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    precision: Option<String>,
    #[arg(long)]
    layout: Option<String>,
    #[arg(long)]
    tile_width: Option<usize>,
    #[arg(long)]
    lane_width: Option<usize>,
    #[arg(long)]
    re: Option<f64>,
    #[arg(long)]
    lid_speed: Option<f64>,
    #[arg(long)]
    store_macros: bool,
    /// Step every strategy once from the same state first; abort on any
    /// difference.
    #[arg(long)]
    check_equivalence: bool,
}

#[derive(Args)]
pub struct MembenchArgs {
    #[command(flatten)]
    common: Common,
    /// alignedRead, offsetRead, alignedWrite, offsetWrite or all.
    #[arg(long)]
    pattern: Option<String>,
    /// Independent vectors.
    #[arg(long)]
    vectors: Option<usize>,
    /// Bytes per vector; defaults to 4x the last-level cache over all vectors.
    #[arg(long)]
    vector_bytes: Option<usize>,
    /// Timed passes; the fastest is kept.
    #[arg(long)]
    repeats: Option<usize>,
    /// Route offset copies through a streaming line kernel.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    allow_cache_resident: bool,
}

#[derive(Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    common: Common,
    /// Series CSV (iteration, seconds).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Sample spacing; defaults to the series mean.
    #[arg(long)]
    mean_seconds: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Cavity(a) => commands::cavity(a),
        Command::Bench(a) => commands::bench(a),
        Command::Membench(a) => commands::membench(a),
        Command::Spectrum(a) => commands::spectrum(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
