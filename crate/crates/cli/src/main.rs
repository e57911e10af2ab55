//! `beamsounder`: codebook generation, grid simulation, dataset processing
//! and integrity validation from the command line.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use beamsounder_core::io::scene_file::DEFAULT_SCENE_JSON;
use beamsounder_core::pipeline::{
    self, parse_selector, ProcessOptions, ReportSelection, SimulateOptions,
};
use beamsounder_core::waveform::{ChirpParams, DEFAULT_SEED};

/// Environment variable naming the default output root.
const OUT_ROOT_ENV: &str = "BEAMSOUNDER_OUT";

#[derive(Parser)]
#[command(name = "beamsounder", version, about = "60 GHz beamspace channel sounding toolkit")]
struct Cli {
    /// Optional JSON config file with default values for seed, snr-db,
    /// scene, codebook, jobs and out-root.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for parallel sections (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the scrambled-chirp codebook file and print its quality.
    GenCodebook(GenCodebookArgs),
    /// Synthesize capture files for grid positions and Rx beams.
    Simulate(SimulateArgs),
    /// Process a simulated run into beamspace maps, PDPs and grid reports.
    Process(ProcessArgs),
    /// Check file integrity and invariants of runs, captures or codebooks.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct GenCodebookArgs {
    /// Codebook seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Chirp start frequency, Hz.
    #[arg(long, default_value_t = -300e6)]
    f0_hz: f64,
    /// Chirp sweep parameter, Hz (instantaneous frequency ends at f0 + 2*fm).
    #[arg(long, default_value_t = 300e6)]
    fm_hz: f64,
    /// Chirp duration, microseconds.
    #[arg(long, default_value_t = 2.778)]
    duration_us: f64,
    /// DAC sample rate, Hz.
    #[arg(long, default_value_t = 737.28e6)]
    fs_hz: f64,
    /// Output codebook path (defaults to <out-root>/codebook.json).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also dump raw waveforms as f32 I/Q, one file per beam.
    #[arg(long)]
    export_iq: Option<PathBuf>,
    /// Also write the beam codebook as CSV (index, azimuth_deg, elevation_deg).
    #[arg(long)]
    export_beams_csv: Option<PathBuf>,
    /// Also write the sweep event schedule as CSV (sample_index, event, beam).
    #[arg(long)]
    export_events_csv: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scene JSON (defaults to the built-in room).
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Codebook JSON produced by gen-codebook.
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// Position selector: `all`, `74`, `0-9`, `1,5,20-24`.
    #[arg(long, default_value = "all")]
    positions: String,
    /// Rx beam selector, same syntax.
    #[arg(long, default_value = "all")]
    rx_beams: String,
    /// Capture SNR in dB referenced to the strongest path.
    #[arg(long)]
    snr_db: Option<f64>,
    /// Run seed for offsets and noise.
    #[arg(long)]
    seed: Option<u64>,
    /// Output run directory (defaults to <out-root>/captures).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProcessArgs {
    /// Simulated run directory (with manifest.json).
    #[arg(long = "in")]
    in_dir: PathBuf,
    /// Report output directory (defaults to <out-root>/reports).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma list of reports: beamspace, pdp, grid or all.
    #[arg(long, default_value = "all")]
    reports: String,
    /// Leave the omnidirectional beam out of RSS averages.
    #[arg(long)]
    exclude_omni: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Run directories, manifest paths, capture or codebook files.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
}

/// Optional config file: flag values win over these.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    seed: Option<u64>,
    snr_db: Option<f64>,
    scene: Option<PathBuf>,
    codebook: Option<PathBuf>,
    jobs: Option<usize>,
    out_root: Option<PathBuf>,
}

impl Config {
    fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let bytes =
                    std::fs::read(p).with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_slice(&bytes)
                    .with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    fn out_root(&self) -> Option<PathBuf> {
        self.out_root
            .clone()
            .or_else(|| std::env::var_os(OUT_ROOT_ENV).map(PathBuf::from))
    }

    fn resolve_out(&self, flag: Option<PathBuf>, leaf: &str, what: &str) -> Result<PathBuf> {
        if let Some(p) = flag {
            return Ok(p);
        }
        match self.out_root() {
            Some(root) => Ok(root.join(leaf)),
            None => bail!(
                "no {what} path: pass --out, set {OUT_ROOT_ENV}, or put out_root in the config"
            ),
        }
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let config = Config::load(cli.config.as_deref())?;

    #[cfg(feature = "parallel")]
    if let Some(jobs) = cli.jobs.or(config.jobs) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("initializing worker pool")?;
    }

    match cli.command {
        Command::GenCodebook(args) => gen_codebook(args, &config),
        Command::Simulate(args) => simulate(args, &config),
        Command::Process(args) => process(args, &config),
        Command::Validate(args) => validate(args),
    }
}

fn gen_codebook(args: GenCodebookArgs, config: &Config) -> Result<()> {
    let params = ChirpParams {
        f0_hz: args.f0_hz,
        fm_hz: args.fm_hz,
        duration_s: args.duration_us * 1e-6,
        sample_rate_hz: args.fs_hz,
    };
    let seed = args.seed.or(config.seed).unwrap_or(DEFAULT_SEED);
    let out = config.resolve_out(args.out, "codebook.json", "codebook output")?;
    let report = pipeline::gen_codebook(params, seed, &out, args.export_iq.as_deref())?;
    if let Some(path) = &args.export_beams_csv {
        let mut file = std::fs::File::create(path)
            .with_context(|| format!("creating {}", path.display()))?;
        beamsounder_core::beams::BeamCodebook::standard().export_csv(&mut file)?;
    }
    if let Some(path) = &args.export_events_csv {
        let mut file = std::fs::File::create(path)
            .with_context(|| format!("creating {}", path.display()))?;
        beamsounder_core::sweep::build_sweep_frame(&report.codebook).export_events_csv(&mut file)?;
    }
    println!("codebook: {}", out.display());
    println!("seed: {seed:#018x}");
    println!(
        "cross-correlation bound theta: {:.6} (worst pair {:?})",
        report.theta, report.worst_pair
    );
    println!(
        "sweep frame: {} samples, {:.4} us",
        report.frame_samples,
        report.frame_duration_s * 1e6
    );
    Ok(())
}

fn simulate(args: SimulateArgs, config: &Config) -> Result<()> {
    let scene_json = match args.scene.as_ref().or(config.scene.as_ref()) {
        Some(p) => std::fs::read(p).with_context(|| format!("reading scene {}", p.display()))?,
        None => DEFAULT_SCENE_JSON.as_bytes().to_vec(),
    };
    let codebook_path = args
        .codebook
        .as_ref()
        .or(config.codebook.as_ref())
        .context("--codebook is required (generate one with gen-codebook)")?;
    let codebook_json = std::fs::read(codebook_path)
        .with_context(|| format!("reading codebook {}", codebook_path.display()))?;

    // Selector bounds come from the actual scene grid.
    let scene = beamsounder_core::io::scene_file::parse_scene_json(&scene_json)?;
    let positions = parse_selector(&args.positions, scene.grid.n_positions())?;
    let rx_beams = parse_selector(&args.rx_beams, 64)?;

    let out = config.resolve_out(args.out, "captures", "run output")?;
    let opts = SimulateOptions {
        scene_json,
        codebook_json,
        positions,
        rx_beams,
        snr_db: args.snr_db.or(config.snr_db).unwrap_or(20.0),
        seed: args.seed.or(config.seed).unwrap_or(1),
    };
    let report = pipeline::simulate(&out, &opts)?;
    println!(
        "captures: {} written, {} kept from a previous run",
        report.written, report.skipped
    );
    println!("manifest: {}", report.manifest_path.display());
    Ok(())
}

fn process(args: ProcessArgs, config: &Config) -> Result<()> {
    let out = config.resolve_out(args.out, "reports", "report output")?;
    let opts = ProcessOptions {
        reports: ReportSelection::parse(&args.reports)?,
        exclude_omni: args.exclude_omni,
    };
    let report = pipeline::process(&args.in_dir, &out, &opts)?;
    println!(
        "processed {} positions -> {}",
        report.positions_processed,
        out.display()
    );
    if !report.issues.is_empty() {
        for issue in &report.issues {
            eprintln!("issue: {}: {}", issue.path, issue.message);
        }
        std::process::exit(2);
    }
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<()> {
    let mut total = 0usize;
    for path in &args.paths {
        let violations = pipeline::validate(path)?;
        if violations.is_empty() {
            println!("{}: ok", path.display());
        } else {
            for v in &violations {
                println!("{}: VIOLATION: {}", v.path, v.message);
            }
            total += violations.len();
        }
    }
    if total > 0 {
        eprintln!("{total} violation(s)");
        std::process::exit(1);
    }
    Ok(())
}
