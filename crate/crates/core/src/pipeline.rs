//! Batch front-end: codebook generation, grid simulation runs, dataset
//! processing and integrity validation. The CLI is a thin wrapper over
//! these functions.

use std::fs;
use std::path::{Path as FsPath, PathBuf};

use crate::beams::{ArrayGeometry, BeamCodebook};
use crate::channel::Simulator;
use crate::dsp::{
    align_pdp_group, analyze_grid, circular_slice, extract_pdp, process_position, GridAnalysis,
    PositionAnalysis, SLOT_LAG_MARGIN,
};
use crate::error::{Error, Result};
use crate::io::capture::{read_capture, write_capture, OracleSidecar};
use crate::io::codebook_file::{codebook_to_json, parse_codebook_json};
use crate::io::export::{
    write_beamspace_csv, write_beamspace_meta, write_grid_reports, write_pdp_csv, BeamspaceMeta,
};
use crate::io::manifest::{sha256_hex, sha256_of_file, CaptureRef, FileRef, Manifest, MANIFEST_NAME, MANIFEST_VERSION};
use crate::io::scene_file::parse_scene_json;
use crate::par::*;
use crate::sweep::build_sweep_frame;
use crate::waveform::{generate_permutation, peak_cross_correlation, ChirpParams, WaveformCodebook};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Parse a position/beam selector: `all`, `74`, `0-5`, `1,3,9-12`.
pub fn parse_selector(spec: &str, max_exclusive: usize) -> Result<Vec<usize>> {
    let spec = spec.trim();
    if spec.eq_ignore_ascii_case("all") {
        return Ok((0..max_exclusive).collect());
    }
    let mut out = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let parse = |s: &str| -> Result<usize> {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parameter(format!("bad selector element '{s}'")))
        };
        if let Some((lo, hi)) = part.split_once('-') {
            let (lo, hi) = (parse(lo)?, parse(hi)?);
            if lo > hi {
                return Err(Error::Parameter(format!("descending range '{part}'")));
            }
            out.extend(lo..=hi);
        } else {
            out.push(parse(part)?);
        }
    }
    if out.is_empty() {
        return Err(Error::Parameter("empty selector".into()));
    }
    out.sort_unstable();
    out.dedup();
    if let Some(&bad) = out.iter().find(|&&v| v >= max_exclusive) {
        return Err(Error::Parameter(format!(
            "selector value {bad} outside 0..{max_exclusive}"
        )));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// gen-codebook
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct GenCodebookReport {
    pub codebook: WaveformCodebook,
    /// Worst normalized cross-correlation peak over all ordered beam pairs.
    pub theta: f64,
    pub worst_pair: (usize, usize),
    pub frame_samples: usize,
    pub frame_duration_s: f64,
}

/// Build, measure and write a codebook file; optionally dump raw waveforms
/// as interleaved little-endian f32 I/Q, one file per beam.
pub fn gen_codebook(
    params: ChirpParams,
    seed: u64,
    out_path: &FsPath,
    export_iq_dir: Option<&FsPath>,
) -> Result<GenCodebookReport> {
    let codebook = WaveformCodebook::build(params, seed)?;
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(out_path, codebook_to_json(&codebook)?)?;

    if let Some(dir) = export_iq_dir {
        fs::create_dir_all(dir)?;
        for (k, wf) in codebook.waveforms.iter().enumerate() {
            let mut bytes = Vec::with_capacity(wf.len() * 8);
            for s in wf {
                bytes.extend_from_slice(&(s.re as f32).to_le_bytes());
                bytes.extend_from_slice(&(s.im as f32).to_le_bytes());
            }
            fs::write(dir.join(format!("beam{k:02}.iq")), bytes)?;
        }
    }

    let report = peak_cross_correlation(&codebook);
    let frame = build_sweep_frame(&codebook);
    Ok(GenCodebookReport {
        theta: report.peak_ratio,
        worst_pair: report.worst_pair,
        frame_samples: frame.len(),
        frame_duration_s: frame.duration_s(),
        codebook,
    })
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    /// Raw scene JSON, copied verbatim into the run directory.
    pub scene_json: Vec<u8>,
    /// Raw codebook JSON, copied verbatim into the run directory.
    pub codebook_json: Vec<u8>,
    pub positions: Vec<usize>,
    pub rx_beams: Vec<usize>,
    pub snr_db: f64,
    pub seed: u64,
}

#[derive(Debug)]
pub struct SimulateReport {
    pub written: usize,
    pub skipped: usize,
    pub manifest_path: PathBuf,
}

pub fn capture_file_name(position_index: usize, rx_beam: usize) -> String {
    format!("pos{position_index:05}_rx{rx_beam:02}.bscp")
}

/// Run (or resume) a simulation: one capture file plus oracle sidecar per
/// (position, Rx beam), then the manifest as the commit marker. Existing
/// capture files are kept as-is, so deleting one file and rerunning
/// regenerates exactly that file.
pub fn simulate(out_dir: &FsPath, opts: &SimulateOptions) -> Result<SimulateReport> {
    let scene = parse_scene_json(&opts.scene_json)?;
    let codebook = parse_codebook_json(&opts.codebook_json)?;
    let beams = BeamCodebook::standard();
    let geometry = ArrayGeometry {
        carrier_hz: scene.carrier_hz,
        ..ArrayGeometry::default()
    };
    for &p in &opts.positions {
        if p >= scene.grid.n_positions() {
            return Err(Error::OutOfRange(format!("position {p}")));
        }
    }
    for &r in &opts.rx_beams {
        if r >= beams.n_beams() {
            return Err(Error::OutOfRange(format!("rx beam {r}")));
        }
    }

    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("codebook.json"), &opts.codebook_json)?;
    fs::write(out_dir.join("scene.json"), &opts.scene_json)?;

    let sim = Simulator::new(scene.clone(), &codebook, beams, geometry)?;
    let carrier = scene.carrier_hz;

    let tasks: Vec<(usize, usize)> = opts
        .positions
        .iter()
        .flat_map(|&p| opts.rx_beams.iter().map(move |&r| (p, r)))
        .collect();

    let results: Vec<(CaptureRef, bool)> = tasks
        .into_par_iter()
        .map(|(pos, rx)| -> Result<(CaptureRef, bool)> {
            let name = capture_file_name(pos, rx);
            let path = out_dir.join(&name);
            let written = if path.exists() {
                false
            } else {
                let capture = sim.capture(pos, rx, opts.snr_db, opts.seed)?;
                let tmp = out_dir.join(format!("{name}.tmp"));
                write_capture(&tmp, &capture, carrier)?;
                fs::rename(&tmp, &path)?;
                OracleSidecar {
                    true_start_offset: capture.true_start_offset.unwrap_or(0),
                    run_seed: opts.seed,
                    snr_db: opts.snr_db,
                    paths: sim.paths(pos)?,
                }
                .save(&path)?;
                true
            };
            Ok((
                CaptureRef {
                    path: name,
                    sha256: sha256_of_file(&path)?,
                    position_index: pos,
                    rx_beam: rx,
                },
                written,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let written = results.iter().filter(|(_, w)| *w).count();
    let skipped = results.len() - written;

    let manifest = Manifest {
        version: MANIFEST_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        seed: opts.seed,
        snr_db: opts.snr_db,
        codebook: FileRef {
            path: "codebook.json".into(),
            sha256: sha256_hex(&opts.codebook_json),
        },
        scene: FileRef {
            path: "scene.json".into(),
            sha256: sha256_hex(&opts.scene_json),
        },
        grid_nx: scene.grid.nx,
        grid_ny: scene.grid.ny,
        positions: opts.positions.clone(),
        rx_beams: opts.rx_beams.clone(),
        captures: results.into_iter().map(|(c, _)| c).collect(),
    };
    manifest.save(out_dir)?;

    Ok(SimulateReport {
        written,
        skipped,
        manifest_path: out_dir.join(MANIFEST_NAME),
    })
}

// ---------------------------------------------------------------------------
// process
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct ReportSelection {
    pub beamspace: bool,
    pub pdp: bool,
    pub grid: bool,
}

impl Default for ReportSelection {
    fn default() -> Self {
        Self {
            beamspace: true,
            pdp: true,
            grid: true,
        }
    }
}

impl ReportSelection {
    pub fn parse(spec: &str) -> Result<Self> {
        let mut sel = Self {
            beamspace: false,
            pdp: false,
            grid: false,
        };
        for part in spec.split(',') {
            match part.trim() {
                "beamspace" => sel.beamspace = true,
                "pdp" => sel.pdp = true,
                "grid" => sel.grid = true,
                "all" => sel = Self::default(),
                other => {
                    return Err(Error::Parameter(format!(
                        "unknown report '{other}' (expected beamspace, pdp, grid or all)"
                    )))
                }
            }
        }
        Ok(sel)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ProcessOptions {
    pub reports: ReportSelection,
    pub exclude_omni: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct FileIssue {
    pub path: String,
    pub message: String,
}

#[derive(Debug, serde::Serialize)]
pub struct ProcessReport {
    pub positions_processed: usize,
    pub issues: Vec<FileIssue>,
}

/// Process a simulated run directory into beamspace maps, aligned PDPs and
/// grid-level reports. Corrupt or undetectable captures become issue records
/// and processing continues.
pub fn process(in_dir: &FsPath, out_dir: &FsPath, opts: &ProcessOptions) -> Result<ProcessReport> {
    let manifest = Manifest::load(in_dir).map_err(|_| Error::Format {
        path: in_dir.display().to_string(),
        reason: "no readable manifest.json (run `simulate` first)".into(),
    })?;
    let codebook = parse_codebook_json(&fs::read(in_dir.join(&manifest.codebook.path))?)?;
    let scene = parse_scene_json(&fs::read(in_dir.join(&manifest.scene.path))?)?;
    let frame = build_sweep_frame(&codebook);
    fs::create_dir_all(out_dir)?;

    let mut positions: Vec<usize> = manifest.captures.iter().map(|c| c.position_index).collect();
    positions.sort_unstable();
    positions.dedup();

    let mut issues: Vec<FileIssue> = Vec::new();
    let mut analyses: Vec<PositionAnalysis> = Vec::new();

    for &pos in &positions {
        let refs: Vec<&CaptureRef> = manifest
            .captures
            .iter()
            .filter(|c| c.position_index == pos)
            .collect();

        let mut captures = Vec::with_capacity(refs.len());
        let mut broken = false;
        for r in &refs {
            match read_capture(&in_dir.join(&r.path)) {
                Ok((cap, _)) => captures.push(cap),
                Err(e) => {
                    issues.push(FileIssue {
                        path: r.path.clone(),
                        message: e.to_string(),
                    });
                    broken = true;
                }
            }
        }
        if broken {
            continue;
        }

        let analysis = match process_position(&captures, &frame) {
            Ok(a) => a,
            Err(e) => {
                issues.push(FileIssue {
                    path: capture_file_name(pos, 0),
                    message: format!("position {pos}: {e}"),
                });
                continue;
            }
        };

        let (best_tx, best_rx) = analysis.best_pair();
        if opts.reports.beamspace {
            write_beamspace_csv(
                &out_dir.join(format!("beamspace_pos{pos:05}.csv")),
                &analysis.beamspace,
            )?;
            write_beamspace_meta(
                &out_dir.join(format!("beamspace_pos{pos:05}.meta.json")),
                &BeamspaceMeta {
                    position_index: pos,
                    n_tx_beams: frame.n_slots(),
                    n_rx_beams: frame.n_slots(),
                    best_tx_beam: best_tx,
                    best_rx_beam: best_rx,
                },
            )?;
        }

        if opts.reports.pdp {
            // Aligned PDPs of the best Rx beam: one profile per Tx slot,
            // shifted as a group, exporting the best Tx beam's profile.
            let capture = captures
                .iter()
                .find(|c| c.rx_beam == best_rx)
                .expect("best pair comes from this set");
            let start = analysis.starts[best_rx];
            let len = capture.samples.len();
            let pdps: Vec<_> = (0..frame.n_slots())
                .map(|tx| {
                    let begin = (start + tx * frame.slot_len) % len;
                    let window =
                        circular_slice(&capture.samples, begin, frame.slot_len + SLOT_LAG_MARGIN);
                    extract_pdp(&window, &codebook.waveforms[tx])
                })
                .collect::<Result<Vec<_>>>()?;
            let aligned = align_pdp_group(&pdps, 0);
            write_pdp_csv(
                &out_dir.join(format!("pdp_pos{pos:05}_rx{best_rx:02}_tx{best_tx:02}.csv")),
                &aligned[best_tx],
                frame.sample_rate_hz,
            )?;
        }

        analyses.push(analysis);
    }

    if opts.reports.grid && !analyses.is_empty() {
        let analysis: GridAnalysis = analyze_grid(&analyses, &scene, opts.exclude_omni)?;
        write_grid_reports(&out_dir.join("grid"), &analysis)?;
    }

    let report = ProcessReport {
        positions_processed: analyses.len(),
        issues,
    };
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    fs::write(out_dir.join("report.json"), bytes)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, serde::Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

fn push(violations: &mut Vec<Violation>, path: &FsPath, message: impl Into<String>) {
    violations.push(Violation {
        path: path.display().to_string(),
        message: message.into(),
    });
}

fn validate_codebook_bytes(
    bytes: &[u8],
    path: &FsPath,
    violations: &mut Vec<Violation>,
) -> Option<WaveformCodebook> {
    let codebook = match parse_codebook_json(bytes) {
        Ok(cb) => cb,
        Err(e) => {
            push(violations, path, format!("unparseable codebook: {e}"));
            return None;
        }
    };
    for (k, wf) in codebook.waveforms.iter().enumerate() {
        let worst = wf.iter().map(|s| (s.norm() - 1.0).abs()).fold(0.0, f64::max);
        if worst > 1e-12 {
            push(
                violations,
                path,
                format!("beam {k}: envelope deviates by {worst:.3e}"),
            );
        }
    }
    for (k, p) in codebook.permutations.iter().enumerate() {
        if *p != generate_permutation(codebook.seed, k) {
            push(
                violations,
                path,
                format!("permutation {k} does not match the stored seed"),
            );
        }
    }
    Some(codebook)
}

fn validate_capture_file(
    path: &FsPath,
    expected_hash: Option<&str>,
    violations: &mut Vec<Violation>,
) {
    if let Some(expect) = expected_hash {
        match sha256_of_file(path) {
            Ok(h) if h == expect => {}
            Ok(h) => push(
                violations,
                path,
                format!("sha256 mismatch: manifest {expect}, file {h}"),
            ),
            Err(e) => {
                push(violations, path, format!("unreadable: {e}"));
                return;
            }
        }
    }
    if let Err(e) = read_capture(path) {
        push(violations, path, e.to_string());
    }
}

/// Integrity check of a manifest directory, a single capture, or a codebook
/// file. Returns the violation list (empty means clean).
pub fn validate(path: &FsPath) -> Result<Vec<Violation>> {
    let mut violations = Vec::new();

    let manifest_dir = if path.is_dir() {
        Some(path.to_path_buf())
    } else if path.file_name().map(|n| n == MANIFEST_NAME).unwrap_or(false) {
        Some(path.parent().unwrap_or(FsPath::new(".")).to_path_buf())
    } else {
        None
    };

    if let Some(dir) = manifest_dir {
        let manifest = match Manifest::load(&dir) {
            Ok(m) => m,
            Err(e) => {
                push(&mut violations, &dir.join(MANIFEST_NAME), format!("{e}"));
                return Ok(violations);
            }
        };

        let codebook_path = dir.join(&manifest.codebook.path);
        match fs::read(&codebook_path) {
            Ok(bytes) => {
                if sha256_hex(&bytes) != manifest.codebook.sha256 {
                    push(&mut violations, &codebook_path, "sha256 mismatch");
                }
                let _ = validate_codebook_bytes(&bytes, &codebook_path, &mut violations);
            }
            Err(e) => push(&mut violations, &codebook_path, format!("unreadable: {e}")),
        }

        let scene_path = dir.join(&manifest.scene.path);
        match fs::read(&scene_path) {
            Ok(bytes) => {
                if sha256_hex(&bytes) != manifest.scene.sha256 {
                    push(&mut violations, &scene_path, "sha256 mismatch");
                }
                match parse_scene_json(&bytes) {
                    Ok(scene) => {
                        if scene.grid.nx != manifest.grid_nx || scene.grid.ny != manifest.grid_ny {
                            push(
                                &mut violations,
                                &scene_path,
                                format!(
                                    "grid {}x{} does not match manifest {}x{}",
                                    scene.grid.nx, scene.grid.ny, manifest.grid_nx, manifest.grid_ny
                                ),
                            );
                        }
                    }
                    Err(e) => push(&mut violations, &scene_path, format!("{e}")),
                }
            }
            Err(e) => push(&mut violations, &scene_path, format!("unreadable: {e}")),
        }

        let capture_issues: Vec<Vec<Violation>> = manifest
            .captures
            .iter()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|cap| {
                let mut local = Vec::new();
                let p = dir.join(&cap.path);
                if !p.exists() {
                    push(&mut local, &p, "listed in manifest but missing");
                } else {
                    validate_capture_file(&p, Some(&cap.sha256), &mut local);
                }
                local
            })
            .collect();
        violations.extend(capture_issues.into_iter().flatten());
        return Ok(violations);
    }

    match path.extension().and_then(|e| e.to_str()) {
        Some("bscp") => validate_capture_file(path, None, &mut violations),
        _ => {
            let bytes = fs::read(path)?;
            validate_codebook_bytes(&bytes, path, &mut violations);
        }
    }
    Ok(violations)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selector_parsing() {
        assert_eq!(parse_selector("74", 350).unwrap(), vec![74]);
        assert_eq!(parse_selector("0-3,7", 350).unwrap(), vec![0, 1, 2, 3, 7]);
        assert_eq!(parse_selector("3,1,2,3", 10).unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_selector("all", 4).unwrap(), vec![0, 1, 2, 3]);
        assert!(parse_selector("9-2", 350).is_err());
        assert!(parse_selector("400", 350).is_err());
        assert!(parse_selector("x", 350).is_err());
        assert!(parse_selector("", 350).is_err());
    }

    #[test]
    fn report_selection_parsing() {
        let sel = ReportSelection::parse("beamspace,grid").unwrap();
        assert!(sel.beamspace && sel.grid && !sel.pdp);
        assert!(ReportSelection::parse("nope").is_err());
    }
}
