//! CSV and PGM report writers. Numeric CSV cells use Rust's shortest
//! round-trip float formatting; dB values are only rounded in the PGM
//! renders.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path as FsPath;

use serde::Serialize;

use crate::dsp::{BeamspaceMap, GridAnalysis, PdpProfile};
use crate::error::Result;

/// 64 x 64 beamspace CSV: row = Tx beam, column = Rx beam, dB values.
pub fn write_beamspace_csv(path: &FsPath, map: &BeamspaceMap) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in &map.powers_db {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct BeamspaceMeta {
    pub position_index: usize,
    pub n_tx_beams: usize,
    pub n_rx_beams: usize,
    pub best_tx_beam: usize,
    pub best_rx_beam: usize,
}

pub fn write_beamspace_meta(path: &FsPath, meta: &BeamspaceMeta) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(meta)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)?;
    Ok(())
}

/// PDP CSV: `delay_ns,power_db` rows.
pub fn write_pdp_csv(path: &FsPath, pdp: &PdpProfile, sample_rate_hz: f64) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "delay_ns,power_db")?;
    for (bin, db) in pdp.delay_bins.iter().zip(&pdp.power_db) {
        let delay_ns = *bin as f64 / sample_rate_hz * 1e9;
        writeln!(w, "{delay_ns},{db}")?;
    }
    w.flush()?;
    Ok(())
}

/// Matrix CSV over the analysis grid: rows = x index, columns = y index,
/// with one header row/column carrying the grid indices.
pub fn write_grid_csv<T, F>(
    path: &FsPath,
    xs: &[usize],
    ys: &[usize],
    cell: F,
) -> Result<()>
where
    F: Fn(usize, usize) -> T,
    T: std::fmt::Display,
{
    let mut w = BufWriter::new(File::create(path)?);
    let header: Vec<String> = std::iter::once("x_index\\y_index".to_string())
        .chain(ys.iter().map(|y| y.to_string()))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (xi, x) in xs.iter().enumerate() {
        let row: Vec<String> = std::iter::once(x.to_string())
            .chain((0..ys.len()).map(|yi| cell(xi, yi).to_string()))
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Plain 8-bit ASCII PGM, one grid cell per pixel (x across, y down).
pub fn write_pgm(path: &FsPath, width: usize, height: usize, maxval: u16, pixels: &[u16]) -> Result<()> {
    assert_eq!(pixels.len(), width * height);
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "P2")?;
    writeln!(w, "{width} {height}")?;
    writeln!(w, "{maxval}")?;
    for row in pixels.chunks(width) {
        let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

/// All grid-level exports: RSS / best-beam / LoS CSV matrices plus PGM
/// renders for quick viewing.
pub fn write_grid_reports(dir: &FsPath, analysis: &GridAnalysis) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let xs = &analysis.rss.matrix.x_indices;
    let ys = &analysis.rss.matrix.y_indices;

    write_grid_csv(&dir.join("rss_db.csv"), xs, ys, |xi, yi| {
        *analysis.rss.matrix.get(xi, yi)
    })?;
    write_grid_csv(&dir.join("best_beam.csv"), xs, ys, |xi, yi| {
        match analysis.best_beam.get(xi, yi) {
            Some(b) => b.to_string(),
            None => String::new(),
        }
    })?;
    write_grid_csv(&dir.join("los_mask.csv"), xs, ys, |xi, yi| {
        u8::from(*analysis.los.get(xi, yi))
    })?;

    // PGM renders: x across, y down.
    let (nx, ny) = analysis.rss.matrix.shape();
    let finite: Vec<f64> = analysis
        .rss
        .matrix
        .values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut rss_px = vec![0u16; nx * ny];
    let mut beam_px = vec![0u16; nx * ny];
    let mut los_px = vec![0u16; nx * ny];
    for yi in 0..ny {
        for xi in 0..nx {
            let p = yi * nx + xi;
            let v = *analysis.rss.matrix.get(xi, yi);
            rss_px[p] = if v.is_finite() {
                (255.0 * (v - lo) / span).round() as u16
            } else {
                0
            };
            beam_px[p] = analysis.best_beam.get(xi, yi).map(|b| b as u16).unwrap_or(0);
            los_px[p] = u16::from(*analysis.los.get(xi, yi));
        }
    }
    write_pgm(&dir.join("rss.pgm"), nx, ny, 255, &rss_px)?;
    write_pgm(&dir.join("best_beam.pgm"), nx, ny, 63, &beam_px)?;
    write_pgm(&dir.join("los_mask.pgm"), nx, ny, 1, &los_px)?;
    Ok(())
}
