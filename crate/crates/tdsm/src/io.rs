//! On-disk formats: `TDSM-TRACES v1`, `TDSM-GRID v1`, and an 8-bit PGM view
//! of 2D indicator grids.
//!
//! Floats are written with 17 significant digits, which round-trips binary64
//! exactly. Writes go to a temporary file in the target directory and are
//! renamed into place.

use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

use crate::forward::{ForwardError, TraceSet};
use crate::imaging::IndicatorGrid;
use crate::scene::{Point, SamplingGrid, SceneError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },
    #[error(transparent)]
    Traces(#[from] ForwardError),
    #[error(transparent)]
    Grid(#[from] SceneError),
    #[error("PGM output requires a 2D grid, got dimension {0}")]
    PgmNeeds2d(usize),
    #[error("cannot rasterize an all-zero grid to PGM")]
    PgmZeroGrid,
}

fn io_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, reason: impl Into<String>) -> IoError {
    IoError::Parse {
        path: path.display().to_string(),
        line,
        reason: reason.into(),
    }
}

/// Write bytes to a temporary sibling and rename into place.
fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let stem = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    let tmp = dir.join(format!(".{stem}.tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))?;
    Ok(())
}

/// 17 significant digits: lossless for binary64.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a trace set: header `TDSM-TRACES v1 <ns> <nt> <components> <dt>`,
/// one receiver-coordinate line per receiver, then one line per
/// (receiver, time step) in receiver-major order.
pub fn write_traces(path: &Path, traces: &TraceSet) -> Result<(), IoError> {
    let ns = traces.n_receivers();
    let nt = traces.n_samples();
    let nc = traces.n_components();
    let mut out = String::with_capacity(ns * nt * nc * 26 + ns * 80 + 64);
    writeln!(out, "TDSM-TRACES v1 {ns} {nt} {nc} {}", fmt_f64(traces.dt)).unwrap();
    for p in &traces.receiver_positions {
        writeln!(out, "{} {} {}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2])).unwrap();
    }
    for m in 0..ns {
        for n in 0..nt {
            for c in 0..nc {
                if c > 0 {
                    out.push(' ');
                }
                out.push_str(&fmt_f64(traces.value(m, n, c)));
            }
            out.push('\n');
        }
    }
    atomic_write(path, out.as_bytes())
}

pub fn read_traces(path: &Path) -> Result<TraceSet, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 6 || tokens[0] != "TDSM-TRACES" || tokens[1] != "v1" {
        return Err(parse_err(path, 1, "expected `TDSM-TRACES v1 <ns> <nt> <components> <dt>`"));
    }
    let ns: usize = tokens[2]
        .parse()
        .map_err(|_| parse_err(path, 1, "bad receiver count"))?;
    let nt: usize = tokens[3]
        .parse()
        .map_err(|_| parse_err(path, 1, "bad sample count"))?;
    let nc: usize = tokens[4]
        .parse()
        .map_err(|_| parse_err(path, 1, "bad component count"))?;
    let dt: f64 = tokens[5]
        .parse()
        .map_err(|_| parse_err(path, 1, "bad time step"))?;

    let mut positions: Vec<Point> = Vec::with_capacity(ns);
    for _ in 0..ns {
        let (i, line) = lines
            .next()
            .ok_or_else(|| parse_err(path, 0, "truncated receiver block"))?;
        let coords: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| parse_err(path, i + 1, "bad receiver coordinate"))?;
        if coords.len() != 3 {
            return Err(parse_err(path, i + 1, "expected 3 receiver coordinates"));
        }
        positions.push([coords[0], coords[1], coords[2]]);
    }

    let mut values = Vec::with_capacity(ns * nt * nc);
    for _ in 0..ns * nt {
        let (i, line) = lines
            .next()
            .ok_or_else(|| parse_err(path, 0, "truncated data block"))?;
        let mut count = 0;
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(path, i + 1, "bad trace value"))?;
            values.push(v);
            count += 1;
        }
        if count != nc {
            return Err(parse_err(
                path,
                i + 1,
                format!("expected {nc} components, got {count}"),
            ));
        }
    }
    if lines.next().is_some() {
        return Err(parse_err(path, 0, "trailing data after trace block"));
    }
    Ok(TraceSet::from_values(positions, dt, nt, nc, values)?)
}

/// Write an indicator grid: header
/// `TDSM-GRID v1 <dim> <n...> <min max ...> <sigma> <T>`, then the values
/// row-major (x fastest), one per line.
pub fn write_grid(path: &Path, grid: &IndicatorGrid) -> Result<(), IoError> {
    let g = &grid.grid;
    let mut out = String::with_capacity(grid.values.len() * 26 + 128);
    write!(out, "TDSM-GRID v1 {}", g.dim).unwrap();
    for _ in 0..g.dim {
        write!(out, " {}", g.n_per_axis).unwrap();
    }
    for axis in 0..g.dim {
        write!(
            out,
            " {} {}",
            fmt_f64(g.extents[axis][0]),
            fmt_f64(g.extents[axis][1])
        )
        .unwrap();
    }
    writeln!(out, " {} {}", fmt_f64(grid.sigma), fmt_f64(grid.t_final)).unwrap();
    for v in &grid.values {
        out.push_str(&fmt_f64(*v));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

pub fn read_grid(path: &Path) -> Result<IndicatorGrid, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() < 3 || tokens[0] != "TDSM-GRID" || tokens[1] != "v1" {
        return Err(parse_err(path, 1, "expected `TDSM-GRID v1 ...` header"));
    }
    let dim: usize = tokens[2]
        .parse()
        .map_err(|_| parse_err(path, 1, "bad dimension"))?;
    let expected = 3 + dim + 2 * dim + 2;
    if tokens.len() != expected {
        return Err(parse_err(
            path,
            1,
            format!("expected {expected} header fields, got {}", tokens.len()),
        ));
    }
    let mut n_per_axis = 0usize;
    for k in 0..dim {
        let n: usize = tokens[3 + k]
            .parse()
            .map_err(|_| parse_err(path, 1, "bad axis size"))?;
        if k == 0 {
            n_per_axis = n;
        } else if n != n_per_axis {
            return Err(parse_err(path, 1, "per-axis sizes must agree"));
        }
    }
    let mut extents = [[0.0f64; 2]; 3];
    for axis in 0..dim {
        for side in 0..2 {
            extents[axis][side] = tokens[3 + dim + 2 * axis + side]
                .parse()
                .map_err(|_| parse_err(path, 1, "bad extent"))?;
        }
    }
    let sigma: f64 = tokens[expected - 2]
        .parse()
        .map_err(|_| parse_err(path, 1, "bad sigma"))?;
    let t_final: f64 = tokens[expected - 1]
        .parse()
        .map_err(|_| parse_err(path, 1, "bad T"))?;

    let grid = SamplingGrid::new(dim, extents, n_per_axis)?;
    let mut values = Vec::with_capacity(grid.n_points());
    for (i, line) in lines {
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|_| parse_err(path, i + 1, "bad grid value"))?;
        values.push(v);
    }
    if values.len() != grid.n_points() {
        return Err(parse_err(
            path,
            0,
            format!("expected {} values, got {}", grid.n_points(), values.len()),
        ));
    }
    Ok(IndicatorGrid {
        grid,
        values,
        sigma,
        t_final,
        provenance: format!("file:{}", path.display()),
    })
}

/// Rasterize a normalized 2D grid to binary 8-bit PGM. Rows run
/// top-to-bottom with descending y (image convention), as stated in the
/// comment line.
pub fn write_pgm(path: &Path, grid: &IndicatorGrid) -> Result<(), IoError> {
    let g = &grid.grid;
    if g.dim != 2 {
        return Err(IoError::PgmNeeds2d(g.dim));
    }
    let max = grid.values.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Err(IoError::PgmZeroGrid);
    }
    let n = g.n_per_axis;
    let mut out = Vec::with_capacity(n * n + 128);
    out.extend_from_slice(
        format!("P5\n# rows top-to-bottom correspond to descending y\n{n} {n}\n255\n").as_bytes(),
    );
    for row in 0..n {
        let iy = n - 1 - row;
        for ix in 0..n {
            let v = grid.values[g.compose([ix, iy, 0])] / max;
            out.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    atomic_write(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::TraceSet;
    use crate::scene::SamplingGrid;

    #[test]
    fn trace_round_trip_is_lossless() {
        let positions = vec![[6.0, 0.0, 0.0], [0.0, 6.0, 0.0], [-6.0, 0.0, 0.0]];
        let mut traces = TraceSet::zeroed(positions, 2e-10, 12, 2);
        for m in 0..3 {
            for n in 1..12 {
                for c in 0..2 {
                    let v = ((m * 100 + n * 7 + c) as f64 * 0.7311).sin() * 1e-4
                        / (1.0 + n as f64);
                    traces.set(m, n, c, v);
                }
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traces.txt");
        write_traces(&path, &traces).unwrap();
        let back = read_traces(&path).unwrap();
        assert_eq!(back.values(), traces.values());
        assert_eq!(back.receiver_positions, traces.receiver_positions);
        assert_eq!(back.dt, traces.dt);
    }

    #[test]
    fn grid_round_trip_is_lossless() {
        let grid = SamplingGrid::new(2, [[-2.5, 2.5], [-2.5, 2.5], [0.0, 0.0]], 6).unwrap();
        let values: Vec<f64> = (0..36).map(|l| (l as f64 * 0.317).sin().abs()).collect();
        let ind = IndicatorGrid {
            grid,
            values,
            sigma: 2e7,
            t_final: 2e-7,
            provenance: "test".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.txt");
        write_grid(&path, &ind).unwrap();
        let back = read_grid(&path).unwrap();
        assert_eq!(back.values, ind.values);
        assert_eq!(back.grid, ind.grid);
        assert_eq!(back.sigma, ind.sigma);
        assert_eq!(back.t_final, ind.t_final);
    }

    #[test]
    fn rejects_malformed_trace_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "TDSM-TRACES v2 1 2 1 1e-9\n").unwrap();
        assert!(read_traces(&path).is_err());
        std::fs::write(&path, "TDSM-TRACES v1 1 2 1 1e-9\n0 0 0\n0.0\n").unwrap();
        assert!(read_traces(&path).is_err(), "truncated data must fail");
    }

    #[test]
    fn pgm_writes_image_header_and_payload() {
        let grid = SamplingGrid::new(2, [[-1.0, 1.0], [-1.0, 1.0], [0.0, 0.0]], 4).unwrap();
        let mut values = vec![0.0; 16];
        values[5] = 2.0;
        let ind = IndicatorGrid {
            grid,
            values,
            sigma: 0.0,
            t_final: 1e-8,
            provenance: "test".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        write_pgm(&path, &ind).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5\n"));
        assert_eq!(bytes[bytes.len() - 16..].iter().filter(|&&b| b == 255).count(), 1);
    }
}
