//! File formats written by the command-line tool.
//!
//! * Binary PGM (P5), 8-bit, values mapped affinely from `[min, max]` of the
//!   field onto `[0, 255]`. A constant field maps to 0.
//! * A `.scale` sidecar next to every image holding `min max`, so pixel
//!   values can be mapped back to data scale.
//! * CSV with a header row and reals printed with 17 significant digits.
//! * Field dumps (`.field.csv`): one grid row per line, lossless.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::experiments::{BenchRow, RowStatus, Variant};
use crate::field::{Field, Grid};

/// Formats a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Encodes a field as binary PGM and returns the bytes with `(min, max)`.
pub fn encode_pgm(u: &Field) -> (Vec<u8>, (f64, f64)) {
    let g = u.grid();
    let (lo, hi) = u.min_max();
    let mut out = format!("P5\n{} {}\n255\n", g.cols(), g.rows()).into_bytes();
    let span = hi - lo;
    out.extend(u.values().iter().map(|&v| {
        if span > 0.0 {
            (((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }));
    (out, (lo, hi))
}

/// Parses a binary PGM written by [`encode_pgm`].
pub fn decode_pgm(bytes: &[u8]) -> io::Result<(Grid, Vec<u8>)> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated PGM header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("bad header"))?);
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad("expected an 8-bit P5 image"));
    }
    let cols: usize = fields[1].parse().map_err(|_| bad("bad width"))?;
    let rows: usize = fields[2].parse().map_err(|_| bad("bad height"))?;
    let grid = Grid::new(rows, cols).map_err(|e| bad(&e.to_string()))?;
    let pixels = bytes
        .get(pos..pos + grid.len())
        .ok_or_else(|| bad("truncated pixels"))?;
    Ok((grid, pixels.to_vec()))
}

/// Writes `<dir>/<stem>.pgm` and `<dir>/<stem>.scale`.
pub fn write_image(dir: &Path, stem: &str, u: &Field) -> io::Result<PathBuf> {
    let (bytes, (lo, hi)) = encode_pgm(u);
    let path = dir.join(format!("{stem}.pgm"));
    fs::write(&path, bytes)?;
    fs::write(
        dir.join(format!("{stem}.scale")),
        format!("{} {}\n", fmt_real(lo), fmt_real(hi)),
    )?;
    Ok(path)
}

/// Writes a lossless dump of the field, one grid row per line.
pub fn write_field_csv(path: &Path, u: &Field) -> io::Result<()> {
    let mut w = io::BufWriter::new(fs::File::create(path)?);
    let g = u.grid();
    for r in 0..g.rows() {
        let line: Vec<String> = (0..g.cols()).map(|c| fmt_real(u.get(r, c))).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()
}

pub fn read_field_csv(path: &Path) -> io::Result<Field> {
    let text = fs::read_to_string(path)?;
    let bad = |m: String| io::Error::new(io::ErrorKind::InvalidData, m);
    let mut values = Vec::new();
    let mut rows = 0;
    let mut cols = 0;
    for line in text.lines().filter(|l| !l.is_empty()) {
        let row: Vec<f64> = line
            .split(',')
            .map(|t| t.parse::<f64>().map_err(|e| bad(format!("{t}: {e}"))))
            .collect::<io::Result<_>>()?;
        if rows > 0 && row.len() != cols {
            return Err(bad("ragged field dump".into()));
        }
        cols = row.len();
        rows += 1;
        values.extend(row);
    }
    let grid = Grid::new(rows, cols).map_err(|e| bad(e.to_string()))?;
    Field::from_vec(grid, values).map_err(|e| bad(e.to_string()))
}

pub const BENCH_HEADER: [&str; 7] = [
    "delta",
    "mu",
    "dt",
    "variant",
    "iterations",
    "wall_seconds",
    "best_error",
];

pub fn write_bench_csv(path: &Path, rows: &[BenchRow]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(BENCH_HEADER)?;
    for r in rows {
        w.write_record([
            fmt_real(r.delta),
            fmt_real(r.mu),
            fmt_real(r.dt),
            r.variant.name().to_string(),
            r.iterations.to_string(),
            fmt_real(r.wall_seconds),
            fmt_real(r.best_error),
        ])?;
    }
    w.flush()
}

/// Reads a table written by [`write_bench_csv`]. The status column is not
/// stored: rows with a NaN error read back as blowups, the rest as converged.
pub fn read_bench_csv(path: &Path) -> io::Result<Vec<BenchRow>> {
    let bad = |m: String| io::Error::new(io::ErrorKind::InvalidData, m);
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != BENCH_HEADER {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let real = |i: usize| -> io::Result<f64> {
            rec[i]
                .parse()
                .map_err(|e| bad(format!("column {}: {e}", BENCH_HEADER[i])))
        };
        let best_error = real(6)?;
        rows.push(BenchRow {
            delta: real(0)?,
            mu: real(1)?,
            dt: real(2)?,
            variant: rec[3].parse::<Variant>().map_err(|e| bad(e.to_string()))?,
            iterations: rec[4]
                .parse()
                .map_err(|e| bad(format!("iterations: {e}")))?,
            wall_seconds: real(5)?,
            best_error,
            status: if best_error.is_nan() {
                RowStatus::Blowup
            } else {
                RowStatus::Converged
            },
        });
    }
    Ok(rows)
}

/// Human-readable aligned table.
pub fn format_bench_table(title: &str, rows: &[BenchRow]) -> String {
    let mut s = format!("{title}\n");
    s.push_str(&format!(
        "{:>6} {:>8} {:>9}  {:<16} {:>10} {:>11} {:>11}  {}\n",
        "delta", "mu", "dt", "variant", "iterations", "time (s)", "best error", "status"
    ));
    for r in rows {
        s.push_str(&format!(
            "{:>6} {:>8} {:>9}  {:<16} {:>10} {:>11.3} {:>11.3e}  {}\n",
            r.delta,
            r.mu,
            r.dt,
            r.variant.name(),
            r.iterations,
            r.wall_seconds,
            r.best_error,
            r.status.name()
        ));
    }
    s
}
