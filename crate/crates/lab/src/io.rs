//! File formats: flat binary dumps for ensembles and solutions, CSV export,
//! and the plot-data table.
//!
//! Binary layout (all values little-endian, 8 bytes each):
//!
//! ```text
//! header:  N (u64) | M (u64) | d (u64) | seed (u64) | T (f64)
//! W block: N · (M+1) · d  f64, row-major (path, node, component)
//! B block: N · (M+1)      f64, row-major (path, node)
//! ```
//!
//! A solution file extends the ensemble layout with three further blocks:
//!
//! ```text
//! Y block: N · (M+1)      f64
//! Z block: N · M · d      f64  (Z lives on intervals)
//! K block: N · (M+1)      f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use rbdsde_core::paths::{make_grid, PathEnsemble};
use rbdsde_core::solver::{DiscreteSolution, FStepMode, SolutionMeta};

use crate::error::{LabError, Result};

fn output_err(path: &Path, source: std::io::Error) -> LabError {
    LabError::Output {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> LabError {
    LabError::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Creates the directory (and parents) if needed.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| output_err(dir, e))
}

fn push_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    buf.reserve(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn header_bytes(ensemble: &PathEnsemble) -> Vec<u8> {
    let mut buf = Vec::with_capacity(40);
    buf.extend_from_slice(&(ensemble.n_paths() as u64).to_le_bytes());
    buf.extend_from_slice(&(ensemble.grid().steps() as u64).to_le_bytes());
    buf.extend_from_slice(&(ensemble.dim() as u64).to_le_bytes());
    buf.extend_from_slice(&ensemble.seed().to_le_bytes());
    buf.extend_from_slice(&ensemble.grid().horizon().to_le_bytes());
    buf
}

/// Writes an ensemble as a flat binary file.
pub fn dump_ensemble(ensemble: &PathEnsemble, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| output_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut buf = header_bytes(ensemble);
    push_f64s(&mut buf, ensemble.w_flat());
    push_f64s(&mut buf, ensemble.b_flat());
    w.write_all(&buf).map_err(|e| output_err(path, e))?;
    w.flush().map_err(|e| output_err(path, e))
}

/// Writes a solution as the ensemble format extended with Y/Z/K blocks.
pub fn dump_solution(sol: &DiscreteSolution, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| output_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut buf = header_bytes(sol.ensemble());
    push_f64s(&mut buf, sol.ensemble().w_flat());
    push_f64s(&mut buf, sol.ensemble().b_flat());
    push_f64s(&mut buf, sol.y_flat());
    push_f64s(&mut buf, sol.z_flat());
    push_f64s(&mut buf, sol.k_flat());
    w.write_all(&buf).map_err(|e| output_err(path, e))?;
    w.flush().map_err(|e| output_err(path, e))
}

struct BinReader<'p> {
    reader: BufReader<File>,
    path: &'p Path,
}

impl<'p> BinReader<'p> {
    fn open(path: &'p Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| format_err(path, format!("cannot open: {e}")))?;
        Ok(BinReader {
            reader: BufReader::new(file),
            path,
        })
    }

    fn u64(&mut self) -> Result<u64> {
        let mut bytes = [0u8; 8];
        self.reader
            .read_exact(&mut bytes)
            .map_err(|_| format_err(self.path, "truncated header"))?;
        Ok(u64::from_le_bytes(bytes))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn block(&mut self, len: usize, what: &str) -> Result<Vec<f64>> {
        let mut bytes = vec![0u8; len * 8];
        self.reader
            .read_exact(&mut bytes)
            .map_err(|_| format_err(self.path, format!("truncated {what} block")))?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect())
    }

    fn expect_eof(&mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.reader.read(&mut probe) {
            Ok(0) => Ok(()),
            Ok(_) => Err(format_err(self.path, "trailing bytes after final block")),
            Err(e) => Err(format_err(self.path, format!("read error: {e}"))),
        }
    }
}

struct Header {
    n: usize,
    m: usize,
    d: usize,
    seed: u64,
    horizon: f64,
}

fn read_header(r: &mut BinReader) -> Result<Header> {
    let n = r.u64()? as usize;
    let m = r.u64()? as usize;
    let d = r.u64()? as usize;
    let seed = r.u64()?;
    let horizon = r.f64()?;
    if n == 0 || m == 0 || d == 0 || !(horizon > 0.0) {
        return Err(format_err(
            r.path,
            format!("invalid header: N={n}, M={m}, d={d}, T={horizon}"),
        ));
    }
    // Guard against absurd headers before allocating blocks.
    let total = (n as u128) * ((m + 1) as u128) * ((d + 1) as u128) * 8;
    if total > 1 << 36 {
        return Err(format_err(r.path, "header implies an implausibly large file"));
    }
    Ok(Header {
        n,
        m,
        d,
        seed,
        horizon,
    })
}

fn read_ensemble_blocks(r: &mut BinReader, h: &Header) -> Result<Arc<PathEnsemble>> {
    let nodes = h.m + 1;
    let w = r.block(h.n * nodes * h.d, "W")?;
    let b = r.block(h.n * nodes, "B")?;
    let grid = make_grid(h.horizon, h.m).map_err(LabError::Core)?;
    PathEnsemble::from_parts(grid, h.n, h.d, h.seed, w, b).map_err(LabError::Core)
}

/// Reads an ensemble binary file.
pub fn load_ensemble(path: &Path) -> Result<Arc<PathEnsemble>> {
    let mut r = BinReader::open(path)?;
    let h = read_header(&mut r)?;
    let ensemble = read_ensemble_blocks(&mut r, &h)?;
    r.expect_eof()?;
    Ok(ensemble)
}

/// Reads a solution binary file. The recovered metadata is a placeholder
/// (`problem: "loaded"`): the file format does not carry solver settings.
pub fn load_solution(path: &Path) -> Result<DiscreteSolution> {
    let mut r = BinReader::open(path)?;
    let h = read_header(&mut r)?;
    let ensemble = read_ensemble_blocks(&mut r, &h)?;
    let nodes = h.m + 1;
    let y = r.block(h.n * nodes, "Y")?;
    let z = r.block(h.n * h.m * h.d, "Z")?;
    let k = r.block(h.n * nodes, "K")?;
    r.expect_eof()?;
    let meta = SolutionMeta {
        problem: "loaded".to_string(),
        seed: h.seed,
        basis_degree: 0,
        f_step_mode: FStepMode::Explicit,
        inner_picard_iters: 0,
        barrier_applied: false,
        exponent_p: 1.5,
    };
    DiscreteSolution::from_parts(ensemble, y, z, k, meta).map_err(LabError::Core)
}

/// Writes a solution as CSV with columns `path,step,t,Y,Z_1..Z_d,K`.
/// `Z` lives on intervals; the terminal row reports the convention `Z_M = 0`.
pub fn write_solution_csv(sol: &DiscreteSolution, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| output_err(path, e))?;
    let mut w = BufWriter::new(file);
    let m = sol.grid().steps();
    let d = sol.dim();
    let dt = sol.grid().dt();
    let mut header = String::from("path,step,t,Y");
    for j in 1..=d {
        header.push_str(&format!(",Z_{j}"));
    }
    header.push_str(",K");
    writeln!(w, "{header}").map_err(|e| output_err(path, e))?;
    for n in 0..sol.n_paths() {
        for i in 0..=m {
            let t = i as f64 * dt;
            let mut row = format!("{n},{i},{t},{}", sol.y(n, i));
            for j in 0..d {
                let z = if i < m { sol.z(n, i, j) } else { 0.0 };
                row.push_str(&format!(",{z}"));
            }
            row.push_str(&format!(",{}", sol.k(n, i)));
            writeln!(w, "{row}").map_err(|e| output_err(path, e))?;
        }
    }
    w.flush().map_err(|e| output_err(path, e))
}

/// One row of the long-format plot table.
#[derive(Clone, Debug)]
pub struct PlotRow {
    pub series: String,
    pub x: f64,
    pub y: f64,
}

impl PlotRow {
    pub fn new(series: impl Into<String>, x: f64, y: f64) -> PlotRow {
        PlotRow {
            series: series.into(),
            x,
            y,
        }
    }
}

/// Writes `plotdata.csv` with columns `series,x,y`.
pub fn write_plotdata(rows: &[PlotRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| output_err(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "series,x,y").map_err(|e| output_err(path, e))?;
    for row in rows {
        writeln!(w, "{},{},{}", row.series, row.x, row.y).map_err(|e| output_err(path, e))?;
    }
    w.flush().map_err(|e| output_err(path, e))
}

/// Writes a string to a file, mapping failures to output errors.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| output_err(path, e))
}
