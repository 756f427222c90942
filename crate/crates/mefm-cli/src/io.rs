//! On-disk formats. Every format round-trips exactly: floats are printed
//! with 17 significant digits (CSV) or raw bits (binary).
//!
//! * tensor: CSV `t,i,j,value` with 1-based indices, or binary with magic
//!   `MEFM`, a little-endian u16 version, three little-endian u64 dims, and
//!   row-major little-endian doubles;
//! * effect series: CSV `t,index,value`;
//! * matrices: CSV `i,j,value`;
//! * blocks: CSV `index,t_start,t_end`, run-length encoding of the sparse
//!   (zero) stretches of each series, 1-based and inclusive;
//! * reports: pretty-printed JSON; summaries: one CSV row per metric.

use crate::args::FileFormat;
use crate::errors::{CliError, CliResult};
use mefm::dafl::{BlockSets, TuningResult};
use mefm::metrics::{MetricSummary, ReplicationReport};
use ndarray::{Array1, Array2, Array3};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const BIN_MAGIC: &[u8; 4] = b"MEFM";
const BIN_VERSION: u16 = 1;

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| CliError::io(path, e))?,
    ))
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).map_err(|e| CliError::io(path, e))?,
    ))
}

fn flush(mut w: BufWriter<File>, path: &Path) -> CliResult<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

// ---------------------------------------------------------------------------
// Tensors.

pub fn tensor_file_name(stem: &str, format: FileFormat) -> String {
    match format {
        FileFormat::Csv => format!("{stem}.csv"),
        FileFormat::Bin => format!("{stem}.bin"),
    }
}

pub fn write_tensor(path: &Path, a: &Array3<f64>, format: FileFormat) -> CliResult<()> {
    match format {
        FileFormat::Csv => write_tensor_csv(path, a),
        FileFormat::Bin => write_tensor_bin(path, a),
    }
}

fn write_tensor_csv(path: &Path, a: &Array3<f64>) -> CliResult<()> {
    let mut w = create(path)?;
    let (t_len, p, q) = a.dim();
    let mut line = String::with_capacity(64);
    (|| -> std::io::Result<()> {
        w.write_all(b"t,i,j,value\n")?;
        for t in 0..t_len {
            for i in 0..p {
                for j in 0..q {
                    line.clear();
                    use std::fmt::Write as _;
                    let _ = write!(
                        line,
                        "{},{},{},{:.16e}\n",
                        t + 1,
                        i + 1,
                        j + 1,
                        a[[t, i, j]]
                    );
                    w.write_all(line.as_bytes())?;
                }
            }
        }
        Ok(())
    })()
    .map_err(|e| CliError::io(path, e))?;
    flush(w, path)
}

fn write_tensor_bin(path: &Path, a: &Array3<f64>) -> CliResult<()> {
    let mut w = create(path)?;
    let (t_len, p, q) = a.dim();
    (|| -> std::io::Result<()> {
        w.write_all(BIN_MAGIC)?;
        w.write_all(&BIN_VERSION.to_le_bytes())?;
        for d in [t_len, p, q] {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in a.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    })()
    .map_err(|e| CliError::io(path, e))?;
    flush(w, path)
}

/// Reads either tensor format, telling them apart by the magic bytes.
pub fn read_tensor(path: &Path) -> CliResult<Array3<f64>> {
    let mut head = [0u8; 4];
    let mut r = open(path)?;
    let n = r.read(&mut head).map_err(|e| CliError::io(path, e))?;
    drop(r);
    if n == 4 && &head == BIN_MAGIC {
        read_tensor_bin(path)
    } else {
        read_tensor_csv(path)
    }
}

/// Reads `<dir>/<stem>.csv` or `<dir>/<stem>.bin`, whichever exists.
pub fn read_tensor_stem(dir: &Path, stem: &str) -> CliResult<Array3<f64>> {
    for format in [FileFormat::Csv, FileFormat::Bin] {
        let path = dir.join(tensor_file_name(stem, format));
        if path.exists() {
            return read_tensor(&path);
        }
    }
    Err(CliError::Io(format!(
        "{}: found neither {stem}.csv nor {stem}.bin",
        dir.display()
    )))
}

fn read_tensor_csv(path: &Path) -> CliResult<Array3<f64>> {
    let r = open(path)?;
    let mut lines = r.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == "t,i,j,value" => {}
        Some(Ok(h)) => return Err(CliError::malformed(path, format!("header {h:?}"))),
        Some(Err(e)) => return Err(CliError::io(path, e)),
        None => return Err(CliError::malformed(path, "empty file")),
    }
    let mut entries: Vec<(usize, usize, usize, f64)> = Vec::new();
    let mut dims = (0usize, 0usize, 0usize);
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let mut field = |what: &str| {
            parts.next().map(str::trim).ok_or_else(|| {
                CliError::malformed(path, format!("line {}: missing {what}", lineno + 2))
            })
        };
        let t: usize = parse(field("t")?, path, lineno)?;
        let i: usize = parse(field("i")?, path, lineno)?;
        let j: usize = parse(field("j")?, path, lineno)?;
        let v: f64 = parse(field("value")?, path, lineno)?;
        if t == 0 || i == 0 || j == 0 {
            return Err(CliError::malformed(
                path,
                format!("line {}: indices are 1-based", lineno + 2),
            ));
        }
        dims = (dims.0.max(t), dims.1.max(i), dims.2.max(j));
        entries.push((t - 1, i - 1, j - 1, v));
    }
    if entries.len() != dims.0 * dims.1 * dims.2 {
        return Err(CliError::malformed(
            path,
            format!("{} entries for dims {dims:?}", entries.len()),
        ));
    }
    let mut a = Array3::from_elem(dims, f64::NAN);
    for (t, i, j, v) in entries {
        a[[t, i, j]] = v;
    }
    if a.iter().any(|v| v.is_nan()) {
        return Err(CliError::malformed(path, "duplicate or missing cells"));
    }
    Ok(a)
}

fn read_tensor_bin(path: &Path) -> CliResult<Array3<f64>> {
    let mut r = open(path)?;
    let mut head = [0u8; 4 + 2 + 24];
    r.read_exact(&mut head).map_err(|e| CliError::io(path, e))?;
    if &head[..4] != BIN_MAGIC {
        return Err(CliError::malformed(path, "bad magic bytes"));
    }
    let version = u16::from_le_bytes([head[4], head[5]]);
    if version != BIN_VERSION {
        return Err(CliError::malformed(
            path,
            format!("unsupported version {version}"),
        ));
    }
    let dim = |k: usize| {
        u64::from_le_bytes(head[6 + 8 * k..14 + 8 * k].try_into().expect("8 bytes")) as usize
    };
    let dims = (dim(0), dim(1), dim(2));
    let n = dims.0 * dims.1 * dims.2;
    let mut buf = vec![0u8; 8 * n];
    r.read_exact(&mut buf).map_err(|e| CliError::io(path, e))?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(|e| CliError::io(path, e))? != 0 {
        return Err(CliError::malformed(path, "trailing bytes"));
    }
    let values: Vec<f64> = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Array3::from_shape_vec(dims, values).map_err(|e| CliError::malformed(path, e))
}

fn parse<T: std::str::FromStr>(s: &str, path: &Path, lineno: usize) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse()
        .map_err(|e| CliError::malformed(path, format!("line {}: {e} ({s:?})", lineno + 2)))
}

// ---------------------------------------------------------------------------
// Effect series (T × n, long form `t,index,value`).

pub fn write_effects(path: &Path, a: &Array2<f64>) -> CliResult<()> {
    let mut w = create(path)?;
    let (t_len, n) = a.dim();
    (|| -> std::io::Result<()> {
        w.write_all(b"t,index,value\n")?;
        for t in 0..t_len {
            for i in 0..n {
                writeln!(w, "{},{},{:.16e}", t + 1, i + 1, a[[t, i]])?;
            }
        }
        Ok(())
    })()
    .map_err(|e| CliError::io(path, e))?;
    flush(w, path)
}

pub fn read_effects(path: &Path) -> CliResult<Array2<f64>> {
    let r = open(path)?;
    let mut lines = r.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == "t,index,value" => {}
        Some(Ok(h)) => return Err(CliError::malformed(path, format!("header {h:?}"))),
        Some(Err(e)) => return Err(CliError::io(path, e)),
        None => return Err(CliError::malformed(path, "empty file")),
    }
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut dims = (0usize, 0usize);
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let (t, i, v) = match (parts.next(), parts.next(), parts.next()) {
            (Some(t), Some(i), Some(v)) => (
                parse::<usize>(t, path, lineno)?,
                parse::<usize>(i, path, lineno)?,
                parse::<f64>(v, path, lineno)?,
            ),
            _ => {
                return Err(CliError::malformed(
                    path,
                    format!("line {}: need t,index,value", lineno + 2),
                ))
            }
        };
        if t == 0 || i == 0 {
            return Err(CliError::malformed(
                path,
                format!("line {}: indices are 1-based", lineno + 2),
            ));
        }
        dims = (dims.0.max(t), dims.1.max(i));
        entries.push((t - 1, i - 1, v));
    }
    if entries.len() != dims.0 * dims.1 {
        return Err(CliError::malformed(
            path,
            format!("{} entries for dims {dims:?}", entries.len()),
        ));
    }
    let mut a = Array2::from_elem(dims, f64::NAN);
    for (t, i, v) in entries {
        a[[t, i]] = v;
    }
    if a.iter().any(|v| v.is_nan()) {
        return Err(CliError::malformed(path, "duplicate or missing cells"));
    }
    Ok(a)
}

/// The base effect is a single series stored as an effects file with one index.
pub fn write_mu(path: &Path, mu: &Array1<f64>) -> CliResult<()> {
    let col = mu.view().insert_axis(ndarray::Axis(1)).to_owned();
    write_effects(path, &col)
}

pub fn read_mu(path: &Path) -> CliResult<Array1<f64>> {
    let a = read_effects(path)?;
    if a.ncols() != 1 {
        return Err(CliError::malformed(
            path,
            format!("{} series, expected 1", a.ncols()),
        ));
    }
    Ok(a.column(0).to_owned())
}

// ---------------------------------------------------------------------------
// Matrices (`i,j,value`).

pub fn write_matrix(path: &Path, a: &Array2<f64>) -> CliResult<()> {
    let mut w = create(path)?;
    let (rows, cols) = a.dim();
    (|| -> std::io::Result<()> {
        w.write_all(b"i,j,value\n")?;
        for i in 0..rows {
            for j in 0..cols {
                writeln!(w, "{},{},{:.16e}", i + 1, j + 1, a[[i, j]])?;
            }
        }
        Ok(())
    })()
    .map_err(|e| CliError::io(path, e))?;
    flush(w, path)
}

pub fn read_matrix(path: &Path) -> CliResult<Array2<f64>> {
    let r = open(path)?;
    let mut lines = r.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == "i,j,value" => {}
        Some(Ok(h)) => return Err(CliError::malformed(path, format!("header {h:?}"))),
        Some(Err(e)) => return Err(CliError::io(path, e)),
        None => return Err(CliError::malformed(path, "empty file")),
    }
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut dims = (0usize, 0usize);
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let (i, j, v) = match (parts.next(), parts.next(), parts.next()) {
            (Some(i), Some(j), Some(v)) => (
                parse::<usize>(i, path, lineno)?,
                parse::<usize>(j, path, lineno)?,
                parse::<f64>(v, path, lineno)?,
            ),
            _ => {
                return Err(CliError::malformed(
                    path,
                    format!("line {}: need i,j,value", lineno + 2),
                ))
            }
        };
        if i == 0 || j == 0 {
            return Err(CliError::malformed(
                path,
                format!("line {}: indices are 1-based", lineno + 2),
            ));
        }
        dims = (dims.0.max(i), dims.1.max(j));
        entries.push((i - 1, j - 1, v));
    }
    if entries.len() != dims.0 * dims.1 {
        return Err(CliError::malformed(
            path,
            format!("{} entries for dims {dims:?}", entries.len()),
        ));
    }
    let mut a = Array2::from_elem(dims, f64::NAN);
    for (i, j, v) in entries {
        a[[i, j]] = v;
    }
    if a.iter().any(|v| v.is_nan()) {
        return Err(CliError::malformed(path, "duplicate or missing cells"));
    }
    Ok(a)
}

// ---------------------------------------------------------------------------
// Sparse blocks (run-length encoded zero stretches).

pub fn write_blocks(path: &Path, blocks: &[BlockSets]) -> CliResult<()> {
    let mut w = create(path)?;
    (|| -> std::io::Result<()> {
        w.write_all(b"index,t_start,t_end\n")?;
        for (i, b) in blocks.iter().enumerate() {
            let mut run: Option<(usize, usize)> = None;
            for &t in &b.sparse {
                run = match run {
                    Some((s, e)) if t == e + 1 => Some((s, t)),
                    Some((s, e)) => {
                        writeln!(w, "{},{},{}", i + 1, s + 1, e + 1)?;
                        Some((t, t))
                    }
                    None => Some((t, t)),
                };
            }
            if let Some((s, e)) = run {
                writeln!(w, "{},{},{}", i + 1, s + 1, e + 1)?;
            }
        }
        Ok(())
    })()
    .map_err(|e| CliError::io(path, e))?;
    flush(w, path)
}

/// Inverse of [`write_blocks`]; the series count and length come from the
/// effects file the blocks belong to.
pub fn read_blocks(path: &Path, n_series: usize, t_len: usize) -> CliResult<Vec<BlockSets>> {
    let r = open(path)?;
    let mut lines = r.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == "index,t_start,t_end" => {}
        Some(Ok(h)) => return Err(CliError::malformed(path, format!("header {h:?}"))),
        Some(Err(e)) => return Err(CliError::io(path, e)),
        None => return Err(CliError::malformed(path, "empty file")),
    }
    let mut sparse = vec![vec![false; t_len]; n_series];
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let (i, s, e) = match (parts.next(), parts.next(), parts.next()) {
            (Some(i), Some(s), Some(e)) => (
                parse::<usize>(i, path, lineno)?,
                parse::<usize>(s, path, lineno)?,
                parse::<usize>(e, path, lineno)?,
            ),
            _ => {
                return Err(CliError::malformed(
                    path,
                    format!("line {}: need index,t_start,t_end", lineno + 2),
                ))
            }
        };
        if i == 0 || s == 0 || e < s || i > n_series || e > t_len {
            return Err(CliError::malformed(
                path,
                format!("line {}: run out of range", lineno + 2),
            ));
        }
        for t in s - 1..e {
            sparse[i - 1][t] = true;
        }
    }
    Ok(sparse
        .into_iter()
        .map(|mask| {
            let mut b = BlockSets {
                sparse: Vec::new(),
                dense: Vec::new(),
            };
            for (t, &is_sparse) in mask.iter().enumerate() {
                if is_sparse {
                    b.sparse.push(t);
                } else {
                    b.dense.push(t);
                }
            }
            b
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Penalty levels and tuning curves.

pub fn write_lambdas(path: &Path, alpha: &[TuningResult], beta: &[TuningResult]) -> CliResult<()> {
    let mut w = create(path)?;
    (|| -> std::io::Result<()> {
        w.write_all(b"family,index,lambda\n")?;
        for (family, results) in [("alpha", alpha), ("beta", beta)] {
            for (i, r) in results.iter().enumerate() {
                writeln!(w, "{family},{},{:.16e}", i + 1, r.chosen_lambda)?;
            }
        }
        Ok(())
    })()
    .map_err(|e| CliError::io(path, e))?;
    flush(w, path)
}

/// Reads a lambda file back into (alpha, beta) vectors ordered by index.
pub fn read_lambdas(path: &Path) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let r = open(path)?;
    let mut lines = r.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == "family,index,lambda" => {}
        Some(Ok(h)) => return Err(CliError::malformed(path, format!("header {h:?}"))),
        Some(Err(e)) => return Err(CliError::io(path, e)),
        None => return Err(CliError::malformed(path, "empty file")),
    }
    let mut alpha: Vec<(usize, f64)> = Vec::new();
    let mut beta: Vec<(usize, f64)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let (family, i, v) = match (parts.next(), parts.next(), parts.next()) {
            (Some(f), Some(i), Some(v)) => (
                f,
                parse::<usize>(i, path, lineno)?,
                parse::<f64>(v, path, lineno)?,
            ),
            _ => {
                return Err(CliError::malformed(
                    path,
                    format!("line {}: need family,index,lambda", lineno + 2),
                ))
            }
        };
        match family {
            "alpha" => alpha.push((i, v)),
            "beta" => beta.push((i, v)),
            other => {
                return Err(CliError::malformed(
                    path,
                    format!("line {}: unknown family {other:?}", lineno + 2),
                ))
            }
        }
    }
    let order = |mut v: Vec<(usize, f64)>| {
        v.sort_by_key(|&(i, _)| i);
        v.into_iter().map(|(_, x)| x).collect::<Vec<f64>>()
    };
    Ok((order(alpha), order(beta)))
}

pub fn write_cp_curves(
    path: &Path,
    alpha: &[TuningResult],
    beta: &[TuningResult],
) -> CliResult<()> {
    let mut w = create(path)?;
    (|| -> std::io::Result<()> {
        w.write_all(b"family,index,lambda,cp\n")?;
        for (family, results) in [("alpha", alpha), ("beta", beta)] {
            for (i, r) in results.iter().enumerate() {
                for (l, c) in r.lambda_grid.iter().zip(&r.cp_values) {
                    writeln!(w, "{family},{},{l:.16e},{c:.16e}", i + 1)?;
                }
            }
        }
        Ok(())
    })()
    .map_err(|e| CliError::io(path, e))?;
    flush(w, path)
}

// ---------------------------------------------------------------------------
// Reports and summaries.

pub fn write_report(path: &Path, report: &ReplicationReport) -> CliResult<()> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Io(format!("serializing report: {e}")))?;
    std::fs::write(path, json + "\n").map_err(|e| CliError::io(path, e))
}

pub fn read_report(path: &Path) -> CliResult<ReplicationReport> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::malformed(path, e))
}

/// Summary rows plus a fixed trailing row recording how many replications
/// failed; numbers print deterministically so identical runs produce
/// identical bytes.
pub fn write_summary(
    path: &Path,
    scenario: &str,
    rows: &[MetricSummary],
    failed: usize,
    reps: u64,
) -> CliResult<()> {
    let mut w = create(path)?;
    (|| -> std::io::Result<()> {
        w.write_all(b"scenario,metric,mean,sd,median,n\n")?;
        for r in rows {
            let sd = r.sd.map(|s| format!("{s:.16e}")).unwrap_or_default();
            writeln!(
                w,
                "{scenario},{},{:.16e},{sd},{:.16e},{}",
                r.metric, r.mean, r.median, r.n
            )?;
        }
        writeln!(
            w,
            "{scenario},failed_replications,{failed},,{failed},{reps}"
        )?;
        Ok(())
    })()
    .map_err(|e| CliError::io(path, e))?;
    flush(w, path)
}

// ---------------------------------------------------------------------------
// Plain text (configuration files).

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}
