//! CSV result tables, JSON sidecars and table dumps.
//!
//! Floats are written with 17 significant digits so every file reads back
//! to the exact values that produced it.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{kernel_row, KernelSpec};
use crate::lattice::{LatticeSpec, UniformGrid, WignerTable};
use crate::potential::PotentialSchedule;

pub const RESULT_HEADER: [&str; 5] = ["bin_center", "h0", "h1", "Q_hat", "stderr"];
pub const KERNEL_HEADER: [&str; 4] = ["slice", "u_index", "y_index", "weight"];
pub const WIGNER_HEADER: [&str; 4] = ["u0", "u1", "value", "lambda"];
pub const PSI_HEADER: [&str; 2] = ["re", "im"];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Per-bin results. Deterministic sources leave the counts and errors at zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub bin_center: Vec<f64>,
    pub h0: Vec<u64>,
    pub h1: Vec<u64>,
    pub q_hat: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl ResultTable {
    pub fn deterministic(bin_center: Vec<f64>, values: Vec<f64>) -> Self {
        let n = values.len();
        Self { bin_center, h0: vec![0; n], h1: vec![0; n], q_hat: values, stderr: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.bin_center.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bin_center.is_empty()
    }

    /// True when the file carries Monte Carlo errors.
    pub fn is_stochastic(&self) -> bool {
        self.stderr.iter().any(|s| *s > 0.0) || self.h0.iter().chain(&self.h1).any(|h| *h > 0)
    }
}

/// JSON sidecar written next to every result CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    /// Which operation produced the file (`sample`, `oracle`, ...).
    pub source: String,
    pub version: String,
    pub seed: Option<u64>,
    pub histories: Option<u64>,
    pub n_scale: Option<f64>,
    /// The fully defaulted job configuration.
    pub config: serde_json::Value,
    pub diagnostics: serde_json::Value,
}

impl Metadata {
    pub fn new(source: &str, config: serde_json::Value) -> Self {
        Self {
            source: source.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            histories: None,
            n_scale: None,
            config,
            diagnostics: serde_json::Value::Null,
        }
    }
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

fn check_header(path: &Path, found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if found.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(Error::Parse(format!(
            "{}: header {:?}, expected {}",
            path.display(),
            found.iter().collect::<Vec<_>>(),
            expected.join(",")
        )));
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse(format!("{}: line {line}: cannot parse {s:?}", path.display())))
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn write_result(dir: &Path, stem: &str, table: &ResultTable, meta: &Metadata) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(RESULT_HEADER).map_err(|e| csv_err(&path, e))?;
    for i in 0..table.len() {
        w.write_record([
            fmt_f64(table.bin_center[i]),
            table.h0[i].to_string(),
            table.h1[i].to_string(),
            fmt_f64(table.q_hat[i]),
            fmt_f64(table.stderr[i]),
        ])
        .map_err(|e| csv_err(&path, e))?;
    }
    w.flush()?;
    write_metadata(&sidecar_path(&path), meta)?;
    Ok(path)
}

pub fn read_result(path: &Path) -> Result<ResultTable> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    check_header(path, &header, &RESULT_HEADER)?;
    let mut t = ResultTable::default();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = i + 2;
        t.bin_center.push(parse_field(path, line, &rec[0])?);
        t.h0.push(parse_field(path, line, &rec[1])?);
        t.h1.push(parse_field(path, line, &rec[2])?);
        t.q_hat.push(parse_field(path, line, &rec[3])?);
        t.stderr.push(parse_field(path, line, &rec[4])?);
    }
    Ok(t)
}

pub fn write_metadata(path: &Path, meta: &Metadata) -> Result<()> {
    let mut text = serde_json::to_string_pretty(meta)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_metadata(path: &Path) -> Result<Metadata> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn read_psi_csv(path: &Path) -> Result<Vec<Complex64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    check_header(path, &header, &PSI_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        out.push(Complex64::new(parse_field(path, i + 2, &rec[0])?, parse_field(path, i + 2, &rec[1])?));
    }
    Ok(out)
}

pub fn write_psi_csv(path: &Path, psi: &[Complex64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(PSI_HEADER).map_err(|e| csv_err(path, e))?;
    for z in psi {
        w.write_record([fmt_f64(z.re), fmt_f64(z.im)]).map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// Grid of noise values `y_j = (j - (N - 1)) du`, `j = 0..2N-1`, wide enough
/// for every jump between two grid points.
pub fn dump_noise_grid(lattice: &LatticeSpec) -> UniformGrid {
    let n = lattice.n_points;
    let du = lattice.spacing();
    UniformGrid { start: -((n - 1) as f64) * du, spacing: du, len: 2 * n - 1 }
}

/// Kernel weights per chained slice and grid point on [`dump_noise_grid`].
/// Only stored (possibly nonzero) entries are written.
pub fn write_kernel_dump(
    path: &Path,
    lattice: &LatticeSpec,
    schedule: &PotentialSchedule,
    kernel: &KernelSpec,
) -> Result<()> {
    let grid = dump_noise_grid(lattice);
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(KERNEL_HEADER).map_err(|e| csv_err(path, e))?;
    for l in 1..lattice.n_slices {
        let pot = schedule.at(l);
        for i in 0..lattice.n_points {
            let row = kernel_row(lattice.point(i), pot, &grid, kernel)?;
            for (j, weight) in row.entries() {
                w.write_record([l.to_string(), i.to_string(), j.to_string(), fmt_f64(weight)])
                    .map_err(|e| csv_err(path, e))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_wigner_dump(path: &Path, lattice: &LatticeSpec, wigner: &WignerTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(WIGNER_HEADER).map_err(|e| csv_err(path, e))?;
    for a in 0..wigner.n {
        for b in 0..wigner.n {
            w.write_record([
                fmt_f64(lattice.point(a)),
                fmt_f64(lattice.point(b)),
                fmt_f64(wigner.value(a, b)),
                fmt_f64(wigner.lambda(a, b)),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for &x in &[0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0, -0.0, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            let digits = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count();
            assert_eq!(digits, 17);
        }
    }

    #[test]
    fn result_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = ResultTable {
            bin_center: vec![-0.5, 0.0, 0.5],
            h0: vec![1, 2, 3],
            h1: vec![4, 5, 6],
            q_hat: vec![0.1, -1e-17, 2.0 / 3.0],
            stderr: vec![0.01, 0.02, 0.03],
        };
        let mut meta = Metadata::new("sample", serde_json::json!({"v": 0.5}));
        meta.seed = Some(7);
        meta.n_scale = Some(123.456);
        let path = write_result(dir.path(), "sample", &t, &meta).unwrap();
        assert_eq!(read_result(&path).unwrap(), t);
        assert_eq!(read_metadata(&sidecar_path(&path)).unwrap(), meta);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("bin_center,h0,h1,Q_hat,stderr\n"));
    }

    #[test]
    fn psi_round_trip_and_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("psi.csv");
        let psi = vec![Complex64::new(0.5, -0.25), Complex64::new(1e-9, 3.0)];
        write_psi_csv(&path, &psi).unwrap();
        assert_eq!(read_psi_csv(&path).unwrap(), psi);
        fs::write(&path, "real,imag\n1,2\n").unwrap();
        assert!(matches!(read_psi_csv(&path), Err(Error::Parse(_))));
    }
}
