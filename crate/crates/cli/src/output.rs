//! Plain-text outputs: diagnostics table, snapshots, rates.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sldg_core::driver::{DiagnosticsRecord, Observer, Rates, ReversibilityError};
use sldg_core::{DGField, Error, Result};

pub const DIAGNOSTICS_HEADER: &str =
    "t,e_l2,mass,l1,l2,energy,entropy,rel_mass,rel_l1,rel_l2,rel_energy,rel_entropy";

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::Output(format!("{}: {e}", path.display()))
}

/// `f_t<time>.dat` with the time printed without trailing zeros.
pub fn snapshot_name(t: f64) -> String {
    let mut s = format!("{t:.6}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    format!("f_t{s}.dat")
}

pub fn diagnostics_row(r: &DiagnosticsRecord) -> String {
    let d = r.deviation;
    format!(
        "{:.10e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}",
        r.t, r.e_l2, r.mass, r.l1, r.l2, r.energy, r.entropy, d[0], d[1], d[2], d[3], d[4]
    )
}

/// Writes cell-center samples, one `x v f` line per cell.
pub fn write_snapshot(path: &Path, t: f64, f: &DGField) -> Result<()> {
    let file = File::create(path).map_err(|e| io(path, e))?;
    let mut w = BufWriter::new(file);
    let m = f.mesh();
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "# t = {t}")?;
        writeln!(w, "# cell-center samples of f on a {}x{} mesh", m.nx(), m.nv())?;
        writeln!(w, "# x v f")?;
        for (x, v, y) in f.cell_center_samples() {
            writeln!(w, "{x:.12e} {v:.12e} {y:.16e}")?;
        }
        w.flush()
    };
    body().map_err(|e| io(path, e))
}

pub fn write_rates(path: &Path, rates: &Rates) -> Result<()> {
    let mut s = format!("gamma1 = {:.6}\ngamma2 = {:.6}\n# peak t log_e\n", rates.gamma1, rates.gamma2);
    for (n, p) in rates.peaks.iter().enumerate() {
        s.push_str(&format!("{} {:.6} {:.8}\n", n + 1, p.t, p.log_e));
    }
    fs::write(path, s).map_err(|e| io(path, e))
}

pub fn write_reversibility(path: &Path, r: &ReversibilityError) -> Result<()> {
    let s = format!(
        "# l2 is normalized by the domain measure\nl2 = {:.6e}\nl2_absolute = {:.6e}\nlinf = {:.6e}\n",
        r.l2, r.l2_absolute, r.linf
    );
    fs::write(path, s).map_err(|e| io(path, e))
}

/// Streams diagnostics rows and snapshot files into a directory.
pub struct OutputWriter {
    dir: PathBuf,
    csv: BufWriter<File>,
    pub e_series: Vec<(f64, f64)>,
    pub snapshot_min: f64,
}

impl OutputWriter {
    /// Creates the directory and the diagnostics table; fails before any
    /// computation if the directory is unusable.
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let path = dir.join("diagnostics.csv");
        let file = File::create(&path).map_err(|e| io(&path, e))?;
        let mut csv = BufWriter::new(file);
        writeln!(csv, "{DIAGNOSTICS_HEADER}").map_err(|e| io(&path, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            csv,
            e_series: Vec::new(),
            snapshot_min: f64::INFINITY,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn finish(&mut self) -> Result<()> {
        let path = self.dir.join("diagnostics.csv");
        self.csv.flush().map_err(|e| io(&path, e))
    }
}

impl Observer for OutputWriter {
    fn on_diagnostics(&mut self, rec: &DiagnosticsRecord, _f: &DGField) -> Result<()> {
        self.e_series.push((rec.t, rec.e_l2));
        let path = self.dir.join("diagnostics.csv");
        writeln!(self.csv, "{}", diagnostics_row(rec)).map_err(|e| io(&path, e))
    }

    fn on_snapshot(&mut self, t: f64, f: &DGField) -> Result<()> {
        let min = f.cell_center_samples().iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
        self.snapshot_min = self.snapshot_min.min(min);
        write_snapshot(&self.dir.join(snapshot_name(t)), t, f)
    }
}
