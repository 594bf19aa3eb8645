use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use sha2::{Digest, Sha256};

use super::config::TrajectoryFormat;
use crate::error::{Error, Result};
use crate::hum::ControlSignal;
use crate::spectral::{sobolev_norm, to_physical, PeriodicGrid, SpectralField, Trajectory};

/// Float with 17 significant digits, the shortest width that round-trips every `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        // CSV readers understand these; JSON gets null instead.
        format!("{v}")
    }
}

/// Pretty JSON with every float at 17 significant digits.
struct SigFormatter(PrettyFormatter<'static>);

impl Formatter for SigFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

fn io_err(path: &Path, e: io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Output directory that records the hash of every file it writes.
pub struct Artifacts {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
        self.files.insert(name.to_string(), sha256_hex(contents.as_bytes()));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, &to_json(value))
    }

    pub fn files(&self) -> &BTreeMap<String, String> {
        &self.files
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn row(values: impl IntoIterator<Item = f64>) -> String {
    let cells: Vec<String> = values.into_iter().map(fmt_f64).collect();
    cells.join(",")
}

/// `t` followed by samples `u(x_j, t)` or mode magnitudes `|û_k(t)|`.
pub fn trajectory_csv(traj: &Trajectory, format: TrajectoryFormat, every: usize) -> String {
    let grid = traj.grid();
    let mut out = String::from("t");
    match format {
        TrajectoryFormat::Physical => {
            for j in 0..grid.n_points() {
                out.push_str(&format!(",u_{j}"));
            }
        }
        TrajectoryFormat::Modes => {
            for k in 0..=grid.n_modes() {
                out.push_str(&format!(",abs_{k}"));
            }
        }
    }
    out.push('\n');
    for n in sampled(traj.len(), every) {
        let u = &traj.states()[n];
        let values: Vec<f64> = match format {
            TrajectoryFormat::Physical => to_physical(u),
            TrajectoryFormat::Modes => (0..=grid.n_modes() as i64).map(|k| u.coeff(k).norm()).collect(),
        };
        out.push_str(&row(std::iter::once(traj.time(n)).chain(values)));
        out.push('\n');
    }
    out
}

/// Indices `0, every, 2·every, …` and always the last one.
fn sampled(len: usize, every: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).step_by(every.max(1)).collect();
    if idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx
}

fn s_label(s: f64) -> String {
    format!("norm_s{s}")
}

pub fn norms_csv(traj: &Trajectory, indices: &[f64], every: usize) -> String {
    let mut out = String::from("t");
    for s in indices {
        out.push(',');
        out.push_str(&s_label(*s));
    }
    out.push('\n');
    for n in sampled(traj.len(), every) {
        let u = &traj.states()[n];
        let vals = indices.iter().map(|s| sobolev_norm(u, *s));
        out.push_str(&row(std::iter::once(traj.time(n)).chain(vals)));
        out.push('\n');
    }
    out
}

/// Physical fields over time, one row per level.
pub fn fields_csv(grid: &PeriodicGrid, dt: f64, fields: &[SpectralField]) -> String {
    let mut out = String::from("t");
    for j in 0..grid.n_points() {
        out.push_str(&format!(",h_{j}"));
    }
    out.push('\n');
    for (n, h) in fields.iter().enumerate() {
        out.push_str(&row(std::iter::once(n as f64 * dt).chain(to_physical(h))));
        out.push('\n');
    }
    out
}

/// Lossless signal export: `t`, then `Re k̂(j)`, `Im k̂(j)` for `j = 1..K`.
/// The first data line carries `dt`.
pub fn signal_csv(signal: &ControlSignal) -> String {
    let k = signal.grid().n_modes();
    let mut out = format!("# dt={}\nt", fmt_f64(signal.dt()));
    for j in 1..=k {
        out.push_str(&format!(",re_{j},im_{j}"));
    }
    out.push('\n');
    for (n, v) in signal.values().iter().enumerate() {
        let mut vals = vec![n as f64 * signal.dt()];
        for j in 1..=k as i64 {
            let c = v.coeff(j);
            vals.push(c.re);
            vals.push(c.im);
        }
        out.push_str(&row(vals));
        out.push('\n');
    }
    out
}

pub fn read_signal(path: &Path, grid: &PeriodicGrid) -> Result<ControlSignal> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let bad = |line: usize, msg: String| Error::Io {
        path: format!("{}:{line}", path.display()),
        message: msg,
    };
    let mut lines = text.lines().enumerate();
    let dt = match lines.next() {
        Some((_, l)) if l.starts_with("# dt=") => l[5..]
            .trim()
            .parse::<f64>()
            .map_err(|e| bad(1, format!("bad dt: {e}")))?,
        _ => return Err(bad(1, "missing '# dt=' header".into())),
    };
    let k = grid.n_modes();
    match lines.next() {
        Some((_, h)) if h.split(',').count() == 2 * k + 1 => {}
        _ => return Err(bad(2, format!("expected a header with {} columns", 2 * k + 1))),
    }
    let mut values = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let nums: std::result::Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let nums = nums.map_err(|e| bad(i + 1, e.to_string()))?;
        if nums.len() != 2 * k + 1 {
            return Err(bad(i + 1, format!("expected {} columns, got {}", 2 * k + 1, nums.len())));
        }
        let mut u = SpectralField::zeros(grid);
        for j in 1..=k {
            let c = Complex64::new(nums[2 * j - 1], nums[2 * j]);
            u.set_coeff(j as i64, c);
            u.set_coeff(-(j as i64), c.conj());
        }
        values.push(u);
    }
    ControlSignal::new(dt, values)
}
