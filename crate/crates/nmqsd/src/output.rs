//! CSV files and the run manifest.
//!
//! CSV files start with `# key = value` metadata lines, then a header row.
//! Numbers use the shortest representation that reads back exactly, so
//! identical inputs give byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nmqsd_core::{NoisePath, ObservableSeries, Trajectory};

use crate::config::{RunConfig, KEYS};
use crate::error::{RunError, RunResult};

pub type Metadata = Vec<(String, String)>;

fn header(meta: &Metadata) -> String {
    let mut s = String::new();
    for (k, v) in meta {
        let _ = writeln!(s, "# {k} = {v}");
    }
    s
}

pub const ENSEMBLE_COLUMNS_PREFIX: [&str; 4] = ["t", "C", "C_stderr", "purity"];

pub fn ensemble_columns() -> Vec<String> {
    let mut cols: Vec<String> = ENSEMBLE_COLUMNS_PREFIX.iter().map(|s| s.to_string()).collect();
    for r in 1..=4 {
        for c in 1..=4 {
            cols.push(format!("re_rho{r}{c}"));
            cols.push(format!("im_rho{r}{c}"));
        }
    }
    cols.push("trace".into());
    cols
}

pub fn ensemble_csv(meta: &Metadata, s: &ObservableSeries) -> String {
    let mut out = header(meta);
    out.push_str(&ensemble_columns().join(","));
    out.push('\n');
    for k in 0..s.len() {
        let _ = write!(out, "{},{},{},{}", s.times[k], s.concurrence[k], s.concurrence_stderr[k], s.purity[k]);
        for r in 0..4 {
            for c in 0..4 {
                let z = s.rho[k][(r, c)];
                let _ = write!(out, ",{},{}", z.re, z.im);
            }
        }
        let _ = writeln!(out, ",{}", s.trace[k]);
    }
    out
}

pub const TRAJECTORY_COLUMNS: &str = "t,norm,re_c1,im_c1,re_c2,im_c2,re_c3,im_c3,re_c4,im_c4,dl2";

pub fn trajectory_csv(meta: &Metadata, tr: &Trajectory) -> String {
    let mut out = header(meta);
    out.push_str(TRAJECTORY_COLUMNS);
    out.push('\n');
    for p in &tr.points {
        let _ = write!(out, "{},{}", p.t, p.norm);
        for c in &p.c {
            let _ = write!(out, ",{},{}", c.re, c.im);
        }
        let _ = writeln!(out, ",{}", p.dl2);
    }
    out
}

pub fn noise_csv(meta: &Metadata, path: &NoisePath) -> String {
    let mut out = header(meta);
    out.push_str("t,re_zc,im_zc\n");
    for (t, z) in path.times().zip(&path.samples) {
        let _ = writeln!(out, "{t},{},{}", z.re, z.im);
    }
    out
}

/// Collects output files relative to the run directory.
#[derive(Debug)]
pub struct OutputDir {
    pub root: PathBuf,
    pub files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> RunResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| RunError::io(root, e))?;
        Ok(OutputDir { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> RunResult<()> {
        let path = self.root.join(name);
        std::fs::write(&path, contents).map_err(|e| RunError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

pub const MANIFEST_NAME: &str = "manifest.txt";

/// Run facts recorded after the configuration keys.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFacts {
    pub status: &'static str,
    pub coeff_points: usize,
    pub steps: usize,
    pub records: usize,
    pub wall_clock_s: f64,
    pub outputs: Vec<String>,
}

/// Configuration keys in fixed order, then `manifest.*` facts. The
/// configuration part can be passed back with `--config`.
pub fn manifest_text(cfg: &RunConfig, facts: &RunFacts) -> String {
    let mut s = String::from("# nmqsd run manifest\n");
    for k in KEYS {
        let _ = writeln!(s, "{k} = {}", cfg.get(k));
    }
    let _ = writeln!(s, "manifest.version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "manifest.status = {}", facts.status);
    let _ = writeln!(s, "manifest.coeff_points = {}", facts.coeff_points);
    let _ = writeln!(s, "manifest.steps = {}", facts.steps);
    let _ = writeln!(s, "manifest.records = {}", facts.records);
    let _ = writeln!(s, "manifest.wall_clock_s = {:.3}", facts.wall_clock_s);
    let _ = writeln!(s, "manifest.outputs = {}", facts.outputs.len());
    for (i, f) in facts.outputs.iter().enumerate() {
        let _ = writeln!(s, "manifest.output.{i} = {f}");
    }
    s
}
