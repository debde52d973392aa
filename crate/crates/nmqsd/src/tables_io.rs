//! Plain-text dump and reload of coefficient tables.
//!
//! Layout:
//!
//! ```text
//! format = nmqsd-tables-1
//! step = <Δc>
//! points = <N>
//! omega_a = ... (one line per model parameter, gamma last)
//! [fields]
//! t,re_f1,im_f1,re_f2,im_f2,re_f3,im_f3,re_f4,im_f4
//! <N rows>
//! [f5]
//! <N rows; row k is "k,re,im,re,im,..." for s' = 0, Δc, ..., kΔc>
//! ```
//!
//! F5 is stored row-major by t index with s' ascending. Numbers use the
//! shortest representation that reads back to the same `f64`. The shift
//! kernel is not stored; it is rebuilt from F5 and the OU kernel on load.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nmqsd_core::fields::shift_table;
use nmqsd_core::{CoeffTables, KernelSpec, ModelParams, C64};

use crate::error::{RunError, RunResult};

const FORMAT: &str = "nmqsd-tables-1";
const FIELDS_COLUMNS: &str = "t,re_f1,im_f1,re_f2,im_f2,re_f3,im_f3,re_f4,im_f4";

pub fn to_text(t: &CoeffTables) -> String {
    let p = &t.params;
    let mut s = String::new();
    let _ = writeln!(s, "format = {FORMAT}");
    let _ = writeln!(s, "step = {}", t.step);
    let _ = writeln!(s, "points = {}", t.points());
    for (k, v) in param_pairs(p) {
        let _ = writeln!(s, "{k} = {v}");
    }
    s.push_str("[fields]\n");
    s.push_str(FIELDS_COLUMNS);
    s.push('\n');
    for k in 0..t.points() {
        let _ = write!(s, "{}", k as f64 * t.step);
        for j in 0..4 {
            let z = t.f[j][k];
            let _ = write!(s, ",{},{}", z.re, z.im);
        }
        s.push('\n');
    }
    s.push_str("[f5]\n");
    for k in 0..t.points() {
        let _ = write!(s, "{k}");
        for z in t.f5_row(k) {
            let _ = write!(s, ",{},{}", z.re, z.im);
        }
        s.push('\n');
    }
    s
}

fn param_pairs(p: &ModelParams) -> [(&'static str, f64); 7] {
    [
        ("omega_a", p.omega_a),
        ("omega_b", p.omega_b),
        ("j_xy", p.j_xy),
        ("j_z", p.j_z),
        ("kappa_a", p.kappa_a),
        ("kappa_b", p.kappa_b),
        ("gamma", p.gamma),
    ]
}

pub fn from_text(text: &str, path: &Path) -> RunResult<CoeffTables> {
    let err = |msg: String| RunError::TableFormat { path: path.to_path_buf(), msg };
    let mut lines = text.lines().enumerate();
    let mut header = Vec::new();
    for (_, line) in lines.by_ref() {
        if line == "[fields]" {
            break;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| err(format!("bad header line {line:?}")))?;
        header.push((k.trim().to_string(), v.trim().to_string()));
    }
    let value = |key: &str| {
        header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str()).ok_or_else(|| err(format!("missing `{key}`")))
    };
    if value("format")? != FORMAT {
        return Err(err(format!("unsupported format {:?}", value("format")?)));
    }
    let num = |key: &str| value(key)?.parse::<f64>().map_err(|_| err(format!("bad number for `{key}`")));
    let step = num("step")?;
    let n: usize = value("points")?.parse().map_err(|_| err("bad `points`".into()))?;
    let params = ModelParams {
        omega_a: num("omega_a")?,
        omega_b: num("omega_b")?,
        j_xy: num("j_xy")?,
        j_z: num("j_z")?,
        kappa_a: num("kappa_a")?,
        kappa_b: num("kappa_b")?,
        gamma: num("gamma")?,
    };
    let mut expect = |want: &str| match lines.next() {
        Some((_, line)) if line == want => Ok(()),
        _ => Err(err(format!("expected {want:?}"))),
    };
    expect(FIELDS_COLUMNS)?;
    let rows: Vec<(usize, &str)> = lines.collect();
    if rows.len() != 2 * n + 1 || rows[n].1 != "[f5]" {
        return Err(err(format!("expected {n} field rows, \"[f5]\" and {n} f5 rows")));
    }
    let numbers = |(i, line): (usize, &str), want: usize| -> RunResult<Vec<f64>> {
        let vals = line
            .split(',')
            .map(str::parse::<f64>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| err(format!("line {}: bad number", i + 1)))?;
        if vals.len() != want {
            return Err(err(format!("line {}: expected {want} columns, got {}", i + 1, vals.len())));
        }
        Ok(vals)
    };
    let pair = |v: &[f64], i: usize| C64::new(v[i], v[i + 1]);
    let mut f: [Vec<C64>; 4] = core::array::from_fn(|_| Vec::with_capacity(n));
    for &r in &rows[..n] {
        let v = numbers(r, 9)?;
        for (j, fj) in f.iter_mut().enumerate() {
            fj.push(pair(&v, 1 + 2 * j));
        }
    }
    let mut f5 = Vec::with_capacity(n * (n + 1) / 2);
    for (k, &r) in rows[n + 1..].iter().enumerate() {
        let v = numbers(r, 1 + 2 * (k + 1))?;
        if v[0] != k as f64 {
            return Err(err(format!("f5 row {k} labelled {}", v[0])));
        }
        f5.extend((0..=k).map(|c| pair(&v, 1 + 2 * c)));
    }
    let shift = shift_table(step, &f5, n, &KernelSpec::ou(params.gamma))
        .map_err(|e| err(format!("shift kernel: {e}")))?;
    Ok(CoeffTables { step, params, f, f5, shift })
}

pub fn write(path: &Path, t: &CoeffTables) -> RunResult<()> {
    std::fs::write(path, to_text(t)).map_err(|e| RunError::io(path, e))
}

pub fn read(path: &Path) -> RunResult<CoeffTables> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    from_text(&text, path)
}

/// First `points` grid points of `t`.
pub fn truncate(t: &CoeffTables, points: usize) -> CoeffTables {
    let n = points.min(t.points());
    CoeffTables {
        step: t.step,
        params: t.params,
        f: core::array::from_fn(|j| t.f[j][..n].to_vec()),
        f5: t.f5[..n * (n + 1) / 2].to_vec(),
        shift: t.shift[..n * (n + 1) / 2].to_vec(),
    }
}

/// Cache file name for a parameter set and grid step.
pub fn cache_path(dir: &Path, p: &ModelParams, step: f64) -> PathBuf {
    let mut name = String::from("tables");
    for (k, v) in param_pairs(p) {
        let _ = write!(name, "_{k}{v}");
    }
    let _ = write!(name, "_step{step}.txt");
    dir.join(name)
}
