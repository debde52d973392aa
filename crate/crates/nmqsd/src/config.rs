//! Run configuration: presets, flat `key = value` files and flag overrides.
//!
//! Precedence is flags over file over preset. Keys starting with
//! `manifest.` are ignored, so a run manifest can be fed back as a config.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nmqsd_core::fields::steps_in;
use nmqsd_core::{ModelParams, OuStart, StateVector, Unraveling, C64};

use crate::error::{RunError, RunResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

impl Preset {
    pub const ALL: [Preset; 6] = [Preset::Fig1, Preset::Fig2, Preset::Fig3, Preset::Fig4, Preset::Fig5, Preset::Fig6];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
        }
    }
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset {s:?} (expected fig1..fig6)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Linear,
    Nonlinear,
    /// Nonlinear equation with the noise-dependent `O5` term dropped.
    Approx,
}

impl Mode {
    pub fn unraveling(self) -> Unraveling {
        match self {
            Mode::Linear => Unraveling::Linear,
            Mode::Nonlinear | Mode::Approx => Unraveling::Nonlinear,
        }
    }

    pub fn drop_o5(self) -> bool {
        self == Mode::Approx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    /// One ensemble per (γ, initial state) curve.
    Ensemble,
    /// Individual trajectories with their coefficient and fluctuation records.
    Trajectories,
    /// Ensemble curves over a γ grid, also written as a γ × t surface.
    Surface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Concurrence,
    Purity,
}

macro_rules! keyword_enum {
    ($ty:ty, $what:literal, $($name:literal => $variant:expr),+ $(,)?) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok($variant),)+
                    _ => Err(format!(concat!("unknown ", $what, " {:?} (expected {})"), s, [$($name),+].join("|"))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $variant { return f.write_str($name); })+
                unreachable!()
            }
        }
    };
}

keyword_enum!(Mode, "mode", "linear" => Mode::Linear, "nonlinear" => Mode::Nonlinear, "approx" => Mode::Approx);
keyword_enum!(Experiment, "experiment", "ensemble" => Experiment::Ensemble, "trajectories" => Experiment::Trajectories, "surface" => Experiment::Surface);
keyword_enum!(Observable, "observable", "concurrence" => Observable::Concurrence, "purity" => Observable::Purity);

/// An initial state written as a signed sum of basis labels, e.g. `11+00`
/// or `10-01`; equal weights, normalised.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpec {
    pub text: String,
    pub psi: StateVector,
}

impl StateSpec {
    /// File-name friendly form: `+` becomes `p`, `-` becomes `m`.
    pub fn slug(&self) -> String {
        self.text.replace('+', "p").replace('-', "m")
    }
}

impl FromStr for StateSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let text: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut psi = StateVector::zero();
        let mut sign = 1.0;
        let mut rest = text.as_str();
        loop {
            let label = rest.get(..2).ok_or_else(|| format!("bad state {s:?}: expected a two-digit basis label"))?;
            let basis = StateVector::from_label(label).map_err(|e| format!("bad state {s:?}: {e}"))?;
            psi = psi + basis.scale(C64::new(sign, 0.0));
            rest = &rest[2..];
            match rest.chars().next() {
                None => break,
                Some('+') => sign = 1.0,
                Some('-') => sign = -1.0,
                Some(c) => return Err(format!("bad state {s:?}: unexpected {c:?}")),
            }
            rest = &rest[1..];
        }
        if psi.norm() == 0.0 {
            return Err(format!("bad state {s:?}: terms cancel"));
        }
        Ok(StateSpec { text, psi: psi.normalized() })
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub experiment: Experiment,
    pub omega_a: f64,
    pub omega_b: f64,
    pub j_xy: f64,
    pub j_z: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub gammas: Vec<f64>,
    pub states: Vec<StateSpec>,
    pub mode: Mode,
    /// Run every curve a second time with `O5` dropped.
    pub compare_approx: bool,
    pub trajectories: usize,
    pub seed: u64,
    pub dt: f64,
    pub coeff_dt: f64,
    pub horizon: f64,
    pub record_stride: usize,
    pub noise_start: OuStart,
    pub observable: Observable,
    pub workers: usize,
    pub out: PathBuf,
    pub svg: bool,
    /// Directory for coefficient-table dumps reused across runs.
    pub table_cache: Option<PathBuf>,
    /// Also write each trajectory's noise path (trajectories experiment).
    pub dump_noise: bool,
}

/// Keys in manifest order.
pub const KEYS: [&str; 25] = [
    "preset",
    "experiment",
    "omega_a",
    "omega_b",
    "j_xy",
    "j_z",
    "kappa_a",
    "kappa_b",
    "gamma",
    "states",
    "mode",
    "compare_approx",
    "trajectories",
    "seed",
    "dt",
    "coeff_dt",
    "horizon",
    "record_stride",
    "noise_start",
    "observable",
    "workers",
    "out",
    "svg",
    "table_cache",
    "dump_noise",
];

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn states(list: &[&str]) -> Vec<StateSpec> {
    list.iter().map(|s| s.parse().expect("preset state")).collect()
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            preset: None,
            experiment: Experiment::Ensemble,
            omega_a: 0.5,
            omega_b: 0.5,
            j_xy: 0.5,
            j_z: 0.1,
            kappa_a: 1.0,
            kappa_b: 1.0,
            gammas: vec![1.0],
            states: states(&["10"]),
            mode: Mode::Nonlinear,
            compare_approx: false,
            trajectories: 1000,
            seed: 1,
            dt: 0.01,
            coeff_dt: 0.02,
            horizon: 30.0,
            record_stride: 1,
            noise_start: OuStart::Stationary,
            observable: Observable::Concurrence,
            workers: default_workers(),
            out: PathBuf::from("out"),
            svg: false,
            table_cache: None,
            dump_noise: false,
        }
    }
}

impl RunConfig {
    pub fn preset(p: Preset) -> Self {
        let base = RunConfig { preset: Some(p), ..RunConfig::default() };
        match p {
            Preset::Fig1 => RunConfig {
                j_z: 0.0,
                gammas: vec![0.1, 0.3, 0.5, 1.0, 2.0, 5.0],
                states: states(&["11"]),
                ..base
            },
            Preset::Fig2 => RunConfig {
                experiment: Experiment::Surface,
                j_xy: 0.0,
                j_z: 0.0,
                gammas: vec![0.1, 0.2, 0.3, 0.5, 0.7, 1.0, 1.5, 2.0, 3.0, 5.0],
                states: states(&["11"]),
                ..base
            },
            Preset::Fig3 => RunConfig { gammas: vec![0.5, 1.0, 2.0], ..base },
            Preset::Fig4 => RunConfig {
                experiment: Experiment::Trajectories,
                trajectories: 8,
                horizon: 60.0,
                ..base
            },
            Preset::Fig5 => RunConfig {
                j_xy: 0.7,
                j_z: 0.3,
                states: states(&["11+00", "01+10", "10", "11"]),
                observable: Observable::Purity,
                ..base
            },
            Preset::Fig6 => RunConfig {
                j_z: 0.0,
                gammas: vec![0.3],
                states: states(&["10+01", "11+00", "11", "10"]),
                compare_approx: true,
                ..base
            },
        }
    }

    pub fn params(&self, gamma: f64) -> ModelParams {
        ModelParams {
            omega_a: self.omega_a,
            omega_b: self.omega_b,
            j_xy: self.j_xy,
            j_z: self.j_z,
            kappa_a: self.kappa_a,
            kappa_b: self.kappa_b,
            gamma,
        }
    }

    /// Base name for output files.
    pub fn name(&self) -> &'static str {
        self.preset.map_or("run", Preset::name)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key {
            "preset" => self.preset = if v.is_empty() || v == "custom" { None } else { Some(v.parse()?) },
            "experiment" => self.experiment = v.parse()?,
            "omega_a" => self.omega_a = number(v)?,
            "omega_b" => self.omega_b = number(v)?,
            "j_xy" => self.j_xy = number(v)?,
            "j_z" => self.j_z = number(v)?,
            "kappa_a" => self.kappa_a = number(v)?,
            "kappa_b" => self.kappa_b = number(v)?,
            "gamma" => self.gammas = list(v, number)?,
            "states" => self.states = list(v, |s| s.parse())?,
            "mode" => self.mode = v.parse()?,
            "compare_approx" => self.compare_approx = boolean(v)?,
            "trajectories" => self.trajectories = integer(v)?,
            "seed" => self.seed = integer(v)?,
            "dt" => self.dt = number(v)?,
            "coeff_dt" => self.coeff_dt = number(v)?,
            "horizon" => self.horizon = number(v)?,
            "record_stride" => self.record_stride = integer(v)?,
            "noise_start" => {
                self.noise_start = match v {
                    "stationary" => OuStart::Stationary,
                    "zero" => OuStart::Zero,
                    _ => return Err(format!("unknown noise start {v:?} (expected stationary|zero)")),
                }
            }
            "observable" => self.observable = v.parse()?,
            "workers" => self.workers = integer(v)?,
            "out" => self.out = PathBuf::from(v),
            "svg" => self.svg = boolean(v)?,
            "table_cache" => self.table_cache = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            "dump_noise" => self.dump_noise = boolean(v)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> String {
        let join = |xs: Vec<String>| xs.join(",");
        match key {
            "preset" => self.preset.map_or("custom", Preset::name).into(),
            "experiment" => self.experiment.to_string(),
            "omega_a" => self.omega_a.to_string(),
            "omega_b" => self.omega_b.to_string(),
            "j_xy" => self.j_xy.to_string(),
            "j_z" => self.j_z.to_string(),
            "kappa_a" => self.kappa_a.to_string(),
            "kappa_b" => self.kappa_b.to_string(),
            "gamma" => join(self.gammas.iter().map(f64::to_string).collect()),
            "states" => join(self.states.iter().map(StateSpec::to_string).collect()),
            "mode" => self.mode.to_string(),
            "compare_approx" => self.compare_approx.to_string(),
            "trajectories" => self.trajectories.to_string(),
            "seed" => self.seed.to_string(),
            "dt" => self.dt.to_string(),
            "coeff_dt" => self.coeff_dt.to_string(),
            "horizon" => self.horizon.to_string(),
            "record_stride" => self.record_stride.to_string(),
            "noise_start" => match self.noise_start {
                OuStart::Stationary => "stationary".into(),
                OuStart::Zero => "zero".into(),
            },
            "observable" => self.observable.to_string(),
            "workers" => self.workers.to_string(),
            "out" => self.out.display().to_string(),
            "svg" => self.svg.to_string(),
            "table_cache" => self.table_cache.as_ref().map_or(String::new(), |p| p.display().to_string()),
            "dump_noise" => self.dump_noise.to_string(),
            _ => panic!("unknown key {key}"),
        }
    }

    /// Checks everything that can be checked before any compute.
    pub fn validate(&self) -> RunResult<()> {
        let bad = |key: &str, msg: &str| Err(RunError::config(format!("{key}: {msg}")));
        for (key, x) in [
            ("omega_a", self.omega_a),
            ("omega_b", self.omega_b),
            ("j_xy", self.j_xy),
            ("j_z", self.j_z),
            ("kappa_a", self.kappa_a),
            ("kappa_b", self.kappa_b),
        ] {
            if !x.is_finite() {
                return bad(key, "must be finite");
            }
        }
        if self.gammas.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return bad("gamma", "every value must be positive and finite");
        }
        for (key, x) in [("dt", self.dt), ("coeff_dt", self.coeff_dt), ("horizon", self.horizon)] {
            if !(x.is_finite() && x > 0.0) {
                return bad(key, "must be positive");
            }
        }
        if steps_in(self.horizon, self.dt).is_err() {
            return bad("dt", "must divide the horizon");
        }
        if steps_in(self.horizon, self.coeff_dt).is_err() {
            return bad("coeff_dt", "must divide the horizon");
        }
        if self.trajectories == 0 {
            return bad("trajectories", "must be at least 1");
        }
        if self.record_stride == 0 {
            return bad("record_stride", "must be at least 1");
        }
        if self.workers == 0 {
            return bad("workers", "must be at least 1");
        }
        if self.compare_approx && self.mode == Mode::Approx {
            return bad("compare_approx", "needs an exact mode to compare against");
        }
        Ok(())
    }
}

fn number(v: &str) -> Result<f64, String> {
    v.parse::<f64>().map_err(|_| format!("expected a number, got {v:?}"))
}

fn integer<T: FromStr>(v: &str) -> Result<T, String> {
    v.parse::<T>().map_err(|_| format!("expected a non-negative integer, got {v:?}"))
}

fn boolean(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got {v:?}")),
    }
}

fn list<T>(v: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| item(s.trim())).collect()
}

/// `key = value` lines of a config file, with their line numbers.
pub fn parse_file(text: &str, path: &Path) -> RunResult<Vec<(usize, String, String)>> {
    let mut out: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| RunError::config(format!("{}:{}: expected `key = value`", path.display(), i + 1)))?;
        let k = k.trim().to_string();
        if out.iter().any(|(_, seen, _)| *seen == k) {
            return Err(RunError::config(format!("{}:{}: duplicate key `{k}`", path.display(), i + 1)));
        }
        out.push((i + 1, k, v.trim().to_string()));
    }
    Ok(out)
}

/// Command-line overrides as `(key, value)` pairs.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub config: Option<PathBuf>,
    pub entries: Vec<(String, String)>,
}

/// Merges preset, file and flag settings and validates the result.
pub fn load_config(ov: &Overrides) -> RunResult<RunConfig> {
    let file = match &ov.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
            Some((path.clone(), parse_file(&text, path)?))
        }
        None => None,
    };
    let file_preset = file
        .as_ref()
        .and_then(|(_, entries)| entries.iter().find(|(_, k, _)| k == "preset").map(|(_, _, v)| v.clone()));
    let preset = match ov.preset.as_deref().or(file_preset.as_deref()) {
        None | Some("custom") | Some("") => None,
        Some(name) => Some(name.parse::<Preset>().map_err(|e| RunError::config(format!("preset: {e}")))?),
    };
    let mut cfg = preset.map_or_else(RunConfig::default, RunConfig::preset);
    if let Some((path, entries)) = &file {
        for (line, k, v) in entries {
            if k == "preset" || k.starts_with("manifest.") {
                continue;
            }
            cfg.set(k, v).map_err(|e| RunError::config(format!("{}:{line}: {k}: {e}", path.display())))?;
        }
    }
    for (k, v) in &ov.entries {
        cfg.set(k, v).map_err(|e| RunError::config(format!("--{}: {e}", k.replace('_', "-"))))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_specs() {
        let s: StateSpec = "11+00".parse().unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.psi[0].re - h).abs() < 1e-15 && (s.psi[3].re - h).abs() < 1e-15);
        assert_eq!(s.slug(), "11p00");
        let d: StateSpec = "10 - 01".parse().unwrap();
        assert!((d.psi[2].re + h).abs() < 1e-15);
        assert_eq!(d.to_string(), "10-01");
        for bad in ["", "1", "12", "10*01", "10-10", "10+"] {
            assert!(bad.parse::<StateSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn presets_match_figure_parameters() {
        let f3 = RunConfig::preset(Preset::Fig3);
        assert_eq!(f3.gammas, vec![0.5, 1.0, 2.0]);
        assert_eq!((f3.omega_a, f3.j_xy, f3.j_z, f3.kappa_a), (0.5, 0.5, 0.1, 1.0));
        assert_eq!(f3.states[0].text, "10");
        let f6 = RunConfig::preset(Preset::Fig6);
        assert_eq!(f6.gammas, vec![0.3]);
        assert_eq!(f6.states.len(), 4);
        assert!(f6.compare_approx);
        let f4 = RunConfig::preset(Preset::Fig4);
        assert_eq!((f4.horizon, f4.trajectories, f4.experiment), (60.0, 8, Experiment::Trajectories));
        let f5 = RunConfig::preset(Preset::Fig5);
        assert_eq!((f5.j_xy, f5.j_z, f5.observable), (0.7, 0.3, Observable::Purity));
        for p in Preset::ALL {
            RunConfig::preset(p).validate().unwrap();
        }
    }

    #[test]
    fn get_set_round_trip() {
        for p in Preset::ALL {
            let cfg = RunConfig::preset(p);
            let mut back = RunConfig::default();
            for k in KEYS {
                back.set(k, &cfg.get(k)).unwrap();
            }
            assert_eq!(back, cfg);
        }
        assert!(RunConfig::default().set("nope", "1").is_err());
    }

    #[test]
    fn precedence_flags_over_file_over_preset() {
        let dir = std::env::temp_dir().join(format!("nmqsd-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(&path, "# comment\npreset = fig3\ngamma = 0.7\ntrajectories = 50\nmanifest.version = x\n").unwrap();
        let ov = Overrides {
            config: Some(path.clone()),
            entries: vec![("trajectories".into(), "20".into())],
            ..Default::default()
        };
        let cfg = load_config(&ov).unwrap();
        assert_eq!(cfg.preset, Some(Preset::Fig3));
        assert_eq!(cfg.gammas, vec![0.7]);
        assert_eq!(cfg.trajectories, 20);
        assert_eq!(cfg.j_z, 0.1);

        std::fs::write(&path, "gamma = 1\nbogus = 2\n").unwrap();
        let err = load_config(&Overrides { config: Some(path.clone()), ..Default::default() }).unwrap_err();
        assert!(err.to_string().contains(":2: bogus"), "{err}");

        std::fs::write(&path, "dt = 0.07\n").unwrap();
        assert!(matches!(load_config(&Overrides { config: Some(path), ..Default::default() }), Err(RunError::Config(_))));
        let unknown = Overrides { preset: Some("fig9".into()), ..Default::default() };
        assert!(load_config(&unknown).unwrap_err().to_string().contains("unknown preset"));
        std::fs::remove_dir_all(dir).ok();
    }
}
