//! Field solve, ensembles and output for one configuration.

use std::time::Instant;

use rayon::ThreadPool;

use nmqsd_core::fields::steps_in;
use nmqsd_core::{
    solve_fields, CoeffTables, EnsembleConfig, ModelParams, NoiseSource, ObservableSeries, QsdSystem, Record,
    TrajectoryConfig,
};

use crate::config::{Experiment, Mode, Observable, RunConfig, StateSpec};
use crate::error::{RunError, RunResult};
use crate::output::{self, Metadata, OutputDir, RunFacts};
use crate::parallel;
use crate::svg::{self, Panel, Series};
use crate::tables_io;

#[derive(Debug)]
pub struct RunOutcome {
    pub facts: RunFacts,
    pub manifest: std::path::PathBuf,
}

/// Coefficient tables for `p`, from the cache directory when a matching
/// dump covers the horizon.
pub fn obtain_tables(cfg: &RunConfig, p: &ModelParams) -> RunResult<CoeffTables> {
    let points = steps_in(cfg.horizon, cfg.coeff_dt)? + 1;
    let Some(dir) = &cfg.table_cache else {
        return Ok(solve_fields(p, &QsdSystem::ou(*p)?.kernel, cfg.horizon, cfg.coeff_dt)?);
    };
    std::fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    let path = tables_io::cache_path(dir, p, cfg.coeff_dt);
    if path.exists() {
        let t = tables_io::read(&path)?;
        if t.params == *p && t.step == cfg.coeff_dt && t.points() >= points {
            return Ok(tables_io::truncate(&t, points));
        }
    }
    let t = solve_fields(p, &QsdSystem::ou(*p)?.kernel, cfg.horizon, cfg.coeff_dt)?;
    tables_io::write(&path, &t)?;
    Ok(t)
}

fn curve_metadata(cfg: &RunConfig, p: &ModelParams, state: &StateSpec, mode: Mode) -> Metadata {
    let mut m: Metadata = vec![
        ("preset".into(), cfg.get("preset")),
        ("version".into(), env!("CARGO_PKG_VERSION").into()),
    ];
    for (k, v) in [
        ("omega_a", p.omega_a),
        ("omega_b", p.omega_b),
        ("j_xy", p.j_xy),
        ("j_z", p.j_z),
        ("kappa_a", p.kappa_a),
        ("kappa_b", p.kappa_b),
        ("gamma", p.gamma),
    ] {
        m.push((k.into(), v.to_string()));
    }
    m.push(("state".into(), state.to_string()));
    m.push(("mode".into(), mode.to_string()));
    for k in ["trajectories", "seed", "dt", "coeff_dt", "horizon", "record_stride", "noise_start"] {
        m.push((k.into(), cfg.get(k)));
    }
    m
}

fn ensemble_config(cfg: &RunConfig, state: &StateSpec, mode: Mode) -> EnsembleConfig {
    let mut traj = TrajectoryConfig::new(mode.unraveling(), cfg.dt, cfg.horizon, state.psi);
    traj.drop_o5 = mode.drop_o5();
    traj.stride = cfg.record_stride;
    traj.record = Record::Observables;
    EnsembleConfig {
        n_traj: cfg.trajectories,
        master_seed: cfg.seed,
        trajectory: traj,
        noise: NoiseSource::Sampled,
        ou_start: cfg.noise_start,
        noise_oversample: 1,
    }
}

fn fmt_num(x: f64) -> String {
    x.to_string()
}

struct Curve {
    gamma: f64,
    state: StateSpec,
    mode: Mode,
    series: ObservableSeries,
}

fn curve_label(cfg: &RunConfig, c: &Curve) -> String {
    let mut parts = Vec::new();
    if cfg.gammas.len() > 1 {
        parts.push(format!("γ={}", fmt_num(c.gamma)));
    }
    if cfg.states.len() > 1 {
        parts.push(format!("ψ0={}", c.state));
    }
    if cfg.compare_approx {
        parts.push(if c.mode == Mode::Approx { "approx".into() } else { "exact".into() });
    }
    if parts.is_empty() {
        parts.push(format!("γ={}", fmt_num(c.gamma)));
    }
    parts.join(" ")
}

fn observable_values(obs: Observable, s: &ObservableSeries) -> (&'static str, Vec<f64>) {
    match obs {
        Observable::Concurrence => ("concurrence", s.concurrence.clone()),
        Observable::Purity => ("purity", s.purity.clone()),
    }
}

fn ensemble_svg(cfg: &RunConfig, curves: &[Curve]) -> String {
    let series = |cs: &[&Curve]| -> Vec<Series> {
        cs.iter()
            .map(|c| Series {
                label: curve_label(cfg, c),
                x: c.series.times.clone(),
                y: observable_values(cfg.observable, &c.series).1,
            })
            .collect()
    };
    let y_label = match cfg.observable {
        Observable::Concurrence => "C",
        Observable::Purity => "tr ρ²",
    };
    let panels: Vec<Panel> = if cfg.compare_approx && cfg.states.len() > 1 {
        cfg.states
            .iter()
            .map(|st| {
                let cs: Vec<&Curve> = curves.iter().filter(|c| c.state == *st).collect();
                Panel { title: format!("ψ0 = {st}"), y_label: y_label.into(), series: series(&cs) }
            })
            .collect()
    } else {
        let cs: Vec<&Curve> = curves.iter().collect();
        let title = format!("{} ({})", observable_values(cfg.observable, &curves[0].series).0, cfg.name());
        vec![Panel { title, y_label: y_label.into(), series: series(&cs) }]
    };
    svg::line_chart("t", &panels)
}

fn modes(cfg: &RunConfig) -> Vec<Mode> {
    if cfg.compare_approx {
        vec![cfg.mode, Mode::Approx]
    } else {
        vec![cfg.mode]
    }
}

fn curve_file(cfg: &RunConfig, gamma: f64, state: &StateSpec, mode: Mode, compare: bool) -> String {
    let suffix = if compare && mode == Mode::Approx { "_approx" } else { "" };
    format!("{}_gamma{}_psi{}{suffix}", cfg.name(), fmt_num(gamma), state.slug())
}

fn run_ensembles(cfg: &RunConfig, pool: &ThreadPool, out: &mut OutputDir) -> RunResult<usize> {
    let mut curves = Vec::new();
    for &gamma in &cfg.gammas {
        if cfg.states.is_empty() {
            continue;
        }
        let p = cfg.params(gamma);
        let tables = obtain_tables(cfg, &p)?;
        let sys = QsdSystem::ou(p)?;
        for state in &cfg.states {
            for mode in modes(cfg) {
                let ens = ensemble_config(cfg, state, mode);
                let res = parallel::run_ensemble(pool, &ens, &sys, &tables)?;
                let name = curve_file(cfg, gamma, state, mode, cfg.compare_approx);
                out.write(&format!("{name}.csv"), &output::ensemble_csv(&curve_metadata(cfg, &p, state, mode), &res.series))?;
                curves.push(Curve { gamma, state: state.clone(), mode, series: res.series });
            }
        }
    }
    if curves.is_empty() {
        return Ok(0);
    }
    if cfg.experiment == Experiment::Surface {
        let mut csv = String::from("gamma,t,C\n");
        for c in &curves {
            for (t, v) in c.series.times.iter().zip(&c.series.concurrence) {
                csv.push_str(&format!("{},{t},{v}\n", fmt_num(c.gamma)));
            }
        }
        out.write(&format!("{}_surface.csv", cfg.name()), &csv)?;
    }
    if cfg.svg {
        let text = if cfg.experiment == Experiment::Surface {
            let rows: Vec<String> = curves.iter().map(|c| curve_label(cfg, c)).collect();
            let values: Vec<Vec<f64>> = curves.iter().map(|c| observable_values(cfg.observable, &c.series).1).collect();
            svg::heatmap(
                &format!("{} over γ and t ({})", observable_values(cfg.observable, &curves[0].series).0, cfg.name()),
                "t",
                "curve",
                &curves[0].series.times,
                &rows,
                &values,
            )
        } else {
            ensemble_svg(cfg, &curves)
        };
        out.write(&format!("{}.svg", cfg.name()), &text)?;
    }
    Ok(curves.len())
}

fn run_single_trajectories(cfg: &RunConfig, pool: &ThreadPool, out: &mut OutputDir) -> RunResult<usize> {
    let mut count = 0;
    let mut fluct = Vec::new();
    let mut prob = Vec::new();
    for &gamma in &cfg.gammas {
        if cfg.states.is_empty() {
            continue;
        }
        let p = cfg.params(gamma);
        let tables = obtain_tables(cfg, &p)?;
        let sys = QsdSystem::ou(p)?;
        for state in &cfg.states {
            let ens = ensemble_config(cfg, state, cfg.mode);
            let runs = parallel::run_trajectories(pool, &ens, &sys, &tables)?;
            let base = curve_file(cfg, gamma, state, cfg.mode, false);
            for (i, (tr, noise)) in runs.iter().enumerate() {
                let mut meta = curve_metadata(cfg, &p, state, cfg.mode);
                meta.push(("stream".into(), i.to_string()));
                out.write(&format!("{base}_traj{i}.csv"), &output::trajectory_csv(&meta, tr))?;
                if cfg.dump_noise {
                    out.write(&format!("{base}_noise{i}.csv"), &output::noise_csv(&meta, noise))?;
                }
                let label = format!("#{i}");
                let x: Vec<f64> = tr.points.iter().map(|q| q.t).collect();
                fluct.push(Series { label: label.clone(), x: x.clone(), y: tr.points.iter().map(|q| q.dl2).collect() });
                let y = tr.points.iter().map(|q| q.c[2].norm_sqr() + q.c[3].norm_sqr()).collect();
                prob.push(Series { label, x, y });
                count += 1;
            }
        }
    }
    if cfg.svg && count > 0 {
        let panels = [
            Panel { title: "fluctuation of L".into(), y_label: "(ΔL)²".into(), series: fluct },
            Panel { title: "weight of ψ3 and ψ4".into(), y_label: "|c3|²+|c4|²".into(), series: prob },
        ];
        out.write(&format!("{}.svg", cfg.name()), &svg::line_chart("t", &panels))?;
    }
    Ok(count)
}

/// Runs `cfg` and writes its outputs and manifest. A run with nothing to
/// compute writes the manifest and returns [`RunError::Empty`].
pub fn run(cfg: &RunConfig) -> RunResult<RunOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let pool = parallel::pool(cfg.workers)?;
    let mut out = OutputDir::create(&cfg.out)?;
    let produced = match cfg.experiment {
        Experiment::Ensemble | Experiment::Surface => run_ensembles(cfg, &pool, &mut out)?,
        Experiment::Trajectories => run_single_trajectories(cfg, &pool, &mut out)?,
    };
    let steps = steps_in(cfg.horizon, cfg.dt)?;
    let facts = RunFacts {
        status: if produced == 0 { "empty" } else { "ok" },
        coeff_points: steps_in(cfg.horizon, cfg.coeff_dt)? + 1,
        steps,
        records: steps / cfg.record_stride + 1,
        wall_clock_s: start.elapsed().as_secs_f64(),
        outputs: out.files.clone(),
    };
    let manifest = out.root.join(output::MANIFEST_NAME);
    std::fs::write(&manifest, output::manifest_text(cfg, &facts)).map_err(|e| RunError::io(&manifest, e))?;
    if produced == 0 {
        return Err(RunError::Empty);
    }
    Ok(RunOutcome { facts, manifest })
}
