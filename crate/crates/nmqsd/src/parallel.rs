//! Ensembles spread over a rayon pool. Batches are fixed by the trajectory
//! count and reduced in index order, so results do not depend on the
//! number of workers.

use rayon::prelude::*;
use rayon::ThreadPool;

use nmqsd_core::ensemble::{batch_ranges, run_batch};
use nmqsd_core::trajectory::run_trajectory;
use nmqsd_core::{CoeffTables, EnsembleConfig, EnsembleResult, NoisePath, QsdSystem, Result, Trajectory};

use crate::error::{RunError, RunResult};

pub fn pool(workers: usize) -> RunResult<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| RunError::config(format!("workers: {e}")))
}

pub fn run_ensemble(pool: &ThreadPool, cfg: &EnsembleConfig, sys: &QsdSystem, tables: &CoeffTables) -> Result<EnsembleResult> {
    cfg.validate()?;
    let batches = pool.install(|| {
        batch_ranges(cfg.n_traj)
            .into_par_iter()
            .map(|r| run_batch(cfg, sys, tables, r))
            .collect::<Result<Vec<_>>>()
    })?;
    EnsembleResult::from_batches(batches, cfg.trajectory.unraveling)
}

/// The first `cfg.n_traj` trajectories of the ensemble with their noise.
pub fn run_trajectories(
    pool: &ThreadPool,
    cfg: &EnsembleConfig,
    sys: &QsdSystem,
    tables: &CoeffTables,
) -> Result<Vec<(Trajectory, NoisePath)>> {
    cfg.validate()?;
    pool.install(|| {
        (0..cfg.n_traj as u64)
            .into_par_iter()
            .map(|i| {
                let noise = cfg.noise_path(&sys.kernel, i)?;
                let tr = run_trajectory(&cfg.trajectory, sys, tables, &noise)?;
                Ok((tr, noise))
            })
            .collect()
    })
}
