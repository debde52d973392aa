//! Time-local non-Markovian quantum state diffusion for two interacting
//! qubits coupled to a common dissipative bosonic bath.
//!
//! The crate is `no_std` and only needs `alloc`. It is organised bottom-up:
//!
//! * [`algebra`]: dense 4×4 complex algebra and the model operators.
//! * [`noise`]: colored complex Gaussian noise (Ornstein-Uhlenbeck recursion
//!   and a Cholesky sampler for arbitrary kernels).
//! * [`fields`]: the noise-independent coefficient fields of the O operator,
//!   integrated by the method of lines with a moving boundary.
//! * [`trajectory`]: linear and norm-preserving QSD trajectories, plus the
//!   symmetric-basis coefficient integrator.
//! * [`ensemble`]: ensemble accumulation, density-matrix recovery, concurrence,
//!   purity and steady-state readouts.
//! * [`oracles`]: independent validation solvers (Lindblad master equation,
//!   exact pseudomode dynamics for the OU kernel, closed forms).
//!
//! Basis order everywhere is `(|11⟩, |10⟩, |01⟩, |00⟩)` with qubit A first.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod algebra;
pub mod ensemble;
mod error;
pub mod fields;
pub mod linalg;
pub mod noise;
pub mod oracles;
pub mod trajectory;

pub use algebra::{ModelParams, Operator, StateVector, C64};
pub use ensemble::{
    coefficients_c, concurrence, fluctuation_l, purity, steady_extract, DensityCheck,
    EnsembleAccumulator, EnsembleConfig, EnsembleResult, NoiseSource, ObservableSeries, SteadyValue,
};
pub use error::{Error, Result};
pub use fields::{riccati_oracle, solve_fields, CoeffTables, FieldSlice};
pub use noise::{KernelSpec, NoisePath, OuStart, RngStream};
pub use oracles::{analytic_rabi, lindblad_solve, lindblad_steady, pseudomode_solve, DensityMatrixSeries};
pub use trajectory::{QsdSystem, Record, Trajectory, TrajectoryConfig, Unraveling};
