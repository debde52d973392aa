//! Ensemble averages and observables of the recovered density matrix.
//!
//! Trajectories are grouped into at most [`MAX_BATCHES`] contiguous index
//! ranges. The batch layout depends only on the trajectory count, and batches
//! are reduced in index order, so results are bitwise reproducible however the
//! batches are scheduled.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use core::ops::Range;


use crate::algebra::{build_lindblad, sigma_y_sigma_y, ModelParams, Operator, StateVector, C64};
use crate::error::{Error, Result};
use crate::fields::CoeffTables;
use crate::linalg::{hermitian_eigenvalues, operator_eigenvalues};
use crate::noise::{sample_cholesky_path, sample_ou_path, KernelSpec, NoisePath, OuStart, RngStream};
use crate::trajectory::{run_trajectory_with, QsdSystem, TrajectoryConfig, Unraveling};

pub const MAX_BATCHES: usize = 32;

/// Tolerances for accepting a matrix as a density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityCheck {
    pub trace: f64,
    pub hermitian: f64,
    pub eigenvalue: f64,
}

impl DensityCheck {
    pub const STRICT: DensityCheck = DensityCheck { trace: 1e-9, hermitian: 1e-12, eigenvalue: 1e-9 };
    /// Monte Carlo estimates from the linear unraveling carry no exact trace.
    pub const MONTE_CARLO: DensityCheck = DensityCheck { trace: 0.5, hermitian: 1e-12, eigenvalue: 1e-6 };

    pub fn check(&self, rho: &Operator) -> Result<()> {
        if !rho.is_finite() {
            return Err(Error::NotDensityMatrix("non-finite entry".into()));
        }
        let scale = rho.frobenius_norm().max(1.0);
        if !rho.is_hermitian(self.hermitian * scale) {
            return Err(Error::NotDensityMatrix("not Hermitian".into()));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > self.trace || tr.im.abs() > self.trace {
            return Err(Error::NotDensityMatrix(alloc::format!("trace {tr}")));
        }
        let min = hermitian_eigenvalues(rho)?[0];
        if min < -self.eigenvalue {
            return Err(Error::NotDensityMatrix(alloc::format!("eigenvalue {min:e}")));
        }
        Ok(())
    }
}

/// Wootters concurrence.
pub fn concurrence(rho: &Operator) -> Result<f64> {
    concurrence_checked(rho, &DensityCheck::STRICT)
}

pub fn concurrence_checked(rho: &Operator, check: &DensityCheck) -> Result<f64> {
    check.check(rho)?;
    let yy = sigma_y_sigma_y();
    let tilde = yy * rho.conj() * yy;
    let ev = operator_eigenvalues(&(*rho * tilde))?;
    let scale = rho.trace().re.abs().max(1.0).powi(2);
    let mut lam = [0.0; 4];
    for (slot, z) in lam.iter_mut().zip(ev.iter()) {
        if z.im.abs() > 1e-8 * scale {
            return Err(Error::NotDensityMatrix(alloc::format!("complex spin-flip spectrum {z}")));
        }
        if z.re < -1e-10 * scale {
            return Err(Error::NotDensityMatrix(alloc::format!("negative spin-flip eigenvalue {:e}", z.re)));
        }
        *slot = z.re.max(0.0).sqrt();
    }
    lam.sort_by(|a, b| b.total_cmp(a));
    Ok((lam[0] - lam[1] - lam[2] - lam[3]).max(0.0))
}

/// `tr ρ²`.
pub fn purity(rho: &Operator) -> f64 {
    (*rho * *rho).trace().re
}

/// `|⟨L²⟩ − ⟨L⟩²|` on the normalized state.
pub fn fluctuation_l(psi: &StateVector, p: &ModelParams) -> f64 {
    let l = build_lindblad(p);
    let unit = psi.normalized();
    let lpsi = l.apply(&unit);
    let mean = unit.inner(&lpsi);
    let sq = unit.inner(&l.apply(&lpsi));
    (sq - mean * mean).norm()
}

/// Amplitudes on `|11⟩, (|10⟩+|01⟩)/√2, (|10⟩−|01⟩)/√2, |00⟩`.
pub fn coefficients_c(psi: &StateVector) -> [C64; 4] {
    psi.to_symmetric_basis()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyValue {
    pub value: f64,
    pub stderr: f64,
    pub points: usize,
    /// The two halves of the window disagree by more than 3 standard errors.
    pub nonstationary: bool,
}

/// Mean of the trailing `window` fraction of `values`. The standard error is
/// the larger of the scatter-based estimate and the mean pointwise error.
pub fn steady_extract(values: &[f64], stderr: &[f64], window: f64) -> Result<SteadyValue> {
    if values.len() < 10 {
        return Err(Error::SeriesTooShort { len: values.len(), min: 10 });
    }
    if !(window > 0.0 && window <= 0.5) {
        return Err(Error::invalid("steady-state window must be in (0, 0.5]"));
    }
    if !stderr.is_empty() && stderr.len() != values.len() {
        return Err(Error::invalid("stderr series length differs from values"));
    }
    let m = ((values.len() as f64 * window).round() as usize).clamp(4, values.len());
    let start = values.len() - m;
    let summary = |range: Range<usize>| -> (f64, f64) {
        let v = &values[range.clone()];
        let n = v.len() as f64;
        let mean = v[0] + v.iter().map(|x| x - v[0]).sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let scatter = (var / n).sqrt();
        let pointwise: Vec<f64> = if stderr.is_empty() {
            Vec::new()
        } else {
            stderr[range].iter().copied().filter(|x| x.is_finite()).collect()
        };
        let point = if pointwise.is_empty() { 0.0 } else { pointwise.iter().sum::<f64>() / pointwise.len() as f64 };
        (mean, scatter.max(point))
    };
    let (value, se) = summary(start..values.len());
    let mid = start + m / 2;
    let (a, sa) = summary(start..mid);
    let (b, sb) = summary(mid..values.len());
    let nonstationary = (a - b).abs() > 3.0 * (sa * sa + sb * sb).sqrt();
    Ok(SteadyValue { value, stderr: se, points: m, nonstationary })
}

/// How trajectories obtain their noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseSource {
    Sampled,
    /// Every path is identically zero.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub master_seed: u64,
    pub trajectory: TrajectoryConfig,
    pub noise: NoiseSource,
    pub ou_start: OuStart,
    /// OU paths are sampled on a grid this many times finer and decimated,
    /// so runs at different `dt` can share noise realisations.
    pub noise_oversample: usize,
}

impl EnsembleConfig {
    pub fn new(n_traj: usize, master_seed: u64, trajectory: TrajectoryConfig) -> Self {
        EnsembleConfig {
            n_traj,
            master_seed,
            trajectory,
            noise: NoiseSource::Sampled,
            ou_start: OuStart::Stationary,
            noise_oversample: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_traj == 0 {
            return Err(Error::invalid("ensemble needs at least one trajectory"));
        }
        if self.noise_oversample == 0 {
            return Err(Error::invalid("noise oversampling factor must be at least 1"));
        }
        self.trajectory.validate()
    }

    /// Noise path of trajectory `index`.
    pub fn noise_path(&self, kernel: &KernelSpec, index: u64) -> Result<NoisePath> {
        let dt_half = 0.5 * self.trajectory.dt;
        let horizon = self.trajectory.horizon;
        let stream = RngStream::new(self.master_seed, index);
        match (self.noise, kernel) {
            (NoiseSource::Zero, _) => Ok(NoisePath::zeros(horizon, dt_half)),
            (NoiseSource::Sampled, KernelSpec::Ou { gamma }) => {
                let k = self.noise_oversample;
                let fine = sample_ou_path(*gamma, horizon, dt_half / k as f64, stream, self.ou_start)?;
                Ok(if k == 1 { fine } else { fine.decimate(k) })
            }
            (NoiseSource::Sampled, KernelSpec::Table { .. }) => sample_cholesky_path(kernel, horizon, dt_half, stream),
        }
    }
}

/// Contiguous trajectory-index ranges, one per batch.
pub fn batch_ranges(n_traj: usize) -> Vec<Range<usize>> {
    let b = n_traj.min(MAX_BATCHES);
    (0..b).map(|i| (i * n_traj / b)..((i + 1) * n_traj / b)).collect()
}

/// Running sums of projectors at every recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleAccumulator {
    pub times: Vec<f64>,
    pub sum: Vec<Operator>,
    /// Per-entry sums of squares; real parts in `re`, imaginary in `im`.
    pub sq: Vec<Operator>,
    /// Sums of `‖ψ‖⁴`, for the error of the trace.
    pub norm4: Vec<f64>,
    pub count: usize,
}

impl EnsembleAccumulator {
    pub fn new(times: Vec<f64>) -> Self {
        let n = times.len();
        EnsembleAccumulator {
            times,
            sum: alloc::vec![Operator::zero(); n],
            sq: alloc::vec![Operator::zero(); n],
            norm4: alloc::vec![0.0; n],
            count: 0,
        }
    }

    pub fn add(&mut self, index: usize, psi: &StateVector) {
        let p = psi.projector();
        self.sum[index] += p;
        self.norm4[index] += psi.norm_sqr() * psi.norm_sqr();
        let sq = &mut self.sq[index];
        for r in 0..4 {
            for c in 0..4 {
                let x = p[(r, c)];
                sq[(r, c)] += C64::new(x.re * x.re, x.im * x.im);
            }
        }
    }

    pub fn merge(&mut self, other: &EnsembleAccumulator) {
        assert_eq!(self.times.len(), other.times.len(), "accumulators on different grids");
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += *b;
        }
        for (a, b) in self.sq.iter_mut().zip(&other.sq) {
            *a += *b;
        }
        for (a, b) in self.norm4.iter_mut().zip(&other.norm4) {
            *a += *b;
        }
        self.count += other.count;
    }

    pub fn mean(&self, index: usize) -> Operator {
        self.sum[index] * (1.0 / self.count as f64)
    }

    /// Standard error of each entry of the mean; real and imaginary parts
    /// separately.
    pub fn stderr(&self, index: usize) -> Operator {
        let n = self.count as f64;
        let mut out = Operator::zero();
        if self.count < 2 {
            return out * f64::NAN;
        }
        let mean = self.mean(index);
        for r in 0..4 {
            for c in 0..4 {
                let m = mean[(r, c)];
                let s = self.sq[index][(r, c)];
                let var_re = ((s.re / n - m.re * m.re) * n / (n - 1.0)).max(0.0);
                let var_im = ((s.im / n - m.im * m.im) * n / (n - 1.0)).max(0.0);
                out[(r, c)] = C64::new((var_re / n).sqrt(), (var_im / n).sqrt());
            }
        }
        out
    }

    /// Standard error of the mean trace `M[‖ψ‖²]`.
    pub fn trace_stderr(&self, index: usize) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        let n = self.count as f64;
        let m = self.sum[index].trace().re / n;
        ((self.norm4[index] / n - m * m) / (n - 1.0)).max(0.0).sqrt()
    }
}

/// Averaged observables at the recorded times.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub rho: Vec<Operator>,
    /// Entrywise standard errors (real and imaginary parts separately).
    pub rho_stderr: Vec<Operator>,
    pub concurrence: Vec<f64>,
    pub concurrence_stderr: Vec<f64>,
    pub purity: Vec<f64>,
    pub purity_stderr: Vec<f64>,
    pub trace: Vec<f64>,
    pub trace_stderr: Vec<f64>,
}

impl ObservableSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Population of basis state `k`.
    pub fn population(&self, k: usize) -> Vec<f64> {
        self.rho.iter().map(|r| r[(k, k)].re).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub n_traj: usize,
    pub unraveling: Unraveling,
    pub series: ObservableSeries,
    /// Per-batch sums, kept for resampling error estimates.
    pub batches: Vec<EnsembleAccumulator>,
}

impl EnsembleResult {
    /// Reduces batch accumulators in the order given.
    pub fn from_batches(batches: Vec<EnsembleAccumulator>, unraveling: Unraveling) -> Result<Self> {
        let first = batches.first().ok_or_else(|| Error::invalid("no batches to reduce"))?;
        let mut total = EnsembleAccumulator::new(first.times.clone());
        for b in &batches {
            total.merge(b);
        }
        let check = match unraveling {
            Unraveling::Linear => DensityCheck::MONTE_CARLO,
            Unraveling::Nonlinear => DensityCheck { eigenvalue: 1e-6, ..DensityCheck::STRICT },
        };
        let nt = total.times.len();
        let mut series = ObservableSeries {
            times: total.times.clone(),
            rho: Vec::with_capacity(nt),
            rho_stderr: Vec::with_capacity(nt),
            concurrence: Vec::with_capacity(nt),
            concurrence_stderr: Vec::with_capacity(nt),
            purity: Vec::with_capacity(nt),
            purity_stderr: Vec::with_capacity(nt),
            trace: Vec::with_capacity(nt),
            trace_stderr: Vec::with_capacity(nt),
        };
        let nb = batches.len();
        for k in 0..nt {
            let rho = total.mean(k);
            let c = concurrence_checked(&rho, &check)?;
            let pu = purity(&rho);
            // Delete-one-batch jackknife.
            let (mut cs, mut ps) = (Vec::with_capacity(nb), Vec::with_capacity(nb));
            if nb >= 2 {
                for b in &batches {
                    let rest = (total.sum[k] - b.sum[k]) * (1.0 / (total.count - b.count) as f64);
                    let check = DensityCheck { trace: f64::INFINITY, ..check };
                    cs.push(concurrence_checked(&rest, &check)?);
                    ps.push(purity(&rest));
                }
            }
            series.concurrence_stderr.push(jackknife(&cs));
            series.purity_stderr.push(jackknife(&ps));
            series.trace.push(rho.trace().re);
            series.trace_stderr.push(total.trace_stderr(k));
            series.concurrence.push(c);
            series.purity.push(pu);
            series.rho_stderr.push(total.stderr(k));
            series.rho.push(rho);
        }
        Ok(EnsembleResult { n_traj: total.count, unraveling, series, batches })
    }
}

fn jackknife(values: &[f64]) -> f64 {
    let b = values.len();
    if b < 2 {
        return f64::NAN;
    }
    let mean = values.iter().sum::<f64>() / b as f64;
    let ss: f64 = values.iter().map(|x| (x - mean).powi(2)).sum();
    ((b as f64 - 1.0) / b as f64 * ss).sqrt()
}

/// Runs the trajectories in `range` and accumulates their projectors.
pub fn run_batch(
    cfg: &EnsembleConfig,
    sys: &QsdSystem,
    tables: &CoeffTables,
    range: Range<usize>,
) -> Result<EnsembleAccumulator> {
    let times = cfg.trajectory.record_times()?;
    let mut acc = EnsembleAccumulator::new(times);
    for index in range {
        let stream = index as u64;
        let wrap = |e: Error| Error::Trajectory { stream, source: alloc::boxed::Box::new(e) };
        let noise = cfg.noise_path(&sys.kernel, stream).map_err(wrap)?;
        run_trajectory_with(&cfg.trajectory, sys, tables, &noise, |k, _, psi| acc.add(k, psi)).map_err(wrap)?;
        acc.count += 1;
    }
    Ok(acc)
}

/// Sequential ensemble run.
pub fn run_ensemble(cfg: &EnsembleConfig, sys: &QsdSystem, tables: &CoeffTables) -> Result<EnsembleResult> {
    cfg.validate()?;
    let batches = batch_ranges(cfg.n_traj)
        .into_iter()
        .map(|r| run_batch(cfg, sys, tables, r))
        .collect::<Result<Vec<_>>>()?;
    EnsembleResult::from_batches(batches, cfg.trajectory.unraveling)
}

/// Closed form for X-shaped states: `2 max(0, |ρ23| − √(ρ11 ρ44), |ρ14| − √(ρ22 ρ33))`.
pub fn x_state_concurrence(rho: &Operator) -> f64 {
    let a = rho[(1, 2)].norm() - (rho[(0, 0)].re * rho[(3, 3)].re).max(0.0).sqrt();
    let b = rho[(0, 3)].norm() - (rho[(1, 1)].re * rho[(2, 2)].re).max(0.0).sqrt();
    2.0 * a.max(b).max(0.0)
}
