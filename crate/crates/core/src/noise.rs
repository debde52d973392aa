//! Colored complex Gaussian noise `z*_t` with `M[z_t] = M[z_t z_s] = 0` and
//! `M[z*_t z_s] = α(t, s)`.
//!
//! Paths store `z*_t` samples on a uniform grid of spacing `dt_half`, which is
//! half the trajectory step so that both Heun stages and the midpoint read
//! exact samples.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::algebra::{C64, ZERO};
use crate::error::{Error, Result};
use crate::linalg;

/// Bath correlation function.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// `α(t, s) = (γ/2) e^{−γ|t−s|}`.
    Ou { gamma: f64 },
    /// Tabulated `α(t_i, s_j)`, row-major over `grid × grid`, bilinearly
    /// interpolated.
    Table { grid: Vec<f64>, values: Vec<C64> },
}

impl KernelSpec {
    pub fn ou(gamma: f64) -> Self {
        KernelSpec::Ou { gamma }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Ou { gamma } => {
                if !(*gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::invalid("OU kernel needs a finite gamma > 0"));
                }
            }
            KernelSpec::Table { grid, values } => {
                if grid.is_empty() || values.len() != grid.len() * grid.len() {
                    return Err(Error::invalid("kernel table shape does not match its grid"));
                }
                if grid.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::invalid("kernel table grid must be strictly ascending"));
                }
                let n = grid.len();
                for i in 0..n {
                    for j in 0..n {
                        let d = values[i * n + j] - values[j * n + i].conj();
                        if d.norm() > 1e-12 * (1.0 + values[i * n + j].norm()) {
                            return Err(Error::invalid("kernel table is not Hermitian"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `α(t, s)`.
    pub fn eval(&self, t: f64, s: f64) -> Result<C64> {
        match self {
            KernelSpec::Ou { gamma } => Ok(C64::new(0.5 * gamma * (-gamma * (t - s).abs()).exp(), 0.0)),
            KernelSpec::Table { grid, values } => table_eval(grid, values, t, s),
        }
    }

    pub fn ou_gamma(&self) -> Option<f64> {
        match self {
            KernelSpec::Ou { gamma } => Some(*gamma),
            KernelSpec::Table { .. } => None,
        }
    }
}

fn locate(grid: &[f64], x: f64) -> Option<(usize, f64)> {
    let n = grid.len();
    if n == 1 {
        return (x == grid[0]).then_some((0, 0.0));
    }
    if x < grid[0] || x > grid[n - 1] || x.is_nan() {
        return None;
    }
    let hi = grid.partition_point(|&g| g <= x).clamp(1, n - 1);
    let lo = hi - 1;
    Some((lo, (x - grid[lo]) / (grid[hi] - grid[lo])))
}

fn table_eval(grid: &[f64], values: &[C64], t: f64, s: f64) -> Result<C64> {
    let out = || Error::KernelOutOfRange { t, s };
    let (i, u) = locate(grid, t).ok_or_else(out)?;
    let (j, v) = locate(grid, s).ok_or_else(out)?;
    let n = grid.len();
    let at = |a: usize, b: usize| values[a.min(n - 1) * n + b.min(n - 1)];
    Ok(at(i, j) * ((1.0 - u) * (1.0 - v))
        + at(i + 1, j) * (u * (1.0 - v))
        + at(i, j + 1) * ((1.0 - u) * v)
        + at(i + 1, j + 1) * (u * v))
}

/// Counter-based random stream: `(master_seed, stream_index)` selects a
/// ChaCha stream, so trajectories can be generated in any order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        RngStream { master_seed, stream_index }
    }

    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Initial condition of the OU recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OuStart {
    /// `u_0 ~ N(0, γ/2)`: the process is stationary from `t = 0`.
    #[default]
    Stationary,
    /// `u_0 = 0`.
    Zero,
}

/// One realisation of `z*_t` on the grid `k · dt_half`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub dt_half: f64,
    pub samples: Vec<C64>,
    pub seed: Option<RngStream>,
}

impl NoisePath {
    /// All-zero path covering `[0, horizon]`.
    pub fn zeros(horizon: f64, dt_half: f64) -> Self {
        let n = grid_len(horizon, dt_half);
        NoisePath { dt_half, samples: alloc::vec![ZERO; n + 1], seed: None }
    }

    /// Deterministic path `z*_t = f(t)`; useful for integrator checks.
    pub fn from_fn(horizon: f64, dt_half: f64, f: impl Fn(f64) -> C64) -> Self {
        let n = grid_len(horizon, dt_half);
        NoisePath {
            dt_half,
            samples: (0..=n).map(|k| f(k as f64 * dt_half)).collect(),
            seed: None,
        }
    }

    pub fn horizon(&self) -> f64 {
        (self.samples.len().saturating_sub(1)) as f64 * self.dt_half
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |k| k as f64 * self.dt_half)
    }

    /// Keeps every `factor`-th sample. An OU path decimated this way is an
    /// exact OU path on the coarser grid.
    pub fn decimate(&self, factor: usize) -> Self {
        assert!(factor >= 1);
        NoisePath {
            dt_half: self.dt_half * factor as f64,
            samples: self.samples.iter().step_by(factor).copied().collect(),
            seed: self.seed,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

fn grid_len(horizon: f64, step: f64) -> usize {
    assert!(step > 0.0 && horizon >= 0.0, "grid needs step > 0 and horizon >= 0");
    let n = horizon / step;
    let r = n.round();
    if (n - r).abs() < 1e-9 * r.max(1.0) {
        r as usize
    } else {
        n.ceil() as usize
    }
}

/// Stationary complex OU path by the exact AR(1) recursion
/// `u_{k+1} = ρ u_k + √((γ/2)(1−ρ²)) ξ_k`, `ρ = e^{−γ dt_half}`, applied to
/// real and imaginary parts independently, `z = (u + iv)/√2`.
pub fn sample_ou_path(gamma: f64, horizon: f64, dt_half: f64, stream: RngStream, start: OuStart) -> Result<NoisePath> {
    if !(gamma > 0.0) || !(dt_half > 0.0) || !(horizon >= 0.0) {
        return Err(Error::invalid("OU sampling needs gamma > 0, dt_half > 0, horizon >= 0"));
    }
    let n = grid_len(horizon, dt_half);
    let mut rng = stream.rng();
    let var = 0.5 * gamma;
    let rho = (-gamma * dt_half).exp();
    let kick = (var * (1.0 - rho * rho)).sqrt();
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let (mut u, mut v) = match start {
        OuStart::Stationary => (var.sqrt() * normal(), var.sqrt() * normal()),
        OuStart::Zero => (0.0, 0.0),
    };
    let h = core::f64::consts::FRAC_1_SQRT_2;
    let mut samples = Vec::with_capacity(n + 1);
    samples.push(C64::new(u * h, v * h));
    for _ in 0..n {
        u = rho * u + kick * normal();
        v = rho * v + kick * normal();
        samples.push(C64::new(u * h, v * h));
    }
    Ok(NoisePath { dt_half, samples, seed: Some(stream) })
}

/// Exact-covariance sampler for an arbitrary kernel on a uniform grid
/// `{0, dt_half, …}`: `z = A ξ` with `A A† = Σ`, `Σ_ij = α(t_i, t_j)` and `ξ`
/// circular standard complex normals.
pub fn sample_cholesky_path(kernel: &KernelSpec, horizon: f64, dt_half: f64, stream: RngStream) -> Result<NoisePath> {
    let n = grid_len(horizon, dt_half) + 1;
    let times: Vec<f64> = (0..n).map(|k| k as f64 * dt_half).collect();
    let factor = cholesky_factor(kernel, &times)?;
    let mut rng = stream.rng();
    let h = core::f64::consts::FRAC_1_SQRT_2;
    let xi: Vec<C64> = (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re * h, im * h)
        })
        .collect();
    let samples = (0..n)
        .map(|i| (0..=i).map(|j| factor[i * n + j] * xi[j]).sum())
        .collect();
    Ok(NoisePath { dt_half, samples, seed: Some(stream) })
}

/// Lower-triangular `A` with `A A† = Σ(times)`. Pivots within a relative
/// tolerance of zero are clamped (semidefinite kernels); clearly negative
/// pivots are reported with the most negative eigenvalue of `Σ`.
pub fn cholesky_factor(kernel: &KernelSpec, times: &[f64]) -> Result<Vec<C64>> {
    let n = times.len();
    let mut sigma = alloc::vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            sigma[i * n + j] = kernel.eval(times[i], times[j])?;
        }
    }
    let scale = (0..n).map(|i| sigma[i * n + i].re.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tol = 1e-10 * scale;
    let mut a = alloc::vec![ZERO; n * n];
    for j in 0..n {
        let mut d = sigma[j * n + j].re;
        for k in 0..j {
            d -= a[j * n + k].norm_sqr();
        }
        if d < -tol {
            let ev = linalg::eigenvalues(&sigma, n)?;
            let min = ev.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
        }
        if d <= tol {
            continue;
        }
        let l = d.sqrt();
        a[j * n + j] = C64::new(l, 0.0);
        for i in j + 1..n {
            let mut s = sigma[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k].conj();
            }
            a[i * n + j] = s / l;
        }
    }
    Ok(a)
}

/// Ensemble estimate of `M[z*_t z_s]` and `M[z_t z_s]` for one pair of grid
/// indices, each with standard errors of the real and imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceEstimate {
    pub t_index: usize,
    pub s_index: usize,
    /// `M[z*_t z_s]`.
    pub cross: C64,
    pub cross_se: C64,
    /// `M[z_t z_s]`.
    pub pseudo: C64,
    pub pseudo_se: C64,
}

/// Unbiased (known zero mean) estimates over a set of paths.
pub fn covariance_estimate(paths: &[NoisePath], pairs: &[(usize, usize)]) -> Result<Vec<CovarianceEstimate>> {
    const MIN_PATHS: usize = 100;
    if paths.len() < MIN_PATHS {
        return Err(Error::InsufficientSamples { got: paths.len(), need: MIN_PATHS });
    }
    let n = paths.len() as f64;
    pairs
        .iter()
        .map(|&(i, j)| {
            let mut cross = MeanVar::default();
            let mut pseudo = MeanVar::default();
            for p in paths {
                let (Some(&wi), Some(&wj)) = (p.samples.get(i), p.samples.get(j)) else {
                    return Err(Error::grid(format!("pair ({i}, {j}) outside a path of length {}", p.samples.len())));
                };
                // Samples are z*: z*_t z_s = w_i conj(w_j), z_t z_s = conj(w_i) conj(w_j).
                cross.push(wi * wj.conj());
                pseudo.push(wi.conj() * wj.conj());
            }
            Ok(CovarianceEstimate {
                t_index: i,
                s_index: j,
                cross: cross.mean(n),
                cross_se: cross.stderr(n),
                pseudo: pseudo.mean(n),
                pseudo_se: pseudo.stderr(n),
            })
        })
        .collect()
}

#[derive(Default)]
struct MeanVar {
    sum: C64,
    sq_re: f64,
    sq_im: f64,
}

impl MeanVar {
    fn push(&mut self, x: C64) {
        self.sum += x;
        self.sq_re += x.re * x.re;
        self.sq_im += x.im * x.im;
    }

    fn mean(&self, n: f64) -> C64 {
        self.sum / n
    }

    fn stderr(&self, n: f64) -> C64 {
        let m = self.mean(n);
        let var_re = ((self.sq_re / n - m.re * m.re) * n / (n - 1.0)).max(0.0);
        let var_im = ((self.sq_im / n - m.im * m.im) * n / (n - 1.0)).max(0.0);
        C64::new((var_re / n).sqrt(), (var_im / n).sqrt())
    }
}
