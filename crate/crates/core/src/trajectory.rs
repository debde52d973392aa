//! Single QSD trajectories.
//!
//! Linear unraveling: `∂ψ = −iHψ + z*_t Lψ − L†Ōψ`.
//! Norm-preserving unraveling:
//! `∂ψ = −iHψ + (L − ⟨L⟩) z̃*_t ψ − [(L† − ⟨L†⟩)Ō − ⟨(L† − ⟨L†⟩)Ō⟩] ψ`
//! with the shifted noise `z̃*_t = z*_t + ∫_0^t α*(t,s) ⟨L†⟩_s ds`.
//! `Ō(t) = Σ_{j≤4} F_j(t) O_j + i ∫_0^t F5(t,s') z*_{s'} ds' O_5`; the
//! norm-preserving unraveling feeds the shifted noise into the last integral.
//!
//! Both are stepped with Heun on the grid `n·dt`, reading noise from a path
//! sampled on `dt/2`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;


use crate::algebra::{
    basis_operator, build_hamiltonian, build_lindblad, ModelParams, Operator, StateVector, C64, I, ZERO,
};
use crate::error::{Error, Result};
use crate::fields::{steps_in, CoeffTables, Triangle};
use crate::noise::{KernelSpec, NoisePath, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unraveling {
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Record {
    /// Keep the state vector at every recorded time.
    States,
    /// Keep only the per-time observables.
    Observables,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    pub unraveling: Unraveling,
    /// Omit the noise-dependent `O5` term of `Ō`.
    pub drop_o5: bool,
    pub dt: f64,
    pub horizon: f64,
    pub psi0: StateVector,
    pub record: Record,
    /// Record every `stride`-th step.
    pub stride: usize,
}

impl TrajectoryConfig {
    pub fn new(unraveling: Unraveling, dt: f64, horizon: f64, psi0: StateVector) -> Self {
        TrajectoryConfig { unraveling, drop_o5: false, dt, horizon, psi0, record: Record::Observables, stride: 1 }
    }

    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !(self.horizon >= 0.0) {
            return Err(Error::invalid("trajectory needs dt > 0 and horizon >= 0"));
        }
        steps_in(self.horizon, self.dt)
    }

    /// Recorded times `k · stride · dt`.
    pub fn record_times(&self) -> Result<Vec<f64>> {
        let n = self.steps()?;
        Ok((0..=n).step_by(self.stride.max(1)).map(|k| k as f64 * self.dt).collect())
    }

    pub fn validate(&self) -> Result<()> {
        self.steps()?;
        if self.stride == 0 {
            return Err(Error::invalid("recording stride must be at least 1"));
        }
        if !self.psi0.is_finite() || (self.psi0.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("initial state must be normalized"));
        }
        Ok(())
    }
}

/// Observables of one recorded state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub norm: f64,
    /// `⟨L⟩` on the normalized state.
    pub l_mean: C64,
    /// Amplitudes on `|11⟩, (|10⟩+|01⟩)/√2, (|10⟩−|01⟩)/√2, |00⟩` of the
    /// normalized state.
    pub c: [C64; 4],
    /// `|⟨L²⟩ − ⟨L⟩²|`.
    pub dl2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Empty unless states were requested.
    pub states: Vec<StateVector>,
    pub points: Vec<TrajectoryPoint>,
    pub seed: Option<RngStream>,
}

/// Model operators and bath, shared read-only by all trajectories.
#[derive(Debug, Clone)]
pub struct QsdSystem {
    pub params: ModelParams,
    pub kernel: KernelSpec,
    h: Operator,
    l: Operator,
    l_dag: Operator,
    l_sq: Operator,
    ops: [Operator; 4],
    /// `L† O5 |00⟩`-direction image: `L†|00⟩` scaled by 2.
    o5_image: StateVector,
}

impl QsdSystem {
    pub fn new(params: ModelParams, kernel: KernelSpec) -> Result<Self> {
        params.validate()?;
        kernel.validate()?;
        let l = build_lindblad(&params);
        let l_dag = l.dagger();
        let ops = [basis_operator(1)?, basis_operator(2)?, basis_operator(3)?, basis_operator(4)?];
        let mut e00 = StateVector::zero();
        e00[3] = C64::new(2.0, 0.0);
        Ok(QsdSystem {
            params,
            kernel,
            h: build_hamiltonian(&params),
            l,
            l_dag,
            l_sq: l * l,
            ops,
            o5_image: l_dag.apply(&e00),
        })
    }

    /// Ornstein-Uhlenbeck system with the bath rate taken from `params`.
    pub fn ou(params: ModelParams) -> Result<Self> {
        Self::new(params, KernelSpec::ou(params.gamma))
    }

    pub fn lindblad(&self) -> &Operator {
        &self.l
    }

    fn obar_partial(&self, f: &[C64; 4], psi: &StateVector) -> StateVector {
        let mut out = StateVector::zero();
        for j in 0..4 {
            out += self.ops[j].apply(psi) * f[j];
        }
        out
    }

    /// Observables of `psi` at time `t`.
    pub fn observe(&self, t: f64, psi: &StateVector) -> TrajectoryPoint {
        let norm = psi.norm();
        let unit = psi.normalized();
        let l_mean = unit.inner(&self.l.apply(&unit));
        let l2 = unit.inner(&self.l_sq.apply(&unit));
        TrajectoryPoint { t, norm, l_mean, c: unit.to_symmetric_basis(), dl2: (l2 - l_mean * l_mean).norm() }
    }
}

/// `Ōψ` with the noise integral evaluated by direct trapezoidal quadrature on
/// the noise grid.
pub fn obar_apply(
    sys: &QsdSystem,
    tables: &CoeffTables,
    noise: &NoisePath,
    t: f64,
    psi: &StateVector,
    drop_o5: bool,
) -> Result<StateVector> {
    if t > tables.horizon() + 1e-9 || t > noise.horizon() + 1e-9 {
        return Err(Error::grid("time beyond the coefficient tables or noise path"));
    }
    let mut out = sys.obar_partial(&tables.f_all(t), psi);
    if !drop_o5 {
        let h = noise.dt_half;
        let m = (t / h + 1e-9).floor() as usize;
        let mut acc = ZERO;
        for j in 0..=m {
            let w = if m == 0 { 0.0 } else if j == 0 || j == m { 0.5 * h } else { h };
            acc += tables.f5_at(t, j as f64 * h) * noise.samples[j] * w;
        }
        // O5 ψ = 2 ψ_11 |00⟩
        out[3] += I * acc * psi[0] * 2.0;
    }
    Ok(out)
}

/// Incremental evaluation of `∫_0^t X(t,s') z_{s'} ds'` on the noise grid for
/// a triangular table `X`.
///
/// Over every completed coefficient cell `[t_c, t_{c+1}]`, `X(t, ·)` is linear
/// in `s'`, so the cell's contribution is
/// `X(t,t_c) M0_c + X(t,t_{c+1}) M1_c` with moments of `z` that do not depend
/// on `t`. Those moments are cached once `z` in the cell is final.
struct NoiseIntegral {
    h: f64,
    /// Noise points per coefficient cell, when integral.
    ratio: Option<usize>,
    m0: Vec<C64>,
    m1: Vec<C64>,
}

impl NoiseIntegral {
    fn new(tables: &CoeffTables, h: f64) -> Self {
        let x = tables.step / h;
        let r = x.round();
        let ratio = if r >= 1.0 && (x - r).abs() < 1e-9 * r { Some(r as usize) } else { None };
        NoiseIntegral { h, ratio, m0: Vec::new(), m1: Vec::new() }
    }

    fn cell_moments(&self, z: &[C64], c: usize, r: usize) -> (C64, C64) {
        let h = self.h;
        let (mut a, mut b) = (ZERO, ZERO);
        for q in 0..=r {
            let w = if q == 0 || q == r { 0.5 * h } else { h };
            let th = q as f64 / r as f64;
            let v = z[c * r + q] * w;
            a += v * (1.0 - th);
            b += v * th;
        }
        (a, b)
    }

    /// Integral at noise index `m`; `z[..=committed]` is final.
    fn eval(&mut self, tables: Triangle<'_>, z: &[C64], m: usize, committed: usize) -> C64 {
        if m == 0 {
            return ZERO;
        }
        let Some(r) = self.ratio else {
            return self.direct(tables, z, m);
        };
        let last = tables.points - 1;
        let (mut k, mut th) = (m / r, (m % r) as f64 / r as f64);
        if k >= last {
            k = last - 1;
            th = 1.0;
        }
        let mut acc = ZERO;
        for c in 0..k {
            let (a, b) = if c < self.m0.len() {
                (self.m0[c], self.m1[c])
            } else {
                let ab = self.cell_moments(z, c, r);
                if c == self.m0.len() && (c + 1) * r <= committed {
                    self.m0.push(ab.0);
                    self.m1.push(ab.1);
                }
                ab
            };
            acc += tables.node_cell(k, th, c) * a + tables.node_cell(k, th, c + 1) * b;
        }
        // Partial cell [t_k, t].
        let start = k * r;
        if m > start {
            let h = self.h;
            let row_k = tables.row(k)[k];
            let next = tables.row(k + 1);
            for j in start..=m {
                let w = if j == start || j == m { 0.5 * h } else { h };
                let u = (j - start) as f64 / r as f64;
                let upper = next[k] * (1.0 - u) + next[k + 1] * u;
                let x = row_k * (1.0 - th) + upper * th;
                acc += x * z[j] * w;
            }
        }
        acc
    }

    fn direct(&self, tables: Triangle<'_>, z: &[C64], m: usize) -> C64 {
        let h = self.h;
        let t = m as f64 * h;
        let mut acc = ZERO;
        for j in 0..=m {
            let w = if j == 0 || j == m { 0.5 * h } else { h };
            acc += tables.at(t, j as f64 * h) * z[j] * w;
        }
        acc
    }
}

/// Memory integral `S(t) = ∫_0^t α*(t,s) ⟨L†⟩_s ds` of the shifted noise.
#[derive(Debug, Clone)]
pub struct ShiftedNoiseState {
    pub s: C64,
    dt: f64,
    decay: Option<f64>,
    history: Vec<C64>,
}

impl ShiftedNoiseState {
    fn new(kernel: &KernelSpec, dt: f64, ldag0: C64) -> Self {
        ShiftedNoiseState {
            s: ZERO,
            dt,
            decay: kernel.ou_gamma().map(|g| (-g * dt).exp()),
            history: alloc::vec![ldag0],
        }
    }

    /// `S` at the next step given `⟨L†⟩` there; does not commit.
    fn next(&self, kernel: &KernelSpec, ldag_next: C64) -> Result<C64> {
        let dt = self.dt;
        if let (Some(e), Some(g)) = (self.decay, kernel.ou_gamma()) {
            let prev = *self.history.last().unwrap();
            return Ok(self.s * e + (prev * e + ldag_next) * (0.5 * dt * 0.5 * g));
        }
        let n = self.history.len();
        let t = n as f64 * dt;
        let mut acc = ZERO;
        for (i, v) in self.history.iter().chain(core::iter::once(&ldag_next)).enumerate() {
            let w = if i == 0 || i == n { 0.5 * dt } else { dt };
            acc += kernel.eval(t, i as f64 * dt)?.conj() * v * w;
        }
        Ok(acc)
    }

    fn commit(&mut self, s: C64, ldag: C64) {
        self.s = s;
        self.history.push(ldag);
    }
}

struct Integrator<'a> {
    sys: &'a QsdSystem,
    tables: &'a CoeffTables,
    cfg: &'a TrajectoryConfig,
    integral: NoiseIntegral,
    /// Effective noise on the half-step grid (causally shifted in the
    /// nonlinear case).
    z: Vec<C64>,
    /// `∫_0^t K(t,u) ⟨L†⟩_u du`, the part of the shift from times after `s'`.
    shift_integral: NoiseIntegral,
    /// `⟨L†⟩` on the half-step grid, nonlinear case only.
    ldag: Vec<C64>,
    ratio: Option<usize>,
}

impl<'a> Integrator<'a> {
    fn new(sys: &'a QsdSystem, tables: &'a CoeffTables, noise: &NoisePath, cfg: &'a TrajectoryConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.steps()?;
        let h = 0.5 * cfg.dt;
        if (noise.dt_half - h).abs() > 1e-12 * h {
            return Err(Error::grid("noise path spacing must be half the trajectory step"));
        }
        if noise.samples.len() < 2 * n + 1 {
            return Err(Error::grid("noise path is shorter than the trajectory horizon"));
        }
        if tables.horizon() < cfg.horizon - 1e-9 {
            return Err(Error::grid("coefficient tables are shorter than the trajectory horizon"));
        }
        let ratio = {
            let y = tables.step / cfg.dt;
            let r = y.round();
            if r >= 1.0 && (y - r).abs() < 1e-9 * r {
                Some(r as usize)
            } else {
                None
            }
        };
        Ok(Integrator {
            sys,
            tables,
            cfg,
            integral: NoiseIntegral::new(tables, h),
            z: noise.samples[..2 * n + 1].to_vec(),
            shift_integral: NoiseIntegral::new(tables, h),
            ldag: match cfg.unraveling {
                Unraveling::Nonlinear => alloc::vec![ZERO; 2 * n + 1],
                Unraveling::Linear => Vec::new(),
            },
            ratio,
        })
    }

    fn f_at(&self, step: usize) -> [C64; 4] {
        match self.ratio {
            Some(r) => {
                let last = self.tables.points() - 1;
                let (k, th) = (step / r, (step % r) as f64 / r as f64);
                if last == 0 {
                    self.tables.f_cell(0, 0.0)
                } else if k >= last {
                    self.tables.f_cell(last - 1, 1.0)
                } else {
                    self.tables.f_cell(k, th)
                }
            }
            None => self.tables.f_all(step as f64 * self.cfg.dt),
        }
    }

    fn o5_integral(&mut self, psi: &StateVector, step: usize, committed: usize) -> C64 {
        if self.cfg.drop_o5 || psi[0] == ZERO || self.tables.points() < 2 {
            return ZERO;
        }
        let mut acc = self.integral.eval(self.tables.f5_tri(), &self.z, 2 * step, committed);
        if !self.ldag.is_empty() {
            acc += self.shift_integral.eval(self.tables.shift_tri(), &self.ldag, 2 * step, committed);
        }
        acc
    }

    fn obar(&mut self, psi: &StateVector, step: usize, committed: usize) -> (StateVector, C64) {
        let f = self.f_at(step);
        let ob = self.sys.obar_partial(&f, psi);
        (ob, self.o5_integral(psi, step, committed))
    }

    fn linear_rhs(&mut self, psi: &StateVector, step: usize, committed: usize) -> StateVector {
        let sys = self.sys;
        let (ob, integral) = self.obar(psi, step, committed);
        let zt = self.z[2 * step];
        let mut d = sys.h.apply(psi) * (-I) + sys.l.apply(psi) * zt - sys.l_dag.apply(&ob);
        if integral != ZERO {
            d = d - sys.o5_image * (I * integral * psi[0]);
        }
        d
    }

    fn nonlinear_rhs(&mut self, psi: &StateVector, step: usize, committed: usize) -> StateVector {
        let sys = self.sys;
        let ns = psi.norm_sqr();
        let lpsi = sys.l.apply(psi);
        let l_mean = psi.inner(&lpsi) / ns;
        let ldag_mean = l_mean.conj();
        let (ob, integral) = self.obar(psi, step, committed);
        let zt = self.z[2 * step];
        let mut a = sys.l_dag.apply(&ob) - ob * ldag_mean;
        if integral != ZERO {
            // Ō gains i·I·O5, O5 ψ = 2ψ_11|00⟩ and ⟨L†⟩ acts on that too.
            let mut o5psi = StateVector::zero();
            o5psi[3] = I * integral * psi[0] * 2.0;
            a = a + sys.o5_image * (I * integral * psi[0]) - o5psi * ldag_mean;
        }
        let a_mean = psi.inner(&a) / ns;
        sys.h.apply(psi) * (-I) + (lpsi - *psi * l_mean) * zt - (a - *psi * a_mean)
    }

    fn check(&self, psi: &StateVector, step: usize) -> Result<()> {
        if psi.is_finite() {
            Ok(())
        } else {
            Err(Error::Blowup { t: step as f64 * self.cfg.dt, s: None })
        }
    }

    fn run(&mut self, noise_base: &[C64], mut visit: impl FnMut(usize, f64, &StateVector)) -> Result<StateVector> {
        let n = self.cfg.steps()?;
        let dt = self.cfg.dt;
        let stride = self.cfg.stride;
        let mut psi = self.cfg.psi0;
        visit(0, 0.0, &psi);
        let mut shifted: Option<ShiftedNoiseState> = match self.cfg.unraveling {
            Unraveling::Nonlinear => {
                let l_mean = psi.inner(&self.sys.l.apply(&psi)) / psi.norm_sqr();
                self.ldag[0] = l_mean.conj();
                Some(ShiftedNoiseState::new(&self.sys.kernel, dt, l_mean.conj()))
            }
            Unraveling::Linear => None,
        };
        let linear = shifted.is_none();
        for step in 0..n {
            let committed = if linear { usize::MAX } else { 2 * step };
            let next = match shifted.as_mut() {
                None => {
                    let k1 = self.linear_rhs(&psi, step, committed);
                    let pred = psi + k1 * dt;
                    self.check(&pred, step + 1)?;
                    let k2 = self.linear_rhs(&pred, step + 1, committed);
                    psi + (k1 + k2) * (0.5 * dt)
                }
                Some(_) => {
                    let k1 = self.nonlinear_rhs(&psi, step, committed);
                    let pred = psi + k1 * dt;
                    self.check(&pred, step + 1)?;
                    let sh = shifted.as_ref().unwrap();
                    let pred_ldag = (pred.inner(&self.sys.l.apply(&pred)) / pred.norm_sqr()).conj();
                    let s_pred = sh.next(&self.sys.kernel, pred_ldag)?;
                    self.z[2 * step + 1] = noise_base[2 * step + 1] + (sh.s + s_pred) * 0.5;
                    self.z[2 * step + 2] = noise_base[2 * step + 2] + s_pred;
                    self.ldag[2 * step + 1] = (self.ldag[2 * step] + pred_ldag) * 0.5;
                    self.ldag[2 * step + 2] = pred_ldag;
                    let k2 = self.nonlinear_rhs(&pred, step + 1, committed);
                    let out = (psi + (k1 + k2) * (0.5 * dt)).normalized();
                    self.check(&out, step + 1)?;
                    let sh = shifted.as_mut().unwrap();
                    let ldag = (out.inner(&self.sys.l.apply(&out))).conj();
                    let s_new = sh.next(&self.sys.kernel, ldag)?;
                    self.z[2 * step + 1] = noise_base[2 * step + 1] + (sh.s + s_new) * 0.5;
                    self.z[2 * step + 2] = noise_base[2 * step + 2] + s_new;
                    self.ldag[2 * step + 1] = (self.ldag[2 * step] + ldag) * 0.5;
                    self.ldag[2 * step + 2] = ldag;
                    sh.commit(s_new, ldag);
                    out
                }
            };
            self.check(&next, step + 1)?;
            psi = next;
            if (step + 1) % stride == 0 {
                visit((step + 1) / stride, (step + 1) as f64 * dt, &psi);
            }
        }
        Ok(psi)
    }
}

/// Integrates one trajectory, calling `visit(record_index, t, ψ)` at every
/// recorded time. Returns the final state.
pub fn run_trajectory_with(
    cfg: &TrajectoryConfig,
    sys: &QsdSystem,
    tables: &CoeffTables,
    noise: &NoisePath,
    visit: impl FnMut(usize, f64, &StateVector),
) -> Result<StateVector> {
    let mut integ = Integrator::new(sys, tables, noise, cfg)?;
    integ.run(&noise.samples, visit)
}

pub fn run_trajectory(cfg: &TrajectoryConfig, sys: &QsdSystem, tables: &CoeffTables, noise: &NoisePath) -> Result<Trajectory> {
    let mut out = Trajectory { times: Vec::new(), states: Vec::new(), points: Vec::new(), seed: noise.seed };
    run_trajectory_with(cfg, sys, tables, noise, |_, t, psi| {
        out.times.push(t);
        if cfg.record == Record::States {
            out.states.push(*psi);
        }
        out.points.push(sys.observe(t, psi));
    })?;
    Ok(out)
}

/// Integrates the amplitudes on `|11⟩, (|10⟩±|01⟩)/√2, |00⟩` directly for
/// identical qubits with unit coupling, linear unraveling only:
///
/// ```text
/// ċ1 = [−i(2ω + J_z) − 2(F1 + F3)] c1
/// ċ2 = [i(J_z − J_xy) − 2(F1 − F3)] c2 + √2 (z*_t − 2F̃5) c1
/// ċ3 = i(J_xy + J_z) c3
/// ċ4 = i(2ω − J_z) c4 + √2 z*_t c2
/// ```
///
/// with `F̃5 = i ∫_0^t F5(t,s') z*_{s'} ds'`. Same Heun steps and noise as
/// the four-amplitude integrator. Returns `(c1..c4)` at the recorded times.
pub fn symmetric_basis_oracle(
    cfg: &TrajectoryConfig,
    sys: &QsdSystem,
    tables: &CoeffTables,
    noise: &NoisePath,
) -> Result<Vec<[C64; 4]>> {
    let p = sys.params;
    if !(p.omega_a == p.omega_b && p.kappa_a == 1.0 && p.kappa_b == 1.0) {
        return Err(Error::invalid("coefficient equations need identical qubits with unit coupling"));
    }
    if cfg.unraveling != Unraveling::Linear {
        return Err(Error::invalid("coefficient equations are linear-unraveling only"));
    }
    let mut integ = Integrator::new(sys, tables, noise, cfg)?;
    let n = cfg.steps()?;
    let dt = cfg.dt;
    let (w, jxy, jz) = (p.omega_a, p.j_xy, p.j_z);
    let r2 = core::f64::consts::SQRT_2;
    let mut rhs = |c: &[C64; 4], step: usize| -> [C64; 4] {
        let f = integ.f_at(step);
        let f1 = (f[0] + f[1]) * 0.5;
        let f3 = (f[2] + f[3]) * 0.5;
        let z = integ.z[2 * step];
        let integral = if cfg.drop_o5 || c[0] == ZERO || tables.points() < 2 {
            ZERO
        } else {
            integ.integral.eval(tables.f5_tri(), &integ.z, 2 * step, usize::MAX)
        };
        let f5t = I * integral;
        [
            (I * (-(2.0 * w + jz)) - (f1 + f3) * 2.0) * c[0],
            (I * (jz - jxy) - (f1 - f3) * 2.0) * c[1] + (z - f5t * 2.0) * c[0] * r2,
            I * (jxy + jz) * c[2],
            I * (2.0 * w - jz) * c[3] + z * c[1] * r2,
        ]
    };
    let mut c = cfg.psi0.to_symmetric_basis();
    let stride = cfg.stride.max(1);
    let mut out = alloc::vec![c];
    for step in 0..n {
        let k1 = rhs(&c, step);
        let pred: [C64; 4] = core::array::from_fn(|i| c[i] + k1[i] * dt);
        let k2 = rhs(&pred, step + 1);
        c = core::array::from_fn(|i| c[i] + (k1[i] + k2[i]) * (0.5 * dt));
        if c.iter().any(|x| !(x.re.is_finite() && x.im.is_finite())) {
            return Err(Error::Blowup { t: (step + 1) as f64 * dt, s: None });
        }
        if (step + 1) % stride == 0 {
            out.push(c);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::solve_fields;

    fn zero_tables(horizon: f64, step: f64) -> CoeffTables {
        let n = (horizon / step).round() as usize;
        CoeffTables {
            step,
            params: ModelParams::symmetric(0.0, 0.0, 0.0, 1.0),
            f: core::array::from_fn(|_| alloc::vec![ZERO; n + 1]),
            f5: alloc::vec![ZERO; (n + 1) * (n + 2) / 2],
            shift: alloc::vec![ZERO; (n + 1) * (n + 2) / 2],
        }
    }

    #[test]
    fn obar_vanishes_at_zero_time() {
        let p = ModelParams::symmetric(0.5, 0.5, 0.1, 1.0);
        let sys = QsdSystem::ou(p).unwrap();
        let tables = solve_fields(&p, &sys.kernel, 1.0, 0.05).unwrap();
        let noise = NoisePath::from_fn(1.0, 0.025, |t| C64::new(t.cos(), t.sin()));
        let psi = StateVector::from_label("11").unwrap();
        let ob = obar_apply(&sys, &tables, &noise, 0.0, &psi, false).unwrap();
        assert_eq!(ob.norm(), 0.0);
        let zero = NoisePath::zeros(1.0, 0.025);
        let a = obar_apply(&sys, &tables, &zero, 0.7, &psi, false).unwrap();
        let b = obar_apply(&sys, &tables, &zero, 0.7, &psi, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn incremental_noise_integral_matches_direct() {
        let p = ModelParams { omega_a: 0.3, omega_b: 0.5, j_xy: 0.4, j_z: 0.2, kappa_a: 1.0, kappa_b: 0.8, gamma: 1.2 };
        let sys = QsdSystem::ou(p).unwrap();
        let tables = solve_fields(&p, &sys.kernel, 1.0, 0.05).unwrap();
        let noise = NoisePath::from_fn(1.0, 0.0125, |t| C64::new((3.0 * t).sin(), t * t - 0.3));
        let mut integ = NoiseIntegral::new(&tables, 0.0125);
        assert_eq!(integ.ratio, Some(4));
        for m in 0..=80 {
            let fast = integ.eval(tables.f5_tri(), &noise.samples, m, m);
            let slow = integ.direct(tables.f5_tri(), &noise.samples, m);
            assert!((fast - slow).norm() < 1e-13, "m = {m}");
        }
        let psi = StateVector::from_label("11").unwrap();
        for (m, t) in [(36usize, 0.45), (80, 1.0)] {
            let ob = obar_apply(&sys, &tables, &noise, t, &psi, false).unwrap();
            let base = obar_apply(&sys, &tables, &noise, t, &psi, true).unwrap();
            let want = I * integ.direct(tables.f5_tri(), &noise.samples, m) * 2.0;
            assert!((ob[3] - base[3] - want).norm() < 1e-13);
        }
    }

    #[test]
    fn frozen_dynamics() {
        let p = ModelParams { omega_a: 0.0, omega_b: 0.0, j_xy: 0.0, j_z: 0.0, kappa_a: 0.0, kappa_b: 0.0, gamma: 1.0 };
        let sys = QsdSystem::ou(p).unwrap();
        let tables = zero_tables(1.0, 0.1);
        let noise = NoisePath::from_fn(1.0, 0.05, |t| C64::new(t, 1.0));
        let psi0 = StateVector::from_label("10").unwrap();
        let cfg = TrajectoryConfig::new(Unraveling::Linear, 0.1, 1.0, psi0);
        let tr = run_trajectory(&cfg, &sys, &tables, &noise).unwrap();
        assert_eq!(tr.points.len(), 11);
        assert!(tr.points.iter().all(|pt| pt.c == psi0.to_symmetric_basis()));
    }

    #[test]
    fn zero_horizon_records_initial_state() {
        let p = ModelParams::symmetric(0.5, 0.5, 0.0, 1.0);
        let sys = QsdSystem::ou(p).unwrap();
        let tables = solve_fields(&p, &sys.kernel, 0.0, 0.1).unwrap();
        let noise = NoisePath::zeros(0.0, 0.05);
        let mut cfg = TrajectoryConfig::new(Unraveling::Nonlinear, 0.1, 0.0, StateVector::from_label("11").unwrap());
        cfg.record = Record::States;
        let tr = run_trajectory(&cfg, &sys, &tables, &noise).unwrap();
        assert_eq!(tr.times, alloc::vec![0.0]);
        assert_eq!(tr.states, alloc::vec![cfg.psi0]);
    }

    #[test]
    fn rejects_mismatched_noise_grid() {
        let p = ModelParams::symmetric(0.5, 0.5, 0.0, 1.0);
        let sys = QsdSystem::ou(p).unwrap();
        let tables = solve_fields(&p, &sys.kernel, 1.0, 0.1).unwrap();
        let cfg = TrajectoryConfig::new(Unraveling::Linear, 0.1, 1.0, StateVector::from_label("11").unwrap());
        let noise = NoisePath::zeros(1.0, 0.1);
        assert!(matches!(run_trajectory(&cfg, &sys, &tables, &noise), Err(Error::Grid(_))));
        let short = NoisePath::zeros(0.5, 0.05);
        assert!(matches!(run_trajectory(&cfg, &sys, &tables, &short), Err(Error::Grid(_))));
    }

    #[test]
    fn rejects_unnormalized_start() {
        let p = ModelParams::symmetric(0.5, 0.5, 0.0, 1.0);
        let sys = QsdSystem::ou(p).unwrap();
        let tables = solve_fields(&p, &sys.kernel, 1.0, 0.1).unwrap();
        let cfg = TrajectoryConfig::new(Unraveling::Linear, 0.1, 1.0, StateVector::from_label("11").unwrap() * 2.0);
        assert!(matches!(run_trajectory(&cfg, &sys, &tables, &NoisePath::zeros(1.0, 0.05)), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn oracle_rejects_asymmetric_parameters() {
        let p = ModelParams { omega_a: 0.5, omega_b: 0.6, j_xy: 0.5, j_z: 0.0, kappa_a: 1.0, kappa_b: 1.0, gamma: 1.0 };
        let sys = QsdSystem::ou(p).unwrap();
        let tables = solve_fields(&p, &sys.kernel, 1.0, 0.1).unwrap();
        let cfg = TrajectoryConfig::new(Unraveling::Linear, 0.1, 1.0, StateVector::from_label("10").unwrap());
        assert!(symmetric_basis_oracle(&cfg, &sys, &tables, &NoisePath::zeros(1.0, 0.05)).is_err());
    }
}
