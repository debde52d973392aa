//! Validation solvers independent of the QSD machinery.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;


use crate::algebra::{build_hamiltonian, build_lindblad, ModelParams, Operator, C64, I};
use crate::error::{Error, Result};
use crate::fields::steps_in;
use crate::linalg::hermitian_eigenvalues;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrixSeries {
    pub times: Vec<f64>,
    pub rhos: Vec<Operator>,
}

/// Markov generator `−i[H,ρ] + LρL† − ½{L†L, ρ}` at unit rate.
pub fn lindblad_generator(h: &Operator, l: &Operator, rho: &Operator) -> Operator {
    let l_dag = l.dagger();
    let ldl = l_dag * *l;
    h.commutator(rho).scale(-I) + *l * *rho * l_dag - ldl.anticommutator(rho) * 0.5
}

/// Checks the density-matrix contract on `rho`: Hermitian, unit trace,
/// no eigenvalue below `−tol`.
pub fn check_density(rho: &Operator, tol: f64) -> Result<()> {
    if !rho.is_finite() {
        return Err(Error::NotDensityMatrix("non-finite entry".into()));
    }
    if !rho.is_hermitian(tol) {
        return Err(Error::NotDensityMatrix("not Hermitian".into()));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
        return Err(Error::NotDensityMatrix(alloc::format!("trace {tr}")));
    }
    let min = hermitian_eigenvalues(rho)?[0];
    if min < -tol {
        return Err(Error::NotDensityMatrix(alloc::format!("eigenvalue {min:e}")));
    }
    Ok(())
}

fn rk4(h: &Operator, l: &Operator, rho: &Operator, dt: f64) -> Operator {
    let k1 = lindblad_generator(h, l, rho);
    let k2 = lindblad_generator(h, l, &(*rho + k1 * (0.5 * dt)));
    let k3 = lindblad_generator(h, l, &(*rho + k2 * (0.5 * dt)));
    let k4 = lindblad_generator(h, l, &(*rho + k3 * dt));
    *rho + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// Integrates the Markov master equation with classical RK4 on `[0, T]`.
pub fn lindblad_solve(p: &ModelParams, rho0: &Operator, horizon: f64, dt: f64) -> Result<DensityMatrixSeries> {
    check_density(rho0, 1e-9)?;
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(Error::invalid("master equation needs dt > 0 and horizon >= 0"));
    }
    let n = steps_in(horizon, dt)?;
    let h = build_hamiltonian(p);
    let l = build_lindblad(p);
    let mut rho = *rho0;
    let mut out = DensityMatrixSeries { times: Vec::with_capacity(n + 1), rhos: Vec::with_capacity(n + 1) };
    out.times.push(0.0);
    out.rhos.push(rho);
    for k in 0..n {
        rho = rk4(&h, &l, &rho, dt);
        if !rho.is_finite() {
            return Err(Error::Blowup { t: (k + 1) as f64 * dt, s: None });
        }
        out.times.push((k + 1) as f64 * dt);
        out.rhos.push(rho);
    }
    Ok(out)
}

/// Long-time limit of the master equation from `rho0`. The generator has a
/// degenerate kernel, so the result depends on `rho0`.
pub fn lindblad_steady(p: &ModelParams, rho0: &Operator) -> Result<Operator> {
    check_density(rho0, 1e-9)?;
    let h = build_hamiltonian(p);
    let l = build_lindblad(p);
    let rate = (p.kappa_a * p.kappa_a + p.kappa_b * p.kappa_b).max(1e-3);
    let scale = 1.0 + h.frobenius_norm() + rate;
    let dt = (0.05 / scale).min(0.05);
    let horizon = 4000.0 / rate;
    let mut rho = *rho0;
    let mut t = 0.0;
    let mut residual = lindblad_generator(&h, &l, &rho).frobenius_norm();
    while t < horizon {
        if residual <= 1e-10 {
            return Ok(rho);
        }
        for _ in 0..100 {
            rho = rk4(&h, &l, &rho, dt);
        }
        t += 100.0 * dt;
        residual = lindblad_generator(&h, &l, &rho).frobenius_norm();
        if !residual.is_finite() {
            return Err(Error::Blowup { t, s: None });
        }
    }
    if residual <= 1e-8 {
        Ok(rho)
    } else {
        Err(Error::NotConverged { horizon, residual })
    }
}

/// `|⟨01|ψ(t)⟩|² = sin²(J_xy t)` from `|10⟩` without dissipation.
pub fn analytic_rabi(p: &ModelParams, t: f64) -> Result<f64> {
    if p.kappa_a != 0.0 || p.kappa_b != 0.0 {
        return Err(Error::invalid("closed form needs zero dissipation"));
    }
    if p.omega_a != p.omega_b {
        return Err(Error::invalid("closed form needs equal qubit frequencies"));
    }
    Ok((p.j_xy * t).sin().powi(2))
}

/// Dense square matrix on the system ⊗ mode space, row-major.
#[derive(Debug, Clone)]
struct Dense {
    n: usize,
    a: Vec<C64>,
}

impl Dense {
    fn zero(n: usize) -> Self {
        Dense { n, a: alloc::vec![C64::new(0.0, 0.0); n * n] }
    }

    fn mul(&self, o: &Dense) -> Dense {
        let n = self.n;
        let mut out = Dense::zero(n);
        for i in 0..n {
            for k in 0..n {
                let x = self.a[i * n + k];
                if x.re == 0.0 && x.im == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.a[i * n + j] += x * o.a[k * n + j];
                }
            }
        }
        out
    }

    fn dagger(&self) -> Dense {
        let n = self.n;
        let mut out = Dense::zero(n);
        for i in 0..n {
            for j in 0..n {
                out.a[j * n + i] = self.a[i * n + j].conj();
            }
        }
        out
    }

    fn axpy(&self, k: C64, o: &Dense) -> Dense {
        Dense { n: self.n, a: self.a.iter().zip(&o.a).map(|(x, y)| x + y * k).collect() }
    }

    /// `op ⊗ 1` when `op` is 4×4 and the mode has `m` levels.
    fn system(op: &Operator, m: usize) -> Dense {
        let mut out = Dense::zero(4 * m);
        for i in 0..4 {
            for j in 0..4 {
                for f in 0..m {
                    out.a[(i * m + f) * 4 * m + j * m + f] = op[(i, j)];
                }
            }
        }
        out
    }

    fn annihilation(m: usize) -> Dense {
        let mut out = Dense::zero(4 * m);
        for s in 0..4 {
            for f in 1..m {
                out.a[(s * m + f - 1) * 4 * m + s * m + f] = C64::new((f as f64).sqrt(), 0.0);
            }
        }
        out
    }
}

/// Exact reduced dynamics for the Ornstein-Uhlenbeck kernel
/// `α(t,s) = (γ/2) e^{−γ|t−s|}` through a damped pseudomode `a`:
///
/// ```text
/// ρ̇ = −i[H + g(L†a + La†), ρ] + Γ (aρa† − ½{a†a, ρ}),  g² = γ/2, Γ = 2γ
/// ```
///
/// with the mode starting in vacuum and truncated to `levels` Fock states.
/// The truncation is exact when `ρ0` holds fewer than `levels` excitations.
/// Classical RK4; returns the reduced two-qubit state.
pub fn pseudomode_solve(p: &ModelParams, rho0: &Operator, horizon: f64, dt: f64, levels: usize) -> Result<DensityMatrixSeries> {
    p.validate()?;
    check_density(rho0, 1e-9)?;
    if levels < 2 {
        return Err(Error::invalid("pseudomode needs at least two levels"));
    }
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(Error::invalid("pseudomode needs dt > 0 and horizon >= 0"));
    }
    let n = steps_in(horizon, dt)?;
    let m = levels;
    let g = (0.5 * p.gamma).sqrt();
    let rate = 2.0 * p.gamma;
    let a = Dense::annihilation(m);
    let ad = a.dagger();
    let l = Dense::system(&build_lindblad(p), m);
    let ld = l.dagger();
    let h = Dense::system(&build_hamiltonian(p), m)
        .axpy(C64::new(g, 0.0), &ld.mul(&a))
        .axpy(C64::new(g, 0.0), &l.mul(&ad));
    let ada = ad.mul(&a);
    let gen = |r: &Dense| -> Dense {
        let comm = h.mul(r).axpy(C64::new(-1.0, 0.0), &r.mul(&h));
        let anti = ada.mul(r).axpy(C64::new(1.0, 0.0), &r.mul(&ada));
        let jump = a.mul(r).mul(&ad);
        let mut out = Dense::zero(r.n);
        for i in 0..out.a.len() {
            out.a[i] = -I * comm.a[i] + (jump.a[i] - anti.a[i] * 0.5) * rate;
        }
        out
    };
    let reduce = |r: &Dense| -> Operator {
        let mut out = Operator::zero();
        for i in 0..4 {
            for j in 0..4 {
                for f in 0..m {
                    out[(i, j)] += r.a[(i * m + f) * 4 * m + j * m + f];
                }
            }
        }
        out
    };
    let mut rho = Dense::zero(4 * m);
    for i in 0..4 {
        for j in 0..4 {
            rho.a[i * m * 4 * m + j * m] = rho0[(i, j)];
        }
    }
    let mut out = DensityMatrixSeries { times: Vec::with_capacity(n + 1), rhos: Vec::with_capacity(n + 1) };
    out.times.push(0.0);
    out.rhos.push(reduce(&rho));
    let half = C64::new(0.5 * dt, 0.0);
    for k in 0..n {
        let k1 = gen(&rho);
        let k2 = gen(&rho.axpy(half, &k1));
        let k3 = gen(&rho.axpy(half, &k2));
        let k4 = gen(&rho.axpy(C64::new(dt, 0.0), &k3));
        let sixth = C64::new(dt / 6.0, 0.0);
        rho = rho.axpy(sixth, &k1).axpy(sixth * 2.0, &k2).axpy(sixth * 2.0, &k3).axpy(sixth, &k4);
        let red = reduce(&rho);
        if !red.is_finite() {
            return Err(Error::Blowup { t: (k + 1) as f64 * dt, s: None });
        }
        out.times.push((k + 1) as f64 * dt);
        out.rhos.push(red);
    }
    Ok(out)
}
