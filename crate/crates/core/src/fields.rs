//! Coefficient fields of the O operator.
//!
//! The O operator is expanded as
//! `O(t,s,z*) = Σ_{j≤4} f_j(t,s) O_j + i ∫_0^t ds' f5(t,s,s') z*_{s'} O_5`.
//! The fields obey a closed system of first-order equations in `t` whose
//! coefficients involve the convolutions
//! `F_j(t) = ∫_0^t α(t,s) f_j(t,s) ds` and `F5(t,s') = ∫_0^t α(t,s) f5(t,s,s') ds`,
//! with the moving boundary `f1(t,t)=κ_A`, `f2(t,t)=κ_B`, `f3(t,t)=f4(t,t)=0`,
//! `f5(t,t,s')=0`, `f5(t,s,t) = −i[κ_A f3(t,s) + κ_B f4(t,s)]`.
//!
//! Method of lines: the `s` and `s'` grids share the `t` step `Δc`, so the
//! boundary lands on a grid point after every step. Each step is a Heun step
//! with the trapezoidal convolutions recomputed at both stages.
//!
//! Cost is `O(n³)` time and `O(n²)` memory for `n = T/Δc` whenever `f5` is
//! nonzero; when the `f5` boundary column vanishes identically (single-qubit
//! limit) the `f5` block is never touched and the solve is `O(n²)`.
//!
//! F5 argument placement: in the `f1..f4` equations `F5` is `F5(t,s)`; in the
//! `f5(t,s,s')` equation it is `F5(t,s')`, paired with `f_j(t,s)`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;


use crate::algebra::{ModelParams, C64, I, ZERO};
use crate::error::{Error, Result};
use crate::noise::KernelSpec;

/// Convolutions of one slice with the kernel at the slice time.
#[derive(Debug, Clone, PartialEq)]
pub struct Convolutions {
    /// `F1..F4`.
    pub f: [C64; 4],
    /// `F5(t, s')` for every `s'` on the slice grid.
    pub f5: Vec<C64>,
}

/// Time derivatives of a slice.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDerivatives {
    pub f: [Vec<C64>; 4],
    /// Row-major over `s × s'`, `len × len`.
    pub f5: Vec<C64>,
}

/// Coefficient fields on `{0, Δc, …, t} × {…}` at one time `t`.
#[derive(Debug, Clone)]
pub struct FieldSlice {
    step: f64,
    len: usize,
    stride: usize,
    kappa: (f64, f64),
    f: [Vec<C64>; 4],
    f5: Vec<C64>,
    f5_active: bool,
    pred_f: [Vec<C64>; 4],
    pred_f5: Vec<C64>,
}

impl FieldSlice {
    /// Slice at `t = 0`: a single grid point carrying the boundary values.
    /// `capacity` is the largest number of grid points the slice will reach.
    pub fn initial(p: &ModelParams, step: f64, capacity: usize) -> Self {
        let capacity = capacity.max(1);
        let mut f: [Vec<C64>; 4] = core::array::from_fn(|_| Vec::with_capacity(capacity));
        f[0].push(C64::new(p.kappa_a, 0.0));
        f[1].push(C64::new(p.kappa_b, 0.0));
        f[2].push(ZERO);
        f[3].push(ZERO);
        FieldSlice {
            step,
            len: 1,
            stride: capacity,
            kappa: (p.kappa_a, p.kappa_b),
            f,
            f5: Vec::new(),
            f5_active: false,
            pred_f: core::array::from_fn(|_| Vec::with_capacity(capacity)),
            pred_f5: Vec::new(),
        }
    }

    pub fn t(&self) -> f64 {
        (self.len - 1) as f64 * self.step
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of grid points, `t/Δc + 1`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `f_j(t, s_i)` for `j ∈ 1..=4`.
    pub fn f(&self, j: usize, i: usize) -> C64 {
        self.f[j - 1][i]
    }

    /// `f5(t, s_i, s'_k)`.
    pub fn f5(&self, i: usize, k: usize) -> C64 {
        if !self.f5_active {
            return if k == self.len - 1 { self.boundary_column(i) } else { ZERO };
        }
        self.f5[i * self.stride + k]
    }

    fn boundary_column(&self, i: usize) -> C64 {
        -I * (self.f[2][i] * self.kappa.0 + self.f[3][i] * self.kappa.1)
    }

    /// Largest modulus of `f5` over the slice.
    pub fn f5_max_abs(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.len {
            for k in 0..self.len {
                worst = worst.max(self.f5(i, k).norm());
            }
        }
        worst
    }

    /// Largest violation of the boundary conditions at `s = t` and `s' = t`.
    pub fn boundary_violation(&self) -> f64 {
        let last = self.len - 1;
        let (ka, kb) = self.kappa;
        let mut worst = (self.f[0][last] - ka).norm();
        worst = worst.max((self.f[1][last] - kb).norm());
        worst = worst.max(self.f[2][last].norm()).max(self.f[3][last].norm());
        for k in 0..self.len {
            worst = worst.max(self.f5(last, k).norm());
        }
        for i in 0..self.len {
            worst = worst.max((self.f5(i, last) - self.boundary_column(i)).norm());
        }
        worst
    }

    /// Trapezoidal `F1..F4` and `F5(t, ·)` at the slice time.
    pub fn convolutions(&self, kernel: &KernelSpec) -> Result<Convolutions> {
        let row = kernel_row(kernel, self.len - 1, self.step)?;
        Ok(self.convolutions_with_row(&row))
    }

    fn convolutions_with_row(&self, alpha: &[C64]) -> Convolutions {
        let n = self.len;
        let mut out = Convolutions { f: [ZERO; 4], f5: alloc::vec![ZERO; n] };
        if n == 1 {
            return out;
        }
        for i in 0..n {
            let w = trapezoid_weight(i, n, self.step);
            let coef = alpha[i] * w;
            for j in 0..4 {
                out.f[j] += coef * self.f[j][i];
            }
        }
        if self.f5_active {
            accumulate_rows(&self.f5, self.stride, n, alpha, self.step, &mut out.f5);
        } else {
            // Only the boundary column is nonzero.
            let mut acc = ZERO;
            for i in 0..n {
                acc += alpha[i] * trapezoid_weight(i, n, self.step) * self.boundary_column(i);
            }
            out.f5[n - 1] = acc;
        }
        out
    }

    /// One Heun step `t → t + Δc`, followed by grid extension with the
    /// boundary values. `conv` must be the convolutions of the current slice;
    /// returns the convolutions at the new time.
    pub fn advance(&mut self, p: &ModelParams, kernel: &KernelSpec, conv: &Convolutions) -> Result<Convolutions> {
        let row = kernel_row(kernel, self.len, self.step)?;
        self.advance_with_row(p, conv, &row)
    }

    fn advance_with_row(&mut self, p: &ModelParams, conv: &Convolutions, alpha_next: &[C64]) -> Result<Convolutions> {
        let n = self.len;
        let m = n + 1;
        if m > self.stride {
            self.grow(m);
        }
        let dc = self.step;
        let stride = self.stride;
        let (ka, kb) = (p.kappa_a, p.kappa_b);
        let t_next = n as f64 * dc;

        // Stage 1: predictor on the old grid, then boundary extension.
        let mat1 = field_matrix(p, &conv.f);
        for j in 0..4 {
            self.pred_f[j].clear();
        }
        for i in 0..n {
            let fi = [self.f[0][i], self.f[1][i], self.f[2][i], self.f[3][i]];
            let d = field_rhs(&mat1, p, fi, conv.f5[i]);
            for j in 0..4 {
                self.pred_f[j].push(fi[j] + d[j] * dc);
            }
        }
        self.pred_f[0].push(C64::new(ka, 0.0));
        self.pred_f[1].push(C64::new(kb, 0.0));
        self.pred_f[2].push(ZERO);
        self.pred_f[3].push(ZERO);

        let pred_column: Vec<C64> = (0..m)
            .map(|i| -I * (self.pred_f[2][i] * ka + self.pred_f[3][i] * kb))
            .collect();
        let pred_active = self.f5_active || pred_column.iter().any(|z| *z != ZERO);

        let mut conv2 = Convolutions { f: [ZERO; 4], f5: alloc::vec![ZERO; m] };
        for i in 0..m {
            let coef = alpha_next[i] * trapezoid_weight(i, m, dc);
            for j in 0..4 {
                conv2.f[j] += coef * self.pred_f[j][i];
            }
        }
        if pred_active {
            if self.pred_f5.len() < stride * stride {
                self.pred_f5.resize(stride * stride, ZERO);
            }
            let a1 = C64::new(1.0, 0.0) + f5_growth(p, &conv.f) * dc;
            for i in 0..m {
                let dst = &mut self.pred_f5[i * stride..i * stride + m];
                if i < n {
                    if self.f5_active {
                        let b = f5_source(p, i, &self.f) * dc;
                        let src = &self.f5[i * stride..i * stride + n];
                        for k in 0..n {
                            dst[k] = src[k] * a1 + conv.f5[k] * b;
                        }
                    } else {
                        for x in dst[..n].iter_mut() {
                            *x = ZERO;
                        }
                    }
                    dst[n] = pred_column[i];
                } else {
                    for x in dst.iter_mut() {
                        *x = ZERO;
                    }
                }
                let coef = alpha_next[i] * trapezoid_weight(i, m, dc);
                if i < n {
                    for (acc, x) in conv2.f5.iter_mut().zip(dst.iter()) {
                        *acc += coef * x;
                    }
                }
            }
        }

        // Stage 2: corrector on the old grid using predictor convolutions.
        let mat2 = field_matrix(p, &conv2.f);
        for i in 0..n {
            let fp = [self.pred_f[0][i], self.pred_f[1][i], self.pred_f[2][i], self.pred_f[3][i]];
            let d = field_rhs(&mat2, p, fp, conv2.f5[i]);
            for j in 0..4 {
                self.f[j][i] = (self.f[j][i] + fp[j] + d[j] * dc) * 0.5;
            }
        }
        self.f[0].push(C64::new(ka, 0.0));
        self.f[1].push(C64::new(kb, 0.0));
        self.f[2].push(ZERO);
        self.f[3].push(ZERO);
        self.len = m;

        for i in 0..m {
            for j in 0..4 {
                let v = self.f[j][i];
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::Blowup { t: t_next, s: Some(i as f64 * dc) });
                }
            }
        }

        let column: Vec<C64> = (0..m).map(|i| self.boundary_column(i)).collect();
        let active = pred_active || column.iter().any(|z| *z != ZERO);
        let mut next = Convolutions { f: [ZERO; 4], f5: alloc::vec![ZERO; m] };
        for i in 0..m {
            let coef = alpha_next[i] * trapezoid_weight(i, m, dc);
            for j in 0..4 {
                next.f[j] += coef * self.f[j][i];
            }
        }
        if active {
            if self.f5.len() < stride * stride {
                self.f5.resize(stride * stride, ZERO);
            }
            let a2 = (C64::new(1.0, 0.0) + f5_growth(p, &conv2.f) * dc) * 0.5;
            for i in 0..m {
                let b2 = if i < n { f5_source(p, i, &self.pred_f) * (0.5 * dc) } else { ZERO };
                let dst = &mut self.f5[i * stride..i * stride + m];
                if i < n {
                    if pred_active {
                        let pred = &self.pred_f5[i * stride..i * stride + n];
                        for k in 0..n {
                            dst[k] = dst[k] * 0.5 + pred[k] * a2 + conv2.f5[k] * b2;
                        }
                    }
                    dst[n] = column[i];
                } else {
                    for x in dst.iter_mut() {
                        *x = ZERO;
                    }
                }
                if i < n {
                    let coef = alpha_next[i] * trapezoid_weight(i, m, dc);
                    for (acc, x) in next.f5.iter_mut().zip(dst.iter()) {
                        *acc += coef * x;
                    }
                }
            }
        } else {
            // f5 vanishes except on a zero boundary column.
            next.f5[n] = ZERO;
        }
        self.f5_active = active;

        for (j, x) in next.f.iter().enumerate() {
            if !(x.re.is_finite() && x.im.is_finite()) {
                return Err(Error::Blowup { t: t_next, s: Some(j as f64 * 0.0) });
            }
        }
        if let Some(k) = next.f5.iter().position(|x| !(x.re.is_finite() && x.im.is_finite())) {
            return Err(Error::Blowup { t: t_next, s: Some(k as f64 * dc) });
        }
        Ok(next)
    }

    fn grow(&mut self, min: usize) {
        let new_stride = min.max(self.stride * 2);
        if self.f5_active {
            let mut f5 = alloc::vec![ZERO; new_stride * new_stride];
            for i in 0..self.len {
                f5[i * new_stride..i * new_stride + self.len]
                    .copy_from_slice(&self.f5[i * self.stride..i * self.stride + self.len]);
            }
            self.f5 = f5;
        } else {
            self.f5.clear();
        }
        self.pred_f5.clear();
        self.stride = new_stride;
    }
}

fn accumulate_rows(f5: &[C64], stride: usize, n: usize, alpha: &[C64], dc: f64, out: &mut [C64]) {
    for i in 0..n {
        let coef = alpha[i] * trapezoid_weight(i, n, dc);
        let row = &f5[i * stride..i * stride + n];
        for (acc, x) in out.iter_mut().zip(row.iter()) {
            *acc += coef * x;
        }
    }
}

fn trapezoid_weight(i: usize, n: usize, h: f64) -> f64 {
    if n < 2 {
        0.0
    } else if i == 0 || i == n - 1 {
        0.5 * h
    } else {
        h
    }
}

/// `α(t_k, s_i)` for `i ∈ 0..=k` on a grid of spacing `step`.
fn kernel_row(kernel: &KernelSpec, k: usize, step: f64) -> Result<Vec<C64>> {
    let t = k as f64 * step;
    (0..=k).map(|i| kernel.eval(t, i as f64 * step)).collect()
}

/// Linear part of the `f1..f4` equations as a 4×4 matrix acting on
/// `(f1, f2, f3, f4)`.
fn field_matrix(p: &ModelParams, big: &[C64; 4]) -> [[C64; 4]; 4] {
    let [f1, f2, f3, f4] = *big;
    let (ka, kb) = (p.kappa_a, p.kappa_b);
    let two_i = I * 2.0;
    let diag_a = two_i * p.omega_a + f1 * ka + f3 * kb;
    let diag_b = two_i * p.omega_b + f4 * ka + f2 * kb;
    let zz = two_i * p.j_z + f4 * ka + f3 * kb;
    let flip_a = -I * p.j_xy - f1 * kb + f4 * kb;
    let flip_b = -I * p.j_xy - f2 * ka + f3 * ka;
    [
        [diag_a, ZERO, flip_a, zz],
        [ZERO, diag_b, zz, flip_b],
        [flip_b, zz, diag_b, ZERO],
        [zz, flip_a, ZERO, diag_a],
    ]
}

fn field_rhs(mat: &[[C64; 4]; 4], p: &ModelParams, f: [C64; 4], f5_ts: C64) -> [C64; 4] {
    let src_a = -I * p.kappa_b * f5_ts;
    let src_b = -I * p.kappa_a * f5_ts;
    let src = [src_a, src_b, src_b, src_a];
    core::array::from_fn(|r| mat[r][0] * f[0] + mat[r][1] * f[1] + mat[r][2] * f[2] + mat[r][3] * f[3] + src[r])
}

/// Coefficient of `f5` in its own equation.
fn f5_growth(p: &ModelParams, big: &[C64; 4]) -> C64 {
    I * (2.0 * (p.omega_a + p.omega_b)) + (big[0] + big[3]) * p.kappa_a + (big[1] + big[2]) * p.kappa_b
}

/// Factor multiplying `F5(t,s')` in the `f5(t,s,s')` equation.
fn f5_source(p: &ModelParams, i: usize, f: &[Vec<C64>; 4]) -> C64 {
    (f[0][i] - f[3][i]) * p.kappa_a + (f[1][i] - f[2][i]) * p.kappa_b
}

/// Right-hand sides of the field equations for a whole slice, given the
/// slice's convolutions.
pub fn rhs_fields(slice: &FieldSlice, conv: &Convolutions, p: &ModelParams) -> FieldDerivatives {
    let n = slice.len;
    let mat = field_matrix(p, &conv.f);
    let mut f: [Vec<C64>; 4] = core::array::from_fn(|_| Vec::with_capacity(n));
    for i in 0..n {
        let fi = [slice.f[0][i], slice.f[1][i], slice.f[2][i], slice.f[3][i]];
        let d = field_rhs(&mat, p, fi, conv.f5[i]);
        for j in 0..4 {
            f[j].push(d[j]);
        }
    }
    let growth = f5_growth(p, &conv.f);
    let mut f5 = alloc::vec![ZERO; n * n];
    for i in 0..n {
        let b = f5_source(p, i, &slice.f);
        for k in 0..n {
            f5[i * n + k] = growth * slice.f5(i, k) + conv.f5[k] * b;
        }
    }
    FieldDerivatives { f, f5 }
}

/// Lower-triangular table `X(t_k, t_c)`, `c ≤ k`, stored row-major with
/// row `k` starting at `k(k+1)/2`, linear in both arguments between nodes.
#[derive(Debug, Clone, Copy)]
pub struct Triangle<'a> {
    pub step: f64,
    pub points: usize,
    pub data: &'a [C64],
}

impl<'a> Triangle<'a> {
    pub fn row(&self, k: usize) -> &'a [C64] {
        let start = k * (k + 1) / 2;
        &self.data[start..start + k + 1]
    }

    fn row_value(&self, k: usize, sp: f64) -> C64 {
        let row = self.row(k);
        let y = (sp / self.step).max(0.0);
        let c = y.floor() as usize;
        if c >= k {
            return row[k];
        }
        let u = y - c as f64;
        row[c] * (1.0 - u) + row[c + 1] * u
    }

    /// Value at `(t, s')`, `s' ≤ t`.
    pub fn at(&self, t: f64, sp: f64) -> C64 {
        let (k, th) = locate(self.step, self.points, t);
        self.cell(k, th, sp)
    }

    /// Value at `t = (k + θ) Δc`.
    pub fn cell(&self, k: usize, th: f64, sp: f64) -> C64 {
        let a = self.row_value(k, sp);
        if th == 0.0 {
            return a;
        }
        a * (1.0 - th) + self.row_value(k + 1, sp) * th
    }

    /// Value at `t = (k + θ) Δc` and node `c`; needs `c ≤ k`, or `c = k + 1`
    /// with `θ = 1`.
    pub fn node_cell(&self, k: usize, th: f64, c: usize) -> C64 {
        if c > k {
            return self.row(k + 1)[c];
        }
        if th == 0.0 {
            return self.row(k)[c];
        }
        self.row(k)[c] * (1.0 - th) + self.row(k + 1)[c] * th
    }
}

fn locate(step: f64, points: usize, t: f64) -> (usize, f64) {
    let last = points - 1;
    if last == 0 {
        return (0, 0.0);
    }
    let x = (t / step).clamp(0.0, last as f64);
    let mut k = x.floor() as usize;
    if k >= last {
        k = last - 1;
    }
    (k, (x - k as f64).clamp(0.0, 1.0))
}

/// Noise-independent tables `F1..F4(t)`, `F5(t, s')` and the shift kernel
/// `K(t, u) = ∫_0^u F5(t,s') α(u,s') ds'`, `s', u ≤ t`, on the grid
/// `t_k = k Δc`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffTables {
    pub step: f64,
    pub params: ModelParams,
    /// `F1..F4` over the `t` grid.
    pub f: [Vec<C64>; 4],
    /// `F5` as a lower triangle (see [`Triangle`]).
    pub f5: Vec<C64>,
    /// `K` in the same layout as `f5`.
    pub shift: Vec<C64>,
}

impl CoeffTables {
    pub fn points(&self) -> usize {
        self.f[0].len()
    }

    pub fn horizon(&self) -> f64 {
        (self.points() - 1) as f64 * self.step
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points()).map(move |k| k as f64 * self.step)
    }

    pub fn f5_tri(&self) -> Triangle<'_> {
        Triangle { step: self.step, points: self.points(), data: &self.f5 }
    }

    pub fn shift_tri(&self) -> Triangle<'_> {
        Triangle { step: self.step, points: self.points(), data: &self.shift }
    }

    pub fn f5_row(&self, k: usize) -> &[C64] {
        self.f5_tri().row(k)
    }

    /// Grid cell and fractional position of `t`.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        locate(self.step, self.points(), t)
    }

    /// `F_j(t)`, `j ∈ 1..=4`, linear in `t`.
    pub fn f_at(&self, j: usize, t: f64) -> C64 {
        let (k, th) = self.locate(t);
        self.f_cell(k, th)[j - 1]
    }

    /// All four `F_j(t)`.
    pub fn f_all(&self, t: f64) -> [C64; 4] {
        let (k, th) = self.locate(t);
        self.f_cell(k, th)
    }

    /// `F1..F4` at `t = (k + θ) Δc`.
    pub fn f_cell(&self, k: usize, th: f64) -> [C64; 4] {
        core::array::from_fn(|j| {
            let col = &self.f[j];
            if th == 0.0 {
                col[k]
            } else {
                col[k] * (1.0 - th) + col[k + 1] * th
            }
        })
    }

    /// `F5(t, s')` for `s' ≤ t`, linear in `t` and in `s'`.
    pub fn f5_at(&self, t: f64, sp: f64) -> C64 {
        self.f5_tri().at(t, sp)
    }

    /// `F5` at `t = (k + θ) Δc`.
    pub fn f5_cell(&self, k: usize, th: f64, sp: f64) -> C64 {
        self.f5_tri().cell(k, th, sp)
    }

    /// `F5(t, t_c)` at coefficient-grid node `c` with `t_c ≤ t`.
    pub fn f5_node(&self, t: f64, c: usize) -> C64 {
        let (k, th) = self.locate(t);
        self.f5_tri().node_cell(k, th, c)
    }

    /// `F5(t, t_c)` at `t = (k + θ) Δc`; needs `c ≤ k`, or `c = k + 1` with `θ = 1`.
    pub fn f5_node_cell(&self, k: usize, th: f64, c: usize) -> C64 {
        self.f5_tri().node_cell(k, th, c)
    }

    /// `K(t, u)` for `u ≤ t`.
    pub fn shift_at(&self, t: f64, u: f64) -> C64 {
        self.shift_tri().at(t, u)
    }
}

/// `K(t_k, u_c) = ∫_0^{u_c} F5(t_k,s') α(u_c,s') ds'` with `F5` linear in `s'`
/// between nodes. Exact cell weights for the OU kernel, trapezoidal
/// otherwise.
pub fn shift_table(step: f64, f5: &[C64], points: usize, kernel: &KernelSpec) -> Result<Vec<C64>> {
    let tri = Triangle { step, points, data: f5 };
    let mut out = Vec::with_capacity(f5.len());
    if let Some(g) = kernel.ou_gamma() {
        let x = g * step;
        let e = (-x).exp();
        let w0 = if x < 1e-3 {
            x / 4.0 - x * x / 6.0 + x * x * x / 16.0 - x * x * x * x / 60.0
        } else {
            (1.0 - e - x * e) / (2.0 * x)
        };
        let w1 = 0.5 * (1.0 - e) - w0;
        for k in 0..points {
            let row = tri.row(k);
            let mut acc = ZERO;
            out.push(acc);
            for c in 0..k {
                acc = acc * e + row[c] * w0 + row[c + 1] * w1;
                out.push(acc);
            }
        }
        return Ok(out);
    }
    for k in 0..points {
        let row = tri.row(k);
        for c in 0..=k {
            let u = c as f64 * step;
            let mut acc = ZERO;
            for i in 0..=c {
                let w = if c == 0 { 0.0 } else if i == 0 || i == c { 0.5 * step } else { step };
                acc += row[i] * kernel.eval(u, i as f64 * step)? * w;
            }
            out.push(acc);
        }
    }
    Ok(out)
}

/// Integrates the field equations on `[0, T]` with step `Δc` and returns the
/// convolution tables.
pub fn solve_fields(p: &ModelParams, kernel: &KernelSpec, horizon: f64, step: f64) -> Result<CoeffTables> {
    p.validate()?;
    kernel.validate()?;
    if !(step > 0.0) || !(horizon >= 0.0) {
        return Err(Error::invalid("field solve needs step > 0 and horizon >= 0"));
    }
    let n = steps_in(horizon, step)?;
    let lag_row = |k: usize| -> Result<Vec<C64>> {
        match kernel {
            KernelSpec::Ou { gamma } => Ok((0..=k)
                .map(|i| C64::new(0.5 * gamma * (-gamma * ((k - i) as f64 * step)).exp(), 0.0))
                .collect()),
            KernelSpec::Table { .. } => kernel_row(kernel, k, step),
        }
    };
    let mut slice = FieldSlice::initial(p, step, n + 1);
    let mut conv = slice.convolutions_with_row(&lag_row(0)?);
    let mut f: [Vec<C64>; 4] = core::array::from_fn(|_| Vec::with_capacity(n + 1));
    let mut f5 = Vec::with_capacity((n + 1) * (n + 2) / 2);
    for j in 0..4 {
        f[j].push(conv.f[j]);
    }
    f5.extend_from_slice(&conv.f5);
    for k in 0..n {
        let row = lag_row(k + 1)?;
        conv = slice.advance_with_row(p, &conv, &row)?;
        for j in 0..4 {
            f[j].push(conv.f[j]);
        }
        f5.extend_from_slice(&conv.f5);
    }
    let shift = shift_table(step, &f5, n + 1, kernel)?;
    Ok(CoeffTables { step, params: *p, f, f5, shift })
}

/// Number of whole steps of size `step` in `horizon`; errors unless the
/// ratio is an integer.
pub fn steps_in(horizon: f64, step: f64) -> Result<usize> {
    let x = horizon / step;
    let r = x.round();
    if (x - r).abs() > 1e-9 * r.max(1.0) {
        return Err(Error::grid(alloc::format!("horizon {horizon} is not a multiple of step {step}")));
    }
    Ok(r as usize)
}

/// Single-qubit closed equation `Ḟ = γκ/2 − γF + 2iωF + κF²`, `F(0) = 0`,
/// integrated with classical RK4. Valid for the OU kernel.
pub fn riccati_oracle(kappa: f64, omega: f64, gamma: f64, horizon: f64, dt: f64) -> Result<Vec<C64>> {
    let n = steps_in(horizon, dt)?;
    let rhs = |f: C64| C64::new(0.5 * gamma * kappa, 0.0) - f * gamma + I * (2.0 * omega) * f + f * f * kappa;
    let mut out = Vec::with_capacity(n + 1);
    let mut f = ZERO;
    out.push(f);
    for _ in 0..n {
        let k1 = rhs(f);
        let k2 = rhs(f + k1 * (0.5 * dt));
        let k3 = rhs(f + k2 * (0.5 * dt));
        let k4 = rhs(f + k3 * dt);
        f += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        out.push(f);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_qubit() -> ModelParams {
        ModelParams { omega_a: 0.5, omega_b: 0.0, j_xy: 0.0, j_z: 0.0, kappa_a: 1.0, kappa_b: 0.0, gamma: 1.0 }
    }

    #[test]
    fn shift_table_matches_quadrature() {
        let p = ModelParams::symmetric(0.5, 0.5, 0.1, 1.3);
        let t = solve_fields(&p, &KernelSpec::ou(1.3), 1.0, 0.05).unwrap();
        let tri = t.f5_tri();
        let n = 4000;
        for (k, c) in [(20usize, 20usize), (20, 7), (11, 3), (5, 0)] {
            let (tk, u) = (k as f64 * t.step, c as f64 * t.step);
            let mut acc = ZERO;
            for i in 0..=n {
                let sp = u * i as f64 / n as f64;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 } * u / n as f64;
                acc += tri.at(tk, sp) * 0.65 * (-1.3 * (u - sp)).exp() * w;
            }
            assert!((t.shift_tri().row(k)[c] - acc).norm() < 1e-8, "k={k} c={c}");
        }
        // Small γΔc uses the series weights.
        let slow = ModelParams::symmetric(0.5, 0.5, 0.1, 0.01);
        let a = solve_fields(&slow, &KernelSpec::ou(0.01), 0.2, 0.02).unwrap();
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.02).collect();
        let values = grid.iter().flat_map(|&x| grid.iter().map(move |&y| C64::new(0.005 * (-0.01 * (x - y).abs()).exp(), 0.0))).collect();
        let b = shift_table(0.02, &a.f5, a.points(), &KernelSpec::Table { grid, values }).unwrap();
        for (x, y) in a.shift.iter().zip(&b) {
            assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn zero_time_convolutions_vanish() {
        let p = ModelParams::symmetric(0.5, 0.5, 0.1, 1.0);
        let slice = FieldSlice::initial(&p, 0.1, 4);
        let conv = slice.convolutions(&KernelSpec::ou(1.0)).unwrap();
        assert_eq!(conv.f, [ZERO; 4]);
        assert_eq!(conv.f5, alloc::vec![ZERO]);
        let d = rhs_fields(&slice, &conv, &ModelParams::symmetric(0.0, 0.0, 0.0, 1.0));
        for j in 0..4 {
            assert_eq!(d.f[j][0], ZERO);
        }
    }

    #[test]
    fn single_qubit_rhs_reduces() {
        let p = single_qubit();
        let kernel = KernelSpec::ou(1.0);
        let mut slice = FieldSlice::initial(&p, 0.05, 8);
        let mut conv = slice.convolutions(&kernel).unwrap();
        for _ in 0..5 {
            conv = slice.advance(&p, &kernel, &conv).unwrap();
        }
        let d = rhs_fields(&slice, &conv, &p);
        for i in 0..slice.len() {
            let want = (I * 2.0 * p.omega_a + conv.f[0] * p.kappa_a) * slice.f(1, i);
            assert!((d.f[0][i] - want).norm() < 1e-15);
            for j in 1..4 {
                assert_eq!(d.f[j][i], ZERO);
            }
        }
        assert!(d.f5.iter().all(|x| *x == ZERO));
    }

    #[test]
    fn exchange_symmetry_of_rhs() {
        // Random-ish slice values with symmetric parameters: swapping
        // (f1,f3) ↔ (f2,f4) swaps the derivatives.
        let p = ModelParams::symmetric(0.4, 0.7, 0.2, 1.3);
        let f = [C64::new(0.3, 0.1), C64::new(-0.2, 0.5), C64::new(0.05, -0.4), C64::new(0.6, 0.2)];
        let big = [C64::new(0.2, 0.3), C64::new(0.1, -0.2), C64::new(-0.3, 0.05), C64::new(0.4, 0.1)];
        let f5 = C64::new(0.25, -0.15);
        let d = field_rhs(&field_matrix(&p, &big), &p, f, f5);
        let fs = [f[1], f[0], f[3], f[2]];
        let bigs = [big[1], big[0], big[3], big[2]];
        let ds = field_rhs(&field_matrix(&p, &bigs), &p, fs, f5);
        assert!((d[0] - ds[1]).norm() < 1e-15);
        assert!((d[1] - ds[0]).norm() < 1e-15);
        assert!((d[2] - ds[3]).norm() < 1e-15);
        assert!((d[3] - ds[2]).norm() < 1e-15);
    }

    #[test]
    fn matrix_form_matches_term_by_term_equations() {
        let p = ModelParams { omega_a: 0.3, omega_b: 0.7, j_xy: 0.45, j_z: -0.2, kappa_a: 0.9, kappa_b: 1.2, gamma: 1.0 };
        let f = [C64::new(0.3, 0.1), C64::new(-0.2, 0.5), C64::new(0.05, -0.4), C64::new(0.6, 0.2)];
        let big = [C64::new(0.2, 0.3), C64::new(0.1, -0.2), C64::new(-0.3, 0.05), C64::new(0.4, 0.1)];
        let g5 = C64::new(0.25, -0.15);
        let [f1, f2, f3, f4] = f;
        let [g1, g2, g3, g4] = big;
        let (ka, kb, wa, wb, jxy, jz) = (p.kappa_a, p.kappa_b, p.omega_a, p.omega_b, p.j_xy, p.j_z);
        let i = I;
        let want = [
            i * 2.0 * wa * f1 + g1 * f1 * ka + g3 * f1 * kb - i * jxy * f3 - g1 * f3 * kb + g4 * f3 * kb
                + i * 2.0 * jz * f4 + g4 * f4 * ka + g3 * f4 * kb - i * kb * g5,
            i * 2.0 * wb * f2 + g4 * f2 * ka + g2 * f2 * kb + i * 2.0 * jz * f3 + g4 * f3 * ka + g3 * f3 * kb
                - i * jxy * f4 - g2 * f4 * ka + g3 * f4 * ka - i * ka * g5,
            -i * jxy * f1 - g2 * f1 * ka + g3 * f1 * ka + i * 2.0 * jz * f2 + g4 * f2 * ka + g3 * f2 * kb
                + i * 2.0 * wb * f3 + g4 * f3 * ka + g2 * f3 * kb - i * ka * g5,
            i * 2.0 * jz * f1 + g4 * f1 * ka + g3 * f1 * kb - i * jxy * f2 - g1 * f2 * kb + g4 * f2 * kb
                + i * 2.0 * wa * f4 + g1 * f4 * ka + g3 * f4 * kb - i * kb * g5,
        ];
        let got = field_rhs(&field_matrix(&p, &big), &p, f, g5);
        for r in 0..4 {
            assert!((got[r] - want[r]).norm() < 1e-14, "row {r}");
        }
    }

    #[test]
    fn first_step_builds_two_point_grid_with_boundary() {
        let p = ModelParams::symmetric(0.5, 0.5, 0.1, 1.0);
        let kernel = KernelSpec::ou(1.0);
        let mut slice = FieldSlice::initial(&p, 0.1, 1);
        let conv = slice.convolutions(&kernel).unwrap();
        slice.advance(&p, &kernel, &conv).unwrap();
        assert_eq!(slice.len(), 2);
        assert!((slice.t() - 0.1).abs() < 1e-15);
        assert_eq!(slice.boundary_violation(), 0.0);
    }

    #[test]
    fn boundary_holds_every_step() {
        let p = ModelParams { omega_a: 0.3, omega_b: 0.6, j_xy: 0.5, j_z: 0.2, kappa_a: 1.0, kappa_b: 0.7, gamma: 1.0 };
        let kernel = KernelSpec::ou(1.0);
        let mut slice = FieldSlice::initial(&p, 0.05, 2);
        let mut conv = slice.convolutions(&kernel).unwrap();
        for _ in 0..40 {
            conv = slice.advance(&p, &kernel, &conv).unwrap();
            assert!(slice.boundary_violation() <= 1e-12);
        }
        // The convolutions returned by advance match a fresh quadrature.
        let fresh = slice.convolutions(&kernel).unwrap();
        for j in 0..4 {
            assert!((fresh.f[j] - conv.f[j]).norm() < 1e-13);
        }
        for (a, b) in fresh.f5.iter().zip(conv.f5.iter()) {
            assert!((a - b).norm() < 1e-13);
        }
        // F5(t, t) = −i[κ_A F3 + κ_B F4].
        let last = *conv.f5.last().unwrap();
        let want = -I * (conv.f[2] * p.kappa_a + conv.f[3] * p.kappa_b);
        assert!((last - want).norm() < 1e-13);
    }

    #[test]
    fn local_error_is_third_order() {
        // One step of h versus two steps of h/2 from t = 0, compared at s = 0.
        let p = ModelParams { omega_a: 0.4, omega_b: 0.55, j_xy: 0.5, j_z: 0.2, kappa_a: 1.0, kappa_b: 0.8, gamma: 1.5 };
        let kernel = KernelSpec::ou(1.5);
        let gap = |h: f64| {
            let mut one = FieldSlice::initial(&p, h, 2);
            let c = one.convolutions(&kernel).unwrap();
            one.advance(&p, &kernel, &c).unwrap();
            let mut two = FieldSlice::initial(&p, h / 2.0, 3);
            let mut c = two.convolutions(&kernel).unwrap();
            c = two.advance(&p, &kernel, &c).unwrap();
            two.advance(&p, &kernel, &c).unwrap();
            (0..4).map(|j| (one.f(j + 1, 0) - two.f(j + 1, 0)).norm()).fold(0.0, f64::max)
        };
        let r = gap(0.1) / gap(0.05);
        assert!(r > 6.0 && r < 10.0, "ratio {r}");
    }

    #[test]
    fn zero_horizon_gives_single_entry() {
        let p = ModelParams::symmetric(0.5, 0.5, 0.1, 1.0);
        let t = solve_fields(&p, &KernelSpec::ou(1.0), 0.0, 0.1).unwrap();
        assert_eq!(t.points(), 1);
        assert_eq!(t.f_at(1, 0.0), ZERO);
        assert_eq!(t.f5, alloc::vec![ZERO]);
    }

    #[test]
    fn rejects_non_integral_grid() {
        let p = ModelParams::symmetric(0.5, 0.5, 0.1, 1.0);
        assert!(matches!(solve_fields(&p, &KernelSpec::ou(1.0), 1.0, 0.3), Err(Error::Grid(_))));
    }

    #[test]
    fn constant_field_convolution_matches_closed_form() {
        // f ≡ c over the slice: F = c (1 − e^{−γt})/2 up to O(Δc²).
        let p = single_qubit();
        let gamma = 1.0;
        let kernel = KernelSpec::ou(gamma);
        let err = |h: f64| {
            let n = (2.0 / h).round() as usize;
            let mut slice = FieldSlice::initial(&p, h, n + 1);
            slice.len = n + 1;
            for j in 0..4 {
                slice.f[j] = alloc::vec![C64::new(0.7, -0.2); n + 1];
            }
            let conv = slice.convolutions(&kernel).unwrap();
            let want = C64::new(0.7, -0.2) * (1.0 - (-gamma * 2.0f64).exp()) * 0.5;
            (conv.f[0] - want).norm()
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e1 < 1e-4);
        assert!((e1 / e2 - 4.0).abs() < 0.2, "ratio {}", e1 / e2);
    }

    #[test]
    fn riccati_fixed_point() {
        let f = riccati_oracle(1.0, 0.0, 4.0, 20.0, 1e-3).unwrap();
        assert_eq!(f[0], ZERO);
        let fss = 2.0 - 2.0f64.sqrt();
        assert!((f.last().unwrap().re - fss).abs() < 1e-9);
        assert!(f.windows(2).all(|w| w[1].re >= w[0].re - 1e-15));
        let markov = riccati_oracle(1.0, 0.0, 100.0, 5.0, 1e-4).unwrap();
        assert!((markov.last().unwrap().re - 0.5).abs() < 0.005);
    }

    #[test]
    fn table_interpolation() {
        let p = ModelParams::symmetric(0.5, 0.5, 0.1, 1.0);
        let t = solve_fields(&p, &KernelSpec::ou(1.0), 1.0, 0.1).unwrap();
        let a = t.f_at(1, 0.3);
        let b = t.f_at(1, 0.4);
        assert!((t.f_at(1, 0.35) - (a + b) * 0.5).norm() < 1e-15);
        assert_eq!(t.f5_node(0.3, 3), t.f5_row(3)[3]);
        assert!((t.f5_at(0.4, 0.2) - t.f5_row(4)[2]).norm() < 1e-15);
        let mid = t.f5_at(0.35, 0.2);
        assert!((mid - (t.f5_row(3)[2] + t.f5_row(4)[2]) * 0.5).norm() < 1e-15);
    }
}
