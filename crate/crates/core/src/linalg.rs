//! Small dense complex eigenvalue routines.
//!
//! Hessenberg reduction followed by single-shift complex QR iteration with
//! Wilkinson shifts. Sized for the 4×4 problems of this crate and the
//! occasional covariance diagnostic; no eigenvectors are produced.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;


use crate::algebra::{Operator, C64, DIM, ZERO};
use crate::error::{Error, Result};

/// Eigenvalues of a general complex `n×n` matrix stored row-major.
pub fn eigenvalues(matrix: &[C64], n: usize) -> Result<Vec<C64>> {
    assert_eq!(matrix.len(), n * n, "matrix storage does not match n");
    let mut h = matrix.to_vec();
    hessenberg(&mut h, n);
    hessenberg_qr(&mut h, n)
}

pub fn operator_eigenvalues(op: &Operator) -> Result<Vec<C64>> {
    let flat: Vec<C64> = op.0.iter().flatten().copied().collect();
    eigenvalues(&flat, DIM)
}

/// Eigenvalues of a Hermitian operator, ascending. Imaginary parts (rounding
/// only) are dropped.
pub fn hermitian_eigenvalues(op: &Operator) -> Result<Vec<f64>> {
    let herm = (*op + op.dagger()) * 0.5;
    let mut ev: Vec<f64> = operator_eigenvalues(&herm)?.into_iter().map(|z| z.re).collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    Ok(ev)
}

/// `½‖a − b‖₁` for Hermitian `a`, `b`.
pub fn trace_distance(a: &Operator, b: &Operator) -> Result<f64> {
    let ev = hermitian_eigenvalues(&(*a - *b))?;
    Ok(0.5 * ev.iter().map(|x| x.abs()).sum::<f64>())
}

fn hessenberg(a: &mut [C64], n: usize) {
    if n < 3 {
        return;
    }
    let mut v = alloc::vec![ZERO; n];
    for k in 0..n - 2 {
        let norm: f64 = (k + 1..n).map(|i| a[i * n + k].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        let phase = if x0.norm() == 0.0 { C64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        for i in 0..n {
            v[i] = ZERO;
        }
        for i in k + 1..n {
            v[i] = a[i * n + k];
        }
        v[k + 1] -= alpha;
        let vnorm: f64 = (k + 1..n).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for i in k + 1..n {
            v[i] /= vnorm;
        }
        // A ← (I − 2vv†) A
        for c in 0..n {
            let dot: C64 = (k + 1..n).map(|i| v[i].conj() * a[i * n + c]).sum();
            for i in k + 1..n {
                a[i * n + c] -= v[i] * dot * 2.0;
            }
        }
        // A ← A (I − 2vv†)
        for r in 0..n {
            let dot: C64 = (k + 1..n).map(|j| a[r * n + j] * v[j]).sum();
            for j in k + 1..n {
                a[r * n + j] -= dot * v[j].conj() * 2.0;
            }
        }
        for i in k + 2..n {
            a[i * n + k] = ZERO;
        }
    }
}

/// Rotation `[[c, s], [−s̄, c]]` mapping `(a, b)` to `(r, 0)`.
fn givens(a: C64, b: C64) -> (f64, C64) {
    let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
    if r == 0.0 {
        return (1.0, ZERO);
    }
    let an = a.norm();
    if an == 0.0 {
        return (0.0, C64::new(1.0, 0.0));
    }
    (an / r, (a / an) * b.conj() / r)
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    // Eigenvalue of [[a, b], [c, d]] closest to d.
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr * 0.25 - det).sqrt();
    let l1 = tr * 0.5 + disc;
    let l2 = tr * 0.5 - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn hessenberg_qr(h: &mut [C64], n: usize) -> Result<Vec<C64>> {
    let mut eig = alloc::vec![ZERO; n];
    if n == 0 {
        return Ok(eig);
    }
    let eps = f64::EPSILON;
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut rot: Vec<(f64, C64)> = Vec::with_capacity(n);
    loop {
        if hi == 0 {
            eig[0] = h[0];
            break;
        }
        // Find the start of the unreduced block ending at hi.
        let mut lo = hi;
        while lo > 0 {
            let sub = h[lo * n + lo - 1].norm();
            let scale = h[lo * n + lo].norm() + h[(lo - 1) * n + lo - 1].norm();
            let scale = if scale == 0.0 { 1.0 } else { scale };
            if sub <= eps * scale {
                h[lo * n + lo - 1] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            eig[hi] = h[hi * n + hi];
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > 60 * n {
            return Err(Error::EigenNoConvergence);
        }
        let mu = if iter % 11 == 0 {
            // Exceptional shift to break cycles.
            h[hi * n + hi] + C64::new(h[hi * n + hi - 1].norm(), 0.0) * 0.75
        } else {
            wilkinson_shift(
                h[(hi - 1) * n + hi - 1],
                h[(hi - 1) * n + hi],
                h[hi * n + hi - 1],
                h[hi * n + hi],
            )
        };
        for k in lo..=hi {
            h[k * n + k] -= mu;
        }
        rot.clear();
        for k in lo..hi {
            let (c, s) = givens(h[k * n + k], h[(k + 1) * n + k]);
            rot.push((c, s));
            for col in k..=hi {
                let x = h[k * n + col];
                let y = h[(k + 1) * n + col];
                h[k * n + col] = x * c + s * y;
                h[(k + 1) * n + col] = -s.conj() * x + y * c;
            }
        }
        for (idx, &(c, s)) in rot.iter().enumerate() {
            let k = lo + idx;
            let top = (k + 2).min(hi);
            for row in lo..=top {
                let x = h[row * n + k];
                let y = h[row * n + k + 1];
                h[row * n + k] = x * c + s.conj() * y;
                h[row * n + k + 1] = -s * x + y * c;
            }
        }
        for k in lo..=hi {
            h[k * n + k] += mu;
        }
    }
    Ok(eig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::I;

    fn sorted_re(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn triangular_matrix_returns_diagonal() {
        let mut op = Operator::zero();
        let d = [C64::new(3.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.5, -2.0), C64::new(2.0, 0.0)];
        for i in 0..4 {
            op[(i, i)] = d[i];
            for j in i + 1..4 {
                op[(i, j)] = C64::new(0.3 * (i + j) as f64, 0.1);
            }
        }
        let got = sorted_re(operator_eigenvalues(&op).unwrap());
        let want = sorted_re(d.to_vec());
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).norm() < 1e-12, "{g} vs {w}");
        }
    }

    #[test]
    fn similarity_transform_preserves_spectrum() {
        // A = P D P^-1 with P unit upper triangular (inverse computed by hand).
        let d = [C64::new(1.0, 0.0), C64::new(2.0, 1.0), C64::new(-0.5, 0.5), C64::new(0.0, -1.0)];
        let mut p = Operator::identity();
        p[(0, 1)] = C64::new(0.5, 0.2);
        p[(1, 2)] = C64::new(-0.3, 0.0);
        p[(2, 3)] = I * 0.7;
        p[(0, 3)] = C64::new(0.1, 0.1);
        // Lower-triangular perturbation so the result is not triangular.
        let mut q = Operator::identity();
        q[(3, 0)] = C64::new(0.4, 0.0);
        q[(2, 1)] = C64::new(0.0, 0.6);
        // Inverses of unit triangular matrices by forward/back substitution.
        let inv = |m: &Operator, upper: bool| {
            let mut out = Operator::identity();
            for col in 0..4 {
                let order: Vec<usize> = if upper { (0..4).rev().collect() } else { (0..4).collect() };
                for &r in &order {
                    let mut acc = if r == col { C64::new(1.0, 0.0) } else { ZERO };
                    for k in 0..4 {
                        if k != r && ((upper && k > r) || (!upper && k < r)) {
                            acc -= m[(r, k)] * out[(k, col)];
                        }
                    }
                    out[(r, col)] = acc;
                }
            }
            out
        };
        let s = p * q;
        let s_inv = inv(&q, false) * inv(&p, true);
        assert!((s * s_inv).max_abs_diff(&Operator::identity()) < 1e-12);
        let mut dm = Operator::zero();
        for i in 0..4 {
            dm[(i, i)] = d[i];
        }
        let a = s * dm * s_inv;
        let got = sorted_re(operator_eigenvalues(&a).unwrap());
        let want = sorted_re(d.to_vec());
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).norm() < 1e-10, "{g} vs {w}");
        }
    }

    #[test]
    fn larger_hermitian_matrix() {
        // Tridiagonal Toeplitz: eigenvalues 2 - 2cos(kπ/(n+1)).
        let n = 12;
        let mut m = alloc::vec![ZERO; n * n];
        for i in 0..n {
            m[i * n + i] = C64::new(2.0, 0.0);
            if i + 1 < n {
                m[i * n + i + 1] = C64::new(-1.0, 0.0);
                m[(i + 1) * n + i] = C64::new(-1.0, 0.0);
            }
        }
        let mut got: Vec<f64> = eigenvalues(&m, n).unwrap().iter().map(|z| z.re).collect();
        got.sort_by(|a, b| a.total_cmp(b));
        for (k, g) in got.iter().enumerate() {
            let want = 2.0 - 2.0 * (((k + 1) as f64) * core::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert!((g - want).abs() < 1e-10);
        }
    }

    #[test]
    fn trace_distance_of_orthogonal_projectors_is_one() {
        let a = Operator::diag([1.0, 0.0, 0.0, 0.0]);
        let b = Operator::diag([0.0, 0.0, 0.0, 1.0]);
        assert!((trace_distance(&a, &b).unwrap() - 1.0).abs() < 1e-14);
        assert!(trace_distance(&a, &a).unwrap() < 1e-15);
    }
}
