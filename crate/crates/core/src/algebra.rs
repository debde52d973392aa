//! Fixed-dimension complex algebra on the two-qubit Hilbert space.
//!
//! Single-qubit matrices are written in the `(|1⟩, |0⟩)` order, so
//! `σ_z = diag(1, −1)` and `σ_- = |0⟩⟨1|`. Two-qubit objects use the product
//! order `(|11⟩, |10⟩, |01⟩, |00⟩)` with qubit A as the left factor.

#[allow(unused_imports)]
use num_traits::Float;
use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};


use crate::error::{Error, Result};

pub type C64 = num_complex::Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Hilbert-space dimension.
pub const DIM: usize = 4;

/// Computational basis labels in storage order.
pub const BASIS_LABELS: [&str; DIM] = ["11", "10", "01", "00"];

/// Pure two-qubit state in the `(|11⟩, |10⟩, |01⟩, |00⟩)` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(pub [C64; DIM]);

/// Dense 4×4 complex matrix, `m[row][col]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Operator(pub [[C64; DIM]; DIM]);

impl StateVector {
    pub const fn zero() -> Self {
        StateVector([ZERO; DIM])
    }

    /// Computational basis state by storage index.
    pub fn basis(index: usize) -> Self {
        let mut v = Self::zero();
        v.0[index] = ONE;
        v
    }

    /// Parses `"11"`, `"10"`, `"01"` or `"00"` (qubit A first).
    pub fn from_label(label: &str) -> Result<Self> {
        BASIS_LABELS
            .iter()
            .position(|l| *l == label)
            .map(Self::basis)
            .ok_or_else(|| Error::invalid(alloc::format!("unknown basis label {label:?}")))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        self.scale(C64::new(1.0 / n, 0.0))
    }

    pub fn scale(&self, k: C64) -> Self {
        StateVector(self.0.map(|a| a * k))
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|self⟩⟨self|`.
    pub fn projector(&self) -> Operator {
        let mut m = Operator::zero();
        for r in 0..DIM {
            for c in 0..DIM {
                m.0[r][c] = self.0[r] * self.0[c].conj();
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Amplitudes `(c1, c2, c3, c4)` on `|11⟩`, `(|10⟩+|01⟩)/√2`,
    /// `(|10⟩−|01⟩)/√2`, `|00⟩`.
    pub fn to_symmetric_basis(&self) -> [C64; DIM] {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let [a11, a10, a01, a00] = self.0;
        [a11, (a10 + a01) * h, (a10 - a01) * h, a00]
    }

    pub fn from_symmetric_basis(c: [C64; DIM]) -> Self {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        StateVector([c[0], (c[1] + c[2]) * h, (c[1] - c[2]) * h, c[3]])
    }
}

impl Index<usize> for StateVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for StateVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.0[i]
    }
}

impl Add for StateVector {
    type Output = StateVector;
    fn add(self, rhs: StateVector) -> StateVector {
        let mut out = self;
        out += rhs;
        out
    }
}

impl AddAssign for StateVector {
    fn add_assign(&mut self, rhs: StateVector) {
        for (a, b) in self.0.iter_mut().zip(rhs.0.iter()) {
            *a += b;
        }
    }
}

impl Sub for StateVector {
    type Output = StateVector;
    fn sub(self, rhs: StateVector) -> StateVector {
        let mut out = self;
        for (a, b) in out.0.iter_mut().zip(rhs.0.iter()) {
            *a -= b;
        }
        out
    }
}

impl Mul<f64> for StateVector {
    type Output = StateVector;
    fn mul(self, k: f64) -> StateVector {
        StateVector(self.0.map(|a| a * k))
    }
}

impl Mul<C64> for StateVector {
    type Output = StateVector;
    fn mul(self, k: C64) -> StateVector {
        self.scale(k)
    }
}

impl Operator {
    pub const fn zero() -> Self {
        Operator([[ZERO; DIM]; DIM])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..DIM {
            m.0[i][i] = ONE;
        }
        m
    }

    pub fn diag(d: [f64; DIM]) -> Self {
        let mut m = Self::zero();
        for i in 0..DIM {
            m.0[i][i] = C64::new(d[i], 0.0);
        }
        m
    }

    /// Kronecker product of two single-qubit matrices (A ⊗ B).
    pub fn kron(a: [[C64; 2]; 2], b: [[C64; 2]; 2]) -> Self {
        let mut m = Self::zero();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        m.0[2 * i + k][2 * j + l] = a[i][j] * b[k][l];
                    }
                }
            }
        }
        m
    }

    pub fn dagger(&self) -> Self {
        let mut m = Self::zero();
        for r in 0..DIM {
            for c in 0..DIM {
                m.0[r][c] = self.0[c][r].conj();
            }
        }
        m
    }

    pub fn conj(&self) -> Self {
        Operator(self.0.map(|row| row.map(|x| x.conj())))
    }

    pub fn scale(&self, k: C64) -> Self {
        Operator(self.0.map(|row| row.map(|x| x * k)))
    }

    pub fn apply(&self, psi: &StateVector) -> StateVector {
        let mut out = StateVector::zero();
        for r in 0..DIM {
            let row = &self.0[r];
            out.0[r] = row[0] * psi.0[0] + row[1] * psi.0[1] + row[2] * psi.0[2] + row[3] * psi.0[3];
        }
        out
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        *self * *other - *other * *self
    }

    pub fn anticommutator(&self, other: &Operator) -> Operator {
        *self * *other + *other * *self
    }

    pub fn trace(&self) -> C64 {
        (0..DIM).map(|i| self.0[i][i]).sum()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..DIM {
            for c in 0..DIM {
                worst = worst.max((self.0[r][c] - other.0[r][c]).norm());
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().flatten().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.dagger()) <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.re.is_finite() && x.im.is_finite())
    }
}

impl Index<(usize, usize)> for Operator {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.0[r][c]
    }
}

impl IndexMut<(usize, usize)> for Operator {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.0[r][c]
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        let mut out = self;
        out += rhs;
        out
    }
}

impl AddAssign for Operator {
    fn add_assign(&mut self, rhs: Operator) {
        for r in 0..DIM {
            for c in 0..DIM {
                self.0[r][c] += rhs.0[r][c];
            }
        }
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        let mut out = self;
        for r in 0..DIM {
            for c in 0..DIM {
                out.0[r][c] -= rhs.0[r][c];
            }
        }
        out
    }
}

impl Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale(-ONE)
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        let mut out = Operator::zero();
        for r in 0..DIM {
            for c in 0..DIM {
                let mut acc = ZERO;
                for k in 0..DIM {
                    acc += self.0[r][k] * rhs.0[k][c];
                }
                out.0[r][c] = acc;
            }
        }
        out
    }
}

impl Mul<StateVector> for Operator {
    type Output = StateVector;
    fn mul(self, psi: StateVector) -> StateVector {
        self.apply(&psi)
    }
}

impl Mul<f64> for Operator {
    type Output = Operator;
    fn mul(self, k: f64) -> Operator {
        self.scale(C64::new(k, 0.0))
    }
}

/// Model constants. Frequencies and couplings are in units of a reference
/// frequency set to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub omega_a: f64,
    pub omega_b: f64,
    pub j_xy: f64,
    pub j_z: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    /// Inverse memory time of the Ornstein-Uhlenbeck bath.
    pub gamma: f64,
}

impl ModelParams {
    /// Identical qubits with unit coupling.
    pub fn symmetric(omega: f64, j_xy: f64, j_z: f64, gamma: f64) -> Self {
        ModelParams {
            omega_a: omega,
            omega_b: omega,
            j_xy,
            j_z,
            kappa_a: 1.0,
            kappa_b: 1.0,
            gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.omega_a,
            self.omega_b,
            self.j_xy,
            self.j_z,
            self.kappa_a,
            self.kappa_b,
            self.gamma,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("model parameters must be finite"));
        }
        if self.gamma <= 0.0 {
            return Err(Error::invalid("gamma must be positive"));
        }
        Ok(())
    }

    pub fn is_exchange_symmetric(&self) -> bool {
        self.omega_a == self.omega_b && self.kappa_a == self.kappa_b
    }
}

fn m2(a: [[f64; 2]; 2]) -> [[C64; 2]; 2] {
    a.map(|row| row.map(|x| C64::new(x, 0.0)))
}

const ID2: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];
const SZ2: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, -1.0]];
const SM2: [[f64; 2]; 2] = [[0.0, 0.0], [1.0, 0.0]];
const SP2: [[f64; 2]; 2] = [[0.0, 1.0], [0.0, 0.0]];

pub fn sigma_z_a() -> Operator {
    Operator::kron(m2(SZ2), m2(ID2))
}
pub fn sigma_z_b() -> Operator {
    Operator::kron(m2(ID2), m2(SZ2))
}
pub fn sigma_minus_a() -> Operator {
    Operator::kron(m2(SM2), m2(ID2))
}
pub fn sigma_minus_b() -> Operator {
    Operator::kron(m2(ID2), m2(SM2))
}
pub fn sigma_plus_a() -> Operator {
    Operator::kron(m2(SP2), m2(ID2))
}
pub fn sigma_plus_b() -> Operator {
    Operator::kron(m2(ID2), m2(SP2))
}

/// `σ_y ⊗ σ_y`, used for the spin flip in the concurrence.
pub fn sigma_y_sigma_y() -> Operator {
    let sy = [[ZERO, -I], [I, ZERO]];
    Operator::kron(sy, sy)
}

/// `ω_A σ_z^A + ω_B σ_z^B + J_xy(σ_+^A σ_-^B + σ_-^A σ_+^B) + J_z σ_z^A σ_z^B`.
pub fn build_hamiltonian(p: &ModelParams) -> Operator {
    sigma_z_a() * p.omega_a
        + sigma_z_b() * p.omega_b
        + (sigma_plus_a() * sigma_minus_b() + sigma_minus_a() * sigma_plus_b()) * p.j_xy
        + sigma_z_a() * sigma_z_b() * p.j_z
}

/// `L = κ_A σ_-^A + κ_B σ_-^B`.
pub fn build_lindblad(p: &ModelParams) -> Operator {
    sigma_minus_a() * p.kappa_a + sigma_minus_b() * p.kappa_b
}

/// Basis operators of the O-operator expansion, `j ∈ 1..=5`:
/// `σ_-^A, σ_-^B, σ_z^A σ_-^B, σ_z^B σ_-^A, 2σ_-^A σ_-^B`.
pub fn basis_operator(j: usize) -> Result<Operator> {
    Ok(match j {
        1 => sigma_minus_a(),
        2 => sigma_minus_b(),
        3 => sigma_z_a() * sigma_minus_b(),
        4 => sigma_z_b() * sigma_minus_a(),
        5 => sigma_minus_a() * sigma_minus_b() * 2.0,
        _ => return Err(Error::BasisIndex(j)),
    })
}

/// `⟨ψ|op|ψ⟩` (no normalisation applied).
pub fn expectation(op: &Operator, psi: &StateVector) -> C64 {
    psi.inner(&op.apply(psi))
}

/// Expectation value taken with the normalised state `ψ/‖ψ‖`.
pub fn normalized_expectation(op: &Operator, psi: &StateVector) -> C64 {
    expectation(op, psi) / psi.norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn params(omega: f64, j_xy: f64, j_z: f64) -> ModelParams {
        ModelParams::symmetric(omega, j_xy, j_z, 1.0)
    }

    #[test]
    fn hamiltonian_diagonal_zeeman() {
        let h = build_hamiltonian(&params(0.5, 0.0, 0.0));
        assert_eq!(h, Operator::diag([1.0, 0.0, 0.0, -1.0]));
    }

    #[test]
    fn hamiltonian_flip_flop_element() {
        let h = build_hamiltonian(&params(0.0, 0.5, 0.0));
        let mut expected = Operator::zero();
        expected[(1, 2)] = c(0.5);
        expected[(2, 1)] = c(0.5);
        assert_eq!(h, expected);
    }

    #[test]
    fn hamiltonian_zz() {
        let h = build_hamiltonian(&params(0.0, 0.0, 0.3));
        assert!(h.max_abs_diff(&Operator::diag([0.3, -0.3, -0.3, 0.3])) < 1e-15);
    }

    #[test]
    fn lindblad_actions() {
        let l = build_lindblad(&params(0.5, 0.5, 0.0));
        let out = l.apply(&StateVector::basis(0));
        assert_eq!(out, StateVector([ZERO, ONE, ONE, ZERO]));
        assert_eq!(l.apply(&StateVector::basis(3)), StateVector::zero());

        let mut p = params(0.5, 0.5, 0.0);
        p.kappa_b = 0.0;
        assert_eq!(build_lindblad(&p), sigma_minus_a());
    }

    #[test]
    fn basis_operator_actions() {
        let s11 = StateVector::basis(0);
        let s10 = StateVector::basis(1);
        assert_eq!(basis_operator(5).unwrap().apply(&s11), StateVector::basis(3) * 2.0);
        assert_eq!(basis_operator(3).unwrap().apply(&s11), s10);
        assert_eq!(basis_operator(4).unwrap().apply(&s10), StateVector::basis(3) * -1.0);
        assert_eq!(basis_operator(0), Err(Error::BasisIndex(0)));
        assert_eq!(basis_operator(6), Err(Error::BasisIndex(6)));
    }

    #[test]
    fn expectation_examples() {
        assert_eq!(expectation(&sigma_z_a(), &StateVector::basis(0)), ONE);
        let l = build_lindblad(&params(0.5, 0.5, 0.0));
        assert_eq!(expectation(&l, &StateVector::basis(3)), ZERO);
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector([ZERO, c(h), c(h), ZERO]);
        // L maps the bright state to √2|00⟩, which is orthogonal to it.
        assert!(expectation(&l, &bell).norm() < 1e-15);
    }

    #[test]
    fn operator_identities() {
        let p = params(0.0, 0.0, 0.0);
        let sum = basis_operator(1).unwrap() + basis_operator(2).unwrap();
        assert_eq!(sum, build_lindblad(&p));
        for (sm, sp, sz) in [
            (sigma_minus_a(), sigma_plus_a(), sigma_z_a()),
            (sigma_minus_b(), sigma_plus_b(), sigma_z_b()),
        ] {
            assert_eq!(sm * sm, Operator::zero());
            assert_eq!(sp * sp, Operator::zero());
            assert_eq!(sz.commutator(&sm), sm * -2.0);
        }
    }

    #[test]
    fn from_label_rejects_unknown() {
        assert!(StateVector::from_label("12").is_err());
        assert_eq!(StateVector::from_label("01").unwrap(), StateVector::basis(2));
    }

    fn arb_params() -> impl Strategy<Value = ModelParams> {
        (-2.0..2.0, -2.0..2.0, -2.0..2.0, -2.0..2.0, -2.0..2.0, -2.0..2.0, 0.01..10.0).prop_map(
            |(omega_a, omega_b, j_xy, j_z, kappa_a, kappa_b, gamma)| ModelParams {
                omega_a,
                omega_b,
                j_xy,
                j_z,
                kappa_a,
                kappa_b,
                gamma,
            },
        )
    }

    fn arb_state() -> impl Strategy<Value = StateVector> {
        proptest::array::uniform8(-1.0..1.0f64).prop_map(|x| {
            StateVector([
                C64::new(x[0], x[1]),
                C64::new(x[2], x[3]),
                C64::new(x[4], x[5]),
                C64::new(x[6], x[7]),
            ])
        })
    }

    proptest! {
        #[test]
        fn hamiltonian_is_hermitian(p in arb_params()) {
            let h = build_hamiltonian(&p);
            prop_assert_eq!(h, h.dagger());
        }

        #[test]
        fn symmetric_basis_round_trip(psi in arb_state()) {
            let back = StateVector::from_symmetric_basis(psi.to_symmetric_basis());
            prop_assert!(back.max_abs_diff(&psi) <= 1e-14);
            let c = psi.to_symmetric_basis();
            let total: f64 = c.iter().map(|x| x.norm_sqr()).sum();
            prop_assert!((total - psi.norm_sqr()).abs() <= 1e-12);
        }

        #[test]
        fn composition_is_associative(a in arb_state(), b in arb_state(), p in arb_params()) {
            let x = a.projector();
            let y = build_hamiltonian(&p);
            let z = b.projector() + build_lindblad(&p);
            prop_assert!(((x * y) * z).max_abs_diff(&(x * (y * z))) <= 1e-12);
        }
    }
}
