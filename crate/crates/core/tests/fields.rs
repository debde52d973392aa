use nmqsd_core::fields::{rhs_fields, Convolutions};
use nmqsd_core::{riccati_oracle, solve_fields, CoeffTables, FieldSlice, KernelSpec, ModelParams, C64};

fn single_qubit(omega: f64, gamma: f64) -> ModelParams {
    ModelParams { omega_a: omega, omega_b: 0.0, j_xy: 0.0, j_z: 0.0, kappa_a: 1.0, kappa_b: 0.0, gamma }
}

fn sup(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn exchange_symmetry_of_tables_and_fields() {
    let p = ModelParams::symmetric(0.5, 0.5, 0.1, 1.0);
    let t = solve_fields(&p, &KernelSpec::ou(1.0), 6.0, 0.02).unwrap();
    assert!(sup(&t.f[0], &t.f[1]) <= 1e-12);
    assert!(sup(&t.f[2], &t.f[3]) <= 1e-12);

    let kernel = KernelSpec::ou(1.0);
    let mut slice = FieldSlice::initial(&p, 0.05, 81);
    let mut conv = slice.convolutions(&kernel).unwrap();
    for _ in 0..80 {
        conv = slice.advance(&p, &kernel, &conv).unwrap();
    }
    for i in 0..slice.len() {
        assert!((slice.f(1, i) - slice.f(2, i)).norm() <= 1e-10);
        assert!((slice.f(3, i) - slice.f(4, i)).norm() <= 1e-10);
    }
}

#[test]
fn single_qubit_fields_collapse() {
    let p = single_qubit(0.5, 1.0);
    let kernel = KernelSpec::ou(1.0);
    let mut slice = FieldSlice::initial(&p, 0.02, 2);
    let mut conv = slice.convolutions(&kernel).unwrap();
    for _ in 0..150 {
        conv = slice.advance(&p, &kernel, &conv).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..slice.len() {
            for j in 2..=4 {
                worst = worst.max(slice.f(j, i).norm());
            }
        }
        assert!(worst <= 1e-14);
        assert!(slice.f5_max_abs() <= 1e-14);
        assert!(slice.boundary_violation() <= 1e-12);
    }
    // The right-hand side reduces to ∂f1 = (2iω + κF1) f1.
    let d = rhs_fields(&slice, &conv, &p);
    for i in 0..slice.len() {
        let want = (C64::new(0.0, 2.0 * p.omega_a) + conv.f[0] * p.kappa_a) * slice.f(1, i);
        assert!((d.f[0][i] - want).norm() < 1e-14);
    }
}

#[test]
fn riccati_reduction() {
    let p = single_qubit(0.5, 1.0);
    let tab = solve_fields(&p, &KernelSpec::ou(1.0), 8.0, 4e-3).unwrap();
    let ric = riccati_oracle(1.0, 0.5, 1.0, 8.0, 1e-3).unwrap();
    let err = tab.f[0].iter().enumerate().map(|(k, f)| (f - ric[4 * k]).norm()).fold(0.0, f64::max);
    assert!(err < 5e-6, "sup |F1 − F_riccati| = {err:e}");
}

#[test]
fn zero_convolution_slice_has_zero_rate() {
    let p = ModelParams::symmetric(0.0, 0.0, 0.0, 1.0);
    let slice = FieldSlice::initial(&p, 0.1, 1);
    let conv = Convolutions { f: [C64::new(0.0, 0.0); 4], f5: vec![C64::new(0.0, 0.0)] };
    let d = rhs_fields(&slice, &conv, &p);
    for j in 0..4 {
        assert_eq!(d.f[j][0], C64::new(0.0, 0.0));
    }
}

/// Sup-norm difference of two solves on the nodes of a coarser `base` grid.
fn diff_on(a: &CoeffTables, b: &CoeffTables, base: &CoeffTables) -> f64 {
    let ra = (base.step / a.step).round() as usize;
    let rb = (base.step / b.step).round() as usize;
    let mut worst: f64 = 0.0;
    for k in 0..base.points() {
        for j in 0..4 {
            worst = worst.max((a.f[j][k * ra] - b.f[j][k * rb]).norm());
        }
        for c in 0..=k {
            worst = worst.max((a.f5_row(k * ra)[c * ra] - b.f5_row(k * rb)[c * rb]).norm());
        }
    }
    worst
}

#[test]
fn field_solver_converges_at_second_order() {
    let p = ModelParams { omega_a: 0.5, omega_b: 0.4, j_xy: 0.5, j_z: 0.1, kappa_a: 1.0, kappa_b: 0.9, gamma: 1.0 };
    let k = KernelSpec::ou(1.0);
    let t1 = solve_fields(&p, &k, 4.0, 0.04).unwrap();
    let t2 = solve_fields(&p, &k, 4.0, 0.02).unwrap();
    let t4 = solve_fields(&p, &k, 4.0, 0.01).unwrap();
    let ratio = diff_on(&t1, &t2, &t1) / diff_on(&t2, &t4, &t1);
    assert!((ratio - 4.0).abs() <= 1.0, "ratio {ratio}");
}

#[test]
fn f5_boundary_convolution_identity() {
    let p = ModelParams { omega_a: 0.5, omega_b: 0.4, j_xy: 0.5, j_z: 0.1, kappa_a: 1.0, kappa_b: 0.9, gamma: 1.3 };
    let t = solve_fields(&p, &KernelSpec::ou(1.3), 2.0, 0.02).unwrap();
    for k in 0..t.points() {
        let want = C64::new(0.0, -1.0) * (t.f[2][k] * p.kappa_a + t.f[3][k] * p.kappa_b);
        assert!((t.f5_row(k)[k] - want).norm() < 1e-13);
    }
    assert_eq!(t.f5_row(0)[0], C64::new(0.0, 0.0));
    for j in 0..4 {
        assert_eq!(t.f[j][0], C64::new(0.0, 0.0));
    }
}

#[test]
fn table_kernel_reproduces_ou_solve() {
    let gamma = 1.0;
    let p = ModelParams::symmetric(0.5, 0.5, 0.1, gamma);
    let grid: Vec<f64> = (0..=50).map(|k| k as f64 * 0.02).collect();
    let values: Vec<C64> = grid
        .iter()
        .flat_map(|t| grid.iter().map(move |s| C64::new(0.5 * gamma * (-gamma * (t - s).abs()).exp(), 0.0)))
        .collect();
    let table = solve_fields(&p, &KernelSpec::Table { grid, values }, 1.0, 0.02).unwrap();
    let ou = solve_fields(&p, &KernelSpec::ou(gamma), 1.0, 0.02).unwrap();
    for j in 0..4 {
        assert!(sup(&table.f[j], &ou.f[j]) < 1e-13);
    }
}
