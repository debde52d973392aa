//! Symmetry and conservation properties over random models and noise.

use nmqsd_core::noise::sample_ou_path;
use nmqsd_core::trajectory::{run_trajectory, Record};
use nmqsd_core::{solve_fields, ModelParams, OuStart, QsdSystem, RngStream, StateVector, TrajectoryConfig, Unraveling, C64};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ModelParams> {
    (0.0..1.0f64, 0.0..1.0f64, -0.5..0.5f64, 0.2..3.0f64).prop_map(|(w, jxy, jz, g)| ModelParams::symmetric(w, jxy, jz, g))
}

/// Random state with `c1 = ⟨11|ψ⟩ = 0`.
fn lower_state() -> impl Strategy<Value = StateVector> {
    prop::array::uniform6(-1.0..1.0f64).prop_filter_map("nonzero", |a| {
        let psi = StateVector([C64::new(0.0, 0.0), C64::new(a[0], a[1]), C64::new(a[2], a[3]), C64::new(a[4], a[5])]);
        (psi.norm() > 0.1).then(|| psi.normalized())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exchange_symmetric_fields_coincide(p in params()) {
        let t = solve_fields(&p, &QsdSystem::ou(p).unwrap().kernel, 2.0, 0.05).unwrap();
        for k in 0..t.points() {
            prop_assert!((t.f[0][k] - t.f[1][k]).norm() <= 1e-10);
            prop_assert!((t.f[2][k] - t.f[3][k]).norm() <= 1e-10);
        }
    }

    #[test]
    fn trajectories_keep_c1_zero_and_c3_modulus(
        p in params(),
        psi0 in lower_state(),
        seed in any::<u64>(),
        nonlinear in any::<bool>(),
    ) {
        let horizon = 2.0;
        let dt = 0.0025;
        let sys = QsdSystem::ou(p).unwrap();
        let tables = solve_fields(&p, &sys.kernel, horizon, 0.02).unwrap();
        let mode = if nonlinear { Unraveling::Nonlinear } else { Unraveling::Linear };
        let mut cfg = TrajectoryConfig::new(mode, dt, horizon, psi0);
        cfg.record = Record::States;
        let noise = sample_ou_path(p.gamma, horizon, dt / 2.0, RngStream::new(seed, 0), OuStart::Stationary).unwrap();
        let tr = run_trajectory(&cfg, &sys, &tables, &noise).unwrap();
        let c3 = psi0.to_symmetric_basis()[2].norm();
        for psi in &tr.states {
            let c = psi.to_symmetric_basis();
            prop_assert!(c[0].norm() <= 1e-10);
            if nonlinear {
                prop_assert!((psi.norm() - 1.0).abs() <= 1e-12);
            } else {
                prop_assert!((c[2].norm() - c3).abs() <= 1e-8, "{}", c[2].norm() - c3);
            }
        }
    }
}
