//! Trajectory invariants over random seeded data.

use mtvf_core::flow::{run_exact_pc, run_regularized, FlowConfig};
use mtvf_core::io::{diagnostics_to_string, trajectory_from_str, trajectory_to_string};
use mtvf_core::synthetic::random_staircase;
use mtvf_core::verify::{
    check_energy, check_jump_rates, check_monotone_variation, check_z_structure, detect_stopping, Stopping,
};
use mtvf_core::ManifoldSpec;
use proptest::prelude::*;

const MANIFOLDS: [ManifoldSpec; 5] = [
    ManifoldSpec::Euclidean(1),
    ManifoldSpec::Euclidean(3),
    ManifoldSpec::Sphere(3),
    ManifoldSpec::Circle,
    ManifoldSpec::Cylinder,
];

fn manifold() -> impl Strategy<Value = ManifoldSpec> {
    (0..MANIFOLDS.len()).prop_map(|i| MANIFOLDS[i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn exact_runs_satisfy_every_structural_check(m in manifold(), plateaus in 2usize..7, seed in 0u64..10_000) {
        let u0 = random_staircase(m, plateaus, seed).unwrap();
        let t_max = 4.0 * u0.tv_measure().unwrap().total;
        let tr = run_exact_pc(&u0, t_max, 1e-9).unwrap();
        let mut reports = vec![check_energy(&tr), check_monotone_variation(&tr).unwrap(), check_jump_rates(&tr).unwrap()];
        reports.extend(check_z_structure(&tr).unwrap());
        for r in &reports {
            prop_assert!(r.pass, "{}", r);
        }
        let stopped = matches!(detect_stopping(&tr), Stopping::Stopped { t_star, .. } if t_star < t_max);
        prop_assert!(stopped);
        // bit-determinism of solver and checks
        let again = run_exact_pc(&u0, t_max, 1e-9).unwrap();
        prop_assert_eq!(&again, &tr);
        prop_assert_eq!(check_energy(&again), reports[0].clone());
    }

    #[test]
    fn regularized_runs_dissipate_and_stop(m in manifold(), plateaus in 2usize..5, seed in 0u64..10_000) {
        let u0 = random_staircase(m, plateaus, seed).unwrap();
        let t_max = 4.0 * u0.tv_measure().unwrap().total;
        let cfg = FlowConfig::new(m, 1e-8, 61, t_max).with_dt(2e-3);
        let tr = run_regularized(&u0.sample(61).unwrap(), &cfg).unwrap();
        for r in [check_energy(&tr), check_monotone_variation(&tr).unwrap()] {
            prop_assert!(r.pass, "{}", r);
        }
        for r in check_z_structure(&tr).unwrap() {
            prop_assert!(r.pass, "{}", r);
        }
        let stopped = matches!(detect_stopping(&tr), Stopping::Stopped { .. });
        prop_assert!(stopped);
        let tvs: Vec<f64> = tr.frames.iter().map(|f| f.diag.tv).collect();
        prop_assert!(tvs.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn trajectories_survive_a_file_round_trip(m in manifold(), seed in 0u64..10_000) {
        let u0 = random_staircase(m, 3, seed).unwrap();
        let tr = run_exact_pc(&u0, 0.05, 1e-9).unwrap();
        let back = trajectory_from_str(&trajectory_to_string(&tr).unwrap(), &diagnostics_to_string(&tr).unwrap()).unwrap();
        prop_assert_eq!(back.frames.len(), tr.frames.len());
        for (a, b) in back.frames.iter().zip(&tr.frames) {
            prop_assert_eq!(a.t.to_bits(), b.t.to_bits());
            prop_assert_eq!(&a.curve, &b.curve);
            prop_assert_eq!(a.diag, b.diag);
        }
    }
}
