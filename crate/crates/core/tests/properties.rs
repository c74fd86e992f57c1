use std::collections::BTreeMap;
use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;

use gestural::coupling::{simulate_phases, solve_phases_ls, wrap_phase, CouplingGraph, DEFAULT_DT_S, DEFAULT_OMEGA0};
use gestural::diagnostics::ols;
use gestural::dynamics::{integrate, Trajectory};
use gestural::landmarks::{find_gesture, Direction};
use gestural::score::{Gesture, GesturalScore, TractVariable};
use gestural::smoothing::smooth;
use gestural::Channel;

fn step_trajectory(omega: f64) -> Trajectory {
    let score = GesturalScore {
        duration_ms: 1200.0,
        sample_rate_hz: 200.0,
        tract_variables: vec![TractVariable {
            name: Channel::La,
            neutral_mm: 0.0,
        }],
        gestures: vec![Gesture {
            id: "clo".into(),
            tract_variable: Channel::La,
            target_mm: 10.0,
            stiffness_s2: omega * omega,
            damping_ratio: 1.0,
            blending_strength: 1.0,
            t_on_ms: 150.0,
            t_off_ms: 700.0,
            descriptor: "step".into(),
        }],
    };
    integrate(&score, 0.5).unwrap().remove(&Channel::La).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn smoother_is_linear(
        a in prop::collection::vec(-10.0f64..10.0, 40),
        b in prop::collection::vec(-10.0f64..10.0, 40),
        alpha in -3.0f64..3.0,
        s in 0.0f64..1e3,
    ) {
        let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + y).collect();
        let lhs = smooth(&combo, s).unwrap();
        let (sa, sb) = (smooth(&a, s).unwrap(), smooth(&b, s).unwrap());
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - (alpha * sa[i] + sb[i])).abs() < 1e-8);
        }
    }

    #[test]
    fn landmarks_ignore_amplitude_and_offset(omega in 12.0f64..40.0, scale in 1.0f64..5.0, offset in -20.0f64..20.0) {
        let base = step_trajectory(omega);
        let mut moved = base.clone();
        for x in &mut moved.samples {
            *x = scale * *x + offset;
        }
        let g0 = find_gesture(&base, (50.0, 1190.0), Direction::Increasing, 0.2).unwrap();
        let g1 = find_gesture(&moved, (50.0, 1190.0), Direction::Increasing, 0.2).unwrap();
        prop_assert!((g0.onset_ms - g1.onset_ms).abs() < 1e-6);
        prop_assert!((g0.target_ms - g1.target_ms).abs() < 1e-6);
        prop_assert!((g0.release_ms - g1.release_ms).abs() < 1e-6);
        prop_assert!((g0.offset_ms - g1.offset_ms).abs() < 1e-6);
    }

    #[test]
    fn landmarks_follow_time_shift(omega in 12.0f64..40.0, shift in 0usize..200) {
        let base = step_trajectory(omega);
        let mut shifted = base.clone();
        shifted.t0_ms += shift as f64 * 5.0;
        let g0 = find_gesture(&base, (50.0, 1190.0), Direction::Increasing, 0.2).unwrap();
        let d = shift as f64 * 5.0;
        let g1 = find_gesture(&shifted, (50.0 + d, 1190.0 + d), Direction::Increasing, 0.2).unwrap();
        prop_assert!((g1.onset_ms - g0.onset_ms - d).abs() < 1e-6);
        prop_assert!((g1.offset_ms - g0.offset_ms - d).abs() < 1e-6);
    }

    #[test]
    fn r2_survives_affine_maps(
        x in prop::collection::vec(-50.0f64..50.0, 8..40),
        noise in prop::collection::vec(-5.0f64..5.0, 40),
        a in 0.1f64..10.0, b in -100.0f64..100.0, c in -10.0f64..10.0, d in -100.0f64..100.0,
    ) {
        prop_assume!(gestural::diagnostics::sample_sd(&x) > 1.0);
        prop_assume!(c.abs() > 0.1);
        let y: Vec<f64> = x.iter().zip(&noise).map(|(x, e)| 0.5 * x + e).collect();
        let base = ols(&x, &y).unwrap();
        let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let ys: Vec<f64> = y.iter().map(|v| c * v + d).collect();
        let moved = ols(&xs, &ys).unwrap();
        prop_assert!((base.r2 - moved.r2).abs() < 1e-9);
        prop_assert!((moved.slope - base.slope * c / a).abs() < 1e-8 * (1.0 + base.slope.abs()));
    }

    #[test]
    fn trees_are_solved_exactly(
        parents in prop::collection::vec(any::<prop::sample::Index>(), 1..10),
        phis in prop::collection::vec(-3.1f64..3.1, 10),
        weights in prop::collection::vec(0.1f64..5.0, 10),
    ) {
        let mut g = CouplingGraph::new("n0", DEFAULT_OMEGA0);
        for (k, p) in parents.iter().enumerate() {
            let child = k + 1;
            g = g.with_edge(&format!("n{}", p.index(child)), &format!("n{child}"), phis[k], weights[k]);
        }
        let sol = solve_phases_ls(&g).unwrap();
        prop_assert_eq!(sol.phases["n0"], 0.0);
        for e in &g.edges {
            prop_assert!(wrap_phase(sol.phases[&e.j] - sol.phases[&e.i] - e.phi_rad).abs() < 1e-9);
        }
    }

    #[test]
    fn flow_ignores_global_phase_shift(shift in -PI..PI) {
        let g = gestural::coupling::c_center_graph(1.0, 1.0);
        let start = |s: f64| BTreeMap::from([
            ("V".to_string(), s),
            ("C1".to_string(), s - 0.3),
            ("C2".to_string(), s + 0.4),
        ]);
        let a = simulate_phases(&g, &start(0.0), DEFAULT_DT_S, 60.0).unwrap();
        let b = simulate_phases(&g, &start(shift), DEFAULT_DT_S, 60.0).unwrap();
        for (k, v) in &a.phases {
            prop_assert!(wrap_phase(v - b.phases[k]).abs() < 1e-4, "{k}: {v} vs {}", b.phases[k]);
        }
    }
}

#[test]
fn c_center_weights_trade_off() {
    // Least squares on the symmetric three-node graph: ±bπ/(a+2b).
    for (a, b) in [(1.0, 1.0), (2.0, 1.0), (1.0, 3.0)] {
        let sol = solve_phases_ls(&gestural::coupling::c_center_graph(a, b)).unwrap();
        assert_relative_eq!(sol.phases["C2"], b * PI / (a + 2.0 * b), epsilon = 1e-9);
        assert_relative_eq!(sol.phases["C1"], -b * PI / (a + 2.0 * b), epsilon = 1e-9);
    }
}
