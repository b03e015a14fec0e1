mod common;

use std::sync::OnceLock;

use common::{cohort, ORDER};
use gait_ekf::gait_model::GaitState;
use gait_ekf::torque_model::{evaluate_torque, fit_torque_model, TorqueSurface};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LEG: f64 = 0.9;

fn surface() -> &'static TorqueSurface {
    static S: OnceLock<TorqueSurface> = OnceLock::new();
    S.get_or_init(|| fit_torque_model(&cohort().dataset, ORDER).unwrap())
}

fn random_state(rng: &mut ChaCha8Rng) -> GaitState {
    GaitState::new(
        rng.random_range(-2.0..3.0),
        1.0,
        rng.random_range(0.0..2.0 * LEG),
        rng.random_range(-15.0..15.0),
    )
}

#[test]
fn torque_is_never_negative() {
    let s = surface();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut floored = 0;
    for _ in 0..10_000 {
        let x = random_state(&mut rng);
        let tau = evaluate_torque(s, &x, LEG);
        assert!(tau >= 0.0 && tau.is_finite());
        if s.raw(&x, LEG) < 0.0 {
            assert_eq!(tau, 0.0);
            floored += 1;
        } else {
            assert_eq!(tau, s.raw(&x, LEG));
        }
    }
    // the dorsiflexion dip in early stance must actually exercise the floor
    assert!(floored > 0);
}

#[test]
fn torque_is_lipschitz_on_a_grid() {
    let s = surface();
    let slope = |x: &GaitState, d: [f64; 3], h: f64| {
        let y = GaitState::new(x.phase + h * d[0], 1.0, x.stride_length + h * d[1], x.incline + h * d[2]);
        (evaluate_torque(s, &y, LEG) - evaluate_torque(s, x, LEG)).abs() / h
    };
    let dirs = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut bound: f64 = 0.0;
    let mut grid = Vec::new();
    for i in 0..100 {
        for l in [0.6, 1.0, 1.4] {
            for r in [-10.0, 0.0, 10.0] {
                grid.push(GaitState::new(i as f64 / 100.0, 1.0, l, r));
            }
        }
    }
    for x in &grid {
        for d in dirs {
            bound = bound.max(slope(x, d, 1e-3));
        }
    }
    assert!(bound.is_finite());
    // difference quotients stay under the coarse-step estimate as the step shrinks
    for h in [1e-5, 1e-7] {
        for x in &grid {
            for d in dirs {
                let q = slope(x, d, h);
                assert!(q <= 1.5 * bound + 1e-6, "slope {q} at step {h} exceeds {bound}");
                assert!(q * h <= 1.5 * bound * h + 1e-9);
            }
        }
    }
}

proptest! {
    #[test]
    fn torque_is_periodic(p in 0.0..1.0f64, k in -2i32..=2, l in 0.3..1.8f64, r in -10.0..10.0f64) {
        let s = surface();
        let a = evaluate_torque(s, &GaitState::new(p, 1.0, l, r), LEG);
        let b = evaluate_torque(s, &GaitState::new(p + k as f64, 1.0, l, r), LEG);
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }
}
