mod common;

use common::{close, fitted, reference, ORDER};
use gait_ekf::gait_model::{
    basis_phase, basis_ramp, basis_stride, build_constraints, fit_gait_model, kronecker, regressor_len,
    regressor_normalized, residual_covariance_table, ConstraintSet, GaitState, Output, ParameterMatrix,
    FLAT_FOOT_PHASE,
};
use gait_ekf::gait_model::fit::gait_normal_equations;
use gait_ekf::gait_model::solve_constrained_lsq;
use gait_ekf::simdata::cohort::synthesize_stride;
use gait_ekf::simdata::{StrideDataset, Subject};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn as_matrix(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(1, v.len(), v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evaluation_is_periodic_in_phase(p in 0.0..1.0f64, k in -3i32..=3, l in 0.0..2.0f64, r in -10.0..10.0f64) {
        let phi = reference();
        let a = phi.eval(p, l, r);
        let b = phi.eval(p + k as f64, l, r);
        for j in 0..4 {
            // shifting by k costs a couple of ulps of phase
            let slope = a.d_p[j].abs() * 1e-15;
            prop_assert!((a.value[j] - b.value[j]).abs() <= 1e-12 * (1.0 + a.value[j].abs()) + slope);
        }
    }

    #[test]
    fn regressor_is_the_nested_kronecker_product(p in -2.0..2.0f64, l in 0.0..2.0f64, r in -10.0..10.0f64, n in 1usize..8) {
        let row = regressor_normalized(p, l, r, n);
        prop_assert_eq!(row.len(), regressor_len(n));
        let nested = kronecker(
            &kronecker(&as_matrix(&basis_ramp(r)), &as_matrix(&basis_stride(l))),
            &as_matrix(basis_phase(p, n).as_slice()),
        );
        for (a, b) in row.iter().zip(nested.iter()) {
            prop_assert!((a - b).abs() <= 1e-14 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn regressor_is_periodic(p in 0.0..1.0f64, l in 0.0..2.0f64, r in -10.0..10.0f64) {
        let a = regressor_normalized(p, l, r, ORDER);
        let b = regressor_normalized(p + 1.0, l, r, ORDER);
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }
}

#[test]
fn default_regressor_length_is_164() {
    assert_eq!(regressor_len(20), 164);
    assert_eq!(reference().dim(), 164);
}

#[test]
fn zero_stride_selects_one_block() {
    let row = regressor_normalized(0.37, 0.0, 0.0, 3);
    let per = 7;
    // block order is (r, 1 - r) ⊗ (l, 1 - l); only (1 - r)(1 - l) is live
    for (i, v) in row.iter().enumerate() {
        if i < 3 * per {
            assert_eq!(*v, 0.0, "entry {i}");
        }
    }
    assert!(row.iter().skip(3 * per).any(|v| *v != 0.0));
}

#[test]
fn partials_match_central_differences() {
    let phi = &fitted().phi;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let leg = 0.9;
    let h = 1e-6;
    for _ in 0..100 {
        use rand::Rng;
        let s = GaitState::new(rng.random(), 1.0, rng.random_range(0.5..1.6), rng.random_range(-10.0..10.0));
        let analytic = phi.partials(&s, leg);
        for (c, delta) in [(0, [h, 0.0, 0.0]), (1, [0.0, h, 0.0]), (2, [0.0, 0.0, h])] {
            let shifted = |sign: f64| {
                phi.evaluate(
                    &GaitState::new(
                        s.phase + sign * delta[0],
                        s.phase_rate,
                        s.stride_length + sign * delta[1],
                        s.incline + sign * delta[2],
                    ),
                    leg,
                )
            };
            let (up, down) = (shifted(1.0), shifted(-1.0));
            for j in 0..4 {
                let fd = (up[j] - down[j]) / (2.0 * h);
                assert!(
                    close(analytic[(j, c)], fd, 1e-6, 1.0),
                    "output {j} column {c}: {} vs {fd}",
                    analytic[(j, c)]
                );
            }
        }
    }
}

/// Noise-free strides of one subject walking `phi` at each condition.
fn exact_dataset(phi: &ParameterMatrix, leg: f64) -> StrideDataset {
    let mut strides = Vec::new();
    for speed in [0.8, 1.0, 1.2] {
        for incline in [-10.0, -5.0, 0.0, 5.0, 10.0] {
            let rate = gait_ekf::simdata::cohort::nominal_phase_rate(speed, leg);
            strides.push(synthesize_stride(phi, leg, speed, incline, rate, false));
        }
    }
    StrideDataset::new(vec![Subject { id: "S01".into(), leg_length: leg, strides }]).unwrap()
}

#[test]
fn fit_recovers_the_generating_model() {
    let truth = reference();
    let data = exact_dataset(truth, 0.9);
    let phi = fit_gait_model(&data, &build_constraints(ORDER).unwrap(), ORDER).unwrap();
    let diff = (phi.coeffs() - truth.coeffs()).norm();
    assert!(diff <= 1e-6 * truth.coeffs().norm(), "relative error {}", diff / truth.coeffs().norm());
}

#[test]
fn constraints_only_raise_the_residual() {
    let data = noisy_dataset(reference(), [0.5, 0.4, 0.003, 0.002], 2, 9);
    let ne = gait_normal_equations(&data, ORDER).unwrap();
    let constrained = solve_constrained_lsq(&ne, &build_constraints(ORDER).unwrap()).unwrap();
    let free = solve_constrained_lsq(&ne, &ConstraintSet::empty(ORDER, 4)).unwrap();
    for (c, f) in ne.sse(&constrained).iter().zip(ne.sse(&free)) {
        assert!(f <= c + 1e-9 * c.abs().max(1.0), "unconstrained {f} above constrained {c}");
    }
}

#[test]
fn fitted_model_meets_every_constraint() {
    let set = build_constraints(ORDER).unwrap();
    assert!(set.max_violation(&fitted().phi) <= 1e-8);
}

#[test]
fn zero_stride_predicts_constant_kinematics() {
    let phi = &fitted().phi;
    for r in [-10.0, -3.0, 0.0, 4.0, 10.0] {
        let first = phi.eval(0.0, 0.0, r);
        for i in 0..200 {
            let e = phi.eval(i as f64 / 200.0, 0.0, r);
            for j in 0..4 {
                assert!((e.value[j] - first.value[j]).abs() < 1e-6);
                assert!(e.d_p[j].abs() < 1e-6);
            }
        }
    }
    let e = phi.eval(0.3, 0.0, 0.0);
    assert!(e.value[Output::ShankAngle.index()].abs() < 1e-6);
    assert!(e.value[Output::FootAngle.index()].abs() < 1e-6);
}

#[test]
fn foot_is_flat_on_the_ramp_at_mid_stance() {
    let phi = &fitted().phi;
    let ft = Output::FootAngle.index();
    for l in [0.0, 0.4, 0.9, 1.3, 1.8] {
        for r in [-10.0, -5.0, 0.0, 5.0, 10.0] {
            let e = phi.eval(FLAT_FOOT_PHASE, l, r);
            assert!((e.value[ft] - r).abs() < 1e-6, "l {l} r {r}: {}", e.value[ft]);
            assert!((e.d_r[ft] - 1.0).abs() < 1e-6);
        }
    }
    let e = phi.eval(FLAT_FOOT_PHASE, 1.1, 5.0);
    assert!((e.value[ft] - 5.0).abs() < 1e-6);
}

fn min_eigenvalue(m: &nalgebra::Matrix6<f64>) -> f64 {
    SymmetricEigen::new(*m).eigenvalues.min()
}

#[test]
fn residual_table_is_psd_and_vanishes_on_exact_data() {
    for k in fitted().table.knots() {
        assert!(((k - k.transpose()).norm()) <= 1e-12 * k.norm().max(1.0));
        assert!(min_eigenvalue(k) >= -1e-10);
    }
    let truth = reference();
    let data = exact_dataset(truth, 0.9);
    let table = residual_covariance_table(&data, truth).unwrap();
    // velocity channels carry the knot-difference truncation error, positions none
    for k in table.knots() {
        for i in [0, 2, 4, 5] {
            for j in [0, 2, 4, 5] {
                assert!(k[(i, j)].abs() < 1e-10, "({i},{j}) = {}", k[(i, j)]);
            }
        }
    }
}

/// Dataset of `strides_per` copies of each condition with iid output noise.
fn noisy_dataset(phi: &ParameterMatrix, sigma: [f64; 4], strides_per: usize, seed: u64) -> StrideDataset {
    let leg = 0.9;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normals: Vec<Normal<f64>> = sigma.iter().map(|s| Normal::new(0.0, *s).unwrap()).collect();
    let mut strides = Vec::new();
    for incline in [-10.0, -5.0, 0.0, 5.0, 10.0] {
        for speed in [0.8, 1.0, 1.2] {
            let clean = synthesize_stride(phi, leg, speed, incline, 1.0, false);
            for _ in 0..strides_per {
                let mut s = clean.clone();
                for x in &mut s.samples {
                    x.theta_s += normals[0].sample(&mut rng);
                    x.theta_f += normals[1].sample(&mut rng);
                    x.p_f += normals[2].sample(&mut rng);
                    x.p_u += normals[3].sample(&mut rng);
                }
                strides.push(s);
            }
        }
    }
    StrideDataset::new(vec![Subject { id: "S01".into(), leg_length: leg, strides }]).unwrap()
}

#[test]
fn residual_table_recovers_known_noise_variance() {
    let truth = reference();
    let sigma = [0.5, 0.4, 0.003, 0.002];
    let noisy = noisy_dataset(truth, sigma, 14, 5);
    let clean = noisy_dataset(truth, [1e-300; 4], 1, 5);
    let table = residual_covariance_table(&noisy, truth).unwrap();
    let base = residual_covariance_table(&clean, truth).unwrap();
    let n = noisy.stride_count() as f64;
    let knots = table.knots().len() as f64;

    // measurement channel -> (output noise sigma, velocity gain)
    // velocities are central differences over two knot spacings at rate 1
    let half_gain = 150.0 / 2.0;
    let channels = [
        (0, sigma[1], None),
        (1, sigma[1], Some(half_gain)),
        (2, sigma[0], None),
        (3, sigma[0], Some(half_gain)),
        (4, sigma[2], None),
        (5, sigma[3], None),
    ];
    for (ch, s, gain) in channels {
        let v = match gain {
            None => s * s,
            Some(g) => 2.0 * s * s * g * g,
        };
        let pooled: f64 = table
            .knots()
            .iter()
            .zip(base.knots())
            .map(|(k, b)| k[(ch, ch)] - b[(ch, ch)])
            .sum::<f64>()
            / knots;
        // sample variance has sd v·sqrt(2/(n-1)); velocity knots two apart share
        // one noise term, correlating their squared deviations by 1/4 each side
        let correlation = if gain.is_some() { (1.0f64 + 2.0 * 0.25).sqrt() } else { 1.0 };
        let se = v * (2.0 / (n - 1.0)).sqrt() / knots.sqrt() * correlation;
        assert!((pooled - v).abs() < 3.0 * se, "channel {ch}: {pooled} vs {v} (se {se})");
    }
}
