mod common;

use common::{fitted, reference, state_ranges, steady_stream};
use gait_ekf::baseline::tbe::PHASE_CEILING;
use gait_ekf::baseline::{
    detect_heelstrike, ssr_compare_and_reset, BackupEstimator, HeelStrikeConfig, TimingEstimator,
};
use gait_ekf::estimator::{pseudo_stride, FilterState, MeasurementVector, NoiseConfig, DEFAULT_SENSOR_SIGMA};
use gait_ekf::gait_model::{CovarianceTable, GaitState};
use gait_ekf::harness::{run_stack, stride_metrics, HeelStrikeMode, StackOptions};
use gait_ekf::simdata::{
    generate_synthetic_stream, ideal_measurement, LabeledStream, ScenarioProfile, Schedule,
};
use proptest::prelude::*;

fn noise() -> NoiseConfig {
    NoiseConfig::new(fitted().table.clone())
}

/// Fraction of true heel strikes (after the stream start) with a detection
/// within `tolerance` seconds.
fn detection_rate(stream: &LabeledStream, events: &[f64], tolerance: f64) -> f64 {
    let truth: Vec<f64> = stream.heel_strike_indices()[1..].iter().map(|&i| stream.samples[i].time).collect();
    let hit = truth
        .iter()
        .filter(|t| events.iter().any(|e| (e - *t).abs() <= tolerance))
        .count();
    hit as f64 / truth.len() as f64
}

#[test]
fn detector_finds_heel_strikes_within_30_ms() {
    let cfg = HeelStrikeConfig::default();
    for (k, (speed, incline)) in [(0.8, -10.0), (0.8, 5.0), (1.0, 0.0), (1.2, -5.0), (1.2, 10.0)]
        .into_iter()
        .enumerate()
    {
        let profile = ScenarioProfile::steady(speed, incline, 60.0, 100.0, 40 + k as u64).with_noise(DEFAULT_SENSOR_SIGMA);
        let stream = generate_synthetic_stream(&profile, reference()).unwrap();
        let z: Vec<MeasurementVector> = stream.samples.iter().map(|s| s.z).collect();
        let log = detect_heelstrike(&z, stream.sample_rate, &cfg);
        let rate = detection_rate(&stream, &log.timestamps, 0.03);
        assert!(rate >= 0.95, "speed {speed} incline {incline}: {:.1}% within 30 ms", 100.0 * rate);
        // no more than a stray event on top of the true ones
        assert!(log.len() <= stream.stride_count() + 2);
    }
}

#[test]
fn standing_still_produces_no_events() {
    let standing = GaitState::new(0.2, 0.0, 0.0, 0.0);
    let z = ideal_measurement(reference(), &standing, 0.9);
    let log = detect_heelstrike(&vec![z; 3000], 100.0, &HeelStrikeConfig::default());
    assert!(log.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn events_respect_the_refractory_period(seed in any::<u64>(), speed in 0.6..1.4f64, incline in -10.0..10.0f64) {
        let profile = ScenarioProfile::steady(speed, incline, 20.0, 100.0, seed).with_noise([3.0, 30.0, 7.0, 60.0, 0.02, 0.03]);
        let stream = generate_synthetic_stream(&profile, reference()).unwrap();
        let z: Vec<MeasurementVector> = stream.samples.iter().map(|s| s.z).collect();
        let cfg = HeelStrikeConfig::default();
        let log = detect_heelstrike(&z, stream.sample_rate, &cfg);
        for w in log.timestamps.windows(2) {
            prop_assert!(w[1] - w[0] > cfg.refractory);
        }
    }

    #[test]
    fn timing_phase_is_linear_and_clamped(periods in prop::collection::vec(0.6..1.6f64, 2..8), frac in 0.0..2.0f64) {
        let mut tbe = TimingEstimator::new();
        let mut t = 0.0;
        let mut last_period = None;
        for p in &periods {
            tbe.on_heelstrike(t);
            last_period = tbe.period();
            t += p;
        }
        tbe.on_heelstrike(t);
        let prev = *periods.last().unwrap();
        prop_assert!(last_period.is_some());
        prop_assert!((tbe.period().unwrap() - prev).abs() < 1e-12);
        let query = t + frac * prev;
        let expected = (frac).min(PHASE_CEILING);
        prop_assert!((tbe.phase(query).unwrap() - expected).abs() < 1e-9);
        prop_assert!(tbe.phase(query).unwrap() < 1.0);
    }

    #[test]
    fn reset_needs_a_strictly_smaller_backup_residual(ekf in 0.0..1e4f64, excess in 0.0..1e4f64, ratio in 0.01..=1.0f64) {
        let n = NoiseConfig::new(CovarianceTable::zeros());
        let g = GaitState::new(0.3, 0.9, 1.2, 2.0);
        let mut fs = FilterState::new(&g, 0.9, 0.01, &n);
        let bs = BackupEstimator::new(&GaitState::new(0.0, 1.1, 1.0, -3.0), 0.9, 0.01, &n);
        let before = fs.clone();
        let mut e = ekf;
        prop_assert!(!ssr_compare_and_reset(&mut e, ekf + excess, &mut fs, &bs, ratio, &n));
        prop_assert_eq!(e, 0.0);
        prop_assert_eq!(fs, before);
    }
}

/// Exactly one stride per second so heel strikes land on samples.
fn unit_rate_stream(strides: usize) -> LabeledStream {
    let mut profile = ScenarioProfile::steady(1.0, 0.0, strides as f64 + 0.5, 100.0, 3);
    profile.phase_rate = Schedule::constant(1.0);
    profile.stride_length = Schedule::constant(1.0);
    generate_synthetic_stream(&profile, reference()).unwrap()
}

#[test]
fn timing_baseline_is_exact_on_a_steady_stream() {
    let stream = unit_rate_stream(10);
    let run = run_stack(&stream, &fitted().phi, &StackOptions::new(noise())).unwrap();
    let strides = stride_metrics(&stream, &run.tbe, None).unwrap();
    for s in &strides[1..] {
        assert!(s.phase_pct < 1e-9, "stride {}: {}", s.stride, s.phase_pct);
    }
}

#[test]
fn backup_phase_matches_the_timing_baseline() {
    let stream = steady_stream(reference(), 1.0, 2.0, 30, Some(DEFAULT_SENSOR_SIGMA), 8);
    let mut opts = StackOptions::new(noise());
    opts.resets_enabled = false;
    let run = run_stack(&stream, &fitted().phi, &opts).unwrap();
    let tbe = stride_metrics(&stream, &run.tbe, None).unwrap();
    let backup = stride_metrics(&stream, &run.backup, None).unwrap();
    let mean = |v: &[gait_ekf::harness::StrideErrors]| v[2..].iter().map(|s| s.phase_pct).sum::<f64>() / (v.len() - 2) as f64;
    let (a, b) = (mean(&backup), mean(&tbe));
    assert!((a - b).abs() <= 0.05 * b.max(0.01), "backup {a}% vs timing {b}%");
}

#[test]
fn backup_task_states_converge_within_five_strides() {
    let model = fitted();
    let n = noise();
    let offset = 3.0 * n.initial_covariance()[(2, 2)].sqrt();
    let ranges = state_ranges(0.9);
    for (speed, incline) in [(1.0, 0.0), (0.8, -6.0), (1.2, 7.0)] {
        let stream = steady_stream(&model.phi, speed, incline, 7, None, 2);
        let truth = stream.samples[0].truth;
        let mut opts = StackOptions::new(n.clone());
        opts.resets_enabled = false;
        let lp = pseudo_stride(truth.stride_length, 0.9) + offset;
        let start_length = gait_ekf::estimator::stride_transform(lp, 0.9).0;
        opts.initial = Some(GaitState::new(0.0, truth.phase_rate, start_length, truth.incline - offset));
        let run = run_stack(&stream, &model.phi, &opts).unwrap();
        let from = stream.heel_strike_indices()[5];
        for (s, e) in stream.samples[from..].iter().zip(&run.backup[from..]) {
            let dl = (e.stride_length.unwrap() - s.truth.stride_length).abs();
            let dr = (e.incline.unwrap() - s.truth.incline).abs();
            assert!(dl < 0.01 * ranges[2], "speed {speed}: stride error {dl}");
            assert!(dr < 0.01 * ranges[3], "speed {speed}: incline error {dr}");
        }
    }
}

#[test]
fn measured_rate_follows_the_last_period() {
    let n = NoiseConfig::new(CovarianceTable::zeros());
    let mut bs = BackupEstimator::new(&GaitState::new(0.0, 0.9, 1.2, 0.0), 0.9, 0.01, &n);
    bs.on_heelstrike(10.0);
    bs.on_heelstrike(11.2);
    assert!((bs.phase_rate() - 1.0 / 1.2).abs() < 1e-12);
    let rate = bs.phase_rate();
    let z = ideal_measurement(reference(), &GaitState::new(0.1, 1.0 / 1.2, 1.2, 0.0), 0.9);
    for k in 1..50 {
        bs.step(11.2 + 0.01 * k as f64, &z, reference(), &n).unwrap();
        assert_eq!(bs.phase_rate(), rate);
    }
}

/// Stride-wise EKF phase RMSE after seeding the filter half a cycle out.
fn fault_injection(mode: HeelStrikeMode) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let stream = steady_stream(reference(), 1.0, 0.0, 20, Some(DEFAULT_SENSOR_SIGMA), 17);
    let truth = stream.samples[0].truth;
    let mut opts = StackOptions::new(noise());
    opts.heelstrike_mode = mode;
    opts.initial = Some(GaitState::new(0.5, truth.phase_rate, truth.stride_length, truth.incline));
    let run = run_stack(&stream, &fitted().phi, &opts).unwrap();
    let strides = stride_metrics(&stream, &run.ekf, None).unwrap();
    (stream.heel_strike_indices(), run.resets, strides.iter().map(|s| s.phase_pct).collect())
}

#[test]
fn backup_rescues_a_filter_half_a_cycle_out() {
    for mode in [HeelStrikeMode::Oracle, HeelStrikeMode::Detected] {
        let (hs, resets, phase) = fault_injection(mode);
        let first = *resets.first().unwrap_or_else(|| panic!("{mode:?}: no reset"));
        assert!(first <= hs[3] + 3, "{mode:?}: first reset at sample {first}, third stride ends at {}", hs[3]);
        let stride = hs.iter().rposition(|&i| i <= first).unwrap();
        for (k, p) in phase.iter().enumerate().skip(stride + 5) {
            assert!(*p < 3.0, "{mode:?}: stride {k} phase RMSE {p}%");
        }
    }
}

#[test]
fn clean_streams_rarely_reset() {
    for (k, (speed, incline)) in [(1.0, 0.0), (0.8, 6.0), (1.2, -4.0)].into_iter().enumerate() {
        let stream = steady_stream(reference(), speed, incline, 200, Some(DEFAULT_SENSOR_SIGMA), 60 + k as u64);
        let run = run_stack(&stream, &fitted().phi, &StackOptions::new(noise())).unwrap();
        let rate = run.resets.len() as f64 / stream.stride_count() as f64;
        assert!(rate <= 0.02, "speed {speed} incline {incline}: {} resets", run.resets.len());
    }
}
