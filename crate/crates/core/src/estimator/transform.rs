//! Arctangent map from the unbounded pseudo-stride-length to meters.

use std::f64::consts::{FRAC_PI_4, PI};

/// Largest stride length the map can produce, in leg lengths.
pub const MAX_NORMALIZED_STRIDE: f64 = 4.0;

/// `l = L ((4/π) atan((π/4) l_p) + 2)` and its derivative `dl/dl_p`.
///
/// The result lies in `(0, 4L)` for every finite `l_p`.
pub fn stride_transform(l_p: f64, leg_length: f64) -> (f64, f64) {
    let l = leg_length * ((4.0 / PI) * (FRAC_PI_4 * l_p).atan() + 2.0);
    let u = FRAC_PI_4 * l_p;
    let dl = leg_length / (1.0 + u * u);
    (l, dl)
}

/// Inverse of [`stride_transform`]; the input is clamped just inside `(0, 4L)`.
pub fn pseudo_stride(stride_length: f64, leg_length: f64) -> f64 {
    let eps = 1e-9;
    let norm = (stride_length / leg_length).clamp(eps, MAX_NORMALIZED_STRIDE - eps);
    (4.0 / PI) * (FRAC_PI_4 * (norm - 2.0)).tan()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_maps_to_two_leg_lengths() {
        let (l, dl) = stride_transform(0.0, 0.9);
        assert!((l - 1.8).abs() < 1e-15);
        assert!((dl - 0.9).abs() < 1e-15);
    }

    #[test]
    fn limits_are_zero_and_four_leg_lengths() {
        let leg = 0.85;
        let (hi, dhi) = stride_transform(1e12, leg);
        let (lo, dlo) = stride_transform(-1e12, leg);
        assert!((hi - 4.0 * leg).abs() < 1e-9);
        assert!(lo.abs() < 1e-9 && lo > 0.0);
        assert!(dhi < 1e-20 && dlo < 1e-20);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let leg = 0.93;
        let h = 1e-6;
        for i in 0..100 {
            let lp = -5.0 + 0.1 * i as f64;
            let fd = (stride_transform(lp + h, leg).0 - stride_transform(lp - h, leg).0) / (2.0 * h);
            let (_, an) = stride_transform(lp, leg);
            assert!((fd - an).abs() < 1e-8, "l_p = {lp}");
        }
    }

    #[test]
    fn inverse_round_trip() {
        let leg = 0.9;
        for &l in &[0.3, 1.0, 1.35, 2.9] {
            let lp = pseudo_stride(l, leg);
            assert!((stride_transform(lp, leg).0 - l).abs() < 1e-12);
        }
    }
}
