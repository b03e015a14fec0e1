//! Two-tailed paired t-test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Degeneracy {
    /// Every difference is zero; reported as `t = 0`, `p = 1`.
    Identical,
    /// Differences are a nonzero constant; reported as `t = ±∞`, `p = 0`.
    ZeroVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub n: usize,
    pub mean_difference: f64,
    pub t: f64,
    pub p: f64,
    pub dof: usize,
    pub degenerate: Option<Degeneracy>,
}

/// Paired t-test of `a - b`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<PairedTTest> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            what: "paired samples",
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("paired t-test needs 2 pairs, got {n}")));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let dof = n - 1;
    if d.iter().all(|x| *x == 0.0) {
        return Ok(PairedTTest {
            n,
            mean_difference: 0.0,
            t: 0.0,
            p: 1.0,
            dof,
            degenerate: Some(Degeneracy::Identical),
        });
    }
    if var <= f64::EPSILON * mean * mean {
        return Ok(PairedTTest {
            n,
            mean_difference: mean,
            t: f64::INFINITY.copysign(mean),
            p: 0.0,
            dof,
            degenerate: Some(Degeneracy::ZeroVariance),
        });
    }
    let t = mean / (var / nf).sqrt();
    let dist = StudentsT::new(0.0, 1.0, dof as f64).expect("positive degrees of freedom");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(PairedTTest {
        n,
        mean_difference: mean,
        t,
        p,
        dof,
        degenerate: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_are_degenerate() {
        let a = [1.0, 2.0, 3.0];
        let r = paired_ttest(&a, &a).unwrap();
        assert_eq!(r.degenerate, Some(Degeneracy::Identical));
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn constant_shift_is_zero_variance() {
        let a = [1.5, 2.5, 3.5];
        let b = [1.0, 2.0, 3.0];
        let r = paired_ttest(&a, &b).unwrap();
        assert_eq!(r.degenerate, Some(Degeneracy::ZeroVariance));
        assert_eq!(r.t, f64::INFINITY);
    }

    #[test]
    fn needs_two_pairs() {
        assert!(paired_ttest(&[1.0], &[2.0]).is_err());
        assert!(paired_ttest(&[1.0, 2.0], &[2.0]).is_err());
    }
}
