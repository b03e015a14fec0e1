//! Report types, per-stride CSV rows and re-aggregation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{MetricMeans, StrideErrors};
use super::stats::{paired_ttest, PairedTTest};
use crate::error::{Error, Result};

/// One row of a per-stride CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrideRow {
    pub subject: String,
    pub estimator: String,
    pub stride: usize,
    pub start_time_s: f64,
    pub phase_pct: f64,
    pub phase_rate: f64,
    pub stride_length_m: Option<f64>,
    pub incline_deg: Option<f64>,
    pub torque: Option<f64>,
}

impl StrideRow {
    pub fn errors(&self) -> StrideErrors {
        StrideErrors {
            stride: self.stride,
            start_time: self.start_time_s,
            phase_pct: self.phase_pct,
            phase_rate: self.phase_rate,
            stride_length: self.stride_length_m,
            incline: self.incline_deg,
            torque: self.torque,
        }
    }
}

pub fn stride_rows(subject: &str, estimator: &str, strides: &[StrideErrors]) -> Vec<StrideRow> {
    strides
        .iter()
        .map(|s| StrideRow {
            subject: subject.to_string(),
            estimator: estimator.to_string(),
            stride: s.stride,
            start_time_s: s.start_time,
            phase_pct: s.phase_pct,
            phase_rate: s.phase_rate,
            stride_length_m: s.stride_length,
            incline_deg: s.incline,
            torque: s.torque,
        })
        .collect()
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub std: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }

    fn of_opt(values: impl Iterator<Item = Option<f64>>) -> Option<Self> {
        let v: Option<Vec<f64>> = values.collect();
        v.filter(|v| !v.is_empty()).map(|v| Self::of(&v))
    }
}

/// Across-subject spread of per-subject mean metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub subjects: usize,
    pub strides: usize,
    pub phase_pct: Spread,
    pub phase_rate: Spread,
    pub stride_length: Option<Spread>,
    pub incline: Option<Spread>,
    pub torque: Option<Spread>,
}

impl Summary {
    pub fn of(per_subject: &[MetricMeans]) -> Self {
        let col = |f: fn(&MetricMeans) -> f64| per_subject.iter().map(f).collect::<Vec<_>>();
        Self {
            subjects: per_subject.len(),
            strides: per_subject.iter().map(|m| m.strides).sum(),
            phase_pct: Spread::of(&col(|m| m.phase_pct)),
            phase_rate: Spread::of(&col(|m| m.phase_rate)),
            stride_length: Spread::of_opt(per_subject.iter().map(|m| m.stride_length)),
            incline: Spread::of_opt(per_subject.iter().map(|m| m.incline)),
            torque: Spread::of_opt(per_subject.iter().map(|m| m.torque)),
        }
    }
}

/// Phase-RMSE comparison of two estimators, `a - b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Paired over per-subject mean phase RMSE.
    pub subjects: PairedTTest,
    /// Paired over individual strides.
    pub strides: PairedTTest,
}

impl Comparison {
    pub fn phase(a_subjects: &[f64], b_subjects: &[f64], a_strides: &[f64], b_strides: &[f64]) -> Result<Self> {
        Ok(Self {
            subjects: paired_ttest(a_subjects, b_subjects)?,
            strides: paired_ttest(a_strides, b_strides)?,
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_stride_rows(path: &Path) -> Result<Vec<StrideRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorAggregate {
    pub estimator: String,
    pub summary: Summary,
}

/// Re-aggregated per-stride results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub kind: String,
    pub sources: Vec<String>,
    pub estimators: Vec<EstimatorAggregate>,
    /// Pairwise phase comparisons, keyed `"a-vs-b"`, for estimators scored
    /// on the same strides.
    pub comparisons: BTreeMap<String, Comparison>,
}

/// Regroup per-stride rows by estimator and subject and recompute the
/// summaries and paired tests.
pub fn reaggregate(rows: &[StrideRow], sources: Vec<String>) -> Result<AggregateReport> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("no stride rows to aggregate".into()));
    }
    // estimator -> subject -> strides, in first-seen order
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, BTreeMap<String, Vec<StrideErrors>>> = BTreeMap::new();
    for r in rows {
        if !order.contains(&r.estimator) {
            order.push(r.estimator.clone());
        }
        groups
            .entry(r.estimator.clone())
            .or_default()
            .entry(r.subject.clone())
            .or_default()
            .push(r.errors());
    }
    let per_subject = |e: &str| -> Vec<(String, MetricMeans, Vec<f64>)> {
        groups[e]
            .iter()
            .map(|(s, strides)| {
                (
                    s.clone(),
                    super::metrics::mean_metrics(strides),
                    strides.iter().map(|x| x.phase_pct).collect(),
                )
            })
            .collect()
    };
    let estimators = order
        .iter()
        .map(|e| EstimatorAggregate {
            estimator: e.clone(),
            summary: Summary::of(&per_subject(e).iter().map(|x| x.1).collect::<Vec<_>>()),
        })
        .collect();

    let mut comparisons = BTreeMap::new();
    for (i, a) in order.iter().enumerate() {
        for b in &order[i + 1..] {
            let (pa, pb) = (per_subject(a), per_subject(b));
            let same_subjects = pa.len() == pb.len() && pa.iter().zip(&pb).all(|(x, y)| x.0 == y.0);
            let same_strides = same_subjects && pa.iter().zip(&pb).all(|(x, y)| x.2.len() == y.2.len());
            if !same_strides || pa.len() < 2 {
                continue;
            }
            let sa: Vec<f64> = pa.iter().map(|x| x.1.phase_pct).collect();
            let sb: Vec<f64> = pb.iter().map(|x| x.1.phase_pct).collect();
            let ra: Vec<f64> = pa.iter().flat_map(|x| x.2.clone()).collect();
            let rb: Vec<f64> = pb.iter().flat_map(|x| x.2.clone()).collect();
            comparisons.insert(format!("{a}-vs-{b}"), Comparison::phase(&sa, &sb, &ra, &rb)?);
        }
    }
    Ok(AggregateReport {
        kind: "aggregate".into(),
        sources,
        estimators,
        comparisons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_uses_sample_std() {
        let s = Spread::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 1.0).abs() < 1e-15);
        assert_eq!(Spread::of(&[4.0]).std, 0.0);
    }

    fn row(subject: &str, estimator: &str, stride: usize, phase: f64) -> StrideRow {
        StrideRow {
            subject: subject.into(),
            estimator: estimator.into(),
            stride,
            start_time_s: stride as f64,
            phase_pct: phase,
            phase_rate: 0.01,
            stride_length_m: None,
            incline_deg: None,
            torque: None,
        }
    }

    #[test]
    fn csv_round_trip_and_reaggregation() {
        let mut rows = Vec::new();
        for (k, s) in ["a", "b", "c"].iter().enumerate() {
            for i in 0..4 {
                rows.push(row(s, "ekf", i, 1.0 + 0.1 * k as f64 + 0.01 * i as f64));
                rows.push(row(s, "tbe", i, 2.0 + 0.05 * i as f64 - 0.2 * k as f64));
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_rows(&path, &rows).unwrap();
        let back = read_stride_rows(&path).unwrap();
        assert_eq!(back, rows);
        let agg = reaggregate(&back, vec![]).unwrap();
        assert_eq!(agg.estimators.len(), 2);
        assert_eq!(agg.estimators[0].estimator, "ekf");
        assert_eq!(agg.estimators[0].summary.subjects, 3);
        assert_eq!(agg.estimators[0].summary.strides, 12);
        let c = &agg.comparisons["ekf-vs-tbe"];
        assert_eq!(c.subjects.n, 3);
        assert_eq!(c.strides.n, 12);
        assert!(c.subjects.mean_difference < 0.0);
    }

    #[test]
    fn empty_rows_are_an_error() {
        assert!(reaggregate(&[], vec![]).is_err());
    }
}
