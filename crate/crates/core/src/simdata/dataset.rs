//! Labeled stride dataset and its CSV form.
//!
//! One CSV row per sample with the header
//! `subject_id,leg_length_m,speed_mps,incline_deg,stride_idx,sample_idx,phase,
//! phase_rate,stride_length_m,theta_s_deg,theta_f_deg,p_f_m,p_u_m,torque_Nm`.
//! `torque_Nm` may be empty.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SAMPLES_PER_STRIDE: usize = 150;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrideSample {
    pub phase: f64,
    pub phase_rate: f64,
    /// Meters.
    pub stride_length: f64,
    /// Degrees.
    pub incline: f64,
    pub theta_s: f64,
    pub theta_f: f64,
    pub p_f: f64,
    pub p_u: f64,
    /// Biological ankle torque, N·m, plantarflexion positive.
    pub torque: Option<f64>,
}

impl StrideSample {
    /// Kinematic outputs in model column order.
    pub fn outputs(&self) -> [f64; 4] {
        [self.theta_s, self.theta_f, self.p_f, self.p_u]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stride {
    /// Treadmill condition, m/s.
    pub speed: f64,
    /// Treadmill condition, degrees.
    pub incline: f64,
    pub samples: Vec<StrideSample>,
}

impl Stride {
    /// Stride duration implied by its phase rate.
    pub fn duration(&self) -> f64 {
        1.0 / self.samples[0].phase_rate
    }

    pub fn has_torque(&self) -> bool {
        self.samples.iter().all(|s| s.torque.is_some())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    /// Meters.
    pub leg_length: f64,
    pub strides: Vec<Stride>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StrideDataset {
    subjects: Vec<Subject>,
}

impl StrideDataset {
    pub fn new(subjects: Vec<Subject>) -> Result<Self> {
        for s in &subjects {
            for (i, st) in s.strides.iter().enumerate() {
                validate_stride(st).map_err(|message| Error::Dataset {
                    row: 0,
                    message: format!("subject {} stride {i}: {message}", s.id),
                })?;
            }
        }
        Ok(Self { subjects })
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn subject_count(&self) -> usize {
        self.subjects.len()
    }

    pub fn stride_count(&self) -> usize {
        self.subjects.iter().map(|s| s.strides.len()).sum()
    }

    pub fn sample_count(&self) -> usize {
        self.stride_count() * SAMPLES_PER_STRIDE
    }

    pub fn has_torque(&self) -> bool {
        self.stride_count() > 0
            && self
                .subjects
                .iter()
                .all(|s| s.strides.iter().all(Stride::has_torque))
    }

    /// Everything except subject `index`, for leave-one-out training.
    pub fn without_subject(&self, index: usize) -> Self {
        Self {
            subjects: self
                .subjects
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != index)
                .map(|(_, s)| s.clone())
                .collect(),
        }
    }

    pub fn only_subject(&self, index: usize) -> Self {
        Self {
            subjects: vec![self.subjects[index].clone()],
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for subject in &self.subjects {
            for (si, stride) in subject.strides.iter().enumerate() {
                for (k, s) in stride.samples.iter().enumerate() {
                    w.serialize(CsvRow {
                        subject_id: subject.id.clone(),
                        leg_length_m: subject.leg_length,
                        speed_mps: stride.speed,
                        incline_deg: s.incline,
                        stride_idx: si,
                        sample_idx: k,
                        phase: s.phase,
                        phase_rate: s.phase_rate,
                        stride_length_m: s.stride_length,
                        theta_s_deg: s.theta_s,
                        theta_f_deg: s.theta_f,
                        p_f_m: s.p_f,
                        p_u_m: s.p_u,
                        torque_Nm: s.torque,
                    })?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = CsvRow::HEADER;
        if headers.len() != expected.len()
            || headers.iter().zip(expected.iter()).any(|(a, b)| a.trim() != *b)
        {
            return Err(Error::Dataset {
                row: 1,
                message: format!("header must be {}", expected.join(",")),
            });
        }

        let mut builder = Builder::default();
        for (i, rec) in rdr.deserialize::<CsvRow>().enumerate() {
            // line 1 is the header
            let line = i + 2;
            let row = rec.map_err(|e| Error::Dataset {
                row: line,
                message: e.to_string(),
            })?;
            builder.push(row, line)?;
        }
        builder.finish()
    }
}

/// Load and validate a stride CSV.
pub fn load_stride_dataset(path: &Path) -> Result<StrideDataset> {
    let f = std::fs::File::open(path)?;
    StrideDataset::read_csv(std::io::BufReader::new(f))
}

fn validate_stride(st: &Stride) -> std::result::Result<(), String> {
    if st.samples.len() != SAMPLES_PER_STRIDE {
        return Err(format!(
            "expected {SAMPLES_PER_STRIDE} samples, found {}",
            st.samples.len()
        ));
    }
    for w in st.samples.windows(2) {
        if !(w[1].phase > w[0].phase) {
            return Err("phase is not strictly increasing".into());
        }
    }
    let first = st.samples[0].phase;
    let last = st.samples[SAMPLES_PER_STRIDE - 1].phase;
    if !(0.0..1.0).contains(&first) || !(0.0..1.0).contains(&last) {
        return Err("phase outside [0, 1)".into());
    }
    if st.samples.iter().any(|s| !(s.phase_rate > 0.0) || !(s.stride_length > 0.0)) {
        return Err("phase rate and stride length must be positive".into());
    }
    let finite = st.samples.iter().all(|s| {
        [s.phase, s.phase_rate, s.stride_length, s.incline, s.theta_s, s.theta_f, s.p_f, s.p_u]
            .iter()
            .all(|v| v.is_finite())
            && s.torque.is_none_or(f64::is_finite)
    });
    if !finite {
        return Err("non-finite values".into());
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct CsvRow {
    subject_id: String,
    leg_length_m: f64,
    speed_mps: f64,
    incline_deg: f64,
    stride_idx: usize,
    sample_idx: usize,
    phase: f64,
    phase_rate: f64,
    stride_length_m: f64,
    theta_s_deg: f64,
    theta_f_deg: f64,
    p_f_m: f64,
    p_u_m: f64,
    torque_Nm: Option<f64>,
}

impl CsvRow {
    const HEADER: [&'static str; 14] = [
        "subject_id",
        "leg_length_m",
        "speed_mps",
        "incline_deg",
        "stride_idx",
        "sample_idx",
        "phase",
        "phase_rate",
        "stride_length_m",
        "theta_s_deg",
        "theta_f_deg",
        "p_f_m",
        "p_u_m",
        "torque_Nm",
    ];
}

#[derive(Default)]
struct Builder {
    subjects: Vec<Subject>,
    current: Option<(String, usize, Stride, usize)>,
}

impl Builder {
    fn push(&mut self, row: CsvRow, line: usize) -> Result<()> {
        let sample = StrideSample {
            phase: row.phase,
            phase_rate: row.phase_rate,
            stride_length: row.stride_length_m,
            incline: row.incline_deg,
            theta_s: row.theta_s_deg,
            theta_f: row.theta_f_deg,
            p_f: row.p_f_m,
            p_u: row.p_u_m,
            torque: row.torque_Nm,
        };
        let same_stride = matches!(&self.current, Some((id, idx, _, _)) if *id == row.subject_id && *idx == row.stride_idx);
        if !same_stride {
            self.close_stride()?;
            if row.sample_idx != 0 {
                return Err(Error::Dataset {
                    row: line,
                    message: format!("stride starts at sample_idx {}", row.sample_idx),
                });
            }
            self.open_subject(&row, line)?;
            self.current = Some((
                row.subject_id.clone(),
                row.stride_idx,
                Stride {
                    speed: row.speed_mps,
                    incline: row.incline_deg,
                    samples: Vec::with_capacity(SAMPLES_PER_STRIDE),
                },
                line,
            ));
        }
        let (_, _, stride, _) = self.current.as_mut().expect("stride open");
        let expected = stride.samples.len();
        if row.sample_idx != expected {
            return Err(Error::Dataset {
                row: line,
                message: format!("sample_idx {} where {expected} was expected", row.sample_idx),
            });
        }
        if let Some(prev) = stride.samples.last() {
            if !(sample.phase > prev.phase) {
                return Err(Error::Dataset {
                    row: line,
                    message: "phase is not monotonically increasing".into(),
                });
            }
        }
        stride.samples.push(sample);
        Ok(())
    }

    fn open_subject(&mut self, row: &CsvRow, line: usize) -> Result<()> {
        if !(row.leg_length_m > 0.0) {
            return Err(Error::Dataset {
                row: line,
                message: "leg length must be positive".into(),
            });
        }
        match self.subjects.iter().position(|s| s.id == row.subject_id) {
            Some(i) if i + 1 == self.subjects.len() => {
                if (self.subjects[i].leg_length - row.leg_length_m).abs() > 0.0 {
                    return Err(Error::Dataset {
                        row: line,
                        message: "leg length changes within a subject".into(),
                    });
                }
            }
            Some(_) => {
                return Err(Error::Dataset {
                    row: line,
                    message: format!("rows for subject {} are not contiguous", row.subject_id),
                })
            }
            None => self.subjects.push(Subject {
                id: row.subject_id.clone(),
                leg_length: row.leg_length_m,
                strides: Vec::new(),
            }),
        }
        Ok(())
    }

    fn close_stride(&mut self) -> Result<()> {
        if let Some((_, _, stride, line)) = self.current.take() {
            validate_stride(&stride).map_err(|message| Error::Dataset { row: line, message })?;
            self.subjects
                .last_mut()
                .expect("subject opened with stride")
                .strides
                .push(stride);
        }
        Ok(())
    }

    fn finish(mut self) -> Result<StrideDataset> {
        self.close_stride()?;
        Ok(StrideDataset {
            subjects: self.subjects,
        })
    }
}
