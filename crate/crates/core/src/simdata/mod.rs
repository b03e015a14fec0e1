//! Stride datasets, synthetic subjects and continuous sensor streams.

pub mod cohort;
pub mod dataset;
pub mod reference;
pub mod stream;

pub use cohort::{generate_cohort, Cohort, CohortConfig};
pub use dataset::{
    load_stride_dataset, Stride, StrideDataset, StrideSample, Subject, SAMPLES_PER_STRIDE,
};
pub use reference::reference_parameters;
pub use stream::{
    concatenate_strides, concatenate_subject, generate_synthetic_stream, ideal_measurement,
    LabeledStream, PhaseTruth, ScenarioProfile, Schedule, StreamSample,
};
