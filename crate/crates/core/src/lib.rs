//! Core library for the covidmis fake-news detection pipeline: corpus
//! construction and labeling, text preprocessing, a float64 autodiff
//! tensor engine, the two classifier architectures, and the training /
//! evaluation machinery.

pub mod tensor;
pub mod textprep;
