//! Linear law-based feature space transformation (LLT) for multivariate
//! time-series classification, with a from-scratch classifier suite.
//!
//! The pipeline turns minute-resolution OHLCV candles into balanced,
//! labeled classification instances, extracts one linear law per
//! (training instance, feature) from the null space of the delay-embedded
//! Gram matrix, and projects test instances through the law bank into a
//! compact feature space. Classifiers (KNN, CART, linear SVM, bagged
//! trees) evaluate the transformed and the raw feature space through one
//! grouped cross-validation path.

pub mod classifiers;
pub mod error;
pub mod linalg;
pub mod market_data;
pub mod rng;
pub mod synth;
pub mod transform;
pub mod windowing;

pub use error::{Error, Result};
