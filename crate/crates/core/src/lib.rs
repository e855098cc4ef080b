//! Digital lithological mapping of a target mineral from hyperspectral
//! imagery.
//!
//! The crate covers the full chain: radiometric conversion of calibrated
//! radiance to top-of-atmosphere reflectance, unsupervised pre-classification
//! of the scene, isolation of the soil class, splitting soil into
//! mineral-rich and impurity-rich subclasses by correlation against a
//! laboratory signature, a discriminant projection that scores each soil
//! pixel's relative abundance, and a closed-form two-endmember unmixing that
//! turns the refined representatives into fractional abundance.
//!
//! Every stage is deterministic for a fixed seed, independent of thread
//! count, and exposed both here and through the command-line front end.

pub mod config;
pub mod error;
pub mod export;
pub mod ingest;
pub mod pipeline;
pub mod preclassify;
pub mod project;
pub mod spectra;
pub mod subclass;
pub mod synth;
pub mod unmix;

pub use error::{Error, ErrorClass, Result};
