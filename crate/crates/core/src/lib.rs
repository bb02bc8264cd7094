//! Grayscale visualization of binary files, texture feature extraction and
//! from-scratch classifiers for malware family classification.
//!
//! The pipeline runs bytes → [`binimg::GrayImage`] → [`texture::FeatureRecord`]
//! → [`dataset::FeatureTable`] → ([`pca`], [`learn`]) → [`eval`].

pub mod binimg;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod learn;
pub mod pca;
pub mod rng;
pub mod texture;

pub use error::{Error, Result};
