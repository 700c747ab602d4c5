//! Multi-modal music emotion recognition.
//!
//! The crate turns a song corpus (targets, lyrics and Spotify-style audio
//! descriptors) into valence/arousal regression experiments:
//!
//! * [`dataset`] loads and validates the corpus, dummy-encodes audio features
//!   and assigns train/validation/test splits.
//! * [`text`] extracts the three lyric feature families: VADER-style sentiment,
//!   TF-IDF unigrams and affect-lexicon weighted counts.
//! * [`numerics`] holds the shared kernels (PCA, OLS with t-tests,
//!   standardization, special functions).
//! * [`regressors`] implements linear regression, random forests, epsilon-SVR
//!   and an MLP behind one fit/predict contract, plus k-fold grid search.
//! * [`selection`] covers feature fusion, significance filtering, the lyric
//!   feature combination search and recursive feature elimination.
//! * [`evaluation`] scores models and assembles the experiment reports.
//! * [`pipeline`] wires corpus loading and feature extraction together.
//! * [`synthetic`] generates corpora with a known generative model.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod fsio;
pub mod numerics;
pub mod pipeline;
pub mod regressors;
pub mod rng;
pub mod selection;
pub mod synthetic;
pub mod text;

pub use error::{Error, Result};
