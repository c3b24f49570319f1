//! Multi-shot appearance similarity for online multi-object tracking.
//!
//! The crate covers the full pipeline around an LSTM-based similarity scorer:
//!
//! * [`embedding`]: feature vectors, synthetic and file-backed feature sources,
//!   VGG11 layer-size plan, Euclidean single-shot distance.
//! * [`tracklet`]: labelled feature tracklets and the five corpus kinds
//!   (time steps, intruders).
//! * [`model`]: the scorer (LSTM + fully connected head + softmax), exact
//!   gradients, Adagrad training, model files.
//! * [`eval`]: confusion counts, ROC sweeps and the train/test experiment grid.
//! * [`tracker`]: online tracking-by-detection with a blended appearance and
//!   motion cost and optimal assignment.
//! * [`metrics`]: CLEAR-MOT scoring (MOTA, IDF1, MT/ML, precision, recall).
//! * [`cli`]: the `msdoas` command line.

pub mod cli;
pub mod config;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod model;
pub mod scenario;
pub mod tracker;
pub mod tracklet;

pub use error::{Error, Result};
