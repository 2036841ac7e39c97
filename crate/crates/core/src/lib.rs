//! Direction-of-arrival estimation from first-order ambisonics (FOA) using
//! acoustic intensity vectors, with optional neural refinement: a learned
//! time-frequency mask for denoising and a learned reverberant-intensity
//! estimate that is subtracted before aggregation.
//!
//! The crate is organised bottom-up:
//!
//! - [`dsp`]: Hann window, STFT, mel filterbank, log-mel features.
//! - [`foa`]: steering vectors, plane-wave encoding, intensity fields, the
//!   energy mask, refined aggregation and DOA extraction.
//! - [`scene`]: synthetic scenes with exact direct/reverberant/noise
//!   components and oracle refinement targets.
//! - [`neural`]: a small CRNN stack (reverberation, mask and activity heads)
//!   with hand-written backpropagation, ADAM, checkpoints and FOA-domain
//!   augmentation.
//! - [`pipeline`] and [`metrics`]: end-to-end estimators, activity
//!   thresholding, event smoothing, DOA error and frame recall.
//! - [`io`], [`config`] and [`commands`]: WAV/CSV/plot files and the
//!   `simulate | estimate | train | eval | plot` commands used by the binary.

pub mod commands;
pub mod config;
pub mod dsp;
pub mod error;
pub mod foa;
pub mod io;
pub mod metrics;
pub mod neural;
pub mod pipeline;
pub mod scene;
pub mod tracks;

pub use error::{Error, Result};
