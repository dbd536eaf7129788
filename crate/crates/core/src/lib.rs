//! Training-free video summarization: scene division, rubric-guided scene
//! scoring, frame-level score shaping, keyshot selection and evaluation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backend;
pub mod caption;
pub mod error;
pub mod eval;
pub mod frames;
pub mod io;
pub mod pseudo_label;
pub mod rubric;
pub mod scene;
pub mod scoring;

pub use error::{BackendError, Error, Result};
pub use scene::{FrameEmbeddings, SceneSegmentation};
