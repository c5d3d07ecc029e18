//! Momentum-driven audio-visual target speaker extraction.
//!
//! A small dense-array core with reverse-mode gradients carries an
//! extraction network whose blocks fuse the current speaker embedding with a
//! remembered anchor embedding. The anchors live in a [`MemoryBank`] that an
//! online [`StreamEngine`] updates window by window.

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod io;
pub mod model;
pub mod momentum;
pub mod ops;
pub mod params;
pub mod streaming;
pub mod tape;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use model::{extract, Extraction, ModelConfig, ModelParams, VisualSlice};
pub use momentum::MemoryBank;
pub use streaming::{StreamConfig, StreamEngine};
pub use tape::{Tape, Var};
pub use tensor::{Real, Tensor, TensorF};

// The guide's snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/tensors.md")]
    mod tensors {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/momentum.md")]
    mod momentum {}
    #[doc = include_str!("../../../book/src/streaming.md")]
    mod streaming {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
