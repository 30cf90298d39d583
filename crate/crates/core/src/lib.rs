//! Variable-length quantum source coding.
//!
//! Builds Huffman codes over the eigenvalue spectrum of a pure-state ensemble,
//! runs the reversible tape circuits that pack codewords on a sparse
//! basis-branch simulator, and measures fidelity and circuit cost for the
//! storage and two-party communication schemes.

pub mod error;
pub mod huffman;
pub mod circuit;
pub mod qmath;
pub mod source;
pub mod storage;
pub mod comm;
pub mod scale;
pub mod report;
pub mod cli;

pub use error::{Error, Result};
