//! Synthetic layered graphic-design dataset engine.
//!
//! Samples are assembled from a base design, foreground layers borrowed from
//! donor designs and auxiliary assets (image crops, pre-rendered text, cut-out
//! objects), placed to minimise overlap and flattened with source-over
//! compositing. Every sample is written with a manifest describing its layers,
//! boxes and captions, and the crate carries the metrics used to evaluate
//! decompositions and box detectors trained on the result.

pub mod assets;
pub mod captioning;
pub mod composer;
pub mod error;
pub mod geometry;
pub mod imaging;
pub mod metrics;
pub mod serialization;

pub use error::{Error, Result};
