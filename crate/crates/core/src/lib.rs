//! Behavior images: API-call traces encoded as RGB images through the 2D
//! inverse DFT.
//!
//! The pipeline runs [`trace`] parsing, then [`vocab`] tf-idf, then
//! [`select`] ngram ranking and placement, then the [`codec`]. [`phash`]
//! fingerprints and clusters the resulting images. [`model`] holds the
//! fitted codec state and [`synth`] generates labeled corpora for testing.

pub mod channel;
pub mod codec;
pub mod error;
pub mod model;
pub mod phash;
pub mod select;
pub mod synth;
pub mod trace;
pub mod vocab;

pub use channel::Channel;
pub use codec::{decode, encode, BehaviorImage, CodecMode, DcPolicy, DecodedChannel};
pub use error::{Error, Result};
pub use model::{CodecModel, FitOptions};
pub use phash::{cluster, hamming, hash192, PerceptualHash};
pub use select::{Coord, Label};
pub use trace::{parse_trace, Document};
pub use vocab::Vocabulary;
