//! Learnable sinc band-pass filterbank front-end for raw-waveform
//! classification, with a learned-taps convolutional baseline, a small
//! neural stack with hand-written adjoints, and analysis tooling.

pub mod analysis;
pub mod audio;
pub mod config;
pub mod error;
pub mod filter;
pub mod nn;
pub mod sinc;
pub mod train;

pub use audio::{ChunkStream, CorpusSpec, Framing, Waveform};
pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use filter::{ConstrainedCutoffs, FilterBank, FilterSpec, RawCutoffs, WindowKind};
pub use nn::{Checkpoint, FrontendKind, Model, NetworkConfig, Tensor};
pub use sinc::SincLayerParams;
pub use train::{EpochRecord, ScoredTrial, TrainSettings};
