//! EEG representational alignment for a small recurrent convolutional
//! vision model.
//!
//! The crate is organised bottom-up:
//!
//! * [`diffcore`] is a tape-based reverse-mode differentiation engine over
//!   dense `f64` tensors, plus an Adam optimizer.
//! * [`models`] holds the four-stage recurrent backbone and the multi-layer
//!   EEG encoding head.
//! * [`losses`] builds the composite classification + EEG generation loss.
//! * [`trainer`] runs alignment training, including the control variants.
//! * [`rsa`] contains every model/brain comparison: RDMs, Spearman RSA,
//!   pairwise decoding, variability, partial correlations and t-tests.
//! * [`data`] owns the dataset containers, the RTF tensor file format and
//!   the synthetic subject generator.

pub mod data;
pub mod diffcore;
pub mod error;
pub mod losses;
pub mod models;
pub mod rsa;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use tensor::Tensor;

pub use data::{EegDataset, FeatureEmbedding, FmriDataset, SynthConfig, SynthOutput};
pub use diffcore::{AdamConfig, AdamState, Gradients, Graph, NodeId, OpKind};
pub use losses::{AlignmentLossTerms, LossAblation};
pub use models::{AlignedModel, BackboneSpec, EncodingHead, MiniCor, Stage};
pub use rsa::{Rdm, RdmSource, SimilarityCurve, VariabilityMatrix};
pub use trainer::{AlignmentConfig, ControlMode, PoolingMode, TrainReport};
