//! Two-branch joint embedding for zero-shot learning.
//!
//! Visual features and class-level semantic vectors are mapped by two small
//! MLPs into a shared space. Training alternates between the visual branch
//! (with an auxiliary linear classifier that keeps classes apart) and the
//! semantic branch; a test sample is assigned to the class whose semantic
//! embedding is nearest. [`transductive`] adds pseudo-label calibration on
//! the unlabelled test pool.
//!
//! The crate is `no_std` and needs only `alloc`. The `parallel` feature
//! spreads matrix products over a rayon pool without changing any result.

#![no_std]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod dataset;
pub mod error;
pub mod eval;
pub mod inference;
pub mod model;
pub mod numerics;
mod rng;
pub mod training;
pub mod transductive;

pub use dataset::{Dataset, Splits};
pub use error::{DatasetError, Error, Result};
pub use eval::{evaluate, harmonic_mean, per_class_accuracy, Metrics};
pub use inference::{predict, predict_all, LabelSpace, Prediction, Setting, Split};
pub use model::{
    batch_loss, check_gradients, embed_semantic, embed_visual, forward_loss, init_model, Batch,
    Branch, GradCheck, HyperParams, LossBreakdown, ModelParams, ParamId,
};
pub use numerics::Matrix;
pub use training::{train, train_with, TrainLog, TrainOptions, TrainSet};
pub use transductive::{select_pseudo, transduce, update_m, PseudoSample, RoundReport};
