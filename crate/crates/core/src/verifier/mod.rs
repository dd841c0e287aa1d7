//! The temporal verifier: a class token and learnable positions prepended to
//! the frame-feature sequence, pre-norm transformer blocks and a small
//! classification head, trained with momentum SGD on cross-entropy.

mod checkpoint;
mod config;
mod forward;
mod gradcheck;
mod loss;
mod optim;
mod params;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{TrainConfig, VerifierConfig, LAYER_NORM_EPS};
pub use forward::{
    forward_tensor, predict, score_from_logits, verifier_backward, verifier_forward, ForwardTrace,
};
pub use gradcheck::{central_difference, finite_difference_grad, verifier_loss};
pub use loss::{smoothed_cross_entropy, softmax_cross_entropy};
pub use optim::sgd_momentum_step;
pub use params::{init_params, Gradients, HeadParams, VerifierParams, INIT_STD};
pub use train::{score_examples, train_verifier, write_curves_csv, EpochRecord, Example, TrainOutcome};
