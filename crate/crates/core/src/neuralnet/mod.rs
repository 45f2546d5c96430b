//! Hand-written seq2seq network: tied embeddings, a one-layer LSTM encoder,
//! an additive-attention LSTM decoder, teacher-forced cross-entropy with
//! full backpropagation through time, and AMSGrad.
//!
//! Everything is 64-bit and single-threaded per model; forward passes only
//! borrow the model, so frozen models can be shared across threads.

mod backward;
pub mod checkpoint;
mod decode;
mod forward;
pub mod gradcheck;
mod kernels;
mod model;
mod optim;

use thiserror::Error;

pub use backward::{accumulate_gradients, loss_and_gradients, sequence_loss, sequence_loss_sum};
pub use decode::{argmax, greedy_sequence, output_distribution, sample_many, sample_sequence};
pub use forward::{decode_step, encode, DecoderState, Encoded, StepOutput};
pub use model::{AgentModel, Gradients, Layout, ModelDims, Param};
pub use optim::{AmsGrad, AmsGradConfig};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetError {
    #[error("input sequence is empty")]
    EmptySequence,
    #[error("token index {0} outside the vocabulary")]
    UnknownToken(usize),
}
