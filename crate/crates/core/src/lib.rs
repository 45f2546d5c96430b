//! Iterated learning of miniature languages by neural sequence-to-sequence
//! agents.
//!
//! The crate is organised bottom-up: [`token`] and [`grammar`] define the
//! meaning space and languages, [`neuralnet`] is a small hand-written LSTM
//! seq2seq with attention, [`agent`] trains one model in both directions,
//! [`evaluation`] scores it, [`evolution`] chains generations together and
//! [`experiment`] bundles the named experiment presets.

pub mod agent;
pub mod evaluation;
pub mod evolution;
pub mod experiment;
pub mod grammar;
pub mod neuralnet;
pub mod seed;
pub mod token;
