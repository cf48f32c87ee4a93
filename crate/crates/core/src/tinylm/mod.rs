//! A minimal autoregressive language model with a four-way noise-kind head.
//!
//! Each position is represented by its own token embedding concatenated with
//! the causal mean of all embeddings so far, passed through one tanh layer.
//! Everything is double precision with hand-derived gradients.

pub mod checkpoint;
mod model;
mod params;
mod vocab;

pub use model::{
    backward, backward_into, classification_loss, encode_prompt, forward, generate, log_softmax, ForwardOutput,
    ForwardTrace,
};
pub use params::{axpy, dot, Gradients, Matrix, ModelDims, ModelParams, NUM_CLASSES};
pub use vocab::{Vocab, BOS, EOS, PAD, RESERVED, SEP, UNK};

use crate::error::Result;

pub const DEFAULT_D: usize = 32;
pub const DEFAULT_H: usize = 64;

/// Parameters together with the vocabulary they were trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyLm {
    pub vocab: Vocab,
    pub params: ModelParams,
    pub seed: u64,
}

impl TinyLm {
    pub fn new(vocab: Vocab, d: usize, h: usize, seed: u64) -> Self {
        let dims = ModelDims { vocab: vocab.len(), d, h };
        TinyLm {
            params: ModelParams::init(dims, seed),
            vocab,
            seed,
        }
    }

    /// Greedy answer for a text prompt.
    pub fn answer(&self, prompt: &str, max_len: usize) -> Result<String> {
        let ids = generate(&self.params, &self.vocab.encode_prompt(prompt), max_len)?;
        Ok(self.vocab.decode(&ids))
    }

    /// Last-token hidden state and noise-kind logits for a text prompt.
    pub fn represent(&self, prompt: &str) -> Result<(Vec<f64>, [f64; NUM_CLASSES])> {
        encode_prompt(&self.params, &self.vocab.encode_prompt(prompt))
    }
}
