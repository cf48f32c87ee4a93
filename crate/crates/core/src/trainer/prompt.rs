use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::OrderPolicy;
use crate::bench::{BenchmarkExample, NoiseKind};
use crate::hash::derive_seed;

/// Literal separator between contexts and before the question. Maps to the
/// reserved SEP id.
pub const SEP_TOKEN: &str = "<sep>";

/// Joins contexts and the question, question last.
pub fn join_prompt(contexts: &[&str], question: &str) -> String {
    let mut parts: Vec<&str> = contexts.to_vec();
    parts.push(question);
    parts.join(&format!(" {SEP_TOKEN} "))
}

/// Orders `noise` and `golden` by `policy`. `key` names the draw for the
/// shuffled policy so that every (seed, key) pair gets an independent coin.
pub fn order_contexts<'a>(golden: &'a str, noise: &'a str, policy: OrderPolicy, seed: u64, key: &str) -> [&'a str; 2] {
    let noise_first = match policy {
        OrderPolicy::NoiseFirst => true,
        OrderPolicy::GoldenFirst => false,
        OrderPolicy::Shuffled => ChaCha8Rng::seed_from_u64(derive_seed(seed, key, "order")).gen_bool(0.5),
    };
    if noise_first {
        [noise, golden]
    } else {
        [golden, noise]
    }
}

/// Contexts of the `kind` augmentation in prompt order.
pub fn prompt_contexts(example: &BenchmarkExample, kind: NoiseKind, policy: OrderPolicy, seed: u64) -> Vec<&str> {
    let golden = example.golden.text.as_str();
    if kind == NoiseKind::Golden {
        return vec![golden];
    }
    let noise = example.context(kind).text.as_str();
    let key = format!("{}#{}", example.id, kind.label());
    order_contexts(golden, noise, policy, seed, &key).to_vec()
}

pub fn assemble_prompt(example: &BenchmarkExample, kind: NoiseKind, policy: OrderPolicy, seed: u64) -> String {
    join_prompt(&prompt_contexts(example, kind, policy, seed), &example.question)
}
