use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::step::{baseline_step, raat_step, GenLossLog, StepRecord};
use crate::bench::{BenchmarkExample, BenchmarkSplit, NoiseKind};
use crate::error::{RaatError, Result};
use crate::hash::derive_seed;
use crate::tinylm::{TinyLm, Vocab};

/// How often each augmentation was the one trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SelectionStats {
    /// Indexed by [`NoiseKind::index`].
    pub counts: [u64; 4],
    pub total_updates: u64,
}

impl SelectionStats {
    pub fn record(&mut self, kind: NoiseKind) {
        self.counts[kind.index()] += 1;
        self.total_updates += 1;
    }

    pub fn count(&self, kind: NoiseKind) -> u64 {
        self.counts[kind.index()]
    }

    /// Tallies the selected max kind of every record that has one.
    pub fn from_log(log: &[StepRecord]) -> Self {
        let mut stats = SelectionStats::default();
        for kind in log.iter().filter_map(|r| r.max_kind) {
            stats.record(kind);
        }
        stats
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "golden": self.count(NoiseKind::Golden),
            "relevant": self.count(NoiseKind::Relevant),
            "irrelevant": self.count(NoiseKind::Irrelevant),
            "counterfactual": self.count(NoiseKind::Counterfactual),
            "total_updates": self.total_updates,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Present for modes whose every update trains on one of the four
    /// augmentations (raat variants, golden, multiple).
    pub stats: Option<SelectionStats>,
    pub total_updates: u64,
    pub log: Vec<StepRecord>,
}

/// All text a model will see during training and evaluation on `split`:
/// questions, answers, golden and noise passages, and raw retrievals.
pub fn corpus_texts(split: &BenchmarkSplit) -> Vec<String> {
    let mut texts = Vec::new();
    for ex in &split.examples {
        texts.push(ex.question.clone());
        texts.extend(ex.answers.iter().cloned());
        texts.push(ex.golden.text.clone());
        texts.push(ex.relevant_noise.text.clone());
        texts.push(ex.irrelevant_noise.text.clone());
        texts.push(ex.counterfactual_noise.text.clone());
        texts.extend(ex.retrieved.iter().map(|p| p.text.clone()));
    }
    texts
}

/// Fresh model for `config` with a vocabulary built from `split`.
pub fn init_model(split: &BenchmarkSplit, config: &TrainConfig) -> TinyLm {
    TinyLm::new(Vocab::build(&corpus_texts(split), 1), config.d, config.h, config.seed)
}

/// Runs `config.epochs` passes over the dataset in a seeded shuffled order,
/// one augmentation group per update for raat modes.
pub fn train(model: &mut TinyLm, dataset: &BenchmarkSplit, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(model, &dataset.examples, config, |_| {})
}

/// [`train`] with a callback invoked after every update.
pub fn train_with(
    model: &mut TinyLm,
    examples: &[BenchmarkExample],
    config: &TrainConfig,
    mut on_step: impl FnMut(&StepRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if examples.is_empty() {
        return Err(RaatError::Data("training set is empty".into()));
    }
    let mut branch_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "baseline", "draws"));
    let mut stats = SelectionStats::default();
    let mut track_stats = true;
    let mut log = Vec::new();
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "epoch-order", &epoch.to_string()));
        order.shuffle(&mut rng);

        for &i in &order {
            let example = &examples[i];
            if config.mode.is_raat() {
                let out = raat_step(model, example, config)?;
                let b = out.breakdown;
                step += 1;
                stats.record(b.max_kind);
                let rec = StepRecord {
                    step,
                    example_id: example.id.clone(),
                    mode: config.mode,
                    gen_losses: GenLossLog::full(b.gen_losses),
                    max_kind: Some(b.max_kind),
                    min_kind: Some(b.min_kind),
                    l_reg: b.l_reg,
                    l_ada: b.l_ada,
                    l_cls: b.l_cls,
                    l_raat: b.l_raat,
                    grad_norm: out.grad_norm,
                    sample: None,
                };
                on_step(&rec);
                log.push(rec);
            } else {
                for u in baseline_step(model, example, examples, config, &mut branch_rng)? {
                    step += 1;
                    match u.kind {
                        Some(kind) => stats.record(kind),
                        None => track_stats = false,
                    }
                    let rec = StepRecord {
                        step,
                        example_id: example.id.clone(),
                        mode: config.mode,
                        gen_losses: u.kind.map_or_else(GenLossLog::default, |k| GenLossLog::single(k, u.gen_loss)),
                        max_kind: None,
                        min_kind: None,
                        l_reg: 0.0,
                        l_ada: u.gen_loss,
                        l_cls: 0.0,
                        l_raat: u.gen_loss,
                        grad_norm: u.grad_norm,
                        sample: Some(u.sample),
                    };
                    on_step(&rec);
                    log.push(rec);
                }
            }
        }
    }
    Ok(TrainOutcome {
        stats: track_stats.then_some(stats),
        total_updates: step as u64,
        log,
    })
}

pub fn write_step_log(log: &[StepRecord], path: &Path) -> Result<()> {
    let mut out = String::new();
    for r in log {
        out.push_str(&serde_json::to_string(r).expect("step record serializes"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| RaatError::io(path, e))
}

pub fn read_step_log(path: &Path) -> Result<Vec<StepRecord>> {
    let content = std::fs::read_to_string(path).map_err(|e| RaatError::io(path, e))?;
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| RaatError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
