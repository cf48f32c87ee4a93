use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{Mode, TrainConfig};
use super::objective::{GroupForward, LossBreakdown};
use super::prompt::{assemble_prompt, join_prompt, order_contexts};
use crate::bench::{BenchmarkExample, NoiseKind};
use crate::error::{RaatError, Result};
use crate::tinylm::{backward_into, forward, ForwardOutput, Gradients, ModelParams, TinyLm};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GenLossLog {
    pub golden: Option<f64>,
    pub relevant: Option<f64>,
    pub irrelevant: Option<f64>,
    pub counterfactual: Option<f64>,
}

impl GenLossLog {
    pub fn full(losses: [f64; 4]) -> Self {
        GenLossLog {
            golden: Some(losses[0]),
            relevant: Some(losses[1]),
            irrelevant: Some(losses[2]),
            counterfactual: Some(losses[3]),
        }
    }

    pub fn single(kind: NoiseKind, loss: f64) -> Self {
        let mut log = GenLossLog::default();
        *log.slot(kind) = Some(loss);
        log
    }

    fn slot(&mut self, kind: NoiseKind) -> &mut Option<f64> {
        match kind {
            NoiseKind::Golden => &mut self.golden,
            NoiseKind::Relevant => &mut self.relevant,
            NoiseKind::Irrelevant => &mut self.irrelevant,
            NoiseKind::Counterfactual => &mut self.counterfactual,
        }
    }

    pub fn as_array(&self) -> Option<[f64; 4]> {
        Some([self.golden?, self.relevant?, self.irrelevant?, self.counterfactual?])
    }
}

/// One parameter update, as written to the step log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub example_id: String,
    pub mode: Mode,
    pub gen_losses: GenLossLog,
    pub max_kind: Option<NoiseKind>,
    pub min_kind: Option<NoiseKind>,
    pub l_reg: f64,
    pub l_ada: f64,
    pub l_cls: f64,
    pub l_raat: f64,
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    /// Which prompt a baseline update trained on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<String>,
}

fn answer_ids(model: &TinyLm, example: &BenchmarkExample) -> Vec<usize> {
    model.vocab.encode_answer(&example.answers[0])
}

fn check_finite(example: &BenchmarkExample, what: &str, values: &[f64]) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(RaatError::NonFinite {
            example_id: example.id.clone(),
            detail: format!("{what} = {v}"),
        });
    }
    Ok(())
}

/// Forward passes over the four augmentations of `example`, in label order.
pub fn group_losses(model: &TinyLm, example: &BenchmarkExample, config: &TrainConfig) -> Result<GroupForward> {
    let answer = answer_ids(model, example);
    let outputs: Vec<ForwardOutput> = NoiseKind::ALL
        .iter()
        .map(|&kind| {
            let prompt = assemble_prompt(example, kind, config.order_policy, config.seed);
            forward(&model.params, &model.vocab.encode_prompt(&prompt), &answer)
        })
        .collect::<Result<_>>()?;
    let outputs: [ForwardOutput; 4] = outputs.try_into().expect("one output per noise kind");
    Ok(GroupForward { outputs })
}

/// Scales `grads` to global L2 norm at most `max_norm`; returns the norm before clipping.
pub fn clip_gradients(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.l2_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

fn apply_update(params: &mut ModelParams, mut grads: Gradients, config: &TrainConfig) -> f64 {
    let norm = clip_gradients(&mut grads, config.grad_clip_norm);
    params.add_scaled(-config.lr, &grads);
    norm
}

#[derive(Debug, Clone)]
pub struct RaatStep {
    pub breakdown: LossBreakdown,
    pub grad_norm: f64,
}

/// One adversarial multi-task update on the augmentation group of `example`.
pub fn raat_step(model: &mut TinyLm, example: &BenchmarkExample, config: &TrainConfig) -> Result<RaatStep> {
    if !config.mode.is_raat() {
        return Err(RaatError::Config(format!("raat_step called in {} mode", config.mode)));
    }
    let w = config.raat_weights();
    let group = group_losses(model, example, config)?;
    let breakdown = group.breakdown(w);
    check_finite(example, "generation loss", &breakdown.gen_losses)?;
    check_finite(example, "objective", &[breakdown.l_cls, breakdown.l_raat])?;
    let grads = group.gradients(&model.params, &breakdown, w);
    if !grads.is_finite() {
        return Err(RaatError::NonFinite {
            example_id: example.id.clone(),
            detail: "gradient".into(),
        });
    }
    let grad_norm = apply_update(&mut model.params, grads, config);
    Ok(RaatStep { breakdown, grad_norm })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RetrobustBranch {
    Top1,
    LowRanked,
    Random,
}

impl RetrobustBranch {
    pub fn draw<R: Rng>(rng: &mut R) -> Self {
        match rng.gen_range(0..3) {
            0 => RetrobustBranch::Top1,
            1 => RetrobustBranch::LowRanked,
            _ => RetrobustBranch::Random,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RetrobustBranch::Top1 => "top1",
            RetrobustBranch::LowRanked => "low_ranked",
            RetrobustBranch::Random => "random",
        }
    }
}

/// A single generation-loss update on `prompt`.
fn generation_update(model: &mut TinyLm, example: &BenchmarkExample, prompt: &str, config: &TrainConfig) -> Result<(f64, f64)> {
    let out = forward(&model.params, &model.vocab.encode_prompt(prompt), &answer_ids(model, example))?;
    check_finite(example, "generation loss", &[out.gen_loss])?;
    let mut grads = ModelParams::zeros(model.params.dims());
    backward_into(&model.params, &out.trace, 1.0, 0.0, NoiseKind::Golden, &mut grads);
    let norm = apply_update(&mut model.params, grads, config);
    Ok((out.gen_loss, norm))
}

/// Outcome of one baseline update: the generation loss, the gradient norm,
/// which prompt was used, and the noise kind when the prompt is one of the
/// four standard augmentations.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineUpdate {
    pub gen_loss: f64,
    pub grad_norm: f64,
    pub sample: String,
    pub kind: Option<NoiseKind>,
}

/// Baseline fine-tuning updates for one example. `corpus` supplies passages of
/// other queries for RetRobust's random branch.
pub fn baseline_step<R: Rng>(
    model: &mut TinyLm,
    example: &BenchmarkExample,
    corpus: &[BenchmarkExample],
    config: &TrainConfig,
    rng: &mut R,
) -> Result<Vec<BaselineUpdate>> {
    let golden = example.golden.text.as_str();
    let mut updates = Vec::new();
    match config.mode {
        Mode::Golden => {
            let prompt = join_prompt(&[golden], &example.question);
            let (loss, norm) = generation_update(model, example, &prompt, config)?;
            updates.push(BaselineUpdate {
                gen_loss: loss,
                grad_norm: norm,
                sample: NoiseKind::Golden.name().into(),
                kind: Some(NoiseKind::Golden),
            });
        }
        Mode::Retrobust => {
            let branch = RetrobustBranch::draw(rng);
            let extra: String = match branch {
                RetrobustBranch::Top1 => first_retrieved(example)?.to_owned(),
                RetrobustBranch::LowRanked => example
                    .retrieved
                    .iter()
                    .max_by_key(|p| p.rank)
                    .map(|p| p.text.clone())
                    .ok_or_else(|| no_retrieved(example))?,
                RetrobustBranch::Random => random_other_passage(example, corpus, rng)?,
            };
            let key = format!("{}#retrobust", example.id);
            let ctx = order_contexts(golden, &extra, config.order_policy, config.seed, &key);
            let prompt = join_prompt(&ctx, &example.question);
            let (loss, norm) = generation_update(model, example, &prompt, config)?;
            updates.push(BaselineUpdate {
                gen_loss: loss,
                grad_norm: norm,
                sample: branch.name().into(),
                kind: None,
            });
        }
        Mode::Retrieved => {
            let mut ranked: Vec<_> = example.retrieved.iter().collect();
            ranked.sort_by_key(|p| p.rank);
            if ranked.is_empty() {
                return Err(no_retrieved(example));
            }
            let contexts: Vec<&str> = ranked.iter().take(2).map(|p| p.text.as_str()).collect();
            let prompt = join_prompt(&contexts, &example.question);
            let (loss, norm) = generation_update(model, example, &prompt, config)?;
            updates.push(BaselineUpdate {
                gen_loss: loss,
                grad_norm: norm,
                sample: "top2".into(),
                kind: None,
            });
        }
        Mode::Multiple => {
            for kind in NoiseKind::ALL {
                let prompt = assemble_prompt(example, kind, config.order_policy, config.seed);
                let (loss, norm) = generation_update(model, example, &prompt, config)?;
                updates.push(BaselineUpdate {
                    gen_loss: loss,
                    grad_norm: norm,
                    sample: kind.name().into(),
                    kind: Some(kind),
                });
            }
        }
        m => return Err(RaatError::Config(format!("baseline_step called in {m} mode"))),
    }
    Ok(updates)
}

fn no_retrieved(example: &BenchmarkExample) -> RaatError {
    RaatError::Data(format!("{}: example carries no retrieved passages", example.id))
}

fn first_retrieved(example: &BenchmarkExample) -> Result<&str> {
    example
        .retrieved
        .iter()
        .min_by_key(|p| p.rank)
        .map(|p| p.text.as_str())
        .ok_or_else(|| no_retrieved(example))
}

fn random_other_passage<R: Rng>(example: &BenchmarkExample, corpus: &[BenchmarkExample], rng: &mut R) -> Result<String> {
    let total: usize = corpus.iter().filter(|e| e.id != example.id).map(|e| e.retrieved.len()).sum();
    if total == 0 {
        return Err(RaatError::Data(format!("{}: no other query passages for RetRobust", example.id)));
    }
    let mut idx = rng.gen_range(0..total);
    for other in corpus.iter().filter(|e| e.id != example.id) {
        if idx < other.retrieved.len() {
            return Ok(other.retrieved[idx].text.clone());
        }
        idx -= other.retrieved.len();
    }
    unreachable!("index within total")
}
