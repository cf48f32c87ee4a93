use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EvalCondition, EvalOptions};
use crate::bench::{BenchmarkExample, BenchmarkSplit, NoiseKind};
use crate::error::{RaatError, Result};
use crate::tinylm::TinyLm;
use crate::trainer::{assemble_prompt, prompt_contexts};

/// Version of the natural-language template used for exported prompts.
pub const PROMPT_TEMPLATE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptLine {
    pub example_id: String,
    pub condition: EvalCondition,
    pub prompt: String,
    pub template_version: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub example_id: String,
    pub condition: EvalCondition,
    pub prediction: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationLine {
    pub example_id: String,
    pub kind: NoiseKind,
    pub vector: Vec<f64>,
}

/// Prompt text for an external model. Contexts appear in the same order the
/// built-in model sees them.
pub fn external_prompt(example: &BenchmarkExample, condition: EvalCondition, opts: &EvalOptions) -> String {
    let contexts = prompt_contexts(example, condition.kind(), opts.order_policy, opts.seed);
    let mut out = String::from("Answer the question based on the given passages. Reply with the answer only.\n\n");
    for (i, c) in contexts.iter().enumerate() {
        out.push_str(&format!("Passage {}: {}\n", i + 1, c));
    }
    out.push_str(&format!("\nQuestion: {}\nAnswer:", example.question));
    out
}

/// One line per (example, condition), examples outermost.
pub fn export_prompts(bench: &BenchmarkSplit, conditions: &[EvalCondition], opts: &EvalOptions, out_path: &Path) -> Result<()> {
    let mut out = String::new();
    for ex in &bench.examples {
        for &condition in conditions {
            let line = PromptLine {
                example_id: ex.id.clone(),
                condition,
                prompt: external_prompt(ex, condition, opts),
                template_version: PROMPT_TEMPLATE_VERSION,
            };
            out.push_str(&serde_json::to_string(&line).expect("prompt serializes"));
            out.push('\n');
        }
    }
    std::fs::write(out_path, out).map_err(|e| RaatError::io(out_path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionLine>> {
    let content = std::fs::read_to_string(path).map_err(|e| RaatError::io(path, e))?;
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| RaatError::Parse {
                line: i + 1,
                message: format!("{}: {e}", path.display()),
            })
        })
        .collect()
}

/// Last-token hidden state of every (example, kind) prompt.
pub fn representations(model: &TinyLm, bench: &BenchmarkSplit, opts: &EvalOptions) -> Result<Vec<RepresentationLine>> {
    let per_example: Vec<Vec<RepresentationLine>> = bench
        .examples
        .par_iter()
        .map(|ex| {
            NoiseKind::ALL
                .iter()
                .map(|&kind| {
                    let (vector, _) = model.represent(&assemble_prompt(ex, kind, opts.order_policy, opts.seed))?;
                    Ok(RepresentationLine {
                        example_id: ex.id.clone(),
                        kind,
                        vector,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_example.into_iter().flatten().collect())
}

pub fn export_representations(model: &TinyLm, bench: &BenchmarkSplit, opts: &EvalOptions, out_path: &Path) -> Result<()> {
    let mut out = String::new();
    for line in representations(model, bench, opts)? {
        out.push_str(&serde_json::to_string(&line).expect("representation serializes"));
        out.push('\n');
    }
    std::fs::write(out_path, out).map_err(|e| RaatError::io(out_path, e))
}

/// Fraction of (example, kind) prompts whose noise-kind head argmax equals
/// the true kind.
pub fn noise_accuracy(model: &TinyLm, bench: &BenchmarkSplit, opts: &EvalOptions) -> Result<f64> {
    let hits: Vec<usize> = bench
        .examples
        .par_iter()
        .map(|ex| {
            let mut hits = 0;
            for kind in NoiseKind::ALL {
                let (_, logits) = model.represent(&assemble_prompt(ex, kind, opts.order_policy, opts.seed))?;
                let mut best = 0;
                for i in 1..logits.len() {
                    if logits[i] > logits[best] {
                        best = i;
                    }
                }
                hits += usize::from(best == kind.index());
            }
            Ok(hits)
        })
        .collect::<Result<_>>()?;
    let total = 4 * bench.examples.len();
    if total == 0 {
        return Err(RaatError::Data("empty benchmark".into()));
    }
    Ok(hits.iter().sum::<usize>() as f64 / total as f64)
}
