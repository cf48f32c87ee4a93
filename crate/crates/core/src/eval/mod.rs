//! Evaluation across the four retrieval-noise conditions.

mod ablation;
mod export;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ablation::{ablation_suite, AblationReport, ABLATION_MODES};
pub use export::{
    export_prompts, export_representations, external_prompt, noise_accuracy, read_predictions, representations, PromptLine,
    PredictionLine, RepresentationLine, PROMPT_TEMPLATE_VERSION,
};

use crate::bench::{BenchmarkSplit, NoiseKind};
use crate::error::{RaatError, Result};
use crate::metrics::{aggregate, ConditionTable, ScoredPrediction};
use crate::tinylm::TinyLm;
use crate::trainer::{assemble_prompt, OrderPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EvalCondition {
    #[serde(rename = "golden_only")]
    GoldenOnly,
    #[serde(rename = "golden_ci")]
    GoldenAndIrrelevant,
    #[serde(rename = "golden_cr")]
    GoldenAndRelevant,
    #[serde(rename = "golden_cc")]
    GoldenAndCounterfactual,
}

impl EvalCondition {
    /// Report column order.
    pub const ALL: [EvalCondition; 4] = [
        EvalCondition::GoldenOnly,
        EvalCondition::GoldenAndIrrelevant,
        EvalCondition::GoldenAndRelevant,
        EvalCondition::GoldenAndCounterfactual,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            EvalCondition::GoldenOnly => "golden_only",
            EvalCondition::GoldenAndIrrelevant => "golden_ci",
            EvalCondition::GoldenAndRelevant => "golden_cr",
            EvalCondition::GoldenAndCounterfactual => "golden_cc",
        }
    }

    /// The augmentation whose prompt this condition evaluates.
    pub fn kind(self) -> NoiseKind {
        match self {
            EvalCondition::GoldenOnly => NoiseKind::Golden,
            EvalCondition::GoldenAndIrrelevant => NoiseKind::Irrelevant,
            EvalCondition::GoldenAndRelevant => NoiseKind::Relevant,
            EvalCondition::GoldenAndCounterfactual => NoiseKind::Counterfactual,
        }
    }
}

impl fmt::Display for EvalCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EvalCondition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        EvalCondition::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown condition {s:?}"))
    }
}

/// Prompt layout and decoding settings shared by every backend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub order_policy: OrderPolicy,
    pub seed: u64,
    pub max_len: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            order_policy: OrderPolicy::NoiseFirst,
            seed: 0,
            max_len: 8,
        }
    }
}

pub enum Backend {
    Builtin(TinyLm),
    /// Predictions produced elsewhere, keyed by (example id, condition).
    FileRoundtrip(HashMap<(String, EvalCondition), String>),
}

impl Backend {
    pub fn from_checkpoint(path: &Path) -> Result<Self> {
        Ok(Backend::Builtin(crate::tinylm::checkpoint::load(path)?))
    }

    pub fn from_predictions(path: &Path) -> Result<Self> {
        let map = read_predictions(path)?
            .into_iter()
            .map(|p| ((p.example_id, p.condition), p.prediction))
            .collect();
        Ok(Backend::FileRoundtrip(map))
    }
}

pub fn condition_prompt(example: &crate::bench::BenchmarkExample, condition: EvalCondition, opts: &EvalOptions) -> String {
    assemble_prompt(example, condition.kind(), opts.order_policy, opts.seed)
}

/// Predictions for every example of `bench` under `condition`, in benchmark order.
pub fn run_condition(
    backend: &Backend,
    bench: &BenchmarkSplit,
    condition: EvalCondition,
    opts: &EvalOptions,
) -> Result<Vec<(String, String)>> {
    match backend {
        Backend::Builtin(model) => bench
            .examples
            .par_iter()
            .map(|ex| {
                let prompt = condition_prompt(ex, condition, opts);
                Ok((ex.id.clone(), model.answer(&prompt, opts.max_len)?))
            })
            .collect(),
        Backend::FileRoundtrip(map) => {
            let mut missing = Vec::new();
            let mut out = Vec::with_capacity(bench.examples.len());
            for ex in &bench.examples {
                match map.get(&(ex.id.clone(), condition)) {
                    Some(p) => out.push((ex.id.clone(), p.clone())),
                    None => missing.push(format!("{}@{}", ex.id, condition)),
                }
            }
            if missing.is_empty() {
                Ok(out)
            } else {
                Err(RaatError::MissingPredictions(missing))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub table: ConditionTable,
    pub scored: Vec<(EvalCondition, ScoredPrediction)>,
}

impl Evaluation {
    pub fn predictions_jsonl(&self) -> String {
        let mut out = String::new();
        for (cond, s) in &self.scored {
            let line = PredictionLine {
                example_id: s.example_id.clone(),
                condition: *cond,
                prediction: s.prediction.clone(),
            };
            out.push_str(&serde_json::to_string(&line).expect("prediction serializes"));
            out.push('\n');
        }
        out
    }

    /// Writes `report.json`, `report.tsv` and `predictions.jsonl` into `dir`.
    pub fn write_reports(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| RaatError::io(dir, e))?;
        let json = serde_json::to_string_pretty(&self.table.to_json()).expect("report serializes") + "\n";
        for (name, body) in [
            ("report.json", json),
            ("report.tsv", self.table.to_tsv()),
            ("predictions.jsonl", self.predictions_jsonl()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| RaatError::io(&path, e))?;
        }
        Ok(())
    }
}

/// Runs and scores each condition, then aggregates into a table. The table
/// requires all four conditions.
pub fn evaluate(
    backend: &Backend,
    bench: &BenchmarkSplit,
    conditions: &[EvalCondition],
    opts: &EvalOptions,
) -> Result<Evaluation> {
    let unique: BTreeSet<_> = conditions.iter().collect();
    if unique.len() != conditions.len() {
        return Err(RaatError::Config("duplicate evaluation condition".into()));
    }
    let golds: HashMap<&str, &[String]> = bench
        .examples
        .iter()
        .map(|e| (e.id.as_str(), e.answers.as_slice()))
        .collect();
    let mut scored = Vec::new();
    for &cond in conditions {
        for (id, pred) in run_condition(backend, bench, cond, opts)? {
            scored.push((cond, ScoredPrediction::score(&id, &pred, golds[id.as_str()])?));
        }
    }
    Ok(Evaluation {
        table: aggregate(&scored)?,
        scored,
    })
}
