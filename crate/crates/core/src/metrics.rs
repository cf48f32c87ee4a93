//! Answer normalization, exact match and token-level F1.
//!
//! Normalization follows the SQuAD evaluation script: lowercase, strip ASCII
//! punctuation, drop the articles `a`, `an`, `the`, and collapse whitespace.
//! The punctuation set is exactly the 32 ASCII characters
//! ``!"#$%&'()*+,-./:;<=>?@[\]^_`{|}~``.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{RaatError, Result};
use crate::eval::EvalCondition;

pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let stripped: String = lowered
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    stripped
        .split_whitespace()
        .filter(|tok| !matches!(*tok, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn normalized_tokens(text: &str) -> Vec<String> {
    normalize_answer(text)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// True iff the normalized token sequence of some alias occurs contiguously in
/// the normalized token sequence of `text`. Aliases that normalize to nothing
/// never match.
pub fn contains_answer<S: AsRef<str>>(text: &str, aliases: &[S]) -> bool {
    let hay = normalized_tokens(text);
    aliases.iter().any(|alias| {
        let needle = normalized_tokens(alias.as_ref());
        !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle.as_slice())
    })
}

fn require_golds<S: AsRef<str>>(golds: &[S]) -> Result<()> {
    if golds.is_empty() {
        return Err(RaatError::Data("gold answer list is empty".into()));
    }
    Ok(())
}

pub fn exact_match<S: AsRef<str>>(prediction: &str, golds: &[S]) -> Result<u8> {
    require_golds(golds)?;
    let pred = normalize_answer(prediction);
    Ok(golds
        .iter()
        .any(|g| normalize_answer(g.as_ref()) == pred)
        .into())
}

fn f1_single(pred: &[String], gold: &[String]) -> f64 {
    if pred.is_empty() || gold.is_empty() {
        return if pred.is_empty() && gold.is_empty() { 1.0 } else { 0.0 };
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for tok in gold {
        *counts.entry(tok.as_str()).or_default() += 1;
    }
    let mut overlap = 0usize;
    for tok in pred {
        if let Some(c) = counts.get_mut(tok.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred.len() as f64;
    let recall = overlap as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

pub fn f1_score<S: AsRef<str>>(prediction: &str, golds: &[S]) -> Result<f64> {
    require_golds(golds)?;
    let pred = normalized_tokens(prediction);
    Ok(golds
        .iter()
        .map(|g| f1_single(&pred, &normalized_tokens(g.as_ref())))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub example_id: String,
    pub prediction: String,
    pub em: u8,
    pub f1: f64,
}

impl ScoredPrediction {
    pub fn score<S: AsRef<str>>(example_id: &str, prediction: &str, golds: &[S]) -> Result<Self> {
        Ok(ScoredPrediction {
            example_id: example_id.to_owned(),
            prediction: prediction.to_owned(),
            em: exact_match(prediction, golds)?,
            f1: f1_score(prediction, golds)?,
        })
    }
}

/// Mean F1 and EM, both in percent and unrounded.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CellScore {
    pub f1: f64,
    pub em: f64,
}

impl CellScore {
    pub fn rounded(&self) -> CellScore {
        CellScore {
            f1: round_half_up_2(self.f1),
            em: round_half_up_2(self.em),
        }
    }
}

pub fn round_half_up_2(x: f64) -> f64 {
    (x * 100.0 + 0.5).floor() / 100.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionTable {
    /// Indexed in [`EvalCondition::ALL`] order.
    pub cells: [CellScore; 4],
    pub avg: CellScore,
}

impl ConditionTable {
    pub fn cell(&self, condition: EvalCondition) -> CellScore {
        self.cells[condition.index()]
    }

    /// JSON report with display-rounded values.
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for cond in EvalCondition::ALL {
            let c = self.cell(cond).rounded();
            map.insert(cond.name().into(), serde_json::json!({"f1": c.f1, "em": c.em}));
        }
        let a = self.avg.rounded();
        map.insert("avg".into(), serde_json::json!({"f1": a.f1, "em": a.em}));
        serde_json::Value::Object(map)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("condition\tF1\tEM\n");
        for cond in EvalCondition::ALL {
            let c = self.cell(cond);
            out.push_str(&format!("{}\t{:.2}\t{:.2}\n", cond.name(), round_half_up_2(c.f1), round_half_up_2(c.em)));
        }
        out.push_str(&format!(
            "avg\t{:.2}\t{:.2}\n",
            round_half_up_2(self.avg.f1),
            round_half_up_2(self.avg.em)
        ));
        out
    }
}

pub fn aggregate(scored: &[(EvalCondition, ScoredPrediction)]) -> Result<ConditionTable> {
    let mut sums = [(0.0f64, 0.0f64, 0usize); 4];
    for (cond, s) in scored {
        let slot = &mut sums[cond.index()];
        slot.0 += s.f1;
        slot.1 += f64::from(s.em);
        slot.2 += 1;
    }
    let mut cells = [CellScore::default(); 4];
    for cond in EvalCondition::ALL {
        let (f1, em, n) = sums[cond.index()];
        if n == 0 {
            return Err(RaatError::Data(format!("condition {} has no scored items", cond.name())));
        }
        cells[cond.index()] = CellScore {
            f1: 100.0 * f1 / n as f64,
            em: 100.0 * em / n as f64,
        };
    }
    let avg = CellScore {
        f1: cells.iter().map(|c| c.f1).sum::<f64>() / 4.0,
        em: cells.iter().map(|c| c.em).sum::<f64>() / 4.0,
    };
    Ok(ConditionTable { cells, avg })
}
