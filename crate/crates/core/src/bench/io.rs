use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BenchmarkExample, BenchmarkSet, BenchmarkSplit, DatasetTag, Passage, Provenance, SplitName};
use crate::error::{RaatError, Result};
use crate::metrics::contains_answer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseTexts {
    pub relevant: String,
    pub irrelevant: String,
    pub counterfactual: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileProvenance {
    pub seed: u64,
    pub irrelevant_source: String,
    pub counterfactual_entity: String,
    pub golden_rank: u32,
    pub relevant_rank: u32,
    pub irrelevant_rank: u32,
    pub counterfactual_rank: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedText {
    pub text: String,
    pub rank: u32,
}

/// One line of a benchmark split file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleRecord {
    pub id: String,
    pub question: String,
    pub answers: Vec<String>,
    pub golden: String,
    pub noise: NoiseTexts,
    pub provenance: FileProvenance,
    pub dataset: DatasetTag,
    pub retrieved: Vec<RankedText>,
}

impl From<&BenchmarkExample> for ExampleRecord {
    fn from(ex: &BenchmarkExample) -> Self {
        ExampleRecord {
            id: ex.id.clone(),
            question: ex.question.clone(),
            answers: ex.answers.clone(),
            golden: ex.golden.text.clone(),
            noise: NoiseTexts {
                relevant: ex.relevant_noise.text.clone(),
                irrelevant: ex.irrelevant_noise.text.clone(),
                counterfactual: ex.counterfactual_noise.text.clone(),
            },
            provenance: FileProvenance {
                seed: ex.provenance.seed,
                irrelevant_source: ex.provenance.irrelevant_source.clone(),
                counterfactual_entity: ex.provenance.counterfactual_entity.clone(),
                golden_rank: ex.golden.rank,
                relevant_rank: ex.relevant_noise.rank,
                irrelevant_rank: ex.irrelevant_noise.rank,
                counterfactual_rank: ex.counterfactual_noise.rank,
            },
            dataset: ex.dataset,
            retrieved: ex
                .retrieved
                .iter()
                .map(|p| RankedText {
                    text: p.text.clone(),
                    rank: p.rank,
                })
                .collect(),
        }
    }
}

impl From<ExampleRecord> for BenchmarkExample {
    fn from(r: ExampleRecord) -> Self {
        let passage = |text: String, rank: u32, source: &str| Passage {
            has_answer: contains_answer(&text, &r.answers),
            text,
            rank,
            source_query_id: source.to_owned(),
        };
        let p = &r.provenance;
        BenchmarkExample {
            golden: passage(r.golden.clone(), p.golden_rank, &r.id),
            relevant_noise: passage(r.noise.relevant.clone(), p.relevant_rank, &r.id),
            irrelevant_noise: passage(r.noise.irrelevant.clone(), p.irrelevant_rank, &p.irrelevant_source),
            counterfactual_noise: passage(r.noise.counterfactual.clone(), p.counterfactual_rank, &r.id),
            retrieved: r
                .retrieved
                .iter()
                .map(|t| passage(t.text.clone(), t.rank, &r.id))
                .collect(),
            provenance: Provenance {
                seed: p.seed,
                irrelevant_source: p.irrelevant_source.clone(),
                counterfactual_entity: p.counterfactual_entity.clone(),
            },
            id: r.id,
            question: r.question,
            answers: r.answers,
            dataset: r.dataset,
        }
    }
}

pub fn split_to_jsonl(split: &BenchmarkSplit) -> String {
    let mut out = String::new();
    for ex in &split.examples {
        out.push_str(&serde_json::to_string(&ExampleRecord::from(ex)).expect("benchmark record serializes"));
        out.push('\n');
    }
    out
}

pub fn read_split(path: &Path, name: SplitName) -> Result<BenchmarkSplit> {
    let content = std::fs::read_to_string(path).map_err(|e| RaatError::io(path, e))?;
    let mut examples = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ExampleRecord = serde_json::from_str(line).map_err(|e| RaatError::Parse {
            line: i + 1,
            message: format!("{}: {e}", path.display()),
        })?;
        examples.push(BenchmarkExample::from(rec));
    }
    let master_seed = examples.first().map_or(0, |e| e.provenance.seed);
    Ok(BenchmarkSplit {
        name,
        examples,
        master_seed,
    })
}

/// Writes `train.jsonl`, `validation.jsonl` and `test.jsonl` under `dir`.
pub fn write_benchmark_dir(set: &BenchmarkSet, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| RaatError::io(dir, e))?;
    for split in set.splits() {
        let path = dir.join(format!("{}.jsonl", split.name.name()));
        std::fs::write(&path, split_to_jsonl(split)).map_err(|e| RaatError::io(&path, e))?;
    }
    Ok(())
}

pub fn load_benchmark_dir(dir: &Path) -> Result<BenchmarkSet> {
    let load = |name: SplitName| read_split(&dir.join(format!("{}.jsonl", name.name())), name);
    Ok(BenchmarkSet {
        train: load(SplitName::Train)?,
        validation: load(SplitName::Validation)?,
        test: load(SplitName::Test)?,
    })
}
