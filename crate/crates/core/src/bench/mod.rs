//! Benchmark construction: ingestion of retrieval results, query filtering,
//! and manufacture of the golden context plus three kinds of retrieval noise.

mod build;
mod ingest;
mod io;
mod select;
mod synth;

use std::cell::Cell;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use build::{build_benchmark, BenchmarkSet, BenchmarkSources, SplitSizes};
pub use ingest::{ingest_retrieval_file, ingest_retrieval_str, parse_record_line};
pub use io::{load_benchmark_dir, read_split, split_to_jsonl, write_benchmark_dir, ExampleRecord};
pub use select::{
    filter_queries, make_counterfactual, replace_aliases, select_golden, select_irrelevant_noise,
    select_relevant_noise, Counterfactual,
};
pub use synth::{generate_synthetic, write_records_jsonl};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub text: String,
    pub rank: u32,
    pub has_answer: bool,
    pub source_query_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DatasetTag {
    #[serde(rename = "NQ")]
    Nq,
    TriviaQA,
    #[serde(rename = "WebQ")]
    WebQ,
    #[serde(rename = "SYNTH")]
    Synth,
}

impl DatasetTag {
    pub fn name(self) -> &'static str {
        match self {
            DatasetTag::Nq => "NQ",
            DatasetTag::TriviaQA => "TriviaQA",
            DatasetTag::WebQ => "WebQ",
            DatasetTag::Synth => "SYNTH",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryRecord {
    pub id: String,
    pub question: String,
    pub answers: Vec<String>,
    /// Sorted by rank ascending.
    pub passages: Vec<Passage>,
    pub dataset: DatasetTag,
}

impl QueryRecord {
    pub fn golden_count(&self) -> usize {
        self.passages.iter().filter(|p| p.has_answer).count()
    }
}

/// Retrieval-noise taxonomy. Labels 1..=4 are frozen and serialized as integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum NoiseKind {
    Golden = 1,
    Relevant = 2,
    Irrelevant = 3,
    Counterfactual = 4,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] = [
        NoiseKind::Golden,
        NoiseKind::Relevant,
        NoiseKind::Irrelevant,
        NoiseKind::Counterfactual,
    ];

    pub fn label(self) -> u8 {
        self as u8
    }

    /// Zero-based position, `label - 1`.
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_index(i: usize) -> NoiseKind {
        NoiseKind::ALL[i]
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Golden => "golden",
            NoiseKind::Relevant => "relevant",
            NoiseKind::Irrelevant => "irrelevant",
            NoiseKind::Counterfactual => "counterfactual",
        }
    }
}

impl From<NoiseKind> for u8 {
    fn from(k: NoiseKind) -> u8 {
        k.label()
    }
}

impl TryFrom<u8> for NoiseKind {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1..=4 => Ok(NoiseKind::ALL[usize::from(v) - 1]),
            _ => Err(format!("noise kind label must be 1..=4, got {v}")),
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub irrelevant_source: String,
    pub counterfactual_entity: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkExample {
    pub id: String,
    pub question: String,
    pub answers: Vec<String>,
    pub dataset: DatasetTag,
    pub golden: Passage,
    pub relevant_noise: Passage,
    pub irrelevant_noise: Passage,
    pub counterfactual_noise: Passage,
    /// The query's own ranked retrieval list; baseline regimes that train on
    /// raw retrieval results read it.
    pub retrieved: Vec<Passage>,
    pub provenance: Provenance,
}

thread_local! {
    static NOISE_READS: Cell<usize> = const { Cell::new(0) };
}

/// Number of noise-context reads through [`BenchmarkExample::context`] on the
/// current thread. Only tracked in debug builds; always 0 in release.
pub fn noise_reads() -> usize {
    NOISE_READS.with(Cell::get)
}

pub fn reset_noise_reads() {
    NOISE_READS.with(|c| c.set(0));
}

impl BenchmarkExample {
    /// The context passage that `kind` adds on top of the golden one; for
    /// `Golden` this is the golden passage itself.
    pub fn context(&self, kind: NoiseKind) -> &Passage {
        if cfg!(debug_assertions) && kind != NoiseKind::Golden {
            NOISE_READS.with(|c| c.set(c.get() + 1));
        }
        match kind {
            NoiseKind::Golden => &self.golden,
            NoiseKind::Relevant => &self.relevant_noise,
            NoiseKind::Irrelevant => &self.irrelevant_noise,
            NoiseKind::Counterfactual => &self.counterfactual_noise,
        }
    }

    /// Checks every structural invariant of a benchmark example.
    pub fn check_invariants(&self) -> Result<(), String> {
        use crate::metrics::contains_answer;
        if !self.golden.has_answer || !contains_answer(&self.golden.text, &self.answers) {
            return Err(format!("{}: golden passage lacks the answer", self.id));
        }
        if self.relevant_noise.has_answer || contains_answer(&self.relevant_noise.text, &self.answers) {
            return Err(format!("{}: relevant noise contains the answer", self.id));
        }
        if self.irrelevant_noise.source_query_id == self.id {
            return Err(format!("{}: irrelevant noise drawn from the same query", self.id));
        }
        let cf = &self.counterfactual_noise.text;
        let entity = &self.provenance.counterfactual_entity;
        if !cf.contains(entity.as_str()) {
            return Err(format!("{}: counterfactual lacks substitute {entity:?}", self.id));
        }
        if self.counterfactual_noise.has_answer || contains_answer(cf, &self.answers) {
            return Err(format!("{}: counterfactual still contains a gold alias", self.id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Validation, SplitName::Test];

    pub fn name(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Validation => "validation",
            SplitName::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkSplit {
    pub name: SplitName,
    pub examples: Vec<BenchmarkExample>,
    pub master_seed: u64,
}
