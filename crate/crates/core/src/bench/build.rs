use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::select::{make_counterfactual, select_golden, select_irrelevant_noise, select_relevant_noise};
use super::{filter_queries, BenchmarkExample, BenchmarkSplit, DatasetTag, Provenance, QueryRecord, SplitName};
use crate::error::{RaatError, Result};
use crate::hash::derive_seed;
use crate::metrics::contains_answer;

/// Per-dataset sample counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        SplitSizes {
            train: 1500,
            validation: 300,
            test: 1000,
        }
    }
}

/// Candidate pools. Train and validation are drawn from `train_pool`; test is
/// drawn from `test_pool` when given, otherwise from what remains of
/// `train_pool` after train and validation.
#[derive(Debug, Clone, Default)]
pub struct BenchmarkSources {
    pub train_pool: Vec<QueryRecord>,
    pub test_pool: Option<Vec<QueryRecord>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkSet {
    pub train: BenchmarkSplit,
    pub validation: BenchmarkSplit,
    pub test: BenchmarkSplit,
}

impl BenchmarkSet {
    pub fn splits(&self) -> [&BenchmarkSplit; 3] {
        [&self.train, &self.validation, &self.test]
    }
}

// Filtered records that can also supply relevant noise.
fn eligible(records: Vec<QueryRecord>) -> Vec<QueryRecord> {
    filter_queries(records)
        .into_iter()
        .filter(|r| r.passages.iter().any(|p| !p.has_answer))
        .collect()
}

fn by_tag(records: Vec<QueryRecord>) -> BTreeMap<DatasetTag, Vec<QueryRecord>> {
    let mut map: BTreeMap<DatasetTag, Vec<QueryRecord>> = BTreeMap::new();
    for r in records {
        map.entry(r.dataset).or_default().push(r);
    }
    map
}

fn shuffled(mut pool: Vec<QueryRecord>, master_seed: u64, tag: DatasetTag, which: &str) -> Vec<QueryRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master_seed, tag.name(), which));
    pool.shuffle(&mut rng);
    pool
}

fn take(
    pool: &mut std::vec::IntoIter<QueryRecord>,
    n: usize,
    tag: DatasetTag,
    split: SplitName,
) -> Result<Vec<QueryRecord>> {
    let available = pool.len();
    if n > available {
        return Err(RaatError::Shortfall {
            tag: tag.name().into(),
            split: split.name().into(),
            requested: n,
            available,
        });
    }
    Ok(pool.by_ref().take(n).collect())
}

fn expand_split(name: SplitName, records: Vec<QueryRecord>, master_seed: u64) -> Result<BenchmarkSplit> {
    let mut entity_pools: BTreeMap<DatasetTag, Vec<String>> = BTreeMap::new();
    for r in &records {
        let pool = entity_pools.entry(r.dataset).or_default();
        for a in &r.answers {
            if !pool.contains(a) {
                pool.push(a.clone());
            }
        }
    }
    let examples = records
        .par_iter()
        .map(|r| {
            let golden = select_golden(r)?.clone();
            let relevant = select_relevant_noise(r)?.clone();
            let mut irrelevant = select_irrelevant_noise(r, &records, master_seed)?.clone();
            irrelevant.has_answer = contains_answer(&irrelevant.text, &r.answers);
            let cf = make_counterfactual(r, &entity_pools[&r.dataset], master_seed)?;
            Ok(BenchmarkExample {
                id: r.id.clone(),
                question: r.question.clone(),
                answers: r.answers.clone(),
                dataset: r.dataset,
                provenance: Provenance {
                    seed: master_seed,
                    irrelevant_source: irrelevant.source_query_id.clone(),
                    counterfactual_entity: cf.entity,
                },
                golden,
                relevant_noise: relevant,
                irrelevant_noise: irrelevant,
                counterfactual_noise: cf.passage,
                retrieved: r.passages.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchmarkSplit {
        name,
        examples,
        master_seed,
    })
}

/// Samples train/validation/test per dataset tag without replacement and
/// expands each sampled query into a benchmark example.
pub fn build_benchmark(sources: BenchmarkSources, sizes: SplitSizes, master_seed: u64) -> Result<BenchmarkSet> {
    let train_pool = by_tag(eligible(sources.train_pool));
    let mut test_pool = sources.test_pool.map(|p| by_tag(eligible(p)));

    let mut tags: Vec<DatasetTag> = train_pool.keys().copied().collect();
    if let Some(tp) = &test_pool {
        tags.extend(tp.keys().copied());
        tags.sort();
        tags.dedup();
    }

    let mut train = Vec::new();
    let mut validation = Vec::new();
    let mut test = Vec::new();
    for tag in tags {
        let pool = train_pool.get(&tag).cloned().unwrap_or_default();
        let mut it = shuffled(pool, master_seed, tag, "sample-train").into_iter();
        train.extend(take(&mut it, sizes.train, tag, SplitName::Train)?);
        validation.extend(take(&mut it, sizes.validation, tag, SplitName::Validation)?);
        match test_pool.as_mut() {
            Some(tp) => {
                let pool = tp.remove(&tag).unwrap_or_default();
                let mut it = shuffled(pool, master_seed, tag, "sample-test").into_iter();
                test.extend(take(&mut it, sizes.test, tag, SplitName::Test)?);
            }
            None => test.extend(take(&mut it, sizes.test, tag, SplitName::Test)?),
        }
    }

    let mut seen = HashSet::new();
    for r in train.iter().chain(&validation).chain(&test) {
        if !seen.insert(r.id.as_str()) {
            return Err(RaatError::Data(format!("query id {:?} appears in more than one split", r.id)));
        }
    }

    Ok(BenchmarkSet {
        train: expand_split(SplitName::Train, train, master_seed)?,
        validation: expand_split(SplitName::Validation, validation, master_seed)?,
        test: expand_split(SplitName::Test, test, master_seed)?,
    })
}
