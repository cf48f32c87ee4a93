//! Fully synthetic QA-with-retrieval data for end-to-end runs.
//!
//! Query `i` asks "what is linked to q<i>" and is answered by one entity
//! `a<j>`. Its ten passages: two golden statements in different phrasings,
//! two relevant-noise candidates mentioning the query with a `b<k>` distractor,
//! and six fillers about other queries. Golden and relevant candidates share
//! ranks 1-4 in shuffled order; fillers take ranks 5-10.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DatasetTag, Passage, QueryRecord};
use crate::error::{RaatError, Result};
use crate::metrics::contains_answer;

const RELEVANT_CANDIDATES: usize = 2;
const FILLERS: usize = 6;

pub fn generate_synthetic(n_queries: usize, n_entities: usize, seed: u64) -> Vec<QueryRecord> {
    assert!(n_entities >= 4, "n_entities must be >= 4");
    assert!(n_queries >= 1, "n_queries must be >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Filler subjects are drawn from at least two query ids so that a single
    // query still has "other" queries to talk about.
    let subject_space = n_queries.max(2);

    (0..n_queries)
        .map(|i| {
            let id = format!("synth-{i}");
            let answer = format!("a{}", rng.gen_range(0..n_entities));
            let mut top = vec![
                format!("q{i} is linked to {answer}"),
                format!("{answer} is the link of q{i}"),
            ];
            for _ in 0..RELEVANT_CANDIDATES {
                top.push(format!("q{i} also mentions b{}", rng.gen_range(0..n_entities)));
            }
            top.shuffle(&mut rng);
            let fillers = (0..FILLERS).map(|_| {
                let mut m = rng.gen_range(0..subject_space - 1);
                if m >= i {
                    m += 1;
                }
                format!("q{m} was seen with b{}", rng.gen_range(0..n_entities))
            });
            let answers = vec![answer];
            let passages = top
                .into_iter()
                .chain(fillers)
                .enumerate()
                .map(|(r, text)| Passage {
                    has_answer: contains_answer(&text, &answers),
                    text,
                    rank: r as u32 + 1,
                    source_query_id: id.clone(),
                })
                .collect();
            QueryRecord {
                question: format!("what is linked to q{i}"),
                id,
                answers,
                passages,
                dataset: DatasetTag::Synth,
            }
        })
        .collect()
}

/// Writes records in the retrieval input format, one JSON object per line.
pub fn write_records_jsonl(records: &[QueryRecord], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        let passages: Vec<_> = r
            .passages
            .iter()
            .map(|p| serde_json::json!({"text": p.text, "rank": p.rank, "has_answer": p.has_answer}))
            .collect();
        let line = serde_json::json!({
            "id": r.id,
            "question": r.question,
            "answers": r.answers,
            "dataset": r.dataset,
            "passages": passages,
        });
        serde_json::to_writer(&mut buf, &line).map_err(|e| RaatError::Data(e.to_string()))?;
        buf.push(b'\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| RaatError::io(path, e))?;
    f.write_all(&buf).map_err(|e| RaatError::io(path, e))
}
