use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Passage, QueryRecord};
use crate::error::{RaatError, Result};
use crate::hash::derive_seed;
use crate::metrics::{contains_answer, normalize_answer};

/// Keeps records with at least two answer-bearing passages, in input order.
pub fn filter_queries(records: Vec<QueryRecord>) -> Vec<QueryRecord> {
    records.into_iter().filter(|r| r.golden_count() >= 2).collect()
}

pub fn select_golden(record: &QueryRecord) -> Result<&Passage> {
    record
        .passages
        .iter()
        .filter(|p| p.has_answer)
        .min_by_key(|p| p.rank)
        .ok_or_else(|| RaatError::Data(format!("{}: no golden passage", record.id)))
}

/// Lowest-rank passage without the answer; retriever rank is the pertinence proxy.
pub fn select_relevant_noise(record: &QueryRecord) -> Result<&Passage> {
    record
        .passages
        .iter()
        .filter(|p| !p.has_answer)
        .min_by_key(|p| p.rank)
        .ok_or_else(|| RaatError::Data(format!("{}: no relevant-noise candidate", record.id)))
}

/// Uniform draw over the union of every other query's passages.
pub fn select_irrelevant_noise<'a>(
    record: &QueryRecord,
    corpus: &'a [QueryRecord],
    master_seed: u64,
) -> Result<&'a Passage> {
    let others = || corpus.iter().filter(|r| r.id != record.id);
    let total: usize = others().map(|r| r.passages.len()).sum();
    if total == 0 {
        return Err(RaatError::Data(format!(
            "{}: corpus has no passages from other queries",
            record.id
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master_seed, &record.id, "irrelevant"));
    let mut idx = rng.gen_range(0..total);
    for r in others() {
        if idx < r.passages.len() {
            return Ok(&r.passages[idx]);
        }
        idx -= r.passages.len();
    }
    unreachable!("index within total passage count")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterfactual {
    pub passage: Passage,
    pub entity: String,
}

fn chars_eq_ci(a: char, b: char) -> bool {
    a == b || a.to_lowercase().eq(b.to_lowercase())
}

/// Replaces every case-insensitive, whole-word occurrence of any alias in
/// `text` with `substitute`. Longer aliases are tried first at each position.
/// Returns the new text and the number of replacements.
pub fn replace_aliases<S: AsRef<str>>(text: &str, aliases: &[S], substitute: &str) -> (String, usize) {
    let mut patterns: Vec<Vec<char>> = aliases
        .iter()
        .map(|a| a.as_ref().trim().chars().collect::<Vec<_>>())
        .filter(|p| !p.is_empty())
        .collect();
    patterns.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    patterns.dedup();

    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut count = 0;
    let mut i = 0;
    while i < chars.len() {
        let at_boundary = i == 0 || !chars[i - 1].is_alphanumeric();
        let matched = at_boundary
            .then(|| {
                patterns.iter().find(|p| {
                    let end = i + p.len();
                    end <= chars.len()
                        && chars[i..end].iter().zip(p.iter()).all(|(&a, &b)| chars_eq_ci(a, b))
                        && (end == chars.len() || !chars[end].is_alphanumeric())
                })
            })
            .flatten();
        match matched {
            Some(p) => {
                out.push_str(substitute);
                count += 1;
                i += p.len();
            }
            None => {
                out.push(chars[i]);
                i += 1;
            }
        }
    }
    (out, count)
}

/// Builds counterfactual noise: one of the two best-ranked golden passages with
/// every gold alias swapped for a wrong entity from `entity_pool`.
pub fn make_counterfactual<S: AsRef<str>>(
    record: &QueryRecord,
    entity_pool: &[S],
    master_seed: u64,
) -> Result<Counterfactual> {
    let golden: Vec<&Passage> = record.passages.iter().filter(|p| p.has_answer).take(2).collect();
    if golden.len() < 2 {
        return Err(RaatError::Data(format!(
            "{}: counterfactual needs two golden passages, found {}",
            record.id,
            golden.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master_seed, &record.id, "counterfactual"));
    let source = golden[rng.gen_range(0..golden.len())];

    let mut candidates: Vec<&str> = Vec::new();
    for e in entity_pool {
        let e = e.as_ref().trim();
        if !normalize_answer(e).is_empty() && !contains_answer(e, &record.answers) && !candidates.contains(&e) {
            candidates.push(e);
        }
    }
    if candidates.is_empty() {
        return Err(RaatError::Data(format!(
            "{}: entity pool has no non-alias substitute",
            record.id
        )));
    }
    candidates.shuffle(&mut rng);

    // Article-stripped forms also match, so "Beatles" is replaced for alias "The Beatles".
    let mut patterns: Vec<String> = record.answers.clone();
    patterns.extend(record.answers.iter().map(|a| normalize_answer(a)));

    for entity in candidates {
        let (text, n) = replace_aliases(&source.text, &patterns, entity);
        if n == 0 {
            return Err(RaatError::Data(format!("{}: golden passage lacks answer span", record.id)));
        }
        if !contains_answer(&text, &record.answers) {
            return Ok(Counterfactual {
                passage: Passage {
                    text,
                    rank: source.rank,
                    has_answer: false,
                    source_query_id: record.id.clone(),
                },
                entity: entity.to_owned(),
            });
        }
    }
    Err(RaatError::Data(format!(
        "{}: every substitute leaves a gold alias in the counterfactual",
        record.id
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::DatasetTag;

    fn record(id: &str, answers: &[&str], passages: &[(&str, bool)]) -> QueryRecord {
        QueryRecord {
            id: id.into(),
            question: format!("question {id}"),
            answers: answers.iter().map(|s| s.to_string()).collect(),
            passages: passages
                .iter()
                .enumerate()
                .map(|(i, (t, h))| Passage {
                    text: t.to_string(),
                    rank: i as u32 + 1,
                    has_answer: *h,
                    source_query_id: id.into(),
                })
                .collect(),
            dataset: DatasetTag::Synth,
        }
    }

    fn flags(id: &str, f: &[bool]) -> QueryRecord {
        let texts: Vec<String> = (0..f.len()).map(|i| format!("{id} passage {i}")).collect();
        let ps: Vec<(&str, bool)> = texts.iter().map(String::as_str).zip(f.iter().copied()).collect();
        record(id, &["x"], &ps)
    }

    #[test]
    fn filter_threshold() {
        let recs = vec![flags("a", &[true, true]), flags("b", &[true, false]), flags("c", &[false, true, true])];
        let kept = filter_queries(recs);
        let ids: Vec<_> = kept.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, vec!["a", "c"]);
        assert!(filter_queries(vec![]).is_empty());
        assert_eq!(filter_queries(kept.clone()), kept);
    }

    #[test]
    fn golden_and_relevant_selection() {
        assert_eq!(select_golden(&flags("a", &[false, true, true])).unwrap().rank, 2);
        assert_eq!(select_golden(&flags("a", &[true, true])).unwrap().rank, 1);
        assert!(select_golden(&flags("a", &[false, false])).is_err());

        assert_eq!(select_relevant_noise(&flags("a", &[true, false, false])).unwrap().rank, 2);
        assert_eq!(select_relevant_noise(&flags("a", &[false, true])).unwrap().rank, 1);
        let err = select_relevant_noise(&flags("a", &[true, true])).unwrap_err();
        assert!(err.to_string().contains("no relevant-noise candidate"));
    }

    #[test]
    fn irrelevant_noise_comes_from_other_queries() {
        let corpus = vec![flags("a", &[true, false]), flags("b", &[true, true, false])];
        let p = select_irrelevant_noise(&corpus[0], &corpus, 1).unwrap();
        assert_eq!(p.source_query_id, "b");
        let again = select_irrelevant_noise(&corpus[0], &corpus, 1).unwrap();
        assert_eq!(p, again);
        assert!(select_irrelevant_noise(&corpus[0], &corpus[..1], 1).is_err());
    }

    #[test]
    fn irrelevant_noise_draw_log() {
        let corpus = vec![flags("a", &[true; 3]), flags("b", &[false; 4]), flags("c", &[true; 5])];
        let mut sources = std::collections::BTreeSet::new();
        for seed in 0..100u64 {
            let p = select_irrelevant_noise(&corpus[1], &corpus, seed).unwrap();
            assert_ne!(p.source_query_id, "b");
            sources.insert(p.source_query_id.clone());
        }
        assert_eq!(sources.len(), 2);
    }

    #[test]
    fn alias_replacement() {
        assert_eq!(replace_aliases("Paris is the capital", &["Paris"], "Lyon"), ("Lyon is the capital".into(), 1));
        assert_eq!(
            replace_aliases("paris, PARIS and Parisian", &["Paris"], "Lyon"),
            ("Lyon, Lyon and Parisian".into(), 2)
        );
        // longer alias wins
        assert_eq!(
            replace_aliases("New York City is big", &["New York", "New York City"], "Boston"),
            ("Boston is big".into(), 1)
        );
        assert_eq!(replace_aliases("nothing here", &["Paris"], "Lyon").1, 0);
    }

    #[test]
    fn counterfactual_swaps_all_occurrences() {
        let r = record(
            "q",
            &["Paris"],
            &[("Paris is the capital", true), ("In Paris, paris rules", true), ("France", false)],
        );
        let pool = ["Paris", "Lyon"];
        for seed in 0..10 {
            let cf = make_counterfactual(&r, &pool, seed).unwrap();
            assert_eq!(cf.entity, "Lyon");
            assert!(!cf.passage.has_answer);
            assert!(!contains_answer(&cf.passage.text, &r.answers));
            assert!(cf.passage.text == "Lyon is the capital" || cf.passage.text == "In Lyon, Lyon rules");
        }
    }

    #[test]
    fn counterfactual_errors() {
        let r = record("q", &["Paris"], &[("Paris a", true), ("Paris b", true)]);
        assert!(make_counterfactual(&r, &["paris", "PARIS!"], 0).is_err());
        let corrupted = record("q", &["Paris"], &[("no span", true), ("none", true)]);
        let err = make_counterfactual(&corrupted, &["Lyon"], 0).unwrap_err();
        assert!(err.to_string().contains("golden passage lacks answer span"));
    }

    #[test]
    fn counterfactual_handles_article_stripped_alias() {
        let r = record("q", &["The Beatles"], &[("Beatles rock", true), ("the beatles sing", true)]);
        for seed in 0..5 {
            let cf = make_counterfactual(&r, &["Queen"], seed).unwrap();
            assert!(!contains_answer(&cf.passage.text, &r.answers), "{}", cf.passage.text);
        }
    }
}
