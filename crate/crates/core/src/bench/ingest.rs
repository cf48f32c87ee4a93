use std::collections::HashSet;
use std::path::Path;

use serde::Deserialize;

use super::{DatasetTag, Passage, QueryRecord};
use crate::error::{RaatError, Result};
use crate::metrics::{contains_answer, normalize_answer};

const REQUIRED_FIELDS: [&str; 5] = ["id", "question", "answers", "dataset", "passages"];

#[derive(Deserialize)]
struct RawPassage {
    text: String,
    rank: u32,
    // Advisory only; recomputed from the answers.
    #[serde(default)]
    #[allow(dead_code)]
    has_answer: Option<bool>,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    question: String,
    answers: Vec<String>,
    dataset: DatasetTag,
    passages: Vec<RawPassage>,
}

/// Parses one input line (1-based `line` is used only for error messages).
pub fn parse_record_line(text: &str, line: usize) -> Result<QueryRecord> {
    let parse_err = |message: String| RaatError::Parse { line, message };
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| parse_err("expected a JSON object".into()))?;
    for field in REQUIRED_FIELDS {
        if !obj.contains_key(field) {
            return Err(parse_err(format!("missing field {field}")));
        }
    }
    let raw: RawRecord = serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?;

    if raw.answers.is_empty() {
        return Err(parse_err("answers must be non-empty".into()));
    }
    if let Some(a) = raw.answers.iter().find(|a| normalize_answer(a).is_empty()) {
        return Err(parse_err(format!("answer {a:?} is empty after normalization")));
    }
    let mut ranks = HashSet::new();
    for p in &raw.passages {
        if p.rank == 0 {
            return Err(parse_err("passage rank must be >= 1".into()));
        }
        if !ranks.insert(p.rank) {
            return Err(parse_err(format!("duplicate passage rank {}", p.rank)));
        }
    }

    let mut passages: Vec<Passage> = raw
        .passages
        .into_iter()
        .map(|p| Passage {
            has_answer: contains_answer(&p.text, &raw.answers),
            text: p.text,
            rank: p.rank,
            source_query_id: raw.id.clone(),
        })
        .collect();
    passages.sort_by_key(|p| p.rank);

    Ok(QueryRecord {
        id: raw.id,
        question: raw.question,
        answers: raw.answers,
        passages,
        dataset: raw.dataset,
    })
}

/// Parses JSONL retrieval records. Blank lines are skipped.
pub fn ingest_retrieval_str(content: &str) -> Result<Vec<QueryRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_record_line(line, i + 1)?;
        if !seen.insert(record.id.clone()) {
            return Err(RaatError::DuplicateId(record.id));
        }
        out.push(record);
    }
    Ok(out)
}

pub fn ingest_retrieval_file(path: &Path) -> Result<Vec<QueryRecord>> {
    let content = std::fs::read_to_string(path).map_err(|e| RaatError::io(path, e))?;
    ingest_retrieval_str(&content)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, flags: &str) -> String {
        format!(
            r#"{{"id":"{id}","question":"capital of france","answers":["Paris"],"dataset":"NQ","passages":[{{"text":"Lyon is big","rank":2,"has_answer":true}},{{"text":"Paris is the capital","rank":1,"has_answer":{flags}}}]}}"#
        )
    }

    #[test]
    fn single_record_is_rank_sorted_and_flags_recomputed() {
        let recs = ingest_retrieval_str(&line("q1", "false")).unwrap();
        assert_eq!(recs.len(), 1);
        let ranks: Vec<u32> = recs[0].passages.iter().map(|p| p.rank).collect();
        assert_eq!(ranks, vec![1, 2]);
        // stored false but text contains the alias
        assert!(recs[0].passages[0].has_answer);
        // stored true but text lacks the alias
        assert!(!recs[0].passages[1].has_answer);
        assert_eq!(recs[0].passages[0].source_query_id, "q1");
    }

    #[test]
    fn missing_field_names_line() {
        let mut content = String::new();
        for i in 0..6 {
            content.push_str(&line(&format!("q{i}"), "true"));
            content.push('\n');
        }
        content.push_str(r#"{"id":"q9","question":"x","dataset":"NQ","passages":[]}"#);
        let err = ingest_retrieval_str(&content).unwrap_err();
        assert_eq!(err.to_string(), "line 7: missing field answers");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let content = format!("{}\n{}\n", line("q1", "true"), line("q1", "true"));
        assert!(matches!(ingest_retrieval_str(&content), Err(RaatError::DuplicateId(id)) if id == "q1"));
    }

    #[test]
    fn malformed_json_and_bad_values() {
        assert!(matches!(ingest_retrieval_str("{not json"), Err(RaatError::Parse { line: 1, .. })));
        let empty_answers = r#"{"id":"a","question":"x","answers":[],"dataset":"NQ","passages":[]}"#;
        assert!(ingest_retrieval_str(empty_answers).is_err());
        let article_answer = r#"{"id":"a","question":"x","answers":["The"],"dataset":"NQ","passages":[]}"#;
        assert!(ingest_retrieval_str(article_answer).is_err());
        let dup_rank = r#"{"id":"a","question":"x","answers":["y"],"dataset":"NQ","passages":[{"text":"a","rank":1},{"text":"b","rank":1}]}"#;
        assert!(ingest_retrieval_str(dup_rank).is_err());
        let bad_tag = r#"{"id":"a","question":"x","answers":["y"],"dataset":"SQuAD","passages":[]}"#;
        assert!(ingest_retrieval_str(bad_tag).is_err());
    }
}
