//! Acceptance criteria 1-8. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use raat::bench::{build_benchmark, generate_synthetic, split_to_jsonl, BenchmarkSet, BenchmarkSources};
use raat::eval::{ablation_suite, evaluate, noise_accuracy, Backend, EvalCondition, EvalOptions, ABLATION_MODES};
use raat::metrics::{exact_match, f1_score};
use raat::trainer::{
    gradcheck, init_model, train, LossBreakdown, Mode, RaatWeights, SelectionStats, TrainConfig, GRADCHECK_TOL,
};

use common::{sizes, synth_set};

const DEFAULT_WEIGHTS: RaatWeights = RaatWeights {
    w_reg: 0.1,
    w_ada: 2.0,
    w_cls: 1.0,
};

// Synthetic trend task: 800 train / 200 test, d=32, h=64, identical budget
// for every mode.
const TREND_SEEDS: [u64; 3] = [0, 1, 2];
const TREND_QUERIES: usize = 1000;
const TREND_ENTITIES: usize = 16;
const TREND_EPOCHS: usize = 30;
const TREND_LR: f64 = 0.5;
const TREND_MIN_GAP: f64 = 5.0;
const NOISE_ACC_MIN: f64 = 0.70;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// Objective recomputed directly from its definition.
fn reference_objective(g: [f64; 4], l_cls: f64, w: RaatWeights) -> (f64, f64, f64) {
    let hi = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = g.iter().cloned().fold(f64::INFINITY, f64::min);
    let l_reg = (hi - lo) * (hi - lo);
    let l_ada = hi + w.w_reg * l_reg;
    (l_reg, l_ada, w.w_ada * l_ada + w.w_cls * l_cls)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let g: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..10.0));
        let l_cls = rng.gen_range(0.0..3.0);
        let w = RaatWeights {
            w_reg: rng.gen_range(0.0..1.0),
            w_ada: rng.gen_range(0.0..4.0),
            w_cls: rng.gen_range(0.0..2.0),
        };
        let b = LossBreakdown::compute(g, l_cls, w);
        let (l_reg, l_ada, l_raat) = reference_objective(g, l_cls, w);
        worst = worst
            .max((b.l_reg - l_reg).abs())
            .max((b.l_ada - l_ada).abs())
            .max((b.l_raat - l_raat).abs());
    }
    let elapsed = start.elapsed();

    // Values logged by an actual training run.
    let set = synth_set(60, 8, 1, sizes(50, 0, 10));
    let cfg = TrainConfig::default();
    let mut model = init_model(&set.train, &cfg);
    let log = train(&mut model, &set.train, &cfg).map_err(|e| e.to_string())?.log;
    for r in &log {
        let (l_reg, l_ada, l_raat) = reference_objective(r.gen_losses.as_array().unwrap(), r.l_cls, DEFAULT_WEIGHTS);
        worst = worst
            .max((r.l_reg - l_reg).abs())
            .max((r.l_ada - l_ada).abs())
            .max((r.l_raat - l_raat).abs());
    }

    let worked = LossBreakdown::compute([1.2, 0.8, 2.0, 1.5], 0.0, DEFAULT_WEIGHTS).l_ada;
    check(
        worst <= 1e-12 && (worked - 2.144).abs() <= 1e-12 && elapsed < Duration::from_secs(1),
        format!(
            "max deviation {worst:e} over 1000 tuples + {} logged steps (tol 1e-12); worked l_ada = {worked}; {:.3}s",
            log.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let report = gradcheck(seed, DEFAULT_WEIGHTS).map_err(|e| e.to_string())?;
        worst = worst.max(report.max_rel_err);
    }
    let elapsed = start.elapsed();
    check(
        worst < GRADCHECK_TOL && elapsed < Duration::from_secs(10),
        format!("max relative error {worst:e} over 10 seeds (tol 1e-4); {:.2}s", elapsed.as_secs_f64()),
    )
}

// Reference SQuAD-style scorer, written against the original Python script.
struct Reference {
    punct: Regex,
    articles: Regex,
}

impl Reference {
    fn new() -> Self {
        Reference {
            punct: Regex::new(r##"[!"#$%&'()*+,\-./:;<=>?@\[\\\]^_`{|}~]"##).unwrap(),
            articles: Regex::new(r"\b(a|an|the)\b").unwrap(),
        }
    }

    fn normalize(&self, s: &str) -> String {
        let s = s.to_lowercase();
        let s = self.punct.replace_all(&s, "");
        let s = self.articles.replace_all(&s, " ");
        s.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    fn em(&self, pred: &str, golds: &[&str]) -> u8 {
        golds.iter().any(|g| self.normalize(g) == self.normalize(pred)) as u8
    }

    fn f1_one(&self, pred: &str, gold: &str) -> f64 {
        let p: Vec<String> = self.normalize(pred).split_whitespace().map(String::from).collect();
        let g: Vec<String> = self.normalize(gold).split_whitespace().map(String::from).collect();
        if p.is_empty() || g.is_empty() {
            return (p == g) as u8 as f64;
        }
        let mut pc: HashMap<&str, i64> = HashMap::new();
        let mut gc: HashMap<&str, i64> = HashMap::new();
        p.iter().for_each(|t| *pc.entry(t).or_default() += 1);
        g.iter().for_each(|t| *gc.entry(t).or_default() += 1);
        let same: i64 = pc.iter().map(|(t, c)| (*c).min(*gc.get(t).unwrap_or(&0))).sum();
        if same == 0 {
            return 0.0;
        }
        let precision = same as f64 / p.len() as f64;
        let recall = same as f64 / g.len() as f64;
        2.0 * precision * recall / (precision + recall)
    }

    fn f1(&self, pred: &str, golds: &[&str]) -> f64 {
        golds.iter().map(|g| self.f1_one(pred, g)).fold(0.0, f64::max)
    }
}

const SCORER_CASES: [(&str, &[&str]); 50] = [
    ("Paris", &["Paris"]),
    ("paris", &["Paris"]),
    ("The Paris", &["Paris"]),
    ("Paris.", &["Paris"]),
    ("  Paris  ", &["Paris"]),
    ("an apple", &["apple"]),
    ("A apple a day", &["apple day"]),
    ("the the the", &["the"]),
    ("", &["Paris"]),
    ("", &["the"]),
    ("Lyon", &["Paris", "Lyon"]),
    ("lyon!", &["Paris", "the Lyon"]),
    ("New York City", &["New York"]),
    ("New York", &["New York City"]),
    ("York New", &["New York"]),
    ("new new york", &["New York"]),
    ("George Washington", &["Washington", "George Washington"]),
    ("President George Washington", &["Washington", "George Washington"]),
    ("U.S.A.", &["USA"]),
    ("U.S.", &["United States", "US"]),
    ("rock-n-roll", &["rocknroll"]),
    ("rock and roll", &["rock n roll"]),
    ("$1,000", &["1000"]),
    ("1,000 dollars", &["$1000"]),
    ("42", &["forty two", "42"]),
    ("3.14", &["314"]),
    ("O'Neil", &["ONeil"]),
    ("(a) answer", &["answer"]),
    ("theater", &["the ater"]),
    ("anthem", &["an them"]),
    ("Anne", &["an ne"]),
    ("the end", &["end", "the end of it"]),
    ("end of it", &["the end of it"]),
    ("cat dog", &["dog cat"]),
    ("cat cat dog", &["cat dog dog"]),
    ("A", &["a"]),
    ("An", &["the"]),
    ("Théâtre", &["théâtre"]),
    ("café au lait", &["cafe au lait"]),
    ("MÜNCHEN", &["münchen"]),
    ("tab\tseparated\nwords", &["tab separated words"]),
    ("hello,world", &["helloworld"]),
    ("hello, world", &["hello world"]),
    ("\"quoted\"", &["quoted"]),
    ("[bracket]", &["bracket"]),
    ("x_y", &["xy"]),
    ("1990s", &["1990"]),
    ("The Beatles", &["Beatles", "The Rolling Stones"]),
    ("Rolling Stones band", &["Beatles", "The Rolling Stones"]),
    ("nothing matches", &["completely different answer"]),
];

fn criterion_3() -> Outcome {
    let reference = Reference::new();
    let mut mismatches = Vec::new();
    for (i, (pred, golds)) in SCORER_CASES.iter().enumerate() {
        let em = exact_match(pred, golds).map_err(|e| e.to_string())?;
        let f1 = f1_score(pred, golds).map_err(|e| e.to_string())?;
        if em != reference.em(pred, golds) || (f1 - reference.f1(pred, golds)).abs() > 1e-9 {
            mismatches.push(i);
        }
    }
    check(
        mismatches.is_empty(),
        format!("{} cases, mismatching cases {mismatches:?} (EM exact, F1 tol 1e-9)", SCORER_CASES.len()),
    )
}

fn build(records: &[raat::bench::QueryRecord], seed: u64) -> BenchmarkSet {
    build_benchmark(
        BenchmarkSources {
            train_pool: records.to_vec(),
            test_pool: None,
        },
        sizes(120, 30, 50),
        seed,
    )
    .expect("benchmark builds")
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let records = generate_synthetic(200, 12, 4);
    let a = build(&records, 4);
    let mut violations = Vec::new();
    let mut n = 0;
    for split in a.splits() {
        for ex in &split.examples {
            n += 1;
            if let Err(e) = ex.check_invariants() {
                violations.push(e);
            }
        }
    }
    let b = build(&records, 4);
    let identical = a.splits().iter().zip(b.splits()).all(|(x, y)| split_to_jsonl(x) == split_to_jsonl(y));
    let c = build(&records, 5);
    let irrelevant = |s: &BenchmarkSet| -> HashMap<String, String> {
        s.splits()
            .iter()
            .flat_map(|sp| sp.examples.iter().map(|e| (e.id.clone(), e.irrelevant_noise.text.clone())))
            .collect()
    };
    let (ia, ic) = (irrelevant(&a), irrelevant(&c));
    let changed = ia.iter().filter(|(id, t)| ic.get(*id).is_some_and(|u| u != *t)).count();
    let elapsed = start.elapsed();
    check(
        n == 200 && violations.is_empty() && identical && changed >= 1 && elapsed < Duration::from_secs(30),
        format!(
            "{n} examples, {} invariant violations, rebuild identical: {identical}, irrelevant assignments changed by new seed: {changed}; {:.2}s",
            violations.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn updates_for(n_examples: usize) -> (u64, u64, u64) {
    let set = synth_set(n_examples + 10, 16, 5, sizes(n_examples, 0, 10));
    let cfg = TrainConfig {
        mode: Mode::Raat,
        epochs: 2,
        ..TrainConfig::default()
    };
    let mut model = init_model(&set.train, &cfg);
    let out = train(&mut model, &set.train, &cfg).expect("training runs");
    let stats = out.stats.expect("raat tracks selection");
    let from_log = SelectionStats::from_log(&out.log);
    assert_eq!(stats, from_log);
    (out.total_updates, out.log.len() as u64, stats.counts.iter().sum())
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let small = updates_for(500);
    let small_elapsed = start.elapsed();
    let full = updates_for(4500);
    check(
        small == (1000, 1000, 1000) && full == (9000, 9000, 9000) && small_elapsed < Duration::from_secs(300),
        format!(
            "500 x 2 epochs -> updates/log/stats {small:?} in {:.1}s; 4500 x 2 epochs -> {full:?}",
            small_elapsed.as_secs_f64()
        ),
    )
}

struct TrendRun {
    seed: u64,
    golden_em: f64,
    raat_em: f64,
    noise_acc: f64,
}

fn trend_set(seed: u64) -> BenchmarkSet {
    synth_set(TREND_QUERIES, TREND_ENTITIES, seed, sizes(800, 0, 200))
}

fn trend_config(mode: Mode, seed: u64) -> TrainConfig {
    TrainConfig {
        mode,
        seed,
        epochs: TREND_EPOCHS,
        lr: TREND_LR,
        d: 32,
        h: 64,
        ..TrainConfig::default()
    }
}

fn trend_runs() -> Vec<TrendRun> {
    TREND_SEEDS
        .iter()
        .map(|&seed| {
            let set = trend_set(seed);
            let opts = EvalOptions {
                seed,
                ..EvalOptions::default()
            };
            let avg_em = |mode| {
                let cfg = trend_config(mode, seed);
                let mut model = init_model(&set.train, &cfg);
                train(&mut model, &set.train, &cfg).expect("training runs");
                let backend = Backend::Builtin(model);
                let em = evaluate(&backend, &set.test, &EvalCondition::ALL, &opts).expect("evaluation runs").table.avg.em;
                let Backend::Builtin(model) = backend else { unreachable!() };
                (em, model)
            };
            let (golden_em, _) = avg_em(Mode::Golden);
            let (raat_em, raat_model) = avg_em(Mode::Raat);
            TrendRun {
                seed,
                golden_em,
                raat_em,
                noise_acc: noise_accuracy(&raat_model, &set.test, &opts).expect("classifier runs"),
            }
        })
        .collect()
}

fn criterion_6(runs: &[TrendRun], elapsed: Duration) -> Outcome {
    let wins = runs.iter().filter(|r| r.raat_em >= r.golden_em + TREND_MIN_GAP).count();
    let detail: Vec<String> = runs
        .iter()
        .map(|r| format!("seed {}: raat {:.2} vs golden {:.2}", r.seed, r.raat_em, r.golden_em))
        .collect();
    check(
        wins * 2 > runs.len() && elapsed < Duration::from_secs(600),
        format!(
            "avg EM gap >= {TREND_MIN_GAP} in {wins}/{} seeds [{}]; {:.0}s",
            runs.len(),
            detail.join("; "),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_7(runs: &[TrendRun]) -> Outcome {
    let accs: Vec<String> = runs.iter().map(|r| format!("{:.3}", r.noise_acc)).collect();
    check(
        runs.iter().all(|r| r.noise_acc >= NOISE_ACC_MIN),
        format!("4-way noise accuracy per seed [{}] (min {NOISE_ACC_MIN})", accs.join(", ")),
    )
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut reports = Vec::new();
    for seed in TREND_SEEDS {
        let set = trend_set(seed);
        let opts = EvalOptions {
            seed,
            ..EvalOptions::default()
        };
        let report = ablation_suite(&set, &trend_config(Mode::Raat, seed), &opts).map_err(|e| e.to_string())?;
        reports.push((seed, set, opts, report));
    }
    let (seed, set, opts, first) = &reports[0];
    let again = ablation_suite(set, &trend_config(Mode::Raat, *seed), opts).map_err(|e| e.to_string())?;
    let deterministic = again.to_tsv() == first.to_tsv()
        && again.rows.iter().zip(&first.rows).all(|(a, b)| a.log == b.log);
    let complete = reports.iter().all(|(_, _, _, r)| r.rows.len() == ABLATION_MODES.len());

    let mut direction = Vec::new();
    for mode in [Mode::RaatNoCls, Mode::RaatNoReg] {
        let wins = reports
            .iter()
            .filter(|(_, _, _, r)| r.table(Mode::Raat).unwrap().avg.f1 >= r.table(mode).unwrap().avg.f1)
            .count();
        direction.push(format!("raat >= {mode} in {wins}/3 seeds{}", if wins >= 2 { "" } else { " (direction not met)" }));
    }
    let f1s: Vec<String> = reports
        .iter()
        .map(|(s, _, _, r)| {
            let cells: Vec<String> = r.rows.iter().map(|row| format!("{} {:.2}", row.mode, row.table.avg.f1)).collect();
            format!("seed {s}: {}", cells.join(", "))
        })
        .collect();
    check(
        deterministic && complete,
        format!(
            "suite complete: {complete}, rerun identical: {deterministic}; {}; avg F1 [{}]; {:.0}s",
            direction.join(", "),
            f1s.join("; "),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn run(n: usize, f: impl FnOnce() -> Outcome, failed: &mut Vec<usize>) {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    match outcome {
        Ok(msg) => println!("criterion {n}: PASS  {msg}"),
        Err(msg) => {
            println!("criterion {n}: FAIL  {msg}");
            failed.push(n);
        }
    }
}

fn main() {
    let mut failed = Vec::new();
    run(1, criterion_1, &mut failed);
    run(2, criterion_2, &mut failed);
    run(3, criterion_3, &mut failed);
    run(4, criterion_4, &mut failed);
    run(5, criterion_5, &mut failed);

    let start = Instant::now();
    let runs = catch_unwind(trend_runs);
    let elapsed = start.elapsed();
    match &runs {
        Ok(runs) => {
            run(6, || criterion_6(runs, elapsed), &mut failed);
            run(7, || criterion_7(runs), &mut failed);
        }
        Err(_) => {
            for n in [6, 7] {
                println!("criterion {n}: FAIL  trend training panicked");
                failed.push(n);
            }
        }
    }
    run(8, criterion_8, &mut failed);

    if failed.is_empty() {
        println!("acceptance: all 8 criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
