use std::path::Path;

use super::{evaluate, Backend, EvalCondition, EvalOptions};
use crate::bench::BenchmarkSet;
use crate::error::{RaatError, Result};
use crate::metrics::{round_half_up_2, ConditionTable};
use crate::trainer::{init_model, train, Mode, StepRecord, TrainConfig};

/// Full objective, without the classification loss, without the regularizer.
pub const ABLATION_MODES: [Mode; 3] = [Mode::Raat, Mode::RaatNoCls, Mode::RaatNoReg];

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub mode: Mode,
    pub table: ConditionTable,
    pub log: Vec<StepRecord>,
}

#[derive(Debug, Clone)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn table(&self, mode: Mode) -> Option<&ConditionTable> {
        self.rows.iter().find(|r| r.mode == mode).map(|r| &r.table)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let map = self
            .rows
            .iter()
            .map(|r| (r.mode.name().to_owned(), r.table.to_json()))
            .collect::<serde_json::Map<_, _>>();
        serde_json::Value::Object(map)
    }

    /// One row per mode; F1/EM column pairs per condition, then Avg.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("mode");
        for c in EvalCondition::ALL {
            out.push_str(&format!("\t{c}_F1\t{c}_EM"));
        }
        out.push_str("\tavg_F1\tavg_EM\n");
        for r in &self.rows {
            out.push_str(r.mode.name());
            for cell in r.table.cells.iter().chain(std::iter::once(&r.table.avg)) {
                out.push_str(&format!("\t{:.2}\t{:.2}", round_half_up_2(cell.f1), round_half_up_2(cell.em)));
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| RaatError::io(dir, e))?;
        let json = serde_json::to_string_pretty(&self.to_json()).expect("report serializes") + "\n";
        for (name, body) in [("ablation.json", json), ("ablation.tsv", self.to_tsv())] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| RaatError::io(&path, e))?;
        }
        Ok(())
    }
}

/// Trains each ablation mode from the same initialization and seed on the
/// train split and evaluates it on the test split.
pub fn ablation_suite(bench: &BenchmarkSet, base: &TrainConfig, opts: &EvalOptions) -> Result<AblationReport> {
    let mut rows = Vec::new();
    for mode in ABLATION_MODES {
        let config = TrainConfig { mode, ..base.clone() };
        let mut model = init_model(&bench.train, &config);
        let outcome = train(&mut model, &bench.train, &config)?;
        let eval = evaluate(&Backend::Builtin(model), &bench.test, &EvalCondition::ALL, opts)?;
        rows.push(AblationRow {
            mode,
            table: eval.table,
            log: outcome.log,
        });
    }
    Ok(AblationReport { rows })
}
