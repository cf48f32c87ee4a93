use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{RaatError, Result};
use crate::tinylm::{DEFAULT_D, DEFAULT_H};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Raat,
    RaatNoCls,
    RaatNoReg,
    Golden,
    Retrobust,
    Retrieved,
    Multiple,
}

impl Mode {
    pub const ALL: [Mode; 7] = [
        Mode::Raat,
        Mode::RaatNoCls,
        Mode::RaatNoReg,
        Mode::Golden,
        Mode::Retrobust,
        Mode::Retrieved,
        Mode::Multiple,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Raat => "raat",
            Mode::RaatNoCls => "raat_no_cls",
            Mode::RaatNoReg => "raat_no_reg",
            Mode::Golden => "golden",
            Mode::Retrobust => "retrobust",
            Mode::Retrieved => "retrieved",
            Mode::Multiple => "multiple",
        }
    }

    pub fn is_raat(self) -> bool {
        matches!(self, Mode::Raat | Mode::RaatNoCls | Mode::RaatNoReg)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode {s:?}; expected one of raat, raat_no_cls, raat_no_reg, golden, retrobust, retrieved, multiple"))
    }
}

/// Where the noise passage goes relative to the golden one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderPolicy {
    #[default]
    NoiseFirst,
    GoldenFirst,
    Shuffled,
}

impl FromStr for OrderPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "noise_first" => Ok(OrderPolicy::NoiseFirst),
            "golden_first" => Ok(OrderPolicy::GoldenFirst),
            "shuffled" => Ok(OrderPolicy::Shuffled),
            _ => Err(format!("unknown order policy {s:?}; expected noise_first, golden_first or shuffled")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub w_reg: f64,
    pub w_ada: f64,
    pub w_cls: f64,
    pub lr: f64,
    pub epochs: usize,
    pub grad_clip_norm: f64,
    pub seed: u64,
    pub mode: Mode,
    pub order_policy: OrderPolicy,
    /// Embedding width of the model trained from this config.
    pub d: usize,
    /// Hidden width of the model trained from this config.
    pub h: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            w_reg: 0.1,
            w_ada: 2.0,
            w_cls: 1.0,
            lr: 0.1,
            epochs: 2,
            grad_clip_norm: 1.0,
            seed: 0,
            mode: Mode::Raat,
            order_policy: OrderPolicy::NoiseFirst,
            d: DEFAULT_D,
            h: DEFAULT_H,
        }
    }
}

pub const CONFIG_KEYS: [&str; 11] = [
    "w_reg",
    "w_ada",
    "w_cls",
    "lr",
    "epochs",
    "grad_clip_norm",
    "seed",
    "mode",
    "order_policy",
    "d",
    "h",
];

/// Loss weights after applying the mode's ablations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaatWeights {
    pub w_reg: f64,
    pub w_ada: f64,
    pub w_cls: f64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = [("w_reg", self.w_reg), ("w_ada", self.w_ada), ("w_cls", self.w_cls)];
        for (name, w) in weights {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(RaatError::Config(format!("{name} must be a finite value >= 0, got {w}")));
            }
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(RaatError::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        if self.epochs < 1 {
            return Err(RaatError::Config("epochs must be >= 1".into()));
        }
        if !(self.grad_clip_norm > 0.0) {
            return Err(RaatError::Config("grad_clip_norm must be > 0".into()));
        }
        if self.d == 0 || self.h == 0 {
            return Err(RaatError::Config("d and h must be >= 1".into()));
        }
        Ok(())
    }

    pub fn raat_weights(&self) -> RaatWeights {
        RaatWeights {
            w_reg: if self.mode == Mode::RaatNoReg { 0.0 } else { self.w_reg },
            w_ada: self.w_ada,
            w_cls: if self.mode == Mode::RaatNoCls { 0.0 } else { self.w_cls },
        }
    }

    /// defaults ← `file` ← `overrides`. Both layers must be flat JSON objects
    /// whose keys are all in [`CONFIG_KEYS`].
    pub fn layered(file: Option<&serde_json::Value>, overrides: &serde_json::Map<String, serde_json::Value>) -> Result<Self> {
        let serde_json::Value::Object(mut merged) = serde_json::to_value(TrainConfig::default()).expect("config serializes") else {
            unreachable!("config is an object")
        };
        let mut apply = |layer: &serde_json::Map<String, serde_json::Value>, origin: &str| -> Result<()> {
            for (k, v) in layer {
                if !CONFIG_KEYS.contains(&k.as_str()) {
                    return Err(RaatError::Config(format!(
                        "unknown config key {k:?} in {origin}; valid keys: {}",
                        CONFIG_KEYS.join(", ")
                    )));
                }
                merged.insert(k.clone(), v.clone());
            }
            Ok(())
        };
        if let Some(file) = file {
            let obj = file
                .as_object()
                .ok_or_else(|| RaatError::Config("config file must contain a flat JSON object".into()))?;
            apply(obj, "config file")?;
        }
        apply(overrides, "command-line overrides")?;
        let cfg: TrainConfig = serde_json::from_value(serde_json::Value::Object(merged))
            .map_err(|e| RaatError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
