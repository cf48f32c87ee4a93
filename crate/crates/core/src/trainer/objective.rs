//! The adaptive adversarial multi-task objective over one augmentation group.
//!
//! For the four generation losses `L'_k` of a group, with `k_max`/`k_min` the
//! arg-max/arg-min (ties to the lowest label):
//!
//! ```text
//! l_reg  = (L'_max - L'_min)^2
//! l_ada  = L'_max + w_reg * l_reg
//! l_cls  = mean_k CE(cls_logits_k, k)
//! l_raat = w_ada * l_ada + w_cls * l_cls
//! ```
//!
//! The selection is held fixed while differentiating, so gradient flows into
//! the max and min samples' generation losses and into all four
//! classification losses.

use serde::{Deserialize, Serialize};

use super::config::RaatWeights;
use crate::bench::NoiseKind;
use crate::tinylm::{backward_into, classification_loss, ForwardOutput, Gradients, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Indexed by [`NoiseKind::index`].
    pub gen_losses: [f64; 4],
    pub max_kind: NoiseKind,
    pub min_kind: NoiseKind,
    pub l_reg: f64,
    pub l_ada: f64,
    pub l_cls: f64,
    pub l_raat: f64,
}

/// Arg-max and arg-min with ties resolved to the lowest label.
pub fn select_extremes(gen_losses: &[f64; 4]) -> (NoiseKind, NoiseKind) {
    let mut max_i = 0;
    let mut min_i = 0;
    for i in 1..4 {
        if gen_losses[i] > gen_losses[max_i] {
            max_i = i;
        }
        if gen_losses[i] < gen_losses[min_i] {
            min_i = i;
        }
    }
    (NoiseKind::from_index(max_i), NoiseKind::from_index(min_i))
}

impl LossBreakdown {
    pub fn compute(gen_losses: [f64; 4], l_cls: f64, w: RaatWeights) -> Self {
        let (max_kind, min_kind) = select_extremes(&gen_losses);
        let gap = gen_losses[max_kind.index()] - gen_losses[min_kind.index()];
        let l_reg = gap * gap;
        let l_ada = gen_losses[max_kind.index()] + w.w_reg * l_reg;
        let l_raat = w.w_ada * l_ada + w.w_cls * l_cls;
        LossBreakdown {
            gen_losses,
            max_kind,
            min_kind,
            l_reg,
            l_ada,
            l_cls,
            l_raat,
        }
    }

    /// Objective gradient coefficients on each sample's generation loss.
    pub fn gen_coefficients(&self, w: RaatWeights) -> [f64; 4] {
        let gap = self.gen_losses[self.max_kind.index()] - self.gen_losses[self.min_kind.index()];
        let mut c = [0.0; 4];
        c[self.max_kind.index()] += w.w_ada * (1.0 + 2.0 * w.w_reg * gap);
        c[self.min_kind.index()] -= w.w_ada * 2.0 * w.w_reg * gap;
        c
    }
}

/// Forward results for the four augmentations, in label order.
#[derive(Debug, Clone)]
pub struct GroupForward {
    pub outputs: [ForwardOutput; 4],
}

impl GroupForward {
    pub fn gen_losses(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.outputs[i].gen_loss)
    }

    pub fn cls_losses(&self) -> [f64; 4] {
        std::array::from_fn(|i| classification_loss(&self.outputs[i].cls_logits, NoiseKind::from_index(i)))
    }

    pub fn breakdown(&self, w: RaatWeights) -> LossBreakdown {
        let l_cls = self.cls_losses().iter().sum::<f64>() / 4.0;
        LossBreakdown::compute(self.gen_losses(), l_cls, w)
    }

    /// Exact gradient of `breakdown.l_raat` with the max/min selection frozen.
    pub fn gradients(&self, params: &ModelParams, breakdown: &LossBreakdown, w: RaatWeights) -> Gradients {
        let coeffs = breakdown.gen_coefficients(w);
        let mut grads = ModelParams::zeros(params.dims());
        for (i, out) in self.outputs.iter().enumerate() {
            let wc = w.w_cls / 4.0;
            if coeffs[i] != 0.0 || wc != 0.0 {
                backward_into(params, &out.trace, coeffs[i], wc, NoiseKind::from_index(i), &mut grads);
            }
        }
        grads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEFAULT_WEIGHTS: RaatWeights = RaatWeights {
        w_reg: 0.1,
        w_ada: 2.0,
        w_cls: 1.0,
    };

    #[test]
    fn worked_example() {
        let b = LossBreakdown::compute([1.2, 0.8, 2.0, 1.5], 4f64.ln(), DEFAULT_WEIGHTS);
        assert_eq!(b.max_kind, NoiseKind::Irrelevant);
        assert_eq!(b.min_kind, NoiseKind::Relevant);
        assert!((b.l_reg - 1.44).abs() < 1e-12);
        assert!((b.l_ada - 2.144).abs() < 1e-12);
        assert!((b.l_raat - 5.6743).abs() < 1e-4);
        let no_reg = LossBreakdown::compute([1.2, 0.8, 2.0, 1.5], 0.0, RaatWeights { w_reg: 0.0, ..DEFAULT_WEIGHTS });
        assert_eq!(no_reg.l_ada, 2.0);
    }

    #[test]
    fn ties_resolve_to_lowest_label() {
        let b = LossBreakdown::compute([1.0; 4], 0.0, DEFAULT_WEIGHTS);
        assert_eq!((b.max_kind, b.min_kind), (NoiseKind::Golden, NoiseKind::Golden));
        assert_eq!(b.l_reg, 0.0);
        let (mx, mn) = select_extremes(&[0.5, 2.0, 2.0, 0.5]);
        assert_eq!((mx, mn), (NoiseKind::Relevant, NoiseKind::Golden));
    }

    #[test]
    fn coefficients() {
        let b = LossBreakdown::compute([1.2, 0.8, 2.0, 1.5], 0.0, DEFAULT_WEIGHTS);
        let c = b.gen_coefficients(DEFAULT_WEIGHTS);
        assert!((c[2] - 2.0 * (1.0 + 0.2 * 1.2)).abs() < 1e-12);
        assert!((c[1] + 2.0 * 0.2 * 1.2).abs() < 1e-12);
        assert_eq!(c[0], 0.0);
        assert_eq!(c[3], 0.0);
        // degenerate group: max and min coincide
        let b = LossBreakdown::compute([1.0; 4], 0.0, DEFAULT_WEIGHTS);
        assert_eq!(b.gen_coefficients(DEFAULT_WEIGHTS), [2.0, 0.0, 0.0, 0.0]);
    }
}
