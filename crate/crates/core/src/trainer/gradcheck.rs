//! Central-difference check of the full group objective on a tiny model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::RaatWeights;
use super::objective::GroupForward;
use crate::error::Result;
use crate::tinylm::{forward, ModelDims, ModelParams, EOS, SEP};

pub const GRADCHECK_EPS: f64 = 1e-5;
pub const GRADCHECK_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub seed: u64,
    pub params_checked: usize,
    /// max over parameters of |analytic - numeric| / max(1, |numeric|)
    pub max_rel_err: f64,
}

/// A random four-prompt group sharing one answer, over a vocabulary of
/// `dims.vocab` tokens (ids from 5 up are ordinary tokens).
struct Group {
    prompts: [Vec<usize>; 4],
    answer: Vec<usize>,
}

fn random_group(rng: &mut ChaCha8Rng, vocab: usize) -> Group {
    let mut tok = || rng.gen_range(5..vocab);
    let mut answer = vec![tok(), tok()];
    answer.push(EOS);
    let prompts = std::array::from_fn(|_| {
        let mut p = vec![crate::tinylm::BOS];
        let len = 2 + rng.gen_range(0..5);
        for _ in 0..len {
            p.push(rng.gen_range(5..vocab));
        }
        p.push(SEP);
        p
    });
    Group { prompts, answer }
}

fn group_forward(params: &ModelParams, g: &Group) -> Result<GroupForward> {
    let outs: Vec<_> = g
        .prompts
        .iter()
        .map(|p| forward(params, p, &g.answer))
        .collect::<Result<_>>()?;
    Ok(GroupForward {
        outputs: outs.try_into().expect("four prompts"),
    })
}

/// Checks analytic gradients of the combined objective on a d=4, h=4, V=12
/// model. Parameters are drawn from U(-0.8, 0.8) so saturation and the
/// classification head are both exercised.
pub fn gradcheck(seed: u64, weights: RaatWeights) -> Result<GradCheckReport> {
    let dims = ModelDims { vocab: 12, d: 4, h: 4 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::zeros(dims);
    for t in params.tensors_mut() {
        t.iter_mut().for_each(|x| *x = rng.gen_range(-0.8..0.8));
    }
    let group = random_group(&mut rng, dims.vocab);

    let base = group_forward(&params, &group)?;
    let breakdown = base.breakdown(weights);
    let analytic = base.gradients(&params, &breakdown, weights);

    // Objective with the max/min selection frozen at the base point.
    let objective = |p: &ModelParams| -> Result<f64> {
        let gf = group_forward(p, &group)?;
        let gen = gf.gen_losses();
        let (hi, lo) = (gen[breakdown.max_kind.index()], gen[breakdown.min_kind.index()]);
        let l_cls = gf.cls_losses().iter().sum::<f64>() / 4.0;
        Ok(weights.w_ada * (hi + weights.w_reg * (hi - lo).powi(2)) + weights.w_cls * l_cls)
    };

    let mut max_rel: f64 = 0.0;
    let mut checked = 0;
    for ti in 0..7 {
        for i in 0..params.tensors()[ti].len() {
            let orig = params.tensors()[ti][i];
            params.tensors_mut()[ti][i] = orig + GRADCHECK_EPS;
            let plus = objective(&params)?;
            params.tensors_mut()[ti][i] = orig - GRADCHECK_EPS;
            let minus = objective(&params)?;
            params.tensors_mut()[ti][i] = orig;
            let numeric = (plus - minus) / (2.0 * GRADCHECK_EPS);
            let err = (analytic.tensors()[ti][i] - numeric).abs() / numeric.abs().max(1.0);
            max_rel = max_rel.max(err);
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        seed,
        params_checked: checked,
        max_rel_err: max_rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_weights_pass() {
        let w = RaatWeights {
            w_reg: 0.1,
            w_ada: 2.0,
            w_cls: 1.0,
        };
        for seed in 0..3 {
            let r = gradcheck(seed, w).unwrap();
            assert_eq!(r.params_checked, 12 * 4 + 4 * 8 + 4 + 12 * 4 + 12 + 4 * 4 + 4);
            assert!(r.max_rel_err < GRADCHECK_TOL, "{r:?}");
        }
    }
}
