//! Forward pass, exact backward pass and greedy decoding.
//!
//! At sequence position t the model sees `m_t = [e_t ; mean(e_1..e_t)]`,
//! computes `h_t = tanh(W1 m_t + b1)`, and predicts the next token with
//! `W2 h_t + b2`. The noise-kind head reads the hidden state of the last
//! prompt token: `Wc h_T + bc`.

use super::params::{axpy, Gradients, ModelParams, NUM_CLASSES};
use super::vocab::EOS;
use crate::bench::NoiseKind;
use crate::error::{RaatError, Result};

/// Cached activations of one teacher-forced pass. Only the positions whose
/// hidden state is consumed (last prompt token through the second-to-last
/// answer token) are stored.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Full sequence, prompt followed by answer.
    pub tokens: Vec<usize>,
    pub prompt_len: usize,
    /// `[e_t ; mean_t]` for each scored position.
    pub inputs: Vec<Vec<f64>>,
    pub hidden: Vec<Vec<f64>>,
    /// Log-probabilities over the vocabulary for each answer token.
    pub log_probs: Vec<Vec<f64>>,
    pub cls_logits: [f64; NUM_CLASSES],
}

impl ForwardTrace {
    /// Hidden state of the last prompt token.
    pub fn last_hidden(&self) -> &[f64] {
        &self.hidden[0]
    }

    pub fn answer_len(&self) -> usize {
        self.tokens.len() - self.prompt_len
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub gen_loss: f64,
    pub cls_logits: [f64; NUM_CLASSES],
    pub trace: ForwardTrace,
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&x| x - lse).collect()
}

pub fn classification_loss(cls_logits: &[f64; NUM_CLASSES], label: NoiseKind) -> f64 {
    -log_softmax(cls_logits)[label.index()]
}

fn check_ids(ids: &[usize], vocab: usize) -> Result<()> {
    match ids.iter().find(|&&id| id >= vocab) {
        Some(&id) => Err(RaatError::TokenOutOfRange { id, vocab }),
        None => Ok(()),
    }
}

fn hidden_at(params: &ModelParams, e_t: &[f64], mean: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut m = Vec::with_capacity(e_t.len() * 2);
    m.extend_from_slice(e_t);
    m.extend_from_slice(mean);
    let mut h = vec![0.0; params.b1.len()];
    params.w1.matvec(&m, &mut h);
    for (hi, bi) in h.iter_mut().zip(&params.b1) {
        *hi = (*hi + bi).tanh();
    }
    (m, h)
}

fn token_logits(params: &ModelParams, h: &[f64]) -> Vec<f64> {
    let mut logits = vec![0.0; params.b2.len()];
    params.w2.matvec(h, &mut logits);
    for (l, b) in logits.iter_mut().zip(&params.b2) {
        *l += b;
    }
    logits
}

fn cls_logits(params: &ModelParams, h: &[f64]) -> [f64; NUM_CLASSES] {
    let mut out = [0.0; NUM_CLASSES];
    params.wc.matvec(h, &mut out);
    for (o, b) in out.iter_mut().zip(&params.bc) {
        *o += b;
    }
    out
}

pub fn forward(params: &ModelParams, input_ids: &[usize], answer_ids: &[usize]) -> Result<ForwardOutput> {
    if input_ids.is_empty() || answer_ids.is_empty() {
        return Err(RaatError::Data("forward needs non-empty prompt and answer".into()));
    }
    let vocab = params.embed.rows;
    check_ids(input_ids, vocab)?;
    check_ids(answer_ids, vocab)?;

    let d = params.embed.cols;
    let tokens: Vec<usize> = input_ids.iter().chain(answer_ids).copied().collect();
    let prompt_len = input_ids.len();

    let mut sum = vec![0.0; d];
    let mut inputs = Vec::with_capacity(answer_ids.len());
    let mut hidden = Vec::with_capacity(answer_ids.len());
    let mut log_probs = Vec::with_capacity(answer_ids.len());
    let mut nll = 0.0;
    for t in 0..tokens.len() - 1 {
        let e_t = params.embed.row(tokens[t]);
        axpy(1.0, e_t, &mut sum);
        if t + 1 < prompt_len {
            continue;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / (t + 1) as f64).collect();
        let (m, h) = hidden_at(params, e_t, &mean);
        let lp = log_softmax(&token_logits(params, &h));
        nll -= lp[tokens[t + 1]];
        inputs.push(m);
        hidden.push(h);
        log_probs.push(lp);
    }
    let cls = cls_logits(params, &hidden[0]);
    Ok(ForwardOutput {
        gen_loss: nll / answer_ids.len() as f64,
        cls_logits: cls,
        trace: ForwardTrace {
            tokens,
            prompt_len,
            inputs,
            hidden,
            log_probs,
            cls_logits: cls,
        },
    })
}

/// Accumulates `∂(weight_gen·gen_loss + weight_cls·cls_loss)/∂θ` into `grads`.
pub fn backward_into(
    params: &ModelParams,
    trace: &ForwardTrace,
    weight_gen: f64,
    weight_cls: f64,
    label: NoiseKind,
    grads: &mut Gradients,
) {
    let d = params.embed.cols;
    let h_dim = params.b1.len();
    let n_scored = trace.hidden.len();
    let first = trace.prompt_len - 1;
    let gen_scale = weight_gen / trace.answer_len() as f64;

    // dL/dh for each scored position
    let mut dh: Vec<Vec<f64>> = vec![vec![0.0; h_dim]; n_scored];
    if gen_scale != 0.0 {
        for k in 0..n_scored {
            let target = trace.tokens[first + k + 1];
            let mut dlogits: Vec<f64> = trace.log_probs[k].iter().map(|lp| gen_scale * lp.exp()).collect();
            dlogits[target] -= gen_scale;
            grads.w2.add_outer(&dlogits, &trace.hidden[k]);
            axpy(1.0, &dlogits, &mut grads.b2);
            params.w2.matvec_t_add(&dlogits, &mut dh[k]);
        }
    }
    if weight_cls != 0.0 {
        let probs = log_softmax(&trace.cls_logits);
        let mut dcls: Vec<f64> = probs.iter().map(|lp| weight_cls * lp.exp()).collect();
        dcls[label.index()] -= weight_cls;
        grads.wc.add_outer(&dcls, &trace.hidden[0]);
        axpy(1.0, &dcls, &mut grads.bc);
        params.wc.matvec_t_add(&dcls, &mut dh[0]);
    }

    // Through tanh and W1; split dm into the direct embedding part and the
    // causal-mean part.
    let seq_len = trace.tokens.len();
    let mut de_direct = vec![vec![0.0; d]; seq_len];
    let mut dmean = vec![vec![0.0; d]; seq_len];
    for k in 0..n_scored {
        let dz: Vec<f64> = dh[k]
            .iter()
            .zip(&trace.hidden[k])
            .map(|(g, h)| g * (1.0 - h * h))
            .collect();
        if dz.iter().all(|&x| x == 0.0) {
            continue;
        }
        grads.w1.add_outer(&dz, &trace.inputs[k]);
        axpy(1.0, &dz, &mut grads.b1);
        let mut dm = vec![0.0; 2 * d];
        params.w1.matvec_t_add(&dz, &mut dm);
        let t = first + k;
        de_direct[t].copy_from_slice(&dm[..d]);
        let inv = 1.0 / (t + 1) as f64;
        dmean[t].iter_mut().zip(&dm[d..]).for_each(|(o, g)| *o = g * inv);
    }
    // mean_t = (1/(t+1)) Σ_{u≤t} e_u, so e_u receives Σ_{t≥u} dmean_t/(t+1).
    let mut acc = vec![0.0; d];
    for u in (0..seq_len).rev() {
        axpy(1.0, &dmean[u], &mut acc);
        let row = grads.embed.row_mut(trace.tokens[u]);
        axpy(1.0, &acc, row);
        axpy(1.0, &de_direct[u], row);
    }
}

pub fn backward(params: &ModelParams, trace: &ForwardTrace, weight_gen: f64, weight_cls: f64, label: NoiseKind) -> Gradients {
    let mut grads = ModelParams::zeros(params.dims());
    backward_into(params, trace, weight_gen, weight_cls, label, &mut grads);
    grads
}

/// Hidden state and classification logits at the last token of `prompt_ids`.
pub fn encode_prompt(params: &ModelParams, prompt_ids: &[usize]) -> Result<(Vec<f64>, [f64; NUM_CLASSES])> {
    let Some(&last) = prompt_ids.last() else {
        return Err(RaatError::Data("empty prompt".into()));
    };
    check_ids(prompt_ids, params.embed.rows)?;
    let d = params.embed.cols;
    let mut sum = vec![0.0; d];
    for &id in prompt_ids {
        axpy(1.0, params.embed.row(id), &mut sum);
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / prompt_ids.len() as f64).collect();
    let (_, h) = hidden_at(params, params.embed.row(last), &mean);
    let cls = cls_logits(params, &h);
    Ok((h, cls))
}

/// Greedy decoding until EOS or `max_len` tokens; ties go to the lowest id.
/// The returned tokens exclude EOS.
pub fn generate(params: &ModelParams, prompt_ids: &[usize], max_len: usize) -> Result<Vec<usize>> {
    if prompt_ids.is_empty() {
        return Err(RaatError::Data("empty prompt".into()));
    }
    check_ids(prompt_ids, params.embed.rows)?;
    let d = params.embed.cols;
    let mut sum = vec![0.0; d];
    for &id in prompt_ids {
        axpy(1.0, params.embed.row(id), &mut sum);
    }
    let mut len = prompt_ids.len();
    let mut last = *prompt_ids.last().expect("non-empty");
    let mut out = Vec::new();
    while out.len() < max_len {
        let mean: Vec<f64> = sum.iter().map(|s| s / len as f64).collect();
        let (_, h) = hidden_at(params, params.embed.row(last), &mean);
        let logits = token_logits(params, &h);
        let mut best = 0;
        for (i, &l) in logits.iter().enumerate() {
            if l > logits[best] {
                best = i;
            }
        }
        if best == EOS {
            break;
        }
        out.push(best);
        axpy(1.0, params.embed.row(best), &mut sum);
        len += 1;
        last = best;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tinylm::params::ModelDims;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small(seed: u64) -> ModelParams {
        let mut p = ModelParams::init(ModelDims { vocab: 12, d: 4, h: 4 }, seed);
        // larger weights and nonzero biases so every path is exercised
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        for t in p.tensors_mut() {
            t.iter_mut().for_each(|x| *x = rng.gen_range(-0.8..0.8));
        }
        p
    }

    #[test]
    fn uniform_logits_give_ln_v() {
        let p = ModelParams::zeros(ModelDims { vocab: 9, d: 3, h: 5 });
        let out = forward(&p, &[2, 5, 4], &[6, 7, EOS]).unwrap();
        assert!((out.gen_loss - (9f64).ln()).abs() < 1e-12);
        assert_eq!(out.cls_logits, [0.0; 4]);
    }

    #[test]
    fn single_token_loss_is_neg_log_p() {
        let p = small(3);
        let out = forward(&p, &[2, 5, 6, 4], &[EOS]).unwrap();
        let prob = out.trace.log_probs[0][EOS].exp();
        assert!((out.gen_loss + prob.ln()).abs() < 1e-12);
    }

    #[test]
    fn log_probs_normalized() {
        let p = small(5);
        let out = forward(&p, &[2, 7, 8, 9, 4], &[10, 11, EOS]).unwrap();
        assert_eq!(out.trace.log_probs.len(), 3);
        for lp in &out.trace.log_probs {
            let s: f64 = lp.iter().map(|x| x.exp()).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn out_of_range_token() {
        let p = small(1);
        assert!(matches!(forward(&p, &[2, 12], &[EOS]), Err(RaatError::TokenOutOfRange { id: 12, vocab: 12 })));
        assert!(forward(&p, &[], &[EOS]).is_err());
    }

    #[test]
    fn classification_loss_examples() {
        assert!((classification_loss(&[0.0; 4], NoiseKind::Golden) - 4f64.ln()).abs() < 1e-12);
        assert!(classification_loss(&[30.0, 0.0, 0.0, 0.0], NoiseKind::Golden) < 1e-9);
        let logits = [0.3, -1.2, 2.0, 0.7];
        let permuted = [0.7, 2.0, -1.2, 0.3];
        assert_eq!(
            classification_loss(&logits, NoiseKind::Relevant),
            classification_loss(&permuted, NoiseKind::Irrelevant)
        );
    }

    #[test]
    fn backward_zero_weights_and_linearity() {
        let p = small(7);
        let out = forward(&p, &[2, 5, 6, 4], &[8, EOS]).unwrap();
        let g0 = backward(&p, &out.trace, 0.0, 0.0, NoiseKind::Golden);
        assert_eq!(g0.l2_norm(), 0.0);
        let g1 = backward(&p, &out.trace, 1.0, 0.0, NoiseKind::Golden);
        let mut g2 = backward(&p, &out.trace, 2.0, 0.0, NoiseKind::Golden);
        g2.add_scaled(-2.0, &g1);
        assert!(g2.l2_norm() < 1e-12);
        // unused token rows stay zero
        assert!(g1.embed.row(11).iter().all(|&x| x == 0.0));
    }

    fn objective(p: &ModelParams, input: &[usize], answer: &[usize], wg: f64, wc: f64, label: NoiseKind) -> f64 {
        let out = forward(p, input, answer).unwrap();
        wg * out.gen_loss + wc * classification_loss(&out.cls_logits, label)
    }

    #[test]
    fn gradients_match_central_differences() {
        for seed in 0..5u64 {
            let p = small(seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let mut input = vec![2];
            for _ in 0..rng.gen_range(2..6) {
                input.push(rng.gen_range(5..12));
            }
            input.push(4);
            let answer = vec![rng.gen_range(5..12), rng.gen_range(5..12), EOS];
            let label = NoiseKind::from_index(rng.gen_range(0..4));
            let (wg, wc) = (1.3, 0.7);
            let out = forward(&p, &input, &answer).unwrap();
            let g = backward(&p, &out.trace, wg, wc, label);
            let eps = 1e-5;
            let mut max_rel: f64 = 0.0;
            for ti in 0..7 {
                for i in 0..p.tensors()[ti].len() {
                    let mut plus = p.clone();
                    plus.tensors_mut()[ti][i] += eps;
                    let mut minus = p.clone();
                    minus.tensors_mut()[ti][i] -= eps;
                    let num = (objective(&plus, &input, &answer, wg, wc, label)
                        - objective(&minus, &input, &answer, wg, wc, label))
                        / (2.0 * eps);
                    let ana = g.tensors()[ti][i];
                    max_rel = max_rel.max((ana - num).abs() / num.abs().max(1.0));
                }
            }
            assert!(max_rel < 1e-4, "seed {seed}: {max_rel}");
        }
    }

    #[test]
    fn generate_stops_on_forced_eos() {
        let mut p = ModelParams::zeros(ModelDims { vocab: 8, d: 2, h: 2 });
        p.b2[EOS] = 5.0;
        assert!(generate(&p, &[2, 5, 4], 4).unwrap().is_empty());
        // ties go to the lowest id
        let q = ModelParams::zeros(ModelDims { vocab: 8, d: 2, h: 2 });
        assert_eq!(generate(&q, &[2, 4], 3).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn generate_is_deterministic_and_matches_encode() {
        let p = small(9);
        let prompt = [2, 5, 6, 7, 4];
        assert_eq!(generate(&p, &prompt, 5).unwrap(), generate(&p, &prompt, 5).unwrap());
        let (h, cls) = encode_prompt(&p, &prompt).unwrap();
        let out = forward(&p, &prompt, &[EOS]).unwrap();
        assert_eq!(h, out.trace.last_hidden());
        assert_eq!(cls, out.cls_logits);
    }
}
