//! Beam search over any autoregressive model exposing next-token
//! log-probabilities. Scores are raw sums of log-probabilities, with no
//! length normalization.

use std::cmp::Ordering;

use crate::error::{ensure, Result};

/// An autoregressive decoder seen one step at a time.
pub trait StepModel {
    type State: Clone;

    fn vocab_size(&self) -> usize;
    fn end_token(&self) -> usize;
    /// Log-probabilities of every next token given the decoder state.
    fn log_probs(&self, state: &Self::State) -> Vec<f32>;
    /// State after consuming `token`.
    fn advance(&self, state: &Self::State, token: usize) -> Self::State;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Emitted tokens, END excluded.
    pub tokens: Vec<usize>,
    /// Sum of per-step log-probabilities, including END when emitted.
    pub log_prob: f64,
    /// Whether the sequence stopped at END rather than at `max_len`.
    pub ended: bool,
}

#[derive(Debug, Clone)]
pub struct BeamOutput {
    /// Completed sequences, best first.
    pub hypotheses: Vec<Hypothesis>,
    /// Set when the requested width exceeded the vocabulary and was reduced.
    pub width_clamped: bool,
}

/// Descending score, then ascending token sequence.
pub fn rank(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.log_prob.total_cmp(&a.log_prob).then_with(|| a.tokens.cmp(&b.tokens))
}

struct Partial<S> {
    tokens: Vec<usize>,
    log_prob: f64,
    state: S,
}

/// Keeps the `width` best unfinished prefixes at every step. Every END
/// extension of a kept prefix is recorded as a completed sequence; prefixes
/// still open after `max_len` steps are completed as they stand. Search
/// stops early once no open prefix can beat the `width`-th completed
/// sequence, since extending a prefix never raises its score.
pub fn beam_search<M: StepModel>(
    model: &M,
    init: M::State,
    width: usize,
    max_len: usize,
) -> Result<BeamOutput> {
    ensure!(width >= 1, "beam width must be at least 1");
    ensure!(max_len >= 1, "max_len must be at least 1");
    let vocab = model.vocab_size();
    let end = model.end_token();
    let width_clamped = width > vocab;
    let width = width.min(vocab);

    let mut open = vec![Partial { tokens: Vec::new(), log_prob: 0.0, state: init }];
    let mut done: Vec<Hypothesis> = Vec::new();
    for step in 0..max_len {
        let last_step = step + 1 == max_len;
        let mut candidates: Vec<(Hypothesis, usize)> = Vec::new();
        for (pi, p) in open.iter().enumerate() {
            let lp = model.log_probs(&p.state);
            for (tok, &l) in lp.iter().enumerate() {
                let score = p.log_prob + f64::from(l);
                if tok == end {
                    done.push(Hypothesis { tokens: p.tokens.clone(), log_prob: score, ended: true });
                } else {
                    let mut tokens = p.tokens.clone();
                    tokens.push(tok);
                    candidates.push((Hypothesis { tokens, log_prob: score, ended: false }, pi));
                }
            }
        }
        candidates.sort_by(|a, b| rank(&a.0, &b.0));
        candidates.truncate(width);
        if last_step {
            done.extend(candidates.into_iter().map(|(h, _)| h));
            break;
        }
        open = candidates
            .into_iter()
            .map(|(h, pi)| {
                let state = model.advance(&open[pi].state, *h.tokens.last().unwrap());
                Partial { tokens: h.tokens, log_prob: h.log_prob, state }
            })
            .collect();
        done.sort_by(rank);
        done.truncate(width);
        let best_open = open.iter().map(|p| p.log_prob).fold(f64::NEG_INFINITY, f64::max);
        if open.is_empty() || (done.len() == width && best_open < done[width - 1].log_prob) {
            break;
        }
    }
    done.sort_by(rank);
    done.truncate(width);
    Ok(BeamOutput { hypotheses: done, width_clamped })
}

/// Argmax decoding: emit the most likely token until END or `max_len`.
pub fn greedy<M: StepModel>(model: &M, init: M::State, max_len: usize) -> Result<Hypothesis> {
    ensure!(max_len >= 1, "max_len must be at least 1");
    let end = model.end_token();
    let mut state = init;
    let mut tokens = Vec::new();
    let mut log_prob = 0.0f64;
    for _ in 0..max_len {
        let lp = model.log_probs(&state);
        let tok = crate::numkit::argmax(&lp);
        log_prob += f64::from(lp[tok]);
        if tok == end {
            return Ok(Hypothesis { tokens, log_prob, ended: true });
        }
        state = model.advance(&state, tok);
        tokens.push(tok);
    }
    Ok(Hypothesis { tokens, log_prob, ended: false })
}
