//! The answering model: one LSTM reads the three image vectors and the
//! question, then keeps going to generate the answer, sharing every weight
//! between the encoding and decoding phases.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::captioner::{beam_search, greedy, StepModel};
use crate::error::{ensure, Error, Result};
use crate::numkit::{
    argmax, clip_param_grads, cross_entropy_logits, dropout_mask, log_softmax, lstm_backward, lstm_cell,
    lstm_forward, softmax, Container, LstmCache, LstmParams, LstmState, ParamSet, Rng, Sgd, Tensor, INIT_SCALE,
};
use crate::text::{Vocab, END, UNK};

pub const DEFAULT_DIM: usize = 256;

/// Which image vectors the model sees; disabled ones are fed as zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Modalities {
    pub att: bool,
    pub cap: bool,
    pub know: bool,
}

impl Modalities {
    pub const ALL: Modalities = Modalities { att: true, cap: true, know: true };
    pub const ATT: Modalities = Modalities { att: true, cap: false, know: false };
}

impl Default for Modalities {
    fn default() -> Self {
        Self::ALL
    }
}

impl fmt::Display for Modalities {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [(self.att, "att"), (self.cap, "cap"), (self.know, "know")]
            .into_iter()
            .filter_map(|(on, n)| on.then_some(n))
            .collect();
        f.write_str(&names.join(","))
    }
}

impl From<Modalities> for String {
    fn from(m: Modalities) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for Modalities {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl Modalities {
    /// `att+cap+know` style label, safe in file names.
    pub fn file_label(&self) -> String {
        self.to_string().replace(',', "+")
    }
}

impl FromStr for Modalities {
    type Err = Error;

    /// Comma- or plus-separated subset of `att`, `cap`, `know`.
    fn from_str(s: &str) -> Result<Self> {
        let mut m = Modalities { att: false, cap: false, know: false };
        for part in s.split([',', '+']).map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "att" => m.att = true,
                "cap" => m.cap = true,
                "know" => m.know = true,
                other => return Err(Error::Config(format!("unknown modality `{other}`"))),
            }
        }
        if !(m.att || m.cap || m.know) {
            return Err(Error::Config(format!("no modalities in `{s}`")));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VqaParams {
    /// `[d, attributes]`
    pub w_ea: Tensor,
    /// `[d, caption]`
    pub w_ec: Tensor,
    /// `[d, knowledge]`
    pub w_ek: Tensor,
    /// `[vocab, d]`
    pub w_es: Tensor,
    pub lstm: LstmParams,
    /// `[vocab, d]`
    pub out_w: Tensor,
    pub out_b: Tensor,
}

impl ParamSet for VqaParams {
    fn named(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("w_ea".into(), &self.w_ea),
            ("w_ec".into(), &self.w_ec),
            ("w_ek".into(), &self.w_ek),
            ("w_es".into(), &self.w_es),
            ("lstm.w_x".into(), &self.lstm.w_x),
            ("lstm.w_h".into(), &self.lstm.w_h),
            ("lstm.b".into(), &self.lstm.b),
            ("out_w".into(), &self.out_w),
            ("out_b".into(), &self.out_b),
        ]
    }

    fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![
            ("w_ea".into(), &mut self.w_ea),
            ("w_ec".into(), &mut self.w_ec),
            ("w_ek".into(), &mut self.w_ek),
            ("w_es".into(), &mut self.w_es),
            ("lstm.w_x".into(), &mut self.lstm.w_x),
            ("lstm.w_h".into(), &mut self.lstm.w_h),
            ("lstm.b".into(), &mut self.lstm.b),
            ("out_w".into(), &mut self.out_w),
            ("out_b".into(), &mut self.out_b),
        ]
    }
}

/// Whether a parameter tensor is covered by the L2 penalty (biases are not).
pub fn is_regularized(name: &str) -> bool {
    !matches!(name, "lstm.b" | "out_b")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VqaDims {
    pub attributes: usize,
    pub caption: usize,
    pub knowledge: usize,
    /// Embedding and hidden width (they must agree).
    pub hidden: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VqaModel {
    pub vocab: Vocab,
    pub params: VqaParams,
    pub modalities: Modalities,
}

/// Joint question/answer vocabulary: UNK, END, then words.
pub fn vqa_vocab<'a>(words: impl IntoIterator<Item = &'a str>, min_count: usize) -> Result<Vocab> {
    Vocab::build(words, &[UNK, END], min_count)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub v_att: Vec<f32>,
    pub v_cap: Vec<f32>,
    pub v_know: Vec<f32>,
    pub question: Vec<String>,
    /// Empty at inference time.
    pub answer: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub tokens: Vec<String>,
    pub log_prob: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AnswerConfig {
    /// `None` decodes greedily.
    pub beam_width: Option<usize>,
    pub max_answer_len: usize,
}

impl Default for AnswerConfig {
    fn default() -> Self {
        Self { beam_width: None, max_answer_len: 5 }
    }
}

pub enum Mode<'a> {
    Infer,
    /// Samples fresh dropout masks from `rng`.
    Train { rng: &'a mut Rng, dropout: f32 },
}

/// Per-step inverted-dropout masks for one episode.
#[derive(Debug, Clone)]
pub struct DropoutMasks {
    /// One per LSTM input step.
    pub input: Vec<Vec<f32>>,
    /// One per prediction term.
    pub output: Vec<Vec<f32>>,
}

#[derive(Debug, Clone)]
pub struct EpisodeForward {
    /// Answer distributions, one per prediction term (`answer.len() + 1`).
    pub distributions: Vec<Vec<f32>>,
    pub log_likelihood: f64,
    /// Prediction terms whose argmax equals the target.
    pub correct: usize,
}

impl VqaModel {
    pub fn new(vocab: Vocab, dims: VqaDims, modalities: Modalities, rng: &mut Rng) -> Result<Self> {
        ensure!(vocab.contains(END), "answer vocabulary needs {END}");
        let d = dims.hidden;
        let v = vocab.len();
        let params = VqaParams {
            w_ea: Tensor::uniform(&[d, dims.attributes], INIT_SCALE, rng),
            w_ec: Tensor::uniform(&[d, dims.caption], INIT_SCALE, rng),
            w_ek: Tensor::uniform(&[d, dims.knowledge], INIT_SCALE, rng),
            w_es: Tensor::uniform(&[v, d], INIT_SCALE, rng),
            lstm: LstmParams::init(d, d, INIT_SCALE, rng),
            out_w: Tensor::uniform(&[v, d], INIT_SCALE, rng),
            out_b: Tensor::zeros(&[v]),
        };
        Ok(Self { vocab, params, modalities })
    }

    pub fn dims(&self) -> VqaDims {
        VqaDims {
            attributes: self.params.w_ea.cols(),
            caption: self.params.w_ec.cols(),
            knowledge: self.params.w_ek.cols(),
            hidden: self.params.lstm.hidden(),
        }
    }

    pub fn end_id(&self) -> usize {
        self.vocab.id(END).expect("END in answer vocabulary")
    }

    fn logits(&self, h: &[f32]) -> Vec<f32> {
        let mut z = self.params.out_w.matvec(h).expect("hidden width matches");
        for (l, b) in z.iter_mut().zip(self.params.out_b.data()) {
            *l += b;
        }
        z
    }

    pub fn save(&self, path: impl AsRef<Path>, extra_meta: &[(&str, String)]) -> Result<()> {
        let path = path.as_ref();
        let mut c = Container::new();
        let dims = self.dims();
        c.meta.insert("kind".into(), "vqalstm".into());
        c.meta.insert("d_e".into(), dims.hidden.to_string());
        c.meta.insert("d_h".into(), dims.hidden.to_string());
        c.meta.insert("vocab_hash".into(), self.vocab.hash());
        c.meta.insert("modalities".into(), self.modalities.to_string());
        for (k, v) in extra_meta {
            c.meta.insert(k.to_string(), v.clone());
        }
        c.put_params("", &self.params);
        c.save(path)?;
        self.vocab.save(path.with_extension("vocab"))
    }

    /// Loads a checkpoint and its vocabulary sidecar, refusing a sidecar
    /// whose hash differs from the one recorded at save time.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let vocab = Vocab::load(path.with_extension("vocab"))?;
        Self::load_with_vocab(path, vocab)
    }

    pub fn load_with_vocab(path: impl AsRef<Path>, vocab: Vocab) -> Result<Self> {
        let c = Container::load(path)?;
        let expected = c.meta_str("vocab_hash")?;
        if expected != vocab.hash() {
            return Err(Error::VocabMismatch { expected: expected.into(), found: vocab.hash() });
        }
        let d: usize = c.meta_parse("d_h")?;
        let mut params = VqaParams {
            w_ea: c.require("w_ea")?.clone(),
            w_ec: c.require("w_ec")?.clone(),
            w_ek: c.require("w_ek")?.clone(),
            w_es: c.require("w_es")?.clone(),
            lstm: LstmParams::zeros(d, d),
            out_w: c.require("out_w")?.clone(),
            out_b: c.require("out_b")?.clone(),
        };
        c.take_params("", &mut params)?;
        ensure!(params.w_es.rows() == vocab.len(), "embedding rows do not match the vocabulary");
        Ok(Self { vocab, params, modalities: c.meta_str("modalities")?.parse()? })
    }
}

/// `W_ea·v_att`, `W_ec·v_cap`, `W_ek·v_know`, with disabled modalities
/// replaced by zero vectors.
pub fn embed_inputs(model: &VqaModel, v_att: &[f32], v_cap: &[f32], v_know: &[f32]) -> Result<[Vec<f32>; 3]> {
    let p = &model.params;
    let d = model.dims().hidden;
    let m = model.modalities;
    let embed = |on: bool, w: &Tensor, v: &[f32], what: &str| -> Result<Vec<f32>> {
        ensure!(v.len() == w.cols(), "{what} vector has length {}, model expects {}", v.len(), w.cols());
        if on { w.matvec(v) } else { Ok(vec![0.0; d]) }
    };
    Ok([
        embed(m.att, &p.w_ea, v_att, "attribute")?,
        embed(m.cap, &p.w_ec, v_cap, "caption")?,
        embed(m.know, &p.w_ek, v_know, "knowledge")?,
    ])
}

fn encode_ids(model: &VqaModel, tokens: &[String], what: &str) -> Result<Vec<usize>> {
    model.vocab.encode(tokens).map_err(|e| Error::contract(format!("{what}: {e}")))
}

/// Samples the masks a training pass over `episode` needs.
pub fn sample_masks(model: &VqaModel, episode: &Episode, rng: &mut Rng, p_drop: f32) -> Result<DropoutMasks> {
    let d = model.dims().hidden;
    let steps = 3 + episode.question.len() + episode.answer.len();
    let terms = episode.answer.len() + 1;
    Ok(DropoutMasks {
        input: (0..steps).map(|_| dropout_mask(rng, p_drop, d)).collect::<Result<_>>()?,
        output: (0..terms).map(|_| dropout_mask(rng, p_drop, d)).collect::<Result<_>>()?,
    })
}

/// Unrolls the LSTM over `[x_att, x_cap, x_know, q…, a…]` and scores the
/// answer followed by END.
pub fn forward_episode(model: &VqaModel, episode: &Episode, mode: Mode<'_>) -> Result<EpisodeForward> {
    let masks = match mode {
        Mode::Infer => None,
        Mode::Train { rng, dropout } => Some(sample_masks(model, episode, rng, dropout)?),
    };
    episode_pass(model, episode, masks.as_ref(), None)
}

fn apply_mask(v: &mut [f32], mask: Option<&Vec<f32>>) {
    if let Some(m) = mask {
        for (a, b) in v.iter_mut().zip(m) {
            *a *= b;
        }
    }
}

/// Forward pass, plus backpropagation into `grads` when given.
pub fn episode_pass(
    model: &VqaModel,
    episode: &Episode,
    masks: Option<&DropoutMasks>,
    grads: Option<&mut VqaParams>,
) -> Result<EpisodeForward> {
    ensure!(!episode.question.is_empty(), "episode has an empty question");
    let p = &model.params;
    let d = model.dims().hidden;
    let q = encode_ids(model, &episode.question, "question")?;
    let a = encode_ids(model, &episode.answer, "answer")?;
    let n = q.len();

    let mut inputs: Vec<Vec<f32>> = embed_inputs(model, &episode.v_att, &episode.v_cap, &episode.v_know)?.into();
    inputs.extend(q.iter().chain(&a).map(|&w| p.w_es.row(w).to_vec()));
    for (t, x) in inputs.iter_mut().enumerate() {
        apply_mask(x, masks.map(|m| &m.input[t]));
    }

    let mut state = LstmState::zeros(d);
    let mut caches: Vec<LstmCache> = Vec::with_capacity(inputs.len());
    let mut hs = Vec::with_capacity(inputs.len());
    for x in &inputs {
        let (s, cache) = lstm_forward(&p.lstm, x, &state)?;
        hs.push(s.h.clone());
        caches.push(cache);
        state = s;
    }

    // term j is predicted from the state after input 3 + n - 1 + j
    let mut targets = a.clone();
    targets.push(model.end_id());
    let first = 3 + n - 1;
    let mut out = EpisodeForward { distributions: Vec::with_capacity(targets.len()), log_likelihood: 0.0, correct: 0 };
    let mut d_logits = Vec::with_capacity(targets.len());
    let mut dropped_h = Vec::with_capacity(targets.len());
    for (j, &target) in targets.iter().enumerate() {
        let mut h = hs[first + j].clone();
        apply_mask(&mut h, masks.map(|m| &m.output[j]));
        let logits = model.logits(&h);
        out.log_likelihood -= cross_entropy_logits(&logits, target)?;
        let probs = softmax(&logits)?;
        if argmax(&probs) == target {
            out.correct += 1;
        }
        let mut dz = probs.clone();
        dz[target] -= 1.0;
        d_logits.push(dz);
        dropped_h.push(h);
        out.distributions.push(probs);
    }

    let Some(g) = grads else { return Ok(out) };
    let mut d_h = vec![vec![0.0f32; d]; inputs.len()];
    for (j, dz) in d_logits.iter().enumerate() {
        g.out_w.add_outer(dz, &dropped_h[j]);
        for (b, v) in g.out_b.data_mut().iter_mut().zip(dz) {
            *b += v;
        }
        let mut dh = p.out_w.matvec_t(dz)?;
        apply_mask(&mut dh, masks.map(|m| &m.output[j]));
        d_h[first + j] = dh;
    }
    let mut dh_next = vec![0.0; d];
    let mut dc_next = vec![0.0; d];
    let modality_inputs = [
        (model.modalities.att, &episode.v_att),
        (model.modalities.cap, &episode.v_cap),
        (model.modalities.know, &episode.v_know),
    ];
    for t in (0..inputs.len()).rev() {
        let dh: Vec<f32> = d_h[t].iter().zip(&dh_next).map(|(x, y)| x + y).collect();
        let step = lstm_backward(&p.lstm, &caches[t], &dh, &dc_next, &mut g.lstm);
        let mut dx = step.dx;
        apply_mask(&mut dx, masks.map(|m| &m.input[t]));
        match t {
            0..=2 => {
                let (on, v) = modality_inputs[t];
                if on {
                    let w = [&mut g.w_ea, &mut g.w_ec, &mut g.w_ek];
                    let target = w.into_iter().nth(t).expect("three modalities");
                    target.add_outer(&dx, v);
                }
            }
            _ => {
                let w = if t - 3 < n { q[t - 3] } else { a[t - 3 - n] };
                for (e, v) in g.w_es.row_mut(w).iter_mut().zip(&dx) {
                    *e += v;
                }
            }
        }
        dh_next = step.dh_prev;
        dc_next = step.dc_prev;
    }
    Ok(out)
}

/// `-(1/N)·Σ log-likelihood + λ·Σ‖W‖²` over weight matrices. Gradients are
/// written to `grads` when given.
pub fn training_cost(
    model: &VqaModel,
    batch: &[Episode],
    masks: Option<&[DropoutMasks]>,
    lambda: f32,
    mut grads: Option<&mut VqaParams>,
) -> Result<f64> {
    ensure!(!batch.is_empty(), "training_cost needs at least one episode");
    ensure!(lambda >= 0.0, "regularization weight must be nonnegative, got {lambda}");
    let mut nll = 0.0f64;
    for (i, ep) in batch.iter().enumerate() {
        let m = masks.map(|ms| &ms[i]);
        nll -= episode_pass(model, ep, m, grads.as_deref_mut())?.log_likelihood;
    }
    let n = batch.len() as f64;
    let mut reg = 0.0f64;
    for (name, t) in model.params.named() {
        if is_regularized(&name) {
            reg += t.sum_sq();
        }
    }
    if let Some(g) = grads {
        let inv = (1.0 / n) as f32;
        let params = model.params.named();
        for ((name, gt), (_, pt)) in g.named_mut().into_iter().zip(params) {
            gt.scale(inv);
            if is_regularized(&name) && lambda > 0.0 {
                gt.axpy(2.0 * lambda, pt);
            }
        }
    }
    Ok(nll / n + f64::from(lambda) * reg)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct VqaTrainConfig {
    pub epochs: usize,
    pub lr: f32,
    pub momentum: f32,
    pub batch_size: usize,
    pub clip: f32,
    pub dropout: f32,
    pub lambda: f32,
}

impl Default for VqaTrainConfig {
    fn default() -> Self {
        Self { epochs: 30, lr: 0.001, momentum: 0.9, batch_size: 100, clip: 5.0, dropout: 0.5, lambda: 1e-5 }
    }
}

#[derive(Debug, Clone)]
pub struct VqaTrainReport {
    /// Mean training cost of every epoch.
    pub losses: Vec<f32>,
}

/// Mini-batch SGD over shuffled episodes. `on_epoch` runs after every
/// epoch (for checkpointing) with the zero-based epoch index.
pub fn train(
    model: &mut VqaModel,
    episodes: &[Episode],
    config: &VqaTrainConfig,
    rng: &mut Rng,
    mut on_epoch: impl FnMut(usize, &VqaModel) -> Result<()>,
) -> Result<VqaTrainReport> {
    ensure!(!episodes.is_empty(), "VQA training set is empty");
    for ep in episodes {
        ensure!(!ep.answer.is_empty(), "training episode with an empty answer");
    }
    let mut opt = Sgd::new(config.momentum);
    let mut order: Vec<usize> = (0..episodes.len()).collect();
    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0f64;
        for chunk in order.chunks(config.batch_size.max(1)) {
            let batch: Vec<Episode> = chunk.iter().map(|&i| episodes[i].clone()).collect();
            let masks = if config.dropout > 0.0 {
                Some(batch.iter().map(|ep| sample_masks(model, ep, rng, config.dropout)).collect::<Result<Vec<_>>>()?)
            } else {
                None
            };
            let mut grads = model.params.zeros_like();
            let cost = training_cost(model, &batch, masks.as_deref(), config.lambda, Some(&mut grads))?;
            total += cost * batch.len() as f64;
            clip_param_grads(&mut grads, config.clip)?;
            opt.step(&mut model.params, &grads, config.lr)?;
        }
        ensure!(model.params.all_finite(), "VQA training diverged at epoch {epoch}");
        losses.push((total / episodes.len() as f64) as f32);
        on_epoch(epoch, model)?;
    }
    Ok(VqaTrainReport { losses })
}

/// Fraction of prediction terms (answer words and END) whose argmax under
/// teacher forcing equals the target.
pub fn teacher_forced_accuracy(model: &VqaModel, episodes: &[Episode]) -> Result<f32> {
    let (mut correct, mut total) = (0, 0);
    for ep in episodes {
        let f = episode_pass(model, ep, None, None)?;
        correct += f.correct;
        total += f.distributions.len();
    }
    ensure!(total > 0, "no episodes to score");
    Ok(correct as f32 / total as f32)
}

/// Decoder view of a model after it has read the image and question.
struct AnswerDecoder<'a>(&'a VqaModel);

impl StepModel for AnswerDecoder<'_> {
    type State = LstmState;

    fn vocab_size(&self) -> usize {
        self.0.vocab.len()
    }

    fn end_token(&self) -> usize {
        self.0.end_id()
    }

    fn log_probs(&self, state: &LstmState) -> Vec<f32> {
        log_softmax(&self.0.logits(&state.h)).expect("nonempty vocabulary")
    }

    fn advance(&self, state: &LstmState, token: usize) -> LstmState {
        lstm_cell(&self.0.params.lstm, self.0.params.w_es.row(token), state).expect("shapes checked")
    }
}

/// State after the three image steps and the question.
pub fn encode_question(model: &VqaModel, v_att: &[f32], v_cap: &[f32], v_know: &[f32], question: &[String]) -> Result<LstmState> {
    ensure!(!question.is_empty(), "empty question");
    let q = encode_ids(model, question, "question")?;
    let mut state = LstmState::zeros(model.dims().hidden);
    for x in embed_inputs(model, v_att, v_cap, v_know)? {
        state = lstm_cell(&model.params.lstm, &x, &state)?;
    }
    for &w in &q {
        state = lstm_cell(&model.params.lstm, model.params.w_es.row(w), &state)?;
    }
    Ok(state)
}

/// Generates an answer until END or `max_answer_len` words.
pub fn answer(
    model: &VqaModel,
    v_att: &[f32],
    v_cap: &[f32],
    v_know: &[f32],
    question: &[String],
    config: &AnswerConfig,
) -> Result<DecodeResult> {
    ensure!(config.max_answer_len >= 1, "max_answer_len must be at least 1");
    let init = encode_question(model, v_att, v_cap, v_know, question)?;
    let decoder = AnswerDecoder(model);
    let best = match config.beam_width {
        None => greedy(&decoder, init, config.max_answer_len)?,
        Some(w) => beam_search(&decoder, init, w, config.max_answer_len)?
            .hypotheses
            .into_iter()
            .next()
            .expect("beam search returns at least one sequence"),
    };
    Ok(DecodeResult { tokens: model.vocab.decode(&best.tokens), log_prob: best.log_prob })
}

/// Debug rewiring that makes END certain at every step, so every answer is
/// empty with log-probability 0.
pub fn force_end(model: &mut VqaModel) {
    model.params.out_w.fill(0.0);
    model.params.out_b.fill(-1e4);
    let end = model.end_id();
    model.params.out_b.data_mut()[end] = 0.0;
}

/// Every completed sequence the beam kept, best first.
pub fn answer_beam(
    model: &VqaModel,
    episode: &Episode,
    width: usize,
    max_answer_len: usize,
) -> Result<Vec<(Vec<usize>, f64)>> {
    let init = encode_question(model, &episode.v_att, &episode.v_cap, &episode.v_know, &episode.question)?;
    let out = beam_search(&AnswerDecoder(model), init, width, max_answer_len)?;
    Ok(out.hypotheses.into_iter().map(|h| (h.tokens, h.log_prob)).collect())
}

/// Next-token log-probabilities after the question and `prefix` (answer
/// ids). Used by exhaustive decoding oracles.
pub fn next_log_probs(model: &VqaModel, episode: &Episode, prefix: &[usize]) -> Result<Vec<f32>> {
    let mut state = encode_question(model, &episode.v_att, &episode.v_cap, &episode.v_know, &episode.question)?;
    let decoder = AnswerDecoder(model);
    for &t in prefix {
        state = decoder.advance(&state, t);
    }
    Ok(decoder.log_probs(&state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::finite_diff_check;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn tiny(seed: u64, d: usize) -> (VqaModel, Episode) {
        let vocab = vqa_vocab(["what", "is", "it", "dog", "cat", "red"], 1).unwrap();
        let dims = VqaDims { attributes: 3, caption: 4, knowledge: 5, hidden: d };
        let mut rng = Rng::new(seed);
        let model = VqaModel::new(vocab, dims, Modalities::ALL, &mut rng).unwrap();
        let ep = Episode {
            v_att: (0..3).map(|_| rng.uniform(0.0, 1.0)).collect(),
            v_cap: (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            v_know: (0..5).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            question: words("what is"),
            answer: words("red dog"),
        };
        (model, ep)
    }

    #[test]
    fn modalities_parse_and_print() {
        assert_eq!("att,cap,know".parse::<Modalities>().unwrap(), Modalities::ALL);
        assert_eq!("att".parse::<Modalities>().unwrap(), Modalities::ATT);
        let m: Modalities = "cap+know".parse().unwrap();
        assert_eq!(m.to_string(), "cap,know");
        assert!("".parse::<Modalities>().is_err());
        assert!("att,depth".parse::<Modalities>().is_err());
    }

    #[test]
    fn embeddings_are_plain_matrix_products() {
        let (model, ep) = tiny(17, 4);
        let [xa, xc, xk] = embed_inputs(&model, &ep.v_att, &ep.v_cap, &ep.v_know).unwrap();
        let naive = |w: &Tensor, v: &[f32]| -> Vec<f32> {
            (0..w.rows()).map(|r| (0..w.cols()).map(|c| w.data()[r * w.cols() + c] * v[c]).sum()).collect()
        };
        for (got, want) in [(xa, naive(&model.params.w_ea, &ep.v_att)), (xc, naive(&model.params.w_ec, &ep.v_cap)), (xk, naive(&model.params.w_ek, &ep.v_know))] {
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-6);
            }
        }
        let [_, _, zero] = embed_inputs(&model, &ep.v_att, &ep.v_cap, &[0.0; 5]).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        let [e1, _, _] = embed_inputs(&model, &[1.0, 0.0, 0.0], &ep.v_cap, &ep.v_know).unwrap();
        let col: Vec<f32> = (0..4).map(|r| model.params.w_ea.data()[r * 3]).collect();
        assert_eq!(e1, col);
        assert!(embed_inputs(&model, &[0.0; 2], &ep.v_cap, &ep.v_know).is_err());
    }

    #[test]
    fn forward_matches_step_by_step_replay() {
        let (model, ep) = tiny(19, 4);
        let f = forward_episode(&model, &ep, Mode::Infer).unwrap();
        assert_eq!(f.distributions.len(), ep.answer.len() + 1);
        // straight-line replay with the raw cell and softmax
        let p = &model.params;
        let mut s = LstmState::zeros(4);
        for (w, v) in [(&p.w_ea, &ep.v_att), (&p.w_ec, &ep.v_cap), (&p.w_ek, &ep.v_know)] {
            s = lstm_cell(&p.lstm, &w.matvec(v).unwrap(), &s).unwrap();
        }
        for t in &ep.question {
            s = lstm_cell(&p.lstm, p.w_es.row(model.vocab.id(t).unwrap()), &s).unwrap();
        }
        let mut ll = 0.0f64;
        let mut targets: Vec<usize> = ep.answer.iter().map(|t| model.vocab.id(t).unwrap()).collect();
        targets.push(model.end_id());
        for (j, &target) in targets.iter().enumerate() {
            let mut z = p.out_w.matvec(&s.h).unwrap();
            for (a, b) in z.iter_mut().zip(p.out_b.data()) {
                *a += b;
            }
            let probs = softmax(&z).unwrap();
            ll += f64::from(probs[target]).ln();
            if j < ep.answer.len() {
                s = lstm_cell(&p.lstm, p.w_es.row(target), &s).unwrap();
            }
        }
        assert!((f.log_likelihood - ll).abs() < 1e-5, "{} vs {ll}", f.log_likelihood);
        for dist in &f.distributions {
            assert!((dist.iter().map(|&x| f64::from(x)).sum::<f64>() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn certain_end_has_zero_log_likelihood() {
        let (mut model, mut ep) = tiny(3, 4);
        force_end(&mut model);
        ep.answer.clear();
        let f = forward_episode(&model, &ep, Mode::Infer).unwrap();
        assert_eq!(f.log_likelihood, 0.0);
        let out = answer(&model, &ep.v_att, &ep.v_cap, &ep.v_know, &ep.question, &AnswerConfig::default()).unwrap();
        assert!(out.tokens.is_empty());
    }

    #[test]
    fn cost_reductions() {
        let (model, ep) = tiny(5, 4);
        let f = forward_episode(&model, &ep, Mode::Infer).unwrap();
        let cost = training_cost(&model, std::slice::from_ref(&ep), None, 0.0, None).unwrap();
        assert_eq!(cost, -f.log_likelihood);

        let mut zero = model.clone();
        for (_, t) in zero.params.named_mut() {
            t.fill(0.0);
        }
        let c0 = training_cost(&zero, std::slice::from_ref(&ep), None, 0.0, None).unwrap();
        let c1 = training_cost(&zero, std::slice::from_ref(&ep), None, 1.0, None).unwrap();
        assert_eq!(c0, c1);

        let mut last = cost;
        for lambda in [1e-4, 1e-2, 1.0] {
            let c = training_cost(&model, std::slice::from_ref(&ep), None, lambda, None).unwrap();
            assert!(c >= last);
            last = c;
        }
    }

    #[test]
    fn cost_gradients_match_finite_differences() {
        let (mut model, ep) = tiny(11, 4);
        model.params.randomize(0.8, &mut Rng::new(12));
        let mut ep2 = ep.clone();
        ep2.question = words("is it");
        ep2.answer = words("cat");
        let batch = vec![ep, ep2];
        let mut grads = model.params.zeros_like();
        training_cost(&model, &batch, None, 1e-2, Some(&mut grads)).unwrap();
        let report = finite_diff_check(
            &model.params,
            &grads,
            |p| {
                let m = VqaModel { params: p.clone(), ..model.clone() };
                training_cost(&m, &batch, None, 1e-2, None)
            },
            0.1,
            &mut Rng::new(4),
        )
        .unwrap();
        assert!(report.passes(1e-2), "{report:?}");
    }

    #[test]
    fn dropout_gradients_match_finite_differences_for_fixed_masks() {
        let (mut model, ep) = tiny(13, 4);
        model.params.randomize(0.8, &mut Rng::new(15));
        let masks = vec![sample_masks(&model, &ep, &mut Rng::new(1), 0.3).unwrap()];
        let batch = vec![ep];
        let mut grads = model.params.zeros_like();
        training_cost(&model, &batch, Some(&masks), 0.0, Some(&mut grads)).unwrap();
        let report = finite_diff_check(
            &model.params,
            &grads,
            |p| {
                let m = VqaModel { params: p.clone(), ..model.clone() };
                training_cost(&m, &batch, Some(&masks), 0.0, None)
            },
            0.1,
            &mut Rng::new(4),
        )
        .unwrap();
        assert!(report.passes(1e-2), "{report:?}");
    }

    #[test]
    fn zeroing_knowledge_only_changes_the_knowledge_step() {
        let (model, ep) = tiny(6, 4);
        let a = embed_inputs(&model, &ep.v_att, &ep.v_cap, &ep.v_know).unwrap();
        let b = embed_inputs(&model, &ep.v_att, &ep.v_cap, &[0.0; 5]).unwrap();
        assert_eq!(a[0], b[0]);
        assert_eq!(a[1], b[1]);
        assert_ne!(a[2], b[2]);
    }

    #[test]
    fn disabled_modalities_feed_zero_steps() {
        let (mut model, ep) = tiny(7, 4);
        model.modalities = Modalities::ATT;
        let [_, c, k] = embed_inputs(&model, &ep.v_att, &ep.v_cap, &ep.v_know).unwrap();
        assert!(c.iter().chain(&k).all(|&v| v == 0.0));
    }

    #[test]
    fn checkpoint_round_trip_and_vocab_guard() {
        let dir = tempfile::tempdir().unwrap();
        let (model, _) = tiny(8, 4);
        let a = dir.path().join("a.ama");
        model.save(&a, &[("seed", "8".into())]).unwrap();
        let back = VqaModel::load(&a).unwrap();
        assert_eq!(back, model);
        let b = dir.path().join("b.ama");
        back.save(&b, &[("seed", "8".into())]).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let other = vqa_vocab(["x"], 1).unwrap();
        assert!(matches!(VqaModel::load_with_vocab(&a, other), Err(Error::VocabMismatch { .. })));
    }
}
