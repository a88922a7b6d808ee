//! Attribute-conditioned caption generation.
//!
//! The attribute vector enters once, projected to the word-embedding width,
//! as the first LSTM input; a START token follows and every later step
//! consumes the previous word. Captions are decoded with beam search and
//! the hidden states that produced their last words are averaged into a
//! caption-set encoding.

pub mod beam;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::numkit::{
    argmax, clip_param_grads, cross_entropy_logits, log_softmax, lstm_backward, lstm_cell, lstm_forward, softmax,
    Container, LstmCache, LstmParams, LstmState, ParamSet, Rng, Sgd, Tensor, INIT_SCALE,
};
use crate::text::{Vocab, END, START, UNK};

pub use beam::{beam_search, greedy, BeamOutput, Hypothesis, StepModel};

/// Captions generated per image.
pub const CAPTIONS_PER_IMAGE: usize = 5;
pub const DEFAULT_HIDDEN: usize = 512;
pub const DEFAULT_EMBED: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct CaptionParams {
    /// `[embed, attributes]`
    pub att_proj: Tensor,
    /// `[vocab, embed]`
    pub embed: Tensor,
    pub lstm: LstmParams,
    /// `[vocab, hidden]`
    pub out_w: Tensor,
    pub out_b: Tensor,
}

impl ParamSet for CaptionParams {
    fn named(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("att_proj".into(), &self.att_proj),
            ("embed".into(), &self.embed),
            ("lstm.w_x".into(), &self.lstm.w_x),
            ("lstm.w_h".into(), &self.lstm.w_h),
            ("lstm.b".into(), &self.lstm.b),
            ("out_w".into(), &self.out_w),
            ("out_b".into(), &self.out_b),
        ]
    }

    fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![
            ("att_proj".into(), &mut self.att_proj),
            ("embed".into(), &mut self.embed),
            ("lstm.w_x".into(), &mut self.lstm.w_x),
            ("lstm.w_h".into(), &mut self.lstm.w_h),
            ("lstm.b".into(), &mut self.lstm.b),
            ("out_w".into(), &mut self.out_w),
            ("out_b".into(), &mut self.out_b),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptionModel {
    pub vocab: Vocab,
    pub params: CaptionParams,
}

/// Vocabulary layout used by caption models: UNK, START, END, then words.
pub fn caption_vocab<'a>(words: impl IntoIterator<Item = &'a str>, min_count: usize) -> Result<Vocab> {
    Vocab::build(words, &[UNK, START, END], min_count)
}

impl CaptionModel {
    pub fn new(vocab: Vocab, attributes: usize, embed: usize, hidden: usize, rng: &mut Rng) -> Result<Self> {
        ensure!(vocab.contains(END) && vocab.contains(START), "caption vocabulary needs START and END");
        let v = vocab.len();
        let params = CaptionParams {
            att_proj: Tensor::uniform(&[embed, attributes], INIT_SCALE, rng),
            embed: Tensor::uniform(&[v, embed], INIT_SCALE, rng),
            lstm: LstmParams::init(embed, hidden, INIT_SCALE, rng),
            out_w: Tensor::uniform(&[v, hidden], INIT_SCALE, rng),
            out_b: Tensor::zeros(&[v]),
        };
        Ok(Self { vocab, params })
    }

    pub fn hidden_size(&self) -> usize {
        self.params.lstm.hidden()
    }

    pub fn attributes(&self) -> usize {
        self.params.att_proj.cols()
    }

    pub fn end_id(&self) -> usize {
        self.vocab.id(END).expect("END in caption vocabulary")
    }

    fn start_id(&self) -> usize {
        self.vocab.id(START).expect("START in caption vocabulary")
    }

    fn check_att(&self, v_att: &[f32]) -> Result<()> {
        ensure!(
            v_att.len() == self.attributes(),
            "attribute vector has length {}, caption model expects {}",
            v_att.len(),
            self.attributes()
        );
        Ok(())
    }

    /// Decoder state after the attribute step and the START token; its
    /// output distribution predicts the first word.
    pub fn initial_state(&self, v_att: &[f32]) -> Result<LstmState> {
        self.check_att(v_att)?;
        let x0 = self.params.att_proj.matvec(v_att)?;
        let s = lstm_cell(&self.params.lstm, &x0, &LstmState::zeros(self.hidden_size()))?;
        lstm_cell(&self.params.lstm, self.params.embed.row(self.start_id()), &s)
    }

    pub fn logits(&self, h: &[f32]) -> Vec<f32> {
        let mut z = self.params.out_w.matvec(h).expect("hidden width matches");
        for (l, b) in z.iter_mut().zip(self.params.out_b.data()) {
            *l += b;
        }
        z
    }

    /// Hidden state from which the caption's last word was emitted
    /// (for an empty caption, the state that emitted END).
    pub fn final_hidden(&self, v_att: &[f32], ids: &[usize]) -> Result<Vec<f32>> {
        let mut s = self.initial_state(v_att)?;
        for &w in ids.iter().take(ids.len().saturating_sub(1)) {
            s = lstm_cell(&self.params.lstm, self.params.embed.row(w), &s)?;
        }
        Ok(s.h)
    }

    pub fn save(&self, path: impl AsRef<Path>, extra_meta: &[(&str, String)]) -> Result<()> {
        let path = path.as_ref();
        let mut c = Container::new();
        c.meta.insert("kind".into(), "captioner".into());
        c.meta.insert("vocab_hash".into(), self.vocab.hash());
        for (k, v) in extra_meta {
            c.meta.insert(k.to_string(), v.clone());
        }
        c.put_params("", &self.params);
        c.save(path)?;
        self.vocab.save(vocab_sidecar(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let c = Container::load(path)?;
        let vocab = Vocab::load(vocab_sidecar(path))?;
        let expected = c.meta_str("vocab_hash")?;
        if expected != vocab.hash() {
            return Err(Error::VocabMismatch { expected: expected.into(), found: vocab.hash() });
        }
        let embed = c.require("embed")?;
        let hidden = c.require("lstm.w_h")?.cols();
        let mut params = CaptionParams {
            att_proj: c.require("att_proj")?.clone(),
            embed: embed.clone(),
            lstm: LstmParams::zeros(embed.cols(), hidden),
            out_w: c.require("out_w")?.clone(),
            out_b: c.require("out_b")?.clone(),
        };
        c.take_params("", &mut params)?;
        Ok(Self { vocab, params })
    }
}

pub fn vocab_sidecar(path: &Path) -> PathBuf {
    path.with_extension("vocab")
}

impl StepModel for CaptionModel {
    type State = LstmState;

    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn end_token(&self) -> usize {
        self.end_id()
    }

    fn log_probs(&self, state: &LstmState) -> Vec<f32> {
        log_softmax(&self.logits(&state.h)).expect("nonempty vocabulary")
    }

    fn advance(&self, state: &LstmState, token: usize) -> LstmState {
        lstm_cell(&self.params.lstm, self.params.embed.row(token), state).expect("shapes checked")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Caption {
    pub tokens: Vec<String>,
    pub ids: Vec<usize>,
    pub log_prob: f32,
    pub final_hidden: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptionSetEncoding {
    pub captions: Vec<Caption>,
    pub v_cap: Vec<f32>,
    /// Fewer distinct sequences than needed were found; the best one was
    /// repeated to fill the set.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    pub beam_width: usize,
    pub max_len: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self { beam_width: CAPTIONS_PER_IMAGE, max_len: 16 }
    }
}

/// Beam search from an attribute vector.
pub fn decode(model: &CaptionModel, v_att: &[f32], width: usize, max_len: usize) -> Result<BeamOutput> {
    let init = model.initial_state(v_att)?;
    beam_search(model, init, width, max_len)
}

/// Componentwise mean of equal-length vectors.
pub fn mean_pool(vectors: &[Vec<f32>]) -> Vec<f32> {
    let n = vectors.len() as f64;
    let dim = vectors.first().map_or(0, Vec::len);
    (0..dim)
        .map(|k| (vectors.iter().map(|v| f64::from(v[k])).sum::<f64>() / n) as f32)
        .collect()
}

/// Decodes the five best captions and averages their final hidden states.
pub fn generate_caption_set(model: &CaptionModel, v_att: &[f32], cfg: &DecodeConfig) -> Result<CaptionSetEncoding> {
    let width = cfg.beam_width.max(CAPTIONS_PER_IMAGE);
    let out = decode(model, v_att, width, cfg.max_len)?;
    let mut hyps: Vec<Hypothesis> = out.hypotheses.into_iter().take(CAPTIONS_PER_IMAGE).collect();
    ensure!(!hyps.is_empty(), "beam search produced no captions");
    let degenerate = hyps.len() < CAPTIONS_PER_IMAGE;
    while hyps.len() < CAPTIONS_PER_IMAGE {
        hyps.push(hyps[0].clone());
    }
    let captions = hyps
        .into_iter()
        .map(|h| {
            Ok(Caption {
                tokens: model.vocab.decode(&h.tokens),
                final_hidden: model.final_hidden(v_att, &h.tokens)?,
                ids: h.tokens,
                log_prob: h.log_prob as f32,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let hiddens: Vec<Vec<f32>> = captions.iter().map(|c| c.final_hidden.clone()).collect();
    Ok(CaptionSetEncoding { v_cap: mean_pool(&hiddens), captions, degenerate })
}

/// Teacher-forced loss of one caption.
#[derive(Debug, Clone, Default)]
pub struct SequenceLoss {
    /// Sum of per-step cross-entropies.
    pub total: f64,
    pub per_step: Vec<f32>,
    /// Steps whose argmax equalled the target.
    pub correct: usize,
}

/// Cross-entropy of predicting `ids` followed by END, with gradients
/// accumulated into `grads` when given.
pub fn sequence_loss(
    model: &CaptionModel,
    v_att: &[f32],
    ids: &[usize],
    grads: Option<&mut CaptionParams>,
) -> Result<SequenceLoss> {
    model.check_att(v_att)?;
    let p = &model.params;
    let hidden = model.hidden_size();
    let mut inputs: Vec<Vec<f32>> = vec![p.att_proj.matvec(v_att)?, p.embed.row(model.start_id()).to_vec()];
    inputs.extend(ids.iter().map(|&w| p.embed.row(w).to_vec()));
    let mut targets = ids.to_vec();
    targets.push(model.end_id());

    let mut state = LstmState::zeros(hidden);
    let mut caches: Vec<LstmCache> = Vec::with_capacity(inputs.len());
    let mut hs = Vec::with_capacity(inputs.len());
    for x in &inputs {
        let (s, cache) = lstm_forward(&p.lstm, x, &state)?;
        hs.push(s.h.clone());
        caches.push(cache);
        state = s;
    }

    let mut out = SequenceLoss::default();
    // step t (t >= 1) predicts targets[t - 1]
    let mut d_h: Vec<Vec<f32>> = vec![vec![0.0; hidden]; inputs.len()];
    let mut d_logits_all = Vec::new();
    for (k, &target) in targets.iter().enumerate() {
        let t = k + 1;
        let logits = model.logits(&hs[t]);
        let probs = softmax(&logits)?;
        let loss = cross_entropy_logits(&logits, target)?;
        out.total += loss;
        out.per_step.push(loss as f32);
        if argmax(&probs) == target {
            out.correct += 1;
        }
        let mut d = probs;
        d[target] -= 1.0;
        d_logits_all.push((t, d));
    }

    let Some(g) = grads else { return Ok(out) };
    for (t, d) in &d_logits_all {
        g.out_w.add_outer(d, &hs[*t]);
        for (b, v) in g.out_b.data_mut().iter_mut().zip(d) {
            *b += v;
        }
        d_h[*t] = p.out_w.matvec_t(d)?;
    }
    let mut dh_next = vec![0.0; hidden];
    let mut dc_next = vec![0.0; hidden];
    for t in (0..inputs.len()).rev() {
        let dh: Vec<f32> = d_h[t].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
        let step = lstm_backward(&p.lstm, &caches[t], &dh, &dc_next, &mut g.lstm);
        match t {
            0 => g.att_proj.add_outer(&step.dx, v_att),
            1 => add_row(&mut g.embed, model.start_id(), &step.dx),
            _ => add_row(&mut g.embed, ids[t - 2], &step.dx),
        }
        dh_next = step.dh_prev;
        dc_next = step.dc_prev;
    }
    Ok(out)
}

fn add_row(t: &mut Tensor, row: usize, v: &[f32]) {
    for (a, b) in t.row_mut(row).iter_mut().zip(v) {
        *a += b;
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CaptionTrainConfig {
    pub epochs: usize,
    pub lr: f32,
    pub momentum: f32,
    pub clip: f32,
    pub batch_size: usize,
}

impl Default for CaptionTrainConfig {
    fn default() -> Self {
        Self { epochs: 30, lr: 0.1, momentum: 0.9, clip: 5.0, batch_size: 16 }
    }
}

/// A training pair: the image's attribute vector and a tokenized reference.
#[derive(Debug, Clone)]
pub struct CaptionPair {
    pub v_att: Vec<f32>,
    pub caption: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CaptionTrainReport {
    /// Mean per-step cross-entropy for every epoch.
    pub losses: Vec<f32>,
    /// Teacher-forced next-token accuracy over the last epoch.
    pub final_accuracy: f32,
    /// Pairs with an empty reference caption.
    pub skipped: usize,
}

pub fn train_captioner(
    model: &mut CaptionModel,
    pairs: &[CaptionPair],
    cfg: &CaptionTrainConfig,
    rng: &mut Rng,
) -> Result<CaptionTrainReport> {
    let mut usable = Vec::new();
    let mut skipped = 0;
    for pair in pairs {
        if pair.caption.is_empty() {
            skipped += 1;
            continue;
        }
        usable.push((pair.v_att.as_slice(), model.vocab.encode(&pair.caption)?));
    }
    ensure!(!usable.is_empty(), "no non-empty reference captions to train on");
    let mut opt = Sgd::new(cfg.momentum);
    let mut order: Vec<usize> = (0..usable.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut final_accuracy = 0.0;
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let (mut total, mut steps, mut correct) = (0.0f64, 0usize, 0usize);
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let mut grads = model.params.zeros_like();
            let mut batch_steps = 0;
            for &i in batch {
                let (v_att, ids) = &usable[i];
                let l = sequence_loss(model, v_att, ids, Some(&mut grads))?;
                total += l.total;
                batch_steps += l.per_step.len();
                correct += l.correct;
            }
            steps += batch_steps;
            let scale = 1.0 / batch_steps as f32;
            for (_, g) in grads.named_mut() {
                g.scale(scale);
            }
            clip_param_grads(&mut grads, cfg.clip)?;
            opt.step(&mut model.params, &grads, cfg.lr)?;
        }
        losses.push((total / steps as f64) as f32);
        final_accuracy = correct as f32 / steps as f32;
    }
    Ok(CaptionTrainReport { losses, final_accuracy, skipped })
}

/// Teacher-forced next-token accuracy of a frozen model.
pub fn token_accuracy(model: &CaptionModel, pairs: &[CaptionPair]) -> Result<f32> {
    let (mut correct, mut steps) = (0, 0);
    for pair in pairs.iter().filter(|p| !p.caption.is_empty()) {
        let ids = model.vocab.encode(&pair.caption)?;
        let l = sequence_loss(model, &pair.v_att, &ids, None)?;
        correct += l.correct;
        steps += l.per_step.len();
    }
    ensure!(steps > 0, "no caption steps to score");
    Ok(correct as f32 / steps as f32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model(seed: u64, words: &[&str], hidden: usize) -> CaptionModel {
        let vocab = caption_vocab(words.iter().copied(), 1).unwrap();
        CaptionModel::new(vocab, 4, 6, hidden, &mut Rng::new(seed)).unwrap()
    }

    #[test]
    fn forced_end_yields_single_empty_caption() {
        let mut m = tiny_model(3, &["a", "b", "c"], 5);
        m.params.out_w.fill(0.0);
        m.params.out_b.fill(-1e4);
        let end = m.end_id();
        m.params.out_b.data_mut()[end] = 0.0;
        let out = decode(&m, &[0.1, 0.2, 0.3, 0.4], 3, 5).unwrap();
        assert_eq!(out.hypotheses[0].tokens, Vec::<usize>::new());
        assert_eq!(out.hypotheses[0].log_prob, 0.0);
        assert!(out.hypotheses[1..].iter().all(|h| h.log_prob < -1000.0));
    }

    #[test]
    fn width_is_clamped_to_vocabulary() {
        let m = tiny_model(1, &["a"], 4);
        let out = decode(&m, &[0.0; 4], 10, 2).unwrap();
        assert!(out.width_clamped);
        assert!(out.hypotheses.len() <= m.vocab.len());
    }

    #[test]
    fn identical_captions_pool_to_their_hidden_state() {
        let h = vec![0.3, -0.1, 0.7];
        assert_eq!(mean_pool(&vec![h.clone(); 5]), h);
    }

    #[test]
    fn basis_vectors_pool_to_uniform() {
        let basis: Vec<Vec<f32>> = (0..5)
            .map(|i| (0..5).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        for v in mean_pool(&basis) {
            assert!((v - 0.2).abs() < 1e-7);
        }
    }

    #[test]
    fn untrained_first_step_loss_is_near_log_vocab() {
        let words: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        let vocab = caption_vocab(refs.iter().copied(), 1).unwrap();
        let m = CaptionModel::new(vocab, 8, 32, 64, &mut Rng::new(2)).unwrap();
        let ids = m.vocab.encode(&["w3"]).unwrap();
        let l = sequence_loss(&m, &[0.5; 8], &ids, None).unwrap();
        let ln_v = (m.vocab.len() as f32).ln();
        assert!((l.per_step[0] - ln_v).abs() < 0.1 * ln_v, "{} vs {ln_v}", l.per_step[0]);
    }

    #[test]
    fn empty_references_are_skipped() {
        let mut m = tiny_model(4, &["a", "b"], 4);
        let pairs = vec![
            CaptionPair { v_att: vec![0.0; 4], caption: vec![] },
            CaptionPair { v_att: vec![0.1; 4], caption: vec!["a".into()] },
        ];
        let cfg = CaptionTrainConfig { epochs: 1, ..Default::default() };
        let report = train_captioner(&mut m, &pairs, &cfg, &mut Rng::new(0)).unwrap();
        assert_eq!(report.skipped, 1);
        let only_empty = &pairs[..1];
        assert!(train_captioner(&mut m, only_empty, &cfg, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn wrong_attribute_width_is_rejected() {
        let m = tiny_model(4, &["a"], 4);
        assert!(m.initial_state(&[0.0; 3]).is_err());
    }

    #[test]
    fn sequence_loss_gradients_match_finite_differences() {
        let vocab = caption_vocab(["a", "b", "c", "d"], 1).unwrap();
        let mut m = CaptionModel::new(vocab, 4, 5, 6, &mut Rng::new(21)).unwrap();
        // order-one gate pre-activations keep every gradient well above f32 noise
        m.params.randomize(0.8, &mut Rng::new(121));
        let v_att = [0.9, -0.4, 0.2, 0.6];
        let ids = m.vocab.encode(&["b", "a", "d"]).unwrap();
        let mut grads = m.params.zeros_like();
        sequence_loss(&m, &v_att, &ids, Some(&mut grads)).unwrap();
        let report = crate::numkit::finite_diff_check(
            &m.params,
            &grads,
            |p| {
                let probe = CaptionModel { vocab: m.vocab.clone(), params: p.clone() };
                Ok(sequence_loss(&probe, &v_att, &ids, None)?.total)
            },
            0.1,
            &mut Rng::new(5),
        )
        .unwrap();
        assert!(report.passes(1e-2), "{report:?}");
    }

    #[test]
    fn width_one_never_scores_below_greedy() {
        for seed in 0..30 {
            let m = tiny_model(seed, &["a", "b", "c"], 5);
            let v = [0.3, -0.2, 0.8, 0.1];
            let g = greedy(&m, m.initial_state(&v).unwrap(), 4).unwrap();
            let b = decode(&m, &v, 1, 4).unwrap();
            assert!(b.hypotheses[0].log_prob >= g.log_prob - 1e-9);
        }
    }

    #[test]
    fn beam_scores_match_teacher_forced_log_probs() {
        let m = tiny_model(8, &["a", "b", "c"], 5);
        let v = [0.5, 0.5, -0.5, 0.0];
        let out = decode(&m, &v, 4, 4).unwrap();
        for pair in out.hypotheses.windows(2) {
            assert!(beam::rank(&pair[0], &pair[1]).is_le());
        }
        for h in &out.hypotheses {
            let mut state = m.initial_state(&v).unwrap();
            let mut lp = 0.0f64;
            for &t in &h.tokens {
                lp += f64::from(m.log_probs(&state)[t]);
                state = m.advance(&state, t);
            }
            if h.ended {
                lp += f64::from(m.log_probs(&state)[m.end_id()]);
            }
            assert!((lp - h.log_prob).abs() < 1e-9);
        }
    }

    #[test]
    fn caption_set_has_five_captions_and_mean_hidden() {
        let m = tiny_model(9, &["a", "b", "c", "d", "e"], 6);
        let v = [0.2, 0.1, 0.0, -0.3];
        let set = generate_caption_set(&m, &v, &DecodeConfig::default()).unwrap();
        assert_eq!(set.captions.len(), CAPTIONS_PER_IMAGE);
        assert!(!set.degenerate);
        let hiddens: Vec<Vec<f32>> = set.captions.iter().map(|c| c.final_hidden.clone()).collect();
        assert_eq!(set.v_cap, mean_pool(&hiddens));
        assert_eq!(set.v_cap.len(), 6);
    }

    #[test]
    fn checkpoint_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let m = tiny_model(10, &["x", "y"], 4);
        let a = dir.path().join("a.ama");
        let b = dir.path().join("b.ama");
        m.save(&a, &[]).unwrap();
        let back = CaptionModel::load(&a).unwrap();
        assert_eq!(back, m);
        back.save(&b, &[]).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn training_fits_a_tiny_corpus() {
        let vocab = caption_vocab(["red", "ball", "blue", "cup"], 1).unwrap();
        let mut m = CaptionModel::new(vocab, 2, 8, 16, &mut Rng::new(1)).unwrap();
        let pairs = vec![
            CaptionPair { v_att: vec![1.0, 0.0], caption: vec!["red".into(), "ball".into()] },
            CaptionPair { v_att: vec![0.0, 1.0], caption: vec!["blue".into(), "cup".into()] },
        ];
        let cfg = CaptionTrainConfig { epochs: 150, lr: 0.3, batch_size: 2, ..Default::default() };
        let report = train_captioner(&mut m, &pairs, &cfg, &mut Rng::new(2)).unwrap();
        assert!(report.losses.last().unwrap() < &(report.losses[0] * 0.2), "{:?}", report.losses);
        assert_eq!(token_accuracy(&m, &pairs).unwrap(), 1.0);
        let best = decode(&m, &[1.0, 0.0], 3, 5).unwrap();
        assert_eq!(m.vocab.decode(&best.hypotheses[0].tokens), ["red", "ball"]);
    }
}
