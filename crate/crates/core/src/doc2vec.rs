//! Paragraph vectors, distributed-memory variant: every word is predicted
//! from the mean of its document's vector and the surrounding word vectors
//! through a full softmax.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::numkit::{
    cross_entropy_logits, softmax, Container, ParamSet, Rng, Tensor,
};
use crate::text::{Vocab, UNK};

pub use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Doc2VecConfig {
    pub dim: usize,
    /// Context radius on each side of the predicted word.
    pub window: usize,
    pub min_count: usize,
    pub epochs: usize,
    /// Start and end of the linearly decayed training rate.
    pub lr: f32,
    pub min_lr: f32,
    pub infer_steps: usize,
    pub infer_lr: f32,
}

impl Default for Doc2VecConfig {
    fn default() -> Self {
        Self { dim: 500, window: 4, min_count: 1, epochs: 50, lr: 0.025, min_lr: 0.0001, infer_steps: 100, infer_lr: 0.025 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Doc2VecParams {
    /// `[documents, dim]`
    pub doc: Tensor,
    /// `[vocab, dim]`
    pub word: Tensor,
    /// `[vocab, dim]`
    pub out_w: Tensor,
    pub out_b: Tensor,
}

impl ParamSet for Doc2VecParams {
    fn named(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("doc".into(), &self.doc),
            ("word".into(), &self.word),
            ("out_w".into(), &self.out_w),
            ("out_b".into(), &self.out_b),
        ]
    }

    fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![
            ("doc".into(), &mut self.doc),
            ("word".into(), &mut self.word),
            ("out_w".into(), &mut self.out_w),
            ("out_b".into(), &mut self.out_b),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Doc2VecModel {
    pub vocab: Vocab,
    pub params: Doc2VecParams,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeVector {
    pub v_know: Vec<f32>,
    /// Fraction of the paragraph's tokens found in the vocabulary.
    pub coverage: f32,
}

#[derive(Debug, Clone)]
pub struct Doc2VecTraining {
    pub model: Doc2VecModel,
    /// Mean per-position cross-entropy of every epoch.
    pub losses: Vec<f32>,
}

impl Doc2VecModel {
    pub fn dim(&self) -> usize {
        self.params.word.cols()
    }

    pub fn num_docs(&self) -> usize {
        self.params.doc.rows()
    }

    /// In-vocabulary token ids; unknown words are dropped.
    pub fn encode(&self, text: &str) -> (Vec<usize>, usize) {
        let tokens = tokenize(text);
        let total = tokens.len();
        let ids = tokens.iter().filter_map(|t| self.vocab.id(t)).filter(|&i| self.vocab.token(i) != UNK).collect();
        (ids, total)
    }

    pub fn doc_vector(&self, i: usize) -> &[f32] {
        self.params.doc.row(i)
    }

    pub fn save(&self, path: impl AsRef<Path>, extra_meta: &[(&str, String)]) -> Result<()> {
        let path = path.as_ref();
        let mut c = Container::new();
        c.meta.insert("kind".into(), "doc2vec".into());
        c.meta.insert("window".into(), self.window.to_string());
        c.meta.insert("vocab_hash".into(), self.vocab.hash());
        for (k, v) in extra_meta {
            c.meta.insert(k.to_string(), v.clone());
        }
        c.put_params("", &self.params);
        c.save(path)?;
        self.vocab.save(path.with_extension("vocab"))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let c = Container::load(path)?;
        let vocab = Vocab::load(path.with_extension("vocab"))?;
        let expected = c.meta_str("vocab_hash")?;
        if expected != vocab.hash() {
            return Err(Error::VocabMismatch { expected: expected.into(), found: vocab.hash() });
        }
        let params = Doc2VecParams {
            doc: c.require("doc")?.clone(),
            word: c.require("word")?.clone(),
            out_w: c.require("out_w")?.clone(),
            out_b: c.require("out_b")?.clone(),
        };
        ensure!(params.word.rows() == vocab.len(), "doc2vec word matrix does not match its vocabulary");
        Ok(Self { vocab, params, window: c.meta_parse("window")? })
    }
}

/// Context ids around position `t`, clipped at the document edges.
fn context(ids: &[usize], t: usize, window: usize) -> impl Iterator<Item = usize> + '_ {
    let lo = t.saturating_sub(window);
    let hi = (t + window + 1).min(ids.len());
    (lo..hi).filter(move |&j| j != t).map(move |j| ids[j])
}

/// Loss of predicting `ids[t]` from `doc_vec` and its context. Gradients
/// go to `grads` (output layer and word rows) and `d_doc` when given.
fn position_loss(
    params: &Doc2VecParams,
    doc_vec: &[f32],
    ids: &[usize],
    t: usize,
    window: usize,
    mut grads: Option<(&mut Doc2VecParams, &mut [f32])>,
) -> Result<f64> {
    let d = doc_vec.len();
    let mut h = doc_vec.to_vec();
    let mut n = 1.0f32;
    for w in context(ids, t, window) {
        for (a, b) in h.iter_mut().zip(params.word.row(w)) {
            *a += b;
        }
        n += 1.0;
    }
    for a in &mut h {
        *a /= n;
    }
    let mut logits = params.out_w.matvec(&h)?;
    for (l, b) in logits.iter_mut().zip(params.out_b.data()) {
        *l += b;
    }
    let target = ids[t];
    let loss = cross_entropy_logits(&logits, target)?;
    if let Some((g, d_doc)) = grads.as_mut() {
        let mut dz = softmax(&logits)?;
        dz[target] -= 1.0;
        g.out_w.add_outer(&dz, &h);
        for (b, v) in g.out_b.data_mut().iter_mut().zip(&dz) {
            *b += v;
        }
        let dh: Vec<f32> = params.out_w.matvec_t(&dz)?.into_iter().map(|v| v / n).collect();
        for (a, b) in d_doc.iter_mut().zip(&dh) {
            *a += b;
        }
        for w in context(ids, t, window) {
            for (a, b) in g.word.row_mut(w).iter_mut().zip(&dh) {
                *a += b;
            }
        }
        debug_assert_eq!(dh.len(), d);
    }
    Ok(loss)
}

/// Summed loss over every position of every document, with gradients
/// accumulated into `grads` when given.
pub fn corpus_loss(model: &Doc2VecModel, docs: &[Vec<usize>], mut grads: Option<&mut Doc2VecParams>) -> Result<f64> {
    ensure!(docs.len() == model.num_docs(), "{} documents for {} doc vectors", docs.len(), model.num_docs());
    let mut total = 0.0;
    for (i, ids) in docs.iter().enumerate() {
        for t in 0..ids.len() {
            match grads.as_deref_mut() {
                Some(g) => {
                    let mut d_doc = vec![0.0; model.dim()];
                    total += position_loss(&model.params, model.doc_vector(i), ids, t, model.window, Some((g, &mut d_doc)))?;
                    for (a, b) in g.doc.row_mut(i).iter_mut().zip(&d_doc) {
                        *a += b;
                    }
                }
                None => total += position_loss(&model.params, model.doc_vector(i), ids, t, model.window, None)?,
            }
        }
    }
    Ok(total)
}

fn init_vector(dim: usize, rng: &mut Rng) -> Vec<f32> {
    let s = 0.5 / dim as f32;
    (0..dim).map(|_| rng.uniform(-s, s)).collect()
}

/// Applies one position's gradient in place: output layer dense, word and
/// document rows sparse.
fn sgd_position(
    params: &mut Doc2VecParams,
    doc_vec: &mut [f32],
    ids: &[usize],
    t: usize,
    window: usize,
    lr: f32,
    train_words: bool,
) -> Result<f64> {
    let d = doc_vec.len();
    let mut h = doc_vec.to_vec();
    let mut n = 1.0f32;
    for w in context(ids, t, window) {
        for (a, b) in h.iter_mut().zip(params.word.row(w)) {
            *a += b;
        }
        n += 1.0;
    }
    for a in &mut h {
        *a /= n;
    }
    let mut logits = params.out_w.matvec(&h)?;
    for (l, b) in logits.iter_mut().zip(params.out_b.data()) {
        *l += b;
    }
    let target = ids[t];
    let loss = cross_entropy_logits(&logits, target)?;
    let mut dz = softmax(&logits)?;
    dz[target] -= 1.0;
    let dh: Vec<f32> = params.out_w.matvec_t(&dz)?.into_iter().map(|v| v / n).collect();
    if train_words {
        for (r, &g) in dz.iter().enumerate() {
            let row = params.out_w.row_mut(r);
            for (w, &hv) in row.iter_mut().zip(&h) {
                *w -= lr * g * hv;
            }
        }
        for (b, &g) in params.out_b.data_mut().iter_mut().zip(&dz) {
            *b -= lr * g;
        }
        for w in context(ids, t, window).collect::<Vec<_>>() {
            for (a, &g) in params.word.row_mut(w).iter_mut().zip(&dh) {
                *a -= lr * g;
            }
        }
    }
    for (a, &g) in doc_vec.iter_mut().zip(&dh) {
        *a -= lr * g;
    }
    debug_assert_eq!(h.len(), d);
    Ok(loss)
}

/// Builds the vocabulary from `corpus` (one string per document) and trains
/// word, document and output parameters jointly.
pub fn train(corpus: &[String], config: &Doc2VecConfig, rng: &mut Rng) -> Result<Doc2VecTraining> {
    ensure!(config.min_count >= 1, "min_count must be at least 1");
    ensure!(config.dim > 0, "doc2vec dimension must be positive");
    let tokenized: Vec<Vec<String>> = corpus.iter().map(|d| tokenize(d)).collect();
    ensure!(tokenized.iter().any(|t| !t.is_empty()), "doc2vec corpus has no tokens");
    let vocab = Vocab::build(tokenized.iter().flatten().map(String::as_str), &[UNK], config.min_count)?;
    ensure!(vocab.len() > 1, "doc2vec vocabulary is empty after min_count filtering");
    let v = vocab.len();
    let dim = config.dim;
    let mut word = Vec::with_capacity(v * dim);
    for _ in 0..v {
        word.extend(init_vector(dim, rng));
    }
    let mut doc = Vec::with_capacity(corpus.len() * dim);
    for _ in 0..corpus.len() {
        doc.extend(init_vector(dim, rng));
    }
    let mut model = Doc2VecModel {
        vocab,
        params: Doc2VecParams {
            doc: Tensor::new(vec![corpus.len(), dim], doc)?,
            word: Tensor::new(vec![v, dim], word)?,
            out_w: Tensor::zeros(&[v, dim]),
            out_b: Tensor::zeros(&[v]),
        },
        window: config.window,
    };
    let docs: Vec<Vec<usize>> = corpus.iter().map(|d| model.encode(d).0).collect();
    let positions: usize = docs.iter().map(Vec::len).sum();
    let total_steps = (positions * config.epochs).max(1);
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut sum = 0.0f64;
        for &i in &order {
            let mut doc_vec = model.params.doc.row(i).to_vec();
            for t in 0..docs[i].len() {
                let lr = decayed(config.lr, config.min_lr, step, total_steps);
                sum += sgd_position(&mut model.params, &mut doc_vec, &docs[i], t, model.window, lr, true)?;
                step += 1;
            }
            model.params.doc.row_mut(i).copy_from_slice(&doc_vec);
        }
        losses.push((sum / positions as f64) as f32);
    }
    ensure!(model.params.all_finite(), "doc2vec training diverged");
    Ok(Doc2VecTraining { model, losses })
}

fn decayed(lr: f32, min_lr: f32, step: usize, total: usize) -> f32 {
    let frac = step as f32 / total as f32;
    (lr - (lr - min_lr) * frac).max(min_lr)
}

/// Fits a fresh document vector to `text` with every other parameter
/// frozen. Empty or fully out-of-vocabulary text gives the zero vector.
pub fn infer_vector(model: &Doc2VecModel, text: &str, steps: usize, lr: f32, rng: &mut Rng) -> Result<KnowledgeVector> {
    let (ids, total) = model.encode(text);
    let coverage = if total == 0 { 0.0 } else { ids.len() as f32 / total as f32 };
    if ids.is_empty() {
        if total > 0 {
            log::warn!("no in-vocabulary tokens among {total}; using the zero knowledge vector");
        }
        return Ok(KnowledgeVector { v_know: vec![0.0; model.dim()], coverage });
    }
    let mut doc_vec = init_vector(model.dim(), rng);
    // the frozen parameters are only read; sgd_position needs them mutably
    let mut frozen = model.params.clone();
    let total_steps = (steps * ids.len()).max(1);
    let mut step = 0;
    for _ in 0..steps {
        for t in 0..ids.len() {
            let rate = decayed(lr, lr * 0.01, step, total_steps);
            sgd_position(&mut frozen, &mut doc_vec, &ids, t, model.window, rate, false)?;
            step += 1;
        }
    }
    Ok(KnowledgeVector { v_know: doc_vec, coverage })
}

/// One document per line.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{cosine, finite_diff_check};

    fn small(dim: usize, epochs: usize) -> Doc2VecConfig {
        Doc2VecConfig { dim, window: 1, epochs, lr: 0.05, ..Default::default() }
    }

    #[test]
    fn initial_loss_is_log_vocab() {
        let corpus = vec!["cat".to_string(), "dog".to_string()];
        let cfg = small(4, 1);
        let tr = train(&corpus, &Doc2VecConfig { lr: 1e-9, min_lr: 1e-9, ..cfg }, &mut Rng::new(0)).unwrap();
        // UNK is part of the softmax, so three classes
        let ln_v = (tr.model.vocab.len() as f32).ln();
        assert!((tr.losses[0] - ln_v).abs() < 0.1 * ln_v);
    }

    #[test]
    fn two_word_vocabulary_starts_near_ln2() {
        let corpus = vec!["cat".to_string(), "dog".to_string()];
        let tr = train(&corpus, &Doc2VecConfig { lr: 1e-9, min_lr: 1e-9, ..small(4, 1) }, &mut Rng::new(0)).unwrap();
        let m = &tr.model;
        let docs: Vec<Vec<usize>> = corpus.iter().map(|d| m.encode(d).0).collect();
        // restrict the softmax to the two real words by masking UNK's bias
        let mut masked = m.clone();
        masked.params.out_b.data_mut()[0] = -1e4;
        let per_position = corpus_loss(&masked, &docs, None).unwrap() / 2.0;
        assert!((per_position - 2f64.ln()).abs() < 0.1 * 2f64.ln(), "{per_position}");
    }

    #[test]
    fn dm_objective_gradients_match_finite_differences() {
        let corpus: Vec<String> =
            ["red apple sweet fruit", "green pear sweet", "blue sky clear day"].iter().map(|s| s.to_string()).collect();
        let tr = train(&corpus, &Doc2VecConfig { window: 2, ..small(8, 1) }, &mut Rng::new(4)).unwrap();
        let mut model = tr.model;
        model.params.randomize(0.8, &mut Rng::new(9));
        let docs: Vec<Vec<usize>> = corpus.iter().map(|d| model.encode(d).0).collect();
        let mut grads = model.params.zeros_like();
        corpus_loss(&model, &docs, Some(&mut grads)).unwrap();
        let report = finite_diff_check(
            &model.params,
            &grads,
            |p| {
                let m = Doc2VecModel { vocab: model.vocab.clone(), params: p.clone(), window: model.window };
                corpus_loss(&m, &docs, None)
            },
            0.1,
            &mut Rng::new(2),
        )
        .unwrap();
        assert!(report.passes(1e-2), "{report:?}");
    }

    #[test]
    fn empty_and_unknown_paragraphs_give_zero_vectors() {
        let corpus = vec!["alpha beta gamma".to_string()];
        let m = train(&corpus, &small(6, 2), &mut Rng::new(1)).unwrap().model;
        let empty = infer_vector(&m, "", 10, 0.05, &mut Rng::new(0)).unwrap();
        assert!(empty.v_know.iter().all(|&x| x == 0.0));
        let unknown = infer_vector(&m, "zeta eta", 10, 0.05, &mut Rng::new(0)).unwrap();
        assert!(unknown.v_know.iter().all(|&x| x == 0.0));
        assert_eq!(unknown.coverage, 0.0);
    }

    #[test]
    fn inference_is_deterministic_and_leaves_model_untouched() {
        let corpus: Vec<String> = ["one two three four", "five six seven"].iter().map(|s| s.to_string()).collect();
        let m = train(&corpus, &small(6, 3), &mut Rng::new(1)).unwrap().model;
        let mut c = Container::new();
        c.put_params("", &m.params);
        let before = c.to_bytes();
        let a = infer_vector(&m, "two three four", 20, 0.05, &mut Rng::new(5)).unwrap();
        let b = infer_vector(&m, "two three four", 20, 0.05, &mut Rng::new(5)).unwrap();
        assert_eq!(a, b);
        let mut c = Container::new();
        c.put_params("", &m.params);
        assert_eq!(before, c.to_bytes());
        assert!(cosine(&a.v_know, &a.v_know) > 0.99);
    }

    #[test]
    fn empty_vocabulary_is_an_error() {
        assert!(train(&["".to_string()], &small(4, 1), &mut Rng::new(0)).is_err());
        let cfg = Doc2VecConfig { min_count: 5, ..small(4, 1) };
        assert!(train(&["a b c".to_string()], &cfg, &mut Rng::new(0)).is_err());
    }
}
