//! Attribute-based image representation.
//!
//! A shared scorer maps every region proposal's feature vector to
//! per-attribute probabilities; a columnwise max over regions then yields
//! one image-level attribute vector.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::numkit::{
    dropout_mask, sigmoid, softmax, Container, ParamSet, Rng, Sgd, Tensor,
    INIT_SCALE,
};

/// Attribute vocabulary size used throughout the default configuration.
pub const DEFAULT_VOCAB_SIZE: usize = 256;
/// Number of top attributes used to query the knowledge base.
pub const KB_TOP_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeVocab {
    terms: Vec<String>,
}

impl AttributeVocab {
    pub fn new(terms: Vec<String>) -> Result<Self> {
        ensure!(!terms.is_empty(), "attribute vocabulary is empty");
        let mut seen = std::collections::HashSet::new();
        for t in &terms {
            ensure!(!t.trim().is_empty(), "empty attribute term");
            ensure!(*t == t.to_lowercase(), "attribute term `{t}` is not lowercase");
            ensure!(seen.insert(t.as_str()), "duplicate attribute term `{t}`");
        }
        Ok(Self { terms })
    }

    /// One term per line; the line number is the index.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let terms = text.lines().map(|l| l.trim_end_matches('\r').to_string()).collect();
        Self::new(terms).map_err(|e| Error::Parse { path: path.into(), line: 0, msg: e.to_string() })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.terms.join("\n") + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, i: usize) -> &str {
        &self.terms[i]
    }
}

/// Per-region feature vectors for one image, `[regions, feature_dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionFeatureSet {
    pub image_id: String,
    pub features: Tensor,
}

impl RegionFeatureSet {
    pub fn new(image_id: impl Into<String>, features: Tensor) -> Result<Self> {
        let image_id = image_id.into();
        ensure!(
            features.shape().len() == 2,
            "region features for `{image_id}` must be a matrix, got shape {:?}",
            features.shape()
        );
        ensure!(features.is_finite(), "region features for `{image_id}` contain non-finite values");
        Ok(Self { image_id, features })
    }

    /// Reads the tensor named after the image from a container.
    pub fn from_container(container: &Container, image_id: &str) -> Result<Self> {
        Self::new(image_id, container.require(image_id)?.clone())
    }

    pub fn regions(&self) -> usize {
        self.features.rows()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// Independent logistic probability per attribute.
    #[default]
    Sigmoid,
    /// One distribution over all attributes per region.
    Softmax,
}

/// Shared per-region scorer: an optional ReLU hidden layer followed by an
/// affine prediction layer and the chosen head.
#[derive(Debug, Clone, PartialEq)]
pub struct AttrModel {
    pub hidden_w: Option<Tensor>,
    pub hidden_b: Option<Tensor>,
    pub out_w: Tensor,
    pub out_b: Tensor,
    pub head: Head,
}

impl ParamSet for AttrModel {
    fn named(&self) -> Vec<(String, &Tensor)> {
        let mut v = Vec::new();
        if let (Some(w), Some(b)) = (&self.hidden_w, &self.hidden_b) {
            v.push(("hidden_w".into(), w));
            v.push(("hidden_b".into(), b));
        }
        v.push(("out_w".into(), &self.out_w));
        v.push(("out_b".into(), &self.out_b));
        v
    }

    fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut v = Vec::new();
        if let (Some(w), Some(b)) = (&mut self.hidden_w, &mut self.hidden_b) {
            v.push(("hidden_w".into(), w));
            v.push(("hidden_b".into(), b));
        }
        v.push(("out_w".into(), &mut self.out_w));
        v.push(("out_b".into(), &mut self.out_b));
        v
    }
}

/// Intermediate values of one region's forward pass.
struct RegionPass {
    hidden_pre: Vec<f32>,
    hidden: Vec<f32>,
    probs: Vec<f32>,
}

impl AttrModel {
    pub fn new(input_dim: usize, hidden: Option<usize>, attributes: usize, head: Head, rng: &mut Rng) -> Self {
        let (hidden_w, hidden_b, width) = match hidden {
            Some(h) => (
                Some(Tensor::uniform(&[h, input_dim], INIT_SCALE, rng)),
                Some(Tensor::zeros(&[h])),
                h,
            ),
            None => (None, None, input_dim),
        };
        Self {
            hidden_w,
            hidden_b,
            out_w: Tensor::uniform(&[attributes, width], INIT_SCALE, rng),
            out_b: Tensor::zeros(&[attributes]),
            head,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden_w.as_ref().unwrap_or(&self.out_w).cols()
    }

    pub fn num_attributes(&self) -> usize {
        self.out_w.rows()
    }

    fn forward_region(&self, x: &[f32], mask: Option<&[f32]>) -> RegionPass {
        let (hidden_pre, mut hidden) = match (&self.hidden_w, &self.hidden_b) {
            (Some(w), Some(b)) => {
                let mut pre = crate::numkit::tensor::matvec(w.data(), w.rows(), x);
                for (p, &bb) in pre.iter_mut().zip(b.data()) {
                    *p += bb;
                }
                let act = pre.iter().map(|&v| v.max(0.0)).collect();
                (pre, act)
            }
            _ => (Vec::new(), x.to_vec()),
        };
        if let Some(m) = mask {
            for (h, &mv) in hidden.iter_mut().zip(m) {
                *h *= mv;
            }
        }
        let mut logits = crate::numkit::tensor::matvec(self.out_w.data(), self.out_w.rows(), &hidden);
        for (l, &b) in logits.iter_mut().zip(self.out_b.data()) {
            *l += b;
        }
        let probs = match self.head {
            Head::Sigmoid => logits.iter().map(|&z| sigmoid(z)).collect(),
            Head::Softmax => softmax(&logits).expect("finite logits"),
        };
        RegionPass { hidden_pre, hidden, probs }
    }

    fn check_input(&self, regions: &RegionFeatureSet) -> Result<()> {
        ensure!(regions.regions() >= 1, "image `{}` has no regions", regions.image_id);
        ensure!(
            regions.dim() == self.input_dim(),
            "region features of `{}` have dimension {}, model expects {}",
            regions.image_id,
            regions.dim(),
            self.input_dim()
        );
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>, extra_meta: &[(&str, String)]) -> Result<()> {
        let mut c = Container::new();
        c.meta.insert("kind".into(), "attrnet".into());
        c.meta.insert("head".into(), format!("{:?}", self.head).to_lowercase());
        for (k, v) in extra_meta {
            c.meta.insert(k.to_string(), v.clone());
        }
        c.put_params("", self);
        c.save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let c = Container::load(path)?;
        let head = match c.meta_str("head")? {
            "softmax" => Head::Softmax,
            _ => Head::Sigmoid,
        };
        Ok(Self {
            hidden_w: c.get("hidden_w").cloned(),
            hidden_b: c.get("hidden_b").cloned(),
            out_w: c.require("out_w")?.clone(),
            out_b: c.require("out_b")?.clone(),
            head,
        })
    }
}

/// Image-level attribute probabilities, indexed like the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeScores {
    pub v_att: Vec<f32>,
}

/// Per-region probabilities, `[regions, attributes]`.
pub fn score_regions(model: &AttrModel, regions: &RegionFeatureSet) -> Result<Tensor> {
    model.check_input(regions)?;
    let c = model.num_attributes();
    let mut data = Vec::with_capacity(regions.regions() * c);
    for r in 0..regions.regions() {
        data.extend(model.forward_region(regions.features.row(r), None).probs);
    }
    Tensor::new(vec![regions.regions(), c], data)
}

/// Columnwise max plus the winning region per column (lowest index on ties).
fn pool_with_argmax(per_region: &Tensor) -> Result<(Vec<f32>, Vec<usize>)> {
    ensure!(
        per_region.shape().len() == 2 && per_region.rows() >= 1,
        "max pooling needs at least one region"
    );
    let mut best = per_region.row(0).to_vec();
    let mut arg = vec![0; best.len()];
    for r in 1..per_region.rows() {
        for (j, &v) in per_region.row(r).iter().enumerate() {
            if v > best[j] {
                best[j] = v;
                arg[j] = r;
            }
        }
    }
    Ok((best, arg))
}

pub fn max_pool_hypotheses(per_region: &Tensor) -> Result<AttributeScores> {
    pool_with_argmax(per_region).map(|(v_att, _)| AttributeScores { v_att })
}

/// Scores and pools in one call.
pub fn predict(model: &AttrModel, regions: &RegionFeatureSet) -> Result<AttributeScores> {
    max_pool_hypotheses(&score_regions(model, regions)?)
}

/// The `k` highest-scoring terms, ties broken by vocabulary index.
pub fn top_k_attributes(scores: &AttributeScores, vocab: &AttributeVocab, k: usize) -> Result<Vec<String>> {
    ensure!(
        scores.v_att.len() == vocab.len(),
        "{} scores for a vocabulary of {}",
        scores.v_att.len(),
        vocab.len()
    );
    ensure!(k >= 1 && k <= vocab.len(), "k = {k} outside 1..={}", vocab.len());
    let mut order: Vec<usize> = (0..vocab.len()).collect();
    order.sort_by(|&a, &b| scores.v_att[b].total_cmp(&scores.v_att[a]).then(a.cmp(&b)));
    Ok(order[..k].iter().map(|&i| vocab.term(i).to_string()).collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AttrTrainConfig {
    pub epochs: usize,
    /// Learning rate of the hidden layer.
    pub hidden_lr: f32,
    /// Learning rate of the prediction layer.
    pub head_lr: f32,
    /// Every `decay_every` epochs all rates are multiplied by `decay`.
    pub decay_every: usize,
    pub decay: f32,
    pub momentum: f32,
    pub dropout: f32,
    pub batch_size: usize,
}

impl Default for AttrTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            hidden_lr: 0.001,
            head_lr: 0.01,
            decay_every: 10,
            decay: 0.1,
            momentum: 0.9,
            dropout: 0.5,
            batch_size: 16,
        }
    }
}

impl AttrTrainConfig {
    /// Step-decayed rate for a layer at a zero-based epoch.
    pub fn lr_at(&self, base: f32, epoch: usize) -> f32 {
        let steps = if self.decay_every == 0 { 0 } else { epoch / self.decay_every };
        (0..steps).fold(base, |lr, _| lr * self.decay)
    }
}

/// One labelled training image.
#[derive(Debug, Clone)]
pub struct AttrExample {
    pub regions: RegionFeatureSet,
    pub labels: Vec<f32>,
}

/// Mean BCE of the pooled prediction; accumulates gradients into `grads`
/// when provided. Max-pool gradients go to the winning region only.
pub fn image_loss(
    model: &AttrModel,
    example: &AttrExample,
    masks: Option<&[Vec<f32>]>,
    grads: Option<&mut AttrModel>,
) -> Result<f64> {
    model.check_input(&example.regions)?;
    let c = model.num_attributes();
    ensure!(
        example.labels.len() == c,
        "label vector has {} entries, vocabulary has {c}",
        example.labels.len()
    );
    let feats = &example.regions.features;
    let passes: Vec<RegionPass> = (0..feats.rows())
        .map(|r| model.forward_region(feats.row(r), masks.map(|m| m[r].as_slice())))
        .collect();
    let per_region = Tensor::new(
        vec![passes.len(), c],
        passes.iter().flat_map(|p| p.probs.iter().copied()).collect(),
    )?;
    let (pooled, arg) = pool_with_argmax(&per_region)?;
    let loss = pooled
        .iter()
        .zip(&example.labels)
        .map(|(&p, &y)| {
            let p = f64::from(p).clamp(1e-12, 1.0 - 1e-7);
            let y = f64::from(y);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / c as f64;

    let Some(grads) = grads else { return Ok(loss) };
    // dL/dprob for each region, nonzero only where the region won the max
    let mut d_probs = vec![vec![0.0f32; c]; passes.len()];
    for j in 0..c {
        let p = f64::from(pooled[j]).clamp(1e-12, 1.0 - 1e-7);
        let y = f64::from(example.labels[j]);
        d_probs[arg[j]][j] = ((p - y) / (p * (1.0 - p)) / c as f64) as f32;
    }
    for (r, pass) in passes.iter().enumerate() {
        if d_probs[r].iter().all(|&d| d == 0.0) {
            continue;
        }
        let d_logits: Vec<f32> = match model.head {
            Head::Sigmoid => d_probs[r]
                .iter()
                .zip(&pass.probs)
                .map(|(&d, &p)| d * p * (1.0 - p))
                .collect(),
            Head::Softmax => {
                let inner: f32 = d_probs[r].iter().zip(&pass.probs).map(|(d, p)| d * p).sum();
                d_probs[r].iter().zip(&pass.probs).map(|(&d, &p)| p * (d - inner)).collect()
            }
        };
        grads.out_w.add_outer(&d_logits, &pass.hidden);
        for (b, d) in grads.out_b.data_mut().iter_mut().zip(&d_logits) {
            *b += d;
        }
        if let (Some(gw), Some(gb)) = (&mut grads.hidden_w, &mut grads.hidden_b) {
            let mut d_hidden = model.out_w.matvec_t(&d_logits)?;
            if let Some(m) = masks {
                for (d, &mv) in d_hidden.iter_mut().zip(&m[r]) {
                    *d *= mv;
                }
            }
            for (d, &pre) in d_hidden.iter_mut().zip(&pass.hidden_pre) {
                if pre <= 0.0 {
                    *d = 0.0;
                }
            }
            gw.add_outer(&d_hidden, feats.row(r));
            for (b, d) in gb.data_mut().iter_mut().zip(&d_hidden) {
                *b += d;
            }
        }
    }
    Ok(loss)
}

/// Mean pooled BCE over a dataset, dropout off.
pub fn dataset_loss(model: &AttrModel, data: &[AttrExample]) -> Result<f64> {
    let mut total = 0.0f64;
    for ex in data {
        total += image_loss(model, ex, None, None)?;
    }
    Ok(total / data.len() as f64)
}

/// Trains with mini-batch SGD. Returns the mean training loss per epoch.
pub fn train_attr(
    model: &mut AttrModel,
    data: &[AttrExample],
    config: &AttrTrainConfig,
    rng: &mut Rng,
) -> Result<Vec<f32>> {
    ensure!(!data.is_empty(), "attribute training set is empty");
    let c = model.num_attributes();
    for ex in data {
        ensure!(
            ex.labels.len() == c,
            "labels for `{}` have {} entries, vocabulary has {c}",
            ex.regions.image_id,
            ex.labels.len()
        );
    }
    let mut opt = Sgd::new(config.momentum);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);
    let hidden_width = model.hidden_b.as_ref().map(Tensor::len);
    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let hidden_lr = config.lr_at(config.hidden_lr, epoch);
        let head_lr = config.lr_at(config.head_lr, epoch);
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(config.batch_size.max(1)) {
            let mut grads = model.zeros_like();
            for &i in batch {
                let ex = &data[i];
                let masks = match hidden_width {
                    Some(h) if config.dropout > 0.0 => Some(
                        (0..ex.regions.regions())
                            .map(|_| dropout_mask(rng, config.dropout, h))
                            .collect::<Result<Vec<_>>>()?,
                    ),
                    _ => None,
                };
                epoch_loss += image_loss(model, ex, masks.as_deref(), Some(&mut grads))?;
            }
            let scale = 1.0 / batch.len() as f32;
            for (_, g) in grads.named_mut() {
                g.scale(scale);
            }
            opt.step_with(model, &grads, |name| {
                if name.starts_with("hidden") { hidden_lr } else { head_lr }
            })?;
        }
        curve.push((epoch_loss / data.len() as f64) as f32);
    }
    Ok(curve)
}
