//! End-to-end orchestration. Every stage reads and writes files under the
//! work directory, so stages can be rerun in isolation.

mod config;
mod dataset;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{KnowledgeConfig, ModelConfig, PathsConfig, PipelineConfig};
pub use dataset::{
    consensus_answer, prepare_records, read_captions, read_jsonl, read_records, write_jsonl, CaptionRecord,
    DatasetRecord, PrepareStats, PreparedRecord, Split,
};

use crate::attrnet::{self, AttrExample, AttrModel, AttributeVocab, RegionFeatureSet};
use crate::captioner::{self, caption_vocab, CaptionModel, CaptionPair, CaptionTrainReport};
use crate::doc2vec::{self, Doc2VecModel};
use crate::error::{Error, Result};
use crate::evalkit::{build_report_with, EvalRecord, EvalReport, PrefixTable, TaxonomyTree};
use crate::knowledge::{
    assemble_paragraph, build_comment_query, fetch_many, resolve_endpoint, KbCache, KbClient, KbError,
    KnowledgePassage,
};
use crate::numkit::{derive_seed, Container, Rng, Tensor};
use crate::text::{tokenize, Vocab};
use crate::vqalstm::{self, DecodeResult, Episode, VqaDims, VqaModel, VqaTrainReport};

/// Where each stage puts its outputs.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub dir: PathBuf,
}

impl Artifacts {
    pub fn prepared(&self) -> PathBuf {
        self.dir.join("prepared.jsonl")
    }
    pub fn vqa_vocab(&self) -> PathBuf {
        self.dir.join("vqa_vocab.txt")
    }
    pub fn prepare_stats(&self) -> PathBuf {
        self.dir.join("prepare_stats.json")
    }
    pub fn attr(&self) -> PathBuf {
        self.dir.join("attr.ama")
    }
    pub fn captioner(&self) -> PathBuf {
        self.dir.join("captioner.ama")
    }
    pub fn kb_corpus(&self) -> PathBuf {
        self.dir.join("kb_corpus.txt")
    }
    pub fn doc2vec(&self) -> PathBuf {
        self.dir.join("doc2vec.ama")
    }
    pub fn vectors(&self) -> PathBuf {
        self.dir.join("vectors.ama")
    }
    pub fn vqa(&self, label: &str) -> PathBuf {
        self.dir.join(format!("vqa-{label}.ama"))
    }
    /// Overwritten after every training epoch.
    pub fn vqa_epoch(&self, label: &str) -> PathBuf {
        self.dir.join(format!("vqa-{label}.epoch.ama"))
    }
    pub fn report(&self, label: &str, split: Split) -> PathBuf {
        self.dir.join(format!("report-{label}-{}.txt", split_name(split)))
    }
    pub fn report_json(&self, label: &str, split: Split) -> PathBuf {
        self.dir.join(format!("report-{label}-{}.json", split_name(split)))
    }
    pub fn predictions(&self, label: &str, split: Split) -> PathBuf {
        self.dir.join(format!("predictions-{label}-{}.jsonl", split_name(split)))
    }
}

fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Test => "test",
    }
}

fn require(path: PathBuf, what: &str, stage: &'static str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingStage { what: what.into(), path, stage })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchKbStats {
    pub terms: usize,
    pub from_cache: usize,
    pub fetched: usize,
    pub not_found: usize,
    pub invalid: usize,
    pub corpus_docs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrecomputeStats {
    pub computed: usize,
    pub skipped: usize,
    /// Images whose knowledge paragraph came back empty.
    pub empty_knowledge: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageVectors {
    pub v_att: Vec<f32>,
    pub v_cap: Vec<f32>,
    pub v_know: Vec<f32>,
}

fn vector_key(image_id: &str, part: &str) -> String {
    format!("{image_id}/{part}")
}

/// Reads one image's three vectors from a precompute container.
pub fn image_vectors(container: &Container, image_id: &str) -> Option<ImageVectors> {
    let get = |part: &str| container.get(&vector_key(image_id, part)).map(|t| t.data().to_vec());
    Some(ImageVectors { v_att: get("att")?, v_cap: get("cap")?, v_know: get("know")? })
}

/// Binary label per attribute term: 1 when the term's tokens occur
/// contiguously in any of the image's reference captions.
pub fn labels_from_captions(vocab: &AttributeVocab, captions: &[String]) -> Vec<f32> {
    let tokenized: Vec<Vec<String>> = captions.iter().map(|c| tokenize(c)).collect();
    vocab
        .terms()
        .iter()
        .map(|term| {
            let t = tokenize(term);
            let hit = !t.is_empty() && tokenized.iter().any(|c| c.windows(t.len()).any(|w| w == t.as_slice()));
            if hit { 1.0 } else { 0.0 }
        })
        .collect()
}

fn unit_normalize(v: &mut [f32]) {
    let norm = v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x = (f64::from(*x) / norm) as f32;
        }
    }
}

pub struct Pipeline {
    pub config: PipelineConfig,
    hash: String,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let hash = config.hash();
        Ok(Self { config, hash })
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn artifacts(&self) -> Artifacts {
        Artifacts { dir: self.config.paths.work_dir.clone() }
    }

    fn label(&self) -> String {
        self.config.modalities.file_label()
    }

    fn meta(&self, stage: &str) -> Vec<(&'static str, String)> {
        vec![("config_hash", self.hash.clone()), ("seed", self.config.seed.to_string()), ("stage", stage.to_string())]
    }

    fn rng(&self, stage: &str) -> Rng {
        Rng::new(derive_seed(self.config.seed, stage))
    }

    fn attribute_vocab(&self) -> Result<AttributeVocab> {
        AttributeVocab::load(&self.config.paths.attributes)
    }

    fn features(&self) -> Result<Container> {
        Container::load(&self.config.paths.features)
    }

    /// Tokenizes the question files and builds the answer vocabulary.
    pub fn prepare(&self) -> Result<PrepareStats> {
        let paths = &self.config.paths;
        let train = read_records(&paths.train)?;
        let test = match &paths.test {
            Some(p) => read_records(p)?,
            None => Vec::new(),
        };
        let features = self.features()?;
        let known: BTreeSet<String> = features.names().map(String::from).collect();
        let (records, vocab, stats) = prepare_records(&train, &test, &known, self.config.model.vocab_min_count)?;
        let art = self.artifacts();
        write_jsonl(&art.prepared(), &records)?;
        vocab.save(art.vqa_vocab())?;
        let json = serde_json::to_string_pretty(&stats)? + "\n";
        std::fs::write(art.prepare_stats(), json).map_err(|e| Error::io(art.prepare_stats(), e))?;
        log::info!(
            "prepared {} train / {} test records over {} images; vocab {}; test UNK rate {:.3}",
            stats.train_records,
            stats.test_records,
            stats.images,
            stats.vocab_size,
            stats.test_unk_rate
        );
        Ok(stats)
    }

    pub fn prepared_records(&self) -> Result<Vec<PreparedRecord>> {
        read_jsonl(&require(self.artifacts().prepared(), "prepared dataset", "prepare")?)
    }

    /// Fits the attribute classifier on every captioned image, with labels
    /// read off the captions.
    pub fn train_attr(&self) -> Result<Vec<f32>> {
        let vocab = self.attribute_vocab()?;
        let captions = read_captions(&self.config.paths.captions)?;
        let features = self.features()?;
        let mut data = Vec::new();
        for (id, caps) in &captions {
            if !features.contains(id) {
                log::warn!("captioned image `{id}` has no region features; skipped");
                continue;
            }
            data.push(AttrExample {
                regions: RegionFeatureSet::from_container(&features, id)?,
                labels: labels_from_captions(&vocab, caps),
            });
        }
        let dim = data.first().map(|e| e.regions.dim()).ok_or_else(|| Error::Config("no captioned images with features".into()))?;
        let m = &self.config.model;
        let mut rng = self.rng("train-attr");
        let mut model = AttrModel::new(dim, m.attr_hidden, vocab.len(), m.attr_head, &mut rng);
        let losses = attrnet::train_attr(&mut model, &data, &self.config.attr, &mut rng)?;
        model.save(self.artifacts().attr(), &self.meta("train-attr"))?;
        if let (Some(first), Some(last)) = (losses.first(), losses.last()) {
            log::info!("attribute loss {first:.4} -> {last:.4} over {} images", data.len());
        }
        Ok(losses)
    }

    fn attr_model(&self) -> Result<AttrModel> {
        AttrModel::load(require(self.artifacts().attr(), "attribute model", "train-attr")?)
    }

    pub fn train_captioner(&self) -> Result<CaptionTrainReport> {
        let attr = self.attr_model()?;
        let captions = read_captions(&self.config.paths.captions)?;
        let features = self.features()?;
        let m = &self.config.model;
        let tokens: Vec<Vec<String>> = captions.values().flatten().map(|c| tokenize(c)).collect();
        let vocab = caption_vocab(tokens.iter().flatten().map(String::as_str), m.caption_min_count)?;
        let mut pairs = Vec::new();
        for (id, caps) in &captions {
            if !features.contains(id) {
                continue;
            }
            let v_att = attrnet::predict(&attr, &RegionFeatureSet::from_container(&features, id)?)?.v_att;
            for c in caps {
                pairs.push(CaptionPair { v_att: v_att.clone(), caption: tokenize(c) });
            }
        }
        let mut rng = self.rng("train-captioner");
        let mut model = CaptionModel::new(vocab, attr.num_attributes(), m.caption_embed, m.caption_hidden, &mut rng)?;
        let report = captioner::train_captioner(&mut model, &pairs, &self.config.captioner, &mut rng)?;
        model.save(self.artifacts().captioner(), &self.meta("train-captioner"))?;
        log::info!(
            "captioner: {} pairs, final loss {:.4}, token accuracy {:.3}",
            pairs.len(),
            report.losses.last().copied().unwrap_or(f32::NAN),
            report.final_accuracy
        );
        Ok(report)
    }

    fn kb_client(&self) -> Result<KbClient> {
        let endpoint = resolve_endpoint(&self.config.knowledge.endpoint);
        Ok(KbClient::new(&endpoint, self.config.knowledge.policy.clone())?)
    }

    fn kb_cache(&self) -> Result<KbCache> {
        Ok(KbCache::open(&self.config.paths.cache)?)
    }

    /// Fetches the comment of every attribute term (cache first) and writes
    /// the nonempty ones as the paragraph-vector training corpus.
    pub fn fetch_kb(&self) -> Result<FetchKbStats> {
        let vocab = self.attribute_vocab()?;
        let client = self.kb_client()?;
        let cache = self.kb_cache()?;
        let results = fetch_many(&client, vocab.terms(), &cache);
        let mut stats = FetchKbStats { terms: vocab.len(), from_cache: 0, fetched: 0, not_found: 0, invalid: 0, corpus_docs: 0 };
        let mut corpus = String::new();
        for (term, r) in vocab.terms().iter().zip(results) {
            match r {
                Ok(out) => {
                    if out.from_cache {
                        stats.from_cache += 1;
                    } else {
                        stats.fetched += 1;
                    }
                    if out.passage.not_found {
                        stats.not_found += 1;
                    } else {
                        corpus.push_str(&out.passage.comment.replace(['\n', '\r'], " "));
                        corpus.push('\n');
                        stats.corpus_docs += 1;
                    }
                }
                Err(KbError::InvalidTerm { reason, .. }) => {
                    log::warn!("attribute `{term}` cannot be queried: {reason}");
                    stats.invalid += 1;
                }
                Err(e) => return Err(e.into()),
            }
        }
        let path = self.artifacts().kb_corpus();
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(&path, corpus).map_err(|e| Error::io(&path, e))?;
        log::info!(
            "knowledge: {} terms, {} cached, {} fetched, {} not found",
            stats.terms,
            stats.from_cache,
            stats.fetched,
            stats.not_found
        );
        Ok(stats)
    }

    pub fn train_doc2vec(&self) -> Result<Vec<f32>> {
        let path = require(self.artifacts().kb_corpus(), "knowledge corpus", "fetch-kb")?;
        let corpus: Vec<String> = doc2vec::read_corpus(&path)?.into_iter().filter(|d| !d.trim().is_empty()).collect();
        if corpus.is_empty() {
            return Err(Error::Config("knowledge corpus is empty; no attribute term had a comment".into()));
        }
        let mut rng = self.rng("train-doc2vec");
        let trained = doc2vec::train(&corpus, &self.config.doc2vec, &mut rng)?;
        trained.model.save(self.artifacts().doc2vec(), &self.meta("train-doc2vec"))?;
        Ok(trained.losses)
    }

    /// Computes the attribute, caption and knowledge vectors of every
    /// dataset image that does not already have all three.
    pub fn precompute(&self) -> Result<PrecomputeStats> {
        let art = self.artifacts();
        let records = self.prepared_records()?;
        let ids: BTreeSet<&str> = records.iter().map(|r| r.image_id.as_str()).collect();
        let mut out = if art.vectors().exists() { Container::load(art.vectors())? } else { Container::new() };
        let todo: Vec<&str> = ids.iter().copied().filter(|id| image_vectors(&out, id).is_none()).collect();
        let mut stats = PrecomputeStats { skipped: ids.len() - todo.len(), ..Default::default() };
        let mut empty: BTreeSet<String> = out
            .meta
            .get("empty_knowledge")
            .map(|s| s.split(',').filter(|x| !x.is_empty()).map(String::from).collect())
            .unwrap_or_default();
        if todo.is_empty() {
            log::info!("precompute: all {} images already done", ids.len());
            return Ok(stats);
        }

        let vocab = self.attribute_vocab()?;
        let attr = self.attr_model()?;
        let cap = CaptionModel::load(require(art.captioner(), "caption model", "train-captioner")?)?;
        let d2v = Doc2VecModel::load(require(art.doc2vec(), "paragraph-vector model", "train-doc2vec")?)?;
        let features = self.features()?;
        let k = self.config.model.kb_terms.min(vocab.len());

        let mut v_atts = HashMap::new();
        let mut terms_of = HashMap::new();
        for id in &todo {
            let regions = RegionFeatureSet::from_container(&features, id)?;
            let scores = attrnet::predict(&attr, &regions)?;
            terms_of.insert(*id, attrnet::top_k_attributes(&scores, &vocab, k)?);
            v_atts.insert(*id, scores.v_att);
        }
        let passages = self.fetch_terms(terms_of.values().flatten().cloned().collect())?;

        let d2v_cfg = &self.config.doc2vec;
        for (n, id) in todo.iter().enumerate() {
            let ps: Vec<KnowledgePassage> = terms_of[id].iter().map(|t| passages[t].clone()).collect();
            let para = assemble_paragraph(&ps)?;
            let v_know = if para.empty {
                log::warn!("image `{id}`: no knowledge for {:?}; using a zero vector", para.term_order);
                empty.insert(id.to_string());
                stats.empty_knowledge += 1;
                vec![0.0; d2v.dim()]
            } else {
                let mut rng = Rng::new(derive_seed(self.config.seed, &format!("precompute/{id}")));
                let mut v = doc2vec::infer_vector(&d2v, &para.text, d2v_cfg.infer_steps, d2v_cfg.infer_lr, &mut rng)?.v_know;
                if self.config.model.normalize_knowledge {
                    unit_normalize(&mut v);
                }
                v
            };
            let v_att = &v_atts[id];
            let set = captioner::generate_caption_set(&cap, v_att, &self.config.decode)?;
            out.insert(vector_key(id, "att"), Tensor::from_vec(v_att.clone()));
            out.insert(vector_key(id, "cap"), Tensor::from_vec(set.v_cap));
            out.insert(vector_key(id, "know"), Tensor::from_vec(v_know));
            stats.computed += 1;
            if (n + 1) % 32 == 0 {
                self.save_vectors(&mut out, &empty)?;
            }
        }
        self.save_vectors(&mut out, &empty)?;
        log::info!("precompute: {} computed, {} already present", stats.computed, stats.skipped);
        Ok(stats)
    }

    fn save_vectors(&self, out: &mut Container, empty: &BTreeSet<String>) -> Result<()> {
        for (k, v) in self.meta("precompute") {
            out.meta.insert(k.into(), v);
        }
        out.meta.insert("empty_knowledge".into(), empty.iter().cloned().collect::<Vec<_>>().join(","));
        out.save(self.artifacts().vectors())
    }

    /// Cache-first fetch of each distinct term. Unqueryable terms count as
    /// not found.
    fn fetch_terms(&self, terms: BTreeSet<String>) -> Result<HashMap<String, KnowledgePassage>> {
        let terms: Vec<String> = terms.into_iter().collect();
        let client = self.kb_client()?;
        let cache = self.kb_cache()?;
        let mut out = HashMap::with_capacity(terms.len());
        for (term, r) in terms.iter().zip(fetch_many(&client, &terms, &cache)) {
            let passage = match r {
                Ok(o) => o.passage,
                Err(KbError::InvalidTerm { reason, .. }) => {
                    log::warn!("attribute `{term}` cannot be queried: {reason}");
                    KnowledgePassage {
                        term: term.clone(),
                        comment: String::new(),
                        not_found: true,
                        source: String::new(),
                        fetched_at: String::new(),
                    }
                }
                Err(e) => return Err(e.into()),
            };
            out.insert(term.clone(), passage);
        }
        Ok(out)
    }

    fn vectors(&self) -> Result<Container> {
        Container::load(require(self.artifacts().vectors(), "image vectors", "precompute")?)
    }

    fn episodes(&self, records: &[PreparedRecord], vectors: &Container) -> Result<Vec<Episode>> {
        records
            .iter()
            .map(|r| {
                let v = image_vectors(vectors, &r.image_id).ok_or_else(|| Error::MissingStage {
                    what: format!("vectors for image `{}`", r.image_id),
                    path: self.artifacts().vectors(),
                    stage: "precompute",
                })?;
                Ok(Episode { v_att: v.v_att, v_cap: v.v_cap, v_know: v.v_know, question: r.question.clone(), answer: r.answer.clone() })
            })
            .collect()
    }

    fn vqa_vocab(&self) -> Result<Vocab> {
        Vocab::load(require(self.artifacts().vqa_vocab(), "answer vocabulary", "prepare")?)
    }

    /// Trains the answer model on the configured modality subset.
    pub fn train_vqa(&self) -> Result<VqaTrainReport> {
        let records: Vec<PreparedRecord> = self.prepared_records()?.into_iter().filter(|r| r.split == Split::Train).collect();
        if records.is_empty() {
            return Err(Error::Config("no training records".into()));
        }
        let vectors = self.vectors()?;
        let episodes = self.episodes(&records, &vectors)?;
        let first = &episodes[0];
        let dims = VqaDims {
            attributes: first.v_att.len(),
            caption: first.v_cap.len(),
            knowledge: first.v_know.len(),
            hidden: self.config.model.vqa_hidden,
        };
        let mut rng = self.rng("train-vqa");
        let mut model = VqaModel::new(self.vqa_vocab()?, dims, self.config.modalities, &mut rng)?;
        let art = self.artifacts();
        let label = self.label();
        let meta = self.meta("train-vqa");
        let report = vqalstm::train(&mut model, &episodes, &self.config.vqa, &mut rng, |epoch, m| {
            let mut em = meta.clone();
            em.push(("epoch", (epoch + 1).to_string()));
            log::debug!("epoch {} done", epoch + 1);
            m.save(art.vqa_epoch(&label), &em)
        })?;
        model.save(art.vqa(&label), &meta)?;
        if let (Some(a), Some(b)) = (report.losses.first(), report.losses.last()) {
            log::info!("vqa [{}]: cost {a:.4} -> {b:.4}", self.config.modalities);
        }
        Ok(report)
    }

    pub fn vqa_model(&self) -> Result<VqaModel> {
        VqaModel::load(require(self.artifacts().vqa(&self.label()), "answer model", "train-vqa")?)
    }

    fn taxonomy(&self) -> Result<TaxonomyTree> {
        let path = self.config.paths.taxonomy.as_ref().ok_or_else(|| Error::Config("paths.taxonomy is required for eval".into()))?;
        TaxonomyTree::load(path)
    }

    /// Answers every question of `split` and writes the report and the
    /// per-question predictions.
    pub fn eval(&self, split: Split) -> Result<EvalReport> {
        let records: Vec<PreparedRecord> = self.prepared_records()?.into_iter().filter(|r| r.split == split).collect();
        if records.is_empty() {
            return Err(Error::Config(format!("no {} records to evaluate", split_name(split))));
        }
        let model = self.vqa_model()?;
        let vectors = self.vectors()?;
        let tax = self.taxonomy()?;
        let mut scored = Vec::with_capacity(records.len());
        for (r, ep) in records.iter().zip(self.episodes(&records, &vectors)?) {
            let ans = vqalstm::answer(&model, &ep.v_att, &ep.v_cap, &ep.v_know, &ep.question, &self.config.answer)?;
            scored.push(EvalRecord {
                question: r.question.join(" "),
                prediction: ans.tokens.join(" "),
                truth: r.truth.clone(),
                human_answers: r.human_answers.clone(),
                question_type: r.question_type.clone(),
            });
        }
        let report = build_report_with(&scored, &tax, &PrefixTable::default(), &self.config.eval)?;
        let art = self.artifacts();
        let label = self.label();
        let text = format!(
            "modalities {}  split {}  config {}  seed {}\n{}",
            self.config.modalities,
            split_name(split),
            self.hash,
            self.config.seed,
            report.render()
        );
        std::fs::write(art.report(&label, split), &text).map_err(|e| Error::io(art.report(&label, split), e))?;
        let json = serde_json::json!({ "config_hash": self.hash, "seed": self.config.seed, "report": report });
        std::fs::write(art.report_json(&label, split), serde_json::to_string_pretty(&json)? + "\n")
            .map_err(|e| Error::io(art.report_json(&label, split), e))?;
        write_jsonl(&art.predictions(&label, split), &scored)?;
        Ok(report)
    }

    /// Answers one free-text question about a precomputed image.
    pub fn ask(&self, image_id: &str, question: &str) -> Result<DecodeResult> {
        self.ask_with(&self.vqa_model()?, image_id, question)
    }

    pub fn ask_with(&self, model: &VqaModel, image_id: &str, question: &str) -> Result<DecodeResult> {
        let vectors = self.vectors()?;
        let v = image_vectors(&vectors, image_id).ok_or_else(|| Error::MissingStage {
            what: format!("vectors for image `{image_id}`"),
            path: self.artifacts().vectors(),
            stage: "precompute",
        })?;
        let q = tokenize(question);
        if q.is_empty() {
            return Err(Error::Contract("the question has no words".into()));
        }
        vqalstm::answer(model, &v.v_att, &v.v_cap, &v.v_know, &q, &self.config.answer)
    }

    /// Every stage in order, ending with the test-split report (or the
    /// training split when there is no test file).
    pub fn run_all(&self) -> Result<EvalReport> {
        self.prepare()?;
        self.train_attr()?;
        self.train_captioner()?;
        self.fetch_kb()?;
        self.train_doc2vec()?;
        self.precompute()?;
        self.train_vqa()?;
        let split = if self.config.paths.test.is_some() { Split::Test } else { Split::Train };
        self.eval(split)
    }
}

/// Per-term knowledge text, keyed by term, for seeding caches or mocks.
pub type KnowledgeTable = BTreeMap<String, String>;

/// Writes passages for every term into the cache under `endpoint`, with a
/// fixed timestamp so prefilled caches are reproducible.
pub fn prefill_cache(cache_path: &Path, endpoint: &str, terms: &[String], table: &KnowledgeTable) -> Result<()> {
    let cache = KbCache::open(cache_path)?;
    for term in terms {
        build_comment_query(term)?;
        let comment = table.get(term).cloned().unwrap_or_default();
        cache.put(
            endpoint,
            &KnowledgePassage {
                term: term.clone(),
                not_found: comment.is_empty(),
                comment,
                source: endpoint.into(),
                fetched_at: "1970-01-01T00:00:00+00:00".into(),
            },
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn caption_labels_match_whole_terms() {
        let vocab = AttributeVocab::new(["dog", "hot dog", "cat", "do"].map(String::from).to_vec()).unwrap();
        let labels = labels_from_captions(&vocab, &["A dog eats a hot dog.".into(), "nothing".into()]);
        assert_eq!(labels, [1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn artifacts_are_named_by_modality() {
        let a = Artifacts { dir: "w".into() };
        assert_eq!(a.vqa("att+cap"), Path::new("w/vqa-att+cap.ama"));
        assert_eq!(a.report("att", Split::Test), Path::new("w/report-att-test.txt"));
    }
}
