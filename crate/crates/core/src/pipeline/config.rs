use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attrnet::{AttrTrainConfig, Head};
use crate::captioner::{CaptionTrainConfig, DecodeConfig};
use crate::doc2vec::Doc2VecConfig;
use crate::error::{Error, Result};
use crate::evalkit::EvalConfig;
use crate::knowledge::{FetchPolicy, DEFAULT_ENDPOINT};
use crate::vqalstm::{AnswerConfig, Modalities, VqaTrainConfig};

/// Input files and the working directory. Relative paths are resolved
/// against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub train: PathBuf,
    pub test: Option<PathBuf>,
    /// Region features, one tensor per image id.
    pub features: PathBuf,
    /// Attribute vocabulary, one term per line.
    pub attributes: PathBuf,
    /// Reference captions, `{"image_id", "caption"}` per line.
    pub captions: PathBuf,
    pub taxonomy: Option<PathBuf>,
    pub cache: PathBuf,
    pub work_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            train: "train.jsonl".into(),
            test: None,
            features: "features.ama".into(),
            attributes: "attributes.txt".into(),
            captions: "captions.jsonl".into(),
            taxonomy: None,
            cache: "kb_cache.jsonl".into(),
            work_dir: "work".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub attr_hidden: Option<usize>,
    pub attr_head: Head,
    pub caption_embed: usize,
    pub caption_hidden: usize,
    pub caption_min_count: usize,
    pub vqa_hidden: usize,
    pub vocab_min_count: usize,
    /// Attribute terms sent to the knowledge base per image.
    pub kb_terms: usize,
    /// Rescale each knowledge vector to unit length before storing it.
    pub normalize_knowledge: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            attr_hidden: None,
            attr_head: Head::Sigmoid,
            caption_embed: 256,
            caption_hidden: 512,
            caption_min_count: 1,
            vqa_hidden: 256,
            vocab_min_count: 1,
            kb_terms: crate::attrnet::KB_TOP_K,
            normalize_knowledge: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnowledgeConfig {
    pub endpoint: String,
    #[serde(flatten)]
    pub policy: FetchPolicy,
}

impl Default for KnowledgeConfig {
    fn default() -> Self {
        Self { endpoint: DEFAULT_ENDPOINT.into(), policy: FetchPolicy::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub modalities: Modalities,
    pub paths: PathsConfig,
    pub model: ModelConfig,
    pub attr: AttrTrainConfig,
    pub captioner: CaptionTrainConfig,
    pub decode: DecodeConfig,
    pub doc2vec: Doc2VecConfig,
    pub vqa: VqaTrainConfig,
    pub answer: AnswerConfig,
    pub knowledge: KnowledgeConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            modalities: Modalities::ALL,
            paths: PathsConfig::default(),
            model: ModelConfig::default(),
            attr: AttrTrainConfig::default(),
            captioner: CaptionTrainConfig::default(),
            decode: DecodeConfig::default(),
            doc2vec: Doc2VecConfig::default(),
            vqa: VqaTrainConfig::default(),
            answer: AnswerConfig::default(),
            knowledge: KnowledgeConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Reads a config file and makes its relative paths absolute.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        for path in [&mut p.train, &mut p.features, &mut p.attributes, &mut p.captions, &mut p.cache, &mut p.work_dir] {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        for path in [&mut p.test, &mut p.taxonomy].into_iter().flatten() {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    /// Checks value ranges and that every input file exists.
    pub fn validate(&self) -> Result<()> {
        let p = &self.paths;
        let inputs = [Some(&p.train), Some(&p.features), Some(&p.attributes), Some(&p.captions), p.test.as_ref(), p.taxonomy.as_ref()];
        for path in inputs.into_iter().flatten() {
            if !path.exists() {
                return Err(Error::Config(format!("input file {} does not exist", path.display())));
            }
        }
        let m = &self.model;
        let positive = [
            ("model.caption_embed", m.caption_embed),
            ("model.caption_hidden", m.caption_hidden),
            ("model.vqa_hidden", m.vqa_hidden),
            ("model.kb_terms", m.kb_terms),
            ("doc2vec.dim", self.doc2vec.dim),
            ("decode.max_len", self.decode.max_len),
            ("answer.max_answer_len", self.answer.max_answer_len),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.vqa.dropout) || !(0.0..1.0).contains(&self.attr.dropout) {
            return Err(Error::Config("dropout must be in [0, 1)".into()));
        }
        if self.vqa.lambda < 0.0 {
            return Err(Error::Config("vqa.lambda must be nonnegative".into()));
        }
        if self.vqa.lr <= 0.0 || self.captioner.lr <= 0.0 || self.doc2vec.lr <= 0.0 {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        Ok(())
    }

    /// First 16 hex digits of SHA-256 over the config with `paths`
    /// removed, so the same settings hash alike in any directory.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("paths");
        }
        let canonical = serde_json::to_string(&value).expect("json value serializes");
        hex::encode(&Sha256::digest(canonical.as_bytes())[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_defaults() {
        let c = PipelineConfig::default();
        let back = PipelineConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back.hash(), c.hash());
        assert_eq!(back.model, c.model);
        let partial = PipelineConfig::from_toml("seed = 7\nmodalities = \"att,know\"\n[vqa]\nepochs = 3\n").unwrap();
        assert_eq!(partial.seed, 7);
        assert_eq!(partial.vqa.epochs, 3);
        assert_eq!(partial.vqa.batch_size, 100);
        assert!(!partial.modalities.cap);
        assert!(PipelineConfig::from_toml("modalities = \"att,depth\"").is_err());
        assert!(PipelineConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn hash_ignores_paths_but_not_settings() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.paths.work_dir = "/elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn missing_inputs_fail_validation() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = PipelineConfig::default();
        c.resolve_paths(dir.path());
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
