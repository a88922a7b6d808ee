//! Seeded synthetic data for fixtures, examples and smoke runs.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numkit::{Container, Rng, Tensor};
use crate::pipeline::{prefill_cache, write_jsonl, CaptionRecord, DatasetRecord, KnowledgeTable, PipelineConfig};
use crate::vqalstm::{Episode, Modalities};

/// Documents drawn from `topics` disjoint word sets. Each document walks
/// its topic's words in a fixed cyclic order from a random offset, with an
/// occasional random topic word swapped in.
pub fn topic_corpus(topics: usize, docs_per_topic: usize, doc_len: usize, rng: &mut Rng) -> Vec<(usize, String)> {
    const WORDS_PER_TOPIC: usize = 12;
    let vocab: Vec<Vec<String>> = (0..topics)
        .map(|t| (0..WORDS_PER_TOPIC).map(|w| format!("{}{w}", topic_prefix(t))).collect())
        .collect();
    let mut docs = Vec::with_capacity(topics * docs_per_topic);
    for (t, words) in vocab.iter().enumerate() {
        for _ in 0..docs_per_topic {
            let start = rng.below(WORDS_PER_TOPIC);
            let text: Vec<&str> = (0..doc_len)
                .map(|k| {
                    let idx = if rng.unit_f64() < 0.1 { rng.below(WORDS_PER_TOPIC) } else { (start + k) % WORDS_PER_TOPIC };
                    words[idx].as_str()
                })
                .collect();
            docs.push((t, text.join(" ")));
        }
    }
    docs
}

/// Episodes with random modality vectors, 3-5 word questions over 16 words
/// and 1-2 word answers over 24 words (42 vocabulary entries with UNK and
/// END). Nothing links inputs to answers, so they can only be memorized.
pub fn memorization_episodes(n: usize, feature_dim: usize, rng: &mut Rng) -> Vec<Episode> {
    const QUESTION_WORDS: [&str; 16] = [
        "what", "is", "the", "color", "where", "how", "many", "are", "there", "on", "of", "which", "does", "this", "it", "who",
    ];
    const ANSWER_WORDS: [&str; 24] = [
        "red", "blue", "green", "two", "three", "four", "dog", "cat", "bird", "table", "chair", "kite", "park", "beach", "yes",
        "no", "man", "woman", "ball", "tree", "car", "bus", "left", "right",
    ];
    let vector = |rng: &mut Rng| (0..feature_dim).map(|_| rng.uniform(-1.0, 1.0)).collect::<Vec<f32>>();
    (0..n)
        .map(|_| {
            let (v_att, v_cap, v_know) = (vector(rng), vector(rng), vector(rng));
            let q_len = 3 + rng.below(3);
            let a_len = 1 + rng.below(2);
            Episode {
                v_att,
                v_cap,
                v_know,
                question: (0..q_len).map(|_| QUESTION_WORDS[rng.below(QUESTION_WORDS.len())].to_string()).collect(),
                answer: (0..a_len).map(|_| ANSWER_WORDS[rng.below(ANSWER_WORDS.len())].to_string()).collect(),
            }
        })
        .collect()
}

fn topic_prefix(t: usize) -> String {
    // letters only, so tokenization keeps each word whole
    let mut s = String::new();
    let mut n = t;
    loop {
        s.push((b'a' + (n % 26) as u8) as char);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    format!("topic{s}w")
}

pub const COLORS: [&str; 4] = ["red", "blue", "green", "yellow"];
pub const HABITATS: [&str; 4] = ["jungle", "desert", "ocean", "forest"];
/// Attribute terms present in every image; they have no knowledge entry.
pub const SCENE_TERMS: [&str; 4] = ["photo", "scene", "view", "picture"];
pub const COLOR_QUESTION: &str = "what color is it";
pub const HABITAT_QUESTION: &str = "where does it live";
/// Endpoint the generated cache is keyed under.
pub const WORLD_ENDPOINT: &str = "http://localhost:8890/sparql";

/// Shape of a generated question-answering world.
///
/// Every image shows one creature. Its color is stated only by the
/// reference captions and its habitat only by the knowledge base. Half the
/// creatures are asked about color during training and about habitat at
/// test time; the other half the other way round. Answering a test
/// question therefore needs the caption or the knowledge channel.
#[derive(Debug, Clone)]
pub struct WorldConfig {
    pub entities: usize,
    pub train_images_per_entity: usize,
    pub test_images_per_entity: usize,
    pub feature_dim: usize,
    pub noise: f32,
    /// Write a knowledge cache so no endpoint is ever contacted.
    pub prefill_cache: bool,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            entities: 64,
            train_images_per_entity: 3,
            test_images_per_entity: 2,
            feature_dim: 48,
            noise: 0.2,
            prefill_cache: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Creature {
    pub name: String,
    pub color: &'static str,
    pub habitat: &'static str,
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    /// Loaded from the written config file, paths absolute.
    pub config: PipelineConfig,
    pub config_path: std::path::PathBuf,
    pub creatures: Vec<Creature>,
    /// Knowledge-base comment per attribute term.
    pub knowledge: KnowledgeTable,
}

fn creature_names(n: usize, rng: &mut Rng) -> Vec<String> {
    const C: &[u8] = b"bdfgklmnprstvz";
    const V: &[u8] = b"aeiou";
    let reserved: BTreeSet<&str> = COLORS.iter().chain(&HABITATS).chain(&SCENE_TERMS).copied().collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut w = String::new();
        for _ in 0..3 {
            w.push(C[rng.below(C.len())] as char);
            w.push(V[rng.below(V.len())] as char);
        }
        if !reserved.contains(w.as_str()) && seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn knowledge_comment(c: &Creature) -> String {
    format!(
        "The {n} is a creature of the {h}. It lives in the {h}, makes its home in the {h} and is rarely seen outside the {h}.",
        n = c.name,
        h = c.habitat
    )
}

fn captions_for(c: &Creature) -> [String; 5] {
    let (n, k) = (&c.name, c.color);
    [
        format!("a {k} {n} in a photo"),
        format!("the {k} {n} in this scene"),
        format!("{k} {n} seen in a picture view"),
        format!("a {k} {n} and it is {k}"),
        format!("the {n} is {k} in this view"),
    ]
}

/// Desk-scale settings for a generated world.
pub fn world_pipeline_config() -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.modalities = Modalities::ALL;
    c.paths.test = Some("test.jsonl".into());
    c.paths.taxonomy = Some("taxonomy.tsv".into());
    c.model.attr_hidden = None;
    c.model.caption_embed = 32;
    c.model.caption_hidden = 64;
    c.model.vqa_hidden = 64;
    c.attr.epochs = 30;
    c.attr.head_lr = 0.5;
    c.attr.decay_every = 20;
    c.attr.dropout = 0.0;
    c.attr.batch_size = 8;
    c.captioner.epochs = 60;
    c.captioner.lr = 0.1;
    c.captioner.batch_size = 1;
    c.decode.max_len = 12;
    c.doc2vec.dim = 32;
    c.doc2vec.epochs = 100;
    c.doc2vec.infer_steps = 50;
    c.vqa.epochs = 100;
    c.vqa.lr = 0.05;
    c.vqa.batch_size = 8;
    c.vqa.dropout = 0.5;
    c.vqa.lambda = 1e-5;
    c.answer.max_answer_len = 3;
    c.knowledge.endpoint = WORLD_ENDPOINT.into();
    c
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| Error::Io { path: path.into(), source: e })
}

/// Generates every input file of a pipeline run into `dir`, plus a
/// `config.toml` pointing at them.
pub fn write_world(dir: &Path, world: &WorldConfig, seed: u64) -> Result<SyntheticWorld> {
    io(dir, std::fs::create_dir_all(dir))?;
    let mut rng = Rng::new(seed);
    let names = creature_names(world.entities, &mut rng);
    let creatures: Vec<Creature> = names
        .into_iter()
        .enumerate()
        .map(|(i, name)| Creature { name, color: COLORS[(i / 2) % 4], habitat: HABITATS[(i / 2 + i / 8) % 4] })
        .collect();

    let mut attributes: Vec<String> = SCENE_TERMS.iter().map(|s| s.to_string()).collect();
    attributes.extend(creatures.iter().map(|c| c.name.clone()));
    let attr_path = dir.join("attributes.txt");
    io(&attr_path, std::fs::write(&attr_path, attributes.join("\n") + "\n"))?;

    let d = world.feature_dim;
    let proto = |rng: &mut Rng| -> Vec<f32> { (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect() };
    let scene = proto(&mut rng);
    let protos: Vec<Vec<f32>> = creatures.iter().map(|_| proto(&mut rng)).collect();
    let mut features = Container::new();
    let mut captions = Vec::new();
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut image = 0usize;
    for (i, c) in creatures.iter().enumerate() {
        let per = world.train_images_per_entity + world.test_images_per_entity;
        for k in 0..per {
            let id = format!("img{image:04}");
            image += 1;
            let noisy = |base: Option<&Vec<f32>>, rng: &mut Rng| -> Vec<f32> {
                (0..d).map(|j| base.map_or(0.0, |b| b[j]) + rng.uniform(-world.noise, world.noise)).collect()
            };
            let mut data = noisy(Some(&protos[i]), &mut rng);
            data.extend(noisy(Some(&scene), &mut rng));
            data.extend(noisy(None, &mut rng));
            features.insert(id.clone(), Tensor::new(vec![3, d], data)?);

            let is_train = k < world.train_images_per_entity;
            // even creatures: color in training, habitat at test; odd: reverse
            let ask_color = (i % 2 == 0) == is_train;
            let (question, answer) = if ask_color { (COLOR_QUESTION, c.color) } else { (HABITAT_QUESTION, c.habitat) };
            let rec = DatasetRecord { image_id: id.clone(), question: question.into(), answers: vec![answer.into()], question_type: None };
            if is_train {
                for cap in captions_for(c) {
                    captions.push(CaptionRecord { image_id: id.clone(), caption: cap });
                }
                train.push(rec);
            } else {
                test.push(rec);
            }
        }
    }
    features.meta.insert("kind".into(), "region-features".into());
    features.meta.insert("seed".into(), seed.to_string());
    features.save(dir.join("features.ama"))?;
    write_jsonl(&dir.join("captions.jsonl"), &captions)?;
    write_jsonl(&dir.join("train.jsonl"), &train)?;
    write_jsonl(&dir.join("test.jsonl"), &test)?;

    let mut taxonomy = String::new();
    for group in ["creature", "color", "place"] {
        taxonomy.push_str(&format!("{group}\tentity\n"));
    }
    for c in &creatures {
        taxonomy.push_str(&format!("{}\tcreature\n", c.name));
    }
    for c in COLORS {
        taxonomy.push_str(&format!("{c}\tcolor\n"));
    }
    for h in HABITATS {
        taxonomy.push_str(&format!("{h}\tplace\n"));
    }
    let tax_path = dir.join("taxonomy.tsv");
    io(&tax_path, std::fs::write(&tax_path, taxonomy))?;

    let knowledge: KnowledgeTable = creatures.iter().map(|c| (c.name.clone(), knowledge_comment(c))).collect();
    let cache_path = dir.join("kb_cache.jsonl");
    if cache_path.exists() {
        io(&cache_path, std::fs::remove_file(&cache_path))?;
    }
    if world.prefill_cache {
        prefill_cache(&cache_path, WORLD_ENDPOINT, &attributes, &knowledge)?;
    }

    let mut config = world_pipeline_config();
    config.seed = seed;
    let config_path = dir.join("config.toml");
    config.save(&config_path)?;
    let config = PipelineConfig::load(&config_path)?;
    Ok(SyntheticWorld { config, config_path, creatures, knowledge })
}
