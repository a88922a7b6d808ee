//! Raw question files and the prepared dataset derived from them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{tokenize, Vocab, UNK};
use crate::vqalstm::vqa_vocab;

/// One line of a raw question file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub image_id: String,
    pub question: String,
    /// One answer (single-answer style) or several annotators' answers.
    pub answers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_type: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedRecord {
    pub split: Split,
    pub image_id: String,
    pub question: Vec<String>,
    /// The scored answer: the sole answer, or the most frequent one.
    pub truth: String,
    pub answer: Vec<String>,
    /// All annotator answers for multi-answer records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_answers: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_type: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareStats {
    pub train_records: usize,
    pub test_records: usize,
    pub images: usize,
    pub skipped: usize,
    pub skipped_image_ids: Vec<String>,
    pub vocab_size: usize,
    /// Fraction of test question tokens outside the vocabulary.
    pub test_unk_rate: f64,
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| Error::Parse { path: path.into(), line: i + 1, msg: e.to_string() })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item)?);
        text.push('\n');
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<DatasetRecord>> {
    let records: Vec<DatasetRecord> = read_jsonl(path)?;
    for (i, r) in records.iter().enumerate() {
        if r.answers.is_empty() {
            return Err(Error::Parse { path: path.into(), line: i + 1, msg: "record has no answers".into() });
        }
    }
    Ok(records)
}

/// Most frequent normalized answer; ties go to the earliest.
pub fn consensus_answer(answers: &[String]) -> String {
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
    for (i, a) in answers.iter().enumerate() {
        let e = counts.entry(tokenize(a).join(" ")).or_insert((0, i));
        e.0 += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(k, _)| k)
        .unwrap_or_default()
}

fn prepare_record(split: Split, r: &DatasetRecord) -> PreparedRecord {
    let truth = if r.answers.len() == 1 { tokenize(&r.answers[0]).join(" ") } else { consensus_answer(&r.answers) };
    PreparedRecord {
        split,
        image_id: r.image_id.clone(),
        question: tokenize(&r.question),
        answer: tokenize(&truth),
        truth,
        human_answers: (r.answers.len() > 1).then(|| r.answers.clone()),
        question_type: r.question_type.clone(),
    }
}

/// Tokenizes both splits, drops records whose image has no features and
/// builds the answer vocabulary from the training split.
pub fn prepare_records(
    train: &[DatasetRecord],
    test: &[DatasetRecord],
    known_images: &BTreeSet<String>,
    min_count: usize,
) -> Result<(Vec<PreparedRecord>, Vocab, PrepareStats)> {
    let mut skipped_ids = BTreeSet::new();
    let mut skipped = 0;
    let mut out = Vec::with_capacity(train.len() + test.len());
    for (split, records) in [(Split::Train, train), (Split::Test, test)] {
        for r in records {
            if known_images.contains(&r.image_id) {
                out.push(prepare_record(split, r));
            } else {
                skipped += 1;
                skipped_ids.insert(r.image_id.clone());
            }
        }
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} records whose image has no region features: {skipped_ids:?}");
    }
    let train_tokens = out
        .iter()
        .filter(|r| r.split == Split::Train)
        .flat_map(|r| r.question.iter().chain(&r.answer))
        .map(String::as_str);
    let vocab = vqa_vocab(train_tokens, min_count)?;
    let (mut unk, mut total) = (0usize, 0usize);
    for r in out.iter().filter(|r| r.split == Split::Test) {
        total += r.question.len();
        unk += r.question.iter().filter(|t| !vocab.contains(t)).count();
    }
    let images: BTreeSet<&str> = out.iter().map(|r| r.image_id.as_str()).collect();
    let stats = PrepareStats {
        train_records: out.iter().filter(|r| r.split == Split::Train).count(),
        test_records: out.iter().filter(|r| r.split == Split::Test).count(),
        images: images.len(),
        skipped,
        skipped_image_ids: skipped_ids.into_iter().collect(),
        vocab_size: vocab.len(),
        test_unk_rate: if total == 0 { 0.0 } else { unk as f64 / total as f64 },
    };
    debug_assert!(vocab.contains(UNK));
    Ok((out, vocab, stats))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub image_id: String,
    pub caption: String,
}

/// Reference captions grouped by image, in file order within each image.
pub fn read_captions(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    let mut by_image: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for r in read_jsonl::<CaptionRecord>(path)? {
        by_image.entry(r.image_id).or_default().push(r.caption);
    }
    Ok(by_image)
}
