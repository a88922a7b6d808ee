use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use kbvqa::numkit::Container;
use kbvqa::pipeline::{image_vectors, read_jsonl, write_jsonl, CaptionRecord, DatasetRecord, Pipeline, PipelineConfig, Split};
use kbvqa::synth::{write_world, WorldConfig};
use kbvqa::vqalstm::{force_end, Modalities};
use kbvqa::Error;

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

/// A small world trained through precompute, built once per test binary.
fn base_world() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let w = write_world(dir.path(), &WorldConfig { entities: 8, ..WorldConfig::default() }, 4).unwrap();
        let mut config = PipelineConfig::from_toml(&std::fs::read_to_string(&w.config_path).unwrap()).unwrap();
        config.captioner.epochs = 10;
        config.doc2vec.epochs = 20;
        config.save(&w.config_path).unwrap();
        let p = Pipeline::new(PipelineConfig::load(&w.config_path).unwrap()).unwrap();
        p.prepare().unwrap();
        p.train_attr().unwrap();
        p.train_captioner().unwrap();
        p.fetch_kb().unwrap();
        p.train_doc2vec().unwrap();
        p.precompute().unwrap();
        dir
    })
    .path()
}

/// Private copy of the base world, so tests can modify artifacts.
fn world_copy() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(base_world(), dir.path());
    let config = dir.path().join("config.toml");
    (dir, config)
}

fn pipeline(config: &Path) -> Pipeline {
    Pipeline::new(PipelineConfig::load(config).unwrap()).unwrap()
}

#[test]
fn precompute_rerun_does_no_work() {
    let (_dir, config) = world_copy();
    let p = pipeline(&config);
    let before = std::fs::read(p.artifacts().vectors()).unwrap();
    // with every image present the models are never loaded
    std::fs::remove_file(p.artifacts().captioner()).unwrap();
    std::fs::remove_file(p.artifacts().doc2vec()).unwrap();
    let stats = p.precompute().unwrap();
    assert_eq!(stats.computed, 0);
    assert_eq!(stats.skipped, 8 * 5);
    assert_eq!(std::fs::read(p.artifacts().vectors()).unwrap(), before);
}

#[test]
fn deleting_one_key_recomputes_exactly_that_image() {
    let (_dir, config) = world_copy();
    let p = pipeline(&config);
    let path = p.artifacts().vectors();
    let original = Container::load(&path).unwrap();
    let mut damaged = original.clone();
    damaged.remove("img0007/cap").unwrap();
    damaged.save(&path).unwrap();
    let stats = p.precompute().unwrap();
    assert_eq!(stats.computed, 1);
    let repaired = Container::load(&path).unwrap();
    let names: Vec<&str> = original.names().collect();
    assert_eq!(repaired.names().collect::<Vec<_>>(), names);
    for name in names {
        assert_eq!(repaired.get(name), original.get(name), "{name}");
    }
}

#[test]
fn images_shared_by_records_are_stored_once() {
    let (dir, config) = world_copy();
    let train_path = dir.path().join("train.jsonl");
    let mut train: Vec<DatasetRecord> = read_jsonl(&train_path).unwrap();
    let mut extra = train[0].clone();
    extra.question = "where does it live".into();
    train.push(extra);
    write_jsonl(&train_path, &train).unwrap();
    let p = pipeline(&config);
    p.prepare().unwrap();
    let stats = p.precompute().unwrap();
    assert_eq!(stats.computed, 0);
    let records = p.prepared_records().unwrap();
    let vectors = Container::load(p.artifacts().vectors()).unwrap();
    let images: std::collections::BTreeSet<&str> = records.iter().map(|r| r.image_id.as_str()).collect();
    assert_eq!(records.len(), images.len() + 1);
    assert_eq!(vectors.len(), 3 * images.len());
}

#[test]
fn stages_name_their_missing_prerequisite() {
    let dir = tempfile::tempdir().unwrap();
    let w = write_world(dir.path(), &WorldConfig { entities: 4, ..WorldConfig::default() }, 1).unwrap();
    let p = pipeline(&w.config_path);
    assert!(matches!(p.train_vqa(), Err(Error::MissingStage { stage: "prepare", .. })));
    p.prepare().unwrap();
    assert!(matches!(p.train_captioner(), Err(Error::MissingStage { stage: "train-attr", .. })));
    assert!(matches!(p.precompute(), Err(Error::MissingStage { .. })));
    assert!(matches!(p.ask("img0000", "what color is it"), Err(Error::MissingStage { .. })));
    let e = p.eval(Split::Test).unwrap_err();
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn end_forcing_model_answers_nothing_with_certainty() {
    let (_dir, config) = world_copy();
    let mut c = PipelineConfig::load(&config).unwrap();
    c.vqa.epochs = 1;
    let p = Pipeline::new(c).unwrap();
    p.train_vqa().unwrap();
    let mut model = p.vqa_model().unwrap();
    force_end(&mut model);
    let ans = p.ask_with(&model, "img0003", "what color is it").unwrap();
    assert!(ans.tokens.is_empty());
    assert_eq!(ans.log_prob, 0.0);
}

#[test]
fn trained_model_fits_its_training_split() {
    let (_dir, config) = world_copy();
    let mut c = PipelineConfig::load(&config).unwrap();
    c.modalities = Modalities::ALL;
    c.vqa.dropout = 0.0;
    c.vqa.epochs = 200;
    let p = Pipeline::new(c).unwrap();
    p.train_vqa().unwrap();
    let report = p.eval(Split::Train).unwrap();
    assert!(report.accuracy >= 95.0, "train accuracy {}", report.accuracy);
    let text = std::fs::read_to_string(p.artifacts().report("att+cap+know", Split::Train)).unwrap();
    assert!(text.contains(p.config_hash()));
}

#[test]
fn default_dimensions_give_full_size_vectors() {
    let dir = tempfile::tempdir().unwrap();
    // 252 creatures + 4 scene terms = 256 attributes
    let w = write_world(dir.path(), &WorldConfig { entities: 252, ..WorldConfig::default() }, 2).unwrap();
    let keep = ["img0000", "img0005"];
    let train: Vec<DatasetRecord> = read_jsonl(&dir.path().join("train.jsonl")).unwrap();
    let train: Vec<_> = train.into_iter().filter(|r| keep.contains(&r.image_id.as_str())).collect();
    write_jsonl(&dir.path().join("train.jsonl"), &train).unwrap();
    write_jsonl::<DatasetRecord>(&dir.path().join("test.jsonl"), &[]).unwrap();
    let caps: Vec<CaptionRecord> = read_jsonl(&dir.path().join("captions.jsonl")).unwrap();
    let caps: Vec<_> = caps.into_iter().filter(|r| keep.contains(&r.image_id.as_str())).collect();
    write_jsonl(&dir.path().join("captions.jsonl"), &caps).unwrap();

    let mut c = PipelineConfig::load(&w.config_path).unwrap();
    let defaults = PipelineConfig::default();
    c.model = defaults.model.clone();
    c.doc2vec = defaults.doc2vec.clone();
    c.attr.epochs = 1;
    c.captioner.epochs = 1;
    c.doc2vec.epochs = 1;
    c.doc2vec.infer_steps = 2;
    let p = Pipeline::new(c).unwrap();
    p.prepare().unwrap();
    p.train_attr().unwrap();
    p.train_captioner().unwrap();
    p.fetch_kb().unwrap();
    p.train_doc2vec().unwrap();
    p.precompute().unwrap();
    let vectors = Container::load(p.artifacts().vectors()).unwrap();
    let v = image_vectors(&vectors, "img0000").unwrap();
    assert_eq!((v.v_att.len(), v.v_cap.len(), v.v_know.len()), (256, 512, 500));
}
