//! Writes a generated dataset, runs every pipeline stage and asks a
//! question. Pass a directory to keep the artifacts.

use kbvqa::pipeline::{Pipeline, Split};
use kbvqa::synth::{write_world, WorldConfig};

fn main() -> kbvqa::Result<()> {
    let keep = std::env::args().nth(1);
    let tmp = tempfile::tempdir().expect("tempdir");
    let dir = keep.as_deref().map(std::path::Path::new).unwrap_or(tmp.path());
    let world = write_world(dir, &WorldConfig { entities: 16, ..WorldConfig::default() }, 1)?;
    let mut config = world.config.clone();
    config.captioner.epochs = 20;
    config.vqa.epochs = 40;

    let p = Pipeline::new(config)?;
    println!("config hash {}", p.config_hash());
    println!("{:?}", p.prepare()?);
    let attr = p.train_attr()?;
    println!("attr loss {:.3} -> {:.3}", attr[0], attr.last().unwrap());
    let cap = p.train_captioner()?;
    println!("captioner token accuracy {:.3}", cap.final_accuracy);
    println!("{:?}", p.fetch_kb()?);
    p.train_doc2vec()?;
    println!("{:?}", p.precompute()?);
    p.train_vqa()?;
    print!("{}", p.eval(Split::Test)?.render());

    for q in ["what color is it", "where does it live"] {
        let a = p.ask("img0000", q)?;
        println!("img0000 {q:?} -> {:?} ({:.3})", a.tokens.join(" "), a.log_prob);
    }
    Ok(())
}
