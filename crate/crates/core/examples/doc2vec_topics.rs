//! Paragraph vectors on a two-topic corpus: documents from the same topic
//! end up closer than documents from different topics.

use kbvqa::doc2vec::{self, infer_vector, Doc2VecConfig};
use kbvqa::numkit::{cosine, Rng};
use kbvqa::synth::topic_corpus;

fn main() -> kbvqa::Result<()> {
    let mut rng = Rng::new(1);
    let docs = topic_corpus(2, 20, 12, &mut rng);
    let corpus: Vec<String> = docs.iter().map(|d| d.1.clone()).collect();
    let cfg = Doc2VecConfig { dim: 16, window: 2, epochs: 40, lr: 0.05, ..Default::default() };
    let trained = doc2vec::train(&corpus, &cfg, &mut rng)?;
    println!("loss {:.3} -> {:.3}", trained.losses[0], trained.losses.last().unwrap());

    let m = &trained.model;
    let (mut within, mut across, mut nw, mut na) = (0.0, 0.0, 0, 0);
    for i in 0..docs.len() {
        for j in i + 1..docs.len() {
            let c = f64::from(cosine(m.doc_vector(i), m.doc_vector(j)));
            if docs[i].0 == docs[j].0 {
                within += c;
                nw += 1;
            } else {
                across += c;
                na += 1;
            }
        }
    }
    println!("mean cosine within topic {:.3}, across {:.3}", within / nw as f64, across / na as f64);

    let unseen = &corpus[0];
    let v = infer_vector(m, unseen, 50, 0.05, &mut rng)?;
    println!("inferred vector for doc 0: cosine to its trained vector {:.3}, coverage {:.2}", cosine(&v.v_know, m.doc_vector(0)), v.coverage);
    Ok(())
}
