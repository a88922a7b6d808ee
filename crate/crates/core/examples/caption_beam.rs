//! Trains a small attribute-conditioned caption model and decodes five
//! captions per attribute vector with beam search.

use kbvqa::captioner::{self, caption_vocab, generate_caption_set, CaptionModel, CaptionPair, CaptionTrainConfig, DecodeConfig};
use kbvqa::numkit::Rng;

fn main() -> kbvqa::Result<()> {
    let animals = ["dog", "cat", "bird"];
    let colors = ["red", "blue"];
    // attribute vector: one slot per animal, then per color
    let mut pairs = Vec::new();
    for (a, animal) in animals.iter().enumerate() {
        for (c, color) in colors.iter().enumerate() {
            let mut v_att = vec![0.0; animals.len() + colors.len()];
            v_att[a] = 1.0;
            v_att[animals.len() + c] = 1.0;
            for text in [format!("a {color} {animal}"), format!("the {animal} is {color}")] {
                pairs.push(CaptionPair { v_att: v_att.clone(), caption: text.split(' ').map(String::from).collect() });
            }
        }
    }
    let words: Vec<&str> = pairs.iter().flat_map(|p| p.caption.iter().map(String::as_str)).collect();
    let mut rng = Rng::new(3);
    let mut model = CaptionModel::new(caption_vocab(words, 1)?, 5, 16, 32, &mut rng)?;
    let cfg = CaptionTrainConfig { epochs: 80, lr: 0.1, batch_size: 1, ..Default::default() };
    let report = captioner::train_captioner(&mut model, &pairs, &cfg, &mut rng)?;
    println!(
        "loss {:.3} -> {:.3}, token accuracy {:.2}",
        report.losses[0],
        report.losses.last().unwrap(),
        report.final_accuracy
    );

    let v_att = [0.0, 1.0, 0.0, 0.0, 1.0]; // cat, blue
    let set = generate_caption_set(&model, &v_att, &DecodeConfig { beam_width: 5, max_len: 8 })?;
    for c in &set.captions {
        println!("{:8.3}  {}", c.log_prob, c.tokens.join(" "));
    }
    println!("v_cap has {} dims, degenerate={}", set.v_cap.len(), set.degenerate);
    Ok(())
}
