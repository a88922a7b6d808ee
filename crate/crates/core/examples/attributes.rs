//! Region-level attribute classifier with max pooling over regions. Each
//! image holds one informative region among noise regions.

use kbvqa::attrnet::{self, AttrExample, AttrModel, AttrTrainConfig, AttributeVocab, Head, RegionFeatureSet};
use kbvqa::numkit::{Rng, Tensor};

const DIM: usize = 12;
const REGIONS: usize = 4;

fn main() -> kbvqa::Result<()> {
    let vocab = AttributeVocab::new(["dog", "cat", "ball", "grass"].map(String::from).to_vec())?;
    let mut rng = Rng::new(2);
    // a fixed prototype feature per attribute
    let prototypes: Vec<Vec<f32>> = (0..vocab.len()).map(|_| (0..DIM).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect();

    let mut data = Vec::new();
    for i in 0..80 {
        let present = [i % 4, (i / 4) % 4];
        let mut feats = Vec::new();
        for r in 0..REGIONS {
            for d in 0..DIM {
                let base = if r < 2 { prototypes[present[r]][d] } else { 0.0 };
                feats.push(base + rng.uniform(-0.3, 0.3));
            }
        }
        let mut labels = vec![0.0; vocab.len()];
        for &p in &present {
            labels[p] = 1.0;
        }
        let regions = RegionFeatureSet::new(format!("img{i}"), Tensor::new(vec![REGIONS, DIM], feats)?)?;
        data.push(AttrExample { regions, labels });
    }

    let mut model = AttrModel::new(DIM, Some(16), vocab.len(), Head::Sigmoid, &mut rng);
    let cfg = AttrTrainConfig { epochs: 40, hidden_lr: 0.1, head_lr: 0.1, decay_every: 30, dropout: 0.0, batch_size: 8, ..Default::default() };
    let losses = attrnet::train_attr(&mut model, &data, &cfg, &mut rng)?;
    println!("loss {:.3} -> {:.3}", losses[0], losses.last().unwrap());

    for ex in &data[..4] {
        let scores = attrnet::predict(&model, &ex.regions)?;
        let top = attrnet::top_k_attributes(&scores, &vocab, 2)?;
        let probs: Vec<String> = scores.v_att.iter().map(|p| format!("{p:.2}")).collect();
        println!("{}: top {:?}, v_att [{}], labels {:?}", ex.regions.image_id, top, probs.join(" "), ex.labels);
    }
    Ok(())
}
