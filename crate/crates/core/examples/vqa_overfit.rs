//! Memorizes a small set of question/answer episodes with the shared-weight
//! answer LSTM, then answers a few of them.

use kbvqa::numkit::Rng;
use kbvqa::synth::memorization_episodes;
use kbvqa::vqalstm::{self, AnswerConfig, Modalities, VqaDims, VqaModel, VqaTrainConfig};

fn main() -> kbvqa::Result<()> {
    let mut rng = Rng::new(1);
    let episodes = memorization_episodes(32, 16, &mut rng);
    let words = episodes.iter().flat_map(|e| e.question.iter().chain(&e.answer)).map(String::as_str);
    let vocab = vqalstm::vqa_vocab(words, 1)?;
    let dims = VqaDims { attributes: 16, caption: 16, knowledge: 16, hidden: 64 };
    let mut model = VqaModel::new(vocab, dims, Modalities::ALL, &mut rng)?;
    let cfg = VqaTrainConfig { epochs: 150, lr: 0.05, batch_size: 8, dropout: 0.0, ..Default::default() };
    let report = vqalstm::train(&mut model, &episodes, &cfg, &mut rng, |epoch, m| {
        if (epoch + 1) % 25 == 0 {
            println!("epoch {:3}  accuracy {:.3}", epoch + 1, vqalstm::teacher_forced_accuracy(m, &episodes)?);
        }
        Ok(())
    })?;
    println!("cost {:.3} -> {:.3}", report.losses[0], report.losses.last().unwrap());

    let greedy = AnswerConfig { beam_width: None, ..AnswerConfig::default() };
    for e in &episodes[..4] {
        let a = vqalstm::answer(&model, &e.v_att, &e.v_cap, &e.v_know, &e.question, &greedy)?;
        println!("{:?} -> {:?} (want {:?})", e.question.join(" "), a.tokens.join(" "), e.answer.join(" "));
    }
    Ok(())
}
