//! Checks hand-written LSTM gradients against finite differences.

use kbvqa::numkit::{finite_diff_check, lstm_backward, lstm_cell, lstm_forward, LstmParams, LstmState, ParamSet, Rng};

fn main() -> kbvqa::Result<()> {
    let mut rng = Rng::new(7);
    let mut params = LstmParams::zeros(3, 4);
    params.randomize(0.5, &mut rng);
    let x = [0.4, -0.7, 0.9];
    let prev = LstmState { h: vec![0.2, -0.1, 0.3, 0.05], c: vec![0.5, -0.3, 0.1, 0.2] };
    // scalar objective: a fixed projection of the new hidden state
    let w = [0.7f32, -1.1, 0.4, 0.9];

    let (_, cache) = lstm_forward(&params, &x, &prev)?;
    let mut grads = params.zeros_like();
    lstm_backward(&params, &cache, &w, &[0.0; 4], &mut grads);

    let objective = |p: &LstmParams| -> kbvqa::Result<f64> {
        let s = lstm_cell(p, &x, &prev)?;
        Ok(s.h.iter().zip(&w).map(|(&h, &k)| f64::from(h) * f64::from(k)).sum())
    };
    let report = finite_diff_check(&params, &grads, objective, 1e-3, &mut Rng::new(1))?;
    println!("{report:#?}");
    println!("passes at 1e-2: {}", report.passes(1e-2));
    Ok(())
}
