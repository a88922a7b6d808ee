//! Single-layer LSTM cell with input, forget and output gates and a tanh
//! candidate. Gate pre-activations are stacked `[i, f, g, o]` along the
//! first axis of the weight matrices.

use crate::error::{ensure, Result};
use crate::numkit::ops::{sigmoid, tanh};
use crate::numkit::tensor::{add_outer, matvec, matvec_t_acc};
use crate::numkit::{Rng, Tensor};

/// Initial forget-gate bias.
pub const FORGET_BIAS: f32 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `[4h, d_in]`
    pub w_x: Tensor,
    /// `[4h, h]`
    pub w_h: Tensor,
    /// `[4h]`
    pub b: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f32>,
    pub c: Vec<f32>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self { h: vec![0.0; hidden], c: vec![0.0; hidden] }
    }
}

/// Activations kept from a forward step for backpropagation.
#[derive(Debug, Clone)]
pub struct LstmCache {
    x: Vec<f32>,
    h_prev: Vec<f32>,
    c_prev: Vec<f32>,
    i: Vec<f32>,
    f: Vec<f32>,
    g: Vec<f32>,
    o: Vec<f32>,
    tanh_c: Vec<f32>,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_x: Tensor::zeros(&[4 * hidden, input]),
            w_h: Tensor::zeros(&[4 * hidden, hidden]),
            b: Tensor::zeros(&[4 * hidden]),
        }
    }

    /// Uniform weights in `[-scale, scale]`, zero biases except the forget
    /// gate, which starts at [`FORGET_BIAS`].
    pub fn init(input: usize, hidden: usize, scale: f32, rng: &mut Rng) -> Self {
        let mut p = Self {
            w_x: Tensor::uniform(&[4 * hidden, input], scale, rng),
            w_h: Tensor::uniform(&[4 * hidden, hidden], scale, rng),
            b: Tensor::zeros(&[4 * hidden]),
        };
        p.b.data_mut()[hidden..2 * hidden].fill(FORGET_BIAS);
        p
    }

    pub fn hidden(&self) -> usize {
        self.w_h.cols()
    }

    pub fn input(&self) -> usize {
        self.w_x.cols()
    }

    fn check(&self, x: &[f32], prev: &LstmState) -> Result<()> {
        let h = self.hidden();
        ensure!(
            self.w_h.shape() == [4 * h, h] && self.b.len() == 4 * h && self.w_x.rows() == 4 * h,
            "inconsistent LSTM parameter shapes {:?} {:?} {:?}",
            self.w_x.shape(),
            self.w_h.shape(),
            self.b.shape()
        );
        ensure!(
            x.len() == self.input(),
            "LSTM input has length {}, expected {}",
            x.len(),
            self.input()
        );
        ensure!(
            prev.h.len() == h && prev.c.len() == h,
            "LSTM state has lengths ({}, {}), expected {h}",
            prev.h.len(),
            prev.c.len()
        );
        Ok(())
    }
}

/// One LSTM step. Inputs are left untouched.
pub fn lstm_cell(params: &LstmParams, x: &[f32], prev: &LstmState) -> Result<LstmState> {
    lstm_forward(params, x, prev).map(|(s, _)| s)
}

/// One LSTM step that also returns the cache needed by [`lstm_backward`].
pub fn lstm_forward(
    params: &LstmParams,
    x: &[f32],
    prev: &LstmState,
) -> Result<(LstmState, LstmCache)> {
    params.check(x, prev)?;
    let hd = params.hidden();
    let zx = matvec(params.w_x.data(), 4 * hd, x);
    let zh = matvec(params.w_h.data(), 4 * hd, &prev.h);
    let b = params.b.data();
    let z = |k: usize| zx[k] + zh[k] + b[k];

    let i: Vec<f32> = (0..hd).map(|k| sigmoid(z(k))).collect();
    let f: Vec<f32> = (0..hd).map(|k| sigmoid(z(hd + k))).collect();
    let g: Vec<f32> = (0..hd).map(|k| tanh(z(2 * hd + k))).collect();
    let o: Vec<f32> = (0..hd).map(|k| sigmoid(z(3 * hd + k))).collect();
    let c: Vec<f32> = (0..hd).map(|k| f[k] * prev.c[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f32> = c.iter().map(|&v| tanh(v)).collect();
    let h: Vec<f32> = (0..hd).map(|k| o[k] * tanh_c[k]).collect();

    let cache = LstmCache {
        x: x.to_vec(),
        h_prev: prev.h.clone(),
        c_prev: prev.c.clone(),
        i,
        f,
        g,
        o,
        tanh_c,
    };
    Ok((LstmState { h, c }, cache))
}

/// Gradients flowing out of one step.
#[derive(Debug, Clone)]
pub struct LstmStepGrad {
    pub dx: Vec<f32>,
    pub dh_prev: Vec<f32>,
    pub dc_prev: Vec<f32>,
}

/// Backpropagates `dh`, `dc` (loss gradients w.r.t. this step's outputs)
/// through one step, accumulating parameter gradients into `grads`.
pub fn lstm_backward(
    params: &LstmParams,
    cache: &LstmCache,
    dh: &[f32],
    dc: &[f32],
    grads: &mut LstmParams,
) -> LstmStepGrad {
    let hd = params.hidden();
    let mut dz = vec![0.0f32; 4 * hd];
    let mut dc_prev = vec![0.0f32; hd];
    for k in 0..hd {
        let (i, f, g, o, tc) = (cache.i[k], cache.f[k], cache.g[k], cache.o[k], cache.tanh_c[k]);
        let d_o = dh[k] * tc;
        let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
        dz[k] = dct * g * i * (1.0 - i);
        dz[hd + k] = dct * cache.c_prev[k] * f * (1.0 - f);
        dz[2 * hd + k] = dct * i * (1.0 - g * g);
        dz[3 * hd + k] = d_o * o * (1.0 - o);
        dc_prev[k] = dct * f;
    }
    add_outer(grads.w_x.data_mut(), &dz, &cache.x);
    add_outer(grads.w_h.data_mut(), &dz, &cache.h_prev);
    for (b, d) in grads.b.data_mut().iter_mut().zip(&dz) {
        *b += d;
    }
    let mut dx = vec![0.0; params.input()];
    matvec_t_acc(params.w_x.data(), params.input(), &dz, &mut dx);
    let mut dh_prev = vec![0.0; hd];
    matvec_t_acc(params.w_h.data(), hd, &dz, &mut dh_prev);
    LstmStepGrad { dx, dh_prev, dc_prev }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params_give_zero_state() {
        let p = LstmParams::zeros(3, 4);
        let s = lstm_cell(&p, &[0.5, -1.0, 2.0], &LstmState::zeros(4)).unwrap();
        assert!(s.h.iter().chain(&s.c).all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_gates_store_nothing() {
        let mut rng = Rng::new(5);
        let mut p = LstmParams::init(3, 4, 0.08, &mut rng);
        let b = p.b.data_mut();
        b[..4].fill(-50.0); // input gate closed
        b[4..8].fill(50.0); // forget gate open
        b[12..16].fill(50.0); // output gate open
        let s = lstm_cell(&p, &[1.0, -1.0, 0.5], &LstmState::zeros(4)).unwrap();
        assert!(s.h.iter().chain(&s.c).all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = LstmParams::zeros(3, 4);
        assert!(lstm_cell(&p, &[0.0; 2], &LstmState::zeros(4)).is_err());
        assert!(lstm_cell(&p, &[0.0; 3], &LstmState::zeros(5)).is_err());
    }

    #[test]
    fn inputs_are_not_modified() {
        let mut rng = Rng::new(1);
        let p = LstmParams::init(2, 3, 0.5, &mut rng);
        let before = p.clone();
        let x = vec![0.3, -0.2];
        let prev = LstmState { h: vec![0.1, 0.2, 0.3], c: vec![-0.1, 0.0, 0.4] };
        let prev_copy = prev.clone();
        lstm_cell(&p, &x, &prev).unwrap();
        assert_eq!(p, before);
        assert_eq!(prev, prev_copy);
    }

    #[test]
    fn forget_bias_initialized() {
        let mut rng = Rng::new(0);
        let p = LstmParams::init(2, 3, 0.08, &mut rng);
        assert_eq!(&p.b.data()[3..6], &[1.0; 3]);
        assert!(p.b.data()[..3].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        use crate::numkit::{finite_diff_check, ParamSet};
        let mut rng = Rng::new(7);
        let mut p = LstmParams::zeros(3, 4);
        p.randomize(0.5, &mut rng);
        let x = [0.4, -0.7, 0.9];
        let prev = LstmState { h: vec![0.2, -0.1, 0.3, 0.05], c: vec![0.5, -0.3, 0.1, 0.2] };
        let r = [0.7, -1.1, 0.4, 0.9];
        let loss = |q: &LstmParams| -> Result<f64> {
            let s = lstm_cell(q, &x, &prev)?;
            Ok(s.h.iter().zip(&r).map(|(&h, &w)| f64::from(h) * w).sum())
        };
        let (_, cache) = lstm_forward(&p, &x, &prev).unwrap();
        let dh: Vec<f32> = r.iter().map(|&w| w as f32).collect();
        let mut grads = p.zeros_like();
        lstm_backward(&p, &cache, &dh, &[0.0; 4], &mut grads);
        let report = finite_diff_check(&p, &grads, loss, 1e-3, &mut Rng::new(1)).unwrap();
        assert!(report.passes(1e-2), "{report:?}");
    }
}
