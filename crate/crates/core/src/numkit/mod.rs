//! Deterministic numerical kernels shared by every model: tensors, the
//! seeded generator, activations and losses, the LSTM cell, SGD with
//! gradient clipping, dropout, finite-difference gradient checking and the
//! named-tensor container.

pub mod container;
pub mod gradcheck;
pub mod lstm;
pub mod ops;
pub mod optim;
pub mod rng;
pub mod tensor;

pub use container::Container;
pub use gradcheck::{finite_diff_check, relative_error, GradCheckReport};
pub use lstm::{lstm_backward, lstm_cell, lstm_forward, LstmCache, LstmParams, LstmState};
pub use ops::{argmax, binary_cross_entropy, cosine, cross_entropy, cross_entropy_logits, cross_entropy_logits_grad, log_softmax, sigmoid, softmax};
pub use optim::{clip_gradients, clip_param_grads, dropout_mask, sgd_step, sgd_update, ParamSet, Sgd};
pub use rng::{derive_seed, Rng};
pub use tensor::{dot, Tensor};

/// Default half-width of the uniform weight initialization.
pub const INIT_SCALE: f32 = 0.08;

impl ParamSet for LstmParams {
    fn named(&self) -> Vec<(String, &Tensor)> {
        vec![("w_x".into(), &self.w_x), ("w_h".into(), &self.w_h), ("b".into(), &self.b)]
    }

    fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![
            ("w_x".into(), &mut self.w_x),
            ("w_h".into(), &mut self.w_h),
            ("b".into(), &mut self.b),
        ]
    }
}
