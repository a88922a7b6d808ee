use crate::error::{ensure, Result};
use crate::numkit::{Rng, Tensor};

/// A model's parameters (or a gradient buffer shaped like them) exposed as
/// an ordered list of named tensors.
pub trait ParamSet: Clone {
    fn named(&self) -> Vec<(String, &Tensor)>;
    fn named_mut(&mut self) -> Vec<(String, &mut Tensor)>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.named_mut() {
            t.fill(0.0);
        }
        z
    }

    fn num_params(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.is_finite())
    }

    /// Redraws every entry uniformly from `[-scale, scale)`, keeping shapes.
    fn randomize(&mut self, scale: f32, rng: &mut Rng) {
        for (_, t) in self.named_mut() {
            *t = Tensor::uniform(t.shape(), scale, rng);
        }
    }
}

pub fn global_norm(grads: &[&Tensor]) -> f64 {
    grads.iter().map(|g| g.sum_sq()).sum::<f64>().sqrt()
}

/// Rescales all gradients together so their joint L2 norm is at most
/// `max_norm`. Returns the factor applied (1 when no clipping happened).
pub fn clip_gradients(grads: &mut [&mut Tensor], max_norm: f32) -> Result<f32> {
    ensure!(max_norm > 0.0, "clip_gradients: max_norm must be positive, got {max_norm}");
    let norm = grads.iter().map(|g| g.sum_sq()).sum::<f64>().sqrt();
    if norm <= f64::from(max_norm) {
        return Ok(1.0);
    }
    let scale = (f64::from(max_norm) / norm) as f32;
    for g in grads.iter_mut() {
        g.scale(scale);
    }
    Ok(scale)
}

pub fn clip_param_grads<P: ParamSet>(grads: &mut P, max_norm: f32) -> Result<f32> {
    let mut named = grads.named_mut();
    let mut tensors: Vec<&mut Tensor> = named.iter_mut().map(|(_, t)| &mut **t).collect();
    clip_gradients(&mut tensors, max_norm)
}

/// SGD with optional heavy-ball momentum over raw slices:
/// `v <- momentum * v + g; p <- p - lr * v`, which reduces to
/// `p <- p - lr * g` when `momentum == 0`.
pub fn sgd_update(params: &mut [f32], grads: &[f32], lr: f32, momentum: f32, velocity: &mut [f32]) {
    if momentum == 0.0 {
        for (p, &g) in params.iter_mut().zip(grads) {
            *p -= lr * g;
        }
        return;
    }
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
}

pub fn sgd_step(
    params: &mut [&mut Tensor],
    grads: &[&Tensor],
    lr: f32,
    momentum: f32,
    velocity: &mut [Tensor],
) -> Result<()> {
    ensure!(lr > 0.0, "sgd_step: learning rate must be positive, got {lr}");
    ensure!((0.0..1.0).contains(&momentum), "sgd_step: momentum {momentum} outside [0, 1)");
    ensure!(
        params.len() == grads.len() && params.len() == velocity.len(),
        "sgd_step: {} params, {} grads, {} velocity buffers",
        params.len(),
        grads.len(),
        velocity.len()
    );
    for ((p, g), v) in params.iter().zip(grads).zip(velocity.iter()) {
        ensure!(
            p.shape() == g.shape() && p.shape() == v.shape(),
            "sgd_step: shape mismatch {:?} / {:?} / {:?}",
            p.shape(),
            g.shape(),
            v.shape()
        );
    }
    for ((p, g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        sgd_update(p.data_mut(), g.data(), lr, momentum, v.data_mut());
    }
    Ok(())
}

/// Stateful SGD over a [`ParamSet`], owning the momentum buffers.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub momentum: f32,
    velocity: Vec<Tensor>,
}

impl Sgd {
    pub fn new(momentum: f32) -> Self {
        Self { momentum, velocity: Vec::new() }
    }

    pub fn step<P: ParamSet>(&mut self, params: &mut P, grads: &P, lr: f32) -> Result<()> {
        self.step_with(params, grads, |_| lr)
    }

    /// Like [`Sgd::step`] with a learning rate chosen per tensor name.
    pub fn step_with<P: ParamSet>(
        &mut self,
        params: &mut P,
        grads: &P,
        lr_for: impl Fn(&str) -> f32,
    ) -> Result<()> {
        let g = grads.named();
        let mut p = params.named_mut();
        if self.velocity.is_empty() {
            self.velocity = g.iter().map(|(_, t)| t.zeros_like()).collect();
        }
        ensure!(p.len() == g.len(), "optimizer: parameter/gradient count mismatch");
        for (((name, pt), (_, gt)), vt) in p.iter_mut().zip(&g).zip(self.velocity.iter_mut()) {
            let lr = lr_for(name);
            sgd_step(&mut [&mut **pt], &[*gt], lr, self.momentum, std::slice::from_mut(vt))?;
        }
        Ok(())
    }
}

/// Inverted-dropout mask: each entry is 0 with probability `p_drop`,
/// otherwise `1 / (1 - p_drop)`.
pub fn dropout_mask(rng: &mut Rng, p_drop: f32, size: usize) -> Result<Vec<f32>> {
    ensure!((0.0..1.0).contains(&p_drop), "dropout probability {p_drop} outside [0, 1)");
    if p_drop == 0.0 {
        return Ok(vec![1.0; size]);
    }
    let keep = 1.0 / (1.0 - p_drop);
    Ok((0..size)
        .map(|_| if rng.unit_f64() < f64::from(p_drop) { 0.0 } else { keep })
        .collect())
}
