use crate::error::{ensure, Result};
use crate::numkit::Rng;

/// Dense row-major `f32` array with an explicit shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        ensure!(
            shape.iter().all(|&d| d > 0),
            "tensor extents must be positive, got {shape:?}"
        );
        let len: usize = shape.iter().product();
        ensure!(
            len == data.len(),
            "shape {shape:?} needs {len} values, got {}",
            data.len()
        );
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![0.0; len] }
    }

    pub fn filled(shape: &[usize], value: f32) -> Self {
        let len = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![value; len] }
    }

    pub fn from_vec(data: Vec<f32>) -> Self {
        Self { shape: vec![data.len()], data }
    }

    /// Uniform initialization in `[-scale, scale]`.
    pub fn uniform(shape: &[usize], scale: f32, rng: &mut Rng) -> Self {
        let len: usize = shape.iter().product();
        let data = (0..len).map(|_| rng.uniform(-scale, scale)).collect();
        Self { shape: shape.to_vec(), data }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.shape)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Width of a 2-D tensor; 1 for vectors.
    pub fn cols(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn row(&self, r: usize) -> &[f32] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn fill(&mut self, value: f32) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v) * f64::from(v)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f32, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f32) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    /// `W · x` for a `[rows, cols]` matrix.
    pub fn matvec(&self, x: &[f32]) -> Result<Vec<f32>> {
        ensure!(
            self.shape.len() == 2 && self.cols() == x.len(),
            "matvec: matrix {:?} cannot multiply vector of length {}",
            self.shape,
            x.len()
        );
        Ok(matvec(&self.data, self.rows(), x))
    }

    /// `Wᵀ · y` for a `[rows, cols]` matrix.
    pub fn matvec_t(&self, y: &[f32]) -> Result<Vec<f32>> {
        ensure!(
            self.shape.len() == 2 && self.rows() == y.len(),
            "matvec_t: matrix {:?} cannot multiply vector of length {}",
            self.shape,
            y.len()
        );
        let mut out = vec![0.0; self.cols()];
        matvec_t_acc(&self.data, self.cols(), y, &mut out);
        Ok(out)
    }

    /// `self += u ⊗ v` for a `[u.len(), v.len()]` matrix.
    pub fn add_outer(&mut self, u: &[f32], v: &[f32]) {
        debug_assert_eq!(self.data.len(), u.len() * v.len());
        add_outer(&mut self.data, u, v);
    }
}

/// Dot product accumulated in `f64`.
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum::<f64>() as f32
}

pub(crate) fn matvec(w: &[f32], rows: usize, x: &[f32]) -> Vec<f32> {
    let cols = x.len();
    (0..rows).map(|r| dot(&w[r * cols..(r + 1) * cols], x)).collect()
}

pub(crate) fn matvec_t_acc(w: &[f32], cols: usize, y: &[f32], out: &mut [f32]) {
    let mut acc = vec![0.0f64; cols];
    for (r, &yr) in y.iter().enumerate() {
        if yr == 0.0 {
            continue;
        }
        let yr = f64::from(yr);
        for (a, &wv) in acc.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
            *a += yr * f64::from(wv);
        }
    }
    for (o, a) in out.iter_mut().zip(acc) {
        *o += a as f32;
    }
}

pub(crate) fn add_outer(w: &mut [f32], u: &[f32], v: &[f32]) {
    let cols = v.len();
    for (r, &ur) in u.iter().enumerate() {
        if ur == 0.0 {
            continue;
        }
        for (a, &vc) in w[r * cols..(r + 1) * cols].iter_mut().zip(v) {
            *a += ur * vc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![0, 3], vec![]).is_err());
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn matvec_and_transpose() {
        let w = Tensor::new(vec![2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(w.matvec(&[1., 0., -1.]).unwrap(), vec![-2., -2.]);
        assert_eq!(w.matvec_t(&[1., 1.]).unwrap(), vec![5., 7., 9.]);
        assert!(w.matvec(&[1., 2.]).is_err());
    }

    #[test]
    fn outer_product_accumulates() {
        let mut w = Tensor::zeros(&[2, 2]);
        w.add_outer(&[1., 2.], &[3., 4.]);
        w.add_outer(&[1., 0.], &[1., 1.]);
        assert_eq!(w.data(), &[4., 5., 6., 8.]);
    }
}
