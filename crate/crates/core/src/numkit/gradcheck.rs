use crate::error::{Error, Result};
use crate::numkit::{ParamSet, Rng};

/// Coordinates probed per tensor; smaller tensors are checked exhaustively.
pub const COORDS_PER_TENSOR: usize = 64;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Maximum relative error per parameter tensor, in `ParamSet` order.
    pub per_param: Vec<(String, f64)>,
    pub max_rel_error: f64,
    pub worst_param: String,
    pub coords_checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

/// `|a - n| / max(|a| + |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares `analytic` against extrapolated central differences of `loss` around
/// `params`, probing a seeded sample of coordinates in every tensor.
///
/// The loss must be deterministic: it is evaluated twice at `params` and
/// any difference aborts the check.
pub fn finite_diff_check<P: ParamSet>(
    params: &P,
    analytic: &P,
    mut loss: impl FnMut(&P) -> Result<f64>,
    eps: f32,
    rng: &mut Rng,
) -> Result<GradCheckReport> {
    if !(eps > 0.0) {
        return Err(Error::contract(format!("finite_diff_check: eps must be positive, got {eps}")));
    }
    let first = loss(params)?;
    let second = loss(params)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }

    let analytic = analytic.named();
    let mut probe = params.clone();
    let mut per_param = Vec::new();
    let mut coords_checked = 0;
    let n_tensors = analytic.len();
    for t in 0..n_tensors {
        let (name, grad) = &analytic[t];
        let picks = rng.sample_indices(grad.len(), COORDS_PER_TENSOR);
        let mut worst = 0.0f64;
        for &k in &picks {
            let orig = probe.named()[t].1.data()[k];
            let mut central = |step: f32| -> Result<f64> {
                let plus = orig + step;
                let minus = orig - step;
                probe.named_mut()[t].1.data_mut()[k] = plus;
                let lp = loss(&probe)?;
                probe.named_mut()[t].1.data_mut()[k] = minus;
                let lm = loss(&probe)?;
                probe.named_mut()[t].1.data_mut()[k] = orig;
                // the realized step, not 2·step, since plus/minus were rounded to f32
                Ok((lp - lm) / (f64::from(plus) - f64::from(minus)))
            };
            // Richardson extrapolation cancels the O(eps²) truncation term,
            // so eps can stay large enough to swamp f32 rounding in the loss
            let d1 = central(eps)?;
            let d2 = central(2.0 * eps)?;
            let numeric = (4.0 * d1 - d2) / 3.0;
            worst = worst.max(relative_error(f64::from(grad.data()[k]), numeric));
        }
        coords_checked += picks.len();
        per_param.push((name.clone(), worst));
    }
    let (worst_param, max_rel_error) = per_param
        .iter()
        .fold((String::new(), 0.0f64), |acc, (n, e)| if *e > acc.1 { (n.clone(), *e) } else { acc });
    Ok(GradCheckReport { per_param, max_rel_error, worst_param, coords_checked })
}
