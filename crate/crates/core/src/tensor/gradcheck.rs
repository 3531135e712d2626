use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_abs_diff: f64,
    pub max_rel_diff: f64,
    pub passed: bool,
    pub probe_count: usize,
}

/// Central-difference check of `analytic_grad` against `f` at every
/// coordinate of `x`.
pub fn finite_difference_check<F>(
    f: F,
    x: &Tensor,
    analytic_grad: &Tensor,
    epsilon: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&Tensor) -> f64,
{
    let all: Vec<usize> = (0..x.len()).collect();
    finite_difference_check_at(f, x, analytic_grad, epsilon, tolerance, &all)
}

/// Same as [`finite_difference_check`] restricted to the coordinates in
/// `probes`. Relative difference uses `max(1, |analytic|, |numeric|)` as the
/// denominator.
pub fn finite_difference_check_at<F>(
    mut f: F,
    x: &Tensor,
    analytic_grad: &Tensor,
    epsilon: f64,
    tolerance: f64,
    probes: &[usize],
) -> Result<GradCheckReport>
where
    F: FnMut(&Tensor) -> f64,
{
    if !(epsilon > 0.0) {
        return Err(Error::param(format!("epsilon must be > 0, got {epsilon}")));
    }
    if x.shape() != analytic_grad.shape() {
        return Err(Error::shape(format!(
            "gradient {:?} does not match input {:?}",
            analytic_grad.shape(),
            x.shape()
        )));
    }
    let f0 = f(x);
    if !f0.is_finite() {
        return Err(Error::Evaluation(format!("f(x) is not finite: {f0}")));
    }
    let mut probe = x.clone();
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    for &i in probes {
        if i >= x.len() {
            return Err(Error::Index(format!("probe {i} outside tensor of {} values", x.len())));
        }
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + epsilon;
        let fp = f(&probe);
        probe.data_mut()[i] = orig - epsilon;
        let fm = f(&probe);
        probe.data_mut()[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::Evaluation(format!("non-finite f near coordinate {i}")));
        }
        let numeric = (fp - fm) / (2.0 * epsilon);
        let analytic = analytic_grad.data()[i];
        let abs = (numeric - analytic).abs();
        let rel = abs / 1f64.max(analytic.abs()).max(numeric.abs());
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(rel);
    }
    Ok(GradCheckReport {
        max_abs_diff: max_abs,
        max_rel_diff: max_rel,
        passed: max_rel <= tolerance,
        probe_count: probes.len(),
    })
}
