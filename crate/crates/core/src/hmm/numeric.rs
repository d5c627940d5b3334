use std::f64::consts::PI;

/// log(exp(a) + exp(b)), exact when either side is -inf.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// log(sum(exp(values))); -inf for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// ln(p), mapping 0 to -inf.
#[inline]
pub fn ln_prob(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Diagonal Gaussian with its normalizing constant folded in.
#[derive(Debug, Clone)]
pub struct DiagGaussian<'a> {
    mean: &'a [f64],
    inv_var: Vec<f64>,
    log_norm: f64,
}

impl<'a> DiagGaussian<'a> {
    pub fn new(mean: &'a [f64], var: &[f64]) -> Self {
        let log_det: f64 = var.iter().map(|v| v.ln()).sum();
        Self {
            mean,
            inv_var: var.iter().map(|v| 1.0 / v).collect(),
            log_norm: -0.5 * (mean.len() as f64 * (2.0 * PI).ln() + log_det),
        }
    }

    #[inline]
    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let mahalanobis: f64 = x
            .iter()
            .zip(self.mean)
            .zip(&self.inv_var)
            .map(|((x, m), iv)| (x - m) * (x - m) * iv)
            .sum();
        self.log_norm - 0.5 * mahalanobis
    }
}
