use serde::Serialize;

use crate::error::{Error, Result};

/// FAR and FRR sampled at every distinct observed score plus both infinities.
///
/// A claim is accepted iff its score is `>= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub thresholds: Vec<f64>,
    pub far: Vec<f64>,
    pub frr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSummary {
    pub eer: f64,
    /// First grid threshold at or past the crossing; `None` when infinite.
    pub eer_threshold: Option<f64>,
    pub far_at_zero_frr: f64,
    pub frr_at_zero_far: f64,
    pub n_genuine: usize,
    pub n_impostor: usize,
}

fn sorted(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NumericalFailure("NaN score".into()));
    }
    let mut v = scores.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Threshold sweep over genuine and impostor scores.
pub fn compute_rates(genuine: &[f64], impostor: &[f64]) -> Result<(Curve, RateSummary)> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::EmptyScoreSet);
    }
    let gen = sorted(genuine)?;
    let imp = sorted(impostor)?;

    let mut thresholds = Vec::with_capacity(gen.len() + imp.len() + 2);
    thresholds.push(f64::NEG_INFINITY);
    let (mut i, mut j) = (0, 0);
    while i < gen.len() || j < imp.len() {
        let next = match (gen.get(i), imp.get(j)) {
            (Some(&g), Some(&m)) => g.min(m),
            (Some(&g), None) => g,
            (None, Some(&m)) => m,
            (None, None) => unreachable!(),
        };
        if *thresholds.last().unwrap() != next {
            thresholds.push(next);
        }
        while gen.get(i) == Some(&next) {
            i += 1;
        }
        while imp.get(j) == Some(&next) {
            j += 1;
        }
    }
    if *thresholds.last().unwrap() != f64::INFINITY {
        thresholds.push(f64::INFINITY);
    }

    // Walk the grid upwards: `below_g` genuine and `below_i` impostor scores
    // lie strictly under the current threshold.
    let (ng, ni) = (gen.len() as f64, imp.len() as f64);
    let (mut below_g, mut below_i) = (0usize, 0usize);
    let mut far = Vec::with_capacity(thresholds.len());
    let mut frr = Vec::with_capacity(thresholds.len());
    for &tau in &thresholds {
        while below_g < gen.len() && gen[below_g] < tau {
            below_g += 1;
        }
        while below_i < imp.len() && imp[below_i] < tau {
            below_i += 1;
        }
        far.push((imp.len() - below_i) as f64 / ni);
        frr.push(below_g as f64 / ng);
    }

    let k = (0..thresholds.len())
        .find(|&k| far[k] - frr[k] <= 0.0)
        .expect("FAR - FRR is -1 at +inf");
    let eer = if far[k] == frr[k] || k == 0 {
        far[k]
    } else {
        let (pa, pr, fa, fr) = (far[k - 1], frr[k - 1], far[k], frr[k]);
        let lambda = (pa - pr) / ((pa - pr) - (fa - fr));
        pa + lambda * (fa - pa)
    };
    let far_at_zero_frr = (0..thresholds.len())
        .filter(|&k| frr[k] == 0.0)
        .map(|k| far[k])
        .fold(1.0, f64::min);
    let frr_at_zero_far = (0..thresholds.len())
        .filter(|&k| far[k] == 0.0)
        .map(|k| frr[k])
        .fold(1.0, f64::min);
    let summary = RateSummary {
        eer,
        eer_threshold: Some(thresholds[k]).filter(|t| t.is_finite()),
        far_at_zero_frr,
        frr_at_zero_far,
        n_genuine: gen.len(),
        n_impostor: imp.len(),
    };
    Ok((
        Curve {
            thresholds,
            far,
            frr,
        },
        summary,
    ))
}
