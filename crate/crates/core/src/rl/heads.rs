//! Action distributions on top of a network's raw outputs.
//!
//! Continuous dims are Gaussian in an unbounded space and squashed through the
//! logistic sigmoid to `[0, 1]`. Binary dims are independent Bernoulli with the
//! network output as logit. Dims switched off by a mask are not sampled and do
//! not enter log-probabilities or entropies.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadKind {
    Gaussian,
    Bernoulli,
    /// The first `bits` dims are Bernoulli, the rest squashed Gaussian.
    Mixed { bits: usize },
}

impl HeadKind {
    /// Number of Bernoulli dims in an action of length `dim`.
    pub fn bits(&self, dim: usize) -> usize {
        match *self {
            HeadKind::Gaussian => 0,
            HeadKind::Bernoulli => dim,
            HeadKind::Mixed { bits } => bits.min(dim),
        }
    }

    pub fn gaussian_dims(&self, dim: usize) -> usize {
        dim - self.bits(dim)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln(sigmoid'(u)) = ln a(1-a)` for `a = sigmoid(u)`.
fn ln_squash_jacobian(u: f64) -> f64 {
    -softplus(u) - softplus(-u)
}

/// A sampled action. `raw` holds the pre-squash Gaussian values and the 0/1
/// bits; `action` is what the environment receives.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub raw: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob: f64,
}

fn check(out: &[f64], log_std: &[f64], mask: &[bool], kind: HeadKind) -> Result<()> {
    if mask.len() != out.len() {
        return Err(Error::Shape {
            expected: out.len(),
            got: mask.len(),
        });
    }
    if log_std.len() != kind.gaussian_dims(out.len()) {
        return Err(Error::Shape {
            expected: kind.gaussian_dims(out.len()),
            got: log_std.len(),
        });
    }
    if out.iter().chain(log_std).any(|v| v.is_nan() || v.is_infinite() && *v > 0.0) {
        return Err(Error::NonFinite("policy head outputs"));
    }
    Ok(())
}

/// Draw an action (or the mode when `deterministic`).
pub fn sample<R: Rng + ?Sized>(
    kind: HeadKind,
    out: &[f64],
    log_std: &[f64],
    mask: &[bool],
    deterministic: bool,
    rng: &mut R,
) -> Result<Sample> {
    check(out, log_std, mask, kind)?;
    let bits = kind.bits(out.len());
    let mut raw = Vec::with_capacity(out.len());
    let mut action = Vec::with_capacity(out.len());
    for (j, &z) in out.iter().enumerate() {
        if j < bits {
            let b = if !mask[j] {
                0.0
            } else if deterministic {
                if z > 0.0 { 1.0 } else { 0.0 }
            } else if rng.random::<f64>() < sigmoid(z) {
                1.0
            } else {
                0.0
            };
            raw.push(b);
            action.push(b);
        } else {
            let u = if !mask[j] || deterministic || log_std[j - bits] == f64::NEG_INFINITY {
                z
            } else {
                z + log_std[j - bits].exp() * rng.sample::<f64, _>(StandardNormal)
            };
            raw.push(u);
            action.push(sigmoid(u));
        }
    }
    let log_prob = log_prob_raw(kind, out, log_std, &raw, mask)?;
    Ok(Sample {
        raw,
        action,
        log_prob,
    })
}

/// Log-density of a raw action (squash correction included).
pub fn log_prob_raw(
    kind: HeadKind,
    out: &[f64],
    log_std: &[f64],
    raw: &[f64],
    mask: &[bool],
) -> Result<f64> {
    check(out, log_std, mask, kind)?;
    if raw.len() != out.len() {
        return Err(Error::Shape {
            expected: out.len(),
            got: raw.len(),
        });
    }
    let bits = kind.bits(out.len());
    let mut lp = 0.0;
    for j in 0..out.len() {
        if !mask[j] {
            continue;
        }
        let z = out[j];
        if j < bits {
            lp += raw[j] * z - softplus(z);
        } else {
            let ls = log_std[j - bits];
            let d = (raw[j] - z) / ls.exp();
            lp += -0.5 * d * d - ls - HALF_LN_2PI - ln_squash_jacobian(raw[j]);
        }
    }
    Ok(lp)
}

/// Log-density of an environment-space action (`[0, 1]` values, 0/1 bits).
pub fn log_prob_of(
    kind: HeadKind,
    out: &[f64],
    log_std: &[f64],
    action: &[f64],
    mask: &[bool],
) -> Result<f64> {
    let bits = kind.bits(out.len());
    let raw: Vec<f64> = action
        .iter()
        .enumerate()
        .map(|(j, &a)| if j < bits { a } else { a.ln() - (-a).ln_1p() })
        .collect();
    log_prob_raw(kind, out, log_std, &raw, mask)
}

/// Accumulate `scale * d log_prob / d(out, log_std)`.
pub fn grad_log_prob(
    kind: HeadKind,
    out: &[f64],
    log_std: &[f64],
    raw: &[f64],
    mask: &[bool],
    scale: f64,
    g_out: &mut [f64],
    g_log_std: &mut [f64],
) {
    let bits = kind.bits(out.len());
    for j in 0..out.len() {
        if !mask[j] {
            continue;
        }
        let z = out[j];
        if j < bits {
            g_out[j] += scale * (raw[j] - sigmoid(z));
        } else {
            let ls = log_std[j - bits];
            let inv_var = (-2.0 * ls).exp();
            let diff = raw[j] - z;
            g_out[j] += scale * diff * inv_var;
            g_log_std[j - bits] += scale * (diff * diff * inv_var - 1.0);
        }
    }
}

/// Entropy of the unmasked dims. Continuous dims use the entropy of the
/// pre-squash Gaussian.
pub fn entropy(kind: HeadKind, out: &[f64], log_std: &[f64], mask: &[bool]) -> f64 {
    let bits = kind.bits(out.len());
    let mut h = 0.0;
    for j in 0..out.len() {
        if !mask[j] {
            continue;
        }
        if j < bits {
            let z = out[j];
            h += softplus(z) - z * sigmoid(z);
        } else {
            h += 0.5 * (2.0 * PI * std::f64::consts::E).ln() + log_std[j - bits];
        }
    }
    h
}

/// Accumulate `scale * d entropy / d(out, log_std)`.
pub fn grad_entropy(
    kind: HeadKind,
    out: &[f64],
    mask: &[bool],
    scale: f64,
    g_out: &mut [f64],
    g_log_std: &mut [f64],
) {
    let bits = kind.bits(out.len());
    for j in 0..out.len() {
        if !mask[j] {
            continue;
        }
        if j < bits {
            let z = out[j];
            let p = sigmoid(z);
            g_out[j] += scale * (-z * p * (1.0 - p));
        } else {
            g_log_std[j - bits] += scale;
        }
    }
}
