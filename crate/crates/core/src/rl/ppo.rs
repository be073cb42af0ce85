use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Fraction of samples whose ratio fell outside `[1 - eta, 1 + eta]`.
    pub clip_fraction: f64,
    /// Estimate of `KL(old || new)` from `mean(ratio - 1 - ln ratio)`.
    pub approx_kl: f64,
}

/// Clipped surrogate for one sample: `min(r A, clip(r, 1-eta, 1+eta) A)`,
/// together with its derivative in `r`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, eta: f64) -> (f64, f64) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - eta, 1.0 + eta) * advantage;
    if unclipped <= clipped {
        (unclipped, advantage)
    } else {
        (clipped, 0.0)
    }
}

/// Total PPO loss: `-mean(surrogate) + 0.5 mean((v - target)^2) - c * entropy`,
/// where `entropy` is already averaged over the batch.
pub fn ppo_loss(
    ratios: &[f64],
    advantages: &[f64],
    eta: f64,
    entropy: f64,
    entropy_coef: f64,
    values: &[f64],
    targets: &[f64],
) -> (f64, PpoDiagnostics) {
    let n = ratios.len().max(1) as f64;
    let mut surrogate = 0.0;
    let mut clipped = 0usize;
    let mut kl = 0.0;
    for (&r, &a) in ratios.iter().zip(advantages) {
        surrogate += clipped_surrogate(r, a, eta).0;
        if (r - 1.0).abs() > eta {
            clipped += 1;
        }
        kl += r - 1.0 - r.ln();
    }
    let policy_loss = -surrogate / n;
    let m = values.len().max(1) as f64;
    let value_loss = values
        .iter()
        .zip(targets)
        .map(|(v, t)| (v - t) * (v - t))
        .sum::<f64>()
        / m;
    let total = policy_loss + 0.5 * value_loss - entropy_coef * entropy;
    (
        total,
        PpoDiagnostics {
            policy_loss,
            value_loss,
            entropy,
            clip_fraction: clipped as f64 / n,
            approx_kl: kl / n,
        },
    )
}

/// Shift to zero mean and scale to unit (population) std. Constant input
/// only gets centered.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    for a in adv.iter_mut() {
        *a -= mean;
        if std > 1e-12 {
            *a /= std + 1e-8;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_ratio_gives_minus_mean_advantage() {
        let adv = [0.5, -1.0, 2.0];
        let (loss, d) = ppo_loss(&[1.0; 3], &adv, 0.3, 0.0, 0.0, &[], &[]);
        assert_eq!(d.policy_loss, -0.5);
        assert_eq!(loss, -0.5);
        assert_eq!(d.clip_fraction, 0.0);
    }

    #[test]
    fn hand_clipping_examples() {
        assert_eq!(clipped_surrogate(1.5, 1.0, 0.3), (1.3, 0.0));
        let (v, g) = clipped_surrogate(0.5, -1.0, 0.3);
        assert!((v + 0.7).abs() < 1e-15);
        assert_eq!(g, 0.0);
        assert_eq!(clipped_surrogate(0.5, 1.0, 0.3), (0.5, 1.0));
    }

    #[test]
    fn infinite_clip_is_plain_surrogate() {
        let r = [0.2, 1.7, 3.0, 0.9];
        let a = [1.0, -2.0, 0.5, -0.1];
        let (_, d) = ppo_loss(&r, &a, f64::INFINITY, 0.0, 0.0, &[], &[]);
        let plain = -r.iter().zip(&a).map(|(r, a)| r * a).sum::<f64>() / 4.0;
        assert_eq!(d.policy_loss, plain);
        assert_eq!(d.clip_fraction, 0.0);
    }

    #[test]
    fn loss_composition() {
        let (loss, d) = ppo_loss(&[1.0], &[1.0], 0.3, 2.0, 0.01, &[1.0, 3.0], &[0.0, 1.0]);
        assert_eq!(d.value_loss, 2.5);
        assert!((loss - (-1.0 + 1.25 - 0.02)).abs() < 1e-15);
        assert!((0.0..=1.0).contains(&d.clip_fraction));
    }

    #[test]
    fn normalization() {
        let mut a = vec![1.0, 2.0, 3.0, 4.0];
        normalize_advantages(&mut a);
        let mean: f64 = a.iter().sum::<f64>() / 4.0;
        let var: f64 = a.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-15);
        assert!((var - 1.0).abs() < 1e-7);
        let mut c = vec![3.0; 5];
        normalize_advantages(&mut c);
        assert_eq!(c, vec![0.0; 5]);
    }
}
