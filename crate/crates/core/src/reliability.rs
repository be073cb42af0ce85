//! Finite-blocklength reliability: normal-approximation rate and decoding error
//! probability, the equivalent SINR threshold, and the closed-form SINR outage
//! of a Rayleigh-faded multi-AP cluster (hypoexponential survival).

use std::f64::consts::{LN_2, LOG2_E, SQRT_2};

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

/// Gaussian tail probability `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of [`q_function`] on `(0, 1)`.
pub fn q_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    if p > 0.5 {
        // 1 - p is exact here.
        return Ok(-q_inverse(1.0 - p)?);
    }
    let mut x = SQRT_2 * erfc_inv(2.0 * p);
    // Halley refinement on Q(x) - p.
    for _ in 0..3 {
        let f = q_function(x) - p;
        let pdf = std_normal_pdf(x);
        if pdf == 0.0 {
            break;
        }
        let newton = f / pdf;
        let step = newton / (1.0 - 0.5 * x * newton);
        x += step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// Shannon capacity `log2(1+g)` and channel dispersion `(1 - 1/(1+g)^2) log2(e)^2`.
pub fn capacity_dispersion(gamma: f64) -> (f64, f64) {
    let c = gamma.ln_1p() * LOG2_E;
    let inv = 1.0 / (1.0 + gamma);
    let v = (1.0 - inv * inv) * LOG2_E * LOG2_E;
    (c, v)
}

/// Normal-approximation maximum rate (bits per channel use) at realized SINR `gamma`.
pub fn achievable_rate(n: u32, eps: f64, gamma: f64) -> Result<f64> {
    let (c, v) = capacity_dispersion(gamma);
    let n = f64::from(n.max(1));
    Ok(c - (v / n).sqrt() * q_inverse(eps)? + n.log2() / (2.0 * n))
}

/// Decoding error probability of `b` bits in `n` channel uses at SINR `gamma`.
/// Zero SINR decodes nothing, so the error is 1.
pub fn dep(n: u32, b: u32, gamma: f64) -> f64 {
    if !(gamma > 0.0) {
        return 1.0;
    }
    let (c, v) = capacity_dispersion(gamma);
    let n = f64::from(n.max(1));
    let num = n * c + 0.5 * n.log2() - f64::from(b);
    q_function(num / (n * v).sqrt())
}

/// Closed-form SINR threshold obtained from the high-SINR dispersion
/// approximation `V = log2(e)^2`. It over-estimates the DEP level it maps to
/// at moderate SINR; see [`sinr_threshold`] for the exact inverse.
pub fn sinr_threshold_closed_form(n: u32, b: u32, eps_max: f64) -> Result<f64> {
    let q = q_inverse(eps_max)?;
    let n = f64::from(n.max(1));
    Ok((q / n.sqrt() + f64::from(b) * LN_2 / n - n.ln() / (2.0 * n)).exp_m1())
}

/// SINR at which [`dep`] equals `eps_max`, so that `dep >= eps_max` exactly
/// below the returned value. Seeded by the closed form and refined by bisection.
pub fn sinr_threshold(n: u32, b: u32, eps_max: f64) -> Result<f64> {
    let seed = sinr_threshold_closed_form(n, b, eps_max)?.max(1e-12);
    let target = eps_max.ln();
    let excess = |g: f64| dep(n, b, g).ln() - target;

    // Bracket in log-SINR: excess > 0 at lo, <= 0 at hi.
    let (mut lo, mut hi) = (seed.ln(), seed.ln());
    let mut width = 0.5;
    while excess(lo.exp()) <= 0.0 {
        lo -= width;
        width *= 2.0;
        if lo < -700.0 {
            return Ok(lo.exp());
        }
    }
    width = 0.5;
    while excess(hi.exp()) > 0.0 {
        hi += width;
        width *= 2.0;
        if hi > 700.0 {
            return Err(Error::NonFinite("sinr_threshold"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid.exp()) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi.exp())
}

fn check_rates(rates: &[f64]) -> Result<()> {
    for &r in rates {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidRate(r));
        }
    }
    Ok(())
}

/// Coefficients `prod_{j != k} l_j / (l_j - l_k)` of the hypoexponential survival.
pub fn hypoexp_coefficients(rates: &[f64]) -> Result<Vec<f64>> {
    check_rates(rates)?;
    let mut out = Vec::with_capacity(rates.len());
    for (k, &lk) in rates.iter().enumerate() {
        let mut c = 1.0;
        for (j, &lj) in rates.iter().enumerate() {
            if j == k {
                continue;
            }
            if lj == lk {
                return Err(Error::DuplicateRates(lk));
            }
            c *= lj / (lj - lk);
        }
        out.push(c);
    }
    Ok(out)
}

/// `P(T > s)` for `T` a sum of independent exponentials with distinct `rates`.
pub fn hypoexp_survival(rates: &[f64], s: f64) -> Result<f64> {
    if rates.is_empty() {
        return Err(Error::EmptyInput("hypoexp_survival rates"));
    }
    let coeffs = hypoexp_coefficients(rates)?;
    if s <= 0.0 {
        return Ok(1.0);
    }
    Ok(coeffs
        .iter()
        .zip(rates)
        .map(|(c, l)| c * (-l * s).exp())
        .sum())
}

/// Same survival through the phase-type representation `e1' exp(S s) 1`, with
/// `S` the bidiagonal sub-generator. Well conditioned for any rate set,
/// including repeated rates, at the price of an `n x n` matrix exponential.
pub fn hypoexp_survival_phase_type(rates: &[f64], s: f64) -> Result<f64> {
    if rates.is_empty() {
        return Err(Error::EmptyInput("hypoexp_survival rates"));
    }
    check_rates(rates)?;
    if s <= 0.0 {
        return Ok(1.0);
    }
    let n = rates.len();
    let mut a = vec![0.0; n * n];
    for (i, &l) in rates.iter().enumerate() {
        a[i * n + i] = -l * s;
        if i + 1 < n {
            a[i * n + i + 1] = l * s;
        }
    }
    let norm = rates.iter().map(|l| 2.0 * l * s).fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = 0.5f64.powi(squarings as i32);
    a.iter_mut().for_each(|x| *x *= scale);

    let matmul = |x: &[f64], y: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        // Upper triangular operands keep the product upper triangular.
        for i in 0..n {
            for k in i..n {
                let xik = x[i * n + k];
                if xik == 0.0 {
                    continue;
                }
                for j in k..n {
                    out[i * n + j] += xik * y[k * n + j];
                }
            }
        }
        out
    };

    let mut result = vec![0.0; n * n];
    let mut term = vec![0.0; n * n];
    for i in 0..n {
        result[i * n + i] = 1.0;
        term[i * n + i] = 1.0;
    }
    for m in 1..=20 {
        term = matmul(&term, &a);
        let inv = 1.0 / m as f64;
        term.iter_mut().for_each(|x| *x *= inv);
        for (r, t) in result.iter_mut().zip(&term) {
            *r += t;
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result);
    }
    Ok(result[..n].iter().sum::<f64>().clamp(0.0, 1.0))
}

/// Survival with the closed form when its coefficients are well conditioned,
/// otherwise through the phase-type route.
pub fn hypoexp_survival_robust(rates: &[f64], s: f64) -> Result<f64> {
    match hypoexp_coefficients(rates) {
        Ok(c) if c.iter().map(|x| x.abs()).sum::<f64>() <= 1e6 => {
            hypoexp_survival(rates, s).map(|v| v.clamp(0.0, 1.0))
        }
        Ok(_) | Err(Error::DuplicateRates(_)) => hypoexp_survival_phase_type(rates, s),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityTargets {
    /// Maximum tolerated decoding error probability.
    pub eps_max: f64,
    /// Outage probability threshold used by the clustering reward.
    pub outage_max: f64,
}

impl Default for ReliabilityTargets {
    fn default() -> Self {
        Self {
            eps_max: 1e-5,
            outage_max: 1e-3,
        }
    }
}

impl ReliabilityTargets {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_max > 0.0 && self.eps_max < 1.0) {
            return Err(Error::config("targets.eps_max", "must lie in (0, 1)"));
        }
        if !(self.outage_max > 0.0 && self.outage_max < 1.0) {
            return Err(Error::config("targets.outage_max", "must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn gamma_th(&self, n: u32, b: u32) -> Result<f64> {
        sinr_threshold(n, b, self.eps_max)
    }
}

/// Mean received powers of a cluster plus the conditioning interference-plus-noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSignalModel {
    mean_powers: Vec<f64>,
    interference_plus_noise: f64,
}

impl ClusterSignalModel {
    /// Near-equal means (relative gap below 1e-9) are pushed apart by a relative
    /// 1e-9 so the closed-form coefficients stay defined.
    pub fn new(mean_powers: Vec<f64>, interference_plus_noise: f64) -> Result<Self> {
        if mean_powers.is_empty() {
            return Err(Error::EmptyInput("cluster mean powers"));
        }
        for &m in &mean_powers {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::InvalidRate(m));
            }
        }
        if !(interference_plus_noise > 0.0) {
            return Err(Error::NonFinite("interference_plus_noise"));
        }
        let mut mean_powers = mean_powers;
        for i in 1..mean_powers.len() {
            for _ in 0..mean_powers.len() {
                let clash = mean_powers[..i]
                    .iter()
                    .any(|&m| ((m - mean_powers[i]) / m).abs() < 1e-9);
                if !clash {
                    break;
                }
                mean_powers[i] *= 1.0 + 1e-9 * (i as f64 + 1.0);
            }
        }
        Ok(Self {
            mean_powers,
            interference_plus_noise,
        })
    }

    pub fn mean_powers(&self) -> &[f64] {
        &self.mean_powers
    }

    pub fn interference_plus_noise(&self) -> f64 {
        self.interference_plus_noise
    }
}

/// `P(SINR < gamma_th)` of a Rayleigh-faded cluster given mean powers.
pub fn outage_probability(model: &ClusterSignalModel, gamma_th: f64) -> Result<f64> {
    let s = gamma_th * model.interference_plus_noise;
    if s <= 0.0 {
        return Ok(0.0);
    }
    let rates: Vec<f64> = model.mean_powers.iter().map(|m| 1.0 / m).collect();
    Ok((1.0 - hypoexp_survival_robust(&rates, s)?).clamp(0.0, 1.0))
}

/// Per-link mean powers for Monte-Carlo SINR draws.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrSamplingModel {
    pub serving_means: Vec<f64>,
    pub interference_means: Vec<f64>,
    pub noise_power: f64,
    /// Draw unit-mean exponential fading on every link; otherwise use the means.
    pub rayleigh: bool,
}

impl SinrSamplingModel {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut draw = |m: &f64| {
            if self.rayleigh {
                m * rng.sample::<f64, _>(Exp1)
            } else {
                *m
            }
        };
        let s: f64 = self.serving_means.iter().map(&mut draw).sum();
        let i: f64 = self.interference_means.iter().map(&mut draw).sum();
        s / (self.noise_power + i)
    }
}

/// Monte-Carlo mean of [`dep`] over independent fading draws.
pub fn dep_expected<R: Rng + ?Sized>(
    n: u32,
    b: u32,
    model: &SinrSamplingModel,
    samples: usize,
    rng: &mut R,
) -> f64 {
    let samples = samples.max(1);
    let total: f64 = (0..samples).map(|_| dep(n, b, model.sample(rng))).sum();
    total / samples as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // Reference values from mpmath at 50 digits.
    const QINV_1E_5: f64 = 4.264_890_793_922_825;
    const DEP_100_50_1: f64 = 9.871_981_062_188_603e-6;
    const Q_4_2678: f64 = 9.870_509_594_964_582e-6;

    #[test]
    fn q_symmetry_points() {
        assert_eq!(q_function(0.0), 0.5);
        assert_eq!(q_inverse(0.5).unwrap(), 0.0);
        assert!((q_inverse(1e-5).unwrap() - QINV_1E_5).abs() < 1e-12);
        assert!((q_function(4.2678) / Q_4_2678 - 1.0).abs() < 1e-12);
        assert!(q_inverse(0.0).is_err());
        assert!(q_inverse(1.0).is_err());
    }

    #[test]
    fn capacity_dispersion_examples() {
        assert_eq!(capacity_dispersion(0.0), (0.0, 0.0));
        let (c, v) = capacity_dispersion(1.0);
        assert!((c - 1.0).abs() < 1e-15);
        assert!((v - 0.75 * LOG2_E * LOG2_E).abs() < 1e-15);
        assert!((v - 1.5610).abs() < 1e-4);
        let (_, v) = capacity_dispersion(1e12);
        assert!((v - LOG2_E * LOG2_E).abs() < 1e-9);
        assert!((LOG2_E * LOG2_E - 2.0814).abs() < 1e-4);
    }

    #[test]
    fn achievable_rate_examples() {
        let r = achievable_rate(100, 0.5, 1.0).unwrap();
        assert!((r - (1.0 + 100f64.log2() / 200.0)).abs() < 1e-15);
        assert!((r - 1.0332).abs() < 1e-4);
        let big = achievable_rate(u32::MAX, 0.5, 3.0).unwrap();
        assert!((big - 2.0).abs() < 1e-8);
        assert!(achievable_rate(100, 1e-3, 1.0).unwrap() < r);
    }

    #[test]
    fn dep_examples() {
        let n = 100u32;
        // Pick gamma so that b = n C + 0.5 log2 n exactly.
        let b = 204u32;
        let target_c = (f64::from(b) - 0.5 * 100f64.log2()) / 100.0;
        let g = target_c.exp2() - 1.0;
        assert!((dep(n, b, g) - 0.5).abs() < 1e-12);

        let e = dep(100, 50, 1.0);
        assert!((e / DEP_100_50_1 - 1.0).abs() < 1e-9, "{e}");
        assert!((e - 9.8e-6).abs() / 9.8e-6 < 0.05);

        assert_eq!(dep(100, 50, 0.0), 1.0);
    }

    #[test]
    fn dep_decreasing_in_gamma_and_n() {
        let mut prev = 1.0;
        for i in 1..200 {
            let g = 0.01 * i as f64;
            let e = dep(400, 256, g);
            assert!(e <= prev);
            prev = e;
        }
        let mut prev = 1.0;
        for n in [100u32, 200, 400, 800, 1600] {
            // Rate b/n held fixed.
            let e = dep(n, n / 2, 1.0);
            assert!(e <= prev);
            prev = e;
        }
    }

    #[test]
    fn sinr_threshold_at_half_is_closed_form() {
        let expected = (LN_2 - 100f64.ln() / 200.0).exp() - 1.0;
        let exact = sinr_threshold(100, 100, 0.5).unwrap();
        let closed = sinr_threshold_closed_form(100, 100, 0.5).unwrap();
        assert!((closed - expected).abs() < 1e-15);
        assert!((exact - expected).abs() < 1e-12);
        assert!((expected - 0.9545).abs() < 1e-4);
    }

    #[test]
    fn sinr_threshold_round_trip() {
        for eps in [1e-3, 1e-5, 1e-7] {
            for n in [200u32, 400] {
                for b in [128u32, 256] {
                    let g = sinr_threshold(n, b, eps).unwrap();
                    let back = dep(n, b, g);
                    assert!((back / eps - 1.0).abs() < 0.02, "eps {eps} n {n} b {b}: {back}");
                }
            }
        }
    }

    #[test]
    fn closed_form_threshold_is_conservative() {
        // The high-SINR dispersion approximation overshoots the exact threshold.
        for eps in [1e-3, 1e-5, 1e-7] {
            let exact = sinr_threshold(400, 256, eps).unwrap();
            let closed = sinr_threshold_closed_form(400, 256, eps).unwrap();
            assert!(closed > exact);
            assert!(dep(400, 256, closed) < eps);
        }
    }

    #[test]
    fn threshold_increasing_in_bits() {
        let mut prev = 0.0;
        for b in [32u32, 64, 128, 256, 512] {
            let g = sinr_threshold(400, b, 1e-5).unwrap();
            assert!(g > prev);
            prev = g;
        }
    }

    #[test]
    fn hypoexp_examples() {
        assert_eq!(hypoexp_survival(&[2.0], 0.0).unwrap(), 1.0);
        let v = hypoexp_survival(&[1.0, 0.5], 1.0).unwrap();
        let expected = -(-1.0f64).exp() + 2.0 * (-0.5f64).exp();
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.845_182).abs() < 1e-6);
        assert!(hypoexp_survival(&[1.0, 0.5, 3.0], 200.0).unwrap().abs() < 1e-40);
        assert!(matches!(
            hypoexp_survival(&[1.0, 1.0], 1.0),
            Err(Error::DuplicateRates(_))
        ));
    }

    #[test]
    fn hypoexp_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rates = [1.0, 0.5];
        let n = 1_000_000;
        let sums: Vec<f64> = (0..n)
            .map(|_| rates.iter().map(|l| rng.sample::<f64, _>(Exp1) / l).sum())
            .collect();
        for s in [0.25, 1.0, 2.0, 4.0, 8.0] {
            let emp = sums.iter().filter(|&&t| t > s).count() as f64 / n as f64;
            let cf = hypoexp_survival(&rates, s).unwrap();
            assert!((emp - cf).abs() < 2e-3, "s {s}: {emp} vs {cf}");
        }
    }

    #[test]
    fn phase_type_route_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..200 {
            let n = rng.random_range(1..=6);
            let rates: Vec<f64> = (0..n).map(|_| 0.1 + 5.0 * rng.random::<f64>()).collect();
            let s = 3.0 * rng.random::<f64>();
            let a = hypoexp_survival(&rates, s).unwrap();
            let b = hypoexp_survival_phase_type(&rates, s).unwrap();
            assert!((a - b).abs() < 1e-9, "{rates:?} {s}: {a} vs {b}");
        }
        // Repeated rates: Erlang(2, 1) survival is (1 + s) e^-s.
        let v = hypoexp_survival_phase_type(&[1.0, 1.0], 2.0).unwrap();
        assert!((v - 3.0 * (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn outage_examples() {
        let m = ClusterSignalModel::new(vec![1.0], 1.0).unwrap();
        assert_eq!(outage_probability(&m, 0.0).unwrap(), 0.0);
        let o = outage_probability(&m, 1.0).unwrap();
        assert!((o - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((o - 0.63212).abs() < 1e-5);

        let m = ClusterSignalModel::new(vec![1.0, 2.0], 1.0).unwrap();
        let o = outage_probability(&m, 1.0).unwrap();
        assert!((o - 0.154_818).abs() < 1e-6, "{o}");
    }

    #[test]
    fn tied_means_are_jittered() {
        let m = ClusterSignalModel::new(vec![2.0, 2.0, 2.0], 1.0).unwrap();
        let p = m.mean_powers();
        assert!(p[0] != p[1] && p[1] != p[2] && p[0] != p[2]);
        let o = outage_probability(&m, 0.5).unwrap();
        // Erlang(3, 1/2) CDF at s = 0.5.
        let x: f64 = 0.25;
        let erlang = 1.0 - (-x).exp() * (1.0 + x + x * x / 2.0);
        assert!((o - erlang).abs() < 1e-6, "{o} vs {erlang}");
    }

    #[test]
    fn outage_monotone_in_threshold_and_interference() {
        let mut prev = 0.0;
        for i in 0..50 {
            let m = ClusterSignalModel::new(vec![1.0, 0.3, 2.5], 1.0).unwrap();
            let o = outage_probability(&m, 0.1 * i as f64).unwrap();
            assert!(o >= prev);
            prev = o;
        }
        let mut prev = 0.0;
        for i in 1..50 {
            let m = ClusterSignalModel::new(vec![1.0, 0.3, 2.5], 0.1 * i as f64).unwrap();
            let o = outage_probability(&m, 1.0).unwrap();
            assert!(o >= prev);
            prev = o;
        }
    }

    #[test]
    fn dep_expected_deterministic_limit() {
        let model = SinrSamplingModel {
            serving_means: vec![1e-9, 2e-9],
            interference_means: vec![5e-10],
            noise_power: 4e-14,
            rayleigh: false,
        };
        let g = 3e-9 / (4e-14 + 5e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let got = dep_expected(400, 256, &model, 10, &mut rng);
        assert!((got / dep(400, 256, g) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dep_expected_seeded_reproducible() {
        let model = SinrSamplingModel {
            serving_means: vec![1e-9, 2e-9],
            interference_means: vec![5e-10, 1e-10],
            noise_power: 4e-14,
            rayleigh: true,
        };
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            dep_expected(400, 256, &model, 100_000, &mut rng).to_bits()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn dep_expected_stderr_scales_inverse_sqrt() {
        let model = SinrSamplingModel {
            serving_means: vec![1e-9],
            interference_means: vec![5e-10],
            noise_power: 4e-14,
            rayleigh: true,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sizes = [100usize, 400, 1600, 6400];
        let reps = 60;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &n in &sizes {
            let est: Vec<f64> = (0..reps)
                .map(|_| dep_expected(400, 256, &model, n, &mut rng))
                .collect();
            let mean = est.iter().sum::<f64>() / reps as f64;
            let sd = (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
            xs.push((n as f64).ln());
            ys.push(sd.ln());
        }
        let mx = xs.iter().sum::<f64>() / 4.0;
        let my = ys.iter().sum::<f64>() / 4.0;
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope + 0.5).abs() < 0.1, "slope {slope}");
    }

    proptest! {
        #[test]
        fn coefficients_sum_to_one(rates in proptest::collection::vec(0.05f64..20.0, 2..6)) {
            let mut rates = rates;
            rates.sort_by(|a, b| a.partial_cmp(b).unwrap());
            rates.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            let c = hypoexp_coefficients(&rates).unwrap();
            let total: f64 = c.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-6 * c.iter().map(|x| x.abs()).sum::<f64>().max(1.0));
        }

        #[test]
        fn survival_monotone(rates in proptest::collection::vec(0.05f64..20.0, 1..6)) {
            let mut rates = rates;
            rates.sort_by(|a, b| a.partial_cmp(b).unwrap());
            rates.dedup_by(|a, b| (*a - *b).abs() < 1e-2);
            prop_assert_eq!(hypoexp_survival_robust(&rates, 0.0).unwrap(), 1.0);
            let mut prev = 1.0;
            for i in 1..60 {
                let v = hypoexp_survival_robust(&rates, 0.1 * i as f64).unwrap();
                prop_assert!(v <= prev + 1e-12);
                prev = v;
            }
        }

        #[test]
        fn q_self_inverse(exp in -12.0f64..-0.30103, upper in any::<bool>()) {
            let p = 10f64.powf(exp);
            let p = if upper { 1.0 - p } else { p };
            let x = q_inverse(p).unwrap();
            prop_assert!((q_function(x) / p - 1.0).abs() <= 1e-12);
        }
    }
}
