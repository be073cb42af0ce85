use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(num_params: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    /// One bias-corrected step. Non-finite gradients leave both the
    /// parameters and the state untouched.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        self.update_segments(&mut [params], grads, lr)
    }

    /// As [`Adam::update`] over parameters split across several slices, in order.
    pub fn update_segments(&mut self, params: &mut [&mut [f64]], grads: &[f64], lr: f64) -> Result<()> {
        let total: usize = params.iter().map(|p| p.len()).sum();
        if total != self.m.len() || grads.len() != total {
            return Err(Error::Shape {
                expected: self.m.len(),
                got: grads.len().min(total),
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut j = 0;
        for seg in params.iter_mut() {
            for p in seg.iter_mut() {
                let g = grads[j];
                self.m[j] = self.beta1 * self.m[j] + (1.0 - self.beta1) * g;
                self.v[j] = self.beta2 * self.v[j] + (1.0 - self.beta2) * g * g;
                let m_hat = self.m[j] / bc1;
                let v_hat = self.v[j] / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
                j += 1;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut opt = Adam::new(3);
        let mut p = vec![1.0, -2.0, 0.5];
        opt.update(&mut p, &[0.0; 3], 0.1).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);

        opt.update(&mut p, &[1.0, 1.0, 1.0], 0.1).unwrap();
        let m = opt.first_moment().to_vec();
        opt.update(&mut p, &[0.0; 3], 0.1).unwrap();
        for j in 0..3 {
            assert!((opt.first_moment()[j] - 0.9 * m[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_gradient_step_tends_to_lr() {
        let mut opt = Adam::new(2);
        let mut p = vec![0.0, 0.0];
        let lr = 1e-3;
        let mut last = p.clone();
        for _ in 0..1000 {
            last.copy_from_slice(&p);
            opt.update(&mut p, &[0.3, -5.0], lr).unwrap();
        }
        for j in 0..2 {
            let step = (p[j] - last[j]).abs();
            assert!((step / lr - 1.0).abs() < 0.01, "{step}");
        }
    }

    #[test]
    fn non_finite_gradient_is_skipped() {
        let mut opt = Adam::new(2);
        let mut p = vec![1.0, 1.0];
        assert!(opt.update(&mut p, &[f64::NAN, 0.0], 0.1).is_err());
        assert_eq!(p, vec![1.0, 1.0]);
        assert_eq!(opt.steps(), 0);
    }

    #[test]
    fn identical_runs_match() {
        let run = || {
            let mut opt = Adam::new(2);
            let mut p = vec![0.3, -0.1];
            for t in 0..50 {
                let g = [(t as f64).sin(), (t as f64 * 0.3).cos()];
                opt.update(&mut p, &g, 0.01).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }
}
