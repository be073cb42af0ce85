use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fully connected network with tanh hidden layers and a linear output layer.
///
/// Parameters live in one flat vector: for each layer the `out x in` weight
/// matrix (row-major) followed by the `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Layer inputs kept from a forward pass; `acts[0]` is the network input and
/// `acts[l]` the tanh output of hidden layer `l`.
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    acts: Vec<Vec<f64>>,
}

fn count_params(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Gaussian init with std `1/sqrt(fan_in)`; the output layer is further
    /// scaled by `out_scale`. Biases start at zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], out_scale: f64, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::config("mlp.sizes", "need >= 2 non-zero layer sizes"));
        }
        let mut params = Vec::with_capacity(count_params(sizes));
        let last = sizes.len() - 2;
        for (l, w) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = if l == last { out_scale } else { 1.0 } / (fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(scale * rng.sample::<f64, _>(StandardNormal));
            }
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::config("mlp.sizes", "need >= 2 layer sizes"));
        }
        let n = count_params(sizes);
        if params.len() != n {
            return Err(Error::Shape {
                expected: n,
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("mlp parameters"));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, MlpCache)> {
        let mut cache = MlpCache::default();
        let y = self.forward_into(x, &mut cache)?;
        Ok((y, cache))
    }

    /// Forward pass without keeping activations.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut h = x.to_vec();
        let mut off = 0;
        let layers = self.sizes.len() - 1;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let mut out = affine(&self.params[off..], &h, n_in, n_out);
            off += n_in * n_out + n_out;
            if l + 1 < layers {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            h = out;
        }
        Ok(h)
    }

    pub fn forward_into(&self, x: &[f64], cache: &mut MlpCache) -> Result<Vec<f64>> {
        self.check_input(x)?;
        cache.acts.clear();
        cache.acts.push(x.to_vec());
        let mut off = 0;
        let layers = self.sizes.len() - 1;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let mut out = affine(&self.params[off..], &cache.acts[l], n_in, n_out);
            off += n_in * n_out + n_out;
            if l + 1 < layers {
                out.iter_mut().for_each(|v| *v = v.tanh());
                cache.acts.push(out);
            } else {
                return Ok(out);
            }
        }
        unreachable!()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.sizes[0] {
            return Err(Error::Shape {
                expected: self.sizes[0],
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Accumulate `d loss / d params` into `grad` given `d loss / d output`.
    pub fn backward(&self, cache: &MlpCache, grad_out: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for l in 0..layers {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut g = grad_out.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let x = &cache.acts[l];
            let (gw, rest) = grad[off..].split_at_mut(n_in * n_out);
            for o in 0..n_out {
                let go = g[o];
                if go != 0.0 {
                    for (gwi, &xi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                        *gwi += go * xi;
                    }
                }
                rest[o] += go;
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + n_in * n_out];
            let mut gx = vec![0.0; n_in];
            for o in 0..n_out {
                let go = g[o];
                if go != 0.0 {
                    for (gxi, &wi) in gx.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *gxi += go * wi;
                    }
                }
            }
            for (gxi, &h) in gx.iter_mut().zip(x) {
                *gxi *= 1.0 - h * h;
            }
            g = gx;
        }
    }
}

fn affine(p: &[f64], x: &[f64], n_in: usize, n_out: usize) -> Vec<f64> {
    let (w, rest) = p.split_at(n_in * n_out);
    let b = &rest[..n_out];
    // Observations are mostly empty slots. Skipping exact zeros leaves every
    // partial sum unchanged, so both paths agree bit for bit.
    let nz: Vec<usize> = (0..n_in).filter(|&j| x[j] != 0.0).collect();
    if 2 * nz.len() < n_in {
        return (0..n_out)
            .map(|o| {
                let row = &w[o * n_in..(o + 1) * n_in];
                b[o] + nz.iter().map(|&j| row[j] * x[j]).sum::<f64>()
            })
            .collect();
    }
    (0..n_out)
        .map(|o| {
            b[o] + w[o * n_in..(o + 1) * n_in]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum::<f64>()
        })
        .collect()
}
