use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `users x aps` membership matrix: `get(i, k)` is true iff AP `k` serves user `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusteringStrategy {
    users: usize,
    aps: usize,
    assign: Vec<bool>,
}

impl ClusteringStrategy {
    pub fn empty(users: usize, aps: usize) -> Self {
        Self {
            users,
            aps,
            assign: vec![false; users * aps],
        }
    }

    pub fn from_bits(users: usize, aps: usize, bits: &[bool]) -> Result<Self> {
        if bits.len() != users * aps {
            return Err(Error::Shape {
                expected: users * aps,
                got: bits.len(),
            });
        }
        Ok(Self {
            users,
            aps,
            assign: bits.to_vec(),
        })
    }

    /// Threshold real-valued scores (logits) at `threshold`.
    pub fn from_scores(users: usize, aps: usize, scores: &[f64], threshold: f64) -> Result<Self> {
        let bits: Vec<bool> = scores.iter().map(|&s| s > threshold).collect();
        Self::from_bits(users, aps, &bits)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn aps(&self) -> usize {
        self.aps
    }

    pub fn get(&self, user: usize, ap: usize) -> bool {
        self.assign[user * self.aps + ap]
    }

    pub fn set(&mut self, user: usize, ap: usize, value: bool) {
        self.assign[user * self.aps + ap] = value;
    }

    pub fn row(&self, user: usize) -> &[bool] {
        &self.assign[user * self.aps..(user + 1) * self.aps]
    }

    pub fn clear_row(&mut self, user: usize) {
        self.assign[user * self.aps..(user + 1) * self.aps].fill(false);
    }

    pub fn cluster(&self, user: usize) -> Vec<usize> {
        (0..self.aps).filter(|&k| self.get(user, k)).collect()
    }

    pub fn cluster_size(&self, user: usize) -> usize {
        self.row(user).iter().filter(|&&b| b).count()
    }

    /// Users served by `ap`.
    pub fn served_by(&self, ap: usize) -> Vec<usize> {
        (0..self.users).filter(|&i| self.get(i, ap)).collect()
    }

    pub fn as_bits(&self) -> &[bool] {
        &self.assign
    }
}

/// `users x aps` transmit powers in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    users: usize,
    aps: usize,
    power: Vec<f64>,
}

impl PowerAllocation {
    pub fn zeros(users: usize, aps: usize) -> Self {
        Self {
            users,
            aps,
            power: vec![0.0; users * aps],
        }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn aps(&self) -> usize {
        self.aps
    }

    pub fn get(&self, user: usize, ap: usize) -> f64 {
        self.power[user * self.aps + ap]
    }

    pub fn set(&mut self, user: usize, ap: usize, watts: f64) {
        self.power[user * self.aps + ap] = watts;
    }

    /// Total power radiated by `ap`.
    pub fn column_sum(&self, ap: usize) -> f64 {
        (0..self.users).map(|i| self.get(i, ap)).sum()
    }

    pub fn total(&self) -> f64 {
        self.power.iter().sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.power
    }
}
