use crate::error::{Error, Result};

use super::gae::gae;

/// One agent transition. `raw` is the sampled action in the head's raw space.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub obs: Vec<f64>,
    pub raw: Vec<f64>,
    pub mask: Vec<bool>,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
}

/// Transitions of a single agent stream, in time order.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    steps: Vec<Step>,
    advantages: Vec<f64>,
    returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, step: Step) {
        self.advantages.clear();
        self.returns.clear();
        self.steps.push(step);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn last_mut(&mut self) -> Option<&mut Step> {
        self.advantages.clear();
        self.returns.clear();
        self.steps.last_mut()
    }

    /// End an episode by time limit: the last step becomes terminal and its
    /// reward absorbs the discounted value of the state it led to.
    pub fn truncate(&mut self, final_value: f64, gamma: f64) {
        if let Some(s) = self.last_mut() {
            if !s.done {
                s.reward += gamma * final_value;
                s.done = true;
            }
        }
    }

    /// Compute advantages and value targets. `bootstrap` is the value of the
    /// state after the last step (ignored if that step is terminal).
    pub fn finish(&mut self, bootstrap: f64, gamma: f64, lambda: f64) {
        let r: Vec<f64> = self.steps.iter().map(|s| s.reward).collect();
        let v: Vec<f64> = self.steps.iter().map(|s| s.value).collect();
        let d: Vec<bool> = self.steps.iter().map(|s| s.done).collect();
        self.advantages = gae(&r, &v, bootstrap, &d, gamma, lambda);
        self.returns = self.advantages.iter().zip(&v).map(|(a, v)| a + v).collect();
    }

    pub fn is_finished(&self) -> bool {
        self.advantages.len() == self.steps.len()
    }

    pub fn advantages(&self) -> Result<&[f64]> {
        if !self.is_finished() {
            return Err(Error::Ordering("advantages requested before finish()"));
        }
        Ok(&self.advantages)
    }

    pub fn returns(&self) -> Result<&[f64]> {
        if !self.is_finished() {
            return Err(Error::Ordering("returns requested before finish()"));
        }
        Ok(&self.returns)
    }

    pub fn clear(&mut self) {
        self.steps.clear();
        self.advantages.clear();
        self.returns.clear();
    }

    pub fn mean_reward(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|s| s.reward).sum::<f64>() / self.steps.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(reward: f64, value: f64, done: bool) -> Step {
        Step {
            obs: vec![],
            raw: vec![],
            mask: vec![],
            log_prob: 0.0,
            value,
            reward,
            done,
        }
    }

    #[test]
    fn advantages_need_finish() {
        let mut b = RolloutBuffer::new();
        b.push(step(1.0, 0.5, true));
        assert!(b.advantages().is_err());
        b.finish(0.0, 0.99, 1.0);
        assert_eq!(b.advantages().unwrap(), &[0.5]);
        assert_eq!(b.returns().unwrap(), &[1.0]);
        b.push(step(0.0, 0.0, false));
        assert!(!b.is_finished());
    }

    #[test]
    fn truncation_bootstraps_through_reward() {
        let mut a = RolloutBuffer::new();
        a.push(step(1.0, 0.2, false));
        a.push(step(1.0, 0.3, false));
        a.finish(2.0, 0.9, 1.0);
        let mut b = a.clone();
        b.truncate(2.0, 0.9);
        b.finish(123.0, 0.9, 1.0);
        for (x, y) in a.advantages().unwrap().iter().zip(b.advantages().unwrap()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
