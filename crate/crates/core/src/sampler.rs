//! Random small MDPs for property tests and experiments.

use ndarray::{Array1, Array3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::rng::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Inclusive range of state counts.
    pub states: (usize, usize),
    pub actions: (usize, usize),
    pub gammas: Vec<f64>,
    /// Probability that a transition entry is dropped before normalizing.
    /// At least one successor survives in every row.
    pub sparsity: f64,
    /// Probability of adding a state nothing transitions into.
    pub orphan_prob: f64,
    /// Probability of making one state terminal.
    pub terminal_prob: f64,
    /// Probability that the initial distribution is a point mass.
    pub point_mass_prob: f64,
    /// Rewards are uniform in `[-reward_scale, reward_scale]`.
    pub reward_scale: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            states: (2, 6),
            actions: (2, 4),
            gammas: vec![0.5, 0.9],
            sparsity: 0.6,
            orphan_prob: 0.5,
            terminal_prob: 0.2,
            point_mass_prob: 0.5,
            reward_scale: 1.0,
        }
    }
}

impl SamplerConfig {
    /// Fully connected dynamics, one initial state, no special states.
    pub fn dense() -> Self {
        SamplerConfig { sparsity: 0.0, orphan_prob: 0.0, terminal_prob: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Contract(msg.to_string()));
        if self.states.0 < 1 || self.states.0 > self.states.1 {
            return bad("state range must be nonempty and start at 1 or more");
        }
        if self.actions.0 < 1 || self.actions.0 > self.actions.1 || self.actions.1 > 32 {
            return bad("action range must be nonempty, within 1..=32");
        }
        if self.gammas.is_empty() || self.gammas.iter().any(|g| !(*g > 0.0 && *g < 1.0)) {
            return bad("gammas must be a nonempty list in (0, 1)");
        }
        for p in [self.sparsity, self.orphan_prob, self.terminal_prob, self.point_mass_prob] {
            if !(0.0..=1.0).contains(&p) {
                return bad("probabilities must lie in [0, 1]");
            }
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return bad("reward scale must be positive");
        }
        Ok(())
    }

    pub fn sample(&self, seed: u64, path: &[u64]) -> Result<Mdp> {
        let mut rng = rng_for(seed, path);
        self.sample_with(&mut rng)
    }

    pub fn sample_with<R: Rng>(&self, rng: &mut R) -> Result<Mdp> {
        self.validate()?;
        let ns = rng.random_range(self.states.0..=self.states.1);
        let na = rng.random_range(self.actions.0..=self.actions.1);
        let gamma = self.gammas[rng.random_range(0..self.gammas.len())];
        let orphan = ns >= 2 && rng.random_bool(self.orphan_prob);
        let regular = if orphan { ns - 1 } else { ns };
        let terminal = (regular >= 2 && rng.random_bool(self.terminal_prob)).then(|| rng.random_range(1..regular));

        let mut tau = Array3::zeros((ns, na, ns));
        let mut reward = Array3::zeros((ns, na, ns));
        for s in 0..ns {
            for a in 0..na {
                for t in 0..ns {
                    reward[[s, a, t]] = rng.random_range(-self.reward_scale..=self.reward_scale);
                }
                if Some(s) == terminal {
                    tau[[s, a, s]] = 1.0;
                    reward[[s, a, s]] = 0.0;
                    continue;
                }
                // Only the orphan itself may transition into the orphan.
                let targets = if orphan && s < regular { regular } else { ns };
                let weights: Vec<f64> = (0..targets)
                    .map(|_| if rng.random_bool(self.sparsity) { 0.0 } else { rng.random_range(0.05..1.0) })
                    .collect();
                let mut weights = weights;
                if weights.iter().all(|&w| w == 0.0) {
                    weights[rng.random_range(0..targets)] = rng.random_range(0.05..1.0);
                }
                let sum: f64 = weights.iter().sum();
                for (t, w) in weights.into_iter().enumerate() {
                    tau[[s, a, t]] = w / sum;
                }
            }
        }

        let mut mu0 = Array1::zeros(ns);
        if rng.random_bool(self.point_mass_prob) {
            mu0[0] = 1.0;
        } else {
            for s in 0..regular {
                if rng.random_bool(0.5) {
                    mu0[s] = rng.random_range(0.1..1.0);
                }
            }
            if mu0.iter().all(|&p| p == 0.0) {
                mu0[0] = 1.0;
            }
            let sum = mu0.sum();
            mu0.mapv_inplace(|p| p / sum);
        }
        Mdp::from_tables(tau, mu0, reward, gamma)
    }
}
