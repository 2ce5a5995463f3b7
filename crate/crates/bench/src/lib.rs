//! Shared inputs for the benches in `benches/`.

use ril_core::{Mdp, SamplerConfig};

/// Random MDP with exactly `states` states and `actions` actions.
pub fn mdp(seed: u64, states: usize, actions: usize, gamma: f64) -> Mdp {
    let cfg = SamplerConfig {
        states: (states, states),
        actions: (actions, actions),
        gammas: vec![gamma],
        orphan_prob: 0.0,
        ..SamplerConfig::default()
    };
    cfg.sample(seed, &[]).expect("sampler output is valid")
}
