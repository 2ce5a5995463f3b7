#![allow(dead_code)]

use ndarray::{Array2, Array3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use ril_core::mdp::{Fragment, Lasso};
use ril_core::rng::rng_for;
use ril_core::{Mdp, Policy, SamplerConfig};

pub fn random_mdp(seed: u64) -> Mdp {
    SamplerConfig::default().sample(seed, &[]).expect("sampler output is valid")
}

pub fn rng(seed: u64, tag: u64) -> ChaCha8Rng {
    rng_for(seed, &[0x7e57, tag])
}

pub fn random_policy(m: &Mdp, rng: &mut ChaCha8Rng) -> Policy {
    let mut p = Array2::from_shape_fn((m.n_states(), m.n_actions()), |_| rng.random_range(0.05..1.0));
    for mut row in p.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|x| x / s);
    }
    Policy::new(p).unwrap()
}

/// Potential in [-2, 2], zero on terminal states, `k` on initial states when given.
pub fn random_phi(m: &Mdp, rng: &mut ChaCha8Rng, k: Option<f64>) -> Vec<f64> {
    (0..m.n_states())
        .map(|s| {
            if m.is_terminal(s) {
                0.0
            } else if let (Some(k), true) = (k, m.is_initial(s)) {
                k
            } else {
                rng.random_range(-2.0..2.0)
            }
        })
        .collect()
}

pub fn shaped(m: &Mdp, phi: &[f64]) -> Array3<f64> {
    let r = m.reward();
    let g = m.gamma();
    Array3::from_shape_fn(r.dim(), |(s, a, t)| r[[s, a, t]] + g * phi[t] - phi[s])
}

/// Magnitude of values (returns, Q, V) for relative tolerances.
pub fn value_scale(m: &Mdp, extra: f64) -> f64 {
    (1.0 + m.max_abs_reward() + extra) / (1.0 - m.gamma())
}

pub fn max_abs(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Random possible walk of `len` steps from `start`.
pub fn random_walk(m: &Mdp, start: usize, len: usize, rng: &mut ChaCha8Rng) -> Fragment {
    let mut steps = Vec::new();
    let mut s = start;
    for _ in 0..len {
        let a = rng.random_range(0..m.n_actions());
        let succ = m.successors(s, a);
        let t = succ[rng.random_range(0..succ.len())];
        steps.push((a, t));
        s = t;
    }
    Fragment::new(start, steps)
}

/// Random possible lasso: a walk until a state repeats.
pub fn random_lasso(m: &Mdp, start: usize, rng: &mut ChaCha8Rng) -> Lasso {
    let mut path = vec![start];
    let mut steps = Vec::new();
    loop {
        let s = *path.last().unwrap();
        let a = rng.random_range(0..m.n_actions());
        let succ = m.successors(s, a);
        let t = succ[rng.random_range(0..succ.len())];
        steps.push((a, t));
        if let Some(i) = path.iter().position(|&x| x == t) {
            let prefix = Fragment::new(start, steps[..i].to_vec());
            let cycle = Fragment::new(t, steps[i..].to_vec());
            return Lasso::new(prefix, cycle).unwrap();
        }
        path.push(t);
    }
}

/// Direct discounted sum over a fragment.
pub fn direct_return(m: &Mdp, z: &Fragment) -> f64 {
    let mut s = z.start;
    let mut total = 0.0;
    for (i, &(a, t)) in z.steps.iter().enumerate() {
        total += m.gamma().powi(i as i32) * m.reward()[[s, a, t]];
        s = t;
    }
    total
}

/// Lasso return by unrolling the cycle until the tail is negligible.
pub fn unrolled_return(m: &Mdp, x: &Lasso) -> f64 {
    let mut steps = x.prefix.steps.clone();
    let need = (1e-17_f64.ln() / m.gamma().ln()).ceil() as usize + x.cycle.len();
    while steps.len() < need {
        steps.extend(x.cycle.steps.iter().copied());
    }
    direct_return(m, &Fragment::new(x.prefix.start, steps))
}

pub fn initial_state(m: &Mdp, rng: &mut ChaCha8Rng) -> usize {
    let init = m.initial_states();
    init[rng.random_range(0..init.len())]
}
