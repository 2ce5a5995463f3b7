//! Small hand-built MDPs with known answers, used by tests, examples and
//! the refinement search.

use ndarray::{Array1, Array3};

use crate::mdp::Mdp;
use crate::transforms::TransferTarget;

fn build(ns: usize, na: usize, gamma: f64, mu0: &[f64], edges: &[(usize, usize, usize, f64, f64)]) -> Mdp {
    let mut tau = Array3::zeros((ns, na, ns));
    let mut reward = Array3::zeros((ns, na, ns));
    for &(s, a, t, p, r) in edges {
        tau[[s, a, t]] = p;
        reward[[s, a, t]] = r;
    }
    Mdp::from_tables(tau, Array1::from_vec(mu0.to_vec()), reward, gamma).expect("fixture is valid")
}

/// One state, one action, reward 1 forever, γ = 0.9.
pub fn m_loop() -> Mdp {
    build(1, 1, 0.9, &[1.0], &[(0, 0, 0, 1.0, 1.0)]).with_names(&["s"], &["a"])
}

/// One state with two self-loop actions paying 1 and 1.5, γ = 0.5.
pub fn m_two() -> Mdp {
    build(1, 2, 0.5, &[1.0], &[(0, 0, 0, 1.0, 1.0), (0, 1, 0, 1.0, 1.5)]).with_names(&["s"], &["a1", "a2"])
}

/// `s1 -> s2 -> s2 ...` paying 1 on the first step only, γ = 0.5.
pub fn m_zpmt() -> Mdp {
    build(2, 1, 0.5, &[1.0, 0.0], &[(0, 0, 1, 1.0, 1.0), (1, 0, 1, 1.0, 0.0)]).with_names(&["s1", "s2"], &["a"])
}

/// Three states; `s2` has no incoming transitions.
pub fn m_unreach() -> Mdp {
    build(
        3,
        2,
        0.9,
        &[1.0, 0.0, 0.0],
        &[
            (0, 0, 1, 1.0, 0.5),
            (0, 1, 0, 1.0, -0.2),
            (1, 0, 0, 1.0, 0.3),
            (1, 1, 1, 1.0, 0.1),
            (2, 0, 1, 1.0, 0.7),
            (2, 1, 0, 0.5, -0.4),
            (2, 1, 1, 0.5, 0.9),
        ],
    )
    .with_names(&["s0", "s1", "s2"], &["a0", "a1"])
}

/// `s0` either gambles on an even split into terminal `s1` (action `a`) or
/// stays put for reward 1 (action `b`). γ = 0.9.
pub fn m_transfer() -> Mdp {
    build(
        2,
        2,
        0.9,
        &[1.0, 0.0],
        &[(0, 0, 0, 0.5, 1.0), (0, 0, 1, 0.5, 1.0), (0, 1, 0, 1.0, 1.0), (1, 0, 1, 1.0, 0.0), (1, 1, 1, 1.0, 0.0)],
    )
    .with_names(&["s0", "s1"], &["a", "b"])
}

/// New dynamics for [`m_transfer`]: `tau'(s0, a) = (0.3, 0.7)`, with target
/// expected reward `l` on that row.
pub fn m_transfer_target(l: f64) -> TransferTarget {
    let mut tau = m_transfer().tau().clone();
    tau[[0, 0, 0]] = 0.3;
    tau[[0, 0, 1]] = 0.7;
    let mut table = vec![vec![None; 2]; 2];
    table[0][0] = Some(l);
    TransferTarget::new(&tau, table)
}

/// `s0` picks a sure reward of 2 or a coin flip between 1 and 3.2; every
/// outcome is terminal. γ = 0.5.
pub fn m_gamble() -> Mdp {
    build(
        4,
        2,
        0.5,
        &[1.0, 0.0, 0.0, 0.0],
        &[
            (0, 0, 1, 1.0, 2.0),
            (0, 1, 2, 0.5, 1.0),
            (0, 1, 3, 0.5, 3.2),
            (1, 0, 1, 1.0, 0.0),
            (1, 1, 1, 1.0, 0.0),
            (2, 0, 2, 1.0, 0.0),
            (2, 1, 2, 1.0, 0.0),
            (3, 0, 3, 1.0, 0.0),
            (3, 1, 3, 1.0, 0.0),
        ],
    )
    .with_names(&["s0", "t_mid", "t_low", "t_high"], &["a1", "a2"])
}

/// Every fixture, by name.
pub fn all() -> Vec<(&'static str, Mdp)> {
    vec![
        ("loop", m_loop()),
        ("two", m_two()),
        ("zpmt", m_zpmt()),
        ("unreach", m_unreach()),
        ("transfer", m_transfer()),
        ("gamble", m_gamble()),
    ]
}

pub fn by_name(name: &str) -> Option<Mdp> {
    all().into_iter().find(|(n, _)| *n == name).map(|(_, m)| m)
}
