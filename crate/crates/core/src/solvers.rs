//! Dynamic programming: policy evaluation, optimal and soft Q-functions,
//! and the policies built from them.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, Axis};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mdp::Mdp;

/// Relative tolerance for deciding that two actions tie for optimality.
pub const TIE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    /// Inverse temperature for the Boltzmann and MCE policies.
    pub beta: f64,
    /// Target sup-norm error of iterative solves.
    pub epsilon: f64,
    pub max_iters: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams { beta: 1.0, epsilon: 1e-10, max_iters: 100_000 }
    }
}

impl SolverParams {
    pub fn with_beta(beta: f64) -> Self {
        SolverParams { beta, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::Contract(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Contract(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }

    fn stop_threshold(&self, gamma: f64) -> f64 {
        self.epsilon * (1.0 - gamma) / (2.0 * gamma)
    }
}

/// A stationary stochastic policy, `probs[[s, a]] = π(a | s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    probs: Array2<f64>,
}

impl Policy {
    pub fn new(probs: Array2<f64>) -> Result<Self> {
        for (s, row) in probs.axis_iter(Axis(0)).enumerate() {
            if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
                return Err(Error::Contract(format!("policy row {s} has a negative or non-finite entry")));
            }
            let sum = row.sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Contract(format!("policy row {s} sums to {sum}")));
            }
        }
        Ok(Policy { probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Policy { probs: Array2::from_elem((n_states, n_actions), 1.0 / n_actions as f64) }
    }

    pub fn deterministic(n_actions: usize, choice: &[usize]) -> Self {
        let mut probs = Array2::zeros((choice.len(), n_actions));
        for (s, &a) in choice.iter().enumerate() {
            probs[[s, a]] = 1.0;
        }
        Policy { probs }
    }

    /// Rowwise softmax of `beta * logits`.
    pub fn softmax(logits: &Array2<f64>, beta: f64) -> Self {
        let mut probs = logits.mapv(|x| beta * x);
        for mut row in probs.axis_iter_mut(Axis(0)) {
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|x| x / sum);
        }
        Policy { probs }
    }

    /// Uniform over each state's action set.
    pub fn uniform_over(sets: &[Vec<usize>], n_actions: usize) -> Self {
        let mut probs = Array2::zeros((sets.len(), n_actions));
        for (s, set) in sets.iter().enumerate() {
            for &a in set {
                probs[[s, a]] = 1.0 / set.len() as f64;
            }
        }
        Policy { probs }
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[[s, a]]
    }

    pub fn probs(&self) -> &Array2<f64> {
        &self.probs
    }
}

impl Serialize for Policy {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("Policy", 1)?;
        st.serialize_field("probs", &rows(&self.probs))?;
        st.end()
    }
}

/// Value functions of one reward. `adv = q - v` rowwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTables {
    pub q: Array2<f64>,
    pub v: Array1<f64>,
    pub adv: Array2<f64>,
    pub j: Option<f64>,
}

impl ValueTables {
    fn from_q(q: Array2<f64>, v: Array1<f64>, j: Option<f64>) -> Self {
        let adv = Array2::from_shape_fn(q.dim(), |(s, a)| q[[s, a]] - v[s]);
        ValueTables { q, v, adv, j }
    }
}

impl Serialize for ValueTables {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("ValueTables", 4)?;
        st.serialize_field("q", &rows(&self.q))?;
        st.serialize_field("v", &self.v.to_vec())?;
        st.serialize_field("adv", &rows(&self.adv))?;
        st.serialize_field("j", &self.j)?;
        st.end()
    }
}

fn rows(t: &Array2<f64>) -> Vec<Vec<f64>> {
    t.axis_iter(Axis(0)).map(|r| r.to_vec()).collect()
}

fn check_policy_shape(m: &Mdp, pi: &Policy) -> Result<()> {
    if pi.probs.dim() != (m.n_states(), m.n_actions()) {
        return Err(Error::Contract(format!(
            "policy shape {:?} does not match MDP ({}, {})",
            pi.probs.dim(),
            m.n_states(),
            m.n_actions()
        )));
    }
    Ok(())
}

/// `E_{S'}[ sum_a' π(a'|S') q(S', a') ]` backup, i.e. `V^π` from `q`.
fn policy_v(q: &Array2<f64>, pi: &Policy) -> Array1<f64> {
    (q * &pi.probs).sum_axis(Axis(1))
}

/// `r̄(s,a) + γ Σ_s' τ(s'|s,a) v(s')`.
fn backup(m: &Mdp, rbar: &Array2<f64>, v: &Array1<f64>) -> Array2<f64> {
    let (ns, na) = (m.n_states(), m.n_actions());
    let tau = m.tau();
    Array2::from_shape_fn((ns, na), |(s, a)| {
        rbar[[s, a]] + m.gamma() * m.successors(s, a).iter().map(|&t| tau[[s, a, t]] * v[t]).sum::<f64>()
    })
}

fn initial_value(m: &Mdp, v: &Array1<f64>) -> f64 {
    m.mu0().dot(v)
}

/// `Q^π` by solving the `|S||A|` linear Bellman system directly.
pub fn policy_q(m: &Mdp, pi: &Policy) -> Result<ValueTables> {
    check_policy_shape(m, pi)?;
    let (ns, na) = (m.n_states(), m.n_actions());
    let n = ns * na;
    let rbar = m.expected_reward();
    let tau = m.tau();
    let mut a_mat = DMatrix::<f64>::identity(n, n);
    let b = DVector::from_iterator(n, (0..ns).flat_map(|s| (0..na).map(move |a| (s, a))).map(|(s, a)| rbar[[s, a]]));
    for s in 0..ns {
        for a in 0..na {
            let i = s * na + a;
            for &t in m.successors(s, a) {
                for a2 in 0..na {
                    let p = pi.prob(t, a2);
                    if p > 0.0 {
                        a_mat[(i, t * na + a2)] -= m.gamma() * tau[[s, a, t]] * p;
                    }
                }
            }
        }
    }
    let x = a_mat.lu().solve(&b).ok_or_else(|| Error::Numerical("policy evaluation system is singular".into()))?;
    let q = Array2::from_shape_fn((ns, na), |(s, a)| x[s * na + a]);
    let v = policy_v(&q, pi);
    let residual = (&backup(m, &rbar, &v) - &q).fold(0.0_f64, |r, x| r.max(x.abs()));
    let bound = 1e-10 * (1.0 + m.max_abs_reward());
    if !(residual < bound) {
        return Err(Error::Numerical(format!("Bellman residual {residual:e} exceeds {bound:e}")));
    }
    let j = initial_value(m, &v);
    Ok(ValueTables::from_q(q, v, Some(j)))
}

/// `Q^π` by fixed-point iteration; used to cross-check [`policy_q`].
pub fn policy_q_iterative(m: &Mdp, pi: &Policy, params: &SolverParams) -> Result<ValueTables> {
    check_policy_shape(m, pi)?;
    let rbar = m.expected_reward();
    let q = iterate(m, params, |q| backup(m, &rbar, &policy_v(q, pi)))?;
    let v = policy_v(&q, pi);
    let j = initial_value(m, &v);
    Ok(ValueTables::from_q(q, v, Some(j)))
}

fn iterate(m: &Mdp, params: &SolverParams, step: impl Fn(&Array2<f64>) -> Array2<f64>) -> Result<Array2<f64>> {
    params.validate()?;
    let threshold = params.stop_threshold(m.gamma());
    let mut q = Array2::zeros((m.n_states(), m.n_actions()));
    let mut residual = f64::INFINITY;
    for _ in 0..params.max_iters {
        let next = step(&q);
        residual = (&next - &q).fold(0.0_f64, |r, x| r.max(x.abs()));
        q = next;
        if residual < threshold {
            return Ok(q);
        }
    }
    Err(Error::Convergence { iterations: params.max_iters, residual })
}

fn row_max(q: &Array2<f64>) -> Array1<f64> {
    q.map_axis(Axis(1), |r| r.fold(f64::NEG_INFINITY, |m, &x| m.max(x)))
}

/// `Q*` by value iteration, `adv = q - max_a q`.
pub fn optimal_q(m: &Mdp, params: &SolverParams) -> Result<ValueTables> {
    let rbar = m.expected_reward();
    let q = iterate(m, params, |q| backup(m, &rbar, &row_max(q)))?;
    let v = row_max(&q);
    let j = initial_value(m, &v);
    Ok(ValueTables::from_q(q, v, Some(j)))
}

fn soft_v(q: &Array2<f64>, beta: f64) -> Array1<f64> {
    q.map_axis(Axis(1), |r| {
        let max = r.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        max + r.iter().map(|&x| (beta * (x - max)).exp()).sum::<f64>().ln() / beta
    })
}

/// Soft Q-function `Q^H_β`; `v` is the soft value `(1/β) log Σ_a exp(β q)`.
pub fn soft_q(m: &Mdp, params: &SolverParams) -> Result<ValueTables> {
    let rbar = m.expected_reward();
    let q = iterate(m, params, |q| backup(m, &rbar, &soft_v(q, params.beta)))?;
    let v = soft_v(&q, params.beta);
    Ok(ValueTables::from_q(q, v, None))
}

/// Softmax of `β A*`.
pub fn boltzmann_rational_policy(m: &Mdp, params: &SolverParams) -> Result<Policy> {
    Ok(Policy::softmax(&optimal_q(m, params)?.adv, params.beta))
}

/// Softmax of `β Q^H_β`.
pub fn mce_policy(m: &Mdp, params: &SolverParams) -> Result<Policy> {
    Ok(Policy::softmax(&soft_q(m, params)?.q, params.beta))
}

/// Actions whose optimal advantage is within tie tolerance of zero.
pub fn optimal_action_sets(m: &Mdp, params: &SolverParams) -> Result<Vec<Vec<usize>>> {
    let tables = optimal_q(m, params)?;
    Ok(action_sets_from_adv(&tables.adv, TIE_TOL * (1.0 + m.max_abs_reward())))
}

pub fn action_sets_from_adv(adv: &Array2<f64>, tol: f64) -> Vec<Vec<usize>> {
    adv.axis_iter(Axis(0)).map(|row| (0..row.len()).filter(|&a| row[a] >= -tol).collect()).collect()
}

/// Uniform over the optimal actions in every state.
pub fn maximally_supportive_optimal_policy(m: &Mdp, params: &SolverParams) -> Result<Policy> {
    Ok(Policy::uniform_over(&optimal_action_sets(m, params)?, m.n_actions()))
}

/// `J(π) = E_{S0~μ0}[V^π(S0)]`.
pub fn policy_value(m: &Mdp, pi: &Policy) -> Result<f64> {
    Ok(policy_q(m, pi)?.j.expect("policy evaluation fills j"))
}
