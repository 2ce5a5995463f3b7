//! Tabular MDP model, reachability, trajectory fragments and lassos.
//!
//! Tables are indexed `[s][a][s']`. Infinite trajectories are represented as
//! lassos: a finite prefix followed by a cycle repeated forever, which gives
//! every return a closed form.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solvers::Policy;

/// Tolerance used for the distribution invariants of a constructed MDP.
pub const DISTRIBUTION_TOL: f64 = 1e-12;
/// Tolerance accepted when parsing files; rows are renormalized afterwards.
pub const PARSE_TOL: f64 = 1e-9;
/// Default cap on the number of enumerated fragments or lassos.
pub const DEFAULT_ENUMERATION_CAP: usize = 50_000;

/// On-disk MDP schema. Field order is part of the file contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpFile {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub gamma: f64,
    pub mu0: Vec<f64>,
    pub tau: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<Vec<Vec<f64>>>,
}

impl MdpFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("MDP file serializes")
    }
}

/// One broken invariant of an MDP description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub indices: Vec<usize>,
    pub magnitude: f64,
    pub message: String,
}

impl Violation {
    fn new(field: &str, indices: Vec<usize>, magnitude: f64, message: String) -> Self {
        Violation { field: field.to_string(), indices, magnitude, message }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}: {}", self.field, self.indices, self.message)
    }
}

/// Checks every MDP invariant at [`DISTRIBUTION_TOL`]. An empty report means
/// the description is valid.
pub fn validate_mdp(file: &MdpFile) -> Vec<Violation> {
    check(file, DISTRIBUTION_TOL)
}

fn check(file: &MdpFile, tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    let ns = file.states.len();
    let na = file.actions.len();
    if ns == 0 {
        out.push(Violation::new("states", vec![], 0.0, "no states".into()));
    }
    if na == 0 {
        out.push(Violation::new("actions", vec![], 0.0, "no actions".into()));
    }
    if !(file.gamma.is_finite() && file.gamma > 0.0 && file.gamma < 1.0) {
        out.push(Violation::new("gamma", vec![], file.gamma, format!("gamma {} out of (0,1)", file.gamma)));
    }
    if file.mu0.len() != ns {
        out.push(Violation::new(
            "mu0",
            vec![],
            file.mu0.len() as f64,
            format!("length {} does not match {} states", file.mu0.len(), ns),
        ));
    } else {
        let mut sum = 0.0;
        for (s, &p) in file.mu0.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                out.push(Violation::new("mu0", vec![s], p, format!("entry {p} is not a probability")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > tol {
            out.push(Violation::new("mu0", vec![], sum, format!("sum {sum} ≠ 1")));
        }
    }
    for (name, table) in [("tau", &file.tau), ("reward", &file.reward)] {
        if table.len() != ns {
            out.push(Violation::new(
                name,
                vec![],
                table.len() as f64,
                format!("expected {ns} rows, found {}", table.len()),
            ));
            continue;
        }
        for (s, per_state) in table.iter().enumerate() {
            if per_state.len() != na {
                out.push(Violation::new(
                    name,
                    vec![s],
                    per_state.len() as f64,
                    format!("expected {na} actions, found {}", per_state.len()),
                ));
                continue;
            }
            for (a, row) in per_state.iter().enumerate() {
                if row.len() != ns {
                    out.push(Violation::new(
                        name,
                        vec![s, a],
                        row.len() as f64,
                        format!("expected {ns} successors, found {}", row.len()),
                    ));
                    continue;
                }
                let mut sum = 0.0;
                for (t, &x) in row.iter().enumerate() {
                    if !x.is_finite() {
                        out.push(Violation::new(name, vec![s, a, t], x, "non-finite entry".into()));
                    } else if name == "tau" && x < 0.0 {
                        out.push(Violation::new(name, vec![s, a, t], x, format!("negative probability {x}")));
                    }
                    sum += x;
                }
                if name == "tau" && (sum - 1.0).abs() > tol {
                    out.push(Violation::new(name, vec![s, a], sum, format!("row sum {sum} ≠ 1")));
                }
            }
        }
    }
    out
}

/// A validated finite MDP. Immutable; reward variants are built with
/// [`Mdp::with_reward`].
#[derive(Debug, Clone)]
pub struct Mdp {
    states: Vec<String>,
    actions: Vec<String>,
    gamma: f64,
    mu0: Array1<f64>,
    tau: Array3<f64>,
    reward: Array3<f64>,
    terminal: Vec<bool>,
    successors: Vec<Vec<Vec<usize>>>,
}

fn renormalizer(p: &[f64]) -> f64 {
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() <= DISTRIBUTION_TOL {
        1.0
    } else {
        sum
    }
}

impl Mdp {
    /// Validates at [`PARSE_TOL`] and renormalizes distributions that are off
    /// by more than rounding. Rows already within [`DISTRIBUTION_TOL`] are kept
    /// bit for bit, so a written and re-read MDP is identical.
    pub fn from_file(file: MdpFile) -> Result<Self> {
        let violations = check(&file, PARSE_TOL);
        if !violations.is_empty() {
            return Err(Error::InvalidMdp(violations));
        }
        let ns = file.states.len();
        let na = file.actions.len();
        let mut tau = Array3::zeros((ns, na, ns));
        let mut reward = Array3::zeros((ns, na, ns));
        for s in 0..ns {
            for a in 0..na {
                let sum = renormalizer(&file.tau[s][a]);
                for t in 0..ns {
                    tau[[s, a, t]] = file.tau[s][a][t] / sum;
                    reward[[s, a, t]] = file.reward[s][a][t];
                }
            }
        }
        let sum = renormalizer(&file.mu0);
        let mu0 = Array1::from_iter(file.mu0.iter().map(|p| p / sum));
        Ok(Self::assemble(file.states, file.actions, file.gamma, mu0, tau, reward))
    }

    /// Builds an MDP from tables, with generated state/action names.
    pub fn from_tables(tau: Array3<f64>, mu0: Array1<f64>, reward: Array3<f64>, gamma: f64) -> Result<Self> {
        let (ns, na, _) = tau.dim();
        let file = MdpFile {
            states: (0..ns).map(|s| format!("s{s}")).collect(),
            actions: (0..na).map(|a| format!("a{a}")).collect(),
            gamma,
            mu0: mu0.to_vec(),
            tau: nested(&tau),
            reward: nested(&reward),
        };
        Self::from_file(file)
    }

    fn assemble(
        states: Vec<String>,
        actions: Vec<String>,
        gamma: f64,
        mu0: Array1<f64>,
        tau: Array3<f64>,
        reward: Array3<f64>,
    ) -> Self {
        let (ns, na, _) = tau.dim();
        let successors =
            (0..ns).map(|s| (0..na).map(|a| (0..ns).filter(|&t| tau[[s, a, t]] > 0.0).collect()).collect()).collect();
        let terminal = terminal_flags(&tau, &reward);
        Mdp { states, actions, gamma, mu0, tau, reward, terminal, successors }
    }

    pub fn with_names(mut self, states: &[&str], actions: &[&str]) -> Self {
        assert_eq!(states.len(), self.n_states());
        assert_eq!(actions.len(), self.n_actions());
        self.states = states.iter().map(|s| s.to_string()).collect();
        self.actions = actions.iter().map(|s| s.to_string()).collect();
        self
    }

    /// Same dynamics, different reward. Terminal flags are recomputed.
    pub fn with_reward(&self, reward: Array3<f64>) -> Result<Self> {
        if reward.dim() != self.reward.dim() {
            return Err(Error::Contract(format!(
                "reward shape {:?} does not match MDP shape {:?}",
                reward.dim(),
                self.reward.dim()
            )));
        }
        if let Some(x) = reward.iter().find(|x| !x.is_finite()) {
            return Err(Error::Contract(format!("non-finite reward entry {x}")));
        }
        let mut m = self.clone();
        m.terminal = terminal_flags(&m.tau, &reward);
        m.reward = reward;
        Ok(m)
    }

    /// Same reward, different dynamics (validated like a parsed file).
    pub fn with_tau(&self, tau: Array3<f64>) -> Result<Self> {
        let mut file = self.to_file();
        if tau.dim() != self.tau.dim() {
            return Err(Error::Contract(format!(
                "transition shape {:?} does not match MDP shape {:?}",
                tau.dim(),
                self.tau.dim()
            )));
        }
        file.tau = nested(&tau);
        Self::from_file(file)
    }

    pub fn to_file(&self) -> MdpFile {
        MdpFile {
            states: self.states.clone(),
            actions: self.actions.clone(),
            gamma: self.gamma,
            mu0: self.mu0.to_vec(),
            tau: nested(&self.tau),
            reward: nested(&self.reward),
        }
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mu0(&self) -> &Array1<f64> {
        &self.mu0
    }

    pub fn tau(&self) -> &Array3<f64> {
        &self.tau
    }

    pub fn reward(&self) -> &Array3<f64> {
        &self.reward
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn action_names(&self) -> &[String] {
        &self.actions
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn is_initial(&self, s: usize) -> bool {
        self.mu0[s] > 0.0
    }

    pub fn initial_states(&self) -> Vec<usize> {
        (0..self.n_states()).filter(|&s| self.is_initial(s)).collect()
    }

    pub fn terminal_states(&self) -> Vec<usize> {
        (0..self.n_states()).filter(|&s| self.terminal[s]).collect()
    }

    pub fn is_possible(&self, s: usize, a: usize, t: usize) -> bool {
        self.tau[[s, a, t]] > 0.0
    }

    /// Successors in the support of `tau(s, a)`, ascending.
    pub fn successors(&self, s: usize, a: usize) -> &[usize] {
        &self.successors[s][a]
    }

    pub fn max_abs_reward(&self) -> f64 {
        self.reward.iter().fold(0.0_f64, |m, r| m.max(r.abs()))
    }

    /// `E_{S'~tau(s,a)}[R(s,a,S')]` for every pair.
    pub fn expected_reward(&self) -> Array2<f64> {
        expected_reward(&self.tau, &self.reward)
    }
}

pub(crate) fn expected_reward(tau: &Array3<f64>, reward: &Array3<f64>) -> Array2<f64> {
    let (ns, na, _) = tau.dim();
    Array2::from_shape_fn((ns, na), |(s, a)| (0..ns).map(|t| tau[[s, a, t]] * reward[[s, a, t]]).sum())
}

fn terminal_flags(tau: &Array3<f64>, reward: &Array3<f64>) -> Vec<bool> {
    let (ns, na, _) = tau.dim();
    (0..ns).map(|s| (0..na).all(|a| tau[[s, a, s]] == 1.0 && reward[[s, a, s]] == 0.0)).collect()
}

pub(crate) fn nested(t: &Array3<f64>) -> Vec<Vec<Vec<f64>>> {
    let (n0, n1, n2) = t.dim();
    (0..n0).map(|i| (0..n1).map(|j| (0..n2).map(|k| t[[i, j, k]]).collect()).collect()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Possibility {
    Possible,
    Impossible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub s_next: usize,
    pub possibility: Possibility,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransitionPartition {
    pub possible: Vec<Transition>,
    pub impossible: Vec<Transition>,
}

pub fn classify_transitions(m: &Mdp) -> TransitionPartition {
    let mut out = TransitionPartition::default();
    for s in 0..m.n_states() {
        for a in 0..m.n_actions() {
            for t in 0..m.n_states() {
                if m.is_possible(s, a, t) {
                    out.possible.push(Transition { s, a, s_next: t, possibility: Possibility::Possible });
                } else {
                    out.impossible.push(Transition { s, a, s_next: t, possibility: Possibility::Impossible });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachabilitySummary {
    /// States on some possible, initial trajectory.
    pub reachable_states: Vec<usize>,
    /// Possible transitions leaving reachable states, as `(s, a, s')`.
    pub reachable_transitions: Vec<(usize, usize, usize)>,
    /// States visited by trajectories the policy supports, when one was given.
    pub supported_states: Option<Vec<usize>>,
}

impl ReachabilitySummary {
    pub fn is_reachable(&self, s: usize) -> bool {
        self.reachable_states.binary_search(&s).is_ok()
    }

    pub fn is_reachable_transition(&self, s: usize, a: usize, t: usize) -> bool {
        self.reachable_transitions.binary_search(&(s, a, t)).is_ok()
    }
}

pub fn reachability(m: &Mdp, pi: Option<&Policy>) -> ReachabilitySummary {
    let reachable = search(m, |_, _| true);
    let reachable_states: Vec<usize> = (0..m.n_states()).filter(|&s| reachable[s]).collect();
    let mut reachable_transitions = Vec::new();
    for &s in &reachable_states {
        for a in 0..m.n_actions() {
            for &t in m.successors(s, a) {
                reachable_transitions.push((s, a, t));
            }
        }
    }
    let supported_states = pi.map(|pi| {
        let seen = search(m, |s, a| pi.prob(s, a) > 0.0);
        (0..m.n_states()).filter(|&s| seen[s]).collect()
    });
    ReachabilitySummary { reachable_states, reachable_transitions, supported_states }
}

/// Breadth-first search from the initial states over possible transitions
/// whose action passes `allowed`.
fn search(m: &Mdp, allowed: impl Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; m.n_states()];
    let mut queue = VecDeque::new();
    for s in m.initial_states() {
        seen[s] = true;
        queue.push_back(s);
    }
    while let Some(s) = queue.pop_front() {
        for a in 0..m.n_actions() {
            if !allowed(s, a) {
                continue;
            }
            for &t in m.successors(s, a) {
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
    }
    seen
}

/// A finite trajectory `(s0, a0, s1, ..., s_n)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fragment {
    pub start: usize,
    /// `(action, next state)` pairs.
    pub steps: Vec<(usize, usize)>,
}

impl Fragment {
    pub fn state(start: usize) -> Self {
        Fragment { start, steps: Vec::new() }
    }

    pub fn new(start: usize, steps: Vec<(usize, usize)>) -> Self {
        Fragment { start, steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn end(&self) -> usize {
        self.steps.last().map_or(self.start, |&(_, t)| t)
    }

    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut s = self.start;
        self.steps.iter().map(move |&(a, t)| {
            let x = (s, a, t);
            s = t;
            x
        })
    }

    pub fn is_possible(&self, m: &Mdp) -> bool {
        self.transitions().all(|(s, a, t)| m.is_possible(s, a, t))
    }

    pub fn is_initial(&self, m: &Mdp) -> bool {
        m.is_initial(self.start)
    }

    /// `self` followed by `other`; `other` must start where `self` ends.
    pub fn concat(&self, other: &Fragment) -> Result<Fragment> {
        if other.start != self.end() {
            return Err(Error::Contract(format!(
                "cannot concatenate: fragment ends in {} but the next starts in {}",
                self.end(),
                other.start
            )));
        }
        let mut steps = self.steps.clone();
        steps.extend_from_slice(&other.steps);
        Ok(Fragment { start: self.start, steps })
    }

    fn check_bounds(&self, m: &Mdp) -> Result<()> {
        let ok = self.start < m.n_states() && self.steps.iter().all(|&(a, t)| a < m.n_actions() && t < m.n_states());
        if ok {
            Ok(())
        } else {
            Err(Error::Contract("fragment indexes outside the MDP".into()))
        }
    }
}

/// Infinite trajectory `prefix · cycle · cycle · ...`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Lasso {
    pub prefix: Fragment,
    pub cycle: Fragment,
}

impl Lasso {
    pub fn new(prefix: Fragment, cycle: Fragment) -> Result<Self> {
        if cycle.is_empty() {
            return Err(Error::Contract("lasso cycle must have at least one step".into()));
        }
        if cycle.start != prefix.end() || cycle.end() != cycle.start {
            return Err(Error::Contract(format!("cycle must start and end at the prefix end state {}", prefix.end())));
        }
        Ok(Lasso { prefix, cycle })
    }

    pub fn start(&self) -> usize {
        self.prefix.start
    }

    pub fn is_possible(&self, m: &Mdp) -> bool {
        self.prefix.is_possible(m) && self.cycle.is_possible(m)
    }

    pub fn is_initial(&self, m: &Mdp) -> bool {
        self.prefix.is_initial(m)
    }

    /// Shortest prefix and primitive cycle describing the same trajectory.
    pub fn canonical(&self) -> Lasso {
        let mut cycle = self.cycle.steps.clone();
        let n = cycle.len();
        for d in 1..=n {
            if n % d == 0 && (d..n).all(|i| cycle[i] == cycle[i - d]) {
                cycle.truncate(d);
                break;
            }
        }
        let mut prefix = self.prefix.steps.clone();
        let mut cycle_start = self.cycle.start;
        // The cycle's last step enters `cycle_start`; if the prefix ends with
        // the same step, the cycle can be rotated back by one.
        while let Some(&last) = prefix.last() {
            let prev = if prefix.len() >= 2 { prefix[prefix.len() - 2].1 } else { self.prefix.start };
            let cycle_last = *cycle.last().unwrap();
            let cycle_prev = if cycle.len() >= 2 { cycle[cycle.len() - 2].1 } else { cycle_start };
            if last != cycle_last || prev != cycle_prev {
                break;
            }
            prefix.pop();
            cycle.rotate_right(1);
            cycle_start = prev;
        }
        Lasso {
            prefix: Fragment { start: self.prefix.start, steps: prefix },
            cycle: Fragment { start: cycle_start, steps: cycle },
        }
    }
}

pub fn fragment_return(m: &Mdp, z: &Fragment) -> f64 {
    reward_sum(m.reward(), m.gamma(), z)
}

pub(crate) fn reward_sum(reward: &Array3<f64>, gamma: f64, z: &Fragment) -> f64 {
    let mut total = 0.0;
    let mut discount = 1.0;
    for (s, a, t) in z.transitions() {
        total += discount * reward[[s, a, t]];
        discount *= gamma;
    }
    total
}

/// Exact return of the infinite trajectory via the geometric series over
/// the cycle.
pub fn lasso_return(m: &Mdp, x: &Lasso) -> f64 {
    let gamma = m.gamma();
    let head = fragment_return(m, &x.prefix);
    let loop_return = fragment_return(m, &x.cycle);
    head + gamma.powi(x.prefix.len() as i32) * loop_return / (1.0 - gamma.powi(x.cycle.len() as i32))
}

/// All fragments of length `0..=max_len` passing the filters, ordered by
/// `(length, start, steps)`.
pub fn enumerate_fragments(m: &Mdp, max_len: usize, possible_only: bool, initial_only: bool) -> Result<Vec<Fragment>> {
    enumerate_fragments_capped(m, max_len, possible_only, initial_only, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_fragments_capped(
    m: &Mdp,
    max_len: usize,
    possible_only: bool,
    initial_only: bool,
    cap: usize,
) -> Result<Vec<Fragment>> {
    let starts: Vec<usize> = if initial_only { m.initial_states() } else { (0..m.n_states()).collect() };
    let mut out: Vec<Fragment> = starts.into_iter().map(Fragment::state).collect();
    if out.len() > cap {
        return Err(Error::EnumerationCap { cap });
    }
    let mut layer_start = 0;
    for _ in 0..max_len {
        let layer_end = out.len();
        for i in layer_start..layer_end {
            let end = out[i].end();
            for a in 0..m.n_actions() {
                let next: Vec<usize> =
                    if possible_only { m.successors(end, a).to_vec() } else { (0..m.n_states()).collect() };
                for t in next {
                    if out.len() >= cap {
                        return Err(Error::EnumerationCap { cap });
                    }
                    let mut z = out[i].clone();
                    z.steps.push((a, t));
                    out.push(z);
                }
            }
        }
        layer_start = layer_end;
    }
    Ok(out)
}

/// Possible fragments from `s` back to `s` with length `1..=max_len`.
fn cycles_at(m: &Mdp, s: usize, max_len: usize) -> Vec<Fragment> {
    let mut out = Vec::new();
    let mut stack = vec![Fragment::state(s)];
    let mut layer = Vec::new();
    for _ in 0..max_len {
        for z in stack.drain(..) {
            let end = z.end();
            for a in 0..m.n_actions() {
                for &t in m.successors(end, a) {
                    let mut next = z.clone();
                    next.steps.push((a, t));
                    if t == s {
                        out.push(next.clone());
                    }
                    layer.push(next);
                }
            }
        }
        std::mem::swap(&mut stack, &mut layer);
    }
    out.sort_by(|x, y| (x.len(), &x.steps).cmp(&(y.len(), &y.steps)));
    out
}

/// Possible initial lassos with prefix length `<= prefix_cap` and cycle
/// length `1..=cycle_cap`, canonicalized and deduplicated, in enumeration
/// order.
pub fn enumerate_lassos(m: &Mdp, prefix_cap: usize, cycle_cap: usize, cap: usize) -> Result<Vec<Lasso>> {
    let prefixes = enumerate_fragments_capped(m, prefix_cap, true, true, cap)?;
    let mut cycle_cache: Vec<Option<Vec<Fragment>>> = vec![None; m.n_states()];
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for prefix in &prefixes {
        let end = prefix.end();
        let cycles = cycle_cache[end].get_or_insert_with(|| cycles_at(m, end, cycle_cap));
        for cycle in cycles.iter() {
            let lasso = Lasso { prefix: prefix.clone(), cycle: cycle.clone() }.canonical();
            if seen.insert(lasso.clone()) {
                if out.len() >= cap {
                    return Err(Error::EnumerationCap { cap });
                }
                out.push(lasso);
            }
        }
    }
    Ok(out)
}

/// One possible initial lasso through every reachable transition: a
/// shortest initial path to the transition, the transition, then the
/// lowest-index walk until a state repeats.
pub fn covering_lassos(m: &Mdp) -> Vec<Lasso> {
    let paths = shortest_initial_paths(m);
    let reach = reachability(m, None);
    let mut out = Vec::new();
    for &(s, a, t) in &reach.reachable_transitions {
        let Some(path) = &paths[s] else { continue };
        let mut steps = path.steps.clone();
        steps.push((a, t));
        // visited[i] is the state reached after steps[base + i - 1].
        let base = steps.len();
        let mut visited = vec![t];
        loop {
            let cur = *visited.last().unwrap();
            let (b, u) = (0..m.n_actions())
                .find_map(|b| m.successors(cur, b).first().map(|&u| (b, u)))
                .expect("every row of tau has a successor");
            steps.push((b, u));
            if let Some(pos) = visited.iter().position(|&v| v == u) {
                let cycle_steps = steps.split_off(base + pos);
                let lasso = Lasso {
                    prefix: Fragment { start: path.start, steps },
                    cycle: Fragment { start: visited[pos], steps: cycle_steps },
                };
                out.push(lasso.canonical());
                break;
            }
            visited.push(u);
        }
    }
    out
}

fn shortest_initial_paths(m: &Mdp) -> Vec<Option<Fragment>> {
    let mut paths: Vec<Option<Fragment>> = vec![None; m.n_states()];
    let mut queue = VecDeque::new();
    for s in m.initial_states() {
        paths[s] = Some(Fragment::state(s));
        queue.push_back(s);
    }
    while let Some(s) = queue.pop_front() {
        for a in 0..m.n_actions() {
            for &t in m.successors(s, a) {
                if paths[t].is_none() {
                    let mut z = paths[s].clone().unwrap();
                    z.steps.push((a, t));
                    paths[t] = Some(z);
                    queue.push_back(t);
                }
            }
        }
    }
    paths
}

/// Errors if the fragment indexes outside `m`.
pub fn check_fragment(m: &Mdp, z: &Fragment) -> Result<()> {
    z.check_bounds(m)
}
