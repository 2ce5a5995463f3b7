//! Reward transformations: construction, random sampling, application and
//! membership tests, plus the dynamics-transfer construction.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Array3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{expected_reward, nested, reachability, Mdp};
use crate::rng::rng_for;
use crate::solvers::{self, optimal_q, SolverParams, TIE_TOL};

/// Default membership tolerance, relative to `1 + max|R|`.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

/// The transformation families, in table column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransformClass {
    Identity,
    ZeroInitialShaping,
    KInitialShaping,
    PotentialShaping,
    SPrimeRedistribution,
    PositiveLinearScaling,
    ZeroPreservingMonotone,
    OptimalityPreservingAllStates,
    OptimalityPreservingSupportedStates,
    ImpossibleMask,
    UnreachableMask,
}

impl TransformClass {
    pub const ALL: [TransformClass; 11] = [
        TransformClass::Identity,
        TransformClass::ZeroInitialShaping,
        TransformClass::KInitialShaping,
        TransformClass::PotentialShaping,
        TransformClass::SPrimeRedistribution,
        TransformClass::PositiveLinearScaling,
        TransformClass::ZeroPreservingMonotone,
        TransformClass::OptimalityPreservingAllStates,
        TransformClass::OptimalityPreservingSupportedStates,
        TransformClass::ImpossibleMask,
        TransformClass::UnreachableMask,
    ];

    /// Short column label.
    pub fn code(self) -> &'static str {
        match self {
            TransformClass::Identity => "Id",
            TransformClass::ZeroInitialShaping => "Z0",
            TransformClass::KInitialShaping => "Zk",
            TransformClass::PotentialShaping => "PS",
            TransformClass::SPrimeRedistribution => "SR",
            TransformClass::PositiveLinearScaling => "LS",
            TransformClass::ZeroPreservingMonotone => "ZP",
            TransformClass::OptimalityPreservingAllStates => "OA",
            TransformClass::OptimalityPreservingSupportedStates => "OS",
            TransformClass::ImpossibleMask => "IM",
            TransformClass::UnreachableMask => "UM",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.code().eq_ignore_ascii_case(code))
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).unwrap()
    }
}

impl Serialize for TransformClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for TransformClass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let code = String::deserialize(d)?;
        TransformClass::from_code(&code)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown transformation class `{code}`")))
    }
}

impl fmt::Display for TransformClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// How hard a sampler tries to produce a non-trivial member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Any member of the class, possibly degenerate.
    Member,
    /// A member that exercises what distinguishes the class from its
    /// subclasses, or `Unsupported` if the MDP admits none.
    Strict,
}

/// One concrete reward transformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformSpec {
    Identity,
    PotentialShaping {
        phi: Vec<f64>,
        k_initial: Option<f64>,
    },
    SPrimeRedistribution {
        delta: Vec<Vec<Vec<f64>>>,
    },
    PositiveLinearScaling {
        c: f64,
    },
    /// Piecewise-linear, through the sorted `(x, f(x))` breakpoints and
    /// extended linearly past both ends.
    ZeroPreservingMonotone {
        breakpoints: Vec<(f64, f64)>,
    },
    Mask {
        transitions: Vec<(usize, usize, usize)>,
        replacement: Vec<f64>,
    },
    /// Sets `E[R'(s,a,S')] = Ψ(s) - γ E[Ψ(S')] - gap(s,a)` by shifting the
    /// possible entries of each row; `gap` is zero exactly on `optimal[s]`.
    OptimalityPreserving {
        optimal: Vec<Vec<usize>>,
        psi: Vec<f64>,
        gaps: Vec<Vec<f64>>,
    },
}

impl TransformSpec {
    pub fn validate(&self, m: &Mdp) -> Result<()> {
        let (ns, na) = (m.n_states(), m.n_actions());
        let fail = |msg: String| Err(Error::Contract(msg));
        match self {
            TransformSpec::Identity => Ok(()),
            TransformSpec::PotentialShaping { phi, k_initial } => {
                if phi.len() != ns {
                    return fail(format!("potential has {} entries for {ns} states", phi.len()));
                }
                if let Some(x) = phi.iter().find(|x| !x.is_finite()) {
                    return fail(format!("non-finite potential {x}"));
                }
                for s in m.terminal_states() {
                    if phi[s] != 0.0 {
                        return fail(format!("potential {} at terminal state {s}", phi[s]));
                    }
                }
                if let Some(k) = k_initial {
                    for s in m.initial_states() {
                        if phi[s] != *k {
                            return fail(format!("potential {} at initial state {s}, expected {k}", phi[s]));
                        }
                    }
                }
                Ok(())
            }
            TransformSpec::SPrimeRedistribution { delta } => {
                let delta = table3(delta, m)?;
                let e = expected_reward(m.tau(), &delta);
                let worst = e.fold(0.0_f64, |w, x| w.max(x.abs()));
                if worst > 1e-10 {
                    return fail(format!("redistribution changes an expected reward by {worst:e}"));
                }
                Ok(())
            }
            TransformSpec::PositiveLinearScaling { c } => {
                if !(c.is_finite() && *c > 0.0) {
                    return fail(format!("scale {c} is not positive"));
                }
                Ok(())
            }
            TransformSpec::ZeroPreservingMonotone { breakpoints } => {
                if breakpoints.len() < 2 {
                    return fail("monotone map needs at least two breakpoints".into());
                }
                if breakpoints.windows(2).any(|w| !(w[1].0 > w[0].0 && w[1].1 > w[0].1)) {
                    return fail("breakpoints are not strictly increasing".into());
                }
                if breakpoints.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                    return fail("non-finite breakpoint".into());
                }
                if piecewise(breakpoints, 0.0) != 0.0 {
                    return fail("monotone map does not fix 0".into());
                }
                Ok(())
            }
            TransformSpec::Mask { transitions, replacement } => {
                if transitions.len() != replacement.len() {
                    return fail("mask replacement length differs from its transition set".into());
                }
                for &(s, a, t) in transitions {
                    if s >= ns || a >= na || t >= ns {
                        return fail(format!("masked transition ({s},{a},{t}) out of range"));
                    }
                }
                if let Some(x) = replacement.iter().find(|x| !x.is_finite()) {
                    return fail(format!("non-finite replacement {x}"));
                }
                Ok(())
            }
            TransformSpec::OptimalityPreserving { optimal, psi, gaps } => {
                if optimal.len() != ns || psi.len() != ns || gaps.len() != ns {
                    return fail("optimality-preserving tables have the wrong number of states".into());
                }
                for s in 0..ns {
                    if optimal[s].is_empty() {
                        return fail(format!("empty optimal set at state {s}"));
                    }
                    if optimal[s].iter().any(|&a| a >= na) || gaps[s].len() != na {
                        return fail(format!("bad action indices at state {s}"));
                    }
                    for a in 0..na {
                        let g = gaps[s][a];
                        let in_o = optimal[s].contains(&a);
                        if !g.is_finite() || (in_o && g != 0.0) || (!in_o && g <= 0.0) {
                            return fail(format!("gap {g} at ({s},{a}) inconsistent with the optimal set"));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Smallest class of the hierarchy this spec is tagged with.
    pub fn describe(&self) -> &'static str {
        match self {
            TransformSpec::Identity => "identity",
            TransformSpec::PotentialShaping { .. } => "potential shaping",
            TransformSpec::SPrimeRedistribution { .. } => "S'-redistribution",
            TransformSpec::PositiveLinearScaling { .. } => "positive linear scaling",
            TransformSpec::ZeroPreservingMonotone { .. } => "zero-preserving monotone",
            TransformSpec::Mask { .. } => "mask",
            TransformSpec::OptimalityPreserving { .. } => "optimality-preserving",
        }
    }
}

fn table3(t: &[Vec<Vec<f64>>], m: &Mdp) -> Result<Array3<f64>> {
    let (ns, na) = (m.n_states(), m.n_actions());
    let ok = t.len() == ns && t.iter().all(|r| r.len() == na && r.iter().all(|x| x.len() == ns));
    if !ok {
        return Err(Error::Contract("table shape does not match the MDP".into()));
    }
    Ok(Array3::from_shape_fn((ns, na, ns), |(s, a, u)| t[s][a][u]))
}

fn piecewise(bp: &[(f64, f64)], x: f64) -> f64 {
    let i = match bp.iter().position(|&(bx, _)| bx >= x) {
        Some(0) => 0,
        Some(i) => i - 1,
        None => bp.len() - 2,
    };
    let (x0, y0) = bp[i];
    let (x1, y1) = bp[i + 1];
    if x == x0 {
        return y0;
    }
    if x == x1 {
        return y1;
    }
    y0 + (x - x0) * (y1 - y0) / (x1 - x0)
}

/// The transformed reward table.
pub fn apply_transform(m: &Mdp, spec: &TransformSpec) -> Result<Array3<f64>> {
    spec.validate(m)?;
    let r = m.reward();
    let g = m.gamma();
    Ok(match spec {
        TransformSpec::Identity => r.clone(),
        TransformSpec::PotentialShaping { phi, .. } => {
            Array3::from_shape_fn(r.dim(), |(s, a, t)| r[[s, a, t]] + g * phi[t] - phi[s])
        }
        TransformSpec::SPrimeRedistribution { delta } => r + &table3(delta, m)?,
        TransformSpec::PositiveLinearScaling { c } => r * *c,
        TransformSpec::ZeroPreservingMonotone { breakpoints } => r.mapv(|x| piecewise(breakpoints, x)),
        TransformSpec::Mask { transitions, replacement } => {
            let mut out = r.clone();
            for (&(s, a, t), &x) in transitions.iter().zip(replacement) {
                out[[s, a, t]] = x;
            }
            out
        }
        TransformSpec::OptimalityPreserving { psi, gaps, .. } => {
            let tau = m.tau();
            let rbar = m.expected_reward();
            let mut out = r.clone();
            for s in 0..m.n_states() {
                for a in 0..m.n_actions() {
                    let next: f64 = m.successors(s, a).iter().map(|&t| tau[[s, a, t]] * psi[t]).sum();
                    let shift = psi[s] - g * next - gaps[s][a] - rbar[[s, a]];
                    for &t in m.successors(s, a) {
                        out[[s, a, t]] += shift;
                    }
                }
            }
            out
        }
    })
}

pub fn transform_mdp(m: &Mdp, spec: &TransformSpec) -> Result<Mdp> {
    m.with_reward(apply_transform(m, spec)?)
}

fn unsupported(class: TransformClass, why: &str) -> Error {
    Error::Unsupported(format!("{class}: {why}"))
}

/// Draws a member of `class` for `m`, deterministically from `seed`.
pub fn sample_transform(
    class: TransformClass,
    m: &Mdp,
    seed: u64,
    magnitude: f64,
    mode: SampleMode,
) -> Result<TransformSpec> {
    let mut rng = rng_for(seed, &[class.index() as u64]);
    sample_transform_with(class, m, &mut rng, magnitude, mode)
}

pub fn sample_transform_with<R: Rng>(
    class: TransformClass,
    m: &Mdp,
    rng: &mut R,
    magnitude: f64,
    mode: SampleMode,
) -> Result<TransformSpec> {
    let strict = mode == SampleMode::Strict;
    let (ns, na) = (m.n_states(), m.n_actions());
    let initial = m.initial_states();
    let terminal: Vec<bool> = (0..ns).map(|s| m.is_terminal(s)).collect();
    let uniform = |rng: &mut R| rng.random_range(-magnitude..=magnitude);
    match class {
        TransformClass::Identity => Ok(TransformSpec::Identity),
        TransformClass::PotentialShaping => {
            let free: Vec<usize> = initial.iter().copied().filter(|&s| !terminal[s]).collect();
            if strict && (initial.len() < 2 || free.is_empty()) {
                return Err(unsupported(class, "needs two initial states, one non-terminal"));
            }
            loop {
                let phi: Vec<f64> = (0..ns).map(|s| if terminal[s] { 0.0 } else { uniform(rng) }).collect();
                let spread = initial.iter().map(|&s| phi[s]).fold(f64::NEG_INFINITY, f64::max)
                    - initial.iter().map(|&s| phi[s]).fold(f64::INFINITY, f64::min);
                if !strict || spread >= 0.1 * magnitude {
                    return Ok(TransformSpec::PotentialShaping { phi, k_initial: None });
                }
            }
        }
        TransformClass::KInitialShaping | TransformClass::ZeroInitialShaping => {
            let zero = class == TransformClass::ZeroInitialShaping;
            let initial_terminal = initial.iter().any(|&s| terminal[s]);
            let k = if zero || initial_terminal {
                if strict && !zero {
                    return Err(unsupported(class, "an initial state is terminal, so k must be 0"));
                }
                0.0
            } else {
                let mut k = uniform(rng);
                while strict && k.abs() < 0.1 * magnitude {
                    k = uniform(rng);
                }
                k
            };
            let free: Vec<usize> = (0..ns).filter(|&s| !terminal[s] && !m.is_initial(s)).collect();
            if strict && zero && free.is_empty() {
                return Err(unsupported(class, "no state where the potential may be nonzero"));
            }
            let mut phi: Vec<f64> = (0..ns)
                .map(|s| {
                    if terminal[s] {
                        0.0
                    } else if m.is_initial(s) {
                        k
                    } else {
                        uniform(rng)
                    }
                })
                .collect();
            if strict && zero {
                while free.iter().all(|&s| phi[s].abs() < 0.1 * magnitude) {
                    for &s in &free {
                        phi[s] = uniform(rng);
                    }
                }
            }
            Ok(TransformSpec::PotentialShaping { phi, k_initial: Some(k) })
        }
        TransformClass::SPrimeRedistribution => {
            let stochastic = (0..ns).any(|s| (0..na).any(|a| m.successors(s, a).len() >= 2));
            if strict && !stochastic {
                return Err(unsupported(class, "no stochastic transition row"));
            }
            let tau = m.tau();
            let mut delta = vec![vec![vec![0.0; ns]; na]; ns];
            for s in 0..ns {
                for a in 0..na {
                    let x: Vec<f64> = (0..ns).map(|_| uniform(rng)).collect();
                    let mean: f64 = m.successors(s, a).iter().map(|&t| tau[[s, a, t]] * x[t]).sum();
                    for t in 0..ns {
                        delta[s][a][t] = if m.is_possible(s, a, t) { x[t] - mean } else { x[t] };
                    }
                }
            }
            Ok(TransformSpec::SPrimeRedistribution { delta })
        }
        TransformClass::PositiveLinearScaling => loop {
            let c = rng.random_range(0.2f64.ln()..=5.0f64.ln());
            if !strict || c.abs() >= 0.1 {
                return Ok(TransformSpec::PositiveLinearScaling { c: c.exp() });
            }
        },
        TransformClass::ZeroPreservingMonotone => sample_zpmt(m, rng, strict),
        TransformClass::OptimalityPreservingAllStates | TransformClass::OptimalityPreservingSupportedStates => {
            sample_opt(class, m, rng, magnitude, strict)
        }
        TransformClass::ImpossibleMask => {
            let transitions: Vec<_> =
                crate::mdp::classify_transitions(m).impossible.into_iter().map(|x| (x.s, x.a, x.s_next)).collect();
            if strict && transitions.is_empty() {
                return Err(unsupported(class, "no impossible transitions"));
            }
            let replacement = transitions.iter().map(|_| 2.0 * uniform(rng)).collect();
            Ok(TransformSpec::Mask { transitions, replacement })
        }
        TransformClass::UnreachableMask => {
            let reach = reachability(m, None);
            let mut transitions = Vec::new();
            let mut any_possible = false;
            for s in 0..ns {
                for a in 0..na {
                    for t in 0..ns {
                        if !reach.is_reachable_transition(s, a, t) {
                            any_possible |= m.is_possible(s, a, t);
                            transitions.push((s, a, t));
                        }
                    }
                }
            }
            if strict && !any_possible {
                return Err(unsupported(class, "no possible unreachable transitions"));
            }
            let replacement = transitions.iter().map(|_| 2.0 * uniform(rng)).collect();
            Ok(TransformSpec::Mask { transitions, replacement })
        }
    }
}

fn sample_zpmt<R: Rng>(m: &Mdp, rng: &mut R, strict: bool) -> Result<TransformSpec> {
    let mut values: Vec<f64> = m.reward().iter().copied().chain([0.0]).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let nonzero: Vec<f64> = values.iter().copied().filter(|&x| x != 0.0).collect();
    if strict && nonzero.len() < 2 {
        return Err(unsupported(TransformClass::ZeroPreservingMonotone, "fewer than two nonzero reward values"));
    }
    let lo = values[0] - 1.0;
    let hi = values[values.len() - 1] + 1.0;
    let mut xs = vec![lo];
    xs.extend_from_slice(&values);
    xs.push(hi);
    let zero = xs.iter().position(|&x| x == 0.0).unwrap();
    loop {
        let mut ys = vec![0.0; xs.len()];
        let mut slope = || rng.random_range(0.2f64.ln()..=5.0f64.ln()).exp();
        for i in zero + 1..xs.len() {
            ys[i] = ys[i - 1] + slope() * (xs[i] - xs[i - 1]);
        }
        for i in (0..zero).rev() {
            ys[i] = ys[i + 1] - slope() * (xs[i + 1] - xs[i]);
        }
        let breakpoints: Vec<(f64, f64)> = xs.iter().copied().zip(ys).collect();
        if !strict {
            return Ok(TransformSpec::ZeroPreservingMonotone { breakpoints });
        }
        let ratios: Vec<f64> = nonzero.iter().map(|&x| piecewise(&breakpoints, x) / x).collect();
        let (min, max) = ratios.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &r| (a.min(r), b.max(r)));
        if max / min >= 1.05 {
            return Ok(TransformSpec::ZeroPreservingMonotone { breakpoints });
        }
    }
}

fn sample_opt<R: Rng>(
    class: TransformClass,
    m: &Mdp,
    rng: &mut R,
    magnitude: f64,
    strict: bool,
) -> Result<TransformSpec> {
    let (ns, na) = (m.n_states(), m.n_actions());
    let params = SolverParams::default();
    let tables = optimal_q(m, &params)?;
    let o_star = solvers::action_sets_from_adv(&tables.adv, TIE_TOL * (1.0 + m.max_abs_reward()));
    let all: Vec<usize> = (0..na).collect();
    let mut optimal: Vec<Vec<usize>> =
        (0..ns).map(|s| if m.is_terminal(s) { all.clone() } else { o_star[s].clone() }).collect();
    if class == TransformClass::OptimalityPreservingAllStates {
        if strict && optimal.iter().all(|o| o.len() == na) {
            return Err(unsupported(class, "every action is optimal everywhere"));
        }
    } else {
        let pi = solvers::Policy::uniform_over(&o_star, na);
        let supported = reachability(m, Some(&pi)).supported_states.unwrap();
        let outside: Vec<usize> =
            (0..ns).filter(|s| supported.binary_search(s).is_err() && !m.is_terminal(*s)).collect();
        if strict && (outside.is_empty() || na < 2) {
            return Err(unsupported(class, "no non-terminal state outside the optimal support"));
        }
        loop {
            for &s in &outside {
                let mut set: Vec<usize> = (0..na).filter(|_| rng.random_bool(0.5)).collect();
                if set.is_empty() {
                    set.push(rng.random_range(0..na));
                }
                optimal[s] = set;
            }
            if !strict || outside.iter().any(|&s| optimal[s] != o_star[s]) {
                break;
            }
        }
    }
    let gaps = (0..ns)
        .map(|s| {
            (0..na)
                .map(|a| if optimal[s].contains(&a) { 0.0 } else { rng.random_range(0.05..=1.0) * magnitude })
                .collect()
        })
        .collect();
    Ok(TransformSpec::OptimalityPreserving { optimal, psi: tables.v.to_vec(), gaps })
}

fn default_tol(m: &Mdp, r1: &Array3<f64>, r2: &Array3<f64>) -> f64 {
    let scale = r1.iter().chain(r2.iter()).fold(m.max_abs_reward(), |a, x| a.max(x.abs()));
    MEMBERSHIP_TOL * (1.0 + scale)
}

fn check_shape(m: &Mdp, r: &Array3<f64>) -> Result<()> {
    if r.dim() != m.reward().dim() {
        return Err(Error::Contract(format!("reward shape {:?} does not match the MDP", r.dim())));
    }
    Ok(())
}

/// True iff `r1` and `r2` have the same expected reward on every `(s, a)`.
pub fn is_sprime_redistribution(m: &Mdp, r1: &Array3<f64>, r2: &Array3<f64>, tol: Option<f64>) -> Result<bool> {
    check_shape(m, r1)?;
    check_shape(m, r2)?;
    let tol = tol.unwrap_or_else(|| default_tol(m, r1, r2));
    let e1 = expected_reward(m.tau(), r1);
    let e2 = expected_reward(m.tau(), r2);
    Ok(e1.iter().zip(e2.iter()).all(|(a, b)| (a - b).abs() <= tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShapingScope {
    All,
    Reachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapingDecomposition {
    pub phi: Vec<f64>,
    /// The common potential on initial states, when there is one.
    pub k: Option<f64>,
    /// Out-of-scope transitions where `r2` is not explained by `phi`.
    pub masked: Vec<(usize, usize, usize)>,
}

/// Finds `Φ` with `r2 - r1 = γΦ(s') - Φ(s)` on the scoped transitions.
pub fn decompose_shaping(
    m: &Mdp,
    r1: &Array3<f64>,
    r2: &Array3<f64>,
    scope: ShapingScope,
) -> Result<Option<ShapingDecomposition>> {
    check_shape(m, r1)?;
    check_shape(m, r2)?;
    let tol = default_tol(m, r1, r2);
    let (ns, na) = (m.n_states(), m.n_actions());
    let g = m.gamma();
    let reach = reachability(m, None);
    let in_scope = |s, a, t| match scope {
        ShapingScope::All => true,
        ShapingScope::Reachable => reach.is_reachable_transition(s, a, t),
    };
    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for s in 0..ns {
        for a in 0..na {
            for t in 0..ns {
                if in_scope(s, a, t) {
                    rows.push((vec![(s, -1.0), (t, g)], r2[[s, a, t]] - r1[[s, a, t]]));
                }
            }
        }
    }
    for s in m.terminal_states() {
        rows.push((vec![(s, 1.0)], 0.0));
    }
    let mut a_mat = DMatrix::<f64>::zeros(rows.len().max(1), ns);
    let mut b = DVector::<f64>::zeros(rows.len().max(1));
    for (i, (coeffs, rhs)) in rows.iter().enumerate() {
        for &(j, c) in coeffs {
            a_mat[(i, j)] += c;
        }
        b[i] = *rhs;
    }
    let svd = a_mat.clone().svd(true, true);
    let phi = svd.solve(&b, 1e-12).map_err(|e| Error::Numerical(e.to_string()))?;
    let residual = (&a_mat * &phi - &b).amax();
    if residual > tol {
        return Ok(None);
    }
    let phi: Vec<f64> = phi.iter().copied().collect();
    let initial = m.initial_states();
    let k0 = phi[initial[0]];
    let k = initial.iter().all(|&s| (phi[s] - k0).abs() <= tol).then_some(k0);
    let mut masked = Vec::new();
    for s in 0..ns {
        for a in 0..na {
            for t in 0..ns {
                let explained = r1[[s, a, t]] + g * phi[t] - phi[s];
                if !in_scope(s, a, t) && (r2[[s, a, t]] - explained).abs() > tol {
                    masked.push((s, a, t));
                }
            }
        }
    }
    Ok(Some(ShapingDecomposition { phi, k, masked }))
}

/// Checks the optimality-preserving condition for `r2` with `Ψ = V*` of
/// `r2`: equality on `optimal[s]`, strict inequality elsewhere.
pub fn is_optimality_preserving(m: &Mdp, r2: &Array3<f64>, optimal: &[Vec<usize>]) -> Result<bool> {
    check_shape(m, r2)?;
    if optimal.len() != m.n_states() || optimal.iter().any(|o| o.is_empty()) {
        return Err(Error::Contract("optimal sets must be nonempty for every state".into()));
    }
    let m2 = m.with_reward(r2.clone())?;
    let psi = optimal_q(&m2, &SolverParams::default())?.v;
    let tol = TIE_TOL * (1.0 + m2.max_abs_reward());
    let rbar = m2.expected_reward();
    let tau = m.tau();
    for s in 0..m.n_states() {
        for a in 0..m.n_actions() {
            let next: f64 = m.successors(s, a).iter().map(|&t| tau[[s, a, t]] * psi[t]).sum();
            let slack = rbar[[s, a]] + m.gamma() * next - psi[s];
            let ok = if optimal[s].contains(&a) { slack.abs() <= tol } else { slack < -tol };
            if !ok {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// New dynamics and per-row target expected rewards under them. `l[s][a]`
/// is only meaningful where the two transition rows differ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferTarget {
    pub tau_prime: Vec<Vec<Vec<f64>>>,
    pub l: Vec<Vec<Option<f64>>>,
}

impl TransferTarget {
    pub fn new(tau_prime: &Array3<f64>, l: Vec<Vec<Option<f64>>>) -> Self {
        TransferTarget { tau_prime: nested(tau_prime), l }
    }
}

fn rows_equal(a: &Array3<f64>, b: &Array3<f64>, s: usize, act: usize) -> bool {
    (0..a.dim().2).all(|t| a[[s, act, t]] == b[[s, act, t]])
}

/// S'-redistribution of the MDP's reward under `tau` whose expected rewards
/// under `tau_prime` hit `l`. Each changed row is the smallest correction of
/// the original row satisfying both expectation constraints.
pub fn transfer_redistribution(m: &Mdp, target: &TransferTarget) -> Result<Array3<f64>> {
    let (ns, na) = (m.n_states(), m.n_actions());
    let tau_p = table3(&target.tau_prime, m)?;
    m.with_tau(tau_p.clone())?;
    if target.l.len() != ns || target.l.iter().any(|r| r.len() != na) {
        return Err(Error::Contract("target table must be |S|x|A|".into()));
    }
    let tau = m.tau();
    let mut out = m.reward().clone();
    for s in 0..ns {
        for a in 0..na {
            let Some(l) = target.l[s][a] else { continue };
            if !l.is_finite() {
                return Err(Error::Contract(format!("non-finite target at ({s},{a})")));
            }
            if rows_equal(tau, &tau_p, s, a) {
                return Err(Error::Contract(format!("target given for ({s},{a}) but its transition row is unchanged")));
            }
            let p: Vec<f64> = (0..ns).map(|t| tau[[s, a, t]]).collect();
            let q: Vec<f64> = (0..ns).map(|t| tau_p[[s, a, t]]).collect();
            let r: Vec<f64> = (0..ns).map(|t| out[[s, a, t]]).collect();
            let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
            // Residuals of the two constraints at the current row.
            let b0 = 0.0;
            let b1 = l - dot(&q, &r);
            let (pp, pq, qq) = (dot(&p, &p), dot(&p, &q), dot(&q, &q));
            let det = pp * qq - pq * pq;
            if det.abs() <= 1e-14 * pp * qq {
                return Err(Error::Numerical(format!("transition rows at ({s},{a}) are parallel")));
            }
            let y0 = (qq * b0 - pq * b1) / det;
            let y1 = (pp * b1 - pq * b0) / det;
            for t in 0..ns {
                out[[s, a, t]] = r[t] + y0 * p[t] + y1 * q[t];
            }
        }
    }
    Ok(out)
}

/// `E_{S'~tau(s,a)}[r(s,a,S')]`.
pub fn expected_under(tau: &Array3<f64>, r: &Array3<f64>) -> Array2<f64> {
    expected_reward(tau, r)
}
