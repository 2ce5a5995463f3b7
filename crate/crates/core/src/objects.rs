//! Reward-derived objects and their comparable fingerprints.
//!
//! A fingerprint is a finite encoding of one object, chosen so that two
//! rewards on the same dynamics give equal fingerprints exactly when they
//! give the same object (at the stated resolution).

use std::fmt;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{
    covering_lassos, enumerate_fragments_capped, enumerate_lassos, fragment_return, lasso_return, reachability,
    Fragment, Lasso, Mdp, DEFAULT_ENUMERATION_CAP,
};
use crate::solvers::{action_sets_from_adv, optimal_q, policy_q, soft_q, Policy, SolverParams, ValueTables, TIE_TOL};

/// Relative tie tolerance for noiseless comparisons. Kept near rounding
/// level: the threshold moves with the reward scale, and any real gap
/// between the two thresholds of a pair of rewards reads as a rank change.
pub const NOISELESS_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectKind {
    Reward,
    /// Q-function of the uniform policy.
    QPolicy,
    QStar,
    QSoft,
    BoltzmannPolicy,
    MCEPolicy,
    SupportiveOptimalPolicy,
    TrajDistBoltzmann,
    TrajDistMCE,
    TrajDistOptimal,
    ReturnFragments,
    ReturnTrajectories,
    BoltzmannCmpFragments,
    BoltzmannCmpTrajectories,
    NoiselessCmpFragments,
    NoiselessCmpTrajectories,
    LotteryOrder,
    OptimalPolicySet,
    /// Advantage of the uniform policy.
    AdvantagePolicy,
    AdvantageStar,
    /// Softmax of `β A^π` for the uniform policy `π`.
    BoltzmannBasePolicy,
    TrajDistBoltzmannBase,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 22] = [
        ObjectKind::Reward,
        ObjectKind::QPolicy,
        ObjectKind::QStar,
        ObjectKind::QSoft,
        ObjectKind::BoltzmannPolicy,
        ObjectKind::MCEPolicy,
        ObjectKind::SupportiveOptimalPolicy,
        ObjectKind::TrajDistBoltzmann,
        ObjectKind::TrajDistMCE,
        ObjectKind::TrajDistOptimal,
        ObjectKind::ReturnFragments,
        ObjectKind::ReturnTrajectories,
        ObjectKind::BoltzmannCmpFragments,
        ObjectKind::BoltzmannCmpTrajectories,
        ObjectKind::NoiselessCmpFragments,
        ObjectKind::NoiselessCmpTrajectories,
        ObjectKind::LotteryOrder,
        ObjectKind::OptimalPolicySet,
        ObjectKind::AdvantagePolicy,
        ObjectKind::AdvantageStar,
        ObjectKind::BoltzmannBasePolicy,
        ObjectKind::TrajDistBoltzmannBase,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ObjectKind::Reward => "reward",
            ObjectKind::QPolicy => "q_pi",
            ObjectKind::QStar => "q_star",
            ObjectKind::QSoft => "q_soft",
            ObjectKind::BoltzmannPolicy => "pi_boltzmann",
            ObjectKind::MCEPolicy => "pi_mce",
            ObjectKind::SupportiveOptimalPolicy => "pi_star",
            ObjectKind::TrajDistBoltzmann => "traj_boltzmann",
            ObjectKind::TrajDistMCE => "traj_mce",
            ObjectKind::TrajDistOptimal => "traj_star",
            ObjectKind::ReturnFragments => "return_fragments",
            ObjectKind::ReturnTrajectories => "return_trajectories",
            ObjectKind::BoltzmannCmpFragments => "cmp_boltzmann_fragments",
            ObjectKind::BoltzmannCmpTrajectories => "cmp_boltzmann_trajectories",
            ObjectKind::NoiselessCmpFragments => "cmp_noiseless_fragments",
            ObjectKind::NoiselessCmpTrajectories => "cmp_noiseless_trajectories",
            ObjectKind::LotteryOrder => "lottery_order",
            ObjectKind::OptimalPolicySet => "optimal_policy_set",
            ObjectKind::AdvantagePolicy => "adv_pi",
            ObjectKind::AdvantageStar => "adv_star",
            ObjectKind::BoltzmannBasePolicy => "pi_boltzmann_base",
            ObjectKind::TrajDistBoltzmannBase => "traj_boltzmann_base",
        }
    }

    /// Conventional mathematical symbol.
    pub fn symbol(self) -> &'static str {
        match self {
            ObjectKind::Reward => "R",
            ObjectKind::QPolicy => "Q^π",
            ObjectKind::QStar => "Q*",
            ObjectKind::QSoft => "Q^H_β",
            ObjectKind::BoltzmannPolicy => "π*_β",
            ObjectKind::MCEPolicy => "π^H_β",
            ObjectKind::SupportiveOptimalPolicy => "π*",
            ObjectKind::TrajDistBoltzmann => "Δ*_β",
            ObjectKind::TrajDistMCE => "Δ^H_β",
            ObjectKind::TrajDistOptimal => "Δ*",
            ObjectKind::ReturnFragments => "G_ζ",
            ObjectKind::ReturnTrajectories => "G_ξ",
            ObjectKind::BoltzmannCmpFragments => "⪯_β^ζ",
            ObjectKind::BoltzmannCmpTrajectories => "⪯_β^ξ",
            ObjectKind::NoiselessCmpFragments => "⪯_*^ζ",
            ObjectKind::NoiselessCmpTrajectories => "⪯_*^ξ",
            ObjectKind::LotteryOrder => "⪯_D",
            ObjectKind::OptimalPolicySet => "{π*}",
            ObjectKind::AdvantagePolicy => "A^π",
            ObjectKind::AdvantageStar => "A*",
            ObjectKind::BoltzmannBasePolicy => "π_β^π0",
            ObjectKind::TrajDistBoltzmannBase => "Δ_β^π0",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }

    pub fn uses_fragments(self) -> bool {
        matches!(
            self,
            ObjectKind::ReturnFragments | ObjectKind::BoltzmannCmpFragments | ObjectKind::NoiselessCmpFragments
        )
    }

    pub fn uses_lassos(self) -> bool {
        matches!(
            self,
            ObjectKind::ReturnTrajectories
                | ObjectKind::BoltzmannCmpTrajectories
                | ObjectKind::NoiselessCmpTrajectories
                | ObjectKind::LotteryOrder
        )
    }
}

impl Serialize for ObjectKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for ObjectKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let code = String::deserialize(d)?;
        ObjectKind::from_code(&code).ok_or_else(|| serde::de::Error::custom(format!("unknown object kind `{code}`")))
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Finite resolution at which trajectory-based objects are observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Resolution {
    /// Maximum fragment length `L`.
    pub fragment_len: usize,
    /// Maximum lasso prefix length `P`.
    pub prefix_cap: usize,
    /// Maximum lasso cycle length `C`.
    pub cycle_cap: usize,
    /// Also include one lasso through every reachable transition.
    pub covering: bool,
    pub enumeration_cap: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution {
            fragment_len: 3,
            prefix_cap: 3,
            cycle_cap: 3,
            covering: true,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectParams {
    pub solver: SolverParams,
    pub resolution: Resolution,
    /// Relative comparison tolerance.
    pub tol: f64,
}

impl Default for ObjectParams {
    fn default() -> Self {
        ObjectParams { solver: SolverParams::default(), resolution: Resolution::default(), tol: 1e-8 }
    }
}

impl ObjectParams {
    pub fn beta(&self) -> f64 {
        self.solver.beta
    }
}

/// Canonical encoding: exact discrete part plus a tolerance-compared real part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub discrete: Vec<u32>,
    pub real: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectFingerprint {
    pub kind: ObjectKind,
    pub resolution: Resolution,
    pub tolerance: f64,
    pub payload: Payload,
}

/// Where two fingerprints first disagree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayloadDiff {
    /// `"discrete"`, `"real"`, `"length"` or `"affine"`.
    pub part: String,
    pub index: usize,
    pub magnitude: f64,
}

impl ObjectFingerprint {
    /// `None` when the two fingerprints describe the same object.
    pub fn diff(&self, other: &ObjectFingerprint) -> Result<Option<PayloadDiff>> {
        if self.kind != other.kind || self.resolution != other.resolution {
            return Err(Error::Contract(format!(
                "cannot compare fingerprints of {} and {} at different settings",
                self.kind, other.kind
            )));
        }
        let (a, b) = (&self.payload, &other.payload);
        if a.discrete.len() != b.discrete.len() || a.real.len() != b.real.len() {
            let d = (a.discrete.len() + a.real.len()).abs_diff(b.discrete.len() + b.real.len());
            return Ok(Some(PayloadDiff { part: "length".into(), index: 0, magnitude: d as f64 }));
        }
        if let Some(i) = (0..a.discrete.len()).find(|&i| a.discrete[i] != b.discrete[i]) {
            let magnitude = (a.discrete[i] as f64 - b.discrete[i] as f64).abs();
            return Ok(Some(PayloadDiff { part: "discrete".into(), index: i, magnitude }));
        }
        if self.kind == ObjectKind::LotteryOrder {
            return Ok(affine_diff(&a.real, &b.real, self.tolerance));
        }
        let scale = 1.0 + a.real.iter().chain(&b.real).fold(0.0_f64, |m, x| m.max(x.abs()));
        let bound = self.tolerance * scale;
        let worst = a.real.iter().zip(&b.real).enumerate().map(|(i, (x, y))| (i, (x - y).abs())).fold(
            None,
            |best: Option<(usize, f64)>, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            },
        );
        Ok(match worst {
            Some((i, d)) if !(d <= bound) => Some(PayloadDiff { part: "real".into(), index: i, magnitude: d }),
            _ => None,
        })
    }

    pub fn matches(&self, other: &ObjectFingerprint) -> Result<bool> {
        Ok(self.diff(other)?.is_none())
    }
}

/// Tests `b = c·a + k` with `c > 0` by least squares.
fn affine_diff(a: &[f64], b: &[f64], tol: f64) -> Option<PayloadDiff> {
    let n = a.len();
    if n == 0 {
        return None;
    }
    let range =
        |x: &[f64]| x.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) - x.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let scale_a = 1.0 + a.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let scale_b = 1.0 + b.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let (ra, rb) = (range(a), range(b));
    let flat_a = ra <= tol * scale_a;
    let flat_b = rb <= tol * scale_b;
    if flat_a || flat_b {
        return if flat_a == flat_b {
            None
        } else {
            Some(PayloadDiff { part: "affine".into(), index: 0, magnitude: if flat_a { rb } else { ra } })
        };
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let sab: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let saa: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let c = sab / saa;
    if c <= 0.0 {
        return Some(PayloadDiff { part: "affine".into(), index: 0, magnitude: c.abs() });
    }
    let k = mb - c * ma;
    let (i, worst) = a
        .iter()
        .zip(b)
        .map(|(x, y)| (y - (c * x + k)).abs())
        .enumerate()
        .fold((0, 0.0_f64), |(bi, bd), (i, d)| if d > bd { (i, d) } else { (bi, bd) });
    (worst > tol * scale_b).then(|| PayloadDiff { part: "affine".into(), index: i, magnitude: worst })
}

/// Fragments and lassos observed at a resolution. They depend only on the
/// dynamics, so one set serves every reward on the same MDP.
#[derive(Debug, Clone, Default)]
pub struct Items {
    pub fragments: Option<Vec<Fragment>>,
    pub lassos: Option<Vec<Lasso>>,
}

impl Items {
    pub fn for_kinds(m: &Mdp, kinds: &[ObjectKind], res: &Resolution) -> Result<Items> {
        let mut items = Items::default();
        if kinds.iter().any(|k| k.uses_fragments()) {
            items.fragments = Some(fragment_library(m, res)?);
        }
        if kinds.iter().any(|k| k.uses_lassos()) {
            items.lassos = Some(lasso_library(m, res)?);
        }
        Ok(items)
    }
}

/// Possible fragments up to length `L`, any start.
pub fn fragment_library(m: &Mdp, res: &Resolution) -> Result<Vec<Fragment>> {
    enumerate_fragments_capped(m, res.fragment_len, true, false, res.enumeration_cap)
}

/// Possible initial lassos within the caps, followed by covering lassos
/// not already present.
pub fn lasso_library(m: &Mdp, res: &Resolution) -> Result<Vec<Lasso>> {
    let mut lassos = enumerate_lassos(m, res.prefix_cap, res.cycle_cap, res.enumeration_cap)?;
    if res.covering {
        let known: std::collections::HashSet<Lasso> = lassos.iter().cloned().collect();
        let mut extra: Vec<Lasso> = covering_lassos(m).into_iter().filter(|x| !known.contains(x)).collect();
        extra.sort();
        extra.dedup();
        lassos.extend(extra);
        if lassos.len() > res.enumeration_cap {
            return Err(Error::EnumerationCap { cap: res.enumeration_cap });
        }
    }
    Ok(lassos)
}

/// Computes fingerprints of several kinds for one MDP, sharing solves.
pub struct Evaluator<'a> {
    m: &'a Mdp,
    params: &'a ObjectParams,
    items: &'a Items,
    optimal: Option<ValueTables>,
    soft: Option<ValueTables>,
    uniform: Option<ValueTables>,
}

impl<'a> Evaluator<'a> {
    pub fn new(m: &'a Mdp, params: &'a ObjectParams, items: &'a Items) -> Self {
        Evaluator { m, params, items, optimal: None, soft: None, uniform: None }
    }

    fn optimal(&mut self) -> Result<&ValueTables> {
        if self.optimal.is_none() {
            self.optimal = Some(optimal_q(self.m, &self.params.solver)?);
        }
        Ok(self.optimal.as_ref().unwrap())
    }

    fn soft(&mut self) -> Result<&ValueTables> {
        if self.soft.is_none() {
            self.soft = Some(soft_q(self.m, &self.params.solver)?);
        }
        Ok(self.soft.as_ref().unwrap())
    }

    fn uniform(&mut self) -> Result<&ValueTables> {
        if self.uniform.is_none() {
            let pi = Policy::uniform(self.m.n_states(), self.m.n_actions());
            self.uniform = Some(policy_q(self.m, &pi)?);
        }
        Ok(self.uniform.as_ref().unwrap())
    }

    fn optimal_sets(&mut self) -> Result<Vec<Vec<usize>>> {
        let tol = TIE_TOL * (1.0 + self.m.max_abs_reward());
        Ok(action_sets_from_adv(&self.optimal()?.adv, tol))
    }

    fn fragments(&self) -> Result<&[Fragment]> {
        self.items.fragments.as_deref().ok_or_else(|| Error::Contract("fragment library was not built".into()))
    }

    fn lassos(&self) -> Result<&[Lasso]> {
        self.items.lassos.as_deref().ok_or_else(|| Error::Contract("lasso library was not built".into()))
    }

    fn fragment_returns(&self) -> Result<Vec<f64>> {
        Ok(self.fragments()?.iter().map(|z| fragment_return(self.m, z)).collect())
    }

    fn lasso_returns(&self) -> Result<Vec<f64>> {
        Ok(self.lassos()?.iter().map(|x| lasso_return(self.m, x)).collect())
    }

    fn traj_dist(&self, pi: &Policy) -> Payload {
        let reach = reachability(self.m, None);
        let mut discrete = Vec::new();
        let mut real = self.m.mu0().to_vec();
        for s in 0..self.m.n_states() {
            let r = reach.is_reachable(s);
            discrete.push(r as u32);
            if r {
                real.extend(pi.probs().row(s).iter());
            }
        }
        Payload { discrete, real }
    }

    pub fn fingerprint(&mut self, kind: ObjectKind) -> Result<ObjectFingerprint> {
        let beta = self.params.beta();
        let payload = match kind {
            ObjectKind::Reward => real(self.m.reward().iter().copied().collect()),
            ObjectKind::QPolicy => real(flat(&self.uniform()?.q)),
            ObjectKind::QStar => real(flat(&self.optimal()?.q)),
            ObjectKind::QSoft => real(flat(&self.soft()?.q)),
            ObjectKind::AdvantagePolicy => real(flat(&self.uniform()?.adv)),
            ObjectKind::AdvantageStar => real(flat(&self.optimal()?.adv)),
            ObjectKind::BoltzmannPolicy => real(flat(Policy::softmax(&self.optimal()?.adv, beta).probs())),
            ObjectKind::MCEPolicy => real(flat(Policy::softmax(&self.soft()?.q, beta).probs())),
            ObjectKind::BoltzmannBasePolicy => real(flat(Policy::softmax(&self.uniform()?.adv, beta).probs())),
            ObjectKind::SupportiveOptimalPolicy | ObjectKind::OptimalPolicySet => {
                Payload { discrete: self.optimal_sets()?.iter().map(|o| bitset(o)).collect(), real: vec![] }
            }
            ObjectKind::TrajDistBoltzmann => {
                let pi = Policy::softmax(&self.optimal()?.adv, beta);
                self.traj_dist(&pi)
            }
            ObjectKind::TrajDistMCE => {
                let pi = Policy::softmax(&self.soft()?.q, beta);
                self.traj_dist(&pi)
            }
            ObjectKind::TrajDistBoltzmannBase => {
                let pi = Policy::softmax(&self.uniform()?.adv, beta);
                self.traj_dist(&pi)
            }
            ObjectKind::TrajDistOptimal => {
                // The policy is uniform over the optimal sets, so on the
                // supported states the sets themselves are the encoding.
                let sets = self.optimal_sets()?;
                let pi = Policy::uniform_over(&sets, self.m.n_actions());
                let supported = reachability(self.m, Some(&pi)).supported_states.unwrap();
                let mut discrete = vec![0; self.m.n_states()];
                for &s in &supported {
                    discrete[s] = 1;
                }
                discrete.extend(supported.iter().map(|&s| bitset(&sets[s])));
                Payload { discrete, real: self.m.mu0().to_vec() }
            }
            ObjectKind::ReturnFragments => real(self.fragment_returns()?),
            ObjectKind::ReturnTrajectories | ObjectKind::LotteryOrder => real(self.lasso_returns()?),
            ObjectKind::BoltzmannCmpFragments => real(relative(self.fragment_returns()?)),
            ObjectKind::BoltzmannCmpTrajectories => real(relative(self.lasso_returns()?)),
            ObjectKind::NoiselessCmpFragments => {
                Payload { discrete: ranks(&self.fragment_returns()?, self.tie_tol()), real: vec![] }
            }
            ObjectKind::NoiselessCmpTrajectories => {
                Payload { discrete: ranks(&self.lasso_returns()?, self.tie_tol()), real: vec![] }
            }
        };
        Ok(ObjectFingerprint { kind, resolution: self.params.resolution, tolerance: self.params.tol, payload })
    }

    fn tie_tol(&self) -> f64 {
        NOISELESS_TIE_TOL * (1.0 + self.m.max_abs_reward())
    }
}

fn real(real: Vec<f64>) -> Payload {
    Payload { discrete: vec![], real }
}

fn flat(t: &Array2<f64>) -> Vec<f64> {
    t.iter().copied().collect()
}

fn bitset(set: &[usize]) -> u32 {
    set.iter().fold(0, |b, &a| b | (1 << a))
}

/// Returns relative to the first item; the Boltzmann comparison matrix
/// `σ(β(G_j - G_i))` is a function of these differences alone.
fn relative(g: Vec<f64>) -> Vec<f64> {
    let base = g.first().copied().unwrap_or(0.0);
    g.into_iter().map(|x| x - base).collect()
}

/// Dense ranks of `g`, merging values within `tol` of their group's lowest
/// member. Equal ranks are exactly the ties of the noiseless order.
pub fn ranks(g: &[f64], tol: f64) -> Vec<u32> {
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&i, &j| g[i].total_cmp(&g[j]).then(i.cmp(&j)));
    let mut out = vec![0; g.len()];
    let mut rank = 0;
    let mut group_start = f64::NEG_INFINITY;
    for (n, &i) in order.iter().enumerate() {
        if n == 0 {
            group_start = g[i];
        } else if g[i] > group_start + tol {
            rank += 1;
            group_start = g[i];
        }
        out[i] = rank;
    }
    out
}

/// Fingerprint of a single kind.
pub fn fingerprint(m: &Mdp, kind: ObjectKind, params: &ObjectParams) -> Result<ObjectFingerprint> {
    let items = Items::for_kinds(m, &[kind], &params.resolution)?;
    Evaluator::new(m, params, &items).fingerprint(kind)
}

/// An observable item: a fragment or an infinite (lasso) trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Item {
    Fragment(Fragment),
    Lasso(Lasso),
}

impl Item {
    pub fn ret(&self, m: &Mdp) -> f64 {
        match self {
            Item::Fragment(z) => fragment_return(m, z),
            Item::Lasso(x) => lasso_return(m, x),
        }
    }

    fn check(&self, m: &Mdp) -> Result<()> {
        match self {
            Item::Fragment(z) => {
                crate::mdp::check_fragment(m, z)?;
                if !z.is_possible(m) {
                    return Err(Error::Contract("comparison of an impossible fragment".into()));
                }
            }
            Item::Lasso(x) => {
                crate::mdp::check_fragment(m, &x.prefix)?;
                crate::mdp::check_fragment(m, &x.cycle)?;
                if !x.is_possible(m) || !x.is_initial(m) {
                    return Err(Error::Contract("trajectory comparisons need possible, initial trajectories".into()));
                }
            }
        }
        Ok(())
    }
}

/// `1 / (1 + exp(-x))` without overflow.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `P(item1 ⪯ item2) = σ(β (G(item2) - G(item1)))`.
pub fn boltzmann_comparison_prob(m: &Mdp, beta: f64, item1: &Item, item2: &Item) -> Result<f64> {
    item1.check(m)?;
    item2.check(m)?;
    Ok(logistic(beta * (item2.ret(m) - item1.ret(m))))
}

/// `(item1 ⪯ item2, item2 ⪯ item1)` under exact returns with tie tolerance.
pub fn noiseless_compare(m: &Mdp, item1: &Item, item2: &Item) -> Result<(bool, bool)> {
    item1.check(m)?;
    item2.check(m)?;
    let tol = NOISELESS_TIE_TOL * (1.0 + m.max_abs_reward());
    let (g1, g2) = (item1.ret(m), item2.ret(m));
    Ok((g1 <= g2 + tol, g2 <= g1 + tol))
}

/// A finite distribution over possible initial lassos.
pub type Lottery = [(f64, Lasso)];

pub fn expected_return(m: &Mdp, d: &Lottery) -> Result<f64> {
    let total: f64 = d.iter().map(|(p, _)| p).sum();
    if (total - 1.0).abs() > 1e-9 || d.iter().any(|(p, _)| !(*p >= 0.0)) {
        return Err(Error::Contract(format!("lottery weights sum to {total}")));
    }
    let mut e = 0.0;
    for (p, x) in d {
        Item::Lasso(x.clone()).check(m)?;
        e += p * lasso_return(m, x);
    }
    Ok(e)
}

/// `(D1 ⪯ D2, D2 ⪯ D1)` by expected return.
pub fn lottery_compare(m: &Mdp, d1: &Lottery, d2: &Lottery) -> Result<(bool, bool)> {
    let tol = NOISELESS_TIE_TOL * (1.0 + m.max_abs_reward());
    let (e1, e2) = (expected_return(m, d1)?, expected_return(m, d2)?);
    Ok((e1 <= e2 + tol, e2 <= e1 + tol))
}

/// Dense pairwise comparison model over an item list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonModel {
    pub items: Vec<Item>,
    /// Row-major `n x n`; `matrix[i * n + j]` is `P(i ⪯ j)` or `1.0`/`0.0`
    /// for the noiseless relation.
    pub matrix: Vec<f64>,
}

impl ComparisonModel {
    pub fn boltzmann(m: &Mdp, beta: f64, items: Vec<Item>) -> Result<Self> {
        let g = returns_checked(m, &items)?;
        let matrix = pairs(&g, |gi, gj| logistic(beta * (gj - gi)));
        Ok(ComparisonModel { items, matrix })
    }

    pub fn noiseless(m: &Mdp, items: Vec<Item>) -> Result<Self> {
        let g = returns_checked(m, &items)?;
        let tol = NOISELESS_TIE_TOL * (1.0 + m.max_abs_reward());
        let matrix = pairs(&g, |gi, gj| if gi <= gj + tol { 1.0 } else { 0.0 });
        Ok(ComparisonModel { items, matrix })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.items.len() + j]
    }
}

fn returns_checked(m: &Mdp, items: &[Item]) -> Result<Vec<f64>> {
    items.iter().map(|x| x.check(m).map(|_| x.ret(m))).collect()
}

fn pairs(g: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    g.iter().flat_map(|&gi| g.iter().map(move |&gj| (gi, gj))).map(|(a, b)| f(a, b)).collect()
}

/// Inverts Boltzmann comparisons between each state and its one-step
/// fragments: `R(s,a,s') = (1/β) log(p / (1 - p))` with
/// `p = P((s) ⪯ (s,a,s'))`. Impossible transitions stay `None`.
pub fn recover_reward_from_comparisons(
    oracle: impl Fn(&Fragment, &Fragment) -> f64,
    beta: f64,
    m: &Mdp,
) -> Result<Array3<Option<f64>>> {
    let (ns, na) = (m.n_states(), m.n_actions());
    let mut out = Array3::from_elem((ns, na, ns), None);
    for s in 0..ns {
        for a in 0..na {
            for &t in m.successors(s, a) {
                let p = oracle(&Fragment::state(s), &Fragment::new(s, vec![(a, t)]));
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::Contract(format!("comparison probability {p} outside (0, 1)")));
                }
                out[[s, a, t]] = Some((p / (1.0 - p)).ln() / beta);
            }
        }
    }
    Ok(out)
}
