//! Ambiguity refinement between objects and its Hasse diagram.
//!
//! Object A refines B when every transformation preserving A also
//! preserves B. A pool of sampled transformations, drawn from every class
//! on random and hand-built MDPs, supplies the evidence: one record that
//! preserves A but changes B shows that A does not refine B.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_trial, CheckConfig, MdpSource, Witness};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::objects::{ObjectKind, ObjectParams};
use crate::rng::derive_seed;
use crate::sampler::SamplerConfig;
use crate::transforms::{SampleMode, TransformClass};

/// The objects placed in the refinement order by default.
pub const DEFAULT_ROSTER: [ObjectKind; 18] = [
    ObjectKind::Reward,
    ObjectKind::ReturnFragments,
    ObjectKind::BoltzmannCmpFragments,
    ObjectKind::QPolicy,
    ObjectKind::QStar,
    ObjectKind::QSoft,
    ObjectKind::ReturnTrajectories,
    ObjectKind::BoltzmannCmpTrajectories,
    ObjectKind::NoiselessCmpFragments,
    ObjectKind::BoltzmannPolicy,
    ObjectKind::MCEPolicy,
    ObjectKind::LotteryOrder,
    ObjectKind::SupportiveOptimalPolicy,
    ObjectKind::OptimalPolicySet,
    ObjectKind::TrajDistBoltzmann,
    ObjectKind::TrajDistMCE,
    ObjectKind::NoiselessCmpTrajectories,
    ObjectKind::TrajDistOptimal,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrderConfig {
    pub seed: u64,
    pub kinds: Vec<ObjectKind>,
    /// Random-MDP samples per transformation class.
    pub trials_per_class: usize,
    /// Samples per (hand-built MDP, class).
    pub special_trials: usize,
    pub sampler: SamplerConfig,
    pub params: ObjectParams,
}

impl Default for OrderConfig {
    fn default() -> Self {
        OrderConfig {
            seed: 0,
            kinds: DEFAULT_ROSTER.to_vec(),
            trials_per_class: 60,
            special_trials: 20,
            sampler: SamplerConfig::default(),
            params: ObjectParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRecord {
    /// `"random"` or the name of a hand-built MDP.
    pub source: String,
    pub witness: Witness,
    /// Per roster kind: the transformation left the object unchanged.
    pub preserved: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementPool {
    pub kinds: Vec<ObjectKind>,
    pub records: Vec<PoolRecord>,
}

impl RefinementPool {
    pub fn build(cfg: &OrderConfig) -> Result<Self> {
        if cfg.kinds.is_empty() {
            return Err(Error::Contract("refinement roster is empty".into()));
        }
        let classes: Vec<TransformClass> =
            TransformClass::ALL.into_iter().filter(|&c| c != TransformClass::Identity).collect();
        let random = CheckConfig {
            seed: cfg.seed,
            params: cfg.params,
            mode: SampleMode::Strict,
            source: MdpSource::Random(cfg.sampler.clone()),
            ..CheckConfig::default()
        };
        let mut jobs: Vec<(String, CheckConfig, TransformClass, u64)> = Vec::new();
        for &class in &classes {
            for t in 0..cfg.trials_per_class as u64 {
                jobs.push(("random".into(), random.clone(), class, t));
            }
        }
        for (i, (name, m)) in fixtures::all().into_iter().enumerate() {
            let special = CheckConfig {
                seed: derive_seed(cfg.seed, &[0xf1, i as u64]),
                max_attempts: 1,
                mode: SampleMode::Member,
                source: MdpSource::fixed(name, &m),
                ..random.clone()
            };
            for &class in &classes {
                for t in 0..cfg.special_trials as u64 {
                    jobs.push((name.to_string(), special.clone(), class, t));
                }
            }
        }
        let results: Vec<Result<Option<PoolRecord>>> = jobs
            .par_iter()
            .map(|(source, check, class, t)| {
                Ok(run_trial(*class, &cfg.kinds, check, *t)?.map(|s| PoolRecord {
                    source: source.clone(),
                    preserved: s.diffs.iter().map(|d| d.is_none()).collect(),
                    witness: Witness {
                        class: *class,
                        trial: *t,
                        attempt: s.attempt,
                        mdp: s.mdp.to_file(),
                        transform: s.spec,
                        diff: None,
                    },
                }))
            })
            .collect();
        let mut records = Vec::new();
        for r in results {
            records.extend(r?);
        }
        Ok(RefinementPool { kinds: cfg.kinds.clone(), records })
    }

    fn index(&self, kind: ObjectKind) -> Result<usize> {
        self.kinds
            .iter()
            .position(|&k| k == kind)
            .ok_or_else(|| Error::Contract(format!("{kind} is not in the refinement roster")))
    }

    /// First record preserving `a` but changing `b`.
    pub fn separating(&self, a: ObjectKind, b: ObjectKind) -> Result<Option<&PoolRecord>> {
        let (ia, ib) = (self.index(a)?, self.index(b)?);
        Ok(self.records.iter().find(|r| r.preserved[ia] && !r.preserved[ib]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    /// `a ⪯ b`: everything preserving `a` preserves `b`, not conversely.
    ARefinesB,
    BRefinesA,
    Equivalent,
    Incomparable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementVerdict {
    pub a: ObjectKind,
    pub b: ObjectKind,
    pub relation: Relation,
    /// Preserves `a`, changes `b`.
    pub witness_a_not_b: Option<Witness>,
    /// Preserves `b`, changes `a`.
    pub witness_b_not_a: Option<Witness>,
}

pub fn refinement_compare(a: ObjectKind, b: ObjectKind, pool: &RefinementPool) -> Result<RefinementVerdict> {
    let ab = pool.separating(a, b)?.map(|r| r.witness.clone());
    let ba = pool.separating(b, a)?.map(|r| r.witness.clone());
    let relation = match (&ab, &ba) {
        (None, None) => Relation::Equivalent,
        (None, Some(_)) => Relation::ARefinesB,
        (Some(_), None) => Relation::BRefinesA,
        (Some(_), Some(_)) => Relation::Incomparable,
    };
    Ok(RefinementVerdict { a, b, relation, witness_a_not_b: ab, witness_b_not_a: ba })
}

/// Equivalence groups and the transitively reduced strict order between
/// them. `edges` holds `(from, to)` group indices with `from` refining `to`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HasseDiagram {
    pub groups: Vec<Vec<ObjectKind>>,
    pub edges: Vec<(usize, usize)>,
    /// Pairs of groups with neither refining the other.
    pub incomparable: Vec<(usize, usize)>,
}

pub fn hasse_edges(pool: &RefinementPool) -> Result<HasseDiagram> {
    let n = pool.kinds.len();
    let mut refines = vec![vec![true; n]; n];
    for r in &pool.records {
        for i in 0..n {
            if !r.preserved[i] {
                continue;
            }
            for j in 0..n {
                if !r.preserved[j] {
                    refines[i][j] = false;
                }
            }
        }
    }
    let mut group_of = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if group_of[i] != usize::MAX {
            continue;
        }
        let g = groups.len();
        let members: Vec<usize> = (i..n).filter(|&j| refines[i][j] && refines[j][i]).collect();
        for &j in &members {
            group_of[j] = g;
        }
        groups.push(members);
    }
    let k = groups.len();
    let rep = |g: usize| groups[g][0];
    let strict: Vec<Vec<bool>> = (0..k).map(|a| (0..k).map(|b| a != b && refines[rep(a)][rep(b)]).collect()).collect();
    for a in 0..k {
        for b in 0..k {
            if strict[a][b] && strict[b][a] {
                return Err(Error::Numerical("refinement relation has a cycle between groups".into()));
            }
        }
    }
    let mut edges = Vec::new();
    let mut incomparable = Vec::new();
    for a in 0..k {
        for b in 0..k {
            if strict[a][b] && !(0..k).any(|c| strict[a][c] && strict[c][b]) {
                edges.push((a, b));
            }
            if a < b && !strict[a][b] && !strict[b][a] {
                incomparable.push((a, b));
            }
        }
    }
    Ok(HasseDiagram {
        groups: groups.into_iter().map(|g| g.into_iter().map(|i| pool.kinds[i]).collect()).collect(),
        edges,
        incomparable,
    })
}

impl HasseDiagram {
    /// Edges as pairs of kind lists.
    pub fn named_edges(&self) -> Vec<(Vec<ObjectKind>, Vec<ObjectKind>)> {
        self.edges.iter().map(|&(a, b)| (self.groups[a].clone(), self.groups[b].clone())).collect()
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph refinement {\n  rankdir=TB;\n  node [shape=box];\n");
        for (i, g) in self.groups.iter().enumerate() {
            let label: Vec<&str> = g.iter().map(|k| k.symbol()).collect();
            let _ = writeln!(out, "  n{i} [label=\"{}\"];", label.join(", "));
        }
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "  n{a} -> n{b};");
        }
        out.push_str("}\n");
        out
    }
}
