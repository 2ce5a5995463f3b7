//! Empirical invariance checks, counterexample search and ambiguity
//! refinement between reward-derived objects.
//!
//! Every trial owns a seed derived from `(seed, class, trial, attempt)`, so
//! verdicts do not depend on the thread count.

pub mod order;
pub mod table;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Mdp, MdpFile};
use crate::objects::{Evaluator, Items, ObjectKind, ObjectParams, PayloadDiff};
use crate::rng::rng_for;
use crate::sampler::SamplerConfig;
use crate::transforms::{sample_transform_with, transform_mdp, SampleMode, TransformClass, TransformSpec};

pub use order::{hasse_edges, refinement_compare, HasseDiagram, RefinementPool, RefinementVerdict, Relation};
pub use table::{reproduce_directory_table, Mark, TableConfig, TableReport};

/// Where trial MDPs come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdpSource {
    Random(SamplerConfig),
    Fixed { name: String, mdp: MdpFile },
}

impl MdpSource {
    pub fn fixed(name: &str, m: &Mdp) -> Self {
        MdpSource::Fixed { name: name.to_string(), mdp: m.to_file() }
    }

    fn draw(&self, seed: u64, path: &[u64]) -> Result<Mdp> {
        match self {
            MdpSource::Random(cfg) => cfg.sample(seed, path),
            MdpSource::Fixed { mdp, .. } => Mdp::from_file(mdp.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub seed: u64,
    pub trials: usize,
    /// Trials a counterexample search may spend.
    pub budget: usize,
    /// MDP redraws per trial when the class has no member to sample.
    pub max_attempts: usize,
    pub magnitude: f64,
    pub mode: SampleMode,
    pub params: ObjectParams,
    pub source: MdpSource,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            seed: 0,
            trials: 100,
            budget: 200,
            max_attempts: 50,
            magnitude: 1.0,
            mode: SampleMode::Strict,
            params: ObjectParams::default(),
            source: MdpSource::Random(SamplerConfig::default()),
        }
    }
}

/// A transformation that changes an object, with everything needed to
/// replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub class: TransformClass,
    pub trial: u64,
    pub attempt: u64,
    pub mdp: MdpFile,
    pub transform: TransformSpec,
    /// First payload difference for the kind the witness was found for.
    pub diff: Option<PayloadDiff>,
}

impl Witness {
    /// Recomputes the payload differences for `kinds`.
    pub fn replay(&self, kinds: &[ObjectKind], params: &ObjectParams) -> Result<Vec<Option<PayloadDiff>>> {
        let m = Mdp::from_file(self.mdp.clone())?;
        evaluate(&m, &self.transform, kinds, params)
    }
}

/// Payload differences between `m` and `m` with `spec` applied.
pub fn evaluate(
    m: &Mdp,
    spec: &TransformSpec,
    kinds: &[ObjectKind],
    params: &ObjectParams,
) -> Result<Vec<Option<PayloadDiff>>> {
    let m2 = transform_mdp(m, spec)?;
    let items = Items::for_kinds(m, kinds, &params.resolution)?;
    let mut before = Evaluator::new(m, params, &items);
    let mut after = Evaluator::new(&m2, params, &items);
    kinds.iter().map(|&k| before.fingerprint(k)?.diff(&after.fingerprint(k)?)).collect()
}

/// One sampled (MDP, transformation) pair with per-kind differences.
#[derive(Debug, Clone)]
pub(crate) struct Sample {
    pub attempt: u64,
    pub mdp: Mdp,
    pub spec: TransformSpec,
    pub diffs: Vec<Option<PayloadDiff>>,
}

/// Draws MDPs until the class can be sampled on one, then evaluates.
/// `Ok(None)` when every attempt was unsupported.
pub(crate) fn run_trial(
    class: TransformClass,
    kinds: &[ObjectKind],
    cfg: &CheckConfig,
    trial: u64,
) -> Result<Option<Sample>> {
    let c = class.index() as u64;
    for attempt in 0..cfg.max_attempts as u64 {
        let m = cfg.source.draw(cfg.seed, &[c, trial, attempt])?;
        let mut rng = rng_for(cfg.seed, &[c, trial, attempt, 1]);
        let spec = match sample_transform_with(class, &m, &mut rng, cfg.magnitude, cfg.mode) {
            Ok(spec) => spec,
            Err(Error::Unsupported(_)) => continue,
            Err(e) => return Err(e),
        };
        match evaluate(&m, &spec, kinds, &cfg.params) {
            Ok(diffs) => return Ok(Some(Sample { attempt, mdp: m, spec, diffs })),
            Err(Error::EnumerationCap { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictStatus {
    Invariant,
    CounterexampleFound,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceVerdict {
    pub kind: ObjectKind,
    pub class: TransformClass,
    /// Trials that produced a sample.
    pub trials_run: usize,
    /// Trials where no MDP admitted a member of the class.
    pub unsupported: usize,
    pub status: VerdictStatus,
    pub witness: Option<Witness>,
    pub reason: Option<String>,
}

fn witness(class: TransformClass, trial: u64, s: Sample, diff: Option<PayloadDiff>) -> Witness {
    Witness { class, trial, attempt: s.attempt, mdp: s.mdp.to_file(), transform: s.spec, diff }
}

/// Samples `cfg.trials` members of `class` and reports the first (lowest
/// trial index) that changes the object.
pub fn check_invariance(kind: ObjectKind, class: TransformClass, cfg: &CheckConfig) -> Result<InvarianceVerdict> {
    let results: Vec<Result<Option<Sample>>> =
        (0..cfg.trials as u64).into_par_iter().map(|t| run_trial(class, &[kind], cfg, t)).collect();
    let mut trials_run = 0;
    let mut unsupported = 0;
    let mut found = None;
    for (t, r) in results.into_iter().enumerate() {
        match r? {
            None => unsupported += 1,
            Some(mut s) => {
                trials_run += 1;
                if found.is_none() {
                    if let Some(d) = s.diffs.pop().flatten() {
                        found = Some(witness(class, t as u64, s, Some(d)));
                    }
                }
            }
        }
    }
    let (status, reason) = match (&found, trials_run) {
        (Some(_), _) => (VerdictStatus::CounterexampleFound, None),
        (None, 0) => (VerdictStatus::Skipped, Some(format!("no sampled MDP admits a strict member of {class}"))),
        (None, _) => (VerdictStatus::Invariant, None),
    };
    Ok(InvarianceVerdict { kind, class, trials_run, unsupported, status, witness: found, reason })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub witness: Option<Witness>,
    /// Trials examined before stopping.
    pub attempts: usize,
    pub unsupported: usize,
}

const SEARCH_CHUNK: u64 = 32;

/// Searches up to `cfg.budget` trials for a member of `class` that changes
/// the object. Trials are run in fixed-size chunks and the lowest-index
/// witness wins, so the result is independent of scheduling.
pub fn search_counterexample(kind: ObjectKind, class: TransformClass, cfg: &CheckConfig) -> Result<SearchOutcome> {
    let budget = cfg.budget as u64;
    let mut unsupported = 0;
    let mut start = 0;
    while start < budget {
        let end = (start + SEARCH_CHUNK).min(budget);
        let results: Vec<Result<Option<Sample>>> =
            (start..end).into_par_iter().map(|t| run_trial(class, &[kind], cfg, t)).collect();
        for (t, r) in (start..end).zip(results) {
            match r? {
                None => unsupported += 1,
                Some(mut s) => {
                    if let Some(d) = s.diffs.pop().flatten() {
                        return Ok(SearchOutcome {
                            witness: Some(witness(class, t, s, Some(d))),
                            attempts: (t + 1) as usize,
                            unsupported,
                        });
                    }
                }
            }
        }
        start = end;
    }
    Ok(SearchOutcome { witness: None, attempts: budget as usize, unsupported })
}

/// Outcome of checking that a paired object is strictly less ambiguous than
/// either part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplementaryVerdict {
    pub a: ObjectKind,
    pub b: ObjectKind,
    /// The witness preserving `a` but changing `b` also changes the pair.
    pub strict_below_a: bool,
    /// The witness preserving `b` but changing `a` also changes the pair.
    pub strict_below_b: bool,
}

/// Given two incomparable objects, confirms the joint object `(a, b)`
/// refines each strictly: the witnesses separating them change the pair.
pub fn complementary_ambiguity_check(
    verdict: &RefinementVerdict,
    params: &ObjectParams,
) -> Result<ComplementaryVerdict> {
    if verdict.relation != Relation::Incomparable {
        return Err(Error::Contract(format!(
            "{} and {} are not incomparable ({:?})",
            verdict.a, verdict.b, verdict.relation
        )));
    }
    let kinds = [verdict.a, verdict.b];
    let joint_changed = |w: &Witness| -> Result<bool> { Ok(w.replay(&kinds, params)?.iter().any(|d| d.is_some())) };
    let wa = verdict.witness_a_not_b.as_ref().expect("incomparable verdicts carry witnesses");
    let wb = verdict.witness_b_not_a.as_ref().expect("incomparable verdicts carry witnesses");
    Ok(ComplementaryVerdict {
        a: verdict.a,
        b: verdict.b,
        strict_below_a: joint_changed(wa)?,
        strict_below_b: joint_changed(wb)?,
    })
}
