//! Reproduction of the invariance directory: every (object, class) cell is
//! checked against its expected mark.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    check_invariance, search_counterexample, CheckConfig, InvarianceVerdict, MdpSource, SearchOutcome, VerdictStatus,
};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::objects::{ObjectKind, ObjectParams};
use crate::sampler::SamplerConfig;
use crate::transforms::{SampleMode, TransformClass};

const EXPECTED: &str = include_str!("../../data/directory_table.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mark {
    /// Invariant.
    Inv,
    /// Invariant as a special case of the listed invariances.
    InvSpecial,
    /// Not invariant in general.
    Not,
    /// Depends on the MDP.
    Mixed,
    /// Unresolved.
    Blank,
}

#[derive(Debug, Deserialize)]
struct ExpectedRow {
    kind: String,
    marks: Vec<Mark>,
}

#[derive(Debug, Deserialize)]
struct ExpectedTable {
    columns: Vec<String>,
    rows: Vec<ExpectedRow>,
}

/// Expected marks, rows in table order, columns in `TransformClass::ALL` order.
pub fn expected_marks() -> Vec<(ObjectKind, Vec<Mark>)> {
    let t: ExpectedTable = serde_json::from_str(EXPECTED).expect("embedded table parses");
    let cols: Vec<TransformClass> =
        t.columns.iter().map(|c| TransformClass::from_code(c).expect("known column")).collect();
    assert_eq!(cols, TransformClass::ALL.to_vec());
    t.rows.into_iter().map(|r| (ObjectKind::from_code(&r.kind).expect("known row"), r.marks)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TableConfig {
    pub seed: u64,
    pub trials: usize,
    pub budget: usize,
    pub magnitude: f64,
    pub sampler: SamplerConfig,
    pub params: ObjectParams,
    /// Restrict to these rows; all rows when empty.
    pub kinds: Vec<ObjectKind>,
    /// Restrict to these columns; all columns when empty.
    pub classes: Vec<TransformClass>,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig {
            seed: 0,
            trials: 100,
            budget: 200,
            magnitude: 1.0,
            sampler: SamplerConfig::default(),
            params: ObjectParams::default(),
            kinds: Vec::new(),
            classes: Vec::new(),
        }
    }
}

impl TableConfig {
    fn check_config(&self, source: MdpSource, mode: SampleMode) -> CheckConfig {
        CheckConfig {
            seed: self.seed,
            trials: self.trials,
            budget: self.budget,
            magnitude: self.magnitude,
            mode,
            params: self.params,
            source,
            ..CheckConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.budget == 0 {
            return Err(Error::Contract("trials and budget must be positive".into()));
        }
        if !(self.params.tol > 0.0) || !(self.magnitude > 0.0) {
            return Err(Error::Contract("tolerance and magnitude must be positive".into()));
        }
        self.params.solver.validate()?;
        self.sampler.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CellOutcome {
    Invariant {
        verdict: InvarianceVerdict,
    },
    Counterexample {
        verdict: InvarianceVerdict,
    },
    Witness {
        search: SearchOutcome,
    },
    Exhausted {
        search: SearchOutcome,
    },
    /// The MDP-dependent cell: a witness on one proof MDP and invariance on
    /// the other.
    Split {
        first: SearchOutcome,
        second: InvarianceVerdict,
    },
    Skipped {
        reason: String,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub kind: ObjectKind,
    pub class: TransformClass,
    pub expected: Mark,
    pub result: CellOutcome,
    pub matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub cells: Vec<CellReport>,
    pub diffs: usize,
}

impl TableReport {
    pub fn mismatches(&self) -> impl Iterator<Item = &CellReport> {
        self.cells.iter().filter(|c| !c.matches)
    }

    /// Compact grid of observed marks, one line per row.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut last = None;
        for c in &self.cells {
            if last != Some(c.kind) {
                if last.is_some() {
                    out.push('\n');
                }
                out.push_str(&format!("{:<28}", c.kind.code()));
                last = Some(c.kind);
            }
            let sym = match (&c.result, c.matches) {
                (CellOutcome::Skipped { .. }, _) => " .",
                (CellOutcome::Split { .. }, true) => "x/=",
                (_, false) => " !",
                (CellOutcome::Invariant { .. }, _) => match c.expected {
                    Mark::InvSpecial => " =*",
                    _ => " =",
                },
                _ => " x",
            };
            out.push_str(&format!("{sym:>4}"));
        }
        out.push('\n');
        out
    }
}

fn run_cell(kind: ObjectKind, class: TransformClass, expected: Mark, cfg: &TableConfig) -> CellReport {
    let random = MdpSource::Random(cfg.sampler.clone());
    let outcome = || -> Result<(CellOutcome, bool)> {
        Ok(match expected {
            Mark::Blank => (CellOutcome::Skipped { reason: "unresolved".into() }, true),
            Mark::Inv | Mark::InvSpecial => {
                let verdict = check_invariance(kind, class, &cfg.check_config(random, SampleMode::Strict))?;
                match verdict.status {
                    VerdictStatus::Invariant => (CellOutcome::Invariant { verdict }, true),
                    VerdictStatus::CounterexampleFound => (CellOutcome::Counterexample { verdict }, false),
                    VerdictStatus::Skipped => {
                        (CellOutcome::Skipped { reason: verdict.reason.unwrap_or_default() }, false)
                    }
                }
            }
            Mark::Not => {
                let search = search_counterexample(kind, class, &cfg.check_config(random, SampleMode::Strict))?;
                if search.witness.is_some() {
                    (CellOutcome::Witness { search }, true)
                } else {
                    (CellOutcome::Exhausted { search }, false)
                }
            }
            Mark::Mixed => {
                let first = search_counterexample(
                    kind,
                    class,
                    &cfg.check_config(MdpSource::fixed("two", &fixtures::m_two()), SampleMode::Strict),
                )?;
                let second = check_invariance(
                    kind,
                    class,
                    &cfg.check_config(MdpSource::fixed("zpmt", &fixtures::m_zpmt()), SampleMode::Member),
                )?;
                let ok = first.witness.is_some() && second.status == VerdictStatus::Invariant;
                (CellOutcome::Split { first, second }, ok)
            }
        })
    };
    let (result, matches) = outcome().unwrap_or_else(|e| (CellOutcome::Failed { error: e.to_string() }, false));
    CellReport { kind, class, expected, result, matches }
}

/// Runs every selected cell. Mismatches are reported, not raised.
pub fn reproduce_directory_table(cfg: &TableConfig) -> Result<TableReport> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for (kind, marks) in expected_marks() {
        if !cfg.kinds.is_empty() && !cfg.kinds.contains(&kind) {
            continue;
        }
        for (class, mark) in TransformClass::ALL.into_iter().zip(marks) {
            if cfg.classes.is_empty() || cfg.classes.contains(&class) {
                jobs.push((kind, class, mark));
            }
        }
    }
    let cells: Vec<CellReport> = jobs.par_iter().map(|&(k, c, m)| run_cell(k, c, m, cfg)).collect();
    let diffs = cells.iter().filter(|c| !c.matches).count();
    Ok(TableReport { cells, diffs })
}
