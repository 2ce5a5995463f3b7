//! Subcommand definitions and their implementations.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array3;
use ril_core::invariance::order::RefinementPool;
use ril_core::invariance::{
    check_invariance, hasse_edges, refinement_compare, reproduce_directory_table, search_counterexample, MdpSource,
};
use ril_core::solvers::{
    boltzmann_rational_policy, maximally_supportive_optimal_policy, mce_policy, optimal_action_sets, optimal_q,
    policy_q, policy_value, soft_q,
};
use ril_core::transforms::{
    expected_under, sample_transform, transfer_redistribution, transform_mdp, SampleMode, TransferTarget,
};
use ril_core::{Mdp, MdpFile, ObjectKind, Policy, TransformClass, TransformSpec};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::report::{InputDigest, RunReport, Timings};
use crate::{exit, Failure};

#[derive(Debug, Parser)]
#[command(name = "ril", version, about = "Reward identifiability experiments on finite MDPs")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Experiment config (JSON). Flags below override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Relative comparison tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Member,
    Strict,
}

impl From<ModeArg> for SampleMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Member => SampleMode::Member,
            ModeArg::Strict => SampleMode::Strict,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Value tables, policies and initial-state values of an MDP.
    Solve {
        mdp: PathBuf,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Apply a transformation, given as JSON or sampled from a class.
    Transform {
        mdp: PathBuf,
        /// Class code to sample from (Id, Z0, Zk, PS, SR, LS, ZP, OA, OS, IM, UM).
        #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
        class: Option<String>,
        /// Transformation spec file.
        #[arg(long, value_name = "FILE")]
        spec: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "strict")]
        mode: ModeArg,
    },
    /// Check whether one object is invariant to one transformation class.
    Check {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        class: String,
        /// Use this MDP for every trial instead of random ones.
        #[arg(long, value_name = "FILE")]
        mdp: Option<PathBuf>,
        /// Search for a counterexample within the budget instead.
        #[arg(long)]
        search: bool,
        #[arg(long, value_enum, default_value = "strict")]
        mode: ModeArg,
    },
    /// Reproduce the invariance directory and diff it against the expected marks.
    Table,
    /// Refinement order between objects as a Hasse diagram.
    Order {
        /// Comma-separated object roster.
        #[arg(long, value_delimiter = ',')]
        kinds: Vec<String>,
    },
    /// Redistribute a reward so expected rewards hit targets under new dynamics.
    TransferDemo {
        mdp: PathBuf,
        /// New transition tensor, `[s][a][s']`.
        tau_prime: PathBuf,
        /// Target expected rewards `[s][a]`, null where unchanged.
        targets: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve { .. } => "solve",
            Command::Transform { .. } => "transform",
            Command::Check { .. } => "check",
            Command::Table => "table",
            Command::Order { .. } => "order",
            Command::TransferDemo { .. } => "transfer-demo",
        }
    }
}

/// A finished run, not yet written anywhere.
#[derive(Debug, Clone)]
pub struct Executed {
    pub report: RunReport,
    /// Extra files for the output directory.
    pub artifacts: Vec<(String, String)>,
    /// Human-readable summary for stderr.
    pub summary: String,
    pub code: u8,
}

impl Executed {
    pub fn emit(&self) -> Result<(), Failure> {
        if !self.summary.is_empty() {
            eprint!("{}", self.summary);
        }
        match &self.report.config.out {
            Some(dir) => self.report.write_to(dir, &self.artifacts),
            None => {
                print!("{}", self.report.to_json());
                Ok(())
            }
        }
    }
}

struct Inputs(Vec<InputDigest>);

impl Inputs {
    fn read(&mut self, path: &Path) -> Result<Vec<u8>, Failure> {
        let bytes = fs::read(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        self.0.push(InputDigest::of(path, &bytes));
        Ok(bytes)
    }

    fn json<T: DeserializeOwned>(&mut self, path: &Path) -> Result<T, Failure> {
        let bytes = self.read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
    }

    fn mdp(&mut self, path: &Path) -> Result<Mdp, Failure> {
        let bytes = self.read(path)?;
        let text = String::from_utf8(bytes).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        Ok(Mdp::from_file(MdpFile::from_json(&text)?)?)
    }
}

fn load_config(global: &GlobalArgs, inputs: &mut Inputs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &global.config {
        Some(path) => inputs.json(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = global.trials {
        cfg.trials = trials;
    }
    if let Some(tol) = global.tol {
        cfg.tol = tol;
    }
    if let Some(out) = &global.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn kind_arg(code: &str) -> Result<ObjectKind, Failure> {
    ObjectKind::from_code(code).ok_or_else(|| Failure::input(format!("unknown object kind `{code}`")))
}

fn class_arg(code: &str) -> Result<TransformClass, Failure> {
    TransformClass::from_code(code).ok_or_else(|| Failure::input(format!("unknown transformation class `{code}`")))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("verdicts serialize")
}

/// Runs the parsed command on the current rayon pool.
pub fn execute(cli: &Cli) -> Result<Executed, Failure> {
    let started = Instant::now();
    let mut inputs = Inputs(Vec::new());
    let mut cfg = load_config(&cli.global, &mut inputs)?;
    let mut artifacts = Vec::new();
    let mut summary = String::new();
    let mut code = exit::SUCCESS;
    let verdict = match &cli.command {
        Command::Solve { mdp, beta, epsilon, max_iters } => {
            if let Some(b) = beta {
                cfg.solver.beta = *b;
            }
            if let Some(e) = epsilon {
                cfg.solver.epsilon = *e;
            }
            if let Some(n) = max_iters {
                cfg.solver.max_iters = *n;
            }
            cfg.validate()?;
            let m = inputs.mdp(mdp)?;
            solve(&m, &cfg)?
        }
        Command::Transform { mdp, class, spec, mode } => {
            cfg.validate()?;
            let m = inputs.mdp(mdp)?;
            let spec: TransformSpec = match (spec, class) {
                (Some(path), _) => inputs.json(path)?,
                (None, Some(code)) => sample_transform(class_arg(code)?, &m, cfg.seed, cfg.magnitude, (*mode).into())?,
                (None, None) => return Err(Failure::input("either --class or --spec is required")),
            };
            let out = transform_mdp(&m, &spec)?.to_file();
            artifacts.push(("transformed.json".to_string(), out.to_json()));
            json!({ "spec": spec, "mdp": out })
        }
        Command::Check { kind, class, mdp, search, mode } => {
            cfg.validate()?;
            let (kind, class) = (kind_arg(kind)?, class_arg(class)?);
            let source = match mdp {
                Some(path) => {
                    let m = inputs.mdp(path)?;
                    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    MdpSource::fixed(&name, &m)
                }
                None => MdpSource::Random(cfg.sampler.clone()),
            };
            let check = cfg.check_config((*mode).into(), source);
            if *search {
                let outcome = search_counterexample(kind, class, &check)?;
                summary = format!(
                    "{kind} under {class}: {}\n",
                    if outcome.witness.is_some() { "witness found" } else { "no witness within budget" }
                );
                to_value(&outcome)
            } else {
                let verdict = check_invariance(kind, class, &check)?;
                summary = format!("{kind} under {class}: {:?}\n", verdict.status);
                to_value(&verdict)
            }
        }
        Command::Table => {
            cfg.validate()?;
            let report = reproduce_directory_table(&cfg.table_config())?;
            summary = format!("{}{} diff(s)\n", report.render(), report.diffs);
            for c in report.mismatches() {
                summary.push_str(&format!("  {} / {}: expected {:?}\n", c.kind, c.class, c.expected));
            }
            if report.diffs > 0 {
                code = exit::DIFF;
            }
            to_value(&report)
        }
        Command::Order { kinds } => {
            if !kinds.is_empty() {
                cfg.kinds = kinds.iter().map(|k| kind_arg(k)).collect::<Result<_, _>>()?;
            }
            cfg.validate()?;
            order(&cfg, &mut artifacts, &mut summary)?
        }
        Command::TransferDemo { mdp, tau_prime, targets } => {
            cfg.validate()?;
            let m = inputs.mdp(mdp)?;
            let tau_p: Vec<Vec<Vec<f64>>> = inputs.json(tau_prime)?;
            let l: Vec<Vec<Option<f64>>> = inputs.json(targets)?;
            let (verdict, ok) = transfer_demo(&m, TransferTarget { tau_prime: tau_p, l })?;
            if !ok {
                return Err(Failure::numerical("redistributed reward misses an expectation identity"));
            }
            verdict
        }
    };
    let report = RunReport {
        tool: "ril",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name(),
        config: cfg,
        inputs: inputs.0,
        verdict,
        timings: Timings { wall_seconds: started.elapsed().as_secs_f64() },
    };
    Ok(Executed { report, artifacts, summary, code })
}

fn solve(m: &Mdp, cfg: &ExperimentConfig) -> Result<Value, Failure> {
    let p = &cfg.solver;
    let uniform = Policy::uniform(m.n_states(), m.n_actions());
    let q_pi = policy_q(m, &uniform)?;
    let q_star = optimal_q(m, p)?;
    let q_soft = soft_q(m, p)?;
    let boltzmann = boltzmann_rational_policy(m, p)?;
    let mce = mce_policy(m, p)?;
    let supportive = maximally_supportive_optimal_policy(m, p)?;
    let boltzmann_base = Policy::softmax(&q_pi.adv, p.beta);
    let mut j = serde_json::Map::new();
    for (name, pi) in [
        ("uniform", &uniform),
        ("boltzmann", &boltzmann),
        ("mce", &mce),
        ("supportive_optimal", &supportive),
        ("boltzmann_base", &boltzmann_base),
    ] {
        j.insert(name.to_string(), json!(policy_value(m, pi)?));
    }
    Ok(json!({
        "states": m.state_names(),
        "actions": m.action_names(),
        "q_uniform": q_pi,
        "q_star": q_star,
        "q_soft": q_soft,
        "optimal_actions": optimal_action_sets(m, p)?,
        "policies": {
            "uniform": uniform,
            "boltzmann": boltzmann,
            "mce": mce,
            "supportive_optimal": supportive,
            "boltzmann_base": boltzmann_base,
        },
        "j": j,
    }))
}

fn order(
    cfg: &ExperimentConfig,
    artifacts: &mut Vec<(String, String)>,
    summary: &mut String,
) -> Result<Value, Failure> {
    let pool = RefinementPool::build(&cfg.order_config())?;
    let diagram = hasse_edges(&pool)?;
    let dot = diagram.to_dot();
    let mut incomparable = Vec::new();
    for &(a, b) in &diagram.incomparable {
        let v = refinement_compare(diagram.groups[a][0], diagram.groups[b][0], &pool)?;
        incomparable.push(json!({
            "a": diagram.groups[a],
            "b": diagram.groups[b],
            "witness_a_not_b": v.witness_a_not_b,
            "witness_b_not_a": v.witness_b_not_a,
        }));
    }
    for (from, to) in diagram.named_edges() {
        let names = |g: &[ObjectKind]| g.iter().map(|k| k.code()).collect::<Vec<_>>().join(" = ");
        summary.push_str(&format!("{} -> {}\n", names(&from), names(&to)));
    }
    artifacts.push(("hasse.dot".to_string(), dot.clone()));
    Ok(json!({
        "kinds": pool.kinds,
        "records": pool.records.len(),
        "groups": diagram.groups,
        "edges": diagram.named_edges(),
        "incomparable": incomparable,
        "dot": dot,
    }))
}

fn max_abs(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(0.0, |m, x| m.max(x.abs()))
}

/// Returns the report and whether both expectation identities hold.
fn transfer_demo(m: &Mdp, target: TransferTarget) -> Result<(Value, bool), Failure> {
    let r2 = transfer_redistribution(m, &target)?;
    let (ns, na) = (m.n_states(), m.n_actions());
    let tau_p = Array3::from_shape_fn((ns, na, ns), |(s, a, t)| target.tau_prime[s][a][t]);
    let before = expected_under(m.tau(), m.reward());
    let after = expected_under(m.tau(), &r2);
    let under_new = expected_under(&tau_p, &r2);
    let tau_err = max_abs((&after - &before).iter().copied());
    let l_err = max_abs(
        (0..ns)
            .flat_map(|s| (0..na).map(move |a| (s, a)))
            .filter_map(|(s, a)| target.l[s][a].map(|l| under_new[[s, a]] - l)),
    );
    let tol = 1e-10 * (1.0 + m.max_abs_reward().max(max_abs(r2.iter().copied())));
    let ok = tau_err <= tol && l_err <= tol;

    let moved = m.with_tau(tau_p)?;
    let params = ril_core::SolverParams::default();
    let opt_r1 = optimal_action_sets(&moved, &params)?;
    let opt_r2 = optimal_action_sets(&moved.with_reward(r2.clone())?, &params)?;
    let flipped: Vec<usize> = (0..ns).filter(|&s| opt_r1[s] != opt_r2[s]).collect();
    let rows = |t: &ndarray::Array2<f64>| t.outer_iter().map(|r| r.to_vec()).collect::<Vec<_>>();
    Ok((
        json!({
            "r2": r2.outer_iter().map(|s| rows(&s.to_owned())).collect::<Vec<_>>(),
            "checks": {
                "tolerance": tol,
                "max_error_original_dynamics": tau_err,
                "max_error_targets": l_err,
                "expected_original": rows(&before),
                "expected_redistributed": rows(&after),
                "expected_new_dynamics": rows(&under_new),
                "pass": ok,
            },
            "optimal_actions_r1": opt_r1,
            "optimal_actions_r2": opt_r2,
            "flipped_states": flipped,
            "flipped": !flipped.is_empty(),
        }),
        ok,
    ))
}
