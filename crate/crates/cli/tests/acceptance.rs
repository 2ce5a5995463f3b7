//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};

use common::*;
use ndarray::Array3;
use rand::Rng;
use ril_core::invariance::order::OrderConfig;
use ril_core::invariance::{evaluate, refinement_compare, RefinementPool, Relation, Witness};
use ril_core::mdp::{fragment_return, lasso_return, reachability, Fragment};
use ril_core::objects::{boltzmann_comparison_prob, recover_reward_from_comparisons, Item};
use ril_core::solvers::{optimal_action_sets, optimal_q, policy_q, policy_q_iterative, soft_q};
use ril_core::transforms::{
    decompose_shaping, expected_under, sample_transform, transfer_redistribution, SampleMode, ShapingScope,
};
use ril_core::ObjectKind::{self, *};
use ril_core::{fixtures, Mdp, ObjectParams, SolverParams, TransformClass, TransformSpec};
use serde_json::Value;
use tempfile::TempDir;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ril(args: &[&str], threads: &str) -> Result<Vec<u8>, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_ril"))
        .args(args)
        .env("RIL_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    match o.status.code() {
        Some(0) => Ok(o.stdout),
        c => Err(format!("ril {} exited {c:?}: {}", args.join(" "), String::from_utf8_lossy(&o.stderr))),
    }
}

fn read(p: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()))
}

fn table_run(dir: &Path, threads: &str) -> Result<Vec<u8>, String> {
    let out = dir.join(format!("table-{threads}"));
    ril(&["table", "--seed", "0", "--out", out.to_str().unwrap()], threads)?;
    read(&out.join("verdict.json"))
}

fn table(dir: &Path) -> Outcome {
    let v: Value = serde_json::from_slice(&table_run(dir, "4")?).map_err(|e| e.to_string())?;
    let cells = v["cells"].as_array().ok_or("no cells")?;
    let bad: Vec<String> =
        cells.iter().filter(|c| c["matches"] != true).map(|c| format!("{}/{}", c["kind"], c["class"])).collect();
    ensure(v["diffs"] == 0 && bad.is_empty(), || format!("diffs: {bad:?}"))?;
    let skipped = cells.iter().filter(|c| c["result"]["outcome"] == "skipped").count();
    Ok(format!("{} cells, 0 diffs, {skipped} skipped", cells.len()))
}

const INSTANCES: usize = 500;

/// Runs `check` on random MDPs until `INSTANCES` applicable ones pass.
/// `check` returns `Ok(false)` for an MDP the statement does not apply to.
fn instances(tag: u64, check: impl Fn(u64, &Mdp) -> Result<bool, String>) -> Result<usize, String> {
    let mut done = 0;
    let mut seed = tag << 32;
    while done < INSTANCES {
        let m = random_mdp(seed);
        if check(seed, &m).map_err(|e| format!("seed {seed}: {e}"))? {
            done += 1;
        }
        seed += 1;
        ensure(seed - (tag << 32) < 20 * INSTANCES as u64, || "too few applicable MDPs".into())?;
    }
    Ok(done)
}

fn within(got: f64, want: f64, tol: f64, what: &str) -> Result<(), String> {
    ensure((got - want).abs() <= tol, || format!("{what}: {got} vs {want} (tol {tol:e})"))
}

fn shaping_identities() -> Outcome {
    let phi_scale = |phi: &[f64]| 2.0 * max_abs(phi.iter().copied());
    let setup = |seed: u64, m: &Mdp, tag: u64, k: Option<f64>| {
        let mut r = rng(seed, tag);
        let phi = random_phi(m, &mut r, k);
        let m2 = m.with_reward(shaped(m, &phi)).unwrap();
        let tol = 1e-8 * value_scale(m, phi_scale(&phi));
        (r, phi, m2, tol)
    };
    let params = SolverParams::default();
    let value_tables = |m: &Mdp, m2: &Mdp, r: &mut _| {
        let pi = random_policy(m, r);
        (
            policy_q(m, &pi).unwrap(),
            policy_q(m2, &pi).unwrap(),
            optimal_q(m, &params).unwrap(),
            optimal_q(m2, &params).unwrap(),
        )
    };
    let mut lines = Vec::new();
    let mut run = |name: &str, tag: u64, check: &dyn Fn(u64, &Mdp) -> Result<bool, String>| -> Result<(), String> {
        let n = instances(tag, check).map_err(|e| format!("{name}: {e}"))?;
        lines.push(format!("{name} {n}"));
        Ok(())
    };

    run("fragments", 1, &|seed, m| {
        let (mut r, phi, m2, tol) = setup(seed, m, 1, None);
        let n = r.random_range(0..8);
        let z = random_walk(m, r.random_range(0..m.n_states()), n, &mut r);
        let want = direct_return(m, &z) + m.gamma().powi(n as i32) * phi[z.end()] - phi[z.start];
        within(fragment_return(&m2, &z), want, tol, "G'(ζ)")?;
        Ok(true)
    })?;
    run("trajectories", 2, &|seed, m| {
        let (mut r, phi, m2, tol) = setup(seed, m, 2, None);
        let x = random_lasso(m, r.random_range(0..m.n_states()), &mut r);
        within(lasso_return(&m2, &x), unrolled_return(m, &x) - phi[x.start()], tol, "G'(ξ)")?;
        Ok(true)
    })?;
    run("q", 3, &|seed, m| {
        let (mut r, phi, m2, tol) = setup(seed, m, 3, None);
        let (a, b, c, d) = value_tables(m, &m2, &mut r);
        for (t1, t2) in [(a, b), (c, d)] {
            for ((s, act), q) in t1.q.indexed_iter() {
                within(t2.q[[s, act]], q - phi[s], tol, "Q'")?;
            }
        }
        Ok(true)
    })?;
    run("v", 4, &|seed, m| {
        let (mut r, phi, m2, tol) = setup(seed, m, 4, None);
        let (a, b, c, d) = value_tables(m, &m2, &mut r);
        for (t1, t2) in [(a, b), (c, d)] {
            for s in 0..m.n_states() {
                within(t2.v[s], t1.v[s] - phi[s], tol, "V'")?;
            }
        }
        Ok(true)
    })?;
    run("j", 5, &|seed, m| {
        let (mut r, phi, m2, tol) = setup(seed, m, 5, None);
        let start: f64 = (0..m.n_states()).map(|s| m.mu0()[s] * phi[s]).sum();
        let (a, b, c, d) = value_tables(m, &m2, &mut r);
        for (t1, t2) in [(a, b), (c, d)] {
            within(t2.j.unwrap(), t1.j.unwrap() - start, tol, "J'")?;
        }
        Ok(true)
    })?;
    run("advantage", 6, &|seed, m| {
        let (mut r, _, m2, tol) = setup(seed, m, 6, None);
        let (a, b, c, d) = value_tables(m, &m2, &mut r);
        for (t1, t2) in [(a, b), (c, d)] {
            for ((s, act), x) in t1.adv.indexed_iter() {
                within(t2.adv[[s, act]], *x, tol, "A'")?;
            }
        }
        Ok(true)
    })?;
    run("soft_q", 7, &|seed, m| {
        let (mut r, phi, m2, tol) = setup(seed, m, 7, None);
        let p = SolverParams::with_beta(r.random_range(0.2..5.0));
        let (h1, h2) = (soft_q(m, &p).unwrap(), soft_q(&m2, &p).unwrap());
        for ((s, a), q) in h1.q.indexed_iter() {
            within(h2.q[[s, a]], q - phi[s], tol, "soft Q'")?;
        }
        Ok(true)
    })?;
    run("k_shift", 8, &|seed, m| {
        if m.initial_states().iter().any(|&s| m.is_terminal(s)) {
            return Ok(false);
        }
        let mut r = rng(seed, 8);
        let k = r.random_range(-3.0..3.0);
        let phi = random_phi(m, &mut r, Some(k));
        let mut r2 = shaped(m, &phi);
        mask_unreachable(m, &mut r2, &mut r);
        let m2 = m.with_reward(r2.clone()).unwrap();
        let tol = 1e-8 * value_scale(m, phi_scale(&phi) + 5.0);
        for _ in 0..8 {
            let x = random_lasso(m, initial_state(m, &mut r), &mut r);
            within(lasso_return(&m2, &x), unrolled_return(m, &x) - k, tol, "G'(ξ) - G(ξ)")?;
        }
        let d = decompose_shaping(m, m.reward(), &r2, ShapingScope::Reachable)
            .map_err(|e| e.to_string())?
            .ok_or("no potential found for a shaped reward")?;
        within(d.k.ok_or("no common initial potential")?, k, tol, "recovered k")?;
        Ok(true)
    })?;
    run("c_scale", 9, &|seed, m| {
        let mut r = rng(seed, 9);
        let c = r.random_range(0.2..5.0);
        let phi = random_phi(m, &mut r, Some(0.0));
        let mut r2 = shaped(m, &phi) * c;
        mask_unreachable(m, &mut r2, &mut r);
        let m2 = m.with_reward(r2.clone()).unwrap();
        let tol = 1e-8 * c * value_scale(m, phi_scale(&phi) + 5.0);
        for _ in 0..8 {
            let x = random_lasso(m, initial_state(m, &mut r), &mut r);
            within(lasso_return(&m2, &x), c * unrolled_return(m, &x), tol, "G'(ξ)/c")?;
        }
        let d = decompose_shaping(m, &(m.reward() * c), &r2, ShapingScope::Reachable)
            .map_err(|e| e.to_string())?
            .ok_or("no potential found for a shaped reward")?;
        within(d.k.unwrap_or(f64::NAN), 0.0, tol, "recovered k")?;
        Ok(true)
    })?;
    Ok(lines.join(", "))
}

fn mask_unreachable(m: &Mdp, r: &mut Array3<f64>, rng: &mut impl Rng) {
    let reach = reachability(m, None);
    for ((s, a, t), x) in r.indexed_iter_mut() {
        if !reach.is_reachable_transition(s, a, t) {
            *x = rng.random_range(-5.0..5.0);
        }
    }
}

fn transfer() -> Outcome {
    let m = fixtures::m_transfer();
    // E_tau[R2] = 1 and E_tau'[R2] = 5 on (s0, a): [[.5, .5], [.3, .7]] x = [1, 5].
    let (p, q, b) = ([0.5, 0.5], [0.3, 0.7], [1.0, 5.0]);
    let det = p[0] * q[1] - p[1] * q[0];
    let want = [(b[0] * q[1] - p[1] * b[1]) / det, (p[0] * b[1] - b[0] * q[0]) / det];
    let target = fixtures::m_transfer_target(5.0);
    let r2 = transfer_redistribution(&m, &target).map_err(|e| e.to_string())?;
    within(r2[[0, 0, 0]], want[0], 1e-9, "R2(s0,a,s0)")?;
    within(r2[[0, 0, 1]], want[1], 1e-9, "R2(s0,a,s1)")?;
    within(want[0], -9.0, 1e-12, "oracle")?;
    within(want[1], 11.0, 1e-12, "oracle")?;
    let tau_p =
        m.with_tau(ndarray::Array3::from_shape_fn(m.tau().dim(), |(s, a, t)| target.tau_prime[s][a][t])).unwrap();
    let (e1, e2) = (m.expected_reward(), expected_under(m.tau(), &r2));
    for ((s, a), x) in e1.indexed_iter() {
        within(e2[[s, a]], *x, 1e-10, "E_tau[R2]")?;
    }
    within(expected_under(tau_p.tau(), &r2)[[0, 0]], 5.0, 1e-10, "E_tau'[R2]")?;

    let adversarial = transfer_redistribution(&m, &fixtures::m_transfer_target(20.0)).map_err(|e| e.to_string())?;
    let params = SolverParams::default();
    let before = optimal_action_sets(&tau_p, &params).map_err(|e| e.to_string())?;
    let after =
        optimal_action_sets(&tau_p.with_reward(adversarial.clone()).unwrap(), &params).map_err(|e| e.to_string())?;
    let same = optimal_action_sets(&m.with_reward(adversarial).unwrap(), &params).map_err(|e| e.to_string())?;
    ensure(before[0] != after[0], || format!("L=20 keeps {:?} optimal under tau'", before[0]))?;
    ensure(same[0] == optimal_action_sets(&m, &params).unwrap()[0], || "optimal actions moved under tau".into())?;
    Ok(format!(
        "R2(s0,a,.) = ({:.12}, {:.12}); L=20 flips {:?} -> {:?}",
        r2[[0, 0, 0]],
        r2[[0, 0, 1]],
        before[0],
        after[0]
    ))
}

fn recovery() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let m = random_mdp(seed);
        let beta = [0.5, 1.0, 2.0][seed as usize % 3];
        let oracle = |a: &Fragment, b: &Fragment| {
            boltzmann_comparison_prob(&m, beta, &Item::Fragment(a.clone()), &Item::Fragment(b.clone())).unwrap()
        };
        let r = recover_reward_from_comparisons(oracle, beta, &m).map_err(|e| format!("seed {seed}: {e}"))?;
        for ((s, a, t), x) in r.indexed_iter() {
            match x {
                Some(x) => worst = worst.max((x - m.reward()[[s, a, t]]).abs()),
                None => ensure(!m.is_possible(s, a, t), || format!("seed {seed}: ({s},{a},{t}) not recovered"))?,
            }
        }
    }
    ensure(worst <= 1e-6, || format!("max error {worst:e}"))?;
    Ok(format!("100 MDPs, max error {worst:.2e}"))
}

/// Arrows of the derivation graph; `X -> Y` means Y can be computed from X.
fn derivation_arrows() -> (Vec<Vec<ObjectKind>>, Vec<(usize, usize)>) {
    let nodes = vec![
        vec![Reward],
        vec![ReturnFragments],
        vec![BoltzmannCmpFragments],
        vec![QPolicy, QStar, QSoft],
        vec![BoltzmannPolicy, MCEPolicy],
        vec![SupportiveOptimalPolicy],
        vec![OptimalPolicySet],
        vec![TrajDistBoltzmann, TrajDistMCE],
        vec![TrajDistOptimal],
        vec![ReturnTrajectories],
        vec![BoltzmannCmpTrajectories],
        vec![NoiselessCmpFragments],
        vec![LotteryOrder],
        vec![NoiselessCmpTrajectories],
    ];
    let arrows = vec![
        (0, 1),
        (3, 4),
        (4, 5),
        (5, 6),
        (6, 5),
        (4, 7),
        (5, 8),
        (7, 8),
        (1, 3),
        (1, 9),
        (1, 2),
        (2, 1),
        (9, 10),
        (2, 10),
        (2, 11),
        (10, 12),
        (12, 13),
        (12, 8),
        (10, 7),
        (11, 13),
    ];
    (nodes, arrows)
}

type Group = BTreeSet<String>;

fn derived_order() -> (BTreeSet<Group>, BTreeSet<(Group, Group)>) {
    let (nodes, arrows) = derivation_arrows();
    let n = nodes.len();
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(a, b) in &arrows {
        reach[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                reach[i][j] |= reach[i][k] && reach[k][j];
            }
        }
    }
    let group = |i: usize| -> Group {
        (0..n)
            .filter(|&j| reach[i][j] && reach[j][i])
            .flat_map(|j| nodes[j].iter().map(|k| k.code().to_string()))
            .collect()
    };
    let strict = |i: usize, j: usize| reach[i][j] && !reach[j][i];
    let mut edges = BTreeSet::new();
    for i in 0..n {
        for j in 0..n {
            if strict(i, j) && !(0..n).any(|k| strict(i, k) && strict(k, j)) {
                edges.insert((group(i), group(j)));
            }
        }
    }
    ((0..n).map(group).collect(), edges)
}

fn group_of(v: &Value) -> Group {
    v.as_array().into_iter().flatten().filter_map(|x| x.as_str().map(String::from)).collect()
}

fn hasse(dir: &Path) -> Outcome {
    let out = dir.join("order");
    ril(&["order", "--out", out.to_str().unwrap()], "4")?;
    let v: Value = serde_json::from_slice(&read(&out.join("verdict.json"))?).map_err(|e| e.to_string())?;
    let groups: BTreeSet<Group> = v["groups"].as_array().ok_or("no groups")?.iter().map(group_of).collect();
    let edges: BTreeSet<(Group, Group)> =
        v["edges"].as_array().ok_or("no edges")?.iter().map(|e| (group_of(&e[0]), group_of(&e[1]))).collect();
    let (want_groups, want_edges) = derived_order();
    ensure(groups == want_groups, || format!("groups differ: {groups:?}"))?;
    ensure(edges == want_edges, || {
        format!(
            "missing {:?}, extra {:?}",
            want_edges.difference(&edges).collect::<Vec<_>>(),
            edges.difference(&want_edges).collect::<Vec<_>>()
        )
    })?;

    let pool = RefinementPool::build(&OrderConfig { kinds: vec![QStar, ReturnTrajectories], ..OrderConfig::default() })
        .map_err(|e| e.to_string())?;
    let c = refinement_compare(QStar, ReturnTrajectories, &pool).map_err(|e| e.to_string())?;
    ensure(c.relation == Relation::Incomparable, || format!("Q* vs G_xi: {:?}", c.relation))?;
    let params = ObjectParams::default();
    let changed = |w: &Witness| -> Result<Vec<bool>, String> {
        let w: Witness = serde_json::from_str(&serde_json::to_string(w).unwrap()).map_err(|e| e.to_string())?;
        Ok(w.replay(&[QStar, ReturnTrajectories], &params)
            .map_err(|e| e.to_string())?
            .iter()
            .map(Option::is_some)
            .collect())
    };
    ensure(changed(c.witness_a_not_b.as_ref().ok_or("no witness")?)? == [false, true], || "Q*-keeping witness".into())?;
    ensure(changed(c.witness_b_not_a.as_ref().ok_or("no witness")?)? == [true, false], || {
        "G_xi-keeping witness".into()
    })?;
    Ok(format!("{} groups, {} edges; Q* vs G_xi incomparable, both witnesses replay", groups.len(), edges.len()))
}

fn zpmt_bound() -> Outcome {
    const SAMPLES: u64 = 60;
    let params = ObjectParams::default();
    let nonlinear = |spec: &TransformSpec| match spec {
        TransformSpec::ZeroPreservingMonotone { breakpoints } => {
            let s: Vec<f64> = breakpoints.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
            s.iter().any(|x| (x / s[0] - 1.0).abs() > 1e-3)
        }
        _ => false,
    };
    let two = fixtures::m_two();
    let z = fixtures::m_zpmt();
    for seed in 0..SAMPLES {
        let spec = sample_transform(TransformClass::ZeroPreservingMonotone, &two, seed, 1.0, SampleMode::Strict)
            .map_err(|e| e.to_string())?;
        ensure(nonlinear(&spec), || format!("seed {seed}: linear sample"))?;
        let d = evaluate(&two, &spec, &[NoiselessCmpFragments], &params).map_err(|e| e.to_string())?;
        ensure(d[0].is_some(), || format!("M_two seed {seed}: {spec:?} kept the fingerprint"))?;
        // every reward of M_zpmt is 0 or 1, so no sample there can be told apart from a linear one
        let spec = sample_transform(TransformClass::ZeroPreservingMonotone, &z, seed, 1.0, SampleMode::Member)
            .map_err(|e| e.to_string())?;
        let d = evaluate(&z, &spec, &[NoiselessCmpFragments], &params).map_err(|e| e.to_string())?;
        ensure(d[0].is_none(), || format!("M_zpmt seed {seed}: {spec:?} changed the fingerprint"))?;
    }
    Ok(format!("{SAMPLES} non-linear maps rejected on M_two, {SAMPLES} maps accepted on M_zpmt"))
}

fn solvers() -> Outcome {
    let params = SolverParams::default();
    let mut worst: f64 = 0.0;
    for seed in 0..200 {
        let m = random_mdp(seed);
        let pi = random_policy(&m, &mut rng(seed, 70));
        let a = policy_q(&m, &pi).map_err(|e| e.to_string())?;
        let b = policy_q_iterative(&m, &pi, &params).map_err(|e| e.to_string())?;
        let scale = value_scale(&m, 0.0);
        let err = max_abs((&a.q - &b.q).iter().copied()) / scale;
        ensure(err <= 1e-8, || format!("seed {seed}: relative gap {err:e}"))?;
        worst = worst.max(err);
    }
    let lp = optimal_q(&fixtures::m_loop(), &params).map_err(|e| e.to_string())?;
    within(lp.v[0], 10.0, 1e-10, "M_loop V*")?;
    let two = optimal_q(&fixtures::m_two(), &params).map_err(|e| e.to_string())?;
    within(two.v[0], 3.0, 1e-10, "M_two V*")?;
    within(two.q[[0, 0]], 2.5, 1e-10, "M_two Q*(a1)")?;
    within(two.q[[0, 1]], 3.0, 1e-10, "M_two Q*(a2)")?;
    Ok(format!("200 MDPs, max relative gap {worst:.2e}; micro values exact to 1e-10"))
}

fn determinism(dir: &Path) -> Outcome {
    let one = table_run(dir, "1")?;
    let four = table_run(dir, "4")?;
    ensure(one == four, || "verdict JSON differs between RIL_THREADS=1 and 4".into())?;
    Ok(format!("{} bytes identical", one.len()))
}

fn main() -> ExitCode {
    let dir = TempDir::new().expect("temp dir");
    let d = dir.path();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("directory table", Box::new(|| table(d))),
        ("shaping identities", Box::new(shaping_identities)),
        ("dynamics transfer", Box::new(transfer)),
        ("reward recovery", Box::new(recovery)),
        ("refinement order", Box::new(|| hasse(d))),
        ("monotone-map bound", Box::new(zpmt_bound)),
        ("solver cross-checks", Box::new(solvers)),
        ("determinism", Box::new(|| determinism(d))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
