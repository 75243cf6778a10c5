//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ttdreach::bws::{backward_search, backward_search_box, forward_coverable, BwsResult};
use ttdreach::frontend::{generate_random_ttd, parse_tts};
use ttdreach::invariant::{
    abstract_kappa, path_summary, reachability_formula, solve_recurrence, ElementaryRelation,
    TransitionInvariant,
};
use ttdreach::logic::{Atom, Cmp, Formula, FreshVars, LinExpr, Var};
use ttdreach::model::{normalize_initial, Edge, EdgeId, Ettd, GlobalState, ThreadState, Ttd};
use ttdreach::quotient::{
    path_regex, remove_alternation, scc_quotient, enumerate_quotient_paths, EdgeRegex,
};
use ttdreach::reach::{check_coverability, check_coverability_ettd, ReachConfig, Verdict};
use ttdreach::solver::{check_sat, enumerate_models, to_smtlib, Limits, SatResult};
use ttdreach::summary::{accelerate, compact_summary, rewrite_maxplus, symbolic_summary, MaxPlusTerm};

const RUNNING_EXAMPLE: &str = "\
4 4
0 0 -> 1 1
1 0 -> 2 1
2 1 -> 2 2
2 2 -> 1 3
2 2 -> 3 1
3 3 -> 2 2
target 3 3
";

const RUNNING_EXAMPLE_RUNTIME: Duration = Duration::from_secs(1);
const SUMMARY_RUNTIME: Duration = Duration::from_secs(30);
const FUZZ_RUNTIME: Duration = Duration::from_secs(300);
const FUZZ_INSTANCES: u64 = 500;
const NORMALIZATION_INSTANCES: u64 = 100;
const SMT_FORMULAS: usize = 100;
const PROPERTY_CASES: usize = 200;

/// Writes past the test harness's output capture so every verdict shows.
fn emit(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn verdict_line(criterion: u32, ok: bool, what: &str, detail: &str) {
    let status = if ok { "PASS" } else { "FAIL" };
    emit(&format!("{status} criterion {criterion}: {what} ({detail})"));
}

fn ts(s: u32, l: u32) -> ThreadState {
    ThreadState::new(s, l)
}

fn edge(a: (u32, u32), b: (u32, u32)) -> Edge {
    Edge::new(ts(a.0, a.1), ts(b.0, b.1))
}

/// The nine edges e0..e8 of the running example's expanded diagram, in
/// their conventional numbering.
fn named_edges() -> [Edge; 9] {
    [
        edge((0, 0), (1, 1)),
        edge((1, 1), (1, 0)),
        edge((1, 0), (2, 1)),
        edge((2, 1), (2, 2)),
        edge((2, 2), (1, 3)),
        edge((1, 3), (1, 0)),
        edge((2, 2), (3, 1)),
        edge((3, 1), (3, 3)),
        edge((3, 3), (2, 2)),
    ]
}

fn running_ettd() -> Ettd {
    let ttd = parse_tts(RUNNING_EXAMPLE).unwrap();
    let e = named_edges();
    Ettd::with_expansion_edges(&ttd, [e[1], e[5], e[7]]).unwrap()
}

fn names(ettd: &Ettd, path: &[EdgeId]) -> String {
    let named = named_edges();
    path.iter()
        .map(|id| {
            let e = ettd.edge(*id).edge;
            match named.iter().position(|n| *n == e) {
                Some(i) => format!("e{i}"),
                None => format!("[{e}]"),
            }
        })
        .collect()
}

/// The single alternation-free path expression of the running example.
fn running_regex(ettd: &Ettd) -> EdgeRegex {
    let qg = scc_quotient(ettd).unwrap();
    let (paths, truncated) = enumerate_quotient_paths(ettd, &qg, 16);
    assert!(!truncated && paths.len() == 1);
    let r = path_regex(ettd, &qg, &paths[0], 100_000).unwrap();
    let mut rs = remove_alternation(&r, 100_000).unwrap();
    assert_eq!(rs.len(), 1);
    rs.pop().unwrap()
}

fn sat_with(f: &Formula, fixed: &[(Var, i64)]) -> bool {
    let g = fixed
        .iter()
        .fold(f.clone(), |g, (v, c)| g.substitute(*v, &LinExpr::constant(*c)));
    check_sat(&g, Limits::default()).unwrap().is_sat()
}

#[test]
fn criterion_1_running_example_end_to_end() {
    let start = Instant::now();
    let ttd = parse_tts(RUNNING_EXAMPLE).unwrap();
    let report = check_coverability(&ttd, &ReachConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let mut problems = Vec::new();
    match &report.verdict {
        Verdict::Reachable(w) => {
            if let Err(e) = w.validate(&ttd) {
                problems.push(format!("witness does not replay: {e}"));
            }
            if w.threads() != 3 {
                problems.push(format!("witness uses {} threads", w.threads()));
            }
        }
        other => problems.push(format!("verdict {}", other.name())),
    }
    let pruned_projection = report
        .accepted
        .as_ref()
        .map(|a| names(&Ettd::build(&ttd, true), &a.edges))
        .unwrap_or_default();

    // with exactly the nine edges, the accepted projection and κ-model
    let ettd = running_ettd();
    let exact = check_coverability_ettd(&ettd, &ReachConfig::default()).unwrap();
    let projection = exact
        .accepted
        .as_ref()
        .map(|a| names(&ettd, &a.edges))
        .unwrap_or_default();
    if projection != "e0e1e2e3e4e5e2e3e6e7" {
        problems.push(format!("projection {projection}"));
    }
    if let Verdict::Reachable(w) = &exact.verdict {
        if w.validate(&ttd).is_err() || w.threads() != 3 {
            problems.push("nine-edge witness invalid".into());
        }
    }
    let r = running_regex(&ettd);
    let f = reachability_formula(&ettd, &r, Limits::default()).unwrap();
    let models = enumerate_models(
        &f,
        &[Var::Kappa(1), Var::Kappa(2)],
        16,
        Limits::default(),
    )
    .unwrap();
    let wanted = models.iter().any(|m| {
        m.get(&Var::Kappa(1)) == Some(&1) && m.get(&Var::Kappa(2)).copied().unwrap_or(0) == 0
    });
    if !wanted {
        problems.push("κ1=1, κ2=0 not among the first 16 models".into());
    }
    if elapsed >= RUNNING_EXAMPLE_RUNTIME {
        problems.push(format!("runtime {elapsed:?}"));
    }
    let ok = problems.is_empty();
    verdict_line(
        1,
        ok,
        "running example reachable with replayable 3-thread witness",
        &format!(
            "regex {r}; projection {projection}; pruned projection {pruned_projection}; {:?}; {}",
            elapsed,
            if ok { "ok".to_string() } else { problems.join("; ") }
        ),
    );
    assert!(ok, "{problems:?}");
}

#[test]
fn criterion_2_path_summary_constraints() {
    let ettd = running_ettd();
    let r = running_regex(&ettd);
    let expected: [Box<dyn Fn(i64, i64, i64) -> bool>; 4] = [
        Box::new(|n, k1, k2| n >= 1 && n == k2 + k1 + 2),
        Box::new(|n, _, _| n == 0),
        Box::new(|n, _, _| n == 0),
        Box::new(|n, _, k2| (0 <= n && n <= 1 - k2) || n == 0),
    ];
    let mut details = Vec::new();
    let mut ok = true;
    for (l, want) in expected.iter().enumerate() {
        let f = path_summary(&ettd, &r, l as u32, &mut FreshVars::new(), Limits::default()).unwrap();
        let mut mismatches = 0;
        let mut first = None;
        for n in 0..=8 {
            for k1 in 0..=4 {
                for k2 in 0..=4 {
                    let got = sat_with(
                        &f,
                        &[(Var::Local(l as u32), n), (Var::Kappa(1), k1), (Var::Kappa(2), k2)],
                    );
                    if got != want(n, k1, k2) {
                        mismatches += 1;
                        first.get_or_insert((n, k1, k2, got));
                    }
                }
            }
        }
        ok &= mismatches == 0;
        details.push(match first {
            None => format!("l{l} agrees"),
            Some((n, k1, k2, got)) => format!(
                "l{l}: {mismatches} of 225 differ, first n'={n} k1={k1} k2={k2} computed {got}"
            ),
        });
    }
    verdict_line(
        2,
        ok,
        "path-summary constraints of the running example",
        &details.join("; "),
    );
    assert!(ok, "{details:?}");
}

fn mp(base: i64, steps: &[(i64, LinExpr)]) -> MaxPlusTerm {
    steps.iter().fold(MaxPlusTerm::linear(LinExpr::constant(base)), |t, (b, a)| {
        t.max_plus(a.clone(), *b)
    })
}

#[test]
fn criterion_3_max_plus_rows() {
    let k = Var::Kappa(0);
    let c = LinExpr::constant;
    let rep = |d: i64| LinExpr::term(d, k).plus_const(-d);
    let rows = [
        mp(0, &[(0, c(0)), (2, c(2)), (2, rep(2)), (3, c(3))]),
        mp(0, &[(1, c(0)), (1, c(-1)), (1, rep(-1)), (0, c(-3))]),
        mp(0, &[(2, c(2)), (0, c(-1)), (0, rep(-1)), (0, c(0))]),
        mp(0, &[(0, c(-2)), (0, c(0)), (0, rep(0)), (0, c(0))]),
        mp(1, &[(1, c(0)), (0, c(0)), (0, rep(0)), (0, c(0))]),
    ];
    let at2: Vec<i64> = rows.iter().map(|t| t.eval(&|_| 2)).collect();
    let values_ok = at2 == [7, 0, 0, 0, 1];
    let mut fresh = FreshVars::new();
    let n4 = rewrite_maxplus(&rows[4], Cmp::Eq, &LinExpr::zero(), &mut fresh);
    let n4_unsat = matches!(check_sat(&n4, Limits::default()), Ok(SatResult::Unsat));
    let reduced = mp(1, &[(0, rep(-1))]);
    let reduced_f = rewrite_maxplus(&reduced, Cmp::Eq, &LinExpr::zero(), &mut fresh);
    let solutions: Vec<i64> = (1..=10)
        .filter(|&kv| sat_with(&reduced_f, &[(k, kv)]))
        .collect();
    let by_eval: Vec<i64> = (1..=10).filter(|&kv| reduced.eval(&|_| kv) == 0).collect();
    let exactly_two = solutions == [2];
    let ok = values_ok && n4_unsat && exactly_two;
    verdict_line(
        3,
        ok,
        "max-plus rows at κ=2, n4 unsatisfiable, reduced formula solved exactly by κ=2",
        &format!(
            "values {at2:?}; n4 unsat {n4_unsat}; κ ∈ [1,10] satisfying the reduced formula: solver {solutions:?}, evaluation {by_eval:?}"
        ),
    );
    assert!(values_ok && n4_unsat, "row values or n4");
    assert!(exactly_two, "reduced formula holds for κ in {solutions:?}");
}

#[test]
fn criterion_4_straight_line_summaries() {
    let ttd = Ttd::new(
        3,
        3,
        [edge((0, 0), (1, 0)), edge((1, 1), (2, 2))],
        ts(0, 0),
        Some(ts(2, 2)),
    )
    .unwrap();
    let ettd = Ettd::with_expansion_edges(&ttd, [edge((1, 0), (1, 1))]).unwrap();
    let path: Vec<EdgeId> = [edge((0, 0), (1, 0)), edge((1, 0), (1, 1)), edge((1, 1), (2, 2))]
        .iter()
        .map(|e| ettd.id_of(e).unwrap())
        .collect();
    let s: Vec<MaxPlusTerm> = (0..3).map(|l| symbolic_summary(&ettd, &path, l)).collect();
    let eval = |l: usize, n: i64| s[l].eval_at(n, &|_| 0);
    let shapes = (0..=10).all(|n| {
        eval(0, n) == (n - 1).max(0) + 1 && eval(1, n) == n + 1 && eval(2, n) == n - 1
    });
    let values = [eval(0, 0), eval(0, 1), eval(1, 0), eval(2, 1)];
    let ok = shapes && values == [1, 1, 1, 0];
    verdict_line(
        4,
        ok,
        "straight-line summaries",
        &format!("Σ0 = {}; Σ1 = {}; Σ2 = {}; values {values:?}", s[0], s[1], s[2]),
    );
    assert!(ok);
}

/// Brute-force `κ`-fold composition of `n' ⋈ n + c` over naturals.
fn iterate_relation(cmp: Cmp, c: i64, n: i64, kappa: i64) -> BTreeSet<i64> {
    const BOUND: i64 = 80;
    let step = |x: i64, y: i64| match cmp {
        Cmp::Le => y <= x + c,
        Cmp::Eq => y == x + c,
        Cmp::Ge => y >= x + c,
    };
    let mut cur = BTreeSet::from([n]);
    for _ in 0..kappa {
        cur = (0..=BOUND).filter(|&y| cur.iter().any(|&x| step(x, y))).collect();
    }
    cur
}

#[test]
fn criterion_5_recurrence_table() {
    let kappa = Var::Kappa(0);
    let mut failures = Vec::new();
    let mut cells = 0;
    for cmp in [Cmp::Le, Cmp::Eq, Cmp::Ge] {
        for c in [-1i64, 0, 1] {
            cells += 1;
            let body = ElementaryRelation::Delta(cmp, c);
            let mut fresh = FreshVars::new();
            let solved = solve_recurrence(
                &TransitionInvariant::Relational(body.to_formula()),
                kappa,
                &mut fresh,
                Limits::default(),
            )
            .unwrap();
            let solved_f = solved.to_formula(&mut fresh);
            let accelerated = body.accelerate(kappa);
            let exists = body.exists_kappa();
            let abstracted = abstract_kappa(&solved, kappa, &mut fresh, Limits::default())
                .unwrap()
                .to_formula(&mut fresh);
            for n in 0..=6 {
                for np in 0..=6 {
                    let env = |v: Var| match v {
                        Var::In => n,
                        Var::Out => np,
                        _ => 0,
                    };
                    for k in 0..=6 {
                        let truth = iterate_relation(cmp, c, n, k).contains(&np);
                        let got = sat_with(&solved_f, &[(Var::In, n), (Var::Out, np), (kappa, k)]);
                        if got != truth {
                            failures.push(format!("{cmp:?} c={c} symbolic n={n} n'={np} κ={k}"));
                        }
                        if k >= 1 {
                            let acc = accelerated.eval(&|v| if v == kappa { k } else { env(v) });
                            if acc != truth {
                                failures.push(format!("{cmp:?} c={c} κ-fold n={n} n'={np} κ={k}"));
                            }
                        }
                    }
                    let some_positive = (1..=6).any(|k| iterate_relation(cmp, c, n, k).contains(&np));
                    if exists.eval(&env) != some_positive {
                        failures.push(format!("{cmp:?} c={c} ∃κ≥1 n={n} n'={np}"));
                    }
                    let some = some_positive || n == np;
                    if sat_with(&abstracted, &[(Var::In, n), (Var::Out, np)]) != some {
                        failures.push(format!("{cmp:?} c={c} ∃κ≥0 n={n} n'={np}"));
                    }
                }
            }
        }
    }
    let ok = failures.is_empty() && cells == 9;
    verdict_line(
        5,
        ok,
        "recurrence table, 9 cells, symbolic and ∃κ columns vs brute force",
        &format!("{} mismatches{}", failures.len(), failures.first().map(|f| format!(", first {f}")).unwrap_or_default()),
    );
    assert!(ok, "{failures:?}");
}

/// A random cyclic ETTD path over at most 4 x 4 thread states.
fn random_cycle(rng: &mut ChaCha8Rng) -> (Ettd, Vec<EdgeId>) {
    let ns = rng.random_range(1..=4u32);
    let nl = rng.random_range(2..=4u32);
    let len = rng.random_range(2..=7usize).min((ns * nl) as usize);
    let mut states = vec![ts(rng.random_range(0..ns), rng.random_range(0..nl))];
    while states.len() < len {
        let t = ts(rng.random_range(0..ns), rng.random_range(0..nl));
        if t != *states.last().unwrap() && (states.len() + 1 < len || t != states[0]) {
            states.push(t);
        }
    }
    states.push(states[0]);
    let mut kinds: BTreeMap<Edge, bool> = BTreeMap::new();
    for w in states.windows(2) {
        let e = Edge::new(w[0], w[1]);
        let expansion = e.is_horizontal() && rng.random_bool(0.5);
        kinds.entry(e).or_insert(expansion);
    }
    let real: Vec<Edge> = kinds.iter().filter(|(_, x)| !**x).map(|(e, _)| *e).collect();
    let exp: Vec<Edge> = kinds.iter().filter(|(_, x)| **x).map(|(e, _)| *e).collect();
    let ttd = Ttd::new(ns, nl, real, states[0], None).unwrap();
    let ettd = Ettd::with_expansion_edges(&ttd, exp).unwrap();
    let path = states
        .windows(2)
        .map(|w| ettd.id_of(&Edge::new(w[0], w[1])).unwrap())
        .collect();
    (ettd, path)
}

#[test]
fn criterion_6_compact_summaries_and_acceleration() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut compact_failures = Vec::new();
    let mut accel_failures = Vec::new();
    let mut compact_checks = 0;
    let mut accel_checks = 0;
    for case in 0..PROPERTY_CASES {
        let (ettd, path) = random_cycle(&mut rng);
        let last_local = ettd.edge(*path.last().unwrap()).edge.to.local;
        for l in 0..ettd.ttd().num_local() {
            let exact = symbolic_summary(&ettd, &path, l);
            let compact = compact_summary(&ettd, &path, l);
            let acc = accelerate(&ettd, &path, l, Var::Kappa(0)).unwrap();
            // a counter whose state the cycle passes through at its ends holds a thread
            let lo = i64::from(last_local == l);
            for n in lo..=5 {
                compact_checks += 1;
                if compact.eval(n) != exact.eval_at(n, &|_| 0) {
                    compact_failures.push(format!("case {case} l={l} n={n}"));
                }
                let mut iterated = n;
                for k in 1..=4 {
                    iterated = exact.eval_at(iterated, &|_| 0);
                    accel_checks += 1;
                    if acc.eval_at(n, &|_| k) != iterated {
                        accel_failures.push(format!("case {case} l={l} n={n} κ={k}"));
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = compact_failures.is_empty() && accel_failures.is_empty() && elapsed < SUMMARY_RUNTIME;
    verdict_line(
        6,
        ok,
        "compact summaries and accelerations vs iterated exact summaries",
        &format!(
            "{PROPERTY_CASES} cycles, {compact_checks} compact checks ({} failed), {accel_checks} acceleration checks ({} failed), {elapsed:?}",
            compact_failures.len(),
            accel_failures.len()
        ),
    );
    assert!(ok, "{compact_failures:?} {accel_failures:?}");
}

fn fuzz_instance(seed: u64) -> Ttd {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let ns = rng.random_range(1..=5u32);
        let nl = rng.random_range(1..=5u32);
        let edges = rng.random_range(1..=12usize);
        if let Ok(ttd) = generate_random_ttd(rng.random(), ns, nl, edges) {
            return ttd;
        }
    }
}

#[test]
fn criterion_7_differential_fuzzing() {
    let start = Instant::now();
    let mut contradictions = Vec::new();
    let mut bad_witnesses = Vec::new();
    let mut simple_unknown = Vec::new();
    let (mut reachable, mut unreachable, mut unknown, mut simple) = (0, 0, 0, 0);
    for seed in 0..FUZZ_INSTANCES {
        let ttd = fuzz_instance(seed);
        let ettd = Ettd::build(&ttd, true);
        let only_simple = scc_quotient(&ettd).map_or(true, |qg| qg.has_only_simple_loops(&ettd));
        simple += usize::from(only_simple);
        let report = check_coverability(&ttd, &ReachConfig::default()).unwrap();
        let (oracle, _) = backward_search(&ttd, None).unwrap();
        match (&report.verdict, &oracle) {
            (Verdict::Reachable(w), BwsResult::Coverable(_)) => {
                reachable += 1;
                if let Err(e) = w.validate(&ttd) {
                    bad_witnesses.push(format!("seed {seed}: {e}"));
                }
            }
            (Verdict::Unreachable, BwsResult::Uncoverable) => unreachable += 1,
            (Verdict::Unknown(why), _) => {
                unknown += 1;
                if only_simple {
                    simple_unknown.push(format!("seed {seed}: {why}"));
                }
            }
            (v, o) => contradictions.push(format!("seed {seed}: {} vs {o:?}", v.name())),
        }
    }
    let elapsed = start.elapsed();
    let ok = contradictions.is_empty()
        && bad_witnesses.is_empty()
        && simple_unknown.is_empty()
        && elapsed < FUZZ_RUNTIME;
    verdict_line(
        7,
        ok,
        "differential fuzzing against backward search",
        &format!(
            "{FUZZ_INSTANCES} instances: {reachable} reachable, {unreachable} unreachable, {unknown} unknown; {simple} with simple loops only; {} contradictions; {} bad witnesses; {} unknown on simple loops; {elapsed:?}",
            contradictions.len(),
            bad_witnesses.len(),
            simple_unknown.len()
        ),
    );
    assert!(ok, "{contradictions:?} {bad_witnesses:?} {simple_unknown:?}");
}

/// All global states with `n` threads drawn from the box `initial`.
fn box_states(initial: &BTreeSet<ThreadState>, n: usize) -> Vec<GlobalState> {
    let shareds: BTreeSet<u32> = initial.iter().map(|t| t.shared).collect();
    let locals: Vec<u32> = initial
        .iter()
        .map(|t| t.local)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut out = Vec::new();
    for s in shareds {
        let mut combo = vec![0usize; n];
        loop {
            out.push(GlobalState::new(s, combo.iter().map(|&i| locals[i]).collect()));
            // next non-decreasing index vector
            let mut i = n;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if combo[i] + 1 < locals.len() {
                    combo[i] += 1;
                    for j in i + 1..n {
                        combo[j] = combo[i];
                    }
                    break;
                }
                if i == 0 {
                    i = usize::MAX;
                    break;
                }
            }
            if i == usize::MAX || n == 0 {
                break;
            }
        }
    }
    out
}

#[test]
fn criterion_8_initial_set_normalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    let mut covered_small = 0;
    let mut disagreements = Vec::new();
    while checked < NORMALIZATION_INSTANCES {
        let ttd = fuzz_instance(rng.random());
        let ns = ttd.num_shared();
        let nl = ttd.num_local();
        let shareds: BTreeSet<u32> = (0..ns).filter(|_| rng.random_bool(0.4)).collect();
        let locals: BTreeSet<u32> = (0..nl).filter(|_| rng.random_bool(0.5)).collect();
        if shareds.is_empty() || locals.is_empty() || shareds.len() * locals.len() < 2 {
            continue;
        }
        let initial: BTreeSet<ThreadState> = shareds
            .iter()
            .flat_map(|&s| locals.iter().map(move |&l| ts(s, l)))
            .collect();
        let target = ts(rng.random_range(0..ns), rng.random_range(0..nl));
        if initial.contains(&target) {
            continue;
        }
        let ttd = ttd.with_target(target).unwrap();
        let normalized = normalize_initial(&ttd, &initial).unwrap();
        let (after, _) = backward_search(&normalized, None).unwrap();
        let small = (1..=3).any(|n| forward_coverable(&ttd, &box_states(&initial, n), target));
        checked += 1;
        covered_small += usize::from(small);
        if small && after == BwsResult::Uncoverable {
            disagreements.push(format!("instance {checked}: coverable with ≤3 threads, normalized uncoverable"));
        }
        let (direct, _) = backward_search_box(&ttd, &initial, None).unwrap();
        if matches!(direct, BwsResult::Coverable(_)) != matches!(after, BwsResult::Coverable(_)) {
            disagreements.push(format!("instance {checked}: box search {direct:?}, normalized {after:?}"));
        }
    }
    let ok = disagreements.is_empty();
    verdict_line(
        8,
        ok,
        "initial-set normalization preserves coverability",
        &format!("{checked} instances, {covered_small} coverable within 3 threads, {} disagreements", disagreements.len()),
    );
    assert!(ok, "{disagreements:?}");
}

fn z3_available() -> bool {
    Command::new("z3")
        .arg("--version")
        .stdout(Stdio::null())
        .status()
        .is_ok_and(|s| s.success())
}

fn z3_verdict(script: &str) -> Option<bool> {
    let mut child = Command::new("z3")
        .args(["-in", "-smt2"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .ok()?;
    child.stdin.take()?.write_all(script.as_bytes()).ok()?;
    let out = child.wait_with_output().ok()?;
    let text = String::from_utf8_lossy(&out.stdout);
    match text.lines().next()?.trim() {
        "sat" => Some(true),
        "unsat" => Some(false),
        _ => None,
    }
}

fn random_formula(rng: &mut ChaCha8Rng, depth: u32) -> Formula {
    if depth == 0 || rng.random_bool(0.3) {
        let mut e = LinExpr::constant(rng.random_range(-6..=6));
        for v in 0..3 {
            let c = rng.random_range(-3..=3);
            if c != 0 {
                e = e.plus(&LinExpr::term(c, Var::Fresh(v)));
            }
        }
        let cmp = [Cmp::Le, Cmp::Eq, Cmp::Ge][rng.random_range(0..3)];
        return Formula::atom(Atom::new(e, cmp, LinExpr::zero()));
    }
    let parts: Vec<Formula> = (0..rng.random_range(2..=3))
        .map(|_| random_formula(rng, depth - 1))
        .collect();
    if rng.random_bool(0.5) {
        Formula::and(parts)
    } else {
        Formula::or(parts)
    }
}

#[test]
fn criterion_9_smtlib_round_trip() {
    if !z3_available() {
        emit("SKIP criterion 9: no SMT-LIB solver (z3) on PATH");
        return;
    }
    let mut formulas = Vec::new();
    let mut seed = 0;
    while formulas.len() < SMT_FORMULAS / 2 {
        let ttd = fuzz_instance(9_000 + seed);
        seed += 1;
        let ettd = Ettd::build(&ttd, true);
        let Ok(qg) = scc_quotient(&ettd) else { continue };
        let (paths, _) = enumerate_quotient_paths(&ettd, &qg, 4);
        for qp in paths {
            let Ok(r) = path_regex(&ettd, &qg, &qp, 10_000) else { continue };
            for r in remove_alternation(&r, 4).unwrap_or_default() {
                if let Ok(f) = reachability_formula(&ettd, &r, Limits::default()) {
                    formulas.push(f);
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    while formulas.len() < SMT_FORMULAS {
        formulas.push(random_formula(&mut rng, 3));
    }
    let mut disagreements = Vec::new();
    let mut sat = 0;
    for (i, f) in formulas.iter().enumerate() {
        let ours = check_sat(f, Limits::default()).unwrap().is_sat();
        sat += usize::from(ours);
        let theirs = z3_verdict(&to_smtlib(f));
        if theirs != Some(ours) {
            disagreements.push(format!("formula {i}: ours {ours}, z3 {theirs:?}"));
        }
    }
    let ok = disagreements.is_empty();
    verdict_line(
        9,
        ok,
        "SMT-LIB export agrees with z3",
        &format!("{} formulas, {sat} sat, {} disagreements", formulas.len(), disagreements.len()),
    );
    assert!(ok, "{disagreements:?}");
}
