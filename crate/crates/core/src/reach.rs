//! Per-path reachability with refinement of loop nests, the genuineness
//! check on unwound paths, witness construction and the top-level
//! coverability check.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use log::debug;
use thiserror::Error;

use crate::invariant::{entry_value, reachability_formula, InvariantError};
use crate::logic::{Formula, Var};
use crate::model::{Edge, EdgeId, EdgeKind, Ettd, GlobalState, ModelError, Ttd};
use crate::quotient::{
    enumerate_quotient_paths, path_regex, remove_alternation, scc_quotient, unwind, EdgeRegex,
    QuotientError,
};
use crate::solver::{
    check_sat_metered, enumerate_models_metered, to_smtlib, Limits, Model, SatResult,
    SolverError,
};
use crate::summary::symbolic_summary;

#[derive(Debug, Error)]
pub enum ReachError {
    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
    #[error("target equals the initial thread state")]
    DegenerateQuery,
    #[error("TTD has no target state")]
    NoTarget,
    #[error("writing SMT export: {0}")]
    Io(#[from] std::io::Error),
}

/// Tunables of the symbolic check.
#[derive(Debug, Clone)]
pub struct ReachConfig {
    /// Quotient paths (after case-splitting alternation) to examine.
    pub max_paths: usize,
    /// κ-models tried per refinement level.
    pub max_models: usize,
    pub prune: bool,
    pub regex_budget: usize,
    /// Limits of a single solver call.
    pub limits: Limits,
    /// Solver search nodes available to one coverability check.
    pub solver_budget: usize,
    /// Directory receiving one SMT-LIB file per path and refinement stage.
    pub emit_smt: Option<PathBuf>,
}

impl Default for ReachConfig {
    fn default() -> Self {
        ReachConfig {
            max_paths: 4096,
            max_models: 16,
            prune: true,
            regex_budget: 100_000,
            limits: Limits::default(),
            solver_budget: 50_000,
            emit_smt: None,
        }
    }
}

/// One global step of a witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessStep {
    pub edge: Edge,
    pub thread: usize,
}

/// A run from an initial global state to a state covering the target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub states: Vec<GlobalState>,
    pub steps: Vec<WitnessStep>,
}

impl Witness {
    pub fn threads(&self) -> usize {
        self.states.first().map_or(0, |g| g.locals.len())
    }

    pub fn edges(&self) -> Vec<Edge> {
        self.steps.iter().map(|s| s.edge).collect()
    }

    /// Replays the run against `ttd`: initial start, existing edges, and a
    /// final state covering the target.
    pub fn validate(&self, ttd: &Ttd) -> Result<(), String> {
        let target = ttd.target().ok_or("no target")?;
        let first = self.states.first().ok_or("empty witness")?;
        if *first != ttd.initial_global(first.locals.len()) {
            return Err(format!("{first} is not initial"));
        }
        if self.states.len() != self.steps.len() + 1 {
            return Err("state and step counts disagree".into());
        }
        for (i, step) in self.steps.iter().enumerate() {
            if !ttd.has_edge(&step.edge) {
                return Err(format!("{} is not an edge", step.edge));
            }
            let next = self.states[i]
                .fire(&step.edge, step.thread)
                .map_err(|e: ModelError| e.to_string())?;
            if next != self.states[i + 1] {
                return Err(format!("step {i} reaches {next}, not {}", self.states[i + 1]));
            }
        }
        let last = self.states.last().unwrap();
        if !last.covers_thread(target) {
            return Err(format!("{last} does not cover {target}"));
        }
        Ok(())
    }
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.steps.iter().enumerate() {
            writeln!(
                f,
                "{} --{}-> {}",
                self.states[i],
                s.edge,
                self.states[i + 1]
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Reachable(Witness),
    Unreachable,
    Unknown(String),
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Reachable(_) => "reachable",
            Verdict::Unreachable => "unreachable",
            Verdict::Unknown(_) => "unknown",
        }
    }
}

/// The unwound path behind a reachable verdict and the loop counts chosen
/// at each refinement level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcceptedPath {
    pub edges: Vec<EdgeId>,
    pub kappas: Vec<BTreeMap<u32, u64>>,
}

/// Outcome of one path expression.
#[derive(Debug, Clone)]
pub struct PathResult {
    pub verdict: Verdict,
    pub accepted: Option<AcceptedPath>,
    pub models_tried: usize,
}

/// Outcome of the whole check with diagnostics.
#[derive(Debug, Clone)]
pub struct Report {
    pub verdict: Verdict,
    pub accepted: Option<AcceptedPath>,
    pub paths_examined: usize,
    pub truncated: bool,
    pub diagnostics: Vec<String>,
}

/// Builds a witness run from an unwound ETTD path (backward construction).
pub fn build_witness(ettd: &Ettd, path: &[EdgeId]) -> Result<Witness, ReachError> {
    let target = ettd.target().ok_or(ReachError::NoTarget)?;
    let mut states = vec![GlobalState::new(target.shared, vec![target.local])];
    let mut steps: Vec<WitnessStep> = Vec::new();
    for id in path.iter().rev() {
        let e = ettd.edge(*id);
        let p1 = &states[0];
        match e.kind {
            EdgeKind::Real => {
                let to = e.edge.to;
                let thread = (p1.shared == to.shared)
                    .then(|| p1.locals.iter().position(|&l| l == to.local))
                    .flatten()
                    .ok_or_else(|| {
                        ReachError::InternalInconsistency(format!(
                            "{} cannot be executed backwards from {p1}",
                            e.edge
                        ))
                    })?;
                let mut locals = p1.locals.clone();
                locals[thread] = e.edge.from.local;
                states.insert(0, GlobalState::new(e.edge.from.shared, locals));
                steps.insert(
                    0,
                    WitnessStep {
                        edge: e.edge,
                        thread,
                    },
                );
            }
            EdgeKind::Expansion => {
                if p1.count(e.edge.from.local) == 0 {
                    for g in &mut states {
                        g.locals.push(e.edge.from.local);
                    }
                }
            }
        }
    }
    Ok(Witness { states, steps })
}

/// Decides whether the unwound path is executable from an initial state;
/// if so returns its validated witness.
pub fn genuineness(ettd: &Ettd, path: &[EdgeId]) -> Result<Option<Witness>, ReachError> {
    let target = ettd.target().ok_or(ReachError::NoTarget)?;
    let initial = ettd.initial();
    let endpoints_ok = match (path.first(), path.last()) {
        (Some(a), Some(b)) => ettd.edge(*a).edge.from == initial && ettd.edge(*b).edge.to == target,
        _ => false,
    };
    if !endpoints_ok || !ettd.is_chain(path) {
        return Err(ReachError::InternalInconsistency(
            "unwound path does not lead from the initial to the target state".into(),
        ));
    }
    for l in 0..ettd.ttd().num_local() {
        let x = entry_value(l, target.local);
        let v = symbolic_summary(ettd, path, l).eval_at(x, &|_| 0);
        let ok = if l == initial.local { v >= 1 } else { v == 0 };
        if !ok {
            return Ok(None);
        }
    }
    let w = build_witness(ettd, path)?;
    w.validate(ettd.ttd())
        .map_err(|e| ReachError::InternalInconsistency(format!("genuine path fails replay: {e}")))?;
    Ok(Some(w))
}

struct PathContext<'a> {
    ettd: &'a Ettd,
    config: &'a ReachConfig,
    index: usize,
    stage: usize,
    models_left: usize,
    nodes_left: &'a mut usize,
}

enum Attempt {
    Found(Witness, AcceptedPath),
    Refuted,
    GaveUp(String),
}

fn kappa_assignment(r: &EdgeRegex, m: &Model) -> BTreeMap<u32, u64> {
    r.outermost_ids()
        .into_iter()
        .map(|id| (id, m.get(&Var::Kappa(id)).copied().unwrap_or(0) as u64))
        .collect()
}

impl PathContext<'_> {
    /// Per-call limits capped by the remaining budget.
    fn limits(&self) -> Limits {
        Limits {
            max_nodes: self.config.limits.max_nodes.min(*self.nodes_left),
            ..self.config.limits
        }
    }

    fn spend(&mut self, used: usize) {
        *self.nodes_left = self.nodes_left.saturating_sub(used);
    }

    fn check(&mut self, f: &Formula) -> Result<SatResult, SolverError> {
        let limits = self.limits();
        let mut used = 0;
        let r = check_sat_metered(f, limits, &mut used);
        self.spend(used);
        r
    }

    fn formula(&mut self, r: &EdgeRegex) -> Result<Formula, InvariantError> {
        let f = reachability_formula(self.ettd, r, self.config.limits)?;
        Ok(f)
    }

    fn emit(&mut self, f: &Formula) -> Result<(), ReachError> {
        if let Some(dir) = &self.config.emit_smt {
            std::fs::create_dir_all(dir)?;
            let name = format!("path{}_stage{}.smt2", self.index, self.stage);
            std::fs::write(dir.join(name), to_smtlib(f))?;
        }
        self.stage += 1;
        Ok(())
    }

    /// Tries models of `f` for `r`, refining nested loops.
    fn refine(&mut self, r: &EdgeRegex, f: &Formula) -> Result<Attempt, ReachError> {
        let kappas: Vec<Var> = r.outermost_ids().into_iter().map(Var::Kappa).collect();
        let limits = self.limits();
        let mut used = 0;
        let models = enumerate_models_metered(f, &kappas, self.config.max_models, limits, &mut used);
        self.spend(used);
        let models = match models {
            Ok(m) => m,
            Err(e) => return Ok(Attempt::GaveUp(e.to_string())),
        };
        if models.is_empty() {
            return Ok(Attempt::Refuted);
        }
        let mut gave_up = None;
        for m in models {
            if self.models_left == 0 {
                return Ok(Attempt::GaveUp("model budget exhausted".into()));
            }
            self.models_left -= 1;
            let kappa = kappa_assignment(r, &m);
            let unwound = match unwind(r, &kappa) {
                Ok(u) => u,
                Err(e) => return Err(ReachError::InternalInconsistency(e.to_string())),
            };
            if !r.is_star_free() && unwound.nesting_height() >= r.nesting_height() {
                return Err(ReachError::InternalInconsistency(
                    "unwinding did not reduce loop nesting".into(),
                ));
            }
            if unwound.is_star_free() {
                let path = unwound.literals();
                if let Some(w) = genuineness(self.ettd, &path)? {
                    let accepted = AcceptedPath {
                        edges: path,
                        kappas: vec![kappa],
                    };
                    return Ok(Attempt::Found(w, accepted));
                }
                debug!("model {kappa:?} yields a spurious path");
                gave_up.get_or_insert_with(|| "spurious unwinding".to_string());
                continue;
            }
            let g = match self.formula(&unwound) {
                Ok(g) => g,
                Err(e) => {
                    gave_up = Some(e.to_string());
                    continue;
                }
            };
            self.emit(&g)?;
            match self.check(&g) {
                Ok(SatResult::Unsat) => {
                    gave_up.get_or_insert_with(|| "refined formula unsatisfiable".to_string());
                    continue;
                }
                Ok(SatResult::Sat(_)) => {}
                Err(e) => {
                    gave_up = Some(e.to_string());
                    continue;
                }
            }
            match self.refine(&unwound, &g)? {
                Attempt::Found(w, mut accepted) => {
                    accepted.kappas.insert(0, kappa);
                    return Ok(Attempt::Found(w, accepted));
                }
                Attempt::Refuted => {
                    gave_up.get_or_insert_with(|| "refinement refuted".to_string());
                }
                Attempt::GaveUp(why) => gave_up = Some(why),
            }
        }
        Ok(Attempt::GaveUp(gave_up.unwrap_or_else(|| "no genuine model".into())))
    }
}

/// Reachability along one alternation-free path expression. Solver work is
/// charged to `nodes_left`.
pub fn path_reachability(
    ettd: &Ettd,
    r: &EdgeRegex,
    index: usize,
    config: &ReachConfig,
    nodes_left: &mut usize,
) -> Result<PathResult, ReachError> {
    let budget = config.max_models.saturating_mul(config.max_models).max(1);
    let mut ctx = PathContext {
        ettd,
        config,
        index,
        stage: 0,
        models_left: budget,
        nodes_left,
    };
    let done = |verdict, accepted, ctx: &PathContext| PathResult {
        verdict,
        accepted,
        models_tried: budget - ctx.models_left,
    };
    let f = match ctx.formula(r) {
        Ok(f) => f,
        Err(e) => return Ok(done(Verdict::Unknown(e.to_string()), None, &ctx)),
    };
    ctx.emit(&f)?;
    match ctx.check(&f) {
        Ok(SatResult::Unsat) => return Ok(done(Verdict::Unreachable, None, &ctx)),
        Ok(SatResult::Sat(_)) => {}
        Err(e) => return Ok(done(Verdict::Unknown(e.to_string()), None, &ctx)),
    }
    let attempt = ctx.refine(r, &f)?;
    debug!("path {index}: {} models tried", budget - ctx.models_left);
    Ok(match attempt {
        Attempt::Found(w, accepted) => done(Verdict::Reachable(w), Some(accepted), &ctx),
        // a satisfiable top-level formula without a model is a solver gap
        Attempt::Refuted => done(Verdict::Unknown("no κ-model found".into()), None, &ctx),
        Attempt::GaveUp(why) => done(Verdict::Unknown(why), None, &ctx),
    })
}

/// Symbolic coverability check of the TTD's target.
pub fn check_coverability(ttd: &Ttd, config: &ReachConfig) -> Result<Report, ReachError> {
    let target = ttd.target().ok_or(ReachError::NoTarget)?;
    if target == ttd.initial() {
        return Err(ReachError::DegenerateQuery);
    }
    let ettd = Ettd::build(ttd, config.prune);
    check_coverability_ettd(&ettd, config)
}

/// As [`check_coverability`] on a prebuilt expansion.
pub fn check_coverability_ettd(ettd: &Ettd, config: &ReachConfig) -> Result<Report, ReachError> {
    let target = ettd.target().ok_or(ReachError::NoTarget)?;
    if target == ettd.initial() {
        return Err(ReachError::DegenerateQuery);
    }
    let qg = match scc_quotient(ettd) {
        Ok(qg) => qg,
        Err(QuotientError::NoPath) => {
            return Ok(Report {
                verdict: Verdict::Unreachable,
                accepted: None,
                paths_examined: 0,
                truncated: false,
                diagnostics: vec!["target not connected to the initial state".into()],
            })
        }
        Err(_) => return Err(ReachError::NoTarget),
    };
    let (qpaths, mut truncated) = enumerate_quotient_paths(ettd, &qg, config.max_paths);
    let mut diagnostics = Vec::new();
    let mut unknown = None;
    let mut examined = 0;
    let mut nodes_left = config.solver_budget;
    'outer: for qp in &qpaths {
        let regexes = match path_regex(ettd, &qg, qp, config.regex_budget)
            .and_then(|r| remove_alternation(&r, config.regex_budget))
        {
            Ok(rs) => rs,
            Err(QuotientError::NoPath) => continue,
            Err(e) => {
                diagnostics.push(format!("quotient path {:?}: {e}", qp.crossings));
                unknown = Some(e.to_string());
                continue;
            }
        };
        for r in regexes {
            if examined >= config.max_paths {
                truncated = true;
                break 'outer;
            }
            let result = path_reachability(ettd, &r, examined, config, &mut nodes_left)?;
            examined += 1;
            match result.verdict {
                Verdict::Reachable(w) => {
                    return Ok(Report {
                        verdict: Verdict::Reachable(w),
                        accepted: result.accepted,
                        paths_examined: examined,
                        truncated,
                        diagnostics,
                    });
                }
                Verdict::Unreachable => {}
                Verdict::Unknown(why) => {
                    diagnostics.push(format!("path {}: unknown ({why})", examined - 1));
                    unknown.get_or_insert(why);
                }
            }
        }
    }
    let verdict = match (unknown, truncated) {
        (Some(why), _) => Verdict::Unknown(why),
        (None, true) => Verdict::Unknown("path budget exhausted".into()),
        (None, false) => Verdict::Unreachable,
    };
    Ok(Report {
        verdict,
        accepted: None,
        paths_examined: examined,
        truncated,
        diagnostics,
    })
}
