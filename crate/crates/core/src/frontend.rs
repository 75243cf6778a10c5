//! Text format for TTDs, a seeded random generator and the driver used by
//! the command-line tool.
//!
//! ```text
//! # comment
//! 4 4
//! 0 0 -> 1 1
//! init 0 0
//! target 3 3
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bws::{backward_search, BwsError, BwsResult};
use crate::model::{normalize_initial, Edge, ModelError, ThreadState, Ttd};
use crate::reach::{check_coverability, ReachConfig, ReachError, Report, Verdict};

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: {msg}")]
    Range { line: usize, msg: String },
    #[error("cannot fit {edges} edges into {shared} shared and {local} local states")]
    InfeasibleShape { shared: u32, local: u32, edges: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Reach(#[from] ReachError),
    #[error(transparent)]
    Bws(#[from] BwsError),
    #[error("symbolic verdict {symbolic} contradicts backward search verdict {bws}")]
    Contradiction { symbolic: String, bws: String },
}

/// A parsed document before the initial set is normalized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TtsDocument {
    pub num_shared: u32,
    pub num_local: u32,
    pub edges: Vec<Edge>,
    /// Empty means the default `(0,0)`.
    pub initial: Vec<ThreadState>,
    pub target: Option<ThreadState>,
}

fn parse_pair(line: usize, a: &str, b: &str) -> Result<(u32, u32), FrontendError> {
    let num = |t: &str| {
        t.parse::<u32>().map_err(|_| FrontendError::Parse {
            line,
            msg: format!("expected a state index, found `{t}`"),
        })
    };
    Ok((num(a)?, num(b)?))
}

impl TtsDocument {
    pub fn parse(text: &str) -> Result<Self, FrontendError> {
        let mut header: Option<(u32, u32)> = None;
        let mut doc = TtsDocument {
            num_shared: 0,
            num_local: 0,
            edges: Vec::new(),
            initial: Vec::new(),
            target: None,
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let toks: Vec<&str> = content.split_whitespace().collect();
            let Some((ns, nl)) = header else {
                let [a, b] = toks[..] else {
                    return Err(FrontendError::Parse {
                        line,
                        msg: "expected header `<shared> <local>`".into(),
                    });
                };
                let (ns, nl) = parse_pair(line, a, b)?;
                if ns == 0 || nl == 0 {
                    return Err(FrontendError::Range {
                        line,
                        msg: "state counts must be positive".into(),
                    });
                }
                header = Some((ns, nl));
                doc.num_shared = ns;
                doc.num_local = nl;
                continue;
            };
            let state = |a: &str, b: &str| -> Result<ThreadState, FrontendError> {
                let (s, l) = parse_pair(line, a, b)?;
                if s >= ns || l >= nl {
                    return Err(FrontendError::Range {
                        line,
                        msg: format!("thread state ({s},{l}) outside {ns} x {nl}"),
                    });
                }
                Ok(ThreadState::new(s, l))
            };
            match toks[..] {
                [a, b, "->", c, d] => {
                    let from = state(a, b)?;
                    let to = state(c, d)?;
                    if from == to {
                        return Err(FrontendError::Parse {
                            line,
                            msg: format!("self-loop on {from}"),
                        });
                    }
                    doc.edges.push(Edge::new(from, to));
                }
                ["target", a, b] => doc.target = Some(state(a, b)?),
                ["init", a, b] => doc.initial.push(state(a, b)?),
                _ => {
                    return Err(FrontendError::Parse {
                        line,
                        msg: format!("unrecognized line `{content}`"),
                    })
                }
            }
        }
        if header.is_none() {
            return Err(FrontendError::Parse {
                line: 1,
                msg: "missing header".into(),
            });
        }
        Ok(doc)
    }

    pub fn from_ttd(ttd: &Ttd) -> Self {
        TtsDocument {
            num_shared: ttd.num_shared(),
            num_local: ttd.num_local(),
            edges: ttd.edges().to_vec(),
            initial: vec![ttd.initial()],
            target: ttd.target(),
        }
    }

    /// Builds the TTD; several initial states are folded into one.
    pub fn to_ttd(&self) -> Result<Ttd, FrontendError> {
        let set: BTreeSet<ThreadState> = self.initial.iter().copied().collect();
        let single = match set.len() {
            0 => ThreadState::new(0, 0),
            1 => *set.first().unwrap(),
            _ => {
                let base = Ttd::new(
                    self.num_shared,
                    self.num_local,
                    self.edges.iter().copied(),
                    ThreadState::new(0, 0),
                    self.target,
                )?;
                return Ok(normalize_initial(&base, &set)?);
            }
        };
        Ok(Ttd::new(
            self.num_shared,
            self.num_local,
            self.edges.iter().copied(),
            single,
            self.target,
        )?)
    }

    /// Canonical text: sorted edges, an `init` line only for a non-default
    /// initial state, then the target.
    pub fn emit(&self) -> String {
        let mut out = format!("{} {}\n", self.num_shared, self.num_local);
        let mut edges = self.edges.clone();
        edges.sort();
        edges.dedup();
        for e in &edges {
            let _ = writeln!(
                out,
                "{} {} -> {} {}",
                e.from.shared, e.from.local, e.to.shared, e.to.local
            );
        }
        let initial: BTreeSet<ThreadState> = self.initial.iter().copied().collect();
        if initial != BTreeSet::from([ThreadState::new(0, 0)]) {
            for t in &initial {
                let _ = writeln!(out, "init {} {}", t.shared, t.local);
            }
        }
        if let Some(t) = self.target {
            let _ = writeln!(out, "target {} {}", t.shared, t.local);
        }
        out
    }
}

pub fn parse_tts(text: &str) -> Result<Ttd, FrontendError> {
    TtsDocument::parse(text)?.to_ttd()
}

pub fn emit_tts(ttd: &Ttd) -> String {
    TtsDocument::from_ttd(ttd).emit()
}

/// A random TTD with `num_edges` distinct non-loop edges, initial `(0,0)`
/// and a target different from it. Deterministic in `seed`.
pub fn generate_random_ttd(
    seed: u64,
    num_shared: u32,
    num_local: u32,
    num_edges: usize,
) -> Result<Ttd, FrontendError> {
    let infeasible = FrontendError::InfeasibleShape {
        shared: num_shared,
        local: num_local,
        edges: num_edges,
    };
    let states = (num_shared as usize) * (num_local as usize);
    if states < 2 || num_edges > states * (states - 1) {
        return Err(infeasible);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state = |i: usize| ThreadState::new((i / num_local as usize) as u32, (i % num_local as usize) as u32);
    // pair index p encodes (from, to) with to != from
    let edges: Vec<Edge> = sample(&mut rng, states * (states - 1), num_edges)
        .into_iter()
        .map(|p| {
            let from = p / (states - 1);
            let mut to = p % (states - 1);
            if to >= from {
                to += 1;
            }
            Edge::new(state(from), state(to))
        })
        .collect();
    let target = state(rng.random_range(1..states));
    Ok(Ttd::new(
        num_shared,
        num_local,
        edges,
        ThreadState::new(0, 0),
        Some(target),
    )?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Mode {
    #[default]
    Symbolic,
    Bws,
    Compare,
}

/// Settings of one `check` run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub target: Option<ThreadState>,
    /// Replaces the document's `init` lines when non-empty.
    pub initial: Vec<ThreadState>,
    pub max_paths: usize,
    pub max_models: usize,
    pub prune: bool,
    pub seed: u64,
    pub emit_smt: Option<PathBuf>,
    pub witness: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let r = ReachConfig::default();
        RunConfig {
            mode: Mode::Symbolic,
            target: None,
            initial: Vec::new(),
            max_paths: r.max_paths,
            max_models: r.max_models,
            prune: r.prune,
            seed: 0,
            emit_smt: None,
            witness: false,
        }
    }
}

impl RunConfig {
    pub fn reach_config(&self) -> ReachConfig {
        ReachConfig {
            max_paths: self.max_paths.max(1),
            max_models: self.max_models.max(1),
            prune: self.prune,
            emit_smt: self.emit_smt.clone(),
            ..ReachConfig::default()
        }
    }
}

/// Result of a `check` run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Option<Report>,
    pub bws: Option<BwsResult>,
}

impl RunOutcome {
    /// `reachable`, `unreachable` or `unknown`; the symbolic verdict wins.
    pub fn verdict_name(&self) -> &'static str {
        match (&self.report, &self.bws) {
            (Some(r), _) => r.verdict.name(),
            (None, Some(BwsResult::Coverable(_))) => "reachable",
            (None, Some(BwsResult::Uncoverable)) => "unreachable",
            (None, None) => "unknown",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.verdict_name() {
            "unreachable" => 0,
            "reachable" => 1,
            _ => 2,
        }
    }
}

/// Applies the overrides of `config` and runs the selected checker(s).
pub fn run(doc: &TtsDocument, config: &RunConfig) -> Result<RunOutcome, FrontendError> {
    let mut doc = doc.clone();
    if config.target.is_some() {
        doc.target = config.target;
    }
    if !config.initial.is_empty() {
        doc.initial = config.initial.clone();
    }
    let ttd = doc.to_ttd()?;
    if ttd.target().is_none() {
        return Err(ModelError::NoTarget.into());
    }
    let report = match config.mode {
        Mode::Bws => None,
        _ => Some(check_coverability(&ttd, &config.reach_config())?),
    };
    let bws = match config.mode {
        Mode::Symbolic => None,
        _ => Some(backward_search(&ttd, None)?.0),
    };
    if let (Some(r), Some(b)) = (&report, &bws) {
        let clash = matches!(
            (&r.verdict, b),
            (Verdict::Reachable(_), BwsResult::Uncoverable)
                | (Verdict::Unreachable, BwsResult::Coverable(_))
        );
        if clash {
            return Err(FrontendError::Contradiction {
                symbolic: r.verdict.name().into(),
                bws: if matches!(b, BwsResult::Coverable(_)) { "coverable" } else { "uncoverable" }.into(),
            });
        }
    }
    Ok(RunOutcome { report, bws })
}
