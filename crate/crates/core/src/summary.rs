//! Max-plus path summaries: exact symbolic execution of a path for one local
//! state, the compact `n ⊕_b δ` form, loop acceleration, and the rewriting
//! of max-plus terms into linear constraints.

use std::fmt;

use thiserror::Error;

use crate::logic::{Atom, Cmp, Formula, FreshVars, LinExpr, Var};
use crate::model::{EdgeId, EdgeKind, Ettd};

pub use crate::logic::Atom as LinearAtom;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SummaryError {
    #[error("path is not a cycle")]
    NotCyclic,
    #[error("edges do not form a path")]
    NotAPath,
}

/// One left-associative step: `acc + addend`, or `max(acc + addend, floor)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Step {
    pub floor: Option<i64>,
    pub addend: LinExpr,
}

/// `base` followed by a sequence of steps.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaxPlusTerm {
    pub base: LinExpr,
    pub steps: Vec<Step>,
}

impl MaxPlusTerm {
    pub fn linear(base: LinExpr) -> Self {
        MaxPlusTerm {
            base,
            steps: Vec::new(),
        }
    }

    /// The identity on `n`.
    pub fn input() -> Self {
        Self::linear(LinExpr::var(Var::In))
    }

    pub fn add(mut self, c: i64) -> Self {
        self.steps.push(Step {
            floor: None,
            addend: LinExpr::constant(c),
        });
        self
    }

    /// `self ⊕_floor addend`.
    pub fn max_plus(mut self, addend: LinExpr, floor: i64) -> Self {
        self.steps.push(Step {
            floor: Some(floor),
            addend,
        });
        self
    }

    pub fn eval(&self, env: &impl Fn(Var) -> i64) -> i64 {
        let mut acc = self.base.eval(env);
        for s in &self.steps {
            acc += s.addend.eval(env);
            if let Some(b) = s.floor {
                acc = acc.max(b);
            }
        }
        acc
    }

    /// Evaluates at `n = n` with every other variable bound by `env`.
    pub fn eval_at(&self, n: i64, env: &impl Fn(Var) -> i64) -> i64 {
        self.eval(&|v| if v == Var::In { n } else { env(v) })
    }

    /// `next ∘ self`: feeds this term into `next`, whose base must be `n + c`.
    pub fn then(&self, next: &MaxPlusTerm) -> MaxPlusTerm {
        assert_eq!(next.base.coeff(Var::In), 1, "base must be n + c");
        let rest = next.base.minus(&LinExpr::var(Var::In));
        let mut steps = self.steps.clone();
        if rest != LinExpr::zero() {
            steps.push(Step {
                floor: None,
                addend: rest,
            });
        }
        steps.extend(next.steps.iter().cloned());
        MaxPlusTerm {
            base: self.base.clone(),
            steps,
        }
    }

    /// Replaces `n` in the base by `e`.
    pub fn with_input(&self, e: &LinExpr) -> MaxPlusTerm {
        MaxPlusTerm {
            base: self.base.substitute(Var::In, e),
            steps: self.steps.clone(),
        }
    }

    pub fn rename(&self, f: &impl Fn(Var) -> Var) -> MaxPlusTerm {
        MaxPlusTerm {
            base: self.base.rename(f),
            steps: self
                .steps
                .iter()
                .map(|s| Step {
                    floor: s.floor,
                    addend: s.addend.rename(f),
                })
                .collect(),
        }
    }

    /// Folds leading steps while the accumulator stays constant.
    pub fn simplified(&self) -> MaxPlusTerm {
        let mut base = self.base.clone();
        let mut i = 0;
        while i < self.steps.len() {
            let s = &self.steps[i];
            if s.floor.is_none() {
                base = base.plus(&s.addend);
            } else if base.is_constant() && s.addend.is_constant() {
                let v = (base.get_constant() + s.addend.get_constant()).max(s.floor.unwrap());
                base = LinExpr::constant(v);
            } else {
                break;
            }
            i += 1;
        }
        MaxPlusTerm {
            base,
            steps: self.steps[i..].to_vec(),
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.base
            .vars()
            .chain(self.steps.iter().flat_map(|s| s.addend.vars()))
    }
}

impl fmt::Display for MaxPlusTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.base)?;
        for s in &self.steps {
            let simple = s.addend.is_constant();
            match (s.floor, simple) {
                (None, true) => {
                    let c = s.addend.get_constant();
                    if c < 0 {
                        write!(f, " - {}", -c)?;
                    } else {
                        write!(f, " + {c}")?;
                    }
                }
                (None, false) => write!(f, " + ({})", s.addend)?,
                (Some(b), true) => write!(f, " (+max {b}) {}", s.addend)?,
                (Some(b), false) => write!(f, " (+max {b}) ({})", s.addend)?,
            }
        }
        Ok(())
    }
}

/// Exact summary of `path` for local state `l`, traversing it backwards.
pub fn symbolic_summary(ettd: &Ettd, path: &[EdgeId], l: u32) -> MaxPlusTerm {
    let mut term = MaxPlusTerm::input();
    for id in path.iter().rev() {
        let e = ettd.edge(*id);
        match e.kind {
            EdgeKind::Real => {
                if e.edge.from.local == l {
                    term = term.add(1);
                }
                if e.edge.to.local == l {
                    term = term.add(-1);
                }
            }
            EdgeKind::Expansion => {
                if e.edge.from.local == l {
                    term = term.max_plus(LinExpr::constant(-1), 0).add(1);
                }
            }
        }
    }
    term
}

/// `n ⊕_floor delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CompactSummary {
    pub floor: i64,
    pub delta: i64,
}

impl CompactSummary {
    pub fn term(&self) -> MaxPlusTerm {
        MaxPlusTerm::input().max_plus(LinExpr::constant(self.delta), self.floor)
    }

    pub fn eval(&self, n: i64) -> i64 {
        (n + self.delta).max(self.floor)
    }
}

/// Compact summary of `path` for `l`. Agrees with [`symbolic_summary`] for
/// every `n >= 0`, and for `n >= 1` when the path ends in local state `l`.
pub fn compact_summary(ettd: &Ettd, path: &[EdgeId], l: u32) -> CompactSummary {
    let mut delta = 0;
    for id in path {
        let e = ettd.edge(*id);
        if e.kind == EdgeKind::Real {
            if e.edge.from.local == l {
                delta += 1;
            }
            if e.edge.to.local == l {
                delta -= 1;
            }
        }
    }
    let ends_in_l = path
        .last()
        .is_some_and(|id| ettd.edge(*id).edge.to.local == l);
    let raw = symbolic_summary(ettd, path, l);
    let floor = raw.eval_at(i64::from(ends_in_l), &|_| 0);
    CompactSummary { floor, delta }
}

/// Summary of `kappa >= 1` traversals of the cycle `path`:
/// `Σ(n) ⊕_b (kappa - 1)·δ`.
pub fn accelerate(
    ettd: &Ettd,
    path: &[EdgeId],
    l: u32,
    kappa: Var,
) -> Result<MaxPlusTerm, SummaryError> {
    let (Some(first), Some(last)) = (path.first(), path.last()) else {
        return Err(SummaryError::NotCyclic);
    };
    if !ettd.is_chain(path) {
        return Err(SummaryError::NotAPath);
    }
    if ettd.edge(*first).edge.from != ettd.edge(*last).edge.to {
        return Err(SummaryError::NotCyclic);
    }
    let c = compact_summary(ettd, path, l);
    let repeat = LinExpr::term(c.delta, kappa).plus_const(-c.delta);
    Ok(c.term().max_plus(repeat, c.floor))
}

/// Rewrites a max-plus term into a linear value expression plus side
/// conditions, one fresh variable per floor.
pub fn rewrite_term(term: &MaxPlusTerm, fresh: &mut FreshVars) -> (LinExpr, Formula) {
    let term = term.simplified();
    let mut acc = term.base.clone();
    let mut side = Vec::new();
    for s in &term.steps {
        let sum = acc.plus(&s.addend);
        match s.floor {
            None => acc = sum,
            Some(b) if sum.is_constant() => {
                acc = LinExpr::constant(sum.get_constant().max(b));
            }
            Some(b) => {
                let v = LinExpr::var(fresh.fresh());
                side.push(Formula::or([
                    Formula::and([
                        Formula::atom(Atom::ge(sum.clone(), LinExpr::constant(b))),
                        Formula::atom(Atom::eq(v.clone(), sum.clone())),
                    ]),
                    Formula::and([
                        Formula::atom(Atom::le(sum, LinExpr::constant(b - 1))),
                        Formula::atom(Atom::eq(v.clone(), LinExpr::constant(b))),
                    ]),
                ]));
                acc = v;
            }
        }
    }
    (acc, Formula::and(side))
}

/// Rewrites `lhs ⋈ rhs` with a max-plus `lhs` into a linear formula.
pub fn rewrite_maxplus(
    lhs: &MaxPlusTerm,
    cmp: Cmp,
    rhs: &LinExpr,
    fresh: &mut FreshVars,
) -> Formula {
    let (value, side) = rewrite_term(lhs, fresh);
    Formula::and([side, Formula::atom(Atom::new(value, cmp, rhs.clone()))])
}
