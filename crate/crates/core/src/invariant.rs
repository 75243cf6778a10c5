//! Transition invariants of alternation-free path expressions: composition,
//! κ-fold recurrences of loop bodies, existential abstraction of iteration
//! counters, and the per-local-state path summary.

use std::collections::HashMap;

use num_integer::Integer;
use thiserror::Error;

use crate::logic::{Atom, Cmp, DnfTooLarge, Formula, FreshVars, LinExpr, Var};
use crate::model::{EdgeId, Ettd};
use crate::quotient::{segment, EdgeRegex, Segment};
use crate::solver::{project, Limits};
use crate::summary::{accelerate, compact_summary, rewrite_maxplus, MaxPlusTerm, SummaryError};

/// Cap on constraints produced while projecting a disjunct.
const PROJECTION_CAP: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InvariantError {
    #[error("relation cannot be brought to elementary form")]
    NonElementary,
    #[error(transparent)]
    Dnf(#[from] DnfTooLarge),
    #[error(transparent)]
    Summary(#[from] SummaryError),
}

/// Relation between the counter entering (`n`) and leaving (`n'`) a piece
/// of path, read backwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransitionInvariant {
    /// `n' = term(n)`.
    Functional(MaxPlusTerm),
    /// Formula over `n`, `n'`, iteration counters and auxiliaries.
    Relational(Formula),
}

impl TransitionInvariant {
    pub fn identity() -> Self {
        TransitionInvariant::Functional(MaxPlusTerm::input())
    }

    pub fn to_formula(&self, fresh: &mut FreshVars) -> Formula {
        match self {
            TransitionInvariant::Functional(t) => {
                rewrite_maxplus(t, Cmp::Eq, &LinExpr::var(Var::Out), fresh)
            }
            TransitionInvariant::Relational(f) => f.clone(),
        }
    }
}

/// Relational product: `right` first, then `left`.
pub fn compose(
    right: &TransitionInvariant,
    left: &TransitionInvariant,
    fresh: &mut FreshVars,
) -> TransitionInvariant {
    use TransitionInvariant::*;
    match (right, left) {
        (Functional(a), Functional(b)) => Functional(a.then(b)),
        _ => {
            let m = fresh.fresh();
            let r = right.to_formula(fresh);
            let l = left.to_formula(fresh);
            let r = r.rename(&|v| if v == Var::Out { m } else { v });
            let l = l.rename(&|v| if v == Var::In { m } else { v });
            Relational(Formula::and([r, l]))
        }
    }
}

/// One of `n' ⋈ c`, `n ⋈ c`, `n' ⋈ n + c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementaryRelation {
    Exit(Cmp, i64),
    Entry(Cmp, i64),
    Delta(Cmp, i64),
}

fn n() -> LinExpr {
    LinExpr::var(Var::In)
}

fn np() -> LinExpr {
    LinExpr::var(Var::Out)
}

impl ElementaryRelation {
    pub fn to_formula(&self) -> Formula {
        let a = match *self {
            ElementaryRelation::Exit(c, k) => Atom::new(np(), c, LinExpr::constant(k)),
            ElementaryRelation::Entry(c, k) => Atom::new(n(), c, LinExpr::constant(k)),
            ElementaryRelation::Delta(c, k) => Atom::new(np(), c, n().plus_const(k)),
        };
        Formula::atom(a)
    }

    /// Reads an atom over `n`, `n'` in one of the three shapes.
    pub fn from_atom(a: &Atom) -> Option<Self> {
        let cn = a.expr.coeff(Var::In);
        let co = a.expr.coeff(Var::Out);
        if a.expr.terms().any(|(v, _)| v != Var::In && v != Var::Out) {
            return None;
        }
        let k = a.expr.get_constant();
        // expr = cn·n + co·n' + k ⋈ 0; flip so the leading coefficient is +1
        let flip = |c: Cmp| match c {
            Cmp::Le => Cmp::Ge,
            Cmp::Ge => Cmp::Le,
            Cmp::Eq => Cmp::Eq,
        };
        match (cn, co) {
            (0, 1) => Some(ElementaryRelation::Exit(a.cmp, -k)),
            (0, -1) => Some(ElementaryRelation::Exit(flip(a.cmp), k)),
            (1, 0) => Some(ElementaryRelation::Entry(a.cmp, -k)),
            (-1, 0) => Some(ElementaryRelation::Entry(flip(a.cmp), k)),
            (-1, 1) => Some(ElementaryRelation::Delta(a.cmp, -k)),
            (1, -1) => Some(ElementaryRelation::Delta(flip(a.cmp), k)),
            _ => None,
        }
    }

    /// κ-fold acceleration for `κ >= 1`.
    pub fn accelerate(&self, kappa: Var) -> Formula {
        match *self {
            ElementaryRelation::Delta(c, k) => Formula::atom(Atom::new(
                np(),
                c,
                n().plus(&LinExpr::term(k, kappa)),
            )),
            other => other.to_formula(),
        }
    }

    /// `∃κ >= 1` of the accelerated relation, dropping divisibility.
    pub fn exists_kappa(&self) -> Formula {
        match *self {
            ElementaryRelation::Delta(c, k) => {
                let d = match (c, k.signum()) {
                    (_, 0) => ElementaryRelation::Delta(c, 0),
                    (Cmp::Ge, 1) | (Cmp::Eq, 1) => ElementaryRelation::Delta(Cmp::Ge, k),
                    (Cmp::Le, -1) | (Cmp::Eq, -1) => ElementaryRelation::Delta(Cmp::Le, k),
                    _ => return Formula::True,
                };
                d.to_formula()
            }
            other => other.to_formula(),
        }
    }
}

/// Interval of a single variable; `hi = None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Interval {
    lo: i64,
    hi: Option<i64>,
}

/// Bounds of a variable implied by atoms that mention only it.
fn interval_of(atoms: &[Atom], v: Var) -> Interval {
    let mut iv = Interval { lo: 0, hi: None };
    for a in atoms {
        let k = a.expr.coeff(v);
        if k == 0 || a.expr.terms().count() != 1 {
            continue;
        }
        let c = a.expr.get_constant();
        // k·v + c ⋈ 0
        let bound = -c;
        let (is_lo, is_hi) = match (a.cmp, k > 0) {
            (Cmp::Eq, _) => (true, true),
            (Cmp::Le, true) | (Cmp::Ge, false) => (false, true),
            (Cmp::Ge, true) | (Cmp::Le, false) => (true, false),
        };
        if is_lo {
            iv.lo = iv.lo.max(Integer::div_ceil(&bound, &k));
        }
        if is_hi {
            let h = Integer::div_floor(&bound, &k);
            iv.hi = Some(iv.hi.map_or(h, |x| x.min(h)));
        }
    }
    iv
}

/// Elementary hull of one disjunct: bounds on `n'`, `n` and `n' - n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Hull {
    exit: Interval,
    entry: Interval,
    delta_lo: Option<i64>,
    delta_hi: Option<i64>,
}

fn hull(atoms: &[Atom], fresh: &mut FreshVars) -> Result<Option<Hull>, InvariantError> {
    let keep_only = |target: Var| move |v: Var| v == target;
    let cap = PROJECTION_CAP;
    let non = |_: Var| true;
    let too_big = |_| InvariantError::NonElementary;
    let Some(exit) = project(atoms, &keep_only(Var::Out), &non, cap).map_err(too_big)? else {
        return Ok(None);
    };
    let Some(entry) = project(atoms, &keep_only(Var::In), &non, cap).map_err(too_big)? else {
        return Ok(None);
    };
    let d = fresh.fresh();
    let d_expr = n().plus(&LinExpr::var(d));
    let mut shifted: Vec<Atom> = atoms.iter().map(|a| a.substitute(Var::Out, &d_expr)).collect();
    shifted.push(Atom::ge(d_expr, LinExpr::zero()));
    let Some(delta) = project(&shifted, &keep_only(d), &|v| v != d, cap).map_err(too_big)? else {
        return Ok(None);
    };
    let mut delta_lo: Option<i64> = None;
    let mut delta_hi: Option<i64> = None;
    for a in &delta {
        let k = a.expr.coeff(d);
        if k == 0 {
            continue;
        }
        let bound = -a.expr.get_constant();
        let (is_lo, is_hi) = match (a.cmp, k > 0) {
            (Cmp::Eq, _) => (true, true),
            (Cmp::Le, true) | (Cmp::Ge, false) => (false, true),
            (Cmp::Ge, true) | (Cmp::Le, false) => (true, false),
        };
        if is_lo {
            let l = Integer::div_ceil(&bound, &k);
            delta_lo = Some(delta_lo.map_or(l, |x| x.max(l)));
        }
        if is_hi {
            let h = Integer::div_floor(&bound, &k);
            delta_hi = Some(delta_hi.map_or(h, |x| x.min(h)));
        }
    }
    Ok(Some(Hull {
        exit: interval_of(&exit, Var::Out),
        entry: interval_of(&entry, Var::In),
        delta_lo,
        delta_hi,
    }))
}

/// Sorted union of intervals with overlapping or adjacent ones merged.
fn merge_intervals(ivs: &[Interval]) -> Vec<Interval> {
    let mut sorted = ivs.to_vec();
    sorted.sort();
    let mut out: Vec<Interval> = Vec::new();
    for iv in sorted {
        if let Some(last) = out.last_mut() {
            match last.hi {
                None => continue,
                Some(h) if iv.lo <= h + 1 => {
                    last.hi = iv.hi.map(|x| x.max(h));
                    continue;
                }
                _ => {}
            }
        }
        out.push(iv);
    }
    out
}

/// Membership of the counter `v` in a union of intervals; `v >= 0` is
/// implicit.
fn interval_formula(v: Var, ivs: &[Interval]) -> Formula {
    Formula::or(merge_intervals(ivs).into_iter().map(|iv| {
        Formula::and([
            if iv.lo > 0 {
                Formula::atom(Atom::ge(LinExpr::var(v), LinExpr::constant(iv.lo)))
            } else {
                Formula::True
            },
            match iv.hi {
                Some(h) => Formula::atom(Atom::le(LinExpr::var(v), LinExpr::constant(h))),
                None => Formula::True,
            },
        ])
    }))
}

fn kappa_zero_identity(kappa: Var) -> Formula {
    Formula::and([
        Formula::atom(Atom::eq(LinExpr::var(kappa), LinExpr::zero())),
        Formula::atom(Atom::eq(np(), n())),
    ])
}

fn kappa_positive(kappa: Var) -> Formula {
    Formula::atom(Atom::ge(LinExpr::var(kappa), LinExpr::constant(1)))
}

/// Transition invariant for `kappa` iterations of the loop-body relation
/// `body`, including the `kappa = 0` identity.
///
/// Each disjunct of the body is projected onto `n`, `n'` and summarized by
/// elementary bounds; the κ-fold acceleration of their hull over all
/// disjuncts covers every mix of disjuncts across iterations.
pub fn solve_recurrence(
    body: &TransitionInvariant,
    kappa: Var,
    fresh: &mut FreshVars,
    limits: Limits,
) -> Result<TransitionInvariant, InvariantError> {
    let f = body.to_formula(fresh);
    let keep = |v: Var| v == Var::In || v == Var::Out;
    let mut hulls = Vec::new();
    for disjunct in f.to_dnf(limits.dnf_cap)? {
        let Some(projected) =
            project(&disjunct, &keep, &|_| true, PROJECTION_CAP).map_err(|_| InvariantError::NonElementary)?
        else {
            continue;
        };
        if let Some(h) = hull(&projected, fresh)? {
            hulls.push(h);
        }
    }
    if hulls.is_empty() {
        return Ok(TransitionInvariant::Relational(kappa_zero_identity(kappa)));
    }
    let mut exits: Vec<Interval> = hulls.iter().map(|h| h.exit).collect();
    exits.sort();
    exits.dedup();
    let mut entries: Vec<Interval> = hulls.iter().map(|h| h.entry).collect();
    entries.sort();
    entries.dedup();
    let dlo = hulls.iter().map(|h| h.delta_lo).collect::<Option<Vec<_>>>();
    let dhi = hulls.iter().map(|h| h.delta_hi).collect::<Option<Vec<_>>>();
    let mut parts = vec![
        kappa_positive(kappa),
        interval_formula(Var::Out, &exits),
        interval_formula(Var::In, &entries),
    ];
    match (dlo.map(|v| *v.iter().min().unwrap()), dhi.map(|v| *v.iter().max().unwrap())) {
        (Some(l), Some(h)) if l == h => {
            parts.push(ElementaryRelation::Delta(Cmp::Eq, l).accelerate(kappa));
        }
        (l, h) => {
            if let Some(l) = l {
                parts.push(ElementaryRelation::Delta(Cmp::Ge, l).accelerate(kappa));
            }
            if let Some(h) = h {
                parts.push(ElementaryRelation::Delta(Cmp::Le, h).accelerate(kappa));
            }
        }
    }
    Ok(TransitionInvariant::Relational(Formula::or([
        kappa_zero_identity(kappa),
        Formula::and(parts),
    ])))
}

/// Eliminates `∃ kappa >= 0` disjunct by disjunct.
pub fn abstract_kappa(
    phi: &TransitionInvariant,
    kappa: Var,
    fresh: &mut FreshVars,
    limits: Limits,
) -> Result<TransitionInvariant, InvariantError> {
    let f = phi.to_formula(fresh);
    let mut out = Vec::new();
    for disjunct in f.to_dnf(limits.dnf_cap)? {
        let Some(projected) = project(&disjunct, &|v| v != kappa, &|_| true, PROJECTION_CAP)
            .map_err(|_| InvariantError::NonElementary)?
        else {
            continue;
        };
        out.push(Formula::and(projected.into_iter().map(Formula::atom)));
    }
    Ok(TransitionInvariant::Relational(Formula::or(out)))
}

/// Exact relation for a loop whose body is the straight cycle `cycle`.
fn simple_loop(
    ettd: &Ettd,
    cycle: &[EdgeId],
    l: u32,
    kappa: Var,
    fresh: &mut FreshVars,
) -> Result<TransitionInvariant, InvariantError> {
    let term = accelerate(ettd, cycle, l, kappa)?;
    let body = rewrite_maxplus(&term, Cmp::Eq, &np(), fresh);
    Ok(TransitionInvariant::Relational(Formula::or([
        kappa_zero_identity(kappa),
        Formula::and([kappa_positive(kappa), body]),
    ])))
}

/// Transition invariant of `r` for local state `l`, without entry and exit
/// conditions.
pub fn summarize(
    ettd: &Ettd,
    r: &EdgeRegex,
    l: u32,
    fresh: &mut FreshVars,
    limits: Limits,
) -> Result<TransitionInvariant, InvariantError> {
    summarize_cached(ettd, r, l, fresh, limits, &mut HashMap::new())
}

/// Relations of inner loops by loop shape and local state.
type InnerCache = HashMap<(EdgeRegex, u32), TransitionInvariant>;

fn summarize_cached(
    ettd: &Ettd,
    r: &EdgeRegex,
    l: u32,
    fresh: &mut FreshVars,
    limits: Limits,
    cache: &mut InnerCache,
) -> Result<TransitionInvariant, InvariantError> {
    let mut phi = TransitionInvariant::identity();
    for seg in segment(r).iter().rev() {
        let rel = match seg {
            Segment::Straight(edges) => {
                TransitionInvariant::Functional(compact_summary(ettd, edges, l).term())
            }
            Segment::Loop {
                id,
                outermost: true,
                body,
            } => loop_relation(ettd, body, l, Var::Kappa(*id), fresh, limits, cache)?,
            Segment::Loop { body, .. } => inner_loop(ettd, body, l, fresh, limits, cache)?,
        };
        phi = compose(&phi, &rel, fresh);
    }
    Ok(phi)
}

fn loop_relation(
    ettd: &Ettd,
    body: &EdgeRegex,
    l: u32,
    kappa: Var,
    fresh: &mut FreshVars,
    limits: Limits,
    cache: &mut InnerCache,
) -> Result<TransitionInvariant, InvariantError> {
    if body.is_star_free() {
        simple_loop(ettd, &body.literals(), l, kappa, fresh)
    } else {
        let inner = body_relation(ettd, body, l, fresh, limits, cache)?;
        solve_recurrence(&inner, kappa, fresh, limits)
    }
}

/// Summary of a loop body projected onto `n`, `n'` after every step.
fn body_relation(
    ettd: &Ettd,
    body: &EdgeRegex,
    l: u32,
    fresh: &mut FreshVars,
    limits: Limits,
    cache: &mut InnerCache,
) -> Result<TransitionInvariant, InvariantError> {
    let mut phi = TransitionInvariant::identity();
    for seg in segment(body).iter().rev() {
        let rel = match seg {
            Segment::Straight(edges) => {
                TransitionInvariant::Functional(compact_summary(ettd, edges, l).term())
            }
            Segment::Loop { body, .. } => inner_loop(ettd, body, l, fresh, limits, cache)?,
        };
        phi = match compose(&phi, &rel, fresh) {
            f @ TransitionInvariant::Functional(_) => f,
            r => project_onto_counters(&r, fresh, limits)?,
        };
    }
    Ok(phi)
}

/// Relation of a nested loop with its iteration count abstracted.
fn inner_loop(
    ettd: &Ettd,
    body: &EdgeRegex,
    l: u32,
    fresh: &mut FreshVars,
    limits: Limits,
    cache: &mut InnerCache,
) -> Result<TransitionInvariant, InvariantError> {
    let key = (shape(body), l);
    if let Some(rel) = cache.get(&key) {
        return Ok(rel.clone());
    }
    let kappa = fresh.fresh();
    let rec = loop_relation(ettd, body, l, kappa, fresh, limits, cache)?;
    let rel = project_onto_counters(&rec, fresh, limits)?;
    cache.insert(key, rel.clone());
    Ok(rel)
}

/// `r` with loop ids and outermost flags cleared.
fn shape(r: &EdgeRegex) -> EdgeRegex {
    match r {
        EdgeRegex::Lit(_) => r.clone(),
        EdgeRegex::Concat(xs) => EdgeRegex::Concat(xs.iter().map(shape).collect()),
        EdgeRegex::Star { body, .. } => EdgeRegex::Star {
            id: 0,
            outermost: false,
            body: Box::new(shape(body)),
        },
    }
}

/// Eliminates every variable except `n` and `n'`, disjunct by disjunct.
fn project_onto_counters(
    phi: &TransitionInvariant,
    fresh: &mut FreshVars,
    limits: Limits,
) -> Result<TransitionInvariant, InvariantError> {
    let f = phi.to_formula(fresh);
    let keep = |v: Var| v == Var::In || v == Var::Out;
    let mut out = Vec::new();
    for disjunct in f.to_dnf(limits.dnf_cap)? {
        let Some(projected) = project(&disjunct, &keep, &|_| true, PROJECTION_CAP)
            .map_err(|_| InvariantError::NonElementary)?
        else {
            continue;
        };
        out.push(Formula::and(projected.into_iter().map(Formula::atom)));
    }
    Ok(TransitionInvariant::Relational(Formula::or(out)))
}

/// Entry value of the counter for `l` at the target end of the path.
pub fn entry_value(l: u32, target_local: u32) -> i64 {
    i64::from(l == target_local)
}

/// Path summary for `l` over the variable `n'_l`: the relation of `r`
/// started at the target's entry value, with the initial-state exit
/// condition.
pub fn path_summary(
    ettd: &Ettd,
    r: &EdgeRegex,
    l: u32,
    fresh: &mut FreshVars,
    limits: Limits,
) -> Result<Formula, InvariantError> {
    let target = ettd.target().expect("ETTD without target");
    let initial = ettd.initial();
    let x = LinExpr::constant(entry_value(l, target.local));
    let out = Var::Local(l);
    let phi = summarize(ettd, r, l, fresh, limits)?;
    let body = match phi {
        TransitionInvariant::Functional(t) => {
            rewrite_maxplus(&t.with_input(&x), Cmp::Eq, &LinExpr::var(out), fresh)
        }
        TransitionInvariant::Relational(f) => f
            .substitute(Var::In, &x)
            .rename(&|v| if v == Var::Out { out } else { v }),
    };
    let exit = if l == initial.local {
        Atom::ge(LinExpr::var(out), LinExpr::constant(1))
    } else {
        Atom::eq(LinExpr::var(out), LinExpr::zero())
    };
    Ok(Formula::and([body, Formula::atom(exit)]))
}

/// Conjunction of the path summaries of all local states.
pub fn reachability_formula(
    ettd: &Ettd,
    r: &EdgeRegex,
    limits: Limits,
) -> Result<Formula, InvariantError> {
    let mut fresh = FreshVars::new();
    let mut parts = Vec::new();
    for l in 0..ettd.ttd().num_local() {
        parts.push(path_summary(ettd, r, l, &mut fresh, limits)?);
    }
    Ok(Formula::and(parts))
}
