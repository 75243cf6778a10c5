//! Satisfiability of linear integer formulas over the naturals, model
//! enumeration ordered by total loop count, and SMT-LIB export.
//!
//! The search branches lazily over disjunctions, propagating equalities and
//! bounds, pruning with an exact rational relaxation and closing leaves with
//! branch and bound.

mod fm;
mod simplex;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use thiserror::Error;

use crate::logic::{Atom, Cmp, Formula, LinExpr, Var};
use simplex::{Rel, Row};

pub use fm::{project, ProjectionTooLarge};

/// Assignment of naturals to variables.
pub type Model = BTreeMap<Var, i64>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    Sat(Model),
    Unsat,
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatResult::Sat(_))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error("solver resource limit exceeded: {0}")]
    ResourceExceeded(&'static str),
}

/// Search limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_depth: usize,
    pub max_nodes: usize,
    pub dnf_cap: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_depth: 64,
            max_nodes: 20_000,
            dnf_cap: 4096,
        }
    }
}

struct Budget {
    nodes: usize,
    limits: Limits,
}

impl Budget {
    fn tick(&mut self) -> Result<(), SolverError> {
        self.nodes += 1;
        if self.nodes > self.limits.max_nodes {
            Err(SolverError::ResourceExceeded("node limit"))
        } else {
            Ok(())
        }
    }
}

/// Conjunction of atoms with eliminated variables and per-variable bounds.
#[derive(Debug, Clone, Default)]
struct Store {
    subst: BTreeMap<Var, LinExpr>,
    lo: BTreeMap<Var, i64>,
    hi: BTreeMap<Var, i64>,
    atoms: BTreeSet<Atom>,
}

impl Store {
    fn lo(&self, v: Var) -> i64 {
        self.lo.get(&v).copied().unwrap_or(0)
    }

    fn apply_subst(&self, a: &Atom) -> Atom {
        let mut a = a.clone();
        let hits: Vec<Var> = a.expr.vars().filter(|v| self.subst.contains_key(v)).collect();
        for v in hits {
            a = a.substitute(v, &self.subst[&v]);
        }
        a
    }

    /// Adds atoms; returns `false` on a conflict.
    fn add(&mut self, atoms: impl IntoIterator<Item = Atom>) -> bool {
        let mut queue: Vec<Atom> = atoms.into_iter().collect();
        while let Some(a) = queue.pop() {
            let a = self.apply_subst(&a);
            let Some((expr, cmp)) = normalize(&a) else {
                return false;
            };
            let nvars = expr.terms().count();
            if nvars == 0 {
                continue;
            }
            if nvars == 1 {
                let (v, k) = expr.terms().next().unwrap();
                let c = expr.get_constant();
                // k·v + c ⋈ 0 with k = ±1 after normalization
                let (lo, hi) = match (cmp, k) {
                    (Cmp::Eq, _) => (Some(-c * k), Some(-c * k)),
                    (Cmp::Le, 1) => (None, Some(-c)),
                    (Cmp::Le, _) => (Some(c), None),
                    (Cmp::Ge, _) => unreachable!(),
                };
                if let Some(l) = lo {
                    if l > self.lo(v) {
                        self.lo.insert(v, l);
                    }
                }
                if let Some(h) = hi {
                    if self.hi.get(&v).is_none_or(|&x| h < x) {
                        self.hi.insert(v, h);
                    }
                }
                let l = self.lo(v);
                match self.hi.get(&v) {
                    Some(&h) if h < l => return false,
                    Some(&h) if h == l => {
                        self.eliminate(v, LinExpr::constant(l), &mut queue);
                    }
                    _ => {}
                }
                continue;
            }
            if cmp == Cmp::Eq {
                let pick = expr
                    .terms()
                    .filter(|(_, k)| k.abs() == 1)
                    .min_by_key(|(v, _)| (v.is_kappa(), *v));
                if let Some((v, k)) = pick {
                    // k·v + rest = 0  ==>  v = -k·rest
                    let rest = expr.minus(&LinExpr::term(k, v));
                    self.eliminate(v, rest.scale(-k), &mut queue);
                    continue;
                }
            }
            self.atoms.insert(Atom { expr, cmp });
        }
        true
    }

    fn eliminate(&mut self, v: Var, e: LinExpr, queue: &mut Vec<Atom>) {
        for x in self.subst.values_mut() {
            *x = x.substitute(v, &e);
        }
        self.subst.insert(v, e.clone());
        let lo = self.lo.remove(&v).unwrap_or(0);
        queue.push(Atom::ge(e.clone(), LinExpr::constant(lo)));
        if let Some(h) = self.hi.remove(&v) {
            queue.push(Atom::le(e, LinExpr::constant(h)));
        }
        let touched: Vec<Atom> = self
            .atoms
            .iter()
            .filter(|a| a.expr.coeff(v) != 0)
            .cloned()
            .collect();
        for a in touched {
            self.atoms.remove(&a);
            queue.push(a);
        }
    }

    fn live_vars(&self) -> Vec<Var> {
        let mut vs: BTreeSet<Var> = BTreeSet::new();
        for a in &self.atoms {
            vs.extend(a.expr.vars());
        }
        vs.extend(self.lo.keys().copied());
        vs.extend(self.hi.keys().copied());
        vs.into_iter().collect()
    }

    fn rows(&self, vars: &[Var]) -> Vec<Row> {
        let idx: BTreeMap<Var, usize> = vars.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let mut rows = Vec::new();
        for a in &self.atoms {
            rows.push(Row {
                coeffs: a.expr.terms().map(|(v, k)| (idx[&v], k)).collect(),
                rel: match a.cmp {
                    Cmp::Le => Rel::Le,
                    Cmp::Eq => Rel::Eq,
                    Cmp::Ge => Rel::Ge,
                },
                rhs: -a.expr.get_constant(),
            });
        }
        for (v, &l) in &self.lo {
            if l > 0 {
                rows.push(Row {
                    coeffs: vec![(idx[v], 1)],
                    rel: Rel::Ge,
                    rhs: l,
                });
            }
        }
        for (v, &h) in &self.hi {
            rows.push(Row {
                coeffs: vec![(idx[v], 1)],
                rel: Rel::Le,
                rhs: h,
            });
        }
        rows
    }

    fn relaxation_feasible(&self, budget: &mut Budget) -> Result<bool, SolverError> {
        if self.atoms.is_empty() {
            return Ok(true);
        }
        budget.tick()?;
        let vars = self.live_vars();
        Ok(simplex::feasible(vars.len(), &self.rows(&vars)).is_some())
    }

    /// Branch and bound over the remaining constraints.
    fn integer_model(&self, budget: &mut Budget) -> Result<Option<Model>, SolverError> {
        let vars = self.live_vars();
        let base = self.rows(&vars);
        let Some(vals) = branch_and_bound(vars.len(), base, 0, budget)? else {
            return Ok(None);
        };
        let mut model: Model = vars.iter().copied().zip(vals).collect();
        for (v, e) in &self.subst {
            let x = e.eval(&|u| model.get(&u).copied().unwrap_or(0));
            model.insert(*v, x);
        }
        Ok(Some(model))
    }
}

/// Normalizes to `expr <= 0` or `expr = 0` with coprime coefficients.
/// `None` means unsatisfiable.
fn normalize(a: &Atom) -> Option<(LinExpr, Cmp)> {
    let (expr, cmp) = match a.cmp {
        Cmp::Ge => (a.expr.scale(-1), Cmp::Le),
        c => (a.expr.clone(), c),
    };
    let g = expr.terms().fold(0i64, |g, (_, k)| g.gcd(&k));
    let c = expr.get_constant();
    if g == 0 {
        let ok = match cmp {
            Cmp::Eq => c == 0,
            _ => c <= 0,
        };
        return ok.then(|| (LinExpr::zero(), cmp));
    }
    let c2 = match cmp {
        Cmp::Eq => {
            if c % g != 0 {
                return None;
            }
            c / g
        }
        _ => Integer::div_ceil(&c, &g),
    };
    let mut e = LinExpr::constant(c2);
    for (v, k) in expr.terms() {
        e.add_term(k / g, v);
    }
    if cmp == Cmp::Eq && e.terms().next().is_some_and(|(_, k)| k < 0) {
        e = e.scale(-1);
    }
    Some((e, cmp))
}

fn branch_and_bound(
    n: usize,
    rows: Vec<Row>,
    depth: usize,
    budget: &mut Budget,
) -> Result<Option<Vec<i64>>, SolverError> {
    budget.tick()?;
    let Some(x) = simplex::feasible(n, &rows) else {
        return Ok(None);
    };
    let frac = x.iter().position(|v| !v.is_integer());
    let Some(j) = frac else {
        return Ok(Some(x.iter().map(to_i64).collect::<Option<Vec<_>>>().ok_or(
            SolverError::ResourceExceeded("value out of range"),
        )?));
    };
    if depth >= budget.limits.max_depth {
        return Err(SolverError::ResourceExceeded("branch depth"));
    }
    let fl = to_i64(&x[j].floor()).ok_or(SolverError::ResourceExceeded("value out of range"))?;
    let mut down = rows.clone();
    down.push(Row {
        coeffs: vec![(j, 1)],
        rel: Rel::Le,
        rhs: fl,
    });
    if let Some(m) = branch_and_bound(n, down, depth + 1, budget)? {
        return Ok(Some(m));
    }
    let mut up = rows;
    up.push(Row {
        coeffs: vec![(j, 1)],
        rel: Rel::Ge,
        rhs: fl + 1,
    });
    branch_and_bound(n, up, depth + 1, budget)
}

fn to_i64(x: &BigRational) -> Option<i64> {
    if x.is_negative() {
        return None;
    }
    x.to_integer().to_i64()
}

/// Splits a formula into its conjunctive atoms and pending disjunctions.
fn flatten<'a>(f: &'a Formula, atoms: &mut Vec<Atom>, ors: &mut Vec<&'a [Formula]>) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(a) => {
            atoms.push(a.clone());
            true
        }
        Formula::And(fs) => fs.iter().all(|g| flatten(g, atoms, ors)),
        Formula::Or(fs) => {
            ors.push(fs);
            true
        }
    }
}

/// Value range of `e` under the store's bounds; `None` means unbounded.
fn range(store: &Store, e: &LinExpr) -> (Option<i64>, Option<i64>) {
    let c = e.get_constant();
    let (mut lo, mut hi) = (Some(c), Some(c));
    for (v, k) in e.terms() {
        let (vl, vh) = (Some(store.lo(v)), store.hi.get(&v).copied());
        let (tl, th) = if k > 0 {
            (vl.map(|x| x * k), vh.map(|x| x * k))
        } else {
            (vh.map(|x| x * k), vl.map(|x| x * k))
        };
        lo = lo.zip(tl).map(|(a, b)| a + b);
        hi = hi.zip(th).map(|(a, b)| a + b);
    }
    (lo, hi)
}

/// `Some(b)` if the store's bounds decide the atom.
fn atom_status(store: &Store, a: &Atom) -> Option<bool> {
    let a = store.apply_subst(a);
    let (lo, hi) = range(store, &a.expr);
    let pos = lo.is_some_and(|x| x > 0);
    let neg = hi.is_some_and(|x| x < 0);
    let nonpos = hi.is_some_and(|x| x <= 0);
    let nonneg = lo.is_some_and(|x| x >= 0);
    match a.cmp {
        Cmp::Le if pos => Some(false),
        Cmp::Le if nonpos => Some(true),
        Cmp::Ge if neg => Some(false),
        Cmp::Ge if nonneg => Some(true),
        Cmp::Eq if pos || neg => Some(false),
        Cmp::Eq if nonpos && nonneg => Some(true),
        _ => None,
    }
}

/// `Some(b)` if the store's bounds decide a branch on their own.
fn branch_status(store: &Store, f: &Formula) -> Option<bool> {
    match f {
        Formula::True => Some(true),
        Formula::False => Some(false),
        Formula::Atom(a) => atom_status(store, a),
        Formula::And(fs) => {
            let mut all = true;
            for g in fs {
                match branch_status(store, g) {
                    Some(false) => return Some(false),
                    Some(true) => {}
                    None => all = false,
                }
            }
            all.then_some(true)
        }
        Formula::Or(fs) => {
            let mut none = true;
            for g in fs {
                match branch_status(store, g) {
                    Some(true) => return Some(true),
                    Some(false) => {}
                    None => none = false,
                }
            }
            none.then_some(false)
        }
    }
}

/// Adds `f` to the store, queueing its disjunctions; `false` on conflict.
fn commit<'a>(
    store: &mut Store,
    f: &'a Formula,
    pending: &mut Vec<&'a [Formula]>,
    budget: &mut Budget,
) -> Result<bool, SolverError> {
    let mut atoms = Vec::new();
    if !flatten(f, &mut atoms, pending) {
        return Ok(false);
    }
    let grew = !atoms.is_empty();
    if !store.add(atoms) {
        return Ok(false);
    }
    Ok(!grew || store.relaxation_feasible(budget)?)
}

/// Whether the top-level atoms of `f` are consistent with the store's
/// relaxation.
fn lookahead(store: &Store, f: &Formula, budget: &mut Budget) -> Result<bool, SolverError> {
    let mut atoms = Vec::new();
    let mut ors = Vec::new();
    if !flatten(f, &mut atoms, &mut ors) {
        return Ok(false);
    }
    if atoms.is_empty() {
        return Ok(true);
    }
    let mut st = store.clone();
    Ok(st.add(atoms) && st.relaxation_feasible(budget)?)
}

fn search(
    mut store: Store,
    mut pending: Vec<&[Formula]>,
    budget: &mut Budget,
) -> Result<Option<Model>, SolverError> {
    budget.tick()?;
    // propagate: drop satisfied disjunctions, commit forced branches
    let branch = loop {
        let mut best: Option<(usize, Vec<&Formula>)> = None;
        let mut forced = None;
        let mut satisfied = Vec::new();
        for (i, ors) in pending.iter().enumerate() {
            let mut viable = Vec::new();
            let mut done = false;
            for child in ors.iter() {
                match branch_status(&store, child) {
                    Some(true) => {
                        done = true;
                        break;
                    }
                    Some(false) => {}
                    None => viable.push(child),
                }
            }
            if !done && viable.len() > 1 {
                let mut kept = Vec::with_capacity(viable.len());
                for child in viable {
                    if lookahead(&store, child, budget)? {
                        kept.push(child);
                    }
                }
                viable = kept;
            }
            if done {
                satisfied.push(i);
                continue;
            }
            match viable.len() {
                0 => return Ok(None),
                1 => {
                    forced = Some((i, viable[0]));
                    break;
                }
                n if best.as_ref().is_none_or(|(_, b)| n < b.len()) => best = Some((i, viable)),
                _ => {}
            }
        }
        if let Some((i, child)) = forced {
            pending.remove(i);
            if !commit(&mut store, child, &mut pending, budget)? {
                return Ok(None);
            }
            continue;
        }
        let best = best.map(|(i, v)| (pending[i], v));
        for i in satisfied.into_iter().rev() {
            pending.remove(i);
        }
        match best {
            None => return store.integer_model(budget),
            Some((ors, viable)) => {
                pending.retain(|p| !std::ptr::eq(*p, ors));
                break viable;
            }
        }
    };
    for child in branch {
        let mut st = store.clone();
        let mut rest = pending.clone();
        if !commit(&mut st, child, &mut rest, budget)? {
            continue;
        }
        if let Some(m) = search(st, rest, budget)? {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

fn check_sat_budget(f: &Formula, budget: &mut Budget) -> Result<SatResult, SolverError> {
    let mut atoms = Vec::new();
    let mut ors = Vec::new();
    if !flatten(f, &mut atoms, &mut ors) {
        return Ok(SatResult::Unsat);
    }
    let mut store = Store::default();
    if !store.add(atoms) || !store.relaxation_feasible(budget)? {
        return Ok(SatResult::Unsat);
    }
    match search(store, ors, budget)? {
        None => Ok(SatResult::Unsat),
        Some(mut model) => {
            for v in f.vars() {
                model.entry(v).or_insert(0);
            }
            model.retain(|v, _| f.vars().contains(v));
            assert!(f.eval_map(&model), "solver produced a non-model");
            Ok(SatResult::Sat(model))
        }
    }
}

/// Decides satisfiability over the naturals and returns a model if one
/// exists.
pub fn check_sat(f: &Formula, limits: Limits) -> Result<SatResult, SolverError> {
    check_sat_metered(f, limits, &mut 0)
}

/// As [`check_sat`], adding the number of search nodes spent to `used`.
pub fn check_sat_metered(
    f: &Formula,
    limits: Limits,
    used: &mut usize,
) -> Result<SatResult, SolverError> {
    let mut budget = Budget { nodes: 0, limits };
    let r = check_sat_budget(f, &mut budget);
    *used += budget.nodes;
    r
}

fn total(kappas: &[Var]) -> LinExpr {
    kappas
        .iter()
        .fold(LinExpr::zero(), |e, k| e.plus(&LinExpr::var(*k)))
}

fn with_total(f: &Formula, kappas: &[Var], cmp: Cmp, t: i64) -> Formula {
    Formula::and([
        f.clone(),
        Formula::atom(Atom::new(total(kappas), cmp, LinExpr::constant(t))),
    ])
}

/// Up to `limit` models with pairwise distinct projections onto `kappas`,
/// in ascending order of `Σ kappas`, ties broken lexicographically.
pub fn enumerate_models(
    f: &Formula,
    kappas: &[Var],
    limit: usize,
    limits: Limits,
) -> Result<Vec<Model>, SolverError> {
    enumerate_models_metered(f, kappas, limit, limits, &mut 0)
}

/// As [`enumerate_models`], adding the number of search nodes spent to
/// `used`.
pub fn enumerate_models_metered(
    f: &Formula,
    kappas: &[Var],
    limit: usize,
    limits: Limits,
    used: &mut usize,
) -> Result<Vec<Model>, SolverError> {
    let mut budget = Budget { nodes: 0, limits };
    let r = enumerate_budget(f, kappas, limit, &mut budget);
    *used += budget.nodes;
    r
}

fn enumerate_budget(
    f: &Formula,
    kappas: &[Var],
    limit: usize,
    budget: &mut Budget,
) -> Result<Vec<Model>, SolverError> {
    let mut out = Vec::new();
    if limit == 0 {
        return Ok(out);
    }
    let SatResult::Sat(first) = check_sat_budget(f, budget)? else {
        return Ok(out);
    };
    if kappas.is_empty() {
        out.push(first);
        return Ok(out);
    }
    let sum = |m: &Model| kappas.iter().map(|k| m.get(k).copied().unwrap_or(0)).sum::<i64>();
    let mut t = min_total(f, kappas, 0, sum(&first), budget)?;
    loop {
        let mut fixed = Vec::new();
        enumerate_fixed_total(f, kappas, t, &mut fixed, &mut out, limit, budget)?;
        if out.len() >= limit {
            break;
        }
        let SatResult::Sat(m) = check_sat_budget(&with_total(f, kappas, Cmp::Ge, t + 1), budget)? else {
            break;
        };
        t = min_total(f, kappas, t + 1, sum(&m), budget)?;
    }
    Ok(out)
}

/// Least `t` in `[lo, hi]` with `f ∧ Σκ = t` satisfiable, given that `hi` is.
fn min_total(
    f: &Formula,
    kappas: &[Var],
    mut lo: i64,
    mut hi: i64,
    budget: &mut Budget,
) -> Result<i64, SolverError> {
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let g = Formula::and([
            with_total(f, kappas, Cmp::Ge, lo),
            with_total(&Formula::True, kappas, Cmp::Le, mid),
        ]);
        if check_sat_budget(&g, budget)?.is_sat() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

fn enumerate_fixed_total(
    f: &Formula,
    kappas: &[Var],
    t: i64,
    fixed: &mut Vec<i64>,
    out: &mut Vec<Model>,
    limit: usize,
    budget: &mut Budget,
) -> Result<(), SolverError> {
    if out.len() >= limit {
        return Ok(());
    }
    let used: i64 = fixed.iter().sum();
    let mut g = with_total(f, kappas, Cmp::Eq, t);
    for (k, v) in kappas.iter().zip(fixed.iter()) {
        g = Formula::and([g, Formula::atom(Atom::eq(LinExpr::var(*k), LinExpr::constant(*v)))]);
    }
    let SatResult::Sat(m) = check_sat_budget(&g, budget)? else {
        return Ok(());
    };
    if fixed.len() + 1 >= kappas.len() {
        out.push(m);
        return Ok(());
    }
    for v in 0..=(t - used) {
        fixed.push(v);
        enumerate_fixed_total(f, kappas, t, fixed, out, limit, budget)?;
        fixed.pop();
        if out.len() >= limit {
            break;
        }
    }
    Ok(())
}

fn smt_int(c: i64) -> String {
    if c < 0 {
        format!("(- {})", -c)
    } else {
        c.to_string()
    }
}

fn smt_expr(e: &LinExpr) -> String {
    let terms: Vec<String> = e
        .terms()
        .map(|(v, k)| {
            if k == 1 {
                v.smt_name()
            } else {
                format!("(* {} {})", smt_int(k), v.smt_name())
            }
        })
        .collect();
    match terms.len() {
        0 => "0".into(),
        1 => terms[0].clone(),
        _ => format!("(+ {})", terms.join(" ")),
    }
}

fn smt_formula(f: &Formula, out: &mut String) {
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Atom(a) => {
            let c = a.expr.get_constant();
            let lhs = a.expr.plus_const(-c);
            let op = match a.cmp {
                Cmp::Le => "<=",
                Cmp::Eq => "=",
                Cmp::Ge => ">=",
            };
            let _ = write!(out, "({op} {} {})", smt_expr(&lhs), smt_int(-c));
        }
        Formula::And(fs) | Formula::Or(fs) => {
            out.push_str(if matches!(f, Formula::And(_)) { "(and" } else { "(or" });
            for g in fs {
                out.push(' ');
                smt_formula(g, out);
            }
            out.push(')');
        }
    }
}

/// SMT-LIB 2 script asserting `f` over naturals.
pub fn to_smtlib(f: &Formula) -> String {
    let mut s = String::from("(set-logic QF_LIA)\n");
    let vars = f.vars();
    for v in &vars {
        let _ = writeln!(s, "(declare-fun {} () Int)", v.smt_name());
    }
    for v in &vars {
        let _ = writeln!(s, "(assert (>= {} 0))", v.smt_name());
    }
    s.push_str("(assert ");
    smt_formula(f, &mut s);
    s.push_str(")\n(check-sat)\n(get-model)\n");
    s
}
