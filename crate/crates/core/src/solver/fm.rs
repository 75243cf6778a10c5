//! Fourier–Motzkin projection of integer conjunctions. The result
//! over-approximates the integer projection and is tightened by gcd rounding.

use std::collections::BTreeSet;

use num_integer::Integer;
use thiserror::Error;

use crate::logic::{Atom, Cmp, LinExpr, Var};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("projection exceeds {cap} constraints")]
pub struct ProjectionTooLarge {
    pub cap: usize,
}

/// Normalized constraint: `expr <= 0` or `expr = 0`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Con {
    expr: LinExpr,
    eq: bool,
}

/// Puts an atom into `<= 0` / `= 0` form with coprime coefficients.
/// Returns `Err(())` if it is unsatisfiable over the integers and `Ok(None)`
/// if it is trivially true.
fn normalize(a: &Atom) -> Result<Option<Con>, ()> {
    let (expr, eq) = match a.cmp {
        Cmp::Le => (a.expr.clone(), false),
        Cmp::Ge => (a.expr.scale(-1), false),
        Cmp::Eq => (a.expr.clone(), true),
    };
    let g = expr.terms().fold(0i64, |g, (_, c)| g.gcd(&c));
    let c = expr.get_constant();
    if g == 0 {
        let ok = if eq { c == 0 } else { c <= 0 };
        return if ok { Ok(None) } else { Err(()) };
    }
    if eq {
        if c % g != 0 {
            return Err(());
        }
        let mut e = LinExpr::constant(c / g);
        for (v, k) in expr.terms() {
            e.add_term(k / g, v);
        }
        // canonical sign: first coefficient positive
        let e = if e.terms().next().is_some_and(|(_, k)| k < 0) {
            e.scale(-1)
        } else {
            e
        };
        Ok(Some(Con { expr: e, eq: true }))
    } else {
        let mut e = LinExpr::constant(Integer::div_ceil(&c, &g));
        for (v, k) in expr.terms() {
            e.add_term(k / g, v);
        }
        Ok(Some(Con { expr: e, eq: false }))
    }
}

fn to_atom(c: &Con) -> Atom {
    Atom {
        expr: c.expr.clone(),
        cmp: if c.eq { Cmp::Eq } else { Cmp::Le },
    }
}

/// Eliminates every variable not satisfying `keep`. Variables satisfying
/// `nonneg` are constrained to be non-negative. Returns `Ok(None)` if the
/// conjunction is found unsatisfiable.
pub fn project(
    atoms: &[Atom],
    keep: &dyn Fn(Var) -> bool,
    nonneg: &dyn Fn(Var) -> bool,
    cap: usize,
) -> Result<Option<Vec<Atom>>, ProjectionTooLarge> {
    let mut cons: BTreeSet<Con> = BTreeSet::new();
    let mut vars: BTreeSet<Var> = BTreeSet::new();
    for a in atoms {
        vars.extend(a.expr.vars());
    }
    let bounds = vars
        .iter()
        .filter(|v| nonneg(**v))
        .map(|&v| Atom::ge(LinExpr::var(v), LinExpr::zero()));
    for a in atoms.iter().cloned().chain(bounds) {
        match normalize(&a) {
            Err(()) => return Ok(None),
            Ok(None) => {}
            Ok(Some(c)) => {
                cons.insert(c);
            }
        }
    }
    let mut to_elim: Vec<Var> = vars.into_iter().filter(|v| !keep(*v)).collect();
    while !to_elim.is_empty() {
        // prefer a variable fixed by an equality, else the cheapest pair count
        let mut choice = None;
        for (i, v) in to_elim.iter().enumerate() {
            if cons.iter().any(|c| c.eq && c.expr.coeff(*v) != 0) {
                choice = Some((i, 0usize));
                break;
            }
            let (mut lo, mut hi) = (0usize, 0usize);
            for c in &cons {
                let k = c.expr.coeff(*v);
                if k > 0 {
                    hi += 1;
                } else if k < 0 {
                    lo += 1;
                }
            }
            let cost = lo * hi;
            if choice.is_none_or(|(_, best)| cost < best) {
                choice = Some((i, cost));
            }
        }
        let v = to_elim.swap_remove(choice.unwrap().0);
        cons = match eliminate(&cons, v) {
            Some(c) => c,
            None => return Ok(None),
        };
        if cons.len() > cap {
            return Err(ProjectionTooLarge { cap });
        }
    }
    // a contradiction among the kept variables shows up once they are gone too
    let mut rest = cons.clone();
    let kept: BTreeSet<Var> = cons.iter().flat_map(|c| c.expr.vars().collect::<Vec<_>>()).collect();
    for v in kept {
        rest = match eliminate(&rest, v) {
            Some(c) if c.len() <= cap => c,
            Some(_) => break,
            None => return Ok(None),
        };
    }
    Ok(Some(cons.iter().map(to_atom).collect()))
}

fn eliminate(cons: &BTreeSet<Con>, v: Var) -> Option<BTreeSet<Con>> {
    let mut out = BTreeSet::new();
    let push = |out: &mut BTreeSet<Con>, a: Atom| -> bool {
        match normalize(&a) {
            Err(()) => false,
            Ok(None) => true,
            Ok(Some(c)) => {
                out.insert(c);
                true
            }
        }
    };
    if let Some(def) = cons.iter().find(|c| c.eq && c.expr.coeff(v) != 0) {
        let a = def.expr.coeff(v);
        let (def_expr, a) = if a < 0 { (def.expr.scale(-1), -a) } else { (def.expr.clone(), a) };
        for c in cons {
            if std::ptr::eq(c, def) {
                continue;
            }
            let k = c.expr.coeff(v);
            if k == 0 {
                out.insert(c.clone());
                continue;
            }
            // a·c - k·def cancels v; a > 0 keeps the direction
            let e = c.expr.scale(a).minus(&def_expr.scale(k));
            let cmp = if c.eq { Cmp::Eq } else { Cmp::Le };
            if !push(&mut out, Atom { expr: e, cmp }) {
                return None;
            }
        }
        return Some(out);
    }
    let mut uppers = Vec::new();
    let mut lowers = Vec::new();
    for c in cons {
        let k = c.expr.coeff(v);
        if k > 0 {
            uppers.push(c);
        } else if k < 0 {
            lowers.push(c);
        } else {
            out.insert(c.clone());
        }
    }
    for u in &uppers {
        for l in &lowers {
            let a = u.expr.coeff(v);
            let b = -l.expr.coeff(v);
            let e = u.expr.scale(b).plus(&l.expr.scale(a));
            if !push(&mut out, Atom { expr: e, cmp: Cmp::Le }) {
                return None;
            }
        }
    }
    Some(out)
}
