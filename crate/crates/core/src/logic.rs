//! Linear integer constraints over natural-valued variables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Variables of summary and invariant formulas. All range over naturals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    /// Counter value entering a relation (backward direction).
    In,
    /// Counter value leaving a relation.
    Out,
    /// Number of threads required in local state `l` at the path start.
    Local(u32),
    /// Iteration count of the loop with this id.
    Kappa(u32),
    /// Auxiliary variable.
    Fresh(u32),
}

impl Var {
    pub fn is_kappa(&self) -> bool {
        matches!(self, Var::Kappa(_))
    }

    /// SMT-LIB symbol.
    pub fn smt_name(&self) -> String {
        match self {
            Var::In => "n".into(),
            Var::Out => "np".into(),
            Var::Local(l) => format!("np_{l}"),
            Var::Kappa(k) => format!("k_{k}"),
            Var::Fresh(v) => format!("v_{v}"),
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::In => write!(f, "n"),
            Var::Out => write!(f, "n'"),
            Var::Local(l) => write!(f, "n'{l}"),
            Var::Kappa(k) => write!(f, "k{k}"),
            Var::Fresh(v) => write!(f, "v{v}"),
        }
    }
}

/// Source of auxiliary variables.
#[derive(Debug, Clone, Default)]
pub struct FreshVars {
    next: u32,
}

impl FreshVars {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(next: u32) -> Self {
        FreshVars { next }
    }

    pub fn fresh(&mut self) -> Var {
        let v = Var::Fresh(self.next);
        self.next += 1;
        v
    }
}

/// `Σ coeff·var + constant`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct LinExpr {
    coeffs: BTreeMap<Var, i64>,
    constant: i64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: i64) -> Self {
        LinExpr {
            coeffs: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn var(v: Var) -> Self {
        Self::term(1, v)
    }

    pub fn term(c: i64, v: Var) -> Self {
        let mut e = Self::zero();
        e.add_term(c, v);
        e
    }

    pub fn add_term(&mut self, c: i64, v: Var) {
        if c == 0 {
            return;
        }
        let entry = self.coeffs.entry(v).or_insert(0);
        *entry += c;
        if *entry == 0 {
            self.coeffs.remove(&v);
        }
    }

    pub fn get_constant(&self) -> i64 {
        self.constant
    }

    pub fn coeff(&self, v: Var) -> i64 {
        self.coeffs.get(&v).copied().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (Var, i64)> + '_ {
        self.coeffs.iter().map(|(&v, &c)| (v, c))
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.coeffs.keys().copied()
    }

    pub fn plus(&self, other: &LinExpr) -> LinExpr {
        let mut r = self.clone();
        for (v, c) in other.terms() {
            r.add_term(c, v);
        }
        r.constant += other.constant;
        r
    }

    pub fn minus(&self, other: &LinExpr) -> LinExpr {
        self.plus(&other.scale(-1))
    }

    pub fn plus_const(&self, c: i64) -> LinExpr {
        let mut r = self.clone();
        r.constant += c;
        r
    }

    pub fn scale(&self, k: i64) -> LinExpr {
        if k == 0 {
            return LinExpr::zero();
        }
        LinExpr {
            coeffs: self.coeffs.iter().map(|(&v, &c)| (v, c * k)).collect(),
            constant: self.constant * k,
        }
    }

    /// Replaces `v` by `e`.
    pub fn substitute(&self, v: Var, e: &LinExpr) -> LinExpr {
        let c = self.coeff(v);
        if c == 0 {
            return self.clone();
        }
        let mut r = self.clone();
        r.coeffs.remove(&v);
        r.plus(&e.scale(c))
    }

    pub fn rename(&self, f: &impl Fn(Var) -> Var) -> LinExpr {
        let mut r = LinExpr::constant(self.constant);
        for (v, c) in self.terms() {
            r.add_term(c, f(v));
        }
        r
    }

    pub fn eval(&self, env: &impl Fn(Var) -> i64) -> i64 {
        self.constant + self.terms().map(|(v, c)| c * env(v)).sum::<i64>()
    }
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in self.terms() {
            let (sign, mag) = if c < 0 { ("-", -c) } else { ("+", c) };
            if first {
                if c < 0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            if mag == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{mag}{v}")?;
            }
            first = false;
        }
        if first {
            write!(f, "{}", self.constant)
        } else if self.constant > 0 {
            write!(f, " + {}", self.constant)
        } else if self.constant < 0 {
            write!(f, " - {}", -self.constant)
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

impl Cmp {
    fn holds(self, x: i64) -> bool {
        match self {
            Cmp::Le => x <= 0,
            Cmp::Eq => x == 0,
            Cmp::Ge => x >= 0,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Cmp::Le => "<=",
            Cmp::Eq => "=",
            Cmp::Ge => ">=",
        }
    }
}

/// `expr ⋈ 0`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub expr: LinExpr,
    pub cmp: Cmp,
}

impl Atom {
    /// `lhs ⋈ rhs`.
    pub fn new(lhs: LinExpr, cmp: Cmp, rhs: LinExpr) -> Self {
        Atom {
            expr: lhs.minus(&rhs),
            cmp,
        }
    }

    pub fn le(lhs: LinExpr, rhs: LinExpr) -> Self {
        Self::new(lhs, Cmp::Le, rhs)
    }

    pub fn ge(lhs: LinExpr, rhs: LinExpr) -> Self {
        Self::new(lhs, Cmp::Ge, rhs)
    }

    pub fn eq(lhs: LinExpr, rhs: LinExpr) -> Self {
        Self::new(lhs, Cmp::Eq, rhs)
    }

    /// `lhs < rhs`, i.e. `lhs - rhs <= -1`.
    pub fn lt(lhs: LinExpr, rhs: LinExpr) -> Self {
        Self::new(lhs.plus_const(1), Cmp::Le, rhs)
    }

    pub fn gt(lhs: LinExpr, rhs: LinExpr) -> Self {
        Self::new(lhs, Cmp::Ge, rhs.plus_const(1))
    }

    pub fn eval(&self, env: &impl Fn(Var) -> i64) -> bool {
        self.cmp.holds(self.expr.eval(env))
    }

    /// Truth value if the atom has no variables.
    pub fn constant_truth(&self) -> Option<bool> {
        self.expr
            .is_constant()
            .then(|| self.cmp.holds(self.expr.get_constant()))
    }

    pub fn rename(&self, f: &impl Fn(Var) -> Var) -> Atom {
        Atom {
            expr: self.expr.rename(f),
            cmp: self.cmp,
        }
    }

    pub fn substitute(&self, v: Var, e: &LinExpr) -> Atom {
        Atom {
            expr: self.expr.substitute(v, e),
            cmp: self.cmp,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.expr.get_constant();
        let lhs = self.expr.plus_const(-c);
        if lhs.is_constant() {
            write!(f, "{} {} 0", c, self.cmp.symbol())
        } else {
            write!(f, "{} {} {}", lhs, self.cmp.symbol(), -c)
        }
    }
}

/// Quantifier-free formula over linear atoms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("disjunctive normal form exceeds {cap} disjuncts")]
pub struct DnfTooLarge {
    pub cap: usize,
}

impl Formula {
    pub fn atom(a: Atom) -> Formula {
        match a.constant_truth() {
            Some(true) => Formula::True,
            Some(false) => Formula::False,
            None => Formula::Atom(a),
        }
    }

    pub fn and(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    pub fn or(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        // absorption: a ∨ (a ∧ b) = a
        let conjuncts = |f: &Formula| -> BTreeSet<Formula> {
            match f {
                Formula::And(fs) => fs.iter().cloned().collect(),
                other => BTreeSet::from([other.clone()]),
            }
        };
        let sets: Vec<BTreeSet<Formula>> = out.iter().map(conjuncts).collect();
        let mut keep = vec![true; out.len()];
        for i in 0..out.len() {
            for j in 0..out.len() {
                if i != j && keep[j] && sets[j].is_subset(&sets[i]) && (sets[j] != sets[i] || j < i) {
                    keep[i] = false;
                    break;
                }
            }
        }
        let mut out: Vec<Formula> = out
            .into_iter()
            .zip(keep)
            .filter_map(|(f, k)| k.then_some(f))
            .collect();
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    pub fn eval(&self, env: &impl Fn(Var) -> i64) -> bool {
        match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(a) => a.eval(env),
            Formula::And(fs) => fs.iter().all(|f| f.eval(env)),
            Formula::Or(fs) => fs.iter().any(|f| f.eval(env)),
        }
    }

    /// Evaluates with missing variables defaulting to zero.
    pub fn eval_map(&self, model: &BTreeMap<Var, i64>) -> bool {
        self.eval(&|v| model.get(&v).copied().unwrap_or(0))
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => out.extend(a.expr.vars()),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_vars(out)),
        }
    }

    pub fn rename(&self, f: &impl Fn(Var) -> Var) -> Formula {
        self.map_atoms(&|a| Formula::atom(a.rename(f)))
    }

    pub fn substitute(&self, v: Var, e: &LinExpr) -> Formula {
        self.map_atoms(&|a| Formula::atom(a.substitute(v, e)))
    }

    pub fn map_atoms(&self, f: &impl Fn(&Atom) -> Formula) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Atom(a) => f(a),
            Formula::And(fs) => Formula::and(fs.iter().map(|g| g.map_atoms(f))),
            Formula::Or(fs) => Formula::or(fs.iter().map(|g| g.map_atoms(f))),
        }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => 1,
            Formula::And(fs) | Formula::Or(fs) => 1 + fs.iter().map(Formula::size).sum::<usize>(),
        }
    }

    /// Disjunctive normal form as a list of atom conjunctions.
    pub fn to_dnf(&self, cap: usize) -> Result<Vec<Vec<Atom>>, DnfTooLarge> {
        match self {
            Formula::True => Ok(vec![vec![]]),
            Formula::False => Ok(vec![]),
            Formula::Atom(a) => Ok(vec![vec![a.clone()]]),
            Formula::Or(fs) => {
                let mut out = Vec::new();
                for f in fs {
                    out.extend(f.to_dnf(cap)?);
                    if out.len() > cap {
                        return Err(DnfTooLarge { cap });
                    }
                }
                Ok(out)
            }
            Formula::And(fs) => {
                let mut acc: Vec<Vec<Atom>> = vec![vec![]];
                for f in fs {
                    let d = f.to_dnf(cap)?;
                    if acc.len().saturating_mul(d.len()) > cap {
                        return Err(DnfTooLarge { cap });
                    }
                    let mut next = Vec::with_capacity(acc.len() * d.len());
                    for a in &acc {
                        for b in &d {
                            let mut c = a.clone();
                            c.extend(b.iter().cloned());
                            next.push(c);
                        }
                    }
                    acc = next;
                }
                Ok(acc)
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::And(fs) | Formula::Or(fs) => {
                let sep = if matches!(self, Formula::And(_)) { " & " } else { " | " };
                write!(f, "(")?;
                for (i, g) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "{sep}")?;
                    }
                    write!(f, "{g}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linexpr_arithmetic() {
        let n = LinExpr::var(Var::In);
        let e = n.scale(2).plus_const(3).minus(&LinExpr::var(Var::Out));
        assert_eq!(e.coeff(Var::In), 2);
        assert_eq!(e.coeff(Var::Out), -1);
        assert_eq!(e.get_constant(), 3);
        let s = e.substitute(Var::In, &LinExpr::var(Var::Out).plus_const(1));
        assert_eq!(s.coeff(Var::Out), 1);
        assert_eq!(s.get_constant(), 5);
        assert!(n.minus(&n).is_constant());
    }

    #[test]
    fn smart_constructors_fold_constants() {
        let t = Formula::atom(Atom::le(LinExpr::constant(1), LinExpr::constant(2)));
        assert_eq!(t, Formula::True);
        let x = Formula::atom(Atom::ge(LinExpr::var(Var::In), LinExpr::constant(1)));
        assert_eq!(Formula::and([Formula::True, x.clone()]), x);
        assert_eq!(Formula::and([Formula::False, x.clone()]), Formula::False);
        assert_eq!(Formula::or([Formula::True, x.clone()]), Formula::True);
    }

    #[test]
    fn dnf_distributes() {
        let a = |c| Formula::atom(Atom::eq(LinExpr::var(Var::In), LinExpr::constant(c)));
        let f = Formula::and([Formula::or([a(1), a(2)]), Formula::or([a(3), a(4), a(5)])]);
        assert_eq!(f.to_dnf(100).unwrap().len(), 6);
        assert_eq!(f.to_dnf(5), Err(DnfTooLarge { cap: 5 }));
    }

    #[test]
    fn strict_atoms_shift_by_one() {
        let a = Atom::lt(LinExpr::var(Var::In), LinExpr::constant(3));
        assert!(a.eval(&|_| 2));
        assert!(!a.eval(&|_| 3));
    }
}
