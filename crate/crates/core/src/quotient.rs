//! SCC quotient of an expanded diagram, quotient paths, their regular
//! expressions over edges, and alternation-free loop structure.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use thiserror::Error;

use crate::model::{EdgeId, Ettd, ThreadState};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QuotientError {
    #[error("TTD has no target state")]
    NoTarget,
    #[error("quotient path admits no edge path")]
    NoPath,
    #[error("regular expression exceeds {0} nodes")]
    RegexTooLarge(usize),
    #[error("no iteration count for loop {0}")]
    MissingKappa(u32),
}

/// A strongly connected component of the relevant part of the ETTD.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scc {
    pub states: Vec<ThreadState>,
    /// Edges with both endpoints in this component.
    pub edges: Vec<EdgeId>,
}

impl Scc {
    pub fn is_trivial(&self) -> bool {
        self.edges.is_empty()
    }

    /// A single simple cycle: every state has exactly one internal
    /// successor.
    pub fn is_simple_cycle(&self, ettd: &Ettd) -> bool {
        !self.is_trivial()
            && self.edges.len() == self.states.len()
            && self.states.iter().all(|s| {
                self.edges
                    .iter()
                    .filter(|e| ettd.edge(**e).edge.from == *s)
                    .count()
                    == 1
            })
    }
}

/// SCC quotient restricted to states on some path from the initial to the
/// target thread state. Components are numbered topologically.
#[derive(Debug, Clone)]
pub struct QuotientGraph {
    pub sccs: Vec<Scc>,
    pub scc_of: BTreeMap<ThreadState, usize>,
    /// Edges between distinct components, sorted.
    pub crossing: Vec<EdgeId>,
    pub initial: ThreadState,
    pub target: ThreadState,
}

impl QuotientGraph {
    /// Whether the target is reachable from the initial state at all.
    pub fn is_connected(&self) -> bool {
        self.scc_of.contains_key(&self.initial) && self.scc_of.contains_key(&self.target)
    }

    /// No component is more than one simple cycle.
    pub fn has_only_simple_loops(&self, ettd: &Ettd) -> bool {
        self.sccs
            .iter()
            .all(|c| c.is_trivial() || c.is_simple_cycle(ettd))
    }
}

/// Builds the quotient of the states that lie on an initial-to-target path.
pub fn scc_quotient(ettd: &Ettd) -> Result<QuotientGraph, QuotientError> {
    let target = ettd.target().ok_or(QuotientError::NoTarget)?;
    let initial = ettd.initial();
    let mut succ: BTreeMap<ThreadState, Vec<ThreadState>> = BTreeMap::new();
    let mut pred: BTreeMap<ThreadState, Vec<ThreadState>> = BTreeMap::new();
    for e in ettd.edges() {
        succ.entry(e.edge.from).or_default().push(e.edge.to);
        pred.entry(e.edge.to).or_default().push(e.edge.from);
    }
    let closure = |start: ThreadState, adj: &BTreeMap<ThreadState, Vec<ThreadState>>| {
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(x) = stack.pop() {
            for &y in adj.get(&x).into_iter().flatten() {
                if seen.insert(y) {
                    stack.push(y);
                }
            }
        }
        seen
    };
    let fwd = closure(initial, &succ);
    let bwd = closure(target, &pred);
    let relevant: BTreeSet<ThreadState> = fwd.intersection(&bwd).copied().collect();

    let mut graph: DiGraph<ThreadState, EdgeId> = DiGraph::new();
    let mut node: BTreeMap<ThreadState, NodeIndex> = BTreeMap::new();
    for &s in &relevant {
        node.insert(s, graph.add_node(s));
    }
    for id in ettd.edge_ids() {
        let e = ettd.edge(id).edge;
        if let (Some(&a), Some(&b)) = (node.get(&e.from), node.get(&e.to)) {
            graph.add_edge(a, b, id);
        }
    }
    // tarjan_scc yields components in reverse topological order
    let mut comps = tarjan_scc(&graph);
    comps.reverse();
    let mut scc_of = BTreeMap::new();
    let mut sccs = Vec::new();
    for (i, comp) in comps.iter().enumerate() {
        let mut states: Vec<ThreadState> = comp.iter().map(|n| graph[*n]).collect();
        states.sort();
        for s in &states {
            scc_of.insert(*s, i);
        }
        sccs.push(Scc {
            states,
            edges: Vec::new(),
        });
    }
    let mut crossing = Vec::new();
    for id in ettd.edge_ids() {
        let e = ettd.edge(id).edge;
        if let (Some(&a), Some(&b)) = (scc_of.get(&e.from), scc_of.get(&e.to)) {
            if a == b {
                sccs[a].edges.push(id);
            } else {
                crossing.push(id);
            }
        }
    }
    Ok(QuotientGraph {
        sccs,
        scc_of,
        crossing,
        initial,
        target,
    })
}

/// A path in the quotient: components and the crossing edges between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotientPath {
    pub sccs: Vec<usize>,
    pub crossings: Vec<EdgeId>,
}

/// All quotient paths from the initial to the target component, in
/// lexicographic order of crossing edges. The flag reports truncation at
/// `budget`.
pub fn enumerate_quotient_paths(
    ettd: &Ettd,
    qg: &QuotientGraph,
    budget: usize,
) -> (Vec<QuotientPath>, bool) {
    let mut out = Vec::new();
    if !qg.is_connected() {
        return (out, false);
    }
    let start = qg.scc_of[&qg.initial];
    let goal = qg.scc_of[&qg.target];
    let mut outgoing: BTreeMap<usize, Vec<(EdgeId, usize)>> = BTreeMap::new();
    for &id in &qg.crossing {
        let e = ettd.edge(id).edge;
        outgoing
            .entry(qg.scc_of[&e.from])
            .or_default()
            .push((id, qg.scc_of[&e.to]));
    }
    let mut truncated = false;
    let mut path = QuotientPath {
        sccs: vec![start],
        crossings: Vec::new(),
    };
    dfs(&outgoing, goal, &mut path, &mut out, budget, &mut truncated);
    (out, truncated)
}

fn dfs(
    outgoing: &BTreeMap<usize, Vec<(EdgeId, usize)>>,
    goal: usize,
    path: &mut QuotientPath,
    out: &mut Vec<QuotientPath>,
    budget: usize,
    truncated: &mut bool,
) {
    if *truncated {
        return;
    }
    let here = *path.sccs.last().unwrap();
    if here == goal {
        if out.len() >= budget {
            *truncated = true;
        } else {
            out.push(path.clone());
        }
        return;
    }
    for &(id, next) in outgoing.get(&here).into_iter().flatten() {
        path.sccs.push(next);
        path.crossings.push(id);
        dfs(outgoing, goal, path, out, budget, truncated);
        path.sccs.pop();
        path.crossings.pop();
        if *truncated {
            return;
        }
    }
}

/// Regular expression over edges that may contain alternation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChoiceRegex {
    Eps,
    Lit(EdgeId),
    Concat(Vec<ChoiceRegex>),
    Alt(Vec<ChoiceRegex>),
    Star(Box<ChoiceRegex>),
}

impl ChoiceRegex {
    pub fn concat(parts: impl IntoIterator<Item = ChoiceRegex>) -> ChoiceRegex {
        let mut out = Vec::new();
        for p in parts {
            match p {
                ChoiceRegex::Eps => {}
                ChoiceRegex::Concat(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => ChoiceRegex::Eps,
            1 => out.pop().unwrap(),
            _ => ChoiceRegex::Concat(out),
        }
    }

    pub fn alt(parts: impl IntoIterator<Item = ChoiceRegex>) -> ChoiceRegex {
        let mut out: Vec<ChoiceRegex> = Vec::new();
        for p in parts {
            let items = match p {
                ChoiceRegex::Alt(inner) => inner,
                other => vec![other],
            };
            for i in items {
                if !out.contains(&i) {
                    out.push(i);
                }
            }
        }
        match out.len() {
            1 => out.pop().unwrap(),
            _ => ChoiceRegex::Alt(out),
        }
    }

    pub fn star(body: ChoiceRegex) -> ChoiceRegex {
        match body {
            ChoiceRegex::Eps => ChoiceRegex::Eps,
            s @ ChoiceRegex::Star(_) => s,
            other => ChoiceRegex::Star(Box::new(other)),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            ChoiceRegex::Eps | ChoiceRegex::Lit(_) => 1,
            ChoiceRegex::Concat(xs) | ChoiceRegex::Alt(xs) => {
                1 + xs.iter().map(ChoiceRegex::size).sum::<usize>()
            }
            ChoiceRegex::Star(b) => 1 + b.size(),
        }
    }

    /// All words of length at most `max_len`.
    pub fn words_up_to(&self, max_len: usize) -> BTreeSet<Vec<EdgeId>> {
        match self {
            ChoiceRegex::Eps => BTreeSet::from([vec![]]),
            ChoiceRegex::Lit(e) => {
                if max_len >= 1 {
                    BTreeSet::from([vec![*e]])
                } else {
                    BTreeSet::new()
                }
            }
            ChoiceRegex::Concat(xs) => {
                let parts: Vec<_> = xs.iter().map(|x| x.words_up_to(max_len)).collect();
                concat_words(&parts, max_len)
            }
            ChoiceRegex::Alt(xs) => xs.iter().flat_map(|x| x.words_up_to(max_len)).collect(),
            ChoiceRegex::Star(b) => star_words(&b.words_up_to(max_len), max_len),
        }
    }
}

fn concat_words(parts: &[BTreeSet<Vec<EdgeId>>], max_len: usize) -> BTreeSet<Vec<EdgeId>> {
    let mut acc = BTreeSet::from([vec![]]);
    for p in parts {
        let mut next = BTreeSet::new();
        for a in &acc {
            for b in p {
                if a.len() + b.len() <= max_len {
                    let mut w = a.clone();
                    w.extend(b.iter().copied());
                    next.insert(w);
                }
            }
        }
        acc = next;
    }
    acc
}

fn star_words(body: &BTreeSet<Vec<EdgeId>>, max_len: usize) -> BTreeSet<Vec<EdgeId>> {
    let mut all = BTreeSet::from([vec![]]);
    let mut frontier = all.clone();
    while !frontier.is_empty() {
        let mut next = BTreeSet::new();
        for a in &frontier {
            for b in body.iter().filter(|b| !b.is_empty()) {
                if a.len() + b.len() <= max_len {
                    let mut w = a.clone();
                    w.extend(b.iter().copied());
                    if all.insert(w.clone()) {
                        next.insert(w);
                    }
                }
            }
        }
        frontier = next;
    }
    all
}

impl fmt::Display for ChoiceRegex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChoiceRegex::Eps => write!(f, "eps"),
            ChoiceRegex::Lit(e) => write!(f, "{e}"),
            ChoiceRegex::Concat(xs) => {
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    match x {
                        ChoiceRegex::Alt(_) => write!(f, "({x})")?,
                        _ => write!(f, "{x}")?,
                    }
                }
                Ok(())
            }
            ChoiceRegex::Alt(xs) => {
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " | ")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
            ChoiceRegex::Star(b) => match **b {
                ChoiceRegex::Lit(_) => write!(f, "{b}*"),
                _ => write!(f, "({b})*"),
            },
        }
    }
}

/// Regular expression for the ETTD paths along a quotient path, by state
/// elimination in (position, shared, local) order.
pub fn path_regex(
    ettd: &Ettd,
    qg: &QuotientGraph,
    qpath: &QuotientPath,
    node_budget: usize,
) -> Result<ChoiceRegex, QuotientError> {
    const S: usize = 0;
    const F: usize = 1;
    let mut index: BTreeMap<(usize, ThreadState), usize> = BTreeMap::new();
    for (pos, &c) in qpath.sccs.iter().enumerate() {
        for &s in &qg.sccs[c].states {
            index.insert((pos, s), 0);
        }
    }
    for (i, v) in index.values_mut().enumerate() {
        *v = i + 2;
    }
    let n = index.len() + 2;
    let mut labels: BTreeMap<(usize, usize), ChoiceRegex> = BTreeMap::new();
    let put = |labels: &mut BTreeMap<(usize, usize), ChoiceRegex>, k: (usize, usize), r: ChoiceRegex| {
        let merged = match labels.remove(&k) {
            Some(old) => ChoiceRegex::alt([old, r]),
            None => r,
        };
        labels.insert(k, merged);
    };
    for (pos, &c) in qpath.sccs.iter().enumerate() {
        for &id in &qg.sccs[c].edges {
            let e = ettd.edge(id).edge;
            put(&mut labels, (index[&(pos, e.from)], index[&(pos, e.to)]), ChoiceRegex::Lit(id));
        }
    }
    for (pos, &id) in qpath.crossings.iter().enumerate() {
        let e = ettd.edge(id).edge;
        put(&mut labels, (index[&(pos, e.from)], index[&(pos + 1, e.to)]), ChoiceRegex::Lit(id));
    }
    let last = qpath.sccs.len() - 1;
    put(&mut labels, (S, index[&(0, qg.initial)]), ChoiceRegex::Eps);
    put(&mut labels, (index[&(last, qg.target)], F), ChoiceRegex::Eps);

    for q in 2..n {
        let self_loop = labels.remove(&(q, q));
        let ins: Vec<(usize, ChoiceRegex)> = labels
            .iter()
            .filter(|((_, b), _)| *b == q)
            .map(|((a, _), r)| (*a, r.clone()))
            .collect();
        let outs: Vec<(usize, ChoiceRegex)> = labels
            .iter()
            .filter(|((a, _), _)| *a == q)
            .map(|((_, b), r)| (*b, r.clone()))
            .collect();
        for (p, _) in &ins {
            labels.remove(&(*p, q));
        }
        for (r, _) in &outs {
            labels.remove(&(q, *r));
        }
        let mid = self_loop.map(ChoiceRegex::star).unwrap_or(ChoiceRegex::Eps);
        for (p, a) in &ins {
            for (r, b) in &outs {
                let new = ChoiceRegex::concat([a.clone(), mid.clone(), b.clone()]);
                if new.size() > node_budget {
                    return Err(QuotientError::RegexTooLarge(node_budget));
                }
                put(&mut labels, (*p, *r), new);
                if labels[&(*p, *r)].size() > node_budget {
                    return Err(QuotientError::RegexTooLarge(node_budget));
                }
            }
        }
    }
    labels.remove(&(S, F)).ok_or(QuotientError::NoPath)
}

/// Alternation-free regular expression; every star carries a loop id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeRegex {
    Lit(EdgeId),
    Concat(Vec<EdgeRegex>),
    Star {
        id: u32,
        outermost: bool,
        body: Box<EdgeRegex>,
    },
}

impl EdgeRegex {
    pub fn eps() -> EdgeRegex {
        EdgeRegex::Concat(Vec::new())
    }

    pub fn concat(parts: impl IntoIterator<Item = EdgeRegex>) -> EdgeRegex {
        let mut out = Vec::new();
        for p in parts {
            match p {
                EdgeRegex::Concat(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        if out.len() == 1 {
            out.pop().unwrap()
        } else {
            EdgeRegex::Concat(out)
        }
    }

    /// Parses the structure from a choice-free [`ChoiceRegex`], numbering
    /// stars in pre-order from 1.
    pub fn from_choice_free(r: &ChoiceRegex) -> Option<EdgeRegex> {
        let mut next = 1;
        Self::convert(r, true, &mut next)
    }

    fn convert(r: &ChoiceRegex, top: bool, next: &mut u32) -> Option<EdgeRegex> {
        Some(match r {
            ChoiceRegex::Eps => EdgeRegex::eps(),
            ChoiceRegex::Lit(e) => EdgeRegex::Lit(*e),
            ChoiceRegex::Concat(xs) => EdgeRegex::concat(
                xs.iter()
                    .map(|x| Self::convert(x, top, next))
                    .collect::<Option<Vec<_>>>()?,
            ),
            ChoiceRegex::Alt(_) => return None,
            ChoiceRegex::Star(b) => {
                let id = *next;
                *next += 1;
                EdgeRegex::Star {
                    id,
                    outermost: top,
                    body: Box::new(Self::convert(b, false, next)?),
                }
            }
        })
    }

    pub fn is_star_free(&self) -> bool {
        match self {
            EdgeRegex::Lit(_) => true,
            EdgeRegex::Concat(xs) => xs.iter().all(EdgeRegex::is_star_free),
            EdgeRegex::Star { .. } => false,
        }
    }

    /// Some star contains another star.
    pub fn has_nest(&self) -> bool {
        match self {
            EdgeRegex::Lit(_) => false,
            EdgeRegex::Concat(xs) => xs.iter().any(EdgeRegex::has_nest),
            EdgeRegex::Star { body, .. } => !body.is_star_free(),
        }
    }

    /// Maximal number of nested stars.
    pub fn nesting_height(&self) -> usize {
        match self {
            EdgeRegex::Lit(_) => 0,
            EdgeRegex::Concat(xs) => xs.iter().map(EdgeRegex::nesting_height).max().unwrap_or(0),
            EdgeRegex::Star { body, .. } => 1 + body.nesting_height(),
        }
    }

    /// Edge sequence of a star-free expression.
    pub fn literals(&self) -> Vec<EdgeId> {
        let mut out = Vec::new();
        self.collect_literals(&mut out);
        out
    }

    fn collect_literals(&self, out: &mut Vec<EdgeId>) {
        match self {
            EdgeRegex::Lit(e) => out.push(*e),
            EdgeRegex::Concat(xs) => xs.iter().for_each(|x| x.collect_literals(out)),
            EdgeRegex::Star { body, .. } => body.collect_literals(out),
        }
    }

    pub fn max_id(&self) -> u32 {
        match self {
            EdgeRegex::Lit(_) => 0,
            EdgeRegex::Concat(xs) => xs.iter().map(EdgeRegex::max_id).max().unwrap_or(0),
            EdgeRegex::Star { id, body, .. } => (*id).max(body.max_id()),
        }
    }

    /// Ids of outermost stars in order of appearance.
    pub fn outermost_ids(&self) -> Vec<u32> {
        let mut out = Vec::new();
        self.collect_outermost(&mut out);
        out
    }

    fn collect_outermost(&self, out: &mut Vec<u32>) {
        match self {
            EdgeRegex::Lit(_) => {}
            EdgeRegex::Concat(xs) => xs.iter().for_each(|x| x.collect_outermost(out)),
            EdgeRegex::Star { id, outermost, body } => {
                if *outermost {
                    out.push(*id);
                } else {
                    body.collect_outermost(out);
                }
            }
        }
    }

    pub fn size(&self) -> usize {
        match self {
            EdgeRegex::Lit(_) => 1,
            EdgeRegex::Concat(xs) => 1 + xs.iter().map(EdgeRegex::size).sum::<usize>(),
            EdgeRegex::Star { body, .. } => 1 + body.size(),
        }
    }

    pub fn words_up_to(&self, max_len: usize) -> BTreeSet<Vec<EdgeId>> {
        match self {
            EdgeRegex::Lit(e) => {
                if max_len >= 1 {
                    BTreeSet::from([vec![*e]])
                } else {
                    BTreeSet::new()
                }
            }
            EdgeRegex::Concat(xs) => {
                let parts: Vec<_> = xs.iter().map(|x| x.words_up_to(max_len)).collect();
                concat_words(&parts, max_len)
            }
            EdgeRegex::Star { body, .. } => star_words(&body.words_up_to(max_len), max_len),
        }
    }
}

impl fmt::Display for EdgeRegex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeRegex::Lit(e) => write!(f, "{e}"),
            EdgeRegex::Concat(xs) if xs.is_empty() => write!(f, "eps"),
            EdgeRegex::Concat(xs) => {
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
            EdgeRegex::Star { body, .. } => match **body {
                EdgeRegex::Lit(_) => write!(f, "{body}*"),
                _ => write!(f, "({body})*"),
            },
        }
    }
}

/// One top-level piece of an alternation-free expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Straight(Vec<EdgeId>),
    Loop {
        id: u32,
        outermost: bool,
        body: EdgeRegex,
    },
}

/// Splits an expression into maximal straight-line runs and loops.
pub fn segment(r: &EdgeRegex) -> Vec<Segment> {
    let items: Vec<&EdgeRegex> = match r {
        EdgeRegex::Concat(xs) => xs.iter().collect(),
        other => vec![other],
    };
    let mut out = Vec::new();
    let mut run = Vec::new();
    for it in items {
        match it {
            EdgeRegex::Lit(e) => run.push(*e),
            EdgeRegex::Concat(_) => run.extend(it.literals()),
            EdgeRegex::Star { id, outermost, body } => {
                if !run.is_empty() {
                    out.push(Segment::Straight(std::mem::take(&mut run)));
                }
                out.push(Segment::Loop {
                    id: *id,
                    outermost: *outermost,
                    body: (**body).clone(),
                });
            }
        }
    }
    if !run.is_empty() {
        out.push(Segment::Straight(run));
    }
    out
}

/// Sequence of top-level items: literals and stars with alternation-free
/// bodies.
type Items = Vec<ChoiceRegex>;

fn alternatives(r: &ChoiceRegex, budget: usize) -> Result<Vec<Items>, QuotientError> {
    Ok(match r {
        ChoiceRegex::Eps => vec![vec![]],
        ChoiceRegex::Lit(_) => vec![vec![r.clone()]],
        ChoiceRegex::Concat(xs) => {
            let mut acc: Vec<Items> = vec![vec![]];
            for x in xs {
                let alts = alternatives(x, budget)?;
                let mut next = Vec::new();
                for a in &acc {
                    for b in &alts {
                        let mut c = a.clone();
                        c.extend(b.iter().cloned());
                        next.push(c);
                    }
                }
                acc = next;
                check_budget(&acc, budget)?;
            }
            acc
        }
        ChoiceRegex::Alt(xs) => {
            let mut out = Vec::new();
            for x in xs {
                out.extend(alternatives(x, budget)?);
                check_budget(&out, budget)?;
            }
            out
        }
        ChoiceRegex::Star(b) => match star_body(b, budget)? {
            None => vec![vec![]],
            Some(body) => vec![vec![ChoiceRegex::star(body)]],
        },
    })
}

fn check_budget(alts: &[Items], budget: usize) -> Result<(), QuotientError> {
    let size: usize = alts
        .iter()
        .map(|a| a.iter().map(ChoiceRegex::size).sum::<usize>() + 1)
        .sum();
    if size > budget {
        Err(QuotientError::RegexTooLarge(budget))
    } else {
        Ok(())
    }
}

/// Alternation-free body `B` with `B* = body*`; `None` if `body*` is `ε`.
fn star_body(body: &ChoiceRegex, budget: usize) -> Result<Option<ChoiceRegex>, QuotientError> {
    let alts: Vec<ChoiceRegex> = alternatives(body, budget)?
        .into_iter()
        .map(ChoiceRegex::concat)
        .filter(|a| *a != ChoiceRegex::Eps)
        .collect();
    Ok(match alts.len() {
        0 => None,
        1 => Some(alts.into_iter().next().unwrap()),
        _ => Some(ChoiceRegex::concat(alts.into_iter().map(ChoiceRegex::star))),
    })
}

/// Case-splits alternation outside stars and rewrites `(R1|…|Rk)*` as
/// `(R1* … Rk*)*` inside stars. The union of the results denotes the same
/// language as `r`.
pub fn remove_alternation(
    r: &ChoiceRegex,
    node_budget: usize,
) -> Result<Vec<EdgeRegex>, QuotientError> {
    alternatives(r, node_budget)?
        .into_iter()
        .map(|items| {
            EdgeRegex::from_choice_free(&ChoiceRegex::concat(items))
                .ok_or(QuotientError::RegexTooLarge(node_budget))
        })
        .collect()
}

/// Replaces every outermost star by `kappa[id]` copies of its body. Stars
/// inside the copies become outermost and get fresh ids above the current
/// maximum.
pub fn unwind(r: &EdgeRegex, kappa: &BTreeMap<u32, u64>) -> Result<EdgeRegex, QuotientError> {
    let mut next = r.max_id() + 1;
    unwind_rec(r, kappa, &mut next)
}

fn unwind_rec(
    r: &EdgeRegex,
    kappa: &BTreeMap<u32, u64>,
    next: &mut u32,
) -> Result<EdgeRegex, QuotientError> {
    Ok(match r {
        EdgeRegex::Lit(_) => r.clone(),
        EdgeRegex::Concat(xs) => EdgeRegex::concat(
            xs.iter()
                .map(|x| unwind_rec(x, kappa, next))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        EdgeRegex::Star { id, outermost, body } => {
            if !*outermost {
                return Ok(r.clone());
            }
            let k = *kappa.get(id).ok_or(QuotientError::MissingKappa(*id))?;
            let mut copies = Vec::new();
            for _ in 0..k {
                copies.push(promote(body, next));
            }
            EdgeRegex::concat(copies)
        }
    })
}

/// Copy of `r` whose top-level stars become outermost with fresh ids.
fn promote(r: &EdgeRegex, next: &mut u32) -> EdgeRegex {
    match r {
        EdgeRegex::Lit(_) => r.clone(),
        EdgeRegex::Concat(xs) => EdgeRegex::Concat(xs.iter().map(|x| promote(x, next)).collect()),
        EdgeRegex::Star { body, .. } => {
            let id = *next;
            *next += 1;
            EdgeRegex::Star {
                id,
                outermost: true,
                body: Box::new(renumber(body, next)),
            }
        }
    }
}

fn renumber(r: &EdgeRegex, next: &mut u32) -> EdgeRegex {
    match r {
        EdgeRegex::Lit(_) => r.clone(),
        EdgeRegex::Concat(xs) => EdgeRegex::Concat(xs.iter().map(|x| renumber(x, next)).collect()),
        EdgeRegex::Star { body, .. } => {
            let id = *next;
            *next += 1;
            EdgeRegex::Star {
                id,
                outermost: false,
                body: Box::new(renumber(body, next)),
            }
        }
    }
}
