//! Thread-transition diagrams, their expanded form, global states and the
//! covering order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Errors raised while building or manipulating models.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("thread state ({shared},{local}) out of range for {num_shared} shared / {num_local} local states")]
    OutOfRange {
        shared: u32,
        local: u32,
        num_shared: u32,
        num_local: u32,
    },
    #[error("self-loop edge on ({0},{1})")]
    SelfLoop(u32, u32),
    #[error("edge {0} is not enabled in {1}")]
    NotEnabled(Edge, GlobalState),
    #[error("thread index {0} out of range")]
    NoSuchThread(usize),
    #[error("initial set violates the box property: missing ({0},{1})")]
    BoxPropertyViolation(u32, u32),
    #[error("initial set is empty")]
    EmptyInitialSet,
    #[error("expansion edge {0} is malformed")]
    BadExpansionEdge(Edge),
    #[error("TTD has no target state")]
    NoTarget,
}

/// A pair of a shared state and a local state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ThreadState {
    pub shared: u32,
    pub local: u32,
}

impl ThreadState {
    pub const fn new(shared: u32, local: u32) -> Self {
        ThreadState { shared, local }
    }
}

impl fmt::Display for ThreadState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.shared, self.local)
    }
}

/// A directed edge between two thread states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub from: ThreadState,
    pub to: ThreadState,
}

impl Edge {
    pub const fn new(from: ThreadState, to: ThreadState) -> Self {
        Edge { from, to }
    }

    /// Both endpoints carry the same shared state.
    pub fn is_horizontal(&self) -> bool {
        self.from.shared == self.to.shared
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}>{}", self.from, self.to)
    }
}

/// A thread-transition diagram with a unique initial thread state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ttd {
    num_shared: u32,
    num_local: u32,
    edges: Vec<Edge>,
    initial: ThreadState,
    target: Option<ThreadState>,
}

impl Ttd {
    /// Builds a TTD. Edges are sorted and deduplicated.
    pub fn new(
        num_shared: u32,
        num_local: u32,
        edges: impl IntoIterator<Item = Edge>,
        initial: ThreadState,
        target: Option<ThreadState>,
    ) -> Result<Self, ModelError> {
        let check = |t: ThreadState| {
            if t.shared >= num_shared || t.local >= num_local {
                Err(ModelError::OutOfRange {
                    shared: t.shared,
                    local: t.local,
                    num_shared,
                    num_local,
                })
            } else {
                Ok(())
            }
        };
        let mut edges: Vec<Edge> = edges.into_iter().collect();
        for e in &edges {
            check(e.from)?;
            check(e.to)?;
            if e.from == e.to {
                return Err(ModelError::SelfLoop(e.from.shared, e.from.local));
            }
        }
        check(initial)?;
        if let Some(t) = target {
            check(t)?;
        }
        edges.sort();
        edges.dedup();
        Ok(Ttd {
            num_shared,
            num_local,
            edges,
            initial,
            target,
        })
    }

    pub fn num_shared(&self) -> u32 {
        self.num_shared
    }

    pub fn num_local(&self) -> u32 {
        self.num_local
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn initial(&self) -> ThreadState {
        self.initial
    }

    pub fn target(&self) -> Option<ThreadState> {
        self.target
    }

    pub fn with_target(mut self, target: ThreadState) -> Result<Self, ModelError> {
        if target.shared >= self.num_shared || target.local >= self.num_local {
            return Err(ModelError::OutOfRange {
                shared: target.shared,
                local: target.local,
                num_shared: self.num_shared,
                num_local: self.num_local,
            });
        }
        self.target = Some(target);
        Ok(self)
    }

    pub fn has_edge(&self, e: &Edge) -> bool {
        self.edges.binary_search(e).is_ok()
    }

    /// All thread states, ordered by (shared, local).
    pub fn thread_states(&self) -> impl Iterator<Item = ThreadState> + '_ {
        (0..self.num_shared)
            .flat_map(move |s| (0..self.num_local).map(move |l| ThreadState::new(s, l)))
    }

    /// The initial global state with `n` threads.
    pub fn initial_global(&self, n: usize) -> GlobalState {
        GlobalState::new(self.initial.shared, vec![self.initial.local; n])
    }
}

/// Whether an ETTD edge is an original edge or an added horizontal one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    Real,
    Expansion,
}

/// Index of an edge in an [`Ettd`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EttdEdge {
    pub edge: Edge,
    pub kind: EdgeKind,
}

/// Expanded TTD: real edges plus horizontal expansion edges that stand for
/// spawning a fresh thread. An expansion edge may run parallel to a real edge
/// with the same endpoints; the two get distinct ids.
#[derive(Debug, Clone)]
pub struct Ettd {
    ttd: Ttd,
    edges: Vec<EttdEdge>,
    index: BTreeMap<(Edge, EdgeKind), EdgeId>,
}

impl Ettd {
    /// Expands `ttd`. With `prune`, an expansion edge is kept only if its
    /// source has an incoming real edge or is initial, and its target has an
    /// outgoing real edge or is the target.
    pub fn build(ttd: &Ttd, prune: bool) -> Self {
        let mut has_in = BTreeSet::new();
        let mut has_out = BTreeSet::new();
        for e in ttd.edges() {
            has_out.insert(e.from);
            has_in.insert(e.to);
        }
        let mut expansion = Vec::new();
        for s in 0..ttd.num_shared() {
            for l in 0..ttd.num_local() {
                for l2 in 0..ttd.num_local() {
                    if l == l2 {
                        continue;
                    }
                    let e = Edge::new(ThreadState::new(s, l), ThreadState::new(s, l2));
                    if prune {
                        let src_ok = has_in.contains(&e.from) || e.from == ttd.initial();
                        let dst_ok = has_out.contains(&e.to) || Some(e.to) == ttd.target();
                        if !(src_ok && dst_ok) {
                            continue;
                        }
                    }
                    expansion.push(e);
                }
            }
        }
        Self::assemble(ttd, expansion)
    }

    /// Uses exactly the given expansion edges.
    pub fn with_expansion_edges(
        ttd: &Ttd,
        expansion: impl IntoIterator<Item = Edge>,
    ) -> Result<Self, ModelError> {
        let expansion: Vec<Edge> = expansion.into_iter().collect();
        for e in &expansion {
            let in_range = e.from.shared < ttd.num_shared()
                && e.from.local < ttd.num_local()
                && e.to.local < ttd.num_local();
            if !e.is_horizontal() || e.from == e.to || !in_range {
                return Err(ModelError::BadExpansionEdge(*e));
            }
        }
        Ok(Self::assemble(ttd, expansion))
    }

    fn assemble(ttd: &Ttd, expansion: Vec<Edge>) -> Self {
        let mut edges: Vec<EttdEdge> = ttd
            .edges()
            .iter()
            .map(|&edge| EttdEdge {
                edge,
                kind: EdgeKind::Real,
            })
            .chain(expansion.into_iter().map(|edge| EttdEdge {
                edge,
                kind: EdgeKind::Expansion,
            }))
            .collect();
        edges.sort();
        edges.dedup();
        let index = edges
            .iter()
            .enumerate()
            .map(|(i, e)| ((e.edge, e.kind), EdgeId(i as u32)))
            .collect();
        Ettd {
            ttd: ttd.clone(),
            edges,
            index,
        }
    }

    pub fn ttd(&self) -> &Ttd {
        &self.ttd
    }

    pub fn edges(&self) -> &[EttdEdge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &EttdEdge {
        &self.edges[id.0 as usize]
    }

    /// The real edge `e` if there is one, otherwise the expansion edge `e`.
    pub fn id_of(&self, e: &Edge) -> Option<EdgeId> {
        self.id_of_kind(e, EdgeKind::Real)
            .or_else(|| self.id_of_kind(e, EdgeKind::Expansion))
    }

    pub fn id_of_kind(&self, e: &Edge, kind: EdgeKind) -> Option<EdgeId> {
        self.index.get(&(*e, kind)).copied()
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.edges.len() as u32).map(EdgeId)
    }

    pub fn initial(&self) -> ThreadState {
        self.ttd.initial()
    }

    pub fn target(&self) -> Option<ThreadState> {
        self.ttd.target()
    }

    /// Checks that consecutive edges share their endpoint.
    pub fn is_chain(&self, path: &[EdgeId]) -> bool {
        path.windows(2)
            .all(|w| self.edge(w[0]).edge.to == self.edge(w[1]).edge.from)
    }
}

/// A global state: a shared state and the local state of each thread.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GlobalState {
    pub shared: u32,
    pub locals: Vec<u32>,
}

impl GlobalState {
    pub fn new(shared: u32, locals: Vec<u32>) -> Self {
        GlobalState { shared, locals }
    }

    /// Number of threads in local state `l`.
    pub fn count(&self, l: u32) -> usize {
        self.locals.iter().filter(|&&x| x == l).count()
    }

    /// Local-state multiplicities indexed by local state.
    pub fn counts(&self, num_local: u32) -> Vec<u32> {
        let mut c = vec![0u32; num_local as usize];
        for &l in &self.locals {
            c[l as usize] += 1;
        }
        c
    }

    /// Fires `edge` on thread `thread`.
    pub fn fire(&self, edge: &Edge, thread: usize) -> Result<GlobalState, ModelError> {
        let Some(&l) = self.locals.get(thread) else {
            return Err(ModelError::NoSuchThread(thread));
        };
        if self.shared != edge.from.shared || l != edge.from.local {
            return Err(ModelError::NotEnabled(*edge, self.clone()));
        }
        let mut locals = self.locals.clone();
        locals[thread] = edge.to.local;
        Ok(GlobalState::new(edge.to.shared, locals))
    }

    /// Whether some thread sits in `t`.
    pub fn covers_thread(&self, t: ThreadState) -> bool {
        self.shared == t.shared && self.locals.contains(&t.local)
    }
}

impl fmt::Display for GlobalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}|", self.shared)?;
        for (i, l) in self.locals.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, ">")
    }
}

/// `a ⪰ b`: same shared state and the locals of `b` form a sub-multiset of
/// those of `a`.
pub fn covers(a: &GlobalState, b: &GlobalState) -> bool {
    if a.shared != b.shared {
        return false;
    }
    let mut ca: BTreeMap<u32, usize> = BTreeMap::new();
    for &l in &a.locals {
        *ca.entry(l).or_default() += 1;
    }
    let mut cb: BTreeMap<u32, usize> = BTreeMap::new();
    for &l in &b.locals {
        *cb.entry(l).or_default() += 1;
    }
    cb.iter()
        .all(|(l, n)| ca.get(l).copied().unwrap_or(0) >= *n)
}

/// Reduces a box-shaped initial set to a single initial thread state by
/// adding a fresh shared state and a fresh local state.
///
/// Every `(s, l)` in `initial` gets an edge from the fresh pair and one from
/// `(s, fresh_local)`. The target is carried over unchanged.
pub fn normalize_initial(
    ttd: &Ttd,
    initial: &BTreeSet<ThreadState>,
) -> Result<Ttd, ModelError> {
    if initial.is_empty() {
        return Err(ModelError::EmptyInitialSet);
    }
    let shareds: BTreeSet<u32> = initial.iter().map(|t| t.shared).collect();
    let locals: BTreeSet<u32> = initial.iter().map(|t| t.local).collect();
    for &s in &shareds {
        for &l in &locals {
            if !initial.contains(&ThreadState::new(s, l)) {
                return Err(ModelError::BoxPropertyViolation(s, l));
            }
        }
    }
    let fresh_shared = ttd.num_shared();
    let fresh_local = ttd.num_local();
    let hat = ThreadState::new(fresh_shared, fresh_local);
    let mut edges: Vec<Edge> = ttd.edges().to_vec();
    for &t in initial {
        edges.push(Edge::new(hat, t));
        edges.push(Edge::new(ThreadState::new(t.shared, fresh_local), t));
    }
    Ttd::new(
        ttd.num_shared() + 1,
        ttd.num_local() + 1,
        edges,
        hat,
        ttd.target(),
    )
}
