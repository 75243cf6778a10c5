//! Reference backward search over upward-closed sets of global states,
//! plus an explicit forward search for a fixed number of threads.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::model::{GlobalState, ThreadState, Ttd};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BwsError {
    #[error("backward search exceeded {0} iterations")]
    IterationLimit(usize),
    #[error("TTD has no target state")]
    NoTarget,
}

/// A global state up to thread order: shared state and local counts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountState {
    pub shared: u32,
    pub counts: Vec<u32>,
}

impl CountState {
    pub fn from_global(g: &GlobalState, num_local: u32) -> Self {
        CountState {
            shared: g.shared,
            counts: g.counts(num_local),
        }
    }

    pub fn single(t: ThreadState, num_local: u32) -> Self {
        let mut counts = vec![0; num_local as usize];
        counts[t.local as usize] = 1;
        CountState {
            shared: t.shared,
            counts,
        }
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// `self ⪰ other`.
    pub fn covers(&self, other: &CountState) -> bool {
        self.shared == other.shared
            && self.counts.iter().zip(&other.counts).all(|(a, b)| a >= b)
    }
}

/// Minimal predecessors of the upward closure of `w`.
pub fn cov_pre(ttd: &Ttd, w: &CountState) -> Vec<CountState> {
    let mut out = Vec::new();
    for e in ttd.edges() {
        if e.to.shared != w.shared {
            continue;
        }
        let mut counts = w.counts.clone();
        let lp = e.to.local as usize;
        if counts[lp] > 0 {
            counts[lp] -= 1;
        }
        counts[e.from.local as usize] += 1;
        out.push(CountState {
            shared: e.from.shared,
            counts,
        });
    }
    minimize(out)
}

/// Keeps the minimal elements, deduplicated and sorted.
pub fn minimize(states: Vec<CountState>) -> Vec<CountState> {
    let set: BTreeSet<CountState> = states.into_iter().collect();
    let all: Vec<CountState> = set.into_iter().collect();
    all.iter()
        .filter(|a| !all.iter().any(|b| b != *a && a.covers(b)))
        .cloned()
        .collect()
}

/// Outcome of the backward search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BwsResult {
    /// Coverable; carries the minimal initial state found.
    Coverable(CountState),
    Uncoverable,
}

/// Search statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BwsStats {
    pub iterations: usize,
    pub max_antichain: usize,
}

/// Backward search from the TTD's target, with initial states those where
/// every thread sits in the initial thread state.
pub fn backward_search(
    ttd: &Ttd,
    max_iterations: Option<usize>,
) -> Result<(BwsResult, BwsStats), BwsError> {
    let target = ttd.target().ok_or(BwsError::NoTarget)?;
    let init = ttd.initial();
    let nl = ttd.num_local();
    let is_initial = move |w: &CountState| {
        w.shared == init.shared
            && w.counts
                .iter()
                .enumerate()
                .all(|(l, &c)| c == 0 || l as u32 == init.local)
    };
    backward_search_from(ttd, CountState::single(target, nl), &is_initial, max_iterations)
}

/// Backward search with a box-shaped initial set: a state is initial if all
/// of its threads sit in thread states of `initial` with its shared state.
pub fn backward_search_box(
    ttd: &Ttd,
    initial: &BTreeSet<ThreadState>,
    max_iterations: Option<usize>,
) -> Result<(BwsResult, BwsStats), BwsError> {
    let target = ttd.target().ok_or(BwsError::NoTarget)?;
    let is_initial = |w: &CountState| {
        w.counts.iter().enumerate().all(|(l, &c)| {
            c == 0 || initial.contains(&ThreadState::new(w.shared, l as u32))
        })
    };
    backward_search_from(
        ttd,
        CountState::single(target, ttd.num_local()),
        &is_initial,
        max_iterations,
    )
}

/// Generic backward search from `start` with an initial-state test on
/// minimal elements.
pub fn backward_search_from(
    ttd: &Ttd,
    start: CountState,
    is_initial: &dyn Fn(&CountState) -> bool,
    max_iterations: Option<usize>,
) -> Result<(BwsResult, BwsStats), BwsError> {
    let mut stats = BwsStats::default();
    let key = |w: &CountState| (w.total(), w.clone());
    let mut work: BTreeSet<(u32, CountState)> = BTreeSet::new();
    work.insert(key(&start));
    let mut visited: Vec<CountState> = Vec::new();
    while let Some((_, w)) = work.pop_first() {
        stats.iterations += 1;
        if let Some(cap) = max_iterations {
            if stats.iterations > cap {
                return Err(BwsError::IterationLimit(cap));
            }
        }
        if is_initial(&w) {
            return Ok((BwsResult::Coverable(w), stats));
        }
        if visited.iter().any(|u| w.covers(u)) {
            continue;
        }
        visited.retain(|u| !u.covers(&w));
        visited.push(w.clone());
        stats.max_antichain = stats.max_antichain.max(visited.len());
        for p in cov_pre(ttd, &w) {
            if !visited.iter().any(|u| p.covers(u)) {
                work.insert(key(&p));
            }
        }
    }
    Ok((BwsResult::Uncoverable, stats))
}

/// Explicit breadth-first search from the given global states; returns
/// whether a state covering `target` is reachable.
pub fn forward_coverable(ttd: &Ttd, starts: &[GlobalState], target: ThreadState) -> bool {
    let nl = ttd.num_local();
    let mut seen: BTreeSet<CountState> = BTreeSet::new();
    let mut queue: VecDeque<CountState> = VecDeque::new();
    for g in starts {
        let c = CountState::from_global(g, nl);
        if seen.insert(c.clone()) {
            queue.push_back(c);
        }
    }
    while let Some(c) = queue.pop_front() {
        if c.shared == target.shared && c.counts[target.local as usize] > 0 {
            return true;
        }
        for e in ttd.edges() {
            if e.from.shared != c.shared || c.counts[e.from.local as usize] == 0 {
                continue;
            }
            let mut counts = c.counts.clone();
            counts[e.from.local as usize] -= 1;
            counts[e.to.local as usize] += 1;
            let next = CountState {
                shared: e.to.shared,
                counts,
            };
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Edge;

    fn ts(s: u32, l: u32) -> ThreadState {
        ThreadState::new(s, l)
    }

    #[test]
    fn cov_pre_replaces_or_adds() {
        let ttd = Ttd::new(
            2,
            3,
            [Edge::new(ts(0, 0), ts(1, 1)), Edge::new(ts(0, 2), ts(1, 2))],
            ts(0, 0),
            Some(ts(1, 1)),
        )
        .unwrap();
        let w = CountState {
            shared: 1,
            counts: vec![0, 1, 0],
        };
        let pre = cov_pre(&ttd, &w);
        assert_eq!(
            pre,
            vec![
                CountState {
                    shared: 0,
                    counts: vec![0, 1, 1]
                },
                CountState {
                    shared: 0,
                    counts: vec![1, 0, 0]
                },
            ]
        );
    }

    #[test]
    fn minimize_drops_covered() {
        let a = CountState {
            shared: 0,
            counts: vec![1, 0],
        };
        let b = CountState {
            shared: 0,
            counts: vec![1, 1],
        };
        assert_eq!(minimize(vec![b, a.clone(), a.clone()]), vec![a]);
    }

    #[test]
    fn two_thread_handshake() {
        // a thread moves to (1,1) only after another moved (0,0)->(1,0)... needs 2 threads
        let ttd = Ttd::new(
            3,
            2,
            [
                Edge::new(ts(0, 0), ts(1, 0)),
                Edge::new(ts(1, 0), ts(2, 1)),
                Edge::new(ts(2, 0), ts(2, 1)),
            ],
            ts(0, 0),
            Some(ts(2, 1)),
        )
        .unwrap()
        .with_target(ts(2, 1))
        .unwrap();
        let (res, _) = backward_search(&ttd, None).unwrap();
        assert!(matches!(res, BwsResult::Coverable(_)));
        let unreachable = ttd.clone().with_target(ts(0, 1)).unwrap();
        let (res, _) = backward_search(&unreachable, None).unwrap();
        assert_eq!(res, BwsResult::Uncoverable);
    }

    #[test]
    fn agrees_with_forward_search_on_counter() {
        // needs three threads: each visit to shared 1 consumes one thread
        let ttd = Ttd::new(
            4,
            2,
            [
                Edge::new(ts(0, 0), ts(1, 1)),
                Edge::new(ts(1, 0), ts(2, 1)),
                Edge::new(ts(2, 0), ts(3, 1)),
            ],
            ts(0, 0),
            Some(ts(3, 1)),
        )
        .unwrap();
        let (res, _) = backward_search(&ttd, None).unwrap();
        let BwsResult::Coverable(w) = res else { panic!() };
        assert_eq!(w.total(), 3);
        assert!(!forward_coverable(&ttd, &[ttd.initial_global(2)], ts(3, 1)));
        assert!(forward_coverable(&ttd, &[ttd.initial_global(3)], ts(3, 1)));
    }
}
