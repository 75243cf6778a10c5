//! Coverability checking for thread-transition diagrams.
//!
//! A query asks whether a thread state is coverable from the initial global
//! state for some number of threads. The symbolic checker walks paths of the
//! SCC quotient of the expanded diagram backwards, summarizes them as
//! max-plus constraints on local-state counters, accelerates loops and
//! returns replayable witnesses. A classic backward search is included as a
//! reference.

pub mod logic;
pub mod model;
pub mod solver;
pub mod summary;
pub mod bws;
pub mod quotient;
pub mod invariant;
pub mod reach;
pub mod frontend;
