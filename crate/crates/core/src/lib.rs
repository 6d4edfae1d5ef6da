//! Condensed-detachment theorem proving for infinite-valued Łukasiewicz
//! logic, guided by hints.
//!
//! The pipeline: [`problem`] reads OTTER-style input, [`strategy::saturate`]
//! runs a given-clause search over [`store::Store`] using
//! [`inference::condensed_detach`], and [`inference::check_proof`] replays
//! the result. [`semantics`] checks formulas on finite truth-value grids and
//! [`experiment`] drives randomized hint-subset runs.

pub mod experiment;
pub mod inference;
pub mod problem;
pub mod semantics;
pub mod store;
pub mod strategy;
pub mod term;
pub mod unify;

pub use inference::{check_proof, condensed_detach, Clause, ClauseId, Goal, Proof};
pub use problem::{load_hint_pool, load_problem, Problem};
pub use strategy::{saturate, HintList, MatchMode, Outcome, RunStats, SearchConfig, SearchRun};
pub use term::{parse_functional, parse_polish, Symbol, Term};
