//! Given-clause saturation with condensed detachment as the only rule,
//! weight templates, the hints strategy and OTTER-style statistics.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::{condensed_detach, unit_conflict, Clause, ClauseId, Goal, Justification, Proof};
use crate::problem::Problem;
use crate::store::{subsumes, DiscriminationTree, Flat, Store};
use crate::term::Term;
use crate::unify::{is_variant, matches};

/// Overrides the symbol-count weight of every clause the pattern subsumes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightTemplate {
    pub pattern: Term,
    pub value: i64,
}

impl WeightTemplate {
    pub fn new(pattern: Term, value: i64) -> WeightTemplate {
        WeightTemplate {
            pattern: pattern.normalize_variables(),
            value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// A hint subsumes the clause.
    Forward,
    /// The clause subsumes a hint.
    Backward,
    #[default]
    Both,
}

impl FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<MatchMode, String> {
        match s {
            "forward" => Ok(MatchMode::Forward),
            "backward" => Ok(MatchMode::Backward),
            "both" => Ok(MatchMode::Both),
            other => Err(format!("unknown hint match mode `{other}`")),
        }
    }
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchMode::Forward => "forward",
            MatchMode::Backward => "backward",
            MatchMode::Both => "both",
        })
    }
}

/// Normalized hints without duplicate variants.
#[derive(Debug, Clone, Default)]
pub struct HintList {
    hints: Vec<Term>,
    index: DiscriminationTree,
    pub match_mode: MatchMode,
}

impl PartialEq for HintList {
    fn eq(&self, other: &HintList) -> bool {
        self.hints == other.hints && self.match_mode == other.match_mode
    }
}

impl Eq for HintList {}

impl HintList {
    pub fn new(hints: impl IntoIterator<Item = Term>, match_mode: MatchMode) -> HintList {
        let mut kept: Vec<Term> = Vec::new();
        for hint in hints {
            let hint = hint.normalize_variables();
            if !kept.iter().any(|k| is_variant(k, &hint)) {
                kept.push(hint);
            }
        }
        let mut index = DiscriminationTree::default();
        for (position, hint) in kept.iter().enumerate() {
            index.insert(ClauseId(position as u32), hint);
        }
        HintList {
            hints: kept,
            index,
            match_mode,
        }
    }

    pub fn hints(&self) -> &[Term] {
        &self.hints
    }

    pub fn len(&self) -> usize {
        self.hints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hints.is_empty()
    }
}

pub fn hint_match(term: &Term, hints: &HintList) -> bool {
    if hints.is_empty() {
        return false;
    }
    let flat = Flat::of(term);
    let hint = |id: ClauseId| &hints.hints[id.0 as usize];
    let forward = || {
        let mut found = false;
        hints.index.generalizations(&flat, &mut |id| found = found || matches(hint(id), term));
        found
    };
    let backward = || {
        let mut found = false;
        hints.index.instances(&flat, &mut |id| found = found || matches(term, hint(id)));
        found
    };
    match hints.match_mode {
        MatchMode::Forward => forward(),
        MatchMode::Backward => backward(),
        MatchMode::Both => forward() || backward(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub max_weight: i64,
    pub max_given: u64,
    pub max_kept: u64,
    /// Subtracted from the weight of hint-matched clauses (floor 1).
    pub hint_bonus: i64,
    pub back_subsumption: bool,
    /// When set to `r`, every `(r+1)`-th given clause is the oldest in sos
    /// instead of the lightest.
    pub pick_given_ratio: Option<u64>,
    /// Wall-clock budget, checked before each given clause. Runs that hit it
    /// are not reproducible.
    pub max_seconds: Option<u64>,
}

impl Default for SearchConfig {
    fn default() -> SearchConfig {
        SearchConfig {
            max_weight: 24,
            max_given: 20_000,
            max_kept: 200_000,
            hint_bonus: 1000,
            back_subsumption: true,
            pick_given_ratio: None,
            max_seconds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("`{0}` must be positive")]
    NotPositive(&'static str),
    #[error("hint_bonus must not be negative")]
    NegativeBonus,
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_weight <= 0 {
            return Err(ConfigError::NotPositive("max_weight"));
        }
        if self.max_given == 0 {
            return Err(ConfigError::NotPositive("max_given"));
        }
        if self.max_kept == 0 {
            return Err(ConfigError::NotPositive("max_kept"));
        }
        if self.pick_given_ratio == Some(0) {
            return Err(ConfigError::NotPositive("pick_given_ratio"));
        }
        if self.hint_bonus < 0 {
            return Err(ConfigError::NegativeBonus);
        }
        Ok(())
    }
}

pub fn effective_weight(
    term: &Term,
    templates: &[WeightTemplate],
    hints: &HintList,
    config: &SearchConfig,
) -> i64 {
    weigh(term, templates, hint_match(term, hints), config)
}

fn weigh(term: &Term, templates: &[WeightTemplate], hinted: bool, config: &SearchConfig) -> i64 {
    let base = templates
        .iter()
        .find(|t| subsumes(&t.pattern, term))
        .map_or(term.symbol_count() as i64, |t| t.value);
    if hinted {
        (base - config.hint_bonus).max(1)
    } else {
        base
    }
}

/// Counters named after OTTER's end-of-search statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub clauses_given: u64,
    pub clauses_generated: u64,
    pub weight_discarded: u64,
    pub forward_subsumed: u64,
    pub subsumed_by_sos: u64,
    pub clauses_kept: u64,
    pub back_subsumed: u64,
    pub usable_size: u64,
    pub sos_size: u64,
    pub wall_millis: u64,
}

impl RunStats {
    /// Rows in OTTER's wording.
    pub fn rows(&self) -> Vec<(&'static str, u64)> {
        vec![
            ("clauses given", self.clauses_given),
            ("clauses generated", self.clauses_generated),
            ("hyper res generated", self.clauses_generated),
            ("demod & eval rewrites", 0),
            ("clauses wt,lit,sk delete", self.weight_discarded),
            ("clauses forward subsumed", self.forward_subsumed),
            ("  (subsumed by sos)", self.subsumed_by_sos),
            ("clauses kept", self.clauses_kept),
            ("clauses back subsumed", self.back_subsumed),
            ("usable size", self.usable_size),
            ("sos size", self.sos_size),
            ("wall-clock time (ms)", self.wall_millis),
        ]
    }

    pub fn without_timing(mut self) -> RunStats {
        self.wall_millis = 0;
        self
    }
}

impl fmt::Display for RunStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "-------------- statistics -------------")?;
        for (name, value) in self.rows() {
            writeln!(f, "{name:<26}{value:>12}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    MaxGiven,
    MaxKept,
    MaxSeconds,
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Limit::MaxGiven => "max_given",
            Limit::MaxKept => "max_kept",
            Limit::MaxSeconds => "max_seconds",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Proof(Proof),
    Saturated,
    LimitHit(Limit),
}

impl Outcome {
    pub fn proof(&self) -> Option<&Proof> {
        match self {
            Outcome::Proof(proof) => Some(proof),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchRun {
    pub outcome: Outcome,
    pub stats: RunStats,
    /// Every clause kept during the run, in id order.
    pub kept: Vec<Clause>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("problem has no passive goal")]
    MissingGoal,
    #[error(transparent)]
    Config(#[from] ConfigError),
}

enum Step {
    Continue,
    Stop(Outcome),
}

struct Search<'a> {
    problem: &'a Problem,
    goal: &'a Goal,
    config: &'a SearchConfig,
    store: Store,
    stats: RunStats,
    observer: &'a mut dyn FnMut(&Clause, &RunStats),
}

impl<'a> Search<'a> {
    fn proof(&self, id: ClauseId) -> Outcome {
        let proof = Proof::extract(id, self.goal, |c| self.store.get(c))
            .expect("archive holds every ancestor");
        Outcome::Proof(proof)
    }

    fn add_inputs(&mut self) -> Step {
        for term in &self.problem.sos {
            let term = term.normalize_variables();
            if self.store.active().any(|c| is_variant(&c.term, &term)) {
                continue;
            }
            let hinted = hint_match(&term, &self.problem.hints);
            let weight = weigh(&term, &self.problem.templates, hinted, self.config);
            let id = self.store.insert(term, Justification::Input, weight, hinted);
            if unit_conflict(&self.store.get(id).unwrap().term, self.goal).is_some() {
                return Step::Stop(self.proof(id));
            }
        }
        Step::Continue
    }

    fn process(&mut self, derived: Term, major: ClauseId, minor: ClauseId) -> Step {
        self.stats.clauses_generated += 1;
        let hinted = hint_match(&derived, &self.problem.hints);
        let weight = weigh(&derived, &self.problem.templates, hinted, self.config);
        if weight > self.config.max_weight && !hinted {
            self.stats.weight_discarded += 1;
            return Step::Continue;
        }
        if self.store.screen(&derived).is_err() {
            return Step::Continue;
        }
        let conflict = unit_conflict(&derived, self.goal).is_some();
        let id = self
            .store
            .insert(derived, Justification::Cd { major, minor }, weight, hinted);
        self.stats.clauses_kept += 1;
        if conflict {
            return Step::Stop(self.proof(id));
        }
        if self.stats.clauses_kept >= self.config.max_kept {
            return Step::Stop(Outcome::LimitHit(Limit::MaxKept));
        }
        Step::Continue
    }

    fn infer(&mut self, major: ClauseId, minor: ClauseId) -> Step {
        let derived = {
            let major_term = &self.store.get(major).unwrap().term;
            let minor_term = &self.store.get(minor).unwrap().term;
            condensed_detach(major_term, minor_term)
        };
        match derived {
            Ok(term) => self.process(term, major, minor),
            Err(_) => Step::Continue,
        }
    }

    fn run(&mut self) -> Outcome {
        if let Step::Stop(outcome) = self.add_inputs() {
            return outcome;
        }
        let deadline = self
            .config
            .max_seconds
            .map(|s| Instant::now() + Duration::from_secs(s));
        loop {
            if self.stats.clauses_given >= self.config.max_given {
                return Outcome::LimitHit(Limit::MaxGiven);
            }
            if deadline.is_some_and(|d| Instant::now() >= d) {
                return Outcome::LimitHit(Limit::MaxSeconds);
            }
            let oldest_turn = self
                .config
                .pick_given_ratio
                .is_some_and(|r| (self.stats.clauses_given + 1) % (r + 1) == 0);
            let picked = if oldest_turn {
                self.store.pick_oldest()
            } else {
                self.store.pick_lightest()
            };
            let Some(given) = picked else {
                return Outcome::Saturated;
            };
            self.stats.clauses_given += 1;
            (self.observer)(self.store.get(given).expect("picked clause exists"), &self.stats);
            for partner in self.store.usable_ids() {
                if partner != given && self.store.location(partner) == Some(crate::store::Location::Retired) {
                    continue;
                }
                if let Step::Stop(outcome) = self.infer(given, partner) {
                    return outcome;
                }
                if partner != given {
                    if let Step::Stop(outcome) = self.infer(partner, given) {
                        return outcome;
                    }
                }
            }
        }
    }
}

/// Runs the given-clause loop until a unit conflict with the goal, an empty
/// set of support, or a resource limit.
pub fn saturate(problem: &Problem, config: &SearchConfig) -> Result<SearchRun, SearchError> {
    saturate_observed(problem, config, &mut |_, _| {})
}

/// [`saturate`], calling `observer` with each given clause as it is picked.
pub fn saturate_observed(
    problem: &Problem,
    config: &SearchConfig,
    observer: &mut dyn FnMut(&Clause, &RunStats),
) -> Result<SearchRun, SearchError> {
    config.validate()?;
    let goal = problem.goal.as_ref().ok_or(SearchError::MissingGoal)?;
    let started = Instant::now();
    let mut search = Search {
        problem,
        goal,
        config,
        store: Store::new(config.back_subsumption),
        stats: RunStats::default(),
        observer,
    };
    let outcome = search.run();
    let mut stats = search.stats;
    let counters = search.store.counters;
    stats.forward_subsumed = counters.forward_subsumed;
    stats.subsumed_by_sos = counters.subsumed_by_sos;
    stats.back_subsumed = counters.back_subsumed;
    stats.usable_size = search.store.usable_len() as u64;
    stats.sos_size = search.store.sos_len() as u64;
    stats.wall_millis = started.elapsed().as_millis() as u64;
    Ok(SearchRun {
        outcome,
        stats,
        kept: search.store.archive().to_vec(),
    })
}
