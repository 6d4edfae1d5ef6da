//! Condensed detachment, unit conflict against the negated goal, proof
//! objects and an independent proof checker.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::term::{parse_functional, ParseError, Term};
use crate::unify::{is_variant, match_onto, unify_apart_then, Substitution, UnifyFailure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClauseId(pub u32);

impl fmt::Display for ClauseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Justification {
    Input,
    Cd { major: ClauseId, minor: ClauseId },
}

impl Justification {
    pub fn parents(&self) -> Vec<ClauseId> {
        match self {
            Justification::Input => Vec::new(),
            Justification::Cd { major, minor } => vec![*major, *minor],
        }
    }
}

impl fmt::Display for Justification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Justification::Input => f.write_str("[]"),
            Justification::Cd { major, minor } => write!(f, "[cd,{major},{minor}]"),
        }
    }
}

/// A positive unit `P(term)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub id: ClauseId,
    pub term: Term,
    pub justification: Justification,
    pub weight: i64,
    pub hint_matched: bool,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} P({}).", self.id, self.justification, self.term)
    }
}

/// The negated goal `-P(term)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Goal {
    pub term: Term,
}

impl Goal {
    pub fn new(term: Term) -> Goal {
        Goal {
            term: term.normalize_variables(),
        }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "-P({})", self.term)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CdFailure {
    #[error("major premise is not an implication")]
    MajorNotImplication,
    #[error("antecedent and minor premise do not unify: {0}")]
    NoUnifier(UnifyFailure),
}

/// From `i(s,t)` and `r`, with `σ = mgu(s, r')` where `r'` is `r` renamed
/// apart, infer `tσ` (variable-normalized).
pub fn condensed_detach(major: &Term, minor: &Term) -> Result<Term, CdFailure> {
    let (antecedent, consequent) = major
        .as_implication()
        .ok_or(CdFailure::MajorNotImplication)?;
    let major_vars = major.max_var().map_or(0, |m| m + 1);
    unify_apart_then(antecedent, minor, consequent, major_vars).map_err(CdFailure::NoUnifier)
}

/// Unifies a derived unit with the goal.
///
/// Goal variables are held fixed, as if they were fresh constants: the
/// negated goal is a Skolemized formula, so only the unit's variables may be
/// bound. For a ground goal this is plain unification.
pub fn unit_conflict(term: &Term, goal: &Goal) -> Option<Substitution> {
    match_onto(term, &goal.term).ok()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conflict {
    pub clause: ClauseId,
    pub goal: Goal,
}

/// Derivation steps in increasing id order, closed under parents, ending in
/// a unit conflict with the goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proof {
    pub steps: Vec<Clause>,
    pub conflict: Conflict,
}

impl Proof {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn cd_steps(&self) -> usize {
        self.steps
            .iter()
            .filter(|c| matches!(c.justification, Justification::Cd { .. }))
            .count()
    }

    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.steps.iter().map(|c| &c.term)
    }

    /// Collects the ancestors of `conflict_clause` through `lookup`.
    pub fn extract<'a>(
        conflict_clause: ClauseId,
        goal: &Goal,
        lookup: impl Fn(ClauseId) -> Option<&'a Clause>,
    ) -> Option<Proof> {
        let mut needed: BTreeMap<ClauseId, Clause> = BTreeMap::new();
        let mut pending = vec![conflict_clause];
        while let Some(id) = pending.pop() {
            if needed.contains_key(&id) {
                continue;
            }
            let clause = lookup(id)?;
            pending.extend(clause.justification.parents());
            needed.insert(id, clause.clone());
        }
        Some(Proof {
            steps: needed.into_values().collect(),
            conflict: Conflict {
                clause: conflict_clause,
                goal: goal.clone(),
            },
        })
    }
}

impl fmt::Display for Proof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            writeln!(f, "{step}")?;
        }
        writeln!(
            f,
            "% unit conflict: {} with {}.",
            self.conflict.clause, self.conflict.goal
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ProofErrorKind {
    #[error("term is not a variant of the expected formula")]
    NotAVariant,
    #[error("parent missing or not earlier in the proof")]
    ParentsMissing,
    #[error("final clause does not unify with the goal")]
    ConflictFails,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("step {step}: {reason}")]
pub struct ProofError {
    pub step: ClauseId,
    pub reason: ProofErrorKind,
}

/// Independently replays a proof: inputs must be variants of axioms, every
/// CD step must be a variant of the detachment of its (earlier) parents, and
/// the conflict clause must unify with `goal`.
pub fn check_proof(proof: &Proof, axioms: &[Term], goal: &Goal) -> Result<(), ProofError> {
    let mut seen: BTreeMap<ClauseId, &Term> = BTreeMap::new();
    for step in &proof.steps {
        let fail = |reason| ProofError {
            step: step.id,
            reason,
        };
        if seen.contains_key(&step.id) {
            return Err(fail(ProofErrorKind::ParentsMissing));
        }
        match step.justification {
            Justification::Input => {
                if !axioms.iter().any(|a| is_variant(a, &step.term)) {
                    return Err(fail(ProofErrorKind::NotAVariant));
                }
            }
            Justification::Cd { major, minor } => {
                let (Some(major_term), Some(minor_term)) = (seen.get(&major), seen.get(&minor))
                else {
                    return Err(fail(ProofErrorKind::ParentsMissing));
                };
                match condensed_detach(major_term, minor_term) {
                    Ok(derived) if is_variant(&derived, &step.term) => {}
                    _ => return Err(fail(ProofErrorKind::NotAVariant)),
                }
            }
        }
        seen.insert(step.id, &step.term);
    }
    let conflict = proof.conflict.clause;
    match seen.get(&conflict) {
        Some(term) if unit_conflict(term, goal).is_some() => Ok(()),
        _ => Err(ProofError {
            step: conflict,
            reason: ProofErrorKind::ConflictFails,
        }),
    }
}

/// Machine-readable proof export, one record per step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofRecord {
    pub axioms: Vec<String>,
    pub goal: String,
    pub steps: Vec<StepRecord>,
    pub conflict: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub id: u32,
    pub rule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub major: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minor: Option<u32>,
    pub term: String,
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("step {step}: {source}")]
    Term {
        step: u32,
        #[source]
        source: ParseError,
    },
    #[error("step {0}: unknown rule `{1}`")]
    UnknownRule(u32, String),
    #[error("step {0}: cd step without both parents")]
    MissingParents(u32),
    #[error("goal: {0}")]
    Goal(#[source] ParseError),
    #[error("axiom {index}: {source}")]
    Axiom {
        index: usize,
        #[source]
        source: ParseError,
    },
}

impl ProofRecord {
    pub fn new(proof: &Proof, axioms: &[Term]) -> ProofRecord {
        ProofRecord {
            axioms: axioms.iter().map(Term::to_string).collect(),
            goal: proof.conflict.goal.term.to_string(),
            steps: proof
                .steps
                .iter()
                .map(|c| {
                    let (rule, major, minor) = match c.justification {
                        Justification::Input => ("input", None, None),
                        Justification::Cd { major, minor } => ("cd", Some(major.0), Some(minor.0)),
                    };
                    StepRecord {
                        id: c.id.0,
                        rule: rule.to_string(),
                        major,
                        minor,
                        term: c.term.to_string(),
                    }
                })
                .collect(),
            conflict: proof.conflict.clause.0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("proof records always serialize")
    }

    pub fn from_json(text: &str) -> Result<ProofRecord, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn axioms(&self) -> Result<Vec<Term>, RecordError> {
        self.axioms
            .iter()
            .enumerate()
            .map(|(index, text)| {
                parse_functional(text).map_err(|source| RecordError::Axiom { index, source })
            })
            .collect()
    }

    pub fn goal(&self) -> Result<Goal, RecordError> {
        let text = self.goal.trim();
        let text = text.strip_prefix('-').unwrap_or(text);
        parse_functional(text)
            .map(Goal::new)
            .map_err(RecordError::Goal)
    }

    pub fn to_proof(&self) -> Result<Proof, RecordError> {
        let goal = self.goal()?;
        let steps = self
            .steps
            .iter()
            .map(|s| {
                let term = parse_functional(&s.term)
                    .map_err(|source| RecordError::Term { step: s.id, source })?;
                let justification = match s.rule.as_str() {
                    "input" => Justification::Input,
                    "cd" => match (s.major, s.minor) {
                        (Some(major), Some(minor)) => Justification::Cd {
                            major: ClauseId(major),
                            minor: ClauseId(minor),
                        },
                        _ => return Err(RecordError::MissingParents(s.id)),
                    },
                    other => return Err(RecordError::UnknownRule(s.id, other.to_string())),
                };
                Ok(Clause {
                    id: ClauseId(s.id),
                    weight: term.symbol_count() as i64,
                    term,
                    justification,
                    hint_matched: false,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Proof {
            steps,
            conflict: Conflict {
                clause: ClauseId(self.conflict),
                goal,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::is_tautology_finite;
    use crate::term::strategies::implicational;
    use crate::term::{parse_functional, parse_polish};
    use crate::unify::{apply, mgu, rename_apart};
    use proptest::prelude::*;

    fn f(text: &str) -> Term {
        parse_functional(text).unwrap()
    }

    fn axioms() -> Vec<Term> {
        ["CpCqp", "CCpqCCqrCpr", "CCCpqqCCqpp", "CCNpNqCqp"]
            .iter()
            .map(|p| parse_polish(p).unwrap())
            .collect()
    }

    /// Oracle for a CD product: re-unify with an explicit substitution from
    /// the public API and compare up to variants.
    fn oracle_detach(major: &Term, minor: &Term) -> Option<Term> {
        let (s, t) = major.as_implication()?;
        let renamed = rename_apart(minor, 1000);
        let sigma = mgu(s, &renamed).ok()?;
        assert_eq!(apply(&sigma, s), apply(&sigma, &renamed));
        Some(apply(&sigma, t))
    }

    #[test]
    fn clause_61() {
        let a1 = f("i(x,i(y,x))");
        let derived = condensed_detach(&a1, &a1).unwrap();
        assert!(is_variant(&derived, &f("i(x,i(y,i(z,y)))")));
        assert_eq!(derived, f("i(x,i(y,i(z,y)))"));
    }

    #[test]
    fn a2_detached_with_a1() {
        let a2 = f("i(i(x,y),i(i(y,z),i(x,z)))");
        let a1 = f("i(x,i(y,x))");
        let derived = condensed_detach(&a2, &a1).unwrap();
        let expected = f("i(i(i(x,y),z),i(y,z))");
        assert!(is_variant(&derived, &expected));
        assert!(is_variant(&oracle_detach(&a2, &a1).unwrap(), &expected));
    }

    #[test]
    fn cd_failures() {
        assert_eq!(
            condensed_detach(&f("n(x)"), &f("x")),
            Err(CdFailure::MajorNotImplication)
        );
        assert_eq!(
            condensed_detach(&f("i(n(x),x)"), &f("i(x,y)")),
            Err(CdFailure::NoUnifier(UnifyFailure::SymbolClash))
        );
    }

    #[test]
    fn unit_conflict_examples() {
        let goal = Goal::new(f("i(i(i(a,b),i(b,a)),i(b,a))"));
        let exact = f("i(i(i(a,b),i(b,a)),i(b,a))");
        assert_eq!(unit_conflict(&exact, &goal), Some(Substitution::new()));

        // A1's consequent i(y,x) must equal i(b,a) and its antecedent x must
        // then be `a`, clashing with i(i(a,b),i(b,a)).
        let a1 = f("i(x,i(y,x))");
        assert_eq!(
            mgu(&a1, &goal.term.shift_vars(2)).err(),
            Some(UnifyFailure::SymbolClash)
        );
        assert_eq!(unit_conflict(&a1, &goal), None);

        let sigma = unit_conflict(&Term::Var(0), &goal).unwrap();
        assert_eq!(sigma.get(0), Some(&goal.term));
    }

    #[test]
    fn goal_variables_are_held_fixed() {
        let goal = Goal::new(f("i(x,i(y,i(z,y)))"));
        // A1 unifies with the goal but does not prove it
        assert!(mgu(&f("i(u,i(v,u))"), &goal.term).is_ok());
        assert!(unit_conflict(&f("i(x,i(y,x))"), &goal).is_none());
        assert!(unit_conflict(&f("i(x,i(y,i(z,y)))"), &goal).is_some());
        assert!(unit_conflict(&f("i(z,i(x,i(y,x)))"), &goal).is_some());
        assert!(unit_conflict(&f("i(x,x)"), &Goal::new(f("i(x,i(y,x))"))).is_none());
    }

    fn clause(id: u32, term: &str, justification: Justification) -> Clause {
        let term = f(term);
        Clause {
            id: ClauseId(id),
            weight: term.symbol_count() as i64,
            term,
            justification,
            hint_matched: false,
        }
    }

    fn clause61_proof(goal: &str) -> Proof {
        Proof {
            steps: vec![
                clause(1, "i(x,i(y,x))", Justification::Input),
                clause(
                    2,
                    "i(x,i(y,i(z,y)))",
                    Justification::Cd {
                        major: ClauseId(1),
                        minor: ClauseId(1),
                    },
                ),
            ],
            conflict: Conflict {
                clause: ClauseId(2),
                goal: Goal::new(f(goal)),
            },
        }
    }

    #[test]
    fn checker_accepts_clause_61() {
        let goal = Goal::new(f("i(x,i(y,i(z,y)))"));
        assert_eq!(check_proof(&clause61_proof("i(x,i(y,i(z,y)))"), &axioms(), &goal), Ok(()));
    }

    #[test]
    fn checker_rejects_non_matching_goal() {
        let goal = Goal::new(f("i(i(i(a,b),i(b,a)),i(b,a))"));
        let err = check_proof(&clause61_proof("i(i(i(a,b),i(b,a)),i(b,a))"), &axioms(), &goal)
            .unwrap_err();
        assert_eq!(err.reason, ProofErrorKind::ConflictFails);
        assert_eq!(err.step, ClauseId(2));
    }

    #[test]
    fn checker_rejects_missing_parent_and_foreign_input() {
        let goal = Goal::new(f("i(x,i(y,i(z,y)))"));
        let mut proof = clause61_proof("i(x,i(y,i(z,y)))");
        proof.steps.remove(0);
        let err = check_proof(&proof, &axioms(), &goal).unwrap_err();
        assert_eq!(err.reason, ProofErrorKind::ParentsMissing);

        let mut proof = clause61_proof("i(x,i(y,i(z,y)))");
        proof.steps[0].term = f("i(x,x)");
        let err = check_proof(&proof, &axioms(), &goal).unwrap_err();
        assert_eq!(err, ProofError { step: ClauseId(1), reason: ProofErrorKind::NotAVariant });
    }

    #[test]
    fn record_round_trip() {
        let proof = clause61_proof("i(x,i(y,i(z,y)))");
        let record = ProofRecord::new(&proof, &axioms());
        let back = ProofRecord::from_json(&record.to_json()).unwrap();
        let rebuilt = back.to_proof().unwrap();
        assert_eq!(rebuilt.conflict, proof.conflict);
        assert_eq!(
            rebuilt.terms().collect::<Vec<_>>(),
            proof.terms().collect::<Vec<_>>()
        );
        assert_eq!(check_proof(&rebuilt, &back.axioms().unwrap(), &back.goal().unwrap()), Ok(()));
    }

    #[test]
    fn proof_lines_use_otter_layout() {
        let text = clause61_proof("i(x,i(y,i(z,y)))").to_string();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "1 [] P(i(x,i(y,x))).");
        assert_eq!(lines[1], "2 [cd,1,1] P(i(x,i(y,i(z,y)))).");
    }

    /// All CD products of A1-A4 up to two rounds.
    fn two_rounds() -> Vec<Term> {
        let mut pool = axioms();
        for _ in 0..2 {
            let mut next = pool.clone();
            for major in &pool {
                for minor in &pool {
                    if let Ok(d) = condensed_detach(major, minor) {
                        if !next.iter().any(|t| is_variant(t, &d)) {
                            next.push(d);
                        }
                    }
                }
            }
            pool = next;
        }
        pool
    }

    #[test]
    fn cd_products_are_sound_in_finite_grids() {
        let pool = two_rounds();
        assert!(pool.len() > 20);
        for term in &pool {
            for m in [2, 3, 5] {
                assert!(
                    is_tautology_finite(term, m).unwrap(),
                    "{term} fails on grid {m}"
                );
            }
        }
    }

    #[test]
    fn cd_agrees_with_the_oracle_over_two_rounds() {
        let base = axioms();
        for major in two_rounds().iter().take(40) {
            for minor in &base {
                let ours = condensed_detach(major, minor).ok();
                let oracle = oracle_detach(major, minor);
                match (ours, oracle) {
                    (Some(a), Some(b)) => assert!(is_variant(&a, &b)),
                    (None, None) => {}
                    (a, b) => panic!("disagreement on {major} / {minor}: {a:?} vs {b:?}"),
                }
            }
        }
    }

    proptest! {
        #[test]
        fn cd_is_stable_under_renaming(
            major in implicational(4, 4),
            minor in implicational(4, 4),
            k in 0u32..30,
            j in 0u32..30,
        ) {
            let base = condensed_detach(&major, &minor);
            let moved = condensed_detach(&rename_apart(&major, k), &rename_apart(&minor, j));
            match (base, moved) {
                (Ok(a), Ok(b)) => prop_assert!(is_variant(&a, &b)),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
            }
        }

        #[test]
        fn cd_result_is_an_instance_of_the_consequent(
            major in implicational(4, 4),
            minor in implicational(4, 4),
        ) {
            if let Ok(d) = condensed_detach(&major, &minor) {
                let (_, consequent) = major.as_implication().unwrap();
                prop_assert!(match_onto(consequent, &d).is_ok());
                prop_assert!(d.is_normalized());
            }
        }
    }
}
