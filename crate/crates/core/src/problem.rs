//! OTTER-style problem files and hint pools.
//!
//! A file is a sequence of statements terminated by `.`; `%` starts a
//! comment running to the end of the line. Recognized statements:
//!
//! ```text
//! set(name).  clear(name).  assign(name, value).
//! list(sos).  list(passive).  list(hints).  list(usable).  ... end_of_list.
//! weight_list(pick_given).  weight(P(term), value).  ... end_of_list.
//! ```
//!
//! `list(usable)` may only hold the condensed-detachment nucleus
//! `-P(i(x,y)) | -P(x) | P(y)`; the rule itself is built in.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::inference::Goal;
use crate::strategy::{HintList, MatchMode, SearchConfig, WeightTemplate};
use crate::term::{parse_functional_group, ParseError, Term};
use crate::unify::is_variant;

/// Axioms A1-A4 with A5 (instantiated by constants) as the goal.
pub const LUKASIEWICZ_A1A4: &str = include_str!("../data/lukasiewicz_a1a4.in");
/// A1 alone, with the single detachment of A1 by itself as the goal.
pub const CLAUSE61: &str = include_str!("../data/clause61.in");
/// Thirty lemmas of a known derivation of A5, in hint-pool format.
pub const HINTS30: &str = include_str!("../data/hints30.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    Int(i64),
    Flag(bool),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Problem {
    pub sos: Vec<Term>,
    pub goal: Option<Goal>,
    pub hints: HintList,
    pub templates: Vec<WeightTemplate>,
    pub settings: BTreeMap<String, Setting>,
    pub warnings: Vec<Warning>,
}

const KNOWN_FLAGS: &[&str] = &["hyper_res", "back_sub"];
const KNOWN_PARAMETERS: &[&str] = &[
    "max_weight",
    "max_given",
    "max_kept",
    "hint_bonus",
    "pick_given_ratio",
    "max_seconds",
];

impl Problem {
    /// `base` overridden by the settings this file carries.
    pub fn search_config(&self, base: &SearchConfig) -> SearchConfig {
        let mut config = base.clone();
        for (name, setting) in &self.settings {
            match (name.as_str(), *setting) {
                ("max_weight", Setting::Int(v)) => config.max_weight = v,
                ("max_given", Setting::Int(v)) => config.max_given = v.max(0) as u64,
                ("max_kept", Setting::Int(v)) => config.max_kept = v.max(0) as u64,
                ("hint_bonus", Setting::Int(v)) => config.hint_bonus = v,
                ("pick_given_ratio", Setting::Int(v)) => {
                    config.pick_given_ratio = (v > 0).then_some(v as u64)
                }
                ("max_seconds", Setting::Int(v)) => config.max_seconds = (v > 0).then_some(v as u64),
                ("back_sub", Setting::Flag(on)) => config.back_subsumption = on,
                _ => {}
            }
        }
        config
    }

    pub fn with_hints(mut self, hints: Vec<Term>, mode: MatchMode) -> Problem {
        self.hints = HintList::new(hints, mode);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ProblemError {
    pub line: usize,
    pub kind: ProblemErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProblemErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("bad term: {0}")]
    Term(#[from] ParseError),
    #[error("list(usable) may only contain the nucleus -P(i(x,y)) | -P(x) | P(y)")]
    NonCdNucleus,
    #[error("more than one passive goal")]
    MultipleGoals,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("unterminated {0}")]
    Unterminated(String),
}

struct Statement {
    line: usize,
    text: String,
}

/// Splits text into `.`-terminated statements, dropping `%` comments.
fn statements(text: &str) -> Result<Vec<Statement>, ProblemError> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut start_line = 0;
    let mut depth: i64 = 0;
    for (number, raw) in text.lines().enumerate() {
        let line = number + 1;
        let code = raw.split('%').next().unwrap_or("");
        for ch in code.chars() {
            if current.trim().is_empty() && !ch.is_whitespace() {
                start_line = line;
            }
            match ch {
                '(' => depth += 1,
                ')' => depth -= 1,
                _ => {}
            }
            if ch == '.' && depth == 0 {
                out.push(Statement {
                    line: start_line,
                    text: current.trim().to_string(),
                });
                current.clear();
            } else {
                current.push(ch);
            }
        }
        current.push('\n');
    }
    if !current.trim().is_empty() {
        return Err(ProblemError {
            line: start_line,
            kind: ProblemErrorKind::Syntax(format!(
                "statement `{}` is missing its terminating `.`",
                current.trim()
            )),
        });
    }
    Ok(out)
}

/// `name(arg)` → `("name", "arg")`.
fn directive(text: &str) -> Option<(&str, &str)> {
    let open = text.find('(')?;
    let inner = text[open + 1..].strip_suffix(')')?;
    let name = text[..open].trim();
    name.chars()
        .all(|c| c.is_ascii_alphanumeric() || c == '_')
        .then_some((name, inner.trim()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    Top,
    Sos,
    Passive,
    Hints,
    Usable,
    Weights { used: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sign {
    Positive,
    Negative,
}

/// Splits a clause into signed literals over a shared variable namespace.
fn literals(text: &str) -> Result<Vec<(Sign, Term)>, ProblemErrorKind> {
    if text.contains('=') {
        return Err(ProblemErrorKind::Unsupported("equality literals".into()));
    }
    if text.contains('$') {
        return Err(ProblemErrorKind::Unsupported("answer literals".into()));
    }
    let mut signs = Vec::new();
    let mut bodies = Vec::new();
    for part in text.split('|') {
        let part = part.trim();
        let (sign, body) = match part.strip_prefix('-') {
            Some(rest) => (Sign::Negative, rest.trim_start()),
            None => (Sign::Positive, part),
        };
        let predicate = body.split('(').next().unwrap_or("").trim();
        if predicate != "P" {
            return Err(ProblemErrorKind::Syntax(format!(
                "expected a literal P(...), found `{part}`"
            )));
        }
        signs.push(sign);
        bodies.push(body);
    }
    let terms = parse_functional_group(&bodies)?;
    Ok(signs.into_iter().zip(terms).collect())
}

fn unit(text: &str, want: Sign) -> Result<Term, ProblemErrorKind> {
    let mut lits = literals(text)?;
    match (lits.len(), lits.first().map(|l| l.0)) {
        (1, Some(sign)) if sign == want => Ok(lits.remove(0).1),
        (1, _) => Err(ProblemErrorKind::Syntax(match want {
            Sign::Positive => "expected a positive unit P(...)".into(),
            Sign::Negative => "expected a negated unit -P(...)".into(),
        })),
        _ => Err(ProblemErrorKind::Unsupported(
            "non-unit clauses outside list(usable)".into(),
        )),
    }
}

/// Accepts `-P(i(X,Y)) | -P(X) | P(Y)` in any literal order, for distinct
/// variables `X`, `Y`.
fn is_cd_nucleus(lits: &[(Sign, Term)]) -> bool {
    if lits.len() != 3 {
        return false;
    }
    let negatives: Vec<&Term> = lits
        .iter()
        .filter(|l| l.0 == Sign::Negative)
        .map(|l| &l.1)
        .collect();
    let positives: Vec<&Term> = lits
        .iter()
        .filter(|l| l.0 == Sign::Positive)
        .map(|l| &l.1)
        .collect();
    let [conclusion] = positives.as_slice() else {
        return false;
    };
    let [a, b] = negatives.as_slice() else {
        return false;
    };
    let shape = |major: &Term, minor: &Term| match (major.as_implication(), minor, conclusion) {
        (Some((Term::Var(x), Term::Var(y))), Term::Var(m), Term::Var(c)) => {
            x != y && x == m && y == c
        }
        _ => false,
    };
    shape(a, b) || shape(b, a)
}

fn weight_entry(text: &str) -> Result<WeightTemplate, ProblemErrorKind> {
    let bad = || ProblemErrorKind::Syntax(format!("expected weight(P(term), value), found `{text}`"));
    let (name, inner) = directive(text).ok_or_else(bad)?;
    if name != "weight" {
        return Err(bad());
    }
    let comma = inner.rfind(',').ok_or_else(bad)?;
    let value: i64 = inner[comma + 1..].trim().parse().map_err(|_| bad())?;
    let pattern = unit(inner[..comma].trim(), Sign::Positive)?;
    Ok(WeightTemplate::new(pattern, value))
}

pub fn load_problem(text: &str) -> Result<Problem, ProblemError> {
    let mut problem = Problem::default();
    let mut hints = Vec::new();
    let mut block = Block::Top;
    let mut block_line = 0;
    for statement in statements(text)? {
        let line = statement.line;
        let err = |kind| ProblemError { line, kind };
        let text = statement.text.as_str();
        if text.is_empty() {
            return Err(err(ProblemErrorKind::Syntax("empty statement".into())));
        }
        if text == "end_of_list" {
            if block == Block::Top {
                return Err(err(ProblemErrorKind::Syntax("end_of_list outside a list".into())));
            }
            block = Block::Top;
            continue;
        }
        match block {
            Block::Top => {
                let (name, arg) = directive(text)
                    .ok_or_else(|| err(ProblemErrorKind::Syntax(format!("unexpected `{text}`"))))?;
                match name {
                    "list" => {
                        block = match arg {
                            "sos" => Block::Sos,
                            "passive" => Block::Passive,
                            "hints" => Block::Hints,
                            "usable" | "axioms" => Block::Usable,
                            other => {
                                return Err(err(ProblemErrorKind::Unsupported(format!(
                                    "list({other})"
                                ))))
                            }
                        };
                        block_line = line;
                    }
                    "weight_list" => {
                        let used = arg == "pick_given" || arg == "pick_and_purge";
                        if !used {
                            problem.warnings.push(Warning {
                                line,
                                message: format!("weight_list({arg}) ignored"),
                            });
                        }
                        block = Block::Weights { used };
                        block_line = line;
                    }
                    "set" | "clear" => {
                        if !KNOWN_FLAGS.contains(&arg) {
                            problem.warnings.push(Warning {
                                line,
                                message: format!("unknown flag `{arg}` ignored"),
                            });
                        }
                        problem
                            .settings
                            .insert(arg.to_string(), Setting::Flag(name == "set"));
                    }
                    "assign" => {
                        let (key, value) = arg.split_once(',').ok_or_else(|| {
                            err(ProblemErrorKind::Syntax("assign needs a name and a value".into()))
                        })?;
                        let key = key.trim();
                        let value: i64 = value.trim().parse().map_err(|_| {
                            err(ProblemErrorKind::Syntax(format!(
                                "assign({key}, ...) needs an integer value"
                            )))
                        })?;
                        if !KNOWN_PARAMETERS.contains(&key) {
                            problem.warnings.push(Warning {
                                line,
                                message: format!("unknown parameter `{key}` ignored"),
                            });
                        }
                        problem.settings.insert(key.to_string(), Setting::Int(value));
                    }
                    other => {
                        return Err(err(ProblemErrorKind::Syntax(format!(
                            "unknown directive `{other}`"
                        ))))
                    }
                }
            }
            Block::Sos => problem.sos.push(unit(text, Sign::Positive).map_err(err)?),
            Block::Hints => hints.push(unit(text, Sign::Positive).map_err(err)?),
            Block::Passive => {
                let term = unit(text, Sign::Negative).map_err(err)?;
                if problem.goal.is_some() {
                    return Err(err(ProblemErrorKind::MultipleGoals));
                }
                problem.goal = Some(Goal::new(term));
            }
            Block::Usable => {
                let lits = literals(text).map_err(err)?;
                if !is_cd_nucleus(&lits) {
                    return Err(err(ProblemErrorKind::NonCdNucleus));
                }
            }
            Block::Weights { used } => {
                let template = weight_entry(text).map_err(err)?;
                if used {
                    problem.templates.push(template);
                }
            }
        }
    }
    if block != Block::Top {
        return Err(ProblemError {
            line: block_line,
            kind: ProblemErrorKind::Unterminated(format!("{block:?}").to_lowercase()),
        });
    }
    problem.sos = problem.sos.iter().map(Term::normalize_variables).collect();
    problem.hints = HintList::new(hints, MatchMode::default());
    Ok(problem)
}

/// Reads a list of hints, with or without a `list(hints).` wrapper.
/// Duplicate variants are dropped; order is preserved.
pub fn load_hint_pool(text: &str) -> Result<Vec<Term>, ProblemError> {
    let mut pool: Vec<Term> = Vec::new();
    let mut open = false;
    for statement in statements(text)? {
        let line = statement.line;
        let err = |kind| ProblemError { line, kind };
        match statement.text.as_str() {
            "list(hints)" if !open => open = true,
            "end_of_list" if open => open = false,
            text => {
                let term = unit(text, Sign::Positive).map_err(err)?.normalize_variables();
                if !pool.iter().any(|t| is_variant(t, &term)) {
                    pool.push(term);
                }
            }
        }
    }
    Ok(pool)
}

pub fn write_hint_pool<'a>(terms: impl IntoIterator<Item = &'a Term>) -> String {
    let mut out = String::from("list(hints).\n");
    for term in terms {
        let _ = writeln!(out, "P({term}).");
    }
    out.push_str("end_of_list.\n");
    out
}

pub fn write_problem(problem: &Problem) -> String {
    let mut out = String::new();
    for (name, setting) in &problem.settings {
        let _ = match setting {
            Setting::Flag(true) => writeln!(out, "set({name})."),
            Setting::Flag(false) => writeln!(out, "clear({name})."),
            Setting::Int(v) => writeln!(out, "assign({name}, {v})."),
        };
    }
    out.push_str("\nlist(usable).\n-P(i(x,y)) | -P(x) | P(y).\nend_of_list.\n");
    out.push_str("\nlist(sos).\n");
    for term in &problem.sos {
        let _ = writeln!(out, "P({term}).");
    }
    out.push_str("end_of_list.\n");
    if let Some(goal) = &problem.goal {
        let _ = writeln!(out, "\nlist(passive).\n{goal}.\nend_of_list.");
    }
    if !problem.templates.is_empty() {
        out.push_str("\nweight_list(pick_given).\n");
        for t in &problem.templates {
            let _ = writeln!(out, "weight(P({}), {}).", t.pattern, t.value);
        }
        out.push_str("end_of_list.\n");
    }
    if !problem.hints.is_empty() {
        out.push('\n');
        out.push_str(&write_hint_pool(problem.hints.hints()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::is_tautology_finite;
    use crate::term::{parse_functional, parse_polish};

    fn f(text: &str) -> Term {
        parse_functional(text).unwrap()
    }

    #[test]
    fn bundled_problem_loads() {
        let p = load_problem(LUKASIEWICZ_A1A4).unwrap();
        assert_eq!(p.sos.len(), 4);
        assert_eq!(p.goal.as_ref().unwrap().term, f("i(i(i(a,b),i(b,a)),i(b,a))"));
        assert!(p.hints.is_empty());
        assert!(p.warnings.is_empty(), "{:?}", p.warnings);
        assert_eq!(p.settings.get("hyper_res"), Some(&Setting::Flag(true)));
    }

    #[test]
    fn polish_axioms_match_the_sos_block() {
        let p = load_problem(LUKASIEWICZ_A1A4).unwrap();
        for (polish, term) in ["CpCqp", "CCpqCCqrCpr", "CCCpqqCCqpp", "CCNpNqCqp"]
            .iter()
            .zip(&p.sos)
        {
            assert!(is_variant(&parse_polish(polish).unwrap(), term), "{polish}");
        }
        // the goal is an instance of A5
        let a5 = parse_polish("CCCpqCqpCqp").unwrap();
        assert!(crate::store::subsumes(&a5, &p.goal.unwrap().term));
    }

    #[test]
    fn bundled_pool_loads() {
        let pool = load_hint_pool(HINTS30).unwrap();
        assert_eq!(pool.len(), 30);
        assert_eq!(pool[0], f("i(i(i(x,y),z),i(i(n(y),n(x)),z))"));
        assert_eq!(pool[29], f("i(n(n(x)),x)"));
    }

    #[test]
    fn bundled_hints_are_grid_tautologies() {
        for hint in load_hint_pool(HINTS30).unwrap() {
            for m in 1..=4 {
                assert!(is_tautology_finite(&hint, m).unwrap(), "{hint} fails on grid {m}");
            }
        }
    }

    #[test]
    fn pool_dedups_variants_and_accepts_bare_lines() {
        let bare = "P(i(x,y)).\nP(i(z,u)). % same up to renaming\nP(n(x)).\n";
        assert_eq!(load_hint_pool(bare).unwrap(), vec![f("i(x,y)"), f("n(x)")]);
        let duplicated = HINTS30.replace(
            "end_of_list.",
            "P(i(i(i(u,v),w),i(i(n(v),n(u)),w))).\nend_of_list.",
        );
        assert_eq!(load_hint_pool(&duplicated).unwrap().len(), 30);
    }

    #[test]
    fn non_cd_nucleus_is_rejected() {
        let text = "list(usable).\n-P(x) | P(y).\nend_of_list.\n";
        let err = load_problem(text).unwrap_err();
        assert_eq!(err.kind, ProblemErrorKind::NonCdNucleus);
        assert_eq!(err.line, 2);
        let text = "list(usable).\n-P(i(x,y)) | -P(y) | P(x).\nend_of_list.\n";
        assert_eq!(load_problem(text).unwrap_err().kind, ProblemErrorKind::NonCdNucleus);
        let text = "list(usable).\n-P(x) | -P(i(x,y)) | P(y).\nend_of_list.\n";
        assert!(load_problem(text).is_ok());
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let text = "list(sos).\nP(i(x,i(y,x))).\nP(i(x,y).\nend_of_list.\n";
        let err = load_problem(text).unwrap_err();
        assert_eq!(err.line, 3);
        let err = load_problem("list(sos).\nP(i(x)).\nend_of_list.\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(matches!(err.kind, ProblemErrorKind::Term(_)));
        let err = load_problem("list(sos).\nP(x).\n").unwrap_err();
        assert!(matches!(err.kind, ProblemErrorKind::Unterminated(_)));
        let err = load_problem("list(sos).\nP(x)\nend_of_list.\n").unwrap_err();
        assert_eq!(err.line, 2);
        let err = load_problem("list(sos).\nQ(x).\nend_of_list.\n").unwrap_err();
        assert!(matches!(err.kind, ProblemErrorKind::Syntax(_)));
        let err = load_problem("list(sos).\nP(x) | P(y).\nend_of_list.\n").unwrap_err();
        assert!(matches!(err.kind, ProblemErrorKind::Unsupported(_)));
        let err = load_problem("list(sos).\nP(x) = P(y).\nend_of_list.\n").unwrap_err();
        assert!(matches!(err.kind, ProblemErrorKind::Unsupported(_)));
    }

    #[test]
    fn multiple_goals_are_rejected() {
        let text = "list(passive).\n-P(a).\n-P(b).\nend_of_list.\n";
        assert_eq!(load_problem(text).unwrap_err().kind, ProblemErrorKind::MultipleGoals);
        let text = "list(passive).\nP(a).\nend_of_list.\n";
        assert!(matches!(load_problem(text).unwrap_err().kind, ProblemErrorKind::Syntax(_)));
    }

    #[test]
    fn settings_and_templates() {
        let text = "\
set(hyper_res).
clear(back_sub).
assign(max_weight, 30).
assign(max_mem, 100000).
set(print_kept).
weight_list(pick_given).
weight(P(i(x,i(y,x))), 2).
weight(P(i(i(x,y),i(i(y,z),i(x,z)))), 2).
end_of_list.
weight_list(purge_gen).
weight(P(x), 99).
end_of_list.
";
        let p = load_problem(text).unwrap();
        assert_eq!(p.templates.len(), 2);
        assert_eq!(p.templates[0].value, 2);
        assert_eq!(p.warnings.len(), 3, "{:?}", p.warnings);
        let config = p.search_config(&SearchConfig::default());
        assert_eq!(config.max_weight, 30);
        assert!(!config.back_subsumption);
    }

    #[test]
    fn write_then_load_round_trips() {
        let mut p = load_problem(LUKASIEWICZ_A1A4).unwrap();
        p.templates.push(WeightTemplate::new(f("i(x,i(y,x))"), 2));
        p.settings.insert("max_weight".into(), Setting::Int(20));
        p.hints = HintList::new(load_hint_pool(HINTS30).unwrap(), MatchMode::Both);
        let back = load_problem(&write_problem(&p)).unwrap();
        assert_eq!(back.sos.len(), p.sos.len());
        for (a, b) in back.sos.iter().zip(&p.sos) {
            assert!(is_variant(a, b));
        }
        assert_eq!(back.goal, p.goal);
        assert_eq!(back.templates, p.templates);
        assert_eq!(back.settings, p.settings);
        assert_eq!(back.hints, p.hints);
    }

    #[test]
    fn pool_writer_round_trips() {
        let pool = load_hint_pool(HINTS30).unwrap();
        assert_eq!(load_hint_pool(&write_hint_pool(&pool)).unwrap(), pool);
    }
}
