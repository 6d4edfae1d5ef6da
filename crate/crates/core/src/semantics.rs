//! Łukasiewicz valuations in falsity degrees.
//!
//! A formula is evaluated to a rational in `[0, 1]` where `0` is the
//! designated ("fully true") value:
//!
//! * `i(p, q)` is `0` when `p >= q` and `q - p` otherwise,
//! * `k(p, q)` is `max(p, q)`,
//! * `a(p, q)` is `min(p, q)`,
//! * `n(p)` is `1 - p`.
//!
//! The usual truth-degree presentation is the `1 - x` dual of this one. The
//! maximum of two falsity degrees is the minimum of the truth degrees, so `k`
//! is the weak conjunction and `a` the weak disjunction in either reading.
//!
//! Validity over all of `[0, 1]` is not decided here. [`is_tautology_finite`]
//! checks the finite grid `{0, 1/m, ..., 1}`, which is a necessary condition.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Rational64;
use thiserror::Error;

use crate::term::{Symbol, Term};

pub type Rational = Rational64;

/// Number of grid assignments [`is_tautology_finite`] will enumerate.
pub const DEFAULT_BUDGET: u64 = 50_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("variable {0} is not assigned")]
    Unassigned(u32),
    #[error("constant or unsupported symbol `{0}` cannot be evaluated")]
    UnsupportedSymbol(String),
    #[error("value {0} lies outside [0, 1]")]
    OutOfRange(Rational),
    #[error("grid check needs {required} assignments, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u64 },
    #[error("grid resolution must be at least 1")]
    EmptyGrid,
}

/// An assignment of falsity degrees to variables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Valuation {
    values: BTreeMap<u32, Rational>,
}

impl Valuation {
    pub fn new() -> Valuation {
        Valuation::default()
    }

    pub fn set(&mut self, var: u32, value: Rational) -> Result<(), SemanticsError> {
        if value < Rational::from_integer(0) || value > Rational::from_integer(1) {
            return Err(SemanticsError::OutOfRange(value));
        }
        self.values.insert(var, value);
        Ok(())
    }

    pub fn with(mut self, var: u32, value: Rational) -> Result<Valuation, SemanticsError> {
        self.set(var, value)?;
        Ok(self)
    }

    pub fn get(&self, var: u32) -> Option<Rational> {
        self.values.get(&var).copied()
    }
}

fn check_symbol(symbol: Symbol) -> Result<(), SemanticsError> {
    match symbol {
        Symbol::IMP | Symbol::NEG | Symbol::CONJ | Symbol::DISJ => Ok(()),
        other => Err(SemanticsError::UnsupportedSymbol(other.name().to_string())),
    }
}

pub fn eval_falsity(term: &Term, valuation: &Valuation) -> Result<Rational, SemanticsError> {
    match term {
        Term::Var(v) => valuation.get(*v).ok_or(SemanticsError::Unassigned(*v)),
        Term::App(symbol, args) => {
            check_symbol(*symbol)?;
            let values = args
                .iter()
                .map(|a| eval_falsity(a, valuation))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(match *symbol {
                Symbol::IMP => implication(values[0], values[1]),
                Symbol::NEG => Rational::from_integer(1) - values[0],
                Symbol::CONJ => values[0].max(values[1]),
                _ => values[0].min(values[1]),
            })
        }
    }
}

fn implication(p: Rational, q: Rational) -> Rational {
    if p >= q {
        Rational::from_integer(0)
    } else {
        q - p
    }
}

/// Three-valued truth values with falsity degrees `F = 1`, `U = 1/2`, `T = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TruthValue3 {
    F,
    U,
    T,
}

impl TruthValue3 {
    pub const ALL: [TruthValue3; 3] = [TruthValue3::F, TruthValue3::U, TruthValue3::T];

    pub fn falsity(self) -> Rational {
        match self {
            TruthValue3::F => Rational::from_integer(1),
            TruthValue3::U => Rational::new(1, 2),
            TruthValue3::T => Rational::from_integer(0),
        }
    }

    pub fn from_falsity(value: Rational) -> Option<TruthValue3> {
        TruthValue3::ALL.into_iter().find(|t| t.falsity() == value)
    }

    /// Falsity in half-units: `T = 0`, `U = 1`, `F = 2`.
    fn halves(self) -> u8 {
        match self {
            TruthValue3::T => 0,
            TruthValue3::U => 1,
            TruthValue3::F => 2,
        }
    }

    fn from_halves(h: u8) -> TruthValue3 {
        match h {
            0 => TruthValue3::T,
            1 => TruthValue3::U,
            _ => TruthValue3::F,
        }
    }
}

impl fmt::Display for TruthValue3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            TruthValue3::F => "F",
            TruthValue3::U => "U",
            TruthValue3::T => "T",
        };
        f.write_str(c)
    }
}

/// Evaluates over `{F, U, T}` with integer arithmetic on half-units.
pub fn eval_three(
    term: &Term,
    assignment: &BTreeMap<u32, TruthValue3>,
) -> Result<TruthValue3, SemanticsError> {
    fn go(term: &Term, assignment: &BTreeMap<u32, TruthValue3>) -> Result<u8, SemanticsError> {
        match term {
            Term::Var(v) => assignment
                .get(v)
                .map(|t| t.halves())
                .ok_or(SemanticsError::Unassigned(*v)),
            Term::App(symbol, args) => {
                check_symbol(*symbol)?;
                let values = args
                    .iter()
                    .map(|a| go(a, assignment))
                    .collect::<Result<Vec<_>, _>>()?;
                let q = values.get(1).copied().unwrap_or(0) as u32;
                Ok(grid_op(*symbol, values[0] as u32, q, 2) as u8)
            }
        }
    }
    go(term, assignment).map(TruthValue3::from_halves)
}

/// The connectives on the scaled grid `{0, 1, ..., m}` (value `j` stands for
/// `j/m`), where every operation stays on the grid.
fn grid_op(symbol: Symbol, p: u32, q: u32, m: u32) -> u32 {
    match symbol {
        Symbol::IMP => q.saturating_sub(p),
        Symbol::NEG => m - p,
        Symbol::CONJ => p.max(q),
        _ => p.min(q),
    }
}

/// A term compiled to postfix over dense variable slots, for grid sweeps.
struct Compiled {
    ops: Vec<Op>,
    vars: usize,
}

enum Op {
    Load(usize),
    Apply(Symbol),
}

impl Compiled {
    fn new(term: &Term) -> Result<Compiled, SemanticsError> {
        let mut ops = Vec::new();
        let mut vars: Vec<u32> = Vec::new();
        fn walk(
            term: &Term,
            ops: &mut Vec<Op>,
            vars: &mut Vec<u32>,
        ) -> Result<(), SemanticsError> {
            match term {
                Term::Var(v) => {
                    let slot = match vars.iter().position(|x| x == v) {
                        Some(slot) => slot,
                        None => {
                            vars.push(*v);
                            vars.len() - 1
                        }
                    };
                    ops.push(Op::Load(slot));
                }
                Term::App(symbol, args) => {
                    check_symbol(*symbol)?;
                    for a in args.iter() {
                        walk(a, ops, vars)?;
                    }
                    ops.push(Op::Apply(*symbol));
                }
            }
            Ok(())
        }
        walk(term, &mut ops, &mut vars)?;
        Ok(Compiled {
            ops,
            vars: vars.len(),
        })
    }

    fn eval(&self, assignment: &[u32], m: u32, stack: &mut Vec<u32>) -> u32 {
        stack.clear();
        for op in &self.ops {
            match op {
                Op::Load(slot) => stack.push(assignment[*slot]),
                Op::Apply(symbol) => {
                    let arity = symbol.arity();
                    let base = stack.len() - arity;
                    let q = if arity == 2 { stack[base + 1] } else { 0 };
                    let value = grid_op(*symbol, stack[base], q, m);
                    stack.truncate(base);
                    stack.push(value);
                }
            }
        }
        stack[0]
    }
}

/// A grid assignment under which the formula is not designated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    /// `(variable, value)` pairs in first-occurrence order.
    pub assignment: Vec<(u32, Rational)>,
    pub falsity: Rational,
}

/// Searches the grid `{0, 1/m, ..., 1}` for an assignment with nonzero
/// falsity.
pub fn grid_counterexample(
    term: &Term,
    m: u32,
    budget: u64,
) -> Result<Option<Counterexample>, SemanticsError> {
    if m == 0 {
        return Err(SemanticsError::EmptyGrid);
    }
    let compiled = Compiled::new(term)?;
    let required = (m as u128 + 1).pow(compiled.vars as u32);
    if required > budget as u128 {
        return Err(SemanticsError::BudgetExceeded { required, budget });
    }
    let variables = term.variables();
    let mut assignment = vec![0u32; compiled.vars];
    let mut stack = Vec::with_capacity(compiled.ops.len());
    loop {
        let value = compiled.eval(&assignment, m, &mut stack);
        if value != 0 {
            let scale = m as i64;
            return Ok(Some(Counterexample {
                assignment: variables
                    .iter()
                    .zip(&assignment)
                    .map(|(v, a)| (*v, Rational::new(*a as i64, scale)))
                    .collect(),
                falsity: Rational::new(value as i64, scale),
            }));
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == assignment.len() {
                return Ok(None);
            }
            if assignment[k] < m {
                assignment[k] += 1;
                break;
            }
            assignment[k] = 0;
            k += 1;
        }
    }
}

pub fn is_tautology_finite(term: &Term, m: u32) -> Result<bool, SemanticsError> {
    is_tautology_finite_with_budget(term, m, DEFAULT_BUDGET)
}

pub fn is_tautology_finite_with_budget(
    term: &Term,
    m: u32,
    budget: u64,
) -> Result<bool, SemanticsError> {
    grid_counterexample(term, m, budget).map(|c| c.is_none())
}

/// One row per assignment of `{F, U, T}` to the variables (first-occurrence
/// order), enumerated with the first variable varying slowest.
pub fn truth_table3(term: &Term) -> Result<Vec<(Vec<TruthValue3>, TruthValue3)>, SemanticsError> {
    let variables = term.variables();
    let rows = 3usize.pow(variables.len() as u32);
    let mut out = Vec::with_capacity(rows);
    for code in 0..rows {
        let mut values = vec![TruthValue3::F; variables.len()];
        let mut rest = code;
        for slot in (0..variables.len()).rev() {
            values[slot] = TruthValue3::ALL[rest % 3];
            rest /= 3;
        }
        let assignment: BTreeMap<u32, TruthValue3> =
            variables.iter().copied().zip(values.iter().copied()).collect();
        out.push((values, eval_three(term, &assignment)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::strategies::implicational;
    use crate::term::{parse_functional, parse_polish};
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn f(text: &str) -> Term {
        parse_functional(text).unwrap()
    }

    fn val(pairs: &[(u32, Rational)]) -> Valuation {
        let mut v = Valuation::new();
        for (var, value) in pairs {
            v.set(*var, *value).unwrap();
        }
        v
    }

    #[test]
    fn worked_examples() {
        let imp = f("i(x,y)");
        assert_eq!(eval_falsity(&imp, &val(&[(0, r(7, 10)), (1, r(3, 10))])).unwrap(), r(0, 1));
        assert_eq!(eval_falsity(&imp, &val(&[(0, r(3, 10)), (1, r(7, 10))])).unwrap(), r(2, 5));
        assert_eq!(eval_falsity(&f("n(x)"), &val(&[(0, r(1, 4))])).unwrap(), r(3, 4));
    }

    #[test]
    fn k_is_max_and_a_is_min() {
        let v = val(&[(0, r(1, 3)), (1, r(3, 4))]);
        assert_eq!(eval_falsity(&parse_polish("Kpq").unwrap(), &v).unwrap(), r(3, 4));
        assert_eq!(eval_falsity(&parse_polish("Apq").unwrap(), &v).unwrap(), r(1, 3));
    }

    #[test]
    fn evaluation_errors() {
        assert_eq!(
            eval_falsity(&f("i(x,y)"), &val(&[(0, r(1, 2))])),
            Err(SemanticsError::Unassigned(1))
        );
        assert!(matches!(
            eval_falsity(&f("i(a,x)"), &val(&[(0, r(1, 2))])),
            Err(SemanticsError::UnsupportedSymbol(_))
        ));
        assert!(Valuation::new().set(0, r(3, 2)).is_err());
        assert!(Valuation::new().set(0, r(-1, 2)).is_err());
    }

    #[test]
    fn three_valued_table() {
        use TruthValue3::*;
        let imp = f("i(x,y)");
        // rows A, columns B as printed: F U T
        let expected = [(F, [T, T, T]), (U, [U, T, T]), (T, [F, U, T])];
        for (a, row) in expected {
            for (b, want) in [F, U, T].into_iter().zip(row) {
                let assignment = BTreeMap::from([(0, a), (1, b)]);
                assert_eq!(eval_three(&imp, &assignment).unwrap(), want, "{a} -> {b}");
            }
        }
    }

    #[test]
    fn three_valued_agrees_with_rationals_on_every_connective() {
        for text in ["i(x,y)", "n(x)"] {
            let t = f(text);
            for a in TruthValue3::ALL {
                for b in TruthValue3::ALL {
                    check_agreement(&t, a, b);
                }
            }
        }
        for polish in ["Kpq", "Apq"] {
            let t = parse_polish(polish).unwrap();
            for a in TruthValue3::ALL {
                for b in TruthValue3::ALL {
                    check_agreement(&t, a, b);
                }
            }
        }
    }

    fn check_agreement(t: &Term, a: TruthValue3, b: TruthValue3) {
        let three = BTreeMap::from([(0, a), (1, b)]);
        let rational = val(&[(0, a.falsity()), (1, b.falsity())]);
        let expected = eval_falsity(t, &rational).unwrap();
        assert_eq!(eval_three(t, &three).unwrap().falsity(), expected);
    }

    #[test]
    fn grid_examples() {
        assert!(is_tautology_finite(&f("i(x,i(y,x))"), 5).unwrap());
        let cx = grid_counterexample(&f("i(x,n(x))"), 2, DEFAULT_BUDGET)
            .unwrap()
            .unwrap();
        assert_eq!(cx.assignment, vec![(0, r(0, 1))]);
        assert_eq!(cx.falsity, r(1, 1));
        // m = 1 is the classical check: excluded middle style formulas hold
        assert!(is_tautology_finite(&f("i(i(n(x),x),x)"), 1).unwrap());
        assert!(!is_tautology_finite(&f("i(i(n(x),x),x)"), 2).unwrap());
        assert!(!is_tautology_finite(&f("i(x,y)"), 1).unwrap());
    }

    #[test]
    fn grid_errors() {
        assert_eq!(
            is_tautology_finite(&f("i(x,x)"), 0),
            Err(SemanticsError::EmptyGrid)
        );
        let err = is_tautology_finite_with_budget(&f("i(x,i(y,i(z,x)))"), 9, 100).unwrap_err();
        assert_eq!(err, SemanticsError::BudgetExceeded { required: 1000, budget: 100 });
    }

    #[test]
    fn axioms_are_grid_tautologies() {
        for polish in ["CpCqp", "CCpqCCqrCpr", "CCCpqqCCqpp", "CCNpNqCqp", "CCCpqCqpCqp"] {
            let t = parse_polish(polish).unwrap();
            for m in 1..=6 {
                assert!(is_tautology_finite(&t, m).unwrap(), "{polish} on grid {m}");
            }
        }
    }

    #[test]
    fn truth_table_layout() {
        let rows = truth_table3(&f("i(x,y)")).unwrap();
        assert_eq!(rows.len(), 9);
        assert_eq!(rows[0].0, vec![TruthValue3::F, TruthValue3::F]);
        assert_eq!(rows[0].1, TruthValue3::T);
        assert_eq!(rows[8 - 2].0, vec![TruthValue3::T, TruthValue3::F]);
        assert_eq!(rows[8 - 2].1, TruthValue3::F);
    }

    /// Exhaustive rational evaluation over the grid, independent of the
    /// compiled integer evaluator.
    fn rational_grid_check(t: &Term, m: u32) -> bool {
        let vars = t.variables();
        let total = (m as usize + 1).pow(vars.len() as u32);
        (0..total).all(|code| {
            let mut v = Valuation::new();
            let mut rest = code;
            for var in &vars {
                v.set(*var, r((rest % (m as usize + 1)) as i64, m as i64)).unwrap();
                rest /= m as usize + 1;
            }
            eval_falsity(t, &v).unwrap() == r(0, 1)
        })
    }

    proptest! {
        #[test]
        fn falsity_stays_in_unit_interval(t in implicational(3, 5), a in 0i64..=12, b in 0i64..=12, c in 0i64..=12) {
            let v = val(&[(0, r(a, 12)), (1, r(b, 12)), (2, r(c, 12))]);
            let value = eval_falsity(&t, &v).unwrap();
            prop_assert!(value >= r(0, 1) && value <= r(1, 1));
        }

        #[test]
        fn grid_check_matches_rational_sweep(t in implicational(3, 5), m in 1u32..5) {
            prop_assert_eq!(is_tautology_finite(&t, m).unwrap(), rational_grid_check(&t, m));
        }
    }
}
