//! Syntactic unification with occurs check, one-way matching, renaming apart
//! and variant testing.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::term::Term;

/// A finite map from variables to terms. Substitutions returned by [`mgu`]
/// are idempotent.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Substitution {
    bindings: BTreeMap<u32, Term>,
}

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    pub fn bind(&mut self, var: u32, term: Term) {
        self.bindings.insert(var, term);
    }

    pub fn get(&self, var: u32) -> Option<&Term> {
        self.bindings.get(&var)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &Term)> {
        self.bindings.iter().map(|(v, t)| (*v, t))
    }

    pub fn apply(&self, term: &Term) -> Term {
        apply(self, term)
    }

    /// `self` followed by `after`: applying the result equals applying
    /// `self` and then `after`.
    pub fn then(&self, after: &Substitution) -> Substitution {
        let mut bindings: BTreeMap<u32, Term> = self
            .bindings
            .iter()
            .map(|(v, t)| (*v, after.apply(t)))
            .collect();
        for (v, t) in after.iter() {
            bindings.entry(v).or_insert_with(|| t.clone());
        }
        bindings.retain(|v, t| *t != Term::Var(*v));
        Substitution { bindings }
    }

    pub fn is_idempotent(&self) -> bool {
        self.bindings
            .values()
            .all(|t| t.variables().iter().all(|v| !self.bindings.contains_key(v)))
    }
}

impl fmt::Debug for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, (v, t)) in self.bindings.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v} ↦ {t:?}")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Error)]
pub enum UnifyFailure {
    #[error("symbol clash")]
    SymbolClash,
    #[error("occurs check")]
    OccursCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Error)]
#[error("no match")]
pub struct NoMatch;

/// Triangular bindings indexed by variable number. Used directly by the
/// inference rule so it can skip materialising a [`Substitution`].
pub(crate) struct Bindings {
    slots: Vec<Option<Term>>,
}

impl Bindings {
    pub(crate) fn with_vars(count: usize) -> Bindings {
        Bindings {
            slots: vec![None; count],
        }
    }

    fn lookup(&self, var: u32) -> Option<&Term> {
        self.slots.get(var as usize).and_then(Option::as_ref)
    }

    fn walk<'a>(&'a self, mut term: &'a Term) -> &'a Term {
        while let Term::Var(v) = term {
            match self.lookup(*v) {
                Some(bound) => term = bound,
                None => break,
            }
        }
        term
    }

    fn occurs(&self, var: u32, term: &Term) -> bool {
        match self.walk(term) {
            Term::Var(v) => *v == var,
            Term::App(_, args) => args.iter().any(|a| self.occurs(var, a)),
        }
    }

    fn bind(&mut self, var: u32, term: Term) {
        let index = var as usize;
        if index >= self.slots.len() {
            self.slots.resize(index + 1, None);
        }
        self.slots[index] = Some(term);
    }

    /// Left-to-right unification; on failure the bindings are left partially
    /// updated and must be discarded.
    pub(crate) fn unify(&mut self, left: &Term, right: &Term) -> Result<(), UnifyFailure> {
        let mut stack: Vec<(Term, Term)> = vec![(left.clone(), right.clone())];
        while let Some((s, t)) = stack.pop() {
            let s = self.walk(&s).clone();
            let t = self.walk(&t).clone();
            match (&s, &t) {
                (Term::Var(a), Term::Var(b)) if a == b => {}
                (Term::Var(a), other) | (other, Term::Var(a)) => {
                    if self.occurs(*a, other) {
                        return Err(UnifyFailure::OccursCheck);
                    }
                    self.bind(*a, other.clone());
                }
                (Term::App(f, fargs), Term::App(g, gargs)) => {
                    if f != g {
                        return Err(UnifyFailure::SymbolClash);
                    }
                    // reversed so the leftmost pair is examined first
                    for (a, b) in fargs.iter().zip(gargs.iter()).rev() {
                        stack.push((a.clone(), b.clone()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Fully applies the bindings.
    pub(crate) fn resolve(&self, term: &Term) -> Term {
        match term {
            Term::Var(v) => match self.lookup(*v) {
                Some(bound) => self.resolve(bound),
                None => term.clone(),
            },
            Term::App(_, args) if args.is_empty() => term.clone(),
            Term::App(symbol, args) => {
                Term::App(*symbol, args.iter().map(|a| self.resolve(a)).collect())
            }
        }
    }

    fn into_substitution(self) -> Substitution {
        let mut out = Substitution::new();
        for (v, slot) in self.slots.iter().enumerate() {
            if slot.is_some() {
                out.bind(v as u32, self.resolve(&Term::Var(v as u32)));
            }
        }
        out
    }
}

/// Bindings over two variable namespaces without copying either term:
/// variable `v` of side `k` lives in slot `v + k * offset`. Bound values
/// are subterms of the inputs tagged with their side.
struct Apart<'t> {
    slots: Vec<Option<(&'t Term, u32)>>,
    offset: u32,
}

impl<'t> Apart<'t> {
    fn slot(&self, var: u32, side: u32) -> usize {
        (var + side * self.offset) as usize
    }

    fn walk(&self, mut term: &'t Term, mut side: u32) -> (&'t Term, u32) {
        while let Term::Var(v) = term {
            match self.slots[self.slot(*v, side)] {
                Some((bound, bound_side)) => {
                    term = bound;
                    side = bound_side;
                }
                None => break,
            }
        }
        (term, side)
    }

    fn occurs(&self, slot: usize, term: &'t Term, side: u32) -> bool {
        match self.walk(term, side) {
            (Term::Var(v), s) => self.slot(*v, s) == slot,
            (Term::App(_, args), s) => args.iter().any(|a| self.occurs(slot, a, s)),
        }
    }

    fn unify(&mut self, left: &'t Term, right: &'t Term) -> Result<(), UnifyFailure> {
        let mut stack = vec![(left, 0, right, 1)];
        while let Some((s, s_side, t, t_side)) = stack.pop() {
            let (s, s_side) = self.walk(s, s_side);
            let (t, t_side) = self.walk(t, t_side);
            match (s, t) {
                (Term::Var(a), Term::Var(b)) if self.slot(*a, s_side) == self.slot(*b, t_side) => {}
                (Term::Var(a), _) => {
                    let slot = self.slot(*a, s_side);
                    if self.occurs(slot, t, t_side) {
                        return Err(UnifyFailure::OccursCheck);
                    }
                    self.slots[slot] = Some((t, t_side));
                }
                (_, Term::Var(b)) => {
                    let slot = self.slot(*b, t_side);
                    if self.occurs(slot, s, s_side) {
                        return Err(UnifyFailure::OccursCheck);
                    }
                    self.slots[slot] = Some((s, s_side));
                }
                (Term::App(f, fargs), Term::App(g, gargs)) => {
                    if f != g {
                        return Err(UnifyFailure::SymbolClash);
                    }
                    for (a, b) in fargs.iter().zip(gargs.iter()).rev() {
                        stack.push((a, s_side, b, t_side));
                    }
                }
            }
        }
        Ok(())
    }

    /// Applies the bindings, numbering the remaining variables in order of
    /// first occurrence.
    fn resolve(&self, term: &'t Term, side: u32, names: &mut [Option<u32>], next: &mut u32) -> Term {
        match self.walk(term, side) {
            (Term::Var(v), s) => {
                let name = &mut names[self.slot(*v, s)];
                let index = *name.get_or_insert_with(|| {
                    *next += 1;
                    *next - 1
                });
                Term::Var(index)
            }
            (t @ Term::App(_, args), _) if args.is_empty() => t.clone(),
            (Term::App(symbol, args), s) => Term::App(
                *symbol,
                args.iter().map(|a| self.resolve(a, s, names, next)).collect(),
            ),
        }
    }
}

/// Unifies `left` with a renamed-apart copy of `right` and returns the
/// variable-normalized instance of `result` (a term over `left`'s
/// variables). Same outcome as renaming, [`mgu`], [`apply`] and
/// normalizing, without building the renamed copy.
pub(crate) fn unify_apart_then(
    left: &Term,
    right: &Term,
    result: &Term,
    left_vars: u32,
) -> Result<Term, UnifyFailure> {
    let right_vars = right.max_var().map_or(0, |m| m + 1);
    let offset = left_vars;
    let mut apart = Apart {
        slots: vec![None; (offset + right_vars) as usize],
        offset,
    };
    apart.unify(left, right)?;
    let mut names = vec![None; apart.slots.len()];
    let mut next = 0;
    Ok(apart.resolve(result, 0, &mut names, &mut next))
}

fn var_capacity(terms: &[&Term]) -> usize {
    terms
        .iter()
        .filter_map(|t| t.max_var())
        .max()
        .map_or(0, |m| m as usize + 1)
}

/// Most general unifier of `s` and `t`, or the reason unification failed.
pub fn mgu(s: &Term, t: &Term) -> Result<Substitution, UnifyFailure> {
    let mut bindings = Bindings::with_vars(var_capacity(&[s, t]));
    bindings.unify(s, t)?;
    let sigma = bindings.into_substitution();
    debug_assert_eq!(sigma.apply(s), sigma.apply(t));
    Ok(sigma)
}

/// Homomorphic replacement of bound variables; unbound variables are kept.
pub fn apply(sigma: &Substitution, term: &Term) -> Term {
    if sigma.is_empty() {
        return term.clone();
    }
    term.map_vars(&mut |v| sigma.get(v).cloned().unwrap_or(Term::Var(v)))
}

pub fn rename_apart(term: &Term, offset: u32) -> Term {
    term.shift_vars(offset)
}

/// One-way matching: finds `σ` with `apply(σ, pattern) == target`. Variables
/// of `target` are treated as constants.
pub fn match_onto(pattern: &Term, target: &Term) -> Result<Substitution, NoMatch> {
    let mut slots: Vec<Option<&Term>> = vec![None; var_capacity(&[pattern])];
    if !match_into(pattern, target, &mut slots) {
        return Err(NoMatch);
    }
    let mut sigma = Substitution::new();
    for (v, slot) in slots.into_iter().enumerate() {
        if let Some(t) = slot {
            sigma.bind(v as u32, t.clone());
        }
    }
    Ok(sigma)
}

/// Allocation-light matching test used by subsumption.
pub fn matches(pattern: &Term, target: &Term) -> bool {
    let mut small: [Option<&Term>; 32] = [None; 32];
    match match_bounded(pattern, target, &mut small) {
        Some(found) => found,
        None => {
            let mut slots: Vec<Option<&Term>> = vec![None; var_capacity(&[pattern])];
            match_into(pattern, target, &mut slots)
        }
    }
}

/// Like `match_into`, but gives up with `None` on a variable beyond `slots`.
fn match_bounded<'t>(pattern: &Term, target: &'t Term, slots: &mut [Option<&'t Term>]) -> Option<bool> {
    match pattern {
        Term::Var(v) => {
            let slot = slots.get_mut(*v as usize)?;
            Some(match slot {
                Some(bound) => *bound == target,
                None => {
                    *slot = Some(target);
                    true
                }
            })
        }
        Term::App(f, fargs) => match target {
            Term::App(g, gargs) if f == g => {
                for (p, t) in fargs.iter().zip(gargs.iter()) {
                    if !match_bounded(p, t, slots)? {
                        return Some(false);
                    }
                }
                Some(true)
            }
            _ => Some(false),
        },
    }
}

fn match_into<'t>(pattern: &Term, target: &'t Term, slots: &mut [Option<&'t Term>]) -> bool {
    match pattern {
        Term::Var(v) => {
            let slot = &mut slots[*v as usize];
            match slot {
                Some(bound) => *bound == target,
                None => {
                    *slot = Some(target);
                    true
                }
            }
        }
        Term::App(f, fargs) => match target {
            Term::App(g, gargs) if f == g => fargs
                .iter()
                .zip(gargs.iter())
                .all(|(p, t)| match_into(p, t, slots)),
            _ => false,
        },
    }
}

/// True iff each term is an instance of the other.
pub fn is_variant(s: &Term, t: &Term) -> bool {
    fn walk(s: &Term, t: &Term, forward: &mut Vec<(u32, u32)>, backward: &mut Vec<(u32, u32)>) -> bool {
        match (s, t) {
            (Term::Var(a), Term::Var(b)) => {
                let fwd = forward.iter().find(|(x, _)| x == a).map(|(_, y)| *y);
                let bwd = backward.iter().find(|(y, _)| y == b).map(|(_, x)| *x);
                match (fwd, bwd) {
                    (None, None) => {
                        forward.push((*a, *b));
                        backward.push((*b, *a));
                        true
                    }
                    (Some(y), Some(x)) => y == *b && x == *a,
                    _ => false,
                }
            }
            (Term::App(f, fargs), Term::App(g, gargs)) => {
                f == g
                    && fargs
                        .iter()
                        .zip(gargs.iter())
                        .all(|(a, b)| walk(a, b, forward, backward))
            }
            _ => false,
        }
    }
    walk(s, t, &mut Vec::new(), &mut Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::strategies::{implicational, with_constants};
    use crate::term::Symbol;
    use proptest::prelude::*;

    fn v(i: u32) -> Term {
        Term::Var(i)
    }

    fn c(name: &str) -> Term {
        Term::constant(name).unwrap()
    }

    fn imp(a: Term, b: Term) -> Term {
        Term::imp(a, b)
    }

    #[test]
    fn mgu_binds_variable_to_term() {
        let sigma = mgu(&v(0), &imp(v(1), v(2))).unwrap();
        assert_eq!(sigma.len(), 1);
        assert_eq!(sigma.get(0), Some(&imp(v(1), v(2))));
    }

    #[test]
    fn mgu_composes_to_idempotent_form() {
        let s = imp(v(0), Term::neg(v(0)));
        let t = imp(imp(c("a"), c("b")), v(1));
        let sigma = mgu(&s, &t).unwrap();
        assert_eq!(sigma.get(0), Some(&imp(c("a"), c("b"))));
        assert_eq!(sigma.get(1), Some(&Term::neg(imp(c("a"), c("b")))));
        assert_eq!(sigma.apply(&s), sigma.apply(&t));
        assert!(sigma.is_idempotent());
    }

    #[test]
    fn mgu_failure_kinds() {
        assert_eq!(mgu(&v(0), &imp(v(0), v(1))), Err(UnifyFailure::OccursCheck));
        assert_eq!(mgu(&Term::neg(v(0)), &imp(v(0), v(1))), Err(UnifyFailure::SymbolClash));
        assert_eq!(mgu(&c("a"), &c("b")), Err(UnifyFailure::SymbolClash));
        // left-to-right: the clash in the first argument is found before the
        // occurs check in the second
        let s = imp(c("a"), v(0));
        let t = imp(c("b"), Term::neg(v(0)));
        assert_eq!(mgu(&s, &t), Err(UnifyFailure::SymbolClash));
    }

    #[test]
    fn apply_examples() {
        let mut sigma = Substitution::new();
        sigma.bind(0, c("a"));
        assert_eq!(apply(&sigma, &imp(v(0), v(0))), imp(c("a"), c("a")));
        let t = imp(v(3), Term::neg(v(1)));
        assert_eq!(apply(&Substitution::new(), &t), t);
    }

    #[test]
    fn rename_apart_shifts_every_variable() {
        assert_eq!(rename_apart(&imp(v(0), v(1)), 10), imp(v(10), v(11)));
        let t = imp(v(0), v(1));
        assert!(mgu(&rename_apart(&t, 5), &t).is_ok());
    }

    #[test]
    fn matching_examples() {
        let a1 = imp(v(0), imp(v(1), v(0)));
        let sigma = match_onto(&a1, &imp(c("a"), imp(c("b"), c("a")))).unwrap();
        assert_eq!(sigma.get(0), Some(&c("a")));
        assert_eq!(sigma.get(1), Some(&c("b")));

        let sigma = match_onto(&imp(v(0), v(1)), &a1).unwrap();
        assert_eq!(sigma.get(0), Some(&v(0)));
        assert_eq!(sigma.get(1), Some(&imp(v(1), v(0))));
        assert_eq!(apply(&sigma, &imp(v(0), v(1))), a1);

        assert_eq!(match_onto(&imp(v(0), v(0)), &imp(c("a"), c("b"))), Err(NoMatch));
        // target variables are rigid
        assert!(match_onto(&imp(c("a"), v(0)), &imp(v(0), v(1))).is_err());
    }

    #[test]
    fn variant_examples() {
        assert!(is_variant(&imp(v(0), v(1)), &imp(v(7), v(3))));
        assert!(!is_variant(&imp(v(0), v(0)), &imp(v(0), v(1))));
        assert!(!is_variant(&imp(v(0), v(1)), &imp(v(0), v(0))));
    }

    fn tuple(terms: &[Term]) -> Term {
        let symbol = Symbol::new("tuple", terms.len()).unwrap();
        Term::app(symbol, terms.to_vec()).unwrap()
    }

    /// Independent oracle: finds a unifier by trying every binding of the
    /// variables of `s` and `t` to terms from a small enumerated universe.
    fn brute_force_unifier(s: &Term, t: &Term, universe: &[Term]) -> Option<Substitution> {
        let mut vars = s.variables();
        for var in t.variables() {
            if !vars.contains(&var) {
                vars.push(var);
            }
        }
        if vars.len() > 4 {
            return None;
        }
        let total = universe.len().pow(vars.len() as u32);
        for code in 0..total {
            let mut theta = Substitution::new();
            let mut rest = code;
            for var in &vars {
                theta.bind(*var, universe[rest % universe.len()].clone());
                rest /= universe.len();
            }
            if apply(&theta, s) == apply(&theta, t) {
                return Some(theta);
            }
        }
        None
    }

    fn small_universe() -> Vec<Term> {
        let atoms = [c("a"), c("b")];
        let mut universe: Vec<Term> = atoms.to_vec();
        for x in &atoms {
            universe.push(Term::neg(x.clone()));
            for y in &atoms {
                universe.push(imp(x.clone(), y.clone()));
            }
        }
        universe
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn mgu_is_sound_and_idempotent(s in with_constants(4, 4), t in with_constants(4, 4)) {
            if let Ok(sigma) = mgu(&s, &t) {
                prop_assert_eq!(sigma.apply(&s), sigma.apply(&t));
                prop_assert!(sigma.is_idempotent());
                prop_assert_eq!(sigma.apply(&sigma.apply(&s)), sigma.apply(&s));
            }
        }

        #[test]
        fn mgu_is_symmetric(s in implicational(4, 4), t in implicational(4, 4)) {
            match (mgu(&s, &t), mgu(&t, &s)) {
                (Ok(a), Ok(b)) => {
                    prop_assert!(is_variant(&a.apply(&s), &b.apply(&s)));
                }
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "asymmetric: {:?} vs {:?}", a, b),
            }
        }

        #[test]
        fn mgu_is_most_general(s in with_constants(3, 3), t in with_constants(3, 3)) {
            if let Some(theta) = brute_force_unifier(&s, &t, &small_universe()) {
                let sigma = mgu(&s, &t).expect("a ground unifier exists, so mgu must succeed");
                let mut vars = s.variables();
                vars.extend(t.variables());
                vars.sort_unstable();
                vars.dedup();
                let via_sigma: Vec<Term> = vars.iter().map(|x| sigma.apply(&Term::Var(*x))).collect();
                let via_theta: Vec<Term> = vars.iter().map(|x| theta.apply(&Term::Var(*x))).collect();
                let delta = match_onto(&tuple(&via_sigma), &tuple(&via_theta));
                prop_assert!(delta.is_ok(), "theta does not factor through sigma");
                let delta = delta.unwrap();
                prop_assert_eq!(
                    sigma.then(&delta).apply(&tuple(&vars.iter().map(|x| Term::Var(*x)).collect::<Vec<_>>())),
                    tuple(&via_theta)
                );
            }
        }

        #[test]
        fn results_have_bounded_depth(s in with_constants(4, 4), t in with_constants(4, 4)) {
            if let Ok(sigma) = mgu(&s, &t) {
                let bound = s.symbol_count() * t.symbol_count() + s.depth() + t.depth();
                prop_assert!(sigma.apply(&s).depth() <= bound);
            }
        }

        #[test]
        fn rename_apart_preserves_size_and_variance(t in with_constants(6, 5), k in 1u32..40) {
            let renamed = rename_apart(&t, k);
            prop_assert_eq!(renamed.symbol_count(), t.symbol_count());
            prop_assert!(is_variant(&t, &renamed));
        }

        #[test]
        fn variant_agrees_with_normalization(s in implicational(3, 3), t in implicational(3, 3)) {
            let by_normal_form = s.normalize_variables() == t.normalize_variables();
            prop_assert_eq!(is_variant(&s, &t), by_normal_form);
            let by_matching = match_onto(&s, &t).is_ok() && match_onto(&t, &s).is_ok();
            prop_assert_eq!(is_variant(&s, &t), by_matching);
        }

        #[test]
        fn match_onto_reproduces_target(p in implicational(3, 3), t in with_constants(4, 4)) {
            if let Ok(sigma) = match_onto(&p, &t) {
                prop_assert_eq!(apply(&sigma, &p), t.clone());
            }
            prop_assert_eq!(matches(&p, &t), match_onto(&p, &t).is_ok());
        }
    }
}
