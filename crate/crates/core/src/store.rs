//! The kept-clause database: set of support, usable list, an archive of every
//! kept clause, and unit subsumption in both directions.

use std::collections::BTreeSet;

use crate::inference::{Clause, ClauseId, Justification};
use crate::term::{Symbol, Term};
use crate::unify::{is_variant, matches};

/// Unit subsumption: `general` subsumes `specific` iff it matches onto it.
pub fn subsumes(general: &Term, specific: &Term) -> bool {
    general.symbol_count() <= specific.symbol_count() && matches(general, specific)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Sos,
    Usable,
    /// Back subsumed; kept only so proofs can reference it.
    Retired,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SubsumptionCounters {
    pub forward_subsumed: u64,
    pub subsumed_by_sos: u64,
    pub back_subsumed: u64,
}

/// One position of a term flattened in preorder; variables are wildcards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Key {
    Star,
    Sym(Symbol),
}

/// Preorder keys of a term, with the end of the subterm at each position.
pub(crate) struct Flat {
    keys: Vec<Key>,
    ends: Vec<usize>,
}

impl Flat {
    pub(crate) fn of(term: &Term) -> Flat {
        fn walk(term: &Term, flat: &mut Flat) {
            let at = flat.keys.len();
            flat.ends.push(0);
            match term {
                Term::Var(_) => flat.keys.push(Key::Star),
                Term::App(symbol, args) => {
                    flat.keys.push(Key::Sym(*symbol));
                    for arg in args.iter() {
                        walk(arg, flat);
                    }
                }
            }
            flat.ends[at] = flat.keys.len();
        }
        let mut flat = Flat {
            keys: Vec::new(),
            ends: Vec::new(),
        };
        walk(term, &mut flat);
        flat
    }
}

#[derive(Debug, Clone, Default)]
struct Node {
    children: Vec<(Key, u32)>,
    /// Nodes reached from here by reading exactly one whole term.
    jumps: Vec<u32>,
    leaves: Vec<ClauseId>,
}

/// Discrimination tree over preorder keys. Retrieval is imperfect for
/// repeated variables, so hits are confirmed by matching.
#[derive(Debug, Clone)]
pub(crate) struct DiscriminationTree {
    nodes: Vec<Node>,
    dead: usize,
    live: usize,
}

impl Default for DiscriminationTree {
    fn default() -> DiscriminationTree {
        DiscriminationTree {
            nodes: vec![Node::default()],
            dead: 0,
            live: 0,
        }
    }
}

impl DiscriminationTree {
    pub(crate) fn insert(&mut self, id: ClauseId, term: &Term) {
        let flat = Flat::of(term);
        let mut path = Vec::with_capacity(flat.keys.len() + 1);
        let mut fresh = Vec::with_capacity(flat.keys.len() + 1);
        let mut node = 0usize;
        path.push(node);
        fresh.push(false);
        for &key in &flat.keys {
            let found = self.nodes[node]
                .children
                .iter()
                .find(|(k, _)| *k == key)
                .map(|&(_, child)| child as usize);
            let created = found.is_none();
            node = found.unwrap_or_else(|| {
                let child = self.nodes.len();
                self.nodes.push(Node::default());
                self.nodes[node].children.push((key, child as u32));
                child
            });
            path.push(node);
            fresh.push(created);
        }
        // A jump already exists unless its target node is new: an existing
        // target means the same prefix, and so the same subterm, was stored.
        for (at, &end) in flat.ends.iter().enumerate() {
            if fresh[end] {
                let target = path[end] as u32;
                self.nodes[path[at]].jumps.push(target);
            }
        }
        self.nodes[node].leaves.push(id);
        self.live += 1;
    }

    /// Calls `visit` on every stored id that may generalize the query.
    pub(crate) fn generalizations(&self, query: &Flat, visit: &mut impl FnMut(ClauseId)) {
        self.generalize_from(0, 0, query, visit);
    }

    fn generalize_from(&self, node: usize, at: usize, query: &Flat, visit: &mut impl FnMut(ClauseId)) {
        let node = &self.nodes[node];
        if at == query.keys.len() {
            node.leaves.iter().copied().for_each(visit);
            return;
        }
        for &(key, child) in &node.children {
            match key {
                Key::Star => self.generalize_from(child as usize, query.ends[at], query, visit),
                Key::Sym(_) if key == query.keys[at] => {
                    self.generalize_from(child as usize, at + 1, query, visit)
                }
                Key::Sym(_) => {}
            }
        }
    }

    /// Calls `visit` on every stored id that may be an instance of the query.
    pub(crate) fn instances(&self, query: &Flat, visit: &mut impl FnMut(ClauseId)) {
        self.instantiate_from(0, 0, query, visit);
    }

    fn instantiate_from(&self, node: usize, at: usize, query: &Flat, visit: &mut impl FnMut(ClauseId)) {
        if at == query.keys.len() {
            self.nodes[node].leaves.iter().copied().for_each(visit);
            return;
        }
        let node = &self.nodes[node];
        match query.keys[at] {
            Key::Star => {
                for &end in &node.jumps {
                    self.instantiate_from(end as usize, at + 1, query, visit);
                }
            }
            key => {
                for &(k, child) in &node.children {
                    if k == key {
                        self.instantiate_from(child as usize, at + 1, query, visit);
                    }
                }
            }
        }
    }
}

pub struct Store {
    archive: Vec<Clause>,
    location: Vec<Location>,
    sizes: Vec<u32>,
    sos_by_weight: BTreeSet<(i64, ClauseId)>,
    sos_by_age: BTreeSet<ClauseId>,
    usable: BTreeSet<ClauseId>,
    index: Option<DiscriminationTree>,
    back_subsumption: bool,
    pub counters: SubsumptionCounters,
}

impl Default for Store {
    fn default() -> Store {
        Store::new(true)
    }
}

impl Store {
    pub fn new(back_subsumption: bool) -> Store {
        Store {
            archive: Vec::new(),
            location: Vec::new(),
            sizes: Vec::new(),
            sos_by_weight: BTreeSet::new(),
            sos_by_age: BTreeSet::new(),
            usable: BTreeSet::new(),
            index: Some(DiscriminationTree::default()),
            back_subsumption,
            counters: SubsumptionCounters::default(),
        }
    }

    /// A store that answers every subsumption query by linear scan.
    pub fn without_index(back_subsumption: bool) -> Store {
        Store {
            index: None,
            ..Store::new(back_subsumption)
        }
    }

    pub fn back_subsumption(&self) -> bool {
        self.back_subsumption
    }

    pub fn next_id(&self) -> ClauseId {
        ClauseId(self.archive.len() as u32 + 1)
    }

    /// Adds a clause to the set of support under the next id. `term` must be
    /// variable-normalized.
    pub fn insert(
        &mut self,
        term: Term,
        justification: Justification,
        weight: i64,
        hint_matched: bool,
    ) -> ClauseId {
        debug_assert!(term.is_normalized());
        let id = self.next_id();
        if let Justification::Cd { major, minor } = justification {
            debug_assert!(major < id && minor < id);
        }
        if let Some(index) = self.index.as_mut() {
            index.insert(id, &term);
        }
        self.sizes.push(term.symbol_count() as u32);
        self.archive.push(Clause {
            id,
            term,
            justification,
            weight,
            hint_matched,
        });
        self.location.push(Location::Sos);
        self.sos_by_weight.insert((weight, id));
        self.sos_by_age.insert(id);
        id
    }

    pub fn get(&self, id: ClauseId) -> Option<&Clause> {
        self.archive.get((id.0 as usize).checked_sub(1)?)
    }

    pub fn location(&self, id: ClauseId) -> Option<Location> {
        self.location.get((id.0 as usize).checked_sub(1)?).copied()
    }

    fn slot(id: ClauseId) -> usize {
        id.0 as usize - 1
    }

    fn is_active(&self, id: ClauseId) -> bool {
        self.location[Self::slot(id)] != Location::Retired
    }

    /// Every clause ever kept, including retired ones, in id order.
    pub fn archive(&self) -> &[Clause] {
        &self.archive
    }

    pub fn sos_len(&self) -> usize {
        self.sos_by_age.len()
    }

    pub fn usable_len(&self) -> usize {
        self.usable.len()
    }

    pub fn usable_ids(&self) -> Vec<ClauseId> {
        self.usable.iter().copied().collect()
    }

    pub fn sos_ids(&self) -> Vec<ClauseId> {
        self.sos_by_age.iter().copied().collect()
    }

    /// Active (sos and usable) clauses in id order.
    pub fn active(&self) -> impl Iterator<Item = &Clause> {
        self.archive.iter().filter(|c| self.is_active(c.id))
    }

    fn take_from_sos(&mut self, id: ClauseId) {
        let weight = self.archive[Self::slot(id)].weight;
        self.sos_by_weight.remove(&(weight, id));
        self.sos_by_age.remove(&id);
        self.usable.insert(id);
        self.location[Self::slot(id)] = Location::Usable;
    }

    /// Moves the sos clause with least `(weight, id)` to usable.
    pub fn pick_lightest(&mut self) -> Option<ClauseId> {
        let &(_, id) = self.sos_by_weight.first()?;
        self.take_from_sos(id);
        Some(id)
    }

    /// Moves the oldest sos clause to usable.
    pub fn pick_oldest(&mut self) -> Option<ClauseId> {
        let &id = self.sos_by_age.first()?;
        self.take_from_sos(id);
        Some(id)
    }

    /// Lowest id among active clauses subsuming `candidate`, updating the
    /// forward-subsumption counters on a hit.
    pub fn forward_subsumed(&mut self, candidate: &Term) -> Option<ClauseId> {
        let hit = self.find_subsumer(candidate);
        self.count_forward(hit);
        hit
    }

    fn count_forward(&mut self, hit: Option<ClauseId>) {
        if let Some(id) = hit {
            self.counters.forward_subsumed += 1;
            if self.location(id) == Some(Location::Sos) {
                self.counters.subsumed_by_sos += 1;
            }
        }
    }

    /// Forward subsumption followed, for a survivor, by back subsumption:
    /// `Err(subsumer)` or `Ok(retired ids)`.
    pub fn screen(&mut self, candidate: &Term) -> Result<Vec<ClauseId>, ClauseId> {
        if self.index.is_none() {
            if let Some(id) = self.forward_subsumed(candidate) {
                return Err(id);
            }
            return Ok(self.back_subsume(candidate));
        }
        let flat = Flat::of(candidate);
        let index = self.index.as_ref().expect("checked above");
        let hit = self.indexed_subsumer(index, &flat, candidate);
        self.count_forward(hit);
        if let Some(id) = hit {
            return Err(id);
        }
        if !self.back_subsumption {
            return Ok(Vec::new());
        }
        let index = self.index.as_ref().expect("checked above");
        let victims = self.indexed_subsumed(index, &flat, candidate);
        Ok(self.retire_all(victims))
    }

    /// Pure lookup behind [`Store::forward_subsumed`].
    pub fn find_subsumer(&self, candidate: &Term) -> Option<ClauseId> {
        match &self.index {
            Some(index) => self.indexed_subsumer(index, &Flat::of(candidate), candidate),
            None => self.linear_subsumer(candidate),
        }
    }

    pub fn linear_subsumer(&self, candidate: &Term) -> Option<ClauseId> {
        self.active()
            .find(|c| subsumes(&c.term, candidate))
            .map(|c| c.id)
    }

    fn indexed_subsumer(&self, index: &DiscriminationTree, flat: &Flat, candidate: &Term) -> Option<ClauseId> {
        let size = flat.keys.len() as u32;
        let mut best: Option<ClauseId> = None;
        index.generalizations(flat, &mut |id| {
            if best.is_some_and(|b| id >= b) {
                return;
            }
            let slot = Self::slot(id);
            if self.sizes[slot] <= size
                && self.is_active(id)
                && matches(&self.archive[slot].term, candidate)
            {
                best = Some(id);
            }
        });
        best
    }

    /// Retires every active clause strictly subsumed by `general` and returns
    /// their ids. Does nothing when back subsumption is disabled.
    pub fn back_subsume(&mut self, general: &Term) -> Vec<ClauseId> {
        if !self.back_subsumption {
            return Vec::new();
        }
        let victims = self.find_subsumed(general);
        self.retire_all(victims)
    }

    fn retire_all(&mut self, victims: Vec<ClauseId>) -> Vec<ClauseId> {
        for &id in &victims {
            self.retire(id);
        }
        self.counters.back_subsumed += victims.len() as u64;
        self.maybe_compact();
        victims
    }

    /// Active clauses strictly subsumed by `general`, in id order.
    pub fn find_subsumed(&self, general: &Term) -> Vec<ClauseId> {
        match &self.index {
            Some(index) => self.indexed_subsumed(index, &Flat::of(general), general),
            None => {
                let size = general.symbol_count() as u32;
                self.active()
                    .filter(|c| self.sizes[Self::slot(c.id)] >= size && self.strictly_subsumes(general, c.id))
                    .map(|c| c.id)
                    .collect()
            }
        }
    }

    fn strictly_subsumes(&self, general: &Term, id: ClauseId) -> bool {
        let term = &self.archive[Self::slot(id)].term;
        matches(general, term) && !is_variant(general, term)
    }

    fn indexed_subsumed(&self, index: &DiscriminationTree, flat: &Flat, general: &Term) -> Vec<ClauseId> {
        let size = flat.keys.len() as u32;
        let mut out = Vec::new();
        index.instances(flat, &mut |id| {
            if self.sizes[Self::slot(id)] >= size && self.is_active(id) && self.strictly_subsumes(general, id) {
                out.push(id);
            }
        });
        out.sort_unstable();
        out
    }

    fn retire(&mut self, id: ClauseId) {
        match self.location[Self::slot(id)] {
            Location::Sos => {
                let weight = self.archive[Self::slot(id)].weight;
                self.sos_by_weight.remove(&(weight, id));
                self.sos_by_age.remove(&id);
            }
            Location::Usable => {
                self.usable.remove(&id);
            }
            Location::Retired => return,
        }
        self.location[Self::slot(id)] = Location::Retired;
        if let Some(index) = self.index.as_mut() {
            index.dead += 1;
            index.live -= 1;
        }
    }

    fn maybe_compact(&mut self) {
        let Some(index) = self.index.as_mut() else {
            return;
        };
        if index.dead < 1024 || index.dead < index.live {
            return;
        }
        let mut fresh = DiscriminationTree::default();
        for (slot, clause) in self.archive.iter().enumerate() {
            if self.location[slot] != Location::Retired {
                fresh.insert(clause.id, &clause.term);
            }
        }
        *index = fresh;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::parse_functional;
    use crate::term::strategies::with_constants;
    use crate::unify::match_onto;
    use proptest::prelude::*;

    fn f(text: &str) -> Term {
        parse_functional(text).unwrap()
    }

    fn store_with(terms: &[&str]) -> Store {
        let mut store = Store::new(true);
        for t in terms {
            let term = f(t);
            let weight = term.symbol_count() as i64;
            store.insert(term, Justification::Input, weight, false);
        }
        store
    }

    const AXIOMS: [&str; 4] = [
        "i(x,i(y,x))",
        "i(i(x,y),i(i(y,z),i(x,z)))",
        "i(i(i(x,y),y),i(i(y,x),x))",
        "i(i(n(x),n(y)),i(y,x))",
    ];

    #[test]
    fn subsumption_examples() {
        assert!(subsumes(&f("i(x,i(y,x))"), &f("i(a,i(b,a))")));
        assert!(subsumes(&f("i(x,y)"), &f("i(x,i(y,x))")));
        assert!(!subsumes(&f("i(x,x)"), &f("i(a,b)")));
    }

    #[test]
    fn clause_61_is_not_forward_subsumed_by_the_axioms() {
        let mut store = store_with(&AXIOMS);
        let c61 = f("i(x,i(y,i(z,y)))");
        for axiom in AXIOMS {
            assert!(match_onto(&f(axiom), &c61).is_err());
        }
        assert_eq!(store.forward_subsumed(&c61), None);
        assert_eq!(store.counters.forward_subsumed, 0);
    }

    #[test]
    fn forward_subsumption_reports_lowest_subsumer() {
        let mut store = store_with(&AXIOMS);
        assert_eq!(store.forward_subsumed(&f("i(a,i(b,a))")), Some(ClauseId(1)));
        assert_eq!(store.forward_subsumed(&f(AXIOMS[3])), Some(ClauseId(4)));
        assert_eq!(store.counters.forward_subsumed, 2);
        assert_eq!(store.counters.subsumed_by_sos, 2);

        store.pick_lightest();
        assert_eq!(store.forward_subsumed(&f("i(n(x),i(y,n(x)))")), Some(ClauseId(1)));
        assert_eq!(store.counters.subsumed_by_sos, 2);

        store.insert(f("x"), Justification::Input, 1, false);
        assert_eq!(store.forward_subsumed(&f("i(x,i(y,x))")), Some(ClauseId(1)));
        assert_eq!(store.forward_subsumed(&f("n(x)")), Some(ClauseId(5)));
    }

    #[test]
    fn back_subsumption_examples() {
        let mut store = store_with(&["i(a,b)", "i(x,i(y,x))"]);
        let removed = store.back_subsume(&f("i(x,y)"));
        assert_eq!(removed, vec![ClauseId(1), ClauseId(2)]);
        assert_eq!(store.sos_len(), 0);
        assert_eq!(store.location(ClauseId(1)), Some(Location::Retired));
        // retired clauses stay in the archive
        assert_eq!(store.get(ClauseId(2)).unwrap().term, f("i(x,i(y,x))"));

        let mut store = store_with(&["i(x,i(y,x))"]);
        assert!(store.back_subsume(&f("i(z,i(u,z))")).is_empty());
        assert!(Store::new(true).back_subsume(&f("i(x,y)")).is_empty());

        let mut off = Store::new(false);
        off.insert(f("i(a,b)"), Justification::Input, 3, false);
        assert!(off.back_subsume(&f("i(x,y)")).is_empty());
    }

    #[test]
    fn pick_order_is_weight_then_id() {
        let mut store = Store::new(true);
        store.insert(f("i(x,i(y,x))"), Justification::Input, 5, false);
        store.insert(f("n(x)"), Justification::Input, 2, false);
        store.insert(f("n(n(x))"), Justification::Input, 2, false);
        assert_eq!(store.pick_lightest(), Some(ClauseId(2)));
        assert_eq!(store.pick_oldest(), Some(ClauseId(1)));
        assert_eq!(store.pick_lightest(), Some(ClauseId(3)));
        assert_eq!(store.pick_lightest(), None);
        assert_eq!(store.usable_ids(), vec![ClauseId(1), ClauseId(2), ClauseId(3)]);
    }

    fn workload() -> impl Strategy<Value = (Vec<Term>, Vec<Term>)> {
        (
            proptest::collection::vec(with_constants(3, 3), 1..25),
            proptest::collection::vec(with_constants(4, 4), 1..25),
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn index_matches_linear_scan((stored, queries) in workload()) {
            let mut indexed = Store::new(true);
            let mut linear = Store::without_index(true);
            for t in &stored {
                let t = t.normalize_variables();
                if indexed.forward_subsumed(&t).is_none() {
                    prop_assert_eq!(linear.forward_subsumed(&t), None);
                    prop_assert_eq!(indexed.back_subsume(&t), linear.back_subsume(&t));
                    indexed.insert(t.clone(), Justification::Input, 1, false);
                    linear.insert(t, Justification::Input, 1, false);
                } else {
                    prop_assert!(linear.forward_subsumed(&t).is_some());
                }
            }
            for q in &queries {
                prop_assert_eq!(indexed.find_subsumer(q), linear.find_subsumer(q));
                prop_assert_eq!(indexed.find_subsumed(q), linear.find_subsumed(q));
            }
        }

        #[test]
        fn store_stays_subsumption_free(terms in proptest::collection::vec(with_constants(3, 3), 1..30)) {
            let mut store = Store::new(true);
            for t in terms {
                let t = t.normalize_variables();
                if store.forward_subsumed(&t).is_none() {
                    store.back_subsume(&t);
                    store.insert(t, Justification::Input, 1, false);
                }
            }
            let active: Vec<&Clause> = store.active().collect();
            for a in &active {
                for b in &active {
                    if a.id != b.id {
                        prop_assert!(!subsumes(&a.term, &b.term), "{} subsumes {}", a.term, b.term);
                    }
                }
            }
        }

        #[test]
        fn subsumption_is_reflexive_and_transitive(
            a in with_constants(3, 3),
            b in with_constants(3, 3),
            c in with_constants(3, 3),
        ) {
            prop_assert!(subsumes(&a, &a));
            if subsumes(&a, &b) && subsumes(&b, &c) {
                prop_assert!(subsumes(&a, &c));
            }
            prop_assert_eq!(is_variant(&a, &b), subsumes(&a, &b) && subsumes(&b, &a));
        }
    }
}
