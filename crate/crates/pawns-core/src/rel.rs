//! The abstract state of the sharing analysis: a set of unordered
//! may-alias pairs over (owner, component). Self-pairs record that a
//! component may exist (be populated) for an owner.

use crate::components::{alias_compatible, Component};
use std::collections::BTreeSet;
use std::fmt;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Owner {
    /// A local variable or formal parameter (body space), or a sharing
    /// pattern name (declaration space).
    Var(String),
    State(String),
    /// The pseudo-variable for unknown/encapsulated sharing, one per type.
    Abstract(String),
    /// Expression temporary, dropped at statement boundaries.
    Temp(u32),
}

impl Owner {
    pub fn is_abstract(&self) -> bool {
        matches!(self, Owner::Abstract(_))
    }

    pub fn is_temp(&self) -> bool {
        matches!(self, Owner::Temp(_))
    }
}

impl fmt::Display for Owner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Owner::Var(n) => write!(f, "{}", n),
            Owner::State(n) => write!(f, "{}", n),
            Owner::Abstract(ty) => write!(f, "abstract<{}>", ty),
            Owner::Temp(n) => write!(f, "$t{}", n),
        }
    }
}

pub type OwnerComp = (Owner, Component);

/// Unordered pair, stored sorted.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Pair(pub OwnerComp, pub OwnerComp);

impl Pair {
    pub fn new(a: OwnerComp, b: OwnerComp) -> Pair {
        if a <= b {
            Pair(a, b)
        } else {
            Pair(b, a)
        }
    }

    pub fn is_self(&self) -> bool {
        self.0 == self.1
    }

    pub fn other(&self, oc: &OwnerComp) -> Option<&OwnerComp> {
        if &self.0 == oc {
            Some(&self.1)
        } else if &self.1 == oc {
            Some(&self.0)
        } else {
            None
        }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{} ~ {}.{}", self.0 .0, self.0 .1, self.1 .0, self.1 .1)
    }
}

#[derive(Clone, PartialEq, Eq, Default, Debug)]
pub struct SharingRel {
    pairs: BTreeSet<Pair>,
}

impl SharingRel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Pair> {
        self.pairs.iter()
    }

    pub fn contains(&self, p: &Pair) -> bool {
        self.pairs.contains(p)
    }

    pub fn is_subset(&self, other: &SharingRel) -> bool {
        self.pairs.is_subset(&other.pairs)
    }

    /// Inserts if the two components are alias-compatible (self-pairs are
    /// always compatible). Returns whether anything was added.
    pub fn add(&mut self, a: OwnerComp, b: OwnerComp) -> bool {
        if a != b && !alias_compatible(&a.1, &b.1) {
            return false;
        }
        self.pairs.insert(Pair::new(a, b))
    }

    pub fn add_self(&mut self, oc: OwnerComp) -> bool {
        self.pairs.insert(Pair::new(oc.clone(), oc))
    }

    /// Marks that `oc` may exist for its owner.
    pub fn exists(&self, oc: &OwnerComp) -> bool {
        self.pairs.contains(&Pair::new(oc.clone(), oc.clone()))
    }

    /// Everything `oc` may alias (not including itself).
    pub fn aliases_of<'a>(&'a self, oc: &'a OwnerComp) -> impl Iterator<Item = &'a OwnerComp> {
        self.pairs.iter().filter_map(move |p| {
            let other = p.other(oc)?;
            if other == oc {
                None
            } else {
                Some(other)
            }
        })
    }

    /// All pairs touching a given owner.
    pub fn pairs_of_owner<'a>(&'a self, owner: &'a Owner) -> impl Iterator<Item = &'a Pair> {
        self.pairs.iter().filter(move |p| &p.0 .0 == owner || &p.1 .0 == owner)
    }

    pub fn union_with(&mut self, other: &SharingRel) {
        for p in &other.pairs {
            self.pairs.insert(p.clone());
        }
    }

    /// Adds a batch of pairs together with their transitive consequences
    /// through the new pairs: whenever a new pair says A ~ B and the
    /// relation knows B ~ C, A ~ C is possible too. Existing pairs are
    /// never composed with each other.
    pub fn add_closed(&mut self, new_pairs: Vec<Pair>) {
        let mut work: Vec<Pair> = new_pairs;
        while let Some(p) = work.pop() {
            if p.0 != p.1 && !alias_compatible(&p.0 .1, &p.1 .1) {
                continue;
            }
            if !self.pairs.insert(p.clone()) {
                continue;
            }
            if p.is_self() {
                continue;
            }
            let Pair(a, b) = &p;
            let mut derived = Vec::new();
            for q in self.pairs.iter() {
                if q.is_self() {
                    continue;
                }
                if let Some(c) = q.other(a) {
                    if c != b && alias_compatible(&b.1, &c.1) {
                        derived.push(Pair::new(b.clone(), c.clone()));
                    }
                }
                if let Some(c) = q.other(b) {
                    if c != a && alias_compatible(&a.1, &c.1) {
                        derived.push(Pair::new(a.clone(), c.clone()));
                    }
                }
            }
            for d in derived {
                if !self.pairs.contains(&d) {
                    work.push(d);
                }
            }
        }
    }

    /// Removes every pair mentioning the owner.
    pub fn kill_owner(&mut self, owner: &Owner) {
        self.pairs.retain(|p| &p.0 .0 != owner && &p.1 .0 != owner);
    }

    /// Renames an owner throughout.
    pub fn rename_owner(&mut self, from: &Owner, to: &Owner) {
        let pairs: Vec<Pair> = self.pairs.iter().cloned().collect();
        self.pairs.clear();
        for Pair(mut a, mut b) in pairs {
            if &a.0 == from {
                a.0 = to.clone();
            }
            if &b.0 == from {
                b.0 = to.clone();
            }
            self.pairs.insert(Pair::new(a, b));
        }
    }

    /// Keeps only pairs whose owners both satisfy the predicate.
    pub fn restrict(&self, keep: impl Fn(&Owner) -> bool) -> SharingRel {
        SharingRel {
            pairs: self
                .pairs
                .iter()
                .filter(|p| keep(&p.0 .0) && keep(&p.1 .0))
                .cloned()
                .collect(),
        }
    }

    /// Maps owners through a function (used for body-space to
    /// declaration-space renamings); pairs whose owners map to None are
    /// dropped.
    pub fn map_owners(&self, f: impl Fn(&Owner) -> Option<Owner>) -> SharingRel {
        let mut out = SharingRel::new();
        for Pair(a, b) in &self.pairs {
            if let (Some(oa), Some(ob)) = (f(&a.0), f(&b.0)) {
                out.pairs.insert(Pair::new((oa, a.1.clone()), (ob, b.1.clone())));
            }
        }
        out
    }

    /// Saturates the relation: closes transitively over compatible pairs.
    /// Used on elaborated declarations, where the declared bound includes
    /// its compositional consequences.
    pub fn saturate(&mut self) {
        loop {
            let mut added = Vec::new();
            for p in self.pairs.iter() {
                if p.is_self() {
                    continue;
                }
                for q in self.pairs.iter() {
                    if q.is_self() {
                        continue;
                    }
                    for (x, y) in [(&p.0, &p.1), (&p.1, &p.0)] {
                        if let Some(z) = q.other(y) {
                            if z != x && alias_compatible(&x.1, &z.1) {
                                let cand = Pair::new(x.clone(), z.clone());
                                if !self.pairs.contains(&cand) {
                                    added.push(cand);
                                }
                            }
                        }
                    }
                }
            }
            if added.is_empty() {
                break;
            }
            for p in added {
                self.pairs.insert(p);
            }
        }
    }

    /// Sorted display lines, `owner.path ~ owner.path`.
    pub fn render_lines(&self) -> Vec<String> {
        self.pairs.iter().map(|p| p.to_string()).collect()
    }
}

impl FromIterator<Pair> for SharingRel {
    fn from_iter<T: IntoIterator<Item = Pair>>(iter: T) -> Self {
        SharingRel { pairs: iter.into_iter().collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::components::Step;
    use crate::types::Type;

    fn comp(path: &[Step], ty: Type) -> Component {
        Component { path: path.to_vec(), cell_type: ty }
    }

    #[test]
    fn pairs_are_symmetric_by_construction() {
        let c = comp(&[Step::RefTarget], Type::int());
        let a = (Owner::Var("a".into()), c.clone());
        let b = (Owner::Var("b".into()), c.clone());
        assert_eq!(Pair::new(a.clone(), b.clone()), Pair::new(b, a));
    }

    #[test]
    fn incompatible_pairs_are_rejected() {
        let mut rel = SharingRel::new();
        let c1 = comp(&[Step::Ctor("Leaf".into(), 0)], Type::int());
        let c2 = comp(&[Step::Ctor("Cons".into(), 1)], Type::int());
        let added = rel.add((Owner::Var("a".into()), c1), (Owner::Var("b".into()), c2));
        assert!(!added);
        assert!(rel.is_empty());
    }

    #[test]
    fn add_closed_composes_through_new_pairs() {
        let mut rel = SharingRel::new();
        let rt = comp(&[Step::RefTarget], Type::int());
        let a = (Owner::Var("a".into()), rt.clone());
        let b = (Owner::Var("b".into()), rt.clone());
        let c = (Owner::Var("c".into()), rt.clone());
        rel.add(a.clone(), b.clone());
        rel.add_closed(vec![Pair::new(b.clone(), c.clone())]);
        assert!(rel.contains(&Pair::new(a, c)));
    }

    #[test]
    fn kill_and_rename() {
        let mut rel = SharingRel::new();
        let rt = comp(&[Step::RefTarget], Type::int());
        let a = (Owner::Var("a".into()), rt.clone());
        let b = (Owner::Var("b".into()), rt.clone());
        rel.add(a.clone(), b.clone());
        rel.rename_owner(&Owner::Var("b".into()), &Owner::Var("z".into()));
        assert!(rel.contains(&Pair::new(a.clone(), (Owner::Var("z".into()), rt.clone()))));
        rel.kill_owner(&Owner::Var("z".into()));
        assert!(rel.is_empty());
    }
}
