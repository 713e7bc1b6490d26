//! Atoms: the indeterminates of the expression kernel.
//!
//! An atom is an independent variable `x_i`, a jet coordinate `w^j_I`
//! (`I` a multi-index of independent directions, stored canonically), or a
//! formal derivative `F_{a b ...}` of an uninterpreted function symbol taken
//! along a multiset of its argument slots. Derivatives commute, so both the
//! jet multi-index and the slot multiset are kept sorted.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

/// Identifier of a function symbol inside its [`crate::context::Context`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FuncId(pub u32);

/// Multi-index of independent directions, stored as per-direction counts with
/// trailing zeros trimmed. `I = x1 x1 x3` is `[2, 0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct MultiIndex(Vec<u8>);

impl MultiIndex {
    pub fn empty() -> Self {
        MultiIndex(Vec::new())
    }

    pub fn from_counts(counts: Vec<u8>) -> Self {
        let mut c = counts;
        while c.last() == Some(&0) {
            c.pop();
        }
        MultiIndex(c)
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        let mut counts = Vec::new();
        for &i in indices {
            if counts.len() <= i {
                counts.resize(i + 1, 0u8);
            }
            counts[i] += 1;
        }
        MultiIndex(counts)
    }

    pub fn counts(&self) -> &[u8] {
        &self.0
    }

    pub fn count(&self, dir: usize) -> u8 {
        self.0.get(dir).copied().unwrap_or(0)
    }

    /// Total order |I|.
    pub fn order(&self) -> usize {
        self.0.iter().map(|&c| c as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The multi-index `I i` with one more derivative along direction `i`.
    pub fn bump(&self, dir: usize) -> Self {
        let mut c = self.0.clone();
        if c.len() <= dir {
            c.resize(dir + 1, 0);
        }
        c[dir] += 1;
        MultiIndex(c)
    }

    /// Remove one derivative along `dir`, if present.
    pub fn unbump(&self, dir: usize) -> Option<Self> {
        if self.count(dir) == 0 {
            return None;
        }
        let mut c = self.0.clone();
        c[dir] -= 1;
        Some(MultiIndex::from_counts(c))
    }

    /// True when `self ⊆ other` componentwise (other is a prolongation of self).
    pub fn divides(&self, other: &MultiIndex) -> bool {
        self.0
            .iter()
            .enumerate()
            .all(|(i, &c)| c <= other.count(i))
    }

    /// Componentwise maximum (least common prolongation).
    pub fn join(&self, other: &MultiIndex) -> Self {
        let n = self.0.len().max(other.0.len());
        let mut c = vec![0u8; n];
        for (i, slot) in c.iter_mut().enumerate() {
            *slot = self.count(i).max(other.count(i));
        }
        MultiIndex::from_counts(c)
    }

    /// Sorted list of direction indices with multiplicity (the classical `I`).
    pub fn expansion(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat(i).take(c as usize))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        // (|I|, lex on the sorted expansion)
        self.order()
            .cmp(&other.order())
            .then_with(|| self.expansion().cmp(other.expansion()))
    }
}

/// An indeterminate of the expression field.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Atom {
    /// Independent variable x_i (0-based).
    Independent(usize),
    /// Jet coordinate w^j_I (0-based dependent index).
    Jet { dep: usize, idx: MultiIndex },
    /// Formal derivative of a function symbol along a sorted multiset of
    /// argument slots; an empty slot list is the symbol itself.
    Func {
        name: Arc<str>,
        id: FuncId,
        slots: Vec<u8>,
    },
}

impl Atom {
    pub fn indep(i: usize) -> Self {
        Atom::Independent(i)
    }

    pub fn jet(dep: usize, idx: MultiIndex) -> Self {
        Atom::Jet { dep, idx }
    }

    pub fn func(name: Arc<str>, id: FuncId, mut slots: Vec<u8>) -> Self {
        slots.sort_unstable();
        Atom::Func { name, id, slots }
    }

    pub fn is_jet(&self) -> bool {
        matches!(self, Atom::Jet { .. })
    }

    /// Jet order of the atom; independents are order 0 and function-symbol
    /// atoms carry no jet order of their own.
    pub fn jet_order(&self) -> usize {
        match self {
            Atom::Jet { idx, .. } => idx.order(),
            _ => 0,
        }
    }
}

impl PartialOrd for Atom {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Atom {
    fn cmp(&self, other: &Self) -> Ordering {
        // Independent < Jet (by dep, |I|, lex I) < Func (by name, |D|, lex D).
        fn rank(a: &Atom) -> u8 {
            match a {
                Atom::Independent(_) => 0,
                Atom::Jet { .. } => 1,
                Atom::Func { .. } => 2,
            }
        }
        match (self, other) {
            (Atom::Independent(a), Atom::Independent(b)) => a.cmp(b),
            (Atom::Jet { dep: d1, idx: i1 }, Atom::Jet { dep: d2, idx: i2 }) => {
                d1.cmp(d2).then_with(|| i1.cmp(i2))
            }
            (
                Atom::Func {
                    name: n1,
                    slots: s1,
                    id: id1,
                    ..
                },
                Atom::Func {
                    name: n2,
                    slots: s2,
                    id: id2,
                    ..
                },
            ) => n1
                .cmp(n2)
                .then_with(|| s1.len().cmp(&s2.len()))
                .then_with(|| s1.cmp(s2))
                .then_with(|| id1.cmp(id2)),
            (a, b) => rank(a).cmp(&rank(b)),
        }
    }
}

/// Render a multi-index as digits (`u_{10}` style). Used when no name table
/// is at hand; `Context::display_atom` produces the classical names.
impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().any(|&c| c > 9) {
            let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
            write!(f, "{}", parts.join(","))
        } else {
            for c in &self.0 {
                write!(f, "{c}")?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_index_canonical_and_ordered() {
        let a = MultiIndex::from_indices(&[0, 0, 2]);
        assert_eq!(a.counts(), &[2, 0, 1]);
        assert_eq!(a.order(), 3);
        let b = MultiIndex::from_indices(&[0, 1, 2]);
        // sorted expansions: (0,0,2) < (0,1,2)
        assert!(a < b);
        let c = MultiIndex::from_indices(&[0, 1]);
        assert!(c < a, "lower order first");
        assert!(MultiIndex::from_indices(&[0]).divides(&a));
        assert!(!b.divides(&a));
        assert_eq!(a.join(&b).counts(), &[2, 1, 1]);
    }

    #[test]
    fn atom_order_matches_the_canonical_chain() {
        let x = Atom::indep(0);
        let u = Atom::jet(0, MultiIndex::empty());
        let ux = Atom::jet(0, MultiIndex::from_indices(&[0]));
        let v = Atom::jet(1, MultiIndex::empty());
        let f = Atom::func("F".into(), FuncId(0), vec![]);
        let fu = Atom::func("F".into(), FuncId(0), vec![1]);
        assert!(x < u && u < ux && ux < v && v < f && f < fu);
    }
}
