//! Boolean domain primitives: proposition sets, valuations, cubes, dense
//! valuation sets and disjoint cube covers.
//!
//! Proposition order is the declaration order; bit `j` of a valuation or cube
//! corresponds to proposition `j`.  With `k` propositions, a valuation is an
//! index in `[0, 2^k)` and a set of valuations is a dense `2^k`-bit bitset,
//! so `k` is capped (16 by default) to keep everything enumerable.

use thiserror::Error;

/// Default cap on the number of propositions per side (inputs or outputs).
pub const DEFAULT_MAX_PROPS: usize = 16;

/// Hard cap; dense bitsets with more than 2^24 bits are never reasonable here.
pub const ABSOLUTE_MAX_PROPS: usize = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BoolSetError {
    #[error("arity mismatch: expected {expected} propositions, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("{got} propositions exceed the cap of {max}")]
    TooManyProps { got: usize, max: usize },
    #[error("proposition names must be unique and non-empty (offending name: {0:?})")]
    BadPropName(String),
    #[error("operation requires a non-empty valuation set")]
    EmptySet,
}

/// An ordered set of distinct proposition identifiers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PropSet {
    names: Vec<String>,
}

impl PropSet {
    pub fn new<S: Into<String>>(names: Vec<S>) -> Result<Self, BoolSetError> {
        Self::with_cap(names, DEFAULT_MAX_PROPS)
    }

    /// Builds a proposition set with an explicit arity cap.
    pub fn with_cap<S: Into<String>>(names: Vec<S>, cap: usize) -> Result<Self, BoolSetError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() > cap.min(ABSOLUTE_MAX_PROPS) {
            return Err(BoolSetError::TooManyProps {
                got: names.len(),
                max: cap.min(ABSOLUTE_MAX_PROPS),
            });
        }
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || names[..i].contains(n) {
                return Err(BoolSetError::BadPropName(n.clone()));
            }
        }
        Ok(PropSet { names })
    }

    /// Synthesizes `prefix0..prefix{k-1}` names, as used when parsing formats
    /// that do not carry proposition names.
    pub fn numbered(prefix: &str, k: usize, cap: usize) -> Result<Self, BoolSetError> {
        Self::with_cap((0..k).map(|j| format!("{prefix}{j}")).collect(), cap)
    }

    pub fn arity(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Number of valuations over this proposition set.
    pub fn n_valuations(&self) -> usize {
        1usize << self.names.len()
    }
}

/// One truth assignment to a proposition set, identified by its index
/// `sum_j bits_j * 2^j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Valuation(pub u32);

impl Valuation {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn bit(self, j: usize) -> bool {
        (self.0 >> j) & 1 == 1
    }
}

/// A conjunction of literals: `care` masks the constrained propositions and
/// `value` gives their polarity (zero on don't-care positions).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cube {
    care: u32,
    value: u32,
    arity: u8,
}

impl Cube {
    pub fn new(care: u32, value: u32, arity: usize) -> Self {
        let mask = arity_mask(arity);
        debug_assert_eq!(care & !mask, 0, "care bits outside arity");
        Cube {
            care: care & mask,
            value: value & care & mask,
            arity: arity as u8,
        }
    }

    /// The unconstrained cube over `arity` propositions.
    pub fn top(arity: usize) -> Self {
        Cube::new(0, 0, arity)
    }

    /// The cube constraining every proposition, i.e. a single valuation.
    pub fn singleton(v: Valuation, arity: usize) -> Self {
        Cube::new(arity_mask(arity), v.0, arity)
    }

    pub fn care(&self) -> u32 {
        self.care
    }

    pub fn value(&self) -> u32 {
        self.value
    }

    pub fn arity(&self) -> usize {
        self.arity as usize
    }

    pub fn contains(&self, v: Valuation) -> bool {
        v.0 & self.care == self.value
    }

    /// Whether the two cubes share at least one valuation.
    pub fn intersects(&self, other: &Cube) -> bool {
        debug_assert_eq!(self.arity, other.arity);
        let shared = self.care & other.care;
        (self.value ^ other.value) & shared == 0
    }

    /// Number of valuations in the expansion: `2^(k - popcount(care))`.
    pub fn expansion_size(&self) -> usize {
        1usize << (self.arity() - self.care.count_ones() as usize)
    }

    /// Expands the cube to the set of all valuations agreeing with it on the
    /// care positions.
    pub fn to_set(&self, arity: usize) -> Result<ValuationSet, BoolSetError> {
        if arity != self.arity() {
            return Err(BoolSetError::ArityMismatch {
                expected: self.arity(),
                got: arity,
            });
        }
        let mut s = ValuationSet::empty(arity);
        // Enumerate the don't-care positions only.
        let dc = arity_mask(arity) & !self.care;
        let mut sub = 0u32;
        loop {
            s.insert(Valuation(self.value | sub));
            if sub == dc {
                break;
            }
            sub = (sub.wrapping_sub(dc)) & dc; // next subset of dc
        }
        Ok(s)
    }
}

fn arity_mask(arity: usize) -> u32 {
    if arity >= 32 {
        u32::MAX
    } else {
        (1u32 << arity) - 1
    }
}

/// A subset of all valuations over `k` propositions, stored as a dense
/// `2^k`-bit bitset.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ValuationSet {
    arity: u8,
    words: Vec<u64>,
}

impl ValuationSet {
    pub fn empty(arity: usize) -> Self {
        let bits = 1usize << arity;
        ValuationSet {
            arity: arity as u8,
            words: vec![0; bits.div_ceil(64)],
        }
    }

    /// The full set of all `2^k` valuations.
    pub fn top(arity: usize) -> Self {
        let mut s = Self::empty(arity);
        let bits = 1usize << arity;
        for (w, word) in s.words.iter_mut().enumerate() {
            let lo = w * 64;
            *word = if lo + 64 <= bits {
                u64::MAX
            } else {
                (1u64 << (bits - lo)) - 1
            };
        }
        s
    }

    pub fn from_indices(arity: usize, indices: &[usize]) -> Self {
        let mut s = Self::empty(arity);
        for &i in indices {
            s.insert(Valuation(i as u32));
        }
        s
    }

    pub fn arity(&self) -> usize {
        self.arity as usize
    }

    pub fn n_bits(&self) -> usize {
        1usize << self.arity
    }

    pub fn insert(&mut self, v: Valuation) {
        debug_assert!(v.index() < self.n_bits());
        self.words[v.index() / 64] |= 1u64 << (v.index() % 64);
    }

    pub fn contains(&self, v: Valuation) -> bool {
        v.index() < self.n_bits() && self.words[v.index() / 64] >> (v.index() % 64) & 1 == 1
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_top(&self) -> bool {
        *self == Self::top(self.arity())
    }

    pub fn cardinality(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn intersect(&self, other: &ValuationSet) -> Result<ValuationSet, BoolSetError> {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn union(&self, other: &ValuationSet) -> Result<ValuationSet, BoolSetError> {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn difference(&self, other: &ValuationSet) -> Result<ValuationSet, BoolSetError> {
        self.zip_with(other, |a, b| a & !b)
    }

    pub fn complement(&self) -> ValuationSet {
        let top = Self::top(self.arity());
        let mut out = self.clone();
        for (w, t) in out.words.iter_mut().zip(top.words.iter()) {
            *w = !*w & t;
        }
        out
    }

    pub fn is_subset(&self, other: &ValuationSet) -> Result<bool, BoolSetError> {
        self.check_arity(other)?;
        Ok(self
            .words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & !b == 0))
    }

    /// Iterates the member valuations in increasing index order.
    pub fn iter(&self) -> impl Iterator<Item = Valuation> + '_ {
        let n = self.n_bits();
        (0..n)
            .map(|i| Valuation(i as u32))
            .filter(move |v| self.contains(*v))
    }

    /// Smallest cube whose expansion contains the set: care on every
    /// proposition where all members agree.
    fn enclosing_cube(&self) -> Option<Cube> {
        let mut or_all = 0u32;
        let mut and_all = arity_mask(self.arity());
        let mut any = false;
        for v in self.iter() {
            or_all |= v.0;
            and_all &= v.0;
            any = true;
        }
        if !any {
            return None;
        }
        let care = arity_mask(self.arity()) & !(or_all ^ and_all);
        Some(Cube::new(care, and_all & care, self.arity()))
    }

    /// Whether the set is exactly the expansion of a single cube.
    pub fn as_cube(&self) -> Option<Cube> {
        let c = self.enclosing_cube()?;
        (c.expansion_size() == self.cardinality()).then_some(c)
    }

    fn zip_with(
        &self,
        other: &ValuationSet,
        f: impl Fn(u64, u64) -> u64,
    ) -> Result<ValuationSet, BoolSetError> {
        self.check_arity(other)?;
        let mut out = self.clone();
        for (w, o) in out.words.iter_mut().zip(other.words.iter()) {
            *w = f(*w, *o);
        }
        Ok(out)
    }

    fn check_arity(&self, other: &ValuationSet) -> Result<(), BoolSetError> {
        if self.arity != other.arity {
            return Err(BoolSetError::ArityMismatch {
                expected: self.arity(),
                got: other.arity(),
            });
        }
        Ok(())
    }
}

/// Decomposes a non-empty valuation set into pairwise-disjoint cubes whose
/// expansions union to exactly the input.
///
/// The decomposition is a recursive Shannon expansion: if the residual set is
/// a cube, it is emitted; otherwise the set is split on the lowest-index
/// proposition it depends on, negative cofactor first.  The result is
/// deterministic for a given set.
pub fn disjoint_cube_cover(s: &ValuationSet) -> Result<Vec<Cube>, BoolSetError> {
    if s.is_empty() {
        return Err(BoolSetError::EmptySet);
    }
    let mut cubes = Vec::new();
    split(s, &mut cubes);
    Ok(cubes)
}

fn split(s: &ValuationSet, out: &mut Vec<Cube>) {
    if let Some(c) = s.as_cube() {
        out.push(c);
        return;
    }
    // Not a cube, so the set depends on at least one proposition.
    let k = s.arity();
    for j in 0..k {
        let neg = restrict(s, j, false);
        let pos = restrict(s, j, true);
        // bits constant over the set are part of the enclosing cube, not
        // split candidates
        if !neg.is_empty() && !pos.is_empty() && !depends_equal(&neg, &pos, j) {
            split(&neg, out);
            split(&pos, out);
            return;
        }
    }
    unreachable!("a set independent of every proposition is a cube");
}

/// Members of `s` whose bit `j` equals `polarity`.
fn restrict(s: &ValuationSet, j: usize, polarity: bool) -> ValuationSet {
    let mut out = ValuationSet::empty(s.arity());
    for v in s.iter() {
        if v.bit(j) == polarity {
            out.insert(v);
        }
    }
    out
}

/// Whether the two cofactors of bit `j` are equal as sets over the remaining
/// propositions.
fn depends_equal(neg: &ValuationSet, pos: &ValuationSet, j: usize) -> bool {
    let bit = 1u32 << j;
    neg.cardinality() == pos.cardinality() && neg.iter().all(|v| pos.contains(Valuation(v.0 | bit)))
}

/// Head of the deterministic disjoint cube cover of `s`.
///
/// The cube ordering inside a decomposition is implementation-defined; this
/// crate defines "first cube" as the head of [`disjoint_cube_cover`].
pub fn first_cube(s: &ValuationSet) -> Result<Cube, BoolSetError> {
    Ok(disjoint_cube_cover(s)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    // Over O = {x, y, z}: x = bit 0, y = bit 1, z = bit 2.
    fn cube(care: u32, value: u32) -> Cube {
        Cube::new(care, value, 3)
    }

    #[test]
    fn cube_to_set_not_z() {
        // z̄: care = 100, value = 000 -> indices {0, 1, 2, 3}
        let s = cube(0b100, 0).to_set(3).unwrap();
        assert_eq!(s, ValuationSet::from_indices(3, &[0, 1, 2, 3]));
    }

    #[test]
    fn cube_to_set_top() {
        let s = Cube::top(3).to_set(3).unwrap();
        assert!(s.is_top());
        assert_eq!(s.cardinality(), 8);
    }

    #[test]
    fn cube_to_set_not_x_and_y() {
        // x̄y -> {x̄yz̄, x̄yz} = indices {2, 6}
        let s = cube(0b011, 0b010).to_set(3).unwrap();
        assert_eq!(s, ValuationSet::from_indices(3, &[2, 6]));
    }

    #[test]
    fn cube_to_set_arity_mismatch() {
        assert!(matches!(
            cube(0b100, 0).to_set(4),
            Err(BoolSetError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn set_algebra_basics() {
        let not_z = cube(0b100, 0).to_set(3).unwrap();
        let z = cube(0b100, 0b100).to_set(3).unwrap();
        assert!(not_z.intersect(&z).unwrap().is_empty());

        let origin = cube(0b111, 0).to_set(3).unwrap();
        assert!(origin.is_subset(&not_z).unwrap());

        let top = ValuationSet::top(3);
        assert_eq!(top.intersect(&z).unwrap(), z);
        assert_eq!(not_z.union(&z).unwrap(), top);
        assert_eq!(not_z.complement(), z);
    }

    #[test]
    fn cover_two_cubes() {
        // {x̄yz, x̄yz̄, xȳz, xȳz̄} -> {x̄y, xȳ}
        let s = ValuationSet::from_indices(3, &[1, 2, 5, 6]);
        let cover = disjoint_cube_cover(&s).unwrap();
        assert_eq!(cover, vec![cube(0b011, 0b010), cube(0b011, 0b001)]);
    }

    #[test]
    fn cover_top_is_single_cube() {
        let cover = disjoint_cube_cover(&ValuationSet::top(3)).unwrap();
        assert_eq!(cover, vec![Cube::top(3)]);
    }

    #[test]
    fn cover_rejects_empty() {
        assert!(matches!(
            disjoint_cube_cover(&ValuationSet::empty(3)),
            Err(BoolSetError::EmptySet)
        ));
    }

    /// The parity-style family over 2m propositions needs 2^m disjoint cubes.
    fn parity_set(m: usize) -> ValuationSet {
        let k = 2 * m;
        let mut s = ValuationSet::empty(k);
        for idx in 0..1usize << k {
            let ok = (0..m).all(|p| {
                let lo = idx >> (2 * p) & 1;
                let hi = idx >> (2 * p + 1) & 1;
                lo != hi
            });
            if ok {
                s.insert(Valuation(idx as u32));
            }
        }
        s
    }

    #[test]
    fn parity_family_cover_sizes() {
        for m in 1..=3 {
            let s = parity_set(m);
            let cover = disjoint_cube_cover(&s).unwrap();
            assert_eq!(cover.len(), 1 << m, "m = {m}");
            // Cover is exact.
            let mut union = ValuationSet::empty(2 * m);
            for c in &cover {
                union = union.union(&c.to_set(2 * m).unwrap()).unwrap();
            }
            assert_eq!(union, s);
        }
    }

    #[test]
    fn first_cube_examples() {
        let not_z = cube(0b100, 0).to_set(3).unwrap();
        assert_eq!(first_cube(&not_z).unwrap(), cube(0b100, 0));

        let singleton = ValuationSet::from_indices(3, &[0]);
        assert_eq!(first_cube(&singleton).unwrap(), cube(0b111, 0));

        assert_eq!(first_cube(&ValuationSet::top(3)).unwrap(), Cube::top(3));
    }

    #[test]
    fn expansion_size_matches_popcount() {
        let c = cube(0b011, 0b001);
        assert_eq!(c.expansion_size(), 2);
        assert_eq!(c.to_set(3).unwrap().cardinality(), 2);
    }
}
