//! Exact arithmetic in the complexified exterior algebra Λ(n) with the
//! split bigrading Λ^{k,l}(n) and Berezin extraction.
//!
//! Basis monomials dx^{i_1} ∧ … ∧ dx^{i_k} (strictly increasing 1-based
//! indices) are keyed by bitsets; the wedge sign is the parity of the
//! interleaving permutation. The split `a` marks the first `a` coordinates
//! as tangential; indices above `a` are normal. Elements are immutable
//! values and all operations are pure.

use crate::error::{EngineError, Result};
use crate::scalar::{rat_from_str, Coeff, GaussianRational};
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;

/// Maximum supported ambient dimension. Λ(8) has 256 basis monomials and
/// the spinor space of R^8 is 16-dimensional, which keeps the brute-force
/// oracles tractable.
pub const MAX_DIM: usize = 8;

/// Element of Λ(n) with coefficients in `T` and a fixed tangential split.
#[derive(Clone, PartialEq)]
pub struct MultiVector<T: Coeff> {
    n: usize,
    a: usize,
    terms: BTreeMap<u16, T>,
}

/// Count of transpositions needed to interleave subset `b` past subset `a`:
/// the sign of dx^A ∧ dx^B relative to dx^{A∪B} for disjoint bitsets.
fn interleave_sign(a: u16, b: u16) -> i32 {
    let mut sign = 0u32;
    let mut rest = b;
    while rest != 0 {
        let low = rest & rest.wrapping_neg();
        let pos = low.trailing_zeros();
        // indices of `a` strictly above `pos` must be crossed
        sign += (a >> (pos + 1)).count_ones();
        rest &= !low;
    }
    if sign % 2 == 0 {
        1
    } else {
        -1
    }
}

impl<T: Coeff> MultiVector<T> {
    /// The zero element of Λ(n) with split a.
    pub fn zero(n: usize, a: usize) -> Self {
        assert!(n <= MAX_DIM && a <= n, "invalid dimension or split");
        MultiVector { n, a, terms: BTreeMap::new() }
    }

    /// The unit 1 ∈ Λ^0(n).
    pub fn one(n: usize, a: usize) -> Self {
        Self::scalar(n, a, T::one())
    }

    pub fn scalar(n: usize, a: usize, c: T) -> Self {
        let mut mv = Self::zero(n, a);
        mv.insert(0, c);
        mv
    }

    /// Basis one-form dx^i (1-based index).
    pub fn basis(n: usize, a: usize, i: usize) -> Self {
        assert!(i >= 1 && i <= n, "basis index out of range");
        let mut mv = Self::zero(n, a);
        mv.insert(1u16 << (i - 1), T::one());
        mv
    }

    /// Monomial c · dx^{i_1} ∧ … ∧ dx^{i_k} from strictly increasing
    /// 1-based indices.
    pub fn monomial(n: usize, a: usize, indices: &[usize], c: T) -> Self {
        let mut mask = 0u16;
        for &i in indices {
            assert!(i >= 1 && i <= n, "monomial index out of range");
            let bit = 1u16 << (i - 1);
            assert!(mask & bit == 0 && mask < bit, "indices must be strictly increasing");
            mask |= bit;
        }
        let mut mv = Self::zero(n, a);
        mv.insert(mask, c);
        mv
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn split(&self) -> usize {
        self.a
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Iterate over (bitset, coefficient) pairs.
    pub fn iter(&self) -> impl Iterator<Item = (u16, &T)> {
        self.terms.iter().map(|(m, c)| (*m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Coefficient of the monomial with the given bitset.
    pub fn coeff(&self, mask: u16) -> T {
        self.terms.get(&mask).cloned().unwrap_or_else(T::zero)
    }

    fn insert(&mut self, mask: u16, c: T) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(mask) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().clone() + c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let mut out = self.clone();
        for (m, c) in other.terms.iter() {
            out.insert(*m, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = Self::zero(self.n, self.a);
        for (m, c) in self.terms.iter() {
            out.terms.insert(*m, -c.clone());
        }
        out
    }

    pub fn scale(&self, c: &T) -> Self {
        let mut out = Self::zero(self.n, self.a);
        if c.is_zero() {
            return out;
        }
        for (m, v) in self.terms.iter() {
            let prod = v.clone() * c.clone();
            if !prod.is_zero() {
                out.terms.insert(*m, prod);
            }
        }
        out
    }

    /// Exterior product. Bilinear, associative, graded-commutative.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(EngineError::DimensionMismatch { left: self.n, right: other.n });
        }
        let mut out = Self::zero(self.n, self.a);
        for (ma, ca) in self.terms.iter() {
            for (mb, cb) in other.terms.iter() {
                if ma & mb != 0 {
                    continue; // repeated index
                }
                let sign = interleave_sign(*ma, *mb);
                let mut c = ca.clone() * cb.clone();
                if sign < 0 {
                    c = -c;
                }
                out.insert(ma | mb, c);
            }
        }
        Ok(out)
    }

    /// Clifford product of symbols with the convention c(v)^2 = -|v|^2.
    ///
    /// This is the symbol of the product of the quantizations: the top
    /// bigraded component is the wedge and lower components come from
    /// metric contractions of equal indices.
    pub fn clifford_mul(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(EngineError::DimensionMismatch { left: self.n, right: other.n });
        }
        let mut out = Self::zero(self.n, self.a);
        for (ma, ca) in self.terms.iter() {
            for (mb, cb) in other.terms.iter() {
                let (mask, sign) = clifford_basis_mul(*ma, *mb);
                let mut c = ca.clone() * cb.clone();
                if sign < 0 {
                    c = -c;
                }
                out.insert(mask, c);
            }
        }
        Ok(out)
    }

    /// Projection onto Λ^j(n). Idempotent; the components sum to the input.
    pub fn component(&self, j: usize) -> Result<Self> {
        if j > self.n {
            return Err(EngineError::DegreeOutOfRange { degree: j, max: self.n });
        }
        let mut out = Self::zero(self.n, self.a);
        for (m, c) in self.terms.iter() {
            if m.count_ones() as usize == j {
                out.terms.insert(*m, c.clone());
            }
        }
        Ok(out)
    }

    /// Projection onto Λ^{k,l}(n): k tangential indices (≤ a) and l normal
    /// indices (> a).
    pub fn component_kl(&self, k: usize, l: usize) -> Result<Self> {
        let b = self.n - self.a;
        if k > self.a {
            return Err(EngineError::DegreeOutOfRange { degree: k, max: self.a });
        }
        if l > b {
            return Err(EngineError::DegreeOutOfRange { degree: l, max: b });
        }
        let tang_mask: u16 = ((1u32 << self.a) - 1) as u16;
        let mut out = Self::zero(self.n, self.a);
        for (m, c) in self.terms.iter() {
            let kt = (m & tang_mask).count_ones() as usize;
            let ln = (m & !tang_mask).count_ones() as usize;
            if kt == k && ln == l {
                out.terms.insert(*m, c.clone());
            }
        }
        Ok(out)
    }

    /// Berezin integral over the tangential factor: the coefficient of
    /// dx^1 ∧ … ∧ dx^a. Terms containing normal indices do not contribute,
    /// so this also computes |ω|^{(a,0)} for forms with normal components.
    /// For a = 0 this is the scalar part (empty-wedge convention).
    pub fn berezin(&self, a: usize) -> T {
        let mask: u16 = ((1u32 << a) - 1) as u16;
        self.coeff(mask)
    }

    /// Degree of a homogeneous element; `None` if zero or mixed.
    pub fn homogeneous_degree(&self) -> Option<usize> {
        let mut deg = None;
        for (m, _) in self.terms.iter() {
            let d = m.count_ones() as usize;
            match deg {
                None => deg = Some(d),
                Some(e) if e != d => return None,
                _ => {}
            }
        }
        deg
    }

    /// Largest exterior degree with a nonzero coefficient; -1 when zero.
    pub fn max_degree(&self) -> i64 {
        self.terms.keys().map(|m| m.count_ones() as i64).max().unwrap_or(-1)
    }

    /// Exponential of an element whose scalar part is zero (nilpotent), by
    /// the finite series Σ u^k / k!.
    pub fn exp_nilpotent(&self) -> Result<Self> {
        assert!(self.coeff(0).is_zero(), "exp_nilpotent needs vanishing scalar part");
        let mut out = Self::one(self.n, self.a);
        let mut pow = Self::one(self.n, self.a);
        for k in 1..=self.n {
            pow = pow.wedge(self)?;
            if pow.is_zero() {
                break;
            }
            out = out.add(&pow.scale(&T::from_rat(&crate::scalar::inv_factorial(k))));
        }
        Ok(out)
    }

    /// Re-embed in a possibly larger ambient algebra, shifting indices by
    /// `offset` positions.
    pub fn embed(&self, n: usize, a: usize, offset: usize) -> Self {
        let mut out = MultiVector::zero(n, a);
        for (m, c) in self.terms.iter() {
            out.terms.insert(m << offset, c.clone());
        }
        out
    }

    /// Map coefficients into another ring.
    pub fn map<U: Coeff>(&self, f: impl Fn(&T) -> U) -> MultiVector<U> {
        let mut out = MultiVector::zero(self.n, self.a);
        for (m, c) in self.terms.iter() {
            let v = f(c);
            if !v.is_zero() {
                out.terms.insert(*m, v);
            }
        }
        out
    }

    pub fn to_c64(&self) -> MultiVector<Complex64> {
        self.map(|c| c.to_c64())
    }

    /// Largest coefficient magnitude after float conversion.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.to_c64().norm()).fold(0.0, f64::max)
    }
}

impl<T: Coeff> fmt::Debug for MultiVector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms.iter() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:?})", c)?;
            for i in 0..self.n {
                if m & (1 << i) != 0 {
                    write!(f, "·dx{}", i + 1)?;
                }
            }
        }
        Ok(())
    }
}

/// Product of Clifford basis monomials e_A · e_B with e_i^2 = -1 and
/// e_i e_j = -e_j e_i. Returns (resulting bitset, sign).
pub fn clifford_basis_mul(a: u16, b: u16) -> (u16, i32) {
    // Interleaving already places each repeated index next to its partner,
    // so the metric only contributes e_i^2 = -1 per common index.
    let mut sign = interleave_sign(a, b);
    if (a & b).count_ones() % 2 == 1 {
        sign = -sign;
    }
    (a ^ b, sign)
}

// --- JSON interchange -----------------------------------------------------
//
// {"n":int,"a":int,"terms":[{"idx":[ints],"re":"rational","im":"rational"}]}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    idx: Vec<usize>,
    re: String,
    im: String,
}

#[derive(Serialize, Deserialize)]
struct MultiVectorRepr {
    n: usize,
    a: usize,
    terms: Vec<TermRepr>,
}

impl Serialize for MultiVector<GaussianRational> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| TermRepr {
                idx: (0..self.n).filter(|i| m & (1 << i) != 0).map(|i| i + 1).collect(),
                re: c.re.to_string(),
                im: c.im.to_string(),
            })
            .collect();
        MultiVectorRepr { n: self.n, a: self.a, terms }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MultiVector<GaussianRational> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = MultiVectorRepr::deserialize(d)?;
        if repr.n > MAX_DIM || repr.a > repr.n {
            return Err(D::Error::custom("invalid dimension or split"));
        }
        let mut mv = MultiVector::zero(repr.n, repr.a);
        for t in repr.terms {
            let mut mask = 0u16;
            for i in &t.idx {
                if *i < 1 || *i > repr.n {
                    return Err(D::Error::custom(format!("index {} out of range", i)));
                }
                let bit = 1u16 << (i - 1);
                if mask & bit != 0 || mask >= bit {
                    return Err(D::Error::custom("indices must be strictly increasing"));
                }
                mask |= bit;
            }
            let re = rat_from_str(&t.re).ok_or_else(|| D::Error::custom("bad rational"))?;
            let im = rat_from_str(&t.im).ok_or_else(|| D::Error::custom("bad rational"))?;
            mv.insert(mask, GaussianRational::new(re, im));
        }
        Ok(mv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;
    use proptest::prelude::*;

    type Mv = MultiVector<GaussianRational>;

    fn gq(k: i64) -> GaussianRational {
        GaussianRational::from_ints(k, 0)
    }

    #[test]
    fn wedge_antisymmetry_and_sign() {
        let dx1 = Mv::basis(4, 2, 1);
        let dx2 = Mv::basis(4, 2, 2);
        assert!(dx1.wedge(&dx1).unwrap().is_zero());
        let w12 = dx1.wedge(&dx2).unwrap();
        let w21 = dx2.wedge(&dx1).unwrap();
        assert_eq!(w12, w21.neg());
        assert_eq!(w12.coeff(0b11), gq(1));
    }

    #[test]
    fn wedge_distributes_over_sums() {
        // (1 + dx1)(1 + dx2) = 1 + dx1 + dx2 + dx1 dx2
        let u = Mv::one(2, 0).add(&Mv::basis(2, 0, 1));
        let v = Mv::one(2, 0).add(&Mv::basis(2, 0, 2));
        let p = u.wedge(&v).unwrap();
        assert_eq!(p.coeff(0b00), gq(1));
        assert_eq!(p.coeff(0b01), gq(1));
        assert_eq!(p.coeff(0b10), gq(1));
        assert_eq!(p.coeff(0b11), gq(1));
    }

    #[test]
    fn component_projections() {
        // component(3 + 5 dx1 dx2, 2) = 5 dx1 dx2
        let u = Mv::scalar(4, 2, gq(3)).add(&Mv::monomial(4, 2, &[1, 2], gq(5)));
        let c2 = u.component(2).unwrap();
        assert_eq!(c2, Mv::monomial(4, 2, &[1, 2], gq(5)));
        // bigrading: dx1 dx3 with a=2 sits in Λ^{1,1}
        let v = Mv::monomial(4, 2, &[1, 3], gq(1));
        assert_eq!(v.component_kl(1, 1).unwrap(), v);
        assert!(v.component_kl(2, 0).unwrap().is_zero());
        let w = Mv::monomial(4, 2, &[1, 2], gq(1));
        assert_eq!(w.component_kl(2, 0).unwrap(), w);
    }

    #[test]
    fn berezin_extraction() {
        let u = Mv::monomial(4, 2, &[1, 2], gq(7));
        assert_eq!(u.berezin(2), gq(7));
        let v = Mv::monomial(4, 2, &[1, 3], gq(1));
        assert_eq!(v.berezin(2), gq(0));
        assert_eq!(Mv::one(4, 0).berezin(0), gq(1));
    }

    #[test]
    fn degree_out_of_range_rejected() {
        let u = Mv::one(4, 2);
        assert!(u.component(5).is_err());
        assert!(u.component_kl(3, 0).is_err());
    }

    #[test]
    fn clifford_basis_products() {
        // e1 e1 = -1
        assert_eq!(clifford_basis_mul(0b1, 0b1), (0, -1));
        // e1 e2 = e12, e2 e1 = -e12
        assert_eq!(clifford_basis_mul(0b01, 0b10), (0b11, 1));
        assert_eq!(clifford_basis_mul(0b10, 0b01), (0b11, -1));
        // e12 e2 = e1 e2 e2 = -e1
        assert_eq!(clifford_basis_mul(0b11, 0b10), (0b01, -1));
        // e12 e12 = e1 e2 e1 e2 = -e1 e1 e2 e2 = -1
        assert_eq!(clifford_basis_mul(0b11, 0b11), (0, -1));
    }

    #[test]
    fn json_round_trip() {
        let u = Mv::monomial(4, 2, &[1, 3], GaussianRational::new(rat(3, 4), rat(-1, 2)))
            .add(&Mv::scalar(4, 2, gq(2)));
        let s = serde_json::to_string(&u).unwrap();
        let back: Mv = serde_json::from_str(&s).unwrap();
        assert_eq!(u, back);
    }

    fn arb_multivector(n: usize, a: usize) -> impl Strategy<Value = Mv> {
        prop::collection::vec((0u16..(1 << n), -4i64..=4), 0..6).prop_map(move |pairs| {
            let mut mv = Mv::zero(n, a);
            for (m, c) in pairs {
                mv.insert(m, gq(c));
            }
            mv
        })
    }

    proptest! {
        #[test]
        fn graded_commutativity(u in arb_multivector(4, 2), v in arb_multivector(4, 2)) {
            for p in 0..=4usize {
                for q in 0..=4usize {
                    let up = u.component(p).unwrap();
                    let vq = v.component(q).unwrap();
                    let uv = up.wedge(&vq).unwrap();
                    let vu = vq.wedge(&up).unwrap();
                    let expect = if (p * q) % 2 == 0 { vu.clone() } else { vu.neg() };
                    prop_assert_eq!(uv, expect);
                }
            }
        }

        #[test]
        fn components_sum_to_whole(u in arb_multivector(4, 2)) {
            let mut sum_j = Mv::zero(4, 2);
            for j in 0..=4 {
                sum_j = sum_j.add(&u.component(j).unwrap());
            }
            prop_assert_eq!(&sum_j, &u);
            let mut sum_kl = Mv::zero(4, 2);
            for k in 0..=2 {
                for l in 0..=2 {
                    sum_kl = sum_kl.add(&u.component_kl(k, l).unwrap());
                }
            }
            prop_assert_eq!(&sum_kl, &u);
        }

        #[test]
        fn clifford_mul_associative(
            u in arb_multivector(4, 2),
            v in arb_multivector(4, 2),
            w in arb_multivector(4, 2),
        ) {
            let lhs = u.clifford_mul(&v).unwrap().clifford_mul(&w).unwrap();
            let rhs = u.clifford_mul(&v.clifford_mul(&w).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
