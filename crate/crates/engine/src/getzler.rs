//! Getzler-filtered Volterra symbol calculus on a Gaussian-closed class.
//!
//! Symbols are finite sums c · ω · x^α ξ^β τ^γ (|ξ|²+iτ)^{-k} with a form
//! coefficient ω ∈ Λ(n). The class is closed under ∂_x, ∂_ξ, multiplication
//! by x/ξ/τ monomials and the # composition, which is exact here because
//! every element is polynomial in x, so the α-sum terminates. Getzler
//! degrees assign 1 to ξ and form generators, 2 to τ, -1 to x.

use crate::charforms::FormMatrix;
use crate::error::{EngineError, Result};
use crate::exterior::{clifford_basis_mul, MultiVector};
use crate::scalar::{inv_factorial, Coeff};
use num_complex::Complex64;
use std::collections::BTreeMap;

pub const MAX_VARS: usize = 8;

pub type MultiIndex = [u8; MAX_VARS];

pub fn mi_zero() -> MultiIndex {
    [0; MAX_VARS]
}

pub fn mi_weight(m: &MultiIndex) -> i64 {
    m.iter().map(|&x| x as i64).sum()
}

fn mi_add(a: &MultiIndex, b: &MultiIndex) -> MultiIndex {
    let mut out = *a;
    for i in 0..MAX_VARS {
        out[i] += b[i];
    }
    out
}

fn mi_sub(a: &MultiIndex, b: &MultiIndex) -> Option<MultiIndex> {
    let mut out = *a;
    for i in 0..MAX_VARS {
        if a[i] < b[i] {
            return None;
        }
        out[i] = a[i] - b[i];
    }
    Some(out)
}

/// Falling factorial μ(μ-1)···(μ-α+1) across coordinates.
fn mi_falling(m: &MultiIndex, a: &MultiIndex) -> i64 {
    let mut f = 1i64;
    for i in 0..MAX_VARS {
        for s in 0..a[i] {
            f *= (m[i] - s) as i64;
        }
    }
    f
}

/// Componentwise factorial α!.
fn mi_factorial(a: &MultiIndex) -> i64 {
    let mut f = 1i64;
    for i in 0..MAX_VARS {
        for s in 1..=a[i] {
            f *= s as i64;
        }
    }
    f
}

/// One basis term of the class, keyed without its coefficient.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct TermKey {
    /// x-powers.
    pub alpha: MultiIndex,
    /// ξ-powers.
    pub beta: MultiIndex,
    /// τ-power.
    pub gamma: u8,
    /// pole order of (|ξ|²+iτ)^{-k}.
    pub k: u8,
    /// wedge-monomial bitset of the form coefficient.
    pub form: u16,
}

impl TermKey {
    pub fn parabolic_degree(&self) -> i64 {
        mi_weight(&self.beta) + 2 * self.gamma as i64 - 2 * self.k as i64
    }

    pub fn getzler_degree(&self) -> i64 {
        self.parabolic_degree() + self.form.count_ones() as i64 - mi_weight(&self.alpha)
    }
}

/// Coefficient product for symbols: plain exterior product for model
/// (Λ-coefficient) symbols, Clifford product for symbols standing for
/// End(S)-valued operators through the symbol map.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CoeffProduct {
    Wedge,
    Clifford,
}

fn form_mul(a: u16, b: u16, mode: CoeffProduct) -> Option<(u16, i32)> {
    match mode {
        CoeffProduct::Wedge => {
            if a & b != 0 {
                None
            } else {
                // disjoint masks: the Clifford product is the wedge
                Some(clifford_basis_mul(a, b))
            }
        }
        CoeffProduct::Clifford => Some(clifford_basis_mul(a, b)),
    }
}

/// Finite sum of class terms over a fixed ambient Λ(n) with split a.
#[derive(Clone, PartialEq, Debug)]
pub struct VolterraExpr<T: Coeff> {
    n: usize,
    a: usize,
    terms: BTreeMap<TermKey, T>,
}

impl<T: Coeff> VolterraExpr<T> {
    pub fn zero(n: usize, a: usize) -> Self {
        VolterraExpr { n, a, terms: BTreeMap::new() }
    }

    pub fn one(n: usize, a: usize) -> Self {
        let mut e = Self::zero(n, a);
        e.insert(TermKey { alpha: mi_zero(), beta: mi_zero(), gamma: 0, k: 0, form: 0 }, T::one());
        e
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.a)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TermKey, &T)> {
        self.terms.iter()
    }

    /// Insert a term, reducing to the canonical basis first: a pole term
    /// with a τ-power rewrites through τ(…)^{-k} = -i(…)^{-k+1}
    /// + i|ξ|²(…)^{-k}, so stored terms have γ = 0 whenever k ≥ 1. On
    /// that basis the class monomials are linearly independent, which
    /// makes identities like h # parametrix = 1 literally cancel.
    pub fn insert(&mut self, key: TermKey, c: T) {
        if c.is_zero() {
            return;
        }
        if key.gamma > 0 && key.k > 0 {
            let mut reduced = key;
            reduced.gamma -= 1;
            let mut outer = reduced;
            outer.k -= 1;
            self.insert(outer, c.clone() * (-T::i()));
            for i in 0..self.n {
                let mut sq = reduced;
                sq.beta[i] += 2;
                self.insert(sq, c.clone() * T::i());
            }
            return;
        }
        match self.terms.entry(key) {
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

    /// ξ_i as a symbol (0-based coordinate).
    pub fn xi(n: usize, a: usize, i: usize) -> Self {
        let mut beta = mi_zero();
        beta[i] = 1;
        let mut e = Self::zero(n, a);
        e.insert(TermKey { alpha: mi_zero(), beta, gamma: 0, k: 0, form: 0 }, T::one());
        e
    }

    /// x^i as a symbol (0-based coordinate).
    pub fn x(n: usize, a: usize, i: usize) -> Self {
        let mut alpha = mi_zero();
        alpha[i] = 1;
        let mut e = Self::zero(n, a);
        e.insert(TermKey { alpha, beta: mi_zero(), gamma: 0, k: 0, form: 0 }, T::one());
        e
    }

    /// iτ as a symbol.
    pub fn i_tau(n: usize, a: usize) -> Self {
        let mut e = Self::zero(n, a);
        e.insert(TermKey { alpha: mi_zero(), beta: mi_zero(), gamma: 1, k: 0, form: 0 }, T::i());
        e
    }

    /// (|ξ|²+iτ)^{-k}.
    pub fn pole(n: usize, a: usize, k: u8) -> Self {
        let mut e = Self::zero(n, a);
        e.insert(TermKey { alpha: mi_zero(), beta: mi_zero(), gamma: 0, k, form: 0 }, T::one());
        e
    }

    /// |ξ|² + iτ, the principal heat symbol.
    pub fn heat_principal(n: usize, a: usize) -> Self {
        let mut e = Self::i_tau(n, a);
        for i in 0..n {
            let mut beta = mi_zero();
            beta[i] = 2;
            e.insert(TermKey { alpha: mi_zero(), beta, gamma: 0, k: 0, form: 0 }, T::one());
        }
        e
    }

    /// Embed a form as a multiplication symbol.
    pub fn from_form(mv: &MultiVector<T>) -> Self {
        let mut e = Self::zero(mv.dim(), mv.split());
        for (mask, c) in mv.iter() {
            e.insert(
                TermKey { alpha: mi_zero(), beta: mi_zero(), gamma: 0, k: 0, form: mask },
                c.clone(),
            );
        }
        e
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in other.terms.iter() {
            out.insert(*k, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = Self::zero(self.n, self.a);
        for (k, c) in self.terms.iter() {
            out.terms.insert(*k, -c.clone());
        }
        out
    }

    pub fn scale(&self, c: &T) -> Self {
        let mut out = Self::zero(self.n, self.a);
        if c.is_zero() {
            return out;
        }
        for (k, v) in self.terms.iter() {
            let p = v.clone() * c.clone();
            if !p.is_zero() {
                out.terms.insert(*k, p);
            }
        }
        out
    }

    /// True when every term has pole order zero: a differential symbol,
    /// polynomial in (ξ, τ).
    pub fn is_differential(&self) -> bool {
        self.terms.keys().all(|k| k.k == 0)
    }

    /// Max Getzler degree; `None` for the zero expression (order -∞).
    pub fn getzler_order(&self) -> Option<i64> {
        self.terms.keys().map(|k| k.getzler_degree()).max()
    }

    /// Max parabolic degree.
    pub fn parabolic_order(&self) -> Option<i64> {
        self.terms.keys().map(|k| k.parabolic_degree()).max()
    }

    pub fn getzler_components(&self) -> BTreeMap<i64, Self> {
        let mut map: BTreeMap<i64, Self> = BTreeMap::new();
        for (k, c) in self.terms.iter() {
            map.entry(k.getzler_degree())
                .or_insert_with(|| Self::zero(self.n, self.a))
                .insert(*k, c.clone());
        }
        map
    }

    pub fn parabolic_components(&self) -> BTreeMap<i64, Self> {
        let mut map: BTreeMap<i64, Self> = BTreeMap::new();
        for (k, c) in self.terms.iter() {
            map.entry(k.parabolic_degree())
                .or_insert_with(|| Self::zero(self.n, self.a))
                .insert(*k, c.clone());
        }
        map
    }

    /// The principal Getzler-homogeneous part (the model symbol).
    pub fn model_symbol(&self) -> Self {
        match self.getzler_order() {
            None => Self::zero(self.n, self.a),
            Some(m) => {
                let mut out = Self::zero(self.n, self.a);
                for (k, c) in self.terms.iter() {
                    if k.getzler_degree() == m {
                        out.terms.insert(*k, c.clone());
                    }
                }
                out
            }
        }
    }

    /// Getzler rescaling at a numeric λ: each term scales by λ^{degree}.
    pub fn rescale_eval(&self, lambda: &T) -> Self {
        let inv = lambda.clone().inv().expect("rescaling needs invertible lambda");
        let mut out = Self::zero(self.n, self.a);
        for (k, c) in self.terms.iter() {
            let d = k.getzler_degree();
            let mut factor = T::one();
            let base = if d >= 0 { lambda.clone() } else { inv.clone() };
            for _ in 0..d.abs() {
                factor = factor * base.clone();
            }
            out.insert(*k, c.clone() * factor);
        }
        out
    }

    /// ∂_{ξ_i}: lowers β and differentiates the pole,
    /// ∂_{ξ_i}(…)^{-k} = -2k ξ_i (…)^{-k-1}.
    pub fn d_xi(&self, i: usize) -> Self {
        let mut out = Self::zero(self.n, self.a);
        for (key, c) in self.terms.iter() {
            if key.beta[i] > 0 {
                let mut k2 = *key;
                k2.beta[i] -= 1;
                out.insert(k2, c.clone() * T::from_int(key.beta[i] as i64));
            }
            if key.k > 0 {
                let mut k2 = *key;
                k2.beta[i] += 1;
                k2.k += 1;
                out.insert(k2, c.clone() * T::from_int(-2 * key.k as i64));
            }
        }
        out
    }

    /// ∂_{x_i}.
    pub fn d_x(&self, i: usize) -> Self {
        let mut out = Self::zero(self.n, self.a);
        for (key, c) in self.terms.iter() {
            if key.alpha[i] > 0 {
                let mut k2 = *key;
                k2.alpha[i] -= 1;
                out.insert(k2, c.clone() * T::from_int(key.alpha[i] as i64));
            }
        }
        out
    }

    /// Pointwise product of symbols as functions (no ∂-corrections).
    pub fn mul_pointwise(&self, other: &Self, mode: CoeffProduct) -> Self {
        let mut out = Self::zero(self.n, self.a);
        for (ka, ca) in self.terms.iter() {
            for (kb, cb) in other.terms.iter() {
                if let Some((mask, sign)) = form_mul(ka.form, kb.form, mode) {
                    let mut c = ca.clone() * cb.clone();
                    if sign < 0 {
                        c = -c;
                    }
                    out.insert(
                        TermKey {
                            alpha: mi_add(&ka.alpha, &kb.alpha),
                            beta: mi_add(&ka.beta, &kb.beta),
                            gamma: ka.gamma + kb.gamma,
                            k: ka.k + kb.k,
                            form: mask,
                        },
                        c,
                    );
                }
            }
        }
        out
    }

    pub fn map<U: Coeff>(&self, f: impl Fn(&T) -> U) -> VolterraExpr<U> {
        let mut out = VolterraExpr::zero(self.n, self.a);
        for (k, c) in self.terms.iter() {
            let v = f(c);
            if !v.is_zero() {
                out.terms.insert(*k, v);
            }
        }
        out
    }

    pub fn to_c64(&self) -> VolterraExpr<Complex64> {
        self.map(|c| c.to_c64())
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.to_c64().norm()).fold(0.0, f64::max)
    }
}

/// The # composition q1 # q2 = Σ_α (1/α!) ∂_ξ^α q1 · D_x^α q2, D = -i∂.
/// Exact on this class; the public contract requires the left factor to
/// be a differential symbol (polynomial in ξ and τ).
pub fn compose<T: Coeff>(
    p: &VolterraExpr<T>,
    q: &VolterraExpr<T>,
    mode: CoeffProduct,
) -> Result<VolterraExpr<T>> {
    if !p.is_differential() {
        return Err(EngineError::NotDifferential);
    }
    compose_any(p, q, mode)
}

fn compose_any<T: Coeff>(
    p: &VolterraExpr<T>,
    q: &VolterraExpr<T>,
    mode: CoeffProduct,
) -> Result<VolterraExpr<T>> {
    let (n, a) = p.dims();
    if q.dims() != (n, a) {
        return Err(EngineError::DimensionMismatch { left: q.dims().0, right: n });
    }
    let mut out = VolterraExpr::zero(n, a);
    for (kp, cp) in p.iter() {
        for (kq, cq) in q.iter() {
            // α runs below min(β_p, x-power of q); ∂_ξ^α may also hit the
            // pole of q1 — excluded by the differential contract, and for
            // internal pole-first uses the x-polynomiality of q still
            // terminates the sum through the x-power bound
            let mut bound = mi_zero();
            for i in 0..n {
                bound[i] = kp.beta[i].min(kq.alpha[i]);
            }
            enumerate_sub_indices(&bound, &mut |alpha: &MultiIndex| {
                let fall_beta = mi_falling(&kp.beta, alpha);
                let fall_x = mi_falling(&kq.alpha, alpha);
                if fall_beta == 0 || fall_x == 0 {
                    return;
                }
                if let Some((mask, sign)) = form_mul(kp.form, kq.form, mode) {
                    let mut c = cp.clone() * cq.clone();
                    // 1/α! with the componentwise factorial
                    c = c * T::from_int(fall_beta * fall_x) * T::from_ratio(1, mi_factorial(alpha));
                    for _ in 0..mi_weight(alpha) {
                        c = c * (-T::i());
                    }
                    if sign < 0 {
                        c = -c;
                    }
                    out.insert(
                        TermKey {
                            alpha: mi_add(&kp.alpha, &mi_sub(&kq.alpha, alpha).unwrap()),
                            beta: mi_add(&mi_sub(&kp.beta, alpha).unwrap(), &kq.beta),
                            gamma: kp.gamma + kq.gamma,
                            k: kq.k,
                            form: mask,
                        },
                        c,
                    );
                }
            });
        }
    }
    Ok(out)
}

fn enumerate_sub_indices(bound: &MultiIndex, f: &mut impl FnMut(&MultiIndex)) {
    fn rec(bound: &MultiIndex, pos: usize, cur: &mut MultiIndex, f: &mut impl FnMut(&MultiIndex)) {
        if pos == MAX_VARS {
            f(cur);
            return;
        }
        for v in 0..=bound[pos] {
            cur[pos] = v;
            rec(bound, pos + 1, cur, f);
        }
        cur[pos] = 0;
    }
    let mut cur = mi_zero();
    rec(bound, 0, &mut cur, f);
}

/// Commutator p#q - q#p of differential symbols.
pub fn commutator<T: Coeff>(
    p: &VolterraExpr<T>,
    q: &VolterraExpr<T>,
    mode: CoeffProduct,
) -> Result<VolterraExpr<T>> {
    Ok(compose_any(p, q, mode)?.sub(&compose_any(q, p, mode)?))
}

// --- model operators ----------------------------------------------------------

/// Symbol of H_R + ∂_t with H_R = -Σ(∂_i - ¼R_ij x^j)², expanded by hand:
/// Σ ξ_i² + iτ + (i/2) Σ ξ_i (Rx)_i - (1/16) Σ (Rx)_i ∧ (Rx)_i,
/// with (Rx)_i = Σ_j R_ij x^j 2-form-valued. This is the independent route
/// against which the model of the Lichnerowicz symbol is checked.
pub fn hr_symbol<T: Coeff>(r: &FormMatrix<T>) -> Result<VolterraExpr<T>> {
    let (n_amb, a) = r.ambient();
    let n = r.size();
    if n != n_amb {
        return Err(EngineError::SizeMismatch { left: n, right: n_amb });
    }
    let mut e = VolterraExpr::heat_principal(n_amb, a);
    let half_i = T::i() * T::from_ratio(1, 2);
    for i in 0..n {
        for j in 0..n {
            for (mask, c) in r.get(i, j).iter() {
                let mut alpha = mi_zero();
                alpha[j] = 1;
                let mut beta = mi_zero();
                beta[i] = 1;
                e.insert(
                    TermKey { alpha, beta, gamma: 0, k: 0, form: mask },
                    c.clone() * half_i.clone(),
                );
            }
        }
    }
    let m16 = T::from_ratio(-1, 16);
    for i in 0..n {
        for j in 0..n {
            for jp in 0..n {
                let prod = r.get(i, j).wedge(r.get(i, jp))?;
                for (mask, c) in prod.iter() {
                    let mut alpha = mi_zero();
                    alpha[j] += 1;
                    alpha[jp] += 1;
                    e.insert(
                        TermKey { alpha, beta: mi_zero(), gamma: 0, k: 0, form: mask },
                        c.clone() * m16.clone(),
                    );
                }
            }
        }
    }
    Ok(e)
}

/// Symbol of D² + ∂_t through the truncated geometric data
/// g_ij = δ_ij + O(|x|²), ω_ikl = -½R_ijkl x^j: the Clifford-coefficient
/// square -Σ a_i # a_i + κ/4 + iτ with a_i = iξ_i - ¼(Rx)_i.
pub fn lichnerowicz_symbol<T: Coeff>(r: &FormMatrix<T>, kappa: &T) -> Result<VolterraExpr<T>> {
    if !r.is_curvature_shaped() {
        return Err(EngineError::Invalid("curvature must be antisymmetric 2-forms".into()));
    }
    let (n_amb, asplit) = r.ambient();
    let n = r.size();
    if n != n_amb {
        return Err(EngineError::SizeMismatch { left: n, right: n_amb });
    }
    let quarter = T::from_ratio(-1, 4);
    let mut total = VolterraExpr::zero(n_amb, asplit);
    for i in 0..n {
        let mut a_i = VolterraExpr::zero(n_amb, asplit);
        let mut beta = mi_zero();
        beta[i] = 1;
        a_i.insert(TermKey { alpha: mi_zero(), beta, gamma: 0, k: 0, form: 0 }, T::i());
        for j in 0..n {
            for (mask, c) in r.get(i, j).iter() {
                let mut alpha = mi_zero();
                alpha[j] = 1;
                a_i.insert(
                    TermKey { alpha, beta: mi_zero(), gamma: 0, k: 0, form: mask },
                    c.clone() * quarter.clone(),
                );
            }
        }
        total = total.add(&compose(&a_i, &a_i, CoeffProduct::Clifford)?);
    }
    let mut out = total.neg();
    out.insert(
        TermKey { alpha: mi_zero(), beta: mi_zero(), gamma: 0, k: 0, form: 0 },
        kappa.clone() * T::from_ratio(1, 4),
    );
    Ok(out.add(&VolterraExpr::i_tau(n_amb, asplit)))
}

/// Model operator of D² + ∂_t: the Getzler-leading part of the
/// Lichnerowicz symbol; equals hr_symbol(R) exactly.
pub fn model_of_dirac_squared<T: Coeff>(r: &FormMatrix<T>) -> Result<VolterraExpr<T>> {
    Ok(lichnerowicz_symbol(r, &T::zero())?.model_symbol())
}

// --- heat parametrix ----------------------------------------------------------

/// Volterra parametrix of a heat symbol whose parabolic-degree-2 part is
/// exactly |ξ|²+iτ: solves h # r = 1 downward in parabolic degree and
/// returns (r, defect) with defect = h#r - 1, computed exactly. For
/// Getzler-homogeneous h (the model class) the construction terminates
/// with zero defect; symbols with scalar lower-order parts (e.g. κ/4)
/// retain an exact defect below the requested depth.
pub fn heat_parametrix<T: Coeff>(
    h: &VolterraExpr<T>,
    mode: CoeffProduct,
    depth: usize,
) -> Result<(VolterraExpr<T>, VolterraExpr<T>)> {
    let (n, a) = h.dims();
    let principal: VolterraExpr<T> = h
        .parabolic_components()
        .remove(&2)
        .ok_or_else(|| EngineError::Invalid("heat symbol must have parabolic order 2".into()))?;
    if principal != VolterraExpr::heat_principal(n, a) {
        return Err(EngineError::Invalid(
            "parametrix construction needs principal symbol |xi|^2 + i tau".into(),
        ));
    }
    let r0: VolterraExpr<T> = VolterraExpr::pole(n, a, 1);
    let mut r = r0.clone();
    let one = VolterraExpr::one(n, a);
    for _ in 0..=depth {
        let defect = compose(h, &r, mode)?.sub(&one);
        if defect.is_zero() {
            return Ok((r, defect));
        }
        let top_deg = defect.parabolic_order().unwrap();
        let top = defect.parabolic_components().remove(&top_deg).unwrap();
        r = r.sub(&r0.mul_pointwise(&top, mode));
    }
    let defect = compose(h, &r, mode)?.sub(&one);
    Ok((r, defect))
}

// --- inverse Fourier transforms -------------------------------------------------

/// Smooth t>0 representative of the inverse Fourier transform of a class
/// expression: a polynomial-Gaussian sum
/// Σ c · ω · x^μ · t^{p - n/2} · (4π)^{-n/2} e^{-|x|²/4t},
/// closed under ∂_x and ∂_t; zero on t < 0 by the Volterra property.
#[derive(Clone, PartialEq, Debug)]
pub struct HeatKernelExpr<T: Coeff> {
    n: usize,
    a: usize,
    terms: BTreeMap<(MultiIndex, i32, u16), T>,
}

impl<T: Coeff> HeatKernelExpr<T> {
    pub fn zero(n: usize, a: usize) -> Self {
        assert!(n % 2 == 0, "integer t-power bookkeeping needs even n");
        HeatKernelExpr { n, a, terms: BTreeMap::new() }
    }

    fn insert(&mut self, key: (MultiIndex, i32, u16), c: T) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(key) {
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
        let mut out = self.clone();
        for (k, c) in other.terms.iter() {
            out.insert(*k, c.clone());
        }
        out
    }

    pub fn scale(&self, c: &T) -> Self {
        let mut out = Self::zero(self.n, self.a);
        for (k, v) in self.terms.iter() {
            out.insert(*k, v.clone() * c.clone());
        }
        out
    }

    pub fn d_x(&self, i: usize) -> Self {
        let mut out = Self::zero(self.n, self.a);
        for ((mu, p, form), c) in self.terms.iter() {
            if mu[i] > 0 {
                let mut m2 = *mu;
                m2[i] -= 1;
                out.insert((m2, *p, *form), c.clone() * T::from_int(mu[i] as i64));
            }
            let mut m2 = *mu;
            m2[i] += 1;
            out.insert((m2, p - 1, *form), c.clone() * T::from_ratio(-1, 2));
        }
        out
    }

    pub fn d_t(&self) -> Self {
        let half_n = (self.n / 2) as i64;
        let mut out = Self::zero(self.n, self.a);
        for ((mu, p, form), c) in self.terms.iter() {
            let fac = *p as i64 - half_n;
            if fac != 0 {
                out.insert((*mu, p - 1, *form), c.clone() * T::from_int(fac));
            }
            for j in 0..self.n {
                let mut m2 = *mu;
                m2[j] += 2;
                out.insert((m2, p - 2, *form), c.clone() * T::from_ratio(1, 4));
            }
        }
        out
    }

    pub fn mul_x(&self, alpha: &MultiIndex) -> Self {
        let mut out = Self::zero(self.n, self.a);
        for ((mu, p, form), c) in self.terms.iter() {
            out.insert((mi_add(mu, alpha), *p, *form), c.clone());
        }
        out
    }

    /// Numeric evaluation at (x, t); identically zero for t ≤ 0.
    pub fn eval(&self, x: &[f64], t: f64) -> MultiVector<Complex64> {
        let mut out = MultiVector::zero(self.n, self.a);
        if t <= 0.0 {
            return out;
        }
        let norm = (4.0 * std::f64::consts::PI).powf(-(self.n as f64) / 2.0);
        let x2: f64 = x.iter().map(|v| v * v).sum();
        let gauss = (-x2 / (4.0 * t)).exp();
        for ((mu, p, form), c) in self.terms.iter() {
            let mut v = norm * gauss * t.powf(*p as f64 - self.n as f64 / 2.0);
            for i in 0..self.n {
                v *= x[i].powi(mu[i] as i32);
            }
            let coeff = c.to_c64() * v;
            if coeff.norm() > 0.0 {
                out = out.add(&MultiVector::monomial_from_mask(self.n, self.a, *form, coeff));
            }
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(MultiIndex, i32, u16), &T)> {
        self.terms.iter()
    }
}

/// Inverse Fourier transform of a single class term with k ≥ 1, without
/// its x^α parameter factor:
/// Ǧ_k = t^{k-1}/(k-1)! (4πt)^{-n/2} e^{-|z|²/4t}, then τ^γ ↦ (-i∂_t)^γ
/// and ξ^β ↦ (-i∂_z)^β. The result lives in the difference variable z;
/// the kernel of the term is x^α · (this)(x - y, t).
pub fn inverse_fourier_term<T: Coeff>(
    n: usize,
    a: usize,
    key: &TermKey,
    coeff: &T,
) -> Result<HeatKernelExpr<T>> {
    if key.k == 0 {
        return Err(EngineError::PoleOrderZero);
    }
    let mut e = HeatKernelExpr::zero(n, a);
    e.insert(
        (mi_zero(), key.k as i32 - 1, key.form),
        coeff.clone() * T::from_rat(&inv_factorial(key.k as usize - 1)),
    );
    for _ in 0..key.gamma {
        e = e.d_t().scale(&-T::i());
    }
    for j in 0..n {
        for _ in 0..key.beta[j] {
            e = e.d_x(j).scale(&-T::i());
        }
    }
    Ok(e)
}

/// Kernel of a whole expression: pairs of (parameter monomial x^α,
/// difference-variable Gaussian expression). K(x, y, t) =
/// Σ x^α · part_α(x - y, t), vanishing for t < 0.
pub struct VolterraKernel<T: Coeff> {
    n: usize,
    a: usize,
    pub parts: BTreeMap<MultiIndex, HeatKernelExpr<T>>,
}

impl<T: Coeff> VolterraKernel<T> {
    /// Evaluate K(x, y, t) numerically.
    pub fn eval(&self, x: &[f64], y: &[f64], t: f64) -> MultiVector<Complex64> {
        let z: Vec<f64> = x.iter().zip(y.iter()).map(|(a, b)| a - b).collect();
        let mut out = MultiVector::zero(self.n, self.a);
        for (alpha, part) in self.parts.iter() {
            let mut mono = 1.0;
            for i in 0..self.n {
                mono *= x[i].powi(alpha[i] as i32);
            }
            if mono != 0.0 {
                out = out.add(&part.eval(&z, t).scale(&Complex64::new(mono, 0.0)));
            }
        }
        out
    }
}

/// Inverse Fourier transform of a whole expression (all k ≥ 1).
pub fn inverse_fourier<T: Coeff>(q: &VolterraExpr<T>) -> Result<VolterraKernel<T>> {
    let (n, a) = q.dims();
    let mut parts: BTreeMap<MultiIndex, HeatKernelExpr<T>> = BTreeMap::new();
    for (key, c) in q.iter() {
        let e = inverse_fourier_term(n, a, key, c)?;
        match parts.entry(key.alpha) {
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(e);
            }
            std::collections::btree_map::Entry::Occupied(mut slot) => {
                let sum = slot.get().add(&e);
                *slot.get_mut() = sum;
            }
        }
    }
    Ok(VolterraKernel { n, a, parts })
}

// --- fiber integrals: the I_Q^{(j)} coefficients --------------------------------

/// The expansion I_Q(0,t) ~ Σ_j t^{power(j)} (4π)^{-a/2} coeffs[j] of the
/// fiber integral ∫ q̌(0,v; 0,(1-Φ)v; t) dv over the normal directions.
pub struct IqExpansion<T: Coeff> {
    pub a: usize,
    /// parabolic order m of the symbol, fixing the exponent offsets.
    pub m: i64,
    pub coeffs: Vec<MultiVector<T>>,
}

impl<T: Coeff> IqExpansion<T> {
    /// t-power of the j-th coefficient: -(a/2 + [m/2] + 1) + j.
    pub fn power(&self, j: usize) -> i64 {
        -((self.a as i64) / 2 + self.m.div_euclid(2) + 1) + j as i64
    }

    /// Numeric value at t, including the (4π)^{-a/2} prefactor.
    pub fn eval(&self, t: f64) -> MultiVector<Complex64> {
        let n = self.coeffs.first().map(|c| c.dim()).unwrap_or(0);
        let mut out = MultiVector::zero(n, self.a);
        let fourpi = (4.0 * std::f64::consts::PI).powf(-(self.a as f64) / 2.0);
        for (j, c) in self.coeffs.iter().enumerate() {
            let f = fourpi * t.powi(self.power(j) as i32);
            out = out.add(&c.to_c64().scale(&Complex64::new(f, 0.0)));
        }
        out
    }
}

/// Compute I_Q^{(j)} for j = 0..=jmax: Taylor expansion in the fiber
/// variable and exact Gaussian moments against exp(-|(1-Φ)v|²/4). Φ is
/// the normal rotation as a b×b scalar matrix with no unit eigenvalue.
pub fn iq_coefficients<T: Coeff>(
    q: &VolterraExpr<T>,
    phi: &[Vec<T>],
    a: usize,
    jmax: usize,
) -> Result<IqExpansion<T>> {
    let (n, asplit) = q.dims();
    if asplit != a {
        return Err(EngineError::DimensionMismatch { left: asplit, right: a });
    }
    let b = n - a;
    if phi.len() != b {
        return Err(EngineError::SizeMismatch { left: phi.len(), right: b });
    }
    let m = match q.parabolic_order() {
        Some(m) => m,
        None => return Ok(IqExpansion { a, m: 0, coeffs: vec![MultiVector::zero(n, a); jmax + 1] }),
    };
    let m_half = m.div_euclid(2);

    // W = 1 - Φ, M = WᵀW, covariance 2M^{-1}, |det W| = det(M)^{1/2}
    let w: Vec<Vec<T>> = (0..b)
        .map(|i| {
            (0..b)
                .map(|j| {
                    let id = if i == j { T::one() } else { T::zero() };
                    id - phi[i][j].clone()
                })
                .collect()
        })
        .collect();
    let detw = crate::charforms::det_scalar(&w);
    if detw.is_zero() {
        return Err(EngineError::UnitNormalEigenvalue);
    }
    let mut mmat: Vec<Vec<T>> = vec![vec![T::zero(); b]; b];
    for i in 0..b {
        for j in 0..b {
            let mut s = T::zero();
            for k in 0..b {
                s = s + w[k][i].clone() * w[k][j].clone();
            }
            mmat[i][j] = s;
        }
    }
    let minv = crate::charforms::invert_scalar(&mmat)?;
    let cov: Vec<Vec<T>> = (0..b)
        .map(|i| (0..b).map(|j| minv[i][j].clone() * T::from_int(2)).collect())
        .collect();
    let mut abs_detw = detw;
    if abs_detw.real_sign() < 0 {
        abs_detw = -abs_detw;
    }
    let inv_abs_detw = abs_detw.inv().ok_or(EngineError::UnitNormalEigenvalue)?;

    let mut coeffs = vec![MultiVector::zero(n, a); jmax + 1];

    // Per term: the parameter monomial x^κ vanishes at x' = 0 unless its
    // tangential part is empty; the surviving v^{κ''} joins the Gaussian
    // moments. Rescaling v → √t v shows the term lands in slot
    // j = ([m/2]·2 + |κ''| - l)/2 where l is the parabolic degree.
    for (key, c) in q.iter() {
        if (0..a).any(|i| key.alpha[i] > 0) {
            continue;
        }
        let kappa = key.alpha;
        let kw = mi_weight(&kappa);
        let l = key.parabolic_degree();
        let twoj = 2 * m_half + kw - l;
        if twoj < 0 || twoj % 2 != 0 {
            continue;
        }
        let j = (twoj / 2) as usize;
        if j > jmax {
            continue;
        }
        let gauss = inverse_fourier_term(n, a, key, c)?;
        for ((mu, _p, form), gc) in gauss.iter() {
            // difference variable z = (0, Wv): tangential z-powers vanish
            if (0..a).any(|i| mu[i] > 0) {
                continue;
            }
            // expand (Wv)^μ into v-monomials
            let mut poly: BTreeMap<MultiIndex, T> = BTreeMap::new();
            poly.insert(mi_zero(), gc.clone());
            for i in a..n {
                for _ in 0..mu[i] {
                    let mut next: BTreeMap<MultiIndex, T> = BTreeMap::new();
                    for (vm, vc) in poly.iter() {
                        for col in 0..b {
                            let wval = w[i - a][col].clone();
                            if wval.is_zero() {
                                continue;
                            }
                            let mut vm2 = *vm;
                            vm2[a + col] += 1;
                            let add = vc.clone() * wval;
                            match next.entry(vm2) {
                                std::collections::btree_map::Entry::Vacant(e) => {
                                    e.insert(add);
                                }
                                std::collections::btree_map::Entry::Occupied(mut e) => {
                                    *e.get_mut() = e.get().clone() + add;
                                }
                            }
                        }
                    }
                    poly = next;
                }
            }
            for (vm, vc) in poly.iter() {
                let total = mi_add(vm, &kappa);
                let mut idx: Vec<usize> = Vec::new();
                for i in a..n {
                    for _ in 0..total[i] {
                        idx.push(i - a);
                    }
                }
                let moment = isserlis(&cov, &idx);
                if moment.is_zero() {
                    continue;
                }
                let contrib = vc.clone() * moment * inv_abs_detw.clone();
                coeffs[j] = coeffs[j].add(&MultiVector::monomial_from_mask(n, a, *form, contrib));
            }
        }
    }

    Ok(IqExpansion { a, m, coeffs })
}

/// Isserlis/Wick moment E[Π v_{idx}] of a centered Gaussian.
fn isserlis<T: Coeff>(cov: &[Vec<T>], idx: &[usize]) -> T {
    if idx.len() % 2 == 1 {
        return T::zero();
    }
    if idx.is_empty() {
        return T::one();
    }
    let mut total = T::zero();
    for k in 1..idx.len() {
        let pair = cov[idx[0]][idx[k]].clone();
        if pair.is_zero() {
            continue;
        }
        let rest: Vec<usize> = idx
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != 0 && *j != k)
            .map(|(_, &v)| v)
            .collect();
        total = total + pair * isserlis(cov, &rest);
    }
    total
}

// --- parity-split asymptotics ----------------------------------------------------

/// Per-form-degree classification of σ[I_Q(0,t)]^{(j)} as t → 0⁺: an
/// O(t^{bound}) statement when m-j is odd, or leading power plus the model
/// coefficient when m-j is even.
#[derive(Clone, Debug)]
pub enum DegreeAsymptotics<T: Coeff> {
    Odd { j: usize, bound_pow: i64 },
    Even { j: usize, lead_pow: i64, coeff: MultiVector<T> },
}

/// Split the fiber-integral asymptotics of q by form degree using the
/// parity of m - j (m the Getzler order); even degrees get their leading
/// coefficient from the fiber integral of the model symbol at t = 1.
pub fn parity_asymptotics<T: Coeff>(
    q: &VolterraExpr<T>,
    phi: &[Vec<T>],
    a: usize,
) -> Result<Vec<DegreeAsymptotics<T>>> {
    let (n, _) = q.dims();
    let m = match q.getzler_order() {
        None => return Ok(vec![]),
        Some(m) => m,
    };
    let model = q.model_symbol();
    let jmax = n / 2 + 2;
    let model_iq = iq_coefficients(&model, phi, a, jmax)?;
    let mut model_at_1 = MultiVector::zero(n, a);
    for c in &model_iq.coeffs {
        model_at_1 = model_at_1.add(c);
    }
    let mut out = Vec::new();
    for j in 0..=n {
        if (m - j as i64).rem_euclid(2) == 1 {
            out.push(DegreeAsymptotics::Odd { j, bound_pow: (j as i64 - m - a as i64 - 1) / 2 });
        } else {
            out.push(DegreeAsymptotics::Even {
                j,
                lead_pow: (j as i64 - m - a as i64) / 2 - 1,
                coeff: model_at_1.component(j)?,
            });
        }
    }
    Ok(out)
}
