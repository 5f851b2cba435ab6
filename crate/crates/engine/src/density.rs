//! Fixed-point index densities, differentiable heat-trace asymptotics and
//! the local cocycle components assembled from characteristic forms.
//!
//! The module never discretizes geometry itself: fixed-point data and
//! quadrature nodes are supplied by the model-geometry oracles or by JSON
//! input files. Orientation of the normal rotation is pinned by the
//! positive-plane convention of [`PlanarDecomposition`]; the residual
//! global spin-lift sign is explicit per-component data.

use crate::charforms::{a_hat, nu_phi, FormMatrix};
use crate::clifford::PlanarDecomposition;
use crate::error::{EngineError, Result};
use crate::exterior::MultiVector;
use crate::getzler::{
    self, heat_parametrix, lichnerowicz_symbol, CoeffProduct, DegreeAsymptotics, VolterraExpr,
};
use crate::scalar::{rat_from_str, GaussianRational};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// One fixed-point component: dimensions, normal rotation, curvature
/// blocks, integration weight and the global spin-lift sign relative to
/// the positive-plane convention of the decomposition.
pub struct FixedComponent {
    pub n: usize,
    pub a: usize,
    pub dec: PlanarDecomposition,
    pub rp: FormMatrix<Complex64>,
    pub rpp: FormMatrix<Complex64>,
    /// quadrature weight / volume element (1 for isolated points).
    pub weight: f64,
    /// ±1, the global lift sign; recorded in all outputs.
    pub lift_sign: i8,
}

impl FixedComponent {
    pub fn b(&self) -> usize {
        self.n - self.a
    }

    /// An isolated fixed point (a = 0) with a flat normal bundle.
    pub fn isolated_flat(n: usize, dec: PlanarDecomposition, lift_sign: i8) -> Self {
        FixedComponent {
            n,
            a: 0,
            rp: FormMatrix::zeros(0, n, 0),
            rpp: FormMatrix::zeros(dec.b, n, 0),
            dec,
            weight: 1.0,
            lift_sign,
        }
    }

    /// A full-dimensional flat component (the identity isometry).
    pub fn full_flat(n: usize, weight: f64) -> Self {
        FixedComponent {
            n,
            a: n,
            dec: PlanarDecomposition::from_angles(&[]),
            rp: FormMatrix::zeros(n, n, n),
            rpp: FormMatrix::zeros(0, n, n),
            weight,
            lift_sign: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.a % 2 != 0 || self.n % 2 != 0 || self.a > self.n {
            return Err(EngineError::Invalid("dimensions must be even with a <= n".into()));
        }
        if self.dec.b != self.n - self.a {
            return Err(EngineError::SizeMismatch { left: self.dec.b, right: self.n - self.a });
        }
        if self.dec.has_fixed_directions() {
            return Err(EngineError::UnitNormalEigenvalue);
        }
        if !self.rp.is_curvature_shaped() || !self.rpp.is_curvature_shaped() {
            return Err(EngineError::Invalid("curvature blocks must be antisymmetric".into()));
        }
        Ok(())
    }
}

/// (-i)^{n/2}.
fn minus_i_pow(n: usize) -> Complex64 {
    let mut f = Complex64::new(1.0, 0.0);
    for _ in 0..(n / 2) {
        f *= Complex64::new(0.0, -1.0);
    }
    f
}

/// Pointwise index density of a fixed-point component:
/// lift_sign · (-i)^{n/2} (2π)^{-a/2} |A-roof(R') ∧ ν_φ(R'')|^{(a)}.
pub fn local_density(c: &FixedComponent) -> Result<Complex64> {
    c.validate()?;
    let ahat = a_hat(&c.rp)?;
    let nu = if c.b() > 0 { nu_phi(&c.rpp, &c.dec)? } else { MultiVector::one(c.n, c.a) };
    let form = ahat.wedge(&nu)?;
    let norm = minus_i_pow(c.n)
        * (2.0 * std::f64::consts::PI).powf(-(c.a as f64) / 2.0)
        * c.lift_sign as f64;
    Ok(norm * form.berezin(c.a))
}

/// Function jets at a point of the component: values f^j and tangential
/// differentials d'f^j (1-forms supported on indices ≤ a).
#[derive(Clone, Debug)]
pub struct FunctionJets {
    pub values: Vec<Complex64>,
    pub tangential_diffs: Vec<MultiVector<Complex64>>,
}

impl FunctionJets {
    fn validate(&self, a: usize) -> Result<()> {
        if self.values.len() != self.tangential_diffs.len() + 1 {
            return Err(EngineError::Invalid(
                "jets carry one value per function and differentials for all but f0".into(),
            ));
        }
        let tang_mask: u16 = ((1u32 << a) - 1) as u16;
        for d in &self.tangential_diffs {
            for (mask, _) in d.iter() {
                if mask & !tang_mask != 0 {
                    return Err(EngineError::Invalid(
                        "tangential differentials must not carry normal components".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// ω_k = A-roof(R') ∧ ν_φ(R'') ∧ f⁰ d'f¹ ∧ … ∧ d'f^{2k}.
/// For 2k > a the form degree exceeds the component dimension and the
/// zero form is returned, so integrals read 0.
pub fn omega_k(c: &FixedComponent, jets: &FunctionJets, k: usize) -> Result<MultiVector<Complex64>> {
    c.validate()?;
    jets.validate(c.a)?;
    if jets.tangential_diffs.len() < 2 * k {
        return Err(EngineError::Invalid(format!("need 2k = {} differentials", 2 * k)));
    }
    if 2 * k > c.a {
        return Ok(MultiVector::zero(c.n, c.a));
    }
    let ahat = a_hat(&c.rp)?;
    let nu = if c.b() > 0 { nu_phi(&c.rpp, &c.dec)? } else { MultiVector::one(c.n, c.a) };
    let mut form = ahat.wedge(&nu)?.scale(&jets.values[0]);
    for d in jets.tangential_diffs.iter().take(2 * k) {
        form = form.wedge(d)?;
    }
    Ok(form)
}

/// Asymptotic descriptor of Str[P_{k,α} e^{-tD²} U_φ] near t = 0.
#[derive(Clone, Debug)]
pub enum PkaAsymptotics {
    /// α = 0: t^{-k} · coeff + O(t^{-k+1}).
    Leading { power: i64, coeff: Complex64 },
    /// α ≠ 0: O(t^{power_bound}) with power_bound ≥ -(|α|+k)+1.
    Bound { power_bound: i64 },
}

/// Differentiable asymptotics for one fixed-point component: for α = 0
/// the t^{-k} coefficient is the lift-signed
/// (-i)^{n/2}(2π)^{-a/2}|ω_k|^{(a)}; for α ≠ 0 the Getzler bookkeeping of
/// P_{k,α} # parametrix certifies the improved bound O(t^{-(|α|+k)+1}).
pub fn pka_leading(
    c: &FixedComponent,
    jets: &FunctionJets,
    k: usize,
    alpha: &[usize],
) -> Result<PkaAsymptotics> {
    c.validate()?;
    if alpha.iter().all(|&x| x == 0) {
        let form = omega_k(c, jets, k)?;
        let norm = minus_i_pow(c.n)
            * (2.0 * std::f64::consts::PI).powf(-(c.a as f64) / 2.0)
            * c.lift_sign as f64;
        return Ok(PkaAsymptotics::Leading { power: -(k as i64), coeff: norm * form.berezin(c.a) });
    }
    let abs_alpha: usize = alpha.iter().sum();
    let n = c.n;
    let a = c.a;
    let r = block_curvature_c64(&c.rp, &c.rpp, n, a)?;
    let h = lichnerowicz_symbol(&r, &Complex64::new(0.0, 0.0))?;
    let (parametrix, _defect) = heat_parametrix(&h, CoeffProduct::Clifford, n + 2)?;

    let mut p = VolterraExpr::from_form(&MultiVector::scalar(n, a, jets.values[0]));
    for (j, d) in jets.tangential_diffs.iter().take(2 * k).enumerate() {
        let mut factor = VolterraExpr::from_form(d);
        let reps = if j < alpha.len() { alpha[j] } else { 0 };
        for _ in 0..reps {
            factor = getzler::commutator(&h, &factor, CoeffProduct::Clifford)?;
        }
        p = getzler::compose(&p, &factor, CoeffProduct::Clifford)?;
    }
    let product = getzler::compose(&p, &parametrix, CoeffProduct::Clifford)?;
    let order = product.getzler_order().unwrap_or(i64::MIN / 2);
    // σ[I(0,t)]^{(a)} is O(t^{(a-order-a-1)/2}) (odd) or
    // O(t^{(a-order-a)/2 - 1}) (even)
    let bound = if (order - a as i64).rem_euclid(2) == 1 {
        (-order - 1) / 2
    } else {
        -order / 2 - 1
    };
    let claimed = -(abs_alpha as i64 + k as i64) + 1;
    if bound < claimed {
        return Err(EngineError::Invalid(format!(
            "Getzler bookkeeping gives t^{bound}, weaker than the claimed t^{claimed}"
        )));
    }
    Ok(PkaAsymptotics::Bound { power_bound: bound })
}

fn block_curvature_c64(
    rp: &FormMatrix<Complex64>,
    rpp: &FormMatrix<Complex64>,
    n: usize,
    a: usize,
) -> Result<FormMatrix<Complex64>> {
    let b = rpp.size();
    if rp.size() != a || a + b != n {
        return Err(EngineError::SizeMismatch { left: rp.size() + b, right: n });
    }
    let mut r = FormMatrix::zeros(n, n, a);
    for i in 0..a {
        for j in 0..a {
            r.set(i, j, rp.get(i, j).clone());
        }
    }
    for i in 0..b {
        for j in 0..b {
            r.set(a + i, a + j, rpp.get(i, j).clone());
        }
    }
    Ok(r)
}

/// Classified fiber-integral asymptotics of a symbol against the
/// component's normal rotation.
pub fn component_parity_asymptotics(
    c: &FixedComponent,
    q: &VolterraExpr<Complex64>,
) -> Result<Vec<DegreeAsymptotics<Complex64>>> {
    c.validate()?;
    let b = c.b();
    let m = c.dec.original_matrix();
    let phi: Vec<Vec<Complex64>> =
        (0..b).map(|i| (0..b).map(|j| Complex64::new(m[(i, j)], 0.0)).collect()).collect();
    getzler::parity_asymptotics(q, &phi, c.a)
}

// --- cocycle components over quadrature nodes ----------------------------------

/// One quadrature node on a fixed-point component of the composed word:
/// the characteristic form at the node, the value f⁰ and the twisted
/// tangential differentials d'f̃^j.
pub struct CmNode {
    pub weight: f64,
    /// A-roof ∧ ν at the node (1 for flat data).
    pub char_form: MultiVector<Complex64>,
    pub f0: Complex64,
    pub twisted_diffs: Vec<MultiVector<Complex64>>,
}

/// A component of the fixed-point set of the composed isometry word.
pub struct CmComponent {
    pub n: usize,
    pub a: usize,
    pub lift_sign: i8,
    pub nodes: Vec<CmNode>,
}

/// Cocycle component value
/// (-i)^{n/2}/(2k)! Σ_a (2π)^{-a/2} ∫ A-roof ∧ ν ∧ f⁰ d'f̃¹ ∧ … ∧ d'f̃^{2k}.
/// An empty component list encodes an empty fixed-point set (value 0,
/// e.g. the top degree when the composed word is not the identity).
pub fn cm_component(components: &[CmComponent], k: usize) -> Result<Complex64> {
    let mut total = Complex64::new(0.0, 0.0);
    let mut fact = 1.0;
    for j in 1..=(2 * k) {
        fact *= j as f64;
    }
    for comp in components {
        let norm = minus_i_pow(comp.n)
            * (2.0 * std::f64::consts::PI).powf(-(comp.a as f64) / 2.0)
            * comp.lift_sign as f64
            / fact;
        for node in &comp.nodes {
            if node.twisted_diffs.len() < 2 * k {
                return Err(EngineError::Invalid(format!(
                    "node carries {} differentials, need {}",
                    node.twisted_diffs.len(),
                    2 * k
                )));
            }
            let mut form = node.char_form.scale(&node.f0);
            for d in node.twisted_diffs.iter().take(2 * k) {
                form = form.wedge(d)?;
            }
            total += norm * node.weight * form.berezin(comp.a);
        }
    }
    Ok(total)
}

/// Extract the coefficient of t^{-s} from a small-time expansion given as
/// (power, coefficient) pairs; 0 when the exponent is absent.
pub fn mellin_residue(expansion: &[(f64, Complex64)], s: f64) -> Complex64 {
    for (p, c) in expansion {
        if (p + s).abs() < 1e-9 {
            return *c;
        }
    }
    Complex64::new(0.0, 0.0)
}

// --- JSON interchange ------------------------------------------------------------

#[derive(Serialize, Deserialize)]
pub struct FixedComponentRepr {
    pub n: usize,
    pub a: usize,
    /// row-major b×b orthogonal matrix of the normal rotation, rational
    /// strings
    pub phi_normal: Vec<Vec<String>>,
    pub rp: Vec<Vec<MultiVector<GaussianRational>>>,
    pub rpp: Vec<Vec<MultiVector<GaussianRational>>>,
    pub weight: f64,
    pub lift_sign: i8,
}

#[derive(Serialize, Deserialize)]
pub struct FixedPointFile {
    pub components: Vec<FixedComponentRepr>,
}

impl FixedComponentRepr {
    pub fn build(&self) -> Result<FixedComponent> {
        if self.a > self.n {
            return Err(EngineError::Invalid("split exceeds dimension".into()));
        }
        let b = self.n - self.a;
        if self.phi_normal.len() != b {
            return Err(EngineError::SizeMismatch { left: self.phi_normal.len(), right: b });
        }
        let mut phi = DMatrix::<f64>::zeros(b, b);
        for (i, row) in self.phi_normal.iter().enumerate() {
            if row.len() != b {
                return Err(EngineError::SizeMismatch { left: row.len(), right: b });
            }
            for (j, s) in row.iter().enumerate() {
                let r = rat_from_str(s)
                    .ok_or_else(|| EngineError::Invalid(format!("bad rational '{s}'")))?;
                phi[(i, j)] = crate::scalar::rat_to_f64(&r);
            }
        }
        let dec = PlanarDecomposition::decompose(&phi)?;
        let rp = rows_to_form_matrix(&self.rp, self.a, self.n, self.a)?;
        let rpp = rows_to_form_matrix(&self.rpp, b, self.n, self.a)?;
        let c = FixedComponent {
            n: self.n,
            a: self.a,
            dec,
            rp,
            rpp,
            weight: self.weight,
            lift_sign: self.lift_sign,
        };
        c.validate()?;
        Ok(c)
    }
}

fn rows_to_form_matrix(
    rows: &[Vec<MultiVector<GaussianRational>>],
    size: usize,
    n: usize,
    a: usize,
) -> Result<FormMatrix<Complex64>> {
    if rows.len() != size {
        return Err(EngineError::SizeMismatch { left: rows.len(), right: size });
    }
    let mut m = FormMatrix::zeros(size, n, a);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != size {
            return Err(EngineError::SizeMismatch { left: row.len(), right: size });
        }
        for (j, mv) in row.iter().enumerate() {
            if mv.dim() != n {
                return Err(EngineError::DimensionMismatch { left: mv.dim(), right: n });
            }
            m.set(i, j, mv.to_c64());
        }
    }
    Ok(m)
}
