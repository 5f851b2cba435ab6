//! Mehler kernels of harmonic oscillators (scalar and form-valued),
//! Gaussian fiber integrals over form-valued quadratic forms, and the
//! normal-fiber integral of the model heat operator, computed two ways.
//!
//! All analytic functions of form-valued matrices route through
//! [`charforms::mat_func`]; even functions of t√B are evaluated as series
//! in t²B so a matrix square root never appears.

use crate::charforms::{det_inv_sqrt, det_scalar, det_sqrt, mat_func, FormMatrix};
use crate::clifford::PlanarDecomposition;
use crate::error::{EngineError, Result};
use crate::exterior::MultiVector;
use crate::scalar::{Coeff, Series};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// A form multiplied by a half-integer power of (4πt):
/// value = (4πt)^{pow_half/2} · form. Keeping the transcendental factor
/// symbolic lets exact and float modes share the same comparisons.
#[derive(Clone, PartialEq, Debug)]
pub struct HeatValue<T: Coeff> {
    /// Power of (4πt) in half units.
    pub pow_half: i32,
    pub form: MultiVector<T>,
}

impl<T: Coeff> HeatValue<T> {
    pub fn new(pow_half: i32, form: MultiVector<T>) -> Self {
        HeatValue { pow_half, form }
    }

    /// Numeric value at a given positive time.
    pub fn eval(&self, t: f64) -> MultiVector<Complex64> {
        let factor = (4.0 * std::f64::consts::PI * t).powf(self.pow_half as f64 / 2.0);
        self.form.to_c64().scale(&Complex64::new(factor, 0.0))
    }
}

fn series_order(n: usize) -> usize {
    2 * crate::charforms::nilpotency_order(n) + 2
}

/// t√B / sinh(t√B) as a series in t²B; B must be nilpotent (zero scalar
/// part) so the series terminates.
fn sinh_factor<T: Coeff>(b: &FormMatrix<T>, t: &T) -> Result<FormMatrix<T>> {
    let (n, _) = b.ambient();
    let t2b = b.scale(&(t.clone() * t.clone()));
    mat_func(&t2b, &Series::x_over_sinh(series_order(n)).even_part_in_square())
}

/// t√B / tanh(t√B) as a series in t²B.
fn tanh_factor<T: Coeff>(b: &FormMatrix<T>, t: &T) -> Result<FormMatrix<T>> {
    let (n, _) = b.ambient();
    let t2b = b.scale(&(t.clone() * t.clone()));
    mat_func(&t2b, &Series::x_over_tanh(series_order(n)).even_part_in_square())
}

/// exp of a form with arbitrary complex scalar part.
fn mv_exp_c64(mv: &MultiVector<Complex64>) -> Result<MultiVector<Complex64>> {
    let s = mv.coeff(0);
    let nil = mv.sub(&MultiVector::scalar(mv.dim(), mv.split(), s));
    Ok(nil.exp_nilpotent()?.scale(&s.exp()))
}

// --- scalar-mode Mehler kernel ---------------------------------------------

/// Mehler kernel of H_B = -Δ + ¼⟨Bx,x⟩ for a numeric symmetric positive
/// semidefinite B:
/// (4πt)^{-n/2} det^{1/2}(t√B/sinh(t√B)) exp(-Θ_B(x,y,t)/4t).
pub fn mehler_kernel_b_scalar(b: &DMatrix<f64>, x: &[f64], y: &[f64], t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Err(EngineError::NonPositiveTime);
    }
    let n = b.nrows();
    let eig = nalgebra::SymmetricEigen::new(b.clone());
    let xe = eig.eigenvectors.transpose() * DMatrix::from_column_slice(n, 1, x);
    let ye = eig.eigenvectors.transpose() * DMatrix::from_column_slice(n, 1, y);
    let mut det_factor = 1.0;
    let mut theta = 0.0;
    for k in 0..n {
        let mu = eig.eigenvalues[k].max(0.0);
        let u = t * mu.sqrt();
        let (s_fac, t_fac) = if u < 1e-12 { (1.0, 1.0) } else { (u / u.sinh(), u / u.tanh()) };
        det_factor *= s_fac;
        theta += t_fac * (xe[(k, 0)] * xe[(k, 0)] + ye[(k, 0)] * ye[(k, 0)])
            - 2.0 * s_fac * xe[(k, 0)] * ye[(k, 0)];
    }
    let norm = (4.0 * std::f64::consts::PI * t).powf(-(n as f64) / 2.0);
    Ok(norm * det_factor.sqrt() * (-theta / (4.0 * t)).exp())
}

// --- form-mode Mehler kernels ----------------------------------------------

/// Mehler kernel of H_B with a form-valued B (nilpotent even-degree
/// entries, e.g. B = (R/2)²), evaluated at numeric points and time.
pub fn mehler_kernel_b_form(
    b: &FormMatrix<Complex64>,
    x: &[f64],
    y: &[f64],
    t: f64,
) -> Result<MultiVector<Complex64>> {
    if t <= 0.0 {
        return Err(EngineError::NonPositiveTime);
    }
    let tc = Complex64::new(t, 0.0);
    let s_fac = sinh_factor(b, &tc)?;
    let t_fac = tanh_factor(b, &tc)?;
    let det = det_sqrt(&s_fac, &Complex64::new(1.0, 0.0))?;
    let theta = quad_form(&t_fac, x, x)?
        .add(&quad_form(&t_fac, y, y)?)
        .add(&quad_form(&s_fac, x, y)?.scale(&Complex64::new(-2.0, 0.0)));
    let expo = mv_exp_c64(&theta.scale(&Complex64::new(-1.0 / (4.0 * t), 0.0)))?;
    let norm = (4.0 * std::f64::consts::PI * t).powf(-(b.size() as f64) / 2.0);
    Ok(det.wedge(&expo)?.scale(&Complex64::new(norm, 0.0)))
}

/// ⟨Mx, y⟩ for a form-valued matrix and numeric vectors.
fn quad_form(m: &FormMatrix<Complex64>, x: &[f64], y: &[f64]) -> Result<MultiVector<Complex64>> {
    let (n, a) = m.ambient();
    let mut out = MultiVector::zero(n, a);
    for i in 0..m.size() {
        for j in 0..m.size() {
            let c = Complex64::new(x[j] * y[i], 0.0);
            if c.norm() > 0.0 {
                out = out.add(&m.get(i, j).scale(&c));
            }
        }
    }
    Ok(out)
}

/// Mehler kernel of the model operator H_R = -Σ(∂_i - ¼R_ij x^j)² with an
/// antisymmetric 2-form-valued R, via the substitution √B = R/2:
/// (4πt)^{-n/2} det^{1/2}((tR/2)/sinh(tR/2)) exp(-Θ_R(x,y,t)/4t), with the
/// rotated cross term ⟨(tR/2)/sinh(tR/2) e^{-tR/2} x, y⟩; the rotation
/// direction is pinned by time evolution of the operator itself.
pub fn mehler_kernel_r(
    r: &FormMatrix<Complex64>,
    x: &[f64],
    y: &[f64],
    t: f64,
) -> Result<MultiVector<Complex64>> {
    if t <= 0.0 {
        return Err(EngineError::NonPositiveTime);
    }
    let tc = Complex64::new(t, 0.0);
    let half = r.scale(&Complex64::new(0.5, 0.0));
    let bsq = half.mul(&half)?;
    let s_fac = sinh_factor(&bsq, &tc)?;
    let t_fac = tanh_factor(&bsq, &tc)?;
    let rot = mat_func(&half.scale(&tc).neg(), &Series::exp(series_order(r.ambient().0)))?;
    let cross = s_fac.mul(&rot)?;
    let det = det_sqrt(&s_fac, &Complex64::new(1.0, 0.0))?;
    let theta = quad_form(&t_fac, x, x)?
        .add(&quad_form(&t_fac, y, y)?)
        .add(&quad_form(&cross, x, y)?.scale(&Complex64::new(-2.0, 0.0)));
    let expo = mv_exp_c64(&theta.scale(&Complex64::new(-1.0 / (4.0 * t), 0.0)))?;
    let norm = (4.0 * std::f64::consts::PI * t).powf(-(r.size() as f64) / 2.0);
    Ok(det.wedge(&expo)?.scale(&Complex64::new(norm, 0.0)))
}

/// Numeric-mode kernel of H_R for a real antisymmetric R. Here
/// (√B)² = (R/2)² has non-positive eigenvalues, so the even functions of
/// t√B continue to the trigonometric branch u/sin(u), u/tan(u) with
/// u = t·ν/2 for singular values ν of R. Valid for u < π.
pub fn mehler_kernel_r_numeric(r: &DMatrix<f64>, x: &[f64], y: &[f64], t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Err(EngineError::NonPositiveTime);
    }
    let n = r.nrows();
    let sym = (r.transpose() * r) * 0.25; // -(R/2)², PSD
    let eig = nalgebra::SymmetricEigen::new(sym);
    let rot = mat_exp_numeric(&(r * (-t / 2.0)));
    let xr = &rot * DMatrix::from_column_slice(n, 1, x);
    let xre = eig.eigenvectors.transpose() * &xr;
    let x0 = eig.eigenvectors.transpose() * DMatrix::from_column_slice(n, 1, x);
    let ye = eig.eigenvectors.transpose() * DMatrix::from_column_slice(n, 1, y);
    let mut det_factor = 1.0;
    let mut theta = 0.0;
    for k in 0..n {
        let mu = eig.eigenvalues[k].max(0.0);
        let u = t * mu.sqrt();
        if u >= std::f64::consts::PI {
            return Err(EngineError::Invalid(format!(
                "trigonometric branch breaks down at u = {u:.3} >= pi"
            )));
        }
        let (s_fac, t_fac) = if u < 1e-12 { (1.0, 1.0) } else { (u / u.sin(), u / u.tan()) };
        det_factor *= s_fac;
        theta += t_fac * (x0[(k, 0)] * x0[(k, 0)] + ye[(k, 0)] * ye[(k, 0)])
            - 2.0 * s_fac * xre[(k, 0)] * ye[(k, 0)];
    }
    let norm = (4.0 * std::f64::consts::PI * t).powf(-(n as f64) / 2.0);
    Ok(norm * det_factor.sqrt() * (-theta / (4.0 * t)).exp())
}

/// Series matrix exponential with scaling and squaring.
pub fn mat_exp_numeric(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = m.norm();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = m / 2f64.powi(squarings);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = DMatrix::<f64>::identity(n, n);
    for k in 1..24 {
        term = (&term * &scaled) / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

// --- Gaussian integrals of form-valued quadratic forms -----------------------

/// Sylvester positivity of the symmetric scalar part: leading principal
/// minors must have positive real part.
fn check_positive<T: Coeff>(scalar_sym: &[Vec<T>]) -> Result<()> {
    let b = scalar_sym.len();
    for k in 1..=b {
        let minor: Vec<Vec<T>> =
            (0..k).map(|i| (0..k).map(|j| scalar_sym[i][j].clone()).collect()).collect();
        if det_scalar(&minor).real_sign() <= 0 {
            return Err(EngineError::SingularScalarPart);
        }
    }
    Ok(())
}

/// ∫_{R^b} exp(-⟨Sv,v⟩/4t) dv = (4πt)^{b/2} det^{-1/2}(S_sym); only the
/// symmetric part of S contributes. `branch` must be the positive square
/// root of det of the scalar part of S_sym.
pub fn gaussian_form_integral<T: Coeff>(
    s: &FormMatrix<T>,
    _t: &T,
    branch: &T,
) -> Result<HeatValue<T>> {
    let sym = s.add(&s.transpose())?.scale(&T::from_ratio(1, 2));
    check_positive(&sym.scalar_part())?;
    let form = det_inv_sqrt(&sym, branch)?;
    Ok(HeatValue::new(s.size() as i32, form))
}

// --- the normal-fiber integral of the model heat kernel ----------------------

/// Closed form of the fiber integral of the model heat kernel at the
/// origin, for tangential curvature R' (a×a), normal curvature R'' (b×b)
/// and normal rotation Φ:
/// (4πt)^{-a/2} det^{1/2}((tR'/2)/sinh(tR'/2))
///            · det^{-1/2}[(1-Φ)(1-Φ e^{tR''})],
/// where the combined determinant uses the rational branch det(1-Φ) > 0
/// (equal to the product of the two separate square roots), and the sign
/// of the exponent follows the kernel's cross rotation e^{-tR/2} verified
/// against direct operator evolution.
pub fn i_hr_closed<T: Coeff>(
    rp: &FormMatrix<T>,
    rpp: &FormMatrix<T>,
    phi: &[Vec<T>],
    t: &T,
) -> Result<HeatValue<T>> {
    let (n, asplit) = rp.ambient();
    let a = rp.size();
    let b = rpp.size();
    if phi.len() != b {
        return Err(EngineError::SizeMismatch { left: phi.len(), right: b });
    }
    let half = rp.scale(&(t.clone() * T::from_ratio(1, 2)));
    let sq = half.mul(&half)?;
    let sfac = mat_func(&sq, &Series::x_over_sinh(series_order(n)).even_part_in_square())?;
    let tangential = det_sqrt(&sfac, &T::one())?;

    let phi_m = FormMatrix::from_scalars(n, asplit, phi);
    let id_b = FormMatrix::identity(b, n, asplit);
    let one_minus_phi = id_b.sub(&phi_m)?;
    let branch = det_scalar(&one_minus_phi.scalar_part());
    if branch.real_sign() <= 0 {
        return Err(EngineError::UnitNormalEigenvalue);
    }
    let etr = mat_func(&rpp.scale(&t.clone()), &Series::exp(series_order(n)))?;
    let m2 = id_b.sub(&phi_m.mul(&etr)?)?;
    let normal = det_inv_sqrt(&one_minus_phi.mul(&m2)?, &branch)?;

    Ok(HeatValue::new(-(a as i32), tangential.wedge(&normal)?))
}

/// The same value assembled by integrating the Mehler kernel of the full
/// model operator over the normal fiber, ∫ K((0,v), (0,Φv), t) dv: the Θ
/// quadratic form is built symbolically and fed to the Gaussian integral.
/// Shares no reduction with [`i_hr_closed`]; exact agreement of the two
/// routes is the cross-check.
pub fn i_hr_by_integration<T: Coeff>(
    rp: &FormMatrix<T>,
    rpp: &FormMatrix<T>,
    phi: &[Vec<T>],
    t: &T,
) -> Result<HeatValue<T>> {
    let (n_amb, asplit) = rp.ambient();
    let a = rp.size();
    let b = rpp.size();
    let n = a + b;
    if phi.len() != b {
        return Err(EngineError::SizeMismatch { left: phi.len(), right: b });
    }

    // blockwise curvature R = diag(R', R'')
    let mut r = FormMatrix::zeros(n, n_amb, asplit);
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

    let half = r.scale(&(t.clone() * T::from_ratio(1, 2)));
    let bsq = half.mul(&half)?;
    let s_fac = mat_func(&bsq, &Series::x_over_sinh(series_order(n_amb)).even_part_in_square())?;
    let t_fac = mat_func(&bsq, &Series::x_over_tanh(series_order(n_amb)).even_part_in_square())?;
    let rot = mat_func(&half.neg(), &Series::exp(series_order(n_amb)))?;
    let cross = s_fac.mul(&rot)?;
    let det = det_sqrt(&s_fac, &T::one())?;

    // Θ(v) = ⟨Cx,x⟩ + ⟨Cy,y⟩ - 2⟨S e^{tR/2} x, y⟩ at x=(0,v), y=(0,Φv)
    let phi_m = FormMatrix::from_scalars(n_amb, asplit, phi);
    let mut c_nn = FormMatrix::zeros(b, n_amb, asplit);
    let mut m_nn = FormMatrix::zeros(b, n_amb, asplit);
    for i in 0..b {
        for j in 0..b {
            c_nn.set(i, j, t_fac.get(a + i, a + j).clone());
            m_nn.set(i, j, cross.get(a + i, a + j).clone());
        }
    }
    let phi_t = phi_m.transpose();
    let q = c_nn
        .add(&phi_t.mul(&c_nn)?.mul(&phi_m)?)?
        .sub(&phi_t.mul(&m_nn)?.scale(&T::from_int(2)))?;

    // scalar part of Q_sym is 2 - Φ - Φᵀ with det = det(1-Φ)² > 0
    let id_b = FormMatrix::identity(b, n_amb, asplit);
    let branch = det_scalar(&id_b.sub(&phi_m)?.scalar_part());
    if branch.real_sign() <= 0 {
        return Err(EngineError::UnitNormalEigenvalue);
    }
    let integral = gaussian_form_integral(&q, t, &branch)?;

    let form = det.wedge(&integral.form)?;
    Ok(HeatValue::new(-(n as i32) + integral.pow_half, form))
}

/// Both fiber-integral routes from a planar decomposition (float mode).
pub fn i_hr_closed_f64(
    rp: &FormMatrix<Complex64>,
    rpp: &FormMatrix<Complex64>,
    dec: &PlanarDecomposition,
    t: f64,
) -> Result<HeatValue<Complex64>> {
    let rows = dec_rows(dec, rpp.size())?;
    i_hr_closed(rp, rpp, &rows, &Complex64::new(t, 0.0))
}

pub fn i_hr_by_integration_f64(
    rp: &FormMatrix<Complex64>,
    rpp: &FormMatrix<Complex64>,
    dec: &PlanarDecomposition,
    t: f64,
) -> Result<HeatValue<Complex64>> {
    let rows = dec_rows(dec, rpp.size())?;
    i_hr_by_integration(rp, rpp, &rows, &Complex64::new(t, 0.0))
}

fn dec_rows(dec: &PlanarDecomposition, b: usize) -> Result<Vec<Vec<Complex64>>> {
    if dec.has_fixed_directions() {
        return Err(EngineError::UnitNormalEigenvalue);
    }
    if dec.b != b {
        return Err(EngineError::SizeMismatch { left: dec.b, right: b });
    }
    let m = dec.original_matrix();
    Ok((0..b).map(|i| (0..b).map(|j| Complex64::new(m[(i, j)], 0.0)).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, GaussianRational};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type G = GaussianRational;

    #[test]
    fn free_kernel_when_b_vanishes() {
        let b = DMatrix::<f64>::zeros(2, 2);
        let x = [0.3, -0.4];
        let y = [0.1, 0.8];
        let t = 0.37;
        let k = mehler_kernel_b_scalar(&b, &x, &y, t).unwrap();
        let d2: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        let free = (4.0 * std::f64::consts::PI * t).powi(-1) * (-d2 / (4.0 * t)).exp();
        assert!((k - free).abs() < 1e-15);
        assert!(mehler_kernel_b_scalar(&b, &x, &y, 0.0).is_err());
    }

    #[test]
    fn scalar_oscillator_at_origin() {
        // n=1, B=1, x=y=0, t=1: (4π)^{-1/2}(sinh 1)^{-1/2}
        let b = DMatrix::<f64>::from_element(1, 1, 1.0);
        let k = mehler_kernel_b_scalar(&b, &[0.0], &[0.0], 1.0).unwrap();
        let expect = (4.0 * std::f64::consts::PI).powf(-0.5) * 1f64.sinh().powf(-0.5);
        assert!((k - expect).abs() < 1e-15);
    }

    #[test]
    fn semigroup_property_by_quadrature() {
        // ∫K(x,z,s)K(z,y,t)dz = K(x,y,s+t), n=1, B=1; grid pinned by the
        // test config: step 0.02 on [-12, 12], tolerance 1e-6
        let b = DMatrix::<f64>::from_element(1, 1, 1.0);
        let (s, t) = (0.3, 0.5);
        let (x, y) = (0.4, -0.2);
        let h = 0.02;
        let mut acc = 0.0;
        let mut z = -12.0;
        while z <= 12.0 {
            acc += h
                * mehler_kernel_b_scalar(&b, &[x], &[z], s).unwrap()
                * mehler_kernel_b_scalar(&b, &[z], &[y], t).unwrap();
            z += h;
        }
        let direct = mehler_kernel_b_scalar(&b, &[x], &[y], s + t).unwrap();
        assert!((acc - direct).abs() < 1e-6, "semigroup residual {}", (acc - direct).abs());
    }

    #[test]
    fn form_kernel_reduces_to_free_at_degree_zero() {
        let n = 4;
        let mut r = FormMatrix::<Complex64>::zeros(2, n, 0);
        let f = MultiVector::monomial(n, 0, &[1, 2], Complex64::new(0.7, 0.0));
        r.set(0, 1, f.clone());
        r.set(1, 0, f.neg());
        let x = [0.2, -0.1];
        let y = [0.5, 0.3];
        let t = 0.4;
        let k = mehler_kernel_r(&r, &x, &y, t).unwrap();
        let d2: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        let free = (4.0 * std::f64::consts::PI * t).powi(-1) * (-d2 / (4.0 * t)).exp();
        assert!((k.coeff(0).re - free).abs() < 1e-14);
        let k0 = mehler_kernel_r(&FormMatrix::zeros(2, n, 0), &x, &y, t).unwrap();
        assert_eq!(k0.num_terms(), 1);
        assert!((k0.coeff(0).re - free).abs() < 1e-14);
    }

    #[test]
    fn gaussian_integral_scalar_cases() {
        let one = FormMatrix::from_scalars(2, 0, &[vec![G::one()]]);
        let v = gaussian_form_integral(&one, &G::one(), &G::one()).unwrap();
        assert_eq!(v.pow_half, 1);
        assert_eq!(v.form, MultiVector::one(2, 0));

        let two = FormMatrix::from_scalars(
            2,
            0,
            &[vec![G::from_ints(2, 0), G::from_ints(0, 0)], vec![
                G::from_ints(0, 0),
                G::from_ints(2, 0),
            ]],
        );
        let v = gaussian_form_integral(&two, &G::one(), &G::from_ints(2, 0)).unwrap();
        assert_eq!(v.pow_half, 2);
        assert_eq!(v.form, MultiVector::scalar(2, 0, G::from_rat(&rat(1, 2))));

        let neg = FormMatrix::from_scalars(2, 0, &[vec![G::from_ints(-1, 0)]]);
        assert!(gaussian_form_integral(&neg, &G::one(), &G::one()).is_err());
    }

    /// Isserlis/Wick moment of a centered Gaussian with covariance `cov`
    /// over the index tuple.
    fn wick_moment(cov: &[Vec<G>], idx: &[usize]) -> G {
        if idx.len() % 2 == 1 {
            return G::zero();
        }
        if idx.is_empty() {
            return G::one();
        }
        let mut total = G::zero();
        for k in 1..idx.len() {
            let pair = cov[idx[0]][idx[k]].clone();
            let rest: Vec<usize> = idx
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != 0 && *j != k)
                .map(|(_, &v)| v)
                .collect();
            total = total + pair * wick_moment(cov, &rest);
        }
        total
    }

    #[test]
    fn gaussian_integral_matches_wick_expansion_exactly() {
        // S = Id + N with nilpotent 2-form N: expand exp(-⟨Nv,v⟩/4t) and
        // integrate against Gaussian moments; exact equality term by term
        let n = 4;
        let b = 2usize;
        let t = rat(2, 3);
        let tg = G::from_rat(&t);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..4 {
            let mut s = FormMatrix::identity(b, n, 0);
            let mut nmat: Vec<Vec<MultiVector<G>>> = vec![vec![MultiVector::zero(n, 0); b]; b];
            for i in 0..b {
                for j in 0..b {
                    let mut e = MultiVector::zero(n, 0);
                    for p in 1..=n {
                        for q in (p + 1)..=n {
                            let c = rng.gen_range(-1i64..=1);
                            if c != 0 {
                                e = e.add(&MultiVector::monomial(n, 0, &[p, q], G::from_ints(c, 0)));
                            }
                        }
                    }
                    nmat[i][j] = e.clone();
                    let sum = s.get(i, j).add(&e);
                    s.set(i, j, sum);
                }
            }
            let lhs = gaussian_form_integral(&s, &tg, &G::one()).unwrap();

            // covariance of exp(-|v|²/4t) is 2t·Id
            let cov: Vec<Vec<G>> = (0..b)
                .map(|i| {
                    (0..b)
                        .map(|j| if i == j { G::from_rat(&(rat(2, 1) * t.clone())) } else { G::zero() })
                        .collect()
                })
                .collect();
            let inv4t = (G::from_int(4) * tg.clone()).inv().unwrap();
            let mut rhs = MultiVector::zero(n, 0);
            for k in 0..=2usize {
                let pairs: Vec<(usize, usize)> =
                    (0..b).flat_map(|i| (0..b).map(move |j| (i, j))).collect();
                let mut tuples: Vec<Vec<(usize, usize)>> = vec![vec![]];
                for _ in 0..k {
                    let mut next = Vec::new();
                    for t0 in &tuples {
                        for &p in &pairs {
                            let mut t1 = t0.clone();
                            t1.push(p);
                            next.push(t1);
                        }
                    }
                    tuples = next;
                }
                let mut kfact = G::one();
                for j in 1..=k {
                    kfact = kfact * G::from_int(j as i64);
                }
                let mut pref = kfact.inv().unwrap();
                for _ in 0..k {
                    pref = pref * (-inv4t.clone());
                }
                for tuple in tuples {
                    let mut formprod = MultiVector::one(n, 0);
                    let mut idx = Vec::new();
                    for &(i, j) in &tuple {
                        formprod = formprod.wedge(&nmat[i][j]).unwrap();
                        idx.push(i);
                        idx.push(j);
                    }
                    if formprod.is_zero() {
                        continue;
                    }
                    let moment = wick_moment(&cov, &idx);
                    if moment.is_zero() {
                        continue;
                    }
                    rhs = rhs.add(&formprod.scale(&(pref.clone() * moment)));
                }
            }
            assert_eq!(lhs.pow_half, b as i32);
            assert_eq!(lhs.form, rhs, "Wick expansion disagrees");
        }
    }

    fn random_curvature_g(size: usize, n: usize, a: usize, rng: &mut ChaCha8Rng) -> FormMatrix<G> {
        let mut m = FormMatrix::zeros(size, n, a);
        for i in 0..size {
            for j in (i + 1)..size {
                let mut entry = MultiVector::zero(n, a);
                for p in 1..=n {
                    for q in (p + 1)..=n {
                        let c = rng.gen_range(-1i64..=1);
                        if c != 0 {
                            entry =
                                entry.add(&MultiVector::monomial(n, a, &[p, q], G::from_ints(c, 0)));
                        }
                    }
                }
                m.set(i, j, entry.clone());
                m.set(j, i, entry.neg());
            }
        }
        m
    }

    #[test]
    fn i_hr_scalar_reduction() {
        // a=0, b=2, φ=-Id, R=0: I = det^{-1}(1-φ) = 1/4 for any t
        let rp = FormMatrix::<G>::zeros(0, 2, 0);
        let rpp = FormMatrix::<G>::zeros(2, 2, 0);
        let phi: Vec<Vec<G>> =
            vec![vec![G::from_ints(-1, 0), G::zero()], vec![G::zero(), G::from_ints(-1, 0)]];
        for t in [rat(1, 2), rat(1, 1), rat(7, 3)] {
            let v = i_hr_closed(&rp, &rpp, &phi, &G::from_rat(&t)).unwrap();
            assert_eq!(v.pow_half, 0);
            assert_eq!(v.form, MultiVector::scalar(2, 0, G::from_rat(&rat(1, 4))));
        }
    }

    #[test]
    fn i_hr_two_routes_agree_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for (a, b) in [(0usize, 2usize), (2, 2), (0, 4), (2, 4), (4, 2)] {
            let n = a + b;
            for _ in 0..3 {
                let rp = random_curvature_g(a, n, a, &mut rng);
                let (phi, rpp, _) = crate::fixtures::random_normal_data(b, n, a, &mut rng);
                let t = G::from_rat(&rat(rng.gen_range(1..4), rng.gen_range(1..3)));
                let closed = i_hr_closed(&rp, &rpp, &phi, &t).unwrap();
                let integd = i_hr_by_integration(&rp, &rpp, &phi, &t).unwrap();
                assert_eq!(closed.pow_half, integd.pow_half, "(a,b)=({},{})", a, b);
                assert_eq!(closed.form, integd.form, "(a,b)=({},{})", a, b);
            }
        }
    }

    #[test]
    fn i_hr_float_wrapper_matches_exact_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (a, b) = (2usize, 2usize);
        let n = a + b;
        let rp = random_curvature_g(a, n, a, &mut rng);
        let rpp = random_curvature_g(b, n, a, &mut rng);
        let theta = 1.1_f64;
        let rot =
            DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        let dec = PlanarDecomposition::decompose(&rot).unwrap();
        let t = 0.8;
        let closed = i_hr_closed_f64(&rp.to_c64(), &rpp.to_c64(), &dec, t).unwrap();
        let integd = i_hr_by_integration_f64(&rp.to_c64(), &rpp.to_c64(), &dec, t).unwrap();
        let diff = closed.form.sub(&integd.form).max_abs();
        assert!(diff < 1e-12, "float routes differ by {}", diff);
        assert_eq!(closed.pow_half, -2);
        let _ = b;
    }
}
