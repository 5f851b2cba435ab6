//! Form-valued matrix functions: analytic series, square-rooted
//! determinants, the A-roof form and the equivariant normal form ν_φ.
//!
//! Entries are restricted to even exterior degree, so they commute and the
//! usual determinant manipulations go through. Every analytic function is
//! evaluated through a single truncated-series path: positive-degree parts
//! are nilpotent, so series terminate exactly and the scalar branch is the
//! only analytic input.

use crate::clifford::PlanarDecomposition;
use crate::error::{EngineError, Result};
use crate::exterior::MultiVector;
use crate::scalar::{Coeff, Series};
use num_traits::Zero as _;
use num_complex::Complex64;

/// Square matrix with entries in the even part of Λ(n).
#[derive(Clone, PartialEq, Debug)]
pub struct FormMatrix<T: Coeff> {
    size: usize,
    n: usize,
    a: usize,
    entries: Vec<MultiVector<T>>,
}

impl<T: Coeff> FormMatrix<T> {
    pub fn zeros(size: usize, n: usize, a: usize) -> Self {
        FormMatrix { size, n, a, entries: vec![MultiVector::zero(n, a); size * size] }
    }

    pub fn identity(size: usize, n: usize, a: usize) -> Self {
        let mut m = Self::zeros(size, n, a);
        for i in 0..size {
            m.set(i, i, MultiVector::one(n, a));
        }
        m
    }

    /// Matrix with scalar (degree-0) entries.
    pub fn from_scalars(n: usize, a: usize, rows: &[Vec<T>]) -> Self {
        let size = rows.len();
        let mut m = Self::zeros(size, n, a);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), size, "rows must be square");
            for (j, c) in row.iter().enumerate() {
                m.set(i, j, MultiVector::scalar(n, a, c.clone()));
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn ambient(&self) -> (usize, usize) {
        (self.n, self.a)
    }

    pub fn get(&self, i: usize, j: usize) -> &MultiVector<T> {
        &self.entries[i * self.size + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: MultiVector<T>) {
        assert_eq!(v.dim(), self.n, "entry lives in the wrong ambient algebra");
        self.entries[i * self.size + j] = v;
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let mut out = self.clone();
        for (x, y) in out.entries.iter_mut().zip(other.entries.iter()) {
            *x = x.add(y);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let mut out = self.clone();
        for (x, y) in out.entries.iter_mut().zip(other.entries.iter()) {
            *x = x.sub(y);
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for x in out.entries.iter_mut() {
            *x = x.neg();
        }
        out
    }

    pub fn scale(&self, c: &T) -> Self {
        let mut out = self.clone();
        for x in out.entries.iter_mut() {
            *x = x.scale(c);
        }
        out
    }

    pub fn scale_form(&self, f: &MultiVector<T>) -> Result<Self> {
        let mut out = self.clone();
        for x in out.entries.iter_mut() {
            *x = x.wedge(f)?;
        }
        Ok(out)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let mut out = Self::zeros(self.size, self.n, self.a);
        for i in 0..self.size {
            for k in 0..self.size {
                let aik = self.get(i, k);
                if aik.is_zero() {
                    continue;
                }
                for j in 0..self.size {
                    let bkj = other.get(k, j);
                    if bkj.is_zero() {
                        continue;
                    }
                    let prod = aik.wedge(bkj)?;
                    let sum = out.get(i, j).add(&prod);
                    out.set(i, j, sum);
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.size, self.n, self.a);
        for i in 0..self.size {
            for j in 0..self.size {
                out.set(i, j, self.get(j, i).clone());
            }
        }
        out
    }

    pub fn trace(&self) -> MultiVector<T> {
        let mut t = MultiVector::zero(self.n, self.a);
        for i in 0..self.size {
            t = t.add(self.get(i, i));
        }
        t
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero())
    }

    /// The matrix of degree-0 parts.
    pub fn scalar_part(&self) -> Vec<Vec<T>> {
        (0..self.size)
            .map(|i| (0..self.size).map(|j| self.get(i, j).coeff(0)).collect())
            .collect()
    }

    /// Positive-degree part (the nilpotent remainder after removing the
    /// scalar part).
    pub fn positive_part(&self) -> Self {
        let mut out = self.clone();
        let (n, a) = (self.n, self.a);
        for x in out.entries.iter_mut() {
            let s = MultiVector::scalar(n, a, x.coeff(0));
            *x = x.sub(&s);
        }
        out
    }

    /// True when every entry is antisymmetric (F_ij = -F_ji) with zero
    /// scalar part, the shape of a curvature matrix.
    pub fn is_curvature_shaped(&self) -> bool {
        for i in 0..self.size {
            for j in 0..self.size {
                if !self.get(i, j).coeff(0).is_zero() {
                    return false;
                }
                if !self.get(i, j).add(self.get(j, i)).is_zero() {
                    return false;
                }
            }
        }
        true
    }

    pub fn map<U: Coeff>(&self, f: impl Fn(&MultiVector<T>) -> MultiVector<U>) -> FormMatrix<U> {
        FormMatrix {
            size: self.size,
            n: self.n,
            a: self.a,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn to_c64(&self) -> FormMatrix<Complex64> {
        self.map(|e| e.to_c64())
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.size != other.size {
            return Err(EngineError::SizeMismatch { left: self.size, right: other.size });
        }
        if self.n != other.n {
            return Err(EngineError::DimensionMismatch { left: self.n, right: other.n });
        }
        Ok(())
    }
}

/// Evaluate a power series on a form-valued matrix. Powers of a nilpotent
/// matrix terminate on their own; for mixed matrices the series length is
/// the truncation and the caller must supply enough coefficients.
pub fn mat_func<T: Coeff>(f: &FormMatrix<T>, series: &Series) -> Result<FormMatrix<T>> {
    let (n, a) = f.ambient();
    let mut out = FormMatrix::zeros(f.size(), n, a);
    let mut pow = FormMatrix::identity(f.size(), n, a);
    for (k, c) in series.coeffs.iter().enumerate() {
        if k > 0 {
            pow = pow.mul(f)?;
            if pow.is_zero() {
                break;
            }
        }
        if !c.is_zero() {
            out = out.add(&pow.scale(&T::from_rat(c)))?;
        }
    }
    Ok(out)
}

/// Matrix-power truncation order for Λ(n) when entries have degree ≥ 2:
/// ⌈n/2⌉ powers suffice.
pub fn nilpotency_order(n: usize) -> usize {
    n / 2 + 1
}

/// exp of a matrix whose entries have positive degree (nilpotent); exact.
pub fn mat_exp_nilpotent<T: Coeff>(f: &FormMatrix<T>) -> Result<FormMatrix<T>> {
    let (n, _) = f.ambient();
    mat_func(f, &Series::exp(2 * nilpotency_order(n)))
}

/// Commutative determinant by Leibniz expansion; exact. This is the
/// independent route used to validate `det_sqrt` (its square must equal
/// it), so it deliberately shares no code with the exp-trace-log path.
pub fn det_leibniz<T: Coeff>(m: &FormMatrix<T>) -> Result<MultiVector<T>> {
    fn go<T: Coeff>(
        row: usize,
        used: &mut Vec<bool>,
        perm: &mut Vec<usize>,
        m: &FormMatrix<T>,
        total: &mut MultiVector<T>,
    ) -> Result<()> {
        let sz = m.size();
        if row == sz {
            let mut inversions = 0usize;
            for i in 0..sz {
                for j in (i + 1)..sz {
                    if perm[i] > perm[j] {
                        inversions += 1;
                    }
                }
            }
            let (nn, aa) = m.ambient();
            let mut prod = MultiVector::one(nn, aa);
            for (i, &j) in perm.iter().enumerate() {
                prod = prod.wedge(m.get(i, j))?;
                if prod.is_zero() {
                    break;
                }
            }
            if inversions % 2 == 1 {
                prod = prod.neg();
            }
            *total = total.add(&prod);
            return Ok(());
        }
        for col in 0..sz {
            if used[col] || m.get(row, col).is_zero() {
                continue;
            }
            used[col] = true;
            perm.push(col);
            go(row + 1, used, perm, m, total)?;
            perm.pop();
            used[col] = false;
        }
        Ok(())
    }
    let sz = m.size();
    let (n, a) = m.ambient();
    let mut total = MultiVector::zero(n, a);
    if sz == 0 {
        return Ok(MultiVector::one(n, a));
    }
    let mut used = vec![false; sz];
    let mut perm = Vec::with_capacity(sz);
    go(0, &mut used, &mut perm, m, &mut total)?;
    Ok(total)
}

/// Invert a scalar matrix over the coefficient ring by Gauss-Jordan
/// elimination with magnitude pivoting.
pub fn invert_scalar<T: Coeff>(m: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    let sz = m.len();
    let mut aug: Vec<Vec<T>> = m.to_vec();
    let mut inv: Vec<Vec<T>> = (0..sz)
        .map(|i| (0..sz).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    for col in 0..sz {
        let mut piv = None;
        let mut best = -1.0_f64;
        for row in col..sz {
            let mag = aug[row][col].to_c64().norm();
            if !aug[row][col].is_zero() && mag > best {
                best = mag;
                piv = Some(row);
            }
        }
        let piv = piv.ok_or(EngineError::SingularScalarPart)?;
        aug.swap(col, piv);
        inv.swap(col, piv);
        let d = aug[col][col].clone().inv().ok_or(EngineError::SingularScalarPart)?;
        for j in 0..sz {
            aug[col][j] = aug[col][j].clone() * d.clone();
            inv[col][j] = inv[col][j].clone() * d.clone();
        }
        for row in 0..sz {
            if row == col || aug[row][col].is_zero() {
                continue;
            }
            let factor = aug[row][col].clone();
            for j in 0..sz {
                aug[row][j] = aug[row][j].clone() - factor.clone() * aug[col][j].clone();
                inv[row][j] = inv[row][j].clone() - factor.clone() * inv[col][j].clone();
            }
        }
    }
    Ok(inv)
}

/// Determinant of a scalar matrix via elimination on a copy.
pub fn det_scalar<T: Coeff>(m: &[Vec<T>]) -> T {
    let sz = m.len();
    let mut a: Vec<Vec<T>> = m.to_vec();
    let mut det = T::one();
    for col in 0..sz {
        let mut piv = None;
        let mut best = -1.0_f64;
        for row in col..sz {
            let mag = a[row][col].to_c64().norm();
            if !a[row][col].is_zero() && mag > best {
                best = mag;
                piv = Some(row);
            }
        }
        let piv = match piv {
            Some(p) => p,
            None => return T::zero(),
        };
        if piv != col {
            a.swap(col, piv);
            det = -det;
        }
        let d = a[col][col].clone();
        det = det * d.clone();
        let dinv = d.inv().expect("nonzero pivot");
        for row in (col + 1)..sz {
            if a[row][col].is_zero() {
                continue;
            }
            let factor = a[row][col].clone() * dinv.clone();
            for j in col..sz {
                a[row][j] = a[row][j].clone() - factor.clone() * a[col][j].clone();
            }
        }
    }
    det
}

/// det^{1/2}(M) through exp-trace-log with a pinned scalar branch:
/// det^{1/2}(M) = branch · exp(½ tr log(1 + M0^{-1} N)) where M = M0 + N,
/// M0 the scalar part, N the positive-degree part, and branch² = det(M0).
pub fn det_sqrt<T: Coeff>(m: &FormMatrix<T>, branch: &T) -> Result<MultiVector<T>> {
    det_sqrt_signed(m, branch, 1)
}

/// det^{-1/2}(M) with the reciprocal of the same pinned branch.
pub fn det_inv_sqrt<T: Coeff>(m: &FormMatrix<T>, branch: &T) -> Result<MultiVector<T>> {
    det_sqrt_signed(m, branch, -1)
}

fn det_sqrt_signed<T: Coeff>(m: &FormMatrix<T>, branch: &T, sign: i64) -> Result<MultiVector<T>> {
    let (n, _) = m.ambient();
    let scalar = m.scalar_part();
    let d0 = det_scalar(&scalar);
    if d0.is_zero() {
        return Err(EngineError::SingularScalarPart);
    }
    let sq = branch.clone() * branch.clone();
    let diff = (sq - d0.clone()).to_c64().norm();
    if diff > 1e-9 * (1.0 + d0.to_c64().norm()) {
        return Err(EngineError::BadBranch);
    }
    let inv0 = invert_scalar(&scalar)?;
    let inv0 = FormMatrix::from_scalars(n, m.a, &inv0);
    let rel = inv0.mul(&m.positive_part())?;
    let logpart = mat_func(&rel, &Series::log1p(2 * nilpotency_order(n)))?;
    let half_tr = logpart.trace().scale(&T::from_ratio(sign, 2));
    let expo = half_tr.exp_nilpotent()?;
    let scalar_branch = if sign > 0 {
        branch.clone()
    } else {
        branch.clone().inv().ok_or(EngineError::SingularScalarPart)?
    };
    Ok(expo.scale(&scalar_branch))
}

/// The A-roof form det^{1/2}((R/2)/sinh(R/2)) of an antisymmetric
/// 2-form-valued curvature matrix; exact, constant term 1.
pub fn a_hat<T: Coeff>(r: &FormMatrix<T>) -> Result<MultiVector<T>> {
    let (n, _) = r.ambient();
    // (R/2)/sinh(R/2) is an even series in R/2, evaluated as a series in
    // (R/2)² so no square root of a matrix ever appears
    let half = r.scale(&T::from_ratio(1, 2));
    let sq = half.mul(&half)?;
    let series_in_sq = Series::x_over_sinh(2 * nilpotency_order(n) + 2).even_part_in_square();
    let arg = mat_func(&sq, &series_in_sq)?;
    det_sqrt(&arg, &T::one())
}

/// ν_φ = det^{-1/2}(1 - Φ e^{-R}) with the scalar branch pinned by the
/// caller: branch² = det(1 - Φ) > 0. Φ is a scalar matrix in the same
/// frame as R.
pub fn nu_phi_with_branch<T: Coeff>(
    r_normal: &FormMatrix<T>,
    phi: &[Vec<T>],
    branch: &T,
) -> Result<MultiVector<T>> {
    let (n, a) = r_normal.ambient();
    let sz = r_normal.size();
    if phi.len() != sz {
        return Err(EngineError::SizeMismatch { left: phi.len(), right: sz });
    }
    let phi_m = FormMatrix::from_scalars(n, a, phi);
    let earg = mat_exp_nilpotent(&r_normal.neg())?;
    let m = FormMatrix::identity(sz, n, a).sub(&phi_m.mul(&earg)?)?;
    det_inv_sqrt(&m, branch)
}

/// ν_φ from a planar decomposition of the normal rotation; the branch is
/// the positive root det^{1/2}(1-φ) = Π 2 sin(θ_j/2). Errors when the
/// rotation fixes a direction (θ = 0 is not normal-bundle data).
pub fn nu_phi(
    r_normal: &FormMatrix<Complex64>,
    dec: &PlanarDecomposition,
) -> Result<MultiVector<Complex64>> {
    if dec.has_fixed_directions() {
        return Err(EngineError::UnitNormalEigenvalue);
    }
    if dec.b != r_normal.size() {
        return Err(EngineError::SizeMismatch { left: dec.b, right: r_normal.size() });
    }
    let (n, a) = r_normal.ambient();
    if dec.b == 0 {
        return Ok(MultiVector::one(n, a));
    }
    let phi = dec.original_matrix();
    let rows: Vec<Vec<Complex64>> = (0..dec.b)
        .map(|i| (0..dec.b).map(|j| Complex64::new(phi[(i, j)], 0.0)).collect())
        .collect();
    let branch = Complex64::new(dec.det_sqrt_one_minus(), 0.0);
    nu_phi_with_branch(r_normal, &rows, &branch)
}
