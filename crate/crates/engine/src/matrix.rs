//! Minimal dense square matrices over a [`Coeff`] ring.
//!
//! nalgebra handles the float-only linear algebra elsewhere; this type
//! exists so that spinor endomorphisms and small auxiliary matrices can be
//! manipulated exactly over Gaussian rationals.

use crate::scalar::Coeff;
use num_complex::Complex64;
use std::fmt;

#[derive(Clone, PartialEq)]
pub struct SqMatrix<T: Coeff> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Coeff> SqMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        SqMatrix { dim, data: vec![T::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matrix size mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)].clone();
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = other[(k, j)].clone();
                    if b.is_zero() {
                        continue;
                    }
                    out[(i, j)] = out[(i, j)].clone() + a.clone() * b;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matrix size mismatch");
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(other.data.iter()) {
            *x = x.clone() + y.clone();
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matrix size mismatch");
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(other.data.iter()) {
            *x = x.clone() - y.clone();
        }
        out
    }

    pub fn scale(&self, c: &T) -> Self {
        let mut out = self.clone();
        for x in out.data.iter_mut() {
            *x = x.clone() * c.clone();
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(&(-T::one()))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> T {
        let mut t = T::zero();
        for i in 0..self.dim {
            t = t + self[(i, i)].clone();
        }
        t
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    /// Largest entry magnitude after float conversion.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.to_c64().norm()).fold(0.0, f64::max)
    }

    pub fn map<U: Coeff>(&self, f: impl Fn(&T) -> U) -> SqMatrix<U> {
        SqMatrix { dim: self.dim, data: self.data.iter().map(f).collect() }
    }

    pub fn to_c64(&self) -> SqMatrix<Complex64> {
        self.map(|x| x.to_c64())
    }
}

impl<T: Coeff> std::ops::Index<(usize, usize)> for SqMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.dim + j]
    }
}

impl<T: Coeff> std::ops::IndexMut<(usize, usize)> for SqMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.dim + j]
    }
}

impl<T: Coeff> fmt::Debug for SqMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SqMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  [")?;
            for j in 0..self.dim {
                write!(f, " {:?}", self[(i, j)])?;
            }
            writeln!(f, " ]")?;
        }
        Ok(())
    }
}

/// Kronecker product, used to assemble spinor representations.
pub fn kron<T: Coeff>(a: &SqMatrix<T>, b: &SqMatrix<T>) -> SqMatrix<T> {
    let (na, nb) = (a.dim(), b.dim());
    SqMatrix::from_fn(na * nb, |i, j| {
        a[(i / nb, j / nb)].clone() * b[(i % nb, j % nb)].clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::GaussianRational;

    type M = SqMatrix<GaussianRational>;

    #[test]
    fn kron_and_trace() {
        let id = M::identity(2);
        let k = kron(&id, &id);
        assert_eq!(k.dim(), 4);
        assert_eq!(k.trace(), GaussianRational::from_ints(4, 0));
    }
}
