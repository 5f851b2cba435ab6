//! Coefficient rings shared by the whole engine.
//!
//! Every algebraic structure here (exterior algebra, form matrices, Volterra
//! symbols) is generic over a coefficient ring implementing [`Coeff`]. Two
//! rings are provided:
//!
//! * [`GaussianRational`] — complex numbers with exact rational real and
//!   imaginary parts. Nilpotent series terminate exactly, so identities of
//!   forms can be asserted with zero residual.
//! * `Complex64` — double-precision complex floats for everything that
//!   involves sines, exponentials or spectral data.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Exact rational scalar.
pub type Rat = BigRational;

/// Build a rational from a numerator/denominator pair.
pub fn rat(num: i64, den: i64) -> Rat {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Coefficient ring for forms, matrices and symbols.
///
/// The ring must contain the Gaussian rationals (via [`Coeff::from_rat`])
/// and expose enough structure for series evaluation and branch bookkeeping.
pub trait Coeff:
    Clone
    + PartialEq
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn i() -> Self;
    fn is_zero(&self) -> bool;
    fn from_int(k: i64) -> Self;
    /// Embedding of an exact rational.
    fn from_rat(r: &Rat) -> Self;
    /// Embedding of a Gaussian rational re + i·im.
    fn from_rat_pair(re: &Rat, im: &Rat) -> Self;
    /// Multiplicative inverse; `None` for zero.
    fn inv(&self) -> Option<Self>;
    fn conj(&self) -> Self;
    fn to_c64(&self) -> Complex64;
    /// Sign of the real part (-1, 0, +1); the imaginary part is ignored.
    fn real_sign(&self) -> i8;

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_rat(&rat(num, den))
    }
}

/// Complex number with exact rational real and imaginary parts.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct GaussianRational {
    pub re: Rat,
    pub im: Rat,
}

impl GaussianRational {
    pub fn new(re: Rat, im: Rat) -> Self {
        GaussianRational { re, im }
    }

    pub fn from_ints(re: i64, im: i64) -> Self {
        GaussianRational::new(rat(re, 1), rat(im, 1))
    }

    /// Squared modulus |z|^2 = re^2 + im^2 (a rational).
    pub fn norm_sq(&self) -> Rat {
        &self.re * &self.re + &self.im * &self.im
    }
}

impl fmt::Display for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", self.re)
        } else if self.re.is_zero() {
            write!(f, "{}i", self.im)
        } else {
            write!(f, "{}{}{}i", self.re, if self.im.is_negative() { "" } else { "+" }, self.im)
        }
    }
}

impl Add for GaussianRational {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        GaussianRational::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Sub for GaussianRational {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        GaussianRational::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl Mul for GaussianRational {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        GaussianRational::new(
            &self.re * &rhs.re - &self.im * &rhs.im,
            &self.re * &rhs.im + &self.im * &rhs.re,
        )
    }
}

impl Neg for GaussianRational {
    type Output = Self;
    fn neg(self) -> Self {
        GaussianRational::new(-self.re, -self.im)
    }
}

impl Coeff for GaussianRational {
    fn zero() -> Self {
        GaussianRational::new(Rat::zero(), Rat::zero())
    }
    fn one() -> Self {
        GaussianRational::new(Rat::one(), Rat::zero())
    }
    fn i() -> Self {
        GaussianRational::new(Rat::zero(), Rat::one())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn from_int(k: i64) -> Self {
        GaussianRational::from_ints(k, 0)
    }
    fn from_rat(r: &Rat) -> Self {
        GaussianRational::new(r.clone(), Rat::zero())
    }
    fn from_rat_pair(re: &Rat, im: &Rat) -> Self {
        GaussianRational::new(re.clone(), im.clone())
    }
    fn inv(&self) -> Option<Self> {
        let n = self.norm_sq();
        if n.is_zero() {
            return None;
        }
        Some(GaussianRational::new(&self.re / &n, -(&self.im / &n)))
    }
    fn conj(&self) -> Self {
        GaussianRational::new(self.re.clone(), -self.im.clone())
    }
    fn to_c64(&self) -> Complex64 {
        Complex64::new(rat_to_f64(&self.re), rat_to_f64(&self.im))
    }
    fn real_sign(&self) -> i8 {
        if self.re.is_zero() {
            0
        } else if self.re.is_negative() {
            -1
        } else {
            1
        }
    }
}

impl Coeff for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn i() -> Self {
        Complex64::new(0.0, 1.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn from_int(k: i64) -> Self {
        Complex64::new(k as f64, 0.0)
    }
    fn from_rat(r: &Rat) -> Self {
        Complex64::new(rat_to_f64(r), 0.0)
    }
    fn from_rat_pair(re: &Rat, im: &Rat) -> Self {
        Complex64::new(rat_to_f64(re), rat_to_f64(im))
    }
    fn inv(&self) -> Option<Self> {
        if Coeff::is_zero(self) {
            None
        } else {
            Some(Complex64::new(1.0, 0.0) / self)
        }
    }
    fn conj(&self) -> Self {
        Complex64::new(self.re, -self.im)
    }
    fn to_c64(&self) -> Complex64 {
        *self
    }
    fn real_sign(&self) -> i8 {
        if self.re == 0.0 {
            0
        } else if self.re < 0.0 {
            -1
        } else {
            1
        }
    }
}

/// Lossy conversion of a big rational to `f64`.
pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Fall back to a quotient of truncated floats for huge numerators.
        let n = r.numer().to_f64().unwrap_or(f64::MAX);
        let d = r.denom().to_f64().unwrap_or(f64::MAX);
        n / d
    })
}

/// Parse a rational from the string form used by the JSON interchange
/// format, e.g. "3/4", "-2", "0".
pub fn rat_from_str(s: &str) -> Option<Rat> {
    s.trim().parse::<BigRational>().ok().or_else(|| {
        s.trim().parse::<BigInt>().ok().map(|n| BigRational::from_integer(n))
    })
}

/// Power of an integer factorial as a rational, 1/k!.
pub fn inv_factorial(k: usize) -> Rat {
    let mut f = BigInt::one();
    for j in 1..=k {
        f *= BigInt::from(j as i64);
    }
    BigRational::new(BigInt::one(), f)
}

/// Formal power series with rational coefficients, used to evaluate analytic
/// functions of nilpotent-valued matrices.
#[derive(Clone, Debug)]
pub struct Series {
    /// coeffs[k] multiplies x^k.
    pub coeffs: Vec<Rat>,
}

impl Series {
    pub fn new(coeffs: Vec<Rat>) -> Self {
        Series { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// exp(x) up to x^order inclusive.
    pub fn exp(order: usize) -> Self {
        Series::new((0..=order).map(inv_factorial).collect())
    }

    /// log(1+x) up to x^order inclusive.
    pub fn log1p(order: usize) -> Self {
        let mut c = vec![Rat::zero()];
        for k in 1..=order {
            let sign = if k % 2 == 0 { -1 } else { 1 };
            c.push(rat(sign, k as i64));
        }
        Series::new(c)
    }

    /// sinh(x)/x up to x^order inclusive (even series).
    pub fn sinh_x_over_x(order: usize) -> Self {
        let mut c = vec![Rat::zero(); order + 1];
        let mut k = 0;
        while 2 * k <= order {
            c[2 * k] = inv_factorial(2 * k + 1);
            k += 1;
        }
        Series::new(c)
    }

    /// cosh(x) up to x^order inclusive.
    pub fn cosh(order: usize) -> Self {
        let mut c = vec![Rat::zero(); order + 1];
        let mut k = 0;
        while 2 * k <= order {
            c[2 * k] = inv_factorial(2 * k);
            k += 1;
        }
        Series::new(c)
    }

    /// sinh(x) up to x^order inclusive.
    pub fn sinh(order: usize) -> Self {
        let mut c = vec![Rat::zero(); order + 1];
        let mut k = 0;
        while 2 * k + 1 <= order {
            c[2 * k + 1] = inv_factorial(2 * k + 1);
            k += 1;
        }
        Series::new(c)
    }

    /// x/sinh(x) up to x^order inclusive; reciprocal of `sinh_x_over_x`.
    pub fn x_over_sinh(order: usize) -> Self {
        Series::sinh_x_over_x(order).recip()
    }

    /// x/tanh(x) = cosh(x) · x/sinh(x) up to x^order inclusive.
    pub fn x_over_tanh(order: usize) -> Self {
        Series::cosh(order).mul_truncated(&Series::x_over_sinh(order))
    }

    /// Multiplicative inverse of a series with unit constant term.
    pub fn recip(&self) -> Self {
        let n = self.coeffs.len();
        assert!(self.coeffs[0].is_one(), "series inversion needs constant term 1");
        let mut inv = vec![Rat::zero(); n];
        inv[0] = Rat::one();
        for k in 1..n {
            let mut s = Rat::zero();
            for j in 1..=k {
                s += &self.coeffs[j] * &inv[k - j];
            }
            inv[k] = -s;
        }
        Series::new(inv)
    }

    pub fn mul_truncated(&self, other: &Series) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut c = vec![Rat::zero(); n];
        for (j, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (k, b) in other.coeffs.iter().enumerate() {
                if j + k < n && !b.is_zero() {
                    c[j + k] += a * b;
                }
            }
        }
        Series::new(c)
    }

    /// Keep only even powers and reindex as a series in y = x^2.
    /// Panics if an odd coefficient is nonzero.
    pub fn even_part_in_square(&self) -> Self {
        let mut c = Vec::new();
        for (k, a) in self.coeffs.iter().enumerate() {
            if k % 2 == 0 {
                c.push(a.clone());
            } else {
                assert!(a.is_zero(), "series has odd terms; not a function of x^2");
            }
        }
        Series::new(c)
    }
}
