//! Deterministic generators for fixed-point data used by tests, the
//! verification suites and the shipped CLI fixtures.
//!
//! Valid normal-bundle data must satisfy [φ^N, R''] = 0: the curvature of
//! the normal connection is invariant under the isometry. Generators here
//! build the rotation block-diagonally from rational (Pythagorean) angles
//! and draw R'' from the commutant, so closed-form/integral comparisons
//! are exact in rational arithmetic.

use crate::charforms::FormMatrix;
use crate::exterior::MultiVector;
use crate::scalar::{rat, Coeff, GaussianRational};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type G = GaussianRational;

/// Rational (cos, sin) pairs on the unit circle, including the θ = π pair.
const PYTHAGOREAN: &[(i64, i64, i64)] =
    &[(3, 4, 5), (5, 12, 13), (8, 15, 17), (20, 21, 29), (-3, 4, 5), (-1, 0, 1)];

/// Random 2-form with small integer coefficients supported on the first
/// `n` coordinates.
pub fn random_two_form(n: usize, a: usize, rng: &mut ChaCha8Rng) -> MultiVector<G> {
    let mut e = MultiVector::zero(n, a);
    for p in 1..=n {
        for q in (p + 1)..=n {
            let c = rng.gen_range(-1i64..=1);
            if c != 0 {
                e = e.add(&MultiVector::monomial(n, a, &[p, q], G::from_ints(c, 0)));
            }
        }
    }
    e
}

/// Random antisymmetric matrix of 2-forms (a tangential curvature shape).
pub fn random_curvature(size: usize, n: usize, a: usize, rng: &mut ChaCha8Rng) -> FormMatrix<G> {
    let mut m = FormMatrix::zeros(size, n, a);
    for i in 0..size {
        for j in (i + 1)..size {
            let entry = random_two_form(n, a, rng);
            m.set(i, j, entry.clone());
            m.set(j, i, entry.neg());
        }
    }
    m
}

/// Valid rational normal-bundle data on b coordinates (b even): a special
/// orthogonal Φ without unit eigenvalues and an antisymmetric 2-form-valued
/// R'' with [Φ, R''] = 0. Also returns cos/sin of the plane angles.
pub fn random_normal_data(
    b: usize,
    n: usize,
    a: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<G>>, FormMatrix<G>, Vec<(G, G)>) {
    assert!(b % 2 == 0, "normal dimension must be even");
    let planes = b / 2;
    let mut phi: Vec<Vec<G>> = (0..b).map(|_| vec![G::zero(); b]).collect();
    let mut rpp = FormMatrix::zeros(b, n, a);
    let mut angles = Vec::new();

    // Decide a pairing of planes with equal angles to exercise the larger
    // commutant; unpaired planes get generic distinct angles.
    let mut same_angle_partner: Vec<Option<usize>> = vec![None; planes];
    if planes >= 2 && rng.gen_bool(0.5) {
        same_angle_partner[0] = Some(1);
        same_angle_partner[1] = Some(0);
    }

    let mut chosen: Vec<(G, G)> = Vec::new();
    for j in 0..planes {
        let (c, s) = if let Some(p) = same_angle_partner[j] {
            if p < j {
                chosen[p].clone()
            } else {
                let (pq, qq, hq) = PYTHAGOREAN[rng.gen_range(0..PYTHAGOREAN.len())];
                (G::from_rat(&rat(pq, hq)), G::from_rat(&rat(qq, hq)))
            }
        } else {
            let (pq, qq, hq) = PYTHAGOREAN[rng.gen_range(0..PYTHAGOREAN.len())];
            (G::from_rat(&rat(pq, hq)), G::from_rat(&rat(qq, hq)))
        };
        chosen.push((c.clone(), s.clone()));
        angles.push((c.clone(), s.clone()));
        let (r0, r1) = (2 * j, 2 * j + 1);
        phi[r0][r0] = c.clone();
        phi[r0][r1] = -s.clone();
        phi[r1][r0] = s.clone();
        phi[r1][r1] = c.clone();

        // commutant element on the diagonal block: ω · J
        let w = random_two_form(n, a, rng);
        rpp.set(r0, r1, w.clone());
        rpp.set(r1, r0, w.neg());
    }

    // cross-block coupling for the equal-angle pair: (α I + β J) with the
    // antisymmetry partner -（α I + β J)ᵀ = -α I + β J
    if let Some(1) = same_angle_partner[0] {
        let alpha = random_two_form(n, a, rng);
        let beta = random_two_form(n, a, rng);
        // block (0,1) of planes 0 and 1: rows 0..2, cols 2..4
        rpp.set(0, 2, alpha.clone());
        rpp.set(0, 3, beta.clone());
        rpp.set(1, 2, beta.neg());
        rpp.set(1, 3, alpha.clone());
        rpp.set(2, 0, alpha.neg());
        rpp.set(2, 1, beta.clone());
        rpp.set(3, 0, beta.neg());
        rpp.set(3, 1, alpha.neg());
    }

    (phi, rpp, angles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn normal_data_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for b in [2usize, 4, 6] {
            for _ in 0..5 {
                let (phi, rpp, _) = random_normal_data(b, b, 0, &mut rng);
                // Φ orthogonal with rational entries
                for i in 0..b {
                    for j in 0..b {
                        let mut dot = G::zero();
                        for k in 0..b {
                            dot = dot + phi[k][i].clone() * phi[k][j].clone();
                        }
                        let expect = if i == j { G::one() } else { G::zero() };
                        assert_eq!(dot, expect, "orthogonality at ({i},{j})");
                    }
                }
                // R'' antisymmetric and commuting with Φ
                assert!(rpp.is_curvature_shaped());
                let phim = FormMatrix::from_scalars(b, 0, &phi);
                let lhs = phim.mul(&rpp).unwrap();
                let rhs = rpp.mul(&phim).unwrap();
                assert_eq!(lhs, rhs, "[Φ, R''] must vanish");
            }
        }
    }
}

use crate::twisted::{CMat, FiniteTriple, Sigma};
use num_complex::Complex64;

/// Random well-conditioned finite triple on C^m ⊕ C^m with σ = id:
/// D = offdiag(T†, T) with singular values in [0.7, 1.7], and a few
/// random even generators.
pub fn random_triple(m: usize, rng: &mut ChaCha8Rng) -> FiniteTriple {
    let n = 2 * m;
    let c = |rng: &mut ChaCha8Rng| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    };
    let qa = nalgebra::QR::new(CMat::from_fn(m, m, |_, _| c(rng))).q();
    let qb = nalgebra::QR::new(CMat::from_fn(m, m, |_, _| c(rng))).q();
    let mut s = CMat::zeros(m, m);
    for i in 0..m {
        s[(i, i)] = Complex64::new(rng.gen_range(0.7..1.7), 0.0);
    }
    let t = &qa * s * qb.adjoint();
    let mut d = CMat::zeros(n, n);
    d.view_mut((0, m), (m, m)).copy_from(&t.adjoint());
    d.view_mut((m, 0), (m, m)).copy_from(&t);
    // the full even matrix algebra, so σ-conjugates of elements stay in
    // the span
    let mut gens = Vec::new();
    for block in 0..2 {
        for i in 0..m {
            for j in 0..m {
                let mut g = CMat::zeros(n, n);
                g[(block * m + i, block * m + j)] = Complex64::new(1.0, 0.0);
                gens.push(g);
            }
        }
    }
    FiniteTriple { dim_plus: m, dim_minus: m, d, gens, sigma: Sigma::Identity }
}
