// scratch: cross-check the mode-sum pairing against a dense truncation,
// plus the numeric Chern number of the projection
use eqindex::oracle::*;
use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

type C = Complex64;

fn c(re: f64, im: f64) -> C { C::new(re, im) }

fn eval_proj(proj: &ProjTrig, x: (f64, f64)) -> Matrix2<C> {
    let mut m = Matrix2::zeros();
    for (s, v) in proj {
        let arg = s.0 as f64 * x.0 + s.1 as f64 * x.1;
        m += v * c(arg.cos(), arg.sin());
    }
    m
}

fn chern_number(proj: &ProjTrig) -> f64 {
    // c1 = (1/2πi) ∫ tr(e de ∧ de) over T²
    let n = 200;
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let mut acc = c(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let x = (i as f64 * h, j as f64 * h);
            let e = eval_proj(proj, x);
            let d1 = (eval_proj(proj, (x.0 + 1e-5, x.1)) - eval_proj(proj, (x.0 - 1e-5, x.1))) / c(2e-5, 0.0);
            let d2 = (eval_proj(proj, (x.0, x.1 + 1e-5)) - eval_proj(proj, (x.0, x.1 - 1e-5))) / c(2e-5, 0.0);
            acc += (e * (d1 * d2 - d2 * d1)).trace() * c(h * h, 0.0);
        }
    }
    (acc / c(0.0, 2.0 * std::f64::consts::PI)).re
}

fn main() {
    let proj = truncated_projection(1, 10);
    println!("chern number of degree-1 projection: {:.6}", chern_number(&proj));

    // dense route at small cutoff
    let model = TorusModel { spin: [1, 1], cutoff: 5 };
    let modes = model.modes();
    let nm = modes.len();
    println!("modes: {nm}");
    let idx: std::collections::BTreeMap<Mom, usize> =
        modes.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
    // spaces: spin ⊗ q ⊗ modes; order (mode, spin, q)
    let dim = nm * 4;
    let flat = |m: usize, s: usize, q: usize| -> usize { 4 * m + 2 * s + q };
    let mut d = DMatrix::<C>::zeros(dim, dim);
    for (mi, k) in modes.iter().enumerate() {
        let dk = TorusModel::dirac(*k);
        for s1 in 0..2 { for s2 in 0..2 { for q in 0..2 {
            d[(flat(mi, s1, q), flat(mi, s2, q))] = dk[(s1, s2)];
        }}}
    }
    let mut e = DMatrix::<C>::zeros(dim, dim);
    for (mj, k) in modes.iter().enumerate() {
        for (shift, m2) in &proj {
            let k2 = (k.0 + 2 * shift.0, k.1 + 2 * shift.1);
            if let Some(&mi) = idx.get(&k2) {
                for s in 0..2 { for q1 in 0..2 { for q2 in 0..2 {
                    e[(flat(mi, s, q1), flat(mj, s, q2))] += m2[(q1, q2)];
                }}}
            }
        }
    }
    let gamma = DMatrix::<C>::from_fn(dim, dim, |i, j| {
        if i == j { if (i / 2) % 2 == 0 { c(1.0,0.0) } else { c(-1.0,0.0) } } else { c(0.0,0.0) }
    });
    let dinv = d.clone().try_inverse().unwrap();
    let x = &dinv * (&d * &e - &e * &d);
    let x3 = &x * &x * &x;
    let dense = (gamma * x3).trace() * c(0.5, 0.0);
    println!("dense pairing (cutoff 5): {dense}");

    let v = projection_pairing(&model, &proj).unwrap();
    println!("mode-sum pairing (cutoff 5): {v}");
    let v16 = projection_pairing(&TorusModel { spin: [1,1], cutoff: 16 }, &proj).unwrap();
    println!("mode-sum pairing (cutoff 16): {v16}");
}
