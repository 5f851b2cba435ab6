use super::*;

fn assert_close(a: C, b: C, tol: f64, label: &str) {
    assert!((a - b).norm() <= tol, "{label}: {a} vs {b}");
}

#[test]
fn identity_supertrace_vanishes() {
    // P = Id, φ = id: chirality-symmetric spectrum pairs exactly
    let model = TorusModel { spin: [0, 0], cutoff: 12 };
    let iso = TorusIsometry::identity();
    let (v, _) = equivariant_heat_supertrace(&model, &iso, &vec![], 0.3).unwrap();
    assert!(v.norm() < 1e-14);
    let tr = TorusIsometry::translation([0.7, 1.3]);
    let (v, _) = equivariant_heat_supertrace(&model, &tr, &vec![], 0.3).unwrap();
    assert!(v.norm() < 1e-14);
}

#[test]
fn inversion_supertrace_is_t_independent() {
    for spin in [[0u8, 0u8], [1, 0], [0, 1], [1, 1]] {
        let model = TorusModel { spin, cutoff: 10 };
        let iso = TorusIsometry::inversion();
        let expect = if spin == [0, 0] { c(0.0, -2.0) } else { c(0.0, 0.0) };
        for t in [0.05, 0.2, 1.0] {
            let (v, _) = equivariant_heat_supertrace(&model, &iso, &vec![], t).unwrap();
            assert_close(v, expect, 1e-12, &format!("spin {spin:?} t {t}"));
        }
    }
}

#[test]
fn lift_sign_flips_supertrace() {
    let model = TorusModel { spin: [0, 0], cutoff: 8 };
    let mut iso = TorusIsometry::inversion();
    let (v1, _) = equivariant_heat_supertrace(&model, &iso, &vec![], 0.3).unwrap();
    iso.lift_sign = -1;
    let (v2, _) = equivariant_heat_supertrace(&model, &iso, &vec![], 0.3).unwrap();
    assert_close(v1, -v2, 1e-13, "lift sign");
}

#[test]
fn spin_structure_compatibility_enforced() {
    let model = TorusModel { spin: [1, 0], cutoff: 4 };
    assert!(matches!(
        TorusIsometry::quarter_turn().validate(&model),
        Err(EngineError::SpinStructureMismatch(_))
    ));
    let refl = TorusIsometry { a: [[1, 0], [0, -1]], translation: [0.0, 0.0], lift_sign: 1 };
    assert!(refl.validate(&TorusModel { spin: [0, 0], cutoff: 4 }).is_err());
}

#[test]
fn lefschetz_inversion_matches_density() {
    for spin in [[0u8, 0u8], [1, 0], [1, 1]] {
        let model = TorusModel { spin, cutoff: 12 };
        let rep = lefschetz_number(&model, &TorusIsometry::inversion()).unwrap();
        assert!(rep.heat_constancy < 1e-12, "McKean-Singer constancy");
        assert!(rep.difference < 1e-10, "spectral vs density: {}", rep.difference);
        if spin == [0, 0] {
            assert_close(rep.kernel_trace, c(0.0, -2.0), 1e-12, "kernel route");
            assert_close(rep.density_total, c(0.0, -2.0), 1e-12, "density route");
        } else {
            assert!(rep.density_total.norm() < 1e-12);
        }
    }
}

#[test]
fn lefschetz_quarter_turn_matches_density() {
    let model = TorusModel { spin: [0, 0], cutoff: 12 };
    let rep = lefschetz_number(&model, &TorusIsometry::quarter_turn()).unwrap();
    assert_close(rep.density_total, c(0.0, -(2.0f64).sqrt()), 1e-12, "density");
    assert!(rep.difference < 1e-10);
    assert!(rep.heat_constancy < 1e-12);
}

#[test]
fn identity_component_is_whole_torus() {
    let model = TorusModel { spin: [0, 0], cutoff: 4 };
    let comps = torus_fixed_components(&model, &TorusIsometry::identity()).unwrap();
    assert_eq!(comps.len(), 1);
    assert_eq!(comps[0].a, 2);
    let comps = torus_fixed_components(&model, &TorusIsometry::translation([1.0, 0.0])).unwrap();
    assert!(comps.is_empty());
}

fn trig_cos(axis: usize, scale: f64) -> ScalarTrig {
    let mut f = ScalarTrig::new();
    let m = if axis == 0 { (1i64, 0i64) } else { (0, 1) };
    f.insert(m, c(scale / 2.0, 0.0));
    f.insert((-m.0, -m.1), c(scale / 2.0, 0.0));
    f
}

#[test]
fn heat_coefficient_of_degree_two_word() {
    // fitted t^{-1} coefficient of Str[f⁰[D,f¹][D,f²]e^{-tD²}] vs the
    // predicted (-i)(2π)^{-1} ∫ f⁰ df¹∧df²: with f⁰ = sin x₁ sin x₂,
    // f¹ = cos x₁, f² = cos x₂ the integral is π².
    let mut f0 = ScalarTrig::new();
    for (s1, s2, v) in
        [(1i64, 1i64, -0.25), (1, -1, 0.25), (-1, 1, 0.25), (-1, -1, -0.25)]
    {
        f0.insert((s1, s2), c(v, 0.0));
    }
    let f1 = trig_cos(0, 1.0);
    let f2 = trig_cos(1, 1.0);
    let word: TorusWord = vec![
        TorusFactor::Mult(scalar_to_mat(&f0)),
        TorusFactor::Mult(c_df(&f1)),
        TorusFactor::Mult(c_df(&f2)),
    ];
    let model = TorusModel { spin: [0, 0], cutoff: 24 };
    let iso = TorusIsometry::identity();
    let mut values = Vec::new();
    let mut t = 0.02;
    while t <= 0.5 {
        let (v, _) = equivariant_heat_supertrace(&model, &iso, &word, t).unwrap();
        values.push((t, v));
        t *= 1.45;
    }
    let (coeffs, residual) = smalltime_fit(&values, &[-1.0, 0.0, 1.0, 2.0]).unwrap();
    assert!(residual < 1e-6, "fit residual {residual}");
    let predict = c(0.0, -1.0) / c(2.0 * std::f64::consts::PI, 0.0)
        * c(std::f64::consts::PI.powi(2), 0.0);
    let fitted = coeffs[0].1;
    assert!(
        (fitted - predict).norm() <= 0.02 * predict.norm(),
        "t^-1 coefficient {fitted} vs {predict}"
    );
}

#[test]
fn sphere_supertrace_cancels_but_halves_do_not() {
    for theta in [std::f64::consts::PI / 7.0, std::f64::consts::PI / 3.0, 1.3] {
        let (s, plus, minus) = sphere_supertrace(theta, 0.4, 300);
        assert_eq!(s, c(0.0, 0.0));
        assert_eq!(plus, minus);
        assert!(plus.abs() > 1e-3, "chirality halves should be nonzero");
    }
    for theta in
        [std::f64::consts::PI / 7.0, std::f64::consts::PI / 2.0, std::f64::consts::PI]
    {
        let total: C =
            sphere_pole_components(theta).iter().map(|p| local_density(p).unwrap()).sum();
        assert!(total.norm() < 1e-12, "theta {theta}");
    }
}

#[test]
fn truncated_projection_is_idempotent_enough() {
    let proj = truncated_projection(1, 14);
    let eval = |x: (f64, f64)| -> M2 {
        let mut m = M2::zeros();
        for (s, v) in &proj {
            let arg = s.0 as f64 * x.0 + s.1 as f64 * x.1;
            m += v * c(arg.cos(), arg.sin());
        }
        m
    };
    for x in [(0.3, 1.1), (2.0, 4.4), (5.9, 0.2)] {
        let e = eval(x);
        let resid = (e * e - e).norm();
        assert!(resid < 1e-3, "pointwise idempotency residual {resid}");
        assert!((e - e.adjoint()).norm() < 1e-10, "selfadjoint");
    }
}

#[test]
fn projection_indices_by_degree() {
    for (d, expect) in [(0i64, 0i64), (1, -1), (2, -2)] {
        let proj = truncated_projection(d, 8);
        assert_eq!(projection_chern_number(&proj).unwrap(), d, "chern of degree {d}");
        let idx = projection_index(&proj, 12).unwrap();
        assert_eq!(idx, expect, "degree {d}");
    }
    // the overlap reference is lattice-size stable
    assert_eq!(lattice_overlap_index(10, 1).unwrap(), -1);
    assert_eq!(lattice_overlap_index(16, 1).unwrap(), -1);
}

#[test]
fn pairing_approximates_index() {
    let model = TorusModel { spin: [1, 1], cutoff: 16 };
    let proj = truncated_projection(1, 10);
    let v = projection_pairing(&model, &proj).unwrap();
    assert!(v.im.abs() < 1e-8, "pairing should be real, got {v}");
    assert!((v.re - (-1.0)).abs() < 0.2, "pairing {v} far from -1");
}
