//! Regenerates the JSON fixtures shipped under fixtures/.
use eqindex::density::{FixedComponentRepr, FixedPointFile};
use eqindex::exterior::MultiVector;
use eqindex::scalar::GaussianRational;

type Mv = MultiVector<GaussianRational>;

fn zero_rows(size: usize, n: usize, a: usize) -> Vec<Vec<Mv>> {
    (0..size).map(|_| (0..size).map(|_| Mv::zero(n, a)).collect()).collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    std::fs::create_dir_all("fixtures")?;

    // identity on the flat torus: one full component, zero density
    let identity = FixedPointFile {
        components: vec![FixedComponentRepr {
            n: 2,
            a: 2,
            phi_normal: vec![],
            rp: zero_rows(2, 2, 2),
            rpp: vec![],
            weight: (2.0 * std::f64::consts::PI).powi(2),
            lift_sign: 1,
        }],
    };
    std::fs::write("fixtures/fixed_points_identity.json", serde_json::to_string_pretty(&identity)?)?;

    // the inversion on the flat torus with trivial spin structure:
    // four isolated points, all lift signs +1, total -2i
    let point = || FixedComponentRepr {
        n: 2,
        a: 0,
        phi_normal: vec![vec!["-1".into(), "0".into()], vec!["0".into(), "-1".into()]],
        rp: vec![],
        rpp: zero_rows(2, 2, 0),
        weight: 1.0,
        lift_sign: 1,
    };
    let involution = FixedPointFile { components: vec![point(), point(), point(), point()] };
    std::fs::write(
        "fixtures/fixed_points_involution.json",
        serde_json::to_string_pretty(&involution)?,
    )?;

    // a curved component: a = 2, b = 2 inside n = 4 with a Pythagorean
    // normal rotation, a tangential curvature 2-form and a commuting
    // normal curvature
    let mut rp = zero_rows(2, 4, 2);
    let r12 = Mv::monomial(4, 2, &[1, 2], GaussianRational::from_ints(1, 0));
    rp[0][1] = r12.clone();
    rp[1][0] = r12.neg();
    let mut rpp = zero_rows(2, 4, 2);
    let w = Mv::monomial(4, 2, &[1, 2], GaussianRational::from_ints(2, 0));
    rpp[0][1] = w.clone();
    rpp[1][0] = w.neg();
    let curved = FixedPointFile {
        components: vec![FixedComponentRepr {
            n: 4,
            a: 2,
            phi_normal: vec![
                vec!["3/5".into(), "-4/5".into()],
                vec!["4/5".into(), "3/5".into()],
            ],
            rp,
            rpp,
            weight: 1.0,
            lift_sign: 1,
        }],
    };
    std::fs::write("fixtures/fixed_points_curved.json", serde_json::to_string_pretty(&curved)?)?;
    println!("fixtures written");
    Ok(())
}
