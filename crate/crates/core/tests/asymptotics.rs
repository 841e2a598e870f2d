use planar_patterns::asymptotics::*;
use planar_patterns::enumeration::{dgt_mean_exact, MarkedSystem, MarkingTerm};
use planar_patterns::intersections::enumerate_intersection_types;
use planar_patterns::map_core::Pattern;
use num_traits::Signed;
use planar_patterns::series::Rational;

fn q(a: i64, b: i64) -> Rational {
    Rational::new(a.into(), b.into())
}

fn fixture(name: &str) -> Pattern {
    let path = format!("{}/fixtures/{name}.map", env!("CARGO_MANIFEST_DIR"));
    Pattern::from_text(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn dgt_system() -> MarkedSystem {
    MarkedSystem::new(1, vec![MarkingTerm::new(0, 1, 2, 2, vec![])]).unwrap()
}

fn rational(c: &Constant) -> Rational {
    c.best_rational().unwrap()
}

#[test]
fn dgt_expansion_exact() {
    let e = singular_expansion::<Rational>(&dgt_system(), ()).unwrap();
    assert_eq!(e.rho, q(1, 12));
    assert_eq!(e.rho1[0], q(-7, 186624));
    assert_eq!(e.rho2[0][0], q(11, 120932352));
    assert_eq!(e.f1[0], q(7, 15552));
    assert_eq!(&e.f1[0] + &e.f2[0][0], q(108649, 241864704));
}

#[test]
fn dgt_report_reconstructs_and_verifies() {
    let rep = solve_and_differentiate(&dgt_system(), 256, true).unwrap();
    assert!(rep.residual_log2 < -200.0);
    for c in [&rep.rho, &rep.rho1[0], &rep.rho2[0][0], &rep.f1[0], &rep.f2[0][0]] {
        assert!(c.verified, "{c:?}");
        assert!(c.error_log2.unwrap() < -200.0);
    }
    assert_eq!(rep.rho1[0].rational.as_deref(), Some("-7/186624"));
    assert!(rep.rho.decimal.starts_with("0.08333333333333333333"));
    let json = rep.to_json();
    assert!(json.contains("\"rational\": \"11/120932352\""));
}

#[test]
fn unmarked_point_is_independent_of_terms() {
    let a = singular_expansion::<Rational>(&MarkedSystem::new(1, vec![]).unwrap(), ()).unwrap();
    assert_eq!(a.rho, q(1, 12));
    assert_eq!(a.rho1[0], q(0, 1));
    assert_eq!(a.rho2[0][0], q(0, 1));
}

#[test]
fn printed_pentagon_equation() {
    let sys = MarkedSystem::new(1, vec![MarkingTerm::new(0, 2, 3, 4, vec![]).with_u_exp(0)]).unwrap();
    let e = singular_expansion::<Rational>(&sys, ()).unwrap();
    assert_eq!(e.f1[0], q(737, 34992000));
    assert_eq!(&e.f1[0] + &e.f2[0][0], "644711998447/30611001600000000".parse::<Rational>().unwrap());
}

/// A pattern without self-intersections: the catalog route through face
/// classes and the direct pattern-marked equation give the same slopes.
fn check_two_routes(pattern: &str, direct: MarkedSystem) {
    let cat = enumerate_intersection_types(&fixture(pattern)).unwrap();
    assert!(cat.is_empty());
    let sys = MarkedSystem::new(cat.class_count(), cat.marking_terms()).unwrap();
    let via_classes = singular_expansion::<Rational>(&sys, ()).unwrap();
    let (mu, sigma2) = pattern_slopes(&cat, &via_classes, &()).unwrap();
    let d = singular_expansion::<Rational>(&direct, ()).unwrap();
    assert_eq!(mu, d.f1[0]);
    assert_eq!(sigma2, &d.f1[0] + &d.f2[0][0]);
}

#[test]
fn slopes_agree_between_routes() {
    check_two_routes("dgt", dgt_system());
    check_two_routes(
        "tgp",
        MarkedSystem::new(1, vec![MarkingTerm::new(0, 2, 3, 4, vec![])]).unwrap(),
    );
}

#[test]
fn dgt_catalog_slopes_match_printed_values() {
    let cat = enumerate_intersection_types(&fixture("dgt")).unwrap();
    let sys = MarkedSystem::new(cat.class_count(), cat.marking_terms()).unwrap();
    let rep = solve_and_differentiate(&sys, 256, true).unwrap();
    let (mu, sigma2) = pattern_constants(&cat, &rep).unwrap();
    assert!(mu.verified && sigma2.verified);
    assert_eq!(rational(&mu), q(7, 15552));
    assert_eq!(rational(&sigma2), q(108649, 241864704));
}

#[test]
fn simple_polygon_slope_is_f1() {
    let cat = enumerate_intersection_types(&fixture("polygon4")).unwrap();
    assert_eq!((cat.r0, cat.d0), (1, 0));
    let sys = MarkedSystem::new(cat.class_count(), cat.marking_terms()).unwrap();
    let e = singular_expansion::<Rational>(&sys, ()).unwrap();
    let (mu, _) = pattern_slopes(&cat, &e, &()).unwrap();
    assert_eq!(mu, e.f1[0]);
}

#[test]
fn finite_differences_match_jets() {
    let sys = MarkedSystem::new(
        2,
        vec![
            MarkingTerm::new(0, 3, 0, 3, vec![0, 0, 1]),
            MarkingTerm::new(1, 2, 1, 2, vec![0, 2]),
        ],
    )
    .unwrap();
    let e = singular_expansion::<Rational>(&sys, ()).unwrap();
    let h = q(1, 1000);
    for var in 0..2 {
        let (d1, d2) = finite_difference_rho(&sys, 256, var, &h).unwrap();
        let rel1 = ((&d1 - &e.rho1[var]) / &e.rho1[var]).abs();
        let rel2 = ((&d2 - &e.rho2[var][var]) / &e.rho2[var][var]).abs();
        assert!(rel1 < q(1, 100_000_000), "var {var}: {rel1}");
        assert!(rel2 < q(1, 100_000), "var {var}: {rel2}");
    }
}

#[test]
fn ratio_check_behaviour() {
    assert_eq!(ratio_asymptotic_check(100, 0), q(0, 1));
    let r1 = ratio_asymptotic_check(10_000, 1);
    assert!(r1 < q(1, 1_000_000));
    for k in 1..=5 {
        let a = ratio_asymptotic_check(1000, k);
        let b = ratio_asymptotic_check(2000, k);
        let ratio = a / b;
        assert!(ratio > q(37, 10) && ratio < q(43, 10), "k={k}: {ratio}");
    }
    let (c1, c2) = (fit_ratio_constant(1000, 10), fit_ratio_constant(10_000, 10));
    assert!(((c1 - c2) / c2).abs() < 0.2);
}

#[test]
fn gw_profile_trivial_cases() {
    let (mu, sigma) = (50.0f64, 4.0f64);
    let moments: Vec<(u32, f64)> = (1..=5)
        .map(|k| {
            let kf = k as f64;
            (k, mu.powf(kf) * (kf * kf * (sigma * sigma - mu) / (2.0 * mu * mu)).exp())
        })
        .collect();
    let p = gw_condition_check(mu, sigma, &moments).unwrap();
    assert!(p.residuals.iter().all(|&(_, r)| r.abs() < 1e-12));
    assert!(gw_condition_check(mu, sigma, &[]).is_err());
    let n = 1e8f64;
    let p = gw_condition_check(n, n.sqrt(), &[(1, n)]).unwrap();
    assert!(p.mu_large && p.log_condition < 0.05 && p.cube_condition < 1e-3);
}

#[test]
fn factorial_formula_at_zero_order() {
    assert_eq!(factorial_moment_formula(100, &[0, 0], &[0.1, 0.2], &[vec![0.0; 2], vec![0.0; 2]]), 1.0);
    assert_eq!(factorial_moment_deviation(&q(1, 1), 100, &[0], &[0.1], &[vec![0.3]]), 0.0);
}

#[test]
fn decimal_and_reconstruction_helpers() {
    assert_eq!(to_decimal(&q(1, 3), 5), "0.33333");
    assert_eq!(to_decimal(&q(-2, 3), 3), "-0.667");
    assert_eq!(to_decimal(&q(7, 1), 0), "7");
    let approx = q(22, 7) + Rational::new(1.into(), num_traits::pow(num_bigint::BigInt::from(2), 300));
    let bound = num_traits::pow(num_bigint::BigInt::from(10), 18);
    assert_eq!(reconstruct_rational(&approx, -200.0, &bound), Some(q(22, 7)));
    assert_eq!(reconstruct_rational(&approx, -400.0, &bound), None);
}

#[test]
fn constant_term_extrapolation() {
    let pts: Vec<(u32, Rational)> = [100u32, 200, 400]
        .iter()
        .map(|&n| (n, q(3 * n as i64, 1) + q(5, 2) + q(7, n as i64) + q(1, (n * n) as i64)))
        .collect();
    assert_eq!(extrapolate_constant(&pts, &q(3, 1)), q(5, 2));
}

#[test]
fn dgt_mean_matches_slope_and_constant() {
    let f1 = q(7, 15552);
    let pts: Vec<(u32, Rational)> = [1000u32, 2000, 4000].iter().map(|&n| (n, dgt_mean_exact(n))).collect();
    let g = extrapolate_constant(&pts, &f1);
    let res: Vec<Rational> = [100u32, 200, 400]
        .iter()
        .map(|&n| (dgt_mean_exact(n) - &f1 * Rational::from_integer(n.into()) - &g).abs())
        .collect();
    for w in res.windows(2) {
        let r = &w[1] / &w[0];
        assert!(r > q(3, 10) && r < q(7, 10), "{r}");
    }
}

#[test]
fn koala_constants_positive_and_verified() {
    let cat = enumerate_intersection_types(&fixture("koala")).unwrap();
    let sys = MarkedSystem::new(cat.class_count(), cat.marking_terms()).unwrap();
    let rep = solve_and_differentiate(&sys, 256, true).unwrap();
    assert!(rep.residual_log2 < -200.0);
    for c in &rep.f1 {
        assert!(c.value() > 0.0 && c.verified);
    }
    let (mu, sigma2) = pattern_constants(&cat, &rep).unwrap();
    assert!(mu.value() > 0.0 && sigma2.value() > 0.0);
    assert!(mu.verified && sigma2.verified);
    assert_eq!(rational(&mu), q(2, 144) * q(419, 34992));
}
