use proptest::prelude::*;

use delab_core::analytic::{explicit_U, family_member, power_divergence_coefficient, power_solution, radial_derivative};
use delab_core::awf::{read_awf1, write_awf1};
use delab_core::identities::{boundary_density_b, kazdan_warner_radial, WholeSpaceQuadrature};
use delab_core::probes::{harnack_ratio, singularity_fit};
use delab_core::quadrature::{sphere_integral, SphereQuadrature};
use delab_core::varmin::rayleigh;
use delab_core::wgrid::{apply_l, weighted_energy, weighted_lp};
use delab_core::xforms::kelvin;
use delab_core::{validate_params, AnalyticField, Domain, FamilyParameters, GridField, GridSpec, ProblemParams};

fn explicit() -> ProblemParams {
    ProblemParams::explicit(3).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-3.0f64..3.0)
}

fn small_field() -> impl Strategy<Value = GridField> {
    prop::collection::vec(0.01f64..1.0, 8 * 8 * 8).prop_map(|v| GridField::new(GridSpec::cube(8, 2.0).unwrap(), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pstar_decreases_in_s(n in 3usize..8, a in 0.51f64..3.0, s1 in 0.0f64..2.0, s2 in 0.0f64..2.0) {
        let (lo, hi) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
        let p_lo = validate_params(n, a, lo).unwrap().exponents().pstar;
        let p_hi = validate_params(n, a, hi).unwrap().exponents().pstar;
        prop_assert!(p_hi <= p_lo);
        let e = validate_params(n, a, lo).unwrap().exponents();
        prop_assert!(e.hardy_lambda < 0.25);
        prop_assert_eq!(power_divergence_coefficient(&validate_params(n, a, lo).unwrap(), e.decay_d), 0.0);
    }

    #[test]
    fn rayleigh_is_scale_invariant(u in small_field(), c in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0]) {
        let p = explicit();
        let r = rayleigh(&u, &p).unwrap();
        prop_assert!(rel(rayleigh(&u.scaled(c), &p).unwrap(), r) <= 1e-12);
    }

    #[test]
    fn energy_and_lp_homogeneity(u in small_field(), c in 0.1f64..10.0) {
        let p = explicit();
        let e = weighted_energy(&u, &p);
        prop_assert!(rel(weighted_energy(&u.scaled(c), &p), c * c * e) <= 1e-12);
        let pstar = p.exponents().pstar;
        let l = weighted_lp(&u, &p).unwrap();
        prop_assert!(rel(weighted_lp(&u.scaled(c), &p).unwrap(), c.powf(pstar) * l) <= 1e-12);
    }

    #[test]
    fn operator_is_symmetric(u in small_field(), v in small_field()) {
        let p = explicit();
        let lu = apply_l(&u, &p);
        let lv = apply_l(&v, &p);
        let a: f64 = lu.values.iter().zip(&v.values).map(|(x, y)| x * y).sum();
        let b: f64 = u.values.iter().zip(&lv.values).map(|(x, y)| x * y).sum();
        prop_assert!(rel(a, b) <= 1e-10);
        let q: f64 = lu.values.iter().zip(&u.values).map(|(x, y)| x * y).sum();
        prop_assert!(q >= 0.0);
    }

    #[test]
    fn kelvin_is_an_involution(x in point(), lam in 0.3f64..3.0) {
        prop_assume!(x.iter().map(|v| v * v).sum::<f64>() > 1e-2);
        let p = explicit();
        let u = explicit_U(&p).unwrap();
        let kk = kelvin(&kelvin(&u, lam, &p).unwrap(), lam, &p).unwrap();
        prop_assert!(rel(kk.eval(&x), u.eval(&x)) <= 1e-12);
    }

    #[test]
    fn family_composes(x in point(), l1 in 0.3f64..3.0, l2 in 0.3f64..3.0, z in prop::array::uniform4(-1.0f64..1.0)) {
        let p = explicit();
        let a = FamilyParameters::new(l1, vec![z[0], z[1]]).unwrap();
        let b = FamilyParameters::new(l2, vec![z[2], z[3]]).unwrap();
        let ab = delab_core::analytic::family_transform(&family_member(&p, &a).unwrap(), &b).unwrap();
        let direct = family_member(&p, &a.then(&b)).unwrap();
        prop_assert!(rel(ab.eval(&x), direct.eval(&x)) <= 1e-12);
    }

    #[test]
    fn explicit_solution_is_axially_symmetric(x in point(), theta in 0.0f64..std::f64::consts::TAU) {
        let p = explicit();
        let u = explicit_U(&p).unwrap();
        let (c, s) = (theta.cos(), theta.sin());
        let y = [c * x[0] - s * x[1], s * x[0] + c * x[1], x[2]];
        prop_assert!(rel(u.eval(&y), u.eval(&x)) <= 1e-12);
    }

    #[test]
    fn explicit_solution_decreases_in_r(x in point()) {
        prop_assume!(x[0].hypot(x[1]) > 1e-3 && x[2].abs() > 1e-3);
        let p = explicit();
        let u = explicit_U(&p).unwrap();
        // radial derivative in x' only
        let g = u.gradient(&x).unwrap();
        let r = x[0].hypot(x[1]);
        prop_assert!((g[0] * x[0] + g[1] * x[1]) / r < 0.0);
        prop_assert!(radial_derivative(&u, &x).unwrap() < 0.0);
    }

    #[test]
    fn boundary_density_vanishes_on_power(sigma in 0.1f64..3.0, x in point()) {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(r > 1e-2);
        let p = explicit();
        let w = power_solution(&p, 3.0);
        let y: Vec<f64> = x.iter().map(|v| sigma * v / r).collect();
        let term = y[2].abs().powi(2) * sigma.powf(-7.0);
        prop_assert!(boundary_density_b(&w, &y, sigma, &p).unwrap().abs() <= 1e-12 * term.max(1e-300) + 1e-300);
    }

    #[test]
    fn sphere_integral_scales(sigma in 0.1f64..5.0) {
        let f = |x: &[f64]| x[2] * x[2];
        let one = sphere_integral(f, &SphereQuadrature::new(1.0, 8).unwrap()).unwrap();
        let at = sphere_integral(f, &SphereQuadrature::new(sigma, 8).unwrap()).unwrap();
        prop_assert!(rel(at, sigma.powi(4) * one) <= 1e-10);
    }

    #[test]
    fn harnack_at_least_one(r in 0.1f64..2.0, lam in 0.5f64..2.0) {
        let p = explicit();
        let u = family_member(&p, &FamilyParameters::new(lam, vec![0.0, 0.0]).unwrap()).unwrap();
        prop_assert!(harnack_ratio(&u, r, &p).unwrap() >= 1.0);
    }

    #[test]
    fn singularity_fit_is_linear(a in -5.0f64..5.0, c1 in 0.1f64..5.0, c2 in 0.1f64..5.0) {
        let p = explicit();
        let one = AnalyticField::constant(p, 1.0);
        let u1 = power_solution(&p, 3.0).scaled(c1).plus(&one);
        let u2 = power_solution(&p, 3.0).scaled(c2).plus(&one.scaled(2.0));
        let radii = [0.5, 0.25, 0.125];
        let f1 = singularity_fit(&u1, &radii, &p).unwrap();
        let f2 = singularity_fit(&u2, &radii, &p).unwrap();
        let f12 = singularity_fit(&u1.scaled(a).plus(&u2), &radii, &p).unwrap();
        prop_assert!((f12.c_hat - (a * f1.c_hat + f2.c_hat)).abs() <= 1e-8 * (1.0 + f12.c_hat.abs()));
        prop_assert!((f12.b0_hat - (a * f1.b0_hat + f2.b0_hat)).abs() <= 1e-8 * (1.0 + f12.b0_hat.abs()));
    }

    #[test]
    fn awf1_round_trip(u in small_field()) {
        let mut buf = Vec::new();
        write_awf1(&mut buf, &u, 1.0, 5.0 / 3.0).unwrap();
        let (_, back) = read_awf1(&buf[..]).unwrap();
        prop_assert_eq!(back.values, u.values);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn kazdan_warner_is_linear_in_k(a in -3.0f64..3.0) {
        let p = explicit();
        let u = explicit_U(&p).unwrap();
        let quad = WholeSpaceQuadrature { half_width: 8.0, cells: 16 };
        let k1 = AnalyticField::new(p, Domain::FullSpace, |x| x[0] * x[0]).with_gradient(|x| vec![2.0 * x[0], 0.0, 0.0]);
        let k2 = AnalyticField::new(p, Domain::FullSpace, |x| x[2].sin()).with_gradient(|x| vec![0.0, 0.0, x[2].cos()]);
        let i1 = kazdan_warner_radial(&u, &k1, &p, quad).unwrap().value;
        let i2 = kazdan_warner_radial(&u, &k2, &p, quad).unwrap().value;
        let i12 = kazdan_warner_radial(&u, &k1.scaled(a).plus(&k2), &p, quad).unwrap().value;
        prop_assert!((i12 - (a * i1 + i2)).abs() <= 1e-10 * (i1.abs() + i2.abs()));
    }
}
