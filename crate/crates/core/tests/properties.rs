use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;

use rhc::cauchy::{CauchyProjectors, GridFunction};
use rhc::contour::{invert_circle, invert_point, sharp, Circle, ContourSystem, Orientation};
use rhc::expr::Expression;
use rhc::factorize::{theta, theta_sharp, winding_number};
use rhc::C64;

fn complex(r: std::ops::Range<f64>) -> impl Strategy<Value = C64> {
    (r.clone(), r).prop_map(|(a, b)| C64::new(a, b))
}

fn orientation() -> impl Strategy<Value = Orientation> {
    prop_oneof![
        Just(Orientation::Counterclockwise),
        Just(Orientation::Clockwise)
    ]
}

/// Point with modulus in `[lo, hi]`.
fn annulus(lo: f64, hi: f64) -> impl Strategy<Value = C64> {
    (lo..hi, 0.0..2.0 * PI).prop_map(|(r, t)| C64::from_polar(r, t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inversion_is_an_involution(z in annulus(0.05, 20.0)) {
        let back = invert_point(invert_point(z));
        prop_assert!((back - z).norm() <= 1e-14 * z.norm().max(1.0));
    }

    #[test]
    fn circle_inversion_is_an_involution(
        center in complex(-3.0..3.0),
        radius in 0.1..2.0f64,
        o in orientation(),
    ) {
        // keep the origin clearly off the circle
        prop_assume!((center.norm() - radius).abs() > 0.05);
        let c = Circle::new(center, radius, o, 32).unwrap();
        let image = invert_circle(&c).unwrap();
        let back = invert_circle(&image).unwrap();
        prop_assert!(back.same_geometry(&c, 1e-10));
        prop_assert_eq!(back.orientation, c.orientation);
        // orientation is kept exactly when the circle encloses the origin
        prop_assert_eq!(image.orientation == o, c.encloses(C64::new(0.0, 0.0)));
    }

    #[test]
    fn projections_are_complementary(
        center in complex(-1.0..1.0),
        radius in 0.3..2.0f64,
        o in orientation(),
        coeffs in prop::collection::vec(complex(-1.0..1.0), 9),
        log_nodes in 4u32..7,
    ) {
        let nodes = 1usize << log_nodes;
        let cs = Arc::new(ContourSystem::new(vec![Circle::new(center, radius, o, nodes).unwrap()]).unwrap());
        let proj = CauchyProjectors::new(&cs);
        let f = GridFunction::scalar(&cs, |_, z| {
            let w = (z - center) / radius;
            coeffs.iter().enumerate().map(|(k, c)| c * w.powi(k as i32 - 4)).sum()
        });
        let diff = proj.apply_plus(&f).unwrap().sub(&proj.apply_minus(&f).unwrap()).unwrap();
        prop_assert!(diff.max_abs_diff(&f).unwrap() <= 1e-12 * f.max_abs().max(1.0));
    }

    #[test]
    fn winding_is_additive(
        zeros in prop::collection::vec(annulus(0.0, 3.0), 0..3),
        poles in prop::collection::vec(annulus(0.0, 3.0), 0..3),
        o in orientation(),
    ) {
        let all: Vec<C64> = zeros.iter().chain(&poles).copied().collect();
        prop_assume!(all.iter().all(|p| (p.norm() - 1.0).abs() > 0.25));
        let cs = Arc::new(ContourSystem::new(vec![Circle::unit(o, 128).unwrap()]).unwrap());
        let factor = |p: C64, up: bool| GridFunction::scalar(&cs, move |_, z| if up { z - p } else { 1.0 / (z - p) });
        let mut product = GridFunction::scalar(&cs, |_, _| C64::new(1.0, 0.0));
        let mut sum = 0;
        for (p, up) in zeros.iter().map(|&p| (p, true)).chain(poles.iter().map(|&p| (p, false))) {
            let f = factor(p, up);
            sum += winding_number(&f, 0).unwrap();
            product = product.mul(&f).unwrap();
        }
        let inside = |ps: &[C64]| ps.iter().filter(|p| p.norm() < 1.0).count() as i64;
        let expected = (inside(&zeros) - inside(&poles)) * o.sign() as i64;
        prop_assert_eq!(winding_number(&product, 0).unwrap(), sum);
        prop_assert_eq!(sum, expected);
    }

    #[test]
    fn theta_sharp_matches_its_closed_form(
        z in annulus(0.3, 3.0),
        zp in annulus(0.05, 0.9),
        zm in annulus(1.2, 4.0),
        k in prop::collection::vec(-3i64..=3, 1..4),
    ) {
        prop_assume!((z - zp).norm() > 0.05 && (z - zm).norm() > 0.05);
        prop_assume!((invert_point(z) - zp).norm() > 0.05 && (invert_point(z) - zm).norm() > 0.05);
        let sampled = sharp(|w| theta(w, Some(zp), Some(zm), &k), z);
        let closed = theta_sharp(z, zp, zm, &k);
        let scale = closed.iter().map(|x| x.norm()).fold(1.0, f64::max);
        prop_assert!((sampled - closed).iter().all(|d| d.norm() <= 1e-11 * scale));
    }

    #[test]
    fn polynomial_expressions_evaluate_like_horner(
        coeffs in prop::collection::vec(-5i32..5, 1..6),
        z in complex(-2.0..2.0),
    ) {
        let text = coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| format!("({c})*z^{k}"))
            .collect::<Vec<_>>()
            .join(" + ");
        let e = Expression::parse(&text).unwrap();
        let horner = coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c as f64);
        prop_assert!((e.eval(z).unwrap() - horner).norm() <= 1e-12 * (1.0 + horner.norm()));
    }
}
