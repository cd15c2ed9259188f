//! Symbolic results checked against independent numerical or dense computations.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use common::{gen, pde, rank_rows};
use conslaw::calculus::euler_operator;
use conslaw::conslaw::homotopy_density;
use conslaw::jet::{JetCoordinate, TermKey};
use conslaw::linsolve::{nullspace, RationalLinearSystem};
use conslaw::{JetExpression, Rational};
use num_traits::Zero;
use proptest::prelude::*;

const XU: &[JetCoordinate] = &[JetCoordinate::deriv(0, 0), JetCoordinate::deriv(0, 1), JetCoordinate::deriv(0, 2)];

/// u and its first four x-derivatives for a smooth periodic profile kept inside u > -1.
fn profile(x: f64) -> [f64; 5] {
    let (a, b) = (0.8, 0.3);
    [
        1.5 + a * x.sin() + b * (2.0 * x).cos(),
        a * x.cos() - 2.0 * b * (2.0 * x).sin(),
        -a * x.sin() - 4.0 * b * (2.0 * x).cos(),
        -a * x.cos() + 8.0 * b * (2.0 * x).sin(),
        a * x.sin() + 16.0 * b * (2.0 * x).cos(),
    ]
}

fn variation(x: f64) -> [f64; 5] {
    [
        (3.0 * x).cos() + 0.2 * x.sin(),
        -3.0 * (3.0 * x).sin() + 0.2 * x.cos(),
        -9.0 * (3.0 * x).cos() - 0.2 * x.sin(),
        27.0 * (3.0 * x).sin() - 0.2 * x.cos(),
        81.0 * (3.0 * x).cos() + 0.2 * x.sin(),
    ]
}

fn eval_at(e: &JetExpression, jet: &[f64; 5]) -> f64 {
    e.evaluate(&|c| match c.orders() {
        Some((0, j)) => jet[usize::from(j)],
        _ => panic!("unexpected coordinate {c:?}"),
    })
}

const NODES: usize = 256;

/// Periodic trapezoid rule on [0, 2π].
fn periodic_integral(f: impl Fn(f64) -> f64) -> f64 {
    let h = 2.0 * PI / NODES as f64;
    (0..NODES).map(|j| f(j as f64 * h)).sum::<f64>() * h
}

/// Composite Simpson rule on [0, 1].
fn simpson(f: impl Fn(f64) -> f64) -> f64 {
    let m = 400;
    let h = 1.0 / m as f64;
    let mut s = f(0.0) + f(1.0);
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, failure_persistence: None, ..ProptestConfig::default() })]

    /// d/dε ∫F(u + εη) dx equals ∫E_u(F) η dx for periodic u and η.
    #[test]
    fn euler_operator_matches_first_variation(f in gen::expr(XU, true)) {
        let eu = euler_operator(&f);
        let functional = |eps: f64| periodic_integral(|x| {
            let (u, v) = (profile(x), variation(x));
            let jet: [f64; 5] = std::array::from_fn(|i| u[i] + eps * v[i]);
            eval_at(&f, &jet)
        });
        let eps = 1e-5;
        let numeric = (functional(eps) - functional(-eps)) / (2.0 * eps);
        let symbolic = periodic_integral(|x| eval_at(&eu, &profile(x)) * variation(x)[0]);
        let scale = 1.0 + periodic_integral(|x| eval_at(&f, &profile(x)).abs()) + symbolic.abs();
        prop_assert!((numeric - symbolic).abs() <= 1e-6 * scale, "{} vs {} for {}", numeric, symbolic, f);
    }

    /// The evolution density equals ∫₀¹ u Λ[λu] dλ computed by quadrature.
    #[test]
    fn homotopy_matches_quadrature(lambda in gen::expr(gen::EVOLUTION, false)) {
        let kdv = pde("u_t + u*u_x + u_xxx = 0");
        let phi = homotopy_density(&kdv, &lambda, &JetExpression::zero()).unwrap();
        let (t, x) = (0.6, -1.3);
        let jet = profile(x);
        let point = |scale: f64| move |c: JetCoordinate| match c {
            JetCoordinate::T => t,
            JetCoordinate::X => x,
            c => scale * jet[usize::from(c.x_order())],
        };
        let numeric = simpson(|l| jet[0] * lambda.evaluate(&point(l)));
        let symbolic = phi.evaluate(&point(1.0));
        prop_assert!((numeric - symbolic).abs() <= 1e-9 * (1.0 + numeric.abs()), "{} vs {}", numeric, symbolic);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    /// Nullspace vectors annihilate the matrix, are independent and number ncols - rank.
    #[test]
    fn nullspace_matches_dense_rank(
        (ncols, entries) in (1usize..=7).prop_flat_map(|c| (Just(c), prop::collection::vec(prop::collection::vec(-3i64..=3, c), 0..=6)))
    ) {
        let dense: Vec<Vec<Rational>> =
            entries.iter().map(|r| r.iter().map(|&v| Rational::from_integer(v.into())).collect()).collect();
        let mut rows = BTreeMap::new();
        for (i, r) in dense.iter().enumerate() {
            let sparse: BTreeMap<usize, Rational> = r.iter().cloned().enumerate().filter(|(_, v)| !v.is_zero()).collect();
            rows.insert((i, TermKey::default()), sparse);
        }
        let ns = nullspace(&RationalLinearSystem { ncols, rows });
        let rank = rank_rows(dense.clone());
        prop_assert_eq!(ns.len(), ncols - rank);
        prop_assert_eq!(rank_rows(ns.clone()), ns.len());
        for v in &ns {
            for r in &dense {
                let dot = r.iter().zip(v).fold(Rational::zero(), |acc, (a, b)| acc + a * b);
                prop_assert!(dot.is_zero());
            }
        }
    }
}
