//! Test-side helpers that do not reuse the library's linear algebra.
#![allow(dead_code)]

use std::collections::BTreeMap;

use conslaw::jet::{parse_expression, JetExpression};
use conslaw::pde::{parse_pde, PdeSpec};
use conslaw::Rational;
use num_traits::Zero;

pub fn p(s: &str) -> JetExpression {
    parse_expression(s).unwrap_or_else(|e| panic!("`{s}`: {e}"))
}

pub fn pde(s: &str) -> PdeSpec {
    parse_pde(s, &BTreeMap::new()).unwrap_or_else(|e| panic!("`{s}`: {e}"))
}

pub fn pde_with(s: &str, params: &[(&str, i64)]) -> PdeSpec {
    let map = params.iter().map(|(k, v)| (k.to_string(), Rational::from_integer((*v).into()))).collect();
    parse_pde(s, &map).unwrap()
}

/// Rank of a set of expressions by dense Gaussian elimination over their rendered term keys.
pub fn rank(exprs: &[JetExpression]) -> usize {
    let mut keys: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<Rational>> = Vec::new();
    let mut maps = Vec::new();
    for e in exprs {
        let mut m = BTreeMap::new();
        for (k, q) in e.terms() {
            let key = format!("{:?}", k);
            if !keys.contains(&key) {
                keys.push(key.clone());
            }
            m.insert(key, q.clone());
        }
        maps.push(m);
    }
    for m in maps {
        rows.push(keys.iter().map(|k| m.get(k).cloned().unwrap_or_else(Rational::zero)).collect());
    }
    rank_rows(rows)
}

/// Rank of a dense rational matrix.
pub fn rank_rows(mut rows: Vec<Vec<Rational>>) -> usize {
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..ncols {
        let Some(piv) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else { continue };
        rows.swap(r, piv);
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let f = &rows[i][c] / &rows[r][c];
                let pr = rows[r].clone();
                for (a, b) in rows[i].iter_mut().zip(pr) {
                    *a -= &f * b;
                }
            }
        }
        r += 1;
    }
    r
}

/// Same linear span.
pub fn same_span(a: &[JetExpression], b: &[JetExpression]) -> bool {
    let ra = rank(a);
    let all: Vec<JetExpression> = a.iter().chain(b).cloned().collect();
    ra == rank(b) && ra == rank(&all)
}

/// `e` lies in span(a).
pub fn in_span(e: &JetExpression, a: &[JetExpression]) -> bool {
    let mut all = a.to_vec();
    all.push(e.clone());
    rank(&all) == rank(a)
}

pub mod gen {
    use conslaw::jet::{parse_expression, JetCoordinate, JetExpression};
    use conslaw::Rational;
    use proptest::prelude::*;

    pub const FULL: &[JetCoordinate] = &[
        JetCoordinate::T,
        JetCoordinate::X,
        JetCoordinate::deriv(0, 0),
        JetCoordinate::deriv(0, 1),
        JetCoordinate::deriv(0, 2),
        JetCoordinate::deriv(0, 3),
        JetCoordinate::deriv(1, 0),
        JetCoordinate::deriv(1, 1),
        JetCoordinate::deriv(2, 0),
    ];

    /// Solution coordinates of an evolution equation of order 3.
    pub const EVOLUTION: &[JetCoordinate] = &[
        JetCoordinate::T,
        JetCoordinate::X,
        JetCoordinate::deriv(0, 0),
        JetCoordinate::deriv(0, 1),
        JetCoordinate::deriv(0, 2),
    ];

    /// Solution coordinates of u_tx = g(u) restricted to the pure-x block.
    pub const MIXED: &[JetCoordinate] =
        &[JetCoordinate::X, JetCoordinate::deriv(0, 0), JetCoordinate::deriv(0, 1), JetCoordinate::deriv(0, 2)];

    // Powers share one center; products over distinct centers have no canonical form.
    const ATOMS: &[&str] = &["sin(u)", "cos(2*u)", "exp(u)", "exp(-u)", "pow(u + 1, -1/2)", "pow(u + 1, 2/3)"];

    fn term(coords: &'static [JetCoordinate], atoms: bool) -> impl Strategy<Value = JetExpression> {
        let atom_range = if atoms { ATOMS.len() + 3 } else { 1 };
        (
            (-6i64..=6).prop_filter("nonzero", |n| *n != 0),
            1i64..=4,
            prop::collection::vec((0..coords.len(), 1u32..=3), 0..=3),
            0..atom_range,
        )
            .prop_map(move |(num, den, factors, atom)| {
                let mut e = JetExpression::constant(Rational::new(num.into(), den.into()));
                for (i, k) in factors {
                    e = &e * &JetExpression::coord_pow(coords[i], k);
                }
                // Index 0 and the extra slots past the list mean "no atom".
                if atom >= 1 && atom <= ATOMS.len() {
                    e = &e * &parse_expression(ATOMS[atom - 1]).unwrap();
                }
                e
            })
    }

    /// Random sums of up to five terms over `coords`, optionally with kernel atoms in u.
    pub fn expr(coords: &'static [JetCoordinate], atoms: bool) -> impl Strategy<Value = JetExpression> {
        prop::collection::vec(term(coords, atoms), 1..=5)
            .prop_map(|ts| ts.iter().fold(JetExpression::zero(), |acc, t| &acc + t))
    }

    pub fn small_rational() -> impl Strategy<Value = Rational> {
        (-5i64..=5, 1i64..=3).prop_map(|(n, d)| Rational::new(n.into(), d.into()))
    }
}
