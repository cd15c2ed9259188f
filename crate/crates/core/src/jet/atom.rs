//! Kernel atoms and the term-level rewrite system.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use super::{JetCoordinate, Monomial, TermKey};
use crate::rational::{as_u32, binomial, pow_rational, rat, Rational};

/// `slope * u + offset`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Affine {
    pub slope: Rational,
    pub offset: Rational,
}

impl Affine {
    pub fn new(slope: Rational, offset: Rational) -> Self {
        Affine { slope, offset }
    }

    pub fn zero() -> Self {
        Affine::new(Rational::zero(), Rational::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.slope.is_zero() && self.offset.is_zero()
    }

    pub fn is_constant(&self) -> bool {
        self.slope.is_zero()
    }

    pub fn scale(&self, k: &Rational) -> Affine {
        Affine::new(&self.slope * k, &self.offset * k)
    }

    pub fn add(&self, other: &Affine) -> Affine {
        Affine::new(&self.slope + &other.slope, &self.offset + &other.offset)
    }

    pub fn at(&self, u: &Rational) -> Rational {
        &self.slope * u + &self.offset
    }

    /// Sign-canonical form: leading nonzero of (slope, offset) positive.
    /// Returns the canonical affine form and whether it was negated.
    fn canonical_sign(&self) -> (Affine, bool) {
        let negative = if self.slope.is_zero() { self.offset.is_negative() } else { self.slope.is_negative() };
        if negative {
            (self.scale(&rat(-1)), true)
        } else {
            (self.clone(), false)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KernelAtom {
    Exp(Affine),
    Sin(Affine),
    Cos(Affine),
    /// `(u - center)^exponent`, exponent never a nonnegative integer once normalized.
    Pow { center: Rational, exponent: Rational },
}

impl KernelAtom {
    pub fn depends_on_u(&self) -> bool {
        match self {
            KernelAtom::Exp(a) | KernelAtom::Sin(a) | KernelAtom::Cos(a) => !a.is_constant(),
            KernelAtom::Pow { .. } => true,
        }
    }

    /// d/du of the atom as `coefficient * atom'` (`None` stands for the constant 1).
    pub fn derivative(&self) -> (Rational, Option<KernelAtom>) {
        match self {
            KernelAtom::Exp(a) => (a.slope.clone(), Some(self.clone())),
            KernelAtom::Sin(a) => (a.slope.clone(), Some(KernelAtom::Cos(a.clone()))),
            KernelAtom::Cos(a) => (-a.slope.clone(), Some(KernelAtom::Sin(a.clone()))),
            KernelAtom::Pow { center, exponent } => {
                let e = exponent - Rational::one();
                if e.is_zero() {
                    (exponent.clone(), None)
                } else {
                    (exponent.clone(), Some(KernelAtom::Pow { center: center.clone(), exponent: e }))
                }
            }
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        let aff = |a: &Affine| crate::rational::to_f64(&a.slope) * u + crate::rational::to_f64(&a.offset);
        match self {
            KernelAtom::Exp(a) => aff(a).exp(),
            KernelAtom::Sin(a) => aff(a).sin(),
            KernelAtom::Cos(a) => aff(a).cos(),
            KernelAtom::Pow { center, exponent } => {
                let base = u - crate::rational::to_f64(center);
                match crate::rational::as_i64(exponent) {
                    Some(k) if k.abs() < i32::MAX as i64 => base.powi(k as i32),
                    _ => base.powf(crate::rational::to_f64(exponent)),
                }
            }
        }
    }
}

struct Raw {
    coeff: Rational,
    mono: Monomial,
    atoms: Vec<(KernelAtom, u32)>,
}

#[derive(Default)]
struct Canon {
    exp: Option<Affine>,
    trig: BTreeMap<Affine, (u32, u32)>,
    pows: BTreeMap<Rational, Rational>,
}

impl Canon {
    fn atoms(&self) -> Vec<(KernelAtom, u32)> {
        let mut out = Vec::new();
        if let Some(a) = &self.exp {
            out.push((KernelAtom::Exp(a.clone()), 1));
        }
        for (a, &(s, _)) in &self.trig {
            if s > 0 {
                out.push((KernelAtom::Sin(a.clone()), s));
            }
        }
        for (a, &(_, c)) in &self.trig {
            if c > 0 {
                out.push((KernelAtom::Cos(a.clone()), c));
            }
        }
        for (c, r) in &self.pows {
            out.push((KernelAtom::Pow { center: c.clone(), exponent: r.clone() }, 1));
        }
        out.sort();
        out
    }
}

/// Rewrites one raw product `coeff * mono * atoms` into canonical terms.
pub(crate) fn normalize_term(coeff: Rational, mono: Monomial, atoms: Vec<(KernelAtom, u32)>) -> Vec<(TermKey, Rational)> {
    let mut out = Vec::new();
    let mut stack = vec![Raw { coeff, mono, atoms }];
    let u = JetCoordinate::u();
    'work: while let Some(raw) = stack.pop() {
        let mut coeff = raw.coeff;
        if coeff.is_zero() {
            continue;
        }
        let mut canon = Canon::default();
        for (atom, k) in raw.atoms {
            if k == 0 {
                continue;
            }
            let kq = rat(k as i64);
            match atom {
                KernelAtom::Exp(a) => {
                    let s = a.scale(&kq);
                    canon.exp = Some(match canon.exp.take() {
                        Some(prev) => prev.add(&s),
                        None => s,
                    });
                }
                KernelAtom::Sin(a) => {
                    if a.is_zero() {
                        continue 'work;
                    }
                    let (a, neg) = a.canonical_sign();
                    if neg && k % 2 == 1 {
                        coeff = -coeff;
                    }
                    canon.trig.entry(a).or_insert((0, 0)).0 += k;
                }
                KernelAtom::Cos(a) => {
                    if a.is_zero() {
                        continue;
                    }
                    let (a, _) = a.canonical_sign();
                    canon.trig.entry(a).or_insert((0, 0)).1 += k;
                }
                KernelAtom::Pow { center, exponent } => {
                    let e = canon.pows.entry(center).or_insert_with(Rational::zero);
                    *e += exponent * kq;
                }
            }
        }
        if canon.exp.as_ref().is_some_and(Affine::is_zero) {
            canon.exp = None;
        }
        canon.pows.retain(|_, e| !e.is_zero());

        // (u - c)^m with m a nonnegative integer expands to a polynomial.
        if let Some((c, m)) = canon.pows.iter().find_map(|(c, e)| as_u32(e).map(|m| (c.clone(), m))) {
            canon.pows.remove(&c);
            let rest = canon.atoms();
            let neg_c = -c;
            for j in 0..=m {
                let cf = &coeff * Rational::from_integer(binomial(m, j)) * pow_rational(&neg_c, m - j);
                stack.push(Raw { coeff: cf, mono: raw.mono.mul_var(u, j), atoms: rest.clone() });
            }
            continue;
        }

        // sin^s with s >= 2 becomes sin^(s-2) * (1 - cos^2).
        if let Some(a) = canon.trig.iter().find(|(_, &(s, _))| s >= 2).map(|(a, _)| a.clone()) {
            let entry = canon.trig.get_mut(&a).expect("present");
            entry.0 -= 2;
            let first = canon.atoms();
            canon.trig.get_mut(&a).expect("present").1 += 2;
            let second = canon.atoms();
            stack.push(Raw { coeff: coeff.clone(), mono: raw.mono.clone(), atoms: first });
            stack.push(Raw { coeff: -coeff, mono: raw.mono, atoms: second });
            continue;
        }

        // u^k * (u - a)^r = sum_j C(k,j) a^(k-j) (u - a)^(r+j) for the smallest center a.
        let k = raw.mono.degree(u);
        if k > 0 {
            if let Some((a, r)) = canon.pows.iter().next().map(|(a, r)| (a.clone(), r.clone())) {
                let mono = raw.mono.without(u);
                for j in 0..=k {
                    let cf = &coeff * Rational::from_integer(binomial(k, j)) * pow_rational(&a, k - j);
                    if cf.is_zero() {
                        continue;
                    }
                    canon.pows.insert(a.clone(), &r + rat(j as i64));
                    stack.push(Raw { coeff: cf, mono: mono.clone(), atoms: canon.atoms() });
                }
                continue;
            }
        }

        out.push((TermKey { monomial: raw.mono, atoms: canon.atoms() }, coeff));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::JetExpression;
    use crate::rational::ratio;

    fn pw(c: i64, r: Rational) -> JetExpression {
        JetExpression::atom(KernelAtom::Pow { center: rat(c), exponent: r })
    }

    #[test]
    fn pow_merging_and_expansion() {
        let a = pw(0, ratio(1, 2));
        let sq = &a * &a;
        assert_eq!(sq, JetExpression::coord(JetCoordinate::u()));
        let inv = pw(0, rat(-1));
        let prod = &inv * &JetExpression::coord(JetCoordinate::u());
        assert_eq!(prod, JetExpression::one());
    }

    #[test]
    fn u_absorbed_into_pow() {
        let u = JetExpression::coord(JetCoordinate::u());
        let p = pw(1, rat(-2));
        let e = &u * &p;
        // u (u-1)^-2 = (u-1)^-1 + (u-1)^-2
        let expect = &pw(1, rat(-1)) + &pw(1, rat(-2));
        assert_eq!(e, expect);
    }

    #[test]
    fn trig_sign_canonical() {
        let s = JetExpression::atom(KernelAtom::Sin(Affine::new(rat(-1), rat(0))));
        let expect = -&JetExpression::atom(KernelAtom::Sin(Affine::new(rat(1), rat(0))));
        assert_eq!(s, expect);
        let c = JetExpression::atom(KernelAtom::Cos(Affine::new(rat(-2), rat(1))));
        assert_eq!(c, JetExpression::atom(KernelAtom::Cos(Affine::new(rat(2), rat(-1)))));
    }

    #[test]
    fn exp_merge_to_one() {
        let a = JetExpression::atom(KernelAtom::Exp(Affine::new(rat(1), rat(0))));
        let b = JetExpression::atom(KernelAtom::Exp(Affine::new(rat(-1), rat(0))));
        assert_eq!(&a * &b, JetExpression::one());
    }
}
