use num_traits::{One, Signed, Zero};

use super::{Affine, JetExpression, KernelAtom, TermKey};
use crate::rational::{render as rq, Rational};

fn affine_string(a: &Affine) -> String {
    let mut s = String::new();
    if !a.slope.is_zero() {
        if a.slope.is_one() {
            s.push('u');
        } else if (-a.slope.clone()).is_one() {
            s.push_str("-u");
        } else {
            s.push_str(&format!("{}*u", rq(&a.slope)));
        }
        if a.offset.is_positive() {
            s.push_str(&format!(" + {}", rq(&a.offset)));
        } else if a.offset.is_negative() {
            s.push_str(&format!(" - {}", rq(&-a.offset.clone())));
        }
    } else {
        s.push_str(&rq(&a.offset));
    }
    s
}

pub(crate) fn atom_string(a: &KernelAtom) -> String {
    match a {
        KernelAtom::Exp(af) => format!("exp({})", affine_string(af)),
        KernelAtom::Sin(af) => format!("sin({})", affine_string(af)),
        KernelAtom::Cos(af) => format!("cos({})", affine_string(af)),
        KernelAtom::Pow { center, exponent } => {
            let base = affine_string(&Affine::new(Rational::one(), -center.clone()));
            format!("pow({}, {})", base, rq(exponent))
        }
    }
}

fn factors_string(key: &TermKey) -> Vec<String> {
    let mut out = Vec::new();
    for (c, k) in key.monomial.factors() {
        if *k == 1 {
            out.push(c.name());
        } else {
            out.push(format!("{}^{}", c.name(), k));
        }
    }
    for (a, k) in &key.atoms {
        if *k == 1 {
            out.push(atom_string(a));
        } else {
            out.push(format!("{}^{}", atom_string(a), k));
        }
    }
    out
}

pub(crate) fn render(e: &JetExpression) -> String {
    if e.is_zero() {
        return "0".into();
    }
    let mut s = String::new();
    for (i, (key, q)) in e.terms().enumerate() {
        let neg = q.is_negative();
        let mag = q.abs();
        if i == 0 {
            if neg {
                s.push('-');
            }
        } else {
            s.push_str(if neg { " - " } else { " + " });
        }
        let factors = factors_string(key);
        if factors.is_empty() {
            s.push_str(&rq(&mag));
        } else {
            if !mag.is_one() {
                s.push_str(&rq(&mag));
                s.push('*');
            }
            s.push_str(&factors.join("*"));
        }
    }
    s
}
