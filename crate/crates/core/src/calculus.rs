//! Total derivatives, Euler operators, inversion of D_x and the integration-by-parts normal form.

use std::collections::BTreeSet;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::jet::{atom_partials, Direction, JetCoordinate, JetExpression, KernelAtom, Monomial, TermKey};
use crate::rational::{rat, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CalculusError {
    #[error("not a total x-derivative; residual {residual}")]
    NotExact { residual: JetExpression },
    #[error("no closed-form antiderivative in u for {0}")]
    Unsupported(String),
}

/// Formal total derivative D_t or D_x.
pub fn total_derivative(e: &JetExpression, dir: Direction) -> JetExpression {
    let indep = match dir {
        Direction::T => JetCoordinate::T,
        Direction::X => JetCoordinate::X,
    };
    let u_dir = JetCoordinate::u().raised(dir).expect("dependent");
    let mut out = JetExpression::zero();
    for (key, q) in e.terms() {
        for &(c, k) in key.monomial.factors() {
            let kq = q * rat(k as i64);
            let base = key.monomial.with_degree(c, k - 1);
            let m = match c {
                JetCoordinate::U { .. } => base.mul_var(c.raised(dir).expect("dependent"), 1),
                _ if c == indep => base,
                _ => continue,
            };
            out.add_key(TermKey { monomial: m, atoms: key.atoms.clone() }, kq);
        }
        if key.has_u_atoms() {
            let m = key.monomial.mul_var(u_dir, 1);
            for (cf, atoms) in atom_partials(key) {
                out.add_raw(q * cf, m.clone(), atoms);
            }
        }
    }
    out
}

pub fn total_derivative_n(e: &JetExpression, dir: Direction, n: u16) -> JetExpression {
    let mut out = e.clone();
    for _ in 0..n {
        out = total_derivative(&out, dir);
    }
    out
}

/// D_t^t D_x^x applied to `e`.
pub fn total_derivative_multi(e: &JetExpression, t: u16, x: u16) -> JetExpression {
    total_derivative_n(&total_derivative_n(e, Direction::X, x), Direction::T, t)
}

/// Full Euler operator E_u.
pub fn euler_operator(e: &JetExpression) -> JetExpression {
    let mut out = JetExpression::zero();
    for v in e.dependent_coordinates() {
        let (i, k) = v.orders().expect("dependent");
        let d = total_derivative_multi(&e.partial(v), i, k);
        if (i + k) % 2 == 0 {
            out += d;
        } else {
            out -= d;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EulerBase {
    /// `u` with x-derivatives only.
    UFullX,
    /// `u_t` with x-derivatives only.
    Ut,
    /// `u_x` with further x-derivatives only.
    Ux,
}

/// Restricted Euler operator over the family `base, D_x base, D_x^2 base, ...`.
pub fn restricted_euler(e: &JetExpression, base: EulerBase) -> JetExpression {
    let (t0, x0) = match base {
        EulerBase::UFullX => (0, 0),
        EulerBase::Ut => (1, 0),
        EulerBase::Ux => (0, 1),
    };
    let top = e
        .dependent_coordinates()
        .into_iter()
        .filter_map(|c| c.orders())
        .filter(|&(t, x)| t == t0 && x >= x0)
        .map(|(_, x)| x - x0)
        .max();
    let Some(top) = top else {
        return JetExpression::zero();
    };
    // Horner form: p_0 - D_x(p_1 - D_x(p_2 - ...)).
    let mut acc = JetExpression::zero();
    for k in (0..=top).rev() {
        let p = e.partial(JetCoordinate::deriv(t0, x0 + k));
        acc = &p - &total_derivative(&acc, Direction::X);
    }
    acc
}

/// Antiderivative with respect to one coordinate, other coordinates held fixed.
pub fn integrate(e: &JetExpression, w: JetCoordinate) -> Result<JetExpression, CalculusError> {
    let mut out = JetExpression::zero();
    for (key, q) in e.terms() {
        if w == JetCoordinate::u() && key.has_u_atoms() {
            let k = key.monomial.degree(w);
            let rest = key.monomial.without(w);
            let f = integrate_u_atoms(k, &key.atoms)?;
            out += f.mul_term(&TermKey { monomial: rest, atoms: Vec::new() }, q);
        } else {
            let k = key.monomial.degree(w);
            let m = key.monomial.with_degree(w, k + 1);
            out.add_key(TermKey { monomial: m, atoms: key.atoms.clone() }, q / rat(k as i64 + 1));
        }
    }
    Ok(out)
}

/// `∫ u^k * atoms du` for the supported kernel families.
fn integrate_u_atoms(k: u32, atoms: &[(KernelAtom, u32)]) -> Result<JetExpression, CalculusError> {
    let integrand = JetExpression::from_raw_term(Rational::one(), Monomial::var(JetCoordinate::u(), k), atoms.to_vec());
    let unsupported = || CalculusError::Unsupported(integrand.to_string());
    let dependent: Vec<&(KernelAtom, u32)> = atoms.iter().filter(|(a, _)| a.depends_on_u()).collect();
    let constant: Vec<(KernelAtom, u32)> = atoms.iter().filter(|(a, _)| !a.depends_on_u()).cloned().collect();
    let const_factor = JetExpression::from_raw_term(Rational::one(), Monomial::one(), constant);

    let pows: Vec<_> = dependent.iter().filter(|(a, _)| matches!(a, KernelAtom::Pow { .. })).collect();
    if !pows.is_empty() {
        if pows.len() != dependent.len() || pows.len() != 1 || k != 0 {
            return Err(unsupported());
        }
        let (KernelAtom::Pow { center, exponent }, 1) = pows[0] else {
            return Err(unsupported());
        };
        let e1 = exponent + Rational::one();
        if e1.is_zero() {
            return Err(unsupported());
        }
        let anti = JetExpression::atom(KernelAtom::Pow { center: center.clone(), exponent: e1.clone() }).scale(&e1.recip());
        return Ok(&anti * &const_factor);
    }

    // Exp and a single trig argument: solve for the antiderivative in a finite span.
    let mut exp_atom = None;
    let mut trig_arg = None;
    let (mut s, mut c) = (0u32, 0u32);
    for (a, p) in &dependent {
        match a {
            KernelAtom::Exp(_) => exp_atom = Some(a.clone()),
            KernelAtom::Sin(af) | KernelAtom::Cos(af) => {
                if trig_arg.as_ref().is_some_and(|t| t != af) {
                    return Err(unsupported());
                }
                trig_arg = Some(af.clone());
                if matches!(a, KernelAtom::Sin(_)) {
                    s = *p;
                } else {
                    c = *p;
                }
            }
            KernelAtom::Pow { .. } => unreachable!(),
        }
    }
    let mut columns = Vec::new();
    for j in 0..=k + 1 {
        for sp in 0..=1u32 {
            for cp in 0..=c + s + 1 {
                if trig_arg.is_none() && (sp > 0 || cp > 0) {
                    continue;
                }
                let mut at = Vec::new();
                if let Some(e) = &exp_atom {
                    at.push((e.clone(), 1));
                }
                if let Some(af) = &trig_arg {
                    if sp > 0 {
                        at.push((KernelAtom::Sin(af.clone()), sp));
                    }
                    if cp > 0 {
                        at.push((KernelAtom::Cos(af.clone()), cp));
                    }
                }
                columns.push(JetExpression::from_raw_term(Rational::one(), Monomial::var(JetCoordinate::u(), j), at));
            }
        }
    }
    let derivs: Vec<JetExpression> = columns.iter().map(|b| b.partial(JetCoordinate::u())).collect();
    let target = JetExpression::from_raw_term(Rational::one(), Monomial::var(JetCoordinate::u(), k), dependent.iter().map(|p| (*p).clone()).collect());
    let coeffs = crate::linsolve::solve_in_span(&derivs, &target).ok_or_else(unsupported)?;
    let mut anti = JetExpression::zero();
    for (b, q) in columns.iter().zip(coeffs) {
        anti += b.scale(&q);
    }
    Ok(&anti * &const_factor)
}

/// Returns θ with D_x θ == e, or the residual obstruction.
pub fn invert_total_x_derivative(e: &JetExpression) -> Result<JetExpression, CalculusError> {
    let mut rem = e.clone();
    let mut theta = JetExpression::zero();
    let top = rem.dependent_coordinates().iter().map(|c| c.x_order()).max().unwrap_or(0);
    for level in (1..=top).rev() {
        let mut t_orders: BTreeSet<u16> =
            rem.dependent_coordinates().into_iter().filter(|c| c.x_order() == level).map(|c| c.t_order()).collect();
        while let Some(i) = t_orders.pop_first() {
            let v = JetCoordinate::deriv(i, level);
            if !rem.depends_on(v) {
                continue;
            }
            let not_exact = |rem: &JetExpression| CalculusError::NotExact { residual: rem.clone() };
            if rem.degree_in(v) > 1 {
                return Err(not_exact(&rem));
            }
            let a = rem.coefficient_of(v, 1);
            if a.dependent_coordinates().iter().any(|c| c.x_order() >= level) {
                return Err(not_exact(&rem));
            }
            let w = JetCoordinate::deriv(i, level - 1);
            let th = integrate(&a, w).map_err(|_| not_exact(&rem))?;
            rem -= total_derivative(&th, Direction::X);
            theta += th;
            t_orders.extend(rem.dependent_coordinates().into_iter().filter(|c| c.x_order() == level).map(|c| c.t_order()).filter(|&t| t > i));
        }
        if rem.dependent_coordinates().iter().any(|c| c.x_order() >= level) {
            return Err(CalculusError::NotExact { residual: rem });
        }
    }
    if !rem.dependent_coordinates().is_empty() {
        return Err(CalculusError::NotExact { residual: rem });
    }
    theta += integrate(&rem, JetCoordinate::X).expect("polynomial in x");
    Ok(theta)
}

/// True when `a - b` is a total x-derivative.
pub fn equivalent_modulo_divergence(a: &JetExpression, b: &JetExpression) -> bool {
    invert_total_x_derivative(&(a - b)).is_ok()
}

/// Picks the reduction step for one term, if any: `(coordinate rank, θ piece)`.
fn reduction_for(key: &TermKey, q: &Rational) -> Option<((u16, JetCoordinate), JetExpression)> {
    let single = JetExpression::from_raw_term(q.clone(), key.monomial.clone(), key.atoms.clone());
    let deps: Vec<JetCoordinate> = single.dependent_coordinates().into_iter().collect();
    if deps.is_empty() {
        let th = integrate(&single, JetCoordinate::X).ok()?;
        return Some(((0, JetCoordinate::X), th));
    }
    let top = deps.iter().map(|c| c.x_order()).max()?;
    if top == 0 {
        return None;
    }
    let at_top: Vec<JetCoordinate> = deps.iter().copied().filter(|c| c.x_order() == top).collect();
    let [v] = at_top.as_slice() else {
        return None;
    };
    if key.monomial.degree(*v) != 1 {
        return None;
    }
    let (i, _) = v.orders()?;
    let rest = single.coefficient_of(*v, 1);
    let blocked = rest.dependent_coordinates().iter().any(|c| c.x_order() == top - 1 && c.t_order() != i);
    if blocked {
        return None;
    }
    let th = integrate(&rest, JetCoordinate::deriv(i, top - 1)).ok()?;
    Some(((top, *v), th))
}

/// Splits `e` into `core + D_x theta` with `core` free of reducible terms.
pub fn ibp_normal_form(e: &JetExpression) -> (JetExpression, JetExpression) {
    let mut core = e.clone();
    let mut theta = JetExpression::zero();
    loop {
        let mut best: Option<((u16, JetCoordinate), JetExpression)> = None;
        for (key, q) in core.terms() {
            if let Some((rank, th)) = reduction_for(key, q) {
                if best.as_ref().is_none_or(|(r, _)| rank.1 > r.1 || (rank.1 == r.1 && rank.0 > r.0)) {
                    best = Some((rank, th));
                }
            }
        }
        let Some((_, th)) = best else {
            return (core, theta);
        };
        core -= total_derivative(&th, Direction::X);
        theta += th;
    }
}
