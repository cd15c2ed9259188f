//! Exact expressions over jet coordinates `t, x, u, u_x, u_t, ...` and kernel atoms.

mod atom;
mod eval;
mod parse;
mod render;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_traits::{One, Zero};
use thiserror::Error;

use crate::rational::{rat, Rational};

pub use atom::{Affine, KernelAtom};
pub use eval::CompiledExpr;
pub use parse::{parse_expression, parse_expression_with, ParseError, ParseErrorKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("self-referential substitution of {0}")]
    SelfReference(JetCoordinate),
    #[error("substitution into kernel atom is not representable: {0}")]
    NotRepresentable(String),
    #[error("singular kernel atom {atom} at u = {at}")]
    Singular { atom: String, at: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    T,
    X,
}

/// An independent variable or a derivative `u_{t^i x^k}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum JetCoordinate {
    T,
    X,
    U { t: u16, x: u16 },
}

impl JetCoordinate {
    pub const fn u() -> Self {
        JetCoordinate::U { t: 0, x: 0 }
    }

    pub const fn deriv(t: u16, x: u16) -> Self {
        JetCoordinate::U { t, x }
    }

    pub fn is_dependent(self) -> bool {
        matches!(self, JetCoordinate::U { .. })
    }

    pub fn orders(self) -> Option<(u16, u16)> {
        match self {
            JetCoordinate::U { t, x } => Some((t, x)),
            _ => None,
        }
    }

    pub fn total_order(self) -> u16 {
        self.orders().map_or(0, |(t, x)| t + x)
    }

    pub fn t_order(self) -> u16 {
        self.orders().map_or(0, |(t, _)| t)
    }

    pub fn x_order(self) -> u16 {
        self.orders().map_or(0, |(_, x)| x)
    }

    /// The coordinate one step higher in `dir`, for dependent coordinates.
    pub fn raised(self, dir: Direction) -> Option<JetCoordinate> {
        match (self, dir) {
            (JetCoordinate::U { t, x }, Direction::T) => Some(JetCoordinate::U { t: t + 1, x }),
            (JetCoordinate::U { t, x }, Direction::X) => Some(JetCoordinate::U { t, x: x + 1 }),
            _ => None,
        }
    }

    /// True when `self` is `other` differentiated zero or more times.
    pub fn is_derivative_of(self, other: JetCoordinate) -> bool {
        match (self, other) {
            (JetCoordinate::U { t, x }, JetCoordinate::U { t: t0, x: x0 }) => t >= t0 && x >= x0,
            _ => self == other,
        }
    }

    fn sort_key(self) -> (u16, u16, u8) {
        match self {
            JetCoordinate::T => (0, 0, 0),
            JetCoordinate::X => (0, 0, 1),
            JetCoordinate::U { t, x } => (t + x, t, 2),
        }
    }

    pub fn name(self) -> String {
        match self {
            JetCoordinate::T => "t".into(),
            JetCoordinate::X => "x".into(),
            JetCoordinate::U { t: 0, x: 0 } => "u".into(),
            JetCoordinate::U { t, x } => format!("u_{}{}", "t".repeat(t as usize), "x".repeat(x as usize)),
        }
    }
}

impl Ord for JetCoordinate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for JetCoordinate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for JetCoordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Sorted product of coordinate powers, all powers positive.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(Vec<(JetCoordinate, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(c: JetCoordinate, k: u32) -> Self {
        if k == 0 {
            Monomial::one()
        } else {
            Monomial(vec![(c, k)])
        }
    }

    pub fn from_powers(iter: impl IntoIterator<Item = (JetCoordinate, u32)>) -> Self {
        let mut m = Monomial::one();
        for (c, k) in iter {
            m = m.mul_var(c, k);
        }
        m
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> &[(JetCoordinate, u32)] {
        &self.0
    }

    pub fn degree(&self, c: JetCoordinate) -> u32 {
        self.0.iter().find(|(v, _)| *v == c).map_or(0, |(_, k)| *k)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|(_, k)| k).sum()
    }

    pub fn dependent_degree(&self) -> u32 {
        self.0.iter().filter(|(c, _)| c.is_dependent()).map(|(_, k)| k).sum()
    }

    pub fn without(&self, c: JetCoordinate) -> Monomial {
        Monomial(self.0.iter().filter(|(v, _)| *v != c).cloned().collect())
    }

    pub fn with_degree(&self, c: JetCoordinate, k: u32) -> Monomial {
        self.without(c).mul_var(c, k)
    }

    pub fn mul_var(&self, c: JetCoordinate, k: u32) -> Monomial {
        if k == 0 {
            return self.clone();
        }
        let mut v = self.0.clone();
        match v.binary_search_by(|(x, _)| x.cmp(&c)) {
            Ok(i) => v[i].1 += k,
            Err(i) => v.insert(i, (c, k)),
        }
        Monomial(v)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    pub fn max_coordinate(&self) -> Option<JetCoordinate> {
        self.0.last().map(|(c, _)| *c)
    }
}

/// Structural identity of a term: monomial plus canonical atom product.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermKey {
    pub monomial: Monomial,
    pub atoms: Vec<(KernelAtom, u32)>,
}

impl TermKey {
    pub fn has_u_atoms(&self) -> bool {
        self.atoms.iter().any(|(a, _)| a.depends_on_u())
    }

    pub fn depends_on(&self, c: JetCoordinate) -> bool {
        self.monomial.degree(c) > 0 || (c == JetCoordinate::u() && self.has_u_atoms())
    }
}

/// Normalized exact expression. Immutable in spirit: every operation returns a new value.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JetExpression {
    terms: BTreeMap<TermKey, Rational>,
}

impl JetExpression {
    pub fn zero() -> Self {
        JetExpression::default()
    }

    pub fn one() -> Self {
        JetExpression::constant(Rational::one())
    }

    pub fn constant(q: Rational) -> Self {
        let mut e = JetExpression::zero();
        e.add_key(TermKey::default(), q);
        e
    }

    pub fn integer(n: i64) -> Self {
        JetExpression::constant(rat(n))
    }

    pub fn coord(c: JetCoordinate) -> Self {
        JetExpression::monomial(Monomial::var(c, 1), Rational::one())
    }

    pub fn coord_pow(c: JetCoordinate, k: u32) -> Self {
        JetExpression::monomial(Monomial::var(c, k), Rational::one())
    }

    pub fn monomial(m: Monomial, q: Rational) -> Self {
        let mut e = JetExpression::zero();
        e.add_key(TermKey { monomial: m, atoms: Vec::new() }, q);
        e
    }

    pub fn atom(a: KernelAtom) -> Self {
        let mut e = JetExpression::zero();
        e.add_raw(Rational::one(), Monomial::one(), vec![(a, 1)]);
        e
    }

    /// Builds an expression from an arbitrary (possibly non-canonical) term.
    pub fn from_raw_term(q: Rational, m: Monomial, atoms: Vec<(KernelAtom, u32)>) -> Self {
        let mut e = JetExpression::zero();
        e.add_raw(q, m, atoms);
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TermKey, &Rational)> {
        self.terms.iter()
    }

    pub fn into_terms(self) -> impl Iterator<Item = (TermKey, Rational)> {
        self.terms.into_iter()
    }

    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (k, q) = self.terms.iter().next()?;
                (k.monomial.is_one() && k.atoms.is_empty()).then(|| q.clone())
            }
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.as_constant().is_some()
    }

    /// Adds a canonical term key.
    pub(crate) fn add_key(&mut self, key: TermKey, q: Rational) {
        if q.is_zero() {
            return;
        }
        match self.terms.entry(key) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(q);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += q;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    /// Adds a term whose atom product may be non-canonical.
    pub(crate) fn add_raw(&mut self, q: Rational, m: Monomial, atoms: Vec<(KernelAtom, u32)>) {
        if atoms.is_empty() {
            self.add_key(TermKey { monomial: m, atoms }, q);
        } else {
            for (k, c) in atom::normalize_term(q, m, atoms) {
                self.add_key(k, c);
            }
        }
    }

    pub fn scale(&self, q: &Rational) -> JetExpression {
        if q.is_zero() {
            return JetExpression::zero();
        }
        JetExpression { terms: self.terms.iter().map(|(k, c)| (k.clone(), c * q)).collect() }
    }

    /// Multiplies by a single term.
    pub fn mul_term(&self, key: &TermKey, q: &Rational) -> JetExpression {
        let mut out = JetExpression::zero();
        for (k, c) in &self.terms {
            let m = k.monomial.mul(&key.monomial);
            if k.atoms.is_empty() && key.atoms.is_empty() {
                out.add_key(TermKey { monomial: m, atoms: Vec::new() }, c * q);
            } else {
                let mut atoms = k.atoms.clone();
                atoms.extend(key.atoms.iter().cloned());
                out.add_raw(c * q, m, atoms);
            }
        }
        out
    }

    pub fn mul_monomial(&self, m: &Monomial) -> JetExpression {
        self.mul_term(&TermKey { monomial: m.clone(), atoms: Vec::new() }, &Rational::one())
    }

    pub fn pow(&self, k: u32) -> JetExpression {
        let mut acc = JetExpression::one();
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// All coordinates the expression depends on (`u` included when atoms depend on it).
    pub fn coordinates(&self) -> BTreeSet<JetCoordinate> {
        let mut out = BTreeSet::new();
        for k in self.terms.keys() {
            for (c, _) in k.monomial.factors() {
                out.insert(*c);
            }
            if k.has_u_atoms() {
                out.insert(JetCoordinate::u());
            }
        }
        out
    }

    pub fn dependent_coordinates(&self) -> BTreeSet<JetCoordinate> {
        self.coordinates().into_iter().filter(|c| c.is_dependent()).collect()
    }

    pub fn depends_on(&self, c: JetCoordinate) -> bool {
        self.terms.keys().any(|k| k.depends_on(c))
    }

    pub fn has_atoms(&self) -> bool {
        self.terms.keys().any(|k| !k.atoms.is_empty())
    }

    /// Largest `(t_order, x_order)` among dependent coordinates, `(0, 0)` for none.
    pub fn maximal_order(&self) -> (u16, u16) {
        self.dependent_coordinates()
            .into_iter()
            .max()
            .and_then(JetCoordinate::orders)
            .unwrap_or((0, 0))
    }

    pub fn degree_in(&self, c: JetCoordinate) -> u32 {
        self.terms.keys().map(|k| k.monomial.degree(c)).max().unwrap_or(0)
    }

    /// Coefficient of `c^k` treating `c` as a polynomial variable (atoms ignored).
    pub fn coefficient_of(&self, c: JetCoordinate, k: u32) -> JetExpression {
        let mut out = JetExpression::zero();
        for (key, q) in &self.terms {
            if key.monomial.degree(c) == k {
                out.add_key(TermKey { monomial: key.monomial.without(c), atoms: key.atoms.clone() }, q.clone());
            }
        }
        out
    }

    /// Splits into `(terms satisfying pred, the rest)`.
    pub fn partition(&self, pred: impl Fn(&TermKey) -> bool) -> (JetExpression, JetExpression) {
        let mut yes = JetExpression::zero();
        let mut no = JetExpression::zero();
        for (k, q) in &self.terms {
            if pred(k) {
                yes.terms.insert(k.clone(), q.clone());
            } else {
                no.terms.insert(k.clone(), q.clone());
            }
        }
        (yes, no)
    }

    /// Partial derivative with respect to one coordinate, atoms included for `u`.
    pub fn partial(&self, c: JetCoordinate) -> JetExpression {
        let mut out = JetExpression::zero();
        let is_u = c == JetCoordinate::u();
        for (key, q) in &self.terms {
            let d = key.monomial.degree(c);
            if d > 0 {
                let m = key.monomial.with_degree(c, d - 1);
                out.add_raw(q * rat(d as i64), m, key.atoms.clone());
            }
            if is_u {
                for (cf, atoms) in atom_partials(key) {
                    out.add_raw(q * cf, key.monomial.clone(), atoms);
                }
            }
        }
        out
    }

    /// Replaces `target` by `replacement` everywhere.
    pub fn substitute(&self, target: JetCoordinate, replacement: &JetExpression) -> Result<JetExpression, ExprError> {
        if replacement.coordinates().iter().any(|c| c.is_derivative_of(target)) {
            return Err(ExprError::SelfReference(target));
        }
        let mut map = BTreeMap::new();
        map.insert(target, replacement.clone());
        self.substitute_all(&map)
    }

    /// Simultaneous substitution. Atoms depending on `u` accept only a constant replacement for `u`.
    pub fn substitute_all(&self, map: &BTreeMap<JetCoordinate, JetExpression>) -> Result<JetExpression, ExprError> {
        let mut cache: HashMap<(JetCoordinate, u32), JetExpression> = HashMap::new();
        let u_value = map.get(&JetCoordinate::u()).map(|r| r.as_constant());
        let mut out = JetExpression::zero();
        for (key, q) in &self.terms {
            let mut kept = Monomial::one();
            let mut factor = JetExpression::one();
            let mut replaced = false;
            for &(c, k) in key.monomial.factors() {
                match map.get(&c) {
                    Some(r) => {
                        replaced = true;
                        let p = cache.entry((c, k)).or_insert_with(|| r.pow(k)).clone();
                        factor = &factor * &p;
                    }
                    None => kept = kept.mul_var(c, k),
                }
            }
            let mut atoms = key.atoms.clone();
            let mut atom_factor = Rational::one();
            if key.has_u_atoms() {
                if let Some(uv) = &u_value {
                    let Some(uv) = uv else {
                        return Err(ExprError::NotRepresentable(format!(
                            "u -> {} inside kernel atoms",
                            map[&JetCoordinate::u()]
                        )));
                    };
                    let (q2, a2) = atoms_at(&atoms, uv)?;
                    atom_factor = q2;
                    atoms = a2;
                    replaced = true;
                }
            }
            if !replaced {
                out.add_key(key.clone(), q.clone());
                continue;
            }
            let head = JetExpression::from_raw_term(q * atom_factor, kept, atoms);
            out += &(&head * &factor);
        }
        Ok(out)
    }

    /// Evaluates with a callback for coordinate values.
    pub fn evaluate(&self, value: &dyn Fn(JetCoordinate) -> f64) -> f64 {
        let u = value(JetCoordinate::u());
        self.terms
            .iter()
            .map(|(k, q)| {
                let mut v = crate::rational::to_f64(q);
                for &(c, p) in k.monomial.factors() {
                    v *= value(c).powi(p as i32);
                }
                for (a, p) in &k.atoms {
                    v *= a.eval(u).powi(*p as i32);
                }
                v
            })
            .sum()
    }
}

/// d/du of the atom product of `key` as a list of raw products.
pub(crate) fn atom_partials(key: &TermKey) -> Vec<(Rational, Vec<(KernelAtom, u32)>)> {
    let mut out = Vec::new();
    for (i, (a, k)) in key.atoms.iter().enumerate() {
        if !a.depends_on_u() {
            continue;
        }
        let (cf, da) = a.derivative();
        let mut atoms: Vec<(KernelAtom, u32)> = Vec::with_capacity(key.atoms.len() + 1);
        for (j, (b, kb)) in key.atoms.iter().enumerate() {
            if j == i {
                if *kb > 1 {
                    atoms.push((b.clone(), kb - 1));
                }
            } else {
                atoms.push((b.clone(), *kb));
            }
        }
        if let Some(da) = da {
            atoms.push((da, 1));
        }
        out.push((cf * rat(*k as i64), atoms));
    }
    out
}

/// Evaluates u-dependent atoms at the constant `u = uv`.
fn atoms_at(atoms: &[(KernelAtom, u32)], uv: &Rational) -> Result<(Rational, Vec<(KernelAtom, u32)>), ExprError> {
    let mut q = Rational::one();
    let mut out = Vec::new();
    for (a, k) in atoms {
        match a {
            KernelAtom::Exp(af) if !af.is_constant() => out.push((KernelAtom::Exp(Affine::new(Rational::zero(), af.at(uv))), *k)),
            KernelAtom::Sin(af) if !af.is_constant() => out.push((KernelAtom::Sin(Affine::new(Rational::zero(), af.at(uv))), *k)),
            KernelAtom::Cos(af) if !af.is_constant() => out.push((KernelAtom::Cos(Affine::new(Rational::zero(), af.at(uv))), *k)),
            KernelAtom::Pow { center, exponent } => {
                let base = uv - center;
                let singular = || ExprError::Singular { atom: render::atom_string(a), at: crate::rational::render(uv) };
                if base.is_zero() && exponent < &Rational::zero() {
                    return Err(singular());
                }
                let v = crate::rational::rational_power(&base, &(exponent * rat(*k as i64))).ok_or_else(|| {
                    ExprError::NotRepresentable(format!("{} at u = {}", render::atom_string(a), crate::rational::render(uv)))
                })?;
                q *= v;
            }
            other => out.push((other.clone(), *k)),
        }
    }
    Ok((q, out))
}

impl fmt::Display for JetExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render::render(self))
    }
}

impl Neg for &JetExpression {
    type Output = JetExpression;
    fn neg(self) -> JetExpression {
        JetExpression { terms: self.terms.iter().map(|(k, q)| (k.clone(), -q.clone())).collect() }
    }
}

impl Neg for JetExpression {
    type Output = JetExpression;
    fn neg(mut self) -> JetExpression {
        for q in self.terms.values_mut() {
            *q = -q.clone();
        }
        self
    }
}

impl AddAssign<&JetExpression> for JetExpression {
    fn add_assign(&mut self, rhs: &JetExpression) {
        for (k, q) in &rhs.terms {
            self.add_key(k.clone(), q.clone());
        }
    }
}

impl AddAssign<JetExpression> for JetExpression {
    fn add_assign(&mut self, rhs: JetExpression) {
        if self.terms.is_empty() {
            *self = rhs;
            return;
        }
        for (k, q) in rhs.terms {
            self.add_key(k, q);
        }
    }
}

impl SubAssign<&JetExpression> for JetExpression {
    fn sub_assign(&mut self, rhs: &JetExpression) {
        for (k, q) in &rhs.terms {
            self.add_key(k.clone(), -q.clone());
        }
    }
}

impl SubAssign<JetExpression> for JetExpression {
    fn sub_assign(&mut self, rhs: JetExpression) {
        for (k, q) in rhs.terms {
            self.add_key(k, -q);
        }
    }
}

impl Add for &JetExpression {
    type Output = JetExpression;
    fn add(self, rhs: &JetExpression) -> JetExpression {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &JetExpression {
    type Output = JetExpression;
    fn sub(self, rhs: &JetExpression) -> JetExpression {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Mul for &JetExpression {
    type Output = JetExpression;
    fn mul(self, rhs: &JetExpression) -> JetExpression {
        let (small, big) = if self.len() <= rhs.len() { (self, rhs) } else { (rhs, self) };
        let mut out = JetExpression::zero();
        for (k, q) in &small.terms {
            out += big.mul_term(k, q);
        }
        out
    }
}

macro_rules! owned_ops {
    ($tr:ident, $m:ident) => {
        impl $tr for JetExpression {
            type Output = JetExpression;
            fn $m(self, rhs: JetExpression) -> JetExpression {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&JetExpression> for JetExpression {
            type Output = JetExpression;
            fn $m(self, rhs: &JetExpression) -> JetExpression {
                (&self).$m(rhs)
            }
        }
        impl $tr<JetExpression> for &JetExpression {
            type Output = JetExpression;
            fn $m(self, rhs: JetExpression) -> JetExpression {
                self.$m(&rhs)
            }
        }
    };
}

owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);

impl From<JetCoordinate> for JetExpression {
    fn from(c: JetCoordinate) -> Self {
        JetExpression::coord(c)
    }
}

impl From<Rational> for JetExpression {
    fn from(q: Rational) -> Self {
        JetExpression::constant(q)
    }
}

/// Re-canonicalizes a collection of raw terms; identity on already normalized input.
pub fn normalize(e: &JetExpression) -> JetExpression {
    let mut out = JetExpression::zero();
    for (k, q) in e.terms() {
        out.add_raw(q.clone(), k.monomial.clone(), k.atoms.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn p(s: &str) -> JetExpression {
        parse_expression(s).unwrap()
    }

    #[test]
    fn coordinate_order() {
        let mut v = vec![JetCoordinate::deriv(1, 0), JetCoordinate::u(), JetCoordinate::X, JetCoordinate::deriv(0, 1), JetCoordinate::T];
        v.sort();
        assert_eq!(v, vec![JetCoordinate::T, JetCoordinate::X, JetCoordinate::u(), JetCoordinate::deriv(0, 1), JetCoordinate::deriv(1, 0)]);
    }

    #[test]
    fn merging_and_cancellation() {
        let u = JetExpression::coord(JetCoordinate::u());
        let ux = JetExpression::coord(JetCoordinate::deriv(0, 1));
        let e = &(&u * &ux) + &(&ux * &u);
        assert_eq!(e, p("2*u*u_x"));
        assert!((&u.scale(&rat(3)) - &u.scale(&rat(3))).is_zero());
    }

    #[test]
    fn sine_rewrite() {
        assert_eq!(p("sin(u)^3"), p("sin(u) - sin(u)*cos(u)^2"));
        assert_eq!(p("sin(u)^2 + cos(u)^2"), JetExpression::one());
    }

    #[test]
    fn substitution_examples() {
        let ut = JetCoordinate::deriv(1, 0);
        let e = p("u_t*u").substitute(ut, &p("-u*u_x - u_xxx")).unwrap();
        assert_eq!(e, p("-u^2*u_x - u*u_xxx"));
        assert_eq!(p("u_x^2").substitute(ut, &p("u")).unwrap(), p("u_x^2"));
        assert_eq!(p("u_t^2").substitute(ut, &p("2*u")).unwrap(), p("4*u^2"));
        assert!(matches!(p("u_t").substitute(ut, &p("u_tx")), Err(ExprError::SelfReference(_))));
    }

    #[test]
    fn substitution_into_atoms() {
        let e = p("exp(u) + pow(u - 1, -2)");
        let r = e.substitute(JetCoordinate::u(), &JetExpression::integer(3)).unwrap();
        assert_eq!(r, &p("exp(3)") + &JetExpression::constant(ratio(1, 4)));
        let bad = p("pow(u, -1)").substitute(JetCoordinate::u(), &JetExpression::zero());
        assert!(matches!(bad, Err(ExprError::Singular { .. })));
    }

    #[test]
    fn partial_derivatives() {
        assert_eq!(p("u^2*u_x + exp(2*u)").partial(JetCoordinate::u()), p("2*u*u_x + 2*exp(2*u)"));
        assert_eq!(p("sin(u)*cos(u)").partial(JetCoordinate::u()), p("2*cos(u)^2 - 1"));
        assert_eq!(p("pow(u, 1/2)").partial(JetCoordinate::u()), p("1/2*pow(u, -1/2)"));
    }

    #[test]
    fn maximal_order_of_constant() {
        assert_eq!(JetExpression::integer(5).maximal_order(), (0, 0));
        assert_eq!(p("u_xx*u_t").maximal_order(), (0, 2));
        assert_eq!(p("u_tx + u_xxx").maximal_order(), (0, 3));
        assert_eq!(p("u_tx + u_xx").maximal_order(), (1, 1));
    }
}
