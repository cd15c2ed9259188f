//! The multiplier condition E_u(G Λ) = 0 and its split into the solution-space
//! (adjoint-)symmetry equation plus the extra equations.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::calculus::{euler_operator, total_derivative};
use crate::jet::{Direction, JetCoordinate, JetExpression, Monomial, TermKey};
use crate::pde::{PdeSpec, Shape, SolutionChart};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DetSysError {
    #[error("multiplier may not depend on {0} for this equation")]
    Inadmissible(JetCoordinate),
    #[error("duplicate coordinate {0} in arity")]
    DuplicateArity(JetCoordinate),
}

/// Multi-index over the arity coordinates: how often Λ is differentiated by each.
pub type MultiIndex = Vec<u16>;

/// `Σ_α c_α · ∂^α Λ` with `Λ` an unknown function of the arity coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LambdaForm {
    arity: Arc<Vec<JetCoordinate>>,
    parts: BTreeMap<MultiIndex, JetExpression>,
}

impl LambdaForm {
    pub fn zero(arity: Arc<Vec<JetCoordinate>>) -> Self {
        LambdaForm { arity, parts: BTreeMap::new() }
    }

    /// The bare unknown Λ.
    pub fn unknown(arity: Arc<Vec<JetCoordinate>>) -> Self {
        let n = arity.len();
        let mut f = LambdaForm::zero(arity);
        f.parts.insert(vec![0; n], JetExpression::one());
        f
    }

    pub fn arity(&self) -> &[JetCoordinate] {
        &self.arity
    }

    pub fn parts(&self) -> &BTreeMap<MultiIndex, JetExpression> {
        &self.parts
    }

    pub fn is_zero(&self) -> bool {
        self.parts.is_empty()
    }

    fn add_part(&mut self, alpha: MultiIndex, c: JetExpression) {
        if c.is_zero() {
            return;
        }
        match self.parts.entry(alpha) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &LambdaForm) -> LambdaForm {
        let mut out = self.clone();
        for (a, c) in &other.parts {
            out.add_part(a.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &LambdaForm) -> LambdaForm {
        let mut out = self.clone();
        for (a, c) in &other.parts {
            out.add_part(a.clone(), -c);
        }
        out
    }

    pub fn mul_expr(&self, e: &JetExpression) -> LambdaForm {
        let mut out = LambdaForm::zero(self.arity.clone());
        for (a, c) in &self.parts {
            out.add_part(a.clone(), c * e);
        }
        out
    }

    fn raised(alpha: &MultiIndex, j: usize) -> MultiIndex {
        let mut b = alpha.clone();
        b[j] += 1;
        b
    }

    pub fn partial(&self, w: JetCoordinate) -> LambdaForm {
        let mut out = LambdaForm::zero(self.arity.clone());
        let slot = self.arity.iter().position(|a| *a == w);
        for (alpha, c) in &self.parts {
            out.add_part(alpha.clone(), c.partial(w));
            if let Some(j) = slot {
                out.add_part(Self::raised(alpha, j), c.clone());
            }
        }
        out
    }

    pub fn total_derivative(&self, dir: Direction) -> LambdaForm {
        let mut out = LambdaForm::zero(self.arity.clone());
        let chain: Vec<JetExpression> = self
            .arity
            .iter()
            .map(|a| match (a, dir) {
                (JetCoordinate::T, Direction::T) | (JetCoordinate::X, Direction::X) => JetExpression::one(),
                (JetCoordinate::U { .. }, _) => JetExpression::coord(a.raised(dir).expect("dependent")),
                _ => JetExpression::zero(),
            })
            .collect();
        for (alpha, c) in &self.parts {
            out.add_part(alpha.clone(), total_derivative(c, dir));
            for (j, d) in chain.iter().enumerate() {
                if !d.is_zero() {
                    out.add_part(Self::raised(alpha, j), c * d);
                }
            }
        }
        out
    }

    /// Coordinates the form depends on, through coefficients or through Λ.
    pub fn dependent_coordinates(&self) -> Vec<JetCoordinate> {
        let mut set = std::collections::BTreeSet::new();
        for c in self.parts.values() {
            set.extend(c.dependent_coordinates());
        }
        if !self.parts.is_empty() {
            set.extend(self.arity.iter().copied().filter(|c| c.is_dependent()));
        }
        set.into_iter().collect()
    }

    /// Full Euler operator, with Λ differentiated by the chain rule.
    pub fn euler(&self) -> LambdaForm {
        let mut out = LambdaForm::zero(self.arity.clone());
        for v in self.dependent_coordinates() {
            let (i, k) = v.orders().expect("dependent");
            let mut d = self.partial(v);
            for _ in 0..k {
                d = d.total_derivative(Direction::X);
            }
            for _ in 0..i {
                d = d.total_derivative(Direction::T);
            }
            out = if (i + k) % 2 == 0 { out.add(&d) } else { out.sub(&d) };
        }
        out
    }

    pub fn map_coefficients(&self, f: impl Fn(&JetExpression) -> JetExpression) -> LambdaForm {
        let mut out = LambdaForm::zero(self.arity.clone());
        for (a, c) in &self.parts {
            out.add_part(a.clone(), f(c));
        }
        out
    }

    /// `Σ_α c_α ∂^α Λ` for a concrete `Λ`.
    pub fn instantiate(&self, lambda: &JetExpression) -> JetExpression {
        let mut cache = HashMap::new();
        self.instantiate_cached(lambda, &mut cache)
    }

    fn instantiate_cached(&self, lambda: &JetExpression, cache: &mut HashMap<MultiIndex, JetExpression>) -> JetExpression {
        let mut out = JetExpression::zero();
        for (alpha, c) in &self.parts {
            let d = derivative_of(lambda, &self.arity, alpha, cache);
            if !d.is_zero() {
                out += c * &d;
            }
        }
        out
    }
}

/// `∂^α Λ`, memoized by multi-index.
fn derivative_of(
    lambda: &JetExpression,
    arity: &[JetCoordinate],
    alpha: &MultiIndex,
    cache: &mut HashMap<MultiIndex, JetExpression>,
) -> JetExpression {
    if let Some(d) = cache.get(alpha) {
        return d.clone();
    }
    let d = match alpha.iter().position(|&k| k > 0) {
        None => lambda.clone(),
        Some(j) => {
            let mut lower = alpha.clone();
            lower[j] -= 1;
            derivative_of(lambda, arity, &lower, cache).partial(arity[j])
        }
    };
    cache.insert(alpha.clone(), d.clone());
    d
}

impl fmt::Display for LambdaForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for (alpha, c) in &self.parts {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            let mut sub = Vec::new();
            for (j, k) in alpha.iter().enumerate() {
                for _ in 0..*k {
                    sub.push(self.arity[j].name());
                }
            }
            let sym = if sub.is_empty() { "L".to_string() } else { format!("L[{}]", sub.join(",")) };
            write!(f, "({})*{}", c, sym)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DeterminingEquation {
    /// Monomial in the placeholder coordinates; the empty monomial marks the solution-space equation.
    pub signature: Monomial,
    pub label: String,
    pub form: LambdaForm,
}

#[derive(Clone, Debug)]
pub struct DeterminingSystem {
    pub pde: PdeSpec,
    pub arity: Vec<JetCoordinate>,
    pub equations: Vec<DeterminingEquation>,
    /// Coefficient groups checked for identical vanishing, with the outcome.
    pub vanishing_checks: Vec<(String, bool)>,
}

impl DeterminingSystem {
    /// Every equation evaluated at a concrete Λ.
    pub fn instantiate(&self, lambda: &JetExpression) -> Vec<JetExpression> {
        let mut cache = HashMap::new();
        self.equations.iter().map(|e| e.form.instantiate_cached(lambda, &mut cache)).collect()
    }

    pub fn is_satisfied_by(&self, lambda: &JetExpression) -> bool {
        self.instantiate(lambda).iter().all(JetExpression::is_zero)
    }
}

/// Human-readable name of the placeholder standing for a derivative of G.
pub fn placeholder_label(pde: &PdeSpec, v: JetCoordinate) -> String {
    let (i, k) = v.orders().expect("dependent");
    let (lt, lx) = pde.leading.orders().expect("dependent");
    let (a, b) = (i - lt, k - lx);
    let mut parts = Vec::new();
    match a {
        0 => {}
        1 => parts.push("D_t".to_string()),
        n => parts.push(format!("D_t^{n}")),
    }
    match b {
        0 => {}
        1 => parts.push("D_x".to_string()),
        n => parts.push(format!("D_x^{n}")),
    }
    parts.push("G".into());
    parts.join(" ")
}

fn signature_label(pde: &PdeSpec, sig: &Monomial) -> String {
    if sig.is_one() {
        return "1".into();
    }
    sig.factors()
        .iter()
        .map(|(v, k)| {
            let l = placeholder_label(pde, *v);
            match (*k, l.contains(' ')) {
                (1, _) => l,
                (k, true) => format!("({l})^{k}"),
                (k, false) => format!("{l}^{k}"),
            }
        })
        .collect::<Vec<_>>()
        .join("*")
}

fn check_admissible(pde: &PdeSpec, coords: impl IntoIterator<Item = JetCoordinate>) -> Result<(), DetSysError> {
    for c in coords {
        if !pde.is_solution_coordinate(c) {
            return Err(DetSysError::Inadmissible(c));
        }
    }
    Ok(())
}

/// E_u(G Λ) for a concrete Λ, fully expanded off the solution space.
pub fn determining_expression(pde: &PdeSpec, lambda: &JetExpression) -> Result<JetExpression, DetSysError> {
    check_admissible(pde, lambda.dependent_coordinates())?;
    Ok(euler_operator(&(&pde.g() * lambda)))
}

/// Exact change of variables: each off-shell coordinate `v` becomes `P_v + F_v(Ψ)`,
/// with the symbol `v` itself reused as the placeholder `P_v` for `D^α G`.
struct Placeholders<'a> {
    pde: &'a PdeSpec,
    psi: HashMap<JetCoordinate, JetExpression>,
}

impl<'a> Placeholders<'a> {
    fn psi(&mut self, v: JetCoordinate) -> JetExpression {
        if let Some(p) = self.psi.get(&v) {
            return p.clone();
        }
        let (i, k) = v.orders().expect("dependent");
        let (lt, lx) = self.pde.leading.orders().expect("dependent");
        let raw = crate::calculus::total_derivative_multi(&self.pde.rhs, i - lt, k - lx);
        let inner = self.substitute(&raw);
        let p = &JetExpression::coord(v) + &inner;
        self.psi.insert(v, p.clone());
        p
    }

    fn substitute(&mut self, e: &JetExpression) -> JetExpression {
        let off: Vec<JetCoordinate> =
            e.dependent_coordinates().into_iter().filter(|c| !self.pde.is_solution_coordinate(*c)).collect();
        if off.is_empty() {
            return e.clone();
        }
        let map: BTreeMap<JetCoordinate, JetExpression> = off.into_iter().map(|c| (c, self.psi(c))).collect();
        e.substitute_all(&map).expect("dependent-coordinate substitution")
    }
}

/// Builds the split determining system for a multiplier depending on `arity`.
pub fn split_determining_system(pde: &PdeSpec, arity: &[JetCoordinate]) -> Result<DeterminingSystem, DetSysError> {
    check_admissible(pde, arity.iter().copied())?;
    for (i, c) in arity.iter().enumerate() {
        if arity[..i].contains(c) {
            return Err(DetSysError::DuplicateArity(*c));
        }
    }
    let arity_arc = Arc::new(arity.to_vec());
    let e = LambdaForm::unknown(arity_arc.clone()).mul_expr(&pde.g()).euler();

    let mut ph = Placeholders { pde, psi: HashMap::new() };
    let substituted: Vec<(MultiIndex, JetExpression)> = e.parts.iter().map(|(a, c)| (a.clone(), ph.substitute(c))).collect();

    let mut groups: BTreeMap<Monomial, LambdaForm> = BTreeMap::new();
    for (alpha, c) in substituted {
        let mut split: BTreeMap<Monomial, JetExpression> = BTreeMap::new();
        for (key, q) in c.terms() {
            let (sig, rest): (Vec<_>, Vec<_>) =
                key.monomial.factors().iter().partition(|(v, _)| !pde.is_solution_coordinate(*v));
            let sig = Monomial::from_powers(sig);
            let rest = Monomial::from_powers(rest);
            split
                .entry(sig)
                .or_default()
                .add_key(TermKey { monomial: rest, atoms: key.atoms.clone() }, q.clone());
        }
        for (sig, coeff) in split {
            let g = groups.entry(sig).or_insert_with(|| LambdaForm::zero(arity_arc.clone()));
            g.add_part(alpha.clone(), coeff);
        }
    }
    groups.retain(|_, f| !f.is_zero());

    let mut vanishing_checks = Vec::new();
    if pde.shape() == Shape::Wave {
        let (lt, lx) = pde.leading.orders().expect("dependent");
        let g_sym = JetCoordinate::deriv(lt, lx);
        for sig in [
            Monomial::var(JetCoordinate::deriv(lt, lx + 1), 1),
            Monomial::var(JetCoordinate::deriv(lt + 1, lx), 1),
            Monomial::var(g_sym, 2),
        ] {
            vanishing_checks.push((signature_label(pde, &sig), !groups.contains_key(&sig)));
        }
    }

    let mut sigs: Vec<Monomial> = groups.keys().cloned().collect();
    sigs.sort_by(|a, b| a.total_degree().cmp(&b.total_degree()).then(a.cmp(b)));
    let equations = sigs
        .into_iter()
        .map(|sig| {
            let form = groups.remove(&sig).expect("present");
            DeterminingEquation { label: signature_label(pde, &sig), signature: sig, form }
        })
        .collect();
    Ok(DeterminingSystem { pde: pde.clone(), arity: arity.to_vec(), equations, vanishing_checks })
}

/// Evaluates a system at many concrete multipliers in parallel.
pub fn instantiate_many(system: &DeterminingSystem, lambdas: &[JetExpression]) -> Vec<Vec<JetExpression>> {
    lambdas.par_iter().map(|l| system.instantiate(l)).collect()
}

/// Checks the solution-space equation directly through the chart (used in tests and reports).
pub fn on_shell_residual(pde: &PdeSpec, lambda: &JetExpression) -> Result<JetExpression, DetSysError> {
    let chart = SolutionChart::new(pde);
    Ok(chart.reduce(&determining_expression(pde, lambda)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::parse_expression;
    use crate::pde::parse_pde;

    fn p(s: &str) -> JetExpression {
        parse_expression(s).unwrap()
    }

    fn pde(s: &str) -> PdeSpec {
        parse_pde(s, &BTreeMap::new()).unwrap()
    }

    fn coords(list: &str) -> Vec<JetCoordinate> {
        list.split(',')
            .map(|s| match s.trim() {
                "t" => JetCoordinate::T,
                "x" => JetCoordinate::X,
                other => crate::jet::parse_expression(other).unwrap().dependent_coordinates().into_iter().next().unwrap(),
            })
            .collect()
    }

    #[test]
    fn trivial_multipliers_of_kdv() {
        let kdv = pde("u_t + u*u_x + u_xxx = 0");
        assert!(determining_expression(&kdv, &JetExpression::one()).unwrap().is_zero());
        assert!(determining_expression(&kdv, &p("u")).unwrap().is_zero());
        assert!(!determining_expression(&kdv, &p("u_x")).unwrap().is_zero());
        assert!(determining_expression(&kdv, &p("u_t")).is_err());
    }

    #[test]
    fn symbolic_form_instantiates_to_direct_computation() {
        let kdv = pde("u_t + u*u_x + u_xxx = 0");
        let arity = Arc::new(coords("t,x,u,u_x,u_xx"));
        let form = LambdaForm::unknown(arity).mul_expr(&kdv.g()).euler();
        for l in ["u_x", "t*u_xx + x*u^2", "u_xx*u_x + t"] {
            assert_eq!(form.instantiate(&p(l)), determining_expression(&kdv, &p(l)).unwrap(), "{l}");
        }
    }

    #[test]
    fn kdv_split_has_adjoint_equation_first() {
        let kdv = pde("u_t + u*u_x + u_xxx = 0");
        let sys = split_determining_system(&kdv, &coords("t,x,u,u_x,u_xx")).unwrap();
        assert!(sys.equations[0].signature.is_one());
        assert!(sys.equations.len() >= 2);
        for l in ["1", "u", "u_xx + 1/2*u^2", "t*u - x"] {
            assert!(sys.is_satisfied_by(&p(l)), "{l}");
        }
        assert!(!sys.is_satisfied_by(&p("u_x")));
        assert!(!sys.is_satisfied_by(&p("u^2")));
    }

    #[test]
    fn zero_multiplier_satisfies_everything() {
        let kdv = pde("u_t + u*u_x + u_xxx = 0");
        let sys = split_determining_system(&kdv, &coords("t,x,u,u_x")).unwrap();
        assert!(sys.instantiate(&JetExpression::zero()).iter().all(|e| e.is_zero()));
    }

    #[test]
    fn arity_must_be_on_shell() {
        let kdv = pde("u_t + u*u_x + u_xxx = 0");
        assert_eq!(
            split_determining_system(&kdv, &coords("t,x,u,u_t")).unwrap_err(),
            DetSysError::Inadmissible(JetCoordinate::deriv(1, 0))
        );
    }
}
