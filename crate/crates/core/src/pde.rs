//! Scalar PDEs in solved form `leading = rhs` and their solution charts.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Mutex;

use num_traits::Zero;
use thiserror::Error;

use crate::calculus::{total_derivative, total_derivative_multi};
use crate::jet::{parse_expression_with, Direction, JetCoordinate, JetExpression, ParseError};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PdeError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("expected exactly one `=` in `{0}`")]
    MissingEquals(String),
    #[error("no admissible leading derivative (u_t, u_tt or u_tx with constant coefficient)")]
    NoLeadingDerivative,
    #[error("ambiguous leading derivative: {0}")]
    Ambiguous(String),
    #[error("right-hand side violates the exclusion rule for leading {leading}: contains {offender}")]
    ExclusionViolated { leading: JetCoordinate, offender: JetCoordinate },
    #[error("leading derivative must be u_t, u_tt or u_tx, got {0}")]
    BadLeading(JetCoordinate),
    #[error("expression uses {coordinate}, which is not a solution-space coordinate")]
    NotSolutionSpace { coordinate: JetCoordinate },
}

/// The three supported leading-derivative shapes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    /// `u_t = F(t, x, u, u_x, ...)`
    Evolution,
    /// `u_tt = F(t, x, u, u_t, u_x, ...)`
    Wave,
    /// `u_tx = F(x, u, u_x, ...)`
    Mixed,
}

impl Shape {
    pub fn of(leading: JetCoordinate) -> Option<Shape> {
        match leading.orders()? {
            (1, 0) => Some(Shape::Evolution),
            (2, 0) => Some(Shape::Wave),
            (1, 1) => Some(Shape::Mixed),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PdeSpec {
    pub leading: JetCoordinate,
    pub rhs: JetExpression,
    pub name: String,
    pub params: BTreeMap<String, Rational>,
}

impl PdeSpec {
    pub fn new(leading: JetCoordinate, rhs: JetExpression, name: impl Into<String>) -> Result<Self, PdeError> {
        let shape = Shape::of(leading).ok_or(PdeError::BadLeading(leading))?;
        let spec = PdeSpec { leading, rhs, name: name.into(), params: BTreeMap::new() };
        for c in spec.rhs.dependent_coordinates() {
            let ok = match shape {
                Shape::Evolution | Shape::Mixed => c.t_order() == 0,
                Shape::Wave => c.t_order() <= 1,
            };
            if !ok {
                return Err(PdeError::ExclusionViolated { leading, offender: c });
            }
        }
        Ok(spec)
    }

    pub fn shape(&self) -> Shape {
        Shape::of(self.leading).expect("validated")
    }

    /// G = leading - rhs.
    pub fn g(&self) -> JetExpression {
        &JetExpression::coord(self.leading) - &self.rhs
    }

    /// True for coordinates of the solution space (independent variables included).
    pub fn is_solution_coordinate(&self, c: JetCoordinate) -> bool {
        match c.orders() {
            None => true,
            Some((t, x)) => {
                let (lt, lx) = self.leading.orders().expect("dependent");
                !(t >= lt && x >= lx)
            }
        }
    }

    /// Fréchet derivative of G applied to `eta`.
    pub fn linearization(&self, eta: &JetExpression) -> JetExpression {
        let g = self.g();
        let mut out = JetExpression::zero();
        for v in g.dependent_coordinates() {
            let (i, k) = v.orders().expect("dependent");
            out += &g.partial(v) * &total_derivative_multi(eta, i, k);
        }
        out
    }

    /// Formal adjoint of the linearization applied to `omega`.
    pub fn adjoint_linearization(&self, omega: &JetExpression) -> JetExpression {
        let g = self.g();
        let mut out = JetExpression::zero();
        for v in g.dependent_coordinates() {
            let (i, k) = v.orders().expect("dependent");
            let d = total_derivative_multi(&(&g.partial(v) * omega), i, k);
            if (i + k) % 2 == 0 {
                out += d;
            } else {
                out -= d;
            }
        }
        out
    }
}

impl fmt::Display for PdeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.leading, self.rhs)
    }
}

/// Parses `lhs = rhs` and isolates the unique admissible leading derivative.
pub fn parse_pde(text: &str, params: &BTreeMap<String, Rational>) -> Result<PdeSpec, PdeError> {
    let mut parts = text.split('=');
    let (Some(lhs), Some(rhs), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(PdeError::MissingEquals(text.to_string()));
    };
    let l = parse_expression_with(lhs, params)?;
    let r = parse_expression_with(rhs, params).map_err(|mut e| {
        e.position += lhs.len() + 1;
        e
    })?;
    let g0 = &l - &r;
    let mut admissible = Vec::new();
    let mut violation = None;
    for lead in [JetCoordinate::deriv(1, 0), JetCoordinate::deriv(2, 0), JetCoordinate::deriv(1, 1)] {
        if g0.degree_in(lead) != 1 {
            continue;
        }
        let Some(coef) = g0.coefficient_of(lead, 1).as_constant() else {
            continue;
        };
        if coef.is_zero() {
            continue;
        }
        let rest = &g0 - &JetExpression::coord(lead).scale(&coef);
        let f = rest.scale(&(-coef.recip()));
        match PdeSpec::new(lead, f, text.trim()) {
            Ok(spec) => admissible.push(spec),
            Err(e) => violation = Some(e),
        }
    }
    match admissible.len() {
        1 => {
            let mut spec = admissible.pop().expect("one");
            spec.params = params.clone();
            Ok(spec)
        }
        0 => Err(violation.unwrap_or(PdeError::NoLeadingDerivative)),
        _ => Err(PdeError::Ambiguous(admissible.iter().map(|s| s.leading.name()).collect::<Vec<_>>().join(", "))),
    }
}

/// On-shell values of the leading derivative and its differential consequences.
pub struct SolutionChart<'a> {
    pde: &'a PdeSpec,
    cache: Mutex<HashMap<JetCoordinate, JetExpression>>,
}

impl<'a> SolutionChart<'a> {
    pub fn new(pde: &'a PdeSpec) -> Self {
        SolutionChart { pde, cache: Mutex::new(HashMap::new()) }
    }

    pub fn pde(&self) -> &PdeSpec {
        self.pde
    }

    /// The expression a coordinate takes on solutions, in solution-space coordinates.
    pub fn value(&self, c: JetCoordinate) -> JetExpression {
        if self.pde.is_solution_coordinate(c) {
            return JetExpression::coord(c);
        }
        if let Some(v) = self.cache.lock().expect("chart lock").get(&c) {
            return v.clone();
        }
        let (i, k) = c.orders().expect("dependent");
        let (lt, lx) = self.pde.leading.orders().expect("dependent");
        let v = if (i, k) == (lt, lx) {
            self.pde.rhs.clone()
        } else if k > lx {
            self.reduce(&total_derivative(&self.value(JetCoordinate::deriv(i, k - 1)), Direction::X))
        } else {
            self.reduce(&total_derivative(&self.value(JetCoordinate::deriv(i - 1, k)), Direction::T))
        };
        self.cache.lock().expect("chart lock").insert(c, v.clone());
        v
    }

    /// Replaces every off-shell coordinate by its on-shell value.
    pub fn reduce(&self, e: &JetExpression) -> JetExpression {
        let off: Vec<JetCoordinate> =
            e.dependent_coordinates().into_iter().filter(|c| !self.pde.is_solution_coordinate(*c)).collect();
        if off.is_empty() {
            return e.clone();
        }
        let map: BTreeMap<JetCoordinate, JetExpression> = off.into_iter().map(|c| (c, self.value(c))).collect();
        e.substitute_all(&map).expect("dependent-coordinate substitution")
    }

    /// The solution-restricted time derivative.
    pub fn solution_total_derivative(&self, e: &JetExpression) -> Result<JetExpression, PdeError> {
        self.check_solution_space(e)?;
        Ok(self.reduce(&total_derivative(e, Direction::T)))
    }

    pub fn check_solution_space(&self, e: &JetExpression) -> Result<(), PdeError> {
        match e.dependent_coordinates().into_iter().find(|c| !self.pde.is_solution_coordinate(*c)) {
            Some(coordinate) => Err(PdeError::NotSolutionSpace { coordinate }),
            None => Ok(()),
        }
    }
}

/// 𝒟_t for a one-off call; reuse a [`SolutionChart`] for repeated work.
pub fn solution_total_derivative(pde: &PdeSpec, e: &JetExpression) -> Result<JetExpression, PdeError> {
    SolutionChart::new(pde).solution_total_derivative(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::euler_operator;
    use crate::jet::parse_expression;
    use crate::rational::rat;

    fn p(s: &str) -> JetExpression {
        parse_expression(s).unwrap()
    }

    fn pde(s: &str) -> PdeSpec {
        parse_pde(s, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn parses_leading_derivatives() {
        let m = pde("u_t + u^2*u_x + u_xxx = 0");
        assert_eq!(m.leading, JetCoordinate::deriv(1, 0));
        assert_eq!(m.rhs, p("-u^2*u_x - u_xxx"));
        let sg = pde("u_tx = sin(u)");
        assert_eq!(sg.leading, JetCoordinate::deriv(1, 1));
        assert_eq!(sg.rhs, p("sin(u)"));
        let w = pde("u_tt = pow(u,-2)*(pow(u,-2)*u_x)_x");
        assert_eq!(w.leading, JetCoordinate::deriv(2, 0));
        assert_eq!(w.shape(), Shape::Wave);
        let scaled = pde("2*u_t = u_xx");
        assert_eq!(scaled.rhs, p("1/2*u_xx"));
    }

    #[test]
    fn params_substitute() {
        let mut params = BTreeMap::new();
        params.insert("n".to_string(), rat(3));
        let k = parse_pde("u_t + u^n*u_x + u_xxx = 0", &params).unwrap();
        assert_eq!(k.rhs, p("-u^3*u_x - u_xxx"));
        assert_eq!(k.params["n"], rat(3));
    }

    #[test]
    fn rejects_bad_equations() {
        assert!(matches!(parse_pde("u_xx = u", &BTreeMap::new()), Err(PdeError::NoLeadingDerivative)));
        assert!(matches!(parse_pde("u_t = u_tx", &BTreeMap::new()), Err(PdeError::ExclusionViolated { .. })));
        assert!(matches!(parse_pde("u_tx = u_t", &BTreeMap::new()), Err(PdeError::ExclusionViolated { .. })));
        assert!(matches!(parse_pde("u_t", &BTreeMap::new()), Err(PdeError::MissingEquals(_))));
        assert!(matches!(parse_pde("u_t*u = u_x", &BTreeMap::new()), Err(PdeError::NoLeadingDerivative)));
    }

    #[test]
    fn solution_derivative_examples() {
        let kdv = pde("u_t + u*u_x + u_xxx = 0");
        assert_eq!(solution_total_derivative(&kdv, &p("u")).unwrap(), p("-u*u_x - u_xxx"));
        let wave = pde("u_tt = u^2*u_xx + u*u_x^2");
        assert_eq!(solution_total_derivative(&wave, &p("u_t")).unwrap(), p("u^2*u_xx + u*u_x^2"));
        let sg = pde("u_tx = sin(u)");
        assert_eq!(solution_total_derivative(&sg, &p("u_x")).unwrap(), p("sin(u)"));
        assert_eq!(solution_total_derivative(&sg, &p("u_xx")).unwrap(), p("cos(u)*u_x"));
        assert!(solution_total_derivative(&kdv, &p("u_t")).is_err());
    }

    #[test]
    fn chart_values_of_consequences() {
        let kdv = pde("u_t + u*u_x + u_xxx = 0");
        let chart = SolutionChart::new(&kdv);
        let utx = chart.value(JetCoordinate::deriv(1, 1));
        assert_eq!(utx, p("-u_x^2 - u*u_xx - u_xxxx"));
        let sg = pde("u_tx = sin(u)");
        let chart = SolutionChart::new(&sg);
        assert_eq!(chart.value(JetCoordinate::deriv(1, 2)), p("cos(u)*u_x"));
        assert_eq!(chart.value(JetCoordinate::deriv(2, 1)), p("cos(u)*u_t"));
    }

    #[test]
    fn linearization_examples() {
        let kdv = pde("u_t + u*u_x + u_xxx = 0");
        assert_eq!(kdv.linearization(&p("u_x")), p("u_tx + u*u_xx + u_x^2 + u_xxxx"));
        assert_eq!(kdv.adjoint_linearization(&p("u")), p("-u_t - u*u_x - u_xxx"));
        assert!(kdv.linearization(&JetExpression::zero()).is_zero());
        let sg = pde("u_tx = sin(u)");
        let w = p("u_xx*x + u^2");
        assert_eq!(sg.linearization(&w), sg.adjoint_linearization(&w));
        let expect = &total_derivative(&total_derivative(&w, Direction::X), Direction::T) - &(&p("cos(u)") * &w);
        assert_eq!(sg.linearization(&w), expect);
    }

    #[test]
    fn self_adjointness_detection() {
        let phi = p("u_x*u + t*u_xx");
        let wave = pde("u_tt = pow(u,-2)*(pow(u,-2)*u_x)_x");
        let d = &wave.linearization(&phi) - &wave.adjoint_linearization(&phi);
        assert!(euler_operator(&d).is_zero());
        let kdv = pde("u_t + u*u_x + u_xxx = 0");
        let d = &kdv.linearization(&phi) - &kdv.adjoint_linearization(&phi);
        assert!(!euler_operator(&d).is_zero());
    }
}
