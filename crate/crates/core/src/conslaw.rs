//! Conserved densities from multipliers, fluxes, normalization and verification.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calculus::{
    ibp_normal_form, invert_total_x_derivative, restricted_euler, total_derivative, total_derivative_multi, CalculusError,
    EulerBase,
};
use crate::detsys::determining_expression;
use crate::jet::{Direction, ExprError, JetCoordinate, JetExpression, Monomial};
use crate::pde::{PdeError, PdeSpec, Shape, SolutionChart};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConsLawError {
    #[error(transparent)]
    Substitution(#[from] ExprError),
    #[error("λ-integrand is not polynomial in λ: {0}")]
    NonPolynomial(String),
    #[error("reference function ũ must depend on t and x only, got {0}")]
    BadReference(String),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error("no flux: {0}")]
    Flux(#[from] CalculusError),
}

/// Polynomial in λ with expression coefficients, lowest degree first.
type LambdaPoly = Vec<JetExpression>;

fn poly_mul(a: &LambdaPoly, b: &LambdaPoly) -> LambdaPoly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![JetExpression::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_integral(p: &LambdaPoly) -> JetExpression {
    let mut out = JetExpression::zero();
    for (k, c) in p.iter().enumerate() {
        out += c.scale(&Rational::new(1.into(), (k as i64 + 1).into()));
    }
    out
}

/// Jet of the reference function: every dependent coordinate maps to the matching derivative of ũ.
struct Reference {
    utilde: JetExpression,
}

impl Reference {
    fn new(utilde: &JetExpression) -> Result<Self, ConsLawError> {
        if !utilde.dependent_coordinates().is_empty() {
            return Err(ConsLawError::BadReference(utilde.to_string()));
        }
        Ok(Reference { utilde: utilde.clone() })
    }

    fn jet(&self, c: JetCoordinate) -> JetExpression {
        let (i, k) = c.orders().expect("dependent");
        total_derivative_multi(&self.utilde, i, k)
    }

    /// `e` evaluated at u = ũ.
    fn at(&self, e: &JetExpression) -> Result<JetExpression, ConsLawError> {
        let map: BTreeMap<JetCoordinate, JetExpression> =
            e.dependent_coordinates().into_iter().map(|c| (c, self.jet(c))).collect();
        Ok(e.substitute_all(&map)?)
    }

    /// `e` at the interpolant λu + (1−λ)ũ, as a polynomial in λ.
    fn interpolate(&self, e: &JetExpression) -> Result<LambdaPoly, ConsLawError> {
        let mut out: LambdaPoly = Vec::new();
        for (key, q) in e.terms() {
            if key.has_u_atoms() {
                return Err(ConsLawError::NonPolynomial(e.to_string()));
            }
            let base = JetExpression::from_raw_term(q.clone(), Monomial::one(), key.atoms.clone());
            let mut p: LambdaPoly = vec![base];
            let mut fixed = Monomial::one();
            for &(c, k) in key.monomial.factors() {
                if !c.is_dependent() {
                    fixed = fixed.mul_var(c, k);
                    continue;
                }
                let r = self.jet(c);
                let factor = vec![r.clone(), &JetExpression::coord(c) - &r];
                for _ in 0..k {
                    p = poly_mul(&p, &factor);
                }
            }
            for (i, c) in p.into_iter().enumerate() {
                if out.len() <= i {
                    out.resize(i + 1, JetExpression::zero());
                }
                out[i] += c.mul_monomial(&fixed);
            }
        }
        Ok(out)
    }
}

/// ∫₀¹ K(λt, λx) dλ for an expression free of dependent coordinates.
fn scaled_tx_integral(k: &JetExpression) -> JetExpression {
    let mut out = JetExpression::zero();
    for (key, q) in k.terms() {
        let d = key.monomial.total_degree() as i64;
        let term = JetExpression::from_raw_term(q.clone(), key.monomial.clone(), key.atoms.clone());
        out += term.scale(&Rational::new(1.into(), (d + 1).into()));
    }
    out
}

/// `A` when the wave right-hand side reads `A(u) u_xx + ½ A'(u) u_x²`, i.e. `c(u)(c(u) u_x)_x` with `c² = A`.
fn wave_speed_squared(pde: &PdeSpec) -> Option<JetExpression> {
    let uxx = JetCoordinate::deriv(0, 2);
    let ux = JetCoordinate::deriv(0, 1);
    let a = pde.rhs.coefficient_of(uxx, 1);
    if a.coordinates().iter().any(|c| *c != JetCoordinate::u()) {
        return None;
    }
    let expected = &(&a * &JetExpression::coord(uxx))
        + &(&a.partial(JetCoordinate::u()) * &JetExpression::coord_pow(ux, 2)).scale(&Rational::new(1.into(), 2.into()));
    (expected == pde.rhs).then_some(a)
}

/// The shortened two-point formula for the wave shape: ũ constant, Λ affine in (u, u_t, u_x) without
/// u-atoms, and ∂²Λ/∂x∂u_t = 0.
fn reduced_wave_applicable(lambda: &JetExpression, utilde: &JetExpression) -> bool {
    let allowed = [JetCoordinate::u(), JetCoordinate::deriv(1, 0), JetCoordinate::deriv(0, 1)];
    utilde.is_constant()
        && lambda.dependent_coordinates().iter().all(|c| allowed.contains(c))
        && lambda.terms().all(|(k, _)| !k.has_u_atoms() && k.monomial.dependent_degree() <= 1)
        && lambda.partial(JetCoordinate::deriv(1, 0)).partial(JetCoordinate::X).is_zero()
}

fn reduced_wave_density(
    lambda: &JetExpression,
    reference: &Reference,
    speed_sq: &JetExpression,
) -> Result<JetExpression, ConsLawError> {
    let u = JetExpression::coord(JetCoordinate::u());
    let ut = JetExpression::coord(JetCoordinate::deriv(1, 0));
    let ux = JetCoordinate::deriv(0, 1);
    let half = Rational::new(1.into(), 2.into());
    let ut_ = &reference.utilde;
    let at = |e: &JetExpression| reference.at(e);
    let lam_ux = lambda.partial(ux);
    let lam_t = lambda.partial(JetCoordinate::T);
    let first = &ut
        * &(&(lambda + &at(lambda)?) + &total_derivative(&(&(&u - ut_) * &at(&lam_ux)?), Direction::X));
    let second = &(ut_ - &u) * &(&(&lam_t + &at(&lam_t)?) + &(&ut * &at(&lambda.partial(JetCoordinate::u()))?));
    let third = &(speed_sq * &JetExpression::coord_pow(ux, 2)) * &at(&lambda.partial(JetCoordinate::deriv(1, 0)))?;
    Ok((&(&first + &second) + &third).scale(&half))
}

/// Φ^t from a multiplier via the homotopy formula for the equation's shape.
pub fn homotopy_density(pde: &PdeSpec, lambda: &JetExpression, utilde: &JetExpression) -> Result<JetExpression, ConsLawError> {
    let chart = SolutionChart::new(pde);
    chart.check_solution_space(lambda)?;
    let reference = Reference::new(utilde)?;
    let shifted = |c: JetCoordinate| &JetExpression::coord(c) - &reference.jet(c);
    let phi = match pde.shape() {
        Shape::Evolution => poly_integral(&poly_mul(&vec![shifted(JetCoordinate::u())], &reference.interpolate(lambda)?)),
        Shape::Mixed => {
            poly_integral(&poly_mul(&vec![shifted(JetCoordinate::deriv(0, 1))], &reference.interpolate(lambda)?))
        }
        Shape::Wave => {
            if let Some(speed_sq) = wave_speed_squared(pde).filter(|_| reduced_wave_applicable(lambda, utilde)) {
                reduced_wave_density(lambda, &reference, &speed_sq)?
            } else {
                let k = &reference.at(&pde.g())? * &reference.at(lambda)?;
                let dt_lambda = chart.solution_total_derivative(lambda)?;
                let a = poly_mul(&vec![shifted(JetCoordinate::deriv(1, 0))], &reference.interpolate(lambda)?);
                let b = poly_mul(&vec![-shifted(JetCoordinate::u())], &reference.interpolate(&dt_lambda)?);
                &(&poly_integral(&a) + &poly_integral(&b))
                    + &(&JetExpression::coord(JetCoordinate::T) * &scaled_tx_integral(&k))
            }
        }
    };
    Ok(phi)
}

/// Φ^t with ũ = 0 first and the supplied reference on failure; returns the reference actually used.
pub fn homotopy_density_with_fallback(
    pde: &PdeSpec,
    lambda: &JetExpression,
    fallback: Option<&JetExpression>,
) -> Result<(JetExpression, JetExpression), ConsLawError> {
    let zero = JetExpression::zero();
    match homotopy_density(pde, lambda, &zero) {
        Ok(phi) => Ok((phi, zero)),
        Err(e) => match fallback {
            Some(ut) if !ut.is_zero() => Ok((homotopy_density(pde, lambda, ut)?, ut.clone())),
            _ => Err(e),
        },
    }
}

/// Φ^x with 𝒟_t Φ^t + D_x Φ^x = 0 on solutions.
pub fn flux_density(pde: &PdeSpec, lambda: &JetExpression, density_t: &JetExpression) -> Result<JetExpression, ConsLawError> {
    let chart = SolutionChart::new(pde);
    let r = -chart.solution_total_derivative(density_t)?;
    let first = match invert_total_x_derivative(&r) {
        Ok(phi_x) => return Ok(phi_x),
        Err(e) => e,
    };
    // In the u_tx chart 𝒟_t Φ^t can stay exact only through off-shell coordinates; invert in the free jet
    // using D_t Φ^t − Λ G = −D_x Φ^x and restrict afterwards.
    let w = &total_derivative(density_t, Direction::T) - &(lambda * &pde.g());
    match invert_total_x_derivative(&w) {
        Ok(w) => Ok(-chart.reduce(&w)),
        Err(_) => Err(first.into()),
    }
}

/// Restricted Euler operator matching the equation's shape.
pub fn multiplier_from_density(pde: &PdeSpec, density_t: &JetExpression) -> JetExpression {
    let base = match pde.shape() {
        Shape::Evolution => EulerBase::UFullX,
        Shape::Wave => EulerBase::Ut,
        Shape::Mixed => EulerBase::Ux,
    };
    restricted_euler(density_t, base)
}

#[derive(Clone, Debug)]
pub struct ConservationLaw {
    pub pde: PdeSpec,
    pub multiplier: JetExpression,
    pub density_t: JetExpression,
    pub density_x: JetExpression,
    pub utilde: JetExpression,
    pub verified: bool,
}

/// Serializable form with every expression rendered in the input grammar.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LawRecord {
    pub pde: String,
    pub lambda: String,
    pub phi_t: String,
    pub phi_x: String,
    pub utilde: String,
    pub verified: bool,
}

impl ConservationLaw {
    /// Density, normal form, flux and verification for one multiplier.
    pub fn from_multiplier(pde: &PdeSpec, lambda: &JetExpression, fallback: Option<&JetExpression>) -> Result<Self, ConsLawError> {
        let (raw, utilde) = homotopy_density_with_fallback(pde, lambda, fallback)?;
        let (core, _) = ibp_normal_form(&raw);
        let density_x = flux_density(pde, lambda, &core)?;
        let mut cl = ConservationLaw {
            pde: pde.clone(),
            multiplier: lambda.clone(),
            density_t: core,
            density_x,
            utilde,
            verified: false,
        };
        cl.verified = verify(&cl);
        Ok(cl)
    }

    pub fn record(&self) -> LawRecord {
        LawRecord {
            pde: self.pde.to_string(),
            lambda: self.multiplier.to_string(),
            phi_t: self.density_t.to_string(),
            phi_x: self.density_x.to_string(),
            utilde: self.utilde.to_string(),
            verified: self.verified,
        }
    }
}

/// Replaces Φ^t by its normal form and shifts Φ^x by the matching 𝒟_t θ.
pub fn normalize_density(cl: &ConservationLaw) -> ConservationLaw {
    let (core, theta) = ibp_normal_form(&cl.density_t);
    let chart = SolutionChart::new(&cl.pde);
    let density_x = chart.reduce(&(&cl.density_x + &total_derivative(&theta, Direction::T)));
    ConservationLaw { density_t: core, density_x, ..cl.clone() }
}

/// Residuals of each verification condition; all empty on success.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyReport {
    /// 𝒟_t Φ^t + D_x Φ^x restricted to solutions.
    pub divergence: Result<JetExpression, String>,
    /// E_u(Λ G).
    pub determining: Result<JetExpression, String>,
    /// Multiplier relation residual for the equation's shape.
    pub relation: Result<JetExpression, String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        [&self.divergence, &self.determining, &self.relation].iter().all(|r| matches!(r, Ok(e) if e.is_zero()))
    }

    /// First failing condition, rendered.
    pub fn failure(&self) -> Option<String> {
        let parts = [("divergence", &self.divergence), ("determining", &self.determining), ("relation", &self.relation)];
        parts.iter().find_map(|(name, r)| match r {
            Ok(e) if e.is_zero() => None,
            Ok(e) => Some(format!("{name} residual: {e}")),
            Err(msg) => Some(format!("{name}: {msg}")),
        })
    }
}

pub fn verify_report(cl: &ConservationLaw) -> VerifyReport {
    let pde = &cl.pde;
    let chart = SolutionChart::new(pde);
    let divergence = chart
        .solution_total_derivative(&cl.density_t)
        .and_then(|dt| {
            chart.check_solution_space(&cl.density_x)?;
            Ok(chart.reduce(&(&dt + &total_derivative(&cl.density_x, Direction::X))))
        })
        .map_err(|e| e.to_string());
    let determining = determining_expression(pde, &cl.multiplier).map_err(|e| e.to_string());
    let relation = match pde.shape() {
        Shape::Evolution | Shape::Wave => Ok(&multiplier_from_density(pde, &cl.density_t) - &cl.multiplier),
        // Ê_{u_x} only sees Φ^t up to constants in D_x; compare through Ê_u Φ^t = −D_x Λ instead.
        Shape::Mixed => Ok(&restricted_euler(&cl.density_t, EulerBase::UFullX)
            + &total_derivative(&cl.multiplier, Direction::X)),
    };
    VerifyReport { divergence, determining, relation }
}

pub fn verify(cl: &ConservationLaw) -> bool {
    verify_report(cl).passed()
}

/// Convenience used by tests and the CLI: Λ = 0 gives the zero law.
pub fn zero_law(pde: &PdeSpec) -> ConservationLaw {
    let mut cl = ConservationLaw {
        pde: pde.clone(),
        multiplier: JetExpression::zero(),
        density_t: JetExpression::zero(),
        density_x: JetExpression::zero(),
        utilde: JetExpression::zero(),
        verified: false,
    };
    cl.verified = verify(&cl);
    cl
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::equivalent_modulo_divergence;
    use crate::jet::parse_expression;
    use crate::pde::parse_pde;

    fn p(s: &str) -> JetExpression {
        parse_expression(s).unwrap()
    }

    fn pde(s: &str) -> PdeSpec {
        parse_pde(s, &BTreeMap::new()).unwrap()
    }

    const KDV: &str = "u_t + u*u_x + u_xxx = 0";
    const SG: &str = "u_tx = sin(u)";

    #[test]
    fn kdv_densities() {
        let kdv = pde(KDV);
        let z = JetExpression::zero();
        assert_eq!(homotopy_density(&kdv, &p("1"), &z).unwrap(), p("u"));
        assert_eq!(homotopy_density(&kdv, &p("u"), &z).unwrap(), p("1/2*u^2"));
        let phi = homotopy_density(&kdv, &p("u_xx + 1/2*u^2"), &z).unwrap();
        assert!(equivalent_modulo_divergence(&phi, &p("-1/2*u_x^2 + 1/6*u^3")));
    }

    #[test]
    fn kdv_fluxes() {
        let kdv = pde(KDV);
        assert_eq!(flux_density(&kdv, &p("1"), &p("u")).unwrap(), p("1/2*u^2 + u_xx"));
        let cl = ConservationLaw::from_multiplier(&kdv, &p("t*u - x"), None).unwrap();
        assert!(cl.verified, "{:?}", verify_report(&cl));
    }

    #[test]
    fn sine_gordon_second_order() {
        let sg = pde(SG);
        let lam = p("u_xxx + 1/2*u_x^3");
        let raw = homotopy_density(&sg, &lam, &JetExpression::zero()).unwrap();
        assert_eq!(multiplier_from_density(&sg, &raw), lam);
        let cl = ConservationLaw::from_multiplier(&sg, &lam, None).unwrap();
        assert_eq!(cl.density_t, p("-1/2*u_xx^2 + 1/8*u_x^4"));
        assert!(cl.verified, "{:?}", verify_report(&cl));
        let first = ConservationLaw::from_multiplier(&sg, &p("u_x"), None).unwrap();
        assert_eq!(first.density_t, p("1/2*u_x^2"));
        assert!(first.verified);
    }

    #[test]
    fn wave_energy_and_momentum() {
        let w = pde("u_tt = u*(u*u_x)_x");
        let e = ConservationLaw::from_multiplier(&w, &p("u_t"), None).unwrap();
        assert_eq!(e.density_t, p("1/2*u_t^2 + 1/2*u^2*u_x^2"));
        assert_eq!(e.density_x, p("-u^2*u_x*u_t"));
        assert!(e.verified);
        let m = ConservationLaw::from_multiplier(&w, &p("u_x"), None).unwrap();
        assert!(equivalent_modulo_divergence(&m.density_t, &p("u_x*u_t")));
        assert!(m.verified);
        assert_eq!(multiplier_from_density(&w, &p("u_x*u_t")), p("u_x"));
    }

    #[test]
    fn wave_conformal_density() {
        let w = pde("u_tt = pow(u,-2)*(pow(u,-2)*u_x)_x");
        let lam = p("t^2*u_t - t*u");
        let phi = homotopy_density(&w, &lam, &JetExpression::zero()).unwrap();
        assert_eq!(phi, p("1/2*t^2*u_t^2 - t*u*u_t + 1/2*u^2 + 1/2*t^2*u_x^2*pow(u,-4)"));
        let cl = ConservationLaw::from_multiplier(&w, &lam, None).unwrap();
        assert!(cl.verified, "{:?}", verify_report(&cl));
    }

    #[test]
    fn general_wave_formula_agrees() {
        // c = u: the λ-polynomial route applies when Λ is outside the reduced formula's scope.
        let w = pde("u_tt = u*(u*u_x)_x");
        let lam = p("u_t*u_x");
        assert!(!reduced_wave_applicable(&lam, &JetExpression::zero()));
        let phi = homotopy_density(&w, &lam, &JetExpression::zero()).unwrap();
        assert_eq!(multiplier_from_density(&w, &phi), lam);
        let lam = p("u_t");
        let reduced = homotopy_density(&w, &lam, &JetExpression::zero()).unwrap();
        let reference = Reference::new(&JetExpression::zero()).unwrap();
        let dt = SolutionChart::new(&w).solution_total_derivative(&lam).unwrap();
        let a = poly_mul(&vec![p("u_t")], &reference.interpolate(&lam).unwrap());
        let b = poly_mul(&vec![p("-u")], &reference.interpolate(&dt).unwrap());
        let general = &poly_integral(&a) + &poly_integral(&b);
        assert!(equivalent_modulo_divergence(&reduced, &general));
    }

    #[test]
    fn verify_examples() {
        let kdv2 = pde("u_t + u^2*u_x + u_xxx = 0");
        let lam = p("t*(u_xx + 1/3*u^3) - 1/3*x*u");
        let cl = ConservationLaw::from_multiplier(&kdv2, &lam, None).unwrap();
        assert!(cl.verified, "{:?}", verify_report(&cl));
        let kdv3 = pde("u_t + u^3*u_x + u_xxx = 0");
        let bad = ConservationLaw {
            pde: kdv3.clone(),
            multiplier: lam.clone(),
            density_t: homotopy_density(&kdv3, &lam, &JetExpression::zero()).unwrap(),
            density_x: JetExpression::zero(),
            utilde: JetExpression::zero(),
            verified: false,
        };
        assert!(!verify(&bad));
        assert!(zero_law(&kdv3).verified);
    }

    #[test]
    fn normalization() {
        let kdv = pde(KDV);
        let cl = ConservationLaw {
            pde: kdv.clone(),
            multiplier: p("u_xx"),
            density_t: p("1/2*u_xxx*u_x"),
            density_x: flux_density(&kdv, &p("u_xx"), &p("1/2*u_xxx*u_x")).unwrap_or_default(),
            utilde: JetExpression::zero(),
            verified: false,
        };
        let n = normalize_density(&cl);
        assert_eq!(n.density_t, p("-1/2*u_xx^2"));
        let d = ConservationLaw { density_t: p("2*u*u_x"), density_x: JetExpression::zero(), ..cl.clone() };
        assert!(normalize_density(&d).density_t.is_zero());
        let chart = SolutionChart::new(&kdv);
        let div = chart.reduce(
            &(&total_derivative(&n.density_t, Direction::T) + &total_derivative(&n.density_x, Direction::X)),
        );
        let div0 = chart.reduce(
            &(&total_derivative(&cl.density_t, Direction::T) + &total_derivative(&cl.density_x, Direction::X)),
        );
        assert_eq!(div, div0);
    }

    #[test]
    fn fallback_reference() {
        let w = pde("u_tt = pow(u,-2)*(pow(u,-2)*u_x)_x");
        let lam = p("u_t*u_x");
        let z = JetExpression::zero();
        assert!(matches!(homotopy_density(&w, &lam, &z), Err(ConsLawError::Substitution(ExprError::Singular { .. }))));
        let one = p("1");
        let err = homotopy_density_with_fallback(&w, &lam, Some(&one)).unwrap_err();
        assert!(matches!(err, ConsLawError::NonPolynomial(_)), "{err}");
        let (_, used) = homotopy_density_with_fallback(&w, &p("u_t"), Some(&one)).unwrap();
        assert!(used.is_zero());
        assert!(matches!(homotopy_density(&w, &p("u_t"), &p("u")), Err(ConsLawError::BadReference(_))));
    }

    #[test]
    fn scaling_linearity() {
        let kdv = pde(KDV);
        let lam = p("t*u - x + u_xx");
        let q = Rational::new(3.into(), 7.into());
        let z = JetExpression::zero();
        assert_eq!(homotopy_density(&kdv, &lam.scale(&q), &z).unwrap(), homotopy_density(&kdv, &lam, &z).unwrap().scale(&q));
    }

    #[test]
    fn record_serializes() {
        let kdv = pde(KDV);
        let cl = ConservationLaw::from_multiplier(&kdv, &p("1"), None).unwrap();
        let json = serde_json::to_string(&cl.record()).unwrap();
        let back: LawRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cl.record());
        assert_eq!(parse_expression(&back.phi_x).unwrap(), cl.density_x);
    }
}
