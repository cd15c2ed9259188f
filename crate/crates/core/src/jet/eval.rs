use super::{JetCoordinate, JetExpression, KernelAtom};
use crate::rational::to_f64;

struct CompiledTerm {
    coeff: f64,
    factors: Vec<(usize, i32)>,
    atoms: Vec<(KernelAtom, i32)>,
}

/// Floating-point evaluator with coordinates resolved to slots once.
pub struct CompiledExpr {
    coords: Vec<JetCoordinate>,
    u_slot: Option<usize>,
    terms: Vec<CompiledTerm>,
}

impl CompiledExpr {
    pub fn new(e: &JetExpression) -> Self {
        let coords: Vec<JetCoordinate> = e.coordinates().into_iter().collect();
        let slot = |c: JetCoordinate| coords.iter().position(|v| *v == c).expect("coordinate listed");
        let terms = e
            .terms()
            .map(|(k, q)| CompiledTerm {
                coeff: to_f64(q),
                factors: k.monomial.factors().iter().map(|(c, p)| (slot(*c), *p as i32)).collect(),
                atoms: k.atoms.iter().map(|(a, p)| (a.clone(), *p as i32)).collect(),
            })
            .collect();
        let u_slot = coords.iter().position(|c| *c == JetCoordinate::u());
        CompiledExpr { coords, u_slot, terms }
    }

    /// Coordinates in slot order.
    pub fn coordinates(&self) -> &[JetCoordinate] {
        &self.coords
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        let u = self.u_slot.map_or(0.0, |i| values[i]);
        let mut acc = 0.0;
        for t in &self.terms {
            let mut v = t.coeff;
            for &(i, p) in &t.factors {
                v *= values[i].powi(p);
            }
            for (a, p) in &t.atoms {
                v *= a.eval(u).powi(*p);
            }
            acc += v;
        }
        acc
    }
}
