//! Finite multiplier ansatz, linear system assembly and exact nullspaces.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::detsys::DeterminingSystem;
use crate::jet::{JetCoordinate, JetExpression, Monomial, TermKey};
use crate::pde::{PdeSpec, Shape};
use crate::rational::{lcm_denominators, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinSolveError {
    #[error("ansatz basis is empty")]
    EmptyBasis,
    #[error("ansatz atom `{0}` is not a product of kernel atoms and coordinates admissible for this equation")]
    InadmissibleAtom(String),
    #[error("ansatz arity does not match the determining system")]
    ArityMismatch,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnsatzBounds {
    /// Highest derivative order allowed in the multiplier.
    pub order: u16,
    /// Total degree in the independent variables.
    pub deg_tx: u32,
    /// Total degree in the dependent coordinates.
    pub deg_u: u32,
    /// Extra factors such as `pow(u, -1/2)` or `exp(u)`; the constant 1 is always included.
    pub atoms: Vec<JetExpression>,
}

#[derive(Clone, Debug)]
pub struct AnsatzSpace {
    pub arity: Vec<JetCoordinate>,
    pub basis: Vec<JetExpression>,
    pub bounds: AnsatzBounds,
    /// Number of enumerated elements dropped as zero, duplicate or linearly dependent.
    pub dropped: usize,
}

/// Coordinates a multiplier of the given order may depend on.
pub fn arity_for(pde: &PdeSpec, order: u16) -> Vec<JetCoordinate> {
    let mut out = Vec::new();
    match pde.shape() {
        Shape::Evolution => {
            out.extend([JetCoordinate::T, JetCoordinate::X]);
            out.extend((0..=order).map(|k| JetCoordinate::deriv(0, k)));
        }
        Shape::Wave => {
            out.extend([JetCoordinate::T, JetCoordinate::X]);
            for total in 0..=order {
                for t in 0..=total.min(1) {
                    out.push(JetCoordinate::deriv(t, total - t));
                }
            }
        }
        Shape::Mixed => {
            out.push(JetCoordinate::X);
            out.extend((0..=order).map(|k| JetCoordinate::deriv(0, k)));
        }
    }
    out
}

/// All monomials in `vars` of total degree at most `deg`.
fn monomials_up_to(vars: &[JetCoordinate], deg: u32) -> Vec<Monomial> {
    let mut out = vec![Monomial::one()];
    let mut frontier = vec![(Monomial::one(), 0usize)];
    for _ in 0..deg {
        let mut next = Vec::new();
        for (m, start) in &frontier {
            for (j, v) in vars.iter().enumerate().skip(*start) {
                let mm = m.mul_var(*v, 1);
                out.push(mm.clone());
                next.push((mm, j));
            }
        }
        frontier = next;
    }
    out
}

/// Incremental row-echelon span test over expression terms.
#[derive(Default)]
struct SpanTracker {
    rows: Vec<(TermKey, BTreeMap<TermKey, Rational>)>,
}

impl SpanTracker {
    /// Inserts `e` when it is independent of what is stored; returns whether it was.
    fn insert(&mut self, e: &JetExpression) -> bool {
        let mut v: BTreeMap<TermKey, Rational> = e.terms().map(|(k, q)| (k.clone(), q.clone())).collect();
        for (pk, row) in &self.rows {
            if let Some(c) = v.get(pk).cloned() {
                for (k, q) in row {
                    let entry = v.entry(k.clone()).or_insert_with(Rational::zero);
                    *entry -= &c * q;
                    if entry.is_zero() {
                        v.remove(k);
                    }
                }
            }
        }
        let Some((pk, pq)) = v.iter().next_back().map(|(k, q)| (k.clone(), q.clone())) else {
            return false;
        };
        for q in v.values_mut() {
            *q /= &pq;
        }
        self.rows.push((pk, v));
        true
    }
}

/// Deterministic enumeration of the ansatz basis.
pub fn generate_ansatz_basis(pde: &PdeSpec, bounds: &AnsatzBounds) -> Result<AnsatzSpace, LinSolveError> {
    let arity = arity_for(pde, bounds.order);
    for a in &bounds.atoms {
        if let Some(c) = a.coordinates().into_iter().find(|c| !arity.contains(c)) {
            return Err(LinSolveError::InadmissibleAtom(format!("{a} (uses {c})")));
        }
    }
    let indep: Vec<JetCoordinate> = arity.iter().copied().filter(|c| !c.is_dependent()).collect();
    let dep: Vec<JetCoordinate> = arity.iter().copied().filter(|c| c.is_dependent()).collect();
    let tx = monomials_up_to(&indep, bounds.deg_tx);
    let du = monomials_up_to(&dep, bounds.deg_u);
    let mut factors = vec![JetExpression::one()];
    factors.extend(bounds.atoms.iter().cloned());

    let mut candidates: Vec<(JetExpression, (JetCoordinate, u32, u32))> = Vec::new();
    for f in &factors {
        for d in &du {
            for m in &tx {
                let e = f.mul_monomial(&d.mul(m));
                if e.is_zero() {
                    continue;
                }
                let top = d.max_coordinate().unwrap_or(JetCoordinate::X);
                candidates.push((e, (top, d.total_degree(), m.total_degree())));
            }
        }
    }
    // Most significant first: highest jet coordinate, then u-degree, then tx-degree.
    candidates.sort_by(|(ea, ka), (eb, kb)| kb.cmp(ka).then_with(|| eb.cmp(ea)));
    let total = candidates.len();
    let mut seen = BTreeSet::new();
    let mut tracker = SpanTracker::default();
    let mut basis = Vec::new();
    for (e, _) in candidates {
        if !seen.insert(e.clone()) {
            continue;
        }
        if tracker.insert(&e) {
            basis.push(e);
        }
    }
    if basis.is_empty() {
        return Err(LinSolveError::EmptyBasis);
    }
    let dropped = total - basis.len();
    Ok(AnsatzSpace { arity, basis, bounds: bounds.clone(), dropped })
}

/// Sparse exact system: one row per (equation, monomial signature).
#[derive(Clone, Debug)]
pub struct RationalLinearSystem {
    pub ncols: usize,
    pub rows: BTreeMap<(usize, TermKey), BTreeMap<usize, Rational>>,
}

/// Substitutes `Λ = Σ c_i b_i` and collects coefficients.
pub fn assemble(system: &DeterminingSystem, ansatz: &AnsatzSpace) -> Result<RationalLinearSystem, LinSolveError> {
    if ansatz.basis.iter().any(|b| b.coordinates().iter().any(|c| !system.arity.contains(c))) {
        return Err(LinSolveError::ArityMismatch);
    }
    let images: Vec<Vec<JetExpression>> = ansatz.basis.par_iter().map(|b| system.instantiate(b)).collect();
    let mut rows: BTreeMap<(usize, TermKey), BTreeMap<usize, Rational>> = BTreeMap::new();
    for (col, eqs) in images.into_iter().enumerate() {
        for (eq, img) in eqs.into_iter().enumerate() {
            for (key, q) in img.into_terms() {
                rows.entry((eq, key)).or_default().insert(col, q);
            }
        }
    }
    Ok(RationalLinearSystem { ncols: ansatz.basis.len(), rows })
}

type SparseRow = BTreeMap<usize, BigInt>;

/// Integer row with content removed and first entry positive.
fn primitive(row: &BTreeMap<usize, Rational>) -> SparseRow {
    let l = lcm_denominators(row.values());
    let mut out: SparseRow = row.iter().map(|(c, q)| (*c, (q * Rational::from_integer(l.clone())).to_integer())).collect();
    make_primitive(&mut out);
    out
}

fn make_primitive(row: &mut SparseRow) {
    let g = row.values().fold(BigInt::zero(), |g, v| g.gcd(v));
    let neg = row.values().next().is_some_and(|v| v.is_negative());
    if g.is_zero() {
        return;
    }
    let g = if neg { -g } else { g };
    if !g.is_one() {
        for v in row.values_mut() {
            *v = &*v / &g;
        }
    }
}

/// Fraction-free reduction to reduced echelon form; returns `(pivot column, row)` pairs.
fn integer_rref(mut rows: Vec<SparseRow>, ncols: usize) -> Vec<(usize, SparseRow)> {
    let mut pivots: Vec<(usize, SparseRow)> = Vec::new();
    for col in 0..ncols {
        let best = rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.get(&col).map(|v| (v.abs(), i)))
            .min();
        let Some((_, bi)) = best else {
            continue;
        };
        let prow = rows.swap_remove(bi);
        let a = prow[&col].clone();
        let eliminate = |r: &mut SparseRow| {
            let Some(b) = r.get(&col).cloned() else {
                return;
            };
            let g = a.gcd(&b);
            let (fa, fb) = (&a / &g, &b / &g);
            for v in r.values_mut() {
                *v *= &fa;
            }
            for (c, v) in &prow {
                let e = r.entry(*c).or_insert_with(BigInt::zero);
                *e -= &fb * v;
                if e.is_zero() {
                    r.remove(c);
                }
            }
            make_primitive(r);
        };
        rows.iter_mut().for_each(eliminate);
        rows.retain(|r| !r.is_empty());
        for (_, r) in pivots.iter_mut() {
            eliminate(r);
        }
        pivots.push((col, prow));
    }
    pivots
}

/// Gauss-Jordan over the rationals; rows become reduced echelon with leading 1.
fn rational_rref(mut m: Vec<Vec<Rational>>) -> Vec<Vec<Rational>> {
    let ncols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for v in m[r].iter_mut() {
            *v *= &inv;
        }
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                let prow = m[r].clone();
                for (v, pv) in m[i].iter_mut().zip(prow.iter()) {
                    *v -= &f * pv;
                }
            }
        }
        r += 1;
        if r == m.len() {
            break;
        }
    }
    m.truncate(r);
    m
}

/// Exact nullspace basis, reduced echelon form with leading entries 1, ordered by leading column.
pub fn nullspace(sys: &RationalLinearSystem) -> Vec<Vec<Rational>> {
    let mut uniq: BTreeSet<Vec<(usize, BigInt)>> = BTreeSet::new();
    for row in sys.rows.values() {
        let p = primitive(row);
        if !p.is_empty() {
            uniq.insert(p.into_iter().collect());
        }
    }
    let rows: Vec<SparseRow> = uniq.into_iter().map(|r| r.into_iter().collect()).collect();
    let pivots = integer_rref(rows, sys.ncols);
    let pivot_cols: BTreeSet<usize> = pivots.iter().map(|(c, _)| *c).collect();
    let mut vecs = Vec::new();
    for f in (0..sys.ncols).filter(|c| !pivot_cols.contains(c)) {
        let mut v = vec![Rational::zero(); sys.ncols];
        v[f] = Rational::one();
        for (p, row) in &pivots {
            if let Some(val) = row.get(&f) {
                v[*p] = -Rational::new(val.clone(), row[p].clone());
            }
        }
        vecs.push(v);
    }
    rational_rref(vecs)
}

/// Λ = Σ v_i b_i for one nullspace vector.
pub fn combine(basis: &[JetExpression], v: &[Rational]) -> JetExpression {
    let mut out = JetExpression::zero();
    for (b, q) in basis.iter().zip(v) {
        if !q.is_zero() {
            out += b.scale(q);
        }
    }
    out
}

/// Some coefficients `c` with `Σ c_i columns_i == target`, or `None` when `target` is outside the span.
pub fn solve_in_span(columns: &[JetExpression], target: &JetExpression) -> Option<Vec<Rational>> {
    let n = columns.len();
    let mut rows: BTreeMap<TermKey, Vec<Rational>> = BTreeMap::new();
    for (j, c) in columns.iter().enumerate() {
        for (k, q) in c.terms() {
            rows.entry(k.clone()).or_insert_with(|| vec![Rational::zero(); n + 1])[j] = q.clone();
        }
    }
    for (k, q) in target.terms() {
        rows.entry(k.clone()).or_insert_with(|| vec![Rational::zero(); n + 1])[n] = q.clone();
    }
    let m = rational_rref(rows.into_values().collect());
    let mut sol = vec![Rational::zero(); n];
    for row in &m {
        let lead = row.iter().position(|q| !q.is_zero())?;
        if lead == n {
            return None;
        }
        sol[lead] = row[n].clone();
    }
    Some(sol)
}

/// Ansatz, determining system and multiplier basis for one equation.
#[derive(Clone, Debug)]
pub struct Derivation {
    pub ansatz: AnsatzSpace,
    pub equations: usize,
    pub rows: usize,
    pub multipliers: Vec<JetExpression>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeriveError {
    #[error(transparent)]
    Ansatz(#[from] LinSolveError),
    #[error(transparent)]
    DetSys(#[from] crate::detsys::DetSysError),
}

/// Full multiplier search within the given bounds.
pub fn derive_multipliers(pde: &PdeSpec, bounds: &AnsatzBounds) -> Result<Derivation, DeriveError> {
    let ansatz = generate_ansatz_basis(pde, bounds)?;
    let system = crate::detsys::split_determining_system(pde, &ansatz.arity)?;
    let lin = assemble(&system, &ansatz)?;
    let multipliers = nullspace(&lin).iter().map(|v| combine(&ansatz.basis, v)).collect();
    Ok(Derivation { equations: system.equations.len(), rows: lin.rows.len(), ansatz, multipliers })
}
