//! Periodic pseudo-spectral integration and conserved-quantity drift measurement.
//!
//! Evolution equations use a Lawson (integrating-factor) RK4 step with the constant-coefficient
//! linear part of the right-hand side treated exactly. Wave equations are integrated as the system
//! `(u, u_t)` with classical RK4. `u_tx = g` equations are integrated in the chart
//! `u_t = ∂_x^{-1}(g − mean g)`, with the integration constant chosen so `u_t` vanishes at the left edge.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use thiserror::Error;

use crate::jet::{CompiledExpr, JetCoordinate, JetExpression};
use crate::pde::{PdeSpec, Shape};
use crate::rational::to_f64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumError {
    #[error("grid needs at least 64 points, got {0}")]
    TooFewPoints(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("time step {dt} exceeds the stability limit {limit:.3e} of the scheme")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("instability at t = {t}: max |u| = {norm:e}")]
    Unstable { t: f64, norm: f64 },
    #[error("coordinate {0} is not available on the numerical solution")]
    Unavailable(JetCoordinate),
    #[error("density is not finite at t = {t}, x = {x}")]
    Singular { t: f64, x: f64 },
    #[error("initial data needs u_t for the u_tt shape")]
    MissingVelocity,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridConfig {
    /// Domain length; the grid is `x_j = -L/2 + j L / N`.
    pub length: f64,
    pub n: usize,
    pub dt: f64,
    pub horizon: f64,
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), NumError> {
        if self.n < 64 {
            return Err(NumError::TooFewPoints(self.n));
        }
        if !(self.length > 0.0 && self.dt > 0.0 && self.horizon >= 0.0) {
            return Err(NumError::InvalidGrid(format!("{self:?}")));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.n).map(|j| -self.length / 2.0 + j as f64 * self.dx()).collect()
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Largest resolved wavenumber.
    pub fn k_max(&self) -> f64 {
        PI * self.n as f64 / self.length
    }
}

/// Sampled initial state; `ut` is required for the u_tt shape and ignored otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialData {
    pub u: Vec<f64>,
    pub ut: Option<Vec<f64>>,
}

impl InitialData {
    pub fn sample(cfg: &GridConfig, u: impl Fn(f64) -> f64, ut: Option<&dyn Fn(f64) -> f64>) -> Self {
        let xs = cfg.grid();
        InitialData { u: xs.iter().map(|&x| u(x)).collect(), ut: ut.map(|f| xs.iter().map(|&x| f(x)).collect()) }
    }
}

/// Reflectionless two-soliton profile `4 sech²((x − x0)/3)` for `u_t + u u_x + u_xxx = 0`.
pub fn kdv_two_soliton(cfg: &GridConfig, x0: f64) -> InitialData {
    InitialData::sample(cfg, |x| 4.0 / ((x - x0) / 3.0).cosh().powi(2), None)
}

/// `u = u∞ + a·exp(−x²)` moving right with speed `c(u)`: `u_t = −c(u) u_x`.
pub fn wave_pulse(cfg: &GridConfig, background: f64, amplitude: f64, speed: impl Fn(f64) -> f64) -> InitialData {
    let u = |x: f64| background + amplitude * (-x * x).exp();
    let ux = |x: f64| -2.0 * x * amplitude * (-x * x).exp();
    let ut = |x: f64| -speed(u(x)) * ux(x);
    InitialData::sample(cfg, u, Some(&ut))
}

/// Breather of `u_tx = sin u` at light-cone time 0, centered at `x0`.
pub fn sine_gordon_breather(cfg: &GridConfig, omega: f64, x0: f64) -> InitialData {
    let s = (1.0 - omega * omega).sqrt();
    InitialData::sample(cfg, |x| 4.0 * (s / omega * (-omega * (x - x0)).sin() / (s * (x - x0)).cosh()).atan(), None)
}

struct Spectral {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    k: Vec<f64>,
}

impl Spectral {
    fn new(cfg: &GridConfig) -> Self {
        let mut planner = FftPlanner::new();
        let n = cfg.n;
        let k = (0..n)
            .map(|j| {
                let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                2.0 * PI * m / cfg.length
            })
            .collect();
        Spectral { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n), k }
    }

    fn forward(&self, u: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    fn inverse(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.inv.process(&mut buf);
        let s = 1.0 / self.n as f64;
        buf.into_iter().map(|c| c.re * s).collect()
    }

    fn is_nyquist(&self, j: usize) -> bool {
        self.n.is_multiple_of(2) && j == self.n / 2
    }

    fn derivative(&self, u: &[f64], order: u16) -> Vec<f64> {
        if order == 0 {
            return u.to_vec();
        }
        let mut h = self.forward(u);
        for (j, c) in h.iter_mut().enumerate() {
            if order % 2 == 1 && self.is_nyquist(j) {
                *c = Complex64::new(0.0, 0.0);
            } else {
                *c *= Complex64::new(0.0, self.k[j]).powu(order as u32);
            }
        }
        self.inverse(h)
    }

    /// Zero-mean antiderivative of the zero-mean part of `g`.
    fn antiderivative(&self, g: &[f64]) -> Vec<f64> {
        let mut h = self.forward(g);
        for (j, c) in h.iter_mut().enumerate() {
            if j == 0 || self.is_nyquist(j) {
                *c = Complex64::new(0.0, 0.0);
            } else {
                *c /= Complex64::new(0.0, self.k[j]);
            }
        }
        self.inverse(h)
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    /// `u_t` for the u_tt shape.
    pub v: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub pde: PdeSpec,
    pub cfg: GridConfig,
    pub snapshots: Vec<Snapshot>,
}

/// Evaluates a symbolic expression on the grid given a field provider.
struct GridEvaluator<'a> {
    pde: &'a PdeSpec,
    spectral: &'a Spectral,
    xs: &'a [f64],
}

impl GridEvaluator<'_> {
    fn field(&self, c: JetCoordinate, t: f64, u: &[f64], v: Option<&[f64]>) -> Result<Vec<f64>, NumError> {
        match c {
            JetCoordinate::T => Ok(vec![t; u.len()]),
            JetCoordinate::X => Ok(self.xs.to_vec()),
            JetCoordinate::U { t: 0, x } => Ok(self.spectral.derivative(u, x)),
            JetCoordinate::U { t: 1, x } => match (self.pde.shape(), v) {
                (Shape::Wave, Some(v)) => Ok(self.spectral.derivative(v, x)),
                (Shape::Mixed, _) if x == 0 => self.mixed_ut(t, u),
                _ => Err(NumError::Unavailable(c)),
            },
            _ => Err(NumError::Unavailable(c)),
        }
    }

    fn mixed_ut(&self, t: f64, u: &[f64]) -> Result<Vec<f64>, NumError> {
        let g = self.eval(&CompiledExpr::new(&self.pde.rhs), t, u, None)?;
        let mut ut = self.spectral.antiderivative(&g);
        let edge = ut[0];
        ut.iter_mut().for_each(|w| *w -= edge);
        Ok(ut)
    }

    fn eval(&self, e: &CompiledExpr, t: f64, u: &[f64], v: Option<&[f64]>) -> Result<Vec<f64>, NumError> {
        let cols = e.coordinates().iter().map(|&c| self.field(c, t, u, v)).collect::<Result<Vec<_>, _>>()?;
        let mut vals = vec![0.0; cols.len()];
        let out: Vec<f64> = (0..u.len())
            .map(|j| {
                for (slot, col) in vals.iter_mut().zip(&cols) {
                    *slot = col[j];
                }
                e.eval(&vals)
            })
            .collect();
        match out.iter().position(|w| !w.is_finite()) {
            Some(j) => Err(NumError::Singular { t, x: self.xs[j] }),
            None => Ok(out),
        }
    }
}

/// Splits an evolution right-hand side into its constant-coefficient linear x-derivative part
/// (as a Fourier symbol) and the rest.
fn split_linear(rhs: &JetExpression, spectral: &Spectral) -> (Vec<Complex64>, JetExpression) {
    let mut symbol = vec![Complex64::new(0.0, 0.0); spectral.n];
    let mut rest = JetExpression::zero();
    for (key, q) in rhs.terms() {
        let linear = match key.monomial.factors() {
            [(JetCoordinate::U { t: 0, x }, 1)] if key.atoms.is_empty() => Some(*x),
            _ => None,
        };
        match linear {
            Some(order) => {
                for (j, s) in symbol.iter_mut().enumerate() {
                    if order % 2 == 1 && spectral.is_nyquist(j) {
                        continue;
                    }
                    *s += Complex64::new(0.0, spectral.k[j]).powu(order as u32) * to_f64(q);
                }
            }
            None => rest += JetExpression::from_raw_term(q.clone(), key.monomial.clone(), key.atoms.clone()),
        }
    }
    (symbol, rest)
}

/// Spectral-radius bound `Σ_k |∂N/∂u_(k)| k_max^k` of the linearized nonlinear part at the initial state.
fn advective_bound(
    ev: &GridEvaluator,
    e: &JetExpression,
    t: f64,
    u: &[f64],
    v: Option<&[f64]>,
    k_max: f64,
) -> Result<f64, NumError> {
    let mut bound = vec![0.0; u.len()];
    for c in e.dependent_coordinates() {
        let (_, x) = c.orders().expect("dependent");
        let d = ev.eval(&CompiledExpr::new(&e.partial(c)), t, u, v)?;
        for (b, w) in bound.iter_mut().zip(d) {
            *b += w.abs() * k_max.powi(x as i32);
        }
    }
    Ok(bound.into_iter().fold(0.0, f64::max))
}

/// Classical RK4 stability interval on the imaginary axis, with a safety margin.
const RK4_LIMIT: f64 = 2.5;

fn check_blowup(t: f64, u: &[f64]) -> Result<(), NumError> {
    let norm = u.iter().fold(0.0f64, |m, w| if w.is_finite() { m.max(w.abs()) } else { f64::INFINITY });
    if norm > 1e8 {
        return Err(NumError::Unstable { t, norm });
    }
    Ok(())
}

fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn integrate_pde(pde: &PdeSpec, initial: &InitialData, cfg: &GridConfig) -> Result<Trajectory, NumError> {
    cfg.validate()?;
    if initial.u.len() != cfg.n {
        return Err(NumError::InvalidGrid(format!("initial data has {} points, grid has {}", initial.u.len(), cfg.n)));
    }
    let spectral = Spectral::new(cfg);
    let xs = cfg.grid();
    let ev = GridEvaluator { pde, spectral: &spectral, xs: &xs };
    let steps = cfg.steps();
    let dt = cfg.dt;
    let mut snapshots = Vec::with_capacity(steps + 1);
    match pde.shape() {
        Shape::Evolution => {
            let (symbol, nonlinear) = split_linear(&pde.rhs, &spectral);
            let limit = RK4_LIMIT / advective_bound(&ev, &nonlinear, 0.0, &initial.u, None, cfg.k_max())?.max(1e-12);
            if dt > limit {
                return Err(NumError::StepTooLarge { dt, limit });
            }
            let n_expr = CompiledExpr::new(&nonlinear);
            let half: Vec<Complex64> = symbol.iter().map(|s| (s * (dt / 2.0)).exp()).collect();
            let nl = |t: f64, uh: &[Complex64]| -> Result<Vec<Complex64>, NumError> {
                let u = spectral.inverse(uh.to_vec());
                let w = ev.eval(&n_expr, t, &u, None)?;
                Ok(spectral.forward(&w).into_iter().map(|c| c * dt).collect())
            };
            let mul = |a: &[Complex64], b: &[Complex64]| -> Vec<Complex64> { a.iter().zip(b).map(|(x, y)| x * y).collect() };
            let mut uh = spectral.forward(&initial.u);
            snapshots.push(Snapshot { t: 0.0, u: initial.u.clone(), v: None });
            for step in 0..steps {
                let t = step as f64 * dt;
                let k1 = nl(t, &uh)?;
                let eu = mul(&half, &uh);
                let a: Vec<Complex64> = eu.iter().zip(mul(&half, &k1)).map(|(x, y)| x + y * 0.5).collect();
                let k2 = nl(t + dt / 2.0, &a)?;
                let b: Vec<Complex64> = eu.iter().zip(&k2).map(|(x, y)| x + y * 0.5).collect();
                let k3 = nl(t + dt / 2.0, &b)?;
                let e2u = mul(&half, &eu);
                let ek3 = mul(&half, &k3);
                let c: Vec<Complex64> = e2u.iter().zip(&ek3).map(|(x, y)| x + y).collect();
                let k4 = nl(t + dt, &c)?;
                let e2k1 = mul(&half, &mul(&half, &k1));
                let ek23 = mul(&half, &k2.iter().zip(&k3).map(|(x, y)| x + y).collect::<Vec<_>>());
                uh = (0..uh.len()).map(|j| e2u[j] + (e2k1[j] + ek23[j] * 2.0 + k4[j]) / 6.0).collect();
                let u = spectral.inverse(uh.clone());
                check_blowup(t + dt, &u)?;
                snapshots.push(Snapshot { t: (step + 1) as f64 * dt, u, v: None });
            }
        }
        Shape::Wave => {
            let v0 = initial.ut.clone().ok_or(NumError::MissingVelocity)?;
            let speed_sq = ev.eval(&CompiledExpr::new(&pde.rhs.partial(JetCoordinate::deriv(0, 2))), 0.0, &initial.u, Some(&v0))?;
            let c_max = speed_sq.iter().fold(0.0f64, |m, w| m.max(w.abs().sqrt()));
            let limit = RK4_LIMIT / (c_max * cfg.k_max()).max(1e-12);
            if dt > limit {
                return Err(NumError::StepTooLarge { dt, limit });
            }
            let f = CompiledExpr::new(&pde.rhs);
            let rhs = |t: f64, u: &[f64], v: &[f64]| -> Result<(Vec<f64>, Vec<f64>), NumError> {
                Ok((v.to_vec(), ev.eval(&f, t, u, Some(v))?))
            };
            let (mut u, mut v) = (initial.u.clone(), v0);
            snapshots.push(Snapshot { t: 0.0, u: u.clone(), v: Some(v.clone()) });
            for step in 0..steps {
                let t = step as f64 * dt;
                let (a1, b1) = rhs(t, &u, &v)?;
                let (a2, b2) = rhs(t + dt / 2.0, &axpy(&u, dt / 2.0, &a1), &axpy(&v, dt / 2.0, &b1))?;
                let (a3, b3) = rhs(t + dt / 2.0, &axpy(&u, dt / 2.0, &a2), &axpy(&v, dt / 2.0, &b2))?;
                let (a4, b4) = rhs(t + dt, &axpy(&u, dt, &a3), &axpy(&v, dt, &b3))?;
                for j in 0..u.len() {
                    u[j] += dt / 6.0 * (a1[j] + 2.0 * a2[j] + 2.0 * a3[j] + a4[j]);
                    v[j] += dt / 6.0 * (b1[j] + 2.0 * b2[j] + 2.0 * b3[j] + b4[j]);
                }
                check_blowup(t + dt, &u)?;
                snapshots.push(Snapshot { t: (step + 1) as f64 * dt, u: u.clone(), v: Some(v.clone()) });
            }
        }
        Shape::Mixed => {
            // ∂_x^{-1} is bounded by 1/k_min, so the step limit comes from the g linearization.
            let bound = advective_bound(&ev, &pde.rhs, 0.0, &initial.u, None, cfg.k_max())?;
            let limit = RK4_LIMIT * 2.0 * PI / cfg.length / bound.max(1e-12);
            if dt > limit {
                return Err(NumError::StepTooLarge { dt, limit });
            }
            let mut u = initial.u.clone();
            snapshots.push(Snapshot { t: 0.0, u: u.clone(), v: None });
            for step in 0..steps {
                let t = step as f64 * dt;
                let k1 = ev.mixed_ut(t, &u)?;
                let k2 = ev.mixed_ut(t + dt / 2.0, &axpy(&u, dt / 2.0, &k1))?;
                let k3 = ev.mixed_ut(t + dt / 2.0, &axpy(&u, dt / 2.0, &k2))?;
                let k4 = ev.mixed_ut(t + dt, &axpy(&u, dt, &k3))?;
                for j in 0..u.len() {
                    u[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
                }
                check_blowup(t + dt, &u)?;
                snapshots.push(Snapshot { t: (step + 1) as f64 * dt, u: u.clone(), v: None });
            }
        }
    }
    Ok(Trajectory { pde: pde.clone(), cfg: *cfg, snapshots })
}

/// One row of the conserved-quantity time series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DriftSample {
    pub t: f64,
    pub q: f64,
    pub drift: f64,
}

/// `Q(t) = ∫ Φ^t dx` by the periodic trapezoidal rule at every snapshot.
pub fn conserved_series(density_t: &JetExpression, traj: &Trajectory) -> Result<Vec<DriftSample>, NumError> {
    let spectral = Spectral::new(&traj.cfg);
    let xs = traj.cfg.grid();
    let ev = GridEvaluator { pde: &traj.pde, spectral: &spectral, xs: &xs };
    let compiled = CompiledExpr::new(density_t);
    let dx = traj.cfg.dx();
    let qs = traj
        .snapshots
        .par_iter()
        .map(|s| Ok(ev.eval(&compiled, s.t, &s.u, s.v.as_deref())?.iter().sum::<f64>() * dx))
        .collect::<Result<Vec<f64>, NumError>>()?;
    let q0 = qs.first().copied().unwrap_or(0.0);
    let scale = q0.abs().max(1.0);
    Ok(traj
        .snapshots
        .iter()
        .zip(qs)
        .map(|(s, q)| DriftSample { t: s.t, q, drift: (q - q0).abs() / scale })
        .collect())
}

/// `max_t |Q(t) − Q(0)| / max(1, |Q(0)|)`.
pub fn conserved_drift(density_t: &JetExpression, traj: &Trajectory) -> Result<f64, NumError> {
    Ok(conserved_series(density_t, traj)?.iter().map(|s| s.drift).fold(0.0, f64::max))
}

/// Drifts are treated as converged below this level (roundoff floor).
pub const ROUNDOFF_DRIFT: f64 = 1e-12;

/// Drift of several densities at successive time-step halvings on a fixed grid.
#[derive(Clone, Debug, Serialize)]
pub struct RefinementStudy {
    pub density: String,
    pub dts: Vec<f64>,
    pub drifts: Vec<f64>,
}

impl RefinementStudy {
    /// Ratios `drift(dt) / drift(dt/2)`.
    pub fn ratios(&self) -> Vec<f64> {
        self.drifts.windows(2).map(|w| w[0] / w[1]).collect()
    }

    /// Every halving either divides the drift by at least `min_ratio` or lands below the roundoff
    /// floor, and the finest drift is at most `tol`.
    pub fn converges(&self, min_ratio: f64, tol: f64) -> bool {
        let finest_ok = self.drifts.last().is_some_and(|&d| d <= tol);
        finest_ok && self.drifts.windows(2).all(|w| w[1] <= ROUNDOFF_DRIFT || w[0] / w[1] >= min_ratio)
    }

    pub fn finest(&self) -> f64 {
        self.drifts.last().copied().unwrap_or(f64::NAN)
    }
}

/// Runs `levels` integrations with `dt, dt/2, ...` (in parallel) and measures every density on each.
pub fn refinement_study(
    pde: &PdeSpec,
    initial: &InitialData,
    cfg: &GridConfig,
    densities: &[JetExpression],
    levels: usize,
) -> Result<Vec<RefinementStudy>, NumError> {
    let cfgs: Vec<GridConfig> =
        (0..levels).map(|l| GridConfig { dt: cfg.dt / f64::from(1u32 << l), ..*cfg }).collect();
    let per_level = cfgs
        .par_iter()
        .map(|c| {
            let traj = integrate_pde(pde, initial, c)?;
            densities.iter().map(|d| conserved_drift(d, &traj)).collect::<Result<Vec<f64>, NumError>>()
        })
        .collect::<Result<Vec<_>, NumError>>()?;
    Ok(densities
        .iter()
        .enumerate()
        .map(|(i, d)| RefinementStudy {
            density: d.to_string(),
            dts: cfgs.iter().map(|c| c.dt).collect(),
            drifts: per_level.iter().map(|row| row[i]).collect(),
        })
        .collect())
}

/// CSV with header `t,Q,drift`.
pub fn series_csv(series: &[DriftSample]) -> String {
    let mut out = String::from("t,Q,drift\n");
    for s in series {
        out.push_str(&format!("{},{:.17e},{:.6e}\n", s.t, s.q, s.drift));
    }
    out
}

/// Metadata accompanying a CSV series.
pub fn run_metadata(cfg: &GridConfig, pde: &PdeSpec, law_id: &str) -> serde_json::Value {
    let params: BTreeMap<&String, String> = pde.params.iter().map(|(k, v)| (k, v.to_string())).collect();
    serde_json::json!({ "cfg": cfg, "pde": pde.to_string(), "params": params, "law": law_id })
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

    #[test]
    fn spectral_derivatives() {
        let cfg = GridConfig { length: 2.0 * PI, n: 64, dt: 0.1, horizon: 0.0 };
        let sp = Spectral::new(&cfg);
        let xs = cfg.grid();
        let u: Vec<f64> = xs.iter().map(|x| (3.0 * x).sin()).collect();
        let d3 = sp.derivative(&u, 3);
        for (x, d) in xs.iter().zip(&d3) {
            assert!((d + 27.0 * (3.0 * x).cos()).abs() < 1e-10);
        }
        let a = sp.antiderivative(&u);
        for (x, w) in xs.iter().zip(&a) {
            assert!((w + (3.0 * x).cos() / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_split() {
        let cfg = GridConfig { length: 2.0 * PI, n: 64, dt: 0.1, horizon: 0.0 };
        let sp = Spectral::new(&cfg);
        let (sym, rest) = split_linear(&pde("u_t + u*u_x + u_xxx = 0").rhs, &sp);
        assert_eq!(rest, p("-u*u_x"));
        assert!((sym[2] - Complex64::new(0.0, 8.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_data_stays_zero() {
        let cfg = GridConfig { length: 20.0, n: 64, dt: 0.01, horizon: 0.5 };
        let kdv = pde("u_t + u*u_x + u_xxx = 0");
        let traj = integrate_pde(&kdv, &InitialData { u: vec![0.0; 64], ut: None }, &cfg).unwrap();
        assert!(traj.snapshots.iter().all(|s| s.u.iter().all(|w| *w == 0.0)));
        let sg = pde("u_tx = sin(u)");
        let traj = integrate_pde(&sg, &InitialData { u: vec![0.0; 64], ut: None }, &cfg).unwrap();
        assert!(traj.snapshots.last().unwrap().u.iter().all(|w| *w == 0.0));
    }

    #[test]
    fn linear_advection_is_exact_in_time_for_integrating_factor() {
        // u_t = -u_x: pure linear part, the Lawson step is exact.
        let cfg = GridConfig { length: 2.0 * PI, n: 64, dt: 0.1, horizon: 1.0 };
        let init = InitialData::sample(&cfg, |x| x.sin(), None);
        let traj = integrate_pde(&pde("u_t = -u_x"), &init, &cfg).unwrap();
        let last = traj.snapshots.last().unwrap();
        for (x, w) in cfg.grid().iter().zip(&last.u) {
            assert!((w - (x - last.t).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_unstable_step_and_bad_grid() {
        let cfg = GridConfig { length: 60.0, n: 256, dt: 0.5, horizon: 1.0 };
        let kdv = pde("u_t + u*u_x + u_xxx = 0");
        let err = integrate_pde(&kdv, &kdv_two_soliton(&cfg, 0.0), &cfg).unwrap_err();
        assert!(matches!(err, NumError::StepTooLarge { .. }));
        let small = GridConfig { n: 32, ..cfg };
        assert!(matches!(small.validate(), Err(NumError::TooFewPoints(32))));
    }

    #[test]
    fn kdv_mass_is_conserved_to_roundoff() {
        let cfg = GridConfig { length: 60.0, n: 128, dt: 0.02, horizon: 1.0 };
        let kdv = pde("u_t + u*u_x + u_xxx = 0");
        let traj = integrate_pde(&kdv, &kdv_two_soliton(&cfg, -10.0), &cfg).unwrap();
        assert!(conserved_drift(&p("u"), &traj).unwrap() < 1e-12);
        assert!(conserved_drift(&p("u^3"), &traj).unwrap() > 1e-3);
    }

    #[test]
    fn csv_and_metadata() {
        let s = [DriftSample { t: 0.0, q: 1.0, drift: 0.0 }, DriftSample { t: 0.5, q: 1.5, drift: 0.5 }];
        let csv = series_csv(&s);
        assert!(csv.starts_with("t,Q,drift\n0,"));
        assert_eq!(csv.lines().count(), 3);
        let cfg = GridConfig { length: 1.0, n: 64, dt: 0.1, horizon: 1.0 };
        let m = run_metadata(&cfg, &pde("u_t = u_xx"), "heat-mass");
        assert_eq!(m["law"], "heat-mass");
        assert_eq!(m["cfg"]["n"], 64);
    }
}
