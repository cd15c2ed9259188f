//! Command-line front end: argument model, run configuration and report generation.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::Signed;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::conslaw::{verify_report, ConservationLaw, LawRecord};
use crate::jet::{parse_expression, parse_expression_with, CompiledExpr, JetCoordinate, JetExpression};
use crate::linsolve::{derive_multipliers, AnsatzBounds, DeriveError};
use crate::numcheck::{
    kdv_two_soliton, refinement_study, run_metadata, series_csv, sine_gordon_breather, wave_pulse, conserved_series,
    integrate_pde, GridConfig, InitialData, NumError,
};
use crate::pde::{parse_pde, PdeError, PdeSpec, Shape};
use crate::rational::{as_u32, Rational};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Derive(#[from] DeriveError),
    #[error(transparent)]
    Numeric(#[from] NumError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Parser, Debug)]
#[command(name = "conslaw", version, about = "Conservation laws of scalar 1+1 PDEs via multipliers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve the determining system within an ansatz and construct every law.
    Derive(DeriveArgs),
    /// Check given multipliers (or all derived ones) and report failures.
    Verify(VerifyArgs),
    /// Φ^t and Φ^x for given multipliers.
    Density(DensityArgs),
    /// Re-run derive for each value of an integer parameter.
    Scan(ScanArgs),
    /// Integrate the equation numerically and measure conserved-quantity drift.
    Numcheck(NumcheckArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    #[default]
    Text,
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Equation text such as `u_t + u*u_x + u_xxx = 0`, or a path to a file containing it.
    #[arg(long)]
    pub pde: String,
    /// Parameter binding `name=value` (repeatable).
    #[arg(long = "param", value_name = "K=V")]
    pub params: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reference function ũ(t, x) used when ũ = 0 is singular.
    #[arg(long)]
    pub utilde: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct AnsatzArgs {
    /// Highest derivative order in the multiplier.
    #[arg(long, default_value_t = 2)]
    pub order: u16,
    /// Degree in t and x; may use parameters, e.g. `n-1`.
    #[arg(long = "deg-tx", default_value = "1")]
    pub deg_tx: String,
    /// Degree in the dependent coordinates; may use parameters, e.g. `n+1`.
    #[arg(long = "deg-u", default_value = "2")]
    pub deg_u: String,
    /// Comma-separated extra factors, e.g. `pow(u,-2),exp(u)`.
    #[arg(long)]
    pub atoms: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct DeriveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub ansatz: AnsatzArgs,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub ansatz: AnsatzArgs,
    /// Multiplier to check (repeatable); without any, every derived multiplier is checked.
    #[arg(long = "lambda")]
    pub lambdas: Vec<String>,
}

#[derive(Args, Debug, Clone)]
pub struct DensityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Multiplier (repeatable).
    #[arg(long = "lambda", required = true)]
    pub lambdas: Vec<String>,
}

#[derive(Args, Debug, Clone)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub ansatz: AnsatzArgs,
    /// Integer range `k=a..b`, inclusive.
    #[arg(long)]
    pub scan: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitPreset {
    /// `4 sech²((x − center)/3)`.
    KdvTwoSoliton,
    /// `background + amplitude·exp(−(x − center)²)` moving right.
    WavePulse,
    /// Light-cone breather of `u_tx = sin u` with frequency `omega`.
    Breather,
}

#[derive(Args, Debug, Clone)]
pub struct NumcheckArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub ansatz: AnsatzArgs,
    /// Multiplier whose law is checked (repeatable); without any, every derived multiplier is used.
    #[arg(long = "lambda")]
    pub lambdas: Vec<String>,
    /// Density expected not to be conserved (repeatable).
    #[arg(long = "probe")]
    pub probes: Vec<String>,
    #[arg(long, value_enum)]
    pub init: Option<InitPreset>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub center: f64,
    #[arg(long, default_value_t = 0.05)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 1.0)]
    pub background: f64,
    #[arg(long, default_value_t = 0.6)]
    pub omega: f64,
    #[arg(long, default_value_t = 100.0)]
    pub length: f64,
    #[arg(long, default_value_t = 512)]
    pub points: usize,
    #[arg(long, default_value_t = 0.02)]
    pub dt: f64,
    #[arg(long, default_value_t = 2.0)]
    pub horizon: f64,
    /// Number of successive dt halvings.
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    /// Minimum drift ratio per halving.
    #[arg(long, default_value_t = 8.0)]
    pub min_ratio: f64,
    /// Maximum relative drift at the finest step.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Directory for per-law CSV series and metadata at the finest step.
    #[arg(long = "csv-dir")]
    pub csv_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Derive,
    Verify,
    Density,
    Scan,
    Numcheck,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NumcheckSettings {
    pub init: Option<InitPreset>,
    pub center: f64,
    pub amplitude: f64,
    pub background: f64,
    pub omega: f64,
    pub grid: GridConfig,
    pub levels: usize,
    pub min_ratio: f64,
    pub tol: f64,
    pub probes: Vec<String>,
    pub csv_dir: Option<PathBuf>,
}

/// Validated, command-independent view of one invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub pde: String,
    pub params: BTreeMap<String, Rational>,
    pub order: u16,
    pub deg_tx: String,
    pub deg_u: String,
    pub atoms: Vec<String>,
    pub utilde: Option<String>,
    pub lambdas: Vec<String>,
    pub scan: Option<(String, i64, i64)>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub numcheck: Option<NumcheckSettings>,
}

/// Splits on commas outside parentheses.
pub fn split_top_level(list: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in list.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    out.push(cur);
    out.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn parse_rational_literal(text: &str) -> Result<Rational, CliError> {
    parse_expression(text)
        .ok()
        .and_then(|e| e.as_constant())
        .ok_or_else(|| CliError::Invalid(format!("`{text}` is not a rational number")))
}

pub fn parse_params(items: &[String]) -> Result<BTreeMap<String, Rational>, CliError> {
    let mut out = BTreeMap::new();
    for item in items {
        let (k, v) = item.split_once('=').ok_or_else(|| CliError::Invalid(format!("expected k=v, got `{item}`")))?;
        out.insert(k.trim().to_string(), parse_rational_literal(v.trim())?);
    }
    Ok(out)
}

pub fn parse_scan(text: &str) -> Result<(String, i64, i64), CliError> {
    let bad = || CliError::Invalid(format!("expected k=a..b, got `{text}`"));
    let (k, range) = text.split_once('=').ok_or_else(bad)?;
    let (a, b) = range.split_once("..").ok_or_else(bad)?;
    let a: i64 = a.trim().parse().map_err(|_| bad())?;
    let b: i64 = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok((k.trim().to_string(), a, b))
}

fn pde_text(arg: &str) -> Result<String, CliError> {
    let path = std::path::Path::new(arg);
    if !arg.contains('=') && path.is_file() {
        return Ok(std::fs::read_to_string(path)?.trim().to_string());
    }
    Ok(arg.to_string())
}

impl RunConfig {
    fn base(kind: CommandKind, common: &CommonArgs, ansatz: Option<&AnsatzArgs>) -> Result<Self, CliError> {
        let (order, deg_tx, deg_u, atoms) = match ansatz {
            Some(a) => (a.order, a.deg_tx.clone(), a.deg_u.clone(), a.atoms.as_deref().map(split_top_level).unwrap_or_default()),
            None => (0, "0".into(), "0".into(), Vec::new()),
        };
        Ok(RunConfig {
            command: kind,
            pde: pde_text(&common.pde)?,
            params: parse_params(&common.params)?,
            order,
            deg_tx,
            deg_u,
            atoms,
            utilde: common.utilde.clone(),
            lambdas: Vec::new(),
            scan: None,
            format: common.format,
            out: common.out.clone(),
            numcheck: None,
        })
    }

    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        match &cli.command {
            Command::Derive(a) => Self::base(CommandKind::Derive, &a.common, Some(&a.ansatz)),
            Command::Verify(a) => Ok(RunConfig { lambdas: a.lambdas.clone(), ..Self::base(CommandKind::Verify, &a.common, Some(&a.ansatz))? }),
            Command::Density(a) => Ok(RunConfig { lambdas: a.lambdas.clone(), ..Self::base(CommandKind::Density, &a.common, None)? }),
            Command::Scan(a) => Ok(RunConfig { scan: Some(parse_scan(&a.scan)?), ..Self::base(CommandKind::Scan, &a.common, Some(&a.ansatz))? }),
            Command::Numcheck(a) => {
                let grid = GridConfig { length: a.length, n: a.points, dt: a.dt, horizon: a.horizon };
                grid.validate()?;
                if a.levels < 2 {
                    return Err(CliError::Invalid("numcheck needs at least 2 refinement levels".into()));
                }
                let settings = NumcheckSettings {
                    init: a.init,
                    center: a.center,
                    amplitude: a.amplitude,
                    background: a.background,
                    omega: a.omega,
                    grid,
                    levels: a.levels,
                    min_ratio: a.min_ratio,
                    tol: a.tol,
                    probes: a.probes.clone(),
                    csv_dir: a.csv_dir.clone(),
                };
                Ok(RunConfig {
                    lambdas: a.lambdas.clone(),
                    numcheck: Some(settings),
                    ..Self::base(CommandKind::Numcheck, &a.common, Some(&a.ansatz))?
                })
            }
        }
    }

    fn pde_with(&self, params: &BTreeMap<String, Rational>) -> Result<PdeSpec, CliError> {
        Ok(parse_pde(&self.pde, params)?)
    }

    fn expr(&self, text: &str, params: &BTreeMap<String, Rational>) -> Result<JetExpression, CliError> {
        parse_expression_with(text, params).map_err(|e| CliError::Invalid(format!("`{text}`: {e}")))
    }

    fn degree(&self, text: &str, params: &BTreeMap<String, Rational>) -> Result<u32, CliError> {
        let e = self.expr(text, params)?;
        e.as_constant()
            .filter(|q| !q.is_negative())
            .and_then(|q| as_u32(&q))
            .ok_or_else(|| CliError::Invalid(format!("degree `{text}` must evaluate to a nonnegative integer")))
    }

    pub fn bounds(&self, params: &BTreeMap<String, Rational>) -> Result<AnsatzBounds, CliError> {
        Ok(AnsatzBounds {
            order: self.order,
            deg_tx: self.degree(&self.deg_tx, params)?,
            deg_u: self.degree(&self.deg_u, params)?,
            atoms: self.atoms.iter().map(|a| self.expr(a, params)).collect::<Result<_, _>>()?,
        })
    }

    fn utilde_expr(&self, params: &BTreeMap<String, Rational>) -> Result<Option<JetExpression>, CliError> {
        self.utilde.as_deref().map(|u| self.expr(u, params)).transpose()
    }
}

/// Outcome of one invocation: process exit code plus both renderings.
#[derive(Clone, Debug)]
pub struct Report {
    pub exit_code: i32,
    pub json: Value,
    pub text: String,
}

impl Report {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => serde_json::to_string_pretty(&self.json).expect("serializable") + "\n",
            Format::Text => self.text.clone(),
        }
    }
}

/// Law record extended with a failure description.
#[derive(Clone, Debug, Serialize)]
struct LawEntry {
    #[serde(flatten)]
    record: LawRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    failure: Option<String>,
}

fn law_entry(pde: &PdeSpec, lambda: &JetExpression, utilde: Option<&JetExpression>) -> LawEntry {
    match ConservationLaw::from_multiplier(pde, lambda, utilde) {
        Ok(cl) => LawEntry { failure: verify_report(&cl).failure(), record: cl.record() },
        Err(e) => LawEntry {
            record: LawRecord {
                pde: pde.to_string(),
                lambda: lambda.to_string(),
                phi_t: String::new(),
                phi_x: String::new(),
                utilde: utilde.map(|u| u.to_string()).unwrap_or_else(|| "0".into()),
                verified: false,
            },
            failure: Some(e.to_string()),
        },
    }
}

fn params_json(params: &BTreeMap<String, Rational>) -> Value {
    Value::Object(params.iter().map(|(k, v)| (k.clone(), Value::String(v.to_string()))).collect())
}

fn ansatz_json(bounds: &AnsatzBounds, size: Option<usize>) -> Value {
    json!({
        "order": bounds.order,
        "deg_tx": bounds.deg_tx,
        "deg_u": bounds.deg_u,
        "atoms": bounds.atoms.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
        "size": size,
    })
}

fn laws_text(out: &mut String, laws: &[LawEntry]) {
    for (i, l) in laws.iter().enumerate() {
        let status = if l.record.verified { "verified" } else { "FAILED" };
        out.push_str(&format!("law {}: {}\n  lambda = {}\n", i + 1, status, l.record.lambda));
        if !l.record.phi_t.is_empty() {
            out.push_str(&format!("  phi_t  = {}\n  phi_x  = {}\n", l.record.phi_t, l.record.phi_x));
        }
        if l.record.utilde != "0" {
            out.push_str(&format!("  utilde = {}\n", l.record.utilde));
        }
        if let Some(f) = &l.failure {
            out.push_str(&format!("  failure: {f}\n"));
        }
    }
}

struct DerivedPoint {
    pde: PdeSpec,
    bounds: AnsatzBounds,
    size: usize,
    equations: usize,
    rows: usize,
    laws: Vec<LawEntry>,
}

fn derive_point(cfg: &RunConfig, params: &BTreeMap<String, Rational>) -> Result<DerivedPoint, CliError> {
    let pde = cfg.pde_with(params)?;
    let bounds = cfg.bounds(params)?;
    let utilde = cfg.utilde_expr(params)?;
    let d = derive_multipliers(&pde, &bounds)?;
    let laws = d.multipliers.par_iter().map(|m| law_entry(&pde, m, utilde.as_ref())).collect();
    Ok(DerivedPoint { size: d.ansatz.basis.len(), equations: d.equations, rows: d.rows, laws, pde, bounds })
}

fn all_verified(laws: &[LawEntry]) -> bool {
    laws.iter().all(|l| l.record.verified)
}

fn run_derive(cfg: &RunConfig) -> Result<Report, CliError> {
    let p = derive_point(cfg, &cfg.params)?;
    let json = json!({
        "pde": p.pde.to_string(),
        "params": params_json(&cfg.params),
        "ansatz": ansatz_json(&p.bounds, Some(p.size)),
        "laws": p.laws,
        "dimensions": { "ansatz": p.size, "equations": p.equations, "rows": p.rows, "multipliers": p.laws.len() },
    });
    let mut text = format!(
        "{}\nansatz: {} elements, {} determining equations, {} linear rows\nmultipliers: {}\n",
        p.pde,
        p.size,
        p.equations,
        p.rows,
        p.laws.len()
    );
    laws_text(&mut text, &p.laws);
    Ok(Report { exit_code: if all_verified(&p.laws) { 0 } else { 1 }, json, text })
}

fn given_laws(cfg: &RunConfig, pde: &PdeSpec) -> Result<Vec<LawEntry>, CliError> {
    let utilde = cfg.utilde_expr(&cfg.params)?;
    let lambdas = cfg.lambdas.iter().map(|l| cfg.expr(l, &cfg.params)).collect::<Result<Vec<_>, _>>()?;
    Ok(lambdas.par_iter().map(|l| law_entry(pde, l, utilde.as_ref())).collect())
}

fn run_verify(cfg: &RunConfig) -> Result<Report, CliError> {
    if cfg.lambdas.is_empty() {
        return run_derive(cfg);
    }
    let pde = cfg.pde_with(&cfg.params)?;
    let laws = given_laws(cfg, &pde)?;
    let passed = laws.iter().filter(|l| l.record.verified).count();
    let json = json!({
        "pde": pde.to_string(),
        "params": params_json(&cfg.params),
        "ansatz": Value::Null,
        "laws": laws,
        "dimensions": { "checked": laws.len(), "verified": passed },
    });
    let mut text = format!("{pde}\n{passed} of {} laws verified\n", laws.len());
    laws_text(&mut text, &laws);
    Ok(Report { exit_code: if passed == laws.len() { 0 } else { 1 }, json, text })
}

fn run_density(cfg: &RunConfig) -> Result<Report, CliError> {
    let pde = cfg.pde_with(&cfg.params)?;
    let laws = given_laws(cfg, &pde)?;
    let json = json!({
        "pde": pde.to_string(),
        "params": params_json(&cfg.params),
        "ansatz": Value::Null,
        "laws": laws,
        "dimensions": { "laws": laws.len() },
    });
    let mut text = format!("{pde}\n");
    laws_text(&mut text, &laws);
    Ok(Report { exit_code: if all_verified(&laws) { 0 } else { 1 }, json, text })
}

fn run_scan(cfg: &RunConfig) -> Result<Report, CliError> {
    let (key, a, b) = cfg.scan.clone().ok_or_else(|| CliError::Invalid("scan range missing".into()))?;
    let points = (a..=b)
        .into_par_iter()
        .map(|v| {
            let mut params = cfg.params.clone();
            params.insert(key.clone(), Rational::from_integer(v.into()));
            derive_point(cfg, &params).map(|p| (v, p))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let dims: serde_json::Map<String, Value> = points.iter().map(|(v, p)| (v.to_string(), json!(p.laws.len()))).collect();
    let ok = points.iter().all(|(_, p)| all_verified(&p.laws));
    let json = json!({
        "pde": cfg.pde,
        "params": params_json(&cfg.params),
        "ansatz": { "order": cfg.order, "deg_tx": cfg.deg_tx, "deg_u": cfg.deg_u, "atoms": cfg.atoms },
        "scan": { "param": key, "from": a, "to": b },
        "laws": points.iter().flat_map(|(_, p)| p.laws.iter()).collect::<Vec<_>>(),
        "points": points.iter().map(|(v, p)| json!({
            "value": v,
            "pde": p.pde.to_string(),
            "ansatz_size": p.size,
            "multipliers": p.laws.iter().map(|l| l.record.lambda.clone()).collect::<Vec<_>>(),
            "laws": p.laws,
        })).collect::<Vec<_>>(),
        "dimensions": dims,
    });
    let mut text = format!("scan {key} = {a}..{b}: {}\n", cfg.pde);
    for (v, p) in &points {
        text.push_str(&format!("{key} = {v}: dimension {}\n", p.laws.len()));
        for l in &p.laws {
            let mark = if l.record.verified { "" } else { "  [FAILED]" };
            text.push_str(&format!("  {}{mark}\n", l.record.lambda));
        }
    }
    Ok(Report { exit_code: if ok { 0 } else { 1 }, json, text })
}

fn default_preset(shape: Shape) -> InitPreset {
    match shape {
        Shape::Evolution => InitPreset::KdvTwoSoliton,
        Shape::Wave => InitPreset::WavePulse,
        Shape::Mixed => InitPreset::Breather,
    }
}

fn initial_data(pde: &PdeSpec, s: &NumcheckSettings) -> Result<InitialData, CliError> {
    let preset = s.init.unwrap_or_else(|| default_preset(pde.shape()));
    let g = &s.grid;
    Ok(match preset {
        InitPreset::KdvTwoSoliton => kdv_two_soliton(g, s.center),
        InitPreset::Breather => sine_gordon_breather(g, s.omega, s.center),
        InitPreset::WavePulse => {
            let speed_sq = CompiledExpr::new(&pde.rhs.partial(JetCoordinate::deriv(0, 2)));
            if speed_sq.coordinates().iter().any(|c| *c != JetCoordinate::u()) {
                return Err(CliError::Invalid("wave-pulse needs a wave speed depending on u only".into()));
            }
            let speed = |u: f64| speed_sq.eval(&vec![u; speed_sq.coordinates().len()]).sqrt();
            let mut init = wave_pulse(g, s.background, s.amplitude, speed);
            if s.center != 0.0 {
                let shift = (s.center / g.dx()).round() as i64;
                let n = g.n as i64;
                let rot = |v: &Vec<f64>| (0..n).map(|j| v[(j - shift).rem_euclid(n) as usize]).collect::<Vec<f64>>();
                init = InitialData { u: rot(&init.u), ut: init.ut.as_ref().map(rot) };
            }
            init
        }
    })
}

fn run_numcheck(cfg: &RunConfig) -> Result<Report, CliError> {
    let s = cfg.numcheck.as_ref().ok_or_else(|| CliError::Invalid("numcheck settings missing".into()))?;
    let pde = cfg.pde_with(&cfg.params)?;
    let laws = if cfg.lambdas.is_empty() { derive_point(cfg, &cfg.params)?.laws } else { given_laws(cfg, &pde)? };
    let usable: Vec<&LawEntry> = laws.iter().filter(|l| l.record.verified).collect();
    let mut densities: Vec<JetExpression> =
        usable.iter().map(|l| parse_expression(&l.record.phi_t).expect("rendered density parses")).collect();
    let probes = s.probes.iter().map(|p| cfg.expr(p, &cfg.params)).collect::<Result<Vec<_>, _>>()?;
    densities.extend(probes.iter().cloned());
    let init = initial_data(&pde, s)?;
    let studies = refinement_study(&pde, &init, &s.grid, &densities, s.levels)?;
    let (law_studies, probe_studies) = studies.split_at(usable.len());
    let passes: Vec<bool> = law_studies.iter().map(|st| st.converges(s.min_ratio, s.tol)).collect();

    if let Some(dir) = &s.csv_dir {
        std::fs::create_dir_all(dir)?;
        let finest = GridConfig { dt: s.grid.dt / f64::from(1u32 << (s.levels - 1)), ..s.grid };
        let traj = integrate_pde(&pde, &init, &finest)?;
        for (i, d) in densities.iter().enumerate() {
            let id = if i < usable.len() { format!("law{}", i + 1) } else { format!("probe{}", i + 1 - usable.len()) };
            std::fs::write(dir.join(format!("{id}.csv")), series_csv(&conserved_series(d, &traj)?))?;
            let meta = run_metadata(&finest, &pde, &format!("{id}: {d}"));
            std::fs::write(dir.join(format!("{id}.json")), serde_json::to_string_pretty(&meta).expect("json"))?;
        }
    }

    let unverified = laws.len() - usable.len();
    let ok = passes.iter().all(|p| *p) && unverified == 0;
    let json = json!({
        "pde": pde.to_string(),
        "params": params_json(&cfg.params),
        "ansatz": if cfg.lambdas.is_empty() { ansatz_json(&cfg.bounds(&cfg.params)?, None) } else { Value::Null },
        "laws": laws,
        "grid": s.grid,
        "levels": s.levels,
        "criteria": { "min_ratio": s.min_ratio, "tol": s.tol },
        "studies": law_studies.iter().zip(&passes).map(|(st, p)| json!({
            "density": st.density, "dts": st.dts, "drifts": st.drifts, "ratios": st.ratios(), "converged": p,
        })).collect::<Vec<_>>(),
        "probes": probe_studies.iter().map(|st| json!({ "density": st.density, "drifts": st.drifts })).collect::<Vec<_>>(),
        "dimensions": { "laws": laws.len(), "converged": passes.iter().filter(|p| **p).count() },
    });
    let mut text = format!(
        "{pde}\ngrid L = {}, N = {}, T = {}, dt = {} halved {} times\n",
        s.grid.length,
        s.grid.n,
        s.grid.horizon,
        s.grid.dt,
        s.levels - 1
    );
    for (st, p) in law_studies.iter().zip(&passes) {
        let drifts: Vec<String> = st.drifts.iter().map(|d| format!("{d:.3e}")).collect();
        let ratios: Vec<String> = st.ratios().iter().map(|r| format!("{r:.1}")).collect();
        let mark = if *p { "ok" } else { "NOT CONVERGED" };
        text.push_str(&format!("{mark:>13}  {}  drift [{}]  ratios [{}]\n", st.density, drifts.join(", "), ratios.join(", ")));
    }
    for st in probe_studies {
        text.push_str(&format!("{:>13}  {}  drift {:.3e}\n", "probe", st.density, st.finest()));
    }
    if unverified > 0 {
        text.push_str(&format!("{unverified} law(s) failed symbolic verification and were skipped\n"));
    }
    Ok(Report { exit_code: if ok { 0 } else { 1 }, json, text })
}

pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    match cfg.command {
        CommandKind::Derive => run_derive(cfg),
        CommandKind::Verify => run_verify(cfg),
        CommandKind::Density => run_density(cfg),
        CommandKind::Scan => run_scan(cfg),
        CommandKind::Numcheck => run_numcheck(cfg),
    }
}

/// Parses arguments, runs, writes the report and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = RunConfig::from_cli(&cli).and_then(|cfg| {
        let report = run(&cfg)?;
        let rendered = report.render(cfg.format);
        match &cfg.out {
            Some(path) => std::fs::write(path, rendered)?,
            None => print!("{rendered}"),
        }
        Ok(report.exit_code)
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_level_split() {
        assert_eq!(split_top_level("pow(u,-2), exp(u)"), vec!["pow(u,-2)", "exp(u)"]);
        assert!(split_top_level(" ").is_empty());
    }

    #[test]
    fn params_and_ranges() {
        let p = parse_params(&["n=2".into(), "c0=1/2".into()]).unwrap();
        assert_eq!(p["c0"], Rational::new(1.into(), 2.into()));
        assert!(parse_params(&["n".into()]).is_err());
        assert!(parse_params(&["n=x".into()]).is_err());
        assert_eq!(parse_scan("n=1..4").unwrap(), ("n".into(), 1, 4));
        assert!(parse_scan("n=4..1").is_err());
        assert!(parse_scan("n=1-4").is_err());
    }

    #[test]
    fn degree_expressions() {
        let cli = Cli::try_parse_from(["conslaw", "derive", "--pde", "u_t = u_xxx", "--deg-u", "n+1", "--param", "n=3"]).unwrap();
        let cfg = RunConfig::from_cli(&cli).unwrap();
        assert_eq!(cfg.bounds(&cfg.params).unwrap().deg_u, 4);
        let bad = RunConfig { deg_u: "n/2".into(), ..cfg };
        assert!(bad.bounds(&bad.params).is_err());
    }

    #[test]
    fn derive_report() {
        let cli = Cli::try_parse_from(["conslaw", "derive", "--pde", "u_t + u*u_x + u_xxx = 0", "--order", "2", "--deg-tx", "1", "--deg-u", "2"]).unwrap();
        let report = run(&RunConfig::from_cli(&cli).unwrap()).unwrap();
        assert_eq!(report.exit_code, 0);
        assert_eq!(report.json["dimensions"]["multipliers"], 4);
        assert_eq!(report.json["laws"].as_array().unwrap().len(), 4);
        assert!(report.text.contains("t*u - x"));
    }
}
