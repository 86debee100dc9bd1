//! Registry and runner for every relation check, plus convergence series.
//!
//! Each relation has a stable id, a paper anchor, a tolerance class and the suite
//! that first includes it (`fast` ⊂ `full` ⊂ `slow`). A run evaluates the selected
//! checks on a bounded worker pool and returns reports in registry order, so the
//! output does not depend on scheduling. Checks use fixed quadrature rules and
//! grids; re-running a configuration reproduces every residual bit for bit.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::check::SWEEP_FLOOR;
use crate::error::{Error, Result};
use crate::lax::{
    factorization_residual, fresnel_conjugation_residuals, intw_lplus_lminus_residuals, lplus_to_lminus_residual,
    nm_residual, reduction_sweep, spin_to_u, wl2_residuals, Reduction, SpectralTuple,
};
use crate::modouble::{
    casimir_residual, cross_residuals, generators, intertwining_residuals, qsl2_residuals, tilde_generators,
    w_backend_residual, SpinParams,
};
use crate::opalg::{Engine, FDOperator};
use crate::params::{make_params, ModularParams, NumericsConfig, RelationClass, C64};
use crate::rop::{
    build_r, canonical, coxeter_residual, grid_residual, r_degenerate_residuals, r_forms_residual, r_spin, r_word,
    red_sweep, rll_residuals, rrr_residual, s_intertwining_residuals, sll_residuals, star_triangle_int_residual,
    star_triangle_op_residual, swap_invariance_residual, translation_residual, wsw_residual, yang_baxter_residual,
    yb0_residual, Coxeter, Degenerate, Grid,
};
use crate::sl2c;
use crate::specfun::{fourier_d, GammaEvaluator};

/// Version of the JSON report layout.
pub const REPORT_SCHEMA: u32 = 1;

/// Named subsets of the registry; each includes the previous one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    /// Scalar identities, one-coordinate operators and the exact oracle.
    Fast,
    /// Adds two- and three-coordinate relations on grids.
    Full,
    /// Adds the expensive lattice and mixed three-site checks.
    Slow,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Suite> {
        match s {
            "fast" => Ok(Suite::Fast),
            "full" => Ok(Suite::Full),
            "slow" => Ok(Suite::Slow),
            other => Err(Error::Domain(format!("unknown suite {other:?}; use fast, full or slow"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpinConfig {
    /// Spin of single-coordinate checks.
    pub s: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl Default for SpinConfig {
    fn default() -> Self {
        SpinConfig { s: 0.4, s1: 0.4, s2: 0.7, s3: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub u: f64,
    pub v: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig { u: 0.3, v: -0.2 }
    }
}

/// Grid for two-coordinate relations; three-coordinate and limit checks use their
/// own fixed grids, recorded in each report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { l: 6.0, n: 128 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadConfig {
    pub tol: f64,
    pub lift: f64,
    /// Half-width of the γ integral; `0` chooses it adaptively.
    #[serde(rename = "T")]
    pub t: f64,
    /// Truncation of the Fourier integral.
    pub fourier_t: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { tol: 1e-13, lift: 2.5, t: 0.0, fourier_t: 24.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub report: Option<String>,
    pub csv: Option<String>,
}

/// Everything that determines a run. Serialized verbatim into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub b: f64,
    pub spins: SpinConfig,
    pub spectral: SpectralConfig,
    pub grid: GridConfig,
    pub quad: QuadConfig,
    pub suite: Suite,
    /// Relation ids to run instead of a suite.
    pub relations: Option<Vec<String>>,
    /// Overrides of the tolerance of a class.
    pub tolerances: BTreeMap<RelationClass, f64>,
    pub output: OutputConfig,
    /// Recorded for provenance; no check samples randomly.
    pub seed: Option<u64>,
    /// Worker threads; `0` uses the available parallelism.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            b: 0.8,
            spins: SpinConfig::default(),
            spectral: SpectralConfig::default(),
            grid: GridConfig::default(),
            quad: QuadConfig::default(),
            suite: Suite::Fast,
            relations: None,
            tolerances: BTreeMap::new(),
            output: OutputConfig::default(),
            seed: None,
            workers: 0,
        }
    }
}

impl RunConfig {
    pub fn params(&self) -> Result<ModularParams> {
        make_params(self.b)
    }

    pub fn numerics(&self) -> NumericsConfig {
        let mut n = NumericsConfig {
            quad_tol: self.quad.tol,
            contour_lift: self.quad.lift,
            truncation: self.quad.t,
            grid_halfwidth: self.grid.l,
            grid_points: self.grid.n,
            ..NumericsConfig::default()
        };
        n.relation_tols.extend(self.tolerances.iter().map(|(k, v)| (*k, *v)));
        n
    }

    /// Checks every field that a run depends on.
    pub fn validate(&self) -> Result<()> {
        let p = self.params()?;
        self.numerics().validate(&p)?;
        let reals = [
            ("spins.s", self.spins.s),
            ("spins.s1", self.spins.s1),
            ("spins.s2", self.spins.s2),
            ("spins.s3", self.spins.s3),
            ("spectral.u", self.spectral.u),
            ("spectral.v", self.spectral.v),
        ];
        for (name, x) in reals {
            if !x.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite")));
            }
        }
        if !(self.quad.fourier_t > 0.0) {
            return Err(Error::Domain("quad.fourier_t must be positive".into()));
        }
        for (class, tol) in &self.tolerances {
            if !(*tol >= 0.0) {
                return Err(Error::Domain(format!("tolerance of {class:?} must be non-negative")));
            }
        }
        if let Some(ids) = &self.relations {
            select(ids)?;
        }
        Ok(())
    }

    fn grid(&self) -> Grid {
        Grid::new(self.grid.l, self.grid.n)
    }
}

/// How a check ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Outcome {
    Passed,
    Failed,
    /// The check returned an error or panicked.
    Error { message: String },
    Skipped { reason: String },
}

/// The result of one relation check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    pub relation_id: String,
    pub anchor: String,
    pub class: RelationClass,
    pub params: BTreeMap<String, Value>,
    /// Grid, quadrature or degree the residual was computed at.
    pub resolution: String,
    /// Relative L² residual (largest over states, entries and parameter points);
    /// absent when the check did not produce one.
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub outcome: Outcome,
    pub wall_time_ms: f64,
}

/// Counts over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
    pub skipped: usize,
}

impl Summary {
    pub fn of(reports: &[RelationReport]) -> Summary {
        let mut s = Summary { total: reports.len(), ..Summary::default() };
        for r in reports {
            match r.outcome {
                Outcome::Passed => s.passed += 1,
                Outcome::Failed => s.failed += 1,
                Outcome::Error { .. } => s.errors += 1,
                Outcome::Skipped { .. } => s.skipped += 1,
            }
        }
        s
    }

    /// True when every check that ran passed.
    pub fn all_passed(&self) -> bool {
        self.failed == 0 && self.errors == 0
    }
}

/// The report document written by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    pub version: String,
    pub config: RunConfig,
    pub summary: Summary,
    pub reports: Vec<RelationReport>,
}

impl RunReport {
    pub fn new(config: &RunConfig, reports: Vec<RelationReport>) -> RunReport {
        RunReport {
            schema: REPORT_SCHEMA,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            summary: Summary::of(&reports),
            reports,
        }
    }
}

/// What a check returns before it is judged.
#[derive(Debug, Clone, PartialEq)]
pub struct Measured {
    pub residual: f64,
    pub params: BTreeMap<String, Value>,
    pub resolution: String,
}

impl Measured {
    fn new(residual: f64, resolution: impl Into<String>) -> Measured {
        Measured { residual, params: BTreeMap::new(), resolution: resolution.into() }
    }

    fn with(mut self, key: &str, value: Value) -> Measured {
        self.params.insert(key.to_string(), value);
        self
    }
}

/// Shared, immutable inputs of the checks in one run.
pub struct Ctx<'a> {
    cfg: &'a RunConfig,
    p: ModularParams,
    engine: Engine,
}

impl<'a> Ctx<'a> {
    pub fn new(cfg: &'a RunConfig) -> Result<Ctx<'a>> {
        let p = cfg.params()?;
        let ev = GammaEvaluator::new(p, cfg.numerics())?;
        Ok(Ctx { cfg, p, engine: Engine::new(Arc::new(ev)) })
    }

    fn ev(&self) -> &GammaEvaluator {
        self.engine.evaluator()
    }
}

type CheckFn = fn(&Ctx) -> Result<Measured>;

/// One registered relation.
pub struct RelationSpec {
    pub id: &'static str,
    pub anchor: &'static str,
    pub class: RelationClass,
    pub suite: Suite,
    check: CheckFn,
}

impl std::fmt::Debug for RelationSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RelationSpec")
            .field("id", &self.id)
            .field("anchor", &self.anchor)
            .field("class", &self.class)
            .field("suite", &self.suite)
            .finish()
    }
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn worst(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm()
}

/// Largest step up in a sweep, ignoring steps between values already at roundoff;
/// zero exactly when the sweep is decreasing.
pub fn monotone_violation(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| if w[1] <= w[0] || (w[0] <= SWEEP_FLOOR && w[1] <= SWEEP_FLOOR) { 0.0 } else { w[1] - w[0] })
        .fold(0.0, f64::max)
}

fn grid_label(g: Grid) -> String {
    format!("grid L={} N={}", g.l, g.points)
}

fn quad_label(ctx: &Ctx) -> String {
    format!("gamma quad tol={:e} lift={}", ctx.cfg.quad.tol, ctx.cfg.quad.lift)
}

// Scalar special-function identities.

fn gamma_difference(ctx: &Ctx) -> Result<Measured> {
    let ev = ctx.ev();
    let p = ctx.p;
    let mut r: f64 = 0.0;
    for z in ev.self_test_lattice() {
        let e1 = 1.0 + (-crate::params::I * std::f64::consts::PI * z / p.omega).exp();
        r = r.max(rel(ev.gamma(z + p.omega_prime)? / ev.gamma(z - p.omega_prime)?, e1));
        let e2 = 1.0 + (-crate::params::I * std::f64::consts::PI * z / p.omega_prime).exp();
        r = r.max(rel(ev.gamma(z + p.omega)? / ev.gamma(z - p.omega)?, e2));
    }
    Ok(Measured::new(r, quad_label(ctx)).with("points", json!(20)))
}

fn gamma_reflection(ctx: &Ctx) -> Result<Measured> {
    let ev = ctx.ev();
    let p = ctx.p;
    let mut r: f64 = 0.0;
    for z in ev.self_test_lattice() {
        let v = ev.gamma(z)? * ev.gamma(-z)? * (-crate::params::I * (p.beta + std::f64::consts::PI * z * z)).exp();
        r = r.max((v - 1.0).norm());
    }
    Ok(Measured::new(r, quad_label(ctx)).with("points", json!(20)))
}

fn gamma_swap(ctx: &Ctx) -> Result<Measured> {
    let ev = ctx.ev();
    let swapped = GammaEvaluator::new(ctx.p.swapped(), ev.numerics().clone())?;
    let mut r: f64 = 0.0;
    for z in ev.self_test_lattice() {
        r = r.max(rel(swapped.gamma(z)?, ev.gamma(z)?));
    }
    for (a, z) in d_points() {
        r = r.max(rel(swapped.d(a, z)?, ev.d(a, z)?));
    }
    Ok(Measured::new(r, quad_label(ctx)).with("points", json!(20 + d_points().len())))
}

fn d_points() -> Vec<(C64, C64)> {
    let mut out = Vec::new();
    for a in [c(0.3), c(-0.45), C64::new(0.15, 0.1)] {
        for z in [-1.3, -0.6, 0.2, 0.9, 1.7] {
            out.push((a, c(z)));
        }
    }
    out
}

fn d_evenness(ctx: &Ctx) -> Result<Measured> {
    let ev = ctx.ev();
    let mut r: f64 = 0.0;
    for (a, z) in d_points() {
        let d = ev.d(a, z)?;
        r = r.max(rel(ev.d(a, -z)?, d));
        r = r.max((d * ev.d(-a, z)? - 1.0).norm());
    }
    Ok(Measured::new(r, quad_label(ctx)).with("points", json!(d_points().len())))
}

fn d_difference(ctx: &Ctx) -> Result<Measured> {
    let ev = ctx.ev();
    let p = ctx.p;
    let pi = std::f64::consts::PI;
    let mut r: f64 = 0.0;
    for (a, z) in d_points() {
        for (step, period) in [(p.omega_prime, p.omega), (p.omega, p.omega_prime)] {
            let lhs = ev.d(a, z - step)? / ev.d(a, z + step)?;
            let rhs = (pi / (2.0 * period) * (z - a)).cos() / (pi / (2.0 * period) * (z + a)).cos();
            r = r.max(rel(lhs, rhs));
        }
    }
    Ok(Measured::new(r, quad_label(ctx)).with("points", json!(d_points().len())))
}

/// `(a, z)` pairs of the Fourier check; `a = s − ω″` with real `s`.
fn fourier_points(p: &ModularParams) -> Vec<(C64, C64)> {
    [(0.4, 0.7), (0.1, 0.5), (-0.3, -1.2), (0.6, 0.0), (0.25, 2.0)]
        .iter()
        .map(|(s, z)| (c(*s) - p.omega_dp, c(*z)))
        .collect()
}

fn fourier_at(ctx: &Ctx, truncation: f64) -> Result<f64> {
    let ev = ctx.ev();
    let mut r: f64 = 0.0;
    for (a, z) in fourier_points(&ctx.p) {
        let lhs = fourier_d(ev, a, z, truncation, ctx.cfg.quad.tol.max(1e-14))?;
        r = r.max(rel(lhs, ev.d(-ctx.p.omega_dp - a, z)?));
    }
    Ok(r)
}

fn fourier(ctx: &Ctx) -> Result<Measured> {
    let t = ctx.cfg.quad.fourier_t;
    Ok(Measured::new(fourier_at(ctx, t)?, format!("trapezoid T={t}")).with("samples", json!(5)))
}

fn star_triangle_int(ctx: &Ctx) -> Result<Measured> {
    let triples = [
        (C64::new(0.2, -0.7), C64::new(-0.1, -0.7)),
        (C64::new(0.0, -0.5), C64::new(0.3, -0.8)),
        (C64::new(-0.25, -0.6), C64::new(0.15, -0.9)),
    ];
    let zs = [c(0.3), c(-0.4), c(0.1)];
    let mut r: f64 = 0.0;
    for (a, b) in triples {
        r = r.max(star_triangle_int_residual(&ctx.engine, a, b, zs)?);
    }
    Ok(Measured::new(r, format!("trapezoid tol={:e}", ctx.engine.tol())).with("triples", json!(3)))
}

const ONE_COORD: Grid = Grid::new(8.0, 256);

fn star_triangle_op(ctx: &Ctx) -> Result<Measured> {
    let (u, v) = (ctx.cfg.spectral.u, 0.25);
    let r = star_triangle_op_residual(&ctx.engine, c(u), c(v), ONE_COORD)?;
    Ok(Measured::new(r, grid_label(ONE_COORD)).with("u", json!(u)).with("v", json!(v)))
}

// Modular double.

fn spin_set(ctx: &Ctx) -> [SpinParams; 3] {
    let s = ctx.cfg.spins.s;
    [0.0, s, -s].map(|x| SpinParams::real(x, ctx.p))
}

fn named_max(list: Vec<(String, f64)>) -> f64 {
    worst(list.into_iter().map(|(_, r)| r))
}

fn qsl2(ctx: &Ctx) -> Result<Measured> {
    let mut r: f64 = 0.0;
    for sp in spin_set(ctx) {
        r = r.max(named_max(qsl2_residuals(&ctx.engine, &generators(&sp, 0)?)?));
    }
    Ok(Measured::new(r, "closed-form Gaussians").with("s", json!([0.0, ctx.cfg.spins.s, -ctx.cfg.spins.s])))
}

fn qsl2_tilde(ctx: &Ctx) -> Result<Measured> {
    let mut r: f64 = 0.0;
    for sp in spin_set(ctx) {
        r = r.max(named_max(qsl2_residuals(&ctx.engine, &tilde_generators(&sp, 0)?)?));
    }
    Ok(Measured::new(r, "closed-form Gaussians").with("s", json!([0.0, ctx.cfg.spins.s, -ctx.cfg.spins.s])))
}

fn cross(ctx: &Ctx) -> Result<Measured> {
    let mut r: f64 = 0.0;
    for sp in spin_set(ctx) {
        r = r.max(named_max(cross_residuals(&ctx.engine, &sp)?));
    }
    Ok(Measured::new(r, "closed-form Gaussians").with("s", json!([0.0, ctx.cfg.spins.s, -ctx.cfg.spins.s])))
}

fn casimir(ctx: &Ctx) -> Result<Measured> {
    let mut r: f64 = 0.0;
    for sp in spin_set(ctx) {
        r = r.max(casimir_residual(&ctx.engine, &sp, false)?);
        r = r.max(casimir_residual(&ctx.engine, &sp, true)?);
    }
    Ok(Measured::new(r, "closed-form Gaussians").with("s", json!([0.0, ctx.cfg.spins.s, -ctx.cfg.spins.s])))
}

fn intertwiner(ctx: &Ctx) -> Result<Measured> {
    let s = ctx.cfg.spins.s;
    let r = named_max(intertwining_residuals(&ctx.engine, &SpinParams::real(s, ctx.p))?);
    Ok(Measured::new(r, format!("kernel tol={:e}", ctx.engine.tol())).with("s", json!(s)).with("relations", json!(6)))
}

fn intertwiner_backends(ctx: &Ctx) -> Result<Measured> {
    let s = ctx.cfg.spins.s;
    let r = w_backend_residual(&ctx.engine, &SpinParams::real(s, ctx.p))?;
    Ok(Measured::new(r, format!("kernel tol={:e}", ctx.engine.tol())).with("s", json!(s)))
}

// L-operators.

fn l_pair(ctx: &Ctx) -> (C64, C64) {
    spin_to_u(&ctx.p, c(ctx.cfg.spectral.u), c(ctx.cfg.spins.s))
}

fn l_params(ctx: &Ctx) -> Measured {
    Measured::new(0.0, "closed-form Gaussians").with("u", json!(ctx.cfg.spectral.u)).with("s", json!(ctx.cfg.spins.s))
}

fn factorization(ctx: &Ctx) -> Result<Measured> {
    let (u1, u2) = l_pair(ctx);
    Ok(Measured { residual: factorization_residual(&ctx.engine, &ctx.p, u1, u2)?, ..l_params(ctx) })
}

fn nm(ctx: &Ctx) -> Result<Measured> {
    let (u1, _) = l_pair(ctx);
    Ok(Measured { residual: nm_residual(&ctx.engine, &ctx.p, u1)?, ..l_params(ctx) })
}

fn wl2(ctx: &Ctx) -> Result<Measured> {
    let (u1, u2) = l_pair(ctx);
    Ok(Measured { residual: worst(wl2_residuals(&ctx.engine, &ctx.p, u1, u2)?), ..l_params(ctx) })
}

fn intw_reduced(ctx: &Ctx) -> Result<Measured> {
    let (u, v) = (ctx.cfg.spectral.u, ctx.cfg.spectral.v);
    let r = worst(intw_lplus_lminus_residuals(&ctx.engine, &ctx.p, c(u), c(v))?);
    Ok(Measured::new(r, "closed-form Gaussians").with("u", json!(u)).with("v", json!(v)))
}

fn lplus_to_lminus(ctx: &Ctx) -> Result<Measured> {
    let (u1, _) = l_pair(ctx);
    let r = lplus_to_lminus_residual(&ctx.engine, &ctx.p, u1)?;
    let f = worst(fresnel_conjugation_residuals(&ctx.engine, &ctx.p)?);
    Ok(Measured { residual: r.max(f), ..l_params(ctx) })
}

fn reductions(ctx: &Ctx) -> Result<Measured> {
    let sp = SpinParams::real(ctx.cfg.spins.s, ctx.p);
    let u = 0.25;
    let mut series = BTreeMap::new();
    let mut violation: f64 = 0.0;
    for (name, which, ts) in [
        ("L+", Reduction::LPlus, [2.0, 4.0, 8.0]),
        ("L-", Reduction::LMinus, [2.0, 4.0, 8.0]),
        ("ell", Reduction::Ell, [2.0, 4.0, 8.0]),
        ("ellbar", Reduction::EllBar, [-2.0, -4.0, -8.0]),
    ] {
        let r = reduction_sweep(&ctx.engine, &sp, which, c(u), &ts)?;
        violation = violation.max(monotone_violation(&r));
        series.insert(name.to_string(), json!({ "t": ts, "residuals": r }));
    }
    Ok(Measured::new(violation, "closed-form Gaussians").with("u", json!(u)).with("series", json!(series)))
}

// S- and R-operators.

fn tuple(ctx: &Ctx) -> SpectralTuple {
    let (sc, sp) = (&ctx.cfg.spectral, &ctx.cfg.spins);
    SpectralTuple::from_spins(&ctx.p, c(sc.u), c(sc.v), c(sp.s1), c(sp.s2))
}

fn tuple_params(ctx: &Ctx, residual: f64, resolution: String) -> Measured {
    let (sc, sp) = (&ctx.cfg.spectral, &ctx.cfg.spins);
    Measured::new(residual, resolution)
        .with("u", json!(sc.u))
        .with("v", json!(sc.v))
        .with("s1", json!(sp.s1))
        .with("s2", json!(sp.s2))
}

fn s_outer(ctx: &Ctx) -> Result<Measured> {
    let r = worst(s_intertwining_residuals(&ctx.engine, &ctx.p, &tuple(ctx))?.concat());
    Ok(tuple_params(ctx, r, "closed-form Gaussians".into()))
}

fn sll(ctx: &Ctx) -> Result<Measured> {
    let r = worst(sll_residuals(&ctx.engine, &ctx.p, &tuple(ctx))?);
    Ok(tuple_params(ctx, r, "closed-form Gaussians".into()))
}

fn coxeter(ctx: &Ctx, which: Coxeter) -> Result<Measured> {
    let g = ctx.cfg.grid();
    Ok(tuple_params(ctx, coxeter_residual(&ctx.engine, which, &tuple(ctx), g)?, grid_label(g)))
}

fn def1(ctx: &Ctx) -> Result<Measured> {
    coxeter(ctx, Coxeter::First)
}

fn def3(ctx: &Ctx) -> Result<Measured> {
    coxeter(ctx, Coxeter::Third)
}

fn wsw(ctx: &Ctx, coord: usize) -> Result<Measured> {
    let g = ctx.cfg.grid();
    let (u, v) = (ctx.cfg.spectral.u, 0.25);
    let r = wsw_residual(&ctx.engine, coord, c(u), c(v), g)?;
    Ok(Measured::new(r, grid_label(g)).with("u", json!(u)).with("v", json!(v)))
}

fn wsw1(ctx: &Ctx) -> Result<Measured> {
    wsw(ctx, 0)
}

fn wsw2(ctx: &Ctx) -> Result<Measured> {
    wsw(ctx, 1)
}

fn r_word_check(ctx: &Ctx) -> Result<Measured> {
    let t = tuple(ctx);
    let same = canonical(&r_word(&t)?) == canonical(&build_r(&t));
    Ok(tuple_params(ctx, if same { 0.0 } else { 1.0 }, "syntactic".into()))
}

const FORMS_GRID: Grid = Grid::new(8.0, 256);

fn r_forms(ctx: &Ctx) -> Result<Measured> {
    let (u, sp) = (ctx.cfg.spectral.u - ctx.cfg.spectral.v, &ctx.cfg.spins);
    let r = r_forms_residual(&ctx.engine, c(u), c(sp.s1), c(sp.s2), FORMS_GRID)?;
    Ok(Measured::new(r, grid_label(FORMS_GRID)).with("u", json!(u)).with("s1", json!(sp.s1)).with("s2", json!(sp.s2)))
}

/// The 3×3 lattice of spectral parameters and spin pairs for the forms check.
pub const FORMS_LATTICE_U: [f64; 3] = [0.3, 0.5, 0.8];
pub const FORMS_LATTICE_SPINS: [(f64, f64); 3] = [(0.4, 0.7), (0.25, 0.1), (0.6, 0.3)];

fn r_forms_lattice(ctx: &Ctx) -> Result<Measured> {
    let mut r: f64 = 0.0;
    for u in FORMS_LATTICE_U {
        for (s1, s2) in FORMS_LATTICE_SPINS {
            r = r.max(r_forms_residual(&ctx.engine, c(u), c(s1), c(s2), FORMS_GRID)?);
        }
    }
    Ok(Measured::new(r, grid_label(FORMS_GRID))
        .with("u", json!(FORMS_LATTICE_U))
        .with("spins", json!(FORMS_LATTICE_SPINS)))
}

/// The two generic RLL points: the configured one and a fixed second one.
fn rll_points(ctx: &Ctx) -> [((f64, f64), (f64, f64)); 2] {
    let (sc, sp) = (&ctx.cfg.spectral, &ctx.cfg.spins);
    [((sc.u, sc.v), (sp.s1, sp.s2)), ((0.1, 0.45), (0.25, 0.6))]
}

fn rll(ctx: &Ctx, tilde: bool) -> Result<Measured> {
    let g = ctx.cfg.grid();
    let mut r: f64 = 0.0;
    let points = rll_points(ctx);
    for ((u, v), (s1, s2)) in points {
        r = r.max(worst(rll_residuals(&ctx.engine, &ctx.p, (c(u), c(v)), (c(s1), c(s2)), tilde, g)?));
    }
    Ok(Measured::new(r, grid_label(g)).with("points", json!(points)))
}

fn rll1(ctx: &Ctx) -> Result<Measured> {
    rll(ctx, false)
}

fn rll2(ctx: &Ctx) -> Result<Measured> {
    rll(ctx, true)
}

fn r_trivial(ctx: &Ctx) -> Result<Measured> {
    let g = ctx.cfg.grid();
    let s = c(ctx.cfg.spins.s1);
    let r = grid_residual(&ctx.engine, &r_spin(c(0.0), s, s), &FDOperator::identity(), 2, g)?;
    Ok(Measured::new(r, grid_label(g)).with("s", json!(ctx.cfg.spins.s1)))
}

fn r_swap(ctx: &Ctx) -> Result<Measured> {
    let g = ctx.cfg.grid();
    let (u, sp) = (ctx.cfg.spectral.u - ctx.cfg.spectral.v, &ctx.cfg.spins);
    let r = swap_invariance_residual(&ctx.engine, c(u), c(sp.s1), c(sp.s2), g)?;
    Ok(Measured::new(r, grid_label(g)).with("u", json!(u)))
}

/// Three-coordinate grids for the Yang–Baxter relations.
pub const YB_COARSE: Grid = Grid::new(3.0, 32);
pub const YB_FINE: Grid = Grid::new(3.0, 64);
pub const YB0_GRID: Grid = Grid::new(3.5, 64);
pub const RRR_GRID: Grid = Grid::new(4.5, 128);
pub const RED_GRID: Grid = Grid::new(7.0, 256);

fn spins3(ctx: &Ctx) -> [f64; 3] {
    let sp = &ctx.cfg.spins;
    [sp.s1, sp.s2, sp.s3]
}

fn yb_at(ctx: &Ctx, g: Grid) -> Result<Measured> {
    let (u, v) = (ctx.cfg.spectral.u, ctx.cfg.spectral.v);
    let r = yang_baxter_residual(&ctx.engine, u, v, spins3(ctx), g)?;
    Ok(Measured::new(r, grid_label(g)).with("u", json!(u)).with("v", json!(v)).with("spins", json!(spins3(ctx))))
}

fn yb_coarse(ctx: &Ctx) -> Result<Measured> {
    yb_at(ctx, YB_COARSE)
}

fn yb_fine(ctx: &Ctx) -> Result<Measured> {
    yb_at(ctx, YB_FINE)
}

fn yb0_at(ctx: &Ctx, g: Grid) -> Result<Measured> {
    let r = yb0_residual(&ctx.engine, spins3(ctx), g)?;
    Ok(Measured::new(r, grid_label(g)).with("spins", json!(spins3(ctx))))
}

fn yb0(ctx: &Ctx) -> Result<Measured> {
    yb0_at(ctx, YB0_GRID)
}

fn rrr(ctx: &Ctx) -> Result<Measured> {
    let (u, v) = (ctx.cfg.spectral.u, ctx.cfg.spectral.v);
    let r = rrr_residual(&ctx.engine, u, v, spins3(ctx), RRR_GRID)?;
    Ok(Measured::new(r, grid_label(RRR_GRID)).with("u", json!(u)).with("v", json!(v)))
}

fn red(ctx: &Ctx) -> Result<Measured> {
    let (u, sp) = (ctx.cfg.spectral.u, &ctx.cfg.spins);
    let vs = [1.0, 2.0, 4.0];
    let r = red_sweep(&ctx.engine, u, &vs, c(sp.s1), c(sp.s2), RED_GRID)?;
    Ok(Measured::new(monotone_violation(&r), grid_label(RED_GRID))
        .with("u", json!(u))
        .with("v", json!(vs))
        .with("residuals", json!(r)))
}

fn translation(ctx: &Ctx) -> Result<Measured> {
    let g = ctx.cfg.grid();
    let sp = &ctx.cfg.spins;
    let r = translation_residual(&ctx.engine, c(sp.s1), c(sp.s2), 0.3, g)?;
    Ok(Measured::new(r, grid_label(g)).with("shift", json!(0.3)))
}

fn degenerate(ctx: &Ctx, which: Degenerate) -> Result<Measured> {
    let g = ctx.cfg.grid();
    let (sc, sp) = (&ctx.cfg.spectral, &ctx.cfg.spins);
    let r = worst(r_degenerate_residuals(&ctx.engine, &ctx.p, which, (sc.u, sc.v), (sp.s1, sp.s2), g)?);
    Ok(tuple_params(ctx, r, grid_label(g)))
}

fn rll_ell(ctx: &Ctx) -> Result<Measured> {
    degenerate(ctx, Degenerate::EllFirst)
}

fn rll_ellbar(ctx: &Ctx) -> Result<Measured> {
    degenerate(ctx, Degenerate::EllBarSecond)
}

// The exact holomorphic oracle.

/// Degree bound of the exact identities.
pub const EXACT_DEGREE: u32 = 4;

fn exact(o: sl2c::ExactOutcome) -> Measured {
    Measured::new(o.residual, format!("exact, monomials of degree <= {EXACT_DEGREE}"))
        .with("monomials", json!(o.monomials))
        .with("failures", json!(o.failures))
}

fn sl2c_l(_: &Ctx) -> Result<Measured> {
    let (u1, u2) = (sl2c::coef(3), sl2c::coef(5));
    let got = sl2c::l11_on_z(&u1, &u2);
    let want = sl2c::ExactPoly::monomial(&[1]).scale(&sl2c::coef(5));
    Ok(Measured::new(got.sub(&want).max_abs(), "exact").with("u1", json!(3)).with("u2", json!(5)))
}

fn f1(_: &Ctx) -> Result<Measured> {
    Ok(exact(sl2c::check_f1(&sl2c::coef(2), &sl2c::coef(-1), EXACT_DEGREE)).with("u", json!(2)).with("v", json!(-1)))
}

fn f2(_: &Ctx) -> Result<Measured> {
    Ok(exact(sl2c::check_f2(&sl2c::coef(2), &sl2c::coef(-1), EXACT_DEGREE)).with("u", json!(2)).with("v", json!(-1)))
}

fn minus_plus(_: &Ctx) -> Result<Measured> {
    let o = sl2c::check_intertwining(1, 3, sl2c::Intertwining::MinusPlus, EXACT_DEGREE)?;
    Ok(exact(o).with("u", json!(1)).with("v", json!(3)))
}

fn plus_minus(_: &Ctx) -> Result<Measured> {
    let o = sl2c::check_intertwining(0, 2, sl2c::Intertwining::PlusMinus, EXACT_DEGREE)?;
    Ok(exact(o).with("u", json!(0)).with("v", json!(2)))
}

fn sl2c_duality(_: &Ctx) -> Result<Measured> {
    let ok = sl2c::check_plus_minus_duality(&sl2c::coef(3));
    let failures = ok.iter().filter(|x| !**x).count();
    Ok(Measured::new(failures as f64, "exact normal form").with("u", json!(3)))
}

const SL2C_TUPLES: [sl2c::IntTuple; 2] = [
    sl2c::IntTuple { u2: 3, u1: 4, v2: 1, v1: 0 },
    sl2c::IntTuple { u2: 2, u1: 2, v2: 0, v1: 0 },
];

fn tuples_json() -> Value {
    json!(SL2C_TUPLES.iter().map(|t| [t.u2, t.u1, t.v2, t.v1]).collect::<Vec<_>>())
}

fn merge(outcomes: Vec<sl2c::ExactOutcome>) -> sl2c::ExactOutcome {
    sl2c::ExactOutcome {
        monomials: outcomes.iter().map(|o| o.monomials).sum(),
        failures: outcomes.iter().map(|o| o.failures).sum(),
        residual: worst(outcomes.iter().map(|o| o.residual)),
    }
}

fn four_site(_: &Ctx) -> Result<Measured> {
    let mut out = Vec::new();
    for t in &SL2C_TUPLES {
        out.push(sl2c::check_four_site(t, EXACT_DEGREE)?);
        out.push(sl2c::check_r_ab_conjugation(t, EXACT_DEGREE)?);
    }
    Ok(exact(merge(out)).with("tuples", tuples_json()))
}

fn sl2c_rll(_: &Ctx) -> Result<Measured> {
    let out = SL2C_TUPLES.iter().map(|t| sl2c::check_rll(t, EXACT_DEGREE)).collect::<Result<Vec<_>>>()?;
    Ok(exact(merge(out)).with("tuples", tuples_json()))
}

macro_rules! rel {
    ($id:expr, $anchor:expr, $class:ident, $suite:ident, $f:expr) => {
        RelationSpec { id: $id, anchor: $anchor, class: RelationClass::$class, suite: Suite::$suite, check: $f }
    };
}

static REGISTRY: &[RelationSpec] = &[
    rel!("gamma-diff", "Eq. (gamma)", Scalar, Fast, gamma_difference),
    rel!("refl", "Eq. (refl)", Scalar, Fast, gamma_reflection),
    rel!("gamma-swap", "§2.1, \"the change q ⇄ q̃ is equivalent to ω ⇄ ω′\"", Scalar, Fast, gamma_swap),
    rel!("Dev", "Eq. (Dev)", Scalar, Fast, d_evenness),
    rel!("FunEq", "Eq. (FunEq)", Scalar, Fast, d_difference),
    rel!("FourierD", "Eq. (FourierD)", Quadrature, Fast, fourier),
    rel!("str-trg", "Eq. (str-trg)", Quadrature, Fast, star_triangle_int),
    rel!("star-triang", "Eq. (star-triang)", TwoCoordinate, Fast, star_triangle_op),
    rel!("qsl2", "Eq. (qsl2)", Algebra, Fast, qsl2),
    rel!("qsl2-tilde", "Eq. (qsl2)", Algebra, Fast, qsl2_tilde),
    rel!("cross", "Eq. (qsl2)", Algebra, Fast, cross),
    rel!("Casimirs", "Eq. (Casimirs)", Algebra, Fast, casimir),
    rel!("intw1", "Eq. (intw1)", OneCoordinate, Fast, intertwiner),
    rel!("W-backends", "Eq. (Wint)", OneCoordinate, Fast, intertwiner_backends),
    rel!("LBT07Fact", "Eq. (LBT07Fact)", Structural, Fast, factorization),
    rel!("NM", "Eq. (LBT07Fact)", Structural, Fast, nm),
    rel!("WL2", "Eq. (WL2)", TwoCoordinate, Fast, wl2),
    rel!("intwL+L-", "Eq. (intwL+L-)", TwoCoordinate, Fast, intw_reduced),
    rel!("L+toL-", "Eq. (L+toL-)", Algebra, Fast, lplus_to_lminus),
    rel!("reductions", "Eq. (lbarl)", Monotone, Fast, reductions),
    rel!("sl2c-L", "Appendix A, \"holomorphic L-operator\"", Exact, Fast, sl2c_l),
    rel!("f1", "Eq. (f1)", Exact, Fast, f1),
    rel!("f2", "Eq. (f2)", Exact, Fast, f2),
    rel!("L-L+", "Eq. (L-L+)", Exact, Fast, minus_plus),
    rel!("L+L-", "Eq. (L+L-)", Exact, Fast, plus_minus),
    rel!("sl2c-L+toL-", "Appendix A, \"connects L⁺ and L⁻\"", Exact, Fast, sl2c_duality),
    rel!("L-L+L-L+", "Eq. (L-L+L-L+)", Exact, Fast, four_site),
    rel!("sl2c-RLL", "Appendix A final display", Exact, Fast, sl2c_rll),
    rel!("RLL13", "Eq. (RLL13)", TwoCoordinate, Full, s_outer),
    rel!("SLL", "Eq. (SLL)", TwoCoordinate, Full, sll),
    rel!("def1", "Eq. (def1)", TwoCoordinate, Full, def1),
    rel!("def3", "Eq. (def3)", TwoCoordinate, Full, def3),
    rel!("WSW1", "Eq. (WSW1)", TwoCoordinate, Full, wsw1),
    rel!("WSW2", "Eq. (WSW2)", TwoCoordinate, Full, wsw2),
    rel!("R-word", "Eq. (R)", Exact, Full, r_word_check),
    rel!("R-forms", "Eq. (Rint)", OneCoordinate, Full, r_forms),
    rel!("R-trivial", "Eq. (RLL1)", Rll, Full, r_trivial),
    rel!("R-swap", "Eq. (Rop)", Scalar, Full, r_swap),
    rel!("RLL1", "Eq. (RLL1)", Rll, Full, rll1),
    rel!("RLL2", "Eq. (RLL2)", Rll, Full, rll2),
    rel!("YB1-coarse", "Eq. (YB1)", YangBaxterCoarse, Full, yb_coarse),
    rel!("YB1", "Eq. (YB1)", YangBaxterFine, Full, yb_fine),
    rel!("red", "Eq. (red)", Monotone, Full, red),
    rel!("r-translation", "Eq. (rBaxt)", Scalar, Full, translation),
    rel!("YB0", "Eq. (YB0)", YangBaxterFine, Full, yb0),
    rel!("rlL", "Eq. (rlL)", Rll, Full, rll_ell),
    rel!("rLl", "Eq. (rLl)", Rll, Full, rll_ellbar),
    rel!("R-forms-lattice", "Eq. (Rint)", OneCoordinate, Slow, r_forms_lattice),
    rel!("Rrr", "Eq. (Rrr)", YangBaxterFine, Slow, rrr),
];

/// All registered relations in run order.
pub fn registry() -> &'static [RelationSpec] {
    REGISTRY
}

pub fn relation_ids() -> Vec<&'static str> {
    REGISTRY.iter().map(|r| r.id).collect()
}

fn unknown(id: &str) -> Error {
    Error::UnknownRelation { id: id.to_string(), valid: relation_ids().join(", ") }
}

/// The listed relations, in registry order.
pub fn select(ids: &[String]) -> Result<Vec<&'static RelationSpec>> {
    if ids.is_empty() {
        return Err(unknown(""));
    }
    for id in ids {
        if !REGISTRY.iter().any(|r| r.id == id) {
            return Err(unknown(id));
        }
    }
    Ok(REGISTRY.iter().filter(|r| ids.iter().any(|id| id == r.id)).collect())
}

fn selection(cfg: &RunConfig) -> Result<Vec<&'static RelationSpec>> {
    match &cfg.relations {
        Some(ids) => select(ids),
        None => Ok(REGISTRY.iter().filter(|r| r.suite <= cfg.suite).collect()),
    }
}

fn panic_message(e: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = e.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = e.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic with a non-string payload".into()
    }
}

fn judge(spec: &RelationSpec, tolerance: f64, result: std::thread::Result<Result<Measured>>, ms: f64) -> RelationReport {
    let mut report = RelationReport {
        relation_id: spec.id.to_string(),
        anchor: spec.anchor.to_string(),
        class: spec.class,
        params: BTreeMap::new(),
        resolution: String::new(),
        residual: None,
        tolerance,
        pass: false,
        outcome: Outcome::Failed,
        wall_time_ms: ms,
    };
    match result {
        Ok(Ok(m)) => {
            report.pass = m.residual <= tolerance;
            report.outcome = if report.pass { Outcome::Passed } else { Outcome::Failed };
            report.residual = Some(m.residual);
            report.params = m.params;
            report.resolution = m.resolution;
        }
        Ok(Err(e)) => report.outcome = Outcome::Error { message: e.to_string() },
        Err(p) => report.outcome = Outcome::Error { message: format!("panic: {}", panic_message(p)) },
    }
    report
}

/// Runs one registered relation.
pub fn run_one(ctx: &Ctx, spec: &RelationSpec) -> RelationReport {
    let tolerance = ctx.cfg.numerics().tolerance(spec.class);
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(|| (spec.check)(ctx)));
    judge(spec, tolerance, result, start.elapsed().as_secs_f64() * 1e3)
}

fn workers(cfg: &RunConfig, jobs: usize) -> usize {
    let n = if cfg.workers == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        cfg.workers
    };
    n.clamp(1, jobs.max(1))
}

/// Runs the configured selection and returns reports in registry order.
pub fn run_suite(cfg: &RunConfig) -> Result<Vec<RelationReport>> {
    cfg.validate()?;
    let specs = selection(cfg)?;
    let ctx = Ctx::new(cfg)?;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<RelationReport>>> = Mutex::new(vec![None; specs.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers(cfg, specs.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(spec) = specs.get(k) else { break };
                let report = run_one(&ctx, spec);
                slots.lock().unwrap()[k] = Some(report);
            });
        }
    });
    Ok(slots.into_inner().unwrap().into_iter().map(|r| r.expect("every job reports")).collect())
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub resolution: f64,
    pub residual: f64,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub relation_id: String,
    /// What the resolution column measures.
    pub parameter: String,
    pub rows: Vec<ConvergenceRow>,
    pub non_increasing: bool,
}

/// Relative slack allowed when judging a series as non-increasing.
pub const NOISE_BAND: f64 = 0.1;

/// Each residual is at most `1 + NOISE_BAND` times its predecessor, or both are at
/// roundoff level.
pub fn non_increasing(values: &[f64]) -> bool {
    values
        .windows(2)
        .all(|w| w[1] <= (1.0 + NOISE_BAND) * w[0] || (w[0] <= SWEEP_FLOOR && w[1] <= SWEEP_FLOOR))
}

/// Relations that accept a resolution, with the name of the parameter.
pub const CONVERGENCE_RELATIONS: [(&str, &str); 4] =
    [("YB1", "N"), ("YB0", "N"), ("star-triang", "N"), ("FourierD", "T")];

/// Residual of `relation_id` at each resolution: grid points `N` for grid
/// relations, truncation `T` for the Fourier integral.
pub fn convergence_series(cfg: &RunConfig, relation_id: &str, resolutions: &[f64]) -> Result<ConvergenceTable> {
    cfg.validate()?;
    let parameter = CONVERGENCE_RELATIONS
        .iter()
        .find(|(id, _)| *id == relation_id)
        .map(|(_, p)| p.to_string())
        .ok_or_else(|| {
            let ids: Vec<&str> = CONVERGENCE_RELATIONS.iter().map(|(id, _)| *id).collect();
            Error::Unsupported(format!("{relation_id} has no resolution parameter; use one of {}", ids.join(", ")))
        })?;
    if resolutions.is_empty() {
        return Err(Error::Domain("the resolution list is empty".into()));
    }
    let ctx = Ctx::new(cfg)?;
    let mut rows = Vec::with_capacity(resolutions.len());
    for &res in resolutions {
        let as_points = || -> Result<usize> {
            if res >= 4.0 && res.fract() == 0.0 {
                Ok(res as usize)
            } else {
                Err(Error::Domain(format!("grid resolution {res} must be an integer ≥ 4")))
            }
        };
        let start = Instant::now();
        let residual = match relation_id {
            "YB1" => yb_at(&ctx, Grid::new(YB_FINE.l, as_points()?))?.residual,
            "YB0" => yb0_at(&ctx, Grid::new(YB0_GRID.l, as_points()?))?.residual,
            "star-triang" => {
                let g = Grid::new(ONE_COORD.l, as_points()?);
                star_triangle_op_residual(&ctx.engine, c(ctx.cfg.spectral.u), c(0.25), g)?
            }
            _ => {
                if !(res > 0.0) {
                    return Err(Error::Domain(format!("truncation {res} must be positive")));
                }
                fourier_at(&ctx, res)?
            }
        };
        rows.push(ConvergenceRow { resolution: res, residual, wall_time_ms: start.elapsed().as_secs_f64() * 1e3 });
    }
    let non_increasing = non_increasing(&rows.iter().map(|r| r.residual).collect::<Vec<_>>());
    Ok(ConvergenceTable { relation_id: relation_id.to_string(), parameter, rows, non_increasing })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn only(ids: &[&str]) -> RunConfig {
        RunConfig { relations: Some(ids.iter().map(|s| s.to_string()).collect()), workers: 1, ..RunConfig::default() }
    }

    #[test]
    fn ids_are_unique() {
        let mut ids = relation_ids();
        ids.sort();
        let n = ids.len();
        ids.dedup();
        assert_eq!(ids.len(), n);
    }

    #[test]
    fn unknown_and_empty_filters_list_valid_ids() {
        for ids in [vec![], vec!["nosuch".to_string()]] {
            match select(&ids) {
                Err(Error::UnknownRelation { valid, .. }) => assert!(valid.contains("RLL1")),
                other => panic!("expected an error, got {other:?}"),
            }
        }
    }

    #[test]
    fn filter_keeps_registry_order() {
        let ids = vec!["f2".to_string(), "refl".to_string()];
        let got: Vec<&str> = select(&ids).unwrap().iter().map(|r| r.id).collect();
        assert_eq!(got, ["refl", "f2"]);
    }

    #[test]
    fn suites_are_nested() {
        let count = |s: Suite| REGISTRY.iter().filter(|r| r.suite <= s).count();
        assert!(count(Suite::Fast) < count(Suite::Full) && count(Suite::Full) < count(Suite::Slow));
    }

    #[test]
    fn monotone_violation_is_zero_for_decreasing() {
        assert_eq!(monotone_violation(&[1e-2, 1e-5, 1e-8]), 0.0);
        assert_eq!(monotone_violation(&[1e-14, 3e-14]), 0.0);
        assert!((monotone_violation(&[1e-3, 2e-3]) - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn noise_band() {
        assert!(non_increasing(&[1.0, 1.05, 0.5]));
        assert!(!non_increasing(&[1.0, 1.2]));
        assert!(non_increasing(&[0.3]));
    }

    #[test]
    fn runs_exact_checks_and_reports() {
        let cfg = only(&["f1", "sl2c-RLL"]);
        let reports = run_suite(&cfg).unwrap();
        assert_eq!(reports.len(), 2);
        for r in &reports {
            assert_eq!(r.residual, Some(0.0));
            assert!(r.pass && r.outcome == Outcome::Passed);
        }
    }

    #[test]
    fn errors_become_failed_reports() {
        let spec = RelationSpec {
            id: "boom",
            anchor: "",
            class: RelationClass::Scalar,
            suite: Suite::Fast,
            check: |_| panic!("deliberate"),
        };
        let cfg = RunConfig::default();
        let ctx = Ctx::new(&cfg).unwrap();
        let r = run_one(&ctx, &spec);
        assert!(!r.pass);
        assert!(matches!(r.outcome, Outcome::Error { ref message } if message.contains("deliberate")));
        let spec = RelationSpec { check: |_| Err(Error::Domain("no".into())), ..spec };
        assert!(matches!(run_one(&ctx, &spec).outcome, Outcome::Error { .. }));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = RunConfig { b: -1.0, ..RunConfig::default() };
        assert!(run_suite(&cfg).is_err());
        let cfg = RunConfig { grid: GridConfig { l: 6.0, n: 100 }, ..RunConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn convergence_rejects_unsupported_and_empty() {
        let cfg = RunConfig::default();
        assert!(matches!(convergence_series(&cfg, "refl", &[1.0]), Err(Error::Unsupported(_))));
        assert!(matches!(convergence_series(&cfg, "YB1", &[]), Err(Error::Domain(_))));
        let t = convergence_series(&cfg, "FourierD", &[10.0]).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!(t.non_increasing);
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = RunConfig { seed: Some(7), ..RunConfig::default() };
        let back: RunConfig = serde_json::from_value(serde_json::to_value(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
