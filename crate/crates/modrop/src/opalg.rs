//! Finite-difference operators as sums of compositions of primitives, with a tree
//! backend (exact shifts, kernel convolutions) and a spectral grid backend.
//!
//! A function `f(p)` of the momentum `p = (1/2πi)∂_x` acts on `e^{2πikx}` as
//! multiplication by `f(k)`. On trees, `D_a(p)` is the convolution
//! `(D_a(p)Φ)(x) = A(c)∫ D_c(t) Φ(x + t) dt` with `c = −a − ω″`; on grids it is the
//! multiplier `D_a(k)` on the discrete frequency lattice.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::params::{C64, I};
use crate::quad::{strip_step, ContourRule};
use crate::specfun::{line_distance, separating_tilt, GammaEvaluator};
use crate::states::{GridData, Kernel, LinearForm, PointFn, ScalarFn, State};

/// Elementary operators.
#[derive(Debug, Clone, PartialEq)]
pub enum Prim {
    /// `e^{2πiap}`: `Φ(x) ↦ Φ(x + a e_coord)`.
    Shift { coord: usize, a: C64 },
    /// Multiplication by `e^{form(x)}`.
    ExpMul { form: LinearForm },
    /// Multiplication by `f(form(x))`.
    PointMul { f: ScalarFn, form: LinearForm },
    /// `f(p_coord)`.
    Momentum { coord: usize, f: ScalarFn },
    /// `e^{−iπp²}` for `sign = +1`, `e^{iπp²}` for `sign = −1`.
    Fresnel { coord: usize, sign: i32 },
    Permute { i: usize, j: usize },
}

impl Prim {
    fn max_coord(&self) -> Option<usize> {
        match self {
            Prim::Shift { coord, .. } | Prim::Momentum { coord, .. } | Prim::Fresnel { coord, .. } => Some(*coord),
            Prim::ExpMul { form } | Prim::PointMul { form, .. } => form.max_coord(),
            Prim::Permute { i, j } => Some((*i).max(*j)),
        }
    }

    /// Transpose with respect to the bilinear pairing `∫ Ψ Φ dx`.
    fn transpose(&self) -> Prim {
        match self {
            Prim::Shift { coord, a } => Prim::Shift { coord: *coord, a: -a },
            Prim::Momentum { coord, f: ScalarFn::InvGamma { kappa, sigma, c } } => Prim::Momentum {
                coord: *coord,
                f: ScalarFn::InvGamma { kappa: -kappa, sigma: -sigma, c: *c },
            },
            // Multipliers are symmetric; D_a(p) and e^{∓iπp²} are even in p.
            other => other.clone(),
        }
    }
}

/// `coef · P_1 P_2 ⋯ P_k`, written left to right; `P_k` acts first.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coef: C64,
    pub factors: Vec<Prim>,
}

/// A finite sum of terms. Operators are never simplified symbolically; identities
/// are checked by application to states.
#[derive(Debug, Clone, PartialEq)]
pub struct FDOperator {
    pub terms: Vec<Term>,
}

impl FDOperator {
    pub fn identity() -> FDOperator {
        FDOperator::scalar(C64::new(1.0, 0.0))
    }

    pub fn zero() -> FDOperator {
        FDOperator { terms: Vec::new() }
    }

    pub fn scalar(c: C64) -> FDOperator {
        FDOperator {
            terms: vec![Term { coef: c, factors: Vec::new() }],
        }
    }

    pub fn prim(p: Prim) -> FDOperator {
        FDOperator {
            terms: vec![Term { coef: C64::new(1.0, 0.0), factors: vec![p] }],
        }
    }

    pub fn shift(coord: usize, a: C64) -> FDOperator {
        FDOperator::prim(Prim::Shift { coord, a })
    }

    /// `e^{c·x_coord}`.
    pub fn exp_mul(coord: usize, c: C64) -> FDOperator {
        FDOperator::prim(Prim::ExpMul {
            form: LinearForm {
                coeffs: vec![(coord, c)],
                constant: C64::new(0.0, 0.0),
            },
        })
    }

    pub fn permute(i: usize, j: usize) -> FDOperator {
        FDOperator::prim(Prim::Permute { i, j })
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `self ∘ other`: `other` acts first.
    pub fn then_after(&self, other: &FDOperator) -> FDOperator {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let mut factors = a.factors.clone();
                factors.extend(b.factors.iter().cloned());
                terms.push(Term { coef: a.coef * b.coef, factors });
            }
        }
        FDOperator { terms }
    }

    pub fn add(&self, other: &FDOperator) -> FDOperator {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        FDOperator { terms }
    }

    pub fn scale(&self, c: C64) -> FDOperator {
        FDOperator {
            terms: self
                .terms
                .iter()
                .map(|t| Term { coef: t.coef * c, factors: t.factors.clone() })
                .collect(),
        }
    }

    pub fn sub(&self, other: &FDOperator) -> FDOperator {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Transpose with respect to `∫ Ψ Φ dx`, moving shifts onto test functions.
    pub fn transpose(&self) -> FDOperator {
        FDOperator {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coef: t.coef,
                    factors: t.factors.iter().rev().map(Prim::transpose).collect(),
                })
                .collect(),
        }
    }

    /// Conjugates by the relabelling `i ↦ map(i)` of coordinates.
    pub fn relabel(&self, map: &impl Fn(usize) -> usize) -> FDOperator {
        let re = |p: &Prim| match p {
            Prim::Shift { coord, a } => Prim::Shift { coord: map(*coord), a: *a },
            Prim::ExpMul { form } => Prim::ExpMul { form: form.remap(map) },
            Prim::PointMul { f, form } => Prim::PointMul { f: f.clone(), form: form.remap(map) },
            Prim::Momentum { coord, f } => Prim::Momentum { coord: map(*coord), f: f.clone() },
            Prim::Fresnel { coord, sign } => Prim::Fresnel { coord: map(*coord), sign: *sign },
            Prim::Permute { i, j } => Prim::Permute { i: map(*i), j: map(*j) },
        };
        FDOperator {
            terms: self
                .terms
                .iter()
                .map(|t| Term { coef: t.coef, factors: t.factors.iter().map(re).collect() })
                .collect(),
        }
    }

    fn max_coord(&self) -> Option<usize> {
        self.terms.iter().flat_map(|t| t.factors.iter().filter_map(Prim::max_coord)).max()
    }
}

/// Composition in written order: `compose([A, B, C]) = A B C`, with `C` acting first.
pub fn compose(ops: &[FDOperator]) -> FDOperator {
    ops.iter().fold(FDOperator::identity(), |acc, op| acc.then_after(op))
}

/// `D_a(p_coord)`, realized by its kernel on trees and by the multiplier on grids.
pub fn d_of_p(a: C64, coord: usize) -> FDOperator {
    if a == C64::new(0.0, 0.0) {
        return FDOperator::identity();
    }
    FDOperator::prim(Prim::Momentum { coord, f: ScalarFn::D { a } })
}

/// Multiplication by `D_a(form)`.
pub fn d_of_x(a: C64, form: LinearForm) -> FDOperator {
    if a == C64::new(0.0, 0.0) {
        return FDOperator::identity();
    }
    FDOperator::prim(Prim::PointMul { f: ScalarFn::D { a }, form })
}

/// `e^{∓iπp²}` on `coord`; exact on Gaussian sums, unsupported elsewhere on trees.
pub fn fresnel(coord: usize, sign: i32) -> FDOperator {
    FDOperator::prim(Prim::Fresnel { coord, sign: sign.signum() })
}

/// `e^{2πiκp}/γ(σp + c)` on `coord`; grid backend only.
pub fn inv_gamma_of_p(coord: usize, kappa: C64, sigma: f64, c: C64) -> FDOperator {
    FDOperator::prim(Prim::Momentum { coord, f: ScalarFn::InvGamma { kappa, sigma, c } })
}

/// Multiplication by `e^{2πiκ·form}/γ(σ·form + c)`.
pub fn inv_gamma_of_x(form: LinearForm, kappa: C64, sigma: f64, c: C64) -> FDOperator {
    FDOperator::prim(Prim::PointMul { f: ScalarFn::InvGamma { kappa, sigma, c }, form })
}

/// A 2×2 matrix of operators.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub e: [[FDOperator; 2]; 2],
}

impl OperatorMatrix {
    pub fn new(a: FDOperator, b: FDOperator, c: FDOperator, d: FDOperator) -> OperatorMatrix {
        OperatorMatrix { e: [[a, b], [c, d]] }
    }

    pub fn identity() -> OperatorMatrix {
        OperatorMatrix::diag(FDOperator::identity(), FDOperator::identity())
    }

    pub fn diag(a: FDOperator, d: FDOperator) -> OperatorMatrix {
        OperatorMatrix::new(a, FDOperator::zero(), FDOperator::zero(), d)
    }

    pub fn scalar(m: [[C64; 2]; 2]) -> OperatorMatrix {
        let s = |c: C64| if c == C64::new(0.0, 0.0) { FDOperator::zero() } else { FDOperator::scalar(c) };
        OperatorMatrix::new(s(m[0][0]), s(m[0][1]), s(m[1][0]), s(m[1][1]))
    }

    pub fn get(&self, i: usize, j: usize) -> &FDOperator {
        &self.e[i][j]
    }

    pub fn map(&self, f: impl Fn(&FDOperator) -> FDOperator) -> OperatorMatrix {
        OperatorMatrix::new(f(&self.e[0][0]), f(&self.e[0][1]), f(&self.e[1][0]), f(&self.e[1][1]))
    }

    pub fn scale(&self, c: C64) -> OperatorMatrix {
        self.map(|o| o.scale(c))
    }

    /// Multiplies every entry on the left by an operator (`op · M`).
    pub fn left_op(&self, op: &FDOperator) -> OperatorMatrix {
        self.map(|o| op.then_after(o))
    }

    /// Multiplies every entry on the right by an operator (`M · op`).
    pub fn right_op(&self, op: &FDOperator) -> OperatorMatrix {
        self.map(|o| o.then_after(op))
    }
}

/// Matrix product with operator-valued entries; entries compose in written order.
pub fn matmul(a: &OperatorMatrix, b: &OperatorMatrix) -> OperatorMatrix {
    let entry = |i: usize, j: usize| {
        let mut acc = FDOperator::zero();
        for k in 0..2 {
            if a.e[i][k].is_zero() || b.e[k][j].is_zero() {
                continue;
            }
            acc = acc.add(&a.e[i][k].then_after(&b.e[k][j]));
        }
        acc
    };
    OperatorMatrix::new(entry(0, 0), entry(0, 1), entry(1, 0), entry(1, 1))
}

/// Contour family used for a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum ContourKind {
    /// Straight tilted line; used for closed-form Gaussian operands, which stay
    /// bounded along it.
    Line,
    /// Bounded S-shaped contour staying inside the operand's strip of analyticity.
    Strip,
}

type KernelKey = ((u64, u64), ContourKind);

/// Half-width of the strip of analyticity assumed for non-entire operands, in units
/// of `Im ω″`. `D(x_ij)` multipliers at real points satisfy it.
const STRIP_FRACTION: f64 = 0.95;

/// Application backends sharing one γ evaluator and a kernel cache.
#[derive(Debug)]
pub struct Engine {
    ev: Arc<GammaEvaluator>,
    tol: f64,
    support: f64,
    kernels: Mutex<HashMap<KernelKey, Arc<Kernel>>>,
}

impl Engine {
    pub fn new(ev: Arc<GammaEvaluator>) -> Engine {
        let tol = ev.numerics().kernel_tol;
        Engine {
            ev,
            tol,
            support: 4.0,
            kernels: Mutex::new(HashMap::new()),
        }
    }

    pub fn evaluator(&self) -> &Arc<GammaEvaluator> {
        &self.ev
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Kernel of `D_a(p)`: weights `A(c) D_c(t_k) t′(s_k) h`, `c = −a − ω″`.
    pub fn d_kernel(&self, a: C64, entire_operand: bool) -> Result<Arc<Kernel>> {
        let kind = if entire_operand { ContourKind::Line } else { ContourKind::Strip };
        let key = ((a.re.to_bits(), a.im.to_bits()), kind);
        if let Some(k) = self.kernels.lock().unwrap().get(&key) {
            return Ok(k.clone());
        }
        let k = Arc::new(self.build_d_kernel(a, kind)?);
        self.kernels.lock().unwrap().insert(key, k.clone());
        Ok(k)
    }

    fn build_d_kernel(&self, a: C64, kind: ContourKind) -> Result<Kernel> {
        let p = self.ev.params();
        let c = -a - p.omega_dp;
        if c.im >= 0.0 {
            return Err(Error::Domain(format!(
                "kernel of D_a(p) does not decay for a = {a} (needs Im(−a−ω″) < 0)"
            )));
        }
        let w = p.w();
        let decay = 2.0 * PI * (-c.im - 0.5 * c.re.abs()).max(0.25 * w);
        let half = (1.0 / self.tol).ln() / decay + self.support;
        // Points the contour must pass above (a, and its downward row) and below (−a).
        let lo = [a, a - 2.0 * p.omega, a - 2.0 * p.omega_prime];
        let hi = [-a, -a + 2.0 * p.omega, -a + 2.0 * p.omega_prime];
        let growth = 1e3;
        let rule = match kind {
            ContourKind::Line => {
                let theta = separating_tilt(a, 0.5)
                    .ok_or_else(|| Error::Domain(format!("no separating contour for D_a(p), a = {a}")))?;
                let dist = lo.iter().chain(&hi).map(|q| line_distance(*q, theta)).fold(1.0, f64::min);
                let h = strip_step(0.8 * dist, self.tol, growth);
                ContourRule::tilted_line(theta, half, h)
            }
            ContourKind::Strip => {
                let strip = STRIP_FRACTION * w;
                let (eta, lam) = if a.im < -0.15 {
                    (0.0, 1.0)
                } else {
                    if a.re.abs() < 1e-12 {
                        return Err(Error::Domain(format!("contour pinched at a = {a}")));
                    }
                    (0.35 * strip * a.re.signum(), a.re.abs().max(0.05))
                };
                let map = move |s: C64| s + I * eta * (s / lam).tanh();
                let dmap = move |s: C64| {
                    let ch = (s / lam).cosh();
                    1.0 + I * eta / (lam * ch * ch)
                };
                let mut dist: f64 = if eta == 0.0 { 1.0 } else { 0.5 * lam * PI / 2.0 };
                dist = dist.min((strip - eta.abs()) / (1.0 + eta.abs() / lam));
                for q in lo.iter().chain(&hi) {
                    if let Some(s) = invert(&map, &dmap, *q) {
                        dist = dist.min(s.im.abs());
                    }
                }
                let h = strip_step(0.8 * dist, self.tol, growth);
                let k = (half / h).ceil() as i64;
                ContourRule::from_map(-(k as f64) * h, k as f64 * h + 0.5 * h, h, |s| {
                    let s = C64::new(s, 0.0);
                    (map(s), dmap(s))
                })
            }
        };
        let norm = self.ev.a_norm(c)?;
        let mut weights = Vec::with_capacity(rule.len());
        for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
            weights.push(wt * norm * self.ev.d(c, *t).map_err(|e| e.annotate("kernel node"))?);
        }
        let lattice = match kind {
            ContourKind::Line => {
                let first = -((rule.len() as i64 - 1) / 2);
                Some((rule.nodes[1] - rule.nodes[0], first))
            }
            ContourKind::Strip => None,
        };
        Ok(Kernel {
            rule: ContourRule { nodes: rule.nodes, weights, step: rule.step },
            label: format!("D_{a}(p) [{kind:?}]"),
            lattice,
        })
    }

    /// Applies `op` to a tree state lazily.
    pub fn apply(&self, op: &FDOperator, s: &State) -> Result<State> {
        if let Some(m) = op.max_coord() {
            if m >= s.n() {
                return Err(Error::Index(format!("operator touches coordinate {m}, state has {}", s.n())));
            }
        }
        let mut parts = Vec::with_capacity(op.terms.len());
        for t in &op.terms {
            let mut cur = s.clone();
            for f in t.factors.iter().rev() {
                cur = self.apply_prim(f, &cur)?;
            }
            parts.push(cur.scale(t.coef));
        }
        if parts.is_empty() {
            return Ok(State::zero(s.n()));
        }
        let out = State::sum(parts)?;
        Ok(match out.gauss_sum() {
            Some(g) => State::from_gauss(g),
            None => out,
        })
    }

    fn apply_prim(&self, p: &Prim, s: &State) -> Result<State> {
        match p {
            Prim::Shift { coord, a } => s.shift(*coord, *a),
            Prim::ExpMul { form } => s.exp_linear(form.clone()),
            Prim::PointMul { f, form } => s.point_mul(PointFn { f: f.clone(), form: form.clone(), ev: self.ev.clone() }),
            Prim::Momentum { coord, f } => match f {
                ScalarFn::D { a } => {
                    let k = self.d_kernel(*a, s.gauss_sum().is_some())?;
                    s.conv(*coord, k)
                }
                ScalarFn::InvGamma { .. } => Err(Error::Unsupported(
                    "e^{2πiκp}/γ(σp+c) has no decaying kernel; use the grid backend".into(),
                )),
            },
            Prim::Fresnel { coord, sign } => {
                let mut g = s
                    .gauss_sum()
                    .ok_or_else(|| Error::Unsupported("Fresnel multiplier needs a Gaussian-sum operand".into()))?;
                if *coord >= g.n {
                    return Err(Error::Index(format!("coordinate {coord} out of range")));
                }
                g.fresnel(*coord, *sign);
                Ok(State::from_gauss(g))
            }
            Prim::Permute { i, j } => s.permute(*i, *j),
        }
    }

    /// `R = D_{u−σ}(x₁₂) D_{u+δ}(p₂) D_{u−δ}(p₁) D_{u+σ}(x₁₂)` in integral form: two
    /// independent kernel integrations sandwiched between the coordinate multipliers.
    pub fn pair_sandwich(
        &self,
        s: &State,
        (i, a_i): (usize, C64),
        (j, a_j): (usize, C64),
        inner: Option<(C64, LinearForm)>,
        outer: Option<(C64, LinearForm)>,
    ) -> Result<State> {
        let inner = inner
            .filter(|(a, _)| *a != C64::new(0.0, 0.0))
            .map(|(a, form)| PointFn { f: ScalarFn::D { a }, form, ev: self.ev.clone() });
        let entire = inner.is_none() && s.gauss_sum().is_some();
        let ki = self.d_kernel(a_i, entire)?;
        let kj = self.d_kernel(a_j, entire)?;
        let mut out = s.pair_conv((i, ki), (j, kj), inner)?;
        if let Some((a, form)) = outer {
            out = out.point_mul(PointFn { f: ScalarFn::D { a }, form, ev: self.ev.clone() })?;
        }
        Ok(out)
    }

    /// Applies `op` to grid samples; momentum functions act as spectral multipliers.
    pub fn apply_grid(&self, op: &FDOperator, g: &GridData) -> Result<GridData> {
        if let Some(m) = op.max_coord() {
            if m >= g.n {
                return Err(Error::Index(format!("operator touches coordinate {m}, grid has {}", g.n)));
            }
        }
        let mut acc = vec![C64::new(0.0, 0.0); g.data.len()];
        for t in &op.terms {
            let mut cur = g.data.clone();
            for f in t.factors.iter().rev() {
                cur = self.apply_prim_grid(f, g, cur)?;
            }
            for (a, c) in acc.iter_mut().zip(&cur) {
                *a += t.coef * c;
            }
        }
        Ok(GridData { data: acc, ..g.clone() })
    }

    fn apply_prim_grid(&self, p: &Prim, g: &GridData, data: Vec<C64>) -> Result<Vec<C64>> {
        let shape = GridShape { n: g.n, points: g.points, l: g.l };
        Ok(match p {
            Prim::Shift { coord, a } => {
                let m: Vec<C64> = shape.freqs().iter().map(|k| (2.0 * PI * I * a * k).exp()).collect();
                shape.multiply_axis(data, *coord, &m)
            }
            Prim::Momentum { coord, f } => {
                let mut m = Vec::with_capacity(g.points);
                for k in shape.freqs() {
                    m.push(f.eval(&self.ev, C64::new(k, 0.0)).map_err(|e| e.annotate("momentum multiplier"))?);
                }
                shape.multiply_axis(data, *coord, &m)
            }
            Prim::Fresnel { coord, sign } => {
                let m: Vec<C64> = shape
                    .freqs()
                    .iter()
                    .map(|k| (-(*sign as f64) * I * PI * k * k).exp())
                    .collect();
                shape.multiply_axis(data, *coord, &m)
            }
            Prim::ExpMul { form } => shape.pointwise(data, |x| Ok(form.eval(x).exp()))?,
            Prim::PointMul { f, form } if form.as_difference().is_some() => {
                // On the lattice x_i − x_j = (k_i − k_j)h, so one row of values suffices.
                let (i, j) = form.as_difference().unwrap();
                let (n, h) = (g.points as i64, g.spacing());
                let mut row = Vec::with_capacity(2 * g.points - 1);
                for m in -(n - 1)..n {
                    row.push(f.eval(&self.ev, form.constant + m as f64 * h)?);
                }
                shape.pointwise_indexed(data, |k| row[k[i] + g.points - 1 - k[j]])
            }
            Prim::PointMul { f, form } => {
                let mut cache: HashMap<(u64, u64), C64> = HashMap::new();
                shape.pointwise(data, |x| {
                    let y = form.eval(x);
                    let key = (y.re.to_bits(), y.im.to_bits());
                    if let Some(v) = cache.get(&key) {
                        return Ok(*v);
                    }
                    let v = f.eval(&self.ev, y)?;
                    cache.insert(key, v);
                    Ok(v)
                })?
            }
            Prim::Permute { i, j } => shape.swap_axes(data, *i, *j),
        })
    }
}

/// Solves `map(s) = target` by Newton iteration from `Re target`.
fn invert(map: &impl Fn(C64) -> C64, dmap: &impl Fn(C64) -> C64, target: C64) -> Option<C64> {
    let mut s = C64::new(target.re, 0.0);
    for _ in 0..60 {
        let step = (map(s) - target) / dmap(s);
        s -= step;
        if !s.re.is_finite() || !s.im.is_finite() {
            return None;
        }
        if step.norm() < 1e-13 {
            return Some(s);
        }
    }
    None
}

/// True when the tree is built only from operations preserving entire functions.
pub fn is_entire(s: &State) -> bool {
    use crate::states::Node;
    match s.node() {
        Node::Gaussian(_) => true,
        Node::ExpLinear { child, .. }
        | Node::Shift { child, .. }
        | Node::Permute { child, .. }
        | Node::Scale { child, .. }
        | Node::KernelConv { child, .. } => is_entire(child),
        Node::PairConv { inner, child, .. } => inner.is_none() && is_entire(child),
        Node::PointMul { .. } => false,
        Node::Sum(parts) => parts.iter().all(is_entire),
    }
}

struct GridShape {
    n: usize,
    points: usize,
    l: f64,
}

impl GridShape {
    /// Discrete frequencies `k/(2L)` in FFT order.
    fn freqs(&self) -> Vec<f64> {
        let n = self.points as i64;
        (0..n)
            .map(|k| if k < n / 2 { k } else { k - n } as f64 / (2.0 * self.l))
            .collect()
    }

    fn stride(&self, axis: usize) -> usize {
        self.points.pow((self.n - 1 - axis) as u32)
    }

    fn multiply_axis(&self, mut data: Vec<C64>, axis: usize, mult: &[C64]) -> Vec<C64> {
        let mut planner = FftPlanner::<f64>::new();
        let fwd: Arc<dyn Fft<f64>> = planner.plan_fft_forward(self.points);
        let inv: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(self.points);
        let stride = self.stride(axis);
        let block = stride * self.points;
        let scale = 1.0 / self.points as f64;
        let mut line = vec![C64::new(0.0, 0.0); self.points];
        for outer in (0..data.len()).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[base + k * stride];
                }
                fwd.process(&mut line);
                for (v, m) in line.iter_mut().zip(mult) {
                    *v *= m;
                }
                inv.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = v * scale;
                }
            }
        }
        data
    }

    fn pointwise(&self, mut data: Vec<C64>, mut f: impl FnMut(&[C64]) -> Result<C64>) -> Result<Vec<C64>> {
        let h = 2.0 * self.l / self.points as f64;
        let mut x = vec![C64::new(0.0, 0.0); self.n];
        for (idx, v) in data.iter_mut().enumerate() {
            let mut r = idx;
            for d in (0..self.n).rev() {
                x[d] = C64::new(-self.l + (r % self.points) as f64 * h, 0.0);
                r /= self.points;
            }
            *v *= f(&x)?;
        }
        Ok(data)
    }

    fn pointwise_indexed(&self, mut data: Vec<C64>, f: impl Fn(&[usize]) -> C64) -> Vec<C64> {
        let mut k = vec![0usize; self.n];
        for (idx, v) in data.iter_mut().enumerate() {
            let mut r = idx;
            for d in (0..self.n).rev() {
                k[d] = r % self.points;
                r /= self.points;
            }
            *v *= f(&k);
        }
        data
    }

    fn swap_axes(&self, data: Vec<C64>, i: usize, j: usize) -> Vec<C64> {
        if i == j {
            return data;
        }
        let mut out = vec![C64::new(0.0, 0.0); data.len()];
        let mut digits = vec![0usize; self.n];
        for (idx, v) in data.iter().enumerate() {
            let mut r = idx;
            for d in (0..self.n).rev() {
                digits[d] = r % self.points;
                r /= self.points;
            }
            digits.swap(i, j);
            let target = digits.iter().fold(0, |acc, d| acc * self.points + d);
            out[target] = *v;
        }
        out
    }
}

/// `∫ Ψ(x) Φ(x) dx` by the grid rectangle rule, with `Ψ` a closed-form Gaussian sum.
pub fn pair_with(psi: &State, g: &GridData) -> Result<C64> {
    let gs = psi
        .gauss_sum()
        .ok_or_else(|| Error::Unsupported("test functional must be a Gaussian sum".into()))?;
    if gs.n != g.n {
        return Err(Error::Index("test function and grid differ in coordinate count".into()));
    }
    let h = g.spacing().powi(g.n as i32);
    let mut acc = C64::new(0.0, 0.0);
    for (idx, v) in g.data.iter().enumerate() {
        let x: Vec<C64> = g.coords_of(idx).into_iter().map(|t| C64::new(t, 0.0)).collect();
        acc += gs.eval(&x) * v;
    }
    Ok(acc * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{make_params, NumericsConfig};
    use crate::states::{make_gaussian, to_grid};

    fn engine() -> Engine {
        let p = make_params(0.8).unwrap();
        Engine::new(Arc::new(GammaEvaluator::new(p, NumericsConfig::default()).unwrap()))
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn gauss1() -> State {
        make_gaussian(&[c(-2.0, 0.0)], &[c(0.3, 0.1)]).unwrap()
    }

    #[test]
    fn shift_moves_argument() {
        let e = engine();
        let s = e.apply(&FDOperator::shift(0, c(0.2, 0.625)), &gauss1()).unwrap();
        let x = c(0.4, 0.0);
        let y = x + c(0.2, 0.625);
        let expect = (-2.0 * y * y + c(0.3, 0.1) * y).exp();
        assert!((s.eval(&[x]).unwrap() - expect).norm() < 1e-13);
    }

    #[test]
    fn kernel_matches_spectral_multiplier() {
        let e = engine();
        let op = d_of_p(c(0.35, 0.0), 0);
        let tree = e.apply(&op, &gauss1()).unwrap();
        let grid = to_grid(&gauss1(), 1, 6.0, 256).unwrap();
        let spec = e.apply_grid(&op, &grid).unwrap();
        for idx in [96, 120, 128, 140, 170] {
            let x = grid.coords_of(idx)[0];
            let v = tree.eval(&[c(x, 0.0)]).unwrap();
            assert!((v - spec.data[idx]).norm() < 1e-8, "x = {x}: {v} vs {}", spec.data[idx]);
        }
    }

    #[test]
    fn inverse_pair_is_identity() {
        let e = engine();
        let a = c(-0.3, 0.0);
        let s = e.apply(&compose(&[d_of_p(a, 0), d_of_p(-a, 0)]), &gauss1()).unwrap();
        for x in [-1.0, -0.3, 0.0, 0.5, 1.2] {
            let x = [c(x, 0.0)];
            assert!((s.eval(&x).unwrap() - gauss1().eval(&x).unwrap()).norm() < 1e-8);
        }
    }

    #[test]
    fn strip_contour_agrees_with_line() {
        let e = engine();
        let a = c(0.27, 0.0);
        let k1 = e.d_kernel(a, true).unwrap();
        let k2 = e.d_kernel(a, false).unwrap();
        let g = gauss1();
        let s1 = g.conv(0, k1).unwrap();
        let s2 = g.conv(0, k2).unwrap();
        for x in [-0.8, 0.1, 0.9] {
            let x = [c(x, 0.0)];
            assert!((s1.eval(&x).unwrap() - s2.eval(&x).unwrap()).norm() < 1e-8);
        }
    }

    #[test]
    fn matmul_identity_is_neutral() {
        let m = OperatorMatrix::new(
            FDOperator::shift(0, c(0.0, 0.625)),
            FDOperator::exp_mul(0, c(1.0, 0.0)),
            FDOperator::zero(),
            FDOperator::scalar(c(2.0, 0.0)),
        );
        assert_eq!(matmul(&OperatorMatrix::identity(), &m), m);
        assert_eq!(matmul(&m, &OperatorMatrix::identity()), m);
    }

    #[test]
    fn transpose_moves_shift_to_test_function() {
        // ∫ Ψ(x) Φ(x + a) dx = ∫ Ψ(x − a) Φ(x) dx for entire decaying functions.
        let e = engine();
        let a = c(0.1, 0.625);
        let op = FDOperator::shift(0, a).then_after(&FDOperator::exp_mul(0, c(0.5, 0.2)));
        let phi = gauss1();
        let psi = make_gaussian(&[c(-1.5, 0.0)], &[c(-0.4, 0.0)]).unwrap();
        let lhs = pair_with(&psi, &to_grid(&e.apply(&op, &phi).unwrap(), 1, 8.0, 256).unwrap()).unwrap();
        let rhs = pair_with(&e.apply(&op.transpose(), &psi).unwrap(), &to_grid(&phi, 1, 8.0, 256).unwrap()).unwrap();
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm());
    }

    #[test]
    fn fresnel_rejects_non_gaussian() {
        let e = engine();
        let s = e.apply(&d_of_x(c(0.3, 0.0), LinearForm::coord(0)), &gauss1()).unwrap();
        assert!(matches!(e.apply(&fresnel(0, 1), &s), Err(Error::Unsupported(_))));
    }

    #[test]
    fn grid_fresnel_matches_closed_form() {
        let e = engine();
        let g = to_grid(&gauss1(), 1, 6.0, 256).unwrap();
        let spec = e.apply_grid(&fresnel(0, 1), &g).unwrap();
        let exact = to_grid(&e.apply(&fresnel(0, 1), &gauss1()).unwrap(), 1, 6.0, 256).unwrap();
        assert!(crate::states::state_distance(&spec, &exact).unwrap() < 1e-12);
    }
}
