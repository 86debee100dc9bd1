//! Test functions: lazily evaluated expression trees over complex coordinates, and
//! uniform grids.
//!
//! Trees are needed because L-operator entries shift coordinates by imaginary
//! amounts such as ±ω′, which no real grid can represent, while kernel operators
//! leave results that have no closed form. Every node evaluates at arbitrary complex
//! points.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::C64;
use crate::quad::ContourRule;
use crate::specfun::GammaEvaluator;

/// Maximum number of kernel convolutions stacked on a single coordinate.
pub const MAX_CONV_DEPTH: usize = 3;

/// `Σ c_i x_i + d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearForm {
    pub coeffs: Vec<(usize, C64)>,
    pub constant: C64,
}

impl LinearForm {
    pub fn coord(i: usize) -> LinearForm {
        LinearForm {
            coeffs: vec![(i, C64::new(1.0, 0.0))],
            constant: C64::new(0.0, 0.0),
        }
    }

    /// `x_i − x_j`.
    pub fn difference(i: usize, j: usize) -> LinearForm {
        LinearForm {
            coeffs: vec![(i, C64::new(1.0, 0.0)), (j, C64::new(-1.0, 0.0))],
            constant: C64::new(0.0, 0.0),
        }
    }

    pub fn negated(&self) -> LinearForm {
        LinearForm {
            coeffs: self.coeffs.iter().map(|(i, c)| (*i, -c)).collect(),
            constant: -self.constant,
        }
    }

    pub fn with_constant(mut self, d: C64) -> LinearForm {
        self.constant = d;
        self
    }

    pub fn eval(&self, x: &[C64]) -> C64 {
        self.coeffs.iter().fold(self.constant, |acc, (i, c)| acc + c * x[*i])
    }

    pub fn max_coord(&self) -> Option<usize> {
        self.coeffs.iter().map(|(i, _)| *i).max()
    }

    /// `Some((i, j))` when the form is `x_i − x_j + constant`.
    pub fn as_difference(&self) -> Option<(usize, usize)> {
        let one = C64::new(1.0, 0.0);
        match self.coeffs.as_slice() {
            [(i, a), (j, b)] if i != j && *a == one && *b == -one => Some((*i, *j)),
            [(j, b), (i, a)] if i != j && *a == one && *b == -one => Some((*i, *j)),
            _ => None,
        }
    }

    /// Rewrites coordinate indices through `f`.
    pub fn remap(&self, f: impl Fn(usize) -> usize) -> LinearForm {
        LinearForm {
            coeffs: self.coeffs.iter().map(|(i, c)| (f(*i), *c)).collect(),
            constant: self.constant,
        }
    }
}

/// Scalar functions of one complex variable built from γ.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarFn {
    /// `D_a(y)`.
    D { a: C64 },
    /// `e^{2πiκy} / γ(σy + c)`.
    InvGamma { kappa: C64, sigma: f64, c: C64 },
}

impl ScalarFn {
    pub fn log_eval(&self, ev: &GammaEvaluator, y: C64) -> Result<C64> {
        match self {
            ScalarFn::D { a } => ev.log_d(*a, y),
            ScalarFn::InvGamma { kappa, sigma, c } => {
                let l = ev.log_gamma(*sigma * y + c)?;
                Ok(2.0 * PI * crate::params::I * kappa * y - l.value)
            }
        }
    }

    pub fn eval(&self, ev: &GammaEvaluator, y: C64) -> Result<C64> {
        Ok(self.log_eval(ev, y)?.exp())
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, ScalarFn::D { a } if *a == C64::new(0.0, 0.0))
    }
}

/// Pointwise multiplier `f(form(x))`.
#[derive(Debug, Clone)]
pub struct PointFn {
    pub f: ScalarFn,
    pub form: LinearForm,
    pub ev: Arc<GammaEvaluator>,
}

impl PointFn {
    pub fn eval(&self, x: &[C64]) -> Result<C64> {
        self.f.eval(&self.ev, self.form.eval(x))
    }
}

/// A convolution kernel discretized on a contour: `∫ K(t) Φ(x + t) dt ≈ Σ w_k Φ(x + t_k)`.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub rule: ContourRule,
    pub label: String,
    /// Set when `t_k = k·H` for consecutive integers `k` starting at `first`.
    pub lattice: Option<(C64, i64)>,
}

/// One term `exp(log_c + Σ α_i x_i² + β_i x_i)` of a Gaussian sum.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussTerm {
    pub log_c: C64,
    pub alpha: Vec<C64>,
    pub beta: Vec<C64>,
}

impl GaussTerm {
    pub fn eval(&self, x: &[C64]) -> C64 {
        let mut e = self.log_c;
        for i in 0..x.len() {
            e += self.alpha[i] * x[i] * x[i] + self.beta[i] * x[i];
        }
        e.exp()
    }

    /// The factor depending on coordinate `i` alone.
    fn coord_factor(&self, i: usize, y: C64) -> C64 {
        (self.alpha[i] * y * y + self.beta[i] * y).exp()
    }

    fn shift(&mut self, i: usize, a: C64) {
        let (al, be) = (self.alpha[i], self.beta[i]);
        self.log_c += al * a * a + be * a;
        self.beta[i] = be + 2.0 * al * a;
    }

    /// Applies `e^{t ∂_i²}` exactly.
    pub fn heat(&mut self, i: usize, t: C64) {
        let (al, be) = (self.alpha[i], self.beta[i]);
        let d = 1.0 - 4.0 * al * t;
        self.log_c += -0.5 * d.ln() + t * be * be / d;
        self.alpha[i] = al / d;
        self.beta[i] = be / d;
    }
}

/// A finite sum of Gaussian terms; the closed-form family used as test functions.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussSum {
    pub n: usize,
    pub terms: Vec<GaussTerm>,
}

impl GaussSum {
    pub fn eval(&self, x: &[C64]) -> C64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    /// Realizes `e^{∓iπp_i²}` (sign `+1` gives `e^{−iπp²}`) via `p² = −∂²/4π²`.
    pub fn fresnel(&mut self, i: usize, sign: i32) {
        let t = C64::new(0.0, sign as f64 / (4.0 * PI));
        for term in &mut self.terms {
            term.heat(i, t);
        }
    }
}

#[derive(Debug)]
pub enum Node {
    Gaussian(GaussSum),
    ExpLinear { form: LinearForm, child: State },
    PointMul { f: PointFn, child: State },
    KernelConv { coord: usize, kernel: Arc<Kernel>, child: State },
    /// `Σ_k Σ_l w_k v_l · g(x + t_k e_i + u_l e_j) · child(x + t_k e_i + u_l e_j)`.
    PairConv {
        first: (usize, Arc<Kernel>),
        second: (usize, Arc<Kernel>),
        inner: Option<PointFn>,
        child: State,
        closed: Option<GaussSum>,
    },
    Shift { coord: usize, amount: C64, child: State },
    Permute { i: usize, j: usize, child: State },
    Scale { c: C64, child: State },
    Sum(Vec<State>),
}

/// An immutable expression tree over `n` coordinates.
#[derive(Debug, Clone)]
pub struct State {
    node: Arc<Node>,
    n: usize,
}

fn check_decay(alphas: &[C64]) -> Result<()> {
    for (i, a) in alphas.iter().enumerate() {
        if !(a.re < 0.0) {
            return Err(Error::Domain(format!(
                "Gaussian exponent α_{i} = {a} must have negative real part"
            )));
        }
    }
    Ok(())
}

/// `∏ e^{α_i x_i² + β_i x_i}`; requires `Re α_i < 0`.
pub fn make_gaussian(alphas: &[C64], betas: &[C64]) -> Result<State> {
    if alphas.len() != betas.len() || alphas.is_empty() {
        return Err(Error::Index("alphas and betas must have equal positive length".into()));
    }
    check_decay(alphas)?;
    Ok(State::from_gauss(GaussSum {
        n: alphas.len(),
        terms: vec![GaussTerm {
            log_c: C64::new(0.0, 0.0),
            alpha: alphas.to_vec(),
            beta: betas.to_vec(),
        }],
    }))
}

impl State {
    fn wrap(node: Node, n: usize) -> State {
        State { node: Arc::new(node), n }
    }

    pub fn from_gauss(g: GaussSum) -> State {
        let n = g.n;
        State::wrap(Node::Gaussian(g), n)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    fn check_coord(&self, i: usize) -> Result<()> {
        if i >= self.n {
            Err(Error::Index(format!("coordinate {i} out of range for {} coordinates", self.n)))
        } else {
            Ok(())
        }
    }

    fn check_form(&self, form: &LinearForm) -> Result<()> {
        match form.max_coord() {
            Some(m) => self.check_coord(m),
            None => Ok(()),
        }
    }

    pub fn shift(&self, coord: usize, amount: C64) -> Result<State> {
        self.check_coord(coord)?;
        if amount == C64::new(0.0, 0.0) {
            return Ok(self.clone());
        }
        Ok(State::wrap(Node::Shift { coord, amount, child: self.clone() }, self.n))
    }

    pub fn exp_linear(&self, form: LinearForm) -> Result<State> {
        self.check_form(&form)?;
        Ok(State::wrap(Node::ExpLinear { form, child: self.clone() }, self.n))
    }

    pub fn point_mul(&self, f: PointFn) -> Result<State> {
        self.check_form(&f.form)?;
        if f.f.is_identity() {
            return Ok(self.clone());
        }
        Ok(State::wrap(Node::PointMul { f, child: self.clone() }, self.n))
    }

    pub fn conv(&self, coord: usize, kernel: Arc<Kernel>) -> Result<State> {
        self.check_coord(coord)?;
        Ok(State::wrap(Node::KernelConv { coord, kernel, child: self.clone() }, self.n))
    }

    pub fn pair_conv(
        &self,
        first: (usize, Arc<Kernel>),
        second: (usize, Arc<Kernel>),
        inner: Option<PointFn>,
    ) -> Result<State> {
        self.check_coord(first.0)?;
        self.check_coord(second.0)?;
        if first.0 == second.0 {
            return Err(Error::Index("pair convolution needs two distinct coordinates".into()));
        }
        if let Some(f) = &inner {
            self.check_form(&f.form)?;
        }
        let closed = self.gauss_sum();
        Ok(State::wrap(
            Node::PairConv { first, second, inner, child: self.clone(), closed },
            self.n,
        ))
    }

    pub fn permute(&self, i: usize, j: usize) -> Result<State> {
        self.check_coord(i)?;
        self.check_coord(j)?;
        if i == j {
            return Ok(self.clone());
        }
        Ok(State::wrap(Node::Permute { i, j, child: self.clone() }, self.n))
    }

    pub fn scale(&self, c: C64) -> State {
        if c == C64::new(1.0, 0.0) {
            return self.clone();
        }
        State::wrap(Node::Scale { c, child: self.clone() }, self.n)
    }

    pub fn sum(parts: Vec<State>) -> Result<State> {
        let n = parts.first().map(|s| s.n).ok_or_else(|| Error::Index("empty sum".into()))?;
        if parts.iter().any(|s| s.n != n) {
            return Err(Error::Index("summands have different coordinate counts".into()));
        }
        if parts.len() == 1 {
            return Ok(parts.into_iter().next().unwrap());
        }
        Ok(State::wrap(Node::Sum(parts), n))
    }

    pub fn add(&self, other: &State) -> Result<State> {
        State::sum(vec![self.clone(), other.clone()])
    }

    pub fn sub(&self, other: &State) -> Result<State> {
        State::sum(vec![self.clone(), other.scale(C64::new(-1.0, 0.0))])
    }

    /// The zero function on `n` coordinates.
    pub fn zero(n: usize) -> State {
        State::from_gauss(GaussSum { n, terms: Vec::new() })
    }

    /// Closed form when the tree only uses Gaussian-preserving nodes.
    pub fn gauss_sum(&self) -> Option<GaussSum> {
        match &*self.node {
            Node::Gaussian(g) => Some(g.clone()),
            Node::ExpLinear { form, child } => {
                let mut g = child.gauss_sum()?;
                for t in &mut g.terms {
                    t.log_c += form.constant;
                    for (i, c) in &form.coeffs {
                        t.beta[*i] += c;
                    }
                }
                Some(g)
            }
            Node::Shift { coord, amount, child } => {
                let mut g = child.gauss_sum()?;
                for t in &mut g.terms {
                    t.shift(*coord, *amount);
                }
                Some(g)
            }
            Node::Permute { i, j, child } => {
                let mut g = child.gauss_sum()?;
                for t in &mut g.terms {
                    t.alpha.swap(*i, *j);
                    t.beta.swap(*i, *j);
                }
                Some(g)
            }
            Node::Scale { c, child } => {
                let mut g = child.gauss_sum()?;
                if *c == C64::new(0.0, 0.0) {
                    g.terms.clear();
                } else {
                    let l = c.ln();
                    for t in &mut g.terms {
                        t.log_c += l;
                    }
                }
                Some(g)
            }
            Node::Sum(parts) => {
                let mut terms = Vec::new();
                for p in parts {
                    terms.extend(p.gauss_sum()?.terms);
                }
                Some(GaussSum { n: self.n, terms })
            }
            _ => None,
        }
    }

    /// Largest number of kernel convolutions stacked on any single coordinate.
    pub fn conv_depth(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0)
    }

    fn depths(&self) -> Vec<usize> {
        let mut d = match &*self.node {
            Node::Gaussian(_) => vec![0; self.n],
            Node::ExpLinear { child, .. }
            | Node::PointMul { child, .. }
            | Node::Shift { child, .. }
            | Node::Scale { child, .. } => child.depths(),
            Node::Permute { i, j, child } => {
                let mut d = child.depths();
                d.swap(*i, *j);
                d
            }
            Node::KernelConv { coord, child, .. } => {
                let mut d = child.depths();
                d[*coord] += 1;
                d
            }
            Node::PairConv { first, second, child, .. } => {
                let mut d = child.depths();
                d[first.0] += 1;
                d[second.0] += 1;
                d
            }
            Node::Sum(parts) => {
                let mut d = vec![0; self.n];
                for p in parts {
                    for (a, b) in d.iter_mut().zip(p.depths()) {
                        *a = (*a).max(b);
                    }
                }
                d
            }
        };
        d.resize(self.n, 0);
        d
    }

    /// Evaluates at `x` without memoization.
    pub fn eval(&self, x: &[C64]) -> Result<C64> {
        EvalCtx::new(false).eval(self, x)
    }
}

type MemoKey = (usize, Vec<(u64, u64)>);

/// Evaluation context carrying the optional memo table.
///
/// Values of convolution nodes are memoized by node identity and the exact bit
/// pattern of the evaluation point, so a memoized run performs the same floating
/// point operations as an unmemoized one and agrees with it bit for bit.
#[derive(Debug, Default)]
pub struct EvalCtx {
    memo: Option<HashMap<MemoKey, C64>>,
    /// Inner multiplier tables of pair convolutions, keyed by the multiplier's
    /// address and the value of its linear form at the evaluation point.
    tables: HashMap<(usize, (u64, u64)), Arc<InnerTable>>,
    pub hits: usize,
    pub misses: usize,
}

fn key(node: &Arc<Node>, x: &[C64]) -> MemoKey {
    (
        Arc::as_ptr(node) as usize,
        x.iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect(),
    )
}

impl EvalCtx {
    pub fn new(memoize: bool) -> EvalCtx {
        EvalCtx {
            memo: memoize.then(HashMap::new),
            tables: HashMap::new(),
            hits: 0,
            misses: 0,
        }
    }

    /// Checks the depth guard, then evaluates.
    pub fn eval_checked(&mut self, s: &State, x: &[C64]) -> Result<C64> {
        let d = s.conv_depth();
        if d > MAX_CONV_DEPTH {
            return Err(Error::DepthGuard(format!(
                "{d} nested convolutions on one coordinate (limit {MAX_CONV_DEPTH})"
            )));
        }
        self.eval(s, x)
    }

    pub fn eval(&mut self, s: &State, x: &[C64]) -> Result<C64> {
        if x.len() != s.n {
            return Err(Error::Index(format!("point has {} coordinates, state has {}", x.len(), s.n)));
        }
        self.eval_node(s, x)
    }

    fn eval_node(&mut self, s: &State, x: &[C64]) -> Result<C64> {
        match &*s.node {
            Node::Gaussian(g) => Ok(g.eval(x)),
            Node::ExpLinear { form, child } => Ok(form.eval(x).exp() * self.eval_node(child, x)?),
            Node::PointMul { f, child } => {
                let v = self.eval_node(child, x)?;
                if v == C64::new(0.0, 0.0) {
                    return Ok(v);
                }
                Ok(f.eval(x)? * v)
            }
            Node::Shift { coord, amount, child } => {
                let mut y = x.to_vec();
                y[*coord] += amount;
                self.eval_node(child, &y)
            }
            Node::Permute { i, j, child } => {
                let mut y = x.to_vec();
                y.swap(*i, *j);
                self.eval_node(child, &y)
            }
            Node::Scale { c, child } => Ok(c * self.eval_node(child, x)?),
            Node::Sum(parts) => {
                let mut acc = C64::new(0.0, 0.0);
                for p in parts {
                    acc += self.eval_node(p, x)?;
                }
                Ok(acc)
            }
            Node::KernelConv { .. } | Node::PairConv { .. } => {
                if self.memo.is_some() {
                    let k = key(&s.node, x);
                    if let Some(v) = self.memo.as_ref().unwrap().get(&k) {
                        self.hits += 1;
                        return Ok(*v);
                    }
                    self.misses += 1;
                    let v = self.eval_conv(s, x)?;
                    self.memo.as_mut().unwrap().insert(k, v);
                    Ok(v)
                } else {
                    self.eval_conv(s, x)
                }
            }
        }
    }

    fn eval_conv(&mut self, s: &State, x: &[C64]) -> Result<C64> {
        match &*s.node {
            Node::KernelConv { coord, kernel, child } => {
                let mut y = x.to_vec();
                let mut acc = C64::new(0.0, 0.0);
                for (t, w) in kernel.rule.nodes.iter().zip(&kernel.rule.weights) {
                    y[*coord] = x[*coord] + t;
                    acc += w * self.eval_node(child, &y)?;
                }
                Ok(acc)
            }
            Node::PairConv { first, second, inner, child, closed } => {
                self.eval_pair(x, first, second, inner.as_ref(), child, closed.as_ref())
            }
            _ => unreachable!("eval_conv called on a non-convolution node"),
        }
    }

    fn eval_pair(
        &mut self,
        x: &[C64],
        first: &(usize, Arc<Kernel>),
        second: &(usize, Arc<Kernel>),
        inner: Option<&PointFn>,
        child: &State,
        closed: Option<&GaussSum>,
    ) -> Result<C64> {
        let (i, ki) = (first.0, &first.1);
        let (j, kj) = (second.0, &second.1);
        let (ni, nj) = (ki.rule.len(), kj.rule.len());
        // Inner multiplier values, exploiting t_k − u_l = (k − l)H when possible.
        let inner_table = match inner {
            None => None,
            Some(f) => {
                let base = f.form.eval(x);
                let key = (f as *const PointFn as usize, (base.re.to_bits(), base.im.to_bits()));
                match self.tables.get(&key) {
                    Some(t) => Some(t.clone()),
                    None => {
                        let t = Arc::new(Self::inner_values(base, i, ki, j, kj, f)?);
                        if self.tables.len() >= MAX_TABLES {
                            self.tables.clear();
                        }
                        self.tables.insert(key, t.clone());
                        Some(t)
                    }
                }
            }
        };
        // Child values.
        let child_vals: Vec<C64> = match closed {
            Some(g) => {
                let mut out = vec![C64::new(0.0, 0.0); ni * nj];
                let mut base = x.to_vec();
                for term in &g.terms {
                    base[i] = C64::new(0.0, 0.0);
                    base[j] = C64::new(0.0, 0.0);
                    let rest = term.eval(&base);
                    let fi: Vec<C64> = ki.rule.nodes.iter().map(|t| term.coord_factor(i, x[i] + t)).collect();
                    let fj: Vec<C64> = kj.rule.nodes.iter().map(|u| term.coord_factor(j, x[j] + u)).collect();
                    for (k, a) in fi.iter().enumerate() {
                        let ra = rest * a;
                        let row = &mut out[k * nj..(k + 1) * nj];
                        for (o, b) in row.iter_mut().zip(&fj) {
                            *o += ra * b;
                        }
                    }
                }
                out
            }
            None => {
                let mut out = Vec::with_capacity(ni * nj);
                let mut y = x.to_vec();
                for t in &ki.rule.nodes {
                    y[i] = x[i] + t;
                    for u in &kj.rule.nodes {
                        y[j] = x[j] + u;
                        out.push(self.eval_node(child, &y)?);
                    }
                }
                out
            }
        };
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..ni {
            let mut row = C64::new(0.0, 0.0);
            for l in 0..nj {
                let g = match &inner_table {
                    None => C64::new(1.0, 0.0),
                    Some(t) => match &**t {
                        InnerTable::Lattice { vals, offset } => vals[(k as i64 - l as i64 + offset) as usize],
                        InnerTable::Full(vals) => vals[k * nj + l],
                    },
                };
                row += kj.rule.weights[l] * g * child_vals[k * nj + l];
            }
            acc += ki.rule.weights[k] * row;
        }
        Ok(acc)
    }

    /// Values of `f` at `form(x + t_k e_i + u_l e_j) = base + c_i t_k + c_j u_l`.
    fn inner_values(base: C64, i: usize, ki: &Kernel, j: usize, kj: &Kernel, f: &PointFn) -> Result<InnerTable> {
        let ci = f.form.coeffs.iter().filter(|(c, _)| *c == i).map(|(_, v)| *v).sum::<C64>();
        let cj = f.form.coeffs.iter().filter(|(c, _)| *c == j).map(|(_, v)| *v).sum::<C64>();
        if let (Some((hi, fi)), Some((hj, fj))) = (ki.lattice, kj.lattice) {
            if hi == hj && ci == -cj {
                // c_i t_k + c_j u_l = c_i (k − l) H + c_i (f_i − f_j) H.
                let base = base + ci * hi * (fi - fj) as f64;
                let (ni, nj) = (ki.rule.len() as i64, kj.rule.len() as i64);
                let offset = nj - 1;
                let mut vals = Vec::with_capacity((ni + nj - 1) as usize);
                for m in -(nj - 1)..ni {
                    vals.push(f.f.eval(&f.ev, base + ci * hi * m as f64)?);
                }
                return Ok(InnerTable::Lattice { vals, offset });
            }
        }
        let mut vals = Vec::with_capacity(ki.rule.len() * kj.rule.len());
        for t in &ki.rule.nodes {
            let bt = base + ci * t;
            for u in &kj.rule.nodes {
                vals.push(f.f.eval(&f.ev, bt + cj * u)?);
            }
        }
        Ok(InnerTable::Full(vals))
    }
}

/// Bound on cached inner tables per evaluation context.
const MAX_TABLES: usize = 8;

#[derive(Debug)]
enum InnerTable {
    Lattice { vals: Vec<C64>, offset: i64 },
    Full(Vec<C64>),
}

/// Evaluates `s` at `point` with the depth guard and memoization enabled.
pub fn eval_state(s: &State, point: &[C64]) -> Result<C64> {
    EvalCtx::new(true).eval_checked(s, point)
}

/// Samples on the uniform tensor grid `x = −L + k·2L/N`, `k = 0..N`, in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridData {
    pub n: usize,
    pub l: f64,
    pub points: usize,
    pub data: Vec<C64>,
}

impl GridData {
    pub fn new(n: usize, l: f64, points: usize, data: Vec<C64>) -> Result<GridData> {
        if points < 4 || !points.is_multiple_of(2) {
            return Err(Error::Domain(format!("grid size {points} must be even and at least 4")));
        }
        if data.len() != points.pow(n as u32) {
            return Err(Error::Index("sample count does not match the grid shape".into()));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("grid samples must be finite".into()));
        }
        Ok(GridData { n, l, points, data })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.l / self.points as f64
    }

    pub fn axis(&self) -> Vec<f64> {
        axis(self.l, self.points)
    }

    /// Grid coordinates of the sample with flat index `idx`.
    pub fn coords_of(&self, idx: usize) -> Vec<f64> {
        let ax = self.axis();
        let mut out = vec![0.0; self.n];
        let mut r = idx;
        for d in (0..self.n).rev() {
            out[d] = ax[r % self.points];
            r /= self.points;
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn same_shape(&self, other: &GridData) -> bool {
        self.n == other.n && self.points == other.points && self.l == other.l
    }

    pub fn map(&self, f: impl Fn(&[f64], C64) -> C64) -> GridData {
        let data = (0..self.data.len())
            .map(|k| f(&self.coords_of(k), self.data[k]))
            .collect();
        GridData { data, ..self.clone() }
    }

    /// Flat binary layout: `n: u64`, `L: f64`, `N: u64`, then `(re, im)` pairs, all little-endian.
    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&self.l.to_le_bytes())?;
        w.write_all(&(self.points as u64).to_le_bytes())?;
        for z in &self.data {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<GridData> {
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let l = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let points = u64::from_le_bytes(b8) as usize;
        if n == 0 || n > 6 || points == 0 || points > 1 << 16 {
            return Err(Error::Domain(format!("implausible grid header n={n}, N={points}")));
        }
        let count = points.checked_pow(n as u32).ok_or_else(|| Error::Domain("grid too large".into()))?;
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            data.push(C64::new(re, f64::from_le_bytes(b8)));
        }
        GridData::new(n, l, points, data)
    }

    /// CSV with columns `x1..xn, re, im`.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        let header: Vec<String> = (1..=self.n).map(|i| format!("x{i}")).collect();
        writeln!(w, "{},re,im", header.join(","))?;
        for (k, z) in self.data.iter().enumerate() {
            let c: Vec<String> = self.coords_of(k).iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(w, "{},{:.17e},{:.17e}", c.join(","), z.re, z.im)?;
        }
        Ok(())
    }
}

pub fn axis(l: f64, points: usize) -> Vec<f64> {
    let h = 2.0 * l / points as f64;
    (0..points).map(|k| -l + k as f64 * h).collect()
}

/// Samples `s` on the grid.
pub fn to_grid(s: &State, n: usize, l: f64, points: usize) -> Result<GridData> {
    if s.n() != n {
        return Err(Error::Index(format!("state has {} coordinates, grid {n}", s.n())));
    }
    if points < 4 || !points.is_multiple_of(2) {
        return Err(Error::Domain(format!("grid size {points} must be even and at least 4")));
    }
    let ax = axis(l, points);
    let total = points.pow(n as u32);
    let mut data = Vec::with_capacity(total);
    let closed = s.gauss_sum();
    let mut ctx = EvalCtx::new(false);
    let mut x = vec![C64::new(0.0, 0.0); n];
    for idx in 0..total {
        let mut r = idx;
        for d in (0..n).rev() {
            x[d] = C64::new(ax[r % points], 0.0);
            r /= points;
        }
        data.push(match &closed {
            Some(g) => g.eval(&x),
            None => ctx.eval(s, &x)?,
        });
    }
    GridData::new(n, l, points, data)
}

/// Relative L² distance `‖a − b‖ / max(‖a‖, ‖b‖)`.
pub fn state_distance(a: &GridData, b: &GridData) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::Index("grids differ in shape".into()));
    }
    let diff = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let scale = a.norm().max(b.norm());
    Ok(if scale == 0.0 { diff } else { diff / scale })
}

/// Relative L² distance between two sample vectors.
pub fn relative_l2(a: &[C64], b: &[C64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let na = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::I;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn std_gauss() -> State {
        make_gaussian(&[c(-PI, 0.0)], &[c(0.0, 0.0)]).unwrap()
    }

    #[test]
    fn gaussian_closed_form() {
        let g = std_gauss();
        assert_eq!(g.eval(&[c(0.0, 0.0)]).unwrap(), c(1.0, 0.0));
        let x = c(0.3, -0.2);
        assert!((g.eval(&[x]).unwrap() - (-PI * x * x).exp()).norm() < 1e-14);
    }

    #[test]
    fn rejects_growing_gaussian() {
        assert!(make_gaussian(&[c(0.0, 1.0)], &[c(0.0, 0.0)]).is_err());
        assert!(make_gaussian(&[c(1.0, 0.0)], &[c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn shift_matches_closed_form() {
        let a = c(0.2, 0.625);
        let s = std_gauss().shift(0, a).unwrap();
        let x = c(0.7, 0.0);
        let expect = (-PI * (x + a) * (x + a)).exp();
        assert!((s.eval(&[x]).unwrap() - expect).norm() < 1e-14);
        let g = s.gauss_sum().unwrap();
        assert!((g.eval(&[x]) - expect).norm() < 1e-14);
    }

    #[test]
    fn fresnel_pair_is_identity() {
        let s = make_gaussian(&[c(-2.0, 0.0)], &[c(0.3, 0.1)]).unwrap();
        let mut g = s.gauss_sum().unwrap();
        g.fresnel(0, 1);
        g.fresnel(0, -1);
        for x in [-1.0, 0.0, 0.4, 1.3] {
            let x = [c(x, 0.0)];
            assert!((g.eval(&x) - s.eval(&x).unwrap()).norm() < 1e-13);
        }
    }

    #[test]
    fn fresnel_matches_fourier_multiplier() {
        // e^{−iπp²} e^{−πx²}: in Fourier space ĝ(k) = e^{−πk²} is multiplied by e^{−iπk²},
        // giving (1+i)^{−1/2} e^{−πx²/(1+i)}.
        let mut g = std_gauss().gauss_sum().unwrap();
        g.fresnel(0, 1);
        let x = c(0.37, 0.0);
        let d = C64::new(1.0, 1.0);
        let expect = d.powf(-0.5) * (-PI * x * x / d).exp();
        assert!((g.eval(&[x]) - expect).norm() < 1e-14);
    }

    #[test]
    fn grid_distance_basics() {
        let g = to_grid(&std_gauss(), 1, 4.0, 64).unwrap();
        assert_eq!(state_distance(&g, &g).unwrap(), 0.0);
        let h = to_grid(&std_gauss().scale(c(1.0 + 1e-6, 0.0)), 1, 4.0, 64).unwrap();
        let d = state_distance(&g, &h).unwrap();
        assert!((d - 1e-6).abs() < 1e-9);
        assert_eq!(d, state_distance(&h, &g).unwrap());
    }

    #[test]
    fn binary_roundtrip() {
        let s = make_gaussian(&[c(-PI, 0.0), c(-2.0, 0.0)], &[c(0.0, 0.0), c(0.3, 0.1)]).unwrap();
        let g = to_grid(&s, 2, 3.0, 8).unwrap();
        let mut buf = Vec::new();
        g.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 16 * 64);
        let back = GridData::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back, g);
        let mut csv = Vec::new();
        g.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("x1,x2,re,im\n"));
        assert_eq!(text.lines().count(), 65);
    }

    #[test]
    fn depth_guard_trips() {
        let k = Arc::new(Kernel {
            rule: ContourRule::tilted_line(0.0, 1.0, 0.5),
            label: "box".into(),
            lattice: None,
        });
        let mut s = std_gauss();
        for _ in 0..4 {
            s = s.conv(0, k.clone()).unwrap();
        }
        assert!(matches!(eval_state(&s, &[c(0.0, 0.0)]), Err(Error::DepthGuard(_))));
    }

    #[test]
    fn exp_linear_and_sum() {
        let s = std_gauss();
        let e = s.exp_linear(LinearForm::coord(0).with_constant(I)).unwrap();
        let x = c(0.2, 0.1);
        let v = e.eval(&[x]).unwrap();
        assert!((v - (x + I).exp() * (-PI * x * x).exp()).norm() < 1e-14);
        let t = State::sum(vec![s.clone(), e.clone()]).unwrap();
        assert!((t.eval(&[x]).unwrap() - s.eval(&[x]).unwrap() - v).norm() < 1e-14);
    }
}
