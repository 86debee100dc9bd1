//! Exact-arithmetic oracle for the holomorphic `SL(2,ℂ)` sector: polynomial
//! differential operators with rational-complex coefficients, and the factorization,
//! intertwining and RLL identities checked on all monomials up to a given degree.
//!
//! Variables are indexed `0..nvars`; the two-site relations use `z₁ = 0`, `z₂ = 1`
//! and the auxiliary `z_a = 2`, `z_b = 3`. The operators `e^{±z_i∂_j}` have no finite
//! normal form and act as the substitution `z_j ↦ z_j ± z_i`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact complex rational.
pub type Coef = Complex<BigRational>;

pub fn coef(n: i64) -> Coef {
    Complex::new(BigRational::from_integer(BigInt::from(n)), BigRational::zero())
}

pub fn rational(c: &BigRational) -> Coef {
    Complex::new(c.clone(), BigRational::zero())
}

/// Polynomial in `nvars` variables, keyed by exponent vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactPoly {
    pub nvars: usize,
    pub terms: BTreeMap<Vec<u32>, Coef>,
}

impl ExactPoly {
    pub fn zero(nvars: usize) -> ExactPoly {
        ExactPoly { nvars, terms: BTreeMap::new() }
    }

    pub fn monomial(exps: &[u32]) -> ExactPoly {
        let mut p = ExactPoly::zero(exps.len());
        p.terms.insert(exps.to_vec(), coef(1));
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, exps: Vec<u32>, c: Coef) {
        if c.is_zero() {
            return;
        }
        let v = self.terms.remove(&exps).map_or(c.clone(), |old| old + c);
        if !v.is_zero() {
            self.terms.insert(exps, v);
        }
    }

    pub fn add(&self, other: &ExactPoly) -> ExactPoly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &ExactPoly) -> ExactPoly {
        self.add(&other.scale(&coef(-1)))
    }

    pub fn scale(&self, c: &Coef) -> ExactPoly {
        let mut out = ExactPoly::zero(self.nvars);
        for (e, v) in &self.terms {
            out.add_term(e.clone(), v.clone() * c.clone());
        }
        out
    }

    pub fn mul(&self, other: &ExactPoly) -> ExactPoly {
        let mut out = ExactPoly::zero(self.nvars);
        for (a, x) in &self.terms {
            for (b, y) in &other.terms {
                let e = a.iter().zip(b).map(|(p, q)| p + q).collect();
                out.add_term(e, x.clone() * y.clone());
            }
        }
        out
    }

    fn pow(&self, n: u32) -> ExactPoly {
        let mut out = ExactPoly::monomial(&vec![0; self.nvars]);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// `z_j ↦ z_j + sign·z_i`, the action of `e^{sign·z_i∂_j}`.
    pub fn substitute(&self, i: usize, j: usize, sign: i64) -> ExactPoly {
        let mut shifted = ExactPoly::zero(self.nvars);
        let mut zi = vec![0; self.nvars];
        zi[i] = 1;
        let mut zj = vec![0; self.nvars];
        zj[j] = 1;
        shifted.add_term(zj, coef(1));
        shifted.add_term(zi, coef(sign));
        let mut out = ExactPoly::zero(self.nvars);
        for (e, c) in &self.terms {
            let mut rest = e.clone();
            rest[j] = 0;
            let mut base = ExactPoly::zero(self.nvars);
            base.add_term(rest, c.clone());
            out = out.add(&base.mul(&shifted.pow(e[j])));
        }
        out
    }

    /// Largest coefficient modulus, as a float; exactly `0.0` for the zero polynomial.
    pub fn max_abs(&self) -> f64 {
        self.terms
            .values()
            .map(|c| {
                let re = c.re.abs().to_f64().unwrap_or(f64::INFINITY);
                let im = c.im.abs().to_f64().unwrap_or(f64::INFINITY);
                re.hypot(im)
            })
            .fold(0.0, f64::max)
    }
}

/// `Σ c · z^a ∂^d`, normal ordered (multiplications left of derivatives).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactDiffOp {
    pub nvars: usize,
    pub terms: BTreeMap<(Vec<u32>, Vec<u32>), Coef>,
}

fn falling(n: u32, k: u32) -> BigInt {
    (0..k).fold(BigInt::one(), |acc, j| acc * BigInt::from(n - j))
}

fn binomial(n: u32, k: u32) -> BigInt {
    falling(n, k) / falling(k, k)
}

impl ExactDiffOp {
    pub fn zero(nvars: usize) -> ExactDiffOp {
        ExactDiffOp { nvars, terms: BTreeMap::new() }
    }

    pub fn scalar(nvars: usize, c: Coef) -> ExactDiffOp {
        let mut op = ExactDiffOp::zero(nvars);
        op.add_term(vec![0; nvars], vec![0; nvars], c);
        op
    }

    pub fn identity(nvars: usize) -> ExactDiffOp {
        ExactDiffOp::scalar(nvars, coef(1))
    }

    /// Multiplication by `z_i`.
    pub fn z(nvars: usize, i: usize) -> ExactDiffOp {
        let mut a = vec![0; nvars];
        a[i] = 1;
        let mut op = ExactDiffOp::zero(nvars);
        op.add_term(a, vec![0; nvars], coef(1));
        op
    }

    /// `∂_i`.
    pub fn d(nvars: usize, i: usize) -> ExactDiffOp {
        let mut c = vec![0; nvars];
        c[i] = 1;
        let mut op = ExactDiffOp::zero(nvars);
        op.add_term(vec![0; nvars], c, coef(1));
        op
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, a: Vec<u32>, d: Vec<u32>, c: Coef) {
        if c.is_zero() {
            return;
        }
        let key = (a, d);
        let v = self.terms.remove(&key).map_or(c.clone(), |old| old + c);
        if !v.is_zero() {
            self.terms.insert(key, v);
        }
    }

    pub fn add(&self, other: &ExactDiffOp) -> ExactDiffOp {
        let mut out = self.clone();
        for ((a, d), c) in &other.terms {
            out.add_term(a.clone(), d.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &ExactDiffOp) -> ExactDiffOp {
        self.add(&other.scale(&coef(-1)))
    }

    pub fn scale(&self, c: &Coef) -> ExactDiffOp {
        let mut out = ExactDiffOp::zero(self.nvars);
        for ((a, d), v) in &self.terms {
            out.add_term(a.clone(), d.clone(), v.clone() * c.clone());
        }
        out
    }

    /// `self ∘ other`, normal ordered with `∂^c z^b = Σ_k C(c,k) [b]_k z^{b−k} ∂^{c−k}`
    /// in each variable.
    pub fn compose(&self, other: &ExactDiffOp) -> ExactDiffOp {
        let mut out = ExactDiffOp::zero(self.nvars);
        for ((a, c), x) in &self.terms {
            for ((b, e), y) in &other.terms {
                // Expand variable by variable: (z-exponent, ∂-exponent, coefficient).
                let mut partial: Vec<(Vec<u32>, Vec<u32>, BigInt)> = vec![(a.clone(), e.clone(), BigInt::one())];
                for v in 0..self.nvars {
                    let mut next = Vec::new();
                    for (za, de, w) in &partial {
                        for k in 0..=c[v].min(b[v]) {
                            let mut za = za.clone();
                            let mut de = de.clone();
                            za[v] += b[v] - k;
                            de[v] += c[v] - k;
                            next.push((za, de, w * binomial(c[v], k) * falling(b[v], k)));
                        }
                    }
                    partial = next;
                }
                for (za, de, w) in partial {
                    let k = rational(&BigRational::from_integer(w));
                    out.add_term(za, de, x.clone() * y.clone() * k);
                }
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> ExactDiffOp {
        (0..n).fold(ExactDiffOp::identity(self.nvars), |acc, _| acc.compose(self))
    }

    /// `(z^a ∂^c) z^m = [m]_c z^{m−c+a}`.
    pub fn apply(&self, p: &ExactPoly) -> ExactPoly {
        let mut out = ExactPoly::zero(self.nvars);
        for ((a, c), x) in &self.terms {
            for (m, y) in &p.terms {
                if m.iter().zip(c).any(|(mi, ci)| mi < ci) {
                    continue;
                }
                let w = m.iter().zip(c).fold(BigInt::one(), |acc, (mi, ci)| acc * falling(*mi, *ci));
                let e = (0..self.nvars).map(|v| m[v] - c[v] + a[v]).collect();
                out.add_term(e, x.clone() * y.clone() * rational(&BigRational::from_integer(w)));
            }
        }
        out
    }

    /// The canonical transformation `z_v ↦ sz·∂_v`, `∂_v ↦ sd·z_v` on one variable.
    /// With `(sz, sd) = (−1, 1)` or `(1, −1)` it preserves `[∂, z] = 1`.
    pub fn canonical_transform(&self, v: usize, sz: i64, sd: i64) -> ExactDiffOp {
        let n = self.nvars;
        let mut out = ExactDiffOp::zero(n);
        for ((a, c), x) in &self.terms {
            let mut a_rest = a.clone();
            let mut c_rest = c.clone();
            a_rest[v] = 0;
            c_rest[v] = 0;
            let mut head = ExactDiffOp::zero(n);
            head.add_term(a_rest, vec![0; n], x.clone());
            let mut tail = ExactDiffOp::zero(n);
            tail.add_term(vec![0; n], c_rest, coef(1));
            let zv = ExactDiffOp::d(n, v).scale(&coef(sz)).pow(a[v]);
            let dv = ExactDiffOp::z(n, v).scale(&coef(sd)).pow(c[v]);
            out = out.add(&head.compose(&zv).compose(&dv).compose(&tail));
        }
        out
    }
}

/// A 2×2 matrix of exact operators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffMatrix {
    pub e: [[ExactDiffOp; 2]; 2],
}

impl DiffMatrix {
    pub fn new(a: ExactDiffOp, b: ExactDiffOp, c: ExactDiffOp, d: ExactDiffOp) -> DiffMatrix {
        DiffMatrix { e: [[a, b], [c, d]] }
    }

    pub fn mul(&self, other: &DiffMatrix) -> DiffMatrix {
        let entry = |i: usize, j: usize| self.e[i][0].compose(&other.e[0][j]).add(&self.e[i][1].compose(&other.e[1][j]));
        DiffMatrix::new(entry(0, 0), entry(0, 1), entry(1, 0), entry(1, 1))
    }

    /// `[[0,1],[1,0]] M [[0,1],[1,0]]`.
    pub fn flip(&self) -> DiffMatrix {
        DiffMatrix::new(self.e[1][1].clone(), self.e[1][0].clone(), self.e[0][1].clone(), self.e[0][0].clone())
    }

    pub fn map(&self, f: impl Fn(&ExactDiffOp) -> ExactDiffOp) -> DiffMatrix {
        DiffMatrix::new(f(&self.e[0][0]), f(&self.e[0][1]), f(&self.e[1][0]), f(&self.e[1][1]))
    }

    /// Scalar operator times the identity matrix.
    pub fn scalar(op: ExactDiffOp) -> DiffMatrix {
        let z = ExactDiffOp::zero(op.nvars);
        DiffMatrix::new(op.clone(), z.clone(), z, op)
    }

    fn lower(n: usize, c: ExactDiffOp) -> DiffMatrix {
        DiffMatrix::new(ExactDiffOp::identity(n), ExactDiffOp::zero(n), c, ExactDiffOp::identity(n))
    }
}

/// `L(u₁, u₂) = [[1,0],[z,1]] [[u₁,−∂],[0,u₂]] [[1,0],[−z,1]]` on variable `v`.
pub fn build_l(nvars: usize, v: usize, u1: &Coef, u2: &Coef) -> DiffMatrix {
    let z = ExactDiffOp::z(nvars, v);
    let d = ExactDiffOp::d(nvars, v);
    let mid = DiffMatrix::new(
        ExactDiffOp::scalar(nvars, u1.clone()),
        d.scale(&coef(-1)),
        ExactDiffOp::zero(nvars),
        ExactDiffOp::scalar(nvars, u2.clone()),
    );
    DiffMatrix::lower(nvars, z.clone()).mul(&mid).mul(&DiffMatrix::lower(nvars, z.scale(&coef(-1))))
}

/// `L⁺(u) = [[u,−∂],[0,1]] [[1,0],[−z,1]]`.
pub fn build_lplus(nvars: usize, v: usize, u: &Coef) -> DiffMatrix {
    let z = ExactDiffOp::z(nvars, v);
    let d = ExactDiffOp::d(nvars, v);
    DiffMatrix::new(
        ExactDiffOp::scalar(nvars, u.clone()),
        d.scale(&coef(-1)),
        ExactDiffOp::zero(nvars),
        ExactDiffOp::identity(nvars),
    )
    .mul(&DiffMatrix::lower(nvars, z.scale(&coef(-1))))
}

/// `L⁻(u) = [[1,0],[z,1]] [[1,−∂],[0,u]]`.
pub fn build_lminus(nvars: usize, v: usize, u: &Coef) -> DiffMatrix {
    let z = ExactDiffOp::z(nvars, v);
    let d = ExactDiffOp::d(nvars, v);
    DiffMatrix::lower(nvars, z).mul(&DiffMatrix::new(
        ExactDiffOp::identity(nvars),
        d.scale(&coef(-1)),
        ExactDiffOp::zero(nvars),
        ExactDiffOp::scalar(nvars, u.clone()),
    ))
}

/// `(z_i − z_j)^n`.
pub fn z_diff_pow(nvars: usize, i: usize, j: usize, n: u32) -> ExactDiffOp {
    ExactDiffOp::z(nvars, i).sub(&ExactDiffOp::z(nvars, j)).pow(n)
}

/// `(∂_i + ∂_j)^n`.
pub fn d_sum_pow(nvars: usize, i: usize, j: usize, n: u32) -> ExactDiffOp {
    ExactDiffOp::d(nvars, i).add(&ExactDiffOp::d(nvars, j)).pow(n)
}

/// One factor of an operator chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Factor {
    Matrix(DiffMatrix),
    /// `e^{sign·z_from·∂_to}` times the identity matrix.
    Exp { from: usize, to: usize, sign: i64 },
}

/// Applies the product `chain[0] chain[1] ⋯` (last factor first) to `e_col ⊗ p`,
/// returning both components of the result.
fn apply_chain(chain: &[Factor], col: usize, p: &ExactPoly) -> [ExactPoly; 2] {
    let mut v = [ExactPoly::zero(p.nvars), ExactPoly::zero(p.nvars)];
    v[col] = p.clone();
    for f in chain.iter().rev() {
        v = match f {
            Factor::Matrix(m) => {
                let row = |i: usize| m.e[i][0].apply(&v[0]).add(&m.e[i][1].apply(&v[1]));
                [row(0), row(1)]
            }
            Factor::Exp { from, to, sign } => [v[0].substitute(*from, *to, *sign), v[1].substitute(*from, *to, *sign)],
        };
    }
    v
}

/// All monomials in `nvars` variables of total degree at most `degree`.
pub fn monomials(nvars: usize, degree: u32) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..nvars {
        out = out
            .into_iter()
            .flat_map(|e: Vec<u32>| {
                let used: u32 = e.iter().sum();
                (0..=degree - used).map(move |k| {
                    let mut e = e.clone();
                    e.push(k);
                    e
                })
            })
            .collect();
    }
    out
}

/// Outcome of an exact identity check.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactOutcome {
    pub monomials: usize,
    /// Number of (monomial, matrix entry) pairs with a nonzero difference.
    pub failures: usize,
    /// Largest coefficient modulus in any difference; `0.0` iff the identity holds.
    pub residual: f64,
}

impl ExactOutcome {
    pub fn holds(&self) -> bool {
        self.failures == 0
    }
}

/// Compares two chains entrywise on every monomial up to `degree`.
pub fn compare_chains(lhs: &[Factor], rhs: &[Factor], nvars: usize, degree: u32) -> ExactOutcome {
    let monos = monomials(nvars, degree);
    let mut failures = 0;
    let mut residual: f64 = 0.0;
    for m in &monos {
        let p = ExactPoly::monomial(m);
        for col in 0..2 {
            let a = apply_chain(lhs, col, &p);
            let b = apply_chain(rhs, col, &p);
            for row in 0..2 {
                let d = a[row].sub(&b[row]);
                if !d.is_zero() {
                    failures += 1;
                    residual = residual.max(d.max_abs());
                }
            }
        }
    }
    ExactOutcome { monomials: monos.len(), failures, residual }
}

fn m(x: DiffMatrix) -> Factor {
    Factor::Matrix(x)
}

const Z1: usize = 0;
const Z2: usize = 1;
const ZA: usize = 2;
const ZB: usize = 3;

/// `(L(u₁,u₂))₁₁ z₁` by the operator algebra.
pub fn l11_on_z(u1: &Coef, u2: &Coef) -> ExactPoly {
    build_l(1, 0, u1, u2).e[0][0].apply(&ExactPoly::monomial(&[1]))
}

/// Factorization (f1): `L₁⁻(v) L₂⁺(u) = e^{−z₁∂₂} L₁(u,v) [[1,0],[−z₂,1]] e^{z₁∂₂}`.
pub fn check_f1(u: &Coef, v: &Coef, degree: u32) -> ExactOutcome {
    let n = 2;
    let lhs = [m(build_lminus(n, Z1, v)), m(build_lplus(n, Z2, u))];
    let rhs = [
        Factor::Exp { from: Z1, to: Z2, sign: -1 },
        m(build_l(n, Z1, u, v)),
        m(DiffMatrix::lower(n, ExactDiffOp::z(n, Z2).scale(&coef(-1)))),
        Factor::Exp { from: Z1, to: Z2, sign: 1 },
    ];
    compare_chains(&lhs, &rhs, n, degree)
}

/// Factorization (f2): `L₁⁻(v) L₂⁺(u) = e^{−z₂∂₁} [[1,0],[z₁,1]] L₂(u,v) e^{z₂∂₁}`.
pub fn check_f2(u: &Coef, v: &Coef, degree: u32) -> ExactOutcome {
    let n = 2;
    let lhs = [m(build_lminus(n, Z1, v)), m(build_lplus(n, Z2, u))];
    let rhs = [
        Factor::Exp { from: Z2, to: Z1, sign: -1 },
        m(DiffMatrix::lower(n, ExactDiffOp::z(n, Z1))),
        m(build_l(n, Z2, u, v)),
        Factor::Exp { from: Z2, to: Z1, sign: 1 },
    ];
    compare_chains(&lhs, &rhs, n, degree)
}

/// The two orderings of reduced operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Intertwining {
    /// `(∂₁+∂₂)^{v−u} L₁⁻(v) L₂⁺(u) = L₁⁻(u) L₂⁺(v) (∂₁+∂₂)^{v−u}`.
    MinusPlus,
    /// `z₁₂^{v−u} L₁⁺(v) L₂⁻(u) = L₁⁺(u) L₂⁻(v) z₁₂^{v−u}`.
    PlusMinus,
}

fn exponent(n: i64, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| {
        Error::Unsupported(format!("{what} = {n}: only nonnegative integer exponents have exact operators"))
    })
}

pub fn check_intertwining(u: i64, v: i64, which: Intertwining, degree: u32) -> Result<ExactOutcome> {
    let k = exponent(v - u, "v − u")?;
    let n = 2;
    let (cu, cv) = (coef(u), coef(v));
    let (w, first, second): (ExactDiffOp, fn(usize, usize, &Coef) -> DiffMatrix, fn(usize, usize, &Coef) -> DiffMatrix) =
        match which {
            Intertwining::MinusPlus => (d_sum_pow(n, Z1, Z2, k), build_lminus, build_lplus),
            Intertwining::PlusMinus => (z_diff_pow(n, Z1, Z2, k), build_lplus, build_lminus),
        };
    let wm = DiffMatrix::scalar(w);
    let lhs = [m(wm.clone()), m(first(n, Z1, &cv)), m(second(n, Z2, &cu))];
    let rhs = [m(first(n, Z1, &cu)), m(second(n, Z2, &cv)), m(wm)];
    Ok(compare_chains(&lhs, &rhs, n, degree))
}

/// `σ L⁻ σ |_{z→−∂, ∂→z} = L⁺` and `σ L⁺ σ |_{z→∂, ∂→−z} = L⁻`, as exact normal forms.
pub fn check_plus_minus_duality(u: &Coef) -> [bool; 2] {
    let lm = build_lminus(1, 0, u);
    let lp = build_lplus(1, 0, u);
    [
        lm.flip().map(|o| o.canonical_transform(0, -1, 1)) == lp,
        lp.flip().map(|o| o.canonical_transform(0, 1, -1)) == lm,
    ]
}

/// A tuple `𝐮 = (u₂, u₁, v₂, v₁)` of integers with nonnegative exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntTuple {
    pub u2: i64,
    pub u1: i64,
    pub v2: i64,
    pub v1: i64,
}

impl IntTuple {
    /// Exponents `(u₂−v₁, u₂−v₂, u₁−v₁, u₁−v₂)`.
    pub fn exponents(&self) -> Result<[u32; 4]> {
        Ok([
            exponent(self.u2 - self.v1, "u₂ − v₁")?,
            exponent(self.u2 - self.v2, "u₂ − v₂")?,
            exponent(self.u1 - self.v1, "u₁ − v₁")?,
            exponent(self.u1 - self.v2, "u₁ − v₂")?,
        ])
    }
}

/// `R = z₁₂^{u₂−v₁} ∂₁^{u₂−v₂} ∂₂^{u₁−v₁} z₁₂^{u₁−v₂}` on `nvars` variables.
pub fn build_r(t: &IntTuple, nvars: usize) -> Result<ExactDiffOp> {
    let [a, b, c, d] = t.exponents()?;
    Ok(z_diff_pow(nvars, Z1, Z2, a)
        .compose(&ExactDiffOp::d(nvars, Z1).pow(b))
        .compose(&ExactDiffOp::d(nvars, Z2).pow(c))
        .compose(&z_diff_pow(nvars, Z1, Z2, d)))
}

/// `R^{ab} = z₁₂^{u₂−v₁} (∂_a+∂₁)^{u₂−v₂} (∂₂+∂_b)^{u₁−v₁} z₁₂^{u₁−v₂}`.
pub fn build_r_ab(t: &IntTuple) -> Result<ExactDiffOp> {
    let [a, b, c, d] = t.exponents()?;
    Ok(z_diff_pow(4, Z1, Z2, a)
        .compose(&d_sum_pow(4, ZA, Z1, b))
        .compose(&d_sum_pow(4, Z2, ZB, c))
        .compose(&z_diff_pow(4, Z1, Z2, d)))
}

/// `R L₁(u₁,u₂) L₂(v₁,v₂) = L₁(v₁,v₂) L₂(u₁,u₂) R`.
pub fn check_rll(t: &IntTuple, degree: u32) -> Result<ExactOutcome> {
    let n = 2;
    let r = DiffMatrix::scalar(build_r(t, n)?);
    let c = |x: i64| coef(x);
    let lhs = [m(r.clone()), m(build_l(n, Z1, &c(t.u1), &c(t.u2))), m(build_l(n, Z2, &c(t.v1), &c(t.v2)))];
    let rhs = [m(build_l(n, Z1, &c(t.v1), &c(t.v2))), m(build_l(n, Z2, &c(t.u1), &c(t.u2))), m(r)];
    Ok(compare_chains(&lhs, &rhs, n, degree))
}

/// `R^{ab} L_a⁻(u₂) L₁⁺(u₁) L₂⁻(v₂) L_b⁺(v₁) = L_a⁻(v₂) L₁⁺(v₁) L₂⁻(u₂) L_b⁺(u₁) R^{ab}`.
pub fn check_four_site(t: &IntTuple, degree: u32) -> Result<ExactOutcome> {
    let n = 4;
    let r = DiffMatrix::scalar(build_r_ab(t)?);
    let c = |x: i64| coef(x);
    let lhs = [
        m(r.clone()),
        m(build_lminus(n, ZA, &c(t.u2))),
        m(build_lplus(n, Z1, &c(t.u1))),
        m(build_lminus(n, Z2, &c(t.v2))),
        m(build_lplus(n, ZB, &c(t.v1))),
    ];
    let rhs = [
        m(build_lminus(n, ZA, &c(t.v2))),
        m(build_lplus(n, Z1, &c(t.v1))),
        m(build_lminus(n, Z2, &c(t.u2))),
        m(build_lplus(n, ZB, &c(t.u1))),
        m(r),
    ];
    Ok(compare_chains(&lhs, &rhs, n, degree))
}

/// `R^{ab} = e^{−z₁∂_a} e^{−z₂∂_b} R e^{z₁∂_a} e^{z₂∂_b}` on four variables.
pub fn check_r_ab_conjugation(t: &IntTuple, degree: u32) -> Result<ExactOutcome> {
    let n = 4;
    let lhs = [m(DiffMatrix::scalar(build_r_ab(t)?))];
    let rhs = [
        Factor::Exp { from: Z1, to: ZA, sign: -1 },
        Factor::Exp { from: Z2, to: ZB, sign: -1 },
        m(DiffMatrix::scalar(build_r(t, n)?)),
        Factor::Exp { from: Z1, to: ZA, sign: 1 },
        Factor::Exp { from: Z2, to: ZB, sign: 1 },
    ];
    Ok(compare_chains(&lhs, &rhs, n, degree))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Coef {
        coef(n)
    }

    #[test]
    fn l11_matches_hand_expansion() {
        // L₁₁ = u₁ + ∂z = z∂ + u₁ + 1, so L₁₁ z = (u₁ + 2) z.
        let p = l11_on_z(&q(3), &q(5));
        assert_eq!(p, ExactPoly::monomial(&[1]).scale(&q(5)));
    }

    #[test]
    fn commutator_of_d_and_z() {
        let n = 1;
        let dz = ExactDiffOp::d(n, 0).compose(&ExactDiffOp::z(n, 0));
        let zd = ExactDiffOp::z(n, 0).compose(&ExactDiffOp::d(n, 0));
        assert_eq!(dz.sub(&zd), ExactDiffOp::identity(n));
    }

    #[test]
    fn substitution_is_exponential_of_derivative() {
        // e^{z₁∂₂} z₂² = (z₂ + z₁)².
        let p = ExactPoly::monomial(&[0, 2]).substitute(0, 1, 1);
        let expect = ExactPoly::monomial(&[0, 2])
            .add(&ExactPoly::monomial(&[1, 1]).scale(&q(2)))
            .add(&ExactPoly::monomial(&[2, 0]));
        assert_eq!(p, expect);
    }

    #[test]
    fn monomial_count() {
        assert_eq!(monomials(2, 3).len(), 10);
        assert_eq!(monomials(4, 2).len(), 15);
    }

    #[test]
    fn factorizations_hold() {
        assert!(check_f1(&q(2), &q(-1), 3).holds());
        assert!(check_f2(&q(2), &q(-1), 3).holds());
    }

    #[test]
    fn intertwinings_hold() {
        assert!(check_intertwining(1, 3, Intertwining::MinusPlus, 3).unwrap().holds());
        assert!(check_intertwining(0, 2, Intertwining::PlusMinus, 3).unwrap().holds());
        assert!(check_intertwining(2, 2, Intertwining::PlusMinus, 2).unwrap().holds());
        assert!(matches!(
            check_intertwining(3, 1, Intertwining::MinusPlus, 3),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn duality_of_reduced_operators() {
        assert_eq!(check_plus_minus_duality(&q(3)), [true, true]);
    }

    #[test]
    fn rll_holds_exactly() {
        let t = IntTuple { u2: 3, u1: 4, v2: 1, v1: 0 };
        let o = check_rll(&t, 3).unwrap();
        assert!(o.holds(), "{o:?}");
        assert_eq!(o.residual, 0.0);
    }

    #[test]
    fn four_site_form_and_conjugation() {
        let t = IntTuple { u2: 2, u1: 2, v2: 0, v1: 0 };
        assert!(check_four_site(&t, 2).unwrap().holds());
        assert!(check_r_ab_conjugation(&t, 3).unwrap().holds());
    }

    #[test]
    fn negative_exponent_is_rejected() {
        let t = IntTuple { u2: 0, u1: 4, v2: 1, v1: 0 };
        assert!(matches!(check_rll(&t, 2), Err(Error::Unsupported(_))));
    }

    #[test]
    fn wrong_r_is_detected() {
        // Exchanging the exponents of ∂₁ and ∂₂ breaks the relation.
        let t = IntTuple { u2: 3, u1: 4, v2: 1, v1: 0 };
        let n = 2;
        let [a, b, c, d] = t.exponents().unwrap();
        let wrong = z_diff_pow(n, 0, 1, a)
            .compose(&ExactDiffOp::d(n, 0).pow(c))
            .compose(&ExactDiffOp::d(n, 1).pow(b))
            .compose(&z_diff_pow(n, 0, 1, d));
        let r = DiffMatrix::scalar(wrong);
        let l = |v: usize, x: i64, y: i64| m(build_l(n, v, &q(x), &q(y)));
        let o = compare_chains(&[m(r.clone()), l(0, 4, 3), l(1, 0, 1)], &[l(0, 0, 1), l(1, 4, 3), m(r)], n, 3);
        assert!(!o.holds());
    }
}
