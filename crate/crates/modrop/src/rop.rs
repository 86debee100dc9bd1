//! The S-operators, the R-operator in product and integral form, the universal
//! R-matrix `ℛ`, and the relations they satisfy.
//!
//! Two-site operators are built on coordinates 0 and 1 and moved to other pairs with
//! [`on_pair`]. Relations involving `R` are checked on grids, where momentum
//! functions are exact spectral multipliers; relations whose two sides contain
//! shifts by complex amounts after `R` are checked in weak form, pairing with
//! Gaussian test functions so that the shifts act on the closed-form side.

use serde::{Deserialize, Serialize};

use crate::check::panel;
use crate::error::{Error, Result};
use crate::lax::{build_ell, build_ellbar, build_l, build_l_spin, SpectralTuple};
use crate::modouble::SpinParams;
use crate::opalg::{
    compose, d_of_p, d_of_x, inv_gamma_of_p, inv_gamma_of_x, matmul, pair_with, Engine, FDOperator,
    OperatorMatrix,
};
use crate::params::{swap_omegas, ModularParams, C64};
use crate::specfun::{star_triangle_sides, GammaEvaluator};
use crate::states::{make_gaussian, relative_l2, state_distance, to_grid, EvalCtx, GridData, LinearForm, State};

/// A uniform periodic grid `x = −l + k·2l/points` on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub l: f64,
    pub points: usize,
}

impl Grid {
    pub const fn new(l: f64, points: usize) -> Grid {
        Grid { l, points }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.l / self.points as f64
    }

    pub fn sample(&self, s: &State) -> Result<GridData> {
        to_grid(s, s.n(), self.l, self.points)
    }
}

fn x12() -> LinearForm {
    LinearForm::difference(0, 1)
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// The transposition `s_i` of neighbouring entries of `𝐮 = (u₂, u₁, v₂, v₁)`.
pub fn s_action(i: usize, t: &SpectralTuple) -> Result<SpectralTuple> {
    let mut a = t.as_array();
    match i {
        1..=3 => a.swap(i - 1, i),
        _ => return Err(Error::Index(format!("transposition s_{i} does not exist; use 1, 2 or 3"))),
    }
    Ok(SpectralTuple::from_array(a))
}

/// `S₁ = D_{u₂−u₁}(p₁)`, `S₂ = D_{u₁−v₂}(x₁₂)`, `S₃ = D_{v₂−v₁}(p₂)`.
pub fn build_s(i: usize, t: &SpectralTuple) -> Result<FDOperator> {
    Ok(match i {
        1 => d_of_p(t.u2 - t.u1, 0),
        2 => d_of_x(t.u1 - t.v2, x12()),
        3 => d_of_p(t.v2 - t.v1, 1),
        _ => return Err(Error::Index(format!("S_{i} does not exist; use 1, 2 or 3"))),
    })
}

/// The operator of the word `s_{i₁} s_{i₂} ⋯ s_{i_k}`:
/// `S_{i₁}(s_{i₂}⋯s_{i_k}𝐮) ⋯ S_{i_{k−1}}(s_{i_k}𝐮) S_{i_k}(𝐮)`.
pub fn s_word(word: &[usize], t: &SpectralTuple) -> Result<FDOperator> {
    let mut factors = Vec::with_capacity(word.len());
    let mut cur = *t;
    for &i in word.iter().rev() {
        factors.push(build_s(i, &cur)?);
        cur = s_action(i, &cur)?;
    }
    factors.reverse();
    Ok(compose(&factors))
}

/// `R(𝐮)` assembled from the word `s₂s₁s₃s₂`.
pub fn r_word(t: &SpectralTuple) -> Result<FDOperator> {
    s_word(&[2, 1, 3, 2], t)
}

/// `R(𝐮) = D_{u₂−v₁}(x₁₂) D_{u₁−v₁}(p₂) D_{u₂−v₂}(p₁) D_{u₁−v₂}(x₁₂)`.
pub fn build_r(t: &SpectralTuple) -> FDOperator {
    compose(&[
        d_of_x(t.u2 - t.v1, x12()),
        d_of_p(t.u1 - t.v1, 1),
        d_of_p(t.u2 - t.v2, 0),
        d_of_x(t.u1 - t.v2, x12()),
    ])
}

/// Sorts every run of adjacent momentum functions by coordinate. Functions of
/// different momenta commute, so this is a normal form for comparing words.
pub fn canonical(op: &FDOperator) -> FDOperator {
    use crate::opalg::Prim;
    let mut out = op.clone();
    for t in &mut out.terms {
        let mut k = 0;
        while k < t.factors.len() {
            let mut end = k;
            while end < t.factors.len() && matches!(t.factors[end], Prim::Momentum { .. }) {
                end += 1;
            }
            if end > k {
                t.factors[k..end].sort_by_key(|p| match p {
                    Prim::Momentum { coord, .. } => *coord,
                    _ => unreachable!(),
                });
                k = end;
            } else {
                k += 1;
            }
        }
    }
    out
}

/// The spin form `R(u) = D_{u−σ}(x₁₂) D_{u+δ}(p₂) D_{u−δ}(p₁) D_{u+σ}(x₁₂)`, with
/// `σ = (s₁+s₂)/2`, `δ = (s₁−s₂)/2` and `u` the difference of spectral parameters.
///
/// This is the explicit product over `𝐮` rewritten in spins. The spin form as
/// printed alongside it carries `u∓δ` on `p₂`, `p₁` instead; [`r_spin_printed`]
/// builds that variant, which fails the RLL relation.
pub fn r_spin(u: C64, s1: C64, s2: C64) -> FDOperator {
    let (sg, dl) = (0.5 * (s1 + s2), 0.5 * (s1 - s2));
    compose(&[
        d_of_x(u - sg, x12()),
        d_of_p(u + dl, 1),
        d_of_p(u - dl, 0),
        d_of_x(u + sg, x12()),
    ])
}

/// The spin form with the signs of `δ` exchanged between the momentum factors.
pub fn r_spin_printed(u: C64, s1: C64, s2: C64) -> FDOperator {
    r_spin(u, s2, s1)
}

/// `ℝ(u) = P₁₂ R(u)`.
pub fn big_r(u: C64, s1: C64, s2: C64) -> FDOperator {
    FDOperator::permute(0, 1).then_after(&r_spin(u, s1, s2))
}

/// Moves a two-site operator from coordinates (0, 1) to (i, j).
pub fn on_pair(op: &FDOperator, i: usize, j: usize) -> FDOperator {
    op.relabel(&|c| match c {
        0 => i,
        1 => j,
        other => other,
    })
}

/// `R(u)` applied to a tree state in integral form: the multiplier `D_{u+σ}(x₁₂)`,
/// the two kernel integrations of `D_{u−δ}(p₁)` and `D_{u+δ}(p₂)` carried out
/// together, then `D_{u−σ}(x₁₂)`.
pub fn apply_r_integral(engine: &Engine, u: C64, s1: C64, s2: C64, state: &State) -> Result<State> {
    if state.n() < 2 {
        return Err(Error::Index("the R-operator needs two coordinates".into()));
    }
    let (sg, dl) = (0.5 * (s1 + s2), 0.5 * (s1 - s2));
    let zero = C64::new(0.0, 0.0);
    let (a1, a2) = (u - dl, u + dl);
    if a1 == zero || a2 == zero {
        // One kernel is the identity; nothing is gained from the paired integration.
        return engine.apply(&r_spin(u, s1, s2), state);
    }
    let p = engine.evaluator().params();
    for a in [a1, a2] {
        if (-a - p.omega_dp).im >= 0.0 {
            return Err(Error::Domain(format!("kernel of D_{a}(p) does not decay")));
        }
    }
    engine.pair_sandwich(state, (0, a1), (1, a2), Some((u + sg, x12())), Some((u - sg, x12())))
}

/// Product form on a grid against integral form on trees for one Gaussian pair, at
/// sample points sharing two values of `x₁₂` so the inner multiplier is tabulated
/// only twice.
pub fn r_forms_residual(engine: &Engine, u: C64, s1: C64, s2: C64, grid: Grid) -> Result<f64> {
    let h = grid.spacing();
    let mut pts = Vec::new();
    for d in [6i64, -9] {
        for k in [-12i64, -4, 4, 12] {
            pts.push([k + d, k]);
        }
    }
    let op = r_spin(u, s1, s2);
    let s = &panel(2)[1];
    let g = engine.apply_grid(&op, &grid.sample(s)?)?;
    let tree = apply_r_integral(engine, u, s1, s2, s)?;
    let mut ctx = EvalCtx::new(true);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    let at = |k: i64| (k + grid.points as i64 / 2) as usize;
    for [i, j] in pts {
        let x = [real(-grid.l + at(i) as f64 * h), real(-grid.l + at(j) as f64 * h)];
        a.push(ctx.eval_checked(&tree, &x)?);
        b.push(g.data[at(i) * grid.points + at(j)]);
    }
    Ok(relative_l2(&a, &b))
}

/// `max_Φ ‖A Φ − B Φ‖ / ‖A Φ‖` over the panel, both sides applied on the grid.
pub fn grid_residual(engine: &Engine, lhs: &FDOperator, rhs: &FDOperator, n: usize, grid: Grid) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in panel(n) {
        let g = grid.sample(&s)?;
        worst = worst.max(state_distance(&engine.apply_grid(lhs, &g)?, &engine.apply_grid(rhs, &g)?)?);
    }
    Ok(worst)
}

/// `R` built under ω ⇄ ω′ against `R`, on the grid.
pub fn swap_invariance_residual(engine: &Engine, u: C64, s1: C64, s2: C64, grid: Grid) -> Result<f64> {
    let ev = engine.evaluator();
    let swapped = Engine::new(std::sync::Arc::new(GammaEvaluator::new(
        swap_omegas(ev.params()),
        ev.numerics().clone(),
    )?));
    let op = r_spin(u, s1, s2);
    let mut worst: f64 = 0.0;
    for s in panel(2) {
        let g = grid.sample(&s)?;
        worst = worst.max(state_distance(&engine.apply_grid(&op, &g)?, &swapped.apply_grid(&op, &g)?)?);
    }
    Ok(worst)
}

/// Residuals of the weak form `⟨Ψ, T·A_{ij}Φ⟩ = ⟨B_{ij}ᵀΨ, T Φ⟩` for each entry,
/// i.e. of `T A = B T` with `T` applied on the grid and `A`, `B` on closed forms.
pub fn weak_matrix_residuals(
    engine: &Engine,
    t: &FDOperator,
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    grid: Grid,
) -> Result<[f64; 4]> {
    let tests = panel_pairs();
    let mut out = [0.0; 4];
    for phi in panel(2).iter().take(2) {
        let t_phi = engine.apply_grid(t, &grid.sample(phi)?)?;
        for (k, r) in out.iter_mut().enumerate() {
            let (i, j) = (k / 2, k % 2);
            let t_a_phi = engine.apply_grid(t, &grid.sample(&engine.apply(a.get(i, j), phi)?)?)?;
            let bt = b.get(i, j).transpose();
            let (mut lhs, mut rhs) = (Vec::new(), Vec::new());
            for psi in &tests {
                lhs.push(pair_with(psi, &t_a_phi)?);
                rhs.push(pair_with(&engine.apply(&bt, psi)?, &t_phi)?);
            }
            *r = f64::max(*r, relative_l2(&lhs, &rhs));
        }
    }
    Ok(out)
}

/// The nine products of panel Gaussians on two coordinates.
fn panel_pairs() -> Vec<State> {
    let mut out = Vec::new();
    for (a1, b1) in crate::check::PANEL {
        for (a2, b2) in crate::check::PANEL {
            out.push(
                make_gaussian(&[real(a1), real(a2)], &[C64::new(b1.0, b1.1), C64::new(b2.0, b2.1)])
                    .expect("panel exponents decay"),
            );
        }
    }
    out
}

/// `R(u−v) L₁(u) L₂(v) = L₁(v) L₂(u) R(u−v)` (or its tilde version), per entry,
/// with `L₁` in π_{s₁} and `L₂` in π_{s₂} before `R`, and the spins exchanged after.
pub fn rll_residuals(
    engine: &Engine,
    p: &ModularParams,
    (u, v): (C64, C64),
    (s1, s2): (C64, C64),
    tilde: bool,
    grid: Grid,
) -> Result<[f64; 4]> {
    let lp = if tilde { swap_omegas(p) } else { *p };
    let l = |coord: usize, w: C64, s: C64| build_l_spin(&SpinParams::new(s, lp), coord, w);
    let a = matmul(&l(0, u, s1)?, &l(1, v, s2)?);
    let b = matmul(&l(0, v, s2)?, &l(1, u, s1)?);
    weak_matrix_residuals(engine, &r_spin(u - v, s1, s2), &a, &b, grid)
}

/// The RLL relation with the tuple form of `R` and `L`:
/// `R(𝐮) L₁(u₁,u₂) L₂(v₁,v₂) = L₁(v₁,v₂) L₂(u₁,u₂) R(𝐮)`.
pub fn rll_tuple_residuals(engine: &Engine, p: &ModularParams, t: &SpectralTuple, grid: Grid) -> Result<[f64; 4]> {
    let a = matmul(&build_l(p, 0, t.u1, t.u2)?, &build_l(p, 1, t.v1, t.v2)?);
    let b = matmul(&build_l(p, 0, t.v1, t.v2)?, &build_l(p, 1, t.u1, t.u2)?);
    weak_matrix_residuals(engine, &build_r(t), &a, &b, grid)
}

/// `S₁ L₁(u₁,u₂) = L₁(u₂,u₁) S₁` and `S₃ L₂(v₁,v₂) = L₂(v₂,v₁) S₃`, per entry.
pub fn s_intertwining_residuals(engine: &Engine, p: &ModularParams, t: &SpectralTuple) -> Result<[[f64; 4]; 2]> {
    use crate::check::matrix_entry_residuals;
    let s1 = build_s(1, t)?;
    let s3 = build_s(3, t)?;
    let one = matrix_entry_residuals(
        engine,
        &build_l(p, 0, t.u1, t.u2)?.left_op(&s1),
        &build_l(p, 0, t.u2, t.u1)?.right_op(&s1),
        2,
    )?;
    let three = matrix_entry_residuals(
        engine,
        &build_l(p, 1, t.v1, t.v2)?.left_op(&s3),
        &build_l(p, 1, t.v2, t.v1)?.right_op(&s3),
        2,
    )?;
    Ok([one, three])
}

/// `S₂ L₁(u₁,u₂) L₂(v₁,v₂) = L₁(v₂,u₂) L₂(v₁,u₁) S₂`, per entry.
pub fn sll_residuals(engine: &Engine, p: &ModularParams, t: &SpectralTuple) -> Result<[f64; 4]> {
    use crate::check::matrix_entry_residuals;
    let s2 = build_s(2, t)?;
    let lhs = matmul(&build_l(p, 0, t.u1, t.u2)?, &build_l(p, 1, t.v1, t.v2)?).left_op(&s2);
    let rhs = matmul(&build_l(p, 0, t.v2, t.u2)?, &build_l(p, 1, t.v1, t.u1)?).right_op(&s2);
    matrix_entry_residuals(engine, &lhs, &rhs, 2)
}

/// Which Coxeter relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coxeter {
    /// `s₁s₂s₁ = s₂s₁s₂`.
    First,
    /// `s₂s₃s₂ = s₃s₂s₃`.
    Third,
}

/// Both sides of a Coxeter relation applied on the grid.
pub fn coxeter_residual(engine: &Engine, which: Coxeter, t: &SpectralTuple, grid: Grid) -> Result<f64> {
    let (lhs, rhs) = match which {
        Coxeter::First => (s_word(&[1, 2, 1], t)?, s_word(&[2, 1, 2], t)?),
        Coxeter::Third => (s_word(&[2, 3, 2], t)?, s_word(&[3, 2, 3], t)?),
    };
    grid_residual(engine, &lhs, &rhs, 2, grid)
}

/// `D_u(p_k) D_{u+v}(x₁₂) D_v(p_k) = D_v(x₁₂) D_{u+v}(p_k) D_u(x₁₂)` for `k = coord`.
pub fn wsw_residual(engine: &Engine, coord: usize, u: C64, v: C64, grid: Grid) -> Result<f64> {
    let lhs = compose(&[d_of_p(u, coord), d_of_x(u + v, x12()), d_of_p(v, coord)]);
    let rhs = compose(&[d_of_x(v, x12()), d_of_p(u + v, coord), d_of_x(u, x12())]);
    grid_residual(engine, &lhs, &rhs, 2, grid)
}

/// `D_u(p) D_{u+v}(x) D_v(p) = D_v(x) D_{u+v}(p) D_u(x)` on one coordinate.
pub fn star_triangle_op_residual(engine: &Engine, u: C64, v: C64, grid: Grid) -> Result<f64> {
    let x = LinearForm::coord(0);
    let lhs = compose(&[d_of_p(u, 0), d_of_x(u + v, x.clone()), d_of_p(v, 0)]);
    let rhs = compose(&[d_of_x(v, x.clone()), d_of_p(u + v, 0), d_of_x(u, x)]);
    grid_residual(engine, &lhs, &rhs, 1, grid)
}

/// Relative mismatch of the integral star-triangle relation at one triple.
pub fn star_triangle_int_residual(engine: &Engine, a: C64, b: C64, zs: [C64; 3]) -> Result<f64> {
    let (lhs, rhs) = star_triangle_sides(engine.evaluator(), a, b, zs, engine.tol())?;
    Ok((lhs - rhs).norm() / rhs.norm())
}

fn require_real(what: &str, z: C64) -> Result<()> {
    if z.im != 0.0 {
        return Err(Error::Domain(format!(
            "{what} = {z} is not real; the factors of the universal R-matrix grow on the grid"
        )));
    }
    Ok(())
}

/// `ℛ = P₁₂ X(x₁₂) P₂(p₂) P₁(p₁) X′(x₁₂)` with
/// `X′ = e^{−iπ(s₁+s₂)x₁₂}/γ(x₁₂−σ)`, `P₁ = e^{2πidp₁}/γ(−p₁−d)`,
/// `P₂ = e^{2πidp₂}/γ(p₂+d)`, `X = e^{−iπ(s₁+s₂)x₁₂}/γ(−x₁₂+σ)`,
/// where `σ = (s₁+s₂)/2` and `d = (s₂−s₁)/2`. Grid backend only.
pub fn universal_r(s1: C64, s2: C64) -> Result<FDOperator> {
    require_real("s1", s1)?;
    require_real("s2", s2)?;
    let (sg, d) = (0.5 * (s1 + s2), 0.5 * (s2 - s1));
    Ok(compose(&[
        FDOperator::permute(0, 1),
        inv_gamma_of_x(x12(), -sg, -1.0, sg),
        inv_gamma_of_p(1, d, 1.0, d),
        inv_gamma_of_p(0, d, -1.0, -d),
        inv_gamma_of_x(x12(), -sg, 1.0, -sg),
    ]))
}

/// `ℛ(u) = e^{−2πiup₁} ℛ e^{2πiup₁}`.
pub fn yangbaxterize(r: &FDOperator, u: C64) -> Result<FDOperator> {
    require_real("u", u)?;
    Ok(compose(&[FDOperator::shift(0, -u), r.clone(), FDOperator::shift(0, u)]))
}

/// `[ℛ, p₁+p₂] = 0`, tested as commutation with the joint translation by
/// `shift` (rounded to a whole number of grid steps, where the spectral shift is exact).
pub fn translation_residual(engine: &Engine, s1: C64, s2: C64, shift: f64, grid: Grid) -> Result<f64> {
    let a = real((shift / grid.spacing()).round() * grid.spacing());
    let t = FDOperator::shift(0, a).then_after(&FDOperator::shift(1, a));
    let r = universal_r(s1, s2)?;
    grid_residual(engine, &r.then_after(&t), &t.then_after(&r), 2, grid)
}

/// `e^{4πi(u+v)²} e^{2πivp₁} ℝ(u+v) e^{−2πivp₁}` against `ℛ(u)`.
///
/// The limit is `e^{−2πiup₁} ℛ e^{2πiup₁}` itself; the extra `e^{4πiu²}` in the
/// displayed expanded form of `ℛ(u)` is not part of it.
pub fn red_residual(engine: &Engine, u: f64, v: f64, s1: C64, s2: C64, grid: Grid) -> Result<f64> {
    let phase = (C64::new(0.0, 4.0 * std::f64::consts::PI) * (u + v) * (u + v)).exp();
    let lhs = compose(&[
        FDOperator::shift(0, real(v)),
        big_r(real(u + v), s1, s2),
        FDOperator::shift(0, real(-v)),
    ])
    .scale(phase);
    let rhs = yangbaxterize(&universal_r(s1, s2)?, real(u))?;
    let g = grid.sample(&panel(2)[0])?;
    state_distance(&engine.apply_grid(&lhs, &g)?, &engine.apply_grid(&rhs, &g)?)
}

/// [`red_residual`] over a list of `v`.
pub fn red_sweep(engine: &Engine, u: f64, vs: &[f64], s1: C64, s2: C64, grid: Grid) -> Result<Vec<f64>> {
    vs.iter().map(|v| red_residual(engine, u, *v, s1, s2, grid)).collect()
}

/// `ℝ₂₃(v) ℝ₁₃(u) ℝ₁₂(u−v) = ℝ₁₂(u−v) ℝ₁₃(u) ℝ₂₃(v)` on a three-coordinate grid,
/// with `ℝ_ij` carrying the spins of coordinates `i`, `j`.
pub fn yang_baxter_residual(engine: &Engine, u: f64, v: f64, spins: [f64; 3], grid: Grid) -> Result<f64> {
    let r = |w: f64, i: usize, j: usize| on_pair(&big_r(real(w), real(spins[i]), real(spins[j])), i, j);
    let (r12, r13, r23) = (r(u - v, 0, 1), r(u, 0, 2), r(v, 1, 2));
    let lhs = compose(&[r23.clone(), r13.clone(), r12.clone()]);
    let rhs = compose(&[r12, r13, r23]);
    three_site_residual(engine, &lhs, &rhs, grid)
}

/// `ℛ₂₃ℛ₁₃ℛ₁₂ = ℛ₁₂ℛ₁₃ℛ₂₃` on a three-coordinate grid.
pub fn yb0_residual(engine: &Engine, spins: [f64; 3], grid: Grid) -> Result<f64> {
    let r = |i: usize, j: usize| -> Result<FDOperator> {
        Ok(on_pair(&universal_r(real(spins[i]), real(spins[j]))?, i, j))
    };
    let (r12, r13, r23) = (r(0, 1)?, r(0, 2)?, r(1, 2)?);
    let lhs = compose(&[r23.clone(), r13.clone(), r12.clone()]);
    let rhs = compose(&[r12, r13, r23]);
    three_site_residual(engine, &lhs, &rhs, grid)
}

/// `ℝ₂₃(v) ℛ₁₃(u) ℛ₁₂(u−v) = ℛ₁₂(u−v) ℛ₁₃(u) ℝ₂₃(v)` on a three-coordinate grid.
pub fn rrr_residual(engine: &Engine, u: f64, v: f64, spins: [f64; 3], grid: Grid) -> Result<f64> {
    let cal = |w: f64, i: usize, j: usize| -> Result<FDOperator> {
        Ok(on_pair(&yangbaxterize(&universal_r(real(spins[i]), real(spins[j]))?, real(w))?, i, j))
    };
    let (r12, r13) = (cal(u - v, 0, 1)?, cal(u, 0, 2)?);
    let r23 = on_pair(&big_r(real(v), real(spins[1]), real(spins[2])), 1, 2);
    let lhs = compose(&[r23.clone(), r13.clone(), r12.clone()]);
    let rhs = compose(&[r12, r13, r23]);
    three_site_residual(engine, &lhs, &rhs, grid)
}

fn three_site_residual(engine: &Engine, lhs: &FDOperator, rhs: &FDOperator, grid: Grid) -> Result<f64> {
    let g = grid.sample(&panel(3)[0])?;
    state_distance(&engine.apply_grid(lhs, &g)?, &engine.apply_grid(rhs, &g)?)
}

/// Which degenerate L-operator enters an `ℛLL`-type relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Degenerate {
    /// `ℛ(u−v) ℓ₁(u) L₂(v) = L₂(v) ℓ₁(u) ℛ(u−v)`.
    EllFirst,
    /// `ℛ(u−v) L₁(u) ℓ̄₂(v) = ℓ̄₂(v) L₁(u) ℛ(u−v)`.
    EllBarSecond,
}

/// Weak-form residuals of the `ℛLL` relations, per entry.
pub fn r_degenerate_residuals(
    engine: &Engine,
    p: &ModularParams,
    which: Degenerate,
    (u, v): (f64, f64),
    (s1, s2): (f64, f64),
    grid: Grid,
) -> Result<[f64; 4]> {
    let sp1 = SpinParams::real(s1, *p);
    let sp2 = SpinParams::real(s2, *p);
    let (first, second) = match which {
        Degenerate::EllFirst => (build_ell(&sp1, 0, real(u))?, build_l_spin(&sp2, 1, real(v))?),
        Degenerate::EllBarSecond => (build_l_spin(&sp1, 0, real(u))?, build_ellbar(&sp2, 1, real(v))?),
    };
    let r = yangbaxterize(&universal_r(real(s1), real(s2))?, real(u - v))?;
    weak_matrix_residuals(engine, &r, &matmul(&first, &second), &matmul(&second, &first), grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::decreasing_to_floor;
    use crate::params::{make_params, NumericsConfig};
    use std::sync::Arc;

    fn params() -> ModularParams {
        make_params(0.8).unwrap()
    }

    fn engine() -> Engine {
        Engine::new(Arc::new(GammaEvaluator::new(params(), NumericsConfig::default()).unwrap()))
    }

    fn tuple() -> SpectralTuple {
        SpectralTuple::from_spins(&params(), real(0.3), real(-0.2), real(0.4), real(0.7))
    }

    #[test]
    fn s_action_is_an_involution() {
        let t = tuple();
        for i in 1..=3 {
            assert_eq!(s_action(i, &s_action(i, &t).unwrap()).unwrap(), t);
        }
        assert!(s_action(4, &t).is_err());
        let s1 = s_action(1, &t).unwrap();
        assert_eq!((s1.u2, s1.u1, s1.v2, s1.v1), (t.u1, t.u2, t.v2, t.v1));
    }

    #[test]
    fn s1_is_identity_when_u1_equals_u2() {
        let t = SpectralTuple::new(real(0.3), real(0.3), real(0.1), real(0.0));
        assert_eq!(build_s(1, &t).unwrap(), FDOperator::identity());
    }

    #[test]
    fn word_and_explicit_product_agree() {
        let t = tuple();
        assert_eq!(canonical(&r_word(&t).unwrap()), canonical(&build_r(&t)));
        assert_ne!(r_word(&t).unwrap(), build_r(&t));
    }

    #[test]
    fn spin_form_matches_tuple_form() {
        let e = engine();
        let t = tuple();
        let r = grid_residual(&e, &build_r(&t), &r_spin(real(0.5), real(0.4), real(0.7)), 2, Grid::new(6.0, 64)).unwrap();
        assert!(r < 1e-13, "{r}");
    }

    #[test]
    fn trivial_point_is_identity() {
        let e = engine();
        let s = real(0.4);
        let r = grid_residual(&e, &r_spin(real(0.0), s, s), &FDOperator::identity(), 2, Grid::new(6.0, 64)).unwrap();
        assert!(r < 1e-12, "{r}");
    }

    #[test]
    fn integral_form_matches_product_form() {
        let r = r_forms_residual(&engine(), real(0.5), real(0.4), real(0.7), Grid::new(8.0, 256)).unwrap();
        assert!(r < 1e-6, "{r}");
    }

    #[test]
    fn rll_holds_in_weak_form() {
        let e = engine();
        let p = params();
        let pts = ((real(0.3), real(-0.2)), (real(0.4), real(0.7)));
        for tilde in [false, true] {
            for r in rll_residuals(&e, &p, pts.0, pts.1, tilde, Grid::new(6.0, 128)).unwrap() {
                assert!(r < 1e-4, "tilde {tilde}: {r}");
            }
        }
    }

    #[test]
    fn printed_spin_form_fails_rll() {
        let e = engine();
        let p = params();
        let sp = |s: f64| SpinParams::real(s, p);
        let l = |c: usize, w: f64, s: f64| build_l_spin(&sp(s), c, real(w)).unwrap();
        let a = matmul(&l(0, 0.3, 0.4), &l(1, -0.2, 0.7));
        let b = matmul(&l(0, -0.2, 0.7), &l(1, 0.3, 0.4));
        let r = weak_matrix_residuals(&e, &r_spin_printed(real(0.5), real(0.4), real(0.7)), &a, &b, Grid::new(6.0, 128))
            .unwrap();
        assert!(r.iter().fold(0.0f64, |m, x| m.max(*x)) > 1e-2, "{r:?}");
    }

    #[test]
    fn sll_and_s_intertwining() {
        let e = engine();
        let p = params();
        for r in sll_residuals(&e, &p, &tuple()).unwrap() {
            assert!(r < 1e-5, "{r}");
        }
        for r in s_intertwining_residuals(&e, &p, &tuple()).unwrap().concat() {
            assert!(r < 1e-5, "{r}");
        }
    }

    #[test]
    fn coxeter_and_star_triangle() {
        let e = engine();
        let g2 = Grid::new(6.0, 128);
        assert!(coxeter_residual(&e, Coxeter::First, &tuple(), g2).unwrap() < 1e-5);
        assert!(coxeter_residual(&e, Coxeter::Third, &tuple(), g2).unwrap() < 1e-5);
        assert!(wsw_residual(&e, 0, real(0.3), real(0.25), g2).unwrap() < 1e-5);
        assert!(wsw_residual(&e, 1, real(0.3), real(0.25), g2).unwrap() < 1e-5);
        assert!(star_triangle_op_residual(&e, real(0.3), real(0.25), Grid::new(8.0, 256)).unwrap() < 1e-5);
    }

    #[test]
    fn universal_r_rejects_complex_spins() {
        assert!(matches!(universal_r(C64::new(0.4, 0.1), real(0.2)), Err(Error::Domain(_))));
    }

    #[test]
    fn universal_r_translation_invariance() {
        let r = translation_residual(&engine(), real(0.4), real(0.7), 0.3, Grid::new(6.0, 128)).unwrap();
        assert!(r < 1e-8, "{r}");
    }

    #[test]
    fn red_sweep_decreases() {
        let r = red_sweep(&engine(), 0.3, &[1.0, 2.0, 4.0], real(0.4), real(0.7), Grid::new(7.0, 256)).unwrap();
        assert!(decreasing_to_floor(&r), "{r:?}");
    }

    #[test]
    fn yang_baxter_coarse() {
        let r = yang_baxter_residual(&engine(), 0.3, -0.2, [0.4, 0.7, 0.25], Grid::new(3.0, 32)).unwrap();
        assert!(r < 1e-2, "{r}");
    }
}
