//! The representation π_s of the modular double by finite-difference operators,
//! its Casimir, and the intertwiner `W = D_{−s}(p)` between π_s and π_{−s}.

use std::f64::consts::PI;

use crate::check::{op_residual, panel, sample_points};
use crate::error::{Error, Result};
use crate::opalg::{compose, d_of_p, Engine, FDOperator};
use crate::params::{swap_omegas, ModularParams, C64, I};
use crate::states::{relative_l2, to_grid, State};

/// A spin together with the parametrization it lives in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinParams {
    pub s: C64,
    pub params: ModularParams,
}

impl SpinParams {
    pub fn new(s: C64, params: ModularParams) -> SpinParams {
        SpinParams { s, params }
    }

    pub fn real(s: f64, params: ModularParams) -> SpinParams {
        SpinParams::new(C64::new(s, 0.0), params)
    }

    pub fn negated(&self) -> SpinParams {
        SpinParams::new(-self.s, self.params)
    }

    pub fn swapped(&self) -> SpinParams {
        SpinParams::new(self.s, swap_omegas(&self.params))
    }
}

/// `K`, `e`, `f` of π_s acting on one coordinate, with `E = e/(q − q⁻¹)`, `F = f/(q − q⁻¹)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Generators {
    pub q: C64,
    pub k: FDOperator,
    pub k_inv: FDOperator,
    pub e: FDOperator,
    pub f: FDOperator,
    pub big_e: FDOperator,
    pub big_f: FDOperator,
}

impl Generators {
    pub fn k_power(&self, n: i32) -> FDOperator {
        let base = if n >= 0 { &self.k } else { &self.k_inv };
        compose(&vec![base.clone(); n.unsigned_abs() as usize])
    }
}

/// `K = e^{−(iπ/2ω)p}`, a shift of `x` by `−1/(4ω) = ω′`, and
/// `e = e^{iπx/ω}[c K − c⁻¹ K⁻¹]`, `f = e^{−iπx/ω}[c K⁻¹ − c⁻¹ K]`, `c = e^{(iπ/2ω)(s+ω″)}`.
pub fn generators(sp: &SpinParams, coord: usize) -> Result<Generators> {
    let p = &sp.params;
    let q = p.q;
    let qq = q - 1.0 / q;
    if qq.norm() < 1e-12 {
        return Err(Error::Domain(format!("degenerate q = {q}: q − q⁻¹ vanishes")));
    }
    let step = -1.0 / (4.0 * p.omega);
    let k = FDOperator::shift(coord, step);
    let k_inv = FDOperator::shift(coord, -step);
    let c = (I * PI / (2.0 * p.omega) * (sp.s + p.omega_dp)).exp();
    let ex = I * PI / p.omega;
    let e = FDOperator::exp_mul(coord, ex).then_after(&k.scale(c).sub(&k_inv.scale(1.0 / c)));
    let f = FDOperator::exp_mul(coord, -ex).then_after(&k_inv.scale(c).sub(&k.scale(1.0 / c)));
    Ok(Generators {
        q,
        big_e: e.scale(1.0 / qq),
        big_f: f.scale(1.0 / qq),
        k,
        k_inv,
        e,
        f,
    })
}

/// The same formulas with ω ⇄ ω′.
pub fn tilde_generators(sp: &SpinParams, coord: usize) -> Result<Generators> {
    generators(&sp.swapped(), coord)
}

/// `C = 2 − (q − q⁻¹)² F E − q K² − q⁻¹ K⁻²`.
///
/// The sign of the `FE` term is the one for which `C` is central with eigenvalue
/// `4cos²(πs/2ω)`; with `+(q − q⁻¹)² F E` the `K^{±2}` terms do not cancel.
pub fn casimir(g: &Generators) -> FDOperator {
    let q = g.q;
    FDOperator::scalar(C64::new(2.0, 0.0))
        .sub(&g.f.then_after(&g.e))
        .sub(&g.k_power(2).scale(q))
        .sub(&g.k_power(-2).scale(1.0 / q))
}

/// `4 cos²(πs/2ω)`.
pub fn casimir_eigenvalue(sp: &SpinParams) -> C64 {
    let c = (PI * sp.s / (2.0 * sp.params.omega)).cos();
    4.0 * c * c
}

pub fn casimir_apply(engine: &Engine, sp: &SpinParams, s: &State) -> Result<State> {
    engine.apply(&casimir(&generators(sp, 0)?), s)
}

/// Relative residual of `CΦ = λΦ` (or its tilde version) over the panel.
pub fn casimir_residual(engine: &Engine, sp: &SpinParams, tilde: bool) -> Result<f64> {
    let sp = if tilde { sp.swapped() } else { *sp };
    let c = casimir(&generators(&sp, 0)?);
    op_residual(engine, &c, &FDOperator::scalar(casimir_eigenvalue(&sp)), 1)
}

/// Residuals of the defining relations of `U_q(sl₂)` for one set of generators.
pub fn qsl2_residuals(engine: &Engine, g: &Generators) -> Result<Vec<(String, f64)>> {
    let q = g.q;
    let comm = g.big_e.then_after(&g.big_f).sub(&g.big_f.then_after(&g.big_e));
    let rhs = g.k_power(2).sub(&g.k_power(-2)).scale(1.0 / (q - 1.0 / q));
    Ok(vec![
        ("[E,F]".into(), op_residual(engine, &comm, &rhs, 1)?),
        (
            "KE=qEK".into(),
            op_residual(engine, &g.k.then_after(&g.big_e), &g.big_e.then_after(&g.k).scale(q), 1)?,
        ),
        (
            "KF=q^-1FK".into(),
            op_residual(engine, &g.k.then_after(&g.big_f), &g.big_f.then_after(&g.k).scale(1.0 / q), 1)?,
        ),
    ])
}

/// Commutation of `E, F` with `Ẽ, F̃`, and anticommutation of `K` with `Ẽ, F̃`
/// and of `K̃` with `E, F`.
pub fn cross_residuals(engine: &Engine, sp: &SpinParams) -> Result<Vec<(String, f64)>> {
    let g = generators(sp, 0)?;
    let t = tilde_generators(sp, 0)?;
    let commute = |a: &FDOperator, b: &FDOperator| op_residual(engine, &a.then_after(b), &b.then_after(a), 1);
    let anti = |a: &FDOperator, b: &FDOperator| {
        op_residual(engine, &a.then_after(b), &b.then_after(a).scale(C64::new(-1.0, 0.0)), 1)
    };
    Ok(vec![
        ("[E,Ẽ]".into(), commute(&g.big_e, &t.big_e)?),
        ("[E,F̃]".into(), commute(&g.big_e, &t.big_f)?),
        ("[F,Ẽ]".into(), commute(&g.big_f, &t.big_e)?),
        ("[F,F̃]".into(), commute(&g.big_f, &t.big_f)?),
        ("{K,Ẽ}".into(), anti(&g.k, &t.big_e)?),
        ("{K,F̃}".into(), anti(&g.k, &t.big_f)?),
        ("{K̃,E}".into(), anti(&t.k, &g.big_e)?),
        ("{K̃,F}".into(), anti(&t.k, &g.big_f)?),
    ])
}

/// `W = D_{−s}(p)`.
pub fn intertwiner_w(sp: &SpinParams, coord: usize) -> FDOperator {
    d_of_p(-sp.s, coord)
}

/// `W G_s = G_{−s} W` for `G ∈ {K, E, F}` and their tilde versions.
pub fn intertwining_residuals(engine: &Engine, sp: &SpinParams) -> Result<Vec<(String, f64)>> {
    let w = intertwiner_w(sp, 0);
    let mut out = Vec::new();
    for (tag, plus, minus) in [
        ("", generators(sp, 0)?, generators(&sp.negated(), 0)?),
        ("~", tilde_generators(sp, 0)?, tilde_generators(&sp.negated(), 0)?),
    ] {
        for (name, a, b) in [("K", &plus.k, &minus.k), ("E", &plus.big_e, &minus.big_e), ("F", &plus.big_f, &minus.big_f)] {
            let r = op_residual(engine, &w.then_after(a), &b.then_after(&w), 1)?;
            out.push((format!("W{name}{tag}"), r));
        }
    }
    Ok(out)
}

/// Kernel (tree) and spectral (grid) realizations of `W` compared on grid samples.
pub fn w_backend_residual(engine: &Engine, sp: &SpinParams) -> Result<f64> {
    let w = intertwiner_w(sp, 0);
    let (l, n) = (6.0, 256);
    let pts = sample_points(1, 25, 3.0);
    let mut worst: f64 = 0.0;
    for s in panel(1) {
        let spec = engine.apply_grid(&w, &to_grid(&s, 1, l, n)?)?;
        let tree = engine.apply(&w, &s)?;
        // Compare at the grid nodes that coincide with the sample lattice spacing.
        let h = 2.0 * l / n as f64;
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for x in &pts {
            let idx = ((x[0].re + l) / h).round() as usize;
            let xg = -l + idx as f64 * h;
            a.push(spec.data[idx]);
            b.push(tree.eval(&[C64::new(xg, 0.0)])?);
        }
        worst = worst.max(relative_l2(&a, &b));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{make_params, NumericsConfig};
    use crate::specfun::GammaEvaluator;
    use std::sync::Arc;

    fn engine() -> Engine {
        let p = make_params(0.8).unwrap();
        Engine::new(Arc::new(GammaEvaluator::new(p, NumericsConfig::default()).unwrap()))
    }

    fn sp(s: f64) -> SpinParams {
        SpinParams::real(s, make_params(0.8).unwrap())
    }

    #[test]
    fn k_is_shift_by_omega_prime() {
        let g = generators(&sp(0.4), 0).unwrap();
        let s = crate::states::make_gaussian(&[C64::new(-3.0, 0.0)], &[C64::new(0.0, 0.0)]).unwrap();
        let x = [C64::new(0.3, 0.0)];
        let y = x[0] + C64::new(0.0, 0.625);
        let v = engine().apply(&g.k, &s).unwrap().eval(&x).unwrap();
        assert!((v - (-3.0 * y * y).exp()).norm() < 1e-13);
    }

    #[test]
    fn qsl2_holds() {
        let e = engine();
        for s in [0.0, 0.4, -0.4] {
            for (name, r) in qsl2_residuals(&e, &generators(&sp(s), 0).unwrap()).unwrap() {
                assert!(r < 1e-10, "{name} at s={s}: {r}");
            }
        }
    }

    #[test]
    fn casimir_is_scalar() {
        let e = engine();
        for s in [0.0, 0.4, -0.4] {
            assert!(casimir_residual(&e, &sp(s), false).unwrap() < 1e-10);
            assert!(casimir_residual(&e, &sp(s), true).unwrap() < 1e-10);
        }
        assert!((casimir_eigenvalue(&sp(0.0)) - 4.0).norm() < 1e-15);
    }

    #[test]
    fn cross_relations() {
        let e = engine();
        for (name, r) in cross_residuals(&e, &sp(0.4)).unwrap() {
            assert!(r < 1e-10, "{name}: {r}");
        }
    }

    #[test]
    fn tilde_of_tilde_is_original() {
        let s = sp(0.4);
        assert_eq!(tilde_generators(&s.swapped(), 0).unwrap(), generators(&s, 0).unwrap());
    }

    #[test]
    fn intertwiner_relations() {
        let e = engine();
        for (name, r) in intertwining_residuals(&e, &sp(0.4)).unwrap() {
            assert!(r < 1e-6, "{name}: {r}");
        }
        assert!(w_backend_residual(&e, &sp(0.4)).unwrap() < 1e-6);
    }

    #[test]
    fn zero_spin_intertwiner_is_identity() {
        assert_eq!(intertwiner_w(&sp(0.0), 0), FDOperator::identity());
    }
}
