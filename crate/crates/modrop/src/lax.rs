//! L-operators: the full operator, its factorized form, the reduced operators `L±`,
//! and the triangular degenerations `ℓ`, `ℓ̄`.
//!
//! Matrices act on one coordinate `coord`; two-site products are ordinary
//! [`matmul`]s of matrices acting on different coordinates.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::check::{matrix_entry_residuals, matrix_stacked_residual, op_residual};
use crate::error::Result;
use crate::modouble::{generators, SpinParams};
use crate::opalg::{d_of_p, d_of_x, fresnel, matmul, Engine, FDOperator, OperatorMatrix};
use crate::params::{swap_omegas, ModularParams, C64, I};
use crate::states::LinearForm;

/// The ordered parameter set `𝐮 = (u₂, u₁, v₂, v₁)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralTuple {
    pub u2: C64,
    pub u1: C64,
    pub v2: C64,
    pub v1: C64,
}

impl SpectralTuple {
    pub fn new(u2: C64, u1: C64, v2: C64, v1: C64) -> SpectralTuple {
        SpectralTuple { u2, u1, v2, v1 }
    }

    /// From spectral parameters `u`, `v` and spins `s₁`, `s₂`.
    pub fn from_spins(p: &ModularParams, u: C64, v: C64, s1: C64, s2: C64) -> SpectralTuple {
        let (u1, u2) = spin_to_u(p, u, s1);
        let (v1, v2) = spin_to_u(p, v, s2);
        SpectralTuple { u2, u1, v2, v1 }
    }

    /// Back to `(u, v, s₁, s₂)`.
    pub fn to_spins(&self, p: &ModularParams) -> (C64, C64, C64, C64) {
        let (u, s1) = u_to_spin(p, self.u1, self.u2);
        let (v, s2) = u_to_spin(p, self.v1, self.v2);
        (u, v, s1, s2)
    }

    pub fn as_array(&self) -> [C64; 4] {
        [self.u2, self.u1, self.v2, self.v1]
    }

    pub fn from_array(a: [C64; 4]) -> SpectralTuple {
        SpectralTuple::new(a[0], a[1], a[2], a[3])
    }
}

/// `u₁ = u + s/2 + ω/2 − ω′/2`, `u₂ = u − s/2 + ω/2 − ω′/2`.
pub fn spin_to_u(p: &ModularParams, u: C64, s: C64) -> (C64, C64) {
    let base = u + 0.5 * (p.omega - p.omega_prime);
    (base + 0.5 * s, base - 0.5 * s)
}

/// Inverse of [`spin_to_u`]: `(u, s)` from `(u₁, u₂)`.
pub fn u_to_spin(p: &ModularParams, u1: C64, u2: C64) -> (C64, C64) {
    (0.5 * (u1 + u2) - 0.5 * (p.omega - p.omega_prime), u1 - u2)
}

fn s(c: C64) -> FDOperator {
    FDOperator::scalar(c)
}

/// `e^{±iπx/ω}` on `coord`.
fn exp_x(p: &ModularParams, coord: usize, sign: f64) -> FDOperator {
    FDOperator::exp_mul(coord, sign * I * PI / p.omega)
}

/// `e^{(iπ/2ω)z}`.
fn half_phase(p: &ModularParams, z: C64) -> C64 {
    (I * PI / (2.0 * p.omega) * z).exp()
}

/// `L(u)` assembled from the generators of π_s, with `(u, s)` recovered from `(u₁, u₂)`.
pub fn build_l(p: &ModularParams, coord: usize, u1: C64, u2: C64) -> Result<OperatorMatrix> {
    let (u, spin) = u_to_spin(p, u1, u2);
    let g = generators(&SpinParams::new(spin, *p), coord)?;
    let z = (I * PI / p.omega * u).exp();
    Ok(OperatorMatrix::new(
        g.k.scale(z).sub(&g.k_inv.scale(1.0 / z)),
        g.f.clone(),
        g.e.clone(),
        g.k_inv.scale(z).sub(&g.k.scale(1.0 / z)),
    ))
}

/// `L̃`: the same construction with ω ⇄ ω′.
pub fn build_l_tilde(p: &ModularParams, coord: usize, u1: C64, u2: C64) -> Result<OperatorMatrix> {
    build_l(&swap_omegas(p), coord, u1, u2)
}

/// `M_u(x) = [[U, −U⁻¹], [−U⁻¹e^{iπx/ω}, U e^{iπx/ω}]]`, `U = e^{(iπ/2ω)u}`.
pub fn build_m(p: &ModularParams, coord: usize, u: C64) -> OperatorMatrix {
    let uu = half_phase(p, u);
    let ex = exp_x(p, coord, 1.0);
    OperatorMatrix::new(s(uu), s(-1.0 / uu), ex.scale(-1.0 / uu), ex.scale(uu))
}

/// `N_u(x) = [[−U, U⁻¹e^{−iπx/ω}], [−U⁻¹, U e^{−iπx/ω}]]`.
pub fn build_n(p: &ModularParams, coord: usize, u: C64) -> OperatorMatrix {
    let uu = half_phase(p, u);
    let ex = exp_x(p, coord, -1.0);
    OperatorMatrix::new(s(-uu), ex.scale(1.0 / uu), s(-1.0 / uu), ex.scale(uu))
}

/// `e^{−(iπ/2ω)(p−ω″)}` and its inverse: `e^{(iπ/2ω)ω″} K` and `e^{−(iπ/2ω)ω″} K⁻¹`.
fn h_entries(p: &ModularParams, coord: usize) -> (FDOperator, FDOperator) {
    let step = -1.0 / (4.0 * p.omega);
    let c = half_phase(p, p.omega_dp);
    (FDOperator::shift(coord, step).scale(c), FDOperator::shift(coord, -step).scale(1.0 / c))
}

/// `H(p) = diag(e^{−(iπ/2ω)(p−ω″)}, e^{(iπ/2ω)(p−ω″)})`.
pub fn build_h(p: &ModularParams, coord: usize) -> OperatorMatrix {
    let (a, d) = h_entries(p, coord);
    OperatorMatrix::diag(a, d)
}

/// `M_{u₂}(x) H(p) N_{u₁}(x)`.
pub fn build_l_fact(p: &ModularParams, coord: usize, u1: C64, u2: C64) -> OperatorMatrix {
    matmul(&matmul(&build_m(p, coord, u2), &build_h(p, coord)), &build_n(p, coord, u1))
}

/// `L⁺(u) = diag(e^{−(iπ/2ω)(p−ω″)}, e^{iπx/ω} e^{(iπ/2ω)(p−ω″)}) N_u(x)`.
pub fn build_lplus(p: &ModularParams, coord: usize, u: C64) -> OperatorMatrix {
    let (a, d) = h_entries(p, coord);
    matmul(
        &OperatorMatrix::diag(a, exp_x(p, coord, 1.0).then_after(&d)),
        &build_n(p, coord, u),
    )
}

/// `L⁻(u) = M_u(x) diag(−e^{−(iπ/2ω)(p−ω″)}, e^{(iπ/2ω)(p−ω″)} e^{−iπx/ω})`.
pub fn build_lminus(p: &ModularParams, coord: usize, u: C64) -> OperatorMatrix {
    let (a, d) = h_entries(p, coord);
    matmul(
        &build_m(p, coord, u),
        &OperatorMatrix::diag(a.scale(C64::new(-1.0, 0.0)), d.then_after(&exp_x(p, coord, -1.0))),
    )
}

/// `ℓ(u) = [[e^{iπu/ω}K, 0], [e_s, e^{iπu/ω}K⁻¹]]`.
pub fn build_ell(sp: &SpinParams, coord: usize, u: C64) -> Result<OperatorMatrix> {
    let g = generators(sp, coord)?;
    let z = (I * PI / sp.params.omega * u).exp();
    Ok(OperatorMatrix::new(g.k.scale(z), FDOperator::zero(), g.e.clone(), g.k_inv.scale(z)))
}

/// `ℓ̄(u) = [[e^{−iπu/ω}K⁻¹, −f_s], [0, e^{−iπu/ω}K]]`.
pub fn build_ellbar(sp: &SpinParams, coord: usize, u: C64) -> Result<OperatorMatrix> {
    let g = generators(sp, coord)?;
    let z = (-I * PI / sp.params.omega * u).exp();
    Ok(OperatorMatrix::new(
        g.k_inv.scale(z),
        g.f.scale(C64::new(-1.0, 0.0)),
        FDOperator::zero(),
        g.k.scale(z),
    ))
}

/// `L(u, s)` in spectral/spin form.
pub fn build_l_spin(sp: &SpinParams, coord: usize, u: C64) -> Result<OperatorMatrix> {
    let (u1, u2) = spin_to_u(&sp.params, u, sp.s);
    build_l(&sp.params, coord, u1, u2)
}

/// Conjugation `e^{2πiap} M e^{−2πiap}` on `coord`.
pub fn conjugate_shift(m: &OperatorMatrix, coord: usize, a: C64) -> OperatorMatrix {
    m.left_op(&FDOperator::shift(coord, a)).right_op(&FDOperator::shift(coord, -a))
}

/// Entrywise residuals of the (LBT07) assembly against the factorized one.
pub fn factorization_residual(engine: &Engine, p: &ModularParams, u1: C64, u2: C64) -> Result<f64> {
    let a = build_l(p, 0, u1, u2)?;
    let b = build_l_fact(p, 0, u1, u2);
    Ok(matrix_entry_residuals(engine, &a, &b, 1)?.into_iter().fold(0.0, f64::max))
}

/// `M_u N_u = (U⁻² − U²)·diag(1, −1)`, i.e. `N_u = (U⁻² − U²) M_u⁻¹ σ_z`.
///
/// With the entries of `N_u` that make `L = M H N` hold, the relation to `M_u⁻¹`
/// carries the factor `σ_z`; `N_u M_u` itself is not scalar (see
/// [`nm_scalar_residual`]).
pub fn nm_residual(engine: &Engine, p: &ModularParams, u: C64) -> Result<f64> {
    let uu = half_phase(p, u);
    let lhs = matmul(&build_m(p, 0, u), &build_n(p, 0, u));
    let c = 1.0 / (uu * uu) - uu * uu;
    let rhs = OperatorMatrix::scalar([[c, C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), -c]]);
    matrix_stacked_residual(engine, &lhs, &rhs, 1)
}

/// The literal reading `N_u M_u = (U⁻² − U²)·Id`.
pub fn nm_scalar_residual(engine: &Engine, p: &ModularParams, u: C64) -> Result<f64> {
    let uu = half_phase(p, u);
    let lhs = matmul(&build_n(p, 0, u), &build_m(p, 0, u));
    let c = 1.0 / (uu * uu) - uu * uu;
    let rhs = OperatorMatrix::scalar([[c, C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), c]]);
    matrix_stacked_residual(engine, &lhs, &rhs, 1)
}

/// `D_{u₂−u₁}(p) L(u₁,u₂) = L(u₂,u₁) D_{u₂−u₁}(p)`, per entry.
pub fn wl2_residuals(engine: &Engine, p: &ModularParams, u1: C64, u2: C64) -> Result<[f64; 4]> {
    let w = d_of_p(u2 - u1, 0);
    let lhs = build_l(p, 0, u1, u2)?.left_op(&w);
    let rhs = build_l(p, 0, u2, u1)?.right_op(&w);
    matrix_entry_residuals(engine, &lhs, &rhs, 1)
}

/// `D_{v−u}(x₁₂) L₁⁺(v) L₂⁻(u) = L₁⁺(u) L₂⁻(v) D_{v−u}(x₁₂)`, per entry.
pub fn intw_lplus_lminus_residuals(engine: &Engine, p: &ModularParams, u: C64, v: C64) -> Result<[f64; 4]> {
    let d = d_of_x(v - u, LinearForm::difference(0, 1));
    let lhs = matmul(&build_lplus(p, 0, v), &build_lminus(p, 1, u)).left_op(&d);
    let rhs = matmul(&build_lplus(p, 0, u), &build_lminus(p, 1, v)).right_op(&d);
    matrix_entry_residuals(engine, &lhs, &rhs, 2)
}

/// `e^{−iπp²} L⁺(u) e^{iπp²} = L⁻(u)`.
pub fn lplus_to_lminus_residual(engine: &Engine, p: &ModularParams, u: C64) -> Result<f64> {
    let lhs = build_lplus(p, 0, u).left_op(&fresnel(0, 1)).right_op(&fresnel(0, -1));
    matrix_stacked_residual(engine, &lhs, &build_lminus(p, 0, u), 1)
}

/// `e^{−iπp²} e^{±iπx/ω} e^{iπp²} = e^{±iπx/ω} e^{(iπ/ω)(∓p+ω′)}` for both signs.
pub fn fresnel_conjugation_residuals(engine: &Engine, p: &ModularParams) -> Result<[f64; 2]> {
    let mut out = [0.0; 2];
    for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
        let lhs = fresnel(0, 1).then_after(&exp_x(p, 0, sign)).then_after(&fresnel(0, -1));
        // e^{∓(iπ/ω)p} shifts x by ∓1/(2ω) = ±2ω′.
        let phase = (I * PI * p.omega_prime / p.omega).exp();
        let rhs = exp_x(p, 0, sign)
            .then_after(&FDOperator::shift(0, -sign / (2.0 * p.omega)))
            .scale(phase);
        out[k] = op_residual(engine, &lhs, &rhs, 1)?;
    }
    Ok(out)
}

/// `e^{2πiap} e_s e^{−2πiap} = e^{iπa/ω} e_s` and `e^{2πiap} f_s e^{−2πiap} = e^{−iπa/ω} f_s`.
pub fn similarity_residuals(engine: &Engine, sp: &SpinParams, a: C64) -> Result<[f64; 2]> {
    let g = generators(sp, 0)?;
    let conj = |o: &FDOperator| FDOperator::shift(0, a).then_after(o).then_after(&FDOperator::shift(0, -a));
    let z = (I * PI / sp.params.omega * a).exp();
    Ok([
        op_residual(engine, &conj(&g.e), &g.e.scale(z), 1)?,
        op_residual(engine, &conj(&g.f), &g.f.scale(1.0 / z), 1)?,
    ])
}

/// Which reduced operator a sweep approaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reduction {
    /// `e^{−(iπ/2ω)u₂} L(u₁, u₂) → L⁺(u₁)` as `u₂ → +∞`.
    LPlus,
    /// `e^{−(iπ/2ω)u₁} L(u₁, u₂) → L⁻(u₂)` as `u₁ → +∞`.
    LMinus,
    /// `e^{−iπv/ω} e^{2πipv} L(u+v) e^{−2πipv} → ℓ(u)` as `v → +∞`.
    Ell,
    /// `−e^{iπv/ω} e^{2πipv} L(u+v) e^{−2πipv} → ℓ̄(u)` as `v → −∞`.
    EllBar,
}

/// Residual of one reduction at finite `t` (the parameter sent to infinity), with the
/// fixed parameter `u` and spin `sp.s`.
pub fn reduction_residual(engine: &Engine, sp: &SpinParams, which: Reduction, u: C64, t: f64) -> Result<f64> {
    let p = &sp.params;
    let t = C64::new(t, 0.0);
    let (lhs, rhs) = match which {
        Reduction::LPlus => (build_l(p, 0, u, t)?.scale(1.0 / half_phase(p, t)), build_lplus(p, 0, u)),
        Reduction::LMinus => (build_l(p, 0, t, u)?.scale(1.0 / half_phase(p, t)), build_lminus(p, 0, u)),
        Reduction::Ell => {
            let l = conjugate_shift(&build_l_spin(sp, 0, u + t)?, 0, t);
            (l.scale((-I * PI / p.omega * t).exp()), build_ell(sp, 0, u)?)
        }
        Reduction::EllBar => {
            let l = conjugate_shift(&build_l_spin(sp, 0, u + t)?, 0, t);
            (l.scale(-(I * PI / p.omega * t).exp()), build_ellbar(sp, 0, u)?)
        }
    };
    matrix_stacked_residual(engine, &lhs, &rhs, 1)
}

/// Residuals of a reduction over a list of parameter values.
pub fn reduction_sweep(
    engine: &Engine,
    sp: &SpinParams,
    which: Reduction,
    u: C64,
    ts: &[f64],
) -> Result<Vec<f64>> {
    ts.iter().map(|t| reduction_residual(engine, sp, which, u, *t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::decreasing_to_floor;
    use crate::params::{make_params, NumericsConfig};
    use crate::specfun::GammaEvaluator;
    use std::sync::Arc;

    fn params() -> ModularParams {
        make_params(0.8).unwrap()
    }

    fn engine() -> Engine {
        Engine::new(Arc::new(GammaEvaluator::new(params(), NumericsConfig::default()).unwrap()))
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn spin_round_trip() {
        let p = params();
        let (u1, u2) = spin_to_u(&p, c(0.3), c(0.4));
        assert!((u1 - u2 - c(0.4)).norm() < 1e-15);
        let (u, s) = u_to_spin(&p, u1, u2);
        assert!((u - c(0.3)).norm() < 1e-15 && (s - c(0.4)).norm() < 1e-15);
        let (a, b) = spin_to_u(&p, c(0.3), c(-0.4));
        assert!((a - u2).norm() < 1e-15 && (b - u1).norm() < 1e-15);
    }

    #[test]
    fn factorized_form_agrees() {
        let e = engine();
        let p = params();
        let (u1, u2) = spin_to_u(&p, c(0.3), c(0.4));
        assert!(factorization_residual(&e, &p, u1, u2).unwrap() < 1e-10);
        let r = nm_residual(&e, &p, u1).unwrap();
        assert!(r < 1e-10, "{r}");
        assert!(nm_scalar_residual(&e, &p, u1).unwrap() > 0.1);
    }

    #[test]
    fn ell_is_lower_triangular() {
        let sp = SpinParams::real(0.4, params());
        assert!(build_ell(&sp, 0, c(0.2)).unwrap().get(0, 1).is_zero());
        assert!(build_ellbar(&sp, 0, c(0.2)).unwrap().get(1, 0).is_zero());
    }

    #[test]
    fn fresnel_maps_lplus_to_lminus() {
        let e = engine();
        let p = params();
        assert!(lplus_to_lminus_residual(&e, &p, spin_to_u(&p, c(0.3), c(0.4)).0).unwrap() < 1e-8);
        for r in fresnel_conjugation_residuals(&e, &p).unwrap() {
            assert!(r < 1e-10, "{r}");
        }
    }

    #[test]
    fn wl2_entries() {
        let e = engine();
        let p = params();
        let (u1, u2) = spin_to_u(&p, c(0.3), c(0.4));
        for r in wl2_residuals(&e, &p, u1, u2).unwrap() {
            assert!(r < 1e-5, "{r}");
        }
    }

    #[test]
    fn intertwining_of_reduced_operators() {
        let e = engine();
        let p = params();
        for r in intw_lplus_lminus_residuals(&e, &p, c(0.2), c(-0.3)).unwrap() {
            assert!(r < 1e-5, "{r}");
        }
    }

    #[test]
    fn sweeps_decrease() {
        let e = engine();
        let sp = SpinParams::real(0.4, params());
        for (which, ts) in [
            (Reduction::LPlus, [2.0, 4.0, 8.0]),
            (Reduction::LMinus, [2.0, 4.0, 8.0]),
            (Reduction::Ell, [2.0, 4.0, 8.0]),
            (Reduction::EllBar, [-2.0, -4.0, -8.0]),
        ] {
            let r = reduction_sweep(&e, &sp, which, c(0.25), &ts).unwrap();
            assert!(decreasing_to_floor(&r), "{which:?}: {r:?}");
        }
    }

    #[test]
    fn similarity_of_generators() {
        let e = engine();
        for r in similarity_residuals(&e, &SpinParams::real(0.4, params()), c(0.7)).unwrap() {
            assert!(r < 1e-10, "{r}");
        }
    }
}
