//! Modular parametrization and the numeric configuration shared by every module.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

/// The arithmetic backbone of the modular double in the positive regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModularParams {
    pub b: f64,
    pub omega: C64,
    pub omega_prime: C64,
    pub omega_dp: C64,
    pub beta: C64,
    pub q: C64,
    pub q_tilde: C64,
    pub tau: C64,
}

fn derive(b: f64, omega: C64, omega_prime: C64) -> ModularParams {
    let beta = PI / 12.0 * (omega / omega_prime + omega_prime / omega);
    ModularParams {
        b,
        omega,
        omega_prime,
        omega_dp: omega + omega_prime,
        beta,
        q: (I * PI * omega_prime / omega).exp(),
        q_tilde: (I * PI * omega / omega_prime).exp(),
        tau: omega_prime / omega,
    }
}

/// Builds ω = ib/2, ω′ = i/(2b) and all derived quantities.
///
/// `b = 1` is accepted: the two pole rows of the γ integrand coincide there, which
/// only affects quadrature conditioning. Callers that care can test
/// [`ModularParams::is_self_dual`].
pub fn make_params(b: f64) -> Result<ModularParams> {
    if !b.is_finite() || b <= 0.0 {
        return Err(Error::Domain(format!("b must be positive and finite, got {b}")));
    }
    Ok(derive(b, C64::new(0.0, b / 2.0), C64::new(0.0, 1.0 / (2.0 * b))))
}

/// Exchanges ω and ω′; equivalent to b ↦ 1/b.
pub fn swap_omegas(p: &ModularParams) -> ModularParams {
    derive(1.0 / p.b, p.omega_prime, p.omega)
}

impl ModularParams {
    /// W = Im ω″ = (b + 1/b)/2, the decay rate that sets most truncations.
    pub fn w(&self) -> f64 {
        self.omega_dp.im
    }

    pub fn is_self_dual(&self) -> bool {
        (self.b - 1.0).abs() < 1e-12
    }

    /// The parameters of the tilde generators.
    pub fn swapped(&self) -> ModularParams {
        swap_omegas(self)
    }
}

impl Default for ModularParams {
    fn default() -> Self {
        make_params(0.8).expect("default b is valid")
    }
}

/// Tolerance classes used when judging residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationClass {
    Scalar,
    Quadrature,
    OneCoordinate,
    TwoCoordinate,
    Rll,
    Algebra,
    YangBaxterCoarse,
    YangBaxterFine,
    /// Structural factorizations that hold to roundoff.
    Structural,
    /// Sweeps judged by monotone decrease; the residual is the largest increase.
    Monotone,
    Exact,
}

impl RelationClass {
    pub const ALL: [RelationClass; 11] = [
        RelationClass::Scalar,
        RelationClass::Quadrature,
        RelationClass::OneCoordinate,
        RelationClass::TwoCoordinate,
        RelationClass::Rll,
        RelationClass::Algebra,
        RelationClass::YangBaxterCoarse,
        RelationClass::YangBaxterFine,
        RelationClass::Structural,
        RelationClass::Monotone,
        RelationClass::Exact,
    ];

    pub fn default_tolerance(self) -> f64 {
        match self {
            RelationClass::Scalar => 1e-8,
            RelationClass::Quadrature => 1e-6,
            RelationClass::OneCoordinate => 1e-6,
            RelationClass::TwoCoordinate => 1e-5,
            RelationClass::Rll => 1e-4,
            RelationClass::Algebra => 1e-8,
            RelationClass::YangBaxterCoarse => 1e-2,
            RelationClass::YangBaxterFine => 1e-3,
            RelationClass::Structural => 1e-10,
            RelationClass::Monotone => 0.0,
            RelationClass::Exact => 0.0,
        }
    }
}

/// Quadrature and grid settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NumericsConfig {
    /// Target relative accuracy of the γ integral.
    pub quad_tol: f64,
    /// Height δ of the lifted γ contour above (or below) the real axis.
    pub contour_lift: f64,
    /// Half-width T of the t-integration for γ; `0` selects it adaptively.
    pub truncation: f64,
    /// Target accuracy of operator kernels (D-kernels and momentum multipliers).
    pub kernel_tol: f64,
    pub grid_halfwidth: f64,
    pub grid_points: usize,
    pub relation_tols: BTreeMap<RelationClass, f64>,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            quad_tol: 1e-13,
            contour_lift: 2.5,
            truncation: 0.0,
            kernel_tol: 1e-10,
            grid_halfwidth: 4.0,
            grid_points: 256,
            relation_tols: RelationClass::ALL
                .iter()
                .map(|c| (*c, c.default_tolerance()))
                .collect(),
        }
    }
}

impl NumericsConfig {
    pub fn validate(&self, p: &ModularParams) -> Result<()> {
        let bound = 2.0 * PI * p.b.min(1.0 / p.b);
        if !(self.contour_lift > 0.0 && self.contour_lift < bound) {
            return Err(Error::Domain(format!(
                "contour_lift {} must lie in (0, {bound:.4})",
                self.contour_lift
            )));
        }
        if !(self.quad_tol > 0.0 && self.quad_tol < 1.0) || !(self.kernel_tol > 0.0 && self.kernel_tol < 1.0) {
            return Err(Error::Domain("tolerances must lie in (0, 1)".into()));
        }
        if self.truncation < 0.0 || !self.truncation.is_finite() {
            return Err(Error::Domain("truncation must be non-negative".into()));
        }
        if !self.grid_points.is_power_of_two() || self.grid_points < 4 {
            return Err(Error::Domain(format!(
                "grid_points {} must be a power of two ≥ 4",
                self.grid_points
            )));
        }
        if !(self.grid_halfwidth > 0.0) {
            return Err(Error::Domain("grid_halfwidth must be positive".into()));
        }
        Ok(())
    }

    pub fn tolerance(&self, class: RelationClass) -> f64 {
        self.relation_tols
            .get(&class)
            .copied()
            .unwrap_or_else(|| class.default_tolerance())
    }
}
