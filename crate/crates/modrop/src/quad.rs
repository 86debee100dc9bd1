//! Trapezoidal rules on parametrized contours.
//!
//! Every integrand in this crate is analytic in a strip around its contour and decays
//! at least exponentially, so the trapezoidal rule converges geometrically in the
//! step and a truncated sum is the most economical quadrature.

use crate::params::C64;

/// Nodes and weights of a trapezoidal rule on a contour `t(s)`, with the Jacobian
/// `t′(s)` and the step folded into the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourRule {
    pub nodes: Vec<C64>,
    pub weights: Vec<C64>,
    pub step: f64,
}

impl ContourRule {
    /// Samples the map `s ↦ (t(s), t′(s))` at `s = s_min + k·h` for `s ≤ s_max`.
    pub fn from_map(s_min: f64, s_max: f64, h: f64, map: impl Fn(f64) -> (C64, C64)) -> ContourRule {
        let n = ((s_max - s_min) / h).floor() as usize + 1;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for k in 0..n {
            let (t, dt) = map(s_min + k as f64 * h);
            nodes.push(t);
            weights.push(dt * h);
        }
        ContourRule { nodes, weights, step: h }
    }

    /// The straight line `t = s(1 + iθ)`, `s ∈ [−half, half]`, symmetric about 0.
    pub fn tilted_line(theta: f64, half: f64, h: f64) -> ContourRule {
        let k = (half / h).ceil() as i64;
        let dir = C64::new(1.0, theta);
        let mut nodes = Vec::with_capacity(2 * k as usize + 1);
        let mut weights = Vec::with_capacity(2 * k as usize + 1);
        for j in -k..=k {
            nodes.push(dir * (j as f64 * h));
            weights.push(dir * h);
        }
        ContourRule { nodes, weights, step: h }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_k f(t_k)`.
    pub fn integrate(&self, mut f: impl FnMut(C64) -> C64) -> C64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * f(*t))
            .sum()
    }

    /// Multiplies every weight by `g(t_k)`; used to bake a kernel into the rule.
    pub fn with_density(mut self, g: impl Fn(C64) -> C64) -> ContourRule {
        for (t, w) in self.nodes.iter().zip(self.weights.iter_mut()) {
            *w *= g(*t);
        }
        self
    }
}

/// Trapezoid step that keeps the discretization error near `tol` for an integrand
/// analytic in a strip of half-width `distance` whose size inside the strip is at
/// most `growth` times its size on the contour.
pub fn strip_step(distance: f64, tol: f64, growth: f64) -> f64 {
    2.0 * std::f64::consts::PI * distance / ((1.0 / tol).ln() + growth.max(1.0).ln())
}
