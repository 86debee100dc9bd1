//! The non-compact quantum dilogarithm γ(z), the Faddeev–Volkov function D_a(z) and
//! the Fourier normalization A(a).
//!
//! γ is evaluated from its integral representation
//! `log γ(z) = −¼ ∫ dt/t · e^{itz} / (sin ωt · sin ω′t)` on a line lifted to
//! `Im t = δ`, which passes above the pole at `t = 0`. For `Re z < −1` the factor
//! `e^{itz}` grows on that line, so the line `Im t = −δ` is used instead and the
//! residue at `t = 0`, `iπz² − iπ(ω² + ω′²)/3`, is added back. Arguments far from the
//! real axis are first brought into a strip with the difference equations.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::params::{ModularParams, NumericsConfig, C64, I};
use crate::quad::{strip_step, ContourRule};

/// Distance below which an argument counts as sitting on a pole or zero of γ.
pub const SINGULAR_GUARD: f64 = 1e-6;

/// Recurrence restarts after this many multiplications.
const RESTART: usize = 64;

/// `ln(1 + e^w)` without overflow and without cancellation for small `e^w`.
pub fn log1p_exp(w: C64) -> C64 {
    if w.re > 0.0 {
        w + log1p((-w).exp())
    } else {
        log1p(w.exp())
    }
}

fn log1p(e: C64) -> C64 {
    let u = C64::new(1.0, 0.0) + e;
    let d = u - 1.0;
    if d == C64::new(0.0, 0.0) {
        e
    } else {
        u.ln() * (e / d)
    }
}

#[derive(Debug, Clone)]
struct LineRule {
    delta: f64,
    /// `h / (t_k sin ωt_k sin ω′t_k)` for `t_k = k h + iδ`, `k = −K..=K`.
    g: Vec<C64>,
}

/// Quadrature engine for γ. Read-only after construction.
#[derive(Debug, Clone)]
pub struct GammaEvaluator {
    params: ModularParams,
    numerics: NumericsConfig,
    h: f64,
    kmax: usize,
    upper: LineRule,
    lower: LineRule,
    /// Multiplier applied to the `h` versus `2h` estimate (from calibration).
    safety: f64,
}

/// A value of γ (or of a function built from it) with an accuracy estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: C64,
    pub error: f64,
}

impl GammaEvaluator {
    pub fn new(params: ModularParams, numerics: NumericsConfig) -> Result<GammaEvaluator> {
        numerics.validate(&params)?;
        let delta = numerics.contour_lift;
        let pole_row = 2.0 * PI * params.b.min(1.0 / params.b);
        let distance = delta.min(pole_row - delta) * 0.85;
        // The third-order pole at t = 0 makes the integrand ~4/d³ at the strip edge.
        let h = strip_step(distance, numerics.quad_tol, 1e4 / distance.powi(3));
        let w = params.w();
        // Widest window: |Im z| up to 0.8·W (the reduction threshold).
        let t_max = if numerics.truncation > 0.0 {
            numerics.truncation
        } else {
            Self::window(numerics.quad_tol, delta, w, 0.8 * w)
        };
        let kmax = (t_max / h).ceil() as usize;
        let make = |sign: f64| {
            let g = (0..=2 * kmax)
                .map(|j| {
                    let t = C64::new((j as f64 - kmax as f64) * h, sign * delta);
                    h / (t * (params.omega * t).sin() * (params.omega_prime * t).sin())
                })
                .collect();
            LineRule { delta: sign * delta, g }
        };
        let mut ev = GammaEvaluator {
            upper: make(1.0),
            lower: make(-1.0),
            params,
            numerics,
            h,
            kmax,
            safety: 1.0,
        };
        ev.calibrate();
        Ok(ev)
    }

    /// Half-width of the t-window needed at `|Im z| = y`.
    fn window(tol: f64, delta: f64, w: f64, y: f64) -> f64 {
        ((1.0 / tol).ln() + 6.0 + delta) / (w - y).max(0.05 * w)
    }

    pub fn params(&self) -> &ModularParams {
        &self.params
    }

    pub fn numerics(&self) -> &NumericsConfig {
        &self.numerics
    }

    /// Number of nodes on each lifted line.
    pub fn node_count(&self) -> usize {
        2 * self.kmax + 1
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    /// Nearest lattice point `∓(ω″ + 2mω + 2nω′)` if `z` is within the guard of one.
    pub fn check_singular(&self, z: C64) -> Result<()> {
        let p = &self.params;
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Domain(format!("non-finite argument {z}")));
        }
        for sign in [-1.0, 1.0] {
            let base = p.omega_dp * sign;
            let (s1, s2) = (2.0 * p.omega * sign, 2.0 * p.omega_prime * sign);
            let reach = (z - base).norm() + 1.0;
            let mmax = (reach / s1.norm()).ceil() as i64;
            let nmax = (reach / s2.norm()).ceil() as i64;
            for m in 0..=mmax {
                for n in 0..=nmax {
                    let pt = base + s1 * m as f64 + s2 * n as f64;
                    let d = (z - pt).norm();
                    if d < SINGULAR_GUARD {
                        return Err(Error::Singularity {
                            arg: z,
                            point: pt,
                            distance: d,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// `log γ(z)` on some branch, with an accuracy estimate for `γ(z)` in relative terms.
    pub fn log_gamma(&self, z: C64) -> Result<Estimate> {
        self.check_singular(z)?;
        let (z0, shift_log) = self.reduce(z);
        let line = if z0.re >= -1.0 { &self.upper } else { &self.lower };
        let y = z0.im.abs();
        let t = if self.numerics.truncation > 0.0 {
            self.numerics.truncation
        } else {
            Self::window(self.numerics.quad_tol, self.numerics.contour_lift, self.params.w(), y)
        };
        let k = ((t / self.h).ceil() as usize).min(self.kmax);
        let (full, even) = self.line_sum(line, z0, k);
        let mut log = -full / 4.0 + shift_log;
        if line.delta < 0.0 {
            let p = &self.params;
            log += I * PI * z0 * z0 - I * PI * (p.omega * p.omega + p.omega_prime * p.omega_prime) / 3.0;
        }
        // The trapezoid error decays like e^{−c/h}, so the error at h is about the
        // square of the (observable) difference between the h and 2h sums.
        let coarse = 2.0 * even;
        let raw = ((full - coarse) / 4.0).norm();
        let floor = 1e3 * f64::EPSILON * (1.0 + log.norm());
        Ok(Estimate {
            value: log,
            error: self.safety * raw * raw.min(1.0) + floor,
        })
    }

    /// Trapezoid sum over nodes `−k..=k`, and the same sum over even nodes only.
    fn line_sum(&self, line: &LineRule, z: C64, k: usize) -> (C64, C64) {
        let base = self.kmax - k;
        let e = (I * self.h * z).exp();
        let lift = (-line.delta * z).exp();
        let mut full = C64::new(0.0, 0.0);
        let mut even = C64::new(0.0, 0.0);
        let mut cur = C64::new(0.0, 0.0);
        for j in 0..=2 * k {
            let idx = j as i64 - k as i64;
            if j % RESTART == 0 {
                cur = lift * (I * self.h * idx as f64 * z).exp();
            }
            let term = self.g_at(line, base + j) * cur;
            full += term;
            if idx.rem_euclid(2) == 0 {
                even += term;
            }
            cur *= e;
        }
        (full, even)
    }

    #[inline]
    fn g_at(&self, line: &LineRule, j: usize) -> C64 {
        line.g[j]
    }

    /// Moves `z` into the band `|Im z| ≤ step/2` when it leaves `|Im z| ≤ 0.8·W`,
    /// returning the reduced point and the accumulated `log` factor.
    fn reduce(&self, z: C64) -> (C64, C64) {
        let p = &self.params;
        let limit = 0.8 * p.w();
        if z.im.abs() <= limit {
            return (z, C64::new(0.0, 0.0));
        }
        // Step with the shorter period; the exponent carries the other half-period.
        let (half, other) = if p.omega.im <= p.omega_prime.im {
            (p.omega, p.omega_prime)
        } else {
            (p.omega_prime, p.omega)
        };
        let step = 2.0 * half;
        let band = step.im / 2.0;
        let mut z = z;
        let mut acc = C64::new(0.0, 0.0);
        // γ(z) = γ(z − 2h)·(1 + e^{−iπ(z−h)/o}),  γ(z) = γ(z + 2h)/(1 + e^{−iπ(z+h)/o}).
        while z.im > band {
            acc += log1p_exp(-I * PI * (z - half) / other);
            z -= step;
        }
        while z.im < -band {
            acc -= log1p_exp(-I * PI * (z + half) / other);
            z += step;
        }
        (z, acc)
    }

    pub fn gamma(&self, z: C64) -> Result<C64> {
        Ok(self.log_gamma(z)?.value.exp())
    }

    /// γ(z) with its relative accuracy estimate.
    pub fn gamma_estimate(&self, z: C64) -> Result<Estimate> {
        let l = self.log_gamma(z)?;
        Ok(Estimate {
            value: l.value.exp(),
            error: l.error,
        })
    }

    /// `log D_a(z) = −2πiaz + log γ(z+a) − log γ(z−a)`.
    pub fn log_d(&self, a: C64, z: C64) -> Result<C64> {
        if a == C64::new(0.0, 0.0) {
            return Ok(C64::new(0.0, 0.0));
        }
        let plus = self.log_gamma(z + a).map_err(|e| e.annotate("z+a"))?;
        let minus = self.log_gamma(z - a).map_err(|e| e.annotate("z-a"))?;
        Ok(-2.0 * PI * I * a * z + plus.value - minus.value)
    }

    /// `D_a(z) = e^{−2πiaz} γ(z+a)/γ(z−a)`.
    pub fn d(&self, a: C64, z: C64) -> Result<C64> {
        Ok(self.log_d(a, z)?.exp())
    }

    /// D_a(z) with a relative accuracy estimate.
    pub fn d_estimate(&self, a: C64, z: C64) -> Result<Estimate> {
        if a == C64::new(0.0, 0.0) {
            return Ok(Estimate {
                value: C64::new(1.0, 0.0),
                error: 0.0,
            });
        }
        let plus = self.log_gamma(z + a).map_err(|e| e.annotate("z+a"))?;
        let minus = self.log_gamma(z - a).map_err(|e| e.annotate("z-a"))?;
        Ok(Estimate {
            value: (-2.0 * PI * I * a * z + plus.value - minus.value).exp(),
            error: plus.error + minus.error,
        })
    }

    /// Normalization making `A(a)·∫ e^{2πitz} D_a(t) dt = D_{−ω″−a}(z)` hold:
    /// `A(a) = γ(−ω″ − 2a)·e^{−(iπ/2)(2a + ω″)² − iβ/2}`.
    pub fn a_norm(&self, a: C64) -> Result<C64> {
        Ok(self.a_estimate(a)?.value)
    }

    /// A(a) with the relative accuracy estimate of its γ factor.
    pub fn a_estimate(&self, a: C64) -> Result<Estimate> {
        let p = &self.params;
        let w = 2.0 * a + p.omega_dp;
        let lg = self.log_gamma(-p.omega_dp - 2.0 * a)?;
        Ok(Estimate {
            value: (lg.value - I * PI / 2.0 * w * w - I * p.beta / 2.0).exp(),
            error: lg.error,
        })
    }

    /// Compares the `h` versus `2h` estimate with the reflection defect on a lattice
    /// and scales the estimate until it dominates.
    fn calibrate(&mut self) {
        let p = self.params;
        let mut worst: f64 = 1.0;
        for z in self.self_test_lattice() {
            let (Ok(a), Ok(b)) = (self.log_gamma(z), self.log_gamma(-z)) else {
                continue;
            };
            let defect = (a.value + b.value - I * p.beta - I * PI * z * z).exp() - 1.0;
            let est = a.error + b.error;
            if est > 0.0 {
                worst = worst.max(defect.norm() / est);
            }
        }
        self.safety = worst;
    }

    /// Twenty points covering the primary strip.
    pub fn self_test_lattice(&self) -> Vec<C64> {
        let w = self.params.w();
        let mut out = Vec::with_capacity(20);
        for (i, re) in [-2.3, -0.9, 0.15, 1.1, 2.7].iter().enumerate() {
            for (j, f) in [-0.55, -0.2, 0.25, 0.6].iter().enumerate() {
                out.push(C64::new(*re + 0.07 * j as f64, f * w + 0.01 * i as f64));
            }
        }
        out
    }
}

/// Free-function form: γ(z).
pub fn eval_gamma(ev: &GammaEvaluator, z: C64) -> Result<C64> {
    ev.gamma(z)
}

/// Free-function form: D_a(z).
pub fn eval_d(ev: &GammaEvaluator, a: C64, z: C64) -> Result<C64> {
    ev.d(a, z)
}

/// Free-function form: A(a), the Fourier normalization of D_a.
pub fn eval_a(ev: &GammaEvaluator, a: C64) -> Result<C64> {
    ev.a_norm(a)
}

/// Tilt θ of a line `t = s(1 + iθ)` through the origin that keeps the point `p_lo`
/// strictly below it and `−p_lo` strictly above it. `None` when the two points pinch
/// the origin.
pub fn separating_tilt(p_lo: C64, max_tilt: f64) -> Option<f64> {
    let margin = 0.15;
    if p_lo.im < -margin {
        return Some(0.0);
    }
    if p_lo.re.abs() < 1e-12 {
        return None;
    }
    let theta = max_tilt * p_lo.re.signum();
    // Height of the line above p_lo.
    if theta * p_lo.re - p_lo.im > 0.0 {
        Some(theta)
    } else {
        None
    }
}

/// Distance from `p` to the line `t = s(1 + iθ)`.
pub fn line_distance(p: C64, theta: f64) -> f64 {
    (p.im - theta * p.re).abs() / (1.0 + theta * theta).sqrt()
}

/// `A(a)·∫ e^{2πitz} D_a(t) dt` by trapezoidal quadrature on a tilted line truncated
/// to `|Re t| ≤ truncation`. Requires `Im a < 0`.
pub fn fourier_d(ev: &GammaEvaluator, a: C64, z: C64, truncation: f64, tol: f64) -> Result<C64> {
    if a.im >= 0.0 {
        return Err(Error::Convergence(format!(
            "D_a(t) does not decay on the real line for Im a = {} ≥ 0",
            a.im
        )));
    }
    let p = ev.params();
    let p_lo = -a - p.omega_dp;
    let theta = separating_tilt(p_lo, 0.5)
        .ok_or_else(|| Error::Convergence(format!("contour pinched between ±{p_lo}")))?;
    let dist = line_distance(p_lo, theta).min(1.0);
    let h = strip_step(0.8 * dist, tol, 1e3);
    let rule = ContourRule::tilted_line(theta, truncation, h);
    let mut acc = C64::new(0.0, 0.0);
    for (t, w) in rule.nodes.iter().zip(&rule.weights) {
        acc += w * (2.0 * PI * I * t * z + ev.log_d(a, *t)?).exp();
    }
    Ok(ev.a_norm(a)? * acc)
}

/// Both sides of the integral star-triangle relation
/// `A(a)A(b)A(c) ∫ D_a(z−z₁) D_b(z−z₂) D_c(z−z₃) dz
///   = D_{−ω″−a}(z₂−z₃) D_{−ω″−b}(z₃−z₁) D_{−ω″−c}(z₁−z₂)` with `c = −2ω″ − a − b`.
pub fn star_triangle_sides(ev: &GammaEvaluator, a: C64, b: C64, zs: [C64; 3], tol: f64) -> Result<(C64, C64)> {
    let p = ev.params();
    let c = -2.0 * p.omega_dp - a - b;
    for (name, x) in [("a", a), ("b", b), ("c", c)] {
        if x.im >= 0.0 {
            return Err(Error::Domain(format!("{name} = {x} must have Im < 0")));
        }
    }
    // Singularities of D_x(z − z_j) closest to the contour sit at z_j ± (x + ω″).
    let mut dist = f64::INFINITY;
    for (x, zj) in [(a, zs[0]), (b, zs[1]), (c, zs[2])] {
        let lo = zj - x - p.omega_dp;
        let hi = zj + x + p.omega_dp;
        if lo.im >= 0.0 || hi.im <= 0.0 {
            return Err(Error::Domain("real contour does not separate the pole rows".into()));
        }
        dist = dist.min(-lo.im).min(hi.im);
    }
    let decay = 2.0 * PI * (-a.im - b.im - c.im).min(-a.im.max(b.im).max(c.im));
    let half = (1.0 / tol).ln() / decay.max(0.5) + 2.0 + zs.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let h = strip_step(0.8 * dist.min(1.0), tol, 1e3);
    let rule = ContourRule::tilted_line(0.0, half, h);
    let mut acc = C64::new(0.0, 0.0);
    for (t, w) in rule.nodes.iter().zip(&rule.weights) {
        let l = ev.log_d(a, t - zs[0])? + ev.log_d(b, t - zs[1])? + ev.log_d(c, t - zs[2])?;
        acc += w * l.exp();
    }
    let lhs = ev.a_norm(a)? * ev.a_norm(b)? * ev.a_norm(c)? * acc;
    let rhs = ev.d(-p.omega_dp - a, zs[1] - zs[2])?
        * ev.d(-p.omega_dp - b, zs[2] - zs[0])?
        * ev.d(-p.omega_dp - c, zs[0] - zs[1])?;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::make_params;

    fn ev() -> GammaEvaluator {
        GammaEvaluator::new(make_params(0.8).unwrap(), NumericsConfig::default()).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn gamma_zero_squared_is_exp_i_beta() {
        let e = ev();
        let g = e.gamma(c(0.0, 0.0)).unwrap();
        assert!((g * g - (I * e.params().beta).exp()).norm() < 1e-12);
    }

    #[test]
    fn gamma_ratio_at_omega_prime_is_two() {
        let e = ev();
        let wp = e.params().omega_prime;
        let r = e.gamma(wp).unwrap() / e.gamma(-wp).unwrap();
        assert!((r - 2.0).norm() < 1e-12, "{r}");
    }

    #[test]
    fn gamma_tends_to_one() {
        let e = ev();
        assert!((e.gamma(c(10.0, 0.0)).unwrap() - 1.0).norm() < 1e-8);
    }

    #[test]
    fn difference_equations_far_from_axis() {
        let e = ev();
        let p = *e.params();
        for z in [c(0.3, 2.2), c(-1.7, -3.1), c(2.5, 4.4), c(-4.0, 0.9)] {
            let r1 = e.gamma(z + p.omega_prime).unwrap() / e.gamma(z - p.omega_prime).unwrap();
            let e1 = 1.0 + (-I * PI * z / p.omega).exp();
            assert!(((r1 - e1) / e1).norm() < 1e-10, "{z}: {r1} vs {e1}");
            let r2 = e.gamma(z + p.omega).unwrap() / e.gamma(z - p.omega).unwrap();
            let e2 = 1.0 + (-I * PI * z / p.omega_prime).exp();
            assert!(((r2 - e2) / e2).norm() < 1e-10, "{z}: {r2} vs {e2}");
        }
    }

    #[test]
    fn singular_points_are_rejected() {
        let e = ev();
        let p = *e.params();
        let pole = -p.omega_dp - 2.0 * p.omega;
        match e.gamma(pole) {
            Err(Error::Singularity { point, .. }) => assert!((point - pole).norm() < 1e-12),
            other => panic!("expected singularity, got {other:?}"),
        }
        assert!(e.gamma(p.omega_dp + 2.0 * p.omega_prime).is_err());
        assert!(e.gamma(c(f64::NAN, 0.0)).is_err());
        let err = e.d(c(0.3, 0.0), p.omega_dp - 0.3).unwrap_err();
        assert!(err.to_string().contains("z+a"));
    }

    #[test]
    fn estimate_dominates_reflection_defect() {
        let e = ev();
        let p = *e.params();
        for z in e.self_test_lattice() {
            let a = e.log_gamma(z).unwrap();
            let b = e.log_gamma(-z).unwrap();
            let defect = ((a.value + b.value - I * p.beta - I * PI * z * z).exp() - 1.0).norm();
            assert!(defect <= a.error + b.error + 1e-15, "{z}");
            assert!(a.error < 1e-9);
        }
    }

    #[test]
    fn d_at_zero_is_one() {
        let e = ev();
        assert_eq!(e.d(c(0.0, 0.0), c(1.5, 0.0)).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn fourier_normalization_on_tilted_contour() {
        let e = ev();
        let p = *e.params();
        let a = c(0.4, 0.0) - p.omega_dp;
        let lhs = fourier_d(&e, a, c(0.7, 0.0), 12.0, 1e-12).unwrap();
        let rhs = e.d(-p.omega_dp - a, c(0.7, 0.0)).unwrap();
        assert!((lhs - rhs).norm() < 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn fourier_rejects_non_decaying() {
        let e = ev();
        assert!(matches!(
            fourier_d(&e, c(0.3, 0.0), c(0.5, 0.0), 10.0, 1e-8),
            Err(Error::Convergence(_))
        ));
    }

    #[test]
    fn log1p_exp_is_stable() {
        assert!((log1p_exp(c(800.0, 0.3)) - c(800.0, 0.3)).norm() < 1e-12);
        let tiny = log1p_exp(c(-40.0, 0.0));
        assert!((tiny.re - (-40.0f64).exp()).abs() < 1e-30);
    }
}
