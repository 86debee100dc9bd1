//! Randomized checks of the library invariants.

use std::f64::consts::PI;
use std::sync::OnceLock;

use modrop::params::I;
use modrop::sl2c::{coef, ExactDiffOp, ExactPoly};
use modrop::specfun::GammaEvaluator;
use modrop::states::{make_gaussian, EvalCtx, State};
use modrop::verify::{monotone_violation, non_increasing};
use modrop::{make_params, swap_omegas, NumericsConfig, C64};
use proptest::prelude::*;

fn evaluator() -> &'static GammaEvaluator {
    static EV: OnceLock<GammaEvaluator> = OnceLock::new();
    EV.get_or_init(|| GammaEvaluator::new(make_params(0.8).unwrap(), NumericsConfig::default()).unwrap())
}

fn swapped_evaluator() -> &'static GammaEvaluator {
    static EV: OnceLock<GammaEvaluator> = OnceLock::new();
    EV.get_or_init(|| GammaEvaluator::new(swap_omegas(&make_params(0.8).unwrap()), NumericsConfig::default()).unwrap())
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + b.norm())
}

/// A point well inside the strip |Im z| < Im ω″.
fn strip_point() -> impl Strategy<Value = C64> {
    let w = make_params(0.8).unwrap().w();
    (-3.0..3.0f64, -0.6 * w..0.6 * w).prop_map(|(re, im)| C64::new(re, im))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn params_relations_hold_for_any_scale(b in 0.2..5.0f64) {
        let p = make_params(b).unwrap();
        prop_assert!(p.omega.im > 0.0 && p.omega_prime.im > 0.0);
        prop_assert!((p.omega * p.omega_prime + 0.25).norm() < 1e-15);
        let beta = PI / 12.0 * (p.omega / p.omega_prime + p.omega_prime / p.omega);
        prop_assert!(rel(p.beta, beta) <= 1e-14);
        prop_assert!(close(p.q, (I * PI * p.omega_prime / p.omega).exp(), 1e-15));
        prop_assert!(close(p.q_tilde, (I * PI * p.omega / p.omega_prime).exp(), 1e-15));
    }

    #[test]
    fn swap_is_an_involution_fixing_beta_and_omega_dp(b in 0.2..5.0f64) {
        let p = make_params(b).unwrap();
        let s = swap_omegas(&p);
        let back = swap_omegas(&s);
        prop_assert!((back.b - p.b).abs() <= 1e-15 * p.b);
        prop_assert_eq!(back.omega, p.omega);
        prop_assert_eq!(back.omega_prime, p.omega_prime);
        prop_assert!(close(s.beta, p.beta, 1e-15));
        prop_assert!(close(s.omega_dp, p.omega_dp, 1e-15));
    }

    #[test]
    fn inverse_scale_is_the_swap(b in 0.2..5.0f64) {
        let s = swap_omegas(&make_params(b).unwrap());
        let inv = make_params(1.0 / b).unwrap();
        prop_assert!(close(s.omega, inv.omega, 1e-15));
        prop_assert!(close(s.omega_prime, inv.omega_prime, 1e-15));
        prop_assert!(close(s.beta, inv.beta, 1e-15));
        prop_assert!(close(s.q, inv.q, 1e-14));
    }

    #[test]
    fn gamma_difference_equations(z in strip_point()) {
        let ev = evaluator();
        let p = ev.params();
        let e1 = 1.0 + (-I * PI * z / p.omega).exp();
        let e2 = 1.0 + (-I * PI * z / p.omega_prime).exp();
        prop_assert!(rel(ev.gamma(z + p.omega_prime).unwrap() / ev.gamma(z - p.omega_prime).unwrap(), e1) <= 1e-8);
        prop_assert!(rel(ev.gamma(z + p.omega).unwrap() / ev.gamma(z - p.omega).unwrap(), e2) <= 1e-8);
    }

    #[test]
    fn gamma_reflection(z in strip_point()) {
        let ev = evaluator();
        let p = ev.params();
        let v = ev.gamma(z).unwrap() * ev.gamma(-z).unwrap() * (-I * (p.beta + PI * z * z)).exp();
        prop_assert!((v - 1.0).norm() <= 1e-8, "γ(z)γ(−z)e^(−iβ−iπz²) = {}", v);
    }

    #[test]
    fn gamma_is_unimodular_far_out_on_the_real_line(x in 5.0..12.0f64, sign in prop::bool::ANY) {
        let x = if sign { x } else { -x };
        let g = evaluator().gamma(C64::new(x, 0.0)).unwrap();
        prop_assert!((g.norm() - 1.0).abs() <= 1e-10, "|γ({})| = {}", x, g.norm());
    }

    #[test]
    fn gamma_and_d_are_invariant_under_the_swap(z in strip_point(), a in -0.5..0.5f64) {
        let (ev, sw) = (evaluator(), swapped_evaluator());
        prop_assert!(rel(sw.gamma(z).unwrap(), ev.gamma(z).unwrap()) <= 1e-10);
        let zr = C64::new(z.re, 0.0);
        let a = C64::new(a, 0.0);
        prop_assert!(rel(sw.d(a, zr).unwrap(), ev.d(a, zr).unwrap()) <= 1e-10);
    }

    #[test]
    fn d_is_even_and_inverted_by_negating_a(a in -0.5..0.5f64, z in -3.0..3.0f64) {
        let ev = evaluator();
        let (a, z) = (C64::new(a, 0.0), C64::new(z, 0.0));
        let d = ev.d(a, z).unwrap();
        prop_assert!(rel(ev.d(a, -z).unwrap(), d) <= 1e-8);
        prop_assert!((d * ev.d(-a, z).unwrap() - 1.0).norm() <= 1e-8);
    }

    #[test]
    fn d_difference_equations(a in -0.5..0.5f64, z in -2.0..2.0f64) {
        let ev = evaluator();
        let p = ev.params();
        let (a, z) = (C64::new(a, 0.0), C64::new(z, 0.0));
        for (step, period) in [(p.omega_prime, p.omega), (p.omega, p.omega_prime)] {
            let lhs = ev.d(a, z - step).unwrap() / ev.d(a, z + step).unwrap();
            let rhs = (PI / (2.0 * period) * (z - a)).cos() / (PI / (2.0 * period) * (z + a)).cos();
            prop_assert!(rel(lhs, rhs) <= 1e-8);
        }
    }
}

fn gaussian() -> impl Strategy<Value = State> {
    (-3.0..-0.5f64, -0.5..0.5f64, -1.0..1.0f64, -0.5..0.5f64).prop_map(|(ar, ai, br, bi)| {
        make_gaussian(&[C64::new(ar, ai)], &[C64::new(br, bi)]).unwrap()
    })
}

fn complex(range: f64) -> impl Strategy<Value = C64> {
    (-range..range, -range..range).prop_map(|(re, im)| C64::new(re, im))
}

proptest! {
    #[test]
    fn evaluation_is_linear(a in gaussian(), b in gaussian(), c in complex(2.0), x in complex(1.5)) {
        let mut ctx = EvalCtx::new(false);
        let (va, vb) = (ctx.eval(&a, &[x]).unwrap(), ctx.eval(&b, &[x]).unwrap());
        let sum = ctx.eval(&a.add(&b).unwrap(), &[x]).unwrap();
        prop_assert!(close(sum, va + vb, 1e-14));
        let scaled = ctx.eval(&a.scale(c), &[x]).unwrap();
        prop_assert!(close(scaled, c * va, 1e-14));
    }

    #[test]
    fn shifts_compose(a in gaussian(), s in complex(0.8), t in complex(0.8), x in complex(1.0)) {
        let mut ctx = EvalCtx::new(false);
        let twice = a.shift(0, s).unwrap().shift(0, t).unwrap();
        let once = a.shift(0, s + t).unwrap();
        let (u, v) = (ctx.eval(&twice, &[x]).unwrap(), ctx.eval(&once, &[x]).unwrap());
        prop_assert!(close(u, v, 1e-14), "{} vs {}", u, v);
    }

    #[test]
    fn memoization_does_not_change_values(a in gaussian(), b in gaussian(), s in complex(0.8), x in complex(1.0)) {
        let tree = a.shift(0, s).unwrap().add(&b.scale(C64::new(0.5, -1.0))).unwrap();
        let plain = EvalCtx::new(false).eval(&tree, &[x]).unwrap();
        let mut memo = EvalCtx::new(true);
        let first = memo.eval(&tree, &[x]).unwrap();
        let again = memo.eval(&tree, &[x]).unwrap();
        prop_assert_eq!(plain.re.to_bits(), first.re.to_bits());
        prop_assert_eq!(plain.im.to_bits(), first.im.to_bits());
        prop_assert_eq!(first, again);
    }
}

const NV: usize = 2;

/// Small differential operators in two variables with integer coefficients.
fn diff_op() -> impl Strategy<Value = ExactDiffOp> {
    let atom = (0..4usize, 0..NV, -3i64..=3).prop_map(|(kind, var, k)| {
        let base = match kind {
            0 => ExactDiffOp::z(NV, var),
            1 => ExactDiffOp::d(NV, var),
            2 => ExactDiffOp::identity(NV),
            _ => ExactDiffOp::z(NV, var).compose(&ExactDiffOp::d(NV, 1 - var)),
        };
        base.scale(&coef(k))
    });
    prop::collection::vec(atom, 1..4).prop_map(|atoms| {
        atoms.iter().skip(1).fold(atoms[0].clone(), |acc, a| acc.add(a))
    })
}

fn poly() -> impl Strategy<Value = ExactPoly> {
    prop::collection::vec(((0u32..3, 0u32..3), -4i64..=4), 1..4).prop_map(|terms| {
        terms.iter().fold(ExactPoly::zero(NV), |acc, ((i, j), k)| acc.add(&ExactPoly::monomial(&[*i, *j]).scale(&coef(*k))))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composition_is_associative(a in diff_op(), b in diff_op(), c in diff_op()) {
        prop_assert_eq!(a.compose(&b).compose(&c), a.compose(&b.compose(&c)));
    }

    #[test]
    fn composition_matches_successive_application(a in diff_op(), b in diff_op(), p in poly()) {
        prop_assert_eq!(a.compose(&b).apply(&p), a.apply(&b.apply(&p)));
    }

    #[test]
    fn canonical_commutator(i in 0..NV, j in 0..NV, p in poly()) {
        let (d, z) = (ExactDiffOp::d(NV, i), ExactDiffOp::z(NV, j));
        let comm = d.compose(&z).sub(&z.compose(&d));
        let expected = if i == j { p.clone() } else { ExactPoly::zero(NV) };
        prop_assert_eq!(comm.apply(&p), expected);
    }

    #[test]
    fn substitutions_invert(p in poly(), sign in prop::sample::select(vec![-1i64, 1])) {
        prop_assert_eq!(p.substitute(0, 1, sign).substitute(0, 1, -sign), p.clone());
        prop_assert_eq!(p.substitute(1, 0, sign).substitute(1, 0, -sign), p);
    }

    #[test]
    fn substitution_is_a_ring_map(p in poly(), q in poly()) {
        prop_assert_eq!(p.mul(&q).substitute(0, 1, 1), p.substitute(0, 1, 1).mul(&q.substitute(0, 1, 1)));
    }
}

proptest! {
    #[test]
    fn sorted_series_are_non_increasing(mut xs in prop::collection::vec(1e-10..1.0f64, 1..8)) {
        xs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        prop_assert!(non_increasing(&xs));
        prop_assert_eq!(monotone_violation(&xs), 0.0);
    }

    #[test]
    fn a_clear_rise_is_caught(xs in prop::collection::vec(1e-6..1.0f64, 1..6), k in 0usize..6) {
        let k = k % xs.len();
        let mut ys = xs.clone();
        ys.insert(k + 1, 2.0 * xs[k]);
        prop_assert!(!non_increasing(&ys));
        prop_assert!(monotone_violation(&ys) > 0.0);
    }
}
