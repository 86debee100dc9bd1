//! Shared machinery for comparing two operators on the Gaussian test panel.

use crate::error::Result;
use crate::opalg::{Engine, FDOperator, OperatorMatrix};
use crate::params::C64;
use crate::states::{make_gaussian, relative_l2, EvalCtx, State};

/// The per-coordinate Gaussians `e^{αx² + βx}` of the test panel.
pub const PANEL: [(f64, (f64, f64)); 3] = [(-std::f64::consts::PI, (0.0, 0.0)), (-2.0, (0.3, 0.1)), (-1.5, (-0.4, 0.0))];

/// Three product states over `n` coordinates; state `k` uses panel entry `(k + i) mod 3`
/// on coordinate `i`, so every coordinate sees every Gaussian.
pub fn panel(n: usize) -> Vec<State> {
    (0..3)
        .map(|k| {
            let (alphas, betas): (Vec<C64>, Vec<C64>) = (0..n)
                .map(|i| {
                    let (a, (br, bi)) = PANEL[(k + i) % 3];
                    (C64::new(a, 0.0), C64::new(br, bi))
                })
                .unzip();
            make_gaussian(&alphas, &betas).expect("panel exponents decay")
        })
        .collect()
}

/// Real sample points: a uniform tensor lattice on `[−half, half]^n`.
pub fn sample_points(n: usize, per_axis: usize, half: f64) -> Vec<Vec<C64>> {
    let ax: Vec<f64> = (0..per_axis)
        .map(|k| -half + 2.0 * half * k as f64 / (per_axis - 1) as f64)
        .collect();
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                ax.iter().map(move |x| {
                    let mut q = p.clone();
                    q.push(C64::new(*x, 0.0));
                    q
                })
            })
            .collect();
    }
    out
}

/// Default sample lattice for `n` coordinates.
pub fn default_points(n: usize) -> Vec<Vec<C64>> {
    match n {
        1 => sample_points(1, 41, 4.0),
        2 => sample_points(2, 13, 3.0),
        _ => sample_points(n, 7, 2.5),
    }
}

pub fn sample(s: &State, points: &[Vec<C64>]) -> Result<Vec<C64>> {
    if let Some(g) = s.gauss_sum() {
        return Ok(points.iter().map(|x| g.eval(x)).collect());
    }
    let mut ctx = EvalCtx::new(true);
    points.iter().map(|x| ctx.eval_checked(s, x)).collect()
}

/// Largest relative L² distance between `lhs Φ` and `rhs Φ` over the panel.
pub fn op_residual(engine: &Engine, lhs: &FDOperator, rhs: &FDOperator, n: usize) -> Result<f64> {
    op_residual_at(engine, lhs, rhs, &panel(n), &default_points(n))
}

pub fn op_residual_at(
    engine: &Engine,
    lhs: &FDOperator,
    rhs: &FDOperator,
    states: &[State],
    points: &[Vec<C64>],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in states {
        let a = sample(&engine.apply(lhs, s)?, points)?;
        let b = sample(&engine.apply(rhs, s)?, points)?;
        worst = worst.max(relative_l2(&a, &b));
    }
    Ok(worst)
}

/// Entrywise [`op_residual`], maximized over the four entries.
pub fn matrix_residual(engine: &Engine, lhs: &OperatorMatrix, rhs: &OperatorMatrix, n: usize) -> Result<f64> {
    Ok(matrix_entry_residuals(engine, lhs, rhs, n)?.into_iter().fold(0.0, f64::max))
}

/// Residuals of the four entries in row-major order.
pub fn matrix_entry_residuals(
    engine: &Engine,
    lhs: &OperatorMatrix,
    rhs: &OperatorMatrix,
    n: usize,
) -> Result<[f64; 4]> {
    let states = panel(n);
    let points = default_points(n);
    let mut out = [0.0; 4];
    for (k, r) in out.iter_mut().enumerate() {
        let (i, j) = (k / 2, k % 2);
        *r = op_residual_at(engine, lhs.get(i, j), rhs.get(i, j), &states, &points)?;
    }
    Ok(out)
}

/// Relative L² distance with all four entries stacked into one vector; handles
/// entries that vanish identically on one side.
pub fn matrix_stacked_residual(engine: &Engine, lhs: &OperatorMatrix, rhs: &OperatorMatrix, n: usize) -> Result<f64> {
    let points = default_points(n);
    let mut worst: f64 = 0.0;
    for s in panel(n) {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for i in 0..2 {
            for j in 0..2 {
                a.extend(sample(&engine.apply(lhs.get(i, j), &s)?, &points)?);
                b.extend(sample(&engine.apply(rhs.get(i, j), &s)?, &points)?);
            }
        }
        worst = worst.max(relative_l2(&a, &b));
    }
    Ok(worst)
}

/// Residuals below this level are treated as converged: a sweep that reaches it
/// cannot decrease further in double precision.
pub const SWEEP_FLOOR: f64 = 1e-12;

/// True when each entry is no larger than its predecessor, or both sit below
/// [`SWEEP_FLOOR`].
pub fn decreasing_to_floor(values: &[f64]) -> bool {
    values
        .windows(2)
        .all(|w| w[1] <= w[0] || (w[0] <= SWEEP_FLOOR && w[1] <= SWEEP_FLOOR))
}
