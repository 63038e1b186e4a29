//! Bounded damped Gauss-Newton (Levenberg-Marquardt) least squares.

use nalgebra::{DMatrix, DVector};

use super::models::CurveModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub const FREE: Bounds = Bounds {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn at_least(lower: f64) -> Self {
        Bounds {
            lower,
            upper: f64::INFINITY,
        }
    }

    pub fn between(lower: f64, upper: f64) -> Self {
        Bounds { lower, upper }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.lower).min(self.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqOptions {
    pub max_iterations: usize,
    /// Stop when the scaled gradient falls below this.
    pub gradient_tol: f64,
    /// Stop when a step changes the parameters by less than this (relative).
    pub step_tol: f64,
    /// Relative forward-difference step for the Jacobian.
    pub jacobian_step: f64,
    /// A run counts as converged only if its final scaled gradient is below this.
    pub converged_gradient_tol: f64,
}

impl Default for LsqOptions {
    fn default() -> Self {
        LsqOptions {
            max_iterations: 500,
            gradient_tol: 1e-10,
            step_tol: 1e-12,
            jacobian_step: 1e-6,
            converged_gradient_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Gradient,
    Step,
    MaxIterations,
    /// Damping grew without finding a lower residual.
    NoProgress,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Gradient => "gradient",
            StopReason::Step => "step",
            StopReason::MaxIterations => "max-iterations",
            StopReason::NoProgress => "no-progress",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsqSolution {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Sum of squared (weighted) residuals.
    pub rss: f64,
    pub initial_rss: f64,
    /// Trial steps taken.
    pub iterations: usize,
    pub stop: StopReason,
    /// Largest scaled gradient component at the solution:
    /// `max_j |(Jᵀr)_j| / (‖J_j‖·‖r‖)`, bound-active components excluded,
    /// with `‖r‖` floored at `√ε·‖r₀‖`.
    pub gradient_norm: f64,
    pub converged: bool,
    /// 1σ uncertainties from `s²·(JᵀJ)⁺`; infinite along unidentifiable directions.
    pub uncertainties: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub rank_deficient: bool,
}

/// Relative-step floor so that parameters at exactly zero still get a usable step.
const STEP_FLOOR: f64 = 1.0;

/// Minimizes `Σ rᵢ(p)²` for a residual function writing `m` values.
pub fn minimize<F>(mut residual: F, m: usize, p0: &[f64], bounds: &[Bounds], opts: &LsqOptions) -> Result<LsqSolution>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = p0.len();
    if bounds.len() != n {
        return Err(Error::Precondition(format!("{} bounds for {n} parameters", bounds.len())));
    }
    if n == 0 || m == 0 {
        return Err(Error::Precondition("least squares needs parameters and data".into()));
    }
    for (j, (&p, b)) in p0.iter().zip(bounds).enumerate() {
        if !p.is_finite() || !b.contains(p) {
            return Err(Error::Precondition(format!(
                "initial parameter {j} = {p} outside [{}, {}]",
                b.lower, b.upper
            )));
        }
    }

    let eval = |residual: &mut F, p: &[f64], r: &mut [f64]| -> Result<f64> {
        residual(p, r);
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { params: p.to_vec() });
        }
        Ok(r.iter().map(|v| v * v).sum())
    };

    let mut p = p0.to_vec();
    let mut r = vec![0.0; m];
    let mut rss = eval(&mut residual, &p, &mut r)?;
    let initial_rss = rss;
    let r0_norm = rss.sqrt();
    let mut trial_r = vec![0.0; m];
    let mut lambda = 0.0f64;
    let mut iterations = 0;
    let mut jac = jacobian(&mut residual, &p, &r, bounds, opts.jacobian_step, m)?;
    let stop;

    loop {
        let g = jac.tr_mul(&DVector::from_column_slice(&r));
        if scaled_gradient(&jac, &g, &p, bounds, rss.sqrt(), r0_norm) < opts.gradient_tol {
            stop = StopReason::Gradient;
            break;
        }
        if iterations >= opts.max_iterations {
            stop = StopReason::MaxIterations;
            break;
        }
        iterations += 1;

        let mut free_jac = jac.clone();
        for j in 0..n {
            if pinned(p[j], g[j], &bounds[j]) {
                free_jac.column_mut(j).fill(0.0);
            }
        }
        let delta = damped_step(&free_jac, &r, lambda);
        let trial: Vec<f64> = p
            .iter()
            .zip(delta.iter())
            .zip(bounds)
            .map(|((&pj, &dj), b)| b.clamp(pj + dj))
            .collect();
        let step_norm = norm(trial.iter().zip(&p).map(|(a, b)| a - b));
        let small_step = step_norm <= opts.step_tol * (norm(p.iter().copied()) + opts.step_tol);

        let trial_rss = eval(&mut residual, &trial, &mut trial_r)?;
        if trial_rss < rss {
            p = trial;
            std::mem::swap(&mut r, &mut trial_r);
            rss = trial_rss;
            lambda /= 10.0;
            if lambda < 1e-12 {
                lambda = 0.0;
            }
            jac = jacobian(&mut residual, &p, &r, bounds, opts.jacobian_step, m)?;
            if small_step {
                stop = StopReason::Step;
                break;
            }
        } else {
            if small_step {
                stop = StopReason::Step;
                break;
            }
            lambda = if lambda == 0.0 { 1e-3 } else { lambda * 10.0 };
            if lambda > 1e20 {
                stop = StopReason::NoProgress;
                break;
            }
        }
    }

    let g = jac.tr_mul(&DVector::from_column_slice(&r));
    let gradient_norm = scaled_gradient(&jac, &g, &p, bounds, rss.sqrt(), r0_norm);
    let converged =
        matches!(stop, StopReason::Gradient | StopReason::Step) && gradient_norm < opts.converged_gradient_tol;
    let dof = m.saturating_sub(n).max(1);
    let (covariance, rank_deficient) = covariance(&jac, rss / dof as f64);
    let uncertainties = (0..n).map(|j| covariance[(j, j)].max(0.0).sqrt()).collect();
    Ok(LsqSolution {
        params: p,
        residuals: r,
        rss,
        initial_rss,
        iterations,
        stop,
        gradient_norm,
        converged,
        uncertainties,
        covariance,
        rank_deficient,
    })
}

/// Fits `model` to `y` with per-point weights `w` (residual `√wᵢ·(f_i − yᵢ)`),
/// using the bounds declared by the model.
pub fn least_squares(
    model: &dyn CurveModel,
    p0: &[f64],
    y: &[f64],
    w: &[f64],
    opts: &LsqOptions,
) -> Result<LsqSolution> {
    let m = model.n_points();
    if y.len() != m || w.len() != m {
        return Err(Error::Precondition(format!(
            "model has {m} points, data {} and weights {}",
            y.len(),
            w.len()
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Precondition(format!("data point {i} is not finite")));
    }
    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let bounds: Vec<Bounds> = model.params().iter().map(|s| s.bounds).collect();
    minimize(
        |p, r| {
            model.eval(p, r);
            for ((ri, yi), si) in r.iter_mut().zip(y).zip(&sw) {
                *ri = (*ri - yi) * si;
            }
        },
        m,
        p0,
        &bounds,
        opts,
    )
}

fn norm(it: impl Iterator<Item = f64>) -> f64 {
    it.map(|v| v * v).sum::<f64>().sqrt()
}

fn jacobian<F>(residual: &mut F, p: &[f64], r: &[f64], bounds: &[Bounds], rel: f64, m: usize) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = p.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut q = p.to_vec();
    let mut rq = vec![0.0; m];
    for j in 0..n {
        let h = rel * p[j].abs().max(STEP_FLOOR);
        q[j] = if p[j] + h <= bounds[j].upper { p[j] + h } else { p[j] - h };
        let h = q[j] - p[j];
        residual(&q, &mut rq);
        if rq.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { params: q });
        }
        for i in 0..m {
            jac[(i, j)] = (rq[i] - r[i]) / h;
        }
        q[j] = p[j];
    }
    Ok(jac)
}

/// Forward-difference Jacobian of a model's values (no data, no weights).
pub fn model_jacobian(model: &dyn CurveModel, p: &[f64], rel: f64) -> DMatrix<f64> {
    let m = model.n_points();
    let mut f0 = vec![0.0; m];
    model.eval(p, &mut f0);
    let bounds: Vec<Bounds> = model.params().iter().map(|s| s.bounds).collect();
    jacobian(&mut |q: &[f64], out: &mut [f64]| model.eval(q, out), p, &f0, &bounds, rel, m)
        .unwrap_or_else(|_| DMatrix::from_element(m, p.len(), f64::NAN))
}

/// Central-difference Jacobian of a model's values.
pub fn model_jacobian_central(model: &dyn CurveModel, p: &[f64], rel: f64) -> DMatrix<f64> {
    let m = model.n_points();
    let mut jac = DMatrix::zeros(m, p.len());
    let (mut plus, mut minus) = (vec![0.0; m], vec![0.0; m]);
    let mut q = p.to_vec();
    for j in 0..p.len() {
        let h = rel * p[j].abs().max(STEP_FLOOR);
        q[j] = p[j] + h;
        model.eval(&q, &mut plus);
        q[j] = p[j] - h;
        model.eval(&q, &mut minus);
        q[j] = p[j];
        for i in 0..m {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

/// At a bound with the descent direction pointing out of the box.
fn pinned(p: f64, g: f64, b: &Bounds) -> bool {
    (p <= b.lower && g > 0.0) || (p >= b.upper && g < 0.0)
}

fn scaled_gradient(jac: &DMatrix<f64>, g: &DVector<f64>, p: &[f64], bounds: &[Bounds], r_norm: f64, r0_norm: f64) -> f64 {
    if r0_norm == 0.0 {
        return 0.0;
    }
    // Residuals at roundoff level: measure against the initial residual instead.
    let denom_r = r_norm.max(f64::EPSILON.sqrt() * r0_norm);
    let mut worst = 0.0f64;
    for j in 0..p.len() {
        let gj = g[j];
        if pinned(p[j], gj, &bounds[j]) {
            continue;
        }
        let cn = jac.column(j).norm();
        if cn > 0.0 {
            worst = worst.max(gj.abs() / (cn * denom_r));
        }
    }
    worst
}

/// Solves `[J; √λ·D]·δ = −[r; 0]` by SVD, `D = diag(‖J_j‖)`.
fn damped_step(jac: &DMatrix<f64>, r: &[f64], lambda: f64) -> DVector<f64> {
    let (m, n) = jac.shape();
    let rhs = DVector::from_iterator(m, r.iter().map(|v| -v));
    let (a, b) = if lambda > 0.0 {
        let mut a = DMatrix::zeros(m + n, n);
        a.view_mut((0, 0), (m, n)).copy_from(jac);
        for j in 0..n {
            a[(m + j, j)] = (lambda.sqrt()) * jac.column(j).norm();
        }
        let mut b = DVector::zeros(m + n);
        b.rows_mut(0, m).copy_from(&rhs);
        (a, b)
    } else {
        (jac.clone(), rhs)
    };
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(&b, (smax * 1e-13).max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DVector::zeros(n))
}

/// `s²·(JᵀJ)⁺` computed in column-scaled coordinates. Returns whether any
/// direction was dropped as unidentifiable; parameters along such directions
/// get infinite variance.
fn covariance(jac: &DMatrix<f64>, s2: f64) -> (DMatrix<f64>, bool) {
    let n = jac.ncols();
    let scale: Vec<f64> = (0..n).map(|j| jac.column(j).norm()).collect();
    let mut cov = DMatrix::zeros(n, n);
    let mut dropped = vec![false; n];
    let mut rank_deficient = false;
    for j in 0..n {
        if scale[j] == 0.0 {
            dropped[j] = true;
            rank_deficient = true;
        }
    }
    let live: Vec<usize> = (0..n).filter(|&j| !dropped[j]).collect();
    if !live.is_empty() {
        let k = live.len();
        let mut js = DMatrix::zeros(jac.nrows(), k);
        for (c, &j) in live.iter().enumerate() {
            js.set_column(c, &(jac.column(j) / scale[j]));
        }
        let eig = js.tr_mul(&js).symmetric_eigen();
        let emax = eig.eigenvalues.max();
        let mut pinv = DMatrix::zeros(k, k);
        for (i, &ev) in eig.eigenvalues.iter().enumerate() {
            let v = eig.eigenvectors.column(i);
            if ev > 1e-12 * emax {
                pinv += (v * v.transpose()) / ev;
            } else {
                rank_deficient = true;
                for (c, &j) in live.iter().enumerate() {
                    if v[c].abs() > 1e-6 {
                        dropped[j] = true;
                    }
                }
            }
        }
        for (a, &ja) in live.iter().enumerate() {
            for (b, &jb) in live.iter().enumerate() {
                cov[(ja, jb)] = s2 * pinv[(a, b)] / (scale[ja] * scale[jb]);
            }
        }
    }
    for j in 0..n {
        if dropped[j] {
            cov[(j, j)] = f64::INFINITY;
        }
    }
    (cov, rank_deficient)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_model_solves_in_one_step() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
        let run = |max_iterations| {
            minimize(
                |p, r| {
                    for ((ri, x), y) in r.iter_mut().zip(&xs).zip(&ys) {
                        *ri = p[0] + p[1] * x - y;
                    }
                },
                xs.len(),
                &[0.0, 0.0],
                &[Bounds::FREE; 2],
                &LsqOptions {
                    max_iterations,
                    ..LsqOptions::default()
                },
            )
            .unwrap()
        };
        let one = run(1);
        assert_eq!(one.iterations, 1);
        assert!((one.params[0] - 3.0).abs() < 1e-8 && (one.params[1] + 2.0).abs() < 1e-8, "{one:?}");
        let full = run(500);
        assert!(full.converged, "{full:?}");
        assert!(full.rss <= one.rss);
    }

    #[test]
    fn rosenbrock_valley() {
        let sol = minimize(
            |p, r| {
                r[0] = 10.0 * (p[1] - p[0] * p[0]);
                r[1] = 1.0 - p[0];
            },
            2,
            &[-1.2, 1.0],
            &[Bounds::FREE; 2],
            &LsqOptions::default(),
        )
        .unwrap();
        assert!((sol.params[0] - 1.0).abs() < 1e-6, "{:?}", sol);
        assert!((sol.params[1] - 1.0).abs() < 1e-6);
        assert!(sol.converged);
        assert!(sol.rss <= sol.initial_rss);
    }

    #[test]
    fn nan_names_the_parameters() {
        let err = minimize(
            |p, r| r[0] = (p[0] - 5.0).sqrt(),
            1,
            &[1.0],
            &[Bounds::FREE],
            &LsqOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite { ref params } if params == &vec![1.0]));
    }

    #[test]
    fn bounds_hold() {
        let sol = minimize(
            |p, r| r[0] = p[0] + 3.0,
            1,
            &[1.0],
            &[Bounds::at_least(0.0)],
            &LsqOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.params[0], 0.0);
        assert!(sol.converged, "{sol:?}");
    }

    #[test]
    fn unidentifiable_parameter_has_infinite_uncertainty() {
        let sol = minimize(
            |p, r| {
                for (i, ri) in r.iter_mut().enumerate() {
                    *ri = p[0] + 0.0 * p[1] - i as f64;
                }
            },
            5,
            &[0.0, 1.0],
            &[Bounds::FREE; 2],
            &LsqOptions::default(),
        )
        .unwrap();
        assert!(sol.rank_deficient);
        assert!(sol.uncertainties[1].is_infinite());
        assert!(sol.uncertainties[0].is_finite());
    }
}
