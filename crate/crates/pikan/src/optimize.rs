//! Limited-memory BFGS with a strong Wolfe line search.
//!
//! The objective is supplied as a closure returning loss and gradient for a
//! parameter vector; evaluation order is fixed, so repeated runs from the
//! same starting point produce bit-identical iterates.

use crate::error::{PikanError, Result};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbfgsConfig {
    /// Number of curvature pairs kept for the two-loop recursion.
    pub history: usize,
    /// Initial trial step length on the very first iteration.
    pub lr: f64,
    /// Line-search evaluation budget per outer step.
    pub max_inner: usize,
    /// Sufficient-decrease constant (Armijo).
    pub c1: f64,
    /// Curvature constant (strong Wolfe).
    pub c2: f64,
    /// Outer iteration cap.
    pub epochs: usize,
    /// Stop when the relative loss change between accepted steps falls
    /// below this.
    pub tol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            history: 10,
            lr: 0.001,
            max_inner: 20,
            c1: 1e-4,
            c2: 0.9,
            epochs: 1000,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimStep {
    pub step: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub theta: Vec<f64>,
    pub history: Vec<OptimStep>,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn check_finite(loss: f64, grad: &[f64], step: usize, theta: &[f64]) -> Result<()> {
    let bad = !loss.is_finite() || grad.iter().any(|g| !g.is_finite());
    if bad {
        return Err(PikanError::NonFinite {
            steps: step,
            theta_norm: dot(theta, theta).sqrt(),
            reason: if loss.is_finite() {
                "non-finite gradient component".into()
            } else {
                format!("loss = {loss}")
            },
        });
    }
    Ok(())
}

/// Cubic minimizer of an interpolant through (a, fa, ga) and (b, fb, gb);
/// falls back to bisection when the cubic is degenerate or lands outside.
fn cubic_minimizer(a: f64, fa: f64, ga: f64, b: f64, fb: f64, gb: f64) -> f64 {
    let d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - ga * gb;
    let mid = 0.5 * (a + b);
    if disc < 0.0 {
        return mid;
    }
    let d2 = disc.sqrt() * (b - a).signum();
    let t = b - (b - a) * ((gb + d2 - d1) / (gb - ga + 2.0 * d2));
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    // keep a safe margin off the bracket ends so progress is guaranteed
    let margin = 0.1 * (hi - lo);
    if !t.is_finite() || t <= lo + margin || t >= hi - margin {
        mid
    } else {
        t
    }
}

struct LineEval {
    alpha: f64,
    loss: f64,
    grad: Vec<f64>,
    dphi: f64,
}

/// Strong Wolfe line search (bracket + zoom with cubic interpolation)
/// along `dir` from `theta0`. Returns the accepted evaluation, or `None`
/// when the budget is exhausted without satisfying both conditions.
fn wolfe_search<F>(
    objective: &mut F,
    theta0: &[f64],
    dir: &[f64],
    f0: f64,
    dphi0: f64,
    alpha_init: f64,
    cfg: &LbfgsConfig,
    outer_step: usize,
) -> Result<Option<LineEval>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    debug_assert!(dphi0 < 0.0);
    let mut probe = |alpha: f64| -> Result<LineEval> {
        let theta: Vec<f64> = theta0.iter().zip(dir).map(|(t, d)| t + alpha * d).collect();
        let (loss, grad) = objective(&theta)?;
        check_finite(loss, &grad, outer_step, &theta)?;
        let dphi = dot(&grad, dir);
        Ok(LineEval { alpha, loss, grad, dphi })
    };
    let wolfe_ok = |e: &LineEval| {
        e.loss <= f0 + cfg.c1 * e.alpha * dphi0 && e.dphi.abs() <= cfg.c2 * dphi0.abs()
    };

    let mut budget = cfg.max_inner;
    let mut spend = |probe: &mut dyn FnMut(f64) -> Result<LineEval>,
                     alpha: f64|
     -> Result<Option<LineEval>> {
        if budget == 0 {
            return Ok(None);
        }
        budget -= 1;
        probe(alpha).map(Some)
    };

    // bracketing phase
    let mut prev = LineEval { alpha: 0.0, loss: f0, grad: vec![], dphi: dphi0 };
    let mut alpha = alpha_init;
    let (mut lo, mut hi) = loop {
        let Some(cur) = spend(&mut probe, alpha)? else {
            return Ok(None);
        };
        if wolfe_ok(&cur) {
            return Ok(Some(cur));
        }
        if cur.loss > f0 + cfg.c1 * cur.alpha * dphi0 || cur.loss >= prev.loss {
            break (prev, cur);
        }
        if cur.dphi >= 0.0 {
            break (cur, prev);
        }
        alpha = cur.alpha * 2.0;
        prev = cur;
    };

    // zoom phase: lo is the side satisfying sufficient decrease with the
    // lower function value
    loop {
        let alpha_j = cubic_minimizer(lo.alpha, lo.loss, lo.dphi, hi.alpha, hi.loss, hi.dphi);
        let Some(cur) = spend(&mut probe, alpha_j)? else {
            // accept the best sufficient-decrease point found, if any
            return Ok(if lo.alpha > 0.0 { Some(lo) } else { None });
        };
        if wolfe_ok(&cur) {
            return Ok(Some(cur));
        }
        if cur.loss > f0 + cfg.c1 * cur.alpha * dphi0 || cur.loss >= lo.loss {
            hi = cur;
        } else {
            if cur.dphi * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
        if (hi.alpha - lo.alpha).abs() < 1e-16 * lo.alpha.abs().max(1.0) {
            return Ok(if lo.alpha > 0.0 { Some(lo) } else { None });
        }
    }
}

/// Minimizes `objective`, reporting loss/gradient history per outer step.
/// `callback` fires after every accepted step (for logging or snapshots).
pub fn minimize<F, C>(
    mut objective: F,
    theta0: &[f64],
    cfg: &LbfgsConfig,
    mut callback: C,
) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    C: FnMut(&OptimStep, &[f64]),
{
    let n = theta0.len();
    let mut theta = theta0.to_vec();
    let (mut loss, mut grad) = objective(&theta)?;
    check_finite(loss, &grad, 0, &theta)?;

    let mut s_hist: VecDeque<Vec<f64>> = VecDeque::with_capacity(cfg.history);
    let mut y_hist: VecDeque<Vec<f64>> = VecDeque::with_capacity(cfg.history);
    let mut rho_hist: VecDeque<f64> = VecDeque::with_capacity(cfg.history);
    let mut history = Vec::new();
    // an infinite tolerance is satisfied by any step, so take none
    let mut converged = cfg.tol.is_infinite();

    for step in 0..cfg.epochs {
        if converged {
            break;
        }

        // two-loop recursion for the search direction
        let mut q = grad.clone();
        let m = s_hist.len();
        let mut alphas = vec![0.0; m];
        for k in (0..m).rev() {
            alphas[k] = rho_hist[k] * dot(&s_hist[k], &q);
            for (qi, yi) in q.iter_mut().zip(&y_hist[k]) {
                *qi -= alphas[k] * yi;
            }
        }
        if m > 0 {
            let gamma = dot(&s_hist[m - 1], &y_hist[m - 1]) / dot(&y_hist[m - 1], &y_hist[m - 1]);
            for qi in q.iter_mut() {
                *qi *= gamma;
            }
        }
        for k in 0..m {
            let beta = rho_hist[k] * dot(&y_hist[k], &q);
            for (qi, si) in q.iter_mut().zip(&s_hist[k]) {
                *qi += (alphas[k] - beta) * si;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|x| -x).collect();
        let mut dphi0 = dot(&grad, &dir);
        if dphi0 >= 0.0 {
            // defective curvature history; restart from steepest descent
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            dir = grad.iter().map(|g| -g).collect();
            dphi0 = -dot(&grad, &grad);
        }
        if dphi0 == 0.0 {
            converged = true;
            break;
        }

        // first trial: the configured rate before any curvature exists,
        // the natural unit step once the two-loop direction is scaled
        let alpha_init = if s_hist.is_empty() { cfg.lr } else { 1.0 };
        let mut accepted = wolfe_search(
            &mut objective,
            &theta,
            &dir,
            loss,
            dphi0,
            alpha_init,
            cfg,
            step,
        )?;
        if accepted.is_none() && !s_hist.is_empty() {
            // one steepest-descent restart before giving up
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            dir = grad.iter().map(|g| -g).collect();
            dphi0 = -dot(&grad, &grad);
            accepted = wolfe_search(
                &mut objective,
                &theta,
                &dir,
                loss,
                dphi0,
                cfg.lr,
                cfg,
                step,
            )?;
        }
        let Some(acc) = accepted else {
            // line search stalled; report what we have
            break;
        };

        let mut s = vec![0.0; n];
        let mut y = vec![0.0; n];
        for i in 0..n {
            s[i] = acc.alpha * dir[i];
            y[i] = acc.grad[i] - grad[i];
        }
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if s_hist.len() == cfg.history {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
            rho_hist.push_back(1.0 / sy);
            s_hist.push_back(s);
            y_hist.push_back(y);
        }

        for (t, d) in theta.iter_mut().zip(&dir) {
            *t += acc.alpha * d;
        }
        let rel_change = (loss - acc.loss).abs() / loss.abs().max(1.0);
        loss = acc.loss;
        grad = acc.grad;
        let rec = OptimStep { step: step + 1, loss, grad_norm: inf_norm(&grad) };
        callback(&rec, &theta);
        history.push(rec);
        converged = rel_change <= cfg.tol;
    }

    Ok(OptimResult { theta, history, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        // f = sum_i w_i (x_i - c_i)^2 with distinct curvatures
        let c = [1.0, -2.0, 0.5];
        let w = [1.0, 3.0, 10.0];
        let mut f = 0.0;
        let mut g = vec![0.0; 3];
        for i in 0..3 {
            let d = theta[i] - c[i];
            f += w[i] * d * d;
            g[i] = 2.0 * w[i] * d;
        }
        Ok((f, g))
    }

    fn rosenbrock(theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (x, y) = (theta[0], theta[1]);
        let f = (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2);
        let g = vec![
            -2.0 * (1.0 - x) - 400.0 * x * (y - x * x),
            200.0 * (y - x * x),
        ];
        Ok((f, g))
    }

    #[test]
    fn isotropic_quadratic_in_three_steps() {
        // along -grad the one curvature pair recovers the exact inverse
        // Hessian, so the second step is a Newton step
        let a = [1.0, -2.0, 0.5, 3.0];
        let iso = |theta: &[f64]| -> Result<(f64, Vec<f64>)> {
            let mut f = 0.0;
            let mut g = vec![0.0; a.len()];
            for i in 0..a.len() {
                let d = theta[i] - a[i];
                f += d * d;
                g[i] = 2.0 * d;
            }
            Ok((f, g))
        };
        let cfg = LbfgsConfig { epochs: 3, tol: 0.0, ..Default::default() };
        let res = minimize(iso, &[0.0; 4], &cfg, |_, _| {}).unwrap();
        let dist2: f64 = res.theta.iter().zip(&a).map(|(x, y)| (x - y) * (x - y)).sum();
        assert!(dist2 < 1e-10, "still {dist2} away after 3 steps");
    }

    #[test]
    fn anisotropic_quadratic_converges() {
        let cfg = LbfgsConfig { epochs: 15, tol: 1e-10, ..Default::default() };
        let res = minimize(|t| quadratic(t), &[0.0, 0.0, 0.0], &cfg, |_, _| {}).unwrap();
        assert!(res.converged, "gradient norm after 15 steps too large");
        let want = [1.0, -2.0, 0.5];
        for (a, b) in res.theta.iter().zip(&want) {
            assert!((a - b).abs() < 1e-8, "{:?}", res.theta);
        }
    }

    #[test]
    fn rosenbrock_from_standard_start() {
        let cfg = LbfgsConfig { epochs: 100, tol: 0.0, ..Default::default() };
        let mut res = None;
        let r = minimize(
            |t| rosenbrock(t),
            &[-1.2, 1.0],
            &cfg,
            |step, theta| {
                if step.loss < 1e-6 && res.is_none() {
                    res = Some((step.step, theta.to_vec()));
                }
            },
        )
        .unwrap();
        let (steps, theta) = res.unwrap_or((usize::MAX, r.theta.clone()));
        assert!(steps <= 100, "never reached 1e-6 within 100 steps");
        assert!((theta[0] - 1.0).abs() < 1e-2 && (theta[1] - 1.0).abs() < 1e-2);
    }

    #[test]
    fn loss_history_is_monotone_nonincreasing() {
        let cfg = LbfgsConfig { epochs: 50, tol: 0.0, ..Default::default() };
        let res = minimize(|t| rosenbrock(t), &[-1.2, 1.0], &cfg, |_, _| {}).unwrap();
        let mut prev = f64::INFINITY;
        for step in &res.history {
            assert!(step.loss <= prev + 1e-15, "loss rose: {} -> {}", prev, step.loss);
            prev = step.loss;
        }
    }

    #[test]
    fn tolerance_infinity_takes_no_steps() {
        let cfg = LbfgsConfig { tol: f64::INFINITY, ..Default::default() };
        let res = minimize(|t| quadratic(t), &[5.0, 5.0, 5.0], &cfg, |_, _| {}).unwrap();
        assert!(res.converged);
        assert!(res.history.is_empty());
        assert_eq!(res.theta, vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let cfg = LbfgsConfig::default();
        let out = minimize(
            |t: &[f64]| Ok((t[0].ln(), vec![1.0 / t[0]])),
            &[-1.0],
            &cfg,
            |_, _| {},
        );
        match out {
            Err(PikanError::NonFinite { .. }) => {}
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let cfg = LbfgsConfig { epochs: 30, tol: 0.0, ..Default::default() };
        let run = || {
            let mut iterates = Vec::new();
            minimize(
                |t| rosenbrock(t),
                &[-1.2, 1.0],
                &cfg,
                |step, theta| iterates.push((step.loss, theta.to_vec())),
            )
            .unwrap();
            iterates
        };
        let a = run();
        let b = run();
        assert_eq!(a.len(), b.len());
        for ((la, ta), (lb, tb)) in a.iter().zip(&b) {
            assert_eq!(la.to_bits(), lb.to_bits());
            for (x, y) in ta.iter().zip(tb) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn history_limit_is_respected() {
        // just exercises the pruning path on a longer run
        let cfg = LbfgsConfig { history: 3, epochs: 200, tol: 1e-12, ..Default::default() };
        let res = minimize(|t| rosenbrock(t), &[-1.2, 1.0], &cfg, |_, _| {}).unwrap();
        assert!((res.theta[0] - 1.0).abs() < 1e-6);
    }
}
