//! Limited-memory BFGS with Armijo backtracking, written for reproducibility:
//! no randomness, fixed summation order, monotone accepted iterates.

use std::collections::VecDeque;

use crate::{Error, Result, Scalar};

#[derive(Debug, Clone)]
pub struct LbfgsConfig<S> {
    /// Curvature pairs kept for the two-loop recursion.
    pub history: usize,
    /// Stop when the relative objective decrease falls below this.
    pub tolerance: S,
    pub max_iterations: u32,
    /// Armijo sufficient-decrease constant.
    pub c1: S,
    /// Step shrink factor of the backtracking search.
    pub backtrack: S,
}

impl<S: Scalar> Default for LbfgsConfig<S> {
    fn default() -> Self {
        LbfgsConfig {
            history: 10,
            tolerance: S::from_f64(1e-5).unwrap(),
            max_iterations: 200,
            c1: S::from_f64(1e-4).unwrap(),
            backtrack: S::from_f64(0.5).unwrap(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome<S> {
    pub x: Vec<S>,
    pub value: S,
    /// Objective value after every accepted iterate, starting at `x0`.
    pub values: Vec<S>,
    pub iterations: u32,
    pub converged: bool,
}

fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = S::zero();
    for (x, y) in a.iter().zip(b) {
        acc = acc + *x * *y;
    }
    acc
}

fn norm2<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

/// Two-loop recursion: approximate `-H * g` as a descent direction.
fn direction<S: Scalar>(grad: &[S], history: &VecDeque<(Vec<S>, Vec<S>, S)>) -> Vec<S> {
    let mut q: Vec<S> = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let alpha = *rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi = *qi - alpha * *yi;
        }
        alphas.push(alpha);
    }
    if let Some((s, y, _)) = history.back() {
        let scale = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi = *qi * scale;
        }
    }
    for ((s, y, rho), alpha) in history.iter().zip(alphas.iter().rev()) {
        let beta = *rho * dot(y, &q);
        let coeff = *alpha - beta;
        for (qi, si) in q.iter_mut().zip(s) {
            *qi = *qi + coeff * *si;
        }
    }
    for qi in q.iter_mut() {
        *qi = -*qi;
    }
    q
}

/// Minimizes `f`, which returns the value and gradient at a point.
pub fn minimize<S, F>(mut f: F, x0: Vec<S>, config: &LbfgsConfig<S>) -> Result<LbfgsOutcome<S>>
where
    S: Scalar,
    F: FnMut(&[S]) -> Result<(S, Vec<S>)>,
{
    let grad_eps = S::from_f64(1e-12).unwrap();
    let min_step = S::from_f64(1e-20).unwrap();

    let mut x = x0;
    let (mut value, mut grad) = f(&x)?;
    if !value.is_finite() {
        return Err(Error::Numerical("objective not finite at the start".into()));
    }
    let mut values = vec![value];
    let mut history: VecDeque<(Vec<S>, Vec<S>, S)> = VecDeque::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iterations {
        let gnorm = norm2(&grad);
        if gnorm < grad_eps {
            converged = true;
            break;
        }

        let mut dir = direction(&grad, &history);
        let mut slope = dot(&grad, &dir);
        if slope >= S::zero() {
            // Stale curvature: fall back to steepest descent.
            dir = grad.iter().map(|&g| -g).collect();
            slope = -gnorm * gnorm;
        }

        let mut step = if history.is_empty() {
            (S::one() / gnorm).min(S::one())
        } else {
            S::one()
        };

        let mut accepted = None;
        while step > min_step {
            let candidate: Vec<S> = x.iter().zip(&dir).map(|(&xi, &di)| xi + step * di).collect();
            let (cand_value, cand_grad) = f(&candidate)?;
            if cand_value.is_finite() && cand_value <= value + config.c1 * step * slope {
                accepted = Some((candidate, cand_value, cand_grad));
                break;
            }
            step = step * config.backtrack;
        }

        let Some((new_x, new_value, new_grad)) = accepted else {
            // No step produced sufficient decrease: treat as converged.
            converged = true;
            break;
        };

        let s: Vec<S> = new_x.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<S> = new_grad.iter().zip(&grad).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > S::from_f64(1e-12).unwrap() {
            if history.len() == config.history {
                history.pop_front();
            }
            history.push_back((s, y, S::one() / sy));
        }

        let decrease = value - new_value;
        let rel = decrease / value.abs().max(S::one());
        x = new_x;
        value = new_value;
        grad = new_grad;
        values.push(value);
        iterations += 1;

        if rel < config.tolerance {
            converged = true;
            break;
        }
    }

    Ok(LbfgsOutcome {
        x,
        value,
        values,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn minimizes_a_quadratic() {
        let center = [0.9, -1.3, 0.5, 2.0];
        let f = |x: &[f64]| {
            let value: f64 = x
                .iter()
                .zip(center)
                .map(|(xi, ci)| (xi - ci) * (xi - ci))
                .sum();
            let grad: Vec<f64> = x.iter().zip(center).map(|(xi, ci)| 2.0 * (xi - ci)).collect();
            Ok((value, grad))
        };
        let out = minimize(f, vec![0.0; 4], &LbfgsConfig::default()).unwrap();
        assert!(out.converged);
        for (xi, ci) in out.x.iter().zip(center) {
            assert_abs_diff_eq!(*xi, ci, epsilon = 1e-4);
        }
    }

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let value = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let grad = vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ];
            Ok((value, grad))
        };
        let config = LbfgsConfig {
            tolerance: 1e-14,
            max_iterations: 500,
            ..LbfgsConfig::default()
        };
        let out = minimize(f, vec![-1.2, 1.0], &config).unwrap();
        assert_abs_diff_eq!(out.x[0], 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(out.x[1], 1.0, epsilon = 1e-4);
    }

    #[test]
    fn accepted_values_never_increase() {
        let f = |x: &[f64]| {
            let value = x[0].powi(4) + (x[0] - 3.0).powi(2) + x[1].powi(2);
            let grad = vec![4.0 * x[0].powi(3) + 2.0 * (x[0] - 3.0), 2.0 * x[1]];
            Ok((value, grad))
        };
        let out = minimize(f, vec![5.0, -4.0], &LbfgsConfig::default()).unwrap();
        for pair in out.values.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let f = |x: &[f64]| {
            let value: f64 = x.iter().enumerate().map(|(i, xi)| (xi - i as f64).powi(2)).sum();
            let grad: Vec<f64> = x
                .iter()
                .enumerate()
                .map(|(i, xi)| 2.0 * (xi - i as f64))
                .collect();
            Ok((value, grad))
        };
        let a = minimize(f, vec![0.5; 6], &LbfgsConfig::default()).unwrap();
        let b = minimize(f, vec![0.5; 6], &LbfgsConfig::default()).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.values, b.values);
    }
}
