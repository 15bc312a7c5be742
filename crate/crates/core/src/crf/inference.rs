//! Exact dynamic-programming inference in log space.
//!
//! `emit` is `T x L`, `trans` is a flat `L x L` row-major matrix (row =
//! predecessor label) with any mask already folded in.

use crate::{Error, Result, Scalar};

pub(crate) fn log_sum_exp<S: Scalar>(xs: &[S]) -> S {
    let mut max = S::neg_infinity();
    for &x in xs {
        if x > max {
            max = x;
        }
    }
    if !max.is_finite() {
        return max;
    }
    let mut sum = S::zero();
    for &x in xs {
        sum = sum + (x - max).exp();
    }
    max + sum.ln()
}

fn check_shape<S>(emit: &[Vec<S>], n_labels: usize) -> Result<()> {
    if emit.is_empty() {
        return Err(Error::data("cannot run inference on an empty sentence"));
    }
    if emit.iter().any(|row| row.len() != n_labels) {
        return Err(Error::data("emission matrix width does not match label count"));
    }
    Ok(())
}

/// Forward recursion; returns the `T x L` alpha table.
pub(crate) fn forward<S: Scalar>(emit: &[Vec<S>], trans: &[S], n_labels: usize) -> Vec<Vec<S>> {
    let t_len = emit.len();
    let mut alpha = vec![vec![S::zero(); n_labels]; t_len];
    alpha[0].clone_from(&emit[0]);
    let mut scratch = vec![S::zero(); n_labels];
    for t in 1..t_len {
        for y in 0..n_labels {
            for (y_prev, slot) in scratch.iter_mut().enumerate() {
                *slot = alpha[t - 1][y_prev] + trans[y_prev * n_labels + y];
            }
            alpha[t][y] = log_sum_exp(&scratch) + emit[t][y];
        }
    }
    alpha
}

/// Backward recursion; returns the `T x L` beta table.
pub(crate) fn backward<S: Scalar>(emit: &[Vec<S>], trans: &[S], n_labels: usize) -> Vec<Vec<S>> {
    let t_len = emit.len();
    let mut beta = vec![vec![S::zero(); n_labels]; t_len];
    let mut scratch = vec![S::zero(); n_labels];
    for t in (0..t_len - 1).rev() {
        for y in 0..n_labels {
            for (y_next, slot) in scratch.iter_mut().enumerate() {
                *slot = trans[y * n_labels + y_next] + emit[t + 1][y_next] + beta[t + 1][y_next];
            }
            beta[t][y] = log_sum_exp(&scratch);
        }
    }
    beta
}

/// Log of the partition sum over all `L^T` label sequences.
pub(crate) fn log_partition<S: Scalar>(
    emit: &[Vec<S>],
    trans: &[S],
    n_labels: usize,
) -> Result<S> {
    check_shape(emit, n_labels)?;
    let alpha = forward(emit, trans, n_labels);
    Ok(log_sum_exp(alpha.last().unwrap()))
}

/// Position-wise label marginals (`T x L`), each row summing to one.
pub(crate) fn marginals<S: Scalar>(
    emit: &[Vec<S>],
    trans: &[S],
    n_labels: usize,
) -> Result<Vec<Vec<S>>> {
    check_shape(emit, n_labels)?;
    let alpha = forward(emit, trans, n_labels);
    let beta = backward(emit, trans, n_labels);
    let log_z = log_sum_exp(alpha.last().unwrap());
    let mut out = vec![vec![S::zero(); n_labels]; emit.len()];
    for t in 0..emit.len() {
        for y in 0..n_labels {
            out[t][y] = (alpha[t][y] + beta[t][y] - log_z).exp();
        }
    }
    Ok(out)
}

/// Max-score label sequence. The recursion runs from the end so ties can be
/// resolved from the front: at every choice the lowest label index wins,
/// making the result the lexicographically smallest argmax.
pub(crate) fn viterbi<S: Scalar>(emit: &[Vec<S>], trans: &[S], n_labels: usize) -> Result<Vec<u32>> {
    check_shape(emit, n_labels)?;
    let t_len = emit.len();
    // best[t][y]: max score of a suffix starting at t with label y
    let mut best = vec![vec![S::zero(); n_labels]; t_len];
    best[t_len - 1].clone_from(&emit[t_len - 1]);
    for t in (0..t_len - 1).rev() {
        for y in 0..n_labels {
            let mut max = S::neg_infinity();
            for y_next in 0..n_labels {
                let score = trans[y * n_labels + y_next] + best[t + 1][y_next];
                if score > max {
                    max = score;
                }
            }
            best[t][y] = emit[t][y] + max;
        }
    }

    let mut path = Vec::with_capacity(t_len);
    let mut current = 0u32;
    let mut current_best = best[0][0];
    for y in 1..n_labels {
        if best[0][y] > current_best {
            current_best = best[0][y];
            current = y as u32;
        }
    }
    path.push(current);
    for t in 1..t_len {
        let from = current as usize;
        let mut next = 0u32;
        let mut next_best = trans[from * n_labels] + best[t][0];
        for y in 1..n_labels {
            let score = trans[from * n_labels + y] + best[t][y];
            if score > next_best {
                next_best = score;
                next = y as u32;
            }
        }
        current = next;
        path.push(current);
    }
    Ok(path)
}
