//! Dense least squares and nonnegativity-constrained variants.
//!
//! Design matrices here are tall and thin (hundreds of samples, a handful
//! of fit components), so Householder QR is fully adequate:
//!
//! - [`lstsq`] — unconstrained `min ‖A x - b‖₂` via QR;
//! - [`nnls`] — `min ‖A x - b‖₂` subject to `x ≥ 0`, the Lawson-Hanson
//!   active-set algorithm with the unconstrained subproblems solved by QR.
//!
//! Both return the residual norm alongside the solution so callers can form
//! goodness-of-fit and covariance estimates.

use ndarray as nd;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LsqError {
    /// Returned when the design matrix is rank deficient beyond repair
    /// (an exactly zero pivot column).
    #[error("rank-deficient design matrix: pivot {0} vanished")]
    RankDeficient(usize),

    /// Returned when the active-set iteration exceeds its budget.
    #[error("nonnegative least squares failed to converge within {0} iterations")]
    NoConvergence(usize),
}
use LsqError::*;

pub type LsqResult<T> = Result<T, LsqError>;

/// Solution of a least-squares problem.
#[derive(Clone, Debug)]
pub struct Solution {
    /// Coefficient vector.
    pub x: Vec<f64>,
    /// Residual norm `‖A x - b‖₂`.
    pub residual: f64,
}

/// Solve `min ‖A x - b‖₂` by Householder QR.
///
/// Requires `A` to have full column rank and at least as many rows as
/// columns.
pub fn lstsq(a: &nd::Array2<f64>, b: &[f64]) -> LsqResult<Solution> {
    let (m, n) = a.dim();
    if b.len() != m || m < n || n == 0 {
        panic!("lstsq: need A of shape (m ≥ n ≥ 1) and b of length m");
    }
    let mut r = a.clone();
    let mut rhs = b.to_vec();
    // Householder triangularization, applying reflectors to the RHS as we go.
    for j in 0..n {
        let mut alpha: f64 = 0.0;
        for i in j..m {
            alpha = alpha.hypot(r[[i, j]]);
        }
        if alpha == 0.0 {
            return Err(RankDeficient(j));
        }
        if r[[j, j]] > 0.0 {
            alpha = -alpha;
        }
        // v = x - alpha e1, normalized so v[j] carries the norm info.
        let v0 = r[[j, j]] - alpha;
        let mut vnorm2 = v0 * v0;
        for i in (j + 1)..m {
            vnorm2 += r[[i, j]] * r[[i, j]];
        }
        r[[j, j]] = alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        // Apply I - 2 v vᵀ / ‖v‖² to the remaining columns and the RHS.
        for col in (j + 1)..n {
            let mut dot = v0 * r[[j, col]];
            for i in (j + 1)..m {
                dot += r[[i, j]] * r[[i, col]];
            }
            let s = 2.0 * dot / vnorm2;
            r[[j, col]] -= s * v0;
            for i in (j + 1)..m {
                let vij = r[[i, j]];
                r[[i, col]] -= s * vij;
            }
        }
        let mut dot = v0 * rhs[j];
        for i in (j + 1)..m {
            dot += r[[i, j]] * rhs[i];
        }
        let s = 2.0 * dot / vnorm2;
        rhs[j] -= s * v0;
        for i in (j + 1)..m {
            rhs[i] -= s * r[[i, j]];
        }
    }
    // Back substitution on the upper triangle.
    let mut x = vec![0.0; n];
    for j in (0..n).rev() {
        let mut acc = rhs[j];
        for col in (j + 1)..n {
            acc -= r[[j, col]] * x[col];
        }
        if r[[j, j]] == 0.0 {
            return Err(RankDeficient(j));
        }
        x[j] = acc / r[[j, j]];
    }
    let residual = rhs[n..].iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(Solution { x, residual })
}

/// Solve `min ‖A x - b‖₂` subject to `x ≥ 0` (Lawson-Hanson).
pub fn nnls(a: &nd::Array2<f64>, b: &[f64]) -> LsqResult<Solution> {
    let (m, n) = a.dim();
    if b.len() != m {
        panic!("nnls: dimension mismatch");
    }
    let max_iter = 3 * n.max(10);
    let mut passive: Vec<bool> = vec![false; n];
    let mut x = vec![0.0; n];
    // w = Aᵀ (b - A x), the dual/gradient vector.
    let mut resid = b.to_vec();
    let scale: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    for _ in 0..max_iter {
        let w: Vec<f64> = (0..n)
            .map(|j| (0..m).map(|i| a[[i, j]] * resid[i]).sum())
            .collect();
        // Most-violated KKT condition among the active (zero) variables.
        let cand = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let enter = match cand {
            Some(j) if w[j] > 1e-12 * scale => j,
            _ => {
                let residual = resid.iter().map(|v| v * v).sum::<f64>().sqrt();
                return Ok(Solution { x, residual });
            }
        };
        passive[enter] = true;
        // Inner loop: solve on the passive set, stepping back if any
        // passive coefficient would go negative.
        loop {
            let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let mut sub = nd::Array2::zeros((m, cols.len()));
            for (cc, &j) in cols.iter().enumerate() {
                sub.column_mut(cc).assign(&a.column(j));
            }
            let z = lstsq(&sub, b)?;
            if z.x.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (cc, &j) in cols.iter().enumerate() {
                    x[j] = z.x[cc];
                }
                break;
            }
            // Step toward z until the first coefficient hits zero.
            let mut alpha = f64::INFINITY;
            for (cc, &j) in cols.iter().enumerate() {
                if z.x[cc] <= 0.0 {
                    let a_j = x[j] / (x[j] - z.x[cc]);
                    alpha = alpha.min(a_j);
                }
            }
            for (cc, &j) in cols.iter().enumerate() {
                x[j] += alpha * (z.x[cc] - x[j]);
            }
            for &j in &cols {
                if x[j] <= 1e-14 * scale {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
        // Refresh the residual.
        for i in 0..m {
            let mut acc = b[i];
            for j in 0..n {
                if x[j] != 0.0 {
                    acc -= a[[i, j]] * x[j];
                }
            }
            resid[i] = acc;
        }
    }
    Err(NoConvergence(max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_system_recovered() {
        // Square invertible system: LS solution is the exact solution.
        let a = nd::arr2(&[[2.0, 1.0], [1.0, 3.0]]);
        let b = [5.0, 10.0];
        let sol = lstsq(&a, &b).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!((sol.x[1] - 3.0).abs() < 1e-12);
        assert!(sol.residual < 1e-12);
    }

    #[test]
    fn overdetermined_matches_normal_equations() {
        // Fit y = c0 + c1 t through noisy-free samples of 2 + 0.5 t.
        let ts: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let mut a = nd::Array2::zeros((ts.len(), 2));
        let mut b = vec![0.0; ts.len()];
        for (i, &t) in ts.iter().enumerate() {
            a[[i, 0]] = 1.0;
            a[[i, 1]] = t;
            b[i] = 2.0 + 0.5 * t;
        }
        let sol = lstsq(&a, &b).unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-12);
        assert!((sol.x[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn nnls_clips_negative_components() {
        // Unconstrained solution has a negative coefficient; NNLS must zero
        // it and refit.  A = I makes the answer easy to verify.
        let a = nd::arr2(&[[1.0, 0.0], [0.0, 1.0]]);
        let b = [-0.5, 2.0];
        let sol = nnls(&a, &b).unwrap();
        assert_eq!(sol.x[0], 0.0);
        assert!((sol.x[1] - 2.0).abs() < 1e-12);
        assert!((sol.residual - 0.5).abs() < 1e-12);
    }

    #[test]
    fn nnls_matches_lstsq_when_unconstrained_solution_is_positive() {
        let a = nd::arr2(&[
            [1.0, 0.2, 0.1],
            [0.3, 1.0, 0.2],
            [0.1, 0.4, 1.0],
            [0.5, 0.5, 0.5],
        ]);
        let truth = [0.7, 1.2, 0.4];
        let b: Vec<f64> = (0..4)
            .map(|i| (0..3).map(|j| a[[i, j]] * truth[j]).sum())
            .collect();
        let sol = nnls(&a, &b).unwrap();
        for (got, want) in sol.x.iter().zip(&truth) {
            assert!((got - want).abs() < 1e-10);
        }
    }
}
