//! Jacobi eigensolver for small dense symmetric matrices.
//!
//! Cyclic Jacobi with the standard two-angle rotation choice; quadratically
//! convergent and accurate to machine precision, with cost `O(n³)` per sweep.
//! Intended for small problems (reduced density matrices, normal-equation
//! matrices of fits, test oracles) where simplicity and robustness matter
//! more than speed.

use ndarray as nd;

/// Eigenvalues (ascending) and matching eigenvector columns of a dense
/// symmetric matrix.
///
/// Only the upper triangle of `a` is read.
///
/// *Panics* if `a` is not square or the iteration fails to converge (which
/// for symmetric input would indicate a logic error, not a data condition).
pub fn eigh_small(a: &nd::Array2<f64>) -> (Vec<f64>, nd::Array2<f64>) {
    let n = a.nrows();
    if a.ncols() != n {
        panic!("eigh_small: matrix must be square");
    }
    let mut m = a.clone();
    let mut v: nd::Array2<f64> = nd::Array2::eye(n);
    if n <= 1 {
        return (m.diag().to_vec(), v);
    }
    const MAX_SWEEPS: usize = 64;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    s += m[[p, q]] * m[[p, q]];
                }
            }
            s
        };
        if off <= f64::MIN_POSITIVE {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                let scale = m[[p, p]].abs() + m[[q, q]].abs();
                if apq.abs() <= f64::EPSILON * scale {
                    m[[p, q]] = 0.0;
                    continue;
                }
                // Rotation angle from tan(2θ) = 2 a_pq / (a_qq - a_pp).
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + theta.hypot(1.0))
                } else {
                    -1.0 / (-theta + theta.hypot(1.0))
                };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                let tau = s / (1.0 + c);
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                m[[p, p]] = app - t * apq;
                m[[q, q]] = aqq + t * apq;
                m[[p, q]] = 0.0;
                for i in 0..n {
                    if i != p && i != q {
                        // Read/write the upper triangle only.
                        let (ip, iq) = (upper(&m, i, p), upper(&m, i, q));
                        set_upper(&mut m, i, p, ip - s * (iq + tau * ip));
                        set_upper(&mut m, i, q, iq + s * (ip - tau * iq));
                    }
                }
                for i in 0..n {
                    let vip = v[[i, p]];
                    let viq = v[[i, q]];
                    v[[i, p]] = vip - s * (viq + tau * vip);
                    v[[i, q]] = viq + s * (vip - tau * viq);
                }
            }
        }
    }
    if !converged {
        panic!("eigh_small: Jacobi sweeps failed to converge");
    }
    // Sort ascending, permuting eigenvector columns alongside.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].total_cmp(&m[[j, j]]));
    let evals: Vec<f64> = order.iter().map(|&i| m[[i, i]]).collect();
    let mut evecs = nd::Array2::zeros((n, n));
    for (new, &old) in order.iter().enumerate() {
        evecs.column_mut(new).assign(&v.column(old));
    }
    (evals, evecs)
}

fn upper(m: &nd::Array2<f64>, i: usize, j: usize) -> f64 {
    if i <= j { m[[i, j]] } else { m[[j, i]] }
}

fn set_upper(m: &mut nd::Array2<f64>, i: usize, j: usize, val: f64) {
    if i <= j { m[[i, j]] = val; } else { m[[j, i]] = val; }
}
