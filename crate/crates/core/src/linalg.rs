//! Small dense helpers on top of nalgebra: thin QR, sorted SVD, truncation and maxvol.

use nalgebra::DMatrix;

pub(crate) type Mat = DMatrix<f64>;

/// Thin QR, `m = q * r` with `q` having `min(rows, cols)` orthonormal columns.
pub(crate) fn qr_thin(m: Mat) -> (Mat, Mat) {
    let qr = m.qr();
    (qr.q(), qr.r())
}

pub(crate) struct Svd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub vt: Mat,
}

/// SVD with singular values sorted in decreasing order.
///
/// Very tall or very wide inputs are first reduced by a QR step, which keeps
/// the bidiagonalization small.
pub(crate) fn svd(m: &Mat) -> Svd {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Svd { u: Mat::zeros(rows, 0), s: vec![], vt: Mat::zeros(0, cols) };
    }
    if rows > 2 * cols {
        let (q, r) = qr_thin(m.clone());
        let inner = svd(&r);
        return Svd { u: q * inner.u, s: inner.s, vt: inner.vt };
    }
    if cols > 2 * rows {
        let t = svd(&m.transpose());
        return Svd { u: t.vt.transpose(), s: t.s, vt: t.u.transpose() };
    }
    let dec = m.clone().svd(true, true);
    let u = dec.u.expect("u requested");
    let vt = dec.v_t.expect("v_t requested");
    let k = dec.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));
    let s = order.iter().map(|&i| dec.singular_values[i]).collect();
    let u = Mat::from_fn(rows, k, |r, c| u[(r, order[c])]);
    let vt = Mat::from_fn(k, cols, |r, c| vt[(order[r], c)]);
    Svd { u, s, vt }
}

/// Smallest rank whose discarded tail has Euclidean norm at most `delta`,
/// clipped to `[1, max_rank]`. Returns the rank and the discarded tail norm.
pub(crate) fn truncation_rank(s: &[f64], delta: f64, max_rank: usize) -> (usize, f64) {
    if s.is_empty() {
        return (0, 0.0);
    }
    let mut tail = 0.0;
    let mut rank = s.len();
    for i in (0..s.len()).rev() {
        let t = tail + s[i] * s[i];
        if t.sqrt() > delta {
            break;
        }
        tail = t;
        rank = i;
    }
    let rank = rank.max(1);
    let rank = rank.min(max_rank.max(1));
    let discarded: f64 = s[rank..].iter().map(|v| v * v).sum();
    (rank, discarded.sqrt())
}

/// Row indices of a dominant (quasi-maximal volume) `r x r` submatrix of a tall `n x r` matrix.
///
/// Starts from the pivots of Gaussian elimination with partial pivoting and then swaps rows
/// while some coefficient of `a * a[P]^-1` exceeds `tol` in magnitude.
pub(crate) fn maxvol(a: &Mat, tol: f64, max_swaps: usize) -> Vec<usize> {
    let (n, r) = a.shape();
    assert!(r <= n, "maxvol needs a tall matrix");
    if r == 0 {
        return vec![];
    }
    let mut work = a.clone();
    let mut pivots = Vec::with_capacity(r);
    let mut used = vec![false; n];
    for c in 0..r {
        let mut best = usize::MAX;
        let mut best_val = -1.0;
        for i in 0..n {
            if !used[i] && work[(i, c)].abs() > best_val {
                best_val = work[(i, c)].abs();
                best = i;
            }
        }
        used[best] = true;
        pivots.push(best);
        let p = work[(best, c)];
        if p.abs() > 0.0 {
            for i in 0..n {
                if used[i] {
                    continue;
                }
                let f = work[(i, c)] / p;
                if f != 0.0 {
                    for cc in c + 1..r {
                        let v = work[(best, cc)];
                        work[(i, cc)] -= f * v;
                    }
                }
            }
        }
    }

    let sub = Mat::from_fn(r, r, |i, j| a[(pivots[i], j)]);
    let inv = match sub.clone().try_inverse() {
        Some(inv) => inv,
        None => sub.pseudo_inverse(1e-14).expect("pseudo inverse"),
    };
    let mut b = a * inv;
    for _ in 0..max_swaps {
        let mut bi = 0;
        let mut bj = 0;
        let mut bv = 0.0;
        for j in 0..r {
            for i in 0..n {
                let v = b[(i, j)].abs();
                if v > bv {
                    bv = v;
                    bi = i;
                    bj = j;
                }
            }
        }
        if bv <= tol {
            break;
        }
        // swap pivot row bj for row bi and update b with a rank-one correction
        let col = b.column(bj).clone_owned();
        let mut row = b.row(bi).clone_owned();
        row[bj] -= 1.0;
        let piv = b[(bi, bj)];
        for j in 0..r {
            let f = row[j] / piv;
            if f != 0.0 {
                for i in 0..n {
                    b[(i, j)] -= col[i] * f;
                }
            }
        }
        pivots[bj] = bi;
    }
    pivots
}

/// Rows `idx` of `a` as a new matrix.
pub(crate) fn select_rows(a: &Mat, idx: &[usize]) -> Mat {
    Mat::from_fn(idx.len(), a.ncols(), |i, j| a[(idx[i], j)])
}

/// `a * b^-1` for square `b`, falling back to a pseudo-inverse when `b` is singular.
pub(crate) fn right_divide(a: &Mat, b: &Mat) -> Mat {
    // solve x b = a  <=>  b^T x^T = a^T
    let bt = b.transpose();
    let at = a.transpose();
    match bt.clone().lu().solve(&at) {
        Some(x) if x.iter().all(|v| v.is_finite()) => x.transpose(),
        _ => a * b.clone().pseudo_inverse(1e-14).expect("pseudo inverse"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_is_sorted_and_reconstructs() {
        let m = Mat::from_fn(7, 3, |i, j| ((i * 3 + j) as f64).sin() + (j as f64));
        let d = svd(&m);
        assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
        let rec = &d.u * Mat::from_diagonal(&nalgebra::DVector::from_vec(d.s.clone())) * &d.vt;
        assert!((rec - &m).norm() < 1e-12);
        let w = m.transpose();
        let d = svd(&w);
        let rec = &d.u * Mat::from_diagonal(&nalgebra::DVector::from_vec(d.s.clone())) * &d.vt;
        assert!((rec - &w).norm() < 1e-12);
    }

    #[test]
    fn truncation_keeps_at_least_one() {
        assert_eq!(truncation_rank(&[1.0, 0.5, 0.1], 10.0, 5).0, 1);
        assert_eq!(truncation_rank(&[1.0, 0.5, 0.1], 0.1, 5).0, 2);
        assert_eq!(truncation_rank(&[1.0, 0.5, 0.1], 0.0, 5).0, 3);
        assert_eq!(truncation_rank(&[1.0, 0.5, 0.1], 0.0, 2).0, 2);
    }

    #[test]
    fn maxvol_bounds_coefficients() {
        let a = Mat::from_fn(40, 4, |i, j| (-(((i as f64) / 13.0) - (j as f64) * 0.8).powi(2)).exp() + 0.1 * ((i * j) as f64).sin());
        let p = maxvol(&a, 1.01, 200);
        let sub = select_rows(&a, &p);
        let b = right_divide(&a, &sub);
        assert!(b.iter().all(|v| v.abs() <= 1.01 + 1e-10));
        let mut q = p.clone();
        q.sort();
        q.dedup();
        assert_eq!(q.len(), 4);
    }
}
