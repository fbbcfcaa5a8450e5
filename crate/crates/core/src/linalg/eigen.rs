//! Symmetric eigenvalue kernels.
//!
//! Dense matrices go through Householder tridiagonalization followed by the
//! implicit QL iteration (the EISPACK `tred2`/`tql2` pair). Narrow band
//! matrices are first reduced to tridiagonal form with Givens rotations that
//! chase the fill-in down the band, which keeps the cost at `O(n^2 b)`.


use crate::prelude::*;
use crate::error::{Error, Result};

const EPS: f64 = f64::EPSILON;

/// Householder reduction of the row-major symmetric matrix `v` (overwritten).
///
/// On return `d` holds the diagonal and `e[1..]` the subdiagonal of the
/// tridiagonal form. With `accumulate` the orthogonal transform is left in `v`.
pub(crate) fn tridiagonalize(n: usize, v: &mut [f64], accumulate: bool) -> (Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    if n == 0 {
        return (d, e);
    }
    let at = |i: usize, j: usize| i * n + j;

    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    if !accumulate {
        for (i, di) in d.iter_mut().enumerate() {
            *di = v[at(i, i)];
        }
        e[0] = 0.0;
        return (d, e);
    }

    for i in 0..(n - 1) {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
    (d, e)
}

/// Implicit QL on a tridiagonal matrix (`d` diagonal, `e[1..]` subdiagonal).
///
/// When `vectors` is given (row-major `n x n`, columns are eigenvectors) the
/// rotations are accumulated into it. Eigenvalues come back ascending, with
/// vector columns permuted to match.
pub(crate) fn tridiagonal_ql(
    d: &mut [f64],
    e: &mut [f64],
    mut vectors: Option<&mut [f64]>,
) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let max_iter = 30 * n.max(4);
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= EPS * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > max_iter {
                    return Err(Error::NoConvergence { residual: e[l].abs() });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(v) = vectors.as_deref_mut() {
                        for k in 0..n {
                            let vk = &mut v[k * n..(k + 1) * n];
                            let hk = vk[i + 1];
                            vk[i + 1] = s * vk[i] + c * hk;
                            vk[i] = c * vk[i] - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= EPS * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // selection sort keeps the column permutation cheap and stable
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            if let Some(v) = vectors.as_deref_mut() {
                for row in 0..n {
                    v.swap(row * n + i, row * n + k);
                }
            }
        }
    }
    Ok(())
}

/// Reduce a symmetric band matrix (row-major, full storage, half-bandwidth
/// `b`) to tridiagonal form in place. Returns `(diag, subdiag)` with the
/// subdiagonal shifted to `e[1..]` like [`tridiagonalize`].
pub(crate) fn band_to_tridiagonal(n: usize, a: &mut [f64], b: usize) -> (Vec<f64>, Vec<f64>) {
    let at = |i: usize, j: usize| i * n + j;
    for k in (2..=b).rev() {
        // shrink the half-bandwidth from k to k - 1
        for j in 0..n.saturating_sub(k) {
            let mut row = j + k;
            let mut col = j;
            while row < n {
                let x = a[at(row, col)];
                if x != 0.0 {
                    let y = a[at(row - 1, col)];
                    let r = y.hypot(x);
                    let c = y / r;
                    let s = x / r;
                    let lo = col.saturating_sub(1);
                    let hi = (row + k + 1).min(n);
                    rotate(a, n, row - 1, row, c, s, lo, hi);
                    a[at(row, col)] = 0.0;
                    a[at(col, row)] = 0.0;
                }
                // the rotation of rows (row - 1, row) may spill into column row + k - 1
                col = row - 1;
                row += k;
            }
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    for i in 0..n {
        d[i] = a[at(i, i)];
        if i > 0 {
            e[i] = a[at(i, i - 1)];
        }
    }
    (d, e)
}

/// Two-sided Givens rotation in the `(p, q)` plane restricted to indices `lo..hi`.
#[allow(clippy::too_many_arguments)]
fn rotate(a: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64, lo: usize, hi: usize) {
    for j in lo..hi {
        let ap = a[p * n + j];
        let aq = a[q * n + j];
        a[p * n + j] = c * ap + s * aq;
        a[q * n + j] = -s * ap + c * aq;
    }
    for i in lo..hi {
        let ap = a[i * n + p];
        let aq = a[i * n + q];
        a[i * n + p] = c * ap + s * aq;
        a[i * n + q] = -s * ap + c * aq;
    }
}

/// Singular values of the `rows x cols` column-major matrix `cols_data`
/// by one-sided (Hestenes) Jacobi. Small singular values are computed to
/// absolute accuracy of order `eps * ||A||`, which the rank decisions rely on.
pub(crate) fn singular_values(rows: usize, cols: usize, mut a: Vec<f64>) -> Vec<f64> {
    let col = |k: usize| k * rows..(k + 1) * rows;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    let x = a[p * rows + i];
                    let y = a[q * rows + i];
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= EPS * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let x = a[p * rows + i];
                    let y = a[q * rows + i];
                    a[p * rows + i] = c * x - s * y;
                    a[q * rows + i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..cols)
        .map(|k| a[col(k)].iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Solve `A x = b` (row-major `n x n`) by Gaussian elimination with partial
/// pivoting. Returns `None` when a pivot falls below `pivot_tol * max|A|`.
pub(crate) fn lu_solve(n: usize, a: &[f64], b: &[f64], pivot_tol: f64) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for k in 0..n {
        let (piv, pmax) = (k..n)
            .map(|i| (i, m[i * n + k].abs()))
            .fold((k, -1.0), |acc, c| if c.1 > acc.1 { c } else { acc });
        if pmax <= pivot_tol * scale {
            return None;
        }
        if piv != k {
            for j in 0..n {
                m.swap(k * n + j, piv * n + j);
            }
            x.swap(k, piv);
        }
        for i in (k + 1)..n {
            let f = m[i * n + k] / m[k * n + k];
            if f != 0.0 {
                for j in k..n {
                    m[i * n + j] -= f * m[k * n + j];
                }
                x[i] -= f * x[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for j in (k + 1)..n {
            s -= m[k * n + j] * x[j];
        }
        x[k] = s / m[k * n + k];
    }
    Some(x)
}
