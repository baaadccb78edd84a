//! Small dense linear algebra on row-major `&[f64]` buffers. Dimensions
//! here are tiny (rarely above a few dozen), so simplicity wins over BLAS.

use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, sqrt};

#[inline]
fn sign_of(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        fabs(a)
    } else {
        -fabs(a)
    }
}

/// LU factorization with partial pivoting, in place. Returns the permutation
/// sign (+1/-1), or 0.0 when a pivot vanishes (singular matrix).
fn lu_factor(a: &mut [f64], n: usize, piv: &mut [usize]) -> f64 {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(piv.len(), n);
    let mut sign = 1.0;
    for k in 0..n {
        let mut p = k;
        let mut best = fabs(a[k * n + k]);
        for i in (k + 1)..n {
            let v = fabs(a[i * n + k]);
            if v > best {
                best = v;
                p = i;
            }
        }
        piv[k] = p;
        if best == 0.0 {
            return 0.0;
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            sign = -sign;
        }
        let pivot = a[k * n + k];
        for i in (k + 1)..n {
            let f = a[i * n + k] / pivot;
            a[i * n + k] = f;
            for j in (k + 1)..n {
                a[i * n + j] -= f * a[k * n + j];
            }
        }
    }
    sign
}

pub(crate) fn determinant(a: &[f64], n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut lu = a.to_vec();
    let mut piv = vec![0usize; n];
    let sign = lu_factor(&mut lu, n, &mut piv);
    if sign == 0.0 {
        return 0.0;
    }
    let mut det = sign;
    for k in 0..n {
        det *= lu[k * n + k];
    }
    det
}

/// Solves `a x = b`. None when the matrix is singular.
pub(crate) fn solve(a: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    debug_assert_eq!(b.len(), n);
    let mut lu = a.to_vec();
    let mut piv = vec![0usize; n];
    if lu_factor(&mut lu, n, &mut piv) == 0.0 {
        return None;
    }
    let mut x = b.to_vec();
    for k in 0..n {
        x.swap(k, piv[k]);
        for i in (k + 1)..n {
            let f = lu[i * n + k];
            x[i] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        for j in (k + 1)..n {
            let xj = x[j];
            x[k] -= lu[k * n + j] * xj;
        }
        x[k] /= lu[k * n + k];
    }
    Some(x)
}

/// Cyclic Jacobi for a symmetric matrix: eigenvalues plus column-major
/// orthonormal eigenvectors. Input is symmetrized defensively.
pub(crate) fn sym_eigen(a_in: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    debug_assert_eq!(a_in.len(), n * n);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (a_in[i * n + j] + a_in[j * n + i]);
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let mut norm = 0.0;
    for x in a.iter() {
        norm += x * x;
    }
    let norm = sqrt(norm).max(1.0);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if sqrt(off) <= 1e-14 * norm {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if fabs(apq) <= 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = sign_of(1.0, theta) / (fabs(theta) + sqrt(theta * theta + 1.0));
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    a[r * n + p] = c * arp - s * arq;
                    a[p * n + r] = a[r * n + p];
                    a[r * n + q] = s * arp + c * arq;
                    a[q * n + r] = a[r * n + q];
                }
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = c * vrp - s * vrq;
                    v[r * n + q] = s * vrp + c * vrq;
                }
            }
        }
    }
    let vals = (0..n).map(|i| a[i * n + i]).collect();
    (vals, v)
}

/// Eigenvalues of a general real matrix as (re, im) pairs. None when the
/// QR iteration stalls (30 iterations per eigenvalue).
pub(crate) fn eigenvalues(a: &[f64], n: usize) -> Option<Vec<(f64, f64)>> {
    debug_assert_eq!(a.len(), n * n);
    if n == 0 {
        return Some(Vec::new());
    }
    if n == 1 {
        return Some(vec![(a[0], 0.0)]);
    }
    let mut h = a.to_vec();
    elmhes(&mut h, n);
    hqr(&mut h, n)
}

pub(crate) fn eig_magnitudes(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let eigs = eigenvalues(a, n)?;
    Some(
        eigs.iter()
            .map(|&(re, im)| sqrt(re * re + im * im))
            .collect(),
    )
}

/// Reduction to upper Hessenberg form by stabilized elementary similarity
/// transformations. Below-subdiagonal entries end up exactly zero.
fn elmhes(a: &mut [f64], n: usize) {
    for m in 1..n.saturating_sub(1) {
        let mut x = 0.0;
        let mut i_piv = m;
        for j in m..n {
            if fabs(a[j * n + m - 1]) > fabs(x) {
                x = a[j * n + m - 1];
                i_piv = j;
            }
        }
        if i_piv != m {
            for j in 0..n {
                a.swap(m * n + j, i_piv * n + j);
            }
            for i in 0..n {
                a.swap(i * n + m, i * n + i_piv);
            }
        }
        if x == 0.0 {
            continue;
        }
        for i in (m + 1)..n {
            let mut y = a[i * n + m - 1];
            if y == 0.0 {
                continue;
            }
            y /= x;
            a[i * n + m - 1] = 0.0;
            for j in m..n {
                a[i * n + j] -= y * a[m * n + j];
            }
            for r in 0..n {
                a[r * n + m] += y * a[r * n + i];
            }
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (EISPACK HQR
/// scheme). Destroys `h`.
fn hqr(h: &mut [f64], n: usize) -> Option<Vec<(f64, f64)>> {
    let idx = |i: usize, j: usize| i * n + j;
    let mut w = vec![(0.0f64, 0.0f64); n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += fabs(h[idx(i, j)]);
        }
    }
    if anorm == 0.0 {
        return Some(w);
    }
    let mut t = 0.0;
    let mut high = n;
    'outer: while high > 0 {
        let nn = high - 1;
        let mut its = 0;
        loop {
            // Look for a negligible subdiagonal element to split at.
            let mut l = nn;
            while l > 0 {
                let mut s = fabs(h[idx(l - 1, l - 1)]) + fabs(h[idx(l, l)]);
                if s == 0.0 {
                    s = anorm;
                }
                if fabs(h[idx(l, l - 1)]) <= f64::EPSILON * s {
                    h[idx(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = h[idx(nn, nn)];
            if l == nn {
                w[nn] = (x + t, 0.0);
                high -= 1;
                continue 'outer;
            }
            let mut y = h[idx(nn - 1, nn - 1)];
            let mut ww = h[idx(nn, nn - 1)] * h[idx(nn - 1, nn)];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + ww;
                let z = sqrt(fabs(q));
                x += t;
                if q >= 0.0 {
                    let z = p + sign_of(z, p);
                    w[nn - 1] = (x + z, 0.0);
                    w[nn] = if z != 0.0 { (x - ww / z, 0.0) } else { (x + z, 0.0) };
                } else {
                    w[nn - 1] = (x + p, z);
                    w[nn] = (x + p, -z);
                }
                high -= 2;
                continue 'outer;
            }
            if its == 30 {
                return None;
            }
            if its == 10 || its == 20 {
                // Exceptional shift to break symmetry-induced stalls.
                t += x;
                for i in 0..=nn {
                    h[idx(i, i)] -= x;
                }
                let s = fabs(h[idx(nn, nn - 1)]) + fabs(h[idx(nn - 1, nn - 2)]);
                x = 0.75 * s;
                y = x;
                ww = -0.4375 * s * s;
            }
            its += 1;
            // Find two consecutive small subdiagonal elements.
            let mut m = nn - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = h[idx(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - ww) / h[idx(m + 1, m)] + h[idx(m, m + 1)];
                q = h[idx(m + 1, m + 1)] - z - rr - ss;
                r = h[idx(m + 2, m + 1)];
                let s = fabs(p) + fabs(q) + fabs(r);
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = fabs(h[idx(m, m - 1)]) * (fabs(q) + fabs(r));
                let v = fabs(p)
                    * (fabs(h[idx(m - 1, m - 1)]) + fabs(z) + fabs(h[idx(m + 1, m + 1)]));
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                h[idx(i, i - 2)] = 0.0;
            }
            for i in (m + 3)..=nn {
                h[idx(i, i - 3)] = 0.0;
            }
            // Double QR step: chase the bulge from m to nn.
            for k in m..nn {
                if k != m {
                    p = h[idx(k, k - 1)];
                    q = h[idx(k + 1, k - 1)];
                    r = if k != nn - 1 { h[idx(k + 2, k - 1)] } else { 0.0 };
                    x = fabs(p) + fabs(q) + fabs(r);
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                let s = sign_of(sqrt(p * p + q * q + r * r), p);
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m {
                        h[idx(k, k - 1)] = -h[idx(k, k - 1)];
                    }
                } else {
                    h[idx(k, k - 1)] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in k..=nn {
                    let mut pp = h[idx(k, j)] + q * h[idx(k + 1, j)];
                    if k != nn - 1 {
                        pp += r * h[idx(k + 2, j)];
                        h[idx(k + 2, j)] -= pp * z;
                    }
                    h[idx(k + 1, j)] -= pp * y;
                    h[idx(k, j)] -= pp * x;
                }
                let iend = if nn < k + 3 { nn } else { k + 3 };
                for i in l..=iend {
                    let mut pp = x * h[idx(i, k)] + y * h[idx(i, k + 1)];
                    if k != nn - 1 {
                        pp += z * h[idx(i, k + 2)];
                        h[idx(i, k + 2)] -= pp * r;
                    }
                    h[idx(i, k + 1)] -= pp * q;
                    h[idx(i, k)] -= pp;
                }
            }
        }
    }
    Some(w)
}
