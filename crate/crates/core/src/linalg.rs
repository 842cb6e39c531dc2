//! Small dense kernels on row-major `f64` buffers.
//!
//! Everything here works on plain slices so the sampler can keep its
//! workspaces allocated once per chain. Matrix products go through
//! `matrixmultiply`; factorizations are hand-written because the matrices
//! are small (about a hundred rows) and sit on the hot path.

use crate::error::{Error, Result};

/// First jitter tried when a factorization fails.
pub const JITTER_START: f64 = 1e-10;
/// Largest jitter before giving up.
pub const JITTER_MAX: f64 = 1e-6;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// In-place Cholesky of the `n x n` row-major matrix `a`. On success the
/// lower triangle holds `L` and the strict upper triangle is zeroed.
/// On failure returns the pivot index that was not positive.
///
/// Right-looking and blocked: each diagonal block and the panel below it
/// are factored with dot products, the trailing matrix is updated by gemm.
pub fn cholesky_in_place(a: &mut [f64], n: usize) -> std::result::Result<(), usize> {
    debug_assert_eq!(a.len(), n * n);
    const NB: usize = 24;
    let mut k0 = 0;
    while k0 < n {
        let k1 = (k0 + NB).min(n);
        for i in k0..n {
            for j in k0..k1.min(i + 1) {
                let (ri, rj) = (i * n, j * n);
                let s = a[ri + j] - dot(&a[ri + k0..ri + j], &a[rj + k0..rj + j]);
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(i);
                    }
                    a[ri + i] = s.sqrt();
                } else {
                    a[ri + j] = s / a[rj + j];
                }
            }
        }
        if k1 < n {
            let m = n - k1;
            let ptr = a.as_mut_ptr();
            // SAFETY: the panel (rows k1.., columns k0..k1) and the trailing
            // block (rows k1.., columns k1..) are disjoint regions of `a`.
            unsafe {
                let panel = ptr.add(k1 * n + k0) as *const f64;
                matrixmultiply::dgemm(
                    m,
                    k1 - k0,
                    m,
                    -1.0,
                    panel,
                    n as isize,
                    1,
                    panel,
                    1,
                    n as isize,
                    1.0,
                    ptr.add(k1 * n + k1),
                    n as isize,
                    1,
                );
            }
        }
        k0 = k1;
    }
    for i in 0..n {
        a[i * n + i + 1..(i + 1) * n].iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(())
}

/// Cholesky with diagonal jitter escalation. Tries `initial_jitter` first
/// (which may be zero), then `JITTER_START`, growing by a factor of ten up
/// to `JITTER_MAX`. Returns the factor and the jitter that was added.
pub fn cholesky_jittered(
    a: &[f64],
    n: usize,
    initial_jitter: f64,
    context: &str,
) -> Result<(Vec<f64>, f64)> {
    let mut jitter = initial_jitter;
    let mut out = vec![0.0; n * n];
    loop {
        out.copy_from_slice(a);
        if jitter > 0.0 {
            for i in 0..n {
                out[i * n + i] += jitter;
            }
        }
        if cholesky_in_place(&mut out, n).is_ok() {
            return Ok((out, jitter));
        }
        jitter = if jitter < JITTER_START {
            JITTER_START
        } else {
            jitter * 10.0
        };
        if jitter > JITTER_MAX * (1.0 + 1e-9) {
            return Err(Error::NotPositiveDefinite {
                context: context.to_string(),
                max_jitter: JITTER_MAX,
            });
        }
    }
}

/// `log |A|` from its Cholesky factor.
pub fn chol_log_det(l: &[f64], n: usize) -> f64 {
    2.0 * (0..n).map(|i| l[i * n + i].ln()).sum::<f64>()
}

/// Solves `L x = b` in place.
pub fn solve_lower(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let s = b[i] - dot(&l[i * n..i * n + i], &b[..i]);
        b[i] = s / l[i * n + i];
    }
}

/// Solves `L^T x = b` in place.
pub fn solve_lower_transpose(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let xi = b[i] / l[i * n + i];
        b[i] = xi;
        for k in 0..i {
            b[k] -= l[i * n + k] * xi;
        }
    }
}

/// Solves `X L^T = B` in place for the `rows x n` row-major `B`, i.e.
/// `L x_r = b_r` for every row. Works on the transpose in column blocks so
/// the updates are long contiguous products.
pub fn solve_lower_rows(l: &[f64], n: usize, b: &mut [f64], rows: usize) {
    debug_assert_eq!(b.len(), rows * n);
    if rows == 0 || n == 0 {
        return;
    }
    const NB: usize = 32;
    let mut t = vec![0.0; n * rows];
    transpose(b, rows, n, &mut t);
    let mut i0 = 0;
    while i0 < n {
        let i1 = (i0 + NB).min(n);
        let (done, rest) = t.split_at_mut(i0 * rows);
        let block = &mut rest[..(i1 - i0) * rows];
        if i0 > 0 {
            // block -= L[i0..i1, 0..i0] * done
            // SAFETY: L rows i0..i1, columns 0..i0 lie inside `l` with row
            // stride n; `done` is i0 x rows and `block` is (i1-i0) x rows.
            unsafe {
                matrixmultiply::dgemm(
                    i1 - i0,
                    i0,
                    rows,
                    -1.0,
                    l.as_ptr().add(i0 * n),
                    n as isize,
                    1,
                    done.as_ptr(),
                    rows as isize,
                    1,
                    1.0,
                    block.as_mut_ptr(),
                    rows as isize,
                    1,
                );
            }
        }
        for i in i0..i1 {
            let (prev, cur) = block.split_at_mut((i - i0) * rows);
            let cur = &mut cur[..rows];
            for j in i0..i {
                let lij = l[i * n + j];
                let src = &prev[(j - i0) * rows..(j - i0 + 1) * rows];
                for (c, &s) in cur.iter_mut().zip(src) {
                    *c -= lij * s;
                }
            }
            let inv = 1.0 / l[i * n + i];
            cur.iter_mut().for_each(|c| *c *= inv);
        }
        i0 = i1;
    }
    transpose(&t, n, rows, b);
}

/// Writes the transpose of the `rows x cols` matrix `a` into `out`.
pub fn transpose(a: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    const TB: usize = 16;
    for r0 in (0..rows).step_by(TB) {
        for c0 in (0..cols).step_by(TB) {
            for r in r0..(r0 + TB).min(rows) {
                for c in c0..(c0 + TB).min(cols) {
                    out[c * rows + r] = a[r * cols + c];
                }
            }
        }
    }
}

/// `y = L x` for lower-triangular `L`.
pub fn lower_mul(l: &[f64], n: usize, x: &[f64], y: &mut [f64]) {
    for i in 0..n {
        y[i] = dot(&l[i * n..i * n + i + 1], &x[..i + 1]);
    }
}

/// Inverse of a lower-triangular factor, returned row-major (lower).
pub fn lower_inverse(l: &[f64], n: usize) -> Vec<f64> {
    let mut inv = vec![0.0; n * n];
    // Column j of L^{-1} solves L x = e_j; entries above j are zero.
    let mut col = vec![0.0; n];
    for j in 0..n {
        col.iter_mut().for_each(|c| *c = 0.0);
        col[j] = 1.0 / l[j * n + j];
        for i in j + 1..n {
            let mut s = 0.0;
            for k in j..i {
                s += l[i * n + k] * col[k];
            }
            col[i] = -s / l[i * n + i];
        }
        for i in j..n {
            inv[i * n + j] = col[i];
        }
    }
    inv
}

/// General product `C = alpha * op(A) * op(B) + beta * C` on row-major
/// storage, with transposition expressed through strides.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserted lengths cover every index reachable from the
    // given dimensions and strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Lower triangle (diagonal blocks in full) of `S^T S` for the row-major
/// `rows x cols` matrix `s`, written into `out` with row stride `ldo`.
/// Entries strictly above the diagonal blocks are left untouched.
pub fn gram_lower(s: &[f64], rows: usize, cols: usize, out: &mut [f64], ldo: usize) {
    assert_eq!(s.len(), rows * cols);
    assert!(ldo >= cols && (cols == 0 || out.len() >= (cols - 1) * ldo + cols));
    const NB: usize = 32;
    for i0 in (0..cols).step_by(NB) {
        let i1 = (i0 + NB).min(cols);
        for j0 in (0..=i0).step_by(NB) {
            let j1 = (j0 + NB).min(cols);
            // SAFETY: columns i0..i1 and j0..j1 of `s` and the block
            // (i0..i1, j0..j1) of `out` are in bounds by the asserts.
            unsafe {
                matrixmultiply::dgemm(
                    i1 - i0,
                    rows,
                    j1 - j0,
                    1.0,
                    s.as_ptr().add(i0),
                    1,
                    cols as isize,
                    s.as_ptr().add(j0),
                    cols as isize,
                    1,
                    0.0,
                    out.as_mut_ptr().add(i0 * ldo + j0),
                    ldo as isize,
                    1,
                );
            }
        }
    }
}

/// `y = A x` for a row-major `rows x cols` matrix.
pub fn mat_vec(a: &[f64], rows: usize, cols: usize, x: &[f64], y: &mut [f64]) {
    for (r, yr) in y.iter_mut().enumerate().take(rows) {
        *yr = dot(&a[r * cols..(r + 1) * cols], x);
    }
}

/// `y = A^T x` for a row-major `rows x cols` matrix.
pub fn mat_t_vec(a: &[f64], rows: usize, cols: usize, x: &[f64], y: &mut [f64]) {
    y[..cols].iter_mut().for_each(|v| *v = 0.0);
    for r in 0..rows {
        let xr = x[r];
        if xr == 0.0 {
            continue;
        }
        let row = &a[r * cols..(r + 1) * cols];
        for (yc, &arc) in y.iter_mut().zip(row) {
            *yc += xr * arc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn lower_gram_matches_full_product() {
        for (rows, cols) in [(7, 3), (50, 33), (120, 70)] {
            let s: Vec<f64> = (0..rows * cols).map(|k| ((k * 29) % 13) as f64 - 6.0).collect();
            let mut full = vec![0.0; cols * cols];
            gemm(cols, rows, cols, 1.0, &s, true, &s, false, 0.0, &mut full);
            let ld = cols + 2;
            let mut low = vec![f64::NAN; cols * ld];
            gram_lower(&s, rows, cols, &mut low, ld);
            for i in 0..cols {
                for j in 0..=i {
                    assert_eq!(low[i * ld + j], full[i * cols + j]);
                }
            }
        }
    }

    #[test]
    fn row_solves_match_one_at_a_time() {
        for (n, rows) in [(1, 3), (5, 7), (33, 10), (70, 41)] {
            let mut l = spd(n, 9 + n as u64);
            for i in 0..n {
                l[i * n + i] += n as f64;
            }
            cholesky_in_place(&mut l, n).unwrap();
            let b: Vec<f64> = (0..rows * n).map(|k| ((k * 37) % 11) as f64 - 5.0).collect();
            let mut fast = b.clone();
            solve_lower_rows(&l, n, &mut fast, rows);
            let mut slow = b.clone();
            for row in slow.chunks_exact_mut(n) {
                solve_lower(&l, n, row);
            }
            for (x, y) in fast.iter().zip(&slow) {
                assert!((x - y).abs() < 1e-10 * (1.0 + y.abs()), "{x} vs {y}");
            }
        }
    }

    fn spd(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let b: Vec<f64> = (0..n * n).map(|_| next()).collect();
        let mut a = vec![0.0; n * n];
        gemm(n, n, n, 1.0, &b, false, &b, true, 0.0, &mut a);
        for i in 0..n {
            a[i * n + i] += n as f64 * 0.1;
        }
        a
    }

    #[test]
    fn cholesky_matches_nalgebra() {
        for n in [17, 32, 70, 101] {
            let mut a = spd(n, 3 + n as u64);
            for i in 0..n {
                a[i * n + i] += 1.0;
            }
            let mut l = a.clone();
            cholesky_in_place(&mut l, n).unwrap();
            let reference = DMatrix::from_row_slice(n, n, &a).cholesky().unwrap().l();
            for i in 0..n {
                for j in 0..n {
                    assert!((l[i * n + j] - reference[(i, j)]).abs() < 1e-11);
                }
            }
            let det = DMatrix::from_row_slice(n, n, &a).determinant();
            assert!((chol_log_det(&l, n) - det.ln()).abs() < 1e-8 * det.ln().abs().max(1.0));
        }
        let mut bad = vec![1.0, 2.0, 2.0, 1.0];
        assert_eq!(cholesky_in_place(&mut bad, 2), Err(1));
    }

    #[test]
    fn triangular_solves_and_inverse() {
        let n = 9;
        let a = spd(n, 11);
        let mut l = a.clone();
        cholesky_in_place(&mut l, n).unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
        let mut x = b.clone();
        solve_lower(&l, n, &mut x);
        solve_lower_transpose(&l, n, &mut x);
        let mut ax = vec![0.0; n];
        mat_vec(&a, n, n, &x, &mut ax);
        for i in 0..n {
            assert!((ax[i] - b[i]).abs() < 1e-10);
        }
        let inv = lower_inverse(&l, n);
        let mut prod = vec![0.0; n * n];
        gemm(n, n, n, 1.0, &l, false, &inv, false, 0.0, &mut prod);
        for i in 0..n {
            for j in 0..n {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((prod[i * n + j] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jitter_rescues_semidefinite() {
        // rank-one matrix of ones
        let n = 4;
        let a = vec![1.0; n * n];
        let (_, jitter) = cholesky_jittered(&a, n, 0.0, "ones").unwrap();
        assert!(jitter >= JITTER_START && jitter <= JITTER_MAX);
        let neg = vec![-1.0, 0.0, 0.0, -1.0];
        assert!(cholesky_jittered(&neg, 2, 0.0, "neg").is_err());
    }

    #[test]
    fn gemm_transposes() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let mut c = vec![0.0; 9];
        gemm(3, 2, 3, 1.0, &a, true, &a, false, 0.0, &mut c);
        assert_eq!(c, vec![17.0, 22.0, 27.0, 22.0, 29.0, 36.0, 27.0, 36.0, 45.0]);
        let mut y = vec![0.0; 3];
        mat_t_vec(&a, 2, 3, &[1.0, 1.0], &mut y);
        assert_eq!(y, vec![5.0, 7.0, 9.0]);
    }
}
