//! Thin safe wrappers over the LAPACK routines the crate needs: complex
//! Schur decomposition, Schur reordering, triangular Sylvester solves and
//! Hermitian eigenvalues. Everything converts between ndarray's row-major
//! layout and LAPACK's column-major at the boundary.

use crate::{Error, Result};
use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use std::os::raw::{c_char, c_int};

fn to_col_major(a: &ArrayView2<Complex64>) -> Vec<Complex64> {
    let (rows, cols) = a.dim();
    let mut out = Vec::with_capacity(rows * cols);
    for j in 0..cols {
        for i in 0..rows {
            out.push(a[(i, j)]);
        }
    }
    out
}

fn from_col_major(buf: &[Complex64], rows: usize, cols: usize) -> Array2<Complex64> {
    Array2::from_shape_fn((rows, cols), |(i, j)| buf[j * rows + i])
}

/// Complex Schur decomposition `A = Z T Z^*` with `T` upper triangular.
/// Returns `(Z, T, eigenvalues)`.
pub fn schur(a: &Array2<Complex64>) -> Result<(Array2<Complex64>, Array2<Complex64>, Vec<Complex64>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Factorization("matrix must be square".into()));
    }
    let ni = n as c_int;
    let mut t = to_col_major(&a.view());
    let mut w = vec![Complex64::default(); n];
    let mut vs = vec![Complex64::default(); n * n];
    let mut sdim: c_int = 0;
    let mut info: c_int = 0;
    let jobvs = b'V' as c_char;
    let sort = b'N' as c_char;
    let mut rwork = vec![0f64; n];
    let mut bwork = vec![0 as c_int; n.max(1)];

    let mut query = [Complex64::default(); 1];
    let neg_one: c_int = -1;
    unsafe {
        lapack_sys::zgees_(
            &jobvs,
            &sort,
            None,
            &ni,
            t.as_mut_ptr().cast(),
            &ni,
            &mut sdim,
            w.as_mut_ptr().cast(),
            vs.as_mut_ptr().cast(),
            &ni,
            query.as_mut_ptr().cast(),
            &neg_one,
            rwork.as_mut_ptr(),
            bwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "zgees (workspace)", info });
    }
    let lwork = query[0].re as c_int;
    let mut work = vec![Complex64::default(); lwork.max(1) as usize];
    unsafe {
        lapack_sys::zgees_(
            &jobvs,
            &sort,
            None,
            &ni,
            t.as_mut_ptr().cast(),
            &ni,
            &mut sdim,
            w.as_mut_ptr().cast(),
            vs.as_mut_ptr().cast(),
            &ni,
            work.as_mut_ptr().cast(),
            &lwork,
            rwork.as_mut_ptr(),
            bwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "zgees", info });
    }
    Ok((from_col_major(&vs, n, n), from_col_major(&t, n, n), w))
}

/// Eigenvalues of a Hermitian matrix, ascending. Only the upper triangle is
/// referenced.
pub fn eigh_values(a: &Array2<Complex64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Factorization("matrix must be square".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let ni = n as c_int;
    let mut buf = to_col_major(&a.view());
    let mut w = vec![0f64; n];
    let jobz = b'N' as c_char;
    let uplo = b'U' as c_char;
    let mut rwork = vec![0f64; (3 * n).max(1)];
    let mut info: c_int = 0;
    let mut query = [Complex64::default(); 1];
    let neg_one: c_int = -1;
    unsafe {
        lapack_sys::zheev_(
            &jobz,
            &uplo,
            &ni,
            buf.as_mut_ptr().cast(),
            &ni,
            w.as_mut_ptr(),
            query.as_mut_ptr().cast(),
            &neg_one,
            rwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "zheev (workspace)", info });
    }
    let lwork = query[0].re as c_int;
    let mut work = vec![Complex64::default(); lwork.max(1) as usize];
    unsafe {
        lapack_sys::zheev_(
            &jobz,
            &uplo,
            &ni,
            buf.as_mut_ptr().cast(),
            &ni,
            w.as_mut_ptr(),
            work.as_mut_ptr().cast(),
            &lwork,
            rwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "zheev", info });
    }
    Ok(w)
}

/// Move the diagonal entry of the triangular factor from position `ifst` to
/// `ilst` (0-based) by a unitary similarity, updating `t` and `z` in place.
pub fn schur_reorder(
    t: &mut Array2<Complex64>,
    z: &mut Array2<Complex64>,
    ifst: usize,
    ilst: usize,
) -> Result<()> {
    if ifst == ilst {
        return Ok(());
    }
    let n = t.nrows();
    let ni = n as c_int;
    let mut tb = to_col_major(&t.view());
    let mut zb = to_col_major(&z.view());
    let compq = b'V' as c_char;
    let ifst1 = (ifst + 1) as c_int;
    let ilst1 = (ilst + 1) as c_int;
    let mut info: c_int = 0;
    unsafe {
        lapack_sys::ztrexc_(
            &compq,
            &ni,
            tb.as_mut_ptr().cast(),
            &ni,
            zb.as_mut_ptr().cast(),
            &ni,
            &ifst1,
            &ilst1,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "ztrexc", info });
    }
    *t = from_col_major(&tb, n, n);
    *z = from_col_major(&zb, n, n);
    Ok(())
}

/// Solve the triangular Sylvester equation `A X - X B = C` with `A`, `B`
/// upper triangular (the LAPACK `isgn = -1` convention).
pub fn sylvester_triangular(
    a: &ArrayView2<Complex64>,
    b: &ArrayView2<Complex64>,
    c: &Array2<Complex64>,
) -> Result<Array2<Complex64>> {
    let m = a.nrows();
    let n = b.nrows();
    let mi = m as c_int;
    let ni = n as c_int;
    let ab = to_col_major(a);
    let bb = to_col_major(b);
    let mut cb = to_col_major(&c.view());
    let trana = b'N' as c_char;
    let tranb = b'N' as c_char;
    let isgn: c_int = -1;
    let mut scale = 0f64;
    let mut info: c_int = 0;
    unsafe {
        lapack_sys::ztrsyl_(
            &trana,
            &tranb,
            &isgn,
            &mi,
            &ni,
            ab.as_ptr().cast(),
            &mi,
            bb.as_ptr().cast(),
            &ni,
            cb.as_mut_ptr().cast(),
            &mi,
            &mut scale,
            &mut info,
        );
    }
    if info < 0 {
        return Err(Error::Lapack { routine: "ztrsyl", info });
    }
    // info == 1 means perturbed values were used; the scale still applies
    let inv = Complex64::from(1.0 / scale);
    for v in cb.iter_mut() {
        *v *= inv;
    }
    Ok(from_col_major(&cb, m, n))
}

/// Frobenius norm.
pub fn fro_norm(a: &ArrayView2<Complex64>) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Conjugate transpose.
pub fn adjoint(a: &ArrayView2<Complex64>) -> Array2<Complex64> {
    let (r, c) = a.dim();
    Array2::from_shape_fn((c, r), |(i, j)| a[(j, i)].conj())
}
