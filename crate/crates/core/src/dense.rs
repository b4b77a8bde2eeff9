//! Low-level dense kernels shared by the subspace and operator layers.
//!
//! Matrices produced by densified lattice operators are mostly exact zeros, so
//! the rank-revealing routines first split a matrix into the connected
//! components of its nonzero pattern (rows and columns linked by a nonzero
//! entry). After permutation the matrix is block diagonal in those components,
//! and singular values and vectors can be computed block by block. A fully
//! dense matrix is a single component and goes straight to one SVD.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::svd::{self, ComputeSvdVectors};
use faer::diag::Diag;
use faer::{c64, Mat, MatRef, Par};

use crate::error::{Error, Result};

/// One connected component of a matrix's nonzero pattern.
#[derive(Debug, Clone)]
struct Block {
    rows: Vec<usize>,
    cols: Vec<usize>,
}

struct Pattern {
    blocks: Vec<Block>,
    zero_cols: Vec<usize>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn pattern(a: MatRef<'_, c64>) -> Pattern {
    let (m, n) = a.shape();
    let mut parent: Vec<usize> = (0..m + n).collect();
    let mut row_used = vec![false; m];
    let mut col_used = vec![false; n];
    for j in 0..n {
        for i in 0..m {
            let z = a[(i, j)];
            if z.re != 0.0 || z.im != 0.0 {
                row_used[i] = true;
                col_used[j] = true;
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, m + j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    // Group by root; order blocks by their first column so the output is stable.
    let mut by_root: std::collections::BTreeMap<usize, Block> = Default::default();
    let mut first_col: std::collections::BTreeMap<usize, usize> = Default::default();
    let mut zero_cols = Vec::new();
    for j in 0..n {
        if !col_used[j] {
            zero_cols.push(j);
            continue;
        }
        let r = find(&mut parent, m + j);
        first_col.entry(r).or_insert(j);
        by_root
            .entry(r)
            .or_insert_with(|| Block {
                rows: Vec::new(),
                cols: Vec::new(),
            })
            .cols
            .push(j);
    }
    for i in 0..m {
        if row_used[i] {
            let r = find(&mut parent, i);
            if let Some(b) = by_root.get_mut(&r) {
                b.rows.push(i);
            }
        }
    }
    let mut keyed: Vec<(usize, Block)> = by_root
        .into_iter()
        .map(|(r, b)| (first_col[&r], b))
        .collect();
    keyed.sort_by_key(|(c, _)| *c);
    Pattern {
        blocks: keyed.into_iter().map(|(_, b)| b).collect(),
        zero_cols,
    }
}

fn sub_matrix(a: MatRef<'_, c64>, rows: &[usize], cols: &[usize]) -> Mat<c64> {
    Mat::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

struct SvdOut {
    s: Vec<f64>,
    u: Option<Mat<c64>>,
    v: Option<Mat<c64>>,
}

/// Sequential SVD with nonincreasing singular values. `u` is thin, `v` is full.
fn svd_seq(a: MatRef<'_, c64>, want_u: bool, want_v: bool) -> Result<SvdOut> {
    let (m, n) = a.shape();
    let size = m.min(n);
    if size == 0 {
        return Ok(SvdOut {
            s: Vec::new(),
            u: want_u.then(|| Mat::zeros(m, 0)),
            v: want_v.then(|| Mat::identity(n, n)),
        });
    }
    let cu = if want_u {
        ComputeSvdVectors::Thin
    } else {
        ComputeSvdVectors::No
    };
    let cv = if want_v {
        ComputeSvdVectors::Full
    } else {
        ComputeSvdVectors::No
    };
    let mut s = Diag::<c64>::zeros(size);
    let mut u = want_u.then(|| Mat::<c64>::zeros(m, size));
    let mut v = want_v.then(|| Mat::<c64>::zeros(n, n));
    let par = Par::Seq;
    let mut buf = MemBuffer::new(svd::svd_scratch::<c64>(m, n, cu, cv, par, Default::default()));
    svd::svd(
        a,
        s.as_mut(),
        u.as_mut().map(|x| x.as_mut()),
        v.as_mut().map(|x| x.as_mut()),
        par,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|e| Error::Numerical(format!("svd did not converge: {e:?}")))?;
    let s = s.column_vector().iter().map(|z| z.re).collect();
    Ok(SvdOut { s, u, v })
}

fn check_finite(a: MatRef<'_, c64>) -> Result<()> {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let z = a[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite);
            }
        }
    }
    Ok(())
}

/// Rank threshold `rtol · max(σ_max, floor)`.
fn threshold(s_max: f64, rtol: f64, floor: f64) -> f64 {
    rtol * s_max.max(floor)
}

/// Singular values of `a` (nonzero-pattern blocks merged), sorted nonincreasing.
pub(crate) fn singular_values(a: MatRef<'_, c64>) -> Result<Vec<f64>> {
    check_finite(a)?;
    let p = pattern(a);
    let mut out = Vec::new();
    for b in &p.blocks {
        let sub = sub_matrix(a, &b.rows, &b.cols);
        out.extend(svd_seq(sub.as_ref(), false, false)?.s);
    }
    out.sort_by(|x, y| y.total_cmp(x));
    Ok(out)
}

/// Largest singular value; 0 for empty or zero matrices.
pub(crate) fn spectral_norm(a: MatRef<'_, c64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    match singular_values(a) {
        Ok(s) => s.first().copied().unwrap_or(0.0),
        Err(_) => f64::INFINITY,
    }
}

/// Orthonormal basis of the null space of `a` (an `ncols × k` matrix).
pub(crate) fn null_space(a: MatRef<'_, c64>, rtol: f64, floor: f64) -> Result<Mat<c64>> {
    check_finite(a)?;
    let n = a.ncols();
    let p = pattern(a);
    let mut parts = Vec::with_capacity(p.blocks.len());
    let mut s_max = 0.0f64;
    for b in &p.blocks {
        let sub = sub_matrix(a, &b.rows, &b.cols);
        let out = svd_seq(sub.as_ref(), false, true)?;
        s_max = s_max.max(out.s.first().copied().unwrap_or(0.0));
        parts.push(out);
    }
    let thr = threshold(s_max, rtol, floor);
    let mut columns: Vec<Vec<(usize, c64)>> = Vec::new();
    for (b, out) in p.blocks.iter().zip(&parts) {
        let rank = out.s.iter().filter(|&&x| x > thr).count();
        let v = out.v.as_ref().expect("requested v");
        for k in rank..b.cols.len() {
            columns.push(b.cols.iter().enumerate().map(|(i, &c)| (c, v[(i, k)])).collect());
        }
    }
    for &c in &p.zero_cols {
        columns.push(vec![(c, c64::new(1.0, 0.0))]);
    }
    Ok(assemble(n, &columns))
}

/// Orthonormal basis of the column space of `a` (an `nrows × r` matrix).
pub(crate) fn column_space(a: MatRef<'_, c64>, rtol: f64, floor: f64) -> Result<Mat<c64>> {
    check_finite(a)?;
    let m = a.nrows();
    let p = pattern(a);
    let mut parts = Vec::with_capacity(p.blocks.len());
    let mut s_max = 0.0f64;
    for b in &p.blocks {
        let sub = sub_matrix(a, &b.rows, &b.cols);
        let out = svd_seq(sub.as_ref(), true, false)?;
        s_max = s_max.max(out.s.first().copied().unwrap_or(0.0));
        parts.push(out);
    }
    let thr = threshold(s_max, rtol, floor);
    let mut columns: Vec<Vec<(usize, c64)>> = Vec::new();
    for (b, out) in p.blocks.iter().zip(&parts) {
        let rank = out.s.iter().filter(|&&x| x > thr).count();
        let u = out.u.as_ref().expect("requested u");
        for k in 0..rank {
            columns.push(b.rows.iter().enumerate().map(|(i, &r)| (r, u[(i, k)])).collect());
        }
    }
    Ok(assemble(m, &columns))
}

fn assemble(n: usize, columns: &[Vec<(usize, c64)>]) -> Mat<c64> {
    let mut out = Mat::<c64>::zeros(n, columns.len());
    for (k, col) in columns.iter().enumerate() {
        for &(i, z) in col {
            out[(i, k)] = z;
        }
    }
    out
}

/// Puts each column in a canonical gauge: the first entry of (near) maximal
/// modulus is made real positive, then columns are sorted by that entry's row.
pub(crate) fn canonicalize_columns(b: &mut Mat<c64>) {
    let (n, r) = b.shape();
    if r == 0 {
        return;
    }
    let mut keys = Vec::with_capacity(r);
    for k in 0..r {
        let mut max = 0.0f64;
        for i in 0..n {
            max = max.max(b[(i, k)].norm());
        }
        let lead = (0..n)
            .find(|&i| b[(i, k)].norm() >= max * (1.0 - 1e-9))
            .unwrap_or(0);
        let z = b[(lead, k)];
        let m = z.norm();
        if m > 0.0 {
            let phase = z.conj() / m;
            for i in 0..n {
                b[(i, k)] *= phase;
            }
            b[(lead, k)] = c64::new(b[(lead, k)].norm(), 0.0);
        }
        keys.push((lead, k));
    }
    keys.sort();
    if keys.iter().enumerate().all(|(pos, &(_, k))| pos == k) {
        return;
    }
    let src = b.clone();
    for (pos, &(_, k)) in keys.iter().enumerate() {
        for i in 0..n {
            b[(i, pos)] = src[(i, k)];
        }
    }
}

fn nonzeros(a: MatRef<'_, c64>) -> Vec<(usize, usize, c64)> {
    let mut out = Vec::new();
    for k in 0..a.ncols() {
        for i in 0..a.nrows() {
            let z = a[(i, k)];
            if z.re != 0.0 || z.im != 0.0 {
                out.push((i, k, z));
            }
        }
    }
    out
}

/// Matrix product that switches to a sparse loop when `a` is mostly zeros.
pub(crate) fn matmul(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape mismatch");
    let (m, n) = (a.nrows(), b.ncols());
    let size = a.nrows() * a.ncols();
    if size >= 1024 {
        let nz = nonzeros(a);
        if nz.len() * 8 <= size {
            let mut out = Mat::<c64>::zeros(m, n);
            for j in 0..n {
                for &(i, k, z) in &nz {
                    let y = b[(k, j)];
                    if y.re != 0.0 || y.im != 0.0 {
                        out[(i, j)] += z * y;
                    }
                }
            }
            return out;
        }
    }
    let mut out = Mat::<c64>::zeros(m, n);
    faer::linalg::matmul::matmul(
        out.as_mut(),
        faer::Accum::Replace,
        a,
        b,
        c64::new(1.0, 0.0),
        Par::Seq,
    );
    out
}

/// `x − b (b* x)`: component of `x` orthogonal to the orthonormal columns of `b`.
pub(crate) fn reject(b: MatRef<'_, c64>, x: MatRef<'_, c64>) -> Mat<c64> {
    let coeffs = matmul(adjoint(b).as_ref(), x);
    let proj = matmul(b, coeffs.as_ref());
    Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - proj[(i, j)])
}

/// Owned conjugate transpose.
pub(crate) fn adjoint(a: MatRef<'_, c64>) -> Mat<c64> {
    a.adjoint().to_owned()
}

/// `‖a − I‖` for square `a`.
pub(crate) fn distance_to_identity(a: MatRef<'_, c64>) -> f64 {
    let n = a.nrows();
    let d = Mat::from_fn(n, n, |i, j| {
        if i == j {
            a[(i, j)] - c64::new(1.0, 0.0)
        } else {
            a[(i, j)]
        }
    });
    spectral_norm(d.as_ref())
}

/// Stacks matrices with a common column count vertically.
pub(crate) fn vstack(parts: &[MatRef<'_, c64>]) -> Mat<c64> {
    let n = parts.first().map(|p| p.ncols()).unwrap_or(0);
    let m: usize = parts.iter().map(|p| p.nrows()).sum();
    let mut out = Mat::<c64>::zeros(m, n);
    let mut offset = 0;
    for p in parts {
        for j in 0..n {
            for i in 0..p.nrows() {
                out[(offset + i, j)] = p[(i, j)];
            }
        }
        offset += p.nrows();
    }
    out
}

/// Concatenates matrices with a common row count horizontally.
pub(crate) fn hstack(nrows: usize, parts: &[MatRef<'_, c64>]) -> Mat<c64> {
    let n: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = Mat::<c64>::zeros(nrows, n);
    let mut offset = 0;
    for p in parts {
        for j in 0..p.ncols() {
            for i in 0..nrows {
                out[(i, offset + j)] = p[(i, j)];
            }
        }
        offset += p.ncols();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> c64 {
        c64::new(re, 0.0)
    }

    #[test]
    fn block_split_matches_full_svd() {
        // Two decoupled 2x2 blocks plus a zero column, interleaved.
        let mut a = Mat::<c64>::zeros(5, 5);
        a[(0, 0)] = c(3.0);
        a[(0, 2)] = c(1.0);
        a[(2, 0)] = c(1.0);
        a[(2, 2)] = c(3.0);
        a[(1, 1)] = c(2.0);
        a[(3, 3)] = c(0.5);
        let s = singular_values(a.as_ref()).unwrap();
        let full = svd_seq(a.as_ref(), false, false).unwrap().s;
        let nonzero: Vec<f64> = full.into_iter().filter(|x| *x > 1e-14).collect();
        assert_eq!(s.len(), nonzero.len());
        for (x, y) in s.iter().zip(&nonzero) {
            assert!((x - y).abs() < 1e-12);
        }
        let k = null_space(a.as_ref(), 1e-10, 1.0).unwrap();
        assert_eq!(k.ncols(), 1);
        assert!((k[(4, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sparse_and_dense_matmul_agree() {
        let a = Mat::<c64>::from_fn(40, 40, |i, j| {
            if (i + 3 * j) % 11 == 0 {
                c64::new(i as f64, j as f64 * 0.5)
            } else {
                c(0.0)
            }
        });
        let b = Mat::<c64>::from_fn(40, 7, |i, j| c64::new((i * j) as f64 * 0.1, 1.0));
        let sparse = matmul(a.as_ref(), b.as_ref());
        let dense = &a * &b;
        let diff = &sparse - &dense;
        assert!(spectral_norm(diff.as_ref()) < 1e-10);
    }

    #[test]
    fn canonical_gauge_sorts_and_rotates() {
        let i = c64::new(0.0, 1.0);
        let mut b = Mat::<c64>::zeros(3, 2);
        b[(2, 0)] = i;
        b[(0, 1)] = -c(1.0);
        canonicalize_columns(&mut b);
        assert_eq!(b[(0, 0)], c(1.0));
        assert_eq!(b[(2, 1)], c(1.0));
    }
}
