//! Rank-revealing primitives: interpolatory decompositions built on
//! column-pivoted Householder QR, plus thin QR, SVD and guarded inverses.

use nalgebra::{DMatrix, DVector};

use crate::quadrature::DenseMatrix;

/// Largest interpolation coefficient accepted before skeleton swaps kick in.
pub const INTERP_BOUND: f64 = 2.0;

/// `B ≈ U B(J,:)` (row form) or `B ≈ B(:,J) Uᵀ` (column form).
#[derive(Clone, Debug, PartialEq)]
pub struct InterpolatoryDecomposition {
    /// Skeleton positions `J`, in pivot order.
    pub skeleton: Vec<usize>,
    /// `m × k` with `interp.rows(J) = I_k`.
    pub interp: DenseMatrix,
}

impl InterpolatoryDecomposition {
    pub fn rank(&self) -> usize {
        self.skeleton.len()
    }
}

/// Row ID: `‖B - U B(J,:)‖_F ≤ tol ‖B‖_F` with the smallest rank the
/// pivoted QR of `Bᵀ` certifies.
pub fn id_row(b: &DenseMatrix, tol: f64) -> InterpolatoryDecomposition {
    id_row_min_rank(b, tol, 0)
}

/// Row ID whose rank is at least `min_rank` (capped by the row count).
pub fn id_row_min_rank(b: &DenseMatrix, tol: f64, min_rank: usize) -> InterpolatoryDecomposition {
    column_id(b.transpose(), tol, min_rank)
}

/// Column ID: `‖B - B(:,J) Vᵀ‖_F ≤ tol ‖B‖_F`; `interp` holds `V`.
pub fn id_col(b: &DenseMatrix, tol: f64) -> InterpolatoryDecomposition {
    id_col_min_rank(b, tol, 0)
}

pub fn id_col_min_rank(b: &DenseMatrix, tol: f64, min_rank: usize) -> InterpolatoryDecomposition {
    column_id(b.clone(), tol, min_rank)
}

/// Selects columns of `m`: `m ≈ m(:,J) T` with `T(:,J) = I`, returned as
/// `interp = Tᵀ`.
fn column_id(mut m: DenseMatrix, tol: f64, min_rank: usize) -> InterpolatoryDecomposition {
    let (rows, cols) = m.shape();
    let original = m.clone();
    let min_rank = min_rank.min(rows).min(cols);
    let total = m.norm();
    if cols == 0 {
        return InterpolatoryDecomposition {
            skeleton: vec![],
            interp: DenseMatrix::zeros(0, 0),
        };
    }
    if total == 0.0 && min_rank == 0 {
        return InterpolatoryDecomposition {
            skeleton: vec![],
            interp: DenseMatrix::zeros(cols, 0),
        };
    }
    let threshold = tol * total;
    let mut perm: Vec<usize> = (0..cols).collect();
    let max_rank = rows.min(cols);
    let mut k = 0;
    let mut norms2 = vec![0.0; cols];
    while k < max_rank {
        let mut trailing = 0.0;
        for (j, n2) in norms2.iter_mut().enumerate().skip(k) {
            *n2 = m.view((k, j), (rows - k, 1)).norm_squared();
            trailing += *n2;
        }
        if k >= min_rank && trailing.sqrt() <= threshold {
            break;
        }
        let piv = (k..cols)
            .max_by(|&a, &b| norms2[a].total_cmp(&norms2[b]))
            .unwrap();
        if norms2[piv] == 0.0 {
            // Remaining columns vanish; only reachable when min_rank forces it.
            perm.swap(k, piv);
            m.swap_columns(k, piv);
            k += 1;
            continue;
        }
        m.swap_columns(k, piv);
        perm.swap(k, piv);
        householder_step(&mut m, k);
        k += 1;
    }
    if k == cols {
        return assemble_interp(cols, &perm, &[], &DenseMatrix::zeros(k, 0));
    }
    let r11 = m.view((0, 0), (k, k)).upper_triangle();
    let r12 = m.view((0, k), (k, cols - k)).into_owned();
    let t = solve_upper(&r11, &r12)
        .unwrap_or_else(|| least_squares_coeffs(&original, &perm[..k], &perm[k..]));
    let mut skeleton = perm[..k].to_vec();
    let mut rest = perm[k..].to_vec();
    let t = enforce_bound(&original, &mut skeleton, &mut rest, t, threshold);
    assemble_interp(cols, &skeleton, &rest, &t)
}

fn householder_step(m: &mut DenseMatrix, k: usize) {
    let rows = m.nrows();
    let mut v: DVector<f64> = m.view((k, k), (rows - k, 1)).column(0).into_owned();
    let alpha = v.norm();
    if alpha == 0.0 {
        return;
    }
    let beta = if v[0] >= 0.0 { -alpha } else { alpha };
    v[0] -= beta;
    let vnorm2 = v.norm_squared();
    if vnorm2 == 0.0 {
        return;
    }
    let cols = m.ncols();
    let mut block = m.view_mut((k, k), (rows - k, cols - k));
    let w = block.tr_mul(&v) * (2.0 / vnorm2);
    block.ger(-1.0, &v, &w, 1.0);
    m[(k, k)] = beta;
    for i in k + 1..rows {
        m[(i, k)] = 0.0;
    }
}

/// Back substitution `R X = B` for upper-triangular `R`; `None` if a
/// diagonal entry is zero.
fn solve_upper(r: &DenseMatrix, b: &DenseMatrix) -> Option<DenseMatrix> {
    let k = r.nrows();
    if (0..k).any(|i| r[(i, i)] == 0.0) {
        return None;
    }
    let mut x = b.clone();
    for c in 0..x.ncols() {
        for i in (0..k).rev() {
            let mut s = x[(i, c)];
            for j in i + 1..k {
                s -= r[(i, j)] * x[(j, c)];
            }
            x[(i, c)] = s / r[(i, i)];
        }
    }
    Some(x)
}

fn least_squares_coeffs(m: &DenseMatrix, skel: &[usize], rest: &[usize]) -> DenseMatrix {
    let a = m.select_columns(skel);
    let b = m.select_columns(rest);
    a.svd(true, true)
        .solve(&b, 1e-14)
        .unwrap_or_else(|_| DenseMatrix::zeros(skel.len(), rest.len()))
}

/// Swaps skeleton and redundant columns while some coefficient exceeds
/// [`INTERP_BOUND`]; each swap grows `|det m(:,J)|` by that factor, so the
/// loop terminates. Reverts if the residual bound would be lost.
fn enforce_bound(
    m: &DenseMatrix,
    skel: &mut Vec<usize>,
    rest: &mut Vec<usize>,
    t: DenseMatrix,
    threshold: f64,
) -> DenseMatrix {
    let mut t = t;
    let limit = 4 * skel.len() + 8;
    let (orig_skel, orig_rest, orig_t) = (skel.clone(), rest.clone(), t.clone());
    let mut swapped = false;
    for _ in 0..limit {
        let Some((i, j, v)) = t
            .iter()
            .enumerate()
            .map(|(idx, v)| (idx % t.nrows(), idx / t.nrows(), v.abs()))
            .max_by(|a, b| a.2.total_cmp(&b.2))
        else {
            break;
        };
        if v <= INTERP_BOUND {
            break;
        }
        std::mem::swap(&mut skel[i], &mut rest[j]);
        t = least_squares_coeffs(m, skel, rest);
        swapped = true;
    }
    if swapped {
        let resid = m.select_columns(rest.iter()) - m.select_columns(skel.iter()) * &t;
        if resid.norm() > threshold.max(f64::MIN_POSITIVE) {
            *skel = orig_skel;
            *rest = orig_rest;
            return orig_t;
        }
    }
    t
}

fn assemble_interp(
    cols: usize,
    skel: &[usize],
    rest: &[usize],
    t: &DenseMatrix,
) -> InterpolatoryDecomposition {
    let k = skel.len();
    let mut interp = DenseMatrix::zeros(cols, k);
    for (a, &s) in skel.iter().enumerate() {
        interp[(s, a)] = 1.0;
    }
    for (b, &r) in rest.iter().enumerate() {
        for a in 0..k {
            interp[(r, a)] = t[(a, b)];
        }
    }
    InterpolatoryDecomposition {
        skeleton: skel.to_vec(),
        interp,
    }
}

/// Thin QR: `Q` is `m × min(m,n)` with orthonormal columns.
pub fn thin_qr(b: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (m, n) = b.shape();
    if m == 0 || n == 0 {
        let p = m.min(n);
        return (DenseMatrix::zeros(m, p), DenseMatrix::zeros(p, n));
    }
    let qr = b.clone().qr();
    (qr.q(), qr.r())
}

/// Thin SVD `B = X diag(σ) Yᵀ` with `σ` nonincreasing.
pub fn svd(b: &DenseMatrix) -> (DenseMatrix, Vec<f64>, DenseMatrix) {
    let (m, n) = b.shape();
    let p = m.min(n);
    if p == 0 {
        return (DenseMatrix::zeros(m, 0), vec![], DenseMatrix::zeros(n, 0));
    }
    let s = b.clone().svd(true, true);
    let u = s.u.expect("left singular vectors");
    let vt = s.v_t.expect("right singular vectors");
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &c| s.singular_values[c].total_cmp(&s.singular_values[a]));
    let sigma = order.iter().map(|&i| s.singular_values[i]).collect();
    let x = u.select_columns(&order);
    let y = vt.select_rows(&order).transpose();
    (x, sigma, y)
}

/// Full SVD: `X` is `m × m`, `Y` is `n × n`, `Σ` is `m × n` diagonal.
pub fn svd_full(b: &DenseMatrix) -> (DenseMatrix, DenseMatrix, DenseMatrix) {
    let (m, n) = b.shape();
    let (x, sigma, y) = svd(b);
    let mut s = DenseMatrix::zeros(m, n);
    for (i, v) in sigma.iter().enumerate() {
        s[(i, i)] = *v;
    }
    (complete_basis(&x, m), s, complete_basis(&y, n))
}

/// Extends orthonormal columns `q` to an orthonormal basis of `R^m`.
fn complete_basis(q: &DenseMatrix, m: usize) -> DenseMatrix {
    let r = q.ncols();
    if r == m {
        return q.clone();
    }
    let mut aug = DenseMatrix::zeros(m, r + m);
    aug.view_mut((0, 0), (m, r)).copy_from(q);
    aug.view_mut((0, r), (m, m)).fill_with_identity();
    let full = aug.qr().q();
    let mut out = full.clone();
    out.view_mut((0, 0), (m, r)).copy_from(q);
    out
}

/// Inverse with a 1-norm condition number; `None` if singular.
pub fn inverse_with_cond(a: &DenseMatrix) -> Option<(DenseMatrix, f64)> {
    let n = a.nrows();
    if n == 0 {
        return Some((DenseMatrix::zeros(0, 0), 1.0));
    }
    let inv = a.clone().lu().try_inverse()?;
    if inv.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let cond = norm_1(a) * norm_1(&inv);
    Some((inv, cond))
}

pub fn norm_1(a: &DenseMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn min_symmetric_eigenvalue(a: &DenseMatrix) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Block-diagonal matrix of the given blocks.
pub fn block_diag(blocks: &[&DenseMatrix]) -> DenseMatrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// `[[a, b], [c, d]]` from four compatible blocks.
pub fn two_by_two(
    a: &DenseMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
    d: &DenseMatrix,
) -> DenseMatrix {
    let (r1, c1) = (a.nrows(), a.ncols());
    let (r2, c2) = (d.nrows(), d.ncols());
    let mut out = DMatrix::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(a);
    out.view_mut((0, c1), (r1, c2)).copy_from(b);
    out.view_mut((r1, 0), (r2, c1)).copy_from(c);
    out.view_mut((r1, c1), (r2, c2)).copy_from(d);
    out
}
