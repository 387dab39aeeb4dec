//! Thin QR (plain and column-pivoted), one-sided Jacobi SVD, symmetric
//! Jacobi eigendecomposition, truncation and pseudo-inverse.

use crate::flops;
use crate::tensor::DenseMatrix;
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Singular value decomposition `M = U diag(S) V^T` with orthonormal
/// columns and `S` sorted nonincreasing.
#[derive(Clone, Debug)]
pub struct SvdTriplet {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdTriplet {
    /// Reconstruct `U diag(S) V^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for (j, &s) in self.s.iter().enumerate() {
            for v in us.col_mut(j) {
                *v *= s;
            }
        }
        us.matmul_t(&self.v)
    }
}

fn house_apply(v: &[f64], vn2: f64, col: &mut [f64]) {
    if vn2 == 0.0 {
        return;
    }
    let mut dot = 0.0;
    for (a, b) in v.iter().zip(col.iter()) {
        dot += a * b;
    }
    let s = 2.0 * dot / vn2;
    for (a, b) in v.iter().zip(col.iter_mut()) {
        *b -= s * a;
    }
    flops::add(2 * v.len() as u64);
}

struct HouseholderQr {
    /// Upper-triangular factor, in place over the input copy.
    work: DenseMatrix,
    /// Reflector vectors (length m-k) and their squared norms.
    vs: Vec<(Vec<f64>, f64)>,
}

fn householder_factor(a: &DenseMatrix, steps: usize) -> HouseholderQr {
    let (m, n) = (a.rows(), a.cols());
    let mut work = a.clone();
    let mut vs = Vec::with_capacity(steps);
    for k in 0..steps {
        let colk = &work.col(k)[k..];
        let norm = colk.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            vs.push((vec![0.0; m - k], 0.0));
            continue;
        }
        let alpha = if colk[0] >= 0.0 { -norm } else { norm };
        let mut v = colk.to_vec();
        v[0] -= alpha;
        let vn2: f64 = v.iter().map(|x| x * x).sum();
        for j in k..n {
            house_apply(&v, vn2, &mut work.col_mut(j)[k..]);
        }
        // The reflection maps column k to alpha*e1 exactly.
        let ck = &mut work.col_mut(k)[k..];
        ck[0] = alpha;
        for x in ck[1..].iter_mut() {
            *x = 0.0;
        }
        vs.push((v, vn2));
    }
    HouseholderQr { work, vs }
}

/// Accumulate the thin `m x k` Q factor from stored reflectors.
fn accumulate_q(m: usize, hq: &HouseholderQr) -> DenseMatrix {
    let k = hq.vs.len();
    let mut q = DenseMatrix::zeros(m, k);
    for i in 0..k {
        q.set(i, i, 1.0);
    }
    for (step, (v, vn2)) in hq.vs.iter().enumerate().rev() {
        for j in 0..k {
            house_apply(v, *vn2, &mut q.col_mut(j)[step..]);
        }
    }
    q
}

/// Thin QR factorization `A = Q R` for `rows >= cols`; `Q` is
/// `rows x cols` with orthonormal columns and `R` is upper triangular.
pub fn thin_qr(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let (m, n) = (a.rows(), a.cols());
    if m == 0 || n == 0 {
        return Err(Error::invalid("thin_qr: empty matrix".to_string()));
    }
    if m < n {
        return Err(Error::invalid(format!("thin_qr needs rows >= cols, got {m}x{n}")));
    }
    let hq = householder_factor(a, n);
    let q = accumulate_q(m, &hq);
    let mut r = DenseMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            r.set(i, j, hq.work.get(i, j));
        }
    }
    Ok((q, r))
}

/// Orthonormal basis for the range of `A`: thin QR with the trailing
/// columns dropped once `|R_kk| <= 1e-12 |R_00|`.
pub fn orth(a: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() == 0 {
        return Ok(DenseMatrix::zeros(a.rows(), 0));
    }
    let (q, r) = thin_qr(a)?;
    let tol = 1e-12 * r.get(0, 0).abs();
    let mut k = 0;
    while k < a.cols() && r.get(k, k).abs() > tol {
        k += 1;
    }
    Ok(q.head_cols(k))
}

/// Column-pivoted QR, Businger-Golub greedy pivoting on residual column
/// norms with ties broken by the lowest index.
pub struct PivotedQr {
    pub q: DenseMatrix,
    /// `R` of the permuted matrix: `A(:, piv) = Q R`.
    pub r: DenseMatrix,
    /// Pivot order: `piv[k]` is the original index of permuted column `k`.
    pub piv: Vec<usize>,
}

pub fn col_pivoted_qr(a: &DenseMatrix) -> Result<PivotedQr> {
    let (m, n) = (a.rows(), a.cols());
    if m == 0 || n == 0 {
        return Err(Error::invalid("col_pivoted_qr: empty matrix".to_string()));
    }
    let steps = m.min(n);
    let mut work = a.clone();
    let mut piv: Vec<usize> = (0..n).collect();
    let mut vs: Vec<(Vec<f64>, f64)> = Vec::with_capacity(steps);
    for k in 0..steps {
        // Greedy pivot: largest residual norm, strictly greater to keep
        // the lowest index on ties.
        let mut best = k;
        let mut best_norm = -1.0;
        for j in k..n {
            let norm2: f64 = work.col(j)[k..].iter().map(|x| x * x).sum();
            if norm2 > best_norm {
                best_norm = norm2;
                best = j;
            }
        }
        if best != k {
            piv.swap(k, best);
            for i in 0..m {
                let (x, y) = (work.get(i, k), work.get(i, best));
                work.set(i, k, y);
                work.set(i, best, x);
            }
        }
        let colk = &work.col(k)[k..];
        let norm = colk.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            vs.push((vec![0.0; m - k], 0.0));
            continue;
        }
        let alpha = if colk[0] >= 0.0 { -norm } else { norm };
        let mut v = colk.to_vec();
        v[0] -= alpha;
        let vn2: f64 = v.iter().map(|x| x * x).sum();
        for j in k..n {
            house_apply(&v, vn2, &mut work.col_mut(j)[k..]);
        }
        let ck = &mut work.col_mut(k)[k..];
        ck[0] = alpha;
        for x in ck[1..].iter_mut() {
            *x = 0.0;
        }
        vs.push((v, vn2));
    }
    let hq = HouseholderQr { work, vs };
    let q = accumulate_q(m, &hq);
    let mut r = DenseMatrix::zeros(steps, n);
    for j in 0..n {
        for i in 0..steps.min(j + 1) {
            r.set(i, j, hq.work.get(i, j));
        }
    }
    Ok(PivotedQr { q, r, piv })
}

/// Solve `R x = b` for upper-triangular `R` (single right-hand side).
fn back_substitute(r: &DenseMatrix, b: &[f64], x: &mut [f64]) -> Result<()> {
    let n = r.cols();
    for i in (0..n).rev() {
        let mut acc = b[i];
        for j in i + 1..n {
            acc -= r.get(i, j) * x[j];
        }
        let d = r.get(i, i);
        if d == 0.0 {
            return Err(Error::numerical("singular triangular solve".to_string()));
        }
        x[i] = acc / d;
    }
    Ok(())
}

/// Least squares `argmin_X |A X - B|_F` via thin QR. Returns `None` when
/// `A` is column-rank-deficient at tolerance `1e-12 |R_00|` (callers fall
/// back to the pseudo-inverse).
pub fn lstsq_qr(a: &DenseMatrix, b: &DenseMatrix) -> Result<Option<DenseMatrix>> {
    let (q, r) = thin_qr(a)?;
    let tol = 1e-12 * r.get(0, 0).abs();
    for k in 0..r.cols() {
        if r.get(k, k).abs() <= tol {
            return Ok(None);
        }
    }
    let qtb = q.t_matmul(b);
    let mut x = DenseMatrix::zeros(a.cols(), b.cols());
    let mut xi = vec![0.0; a.cols()];
    for j in 0..b.cols() {
        back_substitute(&r, qtb.col(j), &mut xi)?;
        x.col_mut(j).copy_from_slice(&xi);
    }
    Ok(Some(x))
}

/// Solve the square system `S X = B` via QR; errors when `S` is singular
/// at tolerance `tol_abs` on the R diagonal.
pub fn solve_square(s: &DenseMatrix, b: &DenseMatrix, tol_abs: f64) -> Result<DenseMatrix> {
    if s.rows() != s.cols() {
        return Err(Error::invalid("solve_square: matrix not square".to_string()));
    }
    let (q, r) = thin_qr(s)?;
    for k in 0..r.cols() {
        if r.get(k, k).abs() <= tol_abs {
            return Err(Error::numerical(format!(
                "solve_square: singular at tolerance {tol_abs:e}"
            )));
        }
    }
    let qtb = q.t_matmul(b);
    let mut x = DenseMatrix::zeros(s.cols(), b.cols());
    let mut xi = vec![0.0; s.cols()];
    for j in 0..b.cols() {
        back_substitute(&r, qtb.col(j), &mut xi)?;
        x.col_mut(j).copy_from_slice(&xi);
    }
    Ok(x)
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations, eigenvalues
/// sorted nonincreasing, eigenvectors as columns.
pub fn sym_eig(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::invalid("sym_eig: matrix not square".to_string()));
    }
    let mut w = a.clone();
    let mut v = DenseMatrix::identity(n);
    let scale = a.fro_norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += w.get(p, q) * w.get(p, q);
            }
        }
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = w.get(p, q);
                if apq.abs() <= 1e-18 * scale {
                    continue;
                }
                let theta = (w.get(q, q) - w.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..n {
                    let (wip, wiq) = (w.get(i, p), w.get(i, q));
                    w.set(i, p, c * wip - s * wiq);
                    w.set(i, q, s * wip + c * wiq);
                }
                for j in 0..n {
                    let (wpj, wqj) = (w.get(p, j), w.get(q, j));
                    w.set(p, j, c * wpj - s * wqj);
                    w.set(q, j, s * wpj + c * wqj);
                }
                for i in 0..n {
                    let (vip, viq) = (v.get(i, p), v.get(i, q));
                    v.set(i, p, c * vip - s * viq);
                    v.set(i, q, s * vip + c * viq);
                }
                flops::add(12 * n as u64);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w.get(j, j).partial_cmp(&w.get(i, i)).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| w.get(i, i)).collect();
    let mut vecs = DenseMatrix::zeros(n, n);
    for (j, &src) in order.iter().enumerate() {
        vecs.col_mut(j).copy_from_slice(v.col(src));
    }
    Ok((vals, vecs))
}

/// Fill columns `start..` of `u` with an orthonormal completion, seeded
/// deterministically.
fn complete_basis(u: &mut DenseMatrix, start: usize) {
    let m = u.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6b72_7020_6261_7369);
    for j in start..u.cols() {
        loop {
            let mut cand: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            // Two rounds of Gram-Schmidt against everything to the left.
            for _ in 0..2 {
                for prev in 0..j {
                    let pc = u.col(prev);
                    let dot: f64 = pc.iter().zip(&cand).map(|(a, b)| a * b).sum();
                    for (c, p) in cand.iter_mut().zip(pc) {
                        *c -= dot * p;
                    }
                }
            }
            let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                for c in cand.iter_mut() {
                    *c /= norm;
                }
                u.col_mut(j).copy_from_slice(&cand);
                break;
            }
        }
    }
}

/// Thin SVD via one-sided Jacobi on the taller orientation. Returns a
/// full triplet with `k = min(rows, cols)`; numerically zero singular
/// directions get deterministically completed orthonormal columns.
pub fn thin_svd(a: &DenseMatrix) -> Result<SvdTriplet> {
    let (m, n) = (a.rows(), a.cols());
    if m == 0 || n == 0 {
        return Err(Error::invalid("thin_svd: empty matrix".to_string()));
    }
    if m < n {
        let t = thin_svd(&a.transpose())?;
        return Ok(SvdTriplet { u: t.v, s: t.s, v: t.u });
    }
    let mut b = a.clone();
    let mut v = DenseMatrix::identity(n);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut dpp, mut dqq, mut dpq) = (0.0, 0.0, 0.0);
                {
                    let (bp, bq) = (b.col(p), b.col(q));
                    for (x, y) in bp.iter().zip(bq) {
                        dpp += x * x;
                        dqq += y * y;
                        dpq += x * y;
                    }
                }
                flops::add(3 * m as u64);
                if dpp == 0.0 || dqq == 0.0 {
                    continue;
                }
                if dpq.abs() <= 1e-15 * (dpp * dqq).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (dqq - dpp) / (2.0 * dpq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (bip, biq) = (b.get(i, p), b.get(i, q));
                    b.set(i, p, c * bip - s * biq);
                    b.set(i, q, s * bip + c * biq);
                }
                for i in 0..n {
                    let (vip, viq) = (v.get(i, p), v.get(i, q));
                    v.set(i, p, c * vip - s * viq);
                    v.set(i, q, s * vip + c * viq);
                }
                flops::add(4 * (m + n) as u64);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<(f64, usize)> = (0..n)
        .map(|j| {
            let norm = b.col(j).iter().map(|x| x * x).sum::<f64>().sqrt();
            (norm, j)
        })
        .collect();
    sv.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let smax = sv[0].0;
    let tiny = smax * 1e-15 * (m.max(n) as f64);
    let mut u = DenseMatrix::zeros(m, n);
    let mut vv = DenseMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    let mut good = 0;
    for (dst, &(norm, src)) in sv.iter().enumerate() {
        s.push(norm);
        vv.col_mut(dst).copy_from_slice(v.col(src));
        if norm > tiny {
            let bc = b.col(src);
            let uc = u.col_mut(dst);
            for (o, x) in uc.iter_mut().zip(bc) {
                *o = x / norm;
            }
            good = dst + 1;
        }
    }
    complete_basis(&mut u, good);
    Ok(SvdTriplet { u, s, v: vv })
}

/// Keep the leading `r` singular triplets.
pub fn truncate_svd(t: &SvdTriplet, r: usize) -> Result<SvdTriplet> {
    if r > t.s.len() {
        return Err(Error::invalid(format!(
            "truncate_svd: rank {} exceeds {}",
            r,
            t.s.len()
        )));
    }
    Ok(SvdTriplet {
        u: t.u.head_cols(r),
        s: t.s[..r].to_vec(),
        v: t.v.head_cols(r),
    })
}

/// Moore-Penrose pseudo-inverse; singular values at or below
/// `tol * sigma_1` are treated as zero. The default tolerance is
/// `1e-12 * max(rows, cols)`.
pub fn pinv(a: &DenseMatrix, tol: Option<f64>) -> Result<DenseMatrix> {
    let t = thin_svd(a)?;
    let tol = tol.unwrap_or(1e-12 * a.rows().max(a.cols()) as f64);
    let cut = t.s.first().copied().unwrap_or(0.0) * tol;
    // V Sigma^+ U^T
    let mut vs = t.v.clone();
    for (j, &s) in t.s.iter().enumerate() {
        let w = if s > cut { 1.0 / s } else { 0.0 };
        for x in vs.col_mut(j) {
            *x *= w;
        }
    }
    Ok(vs.matmul_t(&t.u))
}
