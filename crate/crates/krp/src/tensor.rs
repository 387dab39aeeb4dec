//! Dense tensors and matrices stored first-index-fastest (the column-major
//! generalization), with unfoldings, TTM/multi-TTM, MTTKRP and the
//! Kronecker / Khatri-Rao / Hadamard product family.
//!
//! Conventions used throughout the crate:
//! - modes are 0-based in code;
//! - `kron(a, b)` places the `b` index fastest, so the mode-i unfolding of
//!   a multilinear transform is `A_i X_(i) (A_d (x) ... (x) A_{i+1} (x)
//!   A_{i-1} (x) ... (x) A_1)^T` with the lowest remaining mode fastest.

use crate::flops;
use crate::{Error, Result};

/// Largest element count any materialization helper will allocate.
pub const MEM_CAP_ELEMS: usize = 1 << 27;

/// Column-major dense matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Build from a column-major buffer of length `rows * cols`.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer length mismatch");
        DenseMatrix { rows, cols, data }
    }

    /// Build from row slices of equal length.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut m = DenseMatrix::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i + j * self.rows]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i + j * self.rows] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn transpose(&self) -> Self {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t.data[j + i * self.cols] = self.get(i, j);
            }
        }
        t
    }

    /// `A * B`.
    pub fn matmul(&self, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, b.rows, "matmul shape mismatch");
        let mut c = DenseMatrix::zeros(self.rows, b.cols);
        for j in 0..b.cols {
            let cj = &mut c.data[j * self.rows..(j + 1) * self.rows];
            for s in 0..self.cols {
                let w = b.get(s, j);
                if w == 0.0 {
                    continue;
                }
                let a = self.col(s);
                for (ci, &ai) in cj.iter_mut().zip(a) {
                    *ci += w * ai;
                }
            }
        }
        flops::add((self.rows * self.cols * b.cols) as u64);
        c
    }

    /// `A^T * B` (contiguous column dots).
    pub fn t_matmul(&self, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.rows, b.rows, "t_matmul shape mismatch");
        let mut c = DenseMatrix::zeros(self.cols, b.cols);
        for j in 0..b.cols {
            let bj = b.col(j);
            for i in 0..self.cols {
                let ai = self.col(i);
                let mut acc = 0.0;
                for (x, y) in ai.iter().zip(bj) {
                    acc += x * y;
                }
                c.set(i, j, acc);
            }
        }
        flops::add((self.cols * b.cols * self.rows) as u64);
        c
    }

    /// `A * B^T`.
    pub fn matmul_t(&self, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, b.cols, "matmul_t shape mismatch");
        let mut c = DenseMatrix::zeros(self.rows, b.rows);
        for s in 0..self.cols {
            let a = self.col(s);
            for j in 0..b.rows {
                let w = b.get(j, s);
                if w == 0.0 {
                    continue;
                }
                let cj = &mut c.data[j * self.rows..(j + 1) * self.rows];
                for (ci, &ai) in cj.iter_mut().zip(a) {
                    *ci += w * ai;
                }
            }
        }
        flops::add((self.rows * self.cols * b.rows) as u64);
        c
    }

    pub fn add(&self, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (b.rows, b.cols));
        let data = self.data.iter().zip(&b.data).map(|(x, y)| x + y).collect();
        DenseMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (b.rows, b.cols));
        let data = self.data.iter().zip(&b.data).map(|(x, y)| x - y).collect();
        DenseMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        let data = self.data.iter().map(|x| x * s).collect();
        DenseMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Leading `k` columns.
    pub fn head_cols(&self, k: usize) -> DenseMatrix {
        assert!(k <= self.cols);
        DenseMatrix {
            rows: self.rows,
            cols: k,
            data: self.data[..k * self.rows].to_vec(),
        }
    }

    /// Leading `k` rows.
    pub fn head_rows(&self, k: usize) -> DenseMatrix {
        assert!(k <= self.rows);
        let mut m = DenseMatrix::zeros(k, self.cols);
        for j in 0..self.cols {
            for i in 0..k {
                m.set(i, j, self.get(i, j));
            }
        }
        m
    }

    /// Contiguous sub-block anchored at (0, 0).
    pub fn top_left(&self, r: usize, c: usize) -> DenseMatrix {
        assert!(r <= self.rows && c <= self.cols);
        let mut m = DenseMatrix::zeros(r, c);
        for j in 0..c {
            for i in 0..r {
                m.set(i, j, self.get(i, j));
            }
        }
        m
    }
}

/// Dense tensor of order `d >= 1`, first index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    pub(crate) dims: Vec<usize>,
    pub(crate) data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(!dims.is_empty() && dims.iter().all(|&n| n >= 1));
        let len: usize = dims.iter().product();
        DenseTensor { dims: dims.to_vec(), data: vec![0.0; len] }
    }

    pub fn from_data(dims: &[usize], data: Vec<f64>) -> Self {
        assert!(!dims.is_empty() && dims.iter().all(|&n| n >= 1));
        assert_eq!(data.len(), dims.iter().product::<usize>());
        DenseTensor { dims: dims.to_vec(), data }
    }

    pub fn from_matrix(m: &DenseMatrix) -> Self {
        DenseTensor { dims: vec![m.rows, m.cols], data: m.data.clone() }
    }

    /// View an order-1 or order-2 tensor as a matrix.
    pub fn as_matrix(&self) -> DenseMatrix {
        assert!(self.order() <= 2, "as_matrix needs order <= 2");
        let rows = self.dims[0];
        let cols = if self.order() == 2 { self.dims[1] } else { 1 };
        DenseMatrix { rows, cols, data: self.data.clone() }
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Linear index of a multi-index (first index fastest).
    pub fn lin(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order());
        let mut t = 0;
        let mut stride = 1;
        for (k, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.dims[k]);
            t += i * stride;
            stride *= self.dims[k];
        }
        t
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.lin(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let t = self.lin(idx);
        self.data[t] = v;
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn sub(&self, y: &DenseTensor) -> DenseTensor {
        assert_eq!(self.dims, y.dims);
        let data = self.data.iter().zip(&y.data).map(|(a, b)| a - b).collect();
        DenseTensor { dims: self.dims.clone(), data }
    }
}

fn check_mode(x: &DenseTensor, mode: usize) -> Result<()> {
    if mode >= x.order() {
        return Err(Error::ModeOutOfRange { mode, order: x.order() });
    }
    Ok(())
}

/// Mode-`i` unfolding `X_(i)` of shape `n_i x prod_{j != i} n_j`; fibers
/// become columns with the lower remaining modes varying fastest.
pub fn unfold(x: &DenseTensor, mode: usize) -> Result<DenseMatrix> {
    check_mode(x, mode)?;
    let n_i = x.dims[mode];
    let inner: usize = x.dims[..mode].iter().product();
    let outer: usize = x.dims[mode + 1..].iter().product();
    let mut out = vec![0.0; x.data.len()];
    for o in 0..outer {
        for s in 0..n_i {
            let src = (o * n_i + s) * inner;
            for t in 0..inner {
                out[s + (t + o * inner) * n_i] = x.data[src + t];
            }
        }
    }
    Ok(DenseMatrix::from_col_major(n_i, inner * outer, out))
}

/// Inverse of [`unfold`]: rebuild the tensor with the given dims.
pub fn fold(m: &DenseMatrix, mode: usize, dims: &[usize]) -> Result<DenseTensor> {
    if mode >= dims.len() {
        return Err(Error::ModeOutOfRange { mode, order: dims.len() });
    }
    let n_i = dims[mode];
    let inner: usize = dims[..mode].iter().product();
    let outer: usize = dims[mode + 1..].iter().product();
    if m.rows != n_i || m.cols != inner * outer {
        return Err(Error::invalid(format!(
            "fold shape mismatch: {}x{} vs dims {:?} at mode {}",
            m.rows, m.cols, dims, mode
        )));
    }
    let mut data = vec![0.0; m.data.len()];
    for o in 0..outer {
        for s in 0..n_i {
            let dst = (o * n_i + s) * inner;
            for t in 0..inner {
                data[dst + t] = m.data[s + (t + o * inner) * n_i];
            }
        }
    }
    Ok(DenseTensor::from_data(dims, data))
}

/// Tensor-times-matrix: `Y = X x_i A` with `Y_(i) = A X_(i)`.
pub fn ttm(x: &DenseTensor, a: &DenseMatrix, mode: usize) -> Result<DenseTensor> {
    check_mode(x, mode)?;
    if a.cols != x.dims[mode] {
        return Err(Error::invalid(format!(
            "ttm: factor has {} cols but mode {} has size {}",
            a.cols, mode, x.dims[mode]
        )));
    }
    let unf = unfold(x, mode)?;
    let prod = a.matmul(&unf);
    let mut dims = x.dims.clone();
    dims[mode] = a.rows;
    fold(&prod, mode, &dims)
}

/// Multi-TTM `X x_{i1} A_1 x_{i2} A_2 ...` over distinct modes; contraction
/// order greedily picks the step with the smallest intermediate size.
pub fn multi_ttm(x: &DenseTensor, mats: &[(usize, &DenseMatrix)]) -> Result<DenseTensor> {
    let mut seen = vec![false; x.order()];
    for &(mode, a) in mats {
        check_mode(x, mode)?;
        if seen[mode] {
            return Err(Error::invalid(format!("multi_ttm: duplicate mode {mode}")));
        }
        seen[mode] = true;
        if a.cols != x.dims[mode] {
            return Err(Error::invalid(format!(
                "multi_ttm: factor has {} cols but mode {} has size {}",
                a.cols, mode, x.dims[mode]
            )));
        }
    }
    let mut cur = x.clone();
    let mut pending: Vec<(usize, &DenseMatrix)> = mats.to_vec();
    while !pending.is_empty() {
        let mut best = 0;
        let mut best_size = usize::MAX;
        for (t, &(mode, a)) in pending.iter().enumerate() {
            let new_size = cur.len() / cur.dims[mode] * a.rows;
            if new_size < best_size {
                best_size = new_size;
                best = t;
            }
        }
        let (mode, a) = pending.remove(best);
        cur = ttm(&cur, a, mode)?;
    }
    Ok(cur)
}

/// Kronecker product with the `b` index fastest:
/// `(A (x) B)[ia*b.rows + ib, ja*b.cols + jb] = A[ia,ja] * B[ib,jb]`.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    flops::add((a.rows * b.rows * a.cols * b.cols) as u64);
    let mut c = DenseMatrix::zeros(a.rows * b.rows, a.cols * b.cols);
    for ja in 0..a.cols {
        for jb in 0..b.cols {
            let j = ja * b.cols + jb;
            for ia in 0..a.rows {
                let av = a.get(ia, ja);
                for ib in 0..b.rows {
                    c.set(ia * b.rows + ib, j, av * b.get(ib, jb));
                }
            }
        }
    }
    c
}

/// Kronecker product of vectors, `x` index slowest.
pub fn kron_vec(x: &[f64], y: &[f64]) -> Vec<f64> {
    flops::add((x.len() * y.len()) as u64);
    let mut out = Vec::with_capacity(x.len() * y.len());
    for &xv in x {
        for &yv in y {
            out.push(xv * yv);
        }
    }
    out
}

/// Kronecker product of equal-order tensors; along every mode the `g`
/// index is fastest: `H[a*q + alpha, ...] = F[a, ...] * G[alpha, ...]`.
pub fn kron_tensor(f: &DenseTensor, g: &DenseTensor) -> Result<DenseTensor> {
    if f.order() != g.order() {
        return Err(Error::invalid("kron_tensor: order mismatch".to_string()));
    }
    let d = f.order();
    let dims: Vec<usize> = (0..d).map(|j| f.dims[j] * g.dims[j]).collect();
    flops::add((f.data.len() * g.data.len()) as u64);
    let mut h = DenseTensor::zeros(&dims);
    let mut fa = vec![0usize; d];
    for fv in f.data.iter() {
        let mut ga = vec![0usize; d];
        for gv in g.data.iter() {
            let mut t = 0;
            let mut stride = 1;
            for j in 0..d {
                t += (fa[j] * g.dims[j] + ga[j]) * stride;
                stride *= dims[j];
            }
            h.data[t] = fv * gv;
            incr_multi(&mut ga, &g.dims);
        }
        incr_multi(&mut fa, &f.dims);
    }
    Ok(h)
}

fn incr_multi(idx: &mut [usize], dims: &[usize]) {
    for (i, &n) in idx.iter_mut().zip(dims) {
        *i += 1;
        if *i < n {
            return;
        }
        *i = 0;
    }
}

/// Column-wise Kronecker (Khatri-Rao) product: column `k` is
/// `a(:,k) (x) b(:,k)` with the `b` index fastest.
pub fn khatri_rao(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.cols {
        return Err(Error::invalid("khatri_rao: column-count mismatch".to_string()));
    }
    let mut c = DenseMatrix::zeros(a.rows * b.rows, a.cols);
    for k in 0..a.cols {
        let (ac, bc) = (a.col(k), b.col(k));
        let out = c.col_mut(k);
        for (ia, &av) in ac.iter().enumerate() {
            for (ib, &bv) in bc.iter().enumerate() {
                out[ia * bc.len() + ib] = av * bv;
            }
        }
    }
    flops::add((a.rows * b.rows * a.cols) as u64);
    Ok(c)
}

/// Left-associated Khatri-Rao product of a factor list; the first factor's
/// index is slowest, matching `kron` nesting.
pub fn khatri_rao_list(mats: &[&DenseMatrix]) -> Result<DenseMatrix> {
    let mut iter = mats.iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::invalid("khatri_rao_list: empty factor list".to_string()))?;
    let mut acc = (*first).clone();
    for m in iter {
        acc = khatri_rao(&acc, m)?;
    }
    Ok(acc)
}

/// Row-wise (transposed) Khatri-Rao product `(A^T kr U^T)^T`: row `i` is
/// `kron(a(i,:), u(i,:))` with the `u` index fastest.
pub fn row_khatri_rao(a: &DenseMatrix, u: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows != u.rows {
        return Err(Error::invalid("row_khatri_rao: row-count mismatch".to_string()));
    }
    let mut c = DenseMatrix::zeros(a.rows, a.cols * u.cols);
    for ja in 0..a.cols {
        for ju in 0..u.cols {
            let j = ja * u.cols + ju;
            for i in 0..a.rows {
                c.set(i, j, a.get(i, ja) * u.get(i, ju));
            }
        }
    }
    flops::add((a.rows * a.cols * u.cols) as u64);
    Ok(c)
}

/// Elementwise (Hadamard) product of equal-dims tensors.
pub fn hadamard(x: &DenseTensor, y: &DenseTensor) -> Result<DenseTensor> {
    if x.dims != y.dims {
        return Err(Error::invalid("hadamard: dims mismatch".to_string()));
    }
    let data = x.data.iter().zip(&y.data).map(|(a, b)| a * b).collect();
    flops::add(x.len() as u64);
    Ok(DenseTensor { dims: x.dims.clone(), data })
}

/// Contract one mode of a linearized tensor with a weight vector.
/// The buffer is interpreted as (inner, n, outer) with inner fastest.
pub(crate) fn contract_mode(buf: &[f64], inner: usize, n: usize, outer: usize, w: &[f64]) -> Vec<f64> {
    debug_assert_eq!(buf.len(), inner * n * outer);
    debug_assert_eq!(w.len(), n);
    let mut out = vec![0.0; inner * outer];
    for o in 0..outer {
        let ob = o * inner * n;
        let oo = o * inner;
        for (s, &ws) in w.iter().enumerate() {
            if ws == 0.0 {
                continue;
            }
            let base = ob + s * inner;
            for t in 0..inner {
                out[oo + t] += ws * buf[base + t];
            }
        }
    }
    flops::add((inner * n * outer) as u64);
    out
}

/// Matricized-tensor-times-Khatri-Rao-product:
/// `X_(i) (W_{d-1} kr ... kr W_{i+1} kr W_{i-1} kr ... kr W_0)` where
/// `factors` lists the matrices of the modes other than `mode` in
/// ascending mode order. The KRP is never materialized; each output
/// column is a sequence of single-mode contractions.
pub fn mttkrp(x: &DenseTensor, factors: &[&DenseMatrix], mode: usize) -> Result<DenseMatrix> {
    let d = x.order();
    check_mode(x, mode)?;
    if factors.len() + 1 != d {
        return Err(Error::invalid(format!(
            "mttkrp: expected {} factors, got {}",
            d - 1,
            factors.len()
        )));
    }
    if factors.is_empty() {
        return Err(Error::invalid("mttkrp: tensor order must be >= 2".to_string()));
    }
    let other_modes: Vec<usize> = (0..d).filter(|&j| j != mode).collect();
    let ell = factors[0].cols;
    for (pos, &j) in other_modes.iter().enumerate() {
        let f = factors[pos];
        if f.rows != x.dims[j] || f.cols != ell {
            return Err(Error::invalid(format!(
                "mttkrp: factor for mode {} must be {}x{}, got {}x{}",
                j, x.dims[j], ell, f.rows, f.cols
            )));
        }
    }
    let mut out = DenseMatrix::zeros(x.dims[mode], ell);
    for k in 0..ell {
        let mut buf = x.data.clone();
        let mut dims = x.dims.clone();
        // Contract descending so modes 0..j are all still present when
        // mode j is contracted; its position in `dims` is then j itself.
        for (pos, &j) in other_modes.iter().enumerate().rev() {
            let inner: usize = dims[..j].iter().product();
            let outer: usize = dims[j + 1..].iter().product();
            buf = contract_mode(&buf, inner, dims[j], outer, factors[pos].col(k));
            dims.remove(j);
        }
        out.col_mut(k).copy_from_slice(&buf);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    pub(crate) fn random_tensor(dims: &[usize], rng: &mut StdRng) -> DenseTensor {
        let len: usize = dims.iter().product();
        let data = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        DenseTensor::from_data(dims, data)
    }

    pub(crate) fn random_matrix(rows: usize, cols: usize, rng: &mut StdRng) -> DenseMatrix {
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        DenseMatrix::from_col_major(rows, cols, data)
    }

    fn iota_tensor(dims: &[usize]) -> DenseTensor {
        let len: usize = dims.iter().product();
        DenseTensor::from_data(dims, (1..=len).map(|v| v as f64).collect())
    }

    fn assert_mat_eq(a: &DenseMatrix, b: &DenseMatrix, tol: f64) {
        assert_eq!((a.rows, a.cols), (b.rows, b.cols));
        let denom = b.fro_norm().max(1.0);
        assert!(
            a.sub(b).fro_norm() <= tol * denom,
            "matrices differ by {} (tol {})",
            a.sub(b).fro_norm() / denom,
            tol
        );
    }

    #[test]
    fn unfold_order2_identity_and_transpose() {
        let x = iota_tensor(&[2, 3]);
        let m = unfold(&x, 0).unwrap();
        assert_eq!(m, x.as_matrix());
        let t = unfold(&x, 1).unwrap();
        assert_eq!(t, x.as_matrix().transpose());
    }

    #[test]
    fn unfold_2x2x2_mode1_matches_enumeration() {
        let x = iota_tensor(&[2, 2, 2]);
        let m = unfold(&x, 1).unwrap();
        let want = DenseMatrix::from_rows(&[&[1.0, 2.0, 5.0, 6.0], &[3.0, 4.0, 7.0, 8.0]]);
        assert_eq!(m, want);
    }

    #[test]
    fn unfold_2x3x2_all_modes_match_enumeration() {
        let x = iota_tensor(&[2, 3, 2]);
        let m0 = unfold(&x, 0).unwrap();
        assert_eq!(
            m0,
            DenseMatrix::from_rows(&[
                &[1.0, 3.0, 5.0, 7.0, 9.0, 11.0],
                &[2.0, 4.0, 6.0, 8.0, 10.0, 12.0]
            ])
        );
        let m1 = unfold(&x, 1).unwrap();
        assert_eq!(
            m1,
            DenseMatrix::from_rows(&[
                &[1.0, 2.0, 7.0, 8.0],
                &[3.0, 4.0, 9.0, 10.0],
                &[5.0, 6.0, 11.0, 12.0]
            ])
        );
        let m2 = unfold(&x, 2).unwrap();
        assert_eq!(
            m2,
            DenseMatrix::from_rows(&[
                &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
                &[7.0, 8.0, 9.0, 10.0, 11.0, 12.0]
            ])
        );
    }

    #[test]
    fn fold_inverts_unfold_every_mode() {
        let mut rng = StdRng::seed_from_u64(7);
        for dims in [vec![3, 4, 5], vec![2, 2, 2, 2], vec![4, 1, 3, 2, 2]] {
            let x = random_tensor(&dims, &mut rng);
            for i in 0..dims.len() {
                let back = fold(&unfold(&x, i).unwrap(), i, &dims).unwrap();
                assert_eq!(back, x);
            }
        }
    }

    #[test]
    fn fold_rejects_bad_shape() {
        let m = DenseMatrix::zeros(2, 4);
        assert!(fold(&m, 0, &[2, 2]).is_err());
        assert!(fold(&m, 5, &[2, 4]).is_err());
    }

    #[test]
    fn fro_norm_equal_across_unfoldings() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let d = rng.gen_range(1..=5);
            let dims: Vec<usize> = (0..d).map(|_| rng.gen_range(1..=4)).collect();
            let x = random_tensor(&dims, &mut rng);
            for i in 0..d {
                let m = unfold(&x, i).unwrap();
                assert_relative_eq!(m.fro_norm(), x.fro_norm(), max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn ttm_identity_is_noop() {
        let mut rng = StdRng::seed_from_u64(3);
        let x = random_tensor(&[3, 4, 2], &mut rng);
        let y = ttm(&x, &DenseMatrix::identity(4), 1).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn ttm_row_sums() {
        let x = DenseTensor::from_data(&[2, 2], vec![1.0; 4]);
        let a = DenseMatrix::from_rows(&[&[1.0, 1.0]]);
        let y = ttm(&x, &a, 0).unwrap();
        assert_eq!(y.dims(), &[1, 2]);
        assert_eq!(y.data(), &[2.0, 2.0]);
    }

    #[test]
    fn ttm_matches_unfold_route() {
        let mut rng = StdRng::seed_from_u64(5);
        let x = random_tensor(&[3, 4, 5], &mut rng);
        let a = random_matrix(2, 4, &mut rng);
        let y = ttm(&x, &a, 1).unwrap();
        let want = fold(&a.matmul(&unfold(&x, 1).unwrap()), 1, &[3, 2, 5]).unwrap();
        assert_eq!(y, want);
    }

    #[test]
    fn multi_ttm_matches_sequential_and_any_order() {
        let mut rng = StdRng::seed_from_u64(9);
        let x = random_tensor(&[4, 4, 4], &mut rng);
        let a0 = random_matrix(2, 4, &mut rng);
        let a1 = random_matrix(3, 4, &mut rng);
        let a2 = random_matrix(2, 4, &mut rng);
        let seq = ttm(&ttm(&ttm(&x, &a0, 0).unwrap(), &a1, 1).unwrap(), &a2, 2).unwrap();
        let multi = multi_ttm(&x, &[(0, &a0), (1, &a1), (2, &a2)]).unwrap();
        let multi_rev = multi_ttm(&x, &[(2, &a2), (0, &a0), (1, &a1)]).unwrap();
        assert!(multi.sub(&seq).fro_norm() <= 1e-13 * seq.fro_norm());
        assert!(multi_rev.sub(&seq).fro_norm() <= 1e-13 * seq.fro_norm());
    }

    #[test]
    fn multi_ttm_rejects_duplicate_mode() {
        let x = DenseTensor::zeros(&[2, 2]);
        let a = DenseMatrix::identity(2);
        assert!(multi_ttm(&x, &[(0, &a), (0, &a)]).is_err());
    }

    #[test]
    fn multi_ttm_unfolding_identity() {
        // Y_(i) = A_i X_(i) (A_d (x) ... (x) A_{i+1} (x) A_{i-1} ... A_1)^T
        let mut rng = StdRng::seed_from_u64(13);
        let x = random_tensor(&[2, 3, 4], &mut rng);
        let a0 = random_matrix(2, 2, &mut rng);
        let a1 = random_matrix(2, 3, &mut rng);
        let a2 = random_matrix(3, 4, &mut rng);
        let y = multi_ttm(&x, &[(0, &a0), (1, &a1), (2, &a2)]).unwrap();
        for (i, ai) in [(0, &a0), (1, &a1), (2, &a2)] {
            let others: Vec<&DenseMatrix> = match i {
                0 => vec![&a2, &a1],
                1 => vec![&a2, &a0],
                _ => vec![&a1, &a0],
            };
            let k = kron(others[0], others[1]);
            let want = ai.matmul(&unfold(&x, i).unwrap()).matmul_t(&k);
            assert_mat_eq(&unfold(&y, i).unwrap(), &want, 1e-13);
        }
    }

    #[test]
    fn kron_scalar_and_row_cases() {
        let a = DenseMatrix::from_rows(&[&[2.0]]);
        let b = DenseMatrix::from_rows(&[&[1.0, 5.0], &[-3.0, 0.5]]);
        assert_eq!(kron(&a, &b), b.scale(2.0));
        let r1 = DenseMatrix::from_rows(&[&[1.0, 2.0]]);
        let r2 = DenseMatrix::from_rows(&[&[3.0, 4.0]]);
        assert_eq!(kron(&r1, &r2), DenseMatrix::from_rows(&[&[3.0, 4.0, 6.0, 8.0]]));
    }

    #[test]
    fn kron_tensor_matches_index_formula() {
        let f = DenseTensor::from_data(&[2, 1, 1], vec![1.0, 2.0]);
        let g = DenseTensor::from_data(&[2, 1, 1], vec![3.0, 4.0]);
        let h = kron_tensor(&f, &g).unwrap();
        assert_eq!(h.dims(), &[4, 1, 1]);
        assert_eq!(h.data(), &[3.0, 4.0, 6.0, 8.0]);
        // Brute-force the index map on a non-vector case.
        let mut rng = StdRng::seed_from_u64(21);
        let f = random_tensor(&[2, 3, 2], &mut rng);
        let g = random_tensor(&[3, 2, 2], &mut rng);
        let h = kron_tensor(&f, &g).unwrap();
        for a0 in 0..2 {
            for a1 in 0..3 {
                for a2 in 0..2 {
                    for b0 in 0..3 {
                        for b1 in 0..2 {
                            for b2 in 0..2 {
                                let idx = [a0 * 3 + b0, a1 * 2 + b1, a2 * 2 + b2];
                                assert_relative_eq!(
                                    h.get(&idx),
                                    f.get(&[a0, a1, a2]) * g.get(&[b0, b1, b2]),
                                    max_relative = 1e-15
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn kron_tensor_consistent_with_matrix_kron() {
        let mut rng = StdRng::seed_from_u64(23);
        let f = random_tensor(&[2, 3], &mut rng);
        let g = random_tensor(&[2, 2], &mut rng);
        let h = kron_tensor(&f, &g).unwrap();
        let want = kron(&f.as_matrix(), &g.as_matrix());
        assert_mat_eq(&h.as_matrix(), &want, 1e-15);
    }

    #[test]
    fn khatri_rao_forced_cases() {
        let ones = DenseMatrix::from_col_major(1, 3, vec![1.0; 3]);
        let mut rng = StdRng::seed_from_u64(2);
        let b = random_matrix(4, 3, &mut rng);
        assert_eq!(khatri_rao(&ones, &b).unwrap(), b);
        let a = DenseMatrix::from_col_major(2, 1, vec![1.0, 2.0]);
        let b = DenseMatrix::from_col_major(2, 1, vec![3.0, 4.0]);
        assert_eq!(
            khatri_rao(&a, &b).unwrap().data(),
            &[3.0, 4.0, 6.0, 8.0]
        );
    }

    #[test]
    fn khatri_rao_columns_are_kron_of_columns() {
        let mut rng = StdRng::seed_from_u64(17);
        let a = random_matrix(3, 2, &mut rng);
        let b = random_matrix(4, 2, &mut rng);
        let c = khatri_rao(&a, &b).unwrap();
        for k in 0..2 {
            let want = kron_vec(a.col(k), b.col(k));
            assert_eq!(c.col(k), &want[..]);
        }
    }

    #[test]
    fn khatri_rao_mixed_product_identity() {
        // (A (x) B)(C kr D) = (AC) kr (BD)
        let mut rng = StdRng::seed_from_u64(19);
        for _ in 0..20 {
            let (m, n, p, q, l) = (
                rng.gen_range(1..=4),
                rng.gen_range(1..=4),
                rng.gen_range(1..=4),
                rng.gen_range(1..=4),
                rng.gen_range(1..=3),
            );
            let a = random_matrix(m, n, &mut rng);
            let b = random_matrix(p, q, &mut rng);
            let c = random_matrix(n, l, &mut rng);
            let d = random_matrix(q, l, &mut rng);
            let lhs = kron(&a, &b).matmul(&khatri_rao(&c, &d).unwrap());
            let rhs = khatri_rao(&a.matmul(&c), &b.matmul(&d)).unwrap();
            assert_mat_eq(&lhs, &rhs, 1e-12);
        }
    }

    #[test]
    fn row_khatri_rao_rows_are_kron_of_rows() {
        let mut rng = StdRng::seed_from_u64(29);
        let a = random_matrix(3, 2, &mut rng);
        let u = random_matrix(3, 4, &mut rng);
        let c = row_khatri_rao(&a, &u).unwrap();
        assert_eq!((c.rows(), c.cols()), (3, 8));
        // Equals (A^T kr U^T)^T.
        let want = khatri_rao(&a.transpose(), &u.transpose()).unwrap().transpose();
        assert_mat_eq(&c, &want, 1e-15);
    }

    #[test]
    fn hadamard_identities() {
        let mut rng = StdRng::seed_from_u64(31);
        let x = random_tensor(&[3, 2, 2], &mut rng);
        let ones = DenseTensor::from_data(&[3, 2, 2], vec![1.0; 12]);
        assert_eq!(hadamard(&ones, &x).unwrap(), x);
        let zeros = DenseTensor::zeros(&[3, 2, 2]);
        assert_eq!(hadamard(&x, &zeros).unwrap(), zeros);
        let y = random_tensor(&[3, 2, 2], &mut rng);
        let h = hadamard(&x, &y).unwrap();
        for (i, v) in h.data().iter().enumerate() {
            assert_relative_eq!(*v, x.data()[i] * y.data()[i]);
        }
    }

    #[test]
    fn mttkrp_single_factor_is_plain_multiply() {
        let mut rng = StdRng::seed_from_u64(37);
        let x = random_tensor(&[3, 4], &mut rng);
        let w = random_matrix(4, 2, &mut rng);
        let y = mttkrp(&x, &[&w], 0).unwrap();
        let want = unfold(&x, 0).unwrap().matmul(&w);
        assert_mat_eq(&y, &want, 1e-14);
    }

    #[test]
    fn mttkrp_all_ones_gives_fiber_sums() {
        let x = iota_tensor(&[2, 3, 2]);
        let f1 = DenseMatrix::from_col_major(3, 1, vec![1.0; 3]);
        let f2 = DenseMatrix::from_col_major(2, 1, vec![1.0; 2]);
        let y = mttkrp(&x, &[&f1, &f2], 0).unwrap();
        // Row sums of the mode-0 unfolding.
        assert_eq!(y.data(), &[36.0, 42.0]);
    }

    #[test]
    fn mttkrp_matches_explicit_krp_all_modes() {
        let mut rng = StdRng::seed_from_u64(41);
        for _ in 0..50 {
            let d = rng.gen_range(3..=5);
            let dims: Vec<usize> = (0..d).map(|_| rng.gen_range(1..=4)).collect();
            if dims.iter().product::<usize>() > 10_000 {
                continue;
            }
            let x = random_tensor(&dims, &mut rng);
            let ell = rng.gen_range(1..=3);
            let mode = rng.gen_range(0..d);
            let mats: Vec<DenseMatrix> = (0..d)
                .filter(|&j| j != mode)
                .map(|j| random_matrix(dims[j], ell, &mut rng))
                .collect();
            let refs: Vec<&DenseMatrix> = mats.iter().collect();
            let y = mttkrp(&x, &refs, mode).unwrap();
            // Explicit route: highest mode first in the KRP list.
            let ordered: Vec<&DenseMatrix> = refs.iter().rev().copied().collect();
            let krp = khatri_rao_list(&ordered).unwrap();
            let want = unfold(&x, mode).unwrap().matmul(&krp);
            assert_mat_eq(&y, &want, 1e-12);
        }
    }

    #[test]
    fn mttkrp_rejects_bad_factor_shapes() {
        let x = DenseTensor::zeros(&[2, 3, 4]);
        let good1 = DenseMatrix::zeros(3, 2);
        let bad = DenseMatrix::zeros(5, 2);
        assert!(mttkrp(&x, &[&good1, &bad], 0).is_err());
        assert!(mttkrp(&x, &[&good1], 0).is_err());
    }

    #[test]
    fn multi_ttm_orthonormal_never_grows_norm() {
        let mut rng = StdRng::seed_from_u64(43);
        for _ in 0..10 {
            let x = random_tensor(&[5, 4, 6], &mut rng);
            let mats: Vec<DenseMatrix> = [5usize, 4, 6]
                .iter()
                .map(|&n| {
                    let g = random_matrix(n, 2, &mut rng);
                    let (q, _) = crate::linalg::thin_qr(&g).unwrap();
                    q.transpose()
                })
                .collect();
            let y = multi_ttm(&x, &[(0, &mats[0]), (1, &mats[1]), (2, &mats[2])]).unwrap();
            assert!(y.fro_norm() <= x.fro_norm() * (1.0 + 1e-12));
        }
    }
}
