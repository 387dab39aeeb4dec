//! Block-structured matrices `M = sum_j E_j (x) M_j` with sparse 0/1
//! placement patterns and dense repeated blocks, their KRP sketches
//! computed without materializing `M` or the test matrix, and the
//! single-view randomized SVD built on those sketches. Includes the
//! multilevel generalization with one placement pattern per level.

use crate::linalg::{self, SvdTriplet};
use crate::sketch::{self, KrpSketch, RngLedger, SketchConfig};
use crate::tensor::{self, DenseMatrix, MEM_CAP_ELEMS};
use crate::{flops, Error, Result};

/// Sparse 0/1 matrix stored as a coordinate list of its one-entries.
#[derive(Clone, Debug)]
pub struct SparsePattern {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize)>,
}

impl SparsePattern {
    pub fn new(rows: usize, cols: usize, mut entries: Vec<(usize, usize)>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("SparsePattern: empty shape".to_string()));
        }
        entries.sort_unstable();
        entries.dedup();
        for &(i, j) in &entries {
            if i >= rows || j >= cols {
                return Err(Error::invalid(format!(
                    "SparsePattern: entry ({i},{j}) outside {rows}x{cols}"
                )));
            }
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn transpose(&self) -> SparsePattern {
        let mut entries: Vec<(usize, usize)> = self.entries.iter().map(|&(i, j)| (j, i)).collect();
        entries.sort_unstable();
        SparsePattern { rows: self.cols, cols: self.rows, entries }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for &(i, j) in &self.entries {
            m.set(i, j, 1.0);
        }
        m
    }

    /// `E * X` by row gather-and-add over the one-entries.
    pub fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.rows() != self.cols {
            return Err(Error::invalid(format!(
                "SparsePattern::apply: {} rows, pattern has {} cols",
                x.rows(),
                self.cols
            )));
        }
        flops::add((self.entries.len() * x.cols()) as u64);
        let mut y = DenseMatrix::zeros(self.rows, x.cols());
        for k in 0..x.cols() {
            let xc = x.col(k);
            let yc = y.col_mut(k);
            for &(i, j) in &self.entries {
                yc[i] += xc[j];
            }
        }
        Ok(y)
    }
}

/// One term `E_j (x) M_j`.
#[derive(Clone, Debug)]
pub struct BlockTerm {
    pub pattern: SparsePattern,
    pub block: DenseMatrix,
}

/// `M = sum_j E_j (x) M_j` with patterns `p x q` and blocks `m x n`;
/// the assembled matrix is `pm x qn` with the block index fastest.
#[derive(Clone, Debug)]
pub struct BlockStructuredMatrix {
    p: usize,
    q: usize,
    m: usize,
    n: usize,
    terms: Vec<BlockTerm>,
}

impl BlockStructuredMatrix {
    pub fn new(p: usize, q: usize, m: usize, n: usize, terms: Vec<BlockTerm>) -> Result<Self> {
        if p == 0 || q == 0 || m == 0 || n == 0 {
            return Err(Error::invalid("BlockStructuredMatrix: empty shape".to_string()));
        }
        for t in &terms {
            if t.pattern.rows() != p || t.pattern.cols() != q {
                return Err(Error::invalid("BlockStructuredMatrix: pattern shape mismatch".to_string()));
            }
            if t.block.rows() != m || t.block.cols() != n {
                return Err(Error::invalid("BlockStructuredMatrix: block shape mismatch".to_string()));
            }
        }
        Ok(Self { p, q, m, n, terms })
    }

    /// Pattern shape `(p, q)`.
    pub fn pattern_shape(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    /// Block shape `(m, n)`.
    pub fn block_shape(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn rows(&self) -> usize {
        self.p * self.m
    }

    pub fn cols(&self) -> usize {
        self.q * self.n
    }

    pub fn terms(&self) -> &[BlockTerm] {
        &self.terms
    }

    /// `M^T = sum_j E_j^T (x) M_j^T`.
    pub fn transpose(&self) -> BlockStructuredMatrix {
        let terms = self
            .terms
            .iter()
            .map(|t| BlockTerm { pattern: t.pattern.transpose(), block: t.block.transpose() })
            .collect();
        BlockStructuredMatrix { p: self.q, q: self.p, m: self.n, n: self.m, terms }
    }
}

/// Explicit `sum_j E_j (x) M_j` (test oracle; guarded by the memory cap).
pub fn materialize_block(m: &BlockStructuredMatrix) -> Result<DenseMatrix> {
    if m.rows() * m.cols() > MEM_CAP_ELEMS {
        return Err(Error::CapExceeded(format!(
            "materialize_block: {}x{} exceeds the element cap",
            m.rows(),
            m.cols()
        )));
    }
    let mut out = DenseMatrix::zeros(m.rows(), m.cols());
    for t in &m.terms {
        out = out.add(&tensor::kron(&t.pattern.to_dense(), &t.block));
    }
    Ok(out)
}

/// Column-wise Kronecker accumulation `Y += A kr B` (b index fastest).
fn khatri_rao_acc(y: &mut DenseMatrix, a: &DenseMatrix, b: &DenseMatrix) {
    flops::add((a.rows() * b.rows() * a.cols()) as u64);
    let br = b.rows();
    for k in 0..a.cols() {
        let (ac, bc) = (a.col(k).to_vec(), b.col(k).to_vec());
        let yc = y.col_mut(k);
        for (ia, &av) in ac.iter().enumerate() {
            for (ib, &bv) in bc.iter().enumerate() {
                yc[ia * br + ib] += av * bv;
            }
        }
    }
}

/// `Y = M (Omega1 kr Omega2) = sum_j (E_j Omega1) kr (M_j Omega2)`
/// without materializing `M` or the sketch.
pub fn structured_sketch(m: &BlockStructuredMatrix, sketch: &KrpSketch) -> Result<DenseMatrix> {
    if sketch.order() != 2 {
        return Err(Error::invalid("structured_sketch: sketch must have two factors".to_string()));
    }
    let f = sketch.factors();
    if f[0].rows() != m.q || f[1].rows() != m.n {
        return Err(Error::invalid(format!(
            "structured_sketch: factor rows ({}, {}) do not match ({}, {})",
            f[0].rows(),
            f[1].rows(),
            m.q,
            m.n
        )));
    }
    let mut y = DenseMatrix::zeros(m.rows(), sketch.ell());
    for t in &m.terms {
        let ew = t.pattern.apply(&f[0])?;
        let mw = t.block.matmul(&f[1]);
        khatri_rao_acc(&mut y, &ew, &mw);
    }
    Ok(y)
}

/// `Y = M W` for a dense test matrix `W` (`qn x ell`), applied blockwise
/// so `M` is never assembled.
pub fn apply_dense_right(m: &BlockStructuredMatrix, w: &DenseMatrix) -> Result<DenseMatrix> {
    if w.rows() != m.cols() {
        return Err(Error::invalid(format!(
            "apply_dense_right: {} rows, matrix has {} cols",
            w.rows(),
            m.cols()
        )));
    }
    let ell = w.cols();
    let mut y = DenseMatrix::zeros(m.rows(), ell);
    for t in &m.terms {
        for &(a, b) in t.pattern.entries() {
            // Y[a-th row block] += M_j * W[b-th row block].
            let mut wb = DenseMatrix::zeros(m.n, ell);
            for k in 0..ell {
                let src = w.col(k);
                wb.col_mut(k).copy_from_slice(&src[b * m.n..(b + 1) * m.n]);
            }
            let prod = t.block.matmul(&wb);
            for k in 0..ell {
                let src = prod.col(k).to_vec();
                let dst = &mut y.col_mut(k)[a * m.m..(a + 1) * m.m];
                for (d, s) in dst.iter_mut().zip(&src) {
                    *d += s;
                }
            }
        }
    }
    Ok(y)
}

/// Which test matrices the block single-view draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockSketchKind {
    /// KRP sketches over (pattern, block) dims; the structured route.
    Krp,
    /// Dense Gaussian sketches, applied blockwise.
    Gaussian,
}

/// Untruncated single-view factors for a block-structured matrix.
#[derive(Clone, Debug)]
pub struct BlockSingleView {
    pub q: DenseMatrix,
    pub w: DenseMatrix,
    pub pinv_fallback: bool,
}

impl BlockSingleView {
    pub fn reconstruct(&self) -> DenseMatrix {
        self.q.matmul(&self.w)
    }
}

/// Single-view sketching of a block-structured matrix: draws
/// `Omega` (`ell_r` columns, context 1) and `Psi` (`ell_l` columns,
/// context 2), forms `Y = M Omega` and `Z = M^T Psi`, then
/// `Q = orth(Y)` and `W = (Psi^T Q)^+ Z^T`.
pub fn block_single_view_qw(
    m: &BlockStructuredMatrix,
    ell_r: usize,
    ell_l: usize,
    kind: BlockSketchKind,
    cfg: &SketchConfig,
    ledger: &RngLedger,
) -> Result<BlockSingleView> {
    if !(0 < ell_r && ell_r < ell_l && ell_l <= m.rows().min(m.cols())) {
        return Err(Error::invalid(format!(
            "block_single_view: need 0 < ell_r < ell_l <= min(rows, cols), got {ell_r}, {ell_l}, {}",
            m.rows().min(m.cols())
        )));
    }
    let mt = m.transpose();
    let (y, z, psi) = match kind {
        BlockSketchKind::Krp => {
            let omega = sketch::draw_krp(&[m.q, m.n], ell_r, &cfg.with_context(1), ledger)?;
            let psi = sketch::draw_krp(&[m.p, m.m], ell_l, &cfg.with_context(2), ledger)?;
            let y = structured_sketch(m, &omega)?;
            let z = structured_sketch(&mt, &psi)?;
            (y, z, PsiT::Krp(psi))
        }
        BlockSketchKind::Gaussian => {
            let omega = sketch::draw_gaussian_dense(m.cols(), ell_r, &cfg.with_context(1), ledger)?;
            let psi = sketch::draw_gaussian_dense(m.rows(), ell_l, &cfg.with_context(2), ledger)?;
            let y = apply_dense_right(m, &omega)?;
            let z = apply_dense_right(&mt, &psi)?;
            (y, z, PsiT::Dense(psi))
        }
    };
    let q = linalg::orth(&y)?;
    if q.cols() == 0 {
        return Ok(BlockSingleView {
            q: DenseMatrix::zeros(m.rows(), 0),
            w: DenseMatrix::zeros(0, m.cols()),
            pinv_fallback: false,
        });
    }
    let pq = match &psi {
        PsiT::Krp(s) => sketch::krp_transpose_apply(s, &q)?,
        PsiT::Dense(p) => p.t_matmul(&q),
    };
    let zt = z.transpose();
    match linalg::lstsq_qr(&pq, &zt)? {
        Some(w) => Ok(BlockSingleView { q, w, pinv_fallback: false }),
        None => {
            let w = linalg::pinv(&pq, None)?.matmul(&zt);
            Ok(BlockSingleView { q, w, pinv_fallback: true })
        }
    }
}

enum PsiT {
    Krp(KrpSketch),
    Dense(DenseMatrix),
}

/// Rank-`r` single-view randomized SVD of a block-structured matrix:
/// SVD of `W`, `U = Q U_W`, truncated to `r`.
pub fn single_view_block(
    m: &BlockStructuredMatrix,
    r: usize,
    ell_r: usize,
    ell_l: usize,
    kind: BlockSketchKind,
    cfg: &SketchConfig,
    ledger: &RngLedger,
) -> Result<SvdTriplet> {
    if r == 0 {
        return Ok(SvdTriplet {
            u: DenseMatrix::zeros(m.rows(), 0),
            s: vec![],
            v: DenseMatrix::zeros(m.cols(), 0),
        });
    }
    let sv = block_single_view_qw(m, ell_r, ell_l, kind, cfg, ledger)?;
    if sv.q.cols() == 0 {
        return Ok(SvdTriplet {
            u: DenseMatrix::zeros(m.rows(), 0),
            s: vec![],
            v: DenseMatrix::zeros(m.cols(), 0),
        });
    }
    let t = linalg::thin_svd(&sv.w)?;
    let keep = r.min(t.s.len());
    let tr = linalg::truncate_svd(&t, keep)?;
    Ok(SvdTriplet { u: sv.q.matmul(&tr.u), s: tr.s, v: tr.v })
}

/// One multilevel term: a placement pattern per level plus the leaf block.
#[derive(Clone, Debug)]
pub struct MultilevelTerm {
    pub patterns: Vec<SparsePattern>,
    pub block: DenseMatrix,
}

/// `M = sum_i E^(1)_i (x) ... (x) E^(L)_i (x) M_i` with per-level pattern
/// shapes shared across terms.
#[derive(Clone, Debug)]
pub struct MultilevelBlockMatrix {
    level_shapes: Vec<(usize, usize)>,
    block_shape: (usize, usize),
    terms: Vec<MultilevelTerm>,
}

impl MultilevelBlockMatrix {
    pub fn new(
        level_shapes: Vec<(usize, usize)>,
        block_shape: (usize, usize),
        terms: Vec<MultilevelTerm>,
    ) -> Result<Self> {
        if level_shapes.is_empty() {
            return Err(Error::invalid("MultilevelBlockMatrix: need at least one level".to_string()));
        }
        for t in &terms {
            if t.patterns.len() != level_shapes.len() {
                return Err(Error::invalid("MultilevelBlockMatrix: level count mismatch".to_string()));
            }
            for (e, &(p, q)) in t.patterns.iter().zip(&level_shapes) {
                if e.rows() != p || e.cols() != q {
                    return Err(Error::invalid("MultilevelBlockMatrix: pattern shape mismatch".to_string()));
                }
            }
            if (t.block.rows(), t.block.cols()) != block_shape {
                return Err(Error::invalid("MultilevelBlockMatrix: block shape mismatch".to_string()));
            }
        }
        Ok(Self { level_shapes, block_shape, terms })
    }

    pub fn levels(&self) -> usize {
        self.level_shapes.len()
    }

    pub fn rows(&self) -> usize {
        self.level_shapes.iter().map(|&(p, _)| p).product::<usize>() * self.block_shape.0
    }

    pub fn cols(&self) -> usize {
        self.level_shapes.iter().map(|&(_, q)| q).product::<usize>() * self.block_shape.1
    }
}

/// `Y = M Omega` for a KRP sketch with one factor per level plus one for
/// the leaf block dimension.
pub fn multilevel_sketch(m: &MultilevelBlockMatrix, sketch: &KrpSketch) -> Result<DenseMatrix> {
    let levels = m.levels();
    if sketch.order() != levels + 1 {
        return Err(Error::invalid(format!(
            "multilevel_sketch: sketch has {} factors, expected {}",
            sketch.order(),
            levels + 1
        )));
    }
    let f = sketch.factors();
    for (j, &(_, q)) in m.level_shapes.iter().enumerate() {
        if f[j].rows() != q {
            return Err(Error::invalid(format!(
                "multilevel_sketch: factor {j} has {} rows, expected {q}",
                f[j].rows()
            )));
        }
    }
    if f[levels].rows() != m.block_shape.1 {
        return Err(Error::invalid("multilevel_sketch: leaf factor rows mismatch".to_string()));
    }
    let mut y = DenseMatrix::zeros(m.rows(), sketch.ell());
    for t in &m.terms {
        let mut applied: Vec<DenseMatrix> = Vec::with_capacity(levels + 1);
        for (j, e) in t.patterns.iter().enumerate() {
            applied.push(e.apply(&f[j])?);
        }
        applied.push(t.block.matmul(&f[levels]));
        let refs: Vec<&DenseMatrix> = applied.iter().collect();
        y = y.add(&tensor::khatri_rao_list(&refs)?);
    }
    Ok(y)
}

/// Explicit multilevel sum (test oracle; guarded by the memory cap).
pub fn materialize_multilevel(m: &MultilevelBlockMatrix) -> Result<DenseMatrix> {
    if m.rows() * m.cols() > MEM_CAP_ELEMS {
        return Err(Error::CapExceeded("materialize_multilevel: exceeds the element cap".to_string()));
    }
    let mut out = DenseMatrix::zeros(m.rows(), m.cols());
    for t in &m.terms {
        let mut acc = t.patterns[0].to_dense();
        for e in &t.patterns[1..] {
            acc = tensor::kron(&acc, &e.to_dense());
        }
        out = out.add(&tensor::kron(&acc, &t.block));
    }
    Ok(out)
}
