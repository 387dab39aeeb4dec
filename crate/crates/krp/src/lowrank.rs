//! Randomized low-rank compression of dense matrices: range finder,
//! randomized SVD, single-view (one-pass) approximation and Nystrom PSD
//! approximation. Every routine accepts either a dense Gaussian or an
//! implicit KRP sketch.

use crate::linalg::{self, SvdTriplet};
use crate::sketch::{self, KrpSketch, RngLedger, SketchConfig};
use crate::tensor::DenseMatrix;
use crate::{Error, Result};

/// Which test matrix a sketched routine should draw.
#[derive(Clone, Debug)]
pub enum SketchKind {
    /// Dense i.i.d. Gaussian baseline.
    Dense,
    /// KRP sketch over the given factor dims (product must match the
    /// sketched dimension).
    Krp(Vec<usize>),
}

/// `M * Omega` for a freshly drawn ell-column sketch of the given kind.
/// The KRP route never materializes `Omega`.
pub fn sketch_right(
    m: &DenseMatrix,
    ell: usize,
    kind: &SketchKind,
    cfg: &SketchConfig,
    ledger: &RngLedger,
) -> Result<DenseMatrix> {
    match kind {
        SketchKind::Dense => {
            let omega = sketch::draw_gaussian_dense(m.cols(), ell, cfg, ledger)?;
            Ok(m.matmul(&omega))
        }
        SketchKind::Krp(dims) => {
            let n: usize = dims.iter().product();
            if n != m.cols() {
                return Err(Error::invalid(format!(
                    "sketch dims {:?} do not multiply to {}",
                    dims,
                    m.cols()
                )));
            }
            let s = sketch::draw_krp(dims, ell, cfg, ledger)?;
            apply_krp_right(m, &s)
        }
    }
}

/// `M * Omega` with `Omega` in KRP form: computed as
/// `(Omega^T M^T)^T` by per-column mode contractions.
pub fn apply_krp_right(m: &DenseMatrix, s: &KrpSketch) -> Result<DenseMatrix> {
    Ok(sketch::krp_transpose_apply(s, &m.transpose())?.transpose())
}

/// Randomized range finder: orthonormal basis for the range of
/// `M * Omega` with `ell = r + rho` sketch columns. The closure receives
/// `ell` and must return the `rows x ell` sketch. Rank-deficient sketches
/// yield fewer than `ell` columns.
pub fn range_finder<F>(
    apply_sketch: F,
    rows: usize,
    cols: usize,
    r: usize,
    rho: usize,
) -> Result<DenseMatrix>
where
    F: FnOnce(usize) -> Result<DenseMatrix>,
{
    let ell = r + rho;
    if r == 0 {
        return Err(Error::invalid("range_finder: rank must be >= 1".to_string()));
    }
    if ell > rows.min(cols) {
        return Err(Error::invalid(format!(
            "range_finder: ell = {} exceeds min dimension {}",
            ell,
            rows.min(cols)
        )));
    }
    let y = apply_sketch(ell)?;
    if y.rows() != rows || y.cols() != ell {
        return Err(Error::invalid(format!(
            "range_finder: sketch is {}x{}, expected {}x{}",
            y.rows(),
            y.cols(),
            rows,
            ell
        )));
    }
    linalg::orth(&y)
}

/// Range finder over a dense matrix with a drawn sketch of `kind`.
pub fn sketched_range_finder(
    m: &DenseMatrix,
    r: usize,
    rho: usize,
    kind: &SketchKind,
    cfg: &SketchConfig,
    ledger: &RngLedger,
) -> Result<DenseMatrix> {
    range_finder(
        |ell| sketch_right(m, ell, kind, cfg, ledger),
        m.rows(),
        m.cols(),
        r,
        rho,
    )
}

/// Randomized SVD: range finder then exact factorization of the small
/// projected matrix `Q^T M`, truncated to rank `r`.
pub fn randomized_svd(
    m: &DenseMatrix,
    r: usize,
    rho: usize,
    kind: &SketchKind,
    cfg: &SketchConfig,
    ledger: &RngLedger,
) -> Result<SvdTriplet> {
    let q = sketched_range_finder(m, r, rho, kind, cfg, ledger)?;
    if q.cols() == 0 {
        return Ok(SvdTriplet {
            u: DenseMatrix::zeros(m.rows(), 0),
            s: vec![],
            v: DenseMatrix::zeros(m.cols(), 0),
        });
    }
    let b = q.t_matmul(m);
    let t = linalg::thin_svd(&b)?;
    let keep = r.min(t.s.len());
    let tr = linalg::truncate_svd(&t, keep)?;
    Ok(SvdTriplet { u: q.matmul(&tr.u), s: tr.s, v: tr.v })
}

/// Result of the single-view (one-pass) approximation `M ~= Q W`.
#[derive(Clone, Debug)]
pub struct SingleView {
    pub q: DenseMatrix,
    pub w: DenseMatrix,
    /// True when `Psi^T Q` was rank-deficient and the pseudo-inverse was
    /// used instead of QR least squares.
    pub pinv_fallback: bool,
}

impl SingleView {
    pub fn reconstruct(&self) -> DenseMatrix {
        self.q.matmul(&self.w)
    }
}

/// Single-view approximation from the two sketches `Y = M Omega`
/// (`m x ell_r`) and `Z = Psi^T M` (`ell_l x n`): `Q = orth(Y)` and
/// `W = (Psi^T Q)^+ Z` via QR least squares with a pseudo-inverse
/// fallback. `apply_psi_t` maps `Q` to `Psi^T Q`.
pub fn single_view<F>(y: &DenseMatrix, z: &DenseMatrix, apply_psi_t: F) -> Result<SingleView>
where
    F: FnOnce(&DenseMatrix) -> Result<DenseMatrix>,
{
    let (m, ell_r) = (y.rows(), y.cols());
    let (ell_l, n) = (z.rows(), z.cols());
    if !(ell_r < ell_l && ell_l < m.min(n)) {
        return Err(Error::invalid(format!(
            "single_view needs ell_r < ell_l < min(m, n), got {ell_r}, {ell_l}, {}",
            m.min(n)
        )));
    }
    let q = linalg::orth(y)?;
    if q.cols() == 0 {
        return Ok(SingleView {
            q: DenseMatrix::zeros(m, 0),
            w: DenseMatrix::zeros(0, n),
            pinv_fallback: false,
        });
    }
    let pq = apply_psi_t(&q)?;
    if pq.rows() != ell_l || pq.cols() != q.cols() {
        return Err(Error::invalid(format!(
            "single_view: Psi^T Q is {}x{}, expected {}x{}",
            pq.rows(),
            pq.cols(),
            ell_l,
            q.cols()
        )));
    }
    match linalg::lstsq_qr(&pq, z)? {
        Some(w) => Ok(SingleView { q, w, pinv_fallback: false }),
        None => {
            let w = linalg::pinv(&pq, None)?.matmul(z);
            Ok(SingleView { q, w, pinv_fallback: true })
        }
    }
}

/// Default left sketch size for single-view routines.
pub fn default_ell_left(ell_r: usize) -> usize {
    (3 * ell_r).div_ceil(2)
}

/// Nystrom approximation of a symmetric PSD matrix, returned in factored
/// form `M_nys = F F^T`.
#[derive(Clone, Debug)]
pub struct NystromApprox {
    pub f: DenseMatrix,
}

impl NystromApprox {
    pub fn reconstruct(&self) -> DenseMatrix {
        self.f.matmul_t(&self.f)
    }
}

pub fn nystrom_psd(
    m: &DenseMatrix,
    ell: usize,
    kind: &SketchKind,
    cfg: &SketchConfig,
    ledger: &RngLedger,
) -> Result<NystromApprox> {
    let n = m.rows();
    if n != m.cols() {
        return Err(Error::invalid("nystrom_psd: matrix not square".to_string()));
    }
    if m.sub(&m.transpose()).fro_norm() > 1e-10 * m.fro_norm() {
        return Err(Error::numerical("nystrom_psd: input is not symmetric".to_string()));
    }
    if ell == 0 || ell > n {
        return Err(Error::invalid(format!("nystrom_psd: ell = {ell} out of range")));
    }
    // Y = M Omega and C = Omega^T M Omega.
    let (y, c) = match kind {
        SketchKind::Dense => {
            let omega = sketch::draw_gaussian_dense(n, ell, cfg, ledger)?;
            let y = m.matmul(&omega);
            let c = omega.t_matmul(&y);
            (y, c)
        }
        SketchKind::Krp(dims) => {
            if dims.iter().product::<usize>() != n {
                return Err(Error::invalid("nystrom_psd: sketch dims mismatch".to_string()));
            }
            let s = sketch::draw_krp(dims, ell, cfg, ledger)?;
            let y = apply_krp_right(m, &s)?;
            let c = sketch::krp_transpose_apply(&s, &y)?;
            (y, c)
        }
    };
    // Symmetric pseudo-inverse square root of C: F = Y V diag(lam^-1/2).
    let c = c.add(&c.transpose()).scale(0.5);
    let (vals, vecs) = linalg::sym_eig(&c)?;
    let cut = vals.first().copied().unwrap_or(0.0).max(0.0) * 1e-12 * ell as f64;
    let mut f_cols = Vec::new();
    for (j, &lam) in vals.iter().enumerate() {
        if lam > cut {
            f_cols.push((j, 1.0 / lam.sqrt()));
        }
    }
    let mut vw = DenseMatrix::zeros(ell, f_cols.len());
    for (dst, &(src, w)) in f_cols.iter().enumerate() {
        let col: Vec<f64> = vecs.col(src).iter().map(|x| x * w).collect();
        vw.col_mut(dst).copy_from_slice(&col);
    }
    Ok(NystromApprox { f: y.matmul(&vw) })
}
