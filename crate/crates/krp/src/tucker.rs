//! Tucker compression: deterministic HOSVD and STHOSVD, their
//! KRP-sketched randomized variants (fresh and memoized), the
//! sequentially truncated randomized variant, and dense-Gaussian
//! baselines with identical control flow.

use crate::linalg;
use crate::sketch::{self, RngLedger, SketchConfig};
use crate::tensor::{self, DenseMatrix, DenseTensor};
use crate::{Error, Result};

/// Core tensor plus one factor matrix per mode.
#[derive(Clone, Debug)]
pub struct TuckerTensor {
    pub core: DenseTensor,
    pub factors: Vec<DenseMatrix>,
    /// Per-factor flag: columns are orthonormal.
    pub orthonormal: Vec<bool>,
}

impl TuckerTensor {
    pub fn order(&self) -> usize {
        self.factors.len()
    }

    /// Ambient dims (factor row counts).
    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.rows()).collect()
    }

    /// Core dims (the representation's multilinear rank).
    pub fn ranks(&self) -> &[usize] {
        self.core.dims()
    }

    /// Shape and orthonormality-flag consistency.
    pub fn validate(&self) -> Result<()> {
        if self.core.order() != self.factors.len() || self.orthonormal.len() != self.factors.len() {
            return Err(Error::invalid("TuckerTensor: order mismatch".to_string()));
        }
        for (i, f) in self.factors.iter().enumerate() {
            if f.cols() != self.core.dims()[i] {
                return Err(Error::invalid(format!(
                    "TuckerTensor: factor {i} has {} cols, core dim is {}",
                    f.cols(),
                    self.core.dims()[i]
                )));
            }
            if self.orthonormal[i] {
                let g = f.t_matmul(f);
                let dev = g.sub(&DenseMatrix::identity(f.cols())).fro_norm();
                if dev > 1e-10 * f.cols().max(1) as f64 {
                    return Err(Error::numerical(format!(
                        "TuckerTensor: factor {i} flagged orthonormal, deviation {dev:.3e}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Multi-TTM of the core with every factor.
    pub fn reconstruct(&self) -> Result<DenseTensor> {
        let pairs: Vec<(usize, &DenseMatrix)> =
            self.factors.iter().enumerate().map(|(i, f)| (i, f)).collect();
        tensor::multi_ttm(&self.core, &pairs)
    }
}

/// Target ranks plus a shared oversampling parameter; the sketch size in
/// mode `i` is `ell_i = r_i + p`.
#[derive(Clone, Debug)]
pub struct RankSpec {
    ranks: Vec<usize>,
    oversample: usize,
}

impl RankSpec {
    pub fn new(ranks: &[usize], oversample: usize) -> Result<Self> {
        if ranks.is_empty() || ranks.iter().any(|&r| r == 0) {
            return Err(Error::invalid("RankSpec: ranks must be positive".to_string()));
        }
        Ok(Self { ranks: ranks.to_vec(), oversample })
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn oversample(&self) -> usize {
        self.oversample
    }

    pub fn ell(&self, i: usize) -> usize {
        self.ranks[i] + self.oversample
    }

    /// Checks `ell_i <= min(n_i, prod_{j != i} n_j)` against ambient dims.
    pub fn validate(&self, dims: &[usize]) -> Result<()> {
        if self.ranks.len() != dims.len() {
            return Err(Error::invalid(format!(
                "RankSpec: {} ranks for an order-{} tensor",
                self.ranks.len(),
                dims.len()
            )));
        }
        let total: usize = dims.iter().product();
        for i in 0..dims.len() {
            let other = total / dims[i];
            let cap = dims[i].min(other);
            if self.ell(i) > cap {
                return Err(Error::invalid(format!(
                    "RankSpec: ell_{} = {} exceeds min(n_i, prod of other dims) = {cap}",
                    i + 1,
                    self.ell(i)
                )));
            }
        }
        Ok(())
    }
}

/// How factor bases are extracted from an unfolding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorMethod {
    /// Eigenvectors of the Gram matrix `X_(i) X_(i)^T` (cheaper; accuracy
    /// floor near the square root of machine precision).
    Gram,
    /// Left singular vectors of the unfolding.
    DirectSvd,
}

/// Leading `r` left singular vectors of `m`.
fn factor_basis(m: &DenseMatrix, r: usize, method: FactorMethod) -> Result<DenseMatrix> {
    match method {
        FactorMethod::Gram => {
            let g = m.matmul_t(m);
            let (_, vecs) = linalg::sym_eig(&g)?;
            Ok(vecs.head_cols(r))
        }
        FactorMethod::DirectSvd => {
            let t = linalg::thin_svd(m)?;
            Ok(t.u.head_cols(r))
        }
    }
}

fn check_ranks(dims: &[usize], ranks: &[usize]) -> Result<()> {
    if ranks.len() != dims.len() {
        return Err(Error::invalid("ranks must list one entry per mode".to_string()));
    }
    for (i, (&r, &n)) in ranks.iter().zip(dims).enumerate() {
        if r == 0 || r > n {
            return Err(Error::invalid(format!(
                "rank {} in mode {} out of range 1..={}",
                r,
                i + 1,
                n
            )));
        }
    }
    Ok(())
}

/// HOSVD: per-mode leading singular vectors of each unfolding, then one
/// multi-TTM for the core.
pub fn hosvd(x: &DenseTensor, ranks: &[usize]) -> Result<TuckerTensor> {
    hosvd_with(x, ranks, FactorMethod::Gram)
}

pub fn hosvd_with(x: &DenseTensor, ranks: &[usize], method: FactorMethod) -> Result<TuckerTensor> {
    check_ranks(x.dims(), ranks)?;
    let d = x.order();
    let mut factors = Vec::with_capacity(d);
    for i in 0..d {
        let unf = tensor::unfold(x, i)?;
        factors.push(factor_basis(&unf, ranks[i], method)?);
    }
    finish_hosvd(x, factors)
}

fn finish_hosvd(x: &DenseTensor, factors: Vec<DenseMatrix>) -> Result<TuckerTensor> {
    let qt: Vec<DenseMatrix> = factors.iter().map(|q| q.transpose()).collect();
    let pairs: Vec<(usize, &DenseMatrix)> = qt.iter().enumerate().map(|(i, q)| (i, q)).collect();
    let core = tensor::multi_ttm(x, &pairs)?;
    let orthonormal = vec![true; factors.len()];
    Ok(TuckerTensor { core, factors, orthonormal })
}

/// STHOSVD: truncate one mode at a time, shrinking the working core.
pub fn sthosvd(x: &DenseTensor, ranks: &[usize], order: Option<&[usize]>) -> Result<TuckerTensor> {
    sthosvd_with(x, ranks, order, FactorMethod::Gram)
}

pub fn sthosvd_with(
    x: &DenseTensor,
    ranks: &[usize],
    order: Option<&[usize]>,
    method: FactorMethod,
) -> Result<TuckerTensor> {
    check_ranks(x.dims(), ranks)?;
    let d = x.order();
    let order = mode_order(d, order)?;
    let mut g = x.clone();
    let mut factors: Vec<DenseMatrix> = vec![DenseMatrix::zeros(0, 0); d];
    for &i in &order {
        let unf = tensor::unfold(&g, i)?;
        let q = factor_basis(&unf, ranks[i], method)?;
        g = tensor::ttm(&g, &q.transpose(), i)?;
        factors[i] = q;
    }
    let orthonormal = vec![true; d];
    Ok(TuckerTensor { core: g, factors, orthonormal })
}

fn mode_order(d: usize, order: Option<&[usize]>) -> Result<Vec<usize>> {
    match order {
        None => Ok((0..d).collect()),
        Some(p) => {
            let mut seen = vec![false; d];
            if p.len() != d {
                return Err(Error::invalid("mode order must be a permutation".to_string()));
            }
            for &i in p {
                if i >= d || seen[i] {
                    return Err(Error::invalid("mode order must be a permutation".to_string()));
                }
                seen[i] = true;
            }
            Ok(p.to_vec())
        }
    }
}

/// Randomized HOSVD with KRP sketches: for each mode, an MTTKRP of the
/// original tensor against `d-1` sketch factors, then thin QR. Output
/// core dims are the sketch sizes `ell_i` (no trailing truncation).
/// Fresh mode sketches use independent substreams; the memoized variant
/// draws one pool of `d-1` matrices of shape `max(n_j) x max(ell_i)` and
/// slices it for every mode.
pub fn rhosvd_krp(
    x: &DenseTensor,
    spec: &RankSpec,
    cfg: &SketchConfig,
    ledger: &RngLedger,
    memoize: bool,
) -> Result<TuckerTensor> {
    spec.validate(x.dims())?;
    if memoize {
        let d = x.order();
        let max_n = *x.dims().iter().max().unwrap();
        let max_ell = (0..d).map(|i| spec.ell(i)).max().unwrap();
        let mut pool = Vec::with_capacity(d.saturating_sub(1));
        for slot in 0..d.saturating_sub(1) {
            pool.push(sketch::draw_mode_factor(max_n, max_ell, slot as u64 + 1, cfg, ledger)?);
        }
        rhosvd_krp_impl(x, spec, |_, _, slot, rows, cols| Ok(pool[slot].top_left(rows, cols)))
    } else {
        rhosvd_krp_impl(x, spec, |target, mode, _, rows, cols| {
            let c = cfg.with_draw(target as u64 + 1);
            sketch::draw_mode_factor(rows, cols, mode as u64 + 1, &c, ledger)
        })
    }
}

/// Shared mode loop for the fresh and memoized variants. `draw` receives
/// `(target mode, source mode, ascending slot among the complement
/// modes, rows, cols)`; fresh labeling keys on the source mode, the
/// memoized pool on the slot.
fn rhosvd_krp_impl<F>(x: &DenseTensor, spec: &RankSpec, mut draw: F) -> Result<TuckerTensor>
where
    F: FnMut(usize, usize, usize, usize, usize) -> Result<DenseMatrix>,
{
    let d = x.order();
    let mut factors = Vec::with_capacity(d);
    for i in 0..d {
        let ell = spec.ell(i);
        let y = if d == 1 {
            // No complement modes: the unfolding itself is the sketch.
            tensor::unfold(x, 0)?
        } else {
            let mut omegas = Vec::with_capacity(d - 1);
            for (slot, j) in (0..d).filter(|&j| j != i).enumerate() {
                omegas.push(draw(i, j, slot, x.dims()[j], ell)?);
            }
            let refs: Vec<&DenseMatrix> = omegas.iter().collect();
            tensor::mttkrp(x, &refs, i)?
        };
        let (q, _) = linalg::thin_qr(&y)?;
        factors.push(q);
    }
    finish_hosvd(x, factors)
}

/// Randomized HOSVD baseline with dense Gaussian sketches and the same
/// control flow.
pub fn rhosvd_gaussian(
    x: &DenseTensor,
    spec: &RankSpec,
    cfg: &SketchConfig,
    ledger: &RngLedger,
) -> Result<TuckerTensor> {
    spec.validate(x.dims())?;
    let d = x.order();
    let total: usize = x.dims().iter().product();
    let mut factors = Vec::with_capacity(d);
    for i in 0..d {
        let unf = tensor::unfold(x, i)?;
        let omega = sketch::draw_gaussian_dense(
            total / x.dims()[i],
            spec.ell(i),
            &cfg.with_draw(i as u64 + 1),
            ledger,
        )?;
        let (q, _) = linalg::thin_qr(&unf.matmul(&omega))?;
        factors.push(q);
    }
    finish_hosvd(x, factors)
}

/// Randomized STHOSVD with KRP sketches: mode-`i` factors are sized to
/// the current core (already-processed modes contribute `ell_j` rows),
/// the MTTKRP runs on the current core, and the core shrinks after each
/// mode. Default processing order is ascending.
pub fn rsthosvd_krp(
    x: &DenseTensor,
    spec: &RankSpec,
    cfg: &SketchConfig,
    ledger: &RngLedger,
) -> Result<TuckerTensor> {
    rsthosvd_krp_ordered(x, spec, None, cfg, ledger)
}

pub fn rsthosvd_krp_ordered(
    x: &DenseTensor,
    spec: &RankSpec,
    order: Option<&[usize]>,
    cfg: &SketchConfig,
    ledger: &RngLedger,
) -> Result<TuckerTensor> {
    spec.validate(x.dims())?;
    let d = x.order();
    let order = mode_order(d, order)?;
    let mut g = x.clone();
    let mut factors: Vec<DenseMatrix> = vec![DenseMatrix::zeros(0, 0); d];
    for &i in &order {
        let ell = spec.ell(i);
        let y = if d == 1 {
            tensor::unfold(&g, 0)?
        } else {
            let cfg_i = cfg.with_draw(i as u64 + 1);
            let mut omegas = Vec::with_capacity(d - 1);
            for j in (0..d).filter(|&j| j != i) {
                omegas.push(sketch::draw_mode_factor(
                    g.dims()[j],
                    ell,
                    j as u64 + 1,
                    &cfg_i,
                    ledger,
                )?);
            }
            let refs: Vec<&DenseMatrix> = omegas.iter().collect();
            tensor::mttkrp(&g, &refs, i)?
        };
        let (q, _) = linalg::thin_qr(&y)?;
        g = tensor::ttm(&g, &q.transpose(), i)?;
        factors[i] = q;
    }
    let orthonormal = vec![true; d];
    Ok(TuckerTensor { core: g, factors, orthonormal })
}

/// Randomized STHOSVD baseline with dense Gaussian sketches.
pub fn rsthosvd_gaussian(
    x: &DenseTensor,
    spec: &RankSpec,
    cfg: &SketchConfig,
    ledger: &RngLedger,
) -> Result<TuckerTensor> {
    spec.validate(x.dims())?;
    let d = x.order();
    let mut g = x.clone();
    let mut factors: Vec<DenseMatrix> = vec![DenseMatrix::zeros(0, 0); d];
    for i in 0..d {
        let unf = tensor::unfold(&g, i)?;
        let omega = sketch::draw_gaussian_dense(
            unf.cols(),
            spec.ell(i),
            &cfg.with_draw(i as u64 + 1),
            ledger,
        )?;
        let (q, _) = linalg::thin_qr(&unf.matmul(&omega))?;
        g = tensor::ttm(&g, &q.transpose(), i)?;
        factors[i] = q;
    }
    let orthonormal = vec![true; d];
    Ok(TuckerTensor { core: g, factors, orthonormal })
}

/// Relative reconstruction error `||x - reconstruct(t)|| / ||x||`.
pub fn tucker_error(x: &DenseTensor, t: &TuckerTensor) -> Result<f64> {
    if t.dims() != x.dims() {
        return Err(Error::invalid("tucker_error: ambient dims mismatch".to_string()));
    }
    let rec = t.reconstruct()?;
    let denom = x.fro_norm();
    let err = x.sub(&rec).fro_norm();
    Ok(if denom > 0.0 { err / denom } else { err })
}

/// Optional recompression pass: HOSVD of the core to the given ranks,
/// merged into the factors. Off by default in every sketching routine.
pub fn recompress(t: &TuckerTensor, ranks: &[usize]) -> Result<TuckerTensor> {
    let inner = hosvd(&t.core, ranks)?;
    let mut factors = Vec::with_capacity(t.factors.len());
    let mut orthonormal = Vec::with_capacity(t.factors.len());
    for i in 0..t.factors.len() {
        factors.push(t.factors[i].matmul(&inner.factors[i]));
        orthonormal.push(t.orthonormal[i]);
    }
    Ok(TuckerTensor { core: inner.core, factors, orthonormal })
}

/// Singular values of the mode-`i` unfolding via its Gram matrix.
pub fn mode_singular_values(x: &DenseTensor, mode: usize) -> Result<Vec<f64>> {
    let unf = tensor::unfold(x, mode)?;
    let g = unf.matmul_t(&unf);
    let (vals, _) = linalg::sym_eig(&g)?;
    Ok(vals.into_iter().map(|v| v.max(0.0).sqrt()).collect())
}
