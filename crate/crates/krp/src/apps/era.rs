//! Eigensystem realization: recovers state-space matrices (A, B, C, D)
//! from Markov parameters via a rank-r factorization of the block-Hankel
//! matrix, compressed either by dense SVD or by the single-view
//! randomized SVD over the Hankel's block structure.

use crate::block::{self, BlockSketchKind, BlockStructuredMatrix, BlockTerm, SparsePattern};
use crate::linalg;
use crate::lowrank;
use crate::sketch::{RngLedger, SketchConfig};
use crate::tensor::DenseMatrix;
use crate::{Error, Result};

/// Markov parameters `H_k` for `k = 0..2s-1`; `H_0` is the feedthrough D.
#[derive(Clone, Debug)]
pub struct MarkovSequence {
    m: usize,
    n: usize,
    blocks: Vec<DenseMatrix>,
}

impl MarkovSequence {
    /// `blocks[k] = H_k`; the length must be `2s` for some horizon
    /// `s >= 2`.
    pub fn new(blocks: Vec<DenseMatrix>) -> Result<Self> {
        if blocks.len() < 4 || blocks.len() % 2 != 0 {
            return Err(Error::invalid(format!(
                "MarkovSequence: need an even number >= 4 of blocks, got {}",
                blocks.len()
            )));
        }
        let (m, n) = (blocks[0].rows(), blocks[0].cols());
        if m == 0 || n == 0 || blocks.iter().any(|b| b.rows() != m || b.cols() != n) {
            return Err(Error::invalid("MarkovSequence: non-uniform block shape".to_string()));
        }
        Ok(Self { m, n, blocks })
    }

    /// Block shape `(m, n)`.
    pub fn block_shape(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    /// Time horizon `s` (`2s` stored blocks).
    pub fn horizon(&self) -> usize {
        self.blocks.len() / 2
    }

    pub fn blocks(&self) -> &[DenseMatrix] {
        &self.blocks
    }
}

/// `H_k = C A^(k-1) B` for `k = 1..2s-1` plus `H_0 = D`.
pub fn simulate_markov(
    a: &DenseMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
    d: &DenseMatrix,
    s: usize,
) -> Result<MarkovSequence> {
    let order = a.rows();
    if a.cols() != order || b.rows() != order || c.cols() != order {
        return Err(Error::invalid("simulate_markov: inconsistent state dimension".to_string()));
    }
    if d.rows() != c.rows() || d.cols() != b.cols() {
        return Err(Error::invalid("simulate_markov: D shape mismatch".to_string()));
    }
    if s < 2 {
        return Err(Error::invalid("simulate_markov: horizon must be >= 2".to_string()));
    }
    let mut blocks = Vec::with_capacity(2 * s);
    blocks.push(d.clone());
    let mut pow_b = b.clone();
    for _ in 1..2 * s {
        blocks.push(c.matmul(&pow_b));
        pow_b = a.matmul(&pow_b);
    }
    MarkovSequence::new(blocks)
}

/// Hankel placement pattern on an `(s-1) x (s-1)` grid with ones where
/// `i + j = diag` (1-based block indices).
fn hankel_pattern(grid: usize, diag: usize) -> Result<SparsePattern> {
    let entries: Vec<(usize, usize)> = (0..grid)
        .filter_map(|i| {
            let want = diag.checked_sub(i + 1)?;
            (1..=grid).contains(&want).then(|| (i, want - 1))
        })
        .collect();
    SparsePattern::new(grid, grid, entries)
}

/// Block-Hankel matrix `H = sum_k E_k (x) H_k` on an `(s-1) x (s-1)`
/// block grid, block `(i, j)` holding `H_(i+j-1)`; the terms run
/// `k = 1..2s-1`, so the last two patterns are empty.
pub fn build_hankel(seq: &MarkovSequence) -> Result<BlockStructuredMatrix> {
    build_hankel_offset(seq, 1)
}

/// One-step-shifted block Hankel: block `(i, j)` holds `H_(i+j)`.
pub fn build_shifted_hankel(seq: &MarkovSequence) -> Result<BlockStructuredMatrix> {
    build_hankel_offset(seq, 2)
}

fn build_hankel_offset(seq: &MarkovSequence, first: usize) -> Result<BlockStructuredMatrix> {
    let s = seq.horizon();
    let grid = s - 1;
    let mut terms = Vec::new();
    for k in first..2 * s {
        terms.push(BlockTerm {
            // Block (i, j) holds H_(i+j-1) for the plain Hankel and
            // H_(i+j) for the shifted one, so H_k sits on the 1-based
            // antidiagonal i+j = k+2-first.
            pattern: hankel_pattern(grid, k + 2 - first)?,
            block: seq.blocks[k].clone(),
        });
    }
    BlockStructuredMatrix::new(grid, grid, seq.m, seq.n, terms)
}

/// Which factorization compresses the block Hankel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EraMethod {
    /// Single-view randomized SVD with KRP sketches.
    KrpSingleView,
    /// Single-view randomized SVD with dense Gaussian sketches.
    GaussianSingleView,
    /// Exact truncated SVD of the materialized Hankel (oracle; capped).
    DenseSvd,
}

/// Recovered state-space realization plus diagnostics.
#[derive(Clone, Debug)]
pub struct EraSystem {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub c: DenseMatrix,
    pub d: DenseMatrix,
    /// Realized order (can drop below the requested rank).
    pub order: usize,
    /// Retained Hankel singular values.
    pub sigma: Vec<f64>,
    /// Smallest retained singular value below `1e-12 * sigma_1`: the
    /// requested order likely exceeds the system order.
    pub order_warning: bool,
}

/// Balanced-realization ERA: rank-`r` factorization `H ~= U S V^T` of
/// the block Hankel, then `A = S^-1/2 U^T Hup V S^-1/2`,
/// `B = S^1/2 V(1:n,:)^T`, `C = U(1:m,:) S^1/2`, `D = H_0`, where `Hup`
/// is the one-step-shifted Hankel. Sketch sizes are `ell_r = r + rho`
/// and `ell_l = ceil(1.5 ell_r)`, clamped to the matrix dimensions.
pub fn era_identify(
    seq: &MarkovSequence,
    r: usize,
    rho: usize,
    method: EraMethod,
    cfg: &SketchConfig,
    ledger: &RngLedger,
) -> Result<EraSystem> {
    if r == 0 {
        return Err(Error::invalid("era_identify: rank must be >= 1".to_string()));
    }
    let h = build_hankel(seq)?;
    let min_dim = h.rows().min(h.cols());
    if r > min_dim {
        return Err(Error::invalid(format!(
            "era_identify: rank {r} exceeds Hankel min dimension {min_dim}"
        )));
    }
    let t = match method {
        EraMethod::DenseSvd => {
            let dense = block::materialize_block(&h)?;
            let full = linalg::thin_svd(&dense)?;
            linalg::truncate_svd(&full, r)?
        }
        EraMethod::KrpSingleView | EraMethod::GaussianSingleView => {
            let kind = if method == EraMethod::KrpSingleView {
                BlockSketchKind::Krp
            } else {
                BlockSketchKind::Gaussian
            };
            let ell_l = lowrank::default_ell_left(r + rho).min(min_dim);
            let ell_r = (r + rho).min(ell_l - 1);
            block::single_view_block(&h, r, ell_r, ell_l, kind, cfg, ledger)?
        }
    };
    let order = t.s.len();
    if order == 0 {
        return Err(Error::numerical("era_identify: Hankel is numerically zero".to_string()));
    }
    let order_warning = order < r || t.s[order - 1] <= 1e-12 * t.s[0];

    // A = S^-1/2 (U^T Hup V) S^-1/2 without materializing Hup.
    let hup = build_shifted_hankel(seq)?;
    let hup_v = block::apply_dense_right(&hup, &t.v)?;
    let mid = t.u.t_matmul(&hup_v);
    let inv_sqrt: Vec<f64> = t.s.iter().map(|&s| 1.0 / s.sqrt()).collect();
    let mut a = DenseMatrix::zeros(order, order);
    for j in 0..order {
        for i in 0..order {
            a.set(i, j, mid.get(i, j) * inv_sqrt[i] * inv_sqrt[j]);
        }
    }
    // B = S^1/2 V(1:n,:)^T, C = U(1:m,:) S^1/2.
    let (m, n) = seq.block_shape();
    let mut b = DenseMatrix::zeros(order, n);
    for j in 0..n {
        for i in 0..order {
            b.set(i, j, t.s[i].sqrt() * t.v.get(j, i));
        }
    }
    let mut c = DenseMatrix::zeros(m, order);
    for j in 0..order {
        for i in 0..m {
            c.set(i, j, t.u.get(i, j) * t.s[j].sqrt());
        }
    }
    Ok(EraSystem { a, b, c, d: seq.blocks[0].clone(), order, sigma: t.s, order_warning })
}

/// Eigenvalues of a square matrix as `(re, im)` pairs.
pub fn system_eigenvalues(a: &DenseMatrix) -> Result<Vec<(f64, f64)>> {
    if a.rows() != a.cols() {
        return Err(Error::invalid("system_eigenvalues: matrix not square".to_string()));
    }
    let na = nalgebra::DMatrix::from_column_slice(a.rows(), a.cols(), a.data());
    Ok(na.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect())
}

/// Hausdorff distance between two finite spectra in the complex plane.
pub fn hausdorff_eigs(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("hausdorff_eigs: empty spectrum".to_string()));
    }
    let one_sided = |p: &[(f64, f64)], q: &[(f64, f64)]| {
        p.iter()
            .map(|&(re, im)| {
                q.iter()
                    .map(|&(re2, im2)| ((re - re2).powi(2) + (im - im2).powi(2)).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    Ok(one_sided(a, b).max(one_sided(b, a)))
}

/// Random stable system: A scaled to the given spectral radius, dense
/// B, C, D.
pub fn random_stable_system(
    m: usize,
    n: usize,
    order: usize,
    spectral_radius: f64,
    seed: u64,
) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix, DenseMatrix)> {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    if m == 0 || n == 0 || order == 0 || !(spectral_radius > 0.0 && spectral_radius < 1.0) {
        return Err(Error::invalid("random_stable_system: bad parameters".to_string()));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut rand_mat = |rows: usize, cols: usize| {
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        DenseMatrix::from_col_major(rows, cols, data)
    };
    let a0 = rand_mat(order, order);
    let radius = system_eigenvalues(&a0)?
        .iter()
        .map(|&(re, im)| (re * re + im * im).sqrt())
        .fold(0.0, f64::max);
    if radius == 0.0 {
        return Err(Error::numerical("random_stable_system: nilpotent draw".to_string()));
    }
    let a = a0.scale(spectral_radius / radius);
    Ok((a, rand_mat(order, n), rand_mat(m, order), rand_mat(m, n)))
}

/// Named experiment shapes.
#[derive(Clone, Copy, Debug)]
pub struct EraPreset {
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub true_order: usize,
    pub r: usize,
    pub rho: usize,
}

/// Desk-scale preset: Hankel 144 x 96.
pub fn desk_preset() -> EraPreset {
    EraPreset { m: 6, n: 4, s: 25, true_order: 5, r: 5, rho: 20 }
}

/// Full-scale preset: Hankel 30845 x 9950 (KRP/Gaussian sketches only;
/// dense materialization exceeds the memory cap).
pub fn full_preset() -> EraPreset {
    EraPreset { m: 155, n: 50, s: 200, true_order: 155, r: 155, rho: 20 }
}
