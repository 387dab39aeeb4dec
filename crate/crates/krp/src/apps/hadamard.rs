//! Tucker recompression of the Hadamard product of two order-3 Tucker
//! tensors. The product X * Y is itself a Tucker tensor with core
//! F (x) G and row-wise Khatri-Rao factors, so mode sketches contract
//! rank-sized quantities only; the ambient product is never formed.

use crate::linalg;
use crate::sketch::{self, RngLedger, SketchConfig};
use crate::tensor::{self, DenseMatrix, DenseTensor};
use crate::tucker::TuckerTensor;
use crate::{Error, Result};

fn check_pair(x: &TuckerTensor, y: &TuckerTensor) -> Result<()> {
    if x.order() != 3 || y.order() != 3 {
        return Err(Error::invalid(format!(
            "hadamard: need order-3 operands, got {} and {}",
            x.order(),
            y.order()
        )));
    }
    if x.dims() != y.dims() {
        return Err(Error::invalid(format!(
            "hadamard: ambient dims {:?} vs {:?}",
            x.dims(),
            y.dims()
        )));
    }
    Ok(())
}

/// Exact Tucker form of `X * Y`: core `F (x) G`, mode-i factor the
/// row-wise Khatri-Rao of the operands' mode-i factors. Factor columns
/// are not orthonormal; ranks multiply.
pub fn hadamard_tucker_form(x: &TuckerTensor, y: &TuckerTensor) -> Result<TuckerTensor> {
    check_pair(x, y)?;
    let core = tensor::kron_tensor(&x.core, &y.core)?;
    let mut factors = Vec::with_capacity(3);
    for i in 0..3 {
        factors.push(tensor::row_khatri_rao(&x.factors[i], &y.factors[i])?);
    }
    Ok(TuckerTensor { core, factors, orthonormal: vec![false; 3] })
}

/// Dense oracle: reconstructs both operands and multiplies entrywise.
pub fn hadamard_dense(x: &TuckerTensor, y: &TuckerTensor) -> Result<DenseTensor> {
    check_pair(x, y)?;
    tensor::hadamard(&x.reconstruct()?, &y.reconstruct()?)
}

/// `(A^T (.) U^T) Omega` without forming ambient-by-ambient products:
/// the transposed row-wise Khatri-Rao of the mode factors applied to a
/// sketch factor.
fn transposed_kr_apply(
    a: &DenseMatrix,
    u: &DenseMatrix,
    omega: &DenseMatrix,
) -> Result<DenseMatrix> {
    Ok(tensor::row_khatri_rao(a, u)?.t_matmul(omega))
}

/// Mode-`mode` sketch of `X * Y` against the KRP sketch with factors
/// `omegas = [Omega_j1, Omega_j2]` on the two other modes `j1 < j2`:
/// `(A (.)^T U) (F (x) G)_(mode) [T_j2 (.) T_j1]` with
/// `T_j = (A_j^T (.) U_j^T) Omega_j`. Equals the dense
/// `(X * Y)_(mode) (Omega_j2 (.) Omega_j1)`.
pub fn hadamard_mode_sketch(
    x: &TuckerTensor,
    y: &TuckerTensor,
    mode: usize,
    omegas: [&DenseMatrix; 2],
) -> Result<DenseMatrix> {
    check_pair(x, y)?;
    if mode >= 3 {
        return Err(Error::ModeOutOfRange { mode, order: 3 });
    }
    let others: Vec<usize> = (0..3).filter(|&j| j != mode).collect();
    let mut compressed = Vec::with_capacity(2);
    for (slot, &j) in others.iter().enumerate() {
        let omega = omegas[slot];
        if omega.rows() != x.dims()[j] {
            return Err(Error::invalid(format!(
                "hadamard_mode_sketch: factor {slot} has {} rows, mode {j} needs {}",
                omega.rows(),
                x.dims()[j]
            )));
        }
        compressed.push(transposed_kr_apply(&x.factors[j], &y.factors[j], omega)?);
    }
    if compressed[0].cols() != compressed[1].cols() {
        return Err(Error::invalid("hadamard_mode_sketch: sketch widths differ".to_string()));
    }
    // Columns of the mode unfold run lower modes fastest, so the
    // higher-mode compressed factor leads the KRP.
    let krp_cols = tensor::khatri_rao(&compressed[1], &compressed[0])?;
    let core = tensor::kron_tensor(&x.core, &y.core)?;
    let small = tensor::unfold(&core, mode)?.matmul(&krp_cols);
    Ok(tensor::row_khatri_rao(&x.factors[mode], &y.factors[mode])?.matmul(&small))
}

/// Randomized HOSVD of `X * Y` at ranks `ranks[i] + p`: per mode draws
/// KRP factors `Omega_(i,j)` of shape `n_j x (ranks[i]+p)` for the two
/// other modes `j` (six draws, mode label `j+1`, draw index `i+1`),
/// orthonormalizes the structured mode sketches, and contracts the
/// core through the row-wise Khatri-Rao factors. Ambient-sized work is
/// limited to the output factors.
pub fn hadamard_recompress(
    x: &TuckerTensor,
    y: &TuckerTensor,
    ranks: &[usize],
    p: usize,
    cfg: &SketchConfig,
    ledger: &RngLedger,
) -> Result<TuckerTensor> {
    check_pair(x, y)?;
    if ranks.len() != 3 {
        return Err(Error::invalid(format!("hadamard_recompress: need 3 ranks, got {}", ranks.len())));
    }
    let dims = x.dims().to_vec();
    let ells: Vec<usize> = ranks.iter().map(|&r| r + p).collect();
    for (i, &ell) in ells.iter().enumerate() {
        if ell == 0 || ell > dims[i] {
            return Err(Error::invalid(format!(
                "hadamard_recompress: mode {i} sketch size {ell} outside 1..={}",
                dims[i]
            )));
        }
    }
    let mut factors = Vec::with_capacity(3);
    for i in 0..3 {
        let others: Vec<usize> = (0..3).filter(|&j| j != i).collect();
        let mut omegas = Vec::with_capacity(2);
        for &j in &others {
            omegas.push(sketch::draw_mode_factor(
                dims[j],
                ells[i],
                (j + 1) as u64,
                &cfg.with_draw((i + 1) as u64),
                ledger,
            )?);
        }
        let sketch_i = hadamard_mode_sketch(x, y, i, [&omegas[0], &omegas[1]])?;
        factors.push(linalg::orth(&sketch_i)?);
    }
    // Core H = (F (x) G) x_i U_i^T (A_i (.)^T U_i'), all rank-sized.
    let core_full = tensor::kron_tensor(&x.core, &y.core)?;
    let mut mats = Vec::with_capacity(3);
    for i in 0..3 {
        let row_kr = tensor::row_khatri_rao(&x.factors[i], &y.factors[i])?;
        mats.push(factors[i].t_matmul(&row_kr));
    }
    let mat_refs: Vec<(usize, &DenseMatrix)> = mats.iter().enumerate().map(|(i, m)| (i, m)).collect();
    let core = tensor::multi_ttm(&core_full, &mat_refs)?;
    Ok(TuckerTensor { core, factors, orthonormal: vec![true; 3] })
}
