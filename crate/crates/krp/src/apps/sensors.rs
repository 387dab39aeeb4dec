//! Sensor placement for field reconstruction: Tucker-compresses the
//! spatial modes of a snapshot tensor, picks per-mode measurement
//! indices by column-pivoted QR of the factor transposes, and restores
//! full fields from values at the resulting sensor grid.

use crate::linalg;
use crate::sketch::{RngLedger, SketchConfig};
use crate::tensor::{self, DenseMatrix, DenseTensor};
use crate::tucker::{self, RankSpec};
use crate::{Error, Result};

/// Which Tucker algorithm finds the spatial mode bases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Compressor {
    Hosvd,
    Sthosvd,
    /// KRP-sketched HOSVD; `memoize` shares one factor pool across
    /// modes.
    RhosvdKrp { memoize: bool },
    RsthosvdKrp,
    RhosvdGaussian,
    RsthosvdGaussian,
}

/// Per-mode sensor indices and reconstruction factors.
#[derive(Clone, Debug)]
pub struct SensorModel {
    spatial_dims: Vec<usize>,
    /// Selected row indices per spatial mode (`ell_i` entries each).
    indices: Vec<Vec<usize>>,
    /// Reconstruction factors `A_i = Q_i (P_i^T Q_i)^-1`.
    factors: Vec<DenseMatrix>,
}

impl SensorModel {
    pub fn spatial_dims(&self) -> &[usize] {
        &self.spatial_dims
    }

    /// Sensor counts `ell_i` per spatial mode.
    pub fn sensor_counts(&self) -> Vec<usize> {
        self.indices.iter().map(Vec::len).collect()
    }

    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    pub fn factors(&self) -> &[DenseMatrix] {
        &self.factors
    }

    /// Rebuilds a model from stored parts, revalidating shapes.
    pub fn from_parts(
        spatial_dims: Vec<usize>,
        indices: Vec<Vec<usize>>,
        factors: Vec<DenseMatrix>,
    ) -> Result<Self> {
        if indices.len() != spatial_dims.len() || factors.len() != spatial_dims.len() {
            return Err(Error::invalid("SensorModel: per-mode list length mismatch".to_string()));
        }
        for (i, (set, a)) in indices.iter().zip(&factors).enumerate() {
            if set.is_empty() || set.iter().any(|&p| p >= spatial_dims[i]) {
                return Err(Error::invalid(format!("SensorModel: bad index set in mode {i}")));
            }
            let mut sorted = set.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != set.len() {
                return Err(Error::invalid(format!("SensorModel: repeated index in mode {i}")));
            }
            if a.rows() != spatial_dims[i] || a.cols() != set.len() {
                return Err(Error::invalid(format!("SensorModel: factor shape in mode {i}")));
            }
        }
        Ok(Self { spatial_dims, indices, factors })
    }
}

/// Trains a sensor model on a snapshot tensor whose last mode indexes
/// time and is never compressed. `ranks[i]` is the sensor count for
/// spatial mode `i`; each mode keeps the first `ranks[i]` pivots of a
/// column-pivoted QR of `Q_i^T` and the factor `A_i = Q_i (P_i^T Q_i)^-1`.
pub fn train_sensors(
    snapshots: &DenseTensor,
    ranks: &[usize],
    compressor: Compressor,
    cfg: &SketchConfig,
    ledger: &RngLedger,
) -> Result<SensorModel> {
    let d = snapshots.order();
    if d < 2 {
        return Err(Error::invalid("train_sensors: need at least one spatial mode".to_string()));
    }
    if ranks.len() != d - 1 {
        return Err(Error::invalid(format!(
            "train_sensors: got {} ranks for {} spatial modes",
            ranks.len(),
            d - 1
        )));
    }
    let t_len = snapshots.dims()[d - 1];
    let mut full_ranks = ranks.to_vec();
    full_ranks.push(t_len);
    let decomposition = match compressor {
        Compressor::Hosvd => tucker::hosvd(snapshots, &full_ranks)?,
        Compressor::Sthosvd => tucker::sthosvd(snapshots, &full_ranks, None)?,
        Compressor::RhosvdKrp { memoize } => {
            let spec = RankSpec::new(&full_ranks, 0)?;
            tucker::rhosvd_krp(snapshots, &spec, cfg, ledger, memoize)?
        }
        Compressor::RsthosvdKrp => {
            let spec = RankSpec::new(&full_ranks, 0)?;
            tucker::rsthosvd_krp(snapshots, &spec, cfg, ledger)?
        }
        Compressor::RhosvdGaussian => {
            let spec = RankSpec::new(&full_ranks, 0)?;
            tucker::rhosvd_gaussian(snapshots, &spec, cfg, ledger)?
        }
        Compressor::RsthosvdGaussian => {
            let spec = RankSpec::new(&full_ranks, 0)?;
            tucker::rsthosvd_gaussian(snapshots, &spec, cfg, ledger)?
        }
    };
    let mut indices = Vec::with_capacity(d - 1);
    let mut factors = Vec::with_capacity(d - 1);
    for (i, q) in decomposition.factors[..d - 1].iter().enumerate() {
        let (set, a) = mode_sensors(q).map_err(|e| match e {
            Error::Numerical(msg) => Error::numerical(format!("mode {i}: {msg}")),
            other => other,
        })?;
        indices.push(set);
        factors.push(a);
    }
    SensorModel::from_parts(snapshots.dims()[..d - 1].to_vec(), indices, factors)
}

/// Pivot selection and reconstruction factor for one orthonormal basis.
fn mode_sensors(q: &DenseMatrix) -> Result<(Vec<usize>, DenseMatrix)> {
    let ell = q.cols();
    // Pivoted QR of Q^T ranks the rows of Q; keep the first ell pivots.
    let piv = linalg::col_pivoted_qr(&q.transpose())?;
    let set: Vec<usize> = piv.piv[..ell].to_vec();
    // P^T Q gathers the selected rows.
    let mut ptq = DenseMatrix::zeros(ell, ell);
    for (i, &row) in set.iter().enumerate() {
        for j in 0..ell {
            ptq.set(i, j, q.get(row, j));
        }
    }
    // A = Q (P^T Q)^-1 via A^T = (P^T Q)^-T Q^T.
    let at = linalg::lstsq_qr(&ptq.transpose(), &q.transpose())?
        .ok_or_else(|| Error::numerical("singular P^T Q".to_string()))?;
    Ok((set, at.transpose()))
}

/// Restores a full field from its values at the sensor grid:
/// `T_hat = measured x_1 A_1 ... x_d A_d`. The measured tensor may
/// carry a trailing uncompressed mode (a batch of snapshots).
pub fn reconstruct_field(model: &SensorModel, measured: &DenseTensor) -> Result<DenseTensor> {
    let d = model.spatial_dims.len();
    if measured.order() != d && measured.order() != d + 1 {
        return Err(Error::invalid(format!(
            "reconstruct_field: expected order {d} or {}, got {}",
            d + 1,
            measured.order()
        )));
    }
    let counts = model.sensor_counts();
    if measured.dims()[..d] != counts[..] {
        return Err(Error::invalid(format!(
            "reconstruct_field: measured dims {:?} do not match sensor counts {counts:?}",
            &measured.dims()[..d]
        )));
    }
    let mats: Vec<(usize, &DenseMatrix)> =
        model.factors.iter().enumerate().map(|(i, a)| (i, a)).collect();
    tensor::multi_ttm(measured, &mats)
}

/// Extracts the field values at the sensor grid (what a deployed array
/// would measure). Accepts an optional trailing uncompressed mode.
pub fn sample_field(model: &SensorModel, field: &DenseTensor) -> Result<DenseTensor> {
    let d = model.spatial_dims.len();
    if field.order() != d && field.order() != d + 1 {
        return Err(Error::invalid(format!(
            "sample_field: expected order {d} or {}, got {}",
            d + 1,
            field.order()
        )));
    }
    if field.dims()[..d] != model.spatial_dims[..] {
        return Err(Error::invalid(format!(
            "sample_field: field dims {:?} do not match {:?}",
            &field.dims()[..d],
            model.spatial_dims
        )));
    }
    // Selection as TTM with 0/1 selector rows keeps the index maps in
    // one place.
    let mut selected = field.clone();
    for (i, set) in model.indices.iter().enumerate() {
        let mut sel = DenseMatrix::zeros(set.len(), model.spatial_dims[i]);
        for (r, &src) in set.iter().enumerate() {
            sel.set(r, src, 1.0);
        }
        selected = tensor::ttm(&selected, &sel, i)?;
    }
    Ok(selected)
}

/// Synthetic spatio-temporal snapshots: a random core of shape
/// `(ranks..., t)` expanded through random orthonormal spatial factors,
/// plus white noise of the given amplitude. Returns the tensor and the
/// spatial factors so callers can draw extra in-span snapshots.
pub fn synthetic_flow(
    spatial_dims: &[usize],
    ranks: &[usize],
    t: usize,
    noise: f64,
    seed: u64,
) -> Result<(DenseTensor, Vec<DenseMatrix>)> {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    if spatial_dims.is_empty() || spatial_dims.len() != ranks.len() || t == 0 {
        return Err(Error::invalid("synthetic_flow: bad shape parameters".to_string()));
    }
    if ranks.iter().zip(spatial_dims).any(|(&r, &n)| r == 0 || r > n) {
        return Err(Error::invalid("synthetic_flow: ranks must satisfy 1 <= r <= n".to_string()));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut factors = Vec::with_capacity(spatial_dims.len());
    for (&n, &r) in spatial_dims.iter().zip(ranks) {
        let data = (0..n * r).map(|_| rng.gen_range(-1.0..1.0)).collect();
        factors.push(linalg::orth(&DenseMatrix::from_col_major(n, r, data))?);
    }
    let mut core_dims = ranks.to_vec();
    core_dims.push(t);
    let len: usize = core_dims.iter().product();
    let core_data: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let core = DenseTensor::from_data(&core_dims, core_data);
    let mats: Vec<(usize, &DenseMatrix)> =
        factors.iter().enumerate().map(|(i, a)| (i, a)).collect();
    let mut field = tensor::multi_ttm(&core, &mats)?;
    if noise > 0.0 {
        for v in field.data_mut() {
            *v += noise * rng.gen_range(-1.0..1.0);
        }
    }
    Ok((field, factors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn in_span_snapshot(factors: &[DenseMatrix], t: usize, rng: &mut StdRng) -> DenseTensor {
        let mut dims: Vec<usize> = factors.iter().map(DenseMatrix::cols).collect();
        dims.push(t);
        let len = dims.iter().product();
        let data = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let core = DenseTensor::from_data(&dims, data);
        let mats: Vec<(usize, &DenseMatrix)> =
            factors.iter().enumerate().map(|(i, a)| (i, a)).collect();
        tensor::multi_ttm(&core, &mats).unwrap()
    }

    fn interpolation_identity(model: &SensorModel) {
        // P_i^T A_i = I: the rows of A_i at the sensor indices.
        for (set, a) in model.indices().iter().zip(model.factors()) {
            for (i, &row) in set.iter().enumerate() {
                for j in 0..a.cols() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((a.get(row, j) - want).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn exact_rank_reconstruction_all_compressors() {
        let (snapshots, factors) = synthetic_flow(&[9, 8], &[2, 2], 12, 0.0, 1).unwrap();
        let ledger = RngLedger::new();
        let cfg = SketchConfig::new(5);
        let mut rng = StdRng::seed_from_u64(2);
        for compressor in [
            Compressor::Hosvd,
            Compressor::Sthosvd,
            Compressor::RhosvdKrp { memoize: false },
            Compressor::RhosvdKrp { memoize: true },
            Compressor::RsthosvdKrp,
            Compressor::RhosvdGaussian,
            Compressor::RsthosvdGaussian,
        ] {
            let model = train_sensors(&snapshots, &[2, 2], compressor, &cfg, &ledger).unwrap();
            interpolation_identity(&model);
            let field = in_span_snapshot(&factors, 1, &mut rng);
            let rec = reconstruct_field(&model, &sample_field(&model, &field).unwrap()).unwrap();
            let rel = rec.sub(&field).fro_norm() / field.fro_norm();
            assert!(rel <= 1e-8, "{compressor:?}: rel err {rel}");
        }
    }

    #[test]
    fn full_rank_model_is_identity() {
        // ell_i = N_i: A_i P_i^T permutes back to the identity, so any
        // field reconstructs exactly.
        let (snapshots, _) = synthetic_flow(&[4, 5], &[4, 5], 25, 0.0, 3).unwrap();
        let ledger = RngLedger::new();
        let model =
            train_sensors(&snapshots, &[4, 5], Compressor::Hosvd, &SketchConfig::new(1), &ledger)
                .unwrap();
        let mut rng = StdRng::seed_from_u64(4);
        let data = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let field = DenseTensor::from_data(&[4, 5], data);
        let rec = reconstruct_field(&model, &sample_field(&model, &field).unwrap()).unwrap();
        assert!(rec.sub(&field).fro_norm() <= 1e-10 * field.fro_norm());
    }

    #[test]
    fn pivots_distinct_and_in_range() {
        let (snapshots, _) = synthetic_flow(&[10, 7, 6], &[3, 2, 2], 15, 1e-3, 7).unwrap();
        let ledger = RngLedger::new();
        let model = train_sensors(
            &snapshots,
            &[3, 2, 2],
            Compressor::Sthosvd,
            &SketchConfig::new(1),
            &ledger,
        )
        .unwrap();
        for (i, set) in model.indices().iter().enumerate() {
            let mut sorted = set.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), set.len());
            assert!(set.iter().all(|&p| p < model.spatial_dims()[i]));
        }
        interpolation_identity(&model);
    }

    #[test]
    fn zero_measurement_gives_zero_field() {
        let (snapshots, _) = synthetic_flow(&[6, 6], &[2, 3], 9, 0.0, 9).unwrap();
        let ledger = RngLedger::new();
        let model =
            train_sensors(&snapshots, &[2, 3], Compressor::Hosvd, &SketchConfig::new(1), &ledger)
                .unwrap();
        let zero = DenseTensor::zeros(&[2, 3]);
        assert_eq!(reconstruct_field(&model, &zero).unwrap().fro_norm(), 0.0);
    }

    #[test]
    fn batched_reconstruction_matches_per_snapshot() {
        let (snapshots, factors) = synthetic_flow(&[7, 6], &[2, 2], 10, 0.0, 11).unwrap();
        let ledger = RngLedger::new();
        let model =
            train_sensors(&snapshots, &[2, 2], Compressor::Hosvd, &SketchConfig::new(1), &ledger)
                .unwrap();
        let mut rng = StdRng::seed_from_u64(12);
        let batch = in_span_snapshot(&factors, 3, &mut rng);
        let rec = reconstruct_field(&model, &sample_field(&model, &batch).unwrap()).unwrap();
        assert_eq!(rec.dims(), batch.dims());
        assert!(rec.sub(&batch).fro_norm() <= 1e-8 * batch.fro_norm());
    }

    #[test]
    fn shape_errors() {
        let (snapshots, _) = synthetic_flow(&[5, 5], &[2, 2], 8, 0.0, 13).unwrap();
        let ledger = RngLedger::new();
        let cfg = SketchConfig::new(1);
        assert!(train_sensors(&snapshots, &[2], Compressor::Hosvd, &cfg, &ledger).is_err());
        assert!(train_sensors(&snapshots, &[2, 2, 2], Compressor::Hosvd, &cfg, &ledger).is_err());
        let model = train_sensors(&snapshots, &[2, 2], Compressor::Hosvd, &cfg, &ledger).unwrap();
        let bad = DenseTensor::zeros(&[3, 2]);
        assert!(reconstruct_field(&model, &bad).is_err());
        assert!(sample_field(&model, &DenseTensor::zeros(&[5, 4])).is_err());
    }
}
