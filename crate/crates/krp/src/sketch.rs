//! Seeded generation of Khatri-Rao and dense Gaussian test matrices, with
//! an exact ledger of how many random scalars each algorithm draws.
//!
//! Substreams are derived from `(seed, context, mode, draw)` labels, so
//! per-mode draws are order-independent and bitwise reproducible. Factor
//! matrices are filled column by column; a draw with a larger `ell` is a
//! column-prefix extension of a smaller one under the same labels.

use crate::tensor::{contract_mode, DenseMatrix, MEM_CAP_ELEMS};
use crate::{tensor, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::BTreeMap;
use std::sync::Mutex;

/// Entry distribution for sketch factors; both are mean-zero, unit
/// variance and subgaussian.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Distribution {
    Gaussian,
    Rademacher,
}

/// Labels identifying a reproducible random stream.
#[derive(Clone, Copy, Debug)]
pub struct SketchConfig {
    pub distribution: Distribution,
    pub seed: u64,
    /// Context tag separating algorithm-level streams (e.g. target mode).
    pub context: u64,
    /// Draw counter separating repeated draws within one context.
    pub draw: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn absorb(h: u64, label: u64) -> u64 {
    splitmix64(h ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

impl SketchConfig {
    pub fn new(seed: u64) -> Self {
        SketchConfig { distribution: Distribution::Gaussian, seed, context: 0, draw: 0 }
    }

    pub fn with_distribution(mut self, distribution: Distribution) -> Self {
        self.distribution = distribution;
        self
    }

    pub fn with_context(mut self, context: u64) -> Self {
        self.context = context;
        self
    }

    pub fn with_draw(mut self, draw: u64) -> Self {
        self.draw = draw;
        self
    }

    /// Counter-based substream for one mode label.
    pub(crate) fn rng(&self, mode: u64) -> ChaCha8Rng {
        let mut h = splitmix64(self.seed);
        h = absorb(h, self.context);
        h = absorb(h, mode);
        h = absorb(h, self.draw);
        let mut key = [0u8; 32];
        for w in 0..4 {
            h = splitmix64(h);
            key[w * 8..(w + 1) * 8].copy_from_slice(&h.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self.distribution {
            Distribution::Gaussian => rng.sample(StandardNormal),
            Distribution::Rademacher => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Counter of random scalars drawn, keyed by `(context, mode)` labels.
#[derive(Debug, Default)]
pub struct RngLedger {
    counts: Mutex<BTreeMap<(u64, u64), u64>>,
}

impl RngLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, context: u64, mode: u64, n: u64) {
        let mut c = self.counts.lock().unwrap();
        *c.entry((context, mode)).or_insert(0) += n;
    }

    /// Total scalars drawn since the last reset.
    pub fn total(&self) -> u64 {
        self.counts.lock().unwrap().values().sum()
    }

    /// Snapshot of per-(context, mode) counts.
    pub fn entries(&self) -> Vec<((u64, u64), u64)> {
        self.counts.lock().unwrap().iter().map(|(&k, &v)| (k, v)).collect()
    }

    /// Zero all counters (between runs).
    pub fn reset(&self) {
        self.counts.lock().unwrap().clear();
    }
}

/// A Khatri-Rao test matrix held in factored form,
/// `Omega = Omega^(1) kr ... kr Omega^(d)` with `Omega^(j)` of shape
/// `n_j x ell`; the implied row count is `prod n_j`.
#[derive(Clone, Debug)]
pub struct KrpSketch {
    factors: Vec<DenseMatrix>,
}

impl KrpSketch {
    pub fn from_factors(factors: Vec<DenseMatrix>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::invalid("KrpSketch needs at least one factor".to_string()));
        }
        let ell = factors[0].cols();
        if factors.iter().any(|f| f.cols() != ell) {
            return Err(Error::invalid("KrpSketch factors must share column count".to_string()));
        }
        Ok(KrpSketch { factors })
    }

    pub fn factors(&self) -> &[DenseMatrix] {
        &self.factors
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn ell(&self) -> usize {
        self.factors[0].cols()
    }

    pub fn implied_rows(&self) -> usize {
        self.factors.iter().map(|f| f.rows()).product()
    }
}

fn draw_factor(rows: usize, ell: usize, cfg: &SketchConfig, mode: u64) -> DenseMatrix {
    let mut rng = cfg.rng(mode);
    let mut m = DenseMatrix::zeros(rows, ell);
    for k in 0..ell {
        for v in m.col_mut(k) {
            *v = cfg.sample(&mut rng);
        }
    }
    m
}

/// Draw the `d` independent factors of a KRP sketch over `dims` with
/// `ell` columns; the ledger is charged `sum_j n_j * ell` under
/// `(cfg.context, mode j+1)`.
pub fn draw_krp(dims: &[usize], ell: usize, cfg: &SketchConfig, ledger: &RngLedger) -> Result<KrpSketch> {
    if dims.is_empty() || dims.iter().any(|&n| n == 0) || ell == 0 {
        return Err(Error::invalid("draw_krp: dims and ell must be positive".to_string()));
    }
    let mut factors = Vec::with_capacity(dims.len());
    for (j, &n) in dims.iter().enumerate() {
        factors.push(draw_factor(n, ell, cfg, j as u64 + 1));
        ledger.add(cfg.context, j as u64 + 1, (n * ell) as u64);
    }
    Ok(KrpSketch { factors })
}

/// One labeled sketch factor for callers assembling their own mode
/// sketches; ledger charged `rows * ell` under `(cfg.context, mode_label)`.
pub fn draw_mode_factor(
    rows: usize,
    ell: usize,
    mode_label: u64,
    cfg: &SketchConfig,
    ledger: &RngLedger,
) -> Result<DenseMatrix> {
    if rows == 0 || ell == 0 {
        return Err(Error::invalid("draw_mode_factor: empty shape".to_string()));
    }
    ledger.add(cfg.context, mode_label, (rows * ell) as u64);
    Ok(draw_factor(rows, ell, cfg, mode_label))
}

/// Dense i.i.d. sketch of shape `rows x ell`; ledger charged
/// `rows * ell` under mode label 0.
pub fn draw_gaussian_dense(
    rows: usize,
    ell: usize,
    cfg: &SketchConfig,
    ledger: &RngLedger,
) -> Result<DenseMatrix> {
    if rows == 0 || ell == 0 {
        return Err(Error::invalid("draw_gaussian_dense: empty shape".to_string()));
    }
    ledger.add(cfg.context, 0, (rows * ell) as u64);
    Ok(draw_factor(rows, ell, cfg, 0))
}

/// One KRP sketch intended for reuse across all mode sketches of a
/// tensor (memoization): identical labels give identical factors, and the
/// ledger is charged once.
pub fn memoized_streams(
    dims: &[usize],
    ell: usize,
    cfg: &SketchConfig,
    ledger: &RngLedger,
) -> Result<KrpSketch> {
    draw_krp(dims, ell, cfg, ledger)
}

/// Explicit `N x ell` matrix with column `k` equal to
/// `Omega^(1)(:,k) (x) ... (x) Omega^(d)(:,k)` (test oracle; capped).
pub fn materialize(sketch: &KrpSketch) -> Result<DenseMatrix> {
    let n = sketch.implied_rows();
    if n.saturating_mul(sketch.ell()) > MEM_CAP_ELEMS {
        return Err(Error::CapExceeded(format!(
            "materialize: {}x{} exceeds the element cap",
            n,
            sketch.ell()
        )));
    }
    let refs: Vec<&DenseMatrix> = sketch.factors.iter().collect();
    tensor::khatri_rao_list(&refs)
}

/// Apply `Omega^T` to a tall matrix without materializing `Omega`:
/// each column of `x` is viewed as a tensor over the reversed factor
/// dims (last factor fastest) and contracted one mode at a time.
pub fn krp_transpose_apply(sketch: &KrpSketch, x: &DenseMatrix) -> Result<DenseMatrix> {
    let n = sketch.implied_rows();
    if x.rows() != n {
        return Err(Error::invalid(format!(
            "krp_transpose_apply: expected {} rows, got {}",
            n,
            x.rows()
        )));
    }
    let ell = sketch.ell();
    let mut out = DenseMatrix::zeros(ell, x.cols());
    for c in 0..x.cols() {
        let xc = x.col(c);
        for k in 0..ell {
            let mut buf = xc.to_vec();
            for f in sketch.factors.iter().rev() {
                let rows = f.rows();
                let outer = buf.len() / rows;
                buf = contract_mode(&buf, 1, rows, outer, f.col(k));
            }
            out.set(k, c, buf[0]);
        }
    }
    Ok(out)
}
