//! Computable forms of the KRP sketching guarantees: the range-finder
//! and single-view error bounds, per-mode Tucker bounds, the implicit
//! sample-size inequalities behind them, and a Monte-Carlo check of
//! the subspace-embedding property.

use crate::linalg;
use crate::sketch::{self, RngLedger, SketchConfig};
use crate::{Error, Result};

/// `C_(K,d) = 2 (2e)^d (C_S K sqrt(2))^(2d)`, evaluated in log space.
pub fn c_kd(k_sub: f64, c_s: f64, d: usize) -> f64 {
    let d = d as f64;
    let ln = std::f64::consts::LN_2
        + d * (2.0 * std::f64::consts::E).ln()
        + 2.0 * d * (c_s * k_sub * std::f64::consts::SQRT_2).ln();
    ln.exp()
}

/// `ln^d(x)` with the argument floored at 1 so degenerate differences
/// (e.g. N = r) contribute zero instead of NaN.
fn ln_pow(x: f64, d: usize) -> f64 {
    x.max(1.0).ln().powi(d as i32)
}

fn ln_pos(x: f64) -> f64 {
    x.max(1.0).ln()
}

/// Product saturating at `usize::MAX`; caps only shrink bounds, so
/// saturation is the right semantics for astronomically large shapes.
fn prod_sat<'a>(dims: impl IntoIterator<Item = &'a usize>) -> usize {
    dims.into_iter().fold(1usize, |acc, &n| acc.saturating_mul(n))
}

/// Shared parameters of the bounds. `k_sub` bounds the factor
/// subgaussian norm; `c_s` is an uncalibrated absolute constant; both
/// default to 1.
#[derive(Clone, Debug)]
pub struct BoundParams {
    /// Target rank.
    pub r: usize,
    /// KRP mode sizes; the sketch acts on `N = prod(dims)` rows.
    pub dims: Vec<usize>,
    /// Row count of the target matrix.
    pub m_rows: usize,
    /// Failure probability, in (0, 1).
    pub delta: f64,
    /// Embedding distortion, in (0, 1).
    pub epsilon: f64,
    pub k_sub: f64,
    pub c_s: f64,
}

impl BoundParams {
    pub fn new(r: usize, dims: &[usize], m_rows: usize, delta: f64) -> Result<Self> {
        if r == 0 || m_rows == 0 || dims.is_empty() || dims.iter().any(|&n| n == 0) {
            return Err(Error::invalid("BoundParams: sizes must be positive".to_string()));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!("BoundParams: delta {delta} outside (0,1)")));
        }
        Ok(Self {
            r,
            dims: dims.to_vec(),
            m_rows,
            delta,
            epsilon: 0.5,
            k_sub: 1.0,
            c_s: 1.0,
        })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::invalid(format!("BoundParams: epsilon {epsilon} outside (0,1)")));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn with_constants(mut self, k_sub: f64, c_s: f64) -> Result<Self> {
        if !(k_sub >= 1.0) || !(c_s > 0.0) {
            return Err(Error::invalid("BoundParams: need K >= 1 and C_S > 0".to_string()));
        }
        self.k_sub = k_sub;
        self.c_s = c_s;
        Ok(self)
    }

    /// KRP order d.
    pub fn d(&self) -> usize {
        self.dims.len()
    }

    /// Column count `N = prod(dims)` of the target matrix, saturating
    /// at `usize::MAX`.
    pub fn n_cols(&self) -> usize {
        prod_sat(&self.dims)
    }

    fn c(&self) -> f64 {
        c_kd(self.k_sub, self.c_s, self.d())
    }
}

/// Range-finder tail factor
/// `Gamma = (1/ell)(1 + C ln^d(8 ell/delta)) ln(4(N-r)/delta)`.
pub fn gamma_rrf(p: &BoundParams, ell: usize, n: usize) -> f64 {
    (1.0 + p.c() * ln_pow(8.0 * ell as f64 / p.delta, p.d()))
        * ln_pos(4.0 * (n.saturating_sub(p.r)) as f64 / p.delta)
        / ell as f64
}

/// Range-finder bound `(1 + 2r(1 + 2 Gamma)) * tail_sq` where
/// `tail_sq = sum_(j>r) sigma_j^2`.
pub fn rrf_error_bound(p: &BoundParams, ell: usize, tail_sq: f64) -> f64 {
    let g = gamma_rrf(p, ell, p.n_cols());
    (1.0 + 2.0 * p.r as f64 * (1.0 + 2.0 * g)) * tail_sq
}

/// Single-view tail factors `(Gamma_r, Gamma_l)`.
pub fn gamma_single_view(p: &BoundParams, ell_r: usize, ell_l: usize) -> (f64, f64) {
    let d = p.d();
    let c = p.c();
    let gr = (1.0 + c * ln_pow(16.0 * ell_r as f64 / p.delta, d))
        * ln_pos(8.0 * (p.n_cols().saturating_sub(p.r)) as f64 / p.delta)
        / ell_r as f64;
    let gl = (1.0 + c * ln_pow(16.0 * ell_l as f64 / p.delta, d))
        * ln_pos(8.0 * (p.m_rows.saturating_sub(ell_r)) as f64 / p.delta)
        / ell_l as f64;
    (gr, gl)
}

/// Single-view bound
/// `(1 + 2r(1 + 2 Gamma_r))(1 + 2 ell_r (1 + Gamma_l)) * tail_sq`.
pub fn single_view_error_bound(p: &BoundParams, ell_r: usize, ell_l: usize, tail_sq: f64) -> f64 {
    let (gr, gl) = gamma_single_view(p, ell_r, ell_l);
    (1.0 + 2.0 * p.r as f64 * (1.0 + 2.0 * gr))
        * (1.0 + 2.0 * ell_r as f64 * (1.0 + gl))
        * tail_sq
}

/// Mode-i tail factor of the Tucker bounds: the sketch for mode i is a
/// (d-1)-factor KRP, and `n_comp` is the complement size the bound
/// compares against.
pub fn gamma_tucker(
    k_sub: f64,
    c_s: f64,
    order: usize,
    delta: f64,
    r_i: usize,
    ell_i: usize,
    n_comp: usize,
) -> f64 {
    let c = c_kd(k_sub, c_s, order - 1);
    (1.0 + c * ln_pow(8.0 * order as f64 * ell_i as f64 / delta, order - 1))
        * ln_pos(4.0 * order as f64 * (n_comp.saturating_sub(r_i)) as f64 / delta)
        / ell_i as f64
}

/// Which Tucker pipeline shapes the per-mode complement sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TuckerVariant {
    /// All modes sketch the full complement `prod_(k!=i) n_k`.
    Hosvd,
    /// Mode i sketches the partially truncated complement
    /// `prod_(k<i) ell_k * prod_(k>i) n_k`.
    Sthosvd,
}

/// Tucker error bound
/// `sum_i (1 + 2 r_i (1 + 2 Gamma_i)) sum_(j>r_i) sigma_j^2(X_(i))`
/// from per-mode unfolding singular values.
pub fn tucker_bound(
    p: &BoundParams,
    svals: &[Vec<f64>],
    ranks: &[usize],
    ells: &[usize],
    variant: TuckerVariant,
) -> Result<f64> {
    let d = p.dims.len();
    if svals.len() != d || ranks.len() != d || ells.len() != d {
        return Err(Error::invalid("tucker_bound: per-mode list length mismatch".to_string()));
    }
    let mut total = 0.0;
    for i in 0..d {
        if ranks[i] == 0 || ranks[i] > svals[i].len() || ells[i] == 0 {
            return Err(Error::invalid(format!("tucker_bound: bad rank or ell in mode {i}")));
        }
        let tail_sq: f64 = svals[i][ranks[i]..].iter().map(|&s| s * s).sum();
        let n_comp: usize = match variant {
            TuckerVariant::Hosvd => {
                prod_sat((0..d).filter(|&k| k != i).map(|k| &p.dims[k]))
            }
            TuckerVariant::Sthosvd => {
                prod_sat(&ells[..i]).saturating_mul(prod_sat(&p.dims[i + 1..]))
            }
        };
        let g = gamma_tucker(p.k_sub, p.c_s, d, p.delta, ranks[i], ells[i], n_comp);
        total += (1.0 + 2.0 * ranks[i] as f64 * (1.0 + 2.0 * g)) * tail_sq;
    }
    Ok(total)
}

/// Result of a sample-size solve.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SampleSize {
    /// Minimal sketch sizes satisfying the inequality within the cap;
    /// `ell_left` is set only by the single-view variant.
    Feasible { ell: usize, ell_left: Option<usize> },
    /// The smallest satisfying value exceeds the variant's cap.
    Infeasible { required: usize, cap: usize },
}

/// Which sample-size inequality to solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundVariant {
    /// `ell >= 8(r + r C ln^d(8 ell/delta)) ln(4r/delta)`, cap
    /// `min(M, N)`.
    Rrf,
    /// Explicit variant with `ln^d(8Q/delta)`, `Q` the cap.
    RrfQ,
    /// Tucker mode inequality, cap `min(n_i, prod_(k!=i) n_k)`.
    Hosvd { mode: usize },
    /// Same inequality; the cap threads previously solved modes:
    /// `min(n_i, prod_(k<i) ell_k * prod_(k>i) n_k)`.
    Sthosvd { mode: usize },
    /// `ell >= 2.6 eps^-2 (r + r C ln^d(8 ell/delta)) ln(4r/delta)`,
    /// cap `N`.
    Subspace,
    /// Explicit variant with `ln^d(8N/delta)`.
    SubspaceN,
    /// `ell >= alpha + beta sqrt(ell)`; N-independent, capped only by
    /// the solver's representable ceiling.
    AppendixA,
    /// Pair `(ell_r, ell_l)` for the single-view bound, cap
    /// `min(M, N)` on both.
    SingleView,
}

fn tucker_mode_rhs(p: &BoundParams, mode: usize) -> Result<impl Fn(f64) -> f64 + '_> {
    let d = p.dims.len();
    if mode >= d {
        return Err(Error::ModeOutOfRange { mode, order: d });
    }
    let c = c_kd(p.k_sub, p.c_s, d - 1);
    let r = p.r as f64;
    let (delta, df) = (p.delta, d as f64);
    Ok(move |ell: f64| {
        8.0 * (r + r * c * ln_pow(8.0 * df * ell / delta, d - 1)) * ln_pos(4.0 * r * df / delta)
    })
}

fn appendix_a_coeffs(p: &BoundParams) -> (f64, f64) {
    let c = p.c();
    let r = p.r as f64;
    let d = p.d();
    let inv_eps_sq = p.epsilon.powi(-2);
    let alpha = 8.0
        * inv_eps_sq
        * (r + 2f64.powi(d as i32) * r * c * ln_pow(8.0 / p.delta, d))
        * ln_pos(4.0 * r / p.delta);
    let beta =
        8.0 * inv_eps_sq * r * (2.0 * d as f64).powi(d as i32) * c * ln_pos(4.0 * r / p.delta);
    (alpha, beta)
}

/// Largest sketch size the solver reports as feasible; answers beyond
/// it are outside exact f64/usize range and returned as infeasible.
const ELL_CEILING: usize = 1 << 62;

/// Finds the boundary `ell` with `ell >= rhs(ell)` and
/// `ell - 1 < rhs(ell - 1)` by fixed-point iteration plus a local
/// scan, then applies the cap.
fn solve_scalar<F: Fn(f64) -> f64>(rhs: F, start: usize, cap: usize) -> SampleSize {
    let at = |ell: usize| rhs(ell as f64);
    let escaped = |v: f64| !v.is_finite() || v >= ELL_CEILING as f64;
    let mut ell = at(start.max(1)).ceil().max(1.0) as usize;
    let mut prev = 0usize;
    for _ in 0..1_000_000 {
        let next_f = at(ell).ceil().max(1.0);
        if escaped(next_f) {
            return SampleSize::Infeasible { required: usize::MAX, cap };
        }
        let next = next_f as usize;
        if next == ell {
            break;
        }
        if next == prev {
            // Period-2 cycle of the integer map: take the upper point.
            ell = ell.max(next);
            break;
        }
        prev = ell;
        ell = next;
    }
    let mut guard = 0u32;
    while (ell as f64) < at(ell) {
        ell += 1;
        guard += 1;
        if guard > 1_000_000 || ell >= ELL_CEILING {
            return SampleSize::Infeasible { required: usize::MAX, cap };
        }
    }
    while ell > 1 && (ell - 1) as f64 >= at(ell - 1) {
        ell -= 1;
    }
    if ell > cap {
        SampleSize::Infeasible { required: ell, cap }
    } else {
        SampleSize::Feasible { ell, ell_left: None }
    }
}

/// Smallest integer sketch size satisfying the selected inequality, or
/// the infeasibility certificate when it exceeds the variant's cap.
pub fn solve_sample_size(p: &BoundParams, variant: BoundVariant) -> Result<SampleSize> {
    let n = p.n_cols();
    let q = p.m_rows.min(n);
    let (c, r, d) = (p.c(), p.r as f64, p.d());
    let delta = p.delta;
    match variant {
        BoundVariant::Rrf => {
            let rhs = move |ell: f64| {
                8.0 * (r + r * c * ln_pow(8.0 * ell / delta, d)) * ln_pos(4.0 * r / delta)
            };
            Ok(solve_scalar(rhs, p.r, q))
        }
        BoundVariant::RrfQ => {
            let fixed = 8.0 * (r + r * c * ln_pow(8.0 * q as f64 / delta, d))
                * ln_pos(4.0 * r / delta);
            Ok(solve_scalar(move |_| fixed, p.r, q))
        }
        BoundVariant::Hosvd { mode } => {
            let rhs = tucker_mode_rhs(p, mode)?;
            let n_i = p.dims[mode];
            let comp = prod_sat((0..p.dims.len()).filter(|&k| k != mode).map(|k| &p.dims[k]));
            Ok(solve_scalar(rhs, p.r, n_i.min(comp)))
        }
        BoundVariant::Sthosvd { mode } => {
            if mode >= p.dims.len() {
                return Err(Error::ModeOutOfRange { mode, order: p.dims.len() });
            }
            // Earlier modes feed the cap, so solve them in order.
            let mut ells = Vec::with_capacity(mode + 1);
            for i in 0..=mode {
                let rhs = tucker_mode_rhs(p, i)?;
                let comp = prod_sat(&ells).saturating_mul(prod_sat(&p.dims[i + 1..]));
                match solve_scalar(rhs, p.r, p.dims[i].min(comp)) {
                    SampleSize::Feasible { ell, .. } => ells.push(ell),
                    infeasible => return Ok(infeasible),
                }
            }
            Ok(SampleSize::Feasible { ell: ells[mode], ell_left: None })
        }
        BoundVariant::Subspace => {
            let scale = 2.6 * p.epsilon.powi(-2);
            let rhs = move |ell: f64| {
                scale * (r + r * c * ln_pow(8.0 * ell / delta, d)) * ln_pos(4.0 * r / delta)
            };
            Ok(solve_scalar(rhs, p.r, n))
        }
        BoundVariant::SubspaceN => {
            let fixed = 2.6
                * p.epsilon.powi(-2)
                * (r + r * c * ln_pow(8.0 * n as f64 / delta, d))
                * ln_pos(4.0 * r / delta);
            Ok(solve_scalar(move |_| fixed, p.r, n))
        }
        BoundVariant::AppendixA => {
            let (alpha, beta) = appendix_a_coeffs(p);
            Ok(solve_scalar(move |ell: f64| alpha + beta * ell.sqrt(), p.r, ELL_CEILING - 1))
        }
        BoundVariant::SingleView => {
            let rhs_r = move |ell: f64| {
                r * (1.0 + c * ln_pow(16.0 * ell / delta, d)) * ln_pos(8.0 * r / delta)
            };
            let ell_r = match solve_scalar(rhs_r, p.r, q) {
                SampleSize::Feasible { ell, .. } => ell,
                infeasible => return Ok(infeasible),
            };
            let lr = ell_r as f64;
            let rhs_l = move |ell: f64| {
                lr * (1.0 + c * ln_pow(16.0 * ell / delta, d)) * ln_pos(8.0 * lr / delta)
            };
            match solve_scalar(rhs_l, ell_r, q) {
                SampleSize::Feasible { ell, .. } => {
                    Ok(SampleSize::Feasible { ell: ell_r, ell_left: Some(ell) })
                }
                infeasible => Ok(infeasible),
            }
        }
    }
}

/// Whether `ell` (and `ell_left` for the single-view pair) satisfies
/// the variant's inequality as written; caps are not consulted.
pub fn inequality_holds(
    p: &BoundParams,
    variant: BoundVariant,
    ell: usize,
    ell_left: Option<usize>,
) -> Result<bool> {
    if ell == 0 {
        return Ok(false);
    }
    let n = p.n_cols();
    let q = p.m_rows.min(n);
    let (c, r, d) = (p.c(), p.r as f64, p.d());
    let delta = p.delta;
    let le = ell as f64;
    let value = match variant {
        BoundVariant::Rrf => {
            le >= 8.0 * (r + r * c * ln_pow(8.0 * le / delta, d)) * ln_pos(4.0 * r / delta)
        }
        BoundVariant::RrfQ => {
            le >= 8.0 * (r + r * c * ln_pow(8.0 * q as f64 / delta, d))
                * ln_pos(4.0 * r / delta)
        }
        BoundVariant::Hosvd { mode } | BoundVariant::Sthosvd { mode } => {
            let rhs = tucker_mode_rhs(p, mode)?;
            le >= rhs(le)
        }
        BoundVariant::Subspace => {
            le >= 2.6
                * p.epsilon.powi(-2)
                * (r + r * c * ln_pow(8.0 * le / delta, d))
                * ln_pos(4.0 * r / delta)
        }
        BoundVariant::SubspaceN => {
            le >= 2.6
                * p.epsilon.powi(-2)
                * (r + r * c * ln_pow(8.0 * n as f64 / delta, d))
                * ln_pos(4.0 * r / delta)
        }
        BoundVariant::AppendixA => {
            let (alpha, beta) = appendix_a_coeffs(p);
            le >= alpha + beta * le.sqrt()
        }
        BoundVariant::SingleView => {
            let ll = ell_left
                .ok_or_else(|| Error::invalid("inequality_holds: single-view needs ell_left".to_string()))?
                as f64;
            let right =
                le >= r * (1.0 + c * ln_pow(16.0 * le / delta, d)) * ln_pos(8.0 * r / delta);
            let left =
                ll >= le * (1.0 + c * ln_pow(16.0 * ll / delta, d)) * ln_pos(8.0 * le / delta);
            right && left
        }
    };
    Ok(value)
}

/// Monte-Carlo subspace-embedding check: draws one random orthonormal
/// basis `W` (QR of a Gaussian), then per trial a fresh KRP sketch, and
/// returns the fraction of trials where every squared singular value
/// of `Omega^T W` lies in `[(1-eps) ell, (1+eps) ell]`.
pub fn embedding_check(
    r: usize,
    dims: &[usize],
    ell: usize,
    epsilon: f64,
    trials: usize,
    cfg: &SketchConfig,
    ledger: &RngLedger,
) -> Result<f64> {
    let n: usize = dims.iter().product();
    if r == 0 || r > n {
        return Err(Error::invalid(format!("embedding_check: rank {r} outside 1..={n}")));
    }
    if ell == 0 || trials == 0 || !(0.0..1.0).contains(&epsilon) {
        return Err(Error::invalid("embedding_check: bad ell, trials, or epsilon".to_string()));
    }
    let w = linalg::orth(&sketch::draw_gaussian_dense(n, r, cfg, ledger)?)?;
    let (lo, hi) = ((1.0 - epsilon) * ell as f64, (1.0 + epsilon) * ell as f64);
    let mut hits = 0usize;
    for trial in 0..trials {
        let omega = sketch::draw_krp(dims, ell, &cfg.with_draw(trial as u64 + 1), ledger)?;
        let b = sketch::krp_transpose_apply(&omega, &w)?;
        let (vals, _) = linalg::sym_eig(&b.t_matmul(&b))?;
        if vals.len() >= r && vals.iter().all(|&v| v >= lo && v <= hi) {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}
