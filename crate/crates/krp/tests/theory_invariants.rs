//! Probabilistic sanity checks of the error bounds: over many seeds the
//! empirical 0.95-quantile of each compression error must stay below the
//! corresponding computable bound. The bounds carry large uncalibrated
//! constants, so dominance is expected to hold with a wide margin; the
//! assertions check dominance only.

use krp::apps::cauchy_tensor;
use krp::block::{
    block_single_view_qw, materialize_block, BlockSketchKind, BlockStructuredMatrix, BlockTerm,
    SparsePattern,
};
use krp::bounds::{self, BoundParams, TuckerVariant};
use krp::linalg;
use krp::lowrank::{sketched_range_finder, SketchKind};
use krp::sketch::{RngLedger, SketchConfig};
use krp::tensor::DenseMatrix;
use krp::tucker::{self, RankSpec};
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut StdRng) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    DenseMatrix::from_col_major(rows, cols, data)
}

/// `M = U diag(sigma) V^T` with seeded orthogonal factors.
fn matrix_with_spectrum(n: usize, svals: &[f64], rng: &mut StdRng) -> DenseMatrix {
    let u = linalg::orth(&gaussian_matrix(n, n, rng)).unwrap();
    let v = linalg::orth(&gaussian_matrix(n, n, rng)).unwrap();
    let mut us = u;
    for (j, &s) in svals.iter().enumerate() {
        for i in 0..n {
            us.set(i, j, us.get(i, j) * s);
        }
    }
    us.matmul_t(&v)
}

fn quantile_095(mut errs: Vec<f64>) -> f64 {
    errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    errs[(errs.len() * 95).div_ceil(100) - 1]
}

#[test]
fn range_finder_quantile_below_bound() {
    // 64x64 with geometric spectrum, d=2 KRP over (8, 8), r=4, ell=16.
    let n = 64;
    let (r, ell) = (4usize, 16usize);
    let svals: Vec<f64> = (0..n).map(|j| 0.5f64.powi(j as i32)).collect();
    let m = matrix_with_spectrum(n, &svals, &mut StdRng::seed_from_u64(314));
    let tail_sq: f64 = svals[r..].iter().map(|s| s * s).sum();

    let ledger = RngLedger::new();
    let kind = SketchKind::Krp(vec![8, 8]);
    let errs: Vec<f64> = (0..200)
        .map(|t| {
            let cfg = SketchConfig::new(5000 + t);
            let q = sketched_range_finder(&m, r, ell - r, &kind, &cfg, &ledger).unwrap();
            let resid = m.sub(&q.matmul(&q.t_matmul(&m))).fro_norm();
            resid * resid
        })
        .collect();

    let p = BoundParams::new(r, &[8, 8], n, 0.05).unwrap();
    let bound = bounds::rrf_error_bound(&p, ell, tail_sq);
    let q95 = quantile_095(errs);
    assert!(q95 <= bound, "quantile {q95} exceeds bound {bound}");
}

#[test]
fn block_single_view_quantile_below_bound() {
    // Fixed block instance: 3 terms, 12x12 patterns, 6x5 blocks.
    let mut rng = StdRng::seed_from_u64(2718);
    let (p_rows, q_cols) = (12usize, 12usize);
    let terms: Vec<BlockTerm> = (0..3)
        .map(|j| {
            let entries: Vec<(usize, usize)> =
                (0..p_rows).map(|i| (i, (i * (j + 2) + j) % q_cols)).collect();
            BlockTerm {
                pattern: SparsePattern::new(p_rows, q_cols, entries).unwrap(),
                block: gaussian_matrix(6, 5, &mut rng).scale(0.6f64.powi(j as i32)),
            }
        })
        .collect();
    let m = BlockStructuredMatrix::new(p_rows, q_cols, 6, 5, terms).unwrap();
    let dense = materialize_block(&m).unwrap();

    let (r, ell_r, ell_l) = (6usize, 12usize, 18usize);
    let svals = linalg::thin_svd(&dense).unwrap().s;
    let tail_sq: f64 = svals[r..].iter().map(|s| s * s).sum();

    let ledger = RngLedger::new();
    let errs: Vec<f64> = (0..200)
        .map(|t| {
            let cfg = SketchConfig::new(9000 + t);
            let sv =
                block_single_view_qw(&m, ell_r, ell_l, BlockSketchKind::Krp, &cfg, &ledger)
                    .unwrap();
            let resid = dense.sub(&sv.reconstruct()).fro_norm();
            resid * resid
        })
        .collect();

    let p = BoundParams::new(r, &[q_cols, 5], m.rows(), 0.05).unwrap();
    let bound = bounds::single_view_error_bound(&p, ell_r, ell_l, tail_sq);
    let q95 = quantile_095(errs);
    assert!(q95 <= bound, "quantile {q95} exceeds bound {bound}");
}

#[test]
fn tucker_quantiles_below_bounds() {
    // 20^4 Cauchy tensor, ranks 5 per mode, ell = 8.
    let dims = [20usize; 4];
    let x = cauchy_tensor(&dims, 1.0).unwrap();
    let norm = x.fro_norm();
    let ranks = [5usize; 4];
    let ells = [8usize; 4];
    let spec = RankSpec::new(&ranks, 3).unwrap();

    let svals: Vec<Vec<f64>> =
        (0..4).map(|i| tucker::mode_singular_values(&x, i).unwrap()).collect();
    let p = BoundParams::new(5, &dims, 20, 0.05).unwrap();

    let ledger = RngLedger::new();
    for (variant, runs) in [(TuckerVariant::Hosvd, 0), (TuckerVariant::Sthosvd, 1)] {
        let errs: Vec<f64> = (0..200)
            .map(|t| {
                let cfg = SketchConfig::new(11_000 + runs * 1000 + t);
                let tuck = match variant {
                    TuckerVariant::Hosvd => {
                        tucker::rhosvd_krp(&x, &spec, &cfg, &ledger, false).unwrap()
                    }
                    TuckerVariant::Sthosvd => {
                        tucker::rsthosvd_krp(&x, &spec, &cfg, &ledger).unwrap()
                    }
                };
                let rel = tucker::tucker_error(&x, &tuck).unwrap();
                (rel * norm).powi(2)
            })
            .collect();
        let bound = bounds::tucker_bound(&p, &svals, &ranks, &ells, variant).unwrap();
        let q95 = quantile_095(errs);
        assert!(q95 <= bound, "{variant:?}: quantile {q95} exceeds bound {bound}");
    }
}
