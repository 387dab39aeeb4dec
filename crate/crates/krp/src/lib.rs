//! Khatri-Rao random projections for randomized low-rank compression.
//!
//! A Khatri-Rao product (KRP) test matrix `Omega = Omega^(1) kr ... kr
//! Omega^(d)` has columns `omega_k = Omega^(1)(:,k) (x) ... (x)
//! Omega^(d)(:,k)`, so sketches of Kronecker-structured matrices and of
//! tensor unfoldings can be applied without ever materializing `Omega`.
//! The crate provides:
//!
//! - dense tensor/matrix kernels: unfoldings, TTM, MTTKRP, Kronecker,
//!   Khatri-Rao and Hadamard products ([`tensor`]), plus thin QR, SVD and
//!   pseudo-inverse routines ([`linalg`])
//! - seeded KRP and dense Gaussian sketch generation with an exact ledger
//!   of random scalars drawn ([`sketch`])
//! - randomized range finder, randomized SVD, single-view (one-pass)
//!   approximation and Nystrom PSD approximation ([`lowrank`])
//! - block-structured matrices `M = sum_j E_j (x) M_j` and their sketched
//!   single-view compression, including the multilevel extension ([`block`])
//! - Tucker compression: HOSVD, STHOSVD and randomized KRP/Gaussian
//!   variants with optional sketch memoization ([`tucker`])
//! - applications: ERA system identification from block-Hankel sketches,
//!   sensor placement with interpolatory reconstruction, Hadamard-product
//!   recompression of Tucker tensors, Cauchy test tensors ([`apps`])
//! - computable sample-size and error bounds with Monte-Carlo
//!   verification of the subspace-embedding property ([`bounds`])

pub mod apps;
pub mod block;
pub mod bounds;
pub mod flops;
pub mod linalg;
pub mod lowrank;
pub mod sketch;
pub mod tensor;
pub mod tucker;

mod error;
pub use error::{Error, Result};
