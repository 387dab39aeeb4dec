//! Applications of KRP-sketched compression: synthetic test tensors,
//! eigensystem realization from block-Hankel data, sensor-placement
//! training and reconstruction, and Hadamard-product recompression.

use crate::tensor::DenseTensor;
use crate::{Error, Result};

pub mod era;
pub mod hadamard;
pub mod sensors;

/// Order-`d` Cauchy-like tensor with entries
/// `x(i_1,..,i_d) = (i_1^alpha + ... + i_d^alpha)^(-1/alpha)` (1-based
/// indices); smooth spectral decay in every mode.
pub fn cauchy_tensor(dims: &[usize], alpha: f64) -> Result<DenseTensor> {
    if dims.is_empty() || dims.iter().any(|&n| n == 0) {
        return Err(Error::invalid("cauchy_tensor: dims must be positive".to_string()));
    }
    if !(alpha > 0.0) {
        return Err(Error::invalid("cauchy_tensor: alpha must be positive".to_string()));
    }
    let mut x = DenseTensor::zeros(dims);
    let mut idx = vec![1usize; dims.len()];
    for t in 0..x.len() {
        let s: f64 = idx.iter().map(|&i| (i as f64).powf(alpha)).sum();
        x.data_mut()[t] = s.powf(-1.0 / alpha);
        for (i, &n) in idx.iter_mut().zip(dims) {
            *i += 1;
            if *i <= n {
                break;
            }
            *i = 1;
        }
    }
    Ok(x)
}
