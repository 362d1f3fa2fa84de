//! Idealized codelengths in bits.
//!
//! Every logarithm is base 2 unless the name says otherwise. Fractional bits
//! are kept; nothing here builds an actual code.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `l / (2 ln 2)`, the Gaussian likelihood term `(l/2) log2 e`.
pub fn gaussian_tail_bits(l: usize) -> f64 {
    l as f64 / (2.0 * std::f64::consts::LN_2)
}

/// Rissanen's iterated logarithm `log2 n + log2 log2 n + ...`, summing
/// positive terms only. `log_star(1) == 0`.
pub fn log_star(n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("log* is defined for n >= 1".into()));
    }
    let mut sum = 0.0;
    let mut arg = n as f64;
    loop {
        let term = arg.log2();
        if term <= 0.0 {
            break;
        }
        sum += term;
        arg = term;
    }
    Ok(sum)
}

/// Binary entropy in bits with `H(0) = H(1) = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "probability {p} outside [0, 1]"
        )));
    }
    Ok(entropy_unchecked(p))
}

pub(crate) fn entropy_unchecked(p: f64) -> f64 {
    let term = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Upper bound on `log2 C(l, k)`: `l H(k/l) + (1/2) log2 l + log2(pi/8)`.
pub fn index_cost_bound(l: usize, k: usize) -> Result<f64> {
    if k == 0 || k >= l {
        return Err(Error::InvalidArgument(format!(
            "index cost needs 1 <= k < l, got k = {k}, l = {l}"
        )));
    }
    Ok(index_bound_unchecked(l, k))
}

pub(crate) fn index_bound_unchecked(l: usize, k: usize) -> f64 {
    let lf = l as f64;
    lf * entropy_unchecked(k as f64 / lf) + 0.5 * lf.log2() + (std::f64::consts::PI / 8.0).log2()
}

/// Parameter cost independent of the estimates: `5/2 p + (p/2) log2 l`.
pub fn parameter_cost(num_params: usize, l: usize) -> f64 {
    let p = num_params as f64;
    2.5 * p + 0.5 * p * (l as f64).log2()
}

/// Estimate-dependent parameter cost `sum_j log*(floor|theta_j|) + (k/2) log2 l`.
///
/// Magnitudes below one are clamped to one, where `log*` is zero.
pub fn parameter_cost_rissanen(estimates: &[f64], l: usize) -> f64 {
    let integer_part: f64 = estimates
        .iter()
        .map(|theta| {
            let magnitude = theta.abs().floor();
            let n = if magnitude.is_finite() && magnitude >= 1.0 {
                magnitude.min(u64::MAX as f64) as u64
            } else {
                1
            };
            log_star(n).expect("n >= 1")
        })
        .sum();
    integer_part + 0.5 * estimates.len() as f64 * (l as f64).log2()
}

/// Smallest residual energy used inside a logarithm for a window of length
/// `l` whose total energy is `signal_energy`.
pub fn residual_floor(l: usize, signal_energy: f64) -> f64 {
    l as f64 * f64::EPSILON * signal_energy.max(1.0)
}

/// Gaussian codelength of the residual given the ML noise variance:
/// `(l/2) log2((2 pi / l) E) + l / (2 ln 2)`.
///
/// Energies below [`residual_floor`]`(l, 0)` are floored.
pub fn residual_cost(residual_energy: f64, l: usize) -> Result<f64> {
    if residual_energy.is_nan() || residual_energy < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "residual energy must be >= 0, got {residual_energy}"
        )));
    }
    let lf = l as f64;
    let energy = residual_energy.max(residual_floor(l, 0.0));
    Ok(0.5 * lf * (2.0 * std::f64::consts::PI / lf * energy).log2() + gaussian_tail_bits(l))
}

/// Bit accounting of one encoding. `total` is always the sum of the parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodelengthBreakdown {
    /// Cost of the sparsity level itself.
    pub k_cost: f64,
    /// Cost of the retained coefficient values.
    pub param_cost: f64,
    /// Cost of identifying which coefficients are retained.
    pub index_cost: f64,
    /// `(l/2) log2` of the residual energy.
    pub residual_cost: f64,
    /// Terms that do not depend on the model choice.
    pub constants: f64,
    pub total: f64,
}

impl CodelengthBreakdown {
    pub fn new(
        k_cost: f64,
        param_cost: f64,
        index_cost: f64,
        residual_cost: f64,
        constants: f64,
    ) -> Self {
        Self {
            k_cost,
            param_cost,
            index_cost,
            residual_cost,
            constants,
            total: k_cost + param_cost + index_cost + residual_cost + constants,
        }
    }

    /// Sum of the components, recomputed.
    pub fn component_sum(&self) -> f64 {
        self.k_cost + self.param_cost + self.index_cost + self.residual_cost + self.constants
    }

    /// Adds `bits` to the constant block.
    pub fn with_extra_constant(self, bits: f64) -> Self {
        Self::new(
            self.k_cost,
            self.param_cost,
            self.index_cost,
            self.residual_cost,
            self.constants + bits,
        )
    }
}
