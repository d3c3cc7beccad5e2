//! Scalar helpers shared by the samplers and the exact oracles.
//!
//! All transcendental functions go through `libm` so that results do not
//! depend on whether the platform math library is linked.

/// Logistic sigmoid, evaluated in the branch that cannot overflow.
///
/// For |x| beyond roughly 37 the result rounds to exactly 0.0 or 1.0;
/// samplers compare against a uniform draw in [0, 1) and handle both ends.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow for large `x`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// `ln Σ e^{x_i}`; returns `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let mut acc = LogSumExp::new();
    for &v in values {
        acc.push(v);
    }
    acc.value()
}

/// Streaming log-sum-exp accumulator with a running max shift.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumExp {
    pub const fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.sum += libm::exp(x - self.max);
        } else {
            self.sum = self.sum * libm::exp(self.max - x) + 1.0;
            self.max = x;
        }
    }

    pub fn value(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + libm::log(self.sum)
        }
    }
}

pub(crate) fn dot_bits(weights: &[f64], bits: &[bool]) -> f64 {
    weights
        .iter()
        .zip(bits)
        .filter(|(_, &b)| b)
        .map(|(w, _)| *w)
        .sum()
}

/// Mean and standard error of the mean; the error is 0 for fewer than two values.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let shift = values[0];
    let mean = shift + values.iter().map(|v| v - shift).sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, sqrt(var / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_symmetric_and_saturates() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(1.0) - 0.731_058_578_630_004_9).abs() < 1e-15);
        for x in [0.3, 2.0, 15.0, 36.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert!(sigmoid(-745.0) >= 0.0);
    }

    #[test]
    fn softplus_matches_naive_where_safe() {
        for x in [-20.0, -1.0, 0.0, 0.5, 10.0] {
            let naive = libm::log(1.0 + libm::exp(x));
            assert!((softplus(x) - naive).abs() < 1e-12, "x = {x}");
        }
        assert_eq!(softplus(1000.0), 1000.0);
    }

    #[test]
    fn log_sum_exp_handles_large_offsets() {
        let v = [1000.0, 1000.0];
        assert!((log_sum_exp(&v) - (1000.0 + libm::log(2.0))).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        let mixed = [-3.0, 0.5, 2.0, f64::NEG_INFINITY];
        let naive = libm::log(libm::exp(-3.0) + libm::exp(0.5) + libm::exp(2.0));
        assert!((log_sum_exp(&mixed) - naive).abs() < 1e-14);
    }

    #[test]
    fn stderr_of_constant_is_zero() {
        assert_eq!(mean_and_stderr(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        assert_eq!(mean_and_stderr(&[5.0]), (5.0, 0.0));
        let x = 4.631066069011734;
        assert_eq!(mean_and_stderr(&[x; 20]), (x, 0.0));
    }
}
