//! Small synthetic binary datasets for desk-scale experiments.

use alloc::{vec, vec::Vec};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream, Domain};

/// Noisy copies of a few random prototypes.
///
/// Prototype bits are fair coin flips from `seed`; each example picks a
/// prototype uniformly and flips every bit independently with `flip_prob`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeMixture {
    pub prototypes: Vec<Vec<bool>>,
    pub flip_prob: f64,
}

impl PrototypeMixture {
    pub fn new(dim: usize, num_prototypes: usize, flip_prob: f64, seed: u64) -> Result<Self> {
        if dim == 0 || num_prototypes == 0 {
            return Err(Error::invalid("prototypes", "need a positive dimension and count"));
        }
        if !(0.0..=0.5).contains(&flip_prob) {
            return Err(Error::invalid("flip_prob", "must lie in [0, 0.5]"));
        }
        let mut rng = stream(seed, Domain::Synthetic, 0);
        let prototypes = (0..num_prototypes)
            .map(|_| (0..dim).map(|_| rng.random::<bool>()).collect())
            .collect();
        Ok(Self {
            prototypes,
            flip_prob,
        })
    }

    pub fn dim(&self) -> usize {
        self.prototypes[0].len()
    }

    /// `count` binary examples as 0/1 grey values; `stream_index` selects an
    /// independent draw (e.g. 0 for train, 1 for test).
    pub fn sample(&self, count: usize, seed: u64, stream_index: u64) -> Vec<Vec<f64>> {
        let mut rng = stream(seed, Domain::Synthetic, stream_index + 1);
        (0..count)
            .map(|_| {
                let proto = &self.prototypes[rng.random_range(0..self.prototypes.len())];
                proto
                    .iter()
                    .map(|&b| {
                        let flip = rng.random::<f64>() < self.flip_prob;
                        if b != flip {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Exact entropy per example in nats, a lower bound on any model's expected NLL.
    pub fn entropy(&self) -> f64 {
        let d = self.dim();
        assert!(d <= 24, "entropy enumeration is limited to 24 bits");
        let k = self.prototypes.len() as f64;
        let (lp, lq) = (libm::log(self.flip_prob), libm::log1p(-self.flip_prob));
        let mut h = 0.0;
        for idx in 0..1u64 << d {
            let p: f64 = self
                .prototypes
                .iter()
                .map(|proto| {
                    let flips = proto
                        .iter()
                        .enumerate()
                        .filter(|(i, &b)| (idx >> i & 1 == 1) != b)
                        .count() as f64;
                    libm::exp(flips * lp + (d as f64 - flips) * lq)
                })
                .sum::<f64>()
                / k;
            if p > 0.0 {
                h -= p * libm::log(p);
            }
        }
        h
    }
}

/// Converts 0/1 grey rows to bits (threshold 0.5).
pub fn to_bits(rows: &[Vec<f64>]) -> Vec<Vec<bool>> {
    rows.iter().map(|r| r.iter().map(|&x| x >= 0.5).collect()).collect()
}

/// Fixed binary patterns given as strings of '0'/'1'.
pub fn patterns(rows: &[&str]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| r.chars().map(|c| if c == '1' { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// All `2 · 2^side` bars-and-stripes images of a `side × side` grid, minus
/// the two duplicated blank/full images.
pub fn bars_and_stripes(side: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for mask in 0..1u32 << side {
        let mut bars = vec![0.0; side * side];
        let mut stripes = vec![0.0; side * side];
        for r in 0..side {
            for c in 0..side {
                if mask >> c & 1 == 1 {
                    bars[r * side + c] = 1.0;
                }
                if mask >> r & 1 == 1 {
                    stripes[r * side + c] = 1.0;
                }
            }
        }
        if !out.contains(&bars) {
            out.push(bars);
        }
        if !out.contains(&stripes) {
            out.push(stripes);
        }
    }
    out
}
