//! Spin ({-1, +1}) parametrisation of an RBM.
//!
//! With `s = 2x - 1`, the RBM energy becomes, up to a state-independent
//! constant, `-(s_hᵀ W' s_v + b'ᵀ s_v + c'ᵀ s_h)` where
//!
//! ```text
//! W'   = W / 4
//! b'_i = b_i / 2 + (1/4) Σ_j W[j][i]      (visible fields, column sums)
//! c'_j = c_j / 2 + (1/4) Σ_i W[j][i]      (hidden fields, row sums)
//! ```
//!
//! [`IsingParams`] stores the hardware quantities `J` and `g` of the energy
//! `E(s) = sᵀJs + gᵀs` under `p(s) ∝ e^{-E(s)}`, so `J = -W'` on
//! visible/hidden pairs and `g = -(b', c')`. Spins `0..D` are visible,
//! `D..D+N` hidden. `J` is upper triangular, so each pair contributes once.

use alloc::{vec, vec::Vec};

use crate::error::{check_len, Error, Result};
use crate::rbm::{BinaryState, RbmParams};

/// A vector of ±1 spins.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinState(Vec<i8>);

impl SpinState {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some((index, &value)) = spins.iter().enumerate().find(|(_, &s)| s != 1 && s != -1) {
            return Err(Error::SpinOutOfAlphabet { index, value });
        }
        Ok(Self(spins))
    }

    /// `s = 2·x − 1` over the concatenation `(v, h)`.
    pub fn from_bits(state: &BinaryState) -> Self {
        Self(
            state
                .v
                .iter()
                .chain(&state.h)
                .map(|&b| if b { 1 } else { -1 })
                .collect(),
        )
    }

    /// Replaces −1 by 0 and splits at `num_visible`.
    pub fn to_bits(&self, num_visible: usize) -> Result<BinaryState> {
        if num_visible > self.0.len() {
            return Err(Error::DimensionMismatch {
                what: "visible partition",
                expected: self.0.len(),
                actual: num_visible,
            });
        }
        let bits: Vec<bool> = self.0.iter().map(|&s| s == 1).collect();
        let (v, h) = bits.split_at(num_visible);
        Ok(BinaryState::new(v.to_vec(), h.to_vec()))
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Raw spin vector to bits, rejecting anything other than ±1.
pub fn spins_to_bits(spins: &[i8], num_visible: usize) -> Result<BinaryState> {
    SpinState::new(spins.to_vec())?.to_bits(num_visible)
}

/// Couplings `J` (dense upper-triangular storage) and fields `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingParams {
    num_visible: usize,
    num_hidden: usize,
    coupling: Vec<f64>,
    field: Vec<f64>,
}

impl IsingParams {
    pub fn num_spins(&self) -> usize {
        self.num_visible + self.num_hidden
    }

    pub fn num_visible(&self) -> usize {
        self.num_visible
    }

    /// `J[a][b]` for `a < b`; the lower triangle and diagonal are zero.
    pub fn coupling(&self, a: usize, b: usize) -> f64 {
        self.coupling[a * self.num_spins() + b]
    }

    pub fn field(&self) -> &[f64] {
        &self.field
    }

    /// `W'[j][i]`, the spin-domain weight between hidden `j` and visible `i`.
    pub fn spin_weight(&self, hidden: usize, visible: usize) -> f64 {
        -self.coupling(visible, self.num_visible + hidden)
    }

    /// `b'`.
    pub fn visible_fields(&self) -> Vec<f64> {
        self.field[..self.num_visible].iter().map(|g| -g).collect()
    }

    /// `c'`.
    pub fn hidden_fields(&self) -> Vec<f64> {
        self.field[self.num_visible..].iter().map(|g| -g).collect()
    }

    /// `E(s) = Σ_{a<b} J[a][b] s_a s_b + gᵀs`.
    pub fn energy(&self, s: &SpinState) -> Result<f64> {
        let n = self.num_spins();
        check_len("spin vector", n, s.len())?;
        let s = s.as_slice();
        let mut e: f64 = self.field.iter().zip(s).map(|(g, &x)| g * f64::from(x)).sum();
        for a in 0..n {
            let row = &self.coupling[a * n..(a + 1) * n];
            let sa = f64::from(s[a]);
            for b in a + 1..n {
                if row[b] != 0.0 {
                    e += row[b] * sa * f64::from(s[b]);
                }
            }
        }
        Ok(e)
    }

    /// Whether `J` is zero on the diagonal, the lower triangle and within
    /// each layer.
    pub fn is_bipartite_upper(&self) -> bool {
        let n = self.num_spins();
        let d = self.num_visible;
        (0..n).all(|a| {
            (0..n).all(|b| {
                let crosses = a < d && b >= d;
                crosses || self.coupling[a * n + b] == 0.0
            })
        })
    }
}

/// Converts RBM parameters to spin couplings and fields.
pub fn to_ising(params: &RbmParams) -> IsingParams {
    let (d, n) = (params.num_visible(), params.num_hidden());
    let total = d + n;
    let mut coupling = vec![0.0; total * total];
    let mut field = vec![0.0; total];
    for i in 0..d {
        field[i] = -(params.visible_bias()[i] / 2.0);
    }
    for j in 0..n {
        let row = params.weight_row(j);
        field[d + j] = -(params.hidden_bias()[j] / 2.0 + row.iter().sum::<f64>() / 4.0);
        for (i, &w) in row.iter().enumerate() {
            field[i] -= w / 4.0;
            coupling[i * total + d + j] = -(w / 4.0);
        }
    }
    IsingParams {
        num_visible: d,
        num_hidden: n,
        coupling,
        field,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{self, LogSumExp};
    use crate::rng::{stream, Domain};
    use proptest::prelude::*;

    #[test]
    fn conversion_examples() {
        let zero = to_ising(&RbmParams::zeros(2, 3).unwrap());
        assert!(zero.field().iter().all(|&g| g == 0.0));
        assert!((0..5).all(|a| (0..5).all(|b| zero.coupling(a, b) == 0.0)));

        let p = RbmParams::from_parts(1, 1, vec![4.0], vec![2.0], vec![0.0]).unwrap();
        let ising = to_ising(&p);
        assert_eq!(ising.spin_weight(0, 0), 1.0);
        assert_eq!(ising.visible_fields(), vec![2.0]);
        assert_eq!(ising.hidden_fields(), vec![1.0]);
        assert_eq!(ising.coupling(0, 1), -1.0);
        assert_eq!(ising.field(), &[-2.0, -1.0]);
        assert!(ising.is_bipartite_upper());
    }

    #[test]
    fn energy_examples() {
        let zero = to_ising(&RbmParams::zeros(1, 1).unwrap());
        for s in [[1, 1], [1, -1], [-1, 1], [-1, -1]] {
            assert_eq!(zero.energy(&SpinState::new(s.to_vec()).unwrap()).unwrap(), 0.0);
        }
        // A single coupling of +1 between the two spins.
        let p = RbmParams::from_parts(1, 1, vec![-4.0], vec![0.0], vec![0.0]).unwrap();
        let mut ising = to_ising(&p);
        ising.field.iter_mut().for_each(|g| *g = 0.0);
        assert_eq!(ising.coupling(0, 1), 1.0);
        let s = SpinState::new(vec![1, 1]).unwrap();
        assert_eq!(ising.energy(&s).unwrap(), 1.0);
        assert!(ising.energy(&SpinState::new(vec![1]).unwrap()).is_err());
    }

    #[test]
    fn spin_conversion_examples() {
        let s = spins_to_bits(&[-1, -1], 1).unwrap();
        assert_eq!((s.v, s.h), (vec![false], vec![false]));
        let s = spins_to_bits(&[1, -1], 1).unwrap();
        assert_eq!((s.v, s.h), (vec![true], vec![false]));
        assert_eq!(
            spins_to_bits(&[1, 0], 1).unwrap_err(),
            Error::SpinOutOfAlphabet { index: 1, value: 0 }
        );
    }

    #[test]
    fn boltzmann_probabilities_agree_state_by_state() {
        for seed in 0..10 {
            let p = RbmParams::random(3, 3, 1.5, 1.0, &mut stream(seed, Domain::Init, 0)).unwrap();
            let ising = to_ising(&p);
            let log_z = p.exact_log_z().unwrap();
            let mut ising_z = LogSumExp::new();
            let states: Vec<_> = (0..64).map(|i| BinaryState::from_index(i, 3, 3)).collect();
            for s in &states {
                ising_z.push(-ising.energy(&SpinState::from_bits(s)).unwrap());
            }
            let mut offset = None;
            for s in &states {
                let e_ising = ising.energy(&SpinState::from_bits(s)).unwrap();
                let e_rbm = p.energy(s).unwrap();
                let p_rbm = math::exp(-e_rbm - log_z);
                let p_ising = math::exp(-e_ising - ising_z.value());
                assert!((p_rbm - p_ising).abs() < 1e-10);
                let diff = e_ising - e_rbm;
                let first = *offset.get_or_insert(diff);
                assert!((diff - first).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn bits_spins_round_trip(v in proptest::collection::vec(any::<bool>(), 1..12),
                                 h in proptest::collection::vec(any::<bool>(), 1..12)) {
            let state = BinaryState::new(v.clone(), h);
            let spins = SpinState::from_bits(&state);
            prop_assert_eq!(spins.to_bits(v.len()).unwrap(), state);
        }
    }
}
