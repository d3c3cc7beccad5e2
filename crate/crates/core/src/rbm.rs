//! Exact RBM mathematics.
//!
//! The joint distribution is `p(v, h) = e^{-E(v, h)} / Z` with
//! `E(v, h) = -bᵀv - cᵀh - hᵀWv`, where `W` is stored hidden-major
//! (`N × D`, row `j` holds the weights of hidden unit `j`). Partition
//! functions, marginals and model expectations are computed by enumerating the
//! smaller layer and summing the other one out analytically, which keeps the
//! oracles usable up to [`ENUMERATION_LIMIT`] units on the small side.

use alloc::{vec, vec::Vec};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_len, Error, Result};
use crate::math::{self, sigmoid, softplus, LogSumExp};
use crate::stats::Stats;

/// Largest layer that exact enumeration will walk (2^24 states).
pub const ENUMERATION_LIMIT: usize = 24;

/// Joint binary configuration of both layers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryState {
    pub v: Vec<bool>,
    pub h: Vec<bool>,
}

impl BinaryState {
    pub fn new(v: Vec<bool>, h: Vec<bool>) -> Self {
        Self { v, h }
    }

    pub fn zeros(num_visible: usize, num_hidden: usize) -> Self {
        Self {
            v: vec![false; num_visible],
            h: vec![false; num_hidden],
        }
    }

    /// Decodes state number `index`: visible bits are the low `D` bits
    /// (bit `i` = unit `i`), hidden bits follow.
    pub fn from_index(index: u64, num_visible: usize, num_hidden: usize) -> Self {
        let v = (0..num_visible).map(|i| index >> i & 1 == 1).collect();
        let h = (0..num_hidden)
            .map(|j| index >> (num_visible + j) & 1 == 1)
            .collect();
        Self { v, h }
    }
}

/// Weights `W` (`N × D`), visible biases `b` (`D`) and hidden biases `c` (`N`).
#[derive(Debug, Clone, PartialEq)]
pub struct RbmParams {
    num_visible: usize,
    num_hidden: usize,
    weights: Vec<f64>,
    visible_bias: Vec<f64>,
    hidden_bias: Vec<f64>,
}

/// Which layer an enumeration walks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Layer {
    Visible,
    Hidden,
}

impl RbmParams {
    pub fn zeros(num_visible: usize, num_hidden: usize) -> Result<Self> {
        if num_visible == 0 || num_hidden == 0 {
            return Err(Error::invalid("layer size", "both layers need at least one unit"));
        }
        Ok(Self {
            num_visible,
            num_hidden,
            weights: vec![0.0; num_visible * num_hidden],
            visible_bias: vec![0.0; num_visible],
            hidden_bias: vec![0.0; num_hidden],
        })
    }

    /// Builds a model from raw parts; `weights` is `N × D` row-major.
    pub fn from_parts(
        num_visible: usize,
        num_hidden: usize,
        weights: Vec<f64>,
        visible_bias: Vec<f64>,
        hidden_bias: Vec<f64>,
    ) -> Result<Self> {
        let mut p = Self::zeros(num_visible, num_hidden)?;
        check_len("weights", num_visible * num_hidden, weights.len())?;
        check_len("visible biases", num_visible, visible_bias.len())?;
        check_len("hidden biases", num_hidden, hidden_bias.len())?;
        p.weights = weights;
        p.visible_bias = visible_bias;
        p.hidden_bias = hidden_bias;
        p.check_finite("parameters")?;
        Ok(p)
    }

    /// Gaussian initialisation: `W ~ N(0, weight_std²)`, `b, c ~ N(0, bias_std²)`.
    pub fn random<R: Rng + ?Sized>(
        num_visible: usize,
        num_hidden: usize,
        weight_std: f64,
        bias_std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut p = Self::zeros(num_visible, num_hidden)?;
        let draw = |std: f64, out: &mut [f64], rng: &mut R| -> Result<()> {
            if std == 0.0 {
                return Ok(());
            }
            let normal = Normal::new(0.0, std)
                .map_err(|_| Error::invalid("std", "must be finite and non-negative"))?;
            out.iter_mut().for_each(|x| *x = normal.sample(rng));
            Ok(())
        };
        draw(weight_std, &mut p.weights, rng)?;
        draw(bias_std, &mut p.visible_bias, rng)?;
        draw(bias_std, &mut p.hidden_bias, rng)?;
        Ok(p)
    }

    #[inline]
    pub fn num_visible(&self) -> usize {
        self.num_visible
    }

    #[inline]
    pub fn num_hidden(&self) -> usize {
        self.num_hidden
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn visible_bias(&self) -> &[f64] {
        &self.visible_bias
    }

    #[inline]
    pub fn hidden_bias(&self) -> &[f64] {
        &self.hidden_bias
    }

    /// `W[j][i]`: coupling between hidden `j` and visible `i`.
    #[inline]
    pub fn weight(&self, hidden: usize, visible: usize) -> f64 {
        self.weights[hidden * self.num_visible + visible]
    }

    #[inline]
    pub fn weight_row(&self, hidden: usize) -> &[f64] {
        let d = self.num_visible;
        &self.weights[hidden * d..(hidden + 1) * d]
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub(crate) fn visible_bias_mut(&mut self) -> &mut [f64] {
        &mut self.visible_bias
    }

    pub(crate) fn hidden_bias_mut(&mut self) -> &mut [f64] {
        &mut self.hidden_bias
    }

    /// Iterates over every parameter: weights, then `b`, then `c`.
    pub fn iter_all(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .chain(&self.visible_bias)
            .chain(&self.hidden_bias)
            .copied()
    }

    pub(crate) fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        self.weights.iter_mut().for_each(&mut f);
        self.visible_bias.iter_mut().for_each(&mut f);
        self.hidden_bias.iter_mut().for_each(&mut f);
    }

    pub(crate) fn check_finite(&self, what: &str) -> Result<()> {
        if self.iter_all().all(f64::is_finite) {
            Ok(())
        } else {
            Err(Error::non_finite(what))
        }
    }

    /// Same model with every parameter multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut p = self.clone();
        p.for_each_mut(|x| *x *= factor);
        p
    }

    /// Frobenius norm of `W`.
    pub fn weight_norm(&self) -> f64 {
        math::sqrt(self.weights.iter().map(|w| w * w).sum())
    }

    pub fn bias_norms(&self) -> (f64, f64) {
        let norm = |x: &[f64]| math::sqrt(x.iter().map(|b| b * b).sum());
        (norm(&self.visible_bias), norm(&self.hidden_bias))
    }

    fn check_visible(&self, v: &[bool]) -> Result<()> {
        check_len("visible vector", self.num_visible, v.len())
    }

    fn check_hidden(&self, h: &[bool]) -> Result<()> {
        check_len("hidden vector", self.num_hidden, h.len())
    }

    /// `E(v, h) = -bᵀv - cᵀh - hᵀWv`.
    pub fn energy(&self, state: &BinaryState) -> Result<f64> {
        self.check_visible(&state.v)?;
        self.check_hidden(&state.h)?;
        let mut e = -math::dot_bits(&self.visible_bias, &state.v)
            - math::dot_bits(&self.hidden_bias, &state.h);
        for (j, _) in state.h.iter().enumerate().filter(|(_, &on)| on) {
            e -= math::dot_bits(self.weight_row(j), &state.v);
        }
        Ok(e)
    }

    /// `c + W·v`.
    pub(crate) fn hidden_input_into(&self, v: &[bool], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.hidden_bias[j] + math::dot_bits(self.weight_row(j), v);
        }
    }

    /// `b + Wᵀ·h`.
    pub(crate) fn visible_input_into(&self, h: &[bool], out: &mut [f64]) {
        out.copy_from_slice(&self.visible_bias);
        for (j, _) in h.iter().enumerate().filter(|(_, &on)| on) {
            for (o, w) in out.iter_mut().zip(self.weight_row(j)) {
                *o += w;
            }
        }
    }

    /// `p(h_j = 1 | v) = sigmoid(c + W·v)`.
    pub fn hidden_probs(&self, v: &[bool]) -> Result<Vec<f64>> {
        self.check_visible(v)?;
        let mut out = vec![0.0; self.num_hidden];
        self.hidden_input_into(v, &mut out);
        out.iter_mut().for_each(|x| *x = sigmoid(*x));
        Ok(out)
    }

    /// `p(v_i = 1 | h) = sigmoid(b + Wᵀ·h)`.
    pub fn visible_probs(&self, h: &[bool]) -> Result<Vec<f64>> {
        self.check_hidden(h)?;
        let mut out = vec![0.0; self.num_visible];
        self.visible_input_into(h, &mut out);
        out.iter_mut().for_each(|x| *x = sigmoid(*x));
        Ok(out)
    }

    /// `ln Σ_h e^{-E(v, h)} = bᵀv + Σ_j ln(1 + e^{c_j + W_j·v})`.
    pub fn log_unnormalized_marginal(&self, v: &[bool]) -> Result<f64> {
        self.check_visible(v)?;
        Ok(self.log_unnormalized_marginal_unchecked(v))
    }

    pub(crate) fn log_unnormalized_marginal_unchecked(&self, v: &[bool]) -> f64 {
        let mut total = math::dot_bits(&self.visible_bias, v);
        for j in 0..self.num_hidden {
            total += softplus(self.hidden_bias[j] + math::dot_bits(self.weight_row(j), v));
        }
        total
    }

    fn enumeration_layer(&self) -> Result<Layer> {
        let small = self.num_visible.min(self.num_hidden);
        if small > ENUMERATION_LIMIT {
            return Err(Error::Capacity {
                units: small,
                limit: ENUMERATION_LIMIT,
            });
        }
        Ok(if self.num_visible <= self.num_hidden {
            Layer::Visible
        } else {
            Layer::Hidden
        })
    }

    /// Whether the exact oracles can run on this model.
    pub fn is_enumerable(&self) -> bool {
        self.enumeration_layer().is_ok()
    }

    /// Exact `ln Z`, summing the larger layer out analytically.
    pub fn exact_log_z(&self) -> Result<f64> {
        let layer = self.enumeration_layer()?;
        let mut acc = LogSumExp::new();
        for_each_layer_state(self, layer, |_, linear, inputs| {
            acc.push(linear + inputs.iter().map(|&x| softplus(x)).sum::<f64>());
        });
        Ok(acc.value())
    }

    /// Exact mean negative log-likelihood of `data` in nats per example.
    pub fn exact_nll(&self, data: &[Vec<bool>]) -> Result<f64> {
        let log_z = self.exact_log_z()?;
        self.nll_given_log_z(data, log_z)
    }

    pub(crate) fn nll_given_log_z(&self, data: &[Vec<bool>], log_z: f64) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::invalid("data", "at least one example is required"));
        }
        let mut total = 0.0;
        for v in data {
            total += self.log_unnormalized_marginal(v)?;
        }
        Ok(log_z - total / data.len() as f64)
    }

    /// Exact normalised probability of a joint state.
    pub fn exact_prob(&self, state: &BinaryState, log_z: f64) -> Result<f64> {
        Ok(math::exp(-self.energy(state)? - log_z))
    }

    /// Exact model expectations `⟨v⟩`, `⟨h⟩`, `⟨h vᵀ⟩` under `p(v, h)`.
    pub fn exact_model_stats(&self) -> Result<Stats> {
        let layer = self.enumeration_layer()?;
        let log_z = self.exact_log_z()?;
        let (d, n) = (self.num_visible, self.num_hidden);
        let mut stats = Stats::zeros(d, n);
        let mut probs = vec![0.0; d.max(n)];
        for_each_layer_state(self, layer, |bits, linear, inputs| {
            let log_w = linear + inputs.iter().map(|&x| softplus(x)).sum::<f64>();
            let p = math::exp(log_w - log_z);
            let probs = &mut probs[..inputs.len()];
            for (q, &x) in probs.iter_mut().zip(inputs) {
                *q = sigmoid(x);
            }
            match layer {
                Layer::Visible => {
                    for (i, _) in bits.iter().enumerate().filter(|(_, &on)| on) {
                        stats.visible[i] += p;
                    }
                    for j in 0..n {
                        let ph = p * probs[j];
                        stats.hidden[j] += ph;
                        let row = &mut stats.pairwise[j * d..(j + 1) * d];
                        for (i, _) in bits.iter().enumerate().filter(|(_, &on)| on) {
                            row[i] += ph;
                        }
                    }
                }
                Layer::Hidden => {
                    for (i, q) in probs.iter().enumerate() {
                        stats.visible[i] += p * q;
                    }
                    for (j, _) in bits.iter().enumerate().filter(|(_, &on)| on) {
                        stats.hidden[j] += p;
                        let row = &mut stats.pairwise[j * d..(j + 1) * d];
                        for (r, q) in row.iter_mut().zip(probs.iter()) {
                            *r += p * q;
                        }
                    }
                }
            }
        });
        Ok(stats)
    }

    /// Gradient of the mean log-likelihood of `data` (ascent direction):
    /// mean-field data statistics minus exact model statistics.
    pub fn exact_grad(&self, data: &[Vec<bool>]) -> Result<Stats> {
        let negative = self.exact_model_stats()?;
        let positive = Stats::mean_field(self, data)?;
        Ok(positive.difference(&negative))
    }

    /// Applies `θ += step · direction`.
    pub fn add_scaled(&mut self, direction: &Stats, step: f64) -> Result<()> {
        check_len("gradient visible", self.num_visible, direction.visible.len())?;
        check_len("gradient hidden", self.num_hidden, direction.hidden.len())?;
        for (w, g) in self.weights.iter_mut().zip(&direction.pairwise) {
            *w += step * g;
        }
        for (b, g) in self.visible_bias.iter_mut().zip(&direction.visible) {
            *b += step * g;
        }
        for (c, g) in self.hidden_bias.iter_mut().zip(&direction.hidden) {
            *c += step * g;
        }
        Ok(())
    }
}

/// Walks all `2^k` states of one layer in Gray-code order.
///
/// The callback receives the layer bits, the linear bias term of that layer
/// and the total input to each unit of the other layer. Inputs are updated
/// incrementally and recomputed from scratch every 4096 states to bound
/// rounding drift.
pub(crate) fn for_each_layer_state(
    params: &RbmParams,
    layer: Layer,
    mut f: impl FnMut(&[bool], f64, &[f64]),
) {
    let (k, other) = match layer {
        Layer::Visible => (params.num_visible, params.num_hidden),
        Layer::Hidden => (params.num_hidden, params.num_visible),
    };
    let (own_bias, other_bias) = match layer {
        Layer::Visible => (&params.visible_bias, &params.hidden_bias),
        Layer::Hidden => (&params.hidden_bias, &params.visible_bias),
    };
    let mut bits = vec![false; k];
    let mut inputs = other_bias.clone();
    let mut linear = 0.0;
    let recompute = |bits: &[bool], inputs: &mut [f64]| match layer {
        Layer::Visible => params.hidden_input_into(bits, inputs),
        Layer::Hidden => params.visible_input_into(bits, inputs),
    };
    let total: u64 = 1u64 << k;
    f(&bits, linear, &inputs);
    for step in 1..total {
        let flip = step.trailing_zeros() as usize;
        let on = !bits[flip];
        bits[flip] = on;
        let sign = if on { 1.0 } else { -1.0 };
        if step % 4096 == 0 {
            recompute(&bits, &mut inputs);
            linear = math::dot_bits(own_bias, &bits);
        } else {
            linear += sign * own_bias[flip];
            match layer {
                Layer::Visible => {
                    for (j, x) in inputs.iter_mut().enumerate() {
                        *x += sign * params.weights[j * params.num_visible + flip];
                    }
                }
                Layer::Hidden => {
                    for (x, w) in inputs.iter_mut().zip(params.weight_row(flip)) {
                        *x += sign * w;
                    }
                }
            }
        }
        debug_assert_eq!(inputs.len(), other);
        f(&bits, linear, &inputs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};

    fn tiny() -> RbmParams {
        RbmParams::from_parts(1, 1, vec![1.0], vec![1.0], vec![-1.0]).unwrap()
    }

    /// Independent brute-force energy: explicit triple loop over the formula.
    fn brute_energy(p: &RbmParams, s: &BinaryState) -> f64 {
        let bit = |x: bool| if x { 1.0 } else { 0.0 };
        let mut e = 0.0;
        for i in 0..p.num_visible() {
            e -= p.visible_bias()[i] * bit(s.v[i]);
        }
        for j in 0..p.num_hidden() {
            e -= p.hidden_bias()[j] * bit(s.h[j]);
        }
        for j in 0..p.num_hidden() {
            for i in 0..p.num_visible() {
                e -= bit(s.h[j]) * p.weights()[j * p.num_visible() + i] * bit(s.v[i]);
            }
        }
        e
    }

    fn brute_log_z(p: &RbmParams) -> f64 {
        let states = 1u64 << (p.num_visible() + p.num_hidden());
        let mut terms = Vec::new();
        for idx in 0..states {
            let s = BinaryState::from_index(idx, p.num_visible(), p.num_hidden());
            terms.push(-brute_energy(p, &s));
        }
        math::log_sum_exp(&terms)
    }

    fn random_model(d: usize, n: usize, seed: u64) -> RbmParams {
        RbmParams::random(d, n, 1.0, 1.0, &mut stream(seed, Domain::Init, 0)).unwrap()
    }

    #[test]
    fn energy_small_examples() {
        let s = BinaryState::new(vec![true], vec![true]);
        assert_eq!(tiny().energy(&s).unwrap(), -1.0);
        let p = random_model(3, 4, 1);
        assert_eq!(p.energy(&BinaryState::zeros(3, 4)).unwrap(), 0.0);
    }

    #[test]
    fn energy_matches_triple_loop_on_all_states() {
        let p = random_model(3, 3, 2);
        for idx in 0..64 {
            let s = BinaryState::from_index(idx, 3, 3);
            assert!((p.energy(&s).unwrap() - brute_energy(&p, &s)).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_rejects_wrong_dimensions() {
        let err = tiny().energy(&BinaryState::zeros(2, 1)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn conditionals_small_examples() {
        let p = RbmParams::zeros(3, 2).unwrap();
        assert_eq!(p.hidden_probs(&[true, false, true]).unwrap(), vec![0.5, 0.5]);
        let p = RbmParams::from_parts(1, 1, vec![2.0], vec![0.0], vec![-1.0]).unwrap();
        assert!((p.hidden_probs(&[true]).unwrap()[0] - 0.731_058_6).abs() < 1e-7);
        let p = RbmParams::from_parts(1, 1, vec![0.0], vec![1.0], vec![0.0]).unwrap();
        assert_eq!(p.visible_probs(&[true]).unwrap(), vec![sigmoid(1.0)]);
        let p = random_model(3, 4, 3);
        let expect: Vec<f64> = p.visible_bias().iter().map(|&b| sigmoid(b)).collect();
        assert_eq!(p.visible_probs(&[false; 4]).unwrap(), expect);
        assert!(p.hidden_probs(&[true; 2]).is_err());
    }

    /// `p(h_j = 1 | v)` by enumerating every hidden configuration.
    fn enumerated_hidden_prob(p: &RbmParams, v: &[bool], j: usize) -> f64 {
        let n = p.num_hidden();
        let (mut on, mut all) = (LogSumExp::new(), LogSumExp::new());
        for idx in 0..1u64 << n {
            let h: Vec<bool> = (0..n).map(|k| idx >> k & 1 == 1).collect();
            let le = -brute_energy(p, &BinaryState::new(v.to_vec(), h.clone()));
            all.push(le);
            if h[j] {
                on.push(le);
            }
        }
        math::exp(on.value() - all.value())
    }

    fn enumerated_visible_prob(p: &RbmParams, h: &[bool], i: usize) -> f64 {
        let d = p.num_visible();
        let (mut on, mut all) = (LogSumExp::new(), LogSumExp::new());
        for idx in 0..1u64 << d {
            let v: Vec<bool> = (0..d).map(|k| idx >> k & 1 == 1).collect();
            let le = -brute_energy(p, &BinaryState::new(v.clone(), h.to_vec()));
            all.push(le);
            if v[i] {
                on.push(le);
            }
        }
        math::exp(on.value() - all.value())
    }

    #[test]
    fn conditionals_match_enumeration() {
        // 4 hidden x 3 visible for p(h|v); 3 hidden x 4 visible for p(v|h).
        let p = random_model(3, 4, 4);
        for idx in 0..8u64 {
            let v: Vec<bool> = (0..3).map(|k| idx >> k & 1 == 1).collect();
            let probs = p.hidden_probs(&v).unwrap();
            for (j, q) in probs.iter().enumerate() {
                assert!((q - enumerated_hidden_prob(&p, &v, j)).abs() < 1e-12);
            }
        }
        let p = random_model(4, 3, 5);
        for idx in 0..8u64 {
            let h: Vec<bool> = (0..3).map(|k| idx >> k & 1 == 1).collect();
            let probs = p.visible_probs(&h).unwrap();
            for (i, q) in probs.iter().enumerate() {
                assert!((q - enumerated_visible_prob(&p, &h, i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_z_examples() {
        let p = RbmParams::zeros(2, 2).unwrap();
        assert!((p.exact_log_z().unwrap() - 4.0 * math::ln(2.0)).abs() < 1e-14);
        // States (v,h): 00 -> 0, 10 -> 1, 01 -> -1, 11 -> 1 + (-1) + 1.
        let e = core::f64::consts::E;
        let want = math::ln(1.0 + 2.0 * e + 1.0 / e);
        assert!((tiny().exact_log_z().unwrap() - want).abs() < 1e-14);
        assert!((want - 1.9176).abs() < 1e-4);
    }

    #[test]
    fn log_z_matches_full_enumeration_for_both_layer_orders() {
        for (d, n, seed) in [(4, 3, 10), (3, 4, 11), (5, 5, 12), (1, 5, 13), (5, 1, 14)] {
            let p = random_model(d, n, seed);
            assert!((p.exact_log_z().unwrap() - brute_log_z(&p)).abs() < 1e-10);
        }
    }

    #[test]
    fn gray_code_resync_keeps_large_enumerations_accurate() {
        // 14 visible units: crosses the 4096-state resynchronisation boundary.
        let p = random_model(14, 16, 15);
        let direct = {
            let mut acc = LogSumExp::new();
            for idx in 0..1u64 << 14 {
                let v: Vec<bool> = (0..14).map(|k| idx >> k & 1 == 1).collect();
                acc.push(p.log_unnormalized_marginal(&v).unwrap());
            }
            acc.value()
        };
        assert!((p.exact_log_z().unwrap() - direct).abs() < 1e-9);
    }

    #[test]
    fn capacity_is_enforced() {
        let p = RbmParams::zeros(25, 25).unwrap();
        assert_eq!(
            p.exact_log_z().unwrap_err(),
            Error::Capacity { units: 25, limit: 24 }
        );
        assert!(p.exact_nll(&[vec![false; 25]]).is_err());
        assert!(p.exact_grad(&[vec![false; 25]]).is_err());
    }

    #[test]
    fn nll_examples() {
        let p = RbmParams::zeros(4, 3).unwrap();
        let nll = p.exact_nll(&[vec![true, false, true, true]]).unwrap();
        assert!((nll - 4.0 * math::ln(2.0)).abs() < 1e-12);

        let target = [true, false, true, true];
        let mut last = f64::INFINITY;
        for scale in [1.0, 4.0, 16.0, 40.0] {
            let b = target.iter().map(|&x| if x { scale } else { -scale }).collect();
            let p = RbmParams::from_parts(4, 1, vec![0.0; 4], b, vec![0.0]).unwrap();
            let nll = p.exact_nll(&[target.to_vec()]).unwrap();
            assert!(nll < last);
            last = nll;
        }
        assert!(last < 1e-15);
    }

    #[test]
    fn nll_matches_brute_force_marginals() {
        let p = random_model(4, 3, 20);
        let data = vec![vec![true, false, false, true], vec![false; 4], vec![true; 4]];
        let log_z = brute_log_z(&p);
        let mut total = 0.0;
        for v in &data {
            let mut acc = LogSumExp::new();
            for idx in 0..8u64 {
                let h = (0..3).map(|k| idx >> k & 1 == 1).collect();
                acc.push(-brute_energy(&p, &BinaryState::new(v.clone(), h)));
            }
            total += acc.value() - log_z;
        }
        assert!((p.exact_nll(&data).unwrap() + total / 3.0).abs() < 1e-10);
    }

    #[test]
    fn model_stats_match_brute_force_for_both_layer_orders() {
        for (d, n, seed) in [(3, 4, 30), (4, 3, 31)] {
            let p = random_model(d, n, seed);
            let log_z = brute_log_z(&p);
            let mut want = Stats::zeros(d, n);
            for idx in 0..1u64 << (d + n) {
                let s = BinaryState::from_index(idx, d, n);
                let prob = math::exp(-brute_energy(&p, &s) - log_z);
                for i in 0..d {
                    if s.v[i] {
                        want.visible[i] += prob;
                    }
                }
                for j in 0..n {
                    if s.h[j] {
                        want.hidden[j] += prob;
                        for i in 0..d {
                            if s.v[i] {
                                want.pairwise[j * d + i] += prob;
                            }
                        }
                    }
                }
            }
            let got = p.exact_model_stats().unwrap();
            assert!(got.max_abs_diff(&want) < 1e-12);
        }
    }

    #[test]
    fn grad_examples() {
        let p = RbmParams::zeros(1, 1).unwrap();
        let g = p.exact_grad(&[vec![true]]).unwrap();
        assert!((g.visible[0] - 0.5).abs() < 1e-15);

        // Data with the model's own marginal as empirical weights is a fixed point:
        // weight every visible configuration by its exact probability.
        let p = random_model(2, 2, 40);
        let log_z = p.exact_log_z().unwrap();
        let mut weighted = Stats::zeros(2, 2);
        for idx in 0..4u64 {
            let v: Vec<bool> = (0..2).map(|k| idx >> k & 1 == 1).collect();
            let pv = math::exp(p.log_unnormalized_marginal(&v).unwrap() - log_z);
            weighted.add_scaled(&Stats::mean_field(&p, &[v]).unwrap(), pv);
        }
        let fixed = weighted.difference(&p.exact_model_stats().unwrap());
        assert!(fixed.max_abs() < 1e-12);
    }

    #[test]
    fn grad_matches_finite_differences() {
        let data = vec![
            vec![true, false, true, false],
            vec![true, true, false, false],
            vec![false, false, true, true],
        ];
        let p = random_model(4, 3, 50);
        let g = p.exact_grad(&data).unwrap();
        let flat_grad: Vec<f64> = g
            .pairwise
            .iter()
            .chain(&g.visible)
            .chain(&g.hidden)
            .copied()
            .collect();
        let step = 1e-5;
        let total = p.iter_all().count();
        for k in 0..total {
            let shifted = |delta: f64| {
                let mut q = p.clone();
                let mut idx = 0;
                q.for_each_mut(|x| {
                    if idx == k {
                        *x += delta;
                    }
                    idx += 1;
                });
                q.exact_nll(&data).unwrap()
            };
            let fd = -(shifted(step) - shifted(-step)) / (2.0 * step);
            let rel = (fd - flat_grad[k]).abs() / flat_grad[k].abs().max(1e-3);
            assert!(rel < 1e-4, "param {k}: fd {fd} vs {}", flat_grad[k]);
        }
    }

    #[test]
    fn from_parts_validates() {
        assert!(RbmParams::from_parts(1, 1, vec![f64::NAN], vec![0.0], vec![0.0]).is_err());
        assert!(RbmParams::from_parts(2, 1, vec![0.0], vec![0.0; 2], vec![0.0]).is_err());
        assert!(RbmParams::zeros(0, 3).is_err());
    }
}
