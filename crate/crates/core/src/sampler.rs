//! Gibbs chains and the simulated physical sampler.
//!
//! A sweep samples `h ~ p(h | v)` and then `v ~ p(v | h)`. The simulated
//! device follows a fixed noise contract:
//!
//! - weight noise is drawn once per parameter change and frozen into a
//!   [`NoisySnapshot`];
//! - bias noise is redrawn for every sample request, i.e. once per chain each
//!   time [`physical_sample`] advances it.
//!
//! Chains carry a stream id. Each call to [`physical_sample`] or
//! [`advance_chains`] draws one round key from the caller's generator and
//! gives chain `i` the stream `(round key, i's stream id)`, so the result is
//! the same whether chains run sequentially or on a thread pool.

use alloc::{vec, vec::Vec};

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};

use crate::constraints::{ConnectivityMask, ConstraintSpec};
use crate::error::{check_len, Error, Result};
use crate::math::{self, sigmoid};
use crate::par;
use crate::rbm::RbmParams;
use crate::rng::{stream, Domain, StreamRng};

/// A persistent Gibbs chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainState {
    pub v: Vec<bool>,
    pub h: Vec<bool>,
    pub stream_id: u64,
}

impl ChainState {
    pub fn new(v: Vec<bool>, h: Vec<bool>, stream_id: u64) -> Self {
        Self { v, h, stream_id }
    }

    pub fn zeros(num_visible: usize, num_hidden: usize, stream_id: u64) -> Self {
        Self::new(vec![false; num_visible], vec![false; num_hidden], stream_id)
    }

    /// Uniformly random binary state from the chain's own init stream.
    pub fn random(num_visible: usize, num_hidden: usize, stream_id: u64, seed: u64) -> Self {
        let mut rng = stream(seed, Domain::ChainInit, stream_id);
        let v = (0..num_visible).map(|_| rng.random::<bool>()).collect();
        let h = (0..num_hidden).map(|_| rng.random::<bool>()).collect();
        Self::new(v, h, stream_id)
    }

    fn check(&self, params: &RbmParams) -> Result<()> {
        check_len("chain visible", params.num_visible(), self.v.len())?;
        check_len("chain hidden", params.num_hidden(), self.h.len())
    }
}

/// `count` random chains with stream ids `0..count`.
pub fn init_chains(num_visible: usize, num_hidden: usize, count: usize, seed: u64) -> Vec<ChainState> {
    (0..count as u64)
        .map(|id| ChainState::random(num_visible, num_hidden, id, seed))
        .collect()
}

/// Generator a chain uses during the round keyed by `round_key`.
pub fn chain_rng(round_key: u64, stream_id: u64) -> StreamRng {
    stream(round_key, Domain::Chain, stream_id)
}

#[derive(Debug, Default)]
struct Scratch {
    hidden: Vec<f64>,
    visible: Vec<f64>,
}

#[inline]
fn bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    rng.random::<f64>() < p
}

/// One hidden-then-visible sweep using `weights` from `params` and explicit biases.
fn sweep<R: Rng + ?Sized>(
    params: &RbmParams,
    visible_bias: &[f64],
    hidden_bias: &[f64],
    state: &mut ChainState,
    rng: &mut R,
    scratch: &mut Scratch,
) {
    let d = params.num_visible();
    scratch.hidden.resize(params.num_hidden(), 0.0);
    scratch.visible.resize(d, 0.0);
    for (j, x) in scratch.hidden.iter_mut().enumerate() {
        *x = hidden_bias[j] + math::dot_bits(params.weight_row(j), &state.v);
    }
    for (h, &x) in state.h.iter_mut().zip(&scratch.hidden) {
        *h = bernoulli(sigmoid(x), rng);
    }
    scratch.visible.copy_from_slice(visible_bias);
    for (j, _) in state.h.iter().enumerate().filter(|(_, &on)| on) {
        for (x, w) in scratch.visible.iter_mut().zip(params.weight_row(j)) {
            *x += w;
        }
    }
    for (v, &x) in state.v.iter_mut().zip(&scratch.visible) {
        *v = bernoulli(sigmoid(x), rng);
    }
}

/// One full Gibbs sweep: `h' ~ p(h | v)`, then `v' ~ p(v | h')`.
pub fn gibbs_step<R: Rng + ?Sized>(params: &RbmParams, state: &mut ChainState, rng: &mut R) -> Result<()> {
    state.check(params)?;
    sweep(
        params,
        params.visible_bias(),
        params.hidden_bias(),
        state,
        rng,
        &mut Scratch::default(),
    );
    Ok(())
}

fn check_steps(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::invalid("k", "at least one Gibbs sweep is required"))
    } else {
        Ok(())
    }
}

/// Applies `k ≥ 1` sweeps.
pub fn run_chain<R: Rng + ?Sized>(
    params: &RbmParams,
    state: &mut ChainState,
    k: usize,
    rng: &mut R,
) -> Result<()> {
    check_steps(k)?;
    state.check(params)?;
    let mut scratch = Scratch::default();
    for _ in 0..k {
        sweep(params, params.visible_bias(), params.hidden_bias(), state, rng, &mut scratch);
    }
    Ok(())
}

/// Advances every chain `k` sweeps on noise-free parameters, each on its own stream.
pub fn advance_chains<R: RngCore + ?Sized>(
    params: &RbmParams,
    chains: &mut [ChainState],
    k: usize,
    rng: &mut R,
) -> Result<()> {
    check_steps(k)?;
    chains.iter().try_for_each(|c| c.check(params))?;
    let round_key = rng.next_u64();
    par::map_indexed(chains, |_, chain| {
        let mut crng = chain_rng(round_key, chain.stream_id);
        let mut scratch = Scratch::default();
        for _ in 0..k {
            sweep(params, params.visible_bias(), params.hidden_bias(), chain, &mut crng, &mut scratch);
        }
    });
    Ok(())
}

/// Parameters as loaded into the device after one parameter change: the
/// weight noise is fixed, bias noise is still to be drawn per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisySnapshot {
    base: RbmParams,
    /// Base weights plus frozen noise, masked entries zero; base biases.
    noisy_weights: RbmParams,
    w_noise: Vec<f64>,
    sigma_b: f64,
}

impl NoisySnapshot {
    pub fn base(&self) -> &RbmParams {
        &self.base
    }

    /// The frozen weight-noise draw, `N × D`.
    pub fn weight_noise(&self) -> &[f64] {
        &self.w_noise
    }

    /// Effective weights shared by every sample drawn from this snapshot.
    pub fn effective_weights(&self) -> &[f64] {
        self.noisy_weights.weights()
    }

    pub fn sigma_b(&self) -> f64 {
        self.sigma_b
    }

    fn noisy_biases<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let mut b = self.noisy_weights.visible_bias().to_vec();
        let mut c = self.noisy_weights.hidden_bias().to_vec();
        if self.sigma_b > 0.0 {
            let normal = Normal::new(0.0, self.sigma_b).expect("sigma_b validated at construction");
            b.iter_mut().chain(c.iter_mut()).for_each(|x| *x += normal.sample(rng));
        }
        (b, c)
    }

    /// Parameters for one sample request: frozen weight noise plus a fresh
    /// bias-noise draw.
    pub fn effective_params<R: Rng + ?Sized>(&self, rng: &mut R) -> RbmParams {
        let (b, c) = self.noisy_biases(rng);
        let mut p = self.noisy_weights.clone();
        p.visible_bias_mut().copy_from_slice(&b);
        p.hidden_bias_mut().copy_from_slice(&c);
        p
    }
}

/// Freezes a weight-noise draw for `params` under `spec`.
///
/// Masked connections are exactly zero in the result, noise included.
pub fn make_snapshot<R: Rng + ?Sized>(
    params: &RbmParams,
    spec: &ConstraintSpec,
    rng: &mut R,
) -> Result<NoisySnapshot> {
    spec.validate()?;
    let mut base = params.clone();
    if let Some(mask) = &spec.mask {
        crate::constraints::mask_in_place(&mut base, mask)?;
    }
    let mut w_noise = vec![0.0; base.weights().len()];
    if spec.sigma_w > 0.0 {
        let normal = Normal::new(0.0, spec.sigma_w)
            .map_err(|_| Error::invalid("sigma_w", "not a valid standard deviation"))?;
        w_noise.iter_mut().for_each(|x| *x = normal.sample(rng));
        if let Some(mask) = &spec.mask {
            suppress_masked(&mut w_noise, mask);
        }
    }
    let mut noisy_weights = base.clone();
    for (w, n) in noisy_weights.weights_mut().iter_mut().zip(&w_noise) {
        *w += n;
    }
    noisy_weights.check_finite("noisy weights")?;
    Ok(NoisySnapshot {
        base,
        noisy_weights,
        w_noise,
        sigma_b: spec.sigma_b,
    })
}

fn suppress_masked(values: &mut [f64], mask: &ConnectivityMask) {
    for (x, &ok) in values.iter_mut().zip(mask.allowed()) {
        if !ok {
            *x = 0.0;
        }
    }
}

/// Draws one sample per chain from the simulated device: each chain gets a
/// fresh bias-noise draw and is advanced `k` sweeps under it.
pub fn physical_sample<R: RngCore + ?Sized>(
    snapshot: &NoisySnapshot,
    chains: &mut [ChainState],
    k: usize,
    rng: &mut R,
) -> Result<()> {
    check_steps(k)?;
    let weights = &snapshot.noisy_weights;
    chains.iter().try_for_each(|c| c.check(weights))?;
    let round_key = rng.next_u64();
    par::map_indexed(chains, |_, chain| {
        let mut crng = chain_rng(round_key, chain.stream_id);
        let (b, c) = snapshot.noisy_biases(&mut crng);
        let mut scratch = Scratch::default();
        for _ in 0..k {
            sweep(weights, &b, &c, chain, &mut crng, &mut scratch);
        }
    });
    Ok(())
}

/// Creates one snapshot per parameter change and counts the weight-noise redraws.
#[derive(Debug, Clone)]
pub struct SnapshotManager {
    spec: ConstraintSpec,
    seed: u64,
    redraws: u64,
}

impl SnapshotManager {
    pub fn new(spec: ConstraintSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            seed,
            redraws: 0,
        })
    }

    pub fn spec(&self) -> &ConstraintSpec {
        &self.spec
    }

    /// Number of snapshots (weight-noise draws) created so far.
    pub fn redraws(&self) -> u64 {
        self.redraws
    }

    pub fn snapshot(&mut self, params: &RbmParams) -> Result<NoisySnapshot> {
        let mut rng = stream(self.seed, Domain::Snapshot, self.redraws);
        let snap = make_snapshot(params, &self.spec, &mut rng)?;
        self.redraws += 1;
        Ok(snap)
    }
}
