//! NLL estimation and sample generation.
//!
//! Large models are evaluated with annealed importance sampling from a
//! zero-weight base RBM whose visible biases come from (smoothed) data
//! marginals. The path interpolates parameters linearly in an inverse
//! temperature `β`:
//!
//! ```text
//! ln p*_β(v) = b_Aᵀv + β (b - b_A)ᵀv + Σ_j softplus(β (c_j + W_j·v))
//! ```
//!
//! so that `β = 0` is the base model (`ln Z_A = Σ softplus(b_A) + N ln 2`)
//! and `β = 1` the target. Each particle anneals on its own random stream.

use alloc::{vec, vec::Vec};

use rand::{Rng, RngCore};

use crate::constraints::ConstraintSpec;
use crate::error::{Error, Result};
use crate::math::{self, sigmoid, softplus, LogSumExp};
use crate::par;
use crate::rbm::RbmParams;
use crate::rng::{stream, Domain};
use crate::sampler::{self, ChainState};
use crate::topology::PixelMapping;

/// Smoothing range for data-marginal base biases.
pub const BASE_MARGINAL_CLIP: (f64, f64) = (0.001, 0.999);

/// Largest smaller-layer size for which [`NllMethod::auto`] picks exact evaluation.
pub const AUTO_EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct AisConfig {
    /// Number of inverse temperatures, including both endpoints.
    pub num_betas: usize,
    pub num_particles: usize,
    /// Visible biases of the base model; zeros when `None`.
    pub base_visible_bias: Option<Vec<f64>>,
}

impl Default for AisConfig {
    fn default() -> Self {
        Self {
            num_betas: 10_000,
            num_particles: 100,
            base_visible_bias: None,
        }
    }
}

impl AisConfig {
    /// Uses `logit(p̂_i)` of the data marginals, with `p̂` clipped to
    /// [`BASE_MARGINAL_CLIP`], as base visible biases.
    pub fn with_data_base(mut self, data: &[Vec<bool>]) -> Result<Self> {
        self.base_visible_bias = Some(data_marginal_biases(data)?);
        Ok(self)
    }

    /// Linear schedule `0 = β_0 < … < β_{K-1} = 1`.
    pub fn betas(&self) -> Vec<f64> {
        let last = (self.num_betas - 1) as f64;
        (0..self.num_betas).map(|k| k as f64 / last).collect()
    }

    fn validate(&self, num_visible: usize) -> Result<()> {
        if self.num_betas < 2 {
            return Err(Error::invalid("num_betas", "need at least the two endpoints"));
        }
        if self.num_particles == 0 {
            return Err(Error::invalid("num_particles", "must be positive"));
        }
        if let Some(b) = &self.base_visible_bias {
            crate::error::check_len("base visible biases", num_visible, b.len())?;
        }
        Ok(())
    }
}

pub fn data_marginal_biases(data: &[Vec<bool>]) -> Result<Vec<f64>> {
    let first = data
        .first()
        .ok_or_else(|| Error::invalid("data", "need examples to estimate marginals"))?;
    let mut counts = vec![0usize; first.len()];
    for row in data {
        crate::error::check_len("data row", counts.len(), row.len())?;
        for (c, &b) in counts.iter_mut().zip(row) {
            *c += b as usize;
        }
    }
    let (lo, hi) = BASE_MARGINAL_CLIP;
    Ok(counts
        .iter()
        .map(|&c| {
            let p = (c as f64 / data.len() as f64).clamp(lo, hi);
            math::ln(p / (1.0 - p))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AisEstimate {
    pub log_z: f64,
    /// Delta-method standard error of `log_z`.
    pub std_err: f64,
    pub log_z_base: f64,
}

/// Annealed importance sampling estimate of `ln Z`.
pub fn ais_log_z<R: RngCore + ?Sized>(params: &RbmParams, config: &AisConfig, rng: &mut R) -> Result<AisEstimate> {
    let (d, n) = (params.num_visible(), params.num_hidden());
    config.validate(d)?;
    let zeros = vec![0.0; d];
    let base = config.base_visible_bias.as_deref().unwrap_or(&zeros);
    let delta_b: Vec<f64> = params.visible_bias().iter().zip(base).map(|(b, a)| b - a).collect();
    let log_z_base = base.iter().map(|&b| softplus(b)).sum::<f64>() + n as f64 * core::f64::consts::LN_2;
    let betas = config.betas();
    let key = rng.next_u64();

    let log_weights = par::map_range(config.num_particles, |particle| {
        let mut prng = stream(key, Domain::AisParticle, particle as u64);
        anneal_particle(params, base, &delta_b, &betas, &mut prng)
    });
    if let Some(bad) = log_weights.iter().position(|w| !w.is_finite()) {
        return Err(Error::non_finite(alloc::format!(
            "AIS importance weight of particle {bad} ({})",
            log_weights[bad]
        )));
    }

    let mut acc = LogSumExp::new();
    log_weights.iter().for_each(|&w| acc.push(w));
    let count = log_weights.len() as f64;
    let log_mean = acc.value() - math::ln(count);

    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = log_weights.iter().map(|w| math::exp(w - max)).collect();
    let mean = scaled.iter().sum::<f64>() / count;
    let std_err = if log_weights.len() < 2 {
        0.0
    } else {
        let var = scaled.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / (count - 1.0);
        math::sqrt(var) / (mean * math::sqrt(count))
    };

    Ok(AisEstimate {
        log_z: log_z_base + log_mean,
        std_err,
        log_z_base,
    })
}

fn anneal_particle<R: Rng + ?Sized>(
    params: &RbmParams,
    base: &[f64],
    delta_b: &[f64],
    betas: &[f64],
    rng: &mut R,
) -> f64 {
    let (d, n) = (params.num_visible(), params.num_hidden());
    let mut v: Vec<bool> = base.iter().map(|&b| rng.random::<f64>() < sigmoid(b)).collect();
    let mut h = vec![false; n];
    let mut act = vec![0.0; n];
    let mut vis = vec![0.0; d];
    let mut log_w = 0.0;

    let unnormalized = |beta: f64, delta_lin: f64, act: &[f64]| {
        beta * delta_lin + act.iter().map(|&x| softplus(beta * x)).sum::<f64>()
    };

    params.hidden_input_into(&v, &mut act);
    let mut delta_lin = math::dot_bits(delta_b, &v);
    for k in 1..betas.len() {
        // The b_Aᵀv term is shared by both temperatures and cancels.
        log_w += unnormalized(betas[k], delta_lin, &act) - unnormalized(betas[k - 1], delta_lin, &act);
        if k + 1 == betas.len() {
            break;
        }
        let beta = betas[k];
        for (hj, &x) in h.iter_mut().zip(&act) {
            *hj = rng.random::<f64>() < sigmoid(beta * x);
        }
        params.visible_input_into(&h, &mut vis);
        for i in 0..d {
            // b_A + β (b - b_A + Wᵀh); the visible input already holds b + Wᵀh.
            let x = base[i] + beta * (vis[i] - base[i]);
            v[i] = rng.random::<f64>() < sigmoid(x);
        }
        params.hidden_input_into(&v, &mut act);
        delta_lin = math::dot_bits(delta_b, &v);
    }
    log_w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NllMethod {
    Exact,
    Ais,
}

impl NllMethod {
    /// Exact when the smaller layer has at most [`AUTO_EXACT_LIMIT`] units.
    pub fn auto(params: &RbmParams) -> Self {
        if params.num_visible().min(params.num_hidden()) <= AUTO_EXACT_LIMIT {
            NllMethod::Exact
        } else {
            NllMethod::Ais
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            NllMethod::Exact => "exact",
            NllMethod::Ais => "ais",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllEstimate {
    /// Nats per example.
    pub mean: f64,
    pub std_err: f64,
    /// Parameter-noise instantiations averaged; 0 for a noise-free evaluation.
    pub num_mc_noise_draws: usize,
    pub method: NllMethod,
}

fn mean_log_marginal(params: &RbmParams, data: &[Vec<bool>]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("testset", "at least one example is required"));
    }
    let mut total = 0.0;
    for v in data {
        total += params.log_unnormalized_marginal(v)?;
    }
    Ok(total / data.len() as f64)
}

/// `NLL = ln Ẑ − mean ln p*(v)`; the error bar is that of `ln Ẑ`.
pub fn ais_nll<R: RngCore + ?Sized>(
    params: &RbmParams,
    testset: &[Vec<bool>],
    config: &AisConfig,
    rng: &mut R,
) -> Result<NllEstimate> {
    let marginal = mean_log_marginal(params, testset)?;
    let z = ais_log_z(params, config, rng)?;
    Ok(NllEstimate {
        mean: z.log_z - marginal,
        std_err: z.std_err,
        num_mc_noise_draws: 0,
        method: NllMethod::Ais,
    })
}

pub fn exact_nll_estimate(params: &RbmParams, testset: &[Vec<bool>]) -> Result<NllEstimate> {
    Ok(NllEstimate {
        mean: params.exact_nll(testset)?,
        std_err: 0.0,
        num_mc_noise_draws: 0,
        method: NllMethod::Exact,
    })
}

pub fn nll<R: RngCore + ?Sized>(
    params: &RbmParams,
    testset: &[Vec<bool>],
    method: NllMethod,
    config: &AisConfig,
    rng: &mut R,
) -> Result<NllEstimate> {
    match method {
        NllMethod::Exact => exact_nll_estimate(params, testset),
        NllMethod::Ais => ais_nll(params, testset, config, rng),
    }
}

/// Monte Carlo expectation of the NLL over parameter-noise instantiations.
///
/// Each draw freezes fresh weight noise, adds one bias-noise draw and
/// evaluates the resulting model. The error bar is the standard error over
/// draws.
pub fn expected_nll_under_noise<R: RngCore + ?Sized>(
    params: &RbmParams,
    spec: &ConstraintSpec,
    testset: &[Vec<bool>],
    num_draws: usize,
    method: NllMethod,
    config: &AisConfig,
    rng: &mut R,
) -> Result<NllEstimate> {
    if num_draws == 0 {
        return Err(Error::invalid("num_draws", "at least one noise draw is required"));
    }
    let key = rng.next_u64();
    let mut values = Vec::with_capacity(num_draws);
    for draw in 0..num_draws as u64 {
        let mut drng = stream(key, Domain::NoiseDraw, draw);
        let snapshot = sampler::make_snapshot(params, spec, &mut drng)?;
        let noisy = snapshot.effective_params(&mut drng);
        values.push(nll(&noisy, testset, method, config, &mut drng)?.mean);
    }
    let (mean, std_err) = math::mean_and_stderr(&values);
    Ok(NllEstimate {
        mean,
        std_err,
        num_mc_noise_draws: num_draws,
        method,
    })
}

/// Final states and displayed expectations of independent sampling chains.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    /// `p(v = 1 | h)` for each chain's final binary hidden state.
    pub expected_visible: Vec<Vec<f64>>,
    pub final_states: Vec<ChainState>,
}

/// Default sweep count for sample figures.
pub const DEFAULT_SAMPLE_STEPS: usize = 100_000;

/// Runs `n_samples` chains from random states for `gibbs_steps` sweeps.
pub fn sample_grid<R: RngCore + ?Sized>(
    params: &RbmParams,
    n_samples: usize,
    gibbs_steps: usize,
    rng: &mut R,
) -> Result<SampleSet> {
    let key = rng.next_u64();
    let mut chains = sampler::init_chains(params.num_visible(), params.num_hidden(), n_samples, key);
    sampler::advance_chains(params, &mut chains, gibbs_steps, &mut stream(key, Domain::SampleGrid, 0))?;
    let expected_visible = chains
        .iter()
        .map(|c| params.visible_probs(&c.h))
        .collect::<Result<_>>()?;
    Ok(SampleSet {
        expected_visible,
        final_states: chains,
    })
}

/// Row-major grey image with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

/// Lays rendered samples out in a grid with `columns` tiles per row and a
/// one-pixel black border between tiles.
pub fn tile_samples(samples: &SampleSet, mapping: &PixelMapping, columns: usize) -> Result<GrayImage> {
    let columns = columns.max(1);
    let count = samples.expected_visible.len();
    let rows = count.div_ceil(columns).max(1);
    let (tw, th) = (mapping.width(), mapping.height());
    let width = columns * (tw + 1) + 1;
    let height = rows * (th + 1) + 1;
    let mut pixels = vec![0.0; width * height];
    for (s, values) in samples.expected_visible.iter().enumerate() {
        let img = mapping.render(values)?;
        let (r0, c0) = ((s / columns) * (th + 1) + 1, (s % columns) * (tw + 1) + 1);
        for y in 0..th {
            pixels[(r0 + y) * width + c0..(r0 + y) * width + c0 + tw].copy_from_slice(&img[y * tw..(y + 1) * tw]);
        }
    }
    Ok(GrayImage { width, height, pixels })
}
