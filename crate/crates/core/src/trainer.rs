//! PCD-k training.
//!
//! Each update uses mean-field hidden probabilities for the data term and
//! persistent chains for the model term. In the simulated-physical mode the
//! chains are advanced by the noisy device sampler, with a fresh weight-noise
//! snapshot for every update. After the gradient step the constraint spec is
//! enforced (clip, then mask), so the parameters always satisfy it.

use alloc::{format, vec::Vec};

use rand::{seq::SliceRandom, Rng, RngCore};

use crate::constraints::ConstraintSpec;
use crate::error::{Error, Result};
use crate::math::{self, sigmoid};
use crate::rbm::RbmParams;
use crate::rng::{stream, Domain, StreamRng};
use crate::sampler::{self, ChainState, SnapshotManager};
use crate::stats::Stats;
use crate::topology::PixelMapping;

/// Where negative-phase statistics come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativePhase {
    /// Persistent chains advanced by the noisy device sampler.
    SimulatedPhysical,
    /// Persistent chains on the noise-free parameters.
    PlainGibbs,
    /// Exact model expectations by enumeration (small models only).
    ExactEnumeration,
}

impl NegativePhase {
    pub fn as_str(&self) -> &'static str {
        match self {
            NegativePhase::SimulatedPhysical => "simulated_physical",
            NegativePhase::PlainGibbs => "plain_gibbs",
            NegativePhase::ExactEnumeration => "exact_enumeration",
        }
    }
}

impl core::str::FromStr for NegativePhase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simulated_physical" => Ok(NegativePhase::SimulatedPhysical),
            "plain_gibbs" => Ok(NegativePhase::PlainGibbs),
            "exact_enumeration" => Ok(NegativePhase::ExactEnumeration),
            other => Err(Error::invalid("negative_phase", format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub num_hidden: usize,
    /// Gibbs sweeps per update.
    pub k: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub num_chains: usize,
    pub epochs: usize,
    pub seed: u64,
    pub init_weight_std: f64,
    pub constraint: ConstraintSpec,
    pub negative_phase: NegativePhase,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            num_hidden: 500,
            k: 15,
            learning_rate: 0.01,
            batch_size: 100,
            num_chains: 100,
            epochs: 10,
            seed: 0,
            init_weight_std: 0.01,
            constraint: ConstraintSpec::unconstrained(),
            negative_phase: NegativePhase::SimulatedPhysical,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_hidden", self.num_hidden),
            ("k", self.k),
            ("batch_size", self.batch_size),
            ("num_chains", self.num_chains),
            ("epochs", self.epochs),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be finite and non-negative"));
        }
        if !(self.init_weight_std >= 0.0 && self.init_weight_std.is_finite()) {
            return Err(Error::invalid("init_weight_std", "must be finite and non-negative"));
        }
        self.constraint.validate()
    }
}

/// Training objective recorded per epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// Exact NLL of the monitoring rows, nats per example.
    ExactNll(f64),
    /// Pseudo-likelihood NLL proxy (one random bit per example, scaled by D).
    PseudoNll(f64),
}

impl Objective {
    pub fn value(&self) -> f64 {
        match *self {
            Objective::ExactNll(x) | Objective::PseudoNll(x) => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub updates: u64,
    pub weight_norm: f64,
    pub visible_bias_norm: f64,
    pub hidden_bias_norm: f64,
    pub objective: Objective,
    /// Filled in by callers that have a clock.
    pub wall_time_s: Option<f64>,
    pub epoch_seed: u64,
}

/// Append-only record of a training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn push(&mut self, record: EpochRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    /// Lets a caller attach a wall-clock time to the newest record.
    pub fn set_last_wall_time(&mut self, seconds: f64) {
        if let Some(r) = self.records.last_mut() {
            r.wall_time_s = Some(seconds);
        }
    }
}

/// Samples each bit as 1 with probability equal to the grey value.
pub fn binarize<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> Result<Vec<bool>> {
    if let Some((i, x)) = row.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
        return Err(Error::invalid("grey value", format!("entry {i} = {x} is outside [0, 1]")));
    }
    Ok(row.iter().map(|&p| rng.random::<f64>() < p).collect())
}

/// Binarises each row, then spreads pixels onto visible units if a mapping is given.
pub fn binarize_rows<R: Rng + ?Sized>(
    rows: &[Vec<f64>],
    layout: Option<&PixelMapping>,
    rng: &mut R,
) -> Result<Vec<Vec<bool>>> {
    rows.iter()
        .map(|row| {
            let bits = binarize(row, rng)?;
            match layout {
                Some(m) => m.project(&bits),
                None => Ok(bits),
            }
        })
        .collect()
}

/// Mean-field data statistics.
pub fn positive_stats(params: &RbmParams, batch: &[Vec<bool>]) -> Result<Stats> {
    Stats::mean_field(params, batch)
}

/// Monte Carlo model statistics from the binary chain states.
pub fn negative_stats(num_visible: usize, num_hidden: usize, chains: &[ChainState]) -> Result<Stats> {
    Stats::from_states(
        num_visible,
        num_hidden,
        chains.iter().map(|c| (&c.v[..], &c.h[..])),
    )
}

/// One PCD-k update in place. Returns the gradient estimate that was applied.
pub fn pcd_update<R: RngCore + ?Sized>(
    params: &mut RbmParams,
    batch: &[Vec<bool>],
    chains: &mut [ChainState],
    config: &TrainConfig,
    snapshots: &mut SnapshotManager,
    rng: &mut R,
) -> Result<Stats> {
    let (d, n) = (params.num_visible(), params.num_hidden());
    let positive = positive_stats(params, batch)?;
    let negative = match config.negative_phase {
        NegativePhase::ExactEnumeration => params.exact_model_stats()?,
        NegativePhase::PlainGibbs => {
            sampler::advance_chains(params, chains, config.k, rng)?;
            negative_stats(d, n, chains)?
        }
        NegativePhase::SimulatedPhysical => {
            let snapshot = snapshots.snapshot(params)?;
            sampler::physical_sample(&snapshot, chains, config.k, rng)?;
            negative_stats(d, n, chains)?
        }
    };
    let gradient = positive.difference(&negative);
    let mut next = params.clone();
    next.add_scaled(&gradient, config.learning_rate)?;
    if next.check_finite("update").is_err() {
        return Err(Error::non_finite(format!(
            "parameters after update {} (learning rate {}, max |gradient| {})",
            snapshots.redraws(),
            config.learning_rate,
            gradient.max_abs()
        )));
    }
    config.constraint.enforce(&mut next)?;
    *params = next;
    Ok(gradient)
}

/// Persistent training state: parameters, chains and the snapshot source.
#[derive(Debug)]
pub struct Trainer {
    config: TrainConfig,
    params: RbmParams,
    chains: Vec<ChainState>,
    snapshots: SnapshotManager,
    update_rng: StreamRng,
    updates: u64,
    epochs_run: usize,
    log: TrainLog,
}

const MONITOR_ROWS: usize = 1000;
const EXACT_MONITOR_LIMIT: usize = 20;

impl Trainer {
    /// Starts from `initial`, or from the default initialisation when `None`.
    pub fn new(num_visible: usize, initial: Option<RbmParams>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut params = match initial {
            Some(p) => {
                crate::error::check_len("initial visible units", num_visible, p.num_visible())?;
                crate::error::check_len("initial hidden units", config.num_hidden, p.num_hidden())?;
                p
            }
            None => RbmParams::random(
                num_visible,
                config.num_hidden,
                config.init_weight_std,
                0.0,
                &mut stream(config.seed, Domain::Init, 0),
            )?,
        };
        config.constraint.enforce(&mut params)?;
        let chains = sampler::init_chains(num_visible, config.num_hidden, config.num_chains, config.seed);
        let snapshots = SnapshotManager::new(config.constraint.clone(), config.seed)?;
        Ok(Self {
            update_rng: stream(config.seed, Domain::Chain, u64::MAX),
            config,
            params,
            chains,
            snapshots,
            updates: 0,
            epochs_run: 0,
            log: TrainLog::default(),
        })
    }

    pub fn params(&self) -> &RbmParams {
        &self.params
    }

    pub fn chains(&self) -> &[ChainState] {
        &self.chains
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    pub fn log_mut(&mut self) -> &mut TrainLog {
        &mut self.log
    }

    pub fn update_count(&self) -> u64 {
        self.updates
    }

    /// Weight-noise snapshots drawn so far.
    pub fn snapshot_redraws(&self) -> u64 {
        self.snapshots.redraws()
    }

    /// One update on an already binarised batch.
    pub fn update(&mut self, batch: &[Vec<bool>]) -> Result<Stats> {
        let g = pcd_update(
            &mut self.params,
            batch,
            &mut self.chains,
            &self.config,
            &mut self.snapshots,
            &mut self.update_rng,
        )?;
        self.updates += 1;
        Ok(g)
    }

    /// One pass over shuffled mini-batches of grey-value rows, binarised on
    /// every presentation.
    pub fn run_epoch(&mut self, rows: &[Vec<f64>], layout: Option<&PixelMapping>) -> Result<&EpochRecord> {
        if rows.is_empty() {
            return Err(Error::invalid("dataset", "no training rows"));
        }
        let epoch = self.epochs_run;
        let mut rng = stream(self.config.seed, Domain::Epoch, epoch as u64);
        let epoch_seed = rng.next_u64();
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.shuffle(&mut rng);
        for chunk in order.chunks(self.config.batch_size) {
            let batch: Vec<Vec<f64>> = chunk.iter().map(|&i| rows[i].clone()).collect();
            let bits = binarize_rows(&batch, layout, &mut rng)?;
            self.update(&bits)?;
        }
        self.epochs_run += 1;
        let objective = self.monitor(rows, layout)?;
        let (vb, hb) = self.params.bias_norms();
        self.log.push(EpochRecord {
            epoch,
            updates: self.updates,
            weight_norm: self.params.weight_norm(),
            visible_bias_norm: vb,
            hidden_bias_norm: hb,
            objective,
            wall_time_s: None,
            epoch_seed,
        });
        Ok(self.log.last().expect("just pushed"))
    }

    fn monitor(&self, rows: &[Vec<f64>], layout: Option<&PixelMapping>) -> Result<Objective> {
        let take = rows.len().min(MONITOR_ROWS);
        let mut rng = stream(self.config.seed, Domain::Binarize, 0);
        let bits = binarize_rows(&rows[..take], layout, &mut rng)?;
        let small = self.params.num_visible().min(self.params.num_hidden());
        if small <= EXACT_MONITOR_LIMIT {
            return Ok(Objective::ExactNll(self.params.exact_nll(&bits)?));
        }
        Ok(Objective::PseudoNll(pseudo_nll(&self.params, &bits, &mut rng)?))
    }

    pub fn into_parts(self) -> (RbmParams, TrainLog) {
        (self.params, self.log)
    }
}

/// Stochastic pseudo-likelihood proxy: `-D · mean ln p(v_i | v_{-i})` with one
/// random coordinate `i` per example.
pub fn pseudo_nll<R: Rng + ?Sized>(params: &RbmParams, data: &[Vec<bool>], rng: &mut R) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("data", "at least one example is required"));
    }
    let d = params.num_visible();
    let mut total = 0.0;
    for v in data {
        let i = rng.random_range(0..d);
        let here = params.log_unnormalized_marginal(v)?;
        let mut flipped = v.clone();
        flipped[i] = !flipped[i];
        let there = params.log_unnormalized_marginal_unchecked(&flipped);
        total -= math::ln(sigmoid(here - there)).max(-1e300);
    }
    Ok(d as f64 * total / data.len() as f64)
}

/// Trains from the default initialisation for `config.epochs` epochs.
pub fn train(
    rows: &[Vec<f64>],
    layout: Option<&PixelMapping>,
    config: &TrainConfig,
) -> Result<(RbmParams, TrainLog)> {
    let d = match (rows.first(), layout) {
        (None, _) => return Err(Error::invalid("dataset", "no training rows")),
        (Some(_), Some(m)) => m.num_units(),
        (Some(r), None) => r.len(),
    };
    let mut trainer = Trainer::new(d, None, config.clone())?;
    for _ in 0..config.epochs {
        trainer.run_epoch(rows, layout)?;
    }
    Ok(trainer.into_parts())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::ConnectivityMask;
    use alloc::vec;

    fn patterns() -> Vec<Vec<bool>> {
        let rows = ["11110000", "00001111", "11001100", "00110011"];
        rows.iter().map(|r| r.chars().map(|c| c == '1').collect()).collect()
    }

    fn as_rows(bits: &[Vec<bool>]) -> Vec<Vec<f64>> {
        bits.iter()
            .map(|r| r.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    fn small_config(phase: NegativePhase) -> TrainConfig {
        TrainConfig {
            num_hidden: 6,
            batch_size: 4,
            num_chains: 20,
            epochs: 1,
            learning_rate: 0.05,
            negative_phase: phase,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn binarize_examples() {
        let mut rng = stream(1, Domain::Binarize, 0);
        for _ in 0..100 {
            assert_eq!(binarize(&[0.0, 1.0], &mut rng).unwrap(), vec![false, true]);
        }
        let n = 100_000;
        let ones = (0..n).filter(|_| binarize(&[0.5], &mut rng).unwrap()[0]).count();
        let freq = ones as f64 / n as f64;
        assert!((0.49..=0.51).contains(&freq));
        assert!(binarize(&[1.5], &mut rng).is_err());
        assert!(binarize(&[-0.1], &mut rng).is_err());
    }

    #[test]
    fn zero_learning_rate_keeps_params_but_moves_chains() {
        let mut config = small_config(NegativePhase::SimulatedPhysical);
        config.learning_rate = 0.0;
        let mut t = Trainer::new(8, None, config).unwrap();
        let before = t.params().clone();
        let chains = t.chains().to_vec();
        t.update(&patterns()).unwrap();
        assert_eq!(t.params(), &before);
        assert_ne!(t.chains(), &chains[..]);
    }

    #[test]
    fn balanced_statistics_leave_params_unchanged() {
        // Zero model and a batch holding every visible state once: the data
        // statistics equal the exact model statistics.
        let p = RbmParams::zeros(2, 2).unwrap();
        let mut q = p.clone();
        let data: Vec<Vec<bool>> = (0..4u8).map(|i| vec![i & 1 == 1, i & 2 == 2]).collect();
        let config = small_config(NegativePhase::ExactEnumeration);
        let mut mgr = SnapshotManager::new(ConstraintSpec::unconstrained(), 0).unwrap();
        let g = pcd_update(&mut q, &data, &mut [], &config, &mut mgr, &mut stream(0, Domain::Chain, 0)).unwrap();
        assert!(g.max_abs() < 1e-15);
        assert_eq!(q, p);
    }

    #[test]
    fn exact_update_reproduces_exact_gradient_step() {
        let p = RbmParams::random(8, 6, 0.3, 0.3, &mut stream(4, Domain::Init, 0)).unwrap();
        let data = patterns();
        let config = small_config(NegativePhase::ExactEnumeration);
        let mut q = p.clone();
        let mut mgr = SnapshotManager::new(ConstraintSpec::unconstrained(), 0).unwrap();
        pcd_update(&mut q, &data, &mut [], &config, &mut mgr, &mut stream(0, Domain::Chain, 0)).unwrap();
        let mut want = p.clone();
        want.add_scaled(&p.exact_grad(&data).unwrap(), config.learning_rate).unwrap();
        let diff = q.iter_all().zip(want.iter_all()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 1e-12);
    }

    #[test]
    fn training_is_deterministic() {
        let rows = as_rows(&patterns());
        let mut config = small_config(NegativePhase::SimulatedPhysical);
        config.constraint = ConstraintSpec::unconstrained().with_noise(0.1, 0.1);
        config.epochs = 5;
        let (a, la) = train(&rows, None, &config).unwrap();
        let (b, lb) = train(&rows, None, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        config.seed = 1;
        let (c, _) = train(&rows, None, &config).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_rate_epoch_returns_initial_params() {
        let rows = as_rows(&patterns());
        let mut config = small_config(NegativePhase::PlainGibbs);
        config.learning_rate = 0.0;
        let initial = Trainer::new(8, None, config.clone()).unwrap().params().clone();
        let (p, log) = train(&rows, None, &config).unwrap();
        assert_eq!(p, initial);
        assert_eq!(log.records().len(), 1);
        assert!(matches!(log.records()[0].objective, Objective::ExactNll(_)));
    }

    #[test]
    fn constraints_hold_after_every_update_and_snapshots_track_updates() {
        let mask = ConnectivityMask::random_drop(8, 6, 0.5, 3).unwrap();
        let spec = ConstraintSpec::unconstrained()
            .with_noise(0.2, 0.2)
            .with_cap(0.3)
            .with_mask(mask);
        let mut config = small_config(NegativePhase::SimulatedPhysical);
        config.constraint = spec.clone();
        config.learning_rate = 0.5;
        let mut t = Trainer::new(8, None, config).unwrap();
        for step in 1..=40u64 {
            t.update(&patterns()).unwrap();
            assert!(spec.is_satisfied_by(t.params()));
            assert_eq!(t.snapshot_redraws(), step);
            assert_eq!(t.update_count(), step);
        }
    }

    #[test]
    fn exact_gradient_ascent_decreases_nll_monotonically() {
        let data = patterns();
        let mut p = RbmParams::random(8, 6, 0.01, 0.0, &mut stream(9, Domain::Init, 0)).unwrap();
        let mut last = p.exact_nll(&data).unwrap();
        for _ in 0..500 {
            let g = p.exact_grad(&data).unwrap();
            p.add_scaled(&g, 0.01).unwrap();
            let nll = p.exact_nll(&data).unwrap();
            assert!(nll <= last + 1e-12);
            last = nll;
        }
    }

    #[test]
    fn non_finite_update_is_reported() {
        let mut config = small_config(NegativePhase::ExactEnumeration);
        config.learning_rate = f64::MAX;
        let mut t = Trainer::new(8, None, config).unwrap();
        let err = (0..10).find_map(|_| t.update(&patterns()).err()).unwrap();
        assert!(matches!(err, Error::NonFinite { .. }), "{err:?}");
    }

    #[test]
    fn pseudo_nll_is_positive_and_finite() {
        let p = RbmParams::random(8, 6, 0.5, 0.5, &mut stream(3, Domain::Init, 0)).unwrap();
        let v = pseudo_nll(&p, &patterns(), &mut stream(3, Domain::Binarize, 0)).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }
}
