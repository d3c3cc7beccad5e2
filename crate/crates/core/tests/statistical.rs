use prbm_core::eval::{ais_log_z, sample_grid, AisConfig};
use prbm_core::rng::{stream, Domain};
use prbm_core::sampler::{self, init_chains};
use prbm_core::trainer::negative_stats;
use prbm_core::{ConstraintSpec, RbmParams, Stats};
use oracle::normal;

mod oracle {
    use rand::Rng;

    /// Box-Muller, so the oracle does not share the library's Gaussian sampler.
    pub fn normal<R: Rng>(rng: &mut R) -> f64 {
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

fn oracle_model() -> RbmParams {
    RbmParams::random(6, 6, 1.0, 0.5, &mut stream(2024, Domain::Init, 0)).unwrap()
}

fn visible_marginal(p: &RbmParams) -> Vec<f64> {
    let d = p.num_visible();
    let log_z = p.exact_log_z().unwrap();
    (0..1usize << d)
        .map(|s| {
            let v: Vec<bool> = (0..d).map(|i| s >> i & 1 == 1).collect();
            (p.log_unnormalized_marginal(&v).unwrap() - log_z).exp()
        })
        .collect()
}

fn index_of(v: &[bool]) -> usize {
    v.iter().enumerate().map(|(i, &b)| (b as usize) << i).sum()
}

fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn ais_errors(betas: usize, seeds: u64) -> (Vec<f64>, Vec<f64>, f64) {
    let p = oracle_model();
    let exact = p.exact_log_z().unwrap();
    let config = AisConfig {
        num_betas: betas,
        ..AisConfig::default()
    };
    let (mut est, mut err) = (Vec::new(), Vec::new());
    for seed in 0..seeds {
        let e = ais_log_z(&p, &config, &mut stream(seed, Domain::AisParticle, 99)).unwrap();
        est.push(e.log_z);
        err.push(e.std_err);
    }
    (est, err, exact)
}

#[test]
fn ais_spread_matches_reported_error_and_improves_with_more_betas() {
    let (est, err, exact) = ais_errors(10_000, 10);
    let mean = est.iter().sum::<f64>() / est.len() as f64;
    let sd = (est.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (est.len() - 1) as f64).sqrt();
    let reported = err.iter().sum::<f64>() / err.len() as f64;
    assert!(sd <= 2.0 * reported && reported <= 2.0 * sd, "spread {sd} vs reported {reported}");

    assert!(mean <= exact + reported, "mean {mean} exceeds exact {exact} + {reported}");

    let (coarse, _, _) = ais_errors(100, 10);
    let mae = |xs: &[f64]| xs.iter().map(|x| (x - exact).abs()).sum::<f64>() / xs.len() as f64;
    assert!(mae(&est) <= mae(&coarse), "fine {} coarse {}", mae(&est), mae(&coarse));
}

#[test]
fn sample_grid_final_states_follow_the_visible_marginal() {
    let p = RbmParams::from_parts(2, 2, vec![1.5, -1.0, 0.5, 2.0], vec![-0.5, 0.3], vec![0.2, -0.7]).unwrap();
    let exact = visible_marginal(&p);
    let set = sample_grid(&p, 10_000, 200, &mut stream(5, Domain::SampleGrid, 0)).unwrap();
    let mut counts = vec![0.0; 4];
    for c in &set.final_states {
        counts[index_of(&c.v)] += 1.0 / set.final_states.len() as f64;
    }
    let tv = total_variation(&counts, &exact);
    assert!(tv < 0.03, "tv {tv}");
}

#[test]
fn physical_samples_follow_the_noise_averaged_marginal() {
    let p = RbmParams::from_parts(2, 2, vec![1.0, -1.5, 2.0, 0.5], vec![0.4, -0.6], vec![-0.3, 0.8]).unwrap();
    let spec = ConstraintSpec::unconstrained().with_noise(0.0, 0.5);

    let mut oracle = vec![0.0; 4];
    let draws = 20_000;
    let mut rng = stream(77, Domain::NoiseDraw, 0);
    for _ in 0..draws {
        let b: Vec<f64> = p.visible_bias().iter().map(|x| x + 0.5 * normal(&mut rng)).collect();
        let c: Vec<f64> = p.hidden_bias().iter().map(|x| x + 0.5 * normal(&mut rng)).collect();
        let noisy = RbmParams::from_parts(2, 2, p.weights().to_vec(), b, c).unwrap();
        for (o, q) in oracle.iter_mut().zip(visible_marginal(&noisy)) {
            *o += q / draws as f64;
        }
    }

    let snap = sampler::make_snapshot(&p, &spec, &mut stream(1, Domain::Snapshot, 0)).unwrap();
    let mut chains = init_chains(2, 2, 2000, 3);
    let mut rng = stream(4, Domain::Epoch, 0);
    let mut counts = vec![0.0; 4];
    let mut total = 0.0;
    for round in 0..40 {
        sampler::physical_sample(&snap, &mut chains, 15, &mut rng).unwrap();
        if round >= 5 {
            for c in &chains {
                counts[index_of(&c.v)] += 1.0;
                total += 1.0;
            }
        }
    }
    counts.iter_mut().for_each(|x| *x /= total);
    let tv = total_variation(&counts, &oracle);
    assert!(tv < 0.03, "tv {tv}");
}

#[test]
fn persistent_chain_statistics_converge_to_model_expectations() {
    let p = RbmParams::random(3, 3, 1.0, 0.5, &mut stream(11, Domain::Init, 0)).unwrap();
    let exact = p.exact_model_stats().unwrap();
    let mut chains = init_chains(3, 3, 100, 12);
    let mut rng = stream(13, Domain::Epoch, 0);
    sampler::advance_chains(&p, &mut chains, 20, &mut rng).unwrap();
    let mut acc = Stats::zeros(3, 3);
    let steps = 100;
    for _ in 0..steps {
        sampler::advance_chains(&p, &mut chains, 1, &mut rng).unwrap();
        acc.add_scaled(&negative_stats(3, 3, &chains).unwrap(), 1.0 / steps as f64);
    }
    let norm = |xs: Vec<f64>| xs.iter().map(|x| x * x).sum::<f64>().sqrt();
    let rel = norm(acc.difference(&exact).iter().collect()) / norm(exact.iter().collect());
    assert!(rel < 0.05, "relative error {rel}");
}
