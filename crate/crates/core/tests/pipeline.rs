use smc_genealogy::kingman::{self, sample_height};
use smc_genealogy::model::OuModelConfig;
use smc_genealogy::rng::seeded;
use smc_genealogy::{
    bootstrap_model, rescaled_height, run_smc, simulate_ou_trajectory, trace_genealogy, tree_height,
    CoalescenceSeries, Height, NeutralModel, OuParams, PermutePolicy, Retention, Scheme, SmcConfig,
};

#[test]
fn ou_filter_genealogy_end_to_end() {
    let n_particles = 64;
    let horizon = 50 * n_particles;
    let params = OuParams::default();
    let traj = simulate_ou_trajectory(params, horizon, 11).unwrap();
    let model = bootstrap_model(
        OuModelConfig {
            params,
            observations: traj.observations,
        },
        horizon,
    )
    .unwrap();
    for scheme in Scheme::ALL {
        let config = SmcConfig::new(n_particles, scheme).with_retention(Retention::AncestorsOnly);
        let run = run_smc(&model, &config, 5).unwrap();
        assert_eq!(run.meta().permuted, scheme != Scheme::Multinomial);
        let ancestry = run.into_ancestry();
        let series = CoalescenceSeries::from_ancestry(&ancestry);
        assert_eq!(series.invariant_violations(), 0);
        let leaves: Vec<usize> = (0..8).collect();
        let trace = trace_genealogy(&ancestry, &leaves).unwrap();
        assert!(trace.is_monotone());
        let Height::Reached(g) = tree_height(&trace) else {
            panic!("{scheme}: no MRCA within {horizon} generations");
        };
        assert!(g > 0 && g < horizon);
        let rescaled = rescaled_height(&trace, &series).value().unwrap();
        assert!(rescaled > 0.0 && rescaled.is_finite());
    }
}

#[test]
fn neutral_multinomial_pair_merges_like_kingman() {
    // With equal weights each generation merges a pair with probability 1/N,
    // so rescaled pair heights are close to Exp(1).
    let n_particles = 32;
    let model = NeutralModel::new(40 * n_particles).unwrap();
    let config = SmcConfig::new(n_particles, Scheme::Multinomial)
        .with_permute(PermutePolicy::Off)
        .with_retention(Retention::AncestorsOnly);
    let reps = 400;
    let mut total = 0.0;
    for seed in 0..reps {
        let ancestry = run_smc(&model, &config, seed).unwrap().into_ancestry();
        let series = CoalescenceSeries::from_ancestry(&ancestry);
        let trace = trace_genealogy(&ancestry, &[0, 1]).unwrap();
        total += rescaled_height(&trace, &series).value().unwrap();
    }
    let mean = total / reps as f64;
    // Exp(1) mean with a standard error of 0.05.
    assert!((mean - 1.0).abs() < 0.25, "mean pair height {mean}");
}

#[test]
fn kingman_height_sampler_agrees_with_moments() {
    let mut rng = seeded(9);
    let draws = 100_000;
    let n = 10;
    let (mean, var) = kingman::height_moments(n);
    let sample: Vec<f64> = (0..draws).map(|_| sample_height(n, &mut rng)).collect();
    let m = sample.iter().sum::<f64>() / draws as f64;
    let v = sample.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (draws - 1) as f64;
    assert!((m - mean).abs() < 5.0 * (var / draws as f64).sqrt());
    assert!((v / var - 1.0).abs() < 0.05);
}
