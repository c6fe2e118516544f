use proptest::prelude::*;
use smc_genealogy::genealogy::{time_change_sandwich_holds, CountClasses};
use smc_genealogy::kingman;
use smc_genealogy::partition;
use smc_genealogy::rng::seeded;
use smc_genealogy::{
    c_n_stat, d_n_stat, offspring_counts, time_change, trace_genealogy, transition_probability,
    Ancestry, AncestorVector, CoalescenceSeries, Partition, PermutePolicy, Resampler, Scheme,
    WeightVector,
};

fn weights(max_len: usize) -> impl Strategy<Value = WeightVector> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64, 1e-9..1e-6f64], 1..max_len)
        .prop_filter("needs positive mass", |w| w.iter().sum::<f64>() > 0.0)
        .prop_map(|w| WeightVector::from_unnormalized(w).unwrap())
}

fn scheme() -> impl Strategy<Value = Scheme> {
    prop::sample::select(Scheme::ALL.to_vec())
}

fn ancestry(max_particles: usize, max_horizon: usize) -> impl Strategy<Value = Ancestry> {
    (2..max_particles, 1..max_horizon).prop_flat_map(|(n, t)| {
        prop::collection::vec(prop::collection::vec(0..n as u32, n), t).prop_map(|rows| {
            let rows: Vec<_> = rows.into_iter().map(|r| AncestorVector::new(r).unwrap()).collect();
            Ancestry::from_rows(&rows).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn offspring_counts_sum_to_n(w in weights(40), s in scheme(), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let mut resampler = Resampler::new(s, PermutePolicy::Auto);
        let nu = offspring_counts(&resampler.resample(&w, &mut rng));
        prop_assert_eq!(nu.as_slice().iter().map(|&c| c as usize).sum::<usize>(), w.len());
        for (&c, &wi) in nu.as_slice().iter().zip(w.as_slice()) {
            if wi == 0.0 {
                prop_assert_eq!(c, 0);
            }
        }
    }

    #[test]
    fn residual_keeps_floors(w in weights(40), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = w.len() as f64;
        let nu = offspring_counts(&Resampler::new(Scheme::Residual, PermutePolicy::On).resample(&w, &mut rng));
        for (&c, &wi) in nu.as_slice().iter().zip(w.as_slice()) {
            // Tolerate representation error right at an integer boundary.
            prop_assert!(c as f64 >= (n * wi - 1e-9).floor());
        }
    }

    #[test]
    fn systematic_stays_next_to_expectation(w in weights(40), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = w.len() as f64;
        let nu = offspring_counts(&Resampler::new(Scheme::Systematic, PermutePolicy::On).resample(&w, &mut rng));
        for (&c, &wi) in nu.as_slice().iter().zip(w.as_slice()) {
            let e = n * wi;
            prop_assert!(c as f64 >= (e - 1e-9).floor() && c as f64 <= (e + 1e-9).ceil(), "count {} for N w = {}", c, e);
        }
    }

    #[test]
    fn stratified_stays_within_two_of_expectation(w in weights(40), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = w.len() as f64;
        let nu = offspring_counts(&Resampler::new(Scheme::Stratified, PermutePolicy::Off).resample(&w, &mut rng));
        for (&c, &wi) in nu.as_slice().iter().zip(w.as_slice()) {
            prop_assert!((c as f64 - n * wi).abs() < 2.0 + 1e-9);
        }
    }

    #[test]
    fn coalescence_bounds(a in ancestry(30, 20)) {
        let series = CoalescenceSeries::from_ancestry(&a);
        prop_assert_eq!(series.invariant_violations(), 0);
        for r in 1..=a.horizon() {
            let nu = offspring_counts(&AncestorVector::new(a.reverse(r).to_vec()).unwrap());
            prop_assert_eq!(c_n_stat(&nu).unwrap(), series.c(r));
            prop_assert_eq!(d_n_stat(&nu).unwrap(), series.d(r));
        }
    }

    #[test]
    fn time_change_sandwich(a in ancestry(12, 60), frac in 0.001..1.0f64) {
        let series = CoalescenceSeries::from_ancestry(&a);
        prop_assume!(series.total() > 0.0);
        let t = frac * series.total();
        let tau = time_change(&series, t).unwrap();
        prop_assert!(time_change_sandwich_holds(&series, t, tau));
        prop_assert!(tau == 1 || series.cumulative(tau - 1) < t);
    }

    #[test]
    fn traces_coarsen_monotonically(a in ancestry(20, 40), n in 1usize..8, seed in any::<u64>()) {
        use rand::seq::index::sample;
        let n = n.min(a.particles());
        let leaves = sample(&mut seeded(seed), a.particles(), n).into_vec();
        let trace = trace_genealogy(&a, &leaves).unwrap();
        prop_assert!(trace.is_monotone());
        let mut blocks = n;
        for g in 0..=a.horizon() {
            let b = trace.num_blocks_at(g).unwrap();
            prop_assert!(b <= blocks);
            blocks = b;
        }
        if let Some(m) = trace.mrca() {
            prop_assert_eq!(trace.num_blocks_at(m), Some(1));
            prop_assert!(m == 0 || trace.num_blocks_at(m - 1).unwrap() > 1);
        }
    }

    #[test]
    fn transition_rows_are_stochastic(a in ancestry(40, 2), leaves in 1usize..5) {
        let nu = offspring_counts(&AncestorVector::new(a.reverse(1).to_vec()).unwrap());
        let classes = CountClasses::new(&nu);
        for xi in partition::enumerate(leaves).iter().filter(|xi| xi.num_blocks() <= nu.particles()) {
            let row: f64 = xi.coarsenings().iter().map(|eta| classes.transition_probability(xi, eta).unwrap()).sum();
            prop_assert!((row - 1.0).abs() < 1e-10);
        }
        let pair = transition_probability(&nu, &Partition::singletons(2), &Partition::single_block(2)).unwrap();
        prop_assert!((pair - c_n_stat(&nu).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn partition_display_round_trips(n in 1usize..7, pick in any::<prop::sample::Index>()) {
        let all = partition::enumerate(n);
        let p = &all[pick.index(all.len())];
        prop_assert_eq!(&p.to_string().parse::<Partition>().unwrap(), p);
    }

    #[test]
    fn kingman_paths_lose_one_block_per_jump(n in 1usize..30, seed in any::<u64>()) {
        let r = kingman::simulate_coalescent(n, &mut seeded(seed)).unwrap();
        prop_assert_eq!(r.path.len(), n);
        prop_assert!(r.waiting_times.iter().all(|&w| w > 0.0));
        prop_assert!(r.partition_at(r.height).is_single_block());
    }
}

#[test]
fn enumeration_is_strictly_descending() {
    for n in 1..=6 {
        let all = partition::enumerate(n);
        assert!(all.windows(2).all(|w| w[0] > w[1]));
    }
}
