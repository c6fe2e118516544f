use smc_genealogy::oracle::{
    brute_force_transition, compositions, enumerate_consistent_ancestors, multinomial_coefficient,
    transition_sweep,
};
use smc_genealogy::{c_n_stat, partition, transition_probability, Partition};

#[test]
fn analytic_matches_enumeration_up_to_five_particles() {
    let (reports, rows) = transition_sweep(5, 3).unwrap();
    let worst = reports.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
    assert!(worst <= 1e-12, "largest deviation {worst}");
    let worst_row = rows.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    assert!(worst_row <= 1e-10, "largest row-sum deviation {worst_row}");
    assert!(reports.len() > 1000);
}

#[test]
fn four_lineages_at_six_particles() {
    let states = partition::enumerate(4);
    for nu in compositions(6).into_iter().step_by(7) {
        for xi in &states {
            for eta in &states {
                let a = transition_probability(&nu, xi, eta).unwrap();
                let b = brute_force_transition(&nu, xi, eta).unwrap();
                assert!((a - b).abs() <= 1e-12, "{:?} {xi} -> {eta}: {a} vs {b}", nu.as_slice());
            }
        }
    }
}

#[test]
fn enumeration_sizes_and_pair_merges() {
    for n in 1..=5 {
        for nu in compositions(n) {
            let list = enumerate_consistent_ancestors(&nu).unwrap();
            assert_eq!(list.len() as u128, multinomial_coefficient(nu.as_slice()));
            if n >= 2 {
                let merge = brute_force_transition(&nu, &Partition::singletons(2), &Partition::single_block(2)).unwrap();
                assert_eq!(merge, c_n_stat(&nu).unwrap());
            }
        }
    }
}
