mod common;

use mg1li::model;
use mg1li::numerics;
use nalgebra::DMatrix;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn random_families_satisfy_invariants(seed in any::<u64>(), n in 2usize..12) {
        let m = common::random_model(seed);
        let bad = common::check_invariants(&m, n, seed % 4 == 0);
        prop_assert!(bad.is_empty(), "seed {seed}, N = {n}: {bad:?}");
    }

    #[test]
    fn truncation_keeps_blocks_below_n(seed in any::<u64>(), n in 1usize..20) {
        let m = common::random_model(seed);
        let tm = model::truncate(&m, n).unwrap();
        for k in -1..n as isize {
            prop_assert_eq!(tm.a_ref(k), &m.a(k));
        }
        let lumped = m.a_tail_from(n as isize).unwrap();
        prop_assert!((tm.a_ref(n as isize) - lumped).amax() == 0.0);
    }

    #[test]
    fn gth_handles_random_stochastic(seed in any::<u64>(), dim in 1usize..30) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut p = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(0.0..1.0));
        for mut row in p.row_iter_mut() {
            let s = row.sum();
            row /= s;
        }
        let v = numerics::stationary_vector(&p).unwrap();
        prop_assert!((v.as_row() * &p - v.as_row()).amax() <= 1e-12);
        prop_assert!((v.as_row().sum() - 1.0).abs() <= 1e-14);
    }
}

#[test]
fn generator_is_deterministic() {
    let a = common::random_model(7);
    let b = common::random_model(7);
    assert_eq!(a.to_file().a_blocks, b.to_file().a_blocks);
}

