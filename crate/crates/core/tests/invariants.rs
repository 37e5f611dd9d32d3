use lmcf_core::field::{resample_spectral, GridSpec, PeriodicScalarField};
use lmcf_core::flow::{decode_checkpoint, encode_checkpoint, FlowConfig, FlowEngine};
use lmcf_core::initial::random_bandlimited;
use proptest::prelude::*;

fn line(n: usize) -> GridSpec {
    GridSpec::unit(1, n).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn checkpoints_round_trip_bit_exactly(
        values in prop::collection::vec(-1.0f64..1.0, 8),
        t in 0.0f64..10.0,
        kappa in -2.0f64..2.0,
    ) {
        let u = PeriodicScalarField::new(line(8), values).unwrap();
        let back = decode_checkpoint(&encode_checkpoint(&u, t, kappa)).unwrap();
        prop_assert_eq!(back.t.to_bits(), t.to_bits());
        prop_assert_eq!(back.kappa.to_bits(), kappa.to_bits());
        prop_assert_eq!(back.u.values(), u.values());
    }

    #[test]
    fn resampling_keeps_grid_values(seed in 0u64..1000, modes in 1usize..7) {
        let u = random_bandlimited(&line(16), modes, seed);
        let fine = resample_spectral(&u, &[64]).unwrap();
        for (i, v) in u.values().iter().enumerate() {
            prop_assert!((fine.values()[4 * i] - v).abs() < 1e-12);
        }
    }

    #[test]
    fn small_data_flow_is_deterministic_and_obeys_the_maximum_principle(
        seed in 0u64..1000,
    ) {
        let g = line(16);
        let u0 = random_bandlimited(&g, 3, seed).scaled(1e-3);
        let engine = FlowEngine::new(FlowConfig::new(g)).unwrap();
        let run = || {
            let mut s = engine.initial_state(u0.clone()).unwrap();
            for _ in 0..20 {
                s = engine.step(&s).unwrap();
            }
            s
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(a.u().values(), b.u().values());
        prop_assert!(a.u().max() <= u0.max() + 1e-15);
        prop_assert!(a.u().min() >= u0.min() - 1e-15);
    }
}
