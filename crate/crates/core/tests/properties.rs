//! Randomized invariants of the codec, tables, bound, Bussgang statistics and
//! OFDM chain.

use ccm_core::bound::{pb_bound, pep, Averaging, BoundConfig, NoiseStats};
use ccm_core::bussgang::{bussgang_closed_form, bussgang_numeric, characterize};
use ccm_core::codec::{encode_states, next_state, CcmParams, EncoderState};
use ccm_core::conjugation::{ConjugationTable, MIN_GAP};
use ccm_core::led::{LedTransfer, ShiftedNonlinearity};
use ccm_core::ofdm::{Interleaver, OfdmModem, OfdmParams};
use ccm_core::optimizer::random_feasible_table;
use ccm_core::sim::{run_link, LinkConfig, Scheme};
use num_complex::Complex64;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = CcmParams> {
    (prop::array::uniform6(0u8..=1), 3u32..=10).prop_map(|(t, q)| CcmParams::new(t, q).unwrap())
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_is_linear_over_gf2(p in params(), a in any::<u32>(), b in any::<u32>(), x in 0u8..=1, y in 0u8..=1) {
        let mask = (1u32 << p.q()) - 1;
        let (a, b) = (EncoderState(a & mask), EncoderState(b & mask));
        prop_assert_eq!(
            next_state(a ^ b, x ^ y, &p),
            next_state(a, x, &p) ^ next_state(b, y, &p)
        );
    }

    #[test]
    fn encoded_blocks_superpose(p in params(), u in prop::collection::vec(0u8..=1, 1..200), seed in any::<u64>()) {
        let v: Vec<u8> = u.iter().enumerate().map(|(i, _)| ((seed >> (i % 64)) & 1) as u8).collect();
        let w: Vec<u8> = u.iter().zip(&v).map(|(a, b)| a ^ b).collect();
        let (su, sv, sw) = (encode_states(&u, &p), encode_states(&v, &p), encode_states(&w, &p));
        for k in 0..u.len() {
            prop_assert_eq!(sw[k], su[k] ^ sv[k]);
        }
    }

    #[test]
    fn tables_accept_exactly_the_monotone_vectors(raw in prop::collection::vec(-0.2f64..1.2, 1..40)) {
        let mut samples = vec![0.0];
        samples.extend(&raw);
        samples.push(1.0);
        let p = samples.len() - 1;
        let valid = samples.windows(2).all(|w| w[1] - w[0] >= MIN_GAP)
            && samples[1..p].iter().all(|&s| s > 0.0 && s < 1.0);
        prop_assert_eq!(ConjugationTable::new(samples).is_ok(), valid);
    }

    #[test]
    fn sorted_interiors_make_valid_tables(mut raw in prop::collection::vec(0.01f64..0.99, 1..40)) {
        raw.sort_by(f64::total_cmp);
        for k in 1..raw.len() {
            raw[k] = raw[k].max(raw[k - 1] + 1e-4);
        }
        prop_assume!(*raw.last().unwrap() < 1.0 - MIN_GAP);
        let t = ConjugationTable::from_interior(&raw).unwrap();
        for k in 0..=100 {
            let z = k as f64 / 100.0;
            let g = t.eval(z).unwrap();
            prop_assert!((0.0..=1.0).contains(&g));
            if k > 0 {
                prop_assert!(g >= t.eval((k - 1) as f64 / 100.0).unwrap());
            }
        }
    }

    #[test]
    fn pep_falls_with_distance_and_rises_with_noise(
        d1 in 0.0f64..6.0, dd in 0.0f64..3.0, c in 0.05f64..2.0,
        eta in 0.0f64..0.5, n1 in 1e-4f64..0.5, dn in 0.0f64..0.5,
    ) {
        let quiet = NoiseStats::new(c, eta, n1).unwrap();
        let loud = NoiseStats::new(c, eta, n1 + dn).unwrap();
        prop_assert!(pep(d1 + dd, &quiet) <= pep(d1, &quiet));
        prop_assert!(pep(d1, &quiet) <= pep(d1, &loud));
        prop_assert!(pep(d1, &quiet) <= 0.5);
    }

    #[test]
    fn distortion_power_is_never_negative(
        a1 in 0.1f64..2.0, a3 in -1.0f64..1.0, a5 in -0.3f64..0.3,
        lambda in 0.1f64..4.0, var in 0.01f64..4.0,
    ) {
        let snl = ShiftedNonlinearity::odd(vec![0.0, a1, 0.0, a3, 0.0, a5], lambda, a1 * lambda);
        let closed = bussgang_closed_form(&snl, var).unwrap();
        let numeric = bussgang_numeric(&snl, var).unwrap();
        prop_assert!(closed.sigma_eta_sq >= 0.0);
        prop_assert!(numeric.sigma_eta_sq >= 0.0);
        prop_assert!(closed.ez2 >= closed.c * closed.c * var * (1.0 - 1e-9));
    }

    #[test]
    fn led_distortion_is_never_negative(ibo in -10.0f64..50.0, predistorted in any::<bool>()) {
        let led = if predistorted { LedTransfer::predistorted_reference() } else { LedTransfer::cubic_reference() };
        let (_, stats) = characterize(&led, ibo, 254.0 / 256.0).unwrap();
        prop_assert!(stats.sigma_eta_sq >= 0.0);
        prop_assert!(stats.c > 0.0);
    }

    #[test]
    fn ofdm_round_trip(seed in any::<u64>(), log_n in 3u32..9, blocks in 1usize..4) {
        let n = 1usize << log_n;
        let m = blocks * (n / 2 - 1);
        let x: Vec<Complex64> = (0..m)
            .map(|i| {
                let h = (seed ^ i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                Complex64::new((h >> 40) as f64 / 2f64.powi(24) - 0.5, (h & 0xFF_FFFF) as f64 / 2f64.powi(24) - 0.5)
            })
            .collect();
        let modem = OfdmModem::new(OfdmParams::new(n, m).unwrap());
        let pi = Interleaver::new(m, seed).unwrap();
        let y = modem.demodulate(&modem.modulate(&x, &pi).unwrap(), &pi).unwrap();
        let scale = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in x.iter().zip(&y) {
            prop_assert!((a - b).norm() <= 1e-9 * scale);
        }
    }

    #[test]
    fn interleaver_is_a_bijection(m in 1usize..2000, seed in any::<u64>()) {
        let pi = Interleaver::new(m, seed).unwrap();
        let x: Vec<usize> = (0..m).collect();
        let y = pi.interleave(&x).unwrap();
        let mut sorted = y.clone();
        sorted.sort_unstable();
        prop_assert_eq!(&sorted, &x);
        prop_assert_eq!(pi.deinterleave(&y).unwrap(), x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn bound_reduction_ignores_thread_count(seed in any::<u64>(), exact in any::<bool>()) {
        let q = 4;
        let averaging = if exact { Averaging::Exact } else { Averaging::Subsampled { count: 200, seed } };
        let cfg = BoundConfig::new(CcmParams::multi_tent(q).unwrap(), 8, averaging);
        let table = random_feasible_table(16, MIN_GAP, seed).unwrap();
        let noise = NoiseStats::new(0.3, 0.001, 0.004).unwrap();
        let one = pool(1).install(|| pb_bound(&table, &noise, &cfg));
        let four = pool(4).install(|| pb_bound(&table, &noise, &cfg));
        prop_assert_eq!(one.to_bits(), four.to_bits());
    }

    #[test]
    fn link_counts_ignore_thread_count(seed in any::<u64>()) {
        let mut cfg = LinkConfig::new(Scheme::Ccm, LedTransfer::cubic_reference(), 0.0);
        cfg.n = 32;
        cfg.m = 15 * 8;
        cfg.noise_seed = seed;
        cfg.stop.max_bits = 40 * cfg.m as u64;
        let one = pool(1).install(|| run_link(&cfg, 3.0)).unwrap();
        let four = pool(4).install(|| run_link(&cfg, 3.0)).unwrap();
        prop_assert_eq!(one, four);
    }
}
