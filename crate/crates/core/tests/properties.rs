use proptest::prelude::*;

use shiftbuf::data::{g2p, read_matrix, write_matrix, Dictionary, PhonemeInventory};
use shiftbuf::eval::{mcd, mcd_dtw, memory_significance};
use shiftbuf::model::io::{read_params, write_params};
use shiftbuf::model::{
    attention_step, encode_sentence, gmm_attention, synthesize, AttentionState, Buffer, FeatureSequence, HyperParams,
    ModelParams, SpeakerEmbedding, SynthesisConfig,
};
use shiftbuf::Matrix;

fn buffer_strategy() -> impl Strategy<Value = (Buffer, Vec<f64>)> {
    (1usize..6, 1usize..6).prop_flat_map(|(d, k)| {
        (prop::collection::vec(-1e3..1e3f64, d * k), prop::collection::vec(-1e3..1e3f64, d))
            .prop_map(move |(data, u)| (Buffer::from_flat(d, k, data), u))
    })
}

fn sequence(rows: usize, cols: usize) -> impl Strategy<Value = FeatureSequence> {
    prop::collection::vec(-5.0..5.0f64, rows * cols)
        .prop_map(move |v| FeatureSequence::new(Matrix::from_vec(rows, cols, v), 5.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn shift_insert_copies_columns((buf, u) in buffer_strategy()) {
        let mut after = buf.clone();
        after.shift_insert(&u);
        prop_assert_eq!(after.column(0), u.as_slice());
        for j in 1..buf.capacity() {
            prop_assert_eq!(after.column(j), buf.column(j - 1));
        }
    }

    #[test]
    fn mixture_is_monotone_and_normalised(
        raw in prop::collection::vec(-30.0..30.0f64, 9),
        mu in prop::collection::vec(0.0..50.0f64, 3),
        l in 1usize..12,
    ) {
        let (alpha, mu_new, detail) = gmm_attention(&raw, &mu, l);
        prop_assert!(mu_new.iter().zip(&mu).all(|(a, b)| a > b));
        prop_assert!(alpha.iter().all(|a| *a >= 0.0));
        let s: f64 = detail.gamma_prime.iter().sum();
        prop_assert!((s - 1.0).abs() <= 1e-9);
        prop_assert!(detail.sigma_sq.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn attention_step_on_random_models(seed in 0u64..10_000, ph in prop::collection::vec(0usize..10, 1..8)) {
        let p = ModelParams::init(HyperParams::toy(), seed).unwrap();
        let h = p.hyper;
        let s = Buffer::from_flat(h.d(), h.k, (0..h.buffer_len()).map(|i| ((i as f64) * 0.37 + seed as f64).sin()).collect());
        let enc = encode_sentence(&ph, &p).unwrap();
        let out = attention_step(&s, &AttentionState::zeros(h.c), &enc, &p).unwrap();
        prop_assert!(out.mu_new.iter().all(|m| *m > 0.0));
        prop_assert!(out.alpha.iter().all(|a| *a >= 0.0));
        for (j, &id) in ph.iter().enumerate() {
            prop_assert_eq!(enc.e.column(j), p.lut_p.column(id));
        }
    }

    #[test]
    fn mcd_is_a_symmetric_nonnegative_distance(
        a in prop::collection::vec(-10.0..10.0f64, 1..20),
        shift in -1.0..1.0f64,
    ) {
        let b: Vec<f64> = a.iter().map(|v| v + shift).collect();
        let n = a.len();
        let ab = mcd(&a, &b, 0..n).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, mcd(&b, &a, 0..n).unwrap());
        prop_assert_eq!(mcd(&a, &a, 0..n).unwrap(), 0.0);
        prop_assert_eq!(ab == 0.0, a == b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dtw_path_is_monotone_with_fixed_ends(a in (1usize..12).prop_flat_map(|n| sequence(n, 3)),
                                            b in (1usize..12).prop_flat_map(|n| sequence(n, 3))) {
        let (cost, r) = mcd_dtw(&a, &b, 0..3).unwrap();
        prop_assert_eq!(r.path[0], (0, 0));
        prop_assert_eq!(*r.path.last().unwrap(), (a.len() - 1, b.len() - 1));
        for w in r.path.windows(2) {
            let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            prop_assert!(matches!((di, dj), (1, 0) | (0, 1) | (1, 1)));
        }
        prop_assert!(cost >= 0.0);
        prop_assert!((cost - r.total_cost / r.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn dtw_never_beats_zero_nor_loses_to_diagonal(
        (a, b) in (1usize..10).prop_flat_map(|n| (sequence(n, 2), sequence(n, 2)))
    ) {
        let (cost, _) = mcd_dtw(&a, &b, 0..2).unwrap();
        let diag: f64 = (0..a.len()).map(|t| mcd(a.frame(t), b.frame(t), 0..2).unwrap()).sum::<f64>() / a.len() as f64;
        prop_assert!(cost <= diag + 1e-12);
        prop_assert_eq!(mcd_dtw(&a, &a, 0..2).unwrap().0, 0.0);
    }

    #[test]
    fn synthesis_is_deterministic(seed in 0u64..1000, ph in prop::collection::vec(0usize..10, 1..6)) {
        let p = ModelParams::init(HyperParams::toy(), seed).unwrap();
        let z = SpeakerEmbedding::from_table(&p, (seed % 3) as usize).unwrap();
        let cfg = SynthesisConfig { max_frames: Some(15), ..Default::default() };
        let a = synthesize(&ph, &z, &p, &cfg, None).unwrap();
        let b = synthesize(&ph, &z, &p, &cfg, None).unwrap();
        prop_assert_eq!(a.features.frames.as_slice(), b.features.frames.as_slice());
        prop_assert_eq!(a.trace, b.trace);
        prop_assert_eq!(a.stop, b.stop);
    }

    #[test]
    fn significance_ignores_weight_signs(seed in 0u64..1000) {
        let p = ModelParams::init(HyperParams::toy(), seed).unwrap();
        let mut flipped = p.clone();
        for w in [&mut flipped.n_a.w1, &mut flipped.n_u.w1, &mut flipped.n_o.w1] {
            for (i, v) in w.as_mut_slice().iter_mut().enumerate() {
                if i % 3 == 0 {
                    *v = -*v;
                }
            }
        }
        let (s, t) = (memory_significance(&p), memory_significance(&flipped));
        prop_assert_eq!(&s, &t);
        prop_assert!(s.n_a.iter().chain(&s.n_u).chain(&s.n_o).all(|v| *v >= 0.0));
    }

    #[test]
    fn weight_files_round_trip(seed in 0u64..1000) {
        let p = ModelParams::init(HyperParams::toy(), seed).unwrap();
        let mut bytes = Vec::new();
        write_params(&mut bytes, &p).unwrap();
        prop_assert_eq!(read_params(&mut bytes.as_slice()).unwrap(), p);
    }

    #[test]
    fn feature_container_round_trips_bitwise(rows in 1usize..8, cols in 1usize..8, seed in 0u32..1000) {
        let m = Matrix::from_fn(rows, cols, |r, c| ((r * 31 + c * 7) as f32 * 0.1 + seed as f32).sin() as f64);
        let mut bytes = Vec::new();
        write_matrix(&mut bytes, &m, 5.0).unwrap();
        let (back, shift) = read_matrix(&mut bytes.as_slice()).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(shift, 5.0);
        let mut again = Vec::new();
        write_matrix(&mut again, &back, shift).unwrap();
        prop_assert_eq!(again, bytes);
    }

    #[test]
    fn g2p_ids_stay_in_the_inventory(words in prop::collection::vec(prop::sample::select(vec!["a", "hello", "world", ",", ".", "?"]), 1..10)) {
        let inv = PhonemeInventory::default();
        let dict = Dictionary::parse("A AH0\nHELLO HH AH0 L OW1\nWORLD W ER1 L D\n").unwrap();
        let text = words.join(" ");
        match g2p(&text, &dict, &inv) {
            Ok(ids) => {
                prop_assert!(ids.iter().all(|&i| i < inv.len()));
                prop_assert_eq!(ids[0], inv.long_pause());
                prop_assert_eq!(*ids.last().unwrap(), inv.long_pause());
                prop_assert!(ids.windows(2).all(|w| !(inv.is_pause(w[0]) && inv.is_pause(w[1]))));
            }
            Err(_) => prop_assert!(words.iter().all(|w| [",", ".", "?"].contains(w))),
        }
    }
}
