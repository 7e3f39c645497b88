use blocklength::code::{build_code, build_prefix_code};
use blocklength::gaussian::{q, q_inv};
use blocklength::limits::{
    epsilon_profile_pair, epsilon_star_bruteforce, epsilon_star_pair_bruteforce, epsilon_star_prefix_from,
    length_law_typeclass, rate_from_profile, TypeClassOptions,
};
use blocklength::markov::markov_rates;
use blocklength::measures::{measures, per_y_profile};
use blocklength::model::Alphabet;
use blocklength::prob::rational_to_f64;
use blocklength::{CondIidModel, MarkovPairModel, Prob, SideInfoString, SourceModel};
use proptest::prelude::*;

/// Models with `|X|, |Y| <= 3` and small integer weights; zero entries allowed.
fn model_strategy() -> impl Strategy<Value = CondIidModel> {
    (2usize..=3, 1usize..=3)
        .prop_flat_map(|(xs, ys)| {
            (
                Just(xs),
                Just(ys),
                prop::collection::vec(prop::collection::vec(0u64..6, xs), ys),
                prop::collection::vec(1u64..6, ys),
            )
        })
        .prop_filter("rows need mass", |(_, _, rows, _)| rows.iter().all(|r| r.iter().sum::<u64>() > 0))
        .prop_map(|(xs, ys, rows, w)| {
            let rows = rows
                .iter()
                .map(|r| {
                    let t: u64 = r.iter().sum();
                    r.iter().map(|&v| Prob::from_ratio(v, t)).collect()
                })
                .collect();
            let t: u64 = w.iter().sum();
            let p_y = w.iter().map(|&v| Prob::from_ratio(v, t)).collect();
            CondIidModel::new(Alphabet::numeric(xs), Alphabet::numeric(ys), Some(p_y), rows).unwrap()
        })
}

fn side(model: &CondIidModel, seed: &[usize], n: usize) -> SideInfoString {
    let symbols = (0..n).map(|i| seed[i % seed.len()] % model.y_size()).collect();
    SideInfoString::new(symbols, model.y_alphabet()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn typeclass_matches_enumeration(m in model_strategy(), seed in prop::collection::vec(0usize..3, 1..4), n in 1usize..7) {
        let y = side(&m, &seed, n);
        let oracle = epsilon_star_bruteforce(&m, &y).unwrap();
        let law = length_law_typeclass(&m, &y).unwrap();
        prop_assert_eq!(law.epsilon_profile_exact().unwrap(), oracle.clone());
        for (a, b) in law.epsilon_profile().iter().zip(&oracle) {
            prop_assert!((a - rational_to_f64(b)).abs() <= 1e-12);
        }
    }

    #[test]
    fn pair_profile_matches_enumeration(m in model_strategy(), n in 1usize..5) {
        let oracle = epsilon_star_pair_bruteforce(&m, n, 1 << 10).unwrap();
        let profile = epsilon_profile_pair(&m, n, &TypeClassOptions::default()).unwrap();
        for (a, b) in profile.iter().zip(&oracle) {
            prop_assert!((a - rational_to_f64(b)).abs() <= 1e-12);
        }
    }

    #[test]
    fn profile_shape(m in model_strategy(), seed in prop::collection::vec(0usize..3, 1..4), n in 1usize..9) {
        let profile = length_law_typeclass(&m, &side(&m, &seed, n)).unwrap().epsilon_profile();
        prop_assert_eq!(profile[0], 1.0);
        prop_assert_eq!(*profile.last().unwrap(), 0.0);
        prop_assert!(profile.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rate_is_the_smallest_admissible_k(m in model_strategy(), n in 1usize..8, eps in 0.0f64..0.99) {
        let profile = length_law_typeclass(&m, &side(&m, &[0, 1, 2], n)).unwrap().epsilon_profile();
        let r = rate_from_profile(n, &profile, eps).unwrap();
        prop_assert!(profile.get(r.k + 1).copied().unwrap_or(0.0) <= eps);
        if r.k > 0 {
            prop_assert!(profile[r.k] > eps);
        }
    }

    #[test]
    fn prefix_code_realizes_the_shift(m in model_strategy(), seed in prop::collection::vec(0usize..3, 1..4), n in 1usize..6) {
        let y = side(&m, &seed, n);
        let profile = epsilon_star_bruteforce(&m, &y).unwrap();
        let floats: Vec<f64> = profile.iter().map(rational_to_f64).collect();
        let mut k = 1;
        while blocklength::limits::below_support_bits(k, n, m.x_size()) {
            let code = build_prefix_code(&m, &y, k).unwrap();
            prop_assert!(code.is_prefix_free());
            prop_assert!(rational_to_f64(&code.kraft_sum()) <= 1.0);
            prop_assert_eq!(code.excess_probability(k + 1), profile[k].clone());
            prop_assert_eq!(epsilon_star_prefix_from(&floats, n, m.x_size(), k + 1).unwrap(), floats[k]);
            k += 1;
        }
    }

    #[test]
    fn one_to_one_lengths_exceed_kraft(m in model_strategy(), n in 1usize..6) {
        let code = build_code(&m, &side(&m, &[0, 1], n)).unwrap();
        let lengths: Vec<usize> = code.order().iter().map(|&i| code.length(i)).collect();
        prop_assert!(lengths.windows(2).all(|w| w[0] <= w[1]));
        let kraft: f64 = lengths.iter().map(|&l| (-(l as f64)).exp2()).sum();
        prop_assert!(kraft >= 1.0);
    }

    #[test]
    fn dispersion_decomposes(m in model_strategy()) {
        let s = measures(&m).unwrap();
        prop_assert!((s.sigma2 - s.ev - s.var_hhat).abs() <= 1e-12);
        prop_assert!(s.var_hhat >= 0.0);
        prop_assert!(s.h_xy <= s.h_x + 1e-12);
        let profile = per_y_profile(&m);
        prop_assert!(profile.varentropy.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn embedding_preserves_rates(m in model_strategy()) {
        let s = measures(&m).unwrap();
        let a = markov_rates(&MarkovPairModel::from_cond_iid(&m).unwrap()).unwrap();
        prop_assert!((a.h_rate - s.h_xy).abs() <= 1e-9);
        prop_assert!((a.sigma2_rate - s.sigma2).abs() <= 1e-9);
    }

    #[test]
    fn model_file_round_trip(m in model_strategy()) {
        let text = SourceModel::CondIid(m.clone()).to_json_string();
        let back = SourceModel::from_json_str(&text).unwrap();
        let back = back.as_cond_iid().unwrap();
        for y in 0..m.y_size() {
            for x in 0..m.x_size() {
                prop_assert_eq!(back.cond(x, y).exact(), m.cond(x, y).exact());
            }
        }
    }

    #[test]
    fn q_inverse_round_trip(p in 1e-12f64..(1.0 - 1e-12)) {
        let z = q_inv(p).unwrap();
        prop_assert!((q(z) - p).abs() <= 1e-13 * p.max(1e-3));
    }
}
