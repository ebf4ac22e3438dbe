use proptest::prelude::*;
use rayon::prelude::*;
use shiftspec::distributions::{chi_square_gof, clamp_normalize, sample, tv_distance, Categorical, RngStream};
use shiftspec::models::{QuartetSpec, MATCH_TOL};
use shiftspec::oracle::{exact_step_ss, exact_step_sss, step_identities};
use shiftspec::Error;

fn categorical(max_v: usize) -> impl Strategy<Value = Categorical> {
    (2..=max_v).prop_flat_map(|v| {
        prop::collection::vec(0.0f64..1.0, v).prop_filter_map("all zero", |w| Categorical::from_weights(w).ok())
    })
}

fn pair(max_v: usize) -> impl Strategy<Value = (Categorical, Categorical)> {
    (2..=max_v).prop_flat_map(|v| {
        let row = || prop::collection::vec(0.0f64..1.0, v).prop_filter_map("all zero", |w| Categorical::from_weights(w).ok());
        (row(), row())
    })
}

fn triple(max_v: usize) -> impl Strategy<Value = (Categorical, Categorical, Categorical)> {
    (2..=max_v).prop_flat_map(|v| {
        let row = || prop::collection::vec(0.0f64..1.0, v).prop_filter_map("all zero", |w| Categorical::from_weights(w).ok());
        (row(), row(), row())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn tv_triangle_inequality((p, q, r) in triple(16)) {
        let pq = tv_distance(&p, &q).unwrap();
        let qr = tv_distance(&q, &r).unwrap();
        let pr = tv_distance(&p, &r).unwrap();
        prop_assert!(pr <= pq + qr + 1e-12);
        prop_assert!((tv_distance(&q, &p).unwrap() - pq).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn clamp_of_a_difference_lives_where_p_exceeds_q((p, q) in pair(16)) {
        let diff: Vec<f64> = p.probs().iter().zip(q.probs()).map(|(a, b)| a - b).collect();
        match clamp_normalize(&diff) {
            Ok(c) => {
                let sum: f64 = c.probs().iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
                for i in 0..p.vocab_size() {
                    prop_assert_eq!(c.prob(i) == 0.0, p.prob(i) <= q.prob(i));
                }
            }
            Err(Error::DegenerateResidual { mass }) => prop_assert!(mass <= 1e-12),
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }

    #[test]
    fn clamp_output_is_a_distribution(w in prop::collection::vec(-1.0f64..1.0, 2..20)) {
        if let Ok(c) = clamp_normalize(&w) {
            prop_assert!(c.probs().iter().all(|&x| x >= 0.0));
            for (i, &x) in w.iter().enumerate() {
                if x <= 0.0 {
                    prop_assert_eq!(c.prob(i), 0.0);
                }
            }
        }
    }

    #[test]
    fn standard_step_emits_the_target((d, t) in pair(16)) {
        use shiftspec::models::{Context, TabularModel};
        let dm = TabularModel::constant(d.clone(), 1).unwrap();
        let tm = TabularModel::constant(t.clone(), 1).unwrap();
        let law = exact_step_ss(&dm, &tm, &Context::root(0)).unwrap();
        prop_assert!(tv_distance(&law.emitted, &t).unwrap() < 1e-12);
        let expected: f64 = d.probs().iter().zip(t.probs()).map(|(a, b)| (a - b).max(0.0)).sum();
        prop_assert!((law.reject_mass - expected).abs() < 1e-12);
    }

    #[test]
    fn sampling_never_returns_zero_mass_symbols(p in categorical(8), seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, 0);
        for _ in 0..200 {
            let i = sample(&p, &mut rng);
            prop_assert!(p.prob(i) > 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matched_quartet_invariants(seed in any::<u64>(), v in 2usize..10, depth in 1usize..4, mix in 0.0f64..1.0) {
        let spec = QuartetSpec { vocab_size: v, max_depth: depth, mix, ..Default::default() };
        let q = spec.matched(&mut RngStream::new(seed, 0)).unwrap();
        prop_assert!(q.max_mismatch().unwrap() <= MATCH_TOL);
        for ctx in q.shape().contexts() {
            let law = exact_step_sss(&q, &ctx, 1.0).unwrap();
            prop_assert!(tv_distance(&law.emitted, q.optimal().row_at(&ctx).unwrap()).unwrap() < 1e-12);
            let accepted: f64 = law.accepted_mass.iter().sum();
            prop_assert!((accepted + law.reject_mass - 1.0).abs() < 1e-12);
            let id = step_identities(&q, &ctx).unwrap();
            prop_assert!(id.split < 1e-12 && id.ratio < 1e-12 && id.reject_mass < 1e-10);
        }
    }
}

#[test]
fn proof_identities_on_a_thousand_quartets() {
    let mut rng = RngStream::new(301, 0);
    for i in 0..1000 {
        let q = QuartetSpec { vocab_size: 2 + i % 15, ..Default::default() }.matched(&mut rng).unwrap();
        for ctx in q.shape().contexts() {
            let id = step_identities(&q, &ctx).unwrap();
            assert!(id.split == 0.0 || id.split < 1e-15, "{id:?}");
            assert!(id.reject_mass < 1e-10, "{id:?}");
        }
    }
}

#[test]
fn gamma_one_is_exact_and_other_gammas_are_recorded() {
    let mut rng = RngStream::new(302, 0);
    let mut broken = 0;
    for _ in 0..50 {
        let q = QuartetSpec::default().matched(&mut rng).unwrap();
        for ctx in q.shape().contexts() {
            let opt = q.optimal().row_at(&ctx).unwrap();
            assert!(tv_distance(&exact_step_sss(&q, &ctx, 1.0).unwrap().emitted, opt).unwrap() < 1e-12);
            if tv_distance(&exact_step_sss(&q, &ctx, 0.5).unwrap().emitted, opt).unwrap() > 1e-9 {
                broken += 1;
            }
        }
    }
    assert!(broken > 0);
}

/// Distributional correctness of `sample`: 1000 seeded trials of 10^5 draws
/// from random laws over at most 16 symbols.
#[test]
fn sampler_passes_chi_square_in_most_trials() {
    let passes: usize = (0..1000u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = RngStream::new(303, trial);
            let v = 2 + (trial as usize) % 15;
            let w: Vec<f64> = (0..v).map(|_| rng.uniform() + 0.01).collect();
            let p = Categorical::from_weights(w).unwrap();
            let n = 100_000u64;
            let mut counts = vec![0u64; v];
            for _ in 0..n {
                counts[sample(&p, &mut rng)] += 1;
            }
            (chi_square_gof(&counts, &p, n).unwrap().p_value > 1e-4) as usize
        })
        .sum();
    assert!(passes >= 990, "{passes} of 1000 trials passed");
}
