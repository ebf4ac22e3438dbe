use shiftspec::distributions::RngStream;
use shiftspec::models::{enumerate_law, sequence_distribution, ModelQuartet, QuartetSpec, SequenceLaw};
use shiftspec::oracle::{exact_sequence_law, exact_step_sss, monte_carlo_law, sss_sequence_law, EmpiricalLaw};
use shiftspec::sampling::{LookaheadConfig, ShiftedSpecDecoder, StandardSpecDecoder, VanillaDecoder};

fn agrees(emp: &EmpiricalLaw, law: &SequenceLaw, tv_bound: f64) {
    let tv = emp.tv(law).unwrap();
    let p = emp.chi_square(law).unwrap().p_value;
    assert!(tv <= tv_bound, "tv {tv}");
    assert!(p > 1e-3, "p {p}");
}

fn quartet(seed: u64, spec: QuartetSpec) -> ModelQuartet {
    spec.matched(&mut RngStream::new(seed, 0)).unwrap()
}

#[test]
fn shifted_decoder_with_gamma_below_one_follows_its_oracle() {
    let q = quartet(201, QuartetSpec { vocab_size: 3, ..Default::default() });
    for (j, gamma) in [0.0, 0.5].into_iter().enumerate() {
        let cfg = LookaheadConfig::new(3, 3).unwrap().with_gamma(gamma);
        let emp = monte_carlo_law(&ShiftedSpecDecoder::new(&q, cfg).unwrap(), 0, 100_000, &RngStream::new(202, j as u64))
            .unwrap();
        agrees(&emp, &sss_sequence_law(&q, gamma, 0, 3).unwrap(), 0.01);
    }
}

#[test]
fn unmatched_quartets_decode_to_the_distorted_law() {
    let q = QuartetSpec::default().unmatched(&mut RngStream::new(203, 0)).unwrap();
    assert!(!q.is_matched());
    let exact = sss_sequence_law(&q, 1.0, 0, 3).unwrap();
    let optimal = sequence_distribution(q.optimal(), 0, 3).unwrap();
    assert!(exact.tv(&optimal).unwrap() > 0.01);
    let cfg = LookaheadConfig::new(2, 3).unwrap();
    let emp = monte_carlo_law(&ShiftedSpecDecoder::new(&q, cfg).unwrap(), 0, 100_000, &RngStream::new(204, 0)).unwrap();
    agrees(&emp, &exact, 0.015);
}

#[test]
fn decoding_past_the_table_depth_uses_the_trailing_window() {
    // Length 5 on a depth-3 table: rows condition on the last two tokens.
    let q = quartet(205, QuartetSpec { vocab_size: 3, ..Default::default() });
    let cfg = LookaheadConfig::new(2, 5).unwrap();
    let exact = exact_sequence_law(|ctx| exact_step_sss(&q, ctx, 1.0), 3, 0, 5).unwrap();
    let via_optimal = sequence_distribution(q.optimal(), 0, 5).unwrap();
    assert!(exact.tv(&via_optimal).unwrap() < 1e-10);
    let emp = monte_carlo_law(&ShiftedSpecDecoder::new(&q, cfg).unwrap(), 0, 200_000, &RngStream::new(206, 0)).unwrap();
    agrees(&emp, &exact, 0.02);
}

#[test]
fn temperature_is_applied_to_every_row() {
    let q = quartet(207, QuartetSpec { vocab_size: 3, max_depth: 2, ..Default::default() });
    let t = 0.7;
    let cfg = LookaheadConfig::new(2, 2).unwrap().with_temperature(t);
    let tempered = q.target().tempered(t).unwrap();
    let emp = monte_carlo_law(&StandardSpecDecoder::new(q.sft(), q.target(), cfg).unwrap(), 0, 50_000, &RngStream::new(208, 0))
        .unwrap();
    agrees(&emp, &sequence_distribution(&tempered, 0, 2).unwrap(), 0.015);

    // Tempering does not preserve matched normalizers, so the reference is
    // the exact law of the tempered quartet rather than its optimal policy.
    let hot = q.tempered(t).unwrap();
    let emp = monte_carlo_law(&ShiftedSpecDecoder::new(&q, cfg).unwrap(), 0, 50_000, &RngStream::new(208, 1)).unwrap();
    agrees(&emp, &sss_sequence_law(&hot, 1.0, 0, 2).unwrap(), 0.015);
}

#[test]
fn vanilla_decoding_matches_ancestral_enumeration() {
    let q = quartet(209, QuartetSpec::default());
    let cfg = LookaheadConfig::new(1, 3).unwrap();
    let emp = monte_carlo_law(&VanillaDecoder::new(q.sft(), cfg).unwrap(), 0, 50_000, &RngStream::new(210, 0)).unwrap();
    let law = enumerate_law(4, 3, |p| Ok(q.sft().row(0, p).clone())).unwrap();
    agrees(&emp, &law, 0.015);
}

#[test]
fn monte_carlo_error_shrinks_with_more_runs() {
    let q = quartet(211, QuartetSpec::default());
    let exact = sss_sequence_law(&q, 1.0, 0, 3).unwrap();
    let dec = ShiftedSpecDecoder::new(&q, LookaheadConfig::default()).unwrap();
    let tvs: Vec<f64> = [10_000u64, 100_000, 1_000_000]
        .iter()
        .map(|&n| monte_carlo_law(&dec, 0, n, &RngStream::new(212, n)).unwrap().tv(&exact).unwrap())
        .collect();
    assert!(tvs[0] > tvs[1] && tvs[1] > tvs[2], "{tvs:?}");
}

#[test]
fn counters_add_up_across_runs() {
    let q = quartet(213, QuartetSpec::default());
    let cfg = LookaheadConfig::new(2, 7).unwrap();
    let emp = monte_carlo_law(&ShiftedSpecDecoder::new(&q, cfg).unwrap(), 0, 10_000, &RngStream::new(214, 0)).unwrap();
    let t = emp.totals;
    assert_eq!(t.runs, 10_000);
    assert_eq!(t.emitted_tokens, 70_000);
    assert_eq!(t.blocks, t.target_calls);
    // Shifted blocks emit the accepted prefix plus one bonus on rejection.
    assert_eq!(t.emitted_tokens, t.accepted + (t.verified - t.accepted));
    assert_eq!(emp.counts.values().sum::<u64>(), 10_000);
}
