use proptest::prelude::*;
use weaksocial::corpus::{build_networks, build_vocab, vectorize_tfidf, Corpus, Label};
use weaksocial::synthgen::{generate, planted_oracle_accuracy, SynthConfig};
use weaksocial::weaksup::{apply_rules, credibility_scores, Lexicon, WeakSupParams};

fn small_synth(seed: u64) -> Corpus {
    generate(&SynthConfig {
        n_news: 30,
        n_users: 60,
        n_publishers: 5,
        seed,
        ..Default::default()
    })
    .unwrap()
    .0
}

fn masked(corpus: &Corpus, keep: &[bool]) -> Vec<Option<Label>> {
    corpus
        .gold_labels()
        .into_iter()
        .zip(keep.iter().cycle())
        .map(|(g, &k)| g.filter(|_| k))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn credibility_stays_in_unit_interval(
        seed in 0u64..1000,
        keep in prop::collection::vec(any::<bool>(), 1..30),
        cutoff in prop::option::of(0.0f64..100.0),
    ) {
        let corpus = small_synth(seed);
        let cred = credibility_scores(&corpus, &masked(&corpus, &keep), cutoff);
        prop_assert_eq!(cred.len(), corpus.users().len());
        prop_assert!(cred.iter().all(|c| (0.0..=1.0).contains(c)));
    }

    #[test]
    fn marking_an_item_fake_never_raises_credibility(
        seed in 0u64..1000,
        keep in prop::collection::vec(any::<bool>(), 1..30),
        item in 0usize..30,
    ) {
        let corpus = small_synth(seed);
        let mut gold = masked(&corpus, &keep);
        gold[item] = Some(Label::Real);
        let before = credibility_scores(&corpus, &gold, None);
        gold[item] = Some(Label::Fake);
        let after = credibility_scores(&corpus, &gold, None);
        for (b, a) in before.iter().zip(&after) {
            prop_assert!(a <= b);
        }
    }
}

#[test]
fn rules_are_deterministic() {
    let lex = Lexicon::bundled();
    for seed in 0..3 {
        let corpus = small_synth(seed);
        let gold = corpus.gold_labels();
        let votes = || {
            let x = vectorize_tfidf(&corpus, &build_vocab(&corpus, 1, usize::MAX));
            let cred = credibility_scores(&corpus, &gold, Some(24.0));
            let nets = build_networks(&corpus, x, Some(24.0), &cred).unwrap();
            apply_rules(&corpus, &nets, &lex, &WeakSupParams::default())
        };
        assert_eq!(votes(), votes());
    }
}

#[test]
fn planted_oracle_improves_with_credibility_gap() {
    let mean_oracle = |gap: f64| {
        (0..10)
            .map(|seed| {
                let (corpus, truth) = generate(&SynthConfig {
                    n_news: 100,
                    n_users: 200,
                    n_publishers: 10,
                    credibility_gap: gap,
                    seed,
                    ..Default::default()
                })
                .unwrap();
                planted_oracle_accuracy(&corpus, &truth)
            })
            .sum::<f64>()
            / 10.0
    };
    let accs: Vec<f64> = [0.0, 0.2, 0.4, 0.6, 0.8].into_iter().map(mean_oracle).collect();
    for w in accs.windows(2) {
        assert!(w[1] >= w[0] - 0.02, "{accs:?}");
    }
}
