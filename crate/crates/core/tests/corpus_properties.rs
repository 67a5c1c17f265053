use chrono::{TimeZone, Utc};
use proptest::prelude::*;
use weaksocial::corpus::{
    build_networks, build_vocab, vectorize_tfidf, Corpus, Engagement, EngagementKind, FollowEdge, Label,
    NewsArticle, PublisherProfile, UserProfile,
};
use weaksocial::synthgen::{generate, SynthConfig};

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

#[derive(Debug, Clone)]
struct Raw {
    publishers: Vec<Option<f64>>,
    users: Vec<(u64, u64, bool, Option<u64>, Option<f64>)>,
    news: Vec<(usize, i64, String, Vec<String>, Option<bool>)>,
    engagements: Vec<(usize, usize, i64, Option<String>)>,
    edges: Vec<(usize, usize)>,
}

fn raw() -> impl Strategy<Value = Raw> {
    (1usize..4, 1usize..6, 1usize..6).prop_flat_map(|(np, nu, nn)| {
        (
            prop::collection::vec(prop::option::of(-1.0f64..=1.0), np),
            prop::collection::vec(
                (
                    0u64..1_000_000,
                    0u64..10_000,
                    any::<bool>(),
                    prop::option::of(0u64..5000),
                    prop::option::of(0.0f64..=1.0),
                ),
                nu,
            ),
            prop::collection::vec(
                (
                    0..np,
                    0i64..2_000_000_000,
                    "\\PC{0,20}",
                    prop::collection::vec("\\PC{1,30}", 1..4),
                    prop::option::of(any::<bool>()),
                ),
                nn,
            ),
            prop::collection::vec((0..nu, 0..nn, 0i64..400_000, prop::option::of("\\PC{1,20}")), 0..12),
            prop::collection::vec((0..nu, 0..nu), 0..8),
        )
            .prop_map(|(publishers, users, news, engagements, edges)| Raw {
                publishers,
                users,
                news,
                engagements,
                edges,
            })
    })
}

fn build(r: &Raw) -> Corpus {
    let publishers = r
        .publishers
        .iter()
        .enumerate()
        .map(|(i, &bias)| PublisherProfile {
            id: format!("p{i}"),
            name: format!("Publisher {i}"),
            bias,
        })
        .collect();
    let users = r
        .users
        .iter()
        .enumerate()
        .map(|(i, &(followers, followees, verified, register_age_days, credibility))| UserProfile {
            id: format!("u{i}"),
            followers,
            followees,
            verified,
            register_age_days,
            credibility,
        })
        .collect();
    let news: Vec<NewsArticle> = r
        .news
        .iter()
        .enumerate()
        .map(|(i, (p, t, title, sentences, label))| NewsArticle {
            id: format!("n{i}"),
            publisher_id: format!("p{p}"),
            publish_time: Utc.timestamp_opt(*t, 0).unwrap(),
            title: title.clone(),
            sentences: sentences.clone(),
            gold_label: label.map(|f| if f { Label::Fake } else { Label::Real }),
        })
        .collect();
    let engagements = r
        .engagements
        .iter()
        .map(|(u, n, delay, text)| Engagement {
            user_id: format!("u{u}"),
            news_id: format!("n{n}"),
            time: news[*n].publish_time + chrono::Duration::seconds(*delay),
            kind: if text.is_some() {
                EngagementKind::Comment
            } else {
                EngagementKind::Share
            },
            text: text.clone(),
        })
        .collect();
    let edges = r
        .edges
        .iter()
        .map(|(a, b)| FollowEdge {
            src: format!("u{a}"),
            dst: format!("u{b}"),
        })
        .collect();
    Corpus::new(news, users, publishers, engagements, edges).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn save_then_load_is_identity(r in raw()) {
        let corpus = build(&r);
        let dir = tempfile::tempdir().unwrap();
        corpus.save_dir(dir.path()).unwrap();
        let back = Corpus::load_dir(dir.path()).unwrap();
        prop_assert_eq!(&back, &corpus);
        let again = tempfile::tempdir().unwrap();
        back.save_dir(again.path()).unwrap();
        for (a, b) in Corpus::files_in(dir.path()).iter().zip(Corpus::files_in(again.path())) {
            prop_assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
        }
    }

    #[test]
    fn network_structure(r in raw(), t1 in 0.0f64..120.0, dt in 0.0f64..120.0) {
        let corpus = build(&r);
        let x = vectorize_tfidf(&corpus, &build_vocab(&corpus, 1, usize::MAX));
        prop_assert!(x.iter().all(|&v| v >= 0.0));
        for row in x.rows() {
            let norm = row.dot(&row).sqrt();
            prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-12);
        }
        let cred = vec![0.5; corpus.users().len()];
        let early = build_networks(&corpus, x.clone(), Some(t1), &cred).unwrap();
        let late = build_networks(&corpus, x.clone(), Some(t1 + dt), &cred).unwrap();
        let all = build_networks(&corpus, x, None, &cred).unwrap();
        prop_assert!(early.spreading.is_subset_of(&late.spreading));
        prop_assert!(late.spreading.is_subset_of(&all.spreading));

        let a = all.adjacency.to_dense();
        prop_assert_eq!(&a, &a.t());
        prop_assert!(a.diag().iter().all(|&v| v == 0.0));
        let p = all.publishing.to_dense();
        prop_assert!(p.columns().into_iter().all(|c| c.sum() == 1.0));
    }
}

#[test]
fn synthetic_corpora_round_trip_and_respect_windows() {
    for seed in 0..3 {
        let corpus = small_synth(seed);
        let dir = tempfile::tempdir().unwrap();
        corpus.save_dir(dir.path()).unwrap();
        assert_eq!(Corpus::load_dir(dir.path()).unwrap(), corpus);

        let x = vectorize_tfidf(&corpus, &build_vocab(&corpus, 1, usize::MAX));
        let cred = vec![0.5; corpus.users().len()];
        let mut previous = build_networks(&corpus, x.clone(), Some(0.0), &cred).unwrap().spreading;
        assert_eq!(previous.nnz(), 0);
        for h in [6.0, 12.0, 24.0, 48.0, 96.0] {
            let w = build_networks(&corpus, x.clone(), Some(h), &cred).unwrap().spreading;
            assert!(previous.is_subset_of(&w));
            previous = w;
        }
        let full = build_networks(&corpus, x, None, &cred).unwrap().spreading;
        assert_eq!(previous, full);
    }
}
