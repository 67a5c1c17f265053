use ndarray::{array, Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{encode_sequence, forward_trace};
use super::*;
use crate::synthgen::{generate, SynthConfig};

fn tiny_config() -> CoAttendConfig {
    CoAttendConfig {
        embed_dim: 8,
        hidden_dim: 4,
        attn_dim: 4,
        ..Default::default()
    }
}

fn random_item(rng: &mut ChaCha8Rng, vocab: usize, n: usize, t: usize, label: Label) -> Encoded {
    let seq = |rng: &mut ChaCha8Rng| -> Vec<usize> {
        let len = rng.random_range(1..=4);
        (0..len).map(|_| rng.random_range(0..vocab)).collect()
    };
    Encoded {
        sentences: (0..n).map(|_| seq(rng)).collect(),
        comments: (0..t).map(|_| seq(rng)).collect(),
        label: Some(label),
    }
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Largest relative error between analytic and central-difference gradients
/// over every parameter entry, with the tensor it occurs in.
fn max_gradient_error(params: &Params, mode: Mode, batch: &[&Encoded]) -> (f64, String) {
    let eps = 1e-5;
    let (_, grad) = loss_and_grads(params, mode, batch, None);
    let analytic: Vec<(String, Vec<f64>)> = grad.tensors().into_iter().map(|(n, t)| (n, t.to_vec())).collect();
    let mut worst = (0.0, String::new());
    let mut probe = params.clone();
    for (k, (name, g)) in analytic.iter().enumerate() {
        for i in 0..g.len() {
            let orig = probe.tensors()[k].1[i];
            probe.tensors_mut()[k][i] = orig + eps;
            let up = loss_and_grads(&probe, mode, batch, None).0;
            probe.tensors_mut()[k][i] = orig - eps;
            let down = loss_and_grads(&probe, mode, batch, None).0;
            probe.tensors_mut()[k][i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let e = rel_err(g[i], numeric);
            if e > worst.0 {
                worst = (e, format!("{name}[{i}] analytic {} numeric {numeric}", g[i]));
            }
        }
    }
    worst
}

#[test]
fn gradients_match_finite_differences_in_every_mode() {
    let cfg = tiny_config();
    let vocab = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = Params::init(&cfg, vocab);
    let items = [
        random_item(&mut rng, vocab, 3, 4, Label::Fake),
        random_item(&mut rng, vocab, 3, 4, Label::Real),
        random_item(&mut rng, vocab, 2, 0, Label::Fake),
    ];
    let batch: Vec<&Encoded> = items.iter().collect();
    for mode in [Mode::Full, Mode::NoComments, Mode::NoNews, Mode::NoCoattention] {
        let (err, at) = max_gradient_error(&params, mode, &batch);
        assert!(err < 1e-4, "{mode}: relative error {err} at {at}");
    }
}

#[test]
fn gradient_with_dropout_mask_matches_fixed_mask_loss() {
    // the same seed reproduces the same masks, so a dropout gradient can be
    // checked by differencing losses drawn with identical masks
    let cfg = tiny_config();
    let params = Params::init(&cfg, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let item = random_item(&mut rng, 10, 2, 2, Label::Fake);
    let loss_at = |p: &Params| {
        let mut r = ChaCha8Rng::seed_from_u64(99);
        loss_and_grads(p, Mode::Full, &[&item], Some((0.3, &mut r)))
    };
    let (_, g) = loss_at(&params);
    let eps = 1e-5;
    for k in [0usize, 1, 13] {
        for i in 0..params.tensors()[k].1.len().min(6) {
            let mut p = params.clone();
            let orig = p.tensors()[k].1[i];
            p.tensors_mut()[k][i] = orig + eps;
            let up = loss_at(&p).0;
            p.tensors_mut()[k][i] = orig - eps;
            let down = loss_at(&p).0;
            let numeric = (up - down) / (2.0 * eps);
            assert!(rel_err(g.tensors()[k].1[i], numeric) < 1e-4);
        }
    }
}

#[test]
fn hand_evaluated_coattention() {
    // 2h = 2, N = T = 2, every parameter 0.1
    let cfg = CoAttendConfig {
        embed_dim: 1,
        hidden_dim: 1,
        attn_dim: 2,
        ..Default::default()
    };
    let mut p = Params::init(&cfg, 1);
    for t in p.tensors_mut() {
        t.fill(0.1);
    }
    let s_mat = array![[1.0, 0.0], [0.5, -1.0]];
    let c_mat = array![[0.2, -0.4], [0.3, 0.9]];
    let co = coattend(&p, s_mat.view(), c_mat.view());

    // straight-line evaluation
    let col = |m: &Array2<f64>, j: usize| [m[[0, j]], m[[1, j]]];
    let (s0, s1) = (col(&s_mat, 0), col(&s_mat, 1));
    let (c0, c1) = (col(&c_mat, 0), col(&c_mat, 1));
    let sum = |v: [f64; 2]| v[0] + v[1];
    // with all-0.1 matrices, W v = 0.1 * sum(v) in every row and
    // cᵀ W_l s = 0.1 * sum(c) * sum(s)
    let f = |c: [f64; 2], s: [f64; 2]| (0.1 * sum(c) * sum(s)).tanh();
    let f_mat = [[f(c0, s0), f(c0, s1)], [f(c1, s0), f(c1, s1)]];
    let ps = [0.1 * sum(s0), 0.1 * sum(s1)];
    let pc = [0.1 * sum(c0), 0.1 * sum(c1)];
    let hs: Vec<f64> = (0..2)
        .map(|n| (ps[n] + pc[0] * f_mat[0][n] + pc[1] * f_mat[1][n]).tanh())
        .collect();
    let hc: Vec<f64> = (0..2)
        .map(|t| (pc[t] + ps[0] * f_mat[t][0] + ps[1] * f_mat[t][1]).tanh())
        .collect();
    // w_h · H column = 0.1 * k * value since every row of H is identical
    let soft = |x: [f64; 2]| {
        let z = x[0].exp() + x[1].exp();
        [x[0].exp() / z, x[1].exp() / z]
    };
    let a_s = soft([0.2 * hs[0], 0.2 * hs[1]]);
    let a_c = soft([0.2 * hc[0], 0.2 * hc[1]]);
    for i in 0..2 {
        assert!((co.a_s[i] - a_s[i]).abs() < 1e-14);
        assert!((co.a_c[i] - a_c[i]).abs() < 1e-14);
    }
    let s_hat = [s0[0] * a_s[0] + s1[0] * a_s[1], s0[1] * a_s[0] + s1[1] * a_s[1]];
    assert!((co.s_hat[0] - s_hat[0]).abs() < 1e-14);
    assert!((co.s_hat[1] - s_hat[1]).abs() < 1e-14);
}

#[test]
fn single_sentence_gets_all_attention() {
    let p = Params::init(&tiny_config(), 5);
    let s_mat = Array2::from_shape_fn((8, 1), |(i, _)| i as f64 * 0.1);
    let c_mat = Array2::from_shape_fn((8, 3), |(i, j)| (i + j) as f64 * 0.05);
    let co = coattend(&p, s_mat.view(), c_mat.view());
    assert_eq!(co.a_s.to_vec(), vec![1.0]);
    assert!((co.a_c.sum() - 1.0).abs() < 1e-12);
}

#[test]
fn single_word_and_zero_parameters() {
    let cfg = tiny_config();
    let p = Params::init(&cfg, 5);
    let (out, cache) = encode_sequence(&p.sentence_encoder, &p.embedding, &[3], None);
    assert_eq!(cache.alpha.to_vec(), vec![1.0]);
    assert_eq!(out.len(), 8);

    let mut zero = p.clone();
    for t in zero.tensors_mut() {
        t.fill(0.0);
    }
    let (out, _) = encode_sequence(&zero.sentence_encoder, &zero.embedding, &[1, 2, 3], None);
    assert!(out.iter().all(|&v| v == 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let item = random_item(&mut rng, 5, 3, 2, Label::Fake);
    let f = forward(&zero, Mode::Full, &item);
    assert_eq!(f.p_fake, 0.5);
}

#[test]
fn zero_output_layer_gives_even_odds() {
    let mut p = Params::init(&tiny_config(), 6);
    p.w_out.fill(0.0);
    p.b_out.fill(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let item = random_item(&mut rng, 6, 3, 3, Label::Real);
    assert_eq!(forward(&p, Mode::Full, &item).p_fake, 0.5);
}

#[test]
fn ablations_ignore_what_they_drop() {
    let cfg = tiny_config();
    let p = Params::init(&cfg, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let item = random_item(&mut rng, 9, 3, 4, Label::Fake);
    let mut other_comments = item.clone();
    other_comments.comments = random_item(&mut rng, 9, 1, 6, Label::Fake).comments;
    let a = forward(&p, Mode::NoComments, &item).p_fake;
    let b = forward(&p, Mode::NoComments, &other_comments).p_fake;
    assert_eq!(a, b);

    let mut other_news = item.clone();
    other_news.sentences = random_item(&mut rng, 9, 5, 0, Label::Fake).sentences;
    assert_eq!(
        forward(&p, Mode::NoNews, &item).p_fake,
        forward(&p, Mode::NoNews, &other_news).p_fake
    );

    let mut q = p.clone();
    for t in [&mut q.w_l, &mut q.w_s, &mut q.w_c] {
        t.mapv_inplace(|v| v * 3.0 + 0.7);
    }
    q.w_hs.fill(-2.0);
    q.w_hc.fill(5.0);
    assert_eq!(
        forward(&p, Mode::NoCoattention, &item).p_fake,
        forward(&q, Mode::NoCoattention, &item).p_fake
    );
}

#[test]
fn empty_comment_list_uses_null_comment() {
    let p = Params::init(&tiny_config(), 7);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let item = random_item(&mut rng, 7, 2, 0, Label::Real);
    let (f, _) = forward_trace(&p, Mode::Full, &item, None);
    assert!(f.a_c.is_empty());
    let mut q = p.clone();
    q.null_comment.fill(0.3);
    assert_ne!(forward(&q, Mode::Full, &item).p_fake, f.p_fake);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn outputs_are_distributions(seed in 0u64..10_000, n in 1usize..5, t in 0usize..6) {
        let p = Params::init(&CoAttendConfig { seed, ..tiny_config() }, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let item = random_item(&mut rng, 11, n, t, Label::Fake);
        let f = forward(&p, Mode::Full, &item);
        prop_assert!(f.p_fake > 0.0 && f.p_fake < 1.0);
        prop_assert!((f.p_fake + f.p_real - 1.0).abs() < 1e-12);
        prop_assert!((f.a_s.sum() - 1.0).abs() < 1e-8);
        prop_assert!(f.a_s.iter().all(|&v| v >= 0.0));
        if t > 0 {
            prop_assert!((f.a_c.sum() - 1.0).abs() < 1e-8);
            prop_assert!(f.a_c.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn sentence_permutation_is_harmless(seed in 0u64..10_000) {
        let p = Params::init(&CoAttendConfig { seed, ..tiny_config() }, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let item = random_item(&mut rng, 11, 4, 3, Label::Fake);
        let mut perm = item.clone();
        perm.sentences.reverse();
        let a = forward(&p, Mode::Full, &item);
        let b = forward(&p, Mode::Full, &perm);
        prop_assert!((a.p_fake - b.p_fake).abs() < 1e-10);
        for i in 0..4 {
            prop_assert!((a.a_s[i] - b.a_s[3 - i]).abs() < 1e-12);
        }
    }
}

#[test]
fn ranking_is_descending_with_index_ties() {
    let w = Array1::from(vec![0.2, 0.4, 0.2, 0.2]);
    let r = rank(&w);
    assert_eq!(r.iter().map(|x| x.0).collect::<Vec<_>>(), vec![1, 0, 2, 3]);
    let w = Array1::from(vec![0.0080, 0.0086]);
    assert_eq!(rank(&w)[0].0, 1);
}

fn small_synth() -> Corpus {
    generate(&SynthConfig {
        n_news: 24,
        n_users: 40,
        n_publishers: 4,
        comments_per_news: 3.0,
        sentences_per_news: 3,
        words_per_sentence: 5,
        seed: 8,
        ..Default::default()
    })
    .unwrap()
    .0
}

#[test]
fn training_reduces_loss_and_is_deterministic() {
    let corpus = small_synth();
    let cfg = CoAttendConfig {
        embed_dim: 8,
        hidden_dim: 4,
        attn_dim: 4,
        epochs: 15,
        dropout: 0.2,
        ..Default::default()
    };
    let (m1, rep) = train_on(&corpus, None, &cfg, Mode::Full).unwrap();
    assert!(rep.epoch_loss.iter().all(|l| l.is_finite()));
    assert!(*rep.epoch_loss.last().unwrap() < rep.initial_loss);
    let (m2, _) = train_on(&corpus, None, &cfg, Mode::Full).unwrap();
    let mut b1 = Vec::new();
    let mut b2 = Vec::new();
    write_model(&mut b1, &m1).unwrap();
    write_model(&mut b2, &m2).unwrap();
    assert_eq!(b1, b2);

    let back = read_model(&mut b1.as_slice()).unwrap();
    assert_eq!(back, m1);
    let e = back.explain(&corpus, 0);
    assert_eq!(e, m1.explain(&corpus, 0));
    let weights: Vec<f64> = e.comments.iter().map(|c| c.weight).collect();
    assert!(weights.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn single_class_training_rejected() {
    let corpus = small_synth();
    let fakes: Vec<usize> = (0..corpus.news().len())
        .filter(|&j| corpus.news()[j].gold_label == Some(Label::Fake))
        .collect();
    assert!(matches!(
        train_on(&corpus, Some(&fakes), &tiny_config(), Mode::Full),
        Err(Error::SingleClass)
    ));
}

#[test]
fn bad_magic_rejected() {
    assert!(matches!(read_model(&mut &b"TRIFN1xxxx"[..]), Err(Error::ModelFormat(_))));
}
