//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weaksocial::coattend::CoAttendConfig;
use weaksocial::corpus::{InteractionNetworks, SparseBinary};
use weaksocial::synthgen::SynthConfig;

/// Seeded uniform [0, 1) matrix.
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || rng.random::<f64>())
}

/// Networks carrying only a content matrix: no users, one publisher with
/// unknown bias.
pub fn content_only(x: Array2<f64>) -> InteractionNetworks {
    let n = x.nrows();
    InteractionNetworks::from_parts(
        x,
        SparseBinary::zeros(0, 0),
        SparseBinary::zeros(0, n),
        SparseBinary::from_pairs(1, n, (0..n).map(|j| (0, j))),
        Array1::zeros(1),
        vec![false],
        Array1::zeros(0),
        None,
    )
    .unwrap()
}

/// Lee-Seung multiplicative updates for `min ||X - D V^T||^2` from the given
/// factors. Returns the final objective.
pub fn nmf_oracle(x: &Array2<f64>, mut d: Array2<f64>, mut v: Array2<f64>, iters: usize) -> f64 {
    let tiny = 1e-300;
    for _ in 0..iters {
        let num = x.dot(&v);
        let den = d.dot(&v.t().dot(&v));
        d.zip_mut_with(&(num / (den + tiny)), |a, r| *a *= r);
        let num = x.t().dot(&d);
        let den = v.dot(&d.t().dot(&d));
        v.zip_mut_with(&(num / (den + tiny)), |a, r| *a *= r);
    }
    let r = x - &d.dot(&v.t());
    r.iter().map(|e| e * e).sum()
}

/// Corpus for the co-attention experiments: 300 items, half the comments on
/// fake items explain them, and the key sentence repeats a class marker.
pub fn explainable_synth(seed: u64) -> SynthConfig {
    SynthConfig {
        n_news: 300,
        explainable_comment_rate: 0.5,
        fake_topic_tokens: 2,
        content_signal: 0.7,
        topic_noise: 0.0,
        key_marker_count: 3,
        vocab_size: 50,
        seed,
        ..Default::default()
    }
}

pub fn explainable_coattend() -> CoAttendConfig {
    CoAttendConfig {
        epochs: 60,
        learning_rate: 0.5,
        dropout: 0.5,
        ..Default::default()
    }
}

/// Corpus of the weak-supervision experiments.
pub fn social_synth(seed: u64) -> SynthConfig {
    SynthConfig {
        n_news: 200,
        n_users: 500,
        n_publishers: 20,
        credibility_gap: 0.6,
        bias_strength: 0.6,
        seed,
        ..Default::default()
    }
}
