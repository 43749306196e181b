#![allow(dead_code)]

use pmivec::cooccur::{build_pmi_matrix, count_stream, CooccurrenceStats, PmiMatrix};
use pmivec::corpus::{build_vocab, encode, Vocabulary};
use pmivec::trainer::{Optimizer, TrainConfig, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FIXTURE_WORDS: usize = 20;
pub const FIXTURE_TOKENS: usize = 10_000;
pub const FIXTURE_SEED: u64 = 20;
pub const FIXTURE_WINDOW: usize = 2;

/// Tokens from a seeded Markov chain over `n` words `w00, w01, ...`.
///
/// Every transition has probability at least `0.2 / n`, so at this length all
/// ordered pairs, self-pairs included, are observed with overwhelming odds.
pub fn markov_tokens(n: usize, len: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..n).map(|_| 0.2 + rng.random::<f64>().powi(3) * 4.0).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / total).collect()
        })
        .collect();
    let mut cur = 0;
    (0..len)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut next = n - 1;
            for (k, p) in rows[cur].iter().enumerate() {
                acc += p;
                if u < acc {
                    next = k;
                    break;
                }
            }
            cur = next;
            format!("w{cur:02}")
        })
        .collect()
}

/// A slow random walk over `n` words: each step moves 0, 1 or 2 ids
/// forward, so pairs far apart on the ring are never observed.
pub fn walk_tokens(n: usize, len: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cur = 0;
    (0..len)
        .map(|_| {
            cur = (cur + rng.random_range(0..3)) % n;
            format!("w{cur:02}")
        })
        .collect()
}

pub struct Instance {
    pub vocab: Vocabulary,
    pub stats: CooccurrenceStats,
    pub pmi: PmiMatrix,
}

pub fn instance_from_tokens(tokens: &[String], window: usize) -> Instance {
    let vocab = build_vocab(tokens, 1).unwrap();
    let stream = encode(tokens, &vocab);
    let stats = count_stream(&stream, window, vocab.len(), 1).unwrap();
    let pmi = build_pmi_matrix(&stats).unwrap();
    Instance { vocab, stats, pmi }
}

/// The n=20 synthetic instance that admits an exact factorization at d=32.
pub fn exact_instance() -> Instance {
    instance_from_tokens(&markov_tokens(FIXTURE_WORDS, FIXTURE_TOKENS, FIXTURE_SEED), FIXTURE_WINDOW)
}

pub fn exact_config() -> TrainConfig {
    TrainConfig {
        variant: Variant::D,
        dim: 32,
        epochs: 500,
        learning_rate: 0.05,
        optimizer: Optimizer::Adagrad,
        negatives: 0,
        seed: 3,
        ..TrainConfig::default()
    }
}

/// Mean squared and max absolute `w_i·c_j - PMI_ij` over stored entries.
pub fn factorization_error(pair: &pmivec::EmbeddingPair, pmi: &PmiMatrix) -> (f64, f64) {
    let mut sq = 0.0;
    let mut max: f64 = 0.0;
    for e in pmi.entries() {
        let r = pair.target(e.i as usize).dot(&pair.context(e.j as usize)) - e.pmi;
        sq += r * r;
        max = max.max(r.abs());
    }
    (sq / pmi.nnz() as f64, max)
}
