//! Seeded synthetic workloads for the benchmarks.

use ndarray::Array2;
use pmivec::eval::{AnalogyDataset, AnalogyQuestion};
use pmivec::{Embeddings, TokenStream};
use rand::distr::weighted::WeightedIndex;
use rand::distr::{Distribution, Uniform};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every id once, then `len` ids drawn with Zipf weights `1 / (rank + 1)`.
/// The prefix keeps rare words in the statistics, as a vocabulary
/// built from the same stream would.
pub fn zipf_stream(vocab: usize, len: usize, seed: u64) -> TokenStream {
    let weights: Vec<f64> = (0..vocab).map(|r| 1.0 / (r as f64 + 1.0)).collect();
    let dist = WeightedIndex::new(&weights).expect("positive weights");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = (0..vocab as u32)
        .chain((0..len).map(|_| dist.sample(&mut rng) as u32))
        .collect();
    TokenStream::new(ids, vocab).expect("ids in range")
}

pub fn words(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i}")).collect()
}

pub fn random_embeddings(n: usize, dim: usize, seed: u64) -> Embeddings {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(-1.0, 1.0).expect("valid range");
    let m = Array2::from_shape_simple_fn((n, dim), || unit.sample(&mut rng));
    Embeddings::new(words(n), m).expect("matching shape")
}

/// Questions over distinct random words; answers are arbitrary, so only
/// the cost of scoring is meaningful.
pub fn random_analogies(n: usize, count: usize, seed: u64) -> AnalogyDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let questions = (0..count)
        .map(|_| {
            let q = sample(&mut rng, n, 4).into_vec();
            AnalogyQuestion {
                a: format!("w{}", q[0]),
                b: format!("w{}", q[1]),
                c: format!("w{}", q[2]),
                answer: format!("w{}", q[3]),
                category: rng.random_range(0..2),
            }
        })
        .collect();
    AnalogyDataset {
        questions,
        categories: vec!["one".into(), "two".into()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workloads_are_seeded() {
        assert_eq!(zipf_stream(50, 1000, 1), zipf_stream(50, 1000, 1));
        assert_eq!(random_embeddings(10, 4, 2), random_embeddings(10, 4, 2));
        let a = random_analogies(20, 30, 3);
        assert_eq!(a, random_analogies(20, 30, 3));
        assert!(a.questions.iter().all(|q| q.a != q.b && q.b != q.c && q.c != q.answer));
    }

    #[test]
    fn zipf_head_dominates() {
        let s = zipf_stream(100, 20_000, 4);
        assert_eq!(s.len(), 20_100);
        let top = s.ids().iter().filter(|&&i| i == 0).count();
        let tail = s.ids().iter().filter(|&&i| i == 99).count();
        assert!(top > 20 * tail.max(1));
    }
}
