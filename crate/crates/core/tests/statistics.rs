//! Monte-Carlo checks of the randomised components against their target
//! distributions.

use std::collections::HashSet;

use pmivec::corpus::{build_vocab, discard_probability, subsample};
use pmivec::trainer::{draw_negatives, init_embeddings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn subsampling_keeps_expected_fraction() {
    let mut tokens = vec!["a"; 900];
    tokens.extend(vec!["b"; 100]);
    let vocab = build_vocab(&tokens, 1).unwrap();
    let t = 0.01;
    let runs = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut kept = [0u64; 2];
    for _ in 0..runs {
        for id in subsample(&tokens, &vocab, t, &mut rng).unwrap().ids() {
            kept[*id as usize] += 1;
        }
    }
    for (id, n) in [(0u32, 900.0), (1, 100.0)] {
        let keep = 1.0 - discard_probability(n / 1000.0, t);
        let mean = kept[id as usize] as f64 / runs as f64;
        let se = (n * keep * (1.0 - keep) / runs as f64).sqrt();
        assert!(
            (mean - n * keep).abs() <= 3.0 * se,
            "word {id}: kept {mean} per run, expected {} +- {}",
            n * keep,
            3.0 * se
        );
    }
}

#[test]
fn init_variance_matches_uniform() {
    let d = 100;
    // 5000 x 100 per matrix, W and C together give 1e6 draws
    let pair = init_embeddings(5000, d, 12).unwrap();
    let values: Vec<f64> = pair.w().iter().chain(pair.c().iter()).copied().collect();
    assert_eq!(values.len(), 1_000_000);
    let half = 0.5 / d as f64;
    assert!(values.iter().all(|v| v.abs() <= half));
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let expected = (2.0 * half).powi(2) / 12.0;
    assert!((var / expected - 1.0).abs() < 0.05, "variance {var} vs {expected}");
    assert!(mean.abs() < 1e-4);
}

#[test]
fn negative_sampling_is_uniform_over_allowed_pairs() {
    let n = 1000u32;
    let block = 100u32;
    let blocks = (n / block) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // dense observed patches in a few blocks make the allowed mass uneven
    let mut observed: HashSet<(u32, u32)> = HashSet::new();
    for _ in 0..20_000 {
        let i = rng.random_range(0..300);
        let j = rng.random_range(0..200);
        observed.insert((i, j));
    }

    let mut allowed = vec![0f64; blocks * blocks];
    for i in 0..n {
        for j in 0..n {
            if i != j && !observed.contains(&(i, j)) {
                allowed[(i / block) as usize * blocks + (j / block) as usize] += 1.0;
            }
        }
    }
    let total_allowed: f64 = allowed.iter().sum();

    let draws = 1_000_000;
    let mut hits = vec![0f64; blocks * blocks];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..draws / 100 {
        for (i, j) in draw_negatives(&mut rng, n as usize, 100, &observed).unwrap() {
            assert!(i != j && !observed.contains(&(i, j)));
            hits[(i / block) as usize * blocks + (j / block) as usize] += 1.0;
        }
    }

    let stat: f64 = hits
        .iter()
        .zip(&allowed)
        .map(|(o, a)| {
            let e = draws as f64 * a / total_allowed;
            (o - e) * (o - e) / e
        })
        .sum();
    let df = (blocks * blocks - 1) as f64;
    let p = 1.0 - ChiSquared::new(df).unwrap().cdf(stat);
    assert!(p > 0.01, "chi-square {stat} on {df} df, p = {p}");
}
