use std::collections::HashSet;

use rand::Rng;

use crate::cooccur::PmiMatrix;
use crate::error::{Error, Result};

/// Attempts allowed per requested negative before giving up.
pub const REJECTION_CAP_PER_NEGATIVE: usize = 1000;

/// Membership test for observed `(target, context)` pairs.
pub trait PairSet {
    fn contains_pair(&self, i: u32, j: u32) -> bool;
}

impl PairSet for PmiMatrix {
    fn contains_pair(&self, i: u32, j: u32) -> bool {
        self.contains(i, j)
    }
}

impl PairSet for HashSet<(u32, u32)> {
    fn contains_pair(&self, i: u32, j: u32) -> bool {
        self.contains(&(i, j))
    }
}

/// Draw `k` ordered pairs uniformly from `{0..n}^2`, rejecting self-pairs
/// and pairs in `observed`.
pub fn draw_negatives<R, S>(rng: &mut R, n: usize, k: usize, observed: &S) -> Result<Vec<(u32, u32)>>
where
    R: Rng + ?Sized,
    S: PairSet + ?Sized,
{
    let mut out = Vec::with_capacity(k);
    draw_negatives_into(rng, n, k, observed, &mut out)?;
    Ok(out)
}

pub(crate) fn draw_negatives_into<R, S>(
    rng: &mut R,
    n: usize,
    k: usize,
    observed: &S,
    out: &mut Vec<(u32, u32)>,
) -> Result<()>
where
    R: Rng + ?Sized,
    S: PairSet + ?Sized,
{
    out.clear();
    if k == 0 {
        return Ok(());
    }
    let cap = REJECTION_CAP_PER_NEGATIVE * k;
    let n = n as u32;
    let mut attempts = 0;
    while out.len() < k {
        if attempts == cap {
            return Err(Error::NegativeSamplingExhausted { attempts });
        }
        attempts += 1;
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j && !observed.contains_pair(i, j) {
            out.push((i, j));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_negatives_is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let set: HashSet<(u32, u32)> = HashSet::new();
        assert!(draw_negatives(&mut rng, 10, 0, &set).unwrap().is_empty());
    }

    #[test]
    fn dense_matrix_exhausts() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let set: HashSet<(u32, u32)> = [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().collect();
        assert!(matches!(
            draw_negatives(&mut rng, 2, 3, &set),
            Err(Error::NegativeSamplingExhausted { attempts: 3000 })
        ));
    }

    #[test]
    fn draws_avoid_observed_and_self() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let set: HashSet<(u32, u32)> = [(0, 1), (1, 2), (2, 0)].into_iter().collect();
        let draws = draw_negatives(&mut rng, 3, 500, &set).unwrap();
        assert_eq!(draws.len(), 500);
        for (i, j) in draws {
            assert_ne!(i, j);
            assert!(!set.contains(&(i, j)));
        }
    }

    #[test]
    fn seeded_draws_reproduce() {
        let set: HashSet<(u32, u32)> = HashSet::new();
        let a = draw_negatives(&mut ChaCha8Rng::seed_from_u64(9), 50, 20, &set).unwrap();
        let b = draw_negatives(&mut ChaCha8Rng::seed_from_u64(9), 50, 20, &set).unwrap();
        assert_eq!(a, b);
    }
}
