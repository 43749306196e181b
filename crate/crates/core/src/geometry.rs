//! Geometric diagnostics for trained target/context vector pairs.
//!
//! Complex-conjugate structure is handled in real arithmetic: with
//! `A = (W + C) / 2` and `B = (W - C) / 2`, every word satisfies
//! `w·c = |a|^2 - |b|^2`.

use ndarray::{Array2, ArrayView1, Zip};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cooccur::{self_pmi_fill, CooccurrenceStats, SelfPmi};
use crate::error::{Error, Result};
use crate::trainer::EmbeddingPair;

/// Real (`A`) and imaginary (`B`) components of an embedding pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateDecomposition {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
}

impl ConjugateDecomposition {
    /// `W = A + B`, `C = A - B`.
    pub fn recompose(&self) -> Result<EmbeddingPair> {
        EmbeddingPair::new(&self.a + &self.b, &self.a - &self.b)
    }
}

pub fn decompose(pair: &EmbeddingPair) -> ConjugateDecomposition {
    let mut a = Array2::zeros(pair.w().raw_dim());
    let mut b = Array2::zeros(pair.w().raw_dim());
    Zip::from(&mut a)
        .and(&mut b)
        .and(pair.w())
        .and(pair.c())
        .for_each(|a, b, &w, &c| {
            *a = (w + c) / 2.0;
            *b = (w - c) / 2.0;
        });
    ConjugateDecomposition { a, b }
}

/// Per-word `w_i·c_i - (|a_i|^2 - |b_i|^2)`.
pub fn conjugate_identity_residuals(pair: &EmbeddingPair, dec: &ConjugateDecomposition) -> Vec<f64> {
    (0..pair.n())
        .map(|i| {
            let wc = pair.target(i).dot(&pair.context(i));
            let a = dec.a.row(i);
            let b = dec.b.row(i);
            wc - (a.dot(&a) - b.dot(&b))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WordGeometry {
    /// Angle between the word's target and context vectors, in `[0, pi]`.
    pub internal_angle: f64,
    pub norm_w: f64,
    pub norm_c: f64,
    /// `sqrt(max(PMI_ii, 0))`.
    pub min_length: f64,
    /// Set when `PMI_ii < 0` and the minimum length was clamped to zero.
    pub min_length_clamped: bool,
    pub self_dot: f64,
    pub self_pmi: f64,
}

impl WordGeometry {
    /// How far `w·c` is from `PMI_ii`.
    pub fn self_residual(&self) -> f64 {
        self.self_dot - self.self_pmi
    }
}

fn angle(u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> Option<(f64, f64, f64, f64)> {
    let nu = u.dot(&u).sqrt();
    let nv = v.dot(&v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return None;
    }
    let d = u.dot(&v);
    Some(((d / (nu * nv)).clamp(-1.0, 1.0).acos(), nu, nv, d))
}

pub fn word_geometry(pair: &EmbeddingPair, self_pmi: f64, i: usize) -> Result<WordGeometry> {
    if i >= pair.n() {
        return Err(Error::IndexOutOfRange { index: i, n: pair.n() });
    }
    let (internal_angle, norm_w, norm_c, self_dot) =
        angle(pair.target(i), pair.context(i)).ok_or(Error::ZeroNorm(i))?;
    Ok(WordGeometry {
        internal_angle,
        norm_w,
        norm_c,
        min_length: self_pmi.max(0.0).sqrt(),
        min_length_clamped: self_pmi < 0.0,
        self_dot,
        self_pmi,
    })
}

/// Length of the component placed in a new dimension when a vector of
/// minimum length `d` must project onto a point of norm `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitHeight {
    /// `d >= s`: the vector is propped up by a real height `sqrt(d^2 - s^2)`.
    Real(f64),
    /// `d < s`: target and context split into conjugates `s ± b i`,
    /// `b = sqrt(s^2 - d^2)`.
    Imaginary(f64),
}

pub fn split_height(min_length: f64, s_norm: f64) -> Result<SplitHeight> {
    if !(min_length >= 0.0) || !(s_norm >= 0.0) {
        return Err(Error::invalid("split_height", "lengths must be non-negative"));
    }
    let disc = (min_length - s_norm) * (min_length + s_norm);
    Ok(if disc >= 0.0 {
        SplitHeight::Real(disc.sqrt())
    } else {
        SplitHeight::Imaginary((-disc).sqrt())
    })
}

/// Distribution of a residual vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub mean_abs: f64,
    pub median_abs: f64,
    pub max_abs: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let count = values.len();
        if count == 0 {
            return Summary {
                count,
                mean: 0.0,
                mean_abs: 0.0,
                median_abs: 0.0,
                max_abs: 0.0,
            };
        }
        let mut abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        abs.sort_by(f64::total_cmp);
        let median_abs = if count % 2 == 1 {
            abs[count / 2]
        } else {
            (abs[count / 2 - 1] + abs[count / 2]) / 2.0
        };
        Summary {
            count,
            mean: values.iter().sum::<f64>() / count as f64,
            mean_abs: abs.iter().sum::<f64>() / count as f64,
            median_abs,
            max_abs: *abs.last().unwrap(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairResidual {
    pub i: u32,
    pub j: u32,
    pub residual: f64,
}

/// Marginal and self-joint probabilities backing the residual checks.
struct Probabilities<'a> {
    stats: &'a CooccurrenceStats,
    fill: SelfPmi,
}

impl<'a> Probabilities<'a> {
    fn new(pair: &EmbeddingPair, stats: &'a CooccurrenceStats) -> Result<Self> {
        if pair.n() != stats.n() {
            return Err(Error::ShapeMismatch(format!(
                "{} embedding rows for {} words in the statistics",
                pair.n(),
                stats.n()
            )));
        }
        Ok(Probabilities {
            stats,
            fill: self_pmi_fill(stats)?,
        })
    }

    fn log_marginal(&self, i: u32) -> f64 {
        self.stats.p_target(i).ln()
    }

    fn log_self_joint(&self, i: u32) -> f64 {
        self.fill.joint(self.stats, i).ln()
    }
}

fn self_dot(pair: &EmbeddingPair, i: usize) -> f64 {
    pair.target(i).dot(&pair.context(i))
}

/// `(w_i - w_j)·(c_i - c_j)`.
fn difference_dot(pair: &EmbeddingPair, i: usize, j: usize) -> f64 {
    let dw = &pair.target(i) - &pair.target(j);
    let dc = &pair.context(i) - &pair.context(j);
    dw.dot(&dc)
}

/// Observed pairs with `i != j`, a seeded uniform sample of at most `size`.
pub fn sample_pairs(stats: &CooccurrenceStats, size: usize, seed: u64) -> Vec<(u32, u32)> {
    let off: Vec<(u32, u32)> = stats
        .pairs()
        .iter()
        .filter(|p| p.0 != p.1)
        .map(|&(i, j, _)| (i, j))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = sample(&mut rng, off.len(), size.min(off.len())).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|k| off[k]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogProbabilityReport {
    /// `log p(w_i) - (-w_i·c_i / 2 + log p(w_i, w_i') / 2)` per word.
    pub word_residuals: Vec<f64>,
    /// `log p(w_i, w_j') - (-(w_i - w_j)·(c_i - c_j) / 2 + log(p_ii p_jj) / 2)`.
    pub pair_residuals: Vec<PairResidual>,
    pub word_summary: Summary,
    pub pair_summary: Summary,
}

/// Check how closely the embeddings reproduce marginal and joint
/// log-probabilities through their self and difference dot products.
///
/// Marginals are target-side estimates; the self-joint uses the fill-in value
/// for words never observed with themselves.
pub fn log_probability_residuals(
    pair: &EmbeddingPair,
    stats: &CooccurrenceStats,
    pairs: &[(u32, u32)],
) -> Result<LogProbabilityReport> {
    let probs = Probabilities::new(pair, stats)?;
    let word_residuals: Vec<f64> = (0..pair.n())
        .map(|i| {
            let id = i as u32;
            probs.log_marginal(id) - (-self_dot(pair, i) / 2.0 + probs.log_self_joint(id) / 2.0)
        })
        .collect();
    let pair_residuals = pairs
        .iter()
        .map(|&(i, j)| {
            Ok(PairResidual {
                i,
                j,
                residual: pair_residual(pair, &probs, i, j)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let word_summary = Summary::of(&word_residuals);
    let pair_summary = Summary::of(&pair_residuals.iter().map(|r| r.residual).collect::<Vec<_>>());
    Ok(LogProbabilityReport {
        word_residuals,
        pair_residuals,
        word_summary,
        pair_summary,
    })
}

fn check_pair(pair: &EmbeddingPair, i: u32, j: u32) -> Result<()> {
    for id in [i, j] {
        if id as usize >= pair.n() {
            return Err(Error::IndexOutOfRange {
                index: id as usize,
                n: pair.n(),
            });
        }
    }
    Ok(())
}

fn log_joint(probs: &Probabilities<'_>, i: u32, j: u32) -> Result<f64> {
    if i == j {
        return Ok(probs.log_self_joint(i));
    }
    let p = probs.stats.p_joint(i, j);
    if p == 0.0 {
        return Err(Error::invalid("pairs", format!("pair ({i}, {j}) was never observed")));
    }
    Ok(p.ln())
}

fn pair_residual(pair: &EmbeddingPair, probs: &Probabilities<'_>, i: u32, j: u32) -> Result<f64> {
    check_pair(pair, i, j)?;
    let model = -difference_dot(pair, i as usize, j as usize) / 2.0
        + (probs.log_self_joint(i) + probs.log_self_joint(j)) / 2.0;
    Ok(log_joint(probs, i, j)? - model)
}

/// Residual of the pairwise identity for a single pair. For `i == j` the
/// vector difference vanishes and the identity holds trivially.
pub fn pair_identity_residual(pair: &EmbeddingPair, stats: &CooccurrenceStats, i: u32, j: u32) -> Result<f64> {
    let probs = Probabilities::new(pair, stats)?;
    pair_residual(pair, &probs, i, j)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiSphereReport {
    /// `exp(-w_i·c_i / 2) - p(w_i) / sqrt(p(w_i, w_i'))` per word.
    pub word_residuals: Vec<f64>,
    /// `exp(-(w_i - w_j)·(c_i - c_j) / 2) - p(w_i, w_j') / sqrt(p_ii p_jj)`.
    pub pair_residuals: Vec<PairResidual>,
    pub word_summary: Summary,
    pub pair_summary: Summary,
    /// Same comparisons as `|lhs / rhs - 1|`, scale free.
    pub word_relative: Summary,
    pub pair_relative: Summary,
}

/// Exponentiated form of [`log_probability_residuals`].
pub fn quasi_sphere_check(
    pair: &EmbeddingPair,
    stats: &CooccurrenceStats,
    pairs: &[(u32, u32)],
) -> Result<QuasiSphereReport> {
    let probs = Probabilities::new(pair, stats)?;
    let mut word_residuals = Vec::with_capacity(pair.n());
    let mut word_rel = Vec::with_capacity(pair.n());
    for i in 0..pair.n() {
        let id = i as u32;
        let lhs = (-self_dot(pair, i) / 2.0).exp();
        let rhs = (probs.log_marginal(id) - probs.log_self_joint(id) / 2.0).exp();
        word_residuals.push(lhs - rhs);
        word_rel.push(lhs / rhs - 1.0);
    }
    let mut pair_residuals = Vec::with_capacity(pairs.len());
    let mut pair_rel = Vec::with_capacity(pairs.len());
    for &(i, j) in pairs {
        check_pair(pair, i, j)?;
        let lhs = (-difference_dot(pair, i as usize, j as usize) / 2.0).exp();
        let rhs = (log_joint(&probs, i, j)? - (probs.log_self_joint(i) + probs.log_self_joint(j)) / 2.0).exp();
        pair_residuals.push(PairResidual {
            i,
            j,
            residual: lhs - rhs,
        });
        pair_rel.push(lhs / rhs - 1.0);
    }
    Ok(QuasiSphereReport {
        word_summary: Summary::of(&word_residuals),
        pair_summary: Summary::of(&pair_residuals.iter().map(|r| r.residual).collect::<Vec<_>>()),
        word_relative: Summary::of(&word_rel),
        pair_relative: Summary::of(&pair_rel),
        word_residuals,
        pair_residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::f64::consts::{FRAC_PI_2, SQRT_2};

    fn pair(w: Array2<f64>, c: Array2<f64>) -> EmbeddingPair {
        EmbeddingPair::new(w, c).unwrap()
    }

    #[test]
    fn decompose_edge_cases() {
        let w = array![[1.0, -2.0], [0.5, 3.0]];
        let d = decompose(&pair(w.clone(), w.clone()));
        assert_eq!(d.a, w);
        assert!(d.b.iter().all(|&v| v == 0.0));

        let d = decompose(&pair(w.clone(), -&w));
        assert!(d.a.iter().all(|&v| v == 0.0));
        assert_eq!(d.recompose().unwrap().w(), &w);
    }

    #[test]
    fn word_geometry_examples() {
        let p = pair(array![[1.0, 2.0]], array![[1.0, 2.0]]);
        let g = word_geometry(&p, 5.0, 0).unwrap();
        // arccos is ill-conditioned near 1, so a rounding-level cosine error shows up as ~1e-8
        assert!(g.internal_angle < 1e-7);
        assert_eq!(g.self_dot, 5.0);

        let p = pair(array![[1.0, 0.0]], array![[0.0, 3.0]]);
        let g = word_geometry(&p, 1.0, 0).unwrap();
        assert!((g.internal_angle - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(g.self_dot, 0.0);

        let p = pair(array![[1.0, 1.0]], array![[1.0, -1.0]]);
        let g = word_geometry(&p, 2.0, 0).unwrap();
        assert!((g.internal_angle - FRAC_PI_2).abs() < 1e-15);
        assert!((g.min_length - SQRT_2).abs() < 1e-15);
        assert!((g.norm_w - SQRT_2).abs() < 1e-15);
        assert_eq!(g.self_residual(), -2.0);
    }

    #[test]
    fn word_geometry_errors_and_clamp() {
        let p = pair(array![[0.0, 0.0]], array![[1.0, 0.0]]);
        assert!(matches!(word_geometry(&p, 1.0, 0), Err(Error::ZeroNorm(0))));
        assert!(word_geometry(&p, 1.0, 3).is_err());

        let p = pair(array![[1.0, 0.0]], array![[-1.0, 0.0]]);
        let g = word_geometry(&p, -0.5, 0).unwrap();
        assert_eq!(g.min_length, 0.0);
        assert!(g.min_length_clamped);
        assert!((g.internal_angle - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn split_height_examples() {
        assert_eq!(split_height(5.0, 3.0).unwrap(), SplitHeight::Real(4.0));
        assert_eq!(split_height(3.0, 5.0).unwrap(), SplitHeight::Imaginary(4.0));
        assert_eq!(split_height(2.5, 2.5).unwrap(), SplitHeight::Real(0.0));
        assert!(split_height(-1.0, 1.0).is_err());
    }

    #[test]
    fn summary_of_residuals() {
        let s = Summary::of(&[1.0, -3.0, 2.0, 0.0]);
        assert_eq!(s.count, 4);
        assert_eq!(s.mean, 0.0);
        assert_eq!(s.mean_abs, 1.5);
        assert_eq!(s.median_abs, 1.5);
        assert_eq!(s.max_abs, 3.0);
        assert_eq!(Summary::of(&[]).count, 0);
    }
}
