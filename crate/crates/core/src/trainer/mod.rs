//! Stochastic gradient training of target/context vectors against a PMI
//! matrix.
//!
//! One epoch visits every stored PMI entry once in a freshly shuffled order.
//! Each positive update is followed immediately by `k` negative updates on
//! random unobserved pairs, which are regressed toward a constant floor
//! target with the plain dot-residual loss.

mod loss;
mod sampling;
mod store;

use std::fmt;
use std::str::FromStr;

use log::info;
use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cooccur::{CooccurrenceStats, PmiEntry, PmiMatrix};
use crate::error::{Error, Result};

pub use loss::{
    loss_and_grad_d, loss_and_grad_l, loss_and_grad_p, loss_and_grad_shifted, PairGrad, TripleGrad,
};
pub use sampling::{draw_negatives, PairSet, REJECTION_CAP_PER_NEGATIVE};

use loss::{dot_residual_into, length_penalty_into, norm_match_into};
use sampling::draw_negatives_into;
use store::{AtomicStore, DenseStore, ParamStore, Side, Step};

/// Floor applied to self-PMI before taking the square root for P2V-L
/// length targets.
pub const LENGTH_FLOOR: f64 = 1e-3;

/// Target/context matrices; row `i` of each belongs to word `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingPair {
    w: Array2<f64>,
    c: Array2<f64>,
}

impl EmbeddingPair {
    pub fn new(w: Array2<f64>, c: Array2<f64>) -> Result<Self> {
        if w.dim() != c.dim() {
            return Err(Error::ShapeMismatch(format!(
                "target matrix {:?} vs context matrix {:?}",
                w.dim(),
                c.dim()
            )));
        }
        Ok(EmbeddingPair {
            w: w.as_standard_layout().into_owned(),
            c: c.as_standard_layout().into_owned(),
        })
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn w(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn c(&self) -> &Array2<f64> {
        &self.c
    }

    pub fn target(&self, i: usize) -> ArrayView1<'_, f64> {
        self.w.row(i)
    }

    pub fn context(&self, i: usize) -> ArrayView1<'_, f64> {
        self.c.row(i)
    }

    pub fn into_parts(self) -> (Array2<f64>, Array2<f64>) {
        (self.w, self.c)
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(self.c.iter()).all(|v| v.is_finite())
    }
}

/// Entries i.i.d. uniform on `[-0.5/d, 0.5/d]`.
pub fn init_embeddings(n: usize, dim: usize, seed: u64) -> Result<EmbeddingPair> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    if dim == 0 {
        return Err(Error::invalid("dim", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = 0.5 / dim as f64;
    let mut draw = |_| (rng.random::<f64>() * 2.0 - 1.0) * half;
    let w = Array2::from_shape_fn((n, dim), &mut draw);
    let c = Array2::from_shape_fn((n, dim), &mut draw);
    EmbeddingPair::new(w, c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Dot product regressed onto PMI.
    D,
    /// `D` plus length penalties toward `sqrt(PMI_ii)`.
    L,
    /// `D` plus a self-pair dot term and a norm-matching term.
    P,
    /// `D` with target `PMI - shift`.
    Shifted,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::D => "d",
            Variant::L => "l",
            Variant::P => "p",
            Variant::Shifted => "shifted",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d" | "p2v-d" => Ok(Variant::D),
            "l" | "p2v-l" => Ok(Variant::L),
            "p" | "p2v-p" => Ok(Variant::P),
            "shifted" => Ok(Variant::Shifted),
            _ => Err(Error::invalid("variant", format!("unknown variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Plain SGD with the learning rate decayed linearly over the epochs.
    Sgd,
    /// Per-parameter Adagrad.
    Adagrad,
}

/// Regression target for negative pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeTarget {
    /// Smallest stored positive PMI value.
    MinPositive,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParallelMode {
    /// Single worker; output is a pure function of the inputs.
    Deterministic,
    /// Lock-free workers over disjoint slices of each epoch; not reproducible.
    Sharded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variant: Variant,
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Negatives per positive entry.
    pub negatives: usize,
    /// Shift for [`Variant::Shifted`]; `None` means `ln(negatives)`.
    pub shift: Option<f64>,
    pub negative_target: NegativeTarget,
    pub seed: u64,
    pub parallel_mode: ParallelMode,
    pub threads: usize,
    /// Scale each positive update by `ln(1 + count)`, normalised to mean 1.
    pub count_weighted: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::D,
            dim: 100,
            epochs: 100,
            learning_rate: 0.05,
            optimizer: Optimizer::Adagrad,
            alpha1: 0.5,
            alpha2: 0.5,
            negatives: 5,
            shift: None,
            negative_target: NegativeTarget::MinPositive,
            seed: 1,
            parallel_mode: ParallelMode::Deterministic,
            threads: 1,
            count_weighted: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be positive and finite"));
        }
        for (name, a) in [("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::invalid(name, "must be non-negative and finite"));
            }
        }
        if let Some(s) = self.shift {
            if !s.is_finite() {
                return Err(Error::invalid("shift", "must be finite"));
            }
        }
        if let NegativeTarget::Fixed(t) = self.negative_target {
            if !t.is_finite() {
                return Err(Error::invalid("negative_target", "must be finite"));
            }
        }
        if self.threads == 0 {
            return Err(Error::invalid("threads", "must be at least 1"));
        }
        Ok(())
    }

    /// Shift actually applied by the shifted variant.
    pub fn resolved_shift(&self) -> f64 {
        self.shift
            .unwrap_or_else(|| (self.negatives.max(1) as f64).ln())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub mean_positive_loss: f64,
    pub mean_negative_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub embeddings: EmbeddingPair,
    pub trace: Vec<EpochLoss>,
    /// Negative-pair target actually used (before any shift).
    pub negative_target: f64,
    /// Words whose length target was raised to `sqrt(LENGTH_FLOOR)`.
    pub clamped_lengths: usize,
}

/// Train with uniform per-entry weights.
pub fn train(pmi: &PmiMatrix, config: &TrainConfig) -> Result<TrainOutput> {
    train_with_counts(pmi, config, None)
}

/// Train; `stats` supplies pair counts when `config.count_weighted` is set.
pub fn train_with_counts(
    pmi: &PmiMatrix,
    config: &TrainConfig,
    stats: Option<&CooccurrenceStats>,
) -> Result<TrainOutput> {
    config.validate()?;
    if pmi.n() < 2 {
        return Err(Error::invalid("pmi", "vocabulary must have at least 2 words"));
    }
    let weights = match (config.count_weighted, stats) {
        (false, _) => None,
        (true, Some(stats)) => Some(count_weights(pmi, stats)?),
        (true, None) => {
            return Err(Error::invalid("count_weighted", "requires co-occurrence counts"));
        }
    };

    let init = init_embeddings(pmi.n(), config.dim, config.seed)?;
    let ctx = Context::new(pmi, config, weights);
    if config.variant == Variant::L && ctx.clamped_lengths > 0 {
        info!(
            "{} of {} words have self-PMI below {LENGTH_FLOOR}; length target clamped",
            ctx.clamped_lengths,
            pmi.n()
        );
    }

    let (w, c) = init.into_parts();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..pmi.nnz()).collect();
    let mut trace = Vec::with_capacity(config.epochs);

    let embeddings = match config.parallel_mode {
        ParallelMode::Deterministic => {
            let mut store = DenseStore::new(w, c);
            let mut worker = Worker::new(config.dim, rng.clone());
            for epoch in 0..config.epochs {
                order.shuffle(&mut rng);
                let step = ctx.step(epoch);
                let sums = worker.run(&ctx, &mut store, &order, step, epoch)?;
                trace.push(sums.to_epoch_loss(epoch + 1));
            }
            store.into_matrices()
        }
        ParallelMode::Sharded => {
            let store = AtomicStore::new(w, c);
            let threads = config.threads;
            for epoch in 0..config.epochs {
                order.shuffle(&mut rng);
                let step = ctx.step(epoch);
                let chunk = order.len().div_ceil(threads).max(1);
                let results: Vec<Result<LossSums>> = std::thread::scope(|s| {
                    let handles: Vec<_> = order
                        .chunks(chunk)
                        .enumerate()
                        .map(|(t, part)| {
                            let ctx = &ctx;
                            let mut view = store.view();
                            let mut wrng = ChaCha8Rng::seed_from_u64(config.seed);
                            wrng.set_stream(2 + (epoch * threads + t) as u64);
                            s.spawn(move || Worker::new(config.dim, wrng).run(ctx, &mut view, part, step, epoch))
                        })
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("training worker panicked"))
                        .collect()
                });
                let mut sums = LossSums::default();
                for r in results {
                    sums.add(&r?);
                }
                trace.push(sums.to_epoch_loss(epoch + 1));
            }
            store.into_matrices()
        }
    };

    let embeddings = EmbeddingPair::new(embeddings.0, embeddings.1)?;
    Ok(TrainOutput {
        embeddings,
        trace,
        negative_target: ctx.negative_target,
        clamped_lengths: ctx.clamped_lengths,
    })
}

fn count_weights(pmi: &PmiMatrix, stats: &CooccurrenceStats) -> Result<Vec<f64>> {
    let raw: Vec<f64> = pmi
        .entries()
        .iter()
        .map(|e| match stats.count(e.i, e.j) {
            0 => Err(Error::Format(format!(
                "PMI entry ({}, {}) has no count in the co-occurrence statistics",
                e.i, e.j
            ))),
            c => Ok((c as f64).ln_1p()),
        })
        .collect::<Result<_>>()?;
    let mean = raw.iter().sum::<f64>() / raw.len().max(1) as f64;
    Ok(raw.into_iter().map(|w| w / mean).collect())
}

/// Read-only state shared by every worker.
struct Context<'a> {
    pmi: &'a PmiMatrix,
    variant: Variant,
    alpha1: f64,
    alpha2: f64,
    negatives: usize,
    shift: f64,
    negative_target: f64,
    length_targets: Vec<f64>,
    clamped_lengths: usize,
    weights: Option<Vec<f64>>,
    learning_rate: f64,
    optimizer: Optimizer,
    epochs: usize,
}

impl<'a> Context<'a> {
    fn new(pmi: &'a PmiMatrix, config: &TrainConfig, weights: Option<Vec<f64>>) -> Self {
        let clamped_lengths = pmi.self_pmi().iter().filter(|&&v| v < LENGTH_FLOOR).count();
        let length_targets = pmi
            .self_pmi()
            .iter()
            .map(|&v| v.max(LENGTH_FLOOR).sqrt())
            .collect();
        let negative_target = match config.negative_target {
            NegativeTarget::MinPositive => pmi.min_pmi().unwrap_or(0.0),
            NegativeTarget::Fixed(t) => t,
        };
        Context {
            pmi,
            variant: config.variant,
            alpha1: config.alpha1,
            alpha2: config.alpha2,
            negatives: config.negatives,
            shift: config.resolved_shift(),
            negative_target,
            length_targets,
            clamped_lengths,
            weights,
            learning_rate: config.learning_rate,
            optimizer: config.optimizer,
            epochs: config.epochs,
        }
    }

    fn step(&self, epoch: usize) -> Step {
        match self.optimizer {
            Optimizer::Adagrad => Step {
                lr: self.learning_rate,
                adagrad: true,
            },
            Optimizer::Sgd => {
                let progress = epoch as f64 / self.epochs.max(1) as f64;
                Step {
                    lr: self.learning_rate * (1.0 - progress).max(1e-4),
                    adagrad: false,
                }
            }
        }
    }

    /// Target used by the dot-residual term of a positive entry.
    fn positive_target(&self, pmi: f64) -> f64 {
        match self.variant {
            Variant::Shifted => pmi - self.shift,
            _ => pmi,
        }
    }

    fn negative_dot_target(&self) -> f64 {
        self.positive_target(self.negative_target)
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct LossSums {
    positive: f64,
    n_positive: usize,
    negative: f64,
    n_negative: usize,
}

impl LossSums {
    fn add(&mut self, o: &LossSums) {
        self.positive += o.positive;
        self.n_positive += o.n_positive;
        self.negative += o.negative;
        self.n_negative += o.n_negative;
    }

    fn to_epoch_loss(self, epoch: usize) -> EpochLoss {
        let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
        EpochLoss {
            epoch,
            mean_positive_loss: mean(self.positive, self.n_positive),
            mean_negative_loss: mean(self.negative, self.n_negative),
        }
    }
}

/// Scratch buffers and rng for one worker.
struct Worker {
    rng: ChaCha8Rng,
    v: Vec<f64>,
    c: Vec<f64>,
    c_self: Vec<f64>,
    gv: Vec<f64>,
    gc: Vec<f64>,
    gs: Vec<f64>,
    scratch: Vec<f64>,
    negatives: Vec<(u32, u32)>,
}

impl Worker {
    fn new(dim: usize, rng: ChaCha8Rng) -> Self {
        Worker {
            rng,
            v: vec![0.0; dim],
            c: vec![0.0; dim],
            c_self: vec![0.0; dim],
            gv: vec![0.0; dim],
            gc: vec![0.0; dim],
            gs: vec![0.0; dim],
            scratch: vec![0.0; dim],
            negatives: Vec::new(),
        }
    }

    fn run<S: ParamStore>(
        &mut self,
        ctx: &Context<'_>,
        store: &mut S,
        order: &[usize],
        step: Step,
        epoch: usize,
    ) -> Result<LossSums> {
        let mut sums = LossSums::default();
        let entries = ctx.pmi.entries();
        for &k in order {
            let e = entries[k];
            let weight = ctx.weights.as_ref().map_or(1.0, |w| w[k]);
            let loss = self.positive(ctx, store, &e, weight, step);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, i: e.i, j: e.j });
            }
            sums.positive += loss;
            sums.n_positive += 1;

            draw_negatives_into(&mut self.rng, ctx.pmi.n(), ctx.negatives, ctx.pmi, &mut self.negatives)?;
            let target = ctx.negative_dot_target();
            for idx in 0..self.negatives.len() {
                let (a, b) = self.negatives[idx];
                let loss = self.negative(store, a as usize, b as usize, target, step);
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, i: a, j: b });
                }
                sums.negative += loss;
                sums.n_negative += 1;
            }
        }
        Ok(sums)
    }

    fn positive<S: ParamStore>(&mut self, ctx: &Context<'_>, store: &mut S, e: &PmiEntry, weight: f64, step: Step) -> f64 {
        let (i, j) = (e.i as usize, e.j as usize);
        store.read(Side::Target, i, &mut self.v);
        store.read(Side::Context, j, &mut self.c);
        self.gv.fill(0.0);
        self.gc.fill(0.0);
        let mut loss = dot_residual_into(&self.v, &self.c, ctx.positive_target(e.pmi), &mut self.gv, &mut self.gc);

        match ctx.variant {
            Variant::D | Variant::Shifted => {}
            Variant::L => {
                loss += length_penalty_into(&self.v, ctx.length_targets[i], ctx.alpha1, &mut self.gv);
                loss += length_penalty_into(&self.c, ctx.length_targets[j], ctx.alpha2, &mut self.gc);
            }
            Variant::P => {
                store.read(Side::Context, i, &mut self.c_self);
                self.gs.fill(0.0);
                self.scratch.fill(0.0);
                let self_pmi = ctx.pmi.self_pmi()[i];
                let self_term = dot_residual_into(&self.v, &self.c_self, self_pmi, &mut self.scratch, &mut self.gs);
                loss += ctx.alpha1 * self_term;
                for (g, s) in self.gv.iter_mut().zip(&self.scratch) {
                    *g += ctx.alpha1 * s;
                }
                for g in self.gs.iter_mut() {
                    *g *= ctx.alpha1;
                }
                loss += norm_match_into(&self.v, &self.c_self, ctx.alpha2, &mut self.gv, &mut self.gs);
            }
        }

        if weight != 1.0 {
            for g in self.gv.iter_mut().chain(self.gc.iter_mut()).chain(self.gs.iter_mut()) {
                *g *= weight;
            }
        }

        store.update(Side::Target, i, &self.gv, step);
        if ctx.variant == Variant::P {
            if i == j {
                for (g, s) in self.gc.iter_mut().zip(&self.gs) {
                    *g += s;
                }
            } else {
                store.update(Side::Context, i, &self.gs, step);
            }
        }
        store.update(Side::Context, j, &self.gc, step);
        loss * weight
    }

    fn negative<S: ParamStore>(&mut self, store: &mut S, i: usize, j: usize, target: f64, step: Step) -> f64 {
        store.read(Side::Target, i, &mut self.v);
        store.read(Side::Context, j, &mut self.c);
        self.gv.fill(0.0);
        self.gc.fill(0.0);
        let loss = dot_residual_into(&self.v, &self.c, target, &mut self.gv, &mut self.gc);
        store.update(Side::Target, i, &self.gv, step);
        store.update(Side::Context, j, &self.gc, step);
        loss
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cooccur::{build_pmi_matrix, count_pairs};
    use crate::corpus::PairStream;

    fn small_pmi() -> PmiMatrix {
        // a slow random walk leaves most distant pairs unobserved
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut cur = 0u32;
        let ids: Vec<u32> = (0..600)
            .map(|_| {
                cur = (cur + rng.random_range(0..3)) % 30;
                cur
            })
            .collect();
        build_pmi_matrix(&count_pairs(30, PairStream::new(&ids, 2)).unwrap()).unwrap()
    }

    #[test]
    fn init_is_reproducible_and_bounded() {
        let a = init_embeddings(5, 4, 3).unwrap();
        assert_eq!(a, init_embeddings(5, 4, 3).unwrap());
        assert_ne!(a, init_embeddings(5, 4, 4).unwrap());
        assert!(a.w().iter().chain(a.c().iter()).all(|v| v.abs() <= 0.125));

        let one = init_embeddings(1, 1, 0).unwrap();
        assert!(one.w()[[0, 0]].abs() <= 0.5 && one.c()[[0, 0]].abs() <= 0.5);
        assert!(init_embeddings(0, 1, 0).is_err());
    }

    #[test]
    fn zero_epochs_returns_init() {
        let pmi = small_pmi();
        let config = TrainConfig {
            dim: 8,
            epochs: 0,
            ..TrainConfig::default()
        };
        let out = train(&pmi, &config).unwrap();
        assert_eq!(out.embeddings, init_embeddings(30, 8, config.seed).unwrap());
        assert!(out.trace.is_empty());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let pmi = small_pmi();
        for bad in [
            TrainConfig { dim: 0, ..TrainConfig::default() },
            TrainConfig { alpha1: -1.0, ..TrainConfig::default() },
            TrainConfig { learning_rate: 0.0, ..TrainConfig::default() },
            TrainConfig { threads: 0, ..TrainConfig::default() },
        ] {
            assert!(matches!(train(&pmi, &bad), Err(Error::InvalidArgument { .. })));
        }
        let weighted = TrainConfig {
            count_weighted: true,
            ..TrainConfig::default()
        };
        assert!(train(&pmi, &weighted).is_err());
    }

    #[test]
    fn every_variant_and_optimizer_stays_finite() {
        let pmi = small_pmi();
        for variant in [Variant::D, Variant::L, Variant::P, Variant::Shifted] {
            for optimizer in [Optimizer::Adagrad, Optimizer::Sgd] {
                let config = TrainConfig {
                    variant,
                    optimizer,
                    dim: 6,
                    epochs: 5,
                    negatives: 1,
                    ..TrainConfig::default()
                };
                let out = train(&pmi, &config).unwrap();
                assert!(out.embeddings.is_finite());
                assert_eq!(out.trace.len(), 5);
            }
        }
    }

    #[test]
    fn divergence_is_reported() {
        let pmi = small_pmi();
        let config = TrainConfig {
            optimizer: Optimizer::Sgd,
            learning_rate: 1e6,
            dim: 4,
            epochs: 50,
            negatives: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&pmi, &config), Err(Error::NonFiniteLoss { .. })));
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("P2V-L".parse::<Variant>().unwrap(), Variant::L);
        assert_eq!("shifted".parse::<Variant>().unwrap(), Variant::Shifted);
        assert!("x".parse::<Variant>().is_err());
        assert_eq!(Variant::P.to_string(), "p");
    }

    #[test]
    fn default_shift_is_log_k() {
        let c = TrainConfig::default();
        assert_eq!(c.resolved_shift(), 5f64.ln());
        let c = TrainConfig { negatives: 0, ..c };
        assert_eq!(c.resolved_shift(), 0.0);
    }
}
