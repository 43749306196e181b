//! Two-dimensional views of the target vectors relative to one context
//! vector, and buckets of words by empirical conditional log-probability.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cooccur::CooccurrenceStats;
use crate::error::{Error, Result};
use crate::trainer::EmbeddingPair;

pub const CSV_HEADER: &str = "word,x,y,bucket,log_prob";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourPoint {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourProjection {
    pub context: u32,
    pub context_norm: f64,
    /// Targets in id order; zero-norm targets are absent.
    pub points: Vec<ContourPoint>,
    pub skipped_zero_norm: usize,
}

impl ContourProjection {
    /// Where the context vector itself lands: on the positive x axis.
    pub fn context_point(&self) -> (f64, f64) {
        (self.context_norm, 0.0)
    }

    pub fn point(&self, id: u32) -> Option<&ContourPoint> {
        self.points
            .binary_search_by_key(&id, |p| p.id)
            .ok()
            .map(|k| &self.points[k])
    }
}

/// Place every target `v_i` in the plane at `|v_i| (cos t, sin t)`, where `t`
/// is its angle to the context vector of word `context`.
pub fn project_relative(pair: &EmbeddingPair, context: u32) -> Result<ContourProjection> {
    let n = pair.n();
    if context as usize >= n {
        return Err(Error::IndexOutOfRange {
            index: context as usize,
            n,
        });
    }
    let cj = pair.context(context as usize);
    let context_norm = cj.dot(&cj).sqrt();
    if context_norm == 0.0 {
        return Err(Error::ZeroNorm(context as usize));
    }
    let mut points = Vec::with_capacity(n);
    let mut skipped = 0;
    for i in 0..n {
        let v = pair.target(i);
        let norm = v.dot(&v).sqrt();
        if norm == 0.0 {
            skipped += 1;
            continue;
        }
        let cos = (v.dot(&cj) / (norm * context_norm)).clamp(-1.0, 1.0);
        let theta = cos.acos();
        points.push(ContourPoint {
            id: i as u32,
            x: norm * cos,
            y: norm * theta.sin(),
            theta,
        });
    }
    Ok(ContourProjection {
        context,
        context_norm,
        points,
        skipped_zero_norm: skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbabilityKind {
    /// `p(c_j | w_i) = count(i, j) / target_count(i)`.
    ContextGivenTarget,
    /// `p(w_i | c_j) = count(i, j) / context_count(j)`.
    TargetGivenContext,
}

impl fmt::Display for ProbabilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbabilityKind::ContextGivenTarget => "context_given_target",
            ProbabilityKind::TargetGivenContext => "target_given_context",
        })
    }
}

impl FromStr for ProbabilityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "context_given_target" | "c|w" => Ok(ProbabilityKind::ContextGivenTarget),
            "target_given_context" | "w|c" => Ok(ProbabilityKind::TargetGivenContext),
            _ => Err(Error::invalid("kind", format!("unknown probability kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bucket {
    pub center: f64,
    /// Word ids in increasing order.
    pub members: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourBuckets {
    pub kind: ProbabilityKind,
    pub context: u32,
    pub half_width: f64,
    pub buckets: Vec<Bucket>,
    /// Empirical log-probability per word id; `None` when the pair never occurs.
    pub log_probs: Vec<Option<f64>>,
    /// True when two centers are closer than `2 * half_width`.
    pub overlapping: bool,
}

impl ContourBuckets {
    pub fn unobserved(&self) -> usize {
        self.log_probs.iter().filter(|p| p.is_none()).count()
    }
}

pub fn bucket_by_logprob(
    stats: &CooccurrenceStats,
    kind: ProbabilityKind,
    context: u32,
    centers: &[f64],
    half_width: f64,
) -> Result<ContourBuckets> {
    let n = stats.n();
    if context as usize >= n {
        return Err(Error::IndexOutOfRange {
            index: context as usize,
            n,
        });
    }
    if centers.is_empty() {
        return Err(Error::invalid("centers", "need at least one bucket center"));
    }
    if centers.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("centers", "must be finite"));
    }
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::invalid("half_width", "must be positive"));
    }

    let log_probs: Vec<Option<f64>> = (0..n as u32)
        .map(|i| {
            let joint = stats.count(i, context);
            if joint == 0 {
                return None;
            }
            let denom = match kind {
                ProbabilityKind::ContextGivenTarget => stats.target_counts()[i as usize],
                ProbabilityKind::TargetGivenContext => stats.context_counts()[context as usize],
            };
            Some((joint as f64 / denom as f64).ln())
        })
        .collect();

    let buckets = centers
        .iter()
        .map(|&center| Bucket {
            center,
            members: log_probs
                .iter()
                .enumerate()
                .filter(|(_, lp)| lp.is_some_and(|lp| (lp - center).abs() <= half_width))
                .map(|(i, _)| i as u32)
                .collect(),
        })
        .collect();

    let mut sorted = centers.to_vec();
    sorted.sort_by(f64::total_cmp);
    let overlapping = sorted.windows(2).any(|w| w[1] - w[0] < 2.0 * half_width);

    Ok(ContourBuckets {
        kind,
        context,
        half_width,
        buckets,
        log_probs,
        overlapping,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BucketSpread {
    pub center: f64,
    pub count: usize,
    pub mean_x: f64,
    pub std_x: f64,
}

/// Directional contour statistics over the non-empty buckets, ordered by center.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourSummary {
    pub buckets: Vec<BucketSpread>,
    /// Population standard deviation of the per-bucket mean x.
    pub between_spread: f64,
    pub max_within_std: f64,
    pub monotone_mean_x: bool,
    pub within_below_between: bool,
}

pub fn summarize(projection: &ContourProjection, buckets: &ContourBuckets) -> ContourSummary {
    let mut spreads: Vec<BucketSpread> = buckets
        .buckets
        .iter()
        .filter_map(|b| {
            let xs: Vec<f64> = b.members.iter().filter_map(|&id| projection.point(id)).map(|p| p.x).collect();
            if xs.is_empty() {
                return None;
            }
            let (mean_x, std_x) = mean_std(&xs);
            Some(BucketSpread {
                center: b.center,
                count: xs.len(),
                mean_x,
                std_x,
            })
        })
        .collect();
    spreads.sort_by(|a, b| a.center.total_cmp(&b.center));
    let means: Vec<f64> = spreads.iter().map(|s| s.mean_x).collect();
    let between_spread = if means.is_empty() { 0.0 } else { mean_std(&means).1 };
    let max_within_std = spreads.iter().map(|s| s.std_x).fold(0.0, f64::max);
    ContourSummary {
        monotone_mean_x: means.windows(2).all(|w| w[0] < w[1]),
        within_below_between: spreads.len() >= 2 && max_within_std < between_spread,
        buckets: spreads,
        between_spread,
        max_within_std,
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourRow {
    pub word: String,
    pub x: f64,
    pub y: f64,
    pub bucket: f64,
    pub log_prob: f64,
}

/// One row per (word, bucket) membership, ordered by word id then bucket.
pub fn contour_rows(
    projection: &ContourProjection,
    buckets: &ContourBuckets,
    words: &[String],
) -> Result<Vec<ContourRow>> {
    if words.len() != buckets.log_probs.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} words but statistics cover {}",
            words.len(),
            buckets.log_probs.len()
        )));
    }
    if projection.context != buckets.context {
        return Err(Error::invalid("context", "projection and buckets use different context words"));
    }
    let mut rows = Vec::new();
    for p in &projection.points {
        let Some(log_prob) = buckets.log_probs.get(p.id as usize).copied().flatten() else {
            continue;
        };
        for b in &buckets.buckets {
            if b.members.binary_search(&p.id).is_ok() {
                rows.push(ContourRow {
                    word: words[p.id as usize].clone(),
                    x: p.x,
                    y: p.y,
                    bucket: b.center,
                    log_prob,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_contour_csv<W: Write>(rows: &[ContourRow], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        if r.word.contains([',', '\n', '"']) {
            return Err(Error::invalid("word", format!("`{}` cannot be written to CSV unquoted", r.word)));
        }
        writeln!(w, "{},{},{},{},{}", r.word, r.x, r.y, r.bucket, r.log_prob)?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_contour_csv(
    projection: &ContourProjection,
    buckets: &ContourBuckets,
    words: &[String],
    path: impl AsRef<Path>,
) -> Result<usize> {
    let path = path.as_ref();
    let rows = contour_rows(projection, buckets, words)?;
    let f = File::create(path).map_err(|e| Error::file(path, e))?;
    write_contour_csv(&rows, BufWriter::new(f))?;
    Ok(rows.len())
}

pub fn read_contour_csv<R: BufRead>(r: R) -> Result<Vec<ContourRow>> {
    let mut lines = r.lines();
    match lines.next().transpose()? {
        Some(h) if h.trim_end() == CSV_HEADER => {}
        _ => return Err(Error::parse(1, format!("expected header `{CSV_HEADER}`"))),
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        let lineno = k + 2;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(Error::parse(lineno, format!("expected 5 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::parse(lineno, format!("bad number `{s}`")));
        rows.push(ContourRow {
            word: f[0].to_string(),
            x: num(f[1])?,
            y: num(f[2])?,
            bucket: num(f[3])?,
            log_prob: num(f[4])?,
        });
    }
    Ok(rows)
}

pub fn load_contour_csv(path: impl AsRef<Path>) -> Result<Vec<ContourRow>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::file(path, e))?;
    read_contour_csv(BufReader::new(f))
}
