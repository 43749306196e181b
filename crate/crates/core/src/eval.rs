//! Word-similarity and analogy evaluation.
//!
//! Similarity: each in-vocabulary word pair is scored by cosine similarity
//! and the scores are rank-correlated (Spearman) with human ratings.
//!
//! Analogy: for "a is to b as c is to ?", the prediction is the word `d`
//! minimising `|v_a - v_b - v_c + v_d|` over the vocabulary minus the three
//! question words. The additive-cosine rule is available for comparison.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectors::Embeddings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Subset {
    All,
    Sim,
    Rel,
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subset::All => "ALL",
            Subset::Sim => "SIM",
            Subset::Rel => "REL",
        })
    }
}

impl FromStr for Subset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ALL" => Ok(Subset::All),
            "SIM" => Ok(Subset::Sim),
            "REL" => Ok(Subset::Rel),
            _ => Err(Error::invalid("subset", format!("unknown subset `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityFormat {
    /// `word1<TAB>word2<TAB>score`; `#` comments and one header line allowed.
    Tsv,
    /// The WordSim353 CSV layout: a header then `word1,word2,score`.
    Ws353Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityPair {
    pub word1: String,
    pub word2: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityDataset {
    pub pairs: Vec<SimilarityPair>,
    pub subset: Subset,
}

impl SimilarityDataset {
    /// Indices of pairs whose unordered word pair already appeared earlier.
    pub fn duplicate_pairs(&self) -> Vec<usize> {
        let mut seen = HashMap::new();
        let mut dups = Vec::new();
        for (k, p) in self.pairs.iter().enumerate() {
            let key = if p.word1 <= p.word2 {
                (p.word1.as_str(), p.word2.as_str())
            } else {
                (p.word2.as_str(), p.word1.as_str())
            };
            if seen.insert(key, k).is_some() {
                dups.push(k);
            }
        }
        dups
    }
}

pub fn parse_similarity<R: BufRead>(r: R, format: SimilarityFormat, subset: Subset) -> Result<SimilarityDataset> {
    let mut pairs = Vec::new();
    let mut seen_data = false;
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = match format {
            SimilarityFormat::Tsv => trimmed.split('\t').collect(),
            SimilarityFormat::Ws353Csv => trimmed.split(',').collect(),
        };
        let first_row = !seen_data;
        seen_data = true;
        let score = fields.get(2).and_then(|s| s.trim().parse::<f64>().ok());
        if first_row && (format == SimilarityFormat::Ws353Csv || (fields.len() >= 3 && score.is_none())) {
            // header
            continue;
        }
        if fields.len() < 3 {
            return Err(Error::parse(lineno, "expected word1, word2 and a score"));
        }
        let score = score.ok_or_else(|| Error::parse(lineno, format!("bad score `{}`", fields[2].trim())))?;
        if !score.is_finite() {
            return Err(Error::parse(lineno, "score is not finite"));
        }
        let (w1, w2) = (fields[0].trim(), fields[1].trim());
        if w1.is_empty() || w2.is_empty() {
            return Err(Error::parse(lineno, "empty word"));
        }
        pairs.push(SimilarityPair {
            word1: w1.to_lowercase(),
            word2: w2.to_lowercase(),
            score,
        });
    }
    Ok(SimilarityDataset { pairs, subset })
}

pub fn load_similarity(path: impl AsRef<Path>, format: SimilarityFormat, subset: Subset) -> Result<SimilarityDataset> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::file(path, e))?;
    parse_similarity(BufReader::new(f), format, subset)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalogyQuestion {
    pub a: String,
    pub b: String,
    pub c: String,
    pub answer: String,
    pub category: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalogyDataset {
    pub questions: Vec<AnalogyQuestion>,
    pub categories: Vec<String>,
}

/// Parse the questions-words format: `: <category>` lines open sections,
/// data lines hold four whitespace-separated words.
pub fn parse_analogy<R: BufRead>(r: R) -> Result<AnalogyDataset> {
    let mut questions = Vec::new();
    let mut categories: Vec<String> = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(cat) = trimmed.strip_prefix(':') {
            categories.push(cat.trim().to_string());
            continue;
        }
        let words: Vec<String> = trimmed.split_whitespace().map(str::to_lowercase).collect();
        let [a, b, c, answer]: [String; 4] = words
            .try_into()
            .map_err(|w: Vec<String>| Error::parse(lineno, format!("expected 4 words, found {}", w.len())))?;
        if a == b || a == c || a == answer || b == c || b == answer || c == answer {
            return Err(Error::parse(lineno, "question words must be distinct"));
        }
        if categories.is_empty() {
            categories.push("uncategorized".to_string());
        }
        questions.push(AnalogyQuestion {
            a,
            b,
            c,
            answer,
            category: categories.len() - 1,
        });
    }
    Ok(AnalogyDataset { questions, categories })
}

pub fn load_analogy(path: impl AsRef<Path>) -> Result<AnalogyDataset> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::file(path, e))?;
    parse_analogy(BufReader::new(f))
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {}", u.len(), v.len())));
    }
    let nu = u.dot(&u).sqrt();
    let nv = v.dot(&v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::invalid("cosine", "zero-norm vector"));
    }
    Ok((u.dot(&v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of the average-rank vectors.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} scores", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientCoverage {
            what: "spearman_rho",
            found: x.len(),
            needed: 2,
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("scores", "must be finite"));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimilarityResult {
    pub rho: f64,
    pub n_scored: usize,
    pub n_skipped: usize,
}

pub fn evaluate_similarity(emb: &Embeddings, dataset: &SimilarityDataset) -> Result<SimilarityResult> {
    let mut model = Vec::new();
    let mut human = Vec::new();
    for p in &dataset.pairs {
        if let (Some(u), Some(v)) = (emb.vector(&p.word1), emb.vector(&p.word2)) {
            model.push(cosine(u, v)?);
            human.push(p.score);
        }
    }
    if model.len() < 2 {
        return Err(Error::InsufficientCoverage {
            what: "similarity pairs in vocabulary",
            found: model.len(),
            needed: 2,
        });
    }
    Ok(SimilarityResult {
        rho: spearman_rho(&model, &human)?,
        n_scored: model.len(),
        n_skipped: dataset.pairs.len() - model.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalogyRule {
    /// `argmin_d |v_a - v_b - v_c + v_d|`.
    NormArgmin,
    /// `argmax_d cos(v_d, v_b - v_a + v_c)` on unit-normalised vectors.
    CosAdd,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryAccuracy {
    pub category: String,
    pub correct: usize,
    pub scored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalogyResult {
    pub accuracy: f64,
    pub n_correct: usize,
    pub n_scored: usize,
    pub n_skipped: usize,
    pub per_category: Vec<CategoryAccuracy>,
}

const ANALOGY_BATCH: usize = 256;

pub fn evaluate_analogy(emb: &Embeddings, dataset: &AnalogyDataset, rule: AnalogyRule) -> Result<AnalogyResult> {
    // (a, b, c, answer, category) as ids
    let scored: Vec<[usize; 5]> = dataset
        .questions
        .iter()
        .filter_map(|q| {
            Some([
                emb.id(&q.a)?,
                emb.id(&q.b)?,
                emb.id(&q.c)?,
                emb.id(&q.answer)?,
                q.category,
            ])
        })
        .collect();
    if scored.is_empty() {
        return Err(Error::InsufficientCoverage {
            what: "analogy questions in vocabulary",
            found: 0,
            needed: 1,
        });
    }

    let matrix = match rule {
        AnalogyRule::NormArgmin => emb.matrix().clone(),
        AnalogyRule::CosAdd => unit_rows(emb.matrix()),
    };
    let sq_norms: Array1<f64> = matrix.map_axis(Axis(1), |r| r.dot(&r));
    let mut correct = vec![0usize; dataset.categories.len().max(1)];
    let mut total = vec![0usize; dataset.categories.len().max(1)];

    for batch in scored.chunks(ANALOGY_BATCH) {
        let mut queries = Array2::zeros((batch.len(), matrix.ncols()));
        for (row, q) in queries.rows_mut().into_iter().zip(batch) {
            let (a, b, c) = (matrix.row(q[0]), matrix.row(q[1]), matrix.row(q[2]));
            let mut row = row;
            match rule {
                AnalogyRule::NormArgmin => row.assign(&(&a - &b - c)),
                AnalogyRule::CosAdd => row.assign(&(&b - &a + c)),
            }
        }
        let dots = queries.dot(&matrix.t());
        for (scores, q) in dots.rows().into_iter().zip(batch) {
            let mut best: Option<(usize, f64)> = None;
            for (d, &s) in scores.iter().enumerate() {
                if d == q[0] || d == q[1] || d == q[2] {
                    continue;
                }
                // norm rule: |x + v_d|^2 - |x|^2 = 2 x·v_d + |v_d|^2, minimised;
                // cosine rule: maximise v_d·x
                let key = match rule {
                    AnalogyRule::NormArgmin => 2.0 * s + sq_norms[d],
                    AnalogyRule::CosAdd => -s,
                };
                if best.is_none_or(|(_, k)| key < k) {
                    best = Some((d, key));
                }
            }
            total[q[4]] += 1;
            if best.map(|(d, _)| d) == Some(q[3]) {
                correct[q[4]] += 1;
            }
        }
    }

    let n_correct: usize = correct.iter().sum();
    let per_category = dataset
        .categories
        .iter()
        .enumerate()
        .filter(|&(k, _)| total[k] > 0)
        .map(|(k, name)| CategoryAccuracy {
            category: name.clone(),
            correct: correct[k],
            scored: total[k],
        })
        .collect();
    Ok(AnalogyResult {
        accuracy: n_correct as f64 / scored.len() as f64,
        n_correct,
        n_scored: scored.len(),
        n_skipped: dataset.questions.len() - scored.len(),
        per_category,
    })
}

fn unit_rows(m: &Array2<f64>) -> Array2<f64> {
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let n = row.dot(&row).sqrt();
        if n > 0.0 {
            row /= n;
        }
    }
    out
}

/// JSON report emitted by the evaluation command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub dataset: String,
    pub subset: Option<Subset>,
    pub vectors_used: String,
    pub score: f64,
    pub n_scored: usize,
    pub n_skipped: usize,
}
