use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use log::{info, warn};
use pmivec::contours::{bucket_by_logprob, contour_rows, project_relative, summarize, write_contour_csv, ProbabilityKind};
use pmivec::cooccur::{build_pmi_matrix, count_stream, CooccurrenceStats, PmiMatrix};
use pmivec::corpus::{build_vocab, encode, subsample, tokenize_file, Vocabulary};
use pmivec::eval::{
    evaluate_analogy, evaluate_similarity, load_analogy, load_similarity, AnalogyRule, EvalReport, SimilarityFormat,
    Subset,
};
use pmivec::geometry::{
    conjugate_identity_residuals, log_probability_residuals, decompose, quasi_sphere_check, sample_pairs, word_geometry,
    Summary,
};
use pmivec::trainer::{train_with_counts, NegativeTarget, Optimizer, ParallelMode, TrainConfig, Variant};
use pmivec::{EmbeddingPair, Embeddings};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::manifest::{manifest_path, ManifestBuilder};
use crate::plot;
use crate::settings::{
    required, ContoursSettings, CooccurSettings, EvalSettings, GeometrySettings, TrainSettings, VocabSettings,
};
use crate::Failure;

type CmdResult = Result<(), Failure>;

fn bad(flag: &str, msg: impl std::fmt::Display) -> Failure {
    Failure::usage(format!("--{flag}: {msg}"))
}

fn must_exist(path: &Path, flag: &str) -> Result<(), Failure> {
    if path.exists() {
        Ok(())
    } else {
        Err(bad(flag, format!("{}: no such file or directory", path.display())))
    }
}

fn create_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("{}: cannot create directory", dir.display()))?;
    }
    Ok(())
}

pub fn vocab(s: VocabSettings, threads: usize) -> CmdResult {
    let corpus = required(&s.corpus, "--corpus")?;
    let out = required(&s.out, "--out")?;
    must_exist(corpus, "corpus")?;
    if s.min_count == 0 {
        return Err(bad("min-count", "must be at least 1"));
    }

    let tok = tokenize_file(corpus, s.max_tokens)?;
    if tok.invalid_skipped > 0 {
        warn!("{}: skipped {} non-UTF-8 token(s)", corpus.display(), tok.invalid_skipped);
    }
    let vocab = build_vocab(&tok.tokens, s.min_count)?;
    create_parent(out)?;
    vocab.save(out)?;
    info!("{} tokens, {} words kept", tok.tokens.len(), vocab.len());

    let mut m = ManifestBuilder::new("vocab", &s, threads);
    m.input("corpus", corpus)?.output("vocab", out)?;
    m.report(&serde_json::json!({
        "tokens_read": tok.tokens.len(),
        "invalid_skipped": tok.invalid_skipped,
        "words": vocab.len(),
        "tokens_in_vocab": vocab.total_tokens(),
    }));
    m.write(&manifest_path(out))?;
    Ok(())
}

fn default_stats_path(pmi: &Path) -> PathBuf {
    pmi.with_extension("stats")
}

pub fn cooccur(s: CooccurSettings, threads: usize) -> CmdResult {
    let corpus = required(&s.corpus, "--corpus")?;
    let vocab_path = required(&s.vocab, "--vocab")?;
    let out = required(&s.out, "--out")?;
    let stats_out = s.stats_out.clone().unwrap_or_else(|| default_stats_path(out));
    must_exist(corpus, "corpus")?;
    must_exist(vocab_path, "vocab")?;
    if s.window == 0 {
        return Err(bad("window", "must be at least 1"));
    }
    if !(s.subsample >= 0.0 && s.subsample.is_finite()) {
        return Err(bad("subsample", "must be a non-negative number (0 disables)"));
    }
    if stats_out == *out {
        return Err(bad("stats-out", "must differ from --out"));
    }

    let vocab = Vocabulary::load(vocab_path)?;
    let tok = tokenize_file(corpus, s.max_tokens)?;
    let stream = if s.subsample > 0.0 {
        subsample(&tok.tokens, &vocab, s.subsample, &mut ChaCha8Rng::seed_from_u64(s.seed))?
    } else {
        encode(&tok.tokens, &vocab)
    };
    drop(tok);
    let stats = count_stream(&stream, s.window, vocab.len(), threads)?;
    let pmi = build_pmi_matrix(&stats)?;
    info!(
        "{} tokens after filtering, {} distinct pairs, {} PMI entries",
        stream.len(),
        stats.nnz(),
        pmi.nnz()
    );
    create_parent(out)?;
    create_parent(&stats_out)?;
    pmi.save(out)?;
    stats.save(&stats_out)?;

    let mut m = ManifestBuilder::new("cooccur", &s, threads);
    m.input("corpus", corpus)?.input("vocab", vocab_path)?;
    m.output("pmi", out)?.output("stats", &stats_out)?;
    m.report(&serde_json::json!({
        "tokens_counted": stream.len(),
        "total_pairs": stats.total_pairs(),
        "distinct_pairs": stats.nnz(),
        "pmi_entries": pmi.nnz(),
        "self_filled": pmi.self_filled().iter().filter(|&&f| f).count(),
        "positive_self_fraction": pmi.positive_self_fraction(),
    }));
    m.write(&manifest_path(out))?;
    Ok(())
}

fn parse_optimizer(s: &str) -> Result<Optimizer, Failure> {
    match s.to_ascii_lowercase().as_str() {
        "adagrad" => Ok(Optimizer::Adagrad),
        "sgd" => Ok(Optimizer::Sgd),
        _ => Err(bad("optimizer", format!("unknown optimizer `{s}` (adagrad, sgd)"))),
    }
}

fn parse_mode(s: &str) -> Result<ParallelMode, Failure> {
    match s.to_ascii_lowercase().as_str() {
        "deterministic" => Ok(ParallelMode::Deterministic),
        "sharded" => Ok(ParallelMode::Sharded),
        _ => Err(bad("mode", format!("unknown mode `{s}` (deterministic, sharded)"))),
    }
}

fn parse_neg_target(s: &str) -> Result<NegativeTarget, Failure> {
    if s.eq_ignore_ascii_case("min") {
        return Ok(NegativeTarget::MinPositive);
    }
    s.parse::<f64>()
        .map(NegativeTarget::Fixed)
        .map_err(|_| bad("neg-target", format!("expected `min` or a number, got `{s}`")))
}

/// Map a core validation error onto the flag that sets the field.
fn config_failure(e: pmivec::Error) -> Failure {
    match e {
        pmivec::Error::InvalidArgument { name, reason } => {
            let flag = match name {
                "negative_target" => "neg-target".to_string(),
                other => other.replace('_', "-"),
            };
            bad(&flag, reason)
        }
        other => other.into(),
    }
}

const LOSS_HEADER: &str = "epoch,mean_positive_loss,mean_negative_loss";

pub fn train(s: TrainSettings, threads: usize) -> CmdResult {
    let pmi_path = required(&s.pmi, "--pmi")?;
    let vocab_path = required(&s.vocab, "--vocab")?;
    let out_dir = required(&s.out_dir, "--out-dir")?;
    must_exist(pmi_path, "pmi")?;
    must_exist(vocab_path, "vocab")?;
    let config = TrainConfig {
        variant: s
            .variant
            .parse::<Variant>()
            .map_err(|_| bad("variant", format!("unknown variant `{}` (d, l, p, shifted)", s.variant)))?,
        dim: s.dim,
        epochs: s.epochs,
        learning_rate: s.learning_rate,
        optimizer: parse_optimizer(&s.optimizer)?,
        alpha1: s.alpha1,
        alpha2: s.alpha2,
        negatives: s.negatives,
        shift: s.shift,
        negative_target: parse_neg_target(&s.neg_target)?,
        seed: s.seed,
        parallel_mode: parse_mode(&s.mode)?,
        threads,
        count_weighted: s.count_weighted,
    };
    config.validate().map_err(config_failure)?;
    if config.epochs == 0 {
        return Err(bad("epochs", "must be at least 1"));
    }
    let stats_path = match (&s.stats, s.count_weighted) {
        (Some(p), true) => {
            must_exist(p, "stats")?;
            Some(p.clone())
        }
        (None, true) => return Err(bad("stats", "required with --count-weighted")),
        (_, false) => None,
    };

    let pmi = PmiMatrix::load(pmi_path)?;
    let vocab = Vocabulary::load(vocab_path)?;
    if vocab.len() != pmi.n() {
        return Err(anyhow!(
            "{} has {} words but {} covers {}",
            vocab_path.display(),
            vocab.len(),
            pmi_path.display(),
            pmi.n()
        )
        .into());
    }
    let stats = stats_path.as_ref().map(CooccurrenceStats::load).transpose()?;
    let out = train_with_counts(&pmi, &config, stats.as_ref())?;

    std::fs::create_dir_all(out_dir).with_context(|| format!("{}: cannot create directory", out_dir.display()))?;
    let words = vocab.words().to_vec();
    let dec = decompose(&out.embeddings);
    let (w, c) = out.embeddings.into_parts();
    let files = [("w", w), ("c", c), ("a", dec.a)];
    let mut m = ManifestBuilder::new("train", &s, threads);
    m.input("pmi", pmi_path)?.input("vocab", vocab_path)?;
    if let Some(p) = &stats_path {
        m.input("stats", p)?;
    }
    for (name, matrix) in files {
        let path = out_dir.join(format!("{name}.vec"));
        Embeddings::new(words.clone(), matrix)?.save(&path)?;
        m.output(name, &path)?;
    }
    let loss_path = out_dir.join("loss.csv");
    write_loss_csv(&loss_path, &out.trace)?;
    m.output("loss", &loss_path)?;

    let last = out.trace.last();
    m.report(&serde_json::json!({
        "negative_target": out.negative_target,
        "clamped_lengths": out.clamped_lengths,
        "final_positive_loss": last.map(|e| e.mean_positive_loss),
        "final_negative_loss": last.map(|e| e.mean_negative_loss),
    }));
    m.write(&out_dir.join("manifest.json"))?;
    Ok(())
}

fn write_loss_csv(path: &Path, trace: &[pmivec::EpochLoss]) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("{}: cannot create", path.display()))?;
    let mut w = BufWriter::new(f);
    writeln!(w, "{LOSS_HEADER}")?;
    for e in trace {
        writeln!(w, "{},{},{}", e.epoch, e.mean_positive_loss, e.mean_negative_loss)?;
    }
    w.flush().with_context(|| format!("{}: write failed", path.display()))
}

fn vectors_file(dir: &Path, which: &str) -> Result<PathBuf, Failure> {
    let name = match which {
        "W" | "w" => "w.vec",
        "A" | "a" => "a.vec",
        _ => return Err(bad("vectors", format!("unknown vectors `{which}` (W, A)"))),
    };
    Ok(dir.join(name))
}

#[derive(Serialize)]
struct EvalOutput<T: Serialize> {
    #[serde(flatten)]
    report: EvalReport,
    details: T,
}

pub fn eval(s: EvalSettings, threads: usize) -> CmdResult {
    let dir = required(&s.embeddings, "--embeddings")?;
    let dataset = required(&s.dataset, "--dataset")?;
    let out = required(&s.out, "--out")?;
    let vec_path = vectors_file(dir, &s.vectors)?;
    let subset: Subset = s.subset.parse().map_err(|_| bad("subset", format!("unknown subset `{}` (ALL, SIM, REL)", s.subset)))?;
    let format = match s.format.to_ascii_lowercase().as_str() {
        "tsv" => SimilarityFormat::Tsv,
        "ws353-csv" | "csv" => SimilarityFormat::Ws353Csv,
        _ => return Err(bad("format", format!("unknown format `{}` (tsv, ws353-csv)", s.format))),
    };
    let rule = match s.rule.to_ascii_lowercase().as_str() {
        "norm" | "norm_argmin" => AnalogyRule::NormArgmin,
        "cosadd" | "cos_add" => AnalogyRule::CosAdd,
        _ => return Err(bad("rule", format!("unknown rule `{}` (norm, cosadd)", s.rule))),
    };
    let task = s.task.to_ascii_lowercase();
    if task != "similarity" && task != "analogy" {
        return Err(bad("task", format!("unknown task `{}` (similarity, analogy)", s.task)));
    }
    must_exist(&vec_path, "embeddings")?;
    must_exist(dataset, "dataset")?;

    let emb = Embeddings::load(&vec_path)?;
    let name = dataset
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let vectors_used = s.vectors.to_ascii_uppercase();
    let text = if task == "similarity" {
        let data = load_similarity(dataset, format, subset)?;
        let r = evaluate_similarity(&emb, &data)?;
        serde_json::to_string_pretty(&EvalOutput {
            report: EvalReport {
                dataset: name,
                subset: Some(subset),
                vectors_used,
                score: r.rho,
                n_scored: r.n_scored,
                n_skipped: r.n_skipped,
            },
            details: serde_json::json!({ "pairs": data.pairs.len(), "duplicate_pairs": data.duplicate_pairs().len() }),
        })
    } else {
        let data = load_analogy(dataset)?;
        let r = evaluate_analogy(&emb, &data, rule)?;
        serde_json::to_string_pretty(&EvalOutput {
            report: EvalReport {
                dataset: name,
                subset: None,
                vectors_used,
                score: r.accuracy,
                n_scored: r.n_scored,
                n_skipped: r.n_skipped,
            },
            details: serde_json::json!({ "rule": rule, "n_correct": r.n_correct, "per_category": r.per_category }),
        })
    }
    .context("serializing report")?;
    create_parent(out)?;
    std::fs::write(out, text + "\n").with_context(|| format!("{}: cannot write", out.display()))?;
    println!("{}", std::fs::read_to_string(out).unwrap_or_default().trim_end());

    let mut m = ManifestBuilder::new("eval", &s, threads);
    m.input("vectors", &vec_path)?.input("dataset", dataset)?;
    m.output("report", out)?;
    m.write(&manifest_path(out))?;
    Ok(())
}

/// Load `w.vec` and `c.vec` from a training directory as one pair.
fn load_pair(dir: &Path) -> anyhow::Result<(Vec<String>, EmbeddingPair, PathBuf, PathBuf)> {
    let wp = dir.join("w.vec");
    let cp = dir.join("c.vec");
    let w = Embeddings::load(&wp)?;
    let c = Embeddings::load(&cp)?;
    if w.words() != c.words() {
        bail!("{} and {} list different words", wp.display(), cp.display());
    }
    let pair = EmbeddingPair::new(w.matrix().clone(), c.matrix().clone())?;
    Ok((w.words().to_vec(), pair, wp, cp))
}

const GEOMETRY_HEADER: &str = "word,norm_w,norm_c,internal_angle,min_length,self_pmi";

#[derive(Serialize)]
struct GeometryReport {
    words: usize,
    dim: usize,
    zero_norm_words: usize,
    clamped_min_length: usize,
    positive_self_fraction: f64,
    conjugate_identity: Summary,
    internal_angle: Summary,
    self_residual: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pair_checks: Option<PairChecks>,
}

#[derive(Serialize)]
struct PairChecks {
    sampled_pairs: usize,
    seed: u64,
    word_log_residual: Summary,
    pair_log_residual: Summary,
    word_relative: Summary,
    pair_relative: Summary,
}

pub fn geometry(s: GeometrySettings, threads: usize) -> CmdResult {
    let dir = required(&s.embeddings, "--embeddings")?;
    let pmi_path = required(&s.pmi, "--pmi")?;
    let out_dir = required(&s.out_dir, "--out-dir")?;
    must_exist(dir, "embeddings")?;
    must_exist(pmi_path, "pmi")?;
    if let Some(p) = &s.stats {
        must_exist(p, "stats")?;
    }

    let (words, pair, wp, cp) = load_pair(dir)?;
    let pmi = PmiMatrix::load(pmi_path)?;
    if pmi.n() != pair.n() {
        return Err(anyhow!("{} covers {} words but the embeddings have {}", pmi_path.display(), pmi.n(), pair.n()).into());
    }
    let dec = decompose(&pair);
    let identity = conjugate_identity_residuals(&pair, &dec);

    std::fs::create_dir_all(out_dir).with_context(|| format!("{}: cannot create directory", out_dir.display()))?;
    let csv_path = out_dir.join("geometry.csv");
    let f = File::create(&csv_path).with_context(|| format!("{}: cannot create", csv_path.display()))?;
    let mut csv = BufWriter::new(f);
    writeln!(csv, "{GEOMETRY_HEADER}").context("geometry.csv")?;
    let mut angles = Vec::new();
    let mut self_res = Vec::new();
    let mut zero = 0;
    let mut clamped = 0;
    for (i, word) in words.iter().enumerate() {
        let sp = pmi.self_pmi()[i];
        match word_geometry(&pair, sp, i) {
            Ok(g) => {
                angles.push(g.internal_angle);
                self_res.push(g.self_residual());
                clamped += g.min_length_clamped as usize;
                writeln!(csv, "{word},{},{},{},{},{}", g.norm_w, g.norm_c, g.internal_angle, g.min_length, sp)
            }
            Err(pmivec::Error::ZeroNorm(_)) => {
                zero += 1;
                let nw = pair.target(i).dot(&pair.target(i)).sqrt();
                let nc = pair.context(i).dot(&pair.context(i)).sqrt();
                writeln!(csv, "{word},{nw},{nc},NaN,{},{sp}", sp.max(0.0).sqrt())
            }
            Err(e) => return Err(e.into()),
        }
        .with_context(|| format!("{}: write failed", csv_path.display()))?;
    }
    csv.flush().with_context(|| format!("{}: write failed", csv_path.display()))?;

    let stats = s.stats.as_ref().map(CooccurrenceStats::load).transpose()?;
    let pair_checks = match &stats {
        None => None,
        Some(st) => {
            let pairs = sample_pairs(st, s.sample, s.seed);
            let c1 = log_probability_residuals(&pair, st, &pairs)?;
            let q = quasi_sphere_check(&pair, st, &pairs)?;
            Some(PairChecks {
                sampled_pairs: pairs.len(),
                seed: s.seed,
                word_log_residual: c1.word_summary,
                pair_log_residual: c1.pair_summary,
                word_relative: q.word_relative,
                pair_relative: q.pair_relative,
            })
        }
    };
    let report = GeometryReport {
        words: pair.n(),
        dim: pair.dim(),
        zero_norm_words: zero,
        clamped_min_length: clamped,
        positive_self_fraction: pmi.positive_self_fraction(),
        conjugate_identity: Summary::of(&identity),
        internal_angle: Summary::of(&angles),
        self_residual: Summary::of(&self_res),
        pair_checks,
    };
    let json_path = out_dir.join("geometry.json");
    let text = serde_json::to_string_pretty(&report).context("serializing report")?;
    std::fs::write(&json_path, text + "\n").with_context(|| format!("{}: cannot write", json_path.display()))?;

    let mut m = ManifestBuilder::new("geometry", &s, threads);
    m.input("w", &wp)?.input("c", &cp)?.input("pmi", pmi_path)?;
    if let Some(p) = &s.stats {
        m.input("stats", p)?;
    }
    m.output("csv", &csv_path)?.output("json", &json_path)?;
    m.write(&out_dir.join("manifest.json"))?;
    Ok(())
}

pub fn contours(s: ContoursSettings, threads: usize) -> CmdResult {
    let dir = required(&s.embeddings, "--embeddings")?;
    let stats_path = required(&s.stats, "--stats")?;
    let context = required(&s.context, "--context")?;
    let out = required(&s.out, "--out")?;
    let kind: ProbabilityKind = s.kind.parse().map_err(|_| {
        bad("kind", format!("unknown kind `{}` (context_given_target, target_given_context)", s.kind))
    })?;
    if s.centers.is_empty() || s.centers.iter().any(|c| !c.is_finite()) {
        return Err(bad("centers", "need at least one finite center"));
    }
    if !(s.half_width > 0.0 && s.half_width.is_finite()) {
        return Err(bad("half-width", "must be positive and finite"));
    }
    must_exist(dir, "embeddings")?;
    must_exist(stats_path, "stats")?;

    let (words, pair, wp, cp) = load_pair(dir)?;
    let Some(j) = words.iter().position(|w| w == context) else {
        return Err(bad("context", format!("`{context}` is not in the vocabulary")));
    };
    let stats = CooccurrenceStats::load(stats_path)?;
    let proj = project_relative(&pair, j as u32)?;
    let buckets = bucket_by_logprob(&stats, kind, j as u32, &s.centers, s.half_width)?;
    if buckets.overlapping {
        warn!("bucket windows overlap; words may appear in more than one bucket");
    }
    let rows = contour_rows(&proj, &buckets, &words)?;
    create_parent(out)?;
    let f = File::create(out).with_context(|| format!("{}: cannot create", out.display()))?;
    write_contour_csv(&rows, BufWriter::new(f))?;
    let summary = summarize(&proj, &buckets);
    info!(
        "{} rows; monotone mean x: {}; within < between: {}",
        rows.len(),
        summary.monotone_mean_x,
        summary.within_below_between
    );

    let mut m = ManifestBuilder::new("contours", &s, threads);
    m.input("w", &wp)?.input("c", &cp)?.input("stats", stats_path)?;
    m.output("csv", out)?;
    if let Some(p) = &s.plot {
        // the plot is a convenience; the CSV above is the product
        match plot::write_svg(p, &rows, proj.context_point(), context) {
            Ok(()) => {
                m.output("plot", p)?;
            }
            Err(e) => warn!("plot not written: {e:#}"),
        }
    }
    m.report(&serde_json::json!({
        "rows": rows.len(),
        "unobserved": buckets.unobserved(),
        "skipped_zero_norm": proj.skipped_zero_norm,
        "summary": summary,
    }));
    m.write(&manifest_path(out))?;
    Ok(())
}
