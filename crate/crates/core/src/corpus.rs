//! Corpus ingestion: tokenization, vocabulary construction, frequent-word
//! subsampling and the fixed-window (target, context) pair stream.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

/// Default subsampling threshold.
pub const DEFAULT_SUBSAMPLE: f64 = 1e-4;
/// Default context window (words either side of the target).
pub const DEFAULT_WINDOW: usize = 10;

/// Output of [`tokenize`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tokenized {
    pub tokens: Vec<String>,
    /// Whitespace-delimited byte runs dropped because they were not valid UTF-8.
    pub invalid_skipped: usize,
}

/// Split raw bytes on whitespace runs and lowercase every token.
///
/// A whitespace-delimited run containing malformed UTF-8 is skipped as a
/// whole and counted in [`Tokenized::invalid_skipped`].
pub fn tokenize(bytes: &[u8]) -> Tokenized {
    let mut out = Tokenized::default();
    for raw in bytes
        .split(|b| b.is_ascii_whitespace())
        .filter(|r| !r.is_empty())
    {
        match std::str::from_utf8(raw) {
            // non-ASCII whitespace (NBSP, ideographic space, ...) still splits
            Ok(s) => out
                .tokens
                .extend(s.split_whitespace().map(|t| t.to_lowercase())),
            Err(_) => out.invalid_skipped += 1,
        }
    }
    out
}

/// Tokenize a file, keeping at most `max_tokens` tokens when given.
pub fn tokenize_file(path: impl AsRef<Path>, max_tokens: Option<usize>) -> Result<Tokenized> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    let mut tok = tokenize(&bytes);
    if let Some(max) = max_tokens {
        tok.tokens.truncate(max);
    }
    Ok(tok)
}

/// Word/index map with post-filter occurrence counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    total_tokens: u64,
}

impl Vocabulary {
    /// Assemble a vocabulary from `(word, count)` pairs already in id order.
    pub fn from_counts(entries: Vec<(String, u64)>) -> Result<Self> {
        let mut words = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        for (id, (word, count)) in entries.into_iter().enumerate() {
            if index.insert(word.clone(), id as u32).is_some() {
                return Err(Error::Format(format!("duplicate word `{word}` in vocabulary")));
            }
            words.push(word);
            counts.push(count);
        }
        let total_tokens = counts.iter().sum();
        Ok(Vocabulary {
            words,
            counts,
            index,
            total_tokens,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Corpus frequency `count / total_tokens`.
    pub fn frequency(&self, id: u32) -> f64 {
        self.count(id) as f64 / self.total_tokens as f64
    }

    /// Write the `#tokens=<total>` header followed by `word<TAB>count` lines.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "#tokens={}", self.total_tokens)?;
        for (word, count) in self.words.iter().zip(&self.counts) {
            writeln!(w, "{word}\t{count}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing `#tokens=` header"))??;
        let total: u64 = header
            .strip_prefix("#tokens=")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::parse(1, format!("bad header `{header}`")))?;
        let mut entries = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let lineno = lineno + 2;
            if line.is_empty() {
                continue;
            }
            let (word, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(lineno, "expected `word<TAB>count`"))?;
            let count = count
                .trim()
                .parse()
                .map_err(|e| Error::parse(lineno, format!("bad count: {e}")))?;
            entries.push((word.to_string(), count));
        }
        let vocab = Vocabulary::from_counts(entries)?;
        if vocab.total_tokens != total {
            return Err(Error::Format(format!(
                "header says {total} tokens but counts sum to {}",
                vocab.total_tokens
            )));
        }
        Ok(vocab)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::file(path, e))?;
        self.write_to(BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::file(path, e))?;
        Self::read_from(BufReader::new(f))
    }
}

/// Count words and keep those seen at least `min_count` times.
///
/// Ids are assigned by descending count, ties broken lexicographically.
pub fn build_vocab<S: AsRef<str>>(tokens: &[S], min_count: u64) -> Result<Vocabulary> {
    if min_count < 1 {
        return Err(Error::invalid("min_count", "must be at least 1"));
    }
    let mut raw: HashMap<&str, u64> = HashMap::new();
    for t in tokens {
        *raw.entry(t.as_ref()).or_insert(0) += 1;
    }
    let mut kept: Vec<(&str, u64)> = raw.into_iter().filter(|&(_, c)| c >= min_count).collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary { min_count });
    }
    kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocabulary::from_counts(kept.into_iter().map(|(w, c)| (w.to_string(), c)).collect())
}

/// Word ids in corpus order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenStream {
    ids: Vec<u32>,
}

impl TokenStream {
    pub fn new(ids: Vec<u32>, vocab_size: usize) -> Result<Self> {
        if let Some(&bad) = ids.iter().find(|&&id| id as usize >= vocab_size) {
            return Err(Error::IndexOutOfRange {
                index: bad as usize,
                n: vocab_size,
            });
        }
        Ok(TokenStream { ids })
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn pairs(&self, window: usize) -> PairStream<'_> {
        PairStream::new(&self.ids, window)
    }
}

/// Map tokens to ids, dropping out-of-vocabulary tokens.
pub fn encode<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> TokenStream {
    TokenStream {
        ids: tokens.iter().filter_map(|t| vocab.id(t.as_ref())).collect(),
    }
}

/// Probability of discarding a word with corpus frequency `freq`.
pub fn discard_probability(freq: f64, threshold: f64) -> f64 {
    (1.0 - (threshold / freq).sqrt()).max(0.0)
}

/// Frequent-word down-sampling.
///
/// Each in-vocabulary token with frequency `f` is dropped with probability
/// `max(0, 1 - sqrt(t / f))`; out-of-vocabulary tokens are always dropped.
/// One uniform draw is consumed per in-vocabulary token, so the result is a
/// pure function of the inputs and the rng state.
pub fn subsample<S, R>(tokens: &[S], vocab: &Vocabulary, threshold: f64, rng: &mut R) -> Result<TokenStream>
where
    S: AsRef<str>,
    R: Rng + ?Sized,
{
    if !(threshold > 0.0) {
        return Err(Error::invalid("subsample threshold", "must be > 0"));
    }
    let discard: Vec<f64> = (0..vocab.len() as u32)
        .map(|id| discard_probability(vocab.frequency(id), threshold))
        .collect();
    let mut ids = Vec::with_capacity(tokens.len());
    for t in tokens {
        if let Some(id) = vocab.id(t.as_ref()) {
            let u: f64 = rng.random();
            if u >= discard[id as usize] {
                ids.push(id);
            }
        }
    }
    Ok(TokenStream { ids })
}

/// Fixed-window co-occurrence pairs over a token id sequence.
///
/// For each target position `p` yields `(ids[p], ids[q])` for every
/// `q != p` with `|q - p| <= window`, clipped at the stream boundaries.
#[derive(Debug, Clone)]
pub struct PairStream<'a> {
    ids: &'a [u32],
    window: usize,
    end: usize,
    pos: usize,
    ctx: usize,
    ctx_end: usize,
}

impl<'a> PairStream<'a> {
    pub fn new(ids: &'a [u32], window: usize) -> Self {
        Self::for_targets(ids, window, 0..ids.len())
    }

    /// Pairs whose target position lies in `targets`; contexts may fall
    /// outside the range. Disjoint ranges partition the full stream.
    pub fn for_targets(ids: &'a [u32], window: usize, targets: Range<usize>) -> Self {
        assert!(window >= 1, "window must be at least 1");
        let end = targets.end.min(ids.len());
        let mut s = PairStream {
            ids,
            window,
            end,
            pos: targets.start,
            ctx: 0,
            ctx_end: 0,
        };
        s.reset_window();
        s
    }

    fn reset_window(&mut self) {
        self.ctx = self.pos.saturating_sub(self.window);
        self.ctx_end = (self.pos + self.window + 1).min(self.ids.len());
    }

    /// Exact number of pairs a stream of length `len` produces.
    pub fn pair_count(len: usize, window: usize) -> usize {
        (0..len)
            .map(|p| (p + window + 1).min(len) - p.saturating_sub(window) - 1)
            .sum()
    }
}

impl Iterator for PairStream<'_> {
    type Item = (u32, u32);

    fn next(&mut self) -> Option<(u32, u32)> {
        while self.pos < self.end {
            while self.ctx < self.ctx_end {
                let q = self.ctx;
                self.ctx += 1;
                if q != self.pos {
                    return Some((self.ids[self.pos], self.ids[q]));
                }
            }
            self.pos += 1;
            self.reset_window();
        }
        None
    }
}
