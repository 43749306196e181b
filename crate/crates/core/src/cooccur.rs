//! Co-occurrence counting and the sparse PMI matrix.
//!
//! Counts are accumulated in a hash map keyed by `(target, context)` and then
//! frozen into a coordinate list sorted by `(i, j)`. Probabilities are plain
//! maximum-likelihood ratios of counts. The only correction applied is the
//! self-pair fill-in: a word never observed in its own context window gets
//! the joint probability `2/3 * p_min`, where `p_min` is the smallest
//! observed self-joint probability.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::corpus::{PairStream, TokenStream};
use crate::error::{Error, Result};

/// Fraction of the smallest observed self-joint probability substituted for
/// a missing one.
pub const SELF_FILL_FRACTION: f64 = 2.0 / 3.0;

const PMI_MAGIC: &[u8; 4] = b"PMI1";
const STATS_MAGIC: &[u8; 4] = b"COC1";

/// Hash-keyed pair counter. Shards can be counted independently and merged.
#[derive(Debug, Clone, Default)]
pub struct CooccurrenceCounter {
    counts: HashMap<(u32, u32), u64>,
}

impl CooccurrenceCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, target: u32, context: u32) {
        *self.counts.entry((target, context)).or_insert(0) += 1;
    }

    /// Sum another counter into this one (associative and commutative).
    pub fn merge(&mut self, other: CooccurrenceCounter) {
        if other.counts.len() > self.counts.len() {
            let mine = std::mem::replace(&mut self.counts, other.counts);
            for (k, c) in mine {
                *self.counts.entry(k).or_insert(0) += c;
            }
        } else {
            for (k, c) in other.counts {
                *self.counts.entry(k).or_insert(0) += c;
            }
        }
    }

    pub fn freeze(self, n: usize) -> Result<CooccurrenceStats> {
        CooccurrenceStats::from_entries(n, self.counts.into_iter().map(|((i, j), c)| (i, j, c)))
    }
}

impl Extend<(u32, u32)> for CooccurrenceCounter {
    fn extend<T: IntoIterator<Item = (u32, u32)>>(&mut self, iter: T) {
        for (i, j) in iter {
            self.add(i, j);
        }
    }
}

/// Frozen co-occurrence statistics over a vocabulary of size `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceStats {
    n: usize,
    /// `(target, context, count)` sorted by `(target, context)`, counts > 0.
    pairs: Vec<(u32, u32, u64)>,
    target_counts: Vec<u64>,
    context_counts: Vec<u64>,
    total_pairs: u64,
}

impl CooccurrenceStats {
    /// Build from `(i, j, count)` triples. Duplicate keys are summed and zero
    /// counts dropped; marginals are derived by summation.
    pub fn from_entries<I>(n: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, u32, u64)>,
    {
        let mut pairs: Vec<(u32, u32, u64)> = entries.into_iter().filter(|e| e.2 > 0).collect();
        pairs.sort_unstable_by_key(|&(i, j, _)| (i, j));
        pairs.dedup_by(|next, kept| {
            if (next.0, next.1) == (kept.0, kept.1) {
                kept.2 += next.2;
                true
            } else {
                false
            }
        });
        let mut target_counts = vec![0u64; n];
        let mut context_counts = vec![0u64; n];
        let mut total_pairs = 0u64;
        for &(i, j, c) in &pairs {
            for id in [i, j] {
                if id as usize >= n {
                    return Err(Error::IndexOutOfRange { index: id as usize, n });
                }
            }
            target_counts[i as usize] += c;
            context_counts[j as usize] += c;
            total_pairs += c;
        }
        Ok(CooccurrenceStats {
            n,
            pairs,
            target_counts,
            context_counts,
            total_pairs,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.pairs.len()
    }

    pub fn total_pairs(&self) -> u64 {
        self.total_pairs
    }

    pub fn is_empty(&self) -> bool {
        self.total_pairs == 0
    }

    pub fn pairs(&self) -> &[(u32, u32, u64)] {
        &self.pairs
    }

    pub fn target_counts(&self) -> &[u64] {
        &self.target_counts
    }

    pub fn context_counts(&self) -> &[u64] {
        &self.context_counts
    }

    pub fn count(&self, i: u32, j: u32) -> u64 {
        self.pairs
            .binary_search_by_key(&(i, j), |&(a, b, _)| (a, b))
            .map(|k| self.pairs[k].2)
            .unwrap_or(0)
    }

    pub fn p_joint(&self, i: u32, j: u32) -> f64 {
        self.count(i, j) as f64 / self.total_pairs as f64
    }

    pub fn p_target(&self, i: u32) -> f64 {
        self.target_counts[i as usize] as f64 / self.total_pairs as f64
    }

    pub fn p_context(&self, j: u32) -> f64 {
        self.context_counts[j as usize] as f64 / self.total_pairs as f64
    }

    /// `count(i, j) == count(j, i)` for every stored pair.
    pub fn is_symmetric(&self) -> bool {
        self.pairs.iter().all(|&(i, j, c)| self.count(j, i) == c)
    }

    fn check_index(&self, id: u32) -> Result<()> {
        if id as usize >= self.n {
            Err(Error::IndexOutOfRange {
                index: id as usize,
                n: self.n,
            })
        } else {
            Ok(())
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(STATS_MAGIC)?;
        w.write_u64::<LittleEndian>(self.n as u64)?;
        w.write_u64::<LittleEndian>(self.pairs.len() as u64)?;
        for &(i, j, c) in &self.pairs {
            w.write_u32::<LittleEndian>(i)?;
            w.write_u32::<LittleEndian>(j)?;
            w.write_u64::<LittleEndian>(c)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        check_magic(&mut r, STATS_MAGIC)?;
        let n = r.read_u64::<LittleEndian>()? as usize;
        let nnz = r.read_u64::<LittleEndian>()? as usize;
        let mut entries = Vec::with_capacity(nnz.min(1 << 24));
        for _ in 0..nnz {
            let i = r.read_u32::<LittleEndian>()?;
            let j = r.read_u32::<LittleEndian>()?;
            let c = r.read_u64::<LittleEndian>()?;
            entries.push((i, j, c));
        }
        Self::from_entries(n, entries)
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

/// Exact multiset counts of a pair iterator over ids `< n`.
pub fn count_pairs<I>(n: usize, pairs: I) -> Result<CooccurrenceStats>
where
    I: IntoIterator<Item = (u32, u32)>,
{
    let mut counter = CooccurrenceCounter::new();
    counter.extend(pairs);
    counter.freeze(n)
}

/// Count the windowed pairs of a token stream, splitting target positions
/// across `threads` workers and merging their counters.
pub fn count_stream(stream: &TokenStream, window: usize, n: usize, threads: usize) -> Result<CooccurrenceStats> {
    let ids = stream.ids();
    let threads = threads.max(1).min(ids.len().max(1));
    if threads == 1 {
        return count_pairs(n, PairStream::new(ids, window));
    }
    let chunk = ids.len().div_ceil(threads);
    let counter = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let range = (t * chunk)..((t + 1) * chunk).min(ids.len());
                s.spawn(move || {
                    let mut c = CooccurrenceCounter::new();
                    c.extend(PairStream::for_targets(ids, window, range));
                    c
                })
            })
            .collect();
        let mut total = CooccurrenceCounter::new();
        for h in handles {
            total.merge(h.join().expect("counting worker panicked"));
        }
        total
    });
    counter.freeze(n)
}

/// PMI of an observed pair, `None` when the pair was never seen.
pub fn pmi(stats: &CooccurrenceStats, i: u32, j: u32) -> Result<Option<f64>> {
    if stats.is_empty() {
        return Err(Error::EmptyStats);
    }
    stats.check_index(i)?;
    stats.check_index(j)?;
    let c = stats.count(i, j);
    if c == 0 {
        return Ok(None);
    }
    Ok(Some(pmi_from_counts(
        c as f64,
        stats.target_counts[i as usize],
        stats.context_counts[j as usize],
        stats.total_pairs,
    )))
}

/// `log(p(i,j) / (p(i) p(j)))` with `p(i,j) = joint / total`.
fn pmi_from_counts(joint: f64, target: u64, context: u64, total: u64) -> f64 {
    (joint * total as f64 / (target as f64 * context as f64)).ln()
}

/// Per-word self-PMI with fill-in provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfPmi {
    pub values: Vec<f64>,
    pub filled: Vec<bool>,
    /// Smallest observed self-joint probability.
    pub p_min: f64,
}

impl SelfPmi {
    /// Self-joint probability used for word `i`: observed, or the fill value.
    pub fn joint(&self, stats: &CooccurrenceStats, i: u32) -> f64 {
        if self.filled[i as usize] {
            SELF_FILL_FRACTION * self.p_min
        } else {
            stats.p_joint(i, i)
        }
    }
}

/// Self-PMI for every word, substituting `2/3 * p_min` for unobserved
/// self-joint probabilities.
pub fn self_pmi_fill(stats: &CooccurrenceStats) -> Result<SelfPmi> {
    if stats.is_empty() {
        return Err(Error::EmptyStats);
    }
    let total = stats.total_pairs;
    let self_counts: Vec<u64> = (0..stats.n as u32).map(|i| stats.count(i, i)).collect();
    let min_count = self_counts
        .iter()
        .copied()
        .filter(|&c| c > 0)
        .min()
        .ok_or(Error::NoSelfPairs)?;
    let p_min = min_count as f64 / total as f64;
    let fill_joint = SELF_FILL_FRACTION * min_count as f64;

    let mut values = Vec::with_capacity(stats.n);
    let mut filled = Vec::with_capacity(stats.n);
    for (i, &c) in self_counts.iter().enumerate() {
        let (t, ctx) = (stats.target_counts[i], stats.context_counts[i]);
        if t == 0 || ctx == 0 {
            return Err(Error::Format(format!(
                "word {i} never occurs in the pair stream; its self-PMI is undefined"
            )));
        }
        let joint = if c > 0 { c as f64 } else { fill_joint };
        values.push(pmi_from_counts(joint, t, ctx, total));
        filled.push(c == 0);
    }
    Ok(SelfPmi { values, filled, p_min })
}

/// One stored PMI value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmiEntry {
    pub i: u32,
    pub j: u32,
    pub pmi: f64,
}

/// Sparse PMI matrix over observed pairs plus a dense self-PMI vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PmiMatrix {
    n: usize,
    entries: Vec<PmiEntry>,
    self_pmi: Vec<f64>,
    self_filled: Vec<bool>,
}

impl PmiMatrix {
    /// Assemble from parts. Entries are sorted by `(i, j)`; every value must
    /// be finite and every index in range.
    pub fn from_parts(n: usize, mut entries: Vec<PmiEntry>, self_pmi: Vec<f64>, self_filled: Vec<bool>) -> Result<Self> {
        if self_pmi.len() != n || self_filled.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "self-PMI vectors have lengths {}/{} for n = {n}",
                self_pmi.len(),
                self_filled.len()
            )));
        }
        for e in &entries {
            for id in [e.i, e.j] {
                if id as usize >= n {
                    return Err(Error::IndexOutOfRange { index: id as usize, n });
                }
            }
            if !e.pmi.is_finite() {
                return Err(Error::Format(format!("non-finite PMI at ({}, {})", e.i, e.j)));
            }
        }
        if let Some(i) = self_pmi.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite self-PMI for word {i}")));
        }
        entries.sort_unstable_by_key(|e| (e.i, e.j));
        if entries.windows(2).any(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
            return Err(Error::Format("duplicate PMI entry".into()));
        }
        Ok(PmiMatrix {
            n,
            entries,
            self_pmi,
            self_filled,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[PmiEntry] {
        &self.entries
    }

    pub fn self_pmi(&self) -> &[f64] {
        &self.self_pmi
    }

    pub fn self_filled(&self) -> &[bool] {
        &self.self_filled
    }

    pub fn get(&self, i: u32, j: u32) -> Option<f64> {
        self.entries
            .binary_search_by_key(&(i, j), |e| (e.i, e.j))
            .ok()
            .map(|k| self.entries[k].pmi)
    }

    pub fn contains(&self, i: u32, j: u32) -> bool {
        self.get(i, j).is_some()
    }

    /// Smallest stored PMI value.
    pub fn min_pmi(&self) -> Option<f64> {
        self.entries.iter().map(|e| e.pmi).min_by(f64::total_cmp)
    }

    /// Fraction of observed (not filled) self-PMI values above zero.
    pub fn positive_self_fraction(&self) -> f64 {
        let observed: Vec<f64> = self
            .self_pmi
            .iter()
            .zip(&self.self_filled)
            .filter(|(_, &f)| !f)
            .map(|(&v, _)| v)
            .collect();
        if observed.is_empty() {
            return 0.0;
        }
        observed.iter().filter(|&&v| v > 0.0).count() as f64 / observed.len() as f64
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(PMI_MAGIC)?;
        w.write_u64::<LittleEndian>(self.n as u64)?;
        w.write_u64::<LittleEndian>(self.entries.len() as u64)?;
        for e in &self.entries {
            w.write_u32::<LittleEndian>(e.i)?;
            w.write_u32::<LittleEndian>(e.j)?;
            w.write_f64::<LittleEndian>(e.pmi)?;
        }
        for (&v, &f) in self.self_pmi.iter().zip(&self.self_filled) {
            w.write_f64::<LittleEndian>(v)?;
            w.write_u8(f as u8)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        check_magic(&mut r, PMI_MAGIC)?;
        let n = r.read_u64::<LittleEndian>()? as usize;
        let nnz = r.read_u64::<LittleEndian>()? as usize;
        let mut entries = Vec::with_capacity(nnz.min(1 << 24));
        for _ in 0..nnz {
            let i = r.read_u32::<LittleEndian>()?;
            let j = r.read_u32::<LittleEndian>()?;
            let pmi = r.read_f64::<LittleEndian>()?;
            entries.push(PmiEntry { i, j, pmi });
        }
        let mut self_pmi = Vec::with_capacity(n.min(1 << 24));
        let mut self_filled = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            self_pmi.push(r.read_f64::<LittleEndian>()?);
            self_filled.push(match r.read_u8()? {
                0 => false,
                1 => true,
                b => return Err(Error::Format(format!("bad fill flag {b}"))),
            });
        }
        Self::from_parts(n, entries, self_pmi, self_filled)
    }

    /// Debug export: `i<TAB>j<TAB>pmi` per stored entry.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.entries {
            writeln!(w, "{}\t{}\t{}", e.i, e.j, e.pmi)?;
        }
        w.flush()?;
        Ok(())
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

/// PMI for every observed pair plus the filled self-PMI vector.
pub fn build_pmi_matrix(stats: &CooccurrenceStats) -> Result<PmiMatrix> {
    let fill = self_pmi_fill(stats)?;
    let total = stats.total_pairs;
    let entries = stats
        .pairs
        .iter()
        .map(|&(i, j, c)| PmiEntry {
            i,
            j,
            pmi: pmi_from_counts(
                c as f64,
                stats.target_counts[i as usize],
                stats.context_counts[j as usize],
                total,
            ),
        })
        .collect();
    PmiMatrix::from_parts(stats.n, entries, fill.values, fill.filled)
}

fn check_magic<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    if &buf != magic {
        return Err(Error::Format(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&buf)
        )));
    }
    Ok(())
}
