//! Labeled word vectors and the word2vec text format.
//!
//! The text format is a header line `n d` followed by one line per word:
//! the word, then `d` space-separated values. Values are written with the
//! shortest representation that round-trips exactly, so output files are a
//! deterministic function of the matrix.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// A vocabulary paired with one vector per word (row `i` belongs to word `i`).
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    words: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Array2<f64>,
}

impl Embeddings {
    pub fn new(words: Vec<String>, matrix: Array2<f64>) -> Result<Self> {
        if words.len() != matrix.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} words but {} vectors",
                words.len(),
                matrix.nrows()
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate word `{w}`")));
            }
        }
        Ok(Embeddings { words, index, matrix })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn vector(&self, word: &str) -> Option<ArrayView1<'_, f64>> {
        self.id(word).map(|i| self.matrix.row(i))
    }

    /// Apply `f` to the matrix, keeping the labels.
    pub fn map_matrix(&self, f: impl FnOnce(&Array2<f64>) -> Array2<f64>) -> Result<Self> {
        Embeddings::new(self.words.clone(), f(&self.matrix))
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim())?;
        for (word, row) in self.words.iter().zip(self.matrix.rows()) {
            w.write_all(word.as_bytes())?;
            for v in row {
                write!(w, " {v}")?;
            }
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::parse(1, "missing header"))??;
        let mut hdr = header.split_whitespace();
        let (n, d): (usize, usize) = match (hdr.next(), hdr.next(), hdr.next()) {
            (Some(n), Some(d), None) => (
                n.parse().map_err(|_| Error::parse(1, "bad word count"))?,
                d.parse().map_err(|_| Error::parse(1, "bad dimensionality"))?,
            ),
            _ => return Err(Error::parse(1, "expected `<n> <d>` header")),
        };
        let mut words = Vec::with_capacity(n);
        let mut data = Vec::with_capacity(n * d);
        for (k, line) in lines.enumerate() {
            let line = line?;
            let lineno = k + 2;
            if line.trim().is_empty() {
                continue;
            }
            if words.len() == n {
                return Err(Error::parse(lineno, format!("more than {n} vectors")));
            }
            let mut parts = line.split(' ').filter(|s| !s.is_empty());
            let word = parts.next().ok_or_else(|| Error::parse(lineno, "missing word"))?;
            let before = data.len();
            for p in parts {
                let v: f64 = p
                    .parse()
                    .map_err(|_| Error::parse(lineno, format!("bad value `{p}`")))?;
                data.push(v);
            }
            if data.len() - before != d {
                return Err(Error::parse(
                    lineno,
                    format!("expected {d} values, found {}", data.len() - before),
                ));
            }
            words.push(word.to_string());
        }
        if words.len() != n {
            return Err(Error::Format(format!("header promises {n} vectors, found {}", words.len())));
        }
        let matrix = Array2::from_shape_vec((n, d), data).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Embeddings::new(words, matrix)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::file(path, e))?;
        self.write_text(BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::file(path, e))?;
        Self::read_text(BufReader::new(f))
    }
}
