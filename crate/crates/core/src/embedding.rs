//! Word-embedding table in the Numberbatch text format, with the out-of-vocabulary
//! fallback chain used by all distance metrics.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::graph::normalize_label;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("no valid embedding rows")]
    Empty,
    #[error("header declares dimension {declared} but rows have {found} values")]
    InconsistentDimension { declared: usize, found: usize },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("vectors have different dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("cosine distance is undefined for a zero vector")]
    ZeroVector,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row accounting from [`EmbeddingTable::load`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub rows: usize,
    /// Wrong arity, unparsable values, or zero norm.
    pub skipped: usize,
    /// Rows for another language (`/c/xx/...` with `xx != en`).
    pub foreign: usize,
    pub duplicates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    labels: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

fn row_label(raw: &str) -> Option<Result<String, ()>> {
    let raw = if let Some(rest) = raw.strip_prefix("/c/") {
        let (lang, rest) = rest.split_once('/')?;
        if lang != "en" {
            return Some(Err(()));
        }
        rest.split('/').next().unwrap_or_default()
    } else {
        raw
    };
    normalize_label(raw).ok().map(Ok)
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut parts = line.split_whitespace();
    let count = parts.next()?.parse().ok()?;
    let dim = parts.next()?.parse().ok()?;
    parts.next().is_none().then_some((count, dim))
}

impl EmbeddingTable {
    /// Builds a table from in-memory rows. Zero vectors are skipped; the first
    /// dimension seen fixes the table's dimension.
    pub fn from_rows<I, S>(rows: I) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = (S, Vec<f32>)>,
        S: AsRef<str>,
    {
        let mut table = Self {
            dimension: 0,
            labels: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        };
        for (label, v) in rows {
            let Ok(label) = normalize_label(label.as_ref()) else { continue };
            if table.dimension == 0 {
                table.dimension = v.len();
            }
            if v.len() != table.dimension {
                return Err(EmbeddingError::DimensionMismatch(table.dimension, v.len()));
            }
            if v.iter().all(|&x| x == 0.0) {
                continue;
            }
            table.insert(label, &v);
        }
        if table.labels.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        Ok(table)
    }

    fn insert(&mut self, label: String, v: &[f32]) -> bool {
        if self.index.contains_key(&label) {
            return false;
        }
        self.index.insert(label.clone(), self.labels.len());
        self.labels.push(label);
        self.data.extend_from_slice(v);
        true
    }

    /// Reads the text format: an optional `count dimension` header, then one
    /// row per line of a label followed by `dimension` space-separated reals.
    pub fn load<R: BufRead>(reader: R) -> Result<(Self, LoadReport), EmbeddingError> {
        let mut report = LoadReport::default();
        let mut declared: Option<usize> = None;
        let mut dimension: Option<usize> = None;
        let mut table = Self {
            dimension: 0,
            labels: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        };
        let mut values: Vec<f32> = Vec::new();
        // Arity of rows seen when no row matched the declared dimension.
        let mut other_arity: Option<usize> = None;

        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if i == 0 {
                if let Some((_, dim)) = parse_header(&line) {
                    if dim == 0 {
                        return Err(EmbeddingError::Header(line));
                    }
                    declared = Some(dim);
                    dimension = Some(dim);
                    continue;
                }
            }
            report.rows += 1;
            let mut parts = line.split_whitespace();
            let Some(raw_label) = parts.next() else { continue };
            values.clear();
            let parsed = parts.map(str::parse::<f32>).try_for_each(|v| {
                values.push(v.map_err(|_| ())?);
                Ok::<_, ()>(())
            });
            if parsed.is_err() || values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                report.skipped += 1;
                continue;
            }
            let dim = *dimension.get_or_insert(values.len());
            if values.len() != dim {
                other_arity.get_or_insert(values.len());
                report.skipped += 1;
                continue;
            }
            if values.iter().all(|&v| v == 0.0) {
                report.skipped += 1;
                continue;
            }
            let label = match row_label(raw_label) {
                Some(Ok(label)) => label,
                Some(Err(())) => {
                    report.foreign += 1;
                    continue;
                }
                None => {
                    report.skipped += 1;
                    continue;
                }
            };
            table.dimension = dim;
            if !table.insert(label, &values) {
                report.duplicates += 1;
            }
        }
        if table.labels.is_empty() {
            if let (Some(declared), Some(found)) = (declared, other_arity) {
                return Err(EmbeddingError::InconsistentDimension { declared, found });
            }
            return Err(EmbeddingError::Empty);
        }
        Ok((table, report))
    }

    /// Writes the text format with a header; [`load`](Self::load) reads it back
    /// to an equal table.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dimension)?;
        for (i, label) in self.labels.iter().enumerate() {
            write!(out, "{label}")?;
            for v in self.row(i) {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dimension..(i + 1) * self.dimension]
    }

    /// Stored vector of an exact label.
    pub fn get(&self, label: &str) -> Option<&[f32]> {
        self.index.get(label).map(|&i| self.row(i))
    }

    fn get_f64(&self, label: &str) -> Option<Vec<f64>> {
        self.get(label).map(|v| v.iter().map(|&x| f64::from(x)).collect())
    }

    fn token_mean<'a>(&self, tokens: impl Iterator<Item = Option<&'a [f32]>>) -> Option<Vec<f64>> {
        let mut sum = vec![0.0f64; self.dimension];
        let mut hits = 0usize;
        for v in tokens.flatten() {
            hits += 1;
            for (s, &x) in sum.iter_mut().zip(v) {
                *s += f64::from(x);
            }
        }
        if hits == 0 {
            return None;
        }
        let n = hits as f64;
        sum.iter_mut().for_each(|s| *s /= n);
        Some(sum)
    }

    fn singular(&self, token: &str) -> Option<&[f32]> {
        ["es", "s"]
            .iter()
            .filter_map(|suffix| token.strip_suffix(suffix))
            .filter(|stem| !stem.is_empty())
            .find_map(|stem| self.get(stem))
    }

    /// Resolves free text to a vector. First hit wins:
    ///
    /// 1. the text exactly as stored,
    /// 2. its normalized form (lowercase, `_` for spaces and hyphens),
    /// 3. the mean of the `_`-separated tokens present in the table,
    /// 4. step 3 with absent tokens singularized (`-es`, then `-s` stripped).
    pub fn lookup(&self, text: &str) -> Option<Vec<f64>> {
        if let Some(v) = self.get_f64(text.trim()) {
            return Some(v);
        }
        let normalized = normalize_label(&text.replace('-', " ")).ok()?;
        if let Some(v) = self.get_f64(&normalized) {
            return Some(v);
        }
        let tokens: Vec<&str> = normalized.split('_').filter(|t| !t.is_empty()).collect();
        if tokens.len() > 1 {
            if let Some(v) = self.token_mean(tokens.iter().map(|t| self.get(t))) {
                return Some(v);
            }
        }
        self.token_mean(tokens.iter().map(|t| self.get(t).or_else(|| self.singular(t))))
    }
}

/// `1 - cos(u, v)`, clamped to `[0, 2]`.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64, EmbeddingError> {
    if u.len() != v.len() {
        return Err(EmbeddingError::DimensionMismatch(u.len(), v.len()));
    }
    let mut dot = 0.0;
    let mut uu = 0.0;
    let mut vv = 0.0;
    for (&a, &b) in u.iter().zip(v) {
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    // sqrt of the product keeps the expression symmetric in (u, v).
    let cos = dot / (uu * vv).sqrt();
    Ok((1.0 - cos).clamp(0.0, 2.0))
}
