//! Message embeddings: externally produced vector tables, a hashed fallback,
//! and supervised PLS reduction.

pub mod pls;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub use pls::{fit_pls, fit_pls_detailed, PlsFit, PlsModel};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingSource {
    External,
    Hashed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
    source: EmbeddingSource,
}

impl EmbeddingTable {
    pub fn new(dim: usize, source: EmbeddingSource) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        Ok(Self {
            dim,
            vectors: BTreeMap::new(),
            source,
        })
    }

    pub fn insert(&mut self, id: impl Into<String>, v: Vec<f64>) -> Result<()> {
        let id = id.into();
        if v.len() != self.dim {
            return Err(Error::invalid(format!(
                "embedding `{id}` has {} values, expected {}",
                v.len(),
                self.dim
            )));
        }
        if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("embedding `{id}` has non-finite value {bad}")));
        }
        if self.vectors.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.vectors.insert(id, v);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> EmbeddingSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = match lines.next() {
            Some((_, l)) => l.map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?,
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "missing `#dim=<d>` header".into(),
                })
            }
        };
        let dim: usize = header
            .trim()
            .strip_prefix("#dim=")
            .and_then(|d| d.trim().parse().ok())
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("bad embedding header `{header}`"),
            })?;
        let mut table = Self::new(dim, EmbeddingSource::External)?;
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let (id, rest) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: line_no,
                message: "expected `<id><TAB><values>`".into(),
            })?;
            let values = rest
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: line_no,
                    message: format!("embedding `{id}`: {e}"),
                })?;
            table.insert(id, values).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        }
        Ok(table)
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "#dim={}", self.dim)?;
        for (id, v) in &self.vectors {
            write!(w, "{id}\t")?;
            for (j, x) in v.iter().enumerate() {
                if j > 0 {
                    w.write_all(b" ")?;
                }
                write!(w, "{x}")?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::from_reader(BufReader::new(f))
}

fn hash_feature(seed: u64, feature: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    for b in feature.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    crate::rng::derive(h, seed)
}

/// Signed hashing of unigrams and bigrams, L2-normalized.
pub fn hashed_embedding<S: AsRef<str>>(tokens: &[S], dim: usize, seed: u64) -> Result<Vec<f64>> {
    if dim < 8 {
        return Err(Error::invalid(format!("hashed embedding needs dim >= 8, got {dim}")));
    }
    let mut v = vec![0.0; dim];
    let mut add = |feature: &str| {
        let h = hash_feature(seed, feature);
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        v[(h % dim as u64) as usize] += sign;
    };
    for t in tokens {
        add(t.as_ref());
    }
    for pair in tokens.windows(2) {
        add(&format!("{}\u{1f}{}", pair[0].as_ref(), pair[1].as_ref()));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    Ok(v)
}

/// Where a pipeline gets each message's vector from.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingProvider {
    External(EmbeddingTable),
    Hashed { dim: usize, seed: u64 },
}

impl EmbeddingProvider {
    pub fn dim(&self) -> usize {
        match self {
            EmbeddingProvider::External(t) => t.dim(),
            EmbeddingProvider::Hashed { dim, .. } => *dim,
        }
    }

    pub fn embed<S: AsRef<str>>(&self, id: &str, tokens: &[S]) -> Result<Vec<f64>> {
        match self {
            EmbeddingProvider::External(t) => t
                .get(id)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| Error::invalid(format!("no embedding for message `{id}`"))),
            EmbeddingProvider::Hashed { dim, seed } => hashed_embedding(tokens, *dim, *seed),
        }
    }
}
