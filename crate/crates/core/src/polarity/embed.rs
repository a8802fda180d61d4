//! Token embedding backends.
//!
//! Two backends ship: a hashed character n-gram encoder that needs no model
//! weights, and an adapter that serves vectors precomputed by an external
//! contextual encoder.
//!
//! # Embedding store layout
//!
//! UTF-8, one JSON object per line. The first line is the header:
//!
//! ```text
//! {"format":"aste-embeddings","version":1,"dim":768}
//! ```
//!
//! Every following line holds one review:
//!
//! ```text
//! {"id":"r1","tokens":3,"vectors":[[...768 floats...],[...],[...]]}
//! ```
//!
//! `tokens` must equal the number of rows in `vectors`, and also the token
//! count the normalizer produces for that review. Values are stored as
//! 32-bit floats.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::doc::TokenVectors;
use crate::error::{Error, Result};
use crate::textnorm::TokenizedText;

pub const STORE_FORMAT: &str = "aste-embeddings";
pub const STORE_VERSION: u32 = 1;

/// Produces one vector per token. Output dimension is fixed per backend and
/// outputs are deterministic.
pub trait EmbeddingBackend: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, review_id: &str, text: &TokenizedText) -> Result<TokenVectors>;
}

/// Signed feature hashing of character 2- to 4-grams, L2-normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedEmbedding {
    pub dim: usize,
    pub seed: u64,
}

impl HashedEmbedding {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < 8 {
            return Err(Error::Config(format!("hashed embedding dim {dim} is below 8")));
        }
        Ok(HashedEmbedding { dim, seed })
    }

    pub fn embed_token(&self, token: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let chars: Vec<char> = std::iter::once('<')
            .chain(token.chars())
            .chain(std::iter::once('>'))
            .collect();
        let mut buf = String::new();
        for n in 2..=4 {
            for gram in chars.windows(n) {
                buf.clear();
                buf.extend(gram);
                let h = twox_hash::XxHash64::oneshot(self.seed, buf.as_bytes());
                let bucket = (h % self.dim as u64) as usize;
                let sign = if (h >> 63) == 1 { -1.0 } else { 1.0 };
                v[bucket] += sign;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl EmbeddingBackend for HashedEmbedding {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, _review_id: &str, text: &TokenizedText) -> Result<TokenVectors> {
        Ok(text.token_strs().map(|t| self.embed_token(t)).collect())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoreHeader {
    format: String,
    version: u32,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoreEntry {
    id: String,
    tokens: usize,
    vectors: Vec<Vec<f32>>,
}

/// Precomputed token vectors keyed by review id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    entries: BTreeMap<String, Vec<Vec<f32>>>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, review_id: impl Into<String>, vectors: &[Vec<f64>]) -> Result<()> {
        if let Some(bad) = vectors.iter().find(|v| v.len() != self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: bad.len(),
            });
        }
        let rows = vectors
            .iter()
            .map(|v| v.iter().map(|&x| x as f32).collect())
            .collect();
        self.entries.insert(review_id.into(), rows);
        Ok(())
    }

    pub fn get(&self, review_id: &str) -> Option<TokenVectors> {
        self.entries.get(review_id).map(|rows| {
            rows.iter()
                .map(|r| r.iter().map(|&x| f64::from(x)).collect())
                .collect()
        })
    }

    pub fn write<W: Write>(&self, mut sink: W) -> Result<()> {
        let io = |e| Error::io("<embedding store>", e);
        serde_json::to_writer(
            &mut sink,
            &StoreHeader {
                format: STORE_FORMAT.into(),
                version: STORE_VERSION,
                dim: self.dim,
            },
        )?;
        sink.write_all(b"\n").map_err(io)?;
        for (id, vectors) in &self.entries {
            serde_json::to_writer(
                &mut sink,
                &StoreEntry {
                    id: id.clone(),
                    tokens: vectors.len(),
                    vectors: vectors.clone(),
                },
            )?;
            sink.write_all(b"\n").map_err(io)?;
        }
        sink.flush().map_err(io)
    }

    pub fn read<R: BufRead>(source: R) -> Result<Self> {
        let mut lines = source.lines().enumerate();
        let parse_err = |line: usize, field: &str, message: String| Error::Parse {
            line,
            field: field.into(),
            message,
        };
        let header: StoreHeader = loop {
            match lines.next() {
                Some((i, line)) => {
                    let line = line.map_err(|e| Error::io("<embedding store>", e))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    break serde_json::from_str(&line)
                        .map_err(|e| parse_err(i + 1, "<header>", e.to_string()))?;
                }
                None => return Err(parse_err(1, "<header>", "empty embedding store".into())),
            }
        };
        if header.format != STORE_FORMAT || header.version != STORE_VERSION {
            return Err(parse_err(
                1,
                "format",
                format!("unsupported store `{}` v{}", header.format, header.version),
            ));
        }
        let mut store = EmbeddingStore::new(header.dim);
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io("<embedding store>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: StoreEntry =
                serde_json::from_str(&line).map_err(|e| parse_err(i + 1, "<entry>", e.to_string()))?;
            if entry.vectors.len() != entry.tokens {
                return Err(parse_err(
                    i + 1,
                    "tokens",
                    format!("declares {} tokens, holds {} vectors", entry.tokens, entry.vectors.len()),
                ));
            }
            if let Some(bad) = entry.vectors.iter().find(|v| v.len() != header.dim) {
                return Err(parse_err(
                    i + 1,
                    "vectors",
                    format!("vector of length {} in a store of dim {}", bad.len(), header.dim),
                ));
            }
            store.entries.insert(entry.id, entry.vectors);
        }
        Ok(store)
    }
}

/// Serves vectors from an [`EmbeddingStore`].
#[derive(Clone, Debug)]
pub struct PrecomputedEmbedding {
    store: EmbeddingStore,
}

impl PrecomputedEmbedding {
    pub fn new(store: EmbeddingStore) -> Self {
        PrecomputedEmbedding { store }
    }
}

impl EmbeddingBackend for PrecomputedEmbedding {
    fn dim(&self) -> usize {
        self.store.dim
    }

    fn embed(&self, review_id: &str, text: &TokenizedText) -> Result<TokenVectors> {
        let vectors = self
            .store
            .get(review_id)
            .ok_or_else(|| Error::MissingEmbedding(review_id.to_owned()))?;
        if vectors.len() != text.len() {
            return Err(Error::TokenCountMismatch {
                review_id: review_id.to_owned(),
                stored: vectors.len(),
                expected: text.len(),
            });
        }
        Ok(vectors)
    }
}
