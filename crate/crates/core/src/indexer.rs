//! Line-aligned chunking, embedding and exact cosine retrieval.

use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::gateway::ModelGateway;
use crate::{Error, Result};

pub const DEFAULT_CHUNK_BUDGET: usize = 1024;
pub const DEFAULT_TOP_K: usize = 2;

/// Texts sent per embedding request.
const EMBED_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: usize,
    /// First and last line, 1-based and inclusive.
    pub line_span: (usize, usize),
    pub text: String,
    pub token_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkIndex {
    pub chunks: Vec<Chunk>,
    pub vectors: Vec<Vec<f32>>,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub chunk: Chunk,
    pub score: f64,
}

/// Splits on `\n`; a trailing newline does not start an extra empty line.
pub fn split_lines(raw: &str) -> Vec<&str> {
    let body = raw.strip_suffix('\n').unwrap_or(raw);
    body.split('\n').collect()
}

fn token_count(line: &str) -> usize {
    line.split_whitespace().count()
}

/// Greedy packing of whole lines: a chunk grows until the next line would
/// push it past `budget` whitespace tokens. A line longer than the budget
/// gets a chunk of its own.
pub fn chunk_log(raw: &str, budget: usize) -> Result<Vec<Chunk>> {
    if raw.is_empty() {
        return Err(Error::EmptyInput);
    }
    let budget = budget.max(1);
    let mut chunks = Vec::new();
    let mut start = 0usize;
    let mut lines: Vec<&str> = Vec::new();
    let mut tokens = 0usize;
    let mut flush = |lines: &mut Vec<&str>, tokens: &mut usize, start: usize| {
        if lines.is_empty() {
            return;
        }
        chunks.push(Chunk {
            chunk_id: chunks.len(),
            line_span: (start + 1, start + lines.len()),
            text: lines.join("\n"),
            token_count: *tokens,
        });
        lines.clear();
        *tokens = 0;
    };
    for (i, line) in split_lines(raw).into_iter().enumerate() {
        let n = token_count(line);
        if !lines.is_empty() && tokens + n > budget {
            flush(&mut lines, &mut tokens, start);
        }
        if lines.is_empty() {
            start = i;
        }
        lines.push(line);
        tokens += n;
    }
    flush(&mut lines, &mut tokens, start);
    Ok(chunks)
}

fn normalize(v: &mut [f32]) {
    let norm = v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x = (f64::from(*x) / norm) as f32;
        }
    }
}

/// Embeds every chunk and stores unit-length vectors.
pub fn build_index<G: ModelGateway + ?Sized>(chunks: Vec<Chunk>, gateway: &G) -> Result<ChunkIndex> {
    if chunks.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut vectors: Vec<Vec<f32>> = Vec::with_capacity(chunks.len());
    for batch in chunks.chunks(EMBED_BATCH) {
        let texts: Vec<String> = batch.iter().map(|c| c.text.clone()).collect();
        let got = gateway.embed(&texts)?;
        if got.len() != texts.len() {
            return Err(crate::GatewayError::malformed(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                got.len()
            ))
            .into());
        }
        vectors.extend(got);
    }
    let dim = vectors[0].len();
    for v in &mut vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(crate::GatewayError::malformed("embedding has non-finite component").into());
        }
        normalize(v);
    }
    Ok(ChunkIndex { chunks, vectors, dim })
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0f64, 0f64, 0f64);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (f64::from(*x), f64::from(*y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

impl ChunkIndex {
    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// Scores every chunk against an already embedded query and returns the
    /// best `k`, highest first, lower chunk id first on ties.
    pub fn top_k(&self, query: &[f32], k: usize) -> Result<Vec<ScoredChunk>> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: query.len(),
            });
        }
        let mut scored: Vec<(f64, usize)> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| (cosine(v, query), i))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        Ok(scored
            .into_iter()
            .take(k.max(1))
            .map(|(score, i)| ScoredChunk {
                chunk: self.chunks[i].clone(),
                score,
            })
            .collect())
    }
}

pub fn semantic_search<G: ModelGateway + ?Sized>(
    index: &ChunkIndex,
    query: &str,
    k: usize,
    gateway: &G,
) -> Result<Vec<ScoredChunk>> {
    if index.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut embedded = gateway.embed(&[query.to_string()])?;
    let q = embedded.pop().ok_or_else(|| crate::GatewayError::malformed("no query embedding"))?;
    index.top_k(&q, k)
}

/// Hex SHA-256 of a file's bytes.
pub fn content_hash(raw: &str) -> String {
    hex(&Sha256::digest(raw.as_bytes()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// On-disk cache of built indexes. One file per (content, embedder, budget)
/// triple, so a re-uploaded file skips embedding.
///
/// Layout, little-endian: `LCIX`, u32 version, u32 dim, u64 count, then
/// `count * dim` f32 vectors, then per chunk u64 first line, u64 last line,
/// u64 token count, u64 text length and the UTF-8 text.
#[derive(Debug, Clone)]
pub struct IndexCache {
    dir: PathBuf,
}

const MAGIC: &[u8; 4] = b"LCIX";
const VERSION: u32 = 1;

impl IndexCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, content_hash: &str, embedding_id: &str, budget: usize) -> PathBuf {
        let mut h = Sha256::new();
        h.update(content_hash.as_bytes());
        h.update([0]);
        h.update(embedding_id.as_bytes());
        h.update([0]);
        h.update(budget.to_le_bytes());
        self.dir.join(format!("{}.lcix", hex(&h.finalize())))
    }

    pub fn load(&self, path: &Path) -> Result<Option<ChunkIndex>> {
        let bytes = match fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        decode(&bytes)
            .map(Some)
            .map_err(|e| Error::IndexCache {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
    }

    /// Writes through a temporary file so readers never see a partial index.
    pub fn store(&self, path: &Path, index: &ChunkIndex) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let tmp = path.with_extension("lcix.tmp");
        fs::write(&tmp, encode(index))?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

fn encode(index: &ChunkIndex) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(index.dim as u32).to_le_bytes());
    out.extend_from_slice(&(index.chunks.len() as u64).to_le_bytes());
    for v in &index.vectors {
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    for c in &index.chunks {
        for n in [c.line_span.0, c.line_span.1, c.token_count, c.text.len()] {
            out.extend_from_slice(&(n as u64).to_le_bytes());
        }
        out.extend_from_slice(c.text.as_bytes());
    }
    out
}

fn decode(bytes: &[u8]) -> io::Result<ChunkIndex> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let mut r = bytes;
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("bad magic"));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    if u32::from_le_bytes(u32buf) != VERSION {
        return Err(bad("unsupported version"));
    }
    r.read_exact(&mut u32buf)?;
    let dim = u32::from_le_bytes(u32buf) as usize;
    let count = read_u64(&mut r)?;
    if count.checked_mul(dim.max(1) * 4).is_none_or(|n| n > r.len()) {
        return Err(bad("truncated vectors"));
    }
    let mut vectors = Vec::with_capacity(count);
    for _ in 0..count {
        let mut v = Vec::with_capacity(dim);
        for _ in 0..dim {
            r.read_exact(&mut u32buf)?;
            v.push(f32::from_le_bytes(u32buf));
        }
        vectors.push(v);
    }
    let mut chunks = Vec::with_capacity(count);
    for chunk_id in 0..count {
        let first = read_u64(&mut r)?;
        let last = read_u64(&mut r)?;
        let token_count = read_u64(&mut r)?;
        let len = read_u64(&mut r)?;
        if len > r.len() {
            return Err(bad("truncated chunk text"));
        }
        let (text, rest) = r.split_at(len);
        r = rest;
        let text = String::from_utf8(text.to_vec()).map_err(|_| bad("chunk text is not UTF-8"))?;
        chunks.push(Chunk {
            chunk_id,
            line_span: (first, last),
            text,
            token_count,
        });
    }
    if !r.is_empty() {
        return Err(bad("trailing bytes"));
    }
    Ok(ChunkIndex { chunks, vectors, dim })
}

fn read_u64(r: &mut &[u8]) -> io::Result<usize> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    usize::try_from(u64::from_le_bytes(buf)).map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "length overflow"))
}

/// Builds the index, going through `cache` when one is given. A corrupt
/// cache file is logged and rebuilt.
pub fn build_or_load<G: ModelGateway + ?Sized>(
    raw: &str,
    budget: usize,
    gateway: &G,
    cache: Option<&IndexCache>,
) -> Result<ChunkIndex> {
    let chunks = chunk_log(raw, budget)?;
    let Some(cache) = cache else {
        return build_index(chunks, gateway);
    };
    let path = cache.path_for(&content_hash(raw), &gateway.embedding_id(), budget);
    match cache.load(&path) {
        Ok(Some(index)) if index.chunks == chunks => return Ok(index),
        Ok(_) => {}
        Err(e) => tracing::warn!(error = %e, "ignoring unreadable index cache"),
    }
    let index = build_index(chunks, gateway)?;
    if let Err(e) = cache.store(&path, &index) {
        tracing::warn!(error = %e, "could not write index cache");
    }
    Ok(index)
}
