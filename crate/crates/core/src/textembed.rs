//! Signed feature-hashing sentence embeddings.
//!
//! Each lowercase alphanumeric token adds `±1` at `fnv1a(token) mod D`, with
//! the sign taken from the parity of `fnv1a("#" + token)`. The sum is
//! L2-normalised, so identical token bags always map to the same unit vector.

use crate::error::{Error, Result};

pub const DEFAULT_DIM: usize = 64;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Unit-norm embedding of a piece of text.
#[derive(Clone, Debug, PartialEq)]
pub struct SentenceEmbedding {
    vector: Vec<f64>,
    text: String,
}

impl SentenceEmbedding {
    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    /// Wraps an arbitrary vector, normalising it. Used for tests and for
    /// embeddings produced outside the hashing embedder.
    pub fn from_vector(vector: Vec<f64>, text: impl Into<String>) -> Result<Self> {
        let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::EmptyText);
        }
        Ok(Self {
            vector: vector.into_iter().map(|v| v / norm).collect(),
            text: text.into(),
        })
    }

    pub fn negated(&self) -> Self {
        Self {
            vector: self.vector.iter().map(|v| -v).collect(),
            text: format!("-{}", self.text),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Embedder {
    dim: usize,
}

impl Default for Embedder {
    fn default() -> Self {
        Self { dim: DEFAULT_DIM }
    }
}

impl Embedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embed(&self, text: &str) -> Result<SentenceEmbedding> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::EmptyText);
        }
        let mut v = vec![0.0; self.dim];
        for tok in &tokens {
            let idx = (fnv1a(tok.as_bytes()) % self.dim as u64) as usize;
            let sign = if fnv1a(format!("#{tok}").as_bytes()) % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            v[idx] += sign;
        }
        if v.iter().all(|&x| x == 0.0) {
            // Every token cancelled against a colliding one; fall back to the
            // joined token string as a single feature.
            let joined = tokens.join(" ");
            v[(fnv1a(joined.as_bytes()) % self.dim as u64) as usize] = 1.0;
        }
        SentenceEmbedding::from_vector(v, text)
    }
}

/// Embeds with the default 64-dimensional embedder.
pub fn embed(text: &str) -> Result<SentenceEmbedding> {
    Embedder::default().embed(text)
}

/// Cosine similarity of two unit vectors, clamped to `[-1, 1]`.
pub fn cosine(a: &SentenceEmbedding, b: &SentenceEmbedding) -> Result<f64> {
    cosine_slices(a.vector(), b.vector())
}

pub fn cosine_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

/// Ordered, duplicate-free caption list with precomputed embeddings.
#[derive(Clone, Debug)]
pub struct CaptionVocabulary {
    captions: Vec<String>,
    embeddings: Vec<SentenceEmbedding>,
}

impl CaptionVocabulary {
    pub fn new(captions: Vec<String>, embedder: &Embedder) -> Result<Self> {
        if captions.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        for (i, c) in captions.iter().enumerate() {
            if captions[..i].contains(c) {
                return Err(Error::Config(format!("duplicate caption `{c}`")));
            }
        }
        let embeddings = captions
            .iter()
            .map(|c| embedder.embed(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            captions,
            embeddings,
        })
    }

    pub fn len(&self) -> usize {
        self.captions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.captions.is_empty()
    }

    pub fn captions(&self) -> &[String] {
        &self.captions
    }

    pub fn caption(&self, i: usize) -> &str {
        &self.captions[i]
    }

    pub fn embedding(&self, i: usize) -> &SentenceEmbedding {
        &self.embeddings[i]
    }

    pub fn index_of(&self, caption: &str) -> Option<usize> {
        self.captions.iter().position(|c| c == caption)
    }

    /// Closest caption by cosine; ties go to the lower index.
    pub fn nearest(&self, e: &SentenceEmbedding) -> Result<(usize, f64)> {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, c) in self.embeddings.iter().enumerate() {
            let s = cosine(e, c)?;
            if s > best.1 {
                best = (i, s);
            }
        }
        Ok(best)
    }

    /// One caption per line, UTF-8.
    pub fn to_lines(&self) -> String {
        let mut s = self.captions.join("\n");
        s.push('\n');
        s
    }

    pub fn from_lines(text: &str, embedder: &Embedder) -> Result<Self> {
        Self::new(
            text.lines()
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect(),
            embedder,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent re-implementation of the hashing rule.
    fn oracle_embed(text: &str, dim: usize) -> Vec<f64> {
        let mut v = vec![0.0f64; dim];
        let lower = text.to_lowercase();
        let mut tok = String::new();
        let flush = |tok: &mut String, v: &mut Vec<f64>| {
            if tok.is_empty() {
                return;
            }
            let mut h: u64 = 14695981039346656037;
            for b in tok.bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(1099511628211);
            }
            let mut s: u64 = 14695981039346656037;
            for b in std::iter::once(b'#').chain(tok.bytes()) {
                s ^= b as u64;
                s = s.wrapping_mul(1099511628211);
            }
            v[(h % dim as u64) as usize] += if s & 1 == 0 { 1.0 } else { -1.0 };
            tok.clear();
        };
        for ch in lower.chars() {
            if ch.is_alphanumeric() {
                tok.push(ch);
            } else {
                flush(&mut tok, &mut v);
            }
        }
        flush(&mut tok, &mut v);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect()
    }

    #[test]
    fn deterministic_and_unit_norm() {
        let a = embed("collect the wood").unwrap();
        let b = embed("collect the wood").unwrap();
        assert_eq!(a, b);
        assert_eq!(cosine(&a, &b).unwrap(), 1.0);
        let n: f64 = a.vector().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_text_rejected() {
        assert!(matches!(embed(""), Err(Error::EmptyText)));
        assert!(matches!(embed("  ,. "), Err(Error::EmptyText)));
    }

    #[test]
    fn shared_tokens_match_oracle() {
        let a = oracle_embed("attack the zombie", 64);
        let b = oracle_embed("attack the cow", 64);
        let want: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let got = cosine(&embed("attack the zombie").unwrap(), &embed("attack the cow").unwrap())
            .unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!(got > 0.0 && got < 1.0, "cosine {got}");
        // frozen value: two of three tokens shared, no collisions
        assert!((got - 2.0 / 3.0).abs() < 1e-12, "cosine {got}");
    }

    #[test]
    fn embedding_matches_oracle_vector() {
        for s in ["place the table", "The player sees tree, stone", "noop"] {
            let got = embed(s).unwrap();
            let want = oracle_embed(s, 64);
            for (g, w) in got.vector().iter().zip(&want) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cosine_edges() {
        let a = embed("place the table").unwrap();
        assert!((cosine(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!((cosine(&a, &a.negated()).unwrap() + 1.0).abs() < 1e-12);
        let short = Embedder::new(8).embed("x").unwrap();
        assert!(matches!(cosine(&a, &short), Err(Error::Dimension(64, 8))));
    }

    #[test]
    fn bag_of_tokens() {
        assert_eq!(
            embed("the zombie attack").unwrap().vector(),
            embed("attack the zombie").unwrap().vector()
        );
    }

    #[test]
    fn disjoint_corpus_has_small_cosine() {
        let words = [
            "tree", "stone", "water", "sand", "grass", "lava", "coal", "iron", "diamond", "table",
            "furnace", "zombie", "skeleton", "cow", "plant", "sapling", "sword", "pickaxe", "wood",
            "drink", "sleep", "eat", "attack", "collect", "place", "craft", "make", "defeat",
            "walk", "run", "jump", "swim", "build", "mine", "chop", "open", "close", "door",
            "key", "bin", "plate", "bottle", "fruit", "papers", "kitchen", "dining", "living",
            "room", "north", "south", "east", "west", "up", "down", "left", "right", "noop",
            "red", "green", "blue", "yellow", "purple", "orange", "black", "white", "silver",
            "gold", "copper", "tin", "lead", "zinc", "glass", "brick", "clay", "rope", "bucket",
            "torch", "arrow", "bow", "shield", "helmet", "boots", "gloves", "ring", "amulet",
            "scroll", "potion", "wand", "staff", "book", "map", "compass", "lantern", "bell",
            "drum", "flute", "harp", "horn", "lute", "violin", "piano",
        ];
        let mut max_abs: f64 = 0.0;
        for i in 0..50 {
            let a = format!("{} {}", words[2 * i], words[2 * i + 1]);
            let b = format!("{} {}", words[(2 * i + 7) % 100], words[(2 * i + 9) % 100]);
            let ta = tokenize(&a);
            if tokenize(&b).iter().any(|t| ta.contains(t)) {
                continue;
            }
            let c = cosine(&embed(&a).unwrap(), &embed(&b).unwrap()).unwrap();
            max_abs = max_abs.max(c.abs());
        }
        assert!(max_abs < 0.5, "max |cosine| {max_abs}");
    }

    #[test]
    fn vocabulary_rejects_duplicates_and_round_trips() {
        let e = Embedder::default();
        assert!(CaptionVocabulary::new(vec!["a".into(), "a".into()], &e).is_err());
        let v = CaptionVocabulary::new(vec!["move".into(), "noop".into()], &e).unwrap();
        let back = CaptionVocabulary::from_lines(&v.to_lines(), &e).unwrap();
        assert_eq!(back.captions(), v.captions());
        assert_eq!(v.index_of("noop"), Some(1));
        assert_eq!(v.nearest(&e.embed("noop").unwrap()).unwrap().0, 1);
    }
}
