//! Synthetic Zipf-distributed text for the search benchmarks and the
//! throughput floor check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use clozekit::Document;

/// Word generator whose frequencies follow a Zipf law over a fixed
/// vocabulary of pseudo-words.
pub struct ZipfText {
    vocab: Vec<String>,
    cdf: Vec<f64>,
    rng: ChaCha8Rng,
}

impl ZipfText {
    pub fn new(seed: u64, vocab_size: usize, exponent: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vocab = (0..vocab_size)
            .map(|_| {
                let len = rng.random_range(2..=9);
                (0..len).map(|_| rng.random_range(b'a'..=b'z') as char).collect()
            })
            .collect();
        let mut cdf: Vec<f64> = (1..=vocab_size).map(|r| (r as f64).powf(-exponent)).collect();
        let mut acc = 0.0;
        for w in cdf.iter_mut() {
            acc += *w;
            *w = acc;
        }
        for w in cdf.iter_mut() {
            *w /= acc;
        }
        ZipfText { vocab, cdf, rng }
    }

    pub fn word(&mut self) -> &str {
        let u: f64 = self.rng.random();
        let i = self.cdf.partition_point(|&c| c < u).min(self.vocab.len() - 1);
        &self.vocab[i]
    }

    /// One capitalized sentence of 6 to 24 words ending in a period.
    pub fn sentence(&mut self) -> String {
        let n = self.rng.random_range(6..=24);
        let mut s = String::new();
        for i in 0..n {
            if i > 0 {
                s.push(' ');
            }
            let w = self.word().to_string();
            if i == 0 {
                let mut c = w.chars();
                if let Some(f) = c.next() {
                    s.extend(f.to_uppercase());
                    s.push_str(c.as_str());
                }
            } else {
                s.push_str(&w);
            }
        }
        s.push('.');
        s
    }

    /// Record texts totalling at least `bytes`, about `record_bytes` each.
    pub fn records(&mut self, bytes: usize, record_bytes: usize) -> Vec<String> {
        let mut out = Vec::new();
        let mut total = 0;
        while total < bytes {
            let mut r = String::new();
            while r.len() < record_bytes {
                if !r.is_empty() {
                    r.push(' ');
                }
                r.push_str(&self.sentence());
            }
            total += r.len();
            out.push(r);
        }
        out
    }

    /// A query document with `n` sentences, already segmented.
    pub fn query_document(&mut self, id: &str, n: usize) -> Document {
        let sentences: Vec<String> = (0..n).map(|_| self.sentence()).collect();
        let mut doc = Document::new(id, sentences.join(" "));
        doc.sentences = sentences;
        doc
    }
}

/// Serializes record texts as corpus JSON lines.
pub fn to_jsonl(records: &[String]) -> String {
    let mut out = String::new();
    for (i, text) in records.iter().enumerate() {
        let line = serde_json::json!({ "id": format!("r{i}"), "text": text });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}
