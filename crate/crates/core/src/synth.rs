//! Deterministic synthetic corpora and query sets for tests and
//! benchmarks. Everything is driven by explicit seeds so generated inputs
//! are identical across runs and platforms.

use rand::distributions::Distribution;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Zipf;

const SYLLABLES: [&str; 20] = [
    "ba", "ce", "di", "fo", "gu", "ha", "je", "ki", "lo", "mu", "na", "pe", "ri", "so", "tu",
    "va", "we", "xi", "yo", "zu",
];

/// Deterministic pseudo-word for a vocabulary index; distinct indexes
/// yield distinct words.
pub fn pseudo_word(mut i: u64) -> String {
    let mut word = String::new();
    for _ in 0..3 {
        word.push_str(SYLLABLES[(i % 20) as usize]);
        i /= 20;
    }
    while i > 0 {
        word.push_str(SYLLABLES[(i % 20) as usize]);
        i /= 20;
    }
    word
}

pub fn vocabulary(size: usize) -> Vec<String> {
    (0..size as u64).map(pseudo_word).collect()
}

/// Corpus shape knobs. The defaults give a vocabulary and length spread
/// that keep consecutive BM25 scores well separated at a few thousand
/// documents.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    pub vocab_size: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Zipf exponent of the term distribution.
    pub exponent: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            vocab_size: 2500,
            min_len: 40,
            max_len: 120,
            exponent: 1.1,
        }
    }
}

/// Seeded document-text sampler: token counts uniform in the configured
/// range, tokens Zipf-distributed over the vocabulary.
pub struct TextSampler {
    vocab: Vec<String>,
    zipf: Zipf<f64>,
    rng: ChaCha8Rng,
    min_len: usize,
    max_len: usize,
}

impl TextSampler {
    pub fn new(config: &SynthConfig) -> TextSampler {
        TextSampler {
            vocab: vocabulary(config.vocab_size),
            zipf: Zipf::new(config.vocab_size as u64, config.exponent)
                .expect("valid zipf parameters"),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            min_len: config.min_len,
            max_len: config.max_len,
        }
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn next_text(&mut self) -> String {
        let len = self.rng.gen_range(self.min_len..=self.max_len);
        let mut words = Vec::with_capacity(len);
        for _ in 0..len {
            let rank = self.zipf.sample(&mut self.rng) as usize;
            words.push(self.vocab[rank - 1].as_str());
        }
        words.join(" ")
    }
}

/// Generates `count` documents named `doc00000`, `doc00001`, ...
pub fn generate_corpus(config: &SynthConfig, count: usize) -> Vec<(String, String)> {
    let mut sampler = TextSampler::new(config);
    (0..count)
        .map(|i| (format!("doc{i:05}"), sampler.next_text()))
        .collect()
}

/// Samples queries of `terms_per_query` distinct Zipf-weighted vocabulary
/// terms each. Weighting towards frequent terms keeps result lists long
/// enough to be interesting.
pub fn sample_queries(
    config: &SynthConfig,
    seed: u64,
    terms_per_query: usize,
    count: usize,
) -> Vec<String> {
    let vocab = vocabulary(config.vocab_size);
    let zipf = Zipf::new(config.vocab_size as u64, config.exponent).expect("valid zipf parameters");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ terms_per_query as u64);
    (0..count)
        .map(|_| {
            let mut terms: Vec<&str> = Vec::with_capacity(terms_per_query);
            while terms.len() < terms_per_query {
                let rank = zipf.sample(&mut rng) as usize;
                let word = vocab[rank - 1].as_str();
                if !terms.contains(&word) {
                    terms.push(word);
                }
            }
            terms.join(" ")
        })
        .collect()
}
