//! BM25 building blocks shared by both engines.
//!
//! The variant implemented here drops the classical `(k1 + 1)` numerator
//! factor: `idf * tf / (tf + k1 * (1 - b + b * dl / avgdl))`. Both engines
//! use these double-precision helpers; the live index additionally rounds
//! the idf and length factors to single precision before combining them.

/// `ln(1 + (N - df + 0.5) / (df + 0.5))`. Non-negative for `df <= N`.
pub fn idf(n_docs: u64, df: u64) -> f64 {
    let n = n_docs as f64;
    let df = df as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// Length normalization `1 - b + b * dl / avgdl` using the decoded
/// approximate document length. Callers never reach this with
/// `avgdl == 0`: a corpus with any posting has a positive mean length.
pub fn length_factor(b: f64, decoded_len: u32, avgdl: f64) -> f64 {
    1.0 - b + b * (f64::from(decoded_len) / avgdl)
}

/// Full double-precision per-term contribution, used by the versioned
/// engine.
pub fn bm25_term(idf: f64, tf: u32, k1: f64, length_factor: f64) -> f64 {
    let tf = f64::from(tf);
    idf * tf / (tf + k1 * length_factor)
}
