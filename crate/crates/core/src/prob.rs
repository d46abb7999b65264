//! Code lengths to conditional probabilities.
//!
//! For a history `x` and every candidate suffix `a` of length `h`, each
//! backend `i` compresses `x‖a`. The suffix receives mass
//! `Σ_i ω_i 2^(-L_i(x‖a))`, normalized over all suffixes. The global
//! normalizer over whole words cancels in that ratio and is never formed.
//! Masses are kept as natural logarithms and combined with log-sum-exp so
//! code lengths in the hundreds or thousands of bits do not underflow.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::codec::{encode_raw, CodeLengthModel};
use crate::error::{Error, Result};

pub const DEFAULT_ENUMERATION_CAP: usize = 65_536;

/// Finite-alphabet sequence: every symbol is below `alphabet_size`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolSeries {
    symbols: Vec<u32>,
    alphabet_size: u32,
}

impl SymbolSeries {
    pub fn new(symbols: Vec<u32>, alphabet_size: u32) -> Result<Self> {
        if alphabet_size < 2 {
            return Err(Error::InvalidInput(format!(
                "alphabet size must be at least 2, got {alphabet_size}"
            )));
        }
        if let Some(pos) = symbols.iter().position(|&s| s >= alphabet_size) {
            return Err(Error::InvalidInput(format!(
                "symbol {} at position {pos} outside alphabet of size {alphabet_size}",
                symbols[pos]
            )));
        }
        Ok(Self {
            symbols,
            alphabet_size,
        })
    }

    /// Parses a string of decimal digits, e.g. `"00011100011100011"`.
    pub fn from_digits(digits: &str, alphabet_size: u32) -> Result<Self> {
        let symbols = digits
            .chars()
            .map(|c| {
                c.to_digit(10)
                    .ok_or_else(|| Error::InvalidInput(format!("`{c}` is not a digit")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(symbols, alphabet_size)
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    pub fn alphabet_size(&self) -> u32 {
        self.alphabet_size
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Convex combination weights, one per compressor (or per partition depth).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixtureWeights(Vec<f64>);

impl MixtureWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Config("mixture needs at least one weight".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config(format!(
                "weights must be non-negative: {weights:?}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for MixtureWeights {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MixtureWeights> for Vec<f64> {
    fn from(w: MixtureWeights) -> Self {
        w.0
    }
}

/// Probability of each length-`h` suffix. Suffixes are indexed in
/// lexicographic order with the first symbol most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffixDistribution {
    horizon: usize,
    alphabet_size: u32,
    probs: Vec<f64>,
    /// Per suffix, per backend code length in bits (empty when the
    /// distribution was assembled from several partition depths).
    code_lengths: Vec<Vec<f64>>,
}

impl SuffixDistribution {
    /// Normalizes natural-log masses into a distribution.
    pub(crate) fn from_log_masses(
        horizon: usize,
        alphabet_size: u32,
        log_masses: &[f64],
        code_lengths: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let total = logsumexp(log_masses);
        if !total.is_finite() {
            return Err(Error::Invariant(
                "suffix distribution has zero total mass".into(),
            ));
        }
        let probs = log_masses.iter().map(|m| (m - total).exp()).collect();
        Ok(Self {
            horizon,
            alphabet_size,
            probs,
            code_lengths,
        })
    }

    /// Builds the mixture distribution from code lengths already in hand,
    /// `lengths[suffix][backend]` in bits.
    pub fn from_code_lengths(
        horizon: usize,
        alphabet_size: u32,
        lengths: Vec<Vec<f64>>,
        weights: &MixtureWeights,
    ) -> Result<Self> {
        let expected = enumeration_size(alphabet_size, horizon, usize::MAX)?;
        if lengths.len() != expected {
            return Err(Error::InvalidInput(format!(
                "{} suffix rows supplied, {expected} expected",
                lengths.len()
            )));
        }
        if let Some(row) = lengths.iter().find(|r| r.len() != weights.len()) {
            return Err(Error::InvalidInput(format!(
                "{} code lengths for {} weights",
                row.len(),
                weights.len()
            )));
        }
        let masses: Vec<f64> = lengths
            .iter()
            .map(|row| mixture_log_mass(row, weights, 0.0))
            .collect();
        Self::from_log_masses(horizon, alphabet_size, &masses, lengths)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn alphabet_size(&self) -> u32 {
        self.alphabet_size
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn code_lengths(&self) -> &[Vec<f64>] {
        &self.code_lengths
    }

    pub fn suffix(&self, index: usize) -> Vec<u32> {
        suffix_symbols(index, self.alphabet_size, self.horizon)
    }

    pub fn probability_of(&self, suffix: &[u32]) -> Option<f64> {
        if suffix.len() != self.horizon || suffix.iter().any(|&s| s >= self.alphabet_size) {
            return None;
        }
        let index = suffix.iter().fold(0usize, |acc, &s| {
            acc * self.alphabet_size as usize + s as usize
        });
        Some(self.probs[index])
    }

    /// Most probable suffix; the lowest index wins ties.
    pub fn top_suffix(&self) -> (Vec<u32>, f64) {
        let (index, p) =
            self.probs
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &p)| {
                    if p > best.1 {
                        (i, p)
                    } else {
                        best
                    }
                });
        (self.suffix(index), p)
    }

    /// Distribution of the symbol at step `step` (1-based), summing out the
    /// other positions.
    pub fn marginal(&self, step: usize) -> Result<Vec<f64>> {
        if step == 0 || step > self.horizon {
            return Err(Error::InvalidInput(format!(
                "step {step} outside 1..={}",
                self.horizon
            )));
        }
        let a = self.alphabet_size as usize;
        let stride = a.pow((self.horizon - step) as u32);
        let mut out = vec![0.0; a];
        for (index, &p) in self.probs.iter().enumerate() {
            out[(index / stride) % a] += p;
        }
        Ok(out)
    }

    /// CSV rows `suffix,<backend ids...>,probability` for diagnostics.
    pub fn lengths_csv(&self, backend_ids: &[&str]) -> String {
        let mut out = format!("suffix,{},probability\n", backend_ids.join(","));
        for (i, p) in self.probs.iter().enumerate() {
            let suffix: Vec<String> = self.suffix(i).iter().map(u32::to_string).collect();
            let lengths: Vec<String> = self
                .code_lengths
                .get(i)
                .map(|r| r.iter().map(|l| format!("{l}")).collect())
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{p:.12e}\n",
                suffix.join(" "),
                lengths.join(",")
            ));
        }
        out
    }
}

/// Next-symbol distribution: the first-step marginal.
pub fn next_symbol_distribution(dist: &SuffixDistribution) -> Vec<f64> {
    dist.marginal(1).expect("step 1 is always in range")
}

/// `ln Σ exp(x)`, returning `-inf` for an empty or all-`-inf` input.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln Σ_i ω_i 2^-(L_i + penalty)`.
pub(crate) fn mixture_log_mass(
    lengths: &[f64],
    weights: &MixtureWeights,
    penalty_bits: f64,
) -> f64 {
    let terms: Vec<f64> = lengths
        .iter()
        .zip(weights.as_slice())
        .map(|(&l, &w)| w.ln() - (l + penalty_bits) * std::f64::consts::LN_2)
        .collect();
    logsumexp(&terms)
}

/// Number of suffixes in `A^h`, or an error when it exceeds `cap`.
pub fn enumeration_size(alphabet_size: u32, horizon: usize, cap: usize) -> Result<usize> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    let candidates = u32::try_from(horizon)
        .ok()
        .and_then(|h| u128::from(alphabet_size).checked_pow(h))
        .unwrap_or(u128::MAX);
    if candidates > cap as u128 {
        return Err(Error::EnumerationTooLarge { candidates, cap });
    }
    Ok(candidates as usize)
}

pub(crate) fn suffix_symbols(index: usize, alphabet_size: u32, horizon: usize) -> Vec<u32> {
    let a = alphabet_size as usize;
    let mut out = vec![0; horizon];
    let mut rest = index;
    for slot in out.iter_mut().rev() {
        *slot = (rest % a) as u32;
        rest /= a;
    }
    out
}

/// Code lengths `[suffix][backend]` of `history‖suffix` for every suffix in
/// `A^h`.
pub(crate) fn enumerate_code_lengths(
    history: &SymbolSeries,
    horizon: usize,
    backends: &[Arc<dyn CodeLengthModel>],
    cap: usize,
) -> Result<Vec<Vec<f64>>> {
    let a = history.alphabet_size();
    let count = enumeration_size(a, horizon, cap)?;
    let prefix = encode_raw(history.symbols(), a)?;
    let suffixes = (0..count)
        .map(|i| encode_raw(&suffix_symbols(i, a, horizon), a))
        .collect::<Result<Vec<_>>>()?;
    let per_backend: Vec<Vec<f64>> = backends
        .iter()
        .map(|b| {
            b.suffix_code_lengths(&prefix, &suffixes)
                .into_iter()
                .map(|l| l.bits())
                .collect()
        })
        .collect();
    Ok((0..count)
        .map(|s| per_backend.iter().map(|col| col[s]).collect())
        .collect())
}

/// Mixture distribution over all length-`horizon` continuations of
/// `history`.
pub fn suffix_distribution(
    history: &SymbolSeries,
    horizon: usize,
    backends: &[Arc<dyn CodeLengthModel>],
    weights: &MixtureWeights,
    cap: usize,
) -> Result<SuffixDistribution> {
    if backends.is_empty() {
        return Err(Error::Config("at least one backend is required".into()));
    }
    if backends.len() != weights.len() {
        return Err(Error::Config(format!(
            "{} backends but {} weights",
            backends.len(),
            weights.len()
        )));
    }
    let lengths = enumerate_code_lengths(history, horizon, backends, cap)?;
    SuffixDistribution::from_code_lengths(horizon, history.alphabet_size(), lengths, weights)
}
