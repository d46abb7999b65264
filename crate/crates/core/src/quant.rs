//! Dyadic quantization of real-valued series and the multi-depth mixture.
//!
//! The interval `[m, M]` is split into `2^i` equal subintervals at every depth
//! `i = 1..=n`. A depth-`i` word of `t` symbols is charged `t·(n−i)` extra bits,
//! the cost of pinning each symbol down to the finest partition, before the
//! depths are mixed. Because those extra bits cover the suffix positions too,
//! each coarse suffix spreads its mass uniformly over the fine suffixes it
//! contains.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::CodeLengthModel;
use crate::error::{Error, Result};
use crate::prob::{
    enumerate_code_lengths, enumeration_size, logsumexp, mixture_log_mass, suffix_symbols,
    MixtureWeights, SuffixDistribution, SymbolSeries,
};

pub const DEFAULT_MAX_DEPTH: u32 = 4;
/// Depths beyond this would overflow the byte encoding of symbols.
pub const MAX_DEPTH: u32 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionScheme {
    lower: f64,
    upper: f64,
    max_depth: u32,
    depth_weights: MixtureWeights,
}

impl PartitionScheme {
    pub fn new(
        lower: f64,
        upper: f64,
        max_depth: u32,
        depth_weights: MixtureWeights,
    ) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && upper > lower) {
            return Err(Error::Config(format!(
                "invalid interval [{lower}, {upper}]"
            )));
        }
        if !(1..=MAX_DEPTH).contains(&max_depth) {
            return Err(Error::Config(format!(
                "depth {max_depth} not in 1..={MAX_DEPTH}"
            )));
        }
        if depth_weights.len() != max_depth as usize {
            return Err(Error::Config(format!(
                "{} depth weights for depth {max_depth}",
                depth_weights.len()
            )));
        }
        Ok(Self {
            lower,
            upper,
            max_depth,
            depth_weights,
        })
    }

    pub fn uniform(lower: f64, upper: f64, max_depth: u32) -> Result<Self> {
        Self::new(
            lower,
            upper,
            max_depth,
            MixtureWeights::uniform(max_depth as usize),
        )
    }

    /// Scheme over the fitted interval of `values`.
    pub fn fit(values: &[f64], max_depth: u32, depth_weights: MixtureWeights) -> Result<Self> {
        let (lower, upper) = fit_interval(values)?;
        Self::new(lower, upper, max_depth, depth_weights)
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    pub fn depth_weights(&self) -> &MixtureWeights {
        &self.depth_weights
    }

    /// Width of one subinterval of the finest partition.
    pub fn finest_width(&self) -> f64 {
        (self.upper - self.lower) / f64::from(1u32 << self.max_depth)
    }

    fn check_depth(&self, depth: u32) -> Result<()> {
        if depth == 0 || depth > self.max_depth {
            return Err(Error::InvalidInput(format!(
                "depth {depth} not in 1..={}",
                self.max_depth
            )));
        }
        Ok(())
    }

    fn symbol(&self, x: f64, depth: u32) -> u32 {
        let cells = 1u32 << depth;
        // Scale the unit position by a power of two so that nesting between
        // depths is exact.
        let unit = (x - self.lower) / (self.upper - self.lower);
        let raw = (unit * f64::from(cells)).floor();
        if raw.is_nan() || raw < 0.0 {
            0
        } else if raw >= f64::from(cells) {
            cells - 1
        } else {
            raw as u32
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedSeries {
    pub depth: u32,
    pub symbols: SymbolSeries,
}

/// Smallest interval holding all values, widened by half a unit either side
/// when the values are all equal.
pub fn fit_interval(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::InvalidInput(
            "cannot fit an interval to no values".into(),
        ));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite value {bad}")));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        Ok((lo - 0.5, hi + 0.5))
    } else {
        Ok((lo, hi))
    }
}

/// Subinterval numbers at `depth`; out-of-range values clamp to the end cells.
pub fn quantize(values: &[f64], scheme: &PartitionScheme, depth: u32) -> Result<QuantizedSeries> {
    scheme.check_depth(depth)?;
    let symbols = values.iter().map(|&x| scheme.symbol(x, depth)).collect();
    Ok(QuantizedSeries {
        depth,
        symbols: SymbolSeries::new(symbols, 1 << depth)?,
    })
}

/// Midpoint of subinterval `symbol` at `depth`.
pub fn dequantize(symbol: u32, scheme: &PartitionScheme, depth: u32) -> Result<f64> {
    scheme.check_depth(depth)?;
    let cells = 1u32 << depth;
    if symbol >= cells {
        return Err(Error::InvalidInput(format!(
            "symbol {symbol} outside alphabet of size {cells}"
        )));
    }
    Ok(scheme.lower + (scheme.upper - scheme.lower) * (f64::from(symbol) + 0.5) / f64::from(cells))
}

/// True when every fine symbol halves to its coarse counterpart.
pub fn refinement_check(coarse: &QuantizedSeries, fine: &QuantizedSeries) -> bool {
    fine.depth == coarse.depth + 1
        && coarse.symbols.len() == fine.symbols.len()
        && coarse
            .symbols
            .symbols()
            .iter()
            .zip(fine.symbols.symbols())
            .all(|(&c, &f)| f / 2 == c)
}

/// Mixture over partition depths of the per-depth compressor mixtures,
/// returned over the finest alphabet of `2^n` symbols.
pub fn partition_mixture(
    history: &[f64],
    horizon: usize,
    scheme: &PartitionScheme,
    backends: &[Arc<dyn CodeLengthModel>],
    weights: &MixtureWeights,
    cap: usize,
) -> Result<SuffixDistribution> {
    partition_mixture_detailed(history, horizon, scheme, backends, weights, cap)
        .map(|m| m.distribution)
}

#[derive(Debug, Clone)]
pub struct PartitionMixture {
    pub distribution: SuffixDistribution,
    /// Share of the total mixture mass contributed by each active depth.
    pub depth_shares: Vec<(u32, f64)>,
}

pub fn partition_mixture_detailed(
    history: &[f64],
    horizon: usize,
    scheme: &PartitionScheme,
    backends: &[Arc<dyn CodeLengthModel>],
    weights: &MixtureWeights,
    cap: usize,
) -> Result<PartitionMixture> {
    if backends.is_empty() || backends.len() != weights.len() {
        return Err(Error::Config(format!(
            "{} backends but {} weights",
            backends.len(),
            weights.len()
        )));
    }
    let n = scheme.max_depth;
    let fine_alphabet = 1u32 << n;
    let fine_count = enumeration_size(fine_alphabet, horizon, cap)?;
    let word_len = (history.len() + horizon) as f64;

    let active: Vec<(u32, f64)> = scheme
        .depth_weights
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(k, &w)| (k as u32 + 1, w))
        .collect();

    // Per active depth: (depth, natural-log mass of each coarse suffix, raw lengths).
    let per_depth = active
        .par_iter()
        .map(|&(depth, depth_weight)| {
            let q = quantize(history, scheme, depth)?;
            let lengths = enumerate_code_lengths(&q.symbols, horizon, backends, cap)?;
            let penalty = word_len * f64::from(n - depth);
            let masses: Vec<f64> = lengths
                .iter()
                .map(|row| depth_weight.ln() + mixture_log_mass(row, weights, penalty))
                .collect();
            Ok((depth, masses, lengths))
        })
        .collect::<Result<Vec<_>>>()?;

    let fine_masses: Vec<f64> = (0..fine_count)
        .map(|index| {
            let fine = suffix_symbols(index, fine_alphabet, horizon);
            let terms: Vec<f64> = per_depth
                .iter()
                .map(|(depth, masses, _)| {
                    let shift = n - depth;
                    let coarse_index = fine
                        .iter()
                        .fold(0usize, |acc, &s| (acc << depth) | (s >> shift) as usize);
                    masses[coarse_index]
                })
                .collect();
            logsumexp(&terms)
        })
        .collect();

    // Each coarse suffix appears in 2^((n-i)h) fine suffixes.
    let depth_totals: Vec<f64> = per_depth
        .iter()
        .map(|(depth, masses, _)| {
            logsumexp(masses) + (f64::from(n - depth) * horizon as f64) * std::f64::consts::LN_2
        })
        .collect();
    let grand = logsumexp(&depth_totals);
    let depth_shares = per_depth
        .iter()
        .zip(&depth_totals)
        .map(|((depth, _, _), total)| (*depth, (total - grand).exp()))
        .collect();

    let finest_lengths = per_depth
        .into_iter()
        .find(|(d, _, _)| *d == n)
        .map(|(_, _, l)| l)
        .unwrap_or_default();
    let distribution =
        SuffixDistribution::from_log_masses(horizon, fine_alphabet, &fine_masses, finest_lengths)?;
    Ok(PartitionMixture {
        distribution,
        depth_shares,
    })
}
