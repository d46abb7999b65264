//! Horizon forecasting: interleaved splitting, per-step marginals and point
//! values.
//!
//! A forecast of `h` steps is split across `s` residue-class subseries so that
//! each subseries only enumerates about `h/s` future symbols. Subseries `r`
//! holds the elements at 0-based indices `r, r+s, r+2s, ...`, and future index
//! `len + j - 1` belongs to subseries `(len + j - 1) mod s`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::CodeLengthModel;
use crate::error::{Error, Result};
use crate::prep::{apply_plan, invert_plan, PreprocessPlan};
use crate::prob::{MixtureWeights, SuffixDistribution, DEFAULT_ENUMERATION_CAP};
use crate::quant::{dequantize, partition_mixture_detailed, PartitionScheme, DEFAULT_MAX_DEPTH};

#[derive(Clone)]
pub struct ForecastRequest {
    pub history: Vec<f64>,
    pub horizon: usize,
    pub split: usize,
    pub max_depth: u32,
    pub depth_weights: MixtureWeights,
    /// Fixed `[m, M]`, applied to every subseries in the transformed domain.
    /// When absent each subseries fits its own interval.
    pub interval: Option<(f64, f64)>,
    pub backends: Vec<Arc<dyn CodeLengthModel>>,
    pub weights: MixtureWeights,
    pub plan: PreprocessPlan,
    pub round: bool,
    pub cap: usize,
}

impl std::fmt::Debug for ForecastRequest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let ids: Vec<&str> = self.backends.iter().map(|b| b.id()).collect();
        f.debug_struct("ForecastRequest")
            .field("history_len", &self.history.len())
            .field("horizon", &self.horizon)
            .field("split", &self.split)
            .field("max_depth", &self.max_depth)
            .field("backends", &ids)
            .field("plan", &self.plan)
            .finish()
    }
}

impl ForecastRequest {
    /// Request with uniform weights, depth 4, no splitting and no
    /// preprocessing.
    pub fn new(history: Vec<f64>, horizon: usize, backends: Vec<Arc<dyn CodeLengthModel>>) -> Self {
        let k = backends.len().max(1);
        Self {
            history,
            horizon,
            split: 1,
            max_depth: DEFAULT_MAX_DEPTH,
            depth_weights: MixtureWeights::uniform(DEFAULT_MAX_DEPTH as usize),
            interval: None,
            weights: MixtureWeights::uniform(k),
            backends,
            plan: PreprocessPlan::default(),
            round: false,
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }

    pub fn with_depth(mut self, max_depth: u32) -> Self {
        self.max_depth = max_depth;
        self.depth_weights = MixtureWeights::uniform(max_depth.max(1) as usize);
        self
    }

    pub fn with_split(mut self, split: usize) -> Self {
        self.split = split;
        self
    }

    pub fn with_plan(mut self, plan: PreprocessPlan) -> Self {
        self.plan = plan;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.split == 0 {
            return Err(Error::Config("split factor must be at least 1".into()));
        }
        if self.backends.is_empty() {
            return Err(Error::Config("at least one backend is required".into()));
        }
        if self.backends.len() != self.weights.len() {
            return Err(Error::Config(format!(
                "{} backends but {} weights",
                self.backends.len(),
                self.weights.len()
            )));
        }
        if self.depth_weights.len() != self.max_depth as usize {
            return Err(Error::Config(format!(
                "{} depth weights for depth {}",
                self.depth_weights.len(),
                self.max_depth
            )));
        }
        if self.history.is_empty() {
            return Err(Error::InvalidInput("history is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubseriesSummary {
    pub residue: usize,
    pub history_len: usize,
    pub horizon: usize,
    pub lower: f64,
    pub upper: f64,
    pub top_suffix: Vec<u32>,
    pub top_probability: f64,
    pub depth_shares: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointForecast {
    pub values: Vec<f64>,
    /// Finest-partition distribution of each future step, in the
    /// preprocessed domain.
    pub per_step_distributions: Vec<Vec<f64>>,
    pub subseries: Vec<SubseriesSummary>,
}

/// Residue-class subseries: subseries `r` holds indices `r, r+s, r+2s, ...`.
pub fn interleave_split<T: Clone>(series: &[T], s: usize) -> Result<Vec<Vec<T>>> {
    if s == 0 {
        return Err(Error::Config("split factor must be at least 1".into()));
    }
    if s > series.len() {
        return Err(Error::InvalidInput(format!(
            "cannot split {} values into {s} subseries",
            series.len()
        )));
    }
    Ok((0..s)
        .map(|r| series.iter().skip(r).step_by(s).cloned().collect())
        .collect())
}

/// Number of the `h` future steps owned by each subseries.
pub fn subseries_horizons(original_len: usize, s: usize, h: usize) -> Vec<usize> {
    let mut counts = vec![0; s];
    for j in 0..h {
        counts[(original_len + j) % s] += 1;
    }
    counts
}

/// Reassembles per-subseries forecasts into the `h` future positions.
pub fn interleave_merge<T: Clone>(
    subforecasts: &[Vec<T>],
    original_len: usize,
    h: usize,
) -> Result<Vec<T>> {
    let s = subforecasts.len();
    if s == 0 {
        return Err(Error::InvalidInput("no subforecasts to merge".into()));
    }
    let expected = subseries_horizons(original_len, s, h);
    for (r, (sub, &want)) in subforecasts.iter().zip(&expected).enumerate() {
        if sub.len() != want {
            return Err(Error::InvalidInput(format!(
                "subforecast {r} has {} values, {want} expected",
                sub.len()
            )));
        }
    }
    let mut cursors = vec![0usize; s];
    Ok((0..h)
        .map(|j| {
            let r = (original_len + j) % s;
            let v = subforecasts[r][cursors[r]].clone();
            cursors[r] += 1;
            v
        })
        .collect())
}

/// Distribution of the symbol `step` positions ahead (1-based).
pub fn marginal_step(dist: &SuffixDistribution, step: usize) -> Result<Vec<f64>> {
    dist.marginal(step)
}

/// Expected subinterval midpoint under `marginal` at the scheme's finest depth.
pub fn point_from_marginal(marginal: &[f64], scheme: &PartitionScheme) -> Result<f64> {
    let n = scheme.max_depth();
    if marginal.len() != 1usize << n {
        return Err(Error::InvalidInput(format!(
            "marginal over {} symbols, finest partition has {}",
            marginal.len(),
            1usize << n
        )));
    }
    marginal
        .iter()
        .enumerate()
        .map(|(j, &p)| Ok(p * dequantize(j as u32, scheme, n)?))
        .sum()
}

struct SubseriesForecast {
    values: Vec<f64>,
    distributions: Vec<Vec<f64>>,
    summary: SubseriesSummary,
}

fn forecast_subseries(
    req: &ForecastRequest,
    residue: usize,
    history: &[f64],
    horizon: usize,
) -> Result<SubseriesForecast> {
    let scheme = match req.interval {
        Some((lo, hi)) => PartitionScheme::new(lo, hi, req.max_depth, req.depth_weights.clone())?,
        None => PartitionScheme::fit(history, req.max_depth, req.depth_weights.clone())?,
    };
    let mixture = partition_mixture_detailed(
        history,
        horizon,
        &scheme,
        &req.backends,
        &req.weights,
        req.cap,
    )?;
    let dist = &mixture.distribution;
    let distributions = (1..=horizon)
        .map(|i| marginal_step(dist, i))
        .collect::<Result<Vec<_>>>()?;
    let values = distributions
        .iter()
        .map(|m| point_from_marginal(m, &scheme))
        .collect::<Result<Vec<_>>>()?;
    let (top_suffix, top_probability) = dist.top_suffix();
    Ok(SubseriesForecast {
        values,
        distributions,
        summary: SubseriesSummary {
            residue,
            history_len: history.len(),
            horizon,
            lower: scheme.lower(),
            upper: scheme.upper(),
            top_suffix,
            top_probability,
            depth_shares: mixture.depth_shares,
        },
    })
}

/// Preprocess, split, forecast each subseries, merge, and map back to the
/// original units.
pub fn forecast(req: &ForecastRequest) -> Result<PointForecast> {
    req.validate()?;
    let (transformed, fitted) = apply_plan(&req.history, &req.plan)?;
    let subseries = interleave_split(&transformed, req.split)?;
    let horizons = subseries_horizons(transformed.len(), req.split, req.horizon);

    let parts = subseries
        .par_iter()
        .zip(horizons.par_iter())
        .enumerate()
        .map(|(r, (history, &h))| {
            if h == 0 {
                return Ok(None);
            }
            forecast_subseries(req, r, history, h).map(Some)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut value_parts = Vec::with_capacity(parts.len());
    let mut dist_parts = Vec::with_capacity(parts.len());
    let mut summaries = Vec::new();
    for part in parts {
        match part {
            Some(p) => {
                value_parts.push(p.values);
                dist_parts.push(p.distributions);
                summaries.push(p.summary);
            }
            None => {
                value_parts.push(Vec::new());
                dist_parts.push(Vec::new());
            }
        }
    }
    let merged = interleave_merge(&value_parts, transformed.len(), req.horizon)?;
    let per_step_distributions = interleave_merge(&dist_parts, transformed.len(), req.horizon)?;

    let mut values = invert_plan(&merged, &fitted);
    if req.round && req.history.iter().all(|v| v.fract() == 0.0) {
        values.iter_mut().for_each(|v| *v = v.round());
    }
    Ok(PointForecast {
        values,
        per_step_distributions,
        subseries: summaries,
    })
}
