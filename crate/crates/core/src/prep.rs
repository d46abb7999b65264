//! Reversible preprocessing: seasonal removal, smoothing, differencing.
//!
//! A [`PreprocessPlan`] is fitted on a history, producing a [`FittedPlan`]
//! that remembers what each step needs to map forecasts back to original
//! units. Smoothing has no inverse and passes forecasts through unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "lowercase")]
pub enum PreprocessStep {
    Seasonal { period: usize },
    Smooth,
    Difference,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessPlan {
    pub steps: Vec<PreprocessStep>,
}

impl PreprocessPlan {
    pub fn new(steps: Vec<PreprocessStep>) -> Result<Self> {
        for step in &steps {
            if let PreprocessStep::Seasonal { period } = step {
                if *period < 2 {
                    return Err(Error::Config(format!(
                        "seasonal period {period} must be at least 2"
                    )));
                }
            }
        }
        Ok(Self { steps })
    }

    /// Seasonal removal with a 132-step cycle, smoothing, then differencing.
    pub fn monthly_solar_cycle() -> Self {
        Self {
            steps: vec![
                PreprocessStep::Seasonal { period: 132 },
                PreprocessStep::Smooth,
                PreprocessStep::Difference,
            ],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum FittedStep {
    Seasonal {
        component: Vec<f64>,
        fitted_len: usize,
    },
    Smooth,
    Difference {
        anchor: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedPlan {
    steps: Vec<FittedStep>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalDecomposition {
    pub deseasonalized: Vec<f64>,
    /// One value per phase `t mod period`; sums to zero.
    pub seasonal: Vec<f64>,
}

/// Classical additive decomposition: centered moving-average trend, per-phase
/// means of the detrended series, centered to zero mean.
pub fn seasonal_decompose(series: &[f64], period: usize) -> Result<SeasonalDecomposition> {
    if period < 2 {
        return Err(Error::InvalidInput(format!(
            "seasonal period {period} must be at least 2"
        )));
    }
    if series.len() < 2 * period {
        return Err(Error::InvalidInput(format!(
            "seasonal decomposition with period {period} needs at least {} values, got {}",
            2 * period,
            series.len()
        )));
    }
    let half = period / 2;
    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for t in half..series.len() - half {
        let trend = if period % 2 == 1 {
            series[t - half..=t + half].iter().sum::<f64>() / period as f64
        } else {
            // 2×p moving average: half weight on the two end points.
            let inner: f64 = series[t - half + 1..t + half].iter().sum();
            (inner + 0.5 * (series[t - half] + series[t + half])) / period as f64
        };
        sums[t % period] += series[t] - trend;
        counts[t % period] += 1;
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let center = means.iter().sum::<f64>() / period as f64;
    let seasonal: Vec<f64> = means.iter().map(|m| m - center).collect();
    let deseasonalized = series
        .iter()
        .enumerate()
        .map(|(t, x)| x - seasonal[t % period])
        .collect();
    Ok(SeasonalDecomposition {
        deseasonalized,
        seasonal,
    })
}

/// `x*_t = (2x_t + x_{t-1} + x_{t-2}) / 4`; the first two values are copied.
pub fn smooth(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "smoothing needs at least 3 values, got {}",
            series.len()
        )));
    }
    let mut out = series[..2].to_vec();
    out.extend(series.windows(3).map(|w| (2.0 * w[2] + w[1] + w[0]) / 4.0));
    Ok(out)
}

pub fn difference(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "differencing needs at least 2 values, got {}",
            series.len()
        )));
    }
    Ok(series.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Running sum of `diffs` starting from `anchor` (the anchor itself is not
/// included in the output).
pub fn undifference(diffs: &[f64], anchor: f64) -> Vec<f64> {
    diffs
        .iter()
        .scan(anchor, |level, d| {
            *level += d;
            Some(*level)
        })
        .collect()
}

/// Applies `plan` to `series`, returning the transformed series and the state
/// needed to invert forecasts.
pub fn apply_plan(series: &[f64], plan: &PreprocessPlan) -> Result<(Vec<f64>, FittedPlan)> {
    let mut current = series.to_vec();
    let mut fitted = Vec::with_capacity(plan.steps.len());
    for step in &plan.steps {
        match *step {
            PreprocessStep::Seasonal { period } => {
                let d = seasonal_decompose(&current, period)?;
                fitted.push(FittedStep::Seasonal {
                    component: d.seasonal,
                    fitted_len: current.len(),
                });
                current = d.deseasonalized;
            }
            PreprocessStep::Smooth => {
                current = smooth(&current)?;
                fitted.push(FittedStep::Smooth);
            }
            PreprocessStep::Difference => {
                let anchor = *current.last().ok_or_else(|| {
                    Error::InvalidInput("cannot difference an empty series".into())
                })?;
                current = difference(&current)?;
                fitted.push(FittedStep::Difference { anchor });
            }
        }
    }
    Ok((current, FittedPlan { steps: fitted }))
}

/// Maps forecasts of the transformed series (the steps immediately after the
/// fitted history) back to original units.
pub fn invert_plan(forecast: &[f64], plan: &FittedPlan) -> Vec<f64> {
    let mut current = forecast.to_vec();
    for step in plan.steps.iter().rev() {
        match step {
            FittedStep::Seasonal {
                component,
                fitted_len,
            } => {
                let p = component.len();
                for (j, v) in current.iter_mut().enumerate() {
                    *v += component[(fitted_len + j) % p];
                }
            }
            FittedStep::Smooth => {}
            FittedStep::Difference { anchor } => current = undifference(&current, *anchor),
        }
    }
    current
}

/// Re-adds the fitted components to a transformed training series, for
/// steps that are exactly invertible. Fails if the plan contains smoothing.
pub fn reconstruct(transformed: &[f64], plan: &FittedPlan) -> Result<Vec<f64>> {
    let mut current = transformed.to_vec();
    for step in plan.steps.iter().rev() {
        match step {
            FittedStep::Seasonal {
                component,
                fitted_len,
            } => {
                if current.len() != *fitted_len {
                    return Err(Error::InvalidInput(format!(
                        "series of length {} does not match fitted length {fitted_len}",
                        current.len()
                    )));
                }
                let p = component.len();
                for (t, v) in current.iter_mut().enumerate() {
                    *v += component[t % p];
                }
            }
            FittedStep::Smooth => {
                return Err(Error::InvalidInput("smoothing cannot be inverted".into()))
            }
            FittedStep::Difference { anchor } => {
                // The anchor is the last value; walk backwards.
                let mut out = vec![0.0; current.len() + 1];
                out[current.len()] = *anchor;
                for i in (0..current.len()).rev() {
                    out[i] = out[i + 1] - current[i];
                }
                current = out;
            }
        }
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn sinusoid_is_removed() {
        for period in [4usize, 7, 12] {
            let amp = 3.0;
            let series: Vec<f64> = (0..period * 4)
                .map(|t| amp * (2.0 * PI * t as f64 / period as f64).sin())
                .collect();
            let d = seasonal_decompose(&series, period).unwrap();
            let worst = d.deseasonalized.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(worst < 0.05 * amp, "period {period}: {worst}");
        }
    }

    #[test]
    fn constant_series_has_no_seasonality() {
        let d = seasonal_decompose(&[2.5; 30], 6).unwrap();
        assert!(d.seasonal.iter().all(|s| s.abs() < 1e-15));
        assert_eq!(d.deseasonalized, vec![2.5; 30]);
    }

    #[test]
    fn seasonal_component_is_centered() {
        let series: Vec<f64> = (0..50)
            .map(|t| (t % 5) as f64 * 1.7 + 0.1 * t as f64)
            .collect();
        let d = seasonal_decompose(&series, 5).unwrap();
        assert!(d.seasonal.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn short_series_rejected() {
        assert!(seasonal_decompose(&[1.0; 23], 12).is_err());
        assert!(smooth(&[1.0, 2.0]).is_err());
        assert!(difference(&[1.0]).is_err());
        assert!(difference(&[]).is_err());
    }

    #[test]
    fn smoothing_cases() {
        assert_eq!(smooth(&[1.0; 4]).unwrap(), vec![1.0; 4]);
        assert_eq!(smooth(&[2.0, 2.0, 4.0]).unwrap()[2], 3.0);
        let alternating: Vec<f64> = (0..40).map(|t| (t % 2) as f64).collect();
        let s = smooth(&alternating).unwrap();
        let worst = s[2..].iter().fold(0.0f64, |m, v| m.max((v - 0.5).abs()));
        assert_eq!(worst, 0.25);
    }

    #[test]
    fn differencing_cases() {
        assert_eq!(difference(&[1.0, 3.0, 6.0]).unwrap(), vec![2.0, 3.0]);
        assert_eq!(undifference(&[2.0, 3.0], 1.0), vec![3.0, 6.0]);
        assert_eq!(difference(&[4.0; 5]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn empty_plan_is_identity() {
        let (out, fitted) = apply_plan(&[1.0, 2.0, 3.0], &PreprocessPlan::default()).unwrap();
        assert_eq!(out, vec![1.0, 2.0, 3.0]);
        assert_eq!(invert_plan(&[4.0, 5.0], &fitted), vec![4.0, 5.0]);
    }

    #[test]
    fn difference_plan_inverts_from_last_value() {
        let plan = PreprocessPlan::new(vec![PreprocessStep::Difference]).unwrap();
        let (_, fitted) = apply_plan(&[3.0, 7.0, 10.0], &plan).unwrap();
        assert_eq!(invert_plan(&[1.0, 1.0], &fitted), vec![11.0, 12.0]);
    }

    #[test]
    fn seasonal_inversion_uses_future_phase() {
        let pattern = [5.0, -1.0, 0.0, -4.0];
        let series: Vec<f64> = (0..24).map(|t| pattern[t % 4]).collect();
        let plan = PreprocessPlan::new(vec![PreprocessStep::Seasonal { period: 4 }]).unwrap();
        let (out, fitted) = apply_plan(&series, &plan).unwrap();
        let level = out[0];
        // A flat transformed forecast comes back with the pattern in phase.
        let back = invert_plan(&[level; 6], &fitted);
        for (j, v) in back.iter().enumerate() {
            assert!((v - pattern[(24 + j) % 4]).abs() < 1e-12);
        }
    }

    #[test]
    fn plan_rejects_bad_period() {
        assert!(PreprocessPlan::new(vec![PreprocessStep::Seasonal { period: 1 }]).is_err());
    }

    #[test]
    fn plan_parses_from_toml() {
        #[derive(Deserialize)]
        struct Wrapper {
            steps: Vec<PreprocessStep>,
        }
        let w: Wrapper = toml::from_str(
            r#"steps = [{ step = "seasonal", period = 132 }, { step = "smooth" }, { step = "difference" }]"#,
        )
        .unwrap();
        assert_eq!(w.steps, PreprocessPlan::monthly_solar_cycle().steps);
    }

    proptest! {
        #[test]
        fn difference_roundtrip(series in prop::collection::vec(-1e3f64..1e3, 2..60)) {
            let back = undifference(&difference(&series).unwrap(), series[0]);
            for (a, b) in back.iter().zip(&series[1..]) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn seasonal_and_difference_reconstruct(
            series in prop::collection::vec(-50.0f64..50.0, 30..80),
            period in 2usize..=12,
        ) {
            let plan = PreprocessPlan::new(vec![
                PreprocessStep::Seasonal { period },
                PreprocessStep::Difference,
            ]).unwrap();
            let (out, fitted) = apply_plan(&series, &plan).unwrap();
            let back = reconstruct(&out, &fitted).unwrap();
            prop_assert_eq!(back.len(), series.len());
            for (a, b) in back.iter().zip(&series) {
                prop_assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()) * 64.0);
            }
        }
    }
}
