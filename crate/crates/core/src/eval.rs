//! Rolling-origin backtests, MAE tables and baseline comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::forecast::{forecast, ForecastRequest};

/// Horizon windows reported alongside per-step MAE.
pub const DEFAULT_WINDOWS: [usize; 4] = [4, 8, 18, 24];

pub fn mae(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} actuals",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::InvalidInput("MAE of an empty sample".into()));
    }
    let total: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a).abs())
        .sum();
    Ok(total / predicted.len() as f64)
}

/// A forecasting method under evaluation.
#[derive(Debug, Clone)]
pub enum Method {
    /// Compression forecaster; `history` in the template is replaced per origin.
    Compression {
        name: String,
        template: ForecastRequest,
    },
    /// Repeats the last observed value.
    LastValue,
}

impl Method {
    pub fn name(&self) -> &str {
        match self {
            Method::Compression { name, .. } => name,
            Method::LastValue => "last-value",
        }
    }

    fn predict(&self, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
        match self {
            Method::Compression { template, .. } => {
                let mut req = template.clone();
                req.history = history.to_vec();
                req.horizon = horizon;
                Ok(forecast(&req)?.values)
            }
            Method::LastValue => {
                let last = *history
                    .last()
                    .ok_or_else(|| Error::InvalidInput("empty history".into()))?;
                Ok(vec![last; horizon])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowAverage {
    pub from: usize,
    pub to: usize,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeRow {
    pub name: String,
    pub mae_by_horizon: Vec<f64>,
    pub mae_ranges: Vec<WindowAverage>,
}

impl MaeRow {
    fn from_errors(name: &str, abs_errors: &[Vec<f64>], horizon: usize) -> Self {
        let mae_by_horizon: Vec<f64> = (0..horizon)
            .map(|j| abs_errors.iter().map(|e| e[j]).sum::<f64>() / abs_errors.len() as f64)
            .collect();
        let mae_ranges = window_averages(&mae_by_horizon);
        Self {
            name: name.to_string(),
            mae_by_horizon,
            mae_ranges,
        }
    }
}

/// Averages of per-horizon MAE over `1..=w` for each standard window that
/// fits, plus the full horizon.
pub fn window_averages(mae_by_horizon: &[f64]) -> Vec<WindowAverage> {
    let h = mae_by_horizon.len();
    let mut ends: Vec<usize> = DEFAULT_WINDOWS
        .iter()
        .copied()
        .filter(|&w| w <= h)
        .collect();
    if !ends.contains(&h) {
        ends.push(h);
    }
    ends.into_iter()
        .map(|to| WindowAverage {
            from: 1,
            to,
            mae: mae_by_horizon[..to].iter().sum::<f64>() / to as f64,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    #[serde(flatten)]
    pub row: MaeRow,
    /// Forecasts per origin, in origin order.
    pub forecasts: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub horizon: usize,
    pub origins: Vec<usize>,
    pub actuals: Vec<Vec<f64>>,
    pub methods: Vec<MethodResult>,
}

/// Forecasts `horizon` steps from every origin (history = `series[..origin]`)
/// with each method and tabulates MAE by horizon.
pub fn backtest(
    series: &[f64],
    methods: &[Method],
    horizon: usize,
    origins: &[usize],
) -> Result<BacktestReport> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    if methods.is_empty() || origins.is_empty() {
        return Err(Error::Config(
            "backtest needs at least one method and one origin".into(),
        ));
    }
    for &o in origins {
        if o == 0 {
            return Err(Error::InfeasibleOrigin {
                origin: o,
                reason: "no history before origin".into(),
            });
        }
        if o + horizon > series.len() {
            return Err(Error::InfeasibleOrigin {
                origin: o,
                reason: format!(
                    "needs {horizon} actuals but only {} follow",
                    series.len().saturating_sub(o)
                ),
            });
        }
    }
    let actuals: Vec<Vec<f64>> = origins
        .iter()
        .map(|&o| series[o..o + horizon].to_vec())
        .collect();

    let mut results = Vec::with_capacity(methods.len());
    for method in methods {
        let forecasts = origins
            .par_iter()
            .map(|&o| {
                method.predict(&series[..o], horizon).map_err(|e| match e {
                    Error::EnumerationTooLarge { .. } | Error::Config(_) => e,
                    other => Error::InfeasibleOrigin {
                        origin: o,
                        reason: other.to_string(),
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let errors: Vec<Vec<f64>> = forecasts
            .iter()
            .zip(&actuals)
            .map(|(f, a)| f.iter().zip(a).map(|(p, x)| (p - x).abs()).collect())
            .collect();
        results.push(MethodResult {
            row: MaeRow::from_errors(method.name(), &errors, horizon),
            forecasts,
        });
    }
    Ok(BacktestReport {
        horizon,
        origins: origins.to_vec(),
        actuals,
        methods: results,
    })
}

/// Externally produced forecasts keyed by `(origin, step)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BaselineForecasts {
    pub name: String,
    pub cells: BTreeMap<(usize, usize), f64>,
}

impl BaselineForecasts {
    /// Reads `origin,step,value` rows (header required, steps 1-based).
    pub fn load(path: &Path, name: &str) -> Result<Self> {
        let display = path.display().to_string();
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Csv {
            path: display.clone(),
            line: 0,
            reason: e.to_string(),
        })?;
        let headers = reader
            .headers()
            .map_err(|e| Error::Csv {
                path: display.clone(),
                line: 1,
                reason: e.to_string(),
            })?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::MissingColumn {
                    path: display.clone(),
                    column: name.into(),
                })
        };
        let (oc, sc, vc) = (col("origin")?, col("step")?, col("value")?);
        let mut cells = BTreeMap::new();
        for (i, record) in reader.records().enumerate() {
            let line = i as u64 + 2;
            let bad = |reason: String| Error::Csv {
                path: display.clone(),
                line,
                reason,
            };
            let record = record.map_err(|e| bad(e.to_string()))?;
            let field = |c: usize| record.get(c).unwrap_or("").trim().to_string();
            let origin = field(oc)
                .parse::<usize>()
                .map_err(|e| bad(format!("origin: {e}")))?;
            let step = field(sc)
                .parse::<usize>()
                .map_err(|e| bad(format!("step: {e}")))?;
            let value = field(vc)
                .parse::<f64>()
                .map_err(|e| bad(format!("value: {e}")))?;
            if !value.is_finite() {
                return Err(bad(format!("value {value} is not finite")));
            }
            cells.insert((origin, step), value);
        }
        if cells.is_empty() {
            return Err(Error::EmptyFile { path: display });
        }
        Ok(Self {
            name: name.to_string(),
            cells,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub horizon: usize,
    /// Baseline row first, then one row per backtested method.
    pub rows: Vec<MaeRow>,
    /// Method MAE minus baseline MAE, per method.
    pub differences: Vec<MaeRow>,
}

/// Scores the baseline on the report's origins and sets it beside each
/// method.
pub fn compare(report: &BacktestReport, baseline: &BaselineForecasts) -> Result<Comparison> {
    let h = report.horizon;
    let missing: Vec<String> = report
        .origins
        .iter()
        .flat_map(|&o| (1..=h).map(move |j| (o, j)))
        .filter(|cell| !baseline.cells.contains_key(cell))
        .map(|(o, j)| format!("({o},{j})"))
        .collect();
    if !missing.is_empty() {
        let shown = missing
            .iter()
            .take(20)
            .cloned()
            .collect::<Vec<_>>()
            .join(" ");
        let more = if missing.len() > 20 {
            format!(" and {} more", missing.len() - 20)
        } else {
            String::new()
        };
        return Err(Error::Coverage(format!("{shown}{more}")));
    }
    let errors: Vec<Vec<f64>> = report
        .origins
        .iter()
        .zip(&report.actuals)
        .map(|(&o, actual)| {
            (1..=h)
                .map(|j| (baseline.cells[&(o, j)] - actual[j - 1]).abs())
                .collect()
        })
        .collect();
    let base_row = MaeRow::from_errors(&baseline.name, &errors, h);
    let differences = report
        .methods
        .iter()
        .map(|m| {
            let by_h: Vec<f64> = m
                .row
                .mae_by_horizon
                .iter()
                .zip(&base_row.mae_by_horizon)
                .map(|(a, b)| a - b)
                .collect();
            let ranges = m
                .row
                .mae_ranges
                .iter()
                .zip(&base_row.mae_ranges)
                .map(|(a, b)| WindowAverage {
                    from: a.from,
                    to: a.to,
                    mae: a.mae - b.mae,
                })
                .collect();
            MaeRow {
                name: format!("{} - {}", m.row.name, baseline.name),
                mae_by_horizon: by_h,
                mae_ranges: ranges,
            }
        })
        .collect();
    let mut rows = vec![base_row];
    rows.extend(report.methods.iter().map(|m| m.row.clone()));
    Ok(Comparison {
        horizon: h,
        rows,
        differences,
    })
}

/// Aligned text table: one row per method, one column per horizon step and
/// per window average.
pub fn render_table(rows: &[MaeRow], decimals: usize) -> String {
    let Some(first) = rows.first() else {
        return String::new();
    };
    let mut header = vec!["method".to_string()];
    header.extend((1..=first.mae_by_horizon.len()).map(|j| j.to_string()));
    header.extend(
        first
            .mae_ranges
            .iter()
            .map(|w| format!("avg {}-{}", w.from, w.to)),
    );
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.name.clone()];
            cells.extend(r.mae_by_horizon.iter().map(|v| fixed(*v, decimals)));
            cells.extend(r.mae_ranges.iter().map(|w| fixed(w.mae, decimals)));
            cells
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            std::iter::once(&header)
                .chain(&body)
                .map(|row| row.get(c).map_or(0, String::len))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in std::iter::once(&header).chain(&body) {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                if c == 0 {
                    format!("{cell:<w$}", w = widths[c])
                } else {
                    format!("{cell:>w$}", w = widths[c])
                }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

fn fixed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    // Avoid "-0.00".
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

/// Canonical JSON: object keys sorted, floats printed with `decimals` fixed
/// places, no insignificant whitespace variation.
pub fn canonical_json<T: Serialize>(value: &T, decimals: usize) -> Result<String> {
    let v = serde_json::to_value(value)
        .map_err(|e| Error::Invariant(format!("report not serializable: {e}")))?;
    let mut out = String::new();
    write_canonical(&v, decimals, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn write_canonical(v: &Value, decimals: usize, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&fixed(n.as_f64().unwrap_or(0.0), decimals));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.iter().all(|i| !i.is_object() && !i.is_array()) {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_canonical(item, decimals, indent, out);
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for (k, item) in items.iter().enumerate() {
                    out.push_str(&pad(indent + 1));
                    write_canonical(item, decimals, indent + 1, out);
                    if k + 1 < items.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                out.push_str(&pad(indent));
                out.push(']');
            }
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (k, key) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push_str(": ");
                write_canonical(&map[*key], decimals, indent + 1, out);
                if k + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 4.0]).unwrap(), 1.0);
        assert_eq!(mae(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0], &[-3.0]).unwrap(), 3.0);
        assert!(mae(&[], &[]).is_err());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn window_averages_are_means_of_members() {
        let by_h: Vec<f64> = (1..=10).map(f64::from).collect();
        let w = window_averages(&by_h);
        assert_eq!(w.iter().map(|w| w.to).collect::<Vec<_>>(), vec![4, 8, 10]);
        assert!((w[0].mae - 2.5).abs() < 1e-12);
        assert!((w[2].mae - 5.5).abs() < 1e-12);
    }

    #[test]
    fn single_origin_single_step() {
        let series = [1.0, 2.0, 3.0, 4.0];
        let r = backtest(&series, &[Method::LastValue], 1, &[3]).unwrap();
        assert_eq!(r.methods.len(), 1);
        assert_eq!(r.methods[0].forecasts, vec![vec![3.0]]);
        assert_eq!(r.methods[0].row.mae_by_horizon, vec![1.0]);
    }

    #[test]
    fn infeasible_origin_named() {
        let series = [1.0, 2.0, 3.0];
        match backtest(&series, &[Method::LastValue], 2, &[2]) {
            Err(Error::InfeasibleOrigin { origin: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            backtest(&series, &[Method::LastValue], 1, &[0]),
            Err(Error::InfeasibleOrigin { origin: 0, .. })
        ));
    }

    fn baseline_from(
        report: &BacktestReport,
        f: impl Fn(usize, usize) -> f64,
    ) -> BaselineForecasts {
        let mut cells = BTreeMap::new();
        for (k, &o) in report.origins.iter().enumerate() {
            for j in 1..=report.horizon {
                cells.insert((o, j), f(k, j));
            }
        }
        BaselineForecasts {
            name: "baseline".into(),
            cells,
        }
    }

    #[test]
    fn compare_cases() {
        let series: Vec<f64> = (0..30).map(|t| ((t * 7) % 5) as f64).collect();
        let r = backtest(&series, &[Method::LastValue], 3, &[10, 15, 20]).unwrap();

        let same = baseline_from(&r, |k, j| r.methods[0].forecasts[k][j - 1]);
        let c = compare(&r, &same).unwrap();
        assert!(c.differences[0].mae_by_horizon.iter().all(|d| *d == 0.0));

        let perfect = baseline_from(&r, |k, j| r.actuals[k][j - 1]);
        let c = compare(&r, &perfect).unwrap();
        assert!(c.rows[0].mae_by_horizon.iter().all(|d| *d == 0.0));

        let e = [0.5, 1.25, 2.0];
        let shifted = baseline_from(&r, |k, j| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            r.actuals[k][j - 1] + sign * e[j - 1]
        });
        let c = compare(&r, &shifted).unwrap();
        assert_eq!(c.rows[0].mae_by_horizon, e.to_vec());

        let mut partial = perfect.clone();
        partial.cells.remove(&(15, 2));
        match compare(&r, &partial) {
            Err(Error::Coverage(msg)) => assert_eq!(msg, "(15,2)"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn canonical_json_sorts_and_fixes_decimals() {
        #[derive(Serialize)]
        struct S {
            zeta: f64,
            alpha: Vec<f64>,
            count: usize,
        }
        let s = S {
            zeta: 1.0 / 3.0,
            alpha: vec![2.0, -0.00001],
            count: 7,
        };
        let text = canonical_json(&s, 4).unwrap();
        assert_eq!(
            text,
            "{\n  \"alpha\": [2.0000, 0.0000],\n  \"count\": 7,\n  \"zeta\": 0.3333\n}\n"
        );
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["count"], 7);
    }

    #[test]
    fn table_has_one_line_per_row() {
        let row = MaeRow {
            name: "ppm".into(),
            mae_by_horizon: vec![0.5, 1.0],
            mae_ranges: window_averages(&[0.5, 1.0]),
        };
        let t = render_table(&[row.clone(), row], 2);
        assert_eq!(t.lines().count(), 3);
        assert!(t.lines().next().unwrap().contains("avg 1-2"));
    }

    proptest! {
        #[test]
        fn mae_translation_and_scale(
            pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..40),
            shift in -50.0f64..50.0,
            scale in 0.01f64..20.0,
        ) {
            let (p, a): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let base = mae(&p, &a).unwrap();
            let ps: Vec<f64> = p.iter().map(|v| v + shift).collect();
            let as_: Vec<f64> = a.iter().map(|v| v + shift).collect();
            prop_assert!((mae(&ps, &as_).unwrap() - base).abs() < 1e-9);
            let pk: Vec<f64> = p.iter().map(|v| v * scale).collect();
            let ak: Vec<f64> = a.iter().map(|v| v * scale).collect();
            prop_assert!((mae(&pk, &ak).unwrap() - scale * base).abs() < 1e-9 * (1.0 + scale * base));
        }
    }
}
