//! Dataset loading and saving, synthetic series, and run configuration.

use std::path::Path;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::codec::BackendSpec;
use crate::error::{Error, Result};
use crate::forecast::ForecastRequest;
use crate::prep::PreprocessPlan;
use crate::prob::{MixtureWeights, DEFAULT_ENUMERATION_CAP};
use crate::quant::DEFAULT_MAX_DEPTH;

/// How timestamp labels are interpreted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Granularity {
    /// Plain integers.
    #[default]
    Index,
    /// `YYYY-MM`, ordinal in months.
    Monthly,
    /// `YYYY-MM-DD HH:MM` (or with `T`), ordinal in hours; slots are 3 hours.
    ThreeHour,
}

impl Granularity {
    fn ordinal(self, label: &str) -> std::result::Result<i64, String> {
        let label = label.trim();
        match self {
            Granularity::Index => label.parse::<i64>().map_err(|e| e.to_string()),
            Granularity::Monthly => {
                let date = NaiveDate::parse_from_str(&format!("{label}-01"), "%Y-%m-%d")
                    .or_else(|_| NaiveDate::parse_from_str(label, "%Y-%m-%d"))
                    .map_err(|e| format!("`{label}`: {e}"))?;
                Ok(i64::from(date.year()) * 12 + i64::from(date.month0()))
            }
            Granularity::ThreeHour => {
                let normalized = label.replacen('T', " ", 1);
                let dt = NaiveDateTime::parse_from_str(&normalized, "%Y-%m-%d %H:%M:%S")
                    .or_else(|_| NaiveDateTime::parse_from_str(&normalized, "%Y-%m-%d %H:%M"))
                    .map_err(|e| format!("`{label}`: {e}"))?;
                if dt.hour() % 3 != 0 || dt.minute() != 0 {
                    return Err(format!("`{label}` is not on a 3-hour slot boundary"));
                }
                Ok(dt.and_utc().timestamp() / 3600)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    /// When absent, rows are numbered from 0.
    pub timestamp_column: Option<String>,
    pub value_column: String,
    pub granularity: Granularity,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            timestamp_column: None,
            value_column: "value".into(),
            granularity: Granularity::Index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDataset {
    pub timestamps: Vec<String>,
    /// Numeric form of each timestamp (months, hours or plain index).
    pub ordinals: Vec<i64>,
    pub values: Vec<f64>,
    pub source: String,
    pub units: String,
}

impl SeriesDataset {
    pub fn from_values(values: Vec<f64>, source: &str) -> Self {
        Self {
            timestamps: (0..values.len()).map(|i| i.to_string()).collect(),
            ordinals: (0..values.len() as i64).collect(),
            values,
            source: source.into(),
            units: String::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_integer_valued(&self) -> bool {
        self.values.iter().all(|v| v.fract() == 0.0)
    }
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<SeriesDataset> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path)?;
    parse_csv(file, &display, schema)
}

pub fn parse_csv<R: std::io::Read>(
    reader: R,
    name: &str,
    schema: &CsvSchema,
) -> Result<SeriesDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let csv_err = |line: u64, reason: String| Error::Csv {
        path: name.to_string(),
        line,
        reason,
    };
    let headers = rdr
        .headers()
        .map_err(|e| csv_err(1, e.to_string()))?
        .clone();
    let find = |col: &str| {
        headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| Error::MissingColumn {
                path: name.to_string(),
                column: col.to_string(),
            })
    };
    let value_col = find(&schema.value_column)?;
    let ts_col = schema.timestamp_column.as_deref().map(find).transpose()?;

    let mut ds = SeriesDataset {
        timestamps: Vec::new(),
        ordinals: Vec::new(),
        values: Vec::new(),
        source: name.to_string(),
        units: String::new(),
    };
    for (i, record) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| csv_err(line, e.to_string()))?;
        let raw = record.get(value_col).unwrap_or("");
        let value: f64 = raw
            .parse()
            .map_err(|_| csv_err(line, format!("unparseable value `{raw}`")))?;
        if !value.is_finite() {
            return Err(csv_err(line, format!("non-finite value `{raw}`")));
        }
        let (label, ordinal) = match ts_col {
            Some(c) => {
                let label = record.get(c).unwrap_or("").to_string();
                let ordinal = schema
                    .granularity
                    .ordinal(&label)
                    .map_err(|e| csv_err(line, format!("bad timestamp {e}")))?;
                (label, ordinal)
            }
            None => (i.to_string(), i as i64),
        };
        if let Some(&prev) = ds.ordinals.last() {
            if ordinal <= prev {
                return Err(Error::NonMonotone {
                    path: name.to_string(),
                    line,
                });
            }
        }
        ds.timestamps.push(label);
        ds.ordinals.push(ordinal);
        ds.values.push(value);
    }
    if ds.values.is_empty() {
        return Err(Error::EmptyFile {
            path: name.to_string(),
        });
    }
    Ok(ds)
}

/// Writes `timestamp,value` rows readable by [`load_csv`] with
/// `timestamp_column = "timestamp"`.
pub fn save_csv(ds: &SeriesDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(["timestamp", "value"]).map_err(io)?;
    for (t, v) in ds.timestamps.iter().zip(&ds.values) {
        w.write_record([t.as_str(), &format!("{v}")]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// `t mod period`.
    Periodic { period: usize },
    /// Symbol chain started in state 0; emits state indices as reals.
    Markov { transition: Vec<Vec<f64>> },
    /// Gaussian increments with standard deviation `sigma`, starting at 0.
    RandomWalk { sigma: f64 },
}

pub fn generate_synthetic(
    kind: &SyntheticKind,
    length: usize,
    seed: Option<u64>,
) -> Result<SeriesDataset> {
    let need_seed =
        || seed.ok_or_else(|| Error::Config("stochastic generator requires a seed".into()));
    let values: Vec<f64> = match kind {
        SyntheticKind::Periodic { period } => {
            if *period == 0 {
                return Err(Error::Config("period must be at least 1".into()));
            }
            (0..length).map(|t| (t % period) as f64).collect()
        }
        SyntheticKind::Markov { transition } => {
            validate_transition(transition)?;
            let mut rng = ChaCha8Rng::seed_from_u64(need_seed()?);
            let mut state = 0usize;
            let mut out = Vec::with_capacity(length);
            for _ in 0..length {
                out.push(state as f64);
                let u: f64 = rng.gen();
                let row = &transition[state];
                let mut acc = 0.0;
                let mut next = row.len() - 1;
                for (j, p) in row.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        next = j;
                        break;
                    }
                }
                state = next;
            }
            out
        }
        SyntheticKind::RandomWalk { sigma } => {
            let normal = Normal::new(0.0, *sigma)
                .map_err(|e| Error::Config(format!("random walk sigma {sigma}: {e}")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(need_seed()?);
            let mut level = 0.0;
            (0..length)
                .map(|_| {
                    let v = level;
                    level += normal.sample(&mut rng);
                    v
                })
                .collect()
        }
    };
    let name = match kind {
        SyntheticKind::Periodic { .. } => "synthetic-periodic",
        SyntheticKind::Markov { .. } => "synthetic-markov",
        SyntheticKind::RandomWalk { .. } => "synthetic-random-walk",
    };
    Ok(SeriesDataset::from_values(values, name))
}

fn validate_transition(m: &[Vec<f64>]) -> Result<()> {
    if m.is_empty() {
        return Err(Error::Config("transition matrix is empty".into()));
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != m.len() {
            return Err(Error::Config(format!(
                "transition row {i} has {} entries, {} expected",
                row.len(),
                m.len()
            )));
        }
        if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Config(format!(
                "transition row {i} has a negative entry"
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("transition row {i} sums to {sum}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSection {
    pub horizon: usize,
    pub split: usize,
    pub depth: u32,
    pub depth_weights: Option<Vec<f64>>,
    pub interval: Option<[f64; 2]>,
    pub round: bool,
    pub cap: usize,
}

impl Default for ForecastSection {
    fn default() -> Self {
        Self {
            horizon: 1,
            split: 1,
            depth: DEFAULT_MAX_DEPTH,
            depth_weights: None,
            interval: None,
            round: false,
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    pub names: Vec<BackendSpec>,
    pub weights: Option<Vec<f64>>,
}

impl Default for BackendSection {
    fn default() -> Self {
        Self {
            names: BackendSpec::all_defaults(),
            weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestSection {
    /// Explicit origins; overrides the range below.
    pub origins: Option<Vec<usize>>,
    pub first_origin: Option<usize>,
    pub last_origin: Option<usize>,
    pub origin_step: usize,
    /// Add one row per single backend next to the mixture.
    pub each_backend: bool,
    pub last_value_baseline: bool,
}

impl Default for BacktestSection {
    fn default() -> Self {
        Self {
            origins: None,
            first_origin: None,
            last_origin: None,
            origin_step: 1,
            each_backend: false,
            last_value_baseline: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub decimals: usize,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self { decimals: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSection {
    #[serde(flatten)]
    pub kind: SyntheticKind,
    pub length: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub forecast: ForecastSection,
    pub backends: BackendSection,
    pub preprocess: PreprocessPlan,
    pub data: CsvSchema,
    pub backtest: BacktestSection,
    pub report: ReportSection,
    pub synthetic: Option<SyntheticSection>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn backend_weights(&self) -> Result<MixtureWeights> {
        match &self.backends.weights {
            Some(w) => MixtureWeights::new(w.clone()),
            None => Ok(MixtureWeights::uniform(self.backends.names.len().max(1))),
        }
    }

    pub fn depth_weights(&self) -> Result<MixtureWeights> {
        match &self.forecast.depth_weights {
            Some(w) => MixtureWeights::new(w.clone()),
            None => Ok(MixtureWeights::uniform(self.forecast.depth.max(1) as usize)),
        }
    }

    /// Cross-field checks: weights match their lists, and the per-subseries
    /// enumeration fits under the cap.
    pub fn validate(&self) -> Result<()> {
        let f = &self.forecast;
        if f.horizon == 0 || f.split == 0 {
            return Err(Error::Config("horizon and split must be at least 1".into()));
        }
        if self.backends.names.is_empty() {
            return Err(Error::Config("no backends configured".into()));
        }
        let bw = self.backend_weights()?;
        if bw.len() != self.backends.names.len() {
            return Err(Error::Config(format!(
                "{} backend weights for {} backends",
                bw.len(),
                self.backends.names.len()
            )));
        }
        if !(1..=crate::quant::MAX_DEPTH).contains(&f.depth) {
            return Err(Error::Config(format!("depth {} out of range", f.depth)));
        }
        if self.depth_weights()?.len() != f.depth as usize {
            return Err(Error::Config(format!(
                "depth weights must have {} entries",
                f.depth
            )));
        }
        if let Some([lo, hi]) = f.interval {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::Config(format!("invalid interval [{lo}, {hi}]")));
            }
        }
        PreprocessPlan::new(self.preprocess.steps.clone())?;
        Ok(())
    }

    /// Checks that the per-subseries enumeration fits the cap. Reported
    /// separately from [`Self::validate`] so callers can tell the two apart.
    pub fn check_cap(&self) -> Result<()> {
        let f = &self.forecast;
        crate::prob::enumeration_size(1u32 << f.depth, f.horizon.div_ceil(f.split), f.cap)?;
        Ok(())
    }

    pub fn request(&self, history: Vec<f64>) -> Result<ForecastRequest> {
        let backends = self
            .backends
            .names
            .iter()
            .map(|b| {
                b.build()
                    .map(|c| c as std::sync::Arc<dyn crate::codec::CodeLengthModel>)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ForecastRequest {
            history,
            horizon: self.forecast.horizon,
            split: self.forecast.split,
            max_depth: self.forecast.depth,
            depth_weights: self.depth_weights()?,
            interval: self.forecast.interval.map(|[a, b]| (a, b)),
            backends,
            weights: self.backend_weights()?,
            plan: self.preprocess.clone(),
            round: self.forecast.round,
            cap: self.forecast.cap,
        })
    }

    /// Origins for a backtest over a series of `len` values.
    pub fn origins(&self, len: usize) -> Result<Vec<usize>> {
        let b = &self.backtest;
        if let Some(o) = &b.origins {
            return Ok(o.clone());
        }
        let h = self.forecast.horizon;
        let last = b.last_origin.unwrap_or(len.saturating_sub(h));
        let first = b
            .first_origin
            .unwrap_or(last.saturating_sub(9 * b.origin_step.max(1)));
        if b.origin_step == 0 || first == 0 || first > last {
            return Err(Error::Config(format!(
                "empty or invalid origin range {first}..={last} step {}",
                b.origin_step
            )));
        }
        Ok((first..=last).step_by(b.origin_step).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_three_rows() {
        let csv = "t,value\n0,1.5\n1,2\n2,-3\n";
        let schema = CsvSchema {
            timestamp_column: Some("t".into()),
            ..CsvSchema::default()
        };
        let ds = parse_csv(csv.as_bytes(), "mem", &schema).unwrap();
        assert_eq!(ds.values, vec![1.5, 2.0, -3.0]);
        assert_eq!(ds.ordinals, vec![0, 1, 2]);
    }

    #[test]
    fn malformed_value_names_line() {
        let csv = "value\n1\nabc\n3\n";
        match parse_csv(csv.as_bytes(), "mem", &CsvSchema::default()) {
            Err(Error::Csv { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn distinct_errors() {
        let s = CsvSchema::default();
        assert!(matches!(
            parse_csv("x\n1\n".as_bytes(), "mem", &s),
            Err(Error::MissingColumn { .. })
        ));
        assert!(matches!(
            parse_csv("value\n".as_bytes(), "mem", &s),
            Err(Error::EmptyFile { .. })
        ));
        let s = CsvSchema {
            timestamp_column: Some("t".into()),
            ..CsvSchema::default()
        };
        assert!(matches!(
            parse_csv("t,value\n1,1\n1,2\n".as_bytes(), "mem", &s),
            Err(Error::NonMonotone { line: 3, .. })
        ));
    }

    #[test]
    fn monthly_labels() {
        let s = CsvSchema {
            timestamp_column: Some("month".into()),
            value_column: "value".into(),
            granularity: Granularity::Monthly,
        };
        let ds = parse_csv("month,value\n2010-12,1\n2011-01,2\n".as_bytes(), "mem", &s).unwrap();
        assert_eq!(ds.ordinals[1] - ds.ordinals[0], 1);
    }

    #[test]
    fn kp_style_days() {
        let mut csv = String::from("time,kp\n");
        let start = NaiveDate::from_ymd_opt(2018, 2, 4)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        for k in 0..80 {
            let t = start + chrono::Duration::hours(3 * k);
            csv.push_str(&format!("{},{}\n", t.format("%Y-%m-%dT%H:%M"), k % 10));
        }
        let s = CsvSchema {
            timestamp_column: Some("time".into()),
            value_column: "kp".into(),
            granularity: Granularity::ThreeHour,
        };
        let ds = parse_csv(csv.as_bytes(), "kp", &s).unwrap();
        assert_eq!(ds.len(), 80);
        assert!(ds.ordinals.windows(2).all(|w| w[1] - w[0] == 3));
        assert!(ds.is_integer_valued());
    }

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        let ds = SeriesDataset::from_values(vec![1.0, 2.25, -7.125, 1e-3], "x");
        save_csv(&ds, &path).unwrap();
        let schema = CsvSchema {
            timestamp_column: Some("timestamp".into()),
            ..CsvSchema::default()
        };
        let back = load_csv(&path, &schema).unwrap();
        assert_eq!(back.values, ds.values);
        assert_eq!(back.ordinals, ds.ordinals);
    }

    #[test]
    fn periodic_repeats() {
        let ds = generate_synthetic(&SyntheticKind::Periodic { period: 3 }, 9, None).unwrap();
        assert_eq!(ds.values, vec![0.0, 1.0, 2.0, 0.0, 1.0, 2.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn seeded_generators_reproduce() {
        let kind = SyntheticKind::Markov {
            transition: vec![vec![0.9, 0.1], vec![0.3, 0.7]],
        };
        let a = generate_synthetic(&kind, 200, Some(5)).unwrap();
        let b = generate_synthetic(&kind, 200, Some(5)).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&kind, 200, Some(6)).unwrap();
        assert_ne!(a, c);
        let walk = SyntheticKind::RandomWalk { sigma: 1.0 };
        assert_eq!(
            generate_synthetic(&walk, 50, Some(1)).unwrap(),
            generate_synthetic(&walk, 50, Some(1)).unwrap()
        );
        assert!(generate_synthetic(&walk, 50, None).is_err());
    }

    #[test]
    fn bad_transition_rejected() {
        let kind = SyntheticKind::Markov {
            transition: vec![vec![0.5, 0.4], vec![0.3, 0.7]],
        };
        assert!(matches!(
            generate_synthetic(&kind, 10, Some(1)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn config_roundtrip_and_checks() {
        let text = r#"
seed = 3

[forecast]
horizon = 18
split = 6
depth = 4
round = true

[backends]
names = ["deflate", "ppm:4", "repair"]

[preprocess]
steps = [{ step = "seasonal", period = 132 }, { step = "smooth" }, { step = "difference" }]

[data]
timestamp_column = "month"
granularity = "monthly"

[report]
decimals = 1
"#;
        let cfg = RunConfig::from_toml(text).unwrap();
        assert_eq!(cfg.forecast.split, 6);
        assert_eq!(cfg.preprocess, PreprocessPlan::monthly_solar_cycle());
        assert_eq!(cfg.data.granularity, Granularity::Monthly);
        cfg.check_cap().unwrap();
        let req = cfg.request(vec![1.0; 10]).unwrap();
        assert_eq!(req.backends.len(), 3);

        assert!(
            RunConfig::from_toml("[backends]\nnames = [\"ppm\"]\nweights = [0.5, 0.5]\n").is_err()
        );
        assert!(RunConfig::from_toml("[forecast]\ndepth = 2\ndepth_weights = [1.0]\n").is_err());
        assert!(RunConfig::from_toml("[forecast]\nbogus = 1\n").is_err());
        let big = RunConfig::from_toml("[forecast]\nhorizon = 6\nsplit = 1\n").unwrap();
        assert!(matches!(
            big.check_cap(),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn synthetic_section_parses() {
        let cfg = RunConfig::from_toml(
            "seed = 9\n[synthetic]\nkind = \"periodic\"\nperiod = 4\nlength = 400\n",
        )
        .unwrap();
        let s = cfg.synthetic.unwrap();
        assert_eq!(s.kind, SyntheticKind::Periodic { period: 4 });
        assert_eq!(s.length, 400);
    }
}
