//! Hourly electricity price series: CSV loading, chronological train/test
//! splits, lookback windows and synthetic generators.
//!
//! Prices are held in €/kWh. Hourly spacing is implicit: index `i` is the hour
//! `start + i`. No timezone or DST handling is attempted; inputs are assumed to
//! be hour-regular UTC.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Length of the price lookback carried in the state.
pub const WINDOW: usize = 24;

pub const HOURS_PER_DAY: usize = 24;

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

pub fn format_timestamp(ts: NaiveDateTime) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let ts = NaiveDateTime::parse_from_str(s.trim(), TIMESTAMP_FORMAT).ok()?;
    (ts.minute() == 0 && ts.second() == 0).then_some(ts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriceUnit {
    #[serde(rename = "eur_per_kwh")]
    EurPerKwh,
    #[serde(rename = "eur_per_mwh")]
    EurPerMwh,
}

impl PriceUnit {
    fn to_eur_per_kwh(self, value: f64) -> f64 {
        match self {
            PriceUnit::EurPerKwh => value,
            PriceUnit::EurPerMwh => value / 1000.0,
        }
    }
}

/// A gapless hourly price series in €/kWh.
#[derive(Clone, Debug, PartialEq)]
pub struct PriceSeries {
    start: NaiveDateTime,
    prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(start: NaiveDateTime, prices: Vec<f64>) -> Result<Self> {
        if prices.is_empty() {
            return Err(Error::InvalidPrices("empty series".into()));
        }
        if start.minute() != 0 || start.second() != 0 || start.nanosecond() != 0 {
            return Err(Error::InvalidPrices(format!(
                "start {start} is not on an hour boundary"
            )));
        }
        if let Some(i) = prices.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidPrices(format!("non-finite price at index {i}")));
        }
        Ok(Self { start, prices })
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn days(&self) -> usize {
        self.prices.len() / HOURS_PER_DAY
    }

    pub fn timestamp(&self, index: usize) -> NaiveDateTime {
        self.start + Duration::hours(index as i64)
    }

    /// Hour of day (0..24) of the given index.
    pub fn hour_of_day(&self, index: usize) -> usize {
        (self.start.hour() as usize + index) % HOURS_PER_DAY
    }

    /// Sub-series of `len` hours starting at `offset`.
    pub fn slice(&self, offset: usize, len: usize) -> Result<Self> {
        if offset + len > self.prices.len() {
            return Err(Error::SeriesTooShort {
                len: self.prices.len(),
                required: offset + len,
            });
        }
        Self::new(self.timestamp(offset), self.prices[offset..offset + len].to_vec())
    }

    pub fn mean_std(&self) -> (f64, f64) {
        let n = self.prices.len() as f64;
        let mean = self.prices.iter().sum::<f64>() / n;
        let var = self.prices.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    /// Writes the series in the `timestamp,price` CSV format (€/kWh).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "timestamp,price")?;
            for (i, p) in self.prices.iter().enumerate() {
                writeln!(out, "{},{}", format_timestamp(self.timestamp(i)), p)?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

/// Loads a `timestamp,price` CSV file and converts prices to €/kWh.
pub fn load_price_csv(path: &Path, unit: PriceUnit) -> Result<PriceSeries> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "timestamp" || &headers[1] != "price" {
        return Err(parse_err(
            1,
            format!(
                "expected header `timestamp,price`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut start = None;
    let mut prev: Option<NaiveDateTime> = None;
    let mut prices = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        if record.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, found {}", record.len())));
        }
        let ts =
            parse_timestamp(&record[0]).ok_or_else(|| parse_err(line, format!("bad timestamp `{}`", &record[0])))?;
        let value: f64 = record[1]
            .parse()
            .map_err(|_| parse_err(line, format!("bad price `{}`", &record[1])))?;
        if !value.is_finite() {
            return Err(parse_err(line, format!("non-finite price `{}`", &record[1])));
        }
        match prev {
            None => start = Some(ts),
            Some(p) if ts != p + Duration::hours(1) => {
                return Err(Error::Gap {
                    timestamp: format_timestamp(ts),
                    line,
                })
            }
            Some(_) => {}
        }
        prev = Some(ts);
        prices.push(unit.to_eur_per_kwh(value));
    }

    let start = start.ok_or_else(|| parse_err(1, "no data rows".into()))?;
    PriceSeries::new(start, prices)
}

/// Chronological train/test partition.
#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub train: PriceSeries,
    pub test: PriceSeries,
    pub split_policy: String,
}

/// Uses the final `test_days` days as test data and everything before as
/// training data.
pub fn split_train_test(series: &PriceSeries, test_days: usize) -> Result<DatasetSplit> {
    let required = HOURS_PER_DAY * (test_days + 1);
    if test_days == 0 || series.len() < required {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            required,
        });
    }
    let test_len = test_days * HOURS_PER_DAY;
    let train_len = series.len() - test_len;
    Ok(DatasetSplit {
        train: series.slice(0, train_len)?,
        test: series.slice(train_len, test_len)?,
        split_policy: format!("chronological tail: last {test_days} days held out"),
    })
}

/// The 24 prices ending at `end_index`, oldest first.
pub fn price_window(series: &PriceSeries, end_index: usize) -> Result<[f64; WINDOW]> {
    if end_index < WINDOW - 1 {
        return Err(Error::InsufficientLookback { end_index });
    }
    if end_index >= series.len() {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            required: end_index + 1,
        });
    }
    let mut window = [0.0; WINDOW];
    window.copy_from_slice(&series.prices[end_index + 1 - WINDOW..=end_index]);
    Ok(window)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PricePattern {
    /// `low` during `[cheap_start, cheap_end)` (hour of day, may wrap past
    /// midnight), `high` otherwise.
    TwoTier {
        low: f64,
        high: f64,
        cheap_start: usize,
        cheap_end: usize,
    },
    /// Daily cosine between `low` and `high`, peaking at `peak_hour`.
    Sinusoid { low: f64, high: f64, peak_hour: f64 },
    /// Gaussian random walk from `initial`, reflected into `[low, high]`.
    RandomWalk { initial: f64, low: f64, high: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticPriceSpec {
    pub pattern: PricePattern,
    /// Standard deviation of additive Gaussian noise (€/kWh); the step size
    /// for the random walk.
    pub noise: f64,
    pub seed: u64,
    pub start: NaiveDateTime,
}

impl SyntheticPriceSpec {
    pub fn new(pattern: PricePattern, noise: f64, seed: u64) -> Self {
        Self {
            pattern,
            noise,
            seed,
            start: default_start(),
        }
    }

    /// Two-tier tariff with cheap hours `[cheap_start, cheap_end)`, no noise.
    pub fn two_tier(low: f64, high: f64, cheap_start: usize, cheap_end: usize) -> Self {
        Self::new(
            PricePattern::TwoTier {
                low,
                high,
                cheap_start,
                cheap_end,
            },
            0.0,
            0,
        )
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return bad(format!(
                "noise must be a finite non-negative number, got {}",
                self.noise
            ));
        }
        match self.pattern {
            PricePattern::TwoTier {
                low,
                high,
                cheap_start,
                cheap_end,
            } => {
                if !(low < high) {
                    return bad(format!("two-tier needs low < high, got {low} >= {high}"));
                }
                if cheap_start >= HOURS_PER_DAY || cheap_end > HOURS_PER_DAY {
                    return bad("two-tier switch hours must lie in 0..=24".into());
                }
            }
            PricePattern::Sinusoid { low, high, peak_hour } => {
                if !(low < high) || !peak_hour.is_finite() {
                    return bad(format!("sinusoid needs low < high, got {low} >= {high}"));
                }
            }
            PricePattern::RandomWalk { initial, low, high } => {
                if !(low < high) || !(low..=high).contains(&initial) {
                    return bad(format!(
                        "random walk needs low < high and initial in range, got {initial} in [{low}, {high}]"
                    ));
                }
            }
        }
        Ok(())
    }
}

fn default_start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2020, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date")
}

fn is_cheap_hour(hour: usize, start: usize, end: usize) -> bool {
    if start <= end {
        (start..end).contains(&hour)
    } else {
        hour >= start || hour < end
    }
}

/// Generates `days` days of synthetic hourly prices.
pub fn gen_synthetic(spec: &SyntheticPriceSpec, days: usize) -> Result<PriceSeries> {
    if days < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 days, got {days}")));
    }
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, Stream::Data);
    let hours = days * HOURS_PER_DAY;
    let start_hour = spec.start.hour() as usize;
    let noise = |rng: &mut rng::Rng| -> f64 {
        if spec.noise == 0.0 {
            0.0
        } else {
            spec.noise * rng.sample::<f64, _>(StandardNormal)
        }
    };

    let prices = match spec.pattern {
        PricePattern::TwoTier {
            low,
            high,
            cheap_start,
            cheap_end,
        } => (0..hours)
            .map(|i| {
                let hour = (start_hour + i) % HOURS_PER_DAY;
                let base = if is_cheap_hour(hour, cheap_start, cheap_end) {
                    low
                } else {
                    high
                };
                base + noise(&mut rng)
            })
            .collect(),
        PricePattern::Sinusoid { low, high, peak_hour } => (0..hours)
            .map(|i| {
                let hour = ((start_hour + i) % HOURS_PER_DAY) as f64;
                let phase = 2.0 * std::f64::consts::PI * (hour - peak_hour) / HOURS_PER_DAY as f64;
                let mid = 0.5 * (low + high);
                let amp = 0.5 * (high - low);
                mid + amp * phase.cos() + noise(&mut rng)
            })
            .collect(),
        PricePattern::RandomWalk { initial, low, high } => {
            let mut level = initial;
            (0..hours)
                .map(|i| {
                    if i > 0 {
                        level += noise(&mut rng);
                        // reflect back into the band
                        while level < low || level > high {
                            level = if level < low {
                                2.0 * low - level
                            } else {
                                2.0 * high - level
                            };
                        }
                    }
                    level
                })
                .collect()
        }
    };
    PriceSeries::new(spec.start, prices)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn series(n: usize) -> PriceSeries {
        PriceSeries::new(default_start(), (0..n).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn loads_mwh_and_converts() {
        let f = write_tmp("timestamp,price\n2020-01-01T00:00:00Z,18.30\n2020-01-01T01:00:00Z,-5.00\n");
        let s = load_price_csv(f.path(), PriceUnit::EurPerMwh).unwrap();
        assert_eq!(s.prices(), &[0.0183, -0.005]);
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn gap_names_timestamp() {
        let mut body = String::from("timestamp,price\n");
        let s = default_start();
        for i in 0..120 {
            if i == 100 {
                continue;
            }
            body.push_str(&format!("{},1.0\n", format_timestamp(s + Duration::hours(i))));
        }
        let f = write_tmp(&body);
        match load_price_csv(f.path(), PriceUnit::EurPerKwh) {
            Err(Error::Gap { timestamp, line }) => {
                assert_eq!(timestamp, "2020-01-05T05:00:00Z");
                assert_eq!(line, 102);
            }
            other => panic!("expected gap error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_timestamp_is_a_gap() {
        let f = write_tmp("timestamp,price\n2020-01-01T00:00:00Z,1\n2020-01-01T00:00:00Z,2\n");
        assert!(matches!(
            load_price_csv(f.path(), PriceUnit::EurPerKwh),
            Err(Error::Gap { .. })
        ));
    }

    #[test]
    fn bad_row_reports_line() {
        let f = write_tmp("timestamp,price\n2020-01-01T00:00:00Z,1\n2020-01-01T01:00:00Z,abc\n");
        match load_price_csv(f.path(), PriceUnit::EurPerKwh) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let f = write_tmp("timestamp,price\n2020-01-01T00:00:00Z,NaN\n");
        assert!(matches!(
            load_price_csv(f.path(), PriceUnit::EurPerKwh),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_price_csv(Path::new("/nonexistent/prices.csv"), PriceUnit::EurPerKwh),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn unit_idempotence() {
        let a = write_tmp("timestamp,price\n2020-01-01T00:00:00Z,0.25\n2020-01-01T01:00:00Z,-0.5\n");
        let b = write_tmp("timestamp,price\n2020-01-01T00:00:00Z,250\n2020-01-01T01:00:00Z,-500\n");
        assert_eq!(
            load_price_csv(a.path(), PriceUnit::EurPerKwh).unwrap(),
            load_price_csv(b.path(), PriceUnit::EurPerMwh).unwrap()
        );
    }

    #[test]
    fn split_partitions() {
        let s = series(72);
        let split = split_train_test(&s, 1).unwrap();
        assert_eq!(split.train.days(), 2);
        assert_eq!(split.test.days(), 1);
        let joined: Vec<f64> = split
            .train
            .prices()
            .iter()
            .chain(split.test.prices())
            .copied()
            .collect();
        assert_eq!(joined, s.prices());
        assert_eq!(split.test.start(), s.timestamp(48));

        assert!(split_train_test(&series(240), 10).is_err());
    }

    #[test]
    fn window_bounds() {
        let s = series(48);
        let w = price_window(&s, 23).unwrap();
        assert_eq!(w.to_vec(), (0..24).map(|i| i as f64).collect::<Vec<_>>());
        assert!(matches!(price_window(&s, 22), Err(Error::InsufficientLookback { .. })));
        assert!(price_window(&s, 48).is_err());

        let c = PriceSeries::new(default_start(), vec![0.1; 48]).unwrap();
        assert_eq!(price_window(&c, 30).unwrap(), [0.1; 24]);
    }

    #[test]
    fn two_tier_pattern() {
        let spec = SyntheticPriceSpec::two_tier(0.05, 0.30, 0, 6);
        let s = gen_synthetic(&spec, 2).unwrap();
        assert_eq!(s.len(), 48);
        for day in 0..2 {
            let d = &s.prices()[day * 24..(day + 1) * 24];
            assert!(d[..6].iter().all(|&p| p == 0.05));
            assert!(d[6..].iter().all(|&p| p == 0.30));
        }
        let bad = SyntheticPriceSpec::two_tier(0.3, 0.3, 0, 6);
        assert!(gen_synthetic(&bad, 2).is_err());
        assert!(gen_synthetic(&spec, 1).is_err());
    }

    #[test]
    fn wrapping_cheap_window() {
        let spec = SyntheticPriceSpec::two_tier(0.1, 0.2, 22, 2);
        let s = gen_synthetic(&spec, 2).unwrap();
        let cheap: Vec<usize> = (0..24).filter(|&h| s.prices()[h] == 0.1).collect();
        assert_eq!(cheap, vec![0, 1, 22, 23]);
    }

    #[test]
    fn synthetic_is_seeded() {
        let spec = SyntheticPriceSpec::new(
            PricePattern::Sinusoid {
                low: 0.05,
                high: 0.3,
                peak_hour: 18.0,
            },
            0.01,
            42,
        );
        assert_eq!(gen_synthetic(&spec, 5).unwrap(), gen_synthetic(&spec, 5).unwrap());
        let other = SyntheticPriceSpec {
            seed: 43,
            ..spec.clone()
        };
        assert_ne!(gen_synthetic(&spec, 5).unwrap(), gen_synthetic(&other, 5).unwrap());
    }

    #[test]
    fn random_walk_without_noise_is_constant() {
        let spec = SyntheticPriceSpec::new(
            PricePattern::RandomWalk {
                initial: 0.12,
                low: 0.0,
                high: 0.5,
            },
            0.0,
            1,
        );
        let s = gen_synthetic(&spec, 3).unwrap();
        assert!(s.prices().iter().all(|&p| p == 0.12));

        let noisy = SyntheticPriceSpec { noise: 0.05, ..spec };
        let s = gen_synthetic(&noisy, 30).unwrap();
        assert!(s.prices().iter().all(|&p| (0.0..=0.5).contains(&p)));
    }
}
