//! Descriptive modeling over last-mile measurement records.
//!
//! Everything here runs in one streaming pass with constant memory: means
//! use running updates, the least-squares fits use Welford-style centered
//! sums. Accumulators merge associatively, so partial scans over shards of
//! a measurement file combine into the same result as one scan.

use std::collections::HashMap;
use std::io::Read;

use crate::error::{Error, Result};
use crate::profile::{NetworkProfile, SizeTimeModel, DEFAULT_SERVER_TIME_MS};

/// Whether a measured component was a base HTML document or a static asset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    BasePage,
    Static,
}

/// One last-mile measurement of one HTTP component.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub url: String,
    pub domain: String,
    pub size_bytes: u64,
    pub dns_ms: Option<f64>,
    pub connect_ms: Option<f64>,
    pub fb_ms: Option<f64>,
    pub cd_ms: Option<f64>,
    pub kind: RecordKind,
}

/// Timing column selector for [`mean_of`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimingColumn {
    Dns,
    Connect,
    FirstByte,
    ContentDownload,
}

impl TimingColumn {
    fn get(&self, r: &MeasurementRecord) -> Option<f64> {
        match self {
            TimingColumn::Dns => r.dns_ms,
            TimingColumn::Connect => r.connect_ms,
            TimingColumn::FirstByte => r.fb_ms,
            TimingColumn::ContentDownload => r.cd_ms,
        }
    }
}

/// Result of a least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: SizeTimeModel,
    /// 1 − SS_res/SS_tot, defined as 1.0 when the data has no spread at all.
    pub r_squared: f64,
    pub n_points: usize,
}

/// Streaming mean with associative merge.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanAccumulator {
    n: u64,
    mean: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, value: f64) {
        self.n += 1;
        self.mean += (value - self.mean) / self.n as f64;
    }

    pub fn merge(&mut self, other: &MeanAccumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let total = self.n + other.n;
        self.mean += (other.mean - self.mean) * other.n as f64 / total as f64;
        self.n = total;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then_some(self.mean)
    }
}

/// Streaming simple-regression accumulator using centered sums.
///
/// Tracks means of x and y plus the centered second moments, which keeps
/// the normal equations well conditioned for large inputs. Merging two
/// accumulators follows the pairwise-combination identities.
#[derive(Debug, Clone, Copy, Default)]
pub struct OlsAccumulator {
    n: u64,
    mean_x: f64,
    mean_y: f64,
    m2_x: f64,
    m2_y: f64,
    co_xy: f64,
}

impl OlsAccumulator {
    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        let n = self.n as f64;
        let dx = x - self.mean_x;
        let dy = y - self.mean_y;
        self.mean_x += dx / n;
        self.mean_y += dy / n;
        self.m2_x += dx * (x - self.mean_x);
        self.m2_y += dy * (y - self.mean_y);
        self.co_xy += dx * (y - self.mean_y);
    }

    pub fn merge(&mut self, other: &OlsAccumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n1 = self.n as f64;
        let n2 = other.n as f64;
        let total = n1 + n2;
        let dx = other.mean_x - self.mean_x;
        let dy = other.mean_y - self.mean_y;
        self.m2_x += other.m2_x + dx * dx * n1 * n2 / total;
        self.m2_y += other.m2_y + dy * dy * n1 * n2 / total;
        self.co_xy += other.co_xy + dx * dy * n1 * n2 / total;
        self.mean_x += dx * n2 / total;
        self.mean_y += dy * n2 / total;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    /// Slope, intercept, and r² of the least-squares line, or `None` when
    /// fewer than two points or a spread-free predictor make the fit
    /// degenerate.
    pub fn line(&self) -> Option<(f64, f64, f64)> {
        if self.n < 2 || self.m2_x <= 0.0 {
            return None;
        }
        let slope = self.co_xy / self.m2_x;
        let intercept = self.mean_y - slope * self.mean_x;
        let r_squared = if self.m2_y <= 0.0 {
            1.0
        } else {
            (1.0 - (self.m2_y - slope * self.co_xy) / self.m2_y).clamp(0.0, 1.0)
        };
        Some((slope, intercept, r_squared))
    }
}

/// Ordinary least squares of y against x.
pub fn fit_affine(points: &[(f64, f64)]) -> Result<FitResult> {
    let mut acc = OlsAccumulator::default();
    for &(x, y) in points {
        acc.push(x, y);
    }
    affine_from_accumulator(&acc, "fit_affine")
}

fn affine_from_accumulator(acc: &OlsAccumulator, what: &str) -> Result<FitResult> {
    let (slope, intercept, r_squared) = acc
        .line()
        .ok_or_else(|| Error::DegenerateFit(what.to_string()))?;
    Ok(FitResult {
        model: SizeTimeModel::Affine { slope, intercept },
        r_squared,
        n_points: acc.n as usize,
    })
}

/// Least squares of y against ln(x); every x must be ≥ 1.
pub fn fit_log(points: &[(f64, f64)]) -> Result<FitResult> {
    let mut acc = OlsAccumulator::default();
    for &(x, y) in points {
        if x < 1.0 {
            return Err(Error::Domain(format!("log fit requires x >= 1, got {x}")));
        }
        acc.push(x.ln(), y);
    }
    let (a, b, r_squared) = acc
        .line()
        .ok_or_else(|| Error::DegenerateFit("fit_log".to_string()))?;
    Ok(FitResult {
        model: SizeTimeModel::Log { a, b },
        r_squared,
        n_points: acc.n as usize,
    })
}

/// Arithmetic mean of one timing column over the records that carry it.
pub fn mean_of(column: TimingColumn, records: &[MeasurementRecord]) -> Result<f64> {
    let mut acc = MeanAccumulator::default();
    for r in records {
        if let Some(v) = column.get(r) {
            acc.push(v);
        }
    }
    acc.mean()
        .ok_or_else(|| Error::EmptyColumn(format!("{column:?}")))
}

/// Mean network-only first-byte time: the measured first byte minus the
/// measured server time, per property, averaged. Negative differences are
/// kept as observed.
pub fn derive_first_byte(fb_by_property: &[(f64, f64)]) -> Result<f64> {
    if fb_by_property.is_empty() {
        return Err(Error::EmptyColumn("first_byte".into()));
    }
    let mut acc = MeanAccumulator::default();
    for &(fb, server) in fb_by_property {
        acc.push(fb - server);
    }
    Ok(acc.mean().unwrap())
}

/// Running state for [`build_profile`]; merging two builders gives the same
/// profile as a single pass over the concatenated streams.
#[derive(Debug, Clone, Default)]
pub struct ProfileBuilder {
    base_dns: MeanAccumulator,
    base_connect: MeanAccumulator,
    base_fb_net: MeanAccumulator,
    base_cd: OlsAccumulator,
    static_dns: MeanAccumulator,
    static_connect: MeanAccumulator,
    static_fb: OlsAccumulator,
    static_cd: OlsAccumulator,
}

impl ProfileBuilder {
    pub fn push(&mut self, record: &MeasurementRecord, server_times: &HashMap<String, f64>) {
        let size = record.size_bytes as f64;
        match record.kind {
            RecordKind::BasePage => {
                if let Some(dns) = record.dns_ms {
                    self.base_dns.push(dns);
                }
                if let Some(connect) = record.connect_ms {
                    self.base_connect.push(connect);
                }
                if let Some(fb) = record.fb_ms {
                    let server = server_times.get(&record.url).copied().unwrap_or(0.0);
                    self.base_fb_net.push(fb - server);
                }
                if let Some(cd) = record.cd_ms {
                    self.base_cd.push(size, cd);
                }
            }
            RecordKind::Static => {
                if let Some(dns) = record.dns_ms {
                    self.static_dns.push(dns);
                }
                if let Some(connect) = record.connect_ms {
                    self.static_connect.push(connect);
                }
                if let Some(fb) = record.fb_ms {
                    self.static_fb.push(size, fb);
                }
                if let Some(cd) = record.cd_ms {
                    self.static_cd.push(size, cd);
                }
            }
        }
    }

    pub fn merge(&mut self, other: &ProfileBuilder) {
        self.base_dns.merge(&other.base_dns);
        self.base_connect.merge(&other.base_connect);
        self.base_fb_net.merge(&other.base_fb_net);
        self.base_cd.merge(&other.base_cd);
        self.static_dns.merge(&other.static_dns);
        self.static_connect.merge(&other.static_connect);
        self.static_fb.merge(&other.static_fb);
        self.static_cd.merge(&other.static_cd);
    }

    pub fn finish(&self, country: &str) -> Result<NetworkProfile> {
        let t_dnsbp_ms = self
            .base_dns
            .mean()
            .ok_or_else(|| Error::EmptyColumn("t_dnsbp_ms".into()))?;
        let t_cbp_ms = self
            .base_connect
            .mean()
            .ok_or_else(|| Error::EmptyColumn("t_cbp_ms".into()))?;
        let t_dnssc_ms = self
            .static_dns
            .mean()
            .ok_or_else(|| Error::EmptyColumn("t_dnssc_ms".into()))?;
        let t_csc_ms = self
            .static_connect
            .mean()
            .ok_or_else(|| Error::EmptyColumn("t_csc_ms".into()))?;
        let fbbp = self
            .base_fb_net
            .mean()
            .ok_or_else(|| Error::EmptyColumn("fbbp_model".into()))?;
        let cdbp = fit_checked(&self.base_cd, "cdbp_model")?;
        let fbsc = fit_checked(&self.static_fb, "fbsc_model")?;
        let cdsc = fit_checked(&self.static_cd, "cdsc_model")?;
        Ok(NetworkProfile {
            country: country.to_string(),
            t_dnsbp_ms,
            t_cbp_ms,
            fbbp_model: Some(SizeTimeModel::Constant { c: fbbp }),
            cdbp_model: Some(cdbp),
            t_dnssc_ms,
            t_csc_ms,
            fbsc_model: Some(fbsc),
            cdsc_model: Some(cdsc),
            t_sr_ms: DEFAULT_SERVER_TIME_MS,
        })
    }
}

fn fit_checked(acc: &OlsAccumulator, parameter: &str) -> Result<SizeTimeModel> {
    if acc.count() == 0 {
        return Err(Error::EmptyColumn(parameter.to_string()));
    }
    Ok(affine_from_accumulator(acc, parameter)?.model)
}

/// Derives a country profile from a stream of measurement records.
///
/// `server_times` maps a base-page URL to its measured server processing
/// time; URLs without an entry contribute their first-byte time unadjusted.
pub fn build_profile<I>(
    records: I,
    server_times: &HashMap<String, f64>,
    country: &str,
) -> Result<NetworkProfile>
where
    I: IntoIterator<Item = Result<MeasurementRecord>>,
{
    let mut builder = ProfileBuilder::default();
    for record in records {
        builder.push(&record?, server_times);
    }
    builder.finish(country)
}

// --- Measurement CSV ------------------------------------------------------

const MEASUREMENT_HEADER: [&str; 8] = [
    "url",
    "domain",
    "kind",
    "size_bytes",
    "dns_ms",
    "connect_ms",
    "fb_ms",
    "cd_ms",
];

/// Streaming reader for the measurement CSV
/// (`url,domain,kind,size_bytes,dns_ms,connect_ms,fb_ms,cd_ms`, blank = absent).
pub fn read_measurements<R: Read>(
    reader: R,
) -> Result<impl Iterator<Item = Result<MeasurementRecord>>> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv_reader.headers().map_err(|e| Error::Parse {
        location: "row 1".into(),
        detail: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != MEASUREMENT_HEADER {
        return Err(Error::Parse {
            location: "row 1".into(),
            detail: format!(
                "expected header `{}`, got `{}`",
                MEASUREMENT_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    Ok(csv_reader
        .into_records()
        .enumerate()
        .map(|(index, record)| parse_measurement(index + 2, record)))
}

fn parse_measurement(
    row: usize,
    record: std::result::Result<csv::StringRecord, csv::Error>,
) -> Result<MeasurementRecord> {
    let record = record.map_err(|e| Error::Parse {
        location: format!("row {row}"),
        detail: e.to_string(),
    })?;
    if record.len() != MEASUREMENT_HEADER.len() {
        return Err(Error::Parse {
            location: format!("row {row}"),
            detail: format!(
                "expected {} fields, got {}",
                MEASUREMENT_HEADER.len(),
                record.len()
            ),
        });
    }
    let kind = match &record[2] {
        "base" => RecordKind::BasePage,
        "static" => RecordKind::Static,
        other => {
            return Err(Error::Parse {
                location: format!("row {row}"),
                detail: format!("kind must be `base` or `static`, got `{other}`"),
            })
        }
    };
    let size_bytes: u64 = record[3].parse().map_err(|_| Error::Parse {
        location: format!("row {row}"),
        detail: format!("size_bytes `{}` is not a non-negative integer", &record[3]),
    })?;
    let timing = |i: usize, name: &str| -> Result<Option<f64>> {
        let field = &record[i];
        if field.is_empty() {
            return Ok(None);
        }
        let v: f64 = field.parse().map_err(|_| Error::Parse {
            location: format!("row {row}"),
            detail: format!("{name} `{field}` is not a number"),
        })?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Parse {
                location: format!("row {row}"),
                detail: format!("{name} `{field}` must be finite and non-negative"),
            });
        }
        Ok(Some(v))
    };
    let record = MeasurementRecord {
        url: record[0].to_string(),
        domain: record[1].to_string(),
        size_bytes,
        dns_ms: timing(4, "dns_ms")?,
        connect_ms: timing(5, "connect_ms")?,
        fb_ms: timing(6, "fb_ms")?,
        cd_ms: timing(7, "cd_ms")?,
        kind,
    };
    if record.dns_ms.is_none()
        && record.connect_ms.is_none()
        && record.fb_ms.is_none()
        && record.cd_ms.is_none()
    {
        return Err(Error::Parse {
            location: format!("row {row}"),
            detail: "record carries no timing fields".into(),
        });
    }
    Ok(record)
}

/// Reads a server-time CSV with header `url,server_ms` into the mapping
/// consumed by [`build_profile`].
pub fn read_server_times_csv(bytes: &[u8]) -> Result<HashMap<String, f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = reader.headers().map_err(|e| Error::Parse {
        location: "row 1".into(),
        detail: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != ["url", "server_ms"] {
        return Err(Error::Parse {
            location: "row 1".into(),
            detail: "expected header `url,server_ms`".into(),
        });
    }
    let mut map = HashMap::new();
    for (index, record) in reader.records().enumerate() {
        let row = index + 2;
        let record = record.map_err(|e| Error::Parse {
            location: format!("row {row}"),
            detail: e.to_string(),
        })?;
        let server: f64 = record[1].parse().map_err(|_| Error::Parse {
            location: format!("row {row}"),
            detail: format!("server_ms `{}` is not a number", &record[1]),
        })?;
        map.insert(record[0].to_string(), server);
    }
    Ok(map)
}

// --- Validation -----------------------------------------------------------

/// Per-row and aggregate error of predictions against measured values.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationStats {
    /// |predicted − measured| / measured × 100, in input order.
    pub per_row_error_pct: Vec<f64>,
    pub mean_error_pct: f64,
    /// Sample standard deviation (n − 1); 0 when only one pair exists.
    pub stddev_error_pct: f64,
    pub n_pairs: usize,
}

/// Compares (predicted, measured) pairs; every measured value must be > 0.
pub fn validate(pairs: &[(f64, f64)]) -> Result<ValidationStats> {
    if pairs.is_empty() {
        return Err(Error::EmptyColumn("validation pairs".into()));
    }
    let mut per_row = Vec::with_capacity(pairs.len());
    for &(predicted, measured) in pairs {
        if measured.is_nan() || measured <= 0.0 {
            return Err(Error::Domain(format!(
                "measured value must be positive, got {measured}"
            )));
        }
        per_row.push((predicted - measured).abs() / measured * 100.0);
    }
    let n = per_row.len();
    let mean = per_row.iter().sum::<f64>() / n as f64;
    let stddev = if n < 2 {
        0.0
    } else {
        let ss: f64 = per_row.iter().map(|e| (e - mean) * (e - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    };
    Ok(ValidationStats {
        per_row_error_pct: per_row,
        mean_error_pct: mean,
        stddev_error_pct: stddev,
        n_pairs: n,
    })
}

/// Reads a pairs CSV with header `predicted_ms,measured_ms`.
pub fn read_pairs_csv(bytes: &[u8]) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = reader.headers().map_err(|e| Error::Parse {
        location: "row 1".into(),
        detail: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != ["predicted_ms", "measured_ms"] {
        return Err(Error::Parse {
            location: "row 1".into(),
            detail: "expected header `predicted_ms,measured_ms`".into(),
        });
    }
    let mut pairs = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let row = index + 2;
        let record = record.map_err(|e| Error::Parse {
            location: format!("row {row}"),
            detail: e.to_string(),
        })?;
        let parse = |i: usize| -> Result<f64> {
            record[i].parse().map_err(|_| Error::Parse {
                location: format!("row {row}"),
                detail: format!("`{}` is not a number", &record[i]),
            })
        };
        pairs.push((parse(0)?, parse(1)?));
    }
    Ok(pairs)
}
