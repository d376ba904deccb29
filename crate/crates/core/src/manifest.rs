//! Page manifest ingestion.
//!
//! A manifest is the ordered list of HTTP components that make up one page:
//! the base HTML document first, followed by every static resource it pulls
//! in. Manifests come from a HAR 1.2 subset or from a worksheet CSV with
//! measured per-component timings; either way each component is classified
//! and page-level aggregates are derived.

use serde::Deserialize;

use crate::error::{Error, Result};

/// How a component participates in download scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ComponentClass {
    /// The HTML document itself; always first, never downloaded in parallel.
    BasePage,
    /// Script components; block parallel download while active.
    JavaScript,
    /// Everything else served statically: images, CSS, beacons.
    OtherStatic,
}

impl ComponentClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ComponentClass::BasePage => "base_page",
            ComponentClass::JavaScript => "javascript",
            ComponentClass::OtherStatic => "other_static",
        }
    }
}

/// One HTTP object of a page.
#[derive(Debug, Clone, PartialEq)]
pub struct HttpComponent {
    pub url: String,
    /// Host extracted from `url`; the raw string when the URL has no host.
    pub domain_key: String,
    pub mime: String,
    pub size_bytes: u64,
    pub class: ComponentClass,
    /// Measured first-byte time, when the source carried one.
    pub measured_fb_ms: Option<f64>,
    /// Measured content-download time, when the source carried one.
    pub measured_cd_ms: Option<f64>,
    /// 1-based position in document order.
    pub doc_order: u32,
}

impl HttpComponent {
    pub fn has_measured_times(&self) -> bool {
        self.measured_fb_ms.is_some() && self.measured_cd_ms.is_some()
    }
}

/// Derived page-level counts and sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageAggregates {
    /// Number of non-base components.
    pub n_static: usize,
    /// Number of unique domains across all components.
    pub m_domains: usize,
    /// Number of JavaScript components.
    pub o_js: usize,
    /// Number of static components other than JavaScript.
    pub p_other: usize,
    pub total_bytes: u64,
    /// Average KB (1 KB = 1024 bytes) per HTTP request, base page included.
    pub avg_kb_per_request: f64,
}

impl PageAggregates {
    pub fn total_kb(&self) -> f64 {
        self.total_bytes as f64 / 1024.0
    }

    pub fn request_count(&self) -> usize {
        self.n_static + 1
    }
}

/// Classification knobs for ingestion.
#[derive(Debug, Clone)]
pub struct ManifestOptions {
    /// A component is JavaScript when its MIME type contains any marker.
    /// The default marker covers both `javascript` and `x-javascript`.
    pub js_mime_markers: Vec<String>,
}

impl Default for ManifestOptions {
    fn default() -> Self {
        ManifestOptions {
            js_mime_markers: vec!["javascript".to_string()],
        }
    }
}

impl ManifestOptions {
    fn is_js_mime(&self, mime: &str) -> bool {
        let mime = mime.to_ascii_lowercase();
        self.js_mime_markers
            .iter()
            .any(|m| mime.contains(m.as_str()))
    }
}

/// An ordered, validated component list.
#[derive(Debug, Clone, PartialEq)]
pub struct PageManifest {
    components: Vec<HttpComponent>,
}

impl PageManifest {
    /// Builds a manifest from raw entries in document order. The first entry
    /// becomes the base page; doc_order is assigned contiguously from 1.
    pub fn from_entries(entries: Vec<RawEntry>, options: &ManifestOptions) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyManifest);
        }
        let components = entries
            .into_iter()
            .enumerate()
            .map(|(i, e)| {
                let class = if i == 0 {
                    ComponentClass::BasePage
                } else if options.is_js_mime(&e.mime) {
                    ComponentClass::JavaScript
                } else {
                    ComponentClass::OtherStatic
                };
                HttpComponent {
                    domain_key: host_of(&e.url),
                    url: e.url,
                    mime: e.mime,
                    size_bytes: e.size_bytes,
                    class,
                    measured_fb_ms: e.fb_ms,
                    measured_cd_ms: e.cd_ms,
                    doc_order: (i + 1) as u32,
                }
            })
            .collect();
        Ok(PageManifest { components })
    }

    pub fn components(&self) -> &[HttpComponent] {
        &self.components
    }

    pub fn base(&self) -> &HttpComponent {
        &self.components[0]
    }

    /// All non-base components in document order.
    pub fn statics(&self) -> impl Iterator<Item = &HttpComponent> {
        self.components.iter().skip(1)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Computes the page aggregates.
    pub fn aggregates(&self) -> PageAggregates {
        let mut domains: Vec<&str> = self
            .components
            .iter()
            .map(|c| c.domain_key.as_str())
            .collect();
        domains.sort_unstable();
        domains.dedup();
        let o_js = self
            .components
            .iter()
            .filter(|c| c.class == ComponentClass::JavaScript)
            .count();
        let p_other = self
            .components
            .iter()
            .filter(|c| c.class == ComponentClass::OtherStatic)
            .count();
        let total_bytes: u64 = self.components.iter().map(|c| c.size_bytes).sum();
        let n_static = self.components.len() - 1;
        PageAggregates {
            n_static,
            m_domains: domains.len(),
            o_js,
            p_other,
            total_bytes,
            avg_kb_per_request: (total_bytes as f64 / 1024.0) / (n_static + 1) as f64,
        }
    }
}

/// One ingested entry before classification.
#[derive(Debug, Clone, Default)]
pub struct RawEntry {
    pub url: String,
    pub mime: String,
    pub size_bytes: u64,
    pub fb_ms: Option<f64>,
    pub cd_ms: Option<f64>,
}

fn host_of(url: &str) -> String {
    match url::Url::parse(url) {
        Ok(parsed) => parsed
            .host_str()
            .map(str::to_string)
            .unwrap_or_else(|| url.to_string()),
        Err(_) => url.to_string(),
    }
}

// --- HAR 1.2 subset -------------------------------------------------------

#[derive(Deserialize)]
struct HarDoc {
    log: HarLog,
}

#[derive(Deserialize)]
struct HarLog {
    #[serde(default)]
    entries: Vec<HarEntry>,
}

#[derive(Deserialize)]
struct HarEntry {
    request: HarRequest,
    response: HarResponse,
    #[serde(default)]
    timings: Option<HarTimings>,
}

#[derive(Deserialize)]
struct HarRequest {
    url: String,
}

#[derive(Deserialize)]
struct HarResponse {
    content: HarContent,
}

#[derive(Deserialize)]
struct HarContent {
    #[serde(default)]
    size: i64,
    #[serde(rename = "mimeType", default)]
    mime_type: String,
}

#[derive(Deserialize)]
struct HarTimings {
    #[serde(default)]
    wait: Option<f64>,
    #[serde(default)]
    receive: Option<f64>,
}

/// Parses a HAR 1.2 document. Only entry URLs, content MIME/size, and the
/// `wait`/`receive` timings are read; the HAR convention of -1 for unknown
/// values maps to an absent timing and a zero size.
pub fn parse_har(bytes: &[u8]) -> Result<PageManifest> {
    parse_har_with(bytes, &ManifestOptions::default())
}

pub fn parse_har_with(bytes: &[u8], options: &ManifestOptions) -> Result<PageManifest> {
    let doc: HarDoc = serde_json::from_slice(bytes).map_err(|e| har_parse_error(bytes, e))?;
    let entries = doc
        .log
        .entries
        .into_iter()
        .map(|entry| {
            let (fb, cd) = match entry.timings {
                Some(t) => (non_negative(t.wait), non_negative(t.receive)),
                None => (None, None),
            };
            RawEntry {
                url: entry.request.url,
                mime: entry.response.content.mime_type,
                size_bytes: entry.response.content.size.max(0) as u64,
                fb_ms: fb,
                cd_ms: cd,
            }
        })
        .collect();
    PageManifest::from_entries(entries, options)
}

fn non_negative(v: Option<f64>) -> Option<f64> {
    v.filter(|x| *x >= 0.0)
}

fn har_parse_error(bytes: &[u8], e: serde_json::Error) -> Error {
    Error::Parse {
        location: format!("byte {}", byte_offset(bytes, e.line(), e.column())),
        detail: e.to_string(),
    }
}

/// Converts a 1-based line/column pair into a byte offset.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut current_line = 1;
    let mut offset = 0;
    for (i, b) in bytes.iter().enumerate() {
        if current_line == line {
            offset = i;
            break;
        }
        if *b == b'\n' {
            current_line += 1;
            offset = i + 1;
        }
    }
    offset + column.saturating_sub(1)
}

// --- Worksheet CSV --------------------------------------------------------

const WORKSHEET_HEADER: [&str; 5] = ["url", "mime", "size_bytes", "cd_ms", "fb_ms"];

/// Parses a worksheet CSV (`url,mime,size_bytes,cd_ms,fb_ms`); `cd_ms` and
/// `fb_ms` may be blank when no measurement exists.
pub fn parse_worksheet_csv(bytes: &[u8]) -> Result<PageManifest> {
    parse_worksheet_csv_with(bytes, &ManifestOptions::default())
}

pub fn parse_worksheet_csv_with(bytes: &[u8], options: &ManifestOptions) -> Result<PageManifest> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = reader.headers().map_err(|e| Error::Parse {
        location: "row 1".into(),
        detail: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != WORKSHEET_HEADER {
        return Err(Error::Parse {
            location: "row 1".into(),
            detail: format!(
                "expected header `{}`, got `{}`",
                WORKSHEET_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut entries = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let row = index + 2; // 1-based, counting the header row
        let record = record.map_err(|e| Error::Parse {
            location: format!("row {row}"),
            detail: e.to_string(),
        })?;
        if record.iter().collect::<Vec<_>>() == WORKSHEET_HEADER {
            return Err(Error::Parse {
                location: format!("row {row}"),
                detail: "duplicate header row".into(),
            });
        }
        if record.len() != WORKSHEET_HEADER.len() {
            return Err(Error::Parse {
                location: format!("row {row}"),
                detail: format!(
                    "expected {} fields, got {}",
                    WORKSHEET_HEADER.len(),
                    record.len()
                ),
            });
        }
        let size_bytes: u64 = record[2].parse().map_err(|_| Error::Parse {
            location: format!("row {row}"),
            detail: format!("size_bytes `{}` is not a non-negative integer", &record[2]),
        })?;
        let cd_ms = parse_optional_ms(&record[3], row, "cd_ms")?;
        let fb_ms = parse_optional_ms(&record[4], row, "fb_ms")?;
        entries.push(RawEntry {
            url: record[0].to_string(),
            mime: record[1].to_string(),
            size_bytes,
            fb_ms,
            cd_ms,
        });
    }
    PageManifest::from_entries(entries, options)
}

fn parse_optional_ms(field: &str, row: usize, name: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    let value: f64 = field.parse().map_err(|_| Error::Parse {
        location: format!("row {row}"),
        detail: format!("{name} `{field}` is not a number"),
    })?;
    if !value.is_finite() || value < 0.0 {
        return Err(Error::Parse {
            location: format!("row {row}"),
            detail: format!("{name} `{field}` must be finite and non-negative"),
        });
    }
    Ok(Some(value))
}

/// Serializes a manifest back to the worksheet CSV format. Parsing the
/// output yields a manifest equal to the input.
pub fn write_worksheet_csv(manifest: &PageManifest) -> Vec<u8> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(WORKSHEET_HEADER)
        .expect("header writes");
    for c in manifest.components() {
        writer
            .write_record([
                c.url.as_str(),
                c.mime.as_str(),
                &c.size_bytes.to_string(),
                &c.measured_cd_ms.map(fmt_f64).unwrap_or_default(),
                &c.measured_fb_ms.map(fmt_f64).unwrap_or_default(),
            ])
            .expect("record writes");
    }
    writer.into_inner().expect("csv buffer")
}

fn fmt_f64(v: f64) -> String {
    // Display prints the shortest decimal that round-trips the f64.
    format!("{v}")
}
