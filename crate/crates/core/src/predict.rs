//! End-to-end response-time prediction.
//!
//! Assembles a per-component breakdown from a manifest, a country profile,
//! and a parallel-efficiency value. Worksheet mode consumes measured
//! first-byte/content-download times; size mode synthesizes them from the
//! profile's size→time models. Both modes share the same assembly:
//!
//!   total = base DNS + base connect + base page transmission
//!         + CDN DNS + CDN connect + server time
//!         + Σ static transmission (parallelizable rows divided by BPE)
//!         + rendering (when enabled)

use crate::browser::{bpe, classify_parallel, render_time, BpeInput, Rounding};
use crate::error::{Error, Result};
use crate::manifest::{ComponentClass, HttpComponent, PageManifest};
use crate::profile::{NetworkProfile, SizeTimeModel};

/// Where the parallel-efficiency divisor comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BpeSource {
    /// Caller-supplied value, must be ≥ 1.
    Explicit(f64),
    /// Derived from first-byte and average content-download time: measured
    /// values in worksheet mode, model values at the mean static size in
    /// size mode. Falls back to 1 (serial) when no static download time is
    /// available to form the ratio.
    Computed,
}

/// How the per-page CDN DNS/connect constants enter the total.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DnsConnectMode {
    /// One DNS lookup and one connect for the whole CDN, added once. This
    /// is what the published worksheet does and the default.
    SingleCdn,
    /// One DNS lookup and one connect per unique static domain, the whole
    /// term divided by the parallel efficiency.
    PerDomainOverBpe,
}

/// Prediction knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionConfig {
    pub bpe_source: BpeSource,
    pub dns_connect_mode: DnsConnectMode,
    /// Add the rendering estimate to the total. Off by default: the
    /// published worksheet total carries no rendering term.
    pub include_render: bool,
    /// Add the fixed server-processing constant. On by default.
    pub include_server: bool,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        PredictionConfig {
            bpe_source: BpeSource::Computed,
            dns_connect_mode: DnsConnectMode::SingleCdn,
            include_render: false,
            include_server: true,
        }
    }
}

/// One line of the prediction worksheet.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownRow {
    pub doc_order: u32,
    pub url: String,
    pub class: ComponentClass,
    pub size_bytes: u64,
    pub parallelizable: bool,
    pub fb_ms: f64,
    pub cd_ms: f64,
    /// fb + cd, divided by the parallel efficiency for parallelizable rows.
    pub sum_ms: f64,
}

/// Complete prediction: per-component rows plus the constant terms that
/// were actually added. Re-adding every field reproduces `total_ms`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBreakdown {
    pub country: String,
    pub rows: Vec<BreakdownRow>,
    pub t_dnsbp_ms: f64,
    pub t_cbp_ms: f64,
    pub t_dnssc_ms: f64,
    pub t_csc_ms: f64,
    /// Server allowance added to the total; 0 when excluded.
    pub t_sr_ms: f64,
    /// Rendering estimate added to the total; 0 when excluded.
    pub render_ms: f64,
    pub bpe_used: f64,
    pub total_ms: f64,
}

impl PredictionBreakdown {
    /// |total − measured| / measured × 100.
    pub fn error_pct_vs(&self, measured_ms: f64) -> Result<f64> {
        compare(self.total_ms, measured_ms)
    }
}

/// Prediction error against a measured response time, in percent.
pub fn compare(predicted_ms: f64, measured_ms: f64) -> Result<f64> {
    if measured_ms.is_nan() || measured_ms <= 0.0 {
        return Err(Error::Domain(format!(
            "measured response time must be positive, got {measured_ms}"
        )));
    }
    Ok((predicted_ms - measured_ms).abs() / measured_ms * 100.0)
}

/// Predicts from measured per-component times (worksheet mode). Every
/// component must carry both measured timings.
pub fn predict_worksheet(
    manifest: &PageManifest,
    profile: &NetworkProfile,
    config: &PredictionConfig,
) -> Result<PredictionBreakdown> {
    let mut timed = Vec::with_capacity(manifest.len());
    for c in manifest.components() {
        match (c.measured_fb_ms, c.measured_cd_ms) {
            (Some(fb), Some(cd)) => timed.push((c, fb, cd)),
            _ => return Err(Error::IncompleteManifest(c.doc_order)),
        }
    }
    let bpe_used = match config.bpe_source {
        BpeSource::Explicit(value) => explicit_bpe(value)?,
        BpeSource::Computed => {
            let statics: Vec<(f64, f64)> = timed
                .iter()
                .filter(|(c, _, _)| c.class != ComponentClass::BasePage)
                .map(|&(_, fb, cd)| (fb, cd))
                .collect();
            computed_bpe(
                mean(statics.iter().map(|p| p.0)),
                mean(statics.iter().map(|p| p.1)),
            )
        }
    };
    assemble(manifest, profile, config, bpe_used, &timed)
}

/// Predicts from component sizes alone, synthesizing per-component times
/// through the profile's size→time models.
pub fn predict_from_sizes(
    manifest: &PageManifest,
    profile: &NetworkProfile,
    config: &PredictionConfig,
) -> Result<PredictionBreakdown> {
    let fbbp = require_model(&profile.fbbp_model, "fbbp_model")?;
    let cdbp = require_model(&profile.cdbp_model, "cdbp_model")?;
    let has_statics = manifest.len() > 1;
    let (fbsc, cdsc) = if has_statics {
        (
            Some(require_model(&profile.fbsc_model, "fbsc_model")?),
            Some(require_model(&profile.cdsc_model, "cdsc_model")?),
        )
    } else {
        (None, None)
    };

    let mut timed = Vec::with_capacity(manifest.len());
    for c in manifest.components() {
        let (fb_model, cd_model) = if c.class == ComponentClass::BasePage {
            (fbbp, cdbp)
        } else {
            (fbsc.unwrap(), cdsc.unwrap())
        };
        timed.push((
            c,
            model_ms(fb_model, c.size_bytes)?,
            model_ms(cd_model, c.size_bytes)?,
        ));
    }

    let bpe_used = match config.bpe_source {
        BpeSource::Explicit(value) => explicit_bpe(value)?,
        BpeSource::Computed => {
            let static_rows: Vec<&(&HttpComponent, f64, f64)> = timed
                .iter()
                .filter(|(c, _, _)| c.class != ComponentClass::BasePage)
                .collect();
            let mean_size = mean(static_rows.iter().map(|(c, _, _)| c.size_bytes as f64));
            let fb_at_mean = match (fbsc, mean_size) {
                (Some(model), Some(size)) => Some(model.eval_at(size.max(1.0))),
                _ => None,
            };
            computed_bpe(fb_at_mean, mean(static_rows.iter().map(|(_, _, cd)| *cd)))
        }
    };
    assemble(manifest, profile, config, bpe_used, &timed)
}

fn explicit_bpe(value: f64) -> Result<f64> {
    if value.is_nan() || value < 1.0 {
        return Err(Error::Domain(format!(
            "parallel efficiency must be >= 1, got {value}"
        )));
    }
    Ok(value)
}

fn computed_bpe(fb_ms: Option<f64>, avg_cd_ms: Option<f64>) -> f64 {
    match (fb_ms, avg_cd_ms) {
        (Some(fb), Some(cd)) if cd > 0.0 && fb > 0.0 => bpe(BpeInput {
            first_byte_ms: fb,
            avg_cd_ms: cd,
            rounding: Rounding::Raw,
        })
        .expect("positive inputs"),
        // No downloads to overlap with: serial.
        _ => 1.0,
    }
}

fn require_model<'a>(model: &'a Option<SizeTimeModel>, name: &str) -> Result<&'a SizeTimeModel> {
    model
        .as_ref()
        .ok_or_else(|| Error::ProfileIncomplete(name.to_string()))
}

fn model_ms(model: &SizeTimeModel, size_bytes: u64) -> Result<f64> {
    // Log models evaluate at >= 1 byte so zero-size beacons stay legal.
    match model {
        SizeTimeModel::Log { .. } => model.eval(size_bytes.max(1)),
        _ => model.eval(size_bytes),
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut n = 0u64;
    let mut m = 0.0;
    for v in values {
        n += 1;
        m += (v - m) / n as f64;
    }
    (n > 0).then_some(m)
}

fn assemble(
    manifest: &PageManifest,
    profile: &NetworkProfile,
    config: &PredictionConfig,
    bpe_used: f64,
    timed: &[(&HttpComponent, f64, f64)],
) -> Result<PredictionBreakdown> {
    let mut rows = Vec::with_capacity(timed.len());
    let mut static_sum = 0.0;
    let mut base_sum = 0.0;
    for &(component, fb, cd) in timed {
        let parallelizable = classify_parallel(component, manifest);
        let sum_ms = if parallelizable {
            (fb + cd) / bpe_used
        } else {
            fb + cd
        };
        match component.class {
            ComponentClass::BasePage => base_sum += sum_ms,
            _ => static_sum += sum_ms,
        }
        rows.push(BreakdownRow {
            doc_order: component.doc_order,
            url: component.url.clone(),
            class: component.class,
            size_bytes: component.size_bytes,
            parallelizable,
            fb_ms: fb,
            cd_ms: cd,
            sum_ms,
        });
    }

    let (t_dnssc_ms, t_csc_ms) = match config.dns_connect_mode {
        DnsConnectMode::SingleCdn => (profile.t_dnssc_ms, profile.t_csc_ms),
        DnsConnectMode::PerDomainOverBpe => {
            let mut domains: Vec<&str> =
                manifest.statics().map(|c| c.domain_key.as_str()).collect();
            domains.sort_unstable();
            domains.dedup();
            let m = domains.len() as f64;
            (
                m * profile.t_dnssc_ms / bpe_used,
                m * profile.t_csc_ms / bpe_used,
            )
        }
    };

    let t_sr_ms = if config.include_server {
        profile.t_sr_ms
    } else {
        0.0
    };
    let render_ms = if config.include_render {
        render_time(&manifest.aggregates())
    } else {
        0.0
    };

    let total_ms = profile.t_dnsbp_ms
        + profile.t_cbp_ms
        + base_sum
        + t_dnssc_ms
        + t_csc_ms
        + t_sr_ms
        + static_sum
        + render_ms;

    Ok(PredictionBreakdown {
        country: profile.country.clone(),
        rows,
        t_dnsbp_ms: profile.t_dnsbp_ms,
        t_cbp_ms: profile.t_cbp_ms,
        t_dnssc_ms,
        t_csc_ms,
        t_sr_ms,
        render_ms,
        bpe_used,
        total_ms,
    })
}

// --- Rendering ------------------------------------------------------------

const TOTAL_LABEL: &str = "Total Response Time (predicted)";

impl PredictionBreakdown {
    /// Aligned, fixed-precision text table ending with the predicted total.
    pub fn to_table(&self) -> String {
        let url_width = self
            .rows
            .iter()
            .map(|r| r.url.len())
            .chain(["component".len()])
            .max()
            .unwrap_or(9);
        let mut out = String::new();
        out.push_str(&format!(
            "{:>3}  {:<url_width$}  {:<12}  {:>3}  {:>10}  {:>10}  {:>10}\n",
            "#", "component", "class", "par", "fb_ms", "cd_ms", "sum_ms"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:>3}  {:<url_width$}  {:<12}  {:>3}  {:>10.2}  {:>10.2}  {:>10.2}\n",
                row.doc_order,
                row.url,
                row.class.as_str(),
                if row.parallelizable { "yes" } else { "no" },
                row.fb_ms,
                row.cd_ms,
                row.sum_ms,
            ));
        }
        out.push('\n');
        for (label, value) in self.constant_lines() {
            out.push_str(&format!("{label:<34}{value:>12.2}\n"));
        }
        out.push_str(&format!("{TOTAL_LABEL:<34}{:>12.2}\n", self.total_ms));
        out
    }

    /// CSV with the worksheet column set plus the constant rows and total.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["url", "type", "size_bytes", "cd_ms", "fb_ms", "sum_ms"])
            .expect("header writes");
        for row in &self.rows {
            writer
                .write_record([
                    row.url.as_str(),
                    row.class.as_str(),
                    &row.size_bytes.to_string(),
                    &format!("{:.2}", row.cd_ms),
                    &format!("{:.2}", row.fb_ms),
                    &format!("{:.2}", row.sum_ms),
                ])
                .expect("record writes");
        }
        let mut constant = |label: &str, value: f64| {
            writer
                .write_record([label, "", "", "", "", &format!("{value:.2}")])
                .expect("record writes");
        };
        constant("browser_parallel_efficiency", self.bpe_used);
        constant("base_page_dns_ms", self.t_dnsbp_ms);
        constant("base_page_connect_ms", self.t_cbp_ms);
        constant("cdn_dns_ms", self.t_dnssc_ms);
        constant("cdn_connect_ms", self.t_csc_ms);
        constant("server_time_ms", self.t_sr_ms);
        constant("render_ms", self.render_ms);
        constant("total_predicted_ms", self.total_ms);
        String::from_utf8(writer.into_inner().expect("csv buffer")).expect("utf8")
    }

    fn constant_lines(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("Browser parallel efficiency", self.bpe_used),
            ("Base page DNS lookup", self.t_dnsbp_ms),
            ("Base page connect", self.t_cbp_ms),
            ("CDN DNS lookup", self.t_dnssc_ms),
            ("CDN connect", self.t_csc_ms),
            ("Server processing", self.t_sr_ms),
            ("Rendering", self.render_ms),
        ]
    }
}
