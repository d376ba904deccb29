//! Browser behavior models: parallel-download efficiency, the per-component
//! parallelizability rules, and the rendering-time model.

use crate::error::{Error, Result};
use crate::manifest::{ComponentClass, HttpComponent, PageAggregates, PageManifest};
use crate::profile::SizeTimeModel;

/// A component dominating every other static by at least this many bytes
/// gains nothing from parallel download: it is still streaming after the
/// rest have finished.
pub const DOMINANCE_THRESHOLD_BYTES: u64 = 25 * 1024;

/// How to report the parallel-efficiency value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounding {
    /// Full-precision value, used for prediction.
    Raw,
    /// Rounded half-up to a whole connection count, used for validation
    /// against connection-sweep experiments.
    NearestInt,
}

/// Inputs to the parallel-efficiency computation.
#[derive(Debug, Clone, Copy)]
pub struct BpeInput {
    pub first_byte_ms: f64,
    pub avg_cd_ms: f64,
    pub rounding: Rounding,
}

/// Browser parallel-download efficiency: the one in-flight request plus the
/// number of average-sized downloads that fit into its first-byte wait.
/// Always ≥ 1.
pub fn bpe(input: BpeInput) -> Result<f64> {
    if input.avg_cd_ms.is_nan() || input.avg_cd_ms <= 0.0 {
        return Err(Error::Domain(format!(
            "average content download time must be positive, got {}",
            input.avg_cd_ms
        )));
    }
    if input.first_byte_ms.is_nan() || input.first_byte_ms <= 0.0 {
        return Err(Error::Domain(format!(
            "first byte time must be positive, got {}",
            input.first_byte_ms
        )));
    }
    let raw = 1.0 + input.first_byte_ms / input.avg_cd_ms;
    Ok(match input.rounding {
        Rounding::Raw => raw,
        // round() on a positive value is round-half-up
        Rounding::NearestInt => raw.round(),
    })
}

/// Whether a component's transmission benefits from parallel download.
///
/// Three rules, in order of precedence:
/// 1. the base page downloads alone (nothing else is known yet);
/// 2. JavaScript blocks the pipeline regardless of size;
/// 3. a static that is 25+ KB larger than every other static keeps
///    downloading after the rest finish, so parallelism does not help it.
pub fn classify_parallel(component: &HttpComponent, manifest: &PageManifest) -> bool {
    match component.class {
        ComponentClass::BasePage => false,
        ComponentClass::JavaScript => false,
        ComponentClass::OtherStatic => {
            let max_other = manifest
                .statics()
                .filter(|c| c.doc_order != component.doc_order)
                .map(|c| c.size_bytes)
                .max()
                .unwrap_or(0);
            component.size_bytes < max_other + DOMINANCE_THRESHOLD_BYTES
        }
    }
}

/// Rendering complexity class, picked by N = average KB per HTTP request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderClass {
    Simple,
    Medium,
    Complex,
}

impl RenderClass {
    /// Simple when N > 16, Medium when 11 ≤ N ≤ 16, Complex when N < 11.
    pub fn from_avg_kb(n: f64) -> RenderClass {
        if n > 16.0 {
            RenderClass::Simple
        } else if n >= 11.0 {
            RenderClass::Medium
        } else {
            RenderClass::Complex
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            RenderClass::Simple => "simple",
            RenderClass::Medium => "medium",
            RenderClass::Complex => "complex",
        }
    }
}

/// Rendering-time model: one curve per complexity class, evaluated at the
/// total page weight in KB, yielding seconds.
#[derive(Debug, Clone)]
pub struct RenderModel {
    pub simple: SizeTimeModel,
    pub medium: SizeTimeModel,
    pub complex: SizeTimeModel,
}

impl Default for RenderModel {
    fn default() -> Self {
        RenderModel {
            simple: SizeTimeModel::Affine {
                slope: 0.0008,
                intercept: -0.0271,
            },
            medium: SizeTimeModel::Log {
                a: 0.4323,
                b: -2.0771,
            },
            complex: SizeTimeModel::Log {
                a: 0.55,
                b: -2.6079,
            },
        }
    }
}

impl RenderModel {
    /// Rendering time in milliseconds for a page with the given complexity
    /// N and total weight in KB. Sub-KB pages evaluate at 1 KB, which the
    /// log curves map to 0 after clamping.
    pub fn eval_ms(&self, avg_kb_per_request: f64, total_kb: f64) -> f64 {
        let model = match RenderClass::from_avg_kb(avg_kb_per_request) {
            RenderClass::Simple => &self.simple,
            RenderClass::Medium => &self.medium,
            RenderClass::Complex => &self.complex,
        };
        let seconds = model.eval_at(total_kb.max(1.0));
        seconds * 1000.0
    }
}

/// Rendering time in milliseconds for a page, using the default model.
pub fn render_time(aggregates: &PageAggregates) -> f64 {
    RenderModel::default().eval_ms(aggregates.avg_kb_per_request, aggregates.total_kb())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{parse_worksheet_csv, ManifestOptions, PageManifest, RawEntry};

    fn manifest_of(sizes: &[(u64, &str)]) -> PageManifest {
        let mut entries = vec![RawEntry {
            url: "http://base/".into(),
            mime: "text/html".into(),
            size_bytes: 1000,
            ..Default::default()
        }];
        for (i, (size, mime)) in sizes.iter().enumerate() {
            entries.push(RawEntry {
                url: format!("http://cdn/{i}"),
                mime: mime.to_string(),
                size_bytes: *size,
                ..Default::default()
            });
        }
        PageManifest::from_entries(entries, &ManifestOptions::default()).unwrap()
    }

    #[test]
    fn bpe_reproduces_connection_counts() {
        let three = bpe(BpeInput {
            first_byte_ms: 82.59,
            avg_cd_ms: 48.65,
            rounding: Rounding::NearestInt,
        })
        .unwrap();
        assert_eq!(three, 3.0);
        let two = bpe(BpeInput {
            first_byte_ms: 82.59,
            avg_cd_ms: 109.29,
            rounding: Rounding::NearestInt,
        })
        .unwrap();
        assert_eq!(two, 2.0);
    }

    #[test]
    fn bpe_without_first_byte_slack_tends_to_one() {
        let v = bpe(BpeInput {
            first_byte_ms: 0.0001,
            avg_cd_ms: 100.0,
            rounding: Rounding::Raw,
        })
        .unwrap();
        assert!((v - 1.000001).abs() < 1e-12);
    }

    #[test]
    fn bpe_rejects_non_positive_average() {
        let err = bpe(BpeInput {
            first_byte_ms: 10.0,
            avg_cd_ms: 0.0,
            rounding: Rounding::Raw,
        });
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn base_page_never_parallel() {
        let m = manifest_of(&[(100, "image/png")]);
        assert!(!classify_parallel(m.base(), &m));
    }

    #[test]
    fn javascript_never_parallel_regardless_of_size() {
        let m = manifest_of(&[(10, "javascript"), (1_000_000, "javascript")]);
        for c in m.statics() {
            assert!(!classify_parallel(c, &m));
        }
    }

    #[test]
    fn lone_static_dominates_the_empty_set() {
        // With no peers to overlap, a 30 KB static exceeds the 25 KB band.
        let m = manifest_of(&[(30_720, "image/png")]);
        assert!(!classify_parallel(&m.components()[1], &m));
        let m = manifest_of(&[(10_240, "image/png")]);
        assert!(classify_parallel(&m.components()[1], &m));
    }

    #[test]
    fn dominant_static_is_serial() {
        // One 100 KB image among 1 KB images dominates by more than 25 KB.
        let m = manifest_of(&[
            (102_400, "image/png"),
            (1024, "image/png"),
            (1024, "image/png"),
        ]);
        let big = &m.components()[1];
        assert!(!classify_parallel(big, &m));
        assert!(classify_parallel(&m.components()[2], &m));
    }

    #[test]
    fn near_dominant_static_stays_parallel() {
        // 77188 < 68373 + 25600: the sprite rides along with the big script.
        let m = manifest_of(&[(68_373, "javascript"), (77_188, "image/png")]);
        let sprite = &m.components()[2];
        assert!(classify_parallel(sprite, &m));
    }

    #[test]
    fn render_class_boundaries() {
        assert_eq!(RenderClass::from_avg_kb(16.01), RenderClass::Simple);
        assert_eq!(RenderClass::from_avg_kb(16.0), RenderClass::Medium);
        assert_eq!(RenderClass::from_avg_kb(11.0), RenderClass::Medium);
        assert_eq!(RenderClass::from_avg_kb(10.99), RenderClass::Complex);
    }

    #[test]
    fn render_time_simple_page() {
        // 444.9033 KB at N = 16.48: 0.0008 * 444.9033 - 0.0271 = 0.3288 s.
        let model = RenderModel::default();
        let ms = model.eval_ms(16.478, 455_581.0 / 1024.0);
        assert!((ms - 328.8227).abs() < 0.01, "got {ms}");
    }

    #[test]
    fn render_time_complex_page_clamps_at_small_weight() {
        // 0.55 ln(100) - 2.6079 = -0.0751 s, clamped to zero.
        let model = RenderModel::default();
        let ms = model.eval_ms(10.0, 100.0);
        assert_eq!(ms, 0.0);
    }

    #[test]
    fn render_time_medium_clamps_negative() {
        let model = RenderModel::default();
        assert_eq!(model.eval_ms(12.0, 1.0), 0.0);
    }

    #[test]
    fn render_time_on_worksheet_aggregates() {
        let csv = "url,mime,size_bytes,cd_ms,fb_ms\n\
                   http://a/,text/html,455581,,\n";
        let agg = parse_worksheet_csv(csv.as_bytes()).unwrap().aggregates();
        // Single request: N = 444.9 > 16, simple curve at the full weight.
        assert!((render_time(&agg) - 328.8227).abs() < 0.01);
    }
}
