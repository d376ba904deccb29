//! Per-country network profiles.
//!
//! A profile carries one constant or one size→time model for every network
//! term of the transmission-time decomposition: base-page DNS/connect,
//! base-page first-byte and content-download, CDN DNS/connect, static
//! first-byte and content-download, plus the fixed server-processing
//! constant. Profiles are persisted as flat JSON documents with a strict
//! key set so that schema drift surfaces loudly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fitted size→time relation, evaluated in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase", deny_unknown_fields)]
pub enum SizeTimeModel {
    /// y = slope·x + intercept, slope in ms per byte.
    Affine { slope: f64, intercept: f64 },
    /// y = a·ln(x) + b, defined for x ≥ 1.
    Log { a: f64, b: f64 },
    /// Size-independent constant.
    Constant { c: f64 },
}

impl SizeTimeModel {
    /// Evaluates the model at a byte size, clamping the result to ≥ 0.
    ///
    /// The `Log` form is undefined at size 0 and reports a domain error.
    pub fn eval(&self, size_bytes: u64) -> Result<f64> {
        if matches!(self, SizeTimeModel::Log { .. }) && size_bytes == 0 {
            return Err(Error::Domain(
                "log model is undefined at size 0; sizes must be >= 1 byte".into(),
            ));
        }
        Ok(self.eval_at(size_bytes as f64))
    }

    /// Evaluates at a real-valued x without domain checks; callers must
    /// guarantee x ≥ 1 for the `Log` form. Result is clamped to ≥ 0.
    pub fn eval_at(&self, x: f64) -> f64 {
        let raw = match *self {
            SizeTimeModel::Affine { slope, intercept } => slope * x + intercept,
            SizeTimeModel::Log { a, b } => a * x.ln() + b,
            SizeTimeModel::Constant { c } => c,
        };
        raw.max(0.0)
    }
}

/// Fitted network parameters for one country.
///
/// `fbbp_model` is network-only: server processing is never folded into the
/// first-byte model and is always added separately through `t_sr_ms`.
/// Model slots are `None` when the underlying measurement fit is not
/// available; size-mode prediction reports which slot it is missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkProfile {
    pub country: String,
    pub t_dnsbp_ms: f64,
    pub t_cbp_ms: f64,
    pub fbbp_model: Option<SizeTimeModel>,
    pub cdbp_model: Option<SizeTimeModel>,
    pub t_dnssc_ms: f64,
    pub t_csc_ms: f64,
    pub fbsc_model: Option<SizeTimeModel>,
    pub cdsc_model: Option<SizeTimeModel>,
    pub t_sr_ms: f64,
}

/// Default server-processing allowance in milliseconds.
pub const DEFAULT_SERVER_TIME_MS: f64 = 200.0;

const PROFILE_KEYS: [&str; 10] = [
    "country",
    "t_dnsbp_ms",
    "t_cbp_ms",
    "fbbp_model",
    "cdbp_model",
    "t_dnssc_ms",
    "t_csc_ms",
    "fbsc_model",
    "cdsc_model",
    "t_sr_ms",
];

impl NetworkProfile {
    /// An empty profile for `country` with all constants zero, no models,
    /// and the default 200 ms server time.
    pub fn new(country: &str) -> Self {
        NetworkProfile {
            country: country.to_string(),
            t_dnsbp_ms: 0.0,
            t_cbp_ms: 0.0,
            fbbp_model: None,
            cdbp_model: None,
            t_dnssc_ms: 0.0,
            t_csc_ms: 0.0,
            fbsc_model: None,
            cdsc_model: None,
            t_sr_ms: DEFAULT_SERVER_TIME_MS,
        }
    }

    /// Checks value constraints: every constant must be finite and ≥ 0.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("t_dnsbp_ms", self.t_dnsbp_ms),
            ("t_cbp_ms", self.t_cbp_ms),
            ("t_dnssc_ms", self.t_dnssc_ms),
            ("t_csc_ms", self.t_csc_ms),
            ("t_sr_ms", self.t_sr_ms),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::Validation(format!(
                    "`{name}` must be a finite non-negative number, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Decodes a profile file, rejecting missing and unknown keys by name.
pub fn load_profile(bytes: &[u8]) -> Result<NetworkProfile> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(json_parse_error)?;
    let object = value.as_object().ok_or_else(|| Error::Parse {
        location: "byte 0".into(),
        detail: "profile file must be a JSON object".into(),
    })?;
    for key in PROFILE_KEYS {
        if !object.contains_key(key) {
            return Err(Error::Schema(key.to_string()));
        }
    }
    for key in object.keys() {
        if !PROFILE_KEYS.contains(&key.as_str()) {
            return Err(Error::Schema(key.clone()));
        }
    }
    let profile: NetworkProfile =
        serde_json::from_value(value).map_err(|e| Error::Validation(e.to_string()))?;
    profile.validate()?;
    Ok(profile)
}

/// Encodes a profile losslessly; `load_profile(save_profile(p)) == p`.
pub fn save_profile(profile: &NetworkProfile) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(profile).expect("profile serializes");
    out.push(b'\n');
    out
}

fn json_parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        location: format!("line {}, column {}", e.line(), e.column()),
        detail: e.to_string(),
    }
}
