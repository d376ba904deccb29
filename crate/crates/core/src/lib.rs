//! Country-aware end-user web page response time prediction.
//!
//! The crate models what a visitor in a given country experiences when a
//! page loads: last-mile DNS/connect/first-byte/download costs per
//! component, the browser's parallel-download efficiency, and rendering.
//! It fits the network constants and size→time curves from last-mile
//! measurement data, evaluates the closed-form prediction into a
//! per-component worksheet, and cross-checks the parallelism abstraction
//! with a connection-level waterfall simulator.

pub mod browser;
pub mod error;
pub mod fitting;
pub mod manifest;
pub mod predict;
pub mod profile;
pub mod waterfall;

pub use error::{Error, Result};
pub use manifest::{
    parse_har, parse_worksheet_csv, write_worksheet_csv, ComponentClass, HttpComponent,
    ManifestOptions, PageAggregates, PageManifest,
};
pub use predict::{
    compare, predict_from_sizes, predict_worksheet, BpeSource, BreakdownRow, DnsConnectMode,
    PredictionBreakdown, PredictionConfig,
};
pub use profile::{load_profile, save_profile, NetworkProfile, SizeTimeModel};
