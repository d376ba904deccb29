//! Connection-level download simulator.
//!
//! Schedules components onto k connections greedily in document order and
//! reports the resulting waterfall. The simulator deliberately ignores
//! per-connection DNS/TCP costs (the analytic model carries those as
//! constants): it isolates the overlap of first-byte waits and content
//! downloads, which is exactly what the parallel-efficiency divisor
//! abstracts. It serves as the independent oracle for that abstraction.

use std::io::Read;

use crate::error::{Error, Result};
use crate::manifest::{ComponentClass, PageManifest};

/// One schedulable download.
///
/// `is_js` marks a pipeline barrier: the component may not start until all
/// earlier components have finished, and nothing later starts until it
/// finishes. A base page converted from a manifest carries the same flag,
/// since its HTML must be complete before any static is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimComponent {
    pub doc_order: u32,
    pub fb_ms: f64,
    pub cd_ms: f64,
    pub is_js: bool,
}

impl SimComponent {
    pub fn duration_ms(&self) -> f64 {
        self.fb_ms + self.cd_ms
    }
}

/// Scheduled placement of one component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleEntry {
    pub doc_order: u32,
    pub start_ms: f64,
    pub end_ms: f64,
    pub connection: usize,
}

/// Outcome of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub makespan_ms: f64,
    pub per_component: Vec<ScheduleEntry>,
    pub connections_used: usize,
}

/// Simulates downloading `components` over `k_connections` parallel
/// connections.
///
/// Components start in document order on the connection that frees first
/// (ties go to the lowest connection index), so identical inputs always
/// produce identical schedules.
pub fn simulate(components: &[SimComponent], k_connections: usize) -> Result<SimResult> {
    if k_connections < 1 {
        return Err(Error::Domain(format!(
            "connection count must be >= 1, got {k_connections}"
        )));
    }
    if components.is_empty() {
        return Err(Error::Domain("no components to simulate".into()));
    }

    let mut free_at = vec![0.0_f64; k_connections];
    let mut barrier_floor = 0.0_f64;
    let mut makespan = 0.0_f64;
    let mut schedule = Vec::with_capacity(components.len());
    let mut used = vec![false; k_connections];

    for component in components {
        let (connection, start) = if component.is_js {
            // Barrier: wait for everything in flight, then run alone.
            (0, makespan.max(barrier_floor))
        } else {
            let connection = earliest_connection(&free_at);
            (connection, free_at[connection].max(barrier_floor))
        };
        let end = start + component.duration_ms();
        free_at[connection] = end;
        used[connection] = true;
        if component.is_js {
            barrier_floor = end;
        }
        makespan = makespan.max(end);
        schedule.push(ScheduleEntry {
            doc_order: component.doc_order,
            start_ms: start,
            end_ms: end,
            connection,
        });
    }

    Ok(SimResult {
        makespan_ms: makespan,
        per_component: schedule,
        connections_used: used.iter().filter(|u| **u).count(),
    })
}

// Lowest index wins ties, keeping schedules deterministic.
fn earliest_connection(free_at: &[f64]) -> usize {
    let mut best = 0;
    for (i, &t) in free_at.iter().enumerate().skip(1) {
        if t < free_at[best] {
            best = i;
        }
    }
    best
}

/// Simulates for every connection count 1..=k_max.
pub fn sweep(components: &[SimComponent], k_max: usize) -> Result<Vec<(usize, f64)>> {
    if k_max < 1 {
        return Err(Error::Domain(format!("k_max must be >= 1, got {k_max}")));
    }
    (1..=k_max)
        .map(|k| simulate(components, k).map(|r| (k, r.makespan_ms)))
        .collect()
}

/// Serial time divided by simulated makespan: the parallel speedup the
/// schedule actually achieved. Exactly 1 at k = 1.
pub fn effective_parallelism(components: &[SimComponent], k_connections: usize) -> Result<f64> {
    let result = simulate(components, k_connections)?;
    if result.makespan_ms <= 0.0 {
        return Err(Error::Domain(
            "makespan is zero; nothing was downloaded".into(),
        ));
    }
    // Same left-to-right order as the k = 1 schedule accumulation, so the
    // serial baseline divides to exactly 1.0.
    let serial: f64 = components.iter().fold(0.0, |acc, c| acc + c.duration_ms());
    Ok(serial / result.makespan_ms)
}

/// Converts a measured page manifest into simulator components: measured
/// first-byte/content-download times, barrier semantics for the base page
/// and for JavaScript.
pub fn sim_components_from_manifest(manifest: &PageManifest) -> Result<Vec<SimComponent>> {
    manifest
        .components()
        .iter()
        .map(|c| {
            let (fb, cd) = match (c.measured_fb_ms, c.measured_cd_ms) {
                (Some(fb), Some(cd)) => (fb, cd),
                _ => return Err(Error::IncompleteManifest(c.doc_order)),
            };
            Ok(SimComponent {
                doc_order: c.doc_order,
                fb_ms: fb,
                cd_ms: cd,
                is_js: matches!(
                    c.class,
                    ComponentClass::BasePage | ComponentClass::JavaScript
                ),
            })
        })
        .collect()
}

// --- Component CSV --------------------------------------------------------

const SIM_HEADER: [&str; 4] = ["doc_order", "fb_ms", "cd_ms", "is_js"];

/// Reads a synthetic component list (`doc_order,fb_ms,cd_ms,is_js`).
pub fn read_sim_csv<R: Read>(reader: R) -> Result<Vec<SimComponent>> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv_reader.headers().map_err(|e| Error::Parse {
        location: "row 1".into(),
        detail: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != SIM_HEADER {
        return Err(Error::Parse {
            location: "row 1".into(),
            detail: format!("expected header `{}`", SIM_HEADER.join(",")),
        });
    }
    let mut components = Vec::new();
    for (index, record) in csv_reader.records().enumerate() {
        let row = index + 2;
        let record = record.map_err(|e| Error::Parse {
            location: format!("row {row}"),
            detail: e.to_string(),
        })?;
        let doc_order: u32 = record[0].parse().map_err(|_| Error::Parse {
            location: format!("row {row}"),
            detail: format!("doc_order `{}` is not an integer", &record[0]),
        })?;
        let ms = |i: usize, name: &str| -> Result<f64> {
            let v: f64 = record[i].parse().map_err(|_| Error::Parse {
                location: format!("row {row}"),
                detail: format!("{name} `{}` is not a number", &record[i]),
            })?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Parse {
                    location: format!("row {row}"),
                    detail: format!("{name} must be finite and non-negative"),
                });
            }
            Ok(v)
        };
        let is_js = match &record[3] {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::Parse {
                    location: format!("row {row}"),
                    detail: format!("is_js must be `true` or `false`, got `{other}`"),
                })
            }
        };
        if components
            .iter()
            .any(|c: &SimComponent| c.doc_order == doc_order)
        {
            return Err(Error::Parse {
                location: format!("row {row}"),
                detail: format!("duplicate doc_order {doc_order}"),
            });
        }
        components.push(SimComponent {
            doc_order,
            fb_ms: ms(1, "fb_ms")?,
            cd_ms: ms(2, "cd_ms")?,
            is_js,
        });
    }
    Ok(components)
}

/// Renders a schedule as CSV (`doc_order,start_ms,end_ms,connection_index`).
pub fn schedule_csv(result: &SimResult) -> String {
    let mut out = String::from("doc_order,start_ms,end_ms,connection_index\n");
    for entry in &result.per_component {
        out.push_str(&format!(
            "{},{:.2},{:.2},{}\n",
            entry.doc_order, entry.start_ms, entry.end_ms, entry.connection
        ));
    }
    out
}
