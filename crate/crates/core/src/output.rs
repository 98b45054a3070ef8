//! Metrics and curve files. Every file is written to a temp file in the
//! target directory and renamed into place.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::canonical::{format_float, to_canonical_string};
use crate::engine::{Metrics, RunRecord};
use crate::scenarios::HypothesisOutcome;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub series: String,
    pub x: f64,
    pub y: f64,
}

impl CurvePoint {
    pub fn new(series: impl Into<String>, x: f64, y: f64) -> Self {
        Self {
            series: series.into(),
            x,
            y,
        }
    }
}

/// Per-agent error, intensity and alignment-loss traces, grouped by series.
pub fn record_curves(record: &RunRecord) -> Vec<CurvePoint> {
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for e in &record.events {
        let x = e.step as f64;
        series.entry(format!("error:{}", e.agent)).or_default().push((x, e.error));
        series.entry(format!("intensity:{}", e.agent)).or_default().push((x, e.intensity));
        if let Some(a) = &e.effect.alignment {
            series.entry(format!("delta_i:{}", e.agent)).or_default().push((x, a.delta_i));
        }
    }
    series
        .into_iter()
        .flat_map(|(name, pts)| pts.into_iter().map(move |(x, y)| CurvePoint::new(name.clone(), x, y)))
        .collect()
}

pub fn curves_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("series,x,y\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", csv_field(&p.series), format_float(p.x), format_float(p.y)));
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Serialize)]
struct MetricsDocument<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    config_digest: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    record_digest: Option<String>,
    metrics: &'a Metrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    hypothesis: Option<&'a HypothesisOutcome>,
}

/// Canonical `metrics.json` content.
pub fn metrics_json(record: Option<&RunRecord>, outcome: Option<&HypothesisOutcome>) -> String {
    let empty = Metrics::default();
    to_canonical_string(&MetricsDocument {
        config_digest: record.map(|r| r.config_digest.as_str()),
        record_digest: record.map(RunRecord::digest),
        metrics: record.map_or(&empty, |r| &r.metrics),
        hypothesis: outcome,
    })
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Writes `metrics.json` and `curves.csv` into `dir`, creating it if needed.
pub fn emit_metrics(
    record: Option<&RunRecord>,
    outcome: Option<&HypothesisOutcome>,
    curves: &[CurvePoint],
    dir: &Path,
) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let metrics = dir.join("metrics.json");
    let csv = dir.join("curves.csv");
    write_atomic(&metrics, metrics_json(record, outcome).as_bytes())?;
    write_atomic(&csv, curves_csv(curves).as_bytes())?;
    Ok(vec![metrics, csv])
}
