//! Fixtures for the kernel benchmarks under `benches/`.

use std::path::PathBuf;

use mim_core::config::{parse_config, prepare, Prepared};
use mim_core::RunConfig;

/// Loads a config shipped under the workspace `configs/` directory.
pub fn shipped(rel: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(rel);
    parse_config(&path).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn prepared(rel: &str) -> (RunConfig, Prepared) {
    let cfg = shipped(rel);
    let prepared = prepare(&cfg).expect("shipped configs validate");
    (cfg, prepared)
}
