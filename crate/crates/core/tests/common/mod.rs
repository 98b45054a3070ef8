//! Helpers shared by integration tests: shipped-config access and a few
//! reference computations kept independent of the library.

#![allow(dead_code)]

use std::path::PathBuf;

use mim_core::config::parse_config;
use mim_core::RunConfig;
use rand::Rng;

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Compares `actual` with the stored golden file, or rewrites it when
/// `MIM_BLESS` is set.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = golden_dir().join(name);
    if std::env::var_os("MIM_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path).map_err(|e| format!("{name}: {e}"))?;
    if expected == actual {
        Ok(())
    } else {
        Err(format!("{name} differs from golden"))
    }
}

pub fn load(rel: &str) -> RunConfig {
    parse_config(&configs_dir().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

/// Every shipped run config, i.e. everything under `scenarios/` and `runs/`.
pub fn shipped_run_configs() -> Vec<String> {
    let mut out = Vec::new();
    for sub in ["scenarios", "runs"] {
        let mut names: Vec<String> = std::fs::read_dir(configs_dir().join(sub))
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n.ends_with(".json"))
            .map(|n| format!("{sub}/{n}"))
            .collect();
        names.sort();
        out.extend(names);
    }
    out
}

/// Mutual information in nats of a row-major `rows × cols` table.
pub fn mi(rows: usize, cols: usize, p: &[f64]) -> f64 {
    let pr: Vec<f64> = (0..rows).map(|r| p[r * cols..(r + 1) * cols].iter().sum()).collect();
    let pc: Vec<f64> = (0..cols).map(|c| (0..rows).map(|r| p[r * cols + c]).sum()).collect();
    let mut total = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let v = p[r * cols + c];
            if v > 0.0 {
                total += v * (v / (pr[r] * pc[c])).ln();
            }
        }
    }
    total
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// Merges the rows of a `rows × cols` table through `map`.
pub fn merge(rows: usize, cols: usize, p: &[f64], map: &[usize], out_rows: usize) -> Vec<f64> {
    let mut q = vec![0.0; out_rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            q[map[r] * cols + c] += p[r * cols + c];
        }
    }
    q
}

/// Every map `0..n → 0..m`, in lexicographic order.
pub fn all_maps(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0; n];
    loop {
        out.push(cur.clone());
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < m {
                break;
            }
            cur[i] = 0;
        }
    }
}

/// Positive random weights, with the occasional exact zero when `sparse`.
pub fn weights(rng: &mut impl Rng, n: usize, sparse: bool) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| if sparse && rng.gen_bool(0.15) { 0.0 } else { rng.gen::<f64>() + 1e-3 })
            .collect();
        if w.iter().any(|v| *v > 0.0) {
            return w;
        }
    }
}
