//! Run configuration: parsing with JSON-path error locations, file references,
//! validation, and construction of the world and agents.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::agent::{Agent, AgentParams, Firing, Formation, OperatingProfile, Plasticity, ProfileState};
use crate::align::{AlignMode, AlignOptions, DEFAULT_DELTA, DEFAULT_MAX_EXHAUSTIVE_ALPHABET};
use crate::candidate::{
    enumerate_candidate_space, CandidateError, CandidateSpace, ConditioningBasis, Labeling, PhaseRegistry,
    Resolution,
};
use crate::probkit::IbOptions;
use crate::world::{build_world, World, WorldError, WorldSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("io error at {path}: {message}")]
    Io { path: String, message: String },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("reference error at {path}: {message}")]
    Reference { path: String, message: String },
    #[error("normalization error at {path}: {message}")]
    Normalization { path: String, message: String },
}

impl ConfigError {
    pub fn path(&self) -> &str {
        match self {
            ConfigError::Io { path, .. }
            | ConfigError::Schema { path, .. }
            | ConfigError::Reference { path, .. }
            | ConfigError::Normalization { path, .. } => path,
        }
    }
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn reference(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Reference {
        path: path.into(),
        message: message.into(),
    }
}

/// A constant, or a table keyed by `target/basis/resolution` patterns where
/// any segment may be `*` and `*` alone matches everything. The most specific
/// matching pattern wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScoreTable {
    Constant(f64),
    Keyed(BTreeMap<String, f64>),
}

impl ScoreTable {
    fn constant(v: f64) -> Self {
        ScoreTable::Constant(v)
    }

    /// Value at each registry key; unmatched keys take `fallback`.
    pub fn resolve(&self, keys: &[String], fallback: f64) -> Vec<f64> {
        match self {
            ScoreTable::Constant(v) => vec![*v; keys.len()],
            ScoreTable::Keyed(table) => keys
                .iter()
                .map(|key| {
                    let segments: Vec<&str> = key.split('/').collect();
                    let mut best: Option<(usize, f64)> = None;
                    for (pattern, value) in table {
                        if let Some(spec) = pattern_specificity(pattern, &segments) {
                            if best.is_none_or(|(s, _)| spec > s) {
                                best = Some((spec, *value));
                            }
                        }
                    }
                    best.map_or(fallback, |(_, v)| v)
                })
                .collect(),
        }
    }

    fn values(&self) -> Vec<(Option<&str>, f64)> {
        match self {
            ScoreTable::Constant(v) => vec![(None, *v)],
            ScoreTable::Keyed(t) => t.iter().map(|(k, v)| (Some(k.as_str()), *v)).collect(),
        }
    }
}

fn pattern_specificity(pattern: &str, segments: &[&str]) -> Option<usize> {
    if pattern == "*" {
        return Some(0);
    }
    let parts: Vec<&str> = pattern.split('/').collect();
    if parts.len() != segments.len() {
        return None;
    }
    let mut spec = 0;
    for (p, s) in parts.iter().zip(segments) {
        if *p == "*" {
            continue;
        }
        if p != s {
            return None;
        }
        spec += 1;
    }
    Some(spec)
}

fn zero() -> ScoreTable {
    ScoreTable::constant(0.0)
}

fn one() -> ScoreTable {
    ScoreTable::constant(1.0)
}

fn half() -> ScoreTable {
    ScoreTable::constant(0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    #[serde(default = "zero")]
    pub r: ScoreTable,
    #[serde(default = "zero")]
    pub e: ScoreTable,
    #[serde(default = "zero")]
    pub s: ScoreTable,
    #[serde(default = "one")]
    pub c_err: ScoreTable,
    #[serde(default = "half")]
    pub eta: ScoreTable,
    #[serde(default = "zero")]
    pub sigma: ScoreTable,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        Self {
            r: zero(),
            e: zero(),
            s: zero(),
            c_err: one(),
            eta: half(),
            sigma: zero(),
        }
    }
}

fn default_kappa() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: String,
    #[serde(default)]
    pub profile: ProfileSpec,
    #[serde(default)]
    pub lambda: Plasticity,
    /// Target inclusion weights. Empty means every world target at weight 1.
    #[serde(default)]
    pub chi_op: BTreeMap<String, f64>,
    /// Subset of run basis ids; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bases: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolutions: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<IbOptions>,
    #[serde(default = "default_kappa")]
    pub kappa: usize,
    #[serde(default)]
    pub params: AgentParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSpec {
    pub epsilon: f64,
    pub delta: f64,
    pub align_mode: AlignMode,
    pub max_exhaustive_alphabet: usize,
    pub ib: IbOptions,
}

impl Default for EngineSpec {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            delta: DEFAULT_DELTA,
            align_mode: AlignMode::Exhaustive,
            max_exhaustive_alphabet: DEFAULT_MAX_EXHAUSTIVE_ALPHABET,
            ib: IbOptions::default(),
        }
    }
}

impl EngineSpec {
    pub fn align_options(&self) -> AlignOptions {
        AlignOptions {
            delta: self.delta,
            mode: self.align_mode,
            max_exhaustive_alphabet: self.max_exhaustive_alphabet,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HypothesisId {
    H1,
    H2,
    H3,
    H4,
}

impl HypothesisId {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h1" => Some(HypothesisId::H1),
            "h2" => Some(HypothesisId::H2),
            "h3" => Some(HypothesisId::H3),
            "h4" => Some(HypothesisId::H4),
            _ => None,
        }
    }
}

fn default_margin() -> f64 {
    0.2
}

fn default_probes() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisSpec {
    pub id: HypothesisId,
    pub threshold: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sender: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receiver: Option<String>,
    /// Sender candidate key; the sender's highest-`r` admissible candidate when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sender_candidate: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub steps: usize,
    pub world: WorldSpec,
    pub bases: Vec<ConditioningBasis>,
    pub resolutions: Vec<Resolution>,
    #[serde(default)]
    pub labeling: Labeling,
    #[serde(default)]
    pub engine: EngineSpec,
    #[serde(default)]
    pub agents: Vec<AgentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<HypothesisSpec>,
}

impl RunConfig {
    pub fn to_canonical(&self) -> String {
        crate::canonical::to_canonical_string(self)
    }

    pub fn digest(&self) -> String {
        crate::canonical::digest(self)
    }
}

/// Reads and validates a config file. String values of `world`, of an
/// `agents` entry, and of an agent's `profile` are paths relative to the file
/// that names them.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let mut value = load_json(path, "")?;
    let base = parent_dir(path);
    resolve_references(&mut value, &base)?;
    parse_config_value(value)
}

/// Parses and validates config text that carries no file references.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| schema("", e.to_string()))?;
    parse_config_value(value)
}

pub fn parse_config_value(value: Value) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        schema(path, e.into_inner().to_string())
    })?;
    validate(&cfg)?;
    Ok(cfg)
}

fn parent_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn load_json(path: &Path, at: &str) -> Result<Value, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: if at.is_empty() { path.display().to_string() } else { at.to_string() },
        message: format!("{}: {e}", path.display()),
    })?;
    serde_json::from_str(&text).map_err(|e| schema(at, format!("{}: {e}", path.display())))
}

fn resolve_references(value: &mut Value, base: &Path) -> Result<(), ConfigError> {
    let Some(obj) = value.as_object_mut() else {
        return Ok(());
    };
    if let Some(Value::String(p)) = obj.get("world") {
        let loaded = load_json(&base.join(p), "world")?;
        obj.insert("world".into(), loaded);
    }
    if let Some(Value::Array(agents)) = obj.get_mut("agents") {
        for (i, agent) in agents.iter_mut().enumerate() {
            let mut agent_base = base.to_path_buf();
            if let Value::String(p) = agent {
                let file = base.join(p.as_str());
                agent_base = parent_dir(&file);
                *agent = load_json(&file, &format!("agents[{i}]"))?;
            }
            if let Some(Value::String(p)) = agent.get("profile") {
                let loaded = load_json(&agent_base.join(p), &format!("agents[{i}].profile"))?;
                agent["profile"] = loaded;
            }
        }
    }
    Ok(())
}

fn world_error(err: WorldError) -> ConfigError {
    let message = err.to_string();
    let path = match err.field() {
        Some(f) => format!("world.{f}"),
        None => "world".to_string(),
    };
    match err {
        WorldError::Normalization { .. } => ConfigError::Normalization { path, message },
        _ => schema(path, message),
    }
}

/// Full cross-reference and range validation. Builds the world as a side check.
pub fn validate(cfg: &RunConfig) -> Result<(), ConfigError> {
    let world = build_world(&cfg.world).map_err(world_error)?;
    let mut basis_ids = BTreeSet::new();
    for (i, b) in cfg.bases.iter().enumerate() {
        if !basis_ids.insert(b.id.as_str()) {
            return Err(schema(format!("bases[{i}].id"), format!("duplicate basis id `{}`", b.id)));
        }
        if b.id.contains('/') {
            return Err(schema(format!("bases[{i}].id"), "ids may not contain `/`"));
        }
        b.validate(world.obs_size())
            .map_err(|e| schema(format!("bases[{i}].map"), e.to_string()))?;
    }
    let mut resolution_ids = BTreeSet::new();
    for (i, r) in cfg.resolutions.iter().enumerate() {
        if !resolution_ids.insert(r.id.as_str()) {
            return Err(schema(format!("resolutions[{i}].id"), format!("duplicate resolution id `{}`", r.id)));
        }
        if r.id.contains('/') {
            return Err(schema(format!("resolutions[{i}].id"), "ids may not contain `/`"));
        }
        r.validate().map_err(|e| schema(format!("resolutions[{i}]"), e.to_string()))?;
    }
    for id in cfg.labeling.bases.keys() {
        if !basis_ids.contains(id.as_str()) {
            return Err(reference(format!("labeling.bases.{id}"), format!("unknown basis `{id}`")));
        }
    }
    let e = &cfg.engine;
    if e.epsilon.is_nan() || e.epsilon < 0.0 {
        return Err(schema("engine.epsilon", "must be non-negative"));
    }
    if !(e.delta >= 0.0 && e.delta.is_finite()) {
        return Err(schema("engine.delta", "must be finite and non-negative"));
    }
    let mut agent_ids = BTreeSet::new();
    for (i, a) in cfg.agents.iter().enumerate() {
        if a.id.is_empty() {
            return Err(schema(format!("agents[{i}].id"), "agent id must be non-empty"));
        }
        if !agent_ids.insert(a.id.as_str()) {
            return Err(schema(format!("agents[{i}].id"), format!("duplicate agent id `{}`", a.id)));
        }
        validate_agent(cfg, &world, i, a)?;
    }
    if let Some(h) = &cfg.hypothesis {
        for (field, id) in [("sender", &h.sender), ("receiver", &h.receiver)] {
            if let Some(id) = id {
                if !agent_ids.contains(id.as_str()) {
                    return Err(reference(format!("hypothesis.{field}"), format!("unknown agent `{id}`")));
                }
            }
        }
        if !h.threshold.is_finite() {
            return Err(schema("hypothesis.threshold", "must be finite"));
        }
    }
    Ok(())
}

struct AgentScope<'a> {
    targets: Vec<&'a str>,
    bases: Vec<&'a str>,
    resolutions: Vec<&'a str>,
}

fn agent_scope<'a>(cfg: &'a RunConfig, world: &'a World, i: usize, a: &'a AgentSpec) -> Result<AgentScope<'a>, ConfigError> {
    for (name, w) in &a.chi_op {
        if world.target_index(name).is_err() {
            return Err(reference(format!("agents[{i}].chi_op.{name}"), format!("unknown target `{name}`")));
        }
        if !(w.is_finite() && *w >= 0.0) {
            return Err(schema(format!("agents[{i}].chi_op.{name}"), "weight must be finite and non-negative"));
        }
    }
    let targets = world
        .targets()
        .iter()
        .map(|t| t.name.as_str())
        .filter(|name| a.chi_op.is_empty() || a.chi_op.get(*name).is_some_and(|w| *w > 0.0))
        .collect();
    let pick = |ids: &'a Option<Vec<String>>, all: Vec<&'a str>, field: &str| -> Result<Vec<&'a str>, ConfigError> {
        match ids {
            None => Ok(all),
            Some(ids) => {
                for (j, id) in ids.iter().enumerate() {
                    if !all.contains(&id.as_str()) {
                        return Err(reference(format!("agents[{i}].{field}[{j}]"), format!("unknown id `{id}`")));
                    }
                }
                Ok(all.into_iter().filter(|x| ids.iter().any(|id| id == x)).collect())
            }
        }
    };
    Ok(AgentScope {
        targets,
        bases: pick(&a.bases, cfg.bases.iter().map(|b| b.id.as_str()).collect(), "bases")?,
        resolutions: pick(
            &a.resolutions,
            cfg.resolutions.iter().map(|r| r.id.as_str()).collect(),
            "resolutions",
        )?,
    })
}

/// A score table with its name and optional inclusive bounds.
type TableBounds<'a> = (&'a str, &'a ScoreTable, Option<(f64, f64)>);

fn validate_agent(cfg: &RunConfig, world: &World, i: usize, a: &AgentSpec) -> Result<(), ConfigError> {
    let scope = agent_scope(cfg, world, i, a)?;
    let p = &a.profile;
    let tables: [TableBounds; 6] = [
        ("r", &p.r, None),
        ("e", &p.e, Some((0.0, f64::INFINITY))),
        ("s", &p.s, Some((0.0, f64::INFINITY))),
        ("c_err", &p.c_err, Some((0.0, f64::INFINITY))),
        ("eta", &p.eta, Some((0.0, f64::INFINITY))),
        ("sigma", &p.sigma, Some((0.0, 1.0))),
    ];
    for (name, table, range) in tables {
        for (key, v) in table.values() {
            let path = match key {
                Some(k) => format!("agents[{i}].profile.{name}.{k}"),
                None => format!("agents[{i}].profile.{name}"),
            };
            if let Some(k) = key {
                check_pattern(k, &scope, &path)?;
            }
            let ok = v.is_finite() && range.is_none_or(|(lo, hi)| v >= lo && v <= hi);
            if !ok {
                return Err(schema(path, format!("value {v} out of range")));
            }
        }
    }
    let l = &a.lambda;
    for (name, v) in [("lr_r", l.lr_r), ("lr_sigma", l.lr_sigma), ("lr_eta", l.lr_eta)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(schema(format!("agents[{i}].lambda.{name}"), "must lie in [0, 1]"));
        }
    }
    if a.kappa == 0 {
        return Err(schema(format!("agents[{i}].kappa"), "must be at least 1"));
    }
    for (kind, costs) in &a.params.plan_costs {
        if !costs.is_valid() {
            return Err(schema(
                format!("agents[{i}].params.plan_costs.{}", kind.name()),
                "costs must be finite and non-negative",
            ));
        }
    }
    for (name, t) in [
        ("foreground_temperature", a.params.foreground_temperature),
        ("plan_temperature", a.params.plan_temperature),
    ] {
        if !(t.is_finite() && t >= 0.0) {
            return Err(schema(format!("agents[{i}].params.{name}"), "must be finite and non-negative"));
        }
    }
    Ok(())
}

fn check_pattern(pattern: &str, scope: &AgentScope, path: &str) -> Result<(), ConfigError> {
    if pattern == "*" {
        return Ok(());
    }
    let parts: Vec<&str> = pattern.split('/').collect();
    if parts.len() != 3 {
        return Err(schema(path, "keys are `*` or `target/basis/resolution`"));
    }
    let known = [&scope.targets, &scope.bases, &scope.resolutions];
    let what = ["target", "basis", "resolution"];
    for ((part, ids), what) in parts.iter().zip(known).zip(what) {
        if *part != "*" && !ids.contains(part) {
            return Err(reference(path, format!("unknown {what} `{part}`")));
        }
    }
    Ok(())
}

/// One configured agent with its candidate space.
#[derive(Debug, Clone)]
pub struct PreparedAgent {
    pub agent: Agent,
    pub space: CandidateSpace,
}

/// World and agents built from a validated config. Agents are in id order.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub world: World,
    pub agents: Vec<PreparedAgent>,
}

impl Prepared {
    pub fn agent(&self, id: &str) -> Option<&PreparedAgent> {
        self.agents.iter().find(|a| a.agent.id == id)
    }
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared, ConfigError> {
    validate(cfg)?;
    let world = build_world(&cfg.world).map_err(world_error)?;
    let mut order: Vec<usize> = (0..cfg.agents.len()).collect();
    order.sort_by(|a, b| cfg.agents[*a].id.cmp(&cfg.agents[*b].id));
    let mut agents = Vec::with_capacity(order.len());
    for i in order {
        agents.push(prepare_agent(cfg, &world, i)?);
    }
    Ok(Prepared { world, agents })
}

fn prepare_agent(cfg: &RunConfig, world: &World, i: usize) -> Result<PreparedAgent, ConfigError> {
    let spec = &cfg.agents[i];
    let scope = agent_scope(cfg, world, i, spec)?;
    let targets: Vec<usize> = scope
        .targets
        .iter()
        .map(|t| world.target_index(t).expect("validated target"))
        .collect();
    let bases = cfg.bases.iter().filter(|b| scope.bases.contains(&b.id.as_str())).cloned().collect();
    let resolutions = cfg
        .resolutions
        .iter()
        .filter(|r| scope.resolutions.contains(&r.id.as_str()))
        .cloned()
        .collect();
    let registry = PhaseRegistry::new(world, &targets, bases, resolutions).map_err(|e| match e {
        CandidateError::World(w) => world_error(w),
        other => schema(format!("agents[{i}]"), other.to_string()),
    })?;
    let tau = spec.tau.clone().unwrap_or_else(|| cfg.engine.ib.clone());
    let space = enumerate_candidate_space(world, registry, cfg.engine.epsilon, &tau, cfg.seed);
    let keys = space.registry.keys();
    let p = &spec.profile;
    let chi_op = world
        .targets()
        .iter()
        .map(|t| {
            let w = if spec.chi_op.is_empty() {
                1.0
            } else {
                spec.chi_op.get(&t.name).copied().unwrap_or(0.0)
            };
            (t.name.clone(), w)
        })
        .collect();
    let state = ProfileState {
        theta: OperatingProfile {
            r: p.r.resolve(keys, 0.0),
            e: p.e.resolve(keys, 0.0),
            s: p.s.resolve(keys, 0.0),
        },
        lambda: spec.lambda,
        q: Firing {
            c_err: p.c_err.resolve(keys, 1.0),
            eta: p.eta.resolve(keys, 0.5),
        },
        zeta: Formation {
            chi_op,
            tau,
            kappa: spec.kappa,
        },
        sigma: p.sigma.resolve(keys, 0.0),
    };
    Ok(PreparedAgent {
        agent: Agent {
            id: spec.id.clone(),
            state,
            params: spec.params.clone(),
        },
        space,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    pub(crate) fn minimal() -> Value {
        json!({
            "seed": 3,
            "steps": 5,
            "world": {
                "latents": [{"name": "x", "size": 2}],
                "joint": [0.5, 0.5],
                "targets": [{"name": "Y", "table": [0, 1]}],
                "obs_channel": [0.9, 0.1, 0.2, 0.8],
                "obs_size": 2
            },
            "bases": [{"id": "full", "map": [0, 1]}],
            "resolutions": [{"id": "fine", "cardinality": 2, "beta": 20.0, "horizon": "fine"}],
            "agents": [{"id": "a", "profile": {"r": {"*": 0.5, "Y/full/fine": 2}}}]
        })
    }

    #[test]
    fn minimal_parses_and_round_trips() {
        let cfg = parse_config_value(minimal()).unwrap();
        let text = cfg.to_canonical();
        let again = parse_config_str(&text).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_canonical(), text);
    }

    #[test]
    fn row_normalization_error_names_row() {
        let mut v = minimal();
        v["world"]["obs_channel"] = json!([0.9, 0.1, 0.1, 0.8]);
        let err = parse_config_value(v).unwrap_err();
        assert!(matches!(err, ConfigError::Normalization { .. }), "{err}");
        assert_eq!(err.path(), "world.obs_channel[1]");
    }

    #[test]
    fn unknown_basis_in_profile_key() {
        let mut v = minimal();
        v["agents"][0]["profile"]["r"] = json!({"Y/nope/fine": 1.0});
        let err = parse_config_value(v).unwrap_err();
        assert!(matches!(err, ConfigError::Reference { .. }), "{err}");
        assert_eq!(err.path(), "agents[0].profile.r.Y/nope/fine");
    }

    #[test]
    fn schema_errors_carry_paths() {
        let mut v = minimal();
        v["resolutions"][0]["cardinality"] = json!("two");
        let err = parse_config_value(v).unwrap_err();
        assert_eq!(err.path(), "resolutions[0].cardinality");
        let mut v = minimal();
        v["agents"][0]["bogus"] = json!(1);
        assert!(matches!(parse_config_value(v), Err(ConfigError::Schema { .. })));
    }

    #[test]
    fn score_patterns_pick_most_specific() {
        let keys: Vec<String> = ["Y/a/f", "Y/b/f", "Z/a/c"].iter().map(|s| s.to_string()).collect();
        let t = ScoreTable::Keyed(BTreeMap::from([
            ("*".to_string(), 1.0),
            ("*/a/*".to_string(), 2.0),
            ("Y/a/f".to_string(), 3.0),
        ]));
        assert_eq!(t.resolve(&keys, 0.0), vec![3.0, 1.0, 2.0]);
        let sparse = ScoreTable::Keyed(BTreeMap::from([("Z/a/c".to_string(), 4.0)]));
        assert_eq!(sparse.resolve(&keys, -1.0), vec![-1.0, -1.0, 4.0]);
    }

    #[test]
    fn prepare_builds_agents_in_id_order() {
        let mut v = minimal();
        v["agents"] = json!([{"id": "b"}, {"id": "a", "profile": {"r": 2.0}}]);
        let cfg = parse_config_value(v).unwrap();
        let prepared = prepare(&cfg).unwrap();
        let ids: Vec<&str> = prepared.agents.iter().map(|a| a.agent.id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(prepared.agents[0].agent.state.theta.r, vec![2.0]);
        assert_eq!(prepared.agents[1].agent.state.q.eta, vec![0.5]);
    }

    #[test]
    fn file_references_resolve_relative() {
        let dir = tempfile::tempdir().unwrap();
        let mut v = minimal();
        std::fs::create_dir(dir.path().join("w")).unwrap();
        std::fs::write(dir.path().join("w/world.json"), v["world"].to_string()).unwrap();
        std::fs::write(dir.path().join("agent.json"), json!({"id": "a", "profile": "p.json"}).to_string()).unwrap();
        std::fs::write(dir.path().join("p.json"), json!({"r": 1.5}).to_string()).unwrap();
        v["world"] = json!("w/world.json");
        v["agents"] = json!(["agent.json"]);
        let path = dir.path().join("run.json");
        std::fs::write(&path, v.to_string()).unwrap();
        let cfg = parse_config(&path).unwrap();
        assert_eq!(cfg.agents[0].profile.r, ScoreTable::Constant(1.5));
        let missing = dir.path().join("nope.json");
        assert!(matches!(parse_config(&missing), Err(ConfigError::Io { .. })));
    }
}
