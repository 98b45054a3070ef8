//! Synthetic discrete generative worlds.
//!
//! A world is an exact joint distribution over a product of named latent
//! alphabets, a family of deterministic targets computed from the latent
//! tuple, and an observation channel from the latent tuple to a single
//! observation alphabet. All induced joints are precomputed at build time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::probkit::{Channel, Dist, JointDist, ProbError, INPUT_TOLERANCE};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("schema error at `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error("normalization error at `{field}`: {message}")]
    Normalization { field: String, message: String },
    #[error("observation {symbol} has zero probability")]
    ZeroProbabilityObservation { symbol: usize },
    #[error("unknown target `{0}`")]
    UnknownTarget(String),
}

impl WorldError {
    /// Field path of schema and normalization errors.
    pub fn field(&self) -> Option<&str> {
        match self {
            Self::Schema { field, .. } | Self::Normalization { field, .. } => Some(field),
            _ => None,
        }
    }
}

/// The on-disk world description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    #[serde(default = "default_world_id")]
    pub id: String,
    pub latents: Vec<LatentSpec>,
    /// Row-major over the latent tuple in declaration order.
    pub joint: Vec<f64>,
    pub targets: Vec<TargetSpec>,
    /// Row-major `p(o | latent tuple)`, `obs_size` columns.
    pub obs_channel: Vec<f64>,
    pub obs_size: usize,
}

fn default_world_id() -> String {
    "world".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatentSpec {
    pub name: String,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub name: String,
    /// Target value for each latent tuple, row-major.
    pub table: Vec<usize>,
    /// Target alphabet size; defaults to `max(table) + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub name: String,
    pub size: usize,
    pub table: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    id: String,
    latents: Vec<LatentSpec>,
    joint: Dist,
    targets: Vec<Target>,
    obs_channel: Channel,
    latent_obs: JointDist,
    obs_marginal: Dist,
    target_obs: Vec<JointDist>,
}

/// A seeded, i.i.d. observation stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationSequence {
    pub symbols: Vec<usize>,
    pub seed: u64,
    pub world_id: String,
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> WorldError {
    WorldError::Schema {
        field: field.into(),
        message: message.into(),
    }
}

fn normalization(field: impl Into<String>, err: ProbError) -> WorldError {
    WorldError::Normalization {
        field: field.into(),
        message: err.to_string(),
    }
}

fn check_table(field: &str, probs: &[f64]) -> Result<(), WorldError> {
    if let Some((i, v)) = probs.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
        return Err(normalization(
            format!("{field}[{i}]"),
            ProbError::InvalidEntry { index: i, value: *v },
        ));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > INPUT_TOLERANCE {
        return Err(normalization(field, ProbError::NotNormalized { sum }));
    }
    Ok(())
}

/// Validates a world description and precomputes its induced joints.
pub fn build_world(spec: &WorldSpec) -> Result<World, WorldError> {
    if spec.latents.is_empty() {
        return Err(schema("latents", "at least one latent variable is required"));
    }
    for (i, l) in spec.latents.iter().enumerate() {
        if l.size == 0 {
            return Err(schema(format!("latents[{i}].size"), "alphabet must be non-empty"));
        }
        if l.name.is_empty() {
            return Err(schema(format!("latents[{i}].name"), "name must be non-empty"));
        }
    }
    let states: usize = spec.latents.iter().map(|l| l.size).product();
    if spec.joint.len() != states {
        return Err(schema(
            "joint",
            format!("expected {states} entries, found {}", spec.joint.len()),
        ));
    }
    check_table("joint", &spec.joint)?;
    let joint = Dist::new(spec.joint.clone()).map_err(|e| normalization("joint", e))?;

    if spec.obs_size == 0 {
        return Err(schema("obs_size", "observation alphabet must be non-empty"));
    }
    if spec.obs_channel.len() != states * spec.obs_size {
        return Err(schema(
            "obs_channel",
            format!(
                "expected {} entries, found {}",
                states * spec.obs_size,
                spec.obs_channel.len()
            ),
        ));
    }
    let rows = spec
        .obs_channel
        .chunks(spec.obs_size)
        .enumerate()
        .map(|(i, row)| {
            let field = format!("obs_channel[{i}]");
            check_table(&field, row)?;
            Dist::new(row.to_vec()).map_err(|e| normalization(field, e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let obs_channel = Channel::new(rows).map_err(|e| normalization("obs_channel", e))?;

    if spec.targets.is_empty() {
        return Err(schema("targets", "at least one target is required"));
    }
    let mut targets = Vec::with_capacity(spec.targets.len());
    for (i, t) in spec.targets.iter().enumerate() {
        if spec.targets[..i].iter().any(|o| o.name == t.name) {
            return Err(schema(format!("targets[{i}].name"), format!("duplicate target `{}`", t.name)));
        }
        if t.table.len() != states {
            return Err(schema(
                format!("targets[{i}].table"),
                format!("expected {states} entries, found {}", t.table.len()),
            ));
        }
        let needed = t.table.iter().max().map_or(1, |m| m + 1);
        let size = t.size.unwrap_or(needed);
        if size < needed {
            return Err(schema(
                format!("targets[{i}].size"),
                format!("table uses value {} outside alphabet of size {size}", needed - 1),
            ));
        }
        targets.push(Target {
            name: t.name.clone(),
            size,
            table: t.table.clone(),
        });
    }

    let latent_obs = JointDist::from_marginal_and_channel(&joint, &obs_channel)
        .map_err(|e| normalization("obs_channel", e))?;
    let obs_marginal = latent_obs.col_marginal();
    let target_obs = targets
        .iter()
        .map(|t| {
            let mut cells = vec![0.0; spec.obs_size * t.size];
            for (l, &y) in t.table.iter().enumerate() {
                for (o, p) in latent_obs.row(l).iter().enumerate() {
                    cells[o * t.size + y] += p;
                }
            }
            JointDist::from_weights(spec.obs_size, t.size, cells)
                .map_err(|e| normalization("obs_channel", e))
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(World {
        id: spec.id.clone(),
        latents: spec.latents.clone(),
        joint,
        targets,
        obs_channel,
        latent_obs,
        obs_marginal,
        target_obs,
    })
}

impl World {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn latents(&self) -> &[LatentSpec] {
        &self.latents
    }

    pub fn latent_states(&self) -> usize {
        self.joint.len()
    }

    pub fn latent_joint(&self) -> &Dist {
        &self.joint
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn target(&self, index: usize) -> &Target {
        &self.targets[index]
    }

    pub fn target_index(&self, name: &str) -> Result<usize, WorldError> {
        self.targets
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| WorldError::UnknownTarget(name.to_string()))
    }

    pub fn obs_size(&self) -> usize {
        self.obs_marginal.len()
    }

    pub fn obs_channel(&self) -> &Channel {
        &self.obs_channel
    }

    pub fn obs_marginal(&self) -> &Dist {
        &self.obs_marginal
    }

    /// `p(latent tuple, o)`.
    pub fn latent_obs_joint(&self) -> &JointDist {
        &self.latent_obs
    }

    /// `p(O, Y)` for a target, rows indexed by observation.
    pub fn obs_target_joint(&self, target: usize) -> &JointDist {
        &self.target_obs[target]
    }

    /// Prior `p(Y)`.
    pub fn target_prior(&self, target: usize) -> Dist {
        self.target_obs[target].col_marginal()
    }

    /// Decomposes a flat latent index into per-variable values.
    pub fn latent_tuple(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.latents.len()];
        for (slot, l) in out.iter_mut().zip(&self.latents).rev() {
            *slot = index % l.size;
            index /= l.size;
        }
        out
    }
}

/// Draws `n` i.i.d. observations from the induced observation marginal.
pub fn sample_observations(w: &World, n: usize, seed: u64) -> ObservationSequence {
    let mut stream = rng::stream(seed);
    let symbols = (0..n).map(|_| draw_observation(w, &mut stream)).collect();
    ObservationSequence {
        symbols,
        seed,
        world_id: w.id.clone(),
    }
}

/// One inverse-CDF draw from the observation marginal.
pub fn draw_observation(w: &World, stream: &mut rng::SimRng) -> usize {
    w.obs_marginal.inverse_cdf(rng::unit(stream))
}

/// Exact Bayes posterior `p(Y | o)`.
pub fn posterior_target(w: &World, target: usize, o: usize) -> Result<Dist, WorldError> {
    if o >= w.obs_size() {
        return Err(WorldError::ZeroProbabilityObservation { symbol: o });
    }
    w.target_obs[target]
        .col_given_row(o)
        .ok_or(WorldError::ZeroProbabilityObservation { symbol: o })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probkit::{entropy, mutual_information};

    pub(crate) fn fully_observed() -> WorldSpec {
        WorldSpec {
            id: "bit".into(),
            latents: vec![LatentSpec { name: "x".into(), size: 2 }],
            joint: vec![0.3, 0.7],
            targets: vec![TargetSpec { name: "y".into(), table: vec![0, 1], size: None }],
            obs_channel: vec![1.0, 0.0, 0.0, 1.0],
            obs_size: 2,
        }
    }

    #[test]
    fn identity_channel_reveals_latent() {
        let w = build_world(&fully_observed()).unwrap();
        let i = mutual_information(w.obs_target_joint(0));
        assert!((i - entropy(w.latent_joint())).abs() < 1e-12);
        let post = posterior_target(&w, 0, 1).unwrap();
        assert_eq!(post.probs(), &[0.0, 1.0]);
    }

    #[test]
    fn independent_observation_carries_nothing() {
        let spec = WorldSpec {
            latents: vec![
                LatentSpec { name: "hidden".into(), size: 2 },
                LatentSpec { name: "seen".into(), size: 2 },
            ],
            joint: vec![0.1, 0.3, 0.15, 0.45],
            targets: vec![TargetSpec { name: "h".into(), table: vec![0, 0, 1, 1], size: None }],
            obs_channel: vec![0.9, 0.1, 0.2, 0.8, 0.9, 0.1, 0.2, 0.8],
            obs_size: 2,
            ..fully_observed()
        };
        let w = build_world(&spec).unwrap();
        assert!(mutual_information(w.obs_target_joint(0)) < 1e-15);
        let prior = w.target_prior(0);
        for o in 0..2 {
            let post = posterior_target(&w, 0, o).unwrap();
            assert!(post.total_variation(&prior) < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_tables_with_field_names() {
        let mut spec = fully_observed();
        spec.obs_channel = vec![1.0, 0.0, 0.5, 0.4];
        let err = build_world(&spec).unwrap_err();
        assert_eq!(err.field(), Some("obs_channel[1]"));

        let mut spec = fully_observed();
        spec.joint = vec![0.3];
        assert_eq!(build_world(&spec).unwrap_err().field(), Some("joint"));

        let mut spec = fully_observed();
        spec.targets[0].table = vec![0, 2];
        spec.targets[0].size = Some(2);
        assert_eq!(build_world(&spec).unwrap_err().field(), Some("targets[0].size"));
    }

    #[test]
    fn zero_probability_observation_is_an_error() {
        let mut spec = fully_observed();
        spec.joint = vec![1.0, 0.0];
        let w = build_world(&spec).unwrap();
        assert_eq!(
            posterior_target(&w, 0, 1),
            Err(WorldError::ZeroProbabilityObservation { symbol: 1 })
        );
    }

    #[test]
    fn sampling_is_seeded() {
        let w = build_world(&fully_observed()).unwrap();
        assert!(sample_observations(&w, 0, 1).symbols.is_empty());
        assert_eq!(sample_observations(&w, 50, 4), sample_observations(&w, 50, 4));
        assert_ne!(sample_observations(&w, 50, 4).symbols, sample_observations(&w, 50, 5).symbols);
    }

    #[test]
    fn fair_binary_law_of_large_numbers() {
        let mut spec = fully_observed();
        spec.joint = vec![0.5, 0.5];
        let w = build_world(&spec).unwrap();
        let seq = sample_observations(&w, 10_000, 2024);
        let zeros = seq.symbols.iter().filter(|s| **s == 0).count() as f64 / 10_000.0;
        assert!((zeros - 0.5).abs() < 0.02, "frequency {zeros}");
    }

    #[test]
    fn latent_tuple_is_row_major() {
        let spec = WorldSpec {
            latents: vec![
                LatentSpec { name: "a".into(), size: 2 },
                LatentSpec { name: "b".into(), size: 3 },
            ],
            joint: vec![1.0 / 6.0; 6],
            targets: vec![TargetSpec { name: "a".into(), table: vec![0, 0, 0, 1, 1, 1], size: None }],
            obs_channel: vec![1.0; 6],
            obs_size: 1,
            ..fully_observed()
        };
        let w = build_world(&spec).unwrap();
        assert_eq!(w.latent_tuple(4), vec![1, 1]);
        assert_eq!(w.latent_tuple(2), vec![0, 2]);
    }
}
