//! The candidate sufficient-statistic space.
//!
//! A candidate is a target `Y`, a conditioning basis `ψ` (a deterministic
//! partition of the observation alphabet), a resolution `ρ` and the encoder
//! `T` the bottleneck solver builds for that triple. Forgetting the encoder
//! leaves a phase point `(Y, ψ, ρ)`; the agent's score fields live on those.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::probkit::{ib_solve, Channel, Dist, IbOptions, ProbError};
use crate::rng;
use crate::world::{World, WorldError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CandidateError {
    #[error("basis `{id}`: {message}")]
    InvalidBasis { id: String, message: String },
    #[error("resolution `{id}`: {message}")]
    InvalidResolution { id: String, message: String },
    #[error("phase point `{key}` has no coarse label")]
    UnlabeledPhase { key: String },
    #[error("score table has {found} entries for {expected} phase points")]
    FieldLength { expected: usize, found: usize },
    #[error(transparent)]
    World(#[from] WorldError),
}

/// `ψ`: observation symbol → feature symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditioningBasis {
    pub id: String,
    pub map: Vec<usize>,
}

impl ConditioningBasis {
    pub fn identity(id: impl Into<String>, obs_size: usize) -> Self {
        Self {
            id: id.into(),
            map: (0..obs_size).collect(),
        }
    }

    pub fn features(&self) -> usize {
        self.map.iter().max().map_or(0, |m| m + 1)
    }

    pub fn validate(&self, obs_size: usize) -> Result<(), CandidateError> {
        let fail = |message: String| CandidateError::InvalidBasis {
            id: self.id.clone(),
            message,
        };
        if self.map.len() != obs_size {
            return Err(fail(format!(
                "map has {} entries for an observation alphabet of {obs_size}",
                self.map.len()
            )));
        }
        if self.features() > obs_size {
            return Err(fail("feature alphabet exceeds the observation alphabet".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Horizon {
    Fine,
    Coarse,
}

/// `ρ`: representation cardinality cap, bottleneck trade-off and horizon tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    pub id: String,
    pub cardinality: usize,
    pub beta: f64,
    pub horizon: Horizon,
}

impl Resolution {
    pub fn validate(&self) -> Result<(), CandidateError> {
        if self.cardinality == 0 {
            return Err(CandidateError::InvalidResolution {
                id: self.id.clone(),
                message: "cardinality must be at least 1".into(),
            });
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(CandidateError::InvalidResolution {
                id: self.id.clone(),
                message: "beta must be finite and non-negative".into(),
            });
        }
        Ok(())
    }
}

/// `(Y, ψ, ρ)` as indices: `target` into the world's targets, `basis` and
/// `resolution` into the registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PhasePoint {
    pub target: usize,
    pub basis: usize,
    pub resolution: usize,
}

/// The targets, bases and resolutions an agent works with, and the phase
/// points they span in `(target, basis, resolution)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRegistry {
    target_names: Vec<String>,
    targets: Vec<usize>,
    bases: Vec<ConditioningBasis>,
    resolutions: Vec<Resolution>,
    points: Vec<PhasePoint>,
    keys: Vec<String>,
}

impl PhaseRegistry {
    pub fn new(
        world: &World,
        targets: &[usize],
        bases: Vec<ConditioningBasis>,
        resolutions: Vec<Resolution>,
    ) -> Result<Self, CandidateError> {
        for b in &bases {
            b.validate(world.obs_size())?;
        }
        for r in &resolutions {
            r.validate()?;
        }
        let mut points = Vec::new();
        let mut keys = Vec::new();
        for &t in targets {
            for (bi, b) in bases.iter().enumerate() {
                for (ri, r) in resolutions.iter().enumerate() {
                    points.push(PhasePoint {
                        target: t,
                        basis: bi,
                        resolution: ri,
                    });
                    keys.push(phase_key(&world.target(t).name, &b.id, &r.id));
                }
            }
        }
        Ok(Self {
            target_names: targets.iter().map(|&t| world.target(t).name.clone()).collect(),
            targets: targets.to_vec(),
            bases,
            resolutions,
            points,
            keys,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[PhasePoint] {
        &self.points
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn key(&self, index: usize) -> &str {
        &self.keys[index]
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.keys.iter().position(|k| k == key)
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn target_names(&self) -> &[String] {
        &self.target_names
    }

    pub fn bases(&self) -> &[ConditioningBasis] {
        &self.bases
    }

    pub fn resolutions(&self) -> &[Resolution] {
        &self.resolutions
    }

    pub fn basis(&self, point: PhasePoint) -> &ConditioningBasis {
        &self.bases[point.basis]
    }

    pub fn resolution(&self, point: PhasePoint) -> &Resolution {
        &self.resolutions[point.resolution]
    }
}

pub fn phase_key(target: &str, basis: &str, resolution: &str) -> String {
    format!("{target}/{basis}/{resolution}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Admissibility gap in nats.
    pub gap: f64,
    pub i_ot: f64,
    pub i_ty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub key: String,
    pub phase: PhasePoint,
    pub basis_map: Vec<usize>,
    pub horizon: Horizon,
    /// Feature symbol → representation symbol.
    pub encoder: Channel,
    /// `p(Y | t)` per representation symbol.
    pub decoder: Vec<Dist>,
    pub diagnostics: Diagnostics,
    pub converged: bool,
}

impl Candidate {
    pub fn target(&self) -> usize {
        self.phase.target
    }

    pub fn representation_size(&self) -> usize {
        self.encoder.outputs()
    }

    /// `q(T | ψ(o))`.
    pub fn representation(&self, o: usize) -> &Dist {
        self.encoder.row(self.basis_map[o])
    }

    /// Observation → representation channel.
    pub fn obs_encoder(&self) -> Channel {
        Channel::new(self.basis_map.iter().map(|&f| self.encoder.row(f).clone()).collect())
            .expect("encoder rows share an alphabet")
    }

    /// `E_{t ~ q(·|ψ(o))} KL(p(Y|o) ‖ q(Y|t))` for a given posterior.
    pub fn pointwise_error(&self, posterior: &Dist, o: usize) -> Result<f64, ProbError> {
        let mut total = 0.0;
        for (t, &w) in self.representation(o).probs().iter().enumerate() {
            if w > 0.0 {
                total += w * crate::probkit::kl_divergence(posterior, &self.decoder[t])?;
            }
        }
        Ok(total)
    }

    /// Joint `p(T, Y)` of the representation and the candidate's target.
    pub fn representation_joint(&self, world: &World) -> crate::probkit::JointDist {
        world
            .obs_target_joint(self.phase.target)
            .map_rows(&self.obs_encoder())
    }
}

/// Forms `p(ψ(O), Y)`, runs the bottleneck solver at `ρ` and attaches the
/// Bayes decoder and admissibility diagnostics.
pub fn build_encoder(
    world: &World,
    phase: PhasePoint,
    basis: &ConditioningBasis,
    resolution: &Resolution,
    opts: &IbOptions,
    seed: u64,
) -> Candidate {
    let target = phase.target;
    let features = basis.features();
    let joint = world.obs_target_joint(target).merge_rows(&basis.map, features);
    let result = ib_solve(&joint, resolution.cardinality, resolution.beta, opts, seed);
    let mut candidate = Candidate {
        key: phase_key(&world.target(target).name, &basis.id, &resolution.id),
        phase,
        basis_map: basis.map.clone(),
        horizon: resolution.horizon,
        encoder: result.encoder,
        decoder: result.decoder,
        diagnostics: Diagnostics {
            gap: 0.0,
            i_ot: result.i_ot,
            i_ty: result.i_ty,
        },
        converged: result.converged,
    };
    candidate.diagnostics.gap = admissibility_gap(world, &candidate);
    candidate
}

/// `E_o E_{t|ψ(o)} KL(p(Y|o) ‖ q(Y|t))`, by exact summation. With a Bayes
/// decoder this equals `I(Y;O) − I(Y;T)`.
pub fn admissibility_gap(world: &World, c: &Candidate) -> f64 {
    let joint = world.obs_target_joint(c.phase.target);
    let marginal = world.obs_marginal();
    let mut gap = 0.0;
    for o in 0..world.obs_size() {
        let po = marginal.get(o);
        if po <= 0.0 {
            continue;
        }
        let posterior = joint.col_given_row(o).expect("positive row mass");
        gap += po * c.pointwise_error(&posterior, o).unwrap_or(f64::INFINITY);
    }
    gap
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseEntry {
    pub key: String,
    pub point: PhasePoint,
    pub admissible: bool,
}

/// `𝒞`: one candidate per phase point of a registry, flagged by `gap ≤ ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSpace {
    pub registry: PhaseRegistry,
    pub candidates: Vec<Candidate>,
    pub epsilon: f64,
    pub phases: Vec<PhaseEntry>,
}

impl CandidateSpace {
    pub fn admissible(&self) -> impl Iterator<Item = usize> + '_ {
        self.phases
            .iter()
            .enumerate()
            .filter(|(_, p)| p.admissible)
            .map(|(i, _)| i)
    }

    pub fn admissible_indices(&self) -> Vec<usize> {
        self.admissible().collect()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.key == key)
    }
}

/// Seed used for the candidate at `key`; independent of enumeration order.
pub fn candidate_seed(seed: u64, key: &str) -> u64 {
    rng::derive_seed(seed, &format!("candidate:{key}"))
}

/// Builds every `(Y, ψ, ρ)` of the registry in fixed order and flags admissibility.
pub fn enumerate_candidate_space(
    world: &World,
    registry: PhaseRegistry,
    epsilon: f64,
    opts: &IbOptions,
    seed: u64,
) -> CandidateSpace {
    let candidates: Vec<Candidate> = registry
        .points()
        .iter()
        .zip(registry.keys())
        .map(|(&point, key)| {
            build_encoder(
                world,
                point,
                registry.basis(point),
                registry.resolution(point),
                opts,
                candidate_seed(seed, key),
            )
        })
        .collect();
    let phases = candidates
        .iter()
        .map(|c| PhaseEntry {
            key: c.key.clone(),
            point: c.phase,
            admissible: c.diagnostics.gap <= epsilon,
        })
        .collect();
    CandidateSpace {
        registry,
        candidates,
        epsilon,
        phases,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Empirical,
    Ideational,
    Structural,
    Existential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Explorative,
    Stabilizing,
}

/// One of the eight coarse elements (domain × direction).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CoarseLabel {
    pub domain: Domain,
    pub direction: Direction,
}

impl CoarseLabel {
    pub const ALL: [CoarseLabel; 8] = {
        use Direction::*;
        use Domain::*;
        [
            CoarseLabel { domain: Empirical, direction: Explorative },
            CoarseLabel { domain: Empirical, direction: Stabilizing },
            CoarseLabel { domain: Ideational, direction: Explorative },
            CoarseLabel { domain: Ideational, direction: Stabilizing },
            CoarseLabel { domain: Structural, direction: Explorative },
            CoarseLabel { domain: Structural, direction: Stabilizing },
            CoarseLabel { domain: Existential, direction: Explorative },
            CoarseLabel { domain: Existential, direction: Stabilizing },
        ]
    };

    /// Position in the fixed tie order.
    pub fn ordinal(self) -> usize {
        self.domain as usize * 2 + self.direction as usize
    }

    /// Conventional two-letter name (Se, Si, Ne, Ni, Te, Ti, Fe, Fi).
    pub fn short_name(self) -> &'static str {
        ["Se", "Si", "Ne", "Ni", "Te", "Ti", "Fe", "Fi"][self.ordinal()]
    }
}

impl fmt::Display for CoarseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Config-supplied map from bases to domains and horizons to directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Labeling {
    #[serde(default)]
    pub bases: BTreeMap<String, Domain>,
    #[serde(default = "default_horizons")]
    pub horizons: BTreeMap<Horizon, Direction>,
}

fn default_horizons() -> BTreeMap<Horizon, Direction> {
    BTreeMap::from([
        (Horizon::Fine, Direction::Stabilizing),
        (Horizon::Coarse, Direction::Explorative),
    ])
}

impl Default for Labeling {
    fn default() -> Self {
        Self {
            bases: BTreeMap::new(),
            horizons: default_horizons(),
        }
    }
}

pub fn coarse_label(
    registry: &PhaseRegistry,
    phase: usize,
    labeling: &Labeling,
) -> Result<CoarseLabel, CandidateError> {
    let point = registry.points()[phase];
    let unlabeled = || CandidateError::UnlabeledPhase {
        key: registry.key(phase).to_string(),
    };
    let domain = *labeling.bases.get(&registry.basis(point).id).ok_or_else(unlabeled)?;
    let direction = *labeling
        .horizons
        .get(&registry.resolution(point).horizon)
        .ok_or_else(unlabeled)?;
    Ok(CoarseLabel { domain, direction })
}

/// `Γ`: coarse labels ranked by mean foregrounding score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintSequence {
    pub ranking: Vec<(CoarseLabel, f64)>,
}

impl ConstraintSequence {
    pub fn first(&self) -> Option<CoarseLabel> {
        self.ranking.first().map(|(l, _)| *l)
    }
}

/// Per-label means of `field`, for labels that own at least one phase point.
fn label_means(
    field: &[f64],
    registry: &PhaseRegistry,
    labeling: &Labeling,
) -> Result<(Vec<usize>, [Option<f64>; 8]), CandidateError> {
    if field.len() != registry.len() {
        return Err(CandidateError::FieldLength {
            expected: registry.len(),
            found: field.len(),
        });
    }
    let mut sums = [0.0; 8];
    let mut counts = [0usize; 8];
    let mut assignment = Vec::with_capacity(field.len());
    for (i, v) in field.iter().enumerate() {
        let label = coarse_label(registry, i, labeling)?.ordinal();
        sums[label] += v;
        counts[label] += 1;
        assignment.push(label);
    }
    let mut means = [None; 8];
    for l in 0..8 {
        if counts[l] > 0 {
            means[l] = Some(sums[l] / counts[l] as f64);
        }
    }
    Ok((assignment, means))
}

/// Ranks populated labels by descending mean of `r`; ties keep the fixed order.
pub fn constraint_sequence(
    r: &[f64],
    registry: &PhaseRegistry,
    labeling: &Labeling,
) -> Result<ConstraintSequence, CandidateError> {
    let (_, means) = label_means(r, registry, labeling)?;
    let mut ranking: Vec<(CoarseLabel, f64)> = CoarseLabel::ALL
        .iter()
        .zip(means)
        .filter_map(|(l, m)| m.map(|m| (*l, m)))
        .collect();
    // Stable sort keeps the fixed label order among equal strengths.
    ranking.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite scores"));
    Ok(ConstraintSequence { ranking })
}

/// `ε_d`: mean squared deviation of `r` from its per-label means.
pub fn lowdim_reconstruction_error(
    r: &[f64],
    registry: &PhaseRegistry,
    labeling: &Labeling,
) -> Result<f64, CandidateError> {
    if r.is_empty() {
        return Ok(0.0);
    }
    let (assignment, means) = label_means(r, registry, labeling)?;
    let total: f64 = r
        .iter()
        .zip(&assignment)
        .map(|(v, l)| {
            let d = v - means[*l].expect("assigned labels are populated");
            d * d
        })
        .sum();
    Ok(total / r.len() as f64)
}
