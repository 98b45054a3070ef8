//! The multi-agent loop: observe, foreground, choose a plan, act, feed back.
//!
//! Each tick reads a snapshot of every agent, computes all effects against
//! it, then commits the updated profiles together, so agent order cannot leak
//! information within a tick.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::agent::{
    apply_feedback, candidate_errors, foreground, foreground_among, generate_plans, plan_priority,
    prediction_error, select_plan, Agent, AgentError, Feedback, PlanContext, PlanKind, ProfileState,
};
use crate::align::{optimize_alignment, AlignError, AlignOptions, AlignmentClass, AlignmentReport};
use crate::candidate::CandidateSpace;
use crate::config::{prepare, ConfigError, Prepared, RunConfig};
use crate::rng::{self, SimRng};
use crate::world::{draw_observation, sample_observations, World};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("step {step}, agent `{agent}`: {source}")]
    Agent {
        step: usize,
        agent: String,
        #[source]
        source: AgentError,
    },
    #[error("step {step}, agent `{agent}`: {source}")]
    Align {
        step: usize,
        agent: String,
        #[source]
        source: AlignError,
    },
}

/// An agent's world-model state: profile, candidate space, and its own stream.
#[derive(Debug, Clone)]
pub struct AgentRuntime {
    pub agent: Agent,
    pub space: CandidateSpace,
    stream: SimRng,
}

impl AgentRuntime {
    pub fn new(agent: Agent, space: CandidateSpace, seed: u64) -> Self {
        let stream = rng::labeled_stream(seed, &format!("agent:{}", agent.id));
        Self { agent, space, stream }
    }
}

/// What a plan did, beyond the feedback it produced.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Effect {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra_observation: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refired: Option<String>,
    /// The fired candidate's `q(T | ψ(o))`, for Report and Align.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub representation: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alignment: Option<AlignmentReport>,
    /// The aligned representation handed to the peer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delivered: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub step: usize,
    pub agent: String,
    pub observation: usize,
    pub fired: String,
    pub pi: Vec<f64>,
    pub error: f64,
    pub intensity: f64,
    pub crossed: bool,
    pub plan: PlanKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peer: Option<String>,
    pub c_act: f64,
    pub queue: Vec<PlanKind>,
    pub effect: Effect,
    pub feedback: Feedback,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AgentMetrics {
    /// Foregrounding counts per phase key, zero-filled over the agent's registry.
    pub foreground: BTreeMap<String, usize>,
    pub mean_error: f64,
    pub mean_intensity: f64,
    pub crossing_rate: f64,
    pub plan_kinds: BTreeMap<String, usize>,
    pub alignments: usize,
    pub mean_delta_i: f64,
    pub alignment_classes: BTreeMap<String, usize>,
}

impl AgentMetrics {
    pub fn foreground_frequencies(&self) -> BTreeMap<String, f64> {
        let total: usize = self.foreground.values().sum();
        self.foreground
            .iter()
            .map(|(k, c)| (k.clone(), if total == 0 { 0.0 } else { *c as f64 / total as f64 }))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub steps: usize,
    pub agents: BTreeMap<String, AgentMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub config_digest: String,
    pub seed: u64,
    pub events: Vec<Event>,
    pub metrics: Metrics,
}

impl RunRecord {
    pub fn to_canonical(&self) -> String {
        crate::canonical::to_canonical_string(self)
    }

    pub fn digest(&self) -> String {
        crate::canonical::digest(self)
    }
}

pub struct Engine {
    world: World,
    agents: Vec<AgentRuntime>,
    observations: Vec<usize>,
    align: AlignOptions,
}

impl Engine {
    /// Agents must be in id order. `observations` is the shared stream, one per step.
    pub fn new(world: World, agents: Vec<AgentRuntime>, observations: Vec<usize>, align: AlignOptions) -> Self {
        debug_assert!(agents.windows(2).all(|w| w[0].agent.id < w[1].agent.id));
        Self {
            world,
            agents,
            observations,
            align,
        }
    }

    pub fn from_prepared(cfg: &RunConfig, prepared: Prepared) -> Self {
        let observations = sample_observations(&prepared.world, cfg.steps, rng::derive_seed(cfg.seed, "obs")).symbols;
        let agents = prepared
            .agents
            .into_iter()
            .map(|p| AgentRuntime::new(p.agent, p.space, cfg.seed))
            .collect();
        Self::new(prepared.world, agents, observations, cfg.engine.align_options())
    }

    pub fn agents(&self) -> &[AgentRuntime] {
        &self.agents
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn steps(&self) -> usize {
        self.observations.len()
    }

    /// One two-phase tick.
    pub fn step(&mut self, t: usize) -> Result<Vec<Event>, EngineError> {
        let snapshot: Vec<Agent> = self.agents.iter().map(|a| a.agent.clone()).collect();
        let ids: Vec<String> = snapshot.iter().map(|a| a.id.clone()).collect();
        let o = self.observations[t];
        let mut events = Vec::with_capacity(snapshot.len());
        let mut commits = Vec::with_capacity(snapshot.len());
        for i in 0..snapshot.len() {
            let peers: Vec<String> = ids.iter().filter(|id| **id != ids[i]).cloned().collect();
            let (event, state, stream) = self.agent_step(t, o, i, &snapshot, &peers)?;
            events.push(event);
            commits.push((state, stream));
        }
        for (runtime, (state, stream)) in self.agents.iter_mut().zip(commits) {
            runtime.agent.state = state;
            runtime.stream = stream;
        }
        Ok(events)
    }

    fn agent_step(
        &self,
        t: usize,
        o: usize,
        i: usize,
        snapshot: &[Agent],
        peers: &[String],
    ) -> Result<(Event, ProfileState, SimRng), EngineError> {
        let world = &self.world;
        let align_opts = self.align;
        let agent = &snapshot[i];
        let agent_err = |source| EngineError::Agent {
            step: t,
            agent: agent.id.clone(),
            source,
        };
        let space = &self.agents[i].space;
        let peer_spaces: Vec<(&Agent, &CandidateSpace)> = peers
            .iter()
            .map(|p| {
                let j = snapshot.iter().position(|a| &a.id == p).expect("peer exists");
                (&snapshot[j], &self.agents[j].space)
            })
            .collect();
        let mut own_stream = self.agents[i].stream.clone();
        let stream = &mut own_stream;

        let errors = candidate_errors(world, space, o);
        let post = foreground(agent, space, &errors, stream).map_err(agent_err)?;
        let fired = post.fired;
        let candidate = &space.candidates[fired];
        let old_error = errors[fired];
        let horizon = candidate.horizon;

        let plans = generate_plans(agent, &post, peers);
        let priorities: Vec<Option<f64>> = plans
            .iter()
            .map(|plan| {
                if agent.params.forced_plan.is_some_and(|k| k != plan.kind) {
                    return None;
                }
                let row = agent.params.context(plan.kind);
                let ctx = PlanContext {
                    expected_dl: row.gain * finite_or_zero(old_error),
                    u: row.u,
                    c_comp: row.c_comp,
                    c_obs: row.c_obs,
                };
                plan_priority(agent, plan, &ctx, horizon)
            })
            .collect();
        let (plan, queue) = select_plan(agent, &plans, &priorities, stream).map_err(agent_err)?;

        let mut effect = Effect::default();
        let mut new_error = old_error;
        let mut d_phi = 0.0;
        match plan.kind {
            PlanKind::Report => {
                effect.representation = Some(candidate.representation(o).probs().to_vec());
            }
            PlanKind::Suspend => {}
            PlanKind::Reinterpret => {
                let basis = candidate.phase.basis;
                let others: Vec<usize> = space
                    .admissible()
                    .filter(|&x| space.registry.points()[x].basis != basis)
                    .collect();
                if !others.is_empty() {
                    let again = foreground_among(agent, space, &errors, &others, stream).map_err(agent_err)?;
                    effect.refired = Some(space.registry.key(again.fired).to_string());
                    new_error = errors[again.fired];
                }
            }
            PlanKind::Explore | PlanKind::Act => {
                let extra = draw_observation(world, stream);
                effect.extra_observation = Some(extra);
                new_error = prediction_error(world, candidate, extra).unwrap_or(f64::INFINITY);
            }
            PlanKind::Align => {
                let peer_id = plan.peer.as_deref().expect("align plans name a peer");
                let (peer, peer_space) = peer_spaces
                    .iter()
                    .find(|(a, _)| a.id == peer_id)
                    .expect("peer exists");
                let report = optimize_alignment(
                    world,
                    candidate,
                    agent.state.zeta.kappa,
                    &peer.state,
                    peer_space,
                    &align_opts,
                )
                .map_err(|source| EngineError::Align {
                    step: t,
                    agent: agent.id.clone(),
                    source,
                })?;
                let rep = candidate.representation(o);
                effect.delivered = Some(report.channel.channel.push(rep).into_vec());
                effect.representation = Some(rep.probs().to_vec());
                d_phi = -report.delta_i;
                effect.alignment = Some(report);
            }
        }

        let d_l = new_error - old_error;
        let feedback = Feedback {
            d_l: if d_l.is_finite() { d_l } else { 0.0 },
            d_u: agent.params.context(plan.kind).du,
            d_c_act: plan.c_act(),
            d_c_coop: plan.costs.coop,
            d_phi,
        };
        let state = apply_feedback(&agent.state, &agent.params, fired, &feedback, post.intensity);
        let event = Event {
            step: t,
            agent: agent.id.clone(),
            observation: o,
            fired: space.registry.key(fired).to_string(),
            pi: post.pi.probs().to_vec(),
            error: old_error,
            intensity: post.intensity,
            crossed: post.crossed,
            plan: plan.kind,
            peer: plan.peer.clone(),
            c_act: plan.c_act(),
            queue: queue.entries.iter().map(|(p, _)| p.kind).collect(),
            effect,
            feedback,
        };
        Ok((event, state, own_stream))
    }

    pub fn run(&mut self) -> Result<Vec<Event>, EngineError> {
        let mut events = Vec::new();
        for t in 0..self.steps() {
            events.extend(self.step(t)?);
        }
        Ok(events)
    }
}

fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Aggregates per-agent metrics from an event log.
pub fn aggregate(agents: &[AgentRuntime], events: &[Event], steps: usize) -> Metrics {
    let mut out = BTreeMap::new();
    for runtime in agents {
        let id = &runtime.agent.id;
        let mine: Vec<&Event> = events.iter().filter(|e| &e.agent == id).collect();
        let mut m = AgentMetrics {
            foreground: runtime.space.registry.keys().iter().map(|k| (k.clone(), 0)).collect(),
            plan_kinds: PlanKind::ALL.iter().map(|k| (k.name().to_string(), 0)).collect(),
            alignment_classes: [AlignmentClass::Full, AlignmentClass::Partial, AlignmentClass::Severed]
                .iter()
                .map(|c| (format!("{c:?}"), 0))
                .collect(),
            ..AgentMetrics::default()
        };
        let n = mine.len() as f64;
        let mut delta_sum = 0.0;
        for e in &mine {
            *m.foreground.entry(e.fired.clone()).or_default() += 1;
            *m.plan_kinds.entry(e.plan.name().to_string()).or_default() += 1;
            m.mean_error += e.error / n;
            m.mean_intensity += e.intensity / n;
            if e.crossed {
                m.crossing_rate += 1.0 / n;
            }
            if let Some(a) = &e.effect.alignment {
                m.alignments += 1;
                delta_sum += a.delta_i;
                *m.alignment_classes.entry(format!("{:?}", a.class)).or_default() += 1;
            }
        }
        if m.alignments > 0 {
            m.mean_delta_i = delta_sum / m.alignments as f64;
        }
        out.insert(id.clone(), m);
    }
    Metrics { steps, agents: out }
}

/// Validates, builds and runs a config end to end.
pub fn run(cfg: &RunConfig) -> Result<RunRecord, EngineError> {
    let prepared = prepare(cfg)?;
    let mut engine = Engine::from_prepared(cfg, prepared);
    let events = engine.run()?;
    let metrics = aggregate(engine.agents(), &events, cfg.steps);
    Ok(RunRecord {
        config_digest: cfg.digest(),
        seed: cfg.seed,
        events,
        metrics,
    })
}
