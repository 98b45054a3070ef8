//! Runnable realizations of the four hypotheses as fixed-threshold tests.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::agent::{leading_candidate, Agent, PlanKind};
use crate::align::{
    alignment_problem, directional_compatibility, processability, solve_exhaustive, solve_greedy, AlignError,
    AlignMode,
};
use crate::candidate::{Candidate, CandidateSpace};
use crate::config::{prepare, ConfigError, HypothesisId, HypothesisSpec, PreparedAgent, Prepared, RunConfig};
use crate::engine::{run, EngineError, RunRecord};
use crate::probkit::{kl_divergence, Dist};
use crate::rng;
use crate::world::{draw_observation, posterior_target};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error("config mismatch: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisOutcome {
    pub id: HypothesisId,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub details: BTreeMap<String, f64>,
}

/// An outcome plus the engine record it was computed from, when there is one.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub outcome: HypothesisOutcome,
    pub record: Option<RunRecord>,
}

fn spec_for(cfg: &RunConfig, id: HypothesisId) -> Result<&HypothesisSpec, ScenarioError> {
    match &cfg.hypothesis {
        Some(h) if h.id == id => Ok(h),
        Some(h) => Err(ScenarioError::Mismatch(format!("config describes {:?}, not {id:?}", h.id))),
        None => Err(ScenarioError::Mismatch("config has no hypothesis section".into())),
    }
}

/// Sender and receiver ids: explicit ones, else the first two agents by id.
fn pair(cfg: &RunConfig, spec: &HypothesisSpec) -> Result<(String, String), ScenarioError> {
    let mut ids: Vec<&str> = cfg.agents.iter().map(|a| a.id.as_str()).collect();
    ids.sort();
    if ids.len() < 2 {
        return Err(ScenarioError::Mismatch("two agents are required".into()));
    }
    let sender = spec.sender.clone().unwrap_or_else(|| ids[0].to_string());
    let receiver = spec
        .receiver
        .clone()
        .unwrap_or_else(|| ids.iter().find(|id| **id != sender).expect("two ids").to_string());
    if sender == receiver {
        return Err(ScenarioError::Mismatch("sender and receiver must differ".into()));
    }
    Ok((sender, receiver))
}

pub fn run_hypothesis(cfg: &RunConfig, id: HypothesisId) -> Result<ScenarioRun, ScenarioError> {
    match id {
        HypothesisId::H1 => h1_divergence(cfg),
        HypothesisId::H2 => h2_receptivity(cfg).map(|outcome| ScenarioRun { outcome, record: None }),
        HypothesisId::H3 => h3_alignment_effect(cfg).map(|outcome| ScenarioRun { outcome, record: None }),
        HypothesisId::H4 => h4_resolution_strategy(cfg),
    }
}

fn tv(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    0.5 * keys
        .into_iter()
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// TV distance between the two agents' foregrounding frequencies over phase
/// keys on a shared observation stream.
pub fn h1_divergence(cfg: &RunConfig) -> Result<ScenarioRun, ScenarioError> {
    let spec = spec_for(cfg, HypothesisId::H1)?;
    let (a, b) = pair(cfg, spec)?;
    let record = run(cfg)?;
    let fa = record.metrics.agents[&a].foreground_frequencies();
    let fb = record.metrics.agents[&b].foreground_frequencies();
    let statistic = tv(&fa, &fb);
    let mut details = BTreeMap::from([("steps".to_string(), cfg.steps as f64)]);
    for (id, f) in [(&a, &fa), (&b, &fb)] {
        for (k, v) in f {
            details.insert(format!("{id}:{k}"), *v);
        }
    }
    Ok(ScenarioRun {
        outcome: HypothesisOutcome {
            id: HypothesisId::H1,
            statistic,
            threshold: spec.threshold,
            pass: statistic >= spec.threshold,
            details,
        },
        record: Some(record),
    })
}

/// The configured sender candidate, else the admissible one with the highest `r`.
fn sender_candidate<'a>(sender: &'a PreparedAgent, spec: &HypothesisSpec) -> Result<&'a Candidate, ScenarioError> {
    let space = &sender.space;
    let index = match &spec.sender_candidate {
        Some(key) => space
            .registry
            .index_of(key)
            .filter(|x| space.phases[*x].admissible)
            .ok_or_else(|| ScenarioError::Mismatch(format!("`{key}` is not an admissible sender candidate")))?,
        None => leading_candidate(&sender.agent.state, space)
            .ok_or_else(|| ScenarioError::Mismatch("sender has no admissible candidate".into()))?,
    };
    Ok(&space.candidates[index])
}

fn agent_pair<'a>(
    prepared: &'a Prepared,
    sender: &str,
    receiver: &str,
) -> (&'a PreparedAgent, &'a PreparedAgent) {
    (
        prepared.agent(sender).expect("validated sender"),
        prepared.agent(receiver).expect("validated receiver"),
    )
}

fn finite_or_large(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        1e6
    }
}

/// Processability of one receiver candidate at a given error, using
/// intensity `c_err · L` against `η` and the sign of `μ`.
fn receptive(agent: &Agent, space: &CandidateSpace, x: usize, error: f64) -> bool {
    let intensity = agent.state.q.c_err[x] * error;
    let mu = directional_compatibility(&agent.state, space, x);
    processability(intensity, agent.state.q.eta[x], mu).is_processable()
}

/// Predicts, per probe, whether the receiver will process a naively delivered
/// sender representation, from the receiver's most likely candidate; the
/// simulation samples the candidate that actually fires. The statistic is
/// the prediction accuracy.
pub fn h2_receptivity(cfg: &RunConfig) -> Result<HypothesisOutcome, ScenarioError> {
    let spec = spec_for(cfg, HypothesisId::H2)?;
    let (s_id, r_id) = pair(cfg, spec)?;
    let prepared = prepare(cfg)?;
    let world = &prepared.world;
    let (sender, receiver) = agent_pair(&prepared, &s_id, &r_id);
    let c = sender_candidate(sender, spec)?;
    let agent = &receiver.agent;
    let space = &receiver.space;
    let admissible = space.admissible_indices();
    if admissible.is_empty() {
        return Err(ScenarioError::Mismatch("receiver has no admissible candidate".into()));
    }
    let mut probes = rng::labeled_stream(cfg.seed, "h2-probes");
    let mut control = rng::labeled_stream(cfg.seed, "h2-control");
    let (mut hits, mut control_hits, mut receptive_count) = (0usize, 0usize, 0usize);
    for _ in 0..spec.probes {
        let o = draw_observation(world, &mut probes);
        let t = c.representation(o).inverse_cdf(rng::unit(&mut probes));
        let errors: Vec<f64> = admissible
            .iter()
            .map(|&x| {
                let rc = &space.candidates[x];
                let posterior = posterior_target(world, rc.target(), o).expect("observation has mass");
                let label = t.min(rc.representation_size() - 1);
                kl_divergence(&posterior, &rc.decoder[label]).unwrap_or(f64::INFINITY)
            })
            .collect();
        let scores: Vec<f64> = admissible
            .iter()
            .zip(&errors)
            .map(|(&x, e)| agent.score(x, finite_or_large(*e)))
            .collect();
        let pi = Dist::softmax(&scores, agent.params.foreground_temperature);
        let predicted_at = pi.mode();
        let u = rng::unit(&mut probes);
        let fired_at = if agent.params.foreground_temperature <= 0.0 {
            predicted_at
        } else {
            pi.inverse_cdf(u)
        };
        let predicted = receptive(agent, space, admissible[predicted_at], errors[predicted_at]);
        let outcome = receptive(agent, space, admissible[fired_at], errors[fired_at]);
        let coin = rng::unit(&mut control) < 0.5;
        hits += usize::from(predicted == outcome);
        control_hits += usize::from(coin == outcome);
        receptive_count += usize::from(outcome);
    }
    let n = spec.probes.max(1) as f64;
    let statistic = hits as f64 / n;
    let threshold = spec.threshold + spec.margin;
    Ok(HypothesisOutcome {
        id: HypothesisId::H2,
        statistic,
        threshold,
        pass: statistic > threshold,
        details: BTreeMap::from([
            ("probes".to_string(), spec.probes as f64),
            ("control_accuracy".to_string(), control_hits as f64 / n),
            ("receptive_rate".to_string(), receptive_count as f64 / n),
        ]),
    })
}

/// Receiver error under index-preserving delivery minus receiver error under
/// the optimized alignment, both into the candidate the optimizer selects.
pub fn h3_alignment_effect(cfg: &RunConfig) -> Result<HypothesisOutcome, ScenarioError> {
    let spec = spec_for(cfg, HypothesisId::H3)?;
    let (s_id, r_id) = pair(cfg, spec)?;
    let prepared = prepare(cfg)?;
    let (sender, receiver) = agent_pair(&prepared, &s_id, &r_id);
    let c = sender_candidate(sender, spec)?;
    let (problem, phases) = alignment_problem(
        &prepared.world,
        c,
        sender.agent.state.zeta.kappa,
        &receiver.agent.state,
        &receiver.space,
    );
    if problem.receivers.is_empty() {
        return Err(ScenarioError::Mismatch("receiver has no admissible candidate".into()));
    }
    let solution = match cfg.engine.align_mode {
        AlignMode::Exhaustive => solve_exhaustive(&problem, cfg.engine.delta, cfg.engine.max_exhaustive_alphabet)?,
        AlignMode::Greedy => solve_greedy(&problem, cfg.engine.delta)?,
    };
    let option = &problem.receivers[solution.receiver];
    let naive: Vec<usize> = (0..problem.sender.rows()).map(|t| t.min(option.size - 1)).collect();
    let naive_error = option.error_of(&naive);
    let statistic = naive_error - solution.receiver_error;
    let key = receiver.space.registry.key(phases[solution.receiver]);
    let mut details = BTreeMap::from([
        ("naive_error".to_string(), naive_error),
        ("optimized_error".to_string(), solution.receiver_error),
        ("delta_i".to_string(), solution.delta_i),
        ("processable".to_string(), if solution.processable() { 1.0 } else { 0.0 }),
    ]);
    details.insert(format!("receiver:{key}"), 1.0);
    Ok(HypothesisOutcome {
        id: HypothesisId::H3,
        statistic,
        threshold: spec.threshold,
        pass: statistic > spec.threshold,
        details,
    })
}

/// Share of action-side plans among action-side plus reflective-side plans.
pub fn action_share(plan_kinds: &BTreeMap<String, usize>) -> f64 {
    let get = |k: PlanKind| plan_kinds.get(k.name()).copied().unwrap_or(0) as f64;
    let act = get(PlanKind::Act) + get(PlanKind::Explore);
    let reflect = get(PlanKind::Reinterpret) + get(PlanKind::Suspend);
    if act + reflect == 0.0 {
        0.0
    } else {
        act / (act + reflect)
    }
}

/// TV distance between two agents' plan kinds collapsed to
/// {Act, Explore} against {Reinterpret, Suspend}.
pub fn h4_resolution_strategy(cfg: &RunConfig) -> Result<ScenarioRun, ScenarioError> {
    let spec = spec_for(cfg, HypothesisId::H4)?;
    let (a, b) = pair(cfg, spec)?;
    let record = run(cfg)?;
    let sa = action_share(&record.metrics.agents[&a].plan_kinds);
    let sb = action_share(&record.metrics.agents[&b].plan_kinds);
    let statistic = (sa - sb).abs();
    Ok(ScenarioRun {
        outcome: HypothesisOutcome {
            id: HypothesisId::H4,
            statistic,
            threshold: spec.threshold,
            pass: statistic >= spec.threshold,
            details: BTreeMap::from([
                (format!("{a}:action_share"), sa),
                (format!("{b}:action_share"), sb),
                ("steps".to_string(), cfg.steps as f64),
            ]),
        },
        record: Some(record),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_value;
    use serde_json::{json, Value};

    fn base(agents: Value, hypothesis: Value, steps: usize) -> RunConfig {
        parse_config_value(json!({
            "seed": 5,
            "steps": steps,
            "world": {
                "latents": [{"name": "x", "size": 2}, {"name": "z", "size": 2}],
                "joint": [0.3, 0.2, 0.2, 0.3],
                "targets": [{"name": "X", "table": [0, 0, 1, 1]}, {"name": "Z", "table": [0, 1, 0, 1]}],
                "obs_channel": [
                    0.85, 0.05, 0.05, 0.05,
                    0.05, 0.85, 0.05, 0.05,
                    0.05, 0.05, 0.85, 0.05,
                    0.05, 0.05, 0.05, 0.85
                ],
                "obs_size": 4
            },
            "bases": [{"id": "full", "map": [0, 1, 2, 3]}],
            "resolutions": [{"id": "fine", "cardinality": 4, "beta": 40.0, "horizon": "fine"}],
            "engine": {"epsilon": 10.0},
            "agents": agents,
            "hypothesis": hypothesis
        }))
        .unwrap()
    }

    #[test]
    fn h1_identical_profiles_null() {
        let agent = |id: &str| json!({"id": id, "lambda": {"lr_r": 0.0, "lr_sigma": 0.0, "lr_eta": 0.0}});
        let cfg = base(json!([agent("a"), agent("b")]), json!({"id": "H1", "threshold": 0.5}), 500);
        let out = h1_divergence(&cfg).unwrap().outcome;
        assert!(out.statistic <= 0.05, "{out:?}");
        assert!(!out.pass);
    }

    #[test]
    fn h1_disjoint_fields_separate() {
        let cfg = base(
            json!([
                {"id": "a", "profile": {"r": {"X/full/fine": 12.0}}},
                {"id": "b", "profile": {"r": {"Z/full/fine": 12.0}}}
            ]),
            json!({"id": "H1", "threshold": 0.5}),
            300,
        );
        let out = h1_divergence(&cfg).unwrap().outcome;
        assert!((out.statistic - 1.0).abs() <= 0.02, "{out:?}");
        assert!(out.pass);
    }

    #[test]
    fn h2_deterministic_fields_are_perfect() {
        let cfg = base(
            json!([
                {"id": "a"},
                {"id": "b", "profile": {"r": {"X/full/fine": 1.0}}, "params": {"foreground_temperature": 0.0}}
            ]),
            json!({"id": "H2", "threshold": 0.5, "probes": 100}),
            0,
        );
        let out = h2_receptivity(&cfg).unwrap();
        assert_eq!(out.statistic, 1.0);
        assert!((out.details["control_accuracy"] - 0.5).abs() < 0.15);
    }

    #[test]
    fn h3_identical_spaces_no_gain() {
        let agent = |id: &str| json!({"id": id, "chi_op": {"X": 1.0}, "profile": {"eta": 10.0}});
        let cfg = base(json!([agent("a"), agent("b")]), json!({"id": "H3", "threshold": 0.0}), 0);
        let out = h3_alignment_effect(&cfg).unwrap();
        assert!(out.statistic.abs() <= 1e-9, "{out:?}");
    }

    #[test]
    fn h3_single_symbol_receiver_no_gain() {
        let mut cfg = base(json!([{"id": "a"}, {"id": "b"}]), json!({"id": "H3", "threshold": 0.0}), 0);
        cfg.resolutions.push(crate::candidate::Resolution {
            id: "one".into(),
            cardinality: 1,
            beta: 1.0,
            horizon: crate::candidate::Horizon::Coarse,
        });
        cfg.agents[0].resolutions = Some(vec!["fine".into()]);
        cfg.agents[1].resolutions = Some(vec!["one".into()]);
        let out = h3_alignment_effect(&cfg).unwrap();
        assert_eq!(out.statistic, 0.0);
    }

    #[test]
    fn hypothesis_id_must_match() {
        let cfg = base(json!([{"id": "a"}, {"id": "b"}]), json!({"id": "H3", "threshold": 0.0}), 0);
        assert!(matches!(h1_divergence(&cfg), Err(ScenarioError::Mismatch(_))));
    }
}
