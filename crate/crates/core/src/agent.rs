//! The intra-agent mechanism: profile state, foregrounding, error intensity,
//! plan generation and selection, and feedback updates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidate::{Candidate, CandidateSpace, Horizon};
use crate::probkit::{Dist, IbOptions, ProbError};
use crate::rng::{self, SimRng};
use crate::world::{posterior_target, World, WorldError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("agent `{0}` has no admissible candidate to foreground")]
    EmptyAdmissibleSpace(String),
    #[error("agent `{0}` has no feasible plan")]
    NoFeasiblePlan(String),
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// `θ = (r, e, s)` over the agent's phase points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatingProfile {
    pub r: Vec<f64>,
    pub e: Vec<f64>,
    pub s: Vec<f64>,
}

/// `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Plasticity {
    pub lr_r: f64,
    pub lr_sigma: f64,
    pub lr_eta: f64,
}

impl Default for Plasticity {
    fn default() -> Self {
        Self {
            lr_r: 0.1,
            lr_sigma: 0.1,
            lr_eta: 0.1,
        }
    }
}

/// `q = (c_err, η)` per phase point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Firing {
    pub c_err: Vec<f64>,
    pub eta: Vec<f64>,
}

/// `ζ = (χ_op, τ, κ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Formation {
    /// Target inclusion weights; targets with weight zero are not formed.
    pub chi_op: BTreeMap<String, f64>,
    pub tau: IbOptions,
    /// Largest number of distinct symbols the agent transmits.
    pub kappa: usize,
}

/// `Ω = (θ, λ, q, ζ, σ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileState {
    pub theta: OperatingProfile,
    pub lambda: Plasticity,
    pub q: Firing,
    pub zeta: Formation,
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreWeights {
    pub w_e: f64,
    pub w_s: f64,
    pub w_l: f64,
    pub w_sigma: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            w_e: 1.0,
            w_s: 1.0,
            w_l: 1.0,
            w_sigma: 0.0,
        }
    }
}

/// Coefficients `a1..a6` of the plan priority.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanWeights {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub a6: f64,
}

impl Default for PlanWeights {
    fn default() -> Self {
        Self {
            a1: 1.0,
            a2: 1.0,
            a3: 1.0,
            a4: 1.0,
            a5: 1.0,
            a6: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PlanKind {
    Report,
    Suspend,
    Reinterpret,
    Explore,
    Act,
    Align,
}

impl PlanKind {
    pub const ALL: [PlanKind; 6] = [
        PlanKind::Report,
        PlanKind::Suspend,
        PlanKind::Reinterpret,
        PlanKind::Explore,
        PlanKind::Act,
        PlanKind::Align,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlanKind::Report => "Report",
            PlanKind::Suspend => "Suspend",
            PlanKind::Reinterpret => "Reinterpret",
            PlanKind::Explore => "Explore",
            PlanKind::Act => "Act",
            PlanKind::Align => "Align",
        }
    }

    /// Plan kinds that gain the horizon bonus for a fired candidate's horizon.
    pub fn suits(self, horizon: Horizon) -> bool {
        match horizon {
            Horizon::Fine => matches!(self, PlanKind::Act | PlanKind::Explore),
            Horizon::Coarse => matches!(self, PlanKind::Reinterpret | PlanKind::Suspend),
        }
    }
}

/// Action-constraint components of a plan.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanCosts {
    pub body: f64,
    pub time: f64,
    pub skill: f64,
    pub coop: f64,
    pub comm: f64,
}

impl PlanCosts {
    /// First-order additive `C_act`.
    pub fn total(&self) -> f64 {
        self.body + self.time + self.skill + self.coop + self.comm
    }

    pub fn is_valid(&self) -> bool {
        [self.body, self.time, self.skill, self.coop, self.comm]
            .iter()
            .all(|c| c.is_finite() && *c >= 0.0)
    }
}

/// Per-kind scenario inputs for plan priority and feedback.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanContextRow {
    /// Expected error reduction as a fraction of the fired candidate's error.
    pub gain: f64,
    pub u: f64,
    pub c_comp: f64,
    pub c_obs: f64,
    /// Realized value delta reported as feedback `dU`.
    pub du: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentParams {
    pub weights: ScoreWeights,
    pub plan_weights: PlanWeights,
    pub foreground_temperature: f64,
    pub plan_temperature: f64,
    pub queue_capacity: usize,
    pub feasibility_cap: f64,
    pub plan_costs: BTreeMap<PlanKind, PlanCosts>,
    pub plan_context: BTreeMap<PlanKind, PlanContextRow>,
    /// Failures at phase points with `c_err` at or above this also raise `s`.
    pub sensitization_threshold: f64,
    pub adapt_eta: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forced_plan: Option<PlanKind>,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            weights: ScoreWeights::default(),
            plan_weights: PlanWeights::default(),
            foreground_temperature: 1.0,
            plan_temperature: 1.0,
            queue_capacity: 3,
            feasibility_cap: f64::MAX,
            plan_costs: BTreeMap::new(),
            plan_context: BTreeMap::new(),
            sensitization_threshold: 1.0,
            adapt_eta: false,
            forced_plan: None,
        }
    }
}

impl AgentParams {
    pub fn costs(&self, kind: PlanKind) -> PlanCosts {
        self.plan_costs.get(&kind).copied().unwrap_or_default()
    }

    pub fn context(&self, kind: PlanKind) -> PlanContextRow {
        self.plan_context.get(&kind).copied().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agent {
    pub id: String,
    pub state: ProfileState,
    pub params: AgentParams,
}

/// `θ̃`: the outcome of one foregrounding pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PostOperatingState {
    /// Phase index of the fired candidate.
    pub fired: usize,
    /// Phase indices that competed, aligned with `pi`.
    pub candidates: Vec<usize>,
    pub pi: Dist,
    pub scores: Vec<f64>,
    pub intensity: f64,
    pub crossed: bool,
    pub direction: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plan {
    pub kind: PlanKind,
    pub candidate: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peer: Option<String>,
    pub costs: PlanCosts,
}

impl Plan {
    pub fn c_act(&self) -> f64 {
        self.costs.total()
    }

    fn tie_key(&self) -> (PlanKind, usize, Option<&str>) {
        (self.kind, self.candidate, self.peer.as_deref())
    }
}

/// `Q`: feasible plans waiting behind the selected one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanQueue {
    pub entries: Vec<(Plan, f64)>,
    pub capacity: usize,
}

/// `Δ`: signed feedback deltas.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Feedback {
    pub d_l: f64,
    pub d_u: f64,
    pub d_c_act: f64,
    pub d_c_coop: f64,
    pub d_phi: f64,
}

impl Feedback {
    pub fn is_finite(&self) -> bool {
        [self.d_l, self.d_u, self.d_c_act, self.d_c_coop, self.d_phi]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// `KL(p(Y|o) ‖ decoder)` averaged over the candidate's encoding of `o`.
pub fn prediction_error(world: &World, c: &Candidate, o: usize) -> Result<f64, AgentError> {
    let posterior = posterior_target(world, c.target(), o)?;
    Ok(c.pointwise_error(&posterior, o)?)
}

/// Pointwise errors of every candidate in the space. Support violations
/// surface as `+∞`, which keeps such candidates out of reach of a finite threshold.
pub fn candidate_errors(world: &World, space: &CandidateSpace, o: usize) -> Vec<f64> {
    space
        .candidates
        .iter()
        .map(|c| prediction_error(world, c, o).unwrap_or(f64::INFINITY))
        .collect()
}

impl Agent {
    /// Foregrounding score `S` at phase point `x` given its current error.
    pub fn score(&self, x: usize, error: f64) -> f64 {
        let w = &self.params.weights;
        let theta = &self.state.theta;
        theta.r[x] + w.w_e * theta.e[x] - w.w_s * theta.s[x]
            + w.w_l * error
            + w.w_sigma * self.state.sigma[x]
    }
}

/// The admissible phase index with the highest `r`, first on ties.
pub fn leading_candidate(state: &ProfileState, space: &CandidateSpace) -> Option<usize> {
    let r = &state.theta.r;
    space.admissible().fold(None, |best: Option<usize>, x| match best {
        Some(b) if r[b] >= r[x] => Some(b),
        _ => Some(x),
    })
}

/// Softmax foregrounding over the admissible candidates.
pub fn foreground(
    agent: &Agent,
    space: &CandidateSpace,
    errors: &[f64],
    stream: &mut SimRng,
) -> Result<PostOperatingState, AgentError> {
    let candidates = space.admissible_indices();
    foreground_among(agent, space, errors, &candidates, stream)
}

/// Foregrounding restricted to `candidates` (phase indices).
pub fn foreground_among(
    agent: &Agent,
    space: &CandidateSpace,
    errors: &[f64],
    candidates: &[usize],
    stream: &mut SimRng,
) -> Result<PostOperatingState, AgentError> {
    if candidates.is_empty() {
        return Err(AgentError::EmptyAdmissibleSpace(agent.id.clone()));
    }
    let scores: Vec<f64> = candidates
        .iter()
        .map(|&x| agent.score(x, finite_or_large(errors[x])))
        .collect();
    let pi = Dist::softmax(&scores, agent.params.foreground_temperature);
    let u = rng::unit(stream);
    let pick = if agent.params.foreground_temperature <= 0.0 {
        pi.mode()
    } else {
        pi.inverse_cdf(u)
    };
    let fired = candidates[pick];
    let (intensity, crossed) = error_intensity(&agent.state, fired, errors[fired]);
    Ok(PostOperatingState {
        fired,
        candidates: candidates.to_vec(),
        pi,
        scores,
        intensity,
        crossed,
        direction: foregrounding_direction(agent, space, errors),
    })
}

fn finite_or_large(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        1e6
    }
}

/// `I = c_err · L`, crossed when strictly above `η`.
pub fn error_intensity(state: &ProfileState, phase: usize, error: f64) -> (f64, bool) {
    let c = state.q.c_err[phase];
    let intensity = if c == 0.0 { 0.0 } else { c * error };
    (intensity, intensity > state.q.eta[phase])
}

/// `v(x) = w_L · L(x) + e(x) − s(x)` over every phase point of the space.
pub fn foregrounding_direction(agent: &Agent, space: &CandidateSpace, errors: &[f64]) -> Vec<f64> {
    let theta = &agent.state.theta;
    (0..space.len())
        .map(|x| agent.params.weights.w_l * finite_or_large(errors[x]) + theta.e[x] - theta.s[x])
        .collect()
}

/// The fixed plan set for a fired candidate, plus one `Align` per peer.
pub fn generate_plans(agent: &Agent, post: &PostOperatingState, peers: &[String]) -> Vec<Plan> {
    let mut plans: Vec<Plan> = PlanKind::ALL[..5]
        .iter()
        .map(|&kind| Plan {
            kind,
            candidate: post.fired,
            peer: None,
            costs: agent.params.costs(kind),
        })
        .collect();
    plans.extend(peers.iter().map(|peer| Plan {
        kind: PlanKind::Align,
        candidate: post.fired,
        peer: Some(peer.clone()),
        costs: agent.params.costs(PlanKind::Align),
    }));
    plans
}

/// Inputs to the plan priority besides the plan's own costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanContext {
    pub expected_dl: f64,
    pub u: f64,
    pub c_comp: f64,
    pub c_obs: f64,
}

/// `Π`, or `None` when the plan's `C_act` exceeds the feasibility cap.
pub fn plan_priority(agent: &Agent, plan: &Plan, ctx: &PlanContext, horizon: Horizon) -> Option<f64> {
    let c_act = plan.c_act();
    if c_act > agent.params.feasibility_cap {
        return None;
    }
    let a = &agent.params.plan_weights;
    let bonus = if plan.kind.suits(horizon) { 1.0 } else { 0.0 };
    Some(
        a.a1 * ctx.expected_dl + a.a2 * ctx.u - a.a3 * ctx.c_comp - a.a4 * ctx.c_obs - a.a5 * c_act
            + a.a6 * bonus,
    )
}

/// Samples a plan from `softmax(Π / temperature)` over feasible plans; the rest
/// fill the queue in priority order up to its capacity.
pub fn select_plan(
    agent: &Agent,
    plans: &[Plan],
    priorities: &[Option<f64>],
    stream: &mut SimRng,
) -> Result<(Plan, PlanQueue), AgentError> {
    assert_eq!(plans.len(), priorities.len(), "one priority per plan");
    let mut feasible: Vec<(usize, f64)> = priorities
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.map(|p| (i, p)))
        .collect();
    if feasible.is_empty() {
        return Err(AgentError::NoFeasiblePlan(agent.id.clone()));
    }
    feasible.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite priorities")
            .then_with(|| plans[a.0].tie_key().cmp(&plans[b.0].tie_key()))
    });
    let scores: Vec<f64> = feasible.iter().map(|(_, p)| *p).collect();
    let pi = Dist::softmax(&scores, agent.params.plan_temperature);
    let u = rng::unit(stream);
    let pick = if agent.params.plan_temperature <= 0.0 {
        0
    } else {
        pi.inverse_cdf(u)
    };
    let selected = plans[feasible[pick].0].clone();
    let entries = feasible
        .iter()
        .enumerate()
        .filter(|(rank, _)| *rank != pick)
        .map(|(_, (i, p))| (plans[*i].clone(), *p))
        .take(agent.params.queue_capacity)
        .collect();
    Ok((
        selected,
        PlanQueue {
            entries,
            capacity: agent.params.queue_capacity,
        },
    ))
}

/// Feedback update at the fired phase point; all other entries are untouched.
pub fn apply_feedback(
    state: &ProfileState,
    params: &AgentParams,
    phase: usize,
    fb: &Feedback,
    observed_intensity: f64,
) -> ProfileState {
    let mut next = state.clone();
    let lr = state.lambda;
    next.theta.r[phase] += lr.lr_r * (-fb.d_l);
    if fb.d_l > 0.0 && state.q.c_err[phase] >= params.sensitization_threshold {
        next.theta.s[phase] += lr.lr_r * fb.d_l;
    }
    if fb.d_l <= 0.0 {
        let s = state.sigma[phase];
        next.sigma[phase] = (s + lr.lr_sigma * (1.0 - s)).clamp(0.0, 1.0);
    }
    if params.adapt_eta && observed_intensity.is_finite() {
        let eta = state.q.eta[phase];
        next.q.eta[phase] = (eta + lr.lr_eta * (observed_intensity - eta)).max(0.0);
    }
    next
}
