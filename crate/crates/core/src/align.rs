//! Alignment of a sender's representation into a receiver's processable space.
//!
//! The search space is deterministic maps from the sender alphabet into a
//! receiver candidate's alphabet. A map's transformation loss depends only on
//! the partition it induces; its receiver error is additive over sender
//! symbols, so both are cheap to evaluate once per-symbol tables are built.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::ProfileState;
use crate::candidate::{Candidate, CandidateSpace};
use crate::probkit::{kl_divergence, mutual_information, Channel, JointDist};
use crate::world::{posterior_target, World};

pub const DEFAULT_DELTA: f64 = 0.01;
pub const DEFAULT_MAX_EXHAUSTIVE_ALPHABET: usize = 6;
const MU_VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlignError {
    #[error("sender alphabet of size {size} exceeds the exhaustive search cap {cap}")]
    AlphabetTooLarge { size: usize, cap: usize },
    #[error("receiver space has no admissible candidate")]
    NoReceiverCandidate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignMode {
    Exhaustive,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AlignmentClass {
    Full,
    Partial,
    Severed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Processability {
    BelowThreshold,
    Receptive,
    Blocked,
}

impl Processability {
    pub fn is_processable(self) -> bool {
        self != Processability::Blocked
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentChannel {
    pub channel: Channel,
    pub deterministic: bool,
}

impl AlignmentChannel {
    pub fn from_map(map: &[usize], outputs: usize) -> Self {
        Self {
            channel: Channel::deterministic(map, outputs),
            deterministic: true,
        }
    }

    pub fn from_channel(channel: Channel) -> Self {
        let deterministic = channel.is_deterministic();
        Self {
            channel,
            deterministic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentReport {
    /// Key of the receiver candidate the channel maps into.
    pub receiver: String,
    pub channel: AlignmentChannel,
    pub delta_i: f64,
    pub receiver_error: f64,
    pub mu: f64,
    pub processable: bool,
    pub reason: Processability,
    pub class: AlignmentClass,
}

/// `I(T;Y) − I(A(T);Y)` for a sender joint `p(T, Y)`.
pub fn transformation_loss(sender: &JointDist, a: &AlignmentChannel) -> f64 {
    mutual_information(sender) - mutual_information(&sender.map_rows(&a.channel))
}

/// Z-score of `r` at `phase` over the admissible phase points.
pub fn directional_compatibility(receiver: &ProfileState, space: &CandidateSpace, phase: usize) -> f64 {
    let r: Vec<f64> = space.admissible().map(|x| receiver.theta.r[x]).collect();
    if r.is_empty() {
        return 0.0;
    }
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let std = (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std < MU_VARIANCE_FLOOR {
        0.0
    } else {
        (receiver.theta.r[phase] - mean) / std
    }
}

/// Below threshold, else receptive when `μ > 0`. A non-finite error is never processable.
pub fn processability(receiver_error: f64, eta: f64, mu: f64) -> Processability {
    if !receiver_error.is_finite() {
        Processability::Blocked
    } else if receiver_error <= eta {
        Processability::BelowThreshold
    } else if mu > 0.0 {
        Processability::Receptive
    } else {
        Processability::Blocked
    }
}

pub fn classify(processable: bool, delta_i: f64, delta: f64) -> AlignmentClass {
    if !processable {
        AlignmentClass::Severed
    } else if delta_i <= delta {
        AlignmentClass::Full
    } else {
        AlignmentClass::Partial
    }
}

/// One receiver candidate as seen by the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReceiverOption {
    pub size: usize,
    /// `errors[t * size + t']`: contribution of sender symbol `t` to the
    /// receiver error when mapped to `t'`.
    pub errors: Vec<f64>,
    pub eta: f64,
    pub mu: f64,
}

impl ReceiverOption {
    fn cost(&self, t: usize, label: usize) -> f64 {
        self.errors[t * self.size + label]
    }

    pub fn error_of(&self, map: &[usize]) -> f64 {
        map.iter().enumerate().map(|(t, &l)| self.cost(t, l)).sum()
    }
}

/// A finite alignment search: sender joint `p(T, Y)`, a transmit cap, and the
/// receiver's candidate options.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentProblem {
    pub sender: JointDist,
    pub kappa: usize,
    pub receivers: Vec<ReceiverOption>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentSolution {
    /// Index into `AlignmentProblem::receivers`.
    pub receiver: usize,
    pub map: Vec<usize>,
    pub delta_i: f64,
    pub receiver_error: f64,
    pub reason: Processability,
    pub class: AlignmentClass,
}

impl AlignmentSolution {
    pub fn processable(&self) -> bool {
        self.reason.is_processable()
    }
}

/// Canonical relabeling of a map: groups numbered by first appearance.
fn canonical_partition(map: &[usize]) -> (Vec<usize>, usize) {
    let mut labels: Vec<Option<usize>> = Vec::new();
    let mut out = Vec::with_capacity(map.len());
    let mut next = 0;
    for &l in map {
        if labels.len() <= l {
            labels.resize(l + 1, None);
        }
        let g = *labels[l].get_or_insert_with(|| {
            next += 1;
            next - 1
        });
        out.push(g);
    }
    (out, next)
}

fn image_size(map: &[usize]) -> usize {
    canonical_partition(map).1
}

struct LossCache<'a> {
    sender: &'a JointDist,
    base: f64,
    memo: HashMap<Vec<usize>, f64>,
}

impl<'a> LossCache<'a> {
    fn new(sender: &'a JointDist) -> Self {
        Self {
            sender,
            base: mutual_information(sender),
            memo: HashMap::new(),
        }
    }

    /// Loss of a map. Evaluated on the canonical partition so that maps
    /// inducing the same partition get bit-identical values.
    fn loss(&mut self, map: &[usize]) -> f64 {
        let (partition, groups) = canonical_partition(map);
        if let Some(v) = self.memo.get(&partition) {
            return *v;
        }
        let v = self.base - mutual_information(&self.sender.merge_rows(&partition, groups));
        self.memo.insert(partition, v);
        v
    }
}

#[derive(Debug, Clone)]
struct Scored {
    receiver: usize,
    map: Vec<usize>,
    delta_i: f64,
    error: f64,
    reason: Processability,
}

impl Scored {
    /// Processable first, then loss, receiver error, receiver index, map order.
    fn better_than(&self, other: &Scored) -> bool {
        let key = |s: &Scored| !s.reason.is_processable();
        if key(self) != key(other) {
            return !key(self);
        }
        if self.delta_i != other.delta_i {
            return self.delta_i < other.delta_i;
        }
        let (a, b) = (nan_last(self.error), nan_last(other.error));
        if a != b {
            return a < b;
        }
        (self.receiver, &self.map) < (other.receiver, &other.map)
    }
}

fn nan_last(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn score(loss: &mut LossCache, option: &ReceiverOption, receiver: usize, map: Vec<usize>) -> Scored {
    let error = option.error_of(&map);
    Scored {
        receiver,
        delta_i: loss.loss(&map),
        reason: processability(error, option.eta, option.mu),
        error,
        map,
    }
}

fn finish(best: Scored, delta: f64) -> AlignmentSolution {
    let class = classify(best.reason.is_processable(), best.delta_i, delta);
    AlignmentSolution {
        receiver: best.receiver,
        map: best.map,
        delta_i: best.delta_i,
        receiver_error: best.error,
        reason: best.reason,
        class,
    }
}

fn keep(best: &mut Option<Scored>, s: Scored) {
    if best.as_ref().is_none_or(|b| s.better_than(b)) {
        *best = Some(s);
    }
}

/// Full enumeration of maps in lexicographic order, over every receiver option.
pub fn solve_exhaustive(
    problem: &AlignmentProblem,
    delta: f64,
    max_alphabet: usize,
) -> Result<AlignmentSolution, AlignError> {
    let n = problem.sender.rows();
    if n > max_alphabet {
        return Err(AlignError::AlphabetTooLarge {
            size: n,
            cap: max_alphabet,
        });
    }
    if problem.receivers.is_empty() {
        return Err(AlignError::NoReceiverCandidate);
    }
    let mut loss = LossCache::new(&problem.sender);
    let mut best = None;
    for (ri, option) in problem.receivers.iter().enumerate() {
        let mut map = vec![0usize; n];
        loop {
            if image_size(&map) <= problem.kappa {
                keep(&mut best, score(&mut loss, option, ri, map.clone()));
            }
            if !advance(&mut map, option.size) {
                break;
            }
        }
    }
    Ok(finish(best.expect("at least the constant map is searched"), delta))
}

/// Next map in lexicographic order (first symbol most significant).
fn advance(map: &mut [usize], base: usize) -> bool {
    for digit in map.iter_mut().rev() {
        *digit += 1;
        if *digit < base {
            return true;
        }
        *digit = 0;
    }
    false
}

/// Agglomerative merges that keep `I(group;Y)` as large as possible, from
/// singletons down to one group. Entry `g` has `n − g` groups.
fn merge_sequence(sender: &JointDist) -> Vec<Vec<usize>> {
    let n = sender.rows();
    let mut partition: Vec<usize> = (0..n).collect();
    let mut seq = vec![partition.clone()];
    let mut groups = n;
    while groups > 1 {
        let mut best: Option<(f64, Vec<usize>)> = None;
        for a in 0..groups {
            for b in a + 1..groups {
                let merged: Vec<usize> = partition
                    .iter()
                    .map(|&g| {
                        let g = if g == b { a } else { g };
                        if g > b {
                            g - 1
                        } else {
                            g
                        }
                    })
                    .collect();
                let mi = mutual_information(&sender.merge_rows(&merged, groups - 1));
                if best.as_ref().is_none_or(|(v, _)| mi > *v) {
                    best = Some((mi, merged));
                }
            }
        }
        partition = best.expect("at least one pair").1;
        groups -= 1;
        seq.push(partition.clone());
    }
    seq
}

/// Cheapest injective labeling of `groups` partition cells into `size` labels.
fn label_partition(partition: &[usize], groups: usize, option: &ReceiverOption) -> Vec<usize> {
    let mut cell_cost = vec![vec![0.0; option.size]; groups];
    for (t, &g) in partition.iter().enumerate() {
        for (l, c) in cell_cost[g].iter_mut().enumerate() {
            *c += option.cost(t, l);
        }
    }
    let mut labels: Vec<usize> = Vec::with_capacity(groups);
    let mut used = vec![false; option.size];
    let mut best: Option<(f64, Vec<usize>)> = None;
    assign(&cell_cost, &mut labels, &mut used, 0.0, &mut best);
    let labels = best.expect("groups ≤ size").1;
    partition.iter().map(|&g| labels[g]).collect()
}

fn assign(
    cost: &[Vec<f64>],
    labels: &mut Vec<usize>,
    used: &mut [bool],
    acc: f64,
    best: &mut Option<(f64, Vec<usize>)>,
) {
    if labels.len() == cost.len() {
        if best.as_ref().is_none_or(|(v, _)| nan_last(acc) < *v) {
            *best = Some((nan_last(acc), labels.clone()));
        }
        return;
    }
    let g = labels.len();
    for l in 0..used.len() {
        if used[l] {
            continue;
        }
        used[l] = true;
        labels.push(l);
        assign(cost, labels, used, acc + cost[g][l], best);
        labels.pop();
        used[l] = false;
    }
}

/// Merge-sequence seeds refined by single-symbol reassignment and label swaps.
pub fn solve_greedy(problem: &AlignmentProblem, delta: f64) -> Result<AlignmentSolution, AlignError> {
    if problem.receivers.is_empty() {
        return Err(AlignError::NoReceiverCandidate);
    }
    let n = problem.sender.rows();
    let sequence = merge_sequence(&problem.sender);
    let mut loss = LossCache::new(&problem.sender);
    let mut best = None;
    for (ri, option) in problem.receivers.iter().enumerate() {
        let cap = problem.kappa.min(option.size).max(1);
        let mut seeds: Vec<Vec<usize>> = sequence
            .iter()
            .enumerate()
            .filter(|(step, _)| n - step <= cap)
            .map(|(step, p)| label_partition(p, n - step, option))
            .collect();
        let argmin: Vec<usize> = (0..n)
            .map(|t| {
                (0..option.size)
                    .min_by(|&a, &b| nan_last(option.cost(t, a)).total_cmp(&nan_last(option.cost(t, b))))
                    .expect("non-empty receiver alphabet")
            })
            .collect();
        if image_size(&argmin) <= cap {
            seeds.push(argmin);
        }
        for seed in seeds {
            let refined = refine(&mut loss, option, ri, seed, cap);
            keep(&mut best, refined);
        }
    }
    Ok(finish(best.expect("at least one seed"), delta))
}

fn refine(loss: &mut LossCache, option: &ReceiverOption, ri: usize, seed: Vec<usize>, cap: usize) -> Scored {
    let mut current = score(loss, option, ri, seed);
    loop {
        let mut improved = false;
        let n = current.map.len();
        for t in 0..n {
            for l in 0..option.size {
                if l == current.map[t] {
                    continue;
                }
                let mut map = current.map.clone();
                map[t] = l;
                if image_size(&map) > cap {
                    continue;
                }
                let s = score(loss, option, ri, map);
                if s.better_than(&current) {
                    current = s;
                    improved = true;
                }
            }
        }
        for a in 0..option.size {
            for b in a + 1..option.size {
                let map: Vec<usize> = current
                    .map
                    .iter()
                    .map(|&l| if l == a { b } else if l == b { a } else { l })
                    .collect();
                let s = score(loss, option, ri, map);
                if s.better_than(&current) {
                    current = s;
                    improved = true;
                }
            }
        }
        if !improved {
            return current;
        }
    }
}

/// Per-symbol receiver error table of `receiver` for a sender candidate.
pub fn receiver_option(
    world: &World,
    sender: &Candidate,
    receiver: &Candidate,
    eta: f64,
    mu: f64,
) -> ReceiverOption {
    let k = sender.representation_size();
    let size = receiver.representation_size();
    let mut errors = vec![0.0; k * size];
    let marginal = world.obs_marginal();
    for o in 0..world.obs_size() {
        let po = marginal.get(o);
        if po <= 0.0 {
            continue;
        }
        let posterior = posterior_target(world, receiver.target(), o).expect("observation has mass");
        let q = sender.representation(o);
        for t in 0..k {
            let qt = q.get(t);
            if qt <= 0.0 {
                continue;
            }
            for (l, dec) in receiver.decoder.iter().enumerate() {
                let kl = kl_divergence(&posterior, dec).unwrap_or(f64::INFINITY);
                errors[t * size + l] += po * qt * kl;
            }
        }
    }
    ReceiverOption { size, errors, eta, mu }
}

/// Builds the alignment problem from a sender candidate into every admissible
/// candidate of the receiver's space. Returns the problem together with the
/// receiver phase indices aligned with its options.
pub fn alignment_problem(
    world: &World,
    sender: &Candidate,
    sender_kappa: usize,
    receiver: &ProfileState,
    receiver_space: &CandidateSpace,
) -> (AlignmentProblem, Vec<usize>) {
    let phases = receiver_space.admissible_indices();
    let receivers = phases
        .iter()
        .map(|&x| {
            receiver_option(
                world,
                sender,
                &receiver_space.candidates[x],
                receiver.q.eta[x],
                directional_compatibility(receiver, receiver_space, x),
            )
        })
        .collect();
    (
        AlignmentProblem {
            sender: sender.representation_joint(world),
            kappa: sender_kappa,
            receivers,
        },
        phases,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlignOptions {
    pub delta: f64,
    pub mode: AlignMode,
    pub max_exhaustive_alphabet: usize,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            mode: AlignMode::Exhaustive,
            max_exhaustive_alphabet: DEFAULT_MAX_EXHAUSTIVE_ALPHABET,
        }
    }
}

pub fn optimize_alignment(
    world: &World,
    sender: &Candidate,
    sender_kappa: usize,
    receiver: &ProfileState,
    receiver_space: &CandidateSpace,
    opts: &AlignOptions,
) -> Result<AlignmentReport, AlignError> {
    let (problem, phases) = alignment_problem(world, sender, sender_kappa, receiver, receiver_space);
    let solution = match opts.mode {
        AlignMode::Exhaustive => solve_exhaustive(&problem, opts.delta, opts.max_exhaustive_alphabet)?,
        AlignMode::Greedy => solve_greedy(&problem, opts.delta)?,
    };
    let option = &problem.receivers[solution.receiver];
    let phase = phases[solution.receiver];
    Ok(AlignmentReport {
        receiver: receiver_space.registry.key(phase).to_string(),
        channel: AlignmentChannel::from_map(&solution.map, option.size),
        delta_i: solution.delta_i,
        receiver_error: solution.receiver_error,
        mu: option.mu,
        processable: solution.processable(),
        reason: solution.reason,
        class: solution.class,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::probkit::Dist;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_joint(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> JointDist {
        let w: Vec<f64> = (0..rows * cols).map(|_| rng.gen::<f64>() + 1e-3).collect();
        JointDist::from_weights(rows, cols, w).unwrap()
    }

    pub(crate) fn random_problem(rng: &mut ChaCha8Rng, max_alphabet: usize) -> AlignmentProblem {
        let n = rng.gen_range(1..=max_alphabet);
        let y = rng.gen_range(2..=3);
        let sender = random_joint(rng, n, y);
        let receivers = (0..rng.gen_range(1..=3))
            .map(|_| {
                let size = rng.gen_range(1..=max_alphabet);
                ReceiverOption {
                    size,
                    errors: (0..n * size).map(|_| rng.gen::<f64>() * 0.5).collect(),
                    eta: rng.gen::<f64>() * 0.8,
                    mu: rng.gen_range(-1.0..1.0),
                }
            })
            .collect();
        AlignmentProblem {
            sender,
            kappa: rng.gen_range(1..=max_alphabet),
            receivers,
        }
    }

    #[test]
    fn loss_identity_and_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let j = random_joint(&mut rng, 3, 2);
        let id = AlignmentChannel::from_channel(Channel::identity(3));
        assert!(transformation_loss(&j, &id).abs() <= 1e-12);
        let c = AlignmentChannel::from_channel(Channel::constant(3, 2));
        assert!((transformation_loss(&j, &c) - mutual_information(&j)).abs() < 1e-15);
    }

    #[test]
    fn processability_rules() {
        assert_eq!(processability(0.0, 0.1, -1.0), Processability::BelowThreshold);
        assert_eq!(processability(0.5, 0.1, -1.0), Processability::Blocked);
        assert_eq!(processability(0.5, 0.1, 0.5), Processability::Receptive);
        assert_eq!(processability(f64::INFINITY, 0.1, 0.5), Processability::Blocked);
    }

    #[test]
    fn mu_z_score() {
        let mut state = crate::agent::tests::agent_with(0).state;
        let space = crate::candidate::tests::toy_space();
        let n = space.len();
        state.theta.r = vec![0.3; n];
        assert!(space.admissible().all(|x| directional_compatibility(&state, &space, x) == 0.0));
        let adm = space.admissible_indices();
        assert!(adm.len() >= 2);
        state.theta.r = vec![0.0; n];
        state.theta.r[adm[0]] = 1.0;
        state.theta.r[adm[1]] = -1.0;
        // Two points at ±1 with the rest at 0: mean 0, std sqrt(2/m).
        let m = adm.len() as f64;
        let oracle = 1.0 / (2.0 / m).sqrt();
        assert!((directional_compatibility(&state, &space, adm[0]) - oracle).abs() < 1e-12);
    }

    #[test]
    fn size_one_receivers_lose_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sender = random_joint(&mut rng, 3, 2);
        let p = AlignmentProblem {
            sender: sender.clone(),
            kappa: 3,
            receivers: vec![ReceiverOption { size: 1, errors: vec![0.01; 3], eta: 1.0, mu: 0.0 }],
        };
        let s = solve_exhaustive(&p, 0.0, 6).unwrap();
        assert!((s.delta_i - mutual_information(&sender)).abs() < 1e-15);
        assert_eq!(s.class, AlignmentClass::Partial);
        let mut blocked = p.clone();
        blocked.receivers[0].eta = 0.0;
        assert_eq!(solve_exhaustive(&blocked, 0.0, 6).unwrap().class, AlignmentClass::Severed);
    }

    #[test]
    fn permutation_is_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let sender = random_joint(&mut rng, 3, 3);
        // Zero error only through the permutation 0→2, 1→0, 2→1.
        let perm = [2usize, 0, 1];
        let errors = (0..9).map(|i| if perm[i / 3] == i % 3 { 0.0 } else { 1.0 }).collect();
        let p = AlignmentProblem {
            sender,
            kappa: 3,
            receivers: vec![ReceiverOption { size: 3, errors, eta: 0.0, mu: -1.0 }],
        };
        for s in [solve_exhaustive(&p, 0.01, 6).unwrap(), solve_greedy(&p, 0.01).unwrap()] {
            assert_eq!(s.map, perm);
            assert!(s.delta_i.abs() < 1e-12);
            assert_eq!(s.class, AlignmentClass::Full);
        }
    }

    #[test]
    fn alphabet_cap_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = AlignmentProblem {
            sender: random_joint(&mut rng, 7, 2),
            kappa: 7,
            receivers: vec![ReceiverOption { size: 2, errors: vec![0.0; 14], eta: 0.0, mu: 0.0 }],
        };
        assert_eq!(
            solve_exhaustive(&p, 0.01, 6),
            Err(AlignError::AlphabetTooLarge { size: 7, cap: 6 })
        );
        assert!(solve_greedy(&p, 0.01).is_ok());
    }

    #[test]
    fn kappa_limits_image() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = AlignmentProblem {
            sender: random_joint(&mut rng, 4, 2),
            kappa: 2,
            receivers: vec![ReceiverOption { size: 4, errors: vec![0.0; 16], eta: 1.0, mu: 0.0 }],
        };
        let s = solve_exhaustive(&p, 0.01, 6).unwrap();
        assert!(image_size(&s.map) <= 2);
        assert!(s.delta_i > 0.0);
    }

    #[test]
    fn enlarging_receiver_never_hurts() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let sender = random_joint(&mut rng, 4, 3);
            let mut last = f64::INFINITY;
            for size in 1..=4 {
                let p = AlignmentProblem {
                    sender: sender.clone(),
                    kappa: 4,
                    receivers: vec![ReceiverOption { size, errors: vec![0.0; 4 * size], eta: 0.0, mu: 0.0 }],
                };
                let s = solve_exhaustive(&p, 0.01, 6).unwrap();
                assert!(s.delta_i <= last + 1e-12);
                last = s.delta_i;
            }
        }
    }

    #[test]
    fn greedy_matches_exhaustive_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2718);
        for i in 0..200 {
            let p = random_problem(&mut rng, 4);
            let e = solve_exhaustive(&p, 0.01, 6).unwrap();
            let g = solve_greedy(&p, 0.01).unwrap();
            assert_eq!(e.processable(), g.processable(), "instance {i}");
            assert!((e.delta_i - g.delta_i).abs() <= 1e-9, "instance {i}: {e:?} vs {g:?}");
        }
    }

    #[test]
    fn own_candidate_aligns_fully() {
        let space = crate::candidate::tests::toy_space();
        let world = crate::candidate::tests::toy_world();
        let mut state = crate::agent::tests::agent_with(space.len()).state;
        state.q.eta = vec![10.0; space.len()];
        for x in space.admissible() {
            let sender = &space.candidates[x];
            let r = optimize_alignment(&world, sender, 8, &state, &space, &AlignOptions::default()).unwrap();
            assert!(r.delta_i.abs() <= 1e-12, "{}: {r:?}", sender.key);
            assert_eq!(r.class, AlignmentClass::Full);
        }
    }

    #[test]
    fn channel_flags() {
        let a = AlignmentChannel::from_map(&[0, 1, 1], 2);
        assert!(a.deterministic);
        let soft = Channel::new(vec![Dist::uniform(2), Dist::point(2, 0)]).unwrap();
        assert!(!AlignmentChannel::from_channel(soft).deterministic);
    }

    proptest! {
        #[test]
        fn loss_respects_data_processing(seed in any::<u64>(), rows in 1usize..6, cols in 1usize..5, out in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let j = random_joint(&mut rng, rows, cols);
            let flat: Vec<f64> = (0..rows * out).map(|_| rng.gen::<f64>() + 1e-6).collect();
            let rows_d: Vec<Dist> = flat.chunks(out).map(|c| Dist::from_weights(c.to_vec()).unwrap()).collect();
            let a = AlignmentChannel::from_channel(Channel::new(rows_d).unwrap());
            prop_assert!(transformation_loss(&j, &a) >= -1e-9);
        }

        #[test]
        fn classes_partition_outcomes(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_problem(&mut rng, 4);
            let delta = 0.01;
            let s = solve_exhaustive(&p, delta, 6).unwrap();
            prop_assert!(s.delta_i >= -1e-9);
            match s.class {
                AlignmentClass::Full => prop_assert!(s.processable() && s.delta_i <= delta),
                AlignmentClass::Partial => prop_assert!(s.processable() && s.delta_i > delta),
                AlignmentClass::Severed => {
                    prop_assert!(!s.processable());
                    // No searched map into any option is processable.
                    for o in &p.receivers {
                        let mut map = vec![0usize; p.sender.rows()];
                        loop {
                            if image_size(&map) <= p.kappa {
                                prop_assert!(!processability(o.error_of(&map), o.eta, o.mu).is_processable());
                            }
                            if !advance(&mut map, o.size) { break; }
                        }
                    }
                }
            }
        }
    }
}
