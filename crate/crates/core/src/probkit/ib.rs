//! Information-bottleneck solver over a finite joint `p(O, Y)`.
//!
//! Minimizes `I(O;T) - β·I(T;Y)` by the self-consistent alternating updates:
//! the encoder becomes a softmin of `β·KL(p(Y|o) ‖ q(Y|t))` weighted by the
//! representation marginal, then marginal and decoder are recomputed by Bayes.
//! Each half-step minimizes the same functional, so the recorded objective is
//! non-increasing.

use serde::{Deserialize, Serialize};

use super::info::kl_or_inf;
use super::{Channel, Dist, JointDist};
use crate::rng;

/// Encoder entries below this are flushed to zero after each update.
const ENCODER_FLOOR: f64 = 1e-30;
/// Hardening a split between clusters with identical decoders ties in exact
/// arithmetic; this absorbs the rounding.
const HARDEN_SLACK: f64 = 1e-12;
const REASSIGN_PASSES: usize = 100;
/// Minimum objective decrease for a reassignment to count.
const REASSIGN_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IbOptions {
    pub tolerance: f64,
    pub max_iters: usize,
    pub restarts: usize,
    /// After convergence, also take the argmax (deterministic) encoder, refine
    /// it by single-symbol reassignment, and keep it when its objective is no
    /// worse.
    pub harden: bool,
}

impl Default for IbOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iters: 10_000,
            restarts: 1,
            harden: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IbResult {
    pub encoder: Channel,
    /// Bayes decoder `q(Y | t)`; rows of unused symbols hold the prior `p(Y)`.
    pub decoder: Vec<Dist>,
    pub marginal: Dist,
    pub objective_trace: Vec<f64>,
    pub i_ot: f64,
    pub i_ty: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl IbResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }
}

/// Encoder together with its consistent marginal, decoder and objective terms.
struct State {
    encoder: Vec<Vec<f64>>,
    marginal: Vec<f64>,
    decoder: Vec<Vec<f64>>,
    i_ot: f64,
    i_ty: f64,
}

struct Problem<'a> {
    p_o: Vec<f64>,
    posteriors: Vec<Option<Dist>>,
    prior_y: Dist,
    cardinality: usize,
    beta: f64,
    joint: &'a JointDist,
}

impl Problem<'_> {
    fn objective(&self, s: &State) -> f64 {
        s.i_ot - self.beta * s.i_ty
    }

    fn complete(&self, encoder: Vec<Vec<f64>>) -> State {
        let m = self.cardinality;
        let ny = self.joint.cols();
        let mut marginal = vec![0.0; m];
        let mut pty = vec![0.0; m * ny];
        for (o, row) in encoder.iter().enumerate() {
            let po = self.p_o[o];
            if po <= 0.0 {
                continue;
            }
            let cells = self.joint.row(o);
            for (t, &q) in row.iter().enumerate() {
                if q == 0.0 {
                    continue;
                }
                marginal[t] += po * q;
                for (y, &pc) in cells.iter().enumerate() {
                    pty[t * ny + y] += q * pc;
                }
            }
        }
        let decoder: Vec<Vec<f64>> = (0..m)
            .map(|t| {
                let mass: f64 = pty[t * ny..(t + 1) * ny].iter().sum();
                if marginal[t] > 0.0 && mass > 0.0 {
                    pty[t * ny..(t + 1) * ny].iter().map(|p| p / mass).collect()
                } else {
                    self.prior_y.probs().to_vec()
                }
            })
            .collect();
        let mut i_ot = 0.0;
        for (o, row) in encoder.iter().enumerate() {
            let po = self.p_o[o];
            if po <= 0.0 {
                continue;
            }
            for (t, &q) in row.iter().enumerate() {
                if q > 0.0 {
                    i_ot += po * q * (q / marginal[t]).ln();
                }
            }
        }
        let i_ty = JointDist::from_weights(m, ny, pty)
            .map(|j| super::mutual_information(&j))
            .unwrap_or(0.0);
        State {
            encoder,
            marginal,
            decoder,
            i_ot: i_ot.max(0.0),
            i_ty,
        }
    }

    fn update(&self, s: &State) -> Vec<Vec<f64>> {
        let m = self.cardinality;
        self.posteriors
            .iter()
            .enumerate()
            .map(|(o, post)| {
                let Some(post) = post else {
                    return s.encoder[o].clone();
                };
                let logits: Vec<f64> = (0..m)
                    .map(|t| {
                        if s.marginal[t] <= 0.0 {
                            return f64::NEG_INFINITY;
                        }
                        let penalty = if self.beta == 0.0 {
                            0.0
                        } else {
                            self.beta * kl_or_inf(post.probs(), &s.decoder[t])
                        };
                        s.marginal[t].ln() - penalty
                    })
                    .collect();
                normalize_logits(&logits)
            })
            .collect()
    }

    fn harden(&self, s: &State) -> Vec<Vec<f64>> {
        let m = self.cardinality;
        s.encoder
            .iter()
            .map(|row| {
                let best = crate::probkit::dist::argmax_first(row);
                let mut hard = vec![0.0; m];
                hard[best] = 1.0;
                hard
            })
            .collect()
    }
}

impl Problem<'_> {
    /// Sequential single-symbol moves on a deterministic encoder: each pass
    /// moves every observation to its best cluster (the first empty one
    /// included) and accepts strict improvements only.
    fn reassign(&self, mut state: State) -> State {
        let m = self.cardinality;
        let mut assign: Vec<usize> = state
            .encoder
            .iter()
            .map(|row| crate::probkit::dist::argmax_first(row))
            .collect();
        let encode = |assign: &[usize]| -> Vec<Vec<f64>> {
            assign
                .iter()
                .map(|&t| {
                    let mut row = vec![0.0; m];
                    row[t] = 1.0;
                    row
                })
                .collect()
        };
        for _ in 0..REASSIGN_PASSES {
            let mut moved = false;
            for o in 0..assign.len() {
                if self.p_o[o] <= 0.0 {
                    continue;
                }
                let first_empty = (0..m).find(|t| !assign.contains(t));
                let current = assign[o];
                let mut best: Option<(usize, State)> = None;
                let mut best_value = self.objective(&state) - REASSIGN_MARGIN;
                let targets: Vec<usize> = (0..m)
                    .filter(|&t| t != current && (assign.contains(&t) || Some(t) == first_empty))
                    .collect();
                for t in targets {
                    assign[o] = t;
                    let candidate = self.complete(encode(&assign));
                    let value = self.objective(&candidate);
                    if value < best_value {
                        best_value = value;
                        best = Some((t, candidate));
                    }
                }
                assign[o] = current;
                if let Some((t, candidate)) = best {
                    assign[o] = t;
                    state = candidate;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        state
    }
}

fn normalize_logits(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
        if *w < ENCODER_FLOOR {
            *w = 0.0;
        }
    }
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    weights
}

/// Runs the solver. Non-convergence within `opts.max_iters` is reported via
/// [`IbResult::converged`], not as an error.
pub fn ib_solve(
    joint: &JointDist,
    cardinality: usize,
    beta: f64,
    opts: &IbOptions,
    seed: u64,
) -> IbResult {
    assert!(cardinality >= 1, "representation cardinality must be at least 1");
    assert!(beta >= 0.0 && beta.is_finite(), "beta must be finite and non-negative");
    let p_o = joint.row_marginal().into_vec();
    let problem = Problem {
        posteriors: (0..joint.rows()).map(|o| joint.col_given_row(o)).collect(),
        prior_y: joint.col_marginal(),
        p_o,
        cardinality,
        beta,
        joint,
    };

    let mut best: Option<IbResult> = None;
    for restart in 0..opts.restarts.max(1) {
        let run = solve_once(&problem, opts, rng::derive_seed(seed, &format!("ib-restart:{restart}")));
        let better = match &best {
            None => true,
            Some(b) => run.objective() < b.objective(),
        };
        if better {
            best = Some(run);
        }
    }
    best.expect("at least one restart")
}

fn solve_once(problem: &Problem<'_>, opts: &IbOptions, seed: u64) -> IbResult {
    let mut stream = rng::stream(seed);
    let initial: Vec<Vec<f64>> = (0..problem.joint.rows())
        .map(|_| rng::dirichlet_ones(&mut stream, problem.cardinality))
        .collect();
    let mut state = problem.complete(initial);
    let mut trace = vec![problem.objective(&state)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let next = problem.complete(problem.update(&state));
        let value = problem.objective(&next);
        let previous = *trace.last().unwrap();
        trace.push(value);
        state = next;
        if (previous - value).abs() < opts.tolerance {
            converged = true;
            break;
        }
    }
    if opts.harden {
        let hard = problem.reassign(problem.complete(problem.harden(&state)));
        let value = problem.objective(&hard);
        if value <= *trace.last().unwrap() + HARDEN_SLACK {
            trace.push(value);
            state = hard;
        }
    }

    let ny = problem.joint.cols();
    let decoder = state
        .decoder
        .into_iter()
        .map(|row| Dist::from_weights(row).unwrap_or_else(|_| Dist::uniform(ny)))
        .collect();
    let encoder = Channel::new(
        state
            .encoder
            .into_iter()
            .map(|row| Dist::from_weights(row).expect("encoder rows carry mass"))
            .collect(),
    )
    .expect("encoder rows share the representation alphabet");
    IbResult {
        encoder,
        decoder,
        marginal: Dist::from_weights(state.marginal).expect("marginal carries mass"),
        objective_trace: trace,
        i_ot: state.i_ot,
        i_ty: state.i_ty,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probkit::mutual_information;

    fn noisy_joint() -> JointDist {
        JointDist::new(
            4,
            2,
            vec![0.225, 0.025, 0.2, 0.05, 0.05, 0.2, 0.025, 0.225],
        )
        .unwrap()
    }

    #[test]
    fn beta_zero_collapses() {
        let r = ib_solve(&noisy_joint(), 3, 0.0, &IbOptions::default(), 11);
        assert!(r.i_ot <= 1e-6, "I(O;T) = {}", r.i_ot);
    }

    #[test]
    fn single_symbol_carries_nothing() {
        let r = ib_solve(&noisy_joint(), 1, 50.0, &IbOptions::default(), 5);
        assert_eq!(r.i_ty, 0.0);
        assert_eq!(r.i_ot, 0.0);
    }

    #[test]
    fn trace_is_non_increasing() {
        for seed in 0..20 {
            let r = ib_solve(&noisy_joint(), 3, 4.0, &IbOptions::default(), seed);
            for w in r.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "seed {seed}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn same_seed_same_result() {
        let a = ib_solve(&noisy_joint(), 2, 3.0, &IbOptions::default(), 42);
        let b = ib_solve(&noisy_joint(), 2, 3.0, &IbOptions::default(), 42);
        assert_eq!(a, b);
    }

    #[test]
    fn large_beta_recovers_relevant_information() {
        let j = JointDist::new(3, 2, vec![0.3, 0.0, 0.0, 0.3, 0.2, 0.2]).unwrap();
        let opts = IbOptions {
            restarts: 3,
            ..IbOptions::default()
        };
        let r = ib_solve(&j, 3, 50.0, &opts, 1);
        assert!((r.i_ty - mutual_information(&j)).abs() < 1e-6);
    }
}
