//! Checks on the configs shipped under `configs/`: hand-computed tables,
//! enumeration oracles and the frozen two-agent record.

mod common;

use mim_core::agent::{candidate_errors, foregrounding_direction, plan_priority, prediction_error, PlanContext};
use mim_core::align::{alignment_problem, processability, solve_exhaustive, Processability, ReceiverOption};
use mim_core::candidate::{admissibility_gap, constraint_sequence, Direction, Domain, Horizon};
use mim_core::config::{prepare, Prepared};
use mim_core::world::posterior_target;
use mim_core::{Plan, PlanKind};

use common::{all_maps, check_golden, load, merge, mi, shipped_run_configs};

fn two_agent() -> (mim_core::RunConfig, Prepared) {
    let cfg = load("runs/two_agent.json");
    let prepared = prepare(&cfg).unwrap();
    (cfg, prepared)
}

#[test]
fn every_shipped_config_validates() {
    for name in shipped_run_configs() {
        let cfg = load(&name);
        prepare(&cfg).unwrap_or_else(|e| panic!("{name}: {e}"));
        let again = mim_core::config::parse_config_str(&cfg.to_canonical()).unwrap();
        assert_eq!(again.to_canonical(), cfg.to_canonical(), "{name} is not canonical-idempotent");
    }
}

#[test]
fn world_posteriors_match_enumeration() {
    let cfg = load("runs/two_agent.json");
    let spec = &cfg.world;
    let world = mim_core::build_world(spec).unwrap();
    let n = spec.obs_size;
    let latents = spec.joint.len();
    for (t, target) in spec.targets.iter().enumerate() {
        let size = target.table.iter().max().unwrap() + 1;
        let mut prior = vec![0.0; size];
        for o in 0..n {
            let mut cells = vec![0.0; size];
            for l in 0..latents {
                cells[target.table[l]] += spec.joint[l] * spec.obs_channel[l * n + o];
            }
            let po: f64 = cells.iter().sum();
            let post = posterior_target(&world, t, o).unwrap();
            for y in 0..size {
                assert!((post.get(y) - cells[y] / po).abs() < 1e-12);
                prior[y] += po * post.get(y);
            }
        }
        let direct = world.target_prior(t);
        for (y, p) in prior.iter().enumerate() {
            assert!((p - direct.get(y)).abs() < 1e-12);
        }
    }
}

#[test]
fn averaged_prediction_error_is_the_gap() {
    for name in shipped_run_configs() {
        let prepared = prepare(&load(&name)).unwrap();
        let w = &prepared.world;
        for a in &prepared.agents {
            for c in &a.space.candidates {
                let avg: f64 = (0..w.obs_size())
                    .map(|o| w.obs_marginal().get(o) * prediction_error(w, c, o).unwrap_or(f64::INFINITY))
                    .sum();
                let gap = admissibility_gap(w, c);
                assert!(avg == gap || (avg - gap).abs() < 1e-9, "{name} {}", c.key);
            }
        }
    }
}

#[test]
fn explorer_direction_table() {
    let (_, prepared) = two_agent();
    let explorer = prepared.agent("explorer").unwrap();
    // e − s from the profile: e is 1.0 on the regime basis and 0.5 elsewhere;
    // s is 0.6 on P/*/fine and 0.2 elsewhere.
    let expected = |key: &str| match key {
        "R/regime/fine" | "R/regime/coarse" | "P/regime/coarse" => 0.8,
        "P/regime/fine" => 0.4,
        "P/full/fine" | "P/mirror/fine" => -0.1,
        _ => 0.3,
    };
    let space = &explorer.space;
    for (errors, shift) in [(0.0, 0.0), (0.25, 0.25)] {
        let v = foregrounding_direction(&explorer.agent, space, &vec![errors; space.len()]);
        for (x, key) in space.registry.keys().iter().enumerate() {
            assert!((v[x] - expected(key) - shift).abs() < 1e-12, "{key}: {}", v[x]);
        }
    }
    let w = &prepared.world;
    let errs = candidate_errors(w, space, 2);
    let v = foregrounding_direction(&explorer.agent, space, &errs);
    for (x, key) in space.registry.keys().iter().enumerate() {
        if errs[x].is_finite() {
            assert!((v[x] - expected(key) - errs[x]).abs() < 1e-12);
        }
    }
}

#[test]
fn te_dominant_ranks_structural_explorative_first() {
    let (cfg, prepared) = two_agent();
    let explorer = prepared.agent("explorer").unwrap();
    let seq = constraint_sequence(&explorer.agent.state.theta.r, &explorer.space.registry, &cfg.labeling).unwrap();
    let (first, strength) = seq.ranking[0];
    assert_eq!((first.domain, first.direction), (Domain::Structural, Direction::Explorative));
    assert_eq!(first.short_name(), "Te");
    // Both coarse full-basis points carry r = 2.
    assert!((strength - 2.0).abs() < 1e-12);
    let (second, s2) = seq.ranking[1];
    assert_eq!((second.domain, second.direction), (Domain::Empirical, Direction::Stabilizing));
    assert!((s2 - 1.0).abs() < 1e-12);
}

#[test]
fn explorer_priority_is_linear() {
    let (_, prepared) = two_agent();
    let agent = &prepared.agent("explorer").unwrap().agent;
    let costs = mim_core::agent::PlanCosts {
        body: 0.1,
        time: 0.1,
        skill: 0.1,
        coop: 0.1,
        comm: 0.1,
    };
    let ctx = PlanContext {
        expected_dl: 0.4,
        u: 0.0,
        c_comp: 0.1,
        c_obs: 0.1,
    };
    for kind in PlanKind::ALL {
        let plan = Plan {
            kind,
            candidate: 0,
            peer: None,
            costs,
        };
        for horizon in [Horizon::Fine, Horizon::Coarse] {
            let bonus = if kind.suits(horizon) { 1.0 } else { 0.0 };
            // All weights are 1: 0.4 − 0.1 − 0.1 − 0.5 + bonus.
            let pi = plan_priority(agent, &plan, &ctx, horizon).unwrap();
            assert!((pi - (-0.3 + bonus)).abs() < 1e-12, "{kind:?} {horizon:?}: {pi}");
        }
    }
}

#[test]
fn h2_receiver_mu_table() {
    let cfg = load("scenarios/h2.json");
    let prepared = prepare(&cfg).unwrap();
    let receiver = prepared.agent("receiver").unwrap();
    let space = &receiver.space;
    assert_eq!(space.admissible_indices().len(), 4, "all four receiver points are admissible");
    // r = (1, 0.5, 0, 0): mean 0.375, population std sqrt(0.171875).
    let std = 0.171875f64.sqrt();
    for (x, key) in space.registry.keys().iter().enumerate() {
        let r = match key.as_str() {
            "R/full/fine" => 1.0,
            "R/full/coarse" => 0.5,
            _ => 0.0,
        };
        let mu = mim_core::align::directional_compatibility(&receiver.agent.state, space, x);
        assert!((mu - (r - 0.375) / std).abs() < 1e-12, "{key}: {mu}");
    }
}

/// Every processable-first optimum over deterministic maps, by direct enumeration.
fn enumerated_optimum(
    sender: &mim_core::JointDist,
    kappa: usize,
    receivers: &[ReceiverOption],
) -> f64 {
    let (k, y) = (sender.rows(), sender.cols());
    let p: Vec<f64> = (0..k).flat_map(|t| sender.row(t).to_vec()).collect();
    let base = mi(k, y, &p);
    let mut best = (true, f64::INFINITY);
    for opt in receivers {
        for map in all_maps(k, opt.size) {
            let mut image = map.clone();
            image.sort();
            image.dedup();
            if image.len() > kappa {
                continue;
            }
            let blocked = processability(opt.error_of(&map), opt.eta, opt.mu) == Processability::Blocked;
            let di = base - mi(opt.size, y, &merge(k, y, &p, &map, opt.size));
            if (blocked, di) < best {
                best = (blocked, di);
            }
        }
    }
    best.1
}

fn shipped_alignment_pairs() -> Vec<(String, String, String)> {
    let mut pairs = Vec::new();
    for name in shipped_run_configs() {
        let cfg = load(&name);
        let ids: Vec<String> = cfg.agents.iter().map(|a| a.id.clone()).collect();
        for s in &ids {
            for r in ids.iter().filter(|r| *r != s) {
                pairs.push((name.clone(), s.clone(), r.clone()));
            }
        }
    }
    pairs
}

#[test]
fn exhaustive_alignment_matches_enumeration_on_shipped_pairs() {
    let mut checked = 0;
    for (name, s, r) in shipped_alignment_pairs() {
        let cfg = load(&name);
        let prepared = prepare(&cfg).unwrap();
        let (sender, receiver) = (prepared.agent(&s).unwrap(), prepared.agent(&r).unwrap());
        for x in sender.space.admissible_indices() {
            let cand = &sender.space.candidates[x];
            let (problem, _) = alignment_problem(
                &prepared.world,
                cand,
                sender.agent.state.zeta.kappa,
                &receiver.agent.state,
                &receiver.space,
            );
            if problem.receivers.is_empty()
                || problem.sender.rows() > 4
                || problem.receivers.iter().any(|o| o.size > 4)
            {
                continue;
            }
            let solved = solve_exhaustive(&problem, cfg.engine.delta, 6).unwrap();
            let oracle = enumerated_optimum(&problem.sender, problem.kappa, &problem.receivers);
            assert!((solved.delta_i - oracle).abs() < 1e-12, "{name} {s}->{r} {}", cand.key);

            // Adding a duplicate label to every receiver alphabet cannot hurt.
            let mut wider = problem.clone();
            for o in &mut wider.receivers {
                let size = o.size;
                let rows = problem.sender.rows();
                let mut errors = Vec::with_capacity(rows * (size + 1));
                for t in 0..rows {
                    errors.extend_from_slice(&o.errors[t * size..(t + 1) * size]);
                    errors.push(o.errors[t * size]);
                }
                o.errors = errors;
                o.size += 1;
            }
            let widened = solve_exhaustive(&wider, cfg.engine.delta, 6).unwrap();
            assert!(widened.delta_i <= solved.delta_i + 1e-12);
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn two_agent_record_matches_golden() {
    let (cfg, _) = two_agent();
    let record = mim_core::run(&cfg).unwrap();
    assert_eq!(record.events.len(), 100);
    check_golden("two_agent/record.json", &record.to_canonical()).unwrap();
}

#[test]
fn h1_foreground_histograms_match_golden() {
    let cfg = load("scenarios/h1.json");
    let record = mim_core::run(&cfg).unwrap();
    let hist: std::collections::BTreeMap<_, _> = record
        .metrics
        .agents
        .iter()
        .map(|(id, m)| (id.clone(), m.foreground.clone()))
        .collect();
    check_golden("h1/foreground.json", &mim_core::canonical::to_canonical_string(&hist)).unwrap();
}
