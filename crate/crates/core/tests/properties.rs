//! Property tests for the model invariants. Instances are drawn from seeds
//! so that any failure reproduces from the printed seed.

mod common;

use std::collections::BTreeSet;

use common::{max_edges, random_graph, random_state, rng};
use linkgame::analysis::{horizon_bound, oracle_game_value, OracleOptions, Player};
use linkgame::scenario::{parse_scenario, serialize_scenario, OpponentSchedule, Scenario};
use linkgame::dynamics::{
    matrix_exponential_action, simulate, utility, SwitchingSchedule, WeightFunction,
};
use linkgame::graph::{
    assemble_system_matrix, max_gap, AdversaryAction, DesignerAction, Edge, Potentials, ScoredEdgeSet,
    WeightedGraph,
};
use linkgame::quadrature::GaussLegendre;
use linkgame::strategies::{
    adversary_maxmin_first, adversary_minmax_response, combinations, designer_algorithm_one,
    designer_maxmin_response, play_maxmin, play_minmax, GameConfig, GameOrder,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64, max_n: usize) -> (ChaCha8Rng, WeightedGraph) {
    let mut r = rng(seed);
    let n = r.gen_range(2..=max_n);
    let m = r.gen_range(n - 1..=max_edges(n));
    let g = random_graph(&mut r, n, m, (0.1, 3.0));
    (r, g)
}

fn random_actions(r: &mut ChaCha8Rng, g: &WeightedGraph, ell: usize, b: f64) -> (AdversaryAction, DesignerAction) {
    let mut edges = g.edges().to_vec();
    edges.shuffle(r);
    let u = AdversaryAction::new(g, edges[..ell].iter().copied(), ell).unwrap();
    edges.shuffle(r);
    let v = DesignerAction::new(g, edges[..ell].iter().copied(), b, ell).unwrap();
    (u, v)
}

fn one_interval_utility(g: &WeightedGraph, x0: &[f64], u: &AdversaryAction, v: &DesignerAction, delta: f64) -> f64 {
    let s = SwitchingSchedule::constant(delta, u.clone(), v.clone(), delta).unwrap();
    utility(&simulate(g, &s, x0).unwrap(), &WeightFunction::Constant, &GaussLegendre::new(32))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn system_matrix_is_a_negative_laplacian(seed in any::<u64>()) {
        let (mut r, g) = instance(seed, 8);
        let ell = r.gen_range(0..=g.edge_count());
        let b = r.gen_range(0.0..2.0);
        let (u, v) = random_actions(&mut r, &g, ell, b);
        let a = assemble_system_matrix(&g, &u, &v).unwrap();
        let n = g.node_count();
        for i in 0..n {
            prop_assert!(a.row(i).sum().abs() < 1e-12);
            for j in 0..n {
                prop_assert_eq!(a[(i, j)], a[(j, i)]);
                if i != j {
                    prop_assert!(a[(i, j)] >= 0.0);
                }
            }
        }
    }

    #[test]
    fn potentials_are_nonpositive_and_shift_invariant(seed in any::<u64>(), shift in -100i32..100) {
        let (mut r, g) = instance(seed, 8);
        let x = random_state(&mut r, g.node_count(), (-4.0, 4.0));
        let shifted: Vec<f64> = x.iter().map(|v| v + shift as f64).collect();
        let p = Potentials::from_state(&g, &x).unwrap();
        let q = Potentials::from_state(&g, &shifted).unwrap();
        for (a, b) in p.values().iter().zip(q.values()) {
            prop_assert!(*a <= 0.0);
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn phi_ell_is_monotone_and_deterministic(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = r.gen_range(1..12);
        // coarse scores produce plenty of exact ties
        let mut entries: Vec<(Edge, f64)> = (0..m)
            .map(|k| (Edge::new(k, k + 1), -(r.gen_range(0..4) as f64)))
            .collect();
        let s = ScoredEdgeSet::from_candidates(entries.clone());
        entries.shuffle(&mut r);
        let t = ScoredEdgeSet::from_candidates(entries);
        for ell in 0..m {
            let small: BTreeSet<Edge> = s.phi_ell(ell).into_iter().collect();
            let large: BTreeSet<Edge> = s.phi_ell(ell + 1).into_iter().collect();
            prop_assert!(small.is_subset(&large));
            prop_assert_eq!(s.phi_ell(ell), t.phi_ell(ell));
        }
    }

    #[test]
    fn propagator_is_doubly_stochastic(seed in any::<u64>(), t in 0.0f64..10.0) {
        let (mut r, g) = instance(seed, 7);
        let ell = r.gen_range(0..=g.edge_count().min(2));
        let (u, v) = random_actions(&mut r, &g, ell, 1.0);
        let a = assemble_system_matrix(&g, &u, &v).unwrap();
        let n = g.node_count();
        let mut col_sums = vec![0.0; n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = matrix_exponential_action(&a, t, &e).unwrap();
            prop_assert!((col.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            for (i, c) in col.iter().enumerate() {
                prop_assert!(*c >= -1e-12);
                col_sums[i] += c;
            }
        }
        for s in col_sums {
            prop_assert!((s - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn switched_flow_conserves_average_and_contracts(seed in any::<u64>()) {
        let (mut r, g) = instance(seed, 7);
        let n = g.node_count();
        let ell = r.gen_range(0..=g.edge_count().min(2));
        let k = r.gen_range(1..=5);
        let tau = r.gen_range(0.01..1.0);
        let bp: Vec<f64> = (0..=k).map(|i| i as f64 * tau).collect();
        let actions = (0..k).map(|_| random_actions(&mut r, &g, ell, 0.7)).collect();
        let s = SwitchingSchedule::new(bp, actions, tau).unwrap();
        let x0 = random_state(&mut r, n, (-3.0, 3.0));
        let traj = simulate(&g, &s, &x0).unwrap();
        let sum0: f64 = x0.iter().sum();
        for x in traj.breakpoint_states() {
            prop_assert!((x.sum() - sum0).abs() <= 1e-9);
        }
        let grid = traj.uniform_grid(200);
        let mut last = f64::INFINITY;
        for t in grid {
            let d = traj.disagreement_sq(t).sqrt();
            prop_assert!(d <= last + 1e-12);
            last = d;
        }
    }

    #[test]
    fn simulation_composes_over_split_intervals(seed in any::<u64>(), frac in 0.05f64..0.95) {
        let (mut r, g) = instance(seed, 7);
        let ell = r.gen_range(0..=g.edge_count().min(2));
        let (u, v) = random_actions(&mut r, &g, ell, 0.5);
        let x0 = random_state(&mut r, g.node_count(), (-3.0, 3.0));
        let t2 = r.gen_range(0.1..5.0);
        let t1 = frac * t2;
        let direct = simulate(&g, &SwitchingSchedule::constant(t2, u.clone(), v.clone(), t2).unwrap(), &x0).unwrap();
        let split = SwitchingSchedule::new(vec![0.0, t1, t2], vec![(u.clone(), v.clone()), (u, v)], t1.min(t2 - t1)).unwrap();
        let split = simulate(&g, &split, &x0).unwrap();
        for (a, b) in direct.final_state().iter().zip(split.final_state().iter()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn utility_converges_in_quadrature_nodes(seed in any::<u64>(), decay in prop::bool::ANY) {
        let (mut r, g) = instance(seed, 6);
        let ell = r.gen_range(0..=g.edge_count().min(2));
        let k = r.gen_range(1..=3);
        let tau = r.gen_range(0.05..2.0);
        let bp: Vec<f64> = (0..=k).map(|i| i as f64 * tau).collect();
        let actions = (0..k).map(|_| random_actions(&mut r, &g, ell, 1.0)).collect();
        let s = SwitchingSchedule::new(bp, actions, tau).unwrap();
        let x0 = random_state(&mut r, g.node_count(), (-1.0, 1.0));
        let traj = simulate(&g, &s, &x0).unwrap();
        let w = if decay { WeightFunction::ExponentialDecay { alpha: 0.5 } } else { WeightFunction::Constant };
        let coarse = utility(&traj, &w, &GaussLegendre::new(32));
        let fine = utility(&traj, &w, &GaussLegendre::new(64));
        prop_assert!((coarse - fine).abs() <= 1e-8 * fine.abs().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn strategies_saturate_the_budget(seed in any::<u64>()) {
        let (mut r, g) = instance(seed, 7);
        let m = g.edge_count();
        let ell = r.gen_range(0..=m / 2);
        let b = r.gen_range(0.0..2.0);
        let x = random_state(&mut r, g.node_count(), (-2.0, 2.0));
        prop_assume!(max_gap(&x) > 1e-6);
        let nu = Potentials::from_state(&g, &x).unwrap();
        let v = designer_algorithm_one(&g, &nu, ell, b);
        prop_assert_eq!(v.boosted.len(), ell);
        prop_assert_eq!(adversary_minmax_response(&g, &v, &nu, ell).broken.len(), ell);
        let u = adversary_maxmin_first(&g, &nu, ell, b);
        prop_assert_eq!(u.broken.len(), ell);
        let w = designer_maxmin_response(&g, &u, &nu, ell, b);
        prop_assert_eq!(w.boosted.len(), ell);
        prop_assert!(w.boosted.iter().all(|e| !u.is_broken(*e)));
    }

    #[test]
    fn adversary_ranking_improves_utility(seed in any::<u64>()) {
        let (mut r, g) = instance(seed, 5);
        let m = g.edge_count();
        prop_assume!(m >= 2);
        let ell = r.gen_range(1..m);
        let b = r.gen_range(0.0..2.0);
        let x0 = random_state(&mut r, g.node_count(), (-1.0, 1.0));
        let (u, v) = random_actions(&mut r, &g, ell, b);
        let nu = Potentials::from_state(&g, &x0).unwrap();
        let ranked = adversary_minmax_response(&g, &v, &nu, ell).broken;
        let delta = 1e-4;
        let base = one_interval_utility(&g, &x0, &u, &v, delta);
        for f in u.broken.iter().filter(|f| !ranked.contains(f)) {
            for e in ranked.iter().filter(|e| !u.broken.contains(e)) {
                let mut swapped = u.clone();
                swapped.broken.remove(f);
                swapped.broken.insert(*e);
                let j = one_interval_utility(&g, &x0, &swapped, &v, delta);
                prop_assert!(j >= base - 1e-10, "swap {} -> {}: {} < {}", f, e, j, base);
            }
        }
    }

    #[test]
    fn designer_ranking_is_best_over_surviving_subsets(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(3..=5);
        let m = r.gen_range(n - 1..=max_edges(n).min(6));
        let g = random_graph(&mut r, n, m, (0.1, 3.0));
        let ell = r.gen_range(1..=m / 2);
        let b = r.gen_range(0.1..2.0);
        let x0 = random_state(&mut r, n, (-1.0, 1.0));
        let (u, _) = random_actions(&mut r, &g, ell, b);
        let nu = Potentials::from_state(&g, &x0).unwrap();
        let best = designer_maxmin_response(&g, &u, &nu, ell, b);
        let delta = 1e-4;
        let j_best = one_interval_utility(&g, &x0, &u, &best, delta);
        let pool: Vec<Edge> = g.edges().iter().copied().filter(|e| !u.is_broken(*e)).collect();
        for idx in combinations(pool.len(), ell.min(pool.len())) {
            let other = DesignerAction::new(&g, idx.iter().map(|&k| pool[k]), b, ell).unwrap();
            let j = one_interval_utility(&g, &x0, &u, &other, delta);
            prop_assert!(j_best <= j + 1e-10, "{:?}: {} > {}", other.boosted, j_best, j);
        }
    }

    #[test]
    fn strategies_depend_on_differences_only(seed in any::<u64>(), shift in -50i32..50) {
        let mut r = rng(seed);
        let n = r.gen_range(3..=5);
        let m = r.gen_range(n - 1..=max_edges(n));
        let g = random_graph(&mut r, n, m, (0.5, 2.0));
        let ell = r.gen_range(1..=m / 2 + 1).min(m);
        let x0 = random_state(&mut r, n, (-1.0, 1.0));
        let shifted: Vec<f64> = x0.iter().map(|x| x + shift as f64).collect();
        let cfg = GameConfig::new(0.02, ell, r.gen_range(0.1..2.0), 0.01);
        for order in [GameOrder::MinMax, GameOrder::MaxMin] {
            let play = |x: &[f64]| match order {
                GameOrder::MinMax => play_minmax(&g, x, &cfg, None).unwrap(),
                GameOrder::MaxMin => play_maxmin(&g, x, &cfg, None).unwrap(),
            };
            let (a, b) = (play(&x0), play(&shifted));
            for (p, q) in a.intervals.iter().zip(&b.intervals) {
                prop_assert_eq!(&p.broken, &q.broken);
                prop_assert_eq!(&p.boosted, &q.boosted);
            }
        }
    }

    #[test]
    fn horizon_bound_is_monotone_in_epsilon(seed in any::<u64>()) {
        let (mut r, g) = instance(seed, 6);
        let x0 = random_state(&mut r, g.node_count(), (0.5, 2.0));
        let mut eps: Vec<f64> = (0..5).map(|_| r.gen_range(1e-3..1.0)).collect();
        eps.sort_by(f64::total_cmp);
        let mut last = f64::INFINITY;
        for e in eps {
            let t = horizon_bound(&g, &x0, e).unwrap().t_max;
            prop_assert!(t <= last);
            last = t;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn maxmin_oracle_never_boosts_broken_links(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(3..=4);
        let m = r.gen_range(n - 1..=max_edges(n).min(5));
        let g = random_graph(&mut r, n, m, (0.5, 2.0));
        let x0 = random_state(&mut r, n, (-1.0, 1.0));
        let ell = r.gen_range(1..=2).min(m);
        let cfg = GameConfig::new(2e-3, ell, 1.0, 1e-3);
        for sub_budget in [false, true] {
            let opts = OracleOptions { cap: 1_000_000, sub_budget };
            let lo = oracle_game_value(&g, &x0, &cfg, GameOrder::MaxMin, &opts).unwrap();
            for (u, v) in lo.broken.iter().zip(&lo.boosted) {
                prop_assert!(v.iter().all(|e| !u.contains(e)));
            }
        }
    }

    #[test]
    fn matched_play_values_agree_when_the_condition_holds(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 40.0)]).unwrap();
        // gaps in [1, 1.2] and max |x| = 1.1 give gamma below 4.84
        let d1 = r.gen_range(1.0..1.2);
        let d2 = r.gen_range(1.0..1.2);
        let x0 = [-d1 + 0.1, 0.1, 0.1 + d2];
        let eps = 1.0;
        let cond = linkgame::analysis::spe_condition(&g, 0.0, eps, &x0).unwrap();
        let b = r.gen_range(0.0..1.0) * cond.bound.min(1.0);
        prop_assume!(linkgame::analysis::spe_condition(&g, b, eps, &x0).unwrap().holds);
        let cfg = GameConfig::new(1e-4, 1, b, 1e-4);
        let hi = play_minmax(&g, &x0, &cfg, None).unwrap().value;
        let lo = play_maxmin(&g, &x0, &cfg, None).unwrap().value;
        prop_assert!((hi - lo).abs() <= 1e-6 * hi.max(1.0));
    }
}

fn random_scenario(seed: u64) -> Scenario {
    let (mut r, graph) = instance(seed, 6);
    let n = graph.node_count();
    let m = graph.edge_count();
    let x0 = random_state(&mut r, n, (-5.0, 5.0));
    let dwell = r.gen_range(1e-4..1.0);
    let horizon = dwell * r.gen_range(1..6) as f64;
    let mut config = GameConfig::new(horizon, r.gen_range(0..=m), r.gen_range(0.0..3.0), dwell);
    if r.gen_bool(0.5) {
        config.weight = WeightFunction::ExponentialDecay { alpha: r.gen_range(0.01..2.0) };
    }
    if r.gen_bool(0.3) {
        config.rho = Some(dwell * r.gen_range(1.0..2.0));
    }
    if r.gen_bool(0.3) {
        config.quad_nodes = r.gen_range(4..64);
    }
    let epsilon = r.gen_bool(0.5).then(|| r.gen_range(1e-3..1.0));
    let nu_override = if r.gen_bool(0.4) {
        graph.edges().iter().map(|&e| (e, -r.gen_range(0.0..10.0))).collect()
    } else {
        Default::default()
    };
    let opponent = r.gen_bool(0.4).then(|| {
        let k = config.interval_count();
        let intervals = (0..k)
            .map(|_| {
                let mut edges = graph.edges().to_vec();
                edges.shuffle(&mut r);
                let mut chosen = edges[..config.budget].to_vec();
                chosen.sort();
                chosen
            })
            .collect();
        let role = if r.gen_bool(0.5) { Player::Adversary } else { Player::Designer };
        OpponentSchedule { role, intervals }
    });
    Scenario { graph, x0, config, epsilon, nu_override, opponent }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn scenarios_round_trip(seed in any::<u64>()) {
        let s = random_scenario(seed);
        let text = serialize_scenario(&s);
        let back = parse_scenario(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(serialize_scenario(&back), text);
    }
}
