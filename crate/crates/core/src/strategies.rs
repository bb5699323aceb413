//! Potential-theoretic strategies of both players and the engines that play
//! the min–max and max–min games over `[0, T]`.
//!
//! Every rule is a ranking of edges by a score built from the potentials
//! `nu_ij = -(x_i - x_j)^2`:
//!
//! | rule                          | who       | game    | score                           |
//! |-------------------------------|-----------|---------|---------------------------------|
//! | [`adversary_minmax_response`] | adversary | min–max | `(a_ij + v_ij) nu_ij`           |
//! | [`designer_algorithm_one`]    | designer  | min–max | subset search, then `nu_ij`     |
//! | [`adversary_maxmin_first`]    | adversary | max–min | min of `a nu` and `(a + b) nu`  |
//! | [`designer_maxmin_response`]  | designer  | max–min | `nu_ij` over surviving links    |

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    interval_dissipation, simulate, uniform_breakpoints, utility, SwitchingSchedule, Trajectory, WeightFunction,
    DEFAULT_QUAD_NODES,
};
use crate::error::{Error, Result};
use crate::graph::{AdversaryAction, DesignerAction, Edge, Potentials, ScoredEdgeSet, WeightedGraph};
use crate::quadrature::GaussLegendre;

/// Max pairwise gap below which the state counts as consensus.
pub const CONSENSUS_TOL: f64 = 1e-10;

/// Parameters shared by both players.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub horizon: f64,
    pub budget: usize,
    pub boost: f64,
    pub dwell: f64,
    #[serde(default)]
    pub weight: WeightFunction,
    /// Re-evaluation period; `None` means the dwell time.
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default = "default_quad_nodes")]
    pub quad_nodes: usize,
}

fn default_quad_nodes() -> usize {
    DEFAULT_QUAD_NODES
}

impl GameConfig {
    pub fn new(horizon: f64, budget: usize, boost: f64, dwell: f64) -> Self {
        GameConfig {
            horizon,
            budget,
            boost,
            dwell,
            weight: WeightFunction::Constant,
            rho: None,
            quad_nodes: DEFAULT_QUAD_NODES,
        }
    }

    pub fn period(&self) -> f64 {
        self.rho.unwrap_or(self.dwell)
    }

    pub fn validate(&self, g: &WeightedGraph) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.dwell > 0.0 && self.dwell.is_finite()) {
            return bad(format!("dwell time must be positive, got {}", self.dwell));
        }
        if !(self.period() >= self.dwell) {
            return bad(format!("re-evaluation period {} is shorter than the dwell time {}", self.period(), self.dwell));
        }
        if self.budget > g.edge_count() {
            return bad(format!("budget {} exceeds the {} links of the graph", self.budget, g.edge_count()));
        }
        if !(self.boost >= 0.0 && self.boost.is_finite()) {
            return bad(format!("boost must be non-negative, got {}", self.boost));
        }
        if self.quad_nodes == 0 {
            return bad("quadrature needs at least one node".into());
        }
        self.weight.validate()
    }

    /// Interval boundaries the players act on.
    pub fn breakpoints(&self) -> Vec<f64> {
        uniform_breakpoints(self.horizon, self.period())
    }

    pub fn interval_count(&self) -> usize {
        self.breakpoints().len() - 1
    }

    pub fn quadrature(&self) -> GaussLegendre {
        GaussLegendre::new(self.quad_nodes)
    }
}

fn at_consensus(nu: &Potentials) -> bool {
    nu.values().iter().all(|v| v.abs() < CONSENSUS_TOL * CONSENSUS_TOL)
}

/// Breaks the `ell` links with the smallest weighted potentials
/// `(a_ij + v_ij) nu_ij`, the set `L_ell(v)`.
pub fn adversary_minmax_response(g: &WeightedGraph, v: &DesignerAction, nu: &Potentials, ell: usize) -> AdversaryAction {
    AdversaryAction {
        broken: nu.weighted(g, v).phi_ell(ell).into_iter().collect(),
        budget: ell,
    }
}

/// Trace of one run of the designer's subset search.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmOneTrace {
    /// `L_ell(0)` in ascending score order.
    pub attacked: Vec<Edge>,
    /// Size `i` and set `S` of the first successful search, if any.
    pub protecting: Option<(usize, Vec<Edge>)>,
    pub action: DesignerAction,
}

/// The designer's min–max strategy: try to push attacked links out of the
/// adversary's ranking by boosting other links, otherwise reinforce the
/// links with the most negative potentials among the unattacked ones.
pub fn designer_algorithm_one(g: &WeightedGraph, nu: &Potentials, ell: usize, b: f64) -> DesignerAction {
    designer_algorithm_one_traced(g, nu, ell, b).action
}

pub fn designer_algorithm_one_traced(g: &WeightedGraph, nu: &Potentials, ell: usize, b: f64) -> AlgorithmOneTrace {
    let idle = DesignerAction::idle(b, ell);
    let attacked = nu.weighted(g, &idle).phi_ell(ell);
    if at_consensus(nu) {
        return AlgorithmOneTrace {
            attacked,
            protecting: None,
            action: idle,
        };
    }
    let attacked_set: BTreeSet<Edge> = attacked.iter().copied().collect();
    let pool: Vec<Edge> = g.edges().iter().copied().filter(|e| !attacked_set.contains(e)).collect();
    let potentials = nu.scored(g);
    let nonzero = |e: Edge| potentials.score(e).is_some_and(|s| s.abs() >= CONSENSUS_TOL * CONSENSUS_TOL);
    let finish = |mut chosen: Vec<Edge>| {
        chosen.retain(|e| nonzero(*e));
        // top up to the budget; extra boosts on attacked links change nothing
        if chosen.len() < ell {
            let taken: BTreeSet<Edge> = chosen.iter().copied().collect();
            let extra = potentials.filter(|e| !taken.contains(&e) && nonzero(e)).phi_ell(ell - chosen.len());
            chosen.extend(extra);
        }
        DesignerAction {
            boosted: chosen.into_iter().collect(),
            boost: b,
            budget: ell,
        }
    };

    // the i-th attacked link, counted from the least negative score
    for i in (1..=attacked.len()).rev() {
        let target = attacked[attacked.len() - i];
        for subset in combinations(pool.len(), i) {
            let s: Vec<Edge> = subset.iter().map(|&k| pool[k]).collect();
            let trial = DesignerAction {
                boosted: s.iter().copied().collect(),
                boost: b,
                budget: ell,
            };
            let reranked: BTreeSet<Edge> = nu.weighted(g, &trial).phi_ell(ell).into_iter().collect();
            if reranked.contains(&target) {
                continue;
            }
            let rest = potentials
                .filter(|e| !reranked.contains(&e) && !trial.boosted.contains(&e))
                .phi_ell(ell - i);
            let mut chosen = s.clone();
            chosen.extend(rest);
            return AlgorithmOneTrace {
                attacked,
                protecting: Some((i, s)),
                action: finish(chosen),
            };
        }
    }
    let fallback = potentials.filter(|e| !attacked_set.contains(&e)).phi_ell(ell);
    AlgorithmOneTrace {
        attacked,
        protecting: None,
        action: finish(fallback),
    }
}

/// Boosts the `ell` surviving links with the smallest potentials, the set
/// `F_ell(u)`; boosts every survivor when fewer than `ell` remain.
pub fn designer_maxmin_response(
    g: &WeightedGraph,
    u: &AdversaryAction,
    nu: &Potentials,
    ell: usize,
    b: f64,
) -> DesignerAction {
    DesignerAction {
        boosted: nu.scored(g).filter(|e| !u.is_broken(e)).phi_ell(ell).into_iter().collect(),
        boost: b,
        budget: ell,
    }
}

/// Breaks the `ell` distinct links with the smallest candidate scores among
/// both `a_ij nu_ij` and `(a_ij + b) nu_ij`, the set `D_ell`.
pub fn adversary_maxmin_first(g: &WeightedGraph, nu: &Potentials, ell: usize, b: f64) -> AdversaryAction {
    let plain = nu.weighted_uniform(g, 0.0);
    let boosted = nu.weighted_uniform(g, b);
    let merged = ScoredEdgeSet::from_candidates(plain.entries().iter().chain(boosted.entries()).copied());
    AdversaryAction {
        broken: merged.phi_ell(ell).into_iter().collect(),
        budget: ell,
    }
}

/// Which player commits first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameOrder {
    /// Designer first, adversary responds: upper value.
    MinMax,
    /// Adversary first, designer responds: lower value.
    MaxMin,
}

/// Actions chosen on one re-evaluation interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub start: f64,
    pub end: f64,
    pub broken: Vec<Edge>,
    pub boosted: Vec<Edge>,
    /// Dissipation contributed by this interval.
    pub value: f64,
}

/// A fully played game.
#[derive(Clone, Debug)]
pub struct GameOutcome {
    pub order: GameOrder,
    pub schedule: SwitchingSchedule,
    pub trajectory: Trajectory,
    /// Game value on the dissipation scale (see [`crate::dynamics::dissipation`]).
    pub value: f64,
    /// The quadratic utility `J`.
    pub utility: f64,
    pub intervals: Vec<IntervalRecord>,
}

/// Plays the min–max game: at each interval the designer runs the subset
/// search on the current state and the adversary answers with `L_ell(v)`.
pub fn play_minmax(
    g: &WeightedGraph,
    x0: &[f64],
    cfg: &GameConfig,
    nu_override: Option<&BTreeMap<Edge, f64>>,
) -> Result<GameOutcome> {
    play(g, x0, cfg, nu_override, GameOrder::MinMax)
}

/// Plays the max–min game: the adversary commits to `D_ell`, then the
/// designer boosts `F_ell(u)`.
pub fn play_maxmin(
    g: &WeightedGraph,
    x0: &[f64],
    cfg: &GameConfig,
    nu_override: Option<&BTreeMap<Edge, f64>>,
) -> Result<GameOutcome> {
    play(g, x0, cfg, nu_override, GameOrder::MaxMin)
}

/// Actions both players pick at a state, for one game order.
pub fn choose_actions(
    g: &WeightedGraph,
    nu: &Potentials,
    cfg: &GameConfig,
    order: GameOrder,
) -> (AdversaryAction, DesignerAction) {
    let (ell, b) = (cfg.budget, cfg.boost);
    match order {
        GameOrder::MinMax => {
            let v = designer_algorithm_one(g, nu, ell, b);
            let u = adversary_minmax_response(g, &v, nu, ell);
            (u, v)
        }
        GameOrder::MaxMin => {
            let u = adversary_maxmin_first(g, nu, ell, b);
            let v = designer_maxmin_response(g, &u, nu, ell, b);
            (u, v)
        }
    }
}

fn play(
    g: &WeightedGraph,
    x0: &[f64],
    cfg: &GameConfig,
    nu_override: Option<&BTreeMap<Edge, f64>>,
    order: GameOrder,
) -> Result<GameOutcome> {
    cfg.validate(g)?;
    if x0.len() != g.node_count() {
        return Err(Error::Dimension {
            expected: g.node_count(),
            got: x0.len(),
        });
    }
    let breakpoints = cfg.breakpoints();
    let mut actions = Vec::with_capacity(breakpoints.len() - 1);
    let mut x = x0.to_vec();
    for (k, w) in breakpoints.windows(2).enumerate() {
        let mut nu = Potentials::from_state(g, &x)?;
        // declared potentials only stand in for the opening decision
        if let (0, Some(over)) = (k, nu_override) {
            nu = nu.with_override(g, over)?;
        }
        let (u, v) = choose_actions(g, &nu, cfg, order);
        let step = SwitchingSchedule::constant(w[1] - w[0], u.clone(), v.clone(), cfg.dwell)?;
        x = simulate(g, &step, &x)?.final_state().iter().copied().collect();
        actions.push((u, v));
    }
    let schedule = SwitchingSchedule::new(breakpoints, actions, cfg.dwell)?;
    let trajectory = simulate(g, &schedule, x0)?;
    let quad = cfg.quadrature();
    let parts = interval_dissipation(&trajectory, &cfg.weight, &quad);
    let intervals = schedule
        .breakpoints()
        .windows(2)
        .zip(schedule.actions())
        .zip(&parts)
        .map(|((w, (u, v)), val)| IntervalRecord {
            start: w[0],
            end: w[1],
            broken: u.broken.iter().copied().collect(),
            boosted: v.boosted.iter().copied().collect(),
            value: *val,
        })
        .collect();
    Ok(GameOutcome {
        order,
        value: parts.iter().sum(),
        utility: utility(&trajectory, &cfg.weight, &quad),
        schedule,
        trajectory,
        intervals,
    })
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut pos = k;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if idx[pos] < n - k + pos {
                break;
            }
            if pos == 0 {
                return out;
            }
        }
        idx[pos] += 1;
        for q in pos + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}
