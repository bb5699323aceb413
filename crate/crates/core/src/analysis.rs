//! Checks on the games: the sufficient condition for a saddle point, the
//! horizon over which edge disagreements stay bounded away from zero, the
//! consistency of the potential rankings with the costate, and brute-force
//! oracles that enumerate every schedule.

use serde::{Deserialize, Serialize};

use crate::dynamics::{dissipation, simulate, utility, SwitchingSchedule, Trajectory, WeightFunction};
use crate::error::{Error, Result};
use crate::graph::{AdversaryAction, DesignerAction, Edge, Potentials, WeightedGraph};
use crate::quadrature::GaussLegendre;
use crate::strategies::{combinations, GameConfig, GameOrder};

/// Result of the saddle-point sufficient condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeReport {
    pub gamma: f64,
    /// `min |gamma a_ij - a_kl|` over ordered pairs of distinct weights;
    /// infinite when there is no such pair.
    pub bound: f64,
    pub diversity_ok: bool,
    pub holds: bool,
}

/// Evaluates the sufficient condition for a boost `b`, disagreement floor
/// `eps` and initial state `x0`.
pub fn spe_condition(g: &WeightedGraph, b: f64, eps: f64, x0: &[f64]) -> Result<SpeReport> {
    if x0.len() != g.node_count() {
        return Err(Error::Dimension {
            expected: g.node_count(),
            got: x0.len(),
        });
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidEpsilon(format!("epsilon must be positive, got {eps}")));
    }
    let sup = x0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gamma = 4.0 * sup * sup / (eps * eps);
    if !(gamma > 1.0) {
        return Err(Error::InvalidEpsilon(format!(
            "gamma = 4 max|x0|^2 / eps^2 = {gamma} must exceed 1"
        )));
    }
    let w = g.weights();
    let mut bound = f64::INFINITY;
    let mut diversity_ok = true;
    for (p, &a) in w.iter().enumerate() {
        for (q, &c) in w.iter().enumerate() {
            if p == q {
                continue;
            }
            if a == c {
                diversity_ok = false;
                continue;
            }
            bound = bound.min((gamma * a - c).abs());
            if a > c && !(a > gamma * c) {
                diversity_ok = false;
            }
        }
    }
    let holds = b >= 0.0 && b <= bound && diversity_ok;
    Ok(SpeReport {
        gamma,
        bound,
        diversity_ok,
        holds,
    })
}

/// Envelope crossing data for one pair of consecutive nodes in the
/// descending order of the state at the start of an interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCrossing {
    pub interval: usize,
    /// Node ranked just above `lower`.
    pub upper: usize,
    pub lower: usize,
    /// Row sums of the system matrix at `upper` and `lower`.
    pub row_sums: (f64, f64),
    /// Time the two envelopes meet; `None` when the pair is unconstrained.
    pub t_star: Option<f64>,
    /// First time the envelope gap falls to `eps`.
    pub t_eps: Option<f64>,
}

/// Horizon bound and the per-pair data it was computed from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonBound {
    pub t_max: f64,
    pub cap: f64,
    /// True when no constrained pair limited the answer below the cap.
    pub capped: bool,
    pub crossings: Vec<PairCrossing>,
}

/// Horizon bound under the free flow `A(0, 0)` with the default cap.
pub fn horizon_bound(g: &WeightedGraph, x0: &[f64], eps: f64) -> Result<HorizonBound> {
    let free = SwitchingSchedule::constant(1.0, AdversaryAction::idle(0), DesignerAction::idle(0.0, 0), 1.0)?;
    horizon_bound_with(g, &free, x0, eps, None)
}

/// Horizon bound along a switching schedule. The last interval's matrix is
/// extended past the schedule's horizon. `cap` defaults to
/// `10 / max |lambda_2|` over the schedule's matrices.
pub fn horizon_bound_with(
    g: &WeightedGraph,
    schedule: &SwitchingSchedule,
    x0: &[f64],
    eps: f64,
    cap: Option<f64>,
) -> Result<HorizonBound> {
    let n = g.node_count();
    if x0.len() != n {
        return Err(Error::Dimension { expected: n, got: x0.len() });
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidEpsilon(format!("epsilon must be positive, got {eps}")));
    }
    let mut sorted = x0.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    if sorted.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::Precondition("initial state entries must be pairwise distinct".into()));
    }
    let traj = simulate(g, schedule, x0)?;
    let cap = match cap {
        Some(c) if c > 0.0 => c,
        Some(c) => return Err(Error::InvalidConfig(format!("horizon cap must be positive, got {c}"))),
        None => {
            let lam2 = traj
                .segments()
                .iter()
                .filter_map(|s| s.spectral.smallest_nonzero())
                .fold(0.0f64, |m, l| m.max(l.abs()));
            if lam2 > 0.0 {
                10.0 / lam2
            } else {
                schedule.horizon()
            }
        }
    };

    let segments = traj.segments();
    let mut crossings = Vec::new();
    for (k, seg) in segments.iter().enumerate() {
        let start = seg.start;
        let end = if k + 1 == segments.len() { f64::INFINITY } else { seg.end };
        let x = traj.breakpoint_states()[k].clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&p, &q| x[q].total_cmp(&x[p]).then(p.cmp(&q)));
        let (top, bottom) = (x[order[0]], x[order[n - 1]]);
        let row_sum = |i: usize| -seg.matrix[(i, i)];
        let mut earliest = f64::INFINITY;
        for w in order.windows(2) {
            let (p, q) = (w[0], w[1]);
            let (ap, aq) = (row_sum(p), row_sum(q));
            let mut c = PairCrossing {
                interval: k,
                upper: p,
                lower: q,
                row_sums: (ap, aq),
                t_star: None,
                t_eps: None,
            };
            let ratio = top / bottom;
            if ap != aq && ratio > 0.0 && ratio.is_finite() && top != bottom {
                let t_star = ratio.ln() / (ap - aq) + start;
                if t_star > start {
                    let gap = |t: f64| top * (-ap * (t - start)).exp() - bottom * (-aq * (t - start)).exp();
                    let t_eps = first_drop(gap, eps, start, t_star);
                    c.t_star = Some(t_star);
                    c.t_eps = Some(t_eps);
                    earliest = earliest.min(t_eps);
                }
            }
            crossings.push(c);
        }
        if earliest <= end {
            return Ok(HorizonBound {
                t_max: earliest.min(cap),
                cap,
                capped: earliest > cap,
                crossings,
            });
        }
    }
    Ok(HorizonBound {
        t_max: cap,
        cap,
        capped: true,
        crossings,
    })
}

/// First `t` in `[lo, hi]` with `gap(t) <= eps`, given `gap(hi) = 0` and that
/// `{gap > eps}` is an interval starting at `lo` (a difference of two
/// exponentials rises at most once before it falls).
fn first_drop(gap: impl Fn(f64) -> f64, eps: f64, lo: f64, hi: f64) -> f64 {
    if gap(lo) <= eps {
        return lo;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if gap(mid) > eps {
            a = mid;
        } else {
            b = mid;
        }
    }
    a
}

/// Tolerances of the maximum-principle check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpTolerances {
    pub weighted: f64,
    /// Absolute tolerance on `f`; typically `10 T^2`.
    pub costate: f64,
    pub samples: usize,
}

impl MpTolerances {
    pub fn for_horizon(horizon: f64) -> Self {
        MpTolerances {
            weighted: 1e-9,
            costate: 10.0 * horizon * horizon,
            samples: 21,
        }
    }
}

/// A pair of edges whose costate ranking contradicts their potential
/// ranking at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpViolation {
    pub t: f64,
    /// Edge with the smaller weighted potential.
    pub lower: Edge,
    pub higher: Edge,
    pub w_gap: f64,
    pub f_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpReport {
    pub violations: Vec<MpViolation>,
    /// Largest `|(f_e - f_f) - K(t)(w_e - w_f)|` over compared pairs, where
    /// `K(t) = ∫_t^T k`.
    pub worst_margin: f64,
    pub samples: usize,
}

/// Compares the ranking of weighted potentials `w_ij = (a_ij + v_ij) nu_ij`
/// with the switching functions `f_ij = (a_ij + v_ij)(p_i - p_j)(x_j - x_i)`
/// on a uniform grid.
pub fn mp_consistency(
    g: &WeightedGraph,
    traj: &Trajectory,
    k: &WeightFunction,
    v: &DesignerAction,
    quad: &GaussLegendre,
    tol: &MpTolerances,
) -> Result<MpReport> {
    v.validate(g)?;
    let times = traj.uniform_grid(tol.samples);
    let p = crate::dynamics::costate(traj, k, quad, &times);
    let horizon = traj.horizon();
    let mut violations = Vec::new();
    let mut worst = 0.0f64;
    for (t, pt) in times.iter().zip(&p.values) {
        let x = traj.state_at(*t);
        let xs: Vec<f64> = x.iter().copied().collect();
        let w = Potentials::from_state(g, &xs)?.weighted(g, v);
        let f: Vec<f64> = g
            .edges()
            .iter()
            .zip(g.weights())
            .map(|(e, a)| (a + v.increment(*e)) * (pt[e.i] - pt[e.j]) * (x[e.j] - x[e.i]))
            .collect();
        let scale = k.integral(*t, horizon);
        for (ie, e) in g.edges().iter().enumerate() {
            for (jf, other) in g.edges().iter().enumerate() {
                if ie == jf {
                    continue;
                }
                let (we, wf) = (w.score(*e).unwrap_or(0.0), w.score(*other).unwrap_or(0.0));
                if we > wf - tol.weighted {
                    continue;
                }
                let f_gap = f[ie] - f[jf];
                worst = worst.max((f_gap - scale * (we - wf)).abs());
                if f_gap > tol.costate {
                    violations.push(MpViolation {
                        t: *t,
                        lower: *e,
                        higher: *other,
                        w_gap: we - wf,
                        f_gap,
                    });
                }
            }
        }
    }
    Ok(MpReport {
        violations,
        worst_margin: worst,
        samples: times.len(),
    })
}

/// Which player an oracle optimizes for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Player {
    Adversary,
    Designer,
}

/// Default enumeration cap.
pub const DEFAULT_ORACLE_CAP: u128 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub cap: u128,
    /// Also enumerate sets smaller than the budget.
    pub sub_budget: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            cap: DEFAULT_ORACLE_CAP,
            sub_budget: false,
        }
    }
}

/// Best schedule of one player against a fixed opponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Dissipation value of the best schedule.
    pub best_value: f64,
    pub best_utility: f64,
    /// Edge set chosen on each interval.
    pub best_schedule: Vec<Vec<Edge>>,
    pub evaluation_count: u128,
}

/// Exact value of one game order by nested enumeration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleGameValue {
    pub order: GameOrder,
    pub value: f64,
    pub utility: f64,
    /// Per-interval broken edges of the optimal play.
    pub broken: Vec<Vec<Edge>>,
    /// Per-interval boosted edges of the optimal play.
    pub boosted: Vec<Vec<Edge>>,
    pub evaluation_count: u128,
}

fn subsets(pool: &[Edge], ell: usize, sub_budget: bool) -> Vec<Vec<Edge>> {
    let size = ell.min(pool.len());
    let sizes = if sub_budget { 0..=size } else { size..=size };
    sizes
        .flat_map(|s| combinations(pool.len(), s))
        .map(|idx| idx.into_iter().map(|k| pool[k]).collect())
        .collect()
}

fn product_size(counts: impl IntoIterator<Item = usize>) -> u128 {
    counts.into_iter().fold(1u128, |acc, c| acc.saturating_mul(c as u128))
}

fn check_cap(size: u128, cap: u128) -> Result<()> {
    if size > cap {
        Err(Error::CapExceeded { size, cap })
    } else {
        Ok(())
    }
}

struct Evaluator<'a> {
    g: &'a WeightedGraph,
    x0: &'a [f64],
    cfg: &'a GameConfig,
    breakpoints: Vec<f64>,
    quad: GaussLegendre,
}

impl<'a> Evaluator<'a> {
    fn new(g: &'a WeightedGraph, x0: &'a [f64], cfg: &'a GameConfig) -> Result<Self> {
        cfg.validate(g)?;
        if x0.len() != g.node_count() {
            return Err(Error::Dimension {
                expected: g.node_count(),
                got: x0.len(),
            });
        }
        Ok(Evaluator {
            g,
            x0,
            cfg,
            breakpoints: cfg.breakpoints(),
            quad: cfg.quadrature(),
        })
    }

    fn intervals(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// Dissipation and utility of a pair of per-interval edge schedules.
    fn evaluate(&self, broken: &[Vec<Edge>], boosted: &[Vec<Edge>]) -> Result<(f64, f64)> {
        let (ell, b) = (self.cfg.budget, self.cfg.boost);
        let actions = broken
            .iter()
            .zip(boosted)
            .map(|(u, v)| {
                let u = AdversaryAction {
                    broken: u.iter().copied().collect(),
                    budget: ell,
                };
                let v = DesignerAction {
                    boosted: v.iter().copied().collect(),
                    boost: b,
                    budget: ell,
                };
                (u, v)
            })
            .collect();
        let schedule = SwitchingSchedule::new(self.breakpoints.clone(), actions, self.cfg.dwell)?;
        let traj = simulate(self.g, &schedule, self.x0)?;
        Ok((
            dissipation(&traj, &self.cfg.weight, &self.quad),
            utility(&traj, &self.cfg.weight, &self.quad),
        ))
    }

    /// Choices for the adversary on every interval.
    fn adversary_choices(&self, sub_budget: bool) -> Vec<Vec<Vec<Edge>>> {
        let all = subsets(self.g.edges(), self.cfg.budget, sub_budget);
        vec![all; self.intervals()]
    }

    /// Choices for the designer: in the max–min order only surviving links.
    fn designer_choices(&self, broken: Option<&[Vec<Edge>]>, sub_budget: bool) -> Vec<Vec<Vec<Edge>>> {
        (0..self.intervals())
            .map(|k| {
                let pool: Vec<Edge> = match broken {
                    Some(u) => self.g.edges().iter().copied().filter(|e| !u[k].contains(e)).collect(),
                    None => self.g.edges().to_vec(),
                };
                subsets(&pool, self.cfg.budget, sub_budget)
            })
            .collect()
    }
}

/// Iterates the cartesian product of per-interval choices in lexicographic
/// order of interval index.
fn for_each_schedule(
    choices: &[Vec<Vec<Edge>>],
    mut visit: impl FnMut(Vec<Vec<Edge>>) -> Result<()>,
) -> Result<()> {
    if choices.iter().any(|c| c.is_empty()) {
        return Ok(());
    }
    let mut idx = vec![0usize; choices.len()];
    loop {
        visit(idx.iter().zip(choices).map(|(&i, c)| c[i].clone()).collect())?;
        let mut pos = choices.len();
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < choices[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// `true` when `candidate` beats `incumbent` for the player; near-ties keep
/// the incumbent, which was enumerated first.
fn improves(player: Player, candidate: f64, incumbent: f64) -> bool {
    let slack = 1e-12 * candidate.abs().max(incumbent.abs());
    match player {
        // the adversary maximizes J, i.e. minimizes dissipation
        Player::Adversary => candidate < incumbent - slack,
        Player::Designer => candidate > incumbent + slack,
    }
}

fn best_response(
    ev: &Evaluator,
    player: Player,
    opponent: &[Vec<Edge>],
    sub_budget: bool,
    cap: u128,
) -> Result<OracleResult> {
    let choices = match player {
        Player::Adversary => ev.adversary_choices(sub_budget),
        Player::Designer => ev.designer_choices(Some(opponent), sub_budget),
    };
    let size = product_size(choices.iter().map(Vec::len));
    check_cap(size, cap)?;
    let mut best: Option<OracleResult> = None;
    let mut count = 0u128;
    for_each_schedule(&choices, |mine| {
        let (value, util) = match player {
            Player::Adversary => ev.evaluate(&mine, opponent)?,
            Player::Designer => ev.evaluate(opponent, &mine)?,
        };
        count += 1;
        if best.as_ref().is_none_or(|b| improves(player, value, b.best_value)) {
            best = Some(OracleResult {
                best_value: value,
                best_utility: util,
                best_schedule: mine,
                evaluation_count: 0,
            });
        }
        Ok(())
    })?;
    let mut best = best.ok_or_else(|| Error::Precondition("no feasible schedule".into()))?;
    best.evaluation_count = count;
    Ok(best)
}

/// Enumerates every schedule of `player` against a fixed opponent schedule
/// (one edge set per interval) and returns the best one. In the designer's
/// case the opponent schedule is the adversary's, and only links it leaves
/// intact can be boosted.
pub fn oracle_best_response(
    g: &WeightedGraph,
    x0: &[f64],
    cfg: &GameConfig,
    player: Player,
    opponent: &[Vec<Edge>],
    opts: &OracleOptions,
) -> Result<OracleResult> {
    let ev = Evaluator::new(g, x0, cfg)?;
    if opponent.len() != ev.intervals() {
        return Err(Error::InvalidSchedule(format!(
            "opponent schedule has {} intervals, the game has {}",
            opponent.len(),
            ev.intervals()
        )));
    }
    for set in opponent {
        for e in set {
            if !g.contains(*e) {
                return Err(Error::UnknownEdge(*e));
            }
        }
    }
    best_response(&ev, player, opponent, opts.sub_budget, opts.cap)
}

/// Upper (`MinMax`) or lower (`MaxMin`) value by nested enumeration: the
/// outer player commits to a whole schedule, the inner one best-responds.
pub fn oracle_game_value(
    g: &WeightedGraph,
    x0: &[f64],
    cfg: &GameConfig,
    order: GameOrder,
    opts: &OracleOptions,
) -> Result<OracleGameValue> {
    let ev = Evaluator::new(g, x0, cfg)?;
    let (outer_player, inner_player, outer) = match order {
        GameOrder::MinMax => (Player::Designer, Player::Adversary, ev.designer_choices(None, opts.sub_budget)),
        GameOrder::MaxMin => (Player::Adversary, Player::Designer, ev.adversary_choices(opts.sub_budget)),
    };
    // inner enumeration sizes do not depend on the outer choice when budgets
    // are saturated; the sum below is exact either way
    let mut size = 0u128;
    for_each_schedule(&outer, |o| {
        let inner = match inner_player {
            Player::Adversary => ev.adversary_choices(opts.sub_budget),
            Player::Designer => ev.designer_choices(Some(&o), opts.sub_budget),
        };
        size = size.saturating_add(product_size(inner.iter().map(Vec::len)));
        check_cap(size, opts.cap)
    })
    .map_err(|e| match e {
        Error::CapExceeded { .. } => Error::CapExceeded { size: estimate(&ev, &outer, opts), cap: opts.cap },
        other => other,
    })?;

    let mut best: Option<OracleGameValue> = None;
    let mut count = 0u128;
    for_each_schedule(&outer, |o| {
        let reply = best_response(&ev, inner_player, &o, opts.sub_budget, u128::MAX)?;
        count += reply.evaluation_count;
        if best.as_ref().is_none_or(|b| improves(outer_player, reply.best_value, b.value)) {
            let (broken, boosted) = match order {
                GameOrder::MinMax => (reply.best_schedule.clone(), o.clone()),
                GameOrder::MaxMin => (o.clone(), reply.best_schedule.clone()),
            };
            if order == GameOrder::MaxMin {
                debug_assert!(broken.iter().zip(&boosted).all(|(u, v)| v.iter().all(|e| !u.contains(e))));
            }
            best = Some(OracleGameValue {
                order,
                value: reply.best_value,
                utility: reply.best_utility,
                broken,
                boosted,
                evaluation_count: 0,
            });
        }
        Ok(())
    })?;
    let mut best = best.ok_or_else(|| Error::Precondition("no feasible schedule".into()))?;
    best.evaluation_count = count;
    Ok(best)
}

/// Full nested enumeration size, counted without the cap.
fn estimate(ev: &Evaluator, outer: &[Vec<Vec<Edge>>], opts: &OracleOptions) -> u128 {
    let outer_size = product_size(outer.iter().map(Vec::len));
    let inner = match outer.first().and_then(|c| c.first()) {
        Some(_) => {
            let probe: Vec<Vec<Edge>> = outer.iter().map(|c| c[0].clone()).collect();
            let adv = ev.adversary_choices(opts.sub_budget);
            let des = ev.designer_choices(Some(&probe), opts.sub_budget);
            product_size(adv.iter().map(Vec::len)).max(product_size(des.iter().map(Vec::len)))
        }
        None => 0,
    };
    outer_size.saturating_mul(inner)
}
