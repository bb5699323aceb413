//! Switched consensus dynamics `x' = A(u, v) x`, integrated exactly per
//! dwell interval through the eigendecomposition of the interval's system
//! matrix, plus the quadratic utility, the dissipation value and the
//! backward costate.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{assemble_system_matrix, AdversaryAction, DesignerAction, WeightedGraph};
use crate::quadrature::{panels_for, GaussLegendre};

/// Eigenvalues below this magnitude are snapped to zero.
pub const ZERO_EIGEN_TOL: f64 = 1e-12;

/// Default number of Gauss–Legendre nodes per panel.
pub const DEFAULT_QUAD_NODES: usize = 32;

/// Largest `rate * width` a single quadrature panel is asked to resolve.
const PANEL_DECAY: f64 = 8.0;

/// Eigendecomposition `A = Q diag(λ) Qᵀ` of a symmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectral {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl Spectral {
    pub fn of(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidMatrix(format!("{}x{} matrix is not square", a.nrows(), a.ncols())));
        }
        let scale = a.amax().max(1.0);
        let asym = (a - a.transpose()).amax();
        if !asym.is_finite() || asym > 1e-12 * scale {
            return Err(Error::InvalidMatrix(format!("matrix is not symmetric (max asymmetry {asym:e})")));
        }
        let eig = SymmetricEigen::new(a.clone());
        let mut values = eig.eigenvalues;
        for v in values.iter_mut() {
            if v.abs() < ZERO_EIGEN_TOL {
                *v = 0.0;
            }
        }
        Ok(Spectral {
            values,
            vectors: eig.eigenvectors,
        })
    }

    /// `Q diag(exp(λ t)) Qᵀ x`.
    pub fn propagate(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let mut z = self.vectors.tr_mul(x);
        for (zj, lam) in z.iter_mut().zip(self.values.iter()) {
            *zj *= (lam * t).exp();
        }
        &self.vectors * z
    }

    /// Largest eigenvalue magnitude.
    pub fn spectral_radius(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Smallest non-zero eigenvalue magnitude, if any.
    pub fn smallest_nonzero(&self) -> Option<f64> {
        self.values
            .iter()
            .filter(|v| **v != 0.0)
            .map(|v| v.abs())
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))))
    }
}

/// `e^{At} x` by spectral decomposition.
pub fn matrix_exponential_action(a: &DMatrix<f64>, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != a.nrows() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            got: x.len(),
        });
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidMatrix(format!("time must be non-negative, got {t}")));
    }
    let spec = Spectral::of(a)?;
    Ok(spec.propagate(t, &DVector::from_column_slice(x)).iter().copied().collect())
}

/// Positive integrable weight `k(t)` of the utility.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightFunction {
    #[default]
    Constant,
    ExponentialDecay {
        alpha: f64,
    },
}

impl WeightFunction {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            WeightFunction::Constant => 1.0,
            WeightFunction::ExponentialDecay { alpha } => (-alpha * t).exp(),
        }
    }

    /// `∫_a^b k(t) dt` in closed form.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match *self {
            WeightFunction::Constant => b - a,
            WeightFunction::ExponentialDecay { alpha: 0.0 } => b - a,
            WeightFunction::ExponentialDecay { alpha } => {
                (-alpha * a).exp() * -(-alpha * (b - a)).exp_m1() / alpha
            }
        }
    }

    pub fn decay_rate(&self) -> f64 {
        match *self {
            WeightFunction::Constant => 0.0,
            WeightFunction::ExponentialDecay { alpha } => alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightFunction::ExponentialDecay { alpha } if !(alpha >= 0.0 && alpha.is_finite()) => {
                Err(Error::InvalidConfig(format!("decay rate must be >= 0, got {alpha}")))
            }
            _ => Ok(()),
        }
    }
}

/// Piecewise-constant pair of actions on `[0, T]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchingSchedule {
    breakpoints: Vec<f64>,
    actions: Vec<(AdversaryAction, DesignerAction)>,
    dwell: f64,
}

impl SwitchingSchedule {
    /// `breakpoints` are `0 = t_1 < … < t_{L+1} = T`; `actions[k]` holds on
    /// `[t_k, t_{k+1}]`. With two or more intervals, each must last at least
    /// `dwell`; a single interval has no switch and may be shorter.
    pub fn new(
        breakpoints: Vec<f64>,
        actions: Vec<(AdversaryAction, DesignerAction)>,
        dwell: f64,
    ) -> Result<Self> {
        if !(dwell > 0.0 && dwell.is_finite()) {
            return Err(Error::InvalidSchedule(format!("dwell time must be positive, got {dwell}")));
        }
        if actions.is_empty() || breakpoints.len() != actions.len() + 1 {
            return Err(Error::InvalidSchedule(format!(
                "{} breakpoints for {} intervals",
                breakpoints.len(),
                actions.len()
            )));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidSchedule("schedule must start at t = 0".into()));
        }
        for w in breakpoints.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::InvalidSchedule(format!(
                    "breakpoints must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
            if actions.len() > 1 && w[1] - w[0] < dwell * (1.0 - 1e-9) {
                return Err(Error::InvalidSchedule(format!(
                    "interval [{}, {}] is shorter than the dwell time {dwell}",
                    w[0], w[1]
                )));
            }
        }
        Ok(SwitchingSchedule {
            breakpoints,
            actions,
            dwell,
        })
    }

    /// One interval `[0, horizon]` with fixed actions.
    pub fn constant(horizon: f64, u: AdversaryAction, v: DesignerAction, dwell: f64) -> Result<Self> {
        Self::new(vec![0.0, horizon], vec![(u, v)], dwell)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn actions(&self) -> &[(AdversaryAction, DesignerAction)] {
        &self.actions
    }

    pub fn dwell(&self) -> f64 {
        self.dwell
    }

    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().expect("validated non-empty")
    }

    pub fn interval_count(&self) -> usize {
        self.actions.len()
    }
}

/// Breakpoints of `[0, horizon]` cut every `period`; the remainder is folded
/// into the last interval so that no interval is shorter than `period`.
pub fn uniform_breakpoints(horizon: f64, period: f64) -> Vec<f64> {
    let count = ((horizon / period) * (1.0 + 1e-12)).floor().max(1.0) as usize;
    let mut bp: Vec<f64> = (0..count).map(|k| k as f64 * period).collect();
    bp.push(horizon);
    bp
}

/// One constant-matrix piece of a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub matrix: DMatrix<f64>,
    pub spectral: Spectral,
    /// Deviation from the mean at `start`, in the eigenbasis.
    pub deviation: DVector<f64>,
}

impl Segment {
    /// `x(t) - x̄` in the eigenbasis.
    fn deviation_at(&self, t: f64) -> DVector<f64> {
        let dt = t - self.start;
        DVector::from_iterator(
            self.deviation.len(),
            self.deviation
                .iter()
                .zip(self.spectral.values.iter())
                .map(|(z, lam)| z * (lam * dt).exp()),
        )
    }

    fn quad_rate(&self, k: &WeightFunction) -> f64 {
        2.0 * self.spectral.spectral_radius() + k.decay_rate()
    }
}

/// Solution of the switched dynamics for a schedule and initial state.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    schedule: SwitchingSchedule,
    x0: DVector<f64>,
    mean: f64,
    segments: Vec<Segment>,
    states: Vec<DVector<f64>>,
}

/// Propagates `x0` through every interval of `schedule`.
pub fn simulate(g: &WeightedGraph, schedule: &SwitchingSchedule, x0: &[f64]) -> Result<Trajectory> {
    let n = g.node_count();
    if x0.len() != n {
        return Err(Error::Dimension { expected: n, got: x0.len() });
    }
    let x0 = DVector::from_column_slice(x0);
    let mean = x0.mean();
    let bar = DVector::from_element(n, mean);
    let mut segments = Vec::with_capacity(schedule.interval_count());
    let mut states = vec![x0.clone()];
    let mut x = x0.clone();
    for (w, (u, v)) in schedule.breakpoints.windows(2).zip(&schedule.actions) {
        let matrix = assemble_system_matrix(g, u, v)?;
        let spectral = Spectral::of(&matrix)?;
        let deviation = spectral.vectors.tr_mul(&(&x - &bar));
        let seg = Segment {
            start: w[0],
            end: w[1],
            matrix,
            spectral,
            deviation,
        };
        // propagate only the deviation: A·1 = 0 keeps the mean fixed
        x = &bar + &seg.spectral.vectors * seg.deviation_at(w[1]);
        states.push(x.clone());
        segments.push(seg);
    }
    Ok(Trajectory {
        schedule: schedule.clone(),
        x0,
        mean,
        segments,
        states,
    })
}

impl Trajectory {
    pub fn schedule(&self) -> &SwitchingSchedule {
        &self.schedule
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn initial_state(&self) -> &DVector<f64> {
        &self.x0
    }

    /// The consensus value `1ᵀx₀ / n`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn node_count(&self) -> usize {
        self.x0.len()
    }

    pub fn horizon(&self) -> f64 {
        self.schedule.horizon()
    }

    /// States at every breakpoint, `x(t_1), …, x(t_{L+1})`.
    pub fn breakpoint_states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("at least the initial state")
    }

    fn segment_index(&self, t: f64) -> usize {
        self.segments
            .iter()
            .position(|s| t <= s.end)
            .unwrap_or(self.segments.len() - 1)
    }

    /// `x(t)` for `t ∈ [0, T]`; times outside are clamped to the horizon.
    pub fn state_at(&self, t: f64) -> DVector<f64> {
        let t = t.clamp(0.0, self.horizon());
        let seg = &self.segments[self.segment_index(t)];
        let n = self.node_count();
        DVector::from_element(n, self.mean) + &seg.spectral.vectors * seg.deviation_at(t)
    }

    /// `‖x(t) - x̄‖²`.
    pub fn disagreement_sq(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.horizon());
        self.segments[self.segment_index(t)].deviation_at(t).norm_squared()
    }

    /// `samples` equally spaced times covering `[0, T]` (at least two).
    pub fn uniform_grid(&self, samples: usize) -> Vec<f64> {
        let samples = samples.max(2);
        let h = self.horizon();
        (0..samples)
            .map(|k| if k + 1 == samples { h } else { h * k as f64 / (samples - 1) as f64 })
            .collect()
    }

    /// CSV with header `t,x_1,...,x_n` on a uniform grid.
    pub fn to_csv(&self, samples: usize) -> String {
        let mut out = String::from("t");
        for i in 1..=self.node_count() {
            let _ = write!(out, ",x_{i}");
        }
        out.push('\n');
        for t in self.uniform_grid(samples) {
            let _ = write!(out, "{}", fmt_sig(t));
            for xi in self.state_at(t).iter() {
                let _ = write!(out, ",{}", fmt_sig(*xi));
            }
            out.push('\n');
        }
        out
    }
}

/// Formats with 12 significant digits, trimming redundant zeros.
pub fn fmt_sig(x: f64) -> String {
    format!("{}", crate::report::round_sig(x, 12))
}

/// `½ ∫_0^T k(t) ‖x(t) - x̄‖² dt` by Gauss–Legendre quadrature in the
/// eigenbasis of each interval.
pub fn utility(traj: &Trajectory, k: &WeightFunction, quad: &GaussLegendre) -> f64 {
    let mut total = 0.0;
    for seg in &traj.segments {
        let panels = panels_for(seg.quad_rate(k), seg.end - seg.start, PANEL_DECAY);
        total += quad.integrate_composite(seg.start, seg.end, panels, |t| {
            let dt = t - seg.start;
            let d: f64 = seg
                .deviation
                .iter()
                .zip(seg.spectral.values.iter())
                .map(|(z, lam)| z * z * (2.0 * lam * dt).exp())
                .sum();
            k.value(t) * d
        });
    }
    0.5 * total
}

/// `∫_0^T k(t) (‖x₀ - x̄‖² - ‖x(t) - x̄‖²) dt`, the disagreement dissipated
/// by the network relative to a frozen state.
///
/// This equals `2 (J₀ - J)` where `J₀ = ½ ∫ k ‖x₀ - x̄‖²` does not depend
/// on the actions, so the adversary minimizes it and the designer maximizes
/// it. Its leading term for small `T` is
/// `∫ k(t) 2t Σ (a_ij + v_ij)(1 - u_ij)(x_i(0) - x_j(0))² dt`.
pub fn dissipation(traj: &Trajectory, k: &WeightFunction, quad: &GaussLegendre) -> f64 {
    interval_dissipation(traj, k, quad).iter().sum()
}

/// Per-interval dissipation contributions (they sum to [`dissipation`]).
pub fn interval_dissipation(traj: &Trajectory, k: &WeightFunction, quad: &GaussLegendre) -> Vec<f64> {
    let mut out = Vec::with_capacity(traj.segments.len());
    // ‖x₀ - x̄‖² - ‖x(t_k) - x̄‖², accumulated without cancellation
    let mut lost = 0.0;
    for seg in &traj.segments {
        let panels = panels_for(seg.quad_rate(k), seg.end - seg.start, PANEL_DECAY);
        let inner = quad.integrate_composite(seg.start, seg.end, panels, |t| {
            let dt = t - seg.start;
            let d: f64 = seg
                .deviation
                .iter()
                .zip(seg.spectral.values.iter())
                .map(|(z, lam)| -z * z * (2.0 * lam * dt).exp_m1())
                .sum();
            k.value(t) * d
        });
        out.push(inner + lost * k.integral(seg.start, seg.end));
        let width = seg.end - seg.start;
        lost += seg
            .deviation
            .iter()
            .zip(seg.spectral.values.iter())
            .map(|(z, lam)| -z * z * (2.0 * lam * width).exp_m1())
            .sum::<f64>();
    }
    out
}

/// Costate samples `p(t)` on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CostateSamples {
    pub times: Vec<f64>,
    pub values: Vec<DVector<f64>>,
}

/// Solves `p' = -k (x - x̄) - A p`, `p(T) = 0` backward through the
/// intervals and evaluates it at `times` (each clamped to `[0, T]`).
///
/// Within an interval `[s, e]`, in the eigenbasis of `A`,
/// `q_j(t) = e^{λ_j (e - t)} q_j(e) + z_j ∫_t^e k(τ) e^{λ_j (2τ - t - s)} dτ`.
pub fn costate(traj: &Trajectory, k: &WeightFunction, quad: &GaussLegendre, times: &[f64]) -> CostateSamples {
    let n = traj.node_count();
    // p at the end of each segment, filled backward
    let mut p_end = vec![DVector::zeros(n); traj.segments.len()];
    for idx in (0..traj.segments.len()).rev() {
        if idx + 1 < traj.segments.len() {
            let next = &traj.segments[idx + 1];
            p_end[idx] = costate_in_segment(next, &p_end[idx + 1], k, quad, next.start);
        }
    }
    let values = times
        .iter()
        .map(|&t| {
            let t = t.clamp(0.0, traj.horizon());
            let idx = traj.segment_index(t);
            costate_in_segment(&traj.segments[idx], &p_end[idx], k, quad, t)
        })
        .collect();
    CostateSamples {
        times: times.to_vec(),
        values,
    }
}

fn costate_in_segment(
    seg: &Segment,
    p_end: &DVector<f64>,
    k: &WeightFunction,
    quad: &GaussLegendre,
    t: f64,
) -> DVector<f64> {
    let q_end = seg.spectral.vectors.tr_mul(p_end);
    let lams = &seg.spectral.values;
    let width = seg.end - t;
    let panels = panels_for(seg.quad_rate(k), width, PANEL_DECAY);
    let mut q = DVector::zeros(lams.len());
    for j in 0..lams.len() {
        let lam = lams[j];
        let forced = if seg.deviation[j] == 0.0 || width <= 0.0 {
            0.0
        } else {
            seg.deviation[j]
                * quad.integrate_composite(t, seg.end, panels, |tau| {
                    k.value(tau) * (lam * (2.0 * tau - t - seg.start)).exp()
                })
        };
        q[j] = (lam * width).exp() * q_end[j] + forced;
    }
    &seg.spectral.vectors * q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;

    fn pair(a: f64) -> WeightedGraph {
        WeightedGraph::new(2, [(0, 1, a)]).unwrap()
    }

    fn triangle() -> WeightedGraph {
        WeightedGraph::new(3, [(0, 1, 3.0), (1, 2, 2.0), (0, 2, 1.0)]).unwrap()
    }

    /// e^{At}x by a Taylor series summed until terms vanish.
    fn taylor_oracle(a: &DMatrix<f64>, t: f64, x: &[f64]) -> Vec<f64> {
        let mut term = DVector::from_column_slice(x);
        let mut acc = term.clone();
        for k in 1..200 {
            term = (a * &term) * (t / k as f64);
            acc += &term;
            if term.amax() < 1e-18 {
                break;
            }
        }
        acc.iter().copied().collect()
    }

    #[test]
    fn zero_time_or_zero_matrix_is_identity() {
        let a = assemble_system_matrix(&triangle(), &AdversaryAction::idle(0), &DesignerAction::idle(0.0, 0)).unwrap();
        let x = [1.0, -2.0, 5.0];
        let y = matrix_exponential_action(&a, 0.0, &x).unwrap();
        for (p, q) in y.iter().zip(&x) {
            assert!((p - q).abs() < 1e-14);
        }
        let z = matrix_exponential_action(&DMatrix::zeros(3, 3), 4.0, &x).unwrap();
        assert_eq!(z, x.to_vec());
    }

    #[test]
    fn two_node_closed_form() {
        let a_w = 1.7;
        let g = pair(a_w);
        let a = assemble_system_matrix(&g, &AdversaryAction::idle(0), &DesignerAction::idle(0.0, 0)).unwrap();
        for t in [0.01, 0.3, 1.0, 2.5] {
            let got = matrix_exponential_action(&a, t, &[1.0, 0.0]).unwrap();
            let oracle = taylor_oracle(&a, t, &[1.0, 0.0]);
            let e = (-2.0 * a_w * t).exp();
            let closed = [0.5 * (1.0 + e), 0.5 * (1.0 - e)];
            for i in 0..2 {
                assert!((oracle[i] - closed[i]).abs() < 1e-13);
                assert!((got[i] - oracle[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn long_time_reaches_mean() {
        let g = triangle();
        let a = assemble_system_matrix(&g, &AdversaryAction::idle(0), &DesignerAction::idle(0.0, 0)).unwrap();
        let spec = Spectral::of(&a).unwrap();
        let t = 1e3 / spec.smallest_nonzero().unwrap();
        let x = [4.0, -1.0, 0.5];
        let y = matrix_exponential_action(&a, t, &x).unwrap();
        let m = (4.0 - 1.0 + 0.5) / 3.0;
        assert!(y.iter().all(|v| (v - m).abs() < 1e-6));
    }

    #[test]
    fn non_symmetric_matrix_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.5, -0.5]);
        assert!(matches!(matrix_exponential_action(&a, 1.0, &[1.0, 0.0]), Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn schedule_validation() {
        let u = AdversaryAction::idle(0);
        let v = DesignerAction::idle(0.0, 0);
        let uv = (u.clone(), v.clone());
        assert!(SwitchingSchedule::new(vec![0.0, 0.5, 1.0], vec![uv.clone(), uv.clone()], 0.4).is_ok());
        assert!(SwitchingSchedule::new(vec![0.0, 0.3, 1.0], vec![uv.clone(), uv.clone()], 0.4).is_err());
        assert!(SwitchingSchedule::new(vec![0.0, 1.0, 1.0], vec![uv.clone(), uv.clone()], 0.1).is_err());
        assert!(SwitchingSchedule::new(vec![0.1, 1.0], vec![uv.clone()], 0.1).is_err());
        assert!(SwitchingSchedule::new(vec![0.0, 1.0], vec![uv.clone()], 0.0).is_err());
        // a lone interval has no switch, so it may be shorter than the dwell
        assert!(SwitchingSchedule::new(vec![0.0, 0.01], vec![uv], 1.0).is_ok());
    }

    #[test]
    fn uniform_breakpoints_fold_remainder() {
        assert_eq!(uniform_breakpoints(1.0, 0.25), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(uniform_breakpoints(1.0, 0.3), vec![0.0, 0.3, 0.6, 1.0]);
        assert_eq!(uniform_breakpoints(0.1, 0.3), vec![0.0, 0.1]);
    }

    #[test]
    fn fully_broken_network_stays_put() {
        let g = triangle();
        let all: Vec<Edge> = g.edges().to_vec();
        let u = AdversaryAction::new(&g, all, 3).unwrap();
        let v = DesignerAction::idle(0.0, 0);
        let s = SwitchingSchedule::new(vec![0.0, 0.5, 1.0], vec![(u.clone(), v.clone()), (u, v)], 0.5).unwrap();
        let traj = simulate(&g, &s, &[1.0, 2.0, 3.0]).unwrap();
        for t in [0.0, 0.3, 0.75, 1.0] {
            let x = traj.state_at(t);
            assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14 && (x[2] - 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn average_is_conserved() {
        let g = triangle();
        let s = SwitchingSchedule::constant(2.0, AdversaryAction::idle(1), DesignerAction::idle(1.0, 1), 2.0).unwrap();
        let traj = simulate(&g, &s, &[1.0, 2.0, 3.0]).unwrap();
        assert!((traj.final_state().sum() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn utility_vanishes_at_consensus() {
        let g = triangle();
        let s = SwitchingSchedule::constant(1.0, AdversaryAction::idle(0), DesignerAction::idle(0.0, 0), 1.0).unwrap();
        let traj = simulate(&g, &s, &[2.0; 3]).unwrap();
        let q = GaussLegendre::new(DEFAULT_QUAD_NODES);
        assert_eq!(utility(&traj, &WeightFunction::Constant, &q), 0.0);
        assert_eq!(dissipation(&traj, &WeightFunction::Constant, &q), 0.0);
        let p = costate(&traj, &WeightFunction::Constant, &q, &[0.0, 0.5, 1.0]);
        assert!(p.values.iter().all(|v| v.amax() == 0.0));
    }

    #[test]
    fn two_node_utility_closed_form() {
        // ‖x - x̄‖² = ½ e^{-4at} for x₀ = [1, 0]
        let a = 0.8;
        let g = pair(a);
        let s = SwitchingSchedule::constant(3.0, AdversaryAction::idle(0), DesignerAction::idle(0.0, 0), 3.0).unwrap();
        let traj = simulate(&g, &s, &[1.0, 0.0]).unwrap();
        let q = GaussLegendre::new(DEFAULT_QUAD_NODES);
        let j = utility(&traj, &WeightFunction::Constant, &q);
        let exact = 0.25 * (1.0 - (-12.0 * a).exp()) / (4.0 * a);
        assert!((j - exact).abs() / exact < 1e-13);
        let d = dissipation(&traj, &WeightFunction::Constant, &q);
        assert!((d - (0.5 * 3.0 - 2.0 * j)).abs() < 1e-13);
    }

    #[test]
    fn dissipation_matches_leading_term_for_worked_example() {
        // survivors (0,1) at weight 3 and (1,2) at weight 2 + 1: integrand 12t
        let g = triangle();
        let u = AdversaryAction::new(&g, [Edge::new(0, 2)], 1).unwrap();
        let v = DesignerAction::new(&g, [Edge::new(1, 2)], 1.0, 1).unwrap();
        let t_end = 1e-3;
        let s = SwitchingSchedule::constant(t_end, u, v, t_end).unwrap();
        let traj = simulate(&g, &s, &[1.0, 2.0, 3.0]).unwrap();
        let q = GaussLegendre::new(DEFAULT_QUAD_NODES);
        let ratio = dissipation(&traj, &WeightFunction::Constant, &q) / (t_end * t_end);
        assert!((5.9..=6.1).contains(&ratio), "{ratio}");
    }

    #[test]
    fn interval_dissipation_sums_to_total() {
        let g = triangle();
        let u1 = AdversaryAction::new(&g, [Edge::new(0, 2)], 1).unwrap();
        let v1 = DesignerAction::new(&g, [Edge::new(1, 2)], 1.0, 1).unwrap();
        let s = SwitchingSchedule::new(
            vec![0.0, 0.4, 1.0],
            vec![(u1, v1), (AdversaryAction::idle(1), DesignerAction::idle(1.0, 1))],
            0.4,
        )
        .unwrap();
        let traj = simulate(&g, &s, &[1.0, 2.0, 3.0]).unwrap();
        let q = GaussLegendre::new(DEFAULT_QUAD_NODES);
        let k = WeightFunction::ExponentialDecay { alpha: 0.7 };
        let parts: f64 = interval_dissipation(&traj, &k, &q).iter().sum();
        assert!((parts - dissipation(&traj, &k, &q)).abs() < 1e-14);
    }

    #[test]
    fn exponential_weight_integral() {
        let k = WeightFunction::ExponentialDecay { alpha: 2.0 };
        let q = GaussLegendre::new(16);
        let num = q.integrate(0.3, 1.1, |t| k.value(t));
        assert!((num - k.integral(0.3, 1.1)).abs() < 1e-14);
        assert!(WeightFunction::ExponentialDecay { alpha: -1.0 }.validate().is_err());
    }

    #[test]
    fn costate_terminal_condition() {
        let g = triangle();
        let s = SwitchingSchedule::constant(0.5, AdversaryAction::idle(0), DesignerAction::idle(0.0, 0), 0.5).unwrap();
        let traj = simulate(&g, &s, &[1.0, 2.0, 3.0]).unwrap();
        let q = GaussLegendre::new(DEFAULT_QUAD_NODES);
        let p = costate(&traj, &WeightFunction::Constant, &q, &[0.5]);
        assert_eq!(p.values[0].amax(), 0.0);
    }

    #[test]
    fn costate_two_node_backward_euler() {
        // reference: implicit Euler sweep from p(T) = 0, step 1e-6
        let a = 1.3;
        let t_end = 0.5;
        let g = pair(a);
        let s = SwitchingSchedule::constant(t_end, AdversaryAction::idle(0), DesignerAction::idle(0.0, 0), t_end).unwrap();
        let x0 = [2.0, -1.0];
        let traj = simulate(&g, &s, &x0).unwrap();
        let q = GaussLegendre::new(DEFAULT_QUAD_NODES);
        let times = [0.0, 0.1, 0.25, 0.4];
        let p = costate(&traj, &WeightFunction::Constant, &q, &times);

        let h = 1e-6;
        let steps = (t_end / h).round() as usize;
        let amat = DMatrix::from_row_slice(2, 2, &[-a, a, a, -a]);
        let mean = 0.5;
        let mut pe = DVector::<f64>::zeros(2);
        let mut expected = Vec::new();
        let mut next_check = times.len();
        for step in (0..=steps).rev() {
            let t = step as f64 * h;
            while next_check > 0 && (t - times[next_check - 1]).abs() < 0.5 * h {
                expected.push((next_check - 1, pe.clone()));
                next_check -= 1;
            }
            if step == 0 {
                break;
            }
            // backward Euler in reverse time: p(t-h) = p(t) + h (k (x - x̄) + A p)(t-h)
            let tm = t - h;
            let x = traj.state_at(tm);
            let forcing = x.map(|v| v - mean);
            let lhs = DMatrix::<f64>::identity(2, 2) - &amat * h;
            pe = lhs.lu().solve(&(&pe + forcing * h)).unwrap();
        }
        for (idx, pv) in expected {
            let diff = (&p.values[idx] - &pv).amax();
            assert!(diff < 1e-5, "t={} diff={diff}", times[idx]);
        }
    }

    #[test]
    fn csv_export_header_and_rows() {
        let g = triangle();
        let s = SwitchingSchedule::constant(1.0, AdversaryAction::idle(0), DesignerAction::idle(0.0, 0), 1.0).unwrap();
        let traj = simulate(&g, &s, &[1.0, 2.0, 3.0]).unwrap();
        let csv = traj.to_csv(5);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x_1,x_2,x_3");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with("0,1,2,3"));
    }
}
