//! Scenario-driven commands behind the `linkgame` binary.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::analysis::{
    horizon_bound, mp_consistency, oracle_best_response, oracle_game_value, spe_condition, MpTolerances,
    OracleOptions, Player, DEFAULT_ORACLE_CAP,
};
use crate::dynamics::{dissipation, simulate, utility, SwitchingSchedule, Trajectory};
use crate::error::Error;
use crate::graph::{AdversaryAction, DesignerAction, Edge};
use crate::report::{self, num};
use crate::scenario::{parse_scenario, ParseError, Scenario};
use crate::strategies::{play_maxmin, play_minmax, GameOrder, GameOutcome};

/// Samples written to `trajectory.csv`.
pub const CSV_SAMPLES: usize = 101;
/// Largest graph the subset search of the min–max designer runs on.
pub const MAX_SEARCH_EDGES: usize = 16;
pub const MAX_SEARCH_BUDGET: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Minmax,
    Maxmin,
    SpeCheck,
    Oracle,
    MpCheck,
    Horizon,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Minmax => "minmax",
            Command::Maxmin => "maxmin",
            Command::SpeCheck => "spe-check",
            Command::Oracle => "oracle",
            Command::MpCheck => "mp-check",
            Command::Horizon => "horizon",
        }
    }
}

/// Options shared by every command.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Recorded in the report; no command draws random numbers.
    pub seed: Option<u64>,
    pub quad_nodes: Option<usize>,
    pub cap: Option<u128>,
    pub rho: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            out_dir: PathBuf::from("."),
            seed: None,
            quad_nodes: None,
            cap: None,
            rho: None,
        }
    }
}

/// Failure of a command, mapped to a process exit code.
#[derive(Debug)]
pub enum CliError {
    Scenario(ParseError),
    Invalid(Error),
    Cap(Error),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Scenario(_) | CliError::Invalid(_) => 2,
            CliError::Cap(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Scenario(e) => write!(f, "{e}"),
            CliError::Invalid(e) => write!(f, "E004 {e}"),
            CliError::Cap(e) => write!(f, "E005 {e}"),
            CliError::Numerical(m) => write!(f, "E006 numerical failure: {m}"),
            CliError::Io(m) => write!(f, "E007 {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::CapExceeded { .. } => CliError::Cap(e),
            Error::InvalidMatrix(m) => CliError::Numerical(m),
            other => CliError::Invalid(other),
        }
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Scenario(e)
    }
}

/// Reads and parses a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_scenario(&text)?)
}

fn finite(label: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Numerical(format!("{label} is {x}")))
    }
}

/// Summary formatting: 12 significant digits, scientific outside [1e-3, 1e6).
fn sig(x: f64, digits: usize) -> String {
    let r = report::round_sig(x, digits);
    if r == 0.0 || !r.is_finite() || (1e-3..1e6).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn edge_list(edges: &[Edge]) -> String {
    let parts: Vec<String> = edges.iter().map(Edge::to_string).collect();
    format!("{{{}}}", parts.join(","))
}

fn schedule_list(s: &[Vec<Edge>]) -> String {
    s.iter().map(|set| edge_list(set)).collect::<Vec<_>>().join(" ")
}

/// Actions of a constant schedule taken from the first opponent interval.
fn opponent_actions(s: &Scenario, interval: usize) -> (AdversaryAction, DesignerAction) {
    let (ell, b) = (s.config.budget, s.config.boost);
    let mut u = AdversaryAction::idle(ell);
    let mut v = DesignerAction::idle(b, ell);
    if let Some(op) = &s.opponent {
        if let Some(set) = op.intervals.get(interval) {
            match op.role {
                Player::Adversary => u.broken = set.iter().copied().collect(),
                Player::Designer => v.boosted = set.iter().copied().collect(),
            }
        }
    }
    (u, v)
}

/// Schedule for `simulate`: the opponent's sets on the game's breakpoints,
/// or the free flow without an opponent.
fn simulation_schedule(s: &Scenario) -> Result<SwitchingSchedule, CliError> {
    let cfg = &s.config;
    match &s.opponent {
        None => Ok(SwitchingSchedule::constant(cfg.horizon, AdversaryAction::idle(cfg.budget), DesignerAction::idle(cfg.boost, cfg.budget), cfg.dwell)?),
        Some(op) => {
            let bp = cfg.breakpoints();
            if op.intervals.len() != bp.len() - 1 {
                return Err(CliError::Invalid(Error::InvalidSchedule(format!(
                    "opponent lists {} intervals, the game has {}",
                    op.intervals.len(),
                    bp.len() - 1
                ))));
            }
            let actions = (0..op.intervals.len()).map(|k| opponent_actions(s, k)).collect();
            Ok(SwitchingSchedule::new(bp, actions, cfg.dwell)?)
        }
    }
}

struct Output {
    report: Value,
    trajectory: Option<Trajectory>,
    summary: String,
}

/// Runs one command on a parsed scenario, writes `report.json` (and
/// `trajectory.csv` when the command produces a trajectory) into
/// `opts.out_dir`, and returns the one-line summary.
pub fn run_command(cmd: Command, scenario: &Scenario, opts: &RunOptions) -> Result<String, CliError> {
    let mut s = scenario.clone();
    if let Some(q) = opts.quad_nodes {
        s.config.quad_nodes = q;
    }
    if let Some(rho) = opts.rho {
        s.config.rho = Some(rho);
    }
    s.config.validate(&s.graph)?;
    let out = match cmd {
        Command::Simulate => run_simulate(&s)?,
        Command::Minmax | Command::Maxmin => run_game(&s, cmd)?,
        Command::SpeCheck => run_spe(&s)?,
        Command::Oracle => run_oracle(&s, opts.cap.unwrap_or(DEFAULT_ORACLE_CAP))?,
        Command::MpCheck => run_mp(&s)?,
        Command::Horizon => run_horizon(&s)?,
    };

    let mut report = match out.report {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("result".into(), other);
            m
        }
    };
    report.insert("command".into(), json!(cmd.name()));
    if let Some(seed) = opts.seed {
        report.insert("seed".into(), json!(seed));
    }
    fs::create_dir_all(&opts.out_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", opts.out_dir.display())))?;
    if let Some(traj) = &out.trajectory {
        report.insert("trajectory_csv".into(), json!("trajectory.csv"));
        write(&opts.out_dir.join("trajectory.csv"), &traj.to_csv(CSV_SAMPLES))?;
    }
    write(&opts.out_dir.join("report.json"), &report::to_json_string(&Value::Object(report)))?;
    Ok(out.summary)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn run_simulate(s: &Scenario) -> Result<Output, CliError> {
    let schedule = simulation_schedule(s)?;
    let traj = simulate(&s.graph, &schedule, &s.x0)?;
    let quad = s.config.quadrature();
    let value = finite("value", dissipation(&traj, &s.config.weight, &quad))?;
    let util = finite("utility", utility(&traj, &s.config.weight, &quad))?;
    let report = json!({
        "value": num(value),
        "utility": num(util),
        "final_state": traj.final_state().iter().map(|x| num(*x)).collect::<Vec<_>>(),
    });
    Ok(Output {
        report,
        summary: format!("simulate: value={} utility={}", sig(value, 12), sig(util, 12)),
        trajectory: Some(traj),
    })
}

fn run_game(s: &Scenario, cmd: Command) -> Result<Output, CliError> {
    let out: GameOutcome = if cmd == Command::Minmax {
        let (m, ell) = (s.graph.edge_count(), s.config.budget);
        if m > MAX_SEARCH_EDGES || ell > MAX_SEARCH_BUDGET {
            let size: u128 = (1..=ell).map(|i| binomial(m, i)).sum();
            return Err(CliError::Cap(Error::CapExceeded {
                size,
                cap: (1..=MAX_SEARCH_BUDGET).map(|i| binomial(MAX_SEARCH_EDGES, i)).sum(),
            }));
        }
        play_minmax(&s.graph, &s.x0, &s.config, s.override_map())?
    } else {
        play_maxmin(&s.graph, &s.x0, &s.config, s.override_map())?
    };
    finite("value", out.value)?;
    finite("utility", out.utility)?;
    let first = &out.intervals[0];
    let summary = format!(
        "{}: value={} u*={} v*={} intervals={}",
        cmd.name(),
        sig(out.value, 12),
        edge_list(&first.broken),
        edge_list(&first.boosted),
        out.intervals.len()
    );
    Ok(Output {
        report: report::outcome_report(&out, None),
        trajectory: Some(out.trajectory),
        summary,
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn epsilon(s: &Scenario, cmd: Command) -> Result<f64, CliError> {
    s.epsilon.ok_or_else(|| {
        CliError::Invalid(Error::InvalidConfig(format!("{} needs 'epsilon' in the [game] section", cmd.name())))
    })
}

fn run_spe(s: &Scenario) -> Result<Output, CliError> {
    let eps = epsilon(s, Command::SpeCheck)?;
    let r = spe_condition(&s.graph, s.config.boost, eps, &s.x0)?;
    Ok(Output {
        report: report::spe_report(&r, s.config.boost, eps),
        trajectory: None,
        summary: format!(
            "spe-check: holds={} gamma={} bound={} diversity_ok={}",
            r.holds,
            sig(r.gamma, 12),
            sig(r.bound, 12),
            r.diversity_ok
        ),
    })
}

fn run_horizon(s: &Scenario) -> Result<Output, CliError> {
    let eps = epsilon(s, Command::Horizon)?;
    let h = horizon_bound(&s.graph, &s.x0, eps)?;
    finite("t_max", h.t_max)?;
    Ok(Output {
        report: report::horizon_report(&h, eps),
        trajectory: None,
        summary: format!("horizon: t_max={} capped={}", sig(h.t_max, 12), h.capped),
    })
}

fn run_mp(s: &Scenario) -> Result<Output, CliError> {
    let (u, v) = opponent_actions(s, 0);
    let schedule = SwitchingSchedule::constant(s.config.horizon, u, v.clone(), s.config.dwell)?;
    let traj = simulate(&s.graph, &schedule, &s.x0)?;
    let tol = MpTolerances::for_horizon(s.config.horizon);
    let r = mp_consistency(&s.graph, &traj, &s.config.weight, &v, &s.config.quadrature(), &tol)?;
    finite("worst margin", r.worst_margin)?;
    Ok(Output {
        report: report::mp_report(&r, tol.weighted, tol.costate),
        trajectory: Some(traj),
        summary: format!(
            "mp-check: violations={} worst_margin={}",
            r.violations.len(),
            sig(r.worst_margin, 12)
        ),
    })
}

fn run_oracle(s: &Scenario, cap: u128) -> Result<Output, CliError> {
    let opts = OracleOptions { cap, sub_budget: false };
    let mut report = Map::new();
    let summary;
    if let Some(op) = &s.opponent {
        let player = match op.role {
            Player::Adversary => Player::Designer,
            Player::Designer => Player::Adversary,
        };
        let r = oracle_best_response(&s.graph, &s.x0, &s.config, player, &op.intervals, &opts)?;
        finite("value", r.best_value)?;
        report.insert("player".into(), json!(player));
        report.insert("best_response".into(), report::oracle_result_report(&r));
        summary = format!(
            "oracle: {} best={} value={} evaluations={}",
            match player {
                Player::Adversary => "adversary",
                Player::Designer => "designer",
            },
            schedule_list(&r.best_schedule),
            sig(r.best_value, 12),
            r.evaluation_count
        );
    } else {
        let upper = oracle_game_value(&s.graph, &s.x0, &s.config, GameOrder::MinMax, &opts)?;
        let lower = oracle_game_value(&s.graph, &s.x0, &s.config, GameOrder::MaxMin, &opts)?;
        finite("upper value", upper.value)?;
        finite("lower value", lower.value)?;
        let gap = (upper.value - lower.value).abs();
        let equal = gap <= 1e-9 * upper.value.abs().max(lower.value.abs());
        report.insert("upper".into(), report::oracle_value_report(&upper));
        report.insert("lower".into(), report::oracle_value_report(&lower));
        report.insert("gap".into(), num(gap));
        report.insert("values_equal".into(), json!(equal));
        summary = format!(
            "oracle: upper={} lower={} equal={}",
            sig(upper.value, 12),
            sig(lower.value, 12),
            equal
        );
    }
    Ok(Output {
        report: Value::Object(report),
        trajectory: None,
        summary,
    })
}
