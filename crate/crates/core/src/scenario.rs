//! Line-oriented scenario files.
//!
//! ```text
//! # comments start with '#'
//! [graph]
//! nodes = 3
//! edge = 0 1 3        # endpoints (0-based) and weight
//! [state]
//! x0 = 1 2 3
//! [game]
//! horizon = 0.001
//! budget = 1
//! boost = 1
//! dwell = 0.001
//! rho = 0.001          # optional, defaults to dwell
//! weight = constant    # or: exp <alpha>
//! epsilon = 0.5        # optional, used by spe-check and horizon
//! quad_nodes = 32      # optional
//! [override]
//! nu = 0 2 -5          # declared potential of an edge
//! [opponent]
//! role = adversary     # or designer
//! interval = 0-2 1-2   # edge set on one interval; may be empty
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use crate::analysis::Player;
use crate::dynamics::WeightFunction;
use crate::graph::{Edge, WeightedGraph};
use crate::strategies::GameConfig;

/// Diagnostic class of a scenario error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagCode {
    /// Malformed line, bad number or missing required key.
    Syntax,
    /// Key or section the grammar does not define.
    UnknownKey,
    /// Edge or node that does not exist in the graph.
    DanglingEdge,
    /// Well-formed values that violate a model invariant.
    Invariant,
}

impl DiagCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagCode::Syntax => "E001",
            DiagCode::UnknownKey => "E002",
            DiagCode::DanglingEdge => "E003",
            DiagCode::Invariant => "E004",
        }
    }
}

/// Scenario error with a 1-based source position.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{} at line {line}, column {column}: {message}", code.as_str())]
pub struct ParseError {
    pub code: DiagCode,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// A fixed schedule for one player, one edge set per interval.
#[derive(Clone, Debug, PartialEq)]
pub struct OpponentSchedule {
    pub role: Player,
    pub intervals: Vec<Vec<Edge>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub graph: WeightedGraph,
    pub x0: Vec<f64>,
    pub config: GameConfig,
    pub epsilon: Option<f64>,
    pub nu_override: BTreeMap<Edge, f64>,
    pub opponent: Option<OpponentSchedule>,
}

impl Scenario {
    pub fn override_map(&self) -> Option<&BTreeMap<Edge, f64>> {
        if self.nu_override.is_empty() {
            None
        } else {
            Some(&self.nu_override)
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Graph,
    State,
    Game,
    Override,
    Opponent,
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

struct Line<'a> {
    number: usize,
    key: &'a str,
    key_column: usize,
    values: Vec<Token<'a>>,
    value_column: usize,
}

fn err(code: DiagCode, line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        code,
        line,
        column,
        message: message.into(),
    }
}

fn tokens(text: &str, offset: usize) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices().chain(std::iter::once((text.len(), ' '))) {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Token {
                    text: &text[s..i],
                    column: offset + text[..s].chars().count(),
                });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    out
}

impl Token<'_> {
    fn float(&self, line: usize) -> Result<f64, ParseError> {
        match self.text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(err(DiagCode::Syntax, line, self.column, format!("expected a finite number, got '{}'", self.text))),
        }
    }

    fn count(&self, line: usize) -> Result<usize, ParseError> {
        self.text
            .parse::<usize>()
            .map_err(|_| err(DiagCode::Syntax, line, self.column, format!("expected a non-negative integer, got '{}'", self.text)))
    }
}

impl Line<'_> {
    fn single(&self) -> Result<&Token<'_>, ParseError> {
        match self.values.as_slice() {
            [t] => Ok(t),
            _ => Err(err(
                DiagCode::Syntax,
                self.number,
                self.value_column,
                format!("'{}' takes exactly one value", self.key),
            )),
        }
    }

    fn exactly(&self, n: usize, what: &str) -> Result<(), ParseError> {
        if self.values.len() == n {
            Ok(())
        } else {
            Err(err(DiagCode::Syntax, self.number, self.value_column, format!("'{}' expects {what}", self.key)))
        }
    }
}

/// Edge endpoints plus the column they were read from.
type EdgeAt = (usize, usize, usize);

#[derive(Default)]
struct Draft {
    nodes: Option<(usize, usize)>,
    edges: Vec<(usize, usize, f64, usize, usize)>,
    x0: Option<(Vec<f64>, usize)>,
    horizon: Option<f64>,
    budget: Option<usize>,
    boost: Option<f64>,
    dwell: Option<f64>,
    rho: Option<f64>,
    weight: Option<WeightFunction>,
    epsilon: Option<f64>,
    quad_nodes: Option<usize>,
    overrides: Vec<(usize, usize, f64, usize, usize)>,
    role: Option<Player>,
    intervals: Vec<(Vec<EdgeAt>, usize)>,
    game_line: usize,
}

fn set_once<T>(slot: &mut Option<T>, value: T, line: &Line) -> Result<(), ParseError> {
    if slot.is_some() {
        return Err(err(DiagCode::Invariant, line.number, line.key_column, format!("duplicate key '{}'", line.key)));
    }
    *slot = Some(value);
    Ok(())
}

/// Parses a scenario, validating every reference and invariant.
pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let mut draft = Draft::default();
    let mut section: Option<Section> = None;
    let mut seen_content = false;
    let mut last_line = 1;
    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        last_line = number;
        let body = raw.split('#').next().unwrap_or("");
        let trimmed = body.trim();
        if trimmed.is_empty() {
            continue;
        }
        seen_content = true;
        let indent = body.len() - body.trim_start().len();
        let column = body[..indent].chars().count() + 1;
        if let Some(name) = trimmed.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(DiagCode::Syntax, number, column, "unterminated section header"))?;
            section = Some(match name.trim() {
                "graph" => Section::Graph,
                "state" => Section::State,
                "game" => {
                    draft.game_line = number;
                    Section::Game
                }
                "override" => Section::Override,
                "opponent" => Section::Opponent,
                other => return Err(err(DiagCode::UnknownKey, number, column + 1, format!("unknown section '{other}'"))),
            });
            continue;
        }
        let Some(eq) = body.find('=') else {
            return Err(err(DiagCode::Syntax, number, column, "expected 'key = value'"));
        };
        let key = body[..eq].trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(err(DiagCode::Syntax, number, column, "malformed key"));
        }
        let value_offset = body[..eq + 1].chars().count() + 1;
        let values = tokens(&body[eq + 1..], value_offset);
        let value_column = values.first().map_or(value_offset, |t| t.column);
        let line = Line {
            number,
            key,
            key_column: column,
            values,
            value_column,
        };
        let Some(sec) = section else {
            return Err(err(DiagCode::Syntax, number, column, "key outside of any section"));
        };
        parse_line(&mut draft, sec, &line)?;
    }
    if !seen_content {
        return Err(err(DiagCode::Syntax, 1, 1, "empty scenario"));
    }
    finish(draft, last_line)
}

fn edge_token(t: &Token, line: usize) -> Result<(usize, usize), ParseError> {
    let bad = || err(DiagCode::Syntax, line, t.column, format!("expected an edge 'i-j', got '{}'", t.text));
    let (a, b) = t.text.split_once('-').ok_or_else(bad)?;
    Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
}

fn parse_line(d: &mut Draft, sec: Section, line: &Line) -> Result<(), ParseError> {
    let n = line.number;
    let unknown = || err(DiagCode::UnknownKey, n, line.key_column, format!("unknown key '{}'", line.key));
    match sec {
        Section::Graph => match line.key {
            "nodes" => set_once(&mut d.nodes, (line.single()?.count(n)?, n), line),
            "edge" => {
                line.exactly(3, "'i j weight'")?;
                let v = &line.values;
                d.edges.push((v[0].count(n)?, v[1].count(n)?, v[2].float(n)?, n, line.value_column));
                Ok(())
            }
            _ => Err(unknown()),
        },
        Section::State => match line.key {
            "x0" => {
                if line.values.is_empty() {
                    return Err(err(DiagCode::Syntax, n, line.value_column, "x0 needs at least one value"));
                }
                let x = line.values.iter().map(|t| t.float(n)).collect::<Result<Vec<_>, _>>()?;
                set_once(&mut d.x0, (x, n), line)
            }
            _ => Err(unknown()),
        },
        Section::Game => match line.key {
            "horizon" => set_once(&mut d.horizon, line.single()?.float(n)?, line),
            "budget" => set_once(&mut d.budget, line.single()?.count(n)?, line),
            "boost" => set_once(&mut d.boost, line.single()?.float(n)?, line),
            "dwell" => set_once(&mut d.dwell, line.single()?.float(n)?, line),
            "rho" => set_once(&mut d.rho, line.single()?.float(n)?, line),
            "epsilon" => set_once(&mut d.epsilon, line.single()?.float(n)?, line),
            "quad_nodes" => set_once(&mut d.quad_nodes, line.single()?.count(n)?, line),
            "weight" => {
                let w = match line.values.as_slice() {
                    [t] if t.text == "constant" => WeightFunction::Constant,
                    [t, a] if t.text == "exp" => WeightFunction::ExponentialDecay { alpha: a.float(n)? },
                    _ => {
                        return Err(err(DiagCode::Syntax, n, line.value_column, "weight is 'constant' or 'exp <alpha>'"));
                    }
                };
                set_once(&mut d.weight, w, line)
            }
            _ => Err(unknown()),
        },
        Section::Override => match line.key {
            "nu" => {
                line.exactly(3, "'i j value'")?;
                let v = &line.values;
                d.overrides.push((v[0].count(n)?, v[1].count(n)?, v[2].float(n)?, n, line.value_column));
                Ok(())
            }
            _ => Err(unknown()),
        },
        Section::Opponent => match line.key {
            "role" => {
                let role = match line.single()?.text {
                    "adversary" => Player::Adversary,
                    "designer" => Player::Designer,
                    other => {
                        return Err(err(DiagCode::Syntax, n, line.value_column, format!("role is 'adversary' or 'designer', got '{other}'")));
                    }
                };
                set_once(&mut d.role, role, line)
            }
            "interval" => {
                let set = line
                    .values
                    .iter()
                    .map(|t| edge_token(t, n).map(|(i, j)| (i, j, t.column)))
                    .collect::<Result<Vec<_>, _>>()?;
                d.intervals.push((set, n));
                Ok(())
            }
            _ => Err(unknown()),
        },
    }
}

fn resolve(g: &WeightedGraph, i: usize, j: usize, line: usize, column: usize) -> Result<Edge, ParseError> {
    let dangling = || err(DiagCode::DanglingEdge, line, column, format!("edge ({i},{j}) is not in the graph"));
    if i == j || i >= g.node_count() || j >= g.node_count() {
        return Err(dangling());
    }
    let e = Edge::new(i, j);
    if g.contains(e) {
        Ok(e)
    } else {
        Err(dangling())
    }
}

fn finish(d: Draft, last_line: usize) -> Result<Scenario, ParseError> {
    let missing = |what: &str| err(DiagCode::Syntax, last_line, 1, format!("missing required key '{what}'"));
    let (nodes, nodes_line) = d.nodes.ok_or_else(|| missing("nodes"))?;
    for &(i, j, _, line, column) in &d.edges {
        if i >= nodes || j >= nodes || i == j {
            return Err(err(DiagCode::DanglingEdge, line, column, format!("edge ({i},{j}) does not join two distinct nodes of {nodes}")));
        }
    }
    let graph = WeightedGraph::new(nodes, d.edges.iter().map(|&(i, j, a, _, _)| (i, j, a)))
        .map_err(|e| err(DiagCode::Invariant, nodes_line, 1, e.to_string()))?;
    let (x0, x_line) = d.x0.ok_or_else(|| missing("x0"))?;
    if x0.len() != nodes {
        return Err(err(DiagCode::Invariant, x_line, 1, format!("x0 has {} entries for {nodes} nodes", x0.len())));
    }
    let config = GameConfig {
        horizon: d.horizon.ok_or_else(|| missing("horizon"))?,
        budget: d.budget.ok_or_else(|| missing("budget"))?,
        boost: d.boost.ok_or_else(|| missing("boost"))?,
        dwell: d.dwell.ok_or_else(|| missing("dwell"))?,
        weight: d.weight.unwrap_or_default(),
        rho: d.rho,
        quad_nodes: d.quad_nodes.unwrap_or(crate::dynamics::DEFAULT_QUAD_NODES),
    };
    config
        .validate(&graph)
        .map_err(|e| err(DiagCode::Invariant, d.game_line, 1, e.to_string()))?;
    if let Some(eps) = d.epsilon {
        if !(eps > 0.0) {
            return Err(err(DiagCode::Invariant, d.game_line, 1, format!("epsilon must be positive, got {eps}")));
        }
    }
    let mut nu_override = BTreeMap::new();
    for &(i, j, nu, line, column) in &d.overrides {
        let e = resolve(&graph, i, j, line, column)?;
        if nu > 0.0 {
            return Err(err(DiagCode::Invariant, line, column, format!("potential of {e} must be <= 0, got {nu}")));
        }
        if nu_override.insert(e, nu).is_some() {
            return Err(err(DiagCode::Invariant, line, column, format!("edge {e} overridden twice")));
        }
    }
    let opponent = match (d.role, d.intervals.is_empty()) {
        (None, true) => None,
        (None, false) => return Err(missing("role")),
        (Some(role), _) => {
            let mut intervals = Vec::with_capacity(d.intervals.len());
            for (set, line) in &d.intervals {
                let mut edges = Vec::with_capacity(set.len());
                for &(i, j, column) in set {
                    edges.push(resolve(&graph, i, j, *line, column)?);
                }
                edges.sort();
                edges.dedup();
                if edges.len() > config.budget {
                    return Err(err(DiagCode::Invariant, *line, 1, format!("{} edges exceed the budget {}", edges.len(), config.budget)));
                }
                intervals.push(edges);
            }
            Some(OpponentSchedule { role, intervals })
        }
    };
    Ok(Scenario {
        graph,
        x0,
        config,
        epsilon: d.epsilon,
        nu_override,
        opponent,
    })
}

/// Writes a scenario in the grammar accepted by [`parse_scenario`].
pub fn serialize_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[graph]\nnodes = {}", s.graph.node_count());
    for (e, a) in s.graph.edges().iter().zip(s.graph.weights()) {
        let _ = writeln!(out, "edge = {} {} {}", e.i, e.j, a);
    }
    let xs: Vec<String> = s.x0.iter().map(|x| x.to_string()).collect();
    let _ = writeln!(out, "\n[state]\nx0 = {}", xs.join(" "));
    let c = &s.config;
    let _ = writeln!(out, "\n[game]");
    let _ = writeln!(out, "horizon = {}", c.horizon);
    let _ = writeln!(out, "budget = {}", c.budget);
    let _ = writeln!(out, "boost = {}", c.boost);
    let _ = writeln!(out, "dwell = {}", c.dwell);
    if let Some(rho) = c.rho {
        let _ = writeln!(out, "rho = {rho}");
    }
    match c.weight {
        WeightFunction::Constant => {
            let _ = writeln!(out, "weight = constant");
        }
        WeightFunction::ExponentialDecay { alpha } => {
            let _ = writeln!(out, "weight = exp {alpha}");
        }
    }
    if let Some(eps) = s.epsilon {
        let _ = writeln!(out, "epsilon = {eps}");
    }
    let _ = writeln!(out, "quad_nodes = {}", c.quad_nodes);
    if !s.nu_override.is_empty() {
        let _ = writeln!(out, "\n[override]");
        for (e, nu) in &s.nu_override {
            let _ = writeln!(out, "nu = {} {} {}", e.i, e.j, nu);
        }
    }
    if let Some(op) = &s.opponent {
        let role = match op.role {
            Player::Adversary => "adversary",
            Player::Designer => "designer",
        };
        let _ = writeln!(out, "\n[opponent]\nrole = {role}");
        for set in &op.intervals {
            let edges: Vec<String> = set.iter().map(|e| format!("{}-{}", e.i, e.j)).collect();
            let _ = writeln!(out, "interval = {}", edges.join(" "));
        }
    }
    out
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_scenario(self))
    }
}
