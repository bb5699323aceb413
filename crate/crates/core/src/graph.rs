//! Weighted undirected graphs, player actions, and edge scoring.
//!
//! Edges are stored once, normalized to `i < j`, and kept in ascending
//! lexicographic order. That order doubles as the tie-break used by every
//! selection in the crate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance under which two edge scores are considered tied.
pub const SCORE_TOL: f64 = 1e-9;

/// An undirected edge between two 0-based node indices, stored with `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
}

impl Edge {
    /// Builds a normalized edge. Panics on a self-loop.
    pub fn new(a: usize, b: usize) -> Self {
        assert_ne!(a, b, "self-loops are not edges");
        Edge {
            i: a.min(b),
            j: a.max(b),
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

/// Connected undirected graph with positive coupling weights.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    node_count: usize,
    edges: Vec<Edge>,
    weights: Vec<f64>,
}

impl WeightedGraph {
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidGraph("graph needs at least one node".into()));
        }
        let mut map = BTreeMap::new();
        for (a, b, w) in edges {
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at node {a}")));
            }
            if a >= node_count || b >= node_count {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a},{b}) references a node outside 0..{node_count}"
                )));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidGraph(format!("edge ({a},{b}) has non-positive weight {w}")));
            }
            let e = Edge::new(a, b);
            if map.insert(e, w).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate edge {e}")));
            }
        }
        let (edges, weights): (Vec<_>, Vec<_>) = map.into_iter().unzip();
        let g = WeightedGraph {
            node_count,
            edges,
            weights,
        };
        if !g.is_connected() {
            return Err(Error::InvalidGraph("graph is not connected".into()));
        }
        Ok(g)
    }

    fn is_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.node_count];
        for e in &self.edges {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges in lexicographic order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn index_of(&self, e: Edge) -> Option<usize> {
        self.edges.binary_search(&e).ok()
    }

    pub fn contains(&self, e: Edge) -> bool {
        self.index_of(e).is_some()
    }

    pub fn weight(&self, e: Edge) -> Option<f64> {
        self.index_of(e).map(|k| self.weights[k])
    }

    fn check_edges<'a>(&self, edges: impl IntoIterator<Item = &'a Edge>) -> Result<()> {
        for e in edges {
            if !self.contains(*e) {
                return Err(Error::UnknownEdge(*e));
            }
        }
        Ok(())
    }
}

/// Set of links the adversary breaks, with its budget.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryAction {
    pub broken: BTreeSet<Edge>,
    pub budget: usize,
}

impl AdversaryAction {
    pub fn new(g: &WeightedGraph, broken: impl IntoIterator<Item = Edge>, budget: usize) -> Result<Self> {
        let action = AdversaryAction {
            broken: broken.into_iter().collect(),
            budget,
        };
        action.validate(g)?;
        Ok(action)
    }

    pub fn idle(budget: usize) -> Self {
        AdversaryAction {
            broken: BTreeSet::new(),
            budget,
        }
    }

    pub fn validate(&self, g: &WeightedGraph) -> Result<()> {
        g.check_edges(&self.broken)?;
        if self.broken.len() > self.budget {
            return Err(Error::InvalidAction(format!(
                "adversary breaks {} links with budget {}",
                self.broken.len(),
                self.budget
            )));
        }
        Ok(())
    }

    pub fn is_broken(&self, e: Edge) -> bool {
        self.broken.contains(&e)
    }
}

/// Set of links the designer reinforces by `boost`, with its budget.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DesignerAction {
    pub boosted: BTreeSet<Edge>,
    pub boost: f64,
    pub budget: usize,
}

impl DesignerAction {
    pub fn new(
        g: &WeightedGraph,
        boosted: impl IntoIterator<Item = Edge>,
        boost: f64,
        budget: usize,
    ) -> Result<Self> {
        let action = DesignerAction {
            boosted: boosted.into_iter().collect(),
            boost,
            budget,
        };
        action.validate(g)?;
        Ok(action)
    }

    pub fn idle(boost: f64, budget: usize) -> Self {
        DesignerAction {
            boosted: BTreeSet::new(),
            boost,
            budget,
        }
    }

    pub fn validate(&self, g: &WeightedGraph) -> Result<()> {
        g.check_edges(&self.boosted)?;
        if !(self.boost >= 0.0 && self.boost.is_finite()) {
            return Err(Error::InvalidAction(format!("boost must be non-negative, got {}", self.boost)));
        }
        if self.boosted.len() > self.budget {
            return Err(Error::InvalidAction(format!(
                "designer boosts {} links with budget {}",
                self.boosted.len(),
                self.budget
            )));
        }
        Ok(())
    }

    /// Weight increment applied to `e` (`b` if boosted, else 0).
    pub fn increment(&self, e: Edge) -> f64 {
        if self.boosted.contains(&e) {
            self.boost
        } else {
            0.0
        }
    }
}

/// Negative Laplacian of the graph under both players' actions.
///
/// Off-diagonal `(i,j)` is `(a_ij + v_ij)(1 - u_ij)`; the diagonal holds the
/// negated row sums.
pub fn assemble_system_matrix(
    g: &WeightedGraph,
    u: &AdversaryAction,
    v: &DesignerAction,
) -> Result<DMatrix<f64>> {
    g.check_edges(&u.broken)?;
    g.check_edges(&v.boosted)?;
    let n = g.node_count();
    let mut a = DMatrix::zeros(n, n);
    for (e, &w) in g.edges().iter().zip(g.weights()) {
        if u.is_broken(*e) {
            continue;
        }
        let c = w + v.increment(*e);
        a[(e.i, e.j)] = c;
        a[(e.j, e.i)] = c;
        a[(e.i, e.i)] -= c;
        a[(e.j, e.j)] -= c;
    }
    Ok(a)
}

/// A set of (edge, score) pairs holding one score per edge.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoredEdgeSet {
    entries: Vec<(Edge, f64)>,
}

impl ScoredEdgeSet {
    /// Collapses candidate pairs to one entry per edge, keeping the minimum
    /// score. Only the smallest scores matter to [`ScoredEdgeSet::phi_ell`],
    /// so the collapse does not change any selection.
    pub fn from_candidates(candidates: impl IntoIterator<Item = (Edge, f64)>) -> Self {
        let mut map: BTreeMap<Edge, f64> = BTreeMap::new();
        for (e, s) in candidates {
            map.entry(e).and_modify(|cur| *cur = cur.min(s)).or_insert(s);
        }
        ScoredEdgeSet {
            entries: map.into_iter().collect(),
        }
    }

    pub fn entries(&self) -> &[(Edge, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn score(&self, e: Edge) -> Option<f64> {
        self.entries
            .binary_search_by(|(x, _)| x.cmp(&e))
            .ok()
            .map(|k| self.entries[k].1)
    }

    /// All edges in the set (the projection operator).
    pub fn edges(&self) -> Vec<Edge> {
        self.entries.iter().map(|(e, _)| *e).collect()
    }

    /// Keeps only the entries whose edge satisfies `keep`.
    pub fn filter(&self, mut keep: impl FnMut(Edge) -> bool) -> Self {
        ScoredEdgeSet {
            entries: self.entries.iter().copied().filter(|(e, _)| keep(*e)).collect(),
        }
    }

    /// The edges carrying the `ell` smallest scores, in ascending score order.
    ///
    /// Scores within [`SCORE_TOL`] of the running minimum are ties and
    /// resolve to the lexicographically smallest edge.
    pub fn phi_ell(&self, ell: usize) -> Vec<Edge> {
        let mut remaining: Vec<(Edge, f64)> = self.entries.clone();
        let mut out = Vec::with_capacity(ell.min(remaining.len()));
        while out.len() < ell && !remaining.is_empty() {
            let lowest = remaining.iter().map(|(_, s)| *s).fold(f64::INFINITY, f64::min);
            // entries are kept in edge order, so the first candidate is lexicographically smallest
            let pick = remaining
                .iter()
                .position(|(_, s)| *s <= lowest + SCORE_TOL)
                .expect("non-empty set has a minimum");
            out.push(remaining.remove(pick).0);
        }
        out
    }
}

/// Per-edge potentials `nu_ij = -(x_i - x_j)^2`, aligned with `g.edges()`.
///
/// Values may be overridden edge by edge, which reproduces worked examples
/// whose declared potentials are not derived from a state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Potentials {
    values: Vec<f64>,
}

impl Potentials {
    pub fn from_state(g: &WeightedGraph, x: &[f64]) -> Result<Self> {
        if x.len() != g.node_count() {
            return Err(Error::Dimension {
                expected: g.node_count(),
                got: x.len(),
            });
        }
        let values = g
            .edges()
            .iter()
            .map(|e| {
                let d = x[e.i] - x[e.j];
                -(d * d)
            })
            .collect();
        Ok(Potentials { values })
    }

    /// Builds potentials from explicit per-edge values; edges not listed
    /// fall back to `base`.
    pub fn with_override(mut self, g: &WeightedGraph, overrides: &BTreeMap<Edge, f64>) -> Result<Self> {
        for (e, &nu) in overrides {
            let k = g.index_of(*e).ok_or(Error::UnknownEdge(*e))?;
            if nu > 0.0 {
                return Err(Error::InvalidAction(format!("potential override for {e} must be <= 0, got {nu}")));
            }
            self.values[k] = nu;
        }
        Ok(self)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, g: &WeightedGraph, e: Edge) -> Option<f64> {
        g.index_of(e).map(|k| self.values[k])
    }

    pub fn scored(&self, g: &WeightedGraph) -> ScoredEdgeSet {
        ScoredEdgeSet::from_candidates(g.edges().iter().copied().zip(self.values.iter().copied()))
    }

    /// Scores `(a_ij + v_ij) * nu_ij`.
    pub fn weighted(&self, g: &WeightedGraph, v: &DesignerAction) -> ScoredEdgeSet {
        ScoredEdgeSet::from_candidates(
            g.edges()
                .iter()
                .zip(g.weights())
                .zip(&self.values)
                .map(|((e, a), nu)| (*e, (a + v.increment(*e)) * nu)),
        )
    }

    /// Scores `(a_ij + b) * nu_ij` for a uniform increment `b` on every edge.
    pub fn weighted_uniform(&self, g: &WeightedGraph, b: f64) -> ScoredEdgeSet {
        ScoredEdgeSet::from_candidates(
            g.edges()
                .iter()
                .zip(g.weights())
                .zip(&self.values)
                .map(|((e, a), nu)| (*e, (a + b) * nu)),
        )
    }
}

/// Potential scores of all graph edges for state `x`.
pub fn potentials(g: &WeightedGraph, x: &[f64]) -> Result<ScoredEdgeSet> {
    Ok(Potentials::from_state(g, x)?.scored(g))
}

/// Weighted potential scores `(a_ij + v_ij) nu_ij` for state `x`.
pub fn weighted_potentials(g: &WeightedGraph, v: &DesignerAction, x: &[f64]) -> Result<ScoredEdgeSet> {
    v.validate(g)?;
    Ok(Potentials::from_state(g, x)?.weighted(g, v))
}

/// Largest pairwise disagreement `max |x_i - x_j|`.
pub fn max_gap(x: &[f64]) -> f64 {
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    if x.is_empty() {
        0.0
    } else {
        hi - lo
    }
}
