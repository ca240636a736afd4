//! Finite connected metric multigraphs with oriented edges.
//!
//! Every unoriented edge `k` is stored once and materialized as two oriented
//! edges: `EdgeId(2k)` runs from the first endpoint to the second and
//! `EdgeId(2k + 1)` is its reversal. Reversal is therefore `id ^ 1`, which is a
//! fixed-point-free involution by construction. Lengths are exact rationals and
//! live on the unoriented edge, so `length(e) == length(reversal(e))` always.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::format::{EdgeSpec, GraphDocument, RationalText};

pub type Rational = BigRational;

/// Builds `num / den` as an exact rational.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub usize);

impl EdgeId {
    /// The oppositely oriented copy of the same unoriented edge.
    pub fn reversal(self) -> EdgeId {
        EdgeId(self.0 ^ 1)
    }

    /// Index of the underlying unoriented edge.
    pub fn unoriented(self) -> usize {
        self.0 / 2
    }

    pub fn is_forward(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn forward(unoriented: usize) -> EdgeId {
        EdgeId(2 * unoriented)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrientedEdge {
    pub id: EdgeId,
    pub reversal: EdgeId,
    pub origin: VertexId,
    pub terminus: VertexId,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph has no edges")]
    Empty,
    #[error("duplicate vertex `{0}`")]
    DuplicateVertex(String),
    #[error("duplicate edge id `{0}`")]
    DuplicateEdge(String),
    #[error("edge `{edge}` references unknown vertex `{vertex}`")]
    DanglingEndpoint { edge: String, vertex: String },
    #[error("non-positive length {length} on edge `{edge}`")]
    NonPositiveLength { edge: String, length: String },
    #[error("edge `{0}` has no length")]
    MissingLength(String),
    #[error("length {0} on edge `{1}` is not a positive finite number")]
    InvalidFloatLength(f64, String),
    #[error("expected {expected} lengths, got {got}")]
    LengthCount { expected: usize, got: usize },
    #[error("graph is disconnected; components: {components:?}")]
    Disconnected { components: Vec<Vec<String>> },
    #[error("scale factor must be positive, got {0}")]
    NonPositiveScale(String),
    #[error("graph is a cycle; series reduction would erase every vertex")]
    Cycle,
    #[error("graph has terminal vertices: {0:?}")]
    TerminalVertices(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Edge {
    name: String,
    tail: VertexId,
    head: VertexId,
    length: Rational,
}

/// A finite connected metric multigraph. Loops and parallel edges are allowed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetricGraph {
    vertex_names: Vec<String>,
    edges: Vec<Edge>,
    outgoing: Vec<Vec<EdgeId>>,
}

/// One pass/fail line of a [`HypothesisReport`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub passed: bool,
    pub witness: Vec<String>,
}

impl Check {
    fn pass() -> Self {
        Check { passed: true, witness: Vec::new() }
    }

    fn fail(witness: Vec<String>) -> Self {
        Check { passed: false, witness }
    }
}

/// Standing hypotheses for the entropy operations: connected, no terminal
/// vertex, and not reduced to a single cycle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HypothesisReport {
    pub connected: Check,
    pub no_terminal: Check,
    pub not_cycle: Check,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.connected.passed && self.no_terminal.passed && self.not_cycle.passed
    }

    /// Human-readable summary of the failing checks.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, check) in [
            ("connected", &self.connected),
            ("no terminal vertex", &self.no_terminal),
            ("not a cycle", &self.not_cycle),
        ] {
            if !check.passed {
                out.push(format!("{name}: {}", check.witness.join(", ")));
            }
        }
        out
    }
}

/// Maps each edge of a series-reduced graph back to the chain of original
/// oriented edges it replaces. `chains[k]` lists the original edges traversed
/// by the forward orientation of new unoriented edge `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainMap {
    pub chains: Vec<Vec<EdgeId>>,
}

impl ChainMap {
    pub fn is_identity(&self) -> bool {
        self.chains
            .iter()
            .enumerate()
            .all(|(k, c)| c.len() == 1 && c[0] == EdgeId::forward(k))
    }
}

impl MetricGraph {
    /// Builds a graph from vertex names and `(name, tail, head, length)` edges.
    pub fn from_parts(
        vertex_names: Vec<String>,
        edges: Vec<(String, VertexId, VertexId, Rational)>,
    ) -> Result<Self, GraphError> {
        if edges.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut seen = BTreeSet::new();
        for name in &vertex_names {
            if !seen.insert(name.as_str()) {
                return Err(GraphError::DuplicateVertex(name.clone()));
            }
        }
        let mut edge_names = BTreeSet::new();
        let mut stored = Vec::with_capacity(edges.len());
        for (name, tail, head, length) in edges {
            if !edge_names.insert(name.clone()) {
                return Err(GraphError::DuplicateEdge(name));
            }
            for v in [tail, head] {
                if v.0 >= vertex_names.len() {
                    return Err(GraphError::DanglingEndpoint { edge: name, vertex: format!("#{}", v.0) });
                }
            }
            if !length.is_positive() {
                return Err(GraphError::NonPositiveLength { edge: name, length: length.to_string() });
            }
            stored.push(Edge { name, tail, head, length });
        }
        let mut outgoing = vec![Vec::new(); vertex_names.len()];
        for (k, e) in stored.iter().enumerate() {
            outgoing[e.tail.0].push(EdgeId(2 * k));
            outgoing[e.head.0].push(EdgeId(2 * k + 1));
        }
        for out in &mut outgoing {
            out.sort();
        }
        let g = MetricGraph { vertex_names, edges: stored, outgoing };
        let components = g.components();
        if components.len() > 1 {
            let components = components
                .into_iter()
                .map(|c| c.into_iter().map(|v| g.vertex_names[v.0].clone()).collect())
                .collect();
            return Err(GraphError::Disconnected { components });
        }
        Ok(g)
    }

    /// Builds a graph from its textual description. Every edge must carry a length.
    pub fn from_document(doc: &GraphDocument) -> Result<Self, GraphError> {
        Self::from_document_with_default(doc, None)
    }

    pub(crate) fn from_document_with_default(
        doc: &GraphDocument,
        default_length: Option<&Rational>,
    ) -> Result<Self, GraphError> {
        let mut index = HashMap::new();
        for (i, name) in doc.vertices.iter().enumerate() {
            if index.insert(name.as_str(), VertexId(i)).is_some() {
                return Err(GraphError::DuplicateVertex(name.clone()));
            }
        }
        let mut edges = Vec::with_capacity(doc.edges.len());
        for (k, spec) in doc.edges.iter().enumerate() {
            let name = spec.id.clone().unwrap_or_else(|| format!("e{k}"));
            let lookup = |v: &str| {
                index.get(v).copied().ok_or_else(|| GraphError::DanglingEndpoint {
                    edge: name.clone(),
                    vertex: v.to_string(),
                })
            };
            let tail = lookup(&spec.u)?;
            let head = lookup(&spec.v)?;
            let length = match (&spec.length, default_length) {
                (Some(l), _) => l.0.clone(),
                (None, Some(d)) => d.clone(),
                (None, None) => return Err(GraphError::MissingLength(name)),
            };
            edges.push((name, tail, head, length));
        }
        Self::from_parts(doc.vertices.clone(), edges)
    }

    /// Canonical description of this graph; serializing it is byte-stable.
    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            vertices: self.vertex_names.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeSpec {
                    u: self.vertex_names[e.tail.0].clone(),
                    v: self.vertex_names[e.head.0].clone(),
                    length: Some(RationalText(e.length.clone())),
                    id: Some(e.name.clone()),
                })
                .collect(),
            groups: None,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_names.len()
    }

    /// Number of unoriented edges.
    pub fn unoriented_edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `|EX|`, the number of oriented edges.
    pub fn edge_count(&self) -> usize {
        2 * self.edges.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> {
        (0..self.vertex_names.len()).map(VertexId)
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> {
        (0..2 * self.edges.len()).map(EdgeId)
    }

    pub fn vertex_name(&self, x: VertexId) -> &str {
        &self.vertex_names[x.0]
    }

    pub fn vertex_by_name(&self, name: &str) -> Option<VertexId> {
        self.vertex_names.iter().position(|n| n == name).map(VertexId)
    }

    /// Name of the unoriented edge.
    pub fn edge_name(&self, unoriented: usize) -> &str {
        &self.edges[unoriented].name
    }

    /// Stable label for an oriented edge: the edge id for the forward
    /// orientation, `~id` for its reversal.
    pub fn edge_label(&self, e: EdgeId) -> String {
        let name = &self.edges[e.unoriented()].name;
        if e.is_forward() {
            name.clone()
        } else {
            format!("~{name}")
        }
    }

    pub fn edge_by_label(&self, label: &str) -> Option<EdgeId> {
        let (name, forward) = match label.strip_prefix('~') {
            Some(rest) => (rest, false),
            None => (label, true),
        };
        let k = self.edges.iter().position(|e| e.name == name)?;
        Some(if forward { EdgeId(2 * k) } else { EdgeId(2 * k + 1) })
    }

    pub fn oriented(&self, e: EdgeId) -> OrientedEdge {
        OrientedEdge { id: e, reversal: e.reversal(), origin: self.origin(e), terminus: self.terminus(e) }
    }

    /// `i(e)`.
    pub fn origin(&self, e: EdgeId) -> VertexId {
        let edge = &self.edges[e.unoriented()];
        if e.is_forward() {
            edge.tail
        } else {
            edge.head
        }
    }

    /// `t(e)`.
    pub fn terminus(&self, e: EdgeId) -> VertexId {
        self.origin(e.reversal())
    }

    pub fn length(&self, e: EdgeId) -> &Rational {
        &self.edges[e.unoriented()].length
    }

    pub fn unoriented_length(&self, k: usize) -> &Rational {
        &self.edges[k].length
    }

    /// Lengths of all oriented edges as floats, indexed by edge id.
    pub fn lengths_f64(&self) -> Vec<f64> {
        self.edges()
            .map(|e| self.length(e).to_f64().expect("rational length converts to f64"))
            .collect()
    }

    /// Oriented edges leaving `x`, sorted by id. A loop contributes both orientations.
    pub fn outgoing(&self, x: VertexId) -> &[EdgeId] {
        &self.outgoing[x.0]
    }

    pub fn valency(&self, x: VertexId) -> usize {
        self.outgoing[x.0].len()
    }

    /// `k_x`, the valency minus one.
    pub fn k(&self, x: VertexId) -> usize {
        self.valency(x) - 1
    }

    pub fn l_max(&self) -> &Rational {
        self.edges.iter().map(|e| &e.length).max().expect("graph has edges")
    }

    pub fn l_min(&self) -> &Rational {
        self.edges.iter().map(|e| &e.length).min().expect("graph has edges")
    }

    /// Rank of the (free) fundamental group: `|E| - |V| + 1` over unoriented edges.
    pub fn free_rank(&self) -> usize {
        self.edges.len() + 1 - self.vertex_names.len()
    }

    /// Sum of the lengths of the unoriented edges.
    pub fn volume(&self) -> Rational {
        self.edges.iter().fold(Rational::zero(), |acc, e| acc + &e.length)
    }

    /// Rescales so that the volume is exactly one.
    pub fn normalize(&self) -> MetricGraph {
        let vol = self.volume();
        let mut g = self.clone();
        for e in &mut g.edges {
            e.length = &e.length / &vol;
        }
        g
    }

    /// Multiplies every length by `alpha`.
    pub fn scale_metric(&self, alpha: &Rational) -> Result<MetricGraph, GraphError> {
        if !alpha.is_positive() {
            return Err(GraphError::NonPositiveScale(alpha.to_string()));
        }
        let mut g = self.clone();
        for e in &mut g.edges {
            e.length = &e.length * alpha;
        }
        Ok(g)
    }

    /// Same combinatorics with new exact lengths, one per unoriented edge.
    pub fn with_lengths(&self, lengths: Vec<Rational>) -> Result<MetricGraph, GraphError> {
        if lengths.len() != self.edges.len() {
            return Err(GraphError::LengthCount { expected: self.edges.len(), got: lengths.len() });
        }
        let mut g = self.clone();
        for (e, l) in g.edges.iter_mut().zip(lengths) {
            if !l.is_positive() {
                return Err(GraphError::NonPositiveLength { edge: e.name.clone(), length: l.to_string() });
            }
            e.length = l;
        }
        Ok(g)
    }

    /// Same combinatorics with float lengths, one per unoriented edge. Each
    /// float is converted to the rational it represents exactly.
    pub fn with_lengths_f64(&self, lengths: &[f64]) -> Result<MetricGraph, GraphError> {
        if lengths.len() != self.edges.len() {
            return Err(GraphError::LengthCount { expected: self.edges.len(), got: lengths.len() });
        }
        let exact = lengths
            .iter()
            .zip(&self.edges)
            .map(|(&l, e)| {
                if l.is_finite() && l > 0.0 {
                    Rational::from_float(l).ok_or(GraphError::InvalidFloatLength(l, e.name.clone()))
                } else {
                    Err(GraphError::InvalidFloatLength(l, e.name.clone()))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.with_lengths(exact)
    }

    /// Checks the standing hypotheses of the entropy operations.
    pub fn validate_entropy_hypotheses(&self) -> HypothesisReport {
        let components = self.components();
        let connected = if components.len() == 1 {
            Check::pass()
        } else {
            Check::fail(
                components
                    .iter()
                    .map(|c| {
                        let names: Vec<_> = c.iter().map(|v| self.vertex_names[v.0].as_str()).collect();
                        format!("{{{}}}", names.join(", "))
                    })
                    .collect(),
            )
        };
        let terminal: Vec<String> = self
            .vertices()
            .filter(|&x| self.valency(x) == 1)
            .map(|x| self.vertex_names[x.0].clone())
            .collect();
        let no_terminal = if terminal.is_empty() { Check::pass() } else { Check::fail(terminal) };
        let not_cycle = if self.vertices().any(|x| self.valency(x) >= 3) {
            Check::pass()
        } else if self.vertices().all(|x| self.valency(x) == 2) {
            Check::fail(vec!["graph is a cycle".to_string()])
        } else {
            Check::fail(vec!["no vertex of valency at least 3".to_string()])
        };
        HypothesisReport { connected, no_terminal, not_cycle }
    }

    /// Replaces every maximal chain through valency-2 vertices by a single
    /// edge carrying the total length of the chain.
    pub fn series_reduce(&self) -> Result<(MetricGraph, ChainMap), GraphError> {
        let report = self.validate_entropy_hypotheses();
        if !report.no_terminal.passed {
            return Err(GraphError::TerminalVertices(report.no_terminal.witness));
        }
        if !report.not_cycle.passed {
            return Err(GraphError::Cycle);
        }
        let branch: Vec<VertexId> = self.vertices().filter(|&x| self.valency(x) >= 3).collect();
        let mut new_index = vec![None; self.vertex_count()];
        for (i, x) in branch.iter().enumerate() {
            new_index[x.0] = Some(VertexId(i));
        }
        let mut used = vec![false; self.edge_count()];
        let mut chains = Vec::new();
        let mut new_edges = Vec::new();
        for e in self.edges() {
            if used[e.0] || new_index[self.origin(e).0].is_none() {
                continue;
            }
            let mut chain = vec![e];
            let mut current = e;
            loop {
                used[current.0] = true;
                used[current.reversal().0] = true;
                let t = self.terminus(current);
                if new_index[t.0].is_some() {
                    break;
                }
                let next = *self
                    .outgoing(t)
                    .iter()
                    .find(|&&f| f != current.reversal())
                    .expect("valency-2 vertex has a continuation");
                chain.push(next);
                current = next;
            }
            let length = chain.iter().fold(Rational::zero(), |acc, &c| acc + self.length(c));
            let name = chain.iter().map(|&c| self.edge_label(c)).collect::<Vec<_>>().join("+");
            let tail = new_index[self.origin(e).0].expect("chain starts at a branch vertex");
            let head = new_index[self.terminus(current).0].expect("chain ends at a branch vertex");
            new_edges.push((name, tail, head, length));
            chains.push(chain);
        }
        // Chains of length one keep their original name.
        for (spec, chain) in new_edges.iter_mut().zip(&chains) {
            if chain.len() == 1 {
                spec.0 = self.edges[chain[0].unoriented()].name.clone();
            }
        }
        let names = branch.iter().map(|x| self.vertex_names[x.0].clone()).collect();
        let reduced = MetricGraph::from_parts(names, new_edges)?;
        Ok((reduced, ChainMap { chains }))
    }

    /// Connected components, each sorted, in order of their smallest vertex.
    fn components(&self) -> Vec<Vec<VertexId>> {
        let n = self.vertex_count();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![VertexId(start)];
            let mut stack = vec![start];
            comp[start] = id;
            while let Some(x) = stack.pop() {
                for &e in &self.outgoing[x] {
                    let y = self.terminus(e).0;
                    if comp[y] == usize::MAX {
                        comp[y] = id;
                        members.push(VertexId(y));
                        stack.push(y);
                    }
                }
            }
            members.sort();
            out.push(members);
        }
        out
    }
}

/// Builds a graph from its textual description.
pub fn build_graph(doc: &GraphDocument) -> Result<MetricGraph, GraphError> {
    MetricGraph::from_document(doc)
}

/// `1 / 1` as a rational; handy for unit-length constructions.
pub fn one() -> Rational {
    Rational::one()
}
