//! Finite graphs of finite groups: degrees, weighted volume, volume entropy of
//! the Bass–Serre tree, the closed-form minimum, and n-sheeted coverings.
//!
//! Only group orders enter: `|G_x|` per vertex and `|G_e|` per unoriented edge.
//! A vertex of degree `Σ_{i(e)=x} |G_x|/|G_e|` in the graph of groups lifts to
//! tree vertices of that valency.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::config::{CheckConfig, SolverConfig};
use crate::entropy::{self, EntropyError, EntropySolution};
use crate::format::{CoverDocument, GraphDocument, GroupsSpec};
use crate::graph::{one, EdgeId, GraphError, MetricGraph, Rational, VertexId};
use crate::spectral::{ContinuationMatrix, SpectralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GogError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error("unknown {kind} `{name}` in group orders")]
    UnknownName { kind: &'static str, name: String },
    #[error("{kind} `{name}` has group order 0")]
    ZeroOrder { kind: &'static str, name: String },
    #[error("edge `{edge}` group order {edge_order} does not divide order {vertex_order} of endpoint `{vertex}`")]
    NotEmbedded { edge: String, edge_order: u64, vertex: String, vertex_order: u64 },
    #[error("lengths are required but the graph of groups has none")]
    MissingLengths,
    #[error("wrong number of lengths: expected {expected}, got {got}")]
    LengthCount { expected: usize, got: usize },
    #[error("vertex `{vertex}` has degree {degree}; at least {required} is required")]
    LowDegree { vertex: String, degree: u64, required: u64 },
    #[error("every degree is 2; the Bass–Serre tree is a line with zero entropy")]
    LinearTree,
    #[error("continuation matrix is reducible ({components} strongly connected components)")]
    Reducible { components: usize },
    #[error("covering map: {0}")]
    CoverInput(String),
    #[error("not a covering: {0}")]
    InvalidCover(CoverViolation),
}

fn frac(num: u64, den: u64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphOfGroups {
    /// Underlying graph. Without lengths every edge carries a placeholder length 1.
    pub graph: MetricGraph,
    /// `|G_x|` by vertex id.
    pub vertex_order: Vec<u64>,
    /// `|G_e|` by unoriented edge index.
    pub edge_order: Vec<u64>,
    pub has_lengths: bool,
}

impl GraphOfGroups {
    pub fn new(graph: MetricGraph, vertex_order: Vec<u64>, edge_order: Vec<u64>) -> Result<Self, GogError> {
        Self::with_flag(graph, vertex_order, edge_order, true)
    }

    /// All groups trivial.
    pub fn trivial(graph: MetricGraph) -> Self {
        let (n, m) = (graph.vertex_count(), graph.unoriented_edge_count());
        GraphOfGroups { graph, vertex_order: vec![1; n], edge_order: vec![1; m], has_lengths: true }
    }

    fn with_flag(
        graph: MetricGraph,
        vertex_order: Vec<u64>,
        edge_order: Vec<u64>,
        has_lengths: bool,
    ) -> Result<Self, GogError> {
        assert_eq!(vertex_order.len(), graph.vertex_count(), "one order per vertex");
        assert_eq!(edge_order.len(), graph.unoriented_edge_count(), "one order per edge");
        for x in graph.vertices() {
            if vertex_order[x.0] == 0 {
                return Err(GogError::ZeroOrder { kind: "vertex", name: graph.vertex_name(x).to_string() });
            }
        }
        for k in 0..graph.unoriented_edge_count() {
            let order = edge_order[k];
            if order == 0 {
                return Err(GogError::ZeroOrder { kind: "edge", name: graph.edge_name(k).to_string() });
            }
            let e = EdgeId::forward(k);
            for x in [graph.origin(e), graph.terminus(e)] {
                if vertex_order[x.0] % order != 0 {
                    return Err(GogError::NotEmbedded {
                        edge: graph.edge_name(k).to_string(),
                        edge_order: order,
                        vertex: graph.vertex_name(x).to_string(),
                        vertex_order: vertex_order[x.0],
                    });
                }
            }
        }
        Ok(GraphOfGroups { graph, vertex_order, edge_order, has_lengths })
    }

    /// Builds from a graph document. Lengths are optional but must be given on
    /// all edges or none; orders missing from the `groups` block are 1.
    pub fn from_document(doc: &GraphDocument) -> Result<Self, GogError> {
        let with_length = doc.edges.iter().filter(|e| e.length.is_some()).count();
        let has_lengths = with_length == doc.edges.len();
        let graph = if with_length == 0 {
            MetricGraph::from_document_with_default(doc, Some(&one()))?
        } else {
            MetricGraph::from_document(doc)?
        };
        let groups = doc.groups.clone().unwrap_or_default();
        let mut vertex_order = vec![1; graph.vertex_count()];
        for (name, &order) in &groups.vertex_orders {
            let x = graph
                .vertex_by_name(name)
                .ok_or_else(|| GogError::UnknownName { kind: "vertex", name: name.clone() })?;
            vertex_order[x.0] = order;
        }
        let index: HashMap<&str, usize> =
            (0..graph.unoriented_edge_count()).map(|k| (graph.edge_name(k), k)).collect();
        let mut edge_order = vec![1; graph.unoriented_edge_count()];
        for (name, &order) in &groups.edge_orders {
            let k = *index.get(name.as_str()).ok_or_else(|| GogError::UnknownName { kind: "edge", name: name.clone() })?;
            edge_order[k] = order;
        }
        Self::with_flag(graph, vertex_order, edge_order, has_lengths)
    }

    /// Canonical description including the `groups` block.
    pub fn to_document(&self) -> GraphDocument {
        let mut doc = self.graph.to_document();
        if !self.has_lengths {
            doc.edges.iter_mut().for_each(|e| e.length = None);
        }
        doc.groups = Some(GroupsSpec {
            vertex_orders: self
                .graph
                .vertices()
                .map(|x| (self.graph.vertex_name(x).to_string(), self.vertex_order[x.0]))
                .collect(),
            edge_orders: (0..self.graph.unoriented_edge_count())
                .map(|k| (self.graph.edge_name(k).to_string(), self.edge_order[k]))
                .collect::<BTreeMap<_, _>>(),
        });
        doc
    }

    /// Same groups with new lengths on the unoriented edges.
    pub fn with_lengths(&self, lengths: Vec<Rational>) -> Result<Self, GogError> {
        let graph = self.graph.with_lengths(lengths)?;
        Ok(GraphOfGroups { graph, has_lengths: true, ..self.clone() })
    }

    pub fn with_lengths_f64(&self, lengths: &[f64]) -> Result<Self, GogError> {
        let graph = self.graph.with_lengths_f64(lengths)?;
        Ok(GraphOfGroups { graph, has_lengths: true, ..self.clone() })
    }

    pub fn vertex_group(&self, x: VertexId) -> u64 {
        self.vertex_order[x.0]
    }

    pub fn edge_group(&self, e: EdgeId) -> u64 {
        self.edge_order[e.unoriented()]
    }

    /// `k_x + 1 = Σ_{i(e)=x} |G_x| / |G_e|`.
    pub fn degree(&self, x: VertexId) -> u64 {
        self.graph.outgoing(x).iter().map(|&e| self.vertex_group(x) / self.edge_group(e)).sum()
    }

    fn require_lengths(&self) -> Result<(), GogError> {
        if self.has_lengths {
            Ok(())
        } else {
            Err(GogError::MissingLengths)
        }
    }

    fn require_degree(&self, required: u64) -> Result<(), GogError> {
        match self.graph.vertices().find(|&x| self.degree(x) < required) {
            Some(x) => Err(GogError::LowDegree {
                vertex: self.graph.vertex_name(x).to_string(),
                degree: self.degree(x),
                required,
            }),
            None => Ok(()),
        }
    }

    /// `m_ef`: lifts of `f` that continue a lift of `e` without backtracking.
    pub fn continuation_matrix(&self) -> ContinuationMatrix {
        let g = &self.graph;
        let rows = g
            .edges()
            .map(|e| {
                let y = g.terminus(e);
                let gy = self.vertex_group(y);
                g.outgoing(y)
                    .iter()
                    .map(|&f| {
                        let lifts = gy / self.edge_group(f);
                        let m = if f == e.reversal() { lifts - 1 } else { lifts };
                        (f, m as f64)
                    })
                    .collect()
            })
            .collect();
        ContinuationMatrix::from_rows(rows)
    }
}

/// `½ Σ_{e ∈ EX} ℓ(e) / |G_e|` over oriented edges.
pub fn gog_volume(gog: &GraphOfGroups) -> Result<Rational, GogError> {
    gog.require_lengths()?;
    Ok((0..gog.graph.unoriented_edge_count())
        .map(|k| gog.graph.unoriented_length(k) / Rational::from_integer(BigInt::from(gog.edge_order[k])))
        .fold(Rational::zero(), |acc, v| acc + v))
}

/// Volume entropy of the Bass–Serre tree with the lifted metric.
pub fn gog_entropy(gog: &GraphOfGroups, config: &SolverConfig) -> Result<EntropySolution, GogError> {
    gog.require_lengths()?;
    gog.require_degree(2)?;
    if gog.graph.vertices().all(|x| gog.degree(x) == 2) {
        return Err(GogError::LinearTree);
    }
    let counts = gog.continuation_matrix();
    let components = counts.components();
    if components.len() != 1 {
        return Err(GogError::Reducible { components: components.len() });
    }
    entropy::solve_unit_radius(&counts, &gog.graph.lengths_f64(), config)
        .map_err(|e| match e {
            EntropyError::Spectral(SpectralError::Reducible { components }) => GogError::Reducible { components },
            other => GogError::Entropy(other),
        })
}

fn log_weights(gog: &GraphOfGroups) -> Vec<f64> {
    gog.graph.vertices().map(|x| ((gog.degree(x) - 1) as f64).ln()).collect()
}

/// `½ Σ_x (k_x + 1) log k_x / |G_x|`. Lengths are ignored.
pub fn gog_minimal_entropy(gog: &GraphOfGroups) -> Result<f64, GogError> {
    gog.require_degree(3)?;
    let logs = log_weights(gog);
    Ok(0.5
        * gog
            .graph
            .vertices()
            .map(|x| gog.degree(x) as f64 * logs[x.0] / gog.vertex_group(x) as f64)
            .sum::<f64>())
}

#[derive(Clone, Debug, PartialEq)]
pub struct GogMinimalMetric {
    pub h_min: f64,
    /// `c · log(k_{i(e)} k_{t(e)})` by unoriented edge, with weighted volume one.
    pub lengths: Vec<f64>,
    /// `gog_entropy` evaluated at `lengths`.
    pub solver_h: f64,
    pub residual: f64,
}

/// The unique entropy-minimizing metric of weighted volume one.
pub fn gog_minimal_metric(gog: &GraphOfGroups, config: &SolverConfig) -> Result<GogMinimalMetric, GogError> {
    let h_min = gog_minimal_entropy(gog)?;
    let logs = log_weights(gog);
    let g = &gog.graph;
    let raw: Vec<f64> = (0..g.unoriented_edge_count())
        .map(|k| {
            let e = EdgeId::forward(k);
            logs[g.origin(e).0] + logs[g.terminus(e).0]
        })
        .collect();
    let weighted: f64 = raw.iter().zip(&gog.edge_order).map(|(l, &o)| l / o as f64).sum();
    let lengths: Vec<f64> = raw.iter().map(|l| l / weighted).collect();
    let solution = gog_entropy(&gog.with_lengths_f64(&lengths)?, config)?;
    Ok(GogMinimalMetric { h_min, lengths, solver_h: solution.h, residual: solution.residual })
}

/// Order-level morphism `(Y, H_•) → (X, G_•)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoveringMap {
    pub source: GraphOfGroups,
    pub target: GraphOfGroups,
    /// Image of each source vertex, by vertex id.
    pub vertex_map: Vec<VertexId>,
    /// Image of each oriented source edge, by edge id.
    pub edge_map: Vec<EdgeId>,
    /// Sheet count stated in the input, if any.
    pub declared_sheets: Option<u64>,
}

impl CoveringMap {
    pub fn new(
        source: GraphOfGroups,
        target: GraphOfGroups,
        vertex_map: Vec<VertexId>,
        edge_map: Vec<EdgeId>,
    ) -> Self {
        assert_eq!(vertex_map.len(), source.graph.vertex_count(), "one image per source vertex");
        assert_eq!(edge_map.len(), source.graph.edge_count(), "one image per oriented source edge");
        CoveringMap { source, target, vertex_map, edge_map, declared_sheets: None }
    }

    pub fn from_document(doc: &CoverDocument) -> Result<Self, GogError> {
        let source = GraphOfGroups::from_document(&doc.source)?;
        let target = GraphOfGroups::from_document(&doc.target)?;
        let (y, x) = (&source.graph, &target.graph);
        let input = |msg: String| GogError::CoverInput(msg);

        for name in doc.vmap.keys() {
            y.vertex_by_name(name).ok_or_else(|| input(format!("vmap names unknown source vertex `{name}`")))?;
        }
        let vertex_map = y
            .vertices()
            .map(|v| {
                let name = y.vertex_name(v);
                let image = doc.vmap.get(name).ok_or_else(|| input(format!("vmap misses source vertex `{name}`")))?;
                x.vertex_by_name(image).ok_or_else(|| input(format!("vmap sends `{name}` to unknown vertex `{image}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;

        let index: HashMap<&str, usize> = (0..y.unoriented_edge_count()).map(|k| (y.edge_name(k), k)).collect();
        for name in doc.emap.keys() {
            if !index.contains_key(name.as_str()) {
                return Err(input(format!("emap names unknown source edge `{name}`")));
            }
        }
        let mut edge_map = vec![EdgeId(0); y.edge_count()];
        for k in 0..y.unoriented_edge_count() {
            let name = y.edge_name(k);
            let label = doc.emap.get(name).ok_or_else(|| input(format!("emap misses source edge `{name}`")))?;
            let image =
                x.edge_by_label(label).ok_or_else(|| input(format!("emap sends `{name}` to unknown edge `{label}`")))?;
            edge_map[2 * k] = image;
            edge_map[2 * k + 1] = image.reversal();
        }
        Ok(CoveringMap { source, target, vertex_map, edge_map, declared_sheets: doc.sheets })
    }
}

/// First failed covering condition, with the objects that witness it.
#[derive(Clone, Debug, PartialEq)]
pub enum CoverViolation {
    Reversal { edge: String },
    Endpoint { edge: String },
    Local { vertex: String, edge: String, lhs: String, rhs: String },
    NonIntegerSheets { at: String, value: String },
    SheetsDiffer { first: String, first_value: String, at: String, value: String },
    Declared { declared: u64, computed: u64 },
}

impl fmt::Display for CoverViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoverViolation::Reversal { edge } => write!(f, "image of reversed edge `{edge}` is not the reversed image"),
            CoverViolation::Endpoint { edge } => write!(f, "image of edge `{edge}` does not start at the image of its origin"),
            CoverViolation::Local { vertex, edge, lhs, rhs } => {
                write!(f, "local condition fails at vertex `{vertex}` over edge `{edge}`: {lhs} != {rhs}")
            }
            CoverViolation::NonIntegerSheets { at, value } => write!(f, "fiber sum over `{at}` is {value}, not a positive integer"),
            CoverViolation::SheetsDiffer { first, first_value, at, value } => {
                write!(f, "fiber sums differ: {first_value} over `{first}` but {value} over `{at}`")
            }
            CoverViolation::Declared { declared, computed } => {
                write!(f, "declared {declared} sheets but fibers give {computed}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoveringReport {
    /// Sheet count `n`, present when the map is a covering.
    pub sheets: Option<u64>,
    pub violation: Option<CoverViolation>,
}

impl CoveringReport {
    pub fn valid(&self) -> bool {
        self.violation.is_none()
    }
}

/// Checks every order-level covering condition and the sheet count.
pub fn check_covering(cover: &CoveringMap) -> CoveringReport {
    match covering_sheets(cover) {
        Ok(n) => CoveringReport { sheets: Some(n), violation: None },
        Err(v) => CoveringReport { sheets: None, violation: Some(v) },
    }
}

fn covering_sheets(cover: &CoveringMap) -> Result<u64, CoverViolation> {
    let (src, tgt) = (&cover.source, &cover.target);
    let (y, x) = (&src.graph, &tgt.graph);
    for f in y.edges() {
        let label = || y.edge_label(f);
        if cover.edge_map[f.reversal().0] != cover.edge_map[f.0].reversal() {
            return Err(CoverViolation::Reversal { edge: label() });
        }
        if x.origin(cover.edge_map[f.0]) != cover.vertex_map[y.origin(f).0] {
            return Err(CoverViolation::Endpoint { edge: label() });
        }
    }

    for v in y.vertices() {
        let hv = src.vertex_group(v);
        let xv = cover.vertex_map[v.0];
        for &e in x.outgoing(xv) {
            let lhs = y
                .outgoing(v)
                .iter()
                .filter(|&&f| cover.edge_map[f.0] == e)
                .fold(Rational::zero(), |acc, &f| acc + frac(hv, src.edge_group(f)));
            let rhs = frac(tgt.vertex_group(xv), tgt.edge_group(e));
            if lhs != rhs {
                return Err(CoverViolation::Local {
                    vertex: y.vertex_name(v).to_string(),
                    edge: x.edge_label(e),
                    lhs: lhs.to_string(),
                    rhs: rhs.to_string(),
                });
            }
        }
    }

    let mut sums: Vec<(String, Rational)> = Vec::new();
    for xv in x.vertices() {
        let n = y
            .vertices()
            .filter(|v| cover.vertex_map[v.0] == xv)
            .fold(Rational::zero(), |acc, v| acc + frac(tgt.vertex_group(xv), src.vertex_group(v)));
        sums.push((x.vertex_name(xv).to_string(), n));
    }
    for e in x.edges() {
        let n = y
            .edges()
            .filter(|f| cover.edge_map[f.0] == e)
            .fold(Rational::zero(), |acc, f| acc + frac(tgt.edge_group(e), src.edge_group(f)));
        sums.push((x.edge_label(e), n));
    }
    let (first, first_value) = &sums[0];
    for (at, value) in &sums {
        if !value.is_integer() || value.is_zero() {
            return Err(CoverViolation::NonIntegerSheets { at: at.clone(), value: value.to_string() });
        }
        if value != first_value {
            return Err(CoverViolation::SheetsDiffer {
                first: first.clone(),
                first_value: first_value.to_string(),
                at: at.clone(),
                value: value.to_string(),
            });
        }
    }
    let n = first_value.to_integer().to_u64().expect("sheet count fits in u64");
    match cover.declared_sheets {
        Some(declared) if declared != n => Err(CoverViolation::Declared { declared, computed: n }),
        _ => Ok(n),
    }
}

/// Both sides of `h(Y,d)·vol(Y,d) ≥ n · h_min(X)` and the equality case.
#[derive(Clone, Debug, PartialEq)]
pub struct CoveringInequality {
    pub sheets: u64,
    /// `h_vol(Y, H_•, d) · vol(Y, H_•, d)`.
    pub lhs: f64,
    /// `n · h_min(X, G_•)`, the minimizer having volume one.
    pub rhs: f64,
    pub gap: f64,
    pub source_entropy: f64,
    pub source_volume: f64,
    /// Mean of `ℓ_Y(f) / ℓ_0(φ(f))` over source edges.
    pub lambda: f64,
    /// `(max − min) / mean` of those ratios.
    pub ratio_spread: f64,
    /// Gap below the equality threshold and lengths proportional to the lifted minimizer.
    pub equality: bool,
}

pub fn covering_inequality(
    cover: &CoveringMap,
    lengths: &[Rational],
    solver: &SolverConfig,
    check: &CheckConfig,
) -> Result<CoveringInequality, GogError> {
    let report = check_covering(cover);
    let sheets = match (report.sheets, report.violation) {
        (Some(n), None) => n,
        (_, Some(v)) => return Err(GogError::InvalidCover(v)),
        (None, None) => unreachable!("a report carries sheets or a violation"),
    };
    let expected = cover.source.graph.unoriented_edge_count();
    if lengths.len() != expected {
        return Err(GogError::LengthCount { expected, got: lengths.len() });
    }
    cover.source.require_degree(3)?;
    let source = cover.source.with_lengths(lengths.to_vec())?;
    let source_entropy = gog_entropy(&source, solver)?.h;
    let source_volume = gog_volume(&source)?.to_f64().expect("volume converts to f64");
    let minimal = gog_minimal_metric(&cover.target, solver)?;

    let lhs = source_entropy * source_volume;
    let rhs = sheets as f64 * minimal.h_min;
    let gap = lhs - rhs;

    let ratios: Vec<f64> = (0..expected)
        .map(|k| {
            let image = cover.edge_map[2 * k].unoriented();
            lengths[k].to_f64().expect("length converts to f64") / minimal.lengths[image]
        })
        .collect();
    let lambda = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    let ratio_spread = (hi - lo) / lambda;
    let equality = gap < check.equality_gap && ratio_spread <= check.proportionality;
    Ok(CoveringInequality {
        sheets,
        lhs,
        rhs,
        gap,
        source_entropy,
        source_volume,
        lambda,
        ratio_spread,
        equality,
    })
}
