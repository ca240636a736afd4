//! Closed-form minimal volume entropy and the unique entropy-minimizing
//! normalized metric of a graph whose valencies are all at least three.
//!
//! With `k_x = valency(x) − 1`, the minimum over volume-one metrics is
//! `h_min = ½ Σ_x (k_x + 1) log k_x`, attained exactly by
//! `ℓ(e) = log(k_{i(e)} k_{t(e)}) / Σ_x (k_x + 1) log k_x`.

use std::collections::{BTreeSet, VecDeque};

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;
use thiserror::Error;

use crate::config::{SamplingConfig, SolverConfig};
use crate::entropy::{self, EntropyError};
use crate::graph::{ratio, ChainMap, EdgeId, GraphError, MetricGraph, Rational, VertexId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("vertex `{vertex}` has valency {valency}; every valency must be at least 3")]
    LowValency { vertex: String, valency: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error("invalid biregular parameters: {0}")]
    InvalidParameters(String),
    #[error("vertex `{vertex}` has valency {valency}; splitting needs at least 4")]
    SplitValency { vertex: String, valency: usize },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("free rank must be at least 2, got {0}")]
    RankTooSmall(usize),
    #[error("edge ratio rule is inconsistent around edge {0}")]
    InconsistentRatios(EdgeId),
}

/// Which parts of a minimizing metric are uniquely determined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Canonical {
    /// Every edge length is unique.
    Unique,
    /// Only the total length of each chain of valency-2 vertices is unique;
    /// the split along a chain is a convention.
    ChainTotalsOnly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimalMetricResult {
    pub h_min: f64,
    /// Length of each unoriented edge; they sum to one.
    pub lengths: Vec<f64>,
    /// Positive solution `x_e` of the fixed-point system at the minimum, max entry 1.
    pub perron: Vec<f64>,
    /// `z_x = e^{−h ℓ(f)} x_f` for any `f` leaving `x`, on the scale of `perron`.
    pub z: Vec<f64>,
    /// Max residual of the fixed-point system at `(h_min, perron)`.
    pub residual: f64,
    pub canonical: Canonical,
}

fn require_branching(g: &MetricGraph) -> Result<(), OptimizerError> {
    match g.vertices().find(|&x| g.valency(x) < 3) {
        Some(x) => Err(OptimizerError::LowValency { vertex: g.vertex_name(x).to_string(), valency: g.valency(x) }),
        None => Ok(()),
    }
}

fn k_f64(g: &MetricGraph, x: VertexId) -> f64 {
    g.k(x) as f64
}

/// `½ Σ_x (k_x + 1) log k_x`. Lengths of `g` are ignored.
pub fn minimal_entropy(g: &MetricGraph) -> Result<f64, OptimizerError> {
    require_branching(g)?;
    Ok(0.5 * g.vertices().map(|x| (k_f64(g, x) + 1.0) * k_f64(g, x).ln()).sum::<f64>())
}

/// The unique entropy-minimizing normalized metric and its Perron data.
pub fn minimal_metric(g: &MetricGraph) -> Result<MinimalMetricResult, OptimizerError> {
    let h_min = minimal_entropy(g)?;
    let total: f64 = g.vertices().map(|x| (k_f64(g, x) + 1.0) * k_f64(g, x).ln()).sum();
    let lengths: Vec<f64> = (0..g.unoriented_edge_count())
        .map(|k| {
            let e = EdgeId::forward(k);
            (k_f64(g, g.origin(e)) * k_f64(g, g.terminus(e))).ln() / total
        })
        .collect();

    // y_e / y_f = sqrt(k_{t(e)} / k_{i(e)}) whenever i(f) = t(e); propagate
    // from one edge and check that every cycle closes up.
    let mut y = vec![f64::NAN; g.edge_count()];
    y[0] = 1.0;
    let mut queue = VecDeque::from([EdgeId(0)]);
    while let Some(e) = queue.pop_front() {
        let factor = (k_f64(g, g.origin(e)) / k_f64(g, g.terminus(e))).sqrt();
        for &f in g.outgoing(g.terminus(e)) {
            let candidate = y[e.0] * factor;
            if y[f.0].is_nan() {
                y[f.0] = candidate;
                queue.push_back(f);
            } else if (y[f.0] - candidate).abs() > 1e-12 * candidate {
                return Err(OptimizerError::InconsistentRatios(f));
            }
        }
    }
    let mut perron: Vec<f64> = g.edges().map(|e| (h_min * lengths[e.unoriented()]).exp() * y[e.0]).collect();
    let top = perron.iter().cloned().fold(0.0, f64::max);
    perron.iter_mut().for_each(|v| *v /= top);
    let z = g
        .vertices()
        .map(|x| {
            let f = g.outgoing(x)[0];
            (-h_min * lengths[f.unoriented()]).exp() * perron[f.0]
        })
        .collect();

    let minimal = g.with_lengths_f64(&lengths)?;
    let residual = entropy::verify_fixed_point(&minimal, h_min, &perron).max;
    Ok(MinimalMetricResult { h_min, lengths, perron, z, residual, canonical: Canonical::Unique })
}

/// Minimal metric of a graph that may have valency-2 vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedMinimum {
    /// The series-reduced graph the closed form was applied to.
    pub reduced: MetricGraph,
    pub chains: ChainMap,
    /// Minimal metric on `reduced`.
    pub metric: MinimalMetricResult,
    /// Lengths pulled back to the original unoriented edges, each chain's
    /// optimal total split evenly across its pieces.
    pub lengths: Vec<f64>,
    pub canonical: Canonical,
}

/// Series-reduces, minimizes on the reduction, and pulls the lengths back.
pub fn minimize_with_reduction(g: &MetricGraph) -> Result<ReducedMinimum, OptimizerError> {
    let (reduced, chains) = g.series_reduce()?;
    let metric = minimal_metric(&reduced)?;
    let mut lengths = vec![0.0; g.unoriented_edge_count()];
    for (k, chain) in chains.chains.iter().enumerate() {
        let piece = metric.lengths[k] / chain.len() as f64;
        for e in chain {
            lengths[e.unoriented()] = piece;
        }
    }
    let canonical = if chains.is_identity() { Canonical::Unique } else { Canonical::ChainTotalsOnly };
    Ok(ReducedMinimum { reduced, chains, metric, lengths, canonical })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiregularMinimum {
    pub h_min: f64,
    /// Common edge length `2 / |EX|`.
    pub length: Rational,
}

/// Minimal entropy `(|EX| / 4) log(k1 k2)` of a `(k1+1, k2+1)`-biregular graph
/// with `edge_count` oriented edges, attained when all lengths are equal.
pub fn biregular_minimum(k1: u64, k2: u64, edge_count: u64) -> Result<BiregularMinimum, OptimizerError> {
    let invalid = |msg: String| Err(OptimizerError::InvalidParameters(msg));
    if k1 < 2 || k2 < 2 {
        return invalid(format!("k1 = {k1}, k2 = {k2}; both must be at least 2"));
    }
    if edge_count == 0 || edge_count % 2 == 1 {
        return invalid(format!("|EX| = {edge_count} must be positive and even"));
    }
    if k1 == k2 {
        if edge_count % (k1 + 1) != 0 {
            return invalid(format!("{edge_count} oriented edges cannot form a {}-regular graph", k1 + 1));
        }
    } else {
        let unoriented = edge_count / 2;
        if unoriented % (k1 + 1) != 0 || unoriented % (k2 + 1) != 0 {
            return invalid(format!(
                "{unoriented} edges cannot join vertices of valency {} to vertices of valency {}",
                k1 + 1,
                k2 + 1
            ));
        }
    }
    Ok(BiregularMinimum {
        h_min: edge_count as f64 / 4.0 * ((k1 * k2) as f64).ln(),
        length: ratio(2, edge_count as i64),
    })
}

/// Replaces `x` by two vertices joined by a new unit-length edge: the
/// outgoing edges listed in `moved` leave from the new vertex, the rest stay
/// at `x`. Both sides must keep at least two of the original edges, so the
/// result has the same free rank and both new valencies are at least three.
pub fn split_vertex(g: &MetricGraph, x: VertexId, moved: &[EdgeId]) -> Result<MetricGraph, OptimizerError> {
    let valency = g.valency(x);
    if valency < 4 {
        return Err(OptimizerError::SplitValency { vertex: g.vertex_name(x).to_string(), valency });
    }
    let moved_set: BTreeSet<EdgeId> = moved.iter().copied().collect();
    if moved_set.len() != moved.len() {
        return Err(OptimizerError::InvalidPartition("repeated edge".into()));
    }
    if let Some(e) = moved.iter().find(|e| e.0 >= g.edge_count() || g.origin(**e) != x) {
        return Err(OptimizerError::InvalidPartition(format!("edge {e} does not leave `{}`", g.vertex_name(x))));
    }
    if moved.len() < 2 || valency - moved.len() < 2 {
        return Err(OptimizerError::InvalidPartition(format!(
            "sides of sizes {} and {}; both need at least 2",
            valency - moved.len(),
            moved.len()
        )));
    }

    let mut names: Vec<String> = g.vertices().map(|v| g.vertex_name(v).to_string()).collect();
    let mut new_name = format!("{}'", g.vertex_name(x));
    while names.contains(&new_name) {
        new_name.push('\'');
    }
    names.push(new_name);
    let y = VertexId(names.len() - 1);

    let mut edges = Vec::with_capacity(g.unoriented_edge_count() + 1);
    for k in 0..g.unoriented_edge_count() {
        let e = EdgeId::forward(k);
        let tail = if moved_set.contains(&e) { y } else { g.origin(e) };
        let head = if moved_set.contains(&e.reversal()) { y } else { g.terminus(e) };
        edges.push((g.edge_name(k).to_string(), tail, head, g.length(e).clone()));
    }
    let mut split_name = format!("split_{}", g.vertex_name(x));
    while edges.iter().any(|(n, ..)| n == &split_name) {
        split_name.push('\'');
    }
    edges.push((split_name, x, y, crate::graph::one()));
    Ok(MetricGraph::from_parts(names, edges)?)
}

/// `3 (r − 1) log 2`, the least minimal entropy over graphs without vertices
/// of valency one or two whose fundamental group is free of rank `r`.
pub fn min_entropy_free_rank(r: usize) -> Result<f64, OptimizerError> {
    if r < 2 {
        return Err(OptimizerError::RankTooSmall(r));
    }
    Ok(3.0 * (r - 1) as f64 * 2f64.ln())
}

/// Draws a normalized metric with unoriented lengths from a symmetric
/// Dirichlet distribution. Lengths are exact rationals summing to one.
pub fn dirichlet_metric<R: Rng>(g: &MetricGraph, rng: &mut R, concentration: f64) -> MetricGraph {
    let gamma = Gamma::new(concentration, 1.0).expect("concentration is positive");
    let raw: Vec<f64> =
        (0..g.unoriented_edge_count()).map(|_| rng.sample(gamma).max(f64::MIN_POSITIVE)).collect();
    g.with_lengths_f64(&raw).expect("gamma samples are positive").normalize()
}

/// Entropies of random normalized metrics compared with the closed-form minimum.
#[derive(Clone, Debug, PartialEq)]
pub struct MinimalitySample {
    pub h_min: f64,
    /// `h − h_min` for each sample.
    pub gaps: Vec<f64>,
}

impl MinimalitySample {
    pub fn min_gap(&self) -> f64 {
        self.gaps.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Solves the entropy of `sampling.samples` Dirichlet-random normalized
/// metrics. Sample `i` draws from its own ChaCha stream, so any subset can be
/// reproduced independently.
pub fn sample_minimality(
    g: &MetricGraph,
    sampling: &SamplingConfig,
    solver: &SolverConfig,
) -> Result<MinimalitySample, OptimizerError> {
    let h_min = minimal_entropy(g)?;
    let gaps = (0..sampling.samples)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
            rng.set_stream(i as u64);
            let metric = dirichlet_metric(g, &mut rng, sampling.concentration);
            debug_assert_eq!(metric.volume().to_f64(), Some(1.0));
            Ok(entropy::volume_entropy(&metric, solver)?.h - h_min)
        })
        .collect::<Result<Vec<_>, OptimizerError>>()?;
    Ok(MinimalitySample { h_min, gaps })
}
