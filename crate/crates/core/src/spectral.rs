//! Non-backtracking edge adjacency, irreducibility, and Perron roots.
//!
//! Matrices are indexed by oriented edge id and stored row-major in
//! compressed sparse rows, so every listing and every vector is reproducible
//! across runs.

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use thiserror::Error;

use crate::config::PowerIterationConfig;
use crate::graph::{EdgeId, MetricGraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("entropy hypotheses violated: {}", .0.join("; "))]
    Hypotheses(Vec<String>),
    #[error("irreducibility ({strongly_connected}) disagrees with the valency criterion ({branch_vertex})")]
    Inconsistent { strongly_connected: bool, branch_vertex: bool },
    #[error("matrix is reducible ({components} strongly connected components)")]
    Reducible { components: usize },
    #[error("h must be non-negative, got {0}")]
    NegativeH(f64),
    #[error("power iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("power iteration collapsed to the zero vector")]
    Degenerate,
}

/// The Boolean matrix `ρ_ef`: 1 when `t(e) = i(f)` and `f ≠ ē`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeAdjacency {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
}

impl EdgeAdjacency {
    pub fn order(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn successors(&self, e: EdgeId) -> impl Iterator<Item = EdgeId> + '_ {
        self.cols[self.row_ptr[e.0]..self.row_ptr[e.0 + 1]].iter().map(|&f| EdgeId(f))
    }

    pub fn contains(&self, e: EdgeId, f: EdgeId) -> bool {
        self.cols[self.row_ptr[e.0]..self.row_ptr[e.0 + 1]].binary_search(&f.0).is_ok()
    }

    pub fn row_sum(&self, e: EdgeId) -> usize {
        self.row_ptr[e.0 + 1] - self.row_ptr[e.0]
    }

    pub fn nonzeros(&self) -> usize {
        self.cols.len()
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        let n = self.order();
        let mut out = vec![vec![0u8; n]; n];
        for e in 0..n {
            for &f in &self.cols[self.row_ptr[e]..self.row_ptr[e + 1]] {
                out[e][f] = 1;
            }
        }
        out
    }

    /// The same pattern with unit multiplicities.
    pub fn continuation_counts(&self) -> ContinuationMatrix {
        ContinuationMatrix {
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            counts: vec![1.0; self.cols.len()],
        }
    }
}

/// Builds `ρ` for a graph.
pub fn edge_adjacency(g: &MetricGraph) -> EdgeAdjacency {
    let mut row_ptr = Vec::with_capacity(g.edge_count() + 1);
    let mut cols = Vec::new();
    row_ptr.push(0);
    for e in g.edges() {
        let back = e.reversal();
        cols.extend(g.outgoing(g.terminus(e)).iter().filter(|&&f| f != back).map(|f| f.0));
        row_ptr.push(cols.len());
    }
    EdgeAdjacency { row_ptr, cols }
}

/// Nonnegative matrix of continuation counts `m_ef` over oriented edges:
/// how many edges lifting `f` can follow a lift of `e` without backtracking
/// in the universal covering tree. For a plain graph this is `ρ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuationMatrix {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    counts: Vec<f64>,
}

impl ContinuationMatrix {
    /// Builds from rows of `(f, m_ef)`; zero entries are dropped.
    pub fn from_rows(rows: Vec<Vec<(EdgeId, f64)>>) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut counts = Vec::new();
        for mut row in rows {
            row.sort_by_key(|&(f, _)| f);
            for (f, m) in row {
                assert!(m >= 0.0, "continuation counts are nonnegative");
                if m > 0.0 {
                    cols.push(f.0);
                    counts.push(m);
                }
            }
            row_ptr.push(cols.len());
        }
        ContinuationMatrix { row_ptr, cols, counts }
    }

    pub fn order(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn row(&self, e: EdgeId) -> impl Iterator<Item = (EdgeId, f64)> + '_ {
        let range = self.row_ptr[e.0]..self.row_ptr[e.0 + 1];
        self.cols[range.clone()].iter().zip(&self.counts[range]).map(|(&f, &m)| (EdgeId(f), m))
    }

    /// Strongly connected components of the support, each sorted, ordered by
    /// smallest member.
    pub fn components(&self) -> Vec<Vec<EdgeId>> {
        strongly_connected_components(self.order(), &self.row_ptr, &self.cols)
    }

    /// `M'(h)_ef = m_ef · e^{−h ℓ(f)}` with `lengths` indexed by edge id.
    pub fn weighted(&self, lengths: &[f64], h: f64) -> WeightedEdgeMatrix {
        assert_eq!(lengths.len(), self.order(), "one length per oriented edge");
        let decay: Vec<f64> = lengths.iter().map(|&l| (-h * l).exp()).collect();
        let values = self.cols.iter().zip(&self.counts).map(|(&f, &m)| m * decay[f]).collect();
        WeightedEdgeMatrix { h, row_ptr: self.row_ptr.clone(), cols: self.cols.clone(), values }
    }
}

fn strongly_connected_components(n: usize, row_ptr: &[usize], cols: &[usize]) -> Vec<Vec<EdgeId>> {
    let mut digraph = DiGraph::<(), ()>::with_capacity(n, cols.len());
    for _ in 0..n {
        digraph.add_node(());
    }
    for e in 0..n {
        for &f in &cols[row_ptr[e]..row_ptr[e + 1]] {
            digraph.add_edge(NodeIndex::new(e), NodeIndex::new(f), ());
        }
    }
    let mut components: Vec<Vec<EdgeId>> = tarjan_scc(&digraph)
        .into_iter()
        .map(|c| {
            let mut c: Vec<EdgeId> = c.into_iter().map(|i| EdgeId(i.index())).collect();
            c.sort();
            c
        })
        .collect();
    components.sort();
    components
}

/// Outcome of [`is_irreducible`]; `components` is the strongly connected
/// decomposition of the non-backtracking digraph on oriented edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Irreducibility {
    pub irreducible: bool,
    pub components: Vec<Vec<EdgeId>>,
}

/// Decides irreducibility of `ρ` by strong connectivity and cross-checks it
/// against the existence of a vertex of valency at least three.
pub fn is_irreducible(g: &MetricGraph) -> Result<Irreducibility, SpectralError> {
    let report = g.validate_entropy_hypotheses();
    if !report.connected.passed || !report.no_terminal.passed {
        return Err(SpectralError::Hypotheses(report.failures()));
    }
    let adjacency = edge_adjacency(g);
    let components = strongly_connected_components(adjacency.order(), &adjacency.row_ptr, &adjacency.cols);
    let irreducible = components.len() == 1;
    let branch_vertex = g.vertices().any(|x| g.valency(x) >= 3);
    if irreducible != branch_vertex {
        return Err(SpectralError::Inconsistent { strongly_connected: irreducible, branch_vertex });
    }
    Ok(Irreducibility { irreducible, components })
}

/// A nonnegative matrix over oriented edges, typically `A'(h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedEdgeMatrix {
    h: f64,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl WeightedEdgeMatrix {
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn order(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn get(&self, e: EdgeId, f: EdgeId) -> f64 {
        let range = self.row_ptr[e.0]..self.row_ptr[e.0 + 1];
        match self.cols[range.clone()].binary_search(&f.0) {
            Ok(i) => self.values[range.start + i],
            Err(_) => 0.0,
        }
    }

    /// Nonzero entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (EdgeId, EdgeId, f64)> + '_ {
        (0..self.order()).flat_map(move |e| {
            (self.row_ptr[e]..self.row_ptr[e + 1]).map(move |i| (EdgeId(e), EdgeId(self.cols[i]), self.values[i]))
        })
    }

    /// `y = M x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (e, out) in y.iter_mut().enumerate() {
            let range = self.row_ptr[e]..self.row_ptr[e + 1];
            *out = self.cols[range.clone()].iter().zip(&self.values[range]).map(|(&f, &v)| v * x[f]).sum();
        }
    }

    fn is_structurally_irreducible(&self) -> Result<(), SpectralError> {
        let components = strongly_connected_components(self.order(), &self.row_ptr, &self.cols).len();
        if components == 1 {
            Ok(())
        } else {
            Err(SpectralError::Reducible { components })
        }
    }
}

/// `A'(h)_ef = ρ_ef · e^{−h ℓ(f)}`.
pub fn weighted_matrix(g: &MetricGraph, h: f64) -> Result<WeightedEdgeMatrix, SpectralError> {
    if h.is_nan() || h < 0.0 {
        return Err(SpectralError::NegativeH(h));
    }
    Ok(edge_adjacency(g).continuation_counts().weighted(&g.lengths_f64(), h))
}

/// How a Perron pair was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerronMethod {
    Power,
    /// Power iteration on `M + σI`.
    ShiftedPower,
    /// Inverse iteration with Collatz–Wielandt shifts, after power iteration stalled twice.
    Noda,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerronResult {
    pub radius: f64,
    /// Positive eigenvector, max entry 1.
    pub vector: Vec<f64>,
    pub iterations: usize,
    /// `‖M x − λ x‖∞` at the returned pair.
    pub residual: f64,
    pub method: PerronMethod,
}

/// Perron root and vector of an irreducible nonnegative matrix.
pub fn spectral_radius(m: &WeightedEdgeMatrix, config: &PowerIterationConfig) -> Result<PerronResult, SpectralError> {
    spectral_radius_from(m, None, config)
}

fn max_normalized(v: &mut [f64]) -> Result<(), SpectralError> {
    let top = v.iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 || !top.is_finite() {
        return Err(SpectralError::Degenerate);
    }
    v.iter_mut().for_each(|x| *x /= top);
    Ok(())
}

fn rayleigh_and_residual(x: &[f64], y: &[f64]) -> (f64, f64) {
    let xx: f64 = x.iter().map(|v| v * v).sum();
    let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let estimate = xy / xx;
    let residual = x.iter().zip(y).map(|(a, b)| (b - estimate * a).abs()).fold(0.0, f64::max);
    (estimate, residual)
}

/// Power iteration from the all-ones vector, or from `start` when given.
///
/// The dominant eigenvalue of an irreducible matrix is simple but other
/// eigenvalues may share its modulus when the matrix is periodic. When the
/// residual stops shrinking the iteration switches to `M + σI` with `σ` the
/// current estimate of `λ`; the Perron root `λ + σ` is then strictly dominant.
/// If that stalls as well, which happens when a second eigenvalue nearly
/// matches `λ` in modulus, the pair is finished by Noda iteration.
pub fn spectral_radius_from(
    m: &WeightedEdgeMatrix,
    start: Option<&[f64]>,
    config: &PowerIterationConfig,
) -> Result<PerronResult, SpectralError> {
    m.is_structurally_irreducible()?;
    let n = m.order();
    let mut x = match start {
        Some(s) if s.len() == n && s.iter().all(|&v| v > 0.0 && v.is_finite()) => {
            let mut x = s.to_vec();
            max_normalized(&mut x)?;
            x
        }
        _ => vec![1.0; n],
    };
    let mut y = vec![0.0; n];
    let mut shift = 0.0;
    let mut previous = f64::NAN;
    let mut residuals = std::collections::VecDeque::with_capacity(config.stall_window + 1);
    let mut residual = f64::INFINITY;
    for iteration in 1..=config.max_iterations {
        m.apply(&x, &mut y);
        let (estimate, r) = rayleigh_and_residual(&x, &y);
        residual = r;
        let settled = (estimate - previous).abs() <= config.relative_tolerance * estimate.abs();
        if settled && residual <= config.residual_tolerance * estimate.max(1.0) {
            let method = if shift > 0.0 { PerronMethod::ShiftedPower } else { PerronMethod::Power };
            return Ok(PerronResult { radius: estimate, vector: x, iterations: iteration, residual, method });
        }
        previous = estimate;

        residuals.push_back(residual);
        if residuals.len() > config.stall_window {
            let old = residuals.pop_front().expect("window is non-empty");
            if residual > 0.5 * old {
                if shift > 0.0 || estimate <= 0.0 {
                    return noda_iteration(m, x, iteration, config);
                }
                shift = estimate;
                residuals.clear();
            }
        }

        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi += shift * xi;
        }
        max_normalized(&mut y)?;
        std::mem::swap(&mut x, &mut y);
    }
    Err(SpectralError::NonConvergence { iterations: config.max_iterations, residual })
}

/// Noda iteration in the coordinates of the current iterate.
///
/// With `D = diag(x)` the matrix `B = D⁻¹ M D` has row sums
/// `(Mx)_i / x_i`, whose extremes bound `λ` from both sides. Each step solves
/// `(σI − B) z = 1` with `σ` the largest row sum and moves to `x ∘ z`. The
/// iteration stops when the two bounds meet.
fn noda_iteration(
    m: &WeightedEdgeMatrix,
    mut x: Vec<f64>,
    spent: usize,
    config: &PowerIterationConfig,
) -> Result<PerronResult, SpectralError> {
    let n = m.order();
    let mut mx = vec![0.0; n];
    let finish = |x: Vec<f64>, mx: &mut Vec<f64>, iterations: usize| {
        m.apply(&x, mx);
        let (estimate, residual) = rayleigh_and_residual(&x, mx);
        if residual <= config.residual_tolerance * estimate.max(1.0) {
            Ok(PerronResult { radius: estimate, vector: x, iterations, residual, method: PerronMethod::Noda })
        } else {
            Err(SpectralError::NonConvergence { iterations, residual })
        }
    };
    for step in 1..=config.inverse_iterations {
        let mut b = nalgebra::DMatrix::<f64>::zeros(n, n);
        for (e, f, v) in m.entries() {
            b[(e.0, f.0)] = v * x[f.0] / x[e.0];
        }
        let sums: Vec<f64> = b.row_iter().map(|r| r.sum()).collect();
        let lo = sums.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = sums.iter().cloned().fold(0.0, f64::max);
        if hi - lo <= config.bound_tolerance * hi {
            return finish(x, &mut mx, spent + step);
        }
        let mut a = -b;
        for i in 0..n {
            a[(i, i)] += hi;
        }
        let z = a.lu().solve(&nalgebra::DVector::from_element(n, 1.0));
        match z {
            Some(z) if z.iter().all(|v| v.is_finite() && *v > 0.0) => {
                x.iter_mut().zip(z.iter()).for_each(|(xi, zi)| *xi *= zi);
                max_normalized(&mut x)?;
            }
            // σ has reached λ to working precision.
            _ => return finish(x, &mut mx, spent + step),
        }
    }
    finish(x, &mut mx, spent + config.inverse_iterations)
}
