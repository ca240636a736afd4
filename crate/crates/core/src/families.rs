//! Small named graphs used throughout the tests, the CLI examples and the
//! acceptance suite.

use crate::graph::{one, EdgeId, MetricGraph, Rational, VertexId};

fn names(n: usize, prefix: &str) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn build(vertices: Vec<String>, edges: Vec<(String, VertexId, VertexId, Rational)>) -> MetricGraph {
    MetricGraph::from_parts(vertices, edges).expect("family graphs are well formed")
}

/// Two vertices `a`, `b` joined by three parallel edges.
pub fn theta(lengths: [Rational; 3]) -> MetricGraph {
    let edges = lengths
        .into_iter()
        .enumerate()
        .map(|(k, l)| (format!("e{k}"), VertexId(0), VertexId(1), l))
        .collect();
    build(vec!["a".into(), "b".into()], edges)
}

pub fn theta_unit() -> MetricGraph {
    theta([one(), one(), one()])
}

/// Loop at `a`, bridge `a`–`b`, loop at `b`, in that edge order.
pub fn dumbbell(lengths: [Rational; 3]) -> MetricGraph {
    let [la, bridge, lb] = lengths;
    build(
        vec!["a".into(), "b".into()],
        vec![
            ("la".into(), VertexId(0), VertexId(0), la),
            ("bridge".into(), VertexId(0), VertexId(1), bridge),
            ("lb".into(), VertexId(1), VertexId(1), lb),
        ],
    )
}

pub fn cycle(n: usize, length: Rational) -> MetricGraph {
    let edges = (0..n)
        .map(|i| (format!("e{i}"), VertexId(i), VertexId((i + 1) % n), length.clone()))
        .collect();
    build(names(n, "v"), edges)
}

/// Complete graph on `n` vertices with every edge of the given length.
pub fn complete(n: usize, length: Rational) -> MetricGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((format!("e{i}{j}"), VertexId(i), VertexId(j), length.clone()));
        }
    }
    build(names(n, "v"), edges)
}

pub fn k4(length: Rational) -> MetricGraph {
    complete(4, length)
}

/// Complete bipartite graph with parts `u0..` and `w0..`.
pub fn complete_bipartite(m: usize, n: usize, length: Rational) -> MetricGraph {
    let mut vertices = names(m, "u");
    vertices.extend(names(n, "w"));
    let mut edges = Vec::new();
    for i in 0..m {
        for j in 0..n {
            edges.push((format!("u{i}w{j}"), VertexId(i), VertexId(m + j), length.clone()));
        }
    }
    build(vertices, edges)
}

/// Replaces unoriented edge `k` by a chain of edges with the given lengths,
/// introducing `pieces.len() - 1` new valency-2 vertices.
pub fn subdivide(g: &MetricGraph, k: usize, pieces: &[Rational]) -> MetricGraph {
    assert!(!pieces.is_empty(), "need at least one piece");
    let mut vertices: Vec<String> = g.vertices().map(|x| g.vertex_name(x).to_string()).collect();
    let mut edges = Vec::new();
    for j in 0..g.unoriented_edge_count() {
        let e = EdgeId::forward(j);
        let (tail, head) = (g.origin(e), g.terminus(e));
        if j != k {
            edges.push((g.edge_name(j).to_string(), tail, head, g.length(e).clone()));
            continue;
        }
        let mut prev = tail;
        for (p, length) in pieces.iter().enumerate() {
            let next = if p + 1 == pieces.len() {
                head
            } else {
                vertices.push(format!("{}.{}", g.edge_name(j), p + 1));
                VertexId(vertices.len() - 1)
            };
            edges.push((format!("{}.{}", g.edge_name(j), p), prev, next, length.clone()));
            prev = next;
        }
    }
    build(vertices, edges)
}

/// Connected double cover of the theta graph, with its covering data.
///
/// Returns the cover `Y`, the vertex map `VY -> VX` and the image in `X` of
/// each oriented edge of `Y`. `X` is [`theta`] and every edge of `Y` has the
/// given length.
pub fn theta_double_cover(length: Rational) -> (MetricGraph, Vec<VertexId>, Vec<EdgeId>) {
    // a1 a2 over a, b1 b2 over b. Edge e0 lifts to the straight matching,
    // e1 to the crossed one, e2 to the straight one again.
    let vertices = vec!["a1".into(), "a2".into(), "b1".into(), "b2".into()];
    let (a1, a2, b1, b2) = (VertexId(0), VertexId(1), VertexId(2), VertexId(3));
    let lifts = [(0usize, a1, b1), (0, a2, b2), (1, a1, b2), (1, a2, b1), (2, a1, b1), (2, a2, b2)];
    let edges = lifts
        .iter()
        .enumerate()
        .map(|(i, &(base, u, v))| (format!("f{i}_e{base}"), u, v, length.clone()))
        .collect();
    let y = build(vertices, edges);
    let vmap = vec![VertexId(0), VertexId(0), VertexId(1), VertexId(1)];
    let emap = y
        .edges()
        .map(|f| {
            let base = EdgeId::forward(lifts[f.unoriented()].0);
            if f.is_forward() {
                base
            } else {
                base.reversal()
            }
        })
        .collect();
    (y, vmap, emap)
}
