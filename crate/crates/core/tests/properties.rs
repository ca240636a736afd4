use graph_entropy::config::{OracleConfig, SolverConfig};
use graph_entropy::entropy::volume_entropy;
use graph_entropy::families;
use graph_entropy::gog::{self, CoveringMap, GraphOfGroups};
use graph_entropy::graph::{one, ratio, EdgeId, MetricGraph, Rational, VertexId};
use graph_entropy::optimizer;
use graph_entropy::oracle::{count_paths, count_paths_between, estimate_entropy};
use graph_entropy::spectral::{edge_adjacency, spectral_radius, weighted_matrix};
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use proptest::prelude::*;

/// Rounding floor for an independent cold-start evaluation of the Perron root.
const EVAL_NOISE: f64 = 1e-12;

fn solver() -> SolverConfig {
    SolverConfig::default()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-300)
}

fn lambda(g: &MetricGraph, h: f64) -> f64 {
    spectral_radius(&weighted_matrix(g, h).unwrap(), &solver().power).unwrap().radius
}

prop_compose! {
    fn length()(p in 1i64..=12, q in 1i64..=4) -> Rational {
        ratio(p, q)
    }
}

prop_compose! {
    fn raw_graph()(n in 1usize..=4)
        (n in Just(n), edges in prop::collection::vec((0..n, 0..n, length()), n..=n + 3))
        -> Option<MetricGraph> {
        let names = (0..n).map(|i| format!("v{i}")).collect();
        let edges = edges
            .into_iter()
            .enumerate()
            .map(|(k, (u, v, l))| (format!("e{k}"), VertexId(u), VertexId(v), l))
            .collect();
        MetricGraph::from_parts(names, edges).ok()
    }
}

/// Connected graphs with no terminal vertex that are not cycles.
fn entropy_graph() -> impl Strategy<Value = MetricGraph> {
    raw_graph().prop_filter_map("entropy hypotheses", |g| g.filter(|g| g.validate_entropy_hypotheses().passed()))
}

/// Entropy graphs whose valencies are all at least three.
fn branching_graph() -> impl Strategy<Value = MetricGraph> {
    entropy_graph().prop_filter("valency >= 3", |g| g.vertices().all(|x| g.valency(x) >= 3))
}

/// Same graph with vertices and edges listed in reverse and every edge flipped.
fn relabeled(g: &MetricGraph) -> MetricGraph {
    let mut doc = g.to_document();
    doc.vertices.reverse();
    doc.edges.reverse();
    for e in &mut doc.edges {
        std::mem::swap(&mut e.u, &mut e.v);
    }
    MetricGraph::from_document(&doc).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reversal_is_an_involution(g in raw_graph().prop_filter_map("connected", |g| g)) {
        for e in g.edges() {
            prop_assert_eq!(e.reversal().reversal(), e);
            prop_assert_ne!(e.reversal(), e);
            prop_assert_eq!(g.length(e), g.length(e.reversal()));
            prop_assert_eq!(g.origin(e.reversal()), g.terminus(e));
        }
    }

    #[test]
    fn scaling_and_normalization(g in raw_graph().prop_filter_map("connected", |g| g), alpha in length()) {
        prop_assert_eq!(g.scale_metric(&alpha).unwrap().volume(), &alpha * g.volume());
        let n = g.normalize();
        prop_assert_eq!(n.volume(), one());
        prop_assert_eq!(n.normalize(), n);
    }

    #[test]
    fn series_reduction_preserves_volume_and_entropy(g in entropy_graph()) {
        let (reduced, _) = g.series_reduce().unwrap();
        prop_assert!(reduced.vertices().all(|x| reduced.valency(x) != 2));
        prop_assert_eq!(reduced.volume(), g.volume());
        let a = volume_entropy(&g, &solver()).unwrap().h;
        let b = volume_entropy(&reduced, &solver()).unwrap().h;
        prop_assert!(close(a, b, 1e-9), "{} vs {}", a, b);
    }

    #[test]
    fn adjacency_row_sums_and_reversal_symmetry(g in entropy_graph()) {
        let adj = edge_adjacency(&g);
        for e in g.edges() {
            prop_assert_eq!(adj.row_sum(e), g.k(g.terminus(e)));
            for f in g.edges() {
                prop_assert_eq!(adj.contains(e, f), adj.contains(f.reversal(), e.reversal()));
            }
        }
    }

    #[test]
    fn perron_root_bounds_and_monotonicity(g in entropy_graph(), h1 in 0.0f64..2.0, dh in 0.01f64..2.0) {
        prop_assert!(lambda(&g, 0.0) >= 1.0 - 1e-12);
        prop_assert!(lambda(&g, h1) > lambda(&g, h1 + dh));
        let l_min = g.l_min().to_f64().unwrap();
        prop_assert!(lambda(&g, 10.0 / l_min) < 0.01);
        let perron = spectral_radius(&weighted_matrix(&g, h1).unwrap(), &solver().power).unwrap();
        prop_assert!(perron.vector.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn entropy_is_homogeneous_and_bracketed(g in entropy_graph()) {
        let s = volume_entropy(&g, &solver()).unwrap();
        prop_assert!(s.bracket.0 < s.bracket.1);
        prop_assert!(lambda(&g, s.bracket.0) > 1.0 - EVAL_NOISE);
        prop_assert!(lambda(&g, s.bracket.1) <= 1.0 + EVAL_NOISE);
        for alpha in [ratio(1, 3), ratio(1, 2), ratio(2, 1), ratio(5, 1)] {
            let scaled = volume_entropy(&g.scale_metric(&alpha).unwrap(), &solver()).unwrap().h;
            prop_assert!(close(scaled * alpha.to_f64().unwrap(), s.h, 1e-9));
        }
    }

    #[test]
    fn entropy_ignores_labels_and_orientation(g in entropy_graph()) {
        let a = volume_entropy(&g, &solver()).unwrap().h;
        let b = volume_entropy(&relabeled(&g), &solver()).unwrap().h;
        prop_assert!(close(a, b, 1e-9), "{} vs {}", a, b);
    }

    #[test]
    fn minimal_metric_is_consistent(g in branching_graph()) {
        let m = optimizer::minimal_metric(&g).unwrap();
        prop_assert!(close(m.lengths.iter().sum::<f64>(), 1.0, 1e-12));
        let metric = g.with_lengths_f64(&m.lengths).unwrap();
        let h = volume_entropy(&metric, &solver()).unwrap().h;
        prop_assert!(close(h, m.h_min, 1e-9));
        for e in g.edges() {
            let lhs = (m.h_min * m.lengths[e.unoriented()]).exp() * m.z[g.origin(e).0];
            prop_assert!(close(lhs, g.k(g.terminus(e)) as f64 * m.z[g.terminus(e).0], 1e-9));
        }
        let gog = gog::gog_minimal_entropy(&GraphOfGroups::trivial(g.clone())).unwrap();
        prop_assert!(close(gog, m.h_min, 1e-12));
    }

    #[test]
    fn splitting_lowers_the_minimum(g in branching_graph()) {
        if let Some(x) = g.vertices().find(|&x| g.valency(x) >= 4) {
            let moved: Vec<EdgeId> = g.outgoing(x)[..2].to_vec();
            let split = optimizer::split_vertex(&g, x, &moved).unwrap();
            prop_assert_eq!(split.free_rank(), g.free_rank());
            prop_assert!(optimizer::minimal_entropy(&split).unwrap() < optimizer::minimal_entropy(&g).unwrap());
        }
    }

    #[test]
    fn trivial_groups_reduce_to_the_graph(g in entropy_graph()) {
        let trivial = GraphOfGroups::trivial(g.clone());
        prop_assert_eq!(gog::gog_volume(&trivial).unwrap(), g.volume());
        for x in g.vertices() {
            prop_assert_eq!(trivial.degree(x) as usize, g.valency(x));
        }
        let a = gog::gog_entropy(&trivial, &solver()).unwrap().h;
        let b = volume_entropy(&g, &solver()).unwrap().h;
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn path_counts_aggregate_and_grow(g in entropy_graph(), r in 1i64..=12) {
        let config = OracleConfig::default();
        let x0 = VertexId(0);
        let r = ratio(r, 2);
        let total = count_paths(&g, x0, &r, &config).unwrap();
        prop_assert_eq!(total.by_terminal_edge.iter().sum::<BigUint>(), total.count.clone());
        let mut pairwise = BigUint::ZERO;
        for &e in g.outgoing(x0) {
            for f in g.edges() {
                pairwise += count_paths_between(&g, e, f, &r, &config).unwrap();
            }
        }
        prop_assert_eq!(&pairwise, &total.count);
        let longer = count_paths(&g, x0, &(&r + ratio(1, 2)), &config).unwrap();
        prop_assert!(longer.count >= total.count);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn covering_inequality_holds(raw in prop::collection::vec(1i64..=60, 6)) {
        let (y, vmap, emap) = families::theta_double_cover(one());
        let x = families::theta_unit();
        let cover = CoveringMap::new(GraphOfGroups::trivial(y), GraphOfGroups::trivial(x), vmap, emap);
        let total: i64 = raw.iter().sum();
        let lengths: Vec<Rational> = raw.iter().map(|&p| ratio(p, total)).collect();
        let r = gog::covering_inequality(&cover, &lengths, &solver(), &Default::default()).unwrap();
        prop_assert!(r.lhs >= r.rhs - 1e-9, "{} < {}", r.lhs, r.rhs);
    }
}

#[test]
fn dumbbell_oracle_at_radius_twenty() {
    let g = families::dumbbell([one(), one(), one()]);
    let est = estimate_entropy(&g, VertexId(0), &ratio(20, 1), &OracleConfig::default()).unwrap();
    let h = volume_entropy(&g, &solver()).unwrap().h;
    assert!(close(est.h_est, h, 0.02), "{} vs {h}", est.h_est);
    assert!((est.h_est - h).abs() <= est.error_band());
}

#[test]
fn sandwich_bound_on_theta() {
    let g = families::theta([one(), one(), ratio(2, 1)]);
    let h = volume_entropy(&g, &solver()).unwrap().h;
    let config = OracleConfig::default();
    let eps = 0.1;
    for r in 20..=40 {
        let n = count_paths(&g, VertexId(0), &ratio(r, 1), &config).unwrap().count;
        let log_n = graph_entropy::oracle::ln_big(&n);
        let r = r as f64;
        assert!(log_n >= (h - eps) * r && log_n <= (h + eps) * r, "r = {r}: {log_n}");
    }
}
