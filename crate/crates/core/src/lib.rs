//! Volume entropy of finite metric graphs and of finite graphs of finite
//! groups.
//!
//! * [`graph`]: metric multigraphs with oriented edges, volume, normalization
//!   and series reduction.
//! * [`spectral`]: the non-backtracking edge adjacency matrix and Perron roots.
//! * [`entropy`]: the volume entropy as the root of `λ(h) = 1`.
//! * [`optimizer`]: the closed-form entropy-minimizing normalized metric.
//! * [`oracle`]: exact path counting, independent of the spectral machinery.
//! * [`gog`]: graphs of groups and covering maps.

pub mod config;
pub mod entropy;
pub mod families;
pub mod format;
pub mod gog;
pub mod graph;
pub mod optimizer;
pub mod oracle;
pub mod spectral;

pub use config::{OracleConfig, PowerIterationConfig, SamplingConfig, SolverConfig};
pub use entropy::{entropy_volume_product, verify_fixed_point, volume_entropy, EntropySolution};
pub use graph::{build_graph, EdgeId, MetricGraph, Rational, VertexId};
