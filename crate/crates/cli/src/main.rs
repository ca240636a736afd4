use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use graph_entropy::config::{CheckConfig, OracleConfig, SamplingConfig, SolverConfig};
use graph_entropy::entropy::{self, EntropyError};
use graph_entropy::format::{self, FormatError};
use graph_entropy::gog::{self, CoveringMap, GogError, GraphOfGroups};
use graph_entropy::graph::{GraphError, MetricGraph, Rational};
use graph_entropy::optimizer::{self, Canonical, OptimizerError};
use graph_entropy::oracle::{self, OracleError};
use graph_entropy::spectral::{self, SpectralError};
use num_traits::ToPrimitive;
use serde_json::{json, Map, Value};

const SCHEMA_VERSION: u64 = 1;

#[derive(Parser, Debug)]
#[command(name = "graph-entropy", version, about = "Volume entropy of metric graphs and graphs of groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Width of the final root bracket.
    #[arg(long, global = true)]
    tol_root: Option<f64>,
    /// Bound on the fixed-point residual at the solution.
    #[arg(long, global = true)]
    tol_residual: Option<f64>,
    /// Outer radius of the oracle fit, in grid units.
    #[arg(long, global = true)]
    r_max: Option<u64>,
    /// Random metrics drawn by the minimality check of `minimize`; 0 disables it.
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Human)]
    format: OutputFormat,
    /// Include the weighted edge matrix at the solution in `entropy` output.
    #[arg(long, global = true)]
    dump_matrix: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Human,
    Structured,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a graph document against the entropy hypotheses.
    Validate { input: PathBuf },
    /// Volume of a metric graph.
    Volume { input: PathBuf },
    /// Volume entropy and the positive fixed-point solution.
    Entropy { input: PathBuf },
    /// Minimal volume entropy and the minimizing normalized metric.
    Minimize { input: PathBuf },
    /// Growth-rate estimate from exact path counts.
    Oracle {
        input: PathBuf,
        /// Base vertex; defaults to the first listed vertex.
        #[arg(long)]
        vertex: Option<String>,
    },
    /// Volume entropy of a graph of groups.
    GogEntropy { input: PathBuf },
    /// Minimal entropy and minimizing metric of a graph of groups.
    GogMinimize { input: PathBuf },
    /// Check a covering map, and the entropy inequality when the source has lengths.
    CoverCheck { input: PathBuf },
    /// Series-reduce away valency-2 vertices.
    Reduce { input: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Volume { .. } => "volume",
            Command::Entropy { .. } => "entropy",
            Command::Minimize { .. } => "minimize",
            Command::Oracle { .. } => "oracle",
            Command::GogEntropy { .. } => "gog-entropy",
            Command::GogMinimize { .. } => "gog-minimize",
            Command::CoverCheck { .. } => "cover-check",
            Command::Reduce { .. } => "reduce",
        }
    }
}

/// Settings resolved from flags and config defaults.
struct RunConfig {
    solver: SolverConfig,
    oracle: OracleConfig,
    sampling: SamplingConfig,
    check: CheckConfig,
    r_max: u64,
    dump_matrix: bool,
}

impl RunConfig {
    fn from_cli(cli: &Cli) -> Result<Self, Failure> {
        let mut solver = SolverConfig::default();
        let oracle = OracleConfig::default();
        let mut sampling = SamplingConfig::default();
        for (flag, value) in [("--tol-root", cli.tol_root), ("--tol-residual", cli.tol_residual)] {
            if let Some(v) = value {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Failure::Usage(format!("{flag} must be positive, got {v}")));
                }
            }
        }
        if let Some(v) = cli.tol_root {
            solver.root_tolerance = v;
        }
        if let Some(v) = cli.tol_residual {
            solver.residual_tolerance = v;
        }
        let r_max = cli.r_max.unwrap_or(oracle.default_r_max);
        if r_max == 0 {
            return Err(Failure::Usage("--r-max must be positive".into()));
        }
        if let Some(n) = cli.samples {
            sampling.samples = n;
        }
        if let Some(seed) = cli.seed {
            sampling.seed = seed;
        }
        Ok(RunConfig { solver, oracle, sampling, check: CheckConfig::default(), r_max, dump_matrix: cli.dump_matrix })
    }
}

enum Failure {
    Validation(String),
    Numerical(String),
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Usage(_) => 3,
        }
    }

    fn status(&self) -> &'static str {
        match self {
            Failure::Validation(_) => "validation_failure",
            Failure::Numerical(_) => "numerical_failure",
            Failure::Usage(_) => "usage_error",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Numerical(m) | Failure::Usage(m) => m,
        }
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<SpectralError> for Failure {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::Hypotheses(_) | SpectralError::Reducible { .. } | SpectralError::Inconsistent { .. } => {
                Failure::Validation(e.to_string())
            }
            SpectralError::NegativeH(_) | SpectralError::NonConvergence { .. } | SpectralError::Degenerate => {
                Failure::Numerical(e.to_string())
            }
        }
    }
}

impl From<EntropyError> for Failure {
    fn from(e: EntropyError) -> Self {
        match e {
            EntropyError::Hypotheses(_) => Failure::Validation(e.to_string()),
            EntropyError::Spectral(s) => s.into(),
            EntropyError::NoBracket(_) | EntropyError::NoUpperBracket(_) | EntropyError::Residual { .. } => {
                Failure::Numerical(e.to_string())
            }
        }
    }
}

impl From<OptimizerError> for Failure {
    fn from(e: OptimizerError) -> Self {
        match e {
            OptimizerError::Entropy(inner) => inner.into(),
            OptimizerError::InconsistentRatios(_) => Failure::Numerical(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Hypotheses(_) => Failure::Validation(e.to_string()),
            OracleError::NonPositiveRadius(_) => Failure::Usage(e.to_string()),
            OracleError::GridTooLarge { .. } | OracleError::DegenerateFit(_) | OracleError::InsufficientGrowth { .. } => {
                Failure::Numerical(e.to_string())
            }
        }
    }
}

impl From<GogError> for Failure {
    fn from(e: GogError) -> Self {
        match e {
            GogError::Entropy(inner) => inner.into(),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<MetricGraph, Failure> {
    Ok(MetricGraph::from_document(&format::parse_graph(&read_input(path)?)?)?)
}

fn load_gog(path: &Path) -> Result<GraphOfGroups, Failure> {
    Ok(GraphOfGroups::from_document(&format::parse_graph(&read_input(path)?)?)?)
}

fn float(r: &Rational) -> f64 {
    r.to_f64().expect("rational converts to f64")
}

fn edge_map(g: &MetricGraph, values: &[f64]) -> Value {
    Value::Object(g.edges().map(|e| (g.edge_label(e), json!(values[e.0]))).collect())
}

fn unoriented_map(g: &MetricGraph, values: &[f64]) -> Value {
    Value::Object((0..g.unoriented_edge_count()).map(|k| (g.edge_name(k).to_string(), json!(values[k]))).collect())
}

fn graph_value(g: &MetricGraph) -> Value {
    serde_json::to_value(g.to_document()).expect("documents serialize")
}

fn canonical_name(c: Canonical) -> &'static str {
    match c {
        Canonical::Unique => "unique",
        Canonical::ChainTotalsOnly => "chain_totals_only",
    }
}

fn validate(path: &Path) -> Result<Value, Failure> {
    let gog = load_gog(path)?;
    let g = &gog.graph;
    let report = g.validate_entropy_hypotheses();
    let checks = json!({
        "connected": report.connected.passed,
        "no_terminal_vertices": report.no_terminal.passed,
        "not_a_cycle": report.not_cycle.passed,
    });
    if !report.passed() {
        return Err(Failure::Validation(format!("entropy hypotheses violated: {}", report.failures().join("; "))));
    }
    let irreducibility = spectral::is_irreducible(g)?;
    Ok(json!({
        "vertices": g.vertex_count(),
        "edges": g.unoriented_edge_count(),
        "free_rank": g.free_rank(),
        "has_lengths": gog.has_lengths,
        "checks": checks,
        "irreducible": irreducibility.irreducible,
    }))
}

fn volume(path: &Path) -> Result<Value, Failure> {
    let g = load_graph(path)?;
    let v = g.volume();
    Ok(json!({ "volume": v.to_string(), "volume_f64": float(&v) }))
}

fn entropy_cmd(path: &Path, cfg: &RunConfig) -> Result<Value, Failure> {
    let g = load_graph(path)?;
    let s = entropy::volume_entropy(&g, &cfg.solver)?;
    let vol = float(&g.volume());
    let mut out = json!({
        "h": s.h,
        "volume": g.volume().to_string(),
        "h_times_volume": s.h * vol,
        "bracket": [s.bracket.0, s.bracket.1],
        "residual": s.residual,
        "radius": s.radius,
        "bisection_steps": s.bisection_steps,
        "vector": edge_map(&g, &s.vector),
    });
    if cfg.dump_matrix {
        let m = spectral::weighted_matrix(&g, s.h)?;
        let entries: Vec<Value> = m
            .entries()
            .map(|(e, f, v)| json!({ "from": g.edge_label(e), "to": g.edge_label(f), "value": v }))
            .collect();
        out["matrix"] = Value::Array(entries);
    }
    Ok(out)
}

fn minimize(path: &Path, cfg: &RunConfig) -> Result<Value, Failure> {
    let g = load_graph(path)?;
    let m = optimizer::minimize_with_reduction(&g)?;
    let metric = g.with_lengths_f64(&m.lengths)?;
    let mut out = json!({
        "h_min": m.metric.h_min,
        "lengths": unoriented_map(&g, &m.lengths),
        "canonical": canonical_name(m.canonical),
        "residual": m.metric.residual,
        "perron": edge_map(&m.reduced, &m.metric.perron),
        "graph": graph_value(&metric),
    });
    if cfg.sampling.samples > 0 {
        let sample = optimizer::sample_minimality(&m.reduced, &cfg.sampling, &cfg.solver)?;
        out["sampling"] = json!({
            "samples": cfg.sampling.samples,
            "seed": cfg.sampling.seed,
            "min_gap": sample.min_gap(),
        });
    }
    Ok(out)
}

fn oracle_cmd(path: &Path, vertex: Option<&str>, cfg: &RunConfig) -> Result<Value, Failure> {
    let g = load_graph(path)?;
    let x0 = match vertex {
        Some(name) => g.vertex_by_name(name).ok_or_else(|| Failure::Usage(format!("unknown vertex `{name}`")))?,
        None => graph_entropy::VertexId(0),
    };
    let unit = oracle::grid_unit(&g)?;
    let r_max = Rational::from_integer(cfg.r_max.into()) * &unit;
    let est = oracle::estimate_entropy(&g, x0, &r_max, &cfg.oracle)?;
    let counts: Vec<Value> = est
        .radii
        .iter()
        .zip(&est.counts)
        .map(|(r, n)| json!({ "r": r.to_string(), "count": n.to_string() }))
        .collect();
    Ok(json!({
        "vertex": g.vertex_name(x0),
        "grid_unit": unit.to_string(),
        "r_max": r_max.to_string(),
        "h_est": est.h_est,
        "error_band": est.error_band(),
        "fit_error": est.fit_error,
        "a_priori_width": est.a_priori_width,
        "counts": counts,
    }))
}

fn degrees(gog: &GraphOfGroups) -> Value {
    Value::Object(
        gog.graph.vertices().map(|x| (gog.graph.vertex_name(x).to_string(), json!(gog.degree(x)))).collect(),
    )
}

fn gog_entropy(path: &Path, cfg: &RunConfig) -> Result<Value, Failure> {
    let gog = load_gog(path)?;
    let s = gog::gog_entropy(&gog, &cfg.solver)?;
    let vol = gog::gog_volume(&gog)?;
    Ok(json!({
        "h": s.h,
        "volume": vol.to_string(),
        "h_times_volume": s.h * float(&vol),
        "residual": s.residual,
        "degrees": degrees(&gog),
        "vector": edge_map(&gog.graph, &s.vector),
    }))
}

fn gog_minimize(path: &Path, cfg: &RunConfig) -> Result<Value, Failure> {
    let gog = load_gog(path)?;
    let m = gog::gog_minimal_metric(&gog, &cfg.solver)?;
    let metric = gog.with_lengths_f64(&m.lengths)?;
    Ok(json!({
        "h_min": m.h_min,
        "solver_h": m.solver_h,
        "lengths": unoriented_map(&gog.graph, &m.lengths),
        "degrees": degrees(&gog),
        "graph": serde_json::to_value(metric.to_document()).expect("documents serialize"),
    }))
}

fn cover_check(path: &Path, cfg: &RunConfig) -> Result<Value, Failure> {
    let doc = format::parse_cover(&read_input(path)?)?;
    let cover = CoveringMap::from_document(&doc)?;
    let report = gog::check_covering(&cover);
    if let Some(v) = &report.violation {
        return Err(Failure::Validation(format!("not a covering: {v}")));
    }
    let mut out = json!({ "valid": true, "sheets": report.sheets });
    if cover.source.has_lengths {
        let y = &cover.source.graph;
        let lengths: Vec<Rational> = (0..y.unoriented_edge_count()).map(|k| y.unoriented_length(k).clone()).collect();
        let r = gog::covering_inequality(&cover, &lengths, &cfg.solver, &cfg.check)?;
        out["inequality"] = json!({
            "lhs": r.lhs,
            "rhs": r.rhs,
            "gap": r.gap,
            "lambda": r.lambda,
            "ratio_spread": r.ratio_spread,
            "equality": r.equality,
        });
    }
    Ok(out)
}

fn reduce(path: &Path) -> Result<Value, Failure> {
    let g = load_graph(path)?;
    let (reduced, chains) = g.series_reduce()?;
    let chains: Map<String, Value> = chains
        .chains
        .iter()
        .enumerate()
        .map(|(k, c)| (reduced.edge_name(k).to_string(), json!(c.iter().map(|&e| g.edge_label(e)).collect::<Vec<_>>())))
        .collect();
    Ok(json!({
        "identity": chains.iter().all(|(k, v)| v.as_array().is_some_and(|a| a.len() == 1 && a[0] == json!(k))),
        "chains": chains,
        "graph": graph_value(&reduced),
    }))
}

fn dispatch(command: &Command, cfg: &RunConfig) -> Result<Value, Failure> {
    match command {
        Command::Validate { input } => validate(input),
        Command::Volume { input } => volume(input),
        Command::Entropy { input } => entropy_cmd(input, cfg),
        Command::Minimize { input } => minimize(input, cfg),
        Command::Oracle { input, vertex } => oracle_cmd(input, vertex.as_deref(), cfg),
        Command::GogEntropy { input } => gog_entropy(input, cfg),
        Command::GogMinimize { input } => gog_minimize(input, cfg),
        Command::CoverCheck { input } => cover_check(input, cfg),
        Command::Reduce { input } => reduce(input),
    }
}

fn render_human(value: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                match v {
                    Value::Object(_) => {
                        let _ = writeln!(out, "{pad}{k}:");
                        render_human(v, indent + 1, out);
                    }
                    Value::Array(items) if items.iter().any(|i| i.is_object()) => {
                        let _ = writeln!(out, "{pad}{k}:");
                        for item in items {
                            let _ = writeln!(out, "{pad}  - {item}");
                        }
                    }
                    Value::String(s) => {
                        let _ = writeln!(out, "{pad}{k}: {s}");
                    }
                    _ => {
                        let _ = writeln!(out, "{pad}{k}: {v}");
                    }
                }
            }
        }
        other => {
            let _ = writeln!(out, "{pad}{other}");
        }
    }
}

fn emit(format: OutputFormat, command: &str, result: &Result<Value, Failure>) {
    let mut doc = Map::new();
    doc.insert("schema_version".into(), json!(SCHEMA_VERSION));
    doc.insert("command".into(), json!(command));
    match result {
        Ok(Value::Object(fields)) => {
            doc.insert("status".into(), json!("ok"));
            doc.extend(fields.clone());
        }
        Ok(other) => {
            doc.insert("status".into(), json!("ok"));
            doc.insert("result".into(), other.clone());
        }
        Err(f) => {
            doc.insert("status".into(), json!(f.status()));
            doc.insert("error".into(), json!(f.message()));
        }
    }
    let doc = Value::Object(doc);
    match format {
        OutputFormat::Structured => print!("{}", format::to_canonical_string(&doc)),
        OutputFormat::Human => {
            let mut text = String::new();
            render_human(&doc, 0, &mut text);
            match result {
                Ok(_) => print!("{text}"),
                Err(_) => eprint!("{text}"),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let command = cli.command.name();
    let result = RunConfig::from_cli(&cli).and_then(|cfg| dispatch(&cli.command, &cfg));
    emit(cli.format, command, &result);
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(f) => ExitCode::from(f.code()),
    }
}
