//! Numerical defaults. The math modules take these by reference and never
//! hard-code tolerances of their own.

/// Power iteration for Perron roots.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerIterationConfig {
    /// Successive Rayleigh-quotient estimates must differ by less than this, relative.
    pub relative_tolerance: f64,
    /// `‖M x − λ x‖∞` bound for a max-normalized `x`, scaled by `max(1, λ)`.
    pub residual_tolerance: f64,
    pub max_iterations: usize,
    /// Iterations over which the residual must at least halve before the
    /// iteration is declared stalled and switched to `M + σI`.
    pub stall_window: usize,
    /// Cap on Noda steps once shifted power iteration has stalled too.
    pub inverse_iterations: usize,
    /// Noda iteration stops once the Collatz–Wielandt bounds on `λ` agree to this, relative.
    pub bound_tolerance: f64,
}

impl Default for PowerIterationConfig {
    fn default() -> Self {
        PowerIterationConfig {
            relative_tolerance: 1e-14,
            residual_tolerance: 1e-12,
            max_iterations: 1_000_000,
            stall_window: 64,
            inverse_iterations: 100,
            bound_tolerance: 1e-13,
        }
    }
}

/// Root finding for `λ(h) = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub power: PowerIterationConfig,
    /// Final bracket width, absolute, in units of `1/length`.
    pub root_tolerance: f64,
    /// Bound on the max residual of the fixed-point system at the solution.
    pub residual_tolerance: f64,
    /// Cap on the doubling phase that looks for `λ(H) < 1`.
    pub max_doublings: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            power: PowerIterationConfig::default(),
            root_tolerance: 1e-12,
            residual_tolerance: 1e-9,
            max_doublings: 1000,
        }
    }
}

/// Exact path-count oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleConfig {
    /// Number of radii in `[r_max / 2, r_max]` used for the growth fit.
    pub grid_points: usize,
    /// Refuse queries whose DP would visit more `(edge, length)` cells than this.
    pub max_cells: u128,
    /// `N(r_max)` must reach this before a growth estimate is attempted.
    pub min_count: u64,
    /// Default outer radius, in grid units of the common denominator.
    pub default_r_max: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { grid_points: 12, max_cells: 1_000_000_000, min_count: 1000, default_r_max: 30 }
    }
}

/// Random normalized metrics for sampled minimality checks.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingConfig {
    pub samples: usize,
    pub seed: u64,
    /// Symmetric Dirichlet concentration; 1 is uniform on the simplex.
    pub concentration: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig { samples: 200, seed: 0, concentration: 1.0 }
    }
}

/// Tolerances for the closed-form consistency checks of the optimizer and
/// the covering report.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckConfig {
    /// Gap below which a covering inequality is treated as an equality.
    pub equality_gap: f64,
    /// Relative spread allowed when recovering the proportionality constant.
    pub proportionality: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { equality_gap: 1e-6, proportionality: 1e-6 }
    }
}
