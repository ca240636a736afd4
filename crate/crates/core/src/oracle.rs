//! Exact counts of non-backtracking paths by metric length, and a growth-rate
//! estimate of the volume entropy built on them.
//!
//! A combinatorial path of length `r` is a non-backtracking edge sequence
//! `e1 … en` with `ℓ(e1) + … + ℓ(e_{n−1}) < r ≤ ℓ(e1) + … + ℓ(en)`. Counts are
//! exact big integers computed by dynamic programming on an integer grid: all
//! lengths are rescaled by the least common multiple of their denominators.
//! Nothing here touches the spectral or entropy modules.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::config::OracleConfig;
use crate::graph::{EdgeId, MetricGraph, Rational, VertexId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("entropy hypotheses violated: {}", .0.join("; "))]
    Hypotheses(Vec<String>),
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(String),
    #[error("grid of {cells} cells exceeds the limit of {limit}")]
    GridTooLarge { cells: String, limit: u128 },
    #[error("degenerate fit: only {0} distinct grid radii (need at least 4)")]
    DegenerateFit(usize),
    #[error("N(r_max) = {count} is below the required {required}; increase r_max")]
    InsufficientGrowth { count: String, required: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathCount {
    pub r: Rational,
    /// `N_r(x0)`.
    pub count: BigUint,
    /// Counts broken down by the last edge of the path, indexed by edge id.
    pub by_terminal_edge: Vec<BigUint>,
}

/// Lengths on the common-denominator grid.
struct Grid {
    /// Metric length of one grid step.
    unit: Rational,
    steps: Vec<u64>,
    successors: Vec<Vec<usize>>,
}

impl Grid {
    fn new(g: &MetricGraph) -> Result<Self, OracleError> {
        let lcm = g.edges().fold(BigInt::one(), |acc, e| acc.lcm(g.length(e).denom()));
        let too_large = |what: String| OracleError::GridTooLarge { cells: what, limit: u128::from(u64::MAX) };
        let steps = g
            .edges()
            .map(|e| {
                let scaled = g.length(e) * Rational::from_integer(lcm.clone());
                scaled.to_integer().to_u64().ok_or_else(|| too_large(format!("edge length {scaled} grid steps")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let successors = g
            .edges()
            .map(|e| {
                g.outgoing(g.terminus(e)).iter().filter(|&&f| f != e.reversal()).map(|f| f.0).collect()
            })
            .collect();
        Ok(Grid { unit: Rational::new(BigInt::one(), lcm), steps, successors })
    }

    /// Smallest integer `R` with `R · unit ≥ r`.
    fn radius(&self, r: &Rational) -> Result<u64, OracleError> {
        let scaled = (r / &self.unit).ceil().to_integer();
        scaled.to_u64().ok_or_else(|| OracleError::GridTooLarge {
            cells: format!("radius of {scaled} grid steps"),
            limit: u128::from(u64::MAX),
        })
    }

    fn check_cells(&self, radius: u64, config: &OracleConfig) -> Result<(), OracleError> {
        let cells = u128::from(radius) * self.steps.len() as u128;
        if cells > config.max_cells {
            return Err(OracleError::GridTooLarge { cells: cells.to_string(), limit: config.max_cells });
        }
        Ok(())
    }

    /// Paths starting with any edge of `starts`, counted by their last edge.
    fn count_from(&self, starts: &[EdgeId], radius: u64) -> Vec<BigUint> {
        let n = self.steps.len();
        let width = *self.steps.iter().max().expect("graph has edges") as usize + 1;
        // open[s % width][e]: paths ending with e whose total length s is still short of the radius.
        let mut open = vec![vec![BigUint::zero(); n]; width];
        let mut done = vec![BigUint::zero(); n];
        for &e in starts {
            let s = self.steps[e.0];
            if s >= radius {
                done[e.0] += 1u32;
            } else {
                open[s as usize % width][e.0] += 1u32;
            }
        }
        for s in 0..radius {
            let slot = s as usize % width;
            let current = std::mem::replace(&mut open[slot], vec![BigUint::zero(); n]);
            for (e, c) in current.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                for &f in &self.successors[e] {
                    let t = s + self.steps[f];
                    if t >= radius {
                        done[f] += c;
                    } else {
                        open[t as usize % width][f] += c;
                    }
                }
            }
        }
        done
    }
}

fn check_hypotheses(g: &MetricGraph) -> Result<(), OracleError> {
    let report = g.validate_entropy_hypotheses();
    if report.passed() {
        Ok(())
    } else {
        Err(OracleError::Hypotheses(report.failures()))
    }
}

fn check_radius(r: &Rational) -> Result<(), OracleError> {
    if r.is_positive() {
        Ok(())
    } else {
        Err(OracleError::NonPositiveRadius(r.to_string()))
    }
}

/// Metric length of one grid step for `g`: `1 / lcm` of the length denominators.
pub fn grid_unit(g: &MetricGraph) -> Result<Rational, OracleError> {
    Ok(Grid::new(g)?.unit)
}

/// Exact number of combinatorial paths of length `r` starting at `x0`.
pub fn count_paths(
    g: &MetricGraph,
    x0: VertexId,
    r: &Rational,
    config: &OracleConfig,
) -> Result<PathCount, OracleError> {
    check_hypotheses(g)?;
    check_radius(r)?;
    let grid = Grid::new(g)?;
    let radius = grid.radius(r)?;
    grid.check_cells(radius, config)?;
    let by_terminal_edge = grid.count_from(g.outgoing(x0), radius);
    let count = by_terminal_edge.iter().sum();
    Ok(PathCount { r: r.clone(), count, by_terminal_edge })
}

/// Exact number of combinatorial paths of length `r` that start with `e` and end with `f`.
pub fn count_paths_between(
    g: &MetricGraph,
    e: EdgeId,
    f: EdgeId,
    r: &Rational,
    config: &OracleConfig,
) -> Result<BigUint, OracleError> {
    check_hypotheses(g)?;
    check_radius(r)?;
    let grid = Grid::new(g)?;
    let radius = grid.radius(r)?;
    grid.check_cells(radius, config)?;
    Ok(grid.count_from(&[e], radius).swap_remove(f.0))
}

/// Natural log of a big integer, exact to double precision for any size.
pub fn ln_big(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        n.to_f64().expect("fits in f64").ln()
    } else {
        let shift = bits - 64;
        (n >> shift).to_f64().expect("fits in f64").ln() + shift as f64 * std::f64::consts::LN_2
    }
}

/// Growth-rate estimate of the volume entropy from exact path counts.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthEstimate {
    /// Radii of the fit, snapped up to the grid.
    pub radii: Vec<Rational>,
    pub counts: Vec<BigUint>,
    /// Least-squares slope of `log N_r` against `r`. An estimate, not an exact value.
    pub h_est: f64,
    /// Standard error of the slope from the fit residuals.
    pub fit_error: f64,
    /// `log(N_{r_max} / N_{r_max − l_max}) / r_max`.
    pub a_priori_width: f64,
}

impl GrowthEstimate {
    /// Half-width of the reported error band around `h_est`.
    pub fn error_band(&self) -> f64 {
        self.fit_error + self.a_priori_width
    }
}

/// Fits `log N_r(x0)` against `r` on `config.grid_points` radii evenly spaced
/// in `[r_max / 2, r_max]`.
///
/// `N_r` is constant between consecutive grid points, so each radius is
/// snapped up to the grid point whose count it reports and the fit uses the
/// snapped value as abscissa.
pub fn estimate_entropy(
    g: &MetricGraph,
    x0: VertexId,
    r_max: &Rational,
    config: &OracleConfig,
) -> Result<GrowthEstimate, OracleError> {
    check_hypotheses(g)?;
    check_radius(r_max)?;
    let points = config.grid_points;
    if points < 4 {
        return Err(OracleError::DegenerateFit(points));
    }
    let grid = Grid::new(g)?;
    let top = grid.radius(r_max)?;
    grid.check_cells(top, config)?;

    let half = r_max / Rational::from_integer(BigInt::from(2));
    let step = &half / Rational::from_integer(BigInt::from(points - 1));
    let mut snapped: Vec<u64> = (0..points)
        .map(|i| grid.radius(&(&half + &step * Rational::from_integer(BigInt::from(i)))))
        .collect::<Result<_, _>>()?;
    snapped.dedup();
    if snapped.len() < 4 {
        return Err(OracleError::DegenerateFit(snapped.len()));
    }

    let count_at = |radius: u64| -> BigUint {
        if radius == 0 {
            BigUint::one()
        } else {
            grid.count_from(g.outgoing(x0), radius).iter().sum()
        }
    };
    let counts: Vec<BigUint> = snapped.iter().map(|&s| count_at(s)).collect();
    let last = counts.last().expect("at least four points");
    if *last < BigUint::from(config.min_count) {
        return Err(OracleError::InsufficientGrowth { count: last.to_string(), required: config.min_count });
    }

    let radii: Vec<Rational> =
        snapped.iter().map(|&s| Rational::from_integer(BigInt::from(s)) * &grid.unit).collect();
    let xs: Vec<f64> = radii.iter().map(|r| r.to_f64().expect("radius converts")).collect();
    let ys: Vec<f64> = counts.iter().map(ln_big).collect();
    let (slope, fit_error) = least_squares_slope(&xs, &ys);

    let l_max_steps = *grid.steps.iter().max().expect("graph has edges");
    let behind = count_at(top.saturating_sub(l_max_steps));
    let r_top = xs.last().copied().expect("at least four points");
    let a_priori_width = (ln_big(last) - ln_big(&behind)) / r_top;

    Ok(GrowthEstimate { radii, counts, h_est: slope, fit_error, a_priori_width })
}

/// Ordinary least squares; returns the slope and its standard error.
fn least_squares_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = if xs.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { f64::INFINITY };
    (slope, stderr)
}
