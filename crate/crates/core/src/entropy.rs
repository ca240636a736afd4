//! Volume entropy as the unique `h > 0` at which the Perron root of `A'(h)`
//! equals one, together with the positive solution of
//! `x_e = Σ_f ρ_ef e^{−h ℓ(f)} x_f`.

use thiserror::Error;

use crate::config::SolverConfig;
use crate::graph::{EdgeId, MetricGraph};
use crate::spectral::{self, ContinuationMatrix, PerronResult, SpectralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntropyError {
    #[error("entropy hypotheses violated: {}", .0.join("; "))]
    Hypotheses(Vec<String>),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("λ(0) = {0} < 1; the root is not bracketed")]
    NoBracket(f64),
    #[error("λ(h) stayed at or above 1 up to h = {0:e}")]
    NoUpperBracket(f64),
    #[error("fixed-point residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropySolution {
    /// Volume entropy, in units of inverse length.
    pub h: f64,
    /// Positive solution `x_e` of the fixed-point system, max entry 1, by edge id.
    pub vector: Vec<f64>,
    /// Final root bracket `(lo, hi)` with `λ(lo) > 1 ≥ λ(hi)`.
    pub bracket: (f64, f64),
    /// `max_e |x_e − Σ_f m_ef e^{−h ℓ(f)} x_f|`.
    pub residual: f64,
    /// Perron root at `h`; equals one up to the root tolerance.
    pub radius: f64,
    pub bisection_steps: usize,
    /// Power iterations spent on the final Perron solve.
    pub power_iterations: usize,
}

/// Residual of the fixed-point system for a candidate `(h, x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub max: f64,
    pub mean: f64,
    pub worst_edge: EdgeId,
}

/// Volume entropy of a metric graph.
pub fn volume_entropy(g: &MetricGraph, config: &SolverConfig) -> Result<EntropySolution, EntropyError> {
    let report = g.validate_entropy_hypotheses();
    if !report.passed() {
        return Err(EntropyError::Hypotheses(report.failures()));
    }
    let irreducibility = spectral::is_irreducible(g)?;
    if !irreducibility.irreducible {
        return Err(SpectralError::Reducible { components: irreducibility.components.len() }.into());
    }
    let counts = spectral::edge_adjacency(g).continuation_counts();
    solve_unit_radius(&counts, &g.lengths_f64(), config)
}

/// `h_vol(g) · vol(g)`, which is invariant under dilation.
pub fn entropy_volume_product(g: &MetricGraph, config: &SolverConfig) -> Result<f64, EntropyError> {
    let h = volume_entropy(g, config)?.h;
    Ok(h * num_traits::ToPrimitive::to_f64(&g.volume()).expect("volume converts to f64"))
}

/// Evaluates `x_e − Σ_f ρ_ef e^{−h ℓ(f)} x_f` edge by edge, straight from the
/// graph structure.
pub fn verify_fixed_point(g: &MetricGraph, h: f64, x: &[f64]) -> ResidualReport {
    assert_eq!(x.len(), g.edge_count(), "one entry per oriented edge");
    let lengths = g.lengths_f64();
    let mut max = 0.0f64;
    let mut sum = 0.0;
    let mut worst_edge = EdgeId(0);
    for e in g.edges() {
        let rhs: f64 = g
            .outgoing(g.terminus(e))
            .iter()
            .filter(|&&f| f != e.reversal())
            .map(|&f| (-h * lengths[f.0]).exp() * x[f.0])
            .sum();
        let r = (x[e.0] - rhs).abs();
        sum += r;
        if r > max {
            max = r;
            worst_edge = e;
        }
    }
    ResidualReport { max, mean: sum / x.len() as f64, worst_edge }
}

/// Finds `h > 0` with `ρ(M'(h)) = 1` for `M'(h)_ef = m_ef e^{−h ℓ(f)}` by
/// doubling then bisection on `λ(h) − 1`. The caller guarantees that the
/// support of `counts` is strongly connected.
pub(crate) fn solve_unit_radius(
    counts: &ContinuationMatrix,
    lengths: &[f64],
    config: &SolverConfig,
) -> Result<EntropySolution, EntropyError> {
    let mut warm: Option<Vec<f64>> = None;
    let mut lambda = |h: f64| -> Result<PerronResult, EntropyError> {
        let m = counts.weighted(lengths, h);
        let result = spectral::spectral_radius_from(&m, warm.as_deref(), &config.power)?;
        warm = Some(result.vector.clone());
        Ok(result)
    };

    let at_zero = lambda(0.0)?.radius;
    if at_zero < 1.0 {
        return Err(EntropyError::NoBracket(at_zero));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut doublings = 0;
    while lambda(hi)?.radius >= 1.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > config.max_doublings || !hi.is_finite() {
            return Err(EntropyError::NoUpperBracket(lo));
        }
    }
    let mut steps = 0;
    while hi - lo > config.root_tolerance {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if lambda(mid)?.radius > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    let h = 0.5 * (lo + hi);
    let perron = lambda(h)?;
    let m = counts.weighted(lengths, h);
    let mut image = vec![0.0; perron.vector.len()];
    m.apply(&perron.vector, &mut image);
    let residual = perron.vector.iter().zip(&image).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    if residual > config.residual_tolerance {
        return Err(EntropyError::Residual { residual, tolerance: config.residual_tolerance });
    }
    Ok(EntropySolution {
        h,
        vector: perron.vector,
        bracket: (lo, hi),
        residual,
        radius: perron.radius,
        bisection_steps: steps,
        power_iterations: perron.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families;
    use crate::graph::{one, ratio};
    use crate::spectral::{spectral_radius, weighted_matrix};

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn theta_unit_entropy_is_log_two() {
        let s = volume_entropy(&families::theta_unit(), &cfg()).unwrap();
        assert!((s.h - 2f64.ln()).abs() < 1e-12, "{}", s.h);
        assert!(s.residual <= 1e-9);
        assert!(s.vector.iter().all(|&v| v > 0.0));
        assert_eq!(s.vector.iter().cloned().fold(0.0, f64::max), 1.0);
    }

    #[test]
    fn theta_third_lengths() {
        let g = families::theta([ratio(1, 3), ratio(1, 3), ratio(1, 3)]);
        let s = volume_entropy(&g, &cfg()).unwrap();
        assert!((s.h - 3.0 * 2f64.ln()).abs() < 1e-11);
    }

    #[test]
    fn cycle_is_rejected() {
        let err = volume_entropy(&families::cycle(4, one()), &cfg()).unwrap_err();
        assert!(matches!(err, EntropyError::Hypotheses(_)));
        assert!(err.to_string().contains("hypotheses violated"));
    }

    #[test]
    fn bracket_straddles_one() {
        let g = families::theta([one(), one(), ratio(2, 1)]);
        let s = volume_entropy(&g, &cfg()).unwrap();
        let power = &cfg().power;
        let (lo, hi) = s.bracket;
        assert!(hi - lo <= 1e-12);
        assert!(spectral_radius(&weighted_matrix(&g, lo).unwrap(), power).unwrap().radius > 1.0);
        assert!(spectral_radius(&weighted_matrix(&g, hi).unwrap(), power).unwrap().radius <= 1.0);
    }

    #[test]
    fn fixed_point_residual_examples() {
        let g = families::theta_unit();
        let h = 2f64.ln();
        let ones = vec![1.0; 6];
        assert!(verify_fixed_point(&g, h, &ones).max < 1e-15);

        let eps = 1e-3;
        let mut bumped = ones.clone();
        bumped[3] += eps;
        let r = verify_fixed_point(&g, h, &bumped);
        assert!(r.max >= eps / 2.0 && r.max <= 2.0 * eps, "{}", r.max);
        assert!(r.mean > 0.0 && r.mean < r.max);
    }

    #[test]
    fn entropy_volume_product_examples() {
        let p = entropy_volume_product(&families::theta_unit(), &cfg()).unwrap();
        assert!((p - 3.0 * 2f64.ln()).abs() < 1e-11);
        let scaled = families::theta_unit().scale_metric(&ratio(7, 3)).unwrap();
        assert!((entropy_volume_product(&scaled, &cfg()).unwrap() - p).abs() < 1e-10);
        let k4 = entropy_volume_product(&families::k4(ratio(1, 6)), &cfg()).unwrap();
        assert!((k4 - 6.0 * 2f64.ln()).abs() < 1e-10);
    }
}
