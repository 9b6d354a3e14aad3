//! Parameter sweeps and the cube-root law.
//!
//! The void length of the single-layer problem scales as `(B/q)^{1/3}`. The
//! sweep harness solves the contact problem across a pressure range and fits
//! the exponent of `void_length` against `q`, `B` or `B/q` by least squares
//! in log-log coordinates; the fitted slope must come out at `-1/3` (for `q`)
//! to within a few percent for the nonlinear solver, and to three decimals
//! for the linearized one.

use rayon::prelude::*;

use crate::elastica::{ElasticaProblem, Mode};
use crate::error::ScalingError;
use crate::linearized::LinearizedContact;
use crate::obstacle::ObstacleProfile;
use crate::solver::{self, SolverOptions};

/// Sweep template: everything but the pressure.
#[derive(Debug, Clone, Copy)]
pub struct SweepTemplate {
    pub stiffness: f64,
    pub slope: f64,
    pub mode: Mode,
    /// Domain half-width; `None` sizes it as three linearized half-lengths
    /// of the smallest pressure in the sweep.
    pub half_width: Option<f64>,
    /// Minimum number of grid nodes across the predicted void of each run.
    pub min_void_nodes: usize,
}

impl SweepTemplate {
    pub fn new(stiffness: f64, slope: f64, mode: Mode) -> Self {
        Self {
            stiffness,
            slope,
            mode,
            half_width: None,
            min_void_nodes: 80,
        }
    }
}

/// One solved point of a sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepRecord {
    pub stiffness: f64,
    pub pressure: f64,
    pub slope: f64,
    pub void_length: f64,
    pub corner_gap: f64,
    pub total_energy: f64,
    pub converged: bool,
}

/// Which parameter the exponent is fitted against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Independent {
    /// Expect `-1/3`.
    Pressure,
    /// Expect `+1/3`.
    Stiffness,
    /// Expect `+1/3`.
    StiffnessOverPressure,
}

/// Least-squares fit of `log(void_length)` against the log of the chosen
/// parameter.
#[derive(Debug, Clone, Copy)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Geometrically spaced values from `lo` to `hi` inclusive.
pub fn geometric_range(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && lo > 0.0 && hi > lo);
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (ratio * i as f64).exp()).collect()
}

/// Solve the template once per pressure value.
///
/// Entries are independent jobs run on a work pool; records come back in
/// input order and are bitwise identical regardless of thread count.
/// Non-converged runs are flagged in the record, never dropped.
pub fn run_sweep(
    template: &SweepTemplate,
    q_values: &[f64],
    threads: Option<usize>,
) -> Result<Vec<SweepRecord>, ScalingError> {
    let q_min = q_values.iter().cloned().fold(f64::INFINITY, f64::min);
    // negated form also rejects NaN and empty sweeps
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(q_min > 0.0) {
        return Err(ScalingError::Model(crate::error::ModelError::NonPositive {
            name: "pressure",
            value: q_min,
        }));
    }
    let widest = LinearizedContact::new(template.stiffness, q_min, template.slope)?;
    let half_width = template.half_width.unwrap_or(3.0 * widest.half_length());

    let solve_one = |&q: &f64| -> SweepRecord { solve_point(template, q, half_width) };

    let records = match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .expect("thread pool");
            pool.install(|| q_values.par_iter().map(solve_one).collect())
        }
        None => q_values.par_iter().map(solve_one).collect(),
    };
    Ok(records)
}

fn solve_point(template: &SweepTemplate, pressure: f64, half_width: f64) -> SweepRecord {
    let failed = |converged: bool| SweepRecord {
        stiffness: template.stiffness,
        pressure,
        slope: template.slope,
        void_length: 0.0,
        corner_gap: 0.0,
        total_energy: f64::NAN,
        converged,
    };
    let predicted = match LinearizedContact::new(template.stiffness, pressure, template.slope) {
        Ok(c) => c.half_length(),
        Err(_) => return failed(false),
    };
    let n_nodes = solver::nodes_for(half_width, predicted, template.min_void_nodes);
    let problem = ObstacleProfile::new(template.slope, half_width).and_then(|v| {
        ElasticaProblem::new(template.stiffness, pressure, v, n_nodes, template.mode)
    });
    let problem = match problem {
        Ok(p) => p,
        Err(_) => return failed(false),
    };
    match solver::solve(&problem, &SolverOptions::default()) {
        Ok(sol) => {
            let void = sol.void_interval_default();
            let mid = problem.grid().mid();
            let corner_gap = sol.displacement().values()[mid];
            SweepRecord {
                stiffness: template.stiffness,
                pressure,
                slope: template.slope,
                void_length: void.as_ref().map(|v| v.length).unwrap_or(f64::NAN),
                corner_gap,
                total_energy: sol.energy().total,
                converged: sol.converged() && void.is_ok(),
            }
        }
        Err(_) => failed(false),
    }
}

/// Ordinary least squares of `log(void_length)` against the log of the
/// chosen independent parameter. Non-converged or nonpositive-length records
/// are excluded; fewer than five usable points refuses the fit.
pub fn fit_exponent(
    records: &[SweepRecord],
    independent: Independent,
) -> Result<ScalingFit, ScalingError> {
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.converged && r.void_length > 0.0)
        .map(|r| {
            let x = match independent {
                Independent::Pressure => r.pressure,
                Independent::Stiffness => r.stiffness,
                Independent::StiffnessOverPressure => r.stiffness / r.pressure,
            };
            (x.ln(), r.void_length.ln())
        })
        .collect();
    let n = points.len();
    if n < 5 {
        return Err(ScalingError::TooFewPoints { min: 5, got: n });
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let exponent = sxy / sxx;
    let intercept = mean_y - exponent * mean_x;
    let ssr: f64 = points
        .iter()
        .map(|p| (p.1 - (intercept + exponent * p.0)).powi(2))
        .sum();
    let variance = if n > 2 { ssr / (n - 2) as f64 } else { 0.0 };
    Ok(ScalingFit {
        exponent,
        intercept,
        stderr: (variance / sxx).sqrt(),
        r_squared: 1.0 - ssr / syy.max(f64::MIN_POSITIVE),
        n_points: n,
    })
}
