//! Discrete energies of an elastic layer over the obstacle.
//!
//! A single layer is the graph of a vertical displacement `w` on `[-X, X]`.
//! Its energy under overburden pressure `q` is
//!
//! ```text
//!   V(w) = (B/2) ∫ w_xx² / (1 + w_x²)^{5/2} dx  +  q ∫ (w - f) dx,    w ≥ f,
//! ```
//!
//! the first term being the bending energy of an elastica written for a graph
//! and the second the work done against the pressure to open voids. The
//! linearized mode drops the slope correction, i.e. uses `(B/2) ∫ w_xx² dx`.
//!
//! Discretization: uniform grid with an odd node count so the obstacle corner
//! is a grid node, second-order central differences for `w_x` and `w_xx`, and
//! the trapezoid rule for both integrals (over the interior nodes for the
//! bending term, where curvature is defined).

use crate::error::ModelError;
use crate::obstacle::ObstacleProfile;

/// Which bending integrand to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Full graph-elastica integrand `w_xx²/(1+w_x²)^{5/2}`.
    Nonlinear,
    /// Small-slope integrand `w_xx²`.
    Linearized,
}

/// Uniform grid on `[-X, X]`, symmetric about the corner node.
///
/// Nodes are generated as `x_i = X·(i - mid)/mid` with `mid = (n-1)/2`, which
/// makes the grid exactly mirror-symmetric in floating point and puts a node
/// exactly on the corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_nodes: usize,
    half_width: f64,
}

impl Grid {
    pub fn new(n_nodes: usize, half_width: f64) -> Result<Self, ModelError> {
        if n_nodes < 5 {
            return Err(ModelError::TooFewNodes {
                min: 5,
                got: n_nodes,
            });
        }
        if n_nodes.is_multiple_of(2) {
            return Err(ModelError::EvenNodeCount { got: n_nodes });
        }
        if !half_width.is_finite() || half_width <= 0.0 {
            return Err(ModelError::NonPositive {
                name: "half_width",
                value: half_width,
            });
        }
        Ok(Self {
            n_nodes,
            half_width,
        })
    }

    pub fn len(&self) -> usize {
        self.n_nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing `h = 2X/(n-1)`.
    pub fn spacing(&self) -> f64 {
        self.half_width / self.mid() as f64
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Index of the corner node.
    pub fn mid(&self) -> usize {
        (self.n_nodes - 1) / 2
    }

    /// Node position; exactly antisymmetric about the corner node.
    pub fn x(&self, i: usize) -> f64 {
        let mid = self.mid() as f64;
        self.half_width * ((i as f64 - mid) / mid)
    }

    /// All node positions.
    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_nodes).map(|i| self.x(i)).collect()
    }
}

/// Nodal values of a field on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    values: Vec<f64>,
    spacing: f64,
}

impl DiscreteField {
    pub fn new(values: Vec<f64>, spacing: f64) -> Result<Self, ModelError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteField);
        }
        if !spacing.is_finite() || spacing <= 0.0 {
            return Err(ModelError::NonPositive {
                name: "spacing",
                value: spacing,
            });
        }
        Ok(Self { values, spacing })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[cfg(test)]
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// A single-layer contact problem: stiffness, pressure, obstacle and grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticaProblem {
    stiffness: f64,
    pressure: f64,
    obstacle: ObstacleProfile,
    grid: Grid,
    mode: Mode,
}

impl ElasticaProblem {
    pub fn new(
        stiffness: f64,
        pressure: f64,
        obstacle: ObstacleProfile,
        n_nodes: usize,
        mode: Mode,
    ) -> Result<Self, ModelError> {
        if !stiffness.is_finite() || stiffness <= 0.0 {
            return Err(ModelError::NonPositive {
                name: "stiffness",
                value: stiffness,
            });
        }
        // q = 0 makes the void length diverge; the scaling is vacuous there.
        if !pressure.is_finite() || pressure <= 0.0 {
            return Err(ModelError::NonPositive {
                name: "pressure",
                value: pressure,
            });
        }
        let grid = Grid::new(n_nodes, obstacle.half_width())?;
        Ok(Self {
            stiffness,
            pressure,
            obstacle,
            grid,
            mode,
        })
    }

    pub fn stiffness(&self) -> f64 {
        self.stiffness
    }

    pub fn pressure(&self) -> f64 {
        self.pressure
    }

    pub fn obstacle(&self) -> &ObstacleProfile {
        &self.obstacle
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Feasibility tolerance, relative to the problem size.
    pub fn feasibility_tol(&self) -> f64 {
        1e-10 * f64::max(1.0, self.obstacle.slope() * self.grid.half_width())
    }

    /// Obstacle heights sampled on the grid.
    pub fn obstacle_heights(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| self.obstacle.height_unchecked(self.grid.x(i)))
            .collect()
    }

    /// Bending energy of `w` in this problem's mode.
    pub fn bending_energy(&self, w: &DiscreteField) -> Result<f64, ModelError> {
        self.check_field(w)?;
        bending_energy(w, self.stiffness, self.mode)
    }

    /// Pressure energy `q ∫ (w - f) dx` of `w`.
    pub fn pressure_energy(&self, w: &DiscreteField) -> Result<f64, ModelError> {
        self.check_field(w)?;
        pressure_energy(w, &self.obstacle, self.pressure)
    }

    /// Both energy terms; `total = bending + pressure` exactly.
    pub fn total_energy(&self, w: &DiscreteField) -> Result<EnergyBreakdown, ModelError> {
        let bending = self.bending_energy(w)?;
        let pressure = self.pressure_energy(w)?;
        Ok(EnergyBreakdown {
            bending,
            pressure,
            total: bending + pressure,
        })
    }

    /// Exact gradient of the discrete total energy with respect to every
    /// nodal value (not a discretized Euler-Lagrange operator).
    pub fn energy_gradient(&self, w: &DiscreteField) -> Result<DiscreteField, ModelError> {
        self.check_field(w)?;
        let mut g = vec![0.0; w.len()];
        add_bending_gradient(w.values(), w.spacing(), self.stiffness, self.mode, &mut g);
        add_pressure_gradient(w.len(), w.spacing(), self.pressure, &mut g);
        DiscreteField::new(g, w.spacing())
    }

    fn check_field(&self, w: &DiscreteField) -> Result<(), ModelError> {
        if w.len() != self.grid.len() {
            return Err(ModelError::LengthMismatch {
                expected: self.grid.len(),
                got: w.len(),
            });
        }
        let h = self.grid.spacing();
        if (w.spacing() - h).abs() > 1e-12 * h {
            return Err(ModelError::SpacingMismatch {
                expected: h,
                got: w.spacing(),
            });
        }
        Ok(())
    }
}

/// Energy split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub bending: f64,
    pub pressure: f64,
    pub total: f64,
}

/// Trapezoid weight of interior node `j` for the bending quadrature on
/// `[x_1, x_{n-2}]`.
#[inline]
fn bending_weight(j: usize, n: usize, h: f64) -> f64 {
    if j == 1 || j == n - 2 {
        0.5 * h
    } else {
        h
    }
}

/// Trapezoid weight of node `i` for the pressure quadrature on `[-X, X]`.
#[inline]
pub(crate) fn pressure_weight(i: usize, n: usize, h: f64) -> f64 {
    if i == 0 || i == n - 1 {
        0.5 * h
    } else {
        h
    }
}

/// Bending energy of a standalone field: `(B/2) ∫ w_xx²/(1+w_x²)^{5/2} dx`
/// (nonlinear) or `(B/2) ∫ w_xx² dx` (linearized), trapezoid rule over the
/// interior nodes with second-order central differences.
pub fn bending_energy(w: &DiscreteField, stiffness: f64, mode: Mode) -> Result<f64, ModelError> {
    let n = w.len();
    if n < 3 {
        return Err(ModelError::TooFewNodes { min: 3, got: n });
    }
    let h = w.spacing();
    let v = w.values();
    let mut sum = 0.0;
    for j in 1..n - 1 {
        let d = (v[j + 1] - 2.0 * v[j] + v[j - 1]) / (h * h);
        let integrand = match mode {
            Mode::Linearized => d * d,
            Mode::Nonlinear => {
                let s = (v[j + 1] - v[j - 1]) / (2.0 * h);
                d * d * (1.0 + s * s).powf(-2.5)
            }
        };
        sum += bending_weight(j, n, h) * integrand;
    }
    Ok(0.5 * stiffness * sum)
}

/// Pressure energy `q ∫ (w - f) dx` by the trapezoid rule over `[-X, X]`.
///
/// Expects `w` to be sampled on the obstacle's own symmetric grid.
pub fn pressure_energy(
    w: &DiscreteField,
    obstacle: &ObstacleProfile,
    pressure: f64,
) -> Result<f64, ModelError> {
    let n = w.len();
    if n < 3 {
        return Err(ModelError::TooFewNodes { min: 3, got: n });
    }
    let span = w.spacing() * (n - 1) as f64;
    let width = 2.0 * obstacle.half_width();
    if (span - width).abs() > 1e-9 * width {
        return Err(ModelError::SpacingMismatch {
            expected: width / (n - 1) as f64,
            got: w.spacing(),
        });
    }
    let grid = Grid::new(n, obstacle.half_width())?;
    let h = grid.spacing();
    let v = w.values();
    let mut sum = 0.0;
    for i in 0..n {
        let gap = v[i] - obstacle.height_unchecked(grid.x(i));
        sum += pressure_weight(i, n, h) * gap;
    }
    Ok(pressure * sum)
}

/// Accumulate the exact gradient of the discrete bending energy into `g`.
pub(crate) fn add_bending_gradient(v: &[f64], h: f64, stiffness: f64, mode: Mode, g: &mut [f64]) {
    let n = v.len();
    let inv_h2 = 1.0 / (h * h);
    for j in 1..n - 1 {
        let tau = bending_weight(j, n, h);
        let d = (v[j + 1] - 2.0 * v[j] + v[j - 1]) * inv_h2;
        match mode {
            Mode::Linearized => {
                let c = stiffness * tau * d * inv_h2;
                g[j - 1] += c;
                g[j] -= 2.0 * c;
                g[j + 1] += c;
            }
            Mode::Nonlinear => {
                let s = (v[j + 1] - v[j - 1]) / (2.0 * h);
                let one_s2 = 1.0 + s * s;
                let phi = one_s2.powf(-2.5);
                // d/ds of (1+s²)^{-5/2}
                let dphi = -5.0 * s * one_s2.powf(-3.5);
                let c = stiffness * tau * d * phi * inv_h2;
                g[j - 1] += c;
                g[j] -= 2.0 * c;
                g[j + 1] += c;
                let cs = 0.5 * stiffness * tau * d * d * dphi / (2.0 * h);
                g[j - 1] -= cs;
                g[j + 1] += cs;
            }
        }
    }
}

/// Accumulate the gradient of the pressure term (constant `q·ω_i`) into `g`.
pub(crate) fn add_pressure_gradient(n: usize, h: f64, pressure: f64, g: &mut [f64]) {
    for (i, gi) in g.iter_mut().enumerate() {
        *gi += pressure * pressure_weight(i, n, h);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn field_on(grid: &Grid, f: impl Fn(f64) -> f64) -> DiscreteField {
        let values = (0..grid.len()).map(|i| f(grid.x(i))).collect();
        DiscreteField::new(values, grid.spacing()).unwrap()
    }

    #[test]
    fn grid_is_exactly_symmetric() {
        let g = Grid::new(101, 3.7).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.x(i), -g.x(g.len() - 1 - i));
        }
        assert_eq!(g.x(g.mid()), 0.0);
        assert_eq!(g.x(0), -3.7);
    }

    #[test]
    fn zero_pressure_is_rejected() {
        // the void length diverges as q -> 0; the scaling law is vacuous
        let v = ObstacleProfile::new(1.0, 1.0).unwrap();
        assert!(ElasticaProblem::new(1.0, 0.0, v, 101, Mode::Linearized).is_err());
        assert!(ElasticaProblem::new(0.0, 1.0, v, 101, Mode::Linearized).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(
            Grid::new(4, 1.0),
            Err(ModelError::TooFewNodes { .. })
        ));
        assert!(matches!(
            Grid::new(6, 1.0),
            Err(ModelError::EvenNodeCount { .. })
        ));
        assert!(Grid::new(5, 1.0).is_ok());
    }

    #[test]
    fn flat_field_has_zero_bending() {
        let grid = Grid::new(101, 1.0).unwrap();
        let w = field_on(&grid, |_| 0.0);
        for mode in [Mode::Linearized, Mode::Nonlinear] {
            assert_eq!(bending_energy(&w, 2.0, mode).unwrap(), 0.0);
        }
    }

    #[test]
    fn affine_field_has_zero_bending() {
        let grid = Grid::new(101, 1.0).unwrap();
        let w = field_on(&grid, |x| 0.3 + 0.7 * x);
        for mode in [Mode::Linearized, Mode::Nonlinear] {
            let e = bending_energy(&w, 2.0, mode).unwrap();
            assert!(e.abs() < 1e-22, "affine bending {e}");
        }
    }

    #[test]
    fn parabola_matches_symbolic_integral() {
        // w = x²/2 on [-1, 1]: w_xx = 1, so (B/2)∫w_xx² = (2/2)·2 = 2.
        // The interior-node trapezoid rule misses the two outermost half
        // cells, an O(h) truncation of this constant-curvature edge case.
        let grid = Grid::new(2001, 1.0).unwrap();
        let w = field_on(&grid, |x| 0.5 * x * x);
        let e = bending_energy(&w, 2.0, Mode::Linearized).unwrap();
        let h = grid.spacing();
        assert!((e - 2.0).abs() <= 3.0 * h, "e = {e}");
    }

    #[test]
    fn bending_needs_three_nodes() {
        let w = DiscreteField::new(vec![0.0, 1.0], 0.5).unwrap();
        assert!(matches!(
            bending_energy(&w, 1.0, Mode::Linearized),
            Err(ModelError::TooFewNodes { .. })
        ));
    }

    #[test]
    fn pressure_energy_examples() {
        let v = ObstacleProfile::new(1.0, 1.0).unwrap();
        let grid = Grid::new(201, 1.0).unwrap();
        // zero pressure
        let w = field_on(&grid, |x| x.abs() + 0.5);
        assert_eq!(pressure_energy(&w, &v, 0.0).unwrap(), 0.0);
        // zero gap
        let w = field_on(&grid, |x| x.abs());
        assert_eq!(pressure_energy(&w, &v, 2.0).unwrap(), 0.0);
        // constant gap 1 over [-1, 1] at q = 2: exactly 4 (trapezoid is
        // exact for constants)
        let w = field_on(&grid, |x| x.abs() + 1.0);
        let e = pressure_energy(&w, &v, 2.0).unwrap();
        assert!((e - 4.0).abs() < 1e-12, "e = {e}");
    }

    #[test]
    fn total_energy_is_additive_and_zero_for_flat_degenerate() {
        let v = ObstacleProfile::new(0.0, 1.0).unwrap();
        let p = ElasticaProblem::new(1.0, 1.0, v, 101, Mode::Nonlinear).unwrap();
        let w = field_on(p.grid(), |_| 0.0);
        let e = p.total_energy(&w).unwrap();
        assert_eq!(e.total, 0.0);

        let v = ObstacleProfile::new(0.7, 2.0).unwrap();
        let p = ElasticaProblem::new(1.3, 0.9, v, 151, Mode::Nonlinear).unwrap();
        let w = field_on(p.grid(), |x| 0.7 * x.abs() + 0.1 * (1.0 + x).cos() + 0.2);
        let e = p.total_energy(&w).unwrap();
        assert_eq!(e.total, e.bending + e.pressure);
    }

    #[test]
    fn pressure_gradient_is_q_times_h_at_interior_nodes() {
        let v = ObstacleProfile::new(1.0, 1.0).unwrap();
        let q = 1.7;
        let p = ElasticaProblem::new(1.0, q, v, 101, Mode::Linearized).unwrap();
        let h = p.grid().spacing();
        let n = p.grid().len();
        let mut g = vec![0.0; n];
        add_pressure_gradient(n, h, q, &mut g);
        for (i, gi) in g.iter().enumerate() {
            let expect = if i == 0 || i == n - 1 {
                0.5 * q * h
            } else {
                q * h
            };
            assert!((gi - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn affine_field_zero_pressure_has_zero_interior_gradient() {
        let v = ObstacleProfile::new(1.0, 1.0).unwrap();
        let p = ElasticaProblem::new(1.0, 1.0, v, 101, Mode::Linearized).unwrap();
        let w = field_on(p.grid(), |x| 0.2 + 0.4 * x);
        let mut g = vec![0.0; w.len()];
        add_bending_gradient(
            w.values(),
            w.spacing(),
            p.stiffness(),
            Mode::Linearized,
            &mut g,
        );
        // zero up to the cancellation noise of the second differences
        for gi in &g {
            assert!(gi.abs() < 1e-9);
        }
    }

    /// Central finite differences of the discrete energy, the independent
    /// oracle for the analytic gradient.
    fn fd_gradient(p: &ElasticaProblem, w: &DiscreteField, step: f64) -> Vec<f64> {
        let mut g = vec![0.0; w.len()];
        let mut t = w.clone();
        for i in 0..w.len() {
            let orig = t.values()[i];
            t.values_mut()[i] = orig + step;
            let ep = p.total_energy(&t).unwrap().total;
            t.values_mut()[i] = orig - step;
            let em = p.total_energy(&t).unwrap().total;
            t.values_mut()[i] = orig;
            g[i] = (ep - em) / (2.0 * step);
        }
        g
    }

    fn random_smooth_field(grid: &Grid, rng: &mut StdRng, amplitude: f64) -> DiscreteField {
        let x0 = grid.half_width();
        let modes: Vec<(f64, f64)> = (1..=5)
            .map(|k| {
                let a: f64 = rng.random_range(-1.0..1.0);
                (a * amplitude / (k * k) as f64, k as f64)
            })
            .collect();
        field_on(grid, |x| {
            modes
                .iter()
                .map(|(a, k)| a * (k * std::f64::consts::PI * (x + x0) / (2.0 * x0)).sin())
                .sum()
        })
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let v = ObstacleProfile::new(0.8, 2.0).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        for mode in [Mode::Linearized, Mode::Nonlinear] {
            let p = ElasticaProblem::new(1.4, 0.9, v, 101, mode).unwrap();
            for _ in 0..5 {
                let w = random_smooth_field(p.grid(), &mut rng, 0.3);
                let g = p.energy_gradient(&w).unwrap();
                // step swept over a few decades; keep the best agreement
                let err = [1e-4, 3e-5, 1e-5, 3e-6, 1e-6, 3e-7, 1e-7]
                    .iter()
                    .map(|&s| {
                        let fd = fd_gradient(&p, &w, s);
                        let scale = fd.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
                        g.values()
                            .iter()
                            .zip(&fd)
                            .map(|(a, b)| (a - b).abs() / scale.max(1e-300))
                            .fold(0.0_f64, f64::max)
                    })
                    .fold(f64::INFINITY, f64::min);
                assert!(err <= 1e-6, "gradient mismatch {err:.3e} in {mode:?}");
            }
        }
    }

    #[test]
    fn nonlinear_bending_never_exceeds_linearized() {
        // (1+s²)^{-5/2} ≤ 1 pointwise, so the inequality holds per field.
        let mut rng = StdRng::seed_from_u64(11);
        let grid = Grid::new(101, 2.0).unwrap();
        for _ in 0..20 {
            let w = random_smooth_field(&grid, &mut rng, 1.0);
            let nl = bending_energy(&w, 1.0, Mode::Nonlinear).unwrap();
            let lin = bending_energy(&w, 1.0, Mode::Linearized).unwrap();
            assert!(nl <= lin + 1e-15 * lin.abs());
        }
    }

    #[test]
    fn total_energy_is_reflection_invariant() {
        let v = ObstacleProfile::new(0.6, 2.0).unwrap();
        let p = ElasticaProblem::new(1.0, 1.0, v, 101, Mode::Nonlinear).unwrap();
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..10 {
            let w = random_smooth_field(p.grid(), &mut rng, 0.5);
            let mut rev = w.values().to_vec();
            rev.reverse();
            let wr = DiscreteField::new(rev, w.spacing()).unwrap();
            let a = p.total_energy(&w).unwrap().total;
            let b = p.total_energy(&wr).unwrap().total;
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}
