//! A stack of layers forced into the V-shaped obstacle.
//!
//! `K` layers of stiffness `B` and thickness `t` sit over the obstacle under
//! pressure `q` on the top layer. The stack minimizes
//!
//! ```text
//!   Σ_j bending(w^j)  +  q ∫ (w^K - f - (K-1)·t) dx
//! ```
//!
//! subject to ordered non-penetration: `w^1 ≥ f` and, nodewise,
//! `w^j ≥ w^{j-1} + t·sqrt(1 + s²)` where `s` is the slope of the layer
//! below. The `sec θ` spacing approximates perpendicular thickness
//! preservation; it is exactly this correction that makes tight stacking
//! impossible around the corner and forces the stack to choose between voids
//! at every interface and voids between packets. The slopes are frozen per
//! outer round so each constraint is an affine offset, and the solve runs in
//! interface-gap coordinates `u^j = w^j - w^{j-1} - c_j` (with `u^1` the gap
//! against the obstacle), where the constraints are the plain box `u ≥ 0`
//! and the same projected, bending-metric-scaled descent as the single-layer
//! solver applies — the metric system is banded with bandwidth `3K-1` in
//! node-major ordering.
//!
//! The module also carries the packet-size energy balance: a pack of `n`
//! layers bending together into the corner pays void energy once per pack
//! but mismatch energy growing with pack thickness, so the per-layer cost
//!
//! ```text
//!   e(n) = c_void · q^{1/3} (nB)^{2/3} m^{5/3} / n  +  c_bend · B m³ · n
//! ```
//!
//! has an interior optimal pack size for balanced coefficients.

use crate::banded::BandedSystem;
use crate::descent::{self, DescentError, DescentOptions, DescentProblem};
use crate::elastica::{pressure_weight, DiscreteField, ElasticaProblem, Grid, Mode};
use crate::error::{ModelError, MultilayerError, SolveError};
use crate::linearized::LinearizedContact;
use crate::obstacle::ObstacleProfile;
use crate::solver::{self, contiguous_runs, scaled_descent, Acceleration, SolverOptions, CLAMP};

/// A `K`-layer contact problem.
#[derive(Debug, Clone, Copy)]
pub struct MultilayerProblem {
    n_layers: usize,
    stiffness: f64,
    thickness: f64,
    pressure: f64,
    obstacle: ObstacleProfile,
    n_nodes: usize,
    mode: Mode,
}

impl MultilayerProblem {
    pub fn new(
        n_layers: usize,
        stiffness: f64,
        thickness: f64,
        pressure: f64,
        obstacle: ObstacleProfile,
        n_nodes: usize,
        mode: Mode,
    ) -> Result<Self, MultilayerError> {
        if n_layers == 0 || n_layers > 16 {
            return Err(MultilayerError::LayerCount { got: n_layers });
        }
        if !thickness.is_finite() || thickness <= 0.0 {
            return Err(MultilayerError::NonPositive {
                name: "thickness",
                value: thickness,
            });
        }
        let m = obstacle.slope();
        let relief = m * obstacle.half_width();
        if m > 0.0 {
            let stack = (n_layers - 1) as f64 * thickness * (1.0 + m * m).sqrt();
            if stack >= relief {
                return Err(MultilayerError::StackTooTall {
                    layers: n_layers,
                    thickness,
                    relief,
                });
            }
        }
        // reuse the single-layer validation for B, q and the grid
        ElasticaProblem::new(stiffness, pressure, obstacle, n_nodes, mode)?;
        Ok(Self {
            n_layers,
            stiffness,
            thickness,
            pressure,
            obstacle,
            n_nodes,
            mode,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn stiffness(&self) -> f64 {
        self.stiffness
    }

    pub fn thickness(&self) -> f64 {
        self.thickness
    }

    pub fn pressure(&self) -> f64 {
        self.pressure
    }

    pub fn obstacle(&self) -> &ObstacleProfile {
        &self.obstacle
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.n_nodes, self.obstacle.half_width()).expect("validated in new")
    }

    fn as_single_layer(&self) -> ElasticaProblem {
        ElasticaProblem::new(
            self.stiffness,
            self.pressure,
            self.obstacle,
            self.n_nodes,
            self.mode,
        )
        .expect("validated in new")
    }
}

/// Options for [`solve_multilayer`].
#[derive(Debug, Clone, Copy)]
pub struct MultilayerOptions {
    pub solver: SolverOptions,
    /// Rounds of slope re-freezing.
    pub max_outer: usize,
    /// Relative change of the frozen offsets at which the outer loop stops.
    pub outer_tol: f64,
}

impl Default for MultilayerOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            max_outer: 50,
            outer_tol: 1e-8,
        }
    }
}

/// Converged stack: one displacement field per layer plus the frozen
/// interface offsets the solution satisfies.
#[derive(Debug, Clone)]
pub struct MultilayerSolution {
    problem: MultilayerProblem,
    fields: Vec<DiscreteField>,
    /// Interface gaps in solve coordinates; `gaps[0]` is layer 0 against the
    /// obstacle, `gaps[j]` is layer `j` against layer `j-1` minus the frozen
    /// spacing. Active constraints hold exact zeros.
    gaps: Vec<Vec<f64>>,
    /// `offsets[j]` is the frozen spacing requirement under layer `j`
    /// (interface `j`; interface 0 is the obstacle, with zero offset).
    offsets: Vec<Vec<f64>>,
    energy: f64,
    iterations: usize,
    outer_rounds: usize,
    converged: bool,
    residual: f64,
}

/// Per-interface void accounting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceVoids {
    /// 1-based interface index; 1 is layer-vs-obstacle.
    pub interface: usize,
    pub void_length: f64,
    pub void_area: f64,
    pub runs: usize,
}

/// Where the voids sit in the stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoidPattern {
    None,
    EveryInterface,
    /// Voids at every `p`-th interface.
    Periodic(usize),
    Single,
    Irregular,
}

/// Census of voids across all interfaces.
#[derive(Debug, Clone)]
pub struct VoidCensus {
    pub rows: Vec<InterfaceVoids>,
    pub pattern: VoidPattern,
}

impl VoidCensus {
    /// Build a census from raw per-interface gap fields on a grid of spacing
    /// `h`. Interfaces count as voided for the pattern when their total void
    /// length exceeds two grid cells.
    pub fn from_gap_fields(gaps: &[Vec<f64>], h: f64, gap_threshold: f64) -> Self {
        let rows: Vec<InterfaceVoids> = gaps
            .iter()
            .enumerate()
            .map(|(j, g)| summarize_interface(j + 1, g, h, gap_threshold))
            .collect();
        let pattern = classify_pattern(&rows, 2.0 * h);
        Self { rows, pattern }
    }
}

fn summarize_interface(interface: usize, gaps: &[f64], h: f64, threshold: f64) -> InterfaceVoids {
    let runs = contiguous_runs(gaps, threshold);
    let mut total_len = 0.0;
    let mut area = 0.0;
    let n = gaps.len();
    for &(a, b) in &runs {
        let mut len = (b - a) as f64 * h;
        if a > 0 {
            len += h * (1.0 - (threshold - gaps[a - 1]) / (gaps[a] - gaps[a - 1]));
        }
        if b + 1 < n {
            len += h * (1.0 - (threshold - gaps[b + 1]) / (gaps[b] - gaps[b + 1]));
        }
        total_len += len;
        for (i, &g) in gaps.iter().enumerate().take(b + 1).skip(a) {
            area += g * pressure_weight(i, n, h);
        }
    }
    InterfaceVoids {
        interface,
        void_length: total_len,
        void_area: area,
        runs: runs.len(),
    }
}

fn classify_pattern(rows: &[InterfaceVoids], min_length: f64) -> VoidPattern {
    let voided: Vec<usize> = rows
        .iter()
        .filter(|r| r.void_length > min_length)
        .map(|r| r.interface)
        .collect();
    if voided.is_empty() {
        return VoidPattern::None;
    }
    if voided.len() == rows.len() {
        return VoidPattern::EveryInterface;
    }
    if voided.len() == 1 {
        return VoidPattern::Single;
    }
    let step = voided[1] - voided[0];
    if step >= 2 && voided.windows(2).all(|w| w[1] - w[0] == step) {
        return VoidPattern::Periodic(step);
    }
    VoidPattern::Irregular
}

/// Stack energy in interface-gap coordinates, node-major layout
/// `u[(i, l)] = u[i*K + l]`: layer `a` sits at
/// `w^a = f + cum_a + Σ_{l ≤ a} u_l`.
struct StackGap {
    n: usize,
    k: usize,
    h: f64,
    mid: usize,
    stiffness: f64,
    pressure: f64,
    slope: f64,
    mode: Mode,
    /// Second differences and central slopes of the frozen offsets
    /// `cum[a][i]` of each layer above the obstacle, precomputed.
    cum_curv: Vec<Vec<f64>>,
    cum_slope: Vec<Vec<f64>>,
    /// Constant part of the pressure term, `q·Σ ω (cum_top - (K-1)t)`.
    pressure_offset: f64,
}

impl StackGap {
    fn new(problem: &MultilayerProblem, cum: Vec<Vec<f64>>) -> Self {
        let grid = problem.grid();
        let n = grid.len();
        let k = problem.n_layers();
        let h = grid.spacing();
        let mut cum_curv = Vec::with_capacity(k);
        let mut cum_slope = Vec::with_capacity(k);
        for c in &cum {
            let mut d2 = vec![0.0; n];
            let mut d1 = vec![0.0; n];
            for j in 1..n - 1 {
                d2[j] = (c[j + 1] - 2.0 * c[j] + c[j - 1]) / (h * h);
                d1[j] = (c[j + 1] - c[j - 1]) / (2.0 * h);
            }
            cum_curv.push(d2);
            cum_slope.push(d1);
        }
        let t = problem.thickness();
        let mut pressure_offset = 0.0;
        for i in 0..n {
            pressure_offset += pressure_weight(i, n, h) * (cum[k - 1][i] - (k - 1) as f64 * t);
        }
        pressure_offset *= problem.pressure();
        Self {
            n,
            k,
            h,
            mid: grid.mid(),
            stiffness: problem.stiffness(),
            pressure: problem.pressure(),
            slope: problem.obstacle().slope(),
            mode: problem.mode(),

            cum_curv,
            cum_slope,
            pressure_offset,
        }
    }

    #[inline]
    fn base_curvature(&self, j: usize) -> f64 {
        if j == self.mid {
            2.0 * self.slope / self.h
        } else {
            0.0
        }
    }

    #[inline]
    fn base_slope(&self, j: usize) -> f64 {
        match j.cmp(&self.mid) {
            std::cmp::Ordering::Less => -self.slope,
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Greater => self.slope,
        }
    }

    #[inline]
    fn tau(&self, j: usize) -> f64 {
        if j == 1 || j == self.n - 2 {
            0.5 * self.h
        } else {
            self.h
        }
    }

    /// Running sums `P_a(i) = Σ_{l≤a} u[(i,l)]` for one layer at a time.
    fn layer_profile(&self, u: &[f64], a: usize, out: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for l in 0..=a {
                acc += u[i * self.k + l];
            }
            out[i] = acc;
        }
    }

    fn curvature_and_slope(&self, profile: &[f64], a: usize, j: usize) -> (f64, f64) {
        let h = self.h;
        let d = (profile[j + 1] - 2.0 * profile[j] + profile[j - 1]) / (h * h)
            + self.base_curvature(j)
            + self.cum_curv[a][j];
        let s = (profile[j + 1] - profile[j - 1]) / (2.0 * h)
            + self.base_slope(j)
            + self.cum_slope[a][j];
        (d, s)
    }

    /// Gauss-Newton curvature weight of layer `a` at interior node `j`.
    fn metric_weight(&self, profile: &[f64], a: usize, j: usize) -> f64 {
        if j == 0 || j >= self.n - 1 {
            return 0.0;
        }
        match self.mode {
            Mode::Linearized => self.tau(j),
            Mode::Nonlinear => {
                let (_, s) = self.curvature_and_slope(profile, a, j);
                self.tau(j) * (1.0 + s * s).powf(-2.5)
            }
        }
    }
}

impl DescentProblem for StackGap {
    fn energy(&self, u: &[f64]) -> f64 {
        let (n, k) = (self.n, self.k);
        let mut profile = vec![0.0; n];
        let mut total = self.pressure_offset;
        for a in 0..k {
            for i in 0..n {
                profile[i] += u[i * k + a];
            }
            let mut bending = 0.0;
            for j in 1..n - 1 {
                let (d, s) = self.curvature_and_slope(&profile, a, j);
                bending += self.tau(j)
                    * match self.mode {
                        Mode::Linearized => d * d,
                        Mode::Nonlinear => d * d * (1.0 + s * s).powf(-2.5),
                    };
            }
            total += 0.5 * self.stiffness * bending;
        }
        // pressure acts on the top profile
        for i in 0..n {
            total += self.pressure * pressure_weight(i, n, self.h) * profile[i];
        }
        total
    }

    fn gradient(&self, u: &[f64], g: &mut [f64]) {
        let (n, k, h) = (self.n, self.k, self.h);
        g.fill(0.0);
        let mut profile = vec![0.0; n];
        let mut layer_grad = vec![0.0; n];
        // suffix sums over layers: dE/du_l = Σ_{a≥l} dE/dP_a
        let mut suffix = vec![0.0; n];
        let inv_h2 = 1.0 / (h * h);
        for a in (0..k).rev() {
            self.layer_profile(u, a, &mut profile);
            layer_grad.fill(0.0);
            for j in 1..n - 1 {
                let tau = self.tau(j);
                let (d, s) = self.curvature_and_slope(&profile, a, j);
                match self.mode {
                    Mode::Linearized => {
                        let c = self.stiffness * tau * d * inv_h2;
                        layer_grad[j - 1] += c;
                        layer_grad[j] -= 2.0 * c;
                        layer_grad[j + 1] += c;
                    }
                    Mode::Nonlinear => {
                        let one_s2 = 1.0 + s * s;
                        let phi = one_s2.powf(-2.5);
                        let dphi = -5.0 * s * one_s2.powf(-3.5);
                        let c = self.stiffness * tau * d * phi * inv_h2;
                        layer_grad[j - 1] += c;
                        layer_grad[j] -= 2.0 * c;
                        layer_grad[j + 1] += c;
                        let cs = 0.5 * self.stiffness * tau * d * d * dphi / (2.0 * h);
                        layer_grad[j - 1] -= cs;
                        layer_grad[j + 1] += cs;
                    }
                }
            }
            if a == k - 1 {
                for i in 0..n {
                    layer_grad[i] += self.pressure * pressure_weight(i, n, h);
                }
            }
            for i in 0..n {
                suffix[i] += layer_grad[i];
                g[i * k + a] = suffix[i];
            }
        }
    }

    fn project(&self, u: &mut [f64]) {
        let (n, k) = (self.n, self.k);
        for i in 0..CLAMP {
            for l in 0..k {
                u[i * k + l] = 0.0;
                u[(n - 1 - i) * k + l] = 0.0;
            }
        }
        for i in CLAMP..n - CLAMP {
            for l in 0..k {
                let v = &mut u[i * k + l];
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
    }

    fn kkt_residual(&self, u: &[f64], g: &[f64]) -> f64 {
        let (n, k) = (self.n, self.k);
        let mut r = 0.0_f64;
        for i in CLAMP..n - CLAMP {
            for l in 0..k {
                let idx = i * k + l;
                let ri = if u[idx] <= 0.0 {
                    (-g[idx]).max(0.0)
                } else {
                    g[idx].abs()
                };
                r = r.max(ri);
            }
        }
        r
    }
}

/// Banded bending metric of the stack on the free set.
///
/// In gap coordinates the per-layer Hessians accumulate over all layers at
/// or above the interface, so entries only need suffix sums of the layer
/// weights; node-major ordering keeps the bandwidth at `3K-1`.
fn stack_metric(
    stack: &StackGap,
    u: &[f64],
    g: &[f64],
    free: &[usize],
    direction: &mut [f64],
) -> bool {
    let (n, k) = (stack.n, stack.k);
    let free: Vec<usize> = free
        .iter()
        .cloned()
        .filter(|idx| {
            let i = idx / k;
            i >= CLAMP && i < n - CLAMP
        })
        .collect();
    if free.is_empty() {
        return true;
    }
    let b = stack.stiffness;
    let h4 = stack.h.powi(4);

    // suffix sums of the Gauss-Newton weights over layers
    let mut profile = vec![0.0; n];
    let mut suffix_w = vec![vec![0.0; n]; k];
    for a in 0..k {
        for i in 0..n {
            profile[i] += u[i * k + a];
        }
        for j in 1..n - 1 {
            suffix_w[a][j] = stack.metric_weight(&profile, a, j);
        }
    }
    for a in (0..k.saturating_sub(1)).rev() {
        for j in 1..n - 1 {
            let upper = suffix_w[a + 1][j];
            suffix_w[a][j] += upper;
        }
    }

    let mut pos = vec![usize::MAX; n * k];
    for (r, &idx) in free.iter().enumerate() {
        pos[idx] = r;
    }
    let m = free.len();
    let bandwidth = (3 * k - 1).min(m - 1);
    let mut sys = BandedSystem::zeros(m, bandwidth);

    let weight_at = |c: usize, j: isize| -> f64 {
        if j < 1 || j as usize >= n - 1 {
            0.0
        } else {
            suffix_w[c][j as usize]
        }
    };

    for (r, &idx) in free.iter().enumerate() {
        let i = idx / k;
        let l = idx % k;
        for di in -2_isize..=0 {
            let i2 = i as isize + di;
            if i2 < 0 {
                continue;
            }
            let i2 = i2 as usize;
            for l2 in 0..k {
                let idx2 = i2 * k + l2;
                if idx2 > idx {
                    continue;
                }
                let s = pos[idx2];
                if s == usize::MAX || s > r {
                    continue;
                }
                let c = l.max(l2);
                let entry = match i - i2 {
                    0 => {
                        (weight_at(c, i as isize - 1)
                            + 4.0 * weight_at(c, i as isize)
                            + weight_at(c, i as isize + 1))
                            * b
                            / h4
                    }
                    1 => {
                        -2.0 * (weight_at(c, i2 as isize) + weight_at(c, i2 as isize + 1)) * b / h4
                    }
                    2 => weight_at(c, i2 as isize + 1) * b / h4,
                    _ => 0.0,
                };
                if entry != 0.0 && r - s <= bandwidth {
                    sys.add(r, s, entry);
                }
            }
        }
    }
    sys.regularize(1e-12 * sys.max_diagonal() + f64::MIN_POSITIVE);
    let mut rhs: Vec<f64> = free.iter().map(|&idx| -g[idx]).collect();
    if !sys.factorize() {
        return false;
    }
    sys.solve(&mut rhs);
    for (r, &idx) in free.iter().enumerate() {
        direction[idx] = rhs[r];
    }
    true
}

/// Minimize the stack energy under the ordered non-penetration constraints.
pub fn solve_multilayer(
    problem: &MultilayerProblem,
    opts: &MultilayerOptions,
) -> Result<MultilayerSolution, MultilayerError> {
    let grid = problem.grid();
    let n = grid.len();
    let k = problem.n_layers();
    let h = grid.spacing();
    let m = problem.obstacle().slope();
    let t = problem.thickness();
    let single = problem.as_single_layer();
    let floor = single.obstacle_heights();

    // K = 1 is exactly the single-layer problem; share its code path so the
    // reduction is bit-compatible.
    if k == 1 {
        let sol = solver::solve(&single, &opts.solver)?;
        let energy = sol.energy().total;
        let field = sol.displacement().clone();
        let gaps = sol.gaps().to_vec();
        return Ok(MultilayerSolution {
            problem: *problem,
            fields: vec![field],
            gaps: vec![gaps],
            offsets: vec![vec![0.0; n]],
            energy,
            iterations: sol.iterations(),
            outer_rounds: 0,
            converged: sol.converged(),
            residual: sol.residual(),
        });
    }

    // flat obstacle: the exact vertical stack is optimal
    if m == 0.0 {
        let fields: Vec<DiscreteField> = (0..k)
            .map(|j| DiscreteField::new(vec![j as f64 * t; n], h).expect("finite"))
            .collect();
        let mut offsets = vec![vec![0.0; n]];
        offsets.extend((1..k).map(|_| vec![t; n]));
        return Ok(MultilayerSolution {
            problem: *problem,
            fields,
            gaps: vec![vec![0.0; n]; k],
            offsets,
            energy: 0.0,
            iterations: 0,
            outer_rounds: 0,
            converged: true,
            residual: 0.0,
        });
    }

    // initial guess: the whole stack follows a collective bump at the scale
    // of a pack of K layers, carried entirely by the obstacle gap
    let collective = LinearizedContact::new(k as f64 * problem.stiffness(), problem.pressure(), m)
        .map_err(SolveError::from)?;
    let bump = opts.solver.initial_bump * m * collective.half_length();
    let mut u = vec![0.0; n * k];
    for i in 0..n {
        let r = grid.x(i) / collective.half_length();
        u[i * k] = bump * (-r * r).exp();
    }

    // initial frozen offsets from the initial profile of each layer
    let mut fields_w = vec![vec![0.0; n]; k];
    reconstruct(
        problem,
        &floor,
        &u,
        &flat_offsets(problem, n, k),
        &mut fields_w,
    );
    let mut offsets = frozen_offsets(&fields_w, h, t);

    let tol = opts.solver.tol_scale * problem.pressure() * grid.half_width() * m;
    let safe_step = h * h * h / (16.0 * problem.stiffness() * (k * k) as f64);

    let mut iterations = 0;
    let mut outer_rounds = 0;

    loop {
        outer_rounds += 1;
        let stack = StackGap::new(problem, cumulative(&offsets));
        let outcome = match opts.solver.acceleration {
            Acceleration::Scaled => scaled_descent(
                &stack,
                u,
                tol,
                opts.solver.max_iter,
                safe_step,
                stack_metric,
            )
            .map_err(MultilayerError::Solve)?,
            accel => descent::minimize(
                &stack,
                u,
                &DescentOptions {
                    max_iter: opts.solver.max_iter,
                    tol,
                    step0: safe_step,
                    accelerated: accel == Acceleration::Spectral,
                    memory: if accel == Acceleration::Spectral {
                        10
                    } else {
                        1
                    },
                },
            )
            .map_err(|e| match e {
                DescentError::NonFinite { iteration } => {
                    MultilayerError::Solve(SolveError::NumericalFailure { iteration })
                }
            })?,
        };
        u = outcome.x;
        iterations += outcome.iterations;

        reconstruct(problem, &floor, &u, &offsets, &mut fields_w);
        let next = frozen_offsets(&fields_w, h, t);
        let change = offsets
            .iter()
            .flatten()
            .zip(next.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / t;
        let settled = change <= opts.outer_tol;

        if !outcome.converged || settled || outer_rounds >= opts.max_outer {
            let stack = StackGap::new(problem, cumulative(&offsets));
            let energy = stack.energy(&u);
            let fields = fields_w
                .iter()
                .map(|v| DiscreteField::new(v.clone(), h))
                .collect::<Result<Vec<_>, ModelError>>()?;
            let gaps: Vec<Vec<f64>> = (0..k)
                .map(|l| (0..n).map(|i| u[i * k + l]).collect())
                .collect();
            let solution = MultilayerSolution {
                problem: *problem,
                fields,
                gaps,
                offsets,
                energy,
                iterations,
                outer_rounds,
                converged: outcome.converged && settled,
                residual: outcome.residual,
            };
            if !outcome.converged {
                return Err(MultilayerError::NoConvergence {
                    residual: outcome.residual,
                    tolerance: tol,
                    best: Box::new(solution),
                });
            }
            if !settled {
                return Err(MultilayerError::OuterLoop {
                    max_outer: opts.max_outer,
                    change,
                    best: Box::new(solution),
                });
            }
            return Ok(solution);
        }
        // keep the displacements as the warm start: gaps shift by the
        // offset update at each interface
        for l in 0..k {
            for i in 0..n {
                u[i * k + l] += offsets[l][i] - next[l][i];
            }
        }
        offsets = next;
    }
}

/// Displacements from gap coordinates: `w^a = f + cum_a + Σ_{l≤a} u_l`.
fn reconstruct(
    problem: &MultilayerProblem,
    floor: &[f64],
    u: &[f64],
    offsets: &[Vec<f64>],
    fields: &mut [Vec<f64>],
) {
    let n = floor.len();
    let k = problem.n_layers();
    let cum = cumulative(offsets);
    for i in 0..n {
        let mut acc = 0.0;
        for (a, field) in fields.iter_mut().enumerate() {
            acc += u[i * k + a];
            field[i] = floor[i] + cum[a][i] + acc;
        }
    }
}

/// Tight-stack offsets before any slopes are known: plain `t·sec(m)`.
fn flat_offsets(problem: &MultilayerProblem, n: usize, k: usize) -> Vec<Vec<f64>> {
    let m = problem.obstacle().slope();
    let sec = problem.thickness() * (1.0 + m * m).sqrt();
    let mut offsets = vec![vec![0.0; n]];
    offsets.extend((1..k).map(|_| vec![sec; n]));
    offsets
}

/// Interface offsets `c_j(i) = t·sqrt(1 + s²)` from the current slopes of
/// the layer below each interface. `offsets[0]` is the obstacle interface
/// (zero).
fn frozen_offsets(fields: &[Vec<f64>], h: f64, t: f64) -> Vec<Vec<f64>> {
    let n = fields[0].len();
    let mut offsets = Vec::with_capacity(fields.len());
    offsets.push(vec![0.0; n]);
    for below in &fields[..fields.len() - 1] {
        let c = (0..n)
            .map(|i| {
                let s = if i == 0 {
                    (below[1] - below[0]) / h
                } else if i == n - 1 {
                    (below[n - 1] - below[n - 2]) / h
                } else {
                    (below[i + 1] - below[i - 1]) / (2.0 * h)
                };
                t * (1.0 + s * s).sqrt()
            })
            .collect();
        offsets.push(c);
    }
    offsets
}

fn cumulative(offsets: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = offsets[0].len();
    let mut cum = Vec::with_capacity(offsets.len());
    let mut acc = vec![0.0; n];
    for c in offsets {
        for i in 0..n {
            acc[i] += c[i];
        }
        cum.push(acc.clone());
    }
    cum
}

impl MultilayerSolution {
    pub fn problem(&self) -> &MultilayerProblem {
        &self.problem
    }

    pub fn fields(&self) -> &[DiscreteField] {
        &self.fields
    }

    /// Frozen spacing requirement under layer `j` (interface `j`, 0-based;
    /// 0 is the obstacle with zero offset).
    pub fn offsets(&self) -> &[Vec<f64>] {
        &self.offsets
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn outer_rounds(&self) -> usize {
        self.outer_rounds
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Gap at interface `j` (0-based): layer 0 against the obstacle, layer
    /// `j` against layer `j-1` minus the frozen spacing. Exact zeros on
    /// active constraints.
    pub fn interface_gaps(&self, j: usize) -> &[f64] {
        &self.gaps[j]
    }

    /// Per-interface void census at the given gap threshold.
    pub fn void_census(&self, gap_threshold: f64) -> VoidCensus {
        VoidCensus::from_gap_fields(&self.gaps, self.problem.grid().spacing(), gap_threshold)
    }

    /// Census at the default threshold of the equivalent single-layer
    /// problem.
    pub fn void_census_default(&self) -> VoidCensus {
        self.void_census(solver::default_gap_threshold(
            &self.problem.as_single_layer(),
        ))
    }

    /// Interface contact pressures from the stationarity residual: the
    /// multiplier of interface `j` is the accumulated gradient of all layers
    /// at and above it, which is exactly the gap-coordinate gradient.
    pub fn interface_multipliers(&self) -> Vec<Vec<f64>> {
        let n = self.fields[0].len();
        let k = self.problem.n_layers();
        let h = self.problem.grid().spacing();
        let stack = StackGap::new(&self.problem, cumulative(&self.offsets));
        let mut u = vec![0.0; n * k];
        for (l, gap) in self.gaps.iter().enumerate() {
            for i in 0..n {
                u[i * k + l] = gap[i];
            }
        }
        let mut g = vec![0.0; n * k];
        stack.gradient(&u, &mut g);
        (0..k)
            .map(|l| {
                (0..n)
                    .map(|i| g[i * k + l] / pressure_weight(i, n, h))
                    .collect()
            })
            .collect()
    }

    /// Largest normalized KKT residual across interfaces: feasibility,
    /// stationarity off the contact set, multiplier sign on it, and
    /// complementarity.
    pub fn kkt_report(&self) -> f64 {
        let n = self.fields[0].len();
        let k = self.problem.n_layers();
        let q = self.problem.pressure();
        let grid = self.problem.grid();
        let fscale =
            q * grid.half_width() * self.problem.obstacle().slope().max(1.0 / grid.half_width());
        let mult = self.interface_multipliers();
        let feas_tol = self.problem.as_single_layer().feasibility_tol();
        let escale = fscale * grid.half_width();
        let h = grid.spacing();
        let mut worst = 0.0_f64;
        for j in 0..k {
            let gaps = &self.gaps[j];
            for i in CLAMP..n - CLAMP {
                worst = worst.max(-gaps[i] / feas_tol);
                let force = mult[j][i] * pressure_weight(i, n, h);
                if gaps[i] > 0.0 {
                    // inactive: stationarity and complementarity
                    worst = worst.max(force.abs() / fscale);
                    worst = worst.max(force.abs() * gaps[i] / escale);
                } else {
                    worst = worst.max(-mult[j][i] / q);
                }
            }
        }
        worst
    }
}

/// Coefficients of the packet energy balance; config inputs, not fitted.
#[derive(Debug, Clone, Copy)]
pub struct PacketCoeffs {
    pub void_coeff: f64,
    pub bend_coeff: f64,
}

/// Problem scales entering the packet energy.
#[derive(Debug, Clone, Copy)]
pub struct PacketParams {
    pub stiffness: f64,
    pub pressure: f64,
    pub slope: f64,
}

/// Per-layer energy of deforming in packs of `n`: the void cost of one pack
/// (a single elastica of stiffness `nB` in the V) amortized over its layers,
/// plus an intra-pack mismatch cost growing with pack thickness.
pub fn packet_energy(
    n: usize,
    coeffs: &PacketCoeffs,
    params: &PacketParams,
) -> Result<f64, ModelError> {
    if n < 1 {
        return Err(ModelError::NonPositive {
            name: "packet_size",
            value: n as f64,
        });
    }
    for (name, value) in [
        ("void_coeff", coeffs.void_coeff),
        ("bend_coeff", coeffs.bend_coeff),
    ] {
        if !value.is_finite() || value < 0.0 {
            return Err(ModelError::NonPositive { name, value });
        }
    }
    let nf = n as f64;
    let void = coeffs.void_coeff
        * params.pressure.powf(1.0 / 3.0)
        * (nf * params.stiffness).powf(2.0 / 3.0)
        * params.slope.powf(5.0 / 3.0)
        / nf;
    let mismatch = coeffs.bend_coeff * params.stiffness * params.slope.powi(3) * nf;
    Ok(void + mismatch)
}

/// Result of the integer packet-size scan.
#[derive(Debug, Clone, Copy)]
pub struct PacketOptimum {
    pub n_star: usize,
    pub energy: f64,
    pub at_lower_bound: bool,
    pub at_upper_bound: bool,
}

impl PacketOptimum {
    /// True when the optimum is strictly between 1 and `n_max`.
    pub fn is_interior(&self) -> bool {
        !self.at_lower_bound && !self.at_upper_bound
    }
}

/// Exhaustive argmin of [`packet_energy`] over `1..=n_max`; ties break
/// toward the smaller packet, and hitting either boundary is flagged.
pub fn optimal_packet(
    coeffs: &PacketCoeffs,
    params: &PacketParams,
    n_max: usize,
) -> Result<PacketOptimum, ModelError> {
    assert!(n_max >= 2, "scan needs n_max >= 2");
    let mut n_star = 1;
    let mut best = packet_energy(1, coeffs, params)?;
    for n in 2..=n_max {
        let e = packet_energy(n, coeffs, params)?;
        if e < best {
            best = e;
            n_star = n;
        }
    }
    Ok(PacketOptimum {
        n_star,
        energy: best,
        at_lower_bound: n_star == 1,
        at_upper_bound: n_star == n_max,
    })
}
