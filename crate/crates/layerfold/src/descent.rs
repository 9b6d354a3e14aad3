//! Projected descent over nodal values.
//!
//! The feasible sets in this crate are simple in nodal coordinates (a bound
//! per node for one layer, an ordered chain per node for a stack), so
//! projection is exact and cheap and projected gradient descent applies. Two
//! variants share one loop:
//!
//! - plain: fixed trial step `1/L` with a monotone Armijo backtracking line
//!   search;
//! - accelerated: spectral (Barzilai-Borwein) trial steps with the
//!   nonmonotone Grippo-Lampariello-Lucidi line search.
//!
//! The caller supplies the objective, the projection (which must also pin any
//! clamped boundary nodes), and the KKT residual to converge on. Everything
//! is deterministic.

/// Objective, projection and optimality measure for one descent run.
pub(crate) trait DescentProblem {
    /// Energy at `x`.
    fn energy(&self, x: &[f64]) -> f64;
    /// Fill `g` with the energy gradient at `x`.
    fn gradient(&self, x: &[f64], g: &mut [f64]);
    /// Project `x` onto the feasible set (and re-pin fixed nodes).
    fn project(&self, x: &mut [f64]);
    /// Infinity norm of the KKT residual at a feasible `x` with gradient `g`.
    fn kkt_residual(&self, x: &[f64], g: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct DescentOptions {
    pub max_iter: usize,
    /// Convergence threshold on the KKT residual.
    pub tol: f64,
    /// Initial step, normally `1/L` for a gradient Lipschitz estimate `L`.
    pub step0: f64,
    pub accelerated: bool,
    /// Nonmonotone window (1 = monotone Armijo).
    pub memory: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct DescentOutcome {
    pub x: Vec<f64>,
    #[allow(dead_code)] // read by the engine tests
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum DescentError {
    /// Energy or step became non-finite during the line search.
    NonFinite { iteration: usize },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn minimize<P: DescentProblem>(
    problem: &P,
    x0: Vec<f64>,
    opts: &DescentOptions,
) -> Result<DescentOutcome, DescentError> {
    let n = x0.len();
    let mut x = x0;
    problem.project(&mut x);

    let mut g = vec![0.0; n];
    problem.gradient(&x, &mut g);
    let mut energy = problem.energy(&x);
    if !energy.is_finite() {
        return Err(DescentError::NonFinite { iteration: 0 });
    }

    let memory = opts.memory.max(1);
    let mut recent = vec![energy; 1];

    let mut trial = vec![0.0; n];
    let mut direction = vec![0.0; n];
    let mut x_prev = vec![0.0; n];
    let mut g_prev = vec![0.0; n];

    let mut step = opts.step0;
    let step_min = opts.step0 * 1e-12;
    let step_max = opts.step0 * 1e12;

    let mut residual = problem.kkt_residual(&x, &g);
    let mut iterations = 0;

    while residual > opts.tol && iterations < opts.max_iter {
        iterations += 1;

        // d = P(x - step * g) - x
        for i in 0..n {
            trial[i] = x[i] - step * g[i];
        }
        problem.project(&mut trial);
        for i in 0..n {
            direction[i] = trial[i] - x[i];
        }
        let slope = dot(&g, &direction);
        if slope >= 0.0 {
            // ascent or null direction: the step has collapsed onto the
            // active set; reset to the safe step and re-check optimality
            if slope == 0.0 {
                residual = problem.kkt_residual(&x, &g);
                if residual <= opts.tol {
                    break;
                }
            }
            step = opts.step0;
            continue;
        }

        let f_ref = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut lambda = 1.0;
        let mut accepted = false;
        let mut f_new = energy;
        for _ in 0..64 {
            for i in 0..n {
                trial[i] = x[i] + lambda * direction[i];
            }
            // re-projection guards rounding drift off the feasible set
            problem.project(&mut trial);
            f_new = problem.energy(&trial);
            if !f_new.is_finite() {
                return Err(DescentError::NonFinite {
                    iteration: iterations,
                });
            }
            if f_new <= f_ref + 1e-4 * lambda * slope {
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            // no progress possible at this step scale
            step = (step * 0.1).max(step_min);
            continue;
        }

        if opts.accelerated {
            x_prev.copy_from_slice(&x);
            g_prev.copy_from_slice(&g);
        }
        std::mem::swap(&mut x, &mut trial);
        energy = f_new;
        recent.push(energy);
        if recent.len() > memory {
            recent.remove(0);
        }

        problem.gradient(&x, &mut g);
        residual = problem.kkt_residual(&x, &g);

        if opts.accelerated {
            // Barzilai-Borwein step from the last displacement
            let mut ss = 0.0;
            let mut sy = 0.0;
            for i in 0..n {
                let s = x[i] - x_prev[i];
                let y = g[i] - g_prev[i];
                ss += s * s;
                sy += s * y;
            }
            step = if sy > 0.0 {
                (ss / sy).clamp(step_min, step_max)
            } else {
                step_max
            };
        }
    }

    Ok(DescentOutcome {
        energy,
        residual,
        converged: residual <= opts.tol,
        iterations,
        x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Ill-conditioned quadratic with a bound: min Σ c_i (x_i - t_i)², x ≥ 0.
    struct BoundedQuadratic {
        scale: Vec<f64>,
        target: Vec<f64>,
    }

    impl DescentProblem for BoundedQuadratic {
        fn energy(&self, x: &[f64]) -> f64 {
            x.iter()
                .zip(&self.scale)
                .zip(&self.target)
                .map(|((x, c), t)| 0.5 * c * (x - t) * (x - t))
                .sum()
        }
        fn gradient(&self, x: &[f64], g: &mut [f64]) {
            for i in 0..x.len() {
                g[i] = self.scale[i] * (x[i] - self.target[i]);
            }
        }
        fn project(&self, x: &mut [f64]) {
            for xi in x.iter_mut() {
                *xi = xi.max(0.0);
            }
        }
        fn kkt_residual(&self, x: &[f64], g: &[f64]) -> f64 {
            x.iter()
                .zip(g)
                .map(|(x, g)| if *x == 0.0 { g.min(0.0).abs() } else { g.abs() })
                .fold(0.0, f64::max)
        }
    }

    #[test]
    fn solves_bounded_quadratic_both_ways() {
        // three decades of conditioning: within reach of the fixed-step
        // variant, easy for the spectral one
        let n = 50;
        let p = BoundedQuadratic {
            scale: (0..n)
                .map(|i| 10f64.powf(i as f64 / (n - 1) as f64 * 3.0))
                .collect(),
            target: (0..n)
                .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
                .collect(),
        };
        for accelerated in [false, true] {
            let opts = DescentOptions {
                max_iter: 200_000,
                tol: 1e-9,
                step0: 1e-3,
                accelerated,
                memory: if accelerated { 10 } else { 1 },
            };
            let out = minimize(&p, vec![0.5; n], &opts).unwrap();
            assert!(out.converged, "accelerated={accelerated}");
            for (i, (x, t)) in out.x.iter().zip(&p.target).enumerate() {
                let expect = t.max(0.0);
                assert!((x - expect).abs() < 1e-7, "x[{i}] = {x}, expect {expect}");
            }
        }
    }

    #[test]
    fn energy_never_exceeds_initial() {
        let p = BoundedQuadratic {
            scale: vec![1.0, 1e6],
            target: vec![2.0, 3.0],
        };
        let x0 = vec![10.0, 10.0];
        let e0 = p.energy(&x0);
        let opts = DescentOptions {
            max_iter: 10_000,
            tol: 1e-9,
            step0: 1e-6,
            accelerated: true,
            memory: 10,
        };
        let out = minimize(&p, x0, &opts).unwrap();
        assert!(out.energy <= e0);
    }
}
