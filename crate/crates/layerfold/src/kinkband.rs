//! Rigid-block kink-band model with interlayer friction.
//!
//! Layers inside a band of width `b` rotate rigidly by `α`; the material
//! outside is reduced to a single inline spring of stiffness `k`, the
//! overburden to a lateral pressure `q`, and interlayer slip is resisted by
//! Coulomb friction with coefficient `μ`. Under monotone loading the model
//! has the energy
//!
//! ```text
//!   E(Δ, α) = ½ k (Δ - Δ_k(α))² + μ q b H tan α,
//! ```
//!
//! where `Δ_k(α) = b(1 - cos α)` is the shortening taken up by band rotation,
//! `H = n·t` is the stack height, and the friction term is the slip work
//! `t·tan α` per interface summed across the stack. Thickness preservation
//! with no interlayer opening forces the band boundary to bisect the interior
//! and exterior layer directions, `β = α/2`.
//!
//! Friction changes the structure of the problem: the undeformed state stays
//! locally stable at every load (no finite buckling load), while its basin of
//! attraction shrinks as the load grows. The practically relevant quantity is
//! the Maxwell displacement, the smallest end-shortening at which a deformed
//! state matches the energy of the undeformed one.

use crate::error::KinkError;

/// Parameters of the kink-band stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinkBandParams {
    band_width: f64,
    layer_thickness: f64,
    n_layers: usize,
    spring_stiffness: f64,
    pressure: f64,
    friction: f64,
}

/// Which energy branch a path point sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Undeformed,
    Deformed,
}

/// One stationary point of the stack on a load-shortening diagram.
#[derive(Debug, Clone, Copy)]
pub struct PathPoint {
    pub alpha: f64,
    pub beta: f64,
    pub shortening: f64,
    pub load: f64,
    pub energy: f64,
    pub branch: Branch,
}

/// The Maxwell displacement and the angle attaining it.
#[derive(Debug, Clone, Copy)]
pub struct MaxwellPoint {
    pub shortening: f64,
    pub alpha: f64,
}

const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

fn check_angle(alpha: f64) -> Result<(), KinkError> {
    if !alpha.is_finite() || !(0.0..HALF_PI).contains(&alpha) {
        return Err(KinkError::AngleRange { value: alpha });
    }
    Ok(())
}

/// Band boundary angle from the layer rotation: the bisector `β = α/2`, the
/// unique orientation preserving layer thickness with no interlayer opening.
pub fn band_angle(alpha: f64) -> Result<f64, KinkError> {
    check_angle(alpha)?;
    Ok(0.5 * alpha)
}

impl KinkBandParams {
    pub fn new(
        band_width: f64,
        layer_thickness: f64,
        n_layers: usize,
        spring_stiffness: f64,
        pressure: f64,
        friction: f64,
    ) -> Result<Self, KinkError> {
        for (name, value) in [
            ("band_width", band_width),
            ("layer_thickness", layer_thickness),
            ("spring_stiffness", spring_stiffness),
            ("pressure", pressure),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(KinkError::NonPositive { name, value });
            }
        }
        if n_layers == 0 {
            return Err(KinkError::NonPositive {
                name: "n_layers",
                value: 0.0,
            });
        }
        if !friction.is_finite() || friction <= 0.0 || friction > 2.0 {
            return Err(KinkError::FrictionRange { value: friction });
        }
        Ok(Self {
            band_width,
            layer_thickness,
            n_layers,
            spring_stiffness,
            pressure,
            friction,
        })
    }

    /// Normalized defaults used for reports: `b = 1`, `t = 0.01`, `n = 100`,
    /// `k = 1`, `q = 1` and the documented friction value `μ = 0.57`.
    pub fn documented_default() -> Self {
        Self::new(1.0, 0.01, 100, 1.0, 1.0, 0.57).expect("valid defaults")
    }

    pub fn band_width(&self) -> f64 {
        self.band_width
    }

    pub fn layer_thickness(&self) -> f64 {
        self.layer_thickness
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn spring_stiffness(&self) -> f64 {
        self.spring_stiffness
    }

    pub fn pressure(&self) -> f64 {
        self.pressure
    }

    pub fn friction(&self) -> f64 {
        self.friction
    }

    /// Stack height `H = n·t`.
    pub fn stack_height(&self) -> f64 {
        self.n_layers as f64 * self.layer_thickness
    }

    /// Axial shortening taken up by rotating the band: `Δ_k = b(1 - cos α)`.
    pub fn rotation_shortening(&self, alpha: f64) -> f64 {
        self.band_width * (1.0 - alpha.cos())
    }

    /// Total potential `E(Δ, α)` under end-shortening `Δ` and band rotation
    /// `α`: spring energy of the material outside the band plus the friction
    /// pseudo-energy of interlayer slip (valid for monotone loading).
    pub fn total_potential(&self, shortening: f64, alpha: f64) -> Result<f64, KinkError> {
        check_angle(alpha)?;
        if !shortening.is_finite() || shortening < 0.0 {
            return Err(KinkError::NonPositive {
                name: "shortening",
                value: shortening,
            });
        }
        let spring = shortening - self.rotation_shortening(alpha);
        let friction =
            self.friction * self.pressure * self.band_width * self.stack_height() * alpha.tan();
        Ok(0.5 * self.spring_stiffness * spring * spring + friction)
    }

    /// Equilibrium load of the deformed branch,
    /// `P(α) = μ q H / (sin α cos² α)`; diverges as `α → 0` (stationarity of
    /// the energy with `P = k(Δ - Δ_k)`).
    pub fn equilibrium_load(&self, alpha: f64) -> Result<f64, KinkError> {
        check_angle(alpha)?;
        if alpha == 0.0 {
            return Err(KinkError::DivergentLoad);
        }
        let c = alpha.cos();
        Ok(self.friction * self.pressure * self.stack_height() / (alpha.sin() * c * c))
    }

    /// Angle minimizing the equilibrium load: `sin²α* = 1/3`.
    pub fn min_load_angle(&self) -> f64 {
        (1.0 / 3.0_f64).sqrt().asin()
    }

    /// Smallest equilibrium load, `P_min = μ q H · 3√3/2`.
    pub fn min_load(&self) -> f64 {
        self.friction * self.pressure * self.stack_height() * 1.5 * 3.0_f64.sqrt()
    }

    /// Load-shortening curve of the deformed branch over an angle grid,
    /// with `Δ = P/k + Δ_k(α)`.
    pub fn equilibrium_path(&self, alpha_grid: &[f64]) -> Result<Vec<PathPoint>, KinkError> {
        alpha_grid
            .iter()
            .map(|&alpha| {
                let load = self.equilibrium_load(alpha)?;
                let shortening = load / self.spring_stiffness + self.rotation_shortening(alpha);
                let energy = self.total_potential(shortening, alpha)?;
                Ok(PathPoint {
                    alpha,
                    beta: band_angle(alpha)?,
                    shortening,
                    load,
                    energy,
                    branch: Branch::Deformed,
                })
            })
            .collect()
    }

    /// End-shortening at which the deformed state at angle `α` has the same
    /// energy as the undeformed state:
    /// `Δ(α) = Δ_k/2 + μ q b H tan α / (k Δ_k)`.
    pub fn equal_energy_shortening(&self, alpha: f64) -> Result<f64, KinkError> {
        check_angle(alpha)?;
        if alpha == 0.0 {
            return Err(KinkError::DivergentLoad);
        }
        let dk = self.rotation_shortening(alpha);
        let friction =
            self.friction * self.pressure * self.band_width * self.stack_height() * alpha.tan();
        Ok(0.5 * dk + friction / (self.spring_stiffness * dk))
    }

    /// The Maxwell displacement: the minimum of
    /// [`Self::equal_energy_shortening`] over `α`, located by a golden-section
    /// search on a bracket from a 64-point coarse grid.
    pub fn maxwell_displacement(&self) -> Result<MaxwellPoint, KinkError> {
        let lo = 1e-9;
        let hi = HALF_PI - 1e-9;
        let coarse = 64;
        let mut best_i = 0;
        let mut best_v = f64::INFINITY;
        let at = |i: usize| lo + (hi - lo) * (i as f64) / (coarse - 1) as f64;
        for i in 0..coarse {
            let v = self.equal_energy_shortening(at(i))?;
            if v < best_v {
                best_v = v;
                best_i = i;
            }
        }
        if best_i == 0 || best_i == coarse - 1 {
            return Err(KinkError::Unbracketed {
                detail: format!(
                    "coarse minimum at grid edge (alpha = {:.6}, delta = {:.6e})",
                    at(best_i),
                    best_v
                ),
            });
        }
        let (mut a, mut b) = (at(best_i - 1), at(best_i + 1));
        let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = self.equal_energy_shortening(c)?;
        let mut fd = self.equal_energy_shortening(d)?;
        while b - a > 1e-10 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = self.equal_energy_shortening(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = self.equal_energy_shortening(d)?;
            }
        }
        let alpha = 0.5 * (a + b);
        Ok(MaxwellPoint {
            shortening: self.equal_energy_shortening(alpha)?,
            alpha,
        })
    }

    /// Dead-load potential relative to the undeformed state,
    /// `G(α) = μ q b H tan α - P b (1 - cos α)`.
    pub fn dead_load_potential(&self, alpha: f64, load: f64) -> Result<f64, KinkError> {
        check_angle(alpha)?;
        let friction =
            self.friction * self.pressure * self.band_width * self.stack_height() * alpha.tan();
        Ok(friction - load * self.rotation_shortening(alpha))
    }

    /// Height of the energy ridge separating the undeformed state from the
    /// kink branch under dead load `P`: the first interior maximum of `G`.
    ///
    /// Below the minimum equilibrium load no ridge exists (the basin is not
    /// bounded by any finite barrier) and the result is infinite. The barrier
    /// decays like `b μ² q² H² / 2P` for large loads: the basin of stability
    /// shrinks to a point.
    pub fn energy_barrier(&self, load: f64) -> Result<f64, KinkError> {
        if !load.is_finite() || load <= 0.0 {
            return Err(KinkError::NonPositive {
                name: "load",
                value: load,
            });
        }
        // ridge angle solves sin α cos² α = μ q H / P on the rising branch
        let target = self.friction * self.pressure * self.stack_height() / load;
        let alpha_star = self.min_load_angle();
        let shape = |a: f64| a.sin() * a.cos() * a.cos();
        if target >= shape(alpha_star) {
            return Ok(f64::INFINITY);
        }
        let (mut lo, mut hi) = (0.0, alpha_star);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if shape(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let ridge = 0.5 * (lo + hi);
        Ok(self.dead_load_potential(ridge, load)?.max(0.0))
    }

    /// Predicted band angle: the bisector at the Maxwell angle.
    pub fn predicted_band_angle(&self) -> Result<f64, KinkError> {
        band_angle(self.maxwell_displacement()?.alpha)
    }
}
