//! Closed-form solution of the linearized contact problem.
//!
//! On the void `(-L, L)` the linearized stationarity condition is the beam
//! equation `B w'''' = -q`, with smooth contact at the flanks and symmetry at
//! the corner:
//!
//! ```text
//!   w(±L) = mL,   w'(±L) = ±m,   w''(±L) = 0,   w'''(0) = 0.
//! ```
//!
//! The even quartic satisfying these conditions is, on `[0, L]`,
//!
//! ```text
//!   w(x) = (3/8) m L + (q/4B) L² x² - (q/24B) x⁴,
//! ```
//!
//! which fixes the void half-length
//!
//! ```text
//!   L = (3 m B / q)^{1/3}
//! ```
//!
//! and the corner gap `w(0) = (3/8) m L`. Eliminating `q/B = 3m/L³` gives the
//! gap above the obstacle as `(w - f)(x) = (mL/8)(1 - u)³(3 + u)` with
//! `u = |x|/L`: nonnegative, and vanishing to third order at the contact
//! points, so the third derivative jumps there and the contact force carries
//! a concentrated reaction `B·[w'''] = qL` at each of `±L` on top of the
//! distributed pressure outside the void. Integrating the closed form also
//! gives the total energy `(9/5) B m²/L` and the void area `m L²/5`.

use crate::error::ModelError;

/// The symmetric closed-form solution of the linearized contact problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedContact {
    stiffness: f64,
    pressure: f64,
    slope: f64,
    half_length: f64,
}

impl LinearizedContact {
    pub fn new(stiffness: f64, pressure: f64, slope: f64) -> Result<Self, ModelError> {
        for (name, value) in [
            ("stiffness", stiffness),
            ("pressure", pressure),
            ("slope", slope),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(ModelError::NonPositive { name, value });
            }
        }
        let half_length = (3.0 * slope * stiffness / pressure).cbrt();
        Ok(Self {
            stiffness,
            pressure,
            slope,
            half_length,
        })
    }

    /// Void half-length `L = (3mB/q)^{1/3}`.
    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    /// Void length `2L`.
    pub fn void_length(&self) -> f64 {
        2.0 * self.half_length
    }

    /// Gap above the corner, `w(0) = (3/8) m L`.
    pub fn corner_gap(&self) -> f64 {
        0.375 * self.slope * self.half_length
    }

    /// Displacement; the quartic inside the void, the obstacle outside.
    pub fn displacement(&self, x: f64) -> f64 {
        let l = self.half_length;
        if x.abs() >= l {
            return self.slope * x.abs();
        }
        let c = self.pressure / self.stiffness;
        self.corner_gap() + 0.25 * c * l * l * x * x - c / 24.0 * x.powi(4)
    }

    /// Gap `w - f`, equal to `(mL/8)(1-u)³(3+u)` with `u = |x|/L`.
    pub fn gap(&self, x: f64) -> f64 {
        let u = (x.abs() / self.half_length).min(1.0);
        self.slope * self.half_length / 8.0 * (1.0 - u).powi(3) * (3.0 + u)
    }

    /// Second derivative inside the void: `(3m/2L)(1 - x²/L²)`, nonnegative.
    pub fn second_derivative(&self, x: f64) -> f64 {
        let l = self.half_length;
        if x.abs() >= l {
            return 0.0;
        }
        1.5 * self.slope / l * (1.0 - (x * x) / (l * l))
    }

    /// Total energy of the closed form, `(9/5) B m²/L`
    /// (bending `6Bm²/5L`, pressure `3Bm²/5L`).
    pub fn total_energy(&self) -> f64 {
        1.8 * self.stiffness * self.slope * self.slope / self.half_length
    }

    /// Void area `∫(w-f) = m L²/5`.
    pub fn void_area(&self) -> f64 {
        self.slope * self.half_length * self.half_length / 5.0
    }

    /// Concentrated reaction at each contact point, `B·[w'''] = qL`.
    pub fn contact_point_reaction(&self) -> f64 {
        self.pressure * self.half_length
    }
}
