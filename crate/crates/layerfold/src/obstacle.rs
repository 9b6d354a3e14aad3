//! The V-shaped obstacle a layer is pressed into.
//!
//! The obstacle is the graph of `f(x) = m·|x|` on the computational domain
//! `[-X, X]`: two straight flanks of slope `±m` meeting in a single corner at
//! the origin. `f` is even, convex and piecewise linear, which is everything
//! the contact solver relies on.

use crate::error::ModelError;

/// Symmetric V-shaped obstacle `f(x) = m·|x|` with corner at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleProfile {
    slope: f64,
    half_width: f64,
}

impl ObstacleProfile {
    /// Create a profile with flank slope `m >= 0` on the domain `[-X, X]`.
    ///
    /// `m = 0` is the degenerate flat obstacle; it is accepted so the solver
    /// can short-circuit that case.
    pub fn new(slope: f64, half_width: f64) -> Result<Self, ModelError> {
        if !slope.is_finite() || slope < 0.0 {
            return Err(ModelError::NonPositive {
                name: "slope",
                value: slope,
            });
        }
        if !half_width.is_finite() || half_width <= 0.0 {
            return Err(ModelError::NonPositive {
                name: "half_width",
                value: half_width,
            });
        }
        Ok(Self { slope, half_width })
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Obstacle height `m·|x|`; errors when `x` lies outside `[-X, X]`.
    pub fn height(&self, x: f64) -> Result<f64, ModelError> {
        if x.abs() > self.half_width * (1.0 + 1e-12) {
            return Err(ModelError::OutsideDomain {
                x,
                half_width: self.half_width,
            });
        }
        Ok(self.slope * x.abs())
    }

    /// Obstacle height without the domain check, for grid sampling.
    #[inline]
    pub(crate) fn height_unchecked(&self, x: f64) -> f64 {
        self.slope * x.abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corner_is_at_zero() {
        let v = ObstacleProfile::new(1.0, 5.0).unwrap();
        assert_eq!(v.height(0.0).unwrap(), 0.0);
    }

    #[test]
    fn flanks_are_symmetric() {
        let v = ObstacleProfile::new(1.0, 5.0).unwrap();
        assert_eq!(v.height(-2.0).unwrap(), 2.0);
        assert_eq!(v.height(2.0).unwrap(), 2.0);
    }

    #[test]
    fn flank_is_linear() {
        let v = ObstacleProfile::new(0.5, 5.0).unwrap();
        assert_eq!(v.height(3.0).unwrap(), 1.5);
    }

    #[test]
    fn outside_domain_is_an_error() {
        let v = ObstacleProfile::new(1.0, 5.0).unwrap();
        assert!(matches!(
            v.height(5.1),
            Err(ModelError::OutsideDomain { .. })
        ));
    }

    #[test]
    fn degenerate_and_invalid_parameters() {
        assert!(ObstacleProfile::new(0.0, 1.0).is_ok());
        assert!(ObstacleProfile::new(-1.0, 1.0).is_err());
        assert!(ObstacleProfile::new(1.0, 0.0).is_err());
        assert!(ObstacleProfile::new(f64::NAN, 1.0).is_err());
    }
}
