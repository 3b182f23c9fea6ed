//! Polygonal linearization of quadratic apparent-power ratings.
//!
//! A disc `P^2 + Q^2 <= S^2` becomes `n` half-planes tangent to a circle. In
//! envelope mode the planes touch the true rating circle, so the polygon
//! circumscribes the disc: every feasible point is accepted, and accepted
//! points exceed the rating by at most the factor `1/cos(pi/n)`. Conservative
//! mode shrinks the circle by `cos(pi/n)` instead, so nothing outside the
//! true disc is ever accepted.

use std::f64::consts::PI;

use crate::model::PolygonMode;

use super::FormulationError;

/// Half planes `a*P + b*Q <= c` approximating a disc.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfPlaneSet {
    pub planes: Vec<(f64, f64, f64)>,
    pub sides: usize,
    pub mode: PolygonMode,
}

impl HalfPlaneSet {
    pub fn accepts(&self, p: f64, q: f64) -> bool {
        self.planes.iter().all(|(a, b, c)| a * p + b * q <= c + 1e-12)
    }

    /// Worst-case radius ratio of an accepted point to the rating.
    pub fn over_acceptance(&self) -> f64 {
        match self.mode {
            PolygonMode::Envelope => 1.0 / (PI / self.sides as f64).cos(),
            PolygonMode::Conservative => 1.0,
        }
    }
}

pub fn polygonize_quadratic(
    rating: f64,
    n_sides: usize,
    mode: PolygonMode,
) -> Result<HalfPlaneSet, FormulationError> {
    if n_sides < 4 || n_sides % 2 != 0 {
        return Err(FormulationError::PolygonSides(n_sides));
    }
    let effective = match mode {
        PolygonMode::Envelope => rating,
        PolygonMode::Conservative => rating * (PI / n_sides as f64).cos(),
    };
    let planes = (0..n_sides)
        .map(|m| {
            let angle = 2.0 * PI * m as f64 / n_sides as f64;
            (angle.cos(), angle.sin(), effective)
        })
        .collect();
    Ok(HalfPlaneSet {
        planes,
        sides: n_sides,
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_or_tiny_side_counts() {
        assert!(polygonize_quadratic(1.0, 3, PolygonMode::Envelope).is_err());
        assert!(polygonize_quadratic(1.0, 2, PolygonMode::Envelope).is_err());
        assert!(polygonize_quadratic(1.0, 7, PolygonMode::Envelope).is_err());
        assert!(polygonize_quadratic(1.0, 4, PolygonMode::Envelope).is_ok());
    }

    #[test]
    fn four_sided_envelope_is_the_axis_aligned_square() {
        let set = polygonize_quadratic(1.0, 4, PolygonMode::Envelope).unwrap();
        // Supports at the four axis directions; corners at (+-1, +-1).
        assert!(set.accepts(1.0, 0.0));
        assert!(set.accepts(0.8, 0.8));
        assert!(!set.accepts(1.01, 0.0));
        assert!(!set.accepts(0.8, 1.2));
        // No accepted point lies beyond the corner radius S / cos(pi/4).
        assert!((set.over_acceptance() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn conservative_square_rejects_the_diagonal_point() {
        let set = polygonize_quadratic(1.0, 4, PolygonMode::Conservative).unwrap();
        assert!(!set.accepts(0.8, 0.8));
        assert!(set.accepts(0.7, 0.0));
    }

    #[test]
    fn conservative_mode_never_exceeds_the_disc() {
        for n in [4usize, 8, 12, 36] {
            let set = polygonize_quadratic(2.5, n, PolygonMode::Conservative).unwrap();
            // Polygon corners are the extreme accepted points and sit exactly
            // on the rating circle: effective radius / cos(pi/n) = rating.
            for m in 0..n {
                let angle = 2.0 * PI * (m as f64 + 0.5) / n as f64;
                let (p, q) = (2.5 * angle.cos(), 2.5 * angle.sin());
                assert!(set.accepts(p * 0.999, q * 0.999), "corner rejected for n={n}");
                assert!(!set.accepts(p * 1.001, q * 1.001), "beyond corner accepted for n={n}");
            }
        }
    }

    #[test]
    fn envelope_over_acceptance_for_twelve_sides() {
        let set = polygonize_quadratic(1.0, 12, PolygonMode::Envelope).unwrap();
        assert!((set.over_acceptance() - 1.0 / (PI / 12.0).cos()).abs() < 1e-15);
        assert!((set.over_acceptance() - 1.0353).abs() < 2e-4);
    }
}
