//! Continuous scalar functions on `[0,1]` that the splitter equalizes.
//!
//! Every feature is continuous on the whole unit interval: tabulated kinds
//! interpolate linearly between knots and extend as constants outside them.

use std::sync::Arc;

use crate::curve::Curve;
use crate::error::{Error, Result};

/// A piecewise-linear table of `(knot, value)` pairs on `[0,1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl Table {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::Domain(format!(
                "table has {} knots but {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots.len() < 2 {
            return Err(Error::Domain("table needs at least 2 knots".into()));
        }
        if knots.iter().any(|k| !(0.0..=1.0).contains(k)) {
            return Err(Error::Domain("table knots must lie in [0,1]".into()));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain("table knots must be nondecreasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("table values must be finite".into()));
        }
        Ok(Table { knots, values })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.knots.len();
        if t <= self.knots[0] {
            return self.values[0];
        }
        if t >= self.knots[n - 1] {
            return self.values[n - 1];
        }
        let idx = self.knots.partition_point(|&k| k < t).clamp(1, n - 1);
        let (k0, k1) = (self.knots[idx - 1], self.knots[idx]);
        let (v0, v1) = (self.values[idx - 1], self.values[idx]);
        if k1 > k0 {
            v0 + (t - k0) / (k1 - k0) * (v1 - v0)
        } else {
            v1
        }
    }
}

/// An evaluable continuous function `[0,1] -> R`.
#[derive(Clone, Debug)]
pub enum FeatureFunction {
    /// `t`.
    Identity,
    /// One coordinate of an arc-length parametrized curve.
    Coordinate { curve: Arc<Curve>, index: usize },
    /// Squared Euclidean norm of the curve point.
    SquaredNorm { curve: Arc<Curve> },
    /// 0 on `[0,x]`, 1 on `[y,1]`, linear in between.
    WindowRamp { x: f64, y: f64 },
    /// Cumulative function of a measure, given as a table.
    CumulativeMeasure(Table),
    /// Arbitrary piecewise-linear function, given as a table.
    Tabulated(Table),
}

impl FeatureFunction {
    pub fn identity() -> Self {
        FeatureFunction::Identity
    }

    pub fn coordinate(curve: Arc<Curve>, index: usize) -> Result<Self> {
        if index >= curve.dimension() {
            return Err(Error::Domain(format!(
                "coordinate index {} out of range for dimension {}",
                index,
                curve.dimension()
            )));
        }
        Ok(FeatureFunction::Coordinate { curve, index })
    }

    pub fn squared_norm(curve: Arc<Curve>) -> Self {
        FeatureFunction::SquaredNorm { curve }
    }

    pub fn window_ramp(x: f64, y: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) || x >= y {
            return Err(Error::Domain(format!("window requires 0 <= x < y <= 1, got ({}, {})", x, y)));
        }
        Ok(FeatureFunction::WindowRamp { x, y })
    }

    pub fn cumulative_measure(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(FeatureFunction::CumulativeMeasure(Table::new(knots, values)?))
    }

    pub fn tabulated(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(FeatureFunction::Tabulated(Table::new(knots, values)?))
    }

    /// Constant function, as a two-knot table.
    pub fn constant(value: f64) -> Self {
        FeatureFunction::Tabulated(Table::new(vec![0.0, 1.0], vec![value, value]).unwrap())
    }

    /// One curve coordinate times `scale`, tabulated over the curve's own
    /// sample parameters. Exact for polylines because the coordinate is
    /// piecewise linear in arc length.
    pub fn scaled_coordinate_table(curve: &Curve, index: usize, scale: f64) -> Result<Self> {
        if index >= curve.dimension() {
            return Err(Error::Domain(format!(
                "coordinate index {} out of range for dimension {}",
                index,
                curve.dimension()
            )));
        }
        let length = curve.length();
        let knots: Vec<f64> = curve.cumulative_lengths().iter().map(|&c| (c / length).clamp(0.0, 1.0)).collect();
        let values: Vec<f64> = curve.points().iter().map(|p| p[index] * scale).collect();
        Ok(FeatureFunction::Tabulated(Table::new(knots, values)?))
    }

    /// Evaluates the feature; the argument is clamped to `[0,1]`.
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match self {
            FeatureFunction::Identity => t,
            FeatureFunction::Coordinate { curve, index } => curve.coordinate_at(t, *index),
            FeatureFunction::SquaredNorm { curve } => curve.squared_norm_at(t),
            FeatureFunction::WindowRamp { x, y } => {
                if t <= *x {
                    0.0
                } else if t >= *y {
                    1.0
                } else {
                    (t - x) / (y - x)
                }
            }
            FeatureFunction::CumulativeMeasure(table) | FeatureFunction::Tabulated(table) => table.eval(t),
        }
    }

    /// Tabulated features carry interpolation error, which widens the default
    /// solve tolerance.
    pub fn is_tabulated(&self) -> bool {
        matches!(
            self,
            FeatureFunction::CumulativeMeasure(_) | FeatureFunction::Tabulated(_)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn window_ramp_midpoint() {
        let f = FeatureFunction::window_ramp(0.25, 0.75).unwrap();
        assert_eq!(f.eval(0.5), 0.5);
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(0.25), 0.0);
        assert_eq!(f.eval(0.75), 1.0);
        assert_eq!(f.eval(1.0), 1.0);
    }

    #[test]
    fn window_ramp_rejects_bad_bounds() {
        assert!(matches!(FeatureFunction::window_ramp(0.5, 0.5), Err(Error::Domain(_))));
        assert!(matches!(FeatureFunction::window_ramp(0.9, 0.1), Err(Error::Domain(_))));
        assert!(matches!(FeatureFunction::window_ramp(-0.1, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn identity_is_identity() {
        assert_eq!(FeatureFunction::identity().eval(0.3), 0.3);
    }

    #[test]
    fn squared_norm_on_unit_circle_is_one() {
        let curve = Arc::new(Curve::builtin("circle", &BTreeMap::new(), 4096).unwrap());
        let g = FeatureFunction::squared_norm(curve);
        for t in [0.0, 0.123, 0.5, 0.77, 1.0] {
            assert!((g.eval(t) - 1.0).abs() < 1e-5, "g({}) = {}", t, g.eval(t));
        }
    }

    #[test]
    fn coordinate_index_out_of_range() {
        let curve = Arc::new(Curve::builtin("circle", &BTreeMap::new(), 64).unwrap());
        assert!(matches!(FeatureFunction::coordinate(curve, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn tabulated_interpolates_and_clamps() {
        let f = FeatureFunction::tabulated(vec![0.2, 0.4, 0.8], vec![1.0, 3.0, 3.0]).unwrap();
        assert_eq!(f.eval(0.0), 1.0);
        assert!((f.eval(0.3) - 2.0).abs() < 1e-12);
        assert_eq!(f.eval(0.9), 3.0);
    }

    #[test]
    fn scaled_coordinate_table_matches_curve() {
        let curve = Curve::builtin("square", &BTreeMap::new(), 4).unwrap();
        let f = FeatureFunction::scaled_coordinate_table(&curve, 0, 0.25).unwrap();
        for t in [0.0, 0.1, 0.125, 0.5, 0.875, 1.0] {
            let expected = curve.coordinate_at(t, 0) * 0.25;
            assert!((f.eval(t) - expected).abs() < 1e-15);
        }
    }
}
