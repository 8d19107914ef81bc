//! Polyline curves with arc-length parametrization.
//!
//! A [`Curve`] stores ordered sample points in `d` dimensions together with a
//! cumulative chord-length table. Evaluation at a parameter `t` in `[0,1]`
//! returns the point at arc length `t * L` along the polyline, so every curve
//! is arc-length parametrized by construction.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    dimension: usize,
    points: Vec<Vec<f64>>,
    closed: bool,
    cumulative: Vec<f64>,
    length: f64,
}

impl Curve {
    /// Builds a curve from sample points.
    ///
    /// If `closed` is set and the first and last points differ, the closing
    /// segment is appended. Fails when fewer than two distinct points are
    /// given, when dimensions are inconsistent, or when the total length is
    /// zero.
    pub fn new(points: Vec<Vec<f64>>, closed: bool) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidCurve(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        let dimension = points[0].len();
        if dimension == 0 {
            return Err(Error::InvalidCurve("points must have dimension >= 1".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dimension {
                return Err(Error::InvalidCurve(format!(
                    "point {} has dimension {}, expected {}",
                    i,
                    p.len(),
                    dimension
                )));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidCurve(format!("point {} has a non-finite coordinate", i)));
            }
        }

        let mut points = points;
        if closed && points.first() != points.last() {
            let first = points[0].clone();
            points.push(first);
        }

        let mut cumulative = Vec::with_capacity(points.len());
        cumulative.push(0.0);
        for w in points.windows(2) {
            let step = dist(&w[0], &w[1]);
            cumulative.push(cumulative.last().unwrap() + step);
        }
        let length = *cumulative.last().unwrap();
        if length <= 0.0 {
            return Err(Error::InvalidCurve("curve has zero total length".into()));
        }

        Ok(Curve { dimension, points, closed, cumulative, length })
    }

    /// Builds one of the named closed curves with the requested sample count.
    ///
    /// Names: `circle` (param `r`), `ellipse` (`a`, `b`), `square` (`side`),
    /// `triangle` (`side`), `trefoil3d` (`scale`). Smooth curves require at
    /// least 8 samples; polygonal ones at least one sample per corner (extra
    /// samples subdivide the edges without changing the geometry).
    pub fn builtin(name: &str, params: &BTreeMap<String, f64>, samples: usize) -> Result<Self> {
        let get = |key: &str, default: f64| -> f64 { params.get(key).copied().unwrap_or(default) };
        let allow = |keys: &[&str]| -> Result<()> {
            for k in params.keys() {
                if !keys.contains(&k.as_str()) {
                    return Err(Error::Domain(format!("unknown parameter {:?} for builtin {:?}", k, name)));
                }
            }
            Ok(())
        };
        let need_samples = |min: usize| -> Result<()> {
            if samples < min {
                Err(Error::Domain(format!("builtin {:?} needs at least {} samples, got {}", name, min, samples)))
            } else {
                Ok(())
            }
        };

        match name {
            "circle" => {
                allow(&["r"])?;
                need_samples(8)?;
                let r = get("r", 1.0);
                if r <= 0.0 {
                    return Err(Error::Domain("circle radius must be positive".into()));
                }
                let pts = (0..samples)
                    .map(|k| {
                        let th = 2.0 * PI * k as f64 / samples as f64;
                        vec![r * th.cos(), r * th.sin()]
                    })
                    .collect();
                Curve::new(pts, true)
            }
            "ellipse" => {
                allow(&["a", "b"])?;
                need_samples(8)?;
                let a = get("a", 2.0);
                let b = get("b", 1.0);
                if a <= 0.0 || b <= 0.0 {
                    return Err(Error::Domain("ellipse semi-axes must be positive".into()));
                }
                let pts = (0..samples)
                    .map(|k| {
                        let th = 2.0 * PI * k as f64 / samples as f64;
                        vec![a * th.cos(), b * th.sin()]
                    })
                    .collect();
                Curve::new(pts, true)
            }
            "square" => {
                allow(&["side"])?;
                need_samples(4)?;
                let s = get("side", 1.0);
                if s <= 0.0 {
                    return Err(Error::Domain("square side must be positive".into()));
                }
                let corners = [[0.0, 0.0], [s, 0.0], [s, s], [0.0, s]];
                Curve::new(polygon_points(&corners, samples), true)
            }
            "triangle" => {
                allow(&["side"])?;
                need_samples(3)?;
                let s = get("side", 1.0);
                if s <= 0.0 {
                    return Err(Error::Domain("triangle side must be positive".into()));
                }
                let corners = [[0.0, 0.0], [s, 0.0], [0.5 * s, s * 3f64.sqrt() / 2.0]];
                Curve::new(polygon_points(&corners, samples), true)
            }
            "trefoil3d" => {
                allow(&["scale"])?;
                need_samples(8)?;
                let c = get("scale", 1.0);
                if c <= 0.0 {
                    return Err(Error::Domain("trefoil scale must be positive".into()));
                }
                let pts = (0..samples)
                    .map(|k| {
                        let th = 2.0 * PI * k as f64 / samples as f64;
                        vec![
                            c * ((th).sin() + 2.0 * (2.0 * th).sin()),
                            c * ((th).cos() - 2.0 * (2.0 * th).cos()),
                            c * -(3.0 * th).sin(),
                        ]
                    })
                    .collect();
                Curve::new(pts, true)
            }
            other => Err(Error::Domain(format!("unknown builtin curve {:?}", other))),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Total polyline length.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn cumulative_lengths(&self) -> &[f64] {
        &self.cumulative
    }

    /// Point at arc length `t * L` along the curve.
    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("parameter {} outside [0,1]", t)));
        }
        Ok(self.point_at(t))
    }

    /// Infallible evaluation; the parameter is clamped to `[0,1]`.
    pub fn point_at(&self, t: f64) -> Vec<f64> {
        let (i, frac) = self.locate(t);
        let a = &self.points[i];
        let b = &self.points[i + 1];
        (0..self.dimension).map(|k| a[k] + frac * (b[k] - a[k])).collect()
    }

    /// Single coordinate of `point_at` without allocating.
    pub fn coordinate_at(&self, t: f64, index: usize) -> f64 {
        let (i, frac) = self.locate(t);
        let a = self.points[i][index];
        let b = self.points[i + 1][index];
        a + frac * (b - a)
    }

    /// Squared Euclidean norm of `point_at` without allocating.
    pub fn squared_norm_at(&self, t: f64) -> f64 {
        let (i, frac) = self.locate(t);
        let a = &self.points[i];
        let b = &self.points[i + 1];
        (0..self.dimension)
            .map(|k| {
                let c = a[k] + frac * (b[k] - a[k]);
                c * c
            })
            .sum()
    }

    /// Segment index and interpolation fraction for a clamped parameter.
    fn locate(&self, t: f64) -> (usize, f64) {
        let s = t.clamp(0.0, 1.0) * self.length;
        // First boundary with cumulative >= s, then back up one segment.
        let idx = self.cumulative.partition_point(|&c| c < s).clamp(1, self.points.len() - 1);
        let lo = self.cumulative[idx - 1];
        let hi = self.cumulative[idx];
        let frac = if hi > lo { ((s - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
        (idx - 1, frac)
    }

    /// Vertices of the restriction to `[a, b]`, including interpolated
    /// endpoints. Zero-width restrictions yield a single point.
    pub(crate) fn sub_polyline(&self, a: f64, b: f64) -> Vec<Vec<f64>> {
        let a = a.clamp(0.0, 1.0);
        let b = b.clamp(a, 1.0);
        let start = self.point_at(a);
        if b <= a {
            return vec![start];
        }
        let sa = a * self.length;
        let sb = b * self.length;
        let mut pts = vec![start];
        for (i, &c) in self.cumulative.iter().enumerate() {
            if c > sa && c < sb {
                let p = &self.points[i];
                if pts.last().map(|q| q != p).unwrap_or(true) {
                    pts.push(p.clone());
                }
            }
        }
        let end = self.point_at(b);
        if pts.last() != Some(&end) {
            pts.push(end);
        }
        pts
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Closed polygon sampled with roughly `samples` points: each edge is
/// subdivided evenly so corners are always preserved.
fn polygon_points(corners: &[[f64; 2]], samples: usize) -> Vec<Vec<f64>> {
    let n = corners.len();
    let per_edge = (samples / n).max(1);
    let mut pts = Vec::with_capacity(n * per_edge);
    for e in 0..n {
        let a = corners[e];
        let b = corners[(e + 1) % n];
        for k in 0..per_edge {
            let f = k as f64 / per_edge as f64;
            pts.push(vec![a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]);
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Curve {
        Curve::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]],
            true,
        )
        .unwrap()
    }

    #[test]
    fn unit_square_has_perimeter_four() {
        let c = unit_square();
        assert_eq!(c.length(), 4.0);
        assert_eq!(c.dimension(), 2);
        assert!(c.is_closed());
        assert_eq!(c.points().first(), c.points().last());
    }

    #[test]
    fn two_identical_points_rejected() {
        let err = Curve::new(vec![vec![1.0, 2.0], vec![1.0, 2.0]], false).unwrap_err();
        assert!(matches!(err, Error::InvalidCurve(_)));
    }

    #[test]
    fn single_point_rejected() {
        let err = Curve::new(vec![vec![0.0]], false).unwrap_err();
        assert!(matches!(err, Error::InvalidCurve(_)));
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let err = Curve::new(vec![vec![0.0, 0.0], vec![1.0]], false).unwrap_err();
        assert!(matches!(err, Error::InvalidCurve(_)));
    }

    #[test]
    fn regular_360_gon_length_close_to_circumference() {
        // Independent value: a regular N-gon inscribed in the unit circle has
        // perimeter N * 2 * sin(pi / N).
        let n = 360;
        let expected = n as f64 * 2.0 * (PI / n as f64).sin();
        let c = Curve::builtin("circle", &BTreeMap::new(), n).unwrap();
        assert!((c.length() - expected).abs() < 1e-12);
        assert!((c.length() - 2.0 * PI).abs() < 1e-3);
    }

    #[test]
    fn evaluate_unit_square() {
        let c = unit_square();
        assert_eq!(c.evaluate(0.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(c.evaluate(0.5).unwrap(), vec![1.0, 1.0]);
        assert_eq!(c.evaluate(0.125).unwrap(), vec![0.5, 0.0]);
        assert_eq!(c.evaluate(1.0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn evaluate_outside_domain_rejected() {
        let c = unit_square();
        assert!(matches!(c.evaluate(-0.1), Err(Error::Domain(_))));
        assert!(matches!(c.evaluate(1.1), Err(Error::Domain(_))));
    }

    #[test]
    fn builtin_contracts() {
        let circle = Curve::builtin("circle", &BTreeMap::new(), 1024).unwrap();
        assert_eq!(circle.dimension(), 2);
        assert!(circle.is_closed());

        let trefoil = Curve::builtin("trefoil3d", &BTreeMap::new(), 1024).unwrap();
        assert_eq!(trefoil.dimension(), 3);
        assert!(trefoil.is_closed());

        let square4 = Curve::builtin("square", &BTreeMap::new(), 4).unwrap();
        assert_eq!(square4.length(), 4.0);
        assert_eq!(square4.points().len(), 5);

        assert!(matches!(
            Curve::builtin("pentagon", &BTreeMap::new(), 64),
            Err(Error::Domain(_))
        ));
        assert!(matches!(Curve::builtin("circle", &BTreeMap::new(), 4), Err(Error::Domain(_))));
    }

    #[test]
    fn square_subdivision_preserves_geometry() {
        let c = Curve::builtin("square", &BTreeMap::new(), 64).unwrap();
        assert!((c.length() - 4.0).abs() < 1e-12);
        let p = c.evaluate(0.125).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && p[1].abs() < 1e-12);
    }

    #[test]
    fn sub_polyline_lengths_match_parameter_span() {
        let c = unit_square();
        let pts = c.sub_polyline(0.1, 0.6);
        let mut len = 0.0;
        for w in pts.windows(2) {
            len += dist(&w[0], &w[1]);
        }
        assert!((len - 0.5 * c.length()).abs() < 1e-12);
    }
}
