//! Curve front ends for the splitter: inscribed parallelograms and
//! rectangles, arc-balanced rectangles, and equal-length loop splitting.
//!
//! Each finder reduces its question to a four-feature alternating split: for
//! a closed curve the coordinate balance `2g(t1) + 2g(t3) + g(1) = 2g(t2) +
//! 2g(t4) + g(0)` collapses to `gamma(t1) + gamma(t3) = gamma(t2) +
//! gamma(t4)`, the parallelogram condition. A window ramp forces a vertex
//! parameter into a prescribed arc, the squared norm upgrades parallelograms
//! to rectangles, and the identity balances arc lengths.

use std::sync::Arc;

use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::feature::FeatureFunction;
use crate::splitter::{
    solve_alternating_4, solve_colored, solve_split, ColorConstraint, SolveOptions,
    SplitConfiguration, SplitProblem, SplitSolution,
};

/// Four parameters on a curve whose points satisfy the parallelogram
/// condition, with classification flags.
#[derive(Clone, Debug)]
pub struct InscribedQuadrilateral {
    /// Nondecreasing parameters `t1 <= t2 <= t3 <= t4` in `[0,1]`.
    pub params: [f64; 4],
    /// Curve points at the parameters.
    pub vertices: [Vec<f64>; 4],
    /// `|v1 + v3 - v2 - v4|`.
    pub parallelogram_residual: f64,
    /// Centered-norm rectangle test outcome.
    pub rectangle: bool,
    /// All four vertices within tolerance of a common line.
    pub collinear: bool,
    /// Index into `params` of a parameter strictly inside the requested
    /// window, when a window was given.
    pub window_hit: Option<usize>,
}

/// An equal-length splitting of a loop into `r` translate-reassemblable
/// groups of intervals.
#[derive(Clone, Debug)]
pub struct LoopSplit {
    pub cuts: Vec<f64>,
    /// 1-based interval indices per group.
    pub groups: Vec<Vec<usize>>,
    /// Sum of `gamma(t_j) - gamma(t_{j-1})` over each group; near zero.
    pub displacements: Vec<Vec<f64>>,
    /// Arc length of each group, in curve-length units.
    pub lengths: Vec<f64>,
    /// The reassembled loop of each group.
    pub loops: Vec<Curve>,
    pub colors: Option<ColorConstraint>,
    pub warnings: Vec<String>,
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    norm(&sub(a, b))
}

/// Centered-norm rectangle test: a parallelogram is a rectangle exactly when
/// the four vertices are equidistant from the diagonal intersection.
///
/// The inputs must already satisfy the parallelogram condition
/// `A + C = B + D` within the tolerance.
pub fn is_rectangle(a: &[f64], b: &[f64], c: &[f64], d: &[f64], tolerance: f64) -> Result<bool> {
    let dim = a.len();
    if b.len() != dim || c.len() != dim || d.len() != dim {
        return Err(Error::Contract("vertices must share a dimension".into()));
    }
    let gap: Vec<f64> = (0..dim).map(|k| a[k] + c[k] - b[k] - d[k]).collect();
    if norm(&gap) > tolerance {
        return Err(Error::Contract(format!(
            "not a parallelogram: |A + C - B - D| = {:.3e} exceeds {:.3e}",
            norm(&gap),
            tolerance
        )));
    }
    let center: Vec<f64> = (0..dim).map(|k| 0.25 * (a[k] + b[k] + c[k] + d[k])).collect();
    let norms: Vec<f64> = [a, b, c, d]
        .iter()
        .map(|v| v.iter().zip(&center).map(|(x, p)| (x - p) * (x - p)).sum::<f64>())
        .collect();
    let spread = norms.iter().cloned().fold(f64::MIN, f64::max)
        - norms.iter().cloned().fold(f64::MAX, f64::min);
    Ok(spread <= tolerance)
}

fn collinear_within(vertices: &[Vec<f64>; 4], tolerance: f64) -> bool {
    let mut far = (0, 1, -1.0);
    for i in 0..4 {
        for j in i + 1..4 {
            let d = dist(&vertices[i], &vertices[j]);
            if d > far.2 {
                far = (i, j, d);
            }
        }
    }
    if far.2 <= tolerance {
        return true;
    }
    let origin = &vertices[far.0];
    let axis = sub(&vertices[far.1], origin);
    let scale = norm(&axis);
    vertices.iter().all(|v| {
        let rel = sub(v, origin);
        let along: f64 = rel.iter().zip(&axis).map(|(r, a)| r * a).sum::<f64>() / scale;
        let ortho2 = rel.iter().map(|r| r * r).sum::<f64>() - along * along;
        ortho2.max(0.0).sqrt() <= tolerance
    })
}

fn quadrilateral_from(
    curve: &Curve,
    cuts: &[f64],
    window: Option<(f64, f64)>,
    tolerance: f64,
) -> InscribedQuadrilateral {
    let params = [cuts[0], cuts[1], cuts[2], cuts[3]];
    let vertices = [
        curve.point_at(params[0]),
        curve.point_at(params[1]),
        curve.point_at(params[2]),
        curve.point_at(params[3]),
    ];
    let dim = curve.dimension();
    let gap: Vec<f64> =
        (0..dim).map(|k| vertices[0][k] + vertices[2][k] - vertices[1][k] - vertices[3][k]).collect();
    let parallelogram_residual = norm(&gap);
    let rectangle = is_rectangle(&vertices[0], &vertices[1], &vertices[2], &vertices[3], tolerance)
        .unwrap_or(false);
    let collinear = collinear_within(&vertices, tolerance);
    let window_hit = window
        .and_then(|(x, y)| params.iter().position(|&t| t > x && t < y));
    InscribedQuadrilateral {
        params,
        vertices,
        parallelogram_residual,
        rectangle,
        collinear,
        window_hit,
    }
}

fn bounding_diameter(curve: &Curve) -> f64 {
    let dim = curve.dimension();
    let mut spread2 = 0.0;
    for k in 0..dim {
        let (mut lo, mut hi) = (f64::MAX, f64::MIN);
        for p in curve.points() {
            lo = lo.min(p[k]);
            hi = hi.max(p[k]);
        }
        spread2 += (hi - lo) * (hi - lo);
    }
    spread2.sqrt()
}

fn coordinate_features(curve: &Arc<Curve>) -> Result<Vec<FeatureFunction>> {
    (0..curve.dimension())
        .map(|k| FeatureFunction::coordinate(Arc::clone(curve), k))
        .collect()
}

/// Runs the alternating solve with retries on degenerate outcomes: the
/// returned cuts must keep `t1 != t2`, `t2 != t3`, land a parameter in the
/// window when one is given, and respect a minimum vertex separation when
/// `min_separation` is set.
fn solve_quadrilateral(
    curve: &Curve,
    features: &[FeatureFunction],
    window: Option<(f64, f64)>,
    tolerance: f64,
    min_separation: Option<f64>,
    options: &SolveOptions,
) -> Result<SplitSolution> {
    const RESOLUTION: f64 = 1e-9;
    let mut solution = None;
    for attempt in 0..3u64 {
        let opts = SolveOptions { seed: options.seed.wrapping_add(attempt), ..options.clone() };
        let candidate = solve_alternating_4(features, tolerance, &opts)?;
        let t = &candidate.configuration.cuts;
        let nondegenerate = (t[1] - t[0]).abs() > RESOLUTION && (t[2] - t[1]).abs() > RESOLUTION;
        let hit_ok = match window {
            Some((x, y)) => t.iter().any(|&ti| ti > x && ti < y),
            None => true,
        };
        let separation_ok = match min_separation {
            Some(min_dist) => {
                let pts: Vec<Vec<f64>> = t.iter().map(|&ti| curve.point_at(ti)).collect();
                (0..4).all(|i| (i + 1..4).all(|j| dist(&pts[i], &pts[j]) >= min_dist))
            }
            None => true,
        };
        solution = Some(candidate);
        if nondegenerate && hit_ok && separation_ok {
            break;
        }
    }
    Ok(solution.expect("at least one attempt runs"))
}

/// Finds an inscribed (possibly collinear-degenerate) parallelogram with a
/// vertex parameter inside `window`.
pub fn find_parallelogram(
    curve: &Curve,
    window: (f64, f64),
    tolerance: f64,
    options: &SolveOptions,
) -> Result<InscribedQuadrilateral> {
    if !curve.is_closed() {
        return Err(Error::Contract("parallelogram search needs a closed curve".into()));
    }
    let dim = curve.dimension();
    if dim != 2 && dim != 3 {
        return Err(Error::Contract(format!("parallelogram search supports d in {{2,3}}, got {}", dim)));
    }
    let shared = Arc::new(curve.clone());
    let mut features = coordinate_features(&shared)?;
    features.push(FeatureFunction::window_ramp(window.0, window.1)?);
    if dim == 2 {
        features.push(FeatureFunction::constant(0.0));
    }
    let solution =
        solve_quadrilateral(curve, &features, Some(window), tolerance / 8.0, None, options)?;
    Ok(quadrilateral_from(curve, &solution.configuration.cuts, Some(window), tolerance))
}

/// Finds an inscribed non-degenerate rectangle with a vertex parameter
/// inside `window`.
pub fn find_rectangle(
    curve: &Curve,
    window: (f64, f64),
    tolerance: f64,
    options: &SolveOptions,
) -> Result<InscribedQuadrilateral> {
    if !curve.is_closed() {
        return Err(Error::Contract("rectangle search needs a closed curve".into()));
    }
    if curve.dimension() != 2 {
        return Err(Error::Contract(format!(
            "rectangle search needs a planar curve, got dimension {}",
            curve.dimension()
        )));
    }
    let shared = Arc::new(curve.clone());
    let mut features = coordinate_features(&shared)?;
    features.push(FeatureFunction::window_ramp(window.0, window.1)?);
    features.push(FeatureFunction::squared_norm(Arc::clone(&shared)));
    let min_separation = 1e-6 * bounding_diameter(curve);
    let solution = solve_quadrilateral(
        curve,
        &features,
        Some(window),
        tolerance / 8.0,
        Some(min_separation),
        options,
    )?;
    Ok(quadrilateral_from(curve, &solution.configuration.cuts, Some(window), tolerance))
}

/// Finds an inscribed rectangle whose four boundary arcs balance:
/// `l1 + l3 = l2 + l4`. Returns the quadrilateral and the cyclic arc lengths
/// in curve-length units.
pub fn find_balanced_rectangle(
    curve: &Curve,
    tolerance: f64,
    options: &SolveOptions,
) -> Result<(InscribedQuadrilateral, [f64; 4])> {
    if !curve.is_closed() {
        return Err(Error::Contract("balanced rectangle search needs a closed curve".into()));
    }
    if curve.dimension() != 2 {
        return Err(Error::Contract(format!(
            "balanced rectangle search needs a planar curve, got dimension {}",
            curve.dimension()
        )));
    }
    let shared = Arc::new(curve.clone());
    let mut features = coordinate_features(&shared)?;
    features.push(FeatureFunction::squared_norm(Arc::clone(&shared)));
    features.push(FeatureFunction::identity());
    let min_separation = 1e-6 * bounding_diameter(curve);
    let solution =
        solve_quadrilateral(curve, &features, None, tolerance / 8.0, Some(min_separation), options)?;
    let quad = quadrilateral_from(curve, &solution.configuration.cuts, None, tolerance);
    let t = quad.params;
    let length = curve.length();
    let arcs = [
        (t[1] - t[0]) * length,
        (t[2] - t[1]) * length,
        (t[3] - t[2]) * length,
        (1.0 - t[3] + t[0]) * length,
    ];
    Ok((quad, arcs))
}

/// Concatenates the pieces `gamma|[t_{j-1}, t_j]`, `j` in `group`, in index
/// order, translating each piece so it continues from the previous one.
/// The result is closed exactly when the group displacement vanishes.
pub fn reassemble(curve: &Curve, cuts: &[f64], group: &[usize]) -> Result<Curve> {
    let n_intervals = cuts.len() + 1;
    if group.is_empty() {
        return Err(Error::Contract("group must contain at least one interval".into()));
    }
    let mut indices = group.to_vec();
    indices.sort_unstable();
    if indices.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Contract("group indices must be distinct".into()));
    }
    if indices[0] == 0 || *indices.last().unwrap() > n_intervals {
        return Err(Error::Contract(format!(
            "group indices must lie in 1..={}",
            n_intervals
        )));
    }

    let boundary = |i: usize| -> f64 {
        if i == 0 {
            0.0
        } else if i > cuts.len() {
            1.0
        } else {
            cuts[i - 1]
        }
    };

    let mut chained: Vec<Vec<f64>> = Vec::new();
    for &j in &indices {
        let piece = curve.sub_polyline(boundary(j - 1), boundary(j));
        if piece.len() < 2 {
            continue; // zero-length interval
        }
        if chained.is_empty() {
            chained = piece;
            continue;
        }
        let shift = sub(chained.last().unwrap(), &piece[0]);
        for p in piece.into_iter().skip(1) {
            chained.push(p.iter().zip(&shift).map(|(c, s)| c + s).collect());
        }
    }
    if chained.len() < 2 {
        return Err(Error::InvalidCurve("group covers only zero-length intervals".into()));
    }
    let closes = dist(chained.first().unwrap(), chained.last().unwrap()) <= 1e-12 * curve.length();
    if closes {
        let first = chained[0].clone();
        *chained.last_mut().unwrap() = first;
    }
    Curve::new(chained, closes)
}

fn loop_split_features(curve: &Curve) -> Result<Vec<FeatureFunction>> {
    // Coordinates scaled by 1/L so the solve tolerance means "fraction of
    // the total length" for displacements and lengths alike.
    let scale = 1.0 / curve.length();
    let mut features: Vec<FeatureFunction> = (0..curve.dimension())
        .map(|k| FeatureFunction::scaled_coordinate_table(curve, k, scale))
        .collect::<Result<_>>()?;
    features.push(FeatureFunction::identity());
    Ok(features)
}

fn loop_split_from_solution(
    curve: &Curve,
    solution: SplitSolution,
    parts: usize,
    colors: Option<ColorConstraint>,
) -> Result<LoopSplit> {
    let SplitConfiguration { cuts, labels } = solution.configuration;
    let length = curve.length();
    let boundary = |i: usize| -> f64 {
        if i == 0 {
            0.0
        } else if i > cuts.len() {
            1.0
        } else {
            cuts[i - 1]
        }
    };

    let mut groups = vec![Vec::new(); parts];
    for (i, &label) in labels.iter().enumerate() {
        groups[label].push(i + 1);
    }
    let mut displacements = Vec::with_capacity(parts);
    let mut lengths = Vec::with_capacity(parts);
    let mut loops = Vec::with_capacity(parts);
    for group in &groups {
        let mut displacement = vec![0.0; curve.dimension()];
        let mut total = 0.0;
        for &j in group {
            let (lo, hi) = (boundary(j - 1), boundary(j));
            let a = curve.point_at(lo);
            let b = curve.point_at(hi);
            for (acc, (pb, pa)) in displacement.iter_mut().zip(b.iter().zip(&a)) {
                *acc += pb - pa;
            }
            total += (hi - lo) * length;
        }
        displacements.push(displacement);
        lengths.push(total);
        loops.push(reassemble(curve, &cuts, group)?);
    }
    Ok(LoopSplit {
        cuts,
        groups,
        displacements,
        lengths,
        loops,
        colors,
        warnings: solution.warnings,
    })
}

/// Cuts a closed curve into `(r-1)(d+1) + 1` intervals whose groups
/// reassemble, by translations, into `r` loops of equal length.
pub fn split_loop(
    curve: &Curve,
    parts: usize,
    tolerance: f64,
    options: &SolveOptions,
) -> Result<LoopSplit> {
    if !curve.is_closed() {
        return Err(Error::Contract("loop splitting needs a closed curve".into()));
    }
    if parts < 2 {
        return Err(Error::Contract(format!("need at least 2 parts, got {}", parts)));
    }
    let problem = SplitProblem::new(loop_split_features(curve)?, parts)?
        .with_tolerance(tolerance)?;
    let solution = solve_split(&problem, options)?;
    loop_split_from_solution(curve, solution, parts, None)
}

/// `split_loop` under a rainbow constraint: no group may take two intervals
/// of the same color block. Guaranteed solvable for prime `parts`; other
/// part counts are attempted and flagged.
pub fn split_loop_colored(
    curve: &Curve,
    parts: usize,
    colors: ColorConstraint,
    tolerance: f64,
    options: &SolveOptions,
) -> Result<LoopSplit> {
    if !curve.is_closed() {
        return Err(Error::Contract("loop splitting needs a closed curve".into()));
    }
    if parts < 2 {
        return Err(Error::Contract(format!("need at least 2 parts, got {}", parts)));
    }
    let problem = SplitProblem::new(loop_split_features(curve)?, parts)?
        .with_tolerance(tolerance)?
        .with_colors(colors.clone())?;
    let solution = solve_colored(&problem, options)?;
    loop_split_from_solution(curve, solution, parts, Some(colors))
}
