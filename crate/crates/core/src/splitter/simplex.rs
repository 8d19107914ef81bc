//! Local minimization over the probability simplex of interval lengths.
//!
//! The search per labeling is derivative-free Nelder–Mead restricted to the
//! simplex (reflection and expansion points are projected back), followed by
//! a damped Gauss–Newton polish on the deviation residuals to drive the
//! squared deviation toward machine precision. Objectives are piecewise
//! smooth (features may be piecewise linear), which Nelder–Mead tolerates and
//! the polish simply treats as best-effort.

/// Euclidean projection onto `{ x : x_i >= 0, sum x_i = 1 }`.
pub(crate) fn project_onto_simplex(x: &mut [f64]) {
    let n = x.len();
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut prefix = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        prefix += u;
        let candidate = (prefix - 1.0) / (i as f64 + 1.0);
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    for v in x.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
    // Renormalize the leftover rounding drift.
    let total: f64 = x.iter().sum();
    if total > 0.0 {
        for v in x.iter_mut() {
            *v /= total;
        }
    } else if n > 0 {
        let uniform = 1.0 / n as f64;
        for v in x.iter_mut() {
            *v = uniform;
        }
    }
}

/// Nelder–Mead on the simplex. Returns the best point and value seen.
///
/// Stops early when the value drops to `target` or the vertex spread
/// collapses.
pub(crate) fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    max_iters: usize,
    target: f64,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let h = 0.3;
    let mut verts: Vec<Vec<f64>> = Vec::with_capacity(n);
    verts.push(x0.to_vec());
    for i in 0..n.saturating_sub(1) {
        let mut v: Vec<f64> = x0.iter().map(|&c| (1.0 - h) * c).collect();
        v[i] += h;
        verts.push(v);
    }
    let mut vals: Vec<f64> = verts.iter().map(|v| f(v)).collect();

    for _ in 0..max_iters {
        let mut order: Vec<usize> = (0..verts.len()).collect();
        order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
        let best = order[0];
        let worst = *order.last().unwrap();
        let second_worst = order[order.len() - 2];

        if vals[best] <= target {
            break;
        }
        let spread: f64 = verts
            .iter()
            .map(|v| v.iter().zip(&verts[best]).map(|(a, b)| (a - b).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        if spread <= 1e-13 {
            break;
        }

        let mut centroid = vec![0.0; n];
        for (i, v) in verts.iter().enumerate() {
            if i != worst {
                for (c, &x) in centroid.iter_mut().zip(v) {
                    *c += x;
                }
            }
        }
        let denom = (verts.len() - 1) as f64;
        for c in centroid.iter_mut() {
            *c /= denom;
        }

        let mut reflected: Vec<f64> =
            centroid.iter().zip(&verts[worst]).map(|(&c, &w)| c + (c - w)).collect();
        project_onto_simplex(&mut reflected);
        let fr = f(&reflected);

        if fr < vals[best] {
            let mut expanded: Vec<f64> =
                centroid.iter().zip(&verts[worst]).map(|(&c, &w)| c + 2.0 * (c - w)).collect();
            project_onto_simplex(&mut expanded);
            let fe = f(&expanded);
            if fe < fr {
                verts[worst] = expanded;
                vals[worst] = fe;
            } else {
                verts[worst] = reflected;
                vals[worst] = fr;
            }
        } else if fr < vals[second_worst] {
            verts[worst] = reflected;
            vals[worst] = fr;
        } else {
            let (contracted, toward_val) = if fr < vals[worst] {
                // Outside contraction toward the reflected point.
                let c: Vec<f64> =
                    centroid.iter().zip(&reflected).map(|(&c, &r)| c + 0.5 * (r - c)).collect();
                (c, fr)
            } else {
                // Inside contraction toward the worst vertex.
                let c: Vec<f64> =
                    centroid.iter().zip(&verts[worst]).map(|(&c, &w)| c + 0.5 * (w - c)).collect();
                (c, vals[worst])
            };
            let fc = f(&contracted);
            if fc < toward_val {
                verts[worst] = contracted;
                vals[worst] = fc;
            } else {
                // Shrink everything toward the best vertex.
                let anchor = verts[best].clone();
                for (i, v) in verts.iter_mut().enumerate() {
                    if i != best {
                        for (x, &a) in v.iter_mut().zip(&anchor) {
                            *x = a + 0.5 * (*x - a);
                        }
                        vals[i] = f(v);
                    }
                }
            }
        }
    }

    let best = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    (verts[best].clone(), vals[best])
}

/// Damped Gauss–Newton refinement of the residual vector around `x0`.
///
/// Steps live in the hyperplane `sum x = 1` (the last coordinate absorbs
/// them) and are projected back onto the simplex before acceptance.
pub(crate) fn gauss_newton_polish(
    residuals: &mut dyn FnMut(&[f64], &mut [f64]),
    objective: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    n_residuals: usize,
    max_iters: usize,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    if n < 2 {
        return (x0.to_vec(), objective(x0));
    }
    let free = n - 1;
    let mut x = x0.to_vec();
    let mut fx = objective(&x);
    let mut r = vec![0.0; n_residuals];
    let mut r_pert = vec![0.0; n_residuals];
    let mut lambda = 1e-6;
    let fd_step = 1e-7;

    for _ in 0..max_iters {
        if fx <= 1e-30 {
            break;
        }
        residuals(&x, &mut r);
        // Jacobian by forward differences along e_i - e_last.
        let mut jac = vec![vec![0.0; free]; n_residuals];
        for i in 0..free {
            let mut xp = x.clone();
            xp[i] += fd_step;
            xp[n - 1] -= fd_step;
            residuals(&xp, &mut r_pert);
            for (row, (&rp, &rr)) in jac.iter_mut().zip(r_pert.iter().zip(&r)) {
                row[i] = (rp - rr) / fd_step;
            }
        }
        // Normal equations J^T J + lambda I.
        let mut jtj = vec![vec![0.0; free]; free];
        let mut jtr = vec![0.0; free];
        for row in 0..n_residuals {
            for i in 0..free {
                jtr[i] += jac[row][i] * r[row];
                for j in i..free {
                    jtj[i][j] += jac[row][i] * jac[row][j];
                }
            }
        }
        for i in 0..free {
            for j in 0..i {
                jtj[i][j] = jtj[j][i];
            }
        }

        let mut improved = false;
        for _ in 0..8 {
            let mut a = jtj.clone();
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += lambda * (1.0 + jtj[i][i]);
            }
            let rhs: Vec<f64> = jtr.iter().map(|&v| -v).collect();
            match solve_linear(a, rhs) {
                Some(step) => {
                    let mut candidate = x.clone();
                    let mut shift = 0.0;
                    for i in 0..free {
                        candidate[i] += step[i];
                        shift += step[i];
                    }
                    candidate[n - 1] -= shift;
                    project_onto_simplex(&mut candidate);
                    let fc = objective(&candidate);
                    if fc < fx {
                        x = candidate;
                        fx = fc;
                        lambda = (lambda * 0.3).max(1e-14);
                        improved = true;
                        break;
                    }
                    lambda *= 10.0;
                }
                None => lambda *= 10.0,
            }
            if lambda > 1e14 {
                break;
            }
        }
        if !improved {
            break;
        }
    }
    (x, fx)
}

/// Gaussian elimination with partial pivoting; `None` on singular systems.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor != 0.0 {
                for k in col..n {
                    a[row][k] -= factor * a[col][k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}
