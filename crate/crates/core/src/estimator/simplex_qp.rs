//! Donor weights: minimize (x1 - X0 w)' diag(v) (x1 - X0 w) over the unit
//! simplex.
//!
//! With Σw = 1 the residual is Σ w_j P_j where P_j = sqrt(v) ∘ (x0_j - x1),
//! so the problem is the minimum-norm point of conv{P_j}. Wolfe's
//! min-norm-point method solves it exactly in a finite number of corral
//! updates; an accelerated projected-gradient pass takes over if roundoff
//! stalls it. Both stop on the Frank-Wolfe duality gap
//! `2 (<x,x> - min_j <x,P_j>)`, an upper bound on suboptimality.

use super::{EstimatorError, PredictorMatrices, VWeights, WWeights};
use crate::numeric::{normalize_simplex, project_to_simplex};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSettings {
    /// Iteration budget for the projected-gradient fallback.
    pub max_iter: usize,
    /// Absolute duality-gap target.
    pub tol: f64,
}

impl Default for InnerSettings {
    fn default() -> Self {
        Self {
            max_iter: 200_000,
            tol: 1e-10,
        }
    }
}

/// Shifted, v-scaled donor points, one row per donor.
struct Points {
    data: Vec<f64>,
    dim: usize,
    count: usize,
}

impl Points {
    fn new(mats: &PredictorMatrices, v: &[f64]) -> Self {
        let (dim, count) = mats.x0.shape();
        let mut data = Vec::with_capacity(dim * count);
        for j in 0..count {
            for i in 0..dim {
                data.push(v[i].sqrt() * (mats.x0[(i, j)] - mats.x1[i]));
            }
        }
        Self { data, dim, count }
    }

    fn get(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    fn combine(&self, weights: impl Iterator<Item = (usize, f64)>) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        for (j, w) in weights {
            for (xi, pi) in x.iter_mut().zip(self.get(j)) {
                *xi += w * pi;
            }
        }
        x
    }

    /// (gap, index of the most-decreasing vertex)
    fn gap(&self, x: &[f64]) -> (f64, usize) {
        let xx = dot(x, x);
        let (best, val) = (0..self.count)
            .map(|j| (j, dot(x, self.get(j))))
            .fold((0, f64::INFINITY), |acc, (j, d)| if d < acc.1 { (j, d) } else { acc });
        (2.0 * (xx - val), best)
    }

    fn max_norm2(&self) -> f64 {
        (0..self.count)
            .map(|j| dot(self.get(j), self.get(j)))
            .fold(0.0, f64::max)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Affine combination of the corral points with minimum norm.
fn affine_minimizer(points: &Points, corral: &[usize]) -> Option<Vec<f64>> {
    let k = corral.len();
    let mut a = DMatrix::zeros(k + 1, k + 1);
    for (r, &i) in corral.iter().enumerate() {
        for (c, &j) in corral.iter().enumerate().skip(r) {
            let g = dot(points.get(i), points.get(j));
            a[(r, c)] = g;
            a[(c, r)] = g;
        }
        a[(r, k)] = 1.0;
        a[(k, r)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = a.lu().solve(&rhs)?;
    let alpha: Vec<f64> = sol.iter().take(k).copied().collect();
    alpha.iter().all(|a| a.is_finite()).then_some(alpha)
}

/// Returns full-length weights and whether the gap target was certified.
fn wolfe(points: &Points, tol: f64) -> (Vec<f64>, bool) {
    const EPS: f64 = 1e-14;
    let start = (0..points.count)
        .map(|j| (j, dot(points.get(j), points.get(j))))
        .fold((0, f64::INFINITY), |acc, (j, n)| if n < acc.1 { (j, n) } else { acc })
        .0;
    let mut corral = vec![start];
    let mut lambda = vec![1.0];
    let mut x = points.get(start).to_vec();
    let max_major = 50 * (points.count + points.dim) + 100;

    let mut certified = false;
    for _ in 0..max_major {
        let (gap, j) = points.gap(&x);
        if gap <= tol {
            certified = true;
            break;
        }
        if corral.contains(&j) {
            break;
        }
        corral.push(j);
        lambda.push(0.0);

        let mut stalled = false;
        loop {
            let Some(alpha) = affine_minimizer(points, &corral) else {
                stalled = true;
                break;
            };
            if alpha.iter().all(|&a| a > EPS) {
                lambda = alpha;
                break;
            }
            // step toward the affine minimizer until a weight hits zero
            let mut leaving: Option<(usize, f64)> = None;
            for (i, (&l, &a)) in lambda.iter().zip(&alpha).enumerate() {
                if a <= EPS && l - a > 0.0 {
                    let t = l / (l - a);
                    if leaving.is_none_or(|(_, best)| t < best) {
                        leaving = Some((i, t));
                    }
                }
            }
            let Some((leaving, theta)) = leaving else {
                stalled = true;
                break;
            };
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l = theta * a + (1.0 - theta) * *l;
            }
            lambda[leaving] = 0.0;
            let mut k = 0;
            while k < corral.len() {
                if lambda[k] <= EPS {
                    corral.remove(k);
                    lambda.remove(k);
                } else {
                    k += 1;
                }
            }
            normalize_simplex(&mut lambda);
            if corral.len() == 1 {
                break;
            }
        }
        x = points.combine(corral.iter().copied().zip(lambda.iter().copied()));
        if stalled {
            break;
        }
    }

    let mut w = vec![0.0; points.count];
    for (&j, &l) in corral.iter().zip(&lambda) {
        w[j] = l;
    }
    normalize_simplex(&mut w);
    if !certified {
        let x = points.combine(w.iter().copied().enumerate());
        certified = points.gap(&x).0 <= tol;
    }
    (w, certified)
}

#[cfg(test)]
fn objective(points: &Points, w: &[f64]) -> f64 {
    let x = points.combine(w.iter().copied().enumerate());
    dot(&x, &x)
}

/// FISTA with gradient-based restarts, warm-started at `w`. Progress is
/// judged by the duality gap, which stays informative after objective
/// differences have sunk below roundoff.
fn projected_gradient(
    points: &Points,
    mut w: Vec<f64>,
    settings: &InnerSettings,
) -> Result<Vec<f64>, (Vec<f64>, f64, usize)> {
    let frob: f64 = points.data.iter().map(|p| p * p).sum();
    let step = 1.0 / (2.0 * frob).max(f64::MIN_POSITIVE);
    let mut y = w.clone();
    let mut t = 1.0_f64;
    let mut best = (w.clone(), f64::INFINITY);
    for _ in 0..settings.max_iter {
        let xw = points.combine(w.iter().copied().enumerate());
        let gap = points.gap(&xw).0;
        if gap < best.1 {
            best = (w.clone(), gap);
        }
        if gap <= settings.tol {
            return Ok(w);
        }
        let x = points.combine(y.iter().copied().enumerate());
        let trial: Vec<f64> = (0..points.count)
            .map(|j| y[j] - step * 2.0 * dot(&x, points.get(j)))
            .collect();
        let next = project_to_simplex(&trial);
        let restart: f64 = y
            .iter()
            .zip(&next)
            .zip(&w)
            .map(|((y, n), o)| (y - n) * (n - o))
            .sum();
        if restart > 0.0 {
            t = 1.0;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = next
            .iter()
            .zip(&w)
            .map(|(n, o)| n + (t - 1.0) / t_next * (n - o))
            .collect();
        t = t_next;
        w = next;
    }
    Err((best.0, best.1, settings.max_iter))
}

/// The weighted predictor-space objective at `w`, computed from its
/// definition.
pub fn inner_objective(mats: &PredictorMatrices, v: &VWeights, w: &WWeights) -> f64 {
    let fitted = &mats.x0 * DVector::from_column_slice(w.as_slice());
    (0..mats.n_predictors())
        .map(|i| {
            let r = mats.x1[i] - fitted[i];
            v.as_slice()[i] * r * r
        })
        .sum()
}

pub fn solve_w(mats: &PredictorMatrices, v: &VWeights) -> Result<(WWeights, f64), EstimatorError> {
    solve_w_with(mats, v, &InnerSettings::default())
}

/// Solves for donor weights; the returned loss is within `settings.tol` of
/// the minimum.
pub fn solve_w_with(
    mats: &PredictorMatrices,
    v: &VWeights,
    settings: &InnerSettings,
) -> Result<(WWeights, f64), EstimatorError> {
    if v.len() != mats.n_predictors() {
        return Err(EstimatorError::Shape(format!(
            "{} predictor weights for {} predictors",
            v.len(),
            mats.n_predictors()
        )));
    }
    let points = Points::new(mats, v.as_slice());
    // roundoff floor of the gap evaluation
    let tol = settings.tol.max(1e-13 * points.max_norm2());
    let effective = InnerSettings { tol, ..*settings };

    let (w, certified) = wolfe(&points, tol);
    let w = if certified {
        w
    } else {
        projected_gradient(&points, w, &effective).map_err(|(best, residual, iterations)| {
            EstimatorError::SolverFailure {
                best,
                residual,
                iterations,
            }
        })?
    };
    let w = WWeights::from_raw(w);
    let loss = inner_objective(mats, v, &w);
    Ok((w, loss))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mats(x1: &[f64], cols: &[&[f64]]) -> PredictorMatrices {
        let p = x1.len();
        let x0 = DMatrix::from_fn(p, cols.len(), |i, j| cols[j][i]);
        PredictorMatrices::from_parts(DVector::from_column_slice(x1), x0).unwrap()
    }

    #[test]
    fn exact_donor_match_gets_all_weight() {
        let m = mats(&[1.0, 2.0], &[&[0.0, 0.0], &[1.0, 2.0], &[3.0, -1.0]]);
        let (w, loss) = solve_w(&m, &VWeights::equal(2)).unwrap();
        assert_eq!(w.as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn midpoint_splits_evenly() {
        let m = mats(&[1.0, 1.0], &[&[0.0, 0.0], &[2.0, 2.0]]);
        let (w, loss) = solve_w(&m, &VWeights::equal(2)).unwrap();
        assert!((w.as_slice()[0] - 0.5).abs() < 1e-12);
        assert!(loss < 1e-20);
    }

    #[test]
    fn outside_hull_projects_to_nearest_face() {
        // hull is the segment (0,0)-(2,0); target (1,1) projects to (1,0)
        let m = mats(&[1.0, 1.0], &[&[0.0, 0.0], &[2.0, 0.0]]);
        let (w, loss) = solve_w(&m, &VWeights::equal(2)).unwrap();
        assert!((w.as_slice()[1] - 0.5).abs() < 1e-12);
        assert!((loss - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_predictor_weight_ignores_row() {
        let m = mats(&[1.0, 100.0], &[&[1.0, 0.0], &[5.0, 100.0]]);
        let v = VWeights::new(vec![1.0, 0.0]).unwrap();
        let (w, loss) = solve_w(&m, &v).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 0.0]);
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn duplicate_donors_are_handled() {
        let m = mats(&[0.5, 0.5], &[&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0], &[1.0, 0.0]]);
        let (w, loss) = solve_w(&m, &VWeights::equal(2)).unwrap();
        assert!(loss < 1e-20);
        assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fallback_reports_failure_with_tiny_budget() {
        // force the fallback path directly
        let m = mats(&[0.3, 0.2, 0.9], &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let v = VWeights::equal(3);
        let points = Points::new(&m, v.as_slice());
        let settings = InnerSettings {
            max_iter: 1,
            tol: 1e-14,
        };
        let res = projected_gradient(&points, vec![1.0, 0.0, 0.0], &settings);
        let (best, residual, iterations) = res.unwrap_err();
        assert_eq!(best.len(), 3);
        assert!(residual > 1e-14);
        assert_eq!(iterations, 1);
        let ok = projected_gradient(&points, vec![1.0, 0.0, 0.0], &InnerSettings::default()).unwrap();
        let (w, _) = solve_w(&m, &v).unwrap();
        assert!((objective(&points, &ok) - objective(&points, w.as_slice())).abs() < 1e-9);
    }
}
