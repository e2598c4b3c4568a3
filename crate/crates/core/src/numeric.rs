//! Small numeric helpers shared across modules.

/// Neumaier-compensated sum of an iterator of values.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Compensated sum that is independent of input order: values are sorted
/// before accumulation, so any permutation gives a bit-identical result.
pub fn order_free_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    compensated_sum(values.iter().copied())
}

pub fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Sample standard deviation (1/(n-1) convention). Returns `None` for n < 2.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values);
    let ss = compensated_sum(values.iter().map(|x| (x - m) * (x - m)));
    Some((ss / (values.len() - 1) as f64).sqrt())
}

/// Euclidean projection of `y` onto the unit simplex {w >= 0, sum w = 1}.
pub fn project_to_simplex(y: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cumulative += s;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if s - candidate > 0.0 {
            theta = candidate;
        }
    }
    y.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Rescale non-negative entries so they sum to one. Falls back to equal
/// weights when the total is zero or not finite.
pub fn normalize_simplex(values: &mut [f64]) {
    for v in values.iter_mut() {
        if !(*v > 0.0) {
            *v = 0.0;
        }
    }
    let total = compensated_sum(values.iter().copied());
    if total > 0.0 && total.is_finite() {
        for v in values.iter_mut() {
            *v /= total;
        }
    } else {
        let n = values.len() as f64;
        values.iter_mut().for_each(|v| *v = 1.0 / n);
    }
}

/// True when every entry is >= -tol and the entries sum to one within `tol`.
pub fn on_simplex(values: &[f64], tol: f64) -> bool {
    !values.is_empty()
        && values.iter().all(|v| v.is_finite() && *v >= -tol)
        && (compensated_sum(values.iter().copied()) - 1.0).abs() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let values = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(values), 2.0);
    }

    #[test]
    fn order_free_sum_ignores_permutation() {
        let mut a = vec![0.1, 0.7, 1e-9, 3.3, 0.2];
        let mut b = vec![3.3, 1e-9, 0.2, 0.1, 0.7];
        assert_eq!(order_free_sum(&mut a).to_bits(), order_free_sum(&mut b).to_bits());
    }

    #[test]
    fn sample_std_of_three_points() {
        let s = sample_std(&[0.7, 0.8, 0.9]).unwrap();
        assert!((s - 0.1).abs() < 1e-15);
        assert!(sample_std(&[1.0]).is_none());
    }

    #[test]
    fn projection_lands_on_simplex() {
        let w = project_to_simplex(&[0.4, 2.0, -1.0, 0.3]);
        assert!(on_simplex(&w, 1e-12));
        assert_eq!(w[2], 0.0);
        let inside = project_to_simplex(&[0.25, 0.25, 0.5]);
        assert!((inside[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn normalize_handles_all_zero() {
        let mut v = [0.0, 0.0];
        normalize_simplex(&mut v);
        assert_eq!(v, [0.5, 0.5]);
    }
}
