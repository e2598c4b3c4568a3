//! Brute-force reference for simplex-constrained weighted least squares:
//! exhaustive grid over the simplex, then pairwise mass-exchange descent
//! with shrinking steps. Deliberately shares no code with the library
//! solver.

/// Objective Σ_i v_i (x1_i - Σ_j x0[i][j] w_j)².
pub fn objective(x1: &[f64], x0: &[Vec<f64>], v: &[f64], w: &[f64]) -> f64 {
    x1.iter()
        .enumerate()
        .map(|(i, &t)| {
            let fitted: f64 = x0[i].iter().zip(w).map(|(a, b)| a * b).sum();
            v[i] * (t - fitted) * (t - fitted)
        })
        .sum()
}

fn compositions(parts: usize, total: usize, prefix: &mut Vec<usize>, out: &mut dyn FnMut(&[usize])) {
    if parts == 1 {
        prefix.push(total);
        out(prefix);
        prefix.pop();
        return;
    }
    for k in 0..=total {
        prefix.push(k);
        compositions(parts - 1, total - k, prefix, out);
        prefix.pop();
    }
}

/// Best objective over the grid {w : w_j = k_j * step, Σ k_j = 1/step}.
pub fn grid_search(x1: &[f64], x0: &[Vec<f64>], v: &[f64], step: f64) -> (Vec<f64>, f64) {
    let m = x0[0].len();
    let n = (1.0 / step).round() as usize;
    let mut best = (vec![1.0 / m as f64; m], f64::INFINITY);
    compositions(m, n, &mut Vec::with_capacity(m), &mut |ks| {
        let w: Vec<f64> = ks.iter().map(|&k| k as f64 / n as f64).collect();
        let f = objective(x1, x0, v, &w);
        if f < best.1 {
            best = (w, f);
        }
    });
    best
}

/// Moves mass between coordinate pairs while it helps, shrinking the step
/// from `start` down to `finest`.
pub fn refine(x1: &[f64], x0: &[Vec<f64>], v: &[f64], mut w: Vec<f64>, start: f64, finest: f64) -> (Vec<f64>, f64) {
    let m = w.len();
    let mut f = objective(x1, x0, v, &w);
    let mut step = start;
    while step >= finest * 0.999 {
        let mut improved = true;
        while improved {
            improved = false;
            for i in 0..m {
                for j in 0..m {
                    if i == j || w[i] <= 0.0 {
                        continue;
                    }
                    let delta = step.min(w[i]);
                    let mut trial = w.clone();
                    trial[i] -= delta;
                    trial[j] += delta;
                    let ft = objective(x1, x0, v, &trial);
                    if ft < f {
                        w = trial;
                        f = ft;
                        improved = true;
                    }
                }
            }
        }
        step /= 10.0;
    }
    (w, f)
}

/// Grid search at 0.01 followed by local refinement to 1e-6.
pub fn oracle_minimum(x1: &[f64], x0: &[Vec<f64>], v: &[f64]) -> (Vec<f64>, f64) {
    let (w, _) = grid_search(x1, x0, v, 0.01);
    refine(x1, x0, v, w, 1e-3, 1e-6)
}
