//! Plain Nelder-Mead minimizer used for the predictor-weight search.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadSettings {
    pub max_evals: usize,
    /// Stop once the spread of simplex values falls below
    /// `f_tol_abs + f_tol_rel * |f_best|`.
    pub f_tol_abs: f64,
    pub f_tol_rel: f64,
    /// Stop once every vertex is within this distance of the best one.
    pub x_tol: f64,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl Default for NelderMeadSettings {
    fn default() -> Self {
        Self {
            max_evals: 400,
            f_tol_abs: 1e-14,
            f_tol_rel: 1e-9,
            x_tol: 1e-7,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    /// Best value after each iteration, starting with the initial simplex.
    pub trace: Vec<f64>,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` from `x0`. Non-finite values are treated as +inf, so the
/// returned point is never worse than `x0`.
pub fn minimize<F>(mut f: F, x0: &[f64], settings: &NelderMeadSettings) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += settings.initial_step;
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }

    let mut trace = Vec::new();
    loop {
        // stable sort keeps earlier vertices first on ties
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        trace.push(best);
        let worst = simplex[n].1;
        let spread = worst - best;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let converged = spread.is_finite()
            && spread <= settings.f_tol_abs + settings.f_tol_rel * best.abs()
            && diameter <= settings.x_tol;
        if converged || evals >= settings.max_evals || n == 0 {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|(x, _)| x[i]).sum::<f64>() / n as f64)
            .collect();
        let along = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let xr = along(REFLECT);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(EXPAND);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = along(CONTRACT * REFLECT);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-CONTRACT);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = anchor
                .iter()
                .zip(&vertex.0)
                .map(|(a, v)| a + SHRINK * (v - a))
                .collect();
            let fx = eval(&x, &mut evals);
            *vertex = (x, fx);
        }
    }

    let (x, f) = simplex.swap_remove(0);
    NelderMeadResult {
        x,
        f,
        evals,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let settings = NelderMeadSettings {
            max_evals: 5000,
            f_tol_rel: 0.0,
            f_tol_abs: 1e-16,
            x_tol: 1e-9,
            initial_step: 0.5,
        };
        let r = minimize(rosen, &[-1.2, 1.0], &settings);
        assert!(r.f < 1e-10, "f = {}", r.f);
        assert!((r.x[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| if x[0] > 0.0 { f64::NAN } else { x[0].abs() + 1.0 };
        let r = minimize(f, &[0.0], &NelderMeadSettings::default());
        assert!(r.f <= 1.0);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn respects_eval_budget() {
        let settings = NelderMeadSettings {
            max_evals: 20,
            ..Default::default()
        };
        let r = minimize(|x: &[f64]| x.iter().map(|v| v.sin()).sum(), &[0.0; 3], &settings);
        // one iteration may overshoot by at most n + 1 evaluations
        assert!(r.evals <= 20 + 4);
    }
}
