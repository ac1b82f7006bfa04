//! Nelder–Mead on the unit cube. Trial points that leave the cube are
//! mirrored back at its faces, which keeps the simplex from flattening onto
//! a face the way clamping would. A converged run is rebuilt around its best
//! vertex until a rebuild stops improving.

/// Outcome of one simplex run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexRun {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best value after every iteration.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Convergence when every vertex is within this distance (max-norm) of
    /// the best one.
    pub diameter_tol: f64,
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: 4000,
            diameter_tol: 1e-6,
            initial_step: 0.1,
        }
    }
}

fn clamp01(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}

fn fold01(x: &mut [f64]) {
    for v in x {
        let t = v.rem_euclid(2.0);
        *v = if t > 1.0 { 2.0 - t } else { t };
    }
}

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let best = &simplex[0];
    simplex[1..]
        .iter()
        .flat_map(|v| v.iter().zip(best).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

const REBUILDS: usize = 4;

pub fn minimize<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &SimplexOptions) -> SimplexRun {
    let mut run = descend(&mut f, x0, opts.max_iterations, opts);
    for _ in 0..REBUILDS {
        if !run.converged || run.iterations >= opts.max_iterations {
            break;
        }
        let again = descend(&mut f, &run.x, opts.max_iterations - run.iterations, opts);
        let floor = run.value;
        run.trace.extend(again.trace.iter().map(|v| v.min(floor)));
        run.iterations += again.iterations;
        run.converged = again.converged;
        if again.value < run.value {
            run.x = again.x;
            run.value = again.value;
        } else {
            break;
        }
    }
    run
}

fn descend<F: FnMut(&[f64]) -> f64>(f: &mut F, x0: &[f64], budget: usize, opts: &SimplexOptions) -> SimplexRun {
    let n = x0.len();
    let mut start = x0.to_vec();
    clamp01(&mut start);
    let mut simplex = vec![start.clone()];
    for i in 0..n {
        let mut v = start.clone();
        v[i] = if v[i] + opts.initial_step <= 1.0 { v[i] + opts.initial_step } else { v[i] - opts.initial_step };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < budget {
        // order vertices, ties keep insertion order
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&k| simplex[k].clone()).collect();
        values = order.iter().map(|&k| values[k]).collect();
        trace.push(values[0]);
        if diameter(&simplex) < opts.diameter_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| {
            let mut p: Vec<f64> = (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect();
            fold01(&mut p);
            p
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let x = along(-0.5);
            let v = f(&x);
            (x, v)
        } else {
            let x = along(0.5);
            let v = f(&x);
            (x, v)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for k in 1..=n {
            for j in 0..n {
                simplex[k][j] = best[j] + 0.5 * (simplex[k][j] - best[j]);
            }
            values[k] = f(&simplex[k]);
        }
    }
    let k = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    SimplexRun {
        x: simplex[k].clone(),
        value: values[k],
        iterations,
        converged,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_minimum() {
        let run = minimize(
            |x| (x[0] - 0.3).powi(2) + 10.0 * (x[1] - 0.7).powi(2),
            &[0.9, 0.1],
            &SimplexOptions::default(),
        );
        assert!(run.converged);
        assert!((run.x[0] - 0.3).abs() < 1e-5 && (run.x[1] - 0.7).abs() < 1e-5);
    }

    #[test]
    fn stays_in_cube() {
        let run = minimize(|x| -x[0] - x[1], &[0.5, 0.5], &SimplexOptions::default());
        assert!(run.x.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(run.x[0] > 0.999 && run.x[1] > 0.999);
    }

    #[test]
    fn escapes_a_flattened_simplex() {
        let run = minimize(
            |x| x[0].powi(2) + 3.0 * (x[1] - 0.027).powi(2),
            &[0.5, 0.5],
            &SimplexOptions::default(),
        );
        assert!(run.converged);
        assert!(run.x[0] < 1e-4 && (run.x[1] - 0.027).abs() < 1e-4, "{:?}", run.x);
    }

    #[test]
    fn trace_never_increases() {
        let run = minimize(|x| (x[0] - 0.1).abs() + (x[1] - 0.2).abs(), &[0.8, 0.8], &SimplexOptions::default());
        assert!(run.trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
