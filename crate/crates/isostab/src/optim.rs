//! Derivative-free minimization: a deterministic Nelder-Mead simplex with
//! the standard reflection/expansion/contraction/shrink moves, plus a
//! multi-start driver. Objectives here are smooth and low-dimensional
//! (asymmetry centers), so no restarts or adaptive parameters are needed.

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    pub ftol: f64,
    pub xtol: f64,
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_iter: 500,
            ftol: 1e-10,
            xtol: 1e-12,
            initial_step: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn nelder_mead(
    objective: &mut dyn FnMut(&[f64]) -> f64,
    start: &[f64],
    opts: &NelderMeadOptions,
) -> MinResult {
    let dim = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((start.to_vec(), objective(start)));
    for i in 0..dim {
        let mut p = start.to_vec();
        p[i] += opts.initial_step;
        let f = objective(&p);
        simplex.push((p, f));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        let spread: f64 = simplex
            .iter()
            .flat_map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(&a, &b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= opts.ftol * (1.0 + best.abs()) && spread <= opts.xtol.max(1e-14)
        {
            converged = true;
            break;
        }

        // centroid of all but the worst
        let mut centroid = vec![0.0; dim];
        for (p, _) in simplex.iter().take(dim) {
            for (c, &v) in centroid.iter_mut().zip(p) {
                *c += v / dim as f64;
            }
        }
        let point_along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(&c, &w)| c + t * (c - w))
                .collect()
        };

        let reflected = point_along(alpha);
        let f_r = objective(&reflected);
        if f_r < simplex[0].1 {
            let expanded = point_along(gamma);
            let f_e = objective(&expanded);
            simplex[dim] = if f_e < f_r {
                (expanded, f_e)
            } else {
                (reflected, f_r)
            };
            continue;
        }
        if f_r < simplex[dim - 1].1 {
            simplex[dim] = (reflected, f_r);
            continue;
        }
        let contracted = if f_r < simplex[dim].1 {
            point_along(rho)
        } else {
            point_along(-rho)
        };
        let f_c = objective(&contracted);
        if f_c < simplex[dim].1.min(f_r) {
            simplex[dim] = (contracted, f_c);
            continue;
        }
        // shrink toward the best vertex
        let best_point = simplex[0].0.clone();
        for entry in simplex.iter_mut().skip(1) {
            for (v, &b) in entry.0.iter_mut().zip(&best_point) {
                *v = b + sigma * (*v - b);
            }
            entry.1 = objective(&entry.0);
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    MinResult {
        x: simplex[0].0.clone(),
        f: simplex[0].1,
        iterations,
        converged,
    }
}

/// Run Nelder-Mead from each start and keep the best minimum. Starts are
/// supplied by the caller, so results are deterministic.
pub fn multi_start(
    objective: &mut dyn FnMut(&[f64]) -> f64,
    starts: &[Vec<f64>],
    opts: &NelderMeadOptions,
) -> MinResult {
    assert!(!starts.is_empty());
    let mut best: Option<MinResult> = None;
    for s in starts {
        let r = nelder_mead(objective, s, opts);
        best = match best {
            None => Some(r),
            Some(b) if r.f < b.f => Some(r),
            Some(b) => Some(b),
        };
    }
    best.unwrap()
}

/// The deterministic start pattern used by the asymmetry searches: the
/// origin, then +/- step along each coordinate, then a diagonal point,
/// truncated or cycled to exactly `count` starts.
pub fn coordinate_starts(dim: usize, step: f64, count: usize) -> Vec<Vec<f64>> {
    let mut starts = vec![vec![0.0; dim]];
    for i in 0..dim {
        for sign in [1.0, -1.0] {
            let mut p = vec![0.0; dim];
            p[i] = sign * step;
            starts.push(p);
        }
    }
    let diag = vec![step / (dim as f64).sqrt(); dim];
    starts.push(diag);
    while starts.len() < count {
        let k = starts.len() - 2 * dim - 2;
        let mut p = vec![step / 2.0; dim];
        p[k % dim] = -step;
        starts.push(p);
    }
    starts.truncate(count);
    starts
}
