//! Mean-curvature truncation by a penalized obstacle problem: minimize
//! P(E) + lambda |E| over radial graphs E containing a fixed star-shaped
//! set, by projected gradient descent with a Barzilai-Borwein step and a
//! monotone Armijo line search.
//!
//! The energy is discretized on an internal 1-D mesh (uniform in the polar
//! angle, so the stencil scales stay bounded) with a banded
//! finite-difference derivative; its exact discrete gradient is available,
//! and at stationarity the free nodes satisfy the discrete
//! constant-mean-curvature condition H_E = -lambda.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::NormalGraphSet;
use crate::quad::kahan_sum;
use crate::sphere::{GridMode, ScalarField, SphereGrid, unit_sphere_area};

#[derive(Debug, Clone)]
pub struct ObstacleOpts {
    /// converged when the projected-gradient norm drops below this
    pub gtol: f64,
    pub max_iter: usize,
    /// acceptable |H_E + lambda| on the free set
    pub cmc_tol: f64,
    /// contact threshold: v - u <= tau_free_scale (1 + sup |u|)
    pub tau_free_scale: f64,
    /// internal mesh size (0 = derived from the set's grid)
    pub mesh_size: usize,
}

impl Default for ObstacleOpts {
    fn default() -> Self {
        ObstacleOpts {
            gtol: 1e-9,
            max_iter: 50_000,
            cmc_tol: 1e-3,
            tau_free_scale: 1e-7,
            mesh_size: 0,
        }
    }
}

/// Internal solver mesh: polar angles, quadrature weights, derivative.
struct Mesh {
    n: f64,
    theta: Vec<f64>,
    w: Vec<f64>,
    d: DerivativeMatrix,
    periodic: bool,
}

impl Mesh {
    fn for_set(set: &NormalGraphSet, opts: &ObstacleOpts) -> Result<Mesh> {
        let grid = set.grid();
        match grid.mode() {
            GridMode::Full if grid.dim() == 1 => {
                // the circle grid is already uniform; solve on it directly
                let theta: Vec<f64> = (0..grid.len()).map(|i| grid.polar_angle(i)).collect();
                let d = DerivativeMatrix::build(&theta, true)?;
                Ok(Mesh {
                    n: 1.0,
                    theta,
                    w: grid.weights().to_vec(),
                    d,
                    periodic: true,
                })
            }
            GridMode::Full => Err(Error::Capability(
                "the obstacle solver runs on 1-D grids (circle or axisymmetric)".into(),
            )),
            GridMode::Axisymmetric => {
                let m = if opts.mesh_size > 0 {
                    opts.mesh_size
                } else {
                    grid.len().max(512)
                };
                let h = std::f64::consts::PI / m as f64;
                let omega = unit_sphere_area(grid.dim() - 1);
                let nm1 = grid.dim() as i32 - 1;
                let theta: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) * h).collect();
                let w: Vec<f64> = theta
                    .iter()
                    .map(|&t| omega * t.sin().powi(nm1) * h)
                    .collect();
                let d = DerivativeMatrix::build(&theta, false)?;
                Ok(Mesh {
                    n: grid.dim() as f64,
                    theta,
                    w,
                    d,
                    periodic: false,
                })
            }
        }
    }

    fn len(&self) -> usize {
        self.theta.len()
    }

    /// nodes whose stencil neither touches the mesh ends (where one-sided
    /// differences degrade) nor straddles the given mask transition
    fn interior(&self, i: usize, mask: &[bool]) -> bool {
        let m = self.len();
        if !self.periodic && (i < 3 || i + 3 >= m) {
            return false;
        }
        (i.saturating_sub(2)..=(i + 2).min(m - 1)).all(|j| mask[j] == mask[i])
    }
}

#[derive(Debug)]
pub struct ObstacleSolveResult {
    /// solution graph viewed on the input grid (linear interpolation of the
    /// internal mesh values; the verification quantities use the mesh)
    pub v: ScalarField,
    pub lambda: f64,
    /// internal mesh polar angles
    pub theta: Vec<f64>,
    pub v_internal: Vec<f64>,
    pub u_internal: Vec<f64>,
    /// nodes where the solution sits on the obstacle
    pub contact_mask: Vec<bool>,
    /// discrete first-variation mean curvature of the solution graph
    pub h_e: Vec<f64>,
    pub energy_history: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub pg_norm: f64,
}

/// 5-point finite-difference first-derivative stencils (Fornberg weights),
/// periodic or with shifted one-sided windows at open ends.
struct DerivativeMatrix {
    rows: Vec<([usize; 5], [f64; 5])>,
}

impl DerivativeMatrix {
    /// Periodic stencils for the circle. For the axisymmetric midpoint mesh
    /// the field extends evenly across both poles, and the mesh reflects
    /// onto itself exactly (theta_(-1-j) = -theta_j about 0), so centered
    /// stencils with mirrored columns apply at the ends too.
    fn build(theta: &[f64], periodic: bool) -> Result<DerivativeMatrix> {
        let m = theta.len();
        if m < 8 {
            return Err(Error::precondition("mesh size", "need >= 8 nodes"));
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut rows = Vec::with_capacity(m);
        for i in 0..m {
            let mut cols = [0usize; 5];
            let mut ts = [0.0f64; 5];
            for (k, off) in (-2i64..=2).enumerate() {
                let raw = i as i64 + off;
                if periodic {
                    let j = raw.rem_euclid(m as i64) as usize;
                    cols[k] = j;
                    ts[k] = theta[j]
                        + if raw < 0 {
                            -two_pi
                        } else if raw >= m as i64 {
                            two_pi
                        } else {
                            0.0
                        };
                } else if raw < 0 {
                    let j = (-1 - raw) as usize;
                    cols[k] = j;
                    ts[k] = -theta[j];
                } else if raw >= m as i64 {
                    let j = (2 * m as i64 - 1 - raw) as usize;
                    cols[k] = j;
                    ts[k] = two_pi - theta[j];
                } else {
                    cols[k] = raw as usize;
                    ts[k] = theta[raw as usize];
                }
            }
            rows.push((cols, fornberg5(&ts, theta[i])));
        }
        Ok(DerivativeMatrix { rows })
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (i, (cols, w)) in self.rows.iter().enumerate() {
            out[i] = (0..5).map(|k| w[k] * v[cols[k]]).sum();
        }
    }

    fn apply_transpose(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, (cols, w)) in self.rows.iter().enumerate() {
            for k in 0..5 {
                out[cols[k]] += w[k] * v[i];
            }
        }
    }
}

/// first-derivative weights for 5 arbitrary nodes at evaluation point x0
/// (Fornberg's recursion, order 1)
fn fornberg5(ts: &[f64; 5], x0: f64) -> [f64; 5] {
    let n = 5;
    let mut c = [[0.0f64; 2]; 5];
    let mut c1 = 1.0;
    let mut c4 = ts[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = ts[i] - x0;
        for j in 0..i {
            let c3 = ts[i] - ts[j];
            c2 *= c3;
            if j == i - 1 {
                c[i][1] = c1 * (c[i - 1][0] - c5 * c[i - 1][1]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            c[j][1] = (c4 * c[j][1] - c[j][0]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    [c[0][1], c[1][1], c[2][1], c[3][1], c[4][1]]
}

/// perimeter density and its partial derivatives:
/// F(v, g) = (1+v)^(n-1) sqrt((1+v)^2 + g^2)
fn density(n: f64, v: f64, g: f64) -> (f64, f64, f64) {
    let rho = 1.0 + v;
    let w = (rho * rho + g * g).sqrt();
    let f = rho.powf(n - 1.0) * w;
    let f_v = (n - 1.0) * rho.powf(n - 2.0) * w + rho.powf(n - 1.0) * rho / w;
    let f_g = rho.powf(n - 1.0) * g / w;
    (f, f_v, f_g)
}

/// second derivatives of the density, for the Jacobi preconditioner
fn density_second(n: f64, v: f64, g: f64) -> (f64, f64, f64) {
    let rho = 1.0 + v;
    let w = (rho * rho + g * g).sqrt();
    let f_vv = (n - 1.0) * (n - 2.0) * rho.powf(n - 3.0) * w
        + (n - 1.0) * rho.powf(n - 1.0) / w
        + n * rho.powf(n - 1.0) / w
        - rho.powf(n + 1.0) / w.powi(3);
    let f_gg = rho.powf(n + 1.0) / w.powi(3);
    let f_vg = (n - 1.0) * rho.powf(n - 2.0) * g / w - rho.powf(n) * g / w.powi(3);
    (f_vv, f_gg, f_vg)
}

struct DiscreteEnergy<'a> {
    mesh: &'a Mesh,
    lambda: f64,
}

impl<'a> DiscreteEnergy<'a> {
    fn energy(&self, v: &[f64]) -> f64 {
        let m = v.len();
        let n = self.mesh.n;
        let mut g = vec![0.0; m];
        self.mesh.d.apply(v, &mut g);
        kahan_sum((0..m).map(|i| {
            let (f, _, _) = density(n, v[i], g[i]);
            self.mesh.w[i] * (f + self.lambda * (1.0 + v[i]).powf(n + 1.0) / (n + 1.0))
        }))
    }

    /// exact gradient of the discrete energy w.r.t. nodal values
    fn gradient(&self, v: &[f64], out: &mut [f64]) {
        let m = v.len();
        let n = self.mesh.n;
        let mut g = vec![0.0; m];
        self.mesh.d.apply(v, &mut g);
        let mut wfg = vec![0.0; m];
        for i in 0..m {
            let (_, f_v, f_g) = density(n, v[i], g[i]);
            out[i] = self.mesh.w[i] * (f_v + self.lambda * (1.0 + v[i]).powf(n));
            wfg[i] = self.mesh.w[i] * f_g;
        }
        let mut dt = vec![0.0; m];
        self.mesh.d.apply_transpose(&wfg, &mut dt);
        for i in 0..m {
            out[i] += dt[i];
        }
    }

    /// diagonal of the discrete Hessian (Jacobi preconditioner)
    fn hessian_diag(&self, v: &[f64], g: &[f64], out: &mut [f64]) {
        let n = self.mesh.n;
        for x in out.iter_mut() {
            *x = 0.0;
        }
        for (j, (cols, wt)) in self.mesh.d.rows.iter().enumerate() {
            let (_, f_gg, _) = density_second(n, v[j], g[j]);
            for k in 0..5 {
                out[cols[k]] += self.mesh.w[j] * f_gg * wt[k] * wt[k];
            }
        }
        for (i, (cols, wt)) in self.mesh.d.rows.iter().enumerate() {
            let (f_vv, _, f_vg) = density_second(n, v[i], g[i]);
            let d_ii = (0..5).find(|&k| cols[k] == i).map_or(0.0, |k| wt[k]);
            out[i] += self.mesh.w[i]
                * (f_vv + self.lambda * n * (1.0 + v[i]).powf(n - 1.0) + 2.0 * f_vg * d_ii);
            out[i] = out[i].max(1e-300);
        }
    }

    /// discrete first-variation mean curvature:
    /// H_i = (dP/dv_i) / (w_i (1+v_i)^n)
    fn mean_curvature(&self, v: &[f64]) -> Vec<f64> {
        let m = v.len();
        let n = self.mesh.n;
        let mut g = vec![0.0; m];
        self.mesh.d.apply(v, &mut g);
        let mut wfg = vec![0.0; m];
        let mut fv = vec![0.0; m];
        for i in 0..m {
            let (_, f_v, f_g) = density(n, v[i], g[i]);
            fv[i] = self.mesh.w[i] * f_v;
            wfg[i] = self.mesh.w[i] * f_g;
        }
        let mut dt = vec![0.0; m];
        self.mesh.d.apply_transpose(&wfg, &mut dt);
        (0..m)
            .map(|i| (fv[i] + dt[i]) / (self.mesh.w[i] * (1.0 + v[i]).powf(n)))
            .collect()
    }

    fn perimeter(&self, v: &[f64]) -> f64 {
        let m = v.len();
        let n = self.mesh.n;
        let mut g = vec![0.0; m];
        self.mesh.d.apply(v, &mut g);
        kahan_sum((0..m).map(|i| self.mesh.w[i] * density(n, v[i], g[i]).0))
    }

    fn volume(&self, v: &[f64]) -> f64 {
        let n = self.mesh.n;
        kahan_sum(
            v.iter()
                .zip(&self.mesh.w)
                .map(|(&vi, &w)| w * (1.0 + vi).powf(n + 1.0)),
        ) / (n + 1.0)
    }
}

/// sample the graph function of a set at the mesh angles
fn sample_on_mesh(set: &NormalGraphSet, mesh: &Mesh) -> Vec<f64> {
    let grid = set.grid();
    let amb = grid.ambient();
    mesh.theta
        .iter()
        .map(|&t| {
            let mut dir = vec![0.0; amb];
            dir[0] = t.sin();
            dir[amb - 1] = t.cos();
            set.u().eval_at(&dir)
        })
        .collect()
}

/// Minimize P(E) + lambda |E| over radial graphs v >= u.
pub fn truncate_mean_curvature(
    set: &NormalGraphSet,
    lambda: f64,
    opts: &ObstacleOpts,
) -> Result<ObstacleSolveResult> {
    let mesh = Mesh::for_set(set, opts)?;
    let u = sample_on_mesh(set, &mesh);
    if lambda <= 0.0 {
        return Err(Error::precondition("lambda > 0", format!("lambda = {lambda}")));
    }
    solve(set, &mesh, &u, lambda, opts, u.clone())
}

/// Re-solve from a different starting point (used by the robustness checks).
pub fn truncate_from_start(
    set: &NormalGraphSet,
    lambda: f64,
    opts: &ObstacleOpts,
    start: &ScalarField,
) -> Result<ObstacleSolveResult> {
    let mesh = Mesh::for_set(set, opts)?;
    let u = sample_on_mesh(set, &mesh);
    let amb = set.grid().ambient();
    let s: Vec<f64> = mesh
        .theta
        .iter()
        .map(|&t| {
            let mut dir = vec![0.0; amb];
            dir[0] = t.sin();
            dir[amb - 1] = t.cos();
            start.eval_at(&dir)
        })
        .collect();
    solve(set, &mesh, &u, lambda, opts, s)
}

fn solve(
    set: &NormalGraphSet,
    mesh: &Mesh,
    u: &[f64],
    lambda: f64,
    opts: &ObstacleOpts,
    start: Vec<f64>,
) -> Result<ObstacleSolveResult> {
    let energy = DiscreteEnergy { mesh, lambda };
    let m = u.len();
    let mut v: Vec<f64> = start.iter().zip(u).map(|(&s, &o)| s.max(o)).collect();
    let mut grad = vec![0.0; m];
    let mut g_work = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut dir = vec![0.0; m];
    let mut e = energy.energy(&v);
    let mut history = vec![e];
    let refresh = |v: &[f64], grad: &mut [f64], dir: &mut [f64], diag: &mut [f64], g: &mut [f64]| {
        energy.gradient(v, grad);
        mesh.d.apply(v, g);
        energy.hessian_diag(v, g, diag);
        for i in 0..m {
            dir[i] = grad[i] / diag[i];
        }
    };
    refresh(&v, &mut grad, &mut dir, &mut diag, &mut g_work);
    let mut alpha = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut converged = false;
    let mut pg_norm = f64::INFINITY;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        // optimality: L2(S^n) norm of the unit-step projected residual in
        // the Jacobi metric
        pg_norm = (0..m)
            .map(|i| {
                let p = (v[i] - dir[i]).max(u[i]);
                mesh.w[i] * (v[i] - p) * (v[i] - p)
            })
            .sum::<f64>()
            .sqrt();
        if pg_norm <= opts.gtol {
            converged = true;
            break;
        }
        // Barzilai-Borwein step from the previous pair, in the diag metric
        if let Some((pv, pd)) = &prev {
            let mut ss = 0.0;
            let mut sy = 0.0;
            for i in 0..m {
                let s = v[i] - pv[i];
                let y = dir[i] - pd[i];
                ss += diag[i] * s * s;
                sy += diag[i] * s * y;
            }
            alpha = if sy > 0.0 { (ss / sy).clamp(1e-8, 1e4) } else { 1.0 };
        }
        prev = Some((v.clone(), dir.clone()));

        // monotone Armijo backtracking on the projected step
        let mut step = alpha;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = (0..m).map(|i| (v[i] - step * dir[i]).max(u[i])).collect();
            let e_trial = energy.energy(&trial);
            let decrease: f64 = (0..m).map(|i| grad[i] * (trial[i] - v[i])).sum();
            if e_trial <= e + 1e-4 * decrease {
                v = trial;
                e = e_trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // the line search stalled at the energy's floating-point floor;
            // accept stationarity only if the measure is already near gtol
            converged = pg_norm <= 1e3 * opts.gtol;
            break;
        }
        history.push(e);
        refresh(&v, &mut grad, &mut dir, &mut diag, &mut g_work);
    }

    let tau = opts.tau_free_scale * (1.0 + u.iter().fold(0.0f64, |a, &b| a.max(b.abs())));
    let contact_mask: Vec<bool> = v.iter().zip(u).map(|(&a, &b)| a - b <= tau).collect();
    let h_e = energy.mean_curvature(&v);
    // view on the caller's grid by linear interpolation in theta
    let grid = set.grid().clone();
    let view: Vec<f64> = (0..grid.len())
        .map(|i| interp_theta(&mesh.theta, &v, grid.polar_angle(i), mesh.periodic))
        .collect();
    Ok(ObstacleSolveResult {
        v: ScalarField::from_values(grid, view),
        lambda,
        theta: mesh.theta.clone(),
        v_internal: v,
        u_internal: u.to_vec(),
        contact_mask,
        h_e,
        energy_history: history,
        converged,
        iterations,
        pg_norm,
    })
}

fn interp_theta(theta: &[f64], v: &[f64], t: f64, periodic: bool) -> f64 {
    let m = theta.len();
    if !periodic {
        if t <= theta[0] {
            return v[0];
        }
        if t >= theta[m - 1] {
            return v[m - 1];
        }
    }
    let mut lo = 0usize;
    let mut hi = m - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if theta[mid] <= t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (t0, t1) = (theta[lo], theta[hi]);
    let s = (t - t0) / (t1 - t0);
    v[lo] * (1.0 - s) + v[hi] * s
}

/// The conclusions of the truncation construction, evaluated on a solve.
#[derive(Debug, Clone, Serialize)]
pub struct TruncationReport {
    pub delta_omega: f64,
    /// lambda |E \ Omega| + H^n(dE \ dOmega)
    pub distance_bound_lhs: f64,
    /// the above should not exceed delta(Omega)
    pub distance_bound_holds: bool,
    pub sup_abs_h_e: f64,
    /// max(sup H_Omega^+, lambda)
    pub h_bound: f64,
    pub h_bound_holds: bool,
    /// sup |H_E + lambda| over interior free nodes
    pub free_cmc_residual: f64,
    pub free_node_count: usize,
    pub contact_fraction: f64,
    /// E and Omega coincide within the contact threshold everywhere
    pub e_equals_omega: bool,
    pub excess_volume: f64,
    pub free_area: f64,
}

pub fn verify_truncation(
    result: &ObstacleSolveResult,
    original: &NormalGraphSet,
) -> Result<TruncationReport> {
    if !result.converged {
        return Err(Error::NonConvergence(format!(
            "cannot verify an unconverged solve (pg norm {:.3e} after {} iterations)",
            result.pg_norm, result.iterations
        )));
    }
    let mesh = Mesh::for_set(
        original,
        &ObstacleOpts {
            mesh_size: result.theta.len(),
            ..Default::default()
        },
    )?;
    let energy = DiscreteEnergy {
        mesh: &mesh,
        lambda: result.lambda,
    };
    let u = &result.u_internal;
    let v = &result.v_internal;
    let m = mesh.len();
    // all measures from the same discrete functional for consistency
    let p_omega = energy.perimeter(u);
    let delta_omega = p_omega - unit_sphere_area(original.dim());
    let excess_volume = energy.volume(v) - energy.volume(u);
    let mut g = vec![0.0; m];
    mesh.d.apply(v, &mut g);
    let free_area = kahan_sum((0..m).filter(|&i| !result.contact_mask[i]).map(|i| {
        mesh.w[i] * density(mesh.n, v[i], g[i]).0
    }));
    let distance_bound_lhs = result.lambda * excess_volume + free_area;

    // compare curvatures through the same discrete operator on both sides
    let h_u = energy.mean_curvature(u);
    let all_free = vec![false; m];
    let sup_h_plus = (0..m)
        .filter(|&i| mesh.interior(i, &all_free))
        .map(|i| h_u[i])
        .fold(0.0f64, f64::max);
    let h_bound = sup_h_plus.max(result.lambda);
    // discrete curvature is meaningless on stencils that straddle the
    // C^(1,1) kink at the free boundary or touch the mesh ends
    let sup_abs_h_e = (0..m)
        .filter(|&i| mesh.interior(i, &result.contact_mask))
        .map(|i| result.h_e[i].abs())
        .fold(0.0f64, f64::max);

    let mut free_cmc_residual = 0.0f64;
    let mut free_node_count = 0usize;
    for i in 0..m {
        if result.contact_mask[i] {
            continue;
        }
        free_node_count += 1;
        if mesh.interior(i, &result.contact_mask) {
            free_cmc_residual = free_cmc_residual.max((result.h_e[i] + result.lambda).abs());
        }
    }
    let contact_count = result.contact_mask.iter().filter(|&&c| c).count();
    Ok(TruncationReport {
        delta_omega,
        distance_bound_lhs,
        distance_bound_holds: distance_bound_lhs <= delta_omega * 1.05 + 1e-12,
        sup_abs_h_e,
        h_bound,
        h_bound_holds: sup_abs_h_e <= h_bound + 1e-3,
        free_cmc_residual,
        free_node_count,
        contact_fraction: contact_count as f64 / m as f64,
        e_equals_omega: contact_count == m,
        excess_volume,
        free_area,
    })
}

/// Zonal dimple: u = -depth b(theta / width) with the standard bump b.
pub fn dimple_field(
    grid: &std::sync::Arc<SphereGrid>,
    depth: f64,
    width: f64,
) -> ScalarField {
    let values: Vec<f64> = (0..grid.len())
        .map(|i| {
            let s = grid.polar_angle(i) / width;
            if s.abs() >= 1.0 {
                0.0
            } else {
                -depth * (1.0 - 1.0 / (1.0 - s * s)).exp()
            }
        })
        .collect();
    ScalarField::from_values_analyzed(grid.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_set;
    use crate::sphere::build_grid;
    use approx::assert_relative_eq;

    fn axisym_grid(n: usize, res: usize) -> std::sync::Arc<SphereGrid> {
        build_grid(n, res, GridMode::Axisymmetric).unwrap()
    }

    #[test]
    fn derivative_matrix_accuracy() {
        let theta: Vec<f64> = (0..256).map(|i| (i as f64 + 0.5) * std::f64::consts::PI / 256.0).collect();
        let d = DerivativeMatrix::build(&theta, false).unwrap();
        let v: Vec<f64> = theta.iter().map(|&t| t.sin().powi(2)).collect();
        let mut dv = vec![0.0; 256];
        d.apply(&v, &mut dv);
        let mut worst = 0.0f64;
        for i in 0..256 {
            worst = worst.max((dv[i] - 2.0 * theta[i].sin() * theta[i].cos()).abs());
        }
        assert!(worst < 1e-7, "FD error {worst}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let grid = axisym_grid(2, 64);
        let set = build_set(&ScalarField::constant(grid, 0.0)).unwrap();
        let mesh = Mesh::for_set(&set, &ObstacleOpts { mesh_size: 64, ..Default::default() }).unwrap();
        let energy = DiscreteEnergy { mesh: &mesh, lambda: 2.0 };
        let m = mesh.len();
        let v: Vec<f64> = mesh.theta.iter().map(|&t| 0.1 * (3.0 * t).cos()).collect();
        let mut g = vec![0.0; m];
        energy.gradient(&v, &mut g);
        for i in [0usize, 7, m / 2, m - 1] {
            let h = 1e-6;
            let mut vp = v.clone();
            vp[i] += h;
            let mut vm = v.clone();
            vm[i] -= h;
            let fd = (energy.energy(&vp) - energy.energy(&vm)) / (2.0 * h);
            assert_relative_eq!(g[i], fd, max_relative = 1e-5, epsilon = 1e-12);
        }
    }

    #[test]
    fn ball_is_stationary_for_lambda_n() {
        // the energy increases outward from the unit ball for lambda = n,
        // so the minimizer with obstacle u = 0 is the ball itself
        let grid = axisym_grid(2, 256);
        let set = build_set(&ScalarField::constant(grid.clone(), 0.0)).unwrap();
        let res = truncate_mean_curvature(&set, 2.0, &ObstacleOpts::default()).unwrap();
        assert!(res.converged);
        let sup: f64 = res.v_internal.iter().fold(0.0, |a, &b| a.max(b.abs()));
        assert!(sup < 1e-5, "sup v = {sup}");
        // perturbed starts return to the ball
        for bump in [0.05, 0.2] {
            let start = ScalarField::constant(grid.clone(), bump);
            let res = truncate_from_start(&set, 2.0, &ObstacleOpts::default(), &start).unwrap();
            assert!(res.converged);
            let sup: f64 = res.v_internal.iter().fold(0.0, |a, &b| a.max(b.abs()));
            assert!(sup < 1e-5, "sup v = {sup}");
        }
    }

    #[test]
    fn dimple_grows_free_region() {
        // admissible set (H <= n after scaling) whose dimple floor is more
        // negative than -lambda
        let grid = axisym_grid(2, 512);
        let set = build_set(&dimple_field(&grid, 0.3, 0.5))
            .unwrap()
            .enforce_h_le_n()
            .unwrap();
        let lambda = 0.25;
        assert!(set.mean_curvature().min_value() < -lambda);
        let opts = ObstacleOpts {
            mesh_size: 2048,
            ..Default::default()
        };
        let res = truncate_mean_curvature(&set, lambda, &opts).unwrap();
        assert!(res.converged, "pg norm {} iters {}", res.pg_norm, res.iterations);
        for (a, b) in res.v_internal.iter().zip(&res.u_internal) {
            assert!(a - b >= -1e-12);
        }
        let free: usize = res.contact_mask.iter().filter(|&&c| !c).count();
        assert!(free > 10, "free nodes {free}");
        for w in res.energy_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        let report = verify_truncation(&res, &set).unwrap();
        assert!(report.free_cmc_residual <= 1e-3, "cmc {}", report.free_cmc_residual);
        assert!(
            report.distance_bound_holds,
            "lhs {} vs delta {}",
            report.distance_bound_lhs,
            report.delta_omega
        );
        assert!(
            report.h_bound_holds,
            "sup|H_E| {} vs bound {}",
            report.sup_abs_h_e,
            report.h_bound
        );
    }

    #[test]
    fn lambda_monotonicity_and_pinning() {
        let grid = axisym_grid(2, 384);
        let set = build_set(&dimple_field(&grid, 0.3, 0.5))
            .unwrap()
            .enforce_h_le_n()
            .unwrap();
        let opts = ObstacleOpts::default();
        let v_lo = truncate_mean_curvature(&set, 0.2, &opts).unwrap();
        let v_mid = truncate_mean_curvature(&set, 0.4, &opts).unwrap();
        let v_hi = truncate_mean_curvature(&set, 8.0, &opts).unwrap();
        assert!(v_lo.converged && v_mid.converged && v_hi.converged);
        // larger penalty hugs the obstacle
        for (a, b) in v_lo.v_internal.iter().zip(&v_mid.v_internal) {
            assert!(a - b >= -1e-6);
        }
        // lambda -> infinity pins E to Omega
        let gap_hi = v_hi
            .v_internal
            .iter()
            .zip(&v_hi.u_internal)
            .map(|(&a, &b)| a - b)
            .fold(0.0f64, f64::max);
        let gap_lo = v_lo
            .v_internal
            .iter()
            .zip(&v_lo.u_internal)
            .map(|(&a, &b)| a - b)
            .fold(0.0f64, f64::max);
        assert!(gap_hi < 0.05 * gap_lo, "gap {gap_hi} vs {gap_lo}");
    }

    #[test]
    fn energy_never_exceeds_obstacle_energy() {
        let grid = axisym_grid(3, 256);
        let set = build_set(&dimple_field(&grid, 0.25, 0.5))
            .unwrap()
            .enforce_h_le_n()
            .unwrap();
        let res = truncate_mean_curvature(&set, 0.3, &ObstacleOpts::default()).unwrap();
        assert!(res.converged);
        assert!(
            *res.energy_history.last().unwrap() <= res.energy_history[0] + 1e-12,
            "energy increased"
        );
    }

    #[test]
    fn descent_invariance_across_starts() {
        let grid = axisym_grid(2, 384);
        let set = build_set(&dimple_field(&grid, 0.3, 0.5))
            .unwrap()
            .enforce_h_le_n()
            .unwrap();
        let opts = ObstacleOpts::default();
        let base = truncate_mean_curvature(&set, 0.25, &opts).unwrap();
        assert!(base.converged);
        for c in [0.1, 0.4] {
            let start = ScalarField::constant(grid.clone(), set.u().max_value() + c);
            let other = truncate_from_start(&set, 0.25, &opts, &start).unwrap();
            assert!(other.converged);
            let dist = base
                .v_internal
                .iter()
                .zip(&other.v_internal)
                .map(|(&a, &b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(dist < 1e-6, "solutions differ by {dist}");
        }
    }

    #[test]
    fn rejects_bad_lambda_and_2d_grids() {
        let grid = axisym_grid(2, 128);
        let set = build_set(&ScalarField::constant(grid, 0.0)).unwrap();
        assert!(truncate_mean_curvature(&set, 0.0, &ObstacleOpts::default()).is_err());
        let g2 = build_grid(2, 32, GridMode::Full).unwrap();
        let set2 = build_set(&ScalarField::constant(g2, 0.0)).unwrap();
        assert!(matches!(
            truncate_mean_curvature(&set2, 2.0, &ObstacleOpts::default()),
            Err(Error::Capability(_))
        ));
    }
}
