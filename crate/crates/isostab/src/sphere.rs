//! Discretizations of the unit sphere S^n with quadrature and tangential
//! differential operators.
//!
//! Three grid modes are supported:
//! * `Full` with n = 1: uniform nodes on the circle, Fourier spectral basis.
//! * `Full` with n = 2: Gauss-Legendre latitude x uniform longitude product
//!   grid, real spherical harmonics up to the band limit.
//! * `Axisymmetric` with any n >= 1: Gauss-Legendre nodes in the polar angle
//!   theta in [0, pi] with weight |S^(n-1)| sin^(n-1)(theta); zonal
//!   (Gegenbauer-in-cos-theta) spectral basis. This is how the rotationally
//!   symmetric sets in higher dimension are represented.
//!
//! Grids and fields are immutable after construction; all operations are
//! pure, so they can be shared across threads behind `Arc`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad::{gauss_legendre_on, kahan_sum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    Full,
    Axisymmetric,
}

/// |S^n| for the unit sphere in R^(n+1).
pub fn unit_sphere_area(n: usize) -> f64 {
    // |S^0| = 2, |S^1| = 2 pi, |S^n| = 2 pi |S^(n-2)| / (n - 1)
    match n {
        0 => 2.0,
        1 => 2.0 * std::f64::consts::PI,
        _ => 2.0 * std::f64::consts::PI * unit_sphere_area(n - 2) / (n as f64 - 1.0),
    }
}

/// |B_1| for the unit ball in R^(n+1), i.e. the volume enclosed by S^n.
pub fn unit_ball_volume(n: usize) -> f64 {
    unit_sphere_area(n) / (n as f64 + 1.0)
}

/// index of the (l, m>=0) associated-Legendre pair in the packed table
fn lm_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

enum Spectral {
    /// n = 1 full: uniform angles, orthonormal Fourier basis.
    Circle { theta: Vec<f64> },
    /// n = 2 full: factored real-spherical-harmonic transform tables.
    Sphere2 {
        n_lat: usize,
        n_lon: usize,
        theta: Vec<f64>,
        w_lat: Vec<f64>,
        /// normalized P_l^m(cos theta_i), packed by `lm_index`
        plm: Vec<f64>,
        /// d/d theta of the above
        dplm: Vec<f64>,
    },
    /// axisymmetric: zonal basis values and theta-derivatives per node
    Axisym {
        theta: Vec<f64>,
        basis: Vec<f64>,
        dbasis: Vec<f64>,
        d2basis: Vec<f64>,
        /// L2(S^n) norms used to orthonormalize the raw recurrence output
        inv_norm: Vec<f64>,
    },
}

pub struct SphereGrid {
    dim: usize,
    mode: GridMode,
    ambient: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    band_limit: usize,
    spectral: Spectral,
    adjacency: Vec<(u32, u32)>,
}

impl std::fmt::Debug for SphereGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SphereGrid")
            .field("dim", &self.dim)
            .field("mode", &self.mode)
            .field("nodes", &self.len())
            .field("band_limit", &self.band_limit)
            .finish()
    }
}

/// Build a grid. `resolution` is the node count for n = 1 and axisymmetric
/// grids, and the latitude count for the n = 2 product grid (longitudes are
/// twice that).
pub fn build_grid(n: usize, resolution: usize, mode: GridMode) -> Result<Arc<SphereGrid>> {
    SphereGrid::build(n, resolution, mode, None)
}

/// Same as [`build_grid`] with an explicit spectral band limit.
pub fn build_grid_with_band(
    n: usize,
    resolution: usize,
    mode: GridMode,
    band_limit: usize,
) -> Result<Arc<SphereGrid>> {
    SphereGrid::build(n, resolution, mode, Some(band_limit))
}

impl SphereGrid {
    fn build(
        n: usize,
        resolution: usize,
        mode: GridMode,
        band_limit: Option<usize>,
    ) -> Result<Arc<SphereGrid>> {
        if resolution < 8 {
            return Err(Error::precondition(
                "resolution >= 8",
                format!("got {resolution}"),
            ));
        }
        match (n, mode) {
            (1, GridMode::Full) => Ok(Arc::new(Self::circle(resolution, band_limit)?)),
            (2, GridMode::Full) => Ok(Arc::new(Self::sphere2(resolution, band_limit)?)),
            (m, GridMode::Full) => Err(Error::Capability(format!(
                "full grids support n in {{1, 2}}, got n = {m}; use axisymmetric mode"
            ))),
            (0, GridMode::Axisymmetric) => {
                Err(Error::Capability("axisymmetric mode needs n >= 1".into()))
            }
            (m, GridMode::Axisymmetric) => Ok(Arc::new(Self::axisym(m, resolution, band_limit)?)),
        }
    }

    fn circle(count: usize, band_limit: Option<usize>) -> Result<SphereGrid> {
        let max_band = (count - 1) / 2;
        let band = band_limit.unwrap_or_else(|| max_band.min(128));
        if band < 2 || band > max_band {
            return Err(Error::BandLimit {
                requested: band,
                limit: max_band,
            });
        }
        let w = 2.0 * std::f64::consts::PI / count as f64;
        let mut nodes = Vec::with_capacity(2 * count);
        let mut theta = Vec::with_capacity(count);
        for j in 0..count {
            let t = w * j as f64;
            theta.push(t);
            nodes.push(t.cos());
            nodes.push(t.sin());
        }
        let adjacency = (0..count as u32)
            .map(|i| (i, (i + 1) % count as u32))
            .collect();
        Ok(SphereGrid {
            dim: 1,
            mode: GridMode::Full,
            ambient: 2,
            nodes,
            weights: vec![w; count],
            band_limit: band,
            spectral: Spectral::Circle { theta },
            adjacency,
        })
    }

    fn sphere2(n_lat: usize, band_limit: Option<usize>) -> Result<SphereGrid> {
        let n_lon = 2 * n_lat;
        // analysis of a degree-L field needs exact quadrature of degree-2L
        // integrands: n_lat Gauss points handle 2 n_lat - 1 in cos(theta)
        let max_band = (n_lat - 1).min(n_lon / 2 - 1);
        let band = band_limit.unwrap_or_else(|| max_band.min(32));
        if band < 2 || band > max_band {
            return Err(Error::BandLimit {
                requested: band,
                limit: max_band,
            });
        }
        let (x, w_lat) = gauss_legendre_on(n_lat, -1.0, 1.0);
        // north-to-south ordering
        let theta: Vec<f64> = x.iter().rev().map(|&xi| xi.acos()).collect();
        let w_lat: Vec<f64> = w_lat.iter().rev().copied().collect();
        let w_lon = 2.0 * std::f64::consts::PI / n_lon as f64;

        let mut nodes = Vec::with_capacity(3 * n_lat * n_lon);
        let mut weights = Vec::with_capacity(n_lat * n_lon);
        for (i, &t) in theta.iter().enumerate() {
            let (st, ct) = (t.sin(), t.cos());
            for j in 0..n_lon {
                let phi = w_lon * j as f64;
                nodes.push(st * phi.cos());
                nodes.push(st * phi.sin());
                nodes.push(ct);
                weights.push(w_lat[i] * w_lon);
            }
        }

        let n_pairs = lm_index(band, band) + 1;
        let mut plm = vec![0.0; n_lat * n_pairs];
        let mut dplm = vec![0.0; n_lat * n_pairs];
        for (i, &t) in theta.iter().enumerate() {
            let row = &mut plm[i * n_pairs..(i + 1) * n_pairs];
            let drow = &mut dplm[i * n_pairs..(i + 1) * n_pairs];
            normalized_assoc_legendre(band, t, row, drow);
        }

        let idx = |i: u32, j: u32| i * n_lon as u32 + j;
        let mut adjacency = Vec::new();
        for i in 0..n_lat as u32 {
            for j in 0..n_lon as u32 {
                adjacency.push((idx(i, j), idx(i, (j + 1) % n_lon as u32)));
                if i + 1 < n_lat as u32 {
                    adjacency.push((idx(i, j), idx(i + 1, j)));
                }
            }
        }

        Ok(SphereGrid {
            dim: 2,
            mode: GridMode::Full,
            ambient: 3,
            nodes,
            weights,
            band_limit: band,
            spectral: Spectral::Sphere2 {
                n_lat,
                n_lon,
                theta,
                w_lat,
                plm,
                dplm,
            },
            adjacency,
        })
    }

    fn axisym(n: usize, count: usize, band_limit: Option<usize>) -> Result<SphereGrid> {
        let max_band = count / 2;
        let band = band_limit.unwrap_or_else(|| max_band.min(if n == 1 { 128 } else { 64 }));
        if band < 2 || band > max_band {
            return Err(Error::BandLimit {
                requested: band,
                limit: max_band,
            });
        }
        let (theta, w_gl) = gauss_legendre_on(count, 0.0, std::f64::consts::PI);
        let omega = unit_sphere_area(n - 1);
        let nm1 = (n - 1) as i32;
        let mut nodes = Vec::with_capacity((n + 1) * count);
        let mut weights = Vec::with_capacity(count);
        for (&t, &wg) in theta.iter().zip(&w_gl) {
            let (st, ct) = (t.sin(), t.cos());
            nodes.push(st);
            for _ in 1..n {
                nodes.push(0.0);
            }
            nodes.push(ct);
            weights.push(omega * st.powi(nm1) * wg);
        }

        // raw zonal basis (Gegenbauer in cos theta; Chebyshev when n = 1),
        // values plus first and second theta-derivatives per node
        let k_max = band;
        let mut basis = vec![0.0; count * (k_max + 1)];
        let mut dbasis = vec![0.0; count * (k_max + 1)];
        let mut d2basis = vec![0.0; count * (k_max + 1)];
        for (i, &t) in theta.iter().enumerate() {
            let row = i * (k_max + 1);
            zonal_basis(n, k_max, t, &mut basis[row..], &mut dbasis[row..], &mut d2basis[row..]);
        }
        // orthonormalize against the grid quadrature (exact for this family)
        let mut inv_norm = vec![0.0; k_max + 1];
        for k in 0..=k_max {
            let s: f64 = kahan_sum(
                (0..count).map(|i| weights[i] * basis[i * (k_max + 1) + k].powi(2)),
            );
            inv_norm[k] = 1.0 / s.sqrt();
        }
        for i in 0..count {
            for k in 0..=k_max {
                let j = i * (k_max + 1) + k;
                basis[j] *= inv_norm[k];
                dbasis[j] *= inv_norm[k];
                d2basis[j] *= inv_norm[k];
            }
        }

        let adjacency = (0..count as u32 - 1).map(|i| (i, i + 1)).collect();
        Ok(SphereGrid {
            dim: n,
            mode: GridMode::Axisymmetric,
            ambient: n + 1,
            nodes,
            weights,
            band_limit: band,
            spectral: Spectral::Axisym {
                theta,
                basis,
                dbasis,
                d2basis,
                inv_norm,
            },
            adjacency,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn mode(&self) -> GridMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.ambient..(i + 1) * self.ambient]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        kahan_sum(self.weights.iter().copied())
    }

    /// polar angle of node i (only meaningful for circle and axisymmetric
    /// grids, and for the latitude of the n = 2 grid)
    pub fn polar_angle(&self, i: usize) -> f64 {
        match &self.spectral {
            Spectral::Circle { theta } => theta[i],
            Spectral::Axisym { theta, .. } => theta[i],
            Spectral::Sphere2 { theta, n_lon, .. } => theta[i / n_lon],
        }
    }

    pub fn adjacency(&self) -> &[(u32, u32)] {
        &self.adjacency
    }

    pub fn coeff_len(&self) -> usize {
        match &self.spectral {
            Spectral::Circle { .. } => 2 * self.band_limit + 1,
            Spectral::Sphere2 { .. } => (self.band_limit + 1) * (self.band_limit + 1),
            Spectral::Axisym { .. } => self.band_limit + 1,
        }
    }

    /// spectral degree of the basis function behind a coefficient index
    pub fn coeff_degree(&self, idx: usize) -> usize {
        match &self.spectral {
            Spectral::Circle { .. } => {
                if idx == 0 {
                    0
                } else {
                    idx.div_ceil(2)
                }
            }
            Spectral::Sphere2 { .. } => (idx as f64).sqrt() as usize,
            Spectral::Axisym { .. } => idx,
        }
    }

    /// Quadrature projection of nodal values onto the spectral basis.
    pub fn analyze(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.len());
        match &self.spectral {
            Spectral::Circle { theta } => {
                let k_max = self.band_limit;
                let mut coeffs = vec![0.0; 2 * k_max + 1];
                let c0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
                let cp = 1.0 / std::f64::consts::PI.sqrt();
                coeffs[0] = kahan_sum(
                    values
                        .iter()
                        .zip(&self.weights)
                        .map(|(&f, &w)| w * f * c0),
                );
                for k in 1..=k_max {
                    let kf = k as f64;
                    let mut sc = 0.0;
                    let mut ss = 0.0;
                    for (j, (&f, &w)) in values.iter().zip(&self.weights).enumerate() {
                        let a = kf * theta[j];
                        sc += w * f * a.cos();
                        ss += w * f * a.sin();
                    }
                    coeffs[2 * k - 1] = sc * cp;
                    coeffs[2 * k] = ss * cp;
                }
                coeffs
            }
            Spectral::Sphere2 {
                n_lat,
                n_lon,
                w_lat,
                plm,
                ..
            } => {
                let band = self.band_limit;
                let n_pairs = lm_index(band, band) + 1;
                let w_lon = 2.0 * std::f64::consts::PI / *n_lon as f64;
                // longitude stage
                let mut gc = vec![0.0; n_lat * (band + 1)];
                let mut gs = vec![0.0; n_lat * (band + 1)];
                for i in 0..*n_lat {
                    let row = &values[i * n_lon..(i + 1) * n_lon];
                    for m in 0..=band {
                        let mut sc = 0.0;
                        let mut ss = 0.0;
                        for (j, &f) in row.iter().enumerate() {
                            let a = m as f64 * w_lon * j as f64;
                            sc += f * a.cos();
                            ss += f * a.sin();
                        }
                        gc[i * (band + 1) + m] = sc * w_lon;
                        gs[i * (band + 1) + m] = ss * w_lon;
                    }
                }
                // latitude stage
                let sqrt2 = std::f64::consts::SQRT_2;
                let mut coeffs = vec![0.0; (band + 1) * (band + 1)];
                for l in 0..=band {
                    for m in 0..=l {
                        let p_idx = lm_index(l, m);
                        let mut ac = 0.0;
                        let mut as_ = 0.0;
                        for i in 0..*n_lat {
                            let p = w_lat[i] * plm[i * n_pairs + p_idx];
                            ac += p * gc[i * (band + 1) + m];
                            as_ += p * gs[i * (band + 1) + m];
                        }
                        if m == 0 {
                            coeffs[l * l + l] = ac;
                        } else {
                            coeffs[l * l + l + m] = sqrt2 * ac;
                            coeffs[l * l + l - m] = sqrt2 * as_;
                        }
                    }
                }
                coeffs
            }
            Spectral::Axisym { basis, .. } => {
                let k_max = self.band_limit;
                let mut coeffs = vec![0.0; k_max + 1];
                for (k, c) in coeffs.iter_mut().enumerate() {
                    *c = kahan_sum(
                        (0..self.len())
                            .map(|i| self.weights[i] * values[i] * basis[i * (k_max + 1) + k]),
                    );
                }
                coeffs
            }
        }
    }

    /// Evaluate a coefficient vector at the grid nodes.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.coeff_len());
        match &self.spectral {
            Spectral::Circle { theta } => {
                let k_max = self.band_limit;
                let c0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
                let cp = 1.0 / std::f64::consts::PI.sqrt();
                theta
                    .iter()
                    .map(|&t| {
                        let mut v = coeffs[0] * c0;
                        for k in 1..=k_max {
                            let a = k as f64 * t;
                            v += cp * (coeffs[2 * k - 1] * a.cos() + coeffs[2 * k] * a.sin());
                        }
                        v
                    })
                    .collect()
            }
            Spectral::Sphere2 {
                n_lat, n_lon, plm, ..
            } => {
                let band = self.band_limit;
                let n_pairs = lm_index(band, band) + 1;
                let sqrt2 = std::f64::consts::SQRT_2;
                let w_lon = 2.0 * std::f64::consts::PI / *n_lon as f64;
                // latitude stage: per-(i, m) cos/sin amplitudes
                let mut hc = vec![0.0; n_lat * (band + 1)];
                let mut hs = vec![0.0; n_lat * (band + 1)];
                for i in 0..*n_lat {
                    for l in 0..=band {
                        for m in 0..=l {
                            let p = plm[i * n_pairs + lm_index(l, m)];
                            if m == 0 {
                                hc[i * (band + 1)] += coeffs[l * l + l] * p;
                            } else {
                                hc[i * (band + 1) + m] += sqrt2 * coeffs[l * l + l + m] * p;
                                hs[i * (band + 1) + m] += sqrt2 * coeffs[l * l + l - m] * p;
                            }
                        }
                    }
                }
                let mut values = vec![0.0; self.len()];
                for i in 0..*n_lat {
                    for j in 0..*n_lon {
                        let mut v = hc[i * (band + 1)];
                        for m in 1..=band {
                            let a = m as f64 * w_lon * j as f64;
                            v += hc[i * (band + 1) + m] * a.cos()
                                + hs[i * (band + 1) + m] * a.sin();
                        }
                        values[i * n_lon + j] = v;
                    }
                }
                values
            }
            Spectral::Axisym { basis, .. } => {
                let k_max = self.band_limit;
                (0..self.len())
                    .map(|i| {
                        kahan_sum(
                            (0..=k_max).map(|k| coeffs[k] * basis[i * (k_max + 1) + k]),
                        )
                    })
                    .collect()
            }
        }
    }

    /// Evaluate a coefficient vector at an arbitrary unit direction.
    pub fn eval_coeffs(&self, coeffs: &[f64], dir: &[f64]) -> f64 {
        assert_eq!(dir.len(), self.ambient);
        match &self.spectral {
            Spectral::Circle { .. } => {
                let t = dir[1].atan2(dir[0]);
                let k_max = self.band_limit;
                let c0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
                let cp = 1.0 / std::f64::consts::PI.sqrt();
                let mut v = coeffs[0] * c0;
                for k in 1..=k_max {
                    let a = k as f64 * t;
                    v += cp * (coeffs[2 * k - 1] * a.cos() + coeffs[2 * k] * a.sin());
                }
                v
            }
            Spectral::Sphere2 { .. } => {
                let band = self.band_limit;
                let theta = dir[2].clamp(-1.0, 1.0).acos();
                let phi = dir[1].atan2(dir[0]);
                let n_pairs = lm_index(band, band) + 1;
                let mut p = vec![0.0; n_pairs];
                let mut dp = vec![0.0; n_pairs];
                normalized_assoc_legendre(band, theta, &mut p, &mut dp);
                let sqrt2 = std::f64::consts::SQRT_2;
                let mut v = 0.0;
                for l in 0..=band {
                    v += coeffs[l * l + l] * p[lm_index(l, 0)];
                    for m in 1..=l {
                        let pv = sqrt2 * p[lm_index(l, m)];
                        let a = m as f64 * phi;
                        v += pv * (coeffs[l * l + l + m] * a.cos()
                            + coeffs[l * l + l - m] * a.sin());
                    }
                }
                v
            }
            Spectral::Axisym { inv_norm, .. } => {
                let ct = dir[self.ambient - 1].clamp(-1.0, 1.0);
                let theta = ct.acos();
                let k_max = self.band_limit;
                let mut b = vec![0.0; k_max + 1];
                let mut db = vec![0.0; k_max + 1];
                let mut d2b = vec![0.0; k_max + 1];
                zonal_basis(self.dim, k_max, theta, &mut b, &mut db, &mut d2b);
                kahan_sum((0..=k_max).map(|k| coeffs[k] * b[k] * inv_norm[k]))
            }
        }
    }

    /// Tangential gradient of a coefficient vector, as flat ambient vectors.
    fn gradient_from_coeffs(&self, coeffs: &[f64]) -> Vec<f64> {
        match &self.spectral {
            Spectral::Circle { theta } => {
                let k_max = self.band_limit;
                let cp = 1.0 / std::f64::consts::PI.sqrt();
                let mut out = vec![0.0; 2 * self.len()];
                for (j, &t) in theta.iter().enumerate() {
                    let mut dt = 0.0;
                    for k in 1..=k_max {
                        let kf = k as f64;
                        let a = kf * t;
                        dt += cp * kf * (-coeffs[2 * k - 1] * a.sin() + coeffs[2 * k] * a.cos());
                    }
                    // e_theta = (-sin t, cos t)
                    out[2 * j] = -t.sin() * dt;
                    out[2 * j + 1] = t.cos() * dt;
                }
                out
            }
            Spectral::Sphere2 {
                n_lat,
                n_lon,
                theta,
                plm,
                dplm,
                ..
            } => {
                let band = self.band_limit;
                let n_pairs = lm_index(band, band) + 1;
                let sqrt2 = std::f64::consts::SQRT_2;
                let w_lon = 2.0 * std::f64::consts::PI / *n_lon as f64;
                // per-(i, m) amplitudes of value and theta-derivative
                let stride = band + 1;
                let mut hc = vec![0.0; n_lat * stride];
                let mut hs = vec![0.0; n_lat * stride];
                let mut dc = vec![0.0; n_lat * stride];
                let mut ds = vec![0.0; n_lat * stride];
                for i in 0..*n_lat {
                    for l in 0..=band {
                        for m in 0..=l {
                            let p = plm[i * n_pairs + lm_index(l, m)];
                            let dp = dplm[i * n_pairs + lm_index(l, m)];
                            if m == 0 {
                                hc[i * stride] += coeffs[l * l + l] * p;
                                dc[i * stride] += coeffs[l * l + l] * dp;
                            } else {
                                let cc = sqrt2 * coeffs[l * l + l + m];
                                let cs = sqrt2 * coeffs[l * l + l - m];
                                hc[i * stride + m] += cc * p;
                                hs[i * stride + m] += cs * p;
                                dc[i * stride + m] += cc * dp;
                                ds[i * stride + m] += cs * dp;
                            }
                        }
                    }
                }
                let mut out = vec![0.0; 3 * self.len()];
                for i in 0..*n_lat {
                    let (st, ct) = (theta[i].sin(), theta[i].cos());
                    for j in 0..*n_lon {
                        let phi = w_lon * j as f64;
                        let (sp, cp) = (phi.sin(), phi.cos());
                        let mut f_t = dc[i * stride];
                        let mut f_p = 0.0;
                        for m in 1..=band {
                            let a = m as f64 * phi;
                            let (sa, ca) = (a.sin(), a.cos());
                            f_t += dc[i * stride + m] * ca + ds[i * stride + m] * sa;
                            f_p += m as f64
                                * (-hc[i * stride + m] * sa + hs[i * stride + m] * ca);
                        }
                        let f_p = f_p / st;
                        // e_theta, e_phi in ambient coordinates
                        let k = i * n_lon + j;
                        out[3 * k] = f_t * ct * cp - f_p * sp;
                        out[3 * k + 1] = f_t * ct * sp + f_p * cp;
                        out[3 * k + 2] = -f_t * st;
                    }
                }
                out
            }
            Spectral::Axisym { theta, dbasis, .. } => {
                let k_max = self.band_limit;
                let amb = self.ambient;
                let mut out = vec![0.0; amb * self.len()];
                for (i, &t) in theta.iter().enumerate() {
                    let du: f64 =
                        kahan_sum((0..=k_max).map(|k| coeffs[k] * dbasis[i * (k_max + 1) + k]));
                    // e_theta = (cos t, 0, ..., 0, -sin t)
                    out[amb * i] = du * t.cos();
                    out[amb * i + amb - 1] = -du * t.sin();
                }
                out
            }
        }
    }

    /// du/d theta at nodes (1-D modes only).
    pub(crate) fn theta_derivative(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        match &self.spectral {
            Spectral::Axisym { dbasis, .. } => {
                let k_max = self.band_limit;
                Ok((0..self.len())
                    .map(|i| {
                        kahan_sum((0..=k_max).map(|k| coeffs[k] * dbasis[i * (k_max + 1) + k]))
                    })
                    .collect())
            }
            Spectral::Circle { theta } => {
                let k_max = self.band_limit;
                let cp = 1.0 / std::f64::consts::PI.sqrt();
                Ok(theta
                    .iter()
                    .map(|&t| {
                        let mut dt = 0.0;
                        for k in 1..=k_max {
                            let kf = k as f64;
                            let a = kf * t;
                            dt += cp
                                * kf
                                * (-coeffs[2 * k - 1] * a.sin() + coeffs[2 * k] * a.cos());
                        }
                        dt
                    })
                    .collect())
            }
            _ => Err(Error::Capability(
                "theta derivative is defined for 1-D (circle/axisymmetric) grids".into(),
            )),
        }
    }

    /// d2u/d theta2 at nodes (1-D modes only).
    pub(crate) fn theta_second_derivative(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        match &self.spectral {
            Spectral::Axisym { d2basis, .. } => {
                let k_max = self.band_limit;
                Ok((0..self.len())
                    .map(|i| {
                        kahan_sum((0..=k_max).map(|k| coeffs[k] * d2basis[i * (k_max + 1) + k]))
                    })
                    .collect())
            }
            Spectral::Circle { theta } => {
                let k_max = self.band_limit;
                let cp = 1.0 / std::f64::consts::PI.sqrt();
                Ok(theta
                    .iter()
                    .map(|&t| {
                        let mut d2 = 0.0;
                        for k in 1..=k_max {
                            let kf = k as f64;
                            let a = kf * t;
                            d2 -= cp
                                * kf
                                * kf
                                * (coeffs[2 * k - 1] * a.cos() + coeffs[2 * k] * a.sin());
                        }
                        d2
                    })
                    .collect())
            }
            _ => Err(Error::Capability(
                "theta second derivative is defined for 1-D grids".into(),
            )),
        }
    }

    /// Multiply coefficients by the Laplace-Beltrami eigenvalues -k(k+n-1).
    fn laplacian_coeffs(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.dim as f64;
        coeffs
            .iter()
            .enumerate()
            .map(|(idx, &c)| {
                let k = self.coeff_degree(idx) as f64;
                -k * (k + n - 1.0) * c
            })
            .collect()
    }
}

/// Fully normalized associated Legendre values and theta-derivatives at a
/// single colatitude, packed by `lm_index`; Y_l0 = P~_l0, and the (m != 0)
/// harmonics are sqrt(2) P~_lm {cos, sin}(m phi).
fn normalized_assoc_legendre(band: usize, theta: f64, p: &mut [f64], dp: &mut [f64]) {
    let (st, ct) = (theta.sin(), theta.cos());
    let four_pi = 4.0 * std::f64::consts::PI;
    p[lm_index(0, 0)] = (1.0 / four_pi).sqrt();
    dp[lm_index(0, 0)] = 0.0;
    if band == 0 {
        return;
    }
    // diagonal terms
    for m in 1..=band {
        let f = ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
        let prev = lm_index(m - 1, m - 1);
        let cur = lm_index(m, m);
        p[cur] = f * st * p[prev];
        dp[cur] = f * (ct * p[prev] + st * dp[prev]);
    }
    // first off-diagonal
    for m in 0..band {
        let f = (2 * m + 3) as f64;
        let prev = lm_index(m, m);
        let cur = lm_index(m + 1, m);
        p[cur] = f.sqrt() * ct * p[prev];
        dp[cur] = f.sqrt() * (-st * p[prev] + ct * dp[prev]);
    }
    // upward recurrence in l
    for m in 0..=band {
        for l in (m + 2)..=band {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            let cur = lm_index(l, m);
            let p1 = lm_index(l - 1, m);
            let p2 = lm_index(l - 2, m);
            p[cur] = a * (ct * p[p1] - b * p[p2]);
            dp[cur] = a * (-st * p[p1] + ct * dp[p1] - b * dp[p2]);
        }
    }
}

/// Raw (un-normalized) zonal basis in cos(theta) with first and second
/// theta-derivatives: Chebyshev T_k for n = 1, Gegenbauer C_k^((n-1)/2) for
/// n >= 2. Derivative triples are carried through the recurrences in x and
/// converted by the chain rule.
fn zonal_basis(n: usize, k_max: usize, theta: f64, b: &mut [f64], db: &mut [f64], d2b: &mut [f64]) {
    let x = theta.cos();
    let (st, ct) = (theta.sin(), theta.cos());
    // (value, d/dx, d2/dx2) per degree
    let mut v = vec![(0.0f64, 0.0f64, 0.0f64); k_max + 1];
    v[0] = (1.0, 0.0, 0.0);
    if k_max >= 1 {
        if n == 1 {
            v[1] = (x, 1.0, 0.0);
            for k in 2..=k_max {
                // T_k = 2x T_(k-1) - T_(k-2)
                let (p1, d1, e1) = v[k - 1];
                let (p2, d2, e2) = v[k - 2];
                v[k] = (
                    2.0 * x * p1 - p2,
                    2.0 * p1 + 2.0 * x * d1 - d2,
                    4.0 * d1 + 2.0 * x * e1 - e2,
                );
            }
        } else {
            let lam = (n as f64 - 1.0) / 2.0;
            v[1] = (2.0 * lam * x, 2.0 * lam, 0.0);
            for k in 2..=k_max {
                // (k) C_k = 2(k-1+lam) x C_(k-1) - (k-2+2 lam) C_(k-2)
                let kf = k as f64;
                let a = 2.0 * (kf - 1.0 + lam) / kf;
                let c = (kf - 2.0 + 2.0 * lam) / kf;
                let (p1, d1, e1) = v[k - 1];
                let (p2, d2, e2) = v[k - 2];
                v[k] = (
                    a * x * p1 - c * p2,
                    a * (p1 + x * d1) - c * d2,
                    a * (2.0 * d1 + x * e1) - c * e2,
                );
            }
        }
    }
    for k in 0..=k_max {
        let (p, d, e) = v[k];
        b[k] = p;
        db[k] = -st * d;
        d2b[k] = st * st * e - ct * d;
    }
}

/// Values of a function at the nodes of a grid, with an optional band-limited
/// spectral representation.
#[derive(Clone)]
pub struct ScalarField {
    grid: Arc<SphereGrid>,
    values: Vec<f64>,
    coeffs: Option<Vec<f64>>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("grid", &self.grid)
            .field("spectral", &self.coeffs.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L1,
    L2,
    Sup,
    W12,
    W11,
    C1,
    /// sup norm plus the grid-spacing difference-quotient Hoelder surrogate
    Holder(f64),
}

impl ScalarField {
    pub fn from_values(grid: Arc<SphereGrid>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len());
        ScalarField {
            grid,
            values,
            coeffs: None,
        }
    }

    /// Nodal values plus their quadrature projection onto the spectral basis.
    pub fn from_values_analyzed(grid: Arc<SphereGrid>, values: Vec<f64>) -> Self {
        let coeffs = grid.analyze(&values);
        ScalarField {
            grid,
            values,
            coeffs: Some(coeffs),
        }
    }

    pub fn from_coeffs(grid: Arc<SphereGrid>, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), grid.coeff_len());
        let values = grid.synthesize(&coeffs);
        ScalarField {
            grid,
            values,
            coeffs: Some(coeffs),
        }
    }

    pub fn constant(grid: Arc<SphereGrid>, c: f64) -> Self {
        let mut coeffs = vec![0.0; grid.coeff_len()];
        // degree-0 basis function is 1/sqrt(|S^n|)
        coeffs[0] = c * grid.total_weight().sqrt();
        let values = vec![c; grid.len()];
        ScalarField {
            grid,
            values,
            coeffs: Some(coeffs),
        }
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coeffs(&self) -> Option<&[f64]> {
        self.coeffs.as_deref()
    }

    /// Force a spectral representation (projecting if absent).
    pub fn analyzed(&self) -> ScalarField {
        if self.coeffs.is_some() {
            self.clone()
        } else {
            ScalarField::from_values_analyzed(self.grid.clone(), self.values.clone())
        }
    }

    pub fn same_grid(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid)
    }

    pub fn integrate(&self) -> f64 {
        kahan_sum(
            self.values
                .iter()
                .zip(self.grid.weights())
                .map(|(&f, &w)| w * f),
        )
    }

    pub fn mean(&self) -> f64 {
        self.integrate() / self.grid.total_weight()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField::from_values(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn gradient(&self) -> Result<TangentField> {
        let coeffs = match &self.coeffs {
            Some(c) => c.clone(),
            None => self.grid.analyze(&self.values),
        };
        Ok(TangentField {
            grid: self.grid.clone(),
            vectors: self.grid.gradient_from_coeffs(&coeffs),
        })
    }

    pub fn laplace_beltrami(&self) -> Result<ScalarField> {
        let coeffs = match &self.coeffs {
            Some(c) => c.clone(),
            None => self.grid.analyze(&self.values),
        };
        let lap = self.grid.laplacian_coeffs(&coeffs);
        Ok(ScalarField::from_coeffs(self.grid.clone(), lap))
    }

    /// du/d theta and d2u/d theta2 at nodes, for 1-D grids.
    pub fn theta_derivatives(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let coeffs = match &self.coeffs {
            Some(c) => c.clone(),
            None => self.grid.analyze(&self.values),
        };
        Ok((
            self.grid.theta_derivative(&coeffs)?,
            self.grid.theta_second_derivative(&coeffs)?,
        ))
    }

    pub fn eval_at(&self, dir: &[f64]) -> f64 {
        let coeffs = match &self.coeffs {
            Some(c) => c.clone(),
            None => self.grid.analyze(&self.values),
        };
        self.grid.eval_coeffs(&coeffs, dir)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn norm(&self, kind: NormKind) -> Result<f64> {
        let w = self.grid.weights();
        Ok(match kind {
            NormKind::L1 => kahan_sum(
                self.values.iter().zip(w).map(|(&f, &wi)| wi * f.abs()),
            ),
            NormKind::L2 => kahan_sum(self.values.iter().zip(w).map(|(&f, &wi)| wi * f * f))
                .sqrt(),
            NormKind::Sup => self.sup_norm(),
            NormKind::W12 => {
                let g = self.gradient()?;
                let u2 = kahan_sum(self.values.iter().zip(w).map(|(&f, &wi)| wi * f * f));
                (u2 + g.l2_norm_sq()).sqrt()
            }
            NormKind::W11 => {
                let g = self.gradient()?;
                self.norm(NormKind::L1)? + g.l1_norm()
            }
            NormKind::C1 => {
                let g = self.gradient()?;
                self.sup_norm() + g.sup_norm()
            }
            NormKind::Holder(alpha) => self.sup_norm() + self.holder_seminorm(alpha),
        })
    }

    /// Discrete Hoelder seminorm: max difference quotient over adjacent node
    /// pairs at geodesic spacing. A surrogate for the true seminorm, which is
    /// not computable from samples.
    pub fn holder_seminorm(&self, alpha: f64) -> f64 {
        let mut worst = 0.0f64;
        for &(i, j) in self.grid.adjacency() {
            let (i, j) = (i as usize, j as usize);
            let d = geodesic(self.grid.node(i), self.grid.node(j));
            if d > 0.0 {
                worst = worst.max((self.values[i] - self.values[j]).abs() / d.powf(alpha));
            }
        }
        worst
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        assert!(self.same_grid(other));
        ScalarField::from_values(
            self.grid.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }
}

pub fn geodesic(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    dot.clamp(-1.0, 1.0).acos()
}

/// Per-node tangent vectors in ambient coordinates (v . node = 0).
#[derive(Clone)]
pub struct TangentField {
    grid: Arc<SphereGrid>,
    vectors: Vec<f64>,
}

impl TangentField {
    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        let a = self.grid.ambient();
        &self.vectors[i * a..(i + 1) * a]
    }

    pub fn norm_sq_values(&self) -> Vec<f64> {
        let a = self.grid.ambient();
        (0..self.grid.len())
            .map(|i| self.vectors[i * a..(i + 1) * a].iter().map(|&v| v * v).sum())
            .collect()
    }

    pub fn dot_values(&self, other: &TangentField) -> Vec<f64> {
        assert!(Arc::ptr_eq(&self.grid, &other.grid));
        let a = self.grid.ambient();
        (0..self.grid.len())
            .map(|i| {
                self.vectors[i * a..(i + 1) * a]
                    .iter()
                    .zip(&other.vectors[i * a..(i + 1) * a])
                    .map(|(&x, &y)| x * y)
                    .sum()
            })
            .collect()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        kahan_sum(
            self.norm_sq_values()
                .iter()
                .zip(self.grid.weights())
                .map(|(&q, &w)| w * q),
        )
    }

    pub fn l1_norm(&self) -> f64 {
        kahan_sum(
            self.norm_sq_values()
                .iter()
                .zip(self.grid.weights())
                .map(|(&q, &w)| w * q.sqrt()),
        )
    }

    pub fn sup_norm(&self) -> f64 {
        self.norm_sq_values()
            .iter()
            .fold(0.0f64, |m, &q| m.max(q.sqrt()))
    }

    /// max tangency defect |v . node| over nodes
    pub fn tangency_defect(&self) -> f64 {
        let a = self.grid.ambient();
        (0..self.grid.len())
            .map(|i| {
                self.vectors[i * a..(i + 1) * a]
                    .iter()
                    .zip(self.grid.node(i))
                    .map(|(&v, &x)| v * x)
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    /// Hoelder surrogate for the gradient: max |v(x) - v(y)| / d^alpha over
    /// adjacent node pairs.
    pub fn holder_seminorm(&self, alpha: f64) -> f64 {
        let a = self.grid.ambient();
        let mut worst = 0.0f64;
        for &(i, j) in self.grid.adjacency() {
            let (i, j) = (i as usize, j as usize);
            let d = geodesic(self.grid.node(i), self.grid.node(j));
            if d > 0.0 {
                let diff: f64 = self.vectors[i * a..(i + 1) * a]
                    .iter()
                    .zip(&self.vectors[j * a..(j + 1) * a])
                    .map(|(&x, &y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                worst = worst.max(diff / d.powf(alpha));
            }
        }
        worst
    }
}
