//! JSON ingestion of set specifications: schema types shared by the CLI and
//! the golden corpus. Malformed specs are rejected before any numerical
//! code runs.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::axisym::{AxisymProfile, PlanarRegion};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::graph::{build_set, NormalGraphSet};
use crate::harmonics::{synthesize, BandSpec};
use crate::sharp;
use crate::sphere::{build_grid, build_grid_with_band, GridMode, ScalarField, SphereGrid};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    /// scaled ball: u = t
    Constant {
        t: f64,
        n: usize,
        #[serde(default)]
        grid: GridSpec,
    },
    /// band-limited graph from a coefficient list
    Harmonic {
        n: usize,
        bands: Vec<crate::harmonics::BandCoeff>,
        #[serde(default)]
        grid: GridSpec,
    },
    /// raw nodal values of u (length must match the grid)
    Samples {
        n: usize,
        values: Vec<f64>,
        #[serde(default)]
        grid: GridSpec,
    },
    /// registry of closed-form meridian profiles
    Profile {
        n: usize,
        profile: ProfileSpec,
        #[serde(default)]
        samples: Option<usize>,
    },
    /// member of the sharp family
    SharpFamily {
        n: usize,
        #[serde(rename = "K")]
        k: f64,
        r0: f64,
        sigma: f64,
        t: f64,
    },
    /// planar region: circle radius plus optional circular holes, or raw
    /// sampled curves
    Planar {
        #[serde(default)]
        radius: Option<f64>,
        #[serde(default)]
        holes: Vec<HoleSpec>,
        #[serde(default)]
        outer: Option<Vec<[f64; 2]>>,
        #[serde(default)]
        raw_holes: Vec<Vec<[f64; 2]>>,
        #[serde(default)]
        samples: Option<usize>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Sphere,
    SphereRadius { radius: f64 },
    DentedSphere { depth: f64, width: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleSpec {
    pub radius: f64,
    pub center: [f64; 2],
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub resolution: Option<usize>,
    #[serde(default)]
    pub band_limit: Option<usize>,
    #[serde(default)]
    pub mode: Option<GridMode>,
}

impl GridSpec {
    pub fn build(&self, n: usize, cfg: &Config) -> Result<Arc<SphereGrid>> {
        let mode = self.mode.unwrap_or(if n <= 2 {
            GridMode::Full
        } else {
            GridMode::Axisymmetric
        });
        let resolution = self.resolution.unwrap_or(match (n, mode) {
            (1, GridMode::Full) => cfg.grid_res_circle,
            (2, GridMode::Full) => cfg.grid_res_sphere2,
            _ => cfg.grid_res_axisym,
        });
        match self.band_limit {
            Some(b) => build_grid_with_band(n, resolution, mode, b),
            None => build_grid(n, resolution, mode),
        }
    }
}

/// A realized specification, dispatched by geometry kind.
pub enum LoadedSet {
    Graph(NormalGraphSet),
    Planar(PlanarRegion),
    Profile(AxisymProfile),
    Sharp(Box<sharp::SharpSet>),
}

pub fn parse_spec(text: &str) -> Result<SetSpec> {
    serde_json::from_str(text).map_err(|e| Error::Schema(format!("set spec: {e}")))
}

pub fn load(spec: &SetSpec, cfg: &Config) -> Result<LoadedSet> {
    match spec {
        SetSpec::Constant { t, n, grid } => {
            let g = grid.build(*n, cfg)?;
            Ok(LoadedSet::Graph(build_set(&ScalarField::constant(g, *t))?))
        }
        SetSpec::Harmonic { n, bands, grid } => {
            let g = grid.build(*n, cfg)?;
            let u = synthesize(
                &BandSpec {
                    bands: bands.clone(),
                },
                &g,
            )?;
            Ok(LoadedSet::Graph(build_set(&u)?))
        }
        SetSpec::Samples { n, values, grid } => {
            let g = grid.build(*n, cfg)?;
            if values.len() != g.len() {
                return Err(Error::Schema(format!(
                    "samples length {} does not match the grid ({} nodes)",
                    values.len(),
                    g.len()
                )));
            }
            let u = ScalarField::from_values_analyzed(g, values.clone());
            Ok(LoadedSet::Graph(build_set(&u)?))
        }
        SetSpec::Profile {
            n,
            profile,
            samples,
        } => {
            let count = samples.unwrap_or(1024);
            let prof = match profile {
                ProfileSpec::Sphere => AxisymProfile::sphere(*n, count),
                ProfileSpec::SphereRadius { radius } => {
                    AxisymProfile::sphere_radius(*n, count, *radius)
                }
                ProfileSpec::DentedSphere { depth, width } => {
                    AxisymProfile::dented_sphere(*n, count, *depth, *width)
                }
            };
            Ok(LoadedSet::Profile(prof))
        }
        SetSpec::SharpFamily { n, k, r0, sigma, t } => {
            let params = sharp::derive_params(*n, *k, *r0, *t, *sigma)?;
            Ok(LoadedSet::Sharp(Box::new(sharp::build_sharp_shape(
                &params,
            )?)))
        }
        SetSpec::Planar {
            radius,
            holes,
            outer,
            raw_holes,
            samples,
        } => {
            let count = samples.unwrap_or(4096);
            let mut region = match (radius, outer) {
                (Some(r), None) => PlanarRegion::circle(*r, count),
                (None, Some(pts)) => PlanarRegion {
                    outer: pts.clone(),
                    holes: Vec::new(),
                },
                _ => {
                    return Err(Error::Schema(
                        "planar spec needs exactly one of `radius` or `outer`".into(),
                    ))
                }
            };
            for h in holes {
                region = region.with_hole(h.radius, h.center, (count / 4).max(256));
            }
            for h in raw_holes {
                region.holes.push(h.clone());
            }
            region.validate()?;
            Ok(LoadedSet::Planar(region))
        }
    }
}
