//! The deterministic report corpus behind the CLI's --golden flag: fixed
//! specs at fixed resolutions, with wall time excluded, so reruns must be
//! byte-identical.

use serde_json::json;

use crate::axisym;
use crate::config::Config;
use crate::error::Result;
use crate::graph::NormalGraphSet;
use crate::setspec::{self, LoadedSet};
use crate::sharp;
use crate::suite::{self, Family};

pub fn geometry_results(set: &NormalGraphSet) -> Result<serde_json::Value> {
    let deficits = set.deficits()?;
    Ok(json!({
        "n": set.dim(),
        "perimeter": set.perimeter(),
        "volume": set.volume(),
        "barycenter": set.barycenter(),
        "sup_mean_curvature": set.mean_curvature().max_value(),
        "inf_mean_curvature": set.mean_curvature().min_value(),
        "deficits": deficits,
    }))
}

/// The deterministic corpus behind --golden: fixed specs, fixed
/// resolutions, wall time excluded.
pub fn golden_corpus(cfg: &Config) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut push = |name: &str, value: serde_json::Value| -> Result<()> {
        out.push((name.to_string(), serde_json::to_string_pretty(&value)?));
        Ok(())
    };

    let spec = setspec::parse_spec(r#"{"kind":"constant","t":0.1,"n":2}"#)?;
    if let LoadedSet::Graph(set) = setspec::load(&spec, cfg)? {
        push("geometry_scaled_ball", geometry_results(&set)?)?;
    }
    let spec = setspec::parse_spec(
        r#"{"kind":"harmonic","n":2,"bands":[{"degree":2,"order":"zonal","coeff":0.02}]}"#,
    )?;
    if let LoadedSet::Graph(set) = setspec::load(&spec, cfg)? {
        push("geometry_zonal_bump", geometry_results(&set)?)?;
    }
    let spec = setspec::parse_spec(r#"{"kind":"planar","radius":1.5}"#)?;
    if let LoadedSet::Planar(region) = setspec::load(&spec, cfg)? {
        push(
            "almgren_disk",
            serde_json::to_value(axisym::almgren_identity_terms_planar(&region)?)?,
        )?;
    }
    let spec = setspec::parse_spec(
        r#"{"kind":"planar","radius":1.0,"holes":[{"radius":0.05,"center":[0.4,0.0]}]}"#,
    )?;
    if let LoadedSet::Planar(region) = setspec::load(&spec, cfg)? {
        let (_s, rep) = axisym::planar_structure(&region)?;
        push("structure_disk_hole", serde_json::to_value(rep)?)?;
    }
    let ts = sharp::log_spaced(1e-9, 1e-7, 6);
    let sweep = sharp::sharpness_sweep(3, 16.0, 0.06, 3.8e-3, &ts)?;
    push("sharp_sweep_n3", serde_json::to_value(&sweep)?)?;
    let fam = Family::parse("scaled_balls:n=2")?;
    let summary = suite::constant_sweep(&fam, "sharp_L1")?;
    push("verify_sharp_L1_scaled_balls", serde_json::to_value(&summary)?)?;
    Ok(out)
}

