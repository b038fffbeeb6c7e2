//! Runtime-tunable constants. Defaults are compiled in; the CLI can override
//! them from a JSON file named by `ISOSTAB_CONFIG`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// star-shapedness margin: build_set requires min(1 + u) > this
    pub star_margin: f64,
    /// calibrated constant in the n = 1 interpolation bound
    pub fuglede_c1: f64,
    /// calibrated constant in the n = 2 log-interpolation bound
    pub fuglede_c2: f64,
    /// calibrated constant used for every n >= 3
    pub fuglede_cn: f64,
    /// default grid resolution per mode (nodes, or latitudes for full n = 2)
    pub grid_res_circle: usize,
    pub grid_res_sphere2: usize,
    pub grid_res_axisym: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            star_margin: 0.05,
            // calibrated: largest observed lhs/rhs over the seeded band-limited
            // family in harmonics::tests::fuglede_calibration, times 1.5
            fuglede_c1: 0.954,
            fuglede_c2: 0.483,
            fuglede_cn: 0.901,
            grid_res_circle: 256,
            grid_res_sphere2: 64,
            grid_res_axisym: 256,
        }
    }
}

impl Config {
    pub fn from_env() -> Config {
        match std::env::var("ISOSTAB_CONFIG") {
            Ok(path) => match std::fs::read_to_string(&path) {
                Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
                Err(_) => Config::default(),
            },
            Err(_) => Config::default(),
        }
    }
}
