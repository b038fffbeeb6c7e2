//! Command-line front end: set-spec ingestion, command dispatch, and
//! JSON/CSV report emission.
//!
//! Exit codes: 0 success, 1 I/O or schema error, 2 precondition or
//! hypothesis failure, 3 solver non-convergence.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use isostab::axisym;
use isostab::config::Config;
use isostab::error::{Error, Result};
use isostab::harmonics;
use isostab::obstacle::{self, ObstacleOpts};
use isostab::setspec::{self, LoadedSet};
use isostab::sharp;
use isostab::suite::{self, Family};

#[derive(Parser)]
#[command(name = "isostab", version, about = "Deficits, asymmetries and stability harnesses for sets with bounded mean curvature")]
struct Cli {
    /// number of worker threads for sweeps (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// write the JSON report here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SpecArgs {
    /// inline JSON set spec
    #[arg(long, conflicts_with = "spec_file")]
    set: Option<String>,
    /// path to a JSON set spec
    #[arg(long)]
    spec_file: Option<PathBuf>,
    /// override the grid resolution
    #[arg(long)]
    grid_res: Option<usize>,
    /// override the spectral band limit
    #[arg(long)]
    band_limit: Option<usize>,
}

impl SpecArgs {
    fn text(&self) -> Result<String> {
        match (&self.set, &self.spec_file) {
            (Some(s), None) => Ok(s.clone()),
            (None, Some(p)) => Ok(std::fs::read_to_string(p)?),
            _ => Err(Error::Schema(
                "provide exactly one of --set or --spec-file".into(),
            )),
        }
    }

    fn load(&self, cfg: &Config) -> Result<(String, LoadedSet)> {
        let text = self.text()?;
        let mut spec = setspec::parse_spec(&text)?;
        // resolution/band overrides apply to grid-backed kinds
        if self.grid_res.is_some() || self.band_limit.is_some() {
            use isostab::setspec::SetSpec::*;
            match &mut spec {
                Constant { grid, .. } | Harmonic { grid, .. } | Samples { grid, .. } => {
                    if let Some(r) = self.grid_res {
                        grid.resolution = Some(r);
                    }
                    if let Some(b) = self.band_limit {
                        grid.band_limit = Some(b);
                    }
                }
                _ => {}
            }
        }
        let canonical = serde_json::to_string(&spec)?;
        Ok((canonical, setspec::load(&spec, cfg)?))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Perimeter, volume, curvature and all deficit/asymmetry measures
    Geometry(SpecArgs),
    /// Mean/linear/remainder split with the Poincare ratio and the
    /// interpolation bound
    Decompose(SpecArgs),
    /// The perimeter identity terms (planar region or axisymmetric profile)
    Almgren(SpecArgs),
    /// n = 1 structure decomposition into outer boundary and holes
    Structure(SpecArgs),
    /// Sweep the sharp family and report rates
    SharpFamily {
        #[arg(long)]
        n: usize,
        /// explicit constant or "auto"
        #[arg(long, visible_alias = "K", default_value = "auto")]
        k: String,
        #[arg(long)]
        r0: f64,
        #[arg(long)]
        sigma: f64,
        /// lo:hi:count, log-spaced
        #[arg(long)]
        t_decades: String,
        /// also write a CSV table here
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Truncate mean curvature by the penalized obstacle problem
    Truncate {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1e-9)]
        gtol: f64,
    },
    /// Evaluate one stability estimate across a family
    Verify {
        #[arg(long)]
        estimate: String,
        #[arg(long)]
        family: String,
        /// also write the per-member CSV table here
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Evaluate several estimates across a family
    Sweep {
        #[arg(long)]
        family: String,
        /// comma-separated estimate ids
        #[arg(long, default_value = "sharp_L1,sharp_c0+,sharp_c0,sharp_w12")]
        estimates: String,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Re-run the deterministic corpus and diff against stored reports
    Golden {
        /// directory holding the stored reports
        #[arg(long, default_value = "golden")]
        dir: PathBuf,
        /// write/update the stored reports instead of diffing
        #[arg(long, default_value_t = false)]
        update: bool,
    },
}

#[derive(Serialize)]
struct RunReport<T: Serialize> {
    command: String,
    spec_hash: String,
    tool_version: String,
    grid: serde_json::Value,
    results: T,
    wall_time_s: f64,
}

fn emit<T: Serialize>(
    out: &Option<PathBuf>,
    command: &str,
    spec_hash: &str,
    results: T,
    wall: f64,
) -> Result<()> {
    emit_with_grid(out, command, spec_hash, serde_json::Value::Null, results, wall)
}

fn emit_with_grid<T: Serialize>(
    out: &Option<PathBuf>,
    command: &str,
    spec_hash: &str,
    grid: serde_json::Value,
    results: T,
    wall: f64,
) -> Result<()> {
    let report = RunReport {
        command: command.to_string(),
        spec_hash: spec_hash.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        grid,
        results,
        wall_time_s: wall,
    };
    let text = serde_json::to_string_pretty(&report)?;
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn grid_json(set: &isostab::graph::NormalGraphSet) -> serde_json::Value {
    let g = set.grid();
    json!({
        "n": g.dim(),
        "mode": g.mode(),
        "nodes": g.len(),
        "band_limit": g.band_limit(),
    })
}

fn hash(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    format!("{:x}", h.finalize())
}

fn write_csv(path: &PathBuf, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    let quote = |s: &str| {
        if s.contains(',') || s.contains('"') || s.contains('\n') {
            format!("\"{}\"", s.replace('"', "\"\""))
        } else {
            s.to_string()
        }
    };
    writeln!(f, "{}", header.iter().map(|h| quote(h)).collect::<Vec<_>>().join(","))?;
    for row in rows {
        writeln!(f, "{}", row.iter().map(|c| quote(c)).collect::<Vec<_>>().join(","))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = Config::from_env();
    let t0 = Instant::now();
    match cli.command {
        Command::Geometry(spec) => {
            let (canonical, loaded) = spec.load(&cfg)?;
            let mut grid_info = serde_json::Value::Null;
            let results = match loaded {
                LoadedSet::Graph(set) => {
                    grid_info = grid_json(&set);
                    isostab::golden::geometry_results(&set)?
                }
                LoadedSet::Planar(region) => json!({
                    "perimeter": region.perimeter(),
                    "area": region.area(),
                    "delta": region.perimeter() - 2.0 * std::f64::consts::PI,
                }),
                LoadedSet::Profile(prof) => {
                    let f = axisym::revolution_functionals(&prof)?;
                    let h = axisym::revolution_mean_curvature(&prof);
                    json!({
                        "n": prof.n,
                        "perimeter": f.perimeter,
                        "volume": f.volume,
                        "diameter": f.diameter,
                        "delta": f.perimeter - isostab::sphere::unit_sphere_area(prof.n),
                        "sup_mean_curvature": h.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    })
                }
                LoadedSet::Sharp(s) => json!({
                    "params": s.params,
                    "delta": s.shape.delta(),
                    "u_c0": s.shape.u_c0(),
                    "sup_scaled_mean_curvature": s.shape.sup_h_scaled(),
                    "validation": s.validation,
                }),
            };
            emit_with_grid(
                &cli.out,
                "geometry",
                &hash(&canonical),
                grid_info,
                results,
                t0.elapsed().as_secs_f64(),
            )
        }
        Command::Decompose(spec) => {
            let (canonical, loaded) = spec.load(&cfg)?;
            let LoadedSet::Graph(set) = loaded else {
                return Err(Error::Capability(
                    "decompose applies to graph sets".into(),
                ));
            };
            let d = harmonics::decompose(set.u())?;
            let r_l2 = d.r.norm(isostab::sphere::NormKind::L2)?;
            let poincare = if r_l2 > 1e-13 {
                Some(harmonics::poincare_ratio(&d.r)?)
            } else {
                None
            };
            let zero_mean = isostab::sphere::ScalarField::from_values_analyzed(
                set.grid().clone(),
                set.u().values().iter().map(|&x| x - d.a).collect(),
            );
            let fuglede = harmonics::fuglede_bound(&zero_mean, &cfg)?;
            let results = json!({
                "a": d.a,
                "b": d.b,
                "r_l2": r_l2,
                "orthogonality_defect": d.orthogonality_defect(),
                "poincare_ratio": poincare,
                "fuglede": fuglede,
            });
            emit_with_grid(
                &cli.out,
                "decompose",
                &hash(&canonical),
                grid_json(&set),
                results,
                t0.elapsed().as_secs_f64(),
            )
        }
        Command::Almgren(spec) => {
            let (canonical, loaded) = spec.load(&cfg)?;
            let terms = match loaded {
                LoadedSet::Planar(region) => axisym::almgren_identity_terms_planar(&region)?,
                LoadedSet::Profile(prof) => axisym::almgren_identity_terms_profile(&prof)?,
                _ => {
                    return Err(Error::Capability(
                        "almgren applies to planar regions and profiles".into(),
                    ))
                }
            };
            emit(&cli.out, "almgren", &hash(&canonical), terms, t0.elapsed().as_secs_f64())
        }
        Command::Structure(spec) => {
            let (canonical, loaded) = spec.load(&cfg)?;
            let LoadedSet::Planar(region) = loaded else {
                return Err(Error::Capability(
                    "structure applies to planar regions".into(),
                ));
            };
            let (_star, report) = axisym::planar_structure(&region)?;
            emit(&cli.out, "structure", &hash(&canonical), report, t0.elapsed().as_secs_f64())
        }
        Command::SharpFamily {
            n,
            k,
            r0,
            sigma,
            t_decades,
            csv,
        } => {
            let parts: Vec<&str> = t_decades.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::Schema("--t-decades wants lo:hi:count".into()));
            }
            let lo: f64 = parts[0].parse().map_err(|_| Error::Schema("bad t lo".into()))?;
            let hi: f64 = parts[1].parse().map_err(|_| Error::Schema("bad t hi".into()))?;
            let count: usize = parts[2].parse().map_err(|_| Error::Schema("bad count".into()))?;
            let ts = sharp::log_spaced(lo, hi, count);
            let k_value = if k == "auto" {
                sharp::auto_k(n, r0, sigma, &ts)?
            } else {
                k.parse().map_err(|_| Error::Schema("bad K".into()))?
            };
            let sweep = sharp::sharpness_sweep(n, k_value, r0, sigma, &ts)?;
            if let Some(path) = &csv {
                let rows: Vec<Vec<String>> = sweep
                    .rows
                    .iter()
                    .map(|r| {
                        vec![
                            format!("{:e}", r.t),
                            format!("{:e}", r.delta),
                            format!("{:e}", r.u_c0),
                            format!("{:e}", r.ratio),
                            format!("{:e}", r.delta_over_t),
                        ]
                    })
                    .collect();
                write_csv(path, &["t", "delta", "u_c0", "ratio", "delta_over_t"], &rows)?;
            }
            // one validation report at the largest t as the family witness
            let params = sharp::derive_params(n, k_value, r0, *ts.last().unwrap(), sigma)?;
            let member = sharp::build_sharp_shape(&params)?;
            let results = json!({
                "sweep": sweep,
                "validation_at_largest_t": member.validation,
            });
            let canonical = format!("sharp-family:{n}:{k_value}:{r0}:{sigma}:{t_decades}");
            emit(&cli.out, "sharp-family", &hash(&canonical), results, t0.elapsed().as_secs_f64())
        }
        Command::Truncate { spec, lambda, gtol } => {
            let (canonical, loaded) = spec.load(&cfg)?;
            let LoadedSet::Graph(set) = loaded else {
                return Err(Error::Capability("truncate applies to graph sets".into()));
            };
            let lambda = if lambda > 0.0 {
                lambda
            } else {
                set.dim() as f64
            };
            let opts = ObstacleOpts {
                gtol,
                ..Default::default()
            };
            let solve = obstacle::truncate_mean_curvature(&set, lambda, &opts)?;
            if !solve.converged {
                return Err(Error::NonConvergence(format!(
                    "projected gradient norm {:.3e} after {} iterations",
                    solve.pg_norm, solve.iterations
                )));
            }
            let report = obstacle::verify_truncation(&solve, &set)?;
            let results = json!({
                "lambda": lambda,
                "converged": solve.converged,
                "iterations": solve.iterations,
                "pg_norm": solve.pg_norm,
                "contact_fraction": report.contact_fraction,
                "solution_theta": solve.theta,
                "solution_v": solve.v_internal,
                "report": report,
            });
            emit_with_grid(
                &cli.out,
                "truncate",
                &hash(&canonical),
                grid_json(&set),
                results,
                t0.elapsed().as_secs_f64(),
            )
        }
        Command::Verify {
            estimate,
            family,
            csv,
        } => {
            let fam = Family::parse(&family)?;
            let summary = suite::constant_sweep(&fam, &estimate)?;
            if let Some(path) = &csv {
                let rows: Vec<Vec<String>> = summary
                    .records
                    .iter()
                    .map(|r| {
                        vec![
                            r.estimate_id.clone(),
                            format!("{:e}", r.lhs),
                            format!("{:e}", r.rhs_raw),
                            r.ratio.map(|x| format!("{x:e}")).unwrap_or_default(),
                            r.family_tag.clone(),
                        ]
                    })
                    .collect();
                write_csv(path, &["estimate", "lhs", "rhs_raw", "ratio", "family"], &rows)?;
            }
            let canonical = format!("verify:{estimate}:{family}");
            emit(&cli.out, "verify", &hash(&canonical), summary, t0.elapsed().as_secs_f64())
        }
        Command::Sweep {
            family,
            estimates,
            csv,
        } => {
            let fam = Family::parse(&family)?;
            let ids: Vec<&str> = estimates.split(',').map(|s| s.trim()).collect();
            let mut summaries = Vec::new();
            for id in &ids {
                summaries.push(suite::constant_sweep(&fam, id)?);
            }
            if let Some(path) = &csv {
                let mut rows = Vec::new();
                for s in &summaries {
                    for r in &s.records {
                        rows.push(vec![
                            r.estimate_id.clone(),
                            format!("{:e}", r.lhs),
                            format!("{:e}", r.rhs_raw),
                            r.ratio.map(|x| format!("{x:e}")).unwrap_or_default(),
                            r.family_tag.clone(),
                        ]);
                    }
                }
                write_csv(path, &["estimate", "lhs", "rhs_raw", "ratio", "family"], &rows)?;
            }
            let canonical = format!("sweep:{estimates}:{family}");
            emit(&cli.out, "sweep", &hash(&canonical), summaries, t0.elapsed().as_secs_f64())
        }
        Command::Golden { dir, update } => {
            let reports = isostab::golden::golden_corpus(&cfg)?;
            std::fs::create_dir_all(&dir)?;
            let mut failures = Vec::new();
            for (name, text) in &reports {
                let path = dir.join(format!("{name}.json"));
                if update || !path.exists() {
                    std::fs::write(&path, text)?;
                } else {
                    let stored = std::fs::read_to_string(&path)?;
                    if &stored != text {
                        failures.push(name.clone());
                    }
                }
            }
            let results = json!({
                "corpus_size": reports.len(),
                "updated": update,
                "mismatches": failures,
            });
            emit(&cli.out, "golden", &hash("golden"), &results, 0.0)?;
            if !failures.is_empty() {
                return Err(Error::Schema(format!(
                    "golden mismatch in: {}",
                    failures.join(", ")
                )));
            }
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .ok();
    }
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
