//! Acceptance suite: every shipped guarantee as one test with its tolerance
//! pinned in code. Each test prints one line with the measured values; the
//! standard harness output gives the per-criterion pass/fail verdict.

use std::time::Instant;

use isostab::axisym::{
    almgren_identity_terms_planar, almgren_identity_terms_profile, planar_structure,
    revolution_mean_curvature, AxisymProfile, PlanarRegion,
};
use isostab::config::Config;
use isostab::golden::golden_corpus;
use isostab::graph::build_set;
use isostab::harmonics::{decompose, poincare_ratio};
use isostab::obstacle::{dimple_field, truncate_mean_curvature, verify_truncation, ObstacleOpts};
use isostab::quad::kahan_sum;
use isostab::sharp;
use isostab::sphere::{
    build_grid, unit_ball_volume, unit_sphere_area, GridMode, NormKind, ScalarField,
};
use isostab::suite::{constant_sweep, verify_alex, Family};

fn elapsed_line(name: &str, t0: Instant, detail: String) {
    println!(
        "{name}: PASS in {:.2}s ({detail})",
        t0.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_01_exact_functionals() {
    let t0 = Instant::now();
    let mut worst_p = 0.0f64;
    let mut worst_v = 0.0f64;
    let mut worst_h = 0.0f64;
    for (grid, n) in [
        (build_grid(1, 256, GridMode::Full).unwrap(), 1usize),
        (build_grid(2, 64, GridMode::Full).unwrap(), 2),
        (build_grid(3, 256, GridMode::Axisymmetric).unwrap(), 3),
    ] {
        let set = build_set(&ScalarField::constant(grid, 0.0)).unwrap();
        let p_exact = unit_sphere_area(n);
        let v_exact = unit_ball_volume(n);
        worst_p = worst_p.max((set.perimeter() - p_exact).abs() / p_exact);
        worst_v = worst_v.max((set.volume() - v_exact).abs() / v_exact);
        worst_h = worst_h.max(
            set.mean_curvature()
                .values()
                .iter()
                .fold(0.0f64, |a, &h| a.max((h - n as f64).abs())),
        );
    }
    assert!(worst_p <= 1e-10, "perimeter relative error {worst_p:e}");
    assert!(worst_v <= 1e-10, "volume relative error {worst_v:e}");
    assert!(worst_h <= 1e-8, "sup |H - n| = {worst_h:e}");
    assert!(t0.elapsed().as_secs_f64() < 1.0, "runtime over budget");
    elapsed_line(
        "criterion 01 exact functionals",
        t0,
        format!("dP {worst_p:.1e}, dV {worst_v:.1e}, dH {worst_h:.1e}"),
    );
}

#[test]
fn criterion_02_scaling_family() {
    let t0 = Instant::now();
    let mut worst_delta = 0.0f64;
    let mut worst_h = 0.0f64;
    for (grid, n) in [
        (build_grid(2, 64, GridMode::Full).unwrap(), 2usize),
        (build_grid(3, 256, GridMode::Axisymmetric).unwrap(), 3),
    ] {
        for t in [1e-3, 1e-2, 1e-1] {
            let set = build_set(&ScalarField::constant(grid.clone(), t)).unwrap();
            let expected_delta =
                ((1.0 + t).powi(n as i32) - 1.0) * unit_sphere_area(n);
            worst_delta =
                worst_delta.max((set.delta() - expected_delta).abs() / expected_delta);
            let h_exact = n as f64 / (1.0 + t);
            worst_h = worst_h.max(
                set.mean_curvature()
                    .values()
                    .iter()
                    .fold(0.0f64, |a, &h| a.max((h - h_exact).abs() / h_exact)),
            );
        }
    }
    assert!(worst_delta <= 1e-9, "delta relative error {worst_delta:e}");
    assert!(worst_h <= 1e-9, "H relative error {worst_h:e}");
    assert!(t0.elapsed().as_secs_f64() < 1.0, "runtime over budget");
    elapsed_line(
        "criterion 02 scaling family",
        t0,
        format!("d(delta) {worst_delta:.1e}, dH {worst_h:.1e}"),
    );
}

#[test]
fn criterion_03_spectral_identities() {
    use rand::prelude::*;
    let t0 = Instant::now();
    for (grid, n) in [
        (build_grid(1, 256, GridMode::Full).unwrap(), 1usize),
        (build_grid(2, 48, GridMode::Full).unwrap(), 2),
    ] {
        let nf = n as f64;
        let area = grid.total_weight();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42 + n as u64);
        for _ in 0..50 {
            let mut coeffs = vec![0.0; grid.coeff_len()];
            for (idx, c) in coeffs.iter_mut().enumerate() {
                let deg = grid.coeff_degree(idx) as f64;
                *c = 0.05 * rng.gen_range(-1.0..1.0) / (1.0 + deg);
            }
            let u = ScalarField::from_coeffs(grid.clone(), coeffs);
            let d = decompose(&u).unwrap();
            let b2: f64 = d.b.iter().map(|&b| b * b).sum();
            let u2 = u.norm(NormKind::L2).unwrap().powi(2);
            let r2 = d.r.norm(NormKind::L2).unwrap().powi(2);
            let gu = u.gradient().unwrap().l2_norm_sq();
            let gr = d.r.gradient().unwrap().l2_norm_sq();
            // Pythagoras
            let rhs = area * (d.a * d.a + b2 / (nf + 1.0)) + r2;
            assert!(
                (u2 - rhs).abs() <= 1e-8 * u2.max(1.0e-12),
                "pythagoras {u2} vs {rhs}"
            );
            // gradient split
            let btang = kahan_sum((0..grid.len()).map(|k| {
                let x = grid.node(k);
                let bx: f64 = x.iter().zip(&d.b).map(|(&a, &c)| a * c).sum();
                let t: f64 = x
                    .iter()
                    .zip(&d.b)
                    .map(|(&a, &c)| (c - bx * a) * (c - bx * a))
                    .sum();
                grid.weights()[k] * t
            }));
            assert!(
                (gu - (btang + gr)).abs() <= 1e-8 * gu.max(1e-12),
                "gradient split {gu} vs {}",
                btang + gr
            );
            // the combined identity
            let lhs = nf * u2 - gu;
            let rhs = nf * area * d.a * d.a + nf * r2 - gr;
            assert!(
                (lhs - rhs).abs() <= 1e-8 * lhs.abs().max(gu).max(1e-12),
                "identity {lhs} vs {rhs}"
            );
            // improved Poincare constant
            if r2.sqrt() > 1e-12 {
                let ratio = poincare_ratio(&d.r).unwrap();
                assert!(
                    ratio >= 2.0 * (nf + 1.0) - 1e-8,
                    "poincare ratio {ratio} below 2(n+1)"
                );
            }
        }
    }
    assert!(t0.elapsed().as_secs_f64() < 10.0, "runtime over budget");
    elapsed_line(
        "criterion 03 spectral identities",
        t0,
        "50 seeded fields x n in {1, 2}".into(),
    );
}

#[test]
fn criterion_04_almgren_identity() {
    let t0 = Instant::now();
    // planar disk R = 1.5: closed forms
    let disk = PlanarRegion::circle(1.5, 4096);
    let terms = almgren_identity_terms_planar(&disk).unwrap();
    assert!(terms.t1.abs() <= 1e-12, "t1 = {:e}", terms.t1);
    assert!(
        (terms.t2 - std::f64::consts::PI).abs() <= 1e-6,
        "t2 = {} vs pi",
        terms.t2
    );
    assert_eq!(terms.t3, 0.0);
    assert!(terms.residual.abs() <= 1e-6, "residual {:e}", terms.residual);

    // dented axisymmetric sphere, scaled to sup H <= n
    let coarse = AxisymProfile::dented_sphere(2, 1024, 0.3, 0.6);
    let h = revolution_mean_curvature(&coarse);
    let s = (h.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / 2.0).max(1.0);
    let terms_coarse = almgren_identity_terms_profile(&coarse.scaled(s)).unwrap();
    assert!(terms_coarse.hypothesis_h_le_n);
    assert!(
        terms_coarse.residual.abs() <= 1e-3 * terms_coarse.delta,
        "residual {} vs delta {}",
        terms_coarse.residual,
        terms_coarse.delta
    );
    let fine = AxisymProfile::dented_sphere(2, 2048, 0.3, 0.6).scaled(s);
    let terms_fine = almgren_identity_terms_profile(&fine).unwrap();
    assert!(
        terms_fine.residual.abs() <= 0.5 * terms_coarse.residual.abs(),
        "refinement {} -> {}",
        terms_coarse.residual,
        terms_fine.residual
    );
    assert!(t0.elapsed().as_secs_f64() < 30.0, "runtime over budget");
    elapsed_line(
        "criterion 04 almgren identity",
        t0,
        format!(
            "disk residual {:.1e}; dented residual {:.1e} -> {:.1e}",
            terms.residual, terms_coarse.residual, terms_fine.residual
        ),
    );
}

#[test]
fn criterion_05_sharp_rate_n3() {
    let t0 = Instant::now();
    let ts = sharp::log_spaced(1e-11, 1e-9, 6);
    let sweep = sharp::sharpness_sweep(3, 16.0, 0.06, 3.8e-3, &ts).unwrap();
    let slope = sweep.slope.unwrap();
    assert!(
        (0.40..=0.60).contains(&slope),
        "log-log slope {slope} outside [0.40, 0.60]"
    );
    let dmax = sweep
        .rows
        .iter()
        .map(|r| r.delta_over_t)
        .fold(f64::NEG_INFINITY, f64::max);
    let dmin = sweep
        .rows
        .iter()
        .map(|r| r.delta_over_t)
        .fold(f64::INFINITY, f64::min);
    assert!(dmax / dmin <= 3.0, "delta/t spread {}", dmax / dmin);
    assert!(t0.elapsed().as_secs_f64() < 120.0, "runtime over budget");
    elapsed_line(
        "criterion 05 sharp rate n=3",
        t0,
        format!("slope {slope:.4}, delta/t spread {:.3}", dmax / dmin),
    );
}

#[test]
fn criterion_06_sharp_rate_n2() {
    let t0 = Instant::now();
    let ts = sharp::log_spaced(1e-8, 1e-6, 6);
    let sweep = sharp::sharpness_sweep(2, 16.0, 0.06, 3.8e-3, &ts).unwrap();
    let rmax = sweep
        .rows
        .iter()
        .map(|r| r.ratio)
        .fold(f64::NEG_INFINITY, f64::max);
    let rmin = sweep.rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    assert!(
        rmax / rmin <= 3.0,
        "n = 2 ratio varies by {} across the sweep",
        rmax / rmin
    );
    assert!(t0.elapsed().as_secs_f64() < 120.0, "runtime over budget");
    elapsed_line(
        "criterion 06 sharp rate n=2",
        t0,
        format!("ratio spread {:.3}", rmax / rmin),
    );
}

#[test]
fn criterion_07_sharp_admissibility() {
    let t0 = Instant::now();
    let mut checked = 0usize;
    for (n, ts) in [
        (3usize, sharp::log_spaced(1e-11, 1e-9, 6)),
        (2, sharp::log_spaced(1e-8, 1e-6, 6)),
    ] {
        for &t in &ts {
            let params = sharp::derive_params(n, 16.0, 0.06, t, 3.8e-3).unwrap();
            // build_sharp_shape fails unless every (ny3)-(ny5) style check
            // passes; the curvature gate is then re-checked densely
            let member = sharp::build_sharp_shape(&params).unwrap();
            assert!(member.validation.all_passed);
            let sup_h = member.shape.sup_h_scaled();
            assert!(
                sup_h <= n as f64 + 1e-8,
                "sup H of the scaled set = {sup_h} (n = {n}, t = {t:e})"
            );
            checked += 1;
        }
    }
    elapsed_line(
        "criterion 07 sharp admissibility",
        t0,
        format!("{checked} family members validated"),
    );
}

#[test]
fn criterion_08_obstacle_solver() {
    let t0 = Instant::now();
    let grid = build_grid(2, 512, GridMode::Axisymmetric).unwrap();
    let lambda = 0.25;
    let opts = ObstacleOpts {
        mesh_size: 2048,
        ..Default::default()
    };
    for depth in [0.25, 0.3, 0.35] {
        let set = build_set(&dimple_field(&grid, depth, 0.5))
            .unwrap()
            .enforce_h_le_n()
            .unwrap();
        assert!(set.mean_curvature().min_value() < -lambda);
        let res = truncate_mean_curvature(&set, lambda, &opts).unwrap();
        assert!(
            res.converged,
            "depth {depth}: pg {:e} after {} iterations",
            res.pg_norm, res.iterations
        );
        let report = verify_truncation(&res, &set).unwrap();
        assert!(report.free_node_count > 0, "no free region at depth {depth}");
        assert!(
            report.free_cmc_residual <= 1e-3,
            "depth {depth}: complementarity residual {}",
            report.free_cmc_residual
        );
        assert!(
            report.distance_bound_lhs <= report.delta_omega * 1.05,
            "depth {depth}: lhs {} vs delta {}",
            report.distance_bound_lhs,
            report.delta_omega
        );
        assert!(
            report.sup_abs_h_e <= report.h_bound + 1e-3,
            "depth {depth}: sup|H_E| {} vs bound {}",
            report.sup_abs_h_e,
            report.h_bound
        );
    }
    assert!(t0.elapsed().as_secs_f64() < 300.0, "runtime over budget");
    elapsed_line(
        "criterion 08 obstacle solver",
        t0,
        "3 depths, all bounds hold".into(),
    );
}

#[test]
fn criterion_09_linear_witnesses() {
    let t0 = Instant::now();
    for family_tag in ["sharp:n=3", "scaled_balls:n=2"] {
        let fam = Family::parse(family_tag).unwrap();
        for estimate in ["sharp_L1", "sharp_c0+"] {
            let a = constant_sweep(&fam, estimate).unwrap();
            let b = constant_sweep(&fam, estimate).unwrap();
            assert!(a.max_ratio.is_finite() && a.max_ratio > 0.0);
            let drift = (a.max_ratio / b.max_ratio - 1.0).abs();
            assert!(
                drift <= 0.01,
                "{family_tag}/{estimate}: max ratio drifted by {drift}"
            );
        }
    }
    elapsed_line(
        "criterion 09 linear witnesses",
        t0,
        "W11 and C0+ ratios reproduce within 1%".into(),
    );
}

#[test]
fn criterion_10_alexandrov_l2() {
    let t0 = Instant::now();
    let fam = Family::parse("band_limited:n=2:seed=7").unwrap();
    let members = fam.members().unwrap();
    for set in &members {
        let c1 = set.u().norm(NormKind::C1).unwrap();
        assert!(c1 <= 0.05, "family member with |u|_C1 = {c1}");
    }
    let summary = constant_sweep(&fam, "alex_L2").unwrap();
    assert!(summary.max_ratio.is_finite());
    assert!(
        summary.max_ratio / summary.min_ratio <= 10.0,
        "ratio spread {}",
        summary.max_ratio / summary.min_ratio
    );
    // degenerate input: the exact ball produces a flagged record, not a ratio
    let grid = build_grid(2, 48, GridMode::Full).unwrap();
    let ball = build_set(&ScalarField::constant(grid, 0.0)).unwrap();
    let recs = verify_alex(&ball, 2.0, 0.5, "ball").unwrap();
    assert!(recs
        .iter()
        .all(|r| r.estimate_id != "alex_L2" || (r.degenerate && r.ratio.is_none())));
    assert!(t0.elapsed().as_secs_f64() < 60.0, "runtime over budget");
    elapsed_line(
        "criterion 10 alexandrov L2",
        t0,
        format!(
            "ratio in [{:.4}, {:.4}]",
            summary.min_ratio, summary.max_ratio
        ),
    );
}

#[test]
fn criterion_11_structure_n1() {
    let t0 = Instant::now();
    // single hole: hole perimeter accounts for the whole deficit and
    // hole_area / delta^2 = 1 / (4 pi)
    let rho = 0.05;
    let region = PlanarRegion::circle(1.0, 4096).with_hole(rho, [0.4, 0.0], 2048);
    let (_star, rep) = planar_structure(&region).unwrap();
    assert!(
        (rep.hole_perimeter - rep.delta).abs() <= 1e-9,
        "hole perimeter {} vs delta {}",
        rep.hole_perimeter,
        rep.delta
    );
    let expected = 1.0 / (4.0 * std::f64::consts::PI);
    assert!(
        (rep.area_ratio - expected).abs() <= 1e-6,
        "area ratio {} vs {}",
        rep.area_ratio,
        expected
    );
    // three holes: additivity
    let radii = [0.03, 0.02, 0.04];
    let region = PlanarRegion::circle(1.0, 4096)
        .with_hole(radii[0], [0.5, 0.0], 2048)
        .with_hole(radii[1], [-0.4, 0.2], 2048)
        .with_hole(radii[2], [0.0, -0.5], 2048);
    let (_s, rep) = planar_structure(&region).unwrap();
    assert!(
        (rep.hole_perimeter - rep.delta).abs() <= 1e-9,
        "multi-hole perimeter {} vs delta {}",
        rep.hole_perimeter,
        rep.delta
    );
    let p_sum: f64 = radii.iter().map(|r| 2.0 * std::f64::consts::PI * r).sum();
    let a_sum: f64 = radii.iter().map(|r| std::f64::consts::PI * r * r).sum();
    let expected = a_sum / (p_sum * p_sum);
    assert!(
        (rep.area_ratio - expected).abs() <= 1e-6,
        "multi-hole area ratio {} vs {}",
        rep.area_ratio,
        expected
    );
    elapsed_line(
        "criterion 11 structure n=1",
        t0,
        format!("single and triple hole ratios match closed forms"),
    );
}

#[test]
fn criterion_12_determinism() {
    let t0 = Instant::now();
    let cfg = Config::default();
    let first = golden_corpus(&cfg).unwrap();
    let second = golden_corpus(&cfg).unwrap();
    assert_eq!(first.len(), second.len());
    for ((name_a, text_a), (name_b, text_b)) in first.iter().zip(&second) {
        assert_eq!(name_a, name_b);
        assert!(
            text_a.as_bytes() == text_b.as_bytes(),
            "report {name_a} is not byte-identical across runs"
        );
    }
    elapsed_line(
        "criterion 12 determinism",
        t0,
        format!("{} corpus reports byte-identical", first.len()),
    );
}
