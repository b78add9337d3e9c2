//! End-to-end runs of the `toa-sim` binary.

use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toa-sim")).args(args).output().expect("binary runs")
}

/// Data rows of a CSV output, header and `#` lines dropped.
fn rows(out: &Output) -> Vec<Vec<String>> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn small_map_has_one_row_per_point() {
    let out = run(&["absorption-map", "--set", "n_v=2", "--set", "n_omega=2"]);
    assert!(out.status.success());
    let r = rows(&out);
    assert_eq!(r.len(), 4);
    for row in &r {
        let a = num(&row[2]);
        assert!((0.0..=1.0).contains(&a), "{row:?}");
        assert_eq!(row[3], "ok");
    }
}

#[test]
fn header_records_the_parameters() {
    let out = run(&["absorption-map", "--set", "n_v=2", "--set", "n_omega=2", "--set", "beam_width=3e-6"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("# toa-sim"));
    assert!(text.lines().any(|l| l.starts_with('#') && l.contains("beam_width") && l.contains("3.0")));
}

#[test]
fn uncoupled_cut_is_zero() {
    let out = run(&["absorption-cut", "--set", "cut_omegas=0", "--set", "n_v=5"]);
    assert!(out.status.success());
    let r = rows(&out);
    assert_eq!(r.len(), 5);
    assert!(r.iter().all(|row| num(&row[2]) == 0.0));
}

#[test]
fn bad_input_exits_with_one() {
    assert_eq!(run(&["absorption-map", "--set", "bogus=1"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["absorption-map", "--set", "beam_width=-1e-6"]).status.code(), Some(1));
    assert_eq!(run(&["absorption-map", "--preset", "fig9"]).status.code(), Some(1));
}

#[test]
fn plane_lists_ridges_up_to_twenty() {
    let out = run(&["plane"]);
    assert!(out.status.success());
    let r = rows(&out);
    let max_n = r.iter().filter(|row| row[0] == "ridge").map(|row| row[1].parse::<usize>().unwrap()).max();
    assert_eq!(max_n, Some(20));
    assert!(r.iter().any(|row| row[0] == "width_boundary"));
    assert!(r.iter().any(|row| row[0] == "reflection_boundary"));
}

#[test]
fn critical_temperature_curve() {
    let out = run(&["critical-temperature", "--set", "l_min=5e-6", "--set", "l_max=10e-6", "--set", "n_l=2"]);
    let r = rows(&out);
    assert_eq!(r.len(), 2);
    assert!((num(&r[0][1]) - 4.431).abs() < 5e-3);
    // T_c ∝ L²
    assert!((num(&r[1][1]) / num(&r[0][1]) - 4.0).abs() < 1e-9);
}

#[test]
fn uncoupled_distributions_have_no_photons() {
    let out = run(&[
        "distributions",
        "--set",
        "omega=0",
        "--set",
        "component=100,1e-6,5e-6,0",
        "--set",
        "t_min=-1e-7",
        "--set",
        "t_max=1e-7",
        "--set",
        "n_t=401",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&out);
    assert_eq!(r.len(), 401);
    let dt = num(&r[1][0]) - num(&r[0][0]);
    let flux: f64 = r.iter().map(|row| num(&row[1])).sum::<f64>() * dt;
    assert!((flux - 1.0).abs() < 1e-3, "{flux}");
    for row in &r {
        for c in 2..5 {
            assert_eq!(num(&row[c]), 0.0);
        }
    }
}

#[test]
fn gaussian_map_runs_through_transfer() {
    let out = run(&["absorption-map", "--preset", "fig7", "--set", "n_v=2", "--set", "n_omega=2"]);
    assert!(out.status.success());
    let r = rows(&out);
    assert_eq!(r.len(), 4);
    assert!(r.iter().all(|row| row[3] == "ok"));
}

#[test]
fn analytic_backend_rejects_gaussian_beam() {
    let out = run(&["absorption-map", "--preset", "fig7", "--backend", "analytic", "--set", "n_v=2", "--set", "n_omega=2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn regime_report_needs_a_velocity() {
    assert_ne!(run(&["regime"]).status.code(), Some(0));
    let out = run(&["regime", "--set", "velocity=166.2"]);
    assert!(out.status.success());
    assert!(!out.stdout.is_empty());
}
