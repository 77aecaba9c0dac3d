mod common;

use cohist::models::{
    build_cat, build_single_spin, build_stern_gerlach, build_stern_gerlach_with, cat_coherence,
    measurement_framework_selection_report, v_framework, with_spin_family, X, Y, Z,
};
use cohist::{decoherence_matrix, is_consistent, probabilities, ConsistencyOptions, Execution, C64};
use common::*;
use nalgebra::Matrix2;
use rand::Rng;

/// `|⟨n±|ψ⟩|²` from an explicit eigen-decomposition of `n·σ`.
fn born(n: [f64; 3], psi: [C64; 2]) -> [f64; 2] {
    let i = C64::new(0.0, 1.0);
    let m = Matrix2::new(
        C64::new(n[2], 0.0),
        C64::new(n[0], 0.0) - i * n[1],
        C64::new(n[0], 0.0) + i * n[1],
        C64::new(-n[2], 0.0),
    );
    let eig = m.symmetric_eigen();
    let mut out = [0.0; 2];
    for k in 0..2 {
        let v = eig.eigenvectors.column(k);
        let amp = v[0].conj() * psi[0] + v[1].conj() * psi[1];
        out[if eig.eigenvalues[k] > 0.0 { 0 } else { 1 }] = amp.norm_sqr();
    }
    out
}

fn basis_state(init: [f64; 3]) -> [C64; 2] {
    // Independent of the builder: top eigenvector of init·σ.
    let i = C64::new(0.0, 1.0);
    let m = Matrix2::new(
        C64::new(init[2], 0.0),
        C64::new(init[0], 0.0) - i * init[1],
        C64::new(init[0], 0.0) + i * init[1],
        C64::new(-init[2], 0.0),
    );
    let eig = m.symmetric_eigen();
    let k = if eig.eigenvalues[0] > eig.eigenvalues[1] { 0 } else { 1 };
    [eig.eigenvectors[(0, k)], eig.eigenvectors[(1, k)]]
}

#[test]
fn single_spin_born_rule() {
    let mut rng = rng(21);
    for _ in 0..50 {
        let init = unit_vector3(&mut rng);
        let w = unit_vector3(&mut rng);
        let s = with_spin_family(&build_single_spin(init).unwrap(), "w", w).unwrap();
        let d = decoherence_matrix(s.family("w").unwrap()).unwrap();
        let p = probabilities(&d, &ConsistencyOptions::default()).unwrap();
        let expect = born(w, basis_state(init));
        assert!((p[0].probability - expect[0]).abs() < 1e-12);
        assert!((p[1].probability - expect[1]).abs() < 1e-12);
    }
}

#[test]
fn stern_gerlach_reveals_the_microscopic_framework() {
    let mut rng = rng(22);
    for _ in 0..50 {
        let init = unit_vector3(&mut rng);
        let w = unit_vector3(&mut rng);
        let env = rng.gen_range(0..=2);
        let s = build_stern_gerlach_with(w, env, init).unwrap();
        let d = decoherence_matrix(s.family("w-framework").unwrap()).unwrap();
        let opts = ConsistencyOptions::default();
        assert!(is_consistent(&d, &opts).consistent);
        let p: Vec<f64> = probabilities(&d, &opts).unwrap().iter().map(|x| x.probability).collect();
        let expect = born(w, basis_state(init));
        // Histories: (w+, point+), (w+, point-), (w-, point+), (w-, point-).
        assert!((p[0] + p[2] - expect[0]).abs() < 1e-12);
        assert!((p[1] + p[3] - expect[1]).abs() < 1e-12);
        assert!(p[1] <= 1e-12 && p[2] <= 1e-12, "spin and pointer must be correlated");
    }
}

#[test]
fn stern_gerlach_tilted_axis() {
    let theta = 0.9f64;
    let s = build_stern_gerlach([theta.sin(), 0.0, theta.cos()], 1).unwrap();
    let d = decoherence_matrix(s.family("w-framework").unwrap()).unwrap();
    let p = probabilities(&d, &ConsistencyOptions::default()).unwrap();
    assert!((p[0].probability - (theta / 2.0).cos().powi(2)).abs() < 1e-12);
    assert!((p[3].probability - (theta / 2.0).sin().powi(2)).abs() < 1e-12);
}

#[test]
fn framework_selection_for_grid() {
    let opts = ConsistencyOptions::default();
    for env in 0..=3 {
        let s = build_stern_gerlach(Z, env).unwrap();
        let cands = vec![("z".to_string(), Z), ("x".to_string(), X), ("y".to_string(), Y), ("-z".to_string(), [0.0, 0.0, -1.0])];
        let rows = measurement_framework_selection_report(&s, &cands, &opts, Execution::default()).unwrap();
        assert!(rows[0].consistent && rows[0].witness < 1e-12);
        assert!(!rows[1].consistent && rows[1].witness >= 0.1);
        assert!(!rows[2].consistent && rows[2].witness >= 0.1);
        assert!(rows[3].consistent);
    }
}

#[test]
fn x_framework_witness_is_a_quarter() {
    let s = build_stern_gerlach(Z, 0).unwrap();
    let d = decoherence_matrix(&v_framework(&s, X).unwrap()).unwrap();
    let r = is_consistent(&d, &ConsistencyOptions::default());
    assert!((r.max_off_diagonal - 0.25).abs() < 1e-12);
}

#[test]
fn cat_suppression_is_monotone_and_closed_form() {
    for theta in [0.3, 0.8, 1.3] {
        let mut prev = f64::INFINITY;
        for n in 1..=6 {
            let c = cat_coherence(&build_cat(n, theta).unwrap(), Execution::default()).unwrap();
            assert!((c.normalized - f64::cos(theta).abs().powi(n as i32)).abs() < 1e-12);
            assert!(c.normalized <= prev);
            prev = c.normalized;
        }
    }
}
