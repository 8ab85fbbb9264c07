//! Dirichlet projections of bubbles: boundary residual, harmonicity of the
//! correction, the maximum principle, and the small-rate expansion
//! h ~ (alpha_n / c_n) delta^{(n-2)/2} H(., z).

use multibubble::bubble::{bubble_amplitude, project_bubble, BubbleParams};
use multibubble::geometry::{add_scaled, DomainSpec};
use multibubble::green::{EngineMethod, GreenEngine, GreenSource};
use multibubble::numdiff;

fn engine3() -> GreenEngine {
    GreenEngine::build_with_method(&DomainSpec::unit_ball(3), 260, 1e-8, EngineMethod::Collocation)
        .unwrap()
}

#[test]
fn projection_vanishes_on_boundary() {
    let eng = engine3();
    let params = BubbleParams::new(0.05, vec![0.2, 0.0, 0.0], 1, 3).unwrap();
    let pb = project_bubble(&eng, &params).unwrap();
    assert!(pb.correction_residual() <= 1e-6);
    let sup_boundary = eng
        .domain_spec()
        .sample_boundary(60, 17)
        .iter()
        .map(|s| params.eval(&s.point))
        .fold(0.0_f64, f64::max);
    for s in eng.domain_spec().sample_boundary(60, 17) {
        let pu = pb.eval(&s.point);
        assert!(
            pu.abs() <= 1e-6 * sup_boundary,
            "PU = {pu} on the boundary (sup U = {sup_boundary})"
        );
    }
}

#[test]
fn correction_matches_small_rate_expansion() {
    // h(x) ~ (alpha_n / c_n) delta^{(n-2)/2} H(x, z) for small delta; the
    // 1/c_n enters because H carries the c_n normalisation of the
    // fundamental solution while the bubble tail is alpha_n delta^{a}/r^{n-2}
    let eng = engine3();
    let delta = 1e-2;
    let params = BubbleParams::new(delta, vec![0.0; 3], 1, 3).unwrap();
    let pb = project_bubble(&eng, &params).unwrap();
    let prefactor = bubble_amplitude(3) / eng.c_n() * delta.sqrt();
    for x in [
        vec![0.3, 0.0, 0.0],
        vec![0.0, -0.5, 0.2],
        vec![0.6, 0.3, 0.0],
    ] {
        let h = pb.correction(&x);
        let expansion = prefactor * eng.regular_part(&x, &params.z).unwrap();
        assert!(
            (h - expansion).abs() / h < 5e-3,
            "at {x:?}: h = {h}, expansion = {expansion}"
        );
    }
}

#[test]
fn projection_below_bubble_pointwise() {
    // maximum principle: the correction is positive, so PU <= U inside
    let eng = engine3();
    let params = BubbleParams::new(0.1, vec![0.1, -0.2, 0.0], 1, 3).unwrap();
    let pb = project_bubble(&eng, &params).unwrap();
    for x in [
        vec![0.0, 0.0, 0.0],
        vec![0.5, 0.2, -0.1],
        vec![-0.3, 0.4, 0.3],
        vec![0.1, -0.2, 0.05],
    ] {
        assert!(pb.eval(&x) <= params.eval(&x) + 1e-9);
        assert!(pb.correction(&x) > 0.0);
    }
}

#[test]
fn correction_is_harmonic() {
    let eng = engine3();
    let params = BubbleParams::new(0.05, vec![0.2, 0.1, 0.0], 1, 3).unwrap();
    let pb = project_bubble(&eng, &params).unwrap();
    for x in [vec![0.0, 0.0, 0.0], vec![-0.4, 0.2, 0.1], vec![0.3, 0.3, -0.3]] {
        let lap = numdiff::laplacian(|p| pb.correction(p), &x, 1e-3);
        let scale = pb.correction(&x).abs().max(1e-9);
        assert!(lap.abs() < 1e-4 * scale.max(1.0), "Laplacian {lap} at {x:?}");
    }
}

#[test]
fn correction_gradient_consistent() {
    let eng = engine3();
    let params = BubbleParams::new(0.08, vec![0.0, 0.3, 0.0], 1, 3).unwrap();
    let pb = project_bubble(&eng, &params).unwrap();
    let x = vec![0.2, -0.1, 0.4];
    let g = pb.grad_correction(&x);
    let fd = numdiff::gradient(|p| pb.correction(p), &x, 1e-6);
    for (a, b) in g.iter().zip(&fd) {
        assert!((a - b).abs() < 1e-6 * a.abs().max(1e-6));
    }
}

#[test]
fn near_boundary_projection_warns_but_builds() {
    let eng = engine3();
    // z close to the boundary relative to 10 delta: still builds
    let params = BubbleParams::new(0.05, vec![0.7, 0.0, 0.0], 1, 3).unwrap();
    let pb = project_bubble(&eng, &params).unwrap();
    let x = add_scaled(&[0.0; 3], 0.5, &[1.0, 0.0, 0.0]);
    assert!(pb.eval(&x).is_finite());
}

#[test]
fn projection_export_json_round_trips() {
    let eng = engine3();
    let params = BubbleParams::new(0.1, vec![0.0; 3], 1, 3).unwrap();
    let pb = project_bubble(&eng, &params).unwrap();
    let v = pb.export_json();
    assert_eq!(v["params"]["delta"], 0.1);
    assert!(v["correction_residual"].as_f64().unwrap() <= 1e-6);
    assert!(v["charges"].as_array().unwrap().len() > 10);
}
