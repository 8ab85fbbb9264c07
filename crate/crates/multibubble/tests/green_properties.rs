//! Cross-cutting properties of the Green engines: symmetry, positivity,
//! harmonicity of the regular part, boundary blow-up of the Robin function,
//! and agreement of the collocation method with the ball closed forms.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use multibubble::geometry::{dist, DomainSpec};
use multibubble::green::{EngineMethod, GreenEngine, GreenSource};
use multibubble::numdiff;

fn random_interior(rng: &mut ChaCha8Rng, domain: &DomainSpec, margin: f64) -> Vec<f64> {
    domain.sample_interior(rng, margin)
}

#[test]
fn symmetry_on_random_pairs() {
    let domain = DomainSpec::unit_ball(3);
    let eng = GreenEngine::build_with_method(&domain, 260, 1e-8, EngineMethod::Collocation).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let x = random_interior(&mut rng, &domain, 0.05);
        let y = random_interior(&mut rng, &domain, 0.05);
        if dist(&x, &y) < 1e-3 {
            continue;
        }
        let gxy = eng.green(&x, &y).unwrap();
        let gyx = eng.green(&y, &x).unwrap();
        assert!(
            (gxy - gyx).abs() <= 1e-8 * gxy.abs().max(1.0),
            "G({x:?},{y:?}) asymmetric: {gxy} vs {gyx}"
        );
        assert!(gxy > 0.0, "positivity violated");
    }
}

#[test]
fn collocation_matches_ball_closed_forms_all_dimensions() {
    for n in 3..=6 {
        let domain = DomainSpec::unit_ball(n);
        let coll =
            GreenEngine::build_with_method(&domain, 80 * n, 1e-8, EngineMethod::Collocation)
                .unwrap();
        let exact = GreenEngine::build(&domain, 200, 1e-8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        for _ in 0..40 {
            let x = random_interior(&mut rng, &domain, 0.05);
            let y = random_interior(&mut rng, &domain, 0.05);
            let ha = coll.regular_part(&x, &y).unwrap();
            let hb = exact.regular_part(&x, &y).unwrap();
            assert!(
                (ha - hb).abs() <= 1e-6 * hb.abs(),
                "n={n}: H mismatch {ha} vs {hb}"
            );
            if dist(&x, &y) > 0.05 {
                let ga = coll.green(&x, &y).unwrap();
                let gb = exact.green(&x, &y).unwrap();
                assert!(
                    (ga - gb).abs() <= 1e-6 * gb.abs().max(1e-10),
                    "n={n}: G mismatch {ga} vs {gb}"
                );
            }
            let ta = coll.robin(&x).unwrap();
            let tb = exact.robin(&x).unwrap();
            assert!((ta - tb).abs() <= 1e-6 * tb.abs(), "n={n}: tau mismatch");
        }
    }
}

#[test]
fn regular_part_is_harmonic() {
    // the correction c_n |x-y|^{2-n} - G = H(., y) has vanishing Laplacian
    let domain = DomainSpec::unit_ball(3);
    let eng = GreenEngine::build_with_method(&domain, 260, 1e-8, EngineMethod::Collocation).unwrap();
    let y = vec![0.3, -0.2, 0.1];
    for x in [
        vec![0.0, 0.0, 0.0],
        vec![0.4, 0.3, -0.2],
        vec![-0.5, 0.1, 0.3],
    ] {
        let lap = numdiff::laplacian(|p| eng.regular_part(p, &y).unwrap(), &x, 1e-3);
        assert!(lap.abs() < 1e-4, "Laplacian of H at {x:?}: {lap}");
    }
}

#[test]
fn robin_increases_along_rays_to_boundary() {
    // from the interior minimum outward, tau is eventually increasing
    let domain = DomainSpec::unit_ball(3);
    let eng = GreenEngine::build(&domain, 200, 1e-8).unwrap();
    for dir in [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.6, 0.0, 0.8]] {
        let mut prev = eng.robin(&[0.0, 0.0, 0.0]).unwrap();
        for k in 1..=8 {
            let t = 0.11 * k as f64;
            let x: Vec<f64> = dir.iter().map(|d| d * t).collect();
            let tau = eng.robin(&x).unwrap();
            assert!(tau > prev, "tau not increasing at t={t}");
            prev = tau;
        }
    }
}

#[test]
fn robin_minimum_is_interior_on_grid() {
    // coarse grid argmin lies strictly inside the domain
    let domain = DomainSpec::Annulus {
        center: vec![0.0; 3],
        r_inner: 0.4,
        r_outer: 1.0,
        n: 3,
    };
    let eng = GreenEngine::build(&domain, 500, 1e-5).unwrap();
    let mut best = (f64::INFINITY, vec![]);
    let m = 13;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let x = vec![
                    -1.0 + 2.0 * i as f64 / (m - 1) as f64,
                    -1.0 + 2.0 * j as f64 / (m - 1) as f64,
                    -1.0 + 2.0 * k as f64 / (m - 1) as f64,
                ];
                if domain.boundary_distance(&x) < 0.05 {
                    continue;
                }
                let tau = eng.robin(&x).unwrap();
                if tau < best.0 {
                    best = (tau, x);
                }
            }
        }
    }
    let d = domain.boundary_distance(&best.1);
    assert!(d > 0.05, "grid argmin at {:?} too close to the boundary", best.1);
    // the annulus centroid (the center) is outside the domain entirely
    assert!(domain.boundary_distance(&[0.0, 0.0, 0.0]) < 0.0);
}

#[test]
fn analytic_gradients_match_symmetry_identity() {
    // grad_x H(x,y) at (x,y) equals grad_y H(y,x)
    let domain = DomainSpec::unit_ball(4);
    let eng = GreenEngine::build(&domain, 200, 1e-8).unwrap();
    let x = vec![0.2, -0.3, 0.1, 0.4];
    let y = vec![-0.1, 0.2, 0.3, -0.2];
    let (gx, _) = eng.grad_regular_part(&x, &y).unwrap();
    let (_, gy_swapped) = eng.grad_regular_part(&y, &x).unwrap();
    for (a, b) in gx.iter().zip(&gy_swapped) {
        assert!((a - b).abs() < 1e-10 * a.abs().max(1e-10));
    }
}

#[test]
fn import_reproduces_collocation_engine_bit_for_bit() {
    let domain = DomainSpec::Annulus {
        center: vec![0.0; 3],
        r_inner: 0.3,
        r_outer: 1.0,
        n: 3,
    };
    let eng = GreenEngine::build(&domain, 300, 1e-5).unwrap();
    let back = GreenEngine::import_json(&eng.export_json()).unwrap();
    let x = vec![0.6, 0.1, 0.0];
    let y = vec![-0.2, -0.55, 0.1];
    assert_eq!(
        eng.green(&x, &y).unwrap().to_bits(),
        back.green(&x, &y).unwrap().to_bits()
    );
    assert_eq!(
        eng.robin(&x).unwrap().to_bits(),
        back.robin(&x).unwrap().to_bits()
    );
}

#[test]
fn build_rejects_bad_inputs() {
    let domain = DomainSpec::unit_ball(3);
    // too few boundary points
    assert!(GreenEngine::build(&domain, 20, 1e-6).is_err());
    // unsupported dimension
    let d7 = DomainSpec::unit_ball(7);
    assert!(GreenEngine::build(&d7, 200, 1e-6).is_err());
}
