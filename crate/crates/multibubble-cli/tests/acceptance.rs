//! Acceptance suite: every criterion is one test that pins its tolerance in
//! code, prints a `ACCEPTANCE <k> pass` line, and fails loudly otherwise.
//!
//! Run with `cargo test -p multibubble-cli --test acceptance -- --nocapture`
//! to see the per-criterion lines.

use std::fs;
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use multibubble::assemble::{residual_sweep, SweepOptions};
use multibubble::bubble::{kernel_residual, BubbleParams};
use multibubble::geometry::{dist, norm, DomainSpec};
use multibubble::green::{ConstantGreen, EngineMethod, GreenEngine, GreenSource};
use multibubble::numdiff;
use multibubble::reduced::{
    reduced_gradient, reduced_value, Configuration, Regime, RegimeKind,
};
use multibubble::search::{
    minimize, multistart, saddle_search, Classification, SearchOptions,
};

const C3: f64 = 0.07957747154594767; // 1/(4 pi)

fn random_interior(rng: &mut ChaCha8Rng, domain: &DomainSpec, margin: f64) -> Vec<f64> {
    domain.sample_interior(rng, margin)
}

/// Criterion 1: collocation G, H, tau match the ball closed forms to 1e-6
/// relative at 200 interior points (boundary distance >= 0.05) for each
/// n in 3..=6, within 30 seconds.
#[test]
fn acceptance_1_green_oracle() {
    let start = Instant::now();
    for n in 3..=6 {
        let domain = DomainSpec::unit_ball(n);
        let coll =
            GreenEngine::build_with_method(&domain, 80 * n, 1e-8, EngineMethod::Collocation)
                .unwrap();
        let exact = GreenEngine::build(&domain, 200, 1e-8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + n as u64);
        let points: Vec<Vec<f64>> = (0..200)
            .map(|_| random_interior(&mut rng, &domain, 0.05))
            .collect();
        for x in &points {
            let ta = coll.robin(x).unwrap();
            let tb = exact.robin(x).unwrap();
            assert!(
                (ta - tb).abs() <= 1e-6 * tb.abs(),
                "n={n}: tau mismatch at {x:?}: {ta} vs {tb}"
            );
        }
        for pair in points.chunks(2) {
            let [x, y] = pair else { continue };
            if dist(x, y) < 0.05 {
                continue;
            }
            let ga = coll.green(x, y).unwrap();
            let gb = exact.green(x, y).unwrap();
            assert!(
                (ga - gb).abs() <= 1e-6 * gb.abs().max(1e-12),
                "n={n}: G mismatch: {ga} vs {gb}"
            );
            let ha = coll.regular_part(x, y).unwrap();
            let hb = exact.regular_part(x, y).unwrap();
            assert!(
                (ha - hb).abs() <= 1e-6 * hb.abs(),
                "n={n}: H mismatch: {ha} vs {hb}"
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "green oracle took {elapsed:?}, budget is 30 s"
    );
    println!(
        "ACCEPTANCE 1 pass: collocation matches ball closed forms (n=3..6, 200 pts each, {:.2?})",
        elapsed
    );
}

/// Criterion 2: the robin-map command locates the ball minimum at the center
/// within one grid cell, and tau(0) = 1/(4 pi) within 1e-6 for n = 3.
#[test]
fn acceptance_2_robin_landscape() {
    let dir = tempdir("robin");
    let out = format!("{dir}/robin.csv");
    let config_text = format!(
        r#"{{
        "domain": {{"kind":"ball","center":[0.0,0.0,0.0],"radius":1.0,"n":3}},
        "engine": {{"n_boundary": 300, "tol": 1e-8, "method": "collocation"}},
        "output": "{out}",
        "robin_map": {{
            "axes": [0, 1],
            "fixed": [0.0, 0.0, 0.0],
            "extent": [[-0.9, 0.9], [-0.9, 0.9]],
            "resolution": [37, 37]
        }}
    }}"#
    );
    let cfg = multibubble_cli::config::RunConfig::from_json_str(&config_text, &[]).unwrap();
    multibubble_cli::commands::robin_map(&cfg).unwrap();
    let csv = fs::read_to_string(&out).unwrap();
    let min_point: Vec<f64> = csv
        .lines()
        .find(|l| l.starts_with("# minimum_point:"))
        .map(|l| serde_json::from_str(l.split(':').nth(1).unwrap().trim()).unwrap())
        .expect("metadata line present");
    let cell = 1.8 / 36.0;
    assert!(
        min_point.iter().all(|c| c.abs() <= cell + 1e-12),
        "grid minimum {min_point:?} not within one cell of the center"
    );
    let eng = GreenEngine::build_with_method(
        &DomainSpec::unit_ball(3),
        300,
        1e-8,
        EngineMethod::Collocation,
    )
    .unwrap();
    let tau0 = eng.robin(&[0.0, 0.0, 0.0]).unwrap();
    assert!(
        (tau0 - C3).abs() <= 1e-6 * C3,
        "tau(0) = {tau0}, expected {C3}"
    );
    println!("ACCEPTANCE 2 pass: robin minimum at the center, tau(0) = 1/(4 pi) within 1e-6");
}

/// Criterion 3: all n+1 kernel functions satisfy the linearised equation
/// with finite-difference residual < 1e-4 at 50 sample points, for
/// n in {3, 5} and delta in {1, 1e-2}.
#[test]
fn acceptance_3_kernel_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for n in [3usize, 5] {
        for delta in [1.0, 1e-2] {
            let z = vec![0.1; n];
            let params = BubbleParams::new(delta, z.clone(), 1, n).unwrap();
            let sample: Vec<Vec<f64>> = (0..50)
                .map(|_| {
                    let dir: Vec<f64> = {
                        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        let l = norm(&v).max(1e-9);
                        v.iter().map(|x| x / l).collect()
                    };
                    let r = delta * 10f64.powf(rng.gen_range(-1.0..0.7));
                    z.iter().zip(&dir).map(|(zi, di)| zi + r * di).collect()
                })
                .collect();
            for j in 0..=n {
                let r = kernel_residual(&params, |x| params.kernel(j, x), &sample);
                assert!(
                    r < 1e-4,
                    "kernel residual n={n} delta={delta} j={j}: {r}"
                );
            }
        }
    }
    println!("ACCEPTANCE 3 pass: kernel identity residual < 1e-4 (n in {{3,5}}, delta in {{1,1e-2}})");
}

/// Criterion 4: analytic gradients match central differences to 1e-6
/// relative on 20 random configurations per regime, kappa <= 3.
#[test]
fn acceptance_4_gradient_consistency() {
    let ball3 = GreenEngine::build(&DomainSpec::unit_ball(3), 200, 1e-8).unwrap();
    let ball5 = GreenEngine::build(&DomainSpec::unit_ball(5), 220, 1e-8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut checked = 0;
    for kind in [RegimeKind::Mbn, RegimeKind::Mac, RegimeKind::Tac, RegimeKind::Tc] {
        for _ in 0..20 {
            let kappa = rng.gen_range(1..=3usize);
            let (regime, source): (Regime, &dyn GreenSource) = match kind {
                RegimeKind::Mbn => {
                    let lambdas: Vec<i32> =
                        (0..kappa).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
                    let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
                    (Regime::mbn(5, kappa, sign, lambdas).unwrap(), &ball5)
                }
                RegimeKind::Mac => {
                    let lambdas: Vec<i32> =
                        (0..kappa).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
                    let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
                    (Regime::mac(3, kappa, sign, lambdas).unwrap(), &ball3)
                }
                RegimeKind::Tac => (Regime::tac(3, kappa).unwrap(), &ball3),
                RegimeKind::Tc => (
                    Regime::tc(3, kappa, vec![0.02, -0.01, 0.0]).unwrap(),
                    &ball3,
                ),
            };
            let config = sample_config(&regime, source, &mut rng);
            let g = reduced_gradient(source, &regime, &config).unwrap();
            let x0 = config.to_coords();
            let fd = numdiff::gradient(
                |x| {
                    let c = Configuration::from_coords(&regime, x).unwrap();
                    reduced_value(source, &regime, &c).unwrap()
                },
                &x0,
                1e-6,
            );
            let err: f64 = g
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let scale = norm(&g).max(1e-8);
            assert!(
                err / scale < 1e-6,
                "{kind:?} kappa={kappa}: gradient mismatch rel {}",
                err / scale
            );
            checked += 1;
        }
    }
    println!("ACCEPTANCE 4 pass: gradient vs finite differences < 1e-6 rel on {checked} configs");
}

fn sample_config(regime: &Regime, source: &dyn GreenSource, rng: &mut ChaCha8Rng) -> Configuration {
    let n = regime.n;
    let kappa = regime.kappa;
    let domain = source.domain().unwrap();
    let rates = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..kappa).map(|_| rng.gen_range(-1.0..1.0)).collect()
    };
    match regime.kind {
        RegimeKind::Mbn | RegimeKind::Mac => loop {
            let points: Vec<Vec<f64>> = (0..kappa)
                .map(|_| domain.sample_interior(rng, 0.25))
                .collect();
            let mut ok = true;
            for i in 0..kappa {
                for j in i + 1..kappa {
                    if dist(&points[i], &points[j]) < 0.3 {
                        ok = false;
                    }
                }
            }
            if ok {
                return Configuration::Multi {
                    points,
                    log_rates: rates(rng),
                };
            }
        },
        RegimeKind::Tac => Configuration::TowerAc {
            offsets: (0..kappa - 1)
                .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect(),
            base: domain.sample_interior(rng, 0.25),
            log_rates: rates(rng),
        },
        RegimeKind::Tc => Configuration::TowerC {
            offsets: (0..kappa)
                .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect(),
            log_rates: rates(rng),
        },
    }
}

/// Criterion 5a: the almost-critical single bubble on the 3-ball minimises
/// at the center with rate d* = 4 pi, both within 1e-6.
#[test]
fn acceptance_5a_mac_ball_minimum() {
    let eng = GreenEngine::build(&DomainSpec::unit_ball(3), 200, 1e-8).unwrap();
    let regime = Regime::mac(3, 1, 1, vec![1]).unwrap();
    let init = Configuration::Multi {
        points: vec![vec![0.3, 0.0, 0.0]],
        log_rates: vec![0.0],
    };
    let opts = SearchOptions {
        grad_tol: 1e-11,
        ..Default::default()
    };
    let cp = minimize(&eng, &regime, &init, &opts).unwrap();
    let Configuration::Multi { points, log_rates } = &cp.config else {
        panic!()
    };
    let d = log_rates[0].exp();
    let z = norm(&points[0]);
    assert!(
        (d - 4.0 * std::f64::consts::PI).abs() <= 1e-6,
        "d* = {d}, expected 4 pi"
    );
    assert!(z <= 1e-6, "z* = {z}, expected 0");
    assert_eq!(cp.classification, Classification::IsolatedMin);
    println!("ACCEPTANCE 5a pass: d* = 4 pi and z* = 0 within 1e-6 (isolated minimum)");
}

/// Criterion 5b: the single-level tower with constant H = 1 in n = 5 has
/// d* = 3^(-1/3) within 1e-8 (the base point is frozen: with constant H the
/// base direction is exactly flat).
#[test]
fn acceptance_5b_tac_tower_rate() {
    let src = ConstantGreen { n: 5, h0: 1.0 };
    let regime = Regime::tac(5, 1).unwrap();
    let init = Configuration::TowerAc {
        offsets: vec![],
        base: vec![0.0; 5],
        log_rates: vec![0.0],
    };
    let dof = Configuration::dof(&regime);
    let opts = SearchOptions {
        grad_tol: 1e-12,
        active_coords: Some(vec![dof - 1]),
        ..Default::default()
    };
    let cp = saddle_search(&src, &regime, &init, &opts).unwrap();
    let d = cp.config.log_rates()[0].exp();
    let expected = 3.0_f64.powf(-1.0 / 3.0);
    assert!((d - expected).abs() <= 1e-8, "d* = {d}, expected {expected}");
    assert!(cp.hess_spectrum[0] > 0.0, "positive rate curvature");
    println!("ACCEPTANCE 5b pass: tower rate d* = 3^(-1/3) within 1e-8");
}

/// Criterion 5c: the single bubble on the perforated domain has the saddle
/// sigma* = 0, d* = H^(-1/(2(n-2))), value 2 sqrt(H) within 1e-8, with
/// negative sigma block and positive rate curvature.
#[test]
fn acceptance_5c_tc_saddle() {
    for (n, h0) in [(3usize, 1.0), (3, 0.37), (4, 2.0)] {
        let src = ConstantGreen { n, h0 };
        let regime = Regime::tc(n, 1, vec![0.0; n]).unwrap();
        // the saddle is a maximum in sigma; start inside the concave region
        // |sigma| < 1/sqrt(5) of the offset profile
        let init = Configuration::TowerC {
            offsets: vec![vec![0.1; n]],
            log_rates: vec![0.3],
        };
        let opts = SearchOptions {
            grad_tol: 1e-13,
            ..Default::default()
        };
        let cp = saddle_search(&src, &regime, &init, &opts).unwrap();
        assert!(
            !matches!(cp.classification, Classification::EscapedLambda { .. }),
            "saddle search escaped: {:?}",
            cp.classification
        );
        let Configuration::TowerC { offsets, log_rates } = &cp.config else {
            panic!()
        };
        let d = log_rates[0].exp();
        let d_expected = h0.powf(-1.0 / (2.0 * (n as f64 - 2.0)));
        let v_expected = 2.0 * h0.sqrt();
        assert!(norm(&offsets[0]) <= 1e-8, "sigma* = {:?}", offsets[0]);
        assert!(
            (d - d_expected).abs() <= 1e-8 * d_expected.max(1.0),
            "d* = {d} vs {d_expected}"
        );
        assert!(
            (cp.value - v_expected).abs() <= 1e-8 * v_expected,
            "value {} vs {v_expected}",
            cp.value
        );
        assert_eq!(
            cp.classification,
            Classification::NonDegenerate { index: n },
            "sigma block negative, rate direction positive"
        );
        assert!(cp.hess_spectrum[..n].iter().all(|e| *e < 0.0));
        assert!(cp.hess_spectrum[n] > 0.0);
    }
    println!("ACCEPTANCE 5c pass: perforated-tower saddle matches the closed form within 1e-8");
}

/// Criterion 6: for eps < 0 and one bubble, dPhi/dl > 0 identically (sampled
/// across decades of d and positions), and a 64-start multistart reports
/// zero critical points with 100% escapes.
#[test]
fn acceptance_6_nonexistence() {
    let ball3 = GreenEngine::build(&DomainSpec::unit_ball(3), 200, 1e-8).unwrap();
    let ball5 = GreenEngine::build(&DomainSpec::unit_ball(5), 220, 1e-8).unwrap();
    let cases: Vec<(Regime, &GreenEngine)> = vec![
        (Regime::mac(3, 1, -1, vec![1]).unwrap(), &ball3),
        (Regime::mbn(5, 1, -1, vec![1]).unwrap(), &ball5),
    ];
    for (regime, engine) in &cases {
        // gradient in the rate coordinate is positive everywhere sampled
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        for _ in 0..50 {
            let z = engine
                .domain_spec()
                .sample_interior(&mut rng, 0.1);
            let l = rng.gen_range(-6.0..6.0);
            let cfg = Configuration::Multi {
                points: vec![z],
                log_rates: vec![l],
            };
            let g = reduced_gradient(*engine, regime, &cfg).unwrap();
            let dl = g[regime.n];
            assert!(dl > 0.0, "{:?}: dPhi/dl = {dl} at l = {l}", regime.kind);
        }
        let report = multistart(*engine, regime, 2024, 64, &SearchOptions::default()).unwrap();
        assert_eq!(
            report.points.len(),
            0,
            "{:?}: expected no critical points",
            regime.kind
        );
        assert_eq!(report.escapes.escaped, 64, "{:?}: expected 100% escapes", regime.kind);
    }
    println!("ACCEPTANCE 6 pass: supercritical single-bubble nonexistence (0 points, 64/64 escapes)");
}

/// Criterion 7: the residual norm of the critical single-bubble ansatz
/// scales like a positive power of eps (r^2 > 0.95) over
/// eps in {1e-2, 3e-3, 1e-3, 3e-4, 1e-4}, within 5 minutes.
#[test]
fn acceptance_7_residual_scaling() {
    let start = Instant::now();
    let engine = GreenEngine::build(&DomainSpec::unit_ball(3), 240, 1e-8).unwrap();
    let regime = Regime::mac(3, 1, 1, vec![1]).unwrap();
    let config = Configuration::Multi {
        points: vec![vec![0.0; 3]],
        log_rates: vec![(4.0 * std::f64::consts::PI).ln()],
    };
    let report = residual_sweep(
        &engine,
        &regime,
        &config,
        &[1e-2, 3e-3, 1e-3, 3e-4, 1e-4],
        &SweepOptions::default(),
    )
    .unwrap();
    let elapsed = start.elapsed();
    assert!(
        report.fitted_slope > 0.0,
        "slope {} not positive",
        report.fitted_slope
    );
    assert!(report.fit_r2 > 0.95, "r2 = {}", report.fit_r2);
    assert!(
        elapsed.as_secs_f64() < 300.0,
        "sweep took {elapsed:?}, budget 5 min"
    );
    println!(
        "ACCEPTANCE 7 pass: residual slope {:.4} with r2 = {:.4} ({:.2?})",
        report.fitted_slope, report.fit_r2, elapsed
    );
}

/// Criterion 8: the reduce command with a fixed seed produces identical
/// JSON (excluding the timestamp) across two consecutive runs.
#[test]
fn acceptance_8_determinism() {
    let dir = tempdir("determinism");
    let config_path = format!("{dir}/cfg.json");
    fs::write(
        &config_path,
        r#"{
        "domain": {"kind":"ball","center":[0.0,0.0,0.0],"radius":1.0,"n":3},
        "engine": {"n_boundary": 200, "tol": 1e-8, "method": "auto"},
        "regime": {"kind":"mac","n":3,"kappa":1,"lambdas":[1],"epsilon":1e-3},
        "seed": 42,
        "output": "OUT",
        "reduce": {"count": 12}
    }"#,
    )
    .unwrap();
    let mut outputs = vec![];
    for k in 0..2 {
        let out = format!("{dir}/run{k}.json");
        let status = Command::new(env!("CARGO_BIN_EXE_multibubble"))
            .args([
                "reduce",
                "--config",
                &config_path,
                "--set",
                &format!("output={out}"),
            ])
            .status()
            .unwrap();
        assert!(status.success());
        let text = fs::read_to_string(&out).unwrap();
        let stripped: String = text
            .lines()
            .filter(|l| !l.contains("\"timestamp\""))
            .collect::<Vec<_>>()
            .join("\n");
        // the output field differs by construction; normalise it away
        outputs.push(stripped.replace(&format!("run{k}.json"), "run.json"));
    }
    assert_eq!(outputs[0], outputs[1], "reduce runs differ beyond the timestamp");
    println!("ACCEPTANCE 8 pass: fixed-seed reduce output is byte-identical modulo timestamp");
}

/// Criterion 9 (exploratory, reported but not gating): convex-domain
/// same-sign two-bubble escape statistics and the sign-changing two-bubble
/// landscape under both interaction-sign conventions.
#[test]
fn acceptance_9_exploratory_interaction_sign() {
    let engine = GreenEngine::build(&DomainSpec::unit_ball(3), 200, 1e-8).unwrap();
    let opts = SearchOptions::default();

    // same-sign pair on a convex domain, printed under both conventions
    for sign in [1.0, -1.0] {
        let mut regime = Regime::mac(3, 2, 1, vec![1, 1]).unwrap();
        regime.interaction_sign = sign;
        let report = multistart(&engine, &regime, 99, 24, &opts).unwrap();
        println!(
            "ACCEPTANCE 9 report: same-sign kappa=2 convex ball, interaction_sign={sign:+}: \
             {} critical points, {}/{} escapes (rate->0 {}, rate->inf {}, boundary {}, collision {})",
            report.points.len(),
            report.escapes.escaped,
            report.escapes.starts,
            report.escapes.rate_to_zero,
            report.escapes.rate_to_infinity,
            report.escapes.boundary,
            report.escapes.collision,
        );
    }

    // sign-changing pair under both conventions
    for sign in [1.0, -1.0] {
        let mut regime = Regime::mac(3, 2, 1, vec![1, -1]).unwrap();
        regime.interaction_sign = sign;
        let report = multistart(&engine, &regime, 7, 24, &opts).unwrap();
        let mut class_counts: std::collections::BTreeMap<String, usize> = Default::default();
        for p in &report.points {
            *class_counts
                .entry(format!("{:?}", p.classification))
                .or_default() += 1;
        }
        let best = report
            .points
            .first()
            .map(|p| format!("{:.6}", p.value))
            .unwrap_or_else(|| "-".into());
        println!(
            "ACCEPTANCE 9 report: sign-changing kappa=2 ball, interaction_sign={sign:+}: \
             {} critical points (by class {:?}, lowest value {best}), {}/{} escapes",
            report.points.len(),
            class_counts,
            report.escapes.escaped,
            report.escapes.starts,
        );
    }
    println!("ACCEPTANCE 9 pass: exploratory landscapes executed and reported");
}

fn tempdir(tag: &str) -> String {
    let dir = std::env::temp_dir().join(format!(
        "multibubble-acceptance-{tag}-{}",
        std::process::id()
    ));
    fs::create_dir_all(&dir).unwrap();
    dir.to_string_lossy().into_owned()
}
