//! Command implementations. Each command reads the run configuration,
//! performs its computation, writes one artifact file, and returns a
//! one-line summary for standard output.

use anyhow::{anyhow, Result};
use serde_json::json;

use multibubble::assemble::{assemble, residual_sweep, SweepOptions};
use multibubble::bubble::{kernel_residual, BubbleParams};
use multibubble::geometry::unit_sphere_points;
use multibubble::green::GreenSource;
use multibubble::reduced::{reduced_gradient, reduced_value, Configuration};
use multibubble::search::multistart;

use crate::config::{parse_configuration, RunConfig};
use crate::output::{metadata, write_csv, write_json};

/// CSV grid of the Robin function over a 2D slice, plus the grid minimum.
pub fn robin_map(cfg: &RunConfig) -> Result<String> {
    let block = cfg
        .robin_map
        .as_ref()
        .ok_or_else(|| anyhow!("config requires a \"robin_map\" block"))?;
    let domain = cfg.domain_spec()?;
    let n = domain.dim();
    if block.fixed.len() != n {
        return Err(anyhow!("\"fixed\" must have {n} coordinates"));
    }
    if block.axes[0] >= n || block.axes[1] >= n || block.axes[0] == block.axes[1] {
        return Err(anyhow!("slice axes out of range"));
    }
    let engine = cfg.build_engine()?;
    let (ax, ay) = (block.axes[0], block.axes[1]);
    let (nx, ny) = (block.resolution[0].max(2), block.resolution[1].max(2));
    let margin = block.boundary_margin * domain.diameter();
    let mut rows = Vec::new();
    let mut best: (f64, Vec<f64>) = (f64::INFINITY, vec![]);
    for i in 0..nx {
        let u = block.extent[0][0]
            + (block.extent[0][1] - block.extent[0][0]) * i as f64 / (nx - 1) as f64;
        for j in 0..ny {
            let v = block.extent[1][0]
                + (block.extent[1][1] - block.extent[1][0]) * j as f64 / (ny - 1) as f64;
            let mut x = block.fixed.clone();
            x[ax] = u;
            x[ay] = v;
            if domain.boundary_distance(&x) < margin {
                continue;
            }
            let tau = engine.robin(&x)?;
            rows.push(vec![u, v, tau]);
            if tau < best.0 {
                best = (tau, x);
            }
        }
    }
    if rows.is_empty() {
        return Err(anyhow!("slice does not intersect the domain interior"));
    }
    let meta = metadata(
        cfg.domain.as_ref(),
        None,
        json!({
            "c_n": engine.c_n(),
            "engine_tol": engine.tol(),
            "collocation_residual": engine.collocation_residual(),
            "axes": block.axes,
            "minimum_value": best.0,
            "minimum_point": best.1,
        }),
    );
    write_csv(&cfg.output, &meta, &["u", "v", "tau"], &rows)?;
    Ok(format!(
        "robin-map: {} grid points, minimum tau = {:.8e} at {:?} -> {}",
        rows.len(),
        best.0,
        best.1,
        cfg.output
    ))
}

/// Point evaluations of G, H and tau.
pub fn green_probe(cfg: &RunConfig) -> Result<String> {
    let block = cfg
        .green_probe
        .as_ref()
        .ok_or_else(|| anyhow!("config requires a \"green_probe\" block"))?;
    let engine = cfg.build_engine()?;
    let mut tau_entries = Vec::new();
    for x in &block.points {
        tau_entries.push(json!({"x": x, "tau": engine.robin(x)?}));
    }
    let mut pair_entries = Vec::new();
    for [x, y] in &block.pairs {
        pair_entries.push(json!({
            "x": x,
            "y": y,
            "green": engine.green(x, y)?,
            "regular_part": engine.regular_part(x, y)?,
        }));
    }
    let meta = metadata(
        cfg.domain.as_ref(),
        None,
        json!({
            "c_n": engine.c_n(),
            "engine_tol": engine.tol(),
            "collocation_residual": engine.collocation_residual(),
        }),
    );
    let body = json!({"tau": tau_entries, "pairs": pair_entries});
    write_json(&cfg.output, &meta, "probe", &body)?;
    Ok(format!(
        "green-probe: {} tau points, {} pairs -> {}",
        tau_entries.len(),
        pair_entries.len(),
        cfg.output
    ))
}

/// Multistart critical-point search; zero critical points is a result, not
/// an error. An optional landscape block additionally writes a CSV grid of
/// the reduced energy and its gradient norm over two configuration
/// coordinates.
pub fn reduce(cfg: &RunConfig) -> Result<String> {
    let block = cfg
        .reduce
        .as_ref()
        .ok_or_else(|| anyhow!("config requires a \"reduce\" block"))?;
    let regime = cfg.regime_block()?.build()?;
    let engine = cfg.build_engine()?;
    let opts = cfg.search.build();

    let mut landscape_note = String::new();
    if let Some(grid) = &block.landscape {
        let base = parse_configuration(&grid.configuration)?;
        base.check_shape(&regime)?;
        let dof = base.to_coords().len();
        let [ca, cb] = grid.coords;
        if ca >= dof || cb >= dof || ca == cb {
            return Err(anyhow!("landscape coords out of range (dof = {dof})"));
        }
        let (na, nb) = (grid.resolution[0].max(2), grid.resolution[1].max(2));
        let mut rows = Vec::new();
        for i in 0..na {
            let u = grid.extent[0][0]
                + (grid.extent[0][1] - grid.extent[0][0]) * i as f64 / (na - 1) as f64;
            for j in 0..nb {
                let v = grid.extent[1][0]
                    + (grid.extent[1][1] - grid.extent[1][0]) * j as f64 / (nb - 1) as f64;
                let mut x = base.to_coords();
                x[ca] = u;
                x[cb] = v;
                let Ok(c) = Configuration::from_coords(&regime, &x) else {
                    continue;
                };
                let (Ok(phi), Ok(g)) = (
                    reduced_value(&engine, &regime, &c),
                    reduced_gradient(&engine, &regime, &c),
                ) else {
                    continue;
                };
                let gnorm = g.iter().map(|t| t * t).sum::<f64>().sqrt();
                rows.push(vec![u, v, phi, gnorm]);
            }
        }
        let grid_path = format!("{}.landscape.csv", cfg.output);
        let meta = metadata(
            cfg.domain.as_ref(),
            Some(&serde_json::to_value(&regime)?),
            json!({
                "c_n": engine.c_n(),
                "engine_tol": engine.tol(),
                "coords": grid.coords,
            }),
        );
        write_csv(&grid_path, &meta, &["u", "v", "phi", "grad_norm"], &rows)?;
        landscape_note = format!(", landscape grid ({} pts) -> {grid_path}", rows.len());
    }

    if block.count == 0 {
        if landscape_note.is_empty() {
            return Err(anyhow!("reduce with count = 0 requires a landscape block"));
        }
        return Ok(format!("reduce: search skipped{landscape_note}"));
    }
    let report = multistart(&engine, &regime, cfg.seed, block.count, &opts)?;
    let meta = metadata(
        cfg.domain.as_ref(),
        Some(&serde_json::to_value(&regime)?),
        json!({
            "c_n": engine.c_n(),
            "engine_tol": engine.tol(),
            "seed": cfg.seed,
            "starts": block.count,
            "grad_tol": opts.grad_tol,
        }),
    );
    write_json(&cfg.output, &meta, "report", &report)?;
    Ok(format!(
        "reduce: {} critical points, {}/{} escapes -> {}{landscape_note}",
        report.points.len(),
        report.escapes.escaped,
        report.escapes.starts,
        cfg.output
    ))
}

/// Assemble an approximate solution and sample it along a segment.
pub fn cmd_assemble(cfg: &RunConfig) -> Result<String> {
    let block = cfg
        .assemble
        .as_ref()
        .ok_or_else(|| anyhow!("config requires an \"assemble\" block"))?;
    let regime = cfg.regime_block()?.build()?;
    let epsilon = cfg.regime_block()?.epsilon()?;
    let config = parse_configuration(&block.configuration)?;
    let engine = cfg.build_engine()?;
    let sol = assemble(&engine, &regime, epsilon, &config)?;
    let domain = engine.domain_spec();
    let n = domain.dim();
    let (from, to, samples) = match &block.segment {
        Some(seg) => {
            if seg.from.len() != n || seg.to.len() != n {
                return Err(anyhow!("segment endpoints must have {n} coordinates"));
            }
            (seg.from.clone(), seg.to.clone(), seg.samples.max(2))
        }
        None => {
            // default: a diameter through the first concentration center
            let center = sol.centers()[0].clone();
            let mut from = center.clone();
            let mut to = center.clone();
            let r = domain.boundary_distance(&center).max(0.0) * 0.95;
            from[0] -= r;
            to[0] += r;
            (from, to, 401)
        }
    };
    let mut rows = Vec::with_capacity(samples);
    for k in 0..samples {
        let t = k as f64 / (samples - 1) as f64;
        let x: Vec<f64> = from
            .iter()
            .zip(&to)
            .map(|(a, b)| a + t * (b - a))
            .collect();
        if domain.boundary_distance(&x) <= 0.0 {
            continue;
        }
        let mut row = vec![t];
        row.extend_from_slice(&x);
        row.push(sol.eval(&x));
        rows.push(row);
    }
    let mut header = vec!["t".to_string()];
    for i in 0..n {
        header.push(format!("x{i}"));
    }
    header.push("v".to_string());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let meta = metadata(
        cfg.domain.as_ref(),
        Some(&serde_json::to_value(&regime)?),
        json!({
            "epsilon": epsilon,
            "deltas": sol.deltas(),
            "centers": sol.centers(),
            "projection_residuals": sol.bubbles.iter().map(|b| b.correction_residual()).collect::<Vec<_>>(),
        }),
    );
    write_csv(&cfg.output, &meta, &header_refs, &rows)?;
    Ok(format!(
        "assemble: kappa = {}, eps = {epsilon:.3e}, {} samples -> {}",
        regime.kappa,
        rows.len(),
        cfg.output
    ))
}

/// Residual norms across an eps sweep with the fitted power law.
pub fn cmd_residual_sweep(cfg: &RunConfig) -> Result<String> {
    let block = cfg
        .residual_sweep
        .as_ref()
        .ok_or_else(|| anyhow!("config requires a \"residual_sweep\" block"))?;
    let regime = cfg.regime_block()?.build()?;
    let eps_list = cfg.regime_block()?.eps_list()?;
    let config = parse_configuration(&block.configuration)?;
    let engine = cfg.build_engine()?;
    let mut opts = SweepOptions::default();
    if let Some(v) = block.quad_budget {
        opts.quad_budget = v;
    }
    if let Some(v) = block.n_boundary {
        opts.n_boundary = v;
    }
    if let Some(v) = block.engine_tol {
        opts.engine_tol = v;
    }
    let report = residual_sweep(&engine, &regime, &config, &eps_list, &opts)?;
    let meta = metadata(
        cfg.domain.as_ref(),
        Some(&serde_json::to_value(&regime)?),
        json!({
            "fitted_slope": report.fitted_slope,
            "fit_r2": report.fit_r2,
        }),
    );
    write_json(&cfg.output, &meta, "report", &report)?;
    Ok(format!(
        "residual-sweep: slope = {:.6}, r2 = {:.6} over {} eps values -> {}",
        report.fitted_slope,
        report.fit_r2,
        report.eps_values.len(),
        cfg.output
    ))
}

/// Finite-difference verification that the kernel functions solve the
/// linearised equation, across dimensions and rates.
pub fn kernel_check(cfg: &RunConfig) -> Result<String> {
    let block = cfg
        .kernel_check
        .as_ref()
        .ok_or_else(|| anyhow!("config requires a \"kernel_check\" block"))?;
    let mut entries = Vec::new();
    let mut all_pass = true;
    for &n in &block.dims {
        if !(3..=6).contains(&n) {
            return Err(anyhow!("kernel check supports n in 3..=6"));
        }
        for &delta in &block.deltas {
            if !(delta > 0.0) {
                return Err(anyhow!("deltas must be positive"));
            }
            let z = vec![0.0; n];
            let params = BubbleParams::new(delta, z.clone(), 1, n)?;
            let sample = kernel_sample(&z, delta, n, block.samples);
            for j in 0..=n {
                let r = kernel_residual(&params, |x| params.kernel(j, x), &sample);
                let pass = r < block.threshold;
                all_pass &= pass;
                entries.push(json!({
                    "n": n, "delta": delta, "j": j, "residual": r, "pass": pass,
                }));
            }
        }
    }
    let meta = metadata(None, None, json!({"threshold": block.threshold}));
    let body = json!({"entries": entries, "pass": all_pass});
    write_json(&cfg.output, &meta, "kernel_check", &body)?;
    Ok(format!(
        "kernel-check: {} cases, pass = {all_pass} -> {}",
        entries.len(),
        cfg.output
    ))
}

/// Deterministic sample cloud around a bubble: directions times radii
/// spanning [0.1, 5] delta.
fn kernel_sample(z: &[f64], delta: f64, n: usize, count: usize) -> Vec<Vec<f64>> {
    let dirs = unit_sphere_points(n, count.div_ceil(5).max(4), 1234);
    let mut out = Vec::with_capacity(count);
    'outer: for (k, t) in [0.1, 0.5, 1.0, 2.0, 5.0].iter().enumerate() {
        for dir in &dirs {
            if out.len() >= count {
                break 'outer;
            }
            let r = t * delta * (1.0 + 0.13 * k as f64);
            out.push(z.iter().zip(dir).map(|(zi, di)| zi + r * di).collect());
        }
    }
    out
}

/// Dispatch by command name.
pub fn run(command: &str, cfg: &RunConfig) -> Result<String> {
    match command {
        "robin-map" => robin_map(cfg),
        "green-probe" => green_probe(cfg),
        "reduce" => reduce(cfg),
        "assemble" => cmd_assemble(cfg),
        "residual-sweep" => cmd_residual_sweep(cfg),
        "kernel-check" => kernel_check(cfg),
        other => Err(anyhow!("unknown command \"{other}\"")),
    }
}
