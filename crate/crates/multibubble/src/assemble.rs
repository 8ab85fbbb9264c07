//! Multi-bubble approximate solutions: assembly, energy, and residual
//! scaling in the perturbation parameter.
//!
//! The approximate solution is V(x) = sum_i lambda_i PU_{delta_i, z_i}(x).
//! Since the projection subtracts a harmonic function, -Delta V =
//! sum_i lambda_i U_i^p exactly, so the strong residual of the perturbed
//! problem is r(x) = sum_i lambda_i U_i(x)^p - f_eps(V(x)). Its
//! L^{2n/(n+2)} norm is the computable proxy for the dual norm of the
//! ansatz error (the embedding adjoint is bounded from L^{2n/(n+2)}), and
//! its log-log slope against eps certifies the expected power-law decay.

use serde::{Deserialize, Serialize};

use crate::bubble::{project_bubble, BubbleParams, Nonlinearity, ProjectedBubble};
use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::green::GreenEngine;
use crate::quad::{interior_quadrature, QuadratureRule};
use crate::reduced::{Configuration, Regime, RegimeKind};

/// An assembled multi-bubble approximation on a concrete domain.
#[derive(Debug, Clone)]
pub struct ApproximateSolution {
    pub regime: Regime,
    pub epsilon: f64,
    pub config: Configuration,
    /// Projected bubbles in ansatz order; signs live in `regime.lambdas`
    /// and are applied at combination time.
    pub bubbles: Vec<ProjectedBubble>,
    nonlinearity: Nonlinearity,
    domain: DomainSpec,
}

impl ApproximateSolution {
    /// V(x) = sum_i lambda_i PU_i(x).
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.bubbles
            .iter()
            .zip(&self.regime.lambdas)
            .map(|(b, l)| *l as f64 * b.eval(x))
            .sum()
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let n = self.domain.dim();
        let mut g = vec![0.0; n];
        for (b, l) in self.bubbles.iter().zip(&self.regime.lambdas) {
            let gb = b.grad(x);
            for (gi, gb_i) in g.iter_mut().zip(&gb) {
                *gi += *l as f64 * gb_i;
            }
        }
        g
    }

    /// Pointwise strong residual r(x) = sum_i lambda_i U_i(x)^p - f_eps(V(x)).
    pub fn strong_residual(&self, x: &[f64]) -> f64 {
        let p = self.nonlinearity.p;
        let mut source = 0.0;
        for (b, l) in self.bubbles.iter().zip(&self.regime.lambdas) {
            source += *l as f64 * b.params.eval(x).powf(p);
        }
        source - self.nonlinearity.eval(self.eval(x))
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.bubbles.iter().map(|b| b.params.delta).collect()
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        self.bubbles.iter().map(|b| b.params.z.clone()).collect()
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    /// A quadrature rule refined at the bubble centers and rates.
    pub fn quadrature(&self, budget: usize) -> Result<QuadratureRule> {
        interior_quadrature(&self.domain, &self.centers(), &self.deltas(), budget)
    }
}

/// Assemble the approximation for a regime at the given perturbation size:
/// rates from the regime's delta scaling, centers from the configuration.
pub fn assemble(
    engine: &GreenEngine,
    regime: &Regime,
    epsilon: f64,
    config: &Configuration,
) -> Result<ApproximateSolution> {
    config.check_shape(regime)?;
    let deltas: Vec<f64> = (1..=regime.kappa)
        .map(|i| regime.delta_scaling(epsilon, config, i))
        .collect::<Result<_>>()?;
    let centers = regime.centers(epsilon, config)?;
    assemble_inner(engine, regime.clone(), epsilon, config.clone(), centers, deltas)
}

/// Assemble with explicitly chosen rates (used for limit studies where the
/// rates are pinned independently of epsilon).
pub fn assemble_with_deltas(
    engine: &GreenEngine,
    regime: &Regime,
    epsilon: f64,
    config: &Configuration,
    deltas: Vec<f64>,
) -> Result<ApproximateSolution> {
    config.check_shape(regime)?;
    if deltas.len() != regime.kappa || deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidInput("need kappa positive rates".into()));
    }
    let centers = match config {
        Configuration::Multi { points, .. } => points.clone(),
        _ => regime.centers(epsilon, config)?,
    };
    assemble_inner(engine, regime.clone(), epsilon, config.clone(), centers, deltas)
}

fn assemble_inner(
    engine: &GreenEngine,
    regime: Regime,
    epsilon: f64,
    config: Configuration,
    centers: Vec<Vec<f64>>,
    deltas: Vec<f64>,
) -> Result<ApproximateSolution> {
    let domain = engine.domain_spec().clone();
    // interiority: tower centers on a perforated domain may sit inside the
    // hole (they collapse onto the hole center), which is fine - the bubble
    // is smooth there; everything else must be interior.
    for c in &centers {
        let interior = match (&domain, regime.kind) {
            (DomainSpec::Perforated { outer, .. }, RegimeKind::Tc) => {
                outer.boundary_distance(c) > 0.0
            }
            _ => domain.boundary_distance(c) > 0.0,
        };
        if !interior {
            return Err(Error::ConfigOutsideLambda(format!(
                "assembly center {c:?} is not interior"
            )));
        }
    }
    let bubbles = centers
        .iter()
        .zip(&deltas)
        .map(|(z, d)| {
            let params = BubbleParams::new(*d, z.clone(), 1, domain.dim())?;
            project_bubble(engine, &params)
        })
        .collect::<Result<Vec<ProjectedBubble>>>()?;
    let nonlinearity = Nonlinearity::new(regime.problem(), domain.dim(), epsilon);
    Ok(ApproximateSolution {
        regime,
        epsilon,
        config,
        bubbles,
        nonlinearity,
        domain,
    })
}

/// J_eps(V) = 1/2 int |grad V|^2 - int F_eps(V), with the gradient term
/// taken from the analytic gradients of the bubbles and their corrections.
pub fn energy(sol: &ApproximateSolution, rule: &QuadratureRule) -> Result<f64> {
    check_rule_refinement(sol, rule);
    let dirichlet = rule.integrate(|x| {
        let g = sol.grad(x);
        g.iter().map(|v| v * v).sum::<f64>()
    });
    let potential = rule.integrate(|x| sol.nonlinearity.primitive(sol.eval(x)));
    Ok(0.5 * dirichlet - potential)
}

/// L^{2n/(n+2)} norm of the strong residual.
pub fn residual_norm(sol: &ApproximateSolution, rule: &QuadratureRule) -> Result<f64> {
    check_rule_refinement(sol, rule);
    let n = sol.domain.dim() as f64;
    let q = 2.0 * n / (n + 2.0);
    let integral = rule.integrate(|x| sol.strong_residual(x).abs().powf(q));
    Ok(integral.powf(1.0 / q))
}

fn check_rule_refinement(sol: &ApproximateSolution, rule: &QuadratureRule) {
    for (z, d) in sol.centers().iter().zip(sol.deltas()) {
        let matched = rule
            .refinement_centers()
            .iter()
            .zip(rule.refinement_scales())
            .any(|(c, s)| {
                crate::geometry::dist(c, z) <= 10.0 * d && *s <= 10.0 * d && d <= 10.0 * *s
            });
        if !matched {
            log::warn!(
                "quadrature not refined at bubble center {z:?} (rate {d:.3e}); \
                 expect degraded accuracy"
            );
        }
    }
}

/// Fit of the residual power law over a sweep in eps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Strictly decreasing perturbation sizes.
    pub eps_values: Vec<f64>,
    pub residual_norms: Vec<f64>,
    /// Least-squares slope of log(residual) against log(eps).
    pub fitted_slope: f64,
    pub fit_r2: f64,
}

/// Options of a residual sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOptions {
    pub quad_budget: usize,
    /// Boundary point count for per-eps engine rebuilds (perforated tower).
    pub n_boundary: usize,
    pub engine_tol: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            quad_budget: crate::quad::DEFAULT_BUDGET,
            n_boundary: 400,
            engine_tol: 1e-6,
        }
    }
}

/// Measure the residual norm across a list of perturbation sizes and fit
/// the power law. For the perforated tower the engine is rebuilt per eps
/// (the hole is the perturbation); other regimes reuse the given engine.
pub fn residual_sweep(
    engine: &GreenEngine,
    regime: &Regime,
    config: &Configuration,
    eps_list: &[f64],
    opts: &SweepOptions,
) -> Result<ResidualReport> {
    if eps_list.len() < 4 {
        return Err(Error::InvalidInput("residual sweep needs >= 4 eps values".into()));
    }
    let mut eps_values = eps_list.to_vec();
    eps_values.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap());
    if eps_values
        .windows(2)
        .any(|w| w[0].abs() <= w[1].abs())
    {
        return Err(Error::InvalidInput("eps values must be distinct".into()));
    }
    let span = eps_values[0].abs() / eps_values.last().unwrap().abs();
    if span < 10f64.powf(1.5) {
        return Err(Error::InvalidInput(
            "eps values must span at least 1.5 decades".into(),
        ));
    }

    let mut residual_norms = Vec::with_capacity(eps_values.len());
    for &eps in &eps_values {
        let norm = match regime.kind {
            RegimeKind::Tc => {
                let z0 = regime.hole_center.clone().expect("validated");
                let domain_eps = DomainSpec::Perforated {
                    outer: Box::new(engine.domain_spec().clone()),
                    hole_center: z0,
                    hole_radius: eps,
                };
                let engine_eps = GreenEngine::build(&domain_eps, opts.n_boundary, opts.engine_tol)?;
                let sol = assemble(&engine_eps, regime, eps, config)?;
                let rule = sol.quadrature(opts.quad_budget)?;
                residual_norm(&sol, &rule)?
            }
            _ => {
                let sol = assemble(engine, regime, eps, config)?;
                let rule = sol.quadrature(opts.quad_budget)?;
                residual_norm(&sol, &rule)?
            }
        };
        residual_norms.push(norm);
    }
    let (fitted_slope, fit_r2) = log_log_fit(&eps_values, &residual_norms);
    Ok(ResidualReport {
        eps_values,
        residual_norms,
        fitted_slope,
        fit_r2,
    })
}

/// Least-squares slope and r^2 of ln(y) against ln(|x|).
pub fn log_log_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = xs.iter().map(|x| x.abs().ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (slope, r2)
}
