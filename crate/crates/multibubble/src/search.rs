//! Critical points of the reduced energy: descent for minima, Newton with a
//! trust region for saddles, spectral classification, and seeded multistart
//! with deduplication and escape statistics.
//!
//! Leaving the configuration space (a rate running to 0 or infinity, a point
//! hitting the boundary, two points colliding) is a meaningful outcome, not
//! an error: it is reported as [`Classification::EscapedLambda`] and tallied
//! by the multistart driver. For the regimes where the reduced energy is
//! provably monotone this is exactly the nonexistence signature.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::dist;
use crate::green::GreenSource;
use crate::reduced::{reduced_gradient, reduced_value, Configuration, Regime, RegimeKind};

/// Options shared by the search operations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchOptions {
    pub max_iters: usize,
    /// Gradient norm below which a point counts as critical.
    pub grad_tol: f64,
    /// Initial trust-region radius for the saddle search.
    pub trust_radius: f64,
    /// Minimum distance of concentration/base points to the boundary,
    /// relative to the domain diameter.
    pub interior_margin_rel: f64,
    /// Minimum pairwise separation of concentration points, relative to the
    /// domain diameter.
    pub separation_margin_rel: f64,
    /// |l| beyond which a rate counts as escaped (d -> 0 or infinity).
    pub log_rate_bound: f64,
    /// |sigma| beyond which a tower offset counts as escaped.
    pub offset_bound: f64,
    /// Distance below which two converged configurations are duplicates.
    pub dedup_radius: f64,
    /// Degeneracy threshold for classification, relative to the Hessian
    /// spectral radius.
    pub nu_rel: f64,
    /// Absolute Hessian spectral radius below which a converged point with
    /// drifted rates counts as an escape: along the exponential exit rays
    /// both the gradient and all curvatures vanish, so a tolerance-level
    /// gradient there carries no critical-point information.
    pub flat_tol: f64,
    /// Indices of the coordinates allowed to vary; `None` frees all of them.
    pub active_coords: Option<Vec<usize>>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            max_iters: 300,
            grad_tol: 1e-9,
            trust_radius: 1.0,
            interior_margin_rel: 1e-3,
            separation_margin_rel: 1e-3,
            log_rate_bound: 20.0,
            offset_bound: 50.0,
            dedup_radius: 1e-4,
            nu_rel: 1e-6,
            flat_tol: 1e-7,
            active_coords: None,
        }
    }
}

impl SearchOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0 && self.dedup_radius > 0.0 && self.nu_rel > 0.0) {
            return Err(Error::InvalidInput("search tolerances must be positive".into()));
        }
        if !(self.interior_margin_rel > 0.0 && self.separation_margin_rel > 0.0) {
            return Err(Error::InvalidInput("margins must be positive".into()));
        }
        Ok(())
    }
}

/// Why a search trajectory left the configuration space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscapeReason {
    RateToZero,
    RateToInfinity,
    BoundaryHit,
    Collision,
    OffsetDiverged,
}

/// Stability taxonomy of a converged configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Classification {
    IsolatedMin,
    IsolatedMax,
    /// Nondegenerate with the given Morse index (number of negative
    /// eigenvalues); mixed-sign spectra are saddles of min-max type.
    NonDegenerate { index: usize },
    /// Alias for a nondegenerate mixed-sign saddle; kept for reports that
    /// label saddles by their variational role.
    MinMax,
    Degenerate,
    EscapedLambda { reason: EscapeReason },
}

impl Classification {
    /// True for saddles accessible by min-max arguments (mixed sign,
    /// nondegenerate spectrum).
    pub fn is_min_max(&self) -> bool {
        matches!(self, Classification::MinMax)
            || matches!(self, Classification::NonDegenerate { index } if *index > 0)
    }
}

/// A converged configuration with diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub regime: Regime,
    pub config: Configuration,
    pub value: f64,
    pub grad_norm: f64,
    /// Eigenvalues of the (masked) Hessian, ascending. Empty for escapes.
    pub hess_spectrum: Vec<f64>,
    pub classification: Classification,
    pub iterations: usize,
}

// ---------------------------------------------------------------------------
// generic numerical kernels (independent of the reduced energy, so the
// synthetic sanity oracles exercise exactly the code used in production)
// ---------------------------------------------------------------------------

pub(crate) enum RawOutcome {
    Converged { x: Vec<f64>, iters: usize },
    Escaped { x: Vec<f64>, reason: EscapeReason, iters: usize },
    Stalled { grad_norm: f64, iters: usize },
}

/// BFGS with Armijo backtracking. `eval`/`grad` return `None` for infeasible
/// points; `escape` flags trajectories leaving the admissible set. Accepted
/// iterates never increase the objective.
pub(crate) fn bfgs_minimize(
    eval: &dyn Fn(&[f64]) -> Option<f64>,
    grad: &dyn Fn(&[f64]) -> Option<Vec<f64>>,
    escape: &dyn Fn(&[f64]) -> Option<EscapeReason>,
    x0: &[f64],
    max_iters: usize,
    grad_tol: f64,
) -> Result<RawOutcome> {
    let m = x0.len();
    let mut x = x0.to_vec();
    let mut f = eval(&x).ok_or_else(|| {
        Error::ConfigOutsideLambda("initial point is not admissible".into())
    })?;
    let mut g = grad(&x).ok_or_else(|| {
        Error::ConfigOutsideLambda("initial point is not admissible".into())
    })?;
    let mut binv = DMatrix::<f64>::identity(m, m);
    // along an exponentially flat exit direction the gradient decays while
    // the iterates keep moving; convergence therefore also requires the
    // proposed quasi-Newton step to be small
    let step_tol = |x: &[f64]| 1e-5 * (1.0 + x.iter().fold(0.0_f64, |a, b| a.max(b.abs())));
    for iter in 0..max_iters {
        let gnorm = norm(&g);
        let gv = DVector::from_column_slice(&g);
        let mut p = -(&binv * &gv);
        if p.dot(&gv) >= 0.0 {
            binv = DMatrix::identity(m, m);
            p = -gv.clone();
        }
        if gnorm <= grad_tol && p.norm() <= step_tol(&x) {
            return Ok(RawOutcome::Converged { x, iters: iter });
        }
        // Armijo backtracking
        let slope = p.dot(&gv);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let xc: Vec<f64> = x.iter().zip(p.iter()).map(|(xi, pi)| xi + t * pi).collect();
            if let Some(fc) = eval(&xc) {
                if fc <= f + 1e-4 * t * slope {
                    accepted = Some((xc, fc));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fn_)) = accepted else {
            return Ok(RawOutcome::Stalled {
                grad_norm: gnorm,
                iters: iter,
            });
        };
        let Some(gn) = grad(&xn) else {
            return Ok(RawOutcome::Stalled {
                grad_norm: gnorm,
                iters: iter,
            });
        };
        // BFGS update of the inverse Hessian
        let s = DVector::from_iterator(m, xn.iter().zip(&x).map(|(a, b)| a - b));
        let yv = DVector::from_iterator(m, gn.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            let rho = 1.0 / sy;
            let by = &binv * &yv;
            let ybyt = yv.dot(&by);
            // Sherman-Morrison form of the BFGS inverse update
            binv = &binv + (sy + ybyt) * rho * rho * (&s * s.transpose())
                - rho * (&by * s.transpose() + &s * by.transpose());
        }
        x = xn;
        f = fn_;
        g = gn;
        if let Some(reason) = escape(&x) {
            return Ok(RawOutcome::Escaped {
                x,
                reason,
                iters: iter + 1,
            });
        }
    }
    Ok(RawOutcome::Stalled {
        grad_norm: norm(&g),
        iters: max_iters,
    })
}

/// Newton iteration on grad = 0 with spectral step clamping and a trust
/// region; converges to critical points of any index.
pub(crate) fn newton_critical(
    grad: &dyn Fn(&[f64]) -> Option<Vec<f64>>,
    hess: &dyn Fn(&[f64]) -> Option<DMatrix<f64>>,
    escape: &dyn Fn(&[f64]) -> Option<EscapeReason>,
    x0: &[f64],
    max_iters: usize,
    grad_tol: f64,
    trust_radius: f64,
) -> Result<RawOutcome> {
    let mut x = x0.to_vec();
    let mut g = grad(&x).ok_or_else(|| {
        Error::ConfigOutsideLambda("initial point is not admissible".into())
    })?;
    let mut radius = trust_radius;
    let step_tol = |x: &[f64]| 1e-5 * (1.0 + x.iter().fold(0.0_f64, |a, b| a.max(b.abs())));
    for iter in 0..max_iters {
        let gnorm = norm(&g);
        let h = hess(&x).ok_or(Error::SingularHessian)?;
        let eig = SymmetricEigen::new(h);
        let spectral_radius = eig.eigenvalues.amax();
        if !(spectral_radius > 0.0) {
            return Err(Error::SingularHessian);
        }
        // saddle-respecting Newton: invert |lambda| with a floor
        let floor = 1e-10 * spectral_radius;
        let gv = DVector::from_column_slice(&g);
        let coeffs = eig.eigenvectors.transpose() * &gv;
        let mut step = DVector::zeros(x.len());
        for k in 0..x.len() {
            let lam = eig.eigenvalues[k];
            let denom = if lam.abs() < floor {
                floor * lam.signum().max(0.0).mul_add(2.0, -1.0) // +-floor, never 0
            } else {
                lam
            };
            step += eig.eigenvectors.column(k) * (-coeffs[k] / denom);
        }
        // converged when both the gradient and the proposed displacement are
        // negligible; a tiny gradient with a large demanded step signals an
        // exponentially flat exit direction, not a critical point
        if gnorm <= grad_tol && step.norm() <= step_tol(&x) {
            return Ok(RawOutcome::Converged { x, iters: iter });
        }
        let mut accepted = false;
        for _ in 0..30 {
            let mut s = step.clone();
            let slen = s.norm();
            if slen > radius {
                s *= radius / slen;
            }
            let xc: Vec<f64> = x.iter().zip(s.iter()).map(|(xi, si)| xi + si).collect();
            if let Some(gc) = grad(&xc) {
                if norm(&gc) < gnorm {
                    x = xc;
                    g = gc;
                    radius = (radius * 2.0).min(trust_radius * 100.0);
                    accepted = true;
                    break;
                }
            }
            radius *= 0.25;
            if radius < 1e-14 {
                break;
            }
        }
        if !accepted {
            return Ok(RawOutcome::Stalled {
                grad_norm: norm(&g),
                iters: iter,
            });
        }
        if let Some(reason) = escape(&x) {
            return Ok(RawOutcome::Escaped {
                x,
                reason,
                iters: iter + 1,
            });
        }
    }
    Ok(RawOutcome::Stalled {
        grad_norm: norm(&g),
        iters: max_iters,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// reduced-energy adapters
// ---------------------------------------------------------------------------

struct Workspace<'a> {
    source: &'a dyn GreenSource,
    regime: &'a Regime,
    base: Vec<f64>,
    active: Vec<usize>,
    opts: &'a SearchOptions,
    scale: f64,
}

impl<'a> Workspace<'a> {
    fn new(
        source: &'a dyn GreenSource,
        regime: &'a Regime,
        init: &Configuration,
        opts: &'a SearchOptions,
    ) -> Result<Self> {
        opts.validate()?;
        init.check_shape(regime)?;
        let base = init.to_coords();
        let dof = base.len();
        let active = match &opts.active_coords {
            None => (0..dof).collect(),
            Some(ids) => {
                if ids.iter().any(|&i| i >= dof) {
                    return Err(Error::InvalidInput("active coordinate out of range".into()));
                }
                ids.clone()
            }
        };
        let scale = source.domain().map(|d| d.diameter()).unwrap_or(1.0);
        Ok(Workspace {
            source,
            regime,
            base,
            active,
            opts,
            scale,
        })
    }

    fn full(&self, u: &[f64]) -> Vec<f64> {
        let mut x = self.base.clone();
        for (slot, v) in self.active.iter().zip(u) {
            x[*slot] = *v;
        }
        x
    }

    fn reduced(&self, x: &[f64]) -> Vec<f64> {
        self.active.iter().map(|&i| x[i]).collect()
    }

    fn config(&self, u: &[f64]) -> Result<Configuration> {
        Configuration::from_coords(self.regime, &self.full(u))
    }

    fn value(&self, u: &[f64]) -> Option<f64> {
        let cfg = self.config(u).ok()?;
        reduced_value(self.source, self.regime, &cfg).ok()
    }

    fn grad(&self, u: &[f64]) -> Option<Vec<f64>> {
        let cfg = self.config(u).ok()?;
        let g = reduced_gradient(self.source, self.regime, &cfg).ok()?;
        Some(self.active.iter().map(|&i| g[i]).collect())
    }

    /// Masked finite-difference Hessian built from the analytic gradient.
    fn hessian(&self, u: &[f64]) -> Option<DMatrix<f64>> {
        crate::numdiff::symmetric_hessian(|p| self.grad(p), u, |j| 1e-5 * u[j].abs().max(1.0))
    }

    /// Escape test in full coordinates.
    fn escape(&self, u: &[f64]) -> Option<EscapeReason> {
        let x = self.full(u);
        let (n, kappa) = (self.regime.n, self.regime.kappa);
        for i in 0..kappa {
            let l = x[kappa * n + i];
            if l < -self.opts.log_rate_bound {
                return Some(EscapeReason::RateToZero);
            }
            if l > self.opts.log_rate_bound {
                return Some(EscapeReason::RateToInfinity);
            }
        }
        let margin = self.opts.interior_margin_rel * self.scale;
        match self.regime.kind {
            RegimeKind::Mbn | RegimeKind::Mac => {
                let points: Vec<&[f64]> = (0..kappa).map(|i| &x[i * n..(i + 1) * n]).collect();
                if let Some(domain) = self.source.domain() {
                    for p in &points {
                        if domain.boundary_distance(p) < margin {
                            return Some(EscapeReason::BoundaryHit);
                        }
                    }
                }
                let sep = self.opts.separation_margin_rel * self.scale;
                for i in 0..kappa {
                    for j in i + 1..kappa {
                        if dist(points[i], points[j]) < sep {
                            return Some(EscapeReason::Collision);
                        }
                    }
                }
            }
            RegimeKind::Tac => {
                if let Some(domain) = self.source.domain() {
                    let z = &x[(kappa - 1) * n..kappa * n];
                    if domain.boundary_distance(z) < margin {
                        return Some(EscapeReason::BoundaryHit);
                    }
                }
                for i in 0..kappa - 1 {
                    if norm(&x[i * n..(i + 1) * n]) > self.opts.offset_bound {
                        return Some(EscapeReason::OffsetDiverged);
                    }
                }
            }
            RegimeKind::Tc => {
                for i in 0..kappa {
                    if norm(&x[i * n..(i + 1) * n]) > self.opts.offset_bound {
                        return Some(EscapeReason::OffsetDiverged);
                    }
                }
            }
        }
        None
    }

    fn finish(&self, outcome: RawOutcome) -> Result<CriticalPoint> {
        match outcome {
            RawOutcome::Converged { x, iters } => {
                let cfg = self.config(&x)?;
                // independent re-verification of criticality
                let g_full = reduced_gradient(self.source, self.regime, &cfg)?;
                let g_masked: Vec<f64> = self.active.iter().map(|&i| g_full[i]).collect();
                let grad_norm = norm(&g_masked);
                let value = reduced_value(self.source, self.regime, &cfg)?;
                let h = self
                    .hessian(&x)
                    .ok_or_else(|| Error::ConfigOutsideLambda("Hessian evaluation left Lambda".into()))?;
                let mut spectrum: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().cloned().collect();
                spectrum.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mut classification = classify_spectrum(&spectrum, self.opts.nu_rel);
                // numerically flat everywhere + drifted rates: the iterate sits
                // on an exponential exit ray, not at a critical point
                let radius = spectrum.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
                if radius <= self.opts.flat_tol {
                    if let Some(reason) = self.drift_reason(&x) {
                        classification = Classification::EscapedLambda { reason };
                    }
                }
                Ok(CriticalPoint {
                    regime: self.regime.clone(),
                    config: cfg,
                    value,
                    grad_norm,
                    hess_spectrum: spectrum,
                    classification,
                    iterations: iters,
                })
            }
            RawOutcome::Escaped { x, reason, iters } => {
                // the escape point may be outside Lambda; report last data
                let (value, grad_norm) = match self.config(&x) {
                    Ok(cfg) => (
                        reduced_value(self.source, self.regime, &cfg).unwrap_or(f64::NAN),
                        self.grad(&self.reduced_from_full(&x))
                            .map(|g| norm(&g))
                            .unwrap_or(f64::NAN),
                    ),
                    Err(_) => (f64::NAN, f64::NAN),
                };
                Ok(CriticalPoint {
                    regime: self.regime.clone(),
                    config: Configuration::from_coords(self.regime, &self.full(&x))?,
                    value,
                    grad_norm,
                    hess_spectrum: vec![],
                    classification: Classification::EscapedLambda { reason },
                    iterations: iters,
                })
            }
            RawOutcome::Stalled { grad_norm, iters, .. } => Err(Error::MaxIters {
                iters,
                grad_norm,
            }),
        }
    }

    fn reduced_from_full(&self, u: &[f64]) -> Vec<f64> {
        // raw outcomes already live in reduced coordinates
        u.to_vec()
    }

    /// Evidence that a flat-spectrum iterate drifted out of the compact part
    /// of the configuration space.
    fn drift_reason(&self, u: &[f64]) -> Option<EscapeReason> {
        let x = self.full(u);
        let (n, kappa) = (self.regime.n, self.regime.kappa);
        let mut worst: Option<(f64, EscapeReason)> = None;
        for i in 0..kappa {
            let l = x[kappa * n + i];
            if l.abs() > 2.0 {
                let reason = if l < 0.0 {
                    EscapeReason::RateToZero
                } else {
                    EscapeReason::RateToInfinity
                };
                if worst.as_ref().map(|w| l.abs() > w.0).unwrap_or(true) {
                    worst = Some((l.abs(), reason));
                }
            }
        }
        if self.regime.is_tower() {
            let blocks = match self.regime.kind {
                RegimeKind::Tac => kappa - 1,
                _ => kappa,
            };
            for i in 0..blocks {
                let s = norm(&x[i * n..(i + 1) * n]);
                if s > 10.0 && worst.as_ref().map(|w| s > w.0).unwrap_or(true) {
                    worst = Some((s, EscapeReason::OffsetDiverged));
                }
            }
        }
        worst.map(|w| w.1)
    }
}

/// Spectral classification with degeneracy threshold `nu_rel` relative to
/// the spectral radius.
pub fn classify_spectrum(spectrum: &[f64], nu_rel: f64) -> Classification {
    if spectrum.is_empty() {
        return Classification::Degenerate;
    }
    let radius = spectrum.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let nu = nu_rel * radius;
    if radius == 0.0 || spectrum.iter().any(|e| e.abs() <= nu) {
        return Classification::Degenerate;
    }
    let negatives = spectrum.iter().filter(|e| **e < 0.0).count();
    if negatives == 0 {
        Classification::IsolatedMin
    } else if negatives == spectrum.len() {
        Classification::IsolatedMax
    } else {
        Classification::NonDegenerate { index: negatives }
    }
}

// ---------------------------------------------------------------------------
// public operations
// ---------------------------------------------------------------------------

/// Line-searched quasi-Newton descent from `init`. Returns a critical point,
/// an `EscapedLambda` outcome, or `MaxIters`.
pub fn minimize(
    source: &dyn GreenSource,
    regime: &Regime,
    init: &Configuration,
    opts: &SearchOptions,
) -> Result<CriticalPoint> {
    let ws = Workspace::new(source, regime, init, opts)?;
    let u0 = ws.reduced(&init.to_coords());
    let outcome = bfgs_minimize(
        &|u| ws.value(u),
        &|u| ws.grad(u),
        &|u| ws.escape(u),
        &u0,
        opts.max_iters,
        opts.grad_tol,
    )?;
    ws.finish(outcome)
}

/// Newton iteration on the gradient with a trust region; finds critical
/// points of any Morse index.
pub fn saddle_search(
    source: &dyn GreenSource,
    regime: &Regime,
    init: &Configuration,
    opts: &SearchOptions,
) -> Result<CriticalPoint> {
    let ws = Workspace::new(source, regime, init, opts)?;
    let u0 = ws.reduced(&init.to_coords());
    let outcome = newton_critical(
        &|u| ws.grad(u),
        &|u| ws.hessian(u),
        &|u| ws.escape(u),
        &u0,
        opts.max_iters,
        opts.grad_tol,
        opts.trust_radius,
    )?;
    ws.finish(outcome)
}

/// Classify an already-converged configuration. `nu <= 0` selects the
/// default threshold 1e-6 x spectral radius.
pub fn classify(
    source: &dyn GreenSource,
    regime: &Regime,
    config: &Configuration,
    nu: f64,
) -> Result<Classification> {
    let opts = SearchOptions::default();
    let ws = Workspace::new(source, regime, config, &opts)?;
    let u = ws.reduced(&config.to_coords());
    let g = ws
        .grad(&u)
        .ok_or_else(|| Error::ConfigOutsideLambda("configuration not admissible".into()))?;
    let grad_norm = norm(&g);
    if grad_norm > opts.grad_tol {
        return Err(Error::NotCritical {
            grad_norm,
            tol: opts.grad_tol,
        });
    }
    let h = ws
        .hessian(&u)
        .ok_or_else(|| Error::ConfigOutsideLambda("Hessian evaluation left Lambda".into()))?;
    let mut spectrum: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().cloned().collect();
    spectrum.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let radius = spectrum.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let nu_rel = if nu > 0.0 && radius > 0.0 { nu / radius } else { 1e-6 };
    Ok(classify_spectrum(&spectrum, nu_rel))
}

/// Escape tallies of a multistart run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EscapeStats {
    pub starts: usize,
    pub escaped: usize,
    pub rate_to_zero: usize,
    pub rate_to_infinity: usize,
    pub boundary: usize,
    pub collision: usize,
    pub offset_diverged: usize,
    /// Starts where neither search converged nor escaped.
    pub stalled: usize,
}

impl EscapeStats {
    pub fn fraction_escaped(&self) -> f64 {
        if self.starts == 0 {
            0.0
        } else {
            self.escaped as f64 / self.starts as f64
        }
    }
}

/// Result of a multistart search: deduplicated critical points sorted by
/// value, plus escape statistics of the descent trajectories.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultistartReport {
    pub points: Vec<CriticalPoint>,
    pub escapes: EscapeStats,
}

/// Deterministic multistart: `count` seeded starts, descent plus Newton from
/// each, deduplication within `opts.dedup_radius`, results sorted by value.
pub fn multistart(
    source: &dyn GreenSource,
    regime: &Regime,
    sampler_seed: u64,
    count: usize,
    opts: &SearchOptions,
) -> Result<MultistartReport> {
    if count == 0 {
        return Err(Error::InvalidInput("multistart needs count >= 1".into()));
    }
    opts.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(sampler_seed);
    let inits: Vec<Configuration> = (0..count)
        .map(|_| sample_configuration(source, regime, &mut rng, opts))
        .collect::<Result<_>>()?;

    let mut stats = EscapeStats {
        starts: count,
        ..Default::default()
    };
    let mut found: Vec<CriticalPoint> = Vec::new();
    for init in &inits {
        let min_result = minimize(source, regime, init, opts);
        let mut start_converged = false;
        let mut start_escape: Option<EscapeReason> = None;
        match &min_result {
            Ok(cp) => match cp.classification {
                Classification::EscapedLambda { reason } => start_escape = Some(reason),
                _ => {
                    start_converged = true;
                    found.push(cp.clone());
                }
            },
            Err(_) => {}
        }
        // Newton picks up saddles from the same start; retry once on a
        // singular Hessian with a jittered init
        let saddle_result = match saddle_search(source, regime, init, opts) {
            Err(Error::SingularHessian) => {
                let jitter = jitter_configuration(init, regime, &mut rng);
                saddle_search(source, regime, &jitter, opts)
            }
            other => other,
        };
        if let Ok(cp) = &saddle_result {
            match cp.classification {
                Classification::EscapedLambda { reason } => {
                    if start_escape.is_none() {
                        start_escape = Some(reason);
                    }
                }
                _ => {
                    start_converged = true;
                    found.push(cp.clone());
                }
            }
        }
        if !start_converged {
            match start_escape {
                Some(reason) => {
                    stats.escaped += 1;
                    match reason {
                        EscapeReason::RateToZero => stats.rate_to_zero += 1,
                        EscapeReason::RateToInfinity => stats.rate_to_infinity += 1,
                        EscapeReason::BoundaryHit => stats.boundary += 1,
                        EscapeReason::Collision => stats.collision += 1,
                        EscapeReason::OffsetDiverged => stats.offset_diverged += 1,
                    }
                }
                None => stats.stalled += 1,
            }
        }
    }

    // post-hoc verification plus dedup in canonical coordinates
    let tol = opts.grad_tol * 10.0;
    let mut verified: Vec<CriticalPoint> = Vec::new();
    for cp in found {
        let g = reduced_gradient(source, regime, &cp.config)?;
        let masked: Vec<f64> = match &opts.active_coords {
            None => g,
            Some(ids) => ids.iter().map(|&i| g[i]).collect(),
        };
        if norm(&masked) > tol {
            log::warn!("dropping candidate with post-hoc |grad| = {:.3e}", norm(&masked));
            continue;
        }
        let coords = canonical_coords(regime, &cp.config);
        let dup = verified.iter().any(|other| {
            let oc = canonical_coords(regime, &other.config);
            dist(&coords, &oc) < opts.dedup_radius
        });
        if !dup {
            verified.push(cp);
        }
    }
    verified.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
    Ok(MultistartReport {
        points: verified,
        escapes: stats,
    })
}

/// Draw an admissible starting configuration: points uniform over an
/// interior shrink of the domain, log-rates uniform in [-2, 2], offsets
/// standard normal.
fn sample_configuration(
    source: &dyn GreenSource,
    regime: &Regime,
    rng: &mut ChaCha8Rng,
    opts: &SearchOptions,
) -> Result<Configuration> {
    let n = regime.n;
    let kappa = regime.kappa;
    let scale = source.domain().map(|d| d.diameter()).unwrap_or(1.0);
    let margin = (10.0 * opts.interior_margin_rel * scale).max(0.05 * scale);
    let sample_point = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        match source.domain() {
            Some(domain) => domain.sample_interior(rng, margin),
            None => (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    };
    let sample_rates =
        |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..kappa).map(|_| rng.gen_range(-2.0..2.0)).collect() };
    let normal = |rng: &mut ChaCha8Rng| -> f64 {
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    match regime.kind {
        RegimeKind::Mbn | RegimeKind::Mac => {
            let sep = 5.0 * opts.separation_margin_rel * scale;
            for _ in 0..1000 {
                let points: Vec<Vec<f64>> = (0..kappa).map(|_| sample_point(rng)).collect();
                let mut ok = true;
                'sep: for i in 0..kappa {
                    for j in i + 1..kappa {
                        if dist(&points[i], &points[j]) < sep {
                            ok = false;
                            break 'sep;
                        }
                    }
                }
                if ok {
                    return Ok(Configuration::Multi {
                        points,
                        log_rates: sample_rates(rng),
                    });
                }
            }
            Err(Error::ConfigOutsideLambda(
                "could not sample separated interior points".into(),
            ))
        }
        RegimeKind::Tac => Ok(Configuration::TowerAc {
            offsets: (0..kappa - 1)
                .map(|_| (0..n).map(|_| normal(rng)).collect())
                .collect(),
            base: sample_point(rng),
            log_rates: sample_rates(rng),
        }),
        RegimeKind::Tc => Ok(Configuration::TowerC {
            offsets: (0..kappa)
                .map(|_| (0..n).map(|_| normal(rng)).collect())
                .collect(),
            log_rates: sample_rates(rng),
        }),
    }
}

fn jitter_configuration(
    config: &Configuration,
    regime: &Regime,
    rng: &mut ChaCha8Rng,
) -> Configuration {
    let mut x = config.to_coords();
    for v in &mut x {
        *v += rng.gen_range(-1e-3..1e-3);
    }
    Configuration::from_coords(regime, &x).expect("same shape")
}

/// Coordinates invariant under relabelling of same-sign bubbles, used for
/// deduplication.
fn canonical_coords(regime: &Regime, config: &Configuration) -> Vec<f64> {
    match config {
        Configuration::Multi { points, log_rates } => {
            let mut idx: Vec<usize> = (0..points.len()).collect();
            idx.sort_by(|&a, &b| {
                regime.lambdas[a]
                    .cmp(&regime.lambdas[b])
                    .then_with(|| {
                        points[a]
                            .partial_cmp(&points[b])
                            .unwrap_or(std::cmp::Ordering::Equal)
                    })
            });
            let mut x = Vec::new();
            for &i in &idx {
                x.extend_from_slice(&points[i]);
            }
            for &i in &idx {
                x.push(log_rates[i]);
            }
            x
        }
        _ => config.to_coords(),
    }
}
