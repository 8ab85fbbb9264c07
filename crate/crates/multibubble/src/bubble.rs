//! Bubbles, their linearisation kernels, Dirichlet projections, and the
//! problem nonlinearities.
//!
//! A bubble is the standard positive solution of the critical limit problem
//! on R^n,
//!
//! ```text
//! U_{delta,z}(x) = alpha_n delta^{(n-2)/2} / (delta^2 + |x-z|^2)^{(n-2)/2},
//! alpha_n = [n(n-2)]^{(n-2)/4},
//! ```
//!
//! which satisfies -Delta U = U^p with p = (n+2)/(n-2). The kernel functions
//! psi^0 = dU/d(delta) and psi^j = dU/dz_j span the kernel of the linearised
//! operator. The Dirichlet projection PU = U - h subtracts the harmonic
//! extension h of the boundary trace of U.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::dist2;
use crate::green::{GreenEngine, HarmonicFit};
use crate::numdiff;

/// alpha_n = [n(n-2)]^{(n-2)/4}.
pub fn bubble_amplitude(n: usize) -> f64 {
    let nf = n as f64;
    (nf * (nf - 2.0)).powf((nf - 2.0) / 4.0)
}

/// Critical exponent p = (n+2)/(n-2) of the limit problem.
pub fn critical_exponent(n: usize) -> f64 {
    (n as f64 + 2.0) / (n as f64 - 2.0)
}

/// Concentration parameters of one bubble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams {
    /// Concentration rate delta > 0.
    pub delta: f64,
    /// Concentration point.
    pub z: Vec<f64>,
    /// Sign of the bubble in the ansatz; not applied by `eval`.
    pub lambda: i32,
    /// Ambient dimension.
    pub n: usize,
}

impl BubbleParams {
    pub fn new(delta: f64, z: Vec<f64>, lambda: i32, n: usize) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidInput(format!("delta = {delta} must be positive")));
        }
        if lambda != 1 && lambda != -1 {
            return Err(Error::InvalidInput(format!("lambda = {lambda} must be +1 or -1")));
        }
        if z.len() != n {
            return Err(Error::InvalidInput("bubble center has wrong dimension".into()));
        }
        Ok(BubbleParams { delta, z, lambda, n })
    }

    /// U_{delta,z}(x); strictly positive, the sign lambda is not applied.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let a = (self.n as f64 - 2.0) / 2.0;
        let r2 = dist2(x, &self.z);
        bubble_amplitude(self.n) * self.delta.powf(a) / (self.delta * self.delta + r2).powf(a)
    }

    /// Gradient of U with respect to x.
    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let nf = self.n as f64;
        let a = (nf - 2.0) / 2.0;
        let r2 = dist2(x, &self.z);
        let den = self.delta * self.delta + r2;
        let factor = -bubble_amplitude(self.n) * (nf - 2.0) * self.delta.powf(a) / den.powf(nf / 2.0);
        x.iter().zip(&self.z).map(|(xi, zi)| factor * (xi - zi)).collect()
    }

    /// Kernel functions of the linearised problem: j = 0 is dU/d(delta),
    /// j = 1..=n is dU/dz_j.
    pub fn kernel(&self, j: usize, x: &[f64]) -> f64 {
        assert!(j <= self.n, "kernel index out of range");
        let nf = self.n as f64;
        let alpha = bubble_amplitude(self.n);
        let r2 = dist2(x, &self.z);
        let den = (self.delta * self.delta + r2).powf(nf / 2.0);
        if j == 0 {
            alpha * (nf - 2.0) / 2.0 * self.delta.powf((nf - 4.0) / 2.0) * (r2 - self.delta * self.delta)
                / den
        } else {
            alpha * (nf - 2.0) * self.delta.powf((nf - 2.0) / 2.0) * (x[j - 1] - self.z[j - 1]) / den
        }
    }
}

/// Max relative residual of the linearised equation -Delta psi = p U^{p-1} psi
/// over a sample, with the Laplacian by central differences at step
/// 1e-3 * delta. Small for true kernel functions, order-one otherwise.
pub fn kernel_residual<F>(params: &BubbleParams, psi: F, sample: &[Vec<f64>]) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let p = critical_exponent(params.n);
    let step = 1e-3 * params.delta;
    let mut worst_err = 0.0_f64;
    let mut scale = 0.0_f64;
    for x in sample {
        if dist2(x, &params.z).sqrt() < 1e-3 * params.delta {
            continue;
        }
        let lhs = -numdiff::laplacian(&psi, x, step);
        let rhs = p * params.eval(x).powf(p - 1.0) * psi(x);
        worst_err = worst_err.max((lhs - rhs).abs());
        scale = scale.max(rhs.abs());
    }
    if scale > 0.0 {
        worst_err / scale
    } else {
        worst_err
    }
}

// ---------------------------------------------------------------------------
// Dirichlet projection
// ---------------------------------------------------------------------------

/// A bubble together with the harmonic correction h that realises its
/// Dirichlet projection PU = U - h on the engine's domain.
#[derive(Debug, Clone)]
pub struct ProjectedBubble {
    pub params: BubbleParams,
    correction: HarmonicFit,
    correction_residual: f64,
    charges: Vec<Vec<f64>>,
}

impl ProjectedBubble {
    /// The harmonic correction h (equals U on the boundary).
    pub fn correction(&self, x: &[f64]) -> f64 {
        self.correction.eval(&self.charges, x)
    }

    pub fn grad_correction(&self, x: &[f64]) -> Vec<f64> {
        self.correction.grad(&self.charges, x)
    }

    /// PU(x) = U(x) - h(x); vanishes on the boundary within the fit residual.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.params.eval(x) - self.correction(x)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let gu = self.params.grad(x);
        let gh = self.grad_correction(x);
        gu.iter().zip(&gh).map(|(a, b)| a - b).collect()
    }

    /// Relative sup boundary residual of the projection.
    pub fn correction_residual(&self) -> f64 {
        self.correction_residual
    }

    pub fn export_json(&self) -> Value {
        serde_json::json!({
            "params": self.params,
            "correction": self.correction,
            "correction_residual": self.correction_residual,
            "charges": self.charges,
        })
    }
}

/// Project a bubble onto the engine's domain: fit the harmonic correction
/// with boundary data U restricted to the boundary.
pub fn project_bubble(engine: &GreenEngine, params: &BubbleParams) -> Result<ProjectedBubble> {
    let domain = engine.domain_spec();
    if params.n != domain.dim() {
        return Err(Error::InvalidInput("bubble dimension != domain dimension".into()));
    }
    let margin = domain.boundary_distance(&params.z);
    if margin < 10.0 * params.delta {
        log::warn!(
            "bubble at distance {margin:.3e} from the boundary with delta {:.3e}; \
             projection accuracy degrades below 10 delta",
            params.delta
        );
    }
    let data: Vec<f64> = engine
        .colloc_points()
        .iter()
        .map(|x| params.eval(x))
        .collect();
    let fit = engine.fit_boundary_data(&data, &params.z);
    let residual = engine.fit_residual(&fit, &|x| params.eval(x));
    if residual > engine.tol().max(1e-6) * 10.0 {
        // bubbles close to the boundary fit worse than the engine tolerance;
        // that is expected and reported, only a genuinely unusable fit fails
        if residual > 1e-2 {
            return Err(Error::CollocationDivergence {
                residual,
                tol: engine.tol(),
                attempts: 0,
            });
        }
        log::warn!(
            "projection boundary residual {residual:.3e} above engine tolerance \
             (bubble at distance {margin:.3e}, delta {:.3e})",
            params.delta
        );
    }
    Ok(ProjectedBubble {
        params: params.clone(),
        correction: fit,
        correction_residual: residual,
        charges: engine.charges().to_vec(),
    })
}

// ---------------------------------------------------------------------------
// nonlinearities
// ---------------------------------------------------------------------------

/// Which perturbed problem the nonlinearity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    /// -Delta u = |u|^{p-1} u + eps u.
    Bn,
    /// -Delta u = |u|^{p-1-eps} u.
    Ac,
    /// -Delta u = |u|^{p-1} u on the perforated domain.
    C,
}

/// f_eps and its primitive F_eps for one of the three problems.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Nonlinearity {
    pub problem: Problem,
    pub epsilon: f64,
    /// p = (n+2)/(n-2).
    pub p: f64,
    /// s_eps = 2n/(n-2) - eps n/2, the integrability exponent bookkeeping
    /// for the almost-critical problem.
    pub s_eps: f64,
}

impl Nonlinearity {
    pub fn new(problem: Problem, n: usize, epsilon: f64) -> Self {
        let nf = n as f64;
        Nonlinearity {
            problem,
            epsilon,
            p: critical_exponent(n),
            s_eps: 2.0 * nf / (nf - 2.0) - epsilon * nf / 2.0,
        }
    }

    /// f_eps(u).
    pub fn eval(&self, u: f64) -> f64 {
        match self.problem {
            Problem::Bn => u.abs().powf(self.p - 1.0) * u + self.epsilon * u,
            Problem::Ac => {
                if u == 0.0 {
                    0.0
                } else {
                    u.abs().powf(self.p - 1.0 - self.epsilon) * u
                }
            }
            Problem::C => u.abs().powf(self.p - 1.0) * u,
        }
    }

    /// F_eps(u) with dF/du = f.
    pub fn primitive(&self, u: f64) -> f64 {
        match self.problem {
            Problem::Bn => {
                u.abs().powf(self.p + 1.0) / (self.p + 1.0) + 0.5 * self.epsilon * u * u
            }
            Problem::Ac => {
                let q = self.p + 1.0 - self.epsilon;
                u.abs().powf(q) / q
            }
            Problem::C => u.abs().powf(self.p + 1.0) / (self.p + 1.0),
        }
    }
}
