//! Configuration regimes and their reduced energies.
//!
//! Four families of blow-up configurations are supported:
//!
//! - `Mbn`: kappa separated bubbles for the linearly perturbed critical
//!   problem (delta_i = |eps|^{1/(n-4)} d_i, n >= 5),
//! - `Mac`: kappa separated bubbles for the almost-critical problem
//!   (delta_i = |eps|^{1/(n-2)} d_i),
//! - `Tac`: a tower of alternating-sign bubbles collapsing onto one point
//!   for the almost-critical problem with eps > 0,
//! - `Tc`: a tower of alternating-sign bubbles collapsing onto the center
//!   of the shrinking hole for the problem on a perforated domain.
//!
//! For each family the leading finite-dimensional energy Phi (or Psi for
//! towers) is evaluated together with its analytic gradient in the
//! coordinates (z, l) with l = ln d, which keeps the rates positive without
//! constraints. Critical points of these functions are what generate
//! blowing-up solutions.
//!
//! Note on the pair interaction: the multi-bubble families use the symmetric
//! pair sum `sum_{i<j} 2 lambda_i lambda_j (d_i d_j)^{(n-2)/2} G(z_i, z_j)`,
//! the standard structure for bubble interactions, with a positive sign in
//! front. The opposite overall convention is one sign away and can be
//! selected with [`Regime::interaction_sign`]; qualitative predictions for
//! same-sign multi-bubble configurations depend on this choice.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bubble::Problem;
use crate::error::{Error, Result};
use crate::geometry::{dist, dot};
use crate::green::GreenSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    /// Multi-bubble, linearly perturbed critical problem.
    Mbn,
    /// Multi-bubble, almost-critical problem.
    Mac,
    /// Tower of bubbles, almost-critical problem (eps > 0).
    Tac,
    /// Tower of bubbles on a perforated domain (eps > 0).
    Tc,
}

/// A configuration family: problem, sign of the perturbation, dimension,
/// bubble count and signs, plus the hole center for the perforated problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub kind: RegimeKind,
    /// Sign of eps; fixed to +1 for the tower regimes.
    pub eps_sign: i32,
    pub n: usize,
    pub kappa: usize,
    /// Bubble signs; free for the multi-bubble families, the alternating
    /// sequence lambda_i = (-1)^i for towers.
    pub lambdas: Vec<i32>,
    /// Sign in front of the pair-interaction sum (+1.0 by default).
    #[serde(default = "default_interaction_sign")]
    pub interaction_sign: f64,
    /// Center of the shrinking hole (`Tc` only).
    #[serde(default)]
    pub hole_center: Option<Vec<f64>>,
}

fn default_interaction_sign() -> f64 {
    1.0
}

impl Regime {
    pub fn mbn(n: usize, kappa: usize, eps_sign: i32, lambdas: Vec<i32>) -> Result<Self> {
        let r = Regime {
            kind: RegimeKind::Mbn,
            eps_sign,
            n,
            kappa,
            lambdas,
            interaction_sign: 1.0,
            hole_center: None,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn mac(n: usize, kappa: usize, eps_sign: i32, lambdas: Vec<i32>) -> Result<Self> {
        let r = Regime {
            kind: RegimeKind::Mac,
            eps_sign,
            n,
            kappa,
            lambdas,
            interaction_sign: 1.0,
            hole_center: None,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn tac(n: usize, kappa: usize) -> Result<Self> {
        let r = Regime {
            kind: RegimeKind::Tac,
            eps_sign: 1,
            n,
            kappa,
            lambdas: alternating_signs(kappa),
            interaction_sign: 1.0,
            hole_center: None,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn tc(n: usize, kappa: usize, hole_center: Vec<f64>) -> Result<Self> {
        let r = Regime {
            kind: RegimeKind::Tc,
            eps_sign: 1,
            n,
            kappa,
            lambdas: alternating_signs(kappa),
            interaction_sign: 1.0,
            hole_center: Some(hole_center),
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kappa < 1 {
            return Err(Error::InvalidInput("kappa must be >= 1".into()));
        }
        if self.n < 3 {
            return Err(Error::InvalidInput("n must be >= 3".into()));
        }
        if self.lambdas.len() != self.kappa {
            return Err(Error::InvalidInput(format!(
                "{} lambdas for kappa = {}",
                self.lambdas.len(),
                self.kappa
            )));
        }
        if self.lambdas.iter().any(|l| l.abs() != 1) {
            return Err(Error::InvalidInput("lambdas must be +1 or -1".into()));
        }
        if self.interaction_sign.abs() != 1.0 {
            return Err(Error::InvalidInput("interaction_sign must be +1 or -1".into()));
        }
        match self.kind {
            RegimeKind::Mbn => {
                // the rate exponent 1/(n-4) degenerates at n = 4
                if self.n < 5 {
                    return Err(Error::InvalidInput(
                        "the multi-bubble linearly perturbed regime requires n >= 5".into(),
                    ));
                }
                if self.eps_sign.abs() != 1 {
                    return Err(Error::InvalidInput("eps_sign must be +1 or -1".into()));
                }
            }
            RegimeKind::Mac => {
                if self.eps_sign.abs() != 1 {
                    return Err(Error::InvalidInput("eps_sign must be +1 or -1".into()));
                }
            }
            RegimeKind::Tac | RegimeKind::Tc => {
                if self.eps_sign != 1 {
                    return Err(Error::InvalidInput("tower regimes require eps > 0".into()));
                }
                if self.lambdas != alternating_signs(self.kappa) {
                    return Err(Error::InvalidInput(
                        "tower regimes require the alternating signs lambda_i = (-1)^i".into(),
                    ));
                }
                if self.kind == RegimeKind::Tc && self.hole_center.is_none() {
                    return Err(Error::InvalidInput(
                        "the perforated tower regime requires a hole center".into(),
                    ));
                }
            }
        }
        if self.kind != RegimeKind::Tc && self.hole_center.is_some() {
            return Err(Error::InvalidInput(
                "hole_center is only meaningful for the perforated tower regime".into(),
            ));
        }
        Ok(())
    }

    /// Exponent gamma of the leading term of the reduced-energy expansion.
    pub fn gamma(&self) -> f64 {
        let nf = self.n as f64;
        match self.kind {
            RegimeKind::Mbn => (nf - 2.0) / (nf - 4.0),
            RegimeKind::Mac | RegimeKind::Tac => 1.0,
            RegimeKind::Tc => (nf - 2.0) / (2.0 * self.kappa as f64),
        }
    }

    /// The nonlinearity family this regime belongs to.
    pub fn problem(&self) -> Problem {
        match self.kind {
            RegimeKind::Mbn => Problem::Bn,
            RegimeKind::Mac | RegimeKind::Tac => Problem::Ac,
            RegimeKind::Tc => Problem::C,
        }
    }

    pub fn is_tower(&self) -> bool {
        matches!(self.kind, RegimeKind::Tac | RegimeKind::Tc)
    }

    fn check_epsilon(&self, epsilon: f64) -> Result<()> {
        if epsilon == 0.0 || !epsilon.is_finite() {
            return Err(Error::IncompatibleSign {
                eps: epsilon,
                expected: self.eps_sign,
            });
        }
        if (epsilon > 0.0) != (self.eps_sign > 0) {
            return Err(Error::IncompatibleSign {
                eps: epsilon,
                expected: self.eps_sign,
            });
        }
        Ok(())
    }

    /// delta_i for 1 <= i <= kappa at the given perturbation size.
    pub fn delta_scaling(&self, epsilon: f64, config: &Configuration, i: usize) -> Result<f64> {
        self.check_epsilon(epsilon)?;
        if i < 1 || i > self.kappa {
            return Err(Error::InvalidInput(format!("bubble index {i} out of 1..={}", self.kappa)));
        }
        config.check_shape(self)?;
        let nf = self.n as f64;
        let d = config.rates()[i - 1];
        let scale = match self.kind {
            RegimeKind::Mbn => epsilon.abs().powf(1.0 / (nf - 4.0)),
            RegimeKind::Mac => epsilon.abs().powf(1.0 / (nf - 2.0)),
            RegimeKind::Tac => epsilon.powf((2.0 * (i as f64 - 1.0) + 1.0) / (nf - 2.0)),
            RegimeKind::Tc => epsilon.powf((2.0 * i as f64 - 1.0) / (2.0 * self.kappa as f64)),
        };
        Ok(scale * d)
    }

    /// Concentration points of a tower configuration: z_i = z + delta_i
    /// sigma_i around the base point (or the hole center for `Tc`).
    pub fn tower_centers(&self, epsilon: f64, config: &Configuration) -> Result<Vec<Vec<f64>>> {
        config.check_shape(self)?;
        match (&self.kind, config) {
            (RegimeKind::Tac, Configuration::TowerAc { offsets, base, .. }) => (1..=self.kappa)
                .map(|i| {
                    let delta = self.delta_scaling(epsilon, config, i)?;
                    let zero = vec![0.0; self.n];
                    let sigma = if i < self.kappa { &offsets[i - 1] } else { &zero };
                    Ok(base.iter().zip(sigma).map(|(b, s)| b + delta * s).collect())
                })
                .collect(),
            (RegimeKind::Tc, Configuration::TowerC { offsets, .. }) => {
                let z0 = self.hole_center.as_ref().expect("validated");
                (1..=self.kappa)
                    .map(|i| {
                        let delta = self.delta_scaling(epsilon, config, i)?;
                        Ok(z0
                            .iter()
                            .zip(&offsets[i - 1])
                            .map(|(b, s)| b + delta * s)
                            .collect())
                    })
                    .collect()
            }
            _ => Err(Error::InvalidInput(
                "tower_centers only applies to tower regimes".into(),
            )),
        }
    }

    /// Concentration points for any regime at the given epsilon.
    pub fn centers(&self, epsilon: f64, config: &Configuration) -> Result<Vec<Vec<f64>>> {
        match config {
            Configuration::Multi { points, .. } => {
                config.check_shape(self)?;
                Ok(points.clone())
            }
            _ => self.tower_centers(epsilon, config),
        }
    }
}

fn alternating_signs(kappa: usize) -> Vec<i32> {
    (1..=kappa).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect()
}

// ---------------------------------------------------------------------------
// configurations
// ---------------------------------------------------------------------------

/// A point of the configuration space Lambda of a regime. Rates are stored
/// as l = ln d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Configuration {
    /// Separated bubbles: points z_1..z_kappa and log-rates.
    Multi {
        points: Vec<Vec<f64>>,
        log_rates: Vec<f64>,
    },
    /// Tower for the almost-critical problem: offsets sigma_1..sigma_{kappa-1}
    /// (sigma_kappa = 0 implicitly), the base point z, and log-rates.
    TowerAc {
        offsets: Vec<Vec<f64>>,
        base: Vec<f64>,
        log_rates: Vec<f64>,
    },
    /// Tower on the perforated domain: offsets sigma_1..sigma_kappa and
    /// log-rates (the base point is the hole center, owned by the regime).
    TowerC {
        offsets: Vec<Vec<f64>>,
        log_rates: Vec<f64>,
    },
}

impl Configuration {
    pub fn log_rates(&self) -> &[f64] {
        match self {
            Configuration::Multi { log_rates, .. }
            | Configuration::TowerAc { log_rates, .. }
            | Configuration::TowerC { log_rates, .. } => log_rates,
        }
    }

    /// d_i = exp(l_i); positive by construction.
    pub fn rates(&self) -> Vec<f64> {
        self.log_rates().iter().map(|l| l.exp()).collect()
    }

    pub fn kappa(&self) -> usize {
        self.log_rates().len()
    }

    /// Verify that the shapes (counts and dimensions) match the regime.
    pub fn check_shape(&self, regime: &Regime) -> Result<()> {
        let ok = match (self, regime.kind) {
            (Configuration::Multi { points, log_rates }, RegimeKind::Mbn | RegimeKind::Mac) => {
                points.len() == regime.kappa
                    && log_rates.len() == regime.kappa
                    && points.iter().all(|p| p.len() == regime.n)
            }
            (
                Configuration::TowerAc {
                    offsets,
                    base,
                    log_rates,
                },
                RegimeKind::Tac,
            ) => {
                offsets.len() + 1 == regime.kappa + usize::from(regime.kappa == 0)
                    && offsets.len() == regime.kappa - 1
                    && base.len() == regime.n
                    && log_rates.len() == regime.kappa
                    && offsets.iter().all(|s| s.len() == regime.n)
            }
            (Configuration::TowerC { offsets, log_rates }, RegimeKind::Tc) => {
                offsets.len() == regime.kappa
                    && log_rates.len() == regime.kappa
                    && offsets.iter().all(|s| s.len() == regime.n)
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ConfigOutsideLambda(
                "configuration shape does not match the regime".into(),
            ))
        }
    }

    /// Flatten to optimisation coordinates. Layout: ambient points first
    /// (z's for multi-bubbles; sigma_1..sigma_{kappa-1}, z for the
    /// almost-critical tower; sigma_1..sigma_kappa for the perforated
    /// tower), then the log-rates l_1..l_kappa.
    pub fn to_coords(&self) -> Vec<f64> {
        let mut x = Vec::new();
        match self {
            Configuration::Multi { points, log_rates } => {
                for p in points {
                    x.extend_from_slice(p);
                }
                x.extend_from_slice(log_rates);
            }
            Configuration::TowerAc {
                offsets,
                base,
                log_rates,
            } => {
                for s in offsets {
                    x.extend_from_slice(s);
                }
                x.extend_from_slice(base);
                x.extend_from_slice(log_rates);
            }
            Configuration::TowerC { offsets, log_rates } => {
                for s in offsets {
                    x.extend_from_slice(s);
                }
                x.extend_from_slice(log_rates);
            }
        }
        x
    }

    pub fn from_coords(regime: &Regime, x: &[f64]) -> Result<Self> {
        let (n, kappa) = (regime.n, regime.kappa);
        if x.len() != kappa * (n + 1) {
            return Err(Error::InvalidInput(format!(
                "expected {} coordinates, got {}",
                kappa * (n + 1),
                x.len()
            )));
        }
        let cfg = match regime.kind {
            RegimeKind::Mbn | RegimeKind::Mac => Configuration::Multi {
                points: (0..kappa).map(|i| x[i * n..(i + 1) * n].to_vec()).collect(),
                log_rates: x[kappa * n..].to_vec(),
            },
            RegimeKind::Tac => Configuration::TowerAc {
                offsets: (0..kappa - 1)
                    .map(|i| x[i * n..(i + 1) * n].to_vec())
                    .collect(),
                base: x[(kappa - 1) * n..kappa * n].to_vec(),
                log_rates: x[kappa * n..].to_vec(),
            },
            RegimeKind::Tc => Configuration::TowerC {
                offsets: (0..kappa).map(|i| x[i * n..(i + 1) * n].to_vec()).collect(),
                log_rates: x[kappa * n..].to_vec(),
            },
        };
        Ok(cfg)
    }

    /// Number of optimisation coordinates.
    pub fn dof(regime: &Regime) -> usize {
        regime.kappa * (regime.n + 1)
    }
}

// ---------------------------------------------------------------------------
// reduced energies
// ---------------------------------------------------------------------------

/// Hard admissibility checks shared by value and gradient: interior points
/// (when the source has a domain) and pairwise-distinct points for the
/// multi-bubble families.
fn check_admissible(
    source: &dyn GreenSource,
    regime: &Regime,
    config: &Configuration,
) -> Result<()> {
    config.check_shape(regime)?;
    let scale = source
        .domain()
        .map(|d| d.diameter())
        .unwrap_or(1.0);
    match config {
        Configuration::Multi { points, .. } => {
            for (i, p) in points.iter().enumerate() {
                if let Some(domain) = source.domain() {
                    if domain.boundary_distance(p) <= 0.0 {
                        return Err(Error::ConfigOutsideLambda(format!(
                            "point {i} at {p:?} is not interior"
                        )));
                    }
                }
                for q in points.iter().skip(i + 1) {
                    if dist(p, q) < 1e-12 * scale {
                        return Err(Error::ConfigOutsideLambda(format!(
                            "coincident concentration points near {p:?}"
                        )));
                    }
                }
            }
        }
        Configuration::TowerAc { base, .. } => {
            if let Some(domain) = source.domain() {
                if domain.boundary_distance(base) <= 0.0 {
                    return Err(Error::ConfigOutsideLambda(format!(
                        "tower base {base:?} is not interior"
                    )));
                }
            }
        }
        Configuration::TowerC { .. } => {
            if let (Some(domain), Some(z0)) = (source.domain(), regime.hole_center.as_ref()) {
                if domain.boundary_distance(z0) <= 0.0 {
                    return Err(Error::ConfigOutsideLambda(format!(
                        "hole center {z0:?} is not interior to the reference domain"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// The reduced energy Phi (Psi for towers) of a configuration.
///
/// All four families are epsilon-independent: epsilon enters the expansion
/// only through the prefactor |eps|^gamma.
pub fn reduced_value(
    source: &dyn GreenSource,
    regime: &Regime,
    config: &Configuration,
) -> Result<f64> {
    check_admissible(source, regime, config)?;
    let nf = regime.n as f64;
    let a = (nf - 2.0) / 2.0;
    match config {
        Configuration::Multi { points, log_rates } => {
            let d: Vec<f64> = log_rates.iter().map(|l| l.exp()).collect();
            let mut val = 0.0;
            for (i, zi) in points.iter().enumerate() {
                val += d[i].powf(nf - 2.0) * source.regular_part(zi, zi)?;
            }
            for i in 0..points.len() {
                for j in i + 1..points.len() {
                    let g = source.green(&points[i], &points[j])?;
                    val += regime.interaction_sign
                        * 2.0
                        * (regime.lambdas[i] * regime.lambdas[j]) as f64
                        * (d[i] * d[j]).powf(a)
                        * g;
                }
            }
            let sign = -(regime.eps_sign as f64);
            match regime.kind {
                RegimeKind::Mbn => {
                    val += sign * d.iter().map(|di| di * di).sum::<f64>();
                }
                RegimeKind::Mac => {
                    val += sign * log_rates.iter().sum::<f64>();
                }
                _ => unreachable!(),
            }
            Ok(val)
        }
        Configuration::TowerAc {
            offsets,
            base,
            log_rates,
        } => {
            let d: Vec<f64> = log_rates.iter().map(|l| l.exp()).collect();
            let h = source.regular_part(base, base)?;
            let mut val = h * d[0].powf(nf - 2.0);
            for i in 0..regime.kappa - 1 {
                let s2 = dot(&offsets[i], &offsets[i]);
                val -= (1.0 + s2).powf(-a) * (d[i + 1] / d[i]).powf(a);
            }
            val -= log_rates.iter().sum::<f64>();
            Ok(val)
        }
        Configuration::TowerC { offsets, log_rates } => {
            let d: Vec<f64> = log_rates.iter().map(|l| l.exp()).collect();
            let z0 = regime.hole_center.as_ref().expect("validated");
            let h = source.regular_part(z0, z0)?;
            let k = regime.kappa;
            let mut val = h * d[0].powf(nf - 2.0);
            let sk2 = dot(&offsets[k - 1], &offsets[k - 1]);
            val += (1.0 + sk2).powf(-(nf - 2.0)) * d[k - 1].powf(-(nf - 2.0));
            for j in 0..k - 1 {
                let s2 = dot(&offsets[j], &offsets[j]);
                val += (1.0 + s2).powf(-a) * (d[j + 1] / d[j]).powf(a);
            }
            Ok(val)
        }
    }
}

/// Analytic gradient of the reduced energy in the flattened coordinates of
/// [`Configuration::to_coords`] (chain rule applied through d = e^l).
pub fn reduced_gradient(
    source: &dyn GreenSource,
    regime: &Regime,
    config: &Configuration,
) -> Result<Vec<f64>> {
    check_admissible(source, regime, config)?;
    let nf = regime.n as f64;
    let n = regime.n;
    let a = (nf - 2.0) / 2.0;
    let kappa = regime.kappa;
    let mut grad = vec![0.0; Configuration::dof(regime)];
    match config {
        Configuration::Multi { points, log_rates } => {
            let d: Vec<f64> = log_rates.iter().map(|l| l.exp()).collect();
            for i in 0..kappa {
                let zi = &points[i];
                let tau_grad = source.grad_robin(zi)?;
                let h_ii = source.regular_part(zi, zi)?;
                // z_i block
                for k in 0..n {
                    grad[i * n + k] += d[i].powf(nf - 2.0) * tau_grad[k];
                }
                // l_i from the self-energy term
                grad[kappa * n + i] += (nf - 2.0) * d[i].powf(nf - 2.0) * h_ii;
                for j in 0..kappa {
                    if j == i {
                        continue;
                    }
                    let lam = (regime.lambdas[i] * regime.lambdas[j]) as f64;
                    let pair = regime.interaction_sign * lam * (d[i] * d[j]).powf(a);
                    let g = source.green(&points[i], &points[j])?;
                    let gg = source.grad_green_x(&points[i], &points[j])?;
                    for k in 0..n {
                        grad[i * n + k] += 2.0 * pair * gg[k];
                    }
                    grad[kappa * n + i] += (nf - 2.0) * pair * g;
                }
            }
            let sign = -(regime.eps_sign as f64);
            for i in 0..kappa {
                match regime.kind {
                    RegimeKind::Mbn => grad[kappa * n + i] += sign * 2.0 * d[i] * d[i],
                    RegimeKind::Mac => grad[kappa * n + i] += sign,
                    _ => unreachable!(),
                }
            }
        }
        Configuration::TowerAc {
            offsets,
            base,
            log_rates,
        } => {
            let d: Vec<f64> = log_rates.iter().map(|l| l.exp()).collect();
            let h = source.regular_part(base, base)?;
            let tau_grad = source.grad_robin(base)?;
            // base point block sits after the kappa-1 offsets
            let zoff = (kappa - 1) * n;
            for k in 0..n {
                grad[zoff + k] += d[0].powf(nf - 2.0) * tau_grad[k];
            }
            grad[kappa * n] += (nf - 2.0) * d[0].powf(nf - 2.0) * h;
            for i in 0..kappa - 1 {
                let s2 = dot(&offsets[i], &offsets[i]);
                let t = (1.0 + s2).powf(-a) * (d[i + 1] / d[i]).powf(a);
                // the term enters with a minus sign
                for k in 0..n {
                    grad[i * n + k] += (nf - 2.0) * (1.0 + s2).powf(-nf / 2.0)
                        * offsets[i][k]
                        * (d[i + 1] / d[i]).powf(a);
                }
                grad[kappa * n + i] += a * t;
                grad[kappa * n + i + 1] -= a * t;
            }
            for i in 0..kappa {
                grad[kappa * n + i] -= 1.0;
            }
        }
        Configuration::TowerC { offsets, log_rates } => {
            let d: Vec<f64> = log_rates.iter().map(|l| l.exp()).collect();
            let z0 = regime.hole_center.as_ref().expect("validated");
            let h = source.regular_part(z0, z0)?;
            let k = kappa;
            grad[kappa * n] += (nf - 2.0) * d[0].powf(nf - 2.0) * h;
            let sk2 = dot(&offsets[k - 1], &offsets[k - 1]);
            let b = (1.0 + sk2).powf(-(nf - 2.0)) * d[k - 1].powf(-(nf - 2.0));
            for kk in 0..n {
                grad[(k - 1) * n + kk] +=
                    -2.0 * (nf - 2.0) * offsets[k - 1][kk] * (1.0 + sk2).powf(-(nf - 1.0))
                        * d[k - 1].powf(-(nf - 2.0));
            }
            grad[kappa * n + k - 1] -= (nf - 2.0) * b;
            for j in 0..k - 1 {
                let s2 = dot(&offsets[j], &offsets[j]);
                let t = (1.0 + s2).powf(-a) * (d[j + 1] / d[j]).powf(a);
                for kk in 0..n {
                    grad[j * n + kk] -=
                        (nf - 2.0) * (1.0 + s2).powf(-nf / 2.0) * offsets[j][kk]
                            * (d[j + 1] / d[j]).powf(a);
                }
                grad[kappa * n + j + 1] += a * t;
                grad[kappa * n + j] -= a * t;
            }
        }
    }
    Ok(grad)
}

/// Symmetrised central-difference Hessian of the reduced energy, built from
/// the analytic gradient. `step <= 0` selects the default 1e-4 per
/// coordinate scale.
pub fn reduced_hessian(
    source: &dyn GreenSource,
    regime: &Regime,
    config: &Configuration,
    step: f64,
) -> Result<DMatrix<f64>> {
    let x0 = config.to_coords();
    crate::numdiff::symmetric_hessian(
        |x| {
            let cfg = Configuration::from_coords(regime, x).ok()?;
            reduced_gradient(source, regime, &cfg).ok()
        },
        &x0,
        |j| {
            if step > 0.0 {
                step
            } else {
                1e-4 * x0[j].abs().max(1.0)
            }
        },
    )
    .ok_or_else(|| Error::ConfigOutsideLambda("Hessian probe left the admissible set".into()))
}
