//! Green's function of the Dirichlet Laplacian on bounded domains.
//!
//! Conventions: G(x,y) = c_n |x-y|^{2-n} - H(x,y) with
//! c_n = 1/((n-2) omega_{n-1}), so that -Delta_x G(.,y) = delta_y. H(.,y) is
//! the harmonic correction with boundary data c_n |x-y|^{2-n}, tau(x) =
//! H(x,x) is the Robin function.
//!
//! Two evaluation methods are provided. Balls use the exact Kelvin image
//! closed form. Everything else uses boundary collocation with exterior
//! fundamental-solution charges (method of fundamental solutions), with the
//! basis augmented by a constant term and by the Kelvin image of the source
//! with respect to each spherical boundary component; the image captures the
//! near-boundary singular behaviour, the ring charges correct the rest.

use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::{
    add_scaled, dist, dot, fundamental_constant, sub, unit_sphere_points, BoundarySample,
    DomainSpec, SphereComponent,
};

/// Anything that can supply H, G and their gradients on a domain.
///
/// The collocation and analytic engines implement this; synthetic sources
/// (e.g. constant H) are useful for closed-form checks of the reduced
/// functions.
pub trait GreenSource: Sync {
    fn dim(&self) -> usize;

    /// The underlying domain, when there is one. Synthetic sources return
    /// `None`, which disables interiority constraints downstream.
    fn domain(&self) -> Option<&DomainSpec>;

    fn regular_part(&self, x: &[f64], y: &[f64]) -> Result<f64>;

    fn green(&self, x: &[f64], y: &[f64]) -> Result<f64>;

    /// (grad_x H, grad_y H) at (x, y).
    fn grad_regular_part(&self, x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)>;

    fn robin(&self, x: &[f64]) -> Result<f64> {
        self.regular_part(x, x)
    }

    fn grad_robin(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (gx, gy) = self.grad_regular_part(x, x)?;
        Ok(gx.iter().zip(&gy).map(|(a, b)| a + b).collect())
    }

    /// grad_x G(x, y).
    fn grad_green_x(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim() as f64;
        let cn = fundamental_constant(self.dim());
        let r = dist(x, y);
        let (gx, _) = self.grad_regular_part(x, y)?;
        Ok(x.iter()
            .zip(y)
            .zip(&gx)
            .map(|((xi, yi), hi)| cn * (2.0 - n) * (xi - yi) * r.powf(-n) - hi)
            .collect())
    }
}

/// Synthetic source with constant regular part, for closed-form checks.
#[derive(Debug, Clone)]
pub struct ConstantGreen {
    pub n: usize,
    pub h0: f64,
}

impl GreenSource for ConstantGreen {
    fn dim(&self) -> usize {
        self.n
    }
    fn domain(&self) -> Option<&DomainSpec> {
        None
    }
    fn regular_part(&self, _x: &[f64], _y: &[f64]) -> Result<f64> {
        Ok(self.h0)
    }
    fn green(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let cn = fundamental_constant(self.n);
        Ok(cn * dist(x, y).powi(2 - self.n as i32) - self.h0)
    }
    fn grad_regular_part(&self, _x: &[f64], _y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((vec![0.0; self.n], vec![0.0; self.n]))
    }
}

// ---------------------------------------------------------------------------
// harmonic fits over the charge basis
// ---------------------------------------------------------------------------

/// A harmonic function represented as a combination of exterior point
/// charges, a constant, and optional per-component image charges.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HarmonicFit {
    n: usize,
    c_n: f64,
    charge_weights: Vec<f64>,
    constant: f64,
    /// (image point, weight) pairs appended for one source.
    images: Vec<(Vec<f64>, f64)>,
}

impl HarmonicFit {
    pub fn eval(&self, charges: &[Vec<f64>], x: &[f64]) -> f64 {
        let e = 2.0 - self.n as f64;
        let mut acc = self.constant;
        for (q, w) in charges.iter().zip(&self.charge_weights) {
            acc += w * self.c_n * dist(x, q).powf(e);
        }
        for (q, w) in &self.images {
            acc += w * self.c_n * dist(x, q).powf(e);
        }
        acc
    }

    pub fn grad(&self, charges: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        let nf = self.n as f64;
        let mut g = vec![0.0; self.n];
        let mut add = |q: &[f64], w: f64| {
            let r = dist(x, q);
            let factor = w * self.c_n * (2.0 - nf) * r.powf(-nf);
            for (gi, (xi, qi)) in g.iter_mut().zip(x.iter().zip(q)) {
                *gi += factor * (xi - qi);
            }
        };
        for (q, w) in charges.iter().zip(&self.charge_weights) {
            add(q, *w);
        }
        for (q, w) in &self.images {
            add(q, *w);
        }
        g
    }
}

/// Truncated-SVD least-squares solver for the fixed charge matrix, with
/// support for a few appended per-source columns.
#[derive(Debug)]
struct LsSolver {
    u: DMatrix<f64>,
    vt: DMatrix<f64>,
    sinv: DVector<f64>,
}

impl LsSolver {
    fn new(a: DMatrix<f64>) -> Self {
        let svd = a.svd(true, true);
        let u = svd.u.unwrap();
        let vt = svd.v_t.unwrap();
        let smax = svd.singular_values.max();
        let cutoff = smax * 1e-13;
        let sinv = svd
            .singular_values
            .map(|s| if s > cutoff { 1.0 / s } else { 0.0 });
        LsSolver { u, vt, sinv }
    }

    /// Minimum-norm least squares for the base matrix alone.
    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut utb = self.u.transpose() * b;
        utb.component_mul_assign(&self.sinv);
        self.vt.transpose() * utb
    }

    /// Least squares for [A C] [w1; w2] ~ b with C a thin matrix of extra
    /// columns: w2 from the component of b outside the numerical range of A,
    /// then w1 by back-substitution.
    fn solve_with_extras(&self, b: &DVector<f64>, c: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>) {
        if c.ncols() == 0 {
            return (self.solve(b), DVector::zeros(0));
        }
        // project the extra columns off the range of A
        let utc = self.u.transpose() * c;
        let c_perp = c - &self.u * &utc;
        let b_perp = b - &self.u * (self.u.transpose() * b);
        // tiny LS for w2; the cutoff is relative to the raw column scale, so
        // an extra column that the main basis already represents (c_perp
        // negligible) gets weight zero instead of dividing noise by noise
        let col_scale = c.norm().max(1e-300);
        let svd = c_perp.svd(true, true);
        let w2 = svd
            .solve(&b_perp, col_scale * 1e-8)
            .unwrap_or_else(|_| DVector::zeros(c.ncols()));
        let residual_rhs = b - c * &w2;
        let w1 = self.solve(&residual_rhs);
        (w1, w2)
    }
}

// ---------------------------------------------------------------------------
// the engine
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineMethod {
    AnalyticBall,
    Collocation,
}

/// Evaluator for G, H, tau and their gradients on a bounded domain.
#[derive(Debug)]
pub struct GreenEngine {
    domain: DomainSpec,
    n: usize,
    c_n: f64,
    method: EngineMethod,
    tol: f64,
    charges: Vec<Vec<f64>>,
    colloc_points: Vec<Vec<f64>>,
    validation_points: Vec<Vec<f64>>,
    image_components: Vec<SphereComponent>,
    solver: LsSolver,
    collocation_residual: f64,
    fit_cache: Mutex<HashMap<Vec<u64>, HarmonicFit>>,
}

impl GreenEngine {
    /// Build an engine, selecting the analytic method for balls and boundary
    /// collocation otherwise.
    pub fn build(domain: &DomainSpec, n_boundary: usize, tol: f64) -> Result<Self> {
        let method = match domain {
            DomainSpec::Ball { .. } => EngineMethod::AnalyticBall,
            _ => EngineMethod::Collocation,
        };
        Self::build_with_method(domain, n_boundary, tol, method)
    }

    pub fn build_with_method(
        domain: &DomainSpec,
        n_boundary: usize,
        tol: f64,
        method: EngineMethod,
    ) -> Result<Self> {
        domain.validate()?;
        let n = domain.dim();
        if !(3..=6).contains(&n) {
            return Err(Error::Geometry(format!(
                "engines support n in 3..=6 (got {n}); higher dimensions are rejected"
            )));
        }
        if n_boundary < 10 * n {
            return Err(Error::Geometry(format!(
                "n_boundary = {n_boundary} below the minimum 10 n = {}",
                10 * n
            )));
        }
        if matches!(method, EngineMethod::AnalyticBall)
            && !matches!(domain, DomainSpec::Ball { .. })
        {
            return Err(Error::Geometry(
                "analytic method is only available on balls".into(),
            ));
        }

        // charge-count ladder: double boundary resolution until the fit
        // validates, at most 3 times
        let mut attempt = 0usize;
        let mut count = n_boundary;
        loop {
            let engine = Self::assemble(domain, n, method, tol, count)?;
            if engine.collocation_residual <= tol {
                return Ok(engine);
            }
            if attempt >= 3 {
                return Err(Error::CollocationDivergence {
                    residual: engine.collocation_residual,
                    tol,
                    attempts: attempt,
                });
            }
            attempt += 1;
            count *= 2;
            log::info!(
                "collocation residual {:.3e} > tol {:.3e}; retrying with {} boundary points",
                engine.collocation_residual,
                tol,
                count
            );
        }
    }

    fn assemble(
        domain: &DomainSpec,
        n: usize,
        method: EngineMethod,
        tol: f64,
        n_boundary: usize,
    ) -> Result<Self> {
        let c_n = fundamental_constant(n);
        let boundary = domain.sample_boundary(n_boundary, 1);
        let validation = domain.sample_boundary((n_boundary / 2).max(20 * n), 2);
        let charges = charge_points(domain, n_boundary / 2);
        let colloc_points: Vec<Vec<f64>> = boundary.iter().map(|s| s.point.clone()).collect();
        let validation_points: Vec<Vec<f64>> = validation.iter().map(|s| s.point.clone()).collect();

        let e = 2.0 - n as f64;
        let rows = colloc_points.len();
        let cols = charges.len() + 1; // + constant column
        let mut a = DMatrix::<f64>::zeros(rows, cols);
        for (i, x) in colloc_points.iter().enumerate() {
            for (k, q) in charges.iter().enumerate() {
                a[(i, k)] = c_n * dist(x, q).powf(e);
            }
            a[(i, charges.len())] = 1.0;
        }
        let solver = LsSolver::new(a);

        let mut engine = GreenEngine {
            domain: domain.clone(),
            n,
            c_n,
            method,
            tol,
            charges,
            colloc_points,
            validation_points,
            image_components: domain.sphere_components(),
            solver,
            collocation_residual: 0.0,
            fit_cache: Mutex::new(HashMap::new()),
        };
        engine.collocation_residual = engine.validate_fit(&Self::validation_sources(domain, n));
        Ok(engine)
    }

    /// Representative interior sources used to measure the boundary residual.
    fn validation_sources(domain: &DomainSpec, n: usize) -> Vec<Vec<f64>> {
        let mut sources = vec![];
        let dirs = unit_sphere_points(n, 3, 97);
        let diam = domain.diameter();
        for comp in domain.sphere_components() {
            for dir in &dirs {
                // validation depth is tied to the domain scale: the engine
                // promises its tolerance for sources at least ~0.025 diam
                // away from the boundary
                let depth = (0.1 * comp.radius).max(0.025 * diam);
                let r = comp.radius - comp.orientation as f64 * depth;
                let y = add_scaled(&comp.center, r, dir);
                if domain.contains(&y, 1e-9 * diam) {
                    sources.push(y);
                }
            }
        }
        // a deep point
        let anchor = domain.star_center();
        if domain.contains(&anchor, 0.0) {
            sources.push(anchor.clone());
        } else {
            // star center may sit in a hole; probe nearby
            for dir in &dirs {
                let y = add_scaled(&anchor, 0.4 * diam, dir);
                if domain.contains(&y, 1e-6 * diam) {
                    sources.push(y);
                    break;
                }
            }
        }
        sources
    }

    /// Max over validation sources of the relative sup boundary error of the
    /// fitted regular part on held-out boundary points.
    fn validate_fit(&self, sources: &[Vec<f64>]) -> f64 {
        let e = 2.0 - self.n as f64;
        let mut worst = 0.0_f64;
        for y in sources {
            let fit = self.fit_source(y);
            let mut err = 0.0_f64;
            let mut scale = 0.0_f64;
            for xb in &self.validation_points {
                let data = self.c_n * dist(xb, y).powf(e);
                err = err.max((fit.eval(&self.charges, xb) - data).abs());
                scale = scale.max(data.abs());
            }
            if scale > 0.0 {
                worst = worst.max(err / scale);
            }
        }
        worst
    }

    /// Kelvin image columns of a source with respect to each spherical
    /// boundary component, plus the second generation (image of the image
    /// with respect to the other components). The first generation carries
    /// the near-boundary singular content, the second the leading
    /// inter-component coupling; the ring charges fit the smooth remainder.
    fn image_points(&self, y: &[f64]) -> Vec<Vec<f64>> {
        let kelvin = |comp: &SphereComponent, p: &[f64]| -> Option<Vec<f64>> {
            let d = sub(p, &comp.center);
            let rho2 = dot(&d, &d);
            if rho2 < (1e-9 * comp.radius).powi(2) {
                return None; // image at infinity; constant column covers it
            }
            Some(add_scaled(&comp.center, comp.radius * comp.radius / rho2, &d))
        };
        let mut images: Vec<Vec<f64>> = vec![];
        let first: Vec<(usize, Option<Vec<f64>>)> = self
            .image_components
            .iter()
            .enumerate()
            .map(|(k, comp)| (k, kelvin(comp, y)))
            .collect();
        for (_, img) in &first {
            if let Some(q) = img {
                images.push(q.clone());
            }
        }
        if self.image_components.len() > 1 {
            for (k, img) in &first {
                let Some(q) = img else { continue };
                for (j, comp) in self.image_components.iter().enumerate() {
                    if j == *k {
                        continue;
                    }
                    if let Some(q2) = kelvin(comp, q) {
                        // drop images that fall inside the domain closure
                        if let Some(domain) = self.domain() {
                            if domain.boundary_distance(&q2) > -1e-9 * domain.diameter() {
                                continue;
                            }
                        }
                        images.push(q2);
                    }
                }
            }
        }
        images
    }

    /// Fit the regular part for one source point (collocation path).
    fn fit_source(&self, y: &[f64]) -> HarmonicFit {
        let key: Vec<u64> = y.iter().map(|v| v.to_bits()).collect();
        if let Some(hit) = self.fit_cache.lock().unwrap().get(&key) {
            return hit.clone();
        }
        let e = 2.0 - self.n as f64;
        let data: Vec<f64> = self
            .colloc_points
            .iter()
            .map(|x| self.c_n * dist(x, y).powf(e))
            .collect();
        let fit = self.fit_boundary_data(&data, y);
        let mut cache = self.fit_cache.lock().unwrap();
        if cache.len() >= 256 {
            cache.clear();
        }
        cache.insert(key, fit.clone());
        fit
    }

    /// Fit arbitrary boundary data sampled at the collocation points; the
    /// image columns of `source_hint` are appended to the basis.
    pub(crate) fn fit_boundary_data(&self, data: &[f64], source_hint: &[f64]) -> HarmonicFit {
        assert_eq!(data.len(), self.colloc_points.len());
        let b = DVector::from_column_slice(data);
        let images = self.image_points(source_hint);
        let e = 2.0 - self.n as f64;
        let c = DMatrix::from_fn(self.colloc_points.len(), images.len(), |i, j| {
            self.c_n * dist(&self.colloc_points[i], &images[j]).powf(e)
        });
        let (w1, w2) = self.solver.solve_with_extras(&b, &c);
        let n_charges = self.charges.len();
        HarmonicFit {
            n: self.n,
            c_n: self.c_n,
            charge_weights: w1.as_slice()[..n_charges].to_vec(),
            constant: w1[n_charges],
            images: images
                .into_iter()
                .zip(w2.iter().cloned())
                .collect(),
        }
    }

    /// Boundary residual of a fit, relative to the sup of the data, measured
    /// on held-out validation points.
    pub(crate) fn fit_residual(&self, fit: &HarmonicFit, data: &dyn Fn(&[f64]) -> f64) -> f64 {
        let mut err = 0.0_f64;
        let mut scale = 0.0_f64;
        for xb in &self.validation_points {
            let d = data(xb);
            err = err.max((fit.eval(&self.charges, xb) - d).abs());
            scale = scale.max(d.abs());
        }
        if scale > 0.0 {
            err / scale
        } else {
            err
        }
    }

    pub(crate) fn charges(&self) -> &[Vec<f64>] {
        &self.charges
    }

    pub(crate) fn colloc_points(&self) -> &[Vec<f64>] {
        &self.colloc_points
    }

    /// Evaluate the fitted regular part anywhere, including on the boundary
    /// (no interiority check); for diagnostics and boundary-residual probes.
    pub fn fitted_regular_part(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.method {
            EngineMethod::AnalyticBall => self.analytic_h(x, y),
            EngineMethod::Collocation => self.fit_source(y).eval(&self.charges, x),
        }
    }

    /// The collocation points of the boundary fit.
    pub fn collocation_points(&self) -> Vec<Vec<f64>> {
        self.colloc_points.clone()
    }

    pub fn domain_spec(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn method(&self) -> EngineMethod {
        self.method
    }

    pub fn c_n(&self) -> f64 {
        self.c_n
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn collocation_residual(&self) -> f64 {
        self.collocation_residual
    }

    fn require_interior(&self, x: &[f64], what: &str) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Geometry(format!(
                "{what} has dimension {} but the domain is {}-dimensional",
                x.len(),
                self.n
            )));
        }
        if self.domain.boundary_distance(x) <= 0.0 {
            return Err(Error::Geometry(format!("{what} {x:?} is not interior")));
        }
        Ok(())
    }

    /// Closed-form regular part on a ball.
    fn analytic_h(&self, x: &[f64], y: &[f64]) -> f64 {
        let (center, radius) = match &self.domain {
            DomainSpec::Ball { center, radius, .. } => (center, *radius),
            _ => unreachable!("analytic method implies a ball"),
        };
        let nf = self.n as f64;
        let u: Vec<f64> = x.iter().zip(center).map(|(a, c)| (a - c) / radius).collect();
        let v: Vec<f64> = y.iter().zip(center).map(|(a, c)| (a - c) / radius).collect();
        let s = dot(&u, &u) * dot(&v, &v) - 2.0 * dot(&u, &v) + 1.0;
        self.c_n * radius.powf(2.0 - nf) * s.powf(-(nf - 2.0) / 2.0)
    }

    fn analytic_grad_h(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (center, radius) = match &self.domain {
            DomainSpec::Ball { center, radius, .. } => (center, *radius),
            _ => unreachable!(),
        };
        let nf = self.n as f64;
        let u: Vec<f64> = x.iter().zip(center).map(|(a, c)| (a - c) / radius).collect();
        let v: Vec<f64> = y.iter().zip(center).map(|(a, c)| (a - c) / radius).collect();
        let s = dot(&u, &u) * dot(&v, &v) - 2.0 * dot(&u, &v) + 1.0;
        let factor = -self.c_n * radius.powf(1.0 - nf) * (nf - 2.0) * s.powf(-nf / 2.0);
        let vv = dot(&v, &v);
        let uu = dot(&u, &u);
        let gx: Vec<f64> = u.iter().zip(&v).map(|(ui, vi)| factor * (vv * ui - vi)).collect();
        let gy: Vec<f64> = v.iter().zip(&u).map(|(vi, ui)| factor * (uu * vi - ui)).collect();
        (gx, gy)
    }
}

impl GreenSource for GreenEngine {
    fn dim(&self) -> usize {
        self.n
    }

    fn domain(&self) -> Option<&DomainSpec> {
        Some(&self.domain)
    }

    fn regular_part(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.require_interior(x, "x")?;
        self.require_interior(y, "y")?;
        match self.method {
            EngineMethod::AnalyticBall => Ok(self.analytic_h(x, y)),
            EngineMethod::Collocation => Ok(self.fit_source(y).eval(&self.charges, x)),
        }
    }

    fn green(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let sep = dist(x, y);
        if sep < 1e-12 * self.domain.diameter() {
            return Err(Error::CoincidentPoints { sep });
        }
        let e = 2.0 - self.n as f64;
        Ok(self.c_n * sep.powf(e) - self.regular_part(x, y)?)
    }

    fn grad_regular_part(&self, x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.require_interior(x, "x")?;
        self.require_interior(y, "y")?;
        match self.method {
            EngineMethod::AnalyticBall => Ok(self.analytic_grad_h(x, y)),
            EngineMethod::Collocation => {
                // grad_x from the expansion fitted at source y; grad_y by
                // symmetry from the expansion fitted at source x
                let fit_y = self.fit_source(y);
                let gx = fit_y.grad(&self.charges, x);
                let gy = if x == y {
                    gx.clone()
                } else {
                    self.fit_source(x).grad(&self.charges, y)
                };
                Ok((gx, gy))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// JSON export / import
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EngineJson {
    domain: Value,
    n: usize,
    method: EngineMethod,
    tol: f64,
    charges: Vec<Vec<f64>>,
    colloc_points: Vec<Vec<f64>>,
    validation_points: Vec<Vec<f64>>,
    collocation_residual: f64,
}

/// Hard cap on total imported points: bounds the least-squares matrix that
/// an untrusted engine JSON can make us factorise.
const MAX_IMPORT_POINTS: usize = 20_000;

impl GreenEngine {
    pub fn export_json(&self) -> Value {
        serde_json::to_value(EngineJson {
            domain: self.domain.to_json_value(),
            n: self.n,
            method: self.method,
            tol: self.tol,
            charges: self.charges.clone(),
            colloc_points: self.colloc_points.clone(),
            validation_points: self.validation_points.clone(),
            collocation_residual: self.collocation_residual,
        })
        .expect("engine serialization cannot fail")
    }

    /// Rebuild an engine from its exported JSON form. The least-squares
    /// factorisation is reconstructed from the stored geometry, so imported
    /// engines reproduce the original evaluations.
    pub fn import_json(v: &Value) -> Result<Self> {
        let parsed: EngineJson = serde_json::from_value(v.clone())?;
        let domain = DomainSpec::from_json_value(&parsed.domain)?;
        let n = domain.dim();
        if !(3..=6).contains(&n) || parsed.n != n {
            return Err(Error::InvalidInput("engine dimension mismatch".into()));
        }
        if parsed.charges.len() + parsed.colloc_points.len() + parsed.validation_points.len()
            > MAX_IMPORT_POINTS
        {
            return Err(Error::InvalidInput("engine import exceeds size limits".into()));
        }
        if parsed.colloc_points.len() < parsed.charges.len() {
            return Err(Error::InvalidInput(
                "engine import: fewer collocation points than charges".into(),
            ));
        }
        if parsed.charges.is_empty() || parsed.colloc_points.is_empty() {
            return Err(Error::InvalidInput("engine import: empty basis".into()));
        }
        for p in parsed
            .charges
            .iter()
            .chain(&parsed.colloc_points)
            .chain(&parsed.validation_points)
        {
            if p.len() != n || p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("engine import: malformed point".into()));
            }
        }
        if matches!(parsed.method, EngineMethod::AnalyticBall)
            && !matches!(domain, DomainSpec::Ball { .. })
        {
            return Err(Error::InvalidInput(
                "analytic method is only valid on balls".into(),
            ));
        }
        let c_n = fundamental_constant(n);
        let e = 2.0 - n as f64;
        let rows = parsed.colloc_points.len();
        let cols = parsed.charges.len() + 1;
        let mut a = DMatrix::<f64>::zeros(rows, cols);
        for (i, x) in parsed.colloc_points.iter().enumerate() {
            for (k, q) in parsed.charges.iter().enumerate() {
                a[(i, k)] = c_n * dist(x, q).powf(e);
            }
            a[(i, parsed.charges.len())] = 1.0;
        }
        let solver = LsSolver::new(a);
        Ok(GreenEngine {
            image_components: domain.sphere_components(),
            domain,
            n,
            c_n,
            method: parsed.method,
            tol: parsed.tol,
            charges: parsed.charges,
            colloc_points: parsed.colloc_points,
            validation_points: parsed.validation_points,
            solver,
            collocation_residual: parsed.collocation_residual,
            fit_cache: Mutex::new(HashMap::new()),
        })
    }
}

/// Convenience boundary sampler reused by tests and the assembler.
pub fn boundary_samples(domain: &DomainSpec, count: usize, seed: u64) -> Vec<BoundarySample> {
    domain.sample_boundary(count, seed)
}

/// Exterior charge points of the collocation basis.
///
/// For spherical components charges sit on a dilated copy of the component
/// (outer boundaries at 1.5 R, holes at 0.5 r): a surface-proportional
/// offset keeps the representable boundary detail growing with the charge
/// count, whereas an offset tied to the sample spacing saturates at a fixed
/// aliasing error. Meshes fall back to along-normal offsets of twice the
/// local spacing.
fn charge_points(domain: &DomainSpec, count: usize) -> Vec<Vec<f64>> {
    match domain {
        DomainSpec::BoundaryMesh { .. } => domain
            .sample_boundary(2 * count, 3)
            .iter()
            .step_by(2)
            .map(|s| add_scaled(&s.point, 2.0 * s.spacing, &s.normal))
            .collect(),
        _ => {
            let n = domain.dim();
            let comps = domain.sphere_components();
            let counts = domain.component_counts(count);
            let mut charges = Vec::with_capacity(count);
            for ((k, comp), m) in comps.iter().enumerate().zip(counts) {
                let radius = match comp.orientation {
                    1 => 1.5 * comp.radius,
                    _ => 0.5 * comp.radius,
                };
                for dir in unit_sphere_points(n, m, 0x5eed_0000 + k as u64) {
                    charges.push(add_scaled(&comp.center, radius, &dir));
                }
            }
            charges
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const C3: f64 = 0.07957747154594767;

    fn ball_engine(n: usize) -> GreenEngine {
        GreenEngine::build(&DomainSpec::unit_ball(n), 200, 1e-8).unwrap()
    }

    #[test]
    fn analytic_ball_values() {
        let eng = ball_engine(3);
        assert_eq!(eng.method(), EngineMethod::AnalyticBall);
        // G(0, y) = c3 (1/|y| - 1) at |y| = 0.5
        let g = eng.green(&[0.0, 0.0, 0.0], &[0.5, 0.0, 0.0]).unwrap();
        assert!((g - C3).abs() < 1e-12, "{g}");
        // H(0, 0) = c3; tau(0.5 e1) = c3 / 0.75
        assert!((eng.robin(&[0.0, 0.0, 0.0]).unwrap() - C3).abs() < 1e-12);
        let t = eng.robin(&[0.5, 0.0, 0.0]).unwrap();
        assert!((t - 0.1061032953945969).abs() < 1e-12, "{t}");
    }

    #[test]
    fn robin_blows_up_towards_boundary() {
        let eng = ball_engine(3);
        let t0 = eng.robin(&[0.0, 0.0, 0.0]).unwrap();
        let t5 = eng.robin(&[0.5, 0.0, 0.0]).unwrap();
        let t9 = eng.robin(&[0.9, 0.0, 0.0]).unwrap();
        assert!(t9 > t5 && t5 > t0);
    }

    #[test]
    fn green_symmetry_and_positivity() {
        let eng = ball_engine(4);
        let pts = [
            (vec![0.1, 0.2, -0.3, 0.0], vec![-0.4, 0.1, 0.2, 0.3]),
            (vec![0.5, 0.0, 0.0, 0.0], vec![0.0, 0.5, 0.0, 0.0]),
        ];
        for (x, y) in &pts {
            let gxy = eng.green(x, y).unwrap();
            let gyx = eng.green(y, x).unwrap();
            assert!((gxy - gyx).abs() <= 1e-8 * gxy.abs().max(1.0));
            assert!(gxy > 0.0);
        }
    }

    #[test]
    fn coincident_points_rejected() {
        let eng = ball_engine(3);
        let x = vec![0.1, 0.0, 0.0];
        assert!(matches!(
            eng.green(&x, &x),
            Err(Error::CoincidentPoints { .. })
        ));
    }

    #[test]
    fn green_vanishes_at_boundary() {
        let eng = ball_engine(3);
        let y = vec![0.2, 0.1, 0.0];
        let deep = eng.green(&[0.5, 0.0, 0.0], &y).unwrap();
        let near = eng
            .green(&[0.999_999, 0.0, 0.0], &y)
            .unwrap();
        assert!(near.abs() < 1e-4 * deep.abs());
    }

    #[test]
    fn collocation_matches_image_formula_on_ball() {
        // forced collocation on the unit ball against the closed form
        let domain = DomainSpec::unit_ball(3);
        let coll =
            GreenEngine::build_with_method(&domain, 300, 1e-8, EngineMethod::Collocation).unwrap();
        assert!(coll.collocation_residual() <= 1e-8);
        let exact = GreenEngine::build(&domain, 200, 1e-8).unwrap();
        let pairs = [
            (vec![0.0, 0.0, 0.0], vec![0.5, 0.0, 0.0]),
            (vec![0.3, -0.2, 0.1], vec![-0.4, 0.3, 0.2]),
            (vec![0.7, 0.0, 0.0], vec![0.0, 0.0, -0.6]),
        ];
        for (x, y) in &pairs {
            let a = coll.green(x, y).unwrap();
            let b = exact.green(x, y).unwrap();
            assert!((a - b).abs() < 1e-6 * b.abs().max(1e-12), "{a} vs {b}");
            let ha = coll.regular_part(x, y).unwrap();
            let hb = exact.regular_part(x, y).unwrap();
            assert!((ha - hb).abs() < 1e-6 * hb.abs());
        }
    }

    #[test]
    fn perforated_green_vanishes_on_both_components() {
        let domain = DomainSpec::Perforated {
            outer: Box::new(DomainSpec::unit_ball(3)),
            hole_center: vec![0.0; 3],
            hole_radius: 0.1,
        };
        let eng = GreenEngine::build(&domain, 400, 1e-6).unwrap();
        assert!(eng.collocation_residual() <= 1e-6);
        let y = vec![0.5, 0.0, 0.0];
        let scale = eng.green(&[0.45, 0.1, 0.0], &y).unwrap().abs();
        for s in domain.sample_boundary(40, 5) {
            // nudge inside so the interiority check passes
            let x = add_scaled(&s.point, 1e-7, &s.normal.iter().map(|v| -v).collect::<Vec<_>>());
            if dist(&x, &y) < 1e-3 {
                continue;
            }
            let g = eng.green(&x, &y).unwrap();
            assert!(g.abs() < 1e-4 * scale.max(1.0), "boundary leak {g}");
        }
    }

    #[test]
    fn grad_regular_part_matches_finite_differences() {
        let eng = ball_engine(3);
        let x = vec![0.3, -0.1, 0.2];
        let y = vec![-0.2, 0.4, 0.1];
        let (gx, gy) = eng.grad_regular_part(&x, &y).unwrap();
        let h = 1e-5;
        for i in 0..3 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (eng.regular_part(&xp, &y).unwrap() - eng.regular_part(&xm, &y).unwrap())
                / (2.0 * h);
            assert!((fd - gx[i]).abs() < 1e-5 * gx[i].abs().max(1e-3), "{fd} vs {}", gx[i]);
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[i] += h;
            ym[i] -= h;
            let fd = (eng.regular_part(&x, &yp).unwrap() - eng.regular_part(&x, &ym).unwrap())
                / (2.0 * h);
            assert!((fd - gy[i]).abs() < 1e-5 * gy[i].abs().max(1e-3));
        }
        // ball symmetry: gradient of H vanishes at the center pair
        let (g0x, g0y) = eng
            .grad_regular_part(&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0])
            .unwrap();
        assert!(g0x.iter().chain(&g0y).all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn engine_export_import_round_trip() {
        let domain = DomainSpec::unit_ball(3);
        let eng =
            GreenEngine::build_with_method(&domain, 120, 1e-6, EngineMethod::Collocation).unwrap();
        let json = eng.export_json();
        let back = GreenEngine::import_json(&json).unwrap();
        let x = vec![0.3, 0.2, -0.1];
        let y = vec![-0.2, 0.0, 0.4];
        let a = eng.green(&x, &y).unwrap();
        let b = back.green(&x, &y).unwrap();
        assert_eq!(a.to_bits(), b.to_bits(), "import must reproduce evaluations");
    }

    #[test]
    fn constant_green_source() {
        let src = ConstantGreen { n: 5, h0: 1.0 };
        assert_eq!(src.regular_part(&[0.0; 5], &[0.1; 5]).unwrap(), 1.0);
        assert!(src.grad_robin(&[0.2; 5]).unwrap().iter().all(|v| *v == 0.0));
    }
}
