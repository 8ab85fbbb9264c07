//! Interior quadrature over analytic domains.
//!
//! Rules are built from radial-angular tensor products: an angular rule on
//! S^{n-1} that integrates the sphere measure exactly (Gauss-Legendre and
//! Gauss-Chebyshev factors in the polar angles) and panelised Gauss-Legendre
//! in the radius. Near requested concentration centers the radial panels are
//! refined geometrically down to the requested scale, so integrands that
//! spike at a known point and rate are resolved with a logarithmic number of
//! panels.
//!
//! For several separated centers the rule is assembled as disjoint refined
//! balls around each center plus a coarse star-shaped rule over the rest of
//! the domain with masked nodes; the weight sum reproduces the domain volume
//! exactly by construction.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{add_scaled, dist, unit_ball_volume, DomainSpec};

/// Nodes and positive weights of an interior quadrature rule.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    refinement_centers: Vec<Vec<f64>>,
    refinement_scales: Vec<f64>,
}

impl QuadratureRule {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn refinement_centers(&self) -> &[Vec<f64>] {
        &self.refinement_centers
    }

    pub fn refinement_scales(&self) -> &[f64] {
        &self.refinement_scales
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Integrate `f` over the rule.
    ///
    /// Node blocks are evaluated in parallel but partial sums are combined
    /// in a fixed block order, so the result is reproducible on a platform
    /// regardless of thread count.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        const BLOCK: usize = 4096;
        let dim = self.dim;
        let blocks: Vec<f64> = (0..self.len().div_ceil(BLOCK))
            .into_par_iter()
            .map(|b| {
                let lo = b * BLOCK;
                let hi = ((b + 1) * BLOCK).min(self.len());
                let mut acc = 0.0;
                for i in lo..hi {
                    let x = &self.nodes[i * dim..(i + 1) * dim];
                    acc += self.weights[i] * f(x);
                }
                acc
            })
            .collect();
        blocks.iter().sum()
    }
}

// ---------------------------------------------------------------------------
// 1D Gauss rules
// ---------------------------------------------------------------------------

/// Gauss-Legendre nodes and weights on [-1, 1] (Golub-Welsch).
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    if m == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut jacobi = DMatrix::<f64>::zeros(m, m);
    for k in 1..m {
        let kf = k as f64;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let w = 2.0 * eig.eigenvectors[(0, i)] * eig.eigenvectors[(0, i)];
            (node, w)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Gauss-Chebyshev (second kind) nodes/weights for weight sqrt(1-t^2).
fn gauss_chebyshev_u(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mf = m as f64 + 1.0;
    (1..=m)
        .map(|k| {
            let theta = k as f64 * std::f64::consts::PI / mf;
            (theta.cos(), std::f64::consts::PI / mf * theta.sin() * theta.sin())
        })
        .unzip()
}

/// Quadrature in t = cos(theta) for the measure (1-t^2)^{(p-1)/2} dt with
/// integer p >= 1 (the polar-angle factor sin^p of the sphere measure).
fn polar_rule(p: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    if p % 2 == 1 {
        // (1-t^2)^{l} with l integer: fold the factor into Gauss-Legendre
        let l = (p - 1) / 2;
        let (t, w) = gauss_legendre(m);
        let w = t
            .iter()
            .zip(w)
            .map(|(ti, wi)| wi * (1.0 - ti * ti).powi(l as i32))
            .collect();
        (t, w)
    } else {
        // (1-t^2)^{l + 1/2}: Chebyshev-U carries the half power
        let l = (p - 2) / 2;
        let (t, w) = gauss_chebyshev_u(m);
        let w = t
            .iter()
            .zip(w)
            .map(|(ti, wi)| wi * (1.0 - ti * ti).powi(l as i32))
            .collect();
        (t, w)
    }
}

// ---------------------------------------------------------------------------
// angular rules on S^{n-1}
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngularResolution {
    /// For refined shells around a concentration center, where the integrand
    /// is nearly radial.
    Coarse,
    /// For whole-domain rules.
    Fine,
}

/// Directions and weights integrating the surface measure of S^{n-1}
/// exactly (up to roundoff).
pub fn angular_rule(n: usize, res: AngularResolution) -> (Vec<Vec<f64>>, Vec<f64>) {
    let counts: Vec<usize> = match (n, res) {
        (3, AngularResolution::Coarse) => vec![8, 16],
        (3, AngularResolution::Fine) => vec![16, 32],
        (4, AngularResolution::Coarse) => vec![6, 6, 12],
        (4, AngularResolution::Fine) => vec![10, 10, 20],
        (5, AngularResolution::Coarse) => vec![5, 5, 5, 10],
        (5, AngularResolution::Fine) => vec![7, 7, 7, 14],
        (6, AngularResolution::Coarse) => vec![4, 4, 4, 4, 8],
        (6, AngularResolution::Fine) => vec![6, 6, 6, 6, 12],
        _ => panic!("angular rules support n in 3..=6, got {n}"),
    };
    build_sphere_rule(n, &counts)
}

/// Recursive product rule: S^{n-1} = polar angle x S^{n-2}, base case S^1.
fn build_sphere_rule(n: usize, counts: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>) {
    if n == 2 {
        let m = counts[0];
        let w = 2.0 * std::f64::consts::PI / m as f64;
        let (dirs, ws) = (0..m)
            .map(|k| {
                let phi = (k as f64 + 0.5) * 2.0 * std::f64::consts::PI / m as f64;
                (vec![phi.cos(), phi.sin()], w)
            })
            .unzip();
        return (dirs, ws);
    }
    let (t, wt) = polar_rule(n - 2, counts[0]);
    let (sub_dirs, sub_w) = build_sphere_rule(n - 1, &counts[1..]);
    let mut dirs = Vec::with_capacity(t.len() * sub_dirs.len());
    let mut ws = Vec::with_capacity(t.len() * sub_dirs.len());
    for (ti, wi) in t.iter().zip(&wt) {
        let s = (1.0 - ti * ti).max(0.0).sqrt();
        for (d, wd) in sub_dirs.iter().zip(&sub_w) {
            let mut dir = Vec::with_capacity(n);
            dir.push(*ti);
            dir.extend(d.iter().map(|c| c * s));
            dirs.push(dir);
            ws.push(wi * wd);
        }
    }
    (dirs, ws)
}

// ---------------------------------------------------------------------------
// radial panels and star-shaped rules
// ---------------------------------------------------------------------------

/// Geometric panel breakpoints for [r_lo, r_hi] resolving features of size
/// `finest` near r_lo, in the offset coordinate u = r - r_lo.
fn radial_breakpoints(r_lo: f64, r_hi: f64, finest: f64) -> Vec<f64> {
    let span = r_hi - r_lo;
    debug_assert!(span > 0.0);
    let f = finest.clamp(span * 1e-14, span);
    let mut bs = vec![r_lo];
    let mut u = f;
    while u < span {
        bs.push(r_lo + u);
        u *= 2.0;
    }
    bs.push(r_hi);
    bs
}

struct StarRegion<'a> {
    center: &'a [f64],
    r_lo: f64,
    /// Exit radius along a unit direction from the center.
    exit: Box<dyn Fn(&[f64]) -> f64 + 'a>,
}

/// Tensor radial-angular rule over a star-shaped region.
fn star_rule(
    n: usize,
    region: &StarRegion,
    finest: f64,
    radial_pts: usize,
    res: AngularResolution,
    nodes: &mut Vec<f64>,
    weights: &mut Vec<f64>,
) {
    let (dirs, ang_w) = angular_rule(n, res);
    let (gl_t, gl_w) = gauss_legendre(radial_pts);
    for (dir, wa) in dirs.iter().zip(&ang_w) {
        let r_hi = (region.exit)(dir);
        if r_hi <= region.r_lo {
            continue;
        }
        for panel in radial_breakpoints(region.r_lo, r_hi, finest).windows(2) {
            let (a, b) = (panel[0], panel[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (t, w) in gl_t.iter().zip(&gl_w) {
                let r = mid + half * t;
                let wt = w * half * r.powi(n as i32 - 1) * wa;
                nodes.extend(add_scaled(region.center, r, dir));
                weights.push(wt);
            }
        }
    }
}

/// Exit radius of a ray from `z` in direction `dir` through the sphere
/// |x - c| = radius (assumes z strictly inside).
fn sphere_exit(z: &[f64], c: &[f64], radius: f64, dir: &[f64]) -> f64 {
    let d: Vec<f64> = z.iter().zip(c).map(|(a, b)| a - b).collect();
    let beta: f64 = d.iter().zip(dir).map(|(a, b)| a * b).sum();
    let rho2: f64 = d.iter().map(|a| a * a).sum();
    -beta + (beta * beta + radius * radius - rho2).max(0.0).sqrt()
}

fn outer_exit<'a>(domain: &'a DomainSpec, z: &'a [f64]) -> Result<Box<dyn Fn(&[f64]) -> f64 + 'a>> {
    match domain {
        DomainSpec::Ball { center, radius, .. } => {
            let (c, r) = (center.clone(), *radius);
            Ok(Box::new(move |dir| sphere_exit(z, &c, r, dir)))
        }
        DomainSpec::Annulus {
            center, r_outer, ..
        } => {
            let (c, r) = (center.clone(), *r_outer);
            Ok(Box::new(move |dir| sphere_exit(z, &c, r, dir)))
        }
        DomainSpec::Perforated { outer, .. } => outer_exit(outer, z),
        DomainSpec::BoundaryMesh { .. } => Err(Error::Geometry(
            "interior quadrature is only supported on analytic domains".into(),
        )),
    }
}

/// Inner radial bound when starring from the natural center of the shape.
fn natural_inner_radius(domain: &DomainSpec) -> f64 {
    match domain {
        DomainSpec::Ball { .. } => 0.0,
        DomainSpec::Annulus { r_inner, .. } => *r_inner,
        DomainSpec::Perforated { hole_radius, .. } => *hole_radius,
        DomainSpec::BoundaryMesh { .. } => 0.0,
    }
}

// ---------------------------------------------------------------------------
// rule construction
// ---------------------------------------------------------------------------

/// Default node budget used by the CLI and tests.
pub const DEFAULT_BUDGET: usize = 2_000_000;

/// Build an interior quadrature rule refined near the given centers.
///
/// Each center gets radial panels shrinking geometrically down to its scale.
/// The weight sum reproduces the analytic domain volume; for separated
/// centers the rule is a union of refined balls plus a masked coarse rule
/// whose weights are normalised onto the remaining volume.
pub fn interior_quadrature(
    domain: &DomainSpec,
    centers: &[Vec<f64>],
    scales: &[f64],
    budget: usize,
) -> Result<QuadratureRule> {
    domain.validate()?;
    if matches!(domain, DomainSpec::BoundaryMesh { .. }) {
        return Err(Error::Geometry(
            "interior quadrature is only supported on analytic domains".into(),
        ));
    }
    let n = domain.dim();
    if centers.len() != scales.len() {
        return Err(Error::InvalidInput(
            "centers and scales must have equal length".into(),
        ));
    }
    for (c, s) in centers.iter().zip(scales) {
        if !(*s > 0.0) {
            return Err(Error::InvalidInput("refinement scales must be positive".into()));
        }
        if domain.boundary_distance(c) <= 0.0 && dist(c, &domain.star_center()) > 1e-12 {
            return Err(Error::Geometry(format!(
                "refinement center {c:?} is not interior"
            )));
        }
    }

    let star_center = domain.star_center();
    let diam = domain.diameter();
    let mut nodes = Vec::new();
    let mut weights = Vec::new();

    let spread = max_pairwise_distance(centers);
    let clustered = centers.len() <= 1
        || spread <= 10.0 * scales.iter().cloned().fold(0.0_f64, f64::max).max(1e-3 * diam);

    if centers.is_empty() {
        let region = StarRegion {
            center: &star_center,
            r_lo: natural_inner_radius(domain),
            exit: outer_exit(domain, &star_center)?,
        };
        star_rule(n, &region, diam / 8.0, 8, AngularResolution::Fine, &mut nodes, &mut weights);
    } else if clustered {
        let finest = scales.iter().cloned().fold(f64::INFINITY, f64::min) / 3.0;
        let anchor = cluster_anchor(domain, centers, &star_center, diam);
        let region = StarRegion {
            center: &anchor,
            r_lo: if dist(&anchor, &star_center) < 1e-12 {
                natural_inner_radius(domain)
            } else {
                0.0
            },
            exit: outer_exit(domain, &anchor)?,
        };
        star_rule(n, &region, finest, 6, AngularResolution::Fine, &mut nodes, &mut weights);
    } else {
        // separated centers: refined balls + masked coarse background
        let radii: Vec<f64> = centers
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let sep = centers
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, o)| dist(c, o))
                    .fold(f64::INFINITY, f64::min);
                0.9 * domain.boundary_distance(c).min(0.5 * sep)
            })
            .collect();
        for ((c, s), rho) in centers.iter().zip(scales).zip(&radii) {
            if *rho <= *s {
                log::warn!(
                    "refinement ball around {c:?} (radius {rho:.3e}) smaller than scale {s:.3e}"
                );
            }
            let region = StarRegion {
                center: c,
                r_lo: 0.0,
                exit: Box::new(move |_| *rho),
            };
            star_rule(n, &region, s / 3.0, 6, AngularResolution::Coarse, &mut nodes, &mut weights);
        }
        let ball_volume: f64 = radii
            .iter()
            .map(|r| unit_ball_volume(n) * r.powi(n as i32))
            .sum();
        let mut bg_nodes = Vec::new();
        let mut bg_weights = Vec::new();
        let region = StarRegion {
            center: &star_center,
            r_lo: natural_inner_radius(domain),
            exit: outer_exit(domain, &star_center)?,
        };
        star_rule(n, &region, diam / 16.0, 6, AngularResolution::Fine, &mut bg_nodes, &mut bg_weights);
        // mask background nodes covered by refined balls, renormalise weights
        let mut kept_sum = 0.0;
        let mut kept = 0usize;
        for i in 0..bg_weights.len() {
            let x = &bg_nodes[i * n..(i + 1) * n];
            let covered = centers
                .iter()
                .zip(&radii)
                .any(|(c, rho)| dist(x, c) < *rho);
            if !covered {
                kept_sum += bg_weights[i];
                if kept != i {
                    let (dst, src) = (kept * n, i * n);
                    for k in 0..n {
                        bg_nodes[dst + k] = bg_nodes[src + k];
                    }
                }
                bg_weights[kept] = bg_weights[i];
                kept += 1;
            }
        }
        bg_nodes.truncate(kept * n);
        bg_weights.truncate(kept);
        let target = domain.volume().expect("analytic domain") - ball_volume;
        let scale = target / kept_sum;
        for w in &mut bg_weights {
            *w *= scale;
        }
        nodes.extend(bg_nodes);
        weights.extend(bg_weights);
    }

    let count = weights.len();
    if count > budget {
        return Err(Error::BudgetExceeded {
            needed: count,
            budget,
        });
    }
    Ok(QuadratureRule {
        dim: n,
        nodes,
        weights,
        refinement_centers: centers.to_vec(),
        refinement_scales: scales.to_vec(),
    })
}

fn max_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let mut best = 0.0_f64;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.max(dist(&points[i], &points[j]));
        }
    }
    best
}

/// Anchor for a clustered set of centers: the shape center when the cluster
/// sits on it (annular shapes must star from their center), else the first
/// center itself.
fn cluster_anchor(
    domain: &DomainSpec,
    centers: &[Vec<f64>],
    star_center: &[f64],
    diam: f64,
) -> Vec<f64> {
    let c0 = &centers[0];
    match domain {
        DomainSpec::Ball { .. } => c0.clone(),
        _ => {
            if dist(c0, star_center) <= 0.05 * diam {
                star_center.to_vec()
            } else {
                c0.clone()
            }
        }
    }
}
