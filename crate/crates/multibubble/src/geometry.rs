//! Bounded domains in R^n (n >= 3): specification, membership queries and
//! boundary sampling.
//!
//! Supported shapes are balls, annuli (spherical shells), perforated domains
//! (an analytic domain with a spherical hole removed) and raw boundary meshes
//! given as panels. Analytic shapes expose exact volumes and signed boundary
//! distances; meshes fall back to nearest-panel estimates.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// small vector helpers (points are plain &[f64] slices)
// ---------------------------------------------------------------------------

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// a + t*b as a new vector.
pub fn add_scaled(a: &[f64], t: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Surface area of the unit (n-1)-sphere in R^n.
pub fn unit_sphere_area(n: usize) -> f64 {
    // 2 pi^{n/2} / Gamma(n/2); n is small so hard-code the gamma values.
    let nf = n as f64;
    2.0 * std::f64::consts::PI.powf(nf / 2.0) / gamma_half_integer(n)
}

/// Gamma(n/2) for integer n >= 1.
fn gamma_half_integer(n: usize) -> f64 {
    match n {
        1 => std::f64::consts::PI.sqrt(),
        2 => 1.0,
        _ => (n as f64 / 2.0 - 1.0) * gamma_half_integer(n - 2),
    }
}

/// Volume of the unit ball in R^n.
pub fn unit_ball_volume(n: usize) -> f64 {
    unit_sphere_area(n) / n as f64
}

/// The fundamental-solution constant c_n = 1/((n-2) omega_{n-1}), normalised
/// so that -Delta_x [c_n |x-y|^{2-n}] = delta_y.
pub fn fundamental_constant(n: usize) -> f64 {
    1.0 / ((n as f64 - 2.0) * unit_sphere_area(n))
}

// ---------------------------------------------------------------------------
// quasi-uniform points on spheres
// ---------------------------------------------------------------------------

/// Deterministic quasi-uniform directions on the unit sphere S^{n-1}.
///
/// For n = 3 a Fibonacci lattice is used; in higher dimensions normalised
/// Gaussian samples from a fixed-seed generator. Both are deterministic for
/// a given (n, count, seed).
pub fn unit_sphere_points(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    if n == 3 {
        let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
        // seed rotates the lattice so independent sample sets do not coincide
        let phase = (seed as f64) * 0.618_033_988_749_895;
        (0..count)
            .map(|i| {
                let t = (i as f64 + 0.5) / count as f64;
                let z = 1.0 - 2.0 * t;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let phi = 2.0 * std::f64::consts::PI * ((i as f64 / golden + phase) % 1.0);
                vec![r * phi.cos(), r * phi.sin(), z]
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(n as u64));
        (0..count)
            .map(|_| {
                loop {
                    let v: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
                    let len = norm(&v);
                    if len > 1e-8 {
                        return v.iter().map(|x| x / len).collect();
                    }
                }
            })
            .collect()
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; deterministic given the generator state
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

// ---------------------------------------------------------------------------
// domain specification
// ---------------------------------------------------------------------------

/// One flat boundary panel of a meshed domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub point: Vec<f64>,
    /// Outward unit normal of the domain at `point`.
    pub normal: Vec<f64>,
    pub area: f64,
}

/// A bounded domain in R^n.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    Ball {
        center: Vec<f64>,
        radius: f64,
        n: usize,
    },
    Annulus {
        center: Vec<f64>,
        r_inner: f64,
        r_outer: f64,
        n: usize,
    },
    Perforated {
        outer: Box<DomainSpec>,
        hole_center: Vec<f64>,
        hole_radius: f64,
    },
    BoundaryMesh {
        panels: Vec<Panel>,
        n: usize,
    },
}

/// A spherical boundary component, used for Kelvin image charges.
#[derive(Debug, Clone)]
pub struct SphereComponent {
    pub center: Vec<f64>,
    pub radius: f64,
    /// +1 when the domain lies inside the sphere (outer boundary),
    /// -1 when the domain lies outside (hole / inner shell boundary).
    pub orientation: i32,
}

/// A boundary collocation sample: point, outward normal and an estimate of
/// the local spacing between neighbouring samples.
#[derive(Debug, Clone)]
pub struct BoundarySample {
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
    pub spacing: f64,
}

impl DomainSpec {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        let n = center.len();
        DomainSpec::Ball { center, radius, n }
    }

    pub fn unit_ball(n: usize) -> Self {
        DomainSpec::Ball {
            center: vec![0.0; n],
            radius: 1.0,
            n,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Ball { n, .. } => *n,
            DomainSpec::Annulus { n, .. } => *n,
            DomainSpec::Perforated { outer, .. } => outer.dim(),
            DomainSpec::BoundaryMesh { n, .. } => *n,
        }
    }

    /// Check all structural invariants of the specification.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n < 3 {
            return Err(Error::Geometry(format!("dimension n = {n} must be >= 3")));
        }
        match self {
            DomainSpec::Ball { center, radius, n } => {
                if center.len() != *n {
                    return Err(Error::Geometry("center length != n".into()));
                }
                if !(*radius > 0.0) {
                    return Err(Error::Geometry(format!("radius {radius} must be positive")));
                }
            }
            DomainSpec::Annulus {
                center,
                r_inner,
                r_outer,
                n,
            } => {
                if center.len() != *n {
                    return Err(Error::Geometry("center length != n".into()));
                }
                if !(*r_inner > 0.0) || !(*r_outer > *r_inner) {
                    return Err(Error::Geometry(format!(
                        "annulus radii must satisfy 0 < r_inner < r_outer (got {r_inner}, {r_outer})"
                    )));
                }
            }
            DomainSpec::Perforated {
                outer,
                hole_center,
                hole_radius,
            } => {
                outer.validate()?;
                if matches!(**outer, DomainSpec::Perforated { .. }) {
                    return Err(Error::Geometry("nested perforations are not supported".into()));
                }
                if hole_center.len() != outer.dim() {
                    return Err(Error::Geometry("hole center length != n".into()));
                }
                if !(*hole_radius > 0.0) {
                    return Err(Error::Geometry("hole radius must be positive".into()));
                }
                let clearance = outer.boundary_distance(hole_center);
                if clearance <= *hole_radius {
                    return Err(Error::Geometry(format!(
                        "hole of radius {hole_radius} does not fit strictly inside the outer domain \
                         (clearance {clearance:.3e})"
                    )));
                }
            }
            DomainSpec::BoundaryMesh { panels, n } => {
                if panels.is_empty() {
                    return Err(Error::Geometry("mesh must contain at least one panel".into()));
                }
                for (i, p) in panels.iter().enumerate() {
                    if p.point.len() != *n || p.normal.len() != *n {
                        return Err(Error::Geometry(format!("panel {i}: point/normal length != n")));
                    }
                    if (norm(&p.normal) - 1.0).abs() > 1e-12 {
                        return Err(Error::Geometry(format!(
                            "panel {i}: normal is not unit length (|n| = {})",
                            norm(&p.normal)
                        )));
                    }
                    if !(p.area > 0.0) {
                        return Err(Error::Geometry(format!("panel {i}: area must be positive")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Signed distance to the boundary: positive inside, negative outside.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match self {
            DomainSpec::Ball { center, radius, .. } => radius - dist(x, center),
            DomainSpec::Annulus {
                center,
                r_inner,
                r_outer,
                ..
            } => {
                let r = dist(x, center);
                (r_outer - r).min(r - r_inner)
            }
            DomainSpec::Perforated {
                outer,
                hole_center,
                hole_radius,
            } => outer
                .boundary_distance(x)
                .min(dist(x, hole_center) - hole_radius),
            DomainSpec::BoundaryMesh { panels, .. } => {
                // nearest-panel half-space estimate
                let mut best = f64::INFINITY;
                let mut signed = f64::INFINITY;
                for p in panels {
                    let d = dist(x, &p.point);
                    if d < best {
                        best = d;
                        signed = -dot(&sub(x, &p.point), &p.normal);
                    }
                }
                signed
            }
        }
    }

    pub fn contains(&self, x: &[f64], margin: f64) -> bool {
        self.boundary_distance(x) > margin
    }

    /// Exact volume for analytic shapes; `None` for meshes.
    pub fn volume(&self) -> Option<f64> {
        let n = self.dim();
        match self {
            DomainSpec::Ball { radius, .. } => Some(unit_ball_volume(n) * radius.powi(n as i32)),
            DomainSpec::Annulus {
                r_inner, r_outer, ..
            } => Some(unit_ball_volume(n) * (r_outer.powi(n as i32) - r_inner.powi(n as i32))),
            DomainSpec::Perforated {
                outer, hole_radius, ..
            } => Some(outer.volume()? - unit_ball_volume(n) * hole_radius.powi(n as i32)),
            DomainSpec::BoundaryMesh { .. } => None,
        }
    }

    /// An upper estimate of the domain diameter.
    pub fn diameter(&self) -> f64 {
        match self {
            DomainSpec::Ball { radius, .. } => 2.0 * radius,
            DomainSpec::Annulus { r_outer, .. } => 2.0 * r_outer,
            DomainSpec::Perforated { outer, .. } => outer.diameter(),
            DomainSpec::BoundaryMesh { panels, .. } => {
                let lo_hi = bounding_box(panels.iter().map(|p| p.point.as_slice()));
                dist(&lo_hi.0, &lo_hi.1)
            }
        }
    }

    /// A reference interior point every boundary ray from which crosses the
    /// boundary exactly once per component (used as quadrature star center).
    pub fn star_center(&self) -> Vec<f64> {
        match self {
            DomainSpec::Ball { center, .. } => center.clone(),
            DomainSpec::Annulus { center, .. } => center.clone(),
            DomainSpec::Perforated { hole_center, .. } => hole_center.clone(),
            DomainSpec::BoundaryMesh { panels, .. } => {
                let n = self.dim();
                let mut c = vec![0.0; n];
                let mut total = 0.0;
                for p in panels {
                    axpy(&mut c, p.area, &p.point);
                    total += p.area;
                }
                c.iter_mut().for_each(|v| *v /= total);
                c
            }
        }
    }

    /// Per-component sample counts for a total target `count`: proportional
    /// to surface measure, with a sublinear floor so small components
    /// (holes) keep gaining resolution as the total is raised.
    pub(crate) fn component_counts(&self, count: usize) -> Vec<usize> {
        let n = self.dim();
        let comps = self.sphere_components();
        let total_area: f64 = comps
            .iter()
            .map(|c| unit_sphere_area(n) * c.radius.powi(n as i32 - 1))
            .sum();
        let floor = (count as f64).powf(2.0 / 3.0).ceil() as usize;
        comps
            .iter()
            .map(|comp| {
                let area = unit_sphere_area(n) * comp.radius.powi(n as i32 - 1);
                ((count as f64 * area / total_area).round() as usize)
                    .max(floor.min(count))
                    .max(4 * n)
            })
            .collect()
    }

    /// Spherical boundary components (for Kelvin images). Empty for meshes.
    pub fn sphere_components(&self) -> Vec<SphereComponent> {
        match self {
            DomainSpec::Ball { center, radius, .. } => vec![SphereComponent {
                center: center.clone(),
                radius: *radius,
                orientation: 1,
            }],
            DomainSpec::Annulus {
                center,
                r_inner,
                r_outer,
                ..
            } => vec![
                SphereComponent {
                    center: center.clone(),
                    radius: *r_outer,
                    orientation: 1,
                },
                SphereComponent {
                    center: center.clone(),
                    radius: *r_inner,
                    orientation: -1,
                },
            ],
            DomainSpec::Perforated {
                outer,
                hole_center,
                hole_radius,
            } => {
                let mut comps = outer.sphere_components();
                comps.push(SphereComponent {
                    center: hole_center.clone(),
                    radius: *hole_radius,
                    orientation: -1,
                });
                comps
            }
            DomainSpec::BoundaryMesh { .. } => vec![],
        }
    }

    /// Quasi-uniform boundary samples with outward normals.
    ///
    /// `count` is a target for the total number of samples; it is split
    /// between boundary components in proportion to their surface measure.
    /// `seed` selects an independent sample family (fit vs validation sets).
    pub fn sample_boundary(&self, count: usize, seed: u64) -> Vec<BoundarySample> {
        let n = self.dim();
        match self {
            DomainSpec::BoundaryMesh { panels, .. } => panels
                .iter()
                .map(|p| BoundarySample {
                    point: p.point.clone(),
                    normal: p.normal.clone(),
                    spacing: p.area.powf(1.0 / (n as f64 - 1.0)),
                })
                .collect(),
            _ => {
                let comps = self.sphere_components();
                let counts = self.component_counts(count);
                let mut out = Vec::with_capacity(count);
                for ((k, comp), m) in comps.iter().enumerate().zip(counts) {
                    let area = unit_sphere_area(n) * comp.radius.powi(n as i32 - 1);
                    let spacing = (area / m as f64).powf(1.0 / (n as f64 - 1.0));
                    for dir in unit_sphere_points(n, m, seed.wrapping_add(k as u64 * 7919)) {
                        let point = add_scaled(&comp.center, comp.radius, &dir);
                        let normal: Vec<f64> =
                            dir.iter().map(|d| d * comp.orientation as f64).collect();
                        out.push(BoundarySample {
                            point,
                            normal,
                            spacing,
                        });
                    }
                }
                out
            }
        }
    }

    /// Draw a uniform interior point with the given boundary margin,
    /// by rejection from the bounding box.
    pub fn sample_interior<R: Rng>(&self, rng: &mut R, margin: f64) -> Vec<f64> {
        let (lo, hi) = self.bounding_box();
        for _ in 0..100_000 {
            let x: Vec<f64> = lo
                .iter()
                .zip(&hi)
                .map(|(a, b)| rng.gen_range(*a..*b))
                .collect();
            if self.contains(&x, margin) {
                return x;
            }
        }
        // margin too aggressive for this shape; fall back to the star center
        self.star_center()
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            DomainSpec::Ball { center, radius, .. } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            DomainSpec::Annulus {
                center, r_outer, ..
            } => (
                center.iter().map(|c| c - r_outer).collect(),
                center.iter().map(|c| c + r_outer).collect(),
            ),
            DomainSpec::Perforated { outer, .. } => outer.bounding_box(),
            DomainSpec::BoundaryMesh { panels, .. } => {
                bounding_box(panels.iter().map(|p| p.point.as_slice()))
            }
        }
    }

    // -- JSON ---------------------------------------------------------------

    /// Parse a domain from its JSON document form, rejecting unknown keys.
    ///
    /// Example: `{"kind":"ball","center":[0,0,0],"radius":1.0,"n":3}`.
    pub fn from_json_value(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::InvalidInput("domain must be a JSON object".into()))?;
        let kind = obj
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::InvalidInput("domain requires a string \"kind\"".into()))?;
        let allowed: &[&str] = match kind {
            "ball" => &["kind", "center", "radius", "n"],
            "annulus" => &["kind", "center", "r_inner", "r_outer", "n"],
            "perforated" => &["kind", "outer", "hole_center", "hole_radius", "n"],
            "boundary_mesh" => &["kind", "panels", "n"],
            other => {
                return Err(Error::InvalidInput(format!("unknown domain kind \"{other}\"")))
            }
        };
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "unknown key \"{key}\" in domain of kind \"{kind}\""
                )));
            }
        }
        let get_n = || -> Result<usize> {
            obj.get("n")
                .and_then(Value::as_u64)
                .map(|n| n as usize)
                .ok_or_else(|| Error::InvalidInput("domain requires integer \"n\"".into()))
        };
        let get_point = |key: &str| -> Result<Vec<f64>> {
            parse_f64_array(obj.get(key), key)
        };
        let get_f64 = |key: &str| -> Result<f64> {
            obj.get(key)
                .and_then(Value::as_f64)
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::InvalidInput(format!("domain requires finite number \"{key}\"")))
        };
        let spec = match kind {
            "ball" => DomainSpec::Ball {
                center: get_point("center")?,
                radius: get_f64("radius")?,
                n: get_n()?,
            },
            "annulus" => DomainSpec::Annulus {
                center: get_point("center")?,
                r_inner: get_f64("r_inner")?,
                r_outer: get_f64("r_outer")?,
                n: get_n()?,
            },
            "perforated" => {
                let outer = obj
                    .get("outer")
                    .ok_or_else(|| Error::InvalidInput("perforated domain requires \"outer\"".into()))?;
                let spec = DomainSpec::Perforated {
                    outer: Box::new(DomainSpec::from_json_value(outer)?),
                    hole_center: get_point("hole_center")?,
                    hole_radius: get_f64("hole_radius")?,
                };
                if let Some(n) = obj.get("n").and_then(Value::as_u64) {
                    if n as usize != spec.dim() {
                        return Err(Error::InvalidInput(
                            "perforated \"n\" disagrees with outer domain".into(),
                        ));
                    }
                }
                spec
            }
            "boundary_mesh" => {
                let panels_v = obj
                    .get("panels")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::InvalidInput("boundary_mesh requires \"panels\" array".into()))?;
                let mut panels = Vec::with_capacity(panels_v.len());
                for (i, pv) in panels_v.iter().enumerate() {
                    let po = pv.as_object().ok_or_else(|| {
                        Error::InvalidInput(format!("panel {i} must be an object"))
                    })?;
                    for key in po.keys() {
                        if !["point", "normal", "area"].contains(&key.as_str()) {
                            return Err(Error::InvalidInput(format!(
                                "unknown key \"{key}\" in panel {i}"
                            )));
                        }
                    }
                    panels.push(Panel {
                        point: parse_f64_array(po.get("point"), "point")?,
                        normal: parse_f64_array(po.get("normal"), "normal")?,
                        area: po
                            .get("area")
                            .and_then(Value::as_f64)
                            .filter(|x| x.is_finite())
                            .ok_or_else(|| {
                                Error::InvalidInput(format!("panel {i} requires finite \"area\""))
                            })?,
                    });
                }
                DomainSpec::BoundaryMesh {
                    panels,
                    n: get_n()?,
                }
            }
            _ => unreachable!(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json_value(&self) -> Value {
        match self {
            DomainSpec::Ball { center, radius, n } => json!({
                "kind": "ball", "center": center, "radius": radius, "n": n
            }),
            DomainSpec::Annulus {
                center,
                r_inner,
                r_outer,
                n,
            } => json!({
                "kind": "annulus", "center": center, "r_inner": r_inner,
                "r_outer": r_outer, "n": n
            }),
            DomainSpec::Perforated {
                outer,
                hole_center,
                hole_radius,
            } => json!({
                "kind": "perforated", "outer": outer.to_json_value(),
                "hole_center": hole_center, "hole_radius": hole_radius
            }),
            DomainSpec::BoundaryMesh { panels, n } => json!({
                "kind": "boundary_mesh",
                "panels": panels.iter().map(|p| json!({
                    "point": p.point, "normal": p.normal, "area": p.area
                })).collect::<Vec<_>>(),
                "n": n
            }),
        }
    }
}

fn parse_f64_array(v: Option<&Value>, key: &str) -> Result<Vec<f64>> {
    let arr = v
        .and_then(Value::as_array)
        .ok_or_else(|| Error::InvalidInput(format!("expected numeric array \"{key}\"")))?;
    arr.iter()
        .map(|x| {
            x.as_f64()
                .filter(|f| f.is_finite())
                .ok_or_else(|| Error::InvalidInput(format!("non-finite entry in \"{key}\"")))
        })
        .collect()
}

fn bounding_box<'a>(points: impl Iterator<Item = &'a [f64]>) -> (Vec<f64>, Vec<f64>) {
    let mut lo: Vec<f64> = vec![];
    let mut hi: Vec<f64> = vec![];
    for p in points {
        if lo.is_empty() {
            lo = p.to_vec();
            hi = p.to_vec();
        } else {
            for i in 0..p.len() {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fundamental_constants() {
        assert!((fundamental_constant(3) - 0.07957747154594767).abs() < 1e-15);
        assert!((fundamental_constant(4) - 0.025330295910584444).abs() < 1e-15);
        assert!((fundamental_constant(5) - 0.012665147955292222).abs() < 1e-15);
        assert!((fundamental_constant(6) - 0.008062883608299874).abs() < 1e-15);
    }

    #[test]
    fn ball_volume_and_distance() {
        let b = DomainSpec::unit_ball(3);
        assert!((b.volume().unwrap() - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-12);
        assert!((b.boundary_distance(&[0.0, 0.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!(b.boundary_distance(&[2.0, 0.0, 0.0]) < 0.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(DomainSpec::ball(vec![0.0; 3], -1.0).validate().is_err());
        let ann = DomainSpec::Annulus {
            center: vec![0.0; 3],
            r_inner: 1.0,
            r_outer: 0.5,
            n: 3,
        };
        assert!(ann.validate().is_err());
        // hole touching the boundary
        let perf = DomainSpec::Perforated {
            outer: Box::new(DomainSpec::unit_ball(3)),
            hole_center: vec![0.8, 0.0, 0.0],
            hole_radius: 0.3,
        };
        assert!(perf.validate().is_err());
    }

    #[test]
    fn boundary_samples_lie_on_boundary() {
        for n in 3..=5 {
            let b = DomainSpec::unit_ball(n);
            for s in b.sample_boundary(60, 1) {
                assert!((norm(&s.point) - 1.0).abs() < 1e-12);
                assert!((norm(&s.normal) - 1.0).abs() < 1e-12);
                assert!(s.spacing > 0.0);
            }
        }
    }

    #[test]
    fn perforated_samples_cover_both_components() {
        let d = DomainSpec::Perforated {
            outer: Box::new(DomainSpec::unit_ball(3)),
            hole_center: vec![0.0; 3],
            hole_radius: 0.1,
        };
        let samples = d.sample_boundary(200, 0);
        let on_hole = samples.iter().filter(|s| norm(&s.point) < 0.5).count();
        assert!(on_hole >= 12, "hole boundary undersampled: {on_hole}");
        // hole normals point towards the hole center (outward of the domain)
        for s in &samples {
            if norm(&s.point) < 0.5 {
                assert!(dot(&s.normal, &s.point) < 0.0);
            }
        }
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let v: Value =
            serde_json::from_str(r#"{"kind":"ball","center":[0,0,0],"radius":1.0,"n":3}"#).unwrap();
        let d = DomainSpec::from_json_value(&v).unwrap();
        assert_eq!(d, DomainSpec::unit_ball(3));
        let back = DomainSpec::from_json_value(&d.to_json_value()).unwrap();
        assert_eq!(back, d);

        let bad: Value = serde_json::from_str(
            r#"{"kind":"ball","center":[0,0,0],"radius":1.0,"n":3,"colour":"red"}"#,
        )
        .unwrap();
        assert!(DomainSpec::from_json_value(&bad).is_err());
    }
}
