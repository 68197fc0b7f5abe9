//! Procedural scene shapes centered at the origin and scaled to fit in the
//! unit sphere.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::vec3::Vec3;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Sphere,
    Superellipsoid,
    Union,
}

impl FromStr for ShapeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sphere" => Ok(ShapeKind::Sphere),
            "superellipsoid" | "superquadric" => Ok(ShapeKind::Superellipsoid),
            "union" | "union-of-spheres" | "blob" => Ok(ShapeKind::Union),
            other => Err(Error::invalid(format!("unknown shape kind `{other}`"))),
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShapeKind::Sphere => "sphere",
            ShapeKind::Superellipsoid => "superellipsoid",
            ShapeKind::Union => "union",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneShape {
    Sphere {
        radius: f64,
    },
    /// Inside-outside function
    /// `(|x/a|^(2/e2) + |z/c|^(2/e2))^(e2/e1) + |y/b|^(2/e1) = 1`.
    Superellipsoid {
        scale: [f64; 3],
        e1: f64,
        e2: f64,
    },
    Union {
        spheres: Vec<([f64; 3], f64)>,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct Hit {
    pub t: f64,
    pub point: Vec3,
    /// Outward geometric normal, unit length.
    pub normal: Vec3,
}

const MARCH_STEPS: usize = 40;
const REFINE_STEPS: usize = 60;
/// Minimum parametric distance before a superellipsoid surface counts as hit.
pub(crate) const MARCH_EPS: f64 = 1e-5;

impl SceneShape {
    /// Unit sphere.
    pub fn sphere() -> Self {
        SceneShape::Sphere { radius: 1.0 }
    }

    /// Superellipsoid uniformly rescaled so its bounding radius is 1.
    pub fn superellipsoid(scale: [f64; 3], e1: f64, e2: f64) -> Result<Self> {
        if scale.iter().any(|s| !(*s > 0.0)) || !(e1 > 0.0) || !(e2 > 0.0) {
            return Err(Error::invalid(
                "superellipsoid needs positive scale and exponents",
            ));
        }
        let raw = SceneShape::Superellipsoid { scale, e1, e2 };
        let r = raw.sampled_bounding_radius() * (1.0 + 1e-3);
        Ok(SceneShape::Superellipsoid {
            scale: [scale[0] / r, scale[1] / r, scale[2] / r],
            e1,
            e2,
        })
    }

    /// Union of spheres uniformly rescaled so its bounding radius is 1.
    pub fn union(spheres: Vec<([f64; 3], f64)>) -> Result<Self> {
        if spheres.is_empty() || spheres.iter().any(|(_, r)| !(*r > 0.0)) {
            return Err(Error::invalid(
                "union needs at least one sphere of positive radius",
            ));
        }
        let bound = spheres
            .iter()
            .map(|(c, r)| Vec3::new(c[0], c[1], c[2]).norm() + r)
            .fold(0.0, f64::max);
        Ok(SceneShape::Union {
            spheres: spheres
                .into_iter()
                .map(|(c, r)| ([c[0] / bound, c[1] / bound, c[2] / bound], r / bound))
                .collect(),
        })
    }

    /// Draw a random shape of the given kind.
    pub fn random(kind: ShapeKind, seed: u64) -> Self {
        let mut r = rng::rng_for(seed, "shape");
        match kind {
            ShapeKind::Sphere => Self::sphere(),
            ShapeKind::Superellipsoid => {
                let scale = [
                    r.random_range(0.45..1.0),
                    r.random_range(0.45..1.0),
                    r.random_range(0.45..1.0),
                ];
                let e1 = r.random_range(0.3..1.6);
                let e2 = r.random_range(0.3..1.6);
                Self::superellipsoid(scale, e1, e2).expect("parameters are valid")
            }
            ShapeKind::Union => {
                let n = r.random_range(2..=4);
                let spheres = (0..n)
                    .map(|_| {
                        let c = [
                            r.random_range(-0.5..0.5),
                            r.random_range(-0.5..0.5),
                            r.random_range(-0.5..0.5),
                        ];
                        (c, r.random_range(0.3..0.6))
                    })
                    .collect();
                Self::union(spheres).expect("parameters are valid")
            }
        }
    }

    pub fn kind(&self) -> ShapeKind {
        match self {
            SceneShape::Sphere { .. } => ShapeKind::Sphere,
            SceneShape::Superellipsoid { .. } => ShapeKind::Superellipsoid,
            SceneShape::Union { .. } => ShapeKind::Union,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            SceneShape::Sphere { radius } => *radius > 0.0 && *radius <= 1.0 + 1e-12,
            SceneShape::Superellipsoid { scale, e1, e2 } => {
                scale.iter().all(|s| *s > 0.0) && *e1 > 0.0 && *e2 > 0.0
            }
            SceneShape::Union { spheres } => {
                !spheres.is_empty() && spheres.iter().all(|(_, r)| *r > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("degenerate shape: {self:?}")))
        }
    }

    /// Whether a ray leaving the surface outward can never hit it again.
    pub fn is_convex(&self) -> bool {
        match self {
            SceneShape::Sphere { .. } => true,
            SceneShape::Superellipsoid { e1, e2, .. } => *e1 <= 2.0 && *e2 <= 2.0,
            SceneShape::Union { spheres } => spheres.len() == 1,
        }
    }

    /// Largest distance from the origin among densely sampled surface points.
    pub fn sampled_bounding_radius(&self) -> f64 {
        match self {
            SceneShape::Sphere { radius } => *radius,
            SceneShape::Union { spheres } => spheres
                .iter()
                .map(|(c, r)| Vec3::new(c[0], c[1], c[2]).norm() + r)
                .fold(0.0, f64::max),
            SceneShape::Superellipsoid { scale, e1, e2 } => {
                let spow = |v: f64, e: f64| v.signum() * v.abs().powf(e);
                let (n_eta, n_om) = (256, 512);
                let mut best: f64 = 0.0;
                for i in 0..=n_eta {
                    let eta = -PI / 2.0 + PI * i as f64 / n_eta as f64;
                    for j in 0..n_om {
                        let om = -PI + 2.0 * PI * j as f64 / n_om as f64;
                        let ce = spow(eta.cos(), *e1);
                        let p = Vec3::new(
                            scale[0] * ce * spow(om.cos(), *e2),
                            scale[1] * spow(eta.sin(), *e1),
                            scale[2] * ce * spow(om.sin(), *e2),
                        );
                        best = best.max(p.norm());
                    }
                }
                best
            }
        }
    }

    /// Signed inside-outside value: negative inside, positive outside.
    pub fn inside_outside(&self, p: Vec3) -> f64 {
        match self {
            SceneShape::Sphere { radius } => p.norm() - radius,
            SceneShape::Superellipsoid { scale, e1, e2 } => superquadric_f(p, scale, *e1, *e2),
            SceneShape::Union { spheres } => spheres
                .iter()
                .map(|(c, r)| (p - Vec3::new(c[0], c[1], c[2])).norm() - r)
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        self.inside_outside(p) < 0.0
    }

    /// Nearest surface crossing along `o + t d` with `t > t_min`.
    pub fn intersect(&self, o: Vec3, d: Vec3, t_min: f64) -> Option<Hit> {
        match self {
            SceneShape::Sphere { radius } => {
                let (t0, t1) = sphere_roots(o, d, Vec3::ZERO, *radius)?;
                let t = if t0 > t_min {
                    t0
                } else if t1 > t_min {
                    t1
                } else {
                    return None;
                };
                let p = o + d * t;
                Some(Hit {
                    t,
                    point: p,
                    normal: p / *radius,
                })
            }
            SceneShape::Union { spheres } => union_intersect(spheres, o, d, t_min),
            SceneShape::Superellipsoid { scale, e1, e2 } => {
                superquadric_intersect(scale, *e1, *e2, o, d, t_min.max(MARCH_EPS))
            }
        }
    }
}

fn sphere_roots(o: Vec3, d: Vec3, c: Vec3, r: f64) -> Option<(f64, f64)> {
    let oc = o - c;
    let b = oc.dot(d);
    let cc = oc.norm_sq() - r * r;
    let disc = b * b - cc;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some((-b - s, -b + s))
}

fn union_intersect(spheres: &[([f64; 3], f64)], o: Vec3, d: Vec3, t_min: f64) -> Option<Hit> {
    let mut crossings: Vec<(f64, usize)> = Vec::with_capacity(spheres.len() * 2);
    for (k, (c, r)) in spheres.iter().enumerate() {
        if let Some((t0, t1)) = sphere_roots(o, d, Vec3::new(c[0], c[1], c[2]), *r) {
            for t in [t0, t1] {
                if t > t_min {
                    crossings.push((t, k));
                }
            }
        }
    }
    crossings.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (t, k) in crossings {
        let p = o + d * t;
        // a crossing strictly inside another sphere is interior to the union
        let buried = spheres
            .iter()
            .enumerate()
            .any(|(j, (c, r))| j != k && (p - Vec3::new(c[0], c[1], c[2])).norm() < r - 1e-12);
        if !buried {
            let (c, r) = spheres[k];
            return Some(Hit {
                t,
                point: p,
                normal: (p - Vec3::new(c[0], c[1], c[2])) / r,
            });
        }
    }
    None
}

#[inline]
fn superquadric_f(p: Vec3, s: &[f64; 3], e1: f64, e2: f64) -> f64 {
    let u = (p.x / s[0]).abs().powf(2.0 / e2) + (p.z / s[2]).abs().powf(2.0 / e2);
    u.powf(e2 / e1) + (p.y / s[1]).abs().powf(2.0 / e1) - 1.0
}

fn superquadric_normal(p: Vec3, s: &[f64; 3], e1: f64, e2: f64) -> Vec3 {
    let tiny = 1e-300;
    let ax = (p.x / s[0]).abs().max(tiny);
    let ay = (p.y / s[1]).abs().max(tiny);
    let az = (p.z / s[2]).abs().max(tiny);
    let u = (ax.powf(2.0 / e2) + az.powf(2.0 / e2)).max(tiny);
    let outer = (2.0 / e1) * u.powf(e2 / e1 - 1.0);
    let g = Vec3::new(
        outer * ax.powf(2.0 / e2 - 1.0) * p.x.signum() / s[0],
        (2.0 / e1) * ay.powf(2.0 / e1 - 1.0) * p.y.signum() / s[1],
        outer * az.powf(2.0 / e2 - 1.0) * p.z.signum() / s[2],
    );
    let n = g.norm();
    if n.is_finite() && n > 0.0 {
        g / n
    } else {
        p.normalized()
    }
}

/// Parametric overlap of the ray with the box `[-s, s]`.
fn box_span(o: Vec3, d: Vec3, s: &[f64; 3]) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (oi, di, si) in [(o.x, d.x, s[0]), (o.y, d.y, s[1]), (o.z, d.z, s[2])] {
        let si = si * (1.0 + 1e-9);
        if di.abs() < 1e-300 {
            if oi.abs() > si {
                return None;
            }
            continue;
        }
        let (a, b) = ((-si - oi) / di, (si - oi) / di);
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    (lo < hi).then_some((lo, hi))
}

fn superquadric_intersect(
    s: &[f64; 3],
    e1: f64,
    e2: f64,
    o: Vec3,
    d: Vec3,
    t_min: f64,
) -> Option<Hit> {
    let (t0, t1) = sphere_roots(o, d, Vec3::ZERO, 1.0 + 1e-6)?;
    let (b0, b1) = box_span(o, d, s)?;
    let start = t0.max(b0).max(t_min);
    let end = t1.min(b1);
    if start >= end {
        return None;
    }
    let f = |t: f64| superquadric_f(o + d * t, s, e1, e2);
    let f0 = f(start);
    let inside = f0 < 0.0;
    let step = (end - start) / MARCH_STEPS as f64;
    let (mut a, mut fa) = (start, f0);
    for i in 1..=MARCH_STEPS {
        let b = start + step * i as f64;
        let fb = f(b);
        if (fb < 0.0) != inside {
            let t = refine_root(&f, a, fa, b, fb);
            let p = o + d * t;
            return Some(Hit {
                t,
                point: p,
                normal: superquadric_normal(p, s, e1, e2),
            });
        }
        a = b;
        fa = fb;
    }
    None
}

/// Illinois-modified regula falsi on a bracketing interval.
fn refine_root(f: &impl Fn(f64) -> f64, mut a: f64, mut fa: f64, mut b: f64, mut fb: f64) -> f64 {
    let mut side = 0i8;
    for _ in 0..REFINE_STEPS {
        if (b - a).abs() < 1e-12 {
            break;
        }
        let c = if (fb - fa).abs() > 0.0 {
            (a * fb - b * fa) / (fb - fa)
        } else {
            0.5 * (a + b)
        };
        let fc = f(c);
        if fc == 0.0 {
            return c;
        }
        if (fc < 0.0) == (fb < 0.0) {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    // The march enters with a bracket; return the point on the far side.
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_shapes_fit_unit_sphere() {
        for seed in 0..20 {
            for kind in [
                ShapeKind::Sphere,
                ShapeKind::Superellipsoid,
                ShapeKind::Union,
            ] {
                let s = SceneShape::random(kind, seed);
                s.validate().unwrap();
                assert!(s.sampled_bounding_radius() <= 1.0 + 1e-9, "{s:?}");
            }
        }
    }

    #[test]
    fn degenerate_shapes_rejected() {
        assert!(SceneShape::Sphere { radius: 0.0 }.validate().is_err());
        assert!(SceneShape::union(vec![]).is_err());
        assert!(SceneShape::superellipsoid([1.0, 0.0, 1.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn superellipsoid_with_unit_exponents_is_an_ellipsoid() {
        let s = SceneShape::superellipsoid([1.0, 1.0, 1.0], 1.0, 1.0).unwrap();
        let hit = s
            .intersect(Vec3::new(0.0, 0.0, -3.0), Vec3::new(0.0, 0.0, 1.0), 0.0)
            .unwrap();
        assert!((hit.point.z + 1.0 / 1.001).abs() < 1e-9);
        assert!(hit.normal.max_abs_diff(Vec3::new(0.0, 0.0, -1.0)) < 1e-6);
        // exit from inside
        let exit = s
            .intersect(hit.point, Vec3::new(0.0, 0.0, 1.0), MARCH_EPS)
            .unwrap();
        assert!((exit.point.z - 1.0 / 1.001).abs() < 1e-9);
    }

    #[test]
    fn union_skips_buried_crossings() {
        let u = SceneShape::Union {
            spheres: vec![([-0.3, 0.0, 0.0], 0.5), ([0.3, 0.0, 0.0], 0.5)],
        };
        let d = Vec3::new(1.0, 0.0, 0.0);
        let entry = u.intersect(Vec3::new(-3.0, 0.0, 0.0), d, 0.0).unwrap();
        assert!((entry.point.x + 0.8).abs() < 1e-12);
        let exit = u.intersect(entry.point, d, 1e-9).unwrap();
        assert!((exit.point.x - 0.8).abs() < 1e-12);
    }
}
