//! Deterministic analytic tracer: one primary ray per pixel, exact specular
//! reflection for mirrors, Fresnel-weighted reflection/refraction trees for
//! glass.

use serde::{Deserialize, Serialize};

use super::camera::CameraPose;
use super::env::EnvironmentMap;
use super::optics::{fresnel_split_unchecked, reflect_unchecked, refract_unchecked};
use super::shape::SceneShape;
use super::vec3::Vec3;
use crate::error::{Error, Result};
use crate::image::{Image, ImageStage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialClass {
    Mirror,
    Glass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    pub class: MaterialClass,
    pub ior: f64,
    pub reflectance: f64,
    pub max_bounces: u32,
}

impl MaterialSpec {
    /// Perfect conductor with 100% specular reflectance.
    pub fn mirror() -> Self {
        Self {
            class: MaterialClass::Mirror,
            ior: 1.0,
            reflectance: 1.0,
            max_bounces: 4,
        }
    }

    /// Dielectric with refractive index 1.5.
    pub fn glass() -> Self {
        Self {
            class: MaterialClass::Glass,
            ior: 1.5,
            reflectance: 1.0,
            max_bounces: 4,
        }
    }

    pub fn for_class(class: MaterialClass) -> Self {
        match class {
            MaterialClass::Mirror => Self::mirror(),
            MaterialClass::Glass => Self::glass(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_bounces < 1 {
            return Err(Error::invalid("max_bounces must be >= 1"));
        }
        if !(self.reflectance > 0.0 && self.reflectance <= 1.0) {
            return Err(Error::invalid("reflectance must lie in (0, 1]"));
        }
        if self.class == MaterialClass::Glass && !(self.ior > 1.0) {
            return Err(Error::invalid("glass needs ior > 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    /// Output side length in pixels.
    pub size: usize,
    /// Glass path weights below this end in a single environment lookup.
    pub min_weight: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            size: 256,
            min_weight: 1e-3,
        }
    }
}

const OFFSET: f64 = 1e-7;

struct Tracer<'a> {
    shape: &'a SceneShape,
    env: &'a EnvironmentMap,
    material: &'a MaterialSpec,
    convex: bool,
    min_weight: f64,
}

impl Tracer<'_> {
    /// Radiance arriving along `d` at `o`. `outward` marks rays that just
    /// left the surface toward the outside of a convex shape.
    fn trace(&self, o: Vec3, d: Vec3, bounces_left: u32, weight: f64, outward: bool) -> [f64; 3] {
        let hit = if outward && self.convex {
            None
        } else {
            self.shape.intersect(o, d, 1e-9)
        };
        let Some(hit) = hit else {
            return self.env.lookup(d);
        };
        if bounces_left == 0 {
            return self.env.lookup(d);
        }
        match self.material.class {
            MaterialClass::Mirror => {
                let r = reflect_unchecked(d, hit.normal);
                let c = self.trace(
                    hit.point + hit.normal * OFFSET,
                    r,
                    bounces_left - 1,
                    weight,
                    true,
                );
                c.map(|v| v * self.material.reflectance)
            }
            MaterialClass::Glass => {
                let entering = d.dot(hit.normal) < 0.0;
                let facing = if entering { hit.normal } else { -hit.normal };
                let eta = if entering {
                    1.0 / self.material.ior
                } else {
                    self.material.ior
                };
                let (mut r_w, mut t_w) = fresnel_split_unchecked(d, hit.normal, self.material.ior);
                let refracted = refract_unchecked(d, facing, eta);
                if refracted.is_none() {
                    r_w = 1.0;
                    t_w = 0.0;
                }
                let reflected = reflect_unchecked(d, facing);
                let mut out = [0.0; 3];
                let mut add = |c: [f64; 3], w: f64| {
                    for k in 0..3 {
                        out[k] += w * c[k];
                    }
                };
                let children = [
                    (r_w, Some(reflected), hit.point + facing * OFFSET, entering),
                    (t_w, refracted, hit.point - facing * OFFSET, !entering),
                ];
                for (w, dir, origin, leaves_outward) in children {
                    let Some(dir) = dir else { continue };
                    if w <= 0.0 {
                        continue;
                    }
                    let child_w = weight * w;
                    let c = if bounces_left == 1 || child_w < self.min_weight {
                        self.env.lookup(dir)
                    } else {
                        self.trace(origin, dir, bounces_left - 1, child_w, leaves_outward)
                    };
                    add(c, w);
                }
                out
            }
        }
    }
}

/// Render the shape under `env` to a linear HDR image of `config.size` pixels.
pub fn render(
    shape: &SceneShape,
    env: &EnvironmentMap,
    material: &MaterialSpec,
    camera: &CameraPose,
    config: &RenderConfig,
) -> Result<Image> {
    shape.validate()?;
    material.validate()?;
    camera.validate()?;
    if config.size == 0 {
        return Err(Error::invalid("render size must be positive"));
    }
    let tracer = Tracer {
        shape,
        env,
        material,
        convex: shape.is_convex(),
        min_weight: config.min_weight,
    };
    let origin = camera.position();
    let n = config.size;
    let mut img = Image::new(n, n, ImageStage::Linear);
    for py in 0..n {
        for px in 0..n {
            let d = camera.ray(px, py, n);
            let c = tracer.trace(origin, d, material.max_bounces, 1.0, false);
            img.set_pixel(px, py, [c[0] as f32, c[1] as f32, c[2] as f32]);
        }
    }
    Ok(img)
}

#[inline]
pub fn reinhard_gamma(x: f32) -> f32 {
    let t = x / (1.0 + x);
    t.powf(1.0 / 2.2)
}

/// Reinhard `x/(1+x)` tone map, gamma 1/2.2 encoding, then box-filter
/// downsampling to `out_size` square.
pub fn tonemap_resize(hdr: &Image, out_size: usize) -> Result<Image> {
    if hdr.width != hdr.height || out_size == 0 || !hdr.width.is_multiple_of(out_size) {
        return Err(Error::invalid(format!(
            "cannot resize {}x{} to {out_size}",
            hdr.width, hdr.height
        )));
    }
    hdr.validate()?;
    let f = hdr.width / out_size;
    let norm = 1.0 / (f * f) as f64;
    let mut out = Image::new(out_size, out_size, ImageStage::Display);
    for oy in 0..out_size {
        for ox in 0..out_size {
            let mut acc = [0.0f64; 3];
            for y in oy * f..(oy + 1) * f {
                for x in ox * f..(ox + 1) * f {
                    let p = hdr.pixel(x, y);
                    for k in 0..3 {
                        acc[k] += reinhard_gamma(p[k]) as f64;
                    }
                }
            }
            out.set_pixel(ox, oy, acc.map(|v| ((v * norm) as f32).clamp(0.0, 1.0)));
        }
    }
    Ok(out)
}
