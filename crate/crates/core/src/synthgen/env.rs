//! Equirectangular environment maps.
//!
//! Direction convention: +y is up. Texel column `u` follows the azimuth
//! `atan2(z, x)`, row `v` runs from the zenith (top row) to the nadir.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use rand::Rng;

use super::vec3::Vec3;
use crate::error::{Error, Result};
use crate::image::{Image, ImageStage};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentMap {
    pub width: usize,
    pub height: usize,
    /// Linear RGB radiance, row-major, top row first.
    pub data: Vec<[f32; 3]>,
}

impl EnvironmentMap {
    pub fn new(width: usize, height: usize, data: Vec<[f32; 3]>) -> Result<Self> {
        if height == 0 || width != 2 * height {
            return Err(Error::invalid(format!(
                "environment map must be 2:1, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::invalid("environment map buffer size mismatch"));
        }
        if data.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(
                "environment radiance must be finite and >= 0",
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn constant(rgb: [f32; 3]) -> Self {
        Self {
            width: 8,
            height: 4,
            data: vec![rgb; 32],
        }
    }

    /// Build a map by evaluating `f` at the center direction of every texel.
    pub fn from_fn(height: usize, f: impl Fn(Vec3) -> [f32; 3]) -> Self {
        let width = 2 * height;
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(texel_direction(col, row, width, height)));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// Upper hemisphere `top`, lower hemisphere `bottom`.
    pub fn two_hemisphere(height: usize, top: [f32; 3], bottom: [f32; 3]) -> Self {
        Self::from_fn(height, |d| if d.y >= 0.0 { top } else { bottom })
    }

    /// Procedural sky: a graded sky over a textured ground plus a few bright
    /// colored blobs. Every seed yields a different illumination.
    pub fn procedural(seed: u64, height: usize) -> Self {
        let mut r = rng::rng_for(seed, "env");
        let mut color = |lo: f32, hi: f32| -> [f32; 3] {
            [
                r.random_range(lo..hi),
                r.random_range(lo..hi),
                r.random_range(lo..hi),
            ]
        };
        let zenith = color(0.2, 1.2);
        let horizon = color(0.4, 1.6);
        let ground_a = color(0.02, 0.6);
        let ground_b = color(0.02, 0.6);
        let mut r = rng::rng_for(seed, "env-blobs");
        let stripe_freq = r.random_range(2.0..10.0f64);
        let n_blobs = r.random_range(2..7);
        let blobs: Vec<(Vec3, f64, [f32; 3])> = (0..n_blobs)
            .map(|_| {
                let z: f64 = r.random_range(-0.6..1.0);
                let phi: f64 = r.random_range(0.0..TAU);
                let s = (1.0 - z * z).sqrt();
                let dir = Vec3::new(s * phi.cos(), z, s * phi.sin());
                let width = r.random_range(0.08..0.5f64);
                let gain = r.random_range(0.5..6.0f32);
                let tint = [
                    gain * r.random_range(0.3..1.0f32),
                    gain * r.random_range(0.3..1.0f32),
                    gain * r.random_range(0.3..1.0f32),
                ];
                (dir, width, tint)
            })
            .collect();
        Self::from_fn(height, move |d| {
            let mut c = if d.y >= 0.0 {
                let t = d.y.powf(0.6) as f32;
                [
                    horizon[0] + (zenith[0] - horizon[0]) * t,
                    horizon[1] + (zenith[1] - horizon[1]) * t,
                    horizon[2] + (zenith[2] - horizon[2]) * t,
                ]
            } else {
                // stripes in azimuth make the ground carry structure
                let az = d.z.atan2(d.x);
                let w = (0.5 + 0.5 * (az * stripe_freq).sin() * (d.y * 12.0).cos()) as f32;
                [
                    ground_a[0] + (ground_b[0] - ground_a[0]) * w,
                    ground_a[1] + (ground_b[1] - ground_a[1]) * w,
                    ground_a[2] + (ground_b[2] - ground_a[2]) * w,
                ]
            };
            for (dir, width, tint) in &blobs {
                let ang = d.dot(*dir).clamp(-1.0, 1.0).acos();
                let g = (-(ang * ang) / (2.0 * width * width)).exp() as f32;
                for k in 0..3 {
                    c[k] += tint[k] * g;
                }
            }
            c
        })
    }

    pub fn from_image(img: &Image) -> Result<Self> {
        let data = img.pixels().collect();
        Self::new(img.width, img.height, data)
    }

    /// Load from a portable float map, or a PNG whose values are taken as linear.
    pub fn load(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        let img = match ext.as_deref() {
            Some("pfm") => Image::read_pfm(path)?,
            Some("png") => {
                let mut img = Image::read_png(path)?;
                img.stage = ImageStage::Linear;
                img
            }
            _ => return Err(Error::format(path, "environment maps must be .pfm or .png")),
        };
        Self::from_image(&img)
    }

    pub fn to_image(&self) -> Image {
        let data = self.data.iter().flatten().copied().collect();
        Image {
            width: self.width,
            height: self.height,
            stage: ImageStage::Linear,
            data,
        }
    }

    /// Bilinear radiance lookup, wrapping in azimuth and clamping at the poles.
    pub fn lookup(&self, d: Vec3) -> [f64; 3] {
        let (w, h) = (self.width as f64, self.height as f64);
        let u = (d.z.atan2(d.x) / TAU + 0.5) * w - 0.5;
        let v = (d.y.clamp(-1.0, 1.0).acos() / PI) * h - 0.5;
        let u0 = u.floor();
        let v0 = v.floor();
        let fu = u - u0;
        let fv = v - v0;
        let col = |c: f64| -> usize { (c as i64).rem_euclid(self.width as i64) as usize };
        let row = |r: f64| -> usize { (r.max(0.0) as usize).min(self.height - 1) };
        let (c0, c1) = (col(u0), col(u0 + 1.0));
        let (r0, r1) = (row(v0), row(v0 + 1.0));
        let t = |r: usize, c: usize| self.data[r * self.width + c];
        let (a, b, cc, dd) = (t(r0, c0), t(r0, c1), t(r1, c0), t(r1, c1));
        let mut out = [0.0; 3];
        for k in 0..3 {
            let top = a[k] as f64 * (1.0 - fu) + b[k] as f64 * fu;
            let bot = cc[k] as f64 * (1.0 - fu) + dd[k] as f64 * fu;
            out[k] = top * (1.0 - fv) + bot * fv;
        }
        out
    }
}

fn texel_direction(col: usize, row: usize, width: usize, height: usize) -> Vec3 {
    let phi = ((col as f64 + 0.5) / width as f64 - 0.5) * TAU;
    let theta = (row as f64 + 0.5) / height as f64 * PI;
    let s = theta.sin();
    Vec3::new(s * phi.cos(), theta.cos(), s * phi.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_invariant() {
        assert!(EnvironmentMap::new(4, 4, vec![[0.0; 3]; 16]).is_err());
        assert!(EnvironmentMap::new(8, 4, vec![[-1.0, 0.0, 0.0]; 32]).is_err());
    }

    #[test]
    fn lookup_hits_texel_centers() {
        let env = EnvironmentMap::two_hemisphere(16, [1.0; 3], [0.0; 3]);
        assert_eq!(env.lookup(Vec3::UP), [1.0; 3]);
        assert_eq!(env.lookup(-Vec3::UP), [0.0; 3]);
        let d = texel_direction(5, 3, 32, 16);
        let back = env.lookup(d);
        assert_eq!(back, [1.0; 3]);
    }

    #[test]
    fn procedural_is_deterministic_and_positive() {
        let a = EnvironmentMap::procedural(3, 32);
        assert_eq!(a, EnvironmentMap::procedural(3, 32));
        assert_ne!(a, EnvironmentMap::procedural(4, 32));
        assert!(a.data.iter().flatten().all(|v| v.is_finite() && *v >= 0.0));
    }
}
