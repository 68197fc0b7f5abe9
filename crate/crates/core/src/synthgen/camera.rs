use rand::Rng;
use serde::{Deserialize, Serialize};

use super::vec3::Vec3;
use crate::error::{Error, Result};
use crate::rng;

pub const MIN_ELEVATION_DEG: f64 = 30.0;
pub const MAX_ELEVATION_DEG: f64 = 60.0;
pub const CAMERA_DISTANCE: f64 = 2.0;
pub const DEFAULT_FOV_DEG: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub distance: f64,
    pub fov_deg: f64,
}

impl CameraPose {
    pub fn new(elevation_deg: f64, azimuth_deg: f64, fov_deg: f64) -> Result<Self> {
        let pose = Self {
            elevation_deg,
            azimuth_deg: azimuth_deg.rem_euclid(360.0),
            distance: CAMERA_DISTANCE,
            fov_deg,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_ELEVATION_DEG..=MAX_ELEVATION_DEG).contains(&self.elevation_deg) {
            return Err(Error::invalid(format!(
                "elevation {} outside [30, 60]",
                self.elevation_deg
            )));
        }
        if self.distance != CAMERA_DISTANCE {
            return Err(Error::invalid("camera distance is fixed at 2 units"));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(Error::invalid(format!(
                "bad field of view {}",
                self.fov_deg
            )));
        }
        Ok(())
    }

    pub fn position(&self) -> Vec3 {
        let el = self.elevation_deg.to_radians();
        let az = self.azimuth_deg.to_radians();
        Vec3::new(el.cos() * az.cos(), el.sin(), el.cos() * az.sin()) * self.distance
    }

    /// Orthonormal camera frame `(forward, right, up)` looking at the origin.
    pub fn basis(&self) -> (Vec3, Vec3, Vec3) {
        let forward = (-self.position()).normalized();
        let right = forward.cross(Vec3::UP).normalized();
        let up = right.cross(forward);
        (forward, right, up)
    }

    /// Primary ray direction through the center of pixel `(px, py)` of a
    /// `size`-square image (row 0 at the top).
    pub fn ray(&self, px: usize, py: usize, size: usize) -> Vec3 {
        let (f, r, u) = self.basis();
        let half = (self.fov_deg.to_radians() * 0.5).tan();
        let sx = ((px as f64 + 0.5) / size as f64 * 2.0 - 1.0) * half;
        let sy = (1.0 - (py as f64 + 0.5) / size as f64 * 2.0) * half;
        (f + r * sx + u * sy).normalized()
    }
}

/// Uniform elevation in [30, 60] degrees and azimuth in [0, 360), at the
/// fixed distance, with the default field of view.
pub fn sample_camera(seed: u64) -> CameraPose {
    sample_camera_with_fov(seed, DEFAULT_FOV_DEG)
}

pub fn sample_camera_with_fov(seed: u64, fov_deg: f64) -> CameraPose {
    let mut r = rng::rng_for(seed, "camera");
    CameraPose {
        elevation_deg: r.random_range(MIN_ELEVATION_DEG..=MAX_ELEVATION_DEG),
        azimuth_deg: r.random_range(0.0..360.0),
        distance: CAMERA_DISTANCE,
        fov_deg,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn elevation_range_and_determinism() {
        let poses: Vec<_> = (0..10_000).map(sample_camera).collect();
        let lo = poses
            .iter()
            .map(|p| p.elevation_deg)
            .fold(f64::INFINITY, f64::min);
        let hi = poses
            .iter()
            .map(|p| p.elevation_deg)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(lo >= 30.0 && hi <= 60.0);
        assert!(poses
            .iter()
            .all(|p| p.distance == 2.0 && p.validate().is_ok()));
        assert_eq!(sample_camera(99), sample_camera(99));
    }

    #[test]
    fn azimuth_is_uniform() {
        let bins = 36;
        let mut counts = vec![0usize; bins];
        for s in 0..10_000u64 {
            let a = sample_camera(s).azimuth_deg;
            assert!((0.0..360.0).contains(&a));
            counts[(a / 360.0 * bins as f64) as usize] += 1;
        }
        let expected = 10_000.0 / bins as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 = {chi2}, p = {p}");
    }

    #[test]
    fn center_ray_points_at_origin() {
        let pose = CameraPose::new(45.0, 120.0, 40.0).unwrap();
        let d = pose.ray(127, 127, 255);
        assert!(d.max_abs_diff((-pose.position()).normalized()) < 1e-12);
        assert!(CameraPose::new(20.0, 0.0, 40.0).is_err());
    }
}
