//! Texture statistics over a complex steerable pyramid.
//!
//! Grayscale statistics, in output order:
//! 1. pixel mean, variance, skewness, kurtosis, min, max;
//! 2. skewness and kurtosis of every low-pass level, variance of the
//!    high-pass residual;
//! 3. central autocovariance of every low-pass level;
//! 4. central autocovariance of every oriented magnitude band;
//! 5. cross-orientation magnitude correlations within each scale;
//! 6. magnitude correlations with the next coarser scale;
//! 7. correlations of real parts with the phase-doubled coarser band.
//!
//! Autocovariances keep only the non-redundant half of the `na × na`
//! neighborhood. Levels smaller than the neighborhood wrap circularly.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::color::{color_marginals, luminance_plane};
use super::fft2::{pad_double, Fft2};
use super::pyramid::{Band, Pyramid, PyramidBuilder};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::stats::population_moments;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsConfig {
    pub n_scales: usize,
    pub n_orientations: usize,
    pub neighborhood: usize,
    pub color_marginals: bool,
}

impl Default for PsConfig {
    fn default() -> Self {
        Self {
            n_scales: 4,
            n_orientations: 4,
            neighborhood: 7,
            color_marginals: true,
        }
    }
}

impl PsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.neighborhood.is_multiple_of(2) {
            return Err(Error::invalid("autocorrelation neighborhood must be odd"));
        }
        if self.n_scales < 1 || self.n_orientations < 2 {
            return Err(Error::invalid("need >= 1 scale and >= 2 orientations"));
        }
        Ok(())
    }

    /// Number of grayscale statistics.
    pub fn gray_len(&self) -> usize {
        let (s, k) = (self.n_scales, self.n_orientations);
        let half = (self.neighborhood * self.neighborhood).div_ceil(2);
        6 + 2 * (s + 1)
            + 1
            + (s + 1) * half
            + s * k * half
            + s * k * (k - 1) / 2
            + (s - 1) * k * k
            + (s - 1) * 2 * k * k
    }

    pub fn len(&self) -> usize {
        self.gray_len() + if self.color_marginals { 12 } else { 0 }
    }

    pub fn schema_id(&self) -> String {
        format!(
            "ps-s{}-o{}-n{}{}",
            self.n_scales,
            self.n_orientations,
            self.neighborhood,
            if self.color_marginals { "-rgb" } else { "" }
        )
    }
}

pub struct PsExtractor {
    config: PsConfig,
    builder: PyramidBuilder,
    fft: Fft2,
    size: usize,
}

const TINY: f64 = 1e-20;

fn centered(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| x - m).collect()
}

fn variance(xs: &[f64]) -> f64 {
    let c = centered(xs);
    c.iter().map(|x| x * x).sum::<f64>() / c.len() as f64
}

/// Pearson correlation, 0 when either input is (numerically) constant.
fn corr(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (centered(a), centered(b));
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(&b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    let n = a.len() as f64;
    if aa / n < TINY || bb / n < TINY {
        0.0
    } else {
        (ab / (aa * bb).sqrt()).clamp(-1.0, 1.0)
    }
}

/// Circular autocovariance at the non-redundant half of the central
/// `na × na` lags of a mean-subtracted square image.
fn autocov(img: &[f64], side: usize, na: usize, out: &mut Vec<f64>) {
    let c = centered(img);
    let h = (na / 2) as isize;
    let n = side as isize;
    let total = (na * na).div_ceil(2);
    let mut count = 0;
    'lags: for dy in -h..=h {
        for dx in -h..=h {
            if count == total {
                break 'lags;
            }
            let mut acc = 0.0;
            for y in 0..n {
                let yy = (y + dy).rem_euclid(n);
                for x in 0..n {
                    let xx = (x + dx).rem_euclid(n);
                    acc += c[(y * n + x) as usize] * c[(yy * n + xx) as usize];
                }
            }
            let v = acc / (side * side) as f64;
            out.push(if v.abs() < TINY { 0.0 } else { v });
            count += 1;
        }
    }
}

impl PsExtractor {
    pub fn new(size: usize, config: PsConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            builder: PyramidBuilder::new(size, config.n_scales, config.n_orientations)?,
            fft: Fft2::new(),
            size,
            config,
        })
    }

    pub fn config(&self) -> &PsConfig {
        &self.config
    }

    /// Upsample a complex band to twice its side and double its phase.
    fn parent(&mut self, band: &Band) -> Vec<Complex64> {
        let m = band.size;
        let mut spec = band.data.clone();
        self.fft.forward(&mut spec, m);
        let mut up = pad_double(&spec, m);
        self.fft.inverse(&mut up, 2 * m);
        up.iter()
            .map(|z| {
                let z = z * 4.0;
                let r = z.norm();
                if r < 1e-300 {
                    Complex64::new(0.0, 0.0)
                } else {
                    z * z / r
                }
            })
            .collect()
    }

    pub fn gray_statistics(&mut self, plane: &[f64]) -> Result<Vec<f64>> {
        let pyr = self.builder.build(plane)?;
        Ok(self.statistics(plane, &pyr))
    }

    fn statistics(&mut self, plane: &[f64], pyr: &Pyramid) -> Vec<f64> {
        let cfg = self.config;
        let (ns, nk, na) = (cfg.n_scales, cfg.n_orientations, cfg.neighborhood);
        let mut out = Vec::with_capacity(cfg.gray_len());

        let px = population_moments(plane);
        out.extend(px);
        out.push(plane.iter().copied().fold(f64::INFINITY, f64::min));
        out.push(plane.iter().copied().fold(f64::NEG_INFINITY, f64::max));

        for lp in &pyr.lowpass {
            let m = population_moments(lp);
            out.push(m[2]);
            out.push(m[3]);
        }
        let hv = variance(&pyr.highpass);
        out.push(if hv < TINY { 0.0 } else { hv });

        for (s, lp) in pyr.lowpass.iter().enumerate() {
            autocov(lp, self.size >> s, na, &mut out);
        }

        let mags: Vec<Vec<Vec<f64>>> = pyr
            .bands
            .iter()
            .map(|scale| scale.iter().map(Band::magnitude).collect())
            .collect();
        for (s, scale) in mags.iter().enumerate() {
            for m in scale {
                autocov(m, self.size >> s, na, &mut out);
            }
        }

        for scale in &mags {
            for i in 0..nk {
                for j in i + 1..nk {
                    out.push(corr(&scale[i], &scale[j]));
                }
            }
        }

        let parents: Vec<Vec<Vec<Complex64>>> = (1..ns)
            .map(|s| pyr.bands[s].iter().map(|b| self.parent(b)).collect())
            .collect();
        for s in 0..ns - 1 {
            let pmag: Vec<Vec<f64>> = parents[s]
                .iter()
                .map(|p| p.iter().map(|z| z.norm()).collect())
                .collect();
            for m in &mags[s] {
                for p in &pmag {
                    out.push(corr(m, p));
                }
            }
        }
        for s in 0..ns - 1 {
            let prs: Vec<Vec<f64>> = parents[s]
                .iter()
                .map(|p| p.iter().map(|z| z.re).collect())
                .collect();
            let pis: Vec<Vec<f64>> = parents[s]
                .iter()
                .map(|p| p.iter().map(|z| z.im).collect())
                .collect();
            for b in &pyr.bands[s] {
                let re = b.real();
                for p in prs.iter().chain(&pis) {
                    out.push(corr(&re, p));
                }
            }
        }
        debug_assert_eq!(out.len(), cfg.gray_len());
        out
    }

    pub fn extract(&mut self, image: &Image) -> Result<Vec<f64>> {
        if image.width != self.size || image.height != self.size {
            return Err(Error::invalid(format!(
                "expected {}x{} image, got {}x{}",
                self.size, self.size, image.width, image.height
            )));
        }
        let mut out = self.gray_statistics(&luminance_plane(image))?;
        if self.config.color_marginals {
            out.extend(color_marginals(image));
        }
        Ok(out)
    }
}
