//! Complex steerable pyramid built in the Fourier domain.
//!
//! Radial split: a high-pass residual at the top, then per scale an
//! oriented high-pass band set and a low-pass that is cropped to half size.
//! Radial filters are `sin`/`cos` of a half-octave raised-cosine ramp in
//! log2 radius, so `hi² + lo² = 1` and the real parts of the oriented bands
//! form a tight frame together with the residuals.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::fft2::{crop_half, pad_double, signed_freq, Fft2};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Band {
    pub size: usize,
    pub data: Vec<Complex64>,
}

impl Band {
    pub fn magnitude(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm()).collect()
    }

    pub fn real(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.re).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Pyramid {
    pub size: usize,
    pub n_scales: usize,
    pub n_orientations: usize,
    pub highpass: Vec<f64>,
    /// `bands[scale][orientation]`, scale 0 finest.
    pub bands: Vec<Vec<Band>>,
    /// Low-pass image entering each scale plus the final residual:
    /// `lowpass[s]` has side `size >> s`, `lowpass[n_scales]` is the residual.
    pub lowpass: Vec<Vec<f64>>,
}

fn ramp(log2r: f64, start: f64) -> f64 {
    (log2r - start).clamp(0.0, 1.0)
}

fn hi(t: f64) -> f64 {
    (PI * t / 2.0).sin()
}

fn lo(t: f64) -> f64 {
    (PI * t / 2.0).cos()
}

/// Angular normalization making the squared steering filters sum to one.
pub fn angular_constant(k: usize) -> f64 {
    let order = (k - 1) as i32;
    let fact = |n: i32| (1..=n).map(f64::from).product::<f64>();
    2f64.powi(2 * order) * fact(order).powi(2) / (k as f64 * fact(2 * order))
}

struct Grid {
    log2r: Vec<f64>,
    angle: Vec<f64>,
}

impl Grid {
    fn new(n: usize) -> Self {
        let mut log2r = Vec::with_capacity(n * n);
        let mut angle = Vec::with_capacity(n * n);
        for y in 0..n {
            let fy = 2.0 * signed_freq(y, n) as f64 / n as f64;
            for x in 0..n {
                let fx = 2.0 * signed_freq(x, n) as f64 / n as f64;
                let r = (fx * fx + fy * fy).sqrt();
                log2r.push(if r > 0.0 { r.log2() } else { f64::NEG_INFINITY });
                angle.push(fy.atan2(fx));
            }
        }
        Self { log2r, angle }
    }
}

/// Reusable pyramid builder for one image size and configuration.
pub struct PyramidBuilder {
    size: usize,
    n_scales: usize,
    n_orientations: usize,
    fft: Fft2,
    grids: Vec<Grid>,
    norm: f64,
}

fn wrap(a: f64) -> f64 {
    let mut d = a.rem_euclid(2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    }
    d
}

impl PyramidBuilder {
    pub fn new(size: usize, n_scales: usize, n_orientations: usize) -> Result<Self> {
        if n_scales == 0 || n_orientations < 2 {
            return Err(Error::invalid(
                "pyramid needs >= 1 scale and >= 2 orientations",
            ));
        }
        if size == 0 || !size.is_multiple_of(1 << n_scales) || size >> n_scales < 2 {
            return Err(Error::invalid(format!(
                "image side {size} must be divisible by 2^{n_scales} with a residual of at least 2"
            )));
        }
        let grids = (0..n_scales).map(|s| Grid::new(size >> s)).collect();
        Ok(Self {
            size,
            n_scales,
            n_orientations,
            fft: Fft2::new(),
            grids,
            norm: angular_constant(n_orientations).sqrt(),
        })
    }

    fn angular(&self, angle: f64, k: usize) -> f64 {
        let d = wrap(angle - PI * k as f64 / self.n_orientations as f64);
        d.cos().powi(self.n_orientations as i32 - 1) * self.norm
    }

    fn phase(&self) -> Complex64 {
        Complex64::new(0.0, -1.0).powu(self.n_orientations as u32 - 1)
    }

    pub fn build(&mut self, image: &[f64]) -> Result<Pyramid> {
        let n = self.size;
        if image.len() != n * n {
            return Err(Error::invalid(format!(
                "expected {}x{} image, got {} values",
                n,
                n,
                image.len()
            )));
        }
        let spec = self.fft.forward_real(image, n);
        let g0 = &self.grids[0];
        let mut hi_spec = spec.clone();
        let mut lo_spec = spec;
        for i in 0..n * n {
            let t = ramp(g0.log2r[i], -1.0);
            hi_spec[i] *= hi(t);
            lo_spec[i] *= lo(t);
        }
        self.fft.inverse(&mut hi_spec, n);
        let highpass = hi_spec.iter().map(|c| c.re).collect();

        let phase = self.phase();
        let mut bands = Vec::with_capacity(self.n_scales);
        let mut lowpass = Vec::with_capacity(self.n_scales + 1);
        let mut m = n;
        for s in 0..self.n_scales {
            let mut img = lo_spec.clone();
            self.fft.inverse(&mut img, m);
            lowpass.push(img.iter().map(|c| c.re).collect());

            let grid = &self.grids[s];
            let himask: Vec<f64> = grid.log2r.iter().map(|&l| hi(ramp(l, -2.0))).collect();
            let mut scale_bands = Vec::with_capacity(self.n_orientations);
            for k in 0..self.n_orientations {
                let mut b: Vec<Complex64> = (0..m * m)
                    .map(|i| {
                        let a = grid.angle[i];
                        let d = wrap(a - PI * k as f64 / self.n_orientations as f64);
                        if d.abs() < PI / 2.0 {
                            lo_spec[i] * (2.0 * himask[i] * self.angular(a, k)) * phase
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect();
                self.fft.inverse(&mut b, m);
                scale_bands.push(Band { size: m, data: b });
            }
            bands.push(scale_bands);

            for (i, v) in lo_spec.iter_mut().enumerate() {
                *v *= lo(ramp(grid.log2r[i], -2.0)) * 0.25;
            }
            lo_spec = crop_half(&lo_spec, m);
            m /= 2;
        }
        let mut img = lo_spec;
        self.fft.inverse(&mut img, m);
        lowpass.push(img.iter().map(|c| c.re).collect());

        Ok(Pyramid {
            size: n,
            n_scales: self.n_scales,
            n_orientations: self.n_orientations,
            highpass,
            bands,
            lowpass,
        })
    }

    /// Invert the pyramid from the real parts of the oriented bands and the
    /// two residuals.
    pub fn reconstruct(&mut self, pyr: &Pyramid) -> Result<Vec<f64>> {
        if pyr.size != self.size
            || pyr.n_scales != self.n_scales
            || pyr.n_orientations != self.n_orientations
        {
            return Err(Error::invalid(
                "pyramid does not match builder configuration",
            ));
        }
        let phase_conj = self.phase().conj();
        let mut m = self.size >> self.n_scales;
        let mut lo_spec = self.fft.forward_real(&pyr.lowpass[self.n_scales], m);
        for s in (0..self.n_scales).rev() {
            let up = pad_double(&lo_spec, m);
            m *= 2;
            let grid = &self.grids[s];
            let mut acc: Vec<Complex64> = (0..m * m)
                .map(|i| up[i] * (4.0 * lo(ramp(grid.log2r[i], -2.0))))
                .collect();
            for k in 0..self.n_orientations {
                let re = pyr.bands[s][k].real();
                let spec = self.fft.forward_real(&re, m);
                for i in 0..m * m {
                    let w = hi(ramp(grid.log2r[i], -2.0)) * self.angular(grid.angle[i], k);
                    acc[i] += spec[i] * w * phase_conj;
                }
            }
            lo_spec = acc;
        }
        let n = self.size;
        let g0 = &self.grids[0];
        let hp = self.fft.forward_real(&pyr.highpass, n);
        let mut out: Vec<Complex64> = (0..n * n)
            .map(|i| {
                let t = ramp(g0.log2r[i], -1.0);
                lo_spec[i] * lo(t) + hp[i] * hi(t)
            })
            .collect();
        self.fft.inverse(&mut out, n);
        Ok(out.iter().map(|c| c.re).collect())
    }
}

impl Pyramid {
    /// Energy of the real-part frame coefficients, each level weighted by its
    /// decimation factor; equals the image energy for a tight frame.
    pub fn frame_energy(&self) -> f64 {
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        let mut e = sq(&self.highpass);
        for (s, scale) in self.bands.iter().enumerate() {
            let w = 4f64.powi(s as i32);
            for b in scale {
                e += w * b.data.iter().map(|c| c.re * c.re).sum::<f64>();
            }
        }
        e + 4f64.powi(self.n_scales as i32) * sq(&self.lowpass[self.n_scales])
    }

    pub fn band_energy(&self, scale: usize, orientation: usize) -> f64 {
        self.bands[scale][orientation]
            .data
            .iter()
            .map(|c| c.norm_sqr())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    #[test]
    fn angular_constant_normalizes_steering() {
        for k in 2..7 {
            let c = angular_constant(k);
            for a in [0.0, 0.3, 1.1, 2.9] {
                let s: f64 = (0..k)
                    .map(|j| {
                        c * (a - PI * j as f64 / k as f64)
                            .cos()
                            .powi(2 * (k as i32 - 1))
                    })
                    .sum();
                assert!((s - 1.0).abs() < 1e-12, "k={k} a={a} s={s}");
            }
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(PyramidBuilder::new(60, 4, 4).is_err());
        assert!(PyramidBuilder::new(16, 4, 4).is_err());
        assert!(PyramidBuilder::new(64, 4, 4).is_ok());
    }

    #[test]
    fn constant_image_has_empty_bands() {
        let mut b = PyramidBuilder::new(64, 4, 4).unwrap();
        let p = b.build(&vec![0.7; 64 * 64]).unwrap();
        for scale in &p.bands {
            for band in scale {
                assert!(band.data.iter().all(|c| c.norm() < 1e-12));
            }
        }
        assert!(p.highpass.iter().all(|v| v.abs() < 1e-12));
        assert!(p.lowpass[4].iter().all(|v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn impulse_and_noise_reconstruct() {
        let mut b = PyramidBuilder::new(64, 4, 4).unwrap();
        let mut impulse = vec![0.0; 64 * 64];
        impulse[31 * 64 + 20] = 1.0;
        let mut r = crate::rng::rng(1);
        let noise: Vec<f64> = (0..64 * 64).map(|_| r.random::<f64>()).collect();
        for img in [impulse, noise] {
            let p = b.build(&img).unwrap();
            let rec = b.reconstruct(&p).unwrap();
            assert!(rel_err(&rec, &img) < 1e-3);
            let e: f64 = img.iter().map(|v| v * v).sum();
            assert!((p.frame_energy() - e).abs() / e < 1e-3);
        }
    }

    #[test]
    fn grating_energy_lands_in_matching_orientation() {
        // intensity varies along y only: horizontal stripes, vertical frequency
        let n = 64;
        let img: Vec<f64> = (0..n * n)
            .map(|i| (2.0 * PI * 12.0 * (i / n) as f64 / n as f64).sin())
            .collect();
        let mut b = PyramidBuilder::new(n, 4, 4).unwrap();
        let p = b.build(&img).unwrap();
        let (mut best, mut best_e, mut energies) = ((0, 0), 0.0, Vec::new());
        for s in 0..4 {
            for k in 0..4 {
                let e = p.band_energy(s, k);
                energies.push(e);
                if e > best_e {
                    best_e = e;
                    best = (s, k);
                }
            }
        }
        // orientation index 2 is the filter centered at 90 degrees (fy axis)
        assert_eq!(best.1, 2);
        let others = energies
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != best.0 * 4 + best.1)
            .map(|(_, e)| *e)
            .fold(0.0, f64::max);
        assert!(best_e > 5.0 * others, "best {best_e}, next {others}");
    }
}
