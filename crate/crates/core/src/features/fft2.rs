use std::collections::HashMap;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Square 2-D FFTs with cached plans. The inverse is normalized by `1/n²`.
pub struct Fft2 {
    planner: FftPlanner<f64>,
    plans: HashMap<(usize, bool), Arc<dyn Fft<f64>>>,
    scratch: Vec<Complex64>,
}

impl Default for Fft2 {
    fn default() -> Self {
        Self::new()
    }
}

impl Fft2 {
    pub fn new() -> Self {
        Self {
            planner: FftPlanner::new(),
            plans: HashMap::new(),
            scratch: Vec::new(),
        }
    }

    fn plan(&mut self, n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
        let planner = &mut self.planner;
        self.plans
            .entry((n, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                }
            })
            .clone()
    }

    fn run(&mut self, data: &mut [Complex64], n: usize, inverse: bool) {
        debug_assert_eq!(data.len(), n * n);
        let fft = self.plan(n, inverse);
        fft.process(data);
        transpose(data, n, &mut self.scratch);
        fft.process(data);
        transpose(data, n, &mut self.scratch);
    }

    pub fn forward(&mut self, data: &mut [Complex64], n: usize) {
        self.run(data, n, false);
    }

    pub fn inverse(&mut self, data: &mut [Complex64], n: usize) {
        self.run(data, n, true);
        let s = 1.0 / (n * n) as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    pub fn forward_real(&mut self, data: &[f64], n: usize) -> Vec<Complex64> {
        let mut c: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut c, n);
        c
    }
}

fn transpose(data: &mut [Complex64], n: usize, scratch: &mut Vec<Complex64>) {
    scratch.clear();
    scratch.extend_from_slice(data);
    for y in 0..n {
        for x in 0..n {
            data[x * n + y] = scratch[y * n + x];
        }
    }
}

/// Signed frequency of DFT index `i` for length `n`.
#[inline]
pub fn signed_freq(i: usize, n: usize) -> isize {
    if i < n / 2 {
        i as isize
    } else {
        i as isize - n as isize
    }
}

/// Keep the central `n/2` frequencies of an `n`-square spectrum.
pub fn crop_half(spec: &[Complex64], n: usize) -> Vec<Complex64> {
    let h = n / 2;
    let mut out = vec![Complex64::new(0.0, 0.0); h * h];
    for y in 0..h {
        let sy = signed_freq(y, h);
        let src_y = sy.rem_euclid(n as isize) as usize;
        for x in 0..h {
            let sx = signed_freq(x, h);
            let src_x = sx.rem_euclid(n as isize) as usize;
            out[y * h + x] = spec[src_y * n + src_x];
        }
    }
    out
}

/// Zero-pad an `n`-square spectrum to `2n`, the inverse of [`crop_half`].
pub fn pad_double(spec: &[Complex64], n: usize) -> Vec<Complex64> {
    let m = 2 * n;
    let mut out = vec![Complex64::new(0.0, 0.0); m * m];
    for y in 0..n {
        let dst_y = signed_freq(y, n).rem_euclid(m as isize) as usize;
        for x in 0..n {
            let dst_x = signed_freq(x, n).rem_euclid(m as isize) as usize;
            out[dst_y * m + dst_x] = spec[y * n + x];
        }
    }
    out
}
