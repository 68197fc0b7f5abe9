use crate::image::Image;
use crate::stats::population_moments;

pub const REC709: [f64; 3] = [0.2126, 0.7152, 0.0722];

pub fn luminance(rgb: [f32; 3]) -> f64 {
    REC709[0] * rgb[0] as f64 + REC709[1] * rgb[1] as f64 + REC709[2] * rgb[2] as f64
}

/// HSV saturation; black pixels have saturation 0.
pub fn saturation(rgb: [f32; 3]) -> f64 {
    let max = rgb[0].max(rgb[1]).max(rgb[2]) as f64;
    let min = rgb[0].min(rgb[1]).min(rgb[2]) as f64;
    if max <= 0.0 {
        0.0
    } else {
        (max - min) / max
    }
}

pub fn luminance_saturation(image: &Image) -> (Vec<f64>, Vec<f64>) {
    image
        .pixels()
        .map(|p| (luminance(p), saturation(p)))
        .unzip()
}

/// Row-major luminance plane.
pub fn luminance_plane(image: &Image) -> Vec<f64> {
    image.pixels().map(luminance).collect()
}

/// Mean, variance, skewness and kurtosis of luminance, then of saturation.
pub fn color_hist_features(image: &Image) -> Vec<f64> {
    let (lum, sat) = luminance_saturation(image);
    let mut out = population_moments(&lum).to_vec();
    out.extend(population_moments(&sat));
    out
}

/// Population moments of the R, G and B channels (12 values).
pub fn color_marginals(image: &Image) -> Vec<f64> {
    let mut out = Vec::with_capacity(12);
    for c in 0..3 {
        let ch: Vec<f64> = image.pixels().map(|p| p[c] as f64).collect();
        out.extend(population_moments(&ch));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ImageStage;
    use approx::assert_abs_diff_eq;
    use rand::seq::SliceRandom;

    #[test]
    fn pixel_examples() {
        assert_abs_diff_eq!(luminance([0.5; 3]), 0.5, epsilon = 1e-12);
        assert_eq!(saturation([0.5; 3]), 0.0);
        assert_eq!(saturation([1.0, 0.0, 0.0]), 1.0);
        assert_abs_diff_eq!(saturation([0.5, 0.25, 0.25]), 0.5, epsilon = 1e-12);
        assert_eq!(saturation([0.0; 3]), 0.0);
    }

    #[test]
    fn constant_gray() {
        let img = Image::filled(8, 8, ImageStage::Display, [0.5; 3]);
        let f = color_hist_features(&img);
        assert_abs_diff_eq!(f[0], 0.5, epsilon = 1e-12);
        assert!(f[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn black_and_white_halves() {
        let mut img = Image::new(8, 8, ImageStage::Display);
        for y in 4..8 {
            for x in 0..8 {
                img.set_pixel(x, y, [1.0; 3]);
            }
        }
        let f = color_hist_features(&img);
        assert_abs_diff_eq!(f[0], 0.5, epsilon = 1e-7);
        assert_abs_diff_eq!(f[1], 0.25, epsilon = 1e-7);
        assert_abs_diff_eq!(f[2], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(f[3], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn permutation_invariant() {
        let mut r = crate::rng::rng(3);
        let data: Vec<f32> = (0..16 * 16 * 3)
            .map(|_| rand::Rng::random(&mut r))
            .collect();
        let img = Image::from_data(16, 16, ImageStage::Display, data).unwrap();
        let mut px: Vec<[f32; 3]> = img.pixels().collect();
        px.shuffle(&mut r);
        let shuffled = Image::from_data(16, 16, ImageStage::Display, px.concat()).unwrap();
        let (a, b) = (color_hist_features(&img), color_hist_features(&shuffled));
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }
}
