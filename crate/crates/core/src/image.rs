//! RGB float images and their on-disk forms (8-bit PNG, portable float map).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageStage {
    /// Linear radiance, unbounded above.
    Linear,
    /// Tone-mapped, gamma-encoded values in [0, 1].
    Display,
}

/// Interleaved RGB image, row-major, top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub stage: ImageStage,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, stage: ImageStage) -> Self {
        Self {
            width,
            height,
            stage,
            data: vec![0.0; width * height * 3],
        }
    }

    pub fn from_data(
        width: usize,
        height: usize,
        stage: ImageStage,
        data: Vec<f32>,
    ) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::invalid(format!(
                "image buffer has {} values, expected {}x{}x3",
                data.len(),
                width,
                height
            )));
        }
        let img = Self {
            width,
            height,
            stage,
            data,
        };
        img.validate()?;
        Ok(img)
    }

    pub fn filled(width: usize, height: usize, stage: ImageStage, rgb: [f32; 3]) -> Self {
        let mut img = Self::new(width, height, stage);
        for px in img.data.chunks_exact_mut(3) {
            px.copy_from_slice(&rgb);
        }
        img
    }

    /// Check the stage invariants: finite everywhere, non-negative, and at
    /// most 1 for display images.
    pub fn validate(&self) -> Result<()> {
        for &v in &self.data {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!("image contains invalid value {v}")));
            }
            if self.stage == ImageStage::Display && v > 1.0 {
                return Err(Error::invalid(format!("display image value {v} exceeds 1")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f32; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    /// Quantize a display image to 8-bit RGB.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| b as f32 / 255.0).collect();
        Self::from_data(width, height, ImageStage::Display, data)
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let file = BufWriter::new(File::create(path)?);
        let mut enc = png::Encoder::new(file, self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::format(path, e.to_string()))?;
        writer
            .write_image_data(&self.to_rgb8())
            .map_err(|e| Error::format(path, e.to_string()))?;
        Ok(())
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc
                .write_header()
                .map_err(|e| Error::invalid(e.to_string()))?;
            writer
                .write_image_data(&self.to_rgb8())
                .map_err(|e| Error::invalid(e.to_string()))?;
        }
        Ok(out)
    }

    /// Read an 8-bit PNG (RGB, RGBA, gray or gray-alpha) as a display image.
    pub fn read_png(path: &Path) -> Result<Self> {
        let decoder = png::Decoder::new(BufReader::new(File::open(path)?));
        let mut reader = decoder
            .read_info()
            .map_err(|e| Error::format(path, e.to_string()))?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| Error::format(path, "image too large"))?;
        let mut buf = vec![0; size];
        let info = reader
            .next_frame(&mut buf)
            .map_err(|e| Error::format(path, e.to_string()))?;
        if info.bit_depth != png::BitDepth::Eight {
            return Err(Error::format(path, "only 8-bit PNG is supported"));
        }
        let (w, h) = (info.width as usize, info.height as usize);
        let buf = &buf[..info.buffer_size()];
        let rgb: Vec<u8> = match info.color_type {
            png::ColorType::Rgb => buf.to_vec(),
            png::ColorType::Rgba => buf
                .chunks_exact(4)
                .flat_map(|p| [p[0], p[1], p[2]])
                .collect(),
            png::ColorType::Grayscale => buf.iter().flat_map(|&g| [g, g, g]).collect(),
            png::ColorType::GrayscaleAlpha => buf
                .chunks_exact(2)
                .flat_map(|p| [p[0], p[0], p[0]])
                .collect(),
            other => {
                return Err(Error::format(
                    path,
                    format!("unsupported color type {other:?}"),
                ))
            }
        };
        Self::from_rgb8(w, h, &rgb)
    }

    /// Write a color portable float map (little-endian, bottom row first).
    pub fn write_pfm(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        write!(f, "PF\n{} {}\n-1.0\n", self.width, self.height)?;
        for y in (0..self.height).rev() {
            let row = &self.data[y * self.width * 3..(y + 1) * self.width * 3];
            for v in row {
                f.write_all(&v.to_le_bytes())?;
            }
        }
        f.flush()?;
        Ok(())
    }

    /// Read a portable float map (`PF` color or `Pf` gray) as a linear image.
    pub fn read_pfm(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut header = Vec::new();
        while header.len() < 4 {
            let mut line = String::new();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::format(path, "truncated PFM header"));
            }
            header.extend(line.split_whitespace().map(str::to_owned));
        }
        let channels = match header[0].as_str() {
            "PF" => 3,
            "Pf" => 1,
            other => return Err(Error::format(path, format!("bad PFM magic {other}"))),
        };
        let parse = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::format(path, format!("bad PFM size {s}")))
        };
        let (w, h) = (parse(&header[1])?, parse(&header[2])?);
        let scale: f32 = header
            .get(3)
            .ok_or_else(|| Error::format(path, "missing PFM scale"))?
            .parse()
            .map_err(|_| Error::format(path, "bad PFM scale"))?;
        let little = scale < 0.0;
        let mut raw = vec![0u8; w * h * channels * 4];
        r.read_exact(&mut raw)?;
        let vals: Vec<f32> = raw
            .chunks_exact(4)
            .map(|b| {
                let b = [b[0], b[1], b[2], b[3]];
                if little {
                    f32::from_le_bytes(b)
                } else {
                    f32::from_be_bytes(b)
                }
            })
            .collect();
        let mut data = vec![0.0f32; w * h * 3];
        for y in 0..h {
            let src_row = h - 1 - y;
            for x in 0..w {
                for c in 0..3 {
                    let src_c = if channels == 3 { c } else { 0 };
                    data[(y * w + x) * 3 + c] = vals[(src_row * w + x) * channels + src_c].max(0.0);
                }
            }
        }
        Self::from_data(w, h, ImageStage::Linear, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nan_and_overrange_display() {
        assert!(Image::from_data(1, 1, ImageStage::Linear, vec![f32::NAN, 0.0, 0.0]).is_err());
        assert!(Image::from_data(1, 1, ImageStage::Display, vec![1.5, 0.0, 0.0]).is_err());
        assert!(Image::from_data(1, 1, ImageStage::Linear, vec![1.5, 0.0, 0.0]).is_ok());
    }

    #[test]
    fn pfm_and_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = Image::new(4, 3, ImageStage::Linear);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = i as f32 * 0.37;
        }
        let p = dir.path().join("a.pfm");
        img.write_pfm(&p).unwrap();
        assert_eq!(Image::read_pfm(&p).unwrap(), img);

        let disp =
            Image::from_rgb8(4, 3, &(0..36).map(|i| (i * 7) as u8).collect::<Vec<_>>()).unwrap();
        let q = dir.path().join("a.png");
        disp.write_png(&q).unwrap();
        assert_eq!(Image::read_png(&q).unwrap(), disp);
    }
}
