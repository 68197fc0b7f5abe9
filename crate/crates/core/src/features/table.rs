//! Feature tables: a little-endian f32 matrix with a small binary header,
//! plus a JSON sidecar naming rows and dimensions.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::color::color_hist_features;
use super::ps::{PsConfig, PsExtractor};
use crate::error::{Error, Result};
use crate::image::Image;

const MAGIC: &[u8; 4] = b"MGFT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub schema_id: String,
    pub dims: Vec<String>,
    pub image_ids: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    schema_id: String,
    n_rows: usize,
    n_dims: usize,
    dims: Vec<String>,
    image_ids: Vec<String>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

impl FeatureTable {
    pub fn n_dims(&self) -> usize {
        self.dims.len()
    }

    pub fn row(&self, image_id: &str) -> Option<&[f64]> {
        self.image_ids
            .iter()
            .position(|id| id == image_id)
            .map(|i| self.rows[i].as_slice())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        f.write_all(MAGIC)?;
        f.write_all(&VERSION.to_le_bytes())?;
        f.write_all(&(self.schema_id.len() as u32).to_le_bytes())?;
        f.write_all(self.schema_id.as_bytes())?;
        f.write_all(&(self.rows.len() as u64).to_le_bytes())?;
        f.write_all(&(self.dims.len() as u64).to_le_bytes())?;
        for row in &self.rows {
            for v in row {
                f.write_all(&(*v as f32).to_le_bytes())?;
            }
        }
        f.flush()?;
        let side = Sidecar {
            schema_id: self.schema_id.clone(),
            n_rows: self.rows.len(),
            n_dims: self.dims.len(),
            dims: self.dims.clone(),
            image_ids: self.image_ids.clone(),
        };
        std::fs::write(sidecar_path(path), serde_json::to_vec_pretty(&side)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut f = BufReader::new(File::open(path)?);
        let mut b4 = [0u8; 4];
        f.read_exact(&mut b4)?;
        if &b4 != MAGIC {
            return Err(Error::format(path, "not a feature table"));
        }
        f.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != VERSION {
            return Err(Error::format(path, "unsupported feature table version"));
        }
        f.read_exact(&mut b4)?;
        let mut schema = vec![0u8; u32::from_le_bytes(b4) as usize];
        f.read_exact(&mut schema)?;
        let schema_id =
            String::from_utf8(schema).map_err(|_| Error::format(path, "schema id is not UTF-8"))?;
        let mut b8 = [0u8; 8];
        f.read_exact(&mut b8)?;
        let n_rows = u64::from_le_bytes(b8) as usize;
        f.read_exact(&mut b8)?;
        let n_dims = u64::from_le_bytes(b8) as usize;
        let mut raw = vec![0u8; n_rows * n_dims * 4];
        f.read_exact(&mut raw)?;
        let vals: Vec<f64> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        let rows = if n_dims == 0 {
            vec![Vec::new(); n_rows]
        } else {
            vals.chunks(n_dims).map(<[f64]>::to_vec).collect()
        };
        let side: Sidecar = serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
        if side.schema_id != schema_id || side.n_rows != n_rows || side.n_dims != n_dims {
            return Err(Error::format(path, "sidecar does not match table header"));
        }
        Ok(Self {
            schema_id,
            dims: side.dims,
            image_ids: side.image_ids,
            rows,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    ColorHist,
    Ps(PsConfig),
}

impl FeatureKind {
    pub fn schema_id(&self) -> String {
        match self {
            FeatureKind::ColorHist => "colorhist-v1".into(),
            FeatureKind::Ps(c) => c.schema_id(),
        }
    }

    pub fn dim_names(&self) -> Vec<String> {
        let moments = ["mean", "var", "skew", "kurt"];
        match self {
            FeatureKind::ColorHist => ["lum", "sat"]
                .iter()
                .flat_map(|c| moments.iter().map(move |m| format!("{c}_{m}")))
                .collect(),
            FeatureKind::Ps(c) => {
                let mut names: Vec<String> =
                    (0..c.gray_len()).map(|i| format!("ps_{i:04}")).collect();
                if c.color_marginals {
                    for ch in ["r", "g", "b"] {
                        names.extend(moments.iter().map(|m| format!("{ch}_{m}")));
                    }
                }
                names
            }
        }
    }

    /// Extract features for a list of `(image_id, image)` pairs.
    pub fn extract_all<'a, I>(&self, images: I) -> Result<FeatureTable>
    where
        I: IntoIterator<Item = (&'a str, &'a Image)>,
    {
        let mut ps = None;
        let mut image_ids = Vec::new();
        let mut rows = Vec::new();
        for (id, img) in images {
            img.validate()?;
            let row = match self {
                FeatureKind::ColorHist => color_hist_features(img),
                FeatureKind::Ps(cfg) => {
                    if ps.is_none() {
                        ps = Some(PsExtractor::new(img.width, *cfg)?);
                    }
                    ps.as_mut().expect("initialized above").extract(img)?
                }
            };
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("non-finite feature for {id}")));
            }
            image_ids.push(id.to_owned());
            rows.push(row);
        }
        Ok(FeatureTable {
            schema_id: self.schema_id(),
            dims: self.dim_names(),
            image_ids,
            rows,
        })
    }
}
