use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::stats::pearson;

/// Square symmetric dissimilarity matrix with zero diagonal, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rdm {
    pub n: usize,
    /// Row and column labels, in matrix order.
    pub names: Vec<String>,
    pub data: Vec<f64>,
}

impl Rdm {
    /// Build from an upper-triangle filler; the diagonal stays exactly zero
    /// and the lower triangle mirrors the upper one bit for bit.
    pub fn from_fn(names: Vec<String>, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let n = names.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self { n, names, data }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Strictly-upper-triangle entries in row-major order.
    pub fn upper(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * (self.n.saturating_sub(1)) / 2);
        for i in 0..self.n {
            out.extend_from_slice(&self.data[i * self.n + i + 1..(i + 1) * self.n]);
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n)
            .all(|i| self.get(i, i) == 0.0 && (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Rows and columns permuted so that new index `k` is old `order[k]`.
    pub fn reorder(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n];
        if order.len() != self.n
            || order
                .iter()
                .any(|&i| i >= self.n || std::mem::replace(&mut seen[i], true))
        {
            return Err(Error::invalid("ordering is not a permutation"));
        }
        let names = order.iter().map(|&i| self.names[i].clone()).collect();
        Ok(Self::from_fn(names, |a, b| self.get(order[a], order[b])))
    }

    /// Binary matrix (`MGDM`, u32 version, u64 n, f64 LE values) plus a JSON
    /// sidecar at `<path>.json` holding the names and any extra metadata.
    pub fn write(&self, path: &Path, meta: &serde_json::Value) -> Result<()> {
        write_matrix(path, self.n, &self.data)?;
        let side = serde_json::json!({ "n": self.n, "names": self.names, "meta": meta });
        std::fs::write(sidecar(path), serde_json::to_vec_pretty(&side)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let (n, data) = read_matrix(path)?;
        let side: serde_json::Value = serde_json::from_slice(&std::fs::read(sidecar(path))?)?;
        let names: Vec<String> = serde_json::from_value(side["names"].clone())?;
        if names.len() != n {
            return Err(Error::format(
                path,
                "sidecar names do not match matrix size",
            ));
        }
        let r = Self { n, names, data };
        if !r.is_symmetric() {
            return Err(Error::format(
                path,
                "matrix is not symmetric with zero diagonal",
            ));
        }
        Ok(r)
    }

    /// CSV with a header row of names and one labeled row per entry.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("name");
        for n in &self.names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for i in 0..self.n {
            s.push_str(&self.names[i]);
            for j in 0..self.n {
                s.push_str(&format!(",{}", self.get(i, j)));
            }
            s.push('\n');
        }
        s
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

const MAGIC: &[u8; 4] = b"MGDM";
const VERSION: u32 = 1;

fn write_matrix(path: &Path, n: usize, data: &[f64]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(MAGIC)?;
    f.write_all(&VERSION.to_le_bytes())?;
    f.write_all(&(n as u64).to_le_bytes())?;
    for v in data {
        f.write_all(&v.to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

fn read_matrix(path: &Path) -> Result<(usize, Vec<f64>)> {
    let mut f = BufReader::new(File::open(path)?);
    let mut head = [0u8; 16];
    f.read_exact(&mut head)?;
    if &head[..4] != MAGIC || u32::from_le_bytes(head[4..8].try_into().unwrap()) != VERSION {
        return Err(Error::format(path, "not a dissimilarity matrix file"));
    }
    let n = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
    let mut raw = Vec::new();
    f.read_to_end(&mut raw)?;
    if raw.len() != n * n * 8 {
        return Err(Error::format(path, "truncated matrix payload"));
    }
    Ok((
        n,
        raw.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    ))
}

/// `|s_i - s_j|` between prediction scores.
pub fn rdm_from_scores(names: Vec<String>, scores: &[f64]) -> Result<Rdm> {
    if scores.len() != names.len() || scores.len() < 2 {
        return Err(Error::invalid("need at least two named scores"));
    }
    Ok(Rdm::from_fn(names, |i, j| (scores[i] - scores[j]).abs()))
}

/// Euclidean distance between flattened activation vectors.
pub fn rdm_from_activations<A: AsRef<[f64]>>(names: Vec<String>, acts: &[A]) -> Result<Rdm> {
    if acts.len() != names.len() || acts.len() < 2 {
        return Err(Error::invalid("need at least two named activation vectors"));
    }
    let d = acts[0].as_ref().len();
    if acts.iter().any(|a| a.as_ref().len() != d) {
        return Err(Error::invalid("activation vectors differ in length"));
    }
    Ok(Rdm::from_fn(names, |i, j| {
        let (a, b) = (acts[i].as_ref(), acts[j].as_ref());
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }))
}

/// Pearson correlation of the strictly-upper triangles.
pub fn correlate_rdms(a: &Rdm, b: &Rdm) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::invalid(format!(
            "RDM sizes differ: {} vs {}",
            a.n, b.n
        )));
    }
    pearson(&a.upper(), &b.upper())
}

/// i.i.d. uniform symmetric matrix with zero diagonal.
pub fn random_rdm(names: Vec<String>, seed: u64) -> Rdm {
    let mut r = rng::rng_for(seed, "random-rdm");
    Rdm::from_fn(names, |_, _| r.random::<f64>())
}

/// Second-order matrix of `1 - r` between RDMs, with `controls` seeded
/// random RDMs appended after the inputs (named `random-<k>`).
pub fn ccm(rdms: &[(String, Rdm)], controls: usize, seed: u64) -> Result<Rdm> {
    if rdms.len() < 2 {
        return Err(Error::invalid(
            "second-order matrix needs at least two RDMs",
        ));
    }
    let n = rdms[0].1.n;
    let mut all: Vec<(String, Rdm)> = rdms.to_vec();
    for k in 0..controls {
        let names = rdms[0].1.names.clone();
        all.push((
            format!("random-{k}"),
            random_rdm(names, rng::derive(seed, k as u64)),
        ));
    }
    if all.iter().any(|(_, r)| r.n != n) {
        return Err(Error::invalid("all RDMs must share one image list"));
    }
    let m = all.len();
    let mut corr = vec![0.0; m * m];
    for i in 0..m {
        for j in i + 1..m {
            // Identical inputs are exactly similar, free of rounding.
            let r = correlate_rdms(&all[i].1, &all[j].1)?;
            corr[i * m + j] = if all[i].1.data == all[j].1.data {
                1.0
            } else {
                r
            };
        }
    }
    let names = all.iter().map(|(s, _)| s.clone()).collect();
    Ok(Rdm::from_fn(names, |i, j| {
        (1.0 - corr[i * m + j]).clamp(0.0, 2.0)
    }))
}

/// Display order: mirror block first, then glass; within a block by mean
/// rating (mirror-likeness) descending, ties broken by name.
pub fn rdm_order(names: &[String], labels: &[u8], mean_ratings: &[f64]) -> Result<Vec<usize>> {
    if labels.len() != names.len() || mean_ratings.len() != names.len() {
        return Err(Error::invalid("names, labels and ratings differ in length"));
    }
    let mut idx: Vec<usize> = (0..names.len()).collect();
    idx.sort_by(|&a, &b| {
        labels[b]
            .cmp(&labels[a])
            .then(
                mean_ratings[b]
                    .partial_cmp(&mean_ratings[a])
                    .unwrap_or(Ordering::Equal),
            )
            .then_with(|| names[a].cmp(&names[b]))
    });
    Ok(idx)
}
