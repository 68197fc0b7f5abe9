use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdsResult {
    /// `n` rows of `dims` coordinates.
    pub coords: Vec<Vec<f64>>,
    pub dims: usize,
    /// All eigenvalues of the double-centred matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// Kruskal stress-1 of the embedding distances.
    pub stress: f64,
    /// Set when fewer than the requested dimensions had positive eigenvalues.
    pub reduced: bool,
}

/// Classical (Torgerson) scaling of a symmetric dissimilarity matrix.
pub fn classical_mds(d: &[f64], n: usize, k: usize) -> Result<MdsResult> {
    if d.len() != n * n {
        return Err(Error::invalid("matrix size does not match n"));
    }
    for i in 0..n {
        if d[i * n + i] != 0.0 {
            return Err(Error::invalid("dissimilarity diagonal must be zero"));
        }
        for j in 0..i {
            if (d[i * n + j] - d[j * n + i]).abs() > 1e-12 * d[i * n + j].abs().max(1.0) {
                return Err(Error::invalid("dissimilarity matrix must be symmetric"));
            }
        }
    }
    if n == 0 {
        return Ok(MdsResult {
            coords: vec![],
            dims: 0,
            eigenvalues: vec![],
            stress: 0.0,
            reduced: k > 0,
        });
    }
    // B = -1/2 J D^2 J via row, column and grand means.
    let sq = DMatrix::from_fn(n, n, |i, j| d[i * n + j] * d[i * n + j]);
    let row: Vec<f64> = (0..n).map(|i| sq.row(i).mean()).collect();
    let grand = row.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row[i] - row[j] + grand));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let scale = eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * scale.max(f64::MIN_POSITIVE);
    let positive = eigenvalues.iter().take_while(|&&v| v > tol).count();
    let dims = k.min(positive);
    let mut coords = vec![vec![0.0; dims]; n];
    for (c, &oi) in order.iter().take(dims).enumerate() {
        let s = eig.eigenvalues[oi].sqrt();
        let v = eig.eigenvectors.column(oi);
        // Sign-normalize: largest-magnitude component positive.
        let flip = v
            .iter()
            .fold(0.0f64, |m, &x| if x.abs() > m.abs() { x } else { m })
            < 0.0;
        for i in 0..n {
            coords[i][c] = if flip { -v[i] } else { v[i] } * s;
        }
    }
    let stress = kruskal_stress(d, n, &coords);
    Ok(MdsResult {
        coords,
        dims,
        eigenvalues,
        stress,
        reduced: dims < k,
    })
}

/// `sqrt(sum (d - dhat)^2 / sum d^2)` over pairs; 0 for an all-zero input.
pub fn kruskal_stress(d: &[f64], n: usize, coords: &[Vec<f64>]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let dh = euclid(&coords[i], &coords[j]);
            let v = d[i * n + j];
            num += (v - dh) * (v - dh);
            den += v * v;
        }
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Frobenius residual after optimally rotating/reflecting the centred `x`
/// onto the centred `y` (no scaling).
pub fn procrustes_error(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64> {
    let n = x.len();
    let k = x.first().map_or(0, |r| r.len());
    if y.len() != n || x.iter().chain(y).any(|r| r.len() != k) {
        return Err(Error::invalid("configurations differ in shape"));
    }
    let centre = |m: &[Vec<f64>]| {
        let mut a = DMatrix::from_fn(n, k, |i, j| m[i][j]);
        for j in 0..k {
            let mu = a.column(j).mean();
            a.column_mut(j).add_scalar_mut(-mu);
        }
        a
    };
    let (a, b) = (centre(x), centre(y));
    let svd = (a.transpose() * &b).svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    Ok((a * u * vt - b).norm())
}
