//! Vertex component analysis: extracts candidate endmembers as the pixels
//! spanning the data simplex.
//!
//! The data is first reduced to a p-dimensional subspace. With a strong
//! estimated SNR the reduction is a projective projection onto the top
//! principal directions of the raw correlation matrix; in the noisy regime
//! it is a PCA to p-1 dimensions padded with a constant coordinate. The
//! iteration then repeatedly projects onto a direction orthogonal to the
//! simplex found so far and grabs the extreme pixel.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Extracted endmembers; rows are copies of actual input pixels.
#[derive(Debug, Clone)]
pub struct VcaResult {
    /// p x bands endmember matrix.
    pub endmembers: Array2<f64>,
    /// Row index into the input matrix for each endmember.
    pub indices: Vec<usize>,
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted
/// descending. Ties keep the original ordering so results stay stable.
fn sorted_symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(eig.eigenvectors.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Extract `p` endmembers from `pixels` (one row per pixel).
pub fn vca(pixels: &Array2<f64>, p: usize, seed: u64) -> Result<VcaResult> {
    let n = pixels.nrows();
    let bands = pixels.ncols();
    if p == 0 {
        return Err(Error::InvalidSpec {
            reason: "endmember count must be at least 1".into(),
        });
    }
    if n < p {
        return Err(Error::TooFewPixels { needed: p, got: n });
    }

    // Column-per-pixel layout for the linear algebra below.
    let y = DMatrix::from_fn(bands, n, |b, i| pixels[[i, b]]);

    if p == 1 {
        // A one-vertex simplex is just the strongest pixel.
        let mut best = 0usize;
        let mut best_norm = -1.0;
        for i in 0..n {
            let norm = y.column(i).norm();
            if norm > best_norm {
                best_norm = norm;
                best = i;
            }
        }
        return Ok(extract(pixels, vec![best]));
    }

    let mean = y.column_mean();
    let mut y0 = y.clone();
    for mut col in y0.column_iter_mut() {
        col -= &mean;
    }
    let cov = &y0 * y0.transpose() / n as f64;
    let (cov_vals, cov_vecs) = sorted_symmetric_eigen(cov);

    let lambda_max = cov_vals[0].max(0.0);
    let affine_dim = if lambda_max <= 0.0 {
        0
    } else {
        cov_vals.iter().filter(|&&v| v > 1e-9 * lambda_max).count()
    };
    if affine_dim < p - 1 {
        return Err(Error::RankDeficient {
            affine_dim,
            requested: p,
        });
    }

    // SNR estimate from the energy captured by the top-p principal subspace.
    let ud_p = cov_vecs.columns(0, p).into_owned();
    let x_p = ud_p.transpose() * &y0;
    let p_y = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let p_x = x_p.iter().map(|v| v * v).sum::<f64>() / n as f64 + mean.norm_squared();
    let snr_db = if p_y - p_x <= f64::EPSILON * p_y.max(1.0) {
        f64::INFINITY
    } else {
        10.0 * ((p_x - (p as f64 / bands as f64) * p_y) / (p_y - p_x)).log10()
    };
    let snr_threshold_db = 15.0 + 10.0 * (p as f64).log10();

    // Build the p-dimensional point set the simplex search runs on.
    let projected: DMatrix<f64> = if snr_db > snr_threshold_db {
        let corr = &y * y.transpose() / n as f64;
        let (_, corr_vecs) = sorted_symmetric_eigen(corr);
        let ud = corr_vecs.columns(0, p).into_owned();
        let x = ud.transpose() * &y;
        let u = x.column_mean();
        let mut proj = DMatrix::zeros(p, n);
        let denom_floor = {
            let max_abs = (0..n)
                .map(|j| x.column(j).dot(&u).abs())
                .fold(0.0f64, f64::max);
            1e-12 * max_abs.max(1.0)
        };
        for j in 0..n {
            let denom = x.column(j).dot(&u);
            let denom = if denom.abs() < denom_floor {
                denom_floor.copysign(if denom == 0.0 { 1.0 } else { denom })
            } else {
                denom
            };
            proj.set_column(j, &(x.column(j) / denom));
        }
        proj
    } else {
        let d = p - 1;
        let ud = cov_vecs.columns(0, d).into_owned();
        let x = ud.transpose() * &y0;
        let c = (0..n).map(|j| x.column(j).norm()).fold(0.0f64, f64::max);
        let mut proj = DMatrix::zeros(p, n);
        for j in 0..n {
            for r in 0..d {
                proj[(r, j)] = x[(r, j)];
            }
            proj[(d, j)] = c;
        }
        proj
    };

    // Simplex iteration: move orthogonally away from what is already found,
    // take the farthest pixel, repeat.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::<f64>::zeros(p, p);
    a[(p - 1, 0)] = 1.0;
    let mut indices = Vec::with_capacity(p);
    for i in 0..p {
        let f = loop {
            let w = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
            let pinv = a.clone().pseudo_inverse(1e-12).map_err(|_| Error::RankDeficient {
                affine_dim,
                requested: p,
            })?;
            let f = &w - &a * (pinv * &w);
            let norm = f.norm();
            if norm > 1e-12 {
                break f / norm;
            }
        };
        let mut best = 0usize;
        let mut best_v = -1.0;
        for j in 0..n {
            let v = f.dot(&projected.column(j)).abs();
            if v > best_v {
                best_v = v;
                best = j;
            }
        }
        indices.push(best);
        a.set_column(i, &projected.column(best));
    }

    Ok(extract(pixels, indices))
}

fn extract(pixels: &Array2<f64>, indices: Vec<usize>) -> VcaResult {
    let bands = pixels.ncols();
    let mut endmembers = Array2::zeros((indices.len(), bands));
    for (row, &idx) in indices.iter().enumerate() {
        endmembers.row_mut(row).assign(&pixels.row(idx));
    }
    VcaResult {
        endmembers,
        indices,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Mixtures of `p` fixed generators with pure pixels present.
    fn simplex_pixels(p: usize, bands: usize, n: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut generators = Array2::zeros((p, bands));
        for e in 0..p {
            for b in 0..bands {
                let t = b as f64 / bands as f64;
                generators[[e, b]] = 0.4
                    + 0.35 * ((e + 1) as f64 * 2.2 * t).sin().powi(2)
                    + 0.15 * ((e as f64) - t).cos();
            }
        }
        let mut pixels = Array2::zeros((n, bands));
        for i in 0..n {
            let mut weights = vec![0.0; p];
            if i < p {
                weights[i] = 1.0; // pure pixel for each generator
            } else {
                let mut total = 0.0;
                for w in weights.iter_mut() {
                    *w = rng.gen_range(0.05..1.0);
                    total += *w;
                }
                for w in weights.iter_mut() {
                    *w /= total;
                }
            }
            for b in 0..bands {
                pixels[[i, b]] = (0..p).map(|e| weights[e] * generators[[e, b]]).sum();
            }
        }
        (pixels, generators)
    }

    fn spectral_angle(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        (dot / (na * nb)).clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn recovers_noiseless_simplex_vertices() {
        for p in [3usize, 4, 5] {
            let (pixels, generators) = simplex_pixels(p, 60, 400, 11 + p as u64);
            let out = vca(&pixels, p, 99).unwrap();
            // Greedy match each generator to its closest recovered endmember.
            let mut used = vec![false; p];
            for g in 0..p {
                let gen_row: Vec<f64> = generators.row(g).to_vec();
                let mut best = None;
                let mut best_angle = f64::INFINITY;
                for e in 0..p {
                    if used[e] {
                        continue;
                    }
                    let em: Vec<f64> = out.endmembers.row(e).to_vec();
                    let angle = spectral_angle(&gen_row, &em);
                    if angle < best_angle {
                        best_angle = angle;
                        best = Some(e);
                    }
                }
                used[best.unwrap()] = true;
                assert!(
                    best_angle < 1e-6,
                    "p={p}: generator {g} recovered with angle {best_angle}"
                );
            }
        }
    }

    #[test]
    fn returns_actual_pixels() {
        let (pixels, _) = simplex_pixels(3, 40, 200, 5);
        let out = vca(&pixels, 3, 1).unwrap();
        for (row, &idx) in out.indices.iter().enumerate() {
            for b in 0..pixels.ncols() {
                assert_eq!(out.endmembers[[row, b]], pixels[[idx, b]]);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let (pixels, _) = simplex_pixels(4, 50, 300, 8);
        let a = vca(&pixels, 4, 1234).unwrap();
        let b = vca(&pixels, 4, 1234).unwrap();
        assert_eq!(a.indices, b.indices);
    }

    #[test]
    fn identical_pixels_p1() {
        let pixels = Array2::from_elem((20, 10), 0.7);
        let out = vca(&pixels, 1, 3).unwrap();
        assert_eq!(out.endmembers.nrows(), 1);
        assert!((out.endmembers[[0, 0]] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn flat_cloud_is_rank_deficient() {
        // All pixels on a 1-D affine line but 4 endmembers requested.
        let mut pixels = Array2::zeros((50, 20));
        for i in 0..50 {
            let t = i as f64 / 49.0;
            for b in 0..20 {
                pixels[[i, b]] = 1.0 + t * (b as f64 + 1.0);
            }
        }
        match vca(&pixels, 4, 0) {
            Err(Error::RankDeficient {
                affine_dim,
                requested: 4,
            }) => assert_eq!(affine_dim, 1),
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }

    #[test]
    fn too_few_pixels_rejected() {
        let pixels = Array2::zeros((2, 5));
        assert!(matches!(
            vca(&pixels, 3, 0),
            Err(Error::TooFewPixels { needed: 3, got: 2 })
        ));
    }
}
