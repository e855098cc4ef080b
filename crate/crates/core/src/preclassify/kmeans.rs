//! K-means clustering with k-means++ seeding, plus the WCSS elbow rule used
//! to pick the number of macroscopic classes.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 300;
const SHIFT_TOLERANCE: f64 = 1e-6;

/// Result of one k-means fit (the best of all restarts).
#[derive(Debug, Clone)]
pub struct KmeansFit {
    /// k x bands centroid matrix.
    pub centroids: Array2<f64>,
    /// Cluster index per input pixel.
    pub assignment: Vec<usize>,
    /// Within-cluster sum of squared distances.
    pub wcss: f64,
    /// Lloyd iterations the winning restart took.
    pub iterations: usize,
}

/// WCSS as a function of k, for k = 1..=k_max.
#[derive(Debug, Clone)]
pub struct ElbowCurve {
    pub k_values: Vec<usize>,
    pub wcss: Vec<f64>,
}

pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    // splitmix-style spread so restart streams never collide.
    seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn sq_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(pixel: &[f64], centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (ci, row) in centroids.outer_iter().enumerate() {
        let d = sq_distance(pixel, row.as_slice().unwrap());
        if d < best_d {
            best_d = d;
            best = ci;
        }
    }
    (best, best_d)
}

/// k-means++ seeding: spread initial centroids proportionally to squared
/// distance from the ones already chosen.
fn plus_plus_init(pixels: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = pixels.nrows();
    let bands = pixels.ncols();
    let mut centroids = Array2::zeros((k, bands));
    let first = rng.gen_range(0..n);
    centroids.row_mut(0).assign(&pixels.row(first));

    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_distance(pixels.row(i).as_slice().unwrap(), centroids.row(0).as_slice().unwrap()))
        .collect();

    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let chosen = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            // All remaining points coincide with a centroid already.
            rng.gen_range(0..n)
        };
        centroids.row_mut(c).assign(&pixels.row(chosen));
        for i in 0..n {
            let d = sq_distance(
                pixels.row(i).as_slice().unwrap(),
                centroids.row(c).as_slice().unwrap(),
            );
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

/// Lloyd iterations from a given starting point.
///
/// The assignment scan is parallel but purely per-pixel; accumulation runs
/// serially in pixel order, so results do not depend on the worker count.
fn lloyd(pixels: &Array2<f64>, mut centroids: Array2<f64>) -> KmeansFit {
    let n = pixels.nrows();
    let k = centroids.nrows();
    let bands = pixels.ncols();
    let mut assignment = vec![0usize; n];
    let mut iterations = 0;

    for iter in 0..MAX_ITERATIONS {
        iterations = iter + 1;
        let cens = &centroids;
        assignment = (0..n)
            .into_par_iter()
            .map(|i| nearest(pixels.row(i).as_slice().unwrap(), cens).0)
            .collect();

        let mut sums = Array2::<f64>::zeros((k, bands));
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let c = assignment[i];
            counts[c] += 1;
            let mut row = sums.row_mut(c);
            for (s, v) in row.iter_mut().zip(pixels.row(i)) {
                *s += v;
            }
        }

        // Re-seed empty clusters with the pixels farthest from their current
        // centroid, largest first, so every cluster stays populated.
        let empties: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        if !empties.is_empty() {
            let mut dists: Vec<(usize, f64)> = (0..n)
                .map(|i| {
                    (
                        i,
                        sq_distance(
                            pixels.row(i).as_slice().unwrap(),
                            centroids.row(assignment[i]).as_slice().unwrap(),
                        ),
                    )
                })
                .collect();
            dists.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            for (slot, &c) in empties.iter().enumerate() {
                let (pixel_idx, _) = dists[slot.min(n - 1)];
                counts[c] = 1;
                sums.row_mut(c).assign(&pixels.row(pixel_idx));
            }
        }

        let mut max_shift = 0.0f64;
        for c in 0..k {
            let inv = 1.0 / counts[c] as f64;
            let mut shift = 0.0;
            for b in 0..bands {
                let new = sums[[c, b]] * inv;
                let d = new - centroids[[c, b]];
                shift += d * d;
                centroids[[c, b]] = new;
            }
            max_shift = max_shift.max(shift.sqrt());
        }
        if max_shift < SHIFT_TOLERANCE {
            break;
        }
    }

    let cens = &centroids;
    let final_pass: Vec<(usize, f64)> = (0..n)
        .into_par_iter()
        .map(|i| nearest(pixels.row(i).as_slice().unwrap(), cens))
        .collect();
    let mut wcss = 0.0;
    for (i, &(c, d)) in final_pass.iter().enumerate() {
        assignment[i] = c;
        wcss += d;
    }

    KmeansFit {
        centroids,
        assignment,
        wcss,
        iterations,
    }
}

/// Cluster `pixels` (one row per pixel) into `k` groups.
///
/// Runs `restarts` independent k-means++ seedings and keeps the fit with the
/// lowest WCSS. Deterministic for a given seed: restart r draws from its own
/// counter-derived stream.
pub fn kmeans(pixels: &Array2<f64>, k: usize, seed: u64, restarts: usize) -> Result<KmeansFit> {
    let n = pixels.nrows();
    if k == 0 {
        return Err(Error::InvalidSpec {
            reason: "k must be at least 1".into(),
        });
    }
    if n < k {
        return Err(Error::TooFewPixels { needed: k, got: n });
    }
    let restarts = restarts.max(1);
    let mut best: Option<KmeansFit> = None;
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, r as u64));
        let fit = lloyd(pixels, plus_plus_init(pixels, k, &mut rng));
        if best.as_ref().map_or(true, |b| fit.wcss < b.wcss) {
            best = Some(fit);
        }
    }
    Ok(best.unwrap())
}

/// WCSS curve over k = 1..=k_max.
///
/// Besides the k-means++ restarts, each k also tries an init grown from the
/// previous k's winner (its centroids plus the farthest remaining pixel).
/// Adding a centroid can only shrink that init's WCSS, which keeps the curve
/// non-increasing even on adversarial data.
pub fn wcss_curve(
    pixels: &Array2<f64>,
    k_max: usize,
    seed: u64,
    restarts: usize,
) -> Result<ElbowCurve> {
    let n = pixels.nrows();
    if n < k_max {
        return Err(Error::TooFewPixels {
            needed: k_max,
            got: n,
        });
    }
    if k_max == 0 {
        return Err(Error::InvalidSpec {
            reason: "k_max must be at least 1".into(),
        });
    }

    let mut k_values = Vec::with_capacity(k_max);
    let mut wcss = Vec::with_capacity(k_max);
    let mut prev_best: Option<KmeansFit> = None;

    for k in 1..=k_max {
        let mut best: Option<KmeansFit> = None;
        for r in 0..restarts.max(1) {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, (k * 1000 + r) as u64));
            let fit = lloyd(pixels, plus_plus_init(pixels, k, &mut rng));
            if best.as_ref().map_or(true, |b| fit.wcss < b.wcss) {
                best = Some(fit);
            }
        }
        if let Some(prev) = &prev_best {
            let grown = grow_init(pixels, prev);
            let fit = lloyd(pixels, grown);
            if fit.wcss < best.as_ref().unwrap().wcss {
                best = Some(fit);
            }
        }
        let best = best.unwrap();
        k_values.push(k);
        wcss.push(best.wcss);
        prev_best = Some(best);
    }

    Ok(ElbowCurve { k_values, wcss })
}

fn grow_init(pixels: &Array2<f64>, prev: &KmeansFit) -> Array2<f64> {
    let k_prev = prev.centroids.nrows();
    let bands = pixels.ncols();
    let mut init = Array2::zeros((k_prev + 1, bands));
    for c in 0..k_prev {
        init.row_mut(c).assign(&prev.centroids.row(c));
    }
    let mut far_idx = 0usize;
    let mut far_d = -1.0;
    for i in 0..pixels.nrows() {
        let (_, d) = nearest(pixels.row(i).as_slice().unwrap(), &prev.centroids);
        if d > far_d {
            far_d = d;
            far_idx = i;
        }
    }
    init.row_mut(k_prev).assign(&pixels.row(far_idx));
    init
}

/// Pick the elbow of a WCSS curve.
///
/// Both axes are min-max normalized, then the interior point farthest from
/// the chord between the curve's endpoints wins; ties go to the smaller k.
/// A constant curve means the data has no cluster structure at all, in which
/// case k = 1 is returned.
pub fn elbow_select(curve: &ElbowCurve) -> Result<usize> {
    let m = curve.k_values.len();
    if m != curve.wcss.len() || m < 3 {
        return Err(Error::DegenerateCurve { points: m });
    }
    let w_min = curve.wcss.iter().cloned().fold(f64::INFINITY, f64::min);
    let w_max = curve.wcss.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if w_max == w_min {
        return Ok(1);
    }
    let k0 = curve.k_values[0] as f64;
    let k1 = curve.k_values[m - 1] as f64;

    let norm: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            (
                (curve.k_values[i] as f64 - k0) / (k1 - k0),
                (curve.wcss[i] - w_min) / (w_max - w_min),
            )
        })
        .collect();
    let (x0, y0) = norm[0];
    let (xn, yn) = norm[m - 1];
    let chord = ((xn - x0).powi(2) + (yn - y0).powi(2)).sqrt();

    let mut best_k = curve.k_values[1];
    let mut best_d = -1.0;
    for i in 1..m - 1 {
        let (x, y) = norm[i];
        let d = ((xn - x0) * (y0 - y) - (x0 - x) * (yn - y0)).abs() / chord;
        if d > best_d {
            best_d = d;
            best_k = curve.k_values[i];
        }
    }
    Ok(best_k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_blobs() -> Array2<f64> {
        array![
            [0.0, 0.0],
            [0.0, 1.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [10.0, 10.0],
            [10.0, 11.0],
            [11.0, 10.0],
            [11.0, 11.0],
        ]
    }

    #[test]
    fn separates_two_blobs() {
        let fit = kmeans(&two_blobs(), 2, 7, 8).unwrap();
        assert!((fit.wcss - 4.0).abs() < 1e-9, "wcss {}", fit.wcss);
        assert_eq!(fit.assignment[0], fit.assignment[3]);
        assert_eq!(fit.assignment[4], fit.assignment[7]);
        assert_ne!(fit.assignment[0], fit.assignment[4]);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = kmeans(&two_blobs(), 2, 42, 4).unwrap();
        let b = kmeans(&two_blobs(), 2, 42, 4).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.centroids, b.centroids);
    }

    #[test]
    fn too_few_pixels() {
        let pixels = array![[1.0, 2.0]];
        assert!(matches!(
            kmeans(&pixels, 2, 0, 1),
            Err(Error::TooFewPixels { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn curve_is_monotone() {
        let curve = wcss_curve(&two_blobs(), 6, 3, 4).unwrap();
        for w in curve.wcss.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-9,
                "wcss increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn elbow_on_hand_curve() {
        let curve = ElbowCurve {
            k_values: vec![1, 2, 3, 4, 5],
            wcss: vec![100.0, 10.0, 9.0, 8.5, 8.0],
        };
        assert_eq!(elbow_select(&curve).unwrap(), 2);
    }

    #[test]
    fn elbow_scale_invariant() {
        let base = vec![100.0, 10.0, 9.0, 8.5, 8.0];
        let curve = ElbowCurve {
            k_values: vec![1, 2, 3, 4, 5],
            wcss: base.clone(),
        };
        let scaled = ElbowCurve {
            k_values: vec![1, 2, 3, 4, 5],
            wcss: base.iter().map(|w| w * 1234.5).collect(),
        };
        assert_eq!(
            elbow_select(&curve).unwrap(),
            elbow_select(&scaled).unwrap()
        );
    }

    #[test]
    fn elbow_constant_curve_returns_one() {
        let curve = ElbowCurve {
            k_values: vec![1, 2, 3, 4],
            wcss: vec![5.0; 4],
        };
        assert_eq!(elbow_select(&curve).unwrap(), 1);
    }

    #[test]
    fn elbow_needs_three_points() {
        let curve = ElbowCurve {
            k_values: vec![1, 2],
            wcss: vec![5.0, 1.0],
        };
        assert!(matches!(
            elbow_select(&curve),
            Err(Error::DegenerateCurve { points: 2 })
        ));
    }

    #[test]
    fn elbow_tie_prefers_smaller_k() {
        // Normalized coordinates are exact binary fractions, so all three
        // interior points sit exactly 0.25 below the chord and tie.
        let curve = ElbowCurve {
            k_values: vec![1, 2, 3, 4, 5],
            wcss: vec![4.0, 2.0, 1.0, 0.0, 0.0],
        };
        assert_eq!(elbow_select(&curve).unwrap(), 2);
    }

    #[test]
    fn identical_pixels_cluster_without_panic() {
        let pixels = Array2::from_elem((10, 3), 2.5);
        let fit = kmeans(&pixels, 3, 1, 2).unwrap();
        assert!(fit.wcss.abs() < 1e-18);
    }
}
