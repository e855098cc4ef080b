//! Fisher discriminant projection of soil pixels onto a single axis.
//!
//! The axis is chosen from the two subclasses so that their projections
//! separate as far as the within-class spread allows. Each pixel's position
//! between the projected representatives then reads off as a relative
//! availability in [0, 1]: 1 at the mineral representative, 0 at the
//! impurity representative.

use nalgebra::{Cholesky, DMatrix, DVector};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::preclassify::ClassPixels;
use crate::subclass::RepresentativePair;

/// Default ridge coefficient for the scatter regularization.
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Soil pixels on the discriminant axis.
#[derive(Debug, Clone)]
pub struct Projection {
    /// Projection of each soil pixel.
    pub t: Vec<f64>,
    /// Projection of the mineral representative.
    pub t_mineral: f64,
    /// Projection of the impurity representative.
    pub t_impurity: f64,
    /// Relative availability of each soil pixel.
    pub ra: Vec<f64>,
}

/// How far apart the two subclasses land on the axis.
#[derive(Debug, Clone, Copy)]
pub struct SeparationReport {
    pub mineral_mean: f64,
    pub impurity_mean: f64,
    /// Absolute distance between the subclass means on the axis.
    pub gap: f64,
    /// The same gap in units of pooled within-subclass standard deviation.
    /// Infinite when both subclasses project to points.
    pub normalized_gap: f64,
}

fn class_mean(pixels: &Array2<f64>) -> DVector<f64> {
    let n = pixels.nrows() as f64;
    let bands = pixels.ncols();
    let mut mean = DVector::zeros(bands);
    for row in pixels.rows() {
        for (b, &v) in row.iter().enumerate() {
            mean[b] += v;
        }
    }
    mean / n
}

fn accumulate_scatter(pixels: &Array2<f64>, mean: &DVector<f64>, scatter: &mut DMatrix<f64>) {
    let bands = pixels.ncols();
    let mut centered = DVector::zeros(bands);
    for row in pixels.rows() {
        for b in 0..bands {
            centered[b] = row[b] - mean[b];
        }
        scatter.ger(1.0, &centered, &centered, 1.0);
    }
}

/// Unit direction maximizing the Fisher criterion between the two pixel sets,
/// oriented so `high` projects above `low`. `ridge` scales the diagonal
/// regularization added to the within-class scatter.
pub fn fisher_direction(high: &Array2<f64>, low: &Array2<f64>, ridge: f64) -> Result<Vec<f64>> {
    if high.nrows() == 0 || low.nrows() == 0 {
        return Err(Error::TooFewPixels { needed: 1, got: 0 });
    }
    if high.ncols() != low.ncols() {
        return Err(Error::LengthMismatch {
            left: high.ncols(),
            right: low.ncols(),
        });
    }
    let bands = high.ncols();
    let mean_high = class_mean(high);
    let mean_low = class_mean(low);
    let delta = &mean_high - &mean_low;
    if delta.norm() == 0.0 {
        return Err(Error::DegenerateRepresentatives);
    }

    let mut scatter = DMatrix::zeros(bands, bands);
    accumulate_scatter(high, &mean_high, &mut scatter);
    accumulate_scatter(low, &mean_low, &mut scatter);

    let trace: f64 = scatter.diagonal().iter().sum();
    let mut lambda = if trace > 0.0 {
        ridge * trace / bands as f64
    } else {
        ridge.max(f64::MIN_POSITIVE)
    };
    for _ in 0..8 {
        let mut regularized = scatter.clone();
        for i in 0..bands {
            regularized[(i, i)] += lambda;
        }
        if let Some(chol) = Cholesky::new(regularized) {
            let mut w = chol.solve(&delta);
            let norm = w.norm();
            if norm > 0.0 && norm.is_finite() {
                w /= norm;
                if w.dot(&delta) < 0.0 {
                    w = -w;
                }
                return Ok(w.iter().copied().collect());
            }
        }
        lambda *= 10.0;
    }
    Err(Error::SingularScatter)
}

/// Fisher criterion of direction `w` for the two pixel sets: squared gap of
/// the projected means over the projected within-class scatter.
pub fn fisher_ratio(high: &Array2<f64>, low: &Array2<f64>, w: &[f64]) -> Result<f64> {
    if high.ncols() != w.len() || low.ncols() != w.len() {
        return Err(Error::LengthMismatch {
            left: high.ncols(),
            right: w.len(),
        });
    }
    let project = |pixels: &Array2<f64>| -> Vec<f64> {
        pixels
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(w).map(|(a, b)| a * b).sum())
            .collect()
    };
    let th = project(high);
    let tl = project(low);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mh = mean(&th);
    let ml = mean(&tl);
    let within: f64 = th.iter().map(|t| (t - mh) * (t - mh)).sum::<f64>()
        + tl.iter().map(|t| (t - ml) * (t - ml)).sum::<f64>();
    let between = (mh - ml) * (mh - ml);
    if within == 0.0 {
        return Ok(if between == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(between / within)
}

/// Project all soil pixels and the representative pair onto `axis` and score
/// relative availability from the projected distances.
pub fn project_soil(
    soil: &ClassPixels,
    pair: &RepresentativePair,
    axis: &[f64],
) -> Result<Projection> {
    let bands = soil.matrix.ncols();
    if axis.len() != bands || pair.mineral.len() != bands || pair.impurity.len() != bands {
        return Err(Error::LengthMismatch {
            left: bands,
            right: axis.len(),
        });
    }
    let dot = |v: &[f64]| -> f64 { v.iter().zip(axis).map(|(a, b)| a * b).sum() };
    let t_mineral = dot(&pair.mineral);
    let t_impurity = dot(&pair.impurity);
    if t_mineral == t_impurity {
        return Err(Error::DegenerateRepresentatives);
    }
    let mut t = Vec::with_capacity(soil.matrix.nrows());
    let mut ra = Vec::with_capacity(soil.matrix.nrows());
    for row in soil.matrix.rows() {
        let ti: f64 = row.iter().zip(axis).map(|(a, b)| a * b).sum();
        let d_mineral = (ti - t_mineral).abs();
        let d_impurity = (ti - t_impurity).abs();
        t.push(ti);
        ra.push(d_impurity / (d_mineral + d_impurity));
    }
    Ok(Projection {
        t,
        t_mineral,
        t_impurity,
        ra,
    })
}

/// Summarize how cleanly the labeled subclasses separate along the axis.
/// `mineral_t` and `impurity_t` are the projections of the pixels in each
/// subclass.
pub fn separation_report(mineral_t: &[f64], impurity_t: &[f64]) -> Result<SeparationReport> {
    if mineral_t.is_empty() || impurity_t.is_empty() {
        return Err(Error::TooFewPixels { needed: 1, got: 0 });
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mineral_mean = mean(mineral_t);
    let impurity_mean = mean(impurity_t);
    let gap = (mineral_mean - impurity_mean).abs();
    let ss = |v: &[f64], m: f64| v.iter().map(|t| (t - m) * (t - m)).sum::<f64>();
    let pooled_var = (ss(mineral_t, mineral_mean) + ss(impurity_t, impurity_mean))
        / (mineral_t.len() + impurity_t.len()) as f64;
    let normalized_gap = if pooled_var == 0.0 {
        if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        gap / pooled_var.sqrt()
    };
    Ok(SeparationReport {
        mineral_mean,
        impurity_mean,
        gap,
        normalized_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subclass::RepresentativeSource;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_hand_solved_two_dim_case() {
        // Within-class scatter diag(2, 1), mean gap (1, 1): the optimal
        // direction is (1, 2)/sqrt(5) with the high class on top.
        let high = array![[2.0, 1.0], [0.0, 1.0], [1.0, 1.0 + 0.5f64.sqrt()], [
            1.0,
            1.0 - 0.5f64.sqrt()
        ]];
        let low = array![[1.0, 0.0], [-1.0, 0.0], [0.0, 0.5f64.sqrt()], [
            0.0,
            -(0.5f64.sqrt())
        ]];
        let w = fisher_direction(&high, &low, 0.0).unwrap();
        let expected = [1.0 / 5.0f64.sqrt(), 2.0 / 5.0f64.sqrt()];
        assert!((w[0] - expected[0]).abs() < 1e-9, "got {w:?}");
        assert!((w[1] - expected[1]).abs() < 1e-9, "got {w:?}");
    }

    #[test]
    fn beats_random_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut high = Array2::zeros((80, 6));
        let mut low = Array2::zeros((80, 6));
        for i in 0..80 {
            for b in 0..6 {
                let spread = 0.2 + 0.1 * b as f64;
                high[[i, b]] = 1.0 + 0.3 * b as f64 + spread * rng.gen_range(-1.0..1.0);
                low[[i, b]] = 0.5 + 0.25 * b as f64 + spread * rng.gen_range(-1.0..1.0);
            }
        }
        let w = fisher_direction(&high, &low, DEFAULT_RIDGE).unwrap();
        let best = fisher_ratio(&high, &low, &w).unwrap();
        for _ in 0..200 {
            let dir: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let dir: Vec<f64> = dir.iter().map(|v| v / norm).collect();
            let ratio = fisher_ratio(&high, &low, &dir).unwrap();
            assert!(ratio <= best * (1.0 + 1e-9));
        }
    }

    #[test]
    fn ridge_rescues_singular_scatter() {
        // No variance along the first coordinate in either class.
        let high = array![[3.0, 0.0], [3.0, 1.0]];
        let low = array![[0.0, 0.0], [0.0, 1.0]];
        let w = fisher_direction(&high, &low, DEFAULT_RIDGE).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-6, "got {w:?}");
        assert!(w[1].abs() < 1e-6, "got {w:?}");
    }

    #[test]
    fn identical_means_rejected() {
        let high = array![[1.0, 2.0], [3.0, 4.0]];
        let low = array![[3.0, 4.0], [1.0, 2.0]];
        assert!(matches!(
            fisher_direction(&high, &low, DEFAULT_RIDGE),
            Err(Error::DegenerateRepresentatives)
        ));
    }

    fn soil_from(rows: Vec<Vec<f64>>) -> ClassPixels {
        let n = rows.len();
        let bands = rows[0].len();
        let mut matrix = Array2::zeros((n, bands));
        for (i, row) in rows.iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                matrix[[i, b]] = v;
            }
        }
        ClassPixels {
            matrix,
            locations: (0..n).map(|i| (0, i)).collect(),
        }
    }

    #[test]
    fn availability_is_one_at_mineral_and_zero_at_impurity() {
        let pair = RepresentativePair {
            mineral: vec![1.0, 1.0],
            impurity: vec![0.0, 0.0],
            source: RepresentativeSource::SubclassMeans,
        };
        let soil = soil_from(vec![
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            vec![0.5, 0.5],
            vec![0.25, 0.25],
        ]);
        let axis = [1.0 / 2.0f64.sqrt(); 2];
        let proj = project_soil(&soil, &pair, &axis).unwrap();
        assert!((proj.ra[0] - 1.0).abs() < 1e-12);
        assert!(proj.ra[1].abs() < 1e-12);
        assert!((proj.ra[2] - 0.5).abs() < 1e-12);
        assert!((proj.ra[3] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn swapped_representatives_complement_availability() {
        let pair = RepresentativePair {
            mineral: vec![2.0, 0.5],
            impurity: vec![0.2, 1.5],
            source: RepresentativeSource::SubclassMeans,
        };
        let swapped = RepresentativePair {
            mineral: pair.impurity.clone(),
            impurity: pair.mineral.clone(),
            source: RepresentativeSource::SubclassMeans,
        };
        let soil = soil_from(vec![vec![1.0, 1.0], vec![1.7, 0.6], vec![0.4, 1.2]]);
        let axis = [0.8, -0.6];
        let a = project_soil(&soil, &pair, &axis).unwrap();
        let b = project_soil(&soil, &swapped, &axis).unwrap();
        for (x, y) in a.ra.iter().zip(b.ra.iter()) {
            assert!((x + y - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_projections_rejected() {
        let pair = RepresentativePair {
            mineral: vec![1.0, 0.0],
            impurity: vec![0.0, 1.0],
            source: RepresentativeSource::SubclassMeans,
        };
        let soil = soil_from(vec![vec![0.5, 0.5]]);
        // Axis orthogonal to the difference of the representatives.
        let axis = [1.0 / 2.0f64.sqrt(); 2];
        assert!(matches!(
            project_soil(&soil, &pair, &axis),
            Err(Error::DegenerateRepresentatives)
        ));
    }

    #[test]
    fn separation_infinite_for_point_classes() {
        let report = separation_report(&[2.0, 2.0], &[0.0, 0.0]).unwrap();
        assert_eq!(report.gap, 2.0);
        assert!(report.normalized_gap.is_infinite());
    }

    #[test]
    fn separation_in_pooled_sigma_units() {
        let mineral = [1.0, 3.0];
        let impurity = [-1.0, -3.0];
        let report = separation_report(&mineral, &impurity).unwrap();
        // Means +-2, pooled variance (2 + 2) / 4 = 1.
        assert!((report.gap - 4.0).abs() < 1e-12);
        assert!((report.normalized_gap - 4.0).abs() < 1e-12);
    }
}
