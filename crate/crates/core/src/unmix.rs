//! Two-endmember linear unmixing with a sum-to-one constraint.
//!
//! The representatives are first refined: instead of the threshold subclass
//! means, only pixels at the extremes of the relative-availability scale
//! contribute, which pulls each representative toward its pure material. The
//! per-pixel abundance then has a closed form: project the pixel onto the
//! segment between the representatives and clamp to [0, 1].

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::preclassify::ClassPixels;
use crate::subclass::{RepresentativePair, RepresentativeSource};

/// Relative-availability cutoff above which pixels refine the mineral
/// representative.
pub const DEFAULT_RA_HIGH: f64 = 0.8;
/// Relative-availability cutoff below which pixels refine the impurity
/// representative.
pub const DEFAULT_RA_LOW: f64 = 0.2;

/// Value marking non-soil pixels in the output grids.
pub const OFF_SOIL: f64 = -1.0;

/// Closed-form constrained least-squares solution for one pixel.
#[derive(Debug, Clone, Copy)]
pub struct AlphaSolution {
    /// Mineral fraction in [0, 1].
    pub alpha: f64,
    /// Euclidean norm of the reconstruction error at `alpha`.
    pub residual: f64,
}

/// Per-pixel abundance and residual on the full scene grid; [`OFF_SOIL`]
/// everywhere outside the soil class.
#[derive(Debug, Clone)]
pub struct AbundanceGrid {
    pub alpha: Array2<f64>,
    pub residual: Array2<f64>,
}

/// Rebuild the representative pair from the relative-availability extremes.
pub fn refine_representatives(
    soil: &ClassPixels,
    ra: &[f64],
    ra_high: f64,
    ra_low: f64,
) -> Result<RepresentativePair> {
    if ra.len() != soil.matrix.nrows() {
        return Err(Error::LengthMismatch {
            left: ra.len(),
            right: soil.matrix.nrows(),
        });
    }
    let bands = soil.matrix.ncols();
    let mut mineral = vec![0.0f64; bands];
    let mut impurity = vec![0.0f64; bands];
    let mut n_high = 0usize;
    let mut n_low = 0usize;
    for (i, &score) in ra.iter().enumerate() {
        let target = if score >= ra_high {
            n_high += 1;
            &mut mineral
        } else if score <= ra_low {
            n_low += 1;
            &mut impurity
        } else {
            continue;
        };
        for (b, acc) in target.iter_mut().enumerate() {
            *acc += soil.matrix[[i, b]];
        }
    }
    if n_high == 0 {
        return Err(Error::EmptyBand { which: "high" });
    }
    if n_low == 0 {
        return Err(Error::EmptyBand { which: "low" });
    }
    for v in mineral.iter_mut() {
        *v /= n_high as f64;
    }
    for v in impurity.iter_mut() {
        *v /= n_low as f64;
    }
    Ok(RepresentativePair {
        mineral,
        impurity,
        source: RepresentativeSource::RefinedRelativeAbundance,
    })
}

/// Best mineral fraction for `spectrum` as a convex combination of the two
/// endmembers, minimizing the Euclidean reconstruction error.
pub fn solve_alpha(spectrum: &[f64], mineral: &[f64], impurity: &[f64]) -> Result<AlphaSolution> {
    if spectrum.len() != mineral.len() || spectrum.len() != impurity.len() {
        return Err(Error::LengthMismatch {
            left: spectrum.len(),
            right: mineral.len().max(impurity.len()),
        });
    }
    let mut dot = 0.0f64;
    let mut norm_sq = 0.0f64;
    for ((s, m), r) in spectrum.iter().zip(mineral).zip(impurity) {
        let diff = m - r;
        dot += (s - r) * diff;
        norm_sq += diff * diff;
    }
    if norm_sq == 0.0 {
        return Err(Error::IdenticalEndmembers);
    }
    let alpha = (dot / norm_sq).clamp(0.0, 1.0);
    Ok(AlphaSolution {
        alpha,
        residual: reconstruction_residual(spectrum, mineral, impurity, alpha),
    })
}

/// Euclidean reconstruction error of `spectrum` at a given mixing fraction.
pub fn reconstruction_residual(
    spectrum: &[f64],
    mineral: &[f64],
    impurity: &[f64],
    alpha: f64,
) -> f64 {
    spectrum
        .iter()
        .zip(mineral)
        .zip(impurity)
        .map(|((s, m), r)| {
            let model = alpha * m + (1.0 - alpha) * r;
            (s - model) * (s - model)
        })
        .sum::<f64>()
        .sqrt()
}

/// Exhaustive search oracle for [`solve_alpha`]: evaluates the residual on a
/// uniform grid over [0, 1] and returns the best grid point.
pub fn grid_search_alpha(
    spectrum: &[f64],
    mineral: &[f64],
    impurity: &[f64],
    steps: usize,
) -> Result<AlphaSolution> {
    if spectrum.len() != mineral.len() || spectrum.len() != impurity.len() {
        return Err(Error::LengthMismatch {
            left: spectrum.len(),
            right: mineral.len().max(impurity.len()),
        });
    }
    if steps < 2 {
        return Err(Error::InvalidSpec {
            reason: "grid search needs at least two steps".into(),
        });
    }
    let norm_sq: f64 = mineral
        .iter()
        .zip(impurity)
        .map(|(m, r)| (m - r) * (m - r))
        .sum();
    if norm_sq == 0.0 {
        return Err(Error::IdenticalEndmembers);
    }
    let mut best = AlphaSolution {
        alpha: 0.0,
        residual: f64::INFINITY,
    };
    for i in 0..steps {
        let alpha = i as f64 / (steps - 1) as f64;
        let residual = reconstruction_residual(spectrum, mineral, impurity, alpha);
        if residual < best.residual {
            best = AlphaSolution { alpha, residual };
        }
    }
    Ok(best)
}

/// Solve every soil pixel and scatter the results onto the scene grid.
pub fn abundance_map(
    rows: usize,
    cols: usize,
    soil: &ClassPixels,
    pair: &RepresentativePair,
) -> Result<AbundanceGrid> {
    let mut alpha = Array2::from_elem((rows, cols), OFF_SOIL);
    let mut residual = Array2::from_elem((rows, cols), OFF_SOIL);
    for (i, &(row, col)) in soil.locations.iter().enumerate() {
        if row >= rows || col >= cols {
            return Err(Error::GridMismatch {
                signature: rows * cols,
                pixels: row * cols + col,
            });
        }
        let pixel: Vec<f64> = soil.matrix.row(i).to_vec();
        let solved = solve_alpha(&pixel, &pair.mineral, &pair.impurity)?;
        alpha[[row, col]] = solved.alpha;
        residual[[row, col]] = solved.residual;
    }
    Ok(AbundanceGrid { alpha, residual })
}
