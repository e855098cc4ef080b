//! Reciprocal-distance similarity weights and the class assignment built on
//! them. A pixel joins a class only when its weight for that class clears 0.5,
//! i.e. when it is unambiguously closer to that candidate than to all others
//! combined.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Weight a pixel must exceed to be assigned to a class.
pub const ASSIGN_THRESHOLD: f64 = 0.5;

/// Normalized reciprocal-distance weights for one pixel against each
/// candidate. A zero distance makes that candidate a point mass. Ties between
/// several zero distances split the mass equally.
pub fn gamma_weights(distances: &[f64]) -> Result<Vec<f64>> {
    if distances.is_empty() {
        return Err(Error::InvalidSpec {
            reason: "similarity weights need at least one candidate".into(),
        });
    }
    if let Some(&bad) = distances.iter().find(|&&d| !d.is_finite() || d < 0.0) {
        return Err(Error::InvalidSpec {
            reason: format!("distances must be finite and non-negative, got {bad}"),
        });
    }
    let zeros = distances.iter().filter(|&&d| d == 0.0).count();
    if zeros > 0 {
        let share = 1.0 / zeros as f64;
        return Ok(distances
            .iter()
            .map(|&d| if d == 0.0 { share } else { 0.0 })
            .collect());
    }
    let recip: Vec<f64> = distances.iter().map(|&d| 1.0 / d).collect();
    let total: f64 = recip.iter().sum();
    Ok(recip.into_iter().map(|r| r / total).collect())
}

/// Assign each pixel (row of `pixels`) to the candidate (row of `candidates`)
/// whose weight exceeds [`ASSIGN_THRESHOLD`], or `None` when no candidate
/// dominates.
pub fn similarity_assign(
    pixels: &Array2<f64>,
    candidates: &Array2<f64>,
) -> Result<Vec<Option<usize>>> {
    similarity_assign_with(pixels, candidates, ASSIGN_THRESHOLD)
}

/// [`similarity_assign`] with an explicit dominance threshold. Values at or
/// below the default keep the "closer than all others combined" reading;
/// anything outside (0, 1) is rejected.
pub fn similarity_assign_with(
    pixels: &Array2<f64>,
    candidates: &Array2<f64>,
    threshold: f64,
) -> Result<Vec<Option<usize>>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidSpec {
            reason: format!("similarity threshold must lie in (0, 1), got {threshold}"),
        });
    }
    if candidates.nrows() == 0 {
        return Err(Error::InvalidSpec {
            reason: "similarity assignment needs at least one candidate".into(),
        });
    }
    if pixels.ncols() != candidates.ncols() {
        return Err(Error::LengthMismatch {
            left: pixels.ncols(),
            right: candidates.ncols(),
        });
    }
    let rows: Vec<Option<usize>> = pixels
        .rows()
        .into_iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|pixel| {
            let distances: Vec<f64> = candidates
                .rows()
                .into_iter()
                .map(|cand| {
                    pixel
                        .iter()
                        .zip(cand.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect();
            let weights = gamma_weights(&distances).expect("distances are finite");
            weights
                .iter()
                .enumerate()
                .find(|(_, &w)| w > threshold)
                .map(|(i, _)| i)
        })
        .collect();
    Ok(rows)
}
