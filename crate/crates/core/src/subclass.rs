//! Splits the soil class into mineral-rich and impurity-rich subclasses.
//!
//! Each soil pixel is scored by its correlation against the laboratory
//! signature of the target mineral. The split points are not fixed numbers:
//! they are the correlations of the two extreme endmembers found inside the
//! soil class itself, so the rule adapts to however pure the scene actually
//! gets. Pixels between the thresholds stay unlabeled and take no part in
//! forming the subclass representatives.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::preclassify::{vca, ClassPixels};
use crate::spectra::pearson_correlation;

/// Correlation bounds taken from the soil class's own extremes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubclassThresholds {
    pub lower: f64,
    pub upper: f64,
}

/// Subclass label for one soil pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subclass {
    MineralRich,
    ImpurityRich,
    Middle,
}

/// How a representative pair was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepresentativeSource {
    SubclassMeans,
    RefinedRelativeAbundance,
}

/// Band-wise mineral and impurity representative spectra.
#[derive(Debug, Clone)]
pub struct RepresentativePair {
    pub mineral: Vec<f64>,
    pub impurity: Vec<f64>,
    pub source: RepresentativeSource,
}

/// Correlate every soil pixel against the signature. Pixels with constant
/// spectra have no defined correlation and come back as `None`.
pub fn correlate_soil(soil: &ClassPixels, signature: &[f64]) -> Result<Vec<Option<f64>>> {
    if soil.matrix.ncols() != signature.len() {
        return Err(Error::GridMismatch {
            signature: signature.len(),
            pixels: soil.matrix.ncols(),
        });
    }
    let rows: Vec<_> = soil.matrix.rows().into_iter().collect();
    Ok(rows
        .par_iter()
        .map(|pixel| {
            let pixel: Vec<f64> = pixel.to_vec();
            pearson_correlation(&pixel, signature).ok()
        })
        .collect())
}

/// Derive the correlation thresholds from the soil class itself: extract its
/// two extreme endmembers and take their signature correlations as the
/// bounds.
pub fn derive_thresholds(
    soil: &ClassPixels,
    signature: &[f64],
    seed: u64,
) -> Result<SubclassThresholds> {
    let extremes = vca(&soil.matrix, 2, seed)?;
    let mut bounds = [0.0f64; 2];
    for (i, bound) in bounds.iter_mut().enumerate() {
        let endmember: Vec<f64> = extremes.endmembers.row(i).to_vec();
        *bound = pearson_correlation(&endmember, signature)?;
    }
    Ok(SubclassThresholds {
        lower: bounds[0].min(bounds[1]),
        upper: bounds[0].max(bounds[1]),
    })
}

/// Label each soil pixel by where its correlation falls. Only strict
/// exceedance counts; pixels on or between the thresholds, and pixels without
/// a defined correlation, stay in the middle.
pub fn label_subclasses(
    correlations: &[Option<f64>],
    thresholds: SubclassThresholds,
) -> Vec<Subclass> {
    correlations
        .iter()
        .map(|r| match r {
            Some(r) if *r > thresholds.upper => Subclass::MineralRich,
            Some(r) if *r < thresholds.lower => Subclass::ImpurityRich,
            _ => Subclass::Middle,
        })
        .collect()
}

/// Band-wise means of the two labeled subclasses.
pub fn mean_representatives(
    soil: &ClassPixels,
    labels: &[Subclass],
) -> Result<RepresentativePair> {
    let bands = soil.matrix.ncols();
    let mut mineral = vec![0.0f64; bands];
    let mut impurity = vec![0.0f64; bands];
    let mut n_mineral = 0usize;
    let mut n_impurity = 0usize;
    for (i, label) in labels.iter().enumerate() {
        let target = match label {
            Subclass::MineralRich => {
                n_mineral += 1;
                &mut mineral
            }
            Subclass::ImpurityRich => {
                n_impurity += 1;
                &mut impurity
            }
            Subclass::Middle => continue,
        };
        for (b, acc) in target.iter_mut().enumerate() {
            *acc += soil.matrix[[i, b]];
        }
    }
    if n_mineral == 0 {
        return Err(Error::EmptySubclass {
            which: "mineral-rich",
        });
    }
    if n_impurity == 0 {
        return Err(Error::EmptySubclass {
            which: "impurity-rich",
        });
    }
    for v in mineral.iter_mut() {
        *v /= n_mineral as f64;
    }
    for v in impurity.iter_mut() {
        *v /= n_impurity as f64;
    }
    Ok(RepresentativePair {
        mineral,
        impurity,
        source: RepresentativeSource::SubclassMeans,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn class_pixels(rows: Vec<Vec<f64>>) -> ClassPixels {
        let n = rows.len();
        let bands = rows[0].len();
        let mut matrix = Array2::zeros((n, bands));
        for (i, row) in rows.iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                matrix[[i, b]] = v;
            }
        }
        let locations = (0..n).map(|i| (0, i)).collect();
        ClassPixels { matrix, locations }
    }

    #[test]
    fn correlations_match_direct_computation() {
        let soil = class_pixels(vec![
            vec![1.0, 2.0, 3.0],
            vec![3.0, 2.0, 1.0],
            vec![1.0, 2.0, 3.5],
        ]);
        let signature = [1.0, 2.0, 3.0];
        let got = correlate_soil(&soil, &signature).unwrap();
        assert!((got[0].unwrap() - 1.0).abs() < 1e-12);
        assert!((got[1].unwrap() + 1.0).abs() < 1e-12);
        assert!((got[2].unwrap() - 0.9933992677987828).abs() < 1e-12);
    }

    #[test]
    fn constant_pixel_has_no_correlation() {
        let soil = class_pixels(vec![vec![2.0, 2.0, 2.0], vec![1.0, 2.0, 3.0]]);
        let got = correlate_soil(&soil, &[1.0, 2.0, 3.0]).unwrap();
        assert!(got[0].is_none());
        assert!(got[1].is_some());
    }

    #[test]
    fn grid_mismatch_rejected() {
        let soil = class_pixels(vec![vec![1.0, 2.0]]);
        assert!(matches!(
            correlate_soil(&soil, &[1.0, 2.0, 3.0]),
            Err(Error::GridMismatch {
                signature: 3,
                pixels: 2
            })
        ));
    }

    #[test]
    fn labels_follow_strict_thresholds() {
        let thresholds = SubclassThresholds {
            lower: 0.3,
            upper: 0.8,
        };
        let got = label_subclasses(
            &[
                Some(0.9),
                Some(0.8),
                Some(0.5),
                Some(0.3),
                Some(0.1),
                None,
            ],
            thresholds,
        );
        assert_eq!(
            got,
            vec![
                Subclass::MineralRich,
                Subclass::Middle,
                Subclass::Middle,
                Subclass::Middle,
                Subclass::ImpurityRich,
                Subclass::Middle,
            ]
        );
    }

    #[test]
    fn thresholds_span_the_extremes() {
        // Mixtures of a rising and a falling spectrum; the extremes are the
        // purest pixels present, so their correlations bound everyone else's.
        let signature = [0.1, 0.3, 0.5, 0.7, 0.9];
        let falling = [0.9, 0.6, 0.5, 0.35, 0.2];
        let mut rows = Vec::new();
        for i in 0..=10 {
            let alpha = i as f64 / 10.0;
            rows.push(
                signature
                    .iter()
                    .zip(&falling)
                    .map(|(m, f)| alpha * m + (1.0 - alpha) * f)
                    .collect(),
            );
        }
        let soil = class_pixels(rows);
        let thresholds = derive_thresholds(&soil, &signature, 5).unwrap();
        let correlations = correlate_soil(&soil, &signature).unwrap();
        for r in correlations.iter().flatten() {
            assert!(*r >= thresholds.lower - 1e-12);
            assert!(*r <= thresholds.upper + 1e-12);
        }
        assert!(thresholds.lower < 0.0);
        assert!(thresholds.upper > 0.99);
    }

    #[test]
    fn representatives_are_subclass_means() {
        let soil = class_pixels(vec![
            vec![1.0, 2.0],
            vec![3.0, 4.0],
            vec![10.0, 20.0],
            vec![5.0, 5.0],
        ]);
        let labels = [
            Subclass::MineralRich,
            Subclass::MineralRich,
            Subclass::ImpurityRich,
            Subclass::Middle,
        ];
        let pair = mean_representatives(&soil, &labels).unwrap();
        assert_eq!(pair.mineral, vec![2.0, 3.0]);
        assert_eq!(pair.impurity, vec![10.0, 20.0]);
        assert_eq!(pair.source, RepresentativeSource::SubclassMeans);
    }

    #[test]
    fn empty_subclass_is_an_error() {
        let soil = class_pixels(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let labels = [Subclass::MineralRich, Subclass::Middle];
        match mean_representatives(&soil, &labels) {
            Err(Error::EmptySubclass {
                which: "impurity-rich",
            }) => {}
            other => panic!("expected EmptySubclass, got {other:?}"),
        }
    }
}
