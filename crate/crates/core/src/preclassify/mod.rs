//! Unsupervised pre-classification: picks a class count with the elbow
//! heuristic, extracts one candidate endmember per class, and assigns pixels
//! by reciprocal-distance similarity. The output class map drives the
//! downstream mineral analysis, which only ever consumes one class.

pub mod kmeans;
pub mod similarity;
pub mod vca;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::ingest::HyperspectralCube;
pub use kmeans::{elbow_select, kmeans, wcss_curve, ElbowCurve, KmeansFit};
pub use similarity::{gamma_weights, similarity_assign, similarity_assign_with, ASSIGN_THRESHOLD};
pub use vca::{vca, VcaResult};

/// Label for pixels no candidate claims with majority weight.
pub const UNASSIGNED: i32 = -1;
/// Label for pixels that were invalid in the input cube.
pub const INVALID: i32 = -2;

/// Per-pixel class labels on the full scene grid.
#[derive(Debug, Clone)]
pub struct ClassMap {
    /// rows x cols labels: class index, [`UNASSIGNED`] or [`INVALID`].
    pub labels: Array2<i32>,
    pub n_classes: usize,
}

impl ClassMap {
    /// Pixel count per class, indexed by class label.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &label in self.labels.iter() {
            if label >= 0 {
                counts[label as usize] += 1;
            }
        }
        counts
    }

    pub fn unassigned_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == UNASSIGNED).count()
    }

    pub fn invalid_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == INVALID).count()
    }
}

/// Spectra and grid locations of one class's pixels.
#[derive(Debug, Clone)]
pub struct ClassPixels {
    /// pixel x band matrix over the cube's masked-in bands.
    pub matrix: Array2<f64>,
    /// (row, col) of each matrix row.
    pub locations: Vec<(usize, usize)>,
}

/// Pull every pixel of `class` out of the cube.
pub fn isolate_class(
    cube: &HyperspectralCube,
    map: &ClassMap,
    class: usize,
) -> Result<ClassPixels> {
    if map.labels.dim() != (cube.rows(), cube.cols()) {
        return Err(Error::GridMismatch {
            signature: map.labels.len(),
            pixels: cube.rows() * cube.cols(),
        });
    }
    let mut locations = Vec::new();
    for row in 0..cube.rows() {
        for col in 0..cube.cols() {
            if map.labels[[row, col]] == class as i32 {
                locations.push((row, col));
            }
        }
    }
    if locations.is_empty() {
        return Err(Error::EmptyClass {
            class: class.to_string(),
        });
    }
    let bands = cube.masked_bands().len();
    let mut matrix = Array2::zeros((locations.len(), bands));
    for (i, &(row, col)) in locations.iter().enumerate() {
        let pixel = cube.masked_pixel(row, col);
        matrix.row_mut(i).assign(&ndarray::ArrayView1::from(&pixel));
    }
    Ok(ClassPixels { matrix, locations })
}

/// Everything the pre-classification stage produces.
#[derive(Debug, Clone)]
pub struct Preclassification {
    pub elbow: ElbowCurve,
    pub chosen_k: usize,
    pub fit: KmeansFit,
    pub endmembers: VcaResult,
    pub map: ClassMap,
}

/// Knobs for [`preclassify_with`]. [`Default`] matches the plain
/// [`preclassify`] behavior apart from the sizing arguments.
#[derive(Debug, Clone)]
pub struct PreclassifyOptions {
    pub k_max: usize,
    /// Bypass the elbow choice with a fixed class count.
    pub k_override: Option<usize>,
    pub seed: u64,
    pub restarts: usize,
    pub similarity_threshold: f64,
}

impl Default for PreclassifyOptions {
    fn default() -> Self {
        Self {
            k_max: 10,
            k_override: None,
            seed: 0,
            restarts: 8,
            similarity_threshold: ASSIGN_THRESHOLD,
        }
    }
}

/// Run the full pre-classification on a cube: elbow-selected k-means to fix
/// the class count, endmember extraction for the candidates, similarity
/// assignment for the map.
pub fn preclassify(
    cube: &HyperspectralCube,
    k_max: usize,
    seed: u64,
    restarts: usize,
) -> Result<Preclassification> {
    preclassify_with(
        cube,
        &PreclassifyOptions {
            k_max,
            seed,
            restarts,
            ..PreclassifyOptions::default()
        },
    )
}

/// [`preclassify`] with a class-count override and similarity threshold. The
/// elbow curve is still computed and reported when the count is overridden,
/// so run records always show what the data suggested.
pub fn preclassify_with(
    cube: &HyperspectralCube,
    opts: &PreclassifyOptions,
) -> Result<Preclassification> {
    if let Some(k) = opts.k_override {
        if k == 0 {
            return Err(Error::InvalidSpec {
                reason: "class count override must be at least 1".into(),
            });
        }
    }
    let (pixels, locations) = cube.valid_pixel_matrix();
    let curve_max = opts.k_max.max(opts.k_override.unwrap_or(0));
    let curve = wcss_curve(&pixels, curve_max, kmeans::mix_seed(opts.seed, 1), opts.restarts)?;
    let chosen_k = match opts.k_override {
        Some(k) => k,
        None => elbow_select(&curve)?,
    };
    let fit = kmeans(&pixels, chosen_k, kmeans::mix_seed(opts.seed, 2), opts.restarts)?;
    let endmembers = vca(&pixels, chosen_k, kmeans::mix_seed(opts.seed, 3))?;
    let assignment =
        similarity_assign_with(&pixels, &endmembers.endmembers, opts.similarity_threshold)?;

    let mut labels = Array2::from_elem((cube.rows(), cube.cols()), INVALID);
    for (&(row, col), assigned) in locations.iter().zip(assignment.iter()) {
        labels[[row, col]] = match assigned {
            Some(class) => *class as i32,
            None => UNASSIGNED,
        };
    }
    Ok(Preclassification {
        elbow: curve,
        chosen_k,
        fit,
        endmembers,
        map: ClassMap {
            labels,
            n_classes: chosen_k,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Unit;
    use ndarray::Array3;

    /// Cube with three well-separated blobs of distinct spectral shape.
    fn three_blob_cube() -> HyperspectralCube {
        let rows = 12;
        let cols = 12;
        let bands = 8;
        let mut data = Array3::zeros((rows, cols, bands));
        for r in 0..rows {
            for c in 0..cols {
                let jitter = 0.004 * ((r * cols + c) % 3) as f64;
                for b in 0..bands {
                    let t = b as f64;
                    let value = match r {
                        0..=3 => 0.2 + 0.04 * t,
                        4..=7 => 0.9 - 0.05 * t,
                        _ => 0.5 + 0.3 * (0.9 * t).sin(),
                    };
                    data[[r, c, b]] = value + jitter;
                }
            }
        }
        HyperspectralCube::new(data, None, Unit::Reflectance).unwrap()
    }

    #[test]
    fn finds_three_classes_and_labels_grid() {
        let cube = three_blob_cube();
        let out = preclassify(&cube, 6, 42, 4).unwrap();
        assert_eq!(out.chosen_k, 3);
        assert_eq!(out.map.n_classes, 3);
        assert_eq!(out.map.invalid_count(), 0);
        // Every row-block maps to a single label.
        let l0 = out.map.labels[[0, 0]];
        let l1 = out.map.labels[[4, 0]];
        let l2 = out.map.labels[[8, 0]];
        assert!(l0 >= 0 && l1 >= 0 && l2 >= 0);
        assert!(l0 != l1 && l1 != l2 && l0 != l2);
        for c in 0..12 {
            assert_eq!(out.map.labels[[2, c]], l0);
            assert_eq!(out.map.labels[[6, c]], l1);
            assert_eq!(out.map.labels[[10, c]], l2);
        }
    }

    #[test]
    fn isolate_class_returns_all_members() {
        let cube = three_blob_cube();
        let out = preclassify(&cube, 6, 42, 4).unwrap();
        let class = out.map.labels[[5, 5]] as usize;
        let pixels = isolate_class(&cube, &out.map, class).unwrap();
        assert_eq!(pixels.matrix.nrows(), 48);
        assert_eq!(pixels.locations.len(), 48);
        assert!(pixels.locations.contains(&(5, 5)));
    }

    #[test]
    fn isolate_missing_class_errors() {
        let cube = three_blob_cube();
        let out = preclassify(&cube, 6, 42, 4).unwrap();
        match isolate_class(&cube, &out.map, 7) {
            Err(Error::EmptyClass { class }) => assert_eq!(class, "7"),
            other => panic!("expected EmptyClass, got {other:?}"),
        }
    }

    #[test]
    fn invalid_pixels_marked() {
        let mut data = Array3::zeros((4, 4, 5));
        for r in 0..4 {
            for c in 0..4 {
                for b in 0..5 {
                    let t = b as f64;
                    data[[r, c, b]] = if r < 2 { 0.3 + 0.05 * t } else { 0.8 - 0.04 * t };
                }
            }
        }
        data[[0, 0, 2]] = f64::NAN;
        let cube = HyperspectralCube::new(data, None, Unit::Reflectance).unwrap();
        let out = preclassify(&cube, 4, 7, 4).unwrap();
        assert_eq!(out.map.labels[[0, 0]], INVALID);
        assert_eq!(out.map.invalid_count(), 1);
    }

    #[test]
    fn deterministic_across_runs() {
        let cube = three_blob_cube();
        let a = preclassify(&cube, 6, 9, 4).unwrap();
        let b = preclassify(&cube, 6, 9, 4).unwrap();
        assert_eq!(a.map.labels, b.map.labels);
        assert_eq!(a.endmembers.indices, b.endmembers.indices);
    }

    #[test]
    fn class_count_override_bypasses_elbow() {
        let cube = three_blob_cube();
        let out = preclassify_with(
            &cube,
            &PreclassifyOptions {
                k_max: 6,
                k_override: Some(2),
                seed: 42,
                restarts: 4,
                ..PreclassifyOptions::default()
            },
        )
        .unwrap();
        assert_eq!(out.chosen_k, 2);
        assert_eq!(out.map.n_classes, 2);
        // The curve is still reported over the full range.
        assert_eq!(out.elbow.wcss.len(), 6);
        let zero = PreclassifyOptions {
            k_override: Some(0),
            ..PreclassifyOptions::default()
        };
        assert!(preclassify_with(&cube, &zero).is_err());
    }
}
