//! Cube ingestion: ENVI raster I/O, radiance-to-reflectance conversion,
//! band masking and laboratory signature loading.

mod envi;
mod library;
mod radiometric;

pub use envi::{locate_envi, read_envi, write_envi_band, write_envi_cube, DataType, Interleave};
pub use library::load_library_signature;
pub use radiometric::{to_reflectance, ConversionStats, RadiometricParams};

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};

/// Physical interpretation of the values stored in a cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    /// Scaled at-sensor radiance, as delivered (integer counts or floats).
    Radiance,
    /// Top-of-atmosphere reflectance, dimensionless.
    Reflectance,
}

/// A hyperspectral image cube indexed `[row, col, band]`.
///
/// All bands stay in memory; `band_mask` marks which of them downstream
/// stages are allowed to read. Masked-out bands keep their stored values so
/// wavelength bookkeeping never shifts.
#[derive(Debug, Clone)]
pub struct HyperspectralCube {
    pub data: Array3<f64>,
    /// Band centers in micrometers when the source header declared them.
    pub wavelengths_um: Option<Vec<f64>>,
    /// `true` = band participates in the pipeline.
    pub band_mask: Vec<bool>,
    /// `false` marks pixels with non-finite samples in any usable band.
    pub valid: Array2<bool>,
    pub unit: Unit,
}

impl HyperspectralCube {
    pub fn new(data: Array3<f64>, wavelengths_um: Option<Vec<f64>>, unit: Unit) -> Result<Self> {
        let (rows, cols, bands) = data.dim();
        if rows == 0 || cols == 0 || bands == 0 {
            return Err(Error::InvalidSpec {
                reason: "cube has a zero-sized dimension".into(),
            });
        }
        if let Some(wl) = &wavelengths_um {
            if wl.len() != bands {
                return Err(Error::LengthMismatch {
                    left: wl.len(),
                    right: bands,
                });
            }
        }
        let mut valid = Array2::from_elem((rows, cols), true);
        for r in 0..rows {
            for c in 0..cols {
                if (0..bands).any(|b| !data[[r, c, b]].is_finite()) {
                    valid[[r, c]] = false;
                }
            }
        }
        Ok(Self {
            data,
            wavelengths_um,
            band_mask: vec![true; bands],
            valid,
            unit,
        })
    }

    pub fn rows(&self) -> usize {
        self.data.dim().0
    }

    pub fn cols(&self) -> usize {
        self.data.dim().1
    }

    pub fn bands(&self) -> usize {
        self.data.dim().2
    }

    /// Indices of bands currently masked in, in ascending order.
    pub fn masked_bands(&self) -> Vec<usize> {
        self.band_mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i)
            .collect()
    }

    /// Wavelengths of the masked-in bands, when the cube has a grid.
    pub fn masked_wavelengths(&self) -> Option<Vec<f64>> {
        self.wavelengths_um
            .as_ref()
            .map(|wl| self.masked_bands().iter().map(|&b| wl[b]).collect())
    }

    /// Band vector of one pixel restricted to masked-in bands.
    pub fn masked_pixel(&self, row: usize, col: usize) -> Vec<f64> {
        self.masked_bands()
            .iter()
            .map(|&b| self.data[[row, col, b]])
            .collect()
    }

    /// All valid pixels as a dense matrix (pixel x masked band) plus their
    /// grid locations, in row-major scan order.
    pub fn valid_pixel_matrix(&self) -> (Array2<f64>, Vec<(usize, usize)>) {
        let bands = self.masked_bands();
        let mut locations = Vec::new();
        for r in 0..self.rows() {
            for c in 0..self.cols() {
                if self.valid[[r, c]] {
                    locations.push((r, c));
                }
            }
        }
        let mut matrix = Array2::zeros((locations.len(), bands.len()));
        for (i, &(r, c)) in locations.iter().enumerate() {
            for (j, &b) in bands.iter().enumerate() {
                matrix[[i, j]] = self.data[[r, c, b]];
            }
        }
        (matrix, locations)
    }

    /// Drop the bands named by `spec` ("0-6,57-75,224" style, inclusive).
    ///
    /// Ranges may overlap; dropping an already dropped band is a no-op.
    pub fn apply_band_mask(&mut self, spec: &str) -> Result<()> {
        let drops = parse_band_mask(spec, self.bands())?;
        for b in drops {
            self.band_mask[b] = false;
        }
        if self.band_mask.iter().all(|&m| !m) {
            return Err(Error::InvalidSpec {
                reason: "band mask drops every band".into(),
            });
        }
        Ok(())
    }

    /// A copy with the masked-out bands physically removed, for writing
    /// self-contained cubes. Any band mask set on `self` is folded in along
    /// with `spec`.
    pub fn without_bands(&self, spec: &str) -> Result<HyperspectralCube> {
        let mut pruned = self.clone();
        pruned.apply_band_mask(spec)?;
        let keep = pruned.masked_bands();
        let (rows, cols) = (self.rows(), self.cols());
        let mut data = Array3::zeros((rows, cols, keep.len()));
        for r in 0..rows {
            for c in 0..cols {
                for (j, &b) in keep.iter().enumerate() {
                    data[[r, c, j]] = self.data[[r, c, b]];
                }
            }
        }
        let wavelengths = self
            .wavelengths_um
            .as_ref()
            .map(|wl| keep.iter().map(|&b| wl[b]).collect());
        HyperspectralCube::new(data, wavelengths, self.unit)
    }
}

/// Parse a drop-list band mask spec into explicit band indices.
pub fn parse_band_mask(spec: &str, bands: usize) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => {
                let lo = parse_band_index(a, spec)?;
                let hi = parse_band_index(b, spec)?;
                if lo > hi {
                    return Err(Error::InvalidSpec {
                        reason: format!("band mask `{spec}`: descending range {lo}-{hi}"),
                    });
                }
                (lo, hi)
            }
            None => {
                let b = parse_band_index(part, spec)?;
                (b, b)
            }
        };
        if hi >= bands {
            return Err(Error::RangeOutOfBounds { lo, hi, bands });
        }
        out.extend(lo..=hi);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn parse_band_index(text: &str, spec: &str) -> Result<usize> {
    text.trim().parse().map_err(|_| Error::InvalidSpec {
        reason: format!("band mask `{spec}`: `{text}` is not a band index"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn small_cube() -> HyperspectralCube {
        let data = Array3::from_shape_fn((2, 2, 6), |(r, c, b)| (r * 12 + c * 6 + b) as f64);
        HyperspectralCube::new(data, Some(vec![0.4, 0.5, 0.6, 0.7, 0.8, 0.9]), Unit::Radiance)
            .unwrap()
    }

    #[test]
    fn mask_drops_listed_ranges() {
        let mut cube = small_cube();
        cube.apply_band_mask("0-1,4, 5").unwrap();
        assert_eq!(cube.masked_bands(), vec![2, 3]);
        assert_eq!(cube.masked_wavelengths().unwrap(), vec![0.6, 0.7]);
    }

    #[test]
    fn mask_overlaps_merge() {
        let mut cube = small_cube();
        cube.apply_band_mask("1-3,2-4").unwrap();
        assert_eq!(cube.masked_bands(), vec![0, 5]);
    }

    #[test]
    fn mask_out_of_bounds() {
        let mut cube = small_cube();
        let err = cube.apply_band_mask("4-9").unwrap_err();
        assert!(matches!(
            err,
            Error::RangeOutOfBounds {
                lo: 4,
                hi: 9,
                bands: 6
            }
        ));
    }

    #[test]
    fn mask_cannot_drop_everything() {
        let mut cube = small_cube();
        assert!(cube.apply_band_mask("0-5").is_err());
    }

    #[test]
    fn without_bands_removes_them_physically() {
        let cube = small_cube();
        let pruned = cube.without_bands("0-1,5").unwrap();
        assert_eq!(pruned.bands(), 3);
        assert_eq!(pruned.wavelengths_um, Some(vec![0.6, 0.7, 0.8]));
        assert_eq!(pruned.data[[1, 1, 0]], cube.data[[1, 1, 2]]);
        assert_eq!(pruned.data[[0, 1, 2]], cube.data[[0, 1, 4]]);
        assert_eq!(pruned.unit, cube.unit);
        // Folds in an existing mask.
        let mut masked = small_cube();
        masked.apply_band_mask("0").unwrap();
        let pruned = masked.without_bands("5").unwrap();
        assert_eq!(pruned.bands(), 4);
        assert_eq!(pruned.wavelengths_um, Some(vec![0.5, 0.6, 0.7, 0.8]));
    }

    #[test]
    fn nan_pixels_are_invalid() {
        let mut data = Array3::zeros((2, 1, 2));
        data.fill(1.0);
        data[[1, 0, 1]] = f64::NAN;
        let cube = HyperspectralCube::new(data, None, Unit::Radiance).unwrap();
        assert!(cube.valid[[0, 0]]);
        assert!(!cube.valid[[1, 0]]);
        let (matrix, locs) = cube.valid_pixel_matrix();
        assert_eq!(matrix.dim(), (1, 2));
        assert_eq!(locs, vec![(0, 0)]);
    }

    #[test]
    fn masked_pixel_follows_mask() {
        let mut cube = small_cube();
        cube.apply_band_mask("0,2-4").unwrap();
        assert_eq!(cube.masked_pixel(1, 1), vec![19.0, 23.0]);
    }
}
