//! Raster and table writers for pipeline artifacts, plus the matching
//! single-band readers the reporting front end uses.

use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::ingest::{locate_envi, read_envi, write_envi_band, DataType};
use crate::subclass::Subclass;

/// Off-soil code in the stored subclass raster.
pub const SUBCLASS_OFF_SOIL: i32 = -1;
/// Subclass codes in the stored raster, ordered by mineral content.
pub const SUBCLASS_IMPURITY: i32 = 0;
pub const SUBCLASS_MIDDLE: i32 = 1;
pub const SUBCLASS_MINERAL: i32 = 2;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::IoFailure {
        path: path.to_path_buf(),
        source,
    }
}

/// Write an integer label grid (class indices and sentinels) as a 16-bit
/// raster pair.
pub fn write_label_raster(base: &Path, labels: &Array2<i32>) -> Result<(PathBuf, PathBuf)> {
    check_label_range(labels)?;
    let as_f64 = labels.mapv(|v| v as f64);
    write_envi_band(base, as_f64.view(), DataType::I16)
}

/// Write the per-pixel subclass raster: soil pixels carry their subclass
/// code, everything else [`SUBCLASS_OFF_SOIL`].
pub fn write_subclass_raster(
    base: &Path,
    class_labels: &Array2<i32>,
    soil_locations: &[(usize, usize)],
    subclasses: &[Subclass],
) -> Result<(PathBuf, PathBuf)> {
    if soil_locations.len() != subclasses.len() {
        return Err(Error::LengthMismatch {
            left: soil_locations.len(),
            right: subclasses.len(),
        });
    }
    let mut grid = Array2::from_elem(class_labels.dim(), SUBCLASS_OFF_SOIL);
    for (&(r, c), &label) in soil_locations.iter().zip(subclasses) {
        grid[[r, c]] = match label {
            Subclass::ImpurityRich => SUBCLASS_IMPURITY,
            Subclass::Middle => SUBCLASS_MIDDLE,
            Subclass::MineralRich => SUBCLASS_MINERAL,
        };
    }
    write_label_raster(base, &grid)
}

/// Write a floating-point grid (availability, abundance, residual) as a
/// 32-bit raster pair.
pub fn write_value_raster(base: &Path, values: &ArrayView2<f64>) -> Result<(PathBuf, PathBuf)> {
    write_envi_band(base, values.reborrow(), DataType::F32)
}

/// Read a single-band raster back as a grid. Accepts either half of the
/// stored pair and rejects multi-band cubes.
pub fn read_band_raster(path: &Path) -> Result<Array2<f64>> {
    let (hdr, img) = locate_envi(path)?;
    let cube = read_envi(&hdr, &img)?;
    if cube.bands() != 1 {
        return Err(Error::MalformedHeader {
            path: hdr,
            reason: format!("expected a single-band raster, found {} bands", cube.bands()),
        });
    }
    Ok(cube.data.index_axis(Axis(2), 0).to_owned())
}

/// Write aligned spectra as a CSV table: one row per band, first column the
/// wavelength grid, one named column per spectrum.
pub fn write_signatures_csv(
    path: &Path,
    wavelengths_um: &[f64],
    columns: &[(&str, &[f64])],
) -> Result<()> {
    for (name, values) in columns {
        if values.len() != wavelengths_um.len() {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: wavelengths_um.len(),
            });
        }
        if name.contains(',') {
            return Err(Error::InvalidSpec {
                reason: format!("column name `{name}` must not contain a comma"),
            });
        }
    }
    let mut text = String::from("wavelength_um");
    for (name, _) in columns {
        text.push(',');
        text.push_str(name);
    }
    text.push('\n');
    for (b, wl) in wavelengths_um.iter().enumerate() {
        text.push_str(&wl.to_string());
        for (_, values) in columns {
            text.push(',');
            text.push_str(&values[b].to_string());
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Render a grid as an 8-bit PGM quicklook. Values are scaled linearly from
/// `[lo, hi]` onto 1..=255; values below `lo` (sentinels included) map to 0.
pub fn write_quicklook_pgm(
    path: &Path,
    values: &ArrayView2<f64>,
    lo: f64,
    hi: f64,
) -> Result<()> {
    if !(hi > lo) {
        return Err(Error::InvalidSpec {
            reason: format!("quicklook range needs lo < hi, got [{lo}, {hi}]"),
        });
    }
    let (rows, cols) = values.dim();
    let mut payload = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let v = values[[r, c]];
            payload.push(if v < lo || !v.is_finite() {
                0u8
            } else {
                let t = ((v - lo) / (hi - lo)).min(1.0);
                1 + (t * 254.0).round() as u8
            });
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    write!(f, "P5\n{cols} {rows}\n255\n").map_err(|e| io_err(path, e))?;
    f.write_all(&payload).map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Label grids round-trip through I16; this guards the value range.
pub fn check_label_range(labels: &Array2<i32>) -> Result<()> {
    for &v in labels.iter() {
        if v < i16::MIN as i32 || v > i16::MAX as i32 {
            return Err(Error::InvalidSpec {
                reason: format!("label {v} does not fit a 16-bit raster"),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use tempfile::tempdir;

    #[test]
    fn label_raster_round_trips() {
        use crate::preclassify::{INVALID, UNASSIGNED};
        let dir = tempdir().unwrap();
        let labels = array![[0, 1, UNASSIGNED], [2, INVALID, 1]];
        let base = dir.path().join("classes");
        write_label_raster(&base, &labels).unwrap();
        let back = read_band_raster(&base.with_extension("hdr")).unwrap();
        assert_eq!(back.mapv(|v| v as i32), labels);
        assert!(write_label_raster(&base, &array![[40000]]).is_err());
    }

    #[test]
    fn value_raster_round_trips_at_f32_precision() {
        let dir = tempdir().unwrap();
        let values = array![[0.25, -1.0], [0.875, 0.6]];
        let base = dir.path().join("alpha");
        write_value_raster(&base, &values.view()).unwrap();
        let back = read_band_raster(&base).unwrap();
        for (a, b) in values.iter().zip(back.iter()) {
            assert!((a - b).abs() <= f32::EPSILON as f64 * a.abs().max(1.0));
        }
    }

    #[test]
    fn subclass_raster_encodes_labels() {
        let dir = tempdir().unwrap();
        let class_labels = array![[0, 1], [1, -1]];
        let locations = vec![(0usize, 1usize), (1, 0)];
        let subclasses = vec![Subclass::MineralRich, Subclass::ImpurityRich];
        let base = dir.path().join("subclass");
        write_subclass_raster(&base, &class_labels, &locations, &subclasses).unwrap();
        let back = read_band_raster(&base).unwrap().mapv(|v| v as i32);
        assert_eq!(back[[0, 1]], SUBCLASS_MINERAL);
        assert_eq!(back[[1, 0]], SUBCLASS_IMPURITY);
        assert_eq!(back[[0, 0]], SUBCLASS_OFF_SOIL);
        assert_eq!(back[[1, 1]], SUBCLASS_OFF_SOIL);
    }

    #[test]
    fn signatures_csv_is_column_aligned() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("signatures.csv");
        write_signatures_csv(
            &path,
            &[0.4, 0.5],
            &[("library", &[1.0, 2.0]), ("mineral", &[3.0, 4.0])],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "wavelength_um,library,mineral");
        assert_eq!(lines[1], "0.4,1,3");
        assert_eq!(lines[2], "0.5,2,4");
    }

    #[test]
    fn signatures_csv_rejects_ragged_columns() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("signatures.csv");
        let result = write_signatures_csv(&path, &[0.4, 0.5], &[("library", &[1.0])]);
        assert!(result.is_err());
    }

    #[test]
    fn quicklook_scales_and_zeroes_sentinels() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ql.pgm");
        let values = array![[0.0, 1.0], [-1.0, 0.5]];
        write_quicklook_pgm(&path, &values.view(), 0.0, 1.0).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header_end = bytes.windows(4).position(|w| w == b"255\n").unwrap() + 4;
        let pixels = &bytes[header_end..];
        assert_eq!(pixels.len(), 4);
        assert_eq!(pixels[0], 1);
        assert_eq!(pixels[1], 255);
        assert_eq!(pixels[2], 0);
        assert_eq!(pixels[3], 128);
    }

    #[test]
    fn multi_band_raster_rejected_by_band_reader() {
        use crate::ingest::{write_envi_cube, HyperspectralCube, Interleave, Unit};
        use ndarray::Array3;
        let dir = tempdir().unwrap();
        let cube =
            HyperspectralCube::new(Array3::zeros((2, 2, 3)) + 0.5, None, Unit::Reflectance)
                .unwrap();
        let base = dir.path().join("cube");
        write_envi_cube(&base, &cube, DataType::F32, Interleave::Bsq).unwrap();
        assert!(read_band_raster(&base.with_extension("hdr")).is_err());
    }
}
