//! Laboratory reference signature loading.
//!
//! Libraries are two-column CSV files, `wavelength_um,reflectance`, one
//! sample per row in ascending wavelength order. Rows with an empty or NaN
//! reflectance (unmeasured channels) are dropped and counted.

use std::path::Path;

use crate::error::{Error, Result};
use crate::spectra::SpectralSignature;

/// Load a signature; returns it together with the number of dropped rows.
/// The file stem becomes the signature label.
pub fn load_library_signature(path: &Path) -> Result<(SpectralSignature, usize)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::IoFailure {
        path: path.to_path_buf(),
        source,
    })?;

    let mut wavelengths = Vec::new();
    let mut values = Vec::new();
    let mut dropped = 0usize;
    let mut saw_header = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if !saw_header {
            saw_header = true;
            let normalized = line.to_ascii_lowercase().replace(' ', "");
            if normalized == "wavelength_um,reflectance" {
                continue;
            }
            // No header row; fall through and parse it as data.
        }
        let mut parts = line.split(',');
        let wl_text = parts.next().unwrap_or("").trim();
        let val_text = parts.next().unwrap_or("").trim();
        let wl: f64 = wl_text.parse().map_err(|_| Error::MalformedConfig {
            path: path.to_path_buf(),
            line: idx + 1,
            reason: format!("`{wl_text}` is not a wavelength"),
        })?;
        if val_text.is_empty() || val_text.eq_ignore_ascii_case("nan") {
            dropped += 1;
            continue;
        }
        let val: f64 = val_text.parse().map_err(|_| Error::MalformedConfig {
            path: path.to_path_buf(),
            line: idx + 1,
            reason: format!("`{val_text}` is not a reflectance value"),
        })?;
        if val.is_nan() {
            dropped += 1;
            continue;
        }
        if let Some(&prev) = wavelengths.last() {
            if wl <= prev {
                return Err(Error::NonMonotonicWavelengths {
                    path: path.to_path_buf(),
                    row: idx + 1,
                });
            }
        }
        wavelengths.push(wl);
        values.push(val);
    }

    if wavelengths.is_empty() {
        return Err(Error::EmptyLibrary {
            path: path.to_path_buf(),
        });
    }

    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "library".into());
    Ok((SpectralSignature::new(label, wavelengths, values)?, dropped))
}
