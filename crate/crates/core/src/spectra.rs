//! Spectral vector primitives: signatures on a wavelength grid and the small
//! set of vector operations every later stage leans on.
//!
//! Pixel spectra are plain `Vec<f64>` band vectors; only named library or
//! representative spectra carry their wavelength grid around.

use crate::error::{Error, Result};

/// A labelled spectrum sampled on a strictly increasing wavelength grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSignature {
    pub label: String,
    /// Band centers in micrometers, strictly increasing.
    pub wavelengths_um: Vec<f64>,
    pub values: Vec<f64>,
}

/// One pixel's band vector. Interpretation (radiance or reflectance) is
/// carried by the cube it came from.
pub type PixelVector = Vec<f64>;

impl SpectralSignature {
    pub fn new(
        label: impl Into<String>,
        wavelengths_um: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if wavelengths_um.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: wavelengths_um.len(),
                right: values.len(),
            });
        }
        for pair in wavelengths_um.windows(2) {
            if !(pair[1] > pair[0]) {
                return Err(Error::InvalidSpec {
                    reason: format!(
                        "wavelength grid not strictly increasing near {} um",
                        pair[0]
                    ),
                });
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec {
                reason: "signature contains a non-finite value".into(),
            });
        }
        Ok(Self {
            label: label.into(),
            wavelengths_um,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Scale `v` to unit Euclidean length.
pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Euclidean distance between two band vectors of equal length.
pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Pearson correlation coefficient between two equal-length samples.
///
/// Returns a value in [-1, 1]; fails when either sample is constant.
pub fn pearson_correlation(x: &[f64], s: &[f64]) -> Result<f64> {
    if x.len() != s.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: s.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::ZeroVariance);
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let ms = s.iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut sss = 0.0;
    let mut sxs = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let ds = s[i] - ms;
        sxx += dx * dx;
        sss += ds * ds;
        sxs += dx * ds;
    }
    if sxx == 0.0 || sss == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxs / (sxx * sss).sqrt()).clamp(-1.0, 1.0))
}

/// Resample a signature onto `target_um` by piecewise-linear interpolation.
///
/// Every target wavelength must fall inside the source support; offenders are
/// reported so the caller can extend its band mask instead of extrapolating.
/// Target points that coincide with source nodes reproduce the node values
/// exactly.
pub fn resample_to_grid(sig: &SpectralSignature, target_um: &[f64]) -> Result<SpectralSignature> {
    let wl = &sig.wavelengths_um;
    if wl.is_empty() {
        return Err(Error::OutOfRangeBand {
            indices: (0..target_um.len()).collect(),
        });
    }
    let (lo, hi) = (wl[0], wl[wl.len() - 1]);
    let outside: Vec<usize> = target_um
        .iter()
        .enumerate()
        .filter(|(_, &t)| t < lo || t > hi)
        .map(|(i, _)| i)
        .collect();
    if !outside.is_empty() {
        return Err(Error::OutOfRangeBand { indices: outside });
    }

    let mut values = Vec::with_capacity(target_um.len());
    for &t in target_um {
        // partition_point gives the first node strictly greater than t, so
        // idx-1 and idx bracket t; exact hits take the node value directly.
        let idx = wl.partition_point(|&w| w <= t);
        if idx == 0 {
            values.push(sig.values[0]);
        } else if wl[idx - 1] == t || idx == wl.len() {
            values.push(sig.values[idx - 1]);
        } else {
            let (w0, w1) = (wl[idx - 1], wl[idx]);
            let frac = (t - w0) / (w1 - w0);
            values.push(sig.values[idx - 1] * (1.0 - frac) + sig.values[idx] * frac);
        }
    }
    SpectralSignature::new(sig.label.clone(), target_um.to_vec(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_unit_length() {
        let v = l2_normalize(&[3.0, 4.0]).unwrap();
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn normalize_rejects_zero() {
        assert!(matches!(l2_normalize(&[0.0, 0.0]), Err(Error::ZeroVector)));
    }

    #[test]
    fn distance_matches_hand_value() {
        let d = euclidean_distance(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert!((d - 14.0_f64.sqrt()).abs() < 1e-12, "got {d}");
    }

    #[test]
    fn distance_checks_length() {
        assert!(matches!(
            euclidean_distance(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn pearson_matches_hand_value() {
        let r = pearson_correlation(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.5]).unwrap();
        assert!((r - 0.9933992677987828).abs() < 1e-12, "got {r}");
    }

    #[test]
    fn pearson_perfect_on_identical() {
        let r = pearson_correlation(&[1.0, 5.0, 2.0], &[1.0, 5.0, 2.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pearson_rejects_constant() {
        assert!(matches!(
            pearson_correlation(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn pearson_sign_flip_on_negation() {
        let x = [0.3, 1.2, -0.7, 2.0];
        let s = [1.0, 0.4, 0.9, -1.3];
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let a = pearson_correlation(&x, &s).unwrap();
        let b = pearson_correlation(&x, &neg).unwrap();
        assert!((a + b).abs() < 1e-14);
    }

    #[test]
    fn resample_midpoint() {
        let sig = SpectralSignature::new("s", vec![1.0, 2.0], vec![10.0, 20.0]).unwrap();
        let out = resample_to_grid(&sig, &[1.5]).unwrap();
        assert!((out.values[0] - 15.0).abs() < 1e-12);
    }

    #[test]
    fn resample_exact_at_nodes() {
        let sig =
            SpectralSignature::new("s", vec![0.4, 0.5, 0.7], vec![1.0, -2.0, 0.25]).unwrap();
        let out = resample_to_grid(&sig, &[0.4, 0.5, 0.7]).unwrap();
        assert_eq!(out.values, sig.values);
    }

    #[test]
    fn resample_flags_out_of_support() {
        let sig = SpectralSignature::new("s", vec![0.4, 2.5], vec![0.0, 1.0]).unwrap();
        let err = resample_to_grid(&sig, &[0.3, 0.5, 2.6]).unwrap_err();
        match err {
            Error::OutOfRangeBand { indices } => assert_eq!(indices, vec![0, 2]),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn signature_rejects_decreasing_grid() {
        assert!(SpectralSignature::new("s", vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
    }
}
