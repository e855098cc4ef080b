//! Top-of-atmosphere reflectance conversion.
//!
//! Stored values are scaled radiance: dividing by the per-band
//! `radiance_scale` recovers physical radiance L, and reflectance follows as
//!
//! ```text
//! rho = pi * L * d^2 / (ESUN * cos(theta_s))
//! ```
//!
//! with d the Earth-Sun distance in AU, ESUN the band's mean solar
//! exo-atmospheric irradiance and theta_s the solar zenith angle.

use std::f64::consts::PI;
use std::path::Path;

use super::{HyperspectralCube, Unit};
use crate::config::FlatConfig;
use crate::error::{Error, Result};

/// Scene acquisition geometry plus per-band calibration tables.
#[derive(Debug, Clone)]
pub struct RadiometricParams {
    pub earth_sun_distance_au: f64,
    pub solar_zenith_deg: f64,
    /// Mean solar irradiance per band (W m^-2 um^-1); NaN = not available.
    pub esun: Vec<f64>,
    /// Divisor turning stored counts into radiance, per band.
    pub radiance_scale: Vec<f64>,
}

impl RadiometricParams {
    /// Uniform tables, mostly for synthetic work.
    pub fn uniform(
        earth_sun_distance_au: f64,
        solar_zenith_deg: f64,
        esun: f64,
        scale: f64,
        bands: usize,
    ) -> Self {
        Self {
            earth_sun_distance_au,
            solar_zenith_deg,
            esun: vec![esun; bands],
            radiance_scale: vec![scale; bands],
        }
    }

    /// Load from a flat config file.
    ///
    /// Keys: `earth_sun_distance`, `solar_zenith_deg`, one of `esun_csv`
    /// (a `band,esun` table) or `esun_constant`, and optionally
    /// `radiance_scale` as `lo-hi:value` ranges (default divisor 1).
    pub fn from_config(cfg: &FlatConfig, bands: usize) -> Result<Self> {
        let d = cfg
            .get_f64("earth_sun_distance")?
            .ok_or_else(|| Error::InvalidSpec {
                reason: format!("{}: missing earth_sun_distance", cfg.path().display()),
            })?;
        let zenith = cfg
            .get_f64("solar_zenith_deg")?
            .ok_or_else(|| Error::InvalidSpec {
                reason: format!("{}: missing solar_zenith_deg", cfg.path().display()),
            })?;

        let esun = if let Some(path) = cfg.get_path("esun_csv") {
            load_esun_csv(&path, bands)?
        } else if let Some(value) = cfg.get_f64("esun_constant")? {
            vec![value; bands]
        } else {
            vec![f64::NAN; bands]
        };

        let mut radiance_scale = vec![1.0; bands];
        if let Some(spec) = cfg.get("radiance_scale") {
            apply_scale_spec(spec, &mut radiance_scale)?;
        }

        let params = Self {
            earth_sun_distance_au: d,
            solar_zenith_deg: zenith,
            esun,
            radiance_scale,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.earth_sun_distance_au;
        if !(0.9..=1.1).contains(&d) {
            return Err(Error::InvalidSpec {
                reason: format!("earth-sun distance {d} AU is outside the plausible 0.9-1.1 range"),
            });
        }
        if self.solar_zenith_deg < 0.0 || !self.solar_zenith_deg.is_finite() {
            return Err(Error::InvalidSpec {
                reason: format!("solar zenith {} deg is invalid", self.solar_zenith_deg),
            });
        }
        if self.solar_zenith_deg >= 90.0 {
            return Err(Error::SunBelowHorizon {
                zenith_deg: self.solar_zenith_deg,
            });
        }
        if self.radiance_scale.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidSpec {
                reason: "radiance scale divisors must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Parse `lo-hi:value,lo-hi:value,...` scale ranges into a per-band table.
fn apply_scale_spec(spec: &str, table: &mut [f64]) -> Result<()> {
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (range, value) = part.split_once(':').ok_or_else(|| Error::InvalidSpec {
            reason: format!("radiance_scale entry `{part}` is not `lo-hi:value`"),
        })?;
        let value: f64 = value.trim().parse().map_err(|_| Error::InvalidSpec {
            reason: format!("radiance_scale value `{value}` is not a number"),
        })?;
        let (lo, hi) = match range.split_once('-') {
            Some((a, b)) => (parse_idx(a)?, parse_idx(b)?),
            None => {
                let b = parse_idx(range)?;
                (b, b)
            }
        };
        if hi >= table.len() || lo > hi {
            return Err(Error::RangeOutOfBounds {
                lo,
                hi,
                bands: table.len(),
            });
        }
        for slot in &mut table[lo..=hi] {
            *slot = value;
        }
    }
    Ok(())
}

fn parse_idx(text: &str) -> Result<usize> {
    text.trim().parse().map_err(|_| Error::InvalidSpec {
        reason: format!("`{text}` is not a band index"),
    })
}

fn load_esun_csv(path: &Path, bands: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::IoFailure {
        path: path.to_path_buf(),
        source,
    })?;
    let mut esun = vec![f64::NAN; bands];
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if idx == 0 && line.to_ascii_lowercase().replace(' ', "") == "band,esun" {
            continue;
        }
        let mut parts = line.split(',');
        let (band, value) = (parts.next().unwrap_or(""), parts.next().unwrap_or(""));
        let band: usize = band.trim().parse().map_err(|_| Error::MalformedConfig {
            path: path.to_path_buf(),
            line: idx + 1,
            reason: format!("`{band}` is not a band index"),
        })?;
        let value: f64 = value.trim().parse().map_err(|_| Error::MalformedConfig {
            path: path.to_path_buf(),
            line: idx + 1,
            reason: format!("`{value}` is not a number"),
        })?;
        if band >= bands {
            return Err(Error::RangeOutOfBounds {
                lo: band,
                hi: band,
                bands,
            });
        }
        esun[band] = value;
    }
    Ok(esun)
}

/// Outcome counters from a reflectance conversion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConversionStats {
    /// Negative reflectances clamped to zero (sensor noise around dark targets).
    pub negative_clamped: usize,
}

/// Convert a radiance cube to top-of-atmosphere reflectance in place.
///
/// Every masked-in band must have a positive ESUN entry. Masked-out bands are
/// converted too when their ESUN is known, otherwise left untouched; either
/// way they stay excluded from analysis.
pub fn to_reflectance(
    cube: &mut HyperspectralCube,
    params: &RadiometricParams,
) -> Result<ConversionStats> {
    if cube.unit == Unit::Reflectance {
        return Err(Error::AlreadyReflectance);
    }
    params.validate()?;
    let bands = cube.bands();
    if params.esun.len() != bands || params.radiance_scale.len() != bands {
        return Err(Error::LengthMismatch {
            left: params.esun.len().max(params.radiance_scale.len()),
            right: bands,
        });
    }

    let cos_zenith = params.solar_zenith_deg.to_radians().cos();
    let d2 = params.earth_sun_distance_au * params.earth_sun_distance_au;

    let mut factors = vec![f64::NAN; bands];
    for b in 0..bands {
        let esun = params.esun[b];
        let usable = esun.is_finite() && esun > 0.0;
        if cube.band_mask[b] && !usable {
            return Err(Error::MissingEsun { band: b });
        }
        if usable {
            factors[b] = PI * d2 / (params.radiance_scale[b] * esun * cos_zenith);
        }
    }

    let mut stats = ConversionStats::default();
    let (rows, cols, _) = cube.data.dim();
    for r in 0..rows {
        for c in 0..cols {
            for b in 0..bands {
                let f = factors[b];
                if f.is_nan() {
                    continue;
                }
                let rho = cube.data[[r, c, b]] * f;
                cube.data[[r, c, b]] = if rho < 0.0 {
                    stats.negative_clamped += 1;
                    0.0
                } else {
                    rho
                };
            }
        }
    }
    cube.unit = Unit::Reflectance;
    Ok(stats)
}
