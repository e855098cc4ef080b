//! Synthetic scenes with exact ground truth.
//!
//! The centerpiece is the recovery scene: a three-region image whose soil
//! pixels are convex mixtures of a mineral and an impurity spectrum, with the
//! impurity itself varying along an extra direction orthogonal to the mixing
//! segment. Two small groups of decoy pixels sit angularly outside the
//! mixture fan, so the extreme-pixel search lands on them instead of on the
//! pure pixels; their signature correlations then form thresholds that the
//! pure pixels strictly clear while every mixed pixel stays between them.
//! Because the decoys carry no component along the mixing direction beyond
//! their anchor point, every pixel's true mixing fraction survives the whole
//! chain exactly, which is what makes the scene usable as a machine-precision
//! oracle for the full pipeline.

use std::f64::consts::TAU;

use ndarray::{Array2, Array3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::config::FlatConfig;
use crate::error::{Error, Result};
use crate::ingest::{HyperspectralCube, Unit};
use crate::preclassify::kmeans::mix_seed;
use crate::preclassify::ClassMap;
use crate::project::fisher_ratio;
use crate::spectra::{pearson_correlation, SpectralSignature};
use crate::unmix::OFF_SOIL;

/// Region codes in [`RecoveryScene::regions`].
pub const REGION_BACKGROUND_A: u8 = 0;
pub const REGION_BACKGROUND_B: u8 = 1;
pub const REGION_SOIL: u8 = 2;

const RECOVERY_BANDS: usize = 100;
const MID_ALPHA_MIN: f64 = 0.25;
const MID_ALPHA_MAX: f64 = 0.72;
const BAIT_HIGH_ALPHA: f64 = 0.70;
const BAIT_LOW_ALPHA: f64 = 0.30;

/// A generated scene together with everything needed to score a run on it.
#[derive(Debug, Clone)]
pub struct RecoveryScene {
    pub cube: HyperspectralCube,
    /// True mineral fraction per pixel, [`OFF_SOIL`] outside the soil region.
    pub truth_alpha: Array2<f64>,
    pub soil_mask: Array2<bool>,
    /// Region code per pixel.
    pub regions: Array2<u8>,
    /// Laboratory signature of the target mineral on the cube's grid.
    pub signature: SpectralSignature,
    /// The mineral generator spectrum.
    pub mineral: Vec<f64>,
    /// The impurity center spectrum.
    pub impurity: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    for x in v.iter_mut() {
        *x /= n;
    }
    v
}

/// Remove the component of `v` inside the span of `against`. The spanning
/// set is first orthonormalized so the projection is exact even when its
/// members overlap heavily.
fn orthogonalize(mut v: Vec<f64>, against: &[&[f64]]) -> Vec<f64> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(against.len());
    for raw in against {
        let mut b = raw.to_vec();
        for _ in 0..2 {
            for prior in &basis {
                let c = dot(&b, prior);
                for (x, y) in b.iter_mut().zip(prior) {
                    *x -= c * y;
                }
            }
        }
        if norm(&b) > 1e-12 {
            basis.push(unit(b));
        }
    }
    for b in &basis {
        let c = dot(&v, b);
        for (x, y) in v.iter_mut().zip(b) {
            *x -= c * y;
        }
    }
    v
}

fn centered_norm(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>().sqrt()
}

/// Build the recovery scene. The layout: left half of the image is split
/// into two background regions, the right half is soil. `noise_snr_db`
/// adds band-wise white Gaussian noise at the given signal-to-noise ratio.
pub fn recovery_scene(
    rows: usize,
    cols: usize,
    seed: u64,
    noise_snr_db: Option<f64>,
) -> Result<RecoveryScene> {
    if rows < 8 || cols < 8 {
        return Err(Error::InvalidSpec {
            reason: "recovery scene needs at least an 8x8 grid".into(),
        });
    }
    let bands = RECOVERY_BANDS;
    let grid: Vec<f64> = (0..bands)
        .map(|b| b as f64 / (bands - 1) as f64)
        .collect();
    let wavelengths: Vec<f64> = grid.iter().map(|t| 0.4 + 2.1 * t).collect();

    let g_m: Vec<f64> = grid
        .iter()
        .map(|&t| 0.50 + 0.08 * (TAU * (1.15 * t + 0.10)).sin() + 0.10 * t)
        .collect();
    let delta: Vec<f64> = grid
        .iter()
        .map(|&t| 0.050 + 0.130 * (TAU * (0.55 * t + 0.80)).sin() + 0.070 * (TAU * 2.10 * t).cos())
        .collect();
    let g_c: Vec<f64> = g_m.iter().zip(&delta).map(|(m, d)| m - d).collect();

    let ones = vec![1.0; bands];
    let raw_e2: Vec<f64> = grid.iter().map(|&t| (TAU * (3.30 * t + 1.30)).sin()).collect();
    let e2 = unit(orthogonalize(raw_e2, &[&ones, &g_m, &g_c]));

    // In-plane frame: the mixing direction and its in-plane complement.
    let delta_hat = unit(delta.clone());
    let v_hat = {
        let c = dot(&g_m, &delta_hat);
        let v: Vec<f64> = g_m
            .iter()
            .zip(&delta_hat)
            .map(|(m, d)| m - c * d)
            .collect();
        unit(v)
    };
    let a_t = dot(&g_c, &delta_hat);
    let delta_norm = norm(&delta);
    let v_c = dot(&g_c, &v_hat);
    if v_c <= 0.0 || a_t <= 0.0 {
        return Err(Error::InvalidSpec {
            reason: "recovery generators produce a degenerate frame".into(),
        });
    }

    let mix = |alpha: f64| -> Vec<f64> {
        g_c.iter()
            .zip(&delta)
            .map(|(c, d)| c + alpha * d)
            .collect::<Vec<f64>>()
    };

    let sigma_c = centered_norm(&g_c);
    let psi_pure = 0.65 * sigma_c;
    let psi_mid = 0.12 * sigma_c;

    // Correlation gaps the decoys must land in.
    let r0 = pearson_correlation(&g_c, &g_m)?;
    let r_mid_max = pearson_correlation(&mix(MID_ALPHA_MAX), &g_m)?;
    let r_mid_min = {
        let base = mix(MID_ALPHA_MIN);
        let sigma = centered_norm(&base);
        pearson_correlation(&base, &g_m)? * sigma / (sigma * sigma + psi_mid * psi_mid).sqrt()
    };
    let r_a0_max = {
        let psi_min = 0.55 * psi_pure;
        r0 * sigma_c / (sigma_c * sigma_c + psi_min * psi_min).sqrt()
    };
    if r_a0_max + 0.03 >= r_mid_min {
        return Err(Error::InvalidSpec {
            reason: "impurity correlation gap is too narrow".into(),
        });
    }

    // Scan the in-plane tilt for each decoy: its ray must leave the mixture
    // fan with margin, its correlation must land strictly inside its gap,
    // and the spectrum must stay physical. The smallest workable tilt wins,
    // which keeps the soil cloud compact.
    let slope_lo = a_t / v_c;
    let slope_hi = (a_t + delta_norm) / v_c;
    let slope_margin = 0.04 * (slope_hi - slope_lo);
    let find_bait = |anchor_alpha: f64,
                     rho_sign: f64,
                     r_lo: f64,
                     r_hi: f64|
     -> Result<Vec<f64>> {
        let base = mix(anchor_alpha);
        let u_b = a_t + anchor_alpha * delta_norm;
        for step in 1..400 {
            let rho = rho_sign * 0.005 * step as f64 * v_c;
            let v_b = v_c + rho;
            if v_b <= 0.05 * v_c {
                break;
            }
            let slope = u_b / v_b;
            let outside = if rho_sign < 0.0 {
                slope > slope_hi + slope_margin
            } else {
                slope < slope_lo - slope_margin
            };
            if !outside {
                continue;
            }
            let candidate: Vec<f64> = base
                .iter()
                .zip(&v_hat)
                .map(|(x, v)| x + rho * v)
                .collect();
            if candidate.iter().any(|&x| x < 0.02 || x > 1.05) {
                break;
            }
            let r = pearson_correlation(&candidate, &g_m)?;
            if r > r_lo && r < r_hi {
                return Ok(candidate);
            }
        }
        Err(Error::InvalidSpec {
            reason: "no feasible decoy tilt for the recovery scene".into(),
        })
    };
    let bait_hi = find_bait(BAIT_HIGH_ALPHA, -1.0, r_mid_max + 0.005, 1.0 - 5e-4)?;
    let bait_lo = find_bait(BAIT_LOW_ALPHA, 1.0, r_a0_max + 0.005, r_mid_min - 0.005)?;

    // Backgrounds: dark with a falling trend, bright with its own shape.
    // Each carries a strong oscillation no soil spectrum shares, so the
    // scene-level endmember picks always land on the backgrounds and never on
    // the decoys, which must stay the extremes of the soil class only.
    let bg_a: Vec<f64> = grid
        .iter()
        .map(|&t| {
            0.125 - 0.035 * t
                + 0.012 * (TAU * (0.35 * t + 0.20)).sin()
                + 0.055 * (TAU * (5.20 * t + 0.30)).sin()
        })
        .collect();
    let bg_b: Vec<f64> = grid
        .iter()
        .map(|&t| {
            0.880 + 0.040 * (TAU * (0.25 * t + 0.55)).cos() - 0.020 * t
                + 0.055 * (TAU * (4.40 * t + 0.80)).cos()
        })
        .collect();

    // Soil population.
    let soil_cols = cols - cols / 2;
    let n_soil = rows * soil_cols;
    let n_bait = (n_soil / 60).clamp(3, 40);
    let n_pure_m = (n_soil * 12 / 100).max(1);
    let n_pure_c = ((n_soil * 10 / 100).max(2) / 2) * 2;
    if 2 * n_bait + n_pure_m + n_pure_c + 4 > n_soil {
        return Err(Error::InvalidSpec {
            reason: "soil region too small for the recovery populations".into(),
        });
    }
    let n_mid = n_soil - 2 * n_bait - n_pure_m - n_pure_c;

    let mut rng_alpha = ChaCha8Rng::seed_from_u64(mix_seed(seed, 101));
    let mut rng_psi = ChaCha8Rng::seed_from_u64(mix_seed(seed, 102));
    let mut soil: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n_soil);
    for _ in 0..n_bait {
        soil.push((bait_hi.clone(), BAIT_HIGH_ALPHA));
    }
    for _ in 0..n_bait {
        soil.push((bait_lo.clone(), BAIT_LOW_ALPHA));
    }
    for _ in 0..n_pure_m {
        soil.push((g_m.clone(), 1.0));
    }
    for _ in 0..n_pure_c / 2 {
        let psi = (0.55 + 0.45 * rng_psi.gen_range(0.0..1.0)) * psi_pure;
        for sign in [1.0, -1.0] {
            let pixel: Vec<f64> = g_c
                .iter()
                .zip(&e2)
                .map(|(c, e)| c + sign * psi * e)
                .collect();
            soil.push((pixel, 0.0));
        }
    }
    for _ in 0..n_mid {
        let alpha = rng_alpha.gen_range(MID_ALPHA_MIN..MID_ALPHA_MAX);
        let psi = rng_psi.gen_range(-psi_mid..psi_mid);
        let pixel: Vec<f64> = g_c
            .iter()
            .zip(&delta)
            .zip(&e2)
            .map(|((c, d), e)| c + alpha * d + psi * e)
            .collect();
        soil.push((pixel, alpha));
    }

    verify_soil_population(
        &soil, n_bait, &g_m, &delta_hat, &v_hat, &e2, r_a0_max, r_mid_max,
    )?;

    let mut placement: Vec<usize> = (0..n_soil).collect();
    placement.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(seed, 103)));

    // Assemble the image.
    let mut data = Array3::zeros((rows, cols, bands));
    let mut truth_alpha = Array2::from_elem((rows, cols), OFF_SOIL);
    let mut soil_mask = Array2::from_elem((rows, cols), false);
    let mut regions = Array2::zeros((rows, cols));
    let mut rng_bg = ChaCha8Rng::seed_from_u64(mix_seed(seed, 104));
    let bg_cols = cols / 2;
    for r in 0..rows {
        for c in 0..bg_cols {
            let (template, code) = if r < rows / 2 {
                (&bg_a, REGION_BACKGROUND_A)
            } else {
                (&bg_b, REGION_BACKGROUND_B)
            };
            let gain = 1.0 + rng_bg.gen_range(-0.004..0.004);
            for b in 0..bands {
                data[[r, c, b]] = template[b] * gain;
            }
            regions[[r, c]] = code;
        }
    }
    for (slot, &src) in placement.iter().enumerate() {
        let r = slot / soil_cols;
        let c = bg_cols + slot % soil_cols;
        let (pixel, alpha) = &soil[src];
        for b in 0..bands {
            data[[r, c, b]] = pixel[b];
        }
        truth_alpha[[r, c]] = *alpha;
        soil_mask[[r, c]] = true;
        regions[[r, c]] = REGION_SOIL;
    }

    if let Some(snr_db) = noise_snr_db {
        apply_noise(&mut data, snr_db, mix_seed(seed, 105))?;
    }

    let cube = HyperspectralCube::new(data, Some(wavelengths.clone()), Unit::Reflectance)?;
    let signature = SpectralSignature::new("target-mineral", wavelengths, g_m.clone())?;
    Ok(RecoveryScene {
        cube,
        truth_alpha,
        soil_mask,
        regions,
        signature,
        mineral: g_m,
        impurity: g_c,
    })
}

/// Always-on construction checks: the decoys must be the angular extremes of
/// the soil cloud, the correlation thresholds they will induce must strictly
/// sandwich the mixed pixels, and the mixing spread must dominate the
/// impurity-variation spread so the extreme search sees the right plane.
#[allow(clippy::too_many_arguments)]
fn verify_soil_population(
    soil: &[(Vec<f64>, f64)],
    n_bait: usize,
    g_m: &[f64],
    delta_hat: &[f64],
    v_hat: &[f64],
    e2: &[f64],
    r_a0_max_bound: f64,
    r_mid_max_bound: f64,
) -> Result<()> {
    let fail = |reason: &str| Error::InvalidSpec {
        reason: format!("recovery scene self-check failed: {reason}"),
    };
    let r_hi = pearson_correlation(&soil[0].0, g_m)?;
    let r_lo = pearson_correlation(&soil[n_bait].0, g_m)?;
    let mut slope_bait_hi = f64::NEG_INFINITY;
    let mut slope_bait_lo = f64::INFINITY;
    let mut slope_others = (f64::INFINITY, f64::NEG_INFINITY);
    let mut var_u = 0.0f64;
    let mut var_psi = 0.0f64;
    let mut mean_u = 0.0f64;
    for (pixel, _) in soil {
        mean_u += dot(pixel, delta_hat);
    }
    mean_u /= soil.len() as f64;
    for (i, (pixel, _)) in soil.iter().enumerate() {
        if pixel.iter().any(|&x| x < 0.02 || x > 1.05) {
            return Err(fail("a soil spectrum left the physical range"));
        }
        let u = dot(pixel, delta_hat);
        let v = dot(pixel, v_hat);
        if v <= 0.0 {
            return Err(fail("a soil pixel left the positive half-plane"));
        }
        let slope = u / v;
        if i < n_bait {
            slope_bait_hi = slope_bait_hi.max(slope);
        } else if i < 2 * n_bait {
            slope_bait_lo = slope_bait_lo.min(slope);
        } else {
            slope_others.0 = slope_others.0.min(slope);
            slope_others.1 = slope_others.1.max(slope);
            let r = pearson_correlation(pixel, g_m)?;
            let alpha = soil[i].1;
            if alpha == 0.0 && r > r_lo - 0.005 {
                return Err(fail("an impurity pixel crowds the lower threshold"));
            }
            if alpha > 0.0 && alpha < 1.0 && (r < r_lo + 0.005 || r > r_hi - 0.005) {
                return Err(fail("a mixed pixel crowds the threshold sandwich"));
            }
        }
        var_u += (u - mean_u) * (u - mean_u);
        let psi = dot(pixel, e2);
        var_psi += psi * psi;
    }
    if r_hi <= r_mid_max_bound || r_hi >= 1.0 - 5e-4 {
        return Err(fail("high decoy correlation missed its gap"));
    }
    if r_lo <= r_a0_max_bound {
        return Err(fail("low decoy correlation missed its gap"));
    }
    if slope_bait_hi <= slope_others.1 || slope_bait_lo >= slope_others.0 {
        return Err(fail("decoys are not the angular extremes"));
    }
    if var_u < 2.0 * var_psi {
        return Err(fail("impurity variation rivals the mixing spread"));
    }
    Ok(())
}

fn apply_noise(data: &mut Array3<f64>, snr_db: f64, seed: u64) -> Result<()> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidSpec {
            reason: "noise level must be finite".into(),
        });
    }
    let (rows, cols, bands) = data.dim();
    let n = (rows * cols) as f64;
    let mut sigmas = Vec::with_capacity(bands);
    for b in 0..bands {
        let mut acc = 0.0f64;
        for r in 0..rows {
            for c in 0..cols {
                acc += data[[r, c, b]] * data[[r, c, b]];
            }
        }
        sigmas.push((acc / n).sqrt() * 10f64.powf(-snr_db / 20.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    for r in 0..rows {
        for c in 0..cols {
            for b in 0..bands {
                data[[r, c, b]] += sigmas[b] * normal.sample(&mut rng);
            }
        }
    }
    Ok(())
}

/// Add band-wise white Gaussian noise to a cube at the given SNR.
pub fn add_noise(cube: &mut HyperspectralCube, snr_db: f64, seed: u64) -> Result<()> {
    apply_noise(&mut cube.data, snr_db, seed)?;
    let refreshed = HyperspectralCube::new(
        cube.data.clone(),
        cube.wavelengths_um.clone(),
        cube.unit,
    )?;
    cube.valid = refreshed.valid;
    Ok(())
}

/// Noiseless mixtures of `p` spectrally distinct generators with one pure
/// pixel per generator guaranteed. Returns (pixels, generators).
pub fn simplex_pixels(
    p: usize,
    bands: usize,
    n: usize,
    seed: u64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if p == 0 || bands < 2 {
        return Err(Error::InvalidSpec {
            reason: "simplex scene needs at least one generator and two bands".into(),
        });
    }
    if n < p {
        return Err(Error::TooFewPixels { needed: p, got: n });
    }
    let mut generators = Array2::zeros((p, bands));
    for e in 0..p {
        for b in 0..bands {
            let t = b as f64 / bands as f64;
            generators[[e, b]] = 0.40
                + 0.35 * ((e + 1) as f64 * 2.2 * t).sin().powi(2)
                + 0.15 * ((e as f64) - t).cos();
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = Array2::zeros((n, bands));
    for i in 0..n {
        let mut weights = vec![0.0; p];
        if i < p {
            weights[i] = 1.0;
        } else {
            let mut total = 0.0;
            for w in weights.iter_mut() {
                *w = rng.gen_range(0.05..1.0);
                total += *w;
            }
            for w in weights.iter_mut() {
                *w /= total;
            }
        }
        for b in 0..bands {
            pixels[[i, b]] = (0..p).map(|e| weights[e] * generators[[e, b]]).sum();
        }
    }
    Ok((pixels, generators))
}

/// One rectangular region of a [`SceneSpec`]: either a fixed generator mix
/// or a two-generator blend whose fraction ramps across the columns.
#[derive(Debug, Clone)]
pub enum RegionFill {
    Mix(Vec<(String, f64)>),
    Blend {
        a: String,
        b: String,
        from: f64,
        to: f64,
    },
}

#[derive(Debug, Clone)]
pub struct RegionSpec {
    /// row0, col0, rows, cols.
    pub rect: (usize, usize, usize, usize),
    pub fill: RegionFill,
}

/// A declarative scene: named generator spectra and rectangular regions
/// holding convex mixtures of them.
///
/// Read from the flat config dialect:
///
/// ```text
/// scene.rows = 32
/// scene.cols = 32
/// scene.bands = 60
/// scene.seed = 9
/// scene.noise_snr_db = inf
/// generator.water = ramp(0.02, 0.05)
/// generator.mineral = sine(0.50, 0.10, 2.0, 0.25)
/// region.0.rect = 0,0,16,32
/// region.0.mix = water:1
/// region.1.rect = 16,0,16,32
/// region.1.blend = mineral,water,0.2,0.9
/// ```
#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    pub seed: u64,
    /// `None` means noiseless.
    pub noise_snr_db: Option<f64>,
    pub generators: Vec<(String, Vec<f64>)>,
    pub regions: Vec<RegionSpec>,
}

fn parse_generator(name: &str, value: &str, bands: usize) -> Result<Vec<f64>> {
    let bad = |reason: String| Error::InvalidSpec {
        reason: format!("generator `{name}`: {reason}"),
    };
    let args_of = |body: &str| -> Result<Vec<f64>> {
        body.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(format!("`{s}` is not a number")))
            })
            .collect()
    };
    let value = value.trim();
    let values = if let Some(body) = value
        .strip_prefix("ramp(")
        .and_then(|v| v.strip_suffix(')'))
    {
        let args = args_of(body)?;
        let [a, b] = args[..] else {
            return Err(bad("ramp takes (start, end)".into()));
        };
        (0..bands)
            .map(|i| a + (b - a) * i as f64 / (bands - 1).max(1) as f64)
            .collect()
    } else if let Some(body) = value
        .strip_prefix("sine(")
        .and_then(|v| v.strip_suffix(')'))
    {
        let args = args_of(body)?;
        let [base, amp, cycles, phase] = args[..] else {
            return Err(bad("sine takes (base, amplitude, cycles, phase)".into()));
        };
        (0..bands)
            .map(|i| {
                let t = i as f64 / (bands - 1).max(1) as f64;
                base + amp * (TAU * (cycles * t + phase)).sin()
            })
            .collect()
    } else {
        let values = args_of(value)?;
        if values.len() != bands {
            return Err(bad(format!(
                "expected {bands} explicit values, got {}",
                values.len()
            )));
        }
        values
    };
    if values.iter().any(|v: &f64| !v.is_finite() || *v < 0.0) {
        return Err(bad("values must be finite and non-negative".into()));
    }
    Ok(values)
}

impl SceneSpec {
    pub fn from_config(cfg: &FlatConfig) -> Result<Self> {
        let rows = cfg.require("scene.rows")?.parse::<usize>().ok();
        let cols = cfg.require("scene.cols")?.parse::<usize>().ok();
        let bands = cfg.require("scene.bands")?.parse::<usize>().ok();
        let (Some(rows), Some(cols), Some(bands)) = (rows, cols, bands) else {
            return Err(Error::InvalidSpec {
                reason: "scene.rows/cols/bands must be positive integers".into(),
            });
        };
        if rows == 0 || cols == 0 || bands < 2 {
            return Err(Error::InvalidSpec {
                reason: "scene needs rows > 0, cols > 0, bands >= 2".into(),
            });
        }
        let seed = cfg.get_u64("scene.seed")?.unwrap_or(0);
        let noise_snr_db = match cfg.get_f64("scene.noise_snr_db")? {
            None => None,
            Some(v) if v.is_infinite() => None,
            Some(v) => Some(v),
        };

        let mut generators = Vec::new();
        for key in cfg.keys() {
            if let Some(name) = key.strip_prefix("generator.") {
                let values = parse_generator(name, cfg.require(key)?, bands)?;
                generators.push((name.to_string(), values));
            }
        }
        if generators.is_empty() {
            return Err(Error::InvalidSpec {
                reason: "scene defines no generators".into(),
            });
        }

        let mut regions = Vec::new();
        for idx in 0.. {
            let rect_key = format!("region.{idx}.rect");
            let Some(rect_str) = cfg.get(&rect_key) else {
                break;
            };
            let nums: Vec<usize> = rect_str
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::InvalidSpec {
                    reason: format!("{rect_key}: expected row0,col0,rows,cols"),
                })?;
            let [r0, c0, nr, nc] = nums[..] else {
                return Err(Error::InvalidSpec {
                    reason: format!("{rect_key}: expected four integers"),
                });
            };
            let mix = cfg.get(&format!("region.{idx}.mix"));
            let blend = cfg.get(&format!("region.{idx}.blend"));
            let fill = match (mix, blend) {
                (Some(mix), None) => {
                    let mut parts = Vec::new();
                    for item in mix.split(',') {
                        let Some((name, weight)) = item.split_once(':') else {
                            return Err(Error::InvalidSpec {
                                reason: format!("region {idx}: mix entries are name:weight"),
                            });
                        };
                        let weight =
                            weight.trim().parse::<f64>().map_err(|_| Error::InvalidSpec {
                                reason: format!("region {idx}: weight `{weight}` not a number"),
                            })?;
                        parts.push((name.trim().to_string(), weight));
                    }
                    RegionFill::Mix(parts)
                }
                (None, Some(blend)) => {
                    let parts: Vec<&str> = blend.split(',').map(str::trim).collect();
                    let [a, b, from, to] = parts[..] else {
                        return Err(Error::InvalidSpec {
                            reason: format!("region {idx}: blend is nameA,nameB,from,to"),
                        });
                    };
                    let parse = |s: &str| {
                        s.parse::<f64>().map_err(|_| Error::InvalidSpec {
                            reason: format!("region {idx}: blend bound `{s}` not a number"),
                        })
                    };
                    RegionFill::Blend {
                        a: a.to_string(),
                        b: b.to_string(),
                        from: parse(from)?,
                        to: parse(to)?,
                    }
                }
                _ => {
                    return Err(Error::InvalidSpec {
                        reason: format!("region {idx} needs exactly one of mix/blend"),
                    });
                }
            };
            regions.push(RegionSpec {
                rect: (r0, c0, nr, nc),
                fill,
            });
        }
        if regions.is_empty() {
            return Err(Error::InvalidSpec {
                reason: "scene defines no regions".into(),
            });
        }
        Ok(Self {
            rows,
            cols,
            bands,
            seed,
            noise_snr_db,
            generators,
            regions,
        })
    }
}

/// Render a [`SceneSpec`]: every pixel is the stated convex mixture of
/// generators, plus seeded noise when requested. Returns the cube, the true
/// region map, and the true per-pixel fraction of the generator named
/// `mineral` (0 where it is absent).
pub fn generate_scene(spec: &SceneSpec) -> Result<(HyperspectralCube, ClassMap, Array2<f64>)> {
    let find = |name: &str| -> Result<usize> {
        spec.generators
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::InvalidSpec {
                reason: format!("region references unknown generator `{name}`"),
            })
    };

    let mut labels = Array2::from_elem((spec.rows, spec.cols), -1i32);
    let mut alpha = Array2::zeros((spec.rows, spec.cols));
    let mut data = Array3::zeros((spec.rows, spec.cols, spec.bands));
    for (idx, region) in spec.regions.iter().enumerate() {
        let (r0, c0, nr, nc) = region.rect;
        if r0 + nr > spec.rows || c0 + nc > spec.cols || nr == 0 || nc == 0 {
            return Err(Error::InvalidSpec {
                reason: format!("region {idx} rectangle leaves the {}x{} grid", spec.rows, spec.cols),
            });
        }
        match &region.fill {
            RegionFill::Mix(parts) => {
                let total: f64 = parts.iter().map(|(_, w)| w).sum();
                if parts.iter().any(|(_, w)| *w < 0.0) || (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidSpec {
                        reason: format!("region {idx}: mix weights must be >= 0 and sum to 1"),
                    });
                }
                let ids: Vec<(usize, f64)> = parts
                    .iter()
                    .map(|(name, w)| find(name).map(|i| (i, *w)))
                    .collect::<Result<_>>()?;
                let mineral_w: f64 = parts
                    .iter()
                    .filter(|(name, _)| name == "mineral")
                    .map(|(_, w)| *w)
                    .sum();
                for r in r0..r0 + nr {
                    for c in c0..c0 + nc {
                        if labels[[r, c]] != -1 {
                            return Err(Error::InvalidSpec {
                                reason: format!("regions overlap at ({r},{c})"),
                            });
                        }
                        labels[[r, c]] = idx as i32;
                        alpha[[r, c]] = mineral_w;
                        for b in 0..spec.bands {
                            data[[r, c, b]] = ids
                                .iter()
                                .map(|&(g, w)| w * spec.generators[g].1[b])
                                .sum();
                        }
                    }
                }
            }
            RegionFill::Blend { a, b, from, to } => {
                if !(0.0..=1.0).contains(from) || !(0.0..=1.0).contains(to) {
                    return Err(Error::InvalidSpec {
                        reason: format!("region {idx}: blend bounds must lie in [0,1]"),
                    });
                }
                let ga = find(a)?;
                let gb = find(b)?;
                for r in r0..r0 + nr {
                    for c in c0..c0 + nc {
                        if labels[[r, c]] != -1 {
                            return Err(Error::InvalidSpec {
                                reason: format!("regions overlap at ({r},{c})"),
                            });
                        }
                        let frac = if nc == 1 {
                            0.0
                        } else {
                            (c - c0) as f64 / (nc - 1) as f64
                        };
                        let w = from + (to - from) * frac;
                        labels[[r, c]] = idx as i32;
                        alpha[[r, c]] = if a == "mineral" {
                            w
                        } else if b == "mineral" {
                            1.0 - w
                        } else {
                            0.0
                        };
                        for band in 0..spec.bands {
                            data[[r, c, band]] = w * spec.generators[ga].1[band]
                                + (1.0 - w) * spec.generators[gb].1[band];
                        }
                    }
                }
            }
        }
    }
    if labels.iter().any(|&l| l == -1) {
        return Err(Error::InvalidSpec {
            reason: "regions do not cover the full grid".into(),
        });
    }

    if let Some(snr_db) = spec.noise_snr_db {
        apply_noise(&mut data, snr_db, mix_seed(spec.seed, 105))?;
    }
    let wavelengths: Vec<f64> = (0..spec.bands)
        .map(|b| 0.4 + 2.1 * b as f64 / (spec.bands - 1).max(1) as f64)
        .collect();
    let cube = HyperspectralCube::new(data, Some(wavelengths), Unit::Reflectance)?;
    let map = ClassMap {
        labels,
        n_classes: spec.regions.len(),
    };
    Ok((cube, map, alpha))
}

/// Best Fisher ratio over `n_draws` seeded random unit directions. Used to
/// check that the analytic discriminant direction is not beaten by chance.
pub fn random_direction_fisher(
    high: &Array2<f64>,
    low: &Array2<f64>,
    n_draws: usize,
    seed: u64,
) -> Result<f64> {
    if n_draws == 0 {
        return Err(Error::InvalidSpec {
            reason: "need at least one random direction".into(),
        });
    }
    let dims = high.ncols();
    if dims == 0 || dims != low.ncols() {
        return Err(Error::LengthMismatch {
            left: dims,
            right: low.ncols(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..n_draws {
        let mut w: Vec<f64>;
        loop {
            w = (0..dims).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = norm(&w);
            if n > 1e-12 {
                for x in w.iter_mut() {
                    *x /= n;
                }
                break;
            }
        }
        best = best.max(fisher_ratio(high, low, &w)?);
    }
    Ok(best)
}

/// [`simplex_pixels`] laid out as an image cube.
pub fn simplex_cube(
    rows: usize,
    cols: usize,
    bands: usize,
    p: usize,
    seed: u64,
) -> Result<(HyperspectralCube, Array2<f64>)> {
    let (pixels, generators) = simplex_pixels(p, bands, rows * cols, seed)?;
    let mut data = Array3::zeros((rows, cols, bands));
    for r in 0..rows {
        for c in 0..cols {
            for b in 0..bands {
                data[[r, c, b]] = pixels[[r * cols + c, b]];
            }
        }
    }
    let wavelengths: Vec<f64> = (0..bands)
        .map(|b| 0.4 + 2.1 * b as f64 / (bands - 1).max(1) as f64)
        .collect();
    let cube = HyperspectralCube::new(data, Some(wavelengths), Unit::Reflectance)?;
    Ok((cube, generators))
}
