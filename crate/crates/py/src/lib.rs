//! Python bindings for the mapping pipeline.
//!
//! The module mirrors the crate's main operations on plain lists so the
//! pipeline can be probed from Python without any array dependency: the
//! spectral helpers, the pre-classification stages, the discriminant
//! projection, the closed-form unmixing, and a `run_map` entry point that
//! executes the whole chain and returns the run manifest as JSON.
//!
//! Errors map onto Python exceptions by failure class: bad input raises
//! `ValueError`, a violated stage precondition raises `RuntimeError`, and a
//! data-driven numerical degeneracy raises `ArithmeticError`.

use std::path::PathBuf;

use ndarray::{Array2, Array3};
use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use lithomap::ingest::{
    load_library_signature, to_reflectance, write_envi_cube, DataType, HyperspectralCube,
    Interleave, RadiometricParams, Unit,
};
use lithomap::pipeline::{PipelineConfig, SoilClass};
use lithomap::preclassify::{ElbowCurve, ASSIGN_THRESHOLD};
use lithomap::project::DEFAULT_RIDGE;
use lithomap::spectra::SpectralSignature;
use lithomap::synth::recovery_scene;
use lithomap::unmix::{DEFAULT_RA_HIGH, DEFAULT_RA_LOW};
use lithomap::{Error, ErrorClass};

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e.class() {
        ErrorClass::Input => PyValueError::new_err(msg),
        ErrorClass::Precondition => PyRuntimeError::new_err(msg),
        ErrorClass::Numerical => PyArithmeticError::new_err(msg),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let n = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(PyValueError::new_err("rows have unequal lengths"));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n, width), flat)
        .map_err(|e| PyValueError::new_err(format!("not a matrix: {e}")))
}

fn to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

/// Scale a vector to unit Euclidean length.
#[pyfunction]
fn l2_normalize(v: Vec<f64>) -> PyResult<Vec<f64>> {
    lithomap::spectra::l2_normalize(&v).map_err(to_py)
}

/// Euclidean distance between two equal-length vectors.
#[pyfunction]
fn euclidean_distance(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    lithomap::spectra::euclidean_distance(&a, &b).map_err(to_py)
}

/// Pearson correlation coefficient between two equal-length vectors.
#[pyfunction]
fn pearson_correlation(x: Vec<f64>, s: Vec<f64>) -> PyResult<f64> {
    lithomap::spectra::pearson_correlation(&x, &s).map_err(to_py)
}

/// Linearly interpolate a spectrum onto a target wavelength grid. Every
/// target wavelength must lie within the source support.
#[pyfunction]
fn resample_to_grid(
    wavelengths_um: Vec<f64>,
    values: Vec<f64>,
    target_um: Vec<f64>,
) -> PyResult<Vec<f64>> {
    let sig = SpectralSignature {
        label: "input".into(),
        wavelengths_um,
        values,
    };
    lithomap::spectra::resample_to_grid(&sig, &target_um)
        .map(|s| s.values)
        .map_err(to_py)
}

/// Top-of-atmosphere reflectance of a single stored radiance sample.
#[pyfunction]
#[pyo3(signature = (radiance, esun, earth_sun_distance_au, solar_zenith_deg, scale=1.0))]
fn toa_reflectance(
    radiance: f64,
    esun: f64,
    earth_sun_distance_au: f64,
    solar_zenith_deg: f64,
    scale: f64,
) -> PyResult<f64> {
    let data = Array3::from_elem((1, 1, 1), radiance);
    let mut cube = HyperspectralCube::new(data, None, Unit::Radiance).map_err(to_py)?;
    let params =
        RadiometricParams::uniform(earth_sun_distance_au, solar_zenith_deg, esun, scale, 1);
    to_reflectance(&mut cube, &params).map_err(to_py)?;
    Ok(cube.data[[0, 0, 0]])
}

/// Seeded k-means on pixel rows. Returns (assignment, centroids, wcss).
#[pyfunction]
#[pyo3(signature = (pixels, k, seed=0, restarts=8))]
fn kmeans(
    pixels: Vec<Vec<f64>>,
    k: usize,
    seed: u64,
    restarts: usize,
) -> PyResult<(Vec<usize>, Vec<Vec<f64>>, f64)> {
    let pixels = matrix(pixels)?;
    let fit = lithomap::preclassify::kmeans(&pixels, k, seed, restarts).map_err(to_py)?;
    Ok((fit.assignment, to_rows(&fit.centroids), fit.wcss))
}

/// Within-cluster sum of squares for k = 1..=k_max.
/// Returns (k_values, wcss).
#[pyfunction]
#[pyo3(signature = (pixels, k_max, seed=0, restarts=8))]
fn wcss_curve(
    pixels: Vec<Vec<f64>>,
    k_max: usize,
    seed: u64,
    restarts: usize,
) -> PyResult<(Vec<usize>, Vec<f64>)> {
    let pixels = matrix(pixels)?;
    let curve =
        lithomap::preclassify::wcss_curve(&pixels, k_max, seed, restarts).map_err(to_py)?;
    Ok((curve.k_values, curve.wcss))
}

/// Pick the elbow of a WCSS curve: the point farthest from the chord
/// between the curve's endpoints, earlier point on ties.
#[pyfunction]
fn elbow_select(k_values: Vec<usize>, wcss: Vec<f64>) -> PyResult<usize> {
    let curve = ElbowCurve { k_values, wcss };
    lithomap::preclassify::elbow_select(&curve).map_err(to_py)
}

/// Vertex component analysis. Returns (endmembers, pixel_indices).
#[pyfunction]
#[pyo3(signature = (pixels, p, seed=0))]
fn vca(pixels: Vec<Vec<f64>>, p: usize, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let pixels = matrix(pixels)?;
    let result = lithomap::preclassify::vca(&pixels, p, seed).map_err(to_py)?;
    Ok((to_rows(&result.endmembers), result.indices))
}

/// Reciprocal-distance similarity weights; they sum to one.
#[pyfunction]
fn gamma_weights(distances: Vec<f64>) -> PyResult<Vec<f64>> {
    lithomap::preclassify::gamma_weights(&distances).map_err(to_py)
}

/// Assign each pixel row to the candidate row whose similarity weight
/// exceeds the threshold, or None where no candidate dominates.
#[pyfunction]
#[pyo3(signature = (pixels, candidates, threshold=ASSIGN_THRESHOLD))]
fn similarity_assign(
    pixels: Vec<Vec<f64>>,
    candidates: Vec<Vec<f64>>,
    threshold: f64,
) -> PyResult<Vec<Option<usize>>> {
    let pixels = matrix(pixels)?;
    let candidates = matrix(candidates)?;
    lithomap::preclassify::similarity_assign_with(&pixels, &candidates, threshold).map_err(to_py)
}

/// Fisher discriminant direction separating two point clouds, oriented so
/// the first cloud projects high.
#[pyfunction]
#[pyo3(signature = (high, low, ridge=DEFAULT_RIDGE))]
fn fisher_direction(high: Vec<Vec<f64>>, low: Vec<Vec<f64>>, ridge: f64) -> PyResult<Vec<f64>> {
    let high = matrix(high)?;
    let low = matrix(low)?;
    lithomap::project::fisher_direction(&high, &low, ridge).map_err(to_py)
}

/// Fisher separation ratio of two point clouds along a direction.
#[pyfunction]
fn fisher_ratio(high: Vec<Vec<f64>>, low: Vec<Vec<f64>>, w: Vec<f64>) -> PyResult<f64> {
    let high = matrix(high)?;
    let low = matrix(low)?;
    lithomap::project::fisher_ratio(&high, &low, &w).map_err(to_py)
}

/// Closed-form two-endmember mixing fraction. Returns (alpha, residual).
#[pyfunction]
fn solve_alpha(
    spectrum: Vec<f64>,
    mineral: Vec<f64>,
    impurity: Vec<f64>,
) -> PyResult<(f64, f64)> {
    lithomap::unmix::solve_alpha(&spectrum, &mineral, &impurity)
        .map(|s| (s.alpha, s.residual))
        .map_err(to_py)
}

/// Brute-force reference for `solve_alpha` over an even alpha grid.
/// Returns (alpha, residual).
#[pyfunction]
fn grid_search_alpha(
    spectrum: Vec<f64>,
    mineral: Vec<f64>,
    impurity: Vec<f64>,
    steps: usize,
) -> PyResult<(f64, f64)> {
    lithomap::unmix::grid_search_alpha(&spectrum, &mineral, &impurity, steps)
        .map(|s| (s.alpha, s.residual))
        .map_err(to_py)
}

/// Load a `wavelength_um,reflectance` library CSV.
/// Returns (wavelengths, values, dropped_rows).
#[pyfunction]
fn load_library(path: PathBuf) -> PyResult<(Vec<f64>, Vec<f64>, usize)> {
    let (sig, dropped) = load_library_signature(&path).map_err(to_py)?;
    Ok((sig.wavelengths_um, sig.values, dropped))
}

/// Read a single-band raster written by the pipeline as a list of rows.
#[pyfunction]
fn read_raster(path: PathBuf) -> PyResult<Vec<Vec<f64>>> {
    let grid = lithomap::export::read_band_raster(&path).map_err(to_py)?;
    Ok(to_rows(&grid))
}

/// Generate the self-checking recovery scene and write it under `out_dir`:
/// `scene.hdr/.img`, `library.csv`, `truth_alpha.hdr/.img`. Returns the
/// cube path.
#[pyfunction]
#[pyo3(signature = (out_dir, rows=64, cols=64, seed=0, snr_db=None))]
fn make_recovery_scene(
    out_dir: PathBuf,
    rows: usize,
    cols: usize,
    seed: u64,
    snr_db: Option<f64>,
) -> PyResult<String> {
    let scene = recovery_scene(rows, cols, seed, snr_db).map_err(to_py)?;
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| PyValueError::new_err(format!("{}: {e}", out_dir.display())))?;
    let (hdr, _) = write_envi_cube(
        &out_dir.join("scene"),
        &scene.cube,
        DataType::F32,
        Interleave::Bsq,
    )
    .map_err(to_py)?;
    lithomap::export::write_value_raster(&out_dir.join("truth_alpha"), &scene.truth_alpha.view())
        .map_err(to_py)?;
    lithomap::export::write_signatures_csv(
        &out_dir.join("library.csv"),
        &scene.signature.wavelengths_um,
        &[("reflectance", &scene.signature.values)],
    )
    .map_err(to_py)?;
    Ok(hdr.display().to_string())
}

/// Run the full mapping chain and return the run manifest as a JSON string.
#[pyfunction]
#[pyo3(signature = (
    cube, library, out_dir, seed=0, k_max=10, k_override=None, restarts=8,
    similarity_threshold=ASSIGN_THRESHOLD, ra_high=DEFAULT_RA_HIGH,
    ra_low=DEFAULT_RA_LOW, ridge=DEFAULT_RIDGE, threads=0, soil_class="auto",
    band_mask=None
))]
#[allow(clippy::too_many_arguments)]
fn run_map(
    cube: PathBuf,
    library: PathBuf,
    out_dir: PathBuf,
    seed: u64,
    k_max: usize,
    k_override: Option<usize>,
    restarts: usize,
    similarity_threshold: f64,
    ra_high: f64,
    ra_low: f64,
    ridge: f64,
    threads: usize,
    soil_class: &str,
    band_mask: Option<String>,
) -> PyResult<String> {
    let mut config = PipelineConfig::new(cube, library, out_dir);
    config.seed = seed;
    config.k_max = k_max;
    config.k_override = k_override;
    config.restarts = restarts;
    config.similarity_threshold = similarity_threshold;
    config.ra_high = ra_high;
    config.ra_low = ra_low;
    config.ridge = ridge;
    config.threads = threads;
    config.soil_class = SoilClass::parse(soil_class).map_err(to_py)?;
    config.band_mask = band_mask;
    config.validate().map_err(to_py)?;
    let run = lithomap::pipeline::run_map(&config).map_err(to_py)?;
    Ok(run.manifest.to_json())
}

#[pymodule]
fn lithomap_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(l2_normalize, m)?)?;
    m.add_function(wrap_pyfunction!(euclidean_distance, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_correlation, m)?)?;
    m.add_function(wrap_pyfunction!(resample_to_grid, m)?)?;
    m.add_function(wrap_pyfunction!(toa_reflectance, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(wcss_curve, m)?)?;
    m.add_function(wrap_pyfunction!(elbow_select, m)?)?;
    m.add_function(wrap_pyfunction!(vca, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_weights, m)?)?;
    m.add_function(wrap_pyfunction!(similarity_assign, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_direction, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(solve_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(grid_search_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(load_library, m)?)?;
    m.add_function(wrap_pyfunction!(read_raster, m)?)?;
    m.add_function(wrap_pyfunction!(make_recovery_scene, m)?)?;
    m.add_function(wrap_pyfunction!(run_map, m)?)?;
    Ok(())
}
