//! End-to-end mapping runs: configuration, orchestration of the stage
//! modules, and the manifest that makes a run reproducible.
//!
//! Everything that influences the numbers lives in [`PipelineConfig`] and is
//! echoed into the manifest together with content hashes of the inputs. Two
//! runs with the same effective config and the same input bytes produce
//! byte-identical rasters and manifests, regardless of worker-thread count;
//! only the `runtime` block (paths, threads, timings) may differ.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::FlatConfig;
use crate::error::{Error, Result};
use crate::export;
use crate::ingest::{load_library_signature, locate_envi, read_envi, HyperspectralCube, Unit};
use crate::preclassify::kmeans::mix_seed;
use crate::preclassify::{
    isolate_class, preclassify_with, ClassPixels, Preclassification, PreclassifyOptions,
    ASSIGN_THRESHOLD,
};
use crate::project::{
    fisher_direction, project_soil, separation_report, SeparationReport, DEFAULT_RIDGE,
};
use crate::spectra::{pearson_correlation, resample_to_grid, SpectralSignature};
use crate::subclass::{
    correlate_soil, derive_thresholds, label_subclasses, mean_representatives, Subclass,
};
use crate::unmix::{abundance_map, refine_representatives, DEFAULT_RA_HIGH, DEFAULT_RA_LOW};

/// How the soil class is picked from the pre-classification result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SoilClass {
    /// Pick the class whose mean spectrum correlates best with the library
    /// signature.
    Auto,
    /// Use a fixed class index from the map.
    Index(usize),
}

impl SoilClass {
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t.eq_ignore_ascii_case("auto") {
            return Ok(SoilClass::Auto);
        }
        t.parse::<usize>().map(SoilClass::Index).map_err(|_| {
            Error::InvalidSpec {
                reason: format!("soil class must be `auto` or a class index, got `{t}`"),
            }
        })
    }

    fn canonical(&self) -> String {
        match self {
            SoilClass::Auto => "auto".into(),
            SoilClass::Index(i) => i.to_string(),
        }
    }
}

/// Everything a mapping run needs. Front ends fill this from a flat config
/// file and then overwrite single fields from command-line flags.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Input cube: either half of an ENVI header/data pair.
    pub cube: PathBuf,
    /// Laboratory signature CSV for the target mineral.
    pub library: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Largest class count the elbow scan evaluates.
    pub k_max: usize,
    /// Fixed class count, bypassing the elbow choice.
    pub k_override: Option<usize>,
    /// Independent k-means++ seedings per k.
    pub restarts: usize,
    /// Dominance weight a pixel needs to join a class.
    pub similarity_threshold: f64,
    /// Relative-availability cutoff for mineral-rich refinement pixels.
    pub ra_high: f64,
    /// Relative-availability cutoff for impurity-rich refinement pixels.
    pub ra_low: f64,
    /// Ridge added to the within-class scatter before inversion.
    pub ridge: f64,
    /// Worker threads; 0 keeps the library default.
    pub threads: usize,
    pub soil_class: SoilClass,
    /// Bands to drop, in "0-6,57-75,224" form.
    pub band_mask: Option<String>,
    /// Radiometric parameter file, used by the conversion front end.
    pub radiometric: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn new(
        cube: impl Into<PathBuf>,
        library: impl Into<PathBuf>,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            cube: cube.into(),
            library: library.into(),
            out_dir: out_dir.into(),
            seed: 0,
            k_max: 10,
            k_override: None,
            restarts: 8,
            similarity_threshold: ASSIGN_THRESHOLD,
            ra_high: DEFAULT_RA_HIGH,
            ra_low: DEFAULT_RA_LOW,
            ridge: DEFAULT_RIDGE,
            threads: 0,
            soil_class: SoilClass::Auto,
            band_mask: None,
            radiometric: None,
        }
    }

    /// Read a config file. Missing keys keep their defaults; `cube` and
    /// `library` may stay empty here for a front end to fill in from flags,
    /// but [`Self::validate`] rejects a config that still lacks them.
    pub fn from_config(cfg: &FlatConfig) -> Result<Self> {
        let mut out = Self::new(
            cfg.get_path("cube").unwrap_or_default(),
            cfg.get_path("library").unwrap_or_default(),
            cfg.get_path("out_dir").unwrap_or_else(|| PathBuf::from("out")),
        );
        if let Some(seed) = cfg.get_u64("seed")? {
            out.seed = seed;
        }
        if let Some(k_max) = cfg.get_usize("k_max")? {
            out.k_max = k_max;
        }
        out.k_override = cfg.get_usize("k_override")?;
        if let Some(restarts) = cfg.get_usize("restarts")? {
            out.restarts = restarts;
        }
        if let Some(v) = cfg.get_f64("similarity_threshold")? {
            out.similarity_threshold = v;
        }
        if let Some(v) = cfg.get_f64("ra_high")? {
            out.ra_high = v;
        }
        if let Some(v) = cfg.get_f64("ra_low")? {
            out.ra_low = v;
        }
        if let Some(v) = cfg.get_f64("ridge")? {
            out.ridge = v;
        }
        if let Some(v) = cfg.get_usize("threads")? {
            out.threads = v;
        }
        if let Some(v) = cfg.get("soil_class") {
            out.soil_class = SoilClass::parse(v)?;
        }
        out.band_mask = cfg.get("band_mask").map(str::to_string);
        out.radiometric = cfg.get_path("radiometric");
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidSpec { reason });
        if self.cube.as_os_str().is_empty() {
            return bad("no input cube given".into());
        }
        if self.library.as_os_str().is_empty() {
            return bad("no library signature given".into());
        }
        if self.out_dir.as_os_str().is_empty() {
            return bad("no output directory given".into());
        }
        if !(self.similarity_threshold > 0.0 && self.similarity_threshold < 1.0) {
            return bad(format!(
                "similarity_threshold must lie in (0, 1), got {}",
                self.similarity_threshold
            ));
        }
        if !(self.ra_low >= 0.0 && self.ra_low < self.ra_high && self.ra_high <= 1.0) {
            return bad(format!(
                "relative-availability cutoffs need 0 <= low < high <= 1, got low={} high={}",
                self.ra_low, self.ra_high
            ));
        }
        if self.k_override.is_none() && self.k_max < 3 {
            return bad(format!(
                "k_max must be at least 3 for the elbow scan, got {}",
                self.k_max
            ));
        }
        if let Some(k) = self.k_override {
            if k == 0 {
                return bad("k_override must be at least 1".into());
            }
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1".into());
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return bad(format!("ridge must be finite and non-negative, got {}", self.ridge));
        }
        Ok(())
    }

    /// The algorithmic parameters, canonically rendered. This is what gets
    /// hashed and echoed into the manifest: input paths, output locations and
    /// thread counts are environment, not algorithm, and stay out.
    pub fn canonical_params(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("band_mask".into(), self.band_mask.clone().unwrap_or_default());
        m.insert(
            "k_override".into(),
            self.k_override.map_or_else(|| "none".into(), |k| k.to_string()),
        );
        m.insert("k_max".into(), self.k_max.to_string());
        m.insert("ra_high".into(), self.ra_high.to_string());
        m.insert("ra_low".into(), self.ra_low.to_string());
        m.insert("restarts".into(), self.restarts.to_string());
        m.insert("ridge".into(), self.ridge.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert(
            "similarity_threshold".into(),
            self.similarity_threshold.to_string(),
        );
        m.insert("soil_class".into(), self.soil_class.canonical());
        m
    }
}

/// Content stamp of one input file.
#[derive(Debug, Clone, Serialize)]
pub struct FileStamp {
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ElbowRecord {
    pub k_values: Vec<usize>,
    pub wcss: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdRecord {
    /// Lower correlation cutoff (impurity-rich below this).
    pub c1: f64,
    /// Upper correlation cutoff (mineral-rich above this).
    pub c2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubclassCounts {
    pub mineral_rich: usize,
    pub middle: usize,
    pub impurity_rich: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparationRecord {
    pub mineral_mean: f64,
    pub impurity_mean: f64,
    pub gap: f64,
    pub normalized_gap: f64,
}

impl From<&SeparationReport> for SeparationRecord {
    fn from(r: &SeparationReport) -> Self {
        Self {
            mineral_mean: r.mineral_mean,
            impurity_mean: r.impurity_mean,
            gap: r.gap,
            normalized_gap: r.normalized_gap,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaStats {
    pub soil_pixels: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTime {
    pub stage: &'static str,
    pub ms: f64,
}

/// Environment of a run: everything that may legitimately differ between two
/// runs that produce the same science.
#[derive(Debug, Clone, Serialize)]
pub struct RuntimeRecord {
    pub cube_path: String,
    pub library_path: String,
    pub out_dir: String,
    pub threads_requested: usize,
    pub timings: Vec<StageTime>,
}

/// Reproducibility record written next to the rasters.
///
/// Every field above `runtime` is a pure function of the effective config and
/// the input bytes.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub config: BTreeMap<String, String>,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: BTreeMap<&'static str, FileStamp>,
    pub rows: usize,
    pub cols: usize,
    pub bands_total: usize,
    pub bands_used: usize,
    pub valid_pixels: usize,
    pub elbow: ElbowRecord,
    pub chosen_k: usize,
    pub class_counts: Vec<usize>,
    pub unassigned_pixels: usize,
    pub invalid_pixels: usize,
    pub class_signature_correlations: Vec<Option<f64>>,
    pub soil_class: usize,
    pub soil_pixels: usize,
    pub thresholds: ThresholdRecord,
    pub subclass_counts: SubclassCounts,
    pub separation: SeparationRecord,
    pub representatives: &'static str,
    pub refined_high_pixels: usize,
    pub refined_low_pixels: usize,
    pub alpha: AlphaStats,
    pub outputs: BTreeMap<&'static str, String>,
    pub runtime: RuntimeRecord,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }
}

/// A completed mapping run: the manifest plus the grids front ends and tests
/// read back without round-tripping through files.
#[derive(Debug)]
pub struct MapRun {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    /// Mineral abundance per pixel; off-soil pixels hold the sentinel.
    pub alpha: Array2<f64>,
    /// Relative availability per pixel; off-soil pixels hold the sentinel.
    pub ra: Array2<f64>,
    pub preclassification: Preclassification,
}

fn stage<T>(name: &'static str, result: Result<T>) -> Result<T> {
    result.map_err(|source| Error::Stage {
        stage: name,
        source: Box::new(source),
    })
}

fn sha256_file(path: &Path) -> Result<FileStamp> {
    let bytes = std::fs::read(path).map_err(|source| Error::IoFailure {
        path: path.to_path_buf(),
        source,
    })?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(FileStamp {
        bytes: bytes.len() as u64,
        sha256: format!("{:x}", hasher.finalize()),
    })
}

fn sha256_text(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    format!("{:x}", hasher.finalize())
}

/// Mean spectrum of each class in the map, `None` for empty classes.
fn class_means(cube: &HyperspectralCube, pre: &Preclassification) -> Vec<Option<Vec<f64>>> {
    (0..pre.map.n_classes)
        .map(|class| {
            let pixels = match isolate_class(cube, &pre.map, class) {
                Ok(p) => p,
                Err(_) => return None,
            };
            let n = pixels.matrix.nrows() as f64;
            Some(
                (0..pixels.matrix.ncols())
                    .map(|b| pixels.matrix.column(b).sum() / n)
                    .collect(),
            )
        })
        .collect()
}

/// Pick the soil class: correlation of each class mean against the signature,
/// best wins. Returns the index and the correlation table for the manifest.
fn select_soil_class(
    cube: &HyperspectralCube,
    pre: &Preclassification,
    signature: &[f64],
    choice: &SoilClass,
) -> Result<(usize, Vec<Option<f64>>)> {
    let correlations: Vec<Option<f64>> = class_means(cube, pre)
        .iter()
        .map(|mean| {
            mean.as_ref()
                .and_then(|m| pearson_correlation(m, signature).ok())
        })
        .collect();
    let soil = match choice {
        SoilClass::Index(i) => {
            if *i >= pre.map.n_classes {
                return Err(Error::InvalidSpec {
                    reason: format!(
                        "soil class {i} out of range: the run produced {} classes",
                        pre.map.n_classes
                    ),
                });
            }
            *i
        }
        SoilClass::Auto => correlations
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|c| (i, c)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or(Error::SoilClassUndetermined)?
            .0,
    };
    Ok((soil, correlations))
}

/// Resample the library signature onto the cube's masked-in band grid. Cubes
/// without wavelength metadata must match the signature band-for-band.
fn signature_on_cube_grid(
    cube: &HyperspectralCube,
    signature: &SpectralSignature,
) -> Result<SpectralSignature> {
    match cube.masked_wavelengths() {
        Some(grid) => resample_to_grid(signature, &grid),
        None => {
            let bands = cube.masked_bands().len();
            if signature.len() != bands {
                return Err(Error::GridMismatch {
                    signature: signature.len(),
                    pixels: bands,
                });
            }
            Ok(signature.clone())
        }
    }
}

/// Scatter per-soil-pixel values onto the scene grid around a background
/// sentinel.
fn scatter(
    rows: usize,
    cols: usize,
    soil: &ClassPixels,
    values: &[f64],
    background: f64,
) -> Array2<f64> {
    let mut grid = Array2::from_elem((rows, cols), background);
    for (&(r, c), &v) in soil.locations.iter().zip(values) {
        grid[[r, c]] = v;
    }
    grid
}

/// Split the soil matrix into the rows labeled with one subclass.
fn subclass_matrix(soil: &ClassPixels, labels: &[Subclass], which: Subclass) -> Array2<f64> {
    let rows: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == which)
        .map(|(i, _)| i)
        .collect();
    let mut out = Array2::zeros((rows.len(), soil.matrix.ncols()));
    for (j, &i) in rows.iter().enumerate() {
        out.row_mut(j).assign(&soil.matrix.row(i));
    }
    out
}

/// Run the full mapping chain and write every artifact into `out_dir`.
///
/// Artifacts are written as their stage completes, so a failure partway
/// leaves the earlier rasters on disk for inspection.
pub fn run_map(config: &PipelineConfig) -> Result<MapRun> {
    config.validate()?;
    if config.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::InvalidSpec {
                reason: format!("cannot build a {}-thread worker pool: {e}", config.threads),
            })?;
        pool.install(|| run_map_inner(config))
    } else {
        run_map_inner(config)
    }
}

fn run_map_inner(config: &PipelineConfig) -> Result<MapRun> {
    let mut timings: Vec<StageTime> = Vec::new();
    let mut outputs: BTreeMap<&'static str, String> = BTreeMap::new();
    let out_dir = &config.out_dir;
    std::fs::create_dir_all(out_dir).map_err(|source| Error::IoFailure {
        path: out_dir.clone(),
        source,
    })?;
    let mut clock = Instant::now();
    let mut lap = |timings: &mut Vec<StageTime>, stage: &'static str| {
        let elapsed = clock.elapsed();
        clock = Instant::now();
        timings.push(StageTime {
            stage,
            ms: elapsed.as_secs_f64() * 1e3,
        });
    };

    // Ingest: cube, band mask, signature.
    let (hdr_path, img_path) = stage("ingest", locate_envi(&config.cube))?;
    let mut inputs = BTreeMap::new();
    inputs.insert("cube_header", sha256_file(&hdr_path)?);
    inputs.insert("cube_data", sha256_file(&img_path)?);
    inputs.insert("library", sha256_file(&config.library)?);
    let mut cube = stage("ingest", read_envi(&hdr_path, &img_path))?;
    if cube.unit != Unit::Reflectance {
        return Err(Error::Stage {
            stage: "ingest",
            source: Box::new(Error::StillRadiance),
        });
    }
    if let Some(mask) = &config.band_mask {
        stage("ingest", cube.apply_band_mask(mask))?;
    }
    let (library_signature, _) = stage("ingest", load_library_signature(&config.library))?;
    let signature = stage("ingest", signature_on_cube_grid(&cube, &library_signature))?;
    lap(&mut timings, "ingest");

    // Pre-classification.
    let pre = stage(
        "preclassify",
        preclassify_with(
            &cube,
            &PreclassifyOptions {
                k_max: config.k_max,
                k_override: config.k_override,
                seed: config.seed,
                restarts: config.restarts,
                similarity_threshold: config.similarity_threshold,
            },
        ),
    )?;
    let class_base = out_dir.join("class_map");
    stage("preclassify", export::write_label_raster(&class_base, &pre.map.labels))?;
    outputs.insert("class_map", "class_map.hdr".into());
    lap(&mut timings, "preclassify");

    // Soil class selection and isolation.
    let (soil_class, class_correlations) = stage(
        "soil_select",
        select_soil_class(&cube, &pre, &signature.values, &config.soil_class),
    )?;
    let soil = stage("soil_select", isolate_class(&cube, &pre.map, soil_class))?;
    lap(&mut timings, "soil_select");

    // Subclassing: correlations, thresholds, labels, mean representatives.
    let correlations = stage("subclass", correlate_soil(&soil, &signature.values))?;
    let thresholds = stage(
        "subclass",
        derive_thresholds(&soil, &signature.values, mix_seed(config.seed, 4)),
    )?;
    let labels = label_subclasses(&correlations, thresholds);
    let counts = SubclassCounts {
        mineral_rich: labels.iter().filter(|&&l| l == Subclass::MineralRich).count(),
        middle: labels.iter().filter(|&&l| l == Subclass::Middle).count(),
        impurity_rich: labels.iter().filter(|&&l| l == Subclass::ImpurityRich).count(),
    };
    let means = stage("subclass", mean_representatives(&soil, &labels))?;
    let subclass_base = out_dir.join("subclass_map");
    stage(
        "subclass",
        export::write_subclass_raster(&subclass_base, &pre.map.labels, &soil.locations, &labels),
    )?;
    outputs.insert("subclass_map", "subclass_map.hdr".into());
    lap(&mut timings, "subclass");

    // Discriminant axis and relative availability.
    let high = subclass_matrix(&soil, &labels, Subclass::MineralRich);
    let low = subclass_matrix(&soil, &labels, Subclass::ImpurityRich);
    let axis = stage("project", fisher_direction(&high, &low, config.ridge))?;
    let projection = stage("project", project_soil(&soil, &means, &axis))?;
    let separation = {
        let pick = |which: Subclass| -> Vec<f64> {
            labels
                .iter()
                .zip(&projection.t)
                .filter(|(&l, _)| l == which)
                .map(|(_, &t)| t)
                .collect()
        };
        stage(
            "project",
            separation_report(&pick(Subclass::MineralRich), &pick(Subclass::ImpurityRich)),
        )?
    };
    let ra_grid = scatter(
        cube.rows(),
        cube.cols(),
        &soil,
        &projection.ra,
        crate::unmix::OFF_SOIL,
    );
    let ra_base = out_dir.join("ra_map");
    stage("project", export::write_value_raster(&ra_base, &ra_grid.view()))?;
    outputs.insert("ra_map", "ra_map.hdr".into());
    lap(&mut timings, "project");

    // Refinement and unmixing.
    let refined = stage(
        "unmix",
        refine_representatives(&soil, &projection.ra, config.ra_high, config.ra_low),
    )?;
    let refined_high = projection.ra.iter().filter(|&&r| r >= config.ra_high).count();
    let refined_low = projection.ra.iter().filter(|&&r| r <= config.ra_low).count();
    let grid = stage(
        "unmix",
        abundance_map(cube.rows(), cube.cols(), &soil, &refined),
    )?;
    let alpha_base = out_dir.join("alpha_map");
    stage("unmix", export::write_value_raster(&alpha_base, &grid.alpha.view()))?;
    outputs.insert("alpha_map", "alpha_map.hdr".into());
    let residual_base = out_dir.join("residual_map");
    stage(
        "unmix",
        export::write_value_raster(&residual_base, &grid.residual.view()),
    )?;
    outputs.insert("residual_map", "residual_map.hdr".into());
    lap(&mut timings, "unmix");

    // Signature table, quicklook, manifest.
    let grid_um = cube
        .masked_wavelengths()
        .unwrap_or_else(|| cube.masked_bands().iter().map(|&b| b as f64).collect());
    let sig_path = out_dir.join("signatures.csv");
    stage(
        "export",
        export::write_signatures_csv(
            &sig_path,
            &grid_um,
            &[
                ("library", &signature.values),
                ("mineral_mean", &means.mineral),
                ("impurity_mean", &means.impurity),
                ("mineral_refined", &refined.mineral),
                ("impurity_refined", &refined.impurity),
            ],
        ),
    )?;
    outputs.insert("signatures", "signatures.csv".into());
    let quicklook_path = out_dir.join("alpha_quicklook.pgm");
    stage(
        "export",
        export::write_quicklook_pgm(&quicklook_path, &grid.alpha.view(), 0.0, 1.0),
    )?;
    outputs.insert("alpha_quicklook", "alpha_quicklook.pgm".into());
    outputs.insert("manifest", "manifest.json".into());
    lap(&mut timings, "export");

    let soil_alpha: Vec<f64> = soil
        .locations
        .iter()
        .map(|&(r, c)| grid.alpha[[r, c]])
        .collect();
    let alpha_stats = AlphaStats {
        soil_pixels: soil_alpha.len(),
        min: soil_alpha.iter().copied().fold(f64::INFINITY, f64::min),
        max: soil_alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: soil_alpha.iter().sum::<f64>() / soil_alpha.len().max(1) as f64,
    };

    let params = config.canonical_params();
    let config_hash = sha256_text(&serde_json::to_string(&params).expect("params serialize"));
    let manifest = RunManifest {
        command: "map",
        config: params,
        config_hash,
        seed: config.seed,
        inputs,
        rows: cube.rows(),
        cols: cube.cols(),
        bands_total: cube.bands(),
        bands_used: cube.masked_bands().len(),
        valid_pixels: cube.valid.iter().filter(|&&v| v).count(),
        elbow: ElbowRecord {
            k_values: pre.elbow.k_values.clone(),
            wcss: pre.elbow.wcss.clone(),
        },
        chosen_k: pre.chosen_k,
        class_counts: pre.map.class_counts(),
        unassigned_pixels: pre.map.unassigned_count(),
        invalid_pixels: pre.map.invalid_count(),
        class_signature_correlations: class_correlations,
        soil_class,
        soil_pixels: soil.locations.len(),
        thresholds: ThresholdRecord {
            c1: thresholds.lower,
            c2: thresholds.upper,
        },
        subclass_counts: counts,
        separation: SeparationRecord::from(&separation),
        representatives: "refined_relative_abundance",
        refined_high_pixels: refined_high,
        refined_low_pixels: refined_low,
        alpha: alpha_stats,
        outputs,
        runtime: RuntimeRecord {
            cube_path: config.cube.display().to_string(),
            library_path: config.library.display().to_string(),
            out_dir: out_dir.display().to_string(),
            threads_requested: config.threads,
            timings,
        },
    };
    let manifest_path = out_dir.join("manifest.json");
    std::fs::write(&manifest_path, manifest.to_json()).map_err(|source| Error::IoFailure {
        path: manifest_path.clone(),
        source,
    })?;

    Ok(MapRun {
        manifest,
        manifest_path,
        alpha: grid.alpha,
        ra: ra_grid,
        preclassification: pre,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soil_class_parses_auto_and_indices() {
        assert_eq!(SoilClass::parse("auto").unwrap(), SoilClass::Auto);
        assert_eq!(SoilClass::parse(" AUTO ").unwrap(), SoilClass::Auto);
        assert_eq!(SoilClass::parse("2").unwrap(), SoilClass::Index(2));
        assert!(SoilClass::parse("soil").is_err());
        assert!(SoilClass::parse("-1").is_err());
    }

    #[test]
    fn config_defaults_and_overrides_from_file() {
        let text = "cube = scene.hdr\nlibrary = lab.csv\nseed = 9\nk_max = 5\nra_high = 0.75\n";
        let cfg = FlatConfig::parse(text, "/tmp/run.cfg").unwrap();
        let pc = PipelineConfig::from_config(&cfg).unwrap();
        assert_eq!(pc.cube, PathBuf::from("/tmp/scene.hdr"));
        assert_eq!(pc.library, PathBuf::from("/tmp/lab.csv"));
        assert_eq!(pc.seed, 9);
        assert_eq!(pc.k_max, 5);
        assert!((pc.ra_high - 0.75).abs() < 1e-15);
        assert!((pc.ra_low - 0.2).abs() < 1e-15);
        assert_eq!(pc.restarts, 8);
        assert_eq!(pc.soil_class, SoilClass::Auto);
    }

    #[test]
    fn validation_requires_cube_and_library() {
        let cfg = FlatConfig::parse("library = lab.csv\n", "/tmp/run.cfg").unwrap();
        let partial = PipelineConfig::from_config(&cfg).unwrap();
        assert!(partial.validate().is_err());
        let cfg = FlatConfig::parse("cube = scene.hdr\n", "/tmp/run.cfg").unwrap();
        let mut partial = PipelineConfig::from_config(&cfg).unwrap();
        assert!(partial.validate().is_err());
        partial.library = PathBuf::from("lab.csv");
        assert!(partial.validate().is_ok());
    }

    #[test]
    fn validation_rejects_bad_cutoffs() {
        let mut pc = PipelineConfig::new("a.hdr", "b.csv", "out");
        pc.ra_low = 0.9;
        assert!(pc.validate().is_err());
        pc.ra_low = 0.2;
        pc.similarity_threshold = 1.0;
        assert!(pc.validate().is_err());
        pc.similarity_threshold = 0.5;
        pc.k_max = 2;
        assert!(pc.validate().is_err());
        pc.k_override = Some(2);
        assert!(pc.validate().is_ok());
    }

    #[test]
    fn canonical_params_exclude_environment() {
        let pc = PipelineConfig::new("a.hdr", "b.csv", "out");
        let params = pc.canonical_params();
        assert!(params.contains_key("seed"));
        assert!(params.contains_key("ra_high"));
        assert!(!params.values().any(|v| v.contains("a.hdr")));
        assert!(!params.contains_key("threads"));
        assert!(!params.contains_key("out_dir"));
    }

    #[test]
    fn stage_wrapper_keeps_error_class() {
        let wrapped = stage::<()>("ingest", Err(Error::StillRadiance)).unwrap_err();
        assert_eq!(wrapped.class(), crate::error::ErrorClass::Precondition);
        assert!(wrapped.to_string().starts_with("ingest:"));
    }
}
