//! The `map` subcommand: the full chain from reflectance cube to abundance
//! rasters, driven by a [`PipelineConfig`] merged from config file and flags.

use std::path::PathBuf;

use clap::Args;
use lithomap::pipeline::{run_map, PipelineConfig, SoilClass};

use crate::{load_config, missing, CliResult, Shared};

#[derive(Args)]
pub struct MapArgs {
    #[command(flatten)]
    shared: Shared,
    /// Reflectance cube: either half of an ENVI header/data pair
    #[arg(long, value_name = "PATH")]
    cube: Option<PathBuf>,
    /// Laboratory signature CSV for the target mineral
    #[arg(long, value_name = "PATH")]
    library: Option<PathBuf>,
    /// `auto`, or a fixed class index from the pre-classification map
    #[arg(long, value_name = "CLASS")]
    soil_class: Option<String>,
    /// Fixed class count, bypassing the elbow choice
    #[arg(long, value_name = "K")]
    k_override: Option<usize>,
    /// Bands to drop, e.g. `0-6,57-75,224`
    #[arg(long, value_name = "SPEC")]
    band_mask: Option<String>,
}

pub fn run(args: MapArgs) -> CliResult {
    let cfg = load_config(&args.shared)?;
    let had_config = cfg.is_some();
    let mut config = match &cfg {
        Some(cfg) => PipelineConfig::from_config(cfg)?,
        None => PipelineConfig::new("", "", "out"),
    };
    if let Some(cube) = args.cube {
        config.cube = cube;
    }
    if let Some(library) = args.library {
        config.library = library;
    }
    if let Some(soil) = &args.soil_class {
        config.soil_class = SoilClass::parse(soil)?;
    }
    if let Some(k) = args.k_override {
        config.k_override = Some(k);
    }
    if let Some(mask) = args.band_mask {
        config.band_mask = Some(mask);
    }
    if let Some(seed) = args.shared.seed {
        config.seed = seed;
    }
    if let Some(threads) = args.shared.threads {
        config.threads = threads;
    }
    if let Some(out) = args.shared.out {
        config.out_dir = out;
    }
    if config.cube.as_os_str().is_empty() {
        return Err(missing("input cube", "--cube", "cube", had_config));
    }
    if config.library.as_os_str().is_empty() {
        return Err(missing(
            "library signature",
            "--library",
            "library",
            had_config,
        ));
    }
    config.validate()?;

    let run = run_map(&config)?;
    let m = &run.manifest;
    println!(
        "{} classes over {} bands; soil class {} holds {} of {} valid pixels",
        m.chosen_k, m.bands_used, m.soil_class, m.soil_pixels, m.valid_pixels
    );
    println!(
        "subclasses: {} mineral-rich, {} middle, {} impurity-rich (cutoffs {:.4} / {:.4})",
        m.subclass_counts.mineral_rich,
        m.subclass_counts.middle,
        m.subclass_counts.impurity_rich,
        m.thresholds.c1,
        m.thresholds.c2
    );
    println!(
        "abundance: min {:.4}, mean {:.4}, max {:.4} over {} soil pixels",
        m.alpha.min, m.alpha.mean, m.alpha.max, m.alpha.soil_pixels
    );
    println!("manifest: {}", run.manifest_path.display());
    Ok(())
}
