//! The `convert` subcommand: calibrated radiance to top-of-atmosphere
//! reflectance, with optional physical removal of masked bands.

use std::path::PathBuf;

use clap::Args;
use lithomap::config::FlatConfig;
use lithomap::ingest::{
    locate_envi, read_envi, to_reflectance, write_envi_cube, DataType, Interleave,
    RadiometricParams,
};

use crate::{io_err, load_config, missing, write_json, CliResult, Shared};

#[derive(Args)]
pub struct ConvertArgs {
    #[command(flatten)]
    shared: Shared,
    /// Calibrated radiance cube: either half of an ENVI header/data pair
    #[arg(long, value_name = "PATH")]
    cube: Option<PathBuf>,
    /// Radiometric parameter file: earth_sun_distance, solar_zenith_deg,
    /// esun_csv or esun_constant, radiance_scale
    #[arg(long, value_name = "PATH")]
    radiometric: Option<PathBuf>,
    /// Bands to drop from the written cube, e.g. `0-6,57-75,224`
    #[arg(long, value_name = "SPEC")]
    band_mask: Option<String>,
}

pub fn run(args: ConvertArgs) -> CliResult {
    let cfg = load_config(&args.shared)?;
    let had_config = cfg.is_some();
    let get_path = |key: &str| cfg.as_ref().and_then(|c| c.get_path(key));
    let cube_path = args
        .cube
        .or_else(|| get_path("cube"))
        .ok_or_else(|| missing("input cube", "--cube", "cube", had_config))?;
    let radiometric_path = args.radiometric.or_else(|| get_path("radiometric")).ok_or_else(|| {
        missing(
            "radiometric parameter file",
            "--radiometric",
            "radiometric",
            had_config,
        )
    })?;
    let band_mask = args
        .band_mask
        .or_else(|| cfg.as_ref().and_then(|c| c.get("band_mask").map(str::to_string)));
    let out = args
        .shared
        .out
        .or_else(|| get_path("out_dir"))
        .unwrap_or_else(|| PathBuf::from("out"));

    let (hdr, img) = locate_envi(&cube_path)?;
    let mut cube = read_envi(&hdr, &img)?;
    let bands_in = cube.bands();
    let params = RadiometricParams::from_config(&FlatConfig::load(&radiometric_path)?, bands_in)?;
    let stats = to_reflectance(&mut cube, &params)?;
    if let Some(mask) = &band_mask {
        cube = cube.without_bands(mask)?;
    }

    std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let (out_hdr, out_img) =
        write_envi_cube(&out.join("reflectance"), &cube, DataType::F32, Interleave::Bsq)?;

    let manifest = serde_json::json!({
        "command": "convert",
        "cube": cube_path.display().to_string(),
        "radiometric": radiometric_path.display().to_string(),
        "band_mask": band_mask,
        "bands_in": bands_in,
        "bands_out": cube.bands(),
        "negative_clamped": stats.negative_clamped,
        "outputs": {
            "header": out_hdr.display().to_string(),
            "data": out_img.display().to_string(),
        },
    });
    write_json(&out.join("convert_manifest.json"), &manifest)?;

    println!(
        "wrote {} ({} of {} bands kept, {} negative values clamped)",
        out_img.display(),
        cube.bands(),
        bands_in,
        stats.negative_clamped
    );
    Ok(())
}
