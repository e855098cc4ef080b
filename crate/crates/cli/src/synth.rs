//! The `synth` subcommand: scenes with known ground truth, either from a
//! built-in preset or from a scene description in a config file.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use lithomap::config::FlatConfig;
use lithomap::export::{write_label_raster, write_signatures_csv, write_value_raster};
use lithomap::ingest::{write_envi_cube, DataType, Interleave};
use lithomap::synth::{generate_scene, recovery_scene, simplex_cube, SceneSpec};

use crate::{io_err, load_config, write_json, CliError, CliResult, Shared};

#[derive(Args)]
pub struct SynthArgs {
    #[command(flatten)]
    shared: Shared,
    /// Built-in scene family; alternatively describe one in a --config file
    #[arg(long, value_enum, conflicts_with = "config")]
    preset: Option<Preset>,
    #[arg(long, value_name = "N")]
    rows: Option<usize>,
    #[arg(long, value_name = "N")]
    cols: Option<usize>,
    /// Band count (simplex preset)
    #[arg(long, value_name = "N")]
    bands: Option<usize>,
    /// Generator count (simplex preset)
    #[arg(long, value_name = "P")]
    endmembers: Option<usize>,
    /// Band-wise white-noise level (recovery preset); omit for noiseless
    #[arg(long, value_name = "DB")]
    snr_db: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Two background regions plus a soil half with known abundances
    Recovery,
    /// Random points in a simplex spanned by random generators
    Simplex,
}

pub fn run(args: SynthArgs) -> CliResult {
    match args.preset {
        Some(Preset::Recovery) => recovery(&args),
        Some(Preset::Simplex) => simplex(&args),
        None => {
            let Some(cfg) = load_config(&args.shared)? else {
                return Err(CliError::Usage(
                    "synth needs --preset recovery|simplex or a --config scene description"
                        .into(),
                ));
            };
            from_spec(&args, &cfg)
        }
    }
}

fn out_dir(args: &SynthArgs) -> PathBuf {
    args.shared
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn recovery(args: &SynthArgs) -> CliResult {
    let rows = args.rows.unwrap_or(64);
    let cols = args.cols.unwrap_or(64);
    let seed = args.shared.seed.unwrap_or(0);
    let scene = recovery_scene(rows, cols, seed, args.snr_db)?;
    let out = out_dir(args);
    std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;

    let (scene_hdr, _) = write_envi_cube(
        &out.join("scene"),
        &scene.cube,
        DataType::F32,
        Interleave::Bsq,
    )?;
    let (alpha_hdr, _) = write_value_raster(&out.join("truth_alpha"), &scene.truth_alpha.view())?;
    let regions = scene.regions.mapv(|v| v as i32);
    let (regions_hdr, _) = write_label_raster(&out.join("regions"), &regions)?;
    let library_path = out.join("library.csv");
    write_signatures_csv(
        &library_path,
        &scene.signature.wavelengths_um,
        &[("reflectance", &scene.signature.values)],
    )?;

    let manifest = serde_json::json!({
        "command": "synth",
        "preset": "recovery",
        "rows": rows,
        "cols": cols,
        "bands": scene.cube.bands(),
        "seed": seed,
        "noise_snr_db": args.snr_db,
        "outputs": {
            "scene": scene_hdr.display().to_string(),
            "truth_alpha": alpha_hdr.display().to_string(),
            "regions": regions_hdr.display().to_string(),
            "library": library_path.display().to_string(),
        },
    });
    write_json(&out.join("synth_manifest.json"), &manifest)?;

    let noise = match args.snr_db {
        Some(db) => format!("{db} dB noise"),
        None => "noiseless".into(),
    };
    println!(
        "wrote {}: {rows}x{cols}x{} recovery scene, seed {seed}, {noise}",
        scene_hdr.display(),
        scene.cube.bands()
    );
    Ok(())
}

fn simplex(args: &SynthArgs) -> CliResult {
    let rows = args.rows.unwrap_or(32);
    let cols = args.cols.unwrap_or(32);
    let bands = args.bands.unwrap_or(200);
    let p = args.endmembers.unwrap_or(4);
    let seed = args.shared.seed.unwrap_or(0);
    let (cube, generators) = simplex_cube(rows, cols, bands, p, seed)?;
    let out = out_dir(args);
    std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;

    let (scene_hdr, _) =
        write_envi_cube(&out.join("scene"), &cube, DataType::F32, Interleave::Bsq)?;
    let wavelengths = cube
        .wavelengths_um
        .clone()
        .unwrap_or_else(|| (0..bands).map(|b| b as f64).collect());
    let names: Vec<String> = (0..p).map(|i| format!("endmember_{i}")).collect();
    let rows_data: Vec<Vec<f64>> = (0..p).map(|i| generators.row(i).to_vec()).collect();
    let columns: Vec<(&str, &[f64])> = names
        .iter()
        .zip(&rows_data)
        .map(|(n, v)| (n.as_str(), v.as_slice()))
        .collect();
    let generators_path = out.join("generators.csv");
    write_signatures_csv(&generators_path, &wavelengths, &columns)?;

    let manifest = serde_json::json!({
        "command": "synth",
        "preset": "simplex",
        "rows": rows,
        "cols": cols,
        "bands": bands,
        "endmembers": p,
        "seed": seed,
        "outputs": {
            "scene": scene_hdr.display().to_string(),
            "generators": generators_path.display().to_string(),
        },
    });
    write_json(&out.join("synth_manifest.json"), &manifest)?;

    println!(
        "wrote {}: {rows}x{cols}x{bands} simplex scene over {p} generators, seed {seed}",
        scene_hdr.display()
    );
    Ok(())
}

fn from_spec(args: &SynthArgs, cfg: &FlatConfig) -> CliResult {
    let mut spec = SceneSpec::from_config(cfg)?;
    if let Some(seed) = args.shared.seed {
        spec.seed = seed;
    }
    let out = args
        .shared
        .out
        .clone()
        .or_else(|| cfg.get_path("out_dir"))
        .unwrap_or_else(|| PathBuf::from("out"));
    let (cube, classes, alpha) = generate_scene(&spec)?;
    std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;

    let (scene_hdr, _) =
        write_envi_cube(&out.join("scene"), &cube, DataType::F32, Interleave::Bsq)?;
    let (classes_hdr, _) = write_label_raster(&out.join("truth_classes"), &classes.labels)?;
    let (alpha_hdr, _) = write_value_raster(&out.join("truth_alpha"), &alpha.view())?;

    let manifest = serde_json::json!({
        "command": "synth",
        "source": cfg.path().display().to_string(),
        "rows": spec.rows,
        "cols": spec.cols,
        "bands": spec.bands,
        "seed": spec.seed,
        "noise_snr_db": spec.noise_snr_db,
        "outputs": {
            "scene": scene_hdr.display().to_string(),
            "truth_classes": classes_hdr.display().to_string(),
            "truth_alpha": alpha_hdr.display().to_string(),
        },
    });
    write_json(&out.join("synth_manifest.json"), &manifest)?;

    println!(
        "wrote {}: {}x{}x{} scene from {}, seed {}",
        scene_hdr.display(),
        spec.rows,
        spec.cols,
        spec.bands,
        cfg.path().display(),
        spec.seed
    );
    Ok(())
}
