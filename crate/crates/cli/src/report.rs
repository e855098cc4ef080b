//! The `report` subcommand: correlate mapped rasters against ground-truth
//! sites.
//!
//! Sites outside the raster or on non-soil pixels are skipped with a warning
//! rather than failing the run; at least two usable sites must remain. The
//! headline number correlates ground truth with relative availability, the
//! secondary one with unmixed abundance.

use std::path::{Path, PathBuf};

use clap::Args;
use lithomap::export::read_band_raster;
use lithomap::spectra::pearson_correlation;
use lithomap::unmix::OFF_SOIL;
use lithomap::Error;
use serde::Serialize;

use crate::{io_err, load_config, missing, CliError, CliResult, Shared};

#[derive(Args)]
pub struct ReportArgs {
    #[command(flatten)]
    shared: Shared,
    /// Ground-truth sites CSV with header `site_id,row,col,ground_truth_pct`
    #[arg(long, value_name = "PATH")]
    sites: Option<PathBuf>,
    /// Relative-availability raster from a mapping run
    #[arg(long, value_name = "PATH")]
    ra: Option<PathBuf>,
    /// Abundance raster from a mapping run
    #[arg(long, value_name = "PATH")]
    alpha: Option<PathBuf>,
}

struct Site {
    id: String,
    row: usize,
    col: usize,
    ground_truth: f64,
}

const SITES_HEADER: &str = "site_id,row,col,ground_truth_pct";

fn parse_sites(path: &Path) -> Result<Vec<Site>, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::IoFailure {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |line: usize, reason: String| Error::MalformedConfig {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(bad(1, "file is empty".into()));
    };
    let normalized: String = header.chars().filter(|c| !c.is_whitespace()).collect();
    if !normalized.eq_ignore_ascii_case(SITES_HEADER) {
        return Err(bad(
            1,
            format!("expected header `{SITES_HEADER}`, got `{}`", header.trim()),
        ));
    }
    let mut sites = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [id, row, col, truth] = fields[..] else {
            return Err(bad(
                line_no,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        };
        if id.is_empty() {
            return Err(bad(line_no, "site id is empty".into()));
        }
        let row = row
            .parse::<usize>()
            .map_err(|_| bad(line_no, format!("row `{row}` is not a non-negative integer")))?;
        let col = col
            .parse::<usize>()
            .map_err(|_| bad(line_no, format!("column `{col}` is not a non-negative integer")))?;
        let ground_truth = match truth.parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => {
                return Err(bad(
                    line_no,
                    format!("ground truth `{truth}` is not a finite number"),
                ))
            }
        };
        sites.push(Site {
            id: id.to_string(),
            row,
            col,
            ground_truth,
        });
    }
    Ok(sites)
}

#[derive(Serialize)]
struct SiteRecord {
    site_id: String,
    row: usize,
    col: usize,
    ground_truth_pct: f64,
    relative_availability: Option<f64>,
    abundance: Option<f64>,
    used: bool,
}

pub fn run(args: ReportArgs) -> CliResult {
    let cfg = load_config(&args.shared)?;
    let had_config = cfg.is_some();
    let get_path = |key: &str| cfg.as_ref().and_then(|c| c.get_path(key));
    let sites_path = args
        .sites
        .or_else(|| get_path("sites"))
        .ok_or_else(|| missing("sites table", "--sites", "sites", had_config))?;
    let ra_path = args
        .ra
        .or_else(|| get_path("ra"))
        .ok_or_else(|| missing("relative-availability raster", "--ra", "ra", had_config))?;
    let alpha_path = args
        .alpha
        .or_else(|| get_path("alpha"))
        .ok_or_else(|| missing("abundance raster", "--alpha", "alpha", had_config))?;
    let out = args
        .shared
        .out
        .or_else(|| get_path("out_dir"))
        .unwrap_or_else(|| PathBuf::from("out"));

    let sites = parse_sites(&sites_path)?;
    let ra = read_band_raster(&ra_path)?;
    let alpha = read_band_raster(&alpha_path)?;
    if ra.dim() != alpha.dim() {
        return Err(CliError::Core(Error::InvalidSpec {
            reason: format!(
                "raster shapes disagree: availability is {}x{}, abundance is {}x{}",
                ra.dim().0,
                ra.dim().1,
                alpha.dim().0,
                alpha.dim().1
            ),
        }));
    }
    let (rows, cols) = ra.dim();

    let mut records = Vec::with_capacity(sites.len());
    for site in &sites {
        let mut record = SiteRecord {
            site_id: site.id.clone(),
            row: site.row,
            col: site.col,
            ground_truth_pct: site.ground_truth,
            relative_availability: None,
            abundance: None,
            used: false,
        };
        if site.row >= rows || site.col >= cols {
            eprintln!(
                "warning: site {} at ({}, {}) lies outside the {rows}x{cols} raster; skipped",
                site.id, site.row, site.col
            );
            records.push(record);
            continue;
        }
        let ra_v = ra[[site.row, site.col]];
        let alpha_v = alpha[[site.row, site.col]];
        if ra_v == OFF_SOIL || alpha_v == OFF_SOIL {
            eprintln!(
                "warning: site {} at ({}, {}) falls on a pixel outside the soil class; skipped",
                site.id, site.row, site.col
            );
            records.push(record);
            continue;
        }
        record.relative_availability = Some(ra_v);
        record.abundance = Some(alpha_v);
        record.used = true;
        records.push(record);
    }

    let used: Vec<&SiteRecord> = records.iter().filter(|r| r.used).collect();
    if used.len() < 2 {
        return Err(CliError::Core(Error::TooFewSites { got: used.len() }));
    }
    let gt: Vec<f64> = used.iter().map(|r| r.ground_truth_pct).collect();
    let ra_vals: Vec<f64> = used
        .iter()
        .filter_map(|r| r.relative_availability)
        .collect();
    let alpha_vals: Vec<f64> = used.iter().filter_map(|r| r.abundance).collect();
    let vs_ra = pearson_correlation(&gt, &ra_vals)?;
    let vs_alpha = pearson_correlation(&gt, &alpha_vals)?;

    println!(
        "{:<12} {:>5} {:>5} {:>10} {:>14} {:>10}",
        "site", "row", "col", "truth", "availability", "abundance"
    );
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    for r in &records {
        let mark = if r.used { "" } else { "  (skipped)" };
        println!(
            "{:<12} {:>5} {:>5} {:>10.4} {:>14} {:>10}{mark}",
            r.site_id,
            r.row,
            r.col,
            r.ground_truth_pct,
            cell(r.relative_availability),
            cell(r.abundance)
        );
    }
    println!("sites used: {} of {}", used.len(), records.len());
    println!("correlation, ground truth vs relative availability: {vs_ra:.4}");
    println!("correlation, ground truth vs abundance: {vs_alpha:.4}");

    std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let mut csv = String::from(
        "site_id,row,col,ground_truth_pct,relative_availability,abundance,used\n",
    );
    let raw = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    for r in &records {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.site_id,
            r.row,
            r.col,
            r.ground_truth_pct,
            raw(r.relative_availability),
            raw(r.abundance),
            r.used
        ));
    }
    let csv_path = out.join("report.csv");
    std::fs::write(&csv_path, csv).map_err(|e| io_err(&csv_path, e))?;

    let report = serde_json::json!({
        "command": "report",
        "sites_total": records.len(),
        "sites_used": used.len(),
        "correlation_vs_relative_availability": vs_ra,
        "correlation_vs_abundance": vs_alpha,
        "sites": records,
    });
    crate::write_json(&out.join("report.json"), &report)?;
    Ok(())
}
