//! Regenerate the bundled survey fixtures under `fixtures/`.
//!
//! Each survey ships as a full measurement table (`table.csv`), the sites
//! file the `report` subcommand consumes (`sites.csv`), and a pair of tiny
//! rasters holding the mapped values at the site pixels. Site `i` sits at
//! pixel `(i, i)` of an n x n grid; every other pixel carries the off-soil
//! sentinel. Run from the repository root:
//!
//! ```text
//! cargo run -p lithomap-cli --example make_fixtures [out_root]
//! ```

use std::path::Path;

use lithomap::export::write_value_raster;
use lithomap::unmix::OFF_SOIL;
use ndarray::Array2;

struct Survey {
    name: &'static str,
    /// Laboratory ground truth per site, in percent.
    ground_truth: &'static [f64],
    relative_availability: &'static [f64],
    abundance: &'static [f64],
}

const SURVEYS: [Survey; 4] = [
    Survey {
        name: "mannar",
        ground_truth: &[0.29, 0.46, 0.09, 0.21, 0.36, 0.39, 0.49, 0.36, 0.35],
        relative_availability: &[
            0.4649, 0.445, 0.4563, 0.3743, 0.705, 0.5619, 0.7275, 0.668, 0.6358,
        ],
        abundance: &[
            0.4679, 0.4258, 0.4958, 0.5863, 0.7982, 0.6587, 0.8513, 0.8134, 0.6971,
        ],
    },
    Survey {
        name: "pulmoddai",
        ground_truth: &[0.59, 1.53, 12.27, 10.73, 1.95, 3.80, 5.70, 8.17],
        relative_availability: &[
            0.3670, 0.3021, 0.9893, 0.4922, 0.2917, 0.4912, 0.687, 0.7694,
        ],
        abundance: &[
            0.3670, 0.3954, 0.9607, 0.4922, 0.3271, 0.4565, 0.687, 0.7911,
        ],
    },
    Survey {
        name: "jaffna",
        ground_truth: &[1.42, 24.24, 4.88, 48.87],
        relative_availability: &[0.0984, 0.3234, 0.1663, 0.7688],
        abundance: &[0.1269, 0.5874, 0.1022, 0.7652],
    },
    Survey {
        name: "giants_tank",
        ground_truth: &[4.40, 1.20, 32.0, 2.10, 7.10],
        relative_availability: &[0.5479, 0.5192, 0.8199, 0.5252, 0.8724],
        abundance: &[0.6331, 0.5993, 0.9976, 0.6234, 0.9256],
    },
];

fn write_survey(root: &Path, survey: &Survey) {
    let n = survey.ground_truth.len();
    assert_eq!(survey.relative_availability.len(), n);
    assert_eq!(survey.abundance.len(), n);
    let dir = root.join(survey.name);
    std::fs::create_dir_all(&dir).expect("fixture directory");

    let mut table = String::from(
        "site_id,row,col,ground_truth_pct,relative_availability,abundance\n",
    );
    let mut sites = String::from("site_id,row,col,ground_truth_pct\n");
    for i in 0..n {
        let id = format!("{}_{}", survey.name, i + 1);
        table.push_str(&format!(
            "{id},{i},{i},{},{},{}\n",
            survey.ground_truth[i], survey.relative_availability[i], survey.abundance[i]
        ));
        sites.push_str(&format!("{id},{i},{i},{}\n", survey.ground_truth[i]));
    }
    std::fs::write(dir.join("table.csv"), table).expect("table.csv");
    std::fs::write(dir.join("sites.csv"), sites).expect("sites.csv");

    let mut ra = Array2::from_elem((n, n), OFF_SOIL);
    let mut alpha = Array2::from_elem((n, n), OFF_SOIL);
    for i in 0..n {
        ra[[i, i]] = survey.relative_availability[i];
        alpha[[i, i]] = survey.abundance[i];
    }
    write_value_raster(&dir.join("ra_map"), &ra.view()).expect("ra raster");
    write_value_raster(&dir.join("alpha_map"), &alpha.view()).expect("alpha raster");
}

fn main() {
    let root = std::env::args().nth(1).unwrap_or_else(|| "fixtures".into());
    let root = Path::new(&root);
    for survey in &SURVEYS {
        write_survey(root, survey);
    }
    println!("wrote {} surveys under {}", SURVEYS.len(), root.display());
}
