use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{pca_project, EvalRow, PcaModel};
use crate::corpus::Gender;
use crate::error::{invalid, Error, Result};

pub const CSV_HEADER: &str =
    "init,attack,learning_rate,mi_accuracy,n_correct_speakers,mean_euclidean,std_euclidean";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub averaged_sample_train_accuracy: f64,
    pub averaged_sample_test_accuracy: f64,
    pub within_speaker_distance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cohort {
    #[serde(rename = "orig-female")]
    OrigFemale,
    #[serde(rename = "orig-male")]
    OrigMale,
    #[serde(rename = "inv-female")]
    InvFemale,
    #[serde(rename = "inv-male")]
    InvMale,
}

impl Cohort {
    pub const ALL: [Cohort; 4] = [Cohort::OrigFemale, Cohort::OrigMale, Cohort::InvFemale, Cohort::InvMale];

    pub fn new(inverted: bool, gender: Gender) -> Self {
        match (inverted, gender) {
            (false, Gender::Female) => Cohort::OrigFemale,
            (false, Gender::Male) => Cohort::OrigMale,
            (true, Gender::Female) => Cohort::InvFemale,
            (true, Gender::Male) => Cohort::InvMale,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Cohort::OrigFemale => "orig-female",
            Cohort::OrigMale => "orig-male",
            Cohort::InvFemale => "inv-female",
            Cohort::InvMale => "inv-male",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    pub cohort: Cohort,
}

/// One data line (no newline) in [`CSV_HEADER`] order, 9 decimals.
pub fn csv_row(r: &EvalRow) -> String {
    format!(
        "{},{},{:.9},{:.9},{},{:.9},{:.9}",
        r.init,
        r.attack.name(),
        r.learning_rate,
        r.mi_accuracy,
        r.n_correct_speakers,
        r.mean_euclidean,
        r.std_euclidean
    )
}

/// Projects original and inverted d-vectors onto the first two components.
pub fn scatter_points(
    pca: &PcaModel,
    originals: &[(Vec<f64>, Gender)],
    inverted: &[(Vec<f64>, Gender)],
) -> Result<Vec<ScatterPoint>> {
    if pca.components.len() < 2 {
        return Err(invalid!("scatter needs a PCA with at least 2 components"));
    }
    let tagged = originals
        .iter()
        .map(|(d, g)| (d, Cohort::new(false, *g)))
        .chain(inverted.iter().map(|(d, g)| (d, Cohort::new(true, *g))));
    tagged
        .map(|(d, cohort)| {
            let p = pca_project(pca, d)?;
            Ok(ScatterPoint { x: p[0], y: p[1], cohort })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub scatter: Option<PathBuf>,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `results.csv`, `results.json` (rows, baselines and the run
/// configuration) and, when points are given, `pca_scatter.csv` into `dir`.
pub fn render_report(
    dir: &Path,
    rows: &[EvalRow],
    baselines: &Baselines,
    config: &serde_json::Value,
    scatter: Option<&[ScatterPoint]>,
) -> Result<ReportFiles> {
    if rows.is_empty() {
        return Err(invalid!("report needs at least one row"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut csv = String::new();
    writeln!(csv, "{CSV_HEADER}").unwrap();
    for r in rows {
        csv.push_str(&csv_row(r));
        csv.push('\n');
    }
    writeln!(csv, "# averaged_sample_train_accuracy,{:.9}", baselines.averaged_sample_train_accuracy).unwrap();
    writeln!(csv, "# averaged_sample_test_accuracy,{:.9}", baselines.averaged_sample_test_accuracy).unwrap();
    writeln!(csv, "# within_speaker_distance,{:.9}", baselines.within_speaker_distance).unwrap();
    writeln!(csv, "# distances pool per-speaker means over correctly classified inversions").unwrap();
    let csv_path = dir.join("results.csv");
    write(&csv_path, &csv)?;

    let doc = serde_json::json!({
        "rows": rows,
        "baselines": baselines,
        "distance_pooling": "per-speaker mean over correctly classified inversions",
        "config": config,
    });
    let json_path = dir.join("results.json");
    write(&json_path, &(serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"))?;

    let scatter_path = match scatter {
        Some(points) => {
            let mut text = String::from("x,y,cohort\n");
            for p in points {
                writeln!(text, "{:.9},{:.9},{}", p.x, p.y, p.cohort.as_str()).unwrap();
            }
            let path = dir.join("pca_scatter.csv");
            write(&path, &text)?;
            Some(path)
        }
        None => None,
    };
    Ok(ReportFiles {
        csv: csv_path,
        json: json_path,
        scatter: scatter_path,
    })
}
