use std::fs;
use std::path::{Path, PathBuf};

use crate::datasets::{ClassLabel, DatasetManifest, FeatureTable};
use crate::error::{Error, Result};
use crate::lime::{abs_lime, median, pos_lime, ContributionVector};

use super::grid::{CellFailure, FeatureSets, GridOutcome};
use super::report::{read_report_csv, write_report_csv, Condition, ReportRow};
use super::svg::{GuideLine, LineChart, Series};

/// Per-class mean β curves for the plots.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlotData {
    /// Over every RAW row, train and test.
    pub class_avg: [Option<Vec<f64>>; 3],
    /// Over test rows, per condition.
    pub by_condition: Vec<(Condition, [Option<Vec<f64>>; 3])>,
    pub contributions: Option<ContributionVector>,
}

fn class_means(table: &FeatureTable) -> [Option<Vec<f64>>; 3] {
    let mut sums = [vec![0.0; table.dim()], vec![0.0; table.dim()], vec![0.0; table.dim()]];
    let mut counts = [0usize; 3];
    for r in &table.rows {
        let k = r.label.ordinal();
        counts[k] += 1;
        for (s, v) in sums[k].iter_mut().zip(&r.x) {
            *s += v;
        }
    }
    std::array::from_fn(|k| (counts[k] > 0).then(|| sums[k].iter().map(|s| s / counts[k] as f64).collect()))
}

impl PlotData {
    pub fn new(features: &FeatureSets, manifest: &DatasetManifest, contributions: Option<ContributionVector>) -> Self {
        Self {
            class_avg: class_means(&features.raw),
            by_condition: features
                .tests(manifest)
                .iter()
                .map(|(c, t)| (*c, class_means(t)))
                .collect(),
            contributions,
        }
    }
}

pub const REPORT_FILE: &str = "report.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const CONTRIBUTIONS_FILE: &str = "contributions.csv";

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn index_series(name: &str, values: &[f64]) -> Series {
    Series {
        name: name.to_string(),
        points: values.iter().enumerate().map(|(i, v)| ((i + 1) as f64, *v)).collect(),
    }
}

/// Writes the report table and plots into `out_dir`; returns the paths
/// written.
pub fn emit_report(rows: &[ReportRow], failures: &[CellFailure], plots: &PlotData, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if rows.is_empty() && failures.is_empty() {
        return Err(Error::InvalidParameter("nothing to report".into()));
    }
    let out = out_dir.as_ref();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();

    let mut buf = Vec::new();
    write_report_csv(rows, &mut buf)?;
    written.push(write(out.join(REPORT_FILE), buf)?);

    if !failures.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["subset", "algorithm", "error"])?;
        for f in failures {
            w.write_record([f.subset.as_str(), f.algorithm.as_str(), f.error.as_str()])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(e.to_string()))?;
        written.push(write(out.join(FAILURES_FILE), bytes)?);
    }

    let class_series: Vec<Series> = ClassLabel::ALL
        .iter()
        .filter_map(|c| plots.class_avg[c.ordinal()].as_ref().map(|v| index_series(c.as_str(), v)))
        .collect();
    if !class_series.is_empty() {
        let chart = LineChart {
            title: "Average beta per AC coefficient".into(),
            x_label: "AC index (zig-zag)".into(),
            y_label: "mean beta".into(),
            series: class_series,
            guides: Vec::new(),
        };
        written.push(write(out.join("avg_beta_by_class.svg"), chart.render())?);
    }

    for class in ClassLabel::ALL {
        let series: Vec<Series> = plots
            .by_condition
            .iter()
            .filter_map(|(cond, means)| means[class.ordinal()].as_ref().map(|v| index_series(&cond.to_string(), v)))
            .collect();
        if series.is_empty() {
            continue;
        }
        let chart = LineChart {
            title: format!("Average beta of {} test images under JPEG", class.as_str()),
            x_label: "AC index (zig-zag)".into(),
            y_label: "mean beta".into(),
            series,
            guides: Vec::new(),
        };
        written.push(write(out.join(format!("beta_vs_qf_{}.svg", class.as_str())), chart.render())?);
    }

    if let Some(c) = &plots.contributions {
        written.push(write(out.join(CONTRIBUTIONS_FILE), c.to_file_string())?);
        written.push(write(out.join("pos_lime.txt"), pos_lime(c).to_lines())?);
        written.push(write(out.join("abs_lime.txt"), abs_lime(c).to_lines())?);
        let med = median(&c.c_avg.iter().map(|v| v.abs()).collect::<Vec<_>>());
        let chart = LineChart {
            title: format!("Average LIME contribution ({} correct predictions)", c.n_correct),
            x_label: "AC index (zig-zag)".into(),
            y_label: "contribution".into(),
            series: vec![index_series("C_avg", &c.c_avg)],
            guides: vec![
                GuideLine {
                    label: "+median |C_avg|".into(),
                    y: med,
                },
                GuideLine {
                    label: "-median |C_avg|".into(),
                    y: -med,
                },
            ],
        };
        written.push(write(out.join("lime_contributions.svg"), chart.render())?);
    }
    Ok(written)
}

pub fn emit_grid(outcome: &GridOutcome, manifest: &DatasetManifest, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let plots = PlotData::new(&outcome.features, manifest, outcome.contributions.clone());
    emit_report(&outcome.rows, &outcome.failures, &plots, out_dir)
}

/// Re-renders the report of a finished grid from the files it left behind.
pub fn rerender(manifest: &DatasetManifest, qualities: &[i64], cache_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let rows = read_report_csv(out_dir.join(REPORT_FILE))?;
    let raw = FeatureTable::read_cache(cache_dir.join("raw.csv"))?;
    let attacked = qualities
        .iter()
        .map(|&q| Ok((q, FeatureTable::read_cache(cache_dir.join(format!("qf{q}.csv")))?)))
        .collect::<Result<Vec<_>>>()?;
    let contrib_path = out_dir.join(CONTRIBUTIONS_FILE);
    let contributions = if contrib_path.exists() {
        Some(ContributionVector::read(&contrib_path)?)
    } else {
        None
    };
    let features = FeatureSets {
        raw,
        attacked,
        failures: Vec::new(),
    };
    let plots = PlotData::new(&features, manifest, contributions);
    emit_report(&rows, &[], &plots, out_dir)
}
