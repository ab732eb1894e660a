use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::classifiers::{evaluate, random_search_cv, train, Algorithm};
use crate::datasets::{undersample, DatasetManifest, FeatureTable, Split};
use crate::error::{Error, Result};
use crate::features::extract_batch;
use crate::jpeg_attack::attack_dataset;
use crate::lime::{abs_lime, average_contributions, pos_lime, ContributionVector, LimeConfig};
use crate::rng::{derive_seed, stable_hash};
use crate::subsets::SubsetSpec;

use super::config::ExperimentConfig;
use super::report::{Condition, ReportRow};

/// Extracted features shared by every grid cell.
#[derive(Clone, Debug)]
pub struct FeatureSets {
    /// Every manifest row, untouched.
    pub raw: FeatureTable,
    /// Test rows only, JPEG-compressed at each quality.
    pub attacked: Vec<(i64, FeatureTable)>,
    pub failures: Vec<(PathBuf, String)>,
}

impl FeatureSets {
    pub fn train(&self, manifest: &DatasetManifest) -> FeatureTable {
        self.raw.filter_split(manifest, Split::Train)
    }

    /// Test sets in report order: RAW first, then each quality.
    pub fn tests(&self, manifest: &DatasetManifest) -> Vec<(Condition, FeatureTable)> {
        std::iter::once((Condition::Raw, self.raw.filter_split(manifest, Split::Test)))
            .chain(self.attacked.iter().map(|(q, t)| (Condition::Qf(*q), t.clone())))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellFailure {
    pub subset: String,
    pub algorithm: Algorithm,
    pub error: String,
}

#[derive(Clone, Debug)]
pub struct GridOutcome {
    pub rows: Vec<ReportRow>,
    pub failures: Vec<CellFailure>,
    pub contributions: Option<ContributionVector>,
    pub features: FeatureSets,
}

/// Extracts untouched features for every manifest row and writes the cache.
pub fn extract_cmd(manifest: &DatasetManifest, out: impl AsRef<Path>) -> Result<(FeatureTable, Vec<(PathBuf, String)>)> {
    let outcome = extract_batch(manifest, |_, img| Ok(img));
    write_cache(&outcome.table, out.as_ref())?;
    Ok((outcome.table, outcome.failures))
}

fn write_cache(table: &FeatureTable, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    table.write_cache(path)
}

/// Reuses the cache at `path` when it holds exactly `expected` ids in order.
fn cached<F>(path: &Path, expected: &[String], compute: F) -> Result<(FeatureTable, Vec<(PathBuf, String)>)>
where
    F: FnOnce() -> Result<(FeatureTable, Vec<(PathBuf, String)>)>,
{
    if path.exists() {
        match FeatureTable::read_cache(path) {
            Ok(t) if t.rows.iter().map(|r| &r.id).eq(expected.iter()) => {
                log::info!("reusing {}", path.display());
                return Ok((t, Vec::new()));
            }
            Ok(_) => log::info!("{} is stale, re-extracting", path.display()),
            Err(e) => log::warn!("ignoring unreadable cache: {e}"),
        }
    }
    let (table, failures) = compute()?;
    write_cache(&table, path)?;
    Ok((table, failures))
}

fn ids<'a>(rows: impl Iterator<Item = &'a crate::datasets::ManifestRow>) -> Vec<String> {
    rows.map(|r| r.path.to_string_lossy().into_owned()).collect()
}

/// Extracts (or loads cached) RAW features and per-quality attacked test
/// features. Cache files are keyed by row ids only; clear the cache
/// directory when images change.
pub fn prepare_features(manifest: &DatasetManifest, qualities: &[i64], cache_dir: &Path) -> Result<FeatureSets> {
    let (raw, mut failures) = cached(&cache_dir.join("raw.csv"), &ids(manifest.rows.iter()), || {
        let o = extract_batch(manifest, |_, img| Ok(img));
        Ok((o.table, o.failures))
    })?;
    let test_rows: Vec<_> = manifest.rows_in(Split::Test).cloned().collect();
    let test_manifest = DatasetManifest::new(&manifest.base_dir, test_rows)?;
    let test_ids = ids(test_manifest.rows.iter());
    let mut attacked = Vec::with_capacity(qualities.len());
    for &q in qualities {
        let (t, f) = cached(&cache_dir.join(format!("qf{q}.csv")), &test_ids, || {
            let o = attack_dataset(&test_manifest, q)?;
            Ok((o.table, o.failures))
        })?;
        failures.extend(f);
        attacked.push((q, t));
    }
    Ok(FeatureSets { raw, attacked, failures })
}

pub fn run_grid(config: &ExperimentConfig) -> Result<GridOutcome> {
    config.validate()?;
    let manifest = DatasetManifest::read(&config.manifest)?;
    let features = prepare_features(&manifest, &config.qualities, &config.cache_dir())?;
    run_grid_on(config, &manifest, features)
}

/// The grid over already extracted features.
pub fn run_grid_on(config: &ExperimentConfig, manifest: &DatasetManifest, features: FeatureSets) -> Result<GridOutcome> {
    let train_all = features.train(manifest);
    let tests = features.tests(manifest);
    if train_all.is_empty() || tests[0].1.is_empty() {
        return Err(Error::EmptyTest);
    }
    // The only under-sampling of the run; every cell shares it.
    let train_set = undersample(&train_all, derive_seed(config.seed, 1))?;
    log::info!(
        "training on {} rows per class, testing on {} rows",
        train_set.len() / 3,
        tests[0].1.len()
    );

    let mut subsets: Vec<(String, Result<SubsetSpec>)> = config
        .subset_specs()?
        .into_iter()
        .map(|s| (s.name().to_string(), Ok(s)))
        .collect();
    let mut contributions = None;
    if config.lime {
        match lime_contributions(config, &train_set, &tests[0].1) {
            Ok(c) => {
                subsets.push(("POS-LIME".into(), Ok(pos_lime(&c))));
                subsets.push(("ABS-LIME".into(), Ok(abs_lime(&c))));
                contributions = Some(c);
            }
            Err(e) => {
                log::warn!("LIME failed: {e}");
                for name in ["POS-LIME", "ABS-LIME"] {
                    subsets.push((name.into(), Err(Error::InvalidSubset(format!("{name} unavailable: {e}")))));
                }
            }
        }
    }

    let cells: Vec<(usize, Algorithm)> = (0..subsets.len())
        .flat_map(|s| config.algorithms.iter().map(move |&a| (s, a)))
        .collect();
    let results: Vec<Result<Vec<ReportRow>>> = cells
        .par_iter()
        .map(|&(s, algorithm)| {
            let subset = subsets[s].1.as_ref().map_err(|e| Error::InvalidSubset(e.to_string()))?;
            run_cell(config, &train_set, &tests, subset, algorithm)
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for ((s, algorithm), res) in cells.into_iter().zip(results) {
        match res {
            Ok(r) => rows.extend(r),
            Err(e) => {
                let subset = subsets[s].0.clone();
                log::warn!("cell {subset}/{algorithm} failed: {e}");
                failures.push(CellFailure {
                    subset,
                    algorithm,
                    error: e.to_string(),
                });
            }
        }
    }
    Ok(GridOutcome {
        rows,
        failures,
        contributions,
        features,
    })
}

fn lime_contributions(config: &ExperimentConfig, train_set: &FeatureTable, test: &FeatureTable) -> Result<ContributionVector> {
    let seed = derive_seed(config.seed, stable_hash("lime"));
    let model = train(train_set, &SubsetSpec::all(), &config.lime_mlp(), seed)?;
    let cfg = LimeConfig {
        n_samples: config.lime_samples,
        ..LimeConfig::default()
    };
    average_contributions(&model, test, &cfg, derive_seed(seed, 1))
}

fn run_cell(
    config: &ExperimentConfig,
    train_set: &FeatureTable,
    tests: &[(Condition, FeatureTable)],
    subset: &SubsetSpec,
    algorithm: Algorithm,
) -> Result<Vec<ReportRow>> {
    let seed = derive_seed(config.seed, stable_hash(&format!("{}/{algorithm}", subset.name())));
    let search = random_search_cv(
        train_set,
        subset,
        &config.search_space(algorithm),
        config.search_trials,
        seed,
    )?;
    log::info!(
        "{}/{algorithm}: cv accuracy {:.4} with {:?}",
        subset.name(),
        search.best_score,
        search.best.describe()
    );
    let model = train(train_set, subset, &search.best, derive_seed(seed, 1))?;
    tests
        .iter()
        .map(|(condition, test)| {
            let m = evaluate(&model, test)?;
            Ok(ReportRow {
                subset: subset.name().to_string(),
                algorithm,
                condition: *condition,
                accuracy: m.accuracy,
                f1_macro: m.f1_macro,
                n_test: m.total(),
            })
        })
        .collect()
}
