use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dctrace::classifiers::{random_search_cv, SearchSpace};
use dctrace::datasets::{synth_generate, undersample, SynthConfig, SynthProfiles};
use dctrace::harness::{emit_grid, extract_cmd, rerender, run_grid, ExperimentConfig};
use dctrace::jpeg_attack::{attack_dataset, attack_feature_cache};
use dctrace::lime::{abs_lime, average_contributions, pos_lime, LimeConfig};
use dctrace::subsets::{centered, first_k, last_t, manual_families};
use dctrace::{evaluate, train, Algorithm, ClassLabel, DatasetManifest, FeatureTable, Hyperparams, Split, SubsetSpec, TrainedModel};

/// Block-DCT beta features for real / GAN / diffusion image attribution.
#[derive(Parser)]
#[command(name = "dctrace", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract 63 AC beta features for every image in a manifest.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-extract features after JPEG compression at a quality factor.
    Attack(AttackArgs),
    /// Train a classifier on cached features.
    Train(TrainArgs),
    /// Evaluate a trained model on cached features.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Average LIME contributions of an MLP over correctly classified rows.
    Lime {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Contributions file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print coefficient subsets.
    Subsets {
        #[arg(value_enum, default_value_t = Family::Manual)]
        family: Family,
        /// Print the indices of one subset spec instead (e.g. `first:28`, `abs-lime:c.csv`).
        #[arg(long)]
        spec: Option<String>,
    },
    /// Run the subset x algorithm x condition grid and write the report.
    Grid {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-render report plots from a finished grid.
    Report {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a synthetic three-class corpus with a manifest.
    Synth(SynthArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Feature cache written by `extract` or `attack`.
    #[arg(long)]
    features: PathBuf,
    /// Restrict rows to one split of this manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Defaults to `test` for evaluation and LIME when a manifest is given.
    #[arg(long, value_enum)]
    split: Option<SplitArg>,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    qf: i64,
    /// Compress the test rows of this manifest (training rows stay untouched).
    #[arg(long, conflicts_with = "features", required_unless_present = "features")]
    manifest: Option<PathBuf>,
    /// Compress every row of this feature cache; ids are image paths.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Image directory for `--features` ids.
    #[arg(long, default_value = ".")]
    base_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_parser = parse_algorithm)]
    algorithm: Algorithm,
    #[arg(long, default_value = "all")]
    subset: String,
    /// Hyperparameters as JSON, e.g. `{"algorithm":"knn","k":3}`.
    #[arg(long, conflicts_with = "search_trials")]
    params: Option<String>,
    /// Pick hyperparameters by random search with 3-fold CV.
    #[arg(long)]
    search_trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Train on all rows instead of an equal number per class.
    #[arg(long)]
    no_undersample: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 300)]
    n_per_class: usize,
    #[arg(long, default_value_t = 128)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long, value_enum, default_value_t = Profile::Tiered)]
    profile: Profile,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    First,
    Last,
    Center,
    Manual,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    /// Decaying spectrum with a magnitude tier per class.
    Tiered,
    /// Classes differ only in AC indices 31..63.
    HighBand,
    /// Classes differ only in AC indices 1..28.
    LowBand,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: dctrace::Error| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for bad arguments, 2 for anything wrong with the data.
fn exit_code(e: &anyhow::Error) -> u8 {
    use dctrace::Error as E;
    match e.chain().find_map(|c| c.downcast_ref::<E>()) {
        Some(E::InvalidParameter(_) | E::InvalidSubset(_) | E::QualityOutOfRange(_) | E::NotAnMlp(_)) => 1,
        _ => 2,
    }
}

fn run(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Extract { manifest, out } => {
            let manifest = DatasetManifest::read(&manifest)?;
            let (table, failures) = extract_cmd(&manifest, &out)?;
            println!("{} rows written to {}", table.len(), out.display());
            Ok(report_failures(&failures))
        }
        Command::Attack(a) => {
            let outcome = match (&a.manifest, &a.features) {
                (Some(m), _) => attack_dataset(&DatasetManifest::read(m)?, a.qf)?,
                (None, Some(f)) => attack_feature_cache(&FeatureTable::read_cache(f)?, &a.base_dir, a.qf)?,
                (None, None) => bail!(dctrace::Error::InvalidParameter("--manifest or --features is required".into())),
            };
            write_table(&outcome.table, &a.out)?;
            println!("{} rows at QF{} written to {}", outcome.table.len(), a.qf, a.out.display());
            Ok(report_failures(&outcome.failures))
        }
        Command::Train(a) => train_cmd(a),
        Command::Evaluate { model, data } => {
            let model = TrainedModel::load(&model)?;
            let table = load_rows(&data, Split::Test)?;
            let m = evaluate(&model, &table)?;
            println!("model: {} on {} ({} features)", model.algorithm, model.subset.name(), model.subset.len());
            println!("rows: {}", m.total());
            println!("accuracy: {:.4}", m.accuracy);
            println!("f1_macro: {:.4}", m.f1_macro);
            println!("confusion (rows true, columns predicted: real gan dm):");
            for (label, row) in ClassLabel::ALL.iter().zip(&m.confusion) {
                println!("  {:<5}{:>6}{:>6}{:>6}", label.as_str(), row[0], row[1], row[2]);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Lime {
            model,
            data,
            samples,
            seed,
            out,
        } => {
            let model = TrainedModel::load(&model)?;
            let table = load_rows(&data, Split::Test)?;
            let cfg = LimeConfig {
                n_samples: samples,
                ..LimeConfig::default()
            };
            let c = average_contributions(&model, &table, &cfg, seed)?;
            c.write(&out)?;
            println!("averaged over {} correct predictions; written to {}", c.n_correct, out.display());
            println!("POS-LIME ({}): {}", pos_lime(&c).len(), join(pos_lime(&c).indices()));
            println!("ABS-LIME ({}): {}", abs_lime(&c).len(), join(abs_lime(&c).indices()));
            Ok(ExitCode::SUCCESS)
        }
        Command::Subsets { family, spec } => {
            let specs = match spec {
                Some(s) => vec![SubsetSpec::parse(&s)?],
                None => match family {
                    Family::First => (2..=30).map(first_k).collect::<Result<_, _>>()?,
                    Family::Last => (2..=35).rev().map(last_t).collect::<Result<_, _>>()?,
                    Family::Center => (1..=15).map(centered).collect::<Result<_, _>>()?,
                    Family::Manual => manual_families(),
                },
            };
            for s in specs {
                println!("{}\t{}", s.name(), join(s.indices()));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Grid { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let manifest = DatasetManifest::read(&cfg.manifest)?;
            let outcome = run_grid(&cfg)?;
            let written = emit_grid(&outcome, &manifest, &cfg.output_dir)?;
            println!("{} report rows; {} files in {}", outcome.rows.len(), written.len(), cfg.output_dir.display());
            for f in &outcome.failures {
                eprintln!("failed cell {}/{}: {}", f.subset, f.algorithm, f.error);
            }
            if !outcome.features.failures.is_empty() {
                eprintln!("{} images could not be processed", outcome.features.failures.len());
            }
            Ok(if outcome.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            })
        }
        Command::Report { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let manifest = DatasetManifest::read(&cfg.manifest)?;
            let written = rerender(&manifest, &cfg.qualities, &cfg.cache_dir(), &cfg.output_dir)?;
            println!("{} files in {}", written.len(), cfg.output_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth(a) => {
            let profiles = match a.profile {
                Profile::Tiered => SynthProfiles::tiered(),
                Profile::HighBand => SynthProfiles::separated_band(31, 63, 3.0, [1.0, 1.3, 1.69]),
                Profile::LowBand => SynthProfiles::separated_band(1, 28, 12.0, [1.0, 1.3, 1.69]),
            };
            let corpus = synth_generate(&SynthConfig {
                profiles,
                n_per_class: a.n_per_class,
                image_size: a.size,
                seed: a.seed,
            })?;
            let manifest = corpus.write(&a.out, a.train_fraction, a.seed)?;
            println!(
                "{} images, manifest at {}",
                manifest.rows.len(),
                a.out.join("manifest.csv").display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn train_cmd(a: TrainArgs) -> anyhow::Result<ExitCode> {
    let subset = SubsetSpec::parse(&a.subset)?;
    let mut table = load_rows(&a.data, Split::Train)?;
    if !a.no_undersample {
        table = undersample(&table, a.seed)?;
    }
    let hyperparams = match (&a.params, a.search_trials) {
        (Some(json), _) => {
            let hp: Hyperparams = serde_json::from_str(json).context("parsing --params")?;
            if hp.algorithm() != a.algorithm {
                bail!(dctrace::Error::InvalidParameter(format!(
                    "--params describe {}, not {}",
                    hp.algorithm(),
                    a.algorithm
                )));
            }
            hp
        }
        (None, Some(n)) => {
            let outcome = random_search_cv(&table, &subset, &SearchSpace::default_for(a.algorithm), n, a.seed)?;
            println!("best CV accuracy {:.4}", outcome.best_score);
            outcome.best
        }
        (None, None) => Hyperparams::default_for(a.algorithm),
    };
    let model = train(&table, &subset, &hyperparams, a.seed)?;
    model.save(&a.out)?;
    println!(
        "trained {} on {} rows, subset {}; hyperparameters {:?}",
        a.algorithm,
        table.len(),
        subset.name(),
        hyperparams.describe()
    );
    println!("model written to {}", a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn load_rows(data: &DataArgs, default_split: Split) -> anyhow::Result<FeatureTable> {
    let table = FeatureTable::read_cache(&data.features)?;
    let split = match data.split {
        Some(SplitArg::Train) => Some(Split::Train),
        Some(SplitArg::Test) => Some(Split::Test),
        None => data.manifest.as_ref().map(|_| default_split),
    };
    Ok(match (&data.manifest, split) {
        (Some(m), Some(s)) => table.filter_split(&DatasetManifest::read(m)?, s),
        (None, Some(_)) => bail!(dctrace::Error::InvalidParameter("--split needs --manifest".into())),
        _ => table,
    })
}

fn write_table(table: &FeatureTable, out: &Path) -> anyhow::Result<()> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    table.write_cache(out)?;
    Ok(())
}

fn report_failures(failures: &[(PathBuf, String)]) -> ExitCode {
    if failures.is_empty() {
        return ExitCode::SUCCESS;
    }
    for (path, err) in failures {
        eprintln!("skipped {}: {err}", path.display());
    }
    eprintln!("{} images skipped", failures.len());
    ExitCode::from(2)
}

fn join(indices: &[usize]) -> String {
    indices.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}
