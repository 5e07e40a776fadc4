use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mlrules::boosting::TrainConfig;
use mlrules::data::{Dataset, Ensemble, LabelVector};
use mlrules::head::HeadKind;
use mlrules::io::{load_dataset, save_arff, LabelSpec};
use mlrules::losses::LossId;
use mlrules::metrics::Report;
use mlrules::predict::{predict, Decoding, PredictionStrategy};
use mlrules::synthetic::{generate, Scenario, SyntheticConfig};
use mlrules::trajectory::{default_checkpoints, run_trajectory, to_tsv, Variant};
use mlrules::tune::{grid_search, report_tsv, GridSearchConfig, SelectionMetric};
use mlrules::{model, par, train};

/// Gradient boosted multi-label classification rules.
#[derive(Parser)]
#[command(name = "mlrules", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a rule ensemble and save it as a model document.
    Train {
        /// Training data (.arff or .csv).
        data: PathBuf,
        #[command(flatten)]
        labels: LabelArgs,
        #[command(flatten)]
        training: TrainingArgs,
        /// Where to write the model.
        #[arg(long)]
        model: PathBuf,
    },
    /// Predict label vectors for a dataset, written as CSV.
    Predict {
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        labels: OptionalLabelArgs,
        #[arg(long)]
        decode: Option<Decoding>,
        /// Output file; standard output if omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Report Hamming loss, subset 0/1 loss and example-based F1.
    Evaluate {
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        labels: OptionalLabelArgs,
        #[arg(long)]
        decode: Option<Decoding>,
        /// Print the report as JSON instead of key=value lines.
        #[arg(long)]
        json: bool,
        /// Evaluate only the first N rules.
        #[arg(long)]
        rules: Option<usize>,
    },
    /// Select shrinkage, L2 weight and number of rules on a hold-out split.
    Tune {
        data: PathBuf,
        #[command(flatten)]
        labels: LabelArgs,
        #[command(flatten)]
        training: TrainingArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5")]
        shrinkage_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,1,4,16,64")]
        l2_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "50,100,250,500,1000,2500,5000,10000")]
        rules_grid: Vec<usize>,
        #[arg(long, default_value_t = 0.2)]
        validation_fraction: f64,
        /// Selection metric: hamming or subset01.
        #[arg(long, default_value = "subset01")]
        metric: SelectionMetric,
        /// Maximum number of worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Write the table of all grid cells here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Retrain the best configuration on all data and save it here.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Generate a synthetic train/test pair and its true boundaries.
    Synth {
        #[arg(long, default_value = "marginal-independence")]
        scenario: Scenario,
        #[arg(long, default_value_t = 10_000)]
        examples: usize,
        #[arg(long, default_value_t = 6)]
        num_labels: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        /// Width of the fan of boundary angles in radians (marginal-dependence).
        #[arg(long, default_value_t = 0.1)]
        spread: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Directory for train.arff, test.arff and boundaries.json.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Test-set losses of each variant as rules are added, as TSV.
    Trajectory {
        /// Training data; omit to generate a synthetic problem.
        #[arg(long, requires = "test")]
        train: Option<PathBuf>,
        #[arg(long, requires = "train")]
        test: Option<PathBuf>,
        #[command(flatten)]
        labels: OptionalLabelArgs,
        /// Synthetic scenario used when no data files are given.
        #[arg(long, default_value = "marginal-independence")]
        scenario: Scenario,
        #[arg(long, default_value_t = 10_000)]
        examples: usize,
        #[arg(long, default_value_t = 1)]
        data_seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "lw-single,lw-multi,ew-single,ew-multi")]
        variants: Vec<Variant>,
        /// Rule counts to evaluate; defaults to 1, 2, 4, ..., 512, 1000.
        #[arg(long, value_delimiter = ',')]
        checkpoints: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0.3)]
        shrinkage: f64,
        #[arg(long, default_value_t = 0.0)]
        l2: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct LabelArgs {
    /// Number of trailing label attributes, or a comma-separated list of
    /// label attribute names.
    #[arg(long)]
    labels: String,
}

#[derive(Args)]
struct OptionalLabelArgs {
    /// Label attributes (count or names); defaults to the model's labels.
    #[arg(long)]
    labels: Option<String>,
}

#[derive(Args)]
struct TrainingArgs {
    /// label-wise-logistic (lw) or example-wise-logistic (ew).
    #[arg(long, default_value = "lw")]
    loss: LossId,
    /// single or multi.
    #[arg(long, default_value = "single")]
    head: HeadKind,
    #[arg(long, default_value_t = 1000)]
    rules: usize,
    #[arg(long, default_value_t = 0.3)]
    shrinkage: f64,
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Refine rules on all examples instead of a bootstrap sample.
    #[arg(long)]
    no_bagging: bool,
    /// Consider every attribute at each refinement step.
    #[arg(long)]
    no_feature_sampling: bool,
}

impl TrainingArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            loss: self.loss,
            head: self.head,
            rules: self.rules,
            shrinkage: self.shrinkage,
            l2: self.l2,
            bagging: !self.no_bagging,
            feature_sampling: !self.no_feature_sampling,
            seed: self.seed,
        }
    }
}

fn label_spec(text: &str) -> LabelSpec {
    match text.trim().parse::<usize>() {
        Ok(n) => LabelSpec::Trailing(n),
        Err(_) => LabelSpec::Names(text.split(',').map(|s| s.trim().to_string()).collect()),
    }
}

fn load(path: &Path, labels: &LabelSpec) -> Result<Dataset> {
    load_dataset(path, labels).with_context(|| format!("cannot load '{}'", path.display()))
}

/// Loads data for an existing model and checks that it has the model's
/// attributes and labels.
fn load_for_model(path: &Path, labels: &OptionalLabelArgs, ensemble: &Ensemble) -> Result<Dataset> {
    let spec = match &labels.labels {
        Some(text) => label_spec(text),
        None => LabelSpec::Names(ensemble.label_names().to_vec()),
    };
    let data = load(path, &spec)?;
    if data.schema() != ensemble.schema() {
        bail!(
            "'{}' does not have the attributes the model was trained on",
            path.display()
        );
    }
    if data.num_labels() != ensemble.num_labels() {
        bail!(
            "'{}' has {} labels but the model predicts {}",
            path.display(),
            data.num_labels(),
            ensemble.num_labels()
        );
    }
    Ok(data)
}

fn load_model(path: &Path) -> Result<Ensemble> {
    model::load(path).with_context(|| format!("cannot load model '{}'", path.display()))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write '{}'", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn predictions_csv(names: &[String], predicted: &[LabelVector]) -> String {
    let mut out = names.join(",");
    out.push('\n');
    for y in predicted {
        let row: Vec<&str> = y.as_slice().iter().map(|&v| if v > 0 { "1" } else { "0" }).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            data,
            labels,
            training,
            model: out,
        } => {
            let dataset = load(&data, &label_spec(&labels.labels))?;
            let ensemble = train(&dataset, &training.config())?;
            model::save(&ensemble, &out).with_context(|| format!("cannot write '{}'", out.display()))?;
            eprintln!(
                "trained {} rules on {} examples, {} labels",
                ensemble.len(),
                dataset.num_examples(),
                dataset.num_labels()
            );
        }
        Command::Predict {
            data,
            model: model_path,
            labels,
            decode,
            output,
        } => {
            let ensemble = load_model(&model_path)?;
            let dataset = load_for_model(&data, &labels, &ensemble)?;
            let decoding = decode.unwrap_or(Decoding::for_loss(ensemble.metadata().loss));
            let strategy = PredictionStrategy::for_ensemble(&ensemble, decoding)?;
            let predicted = predict(&ensemble, dataset.examples(), &strategy)?;
            write_output(output.as_deref(), &predictions_csv(ensemble.label_names(), &predicted))?;
        }
        Command::Evaluate {
            data,
            model: model_path,
            labels,
            decode,
            json,
            rules,
        } => {
            let mut ensemble = load_model(&model_path)?;
            if let Some(t) = rules {
                ensemble = ensemble.prefix(t)?;
            }
            let dataset = load_for_model(&data, &labels, &ensemble)?;
            let decoding = decode.unwrap_or(Decoding::for_loss(ensemble.metadata().loss));
            let strategy = PredictionStrategy::for_ensemble(&ensemble, decoding)?;
            let predicted = predict(&ensemble, dataset.examples(), &strategy)?;
            let report = Report::compute(dataset.labels(), &predicted)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.to_key_value());
            }
        }
        Command::Tune {
            data,
            labels,
            training,
            shrinkage_grid,
            l2_grid,
            rules_grid,
            validation_fraction,
            metric,
            jobs,
            report,
            model: out,
        } => {
            let dataset = load(&data, &label_spec(&labels.labels))?;
            let grid = GridSearchConfig {
                shrinkage: shrinkage_grid,
                l2: l2_grid,
                rules: rules_grid,
                validation_fraction,
                metric,
            };
            let base = training.config();
            let result = par::with_threads(jobs, || grid_search(&dataset, &base, &grid))?;
            if let Some(path) = report {
                write_output(Some(&path), &report_tsv(&result))?;
            }
            let failed = result.cells.iter().filter(|c| c.error.is_some()).count();
            if failed > 0 {
                eprintln!("{failed} of {} grid cells failed to train", result.cells.len());
            }
            println!("{}", serde_json::to_string_pretty(&result.best)?);
            eprintln!("best validation {}: {}", result.metric, result.best_value);
            if let Some(path) = out {
                let ensemble = par::with_threads(jobs, || train(&dataset, &result.best))?;
                model::save(&ensemble, &path).with_context(|| format!("cannot write '{}'", path.display()))?;
            }
        }
        Command::Synth {
            scenario,
            examples,
            num_labels,
            noise,
            spread,
            seed,
            out_dir,
        } => {
            let config = SyntheticConfig {
                scenario,
                n_examples: examples,
                n_labels: num_labels,
                noise,
                spread,
                seed,
            };
            let data = generate(&config)?;
            fs::create_dir_all(&out_dir).with_context(|| format!("cannot create '{}'", out_dir.display()))?;
            let relation = format!("{scenario}-{seed}");
            save_arff(&data.train, &relation, out_dir.join("train.arff"))?;
            save_arff(&data.test, &relation, out_dir.join("test.arff"))?;
            fs::write(
                out_dir.join("boundaries.json"),
                serde_json::to_string_pretty(&data.boundaries)? + "\n",
            )?;
            let (hamming, subset) = config.bayes_losses();
            eprintln!("bayes-optimal hamming={hamming} subset01={subset}");
        }
        Command::Trajectory {
            train: train_path,
            test,
            labels,
            scenario,
            examples,
            data_seed,
            variants,
            checkpoints,
            shrinkage,
            l2,
            seed,
            output,
        } => {
            let (train_set, test_set) = match (train_path, test) {
                (Some(tr), Some(te)) => {
                    let spec = label_spec(
                        labels
                            .labels
                            .as_deref()
                            .context("--labels is required together with --train and --test")?,
                    );
                    (load(&tr, &spec)?, load(&te, &spec)?)
                }
                _ => {
                    let data = generate(&SyntheticConfig {
                        scenario,
                        n_examples: examples,
                        seed: data_seed,
                        ..SyntheticConfig::default()
                    })?;
                    (data.train, data.test)
                }
            };
            let checkpoints = checkpoints.unwrap_or_else(default_checkpoints);
            let base = TrainConfig {
                shrinkage,
                l2,
                seed,
                ..TrainConfig::default()
            };
            let series = run_trajectory(&train_set, &test_set, &variants, &checkpoints, &base)?;
            write_output(output.as_deref(), &to_tsv(&series))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
