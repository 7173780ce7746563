use std::path::{Path, PathBuf};
use std::process::ExitCode;

use breathtopo::dataio::{self, RunConfig, SynthConfig};
use breathtopo::eval::{aggregate_importance, importance_csv};
use breathtopo::features::{build_windows, featurize_record, window_diagrams, FeatureMatrix, FeatureSet, PdKind};
use breathtopo::learner::{filter_low_quality, fit_matrix, BoostedModel};
use breathtopo::pipeline::{load_cohort, run_experiment, write_report};
use breathtopo::{Error, Result};
use clap::{Parser, Subcommand};
use log::info;

#[derive(Parser)]
#[command(name = "breathtopo", version, about = "Sleep staging from airflow with topological features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort as DIR/<subject>/{airflow,stages}.txt
    Synth {
        #[arg(long)]
        subjects: usize,
        #[arg(long)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Probability of a movement burst in each wake epoch.
        #[arg(long)]
        wake_artifact_prob: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Feature matrix of one record.
    Featurize {
        #[arg(long)]
        record: PathBuf,
        #[arg(long, default_value = "all")]
        set: FeatureSet,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Persistence diagrams of one window.
    Pd {
        #[arg(long)]
        record: PathBuf,
        /// One-based index of the last epoch of the window (at least 6).
        #[arg(long)]
        epoch: usize,
        #[arg(long)]
        kind: PdKind,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model on exported feature files.
    Train {
        #[arg(long, num_args = 1.., required = true)]
        features: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Leave-one-subject-out cross-validation over a cohort directory.
    Losocv {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated; the first set's metrics go to --out.
        #[arg(long, value_delimiter = ',', default_value = "all")]
        set: Vec<FeatureSet>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Also save each fold's model (first set only).
        #[arg(long)]
        models_out: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate feature importance over saved models.
    Importance {
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn config(path: Option<&Path>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            subjects,
            epochs,
            seed,
            wake_artifact_prob,
            out,
        } => {
            let mut cfg = SynthConfig {
                n_subjects: subjects,
                epochs_per_subject: epochs,
                seed,
                ..SynthConfig::default()
            };
            if let Some(p) = wake_artifact_prob {
                cfg.stages[0].artifact_prob = p;
            }
            create_dir(&out)?;
            for rec in dataio::generate_synthetic(&cfg)? {
                let dir = dataio::write_record(&out, &rec)?;
                info!("wrote {}", dir.display());
            }
        }
        Command::Featurize {
            record,
            set,
            config: c,
            out,
        } => {
            let cfg = config(c.as_deref())?;
            let rec = dataio::load_record_dir(&record)?;
            let m = featurize_record(&rec, set, &cfg.features)?;
            for (_, epoch, why) in &m.excluded {
                info!("epoch {epoch} excluded: {why}");
            }
            dataio::export_features(&m, &out)?;
        }
        Command::Pd {
            record,
            epoch,
            kind,
            config: c,
            out,
        } => {
            let cfg = config(c.as_deref())?;
            let rec = dataio::load_record_dir(&record)?;
            let windows = build_windows(&rec.airflow, &rec.stages, &cfg.features)?;
            let w = windows
                .iter()
                .find(|w| w.epoch_index == epoch)
                .ok_or_else(|| Error::InvalidInput(format!("no window ends at epoch {epoch}")))?;
            dataio::export_pd(&window_diagrams(w, kind, &cfg.features)?, &out)?;
        }
        Command::Train {
            features,
            config: c,
            out,
        } => {
            let cfg = config(c.as_deref())?;
            let mut all: Option<FeatureMatrix> = None;
            for f in &features {
                let m = dataio::load_features(f)?;
                match all.as_mut() {
                    Some(a) => a.append(m)?,
                    None => all = Some(m),
                }
            }
            let mut train = all.ok_or(Error::EmptyTrainingSet)?;
            if let Some(t) = cfg.sqi_threshold() {
                train = filter_low_quality(&train, t)?;
            }
            let model = fit_matrix(&train, &cfg.boost)?;
            dataio::write_text(&out, &model.to_text())?;
        }
        Command::Losocv {
            data,
            set,
            config: c,
            cache,
            models_out,
            out,
        } => {
            let cfg = config(c.as_deref())?;
            let cohort = load_cohort(&data)?;
            let mut report = run_experiment(&cohort, &set, &cfg, cache.as_deref())?;
            if let Some(dir) = models_out {
                create_dir(&dir)?;
                let first = &report.sets[0];
                for (fold, model) in first.outcome.folds.iter().zip(&first.outcome.models) {
                    let p = dir.join(format!("{}.model", fold.subject_id));
                    dataio::write_text(&p, &model.to_text())?;
                }
            }
            for r in &report.sets {
                let s = &r.summary;
                println!(
                    "{}: accuracy {:.4}  balanced {:.4}  kappa {:.4} ± {:.4}",
                    r.set, s.accuracy.mean, s.balanced_accuracy.mean, s.kappa.mean, s.kappa.std_population
                );
            }
            for c in &report.comparisons {
                if let Some(t) = &c.kappa_test {
                    println!("kappa {} > {}: p = {:.4}", c.better, c.worse, t.p_value);
                }
            }
            write_report(&mut report, &out)?;
        }
        Command::Importance { models, out } => {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&models)
                .map_err(|e| Error::Io {
                    path: models.clone(),
                    source: e,
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "model"))
                .collect();
            paths.sort();
            if paths.is_empty() {
                return Err(Error::InvalidInput(format!("no .model files in {}", models.display())));
            }
            let loaded = paths
                .iter()
                .map(|p| {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                        path: p.clone(),
                        source: e,
                    })?;
                    BoostedModel::from_text(&text, &p.display().to_string())
                })
                .collect::<Result<Vec<_>>>()?;
            dataio::write_text(&out, &importance_csv(&aggregate_importance(&loaded)))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
