//! Command-line surface.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags, missing required
//! combinations), 2 on data or model errors (unreadable files, shape
//! mismatches, failed training).

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::augment;
use crate::autoencoder::{AeConfig, estimate_generator_params, generate_pairs, train_naive, train_siamese};
use crate::dataset::{AugmentConfig, Method};
use crate::dtw::dtw_distance;
use crate::error::Result;
use crate::io::{eval_1nn, load_model, read_ucr, save_model, write_ucr};
use crate::neighbors::Metric;
use crate::rng::{STREAM_PAIRS, STREAM_TRAIN, seed_stream};

#[derive(Parser)]
#[command(
    name = "dtwsse",
    version,
    about = "Oversample imbalanced time-series datasets with DTW-aware interpolation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the DTW value between the first series of two UCR-style files
    Dtw {
        file_a: PathBuf,
        file_b: PathBuf,
        /// Variables per time step in both files
        #[arg(long, default_value_t = 1)]
        vars: usize,
    },
    /// Train an encoder/decoder model on random pairs labeled with DTW
    TrainAe {
        train_file: PathBuf,
        /// Number of synthetic training pairs
        #[arg(long, default_value_t = 2000)]
        pairs: usize,
        /// Latent width as a multiple of the flattened series length
        #[arg(long, default_value_t = 10)]
        latent_mult: usize,
        /// Train jointly on reconstruction only (no DTW targets)
        #[arg(long)]
        naive: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the model JSON
        #[arg(long)]
        out: PathBuf,
        /// Variables per time step in the training file
        #[arg(long, default_value_t = 1)]
        vars: usize,
    },
    /// Balance a dataset by generating synthetic minority samples
    Augment {
        train_file: PathBuf,
        /// dtwsse, smote, smote-dtw, or smote-ae
        #[arg(long, value_parser = parse_method)]
        method: Method,
        /// Model JSON from train-ae (required for dtwsse and smote-ae)
        #[arg(long)]
        model: Option<PathBuf>,
        /// Growth multiplier T: per-class target is floor(N*T/classes)
        #[arg(long, default_value_t = 10.0)]
        mult: f64,
        /// Synthetics per center (k nearest neighbors)
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the augmented dataset
        #[arg(long)]
        out: PathBuf,
        /// Variables per time step in the training file
        #[arg(long, default_value_t = 1)]
        vars: usize,
    },
    /// 1-NN classify a test file against a training file and print accuracy
    Eval {
        train_file: PathBuf,
        test_file: PathBuf,
        /// dtw or euclidean
        #[arg(long, default_value = "dtw", value_parser = parse_metric)]
        metric: Metric,
        /// Variables per time step in both files
        #[arg(long, default_value_t = 1)]
        vars: usize,
    },
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_metric(s: &str) -> std::result::Result<Metric, String> {
    s.parse().map_err(|e| format!("{e}"))
}

/// Runs the CLI against the given argv (argv[0] is the program name) and
/// returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version surface as Err but are not failures.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    if let Some(message) = usage_error(&cli.command) {
        eprintln!("error: {message}");
        return 1;
    }
    match run(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

/// Flag combinations clap cannot express; these are usage errors (exit 1),
/// not data errors.
fn usage_error(command: &Command) -> Option<String> {
    match command {
        Command::Dtw { vars, .. } | Command::Eval { vars, .. } if *vars == 0 => {
            Some("--vars must be at least 1".into())
        }
        Command::TrainAe {
            pairs,
            latent_mult,
            vars,
            ..
        } => {
            if *vars == 0 {
                Some("--vars must be at least 1".into())
            } else if *pairs == 0 {
                Some("--pairs must be at least 1".into())
            } else if *latent_mult == 0 {
                Some("--latent-mult must be at least 1".into())
            } else {
                None
            }
        }
        Command::Augment {
            method,
            model,
            mult,
            k,
            vars,
            ..
        } => {
            if *vars == 0 {
                Some("--vars must be at least 1".into())
            } else if method.needs_model() && model.is_none() {
                Some(format!("method {method} needs --model <file> from train-ae"))
            } else if !(mult.is_finite() && *mult > 0.0) {
                Some(format!("--mult must be a positive real, got {mult}"))
            } else if *k == 0 {
                Some("--k must be at least 1".into())
            } else {
                None
            }
        }
        _ => None,
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Dtw {
            file_a,
            file_b,
            vars,
        } => {
            let a = read_ucr(&file_a, vars, None)?;
            let b = read_ucr(&file_b, vars, None)?;
            let d = dtw_distance(&a.samples()[0].series, &b.samples()[0].series)?;
            println!("{d}");
            Ok(())
        }
        Command::TrainAe {
            train_file,
            pairs,
            latent_mult,
            naive,
            seed,
            out,
            vars,
        } => {
            let dataset = read_ucr(&train_file, vars, None)?;
            let config = AeConfig {
                pair_count: pairs,
                latent_mult,
                ..AeConfig::default()
            };
            let params = estimate_generator_params(&dataset);
            let mut pair_rng = seed_stream(seed, STREAM_PAIRS);
            let pair_set = generate_pairs(dataset.shape(), config.pair_count, &params, &mut pair_rng)?;
            let mut train_rng = seed_stream(seed, STREAM_TRAIN);
            let model = if naive {
                train_naive(&pair_set, dataset.shape(), &config, &mut train_rng)?
            } else {
                train_siamese(&pair_set, dataset.shape(), &config, &mut train_rng)?
            };
            save_model(&model, &out)?;
            let r = &model.report;
            println!(
                "trained {} model on {} pairs: encoder loss {} -> {} ({} epochs), decoder loss {} -> {} ({} epochs)",
                r.method,
                r.pair_count,
                r.initial_encoder_loss,
                r.final_encoder_loss,
                r.encoder_epochs,
                r.initial_decoder_loss,
                r.final_decoder_loss,
                r.decoder_epochs,
            );
            println!("wrote model to {}", out.display());
            Ok(())
        }
        Command::Augment {
            train_file,
            method,
            model,
            mult,
            k,
            seed,
            out,
            vars,
        } => {
            let dataset = read_ucr(&train_file, vars, None)?;
            let trained = match &model {
                Some(path) => Some(load_model(path)?),
                None => None,
            };
            let config = AugmentConfig {
                multiplier: mult,
                k,
                method,
                seed,
                autoencoder: AeConfig::default(),
            };
            let result = augment::augment(&dataset, &config, trained.as_ref())?;
            write_ucr(&result.dataset, &out, '\t')?;
            println!(
                "wrote {} samples ({} original + {} synthetic) to {}",
                result.dataset.size(),
                dataset.size(),
                result.synthetics.len(),
                out.display()
            );
            Ok(())
        }
        Command::Eval {
            train_file,
            test_file,
            metric,
            vars,
        } => {
            let train = read_ucr(&train_file, vars, None)?;
            let test = read_ucr(&test_file, vars, None)?;
            let report = eval_1nn(&train, &test, metric)?;
            for class in &report.classes {
                println!(
                    "class {}: {:.4} ({}/{})",
                    class.label,
                    class.accuracy(),
                    class.correct,
                    class.total
                );
            }
            println!(
                "overall: {:.4} ({}/{})",
                report.accuracy(),
                report.correct,
                report.total
            );
            Ok(())
        }
    }
}

