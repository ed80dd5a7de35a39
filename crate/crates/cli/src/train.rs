use std::path::{Path, PathBuf};

use anyhow::Context;

use cfgnn::dataset::{ingest, load_manifest, split, IngestConfig, Sample};
use cfgnn::dgcnn::{train_params, DgcnnModel, Example, TrainError};
use cfgnn::Exec;

use crate::options::{CompileOptions, ModelOptions};
use crate::{CmdResult, Failure};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// CSV manifest with header `path,label`.
    #[arg(long)]
    manifest: PathBuf,

    /// Output directory for the model and logs.
    #[arg(long, env = "CFGNN_OUT")]
    out: PathBuf,

    #[command(flatten)]
    model: ModelOptions,

    #[command(flatten)]
    compile: CompileOptions,
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn folds_csv(folds: &[(&str, &[Sample])]) -> String {
    let mut out = String::from("fold,path,label\n");
    for (name, samples) in folds {
        for s in *samples {
            out.push_str(&format!("{name},{},{}\n", s.id, s.label));
        }
    }
    out
}

pub fn run(args: Args, exec: Exec) -> CmdResult {
    let hyper = args.model.hyperparams()?;
    let taxonomy = args.compile.taxonomy()?;
    let config = IngestConfig {
        taxonomy: taxonomy.clone(),
        mode: hyper.edge_mode,
        compiler: args.compile.compiler()?,
        exec,
    };
    let manifest = load_manifest(&args.manifest).with_context(|| format!("loading {}", args.manifest.display()))?;
    let ingested = ingest(&manifest, &config)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write(&args.out.join("ingest.log"), &ingested.log_text())?;
    write(&args.out.join("class_stats.csv"), &ingested.reporting_stats().to_csv())?;
    println!(
        "ingested {} graphs ({} rows skipped)",
        ingested.samples.len(),
        ingested.skipped().count()
    );

    let folds = split(ingested.samples, hyper.seed)?;
    write(
        &args.out.join("folds.csv"),
        &folds_csv(&[
            ("train", &folds.train),
            ("validation", &folds.validation),
            ("test", &folds.test),
        ]),
    )?;
    println!(
        "folds: {} train, {} validation, {} test",
        folds.train.len(),
        folds.validation.len(),
        folds.test.len()
    );

    let mut model = DgcnnModel::initialize(hyper.clone(), taxonomy, folds.train.iter().map(|s| &s.graph))?;
    println!("initial parameters sha256: {}", model.checksum());
    let encode = |samples: &[Sample]| -> anyhow::Result<Vec<Example>> {
        samples
            .iter()
            .map(|s| {
                Ok(Example {
                    graph: model.encode(&s.graph).with_context(|| s.id.clone())?,
                    label: s.label,
                })
            })
            .collect()
    };
    let train_set = encode(&folds.train)?;
    let validation_set = encode(&folds.validation)?;

    let log = match train_params(&mut model.params, &hyper, &train_set, &validation_set, exec) {
        Ok(log) => log,
        Err(e @ TrainError::Diverged { .. }) => return Err(Failure::numerical(e)),
        Err(e) => return Err(Failure::input(e)),
    };
    write(&args.out.join("training_log.csv"), &log.to_csv())?;
    let model_path = args.out.join("model.bin");
    model
        .save(&model_path)
        .with_context(|| format!("writing {}", model_path.display()))?;

    if let Some(last) = log.epochs.last() {
        println!(
            "epochs run: {} (final train loss {:.6}, train accuracy {:.4})",
            log.epochs.len(),
            last.train_loss,
            last.train_accuracy
        );
    }
    match (log.best_epoch, log.best_validation_accuracy) {
        (Some(epoch), Some(acc)) => println!("validation accuracy: {acc:.6} (epoch {epoch})"),
        _ => println!("validation accuracy: n/a (empty validation fold)"),
    }
    println!("final parameters sha256: {}", model.checksum());
    println!("model written to {}", model_path.display());
    Ok(())
}
