use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};

use cfgnn::dataset::{ingest, load_manifest, split, IngestConfig, Sample};
use cfgnn::dgcnn::DgcnnModel;
use cfgnn::metrics::{
    accuracy, auc, macro_average_roc, micro_average_roc, roc_csv, roc_one_vs_rest, roc_svg,
    summary_csv, ConfusionMatrix, MetricsError, RocCurve, SummaryRow,
};
use cfgnn::Exec;

use crate::options::{requested_settings, CompileOptions, FeatureFlags};
use crate::{CmdResult, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Fold {
    All,
    Train,
    Validation,
    Test,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,

    /// CSV manifest with header `path,label`.
    #[arg(long)]
    manifest: PathBuf,

    /// Output directory for the report.
    #[arg(long, env = "CFGNN_OUT")]
    out: PathBuf,

    /// Evaluate one fold of the manifest, re-split with the model's seed.
    #[arg(long, value_enum, default_value = "all")]
    fold: Fold,

    /// Also write an SVG plot of the ROC curves.
    #[arg(long)]
    plot: bool,

    /// Settings file; its feature settings must agree with the model.
    #[arg(long, env = "CFGNN_CONFIG")]
    config: Option<PathBuf>,

    #[command(flatten)]
    features: FeatureFlags,

    #[command(flatten)]
    compile: CompileOptions,
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn predictions_csv(samples: &[Sample], predicted: &[usize], scores: &[Vec<f64>]) -> String {
    let classes = scores.first().map_or(0, Vec::len);
    let mut out = String::from("path,label,predicted");
    for c in 0..classes {
        out.push_str(&format!(",p{c}"));
    }
    out.push('\n');
    for ((s, p), row) in samples.iter().zip(predicted).zip(scores) {
        out.push_str(&format!("{},{},{p}", s.id, s.label));
        for x in row {
            out.push_str(&format!(",{x}"));
        }
        out.push('\n');
    }
    out
}

pub fn run(args: Args, exec: Exec) -> CmdResult {
    let model = DgcnnModel::load(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let requested = requested_settings(&model.hyper, args.config.as_ref(), &args.features)?;
    if requested.feature_summary() != model.hyper.feature_summary() {
        return Err(Failure::input(anyhow!(
            "feature configuration does not match the model\n  model:     {}\n  requested: {}",
            model.hyper.feature_summary(),
            requested.feature_summary()
        )));
    }

    let config = IngestConfig {
        taxonomy: model.taxonomy.clone(),
        mode: model.hyper.edge_mode,
        compiler: args.compile.compiler()?,
        exec,
    };
    let manifest = load_manifest(&args.manifest).with_context(|| format!("loading {}", args.manifest.display()))?;
    let ingested = ingest(&manifest, &config)?;
    let samples = match args.fold {
        Fold::All => ingested.samples,
        fold => {
            let folds = split(ingested.samples, model.hyper.seed)?;
            match fold {
                Fold::Train => folds.train,
                Fold::Validation => folds.validation,
                _ => folds.test,
            }
        }
    };
    if samples.is_empty() {
        return Err(Failure::input(anyhow!("no graphs to evaluate")));
    }

    let encoded = samples
        .iter()
        .map(|s| model.encode(&s.graph).with_context(|| s.id.clone()))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let predictions = model.predict_all(&encoded, exec)?;
    if predictions.iter().any(|p| p.probs.iter().any(|x| !x.is_finite())) {
        return Err(Failure::numerical(anyhow!("model produced non-finite probabilities")));
    }
    let actual: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let predicted: Vec<usize> = predictions.iter().map(|p| p.label).collect();
    let scores: Vec<Vec<f64>> = predictions.into_iter().map(|p| p.probs).collect();
    let classes = model.hyper.classes;
    if let Some(s) = samples.iter().find(|s| s.label >= classes) {
        return Err(Failure::input(anyhow!(
            "{} has label {} but the model has {classes} classes",
            s.id,
            s.label
        )));
    }

    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let acc = accuracy(&predicted, &actual)?;
    let mut summary = vec![SummaryRow::new("accuracy", acc)];
    let mut curves: Vec<(String, RocCurve)> = Vec::new();
    for c in 0..classes {
        match roc_one_vs_rest(&scores, &actual, c) {
            Ok(curve) => {
                write(&args.out.join(format!("roc_class{c}.csv")), &roc_csv(&c.to_string(), &curve))?;
                summary.push(SummaryRow::new(format!("auc_class{c}"), auc(&curve)));
                curves.push((format!("class {c}"), curve));
            }
            Err(e @ (MetricsError::ClassAbsent { .. } | MetricsError::NoNegatives { .. })) => {
                log::warn!("no ROC curve for class {c}: {e}");
            }
            Err(e) => return Err(Failure::input(e)),
        }
    }
    let mut averaged = Vec::new();
    if !curves.is_empty() {
        let per_class: Vec<RocCurve> = curves.iter().map(|(_, c)| c.clone()).collect();
        let macro_curve = macro_average_roc(&per_class)?;
        write(&args.out.join("roc_macro.csv"), &roc_csv("macro", &macro_curve))?;
        summary.push(SummaryRow::new("macro_auc", auc(&macro_curve)));
        averaged.push(("macro average".to_string(), macro_curve));
    }
    match micro_average_roc(&scores, &actual) {
        Ok(micro) => {
            write(&args.out.join("roc_micro.csv"), &roc_csv("micro", &micro))?;
            summary.push(SummaryRow::new("micro_auc", auc(&micro)));
            averaged.push(("micro average".to_string(), micro));
        }
        Err(e) => log::warn!("no micro-averaged ROC curve: {e}"),
    }
    write(&args.out.join("summary.csv"), &summary_csv(&summary))?;
    write(&args.out.join("predictions.csv"), &predictions_csv(&samples, &predicted, &scores))?;
    write(
        &args.out.join("confusion.csv"),
        &ConfusionMatrix::new(&predicted, &actual, classes)?.to_csv(),
    )?;
    if args.plot {
        let plotted: Vec<(String, &RocCurve)> = averaged
            .iter()
            .chain(&curves)
            .map(|(name, c)| (name.clone(), c))
            .collect();
        write(&args.out.join("roc.svg"), &roc_svg("ROC curves", &plotted))?;
    }

    println!("samples: {}", samples.len());
    for row in &summary {
        println!("{}: {:.6}", row.metric.replace('_', " "), row.value);
    }
    println!("report written to {}", args.out.display());
    Ok(())
}
