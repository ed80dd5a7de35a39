use std::path::PathBuf;

use anyhow::Context;

use cfgnn::dataset::synth::{call_corpus, defect_c_corpus, defect_corpus, write_corpus};
use cfgnn::dataset::ClassStats;

use crate::CmdResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Kind {
    /// 20 assembly programs: local call (label 1) or none (label 0).
    Call,
    /// Assembly programs in five defect classes.
    Defect,
    /// C programs in five defect classes; class 4 does not compile.
    DefectC,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, value_enum, default_value = "defect")]
    kind: Kind,

    /// Number of programs (ignored for `call`).
    #[arg(long, default_value_t = 200)]
    count: usize,

    #[arg(long, env = "CFGNN_SEED", default_value_t = 1)]
    seed: u64,

    /// Directory receiving the programs and `manifest.csv`.
    #[arg(long, env = "CFGNN_OUT")]
    out: PathBuf,
}

pub fn run(args: Args) -> CmdResult {
    let (programs, extension) = match args.kind {
        Kind::Call => (call_corpus(args.seed), "s"),
        Kind::Defect => (defect_corpus(args.count, args.seed), "s"),
        Kind::DefectC => (defect_c_corpus(args.count, args.seed), "c"),
    };
    let manifest = write_corpus(&args.out, &programs, extension)
        .with_context(|| format!("writing corpus to {}", args.out.display()))?;
    let stats = ClassStats::from_labels(manifest.rows.iter().map(|r| r.label));
    println!(
        "{} programs written to {} (per class {:?})",
        manifest.len(),
        args.out.display(),
        stats.counts
    );
    Ok(())
}
