use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use cfgnn::cfg::{graph_from_assembly, ControlFlowGraph, EdgeMode};
use cfgnn::dataset::{compile_to_assembly, is_assembly_path, CompileOutcome};
use cfgnn::Exec;

use crate::options::{CompileOptions, ModeArg};
use crate::{CmdResult, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Dot,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Dot => "dot",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Assembly or source files, or directories containing them.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,

    #[arg(long, value_enum, default_value = "dot")]
    format: Format,

    /// Output directory; defaults to the directory of each input.
    #[arg(long, env = "CFGNN_OUT")]
    out: Option<PathBuf>,

    #[arg(long, env = "CFGNN_MODE", value_enum, default_value = "faithful")]
    mode: ModeArg,

    #[command(flatten)]
    compile: CompileOptions,
}

const SOURCE_EXTENSIONS: [&str; 6] = ["c", "cc", "cpp", "cxx", "s", "S"];

/// Input files in argument order; directories contribute their assembly
/// and source files sorted by name.
fn collect_inputs(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(input)
                .with_context(|| format!("reading {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.is_file()
                        && (is_assembly_path(p)
                            || p.extension()
                                .and_then(|e| e.to_str())
                                .is_some_and(|e| SOURCE_EXTENSIONS.contains(&e)))
                })
                .collect();
            entries.sort();
            files.extend(entries);
        } else if input.is_file() {
            files.push(input.clone());
        } else {
            bail!("{} does not exist", input.display());
        }
    }
    Ok(files)
}

fn graph_of(path: &Path, args: &Args, taxonomy: &cfgnn::asm::GroupTaxonomy) -> anyhow::Result<ControlFlowGraph> {
    let text = if is_assembly_path(path) {
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    } else {
        match compile_to_assembly(path, &args.compile.compiler()?)? {
            CompileOutcome::Compiled(text) => text,
            CompileOutcome::Failed { stderr, .. } => {
                bail!("{}: compilation failed\n{}", path.display(), stderr.trim_end())
            }
            CompileOutcome::TimedOut => bail!("{}: compilation timed out", path.display()),
        }
    };
    graph_from_assembly(&text, taxonomy, EdgeMode::from(args.mode))
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

pub fn run(args: Args, exec: Exec) -> CmdResult {
    let files = collect_inputs(&args.inputs)?;
    let taxonomy = args.compile.taxonomy()?;
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    }
    let graphs = exec.map(&files, |path| graph_of(path, &args, &taxonomy));
    for (path, graph) in files.iter().zip(graphs) {
        let graph = graph.map_err(Failure::input)?;
        let dir = match &args.out {
            Some(d) => d.clone(),
            None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        let stem = path.file_stem().unwrap_or_default().to_string_lossy();
        let target = dir.join(format!("{stem}.{}", args.format.extension()));
        let text = match args.format {
            Format::Dot => graph.to_dot(),
            Format::Json => graph.to_json(),
        };
        std::fs::write(&target, text).with_context(|| format!("writing {}", target.display()))?;
        println!(
            "{}: {} vertices, {} edges -> {}",
            path.display(),
            graph.len(),
            graph.edges().len(),
            target.display()
        );
    }
    println!("{} graphs", files.len());
    Ok(())
}
