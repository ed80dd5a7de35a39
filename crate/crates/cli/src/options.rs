//! Options shared by several subcommands and their resolution into library
//! settings. Precedence, lowest first: built-in defaults, `--config` file,
//! `CFGNN_*` environment variables, command-line flags.

use std::path::PathBuf;

use anyhow::Context;
use clap::Args;

use cfgnn::asm::GroupTaxonomy;
use cfgnn::cfg::EdgeMode;
use cfgnn::dataset::{CompilerConfig, DEFAULT_COMPILER_TEMPLATE};
use cfgnn::dgcnn::Hyperparams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

impl OnOff {
    pub fn as_str(self) -> &'static str {
        match self {
            OnOff::On => "on",
            OnOff::Off => "off",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Faithful,
    Strict,
}

impl From<ModeArg> for EdgeMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Faithful => EdgeMode::Faithful,
            ModeArg::Strict => EdgeMode::Strict,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CompileOptions {
    /// Compiler command template with {in} and {out} placeholders.
    #[arg(long, env = "CFGNN_COMPILER_CMD", default_value = DEFAULT_COMPILER_TEMPLATE)]
    pub compiler_cmd: String,

    /// Seconds before a compilation is abandoned.
    #[arg(long, env = "CFGNN_COMPILE_TIMEOUT", default_value_t = 30.0)]
    pub compile_timeout: f64,

    /// Instruction group table (`prefix<TAB>group` lines) replacing the default.
    #[arg(long, env = "CFGNN_TAXONOMY")]
    pub taxonomy: Option<PathBuf>,
}

impl CompileOptions {
    pub fn compiler(&self) -> anyhow::Result<CompilerConfig> {
        if !(self.compile_timeout > 0.0 && self.compile_timeout.is_finite()) {
            anyhow::bail!("--compile-timeout must be a positive number of seconds");
        }
        let mut c = CompilerConfig::new(self.compiler_cmd.clone())?;
        c.timeout = std::time::Duration::from_secs_f64(self.compile_timeout);
        Ok(c)
    }

    pub fn taxonomy(&self) -> anyhow::Result<GroupTaxonomy> {
        match &self.taxonomy {
            None => Ok(GroupTaxonomy::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                GroupTaxonomy::parse(&text).with_context(|| format!("in {}", path.display()))
            }
        }
    }
}

/// Flags that change how graphs are built and featurized.
#[derive(Debug, Clone, Args)]
pub struct FeatureFlags {
    /// Number of vertex views: 1 (instructions) or 2 (instructions and groups).
    #[arg(long, env = "CFGNN_VIEWS", value_parser = ["1", "2"])]
    pub views: Option<String>,

    /// Keep normalized operands in the instruction view.
    #[arg(long, env = "CFGNN_OPERANDS", value_enum)]
    pub operands: Option<OnOff>,

    /// Edge construction mode.
    #[arg(long, env = "CFGNN_MODE", value_enum)]
    pub mode: Option<ModeArg>,
}

impl FeatureFlags {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if let Some(v) = &self.views {
            out.push(("views".into(), v.clone()));
        }
        if let Some(o) = self.operands {
            out.push(("operands".into(), o.as_str().into()));
        }
        if let Some(m) = self.mode {
            out.push(("mode".into(), EdgeMode::from(m).to_string()));
        }
        out
    }
}

/// Feature and hyperparameter settings.
#[derive(Debug, Clone, Args)]
pub struct ModelOptions {
    /// Plain `key=value` settings file.
    #[arg(long, env = "CFGNN_CONFIG")]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub features: FeatureFlags,

    #[arg(long, env = "CFGNN_LR")]
    pub lr: Option<f64>,

    #[arg(long, env = "CFGNN_EPOCHS")]
    pub epochs: Option<usize>,

    #[arg(long, env = "CFGNN_SEED")]
    pub seed: Option<u64>,

    /// Any other setting as key=value (repeatable), e.g. --set conv2=300.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl ModelOptions {
    /// Settings given on the command line or in the environment, in
    /// application order.
    fn overrides(&self) -> anyhow::Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        out.extend(self.features.overrides());
        if let Some(lr) = self.lr {
            out.push(("learning_rate".into(), lr.to_string()));
        }
        if let Some(e) = self.epochs {
            out.push(("epochs".into(), e.to_string()));
        }
        if let Some(s) = self.seed {
            out.push(("seed".into(), s.to_string()));
        }
        Ok(out)
    }

    pub fn hyperparams(&self) -> anyhow::Result<Hyperparams> {
        let mut h = Hyperparams::default();
        apply_config(&mut h, self.config.as_ref())?;
        for (k, v) in self.overrides()? {
            h.set(&k, &v)?;
        }
        h.validate()?;
        Ok(h)
    }
}

pub fn apply_config(h: &mut Hyperparams, path: Option<&PathBuf>) -> anyhow::Result<()> {
    if let Some(path) = path {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        h.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
    }
    Ok(())
}

/// `base` with the config file and feature flags applied on top.
pub fn requested_settings(
    base: &Hyperparams,
    config: Option<&PathBuf>,
    flags: &FeatureFlags,
) -> anyhow::Result<Hyperparams> {
    let mut h = base.clone();
    apply_config(&mut h, config)?;
    for (k, v) in flags.overrides() {
        h.set(&k, &v)?;
    }
    Ok(h)
}
