use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use super::DatasetError;

pub const DEFAULT_COMPILER_TEMPLATE: &str = "gcc -S -O0 {in} -o {out}";
pub const DEFAULT_COMPILE_TIMEOUT: Duration = Duration::from_secs(30);

/// External compiler invocation. The template is split on whitespace; the
/// tokens `{in}` and `{out}` (also inside a larger token) are replaced by the
/// source and assembly paths.
#[derive(Debug, Clone, PartialEq)]
pub struct CompilerConfig {
    pub template: String,
    pub timeout: Duration,
}

impl Default for CompilerConfig {
    fn default() -> Self {
        CompilerConfig {
            template: DEFAULT_COMPILER_TEMPLATE.to_string(),
            timeout: DEFAULT_COMPILE_TIMEOUT,
        }
    }
}

impl CompilerConfig {
    pub fn new(template: impl Into<String>) -> Result<Self, DatasetError> {
        let c = CompilerConfig {
            template: template.into(),
            ..CompilerConfig::default()
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.template.split_whitespace().next().is_none() {
            return Err(DatasetError::Config("compiler template is empty".into()));
        }
        for placeholder in ["{in}", "{out}"] {
            if !self.template.contains(placeholder) {
                return Err(DatasetError::Config(format!(
                    "compiler template lacks the {placeholder} placeholder: {}",
                    self.template
                )));
            }
        }
        Ok(())
    }

    fn command(&self, input: &Path, output: &Path) -> Command {
        let (i, o) = (input.to_string_lossy(), output.to_string_lossy());
        let mut words = self
            .template
            .split_whitespace()
            .map(|w| w.replace("{in}", &i).replace("{out}", &o));
        let mut cmd = Command::new(words.next().unwrap_or_default());
        cmd.args(words);
        cmd
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CompileOutcome {
    Compiled(String),
    /// The compiler exited unsuccessfully (the source does not compile).
    Failed { status: Option<i32>, stderr: String },
    TimedOut,
}

/// Runs the configured compiler on `source` and returns the emitted
/// assembly. A missing compiler binary is a configuration error; a failing
/// or slow compilation is reported through [`CompileOutcome`].
pub fn compile_to_assembly(source: &Path, config: &CompilerConfig) -> Result<CompileOutcome, DatasetError> {
    config.validate()?;
    let dir = tempfile::tempdir()?;
    let out = dir.path().join("out.s");
    let mut child = match config
        .command(source, &out)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
    {
        Ok(c) => c,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(DatasetError::CompilerMissing(
                config.template.split_whitespace().next().unwrap_or_default().to_string(),
            ))
        }
        Err(e) => return Err(e.into()),
    };

    let mut stderr_pipe = child.stderr.take().expect("stderr is piped");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr_pipe.read_to_string(&mut s);
        s
    });
    let deadline = Instant::now() + config.timeout;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            break None;
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    // Grandchildren of a killed compiler may keep the pipe open, so the
    // reader is only joined after a normal exit.
    let Some(status) = status else {
        return Ok(CompileOutcome::TimedOut);
    };
    let stderr = reader.join().unwrap_or_default();
    if !status.success() {
        return Ok(CompileOutcome::Failed {
            status: status.code(),
            stderr,
        });
    }
    Ok(match std::fs::read_to_string(&out) {
        Ok(text) => CompileOutcome::Compiled(text),
        Err(_) => CompileOutcome::Failed {
            status: status.code(),
            stderr: format!("compiler wrote no output file\n{stderr}"),
        },
    })
}
