use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::cfg::EdgeMode;
use crate::features::FeatureConfig;

use super::ModelError;

/// How predecessor and successor contributions are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Aggregation {
    /// Plain sum over neighbors.
    #[default]
    Sum,
    /// Sum divided by the neighbor count.
    Mean,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Sum => "sum",
            Aggregation::Mean => "mean",
        })
    }
}

impl FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sum" => Ok(Aggregation::Sum),
            "mean" => Ok(Aggregation::Mean),
            other => Err(format!("unknown aggregation `{other}` (expected sum|mean)")),
        }
    }
}

/// Training and architecture settings. Defaults are the
/// GC100-GC600-FC600-Soft5 network over 30-dimensional token vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub token_dim: usize,
    pub features: FeatureConfig,
    pub edge_mode: EdgeMode,
    pub conv1: usize,
    pub conv2: usize,
    pub fc: usize,
    pub classes: usize,
    pub learning_rate: f64,
    /// Learning rate at epoch `e` is `learning_rate / (1 + e * lr_decay)`.
    pub lr_decay: f64,
    pub epochs: usize,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    pub seed: u64,
    /// 1 is plain per-sample SGD.
    pub batch_size: usize,
    pub aggregation: Aggregation,
    pub train_embeddings: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            token_dim: 30,
            features: FeatureConfig::default(),
            edge_mode: EdgeMode::Faithful,
            conv1: 100,
            conv2: 600,
            fc: 600,
            classes: 5,
            learning_rate: 0.1,
            lr_decay: 0.0,
            epochs: 50,
            patience: 10,
            seed: 1,
            batch_size: 1,
            aggregation: Aggregation::Sum,
            train_embeddings: true,
        }
    }
}

/// Layer widths of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub input: usize,
    pub conv1: usize,
    pub conv2: usize,
    pub fc: usize,
    pub classes: usize,
}

/// Learnable scalar counts, embeddings excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParameterCount {
    pub weights: usize,
    pub biases: usize,
}

impl ModelDims {
    /// Counts implied by the layer widths alone.
    pub fn parameter_count(&self) -> ParameterCount {
        ParameterCount {
            weights: 3 * self.conv1 * self.input
                + 3 * self.conv2 * self.conv1
                + self.fc * self.conv2
                + self.classes * self.fc,
            biases: self.conv1 + self.conv2 + self.fc + self.classes,
        }
    }
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

fn parse_on_off(key: &str, v: &str) -> Result<bool, String> {
    match v {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(format!("{key}: expected on|off, got `{v}`")),
    }
}

impl Hyperparams {
    pub fn dims(&self) -> ModelDims {
        ModelDims {
            input: self.features.views.count() * self.token_dim,
            conv1: self.conv1,
            conv2: self.conv2,
            fc: self.fc,
            classes: self.classes,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let sizes = [
            ("token_dim", self.token_dim),
            ("conv1", self.conv1),
            ("conv2", self.conv2),
            ("fc", self.fc),
            ("classes", self.classes),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::Config(format!("{name} must be at least 1")));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::Config(format!(
                "learning_rate must be a finite non-negative number, got {}",
                self.learning_rate
            )));
        }
        if !(self.lr_decay >= 0.0 && self.lr_decay.is_finite()) {
            return Err(ModelError::Config("lr_decay must be non-negative".into()));
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate / (1.0 + epoch as f64 * self.lr_decay)
    }

    /// Sets one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ModelError> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("{key}: cannot parse `{v}`"))
        }
        let v = value.trim();
        let result: Result<(), String> = (|| {
            match key.trim() {
                "token_dim" => self.token_dim = num(key, v)?,
                "views" => self.features.views = v.parse()?,
                "operands" => self.features.use_operands = parse_on_off(key, v)?,
                "mode" => self.edge_mode = v.parse()?,
                "conv1" => self.conv1 = num(key, v)?,
                "conv2" => self.conv2 = num(key, v)?,
                "fc" => self.fc = num(key, v)?,
                "classes" => self.classes = num(key, v)?,
                "learning_rate" | "lr" => self.learning_rate = num(key, v)?,
                "lr_decay" => self.lr_decay = num(key, v)?,
                "epochs" => self.epochs = num(key, v)?,
                "patience" => self.patience = num(key, v)?,
                "seed" => self.seed = num(key, v)?,
                "batch_size" => self.batch_size = num(key, v)?,
                "aggregation" => self.aggregation = v.parse()?,
                "train_embeddings" => self.train_embeddings = parse_on_off(key, v)?,
                other => return Err(format!("unknown setting `{other}`")),
            }
            Ok(())
        })();
        result.map_err(ModelError::Config)
    }

    /// `key=value` lines, one per setting.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "token_dim={}", self.token_dim);
        let _ = writeln!(s, "views={}", self.features.views);
        let _ = writeln!(s, "operands={}", on_off(self.features.use_operands));
        let _ = writeln!(s, "mode={}", self.edge_mode);
        let _ = writeln!(s, "conv1={}", self.conv1);
        let _ = writeln!(s, "conv2={}", self.conv2);
        let _ = writeln!(s, "fc={}", self.fc);
        let _ = writeln!(s, "classes={}", self.classes);
        let _ = writeln!(s, "learning_rate={}", self.learning_rate);
        let _ = writeln!(s, "lr_decay={}", self.lr_decay);
        let _ = writeln!(s, "epochs={}", self.epochs);
        let _ = writeln!(s, "patience={}", self.patience);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "batch_size={}", self.batch_size);
        let _ = writeln!(s, "aggregation={}", self.aggregation);
        let _ = writeln!(s, "train_embeddings={}", on_off(self.train_embeddings));
        s
    }

    /// Applies `key=value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ModelError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ModelError::Config(format!("line {}: expected key=value", i + 1)))?;
            self.set(k, v)
                .map_err(|e| ModelError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut h = Hyperparams::default();
        h.apply_text(text)?;
        Ok(h)
    }

    /// The settings that must agree between a trained model and the data
    /// it is evaluated on.
    pub fn feature_summary(&self) -> String {
        format!(
            "views={} operands={} mode={} token_dim={}",
            self.features.views,
            on_off(self.features.use_operands),
            self.edge_mode,
            self.token_dim
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Views;

    #[test]
    fn canonical_counts() {
        let mut h = Hyperparams::default();
        h.features.views = Views::One;
        assert_eq!(
            h.dims().parameter_count(),
            ParameterCount {
                weights: 552_000,
                biases: 1_305
            }
        );
        h.features.views = Views::Two;
        assert_eq!(
            h.dims().parameter_count(),
            ParameterCount {
                weights: 561_000,
                biases: 1_305
            }
        );
    }

    #[test]
    fn text_round_trip() {
        let mut h = Hyperparams {
            learning_rate: 0.037,
            edge_mode: EdgeMode::Strict,
            aggregation: Aggregation::Mean,
            ..Hyperparams::default()
        };
        h.features.use_operands = false;
        assert_eq!(Hyperparams::parse(&h.to_text()).unwrap(), h);
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(Hyperparams::parse("views=3\n").is_err());
        assert!(Hyperparams::parse("bogus=1\n").is_err());
        assert!(Hyperparams::parse("epochs\n").is_err());
        let h = Hyperparams {
            conv1: 0,
            ..Hyperparams::default()
        };
        assert!(h.validate().is_err());
        let mut h = Hyperparams {
            learning_rate: -0.1,
            ..Hyperparams::default()
        };
        assert!(h.validate().is_err());
        h.learning_rate = 0.0;
        assert!(h.validate().is_ok());
    }

    #[test]
    fn decay_schedule() {
        let mut h = Hyperparams::default();
        assert_eq!(h.learning_rate_at(9), 0.1);
        h.lr_decay = 1.0;
        assert!((h.learning_rate_at(1) - 0.05).abs() < 1e-15);
    }
}
