use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::classifiers::{ClassifierKind, ClassifierParams};
use crate::fusion::FusionConfig;
use crate::nn::TrainConfig;
use crate::preprocess::PipelineParams;
use crate::synthdata::{Difficulty, View};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    /// Descriptor comparison through one classifier.
    #[default]
    Features,
    /// Fused CNN features through each classifier.
    Classifiers,
    /// Fused pipeline under different training class ratios.
    Ratios,
    /// Single-view networks, probability fusion and the two-view network.
    Views,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 4] =
        [ExperimentId::Features, ExperimentId::Classifiers, ExperimentId::Ratios, ExperimentId::Views];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Features => "features",
            ExperimentId::Classifiers => "classifiers",
            ExperimentId::Ratios => "ratios",
            ExperimentId::Views => "views",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}` (expected features, classifiers, ratios or views)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub benign: usize,
    pub malignant: usize,
    pub difficulty: Difficulty,
    /// Fraction of each class held out for testing.
    pub test_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig { benign: 71, malignant: 74, difficulty: Difficulty::Standard, test_fraction: 0.3 }
    }
}

/// [`TrainConfig`] minus the seed, which the runner derives per model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub l2_weight: f64,
}

impl Default for TrainSettings {
    /// [`TrainConfig`] defaults, but 20 epochs: the default 145-sample
    /// dataset leaves about 100 training images.
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSettings { learning_rate: t.learning_rate, batch_size: t.batch_size, epochs: 20, l2_weight: t.l2_weight }
    }
}

impl TrainSettings {
    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
            l2_weight: self.l2_weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub pipeline: PipelineParams,
    pub train: TrainSettings,
    pub classifier: ClassifierParams,
    /// Classifier behind the descriptor comparison and the fused pipeline.
    pub default_classifier: ClassifierKind,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentId::default(),
            seed: 42,
            output_dir: PathBuf::from("results"),
            dataset: DatasetConfig::default(),
            pipeline: PipelineParams::default(),
            train: TrainSettings::default(),
            classifier: ClassifierParams::default(),
            default_classifier: ClassifierKind::Svm,
        }
    }
}

/// Keys that select what to run or where to write, not what gets computed.
/// They stay out of the hash so tables from one setup can be merged.
const UNHASHED: [&str; 2] = ["experiment", "output_dir"];

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        if d.benign + d.malignant == 0 {
            return Err(Error::Config("dataset is empty".into()));
        }
        if !(d.test_fraction > 0.0 && d.test_fraction < 1.0) {
            return Err(Error::Config(format!("test_fraction {} outside (0, 1)", d.test_fraction)));
        }
        self.pipeline.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.train.with_seed(0).validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.classifier.knn_k == 0 {
            return Err(Error::Config("knn_k must be positive".into()));
        }
        Ok(())
    }

    /// 16 hex digits: the first 8 bytes of SHA-256 over the key-sorted
    /// compact JSON of the config, without `experiment` and `output_dir`.
    pub fn config_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            for k in UNHASHED {
                m.remove(k);
            }
        }
        let mut canon = String::new();
        write_canonical(&v, &mut canon);
        let digest = Sha256::digest(canon.as_bytes());
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        format!("{:016x}", u64::from_be_bytes(head))
    }

    pub fn fusion_config(&self, train_seed: u64) -> FusionConfig {
        FusionConfig {
            train: self.train.with_seed(train_seed),
            classifier: self.classifier.clone(),
            fused_classifier: self.default_classifier,
            feature_view: View::Coronal,
        }
    }
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&m[k], out);
            }
            out.push('}');
        }
        Value::Array(a) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(x, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}
