//! SVM, random forest and kNN over feature vectors, plus ROC AUC.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::features::FeatureVector;
use crate::par::Execution;
use crate::{Error, Result};

mod forest;
mod knn;
mod metrics;
mod svm;

pub use forest::{Forest, Tree};
pub use knn::Knn;
pub use metrics::{compute_auc, EvalReport};
pub use svm::{KernelKind, SvmModel, SvmParams};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    /// Free-form split identifier, e.g. `"seed=42/test"`.
    pub provenance: String,
}

impl LabeledSet {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>, provenance: impl Into<String>) -> Result<Self> {
        if rows.is_empty() || rows.len() != labels.len() {
            return Err(Error::Data(format!(
                "need equal, nonzero counts of rows and labels (got {} and {})",
                rows.len(),
                labels.len()
            )));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::Data("feature rows are empty".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::shape(format!("row {i} has {} features, expected {dim}", r.len())));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("row {i} has a non-finite feature")));
            }
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Data(format!("label {l} is not binary")));
        }
        Ok(LabeledSet { rows, labels, provenance: provenance.into() })
    }

    pub fn from_features(features: &[FeatureVector], labels: Vec<usize>, provenance: impl Into<String>) -> Result<Self> {
        Self::new(features.iter().map(|f| f.values.clone()).collect(), labels, provenance)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    fn has_both_classes(&self) -> bool {
        self.labels.contains(&0) && self.labels.contains(&1)
    }
}

/// Per-dimension z-scoring with statistics from the training rows only.
/// Zero-variance dimensions keep a unit scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let n = rows.len() as f64;
        let dim = rows[0].len();
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut std = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut std {
            *s = (*s / n).sqrt();
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        Standardizer { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Svm,
    RandomForest,
    Knn,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [ClassifierKind::RandomForest, ClassifierKind::Knn, ClassifierKind::Svm];

    /// Row label used in result tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ClassifierKind::Svm => "Support Vector Machines",
            ClassifierKind::RandomForest => "Random forest",
            ClassifierKind::Knn => "K neighbors",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, max_depth: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierParams {
    pub svm: SvmParams,
    pub forest: ForestParams,
    pub knn_k: usize,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        ClassifierParams { svm: SvmParams::default(), forest: ForestParams::default(), knn_k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Svm(SvmModel),
    Forest(Forest),
    Knn(Knn),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedClassifier {
    pub model: Model,
    pub feature_dim: usize,
    pub standardizer: Option<Standardizer>,
    pub warnings: Vec<String>,
}

impl TrainedClassifier {
    pub fn kind(&self) -> ClassifierKind {
        match self.model {
            Model::Svm(_) => ClassifierKind::Svm,
            Model::Forest(_) => ClassifierKind::RandomForest,
            Model::Knn(_) => ClassifierKind::Knn,
        }
    }

    /// Malignancy score in `[0, 1]`; for the SVM, the logistic of the
    /// decision value.
    pub fn predict_score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_dim {
            return Err(Error::shape(format!("expected {} features, got {}", self.feature_dim, x.len())));
        }
        let z;
        let x = match &self.standardizer {
            Some(s) => {
                z = s.apply(x);
                &z[..]
            }
            None => x,
        };
        Ok(match &self.model {
            Model::Svm(m) => 1.0 / (1.0 + (-m.decision(x)).exp()),
            Model::Forest(f) => f.score(x),
            Model::Knn(k) => k.score(x),
        })
    }

    pub fn predict_scores(&self, set: &LabeledSet) -> Result<Vec<f64>> {
        set.rows().iter().map(|r| self.predict_score(r)).collect()
    }
}

fn standardized(data: &LabeledSet) -> (Standardizer, Vec<Vec<f64>>) {
    let s = Standardizer::fit(data.rows());
    let rows = data.rows().iter().map(|r| s.apply(r)).collect();
    (s, rows)
}

pub fn train_svm(data: &LabeledSet, params: &SvmParams) -> Result<TrainedClassifier> {
    if !data.has_both_classes() {
        return Err(Error::Training("SVM needs both classes in the training data".into()));
    }
    let (s, rows) = standardized(data);
    let model = svm::train(&rows, data.labels(), params)?;
    let mut warnings = Vec::new();
    if !model.converged {
        warnings.push(format!("SMO stopped at the {}-iteration cap before reaching KKT tolerance", params.max_iterations));
    }
    Ok(TrainedClassifier { model: Model::Svm(model), feature_dim: data.dim(), standardizer: Some(s), warnings })
}

pub fn train_random_forest(data: &LabeledSet, params: &ForestParams, seed: u64, exec: Execution) -> Result<TrainedClassifier> {
    if params.n_trees == 0 {
        return Err(Error::param("forest needs at least one tree"));
    }
    let forest = forest::train(data.rows(), data.labels(), params.n_trees, params.max_depth, seed, exec);
    Ok(TrainedClassifier { model: Model::Forest(forest), feature_dim: data.dim(), standardizer: None, warnings: Vec::new() })
}

pub fn train_knn(data: &LabeledSet, k: usize) -> Result<TrainedClassifier> {
    if k == 0 || k % 2 == 0 {
        return Err(Error::param(format!("k must be odd and positive, got {k}")));
    }
    if k > data.len() {
        return Err(Error::param(format!("k = {k} exceeds the {} training rows", data.len())));
    }
    let (s, rows) = standardized(data);
    let knn = Knn { k, rows, labels: data.labels().to_vec() };
    Ok(TrainedClassifier { model: Model::Knn(knn), feature_dim: data.dim(), standardizer: Some(s), warnings: Vec::new() })
}

pub fn train_classifier(kind: ClassifierKind, data: &LabeledSet, params: &ClassifierParams, seed: u64, exec: Execution) -> Result<TrainedClassifier> {
    match kind {
        ClassifierKind::Svm => train_svm(data, &params.svm),
        ClassifierKind::RandomForest => train_random_forest(data, &params.forest, seed, exec),
        ClassifierKind::Knn => train_knn(data, params.knn_k),
    }
}

/// Scores the test set; positives are `score >= threshold`.
pub fn evaluate(clf: &TrainedClassifier, test: &LabeledSet, threshold: f64, seed: u64, config_hash: &str) -> Result<EvalReport> {
    if test.dim() != clf.feature_dim {
        return Err(Error::shape(format!("classifier expects {} features, test set has {}", clf.feature_dim, test.dim())));
    }
    let scores = clf.predict_scores(test)?;
    let mut r = EvalReport::from_scores(&scores, test.labels(), threshold, seed, config_hash)?;
    r.warnings = clf.warnings.clone();
    Ok(r)
}
