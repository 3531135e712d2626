//! Single-Net / 2Views-Net, probability fusion and the two-CNN
//! feature-fusion pipeline.

use serde::{Deserialize, Serialize};

use crate::classifiers::{
    evaluate, train_classifier, ClassifierKind, ClassifierParams, EvalReport, LabeledSet, TrainedClassifier,
};
use crate::features::{cnn_penultimate_features, DescriptorId, FeatureVector};
use crate::image::GrayImage;
use crate::nn::{train, ArchitectureSpec, Example, Network, TrainConfig, TrainReport};
use crate::par::Execution;
use crate::rng::derive_seed;
use crate::synthdata::{DualViewSample, View};
use crate::{Error, Result};

pub const SINGLE_NET: &str = "name=single-net;input=1x64x64;\
branch=conv16k3p1,relu,maxpool,conv32k3p1,relu,maxpool,conv64k3p1,relu,maxpool,flatten;\
trunk=dense128,relu,dense2";

/// Second extractor: 5×5 first stage and a wider dense layer.
pub const CNN2_NET: &str = "name=cnn2;input=1x64x64;\
branch=conv16k5p2,relu,maxpool,conv32k3p1,relu,maxpool,conv64k3p1,relu,maxpool,flatten;\
trunk=dense256,relu,dense2";

pub const TWO_VIEWS_NET: &str = "name=two-views-net;input=1x64x64;\
branch=conv16k3p1,relu,maxpool,conv32k3p1,relu,maxpool,conv64k3p1,relu,maxpool,flatten;\
branch=conv16k3p1,relu,maxpool,conv32k3p1,relu,maxpool,conv64k3p1,relu,maxpool,flatten;\
trunk=dense512,relu,dense256,relu,dense2";

pub fn single_net_spec() -> ArchitectureSpec {
    ArchitectureSpec::from_text(SINGLE_NET).expect("built-in spec parses")
}

pub fn cnn2_spec() -> ArchitectureSpec {
    ArchitectureSpec::from_text(CNN2_NET).expect("built-in spec parses")
}

pub fn two_views_spec() -> ArchitectureSpec {
    ArchitectureSpec::from_text(TWO_VIEWS_NET).expect("built-in spec parses")
}

pub fn build_single_net(seed: u64) -> Network {
    Network::new(single_net_spec(), seed).expect("built-in spec is consistent")
}

pub fn build_cnn2(seed: u64) -> Network {
    Network::new(cnn2_spec(), seed).expect("built-in spec is consistent")
}

pub fn build_two_views_net(seed: u64) -> Network {
    Network::new(two_views_spec(), seed).expect("built-in spec is consistent")
}

/// Arithmetic mean of the two view probabilities.
pub fn probability_fusion(p_coronal: f64, p_transverse: f64) -> Result<f64> {
    for (name, p) in [("p_coronal", p_coronal), ("p_transverse", p_transverse)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param(format!("{name} = {p} is outside [0, 1]")));
        }
    }
    Ok((p_coronal + p_transverse) / 2.0)
}

fn examples(samples: &[&DualViewSample], views: &[View]) -> Vec<Example> {
    samples
        .iter()
        .map(|s| Example {
            inputs: views.iter().map(|&v| s.view(v).to_standardized_tensor()).collect(),
            label: s.label(),
        })
        .collect()
}

fn check_two_classes(samples: &[&DualViewSample]) -> Result<()> {
    let pos = samples.iter().filter(|s| s.label() == 1).count();
    if pos == 0 || pos == samples.len() {
        return Err(Error::Training("training data must contain both classes".into()));
    }
    Ok(())
}

/// Trains `net` on the given views (one per branch, in order).
pub fn train_on_views(
    net: &mut Network,
    samples: &[&DualViewSample],
    views: &[View],
    config: &TrainConfig,
    exec: Execution,
) -> Result<TrainReport> {
    check_two_classes(samples)?;
    train(net, &examples(samples, views), config, exec)
}

/// Softmax probability of malignancy for each sample.
pub fn predict_views(net: &Network, samples: &[&DualViewSample], views: &[View], exec: Execution) -> Result<Vec<f64>> {
    crate::par::map(exec, samples, |s| {
        let inputs: Vec<_> = views.iter().map(|&v| s.view(v).to_standardized_tensor()).collect();
        net.predict_positive(&inputs.iter().collect::<Vec<_>>())
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub train: TrainConfig,
    pub classifier: ClassifierParams,
    /// Downstream classifier for fused features.
    pub fused_classifier: ClassifierKind,
    /// View fed to the feature-extracting CNNs.
    pub feature_view: View,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            train: TrainConfig::default(),
            classifier: ClassifierParams::default(),
            fused_classifier: ClassifierKind::Svm,
            feature_view: View::Coronal,
        }
    }
}

/// Two pre-trained CNN extractors plus a classifier on their concatenated
/// penultimate features.
#[derive(Debug, Clone)]
pub struct FusionModel {
    pub cnn1: Network,
    pub cnn2: Network,
    pub classifier: TrainedClassifier,
    pub view: View,
}

/// Per-sample penultimate features of both extractors.
#[derive(Debug, Clone)]
pub struct ExtractedFeatures {
    pub cnn1: Vec<FeatureVector>,
    pub cnn2: Vec<FeatureVector>,
}

impl ExtractedFeatures {
    pub fn fused(&self) -> Vec<FeatureVector> {
        self.cnn1.iter().zip(&self.cnn2).map(|(a, b)| FeatureVector::concat(&[a, b])).collect()
    }

    pub fn get(&self, id: DescriptorId) -> Result<Vec<FeatureVector>> {
        match id {
            DescriptorId::Cnn1 => Ok(self.cnn1.clone()),
            DescriptorId::Cnn2 => Ok(self.cnn2.clone()),
            DescriptorId::Fused => Ok(self.fused()),
            other => Err(Error::param(format!("{other} is not a CNN descriptor"))),
        }
    }
}

pub fn extract_cnn_features(cnn1: &Network, cnn2: &Network, images: &[&GrayImage], exec: Execution) -> Result<ExtractedFeatures> {
    let pairs = crate::par::map(exec, images, |img| -> Result<(FeatureVector, FeatureVector)> {
        Ok((
            cnn_penultimate_features(cnn1, img, DescriptorId::Cnn1)?,
            cnn_penultimate_features(cnn2, img, DescriptorId::Cnn2)?,
        ))
    });
    let mut out = ExtractedFeatures { cnn1: Vec::new(), cnn2: Vec::new() };
    for p in pairs {
        let (a, b) = p?;
        out.cnn1.push(a);
        out.cnn2.push(b);
    }
    Ok(out)
}

/// Trains CNN1 and CNN2 on one view (seeds derived from `config.train.seed`).
pub fn train_extractors(samples: &[&DualViewSample], config: &FusionConfig, exec: Execution) -> Result<(Network, Network)> {
    let seed = config.train.seed;
    let mut cnn1 = build_single_net(derive_seed(seed, 1));
    let mut cnn2 = build_cnn2(derive_seed(seed, 2));
    let views = [config.feature_view];
    train_on_views(&mut cnn1, samples, &views, &TrainConfig { seed: derive_seed(seed, 11), ..config.train }, exec)?;
    train_on_views(&mut cnn2, samples, &views, &TrainConfig { seed: derive_seed(seed, 12), ..config.train }, exec)?;
    Ok((cnn1, cnn2))
}

pub fn train_fusion_pipeline(samples: &[&DualViewSample], config: &FusionConfig, exec: Execution) -> Result<FusionModel> {
    let (cnn1, cnn2) = train_extractors(samples, config, exec)?;
    let images: Vec<&GrayImage> = samples.iter().map(|s| s.view(config.feature_view)).collect();
    let feats = extract_cnn_features(&cnn1, &cnn2, &images, exec)?;
    let labels = samples.iter().map(|s| s.label()).collect();
    let set = LabeledSet::from_features(&feats.fused(), labels, "fusion/train")?;
    let classifier = train_classifier(config.fused_classifier, &set, &config.classifier, derive_seed(config.train.seed, 3), exec)?;
    Ok(FusionModel { cnn1, cnn2, classifier, view: config.feature_view })
}

impl FusionModel {
    pub fn fused_features(&self, samples: &[&DualViewSample], exec: Execution) -> Result<Vec<FeatureVector>> {
        let images: Vec<&GrayImage> = samples.iter().map(|s| s.view(self.view)).collect();
        Ok(extract_cnn_features(&self.cnn1, &self.cnn2, &images, exec)?.fused())
    }

    pub fn predict_scores(&self, samples: &[&DualViewSample], exec: Execution) -> Result<Vec<f64>> {
        self.fused_features(samples, exec)?
            .iter()
            .map(|f| self.classifier.predict_score(&f.values))
            .collect()
    }

    pub fn evaluate(&self, test: &[&DualViewSample], seed: u64, config_hash: &str, exec: Execution) -> Result<EvalReport> {
        let feats = self.fused_features(test, exec)?;
        let set = LabeledSet::from_features(&feats, test.iter().map(|s| s.label()).collect(), "fusion/test")?;
        evaluate(&self.classifier, &set, 0.5, seed, config_hash)
    }
}

pub const VIEW_MODELS: [&str; 4] = ["Single-Net-Coronal", "Single-Net-Transverse", "Probability fusion", "2Views-Net"];

#[derive(Debug, Clone)]
pub struct ViewComparison {
    /// One entry per name in [`VIEW_MODELS`], in that order.
    pub reports: Vec<(String, Result<EvalReport, String>)>,
    pub test_labels: Vec<usize>,
    pub p_coronal: Option<Vec<f64>>,
    pub p_transverse: Option<Vec<f64>>,
    pub networks: Vec<(String, Network)>,
}

impl ViewComparison {
    pub fn is_complete(&self) -> bool {
        self.reports.iter().all(|(_, r)| r.is_ok())
    }
}

/// Trains Single-Net on each view and 2Views-Net on both, then evaluates
/// the three networks and the mean of the single-view probabilities on the
/// same test samples. A failing model is recorded and the rest continue.
pub fn run_view_comparison(
    train_set: &[&DualViewSample],
    test_set: &[&DualViewSample],
    config: &TrainConfig,
    config_hash: &str,
    exec: Execution,
) -> ViewComparison {
    let seed = config.seed;
    let labels: Vec<usize> = test_set.iter().map(|s| s.label()).collect();
    let mut networks = Vec::new();
    let single = |view: View, k: u64| -> Result<(Network, Vec<f64>)> {
        let mut net = build_single_net(derive_seed(seed, k));
        train_on_views(&mut net, train_set, &[view], &TrainConfig { seed: derive_seed(seed, 10 + k), ..*config }, exec)?;
        let p = predict_views(&net, test_set, &[view], exec)?;
        Ok((net, p))
    };
    let report = |p: &[f64]| EvalReport::from_scores(p, &labels, 0.5, seed, config_hash).map_err(|e| e.to_string());

    let mut reports = Vec::with_capacity(4);
    let mut probs = [None, None];
    for (k, view) in [View::Coronal, View::Transverse].into_iter().enumerate() {
        match single(view, k as u64 + 1) {
            Ok((net, p)) => {
                reports.push((VIEW_MODELS[k].to_string(), report(&p)));
                networks.push((VIEW_MODELS[k].to_string(), net));
                probs[k] = Some(p);
            }
            Err(e) => reports.push((VIEW_MODELS[k].to_string(), Err(e.to_string()))),
        }
    }
    let fused = match (&probs[0], &probs[1]) {
        (Some(c), Some(t)) => c
            .iter()
            .zip(t)
            .map(|(&a, &b)| probability_fusion(a, b))
            .collect::<Result<Vec<f64>>>()
            .map_err(|e| e.to_string())
            .and_then(|p| report(&p)),
        _ => Err("a single-view model failed, so there is nothing to fuse".to_string()),
    };
    reports.push((VIEW_MODELS[2].to_string(), fused));

    let two = (|| -> Result<(Network, Vec<f64>)> {
        let mut net = build_two_views_net(derive_seed(seed, 3));
        let views = [View::Coronal, View::Transverse];
        train_on_views(&mut net, train_set, &views, &TrainConfig { seed: derive_seed(seed, 13), ..*config }, exec)?;
        let p = predict_views(&net, test_set, &views, exec)?;
        Ok((net, p))
    })();
    match two {
        Ok((net, p)) => {
            reports.push((VIEW_MODELS[3].to_string(), report(&p)));
            networks.push((VIEW_MODELS[3].to_string(), net));
        }
        Err(e) => reports.push((VIEW_MODELS[3].to_string(), Err(e.to_string()))),
    }
    let [p_coronal, p_transverse] = probs;
    ViewComparison { reports, test_labels: labels, p_coronal, p_transverse, networks }
}
