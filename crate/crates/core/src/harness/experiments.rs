use crate::classifiers::{evaluate, train_classifier, EvalReport, LabeledSet};
use crate::features::{extract_batch, DescriptorId, FeatureVector};
use crate::fusion::{extract_cnn_features, run_view_comparison, train_extractors, train_fusion_pipeline, ExtractedFeatures};
use crate::image::GrayImage;
use crate::par::Execution;
use crate::rng::derive_seed;
use crate::synthdata::{split_with_ratio, DualViewSample, Split, SynthDataset};
use crate::Result;

use super::config::{ExperimentConfig, ExperimentId};
use super::table::{ResultRow, ResultTable};

/// Training positive:negative ratios, as table labels and values.
pub const RATIOS: [(&str, f64); 3] = [("2:1", 2.0), ("1.3:1", 1.3), ("1:1", 1.0)];

pub const FUSED_ROW: &str = "Feature Fusion CNN";

/// Row label for a descriptor in the features table.
pub fn descriptor_row(d: DescriptorId) -> &'static str {
    match d {
        DescriptorId::Fused => FUSED_ROW,
        other => other.name(),
    }
}

const THRESHOLD: f64 = 0.5;

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    hash: &'a str,
    train_seed: u64,
    exec: Execution,
}

impl Ctx<'_> {
    fn fit_eval(
        &self,
        kind: crate::classifiers::ClassifierKind,
        train: (&[FeatureVector], &[usize]),
        test: (&[FeatureVector], &[usize]),
    ) -> Result<EvalReport> {
        let tr = LabeledSet::from_features(train.0, train.1.to_vec(), "train")?;
        let te = LabeledSet::from_features(test.0, test.1.to_vec(), "test")?;
        let clf = train_classifier(kind, &tr, &self.cfg.classifier, derive_seed(self.train_seed, 3), self.exec)?;
        evaluate(&clf, &te, THRESHOLD, self.cfg.seed, self.hash)
    }
}

fn pick<'a>(ds: &'a SynthDataset, idx: &[usize]) -> Vec<&'a DualViewSample> {
    idx.iter().map(|&i| &ds.samples[i]).collect()
}

fn coronal<'a>(s: &[&'a DualViewSample]) -> Vec<&'a GrayImage> {
    s.iter().map(|s| &s.coronal).collect()
}

fn labels(s: &[&DualViewSample]) -> Vec<usize> {
    s.iter().map(|s| s.label()).collect()
}

fn cnn_features(
    ctx: &Ctx,
    train: &[&DualViewSample],
    test: &[&DualViewSample],
) -> Result<(ExtractedFeatures, ExtractedFeatures)> {
    let fc = ctx.cfg.fusion_config(ctx.train_seed);
    let (c1, c2) = train_extractors(train, &fc, ctx.exec)?;
    Ok((
        extract_cnn_features(&c1, &c2, &coronal(train), ctx.exec)?,
        extract_cnn_features(&c1, &c2, &coronal(test), ctx.exec)?,
    ))
}

/// Runs one experiment on `ds`. `split` is used by every experiment except
/// `ratios`, which draws its own balanced test set and reweighted training
/// sets. `train_seed` seeds network initialization, shuffling and forests;
/// the CLI passes the config seed.
pub fn run_experiment(
    id: ExperimentId,
    ds: &SynthDataset,
    split: &Split,
    cfg: &ExperimentConfig,
    train_seed: u64,
    exec: Execution,
) -> ResultTable {
    let hash = cfg.config_hash();
    let ctx = Ctx { cfg, hash: &hash, train_seed, exec };
    let train = pick(ds, &split.train);
    let test = pick(ds, &split.test);
    let (ytr, yte) = (labels(&train), labels(&test));
    let err = |e: crate::Error| e.to_string();

    let mut protocol = format!(
        "stratified split: {} train / {} test (test_fraction {}), split seed {}, train seed {}",
        train.len(),
        test.len(),
        cfg.dataset.test_fraction,
        cfg.seed,
        train_seed
    );
    let rows = match id {
        ExperimentId::Features => {
            let mut rows = Vec::new();
            for d in [DescriptorId::Hgd, DescriptorId::Hog, DescriptorId::Glcm] {
                let r = (|| {
                    let ftr = extract_batch(&coronal(&train), d, exec)?;
                    let fte = extract_batch(&coronal(&test), d, exec)?;
                    ctx.fit_eval(cfg.default_classifier, (&ftr, &ytr), (&fte, &yte))
                })();
                rows.push(ResultRow::from_result(descriptor_row(d), r.map_err(err)));
            }
            let cnn = cnn_features(&ctx, &train, &test);
            for d in [DescriptorId::Cnn1, DescriptorId::Cnn2, DescriptorId::Fused] {
                let r = match &cnn {
                    Ok((ftr, fte)) => (|| ctx.fit_eval(cfg.default_classifier, (&ftr.get(d)?, &ytr), (&fte.get(d)?, &yte)))()
                        .map_err(err),
                    Err(e) => Err(format!("feature extractors failed: {e}")),
                };
                rows.push(ResultRow::from_result(descriptor_row(d), r));
            }
            rows
        }
        ExperimentId::Classifiers => {
            let cnn = cnn_features(&ctx, &train, &test);
            crate::classifiers::ClassifierKind::ALL
                .into_iter()
                .map(|k| {
                    let r = match &cnn {
                        Ok((ftr, fte)) => ctx.fit_eval(k, (&ftr.fused(), &ytr), (&fte.fused(), &yte)).map_err(err),
                        Err(e) => Err(format!("feature extractors failed: {e}")),
                    };
                    ResultRow::from_result(k.display_name(), r)
                })
                .collect()
        }
        ExperimentId::Ratios => {
            let all = ds.labels();
            let mut sizes = Vec::new();
            let rows = RATIOS
                .into_iter()
                .map(|(name, ratio)| {
                    let r = (|| {
                        let s = split_with_ratio(&all, cfg.dataset.test_fraction, ratio, cfg.seed)?;
                        let (tr, te) = (pick(ds, &s.train), pick(ds, &s.test));
                        sizes.push(format!("{name} {} train", tr.len()));
                        let model = train_fusion_pipeline(&tr, &cfg.fusion_config(train_seed), exec)?;
                        model.evaluate(&te, cfg.seed, &hash, exec)
                    })();
                    ResultRow::from_result(name, r.map_err(err))
                })
                .collect();
            protocol = format!(
                "class-balanced test set (test_fraction {}) shared by all ratios; training sets subsampled \
                 with negatives setting the scale ({}); split seed {}, train seed {}",
                cfg.dataset.test_fraction,
                sizes.join(", "),
                cfg.seed,
                train_seed
            );
            rows
        }
        ExperimentId::Views => {
            let vc = run_view_comparison(&train, &test, &cfg.train.with_seed(train_seed), &hash, exec);
            vc.reports.into_iter().map(|(name, r)| ResultRow::from_result(name, r)).collect()
        }
    };
    ResultTable {
        experiment: id.name().to_string(),
        seed: cfg.seed,
        config_hash: hash.clone(),
        version: crate::ARTIFACT_VERSION.to_string(),
        protocol,
        rows,
        warnings: Vec::new(),
    }
}
