use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::image::{read_pgm, write_atomic, write_pgm};
use crate::par::{self, Execution};
use crate::preprocess::{roi_pipeline_timed, StageTimings};
use crate::synthdata::{export_dataset, generate_dataset_with, load_dataset, stratified_split, Manifest, MANIFEST};
use crate::{Error, Result};

use super::config::ExperimentConfig;
use super::experiments::run_experiment;
use super::provenance_comment;
use super::table::{ResultTable, RESULTS_JSON};

pub const PREPROCESS_REPORT: &str = "preprocess_report.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_TXT: &str = "summary.txt";
pub const RESOLVED_CONFIG: &str = "config.json";

/// How a command finished. Errors that stop a command early are `Err`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    /// Some files or methods failed and were recorded; the rest ran.
    Partial,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Complete => 0,
            Outcome::Partial => 2,
        }
    }

    fn from_failures(n: usize) -> Self {
        if n == 0 {
            Outcome::Complete
        } else {
            Outcome::Partial
        }
    }
}

fn is_nonempty_dir(dir: &Path) -> bool {
    std::fs::read_dir(dir).map(|mut d| d.next().is_some()).unwrap_or(false)
}

/// Renders the configured dataset, splits it 70/30 (by default) and writes
/// it under `out`. An existing non-empty `out` is refused unless `force`,
/// in which case only the previous dataset files are removed.
pub fn cmd_generate(cfg: &ExperimentConfig, out: &Path, force: bool, exec: Execution) -> Result<Manifest> {
    cfg.validate()?;
    if is_nonempty_dir(out) {
        if !force {
            return Err(Error::Config(format!("{} is not empty; pass --force to overwrite", out.display())));
        }
        for sub in ["train", "test"] {
            let p = out.join(sub);
            if p.is_dir() {
                std::fs::remove_dir_all(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
        let m = out.join(MANIFEST);
        if m.exists() {
            std::fs::remove_file(&m).map_err(|e| Error::io(&m, e))?;
        }
    }
    let d = &cfg.dataset;
    let ds = generate_dataset_with(d.benign, d.malignant, d.difficulty, cfg.seed, exec)?;
    let split = stratified_split(&ds.labels(), d.test_fraction, cfg.seed)?;
    export_dataset(&ds, &split, out, &cfg.config_hash())
}

/// Per-file line of `preprocess_report.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessRecord {
    pub file: String,
    pub mask_area: Option<usize>,
    pub timings: Option<StageTimings>,
    pub error: Option<String>,
}

fn collect_pgms(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_pgms(root, &p, out)?;
        } else if p.extension().is_some_and(|e| e == "pgm") {
            out.push(p.strip_prefix(root).expect("walk stays under root").to_path_buf());
        }
    }
    Ok(())
}

/// Runs the ROI pipeline over every `.pgm` under `input`, mirroring the
/// directory layout in `out` as `{stem}_enhanced.pgm` and `{stem}_mask.pgm`.
/// Unreadable images are recorded in the report and skipped.
pub fn cmd_preprocess(cfg: &ExperimentConfig, input: &Path, out: &Path, exec: Execution) -> Result<(Vec<PreprocessRecord>, Outcome)> {
    cfg.validate()?;
    let mut files = Vec::new();
    collect_pgms(input, input, &mut files)?;
    if files.is_empty() {
        return Err(Error::Config(format!("no .pgm files under {}", input.display())));
    }
    let hash = cfg.config_hash();
    let comment = provenance_comment(cfg.seed, &hash);
    let records: Vec<PreprocessRecord> = par::map(exec, &files, |rel| {
        let file = rel.to_string_lossy().replace('\\', "/");
        let r = (|| {
            let img = read_pgm(&input.join(rel))?;
            let (enhanced, mask, timings) = roi_pipeline_timed(&img, &cfg.pipeline)?;
            let stem = out.join(rel.with_extension(""));
            let name = |suffix: &str| {
                let mut s = stem.clone().into_os_string();
                s.push(suffix);
                PathBuf::from(s)
            };
            write_pgm(&name("_enhanced.pgm"), &enhanced, Some(&comment))?;
            write_pgm(&name("_mask.pgm"), &mask.to_image(), Some(&comment))?;
            Ok::<_, Error>((mask.area(), timings))
        })();
        match r {
            Ok((area, t)) => PreprocessRecord { file, mask_area: Some(area), timings: Some(t), error: None },
            Err(e) => PreprocessRecord { file, mask_area: None, timings: None, error: Some(e.to_string()) },
        }
    });

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "file", "status", "mask_area", "median_ms", "equalize_ms", "butterworth_ms", "morphology_ms", "binarize_ms", "error",
        "seed", "config_hash", "version",
    ])?;
    let seed = cfg.seed.to_string();
    for r in &records {
        let ms = |f: fn(&StageTimings) -> f64| r.timings.as_ref().map(|t| format!("{:.3}", f(t) * 1e3)).unwrap_or_default();
        w.write_record([
            r.file.as_str(),
            if r.error.is_none() { "ok" } else { "error" },
            &r.mask_area.map(|a| a.to_string()).unwrap_or_default(),
            &ms(|t| t.median),
            &ms(|t| t.equalize),
            &ms(|t| t.butterworth),
            &ms(|t| t.morphology),
            &ms(|t| t.binarize),
            r.error.as_deref().unwrap_or(""),
            &seed,
            &hash,
            crate::ARTIFACT_VERSION,
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    write_atomic(&out.join(PREPROCESS_REPORT), &bytes)?;
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    Ok((records, Outcome::from_failures(failed)))
}

/// Runs `cfg.experiment` and writes `{out}/{experiment}/results.{csv,json}`
/// plus the resolved config. Data comes from `data` when given (a directory
/// written by [`cmd_generate`]), else it is rendered in memory.
pub fn cmd_run(cfg: &ExperimentConfig, data: Option<&Path>, out: &Path, exec: Execution) -> Result<(ResultTable, Outcome)> {
    cfg.validate()?;
    let hash = cfg.config_hash();
    let mut warnings = Vec::new();
    let (ds, split) = match data {
        Some(dir) => {
            let (ds, split, manifest) = load_dataset(dir)?;
            if manifest.config_hash != hash {
                warnings.push(format!(
                    "dataset {} was generated under config_hash {}, this run uses {hash}",
                    dir.display(),
                    manifest.config_hash
                ));
            }
            (ds, split)
        }
        None => {
            let d = &cfg.dataset;
            let ds = generate_dataset_with(d.benign, d.malignant, d.difficulty, cfg.seed, exec)?;
            let split = stratified_split(&ds.labels(), d.test_fraction, cfg.seed)?;
            (ds, split)
        }
    };
    let mut table = run_experiment(cfg.experiment, &ds, &split, cfg, cfg.seed, exec);
    table.warnings.extend(warnings);
    let dir = out.join(cfg.experiment.name());
    table.write(&dir)?;
    let mut resolved = serde_json::to_value(cfg)?;
    resolved["config_hash"] = hash.into();
    resolved["version"] = crate::ARTIFACT_VERSION.into();
    let mut json = serde_json::to_vec_pretty(&resolved)?;
    json.push(b'\n');
    write_atomic(&dir.join(RESOLVED_CONFIG), &json)?;
    let failed = table.rows.iter().filter(|r| !r.is_ok()).count();
    Ok((table, Outcome::from_failures(failed)))
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub tables: Vec<ResultTable>,
    pub text: String,
    pub warnings: Vec<String>,
}

fn find_tables(p: &Path, depth: usize, out: &mut Vec<PathBuf>) {
    if p.is_file() {
        out.push(p.to_path_buf());
        return;
    }
    let direct = p.join(RESULTS_JSON);
    if direct.is_file() {
        out.push(direct);
        return;
    }
    if depth == 0 {
        return;
    }
    if let Ok(rd) = std::fs::read_dir(p) {
        let mut subs: Vec<PathBuf> = rd.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
        subs.sort();
        for s in subs {
            find_tables(&s, depth - 1, out);
        }
    }
}

const BAR_WIDTH: usize = 40;

fn bar(auc: f64) -> String {
    let n = (auc * BAR_WIDTH as f64).round() as usize;
    format!("{}{}", "#".repeat(n), ".".repeat(BAR_WIDTH - n))
}

/// Merges result tables found under `inputs` (directories containing
/// `results.json`, their parents, or the files themselves) into
/// `summary.csv` and `summary.txt` under `out`.
pub fn cmd_report(inputs: &[PathBuf], out: &Path) -> Result<Summary> {
    let mut paths = Vec::new();
    for p in inputs {
        find_tables(p, 2, &mut paths);
    }
    let mut warnings = Vec::new();
    let mut tables = Vec::new();
    for p in &paths {
        match ResultTable::read_json(p) {
            Ok(t) => tables.push(t),
            Err(e) => warnings.push(format!("skipping {}: {e}", p.display())),
        }
    }
    if tables.is_empty() {
        return Err(Error::Config("no valid result tables among the inputs".into()));
    }

    let reference = tables[0].config_hash.clone();
    let versions: BTreeSet<&str> = tables.iter().map(|t| t.version.as_str()).collect();
    if versions.len() > 1 || !versions.contains(crate::ARTIFACT_VERSION) {
        warnings.push(format!(
            "artifact version mismatch: tables carry {}, this build is {}",
            versions.into_iter().collect::<Vec<_>>().join(", "),
            crate::ARTIFACT_VERSION
        ));
    }
    for t in &tables {
        if t.config_hash != reference {
            warnings.push(format!("{}: config_hash {} differs from {reference}", t.experiment, t.config_hash));
        }
        for w in &t.warnings {
            warnings.push(format!("{}: {w}", t.experiment));
        }
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["experiment", "method", "auc", "accuracy", "status", "flag", "seed", "config_hash", "version"])?;
    for t in &tables {
        let flag = if t.config_hash != reference { "config_hash differs" } else { "" };
        for r in &t.rows {
            w.write_record([
                t.experiment.as_str(),
                &r.method,
                &r.auc.map(|v| v.to_string()).unwrap_or_default(),
                &r.accuracy.map(|v| v.to_string()).unwrap_or_default(),
                if r.is_ok() { "ok" } else { "error" },
                flag,
                &t.seed.to_string(),
                &t.config_hash,
                &t.version,
            ])?;
        }
    }
    let csv_bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;

    let mut text = String::new();
    let first = &tables[0];
    let _ = writeln!(text, "# {}", provenance_comment(first.seed, &first.config_hash));
    for wline in &warnings {
        let _ = writeln!(text, "warning: {wline}");
    }
    for t in &tables {
        let width = t.rows.iter().map(|r| r.method.len()).max().unwrap_or(0);
        let _ = writeln!(text, "\n{} (seed {}, config_hash {}, version {})", t.experiment, t.seed, t.config_hash, t.version);
        let _ = writeln!(text, "  {}", t.protocol);
        for r in &t.rows {
            match (r.auc, &r.error) {
                (Some(auc), _) => {
                    let acc = r.accuracy.unwrap_or(f64::NAN);
                    let _ = writeln!(text, "  {:<width$} |{}| AUC {auc:.3}  acc {acc:.3}", r.method, bar(auc));
                }
                (None, e) => {
                    let _ = writeln!(text, "  {:<width$} |{:^BAR_WIDTH$}| {}", r.method, "ERROR", e.as_deref().unwrap_or(""));
                }
            }
        }
    }
    write_atomic(&out.join(SUMMARY_CSV), &csv_bytes)?;
    write_atomic(&out.join(SUMMARY_TXT), text.as_bytes())?;
    Ok(Summary { tables, text, warnings })
}
