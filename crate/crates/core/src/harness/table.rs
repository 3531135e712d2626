use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifiers::EvalReport;
use crate::image::write_atomic;
use crate::{Error, Result};

pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_JSON: &str = "results.json";

/// One method's outcome. Errored rows keep their name and carry the message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub auc: Option<f64>,
    pub accuracy: Option<f64>,
    /// `[tp, fp, tn, fn]` at threshold 0.5.
    pub confusion: Option<[usize; 4]>,
    pub error: Option<String>,
}

impl ResultRow {
    pub fn from_result(method: impl Into<String>, r: std::result::Result<EvalReport, String>) -> Self {
        let method = method.into();
        match r {
            Ok(rep) => ResultRow {
                method,
                auc: Some(rep.auc),
                accuracy: Some(rep.accuracy),
                confusion: Some([rep.tp, rep.fp, rep.tn, rep.fn_]),
                error: None,
            },
            Err(e) => ResultRow { method, auc: None, accuracy: None, confusion: None, error: Some(e) },
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub experiment: String,
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
    /// How train and test were drawn, in words.
    pub protocol: String,
    pub rows: Vec<ResultRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

const CSV_HEADER: [&str; 13] = [
    "experiment", "method", "auc", "accuracy", "tp", "fp", "tn", "fn", "status", "error", "seed", "config_hash", "version",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ResultTable {
    pub fn is_complete(&self) -> bool {
        self.rows.iter().all(ResultRow::is_ok)
    }

    pub fn row(&self, method: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.rows {
            for v in [r.auc, r.accuracy].into_iter().flatten() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Data(format!("{}: value {v} outside [0, 1]", r.method)));
                }
            }
            if r.is_ok() == r.auc.is_none() {
                return Err(Error::Data(format!("{}: row must carry either metrics or an error", r.method)));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            let c = r.confusion;
            let seed = self.seed.to_string();
            w.write_record([
                self.experiment.as_str(),
                &r.method,
                &opt(r.auc),
                &opt(r.accuracy),
                &opt(c.map(|c| c[0])),
                &opt(c.map(|c| c[1])),
                &opt(c.map(|c| c[2])),
                &opt(c.map(|c| c[3])),
                if r.is_ok() { "ok" } else { "error" },
                r.error.as_deref().unwrap_or(""),
                &seed,
                &self.config_hash,
                &self.version,
            ])?;
        }
        w.into_inner().map_err(|e| Error::Data(e.to_string()))
    }

    /// Writes `results.csv` and `results.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join(RESULTS_CSV), &self.to_csv()?)?;
        let mut json = serde_json::to_vec_pretty(self)?;
        json.push(b'\n');
        write_atomic(&dir.join(RESULTS_JSON), &json)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let t: ResultTable = serde_json::from_slice(&bytes)?;
        t.validate()?;
        Ok(t)
    }
}

/// `(method, auc)` pairs of the successful rows in a `results.csv`.
pub fn read_csv_aucs(path: &Path) -> Result<Vec<(String, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if &rec[8] == "ok" {
            let auc = rec[2].parse().map_err(|_| Error::Data(format!("bad auc `{}`", &rec[2])))?;
            out.push((rec[1].to_string(), auc));
        }
    }
    Ok(out)
}
