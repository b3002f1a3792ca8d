//! Long-format result tables: `device,condition,metric,value`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::spec::ExperimentSpec;
use super::{HarnessError, TOOL_VERSION};

pub const HEADER: &str = "device,condition,metric,value";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub device: String,
    pub condition: String,
    pub metric: String,
    pub value: f64,
}

impl Row {
    /// Text before the first `.` of the metric name; one CSV per family.
    pub fn family(&self) -> &str {
        self.metric.split('.').next().unwrap_or(&self.metric)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub kind: String,
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
    /// Extra provenance lines, such as conventions and per-trial errors.
    pub notes: Vec<String>,
    pub rows: Vec<Row>,
    /// Side files written next to the CSVs, e.g. confusion matrices.
    pub attachments: Vec<(String, String)>,
}

impl Report {
    pub fn new(kind: &str, seed: u64, config_hash: impl Into<String>) -> Self {
        Self {
            kind: kind.to_string(),
            seed,
            config_hash: config_hash.into(),
            version: TOOL_VERSION.to_string(),
            notes: Vec::new(),
            rows: Vec::new(),
            attachments: Vec::new(),
        }
    }

    pub fn for_spec(spec: &ExperimentSpec) -> Self {
        Self::new(spec.kind.as_str(), spec.seed, spec.config_hash())
    }

    /// Non-finite values become an error row plus a note.
    pub fn push(&mut self, device: &str, condition: &str, metric: &str, value: f64) {
        if value.is_finite() {
            self.rows.push(Row {
                device: device.to_string(),
                condition: condition.to_string(),
                metric: metric.to_string(),
                value,
            });
        } else {
            self.error(device, condition, &format!("{metric} evaluated to {value}"));
        }
    }

    /// Records a failed cell without aborting the run.
    pub fn error(&mut self, device: &str, condition: &str, message: &str) {
        self.rows.push(Row {
            device: device.to_string(),
            condition: condition.to_string(),
            metric: "error".to_string(),
            value: 1.0,
        });
        self.notes
            .push(format!("error {device} {condition}: {}", message.replace('\n', " ")));
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    pub fn attach(&mut self, name: impl Into<String>, contents: impl Into<String>) {
        self.attachments.push((name.into(), contents.into()));
    }

    /// First value matching all three keys.
    pub fn value(&self, device: &str, condition: &str, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.device == device && r.condition == condition && r.metric == metric)
            .map(|r| r.value)
    }

    pub fn error_count(&self) -> usize {
        self.rows.iter().filter(|r| r.metric == "error").count()
    }

    fn preamble(&self) -> String {
        let mut s = format!(
            "# tool: powerleak {}\n# kind: {}\n# seed: {}\n# config_sha256: {}\n",
            self.version, self.kind, self.seed, self.config_hash
        );
        for n in &self.notes {
            s.push_str("# ");
            s.push_str(&n.replace('\n', " "));
            s.push('\n');
        }
        s
    }

    /// CSV files keyed by file name, rows in insertion order.
    pub fn render(&self) -> BTreeMap<String, String> {
        let mut files: BTreeMap<String, String> = BTreeMap::new();
        let head = format!("{}{HEADER}\n", self.preamble());
        if self.rows.is_empty() {
            files.insert(format!("{}.csv", self.kind), head);
            return files;
        }
        for r in &self.rows {
            let name = format!("{}_{}.csv", self.kind, r.family());
            let body = files.entry(name).or_insert_with(|| head.clone());
            body.push_str(&format!(
                "{},{},{},{}\n",
                field(&r.device),
                field(&r.condition),
                field(&r.metric),
                r.value
            ));
        }
        files
    }
}

fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes every CSV and attachment into `dir` and returns their paths.
pub fn emit_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let io = |path: &Path, source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    let files = report.render();
    for (name, body) in files
        .iter()
        .map(|(n, b)| (n.as_str(), b.as_str()))
        .chain(report.attachments.iter().map(|(n, b)| (n.as_str(), b.as_str())))
    {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
