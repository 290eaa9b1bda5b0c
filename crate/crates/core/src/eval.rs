//! Answer-quality metrics and a manifest-driven batch scorer.
//!
//! Both metrics share one tokenizer: lowercase, then split on runs of
//! non-alphanumeric characters. Cosine similarity is computed over raw term
//! frequencies; ROUGE-1 uses clipped unigram overlap.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::gateway::ModelGateway;
use crate::orchestrator::{answer_query, QueryOptions, Session};
use crate::{Error, Result};

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn counts(tokens: &[String]) -> HashMap<&str, usize> {
    let mut m = HashMap::new();
    for t in tokens {
        *m.entry(t.as_str()).or_insert(0) += 1;
    }
    m
}

fn nonempty(text: &str) -> Result<Vec<String>> {
    let t = tokenize(text);
    if t.is_empty() {
        Err(Error::EmptyText)
    } else {
        Ok(t)
    }
}

pub fn cosine_similarity(a: &str, b: &str) -> Result<f64> {
    let (ta, tb) = (nonempty(a)?, nonempty(b)?);
    let (ca, cb) = (counts(&ta), counts(&tb));
    let dot: f64 = ca
        .iter()
        .filter_map(|(w, x)| cb.get(w).map(|y| (*x * *y) as f64))
        .sum();
    let sq = |c: &HashMap<&str, usize>| c.values().map(|x| (*x * *x) as f64).sum::<f64>();
    // One square root over the product keeps integer cases exact.
    Ok((dot / (sq(&ca) * sq(&cb)).sqrt()).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rouge1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Rouge1 {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self { precision, recall, f1 }
    }
}

pub fn rouge1(candidate: &str, reference: &str) -> Result<Rouge1> {
    let (tc, tr) = (nonempty(candidate)?, nonempty(reference)?);
    let (cc, cr) = (counts(&tc), counts(&tr));
    let overlap: usize = cc.iter().filter_map(|(w, x)| cr.get(w).map(|y| (*x).min(*y))).sum();
    Ok(Rouge1::from_pr(overlap as f64 / tc.len() as f64, overlap as f64 / tr.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Summarization,
    PatternExtraction,
    AnomalyDetection,
    RootCauseAnalysis,
    PredictiveFailureAnalysis,
    LogUnderstanding,
    LogFiltering,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::Summarization,
        Task::PatternExtraction,
        Task::AnomalyDetection,
        Task::RootCauseAnalysis,
        Task::PredictiveFailureAnalysis,
        Task::LogUnderstanding,
        Task::LogFiltering,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Summarization => "summarization",
            Self::PatternExtraction => "pattern_extraction",
            Self::AnomalyDetection => "anomaly_detection",
            Self::RootCauseAnalysis => "root_cause_analysis",
            Self::PredictiveFailureAnalysis => "predictive_failure_analysis",
            Self::LogUnderstanding => "log_understanding",
            Self::LogFiltering => "log_filtering",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == key)
            .ok_or_else(|| format!("unknown task {s:?}; expected one of {}", Task::ALL.map(Task::as_str).join(", ")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCase {
    pub task: Task,
    pub question: String,
    pub reference_answer: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub generated_answer: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub name: Option<String>,
    /// Log file the questions refer to, relative to the manifest.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub log_file: Option<String>,
    pub cases: Vec<EvalCase>,
}

fn manifest_err(case: Option<usize>, field: Option<&str>, message: impl Into<String>) -> Error {
    Error::Manifest {
        case,
        field: field.map(str::to_string),
        message: message.into(),
    }
}

impl Manifest {
    /// Parses and validates a manifest. Cases are numbered from 1 in
    /// diagnostics.
    pub fn parse(text: &str) -> Result<Self> {
        let root: Value = serde_json::from_str(text).map_err(|e| {
            manifest_err(None, None, format!("invalid JSON at line {}, column {}: {e}", e.line(), e.column()))
        })?;
        let obj = root
            .as_object()
            .ok_or_else(|| manifest_err(None, None, "top level must be an object"))?;
        let opt_str = |key: &str| -> Result<Option<String>> {
            match obj.get(key) {
                None | Some(Value::Null) => Ok(None),
                Some(Value::String(s)) => Ok(Some(s.clone())),
                Some(_) => Err(manifest_err(None, Some(key), "must be a string")),
            }
        };
        let name = opt_str("name")?;
        let log_file = opt_str("log_file")?;
        let raw_cases = obj
            .get("cases")
            .ok_or_else(|| manifest_err(None, Some("cases"), "missing"))?
            .as_array()
            .ok_or_else(|| manifest_err(None, Some("cases"), "must be an array"))?;
        if raw_cases.is_empty() {
            return Err(manifest_err(None, Some("cases"), "no cases"));
        }
        let mut cases = Vec::with_capacity(raw_cases.len());
        for (i, raw) in raw_cases.iter().enumerate() {
            let n = i + 1;
            let case = raw
                .as_object()
                .ok_or_else(|| manifest_err(Some(n), None, "case must be an object"))?;
            let text = |key: &str, required: bool| -> Result<Option<String>> {
                match case.get(key) {
                    None | Some(Value::Null) if required => Err(manifest_err(Some(n), Some(key), "missing")),
                    None | Some(Value::Null) => Ok(None),
                    Some(Value::String(s)) if s.trim().is_empty() => Err(manifest_err(Some(n), Some(key), "empty")),
                    Some(Value::String(s)) => Ok(Some(s.clone())),
                    Some(_) => Err(manifest_err(Some(n), Some(key), "must be a string")),
                }
            };
            let task = text("task", true)?
                .unwrap_or_default()
                .parse()
                .map_err(|e: String| manifest_err(Some(n), Some("task"), e))?;
            cases.push(EvalCase {
                task,
                question: text("question", true)?.unwrap_or_default(),
                reference_answer: text("reference_answer", true)?.unwrap_or_default(),
                generated_answer: text("generated_answer", false)?,
            });
        }
        Ok(Self { name, log_file, cases })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub case: usize,
    pub task: Task,
    pub question: String,
    pub cosine: f64,
    pub rouge1_precision: f64,
    pub rouge1_recall: f64,
    pub rouge1_f1: f64,
    pub generated_answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMean {
    pub task: Task,
    pub cases: usize,
    pub cosine: f64,
    pub rouge1_precision: f64,
    pub rouge1_recall: f64,
    pub rouge1_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub name: Option<String>,
    pub rows: Vec<ScoreRow>,
    pub task_means: Vec<TaskMean>,
    pub overall: Option<Overall>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overall {
    pub cases: usize,
    pub cosine: f64,
    pub rouge1_f1: f64,
}

/// Session, gateway and options used to answer cases that carry no
/// generated answer.
pub struct LiveContext<'a, G: ModelGateway + ?Sized> {
    pub session: &'a Session,
    pub gateway: &'a G,
    pub options: QueryOptions,
}

/// Scores a single pair. A generated answer with no tokens scores zero
/// instead of failing the batch.
pub fn score_pair(generated: &str, reference: &str) -> Result<(f64, Rouge1)> {
    if tokenize(reference).is_empty() {
        return Err(Error::EmptyText);
    }
    if tokenize(generated).is_empty() {
        return Ok((0.0, Rouge1::from_pr(0.0, 0.0)));
    }
    Ok((cosine_similarity(generated, reference)?, rouge1(generated, reference)?))
}

pub fn run_benchmark<G: ModelGateway + ?Sized>(manifest: &Manifest, live: Option<&LiveContext<'_, G>>) -> Result<Report> {
    let mut rows = Vec::with_capacity(manifest.cases.len());
    for (i, case) in manifest.cases.iter().enumerate() {
        let generated = match (&case.generated_answer, live) {
            (Some(g), _) => g.clone(),
            (None, Some(ctx)) => answer_query(ctx.session, &case.question, ctx.gateway, &ctx.options)?.text,
            (None, None) => {
                return Err(manifest_err(
                    Some(i + 1),
                    Some("generated_answer"),
                    "missing and no live backend was given",
                ))
            }
        };
        let (cosine, r) = score_pair(&generated, &case.reference_answer)
            .map_err(|_| manifest_err(Some(i + 1), Some("reference_answer"), "has no words"))?;
        rows.push(ScoreRow {
            case: i + 1,
            task: case.task,
            question: case.question.clone(),
            cosine,
            rouge1_precision: r.precision,
            rouge1_recall: r.recall,
            rouge1_f1: r.f1,
            generated_answer: generated,
        });
    }
    Ok(Report {
        name: manifest.name.clone(),
        task_means: task_means(&rows),
        overall: overall(&rows),
        rows,
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn task_means(rows: &[ScoreRow]) -> Vec<TaskMean> {
    Task::ALL
        .into_iter()
        .filter_map(|task| {
            let of: Vec<&ScoreRow> = rows.iter().filter(|r| r.task == task).collect();
            (!of.is_empty()).then(|| TaskMean {
                task,
                cases: of.len(),
                cosine: mean(of.iter().map(|r| r.cosine)),
                rouge1_precision: mean(of.iter().map(|r| r.rouge1_precision)),
                rouge1_recall: mean(of.iter().map(|r| r.rouge1_recall)),
                rouge1_f1: mean(of.iter().map(|r| r.rouge1_f1)),
            })
        })
        .collect()
}

fn overall(rows: &[ScoreRow]) -> Option<Overall> {
    (!rows.is_empty()).then(|| Overall {
        cases: rows.len(),
        cosine: mean(rows.iter().map(|r| r.cosine)),
        rouge1_f1: mean(rows.iter().map(|r| r.rouge1_f1)),
    })
}

impl Report {
    pub fn scores_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(["case", "task", "cosine", "rouge1_precision", "rouge1_recall", "rouge1_f1"])?;
        for r in &self.rows {
            w.write_record([
                r.case.to_string(),
                r.task.to_string(),
                format!("{:.6}", r.cosine),
                format!("{:.6}", r.rouge1_precision),
                format!("{:.6}", r.rouge1_recall),
                format!("{:.6}", r.rouge1_f1),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    /// Writes `scores.csv` and `report.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("scores.csv"), self.scores_csv()?)?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
