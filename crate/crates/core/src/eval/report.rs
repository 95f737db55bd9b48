use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{clusters_from_links, labels_to_assignment, Link};
use crate::classical::{deinterleave, ClassicalMethod, ClassicalParams};
use crate::error::{Error, Result};
use crate::sequence::PulseSequence;
use crate::simulator::read_dataset;
use crate::smcf::{load_checkpoint, Model};

use super::infer::{infer_windowed_detailed, Decode};
use super::metrics::{acc_nor, link_agreement, violations_of_links};

/// A deinterleaving method that can be scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Ground-truth labels; a self-consistency reference.
    Oracle,
    Cdif,
    Sdif,
    Prit,
    /// Model trained with cross-entropy only.
    Baseline,
    /// Model trained with the full flow loss.
    Smcf,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Oracle,
        Method::Cdif,
        Method::Sdif,
        Method::Prit,
        Method::Baseline,
        Method::Smcf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::Cdif => "cdif",
            Method::Sdif => "sdif",
            Method::Prit => "prit",
            Method::Baseline => "baseline",
            Method::Smcf => "smcf",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::param(format!("unknown method `{s}`")))
    }

    pub fn is_learned(self) -> bool {
        matches!(self, Method::Baseline | Method::Smcf)
    }

    fn classical(self) -> Option<ClassicalMethod> {
        match self {
            Method::Cdif => Some(ClassicalMethod::Cdif),
            Method::Sdif => Some(ClassicalMethod::Sdif),
            Method::Prit => Some(ClassicalMethod::Prit),
            _ => None,
        }
    }
}

/// Scores of one method on one record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordScore {
    pub acc_link: f64,
    pub acc_nor: f64,
    pub v_1m: f64,
}

/// Score one sequence's predicted links against its labels. `raw` is the
/// link set whose column collisions are counted.
pub fn score_links(pred: &[Link], raw: &[Link], truth_seq: &PulseSequence) -> Result<RecordScore> {
    let truth = labels_to_assignment(truth_seq)?.links()?;
    if pred.len() != truth.len() || raw.len() != truth.len() {
        return Err(Error::ShapeMismatch("prediction and truth differ in length".into()));
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    let pred_clusters = clusters_from_links(pred)?;
    let truth_clusters = clusters_from_links(&truth)?;
    Ok(RecordScore {
        acc_link: link_agreement(pred, &truth) as f64 / truth.len() as f64,
        acc_nor: acc_nor(&pred_clusters, &truth_clusters)?,
        v_1m: violations_of_links(raw, truth.len()) as f64,
    })
}

/// Window settings for learned methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferSettings {
    pub window: usize,
    pub stride: usize,
}

impl InferSettings {
    /// Window equal to the model capacity, half-window stride.
    pub fn for_model<T>(model: &Model<T>) -> Self {
        let window = model.config.seq_len;
        Self {
            window,
            stride: (window / 2).max(1),
        }
    }
}

/// Score a trained model on labeled sequences. With greedy decoding the
/// one-to-many count reads the unrepaired per-row argmax; with LP it reads
/// the decoded links.
pub fn score_model(
    model: &Model<f64>,
    seqs: &[PulseSequence],
    settings: InferSettings,
    decode: Decode,
) -> Result<Vec<RecordScore>> {
    seqs.par_iter()
        .map(|s| {
            let w = infer_windowed_detailed(model, s, settings.window, settings.stride, decode)?;
            let links = w.assignment.links()?;
            let raw = match decode {
                Decode::Greedy => &w.raw_links,
                Decode::Lp => &links,
            };
            score_links(&links, raw, s)
        })
        .collect()
}

fn score_classical(method: ClassicalMethod, seq: &PulseSequence, params: &ClassicalParams) -> Result<RecordScore> {
    let unlabeled = PulseSequence::unlabeled(seq.toas().to_vec())?;
    let links = deinterleave(method, &unlabeled, params)?.to_links();
    score_links(&links, &links, seq)
}

/// Mean scores over records.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregate {
    pub acc_link: f64,
    pub acc_nor: f64,
    pub v_1m: f64,
    pub n_records: usize,
}

impl Aggregate {
    pub fn of(scores: &[RecordScore]) -> Self {
        if scores.is_empty() {
            return Self::default();
        }
        let n = scores.len() as f64;
        Self {
            acc_link: scores.iter().map(|s| s.acc_link).sum::<f64>() / n,
            acc_nor: scores.iter().map(|s| s.acc_nor).sum::<f64>() / n,
            v_1m: scores.iter().map(|s| s.v_1m).sum::<f64>() / n,
            n_records: scores.len(),
        }
    }
}

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    /// Case id, or `all`.
    pub case: String,
    pub method: Method,
    /// `none` for methods that do not decode a soft matrix.
    pub decode: String,
    pub acc_link: f64,
    pub acc_nor: f64,
    pub v_1m: f64,
    pub n_records: usize,
}

/// All rows plus the per-record scores behind them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    /// `(method, decode) -> per-record scores` in dataset order.
    pub records: BTreeMap<(Method, String), Vec<RecordScore>>,
}

pub const REPORT_COLUMNS: [&str; 8] = [
    "dataset", "case", "method", "decode", "acc_link", "acc_nor", "v_1m", "n_records",
];

impl EvalReport {
    pub fn row(&self, case: &str, method: Method, decode: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.case == case && r.method == method && r.decode == decode)
    }

    /// CSV with a header line; floats use six decimals.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", REPORT_COLUMNS.join(","))?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{:.6},{:.6},{:.6},{}",
                r.dataset,
                r.case,
                r.method.name(),
                r.decode,
                r.acc_link,
                r.acc_nor,
                r.v_1m,
                r.n_records
            )?;
        }
        Ok(())
    }
}

/// What [`evaluate`] should run.
#[derive(Debug, Clone, Default)]
pub struct EvalPlan {
    pub methods: Vec<Method>,
    pub decodes: Vec<Decode>,
    /// Checkpoint per learned method.
    pub checkpoints: BTreeMap<Method, std::path::PathBuf>,
    pub classical: ClassicalParams,
    /// Overrides the model-derived window settings.
    pub infer: Option<InferSettings>,
}

/// Score every requested method on a labeled dataset file. Rows come per
/// case (ascending) and then for `all`, each in the order of
/// `plan.methods` x `plan.decodes`.
pub fn evaluate(dataset_path: &Path, plan: &EvalPlan) -> Result<EvalReport> {
    let dataset = read_dataset(dataset_path)?;
    let name = dataset_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let seqs = dataset
        .records
        .iter()
        .map(|r| r.sequence())
        .collect::<Result<Vec<_>>>()?;
    let cases: Vec<u8> = dataset.records.iter().map(|r| r.case).collect();
    evaluate_sequences(&name, &seqs, &cases, plan)
}

pub fn evaluate_sequences(name: &str, seqs: &[PulseSequence], cases: &[u8], plan: &EvalPlan) -> Result<EvalReport> {
    if seqs.len() != cases.len() {
        return Err(Error::ShapeMismatch("one case id per sequence required".into()));
    }
    if plan.methods.is_empty() {
        return Err(Error::param("no methods to evaluate"));
    }
    let mut models = BTreeMap::new();
    for m in plan.methods.iter().filter(|m| m.is_learned()) {
        if plan.decodes.is_empty() {
            return Err(Error::param("learned methods need at least one decode"));
        }
        let path = plan
            .checkpoints
            .get(m)
            .ok_or_else(|| Error::param(format!("method `{}` needs a checkpoint", m.name())))?;
        models.insert(*m, load_checkpoint(path)?.0);
    }

    let mut report = EvalReport::default();
    for &method in &plan.methods {
        if let Some(model) = models.get(&method) {
            let settings = plan.infer.unwrap_or_else(|| InferSettings::for_model(model));
            for &d in &plan.decodes {
                let scores = score_model(model, seqs, settings, d)?;
                report.records.insert((method, d.name().to_string()), scores);
            }
        } else {
            let scores = seqs
                .par_iter()
                .map(|s| match method.classical() {
                    Some(c) => score_classical(c, s, &plan.classical),
                    None => {
                        let links = labels_to_assignment(s)?.links()?;
                        score_links(&links, &links, s)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            report.records.insert((method, "none".to_string()), scores);
        }
    }

    let mut distinct: Vec<u8> = cases.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let groups: Vec<(String, Vec<usize>)> = distinct
        .iter()
        .map(|&c| {
            let idx = (0..cases.len()).filter(|&i| cases[i] == c).collect();
            (c.to_string(), idx)
        })
        .chain(std::iter::once(("all".to_string(), (0..cases.len()).collect())))
        .collect();
    for (case, idx) in &groups {
        for &method in &plan.methods {
            let decodes: Vec<String> = if method.is_learned() {
                plan.decodes.iter().map(|d| d.name().to_string()).collect()
            } else {
                vec!["none".to_string()]
            };
            for decode in decodes {
                let all = &report.records[&(method, decode.clone())];
                let picked: Vec<RecordScore> = idx.iter().map(|&i| all[i]).collect();
                let a = Aggregate::of(&picked);
                report.rows.push(ReportRow {
                    dataset: name.to_string(),
                    case: case.clone(),
                    method,
                    decode,
                    acc_link: a.acc_link,
                    acc_nor: a.acc_nor,
                    v_1m: a.v_1m,
                    n_records: a.n_records,
                });
            }
        }
    }
    Ok(report)
}

/// Convenience: evaluate classical-only plans without touching the disk.
pub fn classical_plan(methods: &[Method]) -> EvalPlan {
    EvalPlan {
        methods: methods.to_vec(),
        ..EvalPlan::default()
    }
}
