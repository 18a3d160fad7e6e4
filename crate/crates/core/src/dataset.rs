//! Context datasets in the shared-task TSV layout:
//!
//! ```text
//! context_id  word  gold_sense_id  predict_sense_id  positions  context
//! ```
//!
//! `positions` is a comma-separated list of `start-end` character ranges of
//! the target occurrences inside `context`. The original row fields are kept
//! verbatim so that writing predictions only touches `predict_sense_id`.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::{normalize_word, tokenize};
use crate::vectorizer::is_target_form;

pub const COLUMNS: [&str; 6] = [
    "context_id",
    "word",
    "gold_sense_id",
    "predict_sense_id",
    "positions",
    "context",
];

const ID: usize = 0;
const WORD: usize = 1;
const GOLD: usize = 2;
const PREDICT: usize = 3;
const POSITIONS: usize = 4;
const CONTEXT: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct ContextInstance {
    pub context_id: String,
    /// Normalized (NFC, lowercase) target lemma.
    pub target: String,
    pub gold_sense: Option<String>,
    /// Character offsets `[start, end)` into `raw_context`.
    pub target_spans: Vec<(usize, usize)>,
    pub raw_context: String,
    pub tokens: Vec<String>,
}

impl ContextInstance {
    pub fn new(
        context_id: impl Into<String>,
        target: &str,
        gold_sense: Option<&str>,
        raw_context: impl Into<String>,
    ) -> Self {
        let raw_context = raw_context.into();
        ContextInstance {
            context_id: context_id.into(),
            target: normalize_word(target),
            gold_sense: gold_sense.map(str::to_string),
            target_spans: Vec::new(),
            tokens: tokenize(&raw_context),
            raw_context,
        }
    }
}

/// Context id → sense label.
pub type Labeling = BTreeMap<String, String>;

#[derive(Debug, Clone)]
pub struct Dataset {
    instances: Vec<ContextInstance>,
    by_target: BTreeMap<String, Vec<usize>>,
    header: Vec<String>,
    columns: [usize; 6],
    rows: Vec<Vec<String>>,
    warnings: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from instances constructed in memory.
    pub fn from_instances(instances: Vec<ContextInstance>) -> Result<Self> {
        let rows = instances
            .iter()
            .map(|inst| {
                vec![
                    inst.context_id.clone(),
                    inst.target.clone(),
                    inst.gold_sense.clone().unwrap_or_default(),
                    String::new(),
                    format_positions(&inst.target_spans),
                    inst.raw_context.clone(),
                ]
            })
            .collect();
        Dataset::assemble(
            instances,
            COLUMNS.iter().map(|c| c.to_string()).collect(),
            [0, 1, 2, 3, 4, 5],
            rows,
            Vec::new(),
        )
    }

    fn assemble(
        instances: Vec<ContextInstance>,
        header: Vec<String>,
        columns: [usize; 6],
        rows: Vec<Vec<String>>,
        warnings: Vec<String>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut by_target: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, inst) in instances.iter().enumerate() {
            if !seen.insert(inst.context_id.as_str()) {
                return Err(Error::Input(format!(
                    "duplicate context_id {:?}",
                    inst.context_id
                )));
            }
            by_target.entry(inst.target.clone()).or_default().push(i);
        }
        Ok(Dataset {
            instances,
            by_target,
            header,
            columns,
            rows,
            warnings,
        })
    }

    pub fn instances(&self) -> &[ContextInstance] {
        &self.instances
    }

    pub fn by_target(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.by_target
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Non-fatal problems found while parsing, one line each.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn has_gold(&self) -> bool {
        self.instances.iter().any(|i| i.gold_sense.is_some())
    }

    pub fn gold_labeling(&self) -> Labeling {
        self.instances
            .iter()
            .filter_map(|i| Some((i.context_id.clone(), i.gold_sense.clone()?)))
            .collect()
    }

    /// Prediction column as written in the source file (empty cells omitted).
    pub fn predicted_labeling(&self) -> Labeling {
        self.instances
            .iter()
            .zip(&self.rows)
            .filter_map(|(inst, row)| {
                let label = row[self.columns[PREDICT]].trim();
                (!label.is_empty()).then(|| (inst.context_id.clone(), label.to_string()))
            })
            .collect()
    }
}

/// Reads a context dataset TSV.
pub fn parse_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset_str(&text, path)
}

pub(crate) fn parse_dataset_str(text: &str, path: &Path) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let (_, header_line) = lines
        .next()
        .ok_or_else(|| Error::format(path, 1, "empty file, expected a header row"))?;
    let header: Vec<String> = header_line
        .trim_end_matches('\r')
        .split('\t')
        .map(str::to_string)
        .collect();
    let mut columns = [0; 6];
    for (slot, name) in columns.iter_mut().zip(COLUMNS) {
        *slot = header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::format(path, 1, format!("missing column {name:?}")))?;
    }

    let mut instances = Vec::new();
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(str::to_string).collect();
        if fields.len() != header.len() {
            let missing = columns
                .iter()
                .zip(COLUMNS)
                .find(|(&c, _)| c >= fields.len())
                .map(|(_, name)| format!(", missing column {name:?}"))
                .unwrap_or_default();
            return Err(Error::format(
                path,
                lineno,
                format!(
                    "row {lineno} has {} fields, expected {}{missing}",
                    fields.len(),
                    header.len()
                ),
            ));
        }

        let raw_context = fields[columns[CONTEXT]].clone();
        let context_chars = raw_context.chars().count();
        let target = normalize_word(fields[columns[WORD]].trim());
        let spans = parse_positions(&fields[columns[POSITIONS]])
            .map_err(|msg| Error::format(path, lineno, msg))?;
        let mut target_spans = Vec::with_capacity(spans.len());
        for (start, end) in spans {
            if end > context_chars {
                warnings.push(format!(
                    "{}:{lineno}: span {start}-{end} exceeds context length {context_chars}, dropped",
                    path.display()
                ));
                continue;
            }
            let surface: String = raw_context.chars().skip(start).take(end - start).collect();
            let matches = tokenize(&surface)
                .iter()
                .any(|tok| is_target_form(tok, &target));
            if !matches {
                warnings.push(format!(
                    "{}:{lineno}: span {start}-{end} ({surface:?}) does not look like target {target:?}",
                    path.display()
                ));
            }
            target_spans.push((start, end));
        }

        let gold = fields[columns[GOLD]].trim();
        instances.push(ContextInstance {
            context_id: fields[columns[ID]].clone(),
            target,
            gold_sense: (!gold.is_empty()).then(|| gold.to_string()),
            target_spans,
            tokens: tokenize(&raw_context),
            raw_context,
        });
        rows.push(fields);
    }

    Dataset::assemble(instances, header, columns, rows, warnings).map_err(|e| match e {
        Error::Input(msg) => Error::format(path, 0, msg),
        other => other,
    })
}

fn parse_positions(field: &str) -> std::result::Result<Vec<(usize, usize)>, String> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field
        .split(',')
        .map(|range| {
            let range = range.trim();
            let parsed = range
                .split_once('-')
                .and_then(|(s, e)| Some((s.trim().parse().ok()?, e.trim().parse().ok()?)));
            match parsed {
                Some((start, end)) if start < end => Ok((start, end)),
                _ => Err(format!(
                    "malformed positions {range:?}, expected start-end with start < end"
                )),
            }
        })
        .collect()
}

fn format_positions(spans: &[(usize, usize)]) -> String {
    spans
        .iter()
        .map(|(s, e)| format!("{s}-{e}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Writes `dataset` back out with `predict_sense_id` taken from `labels`.
/// Row order and all other fields are preserved.
pub fn write_predictions(dataset: &Dataset, labels: &Labeling, out: &Path) -> Result<()> {
    let file = File::create(out).map_err(|e| Error::io(out, e))?;
    let mut w = BufWriter::new(file);
    write_predictions_to(dataset, labels, &mut w).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(out, source),
        other => other,
    })?;
    w.flush().map_err(|e| Error::io(out, e))
}

pub fn write_predictions_to<W: Write>(
    dataset: &Dataset,
    labels: &Labeling,
    mut w: W,
) -> Result<()> {
    let missing: Vec<&str> = dataset
        .instances
        .iter()
        .filter(|i| !labels.contains_key(&i.context_id))
        .map(|i| i.context_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Input(format!(
            "no predicted label for context_id {}",
            missing.join(", ")
        )));
    }
    let io = |e| Error::io("<predictions>", e);
    writeln!(w, "{}", dataset.header.join("\t")).map_err(io)?;
    let predict = dataset.columns[PREDICT];
    for (inst, row) in dataset.instances.iter().zip(&dataset.rows) {
        let label = &labels[&inst.context_id];
        let fields: Vec<&str> = row
            .iter()
            .enumerate()
            .map(|(c, f)| {
                if c == predict {
                    label.as_str()
                } else {
                    f.as_str()
                }
            })
            .collect();
        writeln!(w, "{}", fields.join("\t")).map_err(io)?;
    }
    Ok(())
}
