//! Line-delimited JSON dataset format, schema validation and split
//! statistics.
//!
//! One instance per line:
//!
//! ```text
//! {"id": "...", "image_id": "...", "image_width": 800, "image_height": 800,
//!  "expression": "...", "entities": [{"role": "subject", "bbox": [x1, y1, x2, y2]}, ...],
//!  "cot": null, "split": "train"}
//! ```
//!
//! `id` is optional; without it an instance is named `{image_id}#{k}`, where
//! `k` counts earlier accepted instances of the same image. Unknown fields are
//! kept and written back out.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{BoundingBox, Entity, EntityRole, GroundingInstance, InstanceFields, Split};
use crate::error::{DataError, DomainError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ErrorCode {
    MissingSubject,
    MultipleSubjects,
    NoObjects,
    BoxOutOfBounds,
    DegenerateBox,
    BadCotTags,
    MalformedRecord,
    DuplicateId,
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationIssue {
    /// 1-based line number in the source file.
    pub line: usize,
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub accepted: usize,
    pub rejected: usize,
    pub errors: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn total(&self) -> usize {
        self.accepted + self.rejected
    }

    pub fn codes(&self) -> Vec<ErrorCode> {
        self.errors.iter().map(|e| e.code).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "records: {}", self.total())?;
        writeln!(f, "accepted: {}", self.accepted)?;
        write!(f, "rejected: {}", self.rejected)?;
        for e in &self.errors {
            write!(f, "\nline {}: {}: {}", e.line, e.code, e.message)?;
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EntityRecord {
    role: EntityRole,
    bbox: [f64; 4],
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    image_id: String,
    image_width: u32,
    image_height: u32,
    expression: String,
    entities: Vec<EntityRecord>,
    cot: Option<String>,
    split: Split,
    #[serde(flatten)]
    extra: BTreeMap<String, serde_json::Value>,
}

/// True iff the text is exactly one balanced `<think>...</think>` block with
/// non-blank content.
pub fn validate_cot(cot_text: &str) -> bool {
    let t = cot_text.trim();
    let Some(inner) = t.strip_prefix("<think>").and_then(|r| r.strip_suffix("</think>")) else {
        return false;
    };
    !inner.trim().is_empty() && !inner.contains("<think>") && !inner.contains("</think>")
}

fn issue(line: usize, code: ErrorCode, message: impl Into<String>) -> ValidationIssue {
    ValidationIssue {
        line,
        code,
        message: message.into(),
    }
}

fn check_record(record: &InstanceRecord, line: usize) -> Result<Vec<Entity>, ValidationIssue> {
    if record.image_width == 0 || record.image_height == 0 {
        return Err(issue(line, ErrorCode::MalformedRecord, "image dimensions must be positive"));
    }
    let (w, h) = (record.image_width as f64, record.image_height as f64);
    let mut entities = Vec::with_capacity(record.entities.len());
    for (i, e) in record.entities.iter().enumerate() {
        let [x1, y1, x2, y2] = e.bbox;
        if x1 >= x2 || y1 >= y2 {
            return Err(issue(
                line,
                ErrorCode::DegenerateBox,
                format!("entity {i} box {:?} has no area", e.bbox),
            ));
        }
        if x1 < 0.0 || y1 < 0.0 || x2 > w || y2 > h {
            return Err(issue(
                line,
                ErrorCode::BoxOutOfBounds,
                format!("entity {i} box {:?} exceeds {}x{}", e.bbox, record.image_width, record.image_height),
            ));
        }
        let bbox = BoundingBox::new(x1, y1, x2, y2)
            .map_err(|err| issue(line, ErrorCode::MalformedRecord, err.to_string()))?;
        entities.push(Entity::new(e.role, bbox));
    }

    let subjects = entities.iter().filter(|e| e.role == EntityRole::Subject).count();
    if subjects == 0 {
        return Err(issue(line, ErrorCode::MissingSubject, "no subject entity"));
    }
    if subjects > 1 {
        return Err(issue(
            line,
            ErrorCode::MultipleSubjects,
            format!("{subjects} subject entities"),
        ));
    }
    if !entities.iter().any(|e| e.role == EntityRole::Object) {
        return Err(issue(line, ErrorCode::NoObjects, "no object entities"));
    }
    if let Some(cot) = &record.cot {
        if !validate_cot(cot) {
            return Err(issue(
                line,
                ErrorCode::BadCotTags,
                "cot must be exactly one non-empty <think>...</think> block",
            ));
        }
    }
    Ok(entities)
}

fn code_for(err: &DomainError) -> ErrorCode {
    match err {
        DomainError::MissingSubject => ErrorCode::MissingSubject,
        DomainError::MultipleSubjects(_) => ErrorCode::MultipleSubjects,
        DomainError::NoObjects => ErrorCode::NoObjects,
        DomainError::BoxOutOfBounds { .. } | DomainError::NegativeCoordinate => {
            ErrorCode::BoxOutOfBounds
        }
        DomainError::DegenerateBox { .. } => ErrorCode::DegenerateBox,
        _ => ErrorCode::MalformedRecord,
    }
}

/// Parses and validates every non-blank line. Invalid records are reported
/// and skipped; only I/O failures are fatal.
pub fn read_dataset<R: BufRead>(
    reader: R,
) -> Result<(Vec<GroundingInstance>, ValidationReport), DataError> {
    let mut instances = Vec::new();
    let mut report = ValidationReport::default();
    let mut ids = HashSet::new();
    let mut per_image: HashMap<String, usize> = HashMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let outcome = serde_json::from_str::<InstanceRecord>(&line)
            .map_err(|e| issue(lineno, ErrorCode::MalformedRecord, e.to_string()))
            .and_then(|record| {
                let entities = check_record(&record, lineno)?;
                let seen = per_image.get(&record.image_id).copied().unwrap_or(0);
                let id = record
                    .id
                    .clone()
                    .unwrap_or_else(|| format!("{}#{}", record.image_id, seen));
                if ids.contains(&id) {
                    return Err(issue(lineno, ErrorCode::DuplicateId, format!("id {id:?} already used")));
                }
                let inst = GroundingInstance::new(InstanceFields {
                    id,
                    image_id: record.image_id,
                    image_width: record.image_width,
                    image_height: record.image_height,
                    expression: record.expression,
                    entities,
                    cot: record.cot,
                    split: record.split,
                })
                .map_err(|e| issue(lineno, code_for(&e), e.to_string()))?;
                Ok(inst.with_extra(record.extra))
            });
        match outcome {
            Ok(inst) => {
                *per_image.entry(inst.image_id().to_string()).or_default() += 1;
                ids.insert(inst.id().to_string());
                instances.push(inst);
                report.accepted += 1;
            }
            Err(e) => {
                report.rejected += 1;
                report.errors.push(e);
            }
        }
    }
    Ok((instances, report))
}

pub fn load_dataset(
    path: impl AsRef<Path>,
) -> Result<(Vec<GroundingInstance>, ValidationReport), DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    read_dataset(BufReader::new(file))
}

fn to_record(inst: &GroundingInstance) -> InstanceRecord {
    InstanceRecord {
        id: Some(inst.id().to_string()),
        image_id: inst.image_id().to_string(),
        image_width: inst.image_width(),
        image_height: inst.image_height(),
        expression: inst.expression().to_string(),
        entities: inst
            .entities()
            .iter()
            .map(|e| EntityRecord {
                role: e.role,
                bbox: e.bbox.corners(),
            })
            .collect(),
        cot: inst.cot().map(String::from),
        split: inst.split(),
        extra: inst.extra().clone(),
    }
}

pub fn instance_to_json(inst: &GroundingInstance) -> String {
    serde_json::to_string(&to_record(inst)).expect("instance records always serialize")
}

pub fn write_dataset<W: Write>(instances: &[GroundingInstance], mut out: W) -> std::io::Result<()> {
    for inst in instances {
        writeln!(out, "{}", instance_to_json(inst))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct StatsReport {
    pub total_images: usize,
    pub total_instances: usize,
    pub train_instances: usize,
    pub test_instances: usize,
    pub train_images: usize,
    pub test_images: usize,
    /// Training instances carrying a reasoning trace.
    pub cot_annotated: usize,
    /// Number of objects -> number of instances.
    pub objects_per_instance: BTreeMap<usize, usize>,
}

pub fn dataset_stats(instances: &[GroundingInstance]) -> StatsReport {
    let mut images = HashSet::new();
    let mut train_images = HashSet::new();
    let mut test_images = HashSet::new();
    let mut stats = StatsReport::default();
    for inst in instances {
        images.insert(inst.image_id());
        stats.total_instances += 1;
        match inst.split() {
            Split::Train => {
                stats.train_instances += 1;
                train_images.insert(inst.image_id());
                if inst.cot().is_some() {
                    stats.cot_annotated += 1;
                }
            }
            Split::Test => {
                stats.test_instances += 1;
                test_images.insert(inst.image_id());
            }
        }
        *stats.objects_per_instance.entry(inst.objects().len()).or_default() += 1;
    }
    stats.total_images = images.len();
    stats.train_images = train_images.len();
    stats.test_images = test_images.len();
    stats
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "total_images: {}", self.total_images)?;
        writeln!(f, "total_instances: {}", self.total_instances)?;
        writeln!(f, "train_instances: {} ({} images)", self.train_instances, self.train_images)?;
        writeln!(f, "test_instances: {} ({} images)", self.test_instances, self.test_images)?;
        write!(f, "cot_annotated: {}", self.cot_annotated)?;
        for (objects, count) in &self.objects_per_instance {
            write!(f, "\nobjects_per_instance[{objects}]: {count}")?;
        }
        Ok(())
    }
}

/// One `(instance_id, completion)` pair from a completions or predictions
/// file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub instance_id: String,
    pub completion: String,
}

/// `(line number, message)` for a skipped line.
pub type LineWarning = (usize, String);

/// Reads a line-delimited completions file. Unparseable lines are returned
/// as `(line number, message)` warnings.
pub fn read_completions<R: BufRead>(
    reader: R,
) -> Result<(Vec<CompletionRecord>, Vec<LineWarning>), DataError> {
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<CompletionRecord>(&line) {
            Ok(r) => records.push(r),
            Err(e) => warnings.push((idx + 1, e.to_string())),
        }
    }
    Ok((records, warnings))
}

pub fn load_completions(
    path: impl AsRef<Path>,
) -> Result<(Vec<CompletionRecord>, Vec<LineWarning>), DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    read_completions(BufReader::new(file))
}
