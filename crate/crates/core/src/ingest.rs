//! Parsers for FreeSurfer-style volume tables, demographics and the dataset
//! interchange CSV, plus cohort assembly.
//!
//! Feature columns of an assembled cohort are the lexicographically sorted
//! union of region names, followed by `age` and `sex` (F = 0, M = 1) when
//! requested.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dataset::{DatasetError, Label, LabeledDataset, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("no data rows")]
    EmptyInput,
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("duplicate region `{0}`")]
    DuplicateRegion(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: invalid value `{value}`")]
    BadEnum { row: usize, value: String },
    #[error("row {row}: age must lie in (0, 120)")]
    BadAge { row: usize },
    #[error("row {row}: quoted fields are not supported")]
    QuotedField { row: usize },
    #[error("duplicate subject `{0}`")]
    DuplicateSubject(String),
    #[error("no subject was admitted to the cohort")]
    EmptyCohort,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Region name → volume (mm³) for one subject, ordered by region name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegionVolumeTable {
    pub subject_id: String,
    pub volumes: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    Whitespace,
    Comma,
}

/// Column layout of a volume table. Column numbers are 1-indexed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatDescriptor {
    pub delimiter: Delimiter,
    pub name_column: usize,
    pub volume_column: usize,
    /// Skip the first non-comment line (a header row).
    pub has_header: bool,
}

impl FormatDescriptor {
    /// FreeSurfer `aseg.stats`: `Index SegId NVoxels Volume_mm3 StructName ...`.
    pub fn aseg() -> Self {
        Self { delimiter: Delimiter::Whitespace, name_column: 5, volume_column: 4, has_header: false }
    }

    /// Pre-flattened `structure,volume` CSV with a header row.
    pub fn csv() -> Self {
        Self { delimiter: Delimiter::Comma, name_column: 1, volume_column: 2, has_header: true }
    }
}

impl Default for FormatDescriptor {
    fn default() -> Self {
        Self::aseg()
    }
}

/// Parses a stats table with the aseg layout. The subject id is taken from a
/// `# subjectname <id>` header line when present.
pub fn parse_volume_stats(text: &str) -> Result<RegionVolumeTable, IngestError> {
    parse_volume_stats_with(text, &FormatDescriptor::aseg())
}

pub fn parse_volume_stats_with(
    text: &str,
    format: &FormatDescriptor,
) -> Result<RegionVolumeTable, IngestError> {
    let mut table = RegionVolumeTable::default();
    let mut header_pending = format.has_header;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let mut words = comment.split_whitespace();
            if words.next() == Some("subjectname") {
                if let Some(id) = words.next() {
                    table.subject_id = id.to_string();
                }
            }
            continue;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        let fields: Vec<&str> = match format.delimiter {
            Delimiter::Whitespace => line.split_whitespace().collect(),
            Delimiter::Comma => line.split(',').map(str::trim).collect(),
        };
        let malformed = |reason: String| IngestError::MalformedRow { line: line_no, reason };
        let name = fields
            .get(format.name_column.wrapping_sub(1))
            .ok_or_else(|| malformed(format!("no field {}", format.name_column)))?;
        let vol_text = fields
            .get(format.volume_column.wrapping_sub(1))
            .ok_or_else(|| malformed(format!("no field {}", format.volume_column)))?;
        let volume: f64 = vol_text
            .parse()
            .map_err(|_| malformed(format!("volume `{vol_text}` is not a number")))?;
        if !volume.is_finite() || volume < 0.0 {
            return Err(malformed(format!("volume `{vol_text}` must be finite and non-negative")));
        }
        if name.is_empty() {
            return Err(malformed("empty structure name".into()));
        }
        if table.volumes.insert(name.to_string(), volume).is_some() {
            return Err(IngestError::DuplicateRegion(name.to_string()));
        }
    }
    if table.volumes.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sex {
    F,
    M,
}

impl Sex {
    /// F → 0, M → 1.
    pub fn code(self) -> f64 {
        match self {
            Sex::F => 0.0,
            Sex::M => 1.0,
        }
    }
}

impl FromStr for Sex {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "F" => Ok(Sex::F),
            "M" => Ok(Sex::M),
            other => Err(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemographicRecord {
    pub subject_id: String,
    pub age: f64,
    pub sex: Sex,
    pub label: Label,
}

fn split_csv_row(line: &str, row: usize) -> Result<Vec<&str>, IngestError> {
    if line.contains('"') {
        return Err(IngestError::QuotedField { row });
    }
    Ok(line.split(',').map(str::trim).collect())
}

/// Parses a `subject_id,age,sex,label` CSV (any column order, extra columns
/// ignored). Rows are numbered from 1, the header being row 0.
pub fn parse_demographics(text: &str) -> Result<Vec<DemographicRecord>, IngestError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(IngestError::EmptyInput)?;
    let header = split_csv_row(header.trim_start_matches('\u{feff}'), 0)?;
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let (c_id, c_age, c_sex, c_label) = (col("subject_id")?, col("age")?, col("sex")?, col("label")?);

    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (row, (_, line)) in lines.enumerate().map(|(r, l)| (r + 1, l)) {
        let fields = split_csv_row(line, row)?;
        let field = |c: usize| fields.get(c).copied().unwrap_or("");
        let bad = |value: &str| IngestError::BadEnum { row, value: value.to_string() };

        let subject_id = field(c_id).to_string();
        if subject_id.is_empty() {
            return Err(bad(""));
        }
        let age: f64 = field(c_age).parse().map_err(|_| IngestError::BadAge { row })?;
        if !(age > 0.0 && age < 120.0) {
            return Err(IngestError::BadAge { row });
        }
        let sex = field(c_sex).parse::<Sex>().map_err(|_| bad(field(c_sex)))?;
        let label = field(c_label).parse::<Label>().map_err(|_| bad(field(c_label)))?;
        if !seen.insert(subject_id.clone()) {
            return Err(IngestError::DuplicateSubject(subject_id));
        }
        out.push(DemographicRecord { subject_id, age, sex, label });
    }
    if out.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExclusionReason {
    HardFailure,
    SoftFailure,
    MissingLabel,
    MissingVolumes,
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExclusionReason::HardFailure => "HardFailure",
            ExclusionReason::SoftFailure => "SoftFailure",
            ExclusionReason::MissingLabel => "MissingLabel",
            ExclusionReason::MissingVolumes => "MissingVolumes",
        })
    }
}

/// Which subjects made it into the cohort and why the rest did not.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CohortManifest {
    pub admitted: Vec<String>,
    pub excluded: Vec<(String, ExclusionReason)>,
}

impl CohortManifest {
    /// `subject_id,status,reason` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("subject_id,status,reason\n");
        for id in &self.admitted {
            out.push_str(&format!("{id},admitted,\n"));
        }
        for (id, reason) in &self.excluded {
            out.push_str(&format!("{id},excluded,{reason}\n"));
        }
        out
    }
}

/// Inputs to cohort assembly besides the parsed tables.
#[derive(Debug, Clone, Default)]
pub struct CohortOptions {
    pub include_age_sex: bool,
    /// Subjects whose stats could not be parsed at all.
    pub hard_failures: Vec<String>,
    /// Operator-supplied exclusion list (degraded segmentations).
    pub soft_failures: BTreeSet<String>,
}

pub fn assemble_cohort(
    tables: &[RegionVolumeTable],
    demo: &[DemographicRecord],
    include_age_sex: bool,
) -> Result<(LabeledDataset, CohortManifest), IngestError> {
    assemble_cohort_with(tables, demo, &CohortOptions { include_age_sex, ..Default::default() })
}

/// Joins volume tables with demographics. Rows are ordered by subject id, so
/// the result does not depend on input order.
pub fn assemble_cohort_with(
    tables: &[RegionVolumeTable],
    demo: &[DemographicRecord],
    opts: &CohortOptions,
) -> Result<(LabeledDataset, CohortManifest), IngestError> {
    let mut by_subject: BTreeMap<&str, &RegionVolumeTable> = BTreeMap::new();
    for t in tables {
        if by_subject.insert(t.subject_id.as_str(), t).is_some() {
            return Err(IngestError::DuplicateSubject(t.subject_id.clone()));
        }
    }
    let demo_by_id: HashMap<&str, &DemographicRecord> =
        demo.iter().map(|d| (d.subject_id.as_str(), d)).collect();
    let hard: BTreeSet<&str> = opts.hard_failures.iter().map(String::as_str).collect();

    let mut all_ids: BTreeSet<&str> = by_subject.keys().copied().collect();
    all_ids.extend(demo_by_id.keys().copied());
    all_ids.extend(hard.iter().copied());

    let mut excluded = BTreeMap::new();
    let mut candidates = Vec::new();
    for id in all_ids {
        let reason = if hard.contains(id) {
            Some(ExclusionReason::HardFailure)
        } else if opts.soft_failures.contains(id) {
            Some(ExclusionReason::SoftFailure)
        } else if !by_subject.contains_key(id) {
            Some(ExclusionReason::MissingVolumes)
        } else if !demo_by_id.contains_key(id) {
            Some(ExclusionReason::MissingLabel)
        } else {
            None
        };
        match reason {
            Some(r) => {
                excluded.insert(id, r);
            }
            None => candidates.push(id),
        }
    }

    let regions: BTreeSet<&str> = candidates
        .iter()
        .flat_map(|id| by_subject[id].volumes.keys().map(String::as_str))
        .collect();
    let mut admitted = Vec::new();
    for id in candidates {
        if by_subject[id].volumes.len() == regions.len() {
            admitted.push(id);
        } else {
            excluded.insert(id, ExclusionReason::MissingVolumes);
        }
    }
    if admitted.is_empty() {
        return Err(IngestError::EmptyCohort);
    }

    let mut feature_names: Vec<String> = regions.iter().map(|r| r.to_string()).collect();
    if opts.include_age_sex {
        feature_names.push("age".into());
        feature_names.push("sex".into());
    }
    let mut rows = Vec::with_capacity(admitted.len());
    let mut labels = Vec::with_capacity(admitted.len());
    for id in &admitted {
        let d = demo_by_id[id];
        let mut row: Vec<f64> = by_subject[id].volumes.values().copied().collect();
        if opts.include_age_sex {
            row.push(d.age);
            row.push(d.sex.code());
        }
        rows.push(row);
        labels.push(d.label);
    }
    let ids: Vec<String> = admitted.iter().map(|s| s.to_string()).collect();
    let features = Matrix::new(
        rows.len(),
        feature_names.len(),
        rows.into_iter().flatten().collect(),
    )?;
    let ds = LabeledDataset::new(features, labels, feature_names, ids.clone())?;
    let manifest = CohortManifest {
        admitted: ids,
        excluded: excluded.into_iter().map(|(id, r)| (id.to_string(), r)).collect(),
    };
    Ok((ds, manifest))
}

/// Reads the dataset interchange CSV written by [`LabeledDataset::to_csv`].
/// Line numbers in errors are 1-indexed.
pub fn read_dataset_csv(text: &str) -> Result<LabeledDataset, IngestError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or(IngestError::EmptyInput)?;
    let header = split_csv_row(header.trim_start_matches('\u{feff}'), 0)?;
    if header.len() < 2 || header[0] != "subject_id" || header[1] != "label" {
        return Err(IngestError::MalformedRow {
            line: hline,
            reason: "header must start with subject_id,label".into(),
        });
    }
    let feature_names: Vec<String> = header[2..].iter().map(|s| s.to_string()).collect();
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (line_no, line) in lines {
        let fields = split_csv_row(line, line_no)?;
        let malformed = |reason: String| IngestError::MalformedRow { line: line_no, reason };
        if fields.len() != header.len() {
            return Err(malformed(format!("{} fields, expected {}", fields.len(), header.len())));
        }
        ids.push(fields[0].to_string());
        labels.push(
            fields[1]
                .parse::<Label>()
                .map_err(|v| malformed(format!("label `{v}` is not PD or HC")))?,
        );
        for f in &fields[2..] {
            let v: f64 = f.parse().map_err(|_| malformed(format!("`{f}` is not a number")))?;
            if !v.is_finite() {
                return Err(malformed(format!("`{f}` is not finite")));
            }
            data.push(v);
        }
    }
    if ids.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let features = Matrix::new(ids.len(), feature_names.len(), data)?;
    Ok(LabeledDataset::new(features, labels, feature_names, ids)?)
}

/// One subject id per line; `#` starts a comment.
pub fn parse_exclusion_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}
