//! Record files, experiment configs and CSV exports.
//!
//! Every JSON file carries a `schemaVersion`. The layouts are described in
//! `docs/schema.md`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use trustgame_core::inference::{ConfusionMatrix, FitResult, IngestReport, RawRow, Rejection};
use trustgame_core::simulator::{GameRecord, TrajectoryStats, RECORD_SCHEMA_VERSION};
use trustgame_core::{AgentSpec, Role};

use crate::parallel::ConvergenceReport;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: malformed JSON: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {kind} schema version {found} is not supported (this build reads version {expected}); {hint}")]
    SchemaMismatch {
        path: PathBuf,
        kind: &'static str,
        found: String,
        expected: u32,
        hint: String,
    },
    #[error("{path}: {source}")]
    Invalid {
        path: PathBuf,
        source: trustgame_core::Error,
    },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
}

pub type IoResult<T> = Result<T, IoError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to `path` through a temporary sibling so that readers
/// never observe a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> IoResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serialises");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> IoResult<()> {
    write_atomic(path, to_json(value).as_bytes())
}

fn migration_hint(kind: &str, found: &serde_json::Value) -> String {
    match found {
        serde_json::Value::Null => format!(
            "files without schemaVersion predate versioning; check the fields against the {kind} layout in docs/schema.md and add \"schemaVersion\": {RECORD_SCHEMA_VERSION}"
        ),
        v if v.as_u64().is_some_and(|n| n > RECORD_SCHEMA_VERSION as u64) => {
            "the file was written by a newer build; upgrade this tool to read it".to_string()
        }
        _ => format!("regenerate the {kind} with this build or convert it to version {RECORD_SCHEMA_VERSION} (see docs/schema.md)"),
    }
}

/// Parses a versioned JSON document, checking `schemaVersion` before the
/// body so that old files get a migration hint instead of a field error.
fn parse_versioned<T: DeserializeOwned>(path: &Path, text: &str, kind: &'static str, expected: u32) -> IoResult<T> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| IoError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let found = value.get("schemaVersion").cloned().unwrap_or(serde_json::Value::Null);
    if found.as_u64() != Some(expected as u64) {
        return Err(IoError::SchemaMismatch {
            path: path.to_path_buf(),
            kind,
            found: if found.is_null() { "(missing)".to_string() } else { found.to_string() },
            expected,
            hint: migration_hint(kind, &found),
        });
    }
    serde_json::from_value(value).map_err(|e| IoError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn read_text(path: &Path) -> IoResult<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn invalid(path: &Path) -> impl FnOnce(trustgame_core::Error) -> IoError + '_ {
    move |source| IoError::Invalid {
        path: path.to_path_buf(),
        source,
    }
}

pub fn save_record(path: &Path, record: &GameRecord) -> IoResult<()> {
    record.validate().map_err(invalid(path))?;
    write_json(path, record)
}

pub fn record_from_str(path: &Path, text: &str) -> IoResult<GameRecord> {
    let r: GameRecord = parse_versioned(path, text, "record", RECORD_SCHEMA_VERSION)?;
    r.validate().map_err(invalid(path))?;
    Ok(r)
}

pub fn load_record(path: &Path) -> IoResult<GameRecord> {
    record_from_str(path, &read_text(path)?)
}

/// Many records in one file, e.g. the output of a batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RecordSet {
    pub schema_version: u32,
    pub records: Vec<GameRecord>,
}

impl RecordSet {
    pub fn new(records: Vec<GameRecord>) -> Self {
        RecordSet {
            schema_version: RECORD_SCHEMA_VERSION,
            records,
        }
    }

    /// Records grouped by (investor spec, trustee spec) in order of first
    /// appearance. Records without specs form one "observed" group.
    pub fn pairings(&self) -> Vec<(String, Vec<GameRecord>)> {
        let mut groups: Vec<(String, Vec<GameRecord>)> = Vec::new();
        for r in &self.records {
            let label = pairing_label(r.investor_spec.as_ref(), r.trustee_spec.as_ref());
            match groups.iter_mut().find(|(l, _)| *l == label) {
                Some((_, g)) => g.push(r.clone()),
                None => groups.push((label, vec![r.clone()])),
            }
        }
        groups
    }
}

pub fn pairing_label(investor: Option<&AgentSpec>, trustee: Option<&AgentSpec>) -> String {
    match (investor, trustee) {
        (Some(i), Some(t)) => format!("{i} vs {t}"),
        _ => "observed".to_string(),
    }
}

pub fn save_records(path: &Path, records: &[GameRecord]) -> IoResult<()> {
    for r in records {
        r.validate().map_err(invalid(path))?;
    }
    write_json(path, &RecordSet::new(records.to_vec()))
}

/// Loads either a record set or a single record.
pub fn load_records(path: &Path) -> IoResult<Vec<GameRecord>> {
    let text = read_text(path)?;
    let is_set = serde_json::from_str::<serde_json::Value>(&text)
        .map(|v| v.get("records").is_some())
        .unwrap_or(false);
    if !is_set {
        return Ok(vec![record_from_str(path, &text)?]);
    }
    let set: RecordSet = parse_versioned(path, &text, "record set", RECORD_SCHEMA_VERSION)?;
    for r in &set.records {
        r.validate().map_err(invalid(path))?;
    }
    Ok(set.records)
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish_csv(path: &Path, w: csv::Writer<Vec<u8>>) -> IoResult<()> {
    let bytes = w.into_inner().map_err(|e| IoError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    write_atomic(path, &bytes)
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |e| IoError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Per-round action statistics: `pairing,round,role,mean,std,n`, rounds
/// numbered from 1, investor row before trustee row.
pub fn trajectories_csv(stats: &[(String, TrajectoryStats)]) -> Vec<u8> {
    let mut w = csv_writer();
    w.write_record(["pairing", "round", "role", "mean", "std", "n"]).expect("in-memory write");
    for (label, s) in stats {
        for (r, (inv, ret)) in s.investment.iter().zip(&s.repayment).enumerate() {
            for (role, m) in [(Role::Investor, inv), (Role::Trustee, ret)] {
                w.write_record([
                    label.as_str(),
                    &(r + 1).to_string(),
                    role.as_str(),
                    &m.mean.to_string(),
                    &m.std.to_string(),
                    &m.n.to_string(),
                ])
                .expect("in-memory write");
            }
        }
    }
    w.into_inner().expect("in-memory flush")
}

pub fn export_trajectories(path: &Path, stats: &[(String, TrajectoryStats)]) -> IoResult<()> {
    write_atomic(path, &trajectories_csv(stats))
}

/// Mean predictive beliefs: `pairing,round,role,greedy,pragmatic,guilty`,
/// where `role` holds the belief and `round` indexes the trace (0 = prior).
pub fn export_posteriors(path: &Path, stats: &[(String, TrajectoryStats)]) -> IoResult<()> {
    let mut w = csv_writer();
    w.write_record(["pairing", "round", "role", "greedy", "pragmatic", "guilty"])
        .map_err(csv_err(path))?;
    for (label, s) in stats {
        for (role, trace) in [(Role::Investor, &s.investor_posterior), (Role::Trustee, &s.trustee_posterior)] {
            for (r, p) in trace.iter().enumerate() {
                w.write_record([
                    label.as_str(),
                    &r.to_string(),
                    role.as_str(),
                    &p[0].to_string(),
                    &p[1].to_string(),
                    &p[2].to_string(),
                ])
                .map_err(csv_err(path))?;
            }
        }
    }
    finish_csv(path, w)
}

/// Total gains per record: `pairing,index,seed,investor,trustee,combined`.
pub fn export_gains(path: &Path, groups: &[(String, Vec<GameRecord>)]) -> IoResult<()> {
    let mut w = csv_writer();
    w.write_record(["pairing", "index", "seed", "investor", "trustee", "combined"])
        .map_err(csv_err(path))?;
    for (label, records) in groups {
        for (i, r) in records.iter().enumerate() {
            let g = trustgame_core::simulator::total_gains(r);
            w.write_record([
                label.clone(),
                i.to_string(),
                r.seed.map(|s| s.to_string()).unwrap_or_default(),
                g.investor.to_string(),
                g.trustee.to_string(),
                g.combined.to_string(),
            ])
            .map_err(csv_err(path))?;
        }
    }
    finish_csv(path, w)
}

pub const FIT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FitReport {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dyad_id: Option<String>,
    /// Uniform-policy NLL of each role's decisions in the record.
    pub baseline: RoleBaselines,
    pub fit: FitResult,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoleBaselines {
    pub investor: f64,
    pub trustee: f64,
}

impl FitReport {
    pub fn new(record: &GameRecord, fit: FitResult) -> Self {
        use trustgame_core::inference::uniform_nll;
        FitReport {
            schema_version: FIT_SCHEMA_VERSION,
            dyad_id: record.dyad_id.clone(),
            baseline: RoleBaselines {
                investor: uniform_nll(record, Role::Investor),
                trustee: uniform_nll(record, Role::Trustee),
            },
            fit,
        }
    }
}

pub fn load_fit_report(path: &Path) -> IoResult<FitReport> {
    parse_versioned(path, &read_text(path)?, "fit report", FIT_SCHEMA_VERSION)
}

/// Fit reports of several records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FitReportSet {
    pub schema_version: u32,
    pub reports: Vec<FitReport>,
}

pub fn save_fit_reports(path: &Path, reports: &[FitReport]) -> IoResult<()> {
    write_json(
        path,
        &FitReportSet {
            schema_version: FIT_SCHEMA_VERSION,
            reports: reports.to_vec(),
        },
    )
}

/// Loads either a report set or a single report.
pub fn load_fit_reports(path: &Path) -> IoResult<Vec<FitReport>> {
    let text = read_text(path)?;
    let is_set = serde_json::from_str::<serde_json::Value>(&text)
        .map(|v| v.get("reports").is_some())
        .unwrap_or(false);
    if is_set {
        let set: FitReportSet = parse_versioned(path, &text, "fit report set", FIT_SCHEMA_VERSION)?;
        Ok(set.reports)
    } else {
        Ok(vec![parse_versioned(path, &text, "fit report", FIT_SCHEMA_VERSION)?])
    }
}

/// Ranked cells of each role: `record,role,rank,cell,nll,clamped,best`.
pub fn export_fit_csv(path: &Path, reports: &[FitReport]) -> IoResult<()> {
    let mut w = csv_writer();
    w.write_record(["record", "role", "rank", "cell", "nll", "clamped", "best"])
        .map_err(csv_err(path))?;
    for (i, rep) in reports.iter().enumerate() {
        let id = rep.dyad_id.clone().unwrap_or_else(|| i.to_string());
        for (role, rf) in [(Role::Investor, &rep.fit.investor), (Role::Trustee, &rep.fit.trustee)] {
            let best: Vec<AgentSpec> = rf.best.iter().map(|&b| rf.cells[b].cell).collect();
            for (rank, c) in rf.ranked() {
                w.write_record([
                    id.clone(),
                    role.as_str().to_string(),
                    rank.to_string(),
                    c.cell.to_string(),
                    c.nll.to_string(),
                    c.clamped.to_string(),
                    best.contains(&c.cell).to_string(),
                ])
                .map_err(csv_err(path))?;
            }
        }
    }
    finish_csv(path, w)
}

/// Long-form confusion matrices: `role,parameter,true,estimated,fraction,n`.
/// One block per (role, parameter), rows in label order.
pub fn export_confusion_csv(path: &Path, matrices: &[ConfusionMatrix]) -> IoResult<()> {
    let mut w = csv_writer();
    w.write_record(["role", "parameter", "true", "estimated", "fraction", "n"])
        .map_err(csv_err(path))?;
    for m in matrices {
        for (i, row) in m.matrix.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                w.write_record([
                    m.role.as_str(),
                    m.parameter.label(),
                    &m.labels[i],
                    &m.labels[j],
                    &v.to_string(),
                    &m.row_counts[i].to_string(),
                ])
                .map_err(csv_err(path))?;
            }
        }
    }
    finish_csv(path, w)
}

/// Mean first-action wall time per budget: `budget,kind,runs,mean_seconds`.
/// The reference run appears with kind `reference`.
pub fn export_runtime_csv(path: &Path, report: &ConvergenceReport) -> IoResult<()> {
    let mut w = csv_writer();
    w.write_record(["budget", "kind", "runs", "mean_seconds"]).map_err(csv_err(path))?;
    for row in &report.rows {
        w.write_record([
            row.budget.to_string(),
            "subject".to_string(),
            row.discrepancy.subjects.to_string(),
            row.mean_seconds.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.write_record([
        report.reference_budget.to_string(),
        "reference".to_string(),
        report.reference_runs.to_string(),
        report.reference_seconds.to_string(),
    ])
    .map_err(csv_err(path))?;
    finish_csv(path, w)
}

/// Discrepancy matrices in long form: `budget,i,j,c`.
pub fn export_discrepancy_csv(path: &Path, report: &ConvergenceReport) -> IoResult<()> {
    let mut w = csv_writer();
    w.write_record(["budget", "i", "j", "c"]).map_err(csv_err(path))?;
    for row in &report.rows {
        for (i, r) in row.discrepancy.c.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                w.write_record([row.budget.to_string(), i.to_string(), j.to_string(), v.to_string()])
                    .map_err(csv_err(path))?;
            }
        }
    }
    finish_csv(path, w)
}

/// Per-budget convergence summary:
/// `budget,rms_deviation,max_abs_deviation,mean_deviation,trace,p0..p4`.
pub fn export_convergence_csv(path: &Path, report: &ConvergenceReport) -> IoResult<()> {
    let mut w = csv_writer();
    w.write_record([
        "budget",
        "rms_deviation",
        "max_abs_deviation",
        "mean_deviation",
        "trace",
        "p0",
        "p1",
        "p2",
        "p3",
        "p4",
    ])
    .map_err(csv_err(path))?;
    let mut row_of = |budget: String, stats: [String; 4], p: &[f64; 5]| {
        let mut rec = vec![budget];
        rec.extend(stats);
        rec.extend(p.iter().map(|v| v.to_string()));
        w.write_record(rec)
    };
    for row in &report.rows {
        row_of(
            row.budget.to_string(),
            [
                row.discrepancy.rms_deviation().to_string(),
                row.discrepancy.max_abs_deviation.to_string(),
                row.mean_deviation.to_string(),
                row.discrepancy.trace().to_string(),
            ],
            &row.mean_policy,
        )
        .map_err(csv_err(path))?;
    }
    row_of(
        report.reference_budget.to_string(),
        Default::default(),
        &report.reference,
    )
    .map_err(csv_err(path))?;
    finish_csv(path, w)
}

/// Reads `dyadId,round,investedAmount,returnedAmount` rows and categorises
/// them. Rows that do not parse are rejected individually; the rest go
/// through [`trustgame_core::inference::ingest_observed`].
pub fn ingest_csv(path: &Path) -> IoResult<IngestReport> {
    let text = read_text(path)?;
    ingest_csv_str(path, &text)
}

pub fn ingest_csv_str(path: &Path, text: &str) -> IoResult<IngestReport> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rd.headers().map_err(csv_err(path))?.clone();
    for col in ["dyadId", "round", "investedAmount", "returnedAmount"] {
        if !headers.iter().any(|h| h == col) {
            return Err(IoError::Csv {
                path: path.to_path_buf(),
                message: format!("missing column {col}"),
            });
        }
    }
    let mut rows = Vec::new();
    let mut rejected = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        match rec.deserialize::<RawRow>(Some(&headers)) {
            Ok(r) => rows.push(r),
            Err(e) => rejected.push(Rejection {
                dyad_id: rec.get(headers.iter().position(|h| h == "dyadId").unwrap_or(0)).unwrap_or("").to_string(),
                round: None,
                reason: format!("line {}: {e}", line + 2),
            }),
        }
    }
    // a dyad with an unparsable row cannot be complete
    let bad: Vec<String> = rejected.iter().map(|r| r.dyad_id.clone()).collect();
    rows.retain(|r| !bad.contains(&r.dyad_id));
    let mut report = trustgame_core::inference::ingest_observed(&rows);
    rejected.extend(report.rejected);
    report.rejected = rejected;
    Ok(report)
}

pub fn file_sha256(path: &Path) -> IoResult<String> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(sha256_hex(&bytes))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
