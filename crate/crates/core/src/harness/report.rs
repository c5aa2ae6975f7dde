//! Audit reports: JSON and aligned-table renderings, and exit status.
//!
//! JSON schema (version 1):
//!
//! ```text
//! {
//!   "schema_version": 1,
//!   "tool": "wce-sra",
//!   "tool_version": "...",
//!   "seed": u64, "trials": usize, "profile_override": null | "<profile>",
//!   "claims": ["<claim id>", ...],
//!   "settings": { "tol": {...}, "seed": u64, "m_max_exp": u32 },
//!   "summary": { "total", "pass", "counterexample", "skipped",
//!                "hard_counterexamples", "hard_numerical_failures",
//!                "per_claim": { "<id>": { "hard", "pass", "counterexample", "skipped" } } },
//!   "records": [ { "claim", "trial", "profile", "seed", "hard", "digest",
//!                  "verdict", "evidence", ["error"], ["instance"] } ]
//! }
//! ```
//!
//! Non-finite evidence values are the strings `"NaN"`, `"inf"`, `"-inf"`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::audit::{AuditRecord, ClaimVerdict};
use crate::harness::gen::Profile;
use crate::settings::Settings;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL: &str = "wce-sra";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClaimSummary {
    pub hard: bool,
    pub pass: usize,
    pub counterexample: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub pass: usize,
    pub counterexample: usize,
    pub skipped: usize,
    pub hard_counterexamples: usize,
    pub hard_numerical_failures: usize,
    pub per_claim: BTreeMap<String, ClaimSummary>,
}

impl Summary {
    pub fn from_records(records: &[AuditRecord]) -> Self {
        let mut s = Summary::default();
        for r in records {
            s.total += 1;
            let c = s.per_claim.entry(r.claim.clone()).or_default();
            c.hard |= r.hard;
            match r.verdict {
                ClaimVerdict::Pass => {
                    s.pass += 1;
                    c.pass += 1;
                }
                ClaimVerdict::Counterexample => {
                    s.counterexample += 1;
                    c.counterexample += 1;
                    if r.hard {
                        s.hard_counterexamples += 1;
                    }
                }
                ClaimVerdict::Skipped => {
                    s.skipped += 1;
                    c.skipped += 1;
                }
            }
            if r.hard && r.is_numerical_failure() {
                s.hard_numerical_failures += 1;
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub seed: u64,
    pub trials: usize,
    pub profile_override: Option<Profile>,
    pub claims: Vec<String>,
    pub settings: Settings,
    pub summary: Summary,
    pub records: Vec<AuditRecord>,
}

impl AuditReport {
    pub fn new(
        settings: Settings,
        seed: u64,
        trials: usize,
        profile_override: Option<Profile>,
        claims: Vec<String>,
        records: Vec<AuditRecord>,
    ) -> Self {
        AuditReport {
            schema_version: SCHEMA_VERSION,
            tool: TOOL.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed,
            trials,
            profile_override,
            claims,
            settings,
            summary: Summary::from_records(&records),
            records,
        }
    }

    pub fn empty(settings: Settings) -> Self {
        Self::new(settings, 0, 0, None, Vec::new(), Vec::new())
    }

    /// 1 on a hard counterexample, 3 on a numerical failure in a hard
    /// claim, 0 otherwise. Soft claims never affect the status.
    pub fn exit_status(&self) -> i32 {
        if self.summary.hard_counterexamples > 0 {
            1
        } else if self.summary.hard_numerical_failures > 0 {
            3
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Table,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "table" => Ok(Format::Table),
            _ => Err(Error::Usage(format!("unknown format '{s}' (json or table)"))),
        }
    }
}

pub fn emit_report(report: &AuditReport, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("reports serialize");
            out.push(b'\n');
            out
        }
        Format::Table => render_table(report).into_bytes(),
    }
}

pub fn parse_report(text: &str, origin: &str) -> Result<AuditReport> {
    let report: AuditReport = serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("{origin}:{}:{}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(Error::validation(
            "schema_version",
            format!("expected {SCHEMA_VERSION}, found {}", report.schema_version),
        ));
    }
    Ok(report)
}

fn compact(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Left-aligned columns separated by two spaces; the last column is not padded.
fn aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c + 1 == row.len() {
                line.push_str(cell);
            } else {
                let _ = write!(line, "{cell:<w$}  ", w = widths[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn render_table(report: &AuditReport) -> String {
    let mut out = String::new();
    let tol = serde_json::to_string(&report.settings).expect("settings serialize");
    let _ = writeln!(out, "{} {} (schema {})", report.tool, report.tool_version, report.schema_version);
    let _ = writeln!(
        out,
        "seed {}  trials {}  profile {}  claims {}",
        report.seed,
        report.trials,
        report.profile_override.map_or("native".to_string(), |p| p.to_string()),
        report.claims.join(",")
    );
    let _ = writeln!(out, "settings {tol}");
    out.push('\n');

    let mut rows = vec![[
        "CLAIM", "TRIAL", "PROFILE", "SEED", "HARD", "VERDICT", "DIGEST", "EVIDENCE",
    ]
    .map(String::from)
    .to_vec()];
    for r in &report.records {
        let mut ev: Vec<String> = r.evidence.0.iter().map(|(k, v)| format!("{k}={}", compact(v))).collect();
        if let Some(e) = &r.error {
            ev.push(format!("error[{}]={}", e.kind, e.message));
        }
        if let Some(inst) = &r.instance {
            ev.push(format!("instance={}", serde_json::to_string(inst).expect("instances serialize")));
        }
        rows.push(vec![
            r.claim.clone(),
            r.trial.to_string(),
            r.profile.to_string(),
            r.seed.to_string(),
            if r.hard { "hard" } else { "soft" }.into(),
            r.verdict.name().into(),
            r.digest.clone().unwrap_or_else(|| "-".into()),
            ev.join("; "),
        ]);
    }
    out.push_str(&aligned(&rows));
    out.push('\n');

    let mut rows = vec![["CLAIM", "HARD", "PASS", "COUNTEREXAMPLE", "SKIPPED"].map(String::from).to_vec()];
    for (id, c) in &report.summary.per_claim {
        rows.push(vec![
            id.clone(),
            if c.hard { "hard" } else { "soft" }.into(),
            c.pass.to_string(),
            c.counterexample.to_string(),
            c.skipped.to_string(),
        ]);
    }
    let s = &report.summary;
    rows.push(vec![
        "TOTAL".into(),
        "-".into(),
        s.pass.to_string(),
        s.counterexample.to_string(),
        s.skipped.to_string(),
    ]);
    out.push_str(&aligned(&rows));
    let _ = writeln!(
        out,
        "\nrecords {}  hard counterexamples {}  hard numerical failures {}",
        s.total, s.hard_counterexamples, s.hard_numerical_failures
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::audit::Evidence;

    fn record(verdict: ClaimVerdict, hard: bool) -> AuditRecord {
        AuditRecord {
            claim: "norm-formula".into(),
            trial: 0,
            profile: Profile::Generic,
            seed: 7,
            hard,
            digest: Some("ab".repeat(32)),
            verdict,
            evidence: Evidence::new().num("relative_error", 1e-15),
            error: None,
            instance: None,
        }
    }

    #[test]
    fn empty_report_is_a_valid_document() {
        let r = AuditReport::empty(Settings::default());
        let json = String::from_utf8(emit_report(&r, Format::Json)).unwrap();
        let back = parse_report(&json, "mem").unwrap();
        assert_eq!(back, r);
        assert_eq!(back.summary.total, 0);
        assert_eq!(r.exit_status(), 0);
        assert!(String::from_utf8(emit_report(&r, Format::Table)).unwrap().contains("TOTAL"));
    }

    #[test]
    fn single_pass_record() {
        let r = AuditReport::new(Settings::default(), 7, 1, None, vec!["norm-formula".into()], vec![record(ClaimVerdict::Pass, true)]);
        assert_eq!((r.summary.pass, r.summary.counterexample, r.summary.skipped), (1, 0, 0));
        let table = String::from_utf8(emit_report(&r, Format::Table)).unwrap();
        let rows: Vec<_> = table.lines().filter(|l| l.starts_with("norm-formula  ")).collect();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].contains("PASS") && rows[0].contains(&"ab".repeat(32)));
        assert!(rows[0].contains("relative_error=1e-15"));
    }

    #[test]
    fn exit_status_reflects_only_hard_claims() {
        let soft = AuditReport::new(Settings::default(), 0, 1, None, vec![], vec![record(ClaimVerdict::Counterexample, false)]);
        assert_eq!(soft.exit_status(), 0);
        let hard = AuditReport::new(Settings::default(), 0, 1, None, vec![], vec![record(ClaimVerdict::Counterexample, true)]);
        assert_eq!(hard.exit_status(), 1);
        let mut numerical = record(ClaimVerdict::Skipped, true);
        numerical.error = Some(crate::harness::audit::RecordError {
            kind: "numerical".into(),
            message: "no convergence".into(),
        });
        let r = AuditReport::new(Settings::default(), 0, 1, None, vec![], vec![numerical]);
        assert_eq!(r.exit_status(), 3);
    }

    #[test]
    fn rejects_other_schema_versions() {
        let mut v = serde_json::to_value(AuditReport::empty(Settings::default())).unwrap();
        v["schema_version"] = 99.into();
        assert!(matches!(parse_report(&v.to_string(), "f"), Err(Error::Validation { .. })));
        assert!(matches!(parse_report("{", "f"), Err(Error::Parse { .. })));
        assert!("xml".parse::<Format>().is_err());
    }
}
