// SPDX-License-Identifier: Apache-2.0

//! Violation records, run statistics and their text and JSON-lines forms.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// A handled category reached by one parameter instance.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub spec: String,
    pub category: String,
    pub state: String,
    /// Rendered instance, e.g. `{file=File#f1}`.
    pub theta: String,
    pub event: String,
    pub seq: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src: Option<(String, u32)>,
    pub message: String,
}

impl ViolationRecord {
    /// Identity used for cross-run comparison.
    pub fn key(&self) -> (String, String, String, u64) {
        (self.spec.clone(), self.category.clone(), self.theta.clone(), self.seq)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpecStats {
    pub spec: String,
    /// Events dispatched to the spec.
    pub events: u64,
    pub suppressed: u64,
    /// Events with a missing or dead parameter object.
    pub skipped: u64,
    pub monitors_created: u64,
    pub tombstones: u64,
    pub peak_live: u64,
    pub collected: u64,
    pub instance_visits: u64,
    pub theta_scans: u64,
    /// Events dropped by the slice cap.
    pub truncated: u64,
    pub records: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub algorithm: String,
    pub mgc: bool,
    pub events: u64,
    pub deaths: u64,
    pub malformed: u64,
    pub elapsed_ms: f64,
    pub specs: Vec<SpecStats>,
}

/// Result of a monitoring run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub records: Vec<ViolationRecord>,
    pub summary: Summary,
}

/// Records sharing spec, instance and state, folded into the first one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollapsedRecord {
    #[serde(flatten)]
    pub first: ViolationRecord,
    pub count: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    #[default]
    Text,
    Machine,
}

impl Report {
    pub fn has_violations(&self) -> bool {
        !self.records.is_empty()
    }

    pub fn collapsed(&self) -> Vec<CollapsedRecord> {
        collapse(&self.records)
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Text => render_text(self),
            OutputFormat::Machine => render_machine(self),
        }
    }
}

/// Folds duplicates by `(spec, theta, state)`, keeping first-seen order.
pub fn collapse(records: &[ViolationRecord]) -> Vec<CollapsedRecord> {
    let mut out: Vec<CollapsedRecord> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for r in records {
        let key = (r.spec.as_str(), r.theta.as_str(), r.state.as_str());
        match index.get(&key) {
            Some(&i) => {
                let c: &mut CollapsedRecord = &mut out[i];
                c.count += 1;
            }
            None => {
                index.insert(key, out.len());
                out.push(CollapsedRecord {
                    first: r.clone(),
                    count: 1,
                });
            }
        }
    }
    out
}

pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    for c in report.collapsed() {
        let r = &c.first;
        let at = r
            .src
            .as_ref()
            .map(|(f, l)| format!("{f}:{l}"))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{} spec={} category={} theta={} seq={} at={} count={} msg={:?}",
            r.category.to_uppercase(),
            r.spec,
            r.category,
            r.theta,
            r.seq,
            at,
            c.count,
            r.message
        );
    }
    let s = &report.summary;
    let _ = writeln!(out, "--- summary ---");
    let _ = writeln!(
        out,
        "algorithm {}{}: {} events, {} deaths, {} malformed lines, {:.3} ms",
        s.algorithm,
        if s.mgc { " +mgc" } else { "" },
        s.events,
        s.deaths,
        s.malformed,
        s.elapsed_ms
    );
    for st in &s.specs {
        let _ = write!(
            out,
            "spec {}: events={} suppressed={} skipped={} monitors={} peak_live={} collected={} records={}",
            st.spec, st.events, st.suppressed, st.skipped, st.monitors_created, st.peak_live, st.collected, st.records
        );
        if st.truncated > 0 {
            let _ = write!(out, " truncated={}", st.truncated);
        }
        let mut by_category: std::collections::BTreeMap<&str, u64> = Default::default();
        for r in report.records.iter().filter(|r| r.spec == st.spec) {
            *by_category.entry(r.category.as_str()).or_default() += 1;
        }
        for (category, n) in by_category {
            let _ = write!(out, " {category}={n}");
        }
        if let Some(reason) = &st.aborted {
            let _ = write!(out, " aborted={reason:?}");
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum MachineLine {
    Violation(CollapsedRecord),
    Summary(Summary),
}

/// One JSON object per collapsed record, then a summary object.
pub fn render_machine(report: &Report) -> String {
    let mut out = String::new();
    for c in report.collapsed() {
        out.push_str(&serde_json::to_string(&MachineLine::Violation(c)).expect("records serialize"));
        out.push('\n');
    }
    out.push_str(&serde_json::to_string(&MachineLine::Summary(report.summary.clone())).expect("summary serializes"));
    out.push('\n');
    out
}

/// Parses machine output back into collapsed records and the summary.
pub fn parse_machine(text: &str) -> Result<(Vec<CollapsedRecord>, Summary), serde_json::Error> {
    let mut records = Vec::new();
    let mut summary = Summary::default();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        match serde_json::from_str(line)? {
            MachineLine::Violation(c) => records.push(c),
            MachineLine::Summary(s) => summary = s,
        }
    }
    Ok((records, summary))
}

/// Expands `{spec}`, `{category}`, `{theta}`, `{event}`, `{seq}` and
/// `{<param>}` placeholders.
pub fn expand_message(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open + 1..];
        match tail.find('}') {
            Some(close) => {
                let key = &tail[..close];
                match vars.iter().find(|(k, _)| *k == key) {
                    Some((_, v)) => out.push_str(v),
                    None => {
                        out.push('{');
                        out.push_str(key);
                        out.push('}');
                    }
                }
                rest = &tail[close + 1..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}
