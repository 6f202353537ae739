use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use super::{HardwareReport, ParamValue, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Html,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "html" => Ok(ReportFormat::Html),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

/// Something that renders as canonical JSON or a standalone HTML page.
pub trait Render: Serialize {
    fn title(&self) -> &'static str;
    fn html_body(&self, out: &mut String);
}

pub fn render_report<R: Render>(report: &R, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => canonical_json(report).into_bytes(),
        ReportFormat::Html => html_page(report).into_bytes(),
    }
}

/// Sorted keys, two-space indent, trailing newline.
pub(crate) fn canonical_json<T: Serialize>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("reports serialize");
    let mut s = serde_json::to_string_pretty(&value).expect("values serialize");
    s.push('\n');
    s
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

const STYLE: &str = "body{font-family:sans-serif;margin:2em;color:#222}\
table{border-collapse:collapse;margin-bottom:1.5em}\
th,td{border:1px solid #bbb;padding:.3em .7em;text-align:left}\
th{background:#eee}";

fn html_page<R: Render>(report: &R) -> String {
    let mut body = String::new();
    report.html_body(&mut body);
    format!(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{title}</title>\n\
         <style>{STYLE}</style>\n</head>\n<body>\n<h1>{title}</h1>\n{body}</body>\n</html>\n",
        title = escape(report.title())
    )
}

fn table(out: &mut String, heading: &str, rows: &[(&str, String)]) {
    let _ = writeln!(out, "<h2>{}</h2>\n<table>", escape(heading));
    for (k, v) in rows {
        let _ = writeln!(out, "<tr><th>{}</th><td>{}</td></tr>", escape(k), escape(v));
    }
    out.push_str("</table>\n");
}

fn gib(bytes: u64) -> String {
    format!("{bytes} bytes ({:.1} GiB)", bytes as f64 / (1u64 << 30) as f64)
}

fn hardware_body(r: &HardwareReport, out: &mut String) {
    table(
        out,
        "CPU",
        &[
            ("Model", r.cpu.model.clone()),
            ("Physical cores", r.cpu.physical_cores.to_string()),
            ("Logical cores", r.cpu.logical_cores.to_string()),
            ("Memory", gib(r.memory_total_bytes)),
        ],
    );
    let _ = writeln!(out, "<h2>GPUs ({})</h2>", r.gpus.len());
    if r.gpus.is_empty() {
        out.push_str("<p>No GPUs detected.</p>\n");
    } else {
        out.push_str("<table>\n<tr><th>#</th><th>Vendor</th><th>Model</th><th>Memory</th><th>Driver</th></tr>\n");
        for (i, g) in r.gpus.iter().enumerate() {
            let _ = writeln!(
                out,
                "<tr><td>{i}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
                escape(&g.vendor),
                escape(&g.model),
                escape(&gib(g.memory_bytes)),
                escape(&g.driver_version)
            );
        }
        out.push_str("</table>\n");
    }
    table(
        out,
        "Operating system",
        &[("Name", r.os.name.clone()), ("Version", r.os.version.clone()), ("Kernel", r.os.kernel.clone())],
    );
    table(out, "Collection", &[("Collected at", r.collected_at.clone())]);
    if !r.probe_errors.is_empty() {
        out.push_str("<h2>Probe errors</h2>\n<ul>\n");
        for e in &r.probe_errors {
            let _ = writeln!(out, "<li>{}</li>", escape(e));
        }
        out.push_str("</ul>\n");
    }
}

impl Render for HardwareReport {
    fn title(&self) -> &'static str {
        "Hardware report"
    }

    fn html_body(&self, out: &mut String) {
        hardware_body(self, out);
    }
}

impl Render for RunManifest {
    fn title(&self) -> &'static str {
        "Run manifest"
    }

    fn html_body(&self, out: &mut String) {
        table(
            out,
            "Run",
            &[
                ("Source revision", self.source_revision.clone().unwrap_or_else(|| "(none)".into())),
                ("Environment digest", self.environment_digest.clone()),
                ("Tool version", self.tool_version.clone()),
            ],
        );
        let params: Vec<(&str, String)> = self
            .hyperparameters
            .iter()
            .map(|(k, v)| {
                let text = match v {
                    ParamValue::Bool(b) => b.to_string(),
                    ParamValue::Int(i) => i.to_string(),
                    ParamValue::Float(f) => serde_json::to_string(f).unwrap_or_default(),
                    ParamValue::Str(s) => s.clone(),
                };
                (k.as_str(), text)
            })
            .collect();
        table(out, "Hyperparameters", &params);
        let metrics: Vec<(&str, String)> = self
            .metrics
            .iter()
            .map(|(k, v)| (k.as_str(), serde_json::to_string(v).unwrap_or_default()))
            .collect();
        table(out, "Metrics", &metrics);
        hardware_body(&self.hardware, out);
    }
}
