//! Hardware inventory and run manifests.
//!
//! Raw system queries come from a [`SystemProbe`]; [`LinuxProbe`] reads the
//! live system and [`FixtureProbe`] replays recorded answers, so report
//! assembly is testable without the hardware.

mod manifest;
mod probe;
mod render;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use manifest::{
    build_manifest, environment_digest, parse_key_values, parse_value, ManifestError, ParamValue, RunManifest,
};
pub use probe::{FixtureProbe, LinuxProbe, ProbeError, SystemProbe};
pub use render::{render_report, Render, ReportFormat};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CpuInfo {
    pub model: String,
    pub physical_cores: u32,
    pub logical_cores: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GpuInfo {
    pub vendor: String,
    pub model: String,
    pub memory_bytes: u64,
    pub driver_version: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OsInfo {
    pub name: String,
    pub version: String,
    pub kernel: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardwareReport {
    pub cpu: CpuInfo,
    pub memory_total_bytes: u64,
    pub gpus: Vec<GpuInfo>,
    pub os: OsInfo,
    pub collected_at: String,
    pub probe_errors: Vec<String>,
}

/// Parse `/proc/cpuinfo` text.
///
/// Physical cores are the distinct `(physical id, core id)` pairs; without
/// topology fields they fall back to the logical count.
pub fn parse_cpuinfo(text: &str) -> Result<CpuInfo, String> {
    let mut model = String::new();
    let mut logical = 0u32;
    let mut cores = BTreeSet::new();
    let mut physical_id = None;
    let mut core_id = None;
    let mut flush = |pid: &mut Option<String>, cid: &mut Option<String>| {
        if let (Some(p), Some(c)) = (pid.take(), cid.take()) {
            cores.insert((p, c));
        }
    };
    for line in text.lines() {
        let Some((key, value)) = line.split_once(':') else {
            if line.trim().is_empty() {
                flush(&mut physical_id, &mut core_id);
            }
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "processor" => logical += 1,
            "model name" if model.is_empty() => model = value.to_string(),
            "physical id" => physical_id = Some(value.to_string()),
            "core id" => core_id = Some(value.to_string()),
            _ => {}
        }
    }
    flush(&mut physical_id, &mut core_id);
    if logical == 0 {
        return Err("cpuinfo lists no processors".into());
    }
    let physical = if cores.is_empty() { logical } else { cores.len() as u32 };
    Ok(CpuInfo { model, physical_cores: physical, logical_cores: logical })
}

/// `MemTotal` from `/proc/meminfo`, in bytes.
pub fn parse_meminfo(text: &str) -> Result<u64, String> {
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("MemTotal:") {
            let mut parts = rest.split_whitespace();
            let n: u64 = parts
                .next()
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| format!("bad MemTotal line `{line}`"))?;
            let scale = match parts.next() {
                Some("kB") | Some("KB") => 1024,
                None => 1,
                Some(unit) => return Err(format!("unknown MemTotal unit `{unit}`")),
            };
            return Ok(n * scale);
        }
    }
    Err("meminfo has no MemTotal".into())
}

/// Name and version from `/etc/os-release`.
pub fn parse_os_release(text: &str) -> (String, String) {
    let mut name = String::new();
    let mut version = String::new();
    let mut version_fallback = String::new();
    for line in text.lines() {
        let Some((k, v)) = line.split_once('=') else { continue };
        let v = v.trim().trim_matches('"').to_string();
        match k.trim() {
            "NAME" => name = v,
            "VERSION_ID" => version = v,
            "VERSION" => version_fallback = v,
            _ => {}
        }
    }
    if version.is_empty() {
        version = version_fallback;
    }
    (name, version)
}

/// Rows of `nvidia-smi --query-gpu=name,memory.total,driver_version
/// --format=csv,noheader,nounits` (memory in MiB).
pub fn parse_gpu_csv(text: &str) -> Result<Vec<GpuInfo>, String> {
    let mut gpus = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [name, memory, driver] = fields[..] else {
            return Err(format!("unexpected GPU query row `{line}`"));
        };
        let mib: u64 = memory.parse().map_err(|_| format!("bad GPU memory `{memory}`"))?;
        gpus.push(GpuInfo {
            vendor: "NVIDIA".into(),
            model: gpu_model(name),
            memory_bytes: mib * 1024 * 1024,
            driver_version: driver.to_string(),
        });
    }
    Ok(gpus)
}

/// `Tesla V100-SXM2-32GB` → `V100`: brand prefixes and form-factor suffixes
/// are dropped.
fn gpu_model(name: &str) -> String {
    let mut s = name.trim();
    for prefix in ["NVIDIA ", "Tesla "] {
        s = s.strip_prefix(prefix).unwrap_or(s);
    }
    s.split('-').next().unwrap_or(s).trim().to_string()
}

/// Query every probe channel and assemble a report. Never fails: a channel
/// that errors leaves its fields at their defaults and adds a
/// `probe_errors` entry naming the channel.
pub fn collect_report(probe: &dyn SystemProbe) -> HardwareReport {
    let ((cpu, mem), (gpu, (os, kernel))) = rayon::join(
        || (probe.cpuinfo(), probe.meminfo()),
        || (probe.gpu_query(), (probe.os_release(), probe.kernel())),
    );
    let mut report = HardwareReport { collected_at: probe.now(), ..Default::default() };
    let mut errors = Vec::new();

    match cpu.map_err(|e| e.0).and_then(|t| parse_cpuinfo(&t)) {
        Ok(c) => report.cpu = c,
        Err(e) => errors.push(format!("cpu: {e}")),
    }
    match mem.map_err(|e| e.0).and_then(|t| parse_meminfo(&t)) {
        Ok(m) => report.memory_total_bytes = m,
        Err(e) => errors.push(format!("memory: {e}")),
    }
    match gpu.map_err(|e| e.0) {
        Ok(None) => {}
        Ok(Some(csv)) => match parse_gpu_csv(&csv) {
            Ok(g) => report.gpus = g,
            Err(e) => errors.push(format!("gpu: {e}")),
        },
        Err(e) => errors.push(format!("gpu: {e}")),
    }
    match os {
        Ok(text) => (report.os.name, report.os.version) = parse_os_release(&text),
        Err(e) => errors.push(format!("os: {}", e.0)),
    }
    match kernel {
        Ok(k) => report.os.kernel = k.trim().to_string(),
        Err(e) => errors.push(format!("kernel: {}", e.0)),
    }
    report.probe_errors = errors;
    report
}
