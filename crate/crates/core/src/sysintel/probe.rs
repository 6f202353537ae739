use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeError(pub String);

/// Raw system queries. Implementations return the unparsed text of each
/// inventory source.
pub trait SystemProbe: Sync {
    /// `/proc/cpuinfo` format.
    fn cpuinfo(&self) -> Result<String, ProbeError>;
    /// `/proc/meminfo` format.
    fn meminfo(&self) -> Result<String, ProbeError>;
    /// `nvidia-smi` CSV rows (`name, memory MiB, driver`), or `None` when
    /// no GPU management tool is installed.
    fn gpu_query(&self) -> Result<Option<String>, ProbeError>;
    /// `/etc/os-release` format.
    fn os_release(&self) -> Result<String, ProbeError>;
    fn kernel(&self) -> Result<String, ProbeError>;
    /// Collection timestamp (RFC 3339).
    fn now(&self) -> String;
}

/// Reads the live Linux system.
#[derive(Debug, Default, Clone, Copy)]
pub struct LinuxProbe;

fn read(path: &str) -> Result<String, ProbeError> {
    fs::read_to_string(Path::new(path)).map_err(|e| ProbeError(format!("{path}: {e}")))
}

impl SystemProbe for LinuxProbe {
    fn cpuinfo(&self) -> Result<String, ProbeError> {
        read("/proc/cpuinfo")
    }

    fn meminfo(&self) -> Result<String, ProbeError> {
        read("/proc/meminfo")
    }

    fn gpu_query(&self) -> Result<Option<String>, ProbeError> {
        let out = Command::new("nvidia-smi")
            .args(["--query-gpu=name,memory.total,driver_version", "--format=csv,noheader,nounits"])
            .output();
        match out {
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(ProbeError(format!("nvidia-smi: {e}"))),
            Ok(o) if o.status.success() => Ok(Some(String::from_utf8_lossy(&o.stdout).into_owned())),
            Ok(o) => Err(ProbeError(format!(
                "nvidia-smi exited with {}: {}",
                o.status,
                String::from_utf8_lossy(&o.stderr).trim()
            ))),
        }
    }

    fn os_release(&self) -> Result<String, ProbeError> {
        read("/etc/os-release").or_else(|_| read("/usr/lib/os-release"))
    }

    fn kernel(&self) -> Result<String, ProbeError> {
        read("/proc/sys/kernel/osrelease")
    }

    fn now(&self) -> String {
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    }
}

/// Recorded probe answers, loadable from JSON.
///
/// `failures` maps a channel name (`cpuinfo`, `meminfo`, `gpu_query`,
/// `os_release`, `kernel`) to the error that channel reports.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixtureProbe {
    pub cpuinfo: String,
    pub meminfo: String,
    pub gpu_query: Option<String>,
    pub os_release: String,
    pub kernel: String,
    pub now: String,
    pub failures: BTreeMap<String, String>,
}

impl FixtureProbe {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    fn answer<T>(&self, channel: &str, value: T) -> Result<T, ProbeError> {
        match self.failures.get(channel) {
            Some(e) => Err(ProbeError(e.clone())),
            None => Ok(value),
        }
    }
}

impl SystemProbe for FixtureProbe {
    fn cpuinfo(&self) -> Result<String, ProbeError> {
        self.answer("cpuinfo", self.cpuinfo.clone())
    }

    fn meminfo(&self) -> Result<String, ProbeError> {
        self.answer("meminfo", self.meminfo.clone())
    }

    fn gpu_query(&self) -> Result<Option<String>, ProbeError> {
        self.answer("gpu_query", self.gpu_query.clone())
    }

    fn os_release(&self) -> Result<String, ProbeError> {
        self.answer("os_release", self.os_release.clone())
    }

    fn kernel(&self) -> Result<String, ProbeError> {
        self.answer("kernel", self.kernel.clone())
    }

    fn now(&self) -> String {
        self.now.clone()
    }
}
