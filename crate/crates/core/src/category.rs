use core::fmt;
use core::str::FromStr;

use alloc::string::ToString;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// The seven weakness classes a corpus can be labeled with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VulnerabilityCategory {
    SqlInjection,
    Xss,
    CommandInjection,
    Xsrf,
    RemoteCodeExecution,
    PathDisclosure,
    OpenRedirect,
}

impl VulnerabilityCategory {
    pub const ALL: [VulnerabilityCategory; 7] = [
        VulnerabilityCategory::SqlInjection,
        VulnerabilityCategory::Xss,
        VulnerabilityCategory::CommandInjection,
        VulnerabilityCategory::Xsrf,
        VulnerabilityCategory::RemoteCodeExecution,
        VulnerabilityCategory::PathDisclosure,
        VulnerabilityCategory::OpenRedirect,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VulnerabilityCategory::SqlInjection => "sql_injection",
            VulnerabilityCategory::Xss => "xss",
            VulnerabilityCategory::CommandInjection => "command_injection",
            VulnerabilityCategory::Xsrf => "xsrf",
            VulnerabilityCategory::RemoteCodeExecution => "remote_code_execution",
            VulnerabilityCategory::PathDisclosure => "path_disclosure",
            VulnerabilityCategory::OpenRedirect => "open_redirect",
        }
    }

    /// Human-readable label used in rendered tables.
    pub fn title(self) -> &'static str {
        match self {
            VulnerabilityCategory::SqlInjection => "SQL injection",
            VulnerabilityCategory::Xss => "XSS",
            VulnerabilityCategory::CommandInjection => "Command injection",
            VulnerabilityCategory::Xsrf => "XSRF",
            VulnerabilityCategory::RemoteCodeExecution => "Remote code execution",
            VulnerabilityCategory::PathDisclosure => "Path disclosure",
            VulnerabilityCategory::OpenRedirect => "Open redirect",
        }
    }
}

impl fmt::Display for VulnerabilityCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VulnerabilityCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VulnerabilityCategory::ALL
            .iter()
            .copied()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownCategory(s.to_string()))
    }
}

impl Serialize for VulnerabilityCategory {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for VulnerabilityCategory {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = <alloc::borrow::Cow<'de, str>>::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
