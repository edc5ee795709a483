//! Differential testing: runs two compiler commands on one program under
//! resource caps, classifies the pair of outcomes and deduplicates the
//! resulting defects.

mod auc;
mod registry;
mod runner;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use auc::{bugs_over_time_auc, SnapshotClock};
pub use registry::{signature_key, DefectRecord, DefectRegistry};
pub use runner::{compile_one, differential_test, DiffResult};

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("invalid compiler spec '{label}': {reason}")]
    InvalidSpec { label: String, reason: String },
    #[error("cannot start '{command}': {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("program file {0} does not exist")]
    MissingProgram(String),
    #[error("invalid timeline: {0}")]
    Timeline(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const INPUT_PLACEHOLDER: &str = "{input}";

fn default_timeout() -> f64 {
    60.0
}

fn default_memory_cap() -> u64 {
    2 << 30
}

fn default_oom_patterns() -> Vec<String> {
    [
        "OutOfMemoryError",
        "memory allocation of",
        "std::bad_alloc",
        "out of memory",
    ]
    .map(String::from)
    .to_vec()
}

fn default_crash_patterns() -> Vec<String> {
    [
        "panicked at",
        "internal compiler error",
        "Exception in thread",
        "Segmentation fault",
    ]
    .map(String::from)
    .to_vec()
}

/// How to invoke one compiler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompilerSpec {
    pub label: String,
    /// Shell-style command line with one `{input}` placeholder.
    pub command: String,
    /// Seconds.
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    /// Address-space limit in bytes; 0 disables it.
    #[serde(default = "default_memory_cap")]
    pub memory_cap: u64,
    #[serde(default = "default_oom_patterns")]
    pub oom_patterns: Vec<String>,
    /// Output fragments that mark a nonzero exit as a crash rather than a
    /// rejection.
    #[serde(default = "default_crash_patterns")]
    pub crash_patterns: Vec<String>,
}

impl CompilerSpec {
    pub fn new(label: impl Into<String>, command: impl Into<String>) -> Self {
        CompilerSpec {
            label: label.into(),
            command: command.into(),
            timeout: default_timeout(),
            memory_cap: default_memory_cap(),
            oom_patterns: default_oom_patterns(),
            crash_patterns: default_crash_patterns(),
        }
    }

    fn invalid(&self, reason: impl Into<String>) -> DiffError {
        DiffError::InvalidSpec {
            label: self.label.clone(),
            reason: reason.into(),
        }
    }

    /// The argument vector with `{input}` still unexpanded.
    pub fn argv(&self) -> Result<Vec<String>, DiffError> {
        let placeholders = self.command.matches(INPUT_PLACEHOLDER).count();
        if placeholders != 1 {
            return Err(self.invalid(format!("command must contain {INPUT_PLACEHOLDER} exactly once")));
        }
        let argv = shlex::split(&self.command).ok_or_else(|| self.invalid("unbalanced quotes in command"))?;
        if argv.is_empty() {
            return Err(self.invalid("empty command"));
        }
        Ok(argv)
    }

    /// Replaces the program word `from` with `to` (which may be several
    /// words). Commands that run another program are left alone.
    pub fn replace_program(&mut self, from: &str, to: &[String]) -> Result<bool, DiffError> {
        let argv = self.argv()?;
        if argv[0] != from {
            return Ok(false);
        }
        let words = to
            .iter()
            .map(String::as_str)
            .chain(argv[1..].iter().map(String::as_str));
        self.command = shlex::try_join(words).map_err(|e| self.invalid(e.to_string()))?;
        Ok(true)
    }

    pub fn validate(&self) -> Result<(), DiffError> {
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(self.invalid("timeout must be positive"));
        }
        self.argv().map(|_| ())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Reject,
    Crash,
    Timeout,
    Oom,
}

impl Verdict {
    pub const ALL: [Verdict; 5] = [
        Verdict::Pass,
        Verdict::Reject,
        Verdict::Crash,
        Verdict::Timeout,
        Verdict::Oom,
    ];
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Reject => "reject",
            Verdict::Crash => "crash",
            Verdict::Timeout => "timeout",
            Verdict::Oom => "oom",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompileOutcome {
    pub verdict: Verdict,
    /// Exit status, or 128 + signal number for a signalled process, or -1
    /// when killed on timeout.
    pub exit_code: i32,
    /// The first meaningful diagnostic line.
    pub diagnostics_digest: String,
    /// Seconds.
    pub wall_time: f64,
    /// Captured standard error (truncated); not written to logs.
    #[serde(skip)]
    pub stderr: String,
}

impl CompileOutcome {
    /// An outcome with only a verdict and a digest, for tables and tests.
    pub fn synthetic(verdict: Verdict, digest: impl Into<String>) -> Self {
        CompileOutcome {
            verdict,
            exit_code: 0,
            diagnostics_digest: digest.into(),
            wall_time: 0.0,
            stderr: String::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Classification {
    #[serde(rename = "agree-pass")]
    AgreePass,
    #[serde(rename = "agree-reject")]
    AgreeReject,
    #[serde(rename = "divergent-verdict-A-rejects")]
    DivergentARejects,
    #[serde(rename = "divergent-verdict-B-rejects")]
    DivergentBRejects,
    #[serde(rename = "crash-A")]
    CrashA,
    #[serde(rename = "crash-B")]
    CrashB,
    #[serde(rename = "oom-A")]
    OomA,
    #[serde(rename = "oom-B")]
    OomB,
    #[serde(rename = "oom-both")]
    OomBoth,
}

impl Classification {
    pub const ALL: [Classification; 9] = [
        Classification::AgreePass,
        Classification::AgreeReject,
        Classification::DivergentARejects,
        Classification::DivergentBRejects,
        Classification::CrashA,
        Classification::CrashB,
        Classification::OomA,
        Classification::OomB,
        Classification::OomBoth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Classification::AgreePass => "agree-pass",
            Classification::AgreeReject => "agree-reject",
            Classification::DivergentARejects => "divergent-verdict-A-rejects",
            Classification::DivergentBRejects => "divergent-verdict-B-rejects",
            Classification::CrashA => "crash-A",
            Classification::CrashB => "crash-B",
            Classification::OomA => "oom-A",
            Classification::OomB => "oom-B",
            Classification::OomBoth => "oom-both",
        }
    }

    pub fn is_defect(self) -> bool {
        !matches!(self, Classification::AgreePass | Classification::AgreeReject)
    }

    /// Which side's diagnostics identify the defect: `false` for A.
    fn blames_b(self) -> bool {
        matches!(
            self,
            Classification::DivergentBRejects | Classification::CrashB | Classification::OomB
        )
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Classification {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Classification::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown classification '{s}'"))
    }
}

/// Maps a pair of verdicts to its classification. Out-of-memory takes
/// precedence over crashes and timeouts, and a crash or timeout of A over
/// one of B.
pub fn classify(a: Verdict, b: Verdict) -> Classification {
    use Verdict::*;
    let abnormal = |v: Verdict| matches!(v, Crash | Timeout);
    match (a, b) {
        (Oom, Oom) => Classification::OomBoth,
        (Oom, _) => Classification::OomA,
        (_, Oom) => Classification::OomB,
        (x, _) if abnormal(x) => Classification::CrashA,
        (_, y) if abnormal(y) => Classification::CrashB,
        (Pass, Pass) => Classification::AgreePass,
        (Reject, Reject) => Classification::AgreeReject,
        (Pass, Reject) => Classification::DivergentBRejects,
        (Reject, Pass) => Classification::DivergentARejects,
        _ => unreachable!("every abnormal verdict is handled above"),
    }
}

/// Replaces quoted text and numbers by placeholders so that diagnostics
/// differing only in names, types or positions compare equal.
pub fn mask_diagnostic(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\'' | '"' | '`' => {
                let mut closed = false;
                for d in chars.by_ref() {
                    if d == c {
                        closed = true;
                        break;
                    }
                }
                out.push(c);
                out.push('_');
                if closed {
                    out.push(c);
                }
            }
            c if c.is_ascii_digit() => {
                while chars.peek().is_some_and(|d| d.is_ascii_digit() || *d == '.') {
                    chars.next();
                }
                out.push('N');
            }
            c => out.push(c),
        }
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Normalized deduplication key of a defect, or `None` for agreement.
pub fn defect_signature(class: Classification, a: &CompileOutcome, b: &CompileOutcome) -> Option<String> {
    if !class.is_defect() {
        return None;
    }
    let blamed = if class.blames_b() { b } else { a };
    let digest = mask_diagnostic(&blamed.diagnostics_digest);
    let digest = if digest.is_empty() {
        format!("{} without diagnostics", blamed.verdict)
    } else {
        digest
    };
    Some(format!("{class}: {digest}"))
}
