use std::io::Read;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::Path;
use std::process::{Child, Command, ExitStatus, Stdio};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use super::INPUT_PLACEHOLDER;
use super::{classify, defect_signature, Classification, CompileOutcome, CompilerSpec, DiffError, Verdict};

/// Output kept per stream; the rest is read and discarded.
const CAPTURE_LIMIT: usize = 64 * 1024;
/// Time allowed for a killed process group to be reaped.
const KILL_GRACE: Duration = Duration::from_secs(2);

fn drain<R: Read + Send + 'static>(stream: Option<R>) -> JoinHandle<String> {
    thread::spawn(move || {
        let Some(mut stream) = stream else { return String::new() };
        let mut kept = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match stream.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = CAPTURE_LIMIT.saturating_sub(kept.len());
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        String::from_utf8_lossy(&kept).into_owned()
    })
}

fn spawn(spec: &CompilerSpec, program: &Path) -> Result<Child, DiffError> {
    let input = program.to_string_lossy();
    let argv: Vec<String> = spec
        .argv()?
        .into_iter()
        .map(|a| a.replace(INPUT_PLACEHOLDER, &input))
        .collect();
    let mut cmd = Command::new(&argv[0]);
    cmd.args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    let cap = spec.memory_cap;
    // SAFETY: only async-signal-safe libc calls run between fork and exec.
    unsafe {
        cmd.pre_exec(move || {
            if libc::setpgid(0, 0) != 0 {
                return Err(std::io::Error::last_os_error());
            }
            if cap > 0 {
                let limit = libc::rlimit {
                    rlim_cur: cap as libc::rlim_t,
                    rlim_max: cap as libc::rlim_t,
                };
                if libc::setrlimit(libc::RLIMIT_AS, &limit) != 0 {
                    return Err(std::io::Error::last_os_error());
                }
            }
            Ok(())
        });
    }
    cmd.spawn().map_err(|source| DiffError::Spawn {
        command: argv[0].clone(),
        source,
    })
}

fn kill_group(child: &mut Child) {
    let pid = child.id() as libc::pid_t;
    // SAFETY: plain syscall on the process group this runner created.
    unsafe {
        libc::kill(-pid, libc::SIGKILL);
    }
    let _ = child.kill();
    if child.wait_timeout(KILL_GRACE).ok().flatten().is_none() {
        log::warn!("process {pid} still alive after kill");
    }
}

fn first_line_with<'a>(text: &'a str, pred: impl Fn(&str) -> bool) -> Option<&'a str> {
    text.lines().map(str::trim).find(|l| !l.is_empty() && pred(l))
}

fn digest(verdict: Verdict, spec: &CompilerSpec, stdout: &str, stderr: &str) -> String {
    let patterns: &[String] = match verdict {
        Verdict::Oom => &spec.oom_patterns,
        Verdict::Crash => &spec.crash_patterns,
        _ => &[],
    };
    for text in [stderr, stdout] {
        if let Some(l) = first_line_with(text, |l| patterns.iter().any(|p| l.contains(p.as_str()))) {
            return l.to_string();
        }
    }
    for text in [stderr, stdout] {
        if let Some(l) = first_line_with(text, |l| l.to_ascii_lowercase().contains("error")) {
            return l.to_string();
        }
    }
    for text in [stderr, stdout] {
        if let Some(l) = first_line_with(text, |_| true) {
            return l.to_string();
        }
    }
    String::new()
}

fn exit_code(status: &ExitStatus) -> i32 {
    status.code().or_else(|| status.signal().map(|s| 128 + s)).unwrap_or(-1)
}

fn verdict_of(spec: &CompilerSpec, status: &ExitStatus, stdout: &str, stderr: &str) -> Verdict {
    let matches = |patterns: &[String]| {
        patterns
            .iter()
            .any(|p| stderr.contains(p.as_str()) || stdout.contains(p.as_str()))
    };
    if status.success() {
        Verdict::Pass
    } else if matches(&spec.oom_patterns) {
        Verdict::Oom
    } else if status.signal().is_some() || matches(&spec.crash_patterns) {
        Verdict::Crash
    } else if !stderr.trim().is_empty() || !stdout.trim().is_empty() {
        Verdict::Reject
    } else {
        Verdict::Crash
    }
}

/// Runs one compiler on one program under the spec's timeout and memory
/// cap. Failure to start the command is a configuration error, not a
/// compiler defect.
pub fn compile_one(spec: &CompilerSpec, program: &Path) -> Result<CompileOutcome, DiffError> {
    spec.validate()?;
    if !program.exists() {
        return Err(DiffError::MissingProgram(program.display().to_string()));
    }
    let start = Instant::now();
    let mut child = spawn(spec, program)?;
    let out = drain(child.stdout.take());
    let err = drain(child.stderr.take());
    let status = child.wait_timeout(Duration::from_secs_f64(spec.timeout))?;
    if status.is_none() {
        kill_group(&mut child);
    } else {
        // Stragglers left in the group would keep the pipes open.
        // SAFETY: signals only the process group created for this child.
        unsafe {
            libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
        }
    }
    let wall_time = start.elapsed().as_secs_f64();
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();
    let outcome = match status {
        None => CompileOutcome {
            verdict: Verdict::Timeout,
            exit_code: -1,
            diagnostics_digest: format!("timeout after {}s", spec.timeout),
            wall_time,
            stderr,
        },
        Some(status) => {
            let verdict = verdict_of(spec, &status, &stdout, &stderr);
            CompileOutcome {
                verdict,
                exit_code: exit_code(&status),
                diagnostics_digest: digest(verdict, spec, &stdout, &stderr),
                wall_time,
                stderr,
            }
        }
    };
    Ok(outcome)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffResult {
    pub a: CompileOutcome,
    pub b: CompileOutcome,
    pub classification: Classification,
    pub signature: Option<String>,
}

/// Compiles `program` with both compilers and classifies the pair.
pub fn differential_test(program: &Path, a: &CompilerSpec, b: &CompilerSpec) -> Result<DiffResult, DiffError> {
    let oa = compile_one(a, program)?;
    let ob = compile_one(b, program)?;
    let classification = classify(oa.verdict, ob.verdict);
    let signature = defect_signature(classification, &oa, &ob);
    Ok(DiffResult {
        a: oa,
        b: ob,
        classification,
        signature,
    })
}
