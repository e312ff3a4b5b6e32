//! Protocol conformance checks for stdio adapters, driven by the fixtures in
//! `assets/conformance/`.

use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};
use std::sync::mpsc::{self, Receiver};
use std::time::Duration;

use serde::Serialize;

use super::protocol::{AdapterLine, AdapterRequest, ImageRef, TOO_MANY_IMAGES};

const REQUESTS: &str = include_str!("../../assets/conformance/requests.jsonl");
const MALFORMED: &str = include_str!("../../assets/conformance/malformed.jsonl");

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConformanceReport {
    pub checks: Vec<CheckResult>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Fixture requests every adapter must answer.
pub fn fixture_requests() -> Vec<AdapterRequest> {
    REQUESTS
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("fixture requests are valid"))
        .collect()
}

struct Wire {
    stdin: std::process::ChildStdin,
    lines: Receiver<String>,
    wait: Duration,
}

impl Wire {
    fn send(&mut self, line: &str) -> bool {
        writeln!(self.stdin, "{line}").and_then(|_| self.stdin.flush()).is_ok()
    }

    fn recv(&self) -> Option<AdapterLine> {
        let text = self.lines.recv_timeout(self.wait).ok()?;
        AdapterLine::parse(&text).ok()
    }
}

/// Spawn `program args...` and run the protocol checks against it.
pub fn check_stdio_adapter(program: &str, args: &[String], wait: Duration) -> std::io::Result<ConformanceReport> {
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()?;
    let stdin = child.stdin.take().expect("piped");
    let stdout = child.stdout.take().expect("piped");
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        for line in BufReader::new(stdout).lines().map_while(Result::ok) {
            if tx.send(line).is_err() {
                break;
            }
        }
    });
    let mut wire = Wire { stdin, lines: rx, wait };
    let mut checks = Vec::new();

    let max_images = match wire.recv() {
        Some(AdapterLine::Handshake(c)) => {
            checks.push(CheckResult {
                name: "handshake_first",
                passed: true,
                detail: format!("max_images = {:?}", c.max_images),
            });
            c.max_images
        }
        other => {
            checks.push(CheckResult {
                name: "handshake_first",
                passed: false,
                detail: format!("first line was {other:?}"),
            });
            None
        }
    };

    let mut mismatches = Vec::new();
    for req in fixture_requests() {
        if !wire.send(&req.to_line()) {
            mismatches.push(format!("{}: write failed", req.id));
            continue;
        }
        match wire.recv() {
            Some(AdapterLine::Response(r)) if r.id.as_deref() == Some(req.id.as_str()) => {
                if max_images.is_none_or(|m| req.images.len() <= m) && r.answer.is_none() {
                    mismatches.push(format!("{}: no answer field", req.id));
                }
            }
            other => mismatches.push(format!("{}: got {other:?}", req.id)),
        }
    }
    checks.push(CheckResult {
        name: "id_matching",
        passed: mismatches.is_empty(),
        detail: mismatches.join("; "),
    });

    let bad_line = MALFORMED.lines().next().unwrap_or_default();
    let bad_id: Option<String> = serde_json::from_str::<serde_json::Value>(bad_line)
        .ok()
        .and_then(|v| v.get("id").and_then(|i| i.as_str()).map(str::to_string));
    wire.send(bad_line);
    let (passed, detail) = match wire.recv() {
        Some(AdapterLine::Response(r)) => (r.id == bad_id && r.error.is_some(), format!("{r:?}")),
        other => (false, format!("got {other:?}")),
    };
    checks.push(CheckResult {
        name: "error_shape",
        passed,
        detail,
    });

    match max_images {
        Some(m) => {
            let mut req = fixture_requests().remove(0);
            req.id = "conf-capacity".into();
            req.images = (0..=m)
                .map(|i| ImageRef {
                    id: format!("cap{i}"),
                    path: String::new(),
                })
                .collect();
            req.meta.haystack_size = m + 1;
            wire.send(&req.to_line());
            let (passed, detail) = match wire.recv() {
                Some(AdapterLine::Response(r)) => (
                    r.id.as_deref() == Some("conf-capacity") && r.error.as_deref() == Some(TOO_MANY_IMAGES),
                    format!("{r:?}"),
                ),
                other => (false, format!("got {other:?}")),
            };
            checks.push(CheckResult {
                name: "too_many_images",
                passed,
                detail,
            });
        }
        None => checks.push(CheckResult {
            name: "too_many_images",
            passed: true,
            detail: "no capacity declared; skipped".into(),
        }),
    }

    // exactly one response per request: nothing else may be pending
    let extra = wire.lines.recv_timeout(Duration::from_millis(200)).ok();
    checks.push(CheckResult {
        name: "one_response_per_request",
        passed: extra.is_none(),
        detail: extra.unwrap_or_default(),
    });

    drop(wire);
    let _ = child.kill();
    let _ = child.wait();
    Ok(ConformanceReport { checks })
}
