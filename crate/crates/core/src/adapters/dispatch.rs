use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::protocol::{
    normalize_answer, AdapterLine, AdapterRequest, AdapterResponse, Capabilities, Normalized, TOO_MANY_IMAGES,
};
use crate::corpus::Corpus;
use crate::haystack::BenchmarkSet;

/// An in-process answerer. Implementations must be stateless per request.
pub trait Answerer: Send + Sync {
    /// Maximum number of images per request, if bounded.
    fn capacity(&self) -> Option<usize> {
        None
    }

    fn respond(&self, request: &AdapterRequest) -> AdapterResponse;
}

/// Where requests go.
#[derive(Clone)]
pub enum Endpoint {
    InProcess(Arc<dyn Answerer>),
    /// Line-delimited JSON over a child process's stdin/stdout. One process
    /// is spawned per worker.
    Stdio {
        program: String,
        args: Vec<String>,
    },
    /// JSON POST to a single URL.
    Http {
        url: String,
    },
}

impl Endpoint {
    pub fn in_process<A: Answerer + 'static>(answerer: A) -> Self {
        Endpoint::InProcess(Arc::new(answerer))
    }

    /// Parse a shell-style command line (whitespace separated) into a stdio endpoint.
    pub fn stdio_command(command: &str) -> Self {
        let mut parts = command.split_whitespace().map(str::to_string);
        let program = parts.next().unwrap_or_default();
        Endpoint::Stdio {
            program,
            args: parts.collect(),
        }
    }

    /// Declared capacity, when knowable without a round trip.
    pub fn capacity(&self) -> Option<usize> {
        match self {
            Endpoint::InProcess(a) => a.capacity(),
            _ => None,
        }
    }
}

impl std::fmt::Debug for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Endpoint::InProcess(_) => f.write_str("InProcess"),
            Endpoint::Stdio { program, args } => write!(f, "Stdio({program} {})", args.join(" ")),
            Endpoint::Http { url } => write!(f, "Http({url})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DispatchOptions {
    pub parallelism: usize,
    pub timeout: Duration,
    /// Resends after an adapter process dies mid-request.
    pub retries: u32,
}

impl Default for DispatchOptions {
    fn default() -> Self {
        Self {
            parallelism: 1,
            timeout: Duration::from_secs(60),
            retries: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub question_id: String,
    pub raw_text: String,
    pub normalized: Normalized,
    pub latency_ms: f64,
    #[serde(default)]
    pub timed_out: bool,
    /// Adapter reported that the request exceeded its capacity.
    #[serde(default)]
    pub unevaluated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TranscriptEntry {
    fn noncompliant(question_id: &str, latency: Duration, error: String) -> Self {
        Self {
            question_id: question_id.to_string(),
            raw_text: String::new(),
            normalized: Normalized::Noncompliant,
            latency_ms: latency.as_secs_f64() * 1e3,
            timed_out: false,
            unevaluated: false,
            error: Some(error),
        }
    }
}

/// Verdicts for a run, ordered by question id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    #[serde(default)]
    pub capabilities: Option<Capabilities>,
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    /// Build a transcript, sorting entries by question id.
    pub fn from_entries(mut entries: Vec<TranscriptEntry>, capabilities: Option<Capabilities>) -> Self {
        entries.sort_by(|a, b| a.question_id.cmp(&b.question_id));
        Self { capabilities, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, question_id: &str) -> Option<&TranscriptEntry> {
        self.entries
            .binary_search_by(|e| e.question_id.as_str().cmp(question_id))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }

    pub fn from_json_str(text: &str) -> serde_json::Result<Self> {
        let t: Transcript = serde_json::from_str(text)?;
        Ok(Self::from_entries(t.entries, t.capabilities))
    }

    /// JSON rendering without latencies, for comparing runs.
    pub fn content_json(&self) -> String {
        let mut clone = self.clone();
        for e in &mut clone.entries {
            e.latency_ms = 0.0;
        }
        serde_json::to_string(&clone).expect("transcript serializes")
    }
}

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("endpoint unreachable: {message} ({} of {} questions answered)", partial.len(), total)]
    Unreachable {
        message: String,
        partial: Transcript,
        total: usize,
    },
    #[error("parallelism must be at least 1")]
    ZeroParallelism,
}

enum CallOutcome {
    Reply(AdapterResponse),
    Malformed(String),
    TimedOut,
}

#[derive(Debug)]
struct Unreachable(String);

trait Session {
    fn call(&mut self, req: &AdapterRequest, timeout: Duration) -> Result<CallOutcome, Unreachable>;
    fn capabilities(&self) -> Option<Capabilities>;
}

struct InProcessSession {
    answerer: Arc<dyn Answerer>,
}

impl Session for InProcessSession {
    fn call(&mut self, req: &AdapterRequest, timeout: Duration) -> Result<CallOutcome, Unreachable> {
        let (tx, rx) = mpsc::channel();
        let answerer = Arc::clone(&self.answerer);
        let req = req.clone();
        // A stalled answerer leaves its thread behind; the reply is discarded.
        std::thread::spawn(move || {
            let _ = tx.send(answerer.respond(&req));
        });
        match rx.recv_timeout(timeout) {
            Ok(r) => Ok(CallOutcome::Reply(r)),
            Err(RecvTimeoutError::Timeout) => Ok(CallOutcome::TimedOut),
            Err(RecvTimeoutError::Disconnected) => Ok(CallOutcome::Malformed("answerer panicked".into())),
        }
    }

    fn capabilities(&self) -> Option<Capabilities> {
        self.answerer.capacity().map(|n| Capabilities { max_images: Some(n) })
    }
}

struct ChildProcess {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Drop for ChildProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

struct StdioSession {
    program: String,
    args: Vec<String>,
    retries: u32,
    process: Option<ChildProcess>,
    capabilities: Option<Capabilities>,
}

impl StdioSession {
    fn spawn(&mut self) -> Result<(), Unreachable> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Unreachable(format!("cannot spawn {}: {e}", self.program)))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        self.process = Some(ChildProcess {
            child,
            stdin,
            lines: rx,
        });
        Ok(())
    }

    fn attempt(&mut self, req: &AdapterRequest, timeout: Duration) -> Result<Option<CallOutcome>, Unreachable> {
        if self.process.is_none() {
            self.spawn()?;
        }
        let proc = self.process.as_mut().expect("spawned above");
        let line = req.to_line();
        if writeln!(proc.stdin, "{line}").and_then(|_| proc.stdin.flush()).is_err() {
            self.process = None;
            return Ok(None);
        }
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match proc.lines.recv_timeout(left) {
                Ok(text) => match AdapterLine::parse(&text) {
                    Ok(AdapterLine::Handshake(c)) => self.capabilities = Some(c),
                    Ok(AdapterLine::Response(r)) => {
                        if r.id.as_deref() == Some(req.id.as_str()) {
                            return Ok(Some(CallOutcome::Reply(r)));
                        }
                        log::warn!("discarding reply for {:?} while waiting on {}", r.id, req.id);
                    }
                    Err(e) => {
                        log::warn!("malformed adapter reply for {}: {e}", req.id);
                        return Ok(Some(CallOutcome::Malformed(format!("malformed reply: {e}"))));
                    }
                },
                Err(RecvTimeoutError::Timeout) => {
                    // the process may still be working on this request; start fresh
                    self.process = None;
                    return Ok(Some(CallOutcome::TimedOut));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    self.process = None;
                    return Ok(None);
                }
            }
        }
    }
}

impl Session for StdioSession {
    fn call(&mut self, req: &AdapterRequest, timeout: Duration) -> Result<CallOutcome, Unreachable> {
        for _ in 0..=self.retries {
            if let Some(outcome) = self.attempt(req, timeout)? {
                return Ok(outcome);
            }
        }
        Ok(CallOutcome::Malformed("adapter process exited".into()))
    }

    fn capabilities(&self) -> Option<Capabilities> {
        self.capabilities
    }
}

struct HttpSession {
    agent: ureq::Agent,
    url: String,
}

impl Session for HttpSession {
    fn call(&mut self, req: &AdapterRequest, _timeout: Duration) -> Result<CallOutcome, Unreachable> {
        match self.agent.post(&self.url).send_json(req) {
            Ok(resp) => match resp.into_json::<AdapterResponse>() {
                Ok(r) if r.id.as_deref() == Some(req.id.as_str()) => Ok(CallOutcome::Reply(r)),
                Ok(r) => Ok(CallOutcome::Malformed(format!("reply id {:?} does not match", r.id))),
                Err(e) => Ok(CallOutcome::Malformed(format!("malformed reply: {e}"))),
            },
            Err(ureq::Error::Status(code, resp)) => {
                // error bodies may still carry a protocol error object
                match resp.into_json::<AdapterResponse>() {
                    Ok(r) if r.error.is_some() => Ok(CallOutcome::Reply(r)),
                    _ => Ok(CallOutcome::Malformed(format!("HTTP status {code}"))),
                }
            }
            Err(ureq::Error::Transport(t)) => match t.kind() {
                ureq::ErrorKind::ConnectionFailed | ureq::ErrorKind::Dns | ureq::ErrorKind::InvalidUrl => {
                    Err(Unreachable(t.to_string()))
                }
                _ if t.to_string().contains("timed out") => Ok(CallOutcome::TimedOut),
                _ => Ok(CallOutcome::Malformed(t.to_string())),
            },
        }
    }

    fn capabilities(&self) -> Option<Capabilities> {
        None
    }
}

fn open_session(endpoint: &Endpoint, opts: &DispatchOptions) -> Box<dyn Session> {
    match endpoint {
        Endpoint::InProcess(a) => Box::new(InProcessSession {
            answerer: Arc::clone(a),
        }),
        Endpoint::Stdio { program, args } => Box::new(StdioSession {
            program: program.clone(),
            args: args.clone(),
            retries: opts.retries,
            process: None,
            capabilities: None,
        }),
        Endpoint::Http { url } => Box::new(HttpSession {
            agent: ureq::AgentBuilder::new().timeout(opts.timeout).build(),
            url: url.clone(),
        }),
    }
}

fn entry_from(req: &AdapterRequest, outcome: CallOutcome, latency: Duration) -> TranscriptEntry {
    match outcome {
        CallOutcome::Reply(r) => match (r.answer, r.error) {
            (_, Some(err)) => {
                let mut e = TranscriptEntry::noncompliant(&req.id, latency, err.clone());
                e.unevaluated = err == TOO_MANY_IMAGES;
                e
            }
            (Some(text), None) => {
                let v = normalize_answer(&text);
                TranscriptEntry {
                    question_id: req.id.clone(),
                    raw_text: v.raw_text,
                    normalized: v.normalized,
                    latency_ms: latency.as_secs_f64() * 1e3,
                    timed_out: false,
                    unevaluated: false,
                    error: None,
                }
            }
            (None, None) => {
                TranscriptEntry::noncompliant(&req.id, latency, "reply carries neither answer nor error".into())
            }
        },
        CallOutcome::Malformed(msg) => TranscriptEntry::noncompliant(&req.id, latency, msg),
        CallOutcome::TimedOut => {
            let mut e = TranscriptEntry::noncompliant(&req.id, latency, "timeout".into());
            e.timed_out = true;
            e
        }
    }
}

/// Send pre-built requests with up to `parallelism` in flight.
pub fn dispatch_requests(
    requests: &[AdapterRequest],
    endpoint: &Endpoint,
    opts: &DispatchOptions,
) -> Result<Transcript, DispatchError> {
    if opts.parallelism == 0 {
        return Err(DispatchError::ZeroParallelism);
    }
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let failure: Mutex<Option<String>> = Mutex::new(None);
    let results: Mutex<Vec<TranscriptEntry>> = Mutex::new(Vec::with_capacity(requests.len()));
    let caps: Mutex<Option<Capabilities>> = Mutex::new(None);
    let workers = opts.parallelism.min(requests.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let mut session = open_session(endpoint, opts);
                while !abort.load(Ordering::SeqCst) {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(req) = requests.get(i) else { break };
                    let start = Instant::now();
                    match session.call(req, opts.timeout) {
                        Ok(outcome) => {
                            let entry = entry_from(req, outcome, start.elapsed());
                            results.lock().expect("results lock").push(entry);
                        }
                        Err(Unreachable(msg)) => {
                            abort.store(true, Ordering::SeqCst);
                            failure.lock().expect("failure lock").get_or_insert(msg);
                            break;
                        }
                    }
                }
                if let Some(c) = session.capabilities() {
                    caps.lock().expect("caps lock").get_or_insert(c);
                }
            });
        }
    });

    let transcript = Transcript::from_entries(
        results.into_inner().expect("results lock"),
        caps.into_inner().expect("caps lock"),
    );
    match failure.into_inner().expect("failure lock") {
        Some(message) => Err(DispatchError::Unreachable {
            message,
            partial: transcript,
            total: requests.len(),
        }),
        None => Ok(transcript),
    }
}

/// Send every benchmark question to `endpoint`.
pub fn dispatch(
    benchmark: &BenchmarkSet,
    corpus: Option<&Corpus>,
    endpoint: &Endpoint,
    opts: &DispatchOptions,
) -> Result<Transcript, DispatchError> {
    let requests: Vec<AdapterRequest> = benchmark
        .specs
        .iter()
        .map(|s| AdapterRequest::from_spec(s, corpus))
        .collect();
    dispatch_requests(&requests, endpoint, opts)
}
