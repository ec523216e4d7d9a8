//! Out-of-process backends and the system clock.

use std::io::{self, BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use mrkl_core::experts::{CivilDate, Clock, CompletionBackend, FixedClock, TransportError};
use mrkl_core::extractor::wire::{decode_reply, encode_request};
use mrkl_core::extractor::{ExtractError, Extraction, Extractor};

struct Channel {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// A shell command speaking the one-line-per-request protocol on its
/// stdin/stdout. Requests are serialized: one exchange at a time.
///
/// There is no read timeout; a backend that never answers blocks the caller.
pub struct ProcessBackend {
    name: String,
    command: String,
    channel: Mutex<Channel>,
}

impl ProcessBackend {
    pub fn spawn(name: &str, command: &str) -> io::Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ProcessBackend {
            name: name.to_string(),
            command: command.to_string(),
            channel: Mutex::new(Channel { child, stdin, stdout }),
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    /// Sends one request line and returns the reply without its line break.
    pub fn exchange(&self, text: &str) -> Result<String, String> {
        let mut ch = self.channel.lock().map_err(|_| "backend channel poisoned".to_string())?;
        let request = encode_request(text);
        writeln!(ch.stdin, "{request}")
            .and_then(|_| ch.stdin.flush())
            .map_err(|e| format!("backend `{}`: write failed: {e}", self.name))?;
        let mut line = String::new();
        match ch.stdout.read_line(&mut line) {
            Ok(0) => Err(format!("backend `{}` closed its output", self.name)),
            Ok(_) => Ok(line.trim_end_matches(['\n', '\r']).to_string()),
            Err(e) => Err(format!("backend `{}`: read failed: {e}", self.name)),
        }
    }
}

impl Drop for ProcessBackend {
    fn drop(&mut self) {
        if let Ok(ch) = self.channel.get_mut() {
            let _ = ch.child.kill();
            let _ = ch.child.wait();
        }
    }
}

impl Extractor for ProcessBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn extract(&self, text: &str) -> Result<Extraction, ExtractError> {
        decode_reply(&self.exchange(text).map_err(ExtractError::Transport)?)
    }
}

impl CompletionBackend for ProcessBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, text: &str) -> Result<String, TransportError> {
        self.exchange(text).map_err(TransportError)
    }
}

/// Local calendar date from the operating system.
#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn today(&self) -> CivilDate {
        use chrono::Datelike;
        let d = chrono::Local::now().date_naive();
        CivilDate::new(d.year(), d.month() as u8, d.day() as u8).expect("chrono dates are valid")
    }
}

/// Either a pinned date or the system clock.
#[derive(Debug, Clone, Copy)]
pub enum AnyClock {
    Fixed(FixedClock),
    System(SystemClock),
}

impl Clock for AnyClock {
    fn today(&self) -> CivilDate {
        match self {
            AnyClock::Fixed(c) => c.today(),
            AnyClock::System(c) => c.today(),
        }
    }
}
