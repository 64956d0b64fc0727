use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use super::Implication;

/// An SMT-LIB v2 solver reading a script on stdin, e.g. `z3 -in`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmtBridge {
    pub program: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
}

impl SmtBridge {
    pub fn new(program: impl Into<PathBuf>, args: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            program: program.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    /// Runs a query asserting `p && !q`.
    pub(crate) fn run(&self, script: &str, timeout: Duration) -> Implication {
        let unknown = |reason: String| Implication::Unknown { reason };
        let mut child = match Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
        {
            Ok(c) => c,
            Err(e) => return unknown(format!("cannot start {}: {e}", self.program.display())),
        };
        let mut stdin = child.stdin.take().expect("piped stdin");
        let script = script.to_string();
        let writer = std::thread::spawn(move || stdin.write_all(script.as_bytes()));
        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stdout.read_to_string(&mut s);
            s
        });
        match child.wait_timeout(timeout) {
            Ok(Some(_)) => {}
            Ok(None) => {
                let _ = child.kill();
                let _ = child.wait();
                return unknown("timeout".into());
            }
            Err(e) => return unknown(e.to_string()),
        }
        let _ = writer.join();
        let out = reader.join().unwrap_or_default();
        match out.lines().map(str::trim).find(|l| !l.is_empty()) {
            Some("unsat") => Implication::Proven,
            Some("sat") => Implication::Disproven { witness: None },
            Some(other) => unknown(format!("solver answered `{other}`")),
            None => unknown("solver gave no answer".into()),
        }
    }
}
