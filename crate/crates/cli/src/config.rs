use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use serde::de::DeserializeOwned;
use serde_json::Value;
use structinfer::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Usage,
    Data,
    Convergence,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Usage => "usage",
            Kind::Data => "data",
            Kind::Convergence => "convergence",
        }
    }

    fn code(self) -> u8 {
        match self {
            Kind::Usage => 1,
            Kind::Data => 2,
            Kind::Convergence => 3,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Usage,
            msg: msg.into(),
        }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Data,
            msg: msg.into(),
        }
    }

    pub fn convergence(msg: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Convergence,
            msg: msg.into(),
        }
    }

    /// Prints the one-line diagnostic and returns the exit code.
    pub fn report(&self) -> ExitCode {
        eprintln!("{self}");
        ExitCode::from(self.kind.code())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = serde_json::to_string(&self.msg).expect("strings serialise");
        write!(f, "error: kind={} msg={}", self.kind.name(), msg)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match root(&e) {
            Error::InvalidParameter(_) | Error::NotAllowed { .. } => Kind::Usage,
            _ => Kind::Data,
        };
        CliError { kind, msg: e.to_string() }
    }
}

fn root(e: &Error) -> &Error {
    match e {
        Error::AtCoordinate { source, .. } => root(source),
        other => other,
    }
}

pub fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::data(format!("{}: {e}", path.display()))
}

/// Reads a JSON config, applies `key=value` overrides (dotted keys reach
/// into nested objects) and deserialises the result.
pub fn load<T: DeserializeOwned>(path: &Path, overrides: &[String]) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("config {} is not valid JSON: {e}", path.display())))?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    serde_json::from_value(value).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
}

pub fn apply_override(root: &mut Value, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("override {spec:?} is not of the form key=value")))?;
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::usage(format!("override key {key:?} is malformed")));
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        if !node.is_object() {
            return Err(CliError::usage(format!("override key {key:?} does not address an object")));
        }
        node = node
            .as_object_mut()
            .expect("checked above")
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    match node.as_object_mut() {
        Some(obj) => {
            obj.insert(parts[parts.len() - 1].to_string(), parsed);
            Ok(())
        }
        None => Err(CliError::usage(format!("override key {key:?} does not address an object"))),
    }
}
