//! Trace, config and checkpoint files.

use std::fs;
use std::path::{Path, PathBuf};

use lachesis_core::trace::{BugTrace, TraceFile};
use serde::Serialize;
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::error::CliError;

/// Reads and validates a trace file. Record-level problems name the bug.
pub fn ingest(path: &Path) -> Result<TraceFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_traces(&text).map_err(|e| e.with_path(path))
}

pub fn parse_traces(text: &str) -> Result<TraceFile, CliError> {
    let root: Value = serde_json::from_str(text).map_err(|e| CliError::Data(format!("not valid JSON: {e}")))?;
    let Value::Object(mut top) = root else {
        return Err(CliError::Data("top level must be a JSON object".into()));
    };
    let header_field = |top: &serde_json::Map<String, Value>, key: &str| -> Result<usize, CliError> {
        top.get(key)
            .and_then(Value::as_u64)
            .map(|v| v as usize)
            .ok_or_else(|| CliError::Data(format!("header field `{key}` must be a non-negative integer")))
    };
    let runs_per_bug = header_field(&top, "R")?;
    let max_steps = header_field(&top, "N")?;
    let functions = serde_json::from_value(top.remove("functions").unwrap_or(Value::Null))
        .map_err(|e| CliError::Data(format!("header field `functions`: {e}")))?;
    let Some(Value::Array(raw_bugs)) = top.remove("bugs") else {
        return Err(CliError::Data("header field `bugs` must be an array".into()));
    };
    if let Some(extra) = top.keys().find(|k| !matches!(k.as_str(), "R" | "N")) {
        return Err(CliError::Data(format!("unknown top-level field `{extra}`")));
    }

    let mut bugs = Vec::with_capacity(raw_bugs.len());
    for (i, raw) in raw_bugs.into_iter().enumerate() {
        let id = raw
            .get("bug_id")
            .and_then(Value::as_str)
            .map_or_else(|| format!("#{i}"), str::to_owned);
        let bug: BugTrace = serde_json::from_value(raw).map_err(|e| CliError::Data(format!("bug `{id}`: {e}")))?;
        bugs.push(bug);
    }
    let file = TraceFile {
        runs_per_bug,
        max_steps,
        functions,
        bugs,
    };
    file.validate()?;
    Ok(file)
}

pub fn traces_to_string(file: &TraceFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("trace files always serialize");
    s.push('\n');
    s
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports always serialize");
    s.push('\n');
    s
}

pub fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "R": 2, "N": 10,
        "functions": {"get_code_snippet": 2},
        "bugs": [{
            "bug_id": "Lang-48", "dataset": "defects4j", "ground_truth": "a.B.c()",
            "runs": [
                {"steps": [{"function": 2, "argument": "a.B.c()", "resolved": true}], "answer": ["a.B.c()"]},
                {"steps": [{"function": 0, "argument": null, "resolved": true}], "answer": []}
            ]
        }]
    }"#;

    #[test]
    fn minimal_record() {
        let file = parse_traces(MINIMAL).unwrap();
        assert_eq!(file.bugs.len(), 1);
        assert_eq!(file.bugs[0].runs.len(), 2);
        assert_eq!(parse_traces(&traces_to_string(&file)).unwrap(), file);
    }

    #[test]
    fn malformed_record_names_bug_and_field() {
        let broken = MINIMAL.replace("\"ground_truth\": \"a.B.c()\",", "");
        let err = parse_traces(&broken).unwrap_err().to_string();
        assert!(err.contains("Lang-48") && err.contains("ground_truth"), "{err}");

        let bad_type = MINIMAL.replace("\"function\": 2", "\"function\": 7");
        let err = parse_traces(&bad_type).unwrap_err().to_string();
        assert!(err.contains("Lang-48") && err.contains("function"), "{err}");

        let short = MINIMAL.replace("\"R\": 2", "\"R\": 3");
        let err = parse_traces(&short).unwrap_err().to_string();
        assert!(err.contains("Lang-48") && err.contains("runs"), "{err}");

        assert!(parse_traces("[]").is_err());
        assert!(parse_traces(&MINIMAL.replace("\"N\": 10", "\"N\": -1")).is_err());
    }
}
