//! `--config FILE` support.
//!
//! A config file holds `key = value` lines whose keys are long flag names
//! without the leading dashes. Its entries are spliced into the argument list
//! right after the subcommand, so flags given on the command line win. Run
//! manifests use the same format; their bookkeeping keys are skipped.

use std::ffi::OsString;

/// Manifest keys that describe a run rather than configure it.
pub const RESERVED_KEYS: [&str; 4] = ["command", "tool_version", "duration_ms", "output"];

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value", i + 1))?;
        let key = k.trim();
        if RESERVED_KEYS.contains(&key) {
            continue;
        }
        out.push((key.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Replaces every `--config FILE` (or `--config=FILE`) with the file's flags.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut plain = Vec::with_capacity(args.len());
    let mut files = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        match arg.to_str() {
            Some("--config") => files.push(it.next().ok_or("--config needs a file")?),
            Some(s) if s.starts_with("--config=") => files.push(OsString::from(&s["--config=".len()..])),
            _ => plain.push(arg),
        }
    }
    if files.is_empty() {
        return Ok(plain);
    }
    // program name and subcommand come first
    let split = plain.len().min(2);
    let mut out: Vec<OsString> = plain[..split].to_vec();
    for file in files {
        let text = std::fs::read_to_string(&file)
            .map_err(|e| format!("cannot read config {}: {e}", file.to_string_lossy()))?;
        for (k, v) in parse_config(&text)? {
            out.push(OsString::from(format!("--{k}={v}")));
        }
    }
    out.extend_from_slice(&plain[split..]);
    Ok(out)
}
