//! Flat `key = value` config files. Each key is a long flag of the chosen
//! subcommand; the file's values are spliced in ahead of the command line so
//! explicit flags win.

use std::fs;
use std::path::Path;

use clap::Command;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse(text: &str) -> Result<Vec<Entry>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split_once('#').map_or(raw, |(a, _)| a).trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        out.push(Entry { key, value: v.trim().to_string(), line: i + 1 });
    }
    Ok(out)
}

/// Finds `--config PATH` or `--config=PATH` anywhere in `args`.
pub fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Rewrites `args` with the config file's entries inserted right after the
/// subcommand name.
pub fn splice(args: Vec<String>, cmd: &Command) -> Result<Vec<String>, String> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let Some(pos) = args.iter().position(|a| cmd.find_subcommand(a).is_some()) else {
        return Ok(args);
    };
    let sub = cmd.find_subcommand(&args[pos]).expect("just found");
    let text = fs::read_to_string(Path::new(&path)).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let mut injected = Vec::new();
    for e in parse(&text).map_err(|m| format!("{path}: {m}"))? {
        if e.key == "config" {
            return Err(format!("{path}: line {}: config files cannot nest", e.line));
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(e.key.as_str()))
            .ok_or_else(|| format!("{path}: line {}: unknown key '{}' for {}", e.line, e.key, sub.get_name()))?;
        if arg.get_action().takes_values() {
            injected.push(format!("--{}={}", e.key, e.value));
        } else {
            match e.value.as_str() {
                "true" | "yes" | "1" => injected.push(format!("--{}", e.key)),
                "false" | "no" | "0" => {}
                v => return Err(format!("{path}: line {}: '{}' expects true or false, got '{v}'", e.line, e.key)),
            }
        }
    }
    let mut out = args[..=pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}
