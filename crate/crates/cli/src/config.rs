//! `--config` files: flat `key = value` lines with `#` comments.
//!
//! The file is expanded into `--key value` flags inserted directly after the
//! subcommand, so anything given on the command line later overrides it.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fs;
use std::path::Path;

use clap::{ArgAction, CommandFactory};

use crate::args::Cli;

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return iter.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

/// Parses the file body into `(line, key, value)` triples.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>, String> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value, got '{line}'", n + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(format!("line {}: empty key or value", n + 1));
        }
        if !seen.insert(key.clone()) {
            return Err(format!("line {}: duplicate key '{key}'", n + 1));
        }
        out.push((n + 1, key, value));
    }
    Ok(out)
}

/// Returns `args` with the config file's settings spliced in after the subcommand.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
    let pairs = parse_pairs(&text).map_err(|e| format!("{}: {e}", path.display()))?;

    let command = Cli::command();
    let Some((position, sub)) = args.iter().enumerate().skip(1).find_map(|(i, a)| {
        command
            .find_subcommand(a.to_string_lossy().as_ref())
            .map(|s| (i, s))
    }) else {
        // Let clap report the missing subcommand.
        return Ok(args);
    };

    let mut injected = Vec::new();
    for (line, key, value) in pairs {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && key != "config" && key != "help")
            .ok_or_else(|| {
                format!(
                    "{}: line {line}: unknown key '{key}' for '{}'",
                    path.display(),
                    sub.get_name()
                )
            })?;
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value.as_str() {
                "true" => injected.push(format!("--{key}").into()),
                "false" => {}
                _ => {
                    return Err(format!(
                        "{}: line {line}: '{key}' expects true or false, got '{value}'",
                        path.display()
                    ))
                }
            }
        } else {
            injected.push(format!("--{key}").into());
            injected.push(value.into());
        }
    }
    let mut out = args[..=position].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[position + 1..]);
    Ok(out)
}
