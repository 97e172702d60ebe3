//! `key=value` config files merged underneath the command line.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Command;

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key=value, got {raw:?}", i + 1);
        };
        let key = k.trim().trim_start_matches("--").to_string();
        if key.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Finds `--config PATH` or `--config=PATH` in raw arguments.
pub fn find_path(args: &[String]) -> Option<String> {
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

/// Inserts config entries right after the subcommand token so that flags
/// given explicitly later on the command line override them. Keys unknown to
/// the selected subcommand are ignored, so one file can serve several
/// subcommands.
pub fn merge(cmd: &Command, args: Vec<String>, path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let entries = parse(&text)?;
    let Some(pos) = args.iter().position(|a| cmd.find_subcommand(a).is_some()) else {
        return Ok(args);
    };
    let sub = cmd.find_subcommand(&args[pos]).expect("found above");
    let lookup = |key: &str| {
        sub.get_arguments()
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(key))
            .map(|a| a.get_action().takes_values())
    };
    let mut injected = Vec::new();
    for (key, value) in entries {
        if key == "config" {
            continue;
        }
        match lookup(&key) {
            Some(true) => {
                injected.push(format!("--{key}"));
                injected.push(value);
            }
            Some(false) => match value.as_str() {
                "true" | "1" | "yes" => injected.push(format!("--{key}")),
                "false" | "0" | "no" => {}
                other => bail!("config key {key}: expected a boolean, got {other:?}"),
            },
            None => log_skip(&key),
        }
    }
    let mut merged = args[..=pos].to_vec();
    merged.extend(injected);
    merged.extend_from_slice(&args[pos + 1..]);
    Ok(merged)
}

fn log_skip(key: &str) {
    eprintln!("config: ignoring key {key:?} not used by this subcommand");
}
