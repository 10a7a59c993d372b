//! `--config` support: values from a JSON object are appended to the argument
//! list as long flags, unless the flag is already on the command line.

use std::fs;

use anyhow::{bail, Context, Result};
use clap::CommandFactory;
use serde_json::Value;

use crate::args::Cli;

fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

/// Long and short names accepted by the subcommand that `argv` selects,
/// including global flags.
fn accepted_flags(argv: &[String]) -> Vec<(String, Option<char>, bool)> {
    let root = Cli::command();
    let mut flags: Vec<(String, Option<char>, bool)> = Vec::new();
    let mut push = |cmd: &clap::Command| {
        for a in cmd.get_arguments() {
            if let Some(long) = a.get_long() {
                let takes_value = a.get_action().takes_values();
                flags.push((long.to_string(), a.get_short(), takes_value));
            }
        }
    };
    push(&root);
    let mut current = root.clone();
    for token in argv.iter().skip(1).filter(|t| !t.starts_with('-')) {
        let Some(sub) = current.find_subcommand(token).cloned() else {
            continue;
        };
        push(&sub);
        current = sub;
    }
    flags
}

fn present(argv: &[String], long: &str, short: Option<char>) -> bool {
    let flag = format!("--{long}");
    let with_value = format!("--{long}=");
    argv.iter().any(|a| {
        a == &flag || a.starts_with(&with_value) || short.is_some_and(|s| a == &format!("-{s}"))
    })
}

fn scalar(key: &str, v: &Value) -> Result<String> {
    Ok(match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Array(items) => items
            .iter()
            .map(|i| scalar(key, i))
            .collect::<Result<Vec<_>>>()?
            .join(","),
        _ => bail!("config key {key}: unsupported value {v}"),
    })
}

pub fn apply(argv: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let json: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {path}"))?;
    let Value::Object(map) = json else {
        bail!("config {path} must hold a JSON object");
    };
    let accepted = accepted_flags(&argv);
    let mut out = argv.clone();
    for (key, value) in map {
        let long = key.replace('_', "-");
        if long == "config" {
            continue;
        }
        let Some((_, short, takes_value)) = accepted.iter().find(|(l, ..)| *l == long) else {
            log::warn!("config key {key} does not apply to this command");
            continue;
        };
        if present(&argv, &long, *short) || value.is_null() {
            continue;
        }
        if *takes_value {
            out.push(format!("--{long}"));
            out.push(scalar(&key, &value)?);
        } else if value == Value::Bool(true) {
            out.push(format!("--{long}"));
        }
    }
    Ok(out)
}
