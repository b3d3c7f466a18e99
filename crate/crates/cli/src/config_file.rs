//! `--config FILE`: `key=value` lines spliced into the argument list.
//!
//! Each key names a long flag of the chosen subcommand (or a global flag).
//! File entries are inserted right after the subcommand, and a key is
//! dropped when the same flag also appears on the command line, so explicit
//! flags always win. Boolean flags take `true` or `false`.

use std::fs;

use clap::Command;

const GLOBALS_WITH_VALUES: [&str; 4] = ["--seed", "--out", "--config", "--threads"];

fn find_config_path(raw: &[String]) -> Option<String> {
    let mut it = raw.iter().skip(1);
    let mut found = None;
    while let Some(a) = it.next() {
        if a == "--" {
            break;
        }
        if let Some(v) = a.strip_prefix("--config=") {
            found = Some(v.to_string());
        } else if a == "--config" {
            found = it.next().cloned();
        }
    }
    found
}

fn subcommand_position(cmd: &Command, raw: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < raw.len() {
        let a = raw[i].as_str();
        if GLOBALS_WITH_VALUES.contains(&a) {
            i += 2;
            continue;
        }
        if cmd.find_subcommand(a).is_some() {
            return Some(i);
        }
        i += 1;
    }
    None
}

/// `(key, value)` pairs in file order.
pub type Entries = Vec<(String, String)>;

pub fn parse_entries(text: &str) -> Result<Entries, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value, got {line:?}", n + 1))?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(format!("config line {}: empty key", n + 1));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn user_has_flag(args: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    let prefix = format!("--{key}=");
    args.iter().any(|a| *a == flag || a.starts_with(&prefix))
}

/// Returns the argument vector with file entries spliced in, plus the
/// entries that were read (for echoing).
pub fn expand(cmd: &Command, raw: &[String]) -> Result<(Vec<String>, Entries), String> {
    let Some(path) = find_config_path(raw) else {
        return Ok((raw.to_vec(), Vec::new()));
    };
    let text =
        fs::read_to_string(&path).map_err(|e| format!("cannot read config file {path}: {e}"))?;
    let entries = parse_entries(&text)?;
    let Some(pos) = subcommand_position(cmd, raw) else {
        return Ok((raw.to_vec(), entries));
    };
    let sub = cmd
        .find_subcommand(&raw[pos])
        .expect("position found by name");

    let mut injected = Vec::new();
    for (key, value) in &entries {
        if key == "config" {
            continue;
        }
        let arg = sub
            .get_arguments()
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| format!("config file {path}: unknown key {key:?}"))?;
        if user_has_flag(raw, key) {
            continue;
        }
        if arg.get_action().takes_values() {
            injected.push(format!("--{key}"));
            injected.push(value.clone());
        } else {
            match value.as_str() {
                "true" | "1" | "yes" => injected.push(format!("--{key}")),
                "false" | "0" | "no" => {}
                other => {
                    return Err(format!(
                        "config file {path}: {key} expects true or false, got {other:?}"
                    ))
                }
            }
        }
    }
    let mut argv = raw[..=pos].to_vec();
    argv.extend(injected);
    argv.extend_from_slice(&raw[pos + 1..]);
    Ok((argv, entries))
}
