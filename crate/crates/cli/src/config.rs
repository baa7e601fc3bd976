//! Flat `key = value` config files merged under the command line.

use std::ffi::OsString;
use std::path::Path;

use clap::{ArgAction, CommandFactory};

use crate::args::Cli;
use crate::CliError;

/// Reads a flat TOML table into `(flag, value)` pairs; `None` marks a
/// boolean switch that is on.
pub fn load(path: &Path) -> Result<Vec<(String, Option<String>)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table = text.parse().map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (key, value) in table {
        let flag = key.replace('_', "-");
        let text = match value {
            toml::Value::String(s) => s,
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(x) => x.to_string(),
            toml::Value::Boolean(b) => b.to_string(),
            toml::Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    toml::Value::String(s) => Ok(s.clone()),
                    toml::Value::Integer(i) => Ok(i.to_string()),
                    toml::Value::Float(x) => Ok(x.to_string()),
                    _ => Err(CliError::Usage(format!("config key {key}: arrays may hold numbers or strings only"))),
                })
                .collect::<Result<Vec<_>, _>>()?
                .join(","),
            _ => return Err(CliError::Usage(format!("config key {key}: nested tables are not allowed"))),
        };
        out.push((flag, Some(text)));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

/// Inserts the config file's settings right after the subcommand name, so
/// that flags given on the command line, which come later, override them.
/// Keys the subcommand does not know are ignored with a warning.
pub fn merge(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let entries = load(Path::new(&path))?;
    let cmd = Cli::command();
    let mut pos = None;
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if matches!(s.as_ref(), "--config" | "--output-dir" | "--threads") {
            i += 2;
            continue;
        }
        if cmd.find_subcommand(s.as_ref()).is_some() {
            pos = Some(i);
            break;
        }
        i += 1;
    }
    let Some(pos) = pos else {
        return Ok(args);
    };
    let sub = cmd.find_subcommand(args[pos].to_string_lossy().as_ref()).expect("found above");
    let mut inserted: Vec<OsString> = Vec::new();
    for (flag, value) in entries {
        if flag == "config" {
            continue;
        }
        // the environment overrides the config file, the flag overrides both
        if flag == "output-dir" && std::env::var_os(crate::commands::OUTPUT_DIR_ENV).is_some() {
            continue;
        }
        let arg = sub.get_arguments().chain(cmd.get_arguments()).find(|a| a.get_long() == Some(flag.as_str()));
        let Some(arg) = arg else {
            eprintln!("warning: config key {flag} is not an option of {}; ignored", sub.get_name());
            continue;
        };
        match arg.get_action() {
            ArgAction::SetTrue => {
                if value.as_deref() == Some("true") {
                    inserted.push(format!("--{flag}").into());
                }
            }
            _ => {
                inserted.push(format!("--{flag}").into());
                inserted.push(value.unwrap_or_default().into());
            }
        }
    }
    let mut out = args[..=pos].to_vec();
    out.extend(inserted);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}
