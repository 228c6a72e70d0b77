//! `key=value` run configuration files.
//!
//! Keys are the long flag names of the selected subcommand (or of the global
//! flags). Values from the file fill in every flag that was not given on the
//! command line, so the precedence is flags, then file, then defaults.

use std::ffi::OsString;
use std::path::Path;

use cindex_core::{Error, Result};
use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Command};

pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            row: idx + 1,
            column: String::new(),
            message: format!("expected key=value, got '{line}'"),
        })?;
        entries.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(entries)
}

pub fn load(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text)
}

/// Extra argv entries supplying config-file values for flags that `matches`
/// did not receive on the command line.
///
/// Unknown keys are usage errors.
pub fn merge_args(
    command: &Command,
    matches: &ArgMatches,
    entries: &[(String, String)],
) -> Result<(Vec<OsString>, Vec<OsString>)> {
    let (sub_name, sub_matches) = matches
        .subcommand()
        .ok_or_else(|| Error::InvalidParameter("missing subcommand".into()))?;
    let sub = command
        .find_subcommand(sub_name)
        .expect("matched subcommand exists");
    let mut global = Vec::new();
    let mut local = Vec::new();
    for (key, value) in entries {
        if key == "config" {
            return Err(Error::InvalidParameter("config files cannot nest".into()));
        }
        let (arg, arg_matches, target) = match sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
        {
            Some(a) if !a.is_global_set() => (a, sub_matches, &mut local),
            _ => match command
                .get_arguments()
                .find(|a| a.get_long() == Some(key.as_str()))
            {
                Some(a) => (a, matches, &mut global),
                None => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown config key '{key}' for '{sub_name}'"
                    )))
                }
            },
        };
        let id = arg.get_id().as_str();
        if arg_matches.value_source(id) == Some(ValueSource::CommandLine) {
            continue;
        }
        let flag = OsString::from(format!("--{key}"));
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" | "1" | "yes" => target.push(flag),
                "false" | "0" | "no" => {}
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "config key '{key}' expects true or false, got '{other}'"
                    )))
                }
            },
            _ => {
                target.push(flag);
                target.push(value.into());
            }
        }
    }
    Ok((global, local))
}
