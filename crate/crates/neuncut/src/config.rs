//! `--config` files: newline-delimited `key=value` pairs naming long flags
//! of the chosen subcommand. Blank lines and lines starting with `#` are
//! ignored. Flags given explicitly on the command line win.

use std::path::Path;

use clap::{ArgAction, Command};

use crate::error::{Error, ParseError, Result};
use crate::io::read_text;

pub fn parse_pairs(text: &str, path: &Path) -> Result<Vec<(usize, String, String)>> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ParseError {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("expected key=value, found {line:?}"),
        })?;
        pairs.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

/// Converts config pairs into flags understood by `sub`.
pub fn pairs_to_args(pairs: &[(usize, String, String)], sub: &Command, path: &Path) -> Result<Vec<String>> {
    let mut args = Vec::new();
    for (line, key, value) in pairs {
        let err = |message: String| -> Error { ParseError { path: path.to_path_buf(), line: *line, message }.into() };
        if key == "config" {
            return Err(err("config files cannot include other config files".into()));
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| err(format!("unknown key {key:?} for `{}`", sub.get_name())))?;
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value.as_str() {
                "true" | "1" | "yes" => args.push(format!("--{key}")),
                "false" | "0" | "no" => {}
                other => return Err(err(format!("{key} expects true or false, got {other:?}"))),
            }
        } else {
            args.push(format!("--{key}={value}"));
        }
    }
    Ok(args)
}

/// Splices flags from a `--config` file (if any) in front of the
/// subcommand's own arguments.
pub fn expand_argv(argv: Vec<String>, root: &Command) -> Result<Vec<String>> {
    let Some(sub_name) = argv.get(1) else { return Ok(argv) };
    let Some(sub) = root.find_subcommand(sub_name) else { return Ok(argv) };
    let mut config = None;
    let mut i = 2;
    while i < argv.len() {
        if argv[i] == "--" {
            break;
        }
        if let Some(v) = argv[i].strip_prefix("--config=") {
            config = Some(v.to_string());
        } else if argv[i] == "--config" {
            config = Some(argv.get(i + 1).cloned().ok_or_else(|| Error::Usage("--config needs a path".into()))?);
            i += 1;
        }
        i += 1;
    }
    let Some(config) = config else { return Ok(argv) };
    let path = Path::new(&config);
    let pairs = parse_pairs(&read_text(path)?, path)?;
    let injected = pairs_to_args(&pairs, sub, path)?;
    let mut out = argv[..2].to_vec();
    out.extend(injected);
    out.extend_from_slice(&argv[2..]);
    Ok(out)
}
