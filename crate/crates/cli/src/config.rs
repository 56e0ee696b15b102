//! `--config` files: one `key = value` per line, `#` comments.
//!
//! Keys are long flag names of the subcommand (`epochs = 30`,
//! `measures = compression,fft`). `true`/`false` toggle switch flags. The
//! pairs are spliced in right after the subcommand name, so flags given on
//! the command line, which come later, take precedence.

use std::ffi::OsString;
use std::path::PathBuf;

use crate::CliError;

pub fn parse(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("config line {}: expected key = value", n + 1)))?;
        let k = k.trim();
        if k.is_empty() || k == "config" || k.starts_with('-') {
            return Err(CliError::usage(format!("config line {}: invalid key `{k}`", n + 1)));
        }
        out.push((k.replace('_', "-"), v.trim().to_owned()));
    }
    Ok(out)
}

/// Removes `--config PATH` from `argv` and splices the file's flags in after
/// the subcommand.
pub fn expand_args(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut path: Option<PathBuf> = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        match a.to_str() {
            Some("--config") => {
                let p = it.next().ok_or_else(|| CliError::usage("--config needs a path"))?;
                path = Some(p.into());
            }
            Some(s) if s.starts_with("--config=") => path = Some(s["--config=".len()..].into()),
            _ => rest.push(a),
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let mut injected = Vec::new();
    for (k, v) in parse(&text)? {
        match v.as_str() {
            "true" => injected.push(format!("--{k}").into()),
            "false" => {}
            _ => {
                injected.push(format!("--{k}").into());
                injected.push(v.into());
            }
        }
    }
    // Subcommand is the first argument after the program that is not a flag.
    let at = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 2)
        .unwrap_or(rest.len());
    rest.splice(at..at, injected);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parse_pairs() {
        let p = parse("# c\nepochs = 3\n\nsubset_k=5\n").unwrap();
        assert_eq!(p, [("epochs".into(), "3".into()), ("subset-k".into(), "5".into())]);
        assert!(parse("oops\n").is_err());
    }

    #[test]
    fn splice_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "seed = 4\nverbose = true\nquiet = false\n").unwrap();
        let argv = os(&["shapecx", "--config", cfg.to_str().unwrap(), "train", "data", "--seed", "9"]);
        let out = expand_args(argv).unwrap();
        assert_eq!(out, os(&["shapecx", "train", "--seed", "4", "--verbose", "data", "--seed", "9"]));
    }
}
