//! `key = value` configuration files. Each key names a long flag
//! (`samples = 4096`, `no_smoothing = true`); the resulting flags are spliced
//! in front of the command-line flags, and since every flag overrides earlier
//! occurrences of itself, the command line wins.

use std::ffi::OsString;
use std::path::Path;

use banzhaf_core::{Error, Result};

const SUBCOMMANDS: [&str; 6] = [
    "exact",
    "estimate",
    "cluster",
    "pipeline",
    "axioms",
    "train-surrogate",
];
const VALUED_GLOBALS: [&str; 6] = ["--seed", "--config", "--output", "-o", "--svg", "--format"];

/// Flags described by a config file, in file order.
pub fn parse_config(path: &Path, text: &str) -> Result<Vec<OsString>> {
    let mut flags = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: k as u64 + 1,
            message: format!("expected key = value, found '{line}'"),
        })?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key == "config" || key.starts_with('-') {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: k as u64 + 1,
                message: format!("invalid key '{key}'"),
            });
        }
        match value {
            "true" => flags.push(format!("--{key}").into()),
            "false" => {}
            _ => flags.push(format!("--{key}={value}").into()),
        }
    }
    Ok(flags)
}

/// Path given with `--config`, if any.
pub fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter().skip(1);
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

fn subcommand_position(argv: &[OsString]) -> Option<usize> {
    let mut k = 1;
    while k < argv.len() {
        let s = argv[k].to_string_lossy();
        if SUBCOMMANDS.contains(&s.as_ref()) {
            return Some(k);
        }
        k += if VALUED_GLOBALS.contains(&s.as_ref()) {
            2
        } else {
            1
        };
    }
    None
}

fn is_global(flag: &OsString) -> bool {
    let s = flag.to_string_lossy();
    ["--seed", "--output", "--svg", "--format"]
        .iter()
        .any(|g| s == *g || s.starts_with(&format!("{g}=")))
}

/// Inserts global `flags` right after the program name and the rest right
/// after the subcommand name, ahead of anything the user typed.
pub fn splice(argv: Vec<OsString>, flags: Vec<OsString>) -> Vec<OsString> {
    if flags.is_empty() || argv.is_empty() {
        return argv;
    }
    let (globals, local): (Vec<_>, Vec<_>) = flags.into_iter().partition(is_global);
    let pos = subcommand_position(&argv);
    let mut out = Vec::with_capacity(argv.len() + globals.len() + local.len());
    out.push(argv[0].clone());
    out.extend(globals);
    match pos {
        Some(pos) => {
            out.extend_from_slice(&argv[1..=pos]);
            out.extend(local);
            out.extend_from_slice(&argv[pos + 1..]);
        }
        None => out.extend_from_slice(&argv[1..]),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_keys_and_booleans() {
        let flags = parse_config(
            Path::new("c"),
            "# run\nsamples = 4096\nno_smoothing = true\nantithetic = false\ntau=0.02 # inline\n",
        )
        .unwrap();
        assert_eq!(
            flags,
            os(&["--samples=4096", "--no-smoothing", "--tau=0.02"])
        );
    }

    #[test]
    fn malformed_line_reports_its_number() {
        match parse_config(Path::new("c"), "seed = 1\noops\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn splices_after_subcommand() {
        let argv = os(&["banzhaf", "--seed", "3", "estimate", "--samples", "8"]);
        let out = splice(argv, os(&["--samples=99", "--seed=5"]));
        assert_eq!(
            out,
            os(&[
                "banzhaf",
                "--seed=5",
                "--seed",
                "3",
                "estimate",
                "--samples=99",
                "--samples",
                "8"
            ])
        );
    }

    #[test]
    fn finds_config_path() {
        assert_eq!(
            config_path(&os(&["b", "axioms", "--config", "x.cfg"])),
            Some("x.cfg".into())
        );
        assert_eq!(config_path(&os(&["b", "--config=y"])), Some("y".into()));
        assert_eq!(config_path(&os(&["b", "axioms"])), None);
    }
}
