//! Config-file layering: a value from the file is used only where neither
//! the command line nor the environment supplied one.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{CommandFactory, FromArgMatches};

use crate::args::Cli;

pub enum ParseError {
    Clap(clap::Error),
    Config(anyhow::Error),
}

pub fn parse() -> Result<Cli, ParseError> {
    parse_from(std::env::args_os().collect())
}

pub fn parse_from(mut argv: Vec<OsString>) -> Result<Cli, ParseError> {
    if let (Some(path), Some(sub)) = (config_path(&argv), subcommand_name(&argv)) {
        let extra = file_args(&path, &sub, &argv).map_err(ParseError::Config)?;
        argv.extend(extra);
    }
    let matches = Cli::command().try_get_matches_from(&argv).map_err(ParseError::Clap)?;
    Cli::from_arg_matches(&matches).map_err(ParseError::Clap)
}

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let args: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    for (i, a) in args.iter().enumerate() {
        if a == "--config" {
            return args.get(i + 1).map(PathBuf::from);
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    std::env::var_os("PULSEFLOW_CONFIG").map(PathBuf::from)
}

fn subcommand_name(argv: &[OsString]) -> Option<String> {
    let cmd = Cli::command();
    argv.iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .find(|a| cmd.find_subcommand(a).is_some())
}

/// Whether the command line or the environment already sets `id`.
fn given(id: &str, argv: &[OsString], env: Option<&str>) -> bool {
    let flag = format!("--{}", id.replace('_', "-"));
    let on_line = argv.iter().any(|a| {
        let a = a.to_string_lossy();
        a == flag || a.starts_with(&format!("{flag}="))
    });
    on_line || env.is_some_and(|e| std::env::var_os(e).is_some())
}

/// Flags contributed by the file's `[subcommand]` table.
fn file_args(path: &Path, subcommand: &str, argv: &[OsString]) -> anyhow::Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let doc: toml::Table = text.parse().with_context(|| format!("parsing config {}", path.display()))?;
    let Some(section) = doc.get(subcommand) else {
        return Ok(Vec::new());
    };
    let table = section
        .as_table()
        .ok_or_else(|| anyhow!("config entry `{subcommand}` must be a table"))?;
    let cmd = Cli::command();
    let known: Vec<(String, Option<String>)> = cmd
        .find_subcommand(subcommand)
        .expect("known subcommand")
        .get_arguments()
        .map(|a| (a.get_id().to_string(), a.get_env().map(|e| e.to_string_lossy().into_owned())))
        .collect();
    let mut out = Vec::new();
    for (key, value) in table {
        let id = key.replace('-', "_");
        let Some((_, env)) = known.iter().find(|(k, _)| *k == id) else {
            bail!("config key `{subcommand}.{key}` is not a flag of `{subcommand}`");
        };
        if given(&id, argv, env.as_deref()) {
            continue;
        }
        let flag = format!("--{}", id.replace('_', "-"));
        match value {
            toml::Value::Boolean(true) => out.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::String(s) => out.extend([flag.into(), s.into()]),
            toml::Value::Integer(i) => out.extend([flag.into(), i.to_string().into()]),
            toml::Value::Float(f) => out.extend([flag.into(), f.to_string().into()]),
            toml::Value::Array(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|v| match v {
                        toml::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                out.extend([flag.into(), parts.join(",").into()]);
            }
            other => bail!("config key `{subcommand}.{key}` has unsupported value {other}"),
        }
    }
    Ok(out)
}
