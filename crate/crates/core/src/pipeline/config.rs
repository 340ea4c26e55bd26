//! `key=value` settings with layered sources and run manifests.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Parses `key=value` lines. Blank lines and lines starting with `#` are
/// ignored; later duplicates win.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format("config", format!("line {}: expected key=value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Fully resolved settings of one command.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Settings {
    command: String,
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Defaults, then the config file, then flags. Keys outside `defaults`
    /// are rejected; a `command` key in the file must match `command`.
    pub fn resolve(
        command: &str,
        defaults: &[(&str, &str)],
        file: Option<&Path>,
        flags: &[(&str, Option<String>)],
    ) -> Result<Self> {
        let mut values: BTreeMap<String, String> =
            defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
                _ => Error::Io(e),
            })?;
            for (k, v) in parse_pairs(&text)? {
                if k == "command" {
                    if v != command {
                        return Err(Error::Config(format!(
                            "{} is for `{v}`, not `{command}`",
                            path.display()
                        )));
                    }
                    continue;
                }
                match values.get_mut(&k) {
                    Some(slot) => *slot = v,
                    None => return Err(Error::Config(format!("unknown key `{k}` in {}", path.display()))),
                }
            }
        }
        for (k, v) in flags {
            if let Some(v) = v {
                match values.get_mut(*k) {
                    Some(slot) => *slot = v.clone(),
                    None => return Err(Error::Config(format!("unknown setting `{k}`"))),
                }
            }
        }
        Ok(Self {
            command: command.to_string(),
            values,
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    pub fn raw(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Config(format!("unknown setting `{key}`")))
    }

    /// A value that must be given, e.g. an input path.
    pub fn required(&self, key: &str) -> Result<&str> {
        match self.raw(key)? {
            "" => Err(Error::Config(format!("missing --{}", key.replace('_', "-")))),
            v => Ok(v),
        }
    }

    pub fn get<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.raw(key)?;
        raw.parse()
            .map_err(|e| Error::Config(format!("bad value `{raw}` for {key}: {e}")))
    }

    /// Comma-separated list; empty means no entries.
    pub fn list<T>(&self, key: &str) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.raw(key)?;
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|e| Error::Config(format!("bad entry `{s}` in {key}: {e}")))
            })
            .collect()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    /// `command=...` followed by every resolved value, one per line.
    pub fn manifest(&self) -> String {
        let mut s = format!("command={}\n", self.command);
        for (k, v) in &self.values {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }

    /// The command a manifest was written for.
    pub fn manifest_command(text: &str) -> Result<String> {
        parse_pairs(text)?
            .into_iter()
            .find(|(k, _)| k == "command")
            .map(|(_, v)| v)
            .ok_or_else(|| Error::Config("manifest has no command line".into()))
    }
}
