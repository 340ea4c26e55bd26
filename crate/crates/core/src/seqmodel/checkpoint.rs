//! Checkpoint files: `key=value` header lines, one empty line, then the
//! binary parameter blob.

use std::io::{BufRead, BufReader, Read, Write};

use crate::diffcore::{read_params, write_params, ParamStore};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: Vec<(String, String)>,
    pub params: ParamStore,
}

impl Checkpoint {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

pub fn write_checkpoint<W: Write>(ckpt: &Checkpoint, mut out: W) -> Result<()> {
    for (k, v) in &ckpt.header {
        if k.contains('=') || k.contains('\n') || v.contains('\n') {
            return Err(Error::format("checkpoint header", format!("unencodable pair {k}={v}")));
        }
        writeln!(out, "{k}={v}")?;
    }
    writeln!(out)?;
    write_params(&ckpt.params, &mut out)
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<Checkpoint> {
    let mut reader = BufReader::new(input);
    let mut header = Vec::new();
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::format("checkpoint", "missing parameter section"));
        }
        let line = line.trim_end_matches('\n');
        if line.is_empty() {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format("checkpoint header", format!("no `=` in `{line}`")))?;
        header.push((k.to_string(), v.to_string()));
    }
    let params = read_params(reader)?;
    Ok(Checkpoint { header, params })
}
