//! Joint-table CSV: header `s,shat,p`, one row per nonzero cell, bitstrings
//! with receiver 1 first. Omitted cells are zero.

use std::io::{Read, Write};
use std::path::Path;

use super::joint::{state_string, Diagnostic, JointStateTable};
use crate::error::{Error, Result};

/// Reads a joint table from `path`.
pub fn load_joint(path: impl AsRef<Path>, allow_marginal_mismatch: bool) -> Result<(JointStateTable, Vec<Diagnostic>)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_joint(file, allow_marginal_mismatch)
}

pub fn read_joint(reader: impl Read, allow_marginal_mismatch: bool) -> Result<(JointStateTable, Vec<Diagnostic>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(1, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["s", "shat", "p"] {
        return Err(Error::Parse {
            line: 1,
            msg: format!(
                "expected header `s,shat,p`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut rows = Vec::new();
    let mut k = None;
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(line, e))?;
        if rec.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 3 fields, found {}", rec.len()),
            });
        }
        let s = parse_bits(&rec[0], line)?;
        let shat = parse_bits(&rec[1], line)?;
        let width = *k.get_or_insert(s.1);
        if s.1 != width || shat.1 != width {
            return Err(Error::Parse {
                line,
                msg: format!("bitstrings must all have length {width}"),
            });
        }
        let p: f64 = rec[2].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("invalid probability `{}`", &rec[2]),
        })?;
        rows.push((line, s.0, shat.0, p));
    }

    let k = k.ok_or(Error::Parse {
        line: 1,
        msg: "no rows".into(),
    })?;
    if k > 16 {
        return Err(Error::SizeLimit { k, min: 1, max: 16 });
    }
    let n = 1usize << k;
    let mut probs = vec![0.0; n * n];
    let mut seen = vec![false; n * n];
    for (line, s, shat, p) in rows {
        let idx = s * n + shat;
        if std::mem::replace(&mut seen[idx], true) {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate cell ({}, {})", state_string(s, k), state_string(shat, k)),
            });
        }
        probs[idx] = p;
    }
    JointStateTable::with_override(k, probs, allow_marginal_mismatch)
}

/// Writes every nonzero cell with round-trip precision.
pub fn write_joint(joint: &JointStateTable, writer: impl Write) -> Result<()> {
    let k = joint.num_receivers();
    let n = joint.num_states();
    let mut wtr = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Parse {
        line: 0,
        msg: e.to_string(),
    };
    wtr.write_record(["s", "shat", "p"]).map_err(io)?;
    for s in 0..n {
        for t in 0..n {
            let p = joint.p(s, t);
            if p != 0.0 {
                wtr.write_record([state_string(s, k), state_string(t, k), format!("{p:?}")])
                    .map_err(io)?;
            }
        }
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "<joint>".into(),
        source,
    })?;
    Ok(())
}

fn parse_bits(field: &str, line: usize) -> Result<(usize, usize)> {
    if field.is_empty() || field.len() > 16 || !field.bytes().all(|b| b == b'0' || b == b'1') {
        return Err(Error::Parse {
            line,
            msg: format!("invalid state bitstring `{field}`"),
        });
    }
    Ok((usize::from_str_radix(field, 2).expect("checked"), field.len()))
}

fn parse_err(line: usize, e: csv::Error) -> Error {
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}
