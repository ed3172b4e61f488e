//! Canonical text form of databases and labeled samples.
//!
//! ```text
//! d=4,labeled
//! 3,1
//! 12,0
//! ```
//!
//! The header gives the bit-width (and `labeled` for samples); each following line holds one
//! decimal entry, with `,label` for samples. Blank lines and `#` comments are ignored.

use crate::domain::{Database, LabeledSample};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Dataset {
    Unlabeled(Database),
    Labeled(LabeledSample),
}

pub fn write_database(db: &Database) -> String {
    let mut out = format!("d={}\n", db.bits());
    for x in db.entries() {
        out.push_str(&format!("{x}\n"));
    }
    out
}

pub fn write_sample(s: &LabeledSample) -> String {
    let mut out = format!("d={},labeled\n", s.bits());
    for (x, y) in s.pairs() {
        out.push_str(&format!("{x},{}\n", y as u8));
    }
    out
}

fn parse_u64(tok: &str, line: usize) -> Result<u64> {
    tok.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad integer '{tok}'")))
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hl, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("missing header".into()))?;
    let mut parts = header.split(',');
    let bits = parts
        .next()
        .and_then(|p| p.trim().strip_prefix("d="))
        .ok_or_else(|| Error::Parse(format!("line {hl}: header must start with d=<bits>")))?;
    let bits = parse_u64(bits, hl)? as u32;
    let labeled = match parts.next().map(str::trim) {
        None => false,
        Some("labeled") => true,
        Some(other) => {
            return Err(Error::Parse(format!(
                "line {hl}: unknown header flag '{other}'"
            )))
        }
    };
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (ln, line) in lines {
        let toks: Vec<&str> = line.split(',').collect();
        match (labeled, toks.len()) {
            (false, 1) => points.push(parse_u64(toks[0], ln)?),
            (true, 2) => {
                points.push(parse_u64(toks[0], ln)?);
                labels.push(match toks[1].trim() {
                    "0" => false,
                    "1" => true,
                    t => {
                        return Err(Error::Parse(format!(
                            "line {ln}: label must be 0 or 1, got '{t}'"
                        )))
                    }
                });
            }
            _ => return Err(Error::Parse(format!("line {ln}: wrong number of fields"))),
        }
    }
    if labeled {
        Ok(Dataset::Labeled(LabeledSample::new(bits, points, labels)?))
    } else {
        Ok(Dataset::Unlabeled(Database::new(bits, points)?))
    }
}
