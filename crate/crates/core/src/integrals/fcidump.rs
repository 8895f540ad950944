//! FCIDUMP reader and writer.
//!
//! Records are `value i j k l` with 1-based orbital indices:
//! `(i j k l)` two-electron `(ij|kl)`, `(i j 0 0)` one-electron, `(0 0 0 0)`
//! core energy. `(i 0 0 0)` orbital-energy records are accepted and ignored.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use thiserror::Error;

use super::{ChemistEri, IntegralError, IntegralSet};

const DUPLICATE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum FcidumpError {
    #[error("FCIDUMP header is missing {0}")]
    MissingField(&'static str),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: orbital index {index} exceeds NORB = {norb}")]
    IndexOutOfRange { line: usize, index: usize, norb: usize },
    #[error("line {line}: value {value} conflicts with {previous} given on line {previous_line}")]
    Conflict {
        line: usize,
        value: f64,
        previous: f64,
        previous_line: usize,
    },
    #[error(transparent)]
    Integrals(#[from] IntegralError),
}

#[derive(Debug, Default)]
struct Header {
    norb: Option<usize>,
    nelec: Option<usize>,
    ms2: Option<u32>,
}

fn parse_header(text: &str, first_line: usize) -> Result<Header, FcidumpError> {
    let cleaned = text
        .replace("&FCI", " ")
        .replace("&fci", " ")
        .replace("&END", " ")
        .replace("&end", " ")
        .replace('=', " = ")
        .replace(',', " ");
    let tokens: Vec<&str> = cleaned.split_whitespace().filter(|t| *t != "/").collect();
    let mut header = Header::default();
    let mut i = 0;
    while i < tokens.len() {
        if i + 1 < tokens.len() && tokens[i + 1] == "=" {
            let key = tokens[i].to_ascii_uppercase();
            let mut values = Vec::new();
            let mut j = i + 2;
            while j < tokens.len() && !(j + 1 < tokens.len() && tokens[j + 1] == "=") {
                values.push(tokens[j]);
                j += 1;
            }
            let first = values.first().copied();
            let bad = |what: &str| FcidumpError::Malformed {
                line: first_line,
                message: format!("invalid {key} value `{}`", what),
            };
            match key.as_str() {
                "NORB" => {
                    header.norb = Some(
                        first
                            .ok_or_else(|| bad(""))?
                            .parse()
                            .map_err(|_| bad(first.unwrap_or("")))?,
                    )
                }
                "NELEC" => {
                    header.nelec = Some(
                        first
                            .ok_or_else(|| bad(""))?
                            .parse()
                            .map_err(|_| bad(first.unwrap_or("")))?,
                    )
                }
                "MS2" => {
                    header.ms2 = Some(
                        first
                            .ok_or_else(|| bad(""))?
                            .parse()
                            .map_err(|_| bad(first.unwrap_or("")))?,
                    )
                }
                _ => {}
            }
            i = j;
        } else {
            i += 1;
        }
    }
    Ok(header)
}

fn parse_value(token: &str) -> Option<f64> {
    token.replace(['D', 'd'], "E").parse().ok()
}

fn looks_like_record(line: &str) -> bool {
    let fields: Vec<&str> = line.split_whitespace().collect();
    fields.len() == 5 && parse_value(fields[0]).is_some() && fields[1..].iter().all(|f| f.parse::<usize>().is_ok())
}

/// Parses FCIDUMP text. Both the namelist (`&FCI ... &END`) and bare
/// `KEY=value` headers are accepted.
pub fn parse_fcidump(text: &str) -> Result<IntegralSet, FcidumpError> {
    let lines: Vec<&str> = text.lines().collect();
    let first_non_empty = lines.iter().position(|l| !l.trim().is_empty()).unwrap_or(0);
    let namelist = lines
        .get(first_non_empty)
        .map(|l| l.trim_start().to_ascii_uppercase().starts_with("&FCI"))
        .unwrap_or(false);
    let body_start = if namelist {
        let end = lines
            .iter()
            .enumerate()
            .skip(first_non_empty)
            .position(|(_, l)| {
                let u = l.trim().to_ascii_uppercase();
                u.contains("&END") || u == "/"
            })
            .map(|p| p + first_non_empty)
            .ok_or(FcidumpError::MissingField("&END terminator"))?;
        end + 1
    } else {
        lines.iter().position(|l| looks_like_record(l)).unwrap_or(lines.len())
    };
    let header = parse_header(&lines[..body_start].join("\n"), first_non_empty + 1)?;
    let norb = header.norb.ok_or(FcidumpError::MissingField("NORB"))?;
    let nelec = header.nelec.ok_or(FcidumpError::MissingField("NELEC"))?;

    let mut h = DMatrix::zeros(norb, norb);
    let mut g = ChemistEri::zeros(norb);
    let mut core = 0.0;
    // canonical key -> (value, line)
    let mut seen: HashMap<(usize, usize, usize, usize), (f64, usize)> = HashMap::new();

    for (offset, raw) in lines.iter().enumerate().skip(body_start) {
        let line_no = offset + 1;
        let row = raw.trim();
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(FcidumpError::Malformed {
                line: line_no,
                message: format!("expected `value i j k l`, got `{row}`"),
            });
        }
        let value = parse_value(fields[0]).ok_or_else(|| FcidumpError::Malformed {
            line: line_no,
            message: format!("invalid value `{}`", fields[0]),
        })?;
        let mut idx = [0usize; 4];
        for (slot, f) in idx.iter_mut().zip(&fields[1..]) {
            *slot = f.parse().map_err(|_| FcidumpError::Malformed {
                line: line_no,
                message: format!("invalid index `{f}`"),
            })?;
            if *slot > norb {
                return Err(FcidumpError::IndexOutOfRange {
                    line: line_no,
                    index: *slot,
                    norb,
                });
            }
        }
        let [i, j, k, l] = idx;
        let key = match (i, j, k, l) {
            (0, 0, 0, 0) => (0, 0, 0, 0),
            (i, 0, 0, 0) if i > 0 => continue,
            (i, j, 0, 0) if i > 0 && j > 0 => (i.max(j), i.min(j), 0, 0),
            (i, j, k, l) if i > 0 && j > 0 && k > 0 && l > 0 => {
                let (p, q) = (i.max(j), i.min(j));
                let (r, s) = (k.max(l), k.min(l));
                if (p, q) >= (r, s) {
                    (p, q, r, s)
                } else {
                    (r, s, p, q)
                }
            }
            _ => {
                return Err(FcidumpError::Malformed {
                    line: line_no,
                    message: format!("unsupported index pattern {i} {j} {k} {l}"),
                })
            }
        };
        if let Some(&(previous, previous_line)) = seen.get(&key) {
            if (previous - value).abs() > DUPLICATE_TOL {
                return Err(FcidumpError::Conflict {
                    line: line_no,
                    value,
                    previous,
                    previous_line,
                });
            }
            continue;
        }
        seen.insert(key, (value, line_no));
        match key {
            (0, 0, 0, 0) => core = value,
            (p, q, 0, 0) => {
                h[(p - 1, q - 1)] = value;
                h[(q - 1, p - 1)] = value;
            }
            (p, q, r, s) => g.set(p - 1, q - 1, r - 1, s - 1, value),
        }
    }
    let mut ints = IntegralSet::new(h, g, core, nelec)?;
    ints.ms2 = header.ms2.unwrap_or(0);
    Ok(ints)
}

/// Writes `ints` as FCIDUMP text with 16 significant digits. Exact zeros
/// are omitted.
pub fn write_fcidump(ints: &IntegralSet) -> String {
    let n = ints.n_spatial();
    let mut out = String::new();
    let _ = writeln!(out, "&FCI NORB={},NELEC={},MS2={},", n, ints.n_electrons(), ints.ms2());
    let orbsym = vec!["1"; n].join(",");
    let _ = writeln!(out, "  ORBSYM={orbsym},");
    let _ = writeln!(out, "  ISYM=1,");
    let _ = writeln!(out, "&END");
    let record = |out: &mut String, v: f64, i: usize, j: usize, k: usize, l: usize| {
        let _ = writeln!(out, "{v:>24.15E} {i:>4} {j:>4} {k:>4} {l:>4}");
    };
    for (p, q, r, s) in ChemistEri::canonical_indices(n) {
        let v = ints.g().get(p, q, r, s);
        if v != 0.0 {
            record(&mut out, v, p + 1, q + 1, r + 1, s + 1);
        }
    }
    for p in 0..n {
        for q in 0..=p {
            let v = ints.h()[(p, q)];
            if v != 0.0 {
                record(&mut out, v, p + 1, q + 1, 0, 0);
            }
        }
    }
    record(&mut out, ints.e_nn(), 0, 0, 0, 0);
    out
}
