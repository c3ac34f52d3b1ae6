//! Reader for the subset of the MATPOWER case format needed for DC
//! sensitivities: bus numbers and types from `mpc.bus`, and endpoints,
//! reactance, phase-shift angle and status from `mpc.branch`.

use crate::error::{Error, Result};
use crate::grid::{Grid, GridOptions, RawBranch};

const BUS_ID: usize = 0;
const BUS_TYPE: usize = 1;
const REF_BUS: f64 = 3.0;

const F_BUS: usize = 0;
const T_BUS: usize = 1;
const BR_X: usize = 3;
const SHIFT: usize = 9;
const BR_STATUS: usize = 10;

struct Row {
    line: usize,
    values: Vec<f64>,
}

/// Parses a MATPOWER case with default [`GridOptions`].
pub fn parse_matpower_case(text: &str) -> Result<Grid> {
    parse_matpower_case_with(text, GridOptions::default())
}

pub fn parse_matpower_case_with(text: &str, options: GridOptions) -> Result<Grid> {
    let name = case_name(text).unwrap_or_else(|| "case".to_string());
    let last_line = text.lines().count().max(1);
    let bus_rows = table(text, "mpc.bus")?.ok_or_else(|| Error::Parse {
        line: last_line,
        message: "no mpc.bus table".into(),
    })?;
    let branch_rows = table(text, "mpc.branch")?.ok_or_else(|| Error::Parse {
        line: last_line,
        message: "no mpc.branch table".into(),
    })?;

    let mut bus_ids = Vec::with_capacity(bus_rows.len());
    let mut slack_id = None;
    for row in &bus_rows {
        if row.values.len() < 2 {
            return Err(Error::Parse {
                line: row.line,
                message: format!(
                    "bus row needs at least 2 columns, found {}",
                    row.values.len()
                ),
            });
        }
        let id = integer(row, BUS_ID)?;
        if row.values[BUS_TYPE] == REF_BUS && slack_id.is_none() {
            slack_id = Some(id);
        }
        bus_ids.push(id);
    }
    let slack_id = match slack_id.or_else(|| bus_ids.iter().copied().min()) {
        Some(id) => id,
        None => {
            return Err(Error::Parse {
                line: last_line,
                message: "bus table is empty".into(),
            })
        }
    };

    let mut raw = Vec::with_capacity(branch_rows.len());
    for row in &branch_rows {
        if row.values.len() < 4 {
            return Err(Error::Parse {
                line: row.line,
                message: format!(
                    "branch row needs at least 4 columns, found {}",
                    row.values.len()
                ),
            });
        }
        let in_service = row.values.get(BR_STATUS).map_or(true, |&s| s != 0.0);
        if !in_service {
            continue;
        }
        let (from, to) = (integer(row, F_BUS)?, integer(row, T_BUS)?);
        let shift = row.values.get(SHIFT).copied().unwrap_or(0.0);
        if shift != 0.0 {
            return Err(Error::UnsupportedBranch {
                from,
                to,
                reason: format!("phase shifter with angle {shift} deg"),
            });
        }
        raw.push(RawBranch {
            from,
            to,
            reactance: row.values[BR_X],
        });
    }

    Grid::from_raw(name, &bus_ids, &raw, slack_id, options)
}

fn integer(row: &Row, col: usize) -> Result<i64> {
    let v = row.values[col];
    if v.fract() != 0.0 || !v.is_finite() {
        return Err(Error::Parse {
            line: row.line,
            message: format!(
                "expected an integer bus number in column {}, found {v}",
                col + 1
            ),
        });
    }
    Ok(v as i64)
}

fn case_name(text: &str) -> Option<String> {
    text.lines().find_map(|l| {
        let l = strip_comment(l).trim();
        let rest = l.strip_prefix("function")?;
        let (_, name) = rest.split_once('=')?;
        let name = name.trim();
        (!name.is_empty()).then(|| name.to_string())
    })
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Collects the numeric rows of `key = [ ... ];`, or `None` if absent.
fn table(text: &str, key: &str) -> Result<Option<Vec<Row>>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, strip_comment(l)));
    let mut first = None;
    for (no, line) in lines.by_ref() {
        let Some((lhs, rhs)) = line.split_once('=') else {
            continue;
        };
        if lhs.trim() != key {
            continue;
        }
        let Some(body) = rhs.trim_start().strip_prefix('[') else {
            return Err(Error::Parse {
                line: no,
                message: format!("expected '[' after {key} ="),
            });
        };
        first = Some((no, body));
        break;
    }
    let Some((start, body)) = first else {
        return Ok(None);
    };

    let mut rows = Vec::new();
    let mut current = Vec::new();
    let mut current_line = start;
    let mut chunks = std::iter::once((start, body)).chain(lines);
    loop {
        let Some((no, chunk)) = chunks.next() else {
            return Err(Error::Parse {
                line: start,
                message: format!("unterminated {key} table"),
            });
        };
        let (chunk, closed) = match chunk.find(']') {
            Some(i) => (&chunk[..i], true),
            None => (chunk, false),
        };
        // A row ends at ';' or at the end of a physical line.
        for (k, piece) in chunk.split(';').enumerate() {
            if k > 0 {
                flush(&mut rows, &mut current, current_line);
            }
            for tok in piece.split(|c: char| c.is_whitespace() || c == ',') {
                if tok.is_empty() {
                    continue;
                }
                if current.is_empty() {
                    current_line = no;
                }
                let v = parse_number(tok).ok_or_else(|| Error::Parse {
                    line: no,
                    message: format!("malformed number '{tok}' in {key}"),
                })?;
                current.push(v);
            }
        }
        flush(&mut rows, &mut current, current_line);
        if closed {
            break;
        }
    }

    let width = rows.first().map_or(0, |r: &Row| r.values.len());
    if let Some(bad) = rows.iter().find(|r| r.values.len() != width) {
        return Err(Error::Parse {
            line: bad.line,
            message: format!(
                "row in {key} has {} columns, expected {width}",
                bad.values.len()
            ),
        });
    }
    Ok(Some(rows))
}

fn flush(rows: &mut Vec<Row>, current: &mut Vec<f64>, line: usize) {
    if !current.is_empty() {
        rows.push(Row {
            line,
            values: std::mem::take(current),
        });
    }
}

fn parse_number(tok: &str) -> Option<f64> {
    match tok {
        "Inf" | "inf" => Some(f64::INFINITY),
        "-Inf" | "-inf" => Some(f64::NEG_INFINITY),
        _ => tok.parse().ok(),
    }
}
