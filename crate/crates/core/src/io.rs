//! CSV form of field frames.
//!
//! ```text
//! # t=1.0000000000000000e1,hbar=1,mass=1,sigma0=0.5,d=10
//! x,rho,S_wrapped,S_unwrapped,J,v,Q,node_mask,S_wrapped_over_hbar,Q_mask
//! ```
//!
//! Reals are written with 17 significant digits; masks as `0`/`1`.

use std::io::{BufRead, Write};

use crate::analytic::TwoSlitParams;
use crate::error::{Error, Result};
use crate::fields::FieldFrame;

pub const FRAME_COLUMNS: [&str; 10] = [
    "x",
    "rho",
    "S_wrapped",
    "S_unwrapped",
    "J",
    "v",
    "Q",
    "node_mask",
    "S_wrapped_over_hbar",
    "Q_mask",
];

pub fn write_frame_csv(frame: &FieldFrame, params: Option<&TwoSlitParams>, mut w: impl Write) -> Result<()> {
    write!(
        w,
        "# t={:.16e},hbar={},mass={}",
        frame.t,
        frame.particle.hbar(),
        frame.particle.mass()
    )?;
    if let Some(p) = params {
        write!(w, ",sigma0={},d={}", p.sigma0(), p.d())?;
    }
    writeln!(w)?;
    writeln!(w, "{}", FRAME_COLUMNS.join(","))?;
    let hbar = frame.particle.hbar();
    for j in 0..frame.grid.len() {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{}",
            frame.grid.x(j),
            frame.rho[j],
            frame.s_wrapped[j],
            frame.s_unwrapped[j],
            frame.j[j],
            frame.v[j],
            frame.q[j],
            u8::from(frame.node_mask[j]),
            frame.s_wrapped[j] / hbar,
            u8::from(frame.q_mask[j]),
        )?;
    }
    Ok(())
}

/// Columns of a frame CSV, as read back.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameTable {
    /// `key=value` pairs from the leading comment line.
    pub header: Vec<(String, String)>,
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
    pub s_wrapped: Vec<f64>,
    pub s_unwrapped: Vec<f64>,
    pub j: Vec<f64>,
    pub v: Vec<f64>,
    pub q: Vec<f64>,
    pub node_mask: Vec<bool>,
}

impl FrameTable {
    pub fn header_value(&self, key: &str) -> Option<f64> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .and_then(|(_, v)| v.parse().ok())
    }
}

pub fn read_frame_csv(reader: impl BufRead) -> Result<FrameTable> {
    let mut table = FrameTable::default();
    let mut seen_columns = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if let Some(rest) = line.strip_prefix('#') {
            for pair in rest.trim().split(',') {
                if let Some((k, v)) = pair.split_once('=') {
                    table.header.push((k.trim().to_string(), v.trim().to_string()));
                }
            }
            continue;
        }
        if !seen_columns {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() < 8 || cols[..8] != FRAME_COLUMNS[..8] {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!("unexpected columns `{line}`"),
                });
            }
            seen_columns = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 8 {
            return Err(Error::Parse {
                line: line_no,
                reason: format!("expected at least 8 fields, got {}", fields.len()),
            });
        }
        let num = |i: usize| {
            fields[i].parse::<f64>().map_err(|e| Error::Parse {
                line: line_no,
                reason: format!("column {}: {e}", FRAME_COLUMNS[i]),
            })
        };
        table.x.push(num(0)?);
        table.rho.push(num(1)?);
        table.s_wrapped.push(num(2)?);
        table.s_unwrapped.push(num(3)?);
        table.j.push(num(4)?);
        table.v.push(num(5)?);
        table.q.push(num(6)?);
        table.node_mask.push(fields[7] == "1");
    }
    Ok(table)
}
