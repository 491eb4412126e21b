//! Plain-text channel format.
//!
//! ```text
//! # free-form comment lines start with '#'
//! dims,<n_subcarriers>,<n_tx>,<n_users>
//! tx,<x>,<y>          optional, one line per antenna (all or none)
//! user,<x>,<y>        optional, one line per user (all or none)
//! <re>,<im>,<re>,<im>,...
//! ```
//!
//! Data lines are subcarrier-major: `n_subcarriers * n_tx` lines, one per
//! transmit antenna, each with `2 * n_users` numbers (user columns, real and
//! imaginary parts interleaved). Numbers are written in shortest round-trip
//! form, so writing and reading back is lossless.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use super::{ChannelTensor, Point};
use crate::error::{Error, Result};

pub fn write_channel<W: Write>(mut out: W, h: &ChannelTensor) -> Result<()> {
    writeln!(out, "# rpn-mimo channel v1")?;
    writeln!(out, "dims,{},{},{}", h.n_subcarriers(), h.n_tx(), h.n_users())?;
    if let (Some(tx), Some(users)) = (h.tx_positions(), h.user_positions()) {
        for p in tx {
            writeln!(out, "tx,{},{}", p.x, p.y)?;
        }
        for p in users {
            writeln!(out, "user,{},{}", p.x, p.y)?;
        }
    }
    let mut line = String::new();
    for s in 0..h.n_subcarriers() {
        for t in 0..h.n_tx() {
            line.clear();
            for (i, z) in h.antenna_row(s, t).iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{},{}", z.re, z.im));
            }
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}

fn parse_numbers(fields: &[&str], line: usize) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            f.trim().parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("bad number {f:?}: {e}"),
            })
        })
        .collect()
}

pub fn read_channel<R: BufRead>(input: R) -> Result<ChannelTensor> {
    let mut dims: Option<(usize, usize, usize)> = None;
    let mut tx = Vec::new();
    let mut users = Vec::new();
    let mut data = Vec::new();
    let mut rows = 0usize;
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        match fields[0].trim() {
            "dims" => {
                let nums = parse_numbers(&fields[1..], line_no)?;
                if nums.len() != 3 || nums.iter().any(|v| *v < 1.0 || v.fract() != 0.0) {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "dims needs three positive integers".into(),
                    });
                }
                dims = Some((nums[0] as usize, nums[1] as usize, nums[2] as usize));
            }
            kind @ ("tx" | "user") => {
                let nums = parse_numbers(&fields[1..], line_no)?;
                if nums.len() != 2 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("{kind} position needs x and y"),
                    });
                }
                let p = Point::new(nums[0], nums[1]);
                if kind == "tx" {
                    tx.push(p)
                } else {
                    users.push(p)
                }
            }
            _ => {
                let (_, _, n_users) = dims.ok_or(Error::Parse {
                    line: line_no,
                    message: "data before dims line".into(),
                })?;
                let nums = parse_numbers(&fields, line_no)?;
                if nums.len() != 2 * n_users {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("expected {} numbers, found {}", 2 * n_users, nums.len()),
                    });
                }
                data.extend(nums.chunks(2).map(|c| Complex64::new(c[0], c[1])));
                rows += 1;
            }
        }
    }
    let (n_sub, n_tx, n_users) = dims.ok_or(Error::Parse {
        line: 0,
        message: "missing dims line".into(),
    })?;
    if rows != n_sub * n_tx {
        return Err(Error::Parse {
            line: 0,
            message: format!("expected {} data rows, found {rows}", n_sub * n_tx),
        });
    }
    let h = ChannelTensor::new(n_sub, n_tx, n_users, data)?;
    if tx.is_empty() && users.is_empty() {
        Ok(h)
    } else {
        h.with_positions(tx, users)
    }
}
