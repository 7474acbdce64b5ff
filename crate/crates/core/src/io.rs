//! CSV formats.
//!
//! * Trajectory: header `k,x1,...,xn,u1,...,um`, one row per time step, `k`
//!   counting up from 0 with no gaps.
//! * Estimate trace: header `k,rank,unique,residual,theta_1..theta_N,lambda0_1..lambda0_n`;
//!   steps without a unique estimate are written as zeros with `unique = 0`.
//!
//! Floats are written with 10 significant digits.

use std::io::{Read, Write};

use crate::error::{IocError, Result};
use crate::estimator::EstimateResult;
use crate::model::{Trajectory, Vector};

/// Formats `v` with 10 significant digits, trimming trailing zeros.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..10).contains(&exp) {
        let decimals = (9 - exp).max(0) as usize;
        trim_fraction(&format!("{v:.decimals$}")).to_string()
    } else {
        let s = format!("{v:.9e}");
        let (mantissa, exponent) = s.split_once('e').expect("scientific format has an exponent");
        format!("{}e{}", trim_fraction(mantissa), exponent)
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_trajectory<W: Write>(out: W, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["k".to_string()];
    header.extend((1..=traj.state_dim()).map(|i| format!("x{i}")));
    header.extend((1..=traj.control_dim()).map(|i| format!("u{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for (k, (x, u)) in traj.pairs().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(x.iter().chain(u.iter()).map(|v| format_float(*v)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory<R: Read>(input: R) -> Result<Trajectory> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers().map_err(csv_err)?.clone();
    let (n, m) = parse_header(&header)?;

    let mut states = Vec::new();
    let mut controls = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 1 + n + m {
            return Err(IocError::Parse {
                line,
                message: format!("expected {} fields, found {}", 1 + n + m, record.len()),
            });
        }
        let k: usize = record[0].parse().map_err(|_| IocError::Parse {
            line,
            message: format!("time index {:?} is not a nonnegative integer", &record[0]),
        })?;
        if k != states.len() {
            return Err(IocError::Parse {
                line,
                message: format!("time index {k} out of sequence, expected {}", states.len()),
            });
        }
        let mut values = Vec::with_capacity(n + m);
        for field in record.iter().skip(1) {
            let v: f64 = field.parse().map_err(|_| IocError::Parse {
                line,
                message: format!("{field:?} is not a number"),
            })?;
            values.push(v);
        }
        states.push(Vector::from_column_slice(&values[..n]));
        controls.push(Vector::from_column_slice(&values[n..]));
    }
    if states.is_empty() {
        return Err(IocError::Parse {
            line: 2,
            message: "trajectory file has no data rows".into(),
        });
    }
    Trajectory::new(states, controls)
}

fn parse_header(header: &csv::StringRecord) -> Result<(usize, usize)> {
    let bad = |message: String| IocError::Parse { line: 1, message };
    if header.get(0) != Some("k") {
        return Err(bad("header must start with `k`".into()));
    }
    let mut n = 0;
    let mut m = 0;
    for name in header.iter().skip(1) {
        if m == 0 && name == format!("x{}", n + 1) {
            n += 1;
        } else if n > 0 && name == format!("u{}", m + 1) {
            m += 1;
        } else {
            return Err(bad(format!("unexpected column {name:?}; expected k,x1..xn,u1..um")));
        }
    }
    if n == 0 || m == 0 {
        return Err(bad("header needs at least one state and one control column".into()));
    }
    Ok((n, m))
}

/// Writes one row per estimate. `state_dim` and `basis_dim` size the zero rows
/// written for steps without an estimate.
pub fn write_estimate_trace<W: Write>(
    out: W,
    results: &[EstimateResult],
    state_dim: usize,
    basis_dim: usize,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["k".to_string(), "rank".into(), "unique".into(), "residual".into()];
    header.extend((1..=basis_dim).map(|i| format!("theta_{i}")));
    header.extend((1..=state_dim).map(|i| format!("lambda0_{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for r in results {
        let mut row = vec![
            r.k.to_string(),
            r.qbar_rank.to_string(),
            u8::from(r.unique).to_string(),
            format_float(r.residual),
        ];
        let (theta, lambda) = if r.unique {
            (r.theta_hat.clone(), r.lambda0_hat.clone())
        } else {
            (None, None)
        };
        let theta = theta.unwrap_or_else(|| Vector::zeros(basis_dim));
        let lambda = lambda.unwrap_or_else(|| Vector::zeros(state_dim));
        row.extend(theta.iter().chain(lambda.iter()).map(|v| format_float(*v)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a header plus rows of preformatted cells.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> IocError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IocError::Io(io),
        kind => IocError::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}
