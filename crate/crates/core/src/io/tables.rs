//! CSV schemas. Headers are fixed and checked on read; floats are written with
//! Rust's shortest round-trip formatting.

use std::io::{Read, Write};

use crate::anchor::{BoxState, ResidualState};
use crate::error::{Error, Result};
use crate::vec2::Vec2;

pub const BOX_COLUMNS: [&str; 9] = ["x", "y", "z", "l", "w", "h", "theta", "vx", "vy"];
pub const RESIDUAL_COLUMNS: [&str; 9] = ["dr", "do", "dz", "dl", "dw", "dh", "dtheta", "vr", "vo"];
pub const ANCHOR_COLUMNS: [&str; 3] = ["ax", "ay", "az"];

fn read_rows<R: Read>(input: R, expected: &[String], source_name: &str) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != expected {
        return Err(Error::Parse {
            source_name: source_name.to_string(),
            line: 1,
            message: format!("expected header `{}`, got `{}`", expected.join(","), header.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = n + 2;
        let row = rec
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        source_name: source_name.to_string(),
                        line,
                        message: format!("column `{}`: invalid number `{field}`", expected[col]),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn write_rows<W: Write>(out: W, header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

fn names(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

pub fn read_boxes<R: Read>(input: R, source_name: &str) -> Result<Vec<BoxState>> {
    Ok(read_rows(input, &names(&BOX_COLUMNS), source_name)?
        .into_iter()
        .map(|r| BoxState {
            center: Vec2::new(r[0], r[1]),
            z: r[2],
            size: [r[3], r[4], r[5]],
            orientation: r[6],
            velocity: Vec2::new(r[7], r[8]),
        })
        .collect())
}

pub fn write_boxes<W: Write>(out: W, boxes: &[BoxState]) -> Result<()> {
    write_rows(
        out,
        &names(&BOX_COLUMNS),
        boxes.iter().map(|b| {
            vec![
                b.center.x,
                b.center.y,
                b.z,
                b.size[0],
                b.size[1],
                b.size[2],
                b.orientation,
                b.velocity.x,
                b.velocity.y,
            ]
        }),
    )
}

pub fn read_residuals<R: Read>(input: R, source_name: &str) -> Result<Vec<ResidualState>> {
    Ok(read_rows(input, &names(&RESIDUAL_COLUMNS), source_name)?
        .into_iter()
        .map(|r| ResidualState {
            d_r: r[0],
            d_o: r[1],
            d_z: r[2],
            d_size: [r[3], r[4], r[5]],
            d_theta: r[6],
            v_r: r[7],
            v_o: r[8],
        })
        .collect())
}

pub fn write_residuals<W: Write>(out: W, residuals: &[ResidualState]) -> Result<()> {
    write_rows(
        out,
        &names(&RESIDUAL_COLUMNS),
        residuals.iter().map(|r| {
            vec![
                r.d_r,
                r.d_o,
                r.d_z,
                r.d_size[0],
                r.d_size[1],
                r.d_size[2],
                r.d_theta,
                r.v_r,
                r.v_o,
            ]
        }),
    )
}

/// Anchor locations `(ax, ay, az)`; the frame is rebuilt from the azimuth
/// center on read.
pub fn read_anchor_points<R: Read>(input: R, source_name: &str) -> Result<Vec<(Vec2, f64)>> {
    Ok(read_rows(input, &names(&ANCHOR_COLUMNS), source_name)?
        .into_iter()
        .map(|r| (Vec2::new(r[0], r[1]), r[2]))
        .collect())
}

pub fn write_anchor_points<W: Write>(out: W, anchors: &[(Vec2, f64)]) -> Result<()> {
    write_rows(
        out,
        &names(&ANCHOR_COLUMNS),
        anchors.iter().map(|(p, z)| vec![p.x, p.y, *z]),
    )
}

/// Header `{prefix}0 .. {prefix}{n-1}`.
pub fn score_header(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// One score vector per row, `s0..s{M-1}`.
pub fn read_scores<R: Read>(input: R, bins: usize, source_name: &str) -> Result<Vec<Vec<f64>>> {
    read_rows(input, &score_header("s", bins), source_name)
}

/// One score vector per row, `f0..f{N-1}`.
pub fn write_scores<W: Write>(out: W, prefix: &str, rows: &[Vec<f64>]) -> Result<()> {
    let n = rows.first().map_or(0, Vec::len);
    write_rows(out, &score_header(prefix, n), rows.iter().cloned())
}
