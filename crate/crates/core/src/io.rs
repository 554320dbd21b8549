//! Plain-text varifold files.
//!
//! ```text
//! varifold m=3 ell=2 n=2
//! 1 0 0 | 0.5 | 0 1 0 ; 0 0 1 | 0
//! -1 0 0 | 0.5 | 0 1 0 ; 0 0 1 | 1
//! ```
//!
//! One record per line: position, weight, the `ell` frame vectors separated by
//! `;`, and the boundary flag. Floats use the shortest representation that
//! parses back to the same bits. Blank lines are ignored.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::varifold::{DiscreteVarifold, FRAME_TOL};

/// Frames with a larger orthonormality defect are rejected.
pub const PARSE_FRAME_TOL: f64 = 1e-6;

pub fn write_varifold<W: Write>(mut w: W, v: &DiscreteVarifold) -> Result<()> {
    writeln!(w, "varifold m={} ell={} n={}", v.ambient_dim(), v.ell(), v.len())?;
    let join = |it: &mut dyn Iterator<Item = f64>| it.map(|x| format!("{x}")).collect::<Vec<_>>().join(" ");
    for i in 0..v.len() {
        let p = join(&mut v.points()[i].iter().copied());
        let frame = v.frames()[i]
            .column_iter()
            .map(|c| join(&mut c.iter().copied()))
            .collect::<Vec<_>>()
            .join(" ; ");
        writeln!(
            w,
            "{p} | {} | {frame} | {}",
            v.weights()[i],
            u8::from(v.boundary()[i])
        )?;
    }
    Ok(())
}

pub fn to_string(v: &DiscreteVarifold) -> String {
    let mut buf = Vec::new();
    write_varifold(&mut buf, v).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

pub fn write_file(path: impl AsRef<Path>, v: &DiscreteVarifold) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_varifold(&mut w, v)?;
    w.flush()?;
    Ok(())
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}

fn parse_floats(s: &str, want: usize, what: &str, line: usize) -> Result<Vec<f64>> {
    let vals = s
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| parse_err(line, format!("bad number `{t}` in {what}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if vals.len() != want {
        return Err(parse_err(
            line,
            format!("{what} has {} entries, expected {want}", vals.len()),
        ));
    }
    Ok(vals)
}

fn parse_header(s: &str, line: usize) -> Result<(usize, usize, usize)> {
    let mut it = s.split_whitespace();
    if it.next() != Some("varifold") {
        return Err(parse_err(line, "header must start with `varifold`"));
    }
    let (mut m, mut ell, mut n) = (None, None, None);
    for tok in it {
        let (k, val) = tok
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("bad header field `{tok}`")))?;
        let val: usize = val
            .parse()
            .map_err(|_| parse_err(line, format!("bad integer in `{tok}`")))?;
        match k {
            "m" => m = Some(val),
            "ell" => ell = Some(val),
            "n" => n = Some(val),
            _ => return Err(parse_err(line, format!("unknown header field `{k}`"))),
        }
    }
    match (m, ell, n) {
        (Some(m), Some(ell), Some(n)) => Ok((m, ell, n)),
        _ => Err(parse_err(line, "header needs m, ell and n")),
    }
}

/// Gram-Schmidt, used only to absorb defects between the parse and storage
/// tolerances.
fn reorthonormalize(f: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = f.clone();
    for j in 0..f.ncols() {
        let mut c = f.column(j).into_owned();
        for k in 0..j {
            let e = out.column(k).into_owned();
            c -= &e * e.dot(&c);
        }
        out.set_column(j, &(c.normalize()));
    }
    out
}

pub fn read_varifold<R: BufRead>(r: R) -> Result<DiscreteVarifold> {
    let mut header = None;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut frames = Vec::new();
    let mut boundary = Vec::new();
    let mut last_line = 0;
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let Some((m, ell, n)) = header else {
            let h = parse_header(t, lineno)?;
            if h.1 == 0 || h.1 >= h.0 {
                return Err(parse_err(lineno, "need 1 <= ell < m"));
            }
            header = Some(h);
            continue;
        };
        if points.len() == n {
            return Err(parse_err(lineno, format!("more than n = {n} records")));
        }
        let parts: Vec<&str> = t.split('|').collect();
        if parts.len() != 4 {
            return Err(parse_err(lineno, "record needs 4 `|`-separated fields"));
        }
        let p = parse_floats(parts[0], m, "position", lineno)?;
        let w = parse_floats(parts[1], 1, "weight", lineno)?[0];
        if !(w > 0.0) {
            return Err(parse_err(lineno, "weight must be positive"));
        }
        let vecs: Vec<&str> = parts[2].split(';').collect();
        if vecs.len() != ell {
            return Err(parse_err(
                lineno,
                format!("frame has {} vectors, expected {ell}", vecs.len()),
            ));
        }
        let mut entries = Vec::with_capacity(m * ell);
        for s in vecs {
            entries.extend(parse_floats(s, m, "frame vector", lineno)?);
        }
        let mut f = DMatrix::from_column_slice(m, ell, &entries);
        let defect = (f.transpose() * &f - DMatrix::<f64>::identity(ell, ell)).amax();
        if defect > PARSE_FRAME_TOL {
            return Err(parse_err(
                lineno,
                format!("frame not orthonormal (defect {defect:e})"),
            ));
        }
        if defect > FRAME_TOL {
            f = reorthonormalize(&f);
        }
        let b = match parts[3].trim() {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(lineno, format!("boundary flag `{other}` not 0 or 1"))),
        };
        points.push(DVector::from_vec(p));
        weights.push(w);
        frames.push(f);
        boundary.push(b);
    }
    let Some((m, ell, n)) = header else {
        return Err(parse_err(last_line.max(1), "missing header"));
    };
    if points.len() != n {
        return Err(parse_err(
            last_line,
            format!("header announces n = {n}, found {} records", points.len()),
        ));
    }
    DiscreteVarifold::new(ell, m, points, weights, frames, boundary)
}

pub fn from_str(s: &str) -> Result<DiscreteVarifold> {
    read_varifold(s.as_bytes())
}

pub fn read_file(path: impl AsRef<Path>) -> Result<DiscreteVarifold> {
    let f = std::fs::File::open(path)?;
    read_varifold(std::io::BufReader::new(f))
}
