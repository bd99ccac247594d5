//! File formats: snapshot CSV/binary, ball-grid slice CSV, report-series
//! CSV, surface CSV, trajectory CSV, plot data, and the snapshot index.
//!
//! Every emitted file is re-ingestible bit-exactly: floats are written with
//! Rust's shortest round-trip formatting and parsed back with `f64::parse`,
//! so write → parse → write is the identity on bytes. Parsers never panic on
//! malformed input; they return line-tagged errors (these entry points are
//! fuzzed).

use std::fmt::Write as _;
use std::path::Path;

use crate::energy::EnergyReport;
use crate::error::{Error, Result};
use crate::interp::UniformAxis;
use crate::wave::{FieldState, GridKind, Snapshot};

fn parse_f64(line: usize, field: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(line, format!("expected a number, got {field:?}")))
}

fn parse_usize(line: usize, field: &str) -> Result<usize> {
    field
        .trim()
        .parse::<usize>()
        .map_err(|_| Error::parse(line, format!("expected an integer, got {field:?}")))
}

fn split_n<'a>(line_no: usize, line: &'a str, n: usize) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != n {
        return Err(Error::parse(
            line_no,
            format!("expected {n} comma-separated fields, got {}", fields.len()),
        ));
    }
    Ok(fields)
}

// ---------------------------------------------------------------------------
// snapshot CSV
// ---------------------------------------------------------------------------

/// Header: `t,dx,N,kind` + value row, then `x,u,ut` rows.
pub fn write_snapshot_csv(snapshot: &Snapshot) -> String {
    let mut out = String::new();
    out.push_str("t,dx,N,kind\n");
    let _ = writeln!(
        out,
        "{},{},{},{}",
        snapshot.state.t, snapshot.axis.dx, snapshot.dim, snapshot.kind
    );
    out.push_str("x,u,ut\n");
    for i in 0..snapshot.axis.n {
        let _ = writeln!(
            out,
            "{},{},{}",
            snapshot.axis.x(i),
            snapshot.state.u[i],
            snapshot.state.ut[i]
        );
    }
    out
}

pub fn parse_snapshot_csv(text: &str) -> Result<Snapshot> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    if header.trim() != "t,dx,N,kind" {
        return Err(Error::parse(1, format!("bad header {header:?}")));
    }
    let (no, values) = lines
        .next()
        .ok_or_else(|| Error::parse(2, "missing header values"))?;
    let fields = split_n(no + 1, values, 4)?;
    let t = parse_f64(no + 1, fields[0])?;
    let dx = parse_f64(no + 1, fields[1])?;
    let dim = parse_usize(no + 1, fields[2])? as u32;
    let kind = match fields[3].trim() {
        "line" => GridKind::Line,
        "radial" => GridKind::Radial,
        other => return Err(Error::parse(no + 1, format!("unknown grid kind {other:?}"))),
    };
    if !(dx > 0.0 && dx.is_finite()) || !t.is_finite() || dim == 0 {
        return Err(Error::parse(no + 1, "non-finite header values"));
    }
    let (_, columns) = lines
        .next()
        .ok_or_else(|| Error::parse(3, "missing column header"))?;
    if columns.trim() != "x,u,ut" {
        return Err(Error::parse(3, format!("bad column header {columns:?}")));
    }
    let mut x = Vec::new();
    let mut u = Vec::new();
    let mut ut = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_n(no + 1, line, 3)?;
        let xi = parse_f64(no + 1, fields[0])?;
        let ui = parse_f64(no + 1, fields[1])?;
        let uti = parse_f64(no + 1, fields[2])?;
        if !xi.is_finite() || !ui.is_finite() || !uti.is_finite() {
            return Err(Error::parse(no + 1, "non-finite field values"));
        }
        x.push(xi);
        u.push(ui);
        ut.push(uti);
    }
    if x.len() < 4 {
        return Err(Error::parse(
            4,
            format!("need at least 4 rows, got {}", x.len()),
        ));
    }
    let axis = UniformAxis::new(x[0], dx, x.len());
    for (i, &xi) in x.iter().enumerate() {
        if (xi - axis.x(i)).abs() > 1e-9 * dx.max(1.0) {
            return Err(Error::parse(
                i + 4,
                format!("x column is not uniform with dx = {dx}: x[{i}] = {xi}"),
            ));
        }
    }
    Ok(Snapshot {
        kind,
        dim,
        axis,
        state: FieldState { t, u, ut },
    })
}

// ---------------------------------------------------------------------------
// snapshot binary (columnar little-endian)
// ---------------------------------------------------------------------------

const SNAPSHOT_MAGIC: &[u8; 8] = b"BLSNAP01";

pub fn write_snapshot_bin(snapshot: &Snapshot) -> Vec<u8> {
    let n = snapshot.axis.n;
    let mut out = Vec::with_capacity(8 + 8 + 8 + 4 + 1 + 8 + 24 * n);
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&snapshot.state.t.to_le_bytes());
    out.extend_from_slice(&snapshot.axis.dx.to_le_bytes());
    out.extend_from_slice(&snapshot.dim.to_le_bytes());
    out.push(match snapshot.kind {
        GridKind::Line => 0,
        GridKind::Radial => 1,
    });
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for i in 0..n {
        out.extend_from_slice(&snapshot.axis.x(i).to_le_bytes());
    }
    for v in &snapshot.state.u {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &snapshot.state.ut {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn parse_snapshot_bin(bytes: &[u8]) -> Result<Snapshot> {
    let err = |msg: &str| Error::parse(0, msg.to_string());
    if bytes.len() < 37 {
        return Err(err("truncated header"));
    }
    if &bytes[0..8] != SNAPSHOT_MAGIC {
        return Err(err("bad magic"));
    }
    let f64_at = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    let t = f64_at(8);
    let dx = f64_at(16);
    let dim = u32::from_le_bytes(bytes[24..28].try_into().unwrap());
    let kind = match bytes[28] {
        0 => GridKind::Line,
        1 => GridKind::Radial,
        _ => return Err(err("unknown grid kind")),
    };
    let n = u64::from_le_bytes(bytes[29..37].try_into().unwrap());
    if n < 4 || n > (1 << 32) {
        return Err(err("implausible node count"));
    }
    let n = n as usize;
    let need = 37usize
        .checked_add(
            n.checked_mul(24)
                .ok_or_else(|| err("node count overflow"))?,
        )
        .ok_or_else(|| err("node count overflow"))?;
    if bytes.len() != need {
        return Err(err("payload length does not match the node count"));
    }
    if !(dx > 0.0 && dx.is_finite()) || !t.is_finite() || dim == 0 {
        return Err(err("non-finite header values"));
    }
    let column = |start: usize| -> Result<Vec<f64>> {
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            let value = f64_at(start + 8 * i);
            if !value.is_finite() {
                return Err(Error::parse(
                    0,
                    format!("non-finite value in column at index {i}"),
                ));
            }
            v.push(value);
        }
        Ok(v)
    };
    let x = column(37)?;
    let u = column(37 + 8 * n)?;
    let ut = column(37 + 16 * n)?;
    let axis = UniformAxis::new(x[0], dx, n);
    for (i, &xi) in x.iter().enumerate() {
        if (xi - axis.x(i)).abs() > 1e-9 * dx.max(1.0) {
            return Err(Error::parse(
                0,
                format!("x column is not uniform: index {i}"),
            ));
        }
    }
    Ok(Snapshot {
        kind,
        dim,
        axis,
        state: FieldState { t, u, ut },
    })
}

// ---------------------------------------------------------------------------
// ball-grid slice CSV
// ---------------------------------------------------------------------------

/// On-disk form of a similarity slice (grid geometry is implied by the run).
#[derive(Debug, Clone, PartialEq)]
pub struct WStateFile {
    pub s: f64,
    pub x0: f64,
    pub t0: f64,
    pub p: f64,
    pub a: f64,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub ws: Vec<f64>,
}

pub fn write_wstate_csv(file: &WStateFile) -> String {
    let mut out = String::new();
    out.push_str("s,x0,T0,p,a\n");
    let _ = writeln!(
        out,
        "{},{},{},{},{}",
        file.s, file.x0, file.t0, file.p, file.a
    );
    out.push_str("y,w,ws\n");
    for i in 0..file.y.len() {
        let _ = writeln!(out, "{},{},{}", file.y[i], file.w[i], file.ws[i]);
    }
    out
}

pub fn parse_wstate_csv(text: &str) -> Result<WStateFile> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    if header.trim() != "s,x0,T0,p,a" {
        return Err(Error::parse(1, format!("bad header {header:?}")));
    }
    let (no, values) = lines
        .next()
        .ok_or_else(|| Error::parse(2, "missing header values"))?;
    let fields = split_n(no + 1, values, 5)?;
    let s = parse_f64(no + 1, fields[0])?;
    let x0 = parse_f64(no + 1, fields[1])?;
    let t0 = parse_f64(no + 1, fields[2])?;
    let p = parse_f64(no + 1, fields[3])?;
    let a = parse_f64(no + 1, fields[4])?;
    let (_, columns) = lines
        .next()
        .ok_or_else(|| Error::parse(3, "missing column header"))?;
    if columns.trim() != "y,w,ws" {
        return Err(Error::parse(3, format!("bad column header {columns:?}")));
    }
    let mut y = Vec::new();
    let mut w = Vec::new();
    let mut ws = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_n(no + 1, line, 3)?;
        let yi = parse_f64(no + 1, fields[0])?;
        if yi.abs() >= 1.0 {
            return Err(Error::parse(
                no + 1,
                format!("ball node |y| = {} not inside", yi.abs()),
            ));
        }
        y.push(yi);
        w.push(parse_f64(no + 1, fields[1])?);
        ws.push(parse_f64(no + 1, fields[2])?);
    }
    if y.len() < 4 {
        return Err(Error::parse(4, "need at least 4 rows"));
    }
    Ok(WStateFile {
        s,
        x0,
        t0,
        p,
        a,
        y,
        w,
        ws,
    })
}

// ---------------------------------------------------------------------------
// report-series CSV
// ---------------------------------------------------------------------------

pub const ENERGY_CSV_HEADER: &str = "s,E0,I,J,E,H,D,sigma01,sigma02,lp1,h1_norm,l2_ws,theta";

pub fn write_energy_csv(reports: &[EnergyReport]) -> String {
    let mut out = String::new();
    out.push_str(ENERGY_CSV_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.s,
            r.e0,
            r.i,
            r.j,
            r.e,
            r.h,
            r.d,
            r.sigma01,
            r.sigma02,
            r.lp1,
            r.h1_norm,
            r.l2_ws,
            r.theta
        );
    }
    out
}

pub fn parse_energy_csv(text: &str) -> Result<Vec<EnergyReport>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    if header.trim() != ENERGY_CSV_HEADER {
        return Err(Error::parse(1, format!("bad header {header:?}")));
    }
    let mut reports = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_n(no + 1, line, 13)?;
        let mut vals = [0.0f64; 13];
        for (k, f) in fields.iter().enumerate() {
            vals[k] = parse_f64(no + 1, f)?;
        }
        reports.push(EnergyReport {
            s: vals[0],
            e0: vals[1],
            i: vals[2],
            j: vals[3],
            e: vals[4],
            h: vals[5],
            d: vals[6],
            sigma01: vals[7],
            sigma02: vals[8],
            lp1: vals[9],
            h1_norm: vals[10],
            l2_ws: vals[11],
            theta: vals[12],
        });
    }
    Ok(reports)
}

// ---------------------------------------------------------------------------
// surface CSV
// ---------------------------------------------------------------------------

/// Rows `x, T(x), slope`; unresolved nodes carry `inf`.
pub fn write_surface_csv(x: &[f64], t_blow: &[f64], slope: &[f64]) -> String {
    let mut out = String::new();
    out.push_str("x,T,slope\n");
    for i in 0..x.len() {
        let _ = writeln!(out, "{},{},{}", x[i], t_blow[i], slope[i]);
    }
    out
}

pub fn parse_surface_csv(text: &str) -> Result<Vec<(f64, f64, f64)>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    if header.trim() != "x,T,slope" {
        return Err(Error::parse(1, format!("bad header {header:?}")));
    }
    let mut rows = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_n(no + 1, line, 3)?;
        rows.push((
            parse_f64(no + 1, fields[0])?,
            parse_f64(no + 1, fields[1])?,
            parse_f64(no + 1, fields[2])?,
        ));
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// trajectory CSV and plot data
// ---------------------------------------------------------------------------

pub fn write_trajectory_csv(t: &[f64], v: &[f64], vdot: &[f64]) -> String {
    let mut out = String::new();
    out.push_str("t,v,vdot\n");
    for i in 0..t.len() {
        let _ = writeln!(out, "{},{},{}", t[i], v[i], vdot[i]);
    }
    out
}

/// Two-column whitespace data for plotting.
pub fn write_plot_data(xs: &[f64], ys: &[f64]) -> String {
    let mut out = String::new();
    for (x, y) in xs.iter().zip(ys) {
        let _ = writeln!(out, "{x} {y}");
    }
    out
}

/// A gnuplot stub referencing the emitted two-column files.
pub fn write_plot_stub(names: &[&str]) -> String {
    let mut out = String::from("# gnuplot stub; run: gnuplot plot.gp\nset terminal pngcairo\n");
    for name in names {
        let _ = writeln!(
            out,
            "set output '{name}.png'\nplot '{name}.dat' with lines title '{name}'"
        );
    }
    out
}

// ---------------------------------------------------------------------------
// snapshot index
// ---------------------------------------------------------------------------

pub fn write_index(entries: &[(String, f64)]) -> String {
    let mut out = String::from("file,t\n");
    for (name, t) in entries {
        let _ = writeln!(out, "{name},{t}");
    }
    out
}

pub fn parse_index(text: &str) -> Result<Vec<(String, f64)>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    if header.trim() != "file,t" {
        return Err(Error::parse(1, format!("bad header {header:?}")));
    }
    let mut entries = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_n(no + 1, line, 2)?;
        let name = fields[0].trim();
        if name.is_empty() || name.contains(['/', '\\']) || name.contains("..") {
            return Err(Error::parse(
                no + 1,
                format!("invalid snapshot file name {name:?}"),
            ));
        }
        entries.push((name.to_string(), parse_f64(no + 1, fields[1])?));
    }
    Ok(entries)
}

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

pub fn save(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

pub fn save_bytes(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}
