//! Plain-text field snapshots.
//!
//! `CELLFIELD nx ny h x0 y0` followed by `nx*ny` decimal values in 0-based
//! row-major order (`i` outer, `j` inner), one per line. `EDGEFIELD` uses the
//! same header followed by the `nx*ny` x-family values, then the `nx*ny`
//! y-family values. Values are written with shortest round-trip formatting,
//! so write/read cycles are exact.

use std::io::{self, BufRead, Write};

use crate::grid::{CellField, EdgeField, Grid};

pub fn write_cell_field(w: &mut impl Write, f: &CellField) -> io::Result<()> {
    let g = f.grid();
    writeln!(w, "CELLFIELD {} {} {} {} {}", g.nx(), g.ny(), g.h(), g.x0(), g.y0())?;
    for v in f.values() {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

pub fn write_edge_field(w: &mut impl Write, f: &EdgeField) -> io::Result<()> {
    let g = f.grid();
    writeln!(w, "EDGEFIELD {} {} {} {} {}", g.nx(), g.ny(), g.h(), g.x0(), g.y0())?;
    for v in f.xs().iter().chain(f.ys()) {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn parse_header(line: &str, tag: &str) -> io::Result<Grid> {
    let mut it = line.split_whitespace();
    if it.next() != Some(tag) {
        return Err(bad(format!("expected {tag} header, got {line:?}")));
    }
    let mut next = |what: &str| {
        it.next()
            .ok_or_else(|| bad(format!("missing {what} in header")))
            .and_then(|t| t.parse::<f64>().map_err(|e| bad(format!("bad {what}: {e}"))))
    };
    let nx = next("nx")? as usize;
    let ny = next("ny")? as usize;
    let h = next("h")?;
    let x0 = next("x0")?;
    let y0 = next("y0")?;
    Grid::from_spacing(nx, ny, h, x0, y0).map_err(|e| bad(format!("bad grid header: {e}")))
}

fn read_values(lines: &mut impl Iterator<Item = io::Result<String>>, n: usize) -> io::Result<Vec<f64>> {
    let mut vals = Vec::with_capacity(n);
    while vals.len() < n {
        let line = lines.next().ok_or_else(|| bad("unexpected end of snapshot"))??;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        vals.push(t.parse::<f64>().map_err(|e| bad(format!("bad value: {e}")))?);
    }
    Ok(vals)
}

pub fn read_cell_field(r: impl BufRead) -> io::Result<CellField> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| bad("empty snapshot"))??;
    let grid = parse_header(&header, "CELLFIELD")?;
    let vals = read_values(&mut lines, grid.ncells())?;
    Ok(CellField::from_values(grid, vals))
}

pub fn read_edge_field(r: impl BufRead) -> io::Result<EdgeField> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| bad("empty snapshot"))??;
    let grid = parse_header(&header, "EDGEFIELD")?;
    let xs = read_values(&mut lines, grid.ncells())?;
    let ys = read_values(&mut lines, grid.ncells())?;
    Ok(EdgeField::from_values(grid, xs, ys))
}
