//! FSNAP1 snapshot files: one UTF-8 JSON header line terminated by a
//! newline, followed by the raw little-endian f64 payload in
//! (t, component, z, y, x) index order. Readers validate the payload
//! length exactly.

use crate::error::{Error, Result};
use crate::grid::{FieldSnapshot, Grid};
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    magic: String,
    nx: usize,
    ny: usize,
    nz: usize,
    nt: usize,
    box_length: [f64; 3],
    dt: f64,
    t_start: f64,
    components: usize,
    field_name: String,
}

pub fn write_fsnap(path: &Path, field: &FieldSnapshot, field_name: &str) -> Result<()> {
    let g = &field.grid;
    let header = Header {
        magic: "FSNAP1".into(),
        nx: g.nx,
        ny: g.ny,
        nz: g.nz,
        nt: g.nt,
        box_length: g.box_length,
        dt: g.dt,
        t_start: g.t_start,
        components: field.components,
        field_name: field_name.into(),
    };
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for v in &field.data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_fsnap(path: &Path) -> Result<(FieldSnapshot, String)> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut header_bytes = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        let n = r.read(&mut byte)?;
        if n == 0 {
            return Err(Error::Format("unterminated FSNAP1 header line".into()));
        }
        if byte[0] == b'\n' {
            break;
        }
        header_bytes.push(byte[0]);
        if header_bytes.len() > 1 << 16 {
            return Err(Error::Format("FSNAP1 header line too long".into()));
        }
    }
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::Format(format!("bad FSNAP1 header: {e}")))?;
    if header.magic != "FSNAP1" {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected \"FSNAP1\"",
            header.magic
        )));
    }
    let grid = Grid::new(
        header.nx,
        header.ny,
        header.nz,
        header.box_length,
        header.nt,
        header.dt,
        header.t_start,
    )?;
    let count = header.nt * header.components * grid.n3();
    let mut payload = vec![0u8; count * 8];
    r.read_exact(&mut payload)
        .map_err(|_| Error::Format(format!("payload shorter than {} bytes", count * 8)))?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format("payload longer than header declares".into()));
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let field = FieldSnapshot::new(grid, header.components, data)?;
    Ok((field, header.field_name))
}
