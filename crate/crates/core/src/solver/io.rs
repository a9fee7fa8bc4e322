//! Trajectory containers.
//!
//! Binary layout, all little-endian: `u64 N`, `u64 n`, `f64 dx`, `u64 m`,
//! `m` times as `f64`, then `m * N * n` values ordered snapshot, cell, component.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DVector;

use super::{Field, Grid1D, RunMeta, Trajectory};
use crate::error::{Error, Result};

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Precondition(format!("{}: {e}", path.display()))
}

pub fn write_bin(traj: &Trajectory, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| io_err(path, e));
    put(&(traj.grid.cells() as u64).to_le_bytes())?;
    put(&(traj.dim as u64).to_le_bytes())?;
    put(&traj.grid.dx().to_le_bytes())?;
    put(&(traj.len() as u64).to_le_bytes())?;
    for f in &traj.snapshots {
        put(&f.time.to_le_bytes())?;
    }
    for f in &traj.snapshots {
        for c in &f.cells {
            for v in c.iter() {
                put(&v.to_le_bytes())?;
            }
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_bin(path: &Path) -> Result<Trajectory> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);
    let mut buf = [0u8; 8];
    let mut next = |r: &mut BufReader<File>| -> Result<[u8; 8]> {
        r.read_exact(&mut buf).map_err(|e| io_err(path, e))?;
        Ok(buf)
    };
    let n_cells = u64::from_le_bytes(next(&mut r)?) as usize;
    let dim = u64::from_le_bytes(next(&mut r)?) as usize;
    let dx = f64::from_le_bytes(next(&mut r)?);
    let m = u64::from_le_bytes(next(&mut r)?) as usize;
    let grid = Grid1D::new(n_cells, dx * n_cells as f64)?;
    let times = (0..m)
        .map(|_| next(&mut r).map(f64::from_le_bytes))
        .collect::<Result<Vec<_>>>()?;
    let mut snapshots = Vec::with_capacity(m);
    for t in times {
        let mut cells = Vec::with_capacity(n_cells);
        for _ in 0..n_cells {
            let vals = (0..dim)
                .map(|_| next(&mut r).map(f64::from_le_bytes))
                .collect::<Result<Vec<_>>>()?;
            cells.push(DVector::from_vec(vals));
        }
        snapshots.push(Field::new(t, cells));
    }
    Ok(Trajectory {
        grid,
        dim,
        snapshots,
        sources: None,
        meta: RunMeta::exact("from-file", f64::NAN),
    })
}

/// Column names for the state components: `u, v, theta` for three-component
/// states, `u0, u1, ...` otherwise.
pub fn state_columns(dim: usize) -> Vec<String> {
    if dim == 3 {
        vec!["u".into(), "v".into(), "theta".into()]
    } else {
        (0..dim).map(|k| format!("u{k}")).collect()
    }
}

/// Long-format CSV with one row per snapshot and cell.
pub fn write_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut header = vec!["t".to_string(), "x".to_string()];
    header.extend(state_columns(traj.dim));
    writeln!(w, "{}", header.join(",")).map_err(|e| io_err(path, e))?;
    for f in &traj.snapshots {
        for (i, c) in f.cells.iter().enumerate() {
            let mut row = vec![format!("{:.16e}", f.time), format!("{:.16e}", traj.grid.x(i))];
            row.extend(c.iter().map(|v| format!("{v:.16e}")));
            writeln!(w, "{}", row.join(",")).map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}
