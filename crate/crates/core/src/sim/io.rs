//! CSV and binary snapshot output.
//!
//! Snapshot layout, little-endian: magic `ALSN`, version `u16`, `d: u16`,
//! `N: u32`, `dt: f64`, `seed: u64`, `count: u64`, then `count` records of a
//! time `f64` followed by the `(2N+1)^d` site values in row-major cube order.

use std::io::{self, Read, Write};

use super::{EnsembleStats, Trajectory};
use crate::lattice::Cube;

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"ALSN";
pub const SNAPSHOT_VERSION: u16 = 1;

/// Shortest fixed rendering that round-trips: 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn csv_error(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

/// Columns `time, <site>...`.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, w: W) -> io::Result<()> {
    let mut out = csv_writer(w);
    let mut header = vec!["time".to_string()];
    if let Some(first) = traj.states.first() {
        header.extend(first.cube().sites().map(|s| format!("x[{s}]")));
    }
    out.write_record(&header).map_err(csv_error)?;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let row = std::iter::once(format_float(*t)).chain(x.values().iter().map(|v| format_float(*v)));
        out.write_record(row).map_err(csv_error)?;
    }
    out.flush()
}

/// Columns `time, observable, mean, se, n`.
pub fn write_ensemble_csv<W: Write>(stats: &EnsembleStats, w: W) -> io::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["time", "observable", "mean", "se", "n"]).map_err(csv_error)?;
    for (r, t) in stats.times.iter().enumerate() {
        for (name, s) in stats.observable_names.iter().zip(&stats.observables[r]) {
            out.write_record([
                format_float(*t),
                name.clone(),
                format_float(s.mean()),
                format_float(s.std_error()),
                s.count().to_string(),
            ])
            .map_err(csv_error)?;
        }
    }
    out.flush()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotHeader {
    pub d: u16,
    pub radius: u32,
    pub dt: f64,
    pub seed: u64,
}

pub fn write_snapshots<W: Write>(header: &SnapshotHeader, traj: &Trajectory, mut w: W) -> io::Result<()> {
    let sites = Cube::new(header.d as usize, header.radius).len();
    w.write_all(&SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&header.d.to_le_bytes())?;
    w.write_all(&header.radius.to_le_bytes())?;
    w.write_all(&header.dt.to_le_bytes())?;
    w.write_all(&header.seed.to_le_bytes())?;
    w.write_all(&(traj.times.len() as u64).to_le_bytes())?;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        if x.values().len() != sites {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "state size does not match the header cube"));
        }
        w.write_all(&t.to_le_bytes())?;
        for v in x.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

fn take<const K: usize, R: Read>(r: &mut R) -> io::Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

/// Reads a snapshot file back into its header and `(time, values)` records.
pub fn read_snapshots<R: Read>(mut r: R) -> io::Result<(SnapshotHeader, Vec<(f64, Vec<f64>)>)> {
    let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
    if take::<4, _>(&mut r)? != SNAPSHOT_MAGIC {
        return Err(bad("not a snapshot file (bad magic)"));
    }
    if u16::from_le_bytes(take(&mut r)?) != SNAPSHOT_VERSION {
        return Err(bad("unsupported snapshot version"));
    }
    let header = SnapshotHeader {
        d: u16::from_le_bytes(take(&mut r)?),
        radius: u32::from_le_bytes(take(&mut r)?),
        dt: f64::from_le_bytes(take(&mut r)?),
        seed: u64::from_le_bytes(take(&mut r)?),
    };
    if header.d == 0 || header.d as usize > crate::lattice::MAX_DIMENSION {
        return Err(bad("snapshot dimension out of range"));
    }
    let count = u64::from_le_bytes(take(&mut r)?);
    let sites = Cube::new(header.d as usize, header.radius).len();
    let mut records = Vec::new();
    for _ in 0..count {
        let t = f64::from_le_bytes(take(&mut r)?);
        let values = (0..sites).map(|_| take(&mut r).map(f64::from_le_bytes)).collect::<io::Result<_>>()?;
        records.push((t, values));
    }
    Ok((header, records))
}
