//! Run-directory files: CSV series, JSON documents and the binary trajectory.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::Serialize;

use crate::energy::{DissipationReport, EnergyTerms};
use crate::error::{Error, Result};
use crate::solver::{HaltReason, SeriesRow, SpatialGrid, WaveHistory, WaveState};

pub const SERIES_HEADER: &str = "t,max_u,max_ut,l2_u,l2_ut";
pub const ENERGY_HEADER: &str = "s,E_total,E_kinetic,E_potential,E_mem_grad,E_mem_w,E_mem_mixed,E_init_grad,E_init_w,diss_lhs,diss_rhs,diss_residual";

const TRAJECTORY_MAGIC: &[u8; 8] = b"BLWUPTRJ";
const TRAJECTORY_VERSION: u32 = 1;

/// Shortest round-trip decimal form.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn join(values: &[f64]) -> String {
    values.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(",")
}

pub fn series_csv(rows: &[SeriesRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&join(&[r.t, r.max_u, r.max_ut, r.l2_u, r.l2_ut]));
        out.push('\n');
    }
    out
}

/// One row per energy sample; the dissipation columns are empty where the
/// centered difference is undefined.
pub fn energy_csv(energies: &[EnergyTerms], diss: &[DissipationReport]) -> String {
    let mut out = String::new();
    out.push_str(ENERGY_HEADER);
    out.push('\n');
    for (k, e) in energies.iter().enumerate() {
        out.push_str(&join(&[
            e.s,
            e.total,
            e.kinetic,
            e.potential,
            e.memory_grad,
            e.memory_w,
            e.memory_mixed,
            e.initial_grad,
            e.initial_w,
        ]));
        match k.checked_sub(1).and_then(|i| diss.get(i)) {
            Some(d) if d.s == e.s => {
                out.push(',');
                out.push_str(&join(&[d.lhs, d.rhs, d.lhs - d.rhs]));
            }
            _ => out.push_str(",,,"),
        }
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc)
        .map_err(|e| Error::Config(format!("cannot encode {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn halt_code(h: HaltReason) -> u8 {
    match h {
        HaltReason::ReachedTEnd => 0,
        HaltReason::BlowupDetected => 1,
        HaltReason::NumericalFailure => 2,
    }
}

fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> std::io::Result<()> {
    w.write_u64::<LittleEndian>(values.len() as u64)?;
    for &v in values {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

fn read_f64s<R: Read>(r: &mut R) -> std::io::Result<Vec<f64>> {
    let n = r.read_u64::<LittleEndian>()? as usize;
    let mut out = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut out)?;
    Ok(out)
}

/// Little-endian dump of a [`WaveHistory`].
pub fn write_trajectory(path: &Path, hist: &WaveHistory) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let go = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        w.write_all(TRAJECTORY_MAGIC)?;
        w.write_u32::<LittleEndian>(TRAJECTORY_VERSION)?;
        let g = &hist.grid;
        w.write_u32::<LittleEndian>(g.dim as u32)?;
        w.write_u64::<LittleEndian>(g.nx as u64)?;
        w.write_f64::<LittleEndian>(g.radius)?;
        w.write_f64::<LittleEndian>(hist.blowup_threshold)?;
        w.write_u8(halt_code(hist.halt_reason))?;
        let failure = hist.failure.as_deref().unwrap_or("");
        w.write_u64::<LittleEndian>(failure.len() as u64)?;
        w.write_all(failure.as_bytes())?;
        w.write_u64::<LittleEndian>(hist.states.len() as u64)?;
        for s in &hist.states {
            w.write_f64::<LittleEndian>(s.t)?;
            write_f64s(w, &s.u)?;
            write_f64s(w, &s.ut)?;
        }
        write_f64s(w, &hist.dt_sequence)?;
        w.write_u64::<LittleEndian>(hist.series.len() as u64)?;
        for r in &hist.series {
            for v in [r.t, r.max_u, r.max_ut, r.l2_u, r.l2_ut] {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        w.flush()
    };
    go(&mut w).map_err(|e| Error::io(path, e))
}

pub fn read_trajectory(path: &Path) -> Result<WaveHistory> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let bad = |msg: &str| Error::HistoryTooShort(format!("{}: {msg}", path.display()));
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != TRAJECTORY_MAGIC {
        return Err(bad("not a trajectory file"));
    }
    let go = |r: &mut BufReader<File>| -> std::io::Result<_> {
        let version = r.read_u32::<LittleEndian>()?;
        let dim = r.read_u32::<LittleEndian>()? as usize;
        let nx = r.read_u64::<LittleEndian>()? as usize;
        let radius = r.read_f64::<LittleEndian>()?;
        let threshold = r.read_f64::<LittleEndian>()?;
        let halt = r.read_u8()?;
        let flen = r.read_u64::<LittleEndian>()? as usize;
        let mut fbytes = vec![0u8; flen];
        r.read_exact(&mut fbytes)?;
        let n_states = r.read_u64::<LittleEndian>()? as usize;
        let mut states = Vec::with_capacity(n_states);
        for _ in 0..n_states {
            let t = r.read_f64::<LittleEndian>()?;
            let u = read_f64s(r)?;
            let ut = read_f64s(r)?;
            states.push(WaveState { t, u, ut });
        }
        let dt_sequence = read_f64s(r)?;
        let n_rows = r.read_u64::<LittleEndian>()? as usize;
        let mut series = Vec::with_capacity(n_rows);
        for _ in 0..n_rows {
            let mut v = [0.0; 5];
            r.read_f64_into::<LittleEndian>(&mut v)?;
            series.push(SeriesRow {
                t: v[0],
                max_u: v[1],
                max_ut: v[2],
                l2_u: v[3],
                l2_ut: v[4],
            });
        }
        Ok((version, dim, nx, radius, threshold, halt, fbytes, states, dt_sequence, series))
    };
    let (version, dim, nx, radius, threshold, halt, fbytes, states, dt_sequence, series) =
        go(&mut r).map_err(|e| Error::io(path, e))?;
    if version != TRAJECTORY_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    if states.is_empty() || states.iter().any(|s| s.u.len() != nx || s.ut.len() != nx) {
        return Err(bad("state sizes do not match the grid"));
    }
    let halt_reason = match halt {
        0 => HaltReason::ReachedTEnd,
        1 => HaltReason::BlowupDetected,
        2 => HaltReason::NumericalFailure,
        _ => return Err(bad("unknown halt reason")),
    };
    let failure = String::from_utf8(fbytes).map_err(|_| bad("failure message is not UTF-8"))?;
    Ok(WaveHistory {
        grid: SpatialGrid::new(dim, radius, nx)?,
        states,
        dt_sequence,
        series,
        halt_reason,
        blowup_threshold: threshold,
        failure: (!failure.is_empty()).then_some(failure),
    })
}
