//! Binary field snapshots.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic   4 bytes  "MSSN"
//! version 1 byte   (1)
//! dim     1 byte
//! m       u32      points per axis
//! n       u32      species count
//! t       f64      simulation time
//! eps     f64      perturbation parameter
//! c_bar   n * f64
//! payload n * m^dim * f64, species-major, row-major per field
//! ```

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use msflux_core::grid::{ScalarField, SpeciesField, TorusGrid};
use msflux_core::SimulationState64;

use crate::error::CliError;

const MAGIC: &[u8; 4] = b"MSSN";
const VERSION: u8 = 1;

/// Parsed snapshot contents.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub dim: usize,
    pub m: usize,
    pub n_species: usize,
    pub t: f64,
    pub eps: f64,
    pub c_bar: Vec<f64>,
    pub payload: Vec<f64>,
}

impl Snapshot {
    pub fn into_field(self, grid: TorusGrid) -> SpeciesField<f64> {
        let points = grid.n_points();
        let fields = (0..self.n_species)
            .map(|i| {
                let chunk = self.payload[i * points..(i + 1) * points].to_vec();
                ScalarField::from_data(grid, chunk).expect("length checked on read")
            })
            .collect();
        SpeciesField::from_fields(fields)
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

/// Writes the fluctuation field of a state.
pub fn write_snapshot(state: &SimulationState64, path: &Path) -> Result<(), CliError> {
    let grid = state.c_tilde.grid();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    buf.push(grid.dim() as u8);
    buf.extend_from_slice(&(grid.points_per_axis() as u32).to_le_bytes());
    buf.extend_from_slice(&(state.c_tilde.n_species() as u32).to_le_bytes());
    buf.extend_from_slice(&state.t.to_le_bytes());
    buf.extend_from_slice(&state.eps.to_le_bytes());
    for &v in &state.c_bar {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for i in 0..state.c_tilde.n_species() {
        for &v in state.c_tilde.species(i).data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(&buf).map_err(|e| io_err(path, e))?;
    Ok(())
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8], CliError> {
    if bytes.len() < n {
        return Err(CliError::HeaderMismatch(format!(
            "truncated file while reading {what}"
        )));
    }
    let (head, tail) = bytes.split_at(n);
    *bytes = tail;
    Ok(head)
}

fn read_f64(bytes: &mut &[u8], what: &str) -> Result<f64, CliError> {
    let chunk = take(bytes, 8, what)?;
    Ok(f64::from_le_bytes(chunk.try_into().expect("8 bytes")))
}

/// Reads and structurally validates a snapshot file.
pub fn read_snapshot(path: &Path) -> Result<Snapshot, CliError> {
    let mut raw = Vec::new();
    File::open(path)
        .map_err(|e| io_err(path, e))?
        .read_to_end(&mut raw)
        .map_err(|e| io_err(path, e))?;
    let mut bytes = raw.as_slice();

    let magic = take(&mut bytes, 4, "magic")?;
    if magic != MAGIC {
        return Err(CliError::HeaderMismatch("bad magic".to_string()));
    }
    let version = take(&mut bytes, 1, "version")?[0];
    if version != VERSION {
        return Err(CliError::HeaderMismatch(format!(
            "unsupported format version {version}"
        )));
    }
    let dim = take(&mut bytes, 1, "dim")?[0] as usize;
    let m = u32::from_le_bytes(take(&mut bytes, 4, "m")?.try_into().expect("4 bytes")) as usize;
    let n = u32::from_le_bytes(take(&mut bytes, 4, "n")?.try_into().expect("4 bytes")) as usize;
    if !(1..=3).contains(&dim) || n == 0 || m == 0 {
        return Err(CliError::HeaderMismatch(format!(
            "implausible header: dim={dim} m={m} n={n}"
        )));
    }
    let t = read_f64(&mut bytes, "t")?;
    let eps = read_f64(&mut bytes, "eps")?;
    let mut c_bar = Vec::with_capacity(n);
    for i in 0..n {
        c_bar.push(read_f64(&mut bytes, &format!("c_bar[{i}]"))?);
    }
    let points = m.pow(dim as u32);
    let expected = n * points;
    if bytes.len() != expected * 8 {
        return Err(CliError::HeaderMismatch(format!(
            "payload length {} does not match n * m^dim * 8 = {}",
            bytes.len(),
            expected * 8
        )));
    }
    let mut payload = Vec::with_capacity(expected);
    for _ in 0..expected {
        payload.push(read_f64(&mut bytes, "payload")?);
    }
    Ok(Snapshot {
        dim,
        m,
        n_species: n,
        t,
        eps,
        c_bar,
        payload,
    })
}

/// Verifies that a snapshot belongs to the configured scenario.
pub fn check_header(
    snap: &Snapshot,
    grid: TorusGrid,
    n_species: usize,
    eps: f64,
    c_bar: &[f64],
) -> Result<(), CliError> {
    if snap.dim != grid.dim() || snap.m != grid.points_per_axis() {
        return Err(CliError::HeaderMismatch(format!(
            "grid mismatch: snapshot {}d m={}, config {}d m={}",
            snap.dim,
            snap.m,
            grid.dim(),
            grid.points_per_axis()
        )));
    }
    if snap.n_species != n_species {
        return Err(CliError::HeaderMismatch(format!(
            "species mismatch: snapshot {}, config {}",
            snap.n_species, n_species
        )));
    }
    if snap.eps != eps {
        return Err(CliError::HeaderMismatch(format!(
            "eps mismatch: snapshot {:e}, config {:e}",
            snap.eps, eps
        )));
    }
    if snap.c_bar != c_bar {
        return Err(CliError::HeaderMismatch(
            "equilibrium concentrations differ".to_string(),
        ));
    }
    Ok(())
}
