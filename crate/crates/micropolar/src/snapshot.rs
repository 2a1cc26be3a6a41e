//! On-disk field snapshots, run manifests, and stored-state integrity checks.
//!
//! # File layout
//!
//! A snapshot is a flat little-endian binary file:
//!
//! ```text
//! magic      8 bytes   b"MPSNAP01"
//! n_modes    u32       primary band n (u, θ); K is stored on band 2n
//! size       u32       physical grid points per axis
//! shape      u8        0 = box band, 1 = Euclidean band
//! time       f64       simulation time stamp
//! sections   u32       always 12
//! ```
//!
//! followed by twelve sections in fixed order — `u₁ u₂ u₃`, `θ₁ θ₂ θ₃`, then
//! the six independent slots of the symmetric microinertia deviation
//! `K₁₁ K₂₂ K₃₃ K₁₂ K₁₃ K₂₃` — each laid out as
//!
//! ```text
//! tag        4 bytes   ASCII section name (e.g. b"u__1", b"K_13")
//! band       u32       band limit of this component
//! count      u64       number of retained modes
//! coeffs     count × (f64 re, f64 im)
//! ```
//!
//! Coefficients appear in the grid's deterministic mode order, which includes
//! both members of every conjugate pair on the `k₁ = 0` plane; a file written
//! and read back therefore reproduces the state bit for bit, and writing the
//! same state twice produces identical bytes.
//!
//! # Integrity
//!
//! The format carries no checksum on purpose: [`check_state`] verifies the
//! *semantic* invariants a valid state must satisfy — conjugate symmetry of
//! every component (the stored spectrum must describe real fields), a
//! divergence-free velocity, and a mean-free velocity — and reports each
//! violation with the offending component and wavevector, so a corrupted
//! coefficient is not merely detected but located.

use crate::field::Scalar;
use crate::grid::{BandShape, Grid, GridError};
use crate::state::State;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

const MAGIC: &[u8; 8] = b"MPSNAP01";

/// Section tags in file order: velocity, angular velocity, microinertia slots.
const SECTION_TAGS: [&[u8; 4]; 12] = [
    b"u__1", b"u__2", b"u__3", b"th_1", b"th_2", b"th_3", b"K_11", b"K_22", b"K_33", b"K_12",
    b"K_13", b"K_23",
];

/// Human-readable component names in section order, used in integrity reports.
pub const COMPONENT_NAMES: [&str; 12] = [
    "u1", "u2", "u3", "theta1", "theta2", "theta3", "K11", "K22", "K33", "K12", "K13", "K23",
];

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a field snapshot (bad magic)")]
    BadMagic,
    #[error("malformed snapshot: {0}")]
    Malformed(String),
    #[error("snapshot grid is invalid: {0}")]
    Grid(#[from] GridError),
    #[error("manifest i/o: {0}")]
    ManifestJson(#[from] serde_json::Error),
}

fn fill(r: &mut impl Read, buf: &mut [u8]) -> Result<(), SnapshotError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            SnapshotError::Malformed("truncated file".into())
        } else {
            SnapshotError::Io(e)
        }
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32, SnapshotError> {
    let mut b = [0u8; 4];
    fill(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64, SnapshotError> {
    let mut b = [0u8; 8];
    fill(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64, SnapshotError> {
    let mut b = [0u8; 8];
    fill(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn components(z: &State) -> [&Scalar; 12] {
    let [u1, u2, u3] = &z.u.0;
    let [t1, t2, t3] = &z.theta.0;
    let [k1, k2, k3, k4, k5, k6] = &z.k.0;
    [u1, u2, u3, t1, t2, t3, k1, k2, k3, k4, k5, k6]
}

fn components_mut(z: &mut State) -> [&mut Scalar; 12] {
    let [u1, u2, u3] = &mut z.u.0;
    let [t1, t2, t3] = &mut z.theta.0;
    let [k1, k2, k3, k4, k5, k6] = &mut z.k.0;
    [u1, u2, u3, t1, t2, t3, k1, k2, k3, k4, k5, k6]
}

/// Write `z` at time stamp `t` to `path` in the layout documented on this
/// module. The write is deterministic: the same state always produces the
/// same bytes.
pub fn write_state<P: AsRef<Path>>(path: P, z: &State, t: f64) -> Result<(), SnapshotError> {
    let grid = z.grid().clone();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(grid.n_modes as u32).to_le_bytes())?;
    w.write_all(&(grid.size as u32).to_le_bytes())?;
    let shape = match grid.shape {
        BandShape::Box => 0u8,
        BandShape::Euclid => 1u8,
    };
    w.write_all(&[shape])?;
    w.write_all(&t.to_le_bytes())?;
    w.write_all(&12u32.to_le_bytes())?;
    for (tag, s) in SECTION_TAGS.iter().zip(components(z)) {
        w.write_all(*tag)?;
        w.write_all(&(s.band as u32).to_le_bytes())?;
        let modes = s.modes();
        w.write_all(&(modes.len() as u64).to_le_bytes())?;
        for m in modes.iter() {
            let c = s.c[m.idx];
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a snapshot back as `(state, time)`. The grid is reconstructed from
/// the stored metadata; every structural field (magic, bands, mode counts,
/// section tags) is validated before coefficients are accepted.
pub fn read_state<P: AsRef<Path>>(path: P) -> Result<(State, f64), SnapshotError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    fill(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    let n = read_u32(&mut r)? as usize;
    let size = read_u32(&mut r)? as usize;
    let mut shape_b = [0u8; 1];
    fill(&mut r, &mut shape_b)?;
    let shape = match shape_b[0] {
        0 => BandShape::Box,
        1 => BandShape::Euclid,
        other => {
            return Err(SnapshotError::Malformed(format!(
                "unknown band shape code {other}"
            )))
        }
    };
    if n == 0 || n > 4096 || size > 1 << 20 {
        return Err(SnapshotError::Malformed(format!(
            "implausible grid metadata: n = {n}, size = {size}"
        )));
    }
    let t = read_f64(&mut r)?;
    let sections = read_u32(&mut r)?;
    if sections != 12 {
        return Err(SnapshotError::Malformed(format!(
            "expected 12 sections, found {sections}"
        )));
    }
    let grid = Grid::with_size(n, size, shape)?;
    let mut z = State::zeros(&grid);
    let expected_bands = {
        let n = grid.band_primary();
        let n2 = grid.band_k();
        [n, n, n, n, n, n, n2, n2, n2, n2, n2, n2]
    };
    for ((tag, want_band), s) in SECTION_TAGS
        .iter()
        .zip(expected_bands)
        .zip(components_mut(&mut z))
    {
        let mut got_tag = [0u8; 4];
        fill(&mut r, &mut got_tag)?;
        if &got_tag != *tag {
            return Err(SnapshotError::Malformed(format!(
                "section tag mismatch: expected {:?}, found {:?}",
                String::from_utf8_lossy(*tag),
                String::from_utf8_lossy(&got_tag)
            )));
        }
        let band = read_u32(&mut r)? as usize;
        if band != want_band {
            return Err(SnapshotError::Malformed(format!(
                "section {} stored at band {band}, expected {want_band}",
                String::from_utf8_lossy(*tag)
            )));
        }
        let modes = grid.modes(band);
        let count = read_u64(&mut r)? as usize;
        if count != modes.len() {
            return Err(SnapshotError::Malformed(format!(
                "section {} holds {count} modes, band {band} has {}",
                String::from_utf8_lossy(*tag),
                modes.len()
            )));
        }
        for m in modes.iter() {
            let re = read_f64(&mut r)?;
            let im = read_f64(&mut r)?;
            s.c[m.idx] = num_complex::Complex::new(re, im);
        }
    }
    // Trailing garbage means the file is not what the header claims.
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok((z, t)),
        _ => Err(SnapshotError::Malformed(
            "trailing bytes after final section".into(),
        )),
    }
}

/// One snapshot file and its time stamp.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ManifestEntry {
    pub t: f64,
    pub file: String,
}

/// Index of a simulation run's output directory: which scenario produced it
/// and where each stored snapshot sits in time.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub scenario: String,
    /// Primary band of the run.
    pub band: usize,
    pub dt: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), SnapshotError> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Manifest, SnapshotError> {
        let r = BufReader::new(File::open(path)?);
        Ok(serde_json::from_reader(r)?)
    }

    /// Snapshot times in file order.
    pub fn times(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.t).collect()
    }
}

/// A conjugate-symmetry defect: the coefficients at `k` and `−k` (both held
/// explicitly on the `k₁ = 0` plane) fail to be complex conjugates, so the
/// stored component is not the spectrum of a real field.
#[derive(Clone, Debug, Serialize)]
pub struct HermitianViolation {
    /// Component name, one of [`COMPONENT_NAMES`].
    pub component: &'static str,
    /// Representative wavevector of the offending pair.
    pub k: [i32; 3],
    /// `|c(k) − conj(c(−k))|`.
    pub error: f64,
}

/// What [`check_state`] found. `clean` is the single pass/fail verdict; the
/// other fields say what broke and where.
#[derive(Clone, Debug, Serialize)]
pub struct IntegrityReport {
    /// Conjugate-symmetry defects, worst first.
    pub hermitian: Vec<HermitianViolation>,
    pub max_hermitian_error: f64,
    /// `‖∇·u‖_{L²}`.
    pub divergence_u: f64,
    pub mean_u: [f64; 3],
    pub tol: f64,
    pub clean: bool,
}

/// Verify the semantic invariants of a stored state: every component's
/// spectrum must have exact conjugate symmetry across the `k₁ = 0` plane
/// (real zero mode included), and the velocity must be divergence-free with
/// zero mean. Violations are reported with component and wavevector.
///
/// `tol` is relative: a symmetry defect counts when it exceeds
/// `tol · (1 + max|c|)` over the component, and the divergence/mean checks
/// scale the same way with `‖u‖`.
pub fn check_state(z: &State, tol: f64) -> IntegrityReport {
    let grid: &Arc<Grid> = z.grid();
    let mut hermitian = Vec::new();
    let mut max_err = 0.0f64;
    for (name, s) in COMPONENT_NAMES.iter().zip(components(z)) {
        let scale = s.c.iter().fold(0.0f64, |a, c| a.max(c.norm()));
        let modes = s.modes();
        for m in modes.iter() {
            if m.k[0] != 0 || (m.k[1], m.k[2]) < (0, 0) {
                continue;
            }
            let err = if m.k == [0, 0, 0] {
                s.c[m.idx].im.abs()
            } else {
                let mirror = grid.spec_idx(0, grid.index_of_k(-m.k[1]), grid.index_of_k(-m.k[2]));
                (s.c[m.idx] - s.c[mirror].conj()).norm()
            };
            max_err = max_err.max(err);
            if err > tol * (1.0 + scale) {
                hermitian.push(HermitianViolation {
                    component: name,
                    k: m.k,
                    error: err,
                });
            }
        }
    }
    hermitian.sort_by(|a, b| b.error.total_cmp(&a.error));
    let u_scale = 1.0 + z.u.norm_l2();
    let divergence_u = z.u.div().norm_l2();
    let mean_u = z.u.mean();
    let clean = hermitian.is_empty()
        && divergence_u <= tol * u_scale
        && mean_u.iter().all(|m| m.abs() <= tol * u_scale);
    IntegrityReport {
        hermitian,
        max_hermitian_error: max_err,
        divergence_u,
        mean_u,
        tol,
        clean,
    }
}
