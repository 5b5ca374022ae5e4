//! Binary field snapshots for exact state exchange.
//!
//! Layout: magic `SPF1`, u32 dimension count, one u32 node count per axis,
//! then row-major (x fastest) node triples as little-endian f64. Reading
//! validates the magic, the shape, and the sphere invariant.

use std::path::Path;

use crate::geometry::SphereField;
use crate::grid::{BoxGrid, VectorField};
use crate::vec3::Vec3;

use super::IoError;

const MAGIC: &[u8; 4] = b"SPF1";

/// Violations beyond this on read are refused (or renormalized on request).
pub const SNAPSHOT_SPHERE_TOL: f64 = 1e-6;

pub fn snapshot_to_bytes(field: &SphereField) -> Vec<u8> {
    let grid = field.grid();
    let dims = grid.dims();
    let mut out = Vec::with_capacity(4 + 4 + 4 * dims + 24 * field.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(dims as u32).to_le_bytes());
    for axis in 0..dims {
        out.extend_from_slice(&(grid.nodes(axis) as u32).to_le_bytes());
    }
    for v in field.values() {
        out.extend_from_slice(&v.x.to_le_bytes());
        out.extend_from_slice(&v.y.to_le_bytes());
        out.extend_from_slice(&v.z.to_le_bytes());
    }
    out
}

/// Decode a snapshot without enforcing the sphere invariant; returns the raw
/// field and its measured violation.
pub fn snapshot_from_bytes(bytes: &[u8]) -> Result<(VectorField, f64), IoError> {
    let fail = |msg: &str| IoError::Format(format!("snapshot: {msg}"));
    if bytes.len() < 8 {
        return Err(fail("truncated header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(fail("bad magic (expected SPF1)"));
    }
    let dims = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if !(1..=3).contains(&dims) {
        return Err(fail(&format!("dimension {dims} out of range")));
    }
    let header_len = 8 + 4 * dims;
    if bytes.len() < header_len {
        return Err(fail("truncated shape header"));
    }
    let mut nodes = Vec::with_capacity(dims);
    for axis in 0..dims {
        let off = 8 + 4 * axis;
        let n = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
        if n < 3 {
            return Err(fail(&format!("axis {axis} has {n} nodes, need at least 3")));
        }
        nodes.push(n);
    }
    let grid = BoxGrid::new(dims, &nodes)
        .map_err(|e| fail(&e.to_string()))?;
    let expected = header_len + 24 * grid.node_count();
    if bytes.len() != expected {
        return Err(fail(&format!(
            "payload length {} does not match shape (expected {expected})",
            bytes.len()
        )));
    }
    let mut values = Vec::with_capacity(grid.node_count());
    let mut off = header_len;
    for _ in 0..grid.node_count() {
        let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let v = Vec3::new(f(off), f(off + 8), f(off + 16));
        if !v.is_finite() {
            return Err(fail("non-finite node value"));
        }
        values.push(v);
        off += 24;
    }
    let field = VectorField::new(grid, values).expect("sized by construction");
    let violation = field
        .values()
        .iter()
        .map(|v| (v.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok((field, violation))
}

pub fn write_snapshot(path: &Path, field: &SphereField) -> Result<(), IoError> {
    std::fs::write(path, snapshot_to_bytes(field)).map_err(|e| IoError::file(path, e))
}

/// Read a snapshot, enforcing the sphere invariant. A violation beyond
/// `SNAPSHOT_SPHERE_TOL` is an error unless `renormalize` is set, in which
/// case the field is renormalized and a warning describing the violation is
/// returned alongside it.
pub fn read_snapshot(
    path: &Path,
    renormalize: bool,
) -> Result<(SphereField, Option<String>), IoError> {
    let bytes = std::fs::read(path).map_err(|e| IoError::file(path, e))?;
    let (field, violation) = snapshot_from_bytes(&bytes)?;
    if violation <= SNAPSHOT_SPHERE_TOL {
        let u = SphereField::with_tol(field, SNAPSHOT_SPHERE_TOL)
            .map_err(|e| IoError::Format(e.to_string()))?;
        return Ok((u, None));
    }
    let warning = format!(
        "{}: sphere violation {violation:.3e} exceeds {SNAPSHOT_SPHERE_TOL:.1e}",
        path.display()
    );
    if renormalize {
        let u = SphereField::renormalized(field).map_err(|e| IoError::Format(e.to_string()))?;
        Ok((u, Some(format!("{warning}; field renormalized on load"))))
    } else {
        Err(IoError::Format(format!(
            "{warning}; pass renormalize to load anyway"
        )))
    }
}
