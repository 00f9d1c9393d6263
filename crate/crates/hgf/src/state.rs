//! Flow state (metric + velocity at one instant) and bit-exact snapshot I/O.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{HgfError, Result};
use crate::field::{Symmetry, TensorField};
use crate::grid::Grid;
use crate::linalg::sym_min_eig;

/// Smallest metric eigenvalue still accepted as positive definite. Guards
/// the inverse computation without rejecting small legitimate perturbations.
pub const SPD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    time: f64,
    metric: TensorField,
    velocity: TensorField,
}

impl FlowState {
    pub fn new(time: f64, metric: TensorField, velocity: TensorField) -> Result<Self> {
        let state = FlowState {
            time,
            metric,
            velocity,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        for field in [&self.metric, &self.velocity] {
            if field.valence() != (0, 2) || field.symmetry() != Symmetry::SymmetricPair {
                return Err(HgfError::ShapeMismatch(
                    "flow state fields must be packed symmetric (0,2) tensors".into(),
                ));
            }
        }
        self.metric.same_grid(&self.velocity)?;
        if !self.time.is_finite() {
            return Err(HgfError::NonFinite { node: 0 });
        }
        self.metric.validate_finite()?;
        self.velocity.validate_finite()?;
        let n = self.grid().dim();
        for node in 0..self.grid().node_count() {
            let min_eig = sym_min_eig(self.metric.node(node), n);
            if !(min_eig > SPD_TOLERANCE) {
                return Err(HgfError::SingularMetric { node, min_eig });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn time(&self) -> f64 {
        self.time
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        self.metric.grid()
    }

    #[inline]
    pub fn metric(&self) -> &TensorField {
        &self.metric
    }

    #[inline]
    pub fn velocity(&self) -> &TensorField {
        &self.velocity
    }

    /// Smallest metric eigenvalue over all nodes, with the node attaining it.
    pub fn min_metric_eigenvalue(&self) -> (f64, usize) {
        let n = self.grid().dim();
        let mut best = (f64::INFINITY, 0usize);
        for node in 0..self.grid().node_count() {
            let e = sym_min_eig(self.metric.node(node), n);
            if e < best.0 {
                best = (e, node);
            }
        }
        best
    }
}

const MAGIC: &[u8; 4] = b"HGF1";
const FORMAT_VERSION: u32 = 1;

/// Write a snapshot: magic, format version u32, dim u32, points per axis
/// (dim x u64), axis lengths (dim x f64), time f64, then metric components
/// and velocity components as little-endian f64 in row-major grid order with
/// packed-symmetric (i <= j) component order. Written atomically via a
/// sibling temp file and rename.
pub fn write_snapshot(state: &FlowState, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        let grid = state.grid();
        w.write_all(&(grid.dim() as u32).to_le_bytes())?;
        for &p in grid.points() {
            w.write_all(&(p as u64).to_le_bytes())?;
        }
        for &l in grid.lengths() {
            w.write_all(&l.to_le_bytes())?;
        }
        w.write_all(&state.time().to_le_bytes())?;
        for &v in state.metric().data() {
            w.write_all(&v.to_le_bytes())?;
        }
        for &v in state.velocity().data() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        w.get_ref().sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_snapshot(path: &Path) -> Result<FlowState> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(HgfError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(HgfError::VersionMismatch(version));
    }
    let dim = read_u32(&mut r)? as usize;
    if dim == 0 || dim > 16 {
        return Err(HgfError::ShapeMismatch(format!(
            "implausible dimension {dim}"
        )));
    }
    let mut points = Vec::with_capacity(dim);
    for _ in 0..dim {
        points.push(read_u64(&mut r)? as usize);
    }
    let mut lengths = Vec::with_capacity(dim);
    for _ in 0..dim {
        lengths.push(read_f64(&mut r)?);
    }
    let grid = Grid::new(dim, &points, &lengths)?;
    let time = read_f64(&mut r)?;
    let comps = dim * (dim + 1) / 2 * grid.node_count();
    let read_block = |r: &mut BufReader<File>| -> Result<Vec<f64>> {
        let mut data = Vec::with_capacity(comps);
        for _ in 0..comps {
            data.push(read_f64(r)?);
        }
        Ok(data)
    };
    let metric_data = read_block(&mut r)?;
    let velocity_data = read_block(&mut r)?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(HgfError::ShapeMismatch(
            "trailing bytes after velocity block".into(),
        ));
    }
    let metric = TensorField::from_raw(&grid, (0, 2), Symmetry::SymmetricPair, metric_data)?;
    let velocity = TensorField::from_raw(&grid, (0, 2), Symmetry::SymmetricPair, velocity_data)?;
    FlowState::new(time, metric, velocity)
}
