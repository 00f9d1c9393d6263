//! Tensor-valued fields sampled on a periodic grid.
//!
//! Storage is node-major: all components of one node are contiguous.
//! Component multi-indices list contravariant slots first, then covariant
//! ones (a connection coefficient C^k_ij is addressed as [k, i, j]).
//! A declared symmetric pair always refers to the last two slots and is
//! stored packed (i <= j), so pair symmetry holds exactly by construction.

use crate::error::{HgfError, Result};
use crate::grid::{sym_count, sym_index, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    /// Dense storage, no symmetry assumed.
    None,
    /// Last two indices symmetric, stored packed.
    SymmetricPair,
    /// Rank-4 curvature-type tensor: antisymmetric in (0,1) and (2,3),
    /// symmetric under pair interchange. Stored dense; the symmetries are
    /// checked by diagnostics, never exploited.
    Riemann,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    grid: Grid,
    valence: (u8, u8),
    symmetry: Symmetry,
    comps: usize,
    data: Vec<f64>,
}

fn comps_per_node(dim: usize, rank: usize, symmetry: Symmetry) -> usize {
    match symmetry {
        Symmetry::None | Symmetry::Riemann => dim.pow(rank as u32),
        Symmetry::SymmetricPair => {
            assert!(rank >= 2, "symmetric pair needs rank >= 2");
            dim.pow((rank - 2) as u32) * sym_count(dim)
        }
    }
}

impl TensorField {
    pub fn zeros(grid: &Grid, valence: (u8, u8), symmetry: Symmetry) -> Self {
        let rank = (valence.0 + valence.1) as usize;
        if symmetry == Symmetry::Riemann {
            assert_eq!(rank, 4, "riemann symmetry is for rank-4 tensors");
        }
        let comps = comps_per_node(grid.dim(), rank, symmetry);
        TensorField {
            grid: grid.clone(),
            valence,
            symmetry,
            comps,
            data: vec![0.0; comps * grid.node_count()],
        }
    }

    pub fn from_raw(
        grid: &Grid,
        valence: (u8, u8),
        symmetry: Symmetry,
        data: Vec<f64>,
    ) -> Result<Self> {
        let mut f = TensorField::zeros(grid, valence, symmetry);
        if data.len() != f.data.len() {
            return Err(HgfError::ShapeMismatch(format!(
                "expected {} components, got {}",
                f.data.len(),
                data.len()
            )));
        }
        f.data = data;
        Ok(f)
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn valence(&self) -> (u8, u8) {
        self.valence
    }

    #[inline]
    pub fn rank(&self) -> usize {
        (self.valence.0 + self.valence.1) as usize
    }

    #[inline]
    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    /// Stored components per node.
    #[inline]
    pub fn comps(&self) -> usize {
        self.comps
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Storage slot for a full multi-index, canonicalizing the symmetric pair.
    pub fn comp_index(&self, idx: &[usize]) -> usize {
        let n = self.grid.dim();
        debug_assert_eq!(idx.len(), self.rank());
        match self.symmetry {
            Symmetry::None | Symmetry::Riemann => {
                idx.iter().fold(0, |acc, &i| acc * n + i)
            }
            Symmetry::SymmetricPair => {
                let r = self.rank();
                let lead = idx[..r - 2].iter().fold(0, |acc, &i| acc * n + i);
                lead * sym_count(n) + sym_index(n, idx[r - 2], idx[r - 1])
            }
        }
    }

    #[inline]
    pub fn at(&self, node: usize, idx: &[usize]) -> f64 {
        self.data[node * self.comps + self.comp_index(idx)]
    }

    #[inline]
    pub fn set(&mut self, node: usize, idx: &[usize], value: f64) {
        let c = self.comp_index(idx);
        self.data[node * self.comps + c] = value;
    }

    #[inline]
    pub fn node(&self, node: usize) -> &[f64] {
        &self.data[node * self.comps..(node + 1) * self.comps]
    }

    #[inline]
    pub fn node_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.data[node * self.comps..(node + 1) * self.comps]
    }

    pub fn same_grid(&self, other: &TensorField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(HgfError::GridMismatch)
        }
    }

    pub fn validate_finite(&self) -> Result<()> {
        for (k, v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(HgfError::NonFinite {
                    node: k / self.comps,
                });
            }
        }
        Ok(())
    }

    /// Largest absolute component over the whole field.
    pub fn sup_norm(&self) -> f64 {
        let mut m = 0.0f64;
        for &v in &self.data {
            m = m.max(v.abs());
        }
        m
    }

    /// Grid L2 norm: sqrt(cell volume x sum of squared components).
    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.data.iter().map(|v| v * v).sum();
        (self.grid.cell_volume() * sum).sqrt()
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> TensorField {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = f(*v);
        }
        out
    }

    /// Componentwise a*self + b*other; fields must match in shape.
    pub fn linear_comb(&self, a: f64, other: &TensorField, b: f64) -> Result<TensorField> {
        self.same_grid(other)?;
        if self.comps != other.comps {
            return Err(HgfError::ShapeMismatch(format!(
                "component counts differ: {} vs {}",
                self.comps, other.comps
            )));
        }
        let mut out = self.clone();
        for (o, &v) in out.data.iter_mut().zip(&other.data) {
            *o = a * *o + b * v;
        }
        Ok(out)
    }

    /// Cyclic rotation of the field by whole grid steps along each axis.
    pub fn rotated(&self, shift: &[isize]) -> TensorField {
        let mut out = self.clone();
        let grid = &self.grid;
        let nodes = grid.node_count();
        for node in 0..nodes {
            let mut dst = node;
            for (axis, &s) in shift.iter().enumerate() {
                dst = grid.neighbor(dst, axis, s);
            }
            out.data[dst * self.comps..(dst + 1) * self.comps]
                .copy_from_slice(self.node(node));
        }
        out
    }

    /// Iterate canonical component multi-indices in storage order.
    pub fn canonical_indices(&self) -> Vec<Vec<usize>> {
        canonical_indices(self.grid.dim(), self.rank(), self.symmetry)
    }
}

pub fn canonical_indices(dim: usize, rank: usize, symmetry: Symmetry) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    match symmetry {
        Symmetry::None | Symmetry::Riemann => {
            let total = dim.pow(rank as u32);
            for c in 0..total {
                let mut idx = vec![0usize; rank];
                let mut rest = c;
                for slot in (0..rank).rev() {
                    idx[slot] = rest % dim;
                    rest /= dim;
                }
                out.push(idx);
            }
        }
        Symmetry::SymmetricPair => {
            let lead_rank = rank - 2;
            let lead_total = dim.pow(lead_rank as u32);
            for lead in 0..lead_total {
                let mut head = vec![0usize; lead_rank];
                let mut rest = lead;
                for slot in (0..lead_rank).rev() {
                    head[slot] = rest % dim;
                    rest /= dim;
                }
                for i in 0..dim {
                    for j in i..dim {
                        let mut idx = head.clone();
                        idx.push(i);
                        idx.push(j);
                        out.push(idx);
                    }
                }
            }
        }
    }
    out
}

/// Sample a pointwise component function on every grid node.
///
/// `f` receives the node position and a component multi-index. Declared
/// symmetries are spot-checked on a fixed sample of nodes by evaluating the
/// swapped index orders; a mismatch is a symmetry-violation error.
pub fn sample_field<F>(
    f: F,
    grid: &Grid,
    valence: (u8, u8),
    symmetry: Symmetry,
) -> Result<TensorField>
where
    F: Fn(&[f64], &[usize]) -> f64,
{
    let mut field = TensorField::zeros(grid, valence, symmetry);
    let indices = field.canonical_indices();
    let nodes = grid.node_count();
    let mut pos = vec![0.0; grid.dim()];
    for node in 0..nodes {
        grid.positions(node, &mut pos);
        let slice = &mut field.data[node * field.comps..(node + 1) * field.comps];
        for (c, idx) in indices.iter().enumerate() {
            slice[c] = f(&pos, idx);
        }
    }

    // Fixed spot-check sample: four nodes spread over the grid.
    let sample = [0, nodes / 3, (2 * nodes) / 3, nodes - 1];
    match symmetry {
        Symmetry::None => {}
        Symmetry::SymmetricPair => {
            let rank = field.rank();
            for &node in &sample {
                grid.positions(node, &mut pos);
                for idx in &indices {
                    let mut swapped = idx.clone();
                    swapped.swap(rank - 2, rank - 1);
                    if f(&pos, idx) != f(&pos, &swapped) {
                        return Err(HgfError::SymmetryViolation {
                            node,
                            indices: idx.clone(),
                        });
                    }
                }
            }
        }
        Symmetry::Riemann => {
            let n = grid.dim();
            for &node in &sample {
                grid.positions(node, &mut pos);
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            for l in 0..n {
                                let v = f(&pos, &[i, j, k, l]);
                                let bad = f(&pos, &[j, i, k, l]) != -v
                                    || f(&pos, &[i, j, l, k]) != -v
                                    || f(&pos, &[k, l, i, j]) != v;
                                if bad {
                                    return Err(HgfError::SymmetryViolation {
                                        node,
                                        indices: vec![i, j, k, l],
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    field.validate_finite()?;
    Ok(field)
}

/// 4th-order central periodic finite difference along one axis, applied
/// componentwise. `order` selects the first or second derivative.
///
/// Both stencils are evaluated in difference form so that derivatives of
/// constant fields vanish exactly:
///   d1: (8(f[+1] - f[-1]) - (f[+2] - f[-2])) / (12 dx)
///   d2: (16(f[+1] - f) + 16(f[-1] - f) - (f[+2] - f) - (f[-2] - f)) / (12 dx^2)
pub fn partial_derivative(field: &TensorField, axis: usize, order: usize) -> Result<TensorField> {
    let grid = field.grid();
    if axis >= grid.dim() {
        return Err(HgfError::AxisOutOfRange {
            axis,
            dim: grid.dim(),
        });
    }
    assert!(order == 1 || order == 2, "order must be 1 or 2");
    let mut out = field.clone();
    let comps = field.comps;
    let dx = grid.spacing()[axis];
    let nodes = grid.node_count();
    let inv1 = 1.0 / (12.0 * dx);
    let inv2 = 1.0 / (12.0 * dx * dx);
    for node in 0..nodes {
        let p1 = field.node(grid.neighbor(node, axis, 1));
        let m1 = field.node(grid.neighbor(node, axis, -1));
        let p2 = field.node(grid.neighbor(node, axis, 2));
        let m2 = field.node(grid.neighbor(node, axis, -2));
        let f0 = field.node(node);
        let dst = &mut out.data[node * comps..(node + 1) * comps];
        if order == 1 {
            for c in 0..comps {
                dst[c] = (8.0 * (p1[c] - m1[c]) - (p2[c] - m2[c])) * inv1;
            }
        } else {
            for c in 0..comps {
                dst[c] = (16.0 * (p1[c] - f0[c]) + 16.0 * (m1[c] - f0[c])
                    - (p2[c] - f0[c])
                    - (m2[c] - f0[c]))
                    * inv2;
            }
        }
    }
    Ok(out)
}
