//! Periodic structured grids.
//!
//! A grid is a uniform discretization of an n-dimensional periodic box
//! [0, L_0) x ... x [0, L_{n-1}). Nodes are addressed either by a
//! multi-index or by a row-major linear index.

use crate::error::{HgfError, Result};

/// Minimum points per axis so the 5-point periodic stencils never see a
/// neighbor twice.
pub const MIN_POINTS_PER_AXIS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    points: Vec<usize>,
    lengths: Vec<f64>,
    spacing: Vec<f64>,
}

impl Grid {
    pub fn new(dim: usize, points: &[usize], lengths: &[f64]) -> Result<Self> {
        if dim == 0 || points.len() != dim {
            return Err(HgfError::DimensionMismatch {
                expected: dim.max(1),
                got: points.len(),
            });
        }
        if lengths.len() != dim {
            return Err(HgfError::DimensionMismatch {
                expected: dim,
                got: lengths.len(),
            });
        }
        for (axis, &p) in points.iter().enumerate() {
            if p < MIN_POINTS_PER_AXIS {
                return Err(HgfError::TooFewPoints { axis, points: p });
            }
        }
        for (axis, &l) in lengths.iter().enumerate() {
            if !(l > 0.0) || !l.is_finite() {
                return Err(HgfError::NonPositiveLength { axis, length: l });
            }
        }
        let spacing = points
            .iter()
            .zip(lengths)
            .map(|(&p, &l)| l / p as f64)
            .collect();
        Ok(Grid {
            dim,
            points: points.to_vec(),
            lengths: lengths.to_vec(),
            spacing,
        })
    }

    /// Square grid helper: `points` nodes per axis, each axis of length `length`.
    pub fn cube(dim: usize, points: usize, length: f64) -> Result<Self> {
        Grid::new(dim, &vec![points; dim], &vec![length; dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn points(&self) -> &[usize] {
        &self.points
    }

    #[inline]
    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    #[inline]
    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn node_count(&self) -> usize {
        self.points.iter().product()
    }

    /// Row-major stride of an axis: consecutive steps along `axis` are this
    /// far apart in linear node order.
    pub fn stride(&self, axis: usize) -> usize {
        self.points[axis + 1..].iter().product()
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dim);
        let mut idx = 0;
        for (a, &i) in multi.iter().enumerate() {
            debug_assert!(i < self.points[a]);
            idx = idx * self.points[a] + i;
        }
        idx
    }

    /// Integer coordinate of `node` along `axis`.
    #[inline]
    pub fn coord(&self, node: usize, axis: usize) -> usize {
        (node / self.stride(axis)) % self.points[axis]
    }

    pub fn multi_index(&self, node: usize, out: &mut [usize]) {
        let mut rest = node;
        for a in (0..self.dim).rev() {
            out[a] = rest % self.points[a];
            rest /= self.points[a];
        }
    }

    /// Physical position of `node` along `axis`.
    #[inline]
    pub fn position(&self, node: usize, axis: usize) -> f64 {
        self.coord(node, axis) as f64 * self.spacing[axis]
    }

    pub fn positions(&self, node: usize, out: &mut [f64]) {
        let mut rest = node;
        for a in (0..self.dim).rev() {
            out[a] = (rest % self.points[a]) as f64 * self.spacing[a];
            rest /= self.points[a];
        }
    }

    /// Linear index of the node `offset` steps away along `axis`, with
    /// periodic wrap.
    #[inline]
    pub fn neighbor(&self, node: usize, axis: usize, offset: isize) -> usize {
        let n = self.points[axis];
        let stride = self.stride(axis);
        let i = (node / stride) % n;
        let j = (i as isize + offset).rem_euclid(n as isize) as usize;
        node + j * stride - i * stride
    }

    /// Cell volume element, the product of the spacings.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }
}

/// Number of independent components of a symmetric pair in dimension n.
#[inline]
pub const fn sym_count(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Packed index of the symmetric pair (i, j), i <= j lexicographic:
/// (0,0), (0,1), ..., (0,n-1), (1,1), ...
#[inline]
pub fn sym_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * n - i - 1) / 2 + j
}

/// Inverse of `sym_index`: the (i, j) pair stored at packed slot `s`.
pub fn sym_pair(n: usize, s: usize) -> (usize, usize) {
    let mut i = 0;
    let mut base = 0;
    while base + (n - i) <= s {
        base += n - i;
        i += 1;
    }
    (i, i + (s - base))
}
