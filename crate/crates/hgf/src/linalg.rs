//! Small dense symmetric-matrix helpers shared by the SPD checks, the CFL
//! bound, and the symbol diagnostics. Everything here works on the packed
//! upper-triangle layout (i <= j lexicographic) used by node slices.

use nalgebra::DMatrix;

use crate::grid::sym_index;

/// Expand a packed symmetric node slice into a dense matrix.
pub fn packed_to_dense(packed: &[f64], n: usize) -> DMatrix<f64> {
    debug_assert_eq!(packed.len(), n * (n + 1) / 2);
    DMatrix::from_fn(n, n, |i, j| packed[sym_index(n, i, j)])
}

/// Eigenvalues of a packed symmetric matrix, ascending.
pub fn sym_eigenvalues(packed: &[f64], n: usize) -> Vec<f64> {
    let m = packed_to_dense(packed, n);
    let mut eigs: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eigs
}

pub fn sym_min_eig(packed: &[f64], n: usize) -> f64 {
    sym_eigenvalues(packed, n)[0]
}

pub fn sym_max_eig(packed: &[f64], n: usize) -> f64 {
    *sym_eigenvalues(packed, n).last().unwrap()
}
