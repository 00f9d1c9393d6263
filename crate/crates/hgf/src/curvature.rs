//! Discrete Riemannian tensor calculus on periodic grids.
//!
//! Index conventions (all verified against the flat and conformal closed
//! forms in the test suite):
//!   C^k_ij   = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)
//!   R^k_ijl  = d_i C^k_jl - d_j C^k_il + C^k_ip C^p_jl - C^k_jp C^p_il
//!   R_ijkl   = g_kp R^p_ijl
//!   Ric_ik   = g^{jl} R_ijkl,  R = g^{ij} Ric_ij
//!   B_ijkl   = g^{pr} g^{qs} R_piqj R_rksl
//!   G^i      = g^{kl} C^i_kl
//!
//! Symmetry residuals are reported, never symmetrized away. The packed
//! Ricci field keeps the i <= j representative of the raw contraction; the
//! discarded asymmetry is surfaced as a diagnostic.

use crate::error::{HgfError, Result};
use crate::field::{partial_derivative, Symmetry, TensorField};
use crate::grid::{sym_count, sym_index};
use crate::linalg::sym_min_eig;
use crate::state::SPD_TOLERANCE;

fn expect_metric(metric: &TensorField) -> Result<()> {
    if metric.valence() != (0, 2) || metric.symmetry() != Symmetry::SymmetricPair {
        return Err(HgfError::ShapeMismatch(
            "expected a packed symmetric (0,2) metric field".into(),
        ));
    }
    Ok(())
}

/// Pointwise inverse of an SPD metric via per-node Cholesky factorization.
/// Output is a packed symmetric (2,0) field, so g^{ij} = g^{ji} holds by
/// construction. A nonpositive (or below-tolerance) pivot aborts with the
/// offending node and its exact smallest eigenvalue.
pub fn metric_inverse(metric: &TensorField) -> Result<TensorField> {
    expect_metric(metric)?;
    let grid = metric.grid();
    let n = grid.dim();
    let mut out = TensorField::zeros(grid, (2, 0), Symmetry::SymmetricPair);
    let mut chol = vec![0.0f64; n * n];
    let mut inv_l = vec![0.0f64; n * n];
    for node in 0..grid.node_count() {
        let g = metric.node(node);
        packed_inverse_into(n, g, &mut chol, &mut inv_l, out.node_mut(node)).map_err(|_| {
            HgfError::SingularMetric {
                node,
                min_eig: sym_min_eig(g, n),
            }
        })?;
    }
    Ok(out)
}

/// Packed inverse of a single SPD matrix, for per-node consumers that do not
/// hold a whole field. `None` when a Cholesky pivot drops to the tolerance.
pub fn packed_inverse(packed: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut chol = vec![0.0f64; n * n];
    let mut inv_l = vec![0.0f64; n * n];
    let mut out = vec![0.0f64; sym_count(n)];
    packed_inverse_into(n, packed, &mut chol, &mut inv_l, &mut out).ok()?;
    Some(out)
}

fn packed_inverse_into(
    n: usize,
    packed: &[f64],
    chol: &mut [f64],
    inv_l: &mut [f64],
    dst: &mut [f64],
) -> std::result::Result<(), ()> {
    cholesky_packed(n, packed, chol)?;
    invert_lower(n, chol, inv_l);
    // g^{-1} = X^T X for X = L^{-1}; fill i <= j only.
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for k in j..n {
                s += inv_l[k * n + i] * inv_l[k * n + j];
            }
            dst[sym_index(n, i, j)] = s;
        }
    }
    Ok(())
}

/// Lower-triangular Cholesky factor of a packed SPD matrix. Fails when a
/// pivot drops to the SPD tolerance.
fn cholesky_packed(n: usize, packed: &[f64], l: &mut [f64]) -> std::result::Result<(), ()> {
    l.fill(0.0);
    for j in 0..n {
        let mut d = packed[sym_index(n, j, j)];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > SPD_TOLERANCE) {
            return Err(());
        }
        let ljj = d.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = packed[sym_index(n, i, j)];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    Ok(())
}

fn invert_lower(n: usize, l: &[f64], x: &mut [f64]) {
    x.fill(0.0);
    for j in 0..n {
        x[j * n + j] = 1.0 / l[j * n + j];
        for i in j + 1..n {
            let mut s = 0.0;
            for k in j..i {
                s += l[i * n + k] * x[k * n + j];
            }
            x[i * n + j] = -s / l[i * n + i];
        }
    }
}

/// Sup-norm of g^{ik} g_{kj} - delta^i_j over all nodes; an exactness
/// diagnostic for the inverse (expected below 1e-12 times the condition
/// number).
pub fn inverse_residual(metric: &TensorField, inverse: &TensorField) -> Result<f64> {
    metric.same_grid(inverse)?;
    let grid = metric.grid();
    let n = grid.dim();
    let mut worst = 0.0f64;
    for node in 0..grid.node_count() {
        let g = metric.node(node);
        let gi = inverse.node(node);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += gi[sym_index(n, i, k)] * g[sym_index(n, k, j)];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - expect).abs());
            }
        }
    }
    Ok(worst)
}

/// Connection coefficients C^k_ij, packed symmetric in the lower pair.
/// The lower-pair symmetry is exact: one stored value per unordered pair.
pub fn christoffel(metric: &TensorField, inverse: &TensorField) -> Result<TensorField> {
    expect_metric(metric)?;
    metric.same_grid(inverse)?;
    let dg: Vec<TensorField> = (0..metric.grid().dim())
        .map(|axis| partial_derivative(metric, axis, 1))
        .collect::<Result<_>>()?;
    christoffel_from_derivs(inverse, &dg)
}

/// Same algebra with the metric derivatives supplied by the caller. The
/// first-order reduction feeds its evolved derivative block through here so
/// the lower-order terms are functions of the system state alone.
pub fn christoffel_from_derivs(inverse: &TensorField, dg: &[TensorField]) -> Result<TensorField> {
    let grid = inverse.grid();
    let n = grid.dim();
    if dg.len() != n {
        return Err(HgfError::DimensionMismatch {
            expected: n,
            got: dg.len(),
        });
    }
    for d in dg {
        d.same_grid(inverse)?;
    }
    let m = sym_count(n);
    let mut out = TensorField::zeros(grid, (1, 2), Symmetry::SymmetricPair);
    let mut dnodes: Vec<&[f64]> = Vec::with_capacity(n);
    for node in 0..grid.node_count() {
        let gi = inverse.node(node);
        dnodes.clear();
        dnodes.extend(dg.iter().map(|f| f.node(node)));
        let dst = out.node_mut(node);
        for i in 0..n {
            for j in i..n {
                let pair = sym_index(n, i, j);
                for k in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        let term = dnodes[i][sym_index(n, j, l)] + dnodes[j][sym_index(n, i, l)]
                            - dnodes[l][sym_index(n, i, j)];
                        s += gi[sym_index(n, k, l)] * term;
                    }
                    dst[k * m + pair] = 0.5 * s;
                }
            }
        }
    }
    Ok(out)
}

#[inline]
fn mixed_idx(n: usize, k: usize, i: usize, j: usize, l: usize) -> usize {
    ((k * n + i) * n + j) * n + l
}

#[inline]
fn low_idx(n: usize, i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * n + j) * n + k) * n + l
}

/// Per-node curvature kernel: R^k_ijl from the connection and its spatial
/// derivatives at one node. Evaluated for every (i, j) ordering, so the
/// first-pair antisymmetry holds bitwise (each difference negates exactly
/// under the swap).
fn node_riemann_mixed(n: usize, gam: &[f64], dgam: &[&[f64]], out: &mut [f64]) {
    let m = sym_count(n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let deriv = dgam[i][k * m + sym_index(n, j, l)]
                        - dgam[j][k * m + sym_index(n, i, l)];
                    let mut quad = 0.0;
                    for p in 0..n {
                        quad += gam[k * m + sym_index(n, i, p)] * gam[p * m + sym_index(n, j, l)]
                            - gam[k * m + sym_index(n, j, p)] * gam[p * m + sym_index(n, i, l)];
                    }
                    out[mixed_idx(n, k, i, j, l)] = deriv + quad;
                }
            }
        }
    }
}

/// Per-node lowering: R_ijkl = g_kp R^p_ijl.
fn node_riemann_low(n: usize, g: &[f64], mixed: &[f64], out: &mut [f64]) {
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut s = 0.0;
                    for p in 0..n {
                        s += g[sym_index(n, k, p)] * mixed[mixed_idx(n, p, i, j, l)];
                    }
                    out[low_idx(n, i, j, k, l)] = s;
                }
            }
        }
    }
}

/// Per-node Ricci contraction of the lowered tensor: Ric_ik = g^{jl} R_ijkl,
/// written densely (all n^2 entries, both index orders evaluated).
fn node_ricci_dense(n: usize, gi: &[f64], low: &[f64], out: &mut [f64]) {
    for i in 0..n {
        for k in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                for l in 0..n {
                    s += gi[sym_index(n, j, l)] * low[low_idx(n, i, j, k, l)];
                }
            }
            out[i * n + k] = s;
        }
    }
}

/// Both curvature forms from the metric and its connection: the mixed tensor
/// from the definitional formula, then the lowered tensor.
pub fn riemann(
    metric: &TensorField,
    christoffel: &TensorField,
) -> Result<(TensorField, TensorField)> {
    expect_metric(metric)?;
    metric.same_grid(christoffel)?;
    let grid = metric.grid();
    let n = grid.dim();
    let dgam: Vec<TensorField> = (0..n)
        .map(|axis| partial_derivative(christoffel, axis, 1))
        .collect::<Result<_>>()?;
    let mut mixed = TensorField::zeros(grid, (1, 3), Symmetry::None);
    let mut low = TensorField::zeros(grid, (0, 4), Symmetry::Riemann);
    let mut low_node = vec![0.0; low.comps()];
    let mut dnodes: Vec<&[f64]> = Vec::with_capacity(n);
    for node in 0..grid.node_count() {
        let gam = christoffel.node(node);
        dnodes.clear();
        dnodes.extend(dgam.iter().map(|f| f.node(node)));
        node_riemann_mixed(n, gam, &dnodes, mixed.node_mut(node));
        node_riemann_low(n, metric.node(node), mixed.node(node), &mut low_node);
        low.node_mut(node).copy_from_slice(&low_node);
    }
    Ok((mixed, low))
}

/// Ricci tensor as a packed symmetric field. The stored value for each
/// unordered pair is the raw g^{jl} R_ijkl contraction at the canonical
/// (i <= k) order; use [`ricci_asymmetry`] for the size of the discarded
/// discrete asymmetry.
pub fn ricci(riemann_low: &TensorField, inverse: &TensorField) -> Result<TensorField> {
    riemann_low.same_grid(inverse)?;
    let grid = riemann_low.grid();
    let n = grid.dim();
    let mut out = TensorField::zeros(grid, (0, 2), Symmetry::SymmetricPair);
    let mut dense = vec![0.0; n * n];
    for node in 0..grid.node_count() {
        node_ricci_dense(n, inverse.node(node), riemann_low.node(node), &mut dense);
        let dst = out.node_mut(node);
        for i in 0..n {
            for k in i..n {
                dst[sym_index(n, i, k)] = dense[i * n + k];
            }
        }
    }
    Ok(out)
}

/// Sup-norm of Ric_ik - Ric_ki with both orders evaluated from the raw
/// contraction; a pure discretization residual.
pub fn ricci_asymmetry(riemann_low: &TensorField, inverse: &TensorField) -> Result<f64> {
    riemann_low.same_grid(inverse)?;
    let grid = riemann_low.grid();
    let n = grid.dim();
    let mut dense = vec![0.0; n * n];
    let mut worst = 0.0f64;
    for node in 0..grid.node_count() {
        node_ricci_dense(n, inverse.node(node), riemann_low.node(node), &mut dense);
        for i in 0..n {
            for k in i + 1..n {
                worst = worst.max((dense[i * n + k] - dense[k * n + i]).abs());
            }
        }
    }
    Ok(worst)
}

/// Scalar curvature R = g^{ij} Ric_ij, pointwise.
pub fn scalar_curvature(ricci: &TensorField, inverse: &TensorField) -> Result<TensorField> {
    ricci.same_grid(inverse)?;
    let grid = ricci.grid();
    let n = grid.dim();
    let mut out = TensorField::zeros(grid, (0, 0), Symmetry::None);
    for node in 0..grid.node_count() {
        let gi = inverse.node(node);
        let r = ricci.node(node);
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += gi[sym_index(n, i, j)] * r[sym_index(n, i, j)];
            }
        }
        out.node_mut(node)[0] = s;
    }
    Ok(out)
}

/// Quadratic curvature tensor B_ijkl = g^{pr} g^{qs} R_piqj R_rksl, the
/// coefficient block of the curvature wave equations. Direct quadruple
/// contraction per node; fine for the low dimensions the diagnostics use.
pub fn b_tensor(riemann_low: &TensorField, inverse: &TensorField) -> Result<TensorField> {
    riemann_low.same_grid(inverse)?;
    let grid = riemann_low.grid();
    let n = grid.dim();
    let mut out = TensorField::zeros(grid, (0, 4), Symmetry::None);
    for node in 0..grid.node_count() {
        let gi = inverse.node(node);
        let rm = riemann_low.node(node);
        let dst = out.node_mut(node);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut s = 0.0;
                        for p in 0..n {
                            for q in 0..n {
                                for r in 0..n {
                                    for v in 0..n {
                                        s += gi[sym_index(n, p, r)]
                                            * gi[sym_index(n, q, v)]
                                            * rm[low_idx(n, p, i, q, j)]
                                            * rm[low_idx(n, r, k, v, l)];
                                    }
                                }
                            }
                        }
                        dst[low_idx(n, i, j, k, l)] = s;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Elliptic-gauge trace G^i = g^{kl} C^i_kl; a diagnostic of how far the
/// chart is from elliptic coordinates.
pub fn gamma_trace(christoffel: &TensorField, inverse: &TensorField) -> Result<TensorField> {
    christoffel.same_grid(inverse)?;
    let grid = christoffel.grid();
    let n = grid.dim();
    let m = sym_count(n);
    let mut out = TensorField::zeros(grid, (1, 0), Symmetry::None);
    for node in 0..grid.node_count() {
        let gi = inverse.node(node);
        let gam = christoffel.node(node);
        let dst = out.node_mut(node);
        for i in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += gi[sym_index(n, k, l)] * gam[i * m + sym_index(n, k, l)];
                }
            }
            dst[i] = s;
        }
    }
    Ok(out)
}

/// Principal symbol sigma(xi) = g^{kl} xi_k xi_l as a scalar field.
/// Callers pass a Euclidean-unit covector; only the zero covector is
/// rejected here.
pub fn principal_symbol(inverse: &TensorField, xi: &[f64]) -> Result<TensorField> {
    let grid = inverse.grid();
    let n = grid.dim();
    if xi.len() != n {
        return Err(HgfError::DimensionMismatch {
            expected: n,
            got: xi.len(),
        });
    }
    if xi.iter().all(|&v| v == 0.0) {
        return Err(HgfError::ZeroCovector);
    }
    let mut out = TensorField::zeros(grid, (0, 0), Symmetry::None);
    for node in 0..grid.node_count() {
        let gi = inverse.node(node);
        let mut s = 0.0;
        for k in 0..n {
            for l in 0..n {
                s += gi[sym_index(n, k, l)] * xi[k] * xi[l];
            }
        }
        out.node_mut(node)[0] = s;
    }
    Ok(out)
}

/// Deterministic unit-covector sample: the 2n signed axis directions, then
/// the n(n-1)/2 normalized diagonal pairs, in fixed order.
pub fn covector_sample(n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * n + n * (n - 1) / 2);
    for k in 0..n {
        for sign in [1.0, -1.0] {
            let mut xi = vec![0.0; n];
            xi[k] = sign;
            out.push(xi);
        }
    }
    let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
    for i in 0..n {
        for j in i + 1..n {
            let mut xi = vec![0.0; n];
            xi[i] = inv_sqrt2;
            xi[j] = inv_sqrt2;
            out.push(xi);
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct HyperbolicityCertificate {
    /// Smallest sampled symbol value over all nodes and sample covectors.
    pub min_symbol: f64,
    /// Smallest exact inverse-metric eigenvalue over all nodes (backstop
    /// for directions the fixed sample misses).
    pub min_inverse_eigenvalue: f64,
    pub strictly_hyperbolic: bool,
}

/// Strict-hyperbolicity check: the sampled principal symbol must stay
/// positive, backstopped by the exact minimum inverse-metric eigenvalue.
pub fn hyperbolicity_certificate(inverse: &TensorField) -> Result<HyperbolicityCertificate> {
    let grid = inverse.grid();
    let n = grid.dim();
    let mut min_symbol = f64::INFINITY;
    for xi in covector_sample(n) {
        let sigma = principal_symbol(inverse, &xi)?;
        for node in 0..grid.node_count() {
            min_symbol = min_symbol.min(sigma.node(node)[0]);
        }
    }
    let mut min_eig = f64::INFINITY;
    for node in 0..grid.node_count() {
        min_eig = min_eig.min(sym_min_eig(inverse.node(node), n));
    }
    Ok(HyperbolicityCertificate {
        min_symbol,
        min_inverse_eigenvalue: min_eig,
        strictly_hyperbolic: min_symbol > 0.0 && min_eig > 0.0,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SymmetryResiduals {
    /// sup |R_ijkl + R_jikl| (bitwise zero by construction).
    pub first_pair: f64,
    /// sup |R_ijkl + R_ijlk| (discretization residual).
    pub second_pair: f64,
    /// sup |R_ijkl - R_klij| (discretization residual).
    pub pair_interchange: f64,
    /// sup |R^k_ijl + R^k_jli + R^k_lij| (discretization residual).
    pub first_bianchi: f64,
}

pub fn riemann_symmetry_residuals(
    mixed: &TensorField,
    low: &TensorField,
) -> Result<SymmetryResiduals> {
    mixed.same_grid(low)?;
    let grid = low.grid();
    let n = grid.dim();
    let mut res = SymmetryResiduals {
        first_pair: 0.0,
        second_pair: 0.0,
        pair_interchange: 0.0,
        first_bianchi: 0.0,
    };
    for node in 0..grid.node_count() {
        let lo = low.node(node);
        let mx = mixed.node(node);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = lo[low_idx(n, i, j, k, l)];
                        res.first_pair = res
                            .first_pair
                            .max((v + lo[low_idx(n, j, i, k, l)]).abs());
                        res.second_pair = res
                            .second_pair
                            .max((v + lo[low_idx(n, i, j, l, k)]).abs());
                        res.pair_interchange = res
                            .pair_interchange
                            .max((v - lo[low_idx(n, k, l, i, j)]).abs());
                        let bianchi = mx[mixed_idx(n, k, i, j, l)]
                            + mx[mixed_idx(n, k, j, l, i)]
                            + mx[mixed_idx(n, k, l, i, j)];
                        res.first_bianchi = res.first_bianchi.max(bianchi.abs());
                    }
                }
            }
        }
    }
    Ok(res)
}

/// Everything the diagnostics need from one metric, computed along the
/// definitional chain. Stores the full curvature tensors; for flow
/// right-hand sides in higher dimensions prefer [`ricci_of_metric`], which
/// never materializes rank-4 fields.
#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    pub inverse_metric: TensorField,
    pub christoffel: TensorField,
    pub riemann_mixed: TensorField,
    pub riemann_low: TensorField,
    pub ricci: TensorField,
    pub scalar: TensorField,
    pub gamma_trace: TensorField,
    /// sup |Ric_ik - Ric_ki| before packing.
    pub ricci_asymmetry: f64,
}

impl CurvatureBundle {
    pub fn compute(metric: &TensorField) -> Result<Self> {
        let inverse_metric = metric_inverse(metric)?;
        let chris = christoffel(metric, &inverse_metric)?;
        let (riemann_mixed, riemann_low) = riemann(metric, &chris)?;
        let ric = ricci(&riemann_low, &inverse_metric)?;
        let asym = ricci_asymmetry(&riemann_low, &inverse_metric)?;
        let scalar = scalar_curvature(&ric, &inverse_metric)?;
        let trace = gamma_trace(&chris, &inverse_metric)?;
        Ok(CurvatureBundle {
            inverse_metric,
            christoffel: chris,
            riemann_mixed,
            riemann_low,
            ricci: ric,
            scalar,
            gamma_trace: trace,
            ricci_asymmetry: asym,
        })
    }
}

/// Ricci tensor straight from the metric without storing rank-4 fields:
/// the mixed tensor is assembled per node on the stack, lowered, and
/// contracted immediately. Same kernels as [`riemann`]/[`ricci`], so the
/// two paths agree bitwise.
pub fn ricci_of_metric(metric: &TensorField) -> Result<TensorField> {
    let inverse = metric_inverse(metric)?;
    let chris = christoffel(metric, &inverse)?;
    let grid = metric.grid();
    let n = grid.dim();
    let dgam: Vec<TensorField> = (0..n)
        .map(|axis| partial_derivative(&chris, axis, 1))
        .collect::<Result<_>>()?;
    let mut out = TensorField::zeros(grid, (0, 2), Symmetry::SymmetricPair);
    let mut mixed = vec![0.0; n * n * n * n];
    let mut low = vec![0.0; n * n * n * n];
    let mut dense = vec![0.0; n * n];
    let mut dnodes: Vec<&[f64]> = Vec::with_capacity(n);
    for node in 0..grid.node_count() {
        let gam = chris.node(node);
        dnodes.clear();
        dnodes.extend(dgam.iter().map(|f| f.node(node)));
        node_riemann_mixed(n, gam, &dnodes, &mut mixed);
        node_riemann_low(n, metric.node(node), &mixed, &mut low);
        node_ricci_dense(n, inverse.node(node), &low, &mut dense);
        let dst = out.node_mut(node);
        for i in 0..n {
            for k in i..n {
                dst[sym_index(n, i, k)] = dense[i * n + k];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod test {
    use super::*;
    use crate::field::sample_field;
    use crate::grid::Grid;
    use std::f64::consts::TAU;

    fn flat(n: usize, pts: usize) -> TensorField {
        let grid = Grid::cube(n, pts, TAU).unwrap();
        sample_field(
            |_x, idx| if idx[0] == idx[1] { 1.0 } else { 0.0 },
            &grid,
            (0, 2),
            Symmetry::SymmetricPair,
        )
        .unwrap()
    }

    fn conformal_2d(pts: usize, eps: f64) -> TensorField {
        let grid = Grid::cube(2, pts, TAU).unwrap();
        sample_field(
            |x, idx| {
                if idx[0] == idx[1] {
                    (2.0 * eps * x[0].sin() * x[1].sin()).exp()
                } else {
                    0.0
                }
            },
            &grid,
            (0, 2),
            Symmetry::SymmetricPair,
        )
        .unwrap()
    }

    #[test]
    fn inverse_of_identity_is_identity() {
        let g = flat(3, 8);
        let gi = metric_inverse(&g).unwrap();
        assert_eq!(gi.data(), g.data());
    }

    #[test]
    fn inverse_of_constant_two_by_two() {
        let grid = Grid::cube(2, 8, 1.0).unwrap();
        let g = sample_field(
            |_x, idx| if idx[0] == idx[1] { 2.0 } else { 1.0 },
            &grid,
            (0, 2),
            Symmetry::SymmetricPair,
        )
        .unwrap();
        let gi = metric_inverse(&g).unwrap();
        // Adjugate by hand: det = 3, inverse = [[2/3, -1/3], [-1/3, 2/3]].
        let node = gi.node(17);
        assert!((node[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((node[1] + 1.0 / 3.0).abs() < 1e-15);
        assert!((node[2] - 2.0 / 3.0).abs() < 1e-15);
        // Condition number of this matrix is 3; the residual bound is
        // 1e-12 * condition with lots of room to spare.
        assert!(inverse_residual(&g, &gi).unwrap() < 3e-12);
    }

    #[test]
    fn scalar_multiple_inverts_to_reciprocal() {
        let g = flat(2, 8).map(|v| 2.5 * v);
        let gi = metric_inverse(&g).unwrap();
        for node in 0..g.grid().node_count() {
            assert_eq!(gi.node(node), &[1.0 / 2.5, 0.0, 1.0 / 2.5]);
        }
    }

    #[test]
    fn singular_metric_is_rejected_with_min_eig() {
        let grid = Grid::cube(2, 8, 1.0).unwrap();
        let g = sample_field(
            |_x, idx| if idx == [0, 0] { 1.0 } else { 0.0 },
            &grid,
            (0, 2),
            Symmetry::SymmetricPair,
        )
        .unwrap();
        match metric_inverse(&g) {
            Err(HgfError::SingularMetric { min_eig, .. }) => {
                assert!(min_eig.abs() < 1e-12);
            }
            other => panic!("expected singular-metric, got {other:?}"),
        }
    }

    #[test]
    fn flat_curvature_chain_is_exactly_zero() {
        let g = flat(2, 8);
        let bundle = CurvatureBundle::compute(&g).unwrap();
        assert_eq!(bundle.christoffel.sup_norm(), 0.0);
        assert_eq!(bundle.riemann_mixed.sup_norm(), 0.0);
        assert_eq!(bundle.riemann_low.sup_norm(), 0.0);
        assert_eq!(bundle.ricci.sup_norm(), 0.0);
        assert_eq!(bundle.scalar.sup_norm(), 0.0);
        assert_eq!(bundle.gamma_trace.sup_norm(), 0.0);
        let b = b_tensor(&bundle.riemann_low, &bundle.inverse_metric).unwrap();
        assert_eq!(b.sup_norm(), 0.0);
    }

    #[test]
    fn diagonal_metric_christoffel_matches_hand_formula() {
        // g = diag(a(x), 1), a = 1 + 0.2 sin x: only C^1_11 = a'/(2a).
        let mut errs = Vec::new();
        for pts in [16usize, 32, 64] {
            let grid = Grid::new(2, &[pts, 8], &[TAU, TAU]).unwrap();
            let g = sample_field(
                |x, idx| match (idx[0], idx[1]) {
                    (0, 0) => 1.0 + 0.2 * x[0].sin(),
                    (1, 1) => 1.0,
                    _ => 0.0,
                },
                &grid,
                (0, 2),
                Symmetry::SymmetricPair,
            )
            .unwrap();
            let gi = metric_inverse(&g).unwrap();
            let gam = christoffel(&g, &gi).unwrap();
            let mut e = 0.0f64;
            for node in 0..grid.node_count() {
                let x = grid.position(node, 0);
                let a = 1.0 + 0.2 * x.sin();
                let expect = 0.2 * x.cos() / (2.0 * a);
                e = e.max((gam.at(node, &[0, 0, 0]) - expect).abs());
                for (k, i, j) in [(0, 0, 1), (0, 1, 1), (1, 0, 0), (1, 0, 1), (1, 1, 1)] {
                    e = e.max(gam.at(node, &[k, i, j]).abs());
                }
            }
            errs.push(e);
        }
        assert!((errs[0] / errs[1]).log2() > 3.5);
        assert!((errs[1] / errs[2]).log2() > 3.5);
    }

    #[test]
    fn conformal_christoffel_identities() {
        // g = e^{2phi} delta: C^1_11 = phi_x, C^1_22 = -phi_x, C^1_12 = phi_y.
        let eps = 0.1;
        let grid = Grid::cube(2, 64, TAU).unwrap();
        let g = conformal_2d(64, eps);
        let gi = metric_inverse(&g).unwrap();
        let gam = christoffel(&g, &gi).unwrap();
        let dx = grid.spacing()[0];
        let tol = 2.0 * dx.powi(4);
        for node in (0..grid.node_count()).step_by(11) {
            let (x, y) = (grid.position(node, 0), grid.position(node, 1));
            let phi_x = eps * x.cos() * y.sin();
            let phi_y = eps * x.sin() * y.cos();
            assert!((gam.at(node, &[0, 0, 0]) - phi_x).abs() < tol);
            assert!((gam.at(node, &[0, 1, 1]) + phi_x).abs() < tol);
            assert!((gam.at(node, &[0, 0, 1]) - phi_y).abs() < tol);
            assert!((gam.at(node, &[1, 1, 1]) - phi_y).abs() < tol);
            assert!((gam.at(node, &[1, 0, 0]) + phi_y).abs() < tol);
            assert!((gam.at(node, &[1, 0, 1]) - phi_x).abs() < tol);
        }
    }

    #[test]
    fn conformal_scalar_curvature_closed_form() {
        // R = -2 e^{-2phi} lap(phi) = 4 eps sin x sin y e^{-2phi}.
        let eps = 0.1;
        let mut errs = Vec::new();
        for pts in [16usize, 32, 64] {
            let grid = Grid::cube(2, pts, TAU).unwrap();
            let g = conformal_2d(pts, eps);
            let bundle = CurvatureBundle::compute(&g).unwrap();
            let mut e = 0.0f64;
            for node in 0..grid.node_count() {
                let (x, y) = (grid.position(node, 0), grid.position(node, 1));
                let phi = eps * x.sin() * y.sin();
                let expect = 4.0 * eps * x.sin() * y.sin() * (-2.0 * phi).exp();
                e = e.max((bundle.scalar.node(node)[0] - expect).abs());
            }
            errs.push(e);
        }
        assert!((errs[0] / errs[1]).log2() > 3.5, "{errs:?}");
        assert!((errs[1] / errs[2]).log2() > 3.5, "{errs:?}");
        assert!(errs[2] > 1e-13, "refinement study must not sit on rounding");
    }

    #[test]
    fn two_dim_sectional_identity() {
        // In 2D the single curvature component obeys R_1212 = (R/2) det g.
        let g = conformal_2d(64, 0.1);
        let grid = g.grid().clone();
        let bundle = CurvatureBundle::compute(&g).unwrap();
        let dx = grid.spacing()[0];
        for node in (0..grid.node_count()).step_by(7) {
            let gn = g.node(node);
            let det = gn[0] * gn[2] - gn[1] * gn[1];
            let expect = 0.5 * bundle.scalar.node(node)[0] * det;
            let got = bundle.riemann_low.at(node, &[0, 1, 0, 1]);
            assert!((got - expect).abs() < 5.0 * dx.powi(4));
        }
    }

    /// Generic non-diagonal 2D metric with no x <-> y symmetry; breaks all
    /// the accidental exact cancellations a conformal square-grid probe has.
    fn generic_2d(pts: usize) -> TensorField {
        let grid = Grid::cube(2, pts, TAU).unwrap();
        sample_field(
            |x, idx| match (idx[0], idx[1]) {
                (0, 0) => 1.0 + 0.1 * x[0].sin() * (2.0 * x[1]).cos(),
                (1, 1) => 1.0 + 0.1 * (2.0 * x[0]).cos() * x[1].sin(),
                _ => 0.05 * (x[0] + 2.0 * x[1]).sin(),
            },
            &grid,
            (0, 2),
            Symmetry::SymmetricPair,
        )
        .unwrap()
    }

    #[test]
    fn mixed_first_pair_antisymmetry_is_bitwise() {
        let g = generic_2d(16);
        let bundle = CurvatureBundle::compute(&g).unwrap();
        let n = 2;
        for node in 0..g.grid().node_count() {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        for l in 0..n {
                            let a = bundle.riemann_mixed.at(node, &[k, i, j, l]);
                            let b = bundle.riemann_mixed.at(node, &[k, j, i, l]);
                            if i == j {
                                // Diagonal entries are an exact zero, where
                                // the bit pattern of -0.0 differs.
                                assert_eq!(a, 0.0);
                            } else {
                                assert_eq!(a.to_bits(), (-b).to_bits());
                            }
                        }
                    }
                }
            }
        }
        let res = riemann_symmetry_residuals(&bundle.riemann_mixed, &bundle.riemann_low).unwrap();
        assert_eq!(res.first_pair, 0.0);
        assert!(res.second_pair > 0.0, "discrete residual should be nonzero");
    }

    #[test]
    fn symmetry_residuals_refine_at_fourth_order() {
        let mut second = Vec::new();
        let mut inter = Vec::new();
        for pts in [16usize, 32, 64] {
            let g = generic_2d(pts);
            let bundle = CurvatureBundle::compute(&g).unwrap();
            let res =
                riemann_symmetry_residuals(&bundle.riemann_mixed, &bundle.riemann_low).unwrap();
            second.push(res.second_pair);
            inter.push(res.pair_interchange);
            // Two lower indices always repeat in 2D, so the cyclic sum
            // degenerates to the exact first-pair antisymmetry.
            assert_eq!(res.first_bianchi, 0.0);
        }
        for errs in [&second, &inter] {
            assert!(errs[2] > 1e-14, "residuals must sit above rounding: {errs:?}");
            assert!((errs[0] / errs[1]).log2() > 3.5, "{errs:?}");
            assert!((errs[1] / errs[2]).log2() > 3.5, "{errs:?}");
        }
    }

    #[test]
    fn bianchi_residual_in_three_dims_sits_at_rounding() {
        // The cyclic identity only has content when all three lower indices
        // differ, so probe it in 3D. Even there it cancels algebraically
        // for any torsion-free connection (no product rule involved), so
        // the discrete residual is rounding noise at every resolution while
        // the metric-dependent second-pair residual refines at 4th order.
        let mut second = Vec::new();
        let mut bianchi = Vec::new();
        for pts in [8usize, 16, 32] {
            let grid = Grid::cube(3, pts, TAU).unwrap();
            let g = sample_field(
                |x, idx| match (idx[0].min(idx[1]), idx[0].max(idx[1])) {
                    (0, 0) => 1.0 + 0.08 * x[0].sin() * x[1].cos(),
                    (1, 1) => 1.0 + 0.08 * x[0].cos() * x[2].sin(),
                    (2, 2) => 1.0 + 0.08 * x[1].sin() * x[2].sin(),
                    (0, 1) => 0.04 * (x[0] + x[2]).sin(),
                    (0, 2) => 0.04 * (x[1] + x[2]).cos(),
                    _ => 0.04 * (x[0] + x[1]).sin(),
                },
                &grid,
                (0, 2),
                Symmetry::SymmetricPair,
            )
            .unwrap();
            let bundle = CurvatureBundle::compute(&g).unwrap();
            let res =
                riemann_symmetry_residuals(&bundle.riemann_mixed, &bundle.riemann_low).unwrap();
            assert_eq!(res.first_pair, 0.0);
            second.push(res.second_pair);
            bianchi.push(res.first_bianchi);
        }
        assert!(second[2] > 1e-14, "must sit above rounding: {second:?}");
        assert!((second[0] / second[1]).log2() > 3.2, "{second:?}");
        assert!((second[1] / second[2]).log2() > 3.2, "{second:?}");
        for b in &bianchi {
            assert!(*b < 1e-14, "cyclic residual should be rounding-level: {bianchi:?}");
        }
    }

    #[test]
    fn streaming_ricci_matches_bundle_bitwise() {
        let g = conformal_2d(16, 0.1);
        let bundle = CurvatureBundle::compute(&g).unwrap();
        let lean = ricci_of_metric(&g).unwrap();
        assert_eq!(lean.data(), bundle.ricci.data());
    }

    #[test]
    fn principal_symbol_examples() {
        let g = flat(2, 8);
        let gi = metric_inverse(&g).unwrap();
        for xi in covector_sample(2) {
            let s = principal_symbol(&gi, &xi).unwrap();
            for node in 0..g.grid().node_count() {
                assert!((s.node(node)[0] - 1.0).abs() < 1e-15);
            }
        }
        let grid = Grid::cube(2, 8, 1.0).unwrap();
        let gd = sample_field(
            |_x, idx| match (idx[0], idx[1]) {
                (0, 0) => 4.0,
                (1, 1) => 1.0,
                _ => 0.0,
            },
            &grid,
            (0, 2),
            Symmetry::SymmetricPair,
        )
        .unwrap();
        let gdi = metric_inverse(&gd).unwrap();
        let s = principal_symbol(&gdi, &[1.0, 0.0]).unwrap();
        assert!((s.node(3)[0] - 0.25).abs() < 1e-15);
        assert!(matches!(
            principal_symbol(&gdi, &[0.0, 0.0]),
            Err(HgfError::ZeroCovector)
        ));
        let cert = hyperbolicity_certificate(&gdi).unwrap();
        assert!(cert.strictly_hyperbolic);
        assert!((cert.min_symbol - 0.25).abs() < 1e-15);
    }

    #[test]
    fn constant_conformal_scaling_leaves_connection_unchanged() {
        // Power-of-two factors rescale without rounding, so the identity is
        // bitwise there; generic factors agree to relative rounding error.
        let g = conformal_2d(16, 0.1);
        let gi = metric_inverse(&g).unwrap();
        let gam = christoffel(&g, &gi).unwrap();
        let g2 = g.map(|v| 4.0 * v);
        let gi2 = metric_inverse(&g2).unwrap();
        let gam2 = christoffel(&g2, &gi2).unwrap();
        assert_eq!(gam.data(), gam2.data());
        let ric = ricci_of_metric(&g).unwrap();
        let ric2 = ricci_of_metric(&g2).unwrap();
        assert_eq!(ric.data(), ric2.data());

        let g3 = g.map(|v| 2.7 * v);
        let ric3 = ricci_of_metric(&g3).unwrap();
        let scale = ric.sup_norm();
        let diff = ric3.linear_comb(1.0, &ric, -1.0).unwrap().sup_norm();
        assert!(diff <= 1e-13 * scale.max(1.0), "diff = {diff:.3e}");
    }

    #[test]
    fn gamma_trace_of_diagonal_metric() {
        // g = diag(a(x), 1): G^1 = g^{11} C^1_11 = a'/(2a^2), G^2 = 0.
        let grid = Grid::new(2, &[64, 8], &[TAU, TAU]).unwrap();
        let g = sample_field(
            |x, idx| match (idx[0], idx[1]) {
                (0, 0) => 1.0 + 0.2 * x[0].sin(),
                (1, 1) => 1.0,
                _ => 0.0,
            },
            &grid,
            (0, 2),
            Symmetry::SymmetricPair,
        )
        .unwrap();
        let gi = metric_inverse(&g).unwrap();
        let gam = christoffel(&g, &gi).unwrap();
        let tr = gamma_trace(&gam, &gi).unwrap();
        assert!(tr.sup_norm() > 1e-3);
        let dx = grid.spacing()[0];
        for node in 0..grid.node_count() {
            let a = 1.0 + 0.2 * grid.position(node, 0).sin();
            let expect = 0.2 * grid.position(node, 0).cos() / (2.0 * a * a);
            assert!((tr.at(node, &[0]) - expect).abs() < 2.0 * dx.powi(4));
            assert_eq!(tr.at(node, &[1]), 0.0);
        }
    }

    #[test]
    fn isothermal_chart_has_exactly_zero_gamma_trace() {
        // In 2D a conformal chart is already an elliptic coordinate system:
        // g^{kl} C^i_kl = (2 - n) e^{-2phi} d_i phi vanishes for n = 2, and
        // the discrete cancellation is exact as well.
        let g = conformal_2d(16, 0.1);
        let gi = metric_inverse(&g).unwrap();
        let gam = christoffel(&g, &gi).unwrap();
        let tr = gamma_trace(&gam, &gi).unwrap();
        assert!(gam.sup_norm() > 1e-3, "connection itself is not zero");
        assert_eq!(tr.sup_norm(), 0.0);
    }
}
