//! First-order symmetric hyperbolic formulation: state packing, coefficient
//! matrix assembly, CFL control, and the RK4 method-of-lines integrator.
//!
//! The unknown vector per node is u = (g_ij | g_ij,k | h_ij) with m = n(n+1)/2
//! packed components per block, n derivative blocks, total length m(n+2).
//! The system reads A0 du/dt = A^j d_j u + B with
//!   A0  = blockdiag(I_m, [g^{kl} I_m]_{k,l}, I_m)
//!   A^j = zero except the blocks (deriv_k, vel) = (vel, deriv_k) = g^{jk} I_m
//!   B   = (h_ij | 0 | H_ij)  for the gauge-fixed variant; for the other
//!         variants the third block is the full right-hand side minus the
//!         principal term, reported as the non-principal remainder.
//! The integrator advances the solved form du/dt = (h | d_k h | RHS).

use crate::curvature::{metric_inverse, packed_inverse};
use crate::error::{HgfError, Result};
use crate::field::{partial_derivative, Symmetry, TensorField};
use crate::flow::{
    gauge_lower_order, gauge_rhs_from_derivs, mms_source, principal_part, rhs_variant, MmsTarget,
    RhsVariant,
};
use crate::grid::{sym_count, sym_index, Grid};
use crate::linalg::sym_min_eig;
use crate::state::{FlowState, SPD_TOLERANCE};
use nalgebra::{DMatrix, DVector};

/// Per-node length of the first-order unknown vector: m(n+2) = n(n+1)(n+2)/2.
pub fn node_len(n: usize) -> usize {
    sym_count(n) * (n + 2)
}

/// Flattened first-order state, node-major. Block layout per node:
/// metric (m) | derivative along axis 0..n (m each) | velocity (m).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    grid: Grid,
    time: f64,
    data: Vec<f64>,
}

impl StateVector {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Full per-node unknown vector.
    pub fn node(&self, node: usize) -> &[f64] {
        let len = node_len(self.grid.dim());
        &self.data[node * len..(node + 1) * len]
    }

    /// One m-sized block of a node; block 0 is the metric, 1..=n the
    /// derivatives, n+1 the velocity.
    fn block(&self, node: usize, b: usize) -> &[f64] {
        let n = self.grid.dim();
        let m = sym_count(n);
        let base = node * node_len(n) + b * m;
        &self.data[base..base + m]
    }

    fn extract_block(&self, b: usize, valence: (u8, u8)) -> TensorField {
        let mut field = TensorField::zeros(&self.grid, valence, Symmetry::SymmetricPair);
        for node in 0..self.grid.node_count() {
            field.node_mut(node).copy_from_slice(self.block(node, b));
        }
        field
    }

    /// Copy of the metric block as a packed (0,2) field.
    pub fn metric_field(&self) -> TensorField {
        self.extract_block(0, (0, 2))
    }

    /// Copy of the velocity block as a packed (0,2) field.
    pub fn velocity_field(&self) -> TensorField {
        self.extract_block(self.grid.dim() + 1, (0, 2))
    }

    /// Copy of the derivative block along `axis` as a packed (0,2) field.
    pub fn derivative_field(&self, axis: usize) -> Result<TensorField> {
        let n = self.grid.dim();
        if axis >= n {
            return Err(HgfError::AxisOutOfRange { axis, dim: n });
        }
        Ok(self.extract_block(1 + axis, (0, 2)))
    }

    fn offset(&self, time_shift: f64, scale: f64, rate: &[f64]) -> StateVector {
        debug_assert_eq!(rate.len(), self.data.len());
        let data = self
            .data
            .iter()
            .zip(rate)
            .map(|(u, k)| u + scale * k)
            .collect();
        StateVector {
            grid: self.grid.clone(),
            time: self.time + time_shift,
            data,
        }
    }
}

/// Packs a second-order state into the first-order unknown vector; the
/// derivative block is filled with stencil derivatives of the metric.
pub fn pack_state(state: &FlowState) -> Result<StateVector> {
    let grid = state.grid().clone();
    let n = grid.dim();
    let m = sym_count(n);
    let derivs: Vec<TensorField> = (0..n)
        .map(|axis| partial_derivative(state.metric(), axis, 1))
        .collect::<Result<_>>()?;
    let mut data = vec![0.0f64; grid.node_count() * node_len(n)];
    for node in 0..grid.node_count() {
        let base = node * node_len(n);
        data[base..base + m].copy_from_slice(state.metric().node(node));
        for (k, d) in derivs.iter().enumerate() {
            data[base + m * (1 + k)..base + m * (2 + k)].copy_from_slice(d.node(node));
        }
        data[base + m * (n + 1)..base + m * (n + 2)].copy_from_slice(state.velocity().node(node));
    }
    Ok(StateVector {
        grid,
        time: state.time(),
        data,
    })
}

/// Sup-norm distance between the evolved derivative block and fresh stencil
/// derivatives of the metric block. Zero immediately after packing; the
/// integrator lets it drift and this is the monitor.
pub fn consistency_drift(sv: &StateVector) -> Result<f64> {
    let n = sv.grid.dim();
    let metric = sv.metric_field();
    let mut worst = 0.0f64;
    for axis in 0..n {
        let fresh = partial_derivative(&metric, axis, 1)?;
        for node in 0..sv.grid.node_count() {
            let evolved = sv.block(node, 1 + axis);
            for (a, b) in evolved.iter().zip(fresh.node(node)) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    Ok(worst)
}

/// Recovers the second-order state, discarding the derivative block; returns
/// the state together with the measured consistency drift. The metric and
/// velocity come back bitwise identical to what was packed.
pub fn unpack_state(sv: &StateVector) -> Result<(FlowState, f64)> {
    let drift = consistency_drift(sv)?;
    let state = FlowState::new(sv.time, sv.metric_field(), sv.velocity_field())?;
    Ok((state, drift))
}

/// Dense per-node coefficient matrices and source vector of the first-order
/// system, for diagnostics and the residual check; the integrator itself
/// never materializes them.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub a0: DMatrix<f64>,
    pub aj: Vec<DMatrix<f64>>,
    pub b: DVector<f64>,
}

fn node_inverse(sv: &StateVector, node: usize) -> Result<Vec<f64>> {
    let n = sv.grid.dim();
    let g = sv.block(node, 0);
    packed_inverse(g, n).ok_or_else(|| HgfError::SingularMetric {
        node,
        min_eig: sym_min_eig(g, n),
    })
}

/// A0 = blockdiag(I_m, [g^{kl} I_m], I_m) at one node; symmetric positive
/// definite whenever the metric block is SPD, with minimum eigenvalue
/// min(1, min eig g^{-1}).
pub fn assemble_a0(sv: &StateVector, node: usize) -> Result<DMatrix<f64>> {
    let n = sv.grid.dim();
    let m = sym_count(n);
    let gi = node_inverse(sv, node)?;
    let size = node_len(n);
    let mut a = DMatrix::zeros(size, size);
    for c in 0..m {
        a[(c, c)] = 1.0;
        a[(m * (n + 1) + c, m * (n + 1) + c)] = 1.0;
    }
    for k in 0..n {
        for l in 0..n {
            let v = gi[sym_index(n, k, l)];
            for c in 0..m {
                a[(m * (1 + k) + c, m * (1 + l) + c)] = v;
            }
        }
    }
    Ok(a)
}

/// A^j at one node: the only nonzero blocks couple each derivative block to
/// the velocity block with coefficient g^{jk}, mirrored across the diagonal,
/// so the matrix is exactly symmetric by construction.
pub fn assemble_aj(sv: &StateVector, node: usize, j: usize) -> Result<DMatrix<f64>> {
    let n = sv.grid.dim();
    if j >= n {
        return Err(HgfError::AxisOutOfRange { axis: j, dim: n });
    }
    let m = sym_count(n);
    let gi = node_inverse(sv, node)?;
    let size = node_len(n);
    let mut a = DMatrix::zeros(size, size);
    for k in 0..n {
        let v = gi[sym_index(n, j, k)];
        for c in 0..m {
            a[(m * (1 + k) + c, m * (n + 1) + c)] = v;
            a[(m * (n + 1) + c, m * (1 + k) + c)] = v;
        }
    }
    Ok(a)
}

/// Third block of the source vector B as a field: exactly the lower-order
/// terms H for the gauge-fixed variant; for the pure and einstein-like
/// variants, the full right-hand side minus the principal term (the
/// non-principal remainder). The generalized variant's componentwise alpha
/// does not fit the displayed A0 structure and is rejected.
pub fn b_third_block(sv: &StateVector, variant: &RhsVariant) -> Result<TensorField> {
    let n = sv.grid.dim();
    let metric = sv.metric_field();
    let derivs: Vec<TensorField> = (0..n)
        .map(|axis| sv.derivative_field(axis))
        .collect::<Result<_>>()?;
    match variant {
        RhsVariant::GaugeFixed => gauge_lower_order(&metric, &derivs),
        RhsVariant::PureHgf | RhsVariant::EinsteinLike => {
            let state = FlowState::new(sv.time, metric.clone(), sv.velocity_field())?;
            let rhs = rhs_variant(&state, variant)?;
            let inverse = metric_inverse(&metric)?;
            let principal = principal_part(&inverse, &derivs)?;
            rhs.linear_comb(1.0, &principal, -1.0)
        }
        RhsVariant::Generalized(_) => Err(HgfError::UnsupportedVariant),
    }
}

/// Source vectors B = (h | 0 | third block) for every node.
pub fn assemble_b(sv: &StateVector, variant: &RhsVariant) -> Result<Vec<DVector<f64>>> {
    let n = sv.grid.dim();
    let m = sym_count(n);
    let third = b_third_block(sv, variant)?;
    let size = node_len(n);
    let mut out = Vec::with_capacity(sv.grid.node_count());
    for node in 0..sv.grid.node_count() {
        let mut b = DVector::zeros(size);
        b.as_mut_slice()[..m].copy_from_slice(sv.block(node, n + 1));
        b.as_mut_slice()[m * (n + 1)..].copy_from_slice(third.node(node));
        out.push(b);
    }
    Ok(out)
}

/// All three coefficient objects at one node. `b_third` must come from
/// [`b_third_block`] on the same state.
pub fn assemble_system(
    sv: &StateVector,
    node: usize,
    b_third: &TensorField,
) -> Result<SystemMatrices> {
    let n = sv.grid.dim();
    let m = sym_count(n);
    let a0 = assemble_a0(sv, node)?;
    let aj = (0..n)
        .map(|j| assemble_aj(sv, node, j))
        .collect::<Result<_>>()?;
    let size = node_len(n);
    let mut b = DVector::zeros(size);
    b.as_mut_slice()[..m].copy_from_slice(sv.block(node, n + 1));
    b.as_mut_slice()[m * (n + 1)..].copy_from_slice(b_third.node(node));
    Ok(SystemMatrices { a0, aj, b })
}

/// Integration controls. `t_end` is the absolute end time; `dt_cap` bounds
/// the step on top of the CFL bound (set it to have uniform steps for
/// residual windows and shared time grids); forcing supplies a manufactured
/// source evaluated at stage times.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub cfl_factor: f64,
    pub t_end: f64,
    pub dt_cap: f64,
    pub output_every: usize,
    pub variant: RhsVariant,
    pub forcing: Option<MmsTarget>,
}

impl IntegratorConfig {
    pub fn new(variant: RhsVariant, t_end: f64) -> Self {
        IntegratorConfig {
            cfl_factor: 0.4,
            t_end,
            dt_cap: f64::INFINITY,
            output_every: 1,
            variant,
            forcing: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_factor > 0.0 && self.cfl_factor <= 1.0) {
            return Err(HgfError::InvalidConfig(format!(
                "cfl_factor must lie in (0, 1], got {}",
                self.cfl_factor
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(HgfError::InvalidConfig(format!(
                "t_end must be positive and finite, got {}",
                self.t_end
            )));
        }
        if !(self.dt_cap > 0.0) {
            return Err(HgfError::InvalidConfig(format!(
                "dt_cap must be positive, got {}",
                self.dt_cap
            )));
        }
        if self.output_every == 0 {
            return Err(HgfError::InvalidConfig(
                "output_every must be at least 1".into(),
            ));
        }
        if self.forcing.is_some()
            && !matches!(
                self.variant,
                RhsVariant::PureHgf | RhsVariant::EinsteinLike
            )
        {
            return Err(HgfError::UnsupportedVariant);
        }
        Ok(())
    }
}

/// CFL bound: cfl_factor times the minimum over nodes and axes of
/// dx_j / sqrt(lambda_max(g^{-1})), with lambda_max(g^{-1}) = 1/lambda_min(g)
/// per node. The node loop is a fixed-order reduction.
pub fn cfl_dt(sv: &StateVector, cfl_factor: f64) -> Result<f64> {
    if !(cfl_factor > 0.0 && cfl_factor <= 1.0) {
        return Err(HgfError::InvalidConfig(format!(
            "cfl_factor must lie in (0, 1], got {cfl_factor}"
        )));
    }
    let n = sv.grid.dim();
    let mut max_inv_eig = 0.0f64;
    for node in 0..sv.grid.node_count() {
        let min_eig = sym_min_eig(sv.block(node, 0), n);
        if !(min_eig > SPD_TOLERANCE) {
            return Err(HgfError::SingularMetric { node, min_eig });
        }
        max_inv_eig = max_inv_eig.max(1.0 / min_eig);
    }
    let dx_min = sv
        .grid
        .spacing()
        .iter()
        .fold(f64::INFINITY, |acc, &dx| acc.min(dx));
    Ok(cfl_factor * dx_min / max_inv_eig.sqrt())
}

fn spd_lost_at(time: f64) -> impl Fn(HgfError) -> HgfError {
    move |err| match err {
        HgfError::SingularMetric { .. } => HgfError::SpdLost { time },
        other => other,
    }
}

/// du/dt of the solved system at the state's own time: the metric block
/// moves with the velocity block, the derivative blocks with the stencil
/// derivatives of the velocity, the velocity block with the variant RHS
/// (gauge-fixed reads its evolved derivative block) plus optional forcing.
fn time_derivative(sv: &StateVector, config: &IntegratorConfig) -> Result<Vec<f64>> {
    let grid = &sv.grid;
    let n = grid.dim();
    let m = sym_count(n);
    let state = FlowState::new(sv.time, sv.metric_field(), sv.velocity_field())
        .map_err(spd_lost_at(sv.time))?;
    let mut acc = match &config.variant {
        RhsVariant::GaugeFixed => {
            let derivs: Vec<TensorField> = (0..n)
                .map(|axis| sv.derivative_field(axis))
                .collect::<Result<_>>()?;
            gauge_rhs_from_derivs(state.metric(), &derivs)
        }
        other => rhs_variant(&state, other),
    }
    .map_err(spd_lost_at(sv.time))?;
    if let Some(target) = &config.forcing {
        let source = mms_source(target, &config.variant, grid, sv.time)?;
        acc = acc.linear_comb(1.0, &source, 1.0)?;
    }
    let dkh: Vec<TensorField> = (0..n)
        .map(|axis| partial_derivative(state.velocity(), axis, 1))
        .collect::<Result<_>>()?;
    let mut rate = vec![0.0f64; sv.data.len()];
    for node in 0..grid.node_count() {
        let base = node * node_len(n);
        rate[base..base + m].copy_from_slice(state.velocity().node(node));
        for (k, d) in dkh.iter().enumerate() {
            rate[base + m * (1 + k)..base + m * (2 + k)].copy_from_slice(d.node(node));
        }
        rate[base + m * (n + 1)..base + m * (n + 2)].copy_from_slice(acc.node(node));
    }
    Ok(rate)
}

/// One classical four-stage step. Enforces the CFL bound (small relative
/// slack for end-of-run fitted steps) and verifies the result is still SPD
/// and finite; a stage or final state outside the SPD cone raises spd-lost.
pub fn rk4_step(sv: &StateVector, dt: f64, config: &IntegratorConfig) -> Result<StateVector> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(HgfError::InvalidConfig(format!(
            "step size must be positive and finite, got {dt}"
        )));
    }
    let bound = cfl_dt(sv, config.cfl_factor)?;
    if dt > bound * (1.0 + 1e-6) {
        return Err(HgfError::CflViolation { dt, bound });
    }
    let k1 = time_derivative(sv, config)?;
    let s2 = sv.offset(0.5 * dt, 0.5 * dt, &k1);
    let k2 = time_derivative(&s2, config)?;
    let s3 = sv.offset(0.5 * dt, 0.5 * dt, &k2);
    let k3 = time_derivative(&s3, config)?;
    let s4 = sv.offset(dt, dt, &k3);
    let k4 = time_derivative(&s4, config)?;
    let mut next = sv.clone();
    next.time = sv.time + dt;
    let w = dt / 6.0;
    for (i, u) in next.data.iter_mut().enumerate() {
        *u += w * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
    }
    FlowState::new(next.time, next.metric_field(), next.velocity_field())
        .map_err(spd_lost_at(next.time))?;
    Ok(next)
}

/// Drives the integrator from `initial` to `config.t_end`, recomputing the
/// step each iteration as min(CFL bound, dt_cap, remaining time). A step
/// that loses SPD is retried once at half size; a second failure aborts.
/// The observer sees the packed initial state and every accepted state.
pub fn evolve_observed(
    initial: &FlowState,
    config: &IntegratorConfig,
    mut observe: impl FnMut(&StateVector) -> Result<()>,
) -> Result<StateVector> {
    config.validate()?;
    if config.t_end <= initial.time() {
        return Err(HgfError::InvalidConfig(format!(
            "t_end {} does not lie beyond the initial time {}",
            config.t_end,
            initial.time()
        )));
    }
    let mut sv = pack_state(initial)?;
    observe(&sv)?;
    let eps = 1e-12 * config.t_end.abs().max(1.0);
    while sv.time < config.t_end - eps {
        let remaining = config.t_end - sv.time;
        let mut dt = cfl_dt(&sv, config.cfl_factor)?.min(config.dt_cap);
        if remaining <= dt * (1.0 + 1e-9) {
            dt = remaining;
        }
        sv = match rk4_step(&sv, dt, config) {
            Ok(next) => next,
            Err(HgfError::SpdLost { .. }) => rk4_step(&sv, 0.5 * dt, config)?,
            Err(err) => return Err(err),
        };
        observe(&sv)?;
    }
    Ok(sv)
}

/// Convenience driver returning the final second-order state and the final
/// consistency drift of the derivative block.
pub fn evolve(initial: &FlowState, config: &IntegratorConfig) -> Result<(FlowState, f64)> {
    let sv = evolve_observed(initial, config, |_| Ok(()))?;
    unpack_state(&sv)
}

/// Residual of the first-order system on three consecutive states at uniform
/// spacing dt: sup over nodes and components of
/// A0 (u_+ - u_-)/(2 dt) - sum_j A^j d_j u - B, evaluated at the middle
/// state. This goes through the dense assembled matrices on purpose; it is
/// the independent check that the integrated trajectory satisfies the
/// symmetric hyperbolic system, not a restatement of the integrator.
pub fn first_order_residual(
    history: &[StateVector],
    dt: f64,
    variant: &RhsVariant,
) -> Result<f64> {
    if history.len() < 3 {
        return Err(HgfError::HistoryTooShort {
            needed: 3,
            got: history.len(),
        });
    }
    let (u_prev, u_mid, u_next) = (&history[0], &history[1], &history[2]);
    u_prev.metric_field().same_grid(&u_mid.metric_field())?;
    u_next.metric_field().same_grid(&u_mid.metric_field())?;
    for (a, b) in [(u_prev, u_mid), (u_mid, u_next)] {
        if ((b.time - a.time) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(HgfError::InvalidConfig(format!(
                "history spacing {} does not match dt {}",
                b.time - a.time,
                dt
            )));
        }
    }
    let grid = &u_mid.grid;
    let n = grid.dim();
    let size = node_len(n);
    let third = b_third_block(u_mid, variant)?;
    // Spatial derivatives of every block of the middle state, per axis.
    let mut block_derivs: Vec<Vec<TensorField>> = Vec::with_capacity(n);
    for axis in 0..n {
        let mut per_block = Vec::with_capacity(n + 2);
        for b in 0..n + 2 {
            per_block.push(partial_derivative(
                &u_mid.extract_block(b, (0, 2)),
                axis,
                1,
            )?);
        }
        block_derivs.push(per_block);
    }
    let m = sym_count(n);
    let inv_2dt = 1.0 / (2.0 * dt);
    let mut worst = 0.0f64;
    let mut ut = DVector::zeros(size);
    let mut ux = DVector::zeros(size);
    for node in 0..grid.node_count() {
        let sys = assemble_system(u_mid, node, &third)?;
        let prev = u_prev.node(node);
        let next = u_next.node(node);
        for c in 0..size {
            ut[c] = (next[c] - prev[c]) * inv_2dt;
        }
        let mut r = &sys.a0 * &ut - &sys.b;
        for (axis, aj) in sys.aj.iter().enumerate() {
            for b in 0..n + 2 {
                ux.as_mut_slice()[b * m..(b + 1) * m]
                    .copy_from_slice(block_derivs[axis][b].node(node));
            }
            r -= aj * &ux;
        }
        worst = worst.max(r.abs().max());
    }
    Ok(worst)
}

#[cfg(test)]
mod test {
    use super::*;
    use crate::field::sample_field;
    use std::f64::consts::TAU;

    fn conformal_state(pts: usize, eps: f64, vel: f64) -> FlowState {
        let grid = Grid::cube(2, pts, TAU).unwrap();
        let metric = sample_field(
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
        .unwrap();
        let velocity = sample_field(
            |x, idx| {
                if idx[0] == idx[1] {
                    vel * (x[0] + x[1]).sin()
                } else {
                    0.0
                }
            },
            &grid,
            (0, 2),
            Symmetry::SymmetricPair,
        )
        .unwrap();
        FlowState::new(0.0, metric, velocity).unwrap()
    }

    fn flat_state(n: usize, pts: usize, vel: f64) -> FlowState {
        let grid = Grid::cube(n, pts, TAU).unwrap();
        let metric = sample_field(
            |_x, idx| if idx[0] == idx[1] { 1.0 } else { 0.0 },
            &grid,
            (0, 2),
            Symmetry::SymmetricPair,
        )
        .unwrap();
        let velocity = sample_field(
            |_x, idx| if idx[0] == idx[1] { vel } else { 0.0 },
            &grid,
            (0, 2),
            Symmetry::SymmetricPair,
        )
        .unwrap();
        FlowState::new(0.0, metric, velocity).unwrap()
    }

    #[test]
    fn node_lengths_match_block_counts() {
        assert_eq!(node_len(2), 12);
        assert_eq!(node_len(3), 30);
        assert_eq!(node_len(5), 105);
    }

    #[test]
    fn pack_unpack_round_trip_is_bitwise() {
        let state = conformal_state(16, 0.1, 0.05);
        let sv = pack_state(&state).unwrap();
        let (back, drift) = unpack_state(&sv).unwrap();
        assert_eq!(back.metric().data(), state.metric().data());
        assert_eq!(back.velocity().data(), state.velocity().data());
        assert_eq!(back.time(), state.time());
        assert_eq!(drift, 0.0);
    }

    #[test]
    fn flat_static_packs_to_identity_and_zeros() {
        let state = flat_state(2, 8, 0.0);
        let sv = pack_state(&state).unwrap();
        for node in 0..sv.grid().node_count() {
            assert_eq!(sv.block(node, 0), &[1.0, 0.0, 1.0]);
            assert_eq!(sv.block(node, 1), &[0.0, 0.0, 0.0]);
            assert_eq!(sv.block(node, 2), &[0.0, 0.0, 0.0]);
            assert_eq!(sv.block(node, 3), &[0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn flat_a0_is_the_identity() {
        let sv = pack_state(&flat_state(2, 8, 0.0)).unwrap();
        let a0 = assemble_a0(&sv, 3).unwrap();
        assert_eq!(a0, DMatrix::identity(12, 12));
    }

    #[test]
    fn diagonal_metric_a0_middle_block() {
        let grid = Grid::cube(2, 8, TAU).unwrap();
        let metric = sample_field(
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
        let vel = TensorField::zeros(&grid, (0, 2), Symmetry::SymmetricPair);
        let sv = pack_state(&FlowState::new(0.0, metric, vel).unwrap()).unwrap();
        let a0 = assemble_a0(&sv, 0).unwrap();
        // Blocks: metric rows 0..3, derivative rows 3..9, velocity rows 9..12.
        for c in 0..3 {
            assert_eq!(a0[(3 + c, 3 + c)], 0.25);
            assert_eq!(a0[(6 + c, 6 + c)], 1.0);
            assert_eq!(a0[(3 + c, 6 + c)], 0.0);
            assert_eq!(a0[(6 + c, 3 + c)], 0.0);
            assert_eq!(a0[(c, c)], 1.0);
            assert_eq!(a0[(9 + c, 9 + c)], 1.0);
        }
        // Spectrum claim: min eig A0 = min(1, min eig g^{-1}) = 1/4.
        let eigs = a0.symmetric_eigen().eigenvalues;
        let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((min - 0.25).abs() < 1e-14);
    }

    #[test]
    fn aj_coupling_blocks_and_exact_symmetry() {
        let sv = pack_state(&flat_state(2, 8, 0.0)).unwrap();
        let a = assemble_aj(&sv, 0, 0).unwrap();
        // g^{00} = 1 couples derivative block 0 to the velocity block.
        for c in 0..3 {
            assert_eq!(a[(3 + c, 9 + c)], 1.0);
            assert_eq!(a[(9 + c, 3 + c)], 1.0);
            assert_eq!(a[(6 + c, 9 + c)], 0.0);
        }
        assert_eq!(a.transpose(), a);
        assert!(matches!(
            assemble_aj(&sv, 0, 2),
            Err(HgfError::AxisOutOfRange { axis: 2, dim: 2 })
        ));

        // Non-diagonal metric: coupling blocks follow the 2x2 inverse
        // [[2,1],[1,2]]^{-1} = [[2/3,-1/3],[-1/3,2/3]].
        let grid = Grid::cube(2, 8, TAU).unwrap();
        let metric = sample_field(
            |_x, idx| if idx[0] == idx[1] { 2.0 } else { 1.0 },
            &grid,
            (0, 2),
            Symmetry::SymmetricPair,
        )
        .unwrap();
        let vel = TensorField::zeros(&grid, (0, 2), Symmetry::SymmetricPair);
        let sv = pack_state(&FlowState::new(0.0, metric, vel).unwrap()).unwrap();
        let a = assemble_aj(&sv, 0, 0).unwrap();
        assert!((a[(3, 9)] - 2.0 / 3.0).abs() < 1e-15);
        assert!((a[(6, 9)] + 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.transpose(), a);
    }

    #[test]
    fn flat_static_b_vanishes() {
        let sv = pack_state(&flat_state(2, 8, 0.0)).unwrap();
        for variant in [RhsVariant::PureHgf, RhsVariant::GaugeFixed, RhsVariant::EinsteinLike] {
            let b = assemble_b(&sv, &variant).unwrap();
            for vec in &b {
                assert_eq!(vec.amax(), 0.0, "variant {}", variant.name());
            }
        }
    }

    #[test]
    fn b_third_block_is_rhs_minus_principal_for_pure() {
        let state = conformal_state(16, 0.05, 0.0);
        let sv = pack_state(&state).unwrap();
        let third = b_third_block(&sv, &RhsVariant::PureHgf).unwrap();
        let inverse = metric_inverse(state.metric()).unwrap();
        let derivs: Vec<TensorField> = (0..2)
            .map(|axis| sv.derivative_field(axis).unwrap())
            .collect();
        let principal = principal_part(&inverse, &derivs).unwrap();
        let rhs = crate::flow::rhs_pure(&state).unwrap();
        let recomposed = third.linear_comb(1.0, &principal, 1.0).unwrap();
        for (a, b) in recomposed.data().iter().zip(rhs.data()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(matches!(
            b_third_block(
                &sv,
                &RhsVariant::Generalized(crate::flow::GeneralizedSpec::isotropic(
                    sv.grid(),
                    1.0,
                    crate::flow::PointwiseSource::Zero,
                    crate::flow::PointwiseSource::Zero,
                ))
            ),
            Err(HgfError::UnsupportedVariant)
        ));
    }

    #[test]
    fn cfl_examples() {
        // Flat metric: wave speed 1, dt = factor * dx.
        let grid = Grid::cube(2, 8, 0.8).unwrap();
        let metric = sample_field(
            |_x, idx| if idx[0] == idx[1] { 1.0 } else { 0.0 },
            &grid,
            (0, 2),
            Symmetry::SymmetricPair,
        )
        .unwrap();
        let vel = TensorField::zeros(&grid, (0, 2), Symmetry::SymmetricPair);
        let sv = pack_state(&FlowState::new(0.0, metric, vel).unwrap()).unwrap();
        let dt = cfl_dt(&sv, 0.4).unwrap();
        assert!((dt - 0.04).abs() < 1e-15);
        let dt = cfl_dt(&sv, 1.0).unwrap();
        assert!((dt - 0.1).abs() < 1e-15);

        // g = diag(1/4, 1): largest inverse eigenvalue 4, speed 2.
        let metric = sample_field(
            |_x, idx| match (idx[0], idx[1]) {
                (0, 0) => 0.25,
                (1, 1) => 1.0,
                _ => 0.0,
            },
            &grid,
            (0, 2),
            Symmetry::SymmetricPair,
        )
        .unwrap();
        let vel = TensorField::zeros(&grid, (0, 2), Symmetry::SymmetricPair);
        let sv = pack_state(&FlowState::new(0.0, metric, vel).unwrap()).unwrap();
        let dt = cfl_dt(&sv, 0.4).unwrap();
        assert!((dt - 0.02).abs() < 1e-15);

        assert!(matches!(
            cfl_dt(&sv, 1.5),
            Err(HgfError::InvalidConfig(_))
        ));
    }

    #[test]
    fn flat_static_step_is_identity() {
        let sv = pack_state(&flat_state(2, 8, 0.0)).unwrap();
        let config = IntegratorConfig::new(RhsVariant::PureHgf, 1.0);
        let next = rk4_step(&sv, 0.05, &config).unwrap();
        assert_eq!(next.data(), sv.data());
        assert_eq!(next.time(), 0.05);
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let sv = pack_state(&flat_state(2, 8, 0.0)).unwrap();
        let config = IntegratorConfig::new(RhsVariant::PureHgf, 1.0);
        let bound = cfl_dt(&sv, config.cfl_factor).unwrap();
        assert!(matches!(
            rk4_step(&sv, 2.0 * bound, &config),
            Err(HgfError::CflViolation { .. })
        ));
    }

    #[test]
    fn linear_flat_family_is_tracked_exactly() {
        // g = (1 + 0.5 t) delta has zero RHS; RK4 adds dt * h each step.
        let state = flat_state(2, 8, 0.5);
        let mut config = IntegratorConfig::new(RhsVariant::PureHgf, 1.0);
        config.cfl_factor = 0.5;
        let mut checked = 0usize;
        let final_sv = evolve_observed(&state, &config, |sv| {
            let f = 1.0 + 0.5 * sv.time();
            for node in 0..sv.grid().node_count() {
                let g = sv.block(node, 0);
                assert!((g[0] - f).abs() < 1e-13);
                assert!((g[2] - f).abs() < 1e-13);
                assert_eq!(g[1], 0.0);
            }
            checked += 1;
            Ok(())
        })
        .unwrap();
        assert!(checked > 3);
        assert!((final_sv.time() - 1.0).abs() < 1e-12);
        let (final_state, drift) = unpack_state(&final_sv).unwrap();
        assert!((final_state.metric().at(0, &[0, 0]) - 1.5).abs() < 1e-13);
        assert_eq!(drift, 0.0);
    }

    #[test]
    fn evolve_rejects_bad_configs() {
        let state = flat_state(2, 8, 0.0);
        let mut config = IntegratorConfig::new(RhsVariant::PureHgf, 1.0);
        config.cfl_factor = 0.0;
        assert!(matches!(
            evolve(&state, &config),
            Err(HgfError::InvalidConfig(_))
        ));
        let mut config = IntegratorConfig::new(RhsVariant::GaugeFixed, 1.0);
        config.forcing = Some(MmsTarget::HomotheticFlat { rate: 0.1 });
        assert!(matches!(
            evolve(&state, &config),
            Err(HgfError::UnsupportedVariant)
        ));
    }

    #[test]
    fn first_order_residual_vanishes_on_flat_families() {
        // Static flat: every term is exactly zero.
        let sv = pack_state(&flat_state(2, 8, 0.0)).unwrap();
        let mut h1 = sv.clone();
        h1.time = 0.1;
        let mut h2 = sv.clone();
        h2.time = 0.2;
        let r = first_order_residual(&[sv, h1, h2], 0.1, &RhsVariant::GaugeFixed).unwrap();
        assert_eq!(r, 0.0);

        // Expanding flat family: time derivative is constant, all spatial
        // terms vanish; residual at rounding level.
        let config = IntegratorConfig::new(RhsVariant::PureHgf, 1.0);
        let mut states = Vec::new();
        let dt = 0.05;
        let mut current = pack_state(&flat_state(2, 8, 0.5)).unwrap();
        states.push(current.clone());
        for _ in 0..2 {
            current = rk4_step(&current, dt, &config).unwrap();
            states.push(current.clone());
        }
        let r = first_order_residual(&states, dt, &RhsVariant::PureHgf).unwrap();
        assert!(r < 1e-13, "residual {r:.3e}");
    }

    #[test]
    fn short_history_is_rejected() {
        let sv = pack_state(&flat_state(2, 8, 0.0)).unwrap();
        assert!(matches!(
            first_order_residual(&[sv.clone(), sv], 0.1, &RhsVariant::GaugeFixed),
            Err(HgfError::HistoryTooShort { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn gauge_run_drift_stays_small() {
        let state = conformal_state(16, 0.01, 0.0);
        let mut config = IntegratorConfig::new(RhsVariant::GaugeFixed, 0.3);
        config.cfl_factor = 0.4;
        let (_, drift) = evolve(&state, &config).unwrap();
        assert!(drift < 1e-4, "drift {drift:.3e}");
    }

    #[test]
    fn collapse_aborts_before_degeneracy() {
        // Spatially constant contracting family on a flat chart: g stays
        // exactly flat (zero RHS), so g = (1 - 0.8 t) delta until SPD fails.
        let grid = Grid::cube(2, 8, TAU).unwrap();
        let metric = sample_field(
            |_x, idx| if idx[0] == idx[1] { 1.0 } else { 0.0 },
            &grid,
            (0, 2),
            Symmetry::SymmetricPair,
        )
        .unwrap();
        let velocity = sample_field(
            |_x, idx| if idx[0] == idx[1] { -0.8 } else { 0.0 },
            &grid,
            (0, 2),
            Symmetry::SymmetricPair,
        )
        .unwrap();
        let state = FlowState::new(0.0, metric, velocity).unwrap();
        let config = IntegratorConfig::new(RhsVariant::PureHgf, 2.0);
        match evolve(&state, &config) {
            Err(HgfError::SpdLost { time }) => {
                // Degeneracy at t = 1.25. The reported time is the stage at
                // which SPD failed, at most one (halved) step past it; the
                // CFL bound shrinks with sqrt(min eig), so the overshoot is
                // well under a tenth here.
                assert!(time < 1.35, "stopped at {time}");
                assert!(time > 1.2, "stopped prematurely at {time}");
            }
            other => panic!("expected spd-lost, got {other:?}"),
        }
    }

    #[test]
    fn reversibility_of_the_pure_flow() {
        let state = conformal_state(16, 0.01, 0.0);
        let mut config = IntegratorConfig::new(RhsVariant::PureHgf, 0.25);
        config.dt_cap = 0.025;
        let (fwd, _) = evolve(&state, &config).unwrap();
        let negated = FlowState::new(
            0.0,
            fwd.metric().clone(),
            fwd.velocity().map(|v| -v),
        )
        .unwrap();
        let (back, _) = evolve(&negated, &config).unwrap();
        let diff = back
            .metric()
            .linear_comb(1.0, state.metric(), -1.0)
            .unwrap()
            .sup_norm();
        assert!(diff < 1e-9, "round trip defect {diff:.3e}");
    }
}
