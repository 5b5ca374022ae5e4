//! Time advancement of the flow with exact or near-exact preservation of the
//! pointwise sphere constraint.
//!
//! Two schemes: a classical projected RK4 step, and an implicit midpoint
//! step whose converged update satisfies `u+ = u + dt F((u + u+)/2)`. At
//! eps = 0 the midpoint update is a pure cross product with the midpoint
//! value, so `|u+| = |u|` holds nodewise up to the solver residual with no
//! renormalization at all.
//!
//! The midpoint equation is solved by fixed-point iteration on the frozen
//! nonlinear coefficients. On 1-d grids each sweep treats the Laplacian of
//! the unknown implicitly through a block-tridiagonal solve, which keeps the
//! iteration contracting for the large `dt / h^2` ratios the midpoint scheme
//! is used at; plain sweeps contract only for dt = O(h^2) and remain the
//! fallback in higher dimensions.

use crate::error::{Error, Result};
use crate::geometry::{llg_rhs, SphereField};
use crate::grid::{BoxGrid, VectorField};
use crate::invariants::{self, InvariantRecord};
use crate::vec3::Vec3;

/// Sphere-violation guard on accepted steps when renormalization is off;
/// beyond this the run is aborted rather than silently degrading.
pub const MONITORED_SPHERE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Rk4Projected,
    ImplicitMidpoint,
}

/// Whether to renormalize `u <- u / |u|` after each accepted step.
///
/// `Auto` resolves to off for the (implicit midpoint, eps = 0) pair, which
/// conserves the norm on its own, and on otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RenormalizePolicy {
    Auto,
    On,
    Off,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowParams {
    pub eps: f64,
    pub scheme: Scheme,
    pub dt: f64,
    pub fp_tol: f64,
    pub fp_max_iters: usize,
    pub renormalize: RenormalizePolicy,
    pub cfl_constant: f64,
    pub override_cfl: bool,
}

impl FlowParams {
    pub fn new(scheme: Scheme, eps: f64, dt: f64) -> Self {
        FlowParams {
            eps,
            scheme,
            dt,
            fp_tol: 1e-12,
            fp_max_iters: 200,
            renormalize: RenormalizePolicy::Auto,
            cfl_constant: 0.25,
            override_cfl: false,
        }
    }

    pub fn cfl_limit(&self, grid: &BoxGrid) -> f64 {
        let h = grid.min_spacing();
        self.cfl_constant * h * h
    }

    pub fn validate(&self, grid: &BoxGrid) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eps) {
            return Err(Error::EpsOutOfRange(self.eps));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::NonPositiveDt(self.dt));
        }
        let limit = self.cfl_limit(grid);
        if !self.override_cfl && self.dt > limit {
            return Err(Error::CflViolation { dt: self.dt, limit });
        }
        Ok(())
    }

    pub fn renormalize_each_step(&self) -> bool {
        match self.renormalize {
            RenormalizePolicy::On => true,
            RenormalizePolicy::Off => false,
            RenormalizePolicy::Auto => {
                !(self.scheme == Scheme::ImplicitMidpoint && self.eps == 0.0)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub u: SphereField,
    pub step_count: u64,
}

impl FlowState {
    pub fn initial(u: SphereField) -> Self {
        FlowState { t: 0.0, u, step_count: 0 }
    }
}

fn max_norm(values: &[Vec3]) -> f64 {
    values.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn all_finite(values: &[Vec3]) -> bool {
    values.iter().all(|v| v.is_finite())
}

/// Flow right-hand side on a raw (not exactly unit) field: the literal
/// extension `eps (Lap w + |grad w|^2 w) + w x Lap w`. The midpoint solver
/// iterates on off-sphere intermediate values, so no projection or unit
/// check is applied here; at eps = 0 the cross-product form is what makes
/// the converged update norm-conserving.
fn rhs_raw(grid: &BoxGrid, values: &[Vec3], eps: f64) -> Vec<Vec3> {
    let field = VectorField::new(*grid, values.to_vec()).expect("caller-sized");
    let lap = field.laplacian_neumann();
    if eps == 0.0 {
        values
            .iter()
            .zip(lap.values().iter())
            .map(|(w, l)| w.cross(*l))
            .collect()
    } else {
        let gsq = field.gradient_norm_sq();
        values
            .iter()
            .zip(lap.values().iter())
            .zip(gsq.values().iter())
            .map(|((w, l), g)| (*l + *w * *g) * eps + w.cross(*l))
            .collect()
    }
}

fn wrap_state(
    raw: VectorField,
    renormalize: bool,
    t: f64,
    step_count: u64,
) -> Result<FlowState> {
    let u = if renormalize {
        SphereField::renormalized(raw)?
    } else {
        SphereField::with_tol(raw, MONITORED_SPHERE_TOL)?
    };
    Ok(FlowState { t, u, step_count })
}

/// One classical 4-stage explicit step with nodewise renormalization.
///
/// Stage arguments are renormalized before each right-hand-side evaluation
/// (the evaluations require on-sphere input); the combined update is
/// renormalized according to the policy.
pub fn step_rk4_projected(state: &FlowState, params: &FlowParams) -> Result<FlowState> {
    params.validate(state.u.grid())?;
    step_rk4_signed(state, params, params.dt)
}

fn step_rk4_signed(state: &FlowState, params: &FlowParams, dt: f64) -> Result<FlowState> {
    let grid = *state.u.grid();
    let u = state.u.values();
    let eps = params.eps;

    let stage = |base: &[Vec3], k: &[Vec3], factor: f64| -> Result<SphereField> {
        let vals: Vec<Vec3> = base.iter().zip(k.iter()).map(|(b, kv)| *b + *kv * factor).collect();
        if !all_finite(&vals) {
            return Err(Error::IntegrationBlowup { t: state.t, max_step: max_norm(k) * factor });
        }
        SphereField::renormalized(VectorField::new(grid, vals).expect("same length"))
    };

    let k1 = llg_rhs(&state.u, eps)?.into_field().into_values();
    let u2 = stage(u, &k1, dt / 2.0)?;
    let k2 = llg_rhs(&u2, eps)?.into_field().into_values();
    let u3 = stage(u, &k2, dt / 2.0)?;
    let k3 = llg_rhs(&u3, eps)?.into_field().into_values();
    let u4 = stage(u, &k3, dt)?;
    let k4 = llg_rhs(&u4, eps)?.into_field().into_values();

    let mut vals = Vec::with_capacity(u.len());
    let mut max_step = 0.0f64;
    for i in 0..u.len() {
        let delta = (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        max_step = max_step.max(delta.norm());
        vals.push(u[i] + delta);
    }
    if !all_finite(&vals) {
        return Err(Error::IntegrationBlowup { t: state.t, max_step });
    }
    wrap_state(
        VectorField::new(grid, vals).expect("same length"),
        params.renormalize_each_step(),
        state.t + dt,
        state.step_count + 1,
    )
}

/// One implicit midpoint step; returns the new state and the number of
/// fixed-point sweeps used.
pub fn step_implicit_midpoint(
    state: &FlowState,
    params: &FlowParams,
) -> Result<(FlowState, usize)> {
    params.validate(state.u.grid())?;
    step_midpoint_signed(state, params, params.dt)
}

fn step_midpoint_signed(
    state: &FlowState,
    params: &FlowParams,
    dt: f64,
) -> Result<(FlowState, usize)> {
    let grid = *state.u.grid();
    let u = state.u.values();
    let eps = params.eps;

    // Explicit predictor.
    let f0 = rhs_raw(&grid, u, eps);
    let mut v: Vec<Vec3> = u.iter().zip(f0.iter()).map(|(a, k)| *a + *k * dt).collect();

    let lap_u = VectorField::new(grid, u.to_vec()).expect("same length").laplacian_neumann();

    let mut iterations = 0usize;
    loop {
        iterations += 1;
        if iterations > params.fp_max_iters {
            let mid: Vec<Vec3> = u.iter().zip(v.iter()).map(|(a, b)| (*a + *b) * 0.5).collect();
            let f = rhs_raw(&grid, &mid, eps);
            let residual = (0..u.len())
                .map(|i| (v[i] - u[i] - f[i] * dt).norm())
                .fold(0.0, f64::max);
            return Err(Error::FixedPointDiverged { iters: params.fp_max_iters, residual });
        }

        let mid: Vec<Vec3> = u.iter().zip(v.iter()).map(|(a, b)| (*a + *b) * 0.5).collect();
        if !all_finite(&mid) {
            return Err(Error::IntegrationBlowup { t: state.t, max_step: max_norm(&v) });
        }
        let f = rhs_raw(&grid, &mid, eps);
        let residual = (0..u.len())
            .map(|i| (v[i] - u[i] - f[i] * dt).norm())
            .fold(0.0, f64::max);
        if !residual.is_finite() {
            return Err(Error::IntegrationBlowup { t: state.t, max_step: max_norm(&f) * dt });
        }
        if residual <= params.fp_tol {
            break;
        }

        if grid.dims() == 1 {
            v = midpoint_sweep_tridiagonal(&grid, u, &mid, &lap_u, eps, dt);
        } else {
            // Plain sweep; contracts for dt = O(h^2).
            v = u.iter().zip(f.iter()).map(|(a, k)| *a + *k * dt).collect();
        }
    }

    let renorm = params.renormalize_each_step();
    let new =
        wrap_state(VectorField::new(grid, v).expect("same length"), renorm, state.t + dt, state.step_count + 1)?;
    Ok((new, iterations))
}

/// One semi-implicit sweep of the 1-d midpoint equation: the Laplacian of
/// the unknown is treated implicitly against frozen cross-product and
/// gradient coefficients, i.e. solve
///
/// `v - (dt/2) (eps I + [m]x) Lap v
///    = u + (dt/2) (eps I + [m]x) Lap u + dt eps |grad m|^2 m`
///
/// nodewise in the 3x3 block-tridiagonal sense. The fixed point of the
/// sweep is the exact midpoint update.
fn midpoint_sweep_tridiagonal(
    grid: &BoxGrid,
    u: &[Vec3],
    mid: &[Vec3],
    lap_u: &VectorField,
    eps: f64,
    dt: f64,
) -> Vec<Vec3> {
    let n = grid.nodes(0);
    let h = grid.spacing(0);
    let s = dt / (2.0 * h * h);

    let gsq_mid = if eps != 0.0 {
        Some(
            VectorField::new(*grid, mid.to_vec())
                .expect("same length")
                .gradient_norm_sq(),
        )
    } else {
        None
    };

    // Row blocks: interior  -s M | I + 2s M | -s M
    //             first row       I + 2s M | -2s M
    //             last row  -2s M | I + 2s M
    let m_block = |j: usize| Mat3::skew(mid[j]).add(Mat3::identity().scale(eps));

    let mut diag: Vec<Mat3> = Vec::with_capacity(n);
    let mut rhs: Vec<Vec3> = Vec::with_capacity(n);
    for j in 0..n {
        let m = m_block(j);
        diag.push(Mat3::identity().add(m.scale(2.0 * s)));
        let mut b = u[j] + m.mul_vec(lap_u.values()[j]) * (dt / 2.0);
        if let Some(gsq) = &gsq_mid {
            b += mid[j] * (dt * eps * gsq.values()[j]);
        }
        rhs.push(b);
    }
    let off = |j: usize, boundary: bool| {
        let factor = if boundary { -2.0 * s } else { -s };
        m_block(j).scale(factor)
    };

    // Block Thomas elimination.
    let mut inv_diag: Vec<Mat3> = Vec::with_capacity(n);
    inv_diag.push(diag[0].inverse());
    for j in 1..n {
        let a = off(j, j == n - 1); // coupling to v[j-1]
        let c_prev = off(j - 1, j - 1 == 0); // row j-1 coupling to v[j]
        let w = a.mul_mat(inv_diag[j - 1]);
        let d = diag[j].sub(w.mul_mat(c_prev));
        let r = rhs[j] - w.mul_vec(rhs[j - 1]);
        rhs[j] = r;
        inv_diag.push(d.inverse());
    }
    let mut v = vec![Vec3::ZERO; n];
    v[n - 1] = inv_diag[n - 1].mul_vec(rhs[n - 1]);
    for j in (0..n - 1).rev() {
        let c = off(j, j == 0);
        v[j] = inv_diag[j].mul_vec(rhs[j] - c.mul_vec(v[j + 1]));
    }
    v
}

#[derive(Clone, Copy, Debug)]
struct Mat3([[f64; 3]; 3]);

impl Mat3 {
    fn identity() -> Self {
        Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Matrix of `w -> v x w`.
    fn skew(v: Vec3) -> Self {
        Mat3([[0.0, -v.z, v.y], [v.z, 0.0, -v.x], [-v.y, v.x, 0.0]])
    }

    fn scale(self, s: f64) -> Self {
        let mut m = self.0;
        for row in &mut m {
            for e in row {
                *e *= s;
            }
        }
        Mat3(m)
    }

    fn add(self, o: Self) -> Self {
        let mut m = self.0;
        for (r, orow) in m.iter_mut().zip(o.0.iter()) {
            for (e, oe) in r.iter_mut().zip(orow.iter()) {
                *e += oe;
            }
        }
        Mat3(m)
    }

    fn sub(self, o: Self) -> Self {
        self.add(o.scale(-1.0))
    }

    fn mul_vec(self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    fn mul_mat(self, o: Self) -> Self {
        let a = &self.0;
        let b = &o.0;
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        Mat3(m)
    }

    fn inverse(self) -> Self {
        let m = &self.0;
        let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
        let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
        let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
        let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
        let inv_det = 1.0 / det;
        Mat3([
            [
                c00 * inv_det,
                (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det,
                (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det,
            ],
            [
                c01 * inv_det,
                (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det,
                (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det,
            ],
            [
                c02 * inv_det,
                (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det,
                (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det,
            ],
        ])
    }
}

#[derive(Clone, Debug)]
pub struct TrajectorySample {
    pub state: FlowState,
    pub record: InvariantRecord,
}

/// Result of `advance`: monitored samples ordered by time, plus a failure
/// marker when a step error cut the run short.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub failure: Option<(f64, Error)>,
}

impl Trajectory {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }

    pub fn final_state(&self) -> Option<&FlowState> {
        self.samples.last().map(|s| &s.state)
    }

    pub fn records(&self) -> impl Iterator<Item = &InvariantRecord> {
        self.samples.iter().map(|s| &s.record)
    }
}

/// Repeatedly step from `initial` to `t_final`, recording invariants every
/// `monitor_stride` steps (plus the initial and final states). The last step
/// is shortened to land on `t_final` exactly. Step failures terminate the
/// run and are reported in the trajectory's failure marker alongside the
/// partial samples.
pub fn advance(
    initial: &FlowState,
    params: &FlowParams,
    t_final: f64,
    monitor_stride: usize,
) -> Result<Trajectory> {
    params.validate(initial.u.grid())?;
    if monitor_stride == 0 {
        return Err(Error::InvalidParameter("monitor_stride must be at least 1".into()));
    }
    if t_final < initial.t {
        return Err(Error::InvalidParameter(format!(
            "t_final = {t_final} precedes the state time {}",
            initial.t
        )));
    }
    let mut trajectory = Trajectory { samples: Vec::new(), failure: None };
    if t_final == initial.t {
        return Ok(trajectory);
    }

    let eps = params.eps;
    let one_d_undamped = initial.u.grid().dims() == 1 && eps == 0.0;
    let q0 = if one_d_undamped { invariants::q_invariant(&initial.u, 0.0).ok() } else { None };

    let push = |traj: &mut Trajectory, state: &FlowState| {
        let record = invariants::record(&state.u, state.t, eps, q0);
        traj.samples.push(TrajectorySample { state: state.clone(), record });
    };

    let mut state = initial.clone();
    push(&mut trajectory, &state);

    let t0 = initial.t;
    let mut steps_taken = 0u64;
    loop {
        let remaining = t_final - state.t;
        if remaining <= 0.0 {
            break;
        }
        let last = remaining <= params.dt;
        let dt_step = if last { remaining } else { params.dt };

        let stepped = match params.scheme {
            Scheme::Rk4Projected => step_rk4_signed(&state, params, dt_step),
            Scheme::ImplicitMidpoint => {
                step_midpoint_signed(&state, params, dt_step).map(|(s, _)| s)
            }
        };
        match stepped {
            Ok(mut new_state) => {
                steps_taken += 1;
                // Reconstruct time from the step index to avoid accumulating
                // rounding, and hit t_final exactly on the shortened step.
                new_state.t =
                    if last { t_final } else { t0 + steps_taken as f64 * params.dt };
                state = new_state;
                if state.step_count % monitor_stride as u64 == 0 || state.t == t_final {
                    push(&mut trajectory, &state);
                }
                if last {
                    break;
                }
            }
            Err(e) => {
                trajectory.failure = Some((state.t, e));
                break;
            }
        }
    }
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compat::{generate_initial_data, InitialDataSpec};
    use crate::invariants::dirichlet_energy;

    fn profile_state(n: usize, alpha: f64) -> FlowState {
        let grid = BoxGrid::new_1d(n).unwrap();
        let u = generate_initial_data(
            &InitialDataSpec::MirrorSymmetricProfile { amplitudes: vec![alpha] },
            &grid,
        )
        .unwrap();
        FlowState::initial(u)
    }

    fn constant_state(n: usize) -> FlowState {
        let grid = BoxGrid::new_1d(n).unwrap();
        let u = SphereField::from_fn(grid, |_| Vec3::new(0.0, 0.0, 1.0)).unwrap();
        FlowState::initial(u)
    }

    fn midpoint_params(dt: f64) -> FlowParams {
        let mut p = FlowParams::new(Scheme::ImplicitMidpoint, 0.0, dt);
        p.override_cfl = true;
        p
    }

    #[test]
    fn params_validation() {
        let grid = BoxGrid::new_1d(65).unwrap();
        let mut p = FlowParams::new(Scheme::Rk4Projected, 0.0, 1e-3);
        assert!(matches!(p.validate(&grid), Err(Error::CflViolation { .. })));
        p.override_cfl = true;
        assert!(p.validate(&grid).is_ok());

        p.dt = 0.2 * grid.min_spacing().powi(2);
        p.override_cfl = false;
        assert!(p.validate(&grid).is_ok());

        p.eps = 1.5;
        assert!(matches!(p.validate(&grid), Err(Error::EpsOutOfRange(_))));
        p.eps = 0.0;
        p.dt = -1.0;
        assert!(matches!(p.validate(&grid), Err(Error::NonPositiveDt(_))));
    }

    #[test]
    fn renormalize_policy_resolution() {
        let mut p = FlowParams::new(Scheme::ImplicitMidpoint, 0.0, 1e-4);
        assert!(!p.renormalize_each_step());
        p.eps = 0.1;
        assert!(p.renormalize_each_step());
        p.scheme = Scheme::Rk4Projected;
        p.eps = 0.0;
        assert!(p.renormalize_each_step());
        p.renormalize = RenormalizePolicy::Off;
        assert!(!p.renormalize_each_step());
    }

    #[test]
    fn constant_field_is_a_fixed_point_of_both_schemes() {
        let state = constant_state(33);
        let mut p = FlowParams::new(Scheme::Rk4Projected, 0.3, 1e-2);
        p.override_cfl = true;
        let next = step_rk4_projected(&state, &p).unwrap();
        assert_eq!(next.u.values(), state.u.values());

        let p = {
            let mut p = midpoint_params(1e-2);
            p.eps = 0.3;
            p
        };
        let (next, iters) = step_implicit_midpoint(&state, &p).unwrap();
        assert_eq!(next.u.values(), state.u.values());
        assert_eq!(iters, 1);
    }

    #[test]
    fn geodesic_is_near_stationary_for_rk4() {
        // The sampled geodesic is an exact discrete harmonic map away from
        // the boundary (u[j+1] + u[j-1] is exactly parallel to u[j]), so
        // deep-interior nodes do not move at all; only the Neumann defect at
        // the endpoints stirs a few boundary-adjacent nodes per step.
        let grid = BoxGrid::new_1d(129).unwrap();
        let omega = 1.9;
        let u = SphereField::from_fn(grid, |p| {
            Vec3::new((omega * p[0]).cos(), (omega * p[0]).sin(), 0.0)
        })
        .unwrap();
        let state = FlowState::initial(u);
        let mut p = FlowParams::new(Scheme::Rk4Projected, 0.0, 1e-5);
        p.override_cfl = true;
        let next = step_rk4_projected(&state, &p).unwrap();
        let interior_move = state.u.values()[6..123]
            .iter()
            .zip(&next.u.values()[6..123])
            .map(|(a, b)| (*a - *b).norm())
            .fold(0.0, f64::max);
        assert!(interior_move < 1e-12, "moved {interior_move}");
    }

    #[test]
    fn midpoint_conserves_norm_without_renormalization() {
        let state = profile_state(129, 0.5);
        let p = midpoint_params(1e-4);
        assert!(!p.renormalize_each_step());
        let (next, iters) = step_implicit_midpoint(&state, &p).unwrap();
        assert!(iters >= 2);
        let max_norm_change = state
            .u
            .values()
            .iter()
            .zip(next.u.values())
            .map(|(a, b)| (a.norm() - b.norm()).abs())
            .fold(0.0, f64::max);
        assert!(max_norm_change <= 10.0 * p.fp_tol, "norm change {max_norm_change}");
    }

    #[test]
    fn midpoint_step_is_time_reversible() {
        // Advancing dt then -dt returns the field to rounding: the midpoint
        // rule is symmetric.
        let state = profile_state(65, 0.5);
        let p = midpoint_params(1e-4);
        let (fwd, _) = step_midpoint_signed(&state, &p, p.dt).unwrap();
        let (back, _) = step_midpoint_signed(&fwd, &p, -p.dt).unwrap();
        let max_diff = state
            .u
            .values()
            .iter()
            .zip(back.u.values())
            .map(|(a, b)| (*a - *b).norm())
            .fold(0.0, f64::max);
        assert!(max_diff <= 100.0 * p.fp_tol, "round trip error {max_diff}");
    }

    #[test]
    fn cross_scheme_agreement_for_short_runs() {
        // Same spatial discretization: RK4 and midpoint differ only through
        // time error, dominated by the midpoint's O(dt^2).
        let state = profile_state(128, 0.5);
        let mut rk = FlowParams::new(Scheme::Rk4Projected, 0.0, 1e-5);
        rk.override_cfl = true;
        let mp = midpoint_params(1e-5);

        let t_final = 0.01; // 1000 steps
        let a = advance(&state, &rk, t_final, 1000).unwrap();
        let b = advance(&state, &mp, t_final, 1000).unwrap();
        assert!(a.succeeded() && b.succeeded());
        let d = a
            .final_state()
            .unwrap()
            .u
            .as_field()
            .l2_distance(b.final_state().unwrap().u.as_field())
            .unwrap();
        assert!(d < 1e-8, "schemes diverged: {d}");
    }

    #[test]
    fn advance_trivial_cases() {
        let state = constant_state(33);
        let p = midpoint_params(1e-3);

        // t_final equal to the state time: empty trajectory.
        let traj = advance(&state, &p, 0.0, 10).unwrap();
        assert!(traj.samples.is_empty());
        assert!(traj.succeeded());

        // Constant data: every record identical.
        let traj = advance(&state, &p, 0.05, 10).unwrap();
        assert!(traj.samples.len() > 2);
        let first = &traj.samples[0].record;
        for s in &traj.samples[1..] {
            assert_eq!(s.record.dirichlet_energy, first.dirichlet_energy);
            assert_eq!(s.record.sphere_violation, first.sphere_violation);
            assert_eq!(s.record.q_value, first.q_value);
        }
        // Exact landing on t_final.
        assert_eq!(traj.final_state().unwrap().t, 0.05);

        assert!(advance(&state, &p, -1.0, 10).is_err());
        assert!(advance(&state, &p, 1.0, 0).is_err());
    }

    #[test]
    fn damped_runs_dissipate_energy() {
        let state = profile_state(65, 0.5);
        let mut p = midpoint_params(5e-4);
        p.eps = 0.1;
        let traj = advance(&state, &p, 0.05, 10).unwrap();
        assert!(traj.succeeded());
        let energies: Vec<f64> = traj.records().map(|r| r.dirichlet_energy).collect();
        for w in energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "energy increased: {w:?}");
        }
        assert!(energies.last().unwrap() < &energies[0]);
    }

    #[test]
    fn trajectory_is_deterministic() {
        let state = profile_state(65, 0.5);
        let p = midpoint_params(1e-4);
        let a = advance(&state, &p, 0.01, 25).unwrap();
        let b = advance(&state, &p, 0.01, 25).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        for (x, y) in a.samples.iter().zip(b.samples.iter()) {
            assert_eq!(x.state.u.values(), y.state.u.values());
            assert_eq!(x.record, y.record);
        }
    }

    #[test]
    fn midpoint_diverges_gracefully_for_huge_dt() {
        let state = profile_state(65, 0.5);
        let mut p = midpoint_params(50.0);
        p.fp_max_iters = 30;
        let result = step_implicit_midpoint(&state, &p);
        assert!(
            matches!(
                result,
                Err(Error::FixedPointDiverged { .. }) | Err(Error::IntegrationBlowup { .. })
            ),
            "expected divergence, got {result:?}"
        );
    }

    #[test]
    fn rk4_blowup_is_detected() {
        let state = profile_state(33, 0.5);
        let mut p = FlowParams::new(Scheme::Rk4Projected, 0.0, 1e308);
        p.override_cfl = true;
        assert!(matches!(
            step_rk4_projected(&state, &p),
            Err(Error::IntegrationBlowup { .. })
        ));
    }

    #[test]
    fn advance_reports_partial_trajectory_on_failure() {
        let state = profile_state(33, 0.5);
        let mut p = midpoint_params(10.0);
        p.fp_max_iters = 10;
        let traj = advance(&state, &p, 100.0, 1).unwrap();
        assert!(!traj.succeeded());
        assert!(!traj.samples.is_empty());
    }

    #[test]
    fn midpoint_2d_plain_sweep_converges_under_cfl() {
        let grid = BoxGrid::new_uniform(2, 17).unwrap();
        let u = generate_initial_data(
            &InitialDataSpec::ConstantNearBoundary {
                amplitude: 0.6,
                mode_count: 1,
                blend_width: 0.2,
            },
            &grid,
        )
        .unwrap();
        let state = FlowState::initial(u);
        let h = grid.min_spacing();
        let mut p = FlowParams::new(Scheme::ImplicitMidpoint, 0.1, 0.2 * h * h);
        p.renormalize = RenormalizePolicy::Auto;
        let traj = advance(&state, &p, 40.0 * p.dt, 10).unwrap();
        assert!(traj.succeeded(), "{:?}", traj.failure);
        let e: Vec<f64> = traj.records().map(|r| r.dirichlet_energy).collect();
        assert!(e.last().unwrap() <= &(e[0] + 1e-12));
    }

    #[test]
    fn midpoint_energy_drift_shrinks_under_joint_refinement() {
        // Refining (h, dt) -> (h/2, dt/4) together shrinks the relative
        // Dirichlet-energy drift at second order.
        let mut drifts = Vec::new();
        for &(n, dt) in &[(65usize, 8e-4), (129, 2e-4)] {
            let state = profile_state(n, 0.5);
            let p = midpoint_params(dt);
            let traj = advance(&state, &p, 0.2, 50).unwrap();
            assert!(traj.succeeded());
            let e0 = traj.samples[0].record.dirichlet_energy;
            let drift = traj
                .records()
                .map(|r| (r.dirichlet_energy - e0).abs())
                .fold(0.0, f64::max)
                / e0.max(1e-12);
            drifts.push(drift);
        }
        assert!(
            drifts[0] / drifts[1] >= 3.0,
            "drift refinement factor {:.2} from {drifts:?}",
            drifts[0] / drifts[1]
        );
    }
}
