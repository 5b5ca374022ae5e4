//! Paper-level numerical studies: the vanishing-viscosity sweep, mesh
//! convergence, the long-time 1-d boundedness run, and perturbation
//! stability.

use crate::compat::{check_cc0, check_cc_tilde, generate_initial_data, CompatReport, InitialDataSpec};
use crate::error::{Error, Result};
use crate::geometry::SphereField;
use crate::grid::{BoxGrid, VectorField};
use crate::integrators::{advance, FlowParams, FlowState, Trajectory};
use crate::invariants;
use crate::vec3::Vec3;

/// Constant in the long-run boundedness verdict
/// `sup_t (|u_xx|^2 + |u_t|^2) <= C (||u0||_H1^2 + 1)^3 + |tau(u0)|^2`.
/// Calibrated once on the reference datum (th = 0.5 cos(pi x), N = 512,
/// dt = 2.5e-5, T = 10), where the observed sup-ratio was 0.4287; frozen at
/// twice that.
pub const GLOBAL_BOUND_C: f64 = 0.86;

/// Drifts are reported relative to `max(|initial|, DRIFT_FLOOR)` so they
/// stay well defined for zero-energy data.
pub const DRIFT_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SweepPlan {
    /// Damping values to compare, sorted descending, with 0 as reference.
    pub eps_list: Vec<f64>,
    pub grid: BoxGrid,
    pub initial_data: InitialDataSpec,
    /// Shared integrator settings; `eps` is overridden per run.
    pub params: FlowParams,
    pub t_final: f64,
    pub monitor_stride: usize,
}

impl SweepPlan {
    fn validate(&self) -> Result<()> {
        if self.eps_list.is_empty() {
            return Err(Error::InvalidParameter("eps_list must not be empty".into()));
        }
        if !self.eps_list.windows(2).all(|w| w[0] > w[1]) {
            return Err(Error::InvalidParameter(
                "eps_list must be sorted strictly descending".into(),
            ));
        }
        if self.eps_list.last() != Some(&0.0) {
            return Err(Error::InvalidParameter(
                "eps_list must contain 0 as the reference entry".into(),
            ));
        }
        if self.eps_list.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::EpsOutOfRange(*self.eps_list.first().unwrap()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct EpsRun {
    pub eps: f64,
    pub trajectory: Trajectory,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    /// One run per eps, in plan order; possibly truncated after a failure.
    pub runs: Vec<EpsRun>,
    /// `(eps, L2 distance of the final field to the eps = 0 reference)`.
    pub distances: Vec<(f64, f64)>,
    /// Observed order between consecutive nonzero eps entries:
    /// `log(d_i / d_{i+1}) / log(eps_i / eps_{i+1})`.
    pub orders: Vec<f64>,
    pub failure: Option<(f64, f64, Error)>,
}

/// Run the flow once per damping value on identical grid, step size, datum,
/// and final time, and measure the distance of each damped final field to
/// the undamped reference. A run failure aborts the sweep and leaves the
/// completed runs in place.
pub fn viscosity_sweep(plan: &SweepPlan) -> Result<SweepResult> {
    plan.validate()?;
    let u0 = generate_initial_data(&plan.initial_data, &plan.grid)?;

    let mut result = SweepResult {
        runs: Vec::new(),
        distances: Vec::new(),
        orders: Vec::new(),
        failure: None,
    };

    let run_one = |eps: f64| -> Result<Trajectory> {
        let mut params = plan.params.clone();
        params.eps = eps;
        advance(&FlowState::initial(u0.clone()), &params, plan.t_final, plan.monitor_stride)
    };

    // The eps = 0 reference runs first so distances can be attached even to
    // a partially failed sweep.
    let reference = run_one(0.0)?;
    if let Some((t, e)) = &reference.failure {
        let failure = (0.0, *t, e.clone());
        result.runs.push(EpsRun { eps: 0.0, trajectory: reference });
        result.failure = Some(failure);
        return Ok(result);
    }
    let reference_final = reference.final_state().unwrap().u.as_field().clone();

    for &eps in &plan.eps_list {
        let trajectory = if eps == 0.0 { reference.clone() } else { run_one(eps)? };
        if let Some((t, e)) = &trajectory.failure {
            let failure = (eps, *t, e.clone());
            result.runs.push(EpsRun { eps, trajectory });
            result.failure = Some(failure);
            return Ok(result);
        }
        let d = trajectory
            .final_state()
            .unwrap()
            .u
            .as_field()
            .l2_distance(&reference_final)?;
        result.distances.push((eps, d));
        result.runs.push(EpsRun { eps, trajectory });
    }

    let nonzero: Vec<(f64, f64)> =
        result.distances.iter().filter(|(e, _)| *e > 0.0).cloned().collect();
    for w in nonzero.windows(2) {
        let (e0, d0) = w[0];
        let (e1, d1) = w[1];
        result.orders.push((d0 / d1).ln() / (e0 / e1).ln());
    }
    Ok(result)
}

#[derive(Clone, Debug)]
pub struct MeshConvergencePlan {
    /// Grid sizes from coarse to fine.
    pub n_list: Vec<usize>,
    /// Fine reference grid for the final-field error.
    pub reference_n: usize,
    /// Step size rule `dt = dt_factor * h^2`.
    pub dt_factor: f64,
    pub eps: f64,
    pub initial_data: InitialDataSpec,
    pub t_final: f64,
    pub params: FlowParams,
    pub monitor_stride: usize,
}

#[derive(Clone, Debug)]
pub struct MeshLevel {
    pub n: usize,
    pub dt: f64,
    pub field_error: f64,
    pub energy_drift: f64,
    pub q_drift: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct MeshConvergenceResult {
    pub levels: Vec<MeshLevel>,
    /// Pairwise observed orders; `None` when the errors sit at the rounding
    /// floor and no order is defined.
    pub field_orders: Vec<Option<f64>>,
    pub energy_drift_orders: Vec<Option<f64>>,
    pub q_drift_orders: Vec<Option<f64>>,
    pub failure: Option<(usize, f64, Error)>,
}

fn pairwise_orders(levels: &[(f64, f64)]) -> Vec<Option<f64>> {
    // (h, error) pairs, coarse to fine.
    levels
        .windows(2)
        .map(|w| {
            let (h0, e0) = w[0];
            let (h1, e1) = w[1];
            if e0 < 1e-13 || e1 < 1e-13 {
                None
            } else {
                Some((e0 / e1).ln() / (h0 / h1).ln())
            }
        })
        .collect()
}

/// Richardson-style convergence study over a list of 1-d grids: final-field
/// error against a fine-grid reference (cubic interpolation bridges the
/// non-nested node sets) and relative invariant drifts per level.
pub fn mesh_convergence(plan: &MeshConvergencePlan) -> Result<MeshConvergenceResult> {
    if plan.n_list.is_empty() {
        return Err(Error::InvalidParameter("n_list must not be empty".into()));
    }
    if plan.n_list.iter().any(|&n| n >= plan.reference_n) {
        return Err(Error::InvalidParameter(
            "reference_n must exceed every entry of n_list".into(),
        ));
    }

    let run_level = |n: usize| -> Result<(Trajectory, f64)> {
        let grid = BoxGrid::new_1d(n)?;
        let u0 = generate_initial_data(&plan.initial_data, &grid)?;
        let h = grid.spacing(0);
        let dt = plan.dt_factor * h * h;
        let mut params = plan.params.clone();
        params.eps = plan.eps;
        params.dt = dt;
        let traj = advance(&FlowState::initial(u0), &params, plan.t_final, plan.monitor_stride)?;
        Ok((traj, dt))
    };

    let (reference_traj, _) = run_level(plan.reference_n)?;
    if let Some((t, e)) = reference_traj.failure {
        return Ok(MeshConvergenceResult {
            levels: Vec::new(),
            field_orders: Vec::new(),
            energy_drift_orders: Vec::new(),
            q_drift_orders: Vec::new(),
            failure: Some((plan.reference_n, t, e)),
        });
    }
    let reference_final = reference_traj.final_state().unwrap().u.as_field().clone();

    let mut result = MeshConvergenceResult {
        levels: Vec::new(),
        field_orders: Vec::new(),
        energy_drift_orders: Vec::new(),
        q_drift_orders: Vec::new(),
        failure: None,
    };

    for &n in &plan.n_list {
        let (traj, dt) = run_level(n)?;
        if let Some((t, e)) = traj.failure {
            result.failure = Some((n, t, e));
            return Ok(result);
        }
        let grid = *traj.final_state().unwrap().u.grid();
        let restricted = interpolate_to_grid_1d(&reference_final, &grid)?;
        let field_error =
            traj.final_state().unwrap().u.as_field().l2_distance(&restricted)?;

        let first = &traj.samples[0].record;
        let relative = |a: f64, b: f64| (a - b).abs() / b.abs().max(DRIFT_FLOOR);
        let energy_drift = traj
            .records()
            .map(|r| relative(r.dirichlet_energy, first.dirichlet_energy))
            .fold(0.0, f64::max);
        let q_drift = first.q_value.map(|q0| {
            traj.records()
                .map(|r| relative(r.q_value.unwrap_or(q0), q0))
                .fold(0.0, f64::max)
        });
        result.levels.push(MeshLevel { n, dt, field_error, energy_drift, q_drift });
    }

    let hs: Vec<f64> = result.levels.iter().map(|l| 1.0 / (l.n - 1) as f64).collect();
    let with_h = |f: &dyn Fn(&MeshLevel) -> f64| -> Vec<(f64, f64)> {
        hs.iter().cloned().zip(result.levels.iter().map(|l| f(l))).collect()
    };
    result.field_orders = pairwise_orders(&with_h(&|l| l.field_error));
    result.energy_drift_orders = pairwise_orders(&with_h(&|l| l.energy_drift));
    if result.levels.iter().all(|l| l.q_drift.is_some()) {
        result.q_drift_orders = pairwise_orders(&with_h(&|l| l.q_drift.unwrap()));
    }
    Ok(result)
}

/// Cubic Lagrange interpolation of a 1-d field onto another 1-d grid.
/// The two node families are generally not nested; the O(h_ref^4)
/// interpolation error is negligible against the O(h^2) fields compared.
fn interpolate_to_grid_1d(field: &VectorField, target: &BoxGrid) -> Result<VectorField> {
    let source = field.grid();
    if source.dims() != 1 || target.dims() != 1 {
        return Err(Error::RequiresOneDim(source.dims().max(target.dims())));
    }
    let n_src = source.nodes(0);
    let h_src = source.spacing(0);
    let values = (0..target.nodes(0))
        .map(|i| {
            let x = i as f64 * target.spacing(0);
            let t = x / h_src;
            let j0 = ((t.floor() as isize) - 1).clamp(0, n_src as isize - 4) as usize;
            let mut acc = Vec3::ZERO;
            for a in 0..4 {
                let ja = j0 + a;
                let mut w = 1.0;
                for b in 0..4 {
                    if a != b {
                        let jb = j0 + b;
                        w *= (t - jb as f64) / (ja as f64 - jb as f64);
                    }
                }
                acc += field.values()[ja] * w;
            }
            acc
        })
        .collect();
    Ok(VectorField::new(*target, values).expect("sized by construction"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Copy, Debug)]
pub struct NormSample {
    pub t: f64,
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
    /// integral |u x Lap u|^2, the squared time-derivative magnitude.
    pub ut_l2_sq: f64,
    /// integral |Lap u|^2.
    pub uxx_l2_sq: f64,
}

#[derive(Clone, Debug)]
pub struct GlobalRunReport {
    pub history: Vec<NormSample>,
    pub verdict: Verdict,
    /// sup over samples of (|u_xx|^2 + |u_t|^2).
    pub sup_value: f64,
    /// The frozen boundedness budget for this datum.
    pub bound: f64,
    pub trajectory_failure: Option<(f64, Error)>,
}

/// Long-time 1-d undamped run recording Sobolev seminorms and the
/// H^2-identity quantities; PASS when `sup_t (|u_xx|^2 + |u_t|^2)` stays
/// within the frozen budget `C (||u0||_H1^2 + 1)^3 + |tau(u0)|^2`.
///
/// Requires an undamped 1-d configuration and a datum passing the order-2
/// intrinsic ladder; a blowup or budget violation yields FAIL.
pub fn global_existence_proxy(
    u0: &SphereField,
    params: &FlowParams,
    t_long: f64,
    record_stride: usize,
) -> Result<GlobalRunReport> {
    if u0.grid().dims() != 1 {
        return Err(Error::RequiresOneDim(u0.grid().dims()));
    }
    if params.eps != 0.0 {
        return Err(Error::RequiresZeroEps(params.eps));
    }
    let ladder = check_cc_tilde(u0, 2)?;
    if !ladder.pass {
        return Err(Error::InvalidParameter(format!(
            "initial datum fails the order-2 compatibility ladder:\n{}",
            ladder.summary()
        )));
    }

    let h1_sq = {
        let l2 = u0.as_field().norm_sq_field().integrate();
        let grad = u0.as_field().gradient_norm_sq().integrate();
        l2 + grad
    };
    let tau0 = crate::geometry::tension_field(u0);
    let tau0_sq = tau0.as_field().norm_sq_field().integrate();
    let bound = GLOBAL_BOUND_C * (h1_sq + 1.0).powi(3) + tau0_sq;

    let traj = advance(&FlowState::initial(u0.clone()), params, t_long, record_stride)?;

    let mut history = Vec::with_capacity(traj.samples.len());
    let mut sup_value = 0.0f64;
    for sample in &traj.samples {
        let u = &sample.state.u;
        let lap = u.as_field().laplacian_neumann();
        let uxx_l2_sq = lap.norm_sq_field().integrate();
        let rhs = crate::geometry::schrodinger_rhs(u);
        let ut_l2_sq = rhs.as_field().norm_sq_field().integrate();
        sup_value = sup_value.max(uxx_l2_sq + ut_l2_sq);
        history.push(NormSample {
            t: sample.state.t,
            h1: sample.record.sobolev[0],
            h2: sample.record.sobolev[1],
            h3: sample.record.sobolev[2],
            ut_l2_sq,
            uxx_l2_sq,
        });
    }

    let verdict = if traj.failure.is_none() && sup_value <= bound {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(GlobalRunReport {
        history,
        verdict,
        sup_value,
        bound,
        trajectory_failure: traj.failure,
    })
}

/// Shape of the applied perturbation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerturbationKind {
    /// Tangent bump vanishing to all orders at the boundary; preserves the
    /// compatibility of the datum.
    TangentBump,
    /// Tangent field with an O(1) boundary slope; deliberately violates the
    /// Neumann condition to exercise the warning path.
    BoundarySlope,
}

#[derive(Clone, Debug)]
pub struct PerturbationReport {
    /// L2 norm of the applied perturbation (before renormalization).
    pub delta_l2: f64,
    /// `(t, ||u(t; u0) - u(t; u0+delta)||_L2 / ||delta||_L2)` per requested time.
    pub samples: Vec<(f64, f64)>,
    /// Set when delta = 0: the trajectories coincide and no ratio is defined.
    pub identical: bool,
    /// Neumann check of the perturbed datum.
    pub perturbed_cc0: CompatReport,
    pub warning: Option<String>,
    pub perturbed_boundary_flux: f64,
}

/// Growth of a small tangent perturbation under the flow: both data evolve
/// with identical parameters and the L2 separation is reported relative to
/// the perturbation size at each requested time.
pub fn perturbation_stability(
    u0: &SphereField,
    params: &FlowParams,
    delta: f64,
    kind: PerturbationKind,
    times: &[f64],
    monitor_stride: usize,
) -> Result<PerturbationReport> {
    if delta < 0.0 || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("delta must be finite and >= 0, got {delta}")));
    }
    let grid = *u0.grid();

    // Unit-L2 tangent direction field.
    let e1 = Vec3::new(1.0, 0.0, 0.0);
    let shape = |p: [f64; 3]| -> f64 {
        match kind {
            PerturbationKind::TangentBump => bump_profile(p[0]),
            PerturbationKind::BoundarySlope => p[0],
        }
    };
    let direction_values: Vec<Vec3> = (0..grid.node_count())
        .map(|i| {
            let u = u0.values()[i];
            let tangent = e1 - u * e1.dot(u);
            let p = grid.position(grid.coords(i));
            tangent * shape(p)
        })
        .collect();
    let direction = VectorField::new(grid, direction_values).expect("same length");
    let dir_norm = direction.l2_norm();
    if dir_norm < 1e-14 {
        return Err(Error::InvalidParameter(
            "perturbation direction vanishes on this datum".into(),
        ));
    }
    let scale = delta / dir_norm;
    let perturbed_values: Vec<Vec3> = u0
        .values()
        .iter()
        .zip(direction.values().iter())
        .map(|(u, d)| (*u + *d * scale).normalized())
        .collect();
    let perturbed =
        SphereField::new(VectorField::new(grid, perturbed_values).expect("same length"))?;

    let delta_l2 = perturbed.as_field().l2_distance(u0.as_field())?;
    let perturbed_cc0 = check_cc0(&perturbed);
    let perturbed_boundary_flux = invariants::boundary_flux_max(&perturbed);
    let warning = if delta > 0.0 && !perturbed_cc0.pass {
        Some(format!(
            "perturbed datum violates the Neumann condition (max residual {:.3e}); \
             proceeding anyway",
            perturbed_cc0.max_residual()
        ))
    } else {
        None
    };

    if delta == 0.0 {
        return Ok(PerturbationReport {
            delta_l2: 0.0,
            samples: Vec::new(),
            identical: true,
            perturbed_cc0,
            warning,
            perturbed_boundary_flux,
        });
    }

    let mut samples = Vec::with_capacity(times.len());
    for &t in times {
        let a = advance(&FlowState::initial(u0.clone()), params, t, monitor_stride)?;
        let b = advance(&FlowState::initial(perturbed.clone()), params, t, monitor_stride)?;
        if let Some((tf, e)) = a.failure.as_ref().or(b.failure.as_ref()) {
            return Err(Error::InvalidParameter(format!(
                "perturbation run failed at t = {tf}: {e}"
            )));
        }
        let d = a
            .final_state()
            .unwrap()
            .u
            .as_field()
            .l2_distance(b.final_state().unwrap().u.as_field())?;
        samples.push((t, d / delta_l2));
    }

    Ok(PerturbationReport {
        delta_l2,
        samples,
        identical: false,
        perturbed_cc0,
        warning,
        perturbed_boundary_flux,
    })
}

// Smooth bump, zero to all orders within 0.2 of either endpoint.
fn bump_profile(x: f64) -> f64 {
    fn step(t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t >= 1.0 {
            1.0
        } else {
            let a = (-1.0 / t).exp();
            let b = (-1.0 / (1.0 - t)).exp();
            a / (a + b)
        }
    }
    let w = 0.2;
    step((x - w) / w) * step((1.0 - x - w) / w)
}
