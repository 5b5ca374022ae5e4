//! Executable boundary-compatibility checkers for initial data, the first
//! two time-derivative fields of the flow, and generators of admissible
//! initial data.
//!
//! Residuals of the checked quantities are pure truncation error on
//! admissible data, so pass tolerances scale like `c0 h^2`, relaxed by a
//! factor of `1/h` per extra derivative in the checked quantity. Checks are
//! ordered fail-fast: higher conditions are meaningless when the plain
//! Neumann condition already fails.

use crate::error::{Error, Result};
use crate::geometry::{llg_rhs, tension_field, SphereField};
use crate::grid::{BoxGrid, Parity, VectorField, DERIVATIVE_CAP};
use crate::vec3::Vec3;

/// Default scale factor in the pass tolerance `c0 h^2`.
pub const DEFAULT_COMPAT_C0: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompatCondition {
    /// Vanishing outward normal derivative of the data itself.
    Cc0,
    /// Order-1 intrinsic condition: the normal covariant derivative of the
    /// tension field also vanishes. Independent of the damping parameter by
    /// construction (the check takes none).
    Cc1Intrinsic,
    /// Strong extrinsic condition of order k: normal boundary data of the
    /// even-order partial derivative blocks vanish.
    CcStrong(usize),
    /// 1-d intrinsic ladder of order k: odd covariant derivatives of the
    /// data vanish at the endpoints.
    CcTilde(usize),
}

impl std::fmt::Display for CompatCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CompatCondition::Cc0 => write!(f, "CC0"),
            CompatCondition::Cc1Intrinsic => write!(f, "CC1-intrinsic"),
            CompatCondition::CcStrong(k) => write!(f, "CC-strong({k})"),
            CompatCondition::CcTilde(k) => write!(f, "CC-tilde({k})"),
        }
    }
}

/// Residuals of one derivative level of a condition.
#[derive(Clone, Debug)]
pub struct CompatLevel {
    /// Condition-specific level index (see each checker's doc).
    pub level: usize,
    /// (boundary node index, residual magnitude) pairs.
    pub residuals: Vec<(usize, f64)>,
    pub tolerance: f64,
    pub pass: bool,
}

impl CompatLevel {
    fn from_residuals(level: usize, residuals: Vec<(usize, f64)>, tolerance: f64) -> Self {
        let max = residuals.iter().map(|(_, r)| *r).fold(0.0, f64::max);
        CompatLevel { level, residuals, tolerance, pass: max <= tolerance }
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|(_, r)| *r).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct CompatReport {
    pub condition: CompatCondition,
    pub levels: Vec<CompatLevel>,
    pub pass: bool,
    /// Set when a lower-order condition already failed and the check
    /// stopped early.
    pub failed_prerequisite: Option<CompatCondition>,
    /// The `c0` used for tolerances.
    pub c0: f64,
}

impl CompatReport {
    fn from_levels(condition: CompatCondition, levels: Vec<CompatLevel>, c0: f64) -> Self {
        let pass = levels.iter().all(|l| l.pass);
        CompatReport { condition, levels, pass, failed_prerequisite: None, c0 }
    }

    fn prerequisite_failure(condition: CompatCondition, failed: CompatCondition, c0: f64) -> Self {
        CompatReport {
            condition,
            levels: Vec::new(),
            pass: false,
            failed_prerequisite: Some(failed),
            c0,
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.levels.iter().map(|l| l.max_residual()).fold(0.0, f64::max)
    }

    pub fn summary(&self) -> String {
        let mut out = format!(
            "{}: {}",
            self.condition,
            if self.pass { "PASS" } else { "FAIL" }
        );
        if let Some(pre) = self.failed_prerequisite {
            out.push_str(&format!(" (prerequisite {pre} failed)"));
        }
        for level in &self.levels {
            out.push_str(&format!(
                "\n  level {}: max residual {:.3e} (tolerance {:.3e}) {}",
                level.level,
                level.max_residual(),
                level.tolerance,
                if level.pass { "ok" } else { "FAIL" }
            ));
        }
        out
    }
}

fn tol_scale(grid: &BoxGrid) -> f64 {
    let h = (0..grid.dims()).map(|a| grid.spacing(a)).fold(0.0, f64::max);
    h * h
}

/// CC0: outward normal derivative of the data vanishes on the boundary,
/// measured with the order-2 one-sided stencil at tolerance `c0 h^2`.
pub fn check_cc0(u0: &SphereField) -> CompatReport {
    check_cc0_with(u0, DEFAULT_COMPAT_C0)
}

pub fn check_cc0_with(u0: &SphereField, c0: f64) -> CompatReport {
    let bn = u0
        .as_field()
        .boundary_normal_derivative(2)
        .expect("grid guarantees stencil fit");
    let level = CompatLevel::from_residuals(0, bn.node_magnitudes(), c0 * tol_scale(u0.grid()));
    CompatReport::from_levels(CompatCondition::Cc0, vec![level], c0)
}

/// Order-1 intrinsic condition: CC0 plus vanishing normal covariant
/// derivative of the tension field. Fails fast citing CC0 when the data is
/// not even Neumann-admissible.
pub fn check_cc1_intrinsic(u0: &SphereField) -> CompatReport {
    check_cc1_intrinsic_with(u0, DEFAULT_COMPAT_C0)
}

pub fn check_cc1_intrinsic_with(u0: &SphereField, c0: f64) -> CompatReport {
    let cc0 = check_cc0_with(u0, c0);
    if !cc0.pass {
        return CompatReport::prerequisite_failure(
            CompatCondition::Cc1Intrinsic,
            CompatCondition::Cc0,
            c0,
        );
    }
    let tau = tension_field(u0);
    let bn = tau
        .as_field()
        .boundary_normal_derivative(2)
        .expect("grid guarantees stencil fit");
    // Project the ambient normal derivative onto the tangent plane at each
    // boundary node: the intrinsic quantity is P(u) d_nu tau.
    let mut residuals = Vec::new();
    for face in &bn.faces {
        for (idx, val) in face.node_indices.iter().zip(face.values.iter()) {
            let u = u0.values()[*idx];
            let projected = *val - u * val.dot(u);
            residuals.push((*idx, projected.norm()));
        }
    }
    let level = CompatLevel::from_residuals(1, residuals, c0 * tol_scale(u0.grid()));
    let mut report = CompatReport::from_levels(CompatCondition::Cc1Intrinsic, vec![level], c0);
    report.levels.insert(0, cc0.levels[0].clone());
    report.pass = report.levels.iter().all(|l| l.pass);
    report
}

fn multi_indices(dims: usize, total: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a0 in 0..=total {
        for a1 in 0..=(total - a0) {
            let a2 = total - a0 - a1;
            let alpha = [a0, a1, a2];
            if alpha.iter().enumerate().all(|(axis, &o)| o == 0 || axis < dims) {
                out.push(alpha);
            }
        }
    }
    out
}

fn axes_of(alpha: [usize; 3]) -> Vec<usize> {
    let mut axes = Vec::new();
    for (axis, &count) in alpha.iter().enumerate() {
        axes.extend(std::iter::repeat(axis).take(count));
    }
    axes
}

/// Strong extrinsic condition of order k: for every even partial-derivative
/// order j in {2, 4, ..., 2k}, the outward normal derivative of every j-th
/// mixed partial of the data vanishes on the boundary.
///
/// Levels are indexed by j with tolerance `c0 h^2 h^-(j-1)`; each extra
/// derivative trades one power of h of accuracy. The even-order blocks are
/// exactly the damping-independent family: together with CC0 they make all
/// odd-order ambient normal data vanish, which is what mirror-extendable
/// data satisfies.
pub fn check_cc_strong(u0: &SphereField, k: usize) -> Result<CompatReport> {
    check_cc_strong_with(u0, k, DEFAULT_COMPAT_C0)
}

pub fn check_cc_strong_with(u0: &SphereField, k: usize, c0: f64) -> Result<CompatReport> {
    // Normal derivative of a 2k-th partial needs 2k+1 nested derivatives.
    if 2 * k + 1 > DERIVATIVE_CAP {
        return Err(Error::DerivativeCapExceeded { requested: 2 * k + 1, cap: DERIVATIVE_CAP });
    }
    let cc0 = check_cc0_with(u0, c0);
    if !cc0.pass {
        return Ok(CompatReport::prerequisite_failure(
            CompatCondition::CcStrong(k),
            CompatCondition::Cc0,
            c0,
        ));
    }
    let grid = u0.grid();
    let h = (0..grid.dims()).map(|a| grid.spacing(a)).fold(0.0, f64::max);
    let mut levels = vec![cc0.levels[0].clone()];
    for j in (2..=2 * k).step_by(2) {
        // Residual per boundary node: worst case over all j-th partials.
        let mut worst: Vec<(usize, f64)> = Vec::new();
        for alpha in multi_indices(grid.dims(), j) {
            let d = u0.as_field().derivative_chain(&axes_of(alpha))?;
            let bn = d.boundary_normal_derivative(2)?;
            let mags = bn.node_magnitudes();
            if worst.is_empty() {
                worst = mags;
            } else {
                for (slot, (_, m)) in worst.iter_mut().zip(mags.iter()) {
                    slot.1 = slot.1.max(*m);
                }
            }
        }
        let tolerance = c0 * h * h * h.powi(-(j as i32 - 1));
        levels.push(CompatLevel::from_residuals(j, worst, tolerance));
    }
    Ok(CompatReport::from_levels(CompatCondition::CcStrong(k), levels, c0))
}

/// 1-d intrinsic ladder of order k: the odd covariant derivatives
/// `cd^(2j+1) u0` vanish at both endpoints for j = 0..k.
///
/// The ladder recurses through the projection form of the covariant
/// derivative using mirror ghosts whose parity alternates with the rung
/// (the extension of `u0` is even, of its derivative odd, and so on), which
/// keeps the truncation error smooth in space; one-sided stencils inside
/// the recursion would seed boundary kinks that amplify by 1/h per rung.
/// The checked endpoint values are then produced by quadratic one-sided
/// extrapolation from interior nodes, so no symmetry assumption enters the
/// verdict. Level j has tolerance `c0 h^2 h^-(2j)`, two derivatives per
/// rung.
pub fn check_cc_tilde(u0: &SphereField, k: usize) -> Result<CompatReport> {
    check_cc_tilde_with(u0, k, DEFAULT_COMPAT_C0)
}

pub fn check_cc_tilde_with(u0: &SphereField, k: usize, c0: f64) -> Result<CompatReport> {
    let grid = u0.grid();
    if grid.dims() != 1 {
        return Err(Error::RequiresOneDim(grid.dims()));
    }
    if 2 * k + 1 > DERIVATIVE_CAP {
        return Err(Error::DerivativeCapExceeded { requested: 2 * k + 1, cap: DERIVATIVE_CAP });
    }
    let h = grid.spacing(0);
    let n = grid.nodes(0);
    if n < 5 {
        return Err(Error::StencilDoesNotFit { order: 2, needed: 5, got: n });
    }

    let project = |field: VectorField| -> VectorField {
        let values = u0
            .values()
            .iter()
            .zip(field.values().iter())
            .map(|(u, w)| *w - *u * w.dot(*u))
            .collect();
        VectorField::new(*grid, values).expect("same length")
    };
    // Quadratic extrapolation to the endpoints from the three adjacent
    // interior nodes.
    let endpoint_values = |field: &VectorField| -> [(usize, f64); 2] {
        let v = field.values();
        let lo = v[1] * 3.0 - v[2] * 3.0 + v[3];
        let hi = v[n - 2] * 3.0 - v[n - 3] * 3.0 + v[n - 4];
        [(0, lo.norm()), (n - 1, hi.norm())]
    };

    let mut ladder = project(u0.as_field().derivative_with_parity(0, Parity::Even)?);
    let mut rung = 1usize;
    let mut levels = Vec::new();
    for j in 0..=k {
        // ladder currently holds cd^(2j+1) u0.
        let residuals = endpoint_values(&ladder).to_vec();
        let tolerance = c0 * h * h * h.powi(-2 * j as i32);
        levels.push(CompatLevel::from_residuals(j, residuals, tolerance));
        if j < k {
            for _ in 0..2 {
                let parity = if rung % 2 == 1 { Parity::Odd } else { Parity::Even };
                ladder = project(ladder.derivative_with_parity(0, parity)?);
                rung += 1;
            }
        }
    }
    Ok(CompatReport::from_levels(CompatCondition::CcTilde(k), levels, c0))
}

#[derive(Clone, Debug)]
pub struct ImplicationReport {
    pub strong: CompatReport,
    pub tilde: CompatReport,
    /// Whether "strong pass implies ladder pass" held on this field.
    pub holds: bool,
}

/// Checks that the strong condition implies the 1-d intrinsic ladder on the
/// given field at consistent tolerances. A violation indicates a checker
/// defect, not a property of the data.
pub fn implication_check(u0: &SphereField, k: usize) -> Result<ImplicationReport> {
    let strong = check_cc_strong(u0, k)?;
    let tilde = check_cc_tilde(u0, k)?;
    let holds = !strong.pass || tilde.pass;
    Ok(ImplicationReport { strong, tilde, holds })
}

/// First formal time derivative of the flow at t = 0:
/// `V1 = eps tau(u0) + u0 x Lap u0`. At eps = 0 this is exactly the
/// undamped right-hand side.
pub fn compute_v1(u0: &SphereField, eps: f64) -> Result<VectorField> {
    Ok(llg_rhs(u0, eps)?.into_field())
}

/// Second formal time derivative at t = 0, obtained by differentiating the
/// flow in time and substituting V1:
///
/// `V2 = eps (Lap V1 + 2 <grad V1, grad u0> u0 + |grad u0|^2 V1)
///       + V1 x Lap u0 + u0 x Lap V1`
///
/// with every operator in its discrete Neumann form.
pub fn compute_v2(u0: &SphereField, eps: f64) -> Result<VectorField> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::EpsOutOfRange(eps));
    }
    let grid = *u0.grid();
    let v1 = compute_v1(u0, eps)?;
    let lap_v1 = v1.laplacian_neumann();
    let lap_u = u0.as_field().laplacian_neumann();

    let grads_v1 = v1.gradient_neumann();
    let grads_u = u0.as_field().gradient_neumann();
    let mut grad_inner = vec![0.0; grid.node_count()];
    for (gv, gu) in grads_v1.iter().zip(grads_u.iter()) {
        for (acc, (a, b)) in grad_inner.iter_mut().zip(gv.values().iter().zip(gu.values())) {
            *acc += a.dot(*b);
        }
    }
    let gsq_u = u0.as_field().gradient_norm_sq();

    let values: Vec<Vec3> = (0..grid.node_count())
        .map(|i| {
            let u = u0.values()[i];
            let v = v1.values()[i];
            let parabolic = lap_v1.values()[i] + u * (2.0 * grad_inner[i]) + v * gsq_u.values()[i];
            parabolic * eps + v.cross(lap_u.values()[i]) + u.cross(lap_v1.values()[i])
        })
        .collect();
    Ok(VectorField::new(grid, values).expect("same length"))
}

/// Families of admissible initial data. Both construct exactly unit-length
/// fields from angle formulas.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialDataSpec {
    /// `u0 = (sin phi, 0, cos phi)` with `phi` a smooth bump that vanishes
    /// to all orders within `blend_width` of the boundary, optionally
    /// modulated by `cos(mode_count pi x)` per axis. Constant near the
    /// boundary, so it satisfies every compatibility order exactly.
    ConstantNearBoundary { amplitude: f64, mode_count: u32, blend_width: f64 },
    /// 1-d profile `u0 = (sin th, 0, cos th)` with
    /// `th(x) = sum_n amplitudes[n-1] cos(n pi x)`; even-extendable across
    /// both endpoints.
    MirrorSymmetricProfile { amplitudes: Vec<f64> },
}

impl InitialDataSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitialDataSpec::ConstantNearBoundary { amplitude, blend_width, .. } => {
                if !amplitude.is_finite() {
                    return Err(Error::InvalidParameter(
                        "initial-data amplitude must be finite".into(),
                    ));
                }
                if !(*blend_width > 0.0 && *blend_width < 0.25) {
                    return Err(Error::InvalidParameter(format!(
                        "blend_width must lie in (0, 0.25), got {blend_width}"
                    )));
                }
                Ok(())
            }
            InitialDataSpec::MirrorSymmetricProfile { amplitudes } => {
                if amplitudes.iter().any(|a| !a.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "profile amplitudes must be finite".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

// exp(-1/t) glued to 0: smooth, all derivatives vanish at t <= 0.
fn smooth_step(t: f64) -> f64 {
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

/// 0 within `w` of either end of [0,1], 1 on the middle plateau, smooth.
fn plateau(x: f64, w: f64) -> f64 {
    smooth_step((x - w) / w) * smooth_step((1.0 - x - w) / w)
}

/// Sample a data family on a grid. The result is unit length to rounding at
/// every node by construction.
pub fn generate_initial_data(spec: &InitialDataSpec, grid: &BoxGrid) -> Result<SphereField> {
    spec.validate()?;
    match spec {
        InitialDataSpec::ConstantNearBoundary { amplitude, mode_count, blend_width } => {
            let amplitude = *amplitude;
            let modes = *mode_count;
            let w = *blend_width;
            let dims = grid.dims();
            SphereField::from_fn(*grid, move |p| {
                let mut phi = amplitude;
                for &x in p.iter().take(dims) {
                    phi *= plateau(x, w);
                    if modes > 0 {
                        phi *= (modes as f64 * std::f64::consts::PI * x).cos();
                    }
                }
                Vec3::new(phi.sin(), 0.0, phi.cos())
            })
        }
        InitialDataSpec::MirrorSymmetricProfile { amplitudes } => {
            if grid.dims() != 1 {
                return Err(Error::RequiresOneDim(grid.dims()));
            }
            let amplitudes = amplitudes.clone();
            SphereField::from_fn(*grid, move |p| {
                let theta: f64 = amplitudes
                    .iter()
                    .enumerate()
                    .map(|(i, a)| a * ((i + 1) as f64 * std::f64::consts::PI * p[0]).cos())
                    .sum();
                Vec3::new(theta.sin(), 0.0, theta.cos())
            })
        }
    }
}
