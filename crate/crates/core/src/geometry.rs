//! Pointwise and fieldwise S^2 geometry kernels: tangent projection, tension
//! field, flow right-hand sides, and the pull-back covariant derivative.
//!
//! All field operations are pure; invariants (unit length, tangency) are
//! validated when the wrapper types are constructed, so the kernels
//! themselves never fail on admissible inputs.

use crate::error::{Error, Result};
use crate::grid::{BoxGrid, VectorField};
use crate::vec3::Vec3;

/// Default tolerance on `| |u| - 1 |` per node.
pub const DEFAULT_SPHERE_TOL: f64 = 1e-9;
/// Default tolerance on `|<X, u>|` per node for tangent fields.
pub const DEFAULT_TANGENCY_TOL: f64 = 1e-9;

/// Grid-sampled map into the unit sphere. Construction checks the sphere
/// invariant, so holding a value of this type certifies it.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereField {
    field: VectorField,
}

impl SphereField {
    pub fn new(field: VectorField) -> Result<Self> {
        Self::with_tol(field, DEFAULT_SPHERE_TOL)
    }

    pub fn with_tol(field: VectorField, tol: f64) -> Result<Self> {
        if !field.is_finite() {
            return Err(Error::NonFiniteField);
        }
        let violation = sphere_violation_of(&field);
        if violation > tol {
            return Err(Error::SphereViolation { violation, tol });
        }
        Ok(Self { field })
    }

    pub fn from_fn(grid: BoxGrid, f: impl Fn([f64; 3]) -> Vec3) -> Result<Self> {
        Self::new(VectorField::from_fn(grid, f))
    }

    /// Nodewise renormalization `u <- u / |u|`; the result satisfies the
    /// sphere invariant to rounding.
    pub fn renormalized(field: VectorField) -> Result<Self> {
        if !field.is_finite() {
            return Err(Error::NonFiniteField);
        }
        let grid = *field.grid();
        let values = field.into_values().into_iter().map(Vec3::normalized).collect();
        Ok(Self { field: VectorField::new(grid, values).expect("same length") })
    }

    pub fn grid(&self) -> &BoxGrid {
        self.field.grid()
    }

    pub fn values(&self) -> &[Vec3] {
        self.field.values()
    }

    pub fn as_field(&self) -> &VectorField {
        &self.field
    }

    pub fn into_field(self) -> VectorField {
        self.field
    }

    /// Max over nodes of `| |u| - 1 |`.
    pub fn sphere_violation(&self) -> f64 {
        sphere_violation_of(&self.field)
    }
}

fn sphere_violation_of(field: &VectorField) -> f64 {
    field
        .values()
        .iter()
        .map(|v| (v.norm() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Section of the pull-back tangent bundle along a sphere field.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentField {
    field: VectorField,
}

impl TangentField {
    /// Wrap a field after verifying nodewise tangency against `base`.
    pub fn checked(base: &SphereField, field: VectorField) -> Result<Self> {
        Self::checked_with_tol(base, field, DEFAULT_TANGENCY_TOL)
    }

    pub fn checked_with_tol(base: &SphereField, field: VectorField, tol: f64) -> Result<Self> {
        if base.grid() != field.grid() {
            return Err(Error::GridMismatch);
        }
        let violation = tangency_violation(base, &field);
        if violation > tol {
            return Err(Error::TangencyViolation { violation, tol });
        }
        Ok(Self { field })
    }

    /// For fields that are tangent by construction (projection output,
    /// cross products with the base field).
    fn tangent_by_construction(field: VectorField) -> Self {
        Self { field }
    }

    pub fn grid(&self) -> &BoxGrid {
        self.field.grid()
    }

    pub fn values(&self) -> &[Vec3] {
        self.field.values()
    }

    pub fn as_field(&self) -> &VectorField {
        &self.field
    }

    pub fn into_field(self) -> VectorField {
        self.field
    }
}

/// Max over nodes of `|<X, u>|`.
pub fn tangency_violation(base: &SphereField, field: &VectorField) -> f64 {
    base.values()
        .iter()
        .zip(field.values().iter())
        .map(|(u, x)| u.dot(*x).abs())
        .fold(0.0, f64::max)
}

/// Projection onto the tangent plane at `u`: `v - <v,u> u`.
///
/// Rejects base points that are off the sphere beyond the default tolerance,
/// signalling a constraint violation upstream.
pub fn project_tangent(u: Vec3, v: Vec3) -> Result<Vec3> {
    let violation = (u.norm() - 1.0).abs();
    if violation > DEFAULT_SPHERE_TOL {
        return Err(Error::SphereViolation { violation, tol: DEFAULT_SPHERE_TOL });
    }
    Ok(project_unchecked(u, v))
}

#[inline]
fn project_unchecked(u: Vec3, v: Vec3) -> Vec3 {
    v - u * v.dot(u)
}

/// Tension field `tau(u) = Lap u + |grad u|^2 u` for the sphere target.
///
/// The discrete result is projected onto the tangent plane nodewise as the
/// final step, so downstream integrators receive exactly tangent increments;
/// the projection removes only an O(h^2) normal defect and does not change
/// the consistency order.
pub fn tension_field(u: &SphereField) -> TangentField {
    let lap = u.as_field().laplacian_neumann();
    let gsq = u.as_field().gradient_norm_sq();
    let grid = *u.grid();
    let values = u
        .values()
        .iter()
        .zip(lap.values().iter())
        .zip(gsq.values().iter())
        .map(|((&uv, &lv), &g)| project_unchecked(uv, lv + uv * g))
        .collect();
    TangentField::tangent_by_construction(VectorField::new(grid, values).expect("same length"))
}

/// Right-hand side `u x Lap u` of the undamped flow. Tangency is exact by
/// the cross product.
pub fn schrodinger_rhs(u: &SphereField) -> TangentField {
    let lap = u.as_field().laplacian_neumann();
    let grid = *u.grid();
    let values = u
        .values()
        .iter()
        .zip(lap.values().iter())
        .map(|(&uv, &lv)| uv.cross(lv))
        .collect();
    TangentField::tangent_by_construction(VectorField::new(grid, values).expect("same length"))
}

/// Right-hand side `eps tau(u) + u x Lap u` of the damped flow.
///
/// At `eps = 0` this returns exactly `schrodinger_rhs(u)`, bit for bit.
pub fn llg_rhs(u: &SphereField, eps: f64) -> Result<TangentField> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::EpsOutOfRange(eps));
    }
    let sch = schrodinger_rhs(u);
    if eps == 0.0 {
        return Ok(sch);
    }
    let tension = tension_field(u);
    let grid = *u.grid();
    let values = sch
        .values()
        .iter()
        .zip(tension.values().iter())
        .map(|(&s, &t)| s + t * eps)
        .collect();
    Ok(TangentField::tangent_by_construction(
        VectorField::new(grid, values).expect("same length"),
    ))
}

/// Pull-back covariant derivative along one axis: the tangent projection
/// `P(u) d_a X` of the ambient derivative.
///
/// Interior nodes use central differences; boundary nodes use second-order
/// one-sided stencils so the result reflects actual boundary slopes rather
/// than a symmetry assumption.
pub fn covariant_derivative(
    u: &SphereField,
    x: &TangentField,
    axis: usize,
) -> Result<TangentField> {
    if u.grid() != x.grid() {
        return Err(Error::GridMismatch);
    }
    u.grid().check_axis(axis)?;
    let violation = tangency_violation(u, x.as_field());
    if violation > DEFAULT_TANGENCY_TOL {
        return Err(Error::TangencyViolation { violation, tol: DEFAULT_TANGENCY_TOL });
    }
    Ok(covariant_derivative_unchecked(u, x.as_field(), axis))
}

/// Same as `covariant_derivative` but accepts a raw vector field; used to
/// seed derivative ladders with `d_x u` itself.
pub fn covariant_derivative_unchecked(
    u: &SphereField,
    x: &VectorField,
    axis: usize,
) -> TangentField {
    let dx = x.derivative_one_sided(axis).expect("axis checked by caller");
    let grid = *u.grid();
    let values = u
        .values()
        .iter()
        .zip(dx.values().iter())
        .map(|(&uv, &dv)| project_unchecked(uv, dv))
        .collect();
    TangentField::tangent_by_construction(VectorField::new(grid, values).expect("same length"))
}
